//! Detect a design problem whose optimum does not exist.
//!
//! Under a random slope with unequal observation counts, the A-criterion's
//! infimum is approached by pushing one group's design toward a single point —
//! a singular moment matrix. No optimal approximate design exists. A naive
//! solver would either grind forever or return a near-degenerate design as if
//! it were optimal; this one probes the boundary limit and reports the
//! degeneracy explicitly.

use rcr_design::criteria::Criterion;
use rcr_design::linalg::{Matrix, SpdMatrix};
use rcr_design::model::{monomial_grid, CompoundProblem, GroupSpec};
use rcr_design::solver::{solve, SolveStatus, SolverConfig};

fn main() -> rcr_design::Result<()> {
    let group = |m: usize| {
        GroupSpec::new(
            monomial_grid(&[0.0, 1.0], 1)?,
            SpdMatrix::identity(1),
            Matrix::diag(&[0.0, 1.0]), // random slope, variance 1
            m,
            1,
        )
    };
    // m differs across groups: the singular-design phenomenon appears
    let prob = CompoundProblem::new(vec![group(2)?, group(8)?], Criterion::a(2))?;

    let report = solve(&prob, &SolverConfig::default())?;
    match report.status {
        SolveStatus::NotAttained { group } => {
            println!(
                "optimum not attained: group {group}'s design degenerates toward a single point"
            );
            println!(
                "  criterion value along the minimizing sequence: {:.9} (gap {:.2e})",
                report.value, report.gap
            );
            println!("  last iterate weights:");
            for (i, d) in report.designs.iter().enumerate() {
                println!("    group {i}: {:?}", d.weights());
            }
        }
        other => panic!("expected NotAttained, solver reported {other:?}"),
    }

    // with equal observation counts the optimum exists and is balanced
    let prob_eq = CompoundProblem::new(vec![group(5)?, group(5)?], Criterion::a(2))?;
    let report = solve(&prob_eq, &SolverConfig::default())?;
    println!(
        "equal-m control case converges: status {:?}, value {:.9}",
        report.status, report.value
    );
    Ok(())
}
