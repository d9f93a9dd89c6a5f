//! Certify or refute a candidate design tuple from JSON documents.
//!
//! Verification is independent of the solver: it scans every grid point and
//! checks the equivalence inequality lhs ≤ rhs (with equality on the support).
//! Here the balanced design (1/2, 1/2) is certified D-optimal under a random
//! intercept, and a lopsided candidate is refuted with a pinpointed violation.

use rcr_design::io::parse_problem;
use rcr_design::model::Design;
use rcr_design::verify::verify;

const PROBLEM: &str = r#"{
    "groups": [
        {"n": 1, "m": 2, "sigma": 1.0, "D": [[1.0, 0.0], [0.0, 0.0]],
         "grid": {"basis": "monomial", "degree": 1, "points": [0.0, 1.0]}},
        {"n": 1, "m": 8, "sigma": 1.0, "D": [[1.0, 0.0], [0.0, 0.0]],
         "grid": {"basis": "monomial", "degree": 1, "points": [0.0, 1.0]}}
    ],
    "criterion": {"type": "D"}
}"#;

fn main() -> rcr_design::Result<()> {
    let (prob, _) = parse_problem(PROBLEM)?;

    // the D-optimum under a random intercept is (1/2, 1/2) for every
    // combination of group sizes and observation counts
    let optimal = vec![
        Design::new(vec![0.5, 0.5])?,
        Design::new(vec![0.5, 0.5])?,
    ];
    let report = verify(&prob, &optimal, 1e-6)?;
    println!(
        "balanced candidate: value {:.9}, max violation {:.2e} -> certified: {}",
        report.value, report.max_violation, report.certified
    );
    assert!(report.certified);

    let lopsided = vec![
        Design::new(vec![0.1, 0.9])?,
        Design::new(vec![0.5, 0.5])?,
    ];
    let report = verify(&prob, &lopsided, 1e-6)?;
    println!(
        "lopsided candidate: value {:.9}, max violation {:.2e} -> certified: {}",
        report.value, report.max_violation, report.certified
    );
    assert!(!report.certified);
    for g in &report.per_group {
        for pt in g.points.iter().filter(|pt| pt.normalized_slack < -1e-6) {
            println!(
                "  violated at group {} point {}: moving weight there improves the criterion",
                g.group, pt.label
            );
        }
    }
    Ok(())
}
