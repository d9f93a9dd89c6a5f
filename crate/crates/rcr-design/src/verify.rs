//! Optimality certificates, independent of how a candidate was produced.
//!
//! A design tuple is certified by scanning every grid point of every group:
//! optimality requires the point sensitivity lhs_t to stay at or below the
//! group mean rhs (slack = rhs − lhs_t ≥ 0), with equality on the support.
//! Slacks are reported raw and normalized by 1 + |rhs|, since the criterion
//! scale varies over orders of magnitude with the group sizes. Two further
//! probes back the certificate: a both-sided saddle-point sampling of the
//! directional derivative, and a reduction check that recovers the compound
//! optimum from a single-group problem when all groups are identical.

use crate::criteria::{evaluate, Criterion};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{CompoundProblem, Design, GroupSpec, SUPPORT_THRESHOLD};
use crate::solver::{solve, SolveStatus, SolverConfig};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

// Internal settings for the reduction check's solve-then-verify round trip.
const REDUCTION_GAP_TOL: f64 = 1e-9;
const REDUCTION_VERIFY_TOL: f64 = 1e-6;

/// Sensitivity of one grid point of one group.
#[derive(Debug, Clone, Serialize)]
pub struct PointReport {
    pub index: usize,
    pub label: String,
    pub weight: f64,
    /// Point sensitivity tr(Ψᵢ·M(δ_t)).
    pub lhs: f64,
    /// Design mean tr(Ψᵢ·M(ξᵢ)); equals the weighted mean of the lhs column.
    pub rhs: f64,
    /// Raw slack rhs − lhs; negative values refute optimality.
    pub slack: f64,
    /// Slack normalized by 1 + |rhs|; certification compares this to the tolerance.
    pub normalized_slack: f64,
    pub supported: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GroupReport {
    pub group: usize,
    pub points: Vec<PointReport>,
    /// Largest normalized optimality violation max(0, −normalized_slack).
    pub max_violation: f64,
    /// Largest |normalized_slack| over supported points (equality clause).
    pub max_support_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub value: f64,
    pub tolerance: f64,
    pub per_group: Vec<GroupReport>,
    pub max_violation: f64,
    pub max_support_residual: f64,
    pub certified: bool,
}

/// Certifies or refutes a candidate design tuple by a full grid scan.
/// Certified iff every normalized slack is ≥ −tol and every supported point's
/// |normalized slack| is ≤ tol. Pure: repeated calls give identical reports.
pub fn verify(prob: &CompoundProblem, designs: &[Design], tol: f64) -> Result<VerificationReport> {
    let ev = evaluate(prob, designs)?;
    let mut per_group = Vec::with_capacity(prob.s());
    let mut max_violation = 0.0f64;
    let mut max_support_residual = 0.0f64;
    for (i, g) in prob.groups().iter().enumerate() {
        let weights = designs[i].weights();
        let mut points = Vec::with_capacity(g.k());
        let mut group_violation = 0.0f64;
        let mut group_residual = 0.0f64;
        for t in 0..g.k() {
            let (lhs, rhs) = ev.sensitivity(i, t)?;
            let slack = rhs - lhs;
            let normalized_slack = slack / (1.0 + rhs.abs());
            let supported = weights[t] > SUPPORT_THRESHOLD;
            group_violation = group_violation.max(-normalized_slack);
            if supported {
                group_residual = group_residual.max(normalized_slack.abs());
            }
            points.push(PointReport {
                index: t,
                label: g.label(t).to_string(),
                weight: weights[t],
                lhs,
                rhs,
                slack,
                normalized_slack,
                supported,
            });
        }
        max_violation = max_violation.max(group_violation);
        max_support_residual = max_support_residual.max(group_residual);
        per_group.push(GroupReport {
            group: i,
            points,
            max_violation: group_violation,
            max_support_residual: group_residual,
        });
    }
    Ok(VerificationReport {
        value: ev.value(),
        tolerance: tol,
        per_group,
        max_violation,
        max_support_residual,
        certified: max_violation <= tol && max_support_residual <= tol,
    })
}

/// Samples `trials` random design tuples and measures how badly the saddle
/// inequalities fail at the candidate: the derivative at the candidate toward
/// any tuple must be ≥ 0, and the derivative at any tuple toward the candidate
/// must be ≤ 0. Returns the larger of the two normalized violation maxima
/// (0 at a true optimum, up to roundoff).
pub fn saddle_check(
    prob: &CompoundProblem,
    designs: &[Design],
    trials: usize,
    seed: u64,
) -> Result<f64> {
    let ev_star = evaluate(prob, designs)?;
    let scale = 1.0 + ev_star.value().abs();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let tuple = random_tuple(prob, &mut rng)?;
        // at the candidate, moving toward the sample must not descend
        let outward = ev_star.directional_derivative(&tuple)?;
        worst = worst.max(-outward / scale);
        // at the sample, moving toward the candidate must not ascend
        let ev_tilde = evaluate(prob, &tuple)?;
        let inward = ev_tilde.directional_derivative(designs)?;
        worst = worst.max(inward / scale);
    }
    Ok(worst)
}

// Uniform (Dirichlet(1,…,1)) sample on each group's simplex, resampled while
// the tuple is infeasible.
fn random_tuple(prob: &CompoundProblem, rng: &mut ChaCha8Rng) -> Result<Vec<Design>> {
    for _ in 0..100 {
        let tuple: Vec<Design> = prob
            .groups()
            .iter()
            .map(|g| {
                let w: Vec<f64> = (0..g.k())
                    .map(|_| -(1.0 - rng.gen::<f64>()).ln())
                    .collect();
                Design::from_unnormalized(w)
            })
            .collect::<Result<_>>()?;
        if evaluate(prob, &tuple).is_ok() {
            return Ok(tuple);
        }
    }
    Err(Error::NoFeasibleStart { attempts: 100 })
}

/// Checks the single-group reduction on a problem whose groups are identical:
/// for a linear criterion the fixed-effects optimum (dispersion dropped), and
/// for the determinant criterion the dispersion-adjusted single-group optimum,
/// must replicate into a certified optimum of the compound problem. Returns
/// the certified flag of that verification.
pub fn corollary_reduction_check(prob: &CompoundProblem) -> Result<bool> {
    require_identical_groups(prob)?;
    let template = prob.group(0);
    let reduced_dmat = match prob.criterion() {
        // fixed-effects reduction: dispersion plays no role in the optimizer
        Criterion::L { .. } => Matrix::zeros(prob.p(), prob.p()),
        // single-group reduction keeps the dispersion adjustment
        Criterion::D => template.dmat().clone(),
    };
    let reduced_group = GroupSpec::new(
        template.points().to_vec(),
        template.sigma().clone(),
        reduced_dmat,
        template.m(),
        1,
    )?;
    let reduced = CompoundProblem::new(vec![reduced_group], prob.criterion().clone())?;
    let config = SolverConfig { gap_tol: REDUCTION_GAP_TOL, ..SolverConfig::default() };
    let report = solve(&reduced, &config)?;
    if report.status != SolveStatus::Converged {
        return Ok(false);
    }
    let replicated = vec![report.designs[0].clone(); prob.s()];
    Ok(verify(prob, &replicated, REDUCTION_VERIFY_TOL)?.certified)
}

fn require_identical_groups(prob: &CompoundProblem) -> Result<()> {
    let first = prob.group(0);
    for (i, g) in prob.groups().iter().enumerate().skip(1) {
        if g.k() != first.k() {
            return Err(Error::GroupsNotIdentical(format!(
                "group {i} has {} grid points, group 0 has {}",
                g.k(),
                first.k()
            )));
        }
        for t in 0..first.k() {
            if g.label(t) != first.label(t) {
                return Err(Error::GroupsNotIdentical(format!(
                    "grid point {t} label differs: {:?} vs {:?}",
                    g.label(t),
                    first.label(t)
                )));
            }
            let (a, b) = (&g.points()[t].gmat, &first.points()[t].gmat);
            if a.rows() != b.rows() || a.cols() != b.cols() || a.max_abs_diff(b) != 0.0 {
                return Err(Error::GroupsNotIdentical(format!(
                    "regression rows differ at grid point {t}"
                )));
            }
        }
        if g.l() != first.l() || g.sigma().matrix().max_abs_diff(first.sigma().matrix()) != 0.0 {
            return Err(Error::GroupsNotIdentical(format!(
                "observation covariance differs in group {i}"
            )));
        }
        if g.dmat().max_abs_diff(first.dmat()) != 0.0 {
            return Err(Error::GroupsNotIdentical(format!(
                "dispersion matrix differs in group {i}"
            )));
        }
        if g.m() != first.m() {
            return Err(Error::GroupsNotIdentical(format!(
                "observations per unit differ: group {i} has {}, group 0 has {}",
                g.m(),
                first.m()
            )));
        }
        // group counts n_i may differ: the reduction is insensitive to them
    }
    Ok(())
}

/// Directional derivative of the criterion at `designs` toward `target`,
/// exposed for saddle diagnostics.
pub fn directional_derivative(
    prob: &CompoundProblem,
    designs: &[Design],
    target: &[Design],
) -> Result<f64> {
    evaluate(prob, designs)?.directional_derivative(target)
}
