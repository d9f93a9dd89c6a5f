//! Simplex optimization of compound design criteria.
//!
//! The default algorithm performs cyclic sweeps over the groups; each group
//! update is a vertex-direction (conditional-gradient) step toward the best
//! grid point, followed by an away step that moves mass off the worst support
//! point (dropping it exactly when the line search lands on the cap). Two
//! alternatives — a multiplicative reweighting and a projected-gradient step —
//! share the same sweep scaffolding. Every accepted step is monotone in the
//! criterion value, and the run is a pure function of (problem, config, seed).

use crate::criteria::{evaluate, evaluate_from_moments, value_from_moments, Evaluation};
use crate::error::{Error, Result};
use crate::linalg::{trace_product, Matrix, SpdMatrix};
use crate::model::{moment_matrix, CompoundProblem, Design};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::str::FromStr;

/// Normalized equivalence-gap threshold declaring convergence.
pub const DEFAULT_GAP_TOL: f64 = 1e-7;
/// Interval tolerance of the golden-section line search on step fractions.
pub const GOLDEN_SECTION_TOL: f64 = 1e-10;
/// Weights at or below this are zeroed between sweeps (when value allows).
pub const PRUNE_THRESHOLD: f64 = 1e-10;
/// Accepted steps may increase the value by at most this relative slack.
pub const MONOTONE_SLACK: f64 = 1e-12;
// Degeneracy: gap stuck above tolerance while a moment-matrix pivot stays
// below the floor for this many consecutive sweeps.
const DEGENERACY_PIVOT_FLOOR: f64 = 1e-8;
const DEGENERACY_PERSISTENCE: usize = 5;
// A closed gap with a relative pivot this small triggers the limit-design
// probe: weights at or below the vanishing threshold are dropped and the
// remaining support is tested for singularity.
const DEGENERACY_SUSPECT_PIVOT: f64 = 1e-4;
const VANISHING_WEIGHT: f64 = 1e-3;
const LIMIT_SINGULAR_PIVOT: f64 = 1e-10;

/// Group-update algorithm run inside each sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    VertexDirection,
    Multiplicative,
    ProjectedGradient,
}

impl FromStr for Algorithm {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "vertex-direction" => Ok(Self::VertexDirection),
            "multiplicative" => Ok(Self::Multiplicative),
            "projected-gradient" => Ok(Self::ProjectedGradient),
            other => Err(format!(
                "unknown algorithm {other:?}; expected vertex-direction, multiplicative, or projected-gradient"
            )),
        }
    }
}

/// Step-size rule for line searches along a fixed direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepRule {
    /// Golden-section search to interval tolerance [`GOLDEN_SECTION_TOL`].
    #[serde(rename = "exact-line-search-1d")]
    ExactLineSearch,
    /// Backtracking with the sufficient-decrease condition.
    Armijo,
}

impl FromStr for StepRule {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "exact-line-search-1d" => Ok(Self::ExactLineSearch),
            "armijo" => Ok(Self::Armijo),
            other => Err(format!(
                "unknown step rule {other:?}; expected exact-line-search-1d or armijo"
            )),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    pub max_iters: usize,
    pub gap_tol: f64,
    pub step_rule: StepRule,
    /// Attempts at a random feasible start when the uniform design is singular.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::VertexDirection,
            max_iters: 10_000,
            gap_tol: DEFAULT_GAP_TOL,
            step_rule: StepRule::ExactLineSearch,
            restarts: 8,
            seed: 0,
        }
    }
}

/// How a run ended. `MaxItersExceeded` is reported, not raised as an error.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SolveStatus {
    Converged,
    MaxItersExceeded,
    /// The infimum is approached at a singular boundary: the gap stayed above
    /// tolerance while `group`'s moment matrix collapsed toward singularity.
    NotAttained { group: usize },
}

#[derive(Debug, Clone, Serialize)]
pub struct HistoryEntry {
    pub iteration: usize,
    pub value: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub designs: Vec<Design>,
    pub value: f64,
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
    pub status: SolveStatus,
    pub history: Vec<HistoryEntry>,
}

/// Normalized equivalence gap at a design tuple (see [`Evaluation::gap`]).
pub fn equivalence_gap(prob: &CompoundProblem, designs: &[Design]) -> Result<f64> {
    evaluate(prob, designs)?.gap()
}

/// Minimizes the criterion over design tuples. Deterministic given
/// (problem, config): the seed only drives the random feasible-start fallback.
pub fn solve(prob: &CompoundProblem, config: &SolverConfig) -> Result<SolveReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut designs = feasible_start(prob, config, &mut rng)?;
    let mut ev = evaluate(prob, &designs)?;
    let mut gap = ev.gap()?;
    let mut history = vec![HistoryEntry { iteration: 0, value: ev.value(), gap }];
    let mut degenerate_streak = 0usize;
    let mut iterations = 0usize;

    while iterations < config.max_iters {
        iterations += 1;
        for i in 0..prob.s() {
            let updated = match config.algorithm {
                Algorithm::VertexDirection => vertex_direction_update(prob, &ev, &designs, i, config.step_rule)?,
                Algorithm::Multiplicative => multiplicative_update(prob, &ev, &designs, i)?,
                Algorithm::ProjectedGradient => projected_gradient_update(prob, &ev, &designs, i, config.step_rule)?,
            };
            if let Some(d) = updated {
                designs[i] = d;
                ev = evaluate(prob, &designs)?;
            }
        }
        if let Some(pruned) = prune_tiny_weights(prob, &designs, ev.value())? {
            designs = pruned;
            ev = evaluate(prob, &designs)?;
        }
        gap = ev.gap()?;
        history.push(HistoryEntry { iteration: iterations, value: ev.value(), gap });
        let (pivot, group) = ev.min_moment_pivot();
        if gap <= config.gap_tol {
            // A tiny gap certifies optimality only when the limit of the
            // iterates is feasible. A collapsed pivot here means the sequence
            // is minimizing into the boundary; the infimum is then attained
            // only if the limit design (vanishing weights dropped) stays
            // nonsingular.
            let status = match boundary_collapse(prob, &designs, pivot, group) {
                Some(g) => SolveStatus::NotAttained { group: g },
                None => SolveStatus::Converged,
            };
            return Ok(report(designs, ev.value(), gap, iterations, status, history));
        }
        if pivot < DEGENERACY_PIVOT_FLOOR {
            degenerate_streak += 1;
            if degenerate_streak >= DEGENERACY_PERSISTENCE {
                return Ok(report(
                    designs,
                    ev.value(),
                    gap,
                    iterations,
                    SolveStatus::NotAttained { group },
                    history,
                ));
            }
        } else {
            degenerate_streak = 0;
        }
    }
    Ok(report(designs, ev.value(), gap, iterations, SolveStatus::MaxItersExceeded, history))
}

// Decides whether a closed-gap iterate is a genuine optimum or a minimizing
// sequence into a singular boundary. Returns the offending group if the
// latter. The probe drops weights at or below the vanishing threshold and
// refactorizes: an attained (merely ill-conditioned) optimum keeps a
// nonsingular moment matrix, a boundary infimum does not.
fn boundary_collapse(
    prob: &CompoundProblem,
    designs: &[Design],
    min_pivot: f64,
    group: usize,
) -> Option<usize> {
    if min_pivot >= DEGENERACY_SUSPECT_PIVOT {
        return None;
    }
    let g = prob.group(group);
    let truncated: Vec<f64> = designs[group]
        .weights()
        .iter()
        .map(|&x| if x <= VANISHING_WEIGHT { 0.0 } else { x })
        .collect();
    let Ok(limit) = Design::from_unnormalized(truncated) else {
        return Some(group); // every weight is vanishing
    };
    match moment_matrix(g, &limit).and_then(SpdMatrix::from_matrix) {
        Ok(spd) if spd.min_relative_pivot() > LIMIT_SINGULAR_PIVOT => None,
        _ => Some(group),
    }
}

fn report(
    designs: Vec<Design>,
    value: f64,
    gap: f64,
    iterations: usize,
    status: SolveStatus,
    history: Vec<HistoryEntry>,
) -> SolveReport {
    SolveReport {
        designs,
        value,
        gap,
        iterations,
        converged: status == SolveStatus::Converged,
        status,
        history,
    }
}

/// One vertex-direction step for group `i`: move toward the grid point with
/// the most negative directional derivative, step length by golden-section
/// line search on [0, 1]. Never increases the value; returns the input design
/// when no descent direction exists.
pub fn vertex_direction_step(
    prob: &CompoundProblem,
    designs: &[Design],
    i: usize,
) -> Result<Design> {
    let ev = evaluate(prob, designs)?;
    Ok(toward_vertex(prob, &ev, designs, i, StepRule::ExactLineSearch)?
        .map(|(d, _)| d)
        .unwrap_or_else(|| designs[i].clone()))
}

// Toward-vertex then away-step update used by the default algorithm.
fn vertex_direction_update(
    prob: &CompoundProblem,
    ev: &Evaluation,
    designs: &[Design],
    i: usize,
    rule: StepRule,
) -> Result<Option<Design>> {
    let mut current = designs[i].clone();
    let mut changed = false;
    if let Some((d, _)) = toward_vertex(prob, ev, designs, i, rule)? {
        current = d;
        changed = true;
    }
    // refresh the evaluation for the away step only if the design moved
    let designs_mid: Vec<Design>;
    let ev_mid_storage;
    let (ev_mid, designs_ref): (&Evaluation, &[Design]) = if changed {
        designs_mid = {
            let mut v = designs.to_vec();
            v[i] = current.clone();
            v
        };
        ev_mid_storage = evaluate(prob, &designs_mid)?;
        (&ev_mid_storage, &designs_mid)
    } else {
        (ev, designs)
    };
    if let Some((d, _)) = away_from_vertex(prob, ev_mid, designs_ref, i, rule)? {
        current = d;
        changed = true;
    }
    Ok(changed.then_some(current))
}

// Line-searched step along the segment from design i toward `target`.
// Returns None when the segment is not a descent direction or the search
// cannot improve the value.
fn segment_step(
    prob: &CompoundProblem,
    ev: &Evaluation,
    designs: &[Design],
    i: usize,
    target: &Design,
    rule: StepRule,
) -> Result<Option<(Design, f64)>> {
    let g = prob.group(i);
    let dphi0 = ev.partial_derivative(i, target)?;
    if dphi0 >= 0.0 {
        return Ok(None);
    }
    let moments = current_moments(ev, prob.s());
    let m_cur = moments[i].clone();
    let m_target = moment_matrix(g, target)?;
    let diff = m_target.sub(&m_cur)?;
    let value0 = ev.value();
    let nm = g.nm();
    let moment_at = |alpha: f64| {
        let mut m = m_cur.clone();
        m.add_scaled_assign(alpha, &diff).expect("shapes agree");
        m
    };
    let mut phi = |alpha: f64| {
        let mut ms = moments.clone();
        ms[i] = moment_at(alpha);
        value_from_moments(prob, &ms)
    };
    // directional derivative dφ/dα at the mixed design, +∞ past feasibility
    let mut dphi = |alpha: f64| {
        let mut ms = moments.clone();
        ms[i] = moment_at(alpha);
        match evaluate_from_moments(prob, ms) {
            Ok(ev_alpha) => {
                let ge = ev_alpha.group(i);
                match trace_product(&ge.core, &m_target) {
                    Ok(tr) => -nm * (tr - ge.rhs),
                    Err(_) => f64::INFINITY,
                }
            }
            Err(_) => f64::INFINITY,
        }
    };
    let (alpha, val) = search_step(&mut phi, &mut dphi, value0, dphi0, rule);
    if alpha <= 0.0 || val > value0 + MONOTONE_SLACK * (1.0 + value0.abs()) {
        return Ok(None);
    }
    let stepped = designs[i].mix(target, alpha)?;
    if stepped.weights() == designs[i].weights() {
        return Ok(None); // step below weight resolution
    }
    Ok(Some((stepped, val)))
}

fn toward_vertex(
    prob: &CompoundProblem,
    ev: &Evaluation,
    designs: &[Design],
    i: usize,
    rule: StepRule,
) -> Result<Option<(Design, f64)>> {
    let g = prob.group(i);
    // derivative toward δ_t is nm·(rhs − lhs_t): the best direction maximizes lhs
    let mut best_t = 0usize;
    let mut best_lhs = f64::NEG_INFINITY;
    for t in 0..g.k() {
        let (lhs, _) = ev.sensitivity(i, t)?;
        if lhs > best_lhs {
            best_lhs = lhs;
            best_t = t;
        }
    }
    let delta = Design::delta(g.k(), best_t)?;
    segment_step(prob, ev, designs, i, &delta, rule)
}

fn away_from_vertex(
    prob: &CompoundProblem,
    ev: &Evaluation,
    designs: &[Design],
    i: usize,
    rule: StepRule,
) -> Result<Option<(Design, f64)>> {
    let g = prob.group(i);
    let w = designs[i].weights();
    // worst support point: the supported vertex with the largest positive
    // derivative, i.e. the smallest lhs
    let mut worst: Option<(usize, f64)> = None;
    for t in 0..g.k() {
        if w[t] <= 0.0 {
            continue;
        }
        let (lhs, _) = ev.sensitivity(i, t)?;
        if worst.map_or(true, |(_, l)| lhs < l) {
            worst = Some((t, lhs));
        }
    }
    let Some((t_away, _)) = worst else { return Ok(None) };
    if 1.0 - w[t_away] < 1e-12 {
        return Ok(None); // the design is that single vertex; nothing to move to
    }
    // moving along M + β(M − M_away) is the segment toward the drop design
    // (the current design with that vertex removed and renormalized), so a
    // full step drops the vertex exactly
    let mut dropped = w.to_vec();
    dropped[t_away] = 0.0;
    let target = Design::from_unnormalized(dropped)?;
    segment_step(prob, ev, designs, i, &target, rule)
}

fn multiplicative_update(
    prob: &CompoundProblem,
    ev: &Evaluation,
    designs: &[Design],
    i: usize,
) -> Result<Option<Design>> {
    let g = prob.group(i);
    let w = designs[i].weights();
    let mut lhs = Vec::with_capacity(g.k());
    let mut rhs = 0.0;
    for t in 0..g.k() {
        let (l, r) = ev.sensitivity(i, t)?;
        lhs.push(l);
        rhs = r;
    }
    if rhs <= 0.0 {
        return Ok(None);
    }
    let value0 = ev.value();
    // damped fixed-point iteration w_t ∝ w_t·(lhs_t/rhs)^λ, halving λ until monotone
    let mut lambda = 1.0;
    for _ in 0..16 {
        let candidate: Vec<f64> = w
            .iter()
            .zip(&lhs)
            .map(|(&wt, &lt)| if wt > 0.0 { wt * (lt / rhs).powf(lambda) } else { 0.0 })
            .collect();
        if let Ok(d) = Design::from_unnormalized(candidate) {
            let mut trial = designs.to_vec();
            trial[i] = d.clone();
            match evaluate(prob, &trial) {
                Ok(ev_new) if ev_new.value() <= value0 + MONOTONE_SLACK * (1.0 + value0.abs()) => {
                    if ev_new.value() < value0 {
                        return Ok(Some(d));
                    }
                    return Ok(None); // fixed point reached
                }
                _ => {}
            }
        }
        lambda *= 0.5;
    }
    Ok(None)
}

fn projected_gradient_update(
    prob: &CompoundProblem,
    ev: &Evaluation,
    designs: &[Design],
    i: usize,
    rule: StepRule,
) -> Result<Option<Design>> {
    let grad = ev.weight_gradient(i)?;
    let w = designs[i].weights();
    let gmax = grad.iter().map(|x| x.abs()).fold(0.0, f64::max);
    if gmax == 0.0 {
        return Ok(None);
    }
    let eta = 1.0 / gmax;
    let target: Vec<f64> = w.iter().zip(&grad).map(|(&wt, &gt)| wt - eta * gt).collect();
    let projected = project_simplex(&target);
    if designs[i]
        .weights()
        .iter()
        .zip(projected.weights())
        .all(|(a, b)| (a - b).abs() <= 1e-15)
    {
        return Ok(None);
    }
    Ok(segment_step(prob, ev, designs, i, &projected, rule)?.map(|(d, _)| d))
}

fn current_moments(ev: &Evaluation, s: usize) -> Vec<Matrix> {
    (0..s).map(|r| ev.group(r).moment.clone()).collect()
}

// Step fraction in [0, 1] minimizing φ; also probes the right endpoint so
// full steps (exact drops) are taken when they win.
fn search_step(
    phi: &mut impl FnMut(f64) -> f64,
    dphi: &mut impl FnMut(f64) -> f64,
    phi0: f64,
    dphi0: f64,
    rule: StepRule,
) -> (f64, f64) {
    match rule {
        StepRule::ExactLineSearch => {
            let (gs_a, gs_v) = golden_section_minimize(phi, 0.0, 1.0, GOLDEN_SECTION_TOL);
            // Value comparisons cannot localize a flat minimum below √ε, so
            // polish by bisecting the derivative sign (φ is convex along the
            // segment; +∞ past the feasibility boundary reads as positive).
            // Near convergence the polished step may improve the value by
            // less than one ulp, so derivative-justified steps win value ties.
            let polished = if dphi(1.0) <= 0.0 {
                1.0 // derivative still negative at the end: minimum at the cap
            } else {
                let (mut lo, mut hi) = (0.0f64, 1.0f64);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break; // interval narrower than one ulp
                    }
                    if dphi(mid) < 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            };
            let polished_v = phi(polished);
            let slack = MONOTONE_SLACK * (1.0 + phi0.abs());
            if polished_v <= phi0 + slack && polished_v <= gs_v + slack {
                (polished, polished_v)
            } else if gs_v < phi0 {
                (gs_a, gs_v)
            } else {
                (0.0, phi0)
            }
        }
        StepRule::Armijo => {
            let mut alpha = 1.0;
            for _ in 0..60 {
                let v = phi(alpha);
                if v <= phi0 + 1e-4 * alpha * dphi0 {
                    return (alpha, v);
                }
                alpha *= 0.5;
            }
            (0.0, phi0)
        }
    }
}

/// Golden-section search for the minimum of a unimodal function on [a, b].
/// Returns (argmin, min) among the evaluated points.
fn golden_section_minimize(
    f: &mut impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    tol: f64,
) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8; // (√5 − 1)/2
    let (mut lo, mut hi) = (a, b);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

// Zeroes weights at or below the prune threshold when doing so keeps the value
// finite and monotone; returns None when nothing changed or pruning must wait.
fn prune_tiny_weights(
    prob: &CompoundProblem,
    designs: &[Design],
    value: f64,
) -> Result<Option<Vec<Design>>> {
    let mut changed = false;
    let pruned: Vec<Design> = designs
        .iter()
        .map(|d| {
            let w: Vec<f64> = d
                .weights()
                .iter()
                .map(|&x| {
                    if x > 0.0 && x <= PRUNE_THRESHOLD {
                        changed = true;
                        0.0
                    } else {
                        x
                    }
                })
                .collect();
            Design::from_unnormalized(w)
        })
        .collect::<Result<_>>()?;
    if !changed {
        return Ok(None);
    }
    match evaluate(prob, &pruned) {
        Ok(ev) if ev.value() <= value + MONOTONE_SLACK * (1.0 + value.abs()) => Ok(Some(pruned)),
        _ => Ok(None),
    }
}

fn feasible_start(
    prob: &CompoundProblem,
    config: &SolverConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Design>> {
    let mut designs = Vec::with_capacity(prob.s());
    for g in prob.groups() {
        let uniform = Design::uniform(g.k());
        if group_feasible(g, &uniform) {
            designs.push(uniform);
            continue;
        }
        let subset_size = g.p().min(g.k());
        let mut found = None;
        for _ in 0..config.restarts {
            let idx = rand::seq::index::sample(rng, g.k(), subset_size);
            let mut w = vec![0.0; g.k()];
            for j in idx.iter() {
                w[j] = 1.0 / subset_size as f64;
            }
            let candidate = Design::from_unnormalized(w)?;
            if group_feasible(g, &candidate) {
                found = Some(candidate);
                break;
            }
        }
        match found {
            Some(d) => designs.push(d),
            None => {
                return Err(Error::NoFeasibleStart { attempts: config.restarts });
            }
        }
    }
    Ok(designs)
}

fn group_feasible(g: &crate::model::GroupSpec, d: &Design) -> bool {
    moment_matrix(g, d)
        .and_then(SpdMatrix::from_matrix)
        .is_ok()
}

/// Euclidean projection of an arbitrary vector onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Design {
    let k = v.len();
    assert!(k > 0, "cannot project an empty vector");
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (j, &x) in sorted.iter().enumerate() {
        cumsum += x;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if x - t > 0.0 {
            tau = t;
        }
    }
    let w: Vec<f64> = v.iter().map(|&x| (x - tau).max(0.0)).collect();
    Design::from_unnormalized(w).expect("projection output is on the simplex")
}

/// Rounds an approximate design to m observations by largest remainders,
/// breaking ties toward the lower index.
pub fn round_to_exact(design: &Design, m: usize) -> Vec<usize> {
    let scaled: Vec<f64> = design.weights().iter().map(|w| w * m as f64).collect();
    let mut counts: Vec<usize> = scaled.iter().map(|x| x.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = scaled[a] - scaled[a].floor();
        let rb = scaled[b] - scaled[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &idx in order.iter().take(m.saturating_sub(assigned)) {
        counts[idx] += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criteria::Criterion;
    use crate::linalg::SpdMatrix;
    use crate::model::{monomial_grid, GroupSpec};
    use proptest::prelude::*;

    fn line_problem(
        n: [usize; 2],
        m: [usize; 2],
        d1: f64,
        d2: f64,
        criterion: Criterion,
    ) -> CompoundProblem {
        let groups = (0..2)
            .map(|i| {
                GroupSpec::new(
                    monomial_grid(&[0.0, 1.0], 1).unwrap(),
                    SpdMatrix::identity(1),
                    Matrix::diag(&[d1, d2]),
                    m[i],
                    n[i],
                )
                .unwrap()
            })
            .collect();
        CompoundProblem::new(groups, criterion).unwrap()
    }

    fn single_group(d1: f64, d2: f64, m: usize, criterion: Criterion) -> CompoundProblem {
        let g = GroupSpec::new(
            monomial_grid(&[0.0, 1.0], 1).unwrap(),
            SpdMatrix::identity(1),
            Matrix::diag(&[d1, d2]),
            m,
            1,
        )
        .unwrap();
        CompoundProblem::new(vec![g], criterion).unwrap()
    }

    #[test]
    fn project_simplex_known_cases() {
        assert_eq!(project_simplex(&[0.6, 0.6]).weights(), &[0.5, 0.5]);
        assert_eq!(project_simplex(&[2.0, 0.0]).weights(), &[1.0, 0.0]);
        let d = project_simplex(&[0.2, 0.3, 0.5]);
        for (a, b) in d.weights().iter().zip(&[0.2, 0.3, 0.5]) {
            assert!((a - b).abs() <= 1e-15, "already-feasible point moved");
        }
    }

    #[test]
    fn round_to_exact_largest_remainder_with_low_index_ties() {
        let d = Design::new(vec![0.725, 0.275]).unwrap();
        assert_eq!(round_to_exact(&d, 8), vec![6, 2]);
        // tie on remainders 0.5/0.5: lower index wins the extra unit
        let d = Design::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(round_to_exact(&d, 3), vec![2, 1]);
        let d = Design::new(vec![0.25, 0.25, 0.5]).unwrap();
        assert_eq!(round_to_exact(&d, 2), vec![1, 0, 1]);
    }

    #[test]
    fn golden_section_finds_quadratic_minimum() {
        let mut f = |x: f64| (x - 0.3) * (x - 0.3);
        let (x, v) = golden_section_minimize(&mut f, 0.0, 1.0, 1e-10);
        assert!((x - 0.3).abs() <= 1e-9, "argmin {x}");
        assert!(v <= 1e-18);
    }

    #[test]
    fn fixed_effects_a_optimum_has_zero_gap() {
        // single group, no dispersion: the summed-variance optimum on {0, 1}
        // puts weight √2 − 1 at x = 1
        let prob = single_group(0.0, 0.0, 1, Criterion::a(2));
        let w = 2.0f64.sqrt() - 1.0;
        let designs = vec![Design::new(vec![1.0 - w, w]).unwrap()];
        let gap = equivalence_gap(&prob, &designs).unwrap();
        assert!(gap <= 1e-7, "gap at the known optimum: {gap}");
    }

    #[test]
    fn vertex_direction_step_descends_and_stops_at_optimum() {
        let prob = single_group(0.0, 0.0, 1, Criterion::d());
        let start = vec![Design::new(vec![0.8, 0.2]).unwrap()];
        let v0 = crate::criteria::criterion_value(&prob, &start);
        let stepped = vertex_direction_step(&prob, &start, 0).unwrap();
        let v1 = crate::criteria::criterion_value(&prob, &[stepped.clone()]);
        assert!(v1 < v0, "step did not descend: {v0} -> {v1}");

        // at the optimum (1/2, 1/2) the step is a no-op
        let opt = vec![Design::uniform(2)];
        let stepped = vertex_direction_step(&prob, &opt, 0).unwrap();
        assert!(stepped
            .weights()
            .iter()
            .zip(opt[0].weights())
            .all(|(a, b)| (a - b).abs() <= 1e-9));
    }

    #[test]
    fn solve_reaches_known_two_group_optima() {
        // summed-variance criterion, random intercept, equal groups: both
        // weights √2 − 1 (the single-group value replicated)
        let prob = line_problem([1, 1], [5, 5], 1.0, 0.0, Criterion::a(2));
        let report = solve(&prob, &SolverConfig::default()).unwrap();
        assert!(report.converged, "status {:?}", report.status);
        let expect = 2.0f64.sqrt() - 1.0;
        for d in &report.designs {
            assert!(
                (d.weights()[1] - expect).abs() <= 1e-5,
                "weights {:?}",
                d.weights()
            );
        }
        assert!(report.gap <= DEFAULT_GAP_TOL);
        // history values are monotone within slack
        for pair in report.history.windows(2) {
            assert!(
                pair[1].value <= pair[0].value + MONOTONE_SLACK * (1.0 + pair[0].value.abs()),
                "value increased between sweeps"
            );
        }
    }

    #[test]
    fn all_algorithms_agree_on_the_optimum() {
        let prob = line_problem([1, 1], [2, 8], 1.0, 0.0, Criterion::d());
        let mut answers = Vec::new();
        for algorithm in [
            Algorithm::VertexDirection,
            Algorithm::Multiplicative,
            Algorithm::ProjectedGradient,
        ] {
            let config = SolverConfig { algorithm, ..SolverConfig::default() };
            let report = solve(&prob, &config).unwrap();
            assert!(report.converged, "{algorithm:?} failed: {:?}", report.status);
            answers.push(report.designs[0].weights()[1]);
        }
        // the random-intercept determinant optimum is 1/2 regardless of m
        for w in &answers {
            assert!((w - 0.5).abs() <= 1e-5, "optima {answers:?}");
        }
    }

    #[test]
    fn armijo_step_rule_also_converges() {
        let prob = line_problem([1, 2], [2, 8], 1.0, 0.0, Criterion::a(2));
        let config = SolverConfig { step_rule: StepRule::Armijo, ..SolverConfig::default() };
        let report = solve(&prob, &config).unwrap();
        assert!(report.converged, "status {:?}", report.status);
        assert!(report.gap <= DEFAULT_GAP_TOL);
    }

    #[test]
    fn solve_is_deterministic() {
        let prob = line_problem([1, 2], [4, 16], 1.0, 0.0, Criterion::a(2));
        let config = SolverConfig { seed: 42, ..SolverConfig::default() };
        let a = solve(&prob, &config).unwrap();
        let b = solve(&prob, &config).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.gap.to_bits(), b.gap.to_bits());
        assert_eq!(a.iterations, b.iterations);
        for (da, db) in a.designs.iter().zip(&b.designs) {
            for (x, y) in da.weights().iter().zip(db.weights()) {
                assert_eq!(x.to_bits(), y.to_bits(), "weights differ between runs");
            }
        }
    }

    #[test]
    fn degenerate_slope_problem_reports_not_attained() {
        // summed-variance criterion with a random slope and unequal m: the
        // infimum sits at a singular boundary and is never attained
        let prob = line_problem([1, 1], [2, 8], 0.0, 1.0, Criterion::a(2));
        let report = solve(&prob, &SolverConfig::default()).unwrap();
        match report.status {
            SolveStatus::NotAttained { group } => {
                assert!(!report.converged);
                assert!(group < 2);
            }
            other => panic!("expected NotAttained, got {other:?} (gap {})", report.gap),
        }
    }

    #[test]
    fn infeasible_grid_reports_no_feasible_start() {
        // a single point cannot support a two-parameter moment matrix
        let g = GroupSpec::new(
            monomial_grid(&[1.0], 1).unwrap(),
            SpdMatrix::identity(1),
            Matrix::zeros(2, 2),
            2,
            1,
        )
        .unwrap();
        let prob = CompoundProblem::new(vec![g], Criterion::d()).unwrap();
        match solve(&prob, &SolverConfig::default()) {
            Err(Error::NoFeasibleStart { .. }) => {}
            other => panic!("expected NoFeasibleStart, got {other:?}"),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn projection_lands_on_the_simplex(v in proptest::collection::vec(-2.0..2.0f64, 1..6)) {
            let d = project_simplex(&v);
            let sum: f64 = d.weights().iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-12);
            prop_assert!(d.weights().iter().all(|&w| w >= 0.0));
        }

        #[test]
        fn projection_is_idempotent(v in proptest::collection::vec(0.0..1.0f64, 2..6)) {
            let first = project_simplex(&v);
            let second = project_simplex(first.weights());
            for (a, b) in first.weights().iter().zip(second.weights()) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }

        #[test]
        fn rounding_conserves_total_and_stays_close(
            v in proptest::collection::vec(0.01..1.0f64, 2..6),
            m in 1usize..30,
        ) {
            let d = Design::from_unnormalized(v).unwrap();
            let counts = round_to_exact(&d, m);
            prop_assert_eq!(counts.iter().sum::<usize>(), m);
            for (c, w) in counts.iter().zip(d.weights()) {
                prop_assert!((*c as f64 / m as f64 - w).abs() < 1.0 / m as f64 + 1e-12);
            }
        }
    }
}
