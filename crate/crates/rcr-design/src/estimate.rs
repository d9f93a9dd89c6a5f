//! Pooled estimation of the mean parameters and Monte Carlo validation of the
//! design-criterion covariance.
//!
//! Each unit j of group i responds Y_ij = F_i·β_ij + ε_ij, where β_ij scatters
//! around the common mean β₀ with dispersion D_i and ε has per-observation
//! covariance Σ_i. The best linear unbiased estimator of β₀ whitens by
//! Σ_i^{−1/2}, forms each group's least-squares estimate from the group mean
//! response, and pools the groups by their inverse estimator covariances. With
//! an exact design of m_i observations per unit, the pooled covariance equals
//! the design-criterion covariance at weights counts/m_i — the identity the
//! simulation here validates empirically.

use crate::criteria::covariance as design_covariance;
use crate::error::{Error, Result};
use crate::linalg::{psd_sqrt_factor, Matrix, SpdMatrix};
use crate::model::{exact_to_approximate, CompoundProblem, GroupSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use std::collections::HashMap;
use std::path::Path;

/// Raw observations of one group: the shared observation plan and one
/// response vector per unit.
#[derive(Debug, Clone)]
pub struct GroupObservations {
    /// Grid index observed at each of the m observation slots (shared by all
    /// units of the group, as the model prescribes one F per group).
    pub settings: Vec<usize>,
    /// Response vectors, one per unit, each of length m·l in slot order.
    pub units: Vec<Vec<f64>>,
}

impl GroupObservations {
    /// Observation counts per grid point implied by the slot settings.
    pub fn counts(&self, k: usize) -> Result<Vec<usize>> {
        let mut counts = vec![0usize; k];
        for &s in &self.settings {
            *counts.get_mut(s).ok_or(Error::IndexOutOfRange { index: s, len: k })? += 1;
        }
        Ok(counts)
    }
}

/// One [`GroupObservations`] per group.
pub type ObservationSet = Vec<GroupObservations>;

#[derive(Debug, Clone, Serialize)]
pub struct EstimateResult {
    /// Pooled estimate of the mean parameter vector.
    pub beta0: Vec<f64>,
    /// Per-group estimates the pool combines.
    pub per_group: Vec<Vec<f64>>,
    /// Covariance of the pooled estimator (symmetric positive definite).
    pub covariance: Matrix,
    /// Normalized pooling weights W_i (they sum to the identity).
    pub group_weights: Vec<Matrix>,
}

/// Precomputed estimator for a fixed observation plan: construction factors
/// all matrices once, so repeated estimation (Monte Carlo) costs only a few
/// small matrix-vector products per replication.
pub struct BlueSolver {
    groups: Vec<GroupBlue>,
    /// T⁻¹ with T = Σ_i n_i((F̃ᵢᵀF̃ᵢ)⁻¹ + D_i)⁻¹; the pooled covariance.
    covariance: Matrix,
    /// Normalized weights T⁻¹·n_i((F̃ᵢᵀF̃ᵢ)⁻¹ + D_i)⁻¹ per group.
    weights: Vec<Matrix>,
    p: usize,
}

struct GroupBlue {
    /// p×(m·l) map from the raw group mean response to the group estimate:
    /// (F̃ᵀF̃)⁻¹·F̃ᵀ·(I_m ⊗ Σ^{−1/2}).
    projector: Matrix,
    m: usize,
    l: usize,
    n: usize,
}

impl BlueSolver {
    /// `settings[i]` lists the grid index observed at each slot of group i.
    pub fn new(groups: &[GroupSpec], settings: &[Vec<usize>]) -> Result<Self> {
        if settings.len() != groups.len() {
            return Err(Error::CountMismatch { expected: groups.len(), got: settings.len() });
        }
        let p = groups.first().map(|g| g.p()).unwrap_or(0);
        let mut per_group = Vec::with_capacity(groups.len());
        let mut t_mat = Matrix::zeros(p, p);
        let mut raw_weights = Vec::with_capacity(groups.len());
        for (i, (g, plan)) in groups.iter().zip(settings).enumerate() {
            if plan.len() != g.m() {
                return Err(Error::CountMismatch { expected: g.m(), got: plan.len() });
            }
            // F̃ᵀF̃ = Σ_slots G̃(x_s)ᵀG̃(x_s), reusing the cached point moments
            let mut ftf = Matrix::zeros(p, p);
            for &s in plan {
                ftf.add_scaled_assign(1.0, g.point_moment(s)?)?;
            }
            let ftf = SpdMatrix::from_matrix(ftf).map_err(|_| Error::RankDeficient { group: i })?;
            let ftf_inv = ftf.inverse().map_err(|_| Error::RankDeficient { group: i })?;
            // raw weight n_i·((F̃ᵀF̃)⁻¹ + D_i)⁻¹, the inverse group-estimator covariance
            let w_raw = SpdMatrix::from_matrix(ftf_inv.matrix().add(g.dmat())?)
                .and_then(|b| b.inverse())
                .map_err(|_| Error::RankDeficient { group: i })?
                .into_matrix()
                .scaled(g.n() as f64);
            t_mat.add_scaled_assign(1.0, &w_raw)?;
            raw_weights.push(w_raw);
            // projector from the raw mean response to the group estimate
            let (m, l) = (g.m(), g.l());
            let mut ft_whiten = Matrix::zeros(p, m * l);
            for (slot, &s) in plan.iter().enumerate() {
                let block = g.transformed_gmat(s)?.transpose().matmul(g.sqrt_inv_sigma())?;
                for r in 0..p {
                    for c in 0..l {
                        ft_whiten.set(r, slot * l + c, block.get(r, c));
                    }
                }
            }
            let projector = ftf_inv.matrix().matmul(&ft_whiten)?;
            per_group.push(GroupBlue { projector, m, l, n: g.n() });
        }
        let t_spd = SpdMatrix::from_matrix(t_mat).map_err(|_| Error::RankDeficient { group: 0 })?;
        let covariance = t_spd.inverse()?.into_matrix();
        let weights = raw_weights
            .iter()
            .map(|w| covariance.matmul(w))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { groups: per_group, covariance, weights, p })
    }

    pub fn covariance(&self) -> &Matrix {
        &self.covariance
    }

    pub fn group_weights(&self) -> &[Matrix] {
        &self.weights
    }

    /// Estimates from precomputed group mean responses (raw scale).
    pub fn estimate_from_means(&self, means: &[Vec<f64>]) -> Result<EstimateResult> {
        if means.len() != self.groups.len() {
            return Err(Error::CountMismatch { expected: self.groups.len(), got: means.len() });
        }
        let mut per_group = Vec::with_capacity(means.len());
        let mut beta0 = vec![0.0; self.p];
        for ((gb, w), ybar) in self.groups.iter().zip(&self.weights).zip(means) {
            if ybar.len() != gb.m * gb.l {
                return Err(Error::CountMismatch { expected: gb.m * gb.l, got: ybar.len() });
            }
            let est = gb.projector.matvec(ybar)?;
            let pooled = w.matvec(&est)?;
            for (acc, x) in beta0.iter_mut().zip(&pooled) {
                *acc += x;
            }
            per_group.push(est);
        }
        Ok(EstimateResult {
            beta0,
            per_group,
            covariance: self.covariance.clone(),
            group_weights: self.weights.clone(),
        })
    }

    /// Estimates from raw per-unit responses, averaging within each group.
    pub fn estimate(&self, data: &ObservationSet) -> Result<EstimateResult> {
        if data.len() != self.groups.len() {
            return Err(Error::CountMismatch { expected: self.groups.len(), got: data.len() });
        }
        let means = self
            .groups
            .iter()
            .zip(data)
            .map(|(gb, obs)| group_mean(gb, obs))
            .collect::<Result<Vec<_>>>()?;
        self.estimate_from_means(&means)
    }
}

fn group_mean(gb: &GroupBlue, obs: &GroupObservations) -> Result<Vec<f64>> {
    if obs.units.len() != gb.n {
        return Err(Error::CountMismatch { expected: gb.n, got: obs.units.len() });
    }
    let len = gb.m * gb.l;
    let mut mean = vec![0.0; len];
    for unit in &obs.units {
        if unit.len() != len {
            return Err(Error::InvalidData(format!(
                "unit response has {} entries, expected {len}",
                unit.len()
            )));
        }
        for (acc, y) in mean.iter_mut().zip(unit) {
            *acc += y;
        }
    }
    let scale = 1.0 / gb.n as f64;
    for x in &mut mean {
        *x *= scale;
    }
    Ok(mean)
}

/// Pooled best linear unbiased estimate of the mean parameters.
pub fn blue(groups: &[GroupSpec], data: &ObservationSet) -> Result<EstimateResult> {
    if data.len() != groups.len() {
        return Err(Error::CountMismatch { expected: groups.len(), got: data.len() });
    }
    let settings: Vec<Vec<usize>> = data.iter().map(|obs| obs.settings.clone()).collect();
    BlueSolver::new(groups, &settings)?.estimate(data)
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationResult {
    /// Empirical covariance of the estimator across replications.
    pub empirical: Matrix,
    /// Design-criterion covariance the simulation validates.
    pub analytic: Matrix,
    /// Mean estimate across replications (unbiasedness diagnostic).
    pub mean: Vec<f64>,
    /// Entrywise (empirical − analytic) / SE under Gaussian sampling.
    pub z_scores: Matrix,
    pub replications: usize,
}

/// Simulates the estimator under Gaussian effects and noise on an exact design
/// (`counts[i]` observations per grid point, summing to m_i) and compares the
/// empirical covariance with the design-criterion covariance. Deterministic
/// given the seed; replications use an indexed seed stream, so the replication
/// order cannot change the result.
pub fn simulate_covariance(
    prob: &CompoundProblem,
    counts: &[Vec<usize>],
    beta0: &[f64],
    replications: usize,
    seed: u64,
) -> Result<SimulationResult> {
    let p = prob.p();
    if counts.len() != prob.s() {
        return Err(Error::CountMismatch { expected: prob.s(), got: counts.len() });
    }
    if beta0.len() != p {
        return Err(Error::CountMismatch { expected: p, got: beta0.len() });
    }
    if replications == 0 {
        return Err(Error::InvalidData("need at least one replication".into()));
    }
    // analytic target: the design-criterion covariance at weights counts/m
    let designs = prob
        .groups()
        .iter()
        .zip(counts)
        .map(|(g, c)| exact_to_approximate(c, g.m()))
        .collect::<Result<Vec<_>>>()?;
    let analytic = design_covariance(prob, &designs)?;

    // expand counts into slot settings (grid order) and precompute samplers
    let settings: Vec<Vec<usize>> = counts
        .iter()
        .map(|c| {
            c.iter()
                .enumerate()
                .flat_map(|(t, &count)| std::iter::repeat(t).take(count))
                .collect()
        })
        .collect();
    let solver = BlueSolver::new(prob.groups(), &settings)?;
    let samplers = prob
        .groups()
        .iter()
        .map(|g| {
            Ok(GroupSampler {
                effect_factor: psd_sqrt_factor(g.dmat())?,
                noise_factor: g.sigma().cholesky_factor().clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut sum = vec![0.0; p];
    let mut sum_outer = Matrix::zeros(p, p);
    let mut means_buf: Vec<Vec<f64>> = prob
        .groups()
        .iter()
        .map(|g| vec![0.0; g.m() * g.l()])
        .collect();
    for rep in 0..replications {
        let mut rng = ChaCha8Rng::seed_from_u64(replication_seed(seed, rep as u64));
        for (i, g) in prob.groups().iter().enumerate() {
            sample_group_mean(g, &settings[i], &samplers[i], beta0, &mut rng, &mut means_buf[i])?;
        }
        let est = solver.estimate_from_means(&means_buf)?;
        // accumulate deviations from the sampler's true mean
        for a in 0..p {
            let da = est.beta0[a] - beta0[a];
            sum[a] += da;
            for b in 0..p {
                let db = est.beta0[b] - beta0[b];
                sum_outer.set(a, b, sum_outer.get(a, b) + da * db);
            }
        }
    }
    let r = replications as f64;
    let mean: Vec<f64> = sum.iter().zip(beta0).map(|(s, b0)| s / r + b0).collect();
    let mut empirical = Matrix::zeros(p, p);
    if replications > 1 {
        for a in 0..p {
            for b in 0..p {
                let centered = sum_outer.get(a, b) - sum[a] * sum[b] / r;
                empirical.set(a, b, centered / (r - 1.0));
            }
        }
    }
    let z_scores = covariance_z_scores(&empirical, &analytic, replications)?;
    Ok(SimulationResult { empirical, analytic, mean, z_scores, replications })
}

struct GroupSampler {
    effect_factor: Matrix,
    noise_factor: Matrix,
}

// Samples all units of one group and writes the group mean response.
fn sample_group_mean(
    g: &GroupSpec,
    plan: &[usize],
    sampler: &GroupSampler,
    beta0: &[f64],
    rng: &mut ChaCha8Rng,
    mean: &mut [f64],
) -> Result<()> {
    let (p, l) = (g.p(), g.l());
    mean.fill(0.0);
    let mut z = vec![0.0; p.max(l)];
    let mut beta = vec![0.0; p];
    for _ in 0..g.n() {
        // unit effect β = β₀ + D^{1/2}·z
        for zi in z.iter_mut().take(sampler.effect_factor.cols()) {
            *zi = StandardNormal.sample(rng);
        }
        let scatter = sampler
            .effect_factor
            .matvec(&z[..sampler.effect_factor.cols()])?;
        for (bi, (b0, sc)) in beta.iter_mut().zip(beta0.iter().zip(&scatter)) {
            *bi = b0 + sc;
        }
        for (slot, &s) in plan.iter().enumerate() {
            // response G(x_s)·β + Σ^{1/2}·z at this observation
            let signal = g.points()[s].gmat.matvec(&beta)?;
            for zi in z.iter_mut().take(l) {
                *zi = StandardNormal.sample(rng);
            }
            let noise = sampler.noise_factor.matvec(&z[..l])?;
            for c in 0..l {
                mean[slot * l + c] += signal[c] + noise[c];
            }
        }
    }
    let scale = 1.0 / g.n() as f64;
    for x in mean.iter_mut() {
        *x *= scale;
    }
    Ok(())
}

// SplitMix64-style index mixing: replication r of stream `seed` always draws
// from the same substream regardless of execution order.
fn replication_seed(seed: u64, rep: u64) -> u64 {
    let mut x = seed ^ rep.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Entrywise z-scores of an empirical covariance against an analytic target:
/// (emp − target)/SE with SE² = (c_aa·c_bb + c_ab²)/R, the Gaussian sampling
/// variance of a covariance entry.
pub fn covariance_z_scores(
    empirical: &Matrix,
    analytic: &Matrix,
    replications: usize,
) -> Result<Matrix> {
    let p = analytic.rows();
    if empirical.rows() != p || empirical.cols() != p || analytic.cols() != p {
        return Err(Error::ShapeMismatch {
            expected: format!("{p}x{p} covariance pair"),
            got: format!("{}x{}", empirical.rows(), empirical.cols()),
        });
    }
    let r = replications as f64;
    let mut z = Matrix::zeros(p, p);
    for a in 0..p {
        for b in 0..p {
            let var = (analytic.get(a, a) * analytic.get(b, b)
                + analytic.get(a, b) * analytic.get(a, b))
                / r;
            z.set(a, b, (empirical.get(a, b) - analytic.get(a, b)) / var.sqrt());
        }
    }
    Ok(z)
}

/// Reads one group's observations from CSV with header columns
/// `unit_id,obs_index,setting_index,<response components...>`. Units may
/// appear in any row order; every unit must cover each observation slot
/// exactly once with the same setting.
pub fn read_group_csv<P: AsRef<Path>>(path: P) -> Result<GroupObservations> {
    let mut reader = csv::Reader::from_path(path.as_ref())
        .map_err(|e| Error::InvalidData(format!("cannot open CSV: {e}")))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::InvalidData(format!("cannot read CSV header: {e}")))?
        .clone();
    let expected = ["unit_id", "obs_index", "setting_index"];
    for (idx, name) in expected.iter().enumerate() {
        if headers.get(idx) != Some(*name) {
            return Err(Error::InvalidData(format!(
                "CSV column {idx} must be {name:?}, got {:?}",
                headers.get(idx).unwrap_or("<missing>")
            )));
        }
    }
    let l = headers.len().saturating_sub(3);
    if l == 0 {
        return Err(Error::InvalidData("CSV has no response columns".into()));
    }
    // unit id → slot → (setting, response components)
    let mut units: Vec<(String, HashMap<usize, (usize, Vec<f64>)>)> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::InvalidData(format!("bad CSV record: {e}")))?;
        if record.len() != headers.len() {
            return Err(Error::InvalidData(format!(
                "CSV record has {} fields, expected {}",
                record.len(),
                headers.len()
            )));
        }
        let unit = record[0].to_string();
        let slot: usize = record[1]
            .parse()
            .map_err(|_| Error::InvalidData(format!("bad obs_index {:?}", &record[1])))?;
        let setting: usize = record[2]
            .parse()
            .map_err(|_| Error::InvalidData(format!("bad setting_index {:?}", &record[2])))?;
        let ys = (3..record.len())
            .map(|c| {
                record[c]
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidData(format!("bad response {:?}", &record[c])))
            })
            .collect::<Result<Vec<f64>>>()?;
        let uidx = *index.entry(unit.clone()).or_insert_with(|| {
            units.push((unit, HashMap::new()));
            units.len() - 1
        });
        if units[uidx].1.insert(slot, (setting, ys)).is_some() {
            return Err(Error::InvalidData(format!(
                "unit {:?} has duplicate obs_index {slot}",
                units[uidx].0
            )));
        }
    }
    if units.is_empty() {
        return Err(Error::InvalidData("CSV contains no observations".into()));
    }
    let m = units[0].1.len();
    let mut settings = vec![0usize; m];
    for slot in 0..m {
        let Some(&(setting, _)) = units[0].1.get(&slot) else {
            return Err(Error::InvalidData(format!(
                "unit {:?} is missing obs_index {slot}",
                units[0].0
            )));
        };
        settings[slot] = setting;
    }
    let mut unit_vectors = Vec::with_capacity(units.len());
    for (name, slots) in &units {
        if slots.len() != m {
            return Err(Error::InvalidData(format!(
                "unit {name:?} has {} observations, expected {m}",
                slots.len()
            )));
        }
        let mut y = vec![0.0; m * l];
        for slot in 0..m {
            let Some((setting, ys)) = slots.get(&slot) else {
                return Err(Error::InvalidData(format!(
                    "unit {name:?} is missing obs_index {slot}"
                )));
            };
            if *setting != settings[slot] {
                return Err(Error::InvalidData(format!(
                    "unit {name:?} observes setting {setting} at slot {slot}, others observe {}",
                    settings[slot]
                )));
            }
            y[slot * l..(slot + 1) * l].copy_from_slice(ys);
        }
        unit_vectors.push(y);
    }
    Ok(GroupObservations { settings, units: unit_vectors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criteria::Criterion;
    use crate::model::{monomial_grid, Design};
    use std::io::Write;

    fn line_group(d1: f64, d2: f64, m: usize, n: usize) -> GroupSpec {
        GroupSpec::new(
            monomial_grid(&[0.0, 1.0], 1).unwrap(),
            SpdMatrix::identity(1),
            Matrix::diag(&[d1, d2]),
            m,
            n,
        )
        .unwrap()
    }

    #[test]
    fn interpolating_least_squares_recovers_the_line() {
        // one unit, no dispersion, unit noise covariance: plain interpolation
        let g = line_group(0.0, 0.0, 2, 1);
        let data = vec![GroupObservations {
            settings: vec![0, 1],
            units: vec![vec![1.0, 3.0]],
        }];
        let est = blue(&[g], &data).unwrap();
        assert!((est.beta0[0] - 1.0).abs() <= 1e-12, "intercept {}", est.beta0[0]);
        assert!((est.beta0[1] - 2.0).abs() <= 1e-12, "slope {}", est.beta0[1]);
        // covariance of the interpolator: (FᵀF)⁻¹ = [[1,−1],[−1,2]]
        let expect = Matrix::from_rows(&[vec![1.0, -1.0], vec![-1.0, 2.0]]).unwrap();
        assert!(est.covariance.max_abs_diff(&expect) <= 1e-12);
    }

    #[test]
    fn identical_groups_with_identical_data_pool_to_the_same_estimate() {
        let groups = vec![line_group(1.0, 0.0, 3, 2), line_group(1.0, 0.0, 3, 2)];
        let obs = GroupObservations {
            settings: vec![0, 1, 1],
            units: vec![vec![0.9, 2.9, 3.2], vec![1.1, 3.1, 2.8]],
        };
        let data = vec![obs.clone(), obs];
        let est = blue(&groups, &data).unwrap();
        for g in &est.per_group {
            for (a, b) in g.iter().zip(&est.beta0) {
                assert!(
                    (a - b).abs() <= 1e-12,
                    "pooled {:?} differs from group {:?}",
                    est.beta0,
                    g
                );
            }
        }
    }

    #[test]
    fn normalized_weights_sum_to_identity() {
        let groups = vec![line_group(1.0, 0.0, 5, 1), line_group(0.5, 0.2, 4, 3)];
        let data = vec![
            GroupObservations {
                settings: vec![0, 0, 1, 1, 1],
                units: vec![vec![1.0, 1.2, 3.0, 2.9, 3.1]],
            },
            GroupObservations {
                settings: vec![0, 1, 0, 1],
                units: vec![
                    vec![0.8, 3.1, 1.2, 2.9],
                    vec![1.1, 2.8, 0.9, 3.3],
                    vec![1.0, 3.0, 1.0, 3.0],
                ],
            },
        ];
        let est = blue(&groups, &data).unwrap();
        let mut total = Matrix::zeros(2, 2);
        for w in &est.group_weights {
            total.add_scaled_assign(1.0, w).unwrap();
        }
        assert!(
            total.max_abs_diff(&Matrix::identity(2)) <= 1e-10,
            "weights sum to {total:?}"
        );
    }

    #[test]
    fn blue_is_invariant_under_unit_reordering() {
        let groups = vec![line_group(1.0, 0.0, 2, 3)];
        let units = vec![vec![1.0, 3.0], vec![0.5, 3.5], vec![1.5, 2.5]];
        let forward = vec![GroupObservations { settings: vec![0, 1], units: units.clone() }];
        let mut reversed_units = units;
        reversed_units.reverse();
        let reversed = vec![GroupObservations { settings: vec![0, 1], units: reversed_units }];
        let a = blue(&groups, &forward).unwrap();
        let b = blue(&groups, &reversed).unwrap();
        for (x, y) in a.beta0.iter().zip(&b.beta0) {
            assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn matches_pooled_least_squares_when_effects_are_fixed() {
        // D = 0, Σ = I: the estimator must reduce to pooled ordinary least
        // squares over all units, computed here by direct normal equations
        let groups = vec![line_group(0.0, 0.0, 3, 2), line_group(0.0, 0.0, 2, 3)];
        let data = vec![
            GroupObservations {
                settings: vec![0, 1, 1],
                units: vec![vec![1.0, 2.7, 3.4], vec![0.6, 3.1, 2.9]],
            },
            GroupObservations {
                settings: vec![0, 1],
                units: vec![vec![1.2, 3.2], vec![0.7, 2.6], vec![1.1, 3.3]],
            },
        ];
        let est = blue(&groups, &data).unwrap();

        // oracle: stack every observation of every unit
        let rows = |setting: usize| -> Vec<f64> { vec![1.0, setting as f64] };
        let mut xtx = Matrix::zeros(2, 2);
        let mut xty = vec![0.0; 2];
        for obs in &data {
            for unit in &obs.units {
                for (slot, &s) in obs.settings.iter().enumerate() {
                    let row = rows(s);
                    for a in 0..2 {
                        for b in 0..2 {
                            xtx.set(a, b, xtx.get(a, b) + row[a] * row[b]);
                        }
                        xty[a] += row[a] * unit[slot];
                    }
                }
            }
        }
        let ols = SpdMatrix::from_matrix(xtx).unwrap().solve(&xty).unwrap();
        for (a, b) in est.beta0.iter().zip(&ols) {
            assert!((a - b).abs() <= 1e-10, "blue {:?} vs ols {:?}", est.beta0, ols);
        }
    }

    #[test]
    fn rank_deficient_plan_is_rejected() {
        let g = line_group(0.0, 0.0, 2, 1);
        let data = vec![GroupObservations {
            settings: vec![1, 1], // only x = 1 observed: slope and intercept confounded
            units: vec![vec![3.0, 3.1]],
        }];
        match blue(&[g], &data) {
            Err(Error::RankDeficient { group: 0 }) => {}
            other => panic!("expected RankDeficient, got {other:?}"),
        }
    }

    #[test]
    fn analytic_covariance_matches_design_covariance_exactly() {
        // the estimator covariance at counts must equal the design-criterion
        // covariance at weights counts/m — a definitional identity
        let groups = vec![line_group(1.0, 0.0, 5, 1), line_group(1.0, 0.0, 5, 1)];
        let prob = CompoundProblem::new(groups.clone(), Criterion::a(2)).unwrap();
        let counts = [vec![2usize, 3], vec![3usize, 2]];
        let settings: Vec<Vec<usize>> = counts
            .iter()
            .map(|c| {
                c.iter()
                    .enumerate()
                    .flat_map(|(t, &n)| std::iter::repeat(t).take(n))
                    .collect()
            })
            .collect();
        let solver = BlueSolver::new(&groups, &settings).unwrap();
        let designs = vec![
            Design::new(vec![0.4, 0.6]).unwrap(),
            Design::new(vec![0.6, 0.4]).unwrap(),
        ];
        let design_cov = design_covariance(&prob, &designs).unwrap();
        assert!(
            solver.covariance().max_abs_diff(&design_cov) <= 1e-12,
            "estimator covariance diverges from design covariance"
        );
    }

    #[test]
    fn simulation_validates_covariance_and_unbiasedness() {
        let groups = vec![line_group(1.0, 0.0, 5, 1), line_group(1.0, 0.0, 5, 1)];
        let prob = CompoundProblem::new(groups, Criterion::a(2)).unwrap();
        let counts = [vec![2usize, 3], vec![3usize, 2]];
        let beta0 = [1.0, 2.0];
        let reps = 4000;
        let sim = simulate_covariance(&prob, &counts, &beta0, reps, 99).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                let z = sim.z_scores.get(a, b);
                assert!(z.abs() <= 5.0, "covariance z[{a}{b}] = {z}");
            }
            let se = (sim.analytic.get(a, a) / reps as f64).sqrt();
            assert!(
                (sim.mean[a] - beta0[a]).abs() <= 5.0 * se,
                "mean[{a}] = {} vs true {}",
                sim.mean[a],
                beta0[a]
            );
        }
    }

    #[test]
    fn simulation_is_deterministic_in_the_seed() {
        let groups = vec![line_group(1.0, 0.0, 3, 2)];
        let prob = CompoundProblem::new(groups, Criterion::d()).unwrap();
        let counts = [vec![1usize, 2]];
        let a = simulate_covariance(&prob, &counts, &[0.0, 1.0], 200, 5).unwrap();
        let b = simulate_covariance(&prob, &counts, &[0.0, 1.0], 200, 5).unwrap();
        assert_eq!(a.empirical.max_abs_diff(&b.empirical), 0.0);
        let c = simulate_covariance(&prob, &counts, &[0.0, 1.0], 200, 6).unwrap();
        assert!(c.empirical.max_abs_diff(&a.empirical) > 0.0, "seed has no effect");
    }

    #[test]
    fn csv_round_trip_reads_groups() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "unit_id,obs_index,setting_index,y").unwrap();
        writeln!(file, "u2,1,1,3.5").unwrap();
        writeln!(file, "u1,0,0,1.0").unwrap();
        writeln!(file, "u1,1,1,3.0").unwrap();
        writeln!(file, "u2,0,0,0.5").unwrap();
        file.flush().unwrap();
        let obs = read_group_csv(file.path()).unwrap();
        assert_eq!(obs.settings, vec![0, 1]);
        assert_eq!(obs.units.len(), 2, "two units expected");
        assert_eq!(obs.units[0], vec![0.5, 3.5], "first-seen unit comes first");
        assert_eq!(obs.units[1], vec![1.0, 3.0]);
        assert_eq!(obs.counts(2).unwrap(), vec![1, 1]);
    }

    #[test]
    fn csv_rejects_inconsistent_settings() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "unit_id,obs_index,setting_index,y").unwrap();
        writeln!(file, "u1,0,0,1.0").unwrap();
        writeln!(file, "u2,0,1,3.0").unwrap();
        file.flush().unwrap();
        match read_group_csv(file.path()) {
            Err(Error::InvalidData(msg)) => {
                assert!(msg.contains("slot"), "message: {msg}");
            }
            other => panic!("expected InvalidData, got {other:?}"),
        }
    }
}
