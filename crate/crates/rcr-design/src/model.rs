//! Problem data: grids, groups, designs, and compound problems.
//!
//! A *group* observes the same regression function at a finite grid of candidate
//! settings, with its own within-unit error covariance Σ, coefficient dispersion D,
//! observations-per-unit m, and unit count n. A *design* is a probability vector of
//! weights over the group's grid. A *compound problem* bundles one group per design
//! plus the optimality criterion evaluated on all of them simultaneously.

use crate::criteria::Criterion;
use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, Matrix, SpdMatrix};
use serde::Serialize;

/// Weights at or below this are not counted as support points.
pub const SUPPORT_THRESHOLD: f64 = 1e-8;
/// A weight vector whose sum deviates from 1 by more than this is rejected.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;
/// PSD validation slack for dispersion matrices, relative to their scale.
pub const PSD_TOL: f64 = 1e-10;

/// One candidate setting: a display label and the regression block G(x) (l×p).
#[derive(Debug, Clone)]
pub struct GridPoint {
    pub label: String,
    pub gmat: Matrix,
}

impl GridPoint {
    pub fn new(label: impl Into<String>, gmat: Matrix) -> Self {
        Self { label: label.into(), gmat }
    }
}

/// Monomial basis rows (1, x, …, x^degree) over a numeric grid; l = 1.
pub fn monomial_grid(points: &[f64], degree: usize) -> Result<Vec<GridPoint>> {
    if points.is_empty() {
        return Err(Error::InvalidProblem("empty grid".into()));
    }
    points
        .iter()
        .map(|&x| {
            if !x.is_finite() {
                return Err(Error::NonFinite);
            }
            let mut row = Vec::with_capacity(degree + 1);
            let mut pw = 1.0;
            for _ in 0..=degree {
                row.push(pw);
                pw *= x;
            }
            Ok(GridPoint::new(format!("{x}"), Matrix::new(1, degree + 1, row)?))
        })
        .collect()
}

/// One group's model ingredients, with transform caches built at construction.
#[derive(Debug, Clone)]
pub struct GroupSpec {
    points: Vec<GridPoint>,
    sigma: SpdMatrix,
    dmat: Matrix,
    m: usize,
    n: usize,
    sqrt_inv_sigma: Matrix,
    transformed: Vec<Matrix>,   // Σ^{-1/2}·G(x_h) per point
    point_moments: Vec<Matrix>, // G̃(x_h)ᵀ·G̃(x_h) per point
}

impl GroupSpec {
    pub fn new(
        points: Vec<GridPoint>,
        sigma: SpdMatrix,
        dmat: Matrix,
        m: usize,
        n: usize,
    ) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidProblem("group has an empty grid".into()));
        }
        if m == 0 || n == 0 {
            return Err(Error::InvalidProblem("m and n must be positive".into()));
        }
        let l = points[0].gmat.rows();
        let p = points[0].gmat.cols();
        for pt in &points {
            if pt.gmat.rows() != l || pt.gmat.cols() != p {
                return Err(Error::ShapeMismatch {
                    expected: format!("{l}x{p} regression blocks"),
                    got: format!("{}x{}", pt.gmat.rows(), pt.gmat.cols()),
                });
            }
        }
        if sigma.dim() != l {
            return Err(Error::ShapeMismatch {
                expected: format!("{l}x{l} error covariance"),
                got: format!("{}x{}", sigma.dim(), sigma.dim()),
            });
        }
        if dmat.rows() != p || dmat.cols() != p {
            return Err(Error::ShapeMismatch {
                expected: format!("{p}x{p} dispersion matrix"),
                got: format!("{}x{}", dmat.rows(), dmat.cols()),
            });
        }
        let scale = dmat.max_abs().max(1.0);
        let min_eig = min_eigenvalue(&dmat)?;
        if min_eig < -PSD_TOL * scale {
            return Err(Error::NotPositiveSemidefinite { min_eig });
        }
        let sqrt_inv_sigma = sigma.sqrt_inverse()?.into_matrix();
        let transformed: Vec<Matrix> = points
            .iter()
            .map(|pt| sqrt_inv_sigma.matmul(&pt.gmat))
            .collect::<Result<_>>()?;
        let point_moments = transformed.iter().map(Matrix::gram).collect();
        Ok(Self {
            points,
            sigma,
            dmat,
            m,
            n,
            sqrt_inv_sigma,
            transformed,
            point_moments,
        })
    }

    /// Number of candidate settings.
    pub fn k(&self) -> usize {
        self.points.len()
    }

    /// Mean-parameter dimension p.
    pub fn p(&self) -> usize {
        self.points[0].gmat.cols()
    }

    /// Response dimension per observation.
    pub fn l(&self) -> usize {
        self.points[0].gmat.rows()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// n·m as a float, the group's information weight.
    pub fn nm(&self) -> f64 {
        (self.n * self.m) as f64
    }

    pub fn points(&self) -> &[GridPoint] {
        &self.points
    }

    pub fn label(&self, idx: usize) -> &str {
        &self.points[idx].label
    }

    pub fn sigma(&self) -> &SpdMatrix {
        &self.sigma
    }

    pub fn dmat(&self) -> &Matrix {
        &self.dmat
    }

    pub fn sqrt_inv_sigma(&self) -> &Matrix {
        &self.sqrt_inv_sigma
    }

    /// Σ^{-1/2}·G(x_idx), cached at construction.
    pub fn transformed_gmat(&self, idx: usize) -> Result<&Matrix> {
        self.transformed.get(idx).ok_or(Error::IndexOutOfRange {
            index: idx,
            len: self.transformed.len(),
        })
    }

    /// One-point moment matrix G̃(x_idx)ᵀG̃(x_idx), cached at construction.
    pub fn point_moment(&self, idx: usize) -> Result<&Matrix> {
        self.point_moments.get(idx).ok_or(Error::IndexOutOfRange {
            index: idx,
            len: self.point_moments.len(),
        })
    }

    /// Adjusted dispersion Δ = m·D.
    pub fn adjusted_dispersion(&self) -> Matrix {
        self.dmat.scaled(self.m as f64)
    }
}

/// Probability vector of weights over a group's grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Design {
    weights: Vec<f64>,
}

impl Design {
    /// Validates nonnegativity and renormalizes when the sum is within
    /// [`WEIGHT_SUM_TOL`] of 1; a larger deviation is an error.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidDesign("empty weight vector".into()));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite);
        }
        if let Some(w) = weights.iter().find(|&&w| w < 0.0) {
            return Err(Error::InvalidDesign(format!("negative weight {w}")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidDesign(format!(
                "weights sum to {sum}, more than {WEIGHT_SUM_TOL} from 1"
            )));
        }
        Ok(Self {
            weights: weights.into_iter().map(|w| w / sum).collect(),
        })
    }

    /// Rescales an arbitrary nonnegative vector onto the simplex. Entries below
    /// zero by at most 1e-12 are clamped; anything more negative is an error.
    /// Used by optimizer steps whose algebra can drift slightly off the simplex.
    pub fn from_unnormalized(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidDesign("empty weight vector".into()));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite);
        }
        let mut w = weights;
        for x in &mut w {
            if *x < 0.0 {
                if *x < -1e-12 {
                    return Err(Error::InvalidDesign(format!("negative weight {x}")));
                }
                *x = 0.0;
            }
        }
        let sum: f64 = w.iter().sum();
        if !(sum > 0.0) {
            return Err(Error::InvalidDesign("weights sum to zero".into()));
        }
        for x in &mut w {
            *x /= sum;
        }
        Ok(Self { weights: w })
    }

    /// Uniform weights on k points.
    pub fn uniform(k: usize) -> Self {
        Self { weights: vec![1.0 / k as f64; k] }
    }

    /// Point mass at index t.
    pub fn delta(k: usize, t: usize) -> Result<Self> {
        if t >= k {
            return Err(Error::IndexOutOfRange { index: t, len: k });
        }
        let mut w = vec![0.0; k];
        w[t] = 1.0;
        Ok(Self { weights: w })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Indices with weight above [`SUPPORT_THRESHOLD`].
    pub fn support(&self) -> Vec<usize> {
        self.support_with(SUPPORT_THRESHOLD)
    }

    pub fn support_with(&self, threshold: f64) -> Vec<usize> {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > threshold)
            .map(|(i, _)| i)
            .collect()
    }

    /// Convex combination (1−α)·self + α·other.
    pub fn mix(&self, other: &Design, alpha: f64) -> Result<Design> {
        if self.len() != other.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} weights", self.len()),
                got: format!("{}", other.len()),
            });
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::DomainError {
                name: "alpha",
                value: alpha,
                domain: "[0, 1]",
            });
        }
        Design::from_unnormalized(
            self.weights
                .iter()
                .zip(&other.weights)
                .map(|(a, b)| (1.0 - alpha) * a + alpha * b)
                .collect(),
        )
    }
}

/// Moment matrix M(ξ) = Σ_h w_h · G̃(x_h)ᵀG̃(x_h).
pub fn moment_matrix(group: &GroupSpec, design: &Design) -> Result<Matrix> {
    if design.len() != group.k() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} weights", group.k()),
            got: format!("{}", design.len()),
        });
    }
    let p = group.p();
    let mut m = Matrix::zeros(p, p);
    for (h, &w) in design.weights().iter().enumerate() {
        if w != 0.0 {
            m.add_scaled_assign(w, group.point_moment(h)?)?;
        }
    }
    Ok(m)
}

/// Max-norm discrepancy between M(ξ) and the weight-by-weight sum of one-point
/// moment matrices — a test utility for the linearity of the moment map.
pub fn moment_linearity_check(group: &GroupSpec, design: &Design) -> Result<f64> {
    let direct = moment_matrix(group, design)?;
    let p = group.p();
    let mut sum = Matrix::zeros(p, p);
    for (h, &w) in design.weights().iter().enumerate() {
        let delta = Design::delta(group.k(), h)?;
        sum.add_scaled_assign(w, &moment_matrix(group, &delta)?)?;
    }
    Ok(direct.max_abs_diff(&sum))
}

/// Converts an exact design (counts per point, summing to m) to weights counts/m.
pub fn exact_to_approximate(counts: &[usize], m: usize) -> Result<Design> {
    let total: usize = counts.iter().sum();
    if total != m {
        return Err(Error::CountMismatch { expected: m, got: total });
    }
    Design::new(counts.iter().map(|&c| c as f64 / m as f64).collect())
}

/// s groups plus the criterion evaluated on all their designs at once.
#[derive(Debug, Clone)]
pub struct CompoundProblem {
    groups: Vec<GroupSpec>,
    criterion: Criterion,
}

impl CompoundProblem {
    pub fn new(groups: Vec<GroupSpec>, criterion: Criterion) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::InvalidProblem("no groups".into()));
        }
        let p = groups[0].p();
        if groups.iter().any(|g| g.p() != p) {
            return Err(Error::InvalidProblem(
                "all groups must share the mean-parameter dimension".into(),
            ));
        }
        criterion.validate_for_dim(p)?;
        Ok(Self { groups, criterion })
    }

    pub fn groups(&self) -> &[GroupSpec] {
        &self.groups
    }

    pub fn group(&self, i: usize) -> &GroupSpec {
        &self.groups[i]
    }

    /// Number of groups (= number of designs the criterion depends on).
    pub fn s(&self) -> usize {
        self.groups.len()
    }

    pub fn p(&self) -> usize {
        self.groups[0].p()
    }

    pub fn criterion(&self) -> &Criterion {
        &self.criterion
    }

    /// Uniform design on every group's grid.
    pub fn uniform_designs(&self) -> Vec<Design> {
        self.groups.iter().map(|g| Design::uniform(g.k())).collect()
    }
}
