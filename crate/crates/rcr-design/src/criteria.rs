//! Criterion values, covariances, directional derivatives, and sensitivities.
//!
//! For designs 𝝃 = (ξ₁,…,ξ_s) the estimator covariance is S⁻¹ with
//! S = Σᵢ nᵢmᵢ·(Mᵢ(ξᵢ)⁻¹ + Δᵢ)⁻¹ and Δᵢ = mᵢ·Dᵢ. The linear criterion is
//! tr(S⁻¹V) and the determinant criterion is −ln det S; both are convex in the
//! designs. All directional information at a design tuple flows through one
//! cached factorization pass per group ([`Evaluation`]).

use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, trace_product, Matrix, SpdMatrix};
use crate::model::{moment_matrix, CompoundProblem, Design, GridPoint};

/// Optimality criterion: determinant type, or linear type with weighting V.
///
/// The A-, c-, and integrated-variance criteria are linear criteria for
/// particular V; see [`v_identity`], [`v_outer`], [`v_average_prediction`].
#[derive(Debug, Clone)]
pub enum Criterion {
    /// Minimize −ln det S (equivalently the covariance log-determinant).
    D,
    /// Minimize tr(S⁻¹·V) with symmetric positive semidefinite V.
    L { v: Matrix },
}

impl Criterion {
    pub fn d() -> Self {
        Criterion::D
    }

    /// A-criterion: V = I_p.
    pub fn a(p: usize) -> Self {
        Criterion::L { v: v_identity(p) }
    }

    /// c-criterion for a scalar contrast cᵀβ: V = c·cᵀ.
    pub fn c(c: &[f64]) -> Result<Self> {
        Ok(Criterion::L { v: v_outer(c)? })
    }

    /// Linear criterion with explicit V (validated symmetric PSD on use).
    pub fn l(v: Matrix) -> Self {
        Criterion::L { v }
    }

    pub fn is_d(&self) -> bool {
        matches!(self, Criterion::D)
    }

    pub(crate) fn validate_for_dim(&self, p: usize) -> Result<()> {
        match self {
            Criterion::D => Ok(()),
            Criterion::L { v } => {
                if v.rows() != p || v.cols() != p {
                    return Err(Error::ShapeMismatch {
                        expected: format!("{p}x{p} weighting matrix"),
                        got: format!("{}x{}", v.rows(), v.cols()),
                    });
                }
                let min_eig = min_eigenvalue(v)?;
                if min_eig < -1e-10 * v.max_abs().max(1.0) {
                    return Err(Error::NotPositiveSemidefinite { min_eig });
                }
                Ok(())
            }
        }
    }
}

/// V = I_p (A-criterion: summed parameter variances).
pub fn v_identity(p: usize) -> Matrix {
    Matrix::identity(p)
}

/// V = c·cᵀ (c-criterion: variance of one linear combination).
pub fn v_outer(c: &[f64]) -> Result<Matrix> {
    if c.is_empty() || c.iter().all(|&x| x == 0.0) {
        return Err(Error::ZeroVector);
    }
    if c.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    let p = c.len();
    let mut v = Matrix::zeros(p, p);
    for i in 0..p {
        for j in 0..p {
            v.set(i, j, c[i] * c[j]);
        }
    }
    Ok(v)
}

/// V = Σ_t ν_t·G(x_t)ᵀG(x_t): averaged prediction variance over a reference
/// grid with weighting measure ν (uniform when `nu` is `None`).
pub fn v_average_prediction(points: &[GridPoint], nu: Option<&[f64]>) -> Result<Matrix> {
    if points.is_empty() {
        return Err(Error::InvalidProblem("empty reference grid".into()));
    }
    let uniform;
    let nu = match nu {
        Some(nu) => nu,
        None => {
            uniform = vec![1.0 / points.len() as f64; points.len()];
            &uniform
        }
    };
    if nu.len() != points.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} measure weights", points.len()),
            got: format!("{}", nu.len()),
        });
    }
    let sum: f64 = nu.iter().sum();
    if nu.iter().any(|&x| x < 0.0) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::MeasureNotNormalized);
    }
    let p = points[0].gmat.cols();
    let mut v = Matrix::zeros(p, p);
    for (pt, &w) in points.iter().zip(nu) {
        v.add_scaled_assign(w, &pt.gmat.gram())?;
    }
    Ok(v)
}

/// ψ(M, Δ) = (M⁻¹ + Δ)⁻¹, the per-observation information after dispersion
/// adjustment. Matrix-concave in M over the positive definite cone.
pub fn adjusted_information(m: &SpdMatrix, delta: &Matrix) -> Result<Matrix> {
    let b = m.inverse()?.into_matrix().add(delta)?;
    Ok(SpdMatrix::from_matrix(b)?.inverse()?.into_matrix())
}

/// Per-group cached factors from one evaluation pass.
#[derive(Debug, Clone)]
pub struct GroupEval {
    /// Moment matrix M_i(ξ_i).
    pub moment: Matrix,
    /// Adjusted information A_i = (M_i⁻¹ + Δ_i)⁻¹.
    pub adjusted: Matrix,
    /// Sensitivity core Ψ_i = M⁻¹·A·T·A·M⁻¹ with T = S⁻¹ (determinant type)
    /// or T = S⁻¹VS⁻¹ (linear type); the directional derivative toward any
    /// moment matrix M̃ is −nᵢmᵢ·tr(Ψ_i·(M̃ − M)).
    pub core: Matrix,
    /// tr(Ψ_i·M_i): shared right-hand side of the pointwise optimality bound.
    pub rhs: f64,
    /// Smallest relative Cholesky pivot seen while factorizing M_i.
    pub min_rel_pivot: f64,
}

/// Criterion value, covariance, and all directional information at one design
/// tuple. Construct with [`evaluate`].
#[derive(Debug, Clone)]
pub struct Evaluation<'p> {
    prob: &'p CompoundProblem,
    value: f64,
    covariance: Matrix,
    groups: Vec<GroupEval>,
}

/// Evaluates the criterion at a design tuple, caching every factor needed for
/// sensitivities and derivatives. `Err(Infeasible)` when any moment matrix is
/// singular (or close enough that a Cholesky pivot falls below threshold).
pub fn evaluate<'p>(prob: &'p CompoundProblem, designs: &[Design]) -> Result<Evaluation<'p>> {
    if designs.len() != prob.s() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} designs", prob.s()),
            got: format!("{}", designs.len()),
        });
    }
    let moments: Vec<Matrix> = prob
        .groups()
        .iter()
        .zip(designs)
        .map(|(g, d)| moment_matrix(g, d))
        .collect::<Result<_>>()?;
    evaluate_from_moments(prob, moments)
}

/// Same as [`evaluate`], but starting from explicit per-group moment matrices.
/// This is the moment-space view of the criterion; it also serves oracles that
/// need values at perturbed moments lying slightly outside the design set.
pub fn evaluate_from_moments(
    prob: &CompoundProblem,
    moments: Vec<Matrix>,
) -> Result<Evaluation<'_>> {
    let p = prob.p();
    if moments.len() != prob.s() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} moment matrices", prob.s()),
            got: format!("{}", moments.len()),
        });
    }
    let mut s_mat = Matrix::zeros(p, p);
    let mut partial: Vec<(Matrix, Matrix, Matrix, f64)> = Vec::with_capacity(prob.s());
    for (i, (g, m)) in prob.groups().iter().zip(moments).enumerate() {
        if m.rows() != p || m.cols() != p {
            return Err(Error::ShapeMismatch {
                expected: format!("{p}x{p} moment matrix"),
                got: format!("{}x{}", m.rows(), m.cols()),
            });
        }
        let m_spd = SpdMatrix::from_matrix(m).map_err(|_| Error::Infeasible { group: i })?;
        let min_rel_pivot = m_spd.min_relative_pivot();
        let minv = m_spd
            .inverse()
            .map_err(|_| Error::Infeasible { group: i })?
            .into_matrix();
        let b = minv.add(&g.adjusted_dispersion())?;
        let adjusted = SpdMatrix::from_matrix(b)
            .and_then(|b| b.inverse())
            .map_err(|_| Error::Infeasible { group: i })?
            .into_matrix();
        s_mat.add_scaled_assign(g.nm(), &adjusted)?;
        partial.push((m_spd.into_matrix(), minv, adjusted, min_rel_pivot));
    }
    let s_spd =
        SpdMatrix::from_matrix(s_mat).map_err(|_| Error::Infeasible { group: prob.s() })?;
    let s_inv = s_spd.inverse().map_err(|_| Error::Infeasible { group: prob.s() })?;
    let value = match prob.criterion() {
        Criterion::D => -s_spd.logdet(),
        Criterion::L { v } => trace_product(s_inv.matrix(), v)?,
    };
    // T = S⁻¹ (determinant type) or S⁻¹VS⁻¹ (linear type), symmetrized exactly
    let t = match prob.criterion() {
        Criterion::D => s_inv.matrix().clone(),
        Criterion::L { v } => {
            let sv = s_inv.matrix().matmul(v)?.matmul(s_inv.matrix())?;
            symmetrize(sv)
        }
    };
    let groups = partial
        .into_iter()
        .map(|(moment, minv, adjusted, min_rel_pivot)| {
            let x = adjusted.matmul(&minv)?; // A·M⁻¹
            let core = symmetrize(x.transpose().matmul(&t)?.matmul(&x)?);
            let rhs = trace_product(&core, &moment)?;
            Ok(GroupEval { moment, adjusted, core, rhs, min_rel_pivot })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Evaluation {
        prob,
        value,
        covariance: s_inv.into_matrix(),
        groups,
    })
}

fn symmetrize(m: Matrix) -> Matrix {
    let mut out = m;
    for i in 0..out.rows() {
        for j in (i + 1)..out.cols() {
            let avg = 0.5 * (out.get(i, j) + out.get(j, i));
            out.set(i, j, avg);
            out.set(j, i, avg);
        }
    }
    out
}

impl<'p> Evaluation<'p> {
    pub fn problem(&self) -> &'p CompoundProblem {
        self.prob
    }

    /// Criterion value (finite by construction; infeasible tuples never build).
    pub fn value(&self) -> f64 {
        self.value
    }

    /// Estimator covariance S⁻¹ of the pooled mean-parameter estimator.
    pub fn covariance(&self) -> &Matrix {
        &self.covariance
    }

    pub fn group(&self, i: usize) -> &GroupEval {
        &self.groups[i]
    }

    pub fn group_evals(&self) -> &[GroupEval] {
        &self.groups
    }

    /// Pointwise sensitivity pair (lhs, rhs) for group `i` at grid index `t`:
    /// lhs = tr(Ψ_i·M_i(δ_t)), rhs = tr(Ψ_i·M_i). At an optimal tuple
    /// lhs ≤ rhs everywhere with equality on the support.
    pub fn sensitivity(&self, i: usize, t: usize) -> Result<(f64, f64)> {
        let ge = self.groups.get(i).ok_or(Error::IndexOutOfRange {
            index: i,
            len: self.groups.len(),
        })?;
        let pm = self.prob.group(i).point_moment(t)?;
        Ok((trace_product(&ge.core, pm)?, ge.rhs))
    }

    /// Directional derivative of the criterion when group `i` moves from its
    /// current design toward `direction`: −nᵢmᵢ·tr(Ψ_i·(M̃ − M)).
    pub fn partial_derivative(&self, i: usize, direction: &Design) -> Result<f64> {
        let ge = self.groups.get(i).ok_or(Error::IndexOutOfRange {
            index: i,
            len: self.groups.len(),
        })?;
        let m_dir = moment_matrix(self.prob.group(i), direction)?;
        Ok(-self.prob.group(i).nm() * (trace_product(&ge.core, &m_dir)? - ge.rhs))
    }

    /// Full directional derivative moving every group toward `directions`.
    pub fn directional_derivative(&self, directions: &[Design]) -> Result<f64> {
        if directions.len() != self.groups.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} designs", self.groups.len()),
                got: format!("{}", directions.len()),
            });
        }
        let mut total = 0.0;
        for (i, d) in directions.iter().enumerate() {
            total += self.partial_derivative(i, d)?;
        }
        Ok(total)
    }

    /// Unconstrained gradient of the value in group `i`'s weights:
    /// g_t = −nᵢmᵢ·tr(Ψ_i·M_i(δ_t)). The derivative toward δ_t equals
    /// g_t − Σ_u w_u·g_u.
    pub fn weight_gradient(&self, i: usize) -> Result<Vec<f64>> {
        let ge = self.groups.get(i).ok_or(Error::IndexOutOfRange {
            index: i,
            len: self.groups.len(),
        })?;
        let g = self.prob.group(i);
        (0..g.k())
            .map(|t| Ok(-g.nm() * trace_product(&ge.core, g.point_moment(t)?)?))
            .collect()
    }

    /// Normalized equivalence gap: the worst pointwise violation of the
    /// optimality bound, max(0, nᵢmᵢ·(lhs − rhs)) / (1 + |value|), maximized
    /// over groups and grid points. Zero (within tolerance) certifies optimality.
    pub fn gap(&self) -> Result<f64> {
        let mut worst = 0.0f64;
        for (i, ge) in self.groups.iter().enumerate() {
            let g = self.prob.group(i);
            for t in 0..g.k() {
                let lhs = trace_product(&ge.core, g.point_moment(t)?)?;
                worst = worst.max(g.nm() * (lhs - ge.rhs));
            }
        }
        Ok(worst.max(0.0) / (1.0 + self.value.abs()))
    }

    /// Smallest relative Cholesky pivot across the group moment matrices, and
    /// the group attaining it — the degeneracy signal for the solver.
    pub fn min_moment_pivot(&self) -> (f64, usize) {
        let mut best = (f64::INFINITY, 0);
        for (i, ge) in self.groups.iter().enumerate() {
            if ge.min_rel_pivot < best.0 {
                best = (ge.min_rel_pivot, i);
            }
        }
        best
    }
}

/// Criterion value at a design tuple; +∞ when infeasible.
pub fn criterion_value(prob: &CompoundProblem, designs: &[Design]) -> f64 {
    match evaluate(prob, designs) {
        Ok(ev) => ev.value(),
        Err(_) => f64::INFINITY,
    }
}

/// Criterion value from explicit moment matrices; +∞ when infeasible.
/// Lean path (no sensitivity cores) used by line searches, which call it
/// thousands of times per sweep.
pub fn value_from_moments(prob: &CompoundProblem, moments: &[Matrix]) -> f64 {
    debug_assert_eq!(moments.len(), prob.s(), "one moment matrix per group");
    let p = prob.p();
    let mut s_mat = Matrix::zeros(p, p);
    for (g, m) in prob.groups().iter().zip(moments) {
        debug_assert!(m.rows() == p && m.cols() == p, "moment matrix must be {p}x{p}");
        let Ok(m_spd) = SpdMatrix::from_matrix(m.clone()) else {
            return f64::INFINITY;
        };
        let Ok(minv) = m_spd.inverse() else {
            return f64::INFINITY;
        };
        let Ok(b) = minv.into_matrix().add(&g.adjusted_dispersion()) else {
            return f64::INFINITY;
        };
        let Ok(adjusted) = SpdMatrix::from_matrix(b).and_then(|b| b.inverse()) else {
            return f64::INFINITY;
        };
        if s_mat.add_scaled_assign(g.nm(), adjusted.matrix()).is_err() {
            return f64::INFINITY;
        }
    }
    let Ok(s_spd) = SpdMatrix::from_matrix(s_mat) else {
        return f64::INFINITY;
    };
    match prob.criterion() {
        Criterion::D => -s_spd.logdet(),
        Criterion::L { v } => match s_spd.inverse() {
            Ok(s_inv) => trace_product(s_inv.matrix(), v).unwrap_or(f64::INFINITY),
            Err(_) => f64::INFINITY,
        },
    }
}

/// Linear criterion value tr(S⁻¹V); +∞ when infeasible. The problem's
/// criterion must be of linear type.
pub fn l_value(prob: &CompoundProblem, designs: &[Design]) -> f64 {
    debug_assert!(!prob.criterion().is_d(), "l_value called on a determinant-type problem");
    criterion_value(prob, designs)
}

/// Determinant criterion value −ln det S; +∞ when infeasible. The problem's
/// criterion must be of determinant type.
pub fn d_value(prob: &CompoundProblem, designs: &[Design]) -> f64 {
    debug_assert!(prob.criterion().is_d(), "d_value called on a linear-type problem");
    criterion_value(prob, designs)
}

/// Estimator covariance at a design tuple, or `Infeasible`.
pub fn covariance(prob: &CompoundProblem, designs: &[Design]) -> Result<Matrix> {
    Ok(evaluate(prob, designs)?.covariance().clone())
}
