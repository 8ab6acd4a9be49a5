//! Entropic and exact optimal transport between discrete distributions.
//!
//! [`sinkhorn`] solves the λ-regularized problem in log domain and returns
//! the coupling together with its dual potentials; [`exact_ot`] solves the
//! λ=0 problem by network simplex. [`schrodinger_residual`] and
//! [`dual_objective`] are the matching diagnostics: a converged solution
//! satisfies the discrete Schrödinger system and closes the duality gap to
//! within a few multiples of the marginal tolerance.

pub(crate) mod simplex;
pub(crate) mod solver;

use crate::costs::CostMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::Real;
use ndarray::{Array1, Array2};

use solver::{solve_potentials, SolverOptions};

/// Default marginal tolerance for entropic solves.
pub const DEFAULT_TOL: Real = 1e-9;
/// Default iteration cap for entropic solves.
pub const DEFAULT_MAX_ITER: usize = 100_000;

/// Stopping knobs for entropic solves, shared by every caller that does not
/// spell out `tol`/`max_iter` explicitly.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EotOptions {
    #[serde(default = "default_tol")]
    pub tol: Real,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_tol() -> Real {
    DEFAULT_TOL
}

fn default_max_iter() -> usize {
    DEFAULT_MAX_ITER
}

impl Default for EotOptions {
    fn default() -> Self {
        EotOptions {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

/// Plan entries below this are reported as exact zeros.
const PLAN_FLOOR: f64 = 1e-300;

/// A finitely supported probability vector with strictly positive weights.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMarginal<T = Real> {
    weights: Vec<T>,
}

impl<T: Scalar> DiscreteMarginal<T> {
    /// Uniform weights on `n` atoms.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument(
                "marginal needs at least one atom".into(),
            ));
        }
        let w = T::one() / T::from_f64_c(n as f64);
        Ok(DiscreteMarginal {
            weights: vec![w; n],
        })
    }

    /// Builds from explicit weights. Exact zeros are dropped; the remainder
    /// must be positive, finite, and sum to 1 (up to accumulated rounding).
    pub fn from_weights(weights: Vec<T>) -> Result<Self> {
        let n_in = weights.len();
        let mut kept = Vec::with_capacity(n_in);
        let mut sum = T::zero();
        for (i, w) in weights.into_iter().enumerate() {
            if w == T::zero() {
                continue;
            }
            if !w.is_finite() || w < T::zero() {
                return Err(Error::InvalidArgument(format!(
                    "weight {i} is {w}; weights must be finite and nonnegative"
                )));
            }
            sum += w;
            kept.push(w);
        }
        if kept.is_empty() {
            return Err(Error::InvalidArgument(
                "marginal needs at least one positive weight".into(),
            ));
        }
        let slack = T::from_f64_c(1e-12)
            .max(T::epsilon() * T::from_f64_c(8.0 * n_in.max(1) as f64));
        if (sum - T::one()).abs() > slack {
            return Err(Error::InvalidArgument(format!(
                "weights sum to {sum}, expected 1"
            )));
        }
        Ok(DiscreteMarginal { weights: kept })
    }

    /// Builds from resampling counts, returning the marginal over the atoms
    /// with nonzero count together with their original indices.
    pub fn from_counts(counts: &[u32]) -> Result<(Self, Vec<usize>)> {
        let total: u64 = counts.iter().map(|&c| u64::from(c)).sum();
        if total == 0 {
            return Err(Error::InvalidArgument(
                "counts sum to zero; marginal needs mass".into(),
            ));
        }
        let tot = T::from_f64_c(total as f64);
        let mut weights = Vec::new();
        let mut support = Vec::new();
        for (i, &c) in counts.iter().enumerate() {
            if c > 0 {
                weights.push(T::from_f64_c(f64::from(c)) / tot);
                support.push(i);
            }
        }
        Ok((DiscreteMarginal { weights }, support))
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn min_weight(&self) -> T {
        self.weights
            .iter()
            .copied()
            .fold(T::infinity(), |acc, w| acc.min(w))
    }
}

/// An entropic transport solution: the coupling, its dual potentials, and
/// the decomposition of the objective.
///
/// Invariants for converged solutions: plan marginals match `a`/`b` within
/// `marginal_residual` (column side exactly, row side up to it), `kl ≥ 0`,
/// and `objective = transport_cost + lambda·kl` dominates the exact optimum
/// of the same instance.
#[derive(Clone, Debug)]
pub struct EotSolution<T = Real> {
    pub plan: Array2<T>,
    /// Row potentials, pinned to φ[0] = 0.
    pub phi: Array1<T>,
    pub psi: Array1<T>,
    pub lambda: T,
    pub transport_cost: T,
    pub kl: T,
    pub objective: T,
    pub iterations: usize,
    pub converged: bool,
    /// Exact L1 row-marginal error of `plan` (columns are exact).
    pub marginal_residual: T,
}

fn check_shapes<T: Scalar>(
    c: &CostMatrix<T>,
    a: &DiscreteMarginal<T>,
    b: &DiscreteMarginal<T>,
) -> Result<()> {
    if c.nrows() != a.len() {
        return Err(Error::DimensionMismatch {
            context: "cost rows vs first marginal".into(),
            expected: c.nrows(),
            got: a.len(),
        });
    }
    if c.ncols() != b.len() {
        return Err(Error::DimensionMismatch {
            context: "cost columns vs second marginal".into(),
            expected: c.ncols(),
            got: b.len(),
        });
    }
    Ok(())
}

/// Solves the entropic problem at regularization `lambda > 0` by log-domain
/// Sinkhorn iteration (shifted log-sum-exp updates, annealed from larger λ
/// when the cost range demands it).
///
/// Non-convergence within `max_iter` is not an error: the best iterate comes
/// back with `converged = false` and its honest `marginal_residual`.
pub fn sinkhorn<T: Scalar>(
    c: &CostMatrix<T>,
    a: &DiscreteMarginal<T>,
    b: &DiscreteMarginal<T>,
    lambda: T,
    tol: T,
    max_iter: usize,
) -> Result<EotSolution<T>> {
    check_shapes(c, a, b)?;
    if !(lambda > T::zero()) || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "lambda must be positive and finite, got {lambda}"
        )));
    }
    if !(tol > T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "tol must be positive, got {tol}"
        )));
    }
    if max_iter == 0 {
        return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
    }

    let opts = SolverOptions::log_domain(tol, max_iter);
    let sol = solve_potentials(&c.values.view(), a.weights(), b.weights(), lambda, &opts);

    let mut phi = sol.phi;
    let mut psi = sol.psi;
    // Potentials are unique up to an additive split; pin φ[0] = 0.
    let pin = phi[0];
    phi.mapv_inplace(|v| v - pin);
    psi.mapv_inplace(|v| v + pin);

    let (n, m) = c.values.dim();
    let floor = T::from_f64_c(PLAN_FLOOR);
    let mut plan = Array2::zeros((n, m));
    let mut transport = T::zero();
    for i in 0..n {
        let ai = a.weights()[i];
        let crow = c.values.row(i);
        let mut prow = plan.row_mut(i);
        for j in 0..m {
            let e = ((phi[i] + psi[j] - crow[j]) / lambda).exp();
            let mut pi = ai * b.weights()[j] * e;
            if pi < floor {
                pi = T::zero();
            }
            prow[j] = pi;
            transport += pi * crow[j];
        }
    }

    // ⟨φ,r⟩ + ⟨ψ,c⟩ over the actual plan marginals equals the primal
    // objective exactly; the column marginals are b by construction.
    let mut value = T::zero();
    for i in 0..n {
        value += phi[i] * sol.row_sums[i];
    }
    for j in 0..m {
        value += psi[j] * b.weights()[j];
    }
    let kl = ((value - transport) / lambda).max(T::zero());

    Ok(EotSolution {
        plan,
        phi,
        psi,
        lambda,
        transport_cost: transport,
        kl,
        objective: transport + lambda * kl,
        iterations: sol.iterations,
        converged: sol.converged,
        marginal_residual: sol.residual,
    })
}

/// Recomputes ⟨C,Π⟩ + λ·D_KL(Π‖a⊗b) directly from the stored plan, with
/// 0·log 0 = 0. Independent of the identity used inside [`sinkhorn`], so it
/// doubles as a consistency check.
pub fn eot_objective<T: Scalar>(
    sol: &EotSolution<T>,
    c: &CostMatrix<T>,
    a: &DiscreteMarginal<T>,
    b: &DiscreteMarginal<T>,
) -> Result<T> {
    check_shapes(c, a, b)?;
    let (n, m) = c.values.dim();
    if sol.plan.dim() != (n, m) {
        return Err(Error::DimensionMismatch {
            context: "plan vs cost".into(),
            expected: n * m,
            got: sol.plan.len(),
        });
    }
    let floor = T::from_f64_c(PLAN_FLOOR);
    let mut transport = T::zero();
    let mut kl = T::zero();
    for i in 0..n {
        let ai = a.weights()[i];
        for j in 0..m {
            let pi = sol.plan[[i, j]];
            if pi < T::zero() {
                return Err(Error::InvalidArgument(format!(
                    "plan entry ({i},{j}) is negative: {pi}"
                )));
            }
            if pi < floor {
                continue;
            }
            transport += pi * c.values[[i, j]];
            kl += pi * (pi / (ai * b.weights()[j])).ln();
        }
    }
    Ok(transport + sol.lambda * kl)
}

/// Exact (unregularized) optimal transport value and an optimal plan, by
/// network simplex. Optimal within rounding of the pivot arithmetic.
pub fn exact_ot<T: Scalar>(
    c: &CostMatrix<T>,
    a: &DiscreteMarginal<T>,
    b: &DiscreteMarginal<T>,
) -> Result<(T, Array2<T>)> {
    check_shapes(c, a, b)?;
    let sa: T = a.weights().iter().copied().sum();
    let sb: T = b.weights().iter().copied().sum();
    if (sa - sb).abs() > T::from_f64_c(1e-9) {
        return Err(Error::InvalidArgument(format!(
            "marginals carry different total mass: {sa} vs {sb}"
        )));
    }
    let out = simplex::transport_simplex(&c.values.view(), a.weights(), b.weights())?;
    Ok((out.value, out.plan))
}

/// Largest per-equation residual of the discrete Schrödinger system,
/// measured on the natural scale of each equation: row i contributes
/// |1 − exp(φ[i]/λ)·Σ_j b[j]·exp((ψ[j]−C[i,j])/λ)| (evaluated by shifted
/// log-sum-exp), and columns symmetrically. On this scale the residual of a
/// converged solve is bounded by tol divided by the smallest marginal
/// weight; the raw difference of the two equation sides would overflow once
/// potentials exceed λ·log(max float) and certify nothing.
pub fn schrodinger_residual<T: Scalar>(
    sol: &EotSolution<T>,
    c: &CostMatrix<T>,
    a: &DiscreteMarginal<T>,
    b: &DiscreteMarginal<T>,
) -> T {
    debug_assert!(sol.lambda > T::zero());
    let (n, m) = c.values.dim();
    let lambda = sol.lambda;
    let mut worst = T::zero();
    for i in 0..n {
        // t = log Σ_j b_j e^{(ψ_j − C_ij)/λ}, so the row equation reads
        // exp(t + φ_i/λ) = 1.
        let mut hi = T::neg_infinity();
        for j in 0..m {
            let s = (sol.psi[j] - c.values[[i, j]]) / lambda + b.weights()[j].ln();
            if s > hi {
                hi = s;
            }
        }
        let mut acc = T::zero();
        for j in 0..m {
            let s = (sol.psi[j] - c.values[[i, j]]) / lambda + b.weights()[j].ln();
            acc += (s - hi).exp();
        }
        let r = ((hi + acc.ln() + sol.phi[i] / lambda).exp() - T::one()).abs();
        if r > worst {
            worst = r;
        }
    }
    for j in 0..m {
        let mut hi = T::neg_infinity();
        for i in 0..n {
            let s = (sol.phi[i] - c.values[[i, j]]) / lambda + a.weights()[i].ln();
            if s > hi {
                hi = s;
            }
        }
        let mut acc = T::zero();
        for i in 0..n {
            let s = (sol.phi[i] - c.values[[i, j]]) / lambda + a.weights()[i].ln();
            acc += (s - hi).exp();
        }
        let r = ((hi + acc.ln() + sol.psi[j] / lambda).exp() - T::one()).abs();
        if r > worst {
            worst = r;
        }
    }
    worst
}

/// Dual objective ⟨φ,a⟩ + ⟨ψ,b⟩ − λ(Σ_ij a_i b_j e^{(φ_i+ψ_j−C_ij)/λ} − 1),
/// with the exponential mass evaluated by log-sum-exp. Matches the primal
/// objective at the fixed point.
pub fn dual_objective<T: Scalar>(
    sol: &EotSolution<T>,
    c: &CostMatrix<T>,
    a: &DiscreteMarginal<T>,
    b: &DiscreteMarginal<T>,
) -> T {
    let (n, m) = c.values.dim();
    let lambda = sol.lambda;
    let mut linear = T::zero();
    for i in 0..n {
        linear += sol.phi[i] * a.weights()[i];
    }
    for j in 0..m {
        linear += sol.psi[j] * b.weights()[j];
    }
    let mut hi = T::neg_infinity();
    for i in 0..n {
        for j in 0..m {
            let s = (sol.phi[i] + sol.psi[j] - c.values[[i, j]]) / lambda
                + a.weights()[i].ln()
                + b.weights()[j].ln();
            if s > hi {
                hi = s;
            }
        }
    }
    let mut acc = T::zero();
    for i in 0..n {
        for j in 0..m {
            let s = (sol.phi[i] + sol.psi[j] - c.values[[i, j]]) / lambda
                + a.weights()[i].ln()
                + b.weights()[j].ln();
            acc += (s - hi).exp();
        }
    }
    let mass = (hi + acc.ln()).exp();
    linear - lambda * (mass - T::one())
}
