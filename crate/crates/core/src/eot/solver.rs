//! Sinkhorn iteration for entropic transport potentials.
//!
//! Two interchangeable kernels drive the same fixed-point iteration:
//!
//! * a log-domain pass updating potentials through shifted log-sum-exp — the
//!   reference path, immune to any cost/λ ratio;
//! * a scaling pass on the Gibbs kernel `K = exp(−(C − min C)/λ)` with
//!   periodic absorption of the scaling vectors into base potentials — one
//!   multiply-add sweep per half-step instead of one `exp` per entry, used
//!   whenever the cost range over λ keeps the kernel representable. The
//!   absorption step is exactly a shifted log-sum-exp rewrite, so both paths
//!   share the fixed point; the scaling path abandons ship (returns `None`)
//!   on any non-finite intermediate and the caller re-solves in log domain.
//!
//! Convergence is certified, not assumed: the returned pair (φ, ψ) always has
//! exact column marginals by construction (ψ is the last half-step), and the
//! reported residual is the exact L1 row-marginal error of that same pair,
//! obtained from the next φ half-step. Small λ is reached by a deterministic
//! geometric anneal of λ with warm-started potentials.

use crate::scalar::Scalar;
use ndarray::{Array1, Array2, ArrayView2};

/// Cost-range over λ beyond which a stage is annealed rather than solved
/// directly.
const DIRECT_RATIO: f64 = 20.0;
/// Anneal factor between consecutive λ stages.
const ANNEAL_FACTOR: f64 = 3.0;
/// Cost-range over λ beyond which the Gibbs kernel would underflow and the
/// scaling path is not attempted.
const SCALED_MAX_RATIO: f64 = 500.0;
/// Marginal tolerance for intermediate anneal stages (the final stage always
/// runs at the caller's tolerance).
const STAGE_TOL: f64 = 1e-4;

#[derive(Clone, Debug)]
pub(crate) struct SolverOptions<T> {
    pub tol: T,
    pub max_iter: usize,
    /// Warm-start potentials (φ, ψ) for the original cost.
    pub init: Option<(Array1<T>, Array1<T>)>,
    /// When false every stage runs in log domain, kernel path disabled.
    pub allow_scaled: bool,
}

impl<T: Scalar> SolverOptions<T> {
    pub fn new(tol: T, max_iter: usize) -> Self {
        SolverOptions {
            tol,
            max_iter,
            init: None,
            allow_scaled: true,
        }
    }

    pub fn log_domain(tol: T, max_iter: usize) -> Self {
        SolverOptions {
            allow_scaled: false,
            ..SolverOptions::new(tol, max_iter)
        }
    }
}

/// Converged (or best-effort) potentials plus the value bookkeeping every
/// caller needs. `row_sums` are the exact row marginals of the plan induced
/// by (φ, ψ); its column marginals equal `b` by construction.
#[derive(Clone, Debug)]
pub(crate) struct PotentialSolve<T> {
    pub phi: Array1<T>,
    pub psi: Array1<T>,
    pub row_sums: Array1<T>,
    pub iterations: usize,
    pub converged: bool,
    pub residual: T,
    /// Primal objective ⟨C,Π⟩ + λ·KL via the identity ⟨φ,r⟩ + ⟨ψ,b⟩.
    pub value: T,
}

/// Solves for potentials at regularization `lambda`, annealing from larger λ
/// when the cost range demands it. `a` and `b` must be strictly positive.
pub(crate) fn solve_potentials<T: Scalar>(
    c: &ArrayView2<T>,
    a: &[T],
    b: &[T],
    lambda: T,
    opts: &SolverOptions<T>,
) -> PotentialSolve<T> {
    let (min_c, max_c) = min_max(c);
    let range = (max_c - min_c).to_f64_c();
    let lam = lambda.to_f64_c();

    let mut stages: Vec<f64> = Vec::new();
    if range > DIRECT_RATIO * lam {
        let mut s = range / DIRECT_RATIO;
        while s > lam * ANNEAL_FACTOR {
            stages.push(s);
            s /= ANNEAL_FACTOR;
        }
    }
    stages.push(lam);

    let ct = transpose_owned(c);
    let mut init = opts.init.clone();
    let mut used = 0usize;
    let mut outcome: Option<PotentialSolve<T>> = None;
    let n_stages = stages.len();
    for (s, stage_lambda) in stages.into_iter().enumerate() {
        let last = s + 1 == n_stages;
        let stage_tol = if last {
            opts.tol
        } else {
            let relaxed = T::from_f64_c(STAGE_TOL);
            if relaxed > opts.tol { relaxed } else { opts.tol }
        };
        let budget = opts.max_iter.saturating_sub(used).max(1);
        let lam_s = T::from_f64_c(stage_lambda);

        let kernel_path = opts.allow_scaled && range <= SCALED_MAX_RATIO * stage_lambda;
        let solved = if kernel_path {
            GibbsKernel::build(c, lam_s)
                .and_then(|k| scaled_stage(&k, a, b, stage_tol, budget, init.as_ref()))
        } else {
            None
        };
        let solved = solved
            .unwrap_or_else(|| lse_stage(c, &ct.view(), a, b, lam_s, stage_tol, budget, init.as_ref()));

        used += solved.iterations;
        init = Some((solved.phi.clone(), solved.psi.clone()));
        outcome = Some(solved);
        if used >= opts.max_iter {
            break;
        }
    }

    let mut out = outcome.expect("at least one stage always runs");
    out.iterations = used;
    // A truncated anneal never reached the target λ; report non-convergence
    // regardless of the stage's own certificate.
    if used >= opts.max_iter && out.converged && n_stages > 1 {
        out.converged = out.residual <= opts.tol;
    }
    out
}

/// Precomputed Gibbs kernel `K = exp(−(C − shift)/λ)`, reusable across many
/// solves on the same cost (and gatherable for resampled sub-problems).
#[derive(Clone, Debug)]
pub(crate) struct GibbsKernel<T> {
    pub k: Array2<T>,
    pub shift: T,
    pub lambda: T,
}

impl<T: Scalar> GibbsKernel<T> {
    /// `None` when the cost range over λ would underflow the kernel.
    pub fn build(c: &ArrayView2<T>, lambda: T) -> Option<Self> {
        let (min_c, max_c) = min_max(c);
        if (max_c - min_c).to_f64_c() > SCALED_MAX_RATIO * lambda.to_f64_c() {
            return None;
        }
        let k = c.mapv(|v| ((min_c - v) / lambda).exp());
        Some(GibbsKernel {
            k,
            shift: min_c,
            lambda,
        })
    }

    /// Sub-kernel on the given row/column supports (duplicates allowed).
    pub fn gather(&self, rows: &[usize], cols: &[usize]) -> GibbsKernel<T> {
        let mut k = Array2::<T>::zeros((rows.len(), cols.len()));
        for (ri, &r) in rows.iter().enumerate() {
            let src = self.k.row(r);
            let mut dst = k.row_mut(ri);
            for (ci, &c) in cols.iter().enumerate() {
                dst[ci] = src[c];
            }
        }
        GibbsKernel {
            k,
            shift: self.shift,
            lambda: self.lambda,
        }
    }
}

/// Scaling-path solve on a prebuilt kernel (cold start). `None` when the
/// iteration degenerates numerically; callers then fall back to log domain.
pub(crate) fn solve_value_kernel<T: Scalar>(
    kern: &GibbsKernel<T>,
    a: &[T],
    b: &[T],
    tol: T,
    max_iter: usize,
) -> Option<PotentialSolve<T>> {
    scaled_stage(kern, a, b, tol, max_iter, None)
}

// ---------------------------------------------------------------------------
// log-domain kernel
// ---------------------------------------------------------------------------

/// φ_out[i] = −λ·LSE_j((ψ[j] − C[i,j])/λ + log b[j]), shifted by the row max.
fn lse_row_halfstep<T: Scalar>(
    c: &ArrayView2<T>,
    psi: &[T],
    log_b: &[T],
    lambda: T,
    phi_out: &mut [T],
) {
    let m = psi.len();
    for (i, row) in c.rows().into_iter().enumerate() {
        let mut hi = T::neg_infinity();
        for j in 0..m {
            let s = (psi[j] - row[j]) / lambda + log_b[j];
            if s > hi {
                hi = s;
            }
        }
        let mut acc = T::zero();
        for j in 0..m {
            acc += (((psi[j] - row[j]) / lambda + log_b[j]) - hi).exp();
        }
        phi_out[i] = -lambda * (hi + acc.ln());
    }
}

#[allow(clippy::too_many_arguments)]
fn lse_stage<T: Scalar>(
    c: &ArrayView2<T>,
    ct: &ArrayView2<T>,
    a: &[T],
    b: &[T],
    lambda: T,
    tol: T,
    max_iter: usize,
    init: Option<&(Array1<T>, Array1<T>)>,
) -> PotentialSolve<T> {
    let (n, m) = c.dim();
    let log_a: Vec<T> = a.iter().map(|v| v.ln()).collect();
    let log_b: Vec<T> = b.iter().map(|v| v.ln()).collect();

    let mut phi: Array1<T> = match init {
        Some((p, _)) => p.clone(),
        None => {
            let mut p = Array1::zeros(n);
            let psi0 = vec![T::zero(); m];
            lse_row_halfstep(c, &psi0, &log_b, lambda, p.as_slice_mut().unwrap());
            p
        }
    };
    let mut psi: Array1<T> = Array1::zeros(m);
    let mut phi_next: Array1<T> = Array1::zeros(n);

    let mut iterations = 0usize;
    loop {
        // Column half-step: plan(φ, ψ) now has exact column marginals b.
        lse_row_halfstep(ct, phi.as_slice().unwrap(), &log_a, lambda, psi.as_slice_mut().unwrap());
        // Row half-step doubles as the certificate for plan(φ, ψ).
        lse_row_halfstep(c, psi.as_slice().unwrap(), &log_b, lambda, phi_next.as_slice_mut().unwrap());
        iterations += 1;

        let mut err = T::zero();
        for i in 0..n {
            err += a[i] * (((phi[i] - phi_next[i]) / lambda).exp() - T::one()).abs();
        }
        if err <= tol || iterations >= max_iter {
            let mut row_sums = Array1::zeros(n);
            for i in 0..n {
                row_sums[i] = a[i] * ((phi[i] - phi_next[i]) / lambda).exp();
            }
            let value = dot(&phi, &row_sums) + dot_slice(&psi, b);
            return PotentialSolve {
                phi,
                psi,
                row_sums,
                iterations,
                converged: err <= tol,
                residual: err,
                value,
            };
        }
        std::mem::swap(&mut phi, &mut phi_next);
    }
}

// ---------------------------------------------------------------------------
// scaling kernel
// ---------------------------------------------------------------------------

fn scaled_stage<T: Scalar>(
    kern: &GibbsKernel<T>,
    a: &[T],
    b: &[T],
    tol: T,
    max_iter: usize,
    init: Option<&(Array1<T>, Array1<T>)>,
) -> Option<PotentialSolve<T>> {
    let (n, m) = kern.k.dim();
    let lambda = kern.lambda;
    // Scaling magnitude beyond which u, v are absorbed into the kernel.
    let absorb_at = T::max_value().sqrt().sqrt();

    // Base potentials (for the shifted cost) absorbed so far; the working
    // kernel stays borrowed until the first absorption or warm start.
    let mut phi_base: Array1<T> = Array1::zeros(n);
    let mut psi_base: Array1<T> = Array1::zeros(m);
    let mut k_owned: Option<Array2<T>> = None;

    if let Some((phi0, psi0)) = init {
        // Warm start: fold given potentials into the kernel basis.
        phi_base.assign(phi0);
        phi_base.mapv_inplace(|v| v - kern.shift);
        psi_base.assign(psi0);
        let mut k = kern.k.clone();
        for i in 0..n {
            let fi = (phi_base[i] / lambda).exp();
            let mut row = k.row_mut(i);
            for j in 0..m {
                row[j] *= fi * (psi_base[j] / lambda).exp();
            }
        }
        if k.iter().any(|v| !v.is_finite()) {
            return None;
        }
        k_owned = Some(k);
    }

    let mut u: Array1<T> = Array1::ones(n);
    let mut v: Array1<T> = Array1::ones(m);
    let mut u_next: Array1<T> = Array1::zeros(n);
    let mut scratch: Array1<T> = Array1::zeros(m.max(n));

    // Row half-step on the initial basis (mirrors the log-domain init).
    {
        let k = k_owned.as_ref().map(|k| k.view()).unwrap_or(kern.k.view());
        kernel_row_apply(&k, b, &v, &mut u);
        if !invert_in_place(&mut u) {
            return None;
        }
    }

    let mut iterations = 0usize;
    loop {
        let k = k_owned.as_ref().map(|k| k.view()).unwrap_or(kern.k.view());
        // Column half-step: exact column marginals for (u, v).
        kernel_col_apply(&k, a, &u, &mut v, &mut scratch);
        if !invert_in_place(&mut v) {
            return None;
        }
        // Row half-step = certificate.
        kernel_row_apply(&k, b, &v, &mut u_next);
        if !invert_in_place(&mut u_next) {
            return None;
        }
        iterations += 1;

        let mut err = T::zero();
        for i in 0..n {
            err += a[i] * (u[i] / u_next[i] - T::one()).abs();
        }
        if !err.is_finite() {
            return None;
        }

        if err <= tol || iterations >= max_iter {
            let mut phi = Array1::zeros(n);
            let mut psi = Array1::zeros(m);
            let mut row_sums = Array1::zeros(n);
            for i in 0..n {
                phi[i] = phi_base[i] + lambda * u[i].ln() + kern.shift;
                row_sums[i] = a[i] * (u[i] / u_next[i]);
            }
            for j in 0..m {
                psi[j] = psi_base[j] + lambda * v[j].ln();
            }
            if phi.iter().any(|x| !x.is_finite()) || psi.iter().any(|x| !x.is_finite()) {
                return None;
            }
            let value = dot(&phi, &row_sums) + dot_slice(&psi, b);
            return Some(PotentialSolve {
                phi,
                psi,
                row_sums,
                iterations,
                converged: err <= tol,
                residual: err,
                value,
            });
        }
        std::mem::swap(&mut u, &mut u_next);

        let u_wild = u.iter().any(|&x| x > absorb_at || x < T::one() / absorb_at);
        let v_wild = v.iter().any(|&x| x > absorb_at || x < T::one() / absorb_at);
        if u_wild || v_wild {
            let k = k_owned.get_or_insert_with(|| kern.k.clone());
            for i in 0..n {
                let ui = u[i];
                phi_base[i] += lambda * ui.ln();
                let mut row = k.row_mut(i);
                for j in 0..m {
                    row[j] *= ui * v[j];
                }
            }
            for j in 0..m {
                psi_base[j] += lambda * v[j].ln();
            }
            if k.iter().any(|x| !x.is_finite()) {
                return None;
            }
            u.fill(T::one());
            v.fill(T::one());
        }
    }
}

/// out[i] = Σ_j K[i,j]·b[j]·v[j]
fn kernel_row_apply<T: Scalar>(k: &ArrayView2<T>, b: &[T], v: &Array1<T>, out: &mut Array1<T>) {
    let m = b.len();
    for (i, row) in k.rows().into_iter().enumerate() {
        let mut acc = T::zero();
        for j in 0..m {
            acc += row[j] * b[j] * v[j];
        }
        out[i] = acc;
    }
}

/// out[j] = Σ_i K[i,j]·a[i]·u[i], accumulated row-major.
fn kernel_col_apply<T: Scalar>(
    k: &ArrayView2<T>,
    a: &[T],
    u: &Array1<T>,
    out: &mut Array1<T>,
    _scratch: &mut Array1<T>,
) {
    let (n, m) = k.dim();
    for j in 0..m {
        out[j] = T::zero();
    }
    for i in 0..n {
        let w = a[i] * u[i];
        let row = k.row(i);
        for j in 0..m {
            out[j] += row[j] * w;
        }
    }
}

/// x ← 1 ⊘ x; false when any entry is zero or non-finite.
fn invert_in_place<T: Scalar>(x: &mut Array1<T>) -> bool {
    for e in x.iter_mut() {
        if !e.is_finite() || *e <= T::zero() {
            return false;
        }
        *e = T::one() / *e;
    }
    x.iter().all(|v| v.is_finite())
}

// ---------------------------------------------------------------------------
// small helpers
// ---------------------------------------------------------------------------

fn min_max<T: Scalar>(c: &ArrayView2<T>) -> (T, T) {
    let mut lo = T::infinity();
    let mut hi = T::neg_infinity();
    for &v in c.iter() {
        if v < lo {
            lo = v;
        }
        if v > hi {
            hi = v;
        }
    }
    (lo, hi)
}

fn transpose_owned<T: Scalar>(c: &ArrayView2<T>) -> Array2<T> {
    let (n, m) = c.dim();
    let mut t = Array2::zeros((m, n));
    for i in 0..n {
        for j in 0..m {
            t[[j, i]] = c[[i, j]];
        }
    }
    t
}

fn dot<T: Scalar>(x: &Array1<T>, y: &Array1<T>) -> T {
    x.iter().zip(y.iter()).map(|(&p, &q)| p * q).sum()
}

fn dot_slice<T: Scalar>(x: &Array1<T>, y: &[T]) -> T {
    x.iter().zip(y.iter()).map(|(&p, &q)| p * q).sum()
}
