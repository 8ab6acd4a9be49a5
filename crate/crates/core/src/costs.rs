//! The univariate generator family and separable ground-cost matrices.
//!
//! A generator h ≥ 0 turns coordinatewise differences into a cost
//! `C[i,j] = Σ_l h(Y[j,l] − X[i,l])` that charges exactly the directions in
//! which Y exceeds X, so transport cost over C measures how badly the first
//! argument's distribution fails to dominate the second. The symmetrization
//! `h̄(z) = h(z) + h(−z)` produces the direction-free normalizing cost.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::Real;
use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Generator choices.
///
/// `logistic` and `smooth-bump` are smooth; `hinge` and `squared-hinge` are
/// not, and carry no large-sample normality guarantee — they exist as exact
/// (λ=0) reference statistics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostKind {
    Logistic,
    SmoothBump,
    Hinge,
    SquaredHinge,
}

impl fmt::Display for CostKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CostKind::Logistic => write!(f, "logistic"),
            CostKind::SmoothBump => write!(f, "smooth-bump"),
            CostKind::Hinge => write!(f, "hinge"),
            CostKind::SquaredHinge => write!(f, "squared-hinge"),
        }
    }
}

/// A generator pick plus its parameters and the symmetrization flag.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostSpec {
    #[serde(rename = "cost")]
    pub kind: CostKind,
    /// Slope of the logistic generator; ignored by the other kinds.
    #[serde(default = "default_beta")]
    pub beta: Real,
    /// When set, evaluation uses h̄ instead of h.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub symmetrized: bool,
}

fn default_beta() -> Real {
    1.0
}

impl CostSpec {
    pub fn logistic(beta: Real) -> Result<Self> {
        CostSpec {
            kind: CostKind::Logistic,
            beta,
            symmetrized: false,
        }
        .validated()
    }

    pub fn smooth_bump() -> Self {
        CostSpec {
            kind: CostKind::SmoothBump,
            beta: default_beta(),
            symmetrized: false,
        }
    }

    pub fn hinge() -> Self {
        CostSpec {
            kind: CostKind::Hinge,
            beta: default_beta(),
            symmetrized: false,
        }
    }

    pub fn squared_hinge() -> Self {
        CostSpec {
            kind: CostKind::SquaredHinge,
            beta: default_beta(),
            symmetrized: false,
        }
    }

    /// Same generator at a different slope, revalidated.
    pub fn with_beta(&self, beta: Real) -> Result<Self> {
        CostSpec { beta, ..*self }.validated()
    }

    /// Returns the same spec with the symmetrization flag set as given.
    pub fn with_symmetrized(mut self, symmetrized: bool) -> Self {
        self.symmetrized = symmetrized;
        self
    }

    /// Enforces parameter invariants (needed after deserialization).
    pub fn validated(self) -> Result<Self> {
        if self.kind == CostKind::Logistic && !(self.beta > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "logistic cost requires beta > 0, got {}",
                self.beta
            )));
        }
        Ok(self)
    }
}

/// Evaluates the plain generator h(z) in `f64`.
///
/// The logistic branch uses `max(βz, 0) + log1p(e^{−|βz|})`, which is exact
/// for small arguments and immune to overflow for large ones.
fn h_raw(kind: CostKind, beta: Real, z: Real) -> Real {
    match kind {
        CostKind::Logistic => {
            let bz = beta * z;
            bz.max(0.0) + (-bz.abs()).exp().ln_1p()
        }
        CostKind::SmoothBump => {
            if z > 0.0 {
                (-1.0 / z).exp()
            } else {
                0.0
            }
        }
        CostKind::Hinge => z.max(0.0),
        CostKind::SquaredHinge => {
            let p = z.max(0.0);
            p * p
        }
    }
}

/// Evaluates the configured generator (h, or h̄ when `symmetrized`) at `z`.
/// Total and nonnegative on finite inputs.
pub fn eval_generator<T: Scalar>(spec: &CostSpec, z: T) -> T {
    let z = z.to_f64_c();
    let v = if spec.symmetrized {
        h_raw(spec.kind, spec.beta, z) + h_raw(spec.kind, spec.beta, -z)
    } else {
        h_raw(spec.kind, spec.beta, z)
    };
    T::from_f64_c(v)
}

/// Ground-cost matrix together with the spec that produced it.
#[derive(Clone, Debug)]
pub struct CostMatrix<T: Scalar = Real> {
    pub values: Array2<T>,
    pub spec: CostSpec,
}

impl<T: Scalar> CostMatrix<T> {
    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }
}

/// Builds the n×m cost matrix `C[i,j] = Σ_l h(Y[j,l] − X[i,l])` (or the h̄
/// analogue when the spec is symmetrized). Rows of `x` and `y` are samples,
/// columns are metrics.
pub fn cost_matrix<T: Scalar>(
    spec: &CostSpec,
    x: &ArrayView2<T>,
    y: &ArrayView2<T>,
) -> Result<CostMatrix<T>> {
    let spec = spec.validated()?;
    if x.ncols() != y.ncols() {
        return Err(Error::DimensionMismatch {
            context: "cost_matrix samples".into(),
            expected: x.ncols(),
            got: y.ncols(),
        });
    }
    let (n, m, d) = (x.nrows(), y.nrows(), x.ncols());
    let mut values = Array2::<T>::zeros((n, m));
    for i in 0..n {
        for j in 0..m {
            let mut acc = 0.0;
            for l in 0..d {
                let z = (y[[j, l]] - x[[i, l]]).to_f64_c();
                acc += if spec.symmetrized {
                    h_raw(spec.kind, spec.beta, z) + h_raw(spec.kind, spec.beta, -z)
                } else {
                    h_raw(spec.kind, spec.beta, z)
                };
            }
            values[[i, j]] = T::from_f64_c(acc);
        }
    }
    Ok(CostMatrix { values, spec })
}

/// Builds the plain and the symmetrized cost matrix in one pass over the
/// sample pairs; the bootstrap engine calls this once per ordered pair and
/// then reuses both matrices across every replicate.
pub fn cost_matrix_with_symmetrized<T: Scalar>(
    spec: &CostSpec,
    x: &ArrayView2<T>,
    y: &ArrayView2<T>,
) -> Result<(CostMatrix<T>, CostMatrix<T>)> {
    let spec = spec.validated()?.with_symmetrized(false);
    if x.ncols() != y.ncols() {
        return Err(Error::DimensionMismatch {
            context: "cost_matrix samples".into(),
            expected: x.ncols(),
            got: y.ncols(),
        });
    }
    let (n, m, d) = (x.nrows(), y.nrows(), x.ncols());
    let mut plain = Array2::<T>::zeros((n, m));
    let mut sym = Array2::<T>::zeros((n, m));
    for i in 0..n {
        for j in 0..m {
            let mut fwd = 0.0;
            let mut bwd = 0.0;
            for l in 0..d {
                let z = (y[[j, l]] - x[[i, l]]).to_f64_c();
                fwd += h_raw(spec.kind, spec.beta, z);
                bwd += h_raw(spec.kind, spec.beta, -z);
            }
            plain[[i, j]] = T::from_f64_c(fwd);
            sym[[i, j]] = T::from_f64_c(fwd + bwd);
        }
    }
    Ok((
        CostMatrix { values: plain, spec },
        CostMatrix {
            values: sym,
            spec: spec.with_symmetrized(true),
        },
    ))
}
