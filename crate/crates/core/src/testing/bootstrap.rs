//! The bootstrap tensor of pairwise violation ratios.
//!
//! A with-replacement resample of a sample is the same point set with
//! multiplicity weights, and transport values depend on the empirical
//! measure, not its presentation. So the engine never rebuilds costs per
//! replicate: each ordered label pair gets its cost matrices (and, when the
//! regularization admits it, Gibbs kernels) once, and every replicate solves
//! a weighted sub-problem gathered from the rows and columns its resample
//! actually kept.

use crate::costs::cost_matrix_with_symmetrized;
use crate::dominance::ratio_from_values;
use crate::eot::solver::{solve_potentials, solve_value_kernel, GibbsKernel, SolverOptions};
use crate::eot::{simplex, DiscreteMarginal};
use crate::error::{Error, Result};
use crate::measures::LabeledSamples;
use crate::rng::{resample_counts, stream, StreamKind};
use crate::Real;
use ndarray::{Array2, Array3};
use rayon::prelude::*;

use super::TestConfig;

/// All pairwise violation ratios across bootstrap replicates. Slice b=0 is
/// the original data; slices 1..=B are resamples. `sizes` carries each
/// label's sample size for the downstream test scale factors.
#[derive(Clone, Debug)]
pub struct EpsilonTensor {
    /// (B+1) × k × k, diagonal zero, entries in [0,1].
    pub values: Array3<Real>,
    pub sizes: Vec<usize>,
}

impl EpsilonTensor {
    pub fn replicates(&self) -> usize {
        self.values.dim().0 - 1
    }

    pub fn k(&self) -> usize {
        self.values.dim().1
    }
}

/// One ordered pair's precomputed transport inputs.
struct PairCache {
    cost_one_sided: Array2<Real>,
    cost_symmetric: Array2<Real>,
    kern_one_sided: Option<GibbsKernel<Real>>,
    kern_symmetric: Option<GibbsKernel<Real>>,
}

/// One label's resample at one replicate: the surviving atom indices and
/// their multiplicities as weights.
struct Support {
    rows: Vec<usize>,
    weights: Vec<Real>,
}

fn gather_cost(c: &Array2<Real>, rows: &[usize], cols: &[usize]) -> Array2<Real> {
    let mut out = Array2::zeros((rows.len(), cols.len()));
    for (ri, &r) in rows.iter().enumerate() {
        let src = c.row(r);
        let mut dst = out.row_mut(ri);
        for (ci, &c) in cols.iter().enumerate() {
            dst[ci] = src[c];
        }
    }
    out
}

/// Entropic value of one weighted sub-problem: kernel path when available,
/// log-domain solve otherwise.
fn sub_value(
    cost: &Array2<Real>,
    kern: &Option<GibbsKernel<Real>>,
    rows: &[usize],
    cols: &[usize],
    wa: &[Real],
    wb: &[Real],
    lambda: Real,
    tol: Real,
    max_iter: usize,
) -> Result<Real> {
    if let Some(k) = kern {
        let sub = k.gather(rows, cols);
        if let Some(sol) = solve_value_kernel(&sub, wa, wb, tol, max_iter) {
            if sol.converged {
                return Ok(sol.value);
            }
            return Err(Error::NonConvergence {
                iterations: sol.iterations,
                residual: sol.residual,
            });
        }
        // Kernel path degenerated; fall through to the log-domain solve.
    }
    let sub = gather_cost(cost, rows, cols);
    let sol = solve_potentials(
        &sub.view(),
        wa,
        wb,
        lambda,
        &SolverOptions::new(tol, max_iter),
    );
    if !sol.converged {
        return Err(Error::NonConvergence {
            iterations: sol.iterations,
            residual: sol.residual,
        });
    }
    Ok(sol.value)
}

fn cell_epsilon(
    cache: &PairCache,
    a: &Support,
    b: &Support,
    lambda: Real,
    tol: Real,
    max_iter: usize,
) -> Result<Real> {
    let (num, den) = if lambda == 0.0 {
        let cn = gather_cost(&cache.cost_one_sided, &a.rows, &b.rows);
        let cd = gather_cost(&cache.cost_symmetric, &a.rows, &b.rows);
        let num = simplex::transport_simplex(&cn.view(), &a.weights, &b.weights)?.value;
        let den = simplex::transport_simplex(&cd.view(), &a.weights, &b.weights)?.value;
        (num, den)
    } else {
        let num = sub_value(
            &cache.cost_one_sided,
            &cache.kern_one_sided,
            &a.rows,
            &b.rows,
            &a.weights,
            &b.weights,
            lambda,
            tol,
            max_iter,
        )?;
        let den = sub_value(
            &cache.cost_symmetric,
            &cache.kern_symmetric,
            &a.rows,
            &b.rows,
            &a.weights,
            &b.weights,
            lambda,
            tol,
            max_iter,
        )?;
        (num, den)
    };
    Ok(ratio_from_values(num, den).epsilon)
}

/// Fills ε_{b,i,j} for every replicate and ordered label pair. Replicate
/// b=0 is the original data; b ≥ 1 resample each label independently with
/// replacement, with one RNG stream per (seed, label, replicate), so the
/// tensor is a pure function of (data, cfg) whatever the evaluation order.
/// Any cell's solver failure aborts the whole tensor, naming the cell.
pub fn bootstrap_tensor(data: &LabeledSamples, cfg: &TestConfig) -> Result<EpsilonTensor> {
    cfg.validate()?;
    let k = data.k();
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "ranking needs at least two labels, got {k}"
        )));
    }
    let b_total = cfg.bootstraps;
    let sizes: Vec<usize> = (0..k).map(|i| data.get(i).1.n()).collect();

    // Resample supports per (label, replicate); index 0 is the original.
    let supports: Vec<Vec<Support>> = (0..k)
        .map(|i| {
            let n = sizes[i];
            let mut per_label = Vec::with_capacity(b_total + 1);
            per_label.push(Support {
                rows: (0..n).collect(),
                weights: vec![1.0 / n as Real; n],
            });
            for b in 1..=b_total {
                let mut rng = stream(cfg.seed, StreamKind::Resample, i as u64, b as u64);
                let counts = resample_counts(&mut rng, n);
                let (marginal, rows) = DiscreteMarginal::<Real>::from_counts(&counts)?;
                per_label.push(Support {
                    rows,
                    weights: marginal.weights().to_vec(),
                });
            }
            Ok(per_label)
        })
        .collect::<Result<_>>()?;

    // One cost (and kernel) build per ordered pair, shared by all replicates.
    let pairs: Vec<(usize, usize)> = (0..k)
        .flat_map(|i| (0..k).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    let caches: Vec<PairCache> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let x = data.get(i).1.values().view();
            let y = data.get(j).1.values().view();
            let (one_sided, symmetric) = cost_matrix_with_symmetrized::<Real>(&cfg.cost, &x, &y)?;
            let (kern_one_sided, kern_symmetric) = if cfg.lambda > 0.0 {
                (
                    GibbsKernel::build(&one_sided.values.view(), cfg.lambda),
                    GibbsKernel::build(&symmetric.values.view(), cfg.lambda),
                )
            } else {
                (None, None)
            };
            Ok(PairCache {
                cost_one_sided: one_sided.values,
                cost_symmetric: symmetric.values,
                kern_one_sided,
                kern_symmetric,
            })
        })
        .collect::<Result<_>>()?;

    let tasks: Vec<(usize, usize)> = (0..=b_total)
        .flat_map(|b| (0..pairs.len()).map(move |p| (b, p)))
        .collect();
    let cells: Vec<Real> = tasks
        .par_iter()
        .map(|&(b, p)| {
            let (i, j) = pairs[p];
            cell_epsilon(
                &caches[p],
                &supports[i][b],
                &supports[j][b],
                cfg.lambda,
                cfg.solve.tol,
                cfg.solve.max_iter,
            )
            .map_err(|e| e.in_stage(format!("tensor cell b={b} i={i} j={j}")))
        })
        .collect::<Result<_>>()?;

    let mut values = Array3::zeros((b_total + 1, k, k));
    for (t, &(b, p)) in tasks.iter().enumerate() {
        let (i, j) = pairs[p];
        values[[b, i, j]] = cells[t];
    }
    Ok(EpsilonTensor { values, sizes })
}
