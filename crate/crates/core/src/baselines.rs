//! Univariate-reduction baselines: pool every label's samples, normalize
//! through an empirical CDF fit on the pool, and rank the resulting scalar
//! samples with the order-statistics ratio instead of transport.
//!
//! Two reductions are offered. The independent-copula score normalizes each
//! metric through its own pooled CDF and takes the geometric mean across
//! metrics; the empirical-copula score evaluates the pooled multivariate
//! CDF directly. Both depend on ranks only, so any strictly increasing
//! per-metric rescaling of the pooled data leaves the scores unchanged.
//!
//! Within the bootstrap the pooled CDFs are refit on each replicate's
//! resampled pool, so a replicate is a complete rerun of the reduction, not
//! a re-read of frozen scores. Resampling streams are shared with the
//! transport pipeline, keyed by (seed, label, replicate).

use crate::dominance::univariate_ratio;
use crate::error::{Error, Result};
use crate::measures::LabeledSamples;
use crate::rng::{resample_counts, stream, StreamKind};
use crate::testing::{report_from_tensor, EpsilonTensor, RankingReport, TestConfig};
use crate::{Matrix, Real};
use ndarray::Array3;
use rayon::prelude::*;

/// Which pooled-CDF reduction scalarizes the samples.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CopulaMethod {
    /// Per-metric pooled CDFs, geometric mean across metrics.
    Independent,
    /// Pooled multivariate CDF.
    Empirical,
}

impl CopulaMethod {
    /// Tag recorded in report configs.
    pub fn tag(&self) -> &'static str {
        match self {
            CopulaMethod::Independent => "P(IC)",
            CopulaMethod::Empirical => "P(EC)",
        }
    }
}

/// One label's contribution to a (possibly resampled) pool: the matrix,
/// the surviving support rows, and their multiplicities.
struct PoolPart<'a> {
    values: &'a Matrix,
    rows: Vec<usize>,
    counts: Vec<u32>,
}

impl PoolPart<'_> {
    fn full(values: &Matrix) -> PoolPart<'_> {
        PoolPart {
            values,
            rows: (0..values.nrows()).collect(),
            counts: vec![1; values.nrows()],
        }
    }
}

/// Independent-copula scores for a weighted pool: per-metric pooled CDF
/// F_l(t) = (weight of pooled values ≤ t)/N, score = (Π_l F_l(x_l))^{1/d}.
/// Every query row is itself in the pool, so each factor is ≥ 1/N and the
/// scores stay in (0, 1].
fn ic_scores(parts: &[PoolPart<'_>]) -> Vec<Vec<Real>> {
    let d = parts[0].values.ncols();
    let total: u32 = parts.iter().map(|p| p.counts.iter().sum::<u32>()).sum();
    let n_pool = total as Real;

    // Per metric: sorted pooled values with cumulative weight.
    let tables: Vec<(Vec<Real>, Vec<Real>)> = (0..d)
        .map(|l| {
            let mut entries: Vec<(Real, u32)> = parts
                .iter()
                .flat_map(|p| {
                    p.rows
                        .iter()
                        .zip(&p.counts)
                        .map(move |(&r, &c)| (p.values[[r, l]], c))
                })
                .collect();
            entries.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            let mut values = Vec::with_capacity(entries.len());
            let mut cum = Vec::with_capacity(entries.len());
            let mut acc = 0.0;
            for (v, c) in entries {
                acc += c as Real;
                values.push(v);
                cum.push(acc);
            }
            (values, cum)
        })
        .collect();

    let cdf = |l: usize, t: Real| -> Real {
        let (values, cum) = &tables[l];
        let idx = values.partition_point(|&v| v <= t);
        // idx ≥ 1 because t is drawn from the pool itself.
        cum[idx - 1] / n_pool
    };

    parts
        .iter()
        .map(|p| {
            p.rows
                .iter()
                .map(|&r| {
                    let log_sum: Real = (0..d).map(|l| cdf(l, p.values[[r, l]]).ln()).sum();
                    (log_sum / d as Real).exp()
                })
                .collect()
        })
        .collect()
}

/// Empirical-copula scores for a weighted pool:
/// F(x) = (weight of pooled rows ≤ x componentwise)/N. Quadratic in the
/// pool's support size.
fn ec_scores(parts: &[PoolPart<'_>]) -> Vec<Vec<Real>> {
    let d = parts[0].values.ncols();
    let total: u32 = parts.iter().map(|p| p.counts.iter().sum::<u32>()).sum();
    let n_pool = total as Real;

    let dominated_weight = |x_part: &PoolPart<'_>, x_row: usize| -> Real {
        let mut acc: u32 = 0;
        for p in parts {
            for (&r, &c) in p.rows.iter().zip(&p.counts) {
                let le = (0..d).all(|l| p.values[[r, l]] <= x_part.values[[x_row, l]]);
                if le {
                    acc += c;
                }
            }
        }
        acc as Real
    };

    parts
        .iter()
        .map(|p| {
            p.rows
                .iter()
                .map(|&r| dominated_weight(p, r) / n_pool)
                .collect()
        })
        .collect()
}

/// Repeats each support row's score by its multiplicity, restoring one
/// scalar per original sample.
fn expand(scores: &[Real], counts: &[u32]) -> Vec<Real> {
    scores
        .iter()
        .zip(counts)
        .flat_map(|(&s, &c)| std::iter::repeat(s).take(c as usize))
        .collect()
}

fn aggregate(data: &LabeledSamples, method: CopulaMethod) -> Vec<(String, Vec<Real>)> {
    let parts: Vec<PoolPart<'_>> = data
        .iter()
        .map(|(_, m)| PoolPart::full(m.values()))
        .collect();
    let scores = match method {
        CopulaMethod::Independent => ic_scores(&parts),
        CopulaMethod::Empirical => ec_scores(&parts),
    };
    data.iter()
        .zip(scores)
        .map(|((label, _), s)| (label.to_string(), s))
        .collect()
}

/// Independent-copula reduction of every label against the pooled
/// per-metric CDFs. Outputs lie in (0, 1].
pub fn aggregate_ic(data: &LabeledSamples) -> Vec<(String, Vec<Real>)> {
    aggregate(data, CopulaMethod::Independent)
}

/// Empirical-copula reduction of every label against the pooled
/// multivariate CDF. Outputs lie in (0, 1].
pub fn aggregate_ec(data: &LabeledSamples) -> Vec<(String, Vec<Real>)> {
    aggregate(data, CopulaMethod::Empirical)
}

/// Bootstrap tensor over scalar samples with the order-statistics ratio in
/// every cell. Same layout and stream keying as the transport tensor.
fn univariate_tensor(scalars: &[(String, Vec<Real>)], cfg: &TestConfig) -> Result<EpsilonTensor> {
    let k = scalars.len();
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "ranking needs at least two labels, got {k}"
        )));
    }
    for (label, v) in scalars {
        if v.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "label `{label}` has no samples"
            )));
        }
    }
    let b_total = cfg.bootstraps;
    let sizes: Vec<usize> = scalars.iter().map(|(_, v)| v.len()).collect();

    let slices: Vec<(usize, Vec<Vec<Real>>)> = (0..=b_total)
        .into_par_iter()
        .map(|b| {
            let samples: Vec<Vec<Real>> = scalars
                .iter()
                .enumerate()
                .map(|(i, (_, v))| {
                    if b == 0 {
                        v.clone()
                    } else {
                        let mut rng = stream(cfg.seed, StreamKind::Resample, i as u64, b as u64);
                        let counts = resample_counts(&mut rng, v.len());
                        expand(v, &counts)
                    }
                })
                .collect();
            (b, samples)
        })
        .collect();

    let mut values = Array3::zeros((b_total + 1, k, k));
    for (b, samples) in &slices {
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    values[[*b, i, j]] = univariate_ratio(&samples[i], &samples[j])
                        .map_err(|e| e.in_stage(format!("tensor cell b={b} i={i} j={j}")))?;
                }
            }
        }
    }
    Ok(EpsilonTensor { values, sizes })
}

/// The ranking pipeline on already-scalar samples: bootstrap the scalars,
/// fill the tensor with the order-statistics ratio, and hand the result to
/// the shared test/report machinery.
pub fn rank_univariate(
    scalars: &[(String, Vec<Real>)],
    cfg: &TestConfig,
) -> Result<RankingReport> {
    cfg.validate()?;
    let tensor = univariate_tensor(scalars, cfg)?;
    let labels = scalars.iter().map(|(l, _)| l.clone()).collect();
    report_from_tensor(labels, &tensor, cfg, None)
}

/// The full baseline: scalarize through the chosen pooled-CDF reduction and
/// rank. The reduction is refit inside every bootstrap replicate — resample
/// first, re-pool, re-normalize — so the replicate scores see the same
/// estimation noise the point estimate does.
pub fn rank_aggregated(
    data: &LabeledSamples,
    method: CopulaMethod,
    cfg: &TestConfig,
) -> Result<RankingReport> {
    cfg.validate()?;
    let k = data.k();
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "ranking needs at least two labels, got {k}"
        )));
    }
    let b_total = cfg.bootstraps;
    let sizes: Vec<usize> = (0..k).map(|i| data.get(i).1.n()).collect();

    let slices: Vec<(usize, Vec<Vec<Real>>)> = (0..=b_total)
        .into_par_iter()
        .map(|b| {
            let parts: Vec<PoolPart<'_>> = (0..k)
                .map(|i| {
                    let values = data.get(i).1.values();
                    if b == 0 {
                        return PoolPart::full(values);
                    }
                    let mut rng = stream(cfg.seed, StreamKind::Resample, i as u64, b as u64);
                    let counts = resample_counts(&mut rng, sizes[i]);
                    let (rows, kept_counts): (Vec<usize>, Vec<u32>) = counts
                        .iter()
                        .enumerate()
                        .filter(|(_, &c)| c > 0)
                        .map(|(r, &c)| (r, c))
                        .unzip();
                    PoolPart {
                        values,
                        rows,
                        counts: kept_counts,
                    }
                })
                .collect();
            let scores = match method {
                CopulaMethod::Independent => ic_scores(&parts),
                CopulaMethod::Empirical => ec_scores(&parts),
            };
            let samples: Vec<Vec<Real>> = scores
                .iter()
                .zip(&parts)
                .map(|(s, p)| expand(s, &p.counts))
                .collect();
            (b, samples)
        })
        .collect();

    let mut values = Array3::zeros((b_total + 1, k, k));
    for (b, samples) in &slices {
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    values[[*b, i, j]] = univariate_ratio(&samples[i], &samples[j])
                        .map_err(|e| e.in_stage(format!("tensor cell b={b} i={i} j={j}")))?;
                }
            }
        }
    }
    let tensor = EpsilonTensor { values, sizes };
    let labels = data.labels().iter().map(|s| s.to_string()).collect();
    report_from_tensor(labels, &tensor, cfg, Some(method.tag().to_string()))
}
