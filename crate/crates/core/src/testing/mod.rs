//! Bootstrap inference and multi-candidate ranking.
//!
//! The pipeline: estimate every pairwise violation ratio on the original
//! data and on B bootstrap resamples ([`bootstrap_tensor`]), turn replicate
//! spread into standard errors, run one Bonferroni-corrected one-sided test
//! per ordered pair, and aggregate the resulting win matrix into a Borda
//! ranking. Two test families are offered: `absolute` asks whether ε_{ij}
//! is below a user-chosen tolerance ε₀, `relative` asks whether candidate i
//! beats candidate j's average behaviour against the rest of the field.

mod bootstrap;
mod normal;

pub use bootstrap::{bootstrap_tensor, EpsilonTensor};
pub use normal::{normal_cdf, normal_quantile};

use crate::costs::CostSpec;
use crate::eot::EotOptions;
use crate::error::{Error, Result};
use crate::measures::LabeledSamples;
use crate::Real;
use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

/// Which null hypothesis the pairwise tests target.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestMode {
    /// Reject when ε̂_{ij} is significantly below the tolerance ε₀.
    Absolute,
    /// Reject when label i's one-vs-all average is significantly below
    /// label j's.
    Relative,
}

fn default_alpha() -> Real {
    0.05
}

fn default_bootstraps() -> usize {
    200
}

fn default_lambda() -> Real {
    1.0
}

fn default_mode() -> TestMode {
    TestMode::Relative
}

/// Everything a ranking run depends on. Serializable so a report can echo
/// the exact configuration that produced it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TestConfig {
    /// Family-wise significance level before correction.
    #[serde(default = "default_alpha")]
    pub alpha: Real,
    /// Number of bootstrap replicates B.
    #[serde(default = "default_bootstraps")]
    pub bootstraps: usize,
    /// Tolerance for the absolute test; required in `absolute` mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon0: Option<Real>,
    /// Entropic regularization; 0 selects the exact solver.
    #[serde(default = "default_lambda")]
    pub lambda: Real,
    #[serde(flatten)]
    pub cost: CostSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_mode")]
    pub mode: TestMode,
    #[serde(flatten)]
    pub solve: EotOptions,
}

impl TestConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.bootstraps < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 bootstrap replicates, got {}",
                self.bootstraps
            )));
        }
        if let Some(e0) = self.epsilon0 {
            if !(0.0..=1.0).contains(&e0) {
                return Err(Error::InvalidArgument(format!(
                    "epsilon0 must lie in [0, 1], got {e0}"
                )));
            }
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "lambda must be finite and nonnegative, got {}",
                self.lambda
            )));
        }
        if self.mode == TestMode::Absolute && self.epsilon0.is_none() {
            return Err(Error::InvalidArgument(
                "absolute mode requires epsilon0".into(),
            ));
        }
        if !(self.solve.tol > 0.0 && self.solve.tol.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "tol must be finite and positive, got {}",
                self.solve.tol
            )));
        }
        if self.solve.max_iter == 0 {
            return Err(Error::InvalidArgument(
                "max_iter must be at least 1".into(),
            ));
        }
        self.cost.validated()?;
        Ok(())
    }
}

/// One-vs-all aggregate ε̄_{b,i} = (1/(k−1)) Σ_{j≠i} ε_{b,i,j}.
pub fn one_vs_all(tensor: &EpsilonTensor) -> Array2<Real> {
    let (slices, k, _) = tensor.values.dim();
    let mut out = Array2::zeros((slices, k));
    for b in 0..slices {
        for i in 0..k {
            let mut acc = 0.0;
            for j in 0..k {
                if j != i {
                    acc += tensor.values[[b, i, j]];
                }
            }
            out[[b, i]] = acc / (k - 1) as Real;
        }
    }
    out
}

/// Pairwise differences of the one-vs-all aggregates,
/// δ_{b,i,j} = ε̄_{b,i} − ε̄_{b,j}. Antisymmetric in (i, j).
pub fn relative_deltas(tensor: &EpsilonTensor) -> Array3<Real> {
    let ova = one_vs_all(tensor);
    let (slices, k) = ova.dim();
    let mut out = Array3::zeros((slices, k, k));
    for b in 0..slices {
        for i in 0..k {
            for j in 0..k {
                out[[b, i, j]] = ova[[b, i]] - ova[[b, j]];
            }
        }
    }
    out
}

/// One-sided upper confidence bound for a violation ratio at level 1−α:
/// U = 2ε̂ − q_α, where q_α is the α-quantile of the bootstrap replicates
/// (smallest order statistic whose empirical CDF reaches α). The interval
/// is [0, U]; the bound is returned unclamped.
pub fn upper_confidence_bound(eps_hat: Real, replicates: &[Real], alpha: Real) -> Result<Real> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    if replicates.is_empty() {
        return Err(Error::InvalidArgument(
            "confidence bound needs at least one replicate".into(),
        ));
    }
    let mut sorted = replicates.to_vec();
    if sorted.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "non-finite bootstrap replicate".into(),
        ));
    }
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let rank = (alpha * sorted.len() as Real).ceil().max(1.0) as usize;
    Ok(2.0 * eps_hat - sorted[rank - 1])
}

/// Sample standard deviation of bootstrap replicates (denominator B−1).
/// The caller passes replicate values only, never the plug-in estimate.
pub fn bootstrap_sigma(replicates: &[Real]) -> Result<Real> {
    let b = replicates.len();
    if b < 2 {
        return Err(Error::InvalidArgument(format!(
            "standard error needs at least 2 replicates, got {b}"
        )));
    }
    let mean = replicates.iter().sum::<Real>() / b as Real;
    let ss = replicates.iter().map(|&v| (v - mean) * (v - mean)).sum::<Real>();
    Ok((ss / (b - 1) as Real).sqrt())
}

/// Bonferroni-corrected per-test level for `tests` simultaneous tests.
pub fn bonferroni(alpha: Real, tests: usize) -> Real {
    assert!(tests > 0, "correction over an empty test family");
    alpha / tests as Real
}

/// One-sided test of H₀: ε_{ij} > ε₀ at level `alpha_c`, with samples of
/// size m and n behind ε̂. Rejecting declares dominance within tolerance.
/// Equality with the threshold rejects, so σ = 0 reduces the test to
/// ε̂ ≤ ε₀.
pub fn absolute_test(
    eps_hat: Real,
    epsilon0: Real,
    sigma: Real,
    m: usize,
    n: usize,
    alpha_c: Real,
) -> Result<bool> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidArgument("empty sample in test".into()));
    }
    if !(sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "negative standard error {sigma}"
        )));
    }
    let scale = ((m + n) as Real / (m as Real * n as Real)).sqrt();
    let threshold = epsilon0 + scale * sigma * normal_quantile(alpha_c)?;
    Ok(eps_hat <= threshold)
}

/// One-sided test of H₀: δ_{ij} ≥ 0 at level `alpha_c`. The inequality is
/// strict: a degenerate replicate distribution (σ = 0) never rejects at
/// δ̂ = 0, matching the convention that identical candidates produce no
/// wins in either direction.
pub fn relative_test(delta0: Real, sigma: Real, n: usize, alpha_c: Real) -> Result<bool> {
    if n == 0 {
        return Err(Error::InvalidArgument("empty sample in test".into()));
    }
    if !(sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "negative standard error {sigma}"
        )));
    }
    let threshold = sigma / (n as Real).sqrt() * normal_quantile(alpha_c)?;
    Ok(delta0 < threshold)
}

/// Runs the mode's pairwise test on every ordered pair and records wins.
/// Diagonal stays 0.
pub fn build_win_matrix(
    tensor: &EpsilonTensor,
    mode: TestMode,
    cfg: &TestConfig,
) -> Result<Array2<u8>> {
    let k = tensor.k();
    let b_total = tensor.replicates();
    let alpha_c = bonferroni(cfg.alpha, k * k);
    let n_eff = *tensor.sizes.iter().min().expect("nonempty tensor");
    let mut win = Array2::zeros((k, k));
    match mode {
        TestMode::Absolute => {
            let epsilon0 = cfg.epsilon0.ok_or_else(|| {
                Error::InvalidArgument("absolute mode requires epsilon0".into())
            })?;
            for i in 0..k {
                for j in 0..k {
                    if i == j {
                        continue;
                    }
                    let reps: Vec<Real> =
                        (1..=b_total).map(|b| tensor.values[[b, i, j]]).collect();
                    let sigma = bootstrap_sigma(&reps)?;
                    let reject = absolute_test(
                        tensor.values[[0, i, j]],
                        epsilon0,
                        sigma,
                        tensor.sizes[i],
                        tensor.sizes[j],
                        alpha_c,
                    )?;
                    win[[i, j]] = reject as u8;
                }
            }
        }
        TestMode::Relative => {
            let deltas = relative_deltas(tensor);
            for i in 0..k {
                for j in 0..k {
                    if i == j {
                        continue;
                    }
                    let reps: Vec<Real> =
                        (1..=b_total).map(|b| deltas[[b, i, j]]).collect();
                    let sigma = bootstrap_sigma(&reps)?;
                    let reject = relative_test(deltas[[0, i, j]], sigma, n_eff, alpha_c)?;
                    win[[i, j]] = reject as u8;
                }
            }
        }
    }
    Ok(win)
}

/// Read-only trinary view of a win matrix: +1 where i beats j, −1 where j
/// beats i, 0 where neither test rejected (or both did — the absolute tests
/// are not mutually exclusive). The binary matrix stays the ranking input.
pub fn trinary(win: &Array2<u8>) -> Array2<i8> {
    let k = win.nrows();
    Array2::from_shape_fn((k, k), |(i, j)| win[[i, j]] as i8 - win[[j, i]] as i8)
}

/// Borda aggregation of a win matrix: score_i = Σ_j win[i,j], and the
/// ranking lists label indices by descending score, ties broken by input
/// order.
pub fn borda(win: &Array2<u8>) -> (Vec<usize>, Vec<usize>) {
    let k = win.nrows();
    let scores: Vec<usize> = (0..k)
        .map(|i| (0..k).map(|j| win[[i, j]] as usize).sum())
        .collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&p, &q| scores[q].cmp(&scores[p]).then(p.cmp(&q)));
    (scores, order)
}

fn matrix_rows<T: Copy>(m: &Array2<T>) -> Vec<Vec<T>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

/// Configuration echo embedded in every report: the inputs plus the derived
/// quantities the tests actually used.
#[derive(Clone, Debug, Serialize)]
pub struct ConfigEcho {
    #[serde(flatten)]
    pub base: TestConfig,
    /// Set by the univariate-reduction baselines ("P(IC)", "P(EC)"); absent
    /// on transport-based runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    pub alpha_corrected: Real,
    pub test_count: usize,
    pub sample_sizes: Vec<usize>,
    pub n_effective: usize,
    pub unbalanced: bool,
}

/// Full output of a ranking run.
///
/// `epsilon` is the point-estimate matrix (replicate 0), `sigma_*` the
/// bootstrap standard errors, `win_*` the test outcomes, `borda` the win
/// counts in label order, `rank` the labels sorted best-first, and
/// `ties[i]` flags labels whose Borda score is shared — their relative
/// order in `rank` is input order, not evidence.
#[derive(Clone, Debug, Serialize)]
pub struct RankingReport {
    pub labels: Vec<String>,
    pub epsilon: Vec<Vec<Real>>,
    pub sigma_rel: Vec<Vec<Real>>,
    pub sigma_abs: Vec<Vec<Real>>,
    pub win_rel: Vec<Vec<u8>>,
    /// Present only when ε₀ was supplied; serialized as null otherwise.
    pub win_abs: Option<Vec<Vec<u8>>>,
    pub borda: Vec<usize>,
    pub rank: Vec<String>,
    pub ties: Vec<bool>,
    pub config: ConfigEcho,
}

impl RankingReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::parse("ranking report", e.to_string()))
    }
}

/// The whole pipeline: bootstrap tensor → standard errors → pairwise tests
/// → Borda ranking. The mode picks which win matrix feeds the ranking; the
/// other family's outputs are still reported when computable.
pub fn run_multitest(data: &LabeledSamples, cfg: &TestConfig) -> Result<RankingReport> {
    cfg.validate()?;
    let tensor = bootstrap_tensor(data, cfg)?;
    let labels: Vec<String> = data.labels().iter().map(|s| s.to_string()).collect();
    report_from_tensor(labels, &tensor, cfg, None)
}

/// Everything downstream of the tensor; shared with the univariate
/// baselines, which build their tensors differently but report identically.
pub(crate) fn report_from_tensor(
    labels: Vec<String>,
    tensor: &EpsilonTensor,
    cfg: &TestConfig,
    method: Option<String>,
) -> Result<RankingReport> {
    let k = tensor.k();
    let b_total = tensor.replicates();
    let alpha_c = bonferroni(cfg.alpha, k * k);
    let n_eff = *tensor.sizes.iter().min().expect("nonempty tensor");
    let unbalanced = tensor.sizes.iter().any(|&n| n != tensor.sizes[0]);

    let deltas = relative_deltas(tensor);
    let mut sigma_rel = Array2::<Real>::zeros((k, k));
    let mut sigma_abs = Array2::<Real>::zeros((k, k));
    for i in 0..k {
        for j in 0..k {
            if i == j {
                continue;
            }
            let rel: Vec<Real> = (1..=b_total).map(|b| deltas[[b, i, j]]).collect();
            let abs: Vec<Real> = (1..=b_total).map(|b| tensor.values[[b, i, j]]).collect();
            sigma_rel[[i, j]] = bootstrap_sigma(&rel)?;
            sigma_abs[[i, j]] = bootstrap_sigma(&abs)?;
        }
    }

    let win_rel = build_win_matrix(tensor, TestMode::Relative, cfg)?;
    let win_abs = if cfg.epsilon0.is_some() {
        Some(build_win_matrix(tensor, TestMode::Absolute, cfg)?)
    } else {
        None
    };

    let selected = match cfg.mode {
        TestMode::Relative => &win_rel,
        TestMode::Absolute => win_abs.as_ref().expect("validated above"),
    };
    let (scores, order) = borda(selected);
    let rank: Vec<String> = order.iter().map(|&i| labels[i].clone()).collect();
    let ties: Vec<bool> = (0..k)
        .map(|i| scores.iter().enumerate().any(|(j, &s)| j != i && s == scores[i]))
        .collect();

    let epsilon: Vec<Vec<Real>> = (0..k)
        .map(|i| (0..k).map(|j| tensor.values[[0, i, j]]).collect())
        .collect();
    Ok(RankingReport {
        labels,
        epsilon,
        sigma_rel: matrix_rows(&sigma_rel),
        sigma_abs: matrix_rows(&sigma_abs),
        win_rel: matrix_rows(&win_rel),
        win_abs: win_abs.as_ref().map(matrix_rows),
        borda: scores,
        rank,
        ties,
        config: ConfigEcho {
            base: cfg.clone(),
            method,
            alpha_corrected: alpha_c,
            test_count: k * k,
            sample_sizes: tensor.sizes.clone(),
            n_effective: n_eff,
            unbalanced,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::SampleMatrix;
    use crate::rng::{stream, StreamKind};
    use approx::assert_abs_diff_eq;
    use ndarray::arr2;
    use rand::Rng;

    fn base_cfg() -> TestConfig {
        TestConfig {
            alpha: 0.05,
            bootstraps: 40,
            epsilon0: None,
            lambda: 1.0,
            cost: CostSpec::logistic(1.0).unwrap(),
            seed: 7,
            mode: TestMode::Relative,
            solve: EotOptions::default(),
        }
    }

    fn gaussian_dataset(seed: u64, n: usize, d: usize, shifts: &[Real]) -> LabeledSamples {
        let entries: Vec<(String, SampleMatrix)> = shifts
            .iter()
            .enumerate()
            .map(|(idx, &s)| {
                let mut rng = stream(seed, StreamKind::Fixture, idx as u64, 0);
                let rows: Vec<Vec<Real>> = (0..n)
                    .map(|_| {
                        (0..d)
                            .map(|_| {
                                let u: Real = rng.gen_range(1e-12..1.0);
                                let v: Real = rng.gen_range(0.0..std::f64::consts::TAU);
                                (-2.0 * u.ln()).sqrt() * v.cos() + s
                            })
                            .collect()
                    })
                    .collect();
                (format!("g{idx}"), SampleMatrix::from_rows(&rows).unwrap())
            })
            .collect();
        LabeledSamples::new(entries).unwrap()
    }

    #[test]
    fn sigma_matches_hand_computed_sample_std() {
        assert_abs_diff_eq!(
            bootstrap_sigma(&[0.0, 1.0]).unwrap(),
            std::f64::consts::FRAC_1_SQRT_2,
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(
            bootstrap_sigma(&[0.1, 0.2, 0.3]).unwrap(),
            0.1,
            epsilon = 1e-12
        );
        assert_eq!(bootstrap_sigma(&[0.5, 0.5, 0.5]).unwrap(), 0.0);
        assert!(bootstrap_sigma(&[0.5]).is_err());
    }

    #[test]
    fn bonferroni_divides_by_the_family_size() {
        assert_abs_diff_eq!(bonferroni(0.05, 9), 0.05 / 9.0, epsilon = 1e-15);
        assert_abs_diff_eq!(bonferroni(0.05, 9), 0.005556, epsilon = 1e-6);
        assert_abs_diff_eq!(bonferroni(0.05, 144), 0.000347, epsilon = 1e-6);
        assert_eq!(bonferroni(0.05, 1), 0.05);
        assert!(bonferroni(0.05, 4) < 0.05);
    }

    #[test]
    fn absolute_threshold_matches_hand_computation() {
        // ε0 = 0.05, m = n = 100, σ = 0.1, α_c = 0.05:
        // threshold = 0.05 + √(200/10000) · 0.1 · Φ⁻¹(0.05) ≈ 0.026738.
        let threshold = 0.05 + (200.0f64 / 10_000.0).sqrt() * 0.1 * (-1.6448536269514722);
        assert_abs_diff_eq!(threshold, 0.026738, epsilon = 1e-6);
        assert!(absolute_test(0.02, 0.05, 0.1, 100, 100, 0.05).unwrap());
        assert!(absolute_test(threshold - 1e-12, 0.05, 0.1, 100, 100, 0.05).unwrap());
        assert!(!absolute_test(0.03, 0.05, 0.1, 100, 100, 0.05).unwrap());
        // σ = 0 degenerates to ε̂ ≤ ε0, equality included.
        assert!(absolute_test(0.05, 0.05, 0.0, 50, 50, 0.05).unwrap());
        assert!(!absolute_test(0.0500001, 0.05, 0.0, 50, 50, 0.05).unwrap());
        // The threshold never exceeds ε0, so a mid-scale estimate cannot
        // reject whatever the spread.
        for sigma in [0.0, 0.2, 0.5, 1.0] {
            assert!(!absolute_test(0.5, 0.05, sigma, 100, 100, 0.05).unwrap());
        }
    }

    #[test]
    fn relative_threshold_matches_hand_computation() {
        // σ = 0.2, n = 100, α_c = 0.005:
        // threshold = 0.02 · Φ⁻¹(0.005) ≈ −0.051517.
        let threshold = 0.2 / 10.0 * normal_quantile(0.005).unwrap();
        assert_abs_diff_eq!(threshold, -0.051517, epsilon = 1e-6);
        assert!(relative_test(-0.3, 0.2, 100, 0.005).unwrap());
        assert!(relative_test(threshold - 1e-9, 0.2, 100, 0.005).unwrap());
        assert!(!relative_test(threshold, 0.2, 100, 0.005).unwrap());
        assert!(!relative_test(0.0, 0.4, 100, 0.05).unwrap());
        // Degenerate replicates: δ̂ = 0 must not reject (strict inequality),
        // while any strictly negative δ̂ does.
        assert!(!relative_test(0.0, 0.0, 100, 0.05).unwrap());
        assert!(relative_test(-1e-9, 0.0, 100, 0.05).unwrap());
    }

    #[test]
    fn confidence_bound_uses_the_low_replicate_quantile() {
        let reps: Vec<Real> = (1..=10).map(|v| v as Real / 10.0).collect();
        // α = 0.2 over 10 replicates → 2nd order statistic 0.2.
        let u = upper_confidence_bound(0.45, &reps, 0.2).unwrap();
        assert_abs_diff_eq!(u, 2.0 * 0.45 - 0.2, epsilon = 1e-15);
        // Tiny α clamps to the smallest replicate.
        let u = upper_confidence_bound(0.45, &reps, 0.001).unwrap();
        assert_abs_diff_eq!(u, 2.0 * 0.45 - 0.1, epsilon = 1e-15);
        // Degenerate spread collapses the bound onto the estimate.
        let u = upper_confidence_bound(0.3, &[0.3; 5], 0.05).unwrap();
        assert_abs_diff_eq!(u, 0.3, epsilon = 1e-15);
        assert!(upper_confidence_bound(0.3, &[], 0.05).is_err());
        assert!(upper_confidence_bound(0.3, &[0.1], 0.0).is_err());
    }

    #[test]
    fn aggregates_average_off_diagonal_rows() {
        let mut values = Array3::zeros((2, 3, 3));
        let eps = arr2(&[[0.0, 0.2, 0.4], [0.6, 0.0, 0.8], [0.1, 0.3, 0.0]]);
        values.index_axis_mut(ndarray::Axis(0), 0).assign(&eps);
        values.index_axis_mut(ndarray::Axis(0), 1).assign(&(&eps * 2.0));
        let tensor = EpsilonTensor {
            values,
            sizes: vec![5, 5, 5],
        };
        let ova = one_vs_all(&tensor);
        assert_abs_diff_eq!(ova[[0, 0]], 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(ova[[0, 1]], 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(ova[[0, 2]], 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(ova[[1, 1]], 1.4, epsilon = 1e-12);
        let deltas = relative_deltas(&tensor);
        assert_abs_diff_eq!(deltas[[0, 0, 1]], -0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(deltas[[0, 1, 0]], 0.4, epsilon = 1e-12);
        for b in 0..2 {
            for i in 0..3 {
                for j in 0..3 {
                    assert_abs_diff_eq!(
                        deltas[[b, i, j]] + deltas[[b, j, i]],
                        0.0,
                        epsilon = 1e-15
                    );
                }
            }
        }
    }

    #[test]
    fn borda_scores_and_ordering() {
        let win = arr2(&[[0u8, 1, 1], [0, 0, 1], [0, 0, 0]]);
        let (scores, order) = borda(&win);
        assert_eq!(scores, vec![2, 1, 0]);
        assert_eq!(order, vec![0, 1, 2]);

        let tie = arr2(&[[0u8, 1, 0], [0, 0, 0], [0, 1, 0]]);
        let (scores, order) = borda(&tie);
        assert_eq!(scores, vec![1, 0, 1]);
        assert_eq!(order, vec![0, 2, 1]);

        // Tied leaders keep input order ahead of the rest.
        let leaders = arr2(&[[0u8, 0, 1], [0, 0, 1], [0, 0, 0]]);
        let (scores, order) = borda(&leaders);
        assert_eq!(scores, vec![1, 1, 0]);
        assert_eq!(order, vec![0, 1, 2]);

        let total: usize = scores.iter().sum();
        let ones: usize = leaders.iter().map(|&v| v as usize).sum();
        assert_eq!(total, ones);
    }

    #[test]
    fn trinary_view_is_the_win_difference() {
        let win = arr2(&[[0u8, 1, 1], [0, 0, 1], [0, 0, 0]]);
        let t = trinary(&win);
        assert_eq!(t[[0, 1]], 1);
        assert_eq!(t[[1, 0]], -1);
        assert_eq!(t[[2, 2]], 0);
        // Mutual absolute wins cancel in the trinary view.
        let both = arr2(&[[0u8, 1], [1, 0]]);
        let t = trinary(&both);
        assert_eq!(t[[0, 1]], 0);
        assert_eq!(t[[1, 0]], 0);
    }

    #[test]
    fn saturated_absolute_tolerance_lets_both_directions_win() {
        // ε0 = 1 puts the threshold at (or near) the ratio ceiling, so both
        // directed tests reject simultaneously — they are not exclusive.
        let mut values = Array3::zeros((9, 2, 2));
        let mut rng = stream(4, StreamKind::Fixture, 0, 0);
        for b in 0..9 {
            values[[b, 0, 1]] = 0.4 + if b == 0 { 0.0 } else { rng.gen_range(-0.05..0.05) };
            values[[b, 1, 0]] = 0.6 + if b == 0 { 0.0 } else { rng.gen_range(-0.05..0.05) };
        }
        let tensor = EpsilonTensor {
            values,
            sizes: vec![40, 40],
        };
        let mut cfg = base_cfg();
        cfg.bootstraps = 8;
        cfg.epsilon0 = Some(1.0);
        let win = build_win_matrix(&tensor, TestMode::Absolute, &cfg).unwrap();
        assert_eq!(win[[0, 1]], 1);
        assert_eq!(win[[1, 0]], 1);
        assert_eq!(trinary(&win)[[0, 1]], 0);
    }

    #[test]
    fn fabricated_tensor_wins_where_the_gap_is_decisive() {
        // Label 0 clearly beats label 1: every replicate has δ_{0,1} ≈ −0.4
        // with tiny spread, so the relative test must fire one way only.
        let mut values = Array3::zeros((21, 2, 2));
        let mut rng = stream(3, StreamKind::Fixture, 0, 0);
        for b in 0..21 {
            let jitter: Real = if b == 0 { 0.0 } else { rng.gen_range(-0.01..0.01) };
            values[[b, 0, 1]] = 0.1 + jitter;
            values[[b, 1, 0]] = 0.5 - jitter;
        }
        let tensor = EpsilonTensor {
            values,
            sizes: vec![50, 50],
        };
        let cfg = base_cfg();
        let win = build_win_matrix(&tensor, TestMode::Relative, &cfg).unwrap();
        assert_eq!(win[[0, 1]], 1);
        assert_eq!(win[[1, 0]], 0);

        let mut abs_cfg = base_cfg();
        abs_cfg.epsilon0 = Some(0.3);
        let win_abs = build_win_matrix(&tensor, TestMode::Absolute, &abs_cfg).unwrap();
        assert_eq!(win_abs[[0, 1]], 1);
        assert_eq!(win_abs[[1, 0]], 0);
    }

    #[test]
    fn tightening_alpha_never_adds_wins() {
        let data = gaussian_dataset(21, 40, 1, &[0.0, 0.35, 0.9]);
        let mut cfg = base_cfg();
        cfg.bootstraps = 30;
        let tensor = bootstrap_tensor(&data, &cfg).unwrap();
        let loose = build_win_matrix(&tensor, TestMode::Relative, &cfg).unwrap();
        let mut tight_cfg = cfg.clone();
        tight_cfg.alpha = 0.005;
        let tight = build_win_matrix(&tensor, TestMode::Relative, &tight_cfg).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!(tight[[i, j]] <= loose[[i, j]]);
            }
        }
    }

    #[test]
    fn identical_candidates_tie_with_no_wins() {
        let atom = SampleMatrix::from_rows(&[vec![0.3], vec![-0.2], vec![0.1]]).unwrap();
        let data = LabeledSamples::new(vec![
            ("a".to_string(), atom.clone()),
            ("b".to_string(), atom),
        ])
        .unwrap();
        let mut cfg = base_cfg();
        cfg.bootstraps = 10;
        let report = run_multitest(&data, &cfg).unwrap();
        assert_eq!(report.win_rel, vec![vec![0, 0], vec![0, 0]]);
        assert_eq!(report.borda, vec![0, 0]);
        assert_eq!(report.ties, vec![true, true]);
        assert_eq!(report.rank, vec!["a".to_string(), "b".to_string()]);
        assert!(report.win_abs.is_none());
        assert!(!report.config.unbalanced);
        assert_eq!(report.config.test_count, 4);
        assert_abs_diff_eq!(
            report.config.alpha_corrected,
            0.05 / 4.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn shifted_gaussians_rank_by_shift() {
        // Larger shift ⇒ better candidate against the common field, so the
        // ranking should come out g2, g1, g0.
        let data = gaussian_dataset(22, 60, 2, &[0.0, 0.5, 1.0]);
        let mut cfg = base_cfg();
        cfg.bootstraps = 40;
        let report = run_multitest(&data, &cfg).unwrap();
        assert_eq!(report.rank, vec!["g2", "g1", "g0"]);
        assert!(!report.ties.iter().any(|&t| t));
        assert_eq!(report.config.sample_sizes, vec![60, 60, 60]);
        assert_eq!(report.config.n_effective, 60);
        let total: usize = report.borda.iter().sum();
        let ones: usize = report
            .win_rel
            .iter()
            .flat_map(|row| row.iter())
            .map(|&v| v as usize)
            .sum();
        assert_eq!(total, ones);
    }

    #[test]
    fn absolute_mode_requires_a_tolerance() {
        let data = gaussian_dataset(23, 10, 1, &[0.0, 0.4]);
        let mut cfg = base_cfg();
        cfg.mode = TestMode::Absolute;
        assert!(run_multitest(&data, &cfg).is_err());
        cfg.epsilon0 = Some(0.2);
        let report = run_multitest(&data, &cfg).unwrap();
        assert!(report.win_abs.is_some());
    }

    #[test]
    fn unbalanced_sizes_are_flagged_and_use_the_minimum() {
        let big = gaussian_dataset(24, 30, 1, &[0.0]);
        let small = gaussian_dataset(25, 12, 1, &[0.6]);
        let data = LabeledSamples::new(vec![
            ("big".into(), big.get(0).1.clone()),
            ("small".into(), small.get(0).1.clone()),
        ])
        .unwrap();
        let mut cfg = base_cfg();
        cfg.bootstraps = 10;
        let report = run_multitest(&data, &cfg).unwrap();
        assert!(report.config.unbalanced);
        assert_eq!(report.config.n_effective, 12);
    }

    #[test]
    fn report_json_has_the_documented_shape() {
        let data = gaussian_dataset(26, 12, 1, &[0.0, 0.5]);
        let mut cfg = base_cfg();
        cfg.bootstraps = 8;
        let report = run_multitest(&data, &cfg).unwrap();
        let json = report.to_json().unwrap();
        // Top-level keys stream in the documented order.
        let positions: Vec<usize> = [
            "\"labels\"", "\"epsilon\"", "\"sigma_rel\"", "\"sigma_abs\"",
            "\"win_rel\"", "\"win_abs\"", "\"borda\"", "\"rank\"", "\"ties\"",
            "\"config\"",
        ]
        .iter()
        .map(|k| json.find(k).unwrap())
        .collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]), "{json}");

        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        let obj = value.as_object().unwrap();
        assert!(obj["win_abs"].is_null());
        let config = obj["config"].as_object().unwrap();
        assert_eq!(config["cost"], "logistic");
        assert_eq!(config["mode"], "relative");
        assert_eq!(config["test_count"], 4);
        assert!(config.contains_key("alpha_corrected"));
        assert!(config.contains_key("tol"));
        assert!(!config.contains_key("method"));
    }

    #[test]
    fn config_roundtrips_through_json() {
        let mut cfg = base_cfg();
        cfg.epsilon0 = Some(0.1);
        let json = serde_json::to_string(&cfg).unwrap();
        let back: TestConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back.alpha, cfg.alpha);
        assert_eq!(back.bootstraps, cfg.bootstraps);
        assert_eq!(back.epsilon0, cfg.epsilon0);
        assert_eq!(back.cost, cfg.cost);
        assert_eq!(back.mode, cfg.mode);
        assert_eq!(back.solve.tol, cfg.solve.tol);

        let partial: TestConfig =
            serde_json::from_str(r#"{"cost": "squared-hinge", "lambda": 0.0}"#).unwrap();
        assert_eq!(partial.alpha, 0.05);
        assert_eq!(partial.bootstraps, 200);
        assert_eq!(partial.mode, TestMode::Relative);
        assert_eq!(partial.lambda, 0.0);
        partial.validate().unwrap();
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = base_cfg();
        cfg.alpha = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = base_cfg();
        cfg.alpha = 1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = base_cfg();
        cfg.bootstraps = 1;
        assert!(cfg.validate().is_err());
        let mut cfg = base_cfg();
        cfg.epsilon0 = Some(1.5);
        assert!(cfg.validate().is_err());
        let mut cfg = base_cfg();
        cfg.lambda = -0.1;
        assert!(cfg.validate().is_err());
        let mut cfg = base_cfg();
        cfg.solve.tol = 0.0;
        assert!(cfg.validate().is_err());
        base_cfg().validate().unwrap();
    }

    #[test]
    fn reports_are_thread_count_invariant() {
        let data = gaussian_dataset(27, 20, 2, &[0.0, 0.6]);
        let mut cfg = base_cfg();
        cfg.bootstraps = 12;
        let pool1 = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let pool4 = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let r1 = pool1.install(|| run_multitest(&data, &cfg)).unwrap();
        let r4 = pool4.install(|| run_multitest(&data, &cfg)).unwrap();
        assert_eq!(r1.to_json().unwrap(), r4.to_json().unwrap());
    }
}
