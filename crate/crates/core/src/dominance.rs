//! Violation ratios: how far one sample distribution is from stochastically
//! dominating another.
//!
//! The ratio divides the transport cost under a one-sided generator `h`
//! (which only charges moves where the second sample sits above the first)
//! by the cost under its symmetrization `h̄`, giving a scale-free index in
//! [0,1]: 0 means the first argument's distribution dominates, 1 means the
//! second's does. [`violation_ratio`] evaluates it at any regularization
//! λ ≥ 0, [`univariate_ratio`] is the quantile-based 1-d shortcut, and
//! [`fsd_feasible`] decides exact empirical dominance via a 0/1 indicator
//! cost. [`lambda_sweep`] tabulates the ratio over (λ, β) grids against the
//! unregularized squared-hinge reference.

use crate::costs::{cost_matrix_with_symmetrized, CostSpec};
use crate::eot::solver::{solve_potentials, SolverOptions};
use crate::eot::{simplex, EotOptions};
use crate::error::{Error, Result};
use crate::measures::SampleMatrix;
use crate::scalar::Scalar;
use crate::Real;
use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

/// Denominators below this are treated as exactly zero.
pub const DEGENERATE_DENOMINATOR: Real = 1e-14;

/// Quantile grid size used by [`univariate_ratio`] when sample sizes differ.
pub const QUANTILE_GRID: usize = 1000;

/// Transport costs under a one-sided generator and its symmetrization, and
/// their ratio.
#[derive(Clone, Copy, Debug)]
pub struct ViolationRatio<T = Real> {
    /// OT value under the one-sided cost.
    pub numerator: T,
    /// OT value under the symmetrized cost.
    pub denominator: T,
    /// numerator/denominator clamped to [0,1]; 0 when degenerate.
    pub epsilon: T,
    /// The denominator vanished, so both costs are zero and ε is 0 by
    /// convention.
    pub degenerate: bool,
}

pub(crate) fn ratio_from_values<T: Scalar>(num: T, den: T) -> ViolationRatio<T> {
    let num = num.max(T::zero());
    let den = den.max(T::zero());
    if den < T::from_f64_c(DEGENERATE_DENOMINATOR) {
        return ViolationRatio {
            numerator: num,
            denominator: den,
            epsilon: T::zero(),
            degenerate: true,
        };
    }
    ViolationRatio {
        numerator: num,
        denominator: den,
        epsilon: (num / den).max(T::zero()).min(T::one()),
        degenerate: false,
    }
}

/// [`violation_ratio`] on raw sample views, generic over scalar width.
/// λ = 0 solves both problems exactly; λ > 0 solves them entropically with
/// uniform empirical marginals.
pub fn violation_ratio_views<T: Scalar>(
    x: &ArrayView2<T>,
    y: &ArrayView2<T>,
    spec: &CostSpec,
    lambda: T,
    opts: &EotOptions,
) -> Result<ViolationRatio<T>> {
    if !(lambda >= T::zero()) || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "lambda must be finite and nonnegative, got {lambda}"
        )));
    }
    let (c_one_sided, c_symmetric) = cost_matrix_with_symmetrized(spec, x, y)?;
    let n = x.nrows();
    let m = y.nrows();
    let a = vec![T::one() / T::from_f64_c(n as f64); n];
    let b = vec![T::one() / T::from_f64_c(m as f64); m];

    if lambda == T::zero() {
        let num = simplex::transport_simplex(&c_one_sided.values.view(), &a, &b)
            .map_err(|e| e.in_stage("one-sided transport"))?
            .value;
        let den = simplex::transport_simplex(&c_symmetric.values.view(), &a, &b)
            .map_err(|e| e.in_stage("symmetrized transport"))?
            .value;
        return Ok(ratio_from_values(num, den));
    }

    let tol = T::from_f64_c(opts.tol);
    let sopts = SolverOptions::new(tol, opts.max_iter);
    let num_sol = solve_potentials(&c_one_sided.values.view(), &a, &b, lambda, &sopts);
    if !num_sol.converged {
        return Err(Error::NonConvergence {
            iterations: num_sol.iterations,
            residual: num_sol.residual.to_f64_c(),
        }
        .in_stage("one-sided transport"));
    }
    let den_sol = solve_potentials(&c_symmetric.values.view(), &a, &b, lambda, &sopts);
    if !den_sol.converged {
        return Err(Error::NonConvergence {
            iterations: den_sol.iterations,
            residual: den_sol.residual.to_f64_c(),
        }
        .in_stage("symmetrized transport"));
    }
    Ok(ratio_from_values(num_sol.value, den_sol.value))
}

/// Violation ratio of the empirical distributions of `x` over `y`: 0 when
/// x's distribution dominates, 1 when y's does.
pub fn violation_ratio(
    x: &SampleMatrix,
    y: &SampleMatrix,
    spec: &CostSpec,
    lambda: Real,
    opts: &EotOptions,
) -> Result<ViolationRatio> {
    violation_ratio_views(&x.values().view(), &y.values().view(), spec, lambda, opts)
}

/// One-dimensional ratio via quantile functions: equal sizes compare order
/// statistics directly, unequal sizes meet on a [`QUANTILE_GRID`]-point
/// grid. Numerator charges only quantiles where y sits above x, so 0 means
/// the x side dominates, matching the multivariate convention.
pub fn univariate_ratio(x: &[Real], y: &[Real]) -> Result<Real> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::InvalidArgument(
            "univariate ratio needs nonempty samples".into(),
        ));
    }
    let mut xs = x.to_vec();
    let mut ys = y.to_vec();
    xs.sort_unstable_by(f64::total_cmp);
    ys.sort_unstable_by(f64::total_cmp);

    let (num, den) = if xs.len() == ys.len() {
        let n = xs.len() as Real;
        let mut num = 0.0;
        let mut den = 0.0;
        for (&xv, &yv) in xs.iter().zip(ys.iter()) {
            let gap = yv - xv;
            num += gap.max(0.0).powi(2);
            den += gap * gap;
        }
        (num / n, den / n)
    } else {
        let quantile = |sorted: &[Real], t: Real| -> Real {
            let n = sorted.len();
            let idx = ((t * n as Real).ceil() as usize).clamp(1, n) - 1;
            sorted[idx]
        };
        let g = QUANTILE_GRID as Real;
        let mut num = 0.0;
        let mut den = 0.0;
        for k in 0..QUANTILE_GRID {
            let t = (k as Real + 0.5) / g;
            let gap = quantile(&ys, t) - quantile(&xs, t);
            num += gap.max(0.0).powi(2);
            den += gap * gap;
        }
        (num / g, den / g)
    };
    if den < DEGENERATE_DENOMINATOR {
        return Ok(0.0);
    }
    Ok((num / den).clamp(0.0, 1.0))
}

/// Whether a coupling exists under which every x sits componentwise at or
/// above its paired y — empirical first-order dominance of `x` over `y`.
/// Decided exactly: the minimum of the 0/1 indicator cost (0 where
/// x_i ≥ y_j componentwise, 1 anywhere else, incomparable pairs included)
/// is zero iff such a coupling exists.
pub fn fsd_feasible(x: &SampleMatrix, y: &SampleMatrix) -> Result<bool> {
    if x.d() != y.d() {
        return Err(Error::DimensionMismatch {
            context: "sample dimensions".into(),
            expected: x.d(),
            got: y.d(),
        });
    }
    let n = x.n();
    let m = y.n();
    let entries = n.saturating_mul(m);
    const LIMIT: usize = 1_000_000;
    if entries > LIMIT {
        return Err(Error::SizeGuard {
            entries,
            limit: LIMIT,
        });
    }
    let d = x.d();
    let mut c = Array2::<Real>::zeros((n, m));
    for i in 0..n {
        for j in 0..m {
            let feasible = (0..d).all(|l| x.values()[[i, l]] >= y.values()[[j, l]]);
            if !feasible {
                c[[i, j]] = 1.0;
            }
        }
    }
    let a = vec![1.0 / n as Real; n];
    let b = vec![1.0 / m as Real; m];
    let out = simplex::transport_simplex(&c.view(), &a, &b)?;
    Ok(out.value < 1e-12)
}

/// One sweep evaluation: the ratio at (λ, β) next to the shared
/// unregularized squared-hinge reference.
#[derive(Clone, Copy, Debug)]
pub struct SweepRow {
    pub lambda: Real,
    pub beta: Real,
    pub epsilon: Real,
    pub epsilon_ref: Real,
}

/// Evaluates the ratio over the full (λ grid) × (β grid) product on fixed
/// samples, plus the λ=0 squared-hinge reference repeated on every row.
/// Grid points run concurrently; row order follows the input grids.
pub fn lambda_sweep(
    x: &SampleMatrix,
    y: &SampleMatrix,
    spec: &CostSpec,
    lambdas: &[Real],
    betas: &[Real],
    opts: &EotOptions,
) -> Result<Vec<SweepRow>> {
    if lambdas.is_empty() || betas.is_empty() {
        return Err(Error::InvalidArgument(
            "sweep grids must be nonempty".into(),
        ));
    }
    let reference = violation_ratio(x, y, &CostSpec::squared_hinge(), 0.0, opts)
        .map_err(|e| e.in_stage("sweep reference"))?
        .epsilon;

    let points: Vec<(Real, Real)> = lambdas
        .iter()
        .flat_map(|&l| betas.iter().map(move |&b| (l, b)))
        .collect();
    points
        .into_par_iter()
        .map(|(lambda, beta)| {
            let point_spec = spec.with_beta(beta)?;
            let ratio = violation_ratio(x, y, &point_spec, lambda, opts)
                .map_err(|e| e.in_stage(format!("sweep point lambda={lambda} beta={beta}")))?;
            Ok(SweepRow {
                lambda,
                beta,
                epsilon: ratio.epsilon,
                epsilon_ref: reference,
            })
        })
        .collect()
}

/// Renders sweep rows as csv with the stable `lambda,beta,epsilon,epsilon_ref`
/// header.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("lambda,beta,epsilon,epsilon_ref\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.lambda, r.beta, r.epsilon, r.epsilon_ref
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::SampleMatrix;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn samples(rows: &[Vec<Real>]) -> SampleMatrix {
        SampleMatrix::from_rows(rows).unwrap()
    }

    fn opts() -> EotOptions {
        EotOptions::default()
    }

    /// Standard normal draws via Box-Muller on the fixture stream.
    fn normal_rows(seed: u64, n: usize, d: usize, shift: Real) -> SampleMatrix {
        let mut rng = crate::rng::stream(seed, crate::rng::StreamKind::Fixture, 0, 0);
        let rows: Vec<Vec<Real>> = (0..n)
            .map(|_| {
                (0..d)
                    .map(|_| {
                        let u1: f64 = crate::rng::uniform_open01(&mut rng);
                        let u2: f64 = crate::rng::uniform_open01(&mut rng);
                        shift
                            + (-2.0 * u1.ln()).sqrt()
                                * (2.0 * std::f64::consts::PI * u2).cos()
                    })
                    .collect()
            })
            .collect();
        samples(&rows)
    }

    #[test]
    fn single_atoms_hit_the_extremes() {
        let below = samples(&[vec![0.0, 0.0]]);
        let above = samples(&[vec![1.0, 1.0]]);
        let spec = CostSpec::squared_hinge();

        let r = violation_ratio(&below, &above, &spec, 0.0, &opts()).unwrap();
        assert_abs_diff_eq!(r.numerator, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.denominator, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.epsilon, 1.0, epsilon = 1e-12);
        assert!(!r.degenerate);

        let r = violation_ratio(&above, &below, &spec, 0.0, &opts()).unwrap();
        assert_abs_diff_eq!(r.epsilon, 0.0, epsilon = 1e-12);
        assert!(!r.degenerate);
    }

    #[test]
    fn identical_atom_under_symmetric_generator_splits_evenly() {
        // h(0) = log 2 and h̄(0) = 2·log 2 regardless of λ: the unique
        // coupling of two point masses fixes both transports.
        let atom = samples(&[vec![0.3]]);
        let spec = CostSpec::logistic(1.0).unwrap();
        for lambda in [0.7, 2.0] {
            let r = violation_ratio(&atom, &atom, &spec, lambda, &opts()).unwrap();
            assert_abs_diff_eq!(r.epsilon, 0.5, epsilon = 1e-9);
        }
    }

    #[test]
    fn staggered_two_atom_instance_is_maximal_violation() {
        let x = samples(&[vec![0.0], vec![2.0]]);
        let y = samples(&[vec![1.0], vec![3.0]]);
        let r = violation_ratio(&x, &y, &CostSpec::squared_hinge(), 0.0, &opts()).unwrap();
        assert_abs_diff_eq!(r.numerator, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.denominator, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.epsilon, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_denominator_returns_zero() {
        // Identical samples under the squared hinge: every coupling of the
        // diagonal costs zero both ways.
        let x = samples(&[vec![0.5], vec![1.5]]);
        let r = violation_ratio(&x, &x, &CostSpec::squared_hinge(), 0.0, &opts()).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.epsilon, 0.0);
    }

    #[test]
    fn univariate_examples() {
        assert_abs_diff_eq!(
            univariate_ratio(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(),
            0.0
        );
        assert_abs_diff_eq!(univariate_ratio(&[0.0, 2.0], &[1.0, 3.0]).unwrap(), 1.0);
        assert_abs_diff_eq!(univariate_ratio(&[1.0, 3.0], &[0.0, 2.0]).unwrap(), 0.0);
        assert!(univariate_ratio(&[], &[1.0]).is_err());
    }

    #[test]
    fn univariate_grid_path_matches_equal_size_shortcut() {
        // Same empirical distributions presented at different sizes: each
        // atom of the coarse sample duplicated once. Quantile functions are
        // identical, so both evaluation paths must agree.
        let x2 = vec![0.0, 2.0];
        let x4 = vec![0.0, 0.0, 2.0, 2.0];
        let y2 = vec![1.0, 3.0];
        let y4 = vec![1.0, 1.0, 3.0, 3.0];
        let direct = univariate_ratio(&x2, &y2).unwrap();
        let grid = univariate_ratio(&x4, &y2).unwrap();
        assert_abs_diff_eq!(direct, grid, epsilon = 1e-12);
        let grid = univariate_ratio(&x2, &y4).unwrap();
        assert_abs_diff_eq!(direct, grid, epsilon = 1e-12);
    }

    #[test]
    fn multivariate_and_univariate_agree_on_shared_convention() {
        // Equal-size 1-d samples: the exact squared-hinge ratio equals the
        // order-statistics formula (co-monotone coupling is optimal for
        // convex one-dimensional costs).
        let mut rng = crate::rng::stream(21, crate::rng::StreamKind::Fixture, 0, 0);
        for _ in 0..10 {
            let xs: Vec<Real> = (0..8).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let ys: Vec<Real> = (0..8).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let x = samples(&xs.iter().map(|&v| vec![v]).collect::<Vec<_>>());
            let y = samples(&ys.iter().map(|&v| vec![v]).collect::<Vec<_>>());
            let multi = violation_ratio(&x, &y, &CostSpec::squared_hinge(), 0.0, &opts())
                .unwrap()
                .epsilon;
            let uni = univariate_ratio(&xs, &ys).unwrap();
            assert_abs_diff_eq!(multi, uni, epsilon = 1e-9);
        }
    }

    #[test]
    fn one_dimensional_numerators_complement_to_the_denominator() {
        // (y−x)₊² + (x−y)₊² = (x−y)² pointwise, and all three transports are
        // solved by the co-monotone coupling in 1-d.
        let mut rng = crate::rng::stream(22, crate::rng::StreamKind::Fixture, 0, 0);
        for _ in 0..10 {
            let xs: Vec<Real> = (0..7).map(|_| rng.gen_range(-1.0..3.0)).collect();
            let ys: Vec<Real> = (0..7).map(|_| rng.gen_range(-1.0..3.0)).collect();
            let x = samples(&xs.iter().map(|&v| vec![v]).collect::<Vec<_>>());
            let y = samples(&ys.iter().map(|&v| vec![v]).collect::<Vec<_>>());
            let spec = CostSpec::squared_hinge();
            let fwd = violation_ratio(&x, &y, &spec, 0.0, &opts()).unwrap();
            let bwd = violation_ratio(&y, &x, &spec, 0.0, &opts()).unwrap();
            assert_abs_diff_eq!(
                fwd.numerator + bwd.numerator,
                fwd.denominator,
                epsilon = 1e-9
            );
            assert_abs_diff_eq!(fwd.denominator, bwd.denominator, epsilon = 1e-9);
        }
    }

    #[test]
    fn shifting_the_second_sample_up_raises_epsilon() {
        let mut rng = crate::rng::stream(23, crate::rng::StreamKind::Fixture, 0, 0);
        for d in [1usize, 2] {
            for _ in 0..6 {
                let rows_x: Vec<Vec<Real>> = (0..9)
                    .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
                    .collect();
                let rows_y: Vec<Vec<Real>> = (0..9)
                    .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
                    .collect();
                let x = samples(&rows_x);
                let y = samples(&rows_y);
                let shifted: Vec<Vec<Real>> = rows_y
                    .iter()
                    .map(|r| r.iter().map(|v| v + 0.6).collect())
                    .collect();
                let y_up = samples(&shifted);
                let spec = CostSpec::squared_hinge();
                let base = violation_ratio(&x, &y, &spec, 0.0, &opts()).unwrap().epsilon;
                let up = violation_ratio(&x, &y_up, &spec, 0.0, &opts()).unwrap().epsilon;
                assert!(up >= base - 1e-9, "d={d}: {up} < {base}");
            }
        }
    }

    #[test]
    fn epsilon_is_invariant_under_row_permutation() {
        let mut rng = crate::rng::stream(24, crate::rng::StreamKind::Fixture, 0, 0);
        let rows: Vec<Vec<Real>> = (0..8)
            .map(|_| (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let rows_y: Vec<Vec<Real>> = (0..8)
            .map(|_| (0..2).map(|_| rng.gen_range(-0.5..1.5)).collect())
            .collect();
        let mut shuffled = rows.clone();
        shuffled.reverse();
        shuffled.swap(1, 5);
        let x = samples(&rows);
        let xp = samples(&shuffled);
        let y = samples(&rows_y);
        for (spec, lambda) in [
            (CostSpec::squared_hinge(), 0.0),
            (CostSpec::logistic(2.0).unwrap(), 0.5),
        ] {
            let base = violation_ratio(&x, &y, &spec, lambda, &opts()).unwrap().epsilon;
            let perm = violation_ratio(&xp, &y, &spec, lambda, &opts()).unwrap().epsilon;
            assert_abs_diff_eq!(base, perm, epsilon = 1e-10);
        }
    }

    #[test]
    fn entropic_ratio_approaches_the_exact_ratio_as_lambda_shrinks() {
        let scale = |m: SampleMatrix, shift: Real| {
            SampleMatrix::new(m.into_values().mapv(|v| 0.35 * v + shift)).unwrap()
        };
        let x = scale(normal_rows(25, 20, 3, 0.0), 0.0);
        let y = scale(normal_rows(26, 20, 3, 0.0), 0.15);
        let spec = CostSpec::squared_hinge();
        let exact = violation_ratio(&x, &y, &spec, 0.0, &opts()).unwrap().epsilon;
        let loose = EotOptions { tol: 5e-7, max_iter: 400_000 };
        // The gap need not shrink monotonically: the smoothed ratio crosses
        // the exact value partway down the ladder. What convergence promises
        // is that the finest rung lands closest.
        let gaps: Vec<Real> = [1.0, 0.3, 0.1, 0.03, 0.01]
            .iter()
            .map(|&lambda| {
                let eps = violation_ratio(&x, &y, &spec, lambda, &loose).unwrap().epsilon;
                (eps - exact).abs()
            })
            .collect();
        for (i, gap) in gaps.iter().enumerate() {
            assert!(*gap <= 0.1, "rung {i}: gap {gap}");
        }
        let last = *gaps.last().unwrap();
        assert!(gaps.iter().all(|g| last <= *g), "terminal rung is not the closest: {gaps:?}");
        assert!(last <= 0.012, "terminal gap {last}");
    }

    #[test]
    fn fsd_examples() {
        let low = samples(&[vec![0.0, 0.0]]);
        let high = samples(&[vec![1.0, 1.0]]);
        assert!(fsd_feasible(&high, &low).unwrap());
        assert!(!fsd_feasible(&low, &high).unwrap());

        let x = samples(&[vec![0.0, 0.0], vec![2.0, 2.0]]);
        let y = samples(&[vec![1.0, 1.0], vec![3.0, 3.0]]);
        assert!(!fsd_feasible(&x, &y).unwrap());

        // Incomparable pairs are infeasible, not free: here every pairing
        // crosses coordinates, so no dominating coupling exists in either
        // direction.
        let left = samples(&[vec![1.0, 0.0]]);
        let right = samples(&[vec![0.0, 1.0]]);
        assert!(!fsd_feasible(&left, &right).unwrap());
        assert!(!fsd_feasible(&right, &left).unwrap());
    }

    #[test]
    fn fsd_guard_trips_on_oversized_inputs() {
        let wide = SampleMatrix::new(Array2::zeros((1001, 1))).unwrap();
        let tall = SampleMatrix::new(Array2::zeros((1001, 1))).unwrap();
        match fsd_feasible(&wide, &tall) {
            Err(Error::SizeGuard { entries, .. }) => assert_eq!(entries, 1_002_001),
            other => panic!("expected size guard, got {other:?}"),
        }
    }

    #[test]
    fn sweep_single_point_matches_direct_evaluation() {
        let x = normal_rows(27, 12, 2, 0.0);
        let y = normal_rows(28, 12, 2, 0.3);
        let spec = CostSpec::logistic(1.0).unwrap();
        let rows = lambda_sweep(&x, &y, &spec, &[0.5], &[1.0], &opts()).unwrap();
        assert_eq!(rows.len(), 1);
        let direct = violation_ratio(&x, &y, &spec, 0.5, &opts()).unwrap().epsilon;
        assert_abs_diff_eq!(rows[0].epsilon, direct, epsilon = 1e-12);
        let reference = violation_ratio(&x, &y, &CostSpec::squared_hinge(), 0.0, &opts())
            .unwrap()
            .epsilon;
        assert_abs_diff_eq!(rows[0].epsilon_ref, reference, epsilon = 1e-12);
    }

    #[test]
    fn sweep_covers_the_grid_in_input_order() {
        let x = normal_rows(29, 10, 2, 0.0);
        let y = normal_rows(30, 10, 2, 0.3);
        let spec = CostSpec::logistic(1.0).unwrap();
        let loose = EotOptions { tol: 1e-6, max_iter: 200_000 };
        let rows = lambda_sweep(&x, &y, &spec, &[1.0, 0.3], &[1.0, 5.0], &loose).unwrap();
        let got: Vec<(Real, Real)> = rows.iter().map(|r| (r.lambda, r.beta)).collect();
        assert_eq!(got, vec![(1.0, 1.0), (1.0, 5.0), (0.3, 1.0), (0.3, 5.0)]);
        assert!(lambda_sweep(&x, &y, &spec, &[], &[1.0], &loose).is_err());

        let csv = sweep_csv(&rows);
        assert!(csv.starts_with("lambda,beta,epsilon,epsilon_ref\n"));
        assert_eq!(csv.lines().count(), 5);
    }

    /// Large-sample violation ratio of a d=2 standard normal against its
    /// +0.5 shift (logistic β=1, λ=1), frozen as `COVERAGE_TRUTH` in the
    /// acceptance suite's interval-coverage study. Two 20000² cost matrices
    /// plus kernels don't fit in memory in f64, so this runs the scaled
    /// kernel path in f32, holding one matrix at a time.
    #[test]
    #[ignore = "oracle regeneration: ~3GB peak memory, minutes of runtime"]
    fn regenerate_large_sample_coverage_truth() {
        use crate::costs::cost_matrix;
        use crate::eot::solver::{solve_value_kernel, GibbsKernel};
        use crate::testing::normal_quantile;

        fn draws(seed: u64, a: u64, n: usize, shift: f64) -> Array2<f32> {
            let mut rng = crate::rng::stream(seed, crate::rng::StreamKind::Fixture, a, 0);
            let mut m = Array2::<f32>::zeros((n, 2));
            for i in 0..n {
                for j in 0..2 {
                    let u = crate::rng::uniform_open01(&mut rng);
                    m[[i, j]] = (normal_quantile(u).unwrap() + shift) as f32;
                }
            }
            m
        }

        fn entropic_value(spec: &CostSpec, x: &Array2<f32>, y: &Array2<f32>) -> f64 {
            let cost = cost_matrix(spec, &x.view(), &y.view()).unwrap();
            let kern =
                GibbsKernel::build(&cost.values.view(), 1.0).expect("range fits the scaled path");
            drop(cost);
            let a = vec![1.0f32 / x.nrows() as f32; x.nrows()];
            let b = vec![1.0f32 / y.nrows() as f32; y.nrows()];
            let sol =
                solve_value_kernel(&kern, &a, &b, 1e-4, 2_000).expect("scaled path stays finite");
            assert!(
                sol.converged,
                "residual {} after {} iterations",
                sol.residual, sol.iterations
            );
            sol.value as f64
        }

        let n = 20_000;
        let x = draws(20_000, 0, n, 0.0);
        let y = draws(20_000, 1, n, 0.5);
        let spec = CostSpec::logistic(1.0).unwrap();

        // The f32 kernel path must agree with the standard f64 pipeline on a
        // subsample small enough that both run; disagreement would mean the
        // lean path computes a different functional, not a noisier one.
        {
            use ndarray::s;
            let xs = x.slice(s![..2000, ..]).to_owned();
            let ys = y.slice(s![..2000, ..]).to_owned();
            let lean =
                entropic_value(&spec, &xs, &ys) / entropic_value(&spec.with_symmetrized(true), &xs, &ys);
            let xm = SampleMatrix::new(xs.mapv(|v| v as Real)).unwrap();
            let ym = SampleMatrix::new(ys.mapv(|v| v as Real)).unwrap();
            let reference = violation_ratio(&xm, &ym, &spec, 1.0, &opts()).unwrap().epsilon;
            assert_abs_diff_eq!(lean, reference, epsilon = 1e-3);
        }

        let num = entropic_value(&spec, &x, &y);
        let den = entropic_value(&spec.with_symmetrized(true), &x, &y);
        let eps = num / den;
        println!("large-sample ratio: num={num:.6} den={den:.6} eps={eps:.6}");
        assert_abs_diff_eq!(eps, 0.649684, epsilon = 5e-4);
    }
}
