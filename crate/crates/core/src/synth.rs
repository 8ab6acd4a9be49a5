//! Synthetic sample pairs with a tunable dominance level, plus the grid
//! harness that traces ε against that level.
//!
//! The generator draws X with i.i.d. Normal(μ, σ²) entries and sets
//! Y = X + s·U entrywise, where s = +1 with probability p (else −1) and
//! U ∼ Uniform(0,1), all draws fresh per entry. At p = 1 the pair is a
//! strict entrywise dominance instance, at p = 0 the reverse, and the
//! fraction of entries where Y exceeds X concentrates at p — which is what
//! makes the harness a calibration curve for the violation ratio.

use crate::costs::{CostKind, CostSpec};
use crate::dominance::violation_ratio;
use crate::eot::EotOptions;
use crate::error::{Error, Result};
use crate::measures::SampleMatrix;
use crate::rng::{child_seed, stream, uniform_open01, StreamKind};
use crate::testing::normal_quantile;
use crate::{Matrix, Real};
use rayon::prelude::*;
use std::fmt;

/// Parameters of one synthetic pair.
#[derive(Clone, Copy, Debug)]
pub struct SynthSpec {
    pub n: usize,
    pub d: usize,
    /// Probability that an entry of Y exceeds its entry of X.
    pub p: Real,
    pub mu: Real,
    pub sigma2: Real,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 {
            return Err(Error::InvalidArgument(format!(
                "need n ≥ 1 and d ≥ 1, got n={}, d={}",
                self.n, self.d
            )));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::InvalidArgument(format!(
                "p must lie in [0, 1], got {}",
                self.p
            )));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sigma2 must be finite and positive, got {}",
                self.sigma2
            )));
        }
        if !self.mu.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "mu must be finite, got {}",
                self.mu
            )));
        }
        Ok(())
    }
}

/// Draws the (X, Y) pair for the spec. Normal entries come from the
/// inverse-CDF transform of open-interval uniforms; the perturbation draws
/// interleave with them on a single stream, so the pair is a pure function
/// of the spec.
pub fn generate_pair(spec: &SynthSpec) -> Result<(SampleMatrix, SampleMatrix)> {
    spec.validate()?;
    let mut rng = stream(spec.seed, StreamKind::Synth, 0, 0);
    let sd = spec.sigma2.sqrt();
    let mut x = Matrix::zeros((spec.n, spec.d));
    let mut y = Matrix::zeros((spec.n, spec.d));
    for r in 0..spec.n {
        for l in 0..spec.d {
            let xv = spec.mu + sd * normal_quantile(uniform_open01(&mut rng))?;
            let sign = if uniform_open01(&mut rng) < spec.p {
                1.0
            } else {
                -1.0
            };
            let mag = uniform_open01(&mut rng);
            x[[r, l]] = xv;
            y[[r, l]] = xv + sign * mag;
        }
    }
    Ok((SampleMatrix::new(x)?, SampleMatrix::new(y)?))
}

/// One (cost, λ) combination evaluated by the harness.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSetting {
    pub cost: CostSpec,
    pub lambda: Real,
}

impl GridSetting {
    pub fn new(cost: CostSpec, lambda: Real) -> Self {
        GridSetting { cost, lambda }
    }

    /// The unregularized hinge ratio every grid run carries as its common
    /// yardstick.
    pub fn reference() -> Self {
        GridSetting {
            cost: CostSpec::hinge(),
            lambda: 0.0,
        }
    }
}

impl fmt::Display for GridSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.cost.kind {
            CostKind::Logistic => write!(
                f,
                "logistic beta={} lambda={}",
                self.cost.beta, self.lambda
            ),
            kind => write!(f, "{} lambda={}", kind, self.lambda),
        }
    }
}

/// Aggregated harness output for one (p, setting) cell.
#[derive(Clone, Debug)]
pub struct GridRow {
    pub p: Real,
    pub setting: String,
    pub mean_eps: Real,
    pub std_eps: Real,
}

/// Runs `reps` fresh pairs at every p in the grid and evaluates each
/// requested setting — the hinge λ=0 reference first, then `settings` in
/// order — on the same pairs. Each repetition's pair comes from a child
/// seed keyed by (grid position, repetition), so the table is independent
/// of scheduling. Rows group by p in grid order.
pub fn experiment_grid(
    p_grid: &[Real],
    reps: usize,
    template: &SynthSpec,
    settings: &[GridSetting],
    opts: &EotOptions,
) -> Result<Vec<GridRow>> {
    if p_grid.is_empty() {
        return Err(Error::InvalidArgument("empty p grid".into()));
    }
    if reps == 0 {
        return Err(Error::InvalidArgument("need at least one repetition".into()));
    }
    for &p in p_grid {
        SynthSpec { p, ..*template }.validate()?;
    }
    let mut all = Vec::with_capacity(settings.len() + 1);
    all.push(GridSetting::reference());
    all.extend_from_slice(settings);
    for s in &all {
        s.cost.validated()?;
        if !(s.lambda >= 0.0 && s.lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "lambda must be finite and nonnegative, got {}",
                s.lambda
            )));
        }
    }

    let tasks: Vec<(usize, usize)> = (0..p_grid.len())
        .flat_map(|pi| (0..reps).map(move |rep| (pi, rep)))
        .collect();
    let evals: Vec<Vec<Real>> = tasks
        .par_iter()
        .map(|&(pi, rep)| {
            let spec = SynthSpec {
                p: p_grid[pi],
                seed: child_seed(template.seed, pi as u64, rep as u64),
                ..*template
            };
            let (x, y) = generate_pair(&spec)?;
            all.iter()
                .map(|s| {
                    violation_ratio(&x, &y, &s.cost, s.lambda, opts).map(|r| r.epsilon)
                })
                .collect::<Result<Vec<Real>>>()
                .map_err(|e| e.in_stage(format!("p={} rep={rep}", p_grid[pi])))
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(p_grid.len() * all.len());
    for (pi, &p) in p_grid.iter().enumerate() {
        for (si, setting) in all.iter().enumerate() {
            let series: Vec<Real> = tasks
                .iter()
                .zip(&evals)
                .filter(|((ti, _), _)| *ti == pi)
                .map(|(_, eps)| eps[si])
                .collect();
            let mean = series.iter().sum::<Real>() / series.len() as Real;
            let std = if series.len() < 2 {
                0.0
            } else {
                let ss: Real = series.iter().map(|&v| (v - mean) * (v - mean)).sum();
                (ss / (series.len() - 1) as Real).sqrt()
            };
            rows.push(GridRow {
                p,
                setting: setting.to_string(),
                mean_eps: mean,
                std_eps: std,
            });
        }
    }
    Ok(rows)
}

/// Renders the grid as csv.
pub fn grid_csv(rows: &[GridRow]) -> String {
    let mut out = String::from("p,setting,mean_eps,std_eps\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.p, r.setting, r.mean_eps, r.std_eps
        ));
    }
    out
}
