//! Monte Carlo Fisher information of the sensor record.
//!
//! Two unbiased estimators are computed from the same trajectories:
//!
//! * the squared score, `[(ln P(phi + d) - ln P(phi - d)) / 2d]^2`, averaged
//!   over records;
//! * the accumulated conditional information `sum_n (d p_+/d phi)^2 / (p_+ p_-)`
//!   of each record. Score increments are martingale differences, so its
//!   expectation is the same Fisher information, with far smaller variance.
//!
//! Both are reported in detuning units (multiplied by `tau_m^2`).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::protocol::{run_trajectory_with, ProtocolParams, TrajectoryOptions};

/// Which per-record statistic to average.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Estimator {
    /// Squared finite-difference score of the record log-likelihood.
    #[default]
    Score,
    /// Accumulated per-step conditional information.
    Conditional,
}

impl std::fmt::Display for Estimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(match self {
            Estimator::Score => "score",
            Estimator::Conditional => "conditional",
        })
    }
}

impl std::str::FromStr for Estimator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "score" => Ok(Estimator::Score),
            "conditional" => Ok(Estimator::Conditional),
            other => Err(Error::param("estimator", format!("unknown estimator `{other}`"))),
        }
    }
}

/// Ensemble estimate of the Fisher information at each checkpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct FisherEstimate {
    pub checkpoints: Vec<u64>,
    /// Squared-score estimate (s^2).
    pub mean_fi: Vec<f64>,
    pub std_error: Vec<f64>,
    /// Conditional-information estimate (s^2).
    pub conditional_fi: Vec<f64>,
    pub conditional_std_error: Vec<f64>,
    /// Runs that completed.
    pub runs: usize,
    /// Runs aborted by probability underflow.
    pub aborted: usize,
    pub d_phi_used: f64,
}

impl FisherEstimate {
    /// `(mean, standard error)` per checkpoint for the chosen estimator.
    pub fn series(&self, estimator: Estimator) -> (&[f64], &[f64]) {
        match estimator {
            Estimator::Score => (&self.mean_fi, &self.std_error),
            Estimator::Conditional => (&self.conditional_fi, &self.conditional_std_error),
        }
    }

    /// Estimate at the checkpoint equal to `n`, if recorded.
    pub fn at(&self, n: u64, estimator: Estimator) -> Option<(f64, f64)> {
        let i = self.checkpoints.iter().position(|&c| c == n)?;
        let (m, s) = self.series(estimator);
        Some((m[i], s[i]))
    }
}

/// Execution knobs for ensemble estimates.
#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
}

/// Runs `f` on a pool with the requested thread count.
pub(crate) fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(Error::param("threads", "must be positive")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::param("threads", e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// Mean and standard error of per-run samples, column-wise.
fn mean_and_se(samples: &[Vec<f64>], cols: usize) -> (Vec<f64>, Vec<f64>) {
    let n = samples.len() as f64;
    let mut mean = vec![0.0; cols];
    for s in samples {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; cols];
    for s in samples {
        for ((acc, v), m) in var.iter_mut().zip(s).zip(&mean) {
            *acc += (v - m).powi(2);
        }
    }
    let se = var
        .iter()
        .map(|v| (v / (n - 1.0)).sqrt() / n.sqrt())
        .collect();
    (mean, se)
}

/// Estimates the Fisher information from `runs` trajectories with seeds
/// `base_seed + i`.
pub fn estimate_fisher(params: &ProtocolParams, runs: usize, base_seed: u64) -> Result<FisherEstimate> {
    estimate_fisher_with(params, runs, base_seed, &RunOptions::default())
}

pub fn estimate_fisher_with(
    params: &ProtocolParams,
    runs: usize,
    base_seed: u64,
    options: &RunOptions,
) -> Result<FisherEstimate> {
    if runs < 2 {
        return Err(Error::param("runs", "at least 2 runs are required"));
    }
    params.validate()?;
    let traj = TrajectoryOptions {
        siblings: true,
        keep_outcomes: false,
        keep_probabilities: false,
    };
    let tau2 = params.tau_m * params.tau_m;
    let results: Vec<Result<(Vec<f64>, Vec<f64>)>> = with_pool(options.threads, || {
        (0..runs)
            .into_par_iter()
            .map(|i| {
                let rec = run_trajectory_with(params, base_seed.wrapping_add(i as u64), &traj, None)?;
                let sq = rec.scores().iter().map(|s| s * s * tau2).collect();
                let cond = rec.conditional_fisher.iter().map(|c| c * tau2).collect();
                Ok((sq, cond))
            })
            .collect()
    })?;
    let mut squares = Vec::with_capacity(runs);
    let mut conds = Vec::with_capacity(runs);
    let mut aborted = 0;
    for r in results {
        match r {
            Ok((s, c)) => {
                squares.push(s);
                conds.push(c);
            }
            Err(Error::Underflow { .. }) => aborted += 1,
            Err(e) => return Err(e),
        }
    }
    if squares.len() < 2 {
        return Err(Error::TooFewRuns {
            surviving: squares.len(),
            requested: runs,
        });
    }
    let checkpoints =
        crate::protocol::checkpoint_schedule(params.n_max, params.checkpoints_per_octave);
    let (mean_fi, std_error) = mean_and_se(&squares, checkpoints.len());
    let (conditional_fi, conditional_std_error) = mean_and_se(&conds, checkpoints.len());
    Ok(FisherEstimate {
        checkpoints,
        mean_fi,
        std_error,
        conditional_fi,
        conditional_std_error,
        runs: squares.len(),
        aborted,
        d_phi_used: params.d_phi(),
    })
}

/// Outcome of a `d_phi` halving check.
#[derive(Clone, Debug, PartialEq)]
pub struct StepConvergence {
    pub coarse: FisherEstimate,
    pub fine: FisherEstimate,
    /// `|fine - coarse| / coarse` at the last checkpoint, per estimator.
    pub relative_change: f64,
    pub relative_change_conditional: f64,
}

/// Re-estimates with half the finite-difference step on the same seeds. The
/// records are identical, so the change isolates the discretization bias.
pub fn d_phi_convergence(
    params: &ProtocolParams,
    runs: usize,
    base_seed: u64,
    options: &RunOptions,
) -> Result<StepConvergence> {
    let coarse = estimate_fisher_with(params, runs, base_seed, options)?;
    let mut half = params.clone();
    half.d_phi = Some(params.d_phi() / 2.0);
    let fine = estimate_fisher_with(&half, runs, base_seed, options)?;
    let rel = |a: &[f64], b: &[f64]| {
        let (x, y) = (a[a.len() - 1], b[b.len() - 1]);
        ((y - x) / x).abs()
    };
    Ok(StepConvergence {
        relative_change: rel(&coarse.mean_fi, &fine.mean_fi),
        relative_change_conditional: rel(&coarse.conditional_fi, &fine.conditional_fi),
        coarse,
        fine,
    })
}

/// Power-law fit `y = c x^k` on log-log axes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingFit {
    pub exponent: f64,
    /// Half-width of the 95% bootstrap interval on the exponent.
    pub ci: f64,
    pub prefactor: f64,
    pub points: usize,
}

fn ols_slope(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let k = sxy / sxx;
    (k, my - k * mx)
}

const BOOTSTRAP_SAMPLES: usize = 2000;
const BOOTSTRAP_SEED: u64 = 0x5eed_f15e;

/// Least-squares exponent of `ys` against `xs` on log-log axes. The interval
/// comes from a parametric bootstrap that redraws each point from a normal
/// with its standard error (`ses`, may be all zero).
pub fn fit_power_law(xs: &[f64], ys: &[f64], ses: &[f64]) -> Result<ScalingFit> {
    if xs.len() != ys.len() || xs.len() != ses.len() {
        return Err(Error::param("fit", "length mismatch"));
    }
    if xs.len() < 2 {
        return Err(Error::param("fit", "at least two points are required"));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::param("fit", "log-log fit needs positive finite values"));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    if lx.iter().all(|x| (x - lx[0]).abs() < 1e-15) {
        return Err(Error::param("fit", "abscissae are degenerate"));
    }
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let (k, b) = ols_slope(&lx, &ly);
    let mut rng = ChaCha8Rng::seed_from_u64(BOOTSTRAP_SEED);
    let mut slopes = Vec::with_capacity(BOOTSTRAP_SAMPLES);
    if ses.iter().any(|s| *s > 0.0) {
        for _ in 0..BOOTSTRAP_SAMPLES {
            let ry: Option<Vec<f64>> = ys
                .iter()
                .zip(ses)
                .map(|(y, s)| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    let v = y + s * z;
                    (v > 0.0).then(|| v.ln())
                })
                .collect();
            if let Some(ry) = ry {
                slopes.push(ols_slope(&lx, &ry).0);
            }
        }
    }
    let ci = if slopes.len() > 20 {
        slopes.sort_by(f64::total_cmp);
        let q = |p: f64| slopes[((slopes.len() - 1) as f64 * p).round() as usize];
        (q(0.975) - q(0.025)) / 2.0
    } else {
        0.0
    };
    Ok(ScalingFit {
        exponent: k,
        ci,
        prefactor: b.exp(),
        points: xs.len(),
    })
}

/// Exponent of the squared-score estimate against `N` over checkpoints in
/// `[lo, hi]`. At least five checkpoints must fall in the window.
pub fn fit_scaling_exponent(estimate: &FisherEstimate, window: (u64, u64)) -> Result<ScalingFit> {
    fit_scaling_exponent_by(estimate, window, Estimator::Score)
}

pub fn fit_scaling_exponent_by(
    estimate: &FisherEstimate,
    window: (u64, u64),
    estimator: Estimator,
) -> Result<ScalingFit> {
    let (lo, hi) = window;
    if lo >= hi {
        return Err(Error::param("window", "lower bound must be below upper bound"));
    }
    let (mean, se) = estimate.series(estimator);
    let idx: Vec<usize> = (0..estimate.checkpoints.len())
        .filter(|&i| (lo..=hi).contains(&estimate.checkpoints[i]))
        .collect();
    if idx.len() < 5 {
        return Err(Error::param(
            "window",
            format!("only {} checkpoints in [{lo}, {hi}]; need 5", idx.len()),
        ));
    }
    let xs: Vec<f64> = idx.iter().map(|&i| estimate.checkpoints[i] as f64).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| mean[i]).collect();
    let ss: Vec<f64> = idx.iter().map(|&i| se[i]).collect();
    fit_power_law(&xs, &ys, &ss)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_laws() {
        let xs: Vec<f64> = (0..8).map(|i| 2f64.powi(i)).collect();
        for k in [1.0, 2.0, 3.0] {
            let ys: Vec<f64> = xs.iter().map(|x| 0.3 * x.powf(k)).collect();
            let fit = fit_power_law(&xs, &ys, &vec![0.0; xs.len()]).unwrap();
            assert!((fit.exponent - k).abs() < 1e-9);
            assert!((fit.prefactor - 0.3).abs() < 1e-9);
            assert_eq!(fit.ci, 0.0);
        }
    }

    #[test]
    fn degenerate_inputs_rejected() {
        assert!(fit_power_law(&[1.0, 1.0], &[1.0, 2.0], &[0.0, 0.0]).is_err());
        assert!(fit_power_law(&[1.0, 2.0], &[1.0, -2.0], &[0.0, 0.0]).is_err());
        assert!(fit_power_law(&[1.0], &[1.0], &[0.0]).is_err());
    }

    #[test]
    fn too_few_runs_rejected() {
        let p = ProtocolParams::new(2, 0.01, 0.5, 4);
        assert!(estimate_fisher(&p, 1, 0).is_err());
    }
}
