//! Brute-force references built on the full `2^M` space, and the cross-check
//! suite run by `hybridsense validate`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::entanglement::{schmidt_coefficients, Bipartition};
use crate::error::{Error, Result};
use crate::fisher::{estimate_fisher_with, RunOptions};
use crate::protocol::{
    entangling_kraus_with_angle, run_trajectory_with, Backend, DephasingModel, ProtocolParams,
    StateSnapshot, TrajectoryOptions,
};
use crate::states::{dicke_to_full, FullState, MAX_FULL_SPINS};

/// Outcomes and pre-measurement `p_+` of a full-space trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct FullTrajectory {
    pub outcomes: Vec<bool>,
    pub probabilities: Vec<f64>,
}

fn check_params(params: &ProtocolParams) -> Result<()> {
    params.validate()?;
    if params.m > MAX_FULL_SPINS {
        return Err(Error::param("M", format!("full-space reference needs M <= {MAX_FULL_SPINS}")));
    }
    if params.ensemble.as_ref().is_some_and(|e| !e.is_homogeneous()) {
        return Err(Error::param("ensemble", "full-space reference needs equal couplings"));
    }
    if params.gamma2 > 0.0 && params.dephasing == DephasingModel::CollectiveKick {
        return Err(Error::param("dephasing", "full-space reference models local dephasing only"));
    }
    Ok(())
}

fn initial_full(params: &ProtocolParams) -> Result<FullState> {
    let spec = params.ensemble_spec();
    let g = &spec.groups[0];
    let mut state = FullState::product(params.m, g.initial_bloch)?;
    // The axis phase enters as a rotation of the initial state.
    state.free_evolve(-g.phi0);
    Ok(state)
}

/// One step: precession, dephasing, then the unnormalized branch.
fn step(state: &FullState, params: &ProtocolParams, phi: f64, beta: f64, plus: bool) -> Result<FullState> {
    let mut s = state.clone();
    s.free_evolve(phi);
    s.dephase(params.gamma2)?;
    Ok(s.apply_kraus(beta, params.alpha, plus))
}

/// Simulates `params` in the full tensor-product space, consuming the random
/// stream exactly like [`crate::protocol::run_trajectory`].
pub fn full_space_trajectory(params: &ProtocolParams, seed: u64) -> Result<FullTrajectory> {
    check_params(params)?;
    let beta = params.ensemble_spec().groups[0].beta;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = initial_full(params)?;
    let mut out = FullTrajectory {
        outcomes: Vec::with_capacity(params.n_max as usize),
        probabilities: Vec::with_capacity(params.n_max as usize),
    };
    for _ in 0..params.n_max {
        let mut s = state.clone();
        s.free_evolve(params.phi);
        s.dephase(params.gamma2)?;
        let p_plus = s.outcome_probability(beta, params.alpha, true);
        let u: f64 = rng.random();
        let plus = u < p_plus;
        let mut next = s.apply_kraus(beta, params.alpha, plus);
        let w = next.norm_weight();
        next.scale(w);
        state = next;
        out.outcomes.push(plus);
        out.probabilities.push(p_plus);
    }
    Ok(out)
}

/// Visits every record of length `n_max` and calls `leaf` with the record
/// probability at `phi`, `phi + h` and `phi - h`.
fn enumerate_records(params: &ProtocolParams, h: f64, leaf: &mut dyn FnMut([f64; 3])) -> Result<()> {
    check_params(params)?;
    if params.n_max > 20 {
        return Err(Error::param("N_max", "exhaustive enumeration needs N_max <= 20"));
    }
    let beta = params.ensemble_spec().groups[0].beta;
    let phis = [params.phi, params.phi + h, params.phi - h];
    let init = initial_full(params)?;
    let roots = [init.clone(), init.clone(), init];

    fn walk(
        states: &[FullState; 3],
        depth: u64,
        params: &ProtocolParams,
        phis: &[f64; 3],
        beta: f64,
        leaf: &mut dyn FnMut([f64; 3]),
    ) -> Result<()> {
        if depth == params.n_max {
            leaf([states[0].norm_weight(), states[1].norm_weight(), states[2].norm_weight()]);
            return Ok(());
        }
        for plus in [true, false] {
            let next = [
                step(&states[0], params, phis[0], beta, plus)?,
                step(&states[1], params, phis[1], beta, plus)?,
                step(&states[2], params, phis[2], beta, plus)?,
            ];
            walk(&next, depth + 1, params, phis, beta, leaf)?;
        }
        Ok(())
    }
    walk(&roots, 0, params, &phis, beta, leaf)
}

/// Total probability of all `2^N` records; 1 up to rounding.
pub fn record_probability_sum(params: &ProtocolParams) -> Result<f64> {
    let mut total = 0.0;
    enumerate_records(params, 0.0, &mut |p| total += p[0])?;
    Ok(total)
}

/// Exact Fisher information of the record after `n_max` steps,
/// `sum_X (d p_X / d phi)^2 / p_X`, times `tau_m^2`.
pub fn exhaustive_fisher(params: &ProtocolParams) -> Result<f64> {
    let h = 1e-5 * params.phi.abs().max(1.0);
    let mut total = 0.0;
    enumerate_records(params, h, &mut |p| {
        if p[0] > 0.0 {
            let d = (p[1] - p[2]) / (2.0 * h);
            total += d * d / p[0];
        }
    })?;
    Ok(total * params.tau_m * params.tau_m)
}

/// One line of the cross-check report.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: String) -> CheckResult {
    CheckResult {
        name: name.to_string(),
        passed,
        detail,
    }
}

/// Largest deviation between the symmetric engine and the full-space
/// reference over `seeds`, or `None` when some outcome bit differs.
pub fn compare_with_full(params: &ProtocolParams, seeds: std::ops::Range<u64>) -> Result<Option<f64>> {
    let opts = TrajectoryOptions {
        siblings: false,
        keep_outcomes: true,
        keep_probabilities: true,
    };
    let mut worst = 0.0f64;
    for seed in seeds {
        let rec = run_trajectory_with(params, seed, &opts, None)?;
        let full = full_space_trajectory(params, seed)?;
        for n in 0..params.n_max {
            if rec.outcome(n) != full.outcomes[n as usize] {
                return Ok(None);
            }
            worst = worst.max((rec.probabilities[n as usize] - full.probabilities[n as usize]).abs());
        }
    }
    Ok(Some(worst))
}

fn kraus_check(max_m: usize) -> Result<CheckResult> {
    let mut worst = 0.0f64;
    for m in 1..=max_m {
        for beta in [0.0, 0.01, 0.3, 0.785] {
            for alpha in [std::f64::consts::FRAC_PI_2, 0.4] {
                let k = entangling_kraus_with_angle(m, beta, alpha)?;
                let sum = k.plus.adjoint() * &k.plus + k.minus.adjoint() * &k.minus;
                let id = nalgebra::DMatrix::identity(m + 1, m + 1);
                worst = worst.max((sum - id).camax());
            }
        }
    }
    Ok(check(
        "kraus_completeness",
        worst < 1e-12,
        format!("M <= {max_m}, max |sum U^dag U - I| = {worst:.2e}"),
    ))
}

fn pure_engine_check(max_m: usize) -> Result<CheckResult> {
    let top = max_m.min(8);
    let mut worst = 0.0f64;
    for m in 1..=top {
        let mut p = ProtocolParams::new(m, 0.15, 0.7, 100);
        p.backend = Backend::Dicke;
        match compare_with_full(&p, 0..20)? {
            Some(w) => worst = worst.max(w),
            None => {
                return Ok(check(
                    "pure_engine_vs_full_space",
                    false,
                    format!("outcome bits differ at M = {m}"),
                ))
            }
        }
    }
    Ok(check(
        "pure_engine_vs_full_space",
        worst < 1e-10,
        format!("M <= {top}, N = 100, 20 seeds, max |dp| = {worst:.2e}"),
    ))
}

fn density_engine_check(max_m: usize) -> Result<CheckResult> {
    let top = max_m.min(5);
    let mut worst = 0.0f64;
    for m in 1..=top {
        let mut p = ProtocolParams::new(m, 0.2, 0.9, 30);
        p.gamma2 = 0.02;
        p.polarization = 0.7;
        match compare_with_full(&p, 0..4)? {
            Some(w) => worst = worst.max(w),
            None => {
                return Ok(check(
                    "density_engine_vs_full_space",
                    false,
                    format!("outcome bits differ at M = {m}"),
                ))
            }
        }
    }
    Ok(check(
        "density_engine_vs_full_space",
        worst < 1e-10,
        format!("M <= {top}, gamma2 = 0.02, P = 0.7, N = 30, max |dp| = {worst:.2e}"),
    ))
}

fn record_sum_check(max_m: usize) -> Result<CheckResult> {
    let top = max_m.min(3);
    let mut worst = 0.0f64;
    for m in 1..=top {
        let p = ProtocolParams::new(m, 0.25, 1.1, 12);
        worst = worst.max((record_probability_sum(&p)? - 1.0).abs());
    }
    Ok(check(
        "record_probabilities_sum_to_one",
        worst < 1e-10,
        format!("M <= {top}, N = 12, max |sum - 1| = {worst:.2e}"),
    ))
}

fn exhaustive_fisher_check(options: &RunOptions) -> Result<CheckResult> {
    let p = ProtocolParams::new(2, 0.2, 0.7, 10);
    let exact = exhaustive_fisher(&p)?;
    let est = estimate_fisher_with(&p, 10_000, 0, options)?;
    let k = est.checkpoints.len() - 1;
    let (mc, se) = (est.mean_fi[k], est.std_error[k]);
    let z = (mc - exact).abs() / se;
    Ok(check(
        "exhaustive_fisher_vs_monte_carlo",
        z < 3.0,
        format!("M = 2, N = 10: exact {exact:.5}, estimate {mc:.5} +/- {se:.5} ({z:.2} SE)"),
    ))
}

fn schmidt_check(max_m: usize) -> Result<CheckResult> {
    let top = max_m.min(10);
    let mut worst = 0.0f64;
    for m in 2..=top {
        let p = ProtocolParams::new(m, 0.1, 0.7, 64);
        let mut snaps = Vec::new();
        let mut obs = |_n: u64, s: &StateSnapshot| {
            if let StateSnapshot::Pure(v) = s {
                snaps.push(v.clone());
            }
        };
        let opts = TrajectoryOptions {
            siblings: false,
            keep_outcomes: false,
            keep_probabilities: false,
        };
        run_trajectory_with(&p, m as u64, &opts, Some(&mut obs))?;
        let state = snaps.last().ok_or_else(|| Error::param("state", "no snapshot"))?;
        let full = dicke_to_full(state)?;
        for m1 in 1..m {
            let a = schmidt_coefficients(state, Bipartition::new(m1, m - m1)?)?;
            let b = full.bipartite_singular_values(m1)?;
            for (i, x) in a.iter().enumerate() {
                worst = worst.max((x - b[i]).abs());
            }
            worst = worst.max(b[a.len()..].iter().fold(0.0f64, |w, v| w.max(v.abs())));
        }
    }
    Ok(check(
        "schmidt_vs_full_space_svd",
        worst < 1e-10,
        format!("2 <= M <= {top}, all splits, max |ds| = {worst:.2e}"),
    ))
}

/// Runs every cross-check for registers up to `max_m` spins.
pub fn run_validation(max_m: usize, options: &RunOptions) -> Result<Vec<CheckResult>> {
    if max_m == 0 || max_m > MAX_FULL_SPINS {
        return Err(Error::param("max-M", format!("must be in 1..={MAX_FULL_SPINS}")));
    }
    Ok(vec![
        kraus_check(max_m)?,
        pure_engine_check(max_m)?,
        density_engine_check(max_m)?,
        record_sum_check(max_m)?,
        exhaustive_fisher_check(options)?,
        schmidt_check(max_m)?,
    ])
}
