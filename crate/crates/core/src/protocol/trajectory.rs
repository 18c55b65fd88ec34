use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::engine::{self, Engine};
use super::{kick_angle, sample_mixed_initial, Backend, DephasingModel, ProtocolParams, PROBABILITY_FLOOR};
use crate::error::{Error, Result};
use crate::states::{DickeVector, GroupedState, SymmetricDensity};

/// Callback receiving the step count and the central register.
pub type Observer<'a> = &'a mut dyn FnMut(u64, &StateSnapshot);

/// Register state handed to trajectory observers.
#[derive(Clone, Debug)]
pub enum StateSnapshot {
    Pure(DickeVector),
    Grouped(GroupedState),
    Mixed(SymmetricDensity),
}

/// What to record besides the checkpoint log-likelihoods.
#[derive(Clone, Debug)]
pub struct TrajectoryOptions {
    /// Propagate the `phi +/- d_phi` siblings for the likelihood derivative.
    pub siblings: bool,
    /// Keep the sensor record.
    pub keep_outcomes: bool,
    /// Keep `p_+` of every step.
    pub keep_probabilities: bool,
}

impl Default for TrajectoryOptions {
    fn default() -> Self {
        TrajectoryOptions {
            siblings: true,
            keep_outcomes: true,
            keep_probabilities: false,
        }
    }
}

/// Result of one simulated measurement record.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    /// Sensor outcomes, bit `n % 64` of word `n / 64` set for `+`.
    pub outcomes: Vec<u64>,
    pub n_steps: u64,
    /// Measurement counts at which the log-likelihoods were sampled.
    pub checkpoints: Vec<u64>,
    /// `ln P(record | phi)` at each checkpoint.
    pub log_p: Vec<f64>,
    /// `ln P(record | phi + d_phi)` at each checkpoint (empty without siblings).
    pub log_p_plus: Vec<f64>,
    /// `ln P(record | phi - d_phi)` at each checkpoint (empty without siblings).
    pub log_p_minus: Vec<f64>,
    /// Running sum of the per-step conditional information
    /// `(d p_+ / d phi)^2 / (p_+ p_-)` at each checkpoint (empty without
    /// siblings). Its mean over records is the record's Fisher information.
    pub conditional_fisher: Vec<f64>,
    /// `p_+` before each measurement, when requested.
    pub probabilities: Vec<f64>,
    pub d_phi: f64,
    pub seed: u64,
}

impl TrajectoryRecord {
    /// Outcome of measurement `n` (zero-based); `true` for `+`.
    pub fn outcome(&self, n: u64) -> bool {
        (self.outcomes[(n / 64) as usize] >> (n % 64)) & 1 == 1
    }

    /// Central-difference score `d ln P / d phi` at each checkpoint.
    pub fn scores(&self) -> Vec<f64> {
        self.log_p_plus
            .iter()
            .zip(&self.log_p_minus)
            .map(|(p, m)| (p - m) / (2.0 * self.d_phi))
            .collect()
    }
}

/// Measurement counts at which statistics are recorded: `2^(i / per_octave)`
/// rounded, deduplicated, capped by and always including `n_max`.
pub fn checkpoint_schedule(n_max: u64, per_octave: u32) -> Vec<u64> {
    let per = per_octave.max(1) as f64;
    let mut out = Vec::new();
    let mut i = 0u32;
    loop {
        let n = 2f64.powf(i as f64 / per).round() as u64;
        if n > n_max {
            break;
        }
        if out.last() != Some(&n) {
            out.push(n);
        }
        i += 1;
    }
    if out.last() != Some(&n_max) {
        out.push(n_max);
    }
    out
}

/// Simulates one measurement record with default options.
pub fn run_trajectory(params: &ProtocolParams, seed: u64) -> Result<TrajectoryRecord> {
    run_trajectory_with(params, seed, &TrajectoryOptions::default(), None)
}

/// Simulates one measurement record.
///
/// Randomness comes from a ChaCha8 stream seeded with `seed`. Each step draws
/// the dephasing kick (kick model only) and then one uniform that selects the
/// outcome. The `observer`, if any, sees the central register after each
/// checkpoint (and once at `N = 0`).
pub fn run_trajectory_with(
    params: &ProtocolParams,
    seed: u64,
    options: &TrajectoryOptions,
    mut observer: Option<Observer<'_>>,
) -> Result<TrajectoryRecord> {
    params.validate()?;
    let backend = params.resolve_backend()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = params.ensemble_spec();
    let sampled = if backend == Backend::Grouped && !spec.is_pure() {
        Some(sample_mixed_initial(&spec, &mut rng)?)
    } else {
        None
    };
    let d_phi = params.d_phi();
    let mut center = engine::build(params, backend, params.phi, sampled.as_ref())?;
    let mut sibs: Vec<Box<dyn Engine>> = if options.siblings {
        vec![
            engine::build(params, backend, params.phi + d_phi, sampled.as_ref())?,
            engine::build(params, backend, params.phi - d_phi, sampled.as_ref())?,
        ]
    } else {
        Vec::new()
    };
    let kicks = params.gamma2 > 0.0 && params.dephasing == DephasingModel::CollectiveKick;

    let checkpoints = checkpoint_schedule(params.n_max, params.checkpoints_per_octave);
    let n_cp = checkpoints.len();
    let mut record = TrajectoryRecord {
        outcomes: if options.keep_outcomes {
            vec![0; params.n_max.div_ceil(64) as usize]
        } else {
            Vec::new()
        },
        n_steps: params.n_max,
        checkpoints: checkpoints.clone(),
        log_p: Vec::with_capacity(n_cp),
        log_p_plus: Vec::with_capacity(if options.siblings { n_cp } else { 0 }),
        log_p_minus: Vec::with_capacity(if options.siblings { n_cp } else { 0 }),
        conditional_fisher: Vec::with_capacity(if options.siblings { n_cp } else { 0 }),
        probabilities: Vec::new(),
        d_phi,
        seed,
    };
    if options.keep_probabilities {
        record.probabilities.reserve(params.n_max as usize);
    }
    if let Some(obs) = observer.as_deref_mut() {
        obs(0, &center.snapshot());
    }

    let mut logs = [0.0f64; 3];
    let mut info = 0.0f64;
    let mut next_cp = 0usize;
    for n in 1..=params.n_max {
        let kick = if kicks { kick_angle(params.gamma2, &mut rng)? } else { 0.0 };
        let p_plus = center.prepare(kick);
        let u: f64 = rng.random();
        let plus = u < p_plus;
        let p = center.collapse(plus);
        if !(p >= PROBABILITY_FLOOR) {
            return Err(Error::Underflow { step: n, probability: p, seed });
        }
        logs[0] += p.ln();
        let mut sib_p = [0.0f64; 2];
        for ((s, log), sp) in sibs.iter_mut().zip(logs[1..].iter_mut()).zip(sib_p.iter_mut()) {
            *sp = s.prepare(kick);
            let q = s.collapse(plus);
            if !(q >= PROBABILITY_FLOOR) {
                return Err(Error::Underflow { step: n, probability: q, seed });
            }
            *log += q.ln();
        }
        if options.siblings {
            let var = p_plus * (1.0 - p_plus);
            if var > 0.0 {
                let dp = (sib_p[0] - sib_p[1]) / (2.0 * d_phi);
                info += dp * dp / var;
            }
        }
        if options.keep_outcomes && plus {
            record.outcomes[((n - 1) / 64) as usize] |= 1 << ((n - 1) % 64);
        }
        if options.keep_probabilities {
            record.probabilities.push(p_plus);
        }
        if next_cp < n_cp && checkpoints[next_cp] == n {
            record.log_p.push(logs[0]);
            if options.siblings {
                record.log_p_plus.push(logs[1]);
                record.log_p_minus.push(logs[2]);
                record.conditional_fisher.push(info);
            }
            if let Some(obs) = observer.as_deref_mut() {
                obs(n, &center.snapshot());
            }
            next_cp += 1;
        }
    }
    Ok(record)
}
