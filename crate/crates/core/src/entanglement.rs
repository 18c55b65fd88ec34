//! Entanglement between two symmetric blocks of a pure register.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fisher::{with_pool, RunOptions};
use crate::protocol::{
    checkpoint_schedule, run_trajectory_with, Backend, ProtocolParams, StateSnapshot,
    TrajectoryOptions,
};
use crate::states::{bipartite_expand, DickeVector};

/// Split of the `M` spins into blocks of `m1` and `m2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Bipartition {
    pub m1: usize,
    pub m2: usize,
}

impl Bipartition {
    pub fn new(m1: usize, m2: usize) -> Result<Self> {
        if m1 == 0 || m2 == 0 {
            return Err(Error::param("split", "both blocks need at least one spin"));
        }
        Ok(Bipartition { m1, m2 })
    }

    /// `(ceil(M/2), floor(M/2))`.
    pub fn equal(m: usize) -> Result<Self> {
        Bipartition::new(m.div_ceil(2), m / 2)
    }

    /// One spin against the rest.
    pub fn single(m: usize) -> Result<Self> {
        Bipartition::new(1, m.saturating_sub(1))
    }

    pub fn total(&self) -> usize {
        self.m1 + self.m2
    }
}

impl std::fmt::Display for Bipartition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}|{}", self.m1, self.m2)
    }
}

impl std::str::FromStr for Bipartition {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once('|')
            .ok_or_else(|| Error::param("split", format!("expected `m1|m2`, got `{s}`")))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| Error::param("split", format!("bad block size `{v}`")))
        };
        Bipartition::new(parse(a)?, parse(b)?)
    }
}

/// Schmidt coefficients across `split`, descending.
pub fn schmidt_coefficients(state: &DickeVector, split: Bipartition) -> Result<Vec<f64>> {
    let c = bipartite_expand(state, split.m1, split.m2)?;
    let mut sv: Vec<f64> = c.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(sv)
}

/// Logarithmic negativity in ebits, `2 log2(sum of Schmidt coefficients)`.
pub fn log_negativity(state: &DickeVector, split: Bipartition) -> Result<f64> {
    let sum: f64 = schmidt_coefficients(state, split)?.iter().sum();
    Ok((2.0 * sum.log2()).max(0.0))
}

/// Mean logarithmic negativity along trajectories.
#[derive(Clone, Debug, PartialEq)]
pub struct EntanglementTrace {
    /// `0` followed by the protocol checkpoints.
    pub checkpoints: Vec<u64>,
    pub splits: Vec<Bipartition>,
    /// `mean_ln[s][c]`: split `s`, checkpoint `c`.
    pub mean_ln: Vec<Vec<f64>>,
    pub std_error: Vec<Vec<f64>>,
    pub runs: usize,
}

impl EntanglementTrace {
    /// First checkpoint at which split `s` reaches `fraction` of its value at
    /// the last checkpoint, linearly interpolated in `ln N`.
    pub fn crossing(&self, s: usize, fraction: f64) -> Option<f64> {
        let ln = &self.mean_ln[s];
        let target = fraction * *ln.last()?;
        for i in 1..ln.len() {
            if ln[i] >= target {
                let (n0, n1) = (self.checkpoints[i - 1] as f64, self.checkpoints[i] as f64);
                if n0 == 0.0 || ln[i] == ln[i - 1] {
                    return Some(n1);
                }
                let t = (target - ln[i - 1]) / (ln[i] - ln[i - 1]);
                return Some((n0.ln() + t * (n1.ln() - n0.ln())).exp());
            }
        }
        None
    }
}

/// Averages the logarithmic negativity over `runs` pure-state trajectories
/// (seeds `base_seed + i`) at every checkpoint, including `N = 0`.
pub fn entanglement_trace(
    params: &ProtocolParams,
    splits: &[Bipartition],
    runs: usize,
    base_seed: u64,
    options: &RunOptions,
) -> Result<EntanglementTrace> {
    if params.gamma2 > 0.0 {
        return Err(Error::param(
            "gamma2",
            "the pure-state negativity formula needs gamma2 = 0",
        ));
    }
    params.validate()?;
    if params.resolve_backend()? != Backend::Dicke {
        return Err(Error::param(
            "ensemble",
            "entanglement tracking needs a pure, homogeneous register",
        ));
    }
    if splits.is_empty() {
        return Err(Error::param("splits", "at least one split is required"));
    }
    for s in splits {
        if s.total() != params.m {
            return Err(Error::param("split", format!("{s} does not partition M = {}", params.m)));
        }
    }
    if runs < 2 {
        return Err(Error::param("runs", "at least 2 runs are required"));
    }
    let traj = TrajectoryOptions {
        siblings: false,
        keep_outcomes: false,
        keep_probabilities: false,
    };
    let per_run: Vec<Vec<Vec<f64>>> = with_pool(options.threads, || {
        (0..runs)
            .into_par_iter()
            .map(|i| {
                let mut rows: Vec<Vec<f64>> = vec![Vec::new(); splits.len()];
                let mut failure = None;
                let mut obs = |_n: u64, snap: &StateSnapshot| {
                    let StateSnapshot::Pure(state) = snap else { return };
                    for (row, s) in rows.iter_mut().zip(splits) {
                        match log_negativity(state, *s) {
                            Ok(v) => row.push(v),
                            Err(e) => failure = Some(e),
                        }
                    }
                };
                run_trajectory_with(params, base_seed.wrapping_add(i as u64), &traj, Some(&mut obs))?;
                match failure {
                    Some(e) => Err(e),
                    None => Ok(rows),
                }
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let mut checkpoints = vec![0];
    checkpoints.extend(checkpoint_schedule(params.n_max, params.checkpoints_per_octave));
    let cols = checkpoints.len();
    let mut sums = vec![vec![0.0; cols]; splits.len()];
    let mut sq = vec![vec![0.0; cols]; splits.len()];
    for rows in &per_run {
        for (s, row) in rows.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                sums[s][c] += v;
                sq[s][c] += v * v;
            }
        }
    }
    let n = runs as f64;
    let mean_ln: Vec<Vec<f64>> = sums.iter().map(|r| r.iter().map(|v| v / n).collect()).collect();
    let std_error = sq
        .iter()
        .zip(&mean_ln)
        .map(|(q, m)| {
            q.iter()
                .zip(m)
                .map(|(q, m)| ((q / n - m * m).max(0.0) * n / (n - 1.0)).sqrt() / n.sqrt())
                .collect()
        })
        .collect();
    Ok(EntanglementTrace {
        checkpoints,
        splits: splits.to_vec(),
        mean_ln,
        std_error,
        runs,
    })
}
