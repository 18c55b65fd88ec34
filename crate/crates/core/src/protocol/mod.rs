//! The sequential weak-measurement protocol.
//!
//! Each cycle the auxiliary spins precess by `phi` about z, optionally
//! dephase, and are then weakly measured by the sensor. For sensor outcome
//! `+` or `-` the register is updated by the Kraus pair
//!
//! ```text
//! U_+/- = (A +/- e^{-i alpha} A^dagger) / 2,   A = exp(-i 2 beta Jx),
//! ```
//!
//! which for the default readout angle `alpha = pi/2` is
//! `(A -/+ i A^dagger) / 2`.

mod engine;
mod trajectory;

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::states::{
    bloch_norm, rotation_x, DickeVector, GroupedState, SpinEnsembleSpec,
};

pub use trajectory::{
    checkpoint_schedule, run_trajectory, run_trajectory_with, Observer, StateSnapshot, TrajectoryOptions,
    TrajectoryRecord,
};

/// Smallest outcome probability accepted before a run is aborted.
pub const PROBABILITY_FLOOR: f64 = 1e-300;

/// Which state representation drives a trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Backend {
    /// Picks the cheapest representation that is exact for the parameters.
    #[default]
    Auto,
    /// Pure state in the `M + 1` dimensional symmetric subspace.
    Dicke,
    /// Permutation-invariant density matrix (exact mixed states and local
    /// dephasing).
    Density,
    /// Tensor of several symmetric groups (inhomogeneous couplings, sampled
    /// mixed initial states).
    Grouped,
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(match self {
            Backend::Auto => "auto",
            Backend::Dicke => "dicke",
            Backend::Density => "density",
            Backend::Grouped => "grouped",
        })
    }
}

impl std::str::FromStr for Backend {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Backend::Auto),
            "dicke" => Ok(Backend::Dicke),
            "density" => Ok(Backend::Density),
            "grouped" => Ok(Backend::Grouped),
            other => Err(Error::param("backend", format!("unknown backend `{other}`"))),
        }
    }
}

/// How auxiliary-spin dephasing is modelled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DephasingModel {
    /// Independent per-spin dephasing, applied as an exact channel.
    #[default]
    Local,
    /// Random collective z-rotation per step, shared by the likelihood
    /// siblings. Keeps pure states but the likelihood is then conditioned
    /// on the (unobservable) rotation angles.
    CollectiveKick,
}

impl std::fmt::Display for DephasingModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(match self {
            DephasingModel::Local => "local",
            DephasingModel::CollectiveKick => "kick",
        })
    }
}

impl std::str::FromStr for DephasingModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "local" => Ok(DephasingModel::Local),
            "kick" | "collective_kick" => Ok(DephasingModel::CollectiveKick),
            other => Err(Error::param("dephasing", format!("unknown model `{other}`"))),
        }
    }
}

/// All knobs of one protocol instance.
#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolParams {
    /// Number of auxiliary spins.
    pub m: usize,
    /// Effective coupling per measurement (radians), `2 k0 Ts / pi`.
    pub beta: f64,
    /// Precession phase per cycle, `delta * tau_m`.
    pub phi: f64,
    /// Time between measurements (seconds).
    pub tau_m: f64,
    /// Per-step auxiliary-spin dephasing, `tau_m / T2`.
    pub gamma2: f64,
    /// Initial polarization of each spin along +x.
    pub polarization: f64,
    /// Sensor readout-basis angle.
    pub alpha: f64,
    /// Number of measurements per trajectory.
    pub n_max: u64,
    /// Finite-difference half step on `phi`; `None` selects the default.
    pub d_phi: Option<f64>,
    /// Optional group structure; overrides `beta` and `polarization`.
    pub ensemble: Option<SpinEnsembleSpec>,
    /// Checkpoints per factor of two in `N`.
    pub checkpoints_per_octave: u32,
    pub backend: Backend,
    pub dephasing: DephasingModel,
}

impl ProtocolParams {
    /// Noise-free defaults: unit `tau_m`, full polarization, Y readout.
    pub fn new(m: usize, beta: f64, phi: f64, n_max: u64) -> Self {
        ProtocolParams {
            m,
            beta,
            phi,
            tau_m: 1.0,
            gamma2: 0.0,
            polarization: 1.0,
            alpha: FRAC_PI_2,
            n_max,
            d_phi: None,
            ensemble: None,
            checkpoints_per_octave: 1,
            backend: Backend::Auto,
            dephasing: DephasingModel::Local,
        }
    }

    /// Same as [`ProtocolParams::new`] but with the coupling given as `k0 Ts`.
    pub fn from_k0ts(m: usize, k0ts: f64, phi: f64, n_max: u64) -> Self {
        ProtocolParams::new(m, 2.0 * k0ts / PI, phi, n_max)
    }

    /// Finite-difference half step actually used.
    ///
    /// The sibling trajectories accumulate a phase offset `N * d_phi`; the
    /// central difference is only unbiased while that offset stays far below
    /// the likelihood's curvature scale, so the default shrinks with `n_max`.
    pub fn d_phi(&self) -> f64 {
        self.d_phi
            .unwrap_or_else(|| 1e-3 * self.phi.abs().max(0.01) / self.n_max.max(1) as f64)
    }

    /// The ensemble layout implied by the parameters.
    pub fn ensemble_spec(&self) -> SpinEnsembleSpec {
        self.ensemble.clone().unwrap_or_else(|| {
            SpinEnsembleSpec::homogeneous(self.m, self.beta, [self.polarization, 0.0, 0.0])
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::param("M", "must be positive"));
        }
        let check_beta = |key: &str, b: f64| {
            if !(0.0..=PI / 4.0 + 1e-15).contains(&b) {
                return Err(Error::param(key, format!("{b} outside [0, pi/4]")));
            }
            Ok(())
        };
        check_beta("beta", self.beta)?;
        if !self.phi.is_finite() {
            return Err(Error::param("phi", "must be finite"));
        }
        if !(self.tau_m > 0.0) || !self.tau_m.is_finite() {
            return Err(Error::param("tau_m", "must be positive"));
        }
        if !(self.gamma2 >= 0.0) || !self.gamma2.is_finite() {
            return Err(Error::param("gamma2", "must be finite and non-negative"));
        }
        if !(0.0..=1.0).contains(&self.polarization) {
            return Err(Error::param("polarization", "must lie in [0, 1]"));
        }
        if !self.alpha.is_finite() {
            return Err(Error::param("alpha", "must be finite"));
        }
        if self.n_max == 0 {
            return Err(Error::param("N_max", "must be positive"));
        }
        if let Some(d) = self.d_phi {
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::param("d_phi", "must be positive"));
            }
        }
        if self.checkpoints_per_octave == 0 {
            return Err(Error::param("checkpoints_per_octave", "must be positive"));
        }
        if let Some(ens) = &self.ensemble {
            ens.validate()?;
            if ens.total_spins() != self.m {
                return Err(Error::param(
                    "ensemble",
                    format!("group sizes sum to {} but M = {}", ens.total_spins(), self.m),
                ));
            }
            for (i, g) in ens.groups.iter().enumerate() {
                check_beta(&format!("ensemble.groups[{i}].beta"), g.beta)?;
            }
        }
        self.resolve_backend().map(|_| ())
    }

    /// The concrete backend for these parameters.
    pub fn resolve_backend(&self) -> Result<Backend> {
        let spec = self.ensemble_spec();
        let homogeneous = spec.is_homogeneous();
        let pure = spec.is_pure();
        let local = self.gamma2 > 0.0 && self.dephasing == DephasingModel::Local;
        let chosen = match self.backend {
            Backend::Auto if !homogeneous => Backend::Grouped,
            Backend::Auto if local || !pure => Backend::Density,
            Backend::Auto => Backend::Dicke,
            b => b,
        };
        match chosen {
            Backend::Dicke if !homogeneous => Err(Error::param(
                "backend",
                "the dicke backend needs identical couplings and initial states",
            )),
            Backend::Dicke if !pure => Err(Error::param(
                "backend",
                "the dicke backend needs a fully polarized initial state",
            )),
            Backend::Density if !homogeneous => Err(Error::param(
                "backend",
                "the density backend needs identical couplings and initial states",
            )),
            Backend::Dicke | Backend::Grouped if local => Err(Error::param(
                "dephasing",
                "local dephasing leaves the symmetric subspace; use the density backend or dephasing=kick",
            )),
            b => Ok(b),
        }
    }
}

/// Effective per-measurement coupling `2 A_perp Ts / pi`.
pub fn effective_beta(a_perp: f64, ts: f64) -> Result<f64> {
    if !(a_perp > 0.0) {
        return Err(Error::param("A_perp", "must be positive"));
    }
    if !(ts > 0.0) {
        return Err(Error::param("Ts", "must be positive"));
    }
    Ok(2.0 * a_perp * ts / PI)
}

/// Kraus operators of one sensor readout, Jz basis.
#[derive(Clone, Debug)]
pub struct KrausPair {
    pub plus: DMatrix<C64>,
    pub minus: DMatrix<C64>,
}

/// `U_+/-` for a register of `m` spins at readout angle `alpha`.
pub fn entangling_kraus_with_angle(m: usize, beta: f64, alpha: f64) -> Result<KrausPair> {
    if m == 0 {
        return Err(Error::param("M", "must be positive"));
    }
    if !beta.is_finite() || !alpha.is_finite() {
        return Err(Error::param("beta", "must be finite"));
    }
    Ok(sector_kraus(m, beta, alpha))
}

/// Kraus pair on the spin-`j2/2` irrep; `j2 = 0` gives the scalars
/// `(1 +/- e^{-i alpha}) / 2`.
pub(crate) fn sector_kraus(j2: usize, beta: f64, alpha: f64) -> KrausPair {
    let a = rotation_x(j2, 2.0 * beta);
    let ad = a.adjoint();
    let w = C64::from_polar(1.0, -alpha);
    let half = C64::new(0.5, 0.0);
    KrausPair {
        plus: (&a + &ad * w) * half,
        minus: (&a - &ad * w) * half,
    }
}

/// `U_+/-` for the default Y readout.
pub fn entangling_kraus(m: usize, beta: f64) -> Result<KrausPair> {
    entangling_kraus_with_angle(m, beta, FRAC_PI_2)
}

/// Diagonal of `exp(-i phi Jz)` over Dicke levels `k = 0..=m`.
pub fn free_evolution(m: usize, phi: f64) -> Vec<C64> {
    (0..=m)
        .map(|k| C64::from_polar(1.0, -phi * (m as f64 / 2.0 - k as f64)))
        .collect()
}

fn check_norm(norm: f64) -> Result<()> {
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::NormDrift { norm, tolerance: 1e-8 });
    }
    Ok(())
}

/// `<psi| U^dagger U |psi>` for a Kraus branch `U`, clamped to `[0, 1]`.
pub fn measure_probability(state: &DickeVector, kraus: &DMatrix<C64>) -> Result<f64> {
    check_norm(state.norm())?;
    if kraus.nrows() != state.amplitudes().len() {
        return Err(Error::param("kraus", "dimension mismatch with the state"));
    }
    let out = state.apply(kraus);
    Ok(out.iter().map(|a| a.norm_sqr()).sum::<f64>().clamp(0.0, 1.0))
}

/// Outcome probability for a grouped register. Each group couples with its
/// own `beta` and axis phase; the two product branches `(x)_g A_g` and
/// `(x)_g A_g^dagger` are combined coherently before squaring.
pub fn measure_probability_grouped(
    state: &GroupedState,
    betas: &[f64],
    phi0s: &[f64],
    alpha: f64,
    plus: bool,
) -> Result<f64> {
    check_norm(state.norm())?;
    let sizes = state.group_sizes();
    if betas.len() != sizes.len() || phi0s.len() != sizes.len() {
        return Err(Error::param("groups", "one coupling per group is required"));
    }
    let fwd: Vec<DMatrix<C64>> = sizes
        .iter()
        .zip(betas.iter().zip(phi0s))
        .map(|(&s, (&b, &p0))| {
            let z = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(free_evolution(s, p0)));
            &z * rotation_x(s, 2.0 * b) * z.adjoint()
        })
        .collect();
    let bwd: Vec<DMatrix<C64>> = fwd.iter().map(|a| a.adjoint()).collect();
    let a = state.apply_local(&fwd);
    let b = state.apply_local(&bwd);
    let sign = if plus { 1.0 } else { -1.0 };
    let w = C64::from_polar(sign, -alpha);
    let p: f64 = a
        .iter()
        .zip(&b)
        .map(|(x, y)| ((x + w * y) * 0.5).norm_sqr())
        .sum();
    Ok(p.clamp(0.0, 1.0))
}

/// Stochastic dephasing step: a random collective rotation `exp(-i theta Jz)`
/// with `theta ~ N(0, 2 gamma2)`, so that single-spin coherences decay as
/// `exp(-gamma2)` per step on average.
pub fn dephase<R: Rng + ?Sized>(state: &DickeVector, gamma2: f64, rng: &mut R) -> Result<DickeVector> {
    let theta = kick_angle(gamma2, rng)?;
    if theta == 0.0 {
        return Ok(state.clone());
    }
    Ok(state.rotate_z(theta))
}

pub(crate) fn kick_angle<R: Rng + ?Sized>(gamma2: f64, rng: &mut R) -> Result<f64> {
    if !(gamma2 >= 0.0) || !gamma2.is_finite() {
        return Err(Error::param("gamma2", "must be finite and non-negative"));
    }
    if gamma2 == 0.0 {
        return Ok(0.0);
    }
    let normal = Normal::new(0.0, (2.0 * gamma2).sqrt())
        .map_err(|e| Error::param("gamma2", e.to_string()))?;
    Ok(normal.sample(rng))
}

/// Samples a pure-state unraveling of a partially polarized ensemble.
///
/// Every spin of a group with Bloch vector `r` is independently put along
/// `+r/|r|` with probability `(1 + |r|)/2` and along `-r/|r|` otherwise (an
/// unpolarized group uses the x axis). Spins sharing an orientation are then
/// collected into one symmetric group, so each input group yields up to two
/// output groups, in the order (aligned, anti-aligned).
///
/// Returns the grouped state together with the per-output-group coupling and
/// axis phase.
pub fn sample_mixed_initial<R: Rng + ?Sized>(
    spec: &SpinEnsembleSpec,
    rng: &mut R,
) -> Result<(GroupedState, Vec<f64>, Vec<f64>)> {
    spec.validate()?;
    let mut groups = Vec::new();
    let mut betas = Vec::new();
    let mut phi0s = Vec::new();
    for g in &spec.groups {
        let r = bloch_norm(g.initial_bloch);
        let axis = if r > 0.0 {
            [g.initial_bloch[0] / r, g.initial_bloch[1] / r, g.initial_bloch[2] / r]
        } else {
            [1.0, 0.0, 0.0]
        };
        let p_aligned = (1.0 + r.min(1.0)) / 2.0;
        let aligned = (0..g.size).filter(|_| rng.random::<f64>() < p_aligned).count();
        for (count, dir) in [
            (aligned, axis),
            (g.size - aligned, [-axis[0], -axis[1], -axis[2]]),
        ] {
            if count > 0 {
                groups.push(DickeVector::coherent(count, dir)?);
                betas.push(g.beta);
                phi0s.push(g.phi0);
            }
        }
    }
    Ok((GroupedState::from_product(&groups)?, betas, phi0s))
}

#[cfg(test)]
mod tests;
