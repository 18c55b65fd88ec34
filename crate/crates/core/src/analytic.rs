//! Closed-form expressions: readout signal, Fisher-information sums and
//! asymptotes, decay rates, Heisenberg and bare-sensor benchmarks.
//!
//! Fisher information is reported for the detuning `delta` (rad/s), i.e. the
//! phase-per-cycle information times `tau_m^2`. `k0ts` always denotes the
//! dimensionless product `k0 * Ts`.

use std::f64::consts::{E, PI};

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Constants entering the magnetic-field conversions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysicalConstants {
    /// Reduced Planck constant (J s).
    pub hbar: f64,
    /// Magnetic moment of one auxiliary spin (J/T).
    pub mu_n: f64,
    /// Magnetic moment of the sensor spin (J/T).
    pub mu_e: f64,
}

impl PhysicalConstants {
    pub fn new(hbar: f64, mu_n: f64, mu_e: f64) -> Result<Self> {
        for (key, v) in [("hbar", hbar), ("mu_n", mu_n), ("mu_e", mu_e)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::param(key, "must be positive"));
            }
        }
        Ok(PhysicalConstants { hbar, mu_n, mu_e })
    }

    /// NV electron spin sensing carbon-13 nuclei.
    pub fn nv_carbon13() -> Self {
        PhysicalConstants {
            hbar: 1.054_571_817e-34,
            mu_n: 0.702_411_8 * 5.050_783_746e-27,
            mu_e: 9.274_010_078e-24,
        }
    }
}

fn positive(key: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::param(key, "must be positive"));
    }
    Ok(())
}

/// Ramsey limit with `M + 1` entangled spins: `hbar / (mu_n (M+1) T)`.
pub fn heisenberg_uncertainty(m: usize, t: f64, c: &PhysicalConstants) -> Result<f64> {
    positive("T", t)?;
    Ok(c.hbar / (c.mu_n * (m as f64 + 1.0) * t))
}

/// Fisher information of the Heisenberg-limited benchmark, `(M+1)^2 (N tau_m)^2`.
pub fn hl_fisher(m: usize, n: f64, tau_m: f64) -> f64 {
    let t = n * tau_m;
    (m as f64 + 1.0).powi(2) * t * t
}

/// Small-coupling readout probability after `n` cycles,
/// `cos^2(2 M k0Ts / pi * cos(phi n) - pi/4)`.
pub fn signal_probability(n: u64, m: usize, k0ts: f64, phi: f64) -> f64 {
    let arg = 2.0 * m as f64 * k0ts / PI * (phi * n as f64).cos() - PI / 4.0;
    arg.cos().powi(2).clamp(0.0, 1.0)
}

/// Exact readout probability for spins with individual couplings
/// `theta_m = 4 A_perp Ts / pi` (twice the effective `beta`), precession
/// phases `phi_m`, polarization `p` and readout angle `alpha`.
pub fn signal_probability_general(
    couplings: &[f64],
    phases: &[f64],
    polarization: f64,
    alpha: f64,
) -> Result<f64> {
    if couplings.len() != phases.len() {
        return Err(Error::param("phases", "one phase per coupling is required"));
    }
    if !(0.0..=1.0).contains(&polarization) {
        return Err(Error::param("polarization", "must lie in [0, 1]"));
    }
    let mut minus = C64::new(1.0, 0.0);
    let mut plus = C64::new(1.0, 0.0);
    for (&th, &ph) in couplings.iter().zip(phases) {
        let s = th.sin() * polarization * ph.cos();
        minus *= C64::new(th.cos(), -s);
        plus *= C64::new(th.cos(), s);
    }
    let val = (minus + plus) * alpha.cos() + C64::i() * alpha.sin() * (minus - plus);
    Ok((0.5 + 0.25 * val.re).clamp(0.0, 1.0))
}

/// `beta = 2 k0Ts / pi`.
pub fn beta_from_k0ts(k0ts: f64) -> f64 {
    2.0 * k0ts / PI
}

/// Leading-order measurement backaction rate, `beta^2`.
pub fn backaction_rate_approx(beta: f64) -> f64 {
    beta * beta
}

/// Exact per-step coherence decay `-ln((1 + cos 2 beta)/2)` plus `gamma2`.
pub fn backaction_rate_exact(beta: f64, gamma2: f64) -> Result<f64> {
    if !(gamma2 >= 0.0) {
        return Err(Error::param("gamma2", "must be non-negative"));
    }
    Ok(-((1.0 + (2.0 * beta).cos()) / 2.0).ln() + gamma2)
}

/// Term-by-term Fisher sum with decaying coupling `k0 e^{-gamma n}`:
/// `sum_{n=1}^N (4 tau_m M k0Ts n / pi)^2 e^{-2 gamma n} sin^2(phi n)`.
pub fn fisher_sum_exact(n: u64, m: usize, k0ts: f64, tau_m: f64, gamma: f64, phi: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::param("N", "must be at least 1"));
    }
    if !(gamma >= 0.0) {
        return Err(Error::param("gamma", "must be non-negative"));
    }
    let pre = (4.0 * tau_m * m as f64 * k0ts / PI).powi(2);
    // Neumaier summation keeps the running total exact to rounding.
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for i in 1..=n {
        let x = i as f64;
        let term = pre * x * x * (-2.0 * gamma * x).exp() * (phi * x).sin().powi(2);
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
    }
    Ok(sum + comp)
}

/// `(1 - e^{-2x}(1 + 2x(1 + x))) / x^3`, stable for small `x`.
fn decay_bracket(x: f64) -> f64 {
    if x < 0.05 {
        // Taylor series: c_k = -[x^{k+3}] e^{-2x}(1 + 2x + 2x^2).
        let coef = |n: i32| -> f64 {
            let term = |j: i32| -> f64 {
                if j < 0 {
                    return 0.0;
                }
                let mut f = 1.0;
                for i in 1..=j {
                    f *= -2.0 / i as f64;
                }
                f
            };
            term(n) + 2.0 * term(n - 1) + 2.0 * term(n - 2)
        };
        let mut acc = 0.0;
        let mut xp = 1.0;
        for k in 0..14 {
            acc -= coef(k + 3) * xp;
            xp *= x;
        }
        acc
    } else {
        (1.0 - (-2.0 * x).exp() * (1.0 + 2.0 * x * (1.0 + x))) / x.powi(3)
    }
}

/// Closed-form Fisher information and its small-`gamma N` expansion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClosedFormFisher {
    /// `(2 M^2 tau^2 k0Ts^2 / pi^2) (1 - e^{-2 gN}(1 + 2 gN (1 + gN))) / g^3`.
    pub value: f64,
    /// `(2 M^2 tau^2 k0Ts^2 / pi^2)(4N^3/3 - 2 g N^4 + 6 g^2 N^5 / 5)`, with
    /// the quadratic coefficient as commonly quoted; the exact Taylor
    /// coefficient is 8/5.
    pub expansion: f64,
    /// `gamma * N`; the expansion is trustworthy below about 0.6.
    pub gamma_n: f64,
    /// `M k0Ts`; the derivation assumes this is small.
    pub m_k0ts: f64,
}

/// Closed-form approximation of [`fisher_sum_exact`] averaged over the
/// `sin^2` oscillation. `gamma = 0` reduces to the `4 N^3 / 3` law.
pub fn fisher_closed_form(n: u64, m: usize, k0ts: f64, tau_m: f64, gamma: f64) -> Result<ClosedFormFisher> {
    if n == 0 {
        return Err(Error::param("N", "must be at least 1"));
    }
    if !(gamma >= 0.0) {
        return Err(Error::param("gamma", "must be non-negative"));
    }
    let nf = n as f64;
    let pre = 2.0 * (m as f64 * tau_m * k0ts / PI).powi(2);
    let x = gamma * nf;
    let value = pre * nf.powi(3) * decay_bracket(x);
    let expansion = pre
        * (4.0 * nf.powi(3) / 3.0 - 2.0 * gamma * nf.powi(4) + 8.0 * gamma * gamma * nf.powi(5) / 5.0);
    Ok(ClosedFormFisher {
        value,
        expansion,
        gamma_n: x,
        m_k0ts: m as f64 * k0ts,
    })
}

/// Field uncertainty bound in the `N^3` regime,
/// `sqrt(3 pi^2 hbar^2 / (8 mu_n^2 M^2 tau^2 k0Ts^2 N^3))`.
pub fn uncertainty_bound(n: u64, m: usize, k0ts: f64, tau_m: f64, c: &PhysicalConstants) -> Result<f64> {
    if n == 0 || m == 0 {
        return Err(Error::param("N", "N and M must be positive"));
    }
    positive("k0Ts", k0ts)?;
    positive("tau_m", tau_m)?;
    let den = 8.0 * (c.mu_n * m as f64 * tau_m * k0ts).powi(2) * (n as f64).powi(3);
    Ok((3.0 * PI * PI * c.hbar * c.hbar / den).sqrt())
}

/// Long-time Fisher information growth.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AsymptoticFisher {
    /// `sin^4(4 k0Ts / pi) / (16 (g_b + g_2)^3) * M^2 / 2 * tau^2 * N`.
    pub leading: f64,
    /// Leading value with the finite-coupling correction: `M^2/2` replaced
    /// by `cos(2 beta)^{2(M-1)} M^2 / 4`.
    pub corrected: f64,
}

pub fn fisher_asymptote(
    n: u64,
    m: usize,
    k0ts: f64,
    tau_m: f64,
    gamma_b: f64,
    gamma2: f64,
) -> Result<AsymptoticFisher> {
    let g = gamma_b + gamma2;
    if !(g > 0.0) {
        return Err(Error::param("gamma_b + gamma2", "must be positive"));
    }
    if m == 0 {
        return Err(Error::param("M", "must be positive"));
    }
    let mf = m as f64;
    let leading = (4.0 * k0ts / PI).sin().powi(4) / (16.0 * g.powi(3)) * mf * mf / 2.0
        * tau_m
        * tau_m
        * n as f64;
    let c2b = (2.0 * beta_from_k0ts(k0ts)).cos();
    let corrected = leading * c2b.powi(2 * (m as i32 - 1)) / 2.0;
    Ok(AsymptoticFisher { leading, corrected })
}

/// Optimal bare-sensor uncertainty, `sqrt(2 e hbar^2 / (mu_e^2 T2 T))`.
pub fn nv_alone_uncertainty(t2_nv: f64, t: f64, c: &PhysicalConstants) -> Result<f64> {
    positive("T2_nv", t2_nv)?;
    positive("T", t)?;
    Ok((2.0 * E * c.hbar * c.hbar / (c.mu_e * c.mu_e * t2_nv * t)).sqrt())
}

/// `27 / (4 e)`, the bare-sensor break-even prefactor.
pub fn crossover_prefactor() -> f64 {
    27.0 / (4.0 * E)
}

/// Smallest `M` for which the assisted sensor beats the bare one, given
/// `ratio = (mu_e / mu_n)^2 T2_nv / T2_n`.
pub fn crossover_m(ratio: f64) -> Result<f64> {
    positive("ratio", ratio)?;
    Ok((crossover_prefactor() * ratio).sqrt())
}

/// Cramér-Rao bound `1 / sqrt(I)`.
pub fn cramer_rao(fisher: f64) -> Result<f64> {
    positive("I", fisher)?;
    Ok(1.0 / fisher.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bracket_branches_join() {
        for x in [0.049_999, 0.05] {
            let series = {
                let mut acc = 0.0;
                let c = [4.0 / 3.0, -2.0, 8.0 / 5.0, -8.0 / 9.0, 8.0 / 21.0, -2.0 / 15.0];
                let mut xp = 1.0;
                for v in c {
                    acc += v * xp;
                    xp *= x;
                }
                acc
            };
            assert!((decay_bracket(x) - series).abs() < 1e-9);
        }
        assert!((decay_bracket(0.0) - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn closed_form_series_is_continuous() {
        let a = decay_bracket(0.05 - 1e-12);
        let b = decay_bracket(0.05 + 1e-12);
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn general_signal_rejects_bad_inputs() {
        assert!(signal_probability_general(&[0.1], &[], 1.0, 0.0).is_err());
        assert!(signal_probability_general(&[0.1], &[0.0], 1.5, 0.0).is_err());
    }
}
