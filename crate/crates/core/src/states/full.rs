//! Brute-force `2^M` representation. Every operator here is built from
//! single-spin factors, never from the collective Dicke machinery, so it can
//! serve as an independent reference for small registers.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Largest register the full-space representation accepts.
pub const MAX_FULL_SPINS: usize = 12;

/// State of `M` spins in the full tensor-product space. Spin 0 is the most
/// significant bit of the basis index; bit value 1 means spin down.
#[derive(Clone, Debug)]
pub enum FullState {
    Pure { spins: usize, amplitudes: Vec<C64> },
    Mixed { spins: usize, rho: DMatrix<C64> },
}

fn check_spins(m: usize) -> Result<()> {
    if m == 0 || m > MAX_FULL_SPINS {
        return Err(Error::param(
            "M",
            format!("full-space states need 1 <= M <= {MAX_FULL_SPINS}, got {m}"),
        ));
    }
    Ok(())
}

/// Applies `cos(t) I - i sin(t) sigma_x` to every spin of a vector.
fn rotate_all_x(amps: &mut [C64], m: usize, t: f64) {
    let (c, s) = (t.cos(), t.sin());
    let mis = C64::new(0.0, -s);
    for spin in 0..m {
        let bit = 1usize << (m - 1 - spin);
        for i in 0..amps.len() {
            if i & bit == 0 {
                let (a, b) = (amps[i], amps[i | bit]);
                amps[i] = a * c + b * mis;
                amps[i | bit] = b * c + a * mis;
            }
        }
    }
}

/// Kraus branch for sensor outcome `plus` (true) or minus, readout angle
/// `alpha`: `(A +/- e^{-i alpha} A^dagger) / 2` with
/// `A = exp(-i beta sum_m sigma_x^(m))`.
fn kraus_on_vector(amps: &[C64], m: usize, beta: f64, alpha: f64, plus: bool) -> Vec<C64> {
    let mut a = amps.to_vec();
    let mut b = amps.to_vec();
    rotate_all_x(&mut a, m, beta);
    rotate_all_x(&mut b, m, -beta);
    let sign = if plus { 1.0 } else { -1.0 };
    let w = C64::from_polar(sign, -alpha);
    a.iter().zip(&b).map(|(x, y)| (x + w * y) * 0.5).collect()
}

fn free_phase(m: usize, idx: usize, phi: f64) -> C64 {
    let jz = m as f64 / 2.0 - idx.count_ones() as f64;
    C64::from_polar(1.0, -phi * jz)
}

impl FullState {
    /// Product state with every spin along the Bloch vector `bloch`. Unit
    /// vectors give a pure state; shorter vectors a mixed one.
    pub fn product(m: usize, bloch: [f64; 3]) -> Result<FullState> {
        check_spins(m)?;
        let r = (bloch[0].powi(2) + bloch[1].powi(2) + bloch[2].powi(2)).sqrt();
        if r > 1.0 + 1e-12 {
            return Err(Error::param("initial_bloch", "norm exceeds 1"));
        }
        let single = DMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(0.5 * (1.0 + bloch[2]), 0.0),
                C64::new(0.5 * bloch[0], -0.5 * bloch[1]),
                C64::new(0.5 * bloch[0], 0.5 * bloch[1]),
                C64::new(0.5 * (1.0 - bloch[2]), 0.0),
            ],
        );
        if (r - 1.0).abs() < 1e-12 {
            let theta = bloch[2].clamp(-1.0, 1.0).acos();
            let az = bloch[1].atan2(bloch[0]);
            let up = C64::new((theta / 2.0).cos(), 0.0);
            let dn = C64::from_polar((theta / 2.0).sin(), az);
            let amps = (0..1usize << m)
                .map(|idx| {
                    let k = idx.count_ones() as i32;
                    up.powi(m as i32 - k) * dn.powi(k)
                })
                .collect();
            return Ok(FullState::Pure { spins: m, amplitudes: amps });
        }
        let mut rho = single.clone();
        for _ in 1..m {
            rho = rho.kronecker(&single);
        }
        Ok(FullState::Mixed { spins: m, rho })
    }

    pub fn plus_x(m: usize) -> Result<FullState> {
        FullState::product(m, [1.0, 0.0, 0.0])
    }

    pub fn spins(&self) -> usize {
        match self {
            FullState::Pure { spins, .. } | FullState::Mixed { spins, .. } => *spins,
        }
    }

    pub fn dim(&self) -> usize {
        1 << self.spins()
    }

    /// Density matrix of the state (copies for pure states).
    pub fn to_density(&self) -> DMatrix<C64> {
        match self {
            FullState::Pure { amplitudes, .. } => {
                let v = nalgebra::DVector::from_column_slice(amplitudes);
                &v * v.adjoint()
            }
            FullState::Mixed { rho, .. } => rho.clone(),
        }
    }

    /// Norm for pure states, trace for mixed ones.
    pub fn norm(&self) -> f64 {
        match self {
            FullState::Pure { amplitudes, .. } => {
                amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
            }
            FullState::Mixed { rho, .. } => rho.trace().re,
        }
    }

    /// `exp(-i phi sum_m sigma_z^(m) / 2)`.
    pub fn free_evolve(&mut self, phi: f64) {
        match self {
            FullState::Pure { spins, amplitudes } => {
                for (idx, a) in amplitudes.iter_mut().enumerate() {
                    *a *= free_phase(*spins, idx, phi);
                }
            }
            FullState::Mixed { spins, rho } => {
                let d = rho.nrows();
                for i in 0..d {
                    let pi = free_phase(*spins, i, phi);
                    for j in 0..d {
                        let pj = free_phase(*spins, j, phi).conj();
                        rho[(i, j)] *= pi * pj;
                    }
                }
            }
        }
    }

    /// Independent per-spin dephasing: every single-spin coherence is
    /// multiplied by `exp(-gamma2)`.
    pub fn dephase(&mut self, gamma2: f64) -> Result<()> {
        if gamma2 < 0.0 {
            return Err(Error::param("gamma2", "must be non-negative"));
        }
        if gamma2 == 0.0 {
            return Ok(());
        }
        if let FullState::Pure { .. } = self {
            *self = FullState::Mixed {
                spins: self.spins(),
                rho: self.to_density(),
            };
        }
        let FullState::Mixed { spins, rho } = self else { unreachable!() };
        let lambda: Vec<f64> = (0..=*spins).map(|h| (-gamma2 * h as f64).exp()).collect();
        let d = rho.nrows();
        for i in 0..d {
            for j in 0..d {
                rho[(i, j)] *= lambda[(i ^ j).count_ones() as usize];
            }
        }
        Ok(())
    }

    /// Unnormalized post-measurement state for one sensor outcome.
    pub fn apply_kraus(&self, beta: f64, alpha: f64, plus: bool) -> FullState {
        match self {
            FullState::Pure { spins, amplitudes } => FullState::Pure {
                spins: *spins,
                amplitudes: kraus_on_vector(amplitudes, *spins, beta, alpha, plus),
            },
            FullState::Mixed { spins, rho } => {
                let d = rho.nrows();
                // K rho, column by column.
                let mut left = DMatrix::zeros(d, d);
                for j in 0..d {
                    let col: Vec<C64> = rho.column(j).iter().copied().collect();
                    let out = kraus_on_vector(&col, *spins, beta, alpha, plus);
                    left.set_column(j, &nalgebra::DVector::from_vec(out));
                }
                // (K (K rho)^dagger)^dagger = K rho K^dagger.
                let adj = left.adjoint();
                let mut out = DMatrix::zeros(d, d);
                for j in 0..d {
                    let col: Vec<C64> = adj.column(j).iter().copied().collect();
                    let v = kraus_on_vector(&col, *spins, beta, alpha, plus);
                    out.set_column(j, &nalgebra::DVector::from_vec(v));
                }
                FullState::Mixed {
                    spins: *spins,
                    rho: out.adjoint(),
                }
            }
        }
    }

    /// Probability of the given outcome without collapsing.
    pub fn outcome_probability(&self, beta: f64, alpha: f64, plus: bool) -> f64 {
        self.apply_kraus(beta, alpha, plus).norm_weight()
    }

    /// Squared norm (pure) or trace (mixed): the weight of an unnormalized state.
    pub fn norm_weight(&self) -> f64 {
        match self {
            FullState::Pure { amplitudes, .. } => amplitudes.iter().map(|a| a.norm_sqr()).sum(),
            FullState::Mixed { rho, .. } => rho.trace().re,
        }
    }

    pub fn scale(&mut self, weight: f64) {
        match self {
            FullState::Pure { amplitudes, .. } => {
                let s = 1.0 / weight.sqrt();
                amplitudes.iter_mut().for_each(|a| *a *= s);
            }
            FullState::Mixed { rho, .. } => {
                *rho /= C64::new(weight, 0.0);
            }
        }
    }

    /// Expectation of `sigma_x` on one spin.
    pub fn sigma_x(&self, spin: usize) -> f64 {
        let m = self.spins();
        let bit = 1usize << (m - 1 - spin);
        let rho = self.to_density();
        (0..self.dim()).map(|i| rho[(i ^ bit, i)].re).sum()
    }

    /// Singular values of the pure state reshaped across the cut after the
    /// first `m1` spins, in descending order.
    pub fn bipartite_singular_values(&self, m1: usize) -> Result<Vec<f64>> {
        let FullState::Pure { spins, amplitudes } = self else {
            return Err(Error::param("state", "Schmidt decomposition needs a pure state"));
        };
        if m1 == 0 || m1 >= *spins {
            return Err(Error::param("split", "both parts need at least one spin"));
        }
        let cols = 1usize << (spins - m1);
        let rows = 1usize << m1;
        let mat = DMatrix::from_fn(rows, cols, |r, c| amplitudes[r * cols + c]);
        let mut sv: Vec<f64> = mat.singular_values().iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        Ok(sv)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kraus_completeness_in_full_space() {
        let s = FullState::product(3, [0.3, 0.4, (1.0f64 - 0.25).sqrt()]).unwrap();
        for &(beta, alpha) in &[(0.1, std::f64::consts::FRAC_PI_2), (0.7, 0.3)] {
            let p = s.outcome_probability(beta, alpha, true);
            let q = s.outcome_probability(beta, alpha, false);
            assert!((p + q - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn mixed_and_pure_kraus_agree() {
        let pure = FullState::plus_x(3).unwrap();
        let mixed = FullState::Mixed {
            spins: 3,
            rho: pure.to_density(),
        };
        let a = pure.apply_kraus(0.2, 1.0, false).to_density();
        let b = mixed.apply_kraus(0.2, 1.0, false).to_density();
        assert!((a - b).camax() < 1e-13);
    }

    #[test]
    fn dephasing_decays_single_spin_coherence() {
        let mut s = FullState::plus_x(2).unwrap();
        s.dephase(0.3).unwrap();
        assert!((s.sigma_x(0) - (-0.3f64).exp()).abs() < 1e-13);
        assert!((s.norm() - 1.0).abs() < 1e-13);
        assert!(s.dephase(-1.0).is_err());
    }

    #[test]
    fn unpolarized_product_is_maximally_mixed() {
        let s = FullState::product(3, [0.0; 3]).unwrap();
        let rho = s.to_density();
        let id = DMatrix::<C64>::identity(8, 8) / C64::new(8.0, 0.0);
        assert!((rho - id).camax() < 1e-15);
    }
}
