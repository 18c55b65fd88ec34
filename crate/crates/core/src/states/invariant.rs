//! Permutation-invariant mixed states of `M` spin-1/2 particles.
//!
//! Any operator commuting with all spin permutations decomposes as
//! `sum_J rho_J (x) 1_{mult(J)}` over total-spin sectors `J = M/2, M/2 - 1, ...`.
//! Collective operations act on each `rho_J` as the spin-`J` irrep and leave
//! the multiplicity factor alone, so the state is stored as one
//! `(2J+1) x (2J+1)` block per sector. Blocks carry their sector weight
//! (`mult(J) * rho_J`), so the trace is the plain sum of block traces.
//!
//! Independent single-spin dephasing is not collective but still preserves
//! permutation invariance; [`LocalDephasing`] implements it exactly as a map
//! that mixes neighbouring sectors while conserving the magnetic labels.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;

use super::{bloch_norm, ln_binomial, ln_factorials, rotation_x, DickeVector};
use crate::error::{Error, Result};

/// `ln mult(J)` for `n` spins, with `j2 = 2J`. `None` when the sector is empty.
fn ln_multiplicity(lf: &[f64], n: usize, j2: usize) -> Option<f64> {
    if j2 > n || !(n - j2).is_multiple_of(2) {
        return None;
    }
    let a = (n - j2) / 2;
    Some(ln_binomial(lf, n, a) + ((j2 + 1) as f64).ln() - ((n - a + 1) as f64).ln())
}

/// Permutation-invariant density matrix, one weighted block per total-spin
/// sector. Block `b` holds `J = M/2 - b` and has dimension `M - 2b + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricDensity {
    spins: usize,
    blocks: Vec<Vec<C64>>,
}

impl SymmetricDensity {
    fn zeros(m: usize) -> Self {
        let blocks = (0..=m / 2)
            .map(|b| {
                let d = m - 2 * b + 1;
                vec![C64::new(0.0, 0.0); d * d]
            })
            .collect();
        SymmetricDensity { spins: m, blocks }
    }

    /// Pure symmetric state: everything sits in the top sector.
    pub fn from_pure(state: &DickeVector) -> Self {
        let m = state.spins();
        let mut out = SymmetricDensity::zeros(m);
        let a = state.amplitudes();
        let d = m + 1;
        for i in 0..d {
            for j in 0..d {
                out.blocks[0][i * d + j] = a[i] * a[j].conj();
            }
        }
        out
    }

    /// `rho_1^{(x) M}` for a single-spin Bloch vector of norm `<= 1`.
    pub fn product(m: usize, bloch: [f64; 3]) -> Result<Self> {
        if m == 0 {
            return Err(Error::param("M", "must be positive"));
        }
        let r = bloch_norm(bloch);
        if r > 1.0 + 1e-12 {
            return Err(Error::param("initial_bloch", "norm exceeds 1"));
        }
        let r = r.min(1.0);
        let (theta, azimuth) = if r > 0.0 {
            ((bloch[2] / r).clamp(-1.0, 1.0).acos(), bloch[1].atan2(bloch[0]))
        } else {
            (0.0, 0.0)
        };
        let (p, q) = ((1.0 + r) / 2.0, (1.0 - r) / 2.0);
        let lf = ln_factorials(m);
        let mut out = SymmetricDensity::zeros(m);
        for b in 0..out.blocks.len() {
            let j2 = m - 2 * b;
            let d = j2 + 1;
            let lmult = ln_multiplicity(&lf, m, j2).expect("sector exists");
            // Weights along the polarization axis; row k has 2m = j2 - 2k.
            let w: Vec<f64> = (0..d)
                .map(|k| {
                    let n_up = (m + j2) / 2 - k;
                    let n_dn = m - n_up;
                    if (n_dn > 0 && q == 0.0) || (n_up > 0 && p == 0.0) {
                        return 0.0;
                    }
                    let lp = if n_up > 0 { n_up as f64 * p.ln() } else { 0.0 };
                    let lq = if n_dn > 0 { n_dn as f64 * q.ln() } else { 0.0 };
                    (lmult + lp + lq).exp()
                })
                .collect();
            // Rotation taking z to the polarization axis:
            // exp(-i az Jz) exp(-i theta Jy), with
            // exp(-i theta Jy) = Z(pi/2) exp(-i theta Jx) Z(pi/2)^dagger.
            let rx = rotation_x(j2, theta);
            let zph = |k: usize, a: f64| C64::from_polar(1.0, -a * (j2 as f64 / 2.0 - k as f64));
            let rot = DMatrix::from_fn(d, d, |i, j| {
                zph(i, azimuth) * zph(i, std::f64::consts::FRAC_PI_2)
                    * rx[(i, j)]
                    * zph(j, std::f64::consts::FRAC_PI_2).conj()
            });
            for i in 0..d {
                for j in 0..d {
                    let mut acc = C64::new(0.0, 0.0);
                    for k in 0..d {
                        acc += rot[(i, k)] * w[k] * rot[(j, k)].conj();
                    }
                    out.blocks[b][i * d + j] = acc;
                }
            }
        }
        Ok(out)
    }

    pub fn maximally_mixed(m: usize) -> Result<Self> {
        SymmetricDensity::product(m, [0.0; 3])
    }

    pub fn spins(&self) -> usize {
        self.spins
    }

    /// Number of total-spin sectors.
    pub fn sectors(&self) -> usize {
        self.blocks.len()
    }

    /// Twice the total spin of sector `b`.
    pub fn sector_spin2(&self, b: usize) -> usize {
        self.spins - 2 * b
    }

    pub fn block(&self, b: usize) -> &[C64] {
        &self.blocks[b]
    }

    pub fn block_mut(&mut self, b: usize) -> &mut [C64] {
        &mut self.blocks[b]
    }

    pub fn trace(&self) -> f64 {
        self.blocks
            .iter()
            .map(|blk| {
                let d = (blk.len() as f64).sqrt() as usize;
                (0..d).map(|i| blk[i * d + i].re).sum::<f64>()
            })
            .sum()
    }

    /// Probability weight of each sector.
    pub fn sector_weights(&self) -> Vec<f64> {
        self.blocks
            .iter()
            .map(|blk| {
                let d = (blk.len() as f64).sqrt() as usize;
                (0..d).map(|i| blk[i * d + i].re).sum::<f64>()
            })
            .collect()
    }

    /// `Tr[rho O]` for a collective operator given as one block per sector.
    pub fn expectation(&self, ops: &[DMatrix<C64>]) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (blk, op) in self.blocks.iter().zip(ops) {
            let d = op.nrows();
            for i in 0..d {
                for j in 0..d {
                    acc += op[(i, j)] * blk[j * d + i];
                }
            }
        }
        acc
    }

    pub fn scale(&mut self, factor: f64) {
        for blk in &mut self.blocks {
            blk.iter_mut().for_each(|x| *x *= factor);
        }
    }
}

/// Single-spin `sigma_z`-coupling coefficient between the coupled states
/// `|J m; J_r>` and `|J' m; J_r>` of one spin-1/2 and a spin-`J_r` rest.
fn sigma_z_coupling(jr2: usize, j2: usize, jp2: usize, m2: i64) -> f64 {
    let jr = jr2 as i64;
    let denom = (jr + 1) as f64;
    if j2 == jp2 {
        if j2 == jr2 + 1 {
            m2 as f64 / denom
        } else {
            -(m2 as f64) / denom
        }
    } else {
        let a = (jr + m2 + 1) as f64;
        let b = (jr - m2 + 1) as f64;
        if a <= 0.0 || b <= 0.0 {
            0.0
        } else {
            -(a * b).sqrt() / denom
        }
    }
}

/// Exact per-step channel for independent dephasing of every spin, acting on
/// [`SymmetricDensity`]. Every single-spin coherence decays by `exp(-gamma2)`.
#[derive(Clone, Debug)]
pub struct LocalDephasing {
    spins: usize,
    gamma2: f64,
    /// Transfer matrices indexed by the top-sector position `(r0, c0)`.
    transfer: Vec<Vec<f64>>,
}

impl LocalDephasing {
    pub fn new(m: usize, gamma2: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::param("M", "must be positive"));
        }
        if !(gamma2 >= 0.0) || !gamma2.is_finite() {
            return Err(Error::param("gamma2", "must be finite and non-negative"));
        }
        let lf = ln_factorials(m);
        let kappa = gamma2 / 2.0;
        let d0 = m + 1;
        let mut transfer = Vec::with_capacity(d0 * d0);
        for r0 in 0..d0 {
            for c0 in 0..d0 {
                let len = r0.min(c0).min(m - r0).min(m - c0) + 1;
                let m2r = m as i64 - 2 * r0 as i64;
                let m2c = m as i64 - 2 * c0 as i64;
                let j2s: Vec<usize> = (0..len).map(|b| m - 2 * b).collect();
                let mut gen = DMatrix::<f64>::zeros(len, len);
                for (bi, &j2) in j2s.iter().enumerate() {
                    for (bo, &jp2) in j2s.iter().enumerate() {
                        if j2.abs_diff(jp2) > 2 {
                            continue;
                        }
                        let mut acc = 0.0;
                        for jr2 in [j2 as i64 - 1, j2 as i64 + 1] {
                            if jr2 < 0 || jr2 as usize > m - 1 {
                                continue;
                            }
                            let jr2 = jr2 as usize;
                            if jp2.abs_diff(jr2) != 1 {
                                continue;
                            }
                            let Some(lr) = ln_multiplicity(&lf, m - 1, jr2) else { continue };
                            let lj = ln_multiplicity(&lf, m, j2).unwrap();
                            let ljp = ln_multiplicity(&lf, m, jp2).unwrap();
                            let w = (lr - 0.5 * lj - 0.5 * ljp).exp();
                            acc += sigma_z_coupling(jr2, j2, jp2, m2r)
                                * sigma_z_coupling(jr2, j2, jp2, m2c)
                                * w;
                        }
                        gen[(bo, bi)] = m as f64 * acc;
                    }
                }
                let eig = SymmetricEigen::new(gen);
                let v = &eig.eigenvectors;
                let mut t = vec![0.0; len * len];
                for bo in 0..len {
                    for bi in 0..len {
                        let mut e = 0.0;
                        for (l, &lam) in eig.eigenvalues.iter().enumerate() {
                            e += v[(bo, l)] * (kappa * (lam - m as f64)).exp() * v[(bi, l)];
                        }
                        let ratio = 0.5
                            * (ln_multiplicity(&lf, m, j2s[bo]).unwrap()
                                - ln_multiplicity(&lf, m, j2s[bi]).unwrap());
                        t[bo * len + bi] = e * ratio.exp();
                    }
                }
                transfer.push(t);
            }
        }
        Ok(LocalDephasing { spins: m, gamma2, transfer })
    }

    pub fn gamma2(&self) -> f64 {
        self.gamma2
    }

    /// Applies one step of the channel in place.
    pub fn apply(&self, state: &mut SymmetricDensity) {
        debug_assert_eq!(state.spins, self.spins);
        if self.gamma2 == 0.0 {
            return;
        }
        let m = self.spins;
        let d0 = m + 1;
        let mut gathered = [C64::new(0.0, 0.0); 64];
        let mut heap;
        for r0 in 0..d0 {
            for c0 in 0..d0 {
                let len = r0.min(c0).min(m - r0).min(m - c0) + 1;
                if len == 1 && self.transfer[r0 * d0 + c0][0] == 1.0 {
                    continue;
                }
                let buf: &mut [C64] = if len <= gathered.len() {
                    &mut gathered[..len]
                } else {
                    heap = vec![C64::new(0.0, 0.0); len];
                    &mut heap[..]
                };
                for (b, slot) in buf.iter_mut().enumerate() {
                    let d = m - 2 * b + 1;
                    *slot = state.blocks[b][(r0 - b) * d + (c0 - b)];
                }
                let t = &self.transfer[r0 * d0 + c0];
                for bo in 0..len {
                    let mut acc = C64::new(0.0, 0.0);
                    for bi in 0..len {
                        acc += buf[bi] * t[bo * len + bi];
                    }
                    let d = m - 2 * bo + 1;
                    state.blocks[bo][(r0 - bo) * d + (c0 - bo)] = acc;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multiplicities_count_all_states() {
        let lf = ln_factorials(12);
        for m in 1..=12usize {
            let total: f64 = (0..=m / 2)
                .map(|b| {
                    let j2 = m - 2 * b;
                    ln_multiplicity(&lf, m, j2).unwrap().exp() * (j2 + 1) as f64
                })
                .sum();
            assert!((total - 2f64.powi(m as i32)).abs() < 1e-6, "M = {m}");
        }
    }

    #[test]
    fn product_states_have_unit_trace() {
        for m in 1..=9 {
            for bloch in [[1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.2, -0.3, 0.5]] {
                let s = SymmetricDensity::product(m, bloch).unwrap();
                assert!((s.trace() - 1.0).abs() < 1e-12, "M = {m}");
            }
        }
    }

    #[test]
    fn pure_product_matches_coherent_state() {
        let m = 5;
        let a = SymmetricDensity::product(m, [0.0, 1.0, 0.0]).unwrap();
        let b = SymmetricDensity::from_pure(&DickeVector::coherent(m, [0.0, 1.0, 0.0]).unwrap());
        for s in 0..a.sectors() {
            for (x, y) in a.block(s).iter().zip(b.block(s)) {
                assert!((x - y).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn dephasing_preserves_trace() {
        let m = 6;
        let mut s = SymmetricDensity::product(m, [0.7, 0.1, 0.2]).unwrap();
        let ch = LocalDephasing::new(m, 0.05).unwrap();
        for _ in 0..20 {
            ch.apply(&mut s);
        }
        assert!((s.trace() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn negative_rate_rejected() {
        assert!(LocalDephasing::new(3, -0.1).is_err());
    }

    #[test]
    fn single_spin_dephasing_is_exponential() {
        let mut s = SymmetricDensity::product(1, [1.0, 0.0, 0.0]).unwrap();
        let ch = LocalDephasing::new(1, 0.2).unwrap();
        ch.apply(&mut s);
        // rho_01 = <sigma_x>/2
        assert!((s.block(0)[1].re - 0.5 * (-0.2f64).exp()).abs() < 1e-14);
    }
}
