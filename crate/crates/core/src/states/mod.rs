//! Representations of the auxiliary-spin register.
//!
//! The workhorse is [`DickeVector`], a pure state of `M` spin-1/2 particles
//! restricted to the permutation-symmetric subspace (dimension `M + 1`).
//! [`GroupedState`] covers registers made of several symmetric groups,
//! [`SymmetricDensity`] covers permutation-invariant mixed states (needed for
//! per-spin dephasing and unpolarized initial states), and [`FullState`] is the
//! brute-force `2^M` representation used as an oracle for small `M`.
//!
//! Dicke levels are labelled by the excitation number `k = 0..=M`; level `k`
//! has collective `Jz = M/2 - k`, so `k = 0` is the all-up state.

mod full;
mod grouped;
mod invariant;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub use full::{FullState, MAX_FULL_SPINS};
pub use grouped::GroupedState;
pub use invariant::{LocalDephasing, SymmetricDensity};

/// Tolerance on the Euclidean norm of a state that claims to be normalized.
pub const NORM_TOLERANCE: f64 = 1e-10;

/// One permutation-symmetric group of auxiliary spins.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinGroup {
    pub size: usize,
    /// Initial single-spin Bloch vector; a norm below one encodes partial
    /// polarization.
    pub initial_bloch: [f64; 3],
    /// Effective coupling of every spin in the group (radians per measurement).
    pub beta: f64,
    /// Phase of the transverse coupling axis in the x-y plane.
    pub phi0: f64,
}

/// Layout of the auxiliary spins: how many, how they start, how they couple.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinEnsembleSpec {
    pub groups: Vec<SpinGroup>,
}

impl SpinEnsembleSpec {
    /// `m` identical spins with coupling `beta`, all starting along `bloch`.
    pub fn homogeneous(m: usize, beta: f64, bloch: [f64; 3]) -> Self {
        SpinEnsembleSpec {
            groups: vec![SpinGroup {
                size: m,
                initial_bloch: bloch,
                beta,
                phi0: 0.0,
            }],
        }
    }

    pub fn total_spins(&self) -> usize {
        self.groups.iter().map(|g| g.size).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.groups.is_empty() {
            return Err(Error::param("ensemble", "at least one group is required"));
        }
        for (i, g) in self.groups.iter().enumerate() {
            if g.size == 0 {
                return Err(Error::param(format!("ensemble.groups[{i}].size"), "must be positive"));
            }
            let norm = bloch_norm(g.initial_bloch);
            if !(norm <= 1.0 + 1e-12) || !norm.is_finite() {
                return Err(Error::param(
                    format!("ensemble.groups[{i}].initial_bloch"),
                    format!("norm {norm} exceeds 1"),
                ));
            }
            if !g.beta.is_finite() || !g.phi0.is_finite() {
                return Err(Error::param(format!("ensemble.groups[{i}]"), "non-finite coupling"));
            }
        }
        Ok(())
    }

    /// True when every group shares the same coupling, axis phase and initial
    /// Bloch vector, i.e. the whole register is one symmetric group.
    pub fn is_homogeneous(&self) -> bool {
        let first = &self.groups[0];
        self.groups.iter().all(|g| {
            g.beta == first.beta && g.phi0 == first.phi0 && g.initial_bloch == first.initial_bloch
        })
    }

    /// True when every spin starts in a pure state.
    pub fn is_pure(&self) -> bool {
        self.groups
            .iter()
            .all(|g| (bloch_norm(g.initial_bloch) - 1.0).abs() < 1e-12)
    }
}

pub(crate) fn bloch_norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// `ln(n!)` for `n = 0..=max`.
pub(crate) fn ln_factorials(max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(max + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..=max {
        acc += (i as f64).ln();
        out.push(acc);
    }
    out
}

/// `ln C(n, k)` from a factorial table covering `n`.
#[inline]
pub(crate) fn ln_binomial(lf: &[f64], n: usize, k: usize) -> f64 {
    debug_assert!(k <= n);
    lf[n] - lf[k] - lf[n - k]
}

/// Pure state of `M` spins in the symmetric (Dicke) subspace, Jz basis.
#[derive(Clone, Debug, PartialEq)]
pub struct DickeVector {
    amplitudes: Vec<C64>,
}

impl DickeVector {
    /// Wraps amplitudes that must already be normalized.
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() < 2 {
            return Err(Error::param("M", "a Dicke vector needs M >= 1"));
        }
        let v = DickeVector { amplitudes };
        let norm = v.norm();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::NormDrift {
                norm,
                tolerance: NORM_TOLERANCE,
            });
        }
        Ok(v)
    }

    /// Normalizes arbitrary non-zero amplitudes.
    pub fn from_unnormalized(mut amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() < 2 {
            return Err(Error::param("M", "a Dicke vector needs M >= 1"));
        }
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::param("amplitudes", "zero or non-finite vector"));
        }
        amplitudes.iter_mut().for_each(|a| *a /= norm);
        Ok(DickeVector { amplitudes })
    }

    /// The Jz eigenstate with `k` spins flipped down.
    pub fn level(m: usize, k: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::param("M", "must be positive"));
        }
        if k > m {
            return Err(Error::param("k", format!("level {k} exceeds M = {m}")));
        }
        let mut amps = vec![C64::new(0.0, 0.0); m + 1];
        amps[k] = C64::new(1.0, 0.0);
        Ok(DickeVector { amplitudes: amps })
    }

    /// Spin-coherent state: every spin points along the unit vector `dir`.
    pub fn coherent(m: usize, dir: [f64; 3]) -> Result<Self> {
        if m == 0 {
            return Err(Error::param("M", "must be positive"));
        }
        let norm = bloch_norm(dir);
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::param("initial_bloch", "coherent states need a unit Bloch vector"));
        }
        let theta = dir[2].clamp(-1.0, 1.0).acos();
        let azimuth = dir[1].atan2(dir[0]);
        let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
        let lf = ln_factorials(m);
        let amps = (0..=m)
            .map(|k| {
                let mag = if (k < m && c == 0.0) || (k > 0 && s == 0.0) {
                    0.0
                } else {
                    let lc = if m - k > 0 { (m - k) as f64 * c.ln() } else { 0.0 };
                    let ls = if k > 0 { k as f64 * s.ln() } else { 0.0 };
                    (0.5 * ln_binomial(&lf, m, k) + lc + ls).exp()
                };
                C64::from_polar(mag, k as f64 * azimuth)
            })
            .collect();
        DickeVector::from_unnormalized(amps)
    }

    /// `|+x>^M`, the protocol's default initial state.
    pub fn plus_x(m: usize) -> Result<Self> {
        DickeVector::coherent(m, [1.0, 0.0, 0.0])
    }

    pub fn spins(&self) -> usize {
        self.amplitudes.len() - 1
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Applies `exp(-i angle Jz)`.
    pub fn rotate_z(&self, angle: f64) -> DickeVector {
        let m = self.spins() as f64;
        let amplitudes = self
            .amplitudes
            .iter()
            .enumerate()
            .map(|(k, a)| a * C64::from_polar(1.0, -angle * (m / 2.0 - k as f64)))
            .collect();
        DickeVector { amplitudes }
    }

    /// Expectation value of an `(M+1) x (M+1)` operator.
    pub fn expectation(&self, op: &DMatrix<C64>) -> C64 {
        let n = self.amplitudes.len();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            let mut row = C64::new(0.0, 0.0);
            for j in 0..n {
                row += op[(i, j)] * self.amplitudes[j];
            }
            acc += self.amplitudes[i].conj() * row;
        }
        acc
    }

    /// Applies an operator and returns the raw (unnormalized) amplitudes.
    pub fn apply(&self, op: &DMatrix<C64>) -> Vec<C64> {
        let n = self.amplitudes.len();
        (0..n)
            .map(|i| (0..n).map(|j| op[(i, j)] * self.amplitudes[j]).sum())
            .collect()
    }
}

/// Collective spin matrices for `J = M/2` in the Jz eigenbasis.
#[derive(Clone, Debug)]
pub struct CollectiveOperators {
    pub jx: DMatrix<C64>,
    pub jy: DMatrix<C64>,
    pub jz: DMatrix<C64>,
}

/// Real symmetric `Jx` for the spin-`j2/2` irrep, Jz basis ordered from the
/// top weight down.
pub(crate) fn jx_real(j2: usize) -> DMatrix<f64> {
    let d = j2 + 1;
    let mut jx = DMatrix::zeros(d, d);
    for k in 1..d {
        let c = 0.5 * ((k * (j2 + 1 - k)) as f64).sqrt();
        jx[(k - 1, k)] = c;
        jx[(k, k - 1)] = c;
    }
    jx
}

/// `exp(-i theta Jx)` for spin `j2/2`, from the eigendecomposition of `Jx`.
pub(crate) fn rotation_x(j2: usize, theta: f64) -> DMatrix<C64> {
    let d = j2 + 1;
    if d == 1 || theta == 0.0 {
        return DMatrix::identity(d, d);
    }
    let eig = SymmetricEigen::new(jx_real(j2));
    let v = &eig.eigenvectors;
    let mut out = DMatrix::zeros(d, d);
    for (l, &lambda) in eig.eigenvalues.iter().enumerate() {
        let ph = C64::from_polar(1.0, -theta * lambda);
        for i in 0..d {
            let vil = v[(i, l)] * ph;
            for j in 0..d {
                out[(i, j)] += vil * v[(j, l)];
            }
        }
    }
    out
}

/// Standard angular-momentum matrices for `J = M/2`.
pub fn collective_operators(m: usize) -> Result<CollectiveOperators> {
    if m == 0 {
        return Err(Error::param("M", "must be positive"));
    }
    let d = m + 1;
    let jx = jx_real(m).map(|x| C64::new(x, 0.0));
    let mut jy = DMatrix::zeros(d, d);
    let mut jz = DMatrix::zeros(d, d);
    for k in 0..d {
        jz[(k, k)] = C64::new(m as f64 / 2.0 - k as f64, 0.0);
    }
    for k in 1..d {
        let c = 0.5 * ((k * (m + 1 - k)) as f64).sqrt();
        jy[(k - 1, k)] = C64::new(0.0, -c);
        jy[(k, k - 1)] = C64::new(0.0, c);
    }
    Ok(CollectiveOperators { jx, jy, jz })
}

/// Embeds a Dicke vector into the full `2^M` space. Spin 0 is the most
/// significant bit; bit value 1 means spin down.
pub fn dicke_to_full(state: &DickeVector) -> Result<FullState> {
    let m = state.spins();
    if m > MAX_FULL_SPINS {
        return Err(Error::param(
            "M",
            format!("full-space expansion limited to M <= {MAX_FULL_SPINS}, got {m}"),
        ));
    }
    let lf = ln_factorials(m);
    let scale: Vec<f64> = (0..=m)
        .map(|k| (-0.5 * ln_binomial(&lf, m, k)).exp())
        .collect();
    let amps = (0..1usize << m)
        .map(|idx| {
            let k = idx.count_ones() as usize;
            state.amplitudes()[k] * scale[k]
        })
        .collect();
    Ok(FullState::Pure { spins: m, amplitudes: amps })
}

/// Coefficient matrix of a Dicke vector split into symmetric blocks of `m1`
/// and `m2` spins: `c[k1][k2] = a[k1+k2] sqrt(C(m1,k1) C(m2,k2) / C(M,k1+k2))`.
pub fn bipartite_expand(state: &DickeVector, m1: usize, m2: usize) -> Result<DMatrix<C64>> {
    let m = state.spins();
    if m1 == 0 || m2 == 0 || m1 + m2 != m {
        return Err(Error::param(
            "split",
            format!("partition {m1}|{m2} is invalid for M = {m}"),
        ));
    }
    let lf = ln_factorials(m);
    let a = state.amplitudes();
    Ok(DMatrix::from_fn(m1 + 1, m2 + 1, |k1, k2| {
        let k = k1 + k2;
        let w = 0.5
            * (ln_binomial(&lf, m1, k1) + ln_binomial(&lf, m2, k2) - ln_binomial(&lf, m, k));
        a[k] * w.exp()
    }))
}
