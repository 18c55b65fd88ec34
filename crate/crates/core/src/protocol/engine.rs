//! Step kernels for the three register representations.
//!
//! A step is split in two: [`Engine::prepare`] applies free evolution and
//! dephasing and returns `p_+`; [`Engine::collapse`] applies the Kraus branch
//! for the chosen outcome, renormalizes, and returns that branch's weight.
//!
//! The pure engines work in the gauge `psi~ = D^dagger psi` with
//! `D = diag(i^k)`. There `D^dagger Jx D = -Jy`, so `A = exp(-i 2 beta Jx)`
//! becomes the real orthogonal `R = exp(i 2 beta Jy)` and `A^dagger` becomes
//! `R^T`; both branches then cost two real matrix-vector products.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use super::{free_evolution, ProtocolParams, StateSnapshot};
use crate::error::{Error, Result};
use crate::states::{rotation_x, DickeVector, GroupedState, LocalDephasing, SymmetricDensity};

pub(crate) trait Engine {
    /// Free precession, a collective kick of `kick` radians, dephasing.
    /// Returns the probability of outcome `+`.
    fn prepare(&mut self, kick: f64) -> f64;
    /// Projects on the outcome and returns its (pre-normalization) weight.
    fn collapse(&mut self, plus: bool) -> f64;
    fn snapshot(&self) -> StateSnapshot;
}

/// `(-i)^k` and its inverse `i^k`.
fn gauge(k: usize) -> C64 {
    match k % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, -1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, 1.0),
    }
}

/// The gauged rotation `R` for spin `j2/2`, row-major.
pub(crate) fn real_rotation(j2: usize, beta: f64) -> Vec<f64> {
    let a = rotation_x(j2, 2.0 * beta);
    let d = j2 + 1;
    let mut out = vec![0.0; d * d];
    let mut residue = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            // D^dagger A D: entry (i, j) picks up (-i)^i i^j.
            let v = a[(i, j)] * gauge(i) * gauge(j).conj();
            residue = residue.max(v.im.abs());
            out[i * d + j] = v.re;
        }
    }
    debug_assert!(residue < 1e-9, "gauge residue {residue}");
    out
}

fn transpose(r: &[f64], d: usize) -> Vec<f64> {
    let mut t = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            t[j * d + i] = r[i * d + j];
        }
    }
    t
}

/// Phase factors `exp(-i phi jz_k)` for `k = 0..=m`.
fn phases(m: usize, phi: f64) -> (Vec<f64>, Vec<f64>) {
    free_evolution(m, phi).into_iter().map(|c| (c.re, c.im)).unzip()
}

/// Pure symmetric register, split re/im storage in the real gauge.
pub(crate) struct DickeEngine {
    m: usize,
    re: Vec<f64>,
    im: Vec<f64>,
    a_re: Vec<f64>,
    a_im: Vec<f64>,
    b_re: Vec<f64>,
    b_im: Vec<f64>,
    /// `R` row-major: row `j` of `R` is column `j` of `R^T`.
    r: Vec<f64>,
    /// `R^T` row-major: row `j` is column `j` of `R`.
    rt: Vec<f64>,
    ph_re: Vec<f64>,
    ph_im: Vec<f64>,
    w: C64,
    p_plus: f64,
}

impl DickeEngine {
    pub(crate) fn new(state: &DickeVector, beta: f64, phi: f64, alpha: f64) -> Self {
        let m = state.spins();
        let d = m + 1;
        let (re, im) = state
            .amplitudes()
            .iter()
            .enumerate()
            .map(|(k, a)| {
                let g = a * gauge(k);
                (g.re, g.im)
            })
            .unzip();
        let r = real_rotation(m, beta);
        let rt = transpose(&r, d);
        let (ph_re, ph_im) = phases(m, phi);
        DickeEngine {
            m,
            re,
            im,
            a_re: vec![0.0; d],
            a_im: vec![0.0; d],
            b_re: vec![0.0; d],
            b_im: vec![0.0; d],
            r,
            rt,
            ph_re,
            ph_im,
            w: C64::from_polar(1.0, -alpha),
            p_plus: 0.5,
        }
    }

    pub(crate) fn state(&self) -> DickeVector {
        let amps: Vec<C64> = self
            .re
            .iter()
            .zip(&self.im)
            .enumerate()
            .map(|(k, (&r, &i))| C64::new(r, i) * gauge(k).conj())
            .collect();
        DickeVector::from_unnormalized(amps).expect("register is never empty")
    }
}

impl Engine for DickeEngine {
    fn prepare(&mut self, kick: f64) -> f64 {
        let d = self.m + 1;
        if kick == 0.0 {
            for k in 0..d {
                let (x, y) = (self.re[k], self.im[k]);
                let (c, s) = (self.ph_re[k], self.ph_im[k]);
                self.re[k] = x * c - y * s;
                self.im[k] = x * s + y * c;
            }
        } else {
            let half = self.m as f64 / 2.0;
            for k in 0..d {
                let extra = C64::from_polar(1.0, -kick * (half - k as f64));
                let z = C64::new(self.re[k], self.im[k])
                    * C64::new(self.ph_re[k], self.ph_im[k])
                    * extra;
                self.re[k] = z.re;
                self.im[k] = z.im;
            }
        }
        self.a_re.iter_mut().for_each(|x| *x = 0.0);
        self.a_im.iter_mut().for_each(|x| *x = 0.0);
        self.b_re.iter_mut().for_each(|x| *x = 0.0);
        self.b_im.iter_mut().for_each(|x| *x = 0.0);
        for j in 0..d {
            let (xr, xi) = (self.re[j], self.im[j]);
            let col_a = &self.rt[j * d..(j + 1) * d];
            let col_b = &self.r[j * d..(j + 1) * d];
            for i in 0..d {
                self.a_re[i] += xr * col_a[i];
                self.a_im[i] += xi * col_a[i];
                self.b_re[i] += xr * col_b[i];
                self.b_im[i] += xi * col_b[i];
            }
        }
        // <a, b> = sum conj(a) b
        let mut ov_re = 0.0;
        let mut ov_im = 0.0;
        for i in 0..d {
            ov_re += self.a_re[i] * self.b_re[i] + self.a_im[i] * self.b_im[i];
            ov_im += self.a_re[i] * self.b_im[i] - self.a_im[i] * self.b_re[i];
        }
        let ov = C64::new(ov_re, ov_im) * self.w;
        self.p_plus = (0.5 + 0.5 * ov.re).clamp(0.0, 1.0);
        self.p_plus
    }

    fn collapse(&mut self, plus: bool) -> f64 {
        let w = if plus { self.w } else { -self.w };
        let mut norm = 0.0;
        for i in 0..=self.m {
            let r = 0.5 * (self.a_re[i] + w.re * self.b_re[i] - w.im * self.b_im[i]);
            let im = 0.5 * (self.a_im[i] + w.re * self.b_im[i] + w.im * self.b_re[i]);
            self.re[i] = r;
            self.im[i] = im;
            norm += r * r + im * im;
        }
        if norm > 0.0 {
            let s = 1.0 / norm.sqrt();
            self.re.iter_mut().for_each(|x| *x *= s);
            self.im.iter_mut().for_each(|x| *x *= s);
        }
        norm
    }

    fn snapshot(&self) -> StateSnapshot {
        StateSnapshot::Pure(self.state())
    }
}

/// Permutation-invariant density register.
pub(crate) struct DensityEngine {
    state: SymmetricDensity,
    /// Per-sector `U_+`, `U_-`, row-major.
    kraus: Vec<(Vec<C64>, Vec<C64>)>,
    /// Per-sector free-evolution diagonal.
    phase: Vec<Vec<C64>>,
    dephasing: Option<LocalDephasing>,
    /// Per-sector `U_+^dagger U_+`, transposed so the trace is a plain dot.
    effect_t: Vec<Vec<C64>>,
    scratch: Vec<C64>,
    kicked: Vec<C64>,
}

fn row_major(m: &DMatrix<C64>) -> Vec<C64> {
    let d = m.nrows();
    (0..d * d).map(|x| m[(x / d, x % d)]).collect()
}

impl DensityEngine {
    pub(crate) fn new(
        state: SymmetricDensity,
        beta: f64,
        phi: f64,
        alpha: f64,
        dephasing: Option<LocalDephasing>,
    ) -> Result<Self> {
        let mut kraus = Vec::new();
        let mut phase = Vec::new();
        let mut effect_t = Vec::new();
        for b in 0..state.sectors() {
            let j2 = state.sector_spin2(b);
            let pair = super::sector_kraus(j2, beta, alpha);
            effect_t.push(row_major(&(pair.plus.adjoint() * &pair.plus).transpose()));
            kraus.push((row_major(&pair.plus), row_major(&pair.minus)));
            phase.push(free_evolution(j2, phi));
        }
        let d = state.spins() + 1;
        Ok(DensityEngine {
            state,
            kraus,
            phase,
            dephasing,
            effect_t,
            scratch: vec![C64::new(0.0, 0.0); d * d],
            kicked: vec![C64::new(0.0, 0.0); d],
        })
    }
}

impl Engine for DensityEngine {
    fn prepare(&mut self, kick: f64) -> f64 {
        for b in 0..self.state.sectors() {
            let d = self.phase[b].len();
            let j2 = d - 1;
            let ph = &mut self.kicked[..d];
            for (k, slot) in ph.iter_mut().enumerate() {
                *slot = self.phase[b][k];
                if kick != 0.0 {
                    *slot *= C64::from_polar(1.0, -kick * (j2 as f64 / 2.0 - k as f64));
                }
            }
            let blk = self.state.block_mut(b);
            for i in 0..d {
                for j in 0..d {
                    blk[i * d + j] *= ph[i] * ph[j].conj();
                }
            }
        }
        if let Some(ch) = &self.dephasing {
            ch.apply(&mut self.state);
        }
        let mut p = 0.0;
        for b in 0..self.state.sectors() {
            p += self.effect_t[b]
                .iter()
                .zip(self.state.block(b))
                .map(|(e, r)| e.re * r.re - e.im * r.im)
                .sum::<f64>();
        }
        p.clamp(0.0, 1.0)
    }

    fn collapse(&mut self, plus: bool) -> f64 {
        let mut total = 0.0;
        for b in 0..self.state.sectors() {
            let k = if plus { &self.kraus[b].0 } else { &self.kraus[b].1 };
            let d = self.phase[b].len();
            let blk = self.state.block_mut(b);
            let scratch = &mut self.scratch[..d * d];
            // scratch = K rho
            scratch.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
            for i in 0..d {
                let row = &mut scratch[i * d..(i + 1) * d];
                for l in 0..d {
                    let kil = k[i * d + l];
                    let src = &blk[l * d..(l + 1) * d];
                    for (r, s) in row.iter_mut().zip(src) {
                        *r += kil * s;
                    }
                }
            }
            // rho = scratch K^dagger, upper triangle then mirrored.
            for i in 0..d {
                let si = &scratch[i * d..(i + 1) * d];
                for j in i..d {
                    let kj = &k[j * d..(j + 1) * d];
                    let mut acc = C64::new(0.0, 0.0);
                    for (x, y) in si.iter().zip(kj) {
                        acc += x * y.conj();
                    }
                    blk[i * d + j] = acc;
                }
            }
            for i in 0..d {
                blk[i * d + i].im = 0.0;
                total += blk[i * d + i].re;
                for j in 0..i {
                    blk[i * d + j] = blk[j * d + i].conj();
                }
            }
        }
        if total > 0.0 {
            self.state.scale(1.0 / total);
        }
        total
    }

    fn snapshot(&self) -> StateSnapshot {
        StateSnapshot::Mixed(self.state.clone())
    }
}

/// Pure register of several symmetric groups, joint tensor in the real gauge.
pub(crate) struct GroupedEngine {
    sizes: Vec<usize>,
    psi: Vec<C64>,
    a: Vec<C64>,
    b: Vec<C64>,
    tmp: Vec<C64>,
    rot: Vec<Vec<f64>>,
    rot_t: Vec<Vec<f64>>,
    /// Joint `jz` per tensor index, for kicks.
    jz: Vec<f64>,
    /// Joint free-evolution phase per tensor index.
    phase: Vec<C64>,
    w: C64,
}

/// Per-group gauge `(-i)^k_g` multiplied over the joint index, and `jz`.
fn joint_labels(sizes: &[usize]) -> (Vec<C64>, Vec<f64>) {
    let mut g = vec![C64::new(1.0, 0.0)];
    let mut jz = vec![0.0];
    for &s in sizes {
        let mut ng = Vec::with_capacity(g.len() * (s + 1));
        let mut nj = Vec::with_capacity(g.len() * (s + 1));
        for (x, z) in g.iter().zip(&jz) {
            for k in 0..=s {
                ng.push(x * gauge(k));
                nj.push(z + s as f64 / 2.0 - k as f64);
            }
        }
        g = ng;
        jz = nj;
    }
    (g, jz)
}

impl GroupedEngine {
    /// `phi0s` rotate each group's coupling axis; they are absorbed into the
    /// state through `exp(+i phi0 Jz)` since the axis phase commutes with the
    /// free evolution.
    pub(crate) fn new(
        state: &GroupedState,
        betas: &[f64],
        phi0s: &[f64],
        phi: f64,
        alpha: f64,
    ) -> Result<Self> {
        let sizes = state.group_sizes().to_vec();
        if betas.len() != sizes.len() || phi0s.len() != sizes.len() {
            return Err(Error::param("groups", "one coupling per group is required"));
        }
        let (g, jz) = joint_labels(&sizes);
        let axis = phi0_labels(&sizes, phi0s);
        let psi: Vec<C64> = state
            .amplitudes()
            .iter()
            .zip(g.iter().zip(&axis))
            .map(|(a, (g, z))| a * g * z)
            .collect();
        let rot: Vec<Vec<f64>> = sizes
            .iter()
            .zip(betas)
            .map(|(&s, &b)| real_rotation(s, b))
            .collect();
        let rot_t = rot
            .iter()
            .zip(&sizes)
            .map(|(r, &s)| transpose(r, s + 1))
            .collect();
        let phase = jz.iter().map(|z| C64::from_polar(1.0, -phi * z)).collect();
        let n = psi.len();
        Ok(GroupedEngine {
            sizes,
            psi,
            a: vec![C64::new(0.0, 0.0); n],
            b: vec![C64::new(0.0, 0.0); n],
            tmp: vec![C64::new(0.0, 0.0); n],
            rot,
            rot_t,
            jz,
            phase,
            w: C64::from_polar(1.0, -alpha),
        })
    }

    /// Applies one real matrix per group (mode products) into `out`.
    fn apply(sizes: &[usize], mats: &[Vec<f64>], src: &[C64], out: &mut Vec<C64>, tmp: &mut Vec<C64>) {
        out.copy_from_slice(src);
        let dims: Vec<usize> = sizes.iter().map(|s| s + 1).collect();
        for (g, mat) in mats.iter().enumerate() {
            let outer: usize = dims[..g].iter().product();
            let inner: usize = dims[g + 1..].iter().product();
            let d = dims[g];
            tmp.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
            for o in 0..outer {
                for i in 0..d {
                    let dst = (o * d + i) * inner;
                    for j in 0..d {
                        let w = mat[i * d + j];
                        if w == 0.0 {
                            continue;
                        }
                        let s = (o * d + j) * inner;
                        for t in 0..inner {
                            tmp[dst + t] += out[s + t] * w;
                        }
                    }
                }
            }
            std::mem::swap(out, tmp);
        }
    }

    pub(crate) fn state(&self) -> GroupedState {
        let (g, _) = joint_labels(&self.sizes);
        let norm = self.psi.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let amps = self
            .psi
            .iter()
            .zip(&g)
            .map(|(a, g)| a * g.conj() / norm)
            .collect();
        GroupedState::from_joint(self.sizes.clone(), amps).expect("normalized by construction")
    }
}

/// Joint factor `prod_g exp(+i phi0_g jz_g)`.
fn phi0_labels(sizes: &[usize], phi0s: &[f64]) -> Vec<C64> {
    let mut out = vec![C64::new(1.0, 0.0)];
    for (&s, &p0) in sizes.iter().zip(phi0s) {
        let mut next = Vec::with_capacity(out.len() * (s + 1));
        for x in &out {
            for k in 0..=s {
                next.push(x * C64::from_polar(1.0, p0 * (s as f64 / 2.0 - k as f64)));
            }
        }
        out = next;
    }
    out
}

impl Engine for GroupedEngine {
    fn prepare(&mut self, kick: f64) -> f64 {
        for (i, a) in self.psi.iter_mut().enumerate() {
            *a *= self.phase[i];
            if kick != 0.0 {
                *a *= C64::from_polar(1.0, -kick * self.jz[i]);
            }
        }
        GroupedEngine::apply(&self.sizes, &self.rot, &self.psi, &mut self.a, &mut self.tmp);
        GroupedEngine::apply(&self.sizes, &self.rot_t, &self.psi, &mut self.b, &mut self.tmp);
        let ov: C64 = self.a.iter().zip(&self.b).map(|(x, y)| x.conj() * y).sum();
        (0.5 + 0.5 * (ov * self.w).re).clamp(0.0, 1.0)
    }

    fn collapse(&mut self, plus: bool) -> f64 {
        let w = if plus { self.w } else { -self.w };
        let mut norm = 0.0;
        for ((p, a), b) in self.psi.iter_mut().zip(&self.a).zip(&self.b) {
            *p = (a + w * b) * 0.5;
            norm += p.norm_sqr();
        }
        if norm > 0.0 {
            let s = 1.0 / norm.sqrt();
            self.psi.iter_mut().for_each(|x| *x *= s);
        }
        norm
    }

    fn snapshot(&self) -> StateSnapshot {
        StateSnapshot::Grouped(self.state())
    }
}

/// Builds the register for `params` at precession phase `phi`.
///
/// `initial` supplies an already sampled grouped state when the ensemble is
/// an unraveled mixture.
pub(crate) fn build(
    params: &ProtocolParams,
    backend: super::Backend,
    phi: f64,
    grouped_initial: Option<&(GroupedState, Vec<f64>, Vec<f64>)>,
) -> Result<Box<dyn Engine>> {
    let spec = params.ensemble_spec();
    let g0 = &spec.groups[0];
    match backend {
        super::Backend::Dicke => {
            let state = DickeVector::coherent(params.m, g0.initial_bloch)?.rotate_z(-g0.phi0);
            Ok(Box::new(DickeEngine::new(&state, g0.beta, phi, params.alpha)))
        }
        super::Backend::Density => {
            let state = SymmetricDensity::product(params.m, g0.initial_bloch)?;
            let state = rotate_density(state, -g0.phi0);
            let channel = if params.gamma2 > 0.0 && params.dephasing == super::DephasingModel::Local {
                Some(LocalDephasing::new(params.m, params.gamma2)?)
            } else {
                None
            };
            Ok(Box::new(DensityEngine::new(state, g0.beta, phi, params.alpha, channel)?))
        }
        super::Backend::Grouped => {
            let (state, betas, phi0s) = match grouped_initial {
                Some(init) => init.clone(),
                None => {
                    let groups = spec
                        .groups
                        .iter()
                        .map(|g| DickeVector::coherent(g.size, g.initial_bloch))
                        .collect::<Result<Vec<_>>>()?;
                    (
                        GroupedState::from_product(&groups)?,
                        spec.groups.iter().map(|g| g.beta).collect(),
                        spec.groups.iter().map(|g| g.phi0).collect(),
                    )
                }
            };
            Ok(Box::new(GroupedEngine::new(&state, &betas, &phi0s, phi, params.alpha)?))
        }
        super::Backend::Auto => unreachable!("backend resolved by caller"),
    }
}

/// Applies `exp(-i angle Jz)` to every sector.
fn rotate_density(mut state: SymmetricDensity, angle: f64) -> SymmetricDensity {
    if angle == 0.0 {
        return state;
    }
    for b in 0..state.sectors() {
        let j2 = state.sector_spin2(b);
        let ph = free_evolution(j2, angle);
        let d = j2 + 1;
        let blk = state.block_mut(b);
        for i in 0..d {
            for j in 0..d {
                blk[i * d + j] *= ph[i] * ph[j].conj();
            }
        }
    }
    state
}
