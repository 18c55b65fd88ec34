use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use super::{ln_binomial, ln_factorials, DickeVector, FullState, MAX_FULL_SPINS, NORM_TOLERANCE};
use crate::error::{Error, Result};

/// Pure state of several permutation-symmetric groups of spins.
///
/// Amplitudes are stored as a dense tensor over the groups' Dicke levels,
/// group 0 being the slowest-varying index. A product of per-group Dicke
/// vectors is the starting point, but measurements entangle the groups, so
/// the joint tensor is kept in general form.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupedState {
    sizes: Vec<usize>,
    amplitudes: Vec<C64>,
}

impl GroupedState {
    pub fn from_product(groups: &[DickeVector]) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::param("groups", "at least one group is required"));
        }
        let sizes: Vec<usize> = groups.iter().map(|g| g.spins()).collect();
        let mut amplitudes = vec![C64::new(1.0, 0.0)];
        for g in groups {
            amplitudes = amplitudes
                .iter()
                .flat_map(|a| g.amplitudes().iter().map(move |b| a * b))
                .collect();
        }
        Ok(GroupedState { sizes, amplitudes })
    }

    /// Wraps a joint amplitude tensor; it must be normalized.
    pub fn from_joint(sizes: Vec<usize>, amplitudes: Vec<C64>) -> Result<Self> {
        let dim: usize = sizes.iter().map(|s| s + 1).product();
        if sizes.is_empty() || sizes.contains(&0) || dim != amplitudes.len() {
            return Err(Error::param("groups", "joint tensor shape mismatch"));
        }
        let s = GroupedState { sizes, amplitudes };
        let n = s.norm();
        if (n - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::NormDrift { norm: n, tolerance: NORM_TOLERANCE });
        }
        Ok(s)
    }

    pub fn group_sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn total_spins(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Applies one operator per group (`ops[g]` acts on group `g`).
    pub fn apply_local(&self, ops: &[DMatrix<C64>]) -> Vec<C64> {
        let mut cur = self.amplitudes.clone();
        let dims: Vec<usize> = self.sizes.iter().map(|s| s + 1).collect();
        for (g, op) in ops.iter().enumerate() {
            let outer: usize = dims[..g].iter().product();
            let inner: usize = dims[g + 1..].iter().product();
            let d = dims[g];
            let mut next = vec![C64::new(0.0, 0.0); cur.len()];
            for o in 0..outer {
                for i in 0..d {
                    let dst = (o * d + i) * inner;
                    for j in 0..d {
                        let w = op[(i, j)];
                        if w == C64::new(0.0, 0.0) {
                            continue;
                        }
                        let src = (o * d + j) * inner;
                        for t in 0..inner {
                            next[dst + t] += w * cur[src + t];
                        }
                    }
                }
            }
            cur = next;
        }
        cur
    }

    /// Expansion into the full space, groups laid out on consecutive spins.
    pub fn to_full(&self) -> Result<FullState> {
        let m = self.total_spins();
        if m > MAX_FULL_SPINS {
            return Err(Error::param("M", format!("full expansion limited to M <= {MAX_FULL_SPINS}")));
        }
        let lf = ln_factorials(m);
        let dims: Vec<usize> = self.sizes.iter().map(|s| s + 1).collect();
        let amps = (0..1usize << m)
            .map(|idx| {
                let mut shift = m;
                let mut joint = 0usize;
                let mut scale = 0.0;
                for (g, &size) in self.sizes.iter().enumerate() {
                    shift -= size;
                    let field = (idx >> shift) & ((1usize << size) - 1);
                    let k = field.count_ones() as usize;
                    joint = joint * dims[g] + k;
                    scale -= 0.5 * ln_binomial(&lf, size, k);
                }
                self.amplitudes[joint] * scale.exp()
            })
            .collect();
        Ok(FullState::Pure { spins: m, amplitudes: amps })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_of_halves_matches_whole_coherent_state() {
        let whole = DickeVector::plus_x(4).unwrap();
        let half = DickeVector::plus_x(2).unwrap();
        let g = GroupedState::from_product(&[half.clone(), half]).unwrap();
        let a = g.to_full().unwrap().to_density();
        let b = crate::states::dicke_to_full(&whole).unwrap().to_density();
        assert!((a - b).camax() < 1e-14);
        assert!((g.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn shape_mismatch_rejected() {
        assert!(GroupedState::from_joint(vec![1, 1], vec![C64::new(1.0, 0.0); 3]).is_err());
    }
}
