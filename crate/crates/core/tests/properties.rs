use num_complex::Complex64 as C64;
use proptest::prelude::*;

use hybridsense::entanglement::{log_negativity, schmidt_coefficients, Bipartition};
use hybridsense::fisher::fit_power_law;
use hybridsense::protocol::entangling_kraus_with_angle;
use hybridsense::states::{bipartite_expand, dicke_to_full, DickeVector, FullState};

fn dicke_state(max_m: usize) -> impl Strategy<Value = DickeVector> {
    (1..=max_m).prop_flat_map(|m| {
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), m + 1).prop_filter_map(
            "non-zero state",
            |v| DickeVector::from_unnormalized(v.into_iter().map(|(r, i)| C64::new(r, i)).collect()).ok(),
        )
    })
}

/// Reorders full-space amplitudes so the reshape puts the first `m1` spins
/// on the rows, then returns the singular values.
fn full_svd(state: &DickeVector, m1: usize) -> Vec<f64> {
    dicke_to_full(state).unwrap().bipartite_singular_values(m1).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn embedding_is_an_isometry(s in dicke_state(10)) {
        let full = dicke_to_full(&s).unwrap();
        prop_assert!((full.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn schmidt_matches_full_space(s in dicke_state(10), cut in 0.0f64..1.0) {
        let m = s.spins();
        prop_assume!(m >= 2);
        let m1 = 1 + ((m - 1) as f64 * cut) as usize;
        let m1 = m1.min(m - 1);
        let ours = schmidt_coefficients(&s, Bipartition::new(m1, m - m1).unwrap()).unwrap();
        let full = full_svd(&s, m1);
        for (i, v) in ours.iter().enumerate() {
            prop_assert!((v - full[i]).abs() < 1e-9);
        }
        for v in &full[ours.len()..] {
            prop_assert!(v.abs() < 1e-9);
        }
    }

    #[test]
    fn coefficient_matrix_matches_reshape(s in dicke_state(8)) {
        let m = s.spins();
        prop_assume!(m >= 2);
        let m1 = m / 2;
        let c = bipartite_expand(&s, m1, m - m1).unwrap();
        let FullState::Pure { amplitudes, .. } = dicke_to_full(&s).unwrap() else { unreachable!() };
        // Any basis string with k1 down spins in the first block and k2 in the second.
        for k1 in 0..=m1 {
            for k2 in 0..=(m - m1) {
                let idx = (((1usize << k1) - 1) << (m - m1)) | ((1usize << k2) - 1);
                let norm = (binom(m1, k1) * binom(m - m1, k2)).sqrt();
                prop_assert!((c[(k1, k2)] - amplitudes[idx] * norm).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn negativity_is_symmetric_and_rotation_invariant(s in dicke_state(10), a in 0.0f64..6.3) {
        let m = s.spins();
        prop_assume!(m >= 2);
        let m1 = m / 2;
        let ab = log_negativity(&s, Bipartition::new(m1, m - m1).unwrap()).unwrap();
        let ba = log_negativity(&s, Bipartition::new(m - m1, m1).unwrap()).unwrap();
        prop_assert!((ab - ba).abs() < 1e-10);
        let rotated = log_negativity(&s.rotate_z(a), Bipartition::new(m1, m - m1).unwrap()).unwrap();
        prop_assert!((ab - rotated).abs() < 1e-10);
    }

    #[test]
    fn kraus_pairs_are_complete(m in 1usize..60, beta in 0.0f64..0.8, alpha in -3.2f64..3.2) {
        let k = entangling_kraus_with_angle(m, beta, alpha).unwrap();
        let s = k.plus.adjoint() * &k.plus + k.minus.adjoint() * &k.minus;
        prop_assert!((s - nalgebra::DMatrix::identity(m + 1, m + 1)).camax() < 1e-12);
    }

    #[test]
    fn exact_power_laws_are_recovered(c in 1e-3f64..1e3, k in 0.5f64..3.5) {
        let xs: Vec<f64> = (0..8).map(|i| 2f64.powi(i + 4)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| c * x.powf(k)).collect();
        let fit = fit_power_law(&xs, &ys, &[0.0; 8]).unwrap();
        prop_assert!((fit.exponent - k).abs() < 1e-9);
    }
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[test]
fn product_levels_carry_no_entanglement() {
    for m in 2..=9 {
        for k in [0, m] {
            let s = DickeVector::level(m, k).unwrap();
            let ln = log_negativity(&s, Bipartition::equal(m).unwrap()).unwrap();
            assert!(ln.abs() < 1e-12);
        }
    }
    let s = DickeVector::level(4, 2).unwrap();
    let ours = log_negativity(&s, Bipartition::new(2, 2).unwrap()).unwrap();
    let sum: f64 = full_svd(&s, 2).iter().sum();
    assert!((ours - 2.0 * sum.log2()).abs() < 1e-9);
}
