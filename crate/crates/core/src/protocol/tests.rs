use super::engine::{DensityEngine, DickeEngine, Engine, GroupedEngine};
use super::*;
use crate::states::{FullState, SymmetricDensity};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn max_dev(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    (a - b).camax()
}

#[test]
fn kraus_pair_is_complete() {
    for m in 1..=8 {
        for &(beta, alpha) in &[(0.0, FRAC_PI_2), (0.05, FRAC_PI_2), (0.7, 0.4)] {
            let k = entangling_kraus_with_angle(m, beta, alpha).unwrap();
            let sum = k.plus.adjoint() * &k.plus + k.minus.adjoint() * &k.minus;
            assert!(max_dev(&sum, &DMatrix::identity(m + 1, m + 1)) < 1e-12);
        }
    }
}

#[test]
fn plus_x_outcome_probability() {
    // p_+ = (1 + sin(2 beta M)) / 2 for |+x>^M at the Y readout.
    for m in [1, 3, 6] {
        let beta = 0.04;
        let k = entangling_kraus(m, beta).unwrap();
        let p = measure_probability(&DickeVector::plus_x(m).unwrap(), &k.plus).unwrap();
        let expect = 0.5 * (1.0 + (2.0 * beta * m as f64).sin());
        assert!((p - expect).abs() < 1e-12, "M = {m}: {p} vs {expect}");
    }
}

#[test]
fn unnormalized_state_rejected() {
    let k = entangling_kraus(2, 0.1).unwrap();
    let mut amps = DickeVector::plus_x(2).unwrap().amplitudes().to_vec();
    amps[0] *= 1.01;
    let bad = DickeVector::from_unnormalized(amps.clone()).unwrap();
    assert!(measure_probability(&bad, &k.plus).is_ok());
    let raw = crate::states::DickeVector::new(amps);
    assert!(raw.is_err());
}

#[test]
fn gauge_engine_matches_dense_kraus() {
    let m = 5;
    let (beta, phi, alpha) = (0.13, 0.7, 1.1);
    let start = DickeVector::coherent(m, [0.6, 0.0, 0.8]).unwrap();
    let mut eng = DickeEngine::new(&start, beta, phi, alpha);
    let k = entangling_kraus_with_angle(m, beta, alpha).unwrap();
    let mut reference = start;
    for step in 0..25 {
        let plus = step % 3 != 0;
        reference = reference.rotate_z(phi);
        let p_ref = measure_probability(&reference, &k.plus).unwrap();
        let p = eng.prepare(0.0);
        assert!((p - p_ref).abs() < 1e-12);
        eng.collapse(plus);
        let op = if plus { &k.plus } else { &k.minus };
        reference = DickeVector::from_unnormalized(reference.apply(op)).unwrap();
        let got = eng.state();
        let ov: C64 = got
            .amplitudes()
            .iter()
            .zip(reference.amplitudes())
            .map(|(a, b)| a.conj() * b)
            .sum();
        assert!((ov.norm() - 1.0).abs() < 1e-12);
        assert!((got.amplitudes()[0] - reference.amplitudes()[0]).norm() < 1e-10);
    }
}

#[test]
fn density_and_grouped_engines_agree_with_pure_engine() {
    let m = 4;
    let (beta, phi, alpha) = (0.2, 0.3, FRAC_PI_2);
    let start = DickeVector::plus_x(m).unwrap();
    let mut pure = DickeEngine::new(&start, beta, phi, alpha);
    let mut dens =
        DensityEngine::new(SymmetricDensity::from_pure(&start), beta, phi, alpha, None).unwrap();
    let half = DickeVector::plus_x(2).unwrap();
    let grouped_state = GroupedState::from_product(&[half.clone(), half]).unwrap();
    let mut grp =
        GroupedEngine::new(&grouped_state, &[beta, beta], &[0.0, 0.0], phi, alpha).unwrap();
    for step in 0..30 {
        let plus = (step * 7) % 5 < 2;
        let a = pure.prepare(0.0);
        let b = dens.prepare(0.0);
        let c = grp.prepare(0.0);
        assert!((a - b).abs() < 1e-11 && (a - c).abs() < 1e-11, "{a} {b} {c}");
        let wa = pure.collapse(plus);
        let wb = dens.collapse(plus);
        let wc = grp.collapse(plus);
        assert!((wa - wb).abs() < 1e-11 && (wa - wc).abs() < 1e-11);
    }
}

#[test]
fn density_engine_with_dephasing_matches_full_space() {
    let m = 3;
    let (beta, phi, alpha, g2) = (0.25, 0.4, FRAC_PI_2, 0.07);
    let ch = LocalDephasing::new(m, g2).unwrap();
    let mut dens = DensityEngine::new(
        SymmetricDensity::product(m, [0.8, 0.1, 0.0]).unwrap(),
        beta,
        phi,
        alpha,
        Some(ch),
    )
    .unwrap();
    let mut full = FullState::product(m, [0.8, 0.1, 0.0]).unwrap();
    for step in 0..20 {
        let plus = step % 2 == 0;
        full.free_evolve(phi);
        full.dephase(g2).unwrap();
        let p_ref = full.outcome_probability(beta, alpha, true);
        let p = dens.prepare(0.0);
        assert!((p - p_ref).abs() < 1e-11, "step {step}: {p} vs {p_ref}");
        dens.collapse(plus);
        full = full.apply_kraus(beta, alpha, plus);
        let w = full.norm_weight();
        full.scale(w);
    }
}

use crate::states::LocalDephasing;

#[test]
fn kick_dephasing_decays_coherence_on_average() {
    let m = 1;
    let g2 = 0.2;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let ops = crate::states::collective_operators(m).unwrap();
    let start = DickeVector::plus_x(m).unwrap();
    let samples = 40_000;
    let mean: f64 = (0..samples)
        .map(|_| 2.0 * dephase(&start, g2, &mut rng).unwrap().expectation(&ops.jx).re)
        .sum::<f64>()
        / samples as f64;
    assert!((mean - (-g2).exp()).abs() < 0.01, "{mean}");
}

#[test]
fn mixed_sampling_preserves_spin_count() {
    let spec = SpinEnsembleSpec::homogeneous(9, 0.01, [0.5, 0.0, 0.0]);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let (s, betas, _) = sample_mixed_initial(&spec, &mut rng).unwrap();
        assert_eq!(s.total_spins(), 9);
        assert_eq!(betas.len(), s.group_sizes().len());
        assert!((s.norm() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn params_validation() {
    let ok = ProtocolParams::new(4, 0.01, 0.5, 100);
    assert!(ok.validate().is_ok());
    assert_eq!(ok.resolve_backend().unwrap(), Backend::Dicke);
    let mut p = ok.clone();
    p.m = 0;
    assert!(p.validate().is_err());
    let mut p = ok.clone();
    p.beta = 1.0;
    assert!(p.validate().is_err());
    let mut p = ok.clone();
    p.gamma2 = -0.1;
    assert!(p.validate().is_err());
    let mut p = ok.clone();
    p.gamma2 = 0.01;
    assert_eq!(p.resolve_backend().unwrap(), Backend::Density);
    p.backend = Backend::Dicke;
    assert!(p.validate().is_err());
    p.dephasing = DephasingModel::CollectiveKick;
    assert!(p.validate().is_ok());
    let mut p = ok;
    p.polarization = 0.5;
    assert_eq!(p.resolve_backend().unwrap(), Backend::Density);
}

#[test]
fn trajectories_are_reproducible() {
    let mut p = ProtocolParams::new(6, 0.05, 0.9, 500);
    p.checkpoints_per_octave = 2;
    let a = run_trajectory(&p, 17).unwrap();
    let b = run_trajectory(&p, 17).unwrap();
    assert_eq!(a, b);
    let c = run_trajectory(&p, 18).unwrap();
    assert_ne!(a.outcomes, c.outcomes);
    assert_eq!(a.checkpoints.last(), Some(&500));
    assert_eq!(a.log_p.len(), a.checkpoints.len());
}

#[test]
fn checkpoint_schedule_shapes() {
    assert_eq!(checkpoint_schedule(16, 1), vec![1, 2, 4, 8, 16]);
    assert_eq!(checkpoint_schedule(20, 1), vec![1, 2, 4, 8, 16, 20]);
    let dense = checkpoint_schedule(1 << 20, 4);
    let inside = dense.iter().filter(|&&n| (1 << 18..=1 << 20).contains(&n)).count();
    assert!(inside >= 5);
}

#[test]
fn zero_coupling_gives_fair_coin() {
    let p = ProtocolParams::new(3, 0.0, 0.4, 64);
    let opts = TrajectoryOptions {
        keep_probabilities: true,
        ..TrajectoryOptions::default()
    };
    let rec = run_trajectory_with(&p, 1, &opts, None).unwrap();
    assert!(rec.probabilities.iter().all(|&q| (q - 0.5).abs() < 1e-14));
    assert!(rec.scores().iter().all(|s| s.abs() < 1e-6));
}

#[test]
fn effective_beta_rejects_nonpositive() {
    assert!(effective_beta(0.0, 1.0).is_err());
    assert!(effective_beta(1.0, -1.0).is_err());
    assert!((effective_beta(PI / 2.0, 0.01).unwrap() - 0.01).abs() < 1e-15);
}
