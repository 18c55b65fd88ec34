use std::f64::consts::{FRAC_PI_2, LN_2, PI};

use hybridsense::analytic::{signal_probability, signal_probability_general};
use hybridsense::fisher::estimate_fisher;
use hybridsense::protocol::{
    entangling_kraus, measure_probability, run_trajectory, run_trajectory_with, ProtocolParams,
    TrajectoryOptions,
};
use hybridsense::states::{DickeVector, FullState};
use hybridsense::validation::{compare_with_full, record_probability_sum};

#[test]
fn record_probability_matches_full_space_product() {
    let p = ProtocolParams::new(2, 0.3, 0.9, 8);
    let rec = run_trajectory(&p, 11).unwrap();
    let mut state = FullState::plus_x(2).unwrap();
    for n in 0..8 {
        state.free_evolve(p.phi);
        state = state.apply_kraus(p.beta, FRAC_PI_2, rec.outcome(n));
    }
    let direct = state.norm_weight();
    let last = *rec.log_p.last().unwrap();
    assert!((last.exp() - direct).abs() < 1e-10);
}

#[test]
fn zero_coupling_is_a_fair_coin() {
    let p = ProtocolParams::new(5, 0.0, 0.7, 256);
    let rec = run_trajectory(&p, 4).unwrap();
    for (i, &n) in rec.checkpoints.iter().enumerate() {
        let expect = -(n as f64) * LN_2;
        assert!((rec.log_p[i] - expect).abs() < 1e-9 * n as f64);
        assert!((rec.log_p[i] - rec.log_p_plus[i]).abs() < 1e-12 * n as f64);
        assert!((rec.log_p[i] - rec.log_p_minus[i]).abs() < 1e-12 * n as f64);
    }
    let est = estimate_fisher(&p, 4, 0).unwrap();
    assert!(est.mean_fi.iter().all(|v| v.abs() < 1e-15));
    assert!(est.conditional_fi.iter().all(|v| *v == 0.0));
}

#[test]
fn zero_detuning_gives_stationary_signal() {
    let p = ProtocolParams::new(6, 0.1, 0.0, 200);
    let opts = TrajectoryOptions {
        keep_probabilities: true,
        ..TrajectoryOptions::default()
    };
    let rec = run_trajectory_with(&p, 2, &opts, None).unwrap();
    let p0 = rec.probabilities[0];
    assert!(rec.probabilities.iter().all(|q| (q - p0).abs() < 1e-12));
}

#[test]
fn polarized_register_matches_product_formula() {
    // M = 1: exact single-factor product.
    let k = entangling_kraus(1, 0.1).unwrap();
    let p = measure_probability(&DickeVector::plus_x(1).unwrap(), &k.plus).unwrap();
    let exact = signal_probability_general(&[0.2], &[0.0], 1.0, FRAC_PI_2).unwrap();
    assert!((p - exact).abs() < 1e-10);

    // M = 100 at the k0Ts = 0.01 coupling.
    let beta = 0.02 / PI;
    let k = entangling_kraus(100, beta).unwrap();
    let p = measure_probability(&DickeVector::plus_x(100).unwrap(), &k.plus).unwrap();
    let exact = signal_probability_general(&vec![2.0 * beta; 100], &vec![0.0; 100], 1.0, FRAC_PI_2).unwrap();
    assert!((p - exact).abs() < 1e-10);
    assert!((p - signal_probability(0, 100, 0.01, 0.0)).abs() < 1e-3);
    assert!((p - 0.97804).abs() < 1e-3);

    // Bloch vector along y: no signal.
    let along_y = DickeVector::coherent(100, [0.0, 1.0, 0.0]).unwrap();
    assert!((measure_probability(&along_y, &k.plus).unwrap() - 0.5).abs() < 1e-10);
}

#[test]
fn local_dephasing_matches_per_spin_channel() {
    let mut p = ProtocolParams::new(4, 0.15, 0.6, 60);
    p.gamma2 = 0.01;
    let worst = compare_with_full(&p, 0..6).unwrap().expect("outcome bits differ");
    assert!(worst < 1e-10, "max |dp| = {worst:e}");
}

#[test]
fn partially_polarized_register_matches_full_space() {
    let mut p = ProtocolParams::new(3, 0.25, 1.2, 40);
    p.polarization = 0.4;
    let worst = compare_with_full(&p, 0..6).unwrap().expect("outcome bits differ");
    assert!(worst < 1e-10);
}

#[test]
fn record_probabilities_are_normalized() {
    for m in 1..=3 {
        let p = ProtocolParams::new(m, 0.2, 0.8, 12);
        assert!((record_probability_sum(&p).unwrap() - 1.0).abs() < 1e-10);
    }
}
