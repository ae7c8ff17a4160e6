use std::f64::consts::{PI, TAU};

use proptest::prelude::*;
use r2d::analysis::{decompose_leakage, pseudo_x, synthetic_x, unitary_error_metrics, SyntheticLeakage, Target};
use r2d::calibration::{CalibrationConfig, Calibrator};
use r2d::device::{DeviceParams, Transmon};
use r2d::linalg::{ideal_x, wrap_angle, CMatrix};
use r2d::metrology::ale_measure;
use r2d::propagator::{simulate_gate, LindbladChannels, PropagatorOptions};
use r2d::pulse::{dtft_real, synthesize, PulseParams};

const DELTA: f64 = -TAU * 225.47e6;

fn angle_close(a: f64, b: f64, tol: f64) -> bool {
    wrap_angle(a - b).abs() < tol
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn levels_increase_and_anharmonicity_is_near_minus_ec(ec in 150e6f64..300e6, ratio in 40.0f64..120.0) {
        let dev = DeviceParams { e_c: ec, e_j: ec * ratio, ..DeviceParams::reference_device() };
        let tr = Transmon::new(&dev, 4).unwrap();
        let s = &tr.spectral;
        for j in 2..4 {
            prop_assert!(s.lambda(j) > s.lambda(j - 1));
        }
        for w in s.eigen_frequencies.windows(2) {
            prop_assert!(w[1] > w[0]);
        }
        let delta_hz = tr.anharmonicity() / TAU;
        prop_assert!((delta_hz + ec).abs() / ec < 0.25, "Δ/2π = {delta_hz:e}, E_C = {ec:e}");
    }

    #[test]
    fn leakage_parameters_round_trip(
        a0 in 1e-4f64..0.1, a1 in 1e-4f64..0.1,
        phi0 in -PI..PI, phi1 in -PI..PI, phi2 in -1.5f64..1.5,
    ) {
        let mut u = CMatrix::identity(4, 4);
        u.view_mut((0, 0), (3, 3)).copy_from(&pseudo_x(a0, a1, phi0, phi1, phi2));
        let l = decompose_leakage(&u, Target::X).unwrap();
        prop_assert!((l.a0 - a0).abs() < 1e-12 && (l.a1 - a1).abs() < 1e-12);
        prop_assert!(angle_close(l.phi0, phi0, 1e-9) && angle_close(l.phi1, phi1, 1e-9));
        prop_assert!(angle_close(l.phi2, phi2, 1e-9));
    }

    #[test]
    fn subspace_leakage_is_the_sum_of_both_channels(
        a0 in 0.0f64..0.05, a1 in 0.0f64..0.05, b0 in 0.0f64..0.05, b1 in 0.0f64..0.05,
        phi0 in -PI..PI, phi1 in -PI..PI, phi2 in -1.5f64..1.5, psi0 in -PI..PI, psi1 in -PI..PI, phi3 in -1.5f64..1.5,
    ) {
        let u = synthetic_x(&SyntheticLeakage { a0, a1, phi0, phi1, phi2, b0, b1, psi0, psi1, phi3 });
        let l = decompose_leakage(&u, Target::X).unwrap();
        let (_, leak) = unitary_error_metrics(&u, &ideal_x());
        prop_assert!((leak - l.eps_leak_2 - l.eps_leak_3).abs() < 1e-10);
    }

    #[test]
    fn two_photon_notches_sit_where_predicted(a02 in 0.5f64..3.0, a13 in 0.5f64..3.0) {
        let p = PulseParams::new(4e8, 12e-9).with_alphas(1.0, a02, a13);
        let env = synthesize(&p, DELTA);
        prop_assume!(env.is_ok());
        let env = env.unwrap();
        let dt = env.sample_period();
        let h = DELTA.abs() / 400.0;
        let ft = |w: f64| dtft_real(&env.times, &env.omega_r_squared, dt, w).norm();
        for w0 in [DELTA / a02.sqrt(), 3.0 * DELTA / a13.sqrt()] {
            // local minimum of |FT(Ω_R²)| on a grid of spacing h around w0
            let grid: Vec<f64> = (-8..=8).map(|k| ft(w0 + k as f64 * h)).collect();
            let k_min = (1..grid.len() - 1)
                .filter(|&k| grid[k] <= grid[k - 1] && grid[k] <= grid[k + 1])
                .min_by_key(|&k| (k as i64 - 8).abs())
                .unwrap();
            prop_assert!((k_min as i64 - 8).abs() <= 1, "notch at {w0:e} found at offset {}", k_min as i64 - 8);
        }
    }
}

#[test]
fn larger_alpha02_moves_its_notch_inward() {
    let mut last = f64::INFINITY;
    for a02 in [0.6, 0.9, 1.3, 1.8, 2.5] {
        let p = PulseParams::new(4e8, 12e-9).with_alphas(1.0, a02, 0.0);
        let env = synthesize(&p, DELTA).unwrap();
        let dt = env.sample_period();
        let (lo, hi) = (0.3 * DELTA.abs(), 1.6 * DELTA.abs());
        let w = (0..=2000)
            .map(|i| lo + (hi - lo) * i as f64 / 2000.0)
            .min_by(|a, b| {
                let fa = dtft_real(&env.times, &env.omega_r_squared, dt, *a).norm();
                let fb = dtft_real(&env.times, &env.omega_r_squared, dt, *b).norm();
                fa.total_cmp(&fb)
            })
            .unwrap();
        assert!(w < last, "α02 {a02}: notch at {w:e} not below {last:e}");
        assert!((w / (DELTA.abs() / a02.sqrt()) - 1.0).abs() < 0.01);
        last = w;
    }
}

fn r2d_x(t_p: f64, alphas: [f64; 3]) -> PulseParams {
    let cal = Calibrator::new(&DeviceParams::reference_device(), 4).unwrap();
    let cfg = CalibrationConfig::new(Target::X, t_p);
    cal.evaluate(alphas, &cfg, cfg.polish_iterations).pulse.unwrap()
}

fn x_metrics(p: &PulseParams, d: usize, tol: f64) -> (f64, [f64; 4]) {
    let dev = DeviceParams::reference_device().coherent();
    let tr = Transmon::new(&dev, d).unwrap();
    let opts = PropagatorOptions { tolerance: tol, ..Default::default() };
    let g = simulate_gate(&tr, p, &LindbladChannels::coherent(), &opts).unwrap();
    let u = g.unitary().unwrap().clone();
    let defect = (u.adjoint() * &u - CMatrix::identity(d, d)).iter().map(|z| z.norm()).fold(0.0, f64::max);
    let (f, leak) = unitary_error_metrics(&u, &ideal_x());
    let l = decompose_leakage(&u, Target::X).unwrap();
    (defect, [1.0 - f, leak, l.eps_leak_2, l.eps_leak_3])
}

#[test]
fn full_pulse_keeps_unitarity_and_is_converged_in_tolerance() {
    let p = r2d_x(7e-9, [0.934, 1.691, 1.971]);
    let (defect, base) = x_metrics(&p, 4, 1e-10);
    assert!(defect < 1e-9, "unitarity defect {defect:e}");
    let (_, finer) = x_metrics(&p, 4, 5e-11);
    for (a, b) in base.iter().zip(finer) {
        assert!((a - b).abs() < 1e-7, "{a:e} vs {b:e}");
    }
}

#[test]
fn four_and_six_levels_agree_when_drive_is_below_a_third_of_anharmonicity() {
    for (t_p, alphas) in [(14e-9, [0.98, 1.1, 3.0]), (16e-9, [1.195, 1.632, 3.376])] {
        let p = r2d_x(t_p, alphas);
        let env = synthesize(&p, DELTA).unwrap();
        let peak = env.omega.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(peak / DELTA.abs() <= 0.33, "Ω/Δ = {}", peak / DELTA.abs());
        let (_, d4) = x_metrics(&p, 4, 1e-10);
        let (_, d6) = x_metrics(&p, 6, 1e-10);
        for (a, b) in d4.iter().zip(d6) {
            assert!((a - b).abs() < 1e-7, "{t_p:e}: {a:e} vs {b:e}");
        }
    }
}

#[test]
fn amplification_phases_depend_only_on_the_level_phase() {
    let dev = DeviceParams::reference_device().coherent();
    let tr = Transmon::new(&dev, 4).unwrap();
    let coherent = LindbladChannels::coherent();
    let base_pulse = r2d_x(7e-9, [0.934, 1.691, 1.971]);
    let phases = |a02: f64, a13: f64| {
        let p = PulseParams { alpha02: a02, alpha13: a13, ..base_pulse.clone() };
        let g = simulate_gate(&tr, &p, &coherent, &PropagatorOptions::default()).unwrap();
        let mut th = ale_measure(&g, Target::X, 2, &Default::default(), None).unwrap().1.phases;
        th.sort_by(f64::total_cmp);
        th
    };
    let base = phases(1.691, 1.971);
    for (a02, a13) in [(1.591, 1.971), (1.791, 1.971), (1.691, 1.771), (1.691, 2.171)] {
        for (a, b) in base.iter().zip(phases(a02, a13)) {
            assert!(angle_close(*a, b, 0.02), "({a02}, {a13}): {a} vs {b}");
        }
    }
}
