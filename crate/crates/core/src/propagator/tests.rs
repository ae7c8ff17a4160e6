use std::f64::consts::{PI, TAU};

use super::*;
use crate::device::DeviceParams;
use crate::linalg::{ket, max_abs};
use crate::pulse::EnvelopeSamples;

fn transmon(d: usize) -> Transmon {
    Transmon::new(&DeviceParams::reference_device(), d).unwrap()
}

fn constant_envelope(value: C64, duration: f64, dt: f64, delta: f64) -> EnvelopeSamples {
    let params = PulseParams { sample_period: dt, padding: 0.0, ..PulseParams::new(value.norm(), duration) };
    let mut env = EnvelopeSamples::zero_like(&params, delta);
    env.omega.iter_mut().for_each(|o| *o = value);
    env
}

#[test]
fn zero_drive_is_free_evolution() {
    let tr = transmon(4);
    let p = PulseParams::new(0.0, 7e-9);
    let env = EnvelopeSamples::zero_like(&p, tr.anharmonicity());
    let wave = DriveWaveform::new(&env, tr.qubit_frequency());
    let u = propagate_unitary(&tr, &wave, &PropagatorOptions::default()).unwrap();
    let u = u.unitary().unwrap();
    let t = p.duration();
    let det = tr.spectral.detunings(tr.qubit_frequency());
    for j in 0..4 {
        let expected = C64::from_polar(1.0, -det[j] * t);
        assert!((u[(j, j)] - expected).norm() < 1e-10, "level {j}");
    }
    // The qubit block is the identity in the frame of the qubit transition.
    assert!((u[(1, 1)] - C64::new(1.0, 0.0)).norm() < 1e-10);
    assert!(max_abs(&(u - CMatrix::from_diagonal(&u.diagonal()))) < 1e-12);
}

#[test]
fn weak_constant_drive_matches_rabi_angle() {
    let tr = transmon(4).truncated(2).unwrap();
    let omega = TAU * 1e6;
    let duration = 250e-9;
    let env = constant_envelope(C64::new(omega, 0.0), duration, 1e-9, tr.anharmonicity());
    let wave = DriveWaveform::new(&env, tr.qubit_frequency());
    let u = propagate_unitary(&tr, &wave, &PropagatorOptions::default()).unwrap();
    let u = u.unitary().unwrap();
    let angle = 2.0 * u[(1, 0)].norm().atan2(u[(0, 0)].norm());
    assert!((angle - omega * duration).abs() < 1e-4, "{angle} vs {}", omega * duration);
    // Real envelope rotates about x: <1|U|0> ≈ -i sin(θ/2).
    let ratio = u[(1, 0)] / u[(0, 0)];
    assert!(ratio.re.abs() < 1e-3 && ratio.im < 0.0);
}

#[test]
fn quadrature_drive_rotates_about_y() {
    let tr = transmon(4).truncated(2).unwrap();
    let env = constant_envelope(C64::new(0.0, TAU * 1e6), 100e-9, 1e-9, tr.anharmonicity());
    let wave = DriveWaveform::new(&env, tr.qubit_frequency());
    let u = propagate_unitary(&tr, &wave, &PropagatorOptions::default()).unwrap();
    let u = u.unitary().unwrap();
    // exp(-iθσ_y/2): <1|U|0> = sin(θ/2) real and positive relative to <0|U|0>.
    let ratio = u[(1, 0)] / u[(0, 0)];
    assert!(ratio.im.abs() < 1e-3 && ratio.re > 0.0, "{ratio}");
}

fn area_pi_pulse(tp: f64) -> PulseParams {
    // ∫ A sin⁴ = 3 A t_p / 8; α₁₂ = 1/2 cancels the leading Stark shift.
    PulseParams::new(8.0 * PI / (3.0 * tp), tp).with_alphas(0.5, 0.0, 0.0)
}

#[test]
fn slow_pi_pulse_transfers_population() {
    let tr = transmon(4);
    let g = simulate_gate(&tr, &area_pi_pulse(40e-9), &LindbladChannels::coherent(), &PropagatorOptions::default())
        .unwrap();
    let u = g.unitary().unwrap();
    assert!(u[(1, 0)].norm_sqr() > 0.999);
    assert!(u[(0, 1)].norm_sqr() > 0.999);
    assert!(crate::linalg::unitarity_defect(u) < 1e-8);
    assert!(u[(0, 0)].im == 0.0 && u[(0, 0)].re >= 0.0);
}

#[test]
fn coherent_lindblad_matches_unitary() {
    let tr = transmon(4);
    let p = area_pi_pulse(10e-9).with_alphas(0.8, 0.0, 0.0);
    let env = synthesize(&p, tr.anharmonicity()).unwrap();
    let wave = DriveWaveform::new(&env, tr.qubit_frequency());
    let opts = PropagatorOptions::default();
    let u = propagate_unitary(&tr, &wave, &opts).unwrap();
    let u = u.unitary().unwrap();
    let psi = (ket(0, 4) + ket(1, 4) * C64::new(0.0, 1.0)).unscale(2f64.sqrt());
    let rho0 = &psi * psi.adjoint();
    let rho = propagate_lindblad(&tr, &wave, &LindbladChannels::coherent(), &rho0, &opts).unwrap();
    assert!(max_abs(&(rho - u * &rho0 * u.adjoint())) < 1e-8);
}

#[test]
fn density_map_superoperator_conventions() {
    let tr = transmon(4);
    let g = simulate_gate(&tr, &area_pi_pulse(10e-9), &LindbladChannels::coherent(), &PropagatorOptions::default())
        .unwrap();
    let u = g.unitary().unwrap().clone();
    let map = g.density_map();
    let psi = (ket(0, 4) * C64::new(0.6, 0.0) + ket(2, 4) * C64::new(0.0, 0.8)).clone();
    let rho = &psi * psi.adjoint();
    let direct = &u * &rho * u.adjoint();
    assert!(max_abs(&(map.apply(&rho) - &direct)) < 1e-12);
    let v = CVector::from_iterator(16, rho.transpose().iter().copied());
    let out = g.superoperator() * v;
    let out = CMatrix::from_row_slice(4, 4, out.as_slice());
    assert!(max_abs(&(out - direct)) < 1e-12);
}

fn idle_wave(tr: &Transmon, duration: f64) -> DriveWaveform {
    let p = PulseParams { sample_period: 1e-9, padding: 0.0, ..PulseParams::new(0.0, duration) };
    DriveWaveform::new(&EnvelopeSamples::zero_like(&p, tr.anharmonicity()), tr.qubit_frequency())
}

#[test]
fn relaxation_matches_exponential() {
    let tr = transmon(4);
    let channels = LindbladChannels::from_device(&DeviceParams::reference_device()).unwrap();
    let t = 20e-6;
    let rho0 = crate::linalg::projector(&ket(1, 4));
    let rho = propagate_lindblad(&tr, &idle_wave(&tr, t), &channels, &rho0, &PropagatorOptions::default()).unwrap();
    assert!((rho[(1, 1)].re - (-t / 40e-6f64).exp()).abs() < 1e-6);
    assert!((rho.trace().re - 1.0).abs() < 1e-9);
}

#[test]
fn dephasing_matches_echo_time() {
    let tr = transmon(4);
    let channels = LindbladChannels::from_device(&DeviceParams::reference_device()).unwrap();
    let t = 10e-6;
    let psi = (ket(0, 4) + ket(1, 4)).unscale(2f64.sqrt());
    let rho0 = crate::linalg::projector(&psi);
    let rho = propagate_lindblad(&tr, &idle_wave(&tr, t), &channels, &rho0, &PropagatorOptions::default()).unwrap();
    let expected = 0.5 * (-t / 56e-6f64).exp();
    assert!((rho[(0, 1)].norm() - expected).abs() < 1e-6);
}

#[test]
fn thermal_excitation_rate() {
    let tr = transmon(4);
    let params = DeviceParams { n_bar: 0.02, ..DeviceParams::reference_device() };
    let ch = LindbladChannels::from_device(&params).unwrap();
    assert!((ch.gamma_up - 0.02 / 40e-6).abs() < 1e-9);
    let t = 1e-6;
    let rho0 = crate::linalg::projector(&ket(0, 4));
    let rho = propagate_lindblad(&tr, &idle_wave(&tr, t), &ch, &rho0, &PropagatorOptions::default()).unwrap();
    // Two-level rate equation; excitation out of |1> enters at O((Γ↑t)²).
    let total = ch.gamma_up + ch.gamma_down;
    let expected = ch.gamma_up / total * (1.0 - (-total * t).exp());
    assert!((rho[(1, 1)].re - expected).abs() < 1e-6);
}

#[test]
fn noisy_density_map_is_physical() {
    let tr = transmon(4);
    let channels = LindbladChannels::from_device(&DeviceParams::reference_device()).unwrap();
    let g = simulate_gate(&tr, &area_pi_pulse(10e-9), &channels, &PropagatorOptions::default()).unwrap();
    let GateProcess::DensityMap(m) = &g else { panic!("expected density map") };
    for i in 0..4 {
        let out = &m.outputs[i * 4 + i];
        assert!((out.trace().re - 1.0).abs() < 1e-8);
        let herm = (out + out.adjoint()).scale(0.5);
        let eig = herm.symmetric_eigenvalues();
        assert!(eig.iter().all(|&e| e > -1e-9), "{eig:?}");
    }
}

#[test]
fn virtual_z_composition() {
    let psi = (ket(0, 4) + ket(1, 4) + ket(3, 4)).unscale(3f64.sqrt());
    let s = sequence_propagate(&[SeqOp::Vz(0.0)], QState::Ket(psi.clone())).unwrap();
    let QState::Ket(k) = s else { panic!() };
    assert_eq!(k, psi);
    let s = sequence_propagate(&[SeqOp::Vz(0.7), SeqOp::Vz(-0.7)], QState::Ket(psi.clone())).unwrap();
    let QState::Ket(k) = s else { panic!() };
    assert!((k - &psi).norm() < 1e-15);
    let s = sequence_propagate(&[SeqOp::Vz(0.3)], QState::Ket(psi.clone())).unwrap();
    let QState::Ket(k) = s else { panic!() };
    assert!((k[3] - psi[3] * C64::from_polar(1.0, -0.9)).norm() < 1e-15);
}

#[test]
fn sequence_rejects_dimension_mismatch() {
    let g = GateProcess::Unitary(CMatrix::identity(3, 3));
    let r = sequence_propagate(&[SeqOp::Gate(&g)], QState::Ket(ket(0, 4)));
    assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
}

#[test]
fn frame_covariance_of_detuned_carrier() {
    let tr = transmon(4);
    let p = area_pi_pulse(10e-9).with_alphas(0.8, 0.0, 0.0);
    let env = synthesize(&p, tr.anharmonicity()).unwrap();
    let opts = PropagatorOptions::default();
    let u = propagate_unitary(&tr, &DriveWaveform::new(&env, tr.qubit_frequency()), &opts).unwrap();
    let delta = TAU * 3e6;
    let mut shifted = env.clone();
    for (o, t) in shifted.omega.iter_mut().zip(&env.times) {
        *o *= C64::from_polar(1.0, delta * t);
    }
    let u2 = propagate_unitary(&tr, &DriveWaveform::new(&shifted, tr.qubit_frequency() + delta), &opts).unwrap();
    let back = vz(delta * p.duration(), 4) * u2.unitary().unwrap();
    let mut back = back;
    fix_global_phase(&mut back);
    assert!(max_abs(&(u.unitary().unwrap() - back)) < 1e-6);
}

#[test]
fn trajectory_csv() {
    let tr = transmon(4);
    let env = synthesize(&area_pi_pulse(10e-9), tr.anharmonicity()).unwrap();
    let wave = DriveWaveform::new(&env, tr.qubit_frequency());
    let opts = PropagatorOptions::default();
    let pts = unitary_trajectory(&tr, &wave, &ket(0, 4), 11, &opts).unwrap();
    assert_eq!(pts.len(), 11);
    assert!((pts[0].populations[0] - 1.0).abs() < 1e-15);
    let u = propagate_unitary(&tr, &wave, &opts).unwrap();
    let u = u.unitary().unwrap();
    for j in 0..4 {
        assert!((pts[10].populations[j] - u[(j, 0)].norm_sqr()).abs() < 1e-8);
    }
    let mut buf = Vec::new();
    write_trajectory_csv(&pts, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("t,P0,P1,P2,P3,x,y,z\n"));
}
