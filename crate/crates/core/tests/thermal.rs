use r2d::analysis::Target;
use r2d::bench::{build_clifford_group, run_lrb, RbConfig};
use r2d::calibration::{CalibrationConfig, Calibrator};
use r2d::device::{DeviceParams, Transmon};
use r2d::metrology::ale_measure;
use r2d::propagator::{simulate_gate, GateProcess, LindbladChannels, PropagatorOptions};
use r2d::pulse::PulseParams;

const X_6P8: [f64; 3] = [0.931, 1.725, 1.918];
const XH_8: [f64; 3] = [1.412, 0.827, 2.04];

fn finetuned(cal: &Calibrator, target: Target, t_p: f64, alphas: [f64; 3]) -> PulseParams {
    let cfg = CalibrationConfig::new(target, t_p);
    cal.evaluate(alphas, &cfg, cfg.polish_iterations).pulse.unwrap()
}

fn open_gate(p: &PulseParams, n_bar: f64) -> GateProcess {
    let dev = DeviceParams { n_bar, ..DeviceParams::reference_device() };
    let tr = Transmon::new(&dev, 4).unwrap();
    simulate_gate(&tr, p, &LindbladChannels::from_device(&dev).unwrap(), &PropagatorOptions::default()).unwrap()
}

struct Measured {
    ale: f64,
    lrb: f64,
    lrb_err: f64,
}

fn measure(x: &PulseParams, xh: &PulseParams, n_bar: f64) -> Measured {
    let gx = open_gate(x, n_bar);
    let gh = open_gate(xh, n_bar);
    let (_, ale) = ale_measure(&gx, Target::X, 2, &Default::default(), None).unwrap();
    let group = build_clifford_group(&gx, &gh).unwrap();
    let lrb = run_lrb(&group, &RbConfig::default(), Some((&gx, Target::X)), 2).unwrap();
    Measured { ale: ale.epsilon, lrb: lrb.epsilon.unwrap(), lrb_err: lrb.epsilon_err.unwrap() }
}

#[test]
fn thermal_excitation_moves_lrb_but_not_ale() {
    let cal = Calibrator::new(&DeviceParams::reference_device(), 4).unwrap();
    let xh = finetuned(&cal, Target::XHalf, 8e-9, XH_8);

    // A gate with coherent leakage around 1e-5.
    let biased = finetuned(&cal, Target::X, 6.8e-9, [X_6P8[0] + 0.01, X_6P8[1], X_6P8[2]]);
    let cold = measure(&biased, &xh, 0.0);
    let warm = measure(&biased, &xh, 0.1);
    assert!(cold.ale > 5e-6, "{:e}", cold.ale);
    assert!((warm.ale - cold.ale).abs() < 0.1 * cold.ale, "ALE {:e} -> {:e}", cold.ale, warm.ale);

    // At the optimum the thermal shift is a visible fraction of a tiny ALE
    // value, but still far below the LRB shift.
    let best = finetuned(&cal, Target::X, 6.8e-9, X_6P8);
    let cold = measure(&best, &xh, 0.0);
    let warm = measure(&best, &xh, 0.1);
    assert!(warm.lrb - cold.lrb > 3.0 * (warm.lrb_err + cold.lrb_err), "LRB {:e}±{:e} -> {:e}±{:e}", cold.lrb, cold.lrb_err, warm.lrb, warm.lrb_err);
    assert!((warm.ale - cold.ale).abs() < 0.05 * (warm.lrb - cold.lrb), "ALE {:e}->{:e}, LRB {:e}->{:e}", cold.ale, warm.ale, cold.lrb, warm.lrb);
}
