use super::*;
use crate::analysis::decompose_leakage;

const X_OPT_7NS: [f64; 3] = [0.934, 1.691, 1.971];

fn cal() -> Calibrator {
    Calibrator::new(&DeviceParams::reference_device(), 4).unwrap()
}

#[test]
fn negative_squared_envelope_gets_finite_penalty() {
    let c = cal();
    let cfg = CalibrationConfig::new(Target::X, 7e-9);
    let bad = [1.0, 4.0, 4.0];
    let probe = PulseParams::new(Calibrator::area_amplitude(PI, 7e-9), 7e-9).with_alphas(bad[0], bad[1], bad[2]);
    assert!(r2d_squared_envelope(&probe, c.anharmonicity()).is_err());
    let r = c.evaluate(bad, &cfg, 2);
    assert!(r.penalty.is_some());
    assert_eq!(r.cost, PENALTY);
    assert!(r.pulse.is_none());
}

#[test]
fn finetuned_x_gate_leaks_little_and_ale_matches_matrix_elements() {
    let c = cal();
    let cfg = CalibrationConfig::new(Target::X, 7e-9);
    let r = c.evaluate(X_OPT_7NS, &cfg, cfg.polish_iterations);
    assert!(r.penalty.is_none());
    assert!(r.finetune_converged, "{r:?}");
    assert!(r.cost < 2e-5, "cost {:e}", r.cost);
    let g = c.gate(r.pulse.as_ref().unwrap()).unwrap();
    let d = decompose_leakage(g.unitary().unwrap(), Target::X).unwrap();
    let total = d.eps_leak_2 + d.eps_leak_3;
    assert!((r.cost - total).abs() < 0.2 * total + 2e-7, "ALE {:e} vs unitary {:e}", r.cost, total);
}

#[test]
fn biasing_alpha12_raises_leakage_tenfold() {
    let c = cal();
    let cfg = CalibrationConfig::new(Target::X, 7e-9);
    let best = c.evaluate(X_OPT_7NS, &cfg, cfg.polish_iterations).cost;
    for shift in [-0.3, 0.3] {
        let a = [X_OPT_7NS[0] + shift, X_OPT_7NS[1], X_OPT_7NS[2]];
        let r = c.evaluate(a, &cfg, cfg.polish_iterations);
        assert!(r.cost > 10.0 * best, "shift {shift}: {:e} vs {:e}", r.cost, best);
    }
}

fn short_run() -> CalibrationConfig {
    let mut cfg = CalibrationConfig::new(Target::X, 7e-9);
    cfg.nelder_mead.max_evaluations = 10;
    cfg.restarts = 0;
    cfg.polish_iterations = 2;
    cfg
}

#[test]
fn search_result_beats_every_initial_vertex_and_resumes_from_log() {
    let c = cal();
    let cfg = short_run();
    let mut log = Vec::new();
    let r = c.optimize(&cfg, &[], &mut |rec| write_jsonl(rec, &mut log).unwrap()).unwrap();
    assert!(r.flagged);
    assert_eq!(r.stop_reason, StopReason::Budget);
    assert_eq!(r.history.len(), 10);
    for v in &r.history[..4] {
        assert!(r.best_search_cost <= v.cost);
    }
    let best = r.history.iter().min_by(|a, b| a.cost.total_cmp(&b.cost)).unwrap();
    assert!(best.penalty.is_none());

    let cache = read_jsonl(std::io::Cursor::new(log)).unwrap();
    let mut fresh = 0;
    let again = c.optimize(&cfg, &cache, &mut |_| fresh += 1).unwrap();
    assert_eq!(fresh, 1, "only the polish pass is new");
    assert_eq!(again.best_search_cost, r.best_search_cost);
    let a: Vec<_> = again.history.iter().map(|h| h.alphas).collect();
    let b: Vec<_> = r.history.iter().map(|h| h.alphas).collect();
    assert_eq!(a, b);
}

#[test]
fn drag_variant_only_moves_alpha12() {
    let cfg = CalibrationConfig::new(Target::X, 7e-9).drag();
    assert_eq!(cfg.coordinates(), vec![1.0]);
    assert_eq!(cfg.alphas_from(&[0.7]), [0.7, 0.0, 0.0]);
}

#[test]
fn config_reads_units_and_rejects_unknown_fields() {
    let cfg: CalibrationConfig = serde_json::from_str(r#"{"target": "X/2", "t_p": "6.8 ns"}"#).unwrap();
    assert!((cfg.t_p - 6.8e-9).abs() < 1e-20);
    assert_eq!(cfg.restarts, 1);
    assert!(serde_json::from_str::<CalibrationConfig>(r#"{"target": "X", "t_p": "7 ns", "tp": 1}"#).is_err());
}

#[test]
fn all_config_violations_are_reported_together() {
    let mut cfg = CalibrationConfig::new(Target::X, -1e-9);
    cfg.levels = 3;
    cfg.cost_weights = [0.0, 0.0];
    let v = cfg.violations();
    assert_eq!(v.len(), 3, "{v:?}");
    assert!(cfg.validate().is_err());
}

#[test]
fn gate_library_round_trips_through_disk() {
    let mut lib = GateLibrary::new(DeviceParams::reference_device(), 4);
    let pulse = PulseParams::new(9.4e8, 7e-9).with_alphas(0.93, 1.69, 1.97).with_detuning(-9.8e7);
    lib.insert(GateEntry { name: "x".into(), target: Target::X, pulse: pulse.clone(), eps_leak_2: 1e-7, eps_leak_3: 2e-7 });
    lib.insert(GateEntry { name: "x".into(), target: Target::X, pulse, eps_leak_2: 3e-7, eps_leak_3: 2e-7 });
    assert_eq!(lib.gates.len(), 1);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gates.json");
    lib.save(&path).unwrap();
    let back = GateLibrary::load(&path).unwrap();
    let g = back.get("x").unwrap();
    assert_eq!(g.eps_leak_2, 3e-7);
    assert_eq!(g.pulse, lib.gates[0].pulse);
    assert!(back.find_target(Target::XHalf).is_none());
}

#[test]
fn sweep_csv_has_one_row_per_length() {
    let rows = vec![SweepRow { t_p: 7e-9, record: None, error: Some("failed".into()) }];
    let mut out = Vec::new();
    write_sweep_csv(&rows, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("t_p_ns,alpha12"));
    assert!(lines[1].starts_with("7,") && lines[1].ends_with("failed"));
}
