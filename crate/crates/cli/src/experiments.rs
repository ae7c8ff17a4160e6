//! One function per experiment kind. Each writes its artifacts into the run
//! directory and returns headline numbers for `summary.json`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context as _, Result};
use r2d::analysis::{decompose_leakage, unitary_error_metrics, AssignmentMatrix, Target};
use r2d::bench::{build_clifford_group, run_lrb, run_prb, run_rb, BenchResult};
use r2d::calibration::{
    length_sweep, read_jsonl, write_jsonl, write_sweep_csv, CalibrationConfig, CalibrationRecord, Calibrator, GateLibrary, Variant,
};
use r2d::device::{DeviceParams, Transmon};
use r2d::linalg::ket;
use r2d::metrology::{aae_sequence, aae_sequence_and_fit, ale_measure, ape_sequence, ape_sequence_and_fit, rabi_scan};
use r2d::propagator::{
    simulate_gate, simulate_gates, unitary_trajectory, write_trajectory_csv, DriveWaveform, GateProcess, LindbladChannels, PropagatorOptions,
};
use r2d::pulse::{constant_detuning, dtft_complex, dtft_real, spectrum, synthesize, PulseParams};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::{
    AleScanOptions, AmplifiedOptions, BenchOptions, CalibrateOptions, DragCompareOptions, ExperimentConfig, Kind, Options, PulseSpec,
    RabiOptions, SpamMode, SpectrumOptions, SweepOptions, TrajectoryOptions,
};

/// Run directory plus the names of the files written so far.
pub struct Artifacts {
    dir: PathBuf,
    pub files: Vec<String>,
}

impl Artifacts {
    pub fn new(dir: &Path) -> Self {
        Self { dir: dir.to_path_buf(), files: Vec::new() }
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        let f = File::create(self.dir.join(name)).with_context(|| format!("creating {name}"))?;
        self.files.push(name.to_string());
        Ok(BufWriter::new(f))
    }

    fn csv(&mut self, name: &str, write: impl FnOnce(&mut BufWriter<File>) -> r2d::Result<()>) -> Result<()> {
        let mut w = self.create(name)?;
        write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    fn library(&mut self, name: &str, lib: &GateLibrary) -> Result<()> {
        lib.save(&self.dir.join(name))?;
        self.files.push(name.to_string());
        Ok(())
    }
}

pub fn execute(cfg: &ExperimentConfig, out: &mut Artifacts) -> Result<Map<String, Value>> {
    let summary = match &cfg.options {
        Options::Spectrum(o) => run_spectrum(cfg, o, out)?,
        Options::Trajectory(o) => run_trajectory(cfg, o, out)?,
        Options::AleScan(o) => run_ale(cfg, o, out)?,
        Options::Aae(o) => run_aae(cfg, o, out)?,
        Options::Ape(o) => run_ape(cfg, o, out)?,
        Options::Rabi(o) => run_rabi(cfg, o, out)?,
        Options::Bench(o) => run_bench(cfg, o, out)?,
        Options::Calibrate(o) => run_calibrate(cfg, o, out)?,
        Options::LengthSweep(o) => run_sweep(cfg, o, out)?,
        Options::DragCompare(o) => run_drag_compare(cfg, o, out)?,
    };
    let summary = match summary {
        Value::Object(m) => m,
        other => bail!("summary must be an object, got {other}"),
    };
    out.json("summary.json", &summary)?;
    Ok(summary)
}

fn load_library(path: &Path, device: &DeviceParams) -> Result<GateLibrary> {
    let lib = GateLibrary::load(path).with_context(|| format!("reading gate library {}", path.display()))?;
    if lib.device.coherent() != device.coherent() {
        bail!("gate library {} was calibrated for a different device Hamiltonian", path.display());
    }
    Ok(lib)
}

fn default_gate_name(t: Target) -> &'static str {
    match t {
        Target::X => "x",
        Target::XHalf => "x_half",
    }
}

fn coherent_transmon(cfg: &ExperimentConfig) -> Result<Transmon> {
    Ok(Transmon::new(&cfg.device.coherent(), cfg.levels)?)
}

fn resolve_pulse(spec: &PulseSpec, cfg: &ExperimentConfig, tr: &Transmon) -> Result<(PulseParams, Target)> {
    if let Some(path) = &spec.library {
        let lib = load_library(path, &cfg.device)?;
        let entry = match &spec.name {
            Some(n) => lib.get(n).ok_or_else(|| anyhow!("gate library has no entry {n:?}"))?,
            None => lib.find_target(spec.gate).ok_or_else(|| anyhow!("gate library has no {} gate", spec.gate.label()))?,
        };
        return Ok((entry.pulse.clone(), entry.target));
    }
    let amplitude = spec.amplitude.unwrap_or_else(|| Calibrator::area_amplitude(spec.gate.angle(), spec.t_p));
    let detuning = match spec.detuning {
        Some(d) => d,
        None => constant_detuning(spec.alpha[0], tr.anharmonicity(), spec.t_p)?,
    };
    let [a12, a02, a13] = spec.alpha;
    let p = PulseParams::new(amplitude, spec.t_p).with_alphas(a12, a02, a13).with_detuning(detuning);
    p.validate()?;
    Ok((p, spec.gate))
}

fn spam_matrix(cfg: &ExperimentConfig) -> Option<AssignmentMatrix> {
    (cfg.spam == SpamMode::On).then(AssignmentMatrix::measured)
}

fn gate_metrics(g: &GateProcess, target: Target) -> Value {
    let Some(u) = g.unitary() else { return Value::Null };
    let (f, leak) = unitary_error_metrics(u, &target.ideal());
    let d = decompose_leakage(u, target).ok();
    json!({ "infidelity": 1.0 - f, "leakage": leak, "decomposition": d })
}

fn run_spectrum(cfg: &ExperimentConfig, o: &SpectrumOptions, out: &mut Artifacts) -> Result<Value> {
    let tr = coherent_transmon(cfg)?;
    let (pulse, _) = resolve_pulse(&o.pulse, cfg, &tr)?;
    let env = synthesize(&pulse, tr.anharmonicity())?;
    let spec = spectrum(&env, o.points, o.span);
    out.csv("envelope.csv", |w| env.write_csv(w))?;
    out.csv("spectrum.csv", |w| spec.write_csv(w))?;
    let peak = |v: &[r2d::linalg::C64]| v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let (peak_omega, peak_sq) = (peak(&spec.ft_omega), peak(&spec.ft_omega_sq));
    let dt = env.sample_period();
    let mut rows = Vec::new();
    let mut w = out.create("notches.csv")?;
    writeln!(w, "label,signal,freq_rad_s,relative_depth")?;
    for n in &spec.notches {
        let depth = if n.signal == "omega" {
            dtft_complex(&env.times, &env.omega, dt, n.frequency).norm() / peak_omega
        } else {
            dtft_real(&env.times, &env.omega_r_squared, dt, n.frequency).norm() / peak_sq
        };
        writeln!(w, "{},{},{},{}", n.label, n.signal, n.frequency, depth)?;
        rows.push(json!({ "label": n.label, "signal": n.signal, "freq_rad_s": n.frequency, "relative_depth": depth }));
    }
    w.flush()?;
    Ok(json!({ "pulse": pulse, "degraded": env.degraded, "notches": rows }))
}

fn run_trajectory(cfg: &ExperimentConfig, o: &TrajectoryOptions, out: &mut Artifacts) -> Result<Value> {
    let tr = coherent_transmon(cfg)?;
    let (pulse, _) = resolve_pulse(&o.pulse, cfg, &tr)?;
    let opts = PropagatorOptions::default();
    let env = synthesize(&pulse, tr.anharmonicity())?;
    let wave = DriveWaveform::new(&env, opts.carrier_for(&tr));
    let points = unitary_trajectory(&tr, &wave, &ket(o.initial, cfg.levels), o.samples, &opts)?;
    out.csv("trajectory.csv", |w| write_trajectory_csv(&points, w))?;
    let last = points.last().ok_or_else(|| anyhow!("empty trajectory"))?;
    Ok(json!({ "pulse": pulse, "final_populations": last.populations, "final_bloch": last.bloch }))
}

fn run_ale(cfg: &ExperimentConfig, o: &AleScanOptions, out: &mut Artifacts) -> Result<Value> {
    let tr = coherent_transmon(cfg)?;
    let (pulse, target) = resolve_pulse(&o.pulse, cfg, &tr)?;
    let g = simulate_gate(&tr, &pulse, &LindbladChannels::coherent(), &PropagatorOptions::default())?;
    let spam = spam_matrix(cfg);
    let (scan, result) = ale_measure(&g, target, o.level, &o.ale, spam.as_ref())?;
    out.csv("ale_scan.csv", |w| scan.write_csv(w))?;
    out.json("ale.json", &result)?;
    Ok(json!({
        "pulse": pulse,
        "level": o.level,
        "epsilon": result.epsilon,
        "epsilon_err": result.epsilon_err,
        "phases": result.phases,
        "spacing_error": result.spacing_error,
        "unitary": gate_metrics(&g, target),
    }))
}

fn amplified_setup(cfg: &ExperimentConfig, o: &AmplifiedOptions) -> Result<(PulseParams, Target, GateProcess, Vec<usize>)> {
    let tr = coherent_transmon(cfg)?;
    let (pulse, target) = resolve_pulse(&o.pulse, cfg, &tr)?;
    let g = simulate_gate(&tr, &pulse, &LindbladChannels::coherent(), &PropagatorOptions::default())?;
    Ok((pulse, target, g, (0..=o.n_max).collect()))
}

fn run_aae(cfg: &ExperimentConfig, o: &AmplifiedOptions, out: &mut Artifacts) -> Result<Value> {
    let (pulse, target, g, ns) = amplified_setup(cfg, o)?;
    let signal = aae_sequence(&g, target, &ns)?;
    let fit = aae_sequence_and_fit(&g, target, &ns)?;
    let mut w = out.create("aae.csv")?;
    writeln!(w, "n,p1_minus_p0")?;
    for (n, s) in ns.iter().zip(&signal) {
        writeln!(w, "{n},{s}")?;
    }
    w.flush()?;
    out.json("aae_fit.json", &fit)?;
    let phi_e = fit.value("phi_e");
    Ok(json!({
        "pulse": pulse,
        "phi_e": phi_e,
        "phi_e_err": fit.error("phi_e"),
        "corrected_amplitude_rad_per_s": r2d::metrology::aae_amplitude_update(pulse.amplitude, phi_e),
    }))
}

fn run_ape(cfg: &ExperimentConfig, o: &AmplifiedOptions, out: &mut Artifacts) -> Result<Value> {
    let (pulse, target, g, ns) = amplified_setup(cfg, o)?;
    let signal = ape_sequence(&g, target, &ns)?;
    let fit = ape_sequence_and_fit(&g, target, &ns)?;
    let mut w = out.create("ape.csv")?;
    writeln!(w, "n,re,im")?;
    for (n, s) in ns.iter().zip(&signal) {
        writeln!(w, "{n},{},{}", s.re, s.im)?;
    }
    w.flush()?;
    out.json("ape_fit.json", &fit)?;
    Ok(json!({ "pulse": pulse, "omega_e": fit.value("omega_e"), "omega_e_err": fit.error("omega_e") }))
}

fn run_rabi(cfg: &ExperimentConfig, o: &RabiOptions, out: &mut Artifacts) -> Result<Value> {
    let tr = coherent_transmon(cfg)?;
    let (pulse, _) = resolve_pulse(&o.pulse, cfg, &tr)?;
    let top = o.max_factor * pulse.amplitude;
    let amps: Vec<f64> = (0..o.points).map(|i| top * i as f64 / (o.points - 1) as f64).collect();
    let (p1, fit) = rabi_scan(&tr, &pulse, &amps, &LindbladChannels::coherent(), &PropagatorOptions::default())?;
    let mut w = out.create("rabi.csv")?;
    writeln!(w, "amplitude_rad_per_s,p1")?;
    for (a, p) in amps.iter().zip(&p1) {
        writeln!(w, "{a},{p}")?;
    }
    w.flush()?;
    out.json("rabi_fit.json", &fit)?;
    Ok(json!({ "pulse": pulse, "a_pi_rad_per_s": fit.value("a_pi"), "a_pi_err": fit.error("a_pi") }))
}

/// X and X/2 processes from a library, simulated on the benchmark device.
/// `replace` substitutes the pulse used for one of the two targets.
fn library_gates(
    lib: &GateLibrary,
    cfg: &ExperimentConfig,
    open: bool,
    replace: Option<(Target, &PulseParams)>,
) -> Result<(GateProcess, GateProcess)> {
    let pick = |t: Target| -> Result<PulseParams> {
        if let Some((rt, p)) = replace {
            if rt == t {
                return Ok(p.clone());
            }
        }
        Ok(lib.find_target(t).ok_or_else(|| anyhow!("gate library has no {} gate", t.label()))?.pulse.clone())
    };
    let pulses = [pick(Target::X)?, pick(Target::XHalf)?];
    let dev = if open { cfg.device.clone() } else { cfg.device.coherent() };
    let tr = Transmon::new(&dev, cfg.levels)?;
    let ch = LindbladChannels::from_device(&dev)?;
    let mut gs = simulate_gates(&tr, &pulses, &ch, &PropagatorOptions::default()).into_iter();
    Ok((gs.next().unwrap()?, gs.next().unwrap()?))
}

fn bench_summary(r: &BenchResult) -> Value {
    json!({
        "kind": r.kind,
        "level": r.level,
        "epsilon": r.epsilon,
        "epsilon_err": r.epsilon_err,
        "reference_rate": r.reference.rate,
        "reference_leakage": r.reference.leakage,
        "flagged": r.flagged,
        "average_pulses_per_clifford": r.average_pulses,
    })
}

fn run_bench(cfg: &ExperimentConfig, o: &BenchOptions, out: &mut Artifacts) -> Result<Value> {
    let lib = load_library(&o.library, &cfg.device)?;
    let (gx, gxh) = library_gates(&lib, cfg, o.open, None)?;
    let group = build_clifford_group(&gx, &gxh)?;
    let target = o.interleave.map(|t| (if t == Target::X { &gx } else { &gxh }, t));
    let result = match cfg.experiment {
        Kind::Rb => run_rb(&group, &o.rb, target, spam_matrix(cfg).as_ref())?,
        Kind::Lrb => run_lrb(&group, &o.rb, target, o.level)?,
        Kind::Prb => run_prb(&group, &o.rb, target)?,
        k => bail!("{} is not a benchmark", k.name()),
    };
    out.csv("curves.csv", |w| result.write_csv(w))?;
    out.json("result.json", &result)?;
    Ok(bench_summary(&result))
}

fn optimum_summary(rec: &CalibrationRecord) -> Value {
    let o = &rec.optimum;
    json!({
        "alphas": o.alphas,
        "pulse": o.pulse,
        "eps_leak_2": o.eps_leak_2,
        "eps_leak_3": o.eps_leak_3,
        "cost": o.cost,
        "finetune_converged": o.finetune_converged,
        "stop_reason": rec.stop_reason,
        "flagged": rec.flagged,
        "simulations": rec.simulations,
    })
}

fn run_calibrate(cfg: &ExperimentConfig, o: &CalibrateOptions, out: &mut Artifacts) -> Result<Value> {
    let c = &o.calibration;
    let cal = Calibrator::new(&cfg.device, c.levels)?;
    let cache = match &o.resume {
        Some(p) => read_jsonl(BufReader::new(File::open(p).with_context(|| format!("opening {}", p.display()))?))?,
        None => Vec::new(),
    };
    let mut log = out.create("calibration.jsonl")?;
    for r in &cache {
        write_jsonl(r, &mut log)?;
    }
    let mut failed = None;
    let rec = cal.optimize(c, &cache, &mut |r| {
        if let Err(e) = write_jsonl(r, &mut log) {
            failed.get_or_insert(e);
        }
    })?;
    if let Some(e) = failed {
        return Err(e.into());
    }
    log.flush()?;
    drop(log);
    let mut lib = match &o.library {
        Some(p) => load_library(p, &cfg.device)?,
        None => GateLibrary::new(cfg.device.clone(), c.levels),
    };
    let name = o.name.clone().unwrap_or_else(|| default_gate_name(c.target).to_string());
    lib.from_record(&name, &rec)?;
    out.library("gates.json", &lib)?;
    out.json("record.json", &rec)?;
    Ok(optimum_summary(&rec))
}

fn run_sweep(cfg: &ExperimentConfig, o: &SweepOptions, out: &mut Artifacts) -> Result<Value> {
    let c = &o.calibration;
    let cal = Calibrator::new(&cfg.device, c.levels)?;
    let rows = length_sweep(&cal, c, &o.lengths);
    out.csv("sweep.csv", |w| write_sweep_csv(&rows, w))?;
    let mut lib = GateLibrary::new(cfg.device.clone(), c.levels);
    let mut per_length = Vec::new();
    for r in &rows {
        let label = r2d::units::format_time(r.t_p);
        match &r.record {
            Some(rec) => {
                let name = format!("{}_{}", default_gate_name(c.target), label.replace(' ', ""));
                if rec.optimum.pulse.is_some() {
                    lib.from_record(&name, rec)?;
                }
                per_length.push(json!({ "t_p": label, "optimum": optimum_summary(rec) }));
            }
            None => per_length.push(json!({ "t_p": label, "error": r.error })),
        }
    }
    out.library("gates.json", &lib)?;
    out.json("sweep.json", &rows)?;
    Ok(json!({ "lengths": per_length }))
}

struct VariantRow {
    name: &'static str,
    record: CalibrationRecord,
    rb: Option<BenchResult>,
    lrb: Option<BenchResult>,
}

fn run_drag_compare(cfg: &ExperimentConfig, o: &DragCompareOptions, out: &mut Artifacts) -> Result<Value> {
    let c = &o.calibration;
    let cal = Calibrator::new(&cfg.device, c.levels)?;
    let configs = [("r2d", CalibrationConfig { variant: Variant::R2d, ..c.clone() }), ("drag", c.clone().drag())];
    let mut rows = Vec::new();
    for (name, vc) in configs {
        log::info!("calibrating the {name} variant");
        let record = cal.optimize(&vc, &[], &mut |_| {})?;
        if !record.optimum.finetune_converged {
            bail!(
                "{name} gate did not pass AAE/APE (|φ_e| = {:e}, |ω_e| = {:e}); comparison needs both variants finetuned",
                record.optimum.phi_e.abs(),
                record.optimum.omega_e.abs()
            );
        }
        rows.push(VariantRow { name, record, rb: None, lrb: None });
    }
    if let Some(b) = &o.benchmark {
        let lib = load_library(&b.library, &cfg.device)?;
        for row in &mut rows {
            let pulse = row.record.optimum.pulse.clone().ok_or_else(|| anyhow!("{} optimum has no pulse", row.name))?;
            let (gx, gxh) = library_gates(&lib, cfg, b.open, Some((c.target, &pulse)))?;
            let group = build_clifford_group(&gx, &gxh)?;
            let gate = if c.target == Target::X { gx } else { gxh };
            row.rb = Some(run_rb(&group, &b.rb, Some((&gate, c.target)), None)?);
            row.lrb = Some(run_lrb(&group, &b.rb, Some((&gate, c.target)), 2)?);
        }
    }
    let mut lib = GateLibrary::new(cfg.device.clone(), c.levels);
    let mut w = out.create("comparison.csv")?;
    writeln!(
        w,
        "variant,alpha12,alpha02,alpha13,amplitude_rad_per_s,detuning_rad_per_s,eps_leak_2,eps_leak_3,eps_leak_total,phi_e,omega_e,finetune_converged,rb_eps_tot,lrb_eps_leak"
    )?;
    let mut table = Vec::new();
    for row in &rows {
        let opt = &row.record.optimum;
        let p = opt.pulse.as_ref().ok_or_else(|| anyhow!("{} optimum has no pulse", row.name))?;
        let eps = |r: &Option<BenchResult>| r.as_ref().and_then(|r| r.epsilon).unwrap_or(f64::NAN);
        let total = opt.eps_leak_2 + opt.eps_leak_3;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            row.name,
            opt.alphas[0],
            opt.alphas[1],
            opt.alphas[2],
            p.amplitude,
            p.detuning,
            opt.eps_leak_2,
            opt.eps_leak_3,
            total,
            opt.phi_e,
            opt.omega_e,
            opt.finetune_converged,
            eps(&row.rb),
            eps(&row.lrb)
        )?;
        lib.from_record(&format!("{}_{}", default_gate_name(c.target), row.name), &row.record)?;
        table.push(json!({
            "variant": row.name,
            "optimum": optimum_summary(&row.record),
            "eps_leak_total": total,
            "rb": row.rb.as_ref().map(bench_summary),
            "lrb": row.lrb.as_ref().map(bench_summary),
        }));
    }
    w.flush()?;
    drop(w);
    out.library("gates.json", &lib)?;
    let records: Vec<&CalibrationRecord> = rows.iter().map(|r| &r.record).collect();
    out.json("records.json", &records)?;
    let total = |i: usize| rows[i].record.optimum.eps_leak_2 + rows[i].record.optimum.eps_leak_3;
    Ok(json!({ "variants": table, "drag_over_r2d_leakage": total(1) / total(0) }))
}
