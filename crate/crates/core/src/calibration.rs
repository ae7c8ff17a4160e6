//! Closed-loop gate calibration: Nelder-Mead over the correction weights
//! (α₁₂, α₀₂, α₁₃) with Rabi, AAE and APE finetuning of amplitude and
//! detuning, and ALE leakage as the cost.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::Target;
use crate::device::{DeviceParams, Transmon};
use crate::error::{Error, Result};
use crate::metrology::{aae_amplitude_update, aae_sequence_and_fit, ale_measure, ape_sequence_and_fit, rabi_scan, AleOptions};
use crate::nelder_mead::{axis_simplex, minimize, NelderMeadOptions, NelderMeadResult, StopReason};
use crate::propagator::{simulate_gate, GateProcess, LindbladChannels, PropagatorOptions};
use crate::pulse::{constant_detuning, r2d_squared_envelope, PulseParams};
use crate::units;

/// Cost assigned to tuples whose squared envelope goes negative or whose
/// finetuning fails.
pub const PENALTY: f64 = 1.0;

/// Largest detuning change per finetuning round (rad/s).
const MAX_DETUNING_STEP: f64 = 5e7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// All three weights free.
    R2d,
    /// Only α₁₂; α₀₂ = α₁₃ = 0.
    Drag,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationConfig {
    pub target: Target,
    #[serde(with = "units::time")]
    pub t_p: f64,
    #[serde(default = "default_variant")]
    pub variant: Variant,
    /// Simplex centre; for DRAG only the first entry is used.
    #[serde(default = "default_start")]
    pub start: [f64; 3],
    #[serde(default = "default_step")]
    pub simplex_step: f64,
    /// Further Nelder-Mead runs, each from a fresh simplex around the best
    /// point so far. The evaluation budget applies per run.
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    /// AAE/APE rounds per candidate.
    #[serde(default = "default_finetune")]
    pub finetune_iterations: usize,
    /// AAE/APE rounds in the final polish.
    #[serde(default = "default_polish")]
    pub polish_iterations: usize,
    /// Stop finetuning once |φ_e| falls below this (rad).
    #[serde(default = "default_phi_tol")]
    pub amplitude_tolerance: f64,
    /// Stop finetuning once |ω_e| per APE cycle falls below this (rad).
    #[serde(default = "default_omega_tol")]
    pub phase_tolerance: f64,
    /// Cost = w₂ ε_leak(|2>) + w₃ ε_leak(|3>).
    #[serde(default = "default_weights")]
    pub cost_weights: [f64; 2],
    #[serde(default)]
    pub nelder_mead: NelderMeadOptions,
    #[serde(default)]
    pub ale: AleOptions,
    /// Levels kept in the gate simulation.
    #[serde(default = "default_levels")]
    pub levels: usize,
    #[serde(default = "default_rabi_points")]
    pub rabi_points: usize,
    /// Repetition counts used by AAE and APE.
    #[serde(default = "default_finetune_n")]
    pub finetune_n_max: usize,
}

fn default_variant() -> Variant {
    Variant::R2d
}
fn default_start() -> [f64; 3] {
    [1.0, 1.0, 1.0]
}
fn default_step() -> f64 {
    0.5
}
fn default_restarts() -> usize {
    1
}
fn default_finetune() -> usize {
    2
}
fn default_polish() -> usize {
    6
}
fn default_phi_tol() -> f64 {
    1e-3
}
fn default_omega_tol() -> f64 {
    1e-5
}
fn default_weights() -> [f64; 2] {
    [1.0, 1.0]
}
fn default_levels() -> usize {
    4
}
fn default_rabi_points() -> usize {
    21
}
fn default_finetune_n() -> usize {
    30
}

impl CalibrationConfig {
    pub fn new(target: Target, t_p: f64) -> Self {
        Self {
            target,
            t_p,
            variant: default_variant(),
            start: default_start(),
            simplex_step: default_step(),
            restarts: default_restarts(),
            finetune_iterations: default_finetune(),
            polish_iterations: default_polish(),
            amplitude_tolerance: default_phi_tol(),
            phase_tolerance: default_omega_tol(),
            cost_weights: default_weights(),
            nelder_mead: NelderMeadOptions::default(),
            ale: AleOptions::default(),
            levels: default_levels(),
            rabi_points: default_rabi_points(),
            finetune_n_max: default_finetune_n(),
        }
    }

    pub fn drag(mut self) -> Self {
        self.variant = Variant::Drag;
        self
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.t_p > 0.0) {
            v.push(format!("t_p must be positive, got {:e} s", self.t_p));
        }
        if !(self.simplex_step.abs() > 0.0) {
            v.push("simplex step must be non-zero".into());
        }
        if !(self.amplitude_tolerance > 0.0 && self.phase_tolerance > 0.0) {
            v.push("finetuning tolerances must be positive".into());
        }
        if !(self.nelder_mead.x_tol > 0.0 && self.nelder_mead.f_tol > 0.0) {
            v.push("Nelder-Mead tolerances must be positive".into());
        }
        if self.nelder_mead.max_evaluations == 0 {
            v.push("Nelder-Mead evaluation budget must be positive".into());
        }
        if self.cost_weights.iter().any(|w| !(*w >= 0.0)) || self.cost_weights.iter().all(|w| *w == 0.0) {
            v.push("cost weights must be non-negative and not all zero".into());
        }
        if self.levels < 4 {
            v.push(format!("at least 4 levels are needed for |3> leakage, got {}", self.levels));
        }
        if self.rabi_points < 5 {
            v.push("at least 5 Rabi points are needed".into());
        }
        if self.finetune_n_max < 4 {
            v.push("finetune_n_max must be at least 4".into());
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::invalid(v.join("; ")))
        }
    }

    fn alphas_from(&self, x: &[f64]) -> [f64; 3] {
        match self.variant {
            Variant::R2d => [x[0], x[1], x[2]],
            Variant::Drag => [x[0], 0.0, 0.0],
        }
    }

    fn coordinates(&self) -> Vec<f64> {
        match self.variant {
            Variant::R2d => self.start.to_vec(),
            Variant::Drag => vec![self.start[0]],
        }
    }
}

/// JSON has no NaN; unmeasured quantities are written as null.
mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_nan() {
            s.serialize_none()
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

/// One evaluated (α₁₂, α₀₂, α₁₃) tuple.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub alphas: [f64; 3],
    pub pulse: Option<PulseParams>,
    #[serde(with = "nan_as_null")]
    pub eps_leak_2: f64,
    #[serde(with = "nan_as_null")]
    pub eps_leak_3: f64,
    pub cost: f64,
    /// Why the penalty was applied, if it was.
    pub penalty: Option<String>,
    #[serde(with = "nan_as_null")]
    pub phi_e: f64,
    #[serde(with = "nan_as_null")]
    pub omega_e: f64,
    pub finetune_rounds: usize,
    pub finetune_converged: bool,
    pub simulations: usize,
}

impl CandidateRecord {
    fn penalized(alphas: [f64; 3], reason: String, simulations: usize) -> Self {
        Self {
            alphas,
            pulse: None,
            eps_leak_2: f64::NAN,
            eps_leak_3: f64::NAN,
            cost: PENALTY,
            penalty: Some(reason),
            phi_e: f64::NAN,
            omega_e: f64::NAN,
            finetune_rounds: 0,
            finetune_converged: false,
            simulations,
        }
    }
}

/// Model the gate simulations run against.
#[derive(Debug, Clone)]
pub struct Calibrator {
    pub device: DeviceParams,
    pub transmon: Transmon,
    pub options: PropagatorOptions,
}

impl Calibrator {
    pub fn new(device: &DeviceParams, levels: usize) -> Result<Self> {
        let transmon = Transmon::new(&device.coherent(), levels)?;
        Ok(Self { device: device.clone(), transmon, options: PropagatorOptions::default() })
    }

    pub fn anharmonicity(&self) -> f64 {
        self.transmon.anharmonicity()
    }

    pub fn gate(&self, pulse: &PulseParams) -> Result<GateProcess> {
        simulate_gate(&self.transmon, pulse, &LindbladChannels::coherent(), &self.options)
    }

    /// Nominal amplitude giving a rotation by `angle` for the bare sin⁴
    /// envelope (area `3t_p/8`).
    pub fn area_amplitude(angle: f64, t_p: f64) -> f64 {
        angle / (3.0 * t_p / 8.0)
    }

    /// Closed-form detuning seed (the X-gate expression, used for both
    /// targets).
    pub fn detuning_seed(&self, alpha12: f64, t_p: f64) -> Result<f64> {
        constant_detuning(alpha12, self.anharmonicity(), t_p)
    }

    /// Rabi coarse amplitude, then alternating AAE (amplitude) and APE
    /// (detuning) rounds, then ALE on |2> and |3>.
    pub fn evaluate(&self, alphas: [f64; 3], cfg: &CalibrationConfig, rounds: usize) -> CandidateRecord {
        let mut sims = 0usize;
        let base = PulseParams::new(Self::area_amplitude(PI, cfg.t_p), cfg.t_p).with_alphas(alphas[0], alphas[1], alphas[2]);
        if let Err(e) = r2d_squared_envelope(&base, self.anharmonicity()) {
            return CandidateRecord::penalized(alphas, e.to_string(), sims);
        }
        match self.finetune(base, alphas, cfg, rounds, &mut sims) {
            Ok(r) => r,
            Err(e) => CandidateRecord::penalized(alphas, e.to_string(), sims),
        }
    }

    fn finetune(
        &self,
        base: PulseParams,
        alphas: [f64; 3],
        cfg: &CalibrationConfig,
        rounds: usize,
        sims: &mut usize,
    ) -> Result<CandidateRecord> {
        let target = cfg.target;
        let nominal = base.amplitude;
        let seed = self.detuning_seed(alphas[0], cfg.t_p)?;
        let amps: Vec<f64> = (0..cfg.rabi_points).map(|i| 2.0 * nominal * (i + 1) as f64 / cfg.rabi_points as f64).collect();
        let (_, rabi) = rabi_scan(&self.transmon, &base.clone().with_detuning(seed), &amps, &LindbladChannels::coherent(), &self.options)?;
        *sims += amps.len();
        let mut pulse = PulseParams {
            amplitude: rabi.value("a_pi") * target.angle() / PI,
            detuning: seed,
            ..base
        };
        let ns: Vec<usize> = (0..=cfg.finetune_n_max).collect();
        // The APE response to detuning is measured by a finite difference in
        // the first round and updated by secants afterwards. Estimates outside
        // a window around a rough prior (possible while the amplitude is still
        // far off) are discarded.
        let probe = 1e6;
        let prior = cfg.t_p * target.angle() / PI;
        let plausible = |s: f64| s > 0.2 * prior && s < 5.0 * prior;
        let mut slope = f64::NAN;
        let mut previous: Option<(f64, f64)> = None;
        let (mut phi_e, mut omega_e) = (f64::NAN, f64::NAN);
        let mut converged = false;
        let mut done = 0;
        for _ in 0..rounds {
            done += 1;
            let g = self.gate(&pulse)?;
            *sims += 1;
            phi_e = aae_sequence_and_fit(&g, target, &ns)?.value("phi_e");
            pulse.amplitude = aae_amplitude_update(pulse.amplitude, phi_e);
            let g = self.gate(&pulse)?;
            *sims += 1;
            omega_e = ape_sequence_and_fit(&g, target, &ns)?.value("omega_e");
            match previous {
                None => {
                    let shifted = PulseParams { detuning: pulse.detuning + probe, ..pulse.clone() };
                    let g = self.gate(&shifted)?;
                    *sims += 1;
                    slope = (ape_sequence_and_fit(&g, target, &ns)?.value("omega_e") - omega_e) / probe;
                    if !plausible(slope) {
                        slope = prior;
                    }
                }
                Some((d0, w0)) => {
                    let s = (omega_e - w0) / (pulse.detuning - d0);
                    if plausible(s) {
                        slope = s;
                    }
                }
            }
            previous = Some((pulse.detuning, omega_e));
            pulse.detuning -= (omega_e / slope).clamp(-MAX_DETUNING_STEP, MAX_DETUNING_STEP);
            log::debug!("finetune: phi_e {phi_e:e} omega_e {omega_e:e} slope {slope:e} amp {:e} det {:e}", pulse.amplitude, pulse.detuning);
            if phi_e.abs() < cfg.amplitude_tolerance && omega_e.abs() < cfg.phase_tolerance {
                converged = true;
                break;
            }
        }
        let g = self.gate(&pulse)?;
        *sims += 1;
        let (_, r2) = ale_measure(&g, target, 2, &cfg.ale, None)?;
        let (_, r3) = ale_measure(&g, target, 3, &cfg.ale, None)?;
        let cost = cfg.cost_weights[0] * r2.epsilon + cfg.cost_weights[1] * r3.epsilon;
        Ok(CandidateRecord {
            alphas,
            pulse: Some(pulse),
            eps_leak_2: r2.epsilon,
            eps_leak_3: r3.epsilon,
            cost,
            penalty: None,
            phi_e,
            omega_e,
            finetune_rounds: done,
            finetune_converged: converged,
            simulations: *sims,
        })
    }

    /// Nelder-Mead over the weights, then a polish pass at the optimum.
    /// `cache` holds earlier evaluations (keyed by exact α bits) to resume
    /// an interrupted run; `sink` sees every new evaluation.
    pub fn optimize(
        &self,
        cfg: &CalibrationConfig,
        cache: &[CandidateRecord],
        sink: &mut dyn FnMut(&CandidateRecord),
    ) -> Result<CalibrationRecord> {
        cfg.validate()?;
        let key = |a: &[f64; 3]| a.map(f64::to_bits);
        let mut known: HashMap<[u64; 3], CandidateRecord> = cache.iter().map(|r| (key(&r.alphas), r.clone())).collect();
        let mut history: Vec<CandidateRecord> = Vec::new();
        let mut x0 = cfg.coordinates();
        let mut best: Option<NelderMeadResult> = None;
        for _ in 0..=cfg.restarts {
            let nm = minimize(
                |x| {
                    let alphas = cfg.alphas_from(x);
                    let rec = match known.get(&key(&alphas)) {
                        Some(r) => r.clone(),
                        None => {
                            let r = self.evaluate(alphas, cfg, cfg.finetune_iterations);
                            sink(&r);
                            known.insert(key(&alphas), r.clone());
                            r
                        }
                    };
                    let c = rec.cost;
                    history.push(rec);
                    // searched on a log scale so the stopping rule and simplex
                    // moves behave alike across decades of leakage
                    c.max(1e-30).log10()
                },
                axis_simplex(&x0, cfg.simplex_step),
                &cfg.nelder_mead,
            );
            x0 = nm.x.clone();
            if best.as_ref().map_or(true, |b| nm.value < b.value) {
                best = Some(nm);
            }
        }
        let nm = best.expect("at least one run");
        let alphas = cfg.alphas_from(&nm.x);
        let polished = self.evaluate(alphas, cfg, cfg.polish_iterations);
        sink(&polished);
        let simulations = history.iter().map(|r| r.simulations).sum::<usize>() + polished.simulations;
        let best_search_cost = 10f64.powf(nm.value);
        let flagged = nm.reason == StopReason::Budget;
        if flagged {
            log::warn!("Nelder-Mead stopped on the evaluation budget; returning the best point so far");
        }
        Ok(CalibrationRecord {
            config: cfg.clone(),
            best_search_cost,
            optimum: polished,
            history,
            stop_reason: nm.reason,
            flagged,
            simulations,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub config: CalibrationConfig,
    /// Every evaluation in order, simplex vertices included.
    pub history: Vec<CandidateRecord>,
    /// Cost of the best vertex during the search.
    pub best_search_cost: f64,
    /// Best vertex after the polish pass.
    pub optimum: CandidateRecord,
    pub stop_reason: StopReason,
    /// The evaluation budget ran out before convergence.
    pub flagged: bool,
    pub simulations: usize,
}

/// Independent calibration at each pulse length; failures are recorded and
/// the sweep continues.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(with = "units::time")]
    pub t_p: f64,
    pub record: Option<CalibrationRecord>,
    pub error: Option<String>,
}

pub fn length_sweep(cal: &Calibrator, template: &CalibrationConfig, lengths: &[f64]) -> Vec<SweepRow> {
    lengths
        .par_iter()
        .map(|&t_p| {
            let cfg = CalibrationConfig { t_p, ..template.clone() };
            match cal.optimize(&cfg, &[], &mut |_| {}) {
                Ok(r) => SweepRow { t_p, record: Some(r), error: None },
                Err(e) => SweepRow { t_p, record: None, error: Some(e.to_string()) },
            }
        })
        .collect()
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record([
        "t_p_ns", "alpha12", "alpha02", "alpha13", "amplitude_rad_per_s", "detuning_rad_per_s", "eps_leak_2", "eps_leak_3", "cost", "error",
    ])?;
    for r in rows {
        let t = (r.t_p * 1e9).to_string();
        match &r.record {
            Some(rec) => {
                let o = &rec.optimum;
                let (a, d) = o.pulse.as_ref().map(|p| (p.amplitude, p.detuning)).unwrap_or((f64::NAN, f64::NAN));
                wr.serialize((t, o.alphas[0], o.alphas[1], o.alphas[2], a, d, o.eps_leak_2, o.eps_leak_3, o.cost, ""))?;
            }
            None => {
                let nan = f64::NAN;
                wr.serialize((t, nan, nan, nan, nan, nan, nan, nan, nan, r.error.clone().unwrap_or_default()))?;
            }
        }
    }
    wr.flush()?;
    Ok(())
}

/// Appends one JSON object per line.
pub fn write_jsonl<W: Write>(record: &CandidateRecord, mut w: W) -> Result<()> {
    serde_json::to_writer(&mut w, record)?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn read_jsonl<R: BufRead>(r: R) -> Result<Vec<CandidateRecord>> {
    r.lines()
        .filter(|l| l.as_ref().map(|s| !s.trim().is_empty()).unwrap_or(true))
        .map(|l| Ok(serde_json::from_str(&l?)?))
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateEntry {
    pub name: String,
    pub target: Target,
    pub pulse: PulseParams,
    pub eps_leak_2: f64,
    pub eps_leak_3: f64,
}

/// Calibrated pulses keyed by name, shared between calibration, benchmarks
/// and the command line.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateLibrary {
    pub device: DeviceParams,
    pub levels: usize,
    pub gates: Vec<GateEntry>,
}

impl GateLibrary {
    pub fn new(device: DeviceParams, levels: usize) -> Self {
        Self { device, levels, gates: Vec::new() }
    }

    /// Inserts or replaces the gate with the same name.
    pub fn insert(&mut self, entry: GateEntry) {
        self.gates.retain(|g| g.name != entry.name);
        self.gates.push(entry);
    }

    pub fn from_record(&mut self, name: &str, rec: &CalibrationRecord) -> Result<()> {
        let pulse = rec
            .optimum
            .pulse
            .clone()
            .ok_or_else(|| Error::invalid(format!("calibration of {name} produced no valid pulse")))?;
        self.insert(GateEntry {
            name: name.to_string(),
            target: rec.config.target,
            pulse,
            eps_leak_2: rec.optimum.eps_leak_2,
            eps_leak_3: rec.optimum.eps_leak_3,
        });
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&GateEntry> {
        self.gates.iter().find(|g| g.name == name)
    }

    pub fn find_target(&self, target: Target) -> Option<&GateEntry> {
        self.gates.iter().find(|g| g.target == target)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

#[cfg(test)]
mod tests;
