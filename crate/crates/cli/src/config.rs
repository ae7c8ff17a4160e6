//! Experiment configuration documents.
//!
//! A document is a JSON object with the experiment kind, the device, global
//! settings and a kind-specific `options` object. Every section is parsed
//! strictly; all problems found are reported together.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use r2d::analysis::Target;
use r2d::bench::RbConfig;
use r2d::calibration::CalibrationConfig;
use r2d::device::DeviceParams;
use r2d::metrology::AleOptions;
use r2d::units;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Spectrum,
    Trajectory,
    AleScan,
    Aae,
    Ape,
    Rabi,
    Rb,
    Lrb,
    Prb,
    Calibrate,
    LengthSweep,
    DragCompare,
}

impl Kind {
    pub fn name(&self) -> &'static str {
        match self {
            Kind::Spectrum => "spectrum",
            Kind::Trajectory => "trajectory",
            Kind::AleScan => "ale-scan",
            Kind::Aae => "aae",
            Kind::Ape => "ape",
            Kind::Rabi => "rabi",
            Kind::Rb => "rb",
            Kind::Lrb => "lrb",
            Kind::Prb => "prb",
            Kind::Calibrate => "calibrate",
            Kind::LengthSweep => "length-sweep",
            Kind::DragCompare => "drag-compare",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SpamMode {
    On,
    #[default]
    Off,
}

fn default_target() -> Target {
    Target::X
}
fn default_tp() -> f64 {
    7e-9
}
fn default_alpha() -> [f64; 3] {
    [1.0, 1.0, 1.0]
}

/// Where a pulse comes from: explicit shape parameters, or a named entry of
/// a gate library written by `calibrate`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSpec {
    #[serde(default = "default_target")]
    pub gate: Target,
    #[serde(default = "default_tp", with = "units::time")]
    pub t_p: f64,
    /// (α₁₂, α₀₂, α₁₃).
    #[serde(default = "default_alpha")]
    pub alpha: [f64; 3],
    /// Defaults to the pulse-area amplitude of the target rotation.
    #[serde(default, with = "units::angular::option")]
    pub amplitude: Option<f64>,
    /// Defaults to the closed-form constant detuning.
    #[serde(default, with = "units::angular::option")]
    pub detuning: Option<f64>,
    #[serde(default)]
    pub library: Option<PathBuf>,
    /// Library entry; defaults to the first entry with the requested target.
    #[serde(default)]
    pub name: Option<String>,
}

impl Default for PulseSpec {
    fn default() -> Self {
        Self {
            gate: Target::X,
            t_p: default_tp(),
            alpha: default_alpha(),
            amplitude: None,
            detuning: None,
            library: None,
            name: None,
        }
    }
}

impl PulseSpec {
    fn violations(&self, v: &mut Vec<String>) {
        if !(self.t_p > 0.0) {
            v.push(format!("options.pulse.t_p must be positive, got {:e} s", self.t_p));
        }
        if self.alpha.iter().any(|a| !a.is_finite()) {
            v.push("options.pulse.alpha must be finite".into());
        }
        if let Some(a) = self.amplitude {
            if !(a > 0.0) {
                v.push(format!("options.pulse.amplitude must be positive, got {a:e} rad/s"));
            }
        }
        if self.name.is_some() && self.library.is_none() {
            v.push("options.pulse.name needs options.pulse.library".into());
        }
    }
}

fn d_points() -> usize {
    4001
}
fn d_span() -> f64 {
    6.0
}
fn d_samples() -> usize {
    201
}
fn d_level() -> usize {
    2
}
fn d_n_max() -> usize {
    30
}
fn d_rabi_points() -> usize {
    41
}
fn d_rabi_factor() -> f64 {
    2.5
}
fn d_true() -> bool {
    true
}
fn d_interleave() -> Option<Target> {
    Some(Target::X)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumOptions {
    #[serde(default)]
    pub pulse: PulseSpec,
    #[serde(default = "d_points")]
    pub points: usize,
    /// Half-width of the frequency grid in units of |Δ|.
    #[serde(default = "d_span")]
    pub span: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryOptions {
    #[serde(default)]
    pub pulse: PulseSpec,
    #[serde(default)]
    pub initial: usize,
    #[serde(default = "d_samples")]
    pub samples: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AleScanOptions {
    #[serde(default)]
    pub pulse: PulseSpec,
    #[serde(default = "d_level")]
    pub level: usize,
    #[serde(default)]
    pub ale: AleOptions,
}

/// AAE or APE repetition scan.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmplifiedOptions {
    #[serde(default)]
    pub pulse: PulseSpec,
    #[serde(default = "d_n_max")]
    pub n_max: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RabiOptions {
    #[serde(default)]
    pub pulse: PulseSpec,
    #[serde(default = "d_rabi_points")]
    pub points: usize,
    /// Largest amplitude as a multiple of the pulse amplitude.
    #[serde(default = "d_rabi_factor")]
    pub max_factor: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchOptions {
    /// Gate library holding an X and an X/2 entry.
    pub library: PathBuf,
    /// Gate interleaved with the reference sequences; `null` for plain RB.
    #[serde(default = "d_interleave")]
    pub interleave: Option<Target>,
    /// Leakage level read out by LRB.
    #[serde(default = "d_level")]
    pub level: usize,
    /// Simulate with the device's T1, T2 and n̄.
    #[serde(default = "d_true")]
    pub open: bool,
    /// Sequence lengths and count. The seed is always the top-level seed.
    #[serde(default)]
    pub rb: RbConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateOptions {
    pub calibration: CalibrationConfig,
    /// Library entry name; defaults to `x` or `x_half`.
    #[serde(default)]
    pub name: Option<String>,
    /// Existing library the calibrated gate is added to.
    #[serde(default)]
    pub library: Option<PathBuf>,
    /// JSON-lines log of an earlier run to resume from.
    #[serde(default)]
    pub resume: Option<PathBuf>,
}

mod time_list {
    use r2d::units::{format_time, parse_time};
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|t| format_time(*t)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Vec::<String>::deserialize(d)?.iter().map(|s| parse_time(s).map_err(D::Error::custom)).collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepOptions {
    /// Template; its `t_p` is replaced by each length.
    pub calibration: CalibrationConfig,
    #[serde(with = "time_list")]
    pub lengths: Vec<f64>,
}

/// Benchmark applied identically to both variants.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareBenchmark {
    /// Library providing the partner gate for the Clifford group.
    pub library: PathBuf,
    #[serde(default = "d_true")]
    pub open: bool,
    #[serde(default)]
    pub rb: RbConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DragCompareOptions {
    /// Shared settings; the variant field is ignored, both are run.
    pub calibration: CalibrationConfig,
    #[serde(default)]
    pub benchmark: Option<CompareBenchmark>,
}

#[derive(Debug, Clone)]
pub enum Options {
    Spectrum(SpectrumOptions),
    Trajectory(TrajectoryOptions),
    AleScan(AleScanOptions),
    Aae(AmplifiedOptions),
    Ape(AmplifiedOptions),
    Rabi(RabiOptions),
    Bench(BenchOptions),
    Calibrate(CalibrateOptions),
    LengthSweep(SweepOptions),
    DragCompare(DragCompareOptions),
}

impl Options {
    fn parse(kind: Kind, v: Value) -> Result<Self, serde_json::Error> {
        fn p<T: DeserializeOwned>(v: Value) -> Result<T, serde_json::Error> {
            serde_json::from_value(v)
        }
        Ok(match kind {
            Kind::Spectrum => Options::Spectrum(p(v)?),
            Kind::Trajectory => Options::Trajectory(p(v)?),
            Kind::AleScan => Options::AleScan(p(v)?),
            Kind::Aae => Options::Aae(p(v)?),
            Kind::Ape => Options::Ape(p(v)?),
            Kind::Rabi => Options::Rabi(p(v)?),
            Kind::Rb | Kind::Lrb | Kind::Prb => Options::Bench(p(v)?),
            Kind::Calibrate => Options::Calibrate(p(v)?),
            Kind::LengthSweep => Options::LengthSweep(p(v)?),
            Kind::DragCompare => Options::DragCompare(p(v)?),
        })
    }

    fn to_value(&self) -> Value {
        let r = match self {
            Options::Spectrum(o) => serde_json::to_value(o),
            Options::Trajectory(o) => serde_json::to_value(o),
            Options::AleScan(o) => serde_json::to_value(o),
            Options::Aae(o) | Options::Ape(o) => serde_json::to_value(o),
            Options::Rabi(o) => serde_json::to_value(o),
            Options::Bench(o) => serde_json::to_value(o),
            Options::Calibrate(o) => serde_json::to_value(o),
            Options::LengthSweep(o) => serde_json::to_value(o),
            Options::DragCompare(o) => serde_json::to_value(o),
        };
        r.expect("options serialise")
    }

    /// Every file the experiment reads.
    pub fn inputs_mut(&mut self) -> Vec<&mut PathBuf> {
        let mut v = Vec::new();
        match self {
            Options::Spectrum(SpectrumOptions { pulse, .. })
            | Options::Trajectory(TrajectoryOptions { pulse, .. })
            | Options::AleScan(AleScanOptions { pulse, .. })
            | Options::Aae(AmplifiedOptions { pulse, .. })
            | Options::Ape(AmplifiedOptions { pulse, .. })
            | Options::Rabi(RabiOptions { pulse, .. }) => v.extend(pulse.library.as_mut()),
            Options::Bench(o) => v.push(&mut o.library),
            Options::Calibrate(o) => {
                v.extend(o.library.as_mut());
                v.extend(o.resume.as_mut());
            }
            Options::LengthSweep(_) => {}
            Options::DragCompare(o) => v.extend(o.benchmark.as_mut().map(|b| &mut b.library)),
        }
        v
    }

    fn violations(&self, kind: Kind, levels: usize, spam: SpamMode, v: &mut Vec<String>) {
        let leak_levels = |v: &mut Vec<String>, what: &str| {
            if levels < 4 {
                v.push(format!("{what} needs levels >= 4, got {levels}"));
            }
        };
        let calibration = |c: &CalibrationConfig, v: &mut Vec<String>| {
            v.extend(c.violations().into_iter().map(|s| format!("options.calibration: {s}")));
            if c.levels != levels {
                v.push(format!("options.calibration.levels ({}) differs from levels ({levels})", c.levels));
            }
        };
        match self {
            Options::Spectrum(o) => {
                o.pulse.violations(v);
                if o.points < 2 {
                    v.push("options.points must be at least 2".into());
                }
                if !(o.span > 0.0) {
                    v.push("options.span must be positive".into());
                }
            }
            Options::Trajectory(o) => {
                o.pulse.violations(v);
                if o.initial >= levels {
                    v.push(format!("options.initial ({}) must be below levels ({levels})", o.initial));
                }
                if o.samples < 2 {
                    v.push("options.samples must be at least 2".into());
                }
            }
            Options::AleScan(o) => {
                o.pulse.violations(v);
                leak_levels(v, "ale-scan");
                if !(o.level == 2 || o.level == 3) {
                    v.push(format!("options.level must be 2 or 3, got {}", o.level));
                }
                if o.ale.n_step == 0 || o.ale.n_max == 0 {
                    v.push("options.ale.n_max and n_step must be positive".into());
                }
            }
            Options::Aae(o) | Options::Ape(o) => {
                o.pulse.violations(v);
                if o.n_max < 2 {
                    v.push("options.n_max must be at least 2".into());
                }
            }
            Options::Rabi(o) => {
                o.pulse.violations(v);
                if o.points < 5 {
                    v.push("options.points must be at least 5".into());
                }
                if !(o.max_factor > 1.0) {
                    v.push("options.max_factor must exceed 1".into());
                }
            }
            Options::Bench(o) => {
                v.extend(o.rb.violations().into_iter().map(|s| format!("options.rb: {s}")));
                if kind == Kind::Lrb {
                    leak_levels(v, "lrb");
                    if !(o.level == 2 || o.level == 3) {
                        v.push(format!("options.level must be 2 or 3, got {}", o.level));
                    }
                }
                if kind == Kind::Prb && o.interleave.is_none() {
                    v.push("prb needs options.interleave".into());
                }
            }
            Options::Calibrate(o) => {
                calibration(&o.calibration, v);
                leak_levels(v, "calibrate");
            }
            Options::LengthSweep(o) => {
                calibration(&o.calibration, v);
                leak_levels(v, "length-sweep");
                if o.lengths.is_empty() {
                    v.push("options.lengths must not be empty".into());
                }
                if let Some(t) = o.lengths.iter().find(|t| !(**t > 0.0)) {
                    v.push(format!("options.lengths must be positive, got {t:e} s"));
                }
            }
            Options::DragCompare(o) => {
                calibration(&o.calibration, v);
                leak_levels(v, "drag-compare");
                if let Some(b) = &o.benchmark {
                    v.extend(b.rb.violations().into_iter().map(|s| format!("options.benchmark.rb: {s}")));
                }
            }
        }
        if spam == SpamMode::On && levels != 4 && matches!(kind, Kind::Rb | Kind::AleScan) {
            v.push(format!("spam on needs levels = 4 (the assignment matrix is 4x4), got {levels}"));
        }
    }
}

fn d_levels() -> usize {
    4
}
fn d_seed() -> u64 {
    1
}

/// The typed top-level sections.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: Kind,
    pub device: DeviceParams,
    pub levels: usize,
    pub seed: u64,
    pub spam: SpamMode,
    pub out: Option<PathBuf>,
    pub options: Options,
}

const TOP_LEVEL: [&str; 7] = ["experiment", "device", "levels", "seed", "spam", "out", "options"];

fn section<T: DeserializeOwned>(doc: &Map<String, Value>, key: &str, default: impl FnOnce() -> T, errors: &mut Vec<String>) -> Option<T> {
    match doc.get(key) {
        None => Some(default()),
        Some(v) => match serde_json::from_value(v.clone()) {
            Ok(t) => Some(t),
            Err(e) => {
                errors.push(format!("{key}: {e}"));
                None
            }
        },
    }
}

impl ExperimentConfig {
    /// Parses and validates a document, returning every violation found.
    pub fn from_value(doc: &Value) -> Result<Self, Vec<String>> {
        let Some(doc) = doc.as_object() else {
            return Err(vec!["configuration must be a JSON object".into()]);
        };
        let mut errors: Vec<String> = doc
            .keys()
            .filter(|k| !TOP_LEVEL.contains(&k.as_str()))
            .map(|k| format!("unknown key `{k}`, expected one of {}", TOP_LEVEL.join(", ")))
            .collect();
        let experiment = match doc.get("experiment") {
            None => {
                errors.push("experiment: missing".into());
                None
            }
            Some(v) => serde_json::from_value::<Kind>(v.clone()).map_err(|e| errors.push(format!("experiment: {e}"))).ok(),
        };
        let device = section(doc, "device", DeviceParams::reference_device, &mut errors);
        let levels = section(doc, "levels", d_levels, &mut errors);
        let seed = section(doc, "seed", d_seed, &mut errors);
        let spam = section(doc, "spam", SpamMode::default, &mut errors);
        let out = section::<Option<PathBuf>>(doc, "out", || None, &mut errors);
        let options = experiment.and_then(|k| {
            let raw = doc.get("options").cloned().unwrap_or_else(|| Value::Object(Map::new()));
            Options::parse(k, raw).map_err(|e| errors.push(format!("options: {e}"))).ok()
        });
        if let Some(d) = &device {
            errors.extend(d.violations().into_iter().map(|s| format!("device: {s}")));
        }
        if let Some(l) = levels {
            if l < 2 {
                errors.push(format!("levels must be at least 2, got {l}"));
            }
        }
        if let (Some(k), Some(o), Some(l), Some(s)) = (experiment, &options, levels, spam) {
            o.violations(k, l, s, &mut errors);
        }
        if !errors.is_empty() {
            return Err(errors);
        }
        let mut cfg = ExperimentConfig {
            experiment: experiment.unwrap(),
            device: device.unwrap(),
            levels: levels.unwrap(),
            seed: seed.unwrap(),
            spam: spam.unwrap(),
            out: out.unwrap(),
            options: options.unwrap(),
        };
        let seed = cfg.seed;
        match &mut cfg.options {
            Options::Bench(o) => o.rb.seed = seed,
            Options::DragCompare(DragCompareOptions { benchmark: Some(b), .. }) => b.rb.seed = seed,
            _ => {}
        }
        Ok(cfg)
    }

    /// Resolves relative input paths against `base` and reports missing
    /// inputs.
    pub fn resolve_inputs(&mut self, base: &Path) -> Result<(), Vec<String>> {
        let mut errors = Vec::new();
        for p in self.options.inputs_mut() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
            if !p.is_file() {
                errors.push(format!("input file {} does not exist", p.display()));
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }

    /// The fully defaulted document. `out` is an invocation detail and is
    /// left out.
    pub fn to_value(&self) -> Value {
        let mut m = Map::new();
        m.insert("experiment".into(), serde_json::to_value(self.experiment).unwrap());
        m.insert("device".into(), serde_json::to_value(&self.device).unwrap());
        m.insert("levels".into(), self.levels.into());
        m.insert("seed".into(), self.seed.into());
        m.insert("spam".into(), serde_json::to_value(self.spam).unwrap());
        m.insert("options".into(), self.options.to_value());
        Value::Object(m)
    }
}

/// Sets `value` at a dotted path such as `options.pulse.t_p`, creating
/// objects on the way.
pub fn set_path(doc: &mut Value, path: &str, value: Value) -> Result<(), String> {
    let mut cur = doc;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(format!("empty component in {path:?}"));
        }
        let Some(obj) = cur.as_object_mut() else {
            return Err(format!("{} is not an object", parts[..i].join(".")));
        };
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    unreachable!("split yields at least one part")
}

/// `key=value`, with the value read as JSON when it parses and as a string
/// otherwise.
pub fn parse_assignment(s: &str) -> Result<(String, Value), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got {s:?}"))?;
    let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
    Ok((k.trim().to_string(), value))
}

/// Command-line shortcuts for common configuration keys.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub spam: Option<SpamMode>,
    /// Pulse length, with unit.
    pub tp: Option<String>,
    pub alpha: Option<Vec<f64>>,
    /// `X` or `X/2`.
    pub gate: Option<String>,
    /// Gate library; made absolute before it is stored.
    pub gates: Option<PathBuf>,
    pub level: Option<usize>,
    /// `key=value` assignments at dotted paths.
    pub set: Vec<String>,
}

const PULSE_KINDS: [Kind; 6] = [Kind::Spectrum, Kind::Trajectory, Kind::AleScan, Kind::Aae, Kind::Ape, Kind::Rabi];
const BENCH_KINDS: [Kind; 3] = [Kind::Rb, Kind::Lrb, Kind::Prb];

impl Overrides {
    /// Writes the overrides into `doc`; flags the experiment does not use
    /// are reported.
    pub fn apply(&self, doc: &mut Value, kind: Kind, cwd: &Path) -> Result<(), Vec<String>> {
        let mut errors = Vec::new();
        let pulse = PULSE_KINDS.contains(&kind);
        let bench = BENCH_KINDS.contains(&kind);
        let calib = matches!(kind, Kind::Calibrate | Kind::LengthSweep | Kind::DragCompare);
        let mut put = |path: Option<&str>, flag: &str, value: Value, errors: &mut Vec<String>| match path {
            Some(path) => {
                if let Err(e) = set_path(doc, path, value) {
                    errors.push(format!("{flag}: {e}"));
                }
            }
            None => errors.push(format!("{flag} is not used by {}", kind.name())),
        };
        if let Some(s) = self.seed {
            put(Some("seed"), "--seed", s.into(), &mut errors);
        }
        if let Some(s) = self.spam {
            put(Some("spam"), "--spam", serde_json::to_value(s).unwrap(), &mut errors);
        }
        if let Some(t) = &self.tp {
            let path = if pulse {
                Some("options.pulse.t_p")
            } else if matches!(kind, Kind::Calibrate | Kind::DragCompare) {
                Some("options.calibration.t_p")
            } else {
                None
            };
            put(path, "--tp", Value::String(t.clone()), &mut errors);
        }
        if let Some(a) = &self.alpha {
            if a.len() != 3 {
                errors.push(format!("--alpha takes three values (α12, α02, α13), got {}", a.len()));
            } else {
                let path = if pulse {
                    Some("options.pulse.alpha")
                } else if calib {
                    Some("options.calibration.start")
                } else {
                    None
                };
                put(path, "--alpha", serde_json::to_value(a).unwrap(), &mut errors);
            }
        }
        if let Some(g) = &self.gate {
            let path = if pulse {
                Some("options.pulse.gate")
            } else if calib {
                Some("options.calibration.target")
            } else if bench {
                Some("options.interleave")
            } else {
                None
            };
            put(path, "--gate", Value::String(g.clone()), &mut errors);
        }
        if let Some(g) = &self.gates {
            let abs = if g.is_relative() { cwd.join(g) } else { g.clone() };
            let path = if pulse {
                Some("options.pulse.library")
            } else if bench || kind == Kind::Calibrate {
                Some("options.library")
            } else if kind == Kind::DragCompare {
                Some("options.benchmark.library")
            } else {
                None
            };
            put(path, "--gates", Value::String(abs.to_string_lossy().into_owned()), &mut errors);
        }
        if let Some(l) = self.level {
            let path = matches!(kind, Kind::AleScan | Kind::Lrb).then_some("options.level");
            put(path, "--level", l.into(), &mut errors);
        }
        for a in &self.set {
            match parse_assignment(a) {
                Ok((k, v)) => put(Some(&k), "--set", v, &mut errors),
                Err(e) => errors.push(format!("--set: {e}")),
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }
}

/// Reads an optional config file, applies the overrides and validates.
/// Relative input paths in the file are resolved against its directory.
pub fn load(kind: Kind, file: Option<&Path>, overrides: &Overrides, cwd: &Path) -> Result<ExperimentConfig, Vec<String>> {
    let (mut doc, base) = match file {
        Some(f) => {
            let text = std::fs::read_to_string(f).map_err(|e| vec![format!("reading {}: {e}", f.display())])?;
            let doc: Value = serde_json::from_str(&text).map_err(|e| vec![format!("{}: {e}", f.display())])?;
            let dir = f.parent().map(|p| cwd.join(p)).unwrap_or_else(|| cwd.to_path_buf());
            (doc, dir)
        }
        None => (Value::Object(Map::new()), cwd.to_path_buf()),
    };
    let mut errors = Vec::new();
    if let Some(obj) = doc.as_object_mut() {
        match obj.get("experiment") {
            None => {
                obj.insert("experiment".into(), serde_json::to_value(kind).unwrap());
            }
            Some(v) if *v == serde_json::to_value(kind).unwrap() => {}
            Some(v) => errors.push(format!("config file is for experiment {v}, not {}", kind.name())),
        }
    }
    if let Err(e) = overrides.apply(&mut doc, kind, cwd) {
        errors.extend(e);
    }
    let mut cfg = match ExperimentConfig::from_value(&doc) {
        Ok(c) if errors.is_empty() => c,
        Ok(_) => return Err(errors),
        Err(e) => {
            errors.extend(e);
            return Err(errors);
        }
    };
    cfg.resolve_inputs(&base)?;
    Ok(cfg)
}
