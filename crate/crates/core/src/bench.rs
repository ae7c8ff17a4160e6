//! Single-qubit Clifford randomized benchmarking: standard (RB), leakage
//! (LRB) and purity (PRB), reference and interleaved.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{unitary_error_metrics, AssignmentMatrix, Target};
use crate::error::{Error, Result};
use crate::fit::{fit_curve, FitReport};
use crate::linalg::{rotation, CMatrix, CVector, C64};
use crate::propagator::GateProcess;
use crate::sequence::Compiled;

/// Physical pulse: a rotation by π (X-type) or π/2 (X/2-type) about the
/// equatorial axis at `phase`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    pub kind: Target,
    pub phase: f64,
}

impl Pulse {
    const fn new(kind: Target, phase: f64) -> Self {
        Self { kind, phase }
    }

    pub fn ideal(&self) -> CMatrix {
        rotation(self.kind.angle(), self.phase)
    }
}

const X: Pulse = Pulse::new(Target::X, 0.0);
const Y: Pulse = Pulse::new(Target::X, FRAC_PI_2);
const X2: Pulse = Pulse::new(Target::XHalf, 0.0);
const MX2: Pulse = Pulse::new(Target::XHalf, PI);
const Y2: Pulse = Pulse::new(Target::XHalf, FRAC_PI_2);
const MY2: Pulse = Pulse::new(Target::XHalf, -FRAC_PI_2);

/// XY decomposition of the 24 single-qubit Cliffords, pulses in time order.
const DECOMPOSITION: [&[Pulse]; 24] = [
    &[],
    &[X],
    &[Y],
    &[Y, X],
    &[X2, Y2],
    &[X2, MY2],
    &[MX2, Y2],
    &[MX2, MY2],
    &[Y2, X2],
    &[Y2, MX2],
    &[MY2, X2],
    &[MY2, MX2],
    &[X2],
    &[MX2],
    &[Y2],
    &[MY2],
    &[MX2, Y2, X2],
    &[MX2, MY2, X2],
    &[X, Y2],
    &[X, MY2],
    &[Y, X2],
    &[Y, MX2],
    &[X2, Y2, X2],
    &[MX2, Y2, MX2],
];

fn same_up_to_phase(a: &CMatrix, b: &CMatrix) -> bool {
    ((a.adjoint() * b).trace().norm() / 2.0 - 1.0).abs() < 1e-9
}

#[derive(Debug, Clone)]
pub struct CliffordGroup {
    pub pulses: Vec<Vec<Pulse>>,
    pub ideal: Vec<CMatrix>,
    /// `compose[i][j]`: element equal to "apply i, then j".
    pub compose: Vec<Vec<usize>>,
    pub inverse: Vec<usize>,
    pub physical: Vec<Compiled>,
}

impl CliffordGroup {
    pub fn len(&self) -> usize {
        self.ideal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ideal.is_empty()
    }

    pub fn average_pulses(&self) -> f64 {
        self.pulses.iter().map(|p| p.len()).sum::<usize>() as f64 / self.len() as f64
    }

    pub fn index_of(&self, u: &CMatrix) -> Option<usize> {
        self.ideal.iter().position(|c| same_up_to_phase(c, u))
    }

    /// Appends a fixed channel after every element (used to inject
    /// synthetic noise).
    pub fn with_channel(&self, channel: &Compiled) -> Result<CliffordGroup> {
        let physical = self.physical.iter().map(|p| p.then(channel)).collect::<Result<Vec<_>>>()?;
        Ok(CliffordGroup { physical, ..self.clone() })
    }
}

fn ideal_of(seq: &[Pulse]) -> CMatrix {
    seq.iter().fold(CMatrix::identity(2, 2), |acc, p| p.ideal() * acc)
}

pub fn build_clifford_group(x: &GateProcess, x_half: &GateProcess) -> Result<CliffordGroup> {
    if x.dim() != x_half.dim() {
        return Err(Error::DimensionMismatch { expected: x.dim(), got: x_half.dim() });
    }
    for (g, t) in [(x, Target::X), (x_half, Target::XHalf)] {
        if let Some(u) = g.unitary() {
            let (f, _) = unitary_error_metrics(u, &t.ideal());
            if f < 0.9 {
                return Err(Error::TooFarFromTarget(f));
            }
        }
    }
    let d = x.dim();
    let pulses: Vec<Vec<Pulse>> = DECOMPOSITION.iter().map(|s| s.to_vec()).collect();
    let ideal: Vec<CMatrix> = pulses.iter().map(|s| ideal_of(s)).collect();
    let find = |u: &CMatrix| ideal.iter().position(|c| same_up_to_phase(c, u));
    let mut compose = vec![vec![0; 24]; 24];
    for i in 0..24 {
        for j in 0..24 {
            compose[i][j] = find(&(&ideal[j] * &ideal[i])).expect("Clifford group is closed");
        }
    }
    let inverse = (0..24).map(|i| (0..24).find(|&j| compose[i][j] == 0).expect("inverse exists")).collect();
    let physical = pulses
        .iter()
        .map(|seq| {
            seq.iter().try_fold(Compiled::identity(d), |acc, p| {
                let g = if p.kind == Target::X { x } else { x_half };
                acc.then(&Compiled::phased(g, p.phase)?)
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CliffordGroup { pulses, ideal, compose, inverse, physical })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchKind {
    Rb,
    Lrb,
    Prb,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RbConfig {
    pub lengths: Vec<usize>,
    pub sequences: usize,
    pub seed: u64,
    /// LRB switches to the linear model when the largest mean leakage
    /// population stays below this value.
    pub linear_threshold: f64,
}

impl Default for RbConfig {
    fn default() -> Self {
        Self { lengths: log_lengths(800, 15), sequences: 60, seed: 1, linear_threshold: 0.01 }
    }
}

impl RbConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.lengths.is_empty() {
            v.push("lengths must not be empty".to_string());
        }
        if self.lengths.windows(2).any(|w| w[1] <= w[0]) {
            v.push("lengths must be strictly increasing".to_string());
        }
        if self.sequences == 0 {
            v.push("sequences must be positive".to_string());
        }
        v
    }
}

/// Roughly log-spaced distinct lengths from 1 to `max`.
pub fn log_lengths(max: usize, count: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (0..count)
        .map(|k| (max as f64).powf(k as f64 / (count - 1).max(1) as f64).round() as usize)
        .collect();
    v.dedup();
    v
}

/// Mean signal per length and its decay fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchCurve {
    pub lengths: Vec<usize>,
    pub mean: Vec<f64>,
    pub sem: Vec<f64>,
    pub fit: FitReport,
    /// Decay constant `p` (RB, exponential LRB) or `u` (PRB); `None` for the
    /// linear LRB model.
    pub rate: Option<f64>,
    pub rate_err: Option<f64>,
    /// Per-Clifford leakage `A(1−p)` for LRB.
    pub leakage: Option<f64>,
    pub leakage_err: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchResult {
    pub kind: BenchKind,
    pub level: Option<usize>,
    pub reference: BenchCurve,
    pub interleaved: Option<BenchCurve>,
    pub epsilon: Option<f64>,
    pub epsilon_err: Option<f64>,
    /// RB: interleaved decay faster-than-reference check failed beyond
    /// uncertainty. LRB: negative leakage, epsilon reported as an upper bound.
    pub flagged: bool,
    pub average_pulses: f64,
    pub sequences: usize,
    pub seed: u64,
}

impl BenchResult {
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["series", "length", "mean", "sem"])?;
        let mut put = |name: &str, c: &BenchCurve| -> Result<()> {
            for ((n, m), s) in c.lengths.iter().zip(&c.mean).zip(&c.sem) {
                wr.serialize((name, n, m, s))?;
            }
            Ok(())
        };
        put("reference", &self.reference)?;
        if let Some(i) = &self.interleaved {
            put("interleaved", i)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// How the final state is read out.
#[derive(Debug, Clone, Copy)]
enum Readout {
    P0,
    Level(usize),
    Purity,
}

enum Ops {
    Ket(Vec<CMatrix>),
    Super(Vec<CMatrix>),
}

fn ops_for(group: &CliffordGroup, target: Option<&Compiled>) -> Ops {
    let all: Vec<&Compiled> = group.physical.iter().chain(target).collect();
    if all.iter().all(|c| matches!(c, Compiled::Unitary(_))) {
        Ops::Ket(all.iter().map(|c| if let Compiled::Unitary(u) = c { u.clone() } else { unreachable!() }).collect())
    } else {
        Ops::Super(all.iter().map(|c| c.superop()).collect())
    }
}

fn readout(v: &CVector, is_density: bool, d: usize, what: Readout, spam: Option<&AssignmentMatrix>) -> Result<f64> {
    let pop = |j: usize| if is_density { v[j * d + j].re } else { v[j].norm_sqr() };
    let rho01 = || if is_density { v[1] } else { v[0] * v[1].conj() };
    match what {
        Readout::Purity => {
            let r = rho01();
            let z = pop(0) - pop(1);
            Ok(4.0 * r.norm_sqr() + z * z)
        }
        Readout::P0 | Readout::Level(_) => {
            let j = if let Readout::Level(l) = what { l } else { 0 };
            match spam {
                None => Ok(pop(j)),
                Some(lam) => {
                    let n = lam.dim();
                    let mut p: Vec<f64> = (0..n.min(d)).map(pop).collect();
                    p.resize(n, 0.0);
                    p[n - 1] += (n..d).map(pop).sum::<f64>();
                    Ok(crate::analysis::apply_assignment(&p, lam)?[j])
                }
            }
        }
    }
}

/// Simulates every (length, sequence) pair; the interleaved variant inserts
/// the target after each random Clifford. Streams are per pair, so results
/// do not depend on scheduling.
fn simulate(
    group: &CliffordGroup,
    target: Option<(&Compiled, usize)>,
    cfg: &RbConfig,
    what: Readout,
    spam: Option<&AssignmentMatrix>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = group.physical[0].dim();
    let ops = ops_for(group, target.map(|t| t.0));
    let t_idx = group.len();
    let items: Vec<(usize, usize)> =
        (0..cfg.lengths.len()).flat_map(|i| (0..cfg.sequences).map(move |s| (i, s))).collect();
    let values: Vec<Result<f64>> = items
        .par_iter()
        .map(|&(li, s)| {
            let m = cfg.lengths[li];
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream((li * cfg.sequences + s) as u64);
            let mut seq = Vec::with_capacity(2 * m + 1);
            let mut net = 0usize;
            for _ in 0..m {
                let c = rng.gen_range(0..group.len());
                seq.push(c);
                net = group.compose[net][c];
                if let Some((_, ideal)) = target {
                    seq.push(t_idx);
                    net = group.compose[net][ideal];
                }
            }
            seq.push(group.inverse[net]);
            match &ops {
                Ops::Ket(us) => {
                    let mut v = CVector::zeros(d);
                    v[0] = C64::new(1.0, 0.0);
                    for &k in &seq {
                        v = &us[k] * v;
                    }
                    readout(&v, false, d, what, spam)
                }
                Ops::Super(ss) => {
                    let mut v = CVector::zeros(d * d);
                    v[0] = C64::new(1.0, 0.0);
                    for &k in &seq {
                        v = &ss[k] * v;
                    }
                    readout(&v, true, d, what, spam)
                }
            }
        })
        .collect();
    let values: Vec<f64> = values.into_iter().collect::<Result<_>>()?;
    let n = cfg.sequences as f64;
    let mut mean = Vec::with_capacity(cfg.lengths.len());
    let mut sem = Vec::with_capacity(cfg.lengths.len());
    for chunk in values.chunks(cfg.sequences) {
        let mu = chunk.iter().sum::<f64>() / n;
        let var = if cfg.sequences > 1 { chunk.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        mean.push(mu);
        sem.push((var / n).sqrt());
    }
    Ok((mean, sem))
}

fn rate_seed(xs: &[f64], ys: &[f64], asym: f64) -> f64 {
    // log-linear estimate of the decay constant
    let pts: Vec<(f64, f64)> = xs.iter().zip(ys).filter(|(_, y)| (**y - asym).abs() > 1e-12).map(|(x, y)| (*x, (y - asym).abs().ln())).collect();
    if pts.len() < 2 {
        return 0.999;
    }
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let den = n * sxx - sx * sx;
    if den.abs() < 1e-300 {
        return 0.999;
    }
    ((n * sxy - sx * sy) / den).exp().clamp(0.5, 1.0)
}

fn curve(lengths: &[usize], mean: Vec<f64>, sem: Vec<f64>, fit: FitReport, kind: BenchKind, linear: bool) -> BenchCurve {
    let (rate, rate_err, leakage, leakage_err) = match (kind, linear) {
        (BenchKind::Lrb, true) => (None, None, Some(fit.value("eps")), Some(fit.error("eps"))),
        (BenchKind::Lrb, false) => {
            let (a, p) = (fit.value("A"), fit.value("p"));
            let (ea, ep) = (fit.error("A"), fit.error("p"));
            (Some(p), Some(ep), Some(a * (1.0 - p)), Some(((1.0 - p) * ea).hypot(a * ep)))
        }
        (BenchKind::Prb, _) => (Some(fit.value("u")), Some(fit.error("u")), None, None),
        (BenchKind::Rb, _) => (Some(fit.value("p")), Some(fit.error("p")), None, None),
    };
    BenchCurve { lengths: lengths.to_vec(), mean, sem, fit, rate, rate_err, leakage, leakage_err }
}

/// `P₀ = A + B pᴺ` with `A` fixed: `(Λ₀₁ + Λ₁₀)/2` with an assignment
/// matrix, 1/2 otherwise.
fn fit_rb(lengths: &[usize], mean: &[f64], spam: Option<&AssignmentMatrix>) -> Result<FitReport> {
    let a = spam.map(|l| (l.get(0, 1) + l.get(1, 0)) / 2.0).unwrap_or(0.5);
    let xs: Vec<f64> = lengths.iter().map(|&n| n as f64).collect();
    let p0 = rate_seed(&xs, mean, a);
    let b0 = (mean[0] - a) / p0.powf(xs[0]);
    let r = fit_curve("rb", &["B", "p"], &[b0, p0], &xs, mean, |p, n| a + p[0] * p[1].powf(n))?;
    Ok(FitReport {
        names: vec!["A".into(), "B".into(), "p".into()],
        values: vec![a, r.values[0], r.values[1]],
        errors: vec![0.0, r.errors[0], r.errors[1]],
        ..r
    })
}

fn fit_prb(lengths: &[usize], mean: &[f64]) -> Result<FitReport> {
    let xs: Vec<f64> = lengths.iter().map(|&n| n as f64).collect();
    let u0 = rate_seed(&xs, mean, 0.0);
    fit_curve("prb", &["B", "u"], &[mean[0] / u0.powf(xs[0]), u0], &xs, mean, |p, n| p[0] * p[1].powf(n))
}

/// Exponential `A + B pᴺ` or, for small populations, `P = εN` (the
/// `(1−p)AN` model with `A = −B`, where only the product is identifiable).
fn fit_lrb(lengths: &[usize], mean: &[f64], threshold: f64) -> Result<(FitReport, bool)> {
    let xs: Vec<f64> = lengths.iter().map(|&n| n as f64).collect();
    let peak = mean.iter().copied().fold(0.0, f64::max);
    if peak < threshold {
        let sxx: f64 = xs.iter().map(|x| x * x).sum();
        let slope = if sxx > 0.0 { xs.iter().zip(mean).map(|(x, y)| x * y).sum::<f64>() / sxx } else { 0.0 };
        let r = fit_curve("lrb-linear", &["eps"], &[slope], &xs, mean, |p, n| p[0] * n)?;
        return Ok((r, true));
    }
    let a0 = peak * 1.5;
    let p0 = 1.0 - (mean[mean.len() - 1] / a0).min(0.9) / xs[xs.len() - 1].max(1.0);
    let r = fit_curve("lrb", &["A", "B", "p"], &[a0, -a0, p0], &xs, mean, |p, n| p[0] + p[1] * p[2].powf(n))?;
    Ok((r, false))
}

fn target_compiled(group: &CliffordGroup, target: Option<(&GateProcess, Target)>) -> Result<Option<(Compiled, usize)>> {
    target
        .map(|(g, t)| {
            let idx = group.index_of(&t.ideal()).expect("X and X/2 are Cliffords");
            Ok((Compiled::from_gate(g), idx))
        })
        .transpose()
}

fn finish_pair(
    kind: BenchKind,
    level: Option<usize>,
    group: &CliffordGroup,
    cfg: &RbConfig,
    reference: BenchCurve,
    interleaved: Option<BenchCurve>,
) -> BenchResult {
    let (epsilon, epsilon_err, flagged) = match (&interleaved, kind) {
        (None, _) => (None, None, false),
        (Some(i), BenchKind::Rb) => {
            let (pr, pi) = (reference.rate.unwrap(), i.rate.unwrap());
            let (er, ei) = (reference.rate_err.unwrap(), i.rate_err.unwrap());
            let eps = (1.0 - pi / pr) / 2.0;
            let err = 0.5 * ((ei / pr).powi(2) + (pi * er / (pr * pr)).powi(2)).sqrt();
            (Some(eps), Some(err), pi > pr + (ei.hypot(er)))
        }
        (Some(i), BenchKind::Prb) => {
            let (ur, ui) = (reference.rate.unwrap(), i.rate.unwrap());
            let (er, ei) = (reference.rate_err.unwrap(), i.rate_err.unwrap());
            let q = (ui / ur).sqrt();
            let eps = (1.0 - q) / 2.0;
            let err = 0.25 / q * ((ei / ur).powi(2) + (ui * er / (ur * ur)).powi(2)).sqrt();
            (Some(eps), Some(err), ui > ur + ei.hypot(er))
        }
        (Some(i), BenchKind::Lrb) => {
            let eps = i.leakage.unwrap() - reference.leakage.unwrap();
            let err = i.leakage_err.unwrap().hypot(reference.leakage_err.unwrap());
            if eps < -err {
                (Some(err.max(eps.abs())), Some(err), true)
            } else {
                (Some(eps), Some(err), false)
            }
        }
    };
    BenchResult {
        kind,
        level,
        reference,
        interleaved,
        epsilon,
        epsilon_err,
        flagged,
        average_pulses: group.average_pulses(),
        sequences: cfg.sequences,
        seed: cfg.seed,
    }
}

/// Standard RB; with `target`, also the interleaved curve and
/// `ε_tot = (1 − p_int/p_ref)/2`.
pub fn run_rb(
    group: &CliffordGroup,
    cfg: &RbConfig,
    target: Option<(&GateProcess, Target)>,
    spam: Option<&AssignmentMatrix>,
) -> Result<BenchResult> {
    check(cfg)?;
    let tc = target_compiled(group, target)?;
    let run = |t: Option<(&Compiled, usize)>| -> Result<BenchCurve> {
        let (mean, sem) = simulate(group, t, cfg, Readout::P0, spam)?;
        let fit = fit_rb(&cfg.lengths, &mean, spam)?;
        Ok(curve(&cfg.lengths, mean, sem, fit, BenchKind::Rb, false))
    };
    let reference = run(None)?;
    let interleaved = tc.as_ref().map(|(c, i)| run(Some((c, *i)))).transpose()?;
    Ok(finish_pair(BenchKind::Rb, None, group, cfg, reference, interleaved))
}

/// Leakage RB on level 2 or 3; `ε_leak = ε_int − ε_ref`.
pub fn run_lrb(group: &CliffordGroup, cfg: &RbConfig, target: Option<(&GateProcess, Target)>, level: usize) -> Result<BenchResult> {
    check(cfg)?;
    let d = group.physical[0].dim();
    if d < 4 || !(level == 2 || level == 3) {
        return Err(Error::invalid(format!("LRB on |{level}> needs level 2 or 3 and at least 4 simulated levels, got {d}")));
    }
    let tc = target_compiled(group, target)?;
    let run = |t: Option<(&Compiled, usize)>| -> Result<BenchCurve> {
        let (mean, sem) = simulate(group, t, cfg, Readout::Level(level), None)?;
        let (fit, linear) = fit_lrb(&cfg.lengths, &mean, cfg.linear_threshold)?;
        Ok(curve(&cfg.lengths, mean, sem, fit, BenchKind::Lrb, linear))
    };
    let reference = run(None)?;
    let interleaved = tc.as_ref().map(|(c, i)| run(Some((c, *i)))).transpose()?;
    Ok(finish_pair(BenchKind::Lrb, Some(level), group, cfg, reference, interleaved))
}

/// Purity RB, `U = B uᴺ`; `ε_pur = (1 − √(u_int/u_ref))/2`.
pub fn run_prb(group: &CliffordGroup, cfg: &RbConfig, target: Option<(&GateProcess, Target)>) -> Result<BenchResult> {
    check(cfg)?;
    let tc = target_compiled(group, target)?;
    let run = |t: Option<(&Compiled, usize)>| -> Result<BenchCurve> {
        let (mean, sem) = simulate(group, t, cfg, Readout::Purity, None)?;
        let fit = fit_prb(&cfg.lengths, &mean)?;
        Ok(curve(&cfg.lengths, mean, sem, fit, BenchKind::Prb, false))
    };
    let reference = run(None)?;
    let interleaved = tc.as_ref().map(|(c, i)| run(Some((c, *i)))).transpose()?;
    Ok(finish_pair(BenchKind::Prb, None, group, cfg, reference, interleaved))
}

/// `ε_decoh ≈ ε_pur − ε_leak/2`.
pub fn decoherence_error(eps_pur: f64, eps_leak: f64) -> f64 {
    eps_pur - eps_leak / 2.0
}

fn check(cfg: &RbConfig) -> Result<()> {
    let v = cfg.violations();
    if v.is_empty() {
        Ok(())
    } else {
        Err(Error::invalid(v.join("; ")))
    }
}
