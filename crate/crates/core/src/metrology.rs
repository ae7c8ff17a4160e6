//! Amplified leakage (ALE), amplitude (AAE) and phase (APE) error sequences
//! and the Rabi amplitude scan, with their fit models.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{apply_assignment, unitary_error_metrics, AssignmentMatrix, Target};
use crate::device::Transmon;
use crate::error::{Error, Result};
use crate::fit::{fit_curve, fit_residuals, FitReport};
use crate::linalg::{embed_qubit, ket, rotation, wrap_angle, C64};
use crate::propagator::{sequence_propagate, simulate_gate, GateProcess, LindbladChannels, PropagatorOptions, QState, SeqOp};
use crate::pulse::PulseParams;
use crate::sequence::{pauli_expectations, Compiled};

fn measured(state: &QState, assignment: Option<&AssignmentMatrix>) -> Result<Vec<f64>> {
    let p = state.populations();
    match assignment {
        None => Ok(p),
        Some(lam) => {
            let n = lam.dim();
            let mut q: Vec<f64> = p.iter().take(n).copied().collect();
            q.resize(n, 0.0);
            // Population above the modelled levels is read as the top level.
            q[n - 1] += p.iter().skip(n).sum::<f64>();
            apply_assignment(&q, lam)
        }
    }
}

/// One ALE block: the (composite) X followed by `VZ(θ)`.
fn ale_block(gate: &GateProcess, target: Target, theta: f64) -> Result<Compiled> {
    let g = SeqOp::Gate(gate);
    match target {
        Target::X => Compiled::from_ops(&[g, SeqOp::Vz(theta)], gate.dim()),
        Target::XHalf => Compiled::from_ops(&[g, g, SeqOp::Vz(theta)], gate.dim()),
    }
}

/// Populations after `(VZ(θ)·X)^N |0>`; for X/2 each X is the composite
/// X/2·X/2.
pub fn ale_sequence(gate: &GateProcess, target: Target, theta: f64, n: usize) -> Result<Vec<f64>> {
    let d = gate.dim();
    let mut ops = Vec::with_capacity(n * 3);
    for _ in 0..n {
        ops.push(SeqOp::Gate(gate));
        if target == Target::XHalf {
            ops.push(SeqOp::Gate(gate));
        }
        ops.push(SeqOp::Vz(theta));
    }
    Ok(sequence_propagate(&ops, QState::Ket(ket(0, d)))?.populations())
}

/// Leakage level probed by an ALE experiment and its phase structure.
pub fn phase_count(level: usize) -> usize {
    2 * level - 1
}

pub fn phase_spacing(level: usize) -> f64 {
    TAU / phase_count(level) as f64
}

/// Amplification phases `θ_k = (2kπ − 4φ)/(2ℓ − 1)` wrapped to [0, 2π).
pub fn predicted_phases(level: usize, phi: f64) -> Vec<f64> {
    let m = phase_count(level) as f64;
    (1..=phase_count(level)).map(|k| ((TAU * k as f64 - 4.0 * phi) / m).rem_euclid(TAU)).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AleScan {
    pub level: usize,
    pub target: Target,
    pub thetas: Vec<f64>,
    pub ns: Vec<usize>,
    /// `p2[i][j]` at `thetas[i]`, `ns[j]`.
    pub p2: Vec<Vec<f64>>,
    pub p3: Vec<Vec<f64>>,
    /// Populations went through an assignment matrix; chevron fits then
    /// carry a free offset.
    pub spam: bool,
}

impl AleScan {
    fn surface(&self) -> &[Vec<f64>] {
        if self.level == 3 {
            &self.p3
        } else {
            &self.p2
        }
    }

    /// Mean population over the N grid for every θ column.
    pub fn mean_line(&self) -> Vec<f64> {
        self.surface().iter().map(|c| c.iter().sum::<f64>() / c.len() as f64).collect()
    }

    pub fn max_line(&self) -> Vec<f64> {
        self.surface().iter().map(|c| c.iter().copied().fold(0.0, f64::max)).collect()
    }

    /// Merges two scans of the same gate, keeping θ sorted.
    pub fn merge(mut self, other: AleScan) -> Result<AleScan> {
        if self.ns != other.ns || self.level != other.level || self.spam != other.spam {
            return Err(Error::invalid("cannot merge ALE scans with different grids"));
        }
        self.thetas.extend(other.thetas);
        self.p2.extend(other.p2);
        self.p3.extend(other.p3);
        let mut idx: Vec<usize> = (0..self.thetas.len()).collect();
        idx.sort_by(|&a, &b| self.thetas[a].total_cmp(&self.thetas[b]));
        idx.dedup_by(|a, b| self.thetas[*a] == self.thetas[*b]);
        Ok(AleScan {
            level: self.level,
            target: self.target,
            thetas: idx.iter().map(|&i| self.thetas[i]).collect(),
            ns: self.ns,
            p2: idx.iter().map(|&i| self.p2[i].clone()).collect(),
            p3: idx.iter().map(|&i| self.p3[i].clone()).collect(),
            spam: self.spam,
        })
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["theta_rad", "n", "p2", "p3"])?;
        for (i, th) in self.thetas.iter().enumerate() {
            for (j, n) in self.ns.iter().enumerate() {
                wr.serialize((th, n, self.p2[i][j], self.p3[i][j]))?;
            }
        }
        wr.flush()?;
        Ok(())
    }
}

/// Populations over a (θ, N) grid; columns are simulated in parallel.
pub fn ale_phase_scan(
    gate: &GateProcess,
    target: Target,
    level: usize,
    thetas: &[f64],
    ns: &[usize],
    assignment: Option<&AssignmentMatrix>,
) -> Result<AleScan> {
    if !(level == 2 || level == 3) || gate.dim() <= level {
        return Err(Error::invalid(format!("ALE level {level} needs a gate with more than {level} levels")));
    }
    if ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("ALE N grid must be strictly increasing"));
    }
    if let Some(u) = gate.unitary() {
        let (f, _) = unitary_error_metrics(u, &target.ideal());
        if f < 0.9 {
            return Err(Error::TooFarFromTarget(f));
        }
    }
    let d = gate.dim();
    let columns: Vec<Result<(Vec<f64>, Vec<f64>)>> = thetas
        .par_iter()
        .map(|&theta| {
            let block = ale_block(gate, target, theta)?;
            let mut state = QState::Ket(ket(0, d));
            let mut done = 0;
            let (mut c2, mut c3) = (Vec::with_capacity(ns.len()), Vec::with_capacity(ns.len()));
            for &n in ns {
                while done < n {
                    state = block.apply(&state)?;
                    done += 1;
                }
                let p = measured(&state, assignment)?;
                c2.push(p[2]);
                c3.push(p.get(3).copied().unwrap_or(0.0));
            }
            Ok((c2, c3))
        })
        .collect();
    let mut p2 = Vec::with_capacity(thetas.len());
    let mut p3 = Vec::with_capacity(thetas.len());
    for c in columns {
        let (a, b) = c?;
        p2.push(a);
        p3.push(b);
    }
    Ok(AleScan { level, target, thetas: thetas.to_vec(), ns: ns.to_vec(), p2, p3, spam: assignment.is_some() })
}

/// Chevron fit at one amplification phase. The model is
/// `P = b + c·(sin(ωN/2)/ω)²`, i.e. `a sin²(ωN/2)` with `c = aω²`; it
/// reduces to `cN²/4` as `ω → 0`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChevronFit {
    pub theta: f64,
    pub a: Option<f64>,
    pub omega: f64,
    pub a_omega_sq: f64,
    pub a_omega_sq_err: f64,
    pub offset: f64,
    /// `ω N_max < 0.5`: only the product `aω²` is meaningful.
    pub small_angle: bool,
    pub residual_norm: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AleResult {
    pub level: usize,
    pub phases: Vec<f64>,
    pub fits: Vec<ChevronFit>,
    pub epsilon: f64,
    pub epsilon_err: f64,
    /// Largest deviation of adjacent phase gaps from `2π/(2ℓ−1)`.
    pub spacing_error: f64,
}

fn chevron_shape(omega: f64, n: f64) -> f64 {
    let x = omega * n / 2.0;
    if x.abs() < 1e-4 {
        n * n / 4.0 * (1.0 - x * x / 3.0)
    } else {
        let s = (omega * n / 2.0).sin() / omega;
        s * s
    }
}

fn fit_chevron(theta: f64, ns: &[usize], ps: &[f64], with_offset: bool) -> Result<ChevronFit> {
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let n_max = xs.iter().copied().fold(0.0, f64::max);
    let step = xs.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    if ps.iter().all(|p| p.abs() < 1e-15) {
        return Ok(ChevronFit {
            theta,
            a: None,
            omega: 0.0,
            a_omega_sq: 0.0,
            a_omega_sq_err: 0.0,
            offset: 0.0,
            small_angle: true,
            residual_norm: 0.0,
        });
    }
    // Profile over ω: c (and b) are linear for fixed ω.
    let omega_hi = PI / step.max(1.0);
    let omega_lo = 0.05 / n_max.max(1.0);
    let grid: Vec<f64> = std::iter::once(0.0)
        .chain((0..600).map(|k| omega_lo * (omega_hi / omega_lo).powf(k as f64 / 599.0)))
        .collect();
    let profile = |w: f64| -> (f64, f64, f64) {
        let g: Vec<f64> = xs.iter().map(|&n| chevron_shape(w, n)).collect();
        let (c, b) = if with_offset {
            let m = g.len() as f64;
            let (sg, sp) = (g.iter().sum::<f64>(), ps.iter().sum::<f64>());
            let sgg: f64 = g.iter().map(|x| x * x).sum();
            let sgp: f64 = g.iter().zip(ps).map(|(x, p)| x * p).sum();
            let det = m * sgg - sg * sg;
            if det.abs() < 1e-300 {
                (0.0, sp / m)
            } else {
                ((m * sgp - sg * sp) / det, (sgg * sp - sg * sgp) / det)
            }
        } else {
            let sgg: f64 = g.iter().map(|x| x * x).sum();
            let sgp: f64 = g.iter().zip(ps).map(|(x, p)| x * p).sum();
            (if sgg > 0.0 { sgp / sgg } else { 0.0 }, 0.0)
        };
        let rss = g.iter().zip(ps).map(|(x, p)| (b + c * x - p).powi(2)).sum();
        (c, b, rss)
    };
    let (mut best_w, mut best) = (0.0, profile(0.0));
    for &w in &grid[1..] {
        let r = profile(w);
        if r.2 < best.2 {
            best = r;
            best_w = w;
        }
    }
    let model = |p: &[f64], n: f64| {
        let off = if with_offset { p[2] } else { 0.0 };
        off + p[0] * chevron_shape(p[1], n)
    };
    let (names, p0): (Vec<&str>, Vec<f64>) = if with_offset {
        (vec!["c", "omega", "b"], vec![best.0, best_w, best.1])
    } else {
        (vec!["c", "omega"], vec![best.0, best_w])
    };
    let report = fit_curve("ale-chevron", &names, &p0, &xs, ps, model)
        .or_else(|_| {
            // A flat profile minimum at ω = 0 can stall the joint fit; the
            // profile solution is then already the least-squares optimum.
            let rss = best.2;
            Ok::<_, Error>(FitReport {
                model: "ale-chevron-profile".into(),
                names: names.iter().map(|s| s.to_string()).collect(),
                values: p0.clone(),
                errors: vec![f64::INFINITY; p0.len()],
                residual_norm: rss.sqrt(),
                points: xs.len(),
            })
        })?;
    let c = report.value("c");
    let omega = report.value("omega").abs();
    let small = omega * n_max < 0.5;
    Ok(ChevronFit {
        theta,
        a: if small || omega == 0.0 { None } else { Some(c / (omega * omega)) },
        omega,
        a_omega_sq: c,
        a_omega_sq_err: report.error("c"),
        offset: if with_offset { report.value("b") } else { 0.0 },
        small_angle: small,
        residual_norm: report.residual_norm,
    })
}

/// Index of the largest value among columns within `halfwidth` of `center`
/// (circular distance).
fn best_column_near(thetas: &[f64], line: &[f64], center: f64, halfwidth: f64) -> Option<usize> {
    thetas
        .iter()
        .enumerate()
        .filter(|(_, &t)| wrap_angle(t - center).abs() <= halfwidth)
        .max_by(|a, b| line[a.0].total_cmp(&line[b.0]).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
}

/// Vertex of the parabola through the best column and its neighbours.
fn refine_peak(thetas: &[f64], line: &[f64], i: usize) -> f64 {
    if i == 0 || i + 1 >= thetas.len() {
        return thetas[i];
    }
    let (x0, x1, x2) = (thetas[i - 1], thetas[i], thetas[i + 1]);
    let (y0, y1, y2) = (line[i - 1], line[i], line[i + 1]);
    let h0 = x1 - x0;
    let h1 = x2 - x1;
    if (h0 - h1).abs() > 1e-9 * h0.max(h1) {
        // Unequal neighbours: use the general three-point vertex.
        let den = (x0 - x1) * (x0 - x2) * (x1 - x2);
        let a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / den;
        let b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / den;
        return if a < 0.0 { (-b / (2.0 * a)).clamp(x0, x2) } else { x1 };
    }
    let den = y0 - 2.0 * y1 + y2;
    if den >= 0.0 {
        return x1;
    }
    (x1 + 0.5 * h0 * (y0 - y2) / den).clamp(x0, x2)
}

/// Peak position. A resolved peak (at least five columns above half its
/// height) is placed midway between the interpolated half-maximum crossings,
/// which stays stable when the top is flat and rippled. Narrower peaks use
/// [`refine_peak`].
fn peak_center(thetas: &[f64], line: &[f64], i: usize) -> f64 {
    let half = 0.5 * line[i];
    let mut lo = i;
    while lo > 0 && line[lo - 1] >= half {
        lo -= 1;
    }
    let mut hi = i;
    while hi + 1 < line.len() && line[hi + 1] >= half {
        hi += 1;
    }
    if hi - lo + 1 < 5 || lo == 0 || hi + 1 == line.len() {
        return refine_peak(thetas, line, i);
    }
    let cross = |a: usize, b: usize| thetas[a] + (half - line[a]) * (thetas[b] - thetas[a]) / (line[b] - line[a]);
    0.5 * (cross(lo - 1, lo) + cross(hi + 1, hi))
}

fn nearest_column(thetas: &[f64], theta: f64) -> usize {
    (0..thetas.len()).min_by(|&a, &b| wrap_angle(thetas[a] - theta).abs().total_cmp(&wrap_angle(thetas[b] - theta).abs())).unwrap()
}

/// Extracts the amplification phases and the leakage error from a scan.
/// Phases are located on the mean-over-N line, starting from the strongest
/// column and stepping by `2π/(2ℓ−1)`.
pub fn ale_extract(scan: &AleScan) -> Result<AleResult> {
    let level = scan.level;
    let m = phase_count(level);
    let spacing = phase_spacing(level);
    let line = scan.mean_line();
    let peak = line.iter().copied().fold(0.0, f64::max);
    if !(peak > 1e-14) {
        return Ok(AleResult { level, phases: vec![], fits: vec![], epsilon: 0.0, epsilon_err: 0.0, spacing_error: 0.0 });
    }
    let i0 = (0..line.len()).max_by(|&a, &b| line[a].total_cmp(&line[b]).then(b.cmp(&a))).unwrap();
    let theta0 = peak_center(&scan.thetas, &line, i0);
    let mut phases = Vec::with_capacity(m);
    let mut fits = Vec::with_capacity(m);
    for k in 0..m {
        let center = (theta0 + k as f64 * spacing).rem_euclid(TAU);
        let i = best_column_near(&scan.thetas, &line, center, spacing / 4.0)
            .ok_or(Error::MissingPhases { found: k, expected: m })?;
        let th = peak_center(&scan.thetas, &line, i).rem_euclid(TAU);
        let i = nearest_column(&scan.thetas, th);
        phases.push(th);
        fits.push(fit_chevron(th, &scan.ns, &scan.surface()[i], scan.spam)?);
    }
    let weight = 1.0 / (2 * m) as f64;
    let epsilon = weight * fits.iter().map(|f| f.a_omega_sq).sum::<f64>();
    let epsilon_err = weight * fits.iter().map(|f| f.a_omega_sq_err.powi(2)).sum::<f64>().sqrt();
    let mut sorted = phases.clone();
    sorted.sort_by(f64::total_cmp);
    let spacing_error = (0..m)
        .map(|k| {
            let next = if k + 1 < m { sorted[k + 1] } else { sorted[0] + TAU };
            (next - sorted[k] - spacing).abs()
        })
        .fold(0.0, f64::max);
    Ok(AleResult { level, phases, fits, epsilon, epsilon_err, spacing_error })
}

/// Scan settings for the full ALE measurement.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AleOptions {
    pub n_max: usize,
    pub n_step: usize,
    /// Discovery points per phase period.
    pub discovery_points: usize,
    /// Half-width of the first tracking window (rad).
    pub tracking_halfwidth: f64,
    pub tracking_points: usize,
    /// Number of successively ten-fold narrower tracking windows.
    pub tracking_rounds: usize,
}

impl Default for AleOptions {
    fn default() -> Self {
        Self { n_max: 400, n_step: 4, discovery_points: 60, tracking_halfwidth: 0.05, tracking_points: 21, tracking_rounds: 3 }
    }
}

impl AleOptions {
    pub fn n_grid(&self) -> Vec<usize> {
        (0..=self.n_max).step_by(self.n_step.max(1)).collect()
    }
}

/// Discovery scan over the full circle followed by narrowing tracking scans
/// around every predicted amplification phase, then [`ale_extract`].
pub fn ale_measure(
    gate: &GateProcess,
    target: Target,
    level: usize,
    opts: &AleOptions,
    assignment: Option<&AssignmentMatrix>,
) -> Result<(AleScan, AleResult)> {
    let ns = opts.n_grid();
    let m = phase_count(level);
    let spacing = phase_spacing(level);
    let total = opts.discovery_points * m;
    let coarse: Vec<f64> = (0..total).map(|i| TAU * i as f64 / total as f64).collect();
    let mut scan = ale_phase_scan(gate, target, level, &coarse, &ns, assignment)?;
    let line = scan.mean_line();
    if !(line.iter().copied().fold(0.0, f64::max) > 1e-14) {
        let result = ale_extract(&scan)?;
        return Ok((scan, result));
    }
    let i0 = (0..line.len()).max_by(|&a, &b| line[a].total_cmp(&line[b]).then(b.cmp(&a))).unwrap();
    let theta0 = scan.thetas[i0];
    let mut centers: Vec<f64> = (0..m).map(|k| (theta0 + k as f64 * spacing).rem_euclid(TAU)).collect();
    let mut half = opts.tracking_halfwidth;
    for _ in 0..opts.tracking_rounds {
        let pts = opts.tracking_points.max(3);
        let window: Vec<f64> = centers
            .iter()
            .flat_map(|&c| (0..pts).map(move |j| c - half + 2.0 * half * j as f64 / (pts - 1) as f64))
            .map(|t| t.rem_euclid(TAU))
            .collect();
        let fine = ale_phase_scan(gate, target, level, &window, &ns, assignment)?;
        scan = scan.merge(fine)?;
        let line = scan.mean_line();
        centers = centers
            .iter()
            .map(|&c| {
                best_column_near(&scan.thetas, &line, c, half)
                    .map(|i| peak_center(&scan.thetas, &line, i).rem_euclid(TAU))
                    .unwrap_or(c)
            })
            .collect();
        half /= 10.0;
    }
    // Make sure each refined centre is itself a column.
    let last = ale_phase_scan(gate, target, level, &centers, &ns, assignment)?;
    scan = scan.merge(last)?;
    let result = ale_extract(&scan)?;
    Ok((scan, result))
}

fn ideal_half_pi(d: usize) -> GateProcess {
    GateProcess::Unitary(embed_qubit(&rotation(FRAC_PI_2, 0.0), d))
}

/// Ping-pong sequence: ideal X/2, then `N` π rotations built from the gate
/// (X, or X/2 applied twice). Returns `P₁ − P₀` per N.
pub fn aae_sequence(gate: &GateProcess, target: Target, ns: &[usize]) -> Result<Vec<f64>> {
    let d = gate.dim();
    let prep = Compiled::from_gate(&ideal_half_pi(d));
    let step = match target {
        Target::X => Compiled::from_gate(gate),
        Target::XHalf => Compiled::from_ops(&[SeqOp::Gate(gate), SeqOp::Gate(gate)], d)?,
    };
    let mut state = prep.apply(&QState::Ket(ket(0, d)))?;
    let mut done = 0;
    let mut out = Vec::with_capacity(ns.len());
    for &n in ns {
        while done < n {
            state = step.apply(&state)?;
            done += 1;
        }
        let p = state.populations();
        out.push(p[1] - p[0]);
    }
    Ok(out)
}

/// Fits `f = a sin(N(π + φ_e))`; `φ_e > 0` means over-rotation. The
/// contrast `a` is held at 1: for small errors the signal is `a φ_e N (−1)^N`
/// and the two are not separable.
pub fn aae_sequence_and_fit(gate: &GateProcess, target: Target, ns: &[usize]) -> Result<FitReport> {
    let ys = aae_sequence(gate, target, ns)?;
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let model = |p: &[f64], n: f64| (n * (PI + p[0])).sin();
    let mut seed = (0.0, f64::INFINITY);
    for k in -400..=400 {
        let phi = 0.5 * k as f64 / 400.0;
        let rss: f64 = xs.iter().zip(&ys).map(|(&n, y)| (model(&[phi], n) - y).powi(2)).sum();
        if rss < seed.1 {
            seed = (phi, rss);
        }
    }
    let r = fit_curve("aae", &["phi_e"], &[seed.0], &xs, &ys, model)?;
    if r.value("phi_e").abs() > 3.0 {
        return Err(Error::FitFailed(format!("AAE rotation error {} rad is too close to π", r.value("phi_e"))));
    }
    Ok(FitReport {
        names: vec!["a".into(), "phi_e".into()],
        values: vec![1.0, r.values[0]],
        errors: vec![0.0, r.errors[0]],
        ..r
    })
}

/// `A·π/(π + φ_e)`.
pub fn aae_amplitude_update(amplitude: f64, phi_e: f64) -> f64 {
    amplitude * PI / (PI + phi_e)
}

/// Phase-error amplification. X: N pairs (X, X̄) from |0>, read out as
/// `⟨Z⟩ + i⟨X⟩`. X/2: ideal X/2, then N pairs (X/2, X̄/2), read out as
/// `⟨X⟩ + i(⟨Y⟩ − 1)/2`. X̄ is the gate with drive phase π.
pub fn ape_sequence(gate: &GateProcess, target: Target, ns: &[usize]) -> Result<Vec<C64>> {
    let d = gate.dim();
    let pair = Compiled::from_gate(gate).then(&Compiled::phased(gate, PI)?)?;
    let mut state = QState::Ket(ket(0, d));
    if target == Target::XHalf {
        state = Compiled::from_gate(&ideal_half_pi(d)).apply(&state)?;
    }
    let mut done = 0;
    let mut out = Vec::with_capacity(ns.len());
    for &n in ns {
        while done < n {
            state = pair.apply(&state)?;
            done += 1;
        }
        let [x, y, z] = pauli_expectations(&state);
        out.push(match target {
            Target::X => C64::new(z, x),
            Target::XHalf => C64::new(x, (y - 1.0) / 2.0),
        });
    }
    Ok(out)
}

/// Seeds `(r_I, r_Q, φ₀, c_I, c_Q)` for the APE fit.
pub fn ape_anchors(target: Target) -> [f64; 5] {
    match target {
        Target::X => [1.0, 1.0, 0.0, 0.0, 0.0],
        Target::XHalf => [1.0, 0.5, -FRAC_PI_2, 0.0, -0.5],
    }
}

fn ape_model(p: &[f64], n: f64) -> C64 {
    let ph = p[2] * n + p[3];
    C64::new(p[0] * ph.cos() + p[4], p[1] * ph.sin() + p[5])
}

/// Fits `f = r_I cos(ω_e N + φ₀) + i r_Q sin(ω_e N + φ₀) + c_I + i c_Q`.
/// Parameters: `r_i, r_q, omega_e, phi0, c_i, c_q`.
pub fn ape_sequence_and_fit(gate: &GateProcess, target: Target, ns: &[usize]) -> Result<FitReport> {
    let ys = ape_sequence(gate, target, ns)?;
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let [ri, rq, phi0, ci, cq] = ape_anchors(target);
    let residuals = |p: &[f64]| -> Vec<f64> {
        xs.iter()
            .zip(&ys)
            .flat_map(|(&n, y)| {
                let r = ape_model(p, n) - y;
                [r.re, r.im]
            })
            .collect()
    };
    // Seed ω_e from the mean phase advance of the anchored signal.
    let centred: Vec<C64> = ys.iter().map(|y| C64::new((y.re - ci) / ri, (y.im - cq) / rq)).collect();
    let mut num = 0.0;
    let mut den = 0.0;
    for w in centred.windows(2).zip(xs.windows(2)) {
        let (z, x) = w;
        let dn = x[1] - x[0];
        if z[0].norm() > 1e-6 && z[1].norm() > 1e-6 {
            num += (z[1] * z[0].conj()).arg();
            den += dn;
        }
    }
    let omega_seed = if den > 0.0 { num / den } else { 0.0 };
    let names = ["r_i", "r_q", "omega_e", "phi0", "c_i", "c_q"];
    // Anchored fit first: with little accumulated rotation the contrasts and
    // centres trade off against ω_e and are held at their ideal values.
    let reduced = |q: &[f64]| residuals(&[ri, rq, q[0], q[1], ci, cq]);
    let anchored = fit_residuals("ape-anchored", &["omega_e", "phi0"], &[omega_seed, phi0], 2 * xs.len(), &reduced)?;
    let n_max = xs.iter().copied().fold(0.0, f64::max);
    if anchored.values[0].abs() * n_max > 0.3 {
        let p0 = [ri, rq, anchored.values[0], anchored.values[1], ci, cq];
        if let Ok(mut r) = fit_residuals("ape", &names, &p0, 2 * xs.len(), &residuals) {
            if r.errors.iter().all(|e| e.is_finite()) {
                canonical_ape(&mut r.values);
                return Ok(r);
            }
        }
    }
    Ok(FitReport {
        model: anchored.model,
        names: names.iter().map(|s| s.to_string()).collect(),
        values: vec![ri, rq, anchored.values[0], anchored.values[1], ci, cq],
        errors: vec![0.0, 0.0, anchored.errors[0], anchored.errors[1], 0.0, 0.0],
        residual_norm: anchored.residual_norm,
        points: anchored.points,
    })
}

/// The APE model is unchanged under (ω, φ₀, r_I) → (−ω, π − φ₀, −r_I) and
/// (ω, φ₀, r_Q) → (−ω, −φ₀, −r_Q); positive radii fix the sign of ω_e.
fn canonical_ape(p: &mut [f64]) {
    if p[0] < 0.0 {
        p[0] = -p[0];
        p[2] = -p[2];
        p[3] = PI - p[3];
    }
    if p[1] < 0.0 {
        p[1] = -p[1];
        p[2] = -p[2];
        p[3] = -p[3];
    }
    p[3] = wrap_angle(p[3]);
}

/// `δω − ω_e/t_cycle`.
pub fn ape_detuning_update(detuning: f64, omega_e: f64, t_cycle: f64) -> f64 {
    detuning - omega_e / t_cycle
}

/// P₁ after one pulse for every amplitude, fitted to `a sin²(πA/(2A_π))`.
/// Parameters: `a, a_pi`.
pub fn rabi_scan(
    transmon: &Transmon,
    pulse: &PulseParams,
    amplitudes: &[f64],
    channels: &LindbladChannels,
    opts: &PropagatorOptions,
) -> Result<(Vec<f64>, FitReport)> {
    let d = transmon.levels();
    let p1: Vec<Result<f64>> = amplitudes
        .par_iter()
        .map(|&a| {
            if a == 0.0 {
                return Ok(0.0);
            }
            let p = PulseParams { amplitude: a, ..pulse.clone() };
            let g = simulate_gate(transmon, &p, channels, opts)?;
            let s = sequence_propagate(&[SeqOp::Gate(&g)], QState::Ket(ket(0, d)))?;
            Ok(s.populations()[1])
        })
        .collect();
    let p1: Vec<f64> = p1.into_iter().collect::<Result<_>>()?;
    let imax = (0..p1.len()).max_by(|&a, &b| p1[a].total_cmp(&p1[b])).ok_or_else(|| Error::invalid("empty amplitude grid"))?;
    let a_max = amplitudes.iter().copied().fold(0.0, f64::max);
    let model = |p: &[f64], a: f64| p[0] * (PI * a / (2.0 * p[1])).sin().powi(2);
    let r = fit_curve("rabi", &["a", "a_pi"], &[p1[imax].max(0.5), amplitudes[imax]], amplitudes, &p1, model)?;
    if r.value("a_pi") * 1.5 > a_max || r.value("a_pi") <= 0.0 {
        return Err(Error::FitFailed(format!(
            "Rabi grid up to {a_max:e} does not cover the oscillation (A_π ≈ {:e})",
            r.value("a_pi")
        )));
    }
    Ok((p1, r))
}
