//! Time evolution of the driven transmon without the rotating-wave
//! approximation.
//!
//! The lab-frame equation `i dU/dt = (H_q + 2Re[Ω e^{-iω_d t}] D) U` is
//! integrated in the interaction picture of `H_q`, which keeps every
//! counter-rotating term but removes the fast free phases from the
//! integrator. Results are reported in the frame `R(t) = exp(-iω_d t N)`,
//! i.e. `U_rot = R†(t_end) U_lab`.

pub mod ode;
pub mod waveform;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::device::{DeviceParams, Transmon};
use crate::error::{Error, Result};
use crate::linalg::{vz, CMatrix, CVector, C64};
use crate::pulse::{synthesize, PulseParams};

pub use ode::{OdeOptions, OdeStats};
pub use waveform::{DriveWaveform, UniformSpline};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagatorOptions {
    /// Target local error of the integrator.
    pub tolerance: f64,
    /// Carrier frequency override; defaults to the qubit frequency.
    pub carrier: Option<f64>,
}

impl Default for PropagatorOptions {
    fn default() -> Self {
        Self { tolerance: 1e-10, carrier: None }
    }
}

impl PropagatorOptions {
    pub fn carrier_for(&self, transmon: &Transmon) -> f64 {
        self.carrier.unwrap_or_else(|| transmon.qubit_frequency())
    }

    fn ode(&self) -> OdeOptions {
        OdeOptions::with_tolerance(self.tolerance)
    }
}

/// Incoherent processes, all in 1/s.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LindbladChannels {
    pub gamma_down: f64,
    pub gamma_up: f64,
    pub gamma_phi: f64,
}

impl LindbladChannels {
    pub fn coherent() -> Self {
        Self::default()
    }

    /// `Γ↓ = (1-n̄)/T1`, `Γ↑ = n̄/T1`, `Γφ = 1/T2E - 1/(2T1)`; absent
    /// coherence times give zero rates.
    pub fn from_device(p: &DeviceParams) -> Result<Self> {
        let mut c = Self::default();
        if let Some(t1) = p.t1 {
            c.gamma_down = (1.0 - p.n_bar) / t1;
            c.gamma_up = p.n_bar / t1;
        }
        if let Some(t2) = p.t2_echo {
            let relax = p.t1.map(|t1| 0.5 / t1).unwrap_or(0.0);
            c.gamma_phi = 1.0 / t2 - relax;
        }
        if c.gamma_down < 0.0 || c.gamma_up < 0.0 || c.gamma_phi < -1e-9 * (1.0 / p.t2_echo.unwrap_or(1.0)) {
            return Err(Error::invalid(format!("negative decoherence rate in {c:?}")));
        }
        c.gamma_phi = c.gamma_phi.max(0.0);
        Ok(c)
    }

    pub fn is_coherent(&self) -> bool {
        self.gamma_down == 0.0 && self.gamma_up == 0.0 && self.gamma_phi == 0.0
    }
}

/// Linear map on `d x d` density matrices, stored as the images of the
/// matrix units `|i><j|` (index `i*d + j`).
#[derive(Debug, Clone)]
pub struct DensityMap {
    pub d: usize,
    pub outputs: Vec<CMatrix>,
}

impl DensityMap {
    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let d = self.d;
        let mut out = CMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                let c = rho[(i, j)];
                if c != C64::new(0.0, 0.0) {
                    out += &self.outputs[i * d + j] * c;
                }
            }
        }
        out
    }

    /// `d² x d²` superoperator acting on row-major vectorised matrices.
    pub fn superoperator(&self) -> CMatrix {
        let d = self.d;
        let mut s = CMatrix::zeros(d * d, d * d);
        for (b, out) in self.outputs.iter().enumerate() {
            for i in 0..d {
                for j in 0..d {
                    s[(i * d + j, b)] = out[(i, j)];
                }
            }
        }
        s
    }

    pub fn from_unitary(u: &CMatrix) -> Self {
        let d = u.nrows();
        let mut outputs = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                let mut e = CMatrix::zeros(d, d);
                e[(i, j)] = C64::new(1.0, 0.0);
                outputs.push(u * e * u.adjoint());
            }
        }
        Self { d, outputs }
    }
}

/// End-of-gate process in the frame rotating at the carrier.
#[derive(Debug, Clone)]
pub enum GateProcess {
    Unitary(CMatrix),
    DensityMap(DensityMap),
}

impl GateProcess {
    pub fn dim(&self) -> usize {
        match self {
            GateProcess::Unitary(u) => u.nrows(),
            GateProcess::DensityMap(m) => m.d,
        }
    }

    pub fn unitary(&self) -> Option<&CMatrix> {
        match self {
            GateProcess::Unitary(u) => Some(u),
            GateProcess::DensityMap(_) => None,
        }
    }

    pub fn density_map(&self) -> DensityMap {
        match self {
            GateProcess::Unitary(u) => DensityMap::from_unitary(u),
            GateProcess::DensityMap(m) => m.clone(),
        }
    }

    /// Superoperator in the row-major vectorisation used by [`DensityMap`].
    pub fn superoperator(&self) -> CMatrix {
        match self {
            // vec(U ρ U†) = (U ⊗ conj(U)) vec(ρ) for row-major stacking.
            GateProcess::Unitary(u) => u.kronecker(&u.map(|z| z.conj())),
            GateProcess::DensityMap(m) => m.superoperator(),
        }
    }
}

/// Multiplies `u` by the global phase making element (0,0) real and
/// non-negative.
pub fn fix_global_phase(u: &mut CMatrix) {
    let z = u[(0, 0)];
    if z.norm() > 0.0 {
        let ph = z.conj() / z.norm();
        u.iter_mut().for_each(|x| *x *= ph);
    }
}

/// Drive Hamiltonian in the interaction picture of the bare transmon,
/// `H_I,jk(t) = 2Re[Ω e^{-iω_d t}] D_jk e^{i(ω_j - ω_k)t}`, assembled into
/// a flat row-major buffer together with the level phases `e^{iω_j t}`.
struct InteractionHamiltonian<'a> {
    d: usize,
    levels: Vec<f64>,
    drive: Vec<f64>,
    couplings: Vec<(usize, usize)>,
    wave: &'a DriveWaveform,
}

impl<'a> InteractionHamiltonian<'a> {
    fn new(transmon: &Transmon, wave: &'a DriveWaveform) -> Self {
        let d = transmon.levels();
        let m = &transmon.drive.matrix;
        let mut drive = vec![0.0; d * d];
        let mut couplings = Vec::new();
        let scale = m.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        for j in 0..d {
            for k in 0..d {
                drive[j * d + k] = m[(j, k)];
                if j != k && m[(j, k)].abs() > 1e-14 * scale {
                    couplings.push((j, k));
                }
            }
        }
        Self { d, levels: transmon.spectral.eigen_frequencies.clone(), drive, couplings, wave }
    }

    #[inline]
    fn phases(&self, t: f64, q: &mut [C64]) {
        for (qj, w) in q.iter_mut().zip(&self.levels) {
            *qj = C64::from_polar(1.0, w * t);
        }
    }

    /// Fills `h`; returns false when the drive vanishes at `t`.
    #[inline]
    fn fill(&self, t: f64, q: &[C64], h: &mut [C64]) -> bool {
        h.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
        let omega = self.wave.envelope_at(t);
        if omega == C64::new(0.0, 0.0) {
            return false;
        }
        let g = 2.0 * (omega * C64::from_polar(1.0, -self.wave.carrier * t)).re;
        let d = self.d;
        for &(j, k) in &self.couplings {
            h[j * d + k] = q[j] * q[k].conj() * (g * self.drive[j * d + k]);
        }
        true
    }
}

/// `e^{-i diag(δ_j) t}`: maps interaction-picture operators back to the
/// frame rotating at the carrier.
fn frame_phases(transmon: &Transmon, carrier: f64, t: f64) -> Vec<C64> {
    transmon.spectral.detunings(carrier).iter().map(|dj| C64::from_polar(1.0, -dj * t)).collect()
}

fn integrate_unitary_columns(
    transmon: &Transmon,
    wave: &DriveWaveform,
    state: &mut [C64],
    cols: usize,
    t0: f64,
    t1: f64,
    opts: &PropagatorOptions,
    step: &mut Option<f64>,
) -> Result<OdeStats> {
    let d = transmon.levels();
    let ham = InteractionHamiltonian::new(transmon, wave);
    let mut h = vec![C64::new(0.0, 0.0); d * d];
    let mut q = vec![C64::new(0.0, 0.0); d];
    ode::integrate(
        |t, y, dy| {
            ham.phases(t, &mut q);
            if !ham.fill(t, &q, &mut h) {
                dy.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
                return;
            }
            // dy = -i H y, y stored row-major as d x cols.
            for r in 0..d {
                for c in 0..cols {
                    let mut acc = C64::new(0.0, 0.0);
                    for k in 0..d {
                        acc += h[r * d + k] * y[k * cols + c];
                    }
                    dy[r * cols + c] = C64::new(acc.im, -acc.re);
                }
            }
        },
        t0,
        t1,
        state,
        &opts.ode(),
        step,
    )
}

/// End-of-gate unitary over `d` levels, global phase fixed.
pub fn propagate_unitary(transmon: &Transmon, wave: &DriveWaveform, opts: &PropagatorOptions) -> Result<GateProcess> {
    let d = transmon.levels();
    let mut y: Vec<C64> = CMatrix::identity(d, d).transpose().iter().copied().collect();
    integrate_unitary_columns(transmon, wave, &mut y, d, 0.0, wave.duration, opts, &mut None)?;
    let mut u = CMatrix::from_row_slice(d, d, &y);
    for (r, ph) in frame_phases(transmon, wave.carrier, wave.duration).into_iter().enumerate() {
        u.row_mut(r).iter_mut().for_each(|x| *x *= ph);
    }
    let defect = crate::linalg::unitarity_defect(&u);
    if defect > 1e-8 {
        return Err(Error::NonUnitary(defect));
    }
    fix_global_phase(&mut u);
    Ok(GateProcess::Unitary(u))
}

fn integrate_density_stack(
    transmon: &Transmon,
    wave: &DriveWaveform,
    channels: &LindbladChannels,
    stack: &mut [C64],
    count: usize,
    t0: f64,
    t1: f64,
    opts: &PropagatorOptions,
) -> Result<OdeStats> {
    let d = transmon.levels();
    let dd = d * d;
    let ham = InteractionHamiltonian::new(transmon, wave);
    // Σ L†L is diagonal for these channels: Γ↓ j + Γ↑ (j+1, truncated) + 2Γφ j².
    let kappa: Vec<f64> = (0..d)
        .map(|j| {
            let jf = j as f64;
            let up = if j + 1 < d { jf + 1.0 } else { 0.0 };
            channels.gamma_down * jf + channels.gamma_up * up + 2.0 * channels.gamma_phi * jf * jf
        })
        .collect();
    let sqrt_n: Vec<f64> = (0..=d).map(|j| (j as f64).sqrt()).collect();
    let mut h = vec![C64::new(0.0, 0.0); dd];
    let mut q = vec![C64::new(0.0, 0.0); d];
    // Jump phases: a_I carries e^{-i(ω_{j+1}-ω_j)t} on |j><j+1|.
    let mut down = vec![C64::new(0.0, 0.0); d];
    ode::integrate(
        |t, y, dy| {
            ham.phases(t, &mut q);
            ham.fill(t, &q, &mut h);
            for j in 0..d {
                h[j * d + j] -= C64::new(0.0, 0.5 * kappa[j]);
            }
            for j in 0..d.saturating_sub(1) {
                down[j] = q[j] * q[j + 1].conj();
            }
            for m in 0..count {
                let rho = &y[m * dd..(m + 1) * dd];
                let out = &mut dy[m * dd..(m + 1) * dd];
                for r in 0..d {
                    for c in 0..d {
                        // -i (H_eff ρ - ρ H_eff†)
                        let mut acc = C64::new(0.0, 0.0);
                        for k in 0..d {
                            acc += h[r * d + k] * rho[k * d + c] - rho[r * d + k] * h[c * d + k].conj();
                        }
                        let mut v = C64::new(acc.im, -acc.re);
                        if r + 1 < d && c + 1 < d {
                            let ph = down[r] * down[c].conj();
                            v += rho[(r + 1) * d + c + 1] * ph * (channels.gamma_down * sqrt_n[r + 1] * sqrt_n[c + 1]);
                        }
                        if r > 0 && c > 0 {
                            let ph = down[r - 1].conj() * down[c - 1];
                            v += rho[(r - 1) * d + c - 1] * ph * (channels.gamma_up * sqrt_n[r] * sqrt_n[c]);
                        }
                        v += rho[r * d + c] * (2.0 * channels.gamma_phi * (r * c) as f64);
                        out[r * d + c] = v;
                    }
                }
            }
        },
        t0,
        t1,
        stack,
        &opts.ode(),
        &mut None,
    )
}

fn to_frame(transmon: &Transmon, wave: &DriveWaveform, mut rho: CMatrix) -> CMatrix {
    let ph = frame_phases(transmon, wave.carrier, wave.duration);
    let d = rho.nrows();
    for r in 0..d {
        for c in 0..d {
            rho[(r, c)] *= ph[r] * ph[c].conj();
        }
    }
    rho
}

fn check_density(rho: &CMatrix, expected_trace: f64) -> Result<()> {
    let tr = rho.trace();
    let drift = (tr - C64::new(expected_trace, 0.0)).norm();
    if drift > 1e-7 {
        return Err(Error::TraceDrift(drift));
    }
    Ok(())
}

/// Integrates the Lindblad equation for one initial state.
pub fn propagate_lindblad(
    transmon: &Transmon,
    wave: &DriveWaveform,
    channels: &LindbladChannels,
    rho0: &CMatrix,
    opts: &PropagatorOptions,
) -> Result<CMatrix> {
    let d = transmon.levels();
    if rho0.nrows() != d || rho0.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, got: rho0.nrows() });
    }
    let mut y: Vec<C64> = rho0.transpose().iter().copied().collect();
    integrate_density_stack(transmon, wave, channels, &mut y, 1, 0.0, wave.duration, opts)?;
    let rho = to_frame(transmon, wave, CMatrix::from_row_slice(d, d, &y));
    check_density(&rho, rho0.trace().re)?;
    Ok(rho)
}

/// Density map of the gate: all `d²` matrix units propagated together.
pub fn propagate_density_map(
    transmon: &Transmon,
    wave: &DriveWaveform,
    channels: &LindbladChannels,
    opts: &PropagatorOptions,
) -> Result<GateProcess> {
    let d = transmon.levels();
    let dd = d * d;
    let mut y = vec![C64::new(0.0, 0.0); dd * dd];
    for b in 0..dd {
        y[b * dd + b] = C64::new(1.0, 0.0);
    }
    integrate_density_stack(transmon, wave, channels, &mut y, dd, 0.0, wave.duration, opts)?;
    let outputs: Vec<CMatrix> = (0..dd)
        .map(|b| to_frame(transmon, wave, CMatrix::from_row_slice(d, d, &y[b * dd..(b + 1) * dd])))
        .collect();
    for i in 0..d {
        for j in 0..d {
            check_density(&outputs[i * d + j], if i == j { 1.0 } else { 0.0 })?;
        }
    }
    Ok(GateProcess::DensityMap(DensityMap { d, outputs }))
}

/// Synthesises the pulse and propagates it, unitary when `channels` is
/// coherent, density map otherwise.
pub fn simulate_gate(
    transmon: &Transmon,
    pulse: &PulseParams,
    channels: &LindbladChannels,
    opts: &PropagatorOptions,
) -> Result<GateProcess> {
    let env = synthesize(pulse, transmon.anharmonicity())?;
    let wave = DriveWaveform::new(&env, opts.carrier_for(transmon));
    if channels.is_coherent() {
        propagate_unitary(transmon, &wave, opts)
    } else {
        propagate_density_map(transmon, &wave, channels, opts)
    }
}

#[derive(Debug, Clone, Copy)]
pub enum SeqOp<'a> {
    Gate(&'a GateProcess),
    /// Virtual-Z frame rotation, level `j` acquires `exp(-i j θ)`.
    Vz(f64),
}

#[derive(Debug, Clone)]
pub enum QState {
    Ket(CVector),
    Density(CMatrix),
}

impl QState {
    pub fn dim(&self) -> usize {
        match self {
            QState::Ket(k) => k.len(),
            QState::Density(r) => r.nrows(),
        }
    }

    pub fn populations(&self) -> Vec<f64> {
        match self {
            QState::Ket(k) => k.iter().map(|z| z.norm_sqr()).collect(),
            QState::Density(r) => (0..r.nrows()).map(|i| r[(i, i)].re).collect(),
        }
    }

    pub fn density(&self) -> CMatrix {
        match self {
            QState::Ket(k) => k * k.adjoint(),
            QState::Density(r) => r.clone(),
        }
    }
}

/// Applies gates and virtual-Z rotations in order.
pub fn sequence_propagate(ops: &[SeqOp<'_>], psi0: QState) -> Result<QState> {
    let d = psi0.dim();
    let mut state = psi0;
    for op in ops {
        match op {
            SeqOp::Vz(theta) => {
                let z = vz(*theta, d);
                state = match state {
                    QState::Ket(k) => QState::Ket(&z * k),
                    QState::Density(r) => QState::Density(&z * r * z.adjoint()),
                };
            }
            SeqOp::Gate(g) => {
                if g.dim() != d {
                    return Err(Error::DimensionMismatch { expected: d, got: g.dim() });
                }
                state = match (g, state) {
                    (GateProcess::Unitary(u), QState::Ket(k)) => QState::Ket(u * k),
                    (GateProcess::Unitary(u), QState::Density(r)) => QState::Density(u * r * u.adjoint()),
                    (GateProcess::DensityMap(m), s) => QState::Density(m.apply(&s.density())),
                };
            }
        }
    }
    Ok(state)
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub populations: Vec<f64>,
    /// Qubit-subspace Bloch components (x, y, z).
    pub bloch: [f64; 3],
}

/// Samples populations during the pulse at `samples` evenly spaced times.
pub fn unitary_trajectory(
    transmon: &Transmon,
    wave: &DriveWaveform,
    psi0: &CVector,
    samples: usize,
    opts: &PropagatorOptions,
) -> Result<Vec<TrajectoryPoint>> {
    let d = transmon.levels();
    if psi0.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: psi0.len() });
    }
    let samples = samples.max(2);
    let mut y: Vec<C64> = psi0.iter().copied().collect();
    let mut step = None;
    let mut out = Vec::with_capacity(samples);
    let mut t_prev = 0.0;
    for s in 0..samples {
        let t = wave.duration * s as f64 / (samples - 1) as f64;
        integrate_unitary_columns(transmon, wave, &mut y, 1, t_prev, t, opts, &mut step)?;
        t_prev = t;
        let ph = frame_phases(transmon, wave.carrier, t);
        let yr: Vec<C64> = y.iter().zip(&ph).map(|(a, b)| a * b).collect();
        let c01 = yr[0].conj() * yr[1];
        out.push(TrajectoryPoint {
            t,
            populations: yr.iter().map(|z| z.norm_sqr()).collect(),
            bloch: [2.0 * c01.re, 2.0 * c01.im, yr[0].norm_sqr() - yr[1].norm_sqr()],
        });
    }
    Ok(out)
}

pub fn write_trajectory_csv<W: std::io::Write>(points: &[TrajectoryPoint], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let d = points.first().map(|p| p.populations.len()).unwrap_or(0);
    let mut header = vec!["t".to_string()];
    header.extend((0..d).map(|j| format!("P{j}")));
    header.extend(["x", "y", "z"].iter().map(|s| s.to_string()));
    wr.write_record(&header)?;
    for p in points {
        let mut row = vec![p.t.to_string()];
        row.extend(p.populations.iter().map(|x| x.to_string()));
        row.extend(p.bloch.iter().map(|x| x.to_string()));
        wr.write_record(&row)?;
    }
    wr.flush()?;
    Ok(())
}

/// Propagates several pulses in parallel, preserving order.
pub fn simulate_gates(
    transmon: &Transmon,
    pulses: &[PulseParams],
    channels: &LindbladChannels,
    opts: &PropagatorOptions,
) -> Vec<Result<GateProcess>> {
    pulses.par_iter().map(|p| simulate_gate(transmon, p, channels, opts)).collect()
}

#[cfg(test)]
mod tests;
