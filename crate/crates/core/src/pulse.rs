//! R2D and DRAG envelope synthesis and frequency-domain diagnostics.
//!
//! The squared envelope `Ω_R²` is built from the base ansatz by two
//! second-derivative filters, its square root is DRAG-corrected into a
//! complex envelope, and finally a constant detuning is applied as a phase
//! ramp centred on the pulse midpoint.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{C64, I};
use crate::units;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    /// `A sin^4(πt/t_p)` with hand-derived derivatives.
    #[default]
    Sin4,
    /// `A sin^n(πt/t_p)` through the generic finite-difference path.
    SinPower(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NegativePolicy {
    #[default]
    Error,
    /// Clamp negative `Ω_R²` to zero and mark the envelope degraded.
    Clamp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseParams {
    #[serde(with = "units::angular")]
    pub amplitude: f64,
    #[serde(with = "units::time")]
    pub t_p: f64,
    #[serde(default)]
    pub alpha12: f64,
    #[serde(default)]
    pub alpha02: f64,
    #[serde(default)]
    pub alpha13: f64,
    #[serde(default, with = "units::angular")]
    pub detuning: f64,
    #[serde(default = "default_padding", with = "units::time")]
    pub padding: f64,
    #[serde(default = "default_sample_period", with = "units::time")]
    pub sample_period: f64,
    #[serde(default)]
    pub shape: Shape,
    #[serde(default)]
    pub negative_policy: NegativePolicy,
}

fn default_padding() -> f64 {
    1e-9
}

fn default_sample_period() -> f64 {
    10e-12
}

impl PulseParams {
    /// Bare sin⁴ pulse with default padding and sampling.
    pub fn new(amplitude: f64, t_p: f64) -> Self {
        Self {
            amplitude,
            t_p,
            alpha12: 0.0,
            alpha02: 0.0,
            alpha13: 0.0,
            detuning: 0.0,
            padding: default_padding(),
            sample_period: default_sample_period(),
            shape: Shape::Sin4,
            negative_policy: NegativePolicy::Error,
        }
    }

    pub fn with_alphas(mut self, a12: f64, a02: f64, a13: f64) -> Self {
        self.alpha12 = a12;
        self.alpha02 = a02;
        self.alpha13 = a13;
        self
    }

    pub fn with_detuning(mut self, detuning: f64) -> Self {
        self.detuning = detuning;
        self
    }

    pub fn alphas(&self) -> [f64; 3] {
        [self.alpha12, self.alpha02, self.alpha13]
    }

    pub fn duration(&self) -> f64 {
        self.t_p + self.padding
    }

    /// Number of sample intervals covering `[0, t_p + padding]`.
    pub fn intervals(&self) -> usize {
        (self.duration() / self.sample_period).round() as usize
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.t_p > 0.0) {
            v.push(format!("t_p must be positive, got {:e} s", self.t_p));
        }
        if !(self.padding >= 0.0) {
            v.push(format!("padding must be non-negative, got {:e} s", self.padding));
        }
        if !(self.sample_period > 0.0) {
            v.push(format!("sample_period must be positive, got {:e} s", self.sample_period));
        } else if self.t_p > 0.0 && self.padding >= 0.0 {
            let n = self.duration() / self.sample_period;
            let np = self.t_p / self.sample_period;
            if (n - n.round()).abs() > 1e-6 || (np - np.round()).abs() > 1e-6 {
                v.push(format!(
                    "sample_period {:e} s does not divide t_p and t_p + padding evenly",
                    self.sample_period
                ));
            }
        }
        if !self.amplitude.is_finite() {
            v.push("amplitude must be finite".into());
        }
        for (name, a) in [("alpha12", self.alpha12), ("alpha02", self.alpha02), ("alpha13", self.alpha13)] {
            if !a.is_finite() {
                v.push(format!("{name} must be finite"));
            }
        }
        if let Shape::SinPower(n) = self.shape {
            if n < 4 {
                v.push(format!("sin_power exponent must be at least 4, got {n}"));
            }
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
}

/// Base ansatz value and its first two time derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnsatzValue {
    pub value: f64,
    pub first: f64,
    pub second: f64,
}

pub fn base_ansatz(t: f64, params: &PulseParams) -> Result<AnsatzValue> {
    let end = params.duration();
    if !(0.0..=end).contains(&t) {
        return Err(Error::OutsideWindow { t, end });
    }
    if t > params.t_p {
        return Ok(AnsatzValue { value: 0.0, first: 0.0, second: 0.0 });
    }
    let n = match params.shape {
        Shape::Sin4 => 4.0,
        Shape::SinPower(n) => n as f64,
    };
    let k = PI / params.t_p;
    let (s, c) = (k * t).sin_cos();
    let a = params.amplitude;
    // d/dt s^n = n k s^(n-1) c ;  d²/dt² s^n = k² [n(n-1) s^(n-2) - n² s^n]
    Ok(AnsatzValue {
        value: a * s.powf(n),
        first: a * n * k * s.powf(n - 1.0) * c,
        second: a * k * k * (n * (n - 1.0) * s.powf(n - 2.0) - n * n * s.powf(n)),
    })
}

/// Sampled `Ω_R²` with its negativity report.
#[derive(Debug, Clone)]
pub struct SquaredEnvelope {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Time derivative of `Ω_R²` at each sample.
    pub derivative: Vec<f64>,
    pub min_value: f64,
    pub min_at: f64,
    /// Set when negative samples were clamped.
    pub degraded: bool,
    /// Exact `dΩ_R/dt` where the shape allows a closed form.
    omega_r_dot: Option<Vec<f64>>,
}

fn sample_times(params: &PulseParams) -> Vec<f64> {
    let n = params.intervals();
    (0..=n).map(|i| i as f64 * params.sample_period).collect()
}

/// Coefficients of `Ω_R²/A²` as a polynomial in `s = sin(πt/t_p)` for the
/// sin⁴ ansatz, in powers `s^4, s^6, s^8`.
fn sin4_poly(params: &PulseParams, delta: f64) -> [f64; 3] {
    let k2 = (PI / params.t_p).powi(2);
    let c2 = params.alpha02 / (delta * delta) + params.alpha13 / (9.0 * delta * delta);
    let c4 = params.alpha02 * params.alpha13 / (9.0 * delta.powi(4));
    // D² s^8 = k²(56 s^6 - 64 s^8),  D⁴ s^8 = k⁴(1680 s^4 - 5600 s^6 + 4096 s^8)
    [
        c4 * k2 * k2 * 1680.0,
        c2 * k2 * 56.0 - c4 * k2 * k2 * 5600.0,
        1.0 - c2 * k2 * 64.0 + c4 * k2 * k2 * 4096.0,
    ]
}

/// `(1 + α₀₂/Δ² d²/dt²)(1 + α₁₃/(9Δ²) d²/dt²) Ω₀²`, sampled over the
/// pulse window including padding.
pub fn r2d_squared_envelope(params: &PulseParams, delta: f64) -> Result<SquaredEnvelope> {
    params.validate()?;
    if !(delta.is_finite() && delta != 0.0) {
        return Err(Error::invalid("anharmonicity must be finite and nonzero"));
    }
    let times = sample_times(params);
    let (values, derivative, omega_r_dot) = match params.shape {
        Shape::Sin4 => sin4_squared(params, delta, &times),
        Shape::SinPower(_) => generic_squared(params, delta, &times),
    };
    let (mut min_value, mut min_at) = (f64::INFINITY, 0.0);
    for (&t, &v) in times.iter().zip(&values) {
        if v < min_value {
            min_value = v;
            min_at = t;
        }
    }
    // Rounding noise at the zeros of the envelope is not a real negativity.
    let scale = params.amplitude * params.amplitude;
    let negative = min_value < -1e-12 * scale;
    let mut out = SquaredEnvelope {
        times,
        values,
        derivative,
        min_value,
        min_at,
        degraded: false,
        omega_r_dot,
    };
    if negative {
        match params.negative_policy {
            NegativePolicy::Error => {
                return Err(Error::NegativeSquaredEnvelope { min: min_value, at: min_at })
            }
            NegativePolicy::Clamp => {
                out.degraded = true;
                for (v, d) in out.values.iter_mut().zip(out.derivative.iter_mut()) {
                    if *v < 0.0 {
                        *v = 0.0;
                        *d = 0.0;
                    }
                }
                if let Some(dot) = out.omega_r_dot.as_mut() {
                    for (r, v) in dot.iter_mut().zip(&out.values) {
                        if *v == 0.0 {
                            *r = 0.0;
                        }
                    }
                }
            }
        }
    }
    for v in out.values.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    Ok(out)
}

type Sampled = (Vec<f64>, Vec<f64>, Option<Vec<f64>>);

fn sin4_squared(params: &PulseParams, delta: f64, times: &[f64]) -> Sampled {
    let [c4, c6, c8] = sin4_poly(params, delta);
    let a2 = params.amplitude * params.amplitude;
    let k = PI / params.t_p;
    // Ω_R² = A² s^(2m) g(s) with the lowest nonvanishing power factored out,
    // so Ω_R = A s^m sqrt(g) and its derivative stays finite at the edges.
    let coeffs = [c4, c6, c8];
    let lowest = coeffs.iter().position(|c| *c != 0.0).unwrap_or(2);
    let m = 2 + lowest as i32;
    let n = times.len();
    let (mut f, mut df, mut dr) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for (i, &t) in times.iter().enumerate() {
        if t > params.t_p {
            continue;
        }
        let (s, c) = (k * t).sin_cos();
        let s2 = s * s;
        let poly = c4 * s2 * s2 + c6 * s2 * s2 * s2 + c8 * s2 * s2 * s2 * s2;
        let dpoly_ds = 4.0 * c4 * s2 * s + 6.0 * c6 * s2 * s2 * s + 8.0 * c8 * s2 * s2 * s2 * s;
        f[i] = a2 * poly;
        df[i] = a2 * dpoly_ds * c * k;
        // g(s) = poly / s^(2m) as a polynomial in s².
        let mut g = 0.0;
        let mut dg = 0.0;
        for (j, &cj) in coeffs.iter().enumerate().skip(lowest) {
            let p = (j - lowest) as i32;
            g += cj * s2.powi(p);
            if p > 0 {
                dg += cj * 2.0 * p as f64 * s.powi(2 * p - 1);
            }
        }
        if g > 0.0 {
            let sg = g.sqrt();
            let ds = m as f64 * s.powi(m - 1) * sg + s.powi(m) * dg / (2.0 * sg);
            dr[i] = params.amplitude.abs() * ds * c * k;
        }
    }
    (f, df, Some(dr))
}

fn generic_ansatz_squared(params: &PulseParams, t: f64) -> f64 {
    if t <= 0.0 || t >= params.t_p {
        return 0.0;
    }
    let n = match params.shape {
        Shape::SinPower(n) => n as i32,
        Shape::Sin4 => 4,
    };
    (params.amplitude * (PI * t / params.t_p).sin().powi(n)).powi(2)
}

/// Fourth-order central differences of `Ω₀²`.
fn generic_filtered(params: &PulseParams, delta: f64, t: f64, h: f64) -> f64 {
    let f = |x: f64| generic_ansatz_squared(params, x);
    let d2 = (-f(t - 2.0 * h) + 16.0 * f(t - h) - 30.0 * f(t) + 16.0 * f(t + h) - f(t + 2.0 * h))
        / (12.0 * h * h);
    let d4 = (-f(t - 3.0 * h) + 12.0 * f(t - 2.0 * h) - 39.0 * f(t - h) + 56.0 * f(t)
        - 39.0 * f(t + h)
        + 12.0 * f(t + 2.0 * h)
        - f(t + 3.0 * h))
        / (6.0 * h.powi(4));
    let c2 = params.alpha02 / (delta * delta) + params.alpha13 / (9.0 * delta * delta);
    let c4 = params.alpha02 * params.alpha13 / (9.0 * delta.powi(4));
    f(t) + c2 * d2 + c4 * d4
}

fn generic_squared(params: &PulseParams, delta: f64, times: &[f64]) -> Sampled {
    let n = times.len();
    let (mut f, mut df) = (vec![0.0; n], vec![0.0; n]);
    for (i, &t) in times.iter().enumerate() {
        if t <= 0.0 || t >= params.t_p {
            continue;
        }
        // Stencils shrink near the edges so they never straddle the window.
        let h = (params.t_p / 400.0).min(t / 6.0).min((params.t_p - t) / 6.0);
        f[i] = generic_filtered(params, delta, t, h);
        let g = |x: f64| generic_filtered(params, delta, x, h);
        df[i] = (g(t - 2.0 * h) - 8.0 * g(t - h) + 8.0 * g(t + h) - g(t + 2.0 * h)) / (12.0 * h);
    }
    (f, df, None)
}

/// Sampled complex envelope.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvelopeSamples {
    pub times: Vec<f64>,
    pub omega: Vec<C64>,
    pub omega_r_squared: Vec<f64>,
    pub params: PulseParams,
    /// Anharmonicity the filters were built for.
    pub anharmonicity: f64,
    pub degraded: bool,
}

impl EnvelopeSamples {
    pub fn sample_period(&self) -> f64 {
        self.params.sample_period
    }

    pub fn duration(&self) -> f64 {
        self.params.duration()
    }

    /// Envelope that is identically zero over the same window.
    pub fn zero_like(params: &PulseParams, anharmonicity: f64) -> Self {
        let times = sample_times(params);
        let n = times.len();
        Self {
            times,
            omega: vec![C64::new(0.0, 0.0); n],
            omega_r_squared: vec![0.0; n],
            params: PulseParams { amplitude: 0.0, ..params.clone() },
            anharmonicity,
            degraded: false,
        }
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["time_s", "omega_re", "omega_im", "omega_r_squared"])?;
        for ((t, o), q) in self.times.iter().zip(&self.omega).zip(&self.omega_r_squared) {
            wr.serialize((t, o.re, o.im, q))?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// `Ω = (1 - i α₁₂/Δ d/dt) sqrt(Ω_R²)`, without detuning.
pub fn drag_envelope(squared: &SquaredEnvelope, params: &PulseParams, delta: f64) -> Result<EnvelopeSamples> {
    if let Some(&bad) = squared.values.iter().find(|v| **v < 0.0) {
        let at = squared.values.iter().position(|v| *v == bad).map(|i| squared.times[i]).unwrap_or(0.0);
        return Err(Error::NegativeSquaredEnvelope { min: bad, at });
    }
    let n = squared.values.len();
    let sign = params.amplitude.signum();
    let mut omega = Vec::with_capacity(n);
    for i in 0..n {
        let f = squared.values[i];
        let t = squared.times[i];
        let r = sign * f.sqrt();
        let r_dot = match &squared.omega_r_dot {
            Some(dot) => sign * dot[i],
            None if f > 0.0 => sign * squared.derivative[i] / (2.0 * f.sqrt()),
            None => 0.0,
        };
        let value = if t <= 0.0 || t >= params.t_p {
            C64::new(0.0, 0.0)
        } else {
            C64::new(r, 0.0) - I * (params.alpha12 / delta) * r_dot
        };
        omega.push(value);
    }
    Ok(EnvelopeSamples {
        times: squared.times.clone(),
        omega,
        omega_r_squared: squared.values.clone(),
        params: params.clone(),
        anharmonicity: delta,
        degraded: squared.degraded,
    })
}

/// `0.712 (4α₁₂ - 2)/Δ · π²/t_g²`.
pub fn constant_detuning(alpha12: f64, delta: f64, t_g: f64) -> Result<f64> {
    if !(t_g > 0.0) {
        return Err(Error::invalid(format!("t_g must be positive, got {t_g:e}")));
    }
    Ok(0.712 * (4.0 * alpha12 - 2.0) / delta * PI * PI / (t_g * t_g))
}

/// `Ω'(t) = Ω(t) exp(-i δω (t - t_p/2))`.
pub fn apply_detuning_and_phase(env: &EnvelopeSamples, detuning: f64) -> EnvelopeSamples {
    let mid = env.params.t_p / 2.0;
    let mut out = env.clone();
    if detuning != 0.0 {
        for (o, &t) in out.omega.iter_mut().zip(&env.times) {
            *o *= C64::from_polar(1.0, -detuning * (t - mid));
        }
    }
    out.params.detuning = env.params.detuning + detuning;
    out
}

/// Full pipeline: squared envelope, DRAG correction, detuning from
/// `params.detuning`.
pub fn synthesize(params: &PulseParams, delta: f64) -> Result<EnvelopeSamples> {
    let sq = r2d_squared_envelope(params, delta)?;
    let bare = PulseParams { detuning: 0.0, ..params.clone() };
    let env = drag_envelope(&sq, &bare, delta)?;
    Ok(apply_detuning_and_phase(&env, params.detuning))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Notch {
    pub label: String,
    pub frequency: f64,
    /// Which transform the notch belongs to: `"omega"` or `"omega_r_squared"`.
    pub signal: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub frequencies: Vec<f64>,
    pub ft_omega: Vec<C64>,
    pub ft_omega_sq: Vec<C64>,
    pub notches: Vec<Notch>,
}

impl SpectrumResult {
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["freq_rad_s", "abs_ft_omega", "abs_ft_omega_sq"])?;
        for ((f, a), b) in self.frequencies.iter().zip(&self.ft_omega).zip(&self.ft_omega_sq) {
            wr.serialize((f, a.norm(), b.norm()))?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// `F(ω) = Σ f(t_n) exp(iωt_n) Δt`, evaluated at arbitrary ω.
pub fn dtft_complex(times: &[f64], values: &[C64], dt: f64, omega: f64) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    // Phasor recurrence on the uniform grid; re-anchored periodically.
    let step = C64::from_polar(1.0, omega * dt);
    let mut ph = C64::from_polar(1.0, omega * times.first().copied().unwrap_or(0.0));
    for (i, v) in values.iter().enumerate() {
        if i % 256 == 0 {
            ph = C64::from_polar(1.0, omega * times[i]);
        }
        acc += v * ph;
        ph *= step;
    }
    acc * dt
}

pub fn dtft_real(times: &[f64], values: &[f64], dt: f64, omega: f64) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    let step = C64::from_polar(1.0, omega * dt);
    let mut ph = C64::new(1.0, 0.0);
    for (i, v) in values.iter().enumerate() {
        if i % 256 == 0 {
            ph = C64::from_polar(1.0, omega * times[i]);
        }
        acc += *v * ph;
        ph *= step;
    }
    acc * dt
}

/// Predicted spectral zeros for the envelope's parameters.
pub fn predicted_notches(params: &PulseParams, delta: f64) -> Vec<Notch> {
    let mut v = Vec::new();
    if params.alpha12 != 0.0 {
        v.push(Notch {
            label: "1-2 single photon".into(),
            frequency: delta / params.alpha12 + params.detuning,
            signal: "omega".into(),
        });
    }
    if params.alpha02 > 0.0 {
        let w = delta / params.alpha02.sqrt();
        for (label, f) in [("0-2 two photon", w), ("0-2 two photon (mirror)", -w)] {
            v.push(Notch { label: label.into(), frequency: f, signal: "omega_r_squared".into() });
        }
    }
    if params.alpha13 > 0.0 {
        let w = 3.0 * delta / params.alpha13.sqrt();
        for (label, f) in [("1-3 two photon", w), ("1-3 two photon (mirror)", -w)] {
            v.push(Notch { label: label.into(), frequency: f, signal: "omega_r_squared".into() });
        }
    }
    v
}

/// `(1 - α₁₂ ω/Δ)`: the DRAG factor multiplying the transform of `Ω_R`.
pub fn drag_filter_factor(omega: f64, alpha12: f64, delta: f64) -> f64 {
    1.0 - alpha12 * omega / delta
}

/// `(1 - α₀₂ ω²/Δ²)(1 - α₁₃ ω²/(9Δ²))`: the factor multiplying the
/// transform of `Ω₀²`.
pub fn squared_filter_factor(omega: f64, alpha02: f64, alpha13: f64, delta: f64) -> f64 {
    let r = omega * omega / (delta * delta);
    (1.0 - alpha02 * r) * (1.0 - alpha13 * r / 9.0)
}

/// Transforms of Ω and Ω_R² on `points` frequencies spanning
/// `[-span·|Δ|, span·|Δ|]` (span at least 6).
pub fn spectrum(env: &EnvelopeSamples, points: usize, span: f64) -> SpectrumResult {
    use rayon::prelude::*;
    let span = span.max(6.0);
    let wmax = span * env.anharmonicity.abs();
    let points = points.max(2);
    let frequencies: Vec<f64> =
        (0..points).map(|i| -wmax + 2.0 * wmax * i as f64 / (points - 1) as f64).collect();
    let dt = env.sample_period();
    let pairs: Vec<(C64, C64)> = frequencies
        .par_iter()
        .map(|&w| {
            (
                dtft_complex(&env.times, &env.omega, dt, w),
                dtft_real(&env.times, &env.omega_r_squared, dt, w),
            )
        })
        .collect();
    let (ft_omega, ft_omega_sq) = pairs.into_iter().unzip();
    SpectrumResult {
        frequencies,
        ft_omega,
        ft_omega_sq,
        notches: predicted_notches(&env.params, env.anharmonicity),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    const DELTA: f64 = -TAU * 225e6;

    fn r2d(tp: f64) -> PulseParams {
        PulseParams::new(TAU * 80e6, tp).with_alphas(0.864, 1.467, 1.796)
    }

    #[test]
    fn ansatz_values() {
        let p = PulseParams::new(3.0e8, 7e-9);
        let mid = base_ansatz(3.5e-9, &p).unwrap();
        assert!((mid.value - 3.0e8).abs() < 1e-6);
        assert_eq!(base_ansatz(0.0, &p).unwrap().value, 0.0);
        assert!(base_ansatz(7e-9, &p).unwrap().value.abs() < 1e-40 * 3e8 + 1e-20);
        let k = PI / 7e-9;
        assert!((mid.second + 4.0 * 3.0e8 * k * k).abs() < 1e-6 * 4.0 * 3.0e8 * k * k);
        assert!(matches!(base_ansatz(8.5e-9, &p), Err(Error::OutsideWindow { .. })));
        assert_eq!(base_ansatz(7.5e-9, &p).unwrap().value, 0.0);
    }

    #[test]
    fn ansatz_second_derivative_matches_finite_difference() {
        let p = PulseParams::new(1.0, 7e-9);
        let h = 1e-13;
        for &t in &[1e-9, 2.2e-9, 3.5e-9, 5.9e-9] {
            let fd = (base_ansatz(t + h, &p).unwrap().value - 2.0 * base_ansatz(t, &p).unwrap().value
                + base_ansatz(t - h, &p).unwrap().value)
                / (h * h);
            let an = base_ansatz(t, &p).unwrap().second;
            assert!((fd - an).abs() < 1e-3 * (PI / 7e-9).powi(2), "t={t}: {fd} vs {an}");
        }
    }

    #[test]
    fn zero_alphas_reproduce_bare_ansatz() {
        let p = PulseParams::new(2.5e8, 7e-9);
        let env = synthesize(&p, DELTA).unwrap();
        for (t, o) in env.times.iter().zip(&env.omega) {
            let bare = base_ansatz(*t, &p).unwrap().value;
            assert!((o.re - bare).abs() <= 1e-15 * 2.5e8);
            assert_eq!(o.im, 0.0);
        }
    }

    #[test]
    fn sin4_squared_polynomial_matches_finite_differences() {
        // Independent check of the hand-derived D² and D⁴ of sin⁸.
        let p = r2d(7e-9);
        let sq = r2d_squared_envelope(&p, DELTA).unwrap();
        let g = PulseParams { shape: Shape::SinPower(4), ..p.clone() };
        let fd = r2d_squared_envelope(&g, DELTA).unwrap();
        let peak = sq.values.iter().cloned().fold(0.0, f64::max);
        for (a, b) in sq.values.iter().zip(&fd.values) {
            assert!((a - b).abs() < 1e-6 * peak);
        }
        let dpeak = sq.derivative.iter().map(|x| x.abs()).fold(0.0, f64::max);
        for (a, b) in sq.derivative.iter().zip(&fd.derivative) {
            assert!((a - b).abs() < 1e-5 * dpeak);
        }
    }

    #[test]
    fn reported_optimum_is_nonnegative_at_7ns_and_negative_at_5ns() {
        let sq = r2d_squared_envelope(&r2d(7e-9), DELTA).unwrap();
        assert!(sq.min_value >= -1e-12 * sq.values.iter().cloned().fold(0.0, f64::max));
        assert!(matches!(
            r2d_squared_envelope(&r2d(5e-9), DELTA),
            Err(Error::NegativeSquaredEnvelope { .. })
        ));
        let clamped = PulseParams { negative_policy: NegativePolicy::Clamp, ..r2d(5e-9) };
        let env = synthesize(&clamped, DELTA).unwrap();
        assert!(env.degraded);
    }

    #[test]
    fn drag_quadrature_follows_derivative() {
        let p = PulseParams::new(2.5e8, 7e-9).with_alphas(0.8, 0.0, 0.0);
        let env = synthesize(&p, DELTA).unwrap();
        let (imax, _) = env
            .omega
            .iter()
            .enumerate()
            .fold((0, 0.0), |acc, (i, o)| if o.im.abs() > acc.1 { (i, o.im.abs()) } else { acc });
        let t = env.times[imax];
        assert!((t - 3.5e-9).abs() > 0.5e-9);
        // Ω_I = -(α/Δ) dΩ_R/dt for a bare sin⁴ envelope.
        let a = base_ansatz(t, &p).unwrap();
        assert!((env.omega[imax].im + 0.8 / DELTA * a.first).abs() < 1e-9 * a.first.abs());
        let p0 = PulseParams::new(2.5e8, 7e-9);
        assert!(synthesize(&p0, DELTA).unwrap().omega.iter().all(|o| o.im == 0.0));
    }

    #[test]
    fn endpoints_and_padding_vanish() {
        let env = synthesize(&r2d(7e-9).with_detuning(-1.2e8), DELTA).unwrap();
        let np = (7e-9 / 10e-12) as usize;
        assert_eq!(env.omega[0], C64::new(0.0, 0.0));
        for o in &env.omega[np..] {
            assert_eq!(*o, C64::new(0.0, 0.0));
        }
        assert!(env.omega.iter().all(|o| o.re.is_finite() && o.im.is_finite()));
    }

    #[test]
    fn detuning_formula() {
        assert_eq!(constant_detuning(0.5, DELTA, 7e-9).unwrap(), 0.0);
        let a = constant_detuning(0.864, DELTA, 7e-9).unwrap();
        let b = constant_detuning(0.864, DELTA, 14e-9).unwrap();
        assert!((a / b - 4.0).abs() < 1e-12);
        // 0.712·1.456/(-2π·225 MHz)·π²/(7 ns)² ≈ -1.477e8 rad/s
        assert!((a + 1.4770e8).abs() < 1e5, "{a}");
        assert!(constant_detuning(0.8, DELTA, 0.0).is_err());
    }

    #[test]
    fn phase_ramp() {
        let p = PulseParams::new(2.5e8, 7e-9).with_alphas(0.7, 0.0, 0.0);
        let env = synthesize(&p, DELTA).unwrap();
        assert_eq!(apply_detuning_and_phase(&env, 0.0).omega, env.omega);
        let dw = -1.3e8;
        let r = apply_detuning_and_phase(&env, dw);
        for (a, b) in env.omega.iter().zip(&r.omega) {
            assert!((a.norm() - b.norm()).abs() < 1e-6);
        }
        // Compare phases one sample in from each edge (the edges are zero).
        let n = (7e-9 / 10e-12) as usize;
        let rot = |i: usize| (r.omega[i] / env.omega[i]).arg();
        let diff = rot(1) - rot(n - 1);
        let expected = dw * (env.times[n - 1] - env.times[1]);
        assert!((crate::linalg::wrap_angle(diff - expected)).abs() < 1e-9);
        let mid = n / 2;
        assert!(rot(mid).abs() < 1e-12);
    }

    #[test]
    fn analytic_filters_vanish_at_notches() {
        for &a in &[0.5, 1.0, 2.0] {
            assert_eq!(drag_filter_factor(DELTA / a, a, DELTA), 0.0);
            let w02 = DELTA / a.sqrt();
            let w13 = 3.0 * DELTA / a.sqrt();
            assert!(squared_filter_factor(w02, a, 1.3, DELTA).abs() < 1e-14);
            assert!(squared_filter_factor(w13, 0.7, a, DELTA).abs() < 1e-14);
        }
        assert_eq!(squared_filter_factor(DELTA, 1.0, 0.0, DELTA), 0.0);
        assert_eq!(squared_filter_factor(3.0 * DELTA, 0.0, 1.0, DELTA), 0.0);
    }

    #[test]
    fn numeric_notch_depth() {
        let p = PulseParams::new(2.5e8, 8e-9).with_alphas(1.0, 1.0, 1.0);
        let env = synthesize(&p, DELTA).unwrap();
        let peak = dtft_real(&env.times, &env.omega_r_squared, 10e-12, 0.0).norm();
        for w in [DELTA, 3.0 * DELTA] {
            let v = dtft_real(&env.times, &env.omega_r_squared, 10e-12, w).norm();
            assert!(v <= 1e-4 * peak, "{v} vs {peak}");
        }
        let single = dtft_complex(&env.times, &env.omega, 10e-12, DELTA).norm();
        let peak1 = dtft_complex(&env.times, &env.omega, 10e-12, 0.0).norm();
        assert!(single <= 1e-4 * peak1);
    }

    #[test]
    fn spectrum_grid_and_parseval() {
        let env = synthesize(&r2d(7e-9), DELTA).unwrap();
        let s = spectrum(&env, 64, 6.0);
        assert!(s.frequencies[0] <= -6.0 * DELTA.abs() * (1.0 - 1e-12));
        assert!(*s.frequencies.last().unwrap() >= 6.0 * DELTA.abs() * (1.0 - 1e-12));
        assert_eq!(s.notches.len(), 5);
        // Parseval on the DTFT: ∫|F|² dω/2π over one period equals Σ|f|² Δt.
        let dt = 10e-12;
        let period = TAU / dt;
        let m = 4 * env.omega.len();
        let mut freq_energy = 0.0;
        for i in 0..m {
            let w = -period / 2.0 + period * i as f64 / m as f64;
            freq_energy += dtft_complex(&env.times, &env.omega, dt, w).norm_sqr();
        }
        freq_energy *= period / m as f64 / TAU;
        let time_energy: f64 = env.omega.iter().map(|o| o.norm_sqr()).sum::<f64>() * dt;
        assert!((freq_energy - time_energy).abs() / time_energy < 1e-6);
    }

    #[test]
    fn csv_export_header() {
        let env = synthesize(&r2d(7e-9), DELTA).unwrap();
        let mut buf = Vec::new();
        env.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("time_s,omega_re,omega_im,omega_r_squared\n"));
        assert_eq!(text.lines().count(), env.times.len() + 1);
    }

    #[test]
    fn rejects_uneven_sampling() {
        let p = PulseParams { sample_period: 3e-12, ..PulseParams::new(1e8, 7e-9) };
        assert!(p.validate().is_err());
        let neg = PulseParams::new(1e8, -7e-9);
        assert!(neg.validate().is_err());
    }
}
