//! Continuous-time drive built from sampled envelopes.

use crate::linalg::C64;
use crate::pulse::EnvelopeSamples;

/// Natural cubic spline through uniformly spaced complex samples.
#[derive(Debug, Clone)]
pub struct UniformSpline {
    t0: f64,
    dt: f64,
    values: Vec<C64>,
    /// Second derivatives at the knots.
    curvature: Vec<C64>,
}

impl UniformSpline {
    pub fn new(t0: f64, dt: f64, values: Vec<C64>) -> Self {
        let n = values.len();
        let zero = C64::new(0.0, 0.0);
        let mut m = vec![zero; n];
        if n >= 3 {
            // Tridiagonal system (1, 4, 1) m = 6 Δ²y / dt² with m_0 = m_{n-1} = 0.
            let inner = n - 2;
            let mut diag = vec![4.0; inner];
            let mut rhs: Vec<C64> = (1..n - 1)
                .map(|i| (values[i - 1] - values[i] * 2.0 + values[i + 1]) * (6.0 / (dt * dt)))
                .collect();
            for i in 1..inner {
                let w = 1.0 / diag[i - 1];
                diag[i] -= w;
                let prev = rhs[i - 1];
                rhs[i] -= prev * w;
            }
            let mut sol = vec![zero; inner];
            sol[inner - 1] = rhs[inner - 1] / diag[inner - 1];
            for i in (0..inner - 1).rev() {
                sol[i] = (rhs[i] - sol[i + 1]) / diag[i];
            }
            m[1..n - 1].copy_from_slice(&sol);
        }
        Self { t0, dt, values, curvature: m }
    }

    pub fn end(&self) -> f64 {
        self.t0 + self.dt * (self.values.len().saturating_sub(1)) as f64
    }

    /// Spline value; zero outside the sampled window.
    #[inline]
    pub fn eval(&self, t: f64) -> C64 {
        let n = self.values.len();
        if n < 2 {
            return C64::new(0.0, 0.0);
        }
        let x = (t - self.t0) / self.dt;
        if !(0.0..=(n - 1) as f64).contains(&x) {
            return C64::new(0.0, 0.0);
        }
        let i = (x.floor() as usize).min(n - 2);
        let u = x - i as f64;
        let v = 1.0 - u;
        let h2 = self.dt * self.dt / 6.0;
        self.values[i] * v
            + self.values[i + 1] * u
            + (self.curvature[i] * (v * v * v - v) + self.curvature[i + 1] * (u * u * u - u)) * h2
    }
}

/// Real drive field `2 Re[Ω(t) e^{-iω_d t}]` described by its carrier and
/// complex envelope.
#[derive(Debug, Clone)]
pub struct DriveWaveform {
    pub carrier: f64,
    pub envelope: UniformSpline,
    pub duration: f64,
}

impl DriveWaveform {
    pub fn new(env: &EnvelopeSamples, carrier: f64) -> Self {
        let t0 = env.times.first().copied().unwrap_or(0.0);
        Self {
            carrier,
            envelope: UniformSpline::new(t0, env.sample_period(), env.omega.clone()),
            duration: env.duration(),
        }
    }

    #[inline]
    pub fn envelope_at(&self, t: f64) -> C64 {
        self.envelope.eval(t)
    }

    /// Lab-frame field; a resonant amplitude Ω drives Rabi oscillations at
    /// rate |Ω| on the qubit transition of the normalised drive operator.
    pub fn field(&self, t: f64) -> f64 {
        2.0 * (self.envelope_at(t) * C64::from_polar(1.0, -self.carrier * t)).re
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spline_reproduces_cubic_interior_and_knots() {
        let f = |t: f64| C64::new((3.0 * t).sin(), t * t);
        let dt = 0.01;
        let vals: Vec<C64> = (0..=300).map(|i| f(i as f64 * dt)).collect();
        let s = UniformSpline::new(0.0, dt, vals.clone());
        for (i, v) in vals.iter().enumerate() {
            assert!((s.eval(i as f64 * dt) - v).norm() < 1e-14);
        }
        for &t in &[0.5, 1.234, 2.0005] {
            assert!((s.eval(t) - f(t)).norm() < 1e-8);
        }
        assert_eq!(s.eval(-0.1), C64::new(0.0, 0.0));
        assert_eq!(s.eval(3.5), C64::new(0.0, 0.0));
    }
}
