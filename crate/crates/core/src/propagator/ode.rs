//! Adaptive Dormand-Prince 5(4) integrator on flat complex state vectors.

use crate::error::{Error, Result};
use crate::linalg::C64;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub initial_step: f64,
    pub max_step: f64,
    pub min_step: f64,
    pub max_steps: usize,
}

impl OdeOptions {
    pub fn with_tolerance(tol: f64) -> Self {
        Self { rtol: tol, atol: tol, ..Self::default() }
    }
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-10,
            initial_step: 1e-12,
            max_step: f64::INFINITY,
            min_step: 1e-22,
            max_steps: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// Integrates `y' = f(t, y)` from `t0` to `t1` in place.
///
/// `f` writes the derivative into its last argument. Returns the step
/// statistics; `last_step` carries the step size between calls so that
/// piecewise integrations do not restart from the initial guess.
pub fn integrate<F>(
    mut f: F,
    t0: f64,
    t1: f64,
    y: &mut [C64],
    opts: &OdeOptions,
    last_step: &mut Option<f64>,
) -> Result<OdeStats>
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    let n = y.len();
    let mut stats = OdeStats::default();
    if t1 <= t0 {
        return Ok(stats);
    }
    let zero = C64::new(0.0, 0.0);
    let mut k1 = vec![zero; n];
    let mut k2 = vec![zero; n];
    let mut k3 = vec![zero; n];
    let mut k4 = vec![zero; n];
    let mut k5 = vec![zero; n];
    let mut k6 = vec![zero; n];
    let mut k7 = vec![zero; n];
    let mut tmp = vec![zero; n];
    let mut ynew = vec![zero; n];

    let mut t = t0;
    let mut h = last_step.unwrap_or(opts.initial_step).min(t1 - t0).min(opts.max_step);
    f(t, y, &mut k1);
    stats.evaluations += 1;

    while t < t1 {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::StepUnderflow { t, h });
        }
        let last = t + h >= t1;
        if last {
            h = t1 - t;
        }
        for i in 0..n {
            tmp[i] = y[i] + k1[i] * (h * A21);
        }
        f(t + C2 * h, &tmp, &mut k2);
        for i in 0..n {
            tmp[i] = y[i] + (k1[i] * A31 + k2[i] * A32) * h;
        }
        f(t + C3 * h, &tmp, &mut k3);
        for i in 0..n {
            tmp[i] = y[i] + (k1[i] * A41 + k2[i] * A42 + k3[i] * A43) * h;
        }
        f(t + C4 * h, &tmp, &mut k4);
        for i in 0..n {
            tmp[i] = y[i] + (k1[i] * A51 + k2[i] * A52 + k3[i] * A53 + k4[i] * A54) * h;
        }
        f(t + C5 * h, &tmp, &mut k5);
        for i in 0..n {
            tmp[i] = y[i] + (k1[i] * A61 + k2[i] * A62 + k3[i] * A63 + k4[i] * A64 + k5[i] * A65) * h;
        }
        f(t + h, &tmp, &mut k6);
        for i in 0..n {
            ynew[i] = y[i] + (k1[i] * A71 + k3[i] * A73 + k4[i] * A74 + k5[i] * A75 + k6[i] * A76) * h;
        }
        f(t + h, &ynew, &mut k7);
        stats.evaluations += 6;

        let mut err = 0.0;
        for i in 0..n {
            let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
            let sc = opts.atol + opts.rtol * y[i].norm().max(ynew[i].norm());
            let r = e.norm() / sc;
            err += r * r;
        }
        err = (err / n as f64).sqrt();

        if err <= 1.0 {
            t = if last { t1 } else { t + h };
            y.copy_from_slice(&ynew);
            std::mem::swap(&mut k1, &mut k7);
            stats.accepted += 1;
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if !last {
                h = (h * fac).min(opts.max_step);
            }
            *last_step = Some(if last { (h * fac).min(opts.max_step) } else { h });
        } else {
            stats.rejected += 1;
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
            if h < opts.min_step {
                return Err(Error::StepUnderflow { t, h });
            }
        }
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_phase() {
        // y' = i ω y  ->  y(t) = exp(iωt)
        let w = 3.0;
        let mut y = vec![C64::new(1.0, 0.0)];
        let mut h = None;
        integrate(
            |_, y, dy| dy[0] = C64::new(0.0, w) * y[0],
            0.0,
            10.0,
            &mut y,
            &OdeOptions::with_tolerance(1e-12),
            &mut h,
        )
        .unwrap();
        let exact = C64::from_polar(1.0, w * 10.0);
        assert!((y[0] - exact).norm() < 1e-9);
    }

    #[test]
    fn time_dependent_decay() {
        // y' = -2t y  ->  exp(-t²)
        let mut y = vec![C64::new(1.0, 0.0)];
        let mut h = None;
        let stats = integrate(
            |t, y, dy| dy[0] = y[0] * (-2.0 * t),
            0.0,
            2.0,
            &mut y,
            &OdeOptions::with_tolerance(1e-11),
            &mut h,
        )
        .unwrap();
        assert!((y[0].re - (-4.0f64).exp()).abs() < 1e-10);
        assert!(stats.accepted > 5);
    }

    #[test]
    fn fifth_order_convergence() {
        // Fixed steps (huge tolerance) must show the 5th-order error ratio.
        let run = |steps: usize| {
            let mut y = vec![C64::new(1.0, 0.0)];
            let opts = OdeOptions {
                rtol: 1e6,
                atol: 1e6,
                initial_step: 1.0 / steps as f64,
                max_step: 1.0 / steps as f64,
                ..OdeOptions::default()
            };
            integrate(|_, y, dy| dy[0] = y[0] * C64::new(0.0, 4.0), 0.0, 1.0, &mut y, &opts, &mut None).unwrap();
            (y[0] - C64::from_polar(1.0, 4.0)).norm()
        };
        let ratio = run(20) / run(40);
        assert!(ratio > 25.0 && ratio < 45.0, "ratio {ratio}");
    }
}
