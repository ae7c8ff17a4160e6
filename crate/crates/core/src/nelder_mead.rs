//! Derivative-free simplex minimisation.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NelderMeadOptions {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    /// Stop when the largest vertex distance from the best vertex drops
    /// below this.
    pub x_tol: f64,
    /// Stop when the spread of simplex values drops below this.
    pub f_tol: f64,
    pub max_evaluations: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self { reflection: 1.0, expansion: 2.0, contraction: 0.5, shrink: 0.5, x_tol: 0.01, f_tol: 1e-6, max_evaluations: 100 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    SimplexSize,
    ValueSpread,
    Budget,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Evaluation {
    pub x: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub reason: StopReason,
    pub history: Vec<Evaluation>,
}

/// Initial simplex: `x0` plus one vertex per coordinate displaced by `step`.
pub fn axis_simplex(x0: &[f64], step: f64) -> Vec<Vec<f64>> {
    let mut s = vec![x0.to_vec()];
    for i in 0..x0.len() {
        let mut v = x0.to_vec();
        v[i] += step;
        s.push(v);
    }
    s
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn lerp(c: &[f64], w: &[f64], t: f64) -> Vec<f64> {
    c.iter().zip(w).map(|(c, w)| c + t * (c - w)).collect()
}

/// Minimises `f` from the given simplex (`n + 1` vertices in `n`
/// dimensions). Non-finite values are treated as `+∞`.
pub fn minimize<F: FnMut(&[f64]) -> f64>(mut f: F, simplex: Vec<Vec<f64>>, opts: &NelderMeadOptions) -> NelderMeadResult {
    let n = simplex.len() - 1;
    assert!(n >= 1 && simplex.iter().all(|v| v.len() == n), "simplex needs n+1 vertices of length n");
    let mut history = Vec::new();
    let mut eval = |x: &[f64], history: &mut Vec<Evaluation>| {
        let v = f(x);
        let v = if v.is_finite() { v } else { f64::INFINITY };
        history.push(Evaluation { x: x.to_vec(), value: v });
        v
    };
    let mut pts: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    for v in simplex {
        let y = eval(&v, &mut history);
        pts.push((v, y));
    }
    let reason = loop {
        pts.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = &pts[0];
        let diameter = pts.iter().map(|p| dist(&p.0, &best.0)).fold(0.0, f64::max);
        if diameter < opts.x_tol {
            break StopReason::SimplexSize;
        }
        if (pts[n].1 - pts[0].1).abs() < opts.f_tol {
            break StopReason::ValueSpread;
        }
        if history.len() >= opts.max_evaluations {
            break StopReason::Budget;
        }
        let mut centroid = vec![0.0; n];
        for p in &pts[..n] {
            for (c, x) in centroid.iter_mut().zip(&p.0) {
                *c += x / n as f64;
            }
        }
        let worst = pts[n].0.clone();
        let xr = lerp(&centroid, &worst, opts.reflection);
        let yr = eval(&xr, &mut history);
        if yr < pts[0].1 {
            let xe = lerp(&centroid, &worst, opts.reflection * opts.expansion);
            let ye = eval(&xe, &mut history);
            pts[n] = if ye < yr { (xe, ye) } else { (xr, yr) };
            continue;
        }
        if yr < pts[n - 1].1 {
            pts[n] = (xr, yr);
            continue;
        }
        // contraction: outside if the reflection improved on the worst
        let (xc, yc) = if yr < pts[n].1 {
            let xc = lerp(&centroid, &worst, opts.reflection * opts.contraction);
            let yc = eval(&xc, &mut history);
            (xc, yc)
        } else {
            let xc = lerp(&centroid, &worst, -opts.contraction);
            let yc = eval(&xc, &mut history);
            (xc, yc)
        };
        if yc < pts[n].1.min(yr) {
            pts[n] = (xc, yc);
            continue;
        }
        let x0 = pts[0].0.clone();
        for p in pts.iter_mut().skip(1) {
            let x: Vec<f64> = x0.iter().zip(&p.0).map(|(b, v)| b + opts.shrink * (v - b)).collect();
            let y = eval(&x, &mut history);
            *p = (x, y);
        }
    };
    pts.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = pts.swap_remove(0);
    NelderMeadResult { x, value, evaluations: history.len(), reason, history }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_quadratic_minimum() {
        let opts = NelderMeadOptions { x_tol: 1e-8, f_tol: 1e-16, max_evaluations: 2000, ..Default::default() };
        let r = minimize(|x| (x[0] - 1.0).powi(2) + 3.0 * (x[1] + 2.0).powi(2) + 0.5, axis_simplex(&[0.0, 0.0], 0.5), &opts);
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] + 2.0).abs() < 1e-6, "{:?}", r.x);
        assert!((r.value - 0.5).abs() < 1e-12);
        assert_eq!(r.reason, StopReason::SimplexSize);
    }

    #[test]
    fn rosenbrock_converges() {
        let opts = NelderMeadOptions { x_tol: 1e-9, f_tol: 0.0, max_evaluations: 5000, ..Default::default() };
        let r = minimize(|x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2), axis_simplex(&[-1.2, 1.0], 0.1), &opts);
        assert!((r.x[0] - 1.0).abs() < 1e-5 && (r.x[1] - 1.0).abs() < 1e-5, "{:?}", r.x);
    }

    #[test]
    fn respects_budget_and_handles_nan() {
        let opts = NelderMeadOptions { x_tol: 0.0, f_tol: 0.0, max_evaluations: 30, ..Default::default() };
        let r = minimize(|x| if x[0] < 0.0 { f64::NAN } else { (x[0] - 0.3).powi(2) + x[1].powi(2) + x[2].powi(2) }, axis_simplex(&[0.5, 0.5, 0.5], 0.2), &opts);
        assert_eq!(r.reason, StopReason::Budget);
        assert!(r.evaluations >= 30 && r.evaluations < 30 + 4);
        assert!(r.value.is_finite());
        assert!(r.history.iter().all(|e| !e.value.is_nan()));
    }
}
