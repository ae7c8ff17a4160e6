//! Nonlinear least squares with covariance-based parameter uncertainties.

use levenberg_marquardt::{LeastSquaresProblem, LevenbergMarquardt};
use nalgebra::{DMatrix, DVector, Dyn, Owned};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub model: String,
    pub names: Vec<String>,
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
    pub residual_norm: f64,
    pub points: usize,
}

impl FitReport {
    fn index(&self, name: &str) -> usize {
        self.names
            .iter()
            .position(|n| n == name)
            .unwrap_or_else(|| panic!("fit model {} has no parameter {name}", self.model))
    }

    pub fn value(&self, name: &str) -> f64 {
        self.values[self.index(name)]
    }

    pub fn error(&self, name: &str) -> f64 {
        self.errors[self.index(name)]
    }
}

type Residuals<'a> = dyn Fn(&[f64]) -> Vec<f64> + Sync + 'a;

struct Problem<'a> {
    p: DVector<f64>,
    m: usize,
    residuals: &'a Residuals<'a>,
}

impl Problem<'_> {
    fn eval(&self, p: &[f64]) -> Option<DVector<f64>> {
        let r = (self.residuals)(p);
        if r.len() != self.m || r.iter().any(|x| !x.is_finite()) {
            return None;
        }
        Some(DVector::from_vec(r))
    }

    fn jacobian_at(&self, p: &DVector<f64>) -> Option<DMatrix<f64>> {
        let n = p.len();
        let mut j = DMatrix::zeros(self.m, n);
        for k in 0..n {
            let h = 1e-7 * p[k].abs().max(1e-8);
            let mut hi = p.clone();
            let mut lo = p.clone();
            hi[k] += h;
            lo[k] -= h;
            let col = (self.eval(hi.as_slice())? - self.eval(lo.as_slice())?) / (2.0 * h);
            j.set_column(k, &col);
        }
        Some(j)
    }
}

impl LeastSquaresProblem<f64, Dyn, Dyn> for Problem<'_> {
    type ResidualStorage = Owned<f64, Dyn>;
    type JacobianStorage = Owned<f64, Dyn, Dyn>;
    type ParameterStorage = Owned<f64, Dyn>;

    fn set_params(&mut self, x: &DVector<f64>) {
        self.p.copy_from(x);
    }

    fn params(&self) -> DVector<f64> {
        self.p.clone()
    }

    fn residuals(&self) -> Option<DVector<f64>> {
        self.eval(self.p.as_slice())
    }

    fn jacobian(&self) -> Option<DMatrix<f64>> {
        self.jacobian_at(&self.p)
    }
}

/// Minimises `Σ r_i(p)²` starting from `p0`. Uncertainties are the square
/// roots of the diagonal of `s²(JᵀJ)⁻¹` with `s² = RSS/(m − n)`.
pub fn fit_residuals(
    model: &str,
    names: &[&str],
    p0: &[f64],
    points: usize,
    residuals: &Residuals<'_>,
) -> Result<FitReport> {
    let n = p0.len();
    assert_eq!(names.len(), n, "one name per parameter");
    if points < n {
        return Err(Error::FitFailed(format!("{model}: {points} points for {n} parameters")));
    }
    let problem = Problem { p: DVector::from_column_slice(p0), m: points, residuals };
    let (problem, report) = LevenbergMarquardt::new().with_patience(400).minimize(problem);
    if !report.termination.was_successful() {
        return Err(Error::FitFailed(format!("{model}: {:?}", report.termination)));
    }
    let r = problem
        .residuals()
        .ok_or_else(|| Error::FitFailed(format!("{model}: non-finite residuals at optimum")))?;
    let rss = r.norm_squared();
    let errors = problem
        .jacobian_at(&problem.p)
        .and_then(|j| (j.transpose() * &j).try_inverse())
        .map(|inv| {
            let s2 = if points > n { rss / (points - n) as f64 } else { 0.0 };
            (0..n).map(|k| (s2 * inv[(k, k)]).max(0.0).sqrt()).collect::<Vec<_>>()
        })
        .unwrap_or_else(|| vec![f64::INFINITY; n]);
    Ok(FitReport {
        model: model.to_string(),
        names: names.iter().map(|s| s.to_string()).collect(),
        values: problem.p.iter().copied().collect(),
        errors,
        residual_norm: rss.sqrt(),
        points,
    })
}

/// Fits `y ≈ f(p, x)`.
pub fn fit_curve<F>(model: &str, names: &[&str], p0: &[f64], xs: &[f64], ys: &[f64], f: F) -> Result<FitReport>
where
    F: Fn(&[f64], f64) -> f64 + Sync,
{
    assert_eq!(xs.len(), ys.len());
    let res = |p: &[f64]| xs.iter().zip(ys).map(|(&x, &y)| f(p, x) - y).collect();
    fit_residuals(model, names, p0, xs.len(), &res)
}

/// Ordinary linear least squares for `y ≈ Σ p_k g_k(x)`.
pub fn linear_fit(columns: &[Vec<f64>], ys: &[f64]) -> Option<Vec<f64>> {
    let m = ys.len();
    let a = DMatrix::from_fn(m, columns.len(), |i, k| columns[k][i]);
    let b = DVector::from_column_slice(ys);
    let sol = (a.transpose() * &a).try_inverse()? * a.transpose() * b;
    Some(sol.iter().copied().collect())
}
