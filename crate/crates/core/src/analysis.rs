//! Error metrics, leakage decomposition, the effective-Hamiltonian
//! diagnostic and the readout assignment model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, ideal_x, ideal_x_half, wrap_angle, CMatrix, C64, I};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Target {
    #[serde(rename = "X")]
    X,
    #[serde(rename = "X/2")]
    XHalf,
}

impl Target {
    /// Ideal 2x2 rotation, `exp(-iθσ_x/2)`.
    pub fn ideal(&self) -> CMatrix {
        match self {
            Target::X => ideal_x(),
            Target::XHalf => ideal_x_half(),
        }
    }

    pub fn angle(&self) -> f64 {
        match self {
            Target::X => std::f64::consts::PI,
            Target::XHalf => std::f64::consts::FRAC_PI_2,
        }
    }

    /// Gate applications that make up one π rotation.
    pub fn per_pi(&self) -> usize {
        match self {
            Target::X => 1,
            Target::XHalf => 2,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Target::X => "X",
            Target::XHalf => "X/2",
        }
    }
}

impl std::str::FromStr for Target {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "X" | "x" => Ok(Target::X),
            "X/2" | "x/2" | "SX" | "sx" => Ok(Target::XHalf),
            _ => Err(Error::invalid(format!("unknown gate target {s:?} (expected X or X/2)"))),
        }
    }
}

fn block(u: &CMatrix) -> CMatrix {
    u.view((0, 0), (2, 2)).into_owned()
}

/// Average gate fidelity on the computational subspace and subspace
/// leakage `1 - ½ Σ_{i,j<2} |U_ij|²`.
pub fn unitary_error_metrics(u: &CMatrix, target: &CMatrix) -> (f64, f64) {
    let m = target.adjoint() * block(u);
    let f = ((m.adjoint() * &m).trace().re + m.trace().norm_sqr()) / 6.0;
    let kept: f64 = block(u).iter().map(|z| z.norm_sqr()).sum();
    (f, 1.0 - 0.5 * kept)
}

/// Leakage parameters of an X-type gate in the canonical form where the
/// computational block is `[[0, 1], [1, 0]]` (X) or the standard √X (X/2)
/// and `<2|U|2> = e^{-2iφ₂}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeakageDecomposition {
    pub a0: f64,
    pub a1: f64,
    pub phi0: f64,
    pub phi1: f64,
    pub phi2: f64,
    pub b0: f64,
    pub b1: f64,
    /// Half the phase acquired in |3>, `<3|U|3> = e^{-2iφ₃}`.
    pub phi3: f64,
    pub eps_leak_2: f64,
    pub eps_leak_3: f64,
}

/// Canonical computational block for the leakage parameterisation.
fn canonical_block(target: Target) -> CMatrix {
    match target {
        Target::X => CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]),
        Target::XHalf => ideal_x_half(),
    }
}

/// Removes the global phase so that the computational block overlaps the
/// canonical block with a real positive trace.
pub fn canonical_phase(u: &CMatrix, target: Target) -> CMatrix {
    let ov = (canonical_block(target).adjoint() * block(u)).trace();
    if ov.norm() == 0.0 {
        return u.clone();
    }
    u * (ov.conj() / ov.norm())
}

pub fn decompose_leakage(u: &CMatrix, target: Target) -> Result<LeakageDecomposition> {
    let d = u.nrows();
    if d < 3 {
        return Err(Error::DimensionMismatch { expected: 3, got: d });
    }
    let (f, _) = unitary_error_metrics(u, &target.ideal());
    if f < 0.9 {
        return Err(Error::TooFarFromTarget(f));
    }
    let v = canonical_phase(u, target);
    let phi2 = wrap_angle(-v[(2, 2)].arg() / 2.0);
    let (a0, a1) = (v[(2, 0)].norm(), v[(2, 1)].norm());
    let phi0 = wrap_angle(v[(2, 0)].arg() + phi2);
    let phi1 = wrap_angle(v[(2, 1)].arg() + phi2);
    let (b0, b1, phi3) = if d > 3 {
        (v[(3, 0)].norm(), v[(3, 1)].norm(), wrap_angle(-v[(3, 3)].arg() / 2.0))
    } else {
        (0.0, 0.0, 0.0)
    };
    Ok(LeakageDecomposition {
        a0,
        a1,
        phi0,
        phi1,
        phi2,
        b0,
        b1,
        phi3,
        eps_leak_2: (a0 * a0 + a1 * a1) / 2.0,
        eps_leak_3: (b0 * b0 + b1 * b1) / 2.0,
    })
}

/// The first-order leakage matrix of an X gate written directly from its
/// parameters (unitary only to first order in the amplitudes):
///
/// ```text
/// [ 0                    1                    -A1 e^{-i(φ1+φ2)} ]
/// [ 1                    0                    -A0 e^{-i(φ0+φ2)} ]
/// [ A0 e^{i(φ0-φ2)}      A1 e^{i(φ1-φ2)}      e^{-2iφ2}         ]
/// ```
pub fn pseudo_x(a0: f64, a1: f64, phi0: f64, phi1: f64, phi2: f64) -> CMatrix {
    let e = |x: f64| C64::from_polar(1.0, x);
    CMatrix::from_row_slice(
        3,
        3,
        &[
            c(0.0, 0.0),
            c(1.0, 0.0),
            -e(-(phi1 + phi2)) * a1,
            c(1.0, 0.0),
            c(0.0, 0.0),
            -e(-(phi0 + phi2)) * a0,
            e(phi0 - phi2) * a0,
            e(phi1 - phi2) * a1,
            e(-2.0 * phi2),
        ],
    )
}

/// Leakage specification for an exactly unitary synthetic X gate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticLeakage {
    pub a0: f64,
    pub a1: f64,
    pub phi0: f64,
    pub phi1: f64,
    pub phi2: f64,
    pub b0: f64,
    pub b1: f64,
    pub psi0: f64,
    pub psi1: f64,
    pub phi3: f64,
}

/// Exactly unitary 4-level X gate `exp(K)·M`, where `M` is the ideal
/// canonical X with phases `e^{-2iφ₂}`, `e^{-2iφ₃}` on |2>, |3> and `K` is
/// the anti-Hermitian generator whose leakage rows are chosen so that the
/// product reproduces the requested leakage elements to first order.
pub fn synthetic_x(s: &SyntheticLeakage) -> CMatrix {
    let e = |x: f64| C64::from_polar(1.0, x);
    let mut m = CMatrix::zeros(4, 4);
    m[(0, 1)] = c(1.0, 0.0);
    m[(1, 0)] = c(1.0, 0.0);
    m[(2, 2)] = e(-2.0 * s.phi2);
    m[(3, 3)] = e(-2.0 * s.phi3);
    // (exp(K) M)_{2,0} = K_{2,1} + ..., since M swaps |0> and |1>.
    let l20 = e(s.phi0 - s.phi2) * s.a0;
    let l21 = e(s.phi1 - s.phi2) * s.a1;
    let l30 = e(s.psi0 - s.phi3) * s.b0;
    let l31 = e(s.psi1 - s.phi3) * s.b1;
    let mut k = CMatrix::zeros(4, 4);
    k[(2, 1)] = l20;
    k[(2, 0)] = l21;
    k[(3, 1)] = l30;
    k[(3, 0)] = l31;
    for (r, col) in [(2, 1), (2, 0), (3, 1), (3, 0)] {
        k[(col, r)] = -k[(r, col)].conj();
    }
    k.exp() * m
}

/// Effective Hamiltonian of the driven four-level system after the
/// Schrieffer-Wolff transformation, keeping the terms relevant to the
/// computational subspace to second order.
pub fn sw_effective_hamiltonian(
    omega_r: f64,
    omega_r_dot: f64,
    omega_i: f64,
    delta1: f64,
    delta: f64,
    lambda2: f64,
    lambda3: f64,
) -> CMatrix {
    if (omega_r / delta).abs() >= 1.0 {
        log::warn!("|Ω_R/Δ| = {} is outside the perturbative regime", (omega_r / delta).abs());
    }
    let mut h = CMatrix::zeros(4, 4);
    let add_x = |h: &mut CMatrix, j: usize, k: usize, coef: f64| {
        h[(j, k)] += c(coef, 0.0);
        h[(k, j)] += c(coef, 0.0);
    };
    add_x(&mut h, 0, 1, omega_r / 2.0);
    add_x(&mut h, 0, 2, lambda2 / (8.0 * delta) * omega_r * omega_r);
    add_x(&mut h, 1, 3, lambda2 * lambda3 / (8.0 * delta) * omega_r * omega_r);
    // σʸ_jk = -i|j><k| + i|k><j|
    let y = (omega_i + omega_r_dot / delta) / 2.0;
    for (j, k, w) in [(0, 1, 1.0), (1, 2, lambda2)] {
        h[(j, k)] += -I * (y * w);
        h[(k, j)] += I * (y * w);
    }
    h[(1, 1)] += c(delta1 + (4.0 - lambda2 * lambda2) / (4.0 * delta) * omega_r * omega_r, 0.0);
    h
}

/// Row-stochastic readout assignment matrix, `Λ_ij = P(measure j | prepared i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentMatrix {
    pub rows: Vec<Vec<f64>>,
}

impl AssignmentMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let mut problems = Vec::new();
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n {
                problems.push(format!("row {i} has {} entries, expected {n}", r.len()));
            }
            if r.iter().any(|x| !(0.0..=1.0).contains(x)) {
                problems.push(format!("row {i} has entries outside [0, 1]"));
            }
            let s: f64 = r.iter().sum();
            if (s - 1.0).abs() > 1e-3 {
                problems.push(format!("row {i} sums to {s}"));
            }
        }
        if problems.is_empty() {
            Ok(Self { rows })
        } else {
            Err(Error::invalid(problems.join("; ")))
        }
    }

    pub fn identity(n: usize) -> Self {
        Self { rows: (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect() }
    }

    fn from_percent(p: [[f64; 4]; 4]) -> Self {
        Self { rows: p.iter().map(|r| r.iter().map(|x| x * 1e-2).collect()).collect() }
    }

    /// Four-state assignment measured with thermal initialisation.
    pub fn measured() -> Self {
        Self::from_percent([
            [89.64, 9.49, 0.75, 0.12],
            [13.10, 86.03, 0.80, 0.07],
            [13.67, 11.43, 69.93, 4.97],
            [10.46, 2.76, 15.78, 71.00],
        ])
    }

    /// Assignment after heralded (post-selected) initialisation.
    pub fn postselected() -> Self {
        Self::from_percent([
            [97.793, 2.129, 0.073, 0.007],
            [7.873, 91.604, 0.519, 0.004],
            [6.726, 11.173, 77.602, 4.499],
            [3.116, 2.082, 15.958, 78.843],
        ])
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i][j]
    }
}

/// `measured = populationsᵀ · Λ`. Populations beyond the matrix size are
/// rejected; shorter vectors are not padded.
pub fn apply_assignment(populations: &[f64], lambda: &AssignmentMatrix) -> Result<Vec<f64>> {
    let n = lambda.dim();
    if populations.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: populations.len() });
    }
    Ok((0..n).map(|j| (0..n).map(|i| populations[i] * lambda.rows[i][j]).sum()).collect())
}

/// Error budget; `control = total - decoherence - leakage` is left
/// unclamped and flagged when negative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBudget {
    pub total: f64,
    pub total_err: f64,
    pub decoherence: f64,
    pub decoherence_err: f64,
    pub leakage: f64,
    pub leakage_err: f64,
    pub control: f64,
    pub control_err: f64,
    pub control_negative: bool,
}

impl ErrorBudget {
    pub fn new(total: (f64, f64), decoherence: (f64, f64), leakage: (f64, f64)) -> Self {
        let control = total.0 - decoherence.0 - leakage.0;
        let control_err = (total.1.powi(2) + decoherence.1.powi(2) + leakage.1.powi(2)).sqrt();
        Self {
            total: total.0,
            total_err: total.1,
            decoherence: decoherence.0,
            decoherence_err: decoherence.1,
            leakage: leakage.0,
            leakage_err: leakage.1,
            control,
            control_err,
            control_negative: control < 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{embed_qubit, max_abs, rotation, unitarity_defect};
    use std::f64::consts::{PI, SQRT_2, TAU};

    #[test]
    fn ideal_gates_have_no_leakage() {
        let u = embed_qubit(&ideal_x(), 4);
        let l = decompose_leakage(&u, Target::X).unwrap();
        assert_eq!((l.a0, l.a1, l.b0, l.b1), (0.0, 0.0, 0.0, 0.0));
        let (f, leak) = unitary_error_metrics(&u, &ideal_x());
        assert!((f - 1.0).abs() < 1e-15 && leak.abs() < 1e-15);
        let uh = embed_qubit(&ideal_x_half(), 4);
        assert!(decompose_leakage(&uh, Target::XHalf).unwrap().eps_leak_2 == 0.0);
    }

    #[test]
    fn metrics_ignore_global_phase() {
        let u = synthetic_x(&SyntheticLeakage {
            a0: 0.01, a1: 0.02, phi0: 0.3, phi1: -0.7, phi2: 1.1, b0: 0.003, b1: 0.001, psi0: 0.2, psi1: 2.0, phi3: 0.4,
        });
        let v = &u * C64::from_polar(1.0, 0.77);
        let (f1, l1) = unitary_error_metrics(&u, &ideal_x());
        let (f2, l2) = unitary_error_metrics(&v, &ideal_x());
        assert!((f1 - f2).abs() < 1e-14 && (l1 - l2).abs() < 1e-14);
        let d1 = decompose_leakage(&u, Target::X).unwrap();
        let d2 = decompose_leakage(&v, Target::X).unwrap();
        assert!((d1.phi2 - d2.phi2).abs() < 1e-12);
    }

    #[test]
    fn pseudo_x_roundtrip() {
        let m = pseudo_x(1e-2, 2e-2, 0.3, -0.7, 1.1);
        let mut u = CMatrix::identity(4, 4);
        u.view_mut((0, 0), (3, 3)).copy_from(&m);
        let l = decompose_leakage(&u, Target::X).unwrap();
        for (got, want) in [(l.a0, 1e-2), (l.a1, 2e-2), (l.phi0, 0.3), (l.phi1, -0.7), (l.phi2, 1.1)] {
            assert!((got - want).abs() < 1e-6, "{got} vs {want}");
        }
    }

    #[test]
    fn synthetic_gate_is_unitary_with_requested_leakage() {
        let s = SyntheticLeakage {
            a0: 0.01, a1: 0.02, phi0: 0.3, phi1: -0.7, phi2: 1.1, b0: 0.004, b1: 0.002, psi0: 0.2, psi1: 2.0, phi3: -0.4,
        };
        let u = synthetic_x(&s);
        assert!(unitarity_defect(&u) < 1e-14);
        let l = decompose_leakage(&u, Target::X).unwrap();
        assert!((l.a0 - 0.01).abs() < 1e-5 && (l.a1 - 0.02).abs() < 1e-5);
        assert!((l.phi2 - 1.1).abs() < 1e-3 && (l.phi0 - 0.3).abs() < 1e-3);
        assert!((l.phi3 + 0.4).abs() < 1e-3 && (l.b0 - 0.004).abs() < 1e-5);
        // Subspace leakage equals the sum of both channels for d = 4.
        let (_, leak) = unitary_error_metrics(&u, &ideal_x());
        assert!((leak - l.eps_leak_2 - l.eps_leak_3).abs() < 1e-10);
    }

    #[test]
    fn rejects_gates_far_from_target() {
        let u = embed_qubit(&rotation(0.3, 0.0), 4);
        assert!(matches!(decompose_leakage(&u, Target::X), Err(Error::TooFarFromTarget(_))));
    }

    #[test]
    fn effective_hamiltonian_terms() {
        let delta = -TAU * 225e6;
        let h0 = sw_effective_hamiltonian(0.0, 0.0, 0.0, 1e7, delta, SQRT_2, 1.7);
        let mut only = CMatrix::zeros(4, 4);
        only[(1, 1)] = c(1e7, 0.0);
        assert!(max_abs(&(h0 - only)) == 0.0);

        let w = TAU * 50e6;
        let h = sw_effective_hamiltonian(w, 0.0, 0.0, 0.0, delta, SQRT_2, 1.7);
        let expected = SQRT_2 * w * w / (8.0 * delta);
        assert!((h[(0, 2)].re - expected).abs() < 1e-9 * expected.abs());
        assert!((expected + 1.23413e7).abs() < 1e3, "{expected}");
        let h2 = sw_effective_hamiltonian(2.0 * w, 0.0, 0.0, 0.0, delta, SQRT_2, 1.7);
        assert_eq!(h2[(0, 2)].re, 4.0 * h[(0, 2)].re);
        assert_eq!(h2[(1, 3)].re, 4.0 * h[(1, 3)].re);

        // DRAG condition removes every σʸ term.
        let rdot = 3e16;
        let hd = sw_effective_hamiltonian(w, rdot, -rdot / delta, 0.0, delta, SQRT_2, 1.7);
        assert!(hd[(0, 1)].im.abs() < 1e-6 && hd[(1, 2)].im.abs() < 1e-6);
        assert!(hd[(1, 2)].norm() < 1e-6);
    }

    #[test]
    fn assignment_model() {
        let id = AssignmentMatrix::identity(4);
        let p = [0.1, 0.2, 0.3, 0.4];
        assert_eq!(apply_assignment(&p, &id).unwrap(), p.to_vec());
        let ps = AssignmentMatrix::postselected();
        let m = apply_assignment(&[1.0, 0.0, 0.0, 0.0], &ps).unwrap();
        assert!((m[1] - 0.02129).abs() < 1e-12);
        for lam in [AssignmentMatrix::measured(), ps] {
            AssignmentMatrix::new(lam.rows.clone()).unwrap();
            let out = apply_assignment(&[0.25; 4], &lam).unwrap();
            assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-3);
        }
        let uniform = AssignmentMatrix::new(vec![vec![0.5, 0.5], vec![0.25, 0.75]]).unwrap();
        let out = apply_assignment(&[0.5, 0.5], &uniform).unwrap();
        assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(apply_assignment(&[1.0, 0.0], &AssignmentMatrix::identity(4)).is_err());
        assert!(AssignmentMatrix::new(vec![vec![0.9, 0.2], vec![0.0, 1.0]]).is_err());
    }

    #[test]
    fn budget_flags_negative_control() {
        let b = ErrorBudget::new((1e-4, 1e-5), (0.8e-4, 1e-5), (0.3e-4, 1e-6));
        assert!(b.control_negative);
        assert!((b.control + 0.1e-4).abs() < 1e-18);
    }

    #[test]
    fn target_parsing() {
        assert_eq!("X".parse::<Target>().unwrap(), Target::X);
        assert_eq!("X/2".parse::<Target>().unwrap(), Target::XHalf);
        assert!("Y".parse::<Target>().is_err());
        assert!((Target::XHalf.angle() - PI / 2.0).abs() < 1e-15);
    }
}
