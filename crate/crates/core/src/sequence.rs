//! Precompiled gate sequences acting on kets or vectorised density matrices.

use crate::error::{Error, Result};
use crate::linalg::{vz, CMatrix, CVector, C64};
use crate::propagator::{GateProcess, QState, SeqOp};

/// A fixed block of operations reduced to one matrix: a unitary when every
/// gate in it is unitary, otherwise a row-major superoperator.
#[derive(Debug, Clone)]
pub enum Compiled {
    Unitary(CMatrix),
    Super { d: usize, s: CMatrix },
}

fn vz_super(theta: f64, d: usize) -> CMatrix {
    let z = vz(theta, d);
    z.kronecker(&z.map(|x| x.conj()))
}

impl Compiled {
    pub fn identity(d: usize) -> Self {
        Compiled::Unitary(CMatrix::identity(d, d))
    }

    pub fn dim(&self) -> usize {
        match self {
            Compiled::Unitary(u) => u.nrows(),
            Compiled::Super { d, .. } => *d,
        }
    }

    pub fn from_gate(g: &GateProcess) -> Self {
        match g {
            GateProcess::Unitary(u) => Compiled::Unitary(u.clone()),
            GateProcess::DensityMap(m) => Compiled::Super { d: m.d, s: m.superoperator() },
        }
    }

    pub fn vz(theta: f64, d: usize) -> Self {
        Compiled::Unitary(vz(theta, d))
    }

    pub(crate) fn superop(&self) -> CMatrix {
        match self {
            Compiled::Unitary(u) => u.kronecker(&u.map(|x| x.conj())),
            Compiled::Super { s, .. } => s.clone(),
        }
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &Compiled) -> Result<Compiled> {
        if self.dim() != next.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: next.dim() });
        }
        Ok(match (self, next) {
            (Compiled::Unitary(a), Compiled::Unitary(b)) => Compiled::Unitary(b * a),
            _ => Compiled::Super { d: self.dim(), s: next.superop() * self.superop() },
        })
    }

    pub fn from_ops(ops: &[SeqOp<'_>], d: usize) -> Result<Compiled> {
        let mut acc = Compiled::identity(d);
        for op in ops {
            let next = match op {
                SeqOp::Gate(g) => Compiled::from_gate(g),
                SeqOp::Vz(theta) => match &acc {
                    // Keep superoperator blocks cheap to extend.
                    Compiled::Super { d, .. } => Compiled::Super { d: *d, s: vz_super(*theta, *d) },
                    Compiled::Unitary(_) => Compiled::vz(*theta, d),
                },
            };
            acc = acc.then(&next)?;
        }
        Ok(acc)
    }

    /// Physical rotation with drive phase `phi`: `VZ(-φ)·G·VZ(φ)`.
    pub fn phased(g: &GateProcess, phi: f64) -> Result<Compiled> {
        Compiled::from_ops(&[SeqOp::Vz(phi), SeqOp::Gate(g), SeqOp::Vz(-phi)], g.dim())
    }

    pub fn apply(&self, state: &QState) -> Result<QState> {
        if state.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: state.dim() });
        }
        Ok(match (self, state) {
            (Compiled::Unitary(u), QState::Ket(k)) => QState::Ket(u * k),
            (Compiled::Unitary(u), QState::Density(r)) => QState::Density(u * r * u.adjoint()),
            (Compiled::Super { d, s }, st) => {
                let v = s * vectorize(&st.density());
                QState::Density(unvectorize(&v, *d))
            }
        })
    }

    /// `self` applied `n` times, by repeated squaring.
    pub fn power(&self, mut n: usize) -> Compiled {
        let mut result = Compiled::identity(self.dim());
        let mut base = self.clone();
        while n > 0 {
            if n & 1 == 1 {
                result = result.then(&base).expect("same dimension");
            }
            n >>= 1;
            if n > 0 {
                base = base.then(&base).expect("same dimension");
            }
        }
        result
    }
}

pub fn vectorize(rho: &CMatrix) -> CVector {
    let d = rho.nrows();
    CVector::from_fn(d * d, |k, _| rho[(k / d, k % d)])
}

pub fn unvectorize(v: &CVector, d: usize) -> CMatrix {
    CMatrix::from_fn(d, d, |i, j| v[i * d + j])
}

/// Qubit-subspace Pauli expectation values `(⟨X⟩, ⟨Y⟩, ⟨Z⟩)` without
/// renormalising by the computational population.
pub fn pauli_expectations(state: &QState) -> [f64; 3] {
    let rho = state.density();
    let r01: C64 = rho[(0, 1)];
    [2.0 * r01.re, -2.0 * r01.im, rho[(0, 0)].re - rho[(1, 1)].re]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{embed_qubit, ideal_x, ket, max_abs, rotation};
    use crate::propagator::{sequence_propagate, DensityMap};

    #[test]
    fn compiled_matches_sequence_propagate() {
        let u = GateProcess::Unitary(embed_qubit(&rotation(1.1, 0.3), 3));
        let m = GateProcess::DensityMap(DensityMap::from_unitary(&embed_qubit(&rotation(0.4, -0.2), 3)));
        let ops = [SeqOp::Gate(&u), SeqOp::Vz(0.7), SeqOp::Gate(&m), SeqOp::Vz(-0.2), SeqOp::Gate(&u)];
        let psi = QState::Ket(ket(0, 3));
        let direct = sequence_propagate(&ops, psi.clone()).unwrap().density();
        let compiled = Compiled::from_ops(&ops, 3).unwrap();
        assert!(matches!(compiled, Compiled::Super { .. }));
        let via = compiled.apply(&psi).unwrap().density();
        assert!(max_abs(&(direct - via)) < 1e-14);
    }

    #[test]
    fn power_matches_repeated_application() {
        let u = GateProcess::Unitary(embed_qubit(&rotation(0.3, 0.1), 3));
        let c = Compiled::from_ops(&[SeqOp::Gate(&u), SeqOp::Vz(0.2)], 3).unwrap();
        let mut s = QState::Ket(ket(0, 3));
        for _ in 0..13 {
            s = c.apply(&s).unwrap();
        }
        let p = c.power(13).apply(&QState::Ket(ket(0, 3))).unwrap();
        assert!(max_abs(&(s.density() - p.density())) < 1e-13);
    }

    #[test]
    fn phased_pi_gate_is_rotation_about_rotated_axis() {
        let x = GateProcess::Unitary(embed_qubit(&ideal_x(), 2));
        let Compiled::Unitary(y) = Compiled::phased(&x, std::f64::consts::FRAC_PI_2).unwrap() else {
            panic!("unitary expected")
        };
        let target = rotation(std::f64::consts::PI, std::f64::consts::FRAC_PI_2);
        assert!(((target.adjoint() * y).trace().norm() / 2.0 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn pauli_expectations_of_cardinal_states() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let plus = QState::Ket(CVector::from_vec(vec![C64::new(s, 0.0), C64::new(s, 0.0)]));
        let plus_i = QState::Ket(CVector::from_vec(vec![C64::new(s, 0.0), C64::new(0.0, s)]));
        let e = pauli_expectations(&plus);
        assert!((e[0] - 1.0).abs() < 1e-15 && e[1].abs() < 1e-15);
        let e = pauli_expectations(&plus_i);
        assert!((e[1] - 1.0).abs() < 1e-15 && e[0].abs() < 1e-15);
    }
}
