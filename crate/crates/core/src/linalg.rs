//! Small dense complex-matrix helpers shared by the simulation modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Virtual-Z frame rotation generalised to `d` levels: level `j` picks up
/// `exp(-i j theta)`.
pub fn vz(theta: f64, d: usize) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_fn(d, |j, _| C64::from_polar(1.0, -(j as f64) * theta)))
}

/// Embeds a 2x2 computational-subspace unitary into `d` levels, acting as the
/// identity on the leakage levels.
pub fn embed_qubit(u: &CMatrix, d: usize) -> CMatrix {
    let mut out = CMatrix::identity(d, d);
    out.view_mut((0, 0), (2, 2)).copy_from(&u.view((0, 0), (2, 2)));
    out
}

/// Rotation by `angle` about the equatorial axis at azimuth `phi`
/// (phi = 0 is x, phi = π/2 is y).
pub fn rotation(angle: f64, phi: f64) -> CMatrix {
    let (s, co) = (angle / 2.0).sin_cos();
    let e = C64::from_polar(1.0, phi);
    CMatrix::from_row_slice(
        2,
        2,
        &[c(co, 0.0), -I * s * e.conj(), -I * s * e, c(co, 0.0)],
    )
}

pub fn ideal_x() -> CMatrix {
    rotation(std::f64::consts::PI, 0.0)
}

pub fn ideal_x_half() -> CMatrix {
    rotation(std::f64::consts::FRAC_PI_2, 0.0)
}

/// Largest absolute element.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let n = u.nrows();
    max_abs(&(u.adjoint() * u - CMatrix::identity(n, n)))
}

/// Lowering operator truncated to `d` levels, `a|j> = sqrt(j)|j-1>`.
pub fn lowering(d: usize) -> CMatrix {
    let mut a = CMatrix::zeros(d, d);
    for j in 1..d {
        a[(j - 1, j)] = c((j as f64).sqrt(), 0.0);
    }
    a
}

pub fn ket(j: usize, d: usize) -> CVector {
    let mut v = CVector::zeros(d);
    v[j] = c(1.0, 0.0);
    v
}

pub fn projector(psi: &CVector) -> CMatrix {
    psi * psi.adjoint()
}

/// Wraps an angle to (-π, π].
pub fn wrap_angle(x: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut y = x.rem_euclid(TAU);
    if y > PI {
        y -= TAU;
    }
    y
}
