//! Small fixed-size complex linear algebra used throughout the crate.
//!
//! Density matrices are 3x3 and superoperators act on their column-major
//! vectorization: element `(a, b)` lives at index `a + 3 * b`.

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type Mat3 = Matrix3<C64>;
pub type Vec3 = Vector3<C64>;
pub type Mat9 = SMatrix<C64, 9, 9>;
pub type Vec9 = SVector<C64, 9>;

pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn cis(theta: f64) -> C64 {
    C64::from_polar(1.0, theta)
}

/// Column-major vectorization.
pub fn vectorize(m: &Mat3) -> Vec9 {
    Vec9::from_column_slice(m.as_slice())
}

pub fn devectorize(v: &Vec9) -> Mat3 {
    Mat3::from_column_slice(v.as_slice())
}

pub fn dagger(m: &Mat3) -> Mat3 {
    m.adjoint()
}

pub fn hermitian_part(m: &Mat3) -> Mat3 {
    (m + m.adjoint()) * c(0.5, 0.0)
}

/// Largest elementwise deviation from Hermiticity.
pub fn hermiticity_error(m: &Mat3) -> f64 {
    (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs(m: &Mat3) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Ascending eigenvalues of the Hermitian part of `m`.
pub fn hermitian_eigenvalues(m: &Mat3) -> [f64; 3] {
    let e = hermitian_part(m).symmetric_eigenvalues();
    let mut v = [e[0], e[1], e[2]];
    v.sort_by(f64::total_cmp);
    v
}

/// Eigen-decomposition of the Hermitian part of `m`, eigenvalues ascending.
pub fn hermitian_eigen(m: &Mat3) -> ([f64; 3], [Vec3; 3]) {
    let se = hermitian_part(m).symmetric_eigen();
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
    let vals = idx.map(|k| se.eigenvalues[k]);
    let vecs = idx.map(|k| se.eigenvectors.column(k).into_owned());
    (vals, vecs)
}

/// Trace norm `Tr sqrt(A^dagger A)`, the sum of singular values.
pub fn trace_norm(m: &Mat3) -> f64 {
    m.singular_values().iter().sum()
}

/// Square root of the positive part of a Hermitian matrix; negative
/// eigenvalues from round-off are clamped to zero.
pub fn psd_sqrt(m: &Mat3) -> Mat3 {
    let (vals, vecs) = hermitian_eigen(m);
    let mut out = Mat3::zeros();
    for (v, u) in vals.iter().zip(vecs.iter()) {
        out += u * u.adjoint() * c(v.max(0.0).sqrt(), 0.0);
    }
    out
}

/// Index of the first entry of largest modulus.
pub fn argmax_modulus<'a>(entries: impl IntoIterator<Item = &'a C64>) -> usize {
    let mut best = 0;
    let mut best_abs = -1.0;
    for (k, z) in entries.into_iter().enumerate() {
        // strict comparison keeps the lowest index on ties
        if z.norm() > best_abs * (1.0 + 1e-12) {
            best = k;
            best_abs = z.norm();
        }
    }
    best
}

/// Phase that makes the largest-modulus entry real and positive.
pub fn fixing_phase<'a>(entries: impl IntoIterator<Item = &'a C64> + Clone) -> C64 {
    let k = argmax_modulus(entries.clone());
    let z = *entries.into_iter().nth(k).unwrap();
    if z.norm() == 0.0 {
        c(1.0, 0.0)
    } else {
        z.conj() / z.norm()
    }
}

/// Principal argument in (-pi, pi], with `fallback` for (numerically) zero input.
pub fn arg_or(z: C64, fallback: f64) -> f64 {
    if z.norm() <= 1e-15 {
        fallback
    } else {
        let a = z.arg();
        if a <= -std::f64::consts::PI {
            a + 2.0 * std::f64::consts::PI
        } else {
            a
        }
    }
}

pub fn outer(u: &Vec3, v: &Vec3) -> Mat3 {
    u * v.adjoint()
}

pub fn basis_vec(k: usize) -> Vec3 {
    let mut v = Vec3::zeros();
    v[k] = c(1.0, 0.0);
    v
}

pub fn projector(k: usize) -> Mat3 {
    let mut m = Mat3::zeros();
    m[(k, k)] = c(1.0, 0.0);
    m
}

/// `|i><j|`
pub fn ket_bra(i: usize, j: usize) -> Mat3 {
    let mut m = Mat3::zeros();
    m[(i, j)] = c(1.0, 0.0);
    m
}

/// Superoperator matrix of `X -> A X B` in column-major vectorization.
pub fn sandwich(a: &Mat3, b: &Mat3) -> Mat9 {
    let k = b.transpose().kronecker(a);
    Mat9::from_column_slice(k.as_slice())
}

/// Maximum modulus of `U^dagger U - 1`.
pub fn unitarity_error(u: &Mat3) -> f64 {
    max_abs(&(u.adjoint() * u - Mat3::identity()))
}
