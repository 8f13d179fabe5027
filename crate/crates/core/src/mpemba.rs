//! Strong-Mpemba initial state and state distances.

use crate::error::{Error, Result};
use crate::linalg::{
    basis_vec, c, fixing_phase, hermitian_eigen, hermitian_part, psd_sqrt, trace_norm, Mat3, Vec3, C64,
};
use crate::model::{DensityMatrix, PureState};
use crate::spectral::SpectralDecomposition;

#[derive(Debug, Clone, PartialEq)]
pub struct SmeConstruction {
    /// Hermitian, unit Frobenius norm rescaling of `L₁`.
    pub l1_hermitian: Mat3,
    pub phi1: Vec3,
    pub phi2: Vec3,
    pub alpha1: f64,
    pub alpha2: f64,
    pub s: f64,
    pub state: PureState,
    /// Unitary with `U|0⟩ = state`.
    pub unitary: Mat3,
}

/// Rescales a left mode belonging to a real eigenvalue to a Hermitian matrix of
/// unit Frobenius norm whose largest-modulus entry has nonnegative real part.
pub fn hermitian_left_mode(l: &Mat3) -> Mat3 {
    let psi = 0.5 * (l * l).trace().arg();
    let h = hermitian_part(&(l * C64::from_polar(1.0, -psi)));
    let k = crate::linalg::argmax_modulus(h.iter());
    let sign = if h.iter().nth(k).unwrap().re < 0.0 { -1.0 } else { 1.0 };
    h * c(sign / h.norm(), 0.0)
}

fn phase_fixed(v: &Vec3) -> Vec3 {
    v * fixing_phase(v.iter())
}

/// Completes `first` to a unitary by Gram–Schmidt on the seeds |1⟩, |2⟩, |0⟩.
pub fn complete_unitary(first: &Vec3) -> Mat3 {
    let mut cols = vec![*first];
    for k in [1, 2, 0] {
        let mut v = basis_vec(k);
        for u in &cols {
            v -= u * u.dotc(&v);
        }
        let n = v.norm();
        if n > 1e-6 {
            cols.push(v / c(n, 0.0));
        }
        if cols.len() == 3 {
            break;
        }
    }
    Mat3::from_columns(&cols)
}

/// Pure state with vanishing overlap on the slowest decaying mode:
/// `|sME⟩ = cos s |φ₁⟩ − i sin s |φ₂⟩` with `s = atan sqrt|α₁/α₂|`, where
/// `φ₁`, `φ₂` are the eigenvectors of the most negative and most positive
/// eigenvalues of the Hermitian-rescaled `L₁`.
pub fn sme_state(dec: &SpectralDecomposition) -> Result<SmeConstruction> {
    if dec.slow_mode_is_complex() || dec.recombined {
        let l1 = dec.eigenvalues[1];
        return Err(Error::ComplexSlowMode { re: l1.re, im: l1.im });
    }
    if dec.is_defective() {
        return Err(Error::Defective { condition: dec.condition });
    }
    construct_from_left_mode(&dec.left_modes[1])
}

/// Weak-regime counterpart of [`sme_state`] above the exceptional point:
/// cancels the overlap on the Hermitian recombined mode `L₁'` only, so the
/// state still relaxes at `Re λ₁`.
pub fn recombined_sme_state(dec: &SpectralDecomposition) -> Result<SmeConstruction> {
    if !dec.recombined {
        return Err(Error::InvalidState("decomposition has no recombined slow pair".into()));
    }
    construct_from_left_mode(&dec.left_modes[1])
}

fn construct_from_left_mode(l1: &Mat3) -> Result<SmeConstruction> {
    let h = hermitian_left_mode(l1);
    let (vals, vecs) = hermitian_eigen(&h);
    let (alpha1, alpha2) = (vals[0], vals[2]);
    if !(alpha1 < 0.0 && alpha2 > 0.0) {
        return Err(Error::NoSignChange(vals));
    }
    let phi1 = phase_fixed(&vecs[0]);
    let phi2 = phase_fixed(&vecs[2]);
    let s = (alpha1.abs() / alpha2).sqrt().atan();
    let psi = phi1 * c(s.cos(), 0.0) - phi2 * c(0.0, s.sin());
    let state = PureState::normalized(psi)?;
    let unitary = complete_unitary(state.amplitudes());
    Ok(SmeConstruction { l1_hermitian: h, phi1, phi2, alpha1, alpha2, s, state, unitary })
}

/// Pure state `cos s |φ₁⟩ − i sin s |φ₂⟩` for an arbitrary angle, used to
/// trace the slow-mode overlap through the cancellation point.
pub fn rotated_state(sme: &SmeConstruction, s: f64) -> PureState {
    let psi = sme.phi1 * c(s.cos(), 0.0) - sme.phi2 * c(0.0, s.sin());
    PureState::normalized(psi).expect("orthonormal combination")
}

/// Trace norm of the difference, `Tr sqrt((ρ−σ)†(ρ−σ))`.
pub fn distance_eq4(rho: &DensityMatrix, sigma: &DensityMatrix) -> f64 {
    trace_norm(&(rho.matrix() - sigma.matrix()))
}

/// Hilbert–Schmidt norm of the difference, `sqrt Tr[(ρ−σ)²]`.
pub fn distance_frobenius(rho: &DensityMatrix, sigma: &DensityMatrix) -> f64 {
    (rho.matrix() - sigma.matrix()).norm()
}

pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> f64 {
    let sr = psd_sqrt(rho.matrix());
    let inner = hermitian_part(&(sr * sigma.matrix() * sr));
    let (vals, _) = hermitian_eigen(&inner);
    let root: f64 = vals.iter().map(|v| v.max(0.0).sqrt()).sum();
    (root * root).min(1.0)
}

/// `sqrt(2(1 − sqrt F))` with the Uhlmann fidelity `F`.
pub fn distance_bures(rho: &DensityMatrix, sigma: &DensityMatrix) -> f64 {
    (2.0 * (1.0 - fidelity(rho, sigma).sqrt())).max(0.0).sqrt()
}

pub fn distance_trace(rho: &DensityMatrix, sigma: &DensityMatrix) -> f64 {
    0.5 * distance_eq4(rho, sigma)
}
