//! Driven-dissipative three-level model: Hamiltonian, jump operators and the
//! vectorized Liouvillian.
//!
//! All couplings are stored as ratios to the reference Rabi frequency
//! `omega1`; the generator itself is dimensionless (time in units of 1/Ω₁).
//! `omega1` only sets the physical unit for reporting.
//!
//! Drive-phase convention: the phase multiplies the raising amplitude
//! `|j><0|`, so `H[0][j] = (Ω_j / 2) e^{-iφ_j}` and `H[j][0] = (Ω_j / 2) e^{+iφ_j}`.

use crate::error::{Error, Result};
use crate::linalg::{
    c, cis, dagger, devectorize, hermitian_eigenvalues, hermiticity_error, ket_bra,
    sandwich, vectorize, Mat3, Mat9, Vec3,
};
use nalgebra::DMatrix;
use num_complex::Complex64;

/// Normalization of the dissipator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Convention {
    /// `J ρ J† − ½{J†J, ρ}`
    #[default]
    MainText,
    /// `2 J ρ J† − {J†J, ρ}`
    SuppFactor2,
}

impl Convention {
    pub fn factor(self) -> f64 {
        match self {
            Convention::MainText => 1.0,
            Convention::SuppFactor2 => 2.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Convention::MainText => "main_text",
            Convention::SuppFactor2 => "supp_factor2",
        }
    }
}

impl std::str::FromStr for Convention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "main_text" | "main" => Ok(Convention::MainText),
            "supp_factor2" | "supp" => Ok(Convention::SuppFactor2),
            other => Err(Error::InvalidParams(format!("unknown dissipator convention '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Reference Rabi frequency in rad/s (1.0 when working dimensionless).
    pub omega1: f64,
    /// Ω₁ drive amplitude in units of `omega1`; 1 except for drive-off limits.
    pub omega1_ratio: f64,
    pub omega2_ratio: f64,
    pub kappa1_ratio: f64,
    pub kappa2_ratio: f64,
    /// Drive phase on 0↔1 (rad).
    pub phi: f64,
    /// Drive phase on 0↔2 (rad).
    pub phi_prime: f64,
    pub convention: Convention,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self::reference()
    }
}

impl ModelParams {
    /// Dimensionless parameters with Ω₁ = 1 and zero phases.
    pub fn new(omega2_ratio: f64, kappa1_ratio: f64, kappa2_ratio: f64) -> Self {
        Self {
            omega1: 1.0,
            omega1_ratio: 1.0,
            omega2_ratio,
            kappa1_ratio,
            kappa2_ratio,
            phi: 0.0,
            phi_prime: 0.0,
            convention: Convention::MainText,
        }
    }

    /// Ω₂ = 0.06 Ω₁, κ₁ = 2 Ω₁, κ₂ = 0.0015 Ω₁.
    pub fn reference() -> Self {
        Self::new(0.06, 2.0, 0.0015)
    }

    pub fn with_omega2_ratio(mut self, r: f64) -> Self {
        self.omega2_ratio = r;
        self
    }

    pub fn with_omega1_ratio(mut self, r: f64) -> Self {
        self.omega1_ratio = r;
        self
    }

    pub fn with_omega1(mut self, omega1: f64) -> Self {
        self.omega1 = omega1;
        self
    }

    pub fn with_phases(mut self, phi: f64, phi_prime: f64) -> Self {
        self.phi = phi;
        self.phi_prime = phi_prime;
        self
    }

    pub fn with_convention(mut self, convention: Convention) -> Self {
        self.convention = convention;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("omega1", self.omega1),
            ("omega1_ratio", self.omega1_ratio),
            ("omega2_ratio", self.omega2_ratio),
            ("kappa1_ratio", self.kappa1_ratio),
            ("kappa2_ratio", self.kappa2_ratio),
            ("phi", self.phi),
            ("phi_prime", self.phi_prime),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::InvalidParams(format!("{name} must be finite, got {v}")));
            }
        }
        if self.omega1 <= 0.0 {
            return Err(Error::InvalidParams(format!("omega1 must be > 0, got {}", self.omega1)));
        }
        for (name, v) in &fields[1..5] {
            if *v < 0.0 {
                return Err(Error::InvalidParams(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Validated 3x3 density matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix(Mat3);

impl DensityMatrix {
    pub const HERMITIAN_TOL: f64 = 1e-12;
    pub const TRACE_TOL: f64 = 1e-12;
    pub const PSD_TOL: f64 = 1e-10;

    pub fn new(m: Mat3) -> Result<Self> {
        Self::with_tolerances(m, Self::TRACE_TOL, Self::PSD_TOL)
    }

    /// Checks Hermiticity strictly, trace and positivity at the given tolerances.
    pub fn with_tolerances(m: Mat3, trace_tol: f64, psd_tol: f64) -> Result<Self> {
        let herm = hermiticity_error(&m);
        if !herm.is_finite() || herm > Self::HERMITIAN_TOL {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {herm:.3e})")));
        }
        let tr = m.trace();
        if (tr - c(1.0, 0.0)).norm() > trace_tol {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min = hermitian_eigenvalues(&m)[0];
        if min < -psd_tol {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(Self(m))
    }

    /// Symmetrizes a propagated state whose Hermiticity drifted past the strict
    /// tolerance, then validates with trajectory tolerances.
    pub fn from_propagated(m: Mat3) -> Result<Self> {
        let drift = hermiticity_error(&m);
        let m = if drift > Self::HERMITIAN_TOL {
            log::debug!("symmetrizing propagated state (Hermiticity drift {drift:.3e})");
            (m + m.adjoint()) * c(0.5, 0.0)
        } else {
            m
        };
        Self::with_tolerances(m, 1e-10, 1e-8)
    }

    pub fn pure(psi: &PureState) -> Self {
        let v = psi.amplitudes();
        Self(v * v.adjoint())
    }

    /// `|k><k|`
    pub fn basis(k: usize) -> Self {
        Self(ket_bra(k, k))
    }

    pub fn maximally_mixed() -> Self {
        Self(Mat3::identity() * c(1.0 / 3.0, 0.0))
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn into_matrix(self) -> Mat3 {
        self.0
    }

    pub fn populations(&self) -> [f64; 3] {
        [self.0[(0, 0)].re, self.0[(1, 1)].re, self.0[(2, 2)].re]
    }
}

/// Normalized qutrit state vector `(a, b, c)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PureState(Vec3);

impl PureState {
    pub const NORM_TOL: f64 = 1e-12;

    pub fn new(amplitudes: Vec3) -> Result<Self> {
        let n2 = amplitudes.norm_squared();
        if !n2.is_finite() || (n2 - 1.0).abs() > Self::NORM_TOL {
            return Err(Error::InvalidState(format!("amplitudes not normalized (|psi|^2 = {n2})")));
        }
        Ok(Self(amplitudes))
    }

    /// Normalizes the given amplitudes; fails only on the zero vector.
    pub fn normalized(amplitudes: Vec3) -> Result<Self> {
        let n = amplitudes.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::InvalidState("zero or non-finite amplitude vector".into()));
        }
        Ok(Self(amplitudes / c(n, 0.0)))
    }

    pub fn basis(k: usize) -> Self {
        Self(crate::linalg::basis_vec(k))
    }

    pub fn amplitudes(&self) -> &Vec3 {
        &self.0
    }

    /// Haar-random pure state (normalized complex Gaussian vector).
    pub fn random<R: rand::Rng + ?Sized>(rng: &mut R) -> Self {
        use rand_distr::StandardNormal;
        loop {
            let v = Vec3::from_fn(|_, _| c(rng.sample(StandardNormal), rng.sample(StandardNormal)));
            if let Ok(s) = Self::normalized(v) {
                return s;
            }
        }
    }
}

/// 9x9 generator acting on column-major vectorized density matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Superoperator {
    pub matrix: Mat9,
    pub convention: Convention,
}

impl Superoperator {
    /// Builds `-i[H, ·] + f Σ (J · J† − ½{J†J, ·})` with `f` from the convention.
    pub fn from_operators(h: &Mat3, jumps: &[Mat3], convention: Convention) -> Self {
        let id = Mat3::identity();
        let mut m = (sandwich(h, &id) - sandwich(&id, h)) * c(0.0, -1.0);
        let f = c(convention.factor(), 0.0);
        for j in jumps {
            let jd = dagger(j);
            let jdj = jd * j;
            m += (sandwich(j, &jd) - (sandwich(&jdj, &id) + sandwich(&id, &jdj)) * c(0.5, 0.0)) * f;
        }
        Self { matrix: m, convention }
    }

    pub fn apply(&self, rho: &Mat3) -> Mat3 {
        devectorize(&(self.matrix * vectorize(rho)))
    }

    /// Applies the generator to a dynamically sized matrix, checking its shape.
    pub fn apply_dyn(&self, rho: &DMatrix<Complex64>) -> Result<Mat3> {
        if rho.shape() != (3, 3) {
            return Err(Error::ShapeMismatch {
                expected: "3x3".into(),
                got: format!("{}x{}", rho.nrows(), rho.ncols()),
            });
        }
        Ok(self.apply(&Mat3::from_fn(|i, j| rho[(i, j)])))
    }

    /// `‖vec(I)ᵀ · L‖`: vanishes for a trace-preserving generator.
    pub fn trace_defect(&self) -> f64 {
        let id = vectorize(&Mat3::identity());
        (id.transpose() * self.matrix).norm()
    }
}

pub fn build_hamiltonian(p: &ModelParams) -> Mat3 {
    let mut h = Mat3::zeros();
    let drives = [(1, p.omega1_ratio, p.phi), (2, p.omega2_ratio, p.phi_prime)];
    for (j, omega, phase) in drives {
        let amp = cis(-phase) * (omega / 2.0);
        h[(0, j)] = amp;
        h[(j, 0)] = amp.conj();
    }
    h
}

/// `J_j = sqrt(κ_j) |0><j|` for j = 1, 2.
pub fn build_jump_operators(p: &ModelParams) -> [Mat3; 2] {
    [
        ket_bra(0, 1) * c(p.kappa1_ratio.sqrt(), 0.0),
        ket_bra(0, 2) * c(p.kappa2_ratio.sqrt(), 0.0),
    ]
}

pub fn build_liouvillian(p: &ModelParams) -> Superoperator {
    Superoperator::from_operators(&build_hamiltonian(p), &build_jump_operators(p), p.convention)
}

pub fn apply_liouvillian(lsup: &Superoperator, rho: &DensityMatrix) -> Mat3 {
    lsup.apply(rho.matrix())
}

/// Direct matrix-form evaluation of the master equation right-hand side.
pub fn lindblad_rhs(h: &Mat3, jumps: &[Mat3], convention: Convention, rho: &Mat3) -> Mat3 {
    let mut out = (h * rho - rho * h) * c(0.0, -1.0);
    let f = c(convention.factor(), 0.0);
    for j in jumps {
        let jd = dagger(j);
        let jdj = jd * j;
        out += (j * rho * jd - (jdj * rho + rho * jdj) * c(0.5, 0.0)) * f;
    }
    out
}

pub fn model_rhs(p: &ModelParams, rho: &Mat3) -> Mat3 {
    lindblad_rhs(&build_hamiltonian(p), &build_jump_operators(p), p.convention, rho)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs, projector};
    use std::f64::consts::PI;

    fn max_deviation(a: &Mat3, b: &Mat3) -> f64 {
        max_abs(&(a - b))
    }

    fn unit(omega1: f64, omega2: f64, k1: f64, k2: f64) -> ModelParams {
        ModelParams::new(omega2, k1, k2).with_omega1_ratio(omega1)
    }

    #[test]
    fn hamiltonian_decoupled_level_two() {
        let h = build_hamiltonian(&unit(1.0, 0.0, 0.0, 0.0));
        let mut expected = Mat3::zeros();
        expected[(0, 1)] = c(0.5, 0.0);
        expected[(1, 0)] = c(0.5, 0.0);
        assert!(max_deviation(&h, &expected) < 1e-15);
    }

    #[test]
    fn hamiltonian_reference_couplings() {
        let h = build_hamiltonian(&ModelParams::reference());
        assert!((h[(0, 2)] - c(0.03, 0.0)).norm() < 1e-15);
        assert!((h[(0, 1)] - c(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn hamiltonian_phase_flip() {
        let h = build_hamiltonian(&unit(1.0, 1.0, 0.0, 0.0).with_phases(PI, 0.0));
        assert!((h[(0, 1)] - c(-0.5, 0.0)).norm() < 1e-15);
        assert!((h[(0, 2)] - c(0.5, 0.0)).norm() < 1e-15);
        assert!(hermiticity_error(&h) == 0.0);
    }

    #[test]
    fn jump_operators() {
        let [j1, j2] = build_jump_operators(&ModelParams::new(0.0, 2.0, 0.0));
        assert!((j1[(0, 1)] - c(2f64.sqrt(), 0.0)).norm() < 1e-15);
        assert_eq!(j1.iter().filter(|z| z.norm() > 0.0).count(), 1);
        assert_eq!(j2, Mat3::zeros());

        let [_, j2] = build_jump_operators(&ModelParams::reference());
        assert!((j2[(0, 2)].re - 0.038_729_833_462_074_17).abs() < 1e-15);
    }

    #[test]
    fn liouvillian_on_ground_state() {
        let l = build_liouvillian(&unit(1.0, 0.0, 0.0, 0.0));
        let out = l.apply(&projector(0));
        assert!(out[(1, 1)].norm() < 1e-15);
        assert!((out[(0, 1)] - c(0.0, 0.5)).norm() < 1e-15);
        assert!((out[(1, 0)] - c(0.0, -0.5)).norm() < 1e-15);
    }

    #[test]
    fn liouvillian_pure_decay() {
        let l = build_liouvillian(&unit(0.0, 0.0, 2.0, 0.0));
        let out = l.apply(&projector(1));
        let expected = (projector(0) - projector(1)) * c(2.0, 0.0);
        assert!(max_deviation(&out, &expected) < 1e-15);

        let l2 = build_liouvillian(&unit(0.0, 0.0, 2.0, 0.0).with_convention(Convention::SuppFactor2));
        assert!(max_deviation(&l2.apply(&projector(1)), &(expected * c(2.0, 0.0))) < 1e-15);
        assert_eq!(l2.convention, Convention::SuppFactor2);
    }

    #[test]
    fn zero_params_give_zero_generator() {
        let l = build_liouvillian(&unit(0.0, 0.0, 0.0, 0.0));
        assert_eq!(l.matrix, Mat9::zeros());
    }

    #[test]
    fn identity_state_commutes() {
        let l = build_liouvillian(&unit(1.3, 0.7, 0.0, 0.0).with_phases(0.3, -1.1));
        assert!(max_abs(&l.apply(DensityMatrix::maximally_mixed().matrix())) < 1e-15);
    }

    #[test]
    fn trace_preservation_row() {
        assert!(build_liouvillian(&ModelParams::reference()).trace_defect() < 1e-12);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let l = build_liouvillian(&ModelParams::reference());
        let bad = DMatrix::<Complex64>::zeros(2, 3);
        assert!(matches!(l.apply_dyn(&bad), Err(Error::ShapeMismatch { .. })));
        let ok = DMatrix::<Complex64>::identity(3, 3);
        assert!(l.apply_dyn(&ok).is_ok());
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(ModelParams::new(-0.1, 2.0, 0.0).validate().is_err());
        assert!(ModelParams::reference().with_omega1(0.0).validate().is_err());
        assert!(ModelParams::new(0.1, f64::NAN, 0.0).validate().is_err());
        assert!(ModelParams::reference().validate().is_ok());
    }

    #[test]
    fn density_matrix_validation() {
        assert!(DensityMatrix::new(projector(0) * c(2.0, 0.0)).is_err());
        let mut m = projector(0);
        m[(0, 1)] = c(0.1, 0.0);
        assert!(DensityMatrix::new(m).is_err());
        let neg = projector(0) * c(1.5, 0.0) - projector(1) * c(0.5, 0.0);
        assert!(DensityMatrix::new(neg).is_err());
        assert!(PureState::new(Vec3::new(c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0))).is_err());
    }
}
