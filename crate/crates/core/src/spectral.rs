//! Biorthonormal eigen-decomposition of the Liouvillian and the analyses
//! built on it: stationary state, mode overlaps, conjugate-pair
//! recombination, exceptional-point location and regime classification.
//!
//! Conventions:
//! - eigenvalues sorted with the zero cluster first, then by decreasing real
//!   part; real-part ties (to `1e-10 * scale`) broken by ascending imaginary
//!   part, then by solver index;
//! - each right mode `R_i` is phase-fixed (largest entry real-positive) and
//!   unit-normalized before biorthonormalization;
//! - left modes satisfy `Tr[L_i R_j] = δ_ij`, with `L_0 = I` exactly and
//!   `Tr R_0 = 1`;
//! - overlaps are `c_i = Tr[L_i ρ]`.

use crate::error::{Error, Result};
use crate::linalg::{
    c, devectorize, fixing_phase, hermiticity_error, vectorize, Mat3, Mat9, Vec9, C64,
};
use crate::model::{build_liouvillian, DensityMatrix, ModelParams, Superoperator};
use nalgebra::{DMatrix, SMatrix};
use rayon::prelude::*;

/// Decompositions whose condition exceeds this are treated as defective.
pub const DEFECTIVE_CONDITION: f64 = 1e6;
/// Scan rows above this condition are flagged as unreliable.
pub const HIGH_CONDITION: f64 = 50.0;
/// |Im λ| below this (relative to the spectral scale) counts as real.
pub const IMAG_TOL: f64 = 1e-10;
/// Ratio window around a located exceptional point classified as "at" it.
pub const LEP_WINDOW: f64 = 1e-6;
/// Bisection tolerance on Ω₂/Ω₁.
pub const LEP_TOL: f64 = 1e-10;

const ZERO_TOL: f64 = 1e-10;
const CLUSTER_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    pub eigenvalues: [C64; 9],
    pub right_modes: [Mat3; 9],
    pub left_modes: [Mat3; 9],
    /// `|Re λ₁|`
    pub gap: f64,
    pub tau1: f64,
    pub tau2: f64,
    /// Largest eigenvalue condition number `‖L_i‖‖R_i‖ / |Tr[L_i R_i]|`.
    pub condition: f64,
    pub mode_conditions: [f64; 9],
    /// Multiplicity of the zero eigenvalue; 1 for a unique stationary state.
    pub zero_multiplicity: usize,
    /// Set once the (1, 2) conjugate pair has been replaced by Hermitian modes.
    pub recombined: bool,
}

/// `c_i = Tr[L_i ρ]`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapVector {
    pub coefficients: [C64; 9],
}

impl OverlapVector {
    pub fn magnitudes(&self) -> [f64; 9] {
        self.coefficients.map(|z| z.norm())
    }
}

/// Orthonormal Hermitian operator basis (column-major vectorized, as columns).
fn hermitian_basis() -> Mat9 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut cols: Vec<Mat3> = (0..3).map(crate::linalg::projector).collect();
    for (a, b) in [(0, 1), (0, 2), (1, 2)] {
        let e_ab = crate::linalg::ket_bra(a, b);
        let e_ba = crate::linalg::ket_bra(b, a);
        cols.push((e_ab + e_ba) * c(s, 0.0));
        cols.push((e_ab - e_ba) * c(0.0, s));
    }
    Mat9::from_fn(|i, j| vectorize(&cols[j])[i])
}

/// Real representation of a Hermiticity-preserving generator.
pub fn real_representation(lsup: &Superoperator) -> SMatrix<f64, 9, 9> {
    let b = hermitian_basis();
    let m = b.adjoint() * lsup.matrix * b;
    m.map(|z| z.re)
}

fn spectral_scale(vals: &[C64]) -> f64 {
    vals.iter().map(|z| z.norm()).fold(1.0, f64::max)
}

/// Eigenvalues in canonical order (zero cluster first, snapped to exact 0).
pub fn liouvillian_spectrum(lsup: &Superoperator) -> [C64; 9] {
    let raw = real_representation(lsup).complex_eigenvalues();
    let raw: Vec<C64> = raw.iter().copied().collect();
    let order = canonical_order(&raw);
    let scale = spectral_scale(&raw);
    let mut out = [C64::new(0.0, 0.0); 9];
    for (slot, &k) in out.iter_mut().zip(order.iter()) {
        *slot = if raw[k].norm() <= ZERO_TOL * scale { C64::new(0.0, 0.0) } else { raw[k] };
    }
    out
}

fn canonical_order(vals: &[C64]) -> Vec<usize> {
    let scale = spectral_scale(vals);
    let (mut zeros, mut rest): (Vec<usize>, Vec<usize>) =
        (0..vals.len()).partition(|&k| vals[k].norm() <= ZERO_TOL * scale);
    zeros.sort_unstable();
    rest.sort_by(|&a, &b| vals[b].re.total_cmp(&vals[a].re).then(a.cmp(&b)));
    // regroup real-part ties and order them by imaginary part
    let tie = CLUSTER_TOL * scale;
    let mut ordered = Vec::with_capacity(rest.len());
    let mut start = 0;
    while start < rest.len() {
        let mut end = start + 1;
        while end < rest.len() && (vals[rest[end - 1]].re - vals[rest[end]].re).abs() <= tie {
            end += 1;
        }
        let mut group = rest[start..end].to_vec();
        group.sort_by(|&a, &b| vals[a].im.total_cmp(&vals[b].im).then(a.cmp(&b)));
        ordered.extend(group);
        start = end;
    }
    zeros.extend(ordered);
    zeros
}

/// Groups consecutive (canonically ordered) eigenvalues that coincide.
fn clusters(vals: &[C64; 9], zero_multiplicity: usize) -> Vec<std::ops::Range<usize>> {
    let scale = spectral_scale(vals);
    let mut out = Vec::new();
    if zero_multiplicity > 0 {
        out.push(0..zero_multiplicity);
    }
    let mut start = zero_multiplicity;
    while start < 9 {
        let mut end = start + 1;
        while end < 9 && (vals[end] - vals[start]).norm() <= CLUSTER_TOL * scale {
            end += 1;
        }
        out.push(start..end);
        start = end;
    }
    out
}

fn gram_schmidt_rows(seeds: &[Vec9], k: usize) -> Vec<Vec9> {
    let mut basis: Vec<Vec9> = Vec::with_capacity(k);
    for s in seeds {
        let mut v = *s;
        for b in &basis {
            let proj = b.dotc(&v);
            v -= b * proj;
        }
        let n = v.norm();
        if n > 1e-6 {
            basis.push(v / c(n, 0.0));
        }
        if basis.len() == k {
            break;
        }
    }
    basis
}

pub fn eigendecompose(lsup: &Superoperator) -> SpectralDecomposition {
    let eigenvalues = liouvillian_spectrum(lsup);
    let zero_multiplicity = eigenvalues.iter().filter(|z| z.norm() == 0.0).count();
    let scale = spectral_scale(&eigenvalues);

    let mut right: [Vec9; 9] = [Vec9::zeros(); 9];
    let mut left: [Vec9; 9] = [Vec9::zeros(); 9];
    let identity_row = vectorize(&Mat3::identity());

    for range in clusters(&eigenvalues, zero_multiplicity) {
        let k = range.len();
        let mu = range.clone().map(|i| eigenvalues[i]).sum::<C64>() / c(k as f64, 0.0);
        let shifted = lsup.matrix - Mat9::identity() * mu;
        let svd = shifted.svd(true, true);
        let (u, v_t) = (svd.u.expect("svd u"), svd.v_t.expect("svd v_t"));
        let mut idx: Vec<usize> = (0..9).collect();
        idx.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
        let null = &idx[..k];
        if svd.singular_values[null[k - 1]] > 1e-7 * scale {
            log::debug!(
                "cluster at {mu} has deficient null space (sigma = {:.3e})",
                svd.singular_values[null[k - 1]]
            );
        }

        // right vectors: phase-fixed unit columns
        let mut rs: Vec<Vec9> = null
            .iter()
            .map(|&j| {
                let v: Vec9 = v_t.row(j).adjoint();
                let ph = fixing_phase(v.iter());
                let v = v * ph;
                v / c(v.norm(), 0.0)
            })
            .collect();
        // left row vectors l with l·(L - mu) = 0, stored so that l·x = Σ l_k x_k
        let mut ls: Vec<Vec9> = null.iter().map(|&j| u.column(j).map(|z| z.conj())).collect();

        let is_zero = range.start == 0 && zero_multiplicity > 0;
        if k == 1 && !is_zero {
            // the SVD does not resolve a close neighbour well; inverse iteration does
            let (lu, lu_t) = (shifted.lu(), shifted.transpose().lu());
            for _ in 0..2 {
                if let Some(v) = lu.solve(&rs[0]).filter(|v| v.norm().is_finite() && v.norm() > 0.0) {
                    let v = v * fixing_phase(v.iter());
                    rs[0] = v / c(v.norm(), 0.0);
                }
                if let Some(l) = lu_t.solve(&ls[0]).filter(|l| l.norm().is_finite() && l.norm() > 0.0) {
                    ls[0] = l / c(l.norm(), 0.0);
                }
            }
        }
        if is_zero {
            let mut seeds = vec![identity_row];
            seeds.extend(ls.iter().copied());
            let mut basis = gram_schmidt_rows(&seeds, k);
            basis[0] = identity_row;
            ls = basis;
        }

        let g = DMatrix::<C64>::from_fn(k, k, |a, b| ls[a].dot(&rs[b]));
        match g.clone().try_inverse() {
            Some(ginv) => {
                if is_zero {
                    // keep L fixed (L_0 = I), rescale R
                    let old = rs.clone();
                    for b in 0..k {
                        rs[b] = (0..k).fold(Vec9::zeros(), |acc, a| acc + old[a] * ginv[(a, b)]);
                    }
                } else {
                    let old = ls.clone();
                    for a in 0..k {
                        ls[a] = (0..k).fold(Vec9::zeros(), |acc, b| acc + old[b] * ginv[(a, b)]);
                    }
                }
            }
            None => log::warn!("singular biorthogonality Gram matrix in cluster at {mu}"),
        }
        for (slot, i) in range.enumerate() {
            right[i] = rs[slot];
            left[i] = ls[slot];
        }
    }

    // Nearly coincident but distinct eigenvalues leave O(eps/gap) leakage
    // between their pairs; one global solve against the fixed left rows removes it.
    let g = DMatrix::<C64>::from_fn(9, 9, |a, b| left[a].dot(&right[b]));
    let leakage = (&g - DMatrix::<C64>::identity(9, 9)).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if leakage < 1e-6 {
        if let Some(ginv) = g.try_inverse() {
            let old = right;
            for b in 0..9 {
                right[b] = (0..9).fold(Vec9::zeros(), |acc, a| acc + old[a] * ginv[(a, b)]);
            }
        }
    }

    let mut mode_conditions = [0.0; 9];
    for i in 0..9 {
        let pairing = left[i].dot(&right[i]).norm();
        mode_conditions[i] = if pairing > 0.0 {
            left[i].norm() * right[i].norm() / pairing
        } else {
            f64::INFINITY
        };
    }
    let condition = mode_conditions.iter().copied().fold(1.0, f64::max);
    let rate = |z: C64| z.re.abs();
    SpectralDecomposition {
        eigenvalues,
        right_modes: right.map(|v| devectorize(&v)),
        left_modes: left.map(|v| devectorize(&v).transpose()),
        gap: rate(eigenvalues[1]),
        tau1: 1.0 / rate(eigenvalues[1]),
        tau2: 1.0 / rate(eigenvalues[2]),
        condition,
        mode_conditions,
        zero_multiplicity,
        recombined: false,
    }
}

impl SpectralDecomposition {
    pub fn from_params(p: &ModelParams) -> Self {
        eigendecompose(&build_liouvillian(p))
    }

    pub fn is_defective(&self) -> bool {
        !(self.condition < DEFECTIVE_CONDITION)
    }

    pub fn scale(&self) -> f64 {
        spectral_scale(&self.eigenvalues)
    }

    /// True when λ₁ has a nonzero imaginary part.
    pub fn slow_mode_is_complex(&self) -> bool {
        self.eigenvalues[1].im.abs() > IMAG_TOL * self.scale()
    }

    fn ensure_regular(&self) -> Result<()> {
        if self.is_defective() {
            Err(Error::Defective { condition: self.condition })
        } else {
            Ok(())
        }
    }

    /// Time-evolved coefficients `c_i e^{λ_i t}`; a recombined pair rotates as
    /// `c₁'(t) + i c₂'(t) = (c₁' + i c₂') e^{λ₁ t}`.
    pub fn coefficients_at(&self, c0: &OverlapVector, t: f64) -> [C64; 9] {
        let mut out = [C64::new(0.0, 0.0); 9];
        for i in 0..9 {
            out[i] = c0.coefficients[i] * (self.eigenvalues[i] * t).exp();
        }
        if self.recombined {
            let z = (c0.coefficients[1] + C64::i() * c0.coefficients[2]) * (self.eigenvalues[1] * t).exp();
            out[1] = c(z.re, 0.0);
            out[2] = c(z.im, 0.0);
        }
        out
    }

    /// `Σ_i coeffs_i R_i`
    pub fn reconstruct(&self, coeffs: &[C64; 9]) -> Mat3 {
        coeffs.iter().zip(self.right_modes.iter()).fold(Mat3::zeros(), |acc, (z, r)| acc + r * *z)
    }

    /// Stationary-free part `Σ_{i ≥ m0} coeffs_i R_i`.
    pub fn deviation(&self, coeffs: &[C64; 9]) -> Mat3 {
        (self.zero_multiplicity..9).fold(Mat3::zeros(), |acc, i| acc + self.right_modes[i] * coeffs[i])
    }

    /// Left mode `i` rescaled to unit Frobenius norm with its largest entry
    /// real-positive; bounded across exceptional points.
    pub fn unit_left_mode(&self, i: usize) -> Mat3 {
        let l = self.left_modes[i];
        let ph = fixing_phase(l.iter());
        let l = l * ph;
        l / c(l.norm(), 0.0)
    }
}

pub fn stationary_state(dec: &SpectralDecomposition) -> Result<DensityMatrix> {
    if dec.zero_multiplicity != 1 {
        return Err(Error::DegenerateStationary {
            multiplicity: dec.zero_multiplicity,
            indices: (0..dec.zero_multiplicity).collect(),
        });
    }
    dec.ensure_regular()?;
    let r0 = dec.right_modes[0];
    let r0 = if hermiticity_error(&r0) > DensityMatrix::HERMITIAN_TOL {
        crate::linalg::hermitian_part(&r0)
    } else {
        r0
    };
    DensityMatrix::new(r0)
}

pub fn overlaps(dec: &SpectralDecomposition, rho_in: &DensityMatrix) -> Result<OverlapVector> {
    dec.ensure_regular()?;
    Ok(overlaps_unchecked(dec, rho_in.matrix()))
}

pub(crate) fn overlaps_unchecked(dec: &SpectralDecomposition, rho: &Mat3) -> OverlapVector {
    OverlapVector { coefficients: dec.left_modes.map(|l| (l * rho).trace()) }
}

/// Replaces the slow conjugate pair `λ₁ = λ₂*` by the Hermitian modes
/// `R₁' = R₁ + R₁†`, `R₂' = i(R₁ − R₁†)` with dual functionals
/// `L₁' = (L₁ + L₁†)/2`, `L₂' = (L₁ − L₁†)/(2i)`.
///
/// Without such a pair the decomposition is returned unchanged.
pub fn hermitian_recombination(dec: &SpectralDecomposition) -> SpectralDecomposition {
    let (l1, l2) = (dec.eigenvalues[1], dec.eigenvalues[2]);
    let tol = IMAG_TOL * dec.scale();
    if dec.recombined || l1.im.abs() <= tol || (l1 - l2.conj()).norm() > 1e-8 * dec.scale() {
        log::info!("no slow conjugate pair (lambda_1 = {l1}, lambda_2 = {l2}); recombination skipped");
        return dec.clone();
    }
    let mut out = dec.clone();
    let (r1, lm1) = (dec.right_modes[1], dec.left_modes[1]);
    out.right_modes[1] = r1 + r1.adjoint();
    out.right_modes[2] = (r1 - r1.adjoint()) * C64::i();
    out.left_modes[1] = (lm1 + lm1.adjoint()) * c(0.5, 0.0);
    out.left_modes[2] = (lm1 - lm1.adjoint()) * c(0.0, -0.5);
    out.eigenvalues[2] = l1.conj();
    out.recombined = true;
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LepScanRow {
    pub ratio: f64,
    pub lambda1: C64,
    pub lambda2: C64,
    /// `Tr[L̂₁ ρ_in]` with the unit-normalized, phase-fixed left mode.
    pub c1: C64,
    pub c2: C64,
    pub condition: f64,
    pub high_condition: bool,
}

fn scan_row(p: &ModelParams, ratio: f64, rho_in: &DensityMatrix) -> LepScanRow {
    let dec = SpectralDecomposition::from_params(&p.with_omega2_ratio(ratio));
    let rho = rho_in.matrix();
    LepScanRow {
        ratio,
        lambda1: dec.eigenvalues[1],
        lambda2: dec.eigenvalues[2],
        c1: (dec.unit_left_mode(1) * rho).trace(),
        c2: (dec.unit_left_mode(2) * rho).trace(),
        condition: dec.condition,
        high_condition: dec.condition > HIGH_CONDITION,
    }
}

/// Slow-pair spectrum and unit-normalized overlaps along an Ω₂/Ω₁ grid.
pub fn lep_scan(p: &ModelParams, ratios: &[f64], rho_in: &DensityMatrix) -> Result<Vec<LepScanRow>> {
    if ratios.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(Error::InvalidParams("scan ratios must be positive".into()));
    }
    if ratios.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParams("scan ratios must be sorted ascending".into()));
    }
    Ok(ratios.par_iter().map(|&r| scan_row(p, r, rho_in)).collect())
}

fn slow_mode_complex_at(p: &ModelParams, ratio: f64) -> bool {
    let vals = liouvillian_spectrum(&build_liouvillian(&p.with_omega2_ratio(ratio)));
    vals[1].im.abs() > IMAG_TOL * spectral_scale(&vals)
}

/// Bisection on the indicator `Im λ₁ ≠ 0` inside `(lo, hi)`.
pub fn locate_lep(p: &ModelParams, bracket: (f64, f64)) -> Result<f64> {
    let (mut lo, mut hi) = bracket;
    if !(lo.is_finite() && hi.is_finite() && 0.0 < lo && lo < hi) {
        return Err(Error::InvalidBracket(format!("need 0 < lo < hi, got ({lo}, {hi})")));
    }
    if slow_mode_complex_at(p, lo) {
        return Err(Error::InvalidBracket(format!("lambda_1 already complex at lo = {lo}")));
    }
    if !slow_mode_complex_at(p, hi) {
        return Err(Error::InvalidBracket(format!("lambda_1 still real at hi = {hi}")));
    }
    while hi - lo > LEP_TOL {
        let mid = 0.5 * (lo + hi);
        if slow_mode_complex_at(p, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Locates the first real-to-complex transition of λ₁ on a geometric grid
/// of Ω₂/Ω₁ in `[1e-3, 1e2]`, then refines by bisection.
pub fn find_lep(p: &ModelParams) -> Option<f64> {
    let n = 400;
    let grid: Vec<f64> = (0..=n).map(|k| 1e-3 * 10f64.powf(5.0 * k as f64 / n as f64)).collect();
    let flags: Vec<bool> = grid.par_iter().map(|&r| slow_mode_complex_at(p, r)).collect();
    let k = (1..=n).find(|&k| !flags[k - 1] && flags[k])?;
    locate_lep(p, (grid[k - 1], grid[k])).ok()
}

/// Eigen-mode coalescence metric `|ĉ₁ − ĉ₂|` at a given ratio.
pub fn coalescence_gap(p: &ModelParams, ratio: f64, rho_in: &DensityMatrix) -> f64 {
    let row = scan_row(p, ratio, rho_in);
    (row.c1 - row.c2).norm()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoalescenceCheck {
    pub offset: f64,
    /// Gap at `lep - offset`, `lep - 4 offset` and the square-root-law extrapolation.
    pub below: [f64; 3],
    pub above: [f64; 3],
}

impl CoalescenceCheck {
    pub fn extrapolated(&self) -> f64 {
        self.below[2].abs().max(self.above[2].abs())
    }
}

/// Evaluates the coalescence gap at `lep ± offset` and `lep ± 4 offset` and
/// extrapolates to the exceptional point assuming the generic `a + b sqrt(δ)`
/// approach of eigenvectors to an EP: `a ≈ 2 g(δ) − g(4δ)`.
pub fn coalescence_at_lep(p: &ModelParams, lep: f64, rho_in: &DensityMatrix, offset: f64) -> CoalescenceCheck {
    let side = |sign: f64| {
        let g1 = coalescence_gap(p, lep + sign * offset, rho_in);
        let g4 = coalescence_gap(p, lep + sign * 4.0 * offset, rho_in);
        [g1, g4, 2.0 * g1 - g4]
    };
    CoalescenceCheck { offset, below: side(-1.0), above: side(1.0) }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Strong,
    SuperStrong,
    WeakOrNone,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Strong => "strong",
            Regime::SuperStrong => "super_strong",
            Regime::WeakOrNone => "weak_or_none",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeReport {
    pub regime: Regime,
    pub speedup_factor: f64,
    pub lep_ratio: Option<f64>,
    /// Modes governing late-time relaxation of a generic initial state.
    pub generic_modes: Vec<usize>,
    /// Modes governing late-time relaxation of the sME state.
    pub sme_modes: Vec<usize>,
}

/// Classifies using the exceptional point found by [`find_lep`].
pub fn classify_regime(p: &ModelParams) -> RegimeReport {
    classify_regime_with_lep(p, find_lep(p))
}

pub fn classify_regime_with_lep(p: &ModelParams, lep: Option<f64>) -> RegimeReport {
    let vals = liouvillian_spectrum(&build_liouvillian(p));
    let scale = spectral_scale(&vals);
    let at_lep = lep.is_some_and(|l| (p.omega2_ratio - l).abs() <= LEP_WINDOW);
    let complex = vals[1].im.abs() > IMAG_TOL * scale;
    let split = (vals[1] - vals[2]).re;
    let (regime, speedup_factor, generic_modes, sme_modes) = if at_lep {
        (Regime::SuperStrong, (vals[1] - vals[3]).re, vec![1, 2], vec![3])
    } else if !complex && split > CLUSTER_TOL * scale {
        (Regime::Strong, split, vec![1], vec![2])
    } else {
        (Regime::WeakOrNone, 0.0, vec![1, 2], vec![2])
    };
    RegimeReport { regime, speedup_factor, lep_ratio: lep, generic_modes, sme_modes }
}
