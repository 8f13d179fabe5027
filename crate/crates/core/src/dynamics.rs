//! Relaxation trajectories, decay-rate fits, the population-only rate model
//! and the adiabatically eliminated decay channel.

use crate::error::{Error, Result};
use crate::linalg::{c, hermitian_eigen, hermitian_part, ket_bra, psd_sqrt, trace_norm, Mat3, C64};
use crate::model::{lindblad_rhs, model_rhs, Convention, DensityMatrix, ModelParams};
use crate::ode::{integrate, integrate_matrix, Tolerances};
use crate::spectral::{overlaps, overlaps_unchecked, stationary_state, OverlapVector, SpectralDecomposition};
use nalgebra::{Matrix3, Vector3};

/// The four distance measures of a state from the stationary state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Distances {
    pub eq4: f64,
    pub frobenius: f64,
    pub bures: f64,
    pub trace: f64,
}

impl Distances {
    /// Distances computed from an explicitly supplied deviation `ρ − σ`, which
    /// avoids cancellation when `ρ` is very close to `σ`.
    pub fn from_deviation(rho: &Mat3, sigma: &Mat3, deviation: &Mat3) -> Self {
        let eq4 = trace_norm(deviation);
        let sr = psd_sqrt(rho);
        let (vals, _) = hermitian_eigen(&hermitian_part(&(sr * sigma * sr)));
        let root: f64 = vals.iter().map(|v| v.max(0.0).sqrt()).sum();
        let fid = (root * root).min(1.0);
        Self {
            eq4,
            frobenius: deviation.norm(),
            bures: (2.0 * (1.0 - fid.sqrt())).max(0.0).sqrt(),
            trace: 0.5 * eq4,
        }
    }

    pub fn between(rho: &Mat3, sigma: &Mat3) -> Self {
        Self::from_deviation(rho, sigma, &(rho - sigma))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    /// Empty when the stationary state is not unique.
    pub overlaps: Vec<OverlapVector>,
    /// Distances from the stationary state; empty when it is not unique.
    pub distances: Vec<Distances>,
    pub stationary: Option<DensityMatrix>,
}

impl Trajectory {
    pub fn eq4_series(&self) -> Vec<(f64, f64)> {
        self.times.iter().zip(&self.distances).map(|(t, d)| (*t, d.eq4)).collect()
    }

    pub fn overlap_series(&self, i: usize) -> Vec<(f64, f64)> {
        self.times.iter().zip(&self.overlaps).map(|(t, o)| (*t, o.coefficients[i].norm())).collect()
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() || times.iter().any(|t| !t.is_finite() || *t < 0.0) || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParams("time grid must be nonempty, nonnegative and strictly increasing".into()));
    }
    Ok(())
}

/// Logarithmic grid from `t_min` to `t_max`, both included.
pub fn log_grid(t_min: f64, t_max: f64, points: usize) -> Vec<f64> {
    if points < 2 {
        return vec![t_min];
    }
    let (a, b) = (t_min.ln(), t_max.ln());
    (0..points).map(|k| (a + (b - a) * k as f64 / (points - 1) as f64).exp()).collect()
}

pub fn linear_grid(t_min: f64, t_max: f64, points: usize) -> Vec<f64> {
    if points < 2 {
        return vec![t_min];
    }
    (0..points).map(|k| t_min + (t_max - t_min) * k as f64 / (points - 1) as f64).collect()
}

/// `1e-2` to `10 τ₁` with 200 logarithmically spaced points.
pub fn default_grid(dec: &SpectralDecomposition) -> Vec<f64> {
    log_grid(1e-2, 10.0 * dec.tau1, 200)
}

/// `ρ(t) = ρ_ss + Σ_{i≥1} c_i e^{λ_i t} R_i`.
pub fn evolve_spectral(dec: &SpectralDecomposition, rho_in: &DensityMatrix, times: &[f64]) -> Result<Trajectory> {
    check_times(times)?;
    let ss = stationary_state(dec)?;
    let c0 = overlaps(dec, rho_in)?;
    let mut traj = Trajectory {
        times: times.to_vec(),
        states: Vec::with_capacity(times.len()),
        overlaps: Vec::with_capacity(times.len()),
        distances: Vec::with_capacity(times.len()),
        stationary: Some(ss),
    };
    for &t in times {
        let coeffs = dec.coefficients_at(&c0, t);
        let dev = dec.deviation(&coeffs);
        let state = DensityMatrix::from_propagated(ss.matrix() + dev)?;
        traj.distances.push(Distances::from_deviation(state.matrix(), ss.matrix(), &dev));
        traj.overlaps.push(OverlapVector { coefficients: coeffs });
        traj.states.push(state);
    }
    Ok(traj)
}

/// Direct integration of the master equation, independent of the eigensolver
/// for the states themselves.
pub fn evolve_ode(p: &ModelParams, rho_in: &DensityMatrix, times: &[f64]) -> Result<Trajectory> {
    p.validate()?;
    check_times(times)?;
    let raw = integrate_matrix(|rho| model_rhs(p, rho), rho_in.matrix(), times, &Tolerances::default())?;
    let states = raw.into_iter().map(DensityMatrix::from_propagated).collect::<Result<Vec<_>>>()?;
    let dec = SpectralDecomposition::from_params(p);
    let stationary = stationary_state(&dec).ok();
    let (overlaps, distances) = match &stationary {
        Some(ss) => (
            states.iter().map(|s| overlaps_unchecked(&dec, s.matrix())).collect(),
            states.iter().map(|s| Distances::between(s.matrix(), ss.matrix())).collect(),
        ),
        None => (Vec::new(), Vec::new()),
    };
    Ok(Trajectory { times: times.to_vec(), states, overlaps, distances, stationary })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    /// Slope of `ln value` versus `t`.
    pub rate: f64,
    pub amplitude: f64,
    /// Root-mean-square residual of the log fit.
    pub rms: f64,
    pub points: usize,
}

/// Least-squares fit of `ln y = ln A + rate · t` over `t ∈ [window.0, window.1]`.
pub fn fit_decay_rate(series: &[(f64, f64)], window: (f64, f64)) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = series.iter().copied().filter(|(t, _)| *t >= window.0 && *t <= window.1).collect();
    if pts.len() < 2 {
        return Err(Error::FitWindow(format!("fewer than 2 points in [{}, {}]", window.0, window.1)));
    }
    if let Some((t, v)) = pts.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::FitWindow(format!("nonpositive value {v} at t = {t}")));
    }
    let n = pts.len() as f64;
    let (st, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (t, v)| (a + t, b + v.ln()));
    let (tm, ym) = (st / n, sy / n);
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (t, v) in &pts {
        sxx += (t - tm).powi(2);
        sxy += (t - tm) * (v.ln() - ym);
    }
    if sxx == 0.0 {
        return Err(Error::FitWindow("window contains a single distinct time".into()));
    }
    let rate = sxy / sxx;
    let intercept = ym - rate * tm;
    let rms = (pts.iter().map(|(t, v)| (v.ln() - intercept - rate * t).powi(2)).sum::<f64>() / n).sqrt();
    Ok(DecayFit { rate, amplitude: intercept.exp(), rms, points: pts.len() })
}

/// Asymptotic decay rate of the trace-norm distance from the stationary state,
/// fitted over `[10 τ, 20 τ]` on the exact mode sum, where `τ = 1/|Re λ_k|`
/// for the mode `k` expected to dominate.
pub fn asymptotic_distance_slope(dec: &SpectralDecomposition, rho_in: &DensityMatrix, mode: usize) -> Result<DecayFit> {
    let tau = 1.0 / dec.eigenvalues[mode].re.abs();
    let times = linear_grid(10.0 * tau, 20.0 * tau, 41);
    let traj = evolve_spectral(dec, rho_in, &times)?;
    fit_decay_rate(&traj.eq4_series(), (10.0 * tau, 20.0 * tau))
}

/// Population-only rate model with adiabatically eliminated coherences:
/// `0 ↔ j` at `Γ_j = Ω_j²/κ_j` both ways, plus decay `j → 0` at `κ_j`.
pub fn rate_matrix(p: &ModelParams) -> Result<Matrix3<f64>> {
    p.validate()?;
    let pairs = [(p.omega1_ratio, p.kappa1_ratio), (p.omega2_ratio, p.kappa2_ratio)];
    let mut gammas = [0.0; 2];
    for (k, (omega, kappa)) in pairs.iter().enumerate() {
        gammas[k] = match (*omega, *kappa) {
            (o, _) if o == 0.0 => 0.0,
            (o, kap) if kap > 0.0 => o * o / kap,
            _ => {
                return Err(Error::InvalidParams(format!(
                    "rate model needs kappa_{} > 0 when its drive is on",
                    k + 1
                )))
            }
        };
    }
    let mut w = Matrix3::zeros();
    for (j, (g, kappa)) in [(1, (gammas[0], p.kappa1_ratio)), (2, (gammas[1], p.kappa2_ratio))] {
        w[(j, 0)] += g;
        w[(0, 0)] -= g;
        w[(0, j)] += g + kappa;
        w[(j, j)] -= g + kappa;
    }
    Ok(w)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PopulationTrajectory {
    pub times: Vec<f64>,
    pub populations: Vec<[f64; 3]>,
}

fn check_simplex(p: &[f64; 3]) -> Result<()> {
    let sum: f64 = p.iter().sum();
    if p.iter().any(|v| !v.is_finite() || *v < -1e-12) || (sum - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidSimplex(*p));
    }
    Ok(())
}

pub fn rate_equation_evolve(p: &ModelParams, populations_in: [f64; 3], times: &[f64]) -> Result<PopulationTrajectory> {
    check_simplex(&populations_in)?;
    check_times(times)?;
    let w = rate_matrix(p)?;
    let ys = integrate(|_, y: &Vector3<f64>| w * y, 0.0, Vector3::from(populations_in), times, &Tolerances::default())?;
    Ok(PopulationTrajectory { times: times.to_vec(), populations: ys.iter().map(|y| [y[0], y[1], y[2]]).collect() })
}

/// Sorted (descending) eigenvalues of the rate matrix; the first is 0.
pub fn rate_model_spectrum(p: &ModelParams) -> Result<[f64; 3]> {
    let ev = rate_matrix(p)?.complex_eigenvalues();
    let mut v = [ev[0].re, ev[1].re, ev[2].re];
    v.sort_by(|a, b| b.total_cmp(a));
    Ok(v)
}

/// Fixed point of the rate model (kernel of the rate matrix).
pub fn rate_model_stationary(p: &ModelParams) -> Result<[f64; 3]> {
    let w = rate_matrix(p)?;
    let svd = w.svd(false, true);
    let vt = svd.v_t.expect("svd v_t");
    let k = (0..3).min_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b])).unwrap();
    let v = vt.row(k);
    let s: f64 = v.iter().sum();
    Ok([v[0] / s, v[1] / s, v[2] / s])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveDecayParams {
    pub omega_p: f64,
    pub gamma: f64,
}

impl EffectiveDecayParams {
    pub fn new(omega_p: f64, gamma: f64) -> Result<Self> {
        if !(omega_p.is_finite() && gamma.is_finite() && omega_p >= 0.0 && gamma >= 0.0) {
            return Err(Error::InvalidParams(format!("need omega_p, gamma >= 0 (got {omega_p}, {gamma})")));
        }
        Ok(Self { omega_p, gamma })
    }
}

/// Generator of `x = (ρ₁₁, ρ_pp, −i(ρ₁p − ρ_p1))`.
pub fn effective_model_matrix(e: &EffectiveDecayParams) -> Matrix3<f64> {
    let (o, g) = (e.omega_p, e.gamma);
    Matrix3::new(
        0.0, 0.0, -o / 2.0, //
        0.0, -g, o / 2.0, //
        o, -o, -g / 2.0,
    )
}

/// Closed forms `λ₁,₂ = −(γ ∓ sqrt(γ² − 4Ω_p²))/2`, `λ₃ = −γ/2`.
pub fn effective_model_eigenvalues(e: &EffectiveDecayParams) -> [C64; 3] {
    let g = e.gamma;
    let root = c(g * g - 4.0 * e.omega_p * e.omega_p, 0.0).sqrt();
    let lam1 = if g > 0.0 && root.im == 0.0 {
        // stable form of −(γ − sqrt(γ² − 4Ω²))/2
        c(-2.0 * e.omega_p * e.omega_p / (g + root.re), 0.0)
    } else {
        -(c(g, 0.0) - root) * 0.5
    };
    [lam1, -(c(g, 0.0) + root) * 0.5, c(-g / 2.0, 0.0)]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveRate {
    /// `−Re λ₁`
    pub exact: f64,
    /// `Ω_p²/γ`
    pub approx: f64,
    /// `|exact − approx| / exact`
    pub relative_gap: f64,
}

pub fn effective_decay_rate(e: &EffectiveDecayParams) -> Result<EffectiveRate> {
    if !(e.gamma > 2.0 * e.omega_p) {
        return Err(Error::Underdamped { gamma: e.gamma, omega_p: e.omega_p });
    }
    let exact = -effective_model_eigenvalues(e)[0].re;
    let approx = e.omega_p * e.omega_p / e.gamma;
    let relative_gap = if exact > 0.0 { (exact - approx).abs() / exact } else { 0.0 };
    Ok(EffectiveRate { exact, approx, relative_gap })
}

/// Decay rate of `ρ₁₁` fitted on a direct integration of the 3-level
/// `{0, 1, p}` master equation with `H = Ω_p/2 (|1⟩⟨p| + h.c.)` and
/// `J = sqrt(γ) |0⟩⟨p|`, started in `|1⟩` and fitted over `[1/κ, 4/κ]`
/// with `κ = Ω_p²/γ`.
pub fn effective_decay_ode_fit(e: &EffectiveDecayParams) -> Result<DecayFit> {
    let rate = effective_decay_rate(e)?;
    if rate.approx <= 0.0 {
        return Err(Error::InvalidParams("omega_p must be > 0 for a decay fit".into()));
    }
    let h = (ket_bra(1, 2) + ket_bra(2, 1)) * c(e.omega_p / 2.0, 0.0);
    let jumps = [ket_bra(0, 2) * c(e.gamma.sqrt(), 0.0)];
    let window = (1.0 / rate.approx, 4.0 / rate.approx);
    let times = linear_grid(window.0, window.1, 61);
    let states = integrate_matrix(
        |rho| lindblad_rhs(&h, &jumps, Convention::MainText, rho),
        &ket_bra(1, 1),
        &times,
        &Tolerances::default(),
    )?;
    let series: Vec<(f64, f64)> = times.iter().zip(&states).map(|(t, s)| (*t, s[(1, 1)].re)).collect();
    let mut fit = fit_decay_rate(&series, window)?;
    fit.rate = -fit.rate;
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mpemba::sme_state;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rabi_oscillation() {
        let p = ModelParams::new(0.0, 0.0, 0.0);
        let times = linear_grid(0.5, 20.0, 40);
        let traj = evolve_ode(&p, &DensityMatrix::basis(0), &times).unwrap();
        assert!(traj.stationary.is_none() && traj.distances.is_empty());
        for (t, s) in times.iter().zip(&traj.states) {
            assert_abs_diff_eq!(s.populations()[1], (t / 2.0).sin().powi(2), epsilon = 1e-9);
        }
    }

    #[test]
    fn pure_decay() {
        let p = ModelParams::new(0.0, 2.0, 0.0).with_omega1_ratio(0.0);
        let times = linear_grid(0.1, 5.0, 20);
        let traj = evolve_ode(&p, &DensityMatrix::basis(1), &times).unwrap();
        for (t, s) in times.iter().zip(&traj.states) {
            assert_abs_diff_eq!(s.populations()[1], (-2.0 * t).exp(), epsilon = 1e-10);
        }
    }

    #[test]
    fn spectral_matches_ode_for_three_starts() {
        let p = ModelParams::reference();
        let dec = SpectralDecomposition::from_params(&p);
        let sme = DensityMatrix::pure(&sme_state(&dec).unwrap().state);
        let times = [0.0, 0.5, dec.tau2, 10.0, dec.tau1, 3.0 * dec.tau1];
        for rho in [DensityMatrix::basis(0), DensityMatrix::basis(2), sme] {
            let a = evolve_spectral(&dec, &rho, &times).unwrap();
            let b = evolve_ode(&p, &rho, &times).unwrap();
            for (x, y) in a.states.iter().zip(&b.states) {
                assert!(trace_norm(&(x.matrix() - y.matrix())) < 1e-7);
            }
        }
    }

    #[test]
    fn spectral_trajectory_basics() {
        let dec = SpectralDecomposition::from_params(&ModelParams::reference());
        let rho = DensityMatrix::basis(0);
        let times = default_grid(&dec);
        assert_eq!(times.len(), 200);
        let mut with_zero = vec![0.0];
        with_zero.extend(&times);
        let traj = evolve_spectral(&dec, &rho, &with_zero).unwrap();
        assert!(crate::linalg::max_abs(&(traj.states[0].matrix() - rho.matrix())) < 1e-9);
        for o in &traj.overlaps {
            assert!((o.coefficients[0] - c(1.0, 0.0)).norm() < 1e-10);
        }
        assert!(traj.distances.last().unwrap().eq4 < 1e-3);

        let ss = traj.stationary.unwrap();
        let flat = evolve_spectral(&dec, &ss, &times).unwrap();
        assert!(flat.distances.iter().all(|d| d.eq4 < 1e-12));
    }

    #[test]
    fn fit_recovers_synthetic_rate() {
        let series: Vec<(f64, f64)> = (0..50).map(|k| (k as f64 * 0.2, 3.0 * (-0.3 * k as f64 * 0.2).exp())).collect();
        let fit = fit_decay_rate(&series, (0.0, 10.0)).unwrap();
        assert_abs_diff_eq!(fit.rate, -0.3, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.amplitude, 3.0, epsilon = 1e-9);
        assert!(fit_decay_rate(&[(0.0, 1.0), (1.0, 0.0)], (0.0, 1.0)).is_err());
        assert!(fit_decay_rate(&series, (100.0, 200.0)).is_err());
    }

    #[test]
    fn slow_overlap_decays_at_gap() {
        let dec = SpectralDecomposition::from_params(&ModelParams::reference());
        let times = linear_grid(0.0, 3.0 * dec.tau1, 60);
        let traj = evolve_spectral(&dec, &DensityMatrix::basis(0), &times).unwrap();
        let fit = fit_decay_rate(&traj.overlap_series(1), (0.0, 3.0 * dec.tau1)).unwrap();
        assert!((fit.rate / dec.eigenvalues[1].re - 1.0).abs() < 0.02);
    }

    #[test]
    fn rate_model_two_level() {
        let p = ModelParams::new(0.0, 2.0, 0.0015);
        let times = log_grid(0.01, 50.0, 60);
        let traj = rate_equation_evolve(&p, [1.0, 0.0, 0.0], &times).unwrap();
        let fixed = rate_model_stationary(&p).unwrap();
        let mut prev = f64::INFINITY;
        for pops in &traj.populations {
            assert_abs_diff_eq!(pops.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
            let d: f64 = pops.iter().zip(&fixed).map(|(a, b)| (a - b).abs()).sum();
            assert!(d <= prev + 1e-9, "{d} {prev}");
            prev = d;
        }
        assert!(rate_equation_evolve(&p, [0.5, 0.6, 0.0], &times).is_err());
        assert!(rate_matrix(&ModelParams::new(0.1, 2.0, 0.0)).is_err());
    }

    #[test]
    fn effective_matrix_limits() {
        let e = EffectiveDecayParams::new(0.0, 2.0).unwrap();
        let a = effective_model_matrix(&e);
        assert_eq!(a, Matrix3::from_diagonal(&Vector3::new(0.0, -2.0, -1.0)));
        let ev = effective_model_eigenvalues(&e);
        assert_eq!([ev[0].re, ev[1].re, ev[2].re], [0.0, -2.0, -1.0]);
    }

    #[test]
    fn effective_eigenvalues_match_numeric() {
        for (o, g) in [(1.0, 10.0), (1.0, 100.0), (3.0, 2.0), (0.4, 1.0)] {
            let e = EffectiveDecayParams::new(o, g).unwrap();
            let closed = effective_model_eigenvalues(&e);
            let numeric = effective_model_matrix(&e).complex_eigenvalues();
            for z in closed {
                let best = numeric.iter().map(|w| (w - z).norm()).fold(f64::INFINITY, f64::min);
                assert!(best < 1e-12, "{z} ({o}, {g})");
            }
        }
        let under = effective_model_eigenvalues(&EffectiveDecayParams::new(3.0, 2.0).unwrap());
        assert_abs_diff_eq!(under[0].re, -1.0, epsilon = 1e-15);
        assert!(under[0].im.abs() > 0.0 && (under[0] - under[1].conj()).norm() < 1e-15);
    }

    #[test]
    fn effective_rate_values() {
        let r = effective_decay_rate(&EffectiveDecayParams::new(1.0, 10.0).unwrap()).unwrap();
        assert_abs_diff_eq!(r.exact, (10.0 - 96f64.sqrt()) / 2.0, epsilon = 1e-14);
        assert!((r.relative_gap - 0.0101).abs() < 2e-4);
        let r = effective_decay_rate(&EffectiveDecayParams::new(1.0, 100.0).unwrap()).unwrap();
        assert!(r.relative_gap < 1.001e-4);
        assert!(matches!(
            effective_decay_rate(&EffectiveDecayParams::new(1.0, 1.5).unwrap()),
            Err(Error::Underdamped { .. })
        ));
    }
}
