//! Adaptive Dormand–Prince 5(4) integrator with dense-output-free stepping:
//! steps are clipped so that every requested output time is hit exactly.

use crate::error::{Error, Result};
use crate::linalg::{Mat3, C64};
use nalgebra::SVector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, max_steps: 2_000_000 }
    }
}

const C: [f64; 6] = [0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [0.2];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0];
const B: [f64; 6] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0];
// difference between the 5th and embedded 4th order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

type V<const N: usize> = SVector<f64, N>;

fn combo<const N: usize>(y: &V<N>, h: f64, coeffs: &[f64], ks: &[V<N>]) -> V<N> {
    let mut out = *y;
    for (a, k) in coeffs.iter().zip(ks) {
        if *a != 0.0 {
            out += k * (h * a);
        }
    }
    out
}

fn error_norm<const N: usize>(err: &V<N>, y0: &V<N>, y1: &V<N>, tol: &Tolerances) -> f64 {
    let mut acc = 0.0;
    for i in 0..N {
        let sc = tol.atol + tol.rtol * y0[i].abs().max(y1[i].abs());
        acc += (err[i] / sc).powi(2);
    }
    (acc / N as f64).sqrt()
}

/// Integrates `dy/dt = f(t, y)` from `(t0, y0)` and returns `y` at each of
/// `times` (non-decreasing, all `>= t0`).
pub fn integrate<const N: usize, F>(f: F, t0: f64, y0: V<N>, times: &[f64], tol: &Tolerances) -> Result<Vec<V<N>>>
where
    F: Fn(f64, &V<N>) -> V<N>,
{
    if times.iter().any(|t| !t.is_finite() || *t < t0) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParams("output times must be finite, sorted and >= t0".into()));
    }
    let mut out = Vec::with_capacity(times.len());
    let (mut t, mut y) = (t0, y0);
    let mut k1 = f(t, &y);
    let mut h = initial_step(&y, &k1, tol, times.last().map_or(0.0, |&tf| tf - t0));
    let mut steps = 0usize;

    for &target in times {
        while t < target {
            steps += 1;
            if steps > tol.max_steps {
                return Err(Error::TooManySteps(tol.max_steps));
            }
            let remaining = target - t;
            let clipped = h >= remaining;
            let step = if clipped { remaining } else { h };

            let k2 = f(t + C[0] * step, &combo(&y, step, &A2, &[k1]));
            let k3 = f(t + C[1] * step, &combo(&y, step, &A3, &[k1, k2]));
            let k4 = f(t + C[2] * step, &combo(&y, step, &A4, &[k1, k2, k3]));
            let k5 = f(t + C[3] * step, &combo(&y, step, &A5, &[k1, k2, k3, k4]));
            let k6 = f(t + C[4] * step, &combo(&y, step, &A6, &[k1, k2, k3, k4, k5]));
            let y_new = combo(&y, step, &B, &[k1, k2, k3, k4, k5, k6]);
            let k7 = f(t + step, &y_new);
            let err_vec = combo(&V::<N>::zeros(), step, &E, &[k1, k2, k3, k4, k5, k6, k7]);
            let err = error_norm(&err_vec, &y, &y_new, tol);

            if !err.is_finite() {
                return Err(Error::StepSizeUnderflow { t, h: step, err });
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 {
                t = if clipped { target } else { t + step };
                y = y_new;
                k1 = k7;
                // a clipped step says nothing about the step the controller wants
                if !clipped || factor < 1.0 {
                    h = step * factor;
                }
            } else {
                h = step * factor.min(1.0);
                if h <= 1e-14 * t.abs().max(1.0) {
                    return Err(Error::StepSizeUnderflow { t, h, err });
                }
            }
        }
        out.push(y);
    }
    Ok(out)
}

fn initial_step<const N: usize>(y: &V<N>, f0: &V<N>, tol: &Tolerances, span: f64) -> f64 {
    let sc = y.map(|v| tol.atol + tol.rtol * v.abs());
    let d0 = y.component_div(&sc).norm() / (N as f64).sqrt();
    let d1 = f0.component_div(&sc).norm() / (N as f64).sqrt();
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    if span > 0.0 {
        h.min(span)
    } else {
        h
    }
}

/// Real packing of a 3x3 complex matrix (real parts then imaginary parts).
pub fn pack(m: &Mat3) -> V<18> {
    V::<18>::from_fn(|k, _| if k < 9 { m[k].re } else { m[k - 9].im })
}

pub fn unpack(v: &V<18>) -> Mat3 {
    Mat3::from_fn(|i, j| {
        let k = i + 3 * j;
        C64::new(v[k], v[k + 9])
    })
}

/// Integrates a matrix ODE `dX/dt = f(X)` on 3x3 complex matrices.
pub fn integrate_matrix<F>(f: F, x0: &Mat3, times: &[f64], tol: &Tolerances) -> Result<Vec<Mat3>>
where
    F: Fn(&Mat3) -> Mat3,
{
    let ys = integrate(|_, y: &V<18>| pack(&f(&unpack(y))), 0.0, pack(x0), times, tol)?;
    Ok(ys.iter().map(unpack).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exponential_decay() {
        let times: Vec<f64> = (0..=10).map(|k| k as f64).collect();
        let ys = integrate(|_, y: &V<1>| -y * 0.3, 0.0, V::<1>::new(1.0), &times, &Tolerances::default()).unwrap();
        for (t, y) in times.iter().zip(&ys) {
            assert_relative_eq!(y[0], (-0.3 * t).exp(), max_relative = 1e-9);
        }
    }

    #[test]
    fn harmonic_oscillator_long_run() {
        let times = [0.0, 50.0, 100.0];
        let f = |_, y: &V<2>| V::<2>::new(y[1], -y[0]);
        let ys = integrate(f, 0.0, V::<2>::new(1.0, 0.0), &times, &Tolerances::default()).unwrap();
        assert!((ys[2][0] - 100f64.cos()).abs() < 1e-8);
        assert!((ys[2][1] + 100f64.sin()).abs() < 1e-8);
    }

    #[test]
    fn rejects_unsorted_times() {
        let r = integrate(|_, y: &V<1>| *y, 0.0, V::<1>::new(1.0), &[1.0, 0.5], &Tolerances::default());
        assert!(r.is_err());
    }

    #[test]
    fn step_budget_exhaustion() {
        let tol = Tolerances { max_steps: 3, ..Tolerances::default() };
        let r = integrate(|_, y: &V<2>| V::<2>::new(y[1], -y[0]), 0.0, V::<2>::new(1.0, 0.0), &[100.0], &tol);
        assert!(matches!(r, Err(Error::TooManySteps(3))));
    }

    #[test]
    fn blow_up_reports_underflow() {
        // y' = y^2 from y(0) = 1 diverges at t = 1
        let r = integrate(|_, y: &V<1>| y.component_mul(y), 0.0, V::<1>::new(1.0), &[2.0], &Tolerances::default());
        assert!(matches!(r, Err(Error::StepSizeUnderflow { .. }) | Err(Error::TooManySteps(_))));
    }

    #[test]
    fn pack_round_trip() {
        let m = Mat3::from_fn(|i, j| C64::new(i as f64, j as f64 - 0.5));
        assert_eq!(unpack(&pack(&m)), m);
    }
}
