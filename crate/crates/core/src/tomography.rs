//! Nine-basis qutrit tomography: measurement simulation, maximum-likelihood
//! reconstruction and parametric-bootstrap error bars.

use crate::compiler::{pulse_unitary, tomography_rotation, PhaseLedger, BASIS_LABELS};
use crate::error::{Error, Result};
use crate::linalg::{c, hermitian_part, ket_bra, trace_norm, Mat3};
use crate::model::DensityMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use std::fmt::Write as _;

pub const NUM_BASES: usize = 9;
pub const MLE_TOL: f64 = 1e-12;
pub const MLE_MAX_ITER: usize = 10_000;
/// Initial dilution `ε` in `ρ → (1 + εR) ρ (1 + εR)`; it halves whenever the
/// likelihood would drop and doubles after each accepted step.
const DILUTION: f64 = 0.5;
const MAX_DILUTION: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DetectionModel {
    /// Projective readout of all three levels after the basis rotation.
    #[default]
    ThreeOutcome,
    /// Fluorescence readout: |0⟩ (bright) versus {|1⟩, |2⟩} (dark).
    TwoOutcome,
}

impl DetectionModel {
    pub fn outcomes(self) -> usize {
        match self {
            DetectionModel::ThreeOutcome => 3,
            DetectionModel::TwoOutcome => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DetectionModel::ThreeOutcome => "three_outcome",
            DetectionModel::TwoOutcome => "two_outcome",
        }
    }
}

impl std::str::FromStr for DetectionModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "three_outcome" => Ok(DetectionModel::ThreeOutcome),
            "two_outcome" => Ok(DetectionModel::TwoOutcome),
            _ => Err(Error::InvalidParams(format!("unknown detection model '{s}'"))),
        }
    }
}

/// Measurement operators `{Π_{k,m}}`; each basis forms a resolution of identity.
pub fn povm(model: DetectionModel) -> Vec<Vec<Mat3>> {
    let ledger = PhaseLedger::default();
    (0..NUM_BASES)
        .map(|k| {
            let w = pulse_unitary(&tomography_rotation(k, &ledger).expect("valid basis index"));
            let proj = |m: usize| w.adjoint() * ket_bra(m, m) * w;
            match model {
                DetectionModel::ThreeOutcome => (0..3).map(proj).collect(),
                DetectionModel::TwoOutcome => {
                    let bright = proj(0);
                    vec![bright, Mat3::identity() - bright]
                }
            }
        })
        .collect()
}

/// Born probabilities per basis, clipped at 0 and renormalized.
pub fn probabilities(rho: &Mat3, model: DetectionModel) -> Vec<Vec<f64>> {
    povm(model).iter().map(|ops| born(rho, ops)).collect()
}

fn born(rho: &Mat3, ops: &[Mat3]) -> Vec<f64> {
    let raw: Vec<f64> = ops.iter().map(|p| (p * rho).trace().re.max(0.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|v| v / s).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TomographyRecord {
    pub shots_per_basis: u64,
    pub seed: u64,
    pub model: DetectionModel,
    /// `counts[k][m]`: outcome `m` in basis `k`.
    pub counts: Vec<Vec<u64>>,
}

fn multinomial(rng: &mut ChaCha20Rng, n: u64, probs: &[f64]) -> Vec<u64> {
    let mut out = vec![0; probs.len()];
    let mut left = n;
    let mut mass = 1.0;
    for (k, p) in probs.iter().enumerate() {
        if k + 1 == probs.len() {
            out[k] = left;
            break;
        }
        let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let draw = if left == 0 || q == 0.0 {
            0
        } else if q == 1.0 {
            left
        } else {
            Binomial::new(left, q).expect("valid binomial").sample(rng)
        };
        out[k] = draw;
        left -= draw;
        mass -= p;
    }
    out
}

fn sample_counts(rng: &mut ChaCha20Rng, shots: u64, probs: &[Vec<f64>]) -> Vec<Vec<u64>> {
    probs.iter().map(|p| multinomial(rng, shots, p)).collect()
}

pub fn simulate_measurements(rho: &DensityMatrix, shots: u64, seed: u64, model: DetectionModel) -> Result<TomographyRecord> {
    if shots == 0 {
        return Err(Error::InvalidParams("shots must be >= 1".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let counts = sample_counts(&mut rng, shots, &probabilities(rho.matrix(), model));
    Ok(TomographyRecord { shots_per_basis: shots, seed, model, counts })
}

impl TomographyRecord {
    pub fn validate(&self) -> Result<()> {
        if self.counts.len() != NUM_BASES {
            return Err(Error::IncompleteRecord(format!("{} of {NUM_BASES} bases present", self.counts.len())));
        }
        for (k, row) in self.counts.iter().enumerate() {
            if row.len() != self.model.outcomes() {
                return Err(Error::IncompleteRecord(format!("basis {k} has {} outcomes", row.len())));
            }
            let total: u64 = row.iter().sum();
            if total != self.shots_per_basis {
                return Err(Error::IncompleteRecord(format!(
                    "basis {k} counts sum to {total}, expected {}",
                    self.shots_per_basis
                )));
            }
        }
        Ok(())
    }

    pub fn frequencies(&self) -> Vec<Vec<f64>> {
        let n = self.shots_per_basis as f64;
        self.counts.iter().map(|row| row.iter().map(|&x| x as f64 / n).collect()).collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# qutrit tomography record\n");
        let _ = writeln!(s, "shots {}", self.shots_per_basis);
        let _ = writeln!(s, "seed {}", self.seed);
        let _ = writeln!(s, "model {}", self.model.as_str());
        for (label, row) in BASIS_LABELS.iter().zip(&self.counts) {
            let counts: Vec<String> = row.iter().map(u64::to_string).collect();
            let _ = writeln!(s, "basis {label} {}", counts.join(" "));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let err = |line: usize, msg: String| Error::Parse { line, msg };
        let int = |line: usize, v: &str| v.parse::<u64>().map_err(|_| err(line, format!("bad integer '{v}'")));
        let (mut shots, mut seed, mut model) = (None, None, None);
        let mut counts = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let raw = raw.trim();
            if raw.is_empty() || raw.starts_with('#') {
                continue;
            }
            let mut parts = raw.split_whitespace();
            let key = parts.next().unwrap_or_default();
            let rest: Vec<&str> = parts.collect();
            let single = || -> Result<&str> {
                match rest.as_slice() {
                    [v] => Ok(v),
                    _ => Err(err(line, format!("'{key}' takes one value"))),
                }
            };
            match key {
                "shots" => shots = Some(int(line, single()?)?),
                "seed" => seed = Some(int(line, single()?)?),
                "model" => model = Some(single()?.parse::<DetectionModel>().map_err(|e| err(line, e.to_string()))?),
                "basis" => {
                    let expected = BASIS_LABELS.get(counts.len()).copied().unwrap_or("<none>");
                    match rest.split_first() {
                        Some((label, vals)) if *label == expected => {
                            counts.push(vals.iter().map(|v| int(line, v)).collect::<Result<Vec<_>>>()?);
                        }
                        _ => return Err(err(line, format!("expected basis '{expected}'"))),
                    }
                }
                other => return Err(err(line, format!("unknown record '{other}'"))),
            }
        }
        let rec = TomographyRecord {
            shots_per_basis: shots.ok_or_else(|| err(0, "missing shots".into()))?,
            seed: seed.ok_or_else(|| err(0, "missing seed".into()))?,
            model: model.ok_or_else(|| err(0, "missing model".into()))?,
            counts,
        };
        rec.validate()?;
        Ok(rec)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MleResult {
    pub state: DensityMatrix,
    pub iterations: usize,
    pub converged: bool,
    pub log_likelihood: f64,
    /// False if any accepted iteration lowered the likelihood.
    pub monotone: bool,
}

fn log_likelihood(rho: &Mat3, ops: &[Vec<Mat3>], freqs: &[Vec<f64>]) -> f64 {
    let mut acc = 0.0;
    for (basis, f) in ops.iter().zip(freqs) {
        for (p_op, &w) in basis.iter().zip(f) {
            if w > 0.0 {
                acc += w * (p_op * rho).trace().re.max(1e-300).ln();
            }
        }
    }
    acc
}

fn r_operator(rho: &Mat3, ops: &[Vec<Mat3>], freqs: &[Vec<f64>]) -> Mat3 {
    let norm = freqs.len() as f64;
    let mut r = Mat3::zeros();
    for (basis, f) in ops.iter().zip(freqs) {
        for (p_op, &w) in basis.iter().zip(f) {
            if w > 0.0 {
                let p = (p_op * rho).trace().re.max(1e-300);
                r += p_op * c(w / (p * norm), 0.0);
            }
        }
    }
    r
}

/// Diluted `RρR` iteration on per-basis frequencies (each row sums to 1).
pub fn mle_from_frequencies(model: DetectionModel, freqs: &[Vec<f64>]) -> Result<MleResult> {
    if freqs.len() != NUM_BASES || freqs.iter().any(|r| r.len() != model.outcomes()) {
        return Err(Error::IncompleteRecord("frequency table must cover all 9 bases".into()));
    }
    mle_with_operators(&povm(model), freqs)
}

/// Diluted `RρR` iteration for arbitrary measurement settings: `ops[k]` is a
/// POVM and `freqs[k]` its observed frequencies.
pub fn mle_with_operators(ops: &[Vec<Mat3>], freqs: &[Vec<f64>]) -> Result<MleResult> {
    if ops.len() != freqs.len() || ops.iter().zip(freqs).any(|(o, f)| o.len() != f.len()) {
        return Err(Error::ShapeMismatch {
            expected: format!("{} settings", ops.len()),
            got: format!("{} frequency rows", freqs.len()),
        });
    }
    let mut rho = Mat3::identity() * c(1.0 / 3.0, 0.0);
    let mut ll = log_likelihood(&rho, ops, freqs);
    let mut monotone = true;
    let mut converged = false;
    let mut iterations = 0;
    let identity = Mat3::identity();
    let mut eps = DILUTION;
    while iterations < MLE_MAX_ITER {
        iterations += 1;
        let r = r_operator(&rho, ops, freqs);
        let (next, next_ll) = loop {
            let a = (identity + r * c(eps, 0.0)) * c(1.0 / (1.0 + eps), 0.0);
            let mut cand = hermitian_part(&(a * rho * a));
            cand /= cand.trace();
            let cand_ll = log_likelihood(&cand, ops, freqs);
            if cand_ll >= ll - 1e-15 * ll.abs().max(1.0) || eps < 1e-6 {
                break (cand, cand_ll);
            }
            eps *= 0.5;
        };
        if next_ll < ll - 1e-12 * ll.abs().max(1.0) {
            monotone = false;
        }
        eps = (eps * 2.0).min(MAX_DILUTION);
        let step = trace_norm(&(next - rho));
        rho = next;
        ll = next_ll;
        if step <= MLE_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("MLE did not converge within {MLE_MAX_ITER} iterations");
    }
    let state = DensityMatrix::with_tolerances(hermitian_part(&rho), 1e-12, 1e-10)?;
    Ok(MleResult { state, iterations, converged, log_likelihood: ll, monotone })
}

pub fn mle_reconstruct(rec: &TomographyRecord) -> Result<MleResult> {
    rec.validate()?;
    mle_from_frequencies(rec.model, &rec.frequencies())
}

/// Scalar functional of a reconstructed state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Statistic {
    Population(usize),
    /// Trace-norm distance to a reference matrix.
    DistanceEq4(Mat3),
    /// `|Tr[L ρ]|` for a left eigenmode `L`.
    OverlapMagnitude(Mat3),
    Fidelity(Mat3),
    Purity,
}

impl Statistic {
    pub fn evaluate(&self, rho: &DensityMatrix) -> f64 {
        let m = rho.matrix();
        match self {
            Statistic::Population(k) => m[(*k, *k)].re,
            Statistic::DistanceEq4(s) => trace_norm(&(m - s)),
            Statistic::OverlapMagnitude(l) => (l * m).trace().norm(),
            Statistic::Fidelity(s) => {
                let other = DensityMatrix::with_tolerances(*s, 1e-8, 1e-8);
                match other {
                    Ok(o) => crate::mpemba::fidelity(rho, &o),
                    Err(_) => f64::NAN,
                }
            }
            Statistic::Purity => (m * m).trace().re,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std: f64,
    pub resamples: usize,
    /// Resamples whose reconstruction hit the iteration cap.
    pub unconverged: usize,
}

/// Parametric bootstrap: counts are redrawn from the multinomial of the
/// observed frequencies, reconstructed, and the statistic's spread reported.
/// Resample `r` uses ChaCha stream `r` of `seed`.
pub fn monte_carlo_errors(rec: &TomographyRecord, resamples: usize, statistic: &Statistic, seed: u64) -> Result<McEstimate> {
    Ok(monte_carlo_errors_many(rec, resamples, std::slice::from_ref(statistic), seed)?[0])
}

/// Like [`monte_carlo_errors`], evaluating several statistics on the same resamples.
pub fn monte_carlo_errors_many(
    rec: &TomographyRecord,
    resamples: usize,
    statistics: &[Statistic],
    seed: u64,
) -> Result<Vec<McEstimate>> {
    if resamples < 100 {
        return Err(Error::InvalidParams(format!("need at least 100 resamples, got {resamples}")));
    }
    rec.validate()?;
    let freqs = rec.frequencies();
    let results: Vec<Result<(Vec<f64>, bool)>> = (0..resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let counts = sample_counts(&mut rng, rec.shots_per_basis, &freqs);
            let resampled = TomographyRecord { counts, ..rec.clone() };
            let fit = mle_reconstruct(&resampled)?;
            Ok((statistics.iter().map(|s| s.evaluate(&fit.state)).collect(), fit.converged))
        })
        .collect();
    let values: Vec<(Vec<f64>, bool)> = results.into_iter().collect::<Result<_>>()?;
    let n = values.len() as f64;
    let unconverged = values.iter().filter(|v| !v.1).count();
    Ok((0..statistics.len())
        .map(|k| {
            let mean = values.iter().map(|v| v.0[k]).sum::<f64>() / n;
            let var = values.iter().map(|v| (v.0[k] - mean).powi(2)).sum::<f64>() / (n - 1.0);
            McEstimate { mean, std: var.sqrt(), resamples, unconverged }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compiler::basis_state;
    use crate::linalg::max_abs;

    #[test]
    fn povm_resolves_identity() {
        for model in [DetectionModel::ThreeOutcome, DetectionModel::TwoOutcome] {
            for ops in povm(model) {
                let sum = ops.iter().fold(Mat3::zeros(), |a, b| a + b);
                assert!(max_abs(&(sum - Mat3::identity())) < 1e-12);
            }
        }
    }

    #[test]
    fn bright_outcome_is_basis_projector() {
        let rho = DensityMatrix::pure(&crate::model::PureState::normalized(crate::linalg::Vec3::new(
            c(0.5, 0.1),
            c(-0.3, 0.6),
            c(0.2, -0.4),
        ))
        .unwrap());
        let probs = probabilities(rho.matrix(), DetectionModel::TwoOutcome);
        for (k, p) in probs.iter().enumerate() {
            let b = basis_state(k).unwrap();
            let born = (b.amplitudes().adjoint() * rho.matrix() * b.amplitudes())[(0, 0)].re;
            assert!((p[0] - born).abs() < 1e-12);
        }
    }

    #[test]
    fn ground_state_counts() {
        let rec = simulate_measurements(&DensityMatrix::basis(0), 500, 7, DetectionModel::ThreeOutcome).unwrap();
        assert_eq!(rec.counts[0], vec![500, 0, 0]);
        rec.validate().unwrap();
        assert!(simulate_measurements(&DensityMatrix::basis(0), 0, 7, DetectionModel::ThreeOutcome).is_err());
    }

    #[test]
    fn deterministic_for_seed() {
        let rho = DensityMatrix::maximally_mixed();
        let a = simulate_measurements(&rho, 1000, 3, DetectionModel::ThreeOutcome).unwrap();
        let b = simulate_measurements(&rho, 1000, 3, DetectionModel::ThreeOutcome).unwrap();
        let d = simulate_measurements(&rho, 1000, 4, DetectionModel::ThreeOutcome).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, d);
    }

    #[test]
    fn text_round_trip() {
        let rec = simulate_measurements(&DensityMatrix::maximally_mixed(), 1234, 9, DetectionModel::TwoOutcome).unwrap();
        let text = rec.to_text();
        let back = TomographyRecord::from_text(&text).unwrap();
        assert_eq!(back, rec);
        assert_eq!(back.to_text(), text);
        let truncated: String = text.lines().take(8).map(|l| format!("{l}\n")).collect();
        assert!(matches!(TomographyRecord::from_text(&truncated), Err(Error::IncompleteRecord(_))));
    }

    #[test]
    fn incomplete_record_rejected() {
        let mut rec = simulate_measurements(&DensityMatrix::maximally_mixed(), 10, 1, DetectionModel::ThreeOutcome).unwrap();
        rec.counts.pop();
        assert!(matches!(mle_reconstruct(&rec), Err(Error::IncompleteRecord(_))));
    }

    #[test]
    fn exact_frequencies_recover_mixed_state() {
        let truth = Mat3::from_fn(|i, j| {
            let d = [0.5, 0.3, 0.2];
            if i == j {
                c(d[i], 0.0)
            } else if i < j {
                c(0.05 * (i + j) as f64, 0.03)
            } else {
                c(0.05 * (i + j) as f64, -0.03)
            }
        });
        let rho = DensityMatrix::new(truth).unwrap();
        let fit = mle_from_frequencies(DetectionModel::ThreeOutcome, &probabilities(rho.matrix(), DetectionModel::ThreeOutcome)).unwrap();
        assert!(fit.converged && fit.monotone);
        assert!(max_abs(&(fit.state.matrix() - truth)) < 1e-8);
    }

    #[test]
    fn bootstrap_needs_enough_resamples() {
        let rec = simulate_measurements(&DensityMatrix::maximally_mixed(), 100, 1, DetectionModel::ThreeOutcome).unwrap();
        assert!(monte_carlo_errors(&rec, 10, &Statistic::Purity, 1).is_err());
    }
}
