use crate::config::{InitialState, RunConfig, Spacing};
use crate::output::{num, Bundle, Table};
use crate::CliError;
use mpemba::compiler::{compile_state_prep, compose, GateSequence};
use mpemba::dynamics::{asymptotic_distance_slope, evolve_ode, evolve_spectral, linear_grid, log_grid};
use mpemba::linalg::{trace_norm, Mat3, Vec3, C64};
use mpemba::model::{DensityMatrix, ModelParams, PureState};
use mpemba::mpemba::{recombined_sme_state, sme_state, SmeConstruction};
use mpemba::spectral::{
    classify_regime, coalescence_at_lep, find_lep, hermitian_recombination, lep_scan, locate_lep, SpectralDecomposition,
};
use mpemba::tomography::{mle_reconstruct, monte_carlo_errors_many, simulate_measurements, Statistic, TomographyRecord};
use std::path::{Path, PathBuf};

/// Regular decomposition, with a slow conjugate pair replaced by its
/// Hermitian recombination so that the exported overlaps are real.
pub fn decomposition(p: &ModelParams) -> Result<SpectralDecomposition, CliError> {
    let dec = SpectralDecomposition::from_params(p);
    if dec.is_defective() {
        return Err(mpemba::Error::Defective { condition: dec.condition }.into());
    }
    Ok(if dec.slow_mode_is_complex() { hermitian_recombination(&dec) } else { dec })
}

pub fn sme_for(dec: &SpectralDecomposition) -> Result<SmeConstruction, CliError> {
    Ok(if dec.recombined { recombined_sme_state(dec)? } else { sme_state(dec)? })
}

pub fn initial_state(cfg: &RunConfig, dec: &SpectralDecomposition) -> Result<DensityMatrix, CliError> {
    Ok(match cfg.initial_state {
        InitialState::Zero => DensityMatrix::basis(0),
        InitialState::Two => DensityMatrix::basis(2),
        InitialState::Sme => DensityMatrix::pure(&sme_for(dec)?.state),
        InitialState::Explicit => {
            let (re, im) = (cfg.amplitudes_re.unwrap_or_default(), cfg.amplitudes_im.unwrap_or_default());
            let v = Vec3::from_fn(|k, _| C64::new(re[k], im[k]));
            let psi = PureState::normalized(v).map_err(|e| CliError::Config(format!("amplitudes: {e}")))?;
            DensityMatrix::pure(&psi)
        }
    })
}

pub fn time_grid(cfg: &RunConfig, tau1: f64) -> Vec<f64> {
    let t_max = cfg.t_max.unwrap_or(10.0 * tau1).max(cfg.t_min * (1.0 + 1e-9));
    match cfg.spacing {
        Spacing::Log => log_grid(cfg.t_min, t_max, cfg.points),
        Spacing::Linear => linear_grid(cfg.t_min, t_max, cfg.points),
    }
}

/// Wall-clock microseconds of a dimensionless time.
fn microseconds(cfg: &RunConfig, t: f64) -> f64 {
    t * 1e3 / cfg.omega1_angular_khz()
}

pub fn spectrum(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let p = cfg.model_params()?;
    let dec = SpectralDecomposition::from_params(&p);
    let w = cfg.omega1_angular_khz();
    let mut b = Bundle::create(cfg, "spectrum")?;
    let mut t = Table::new(&["index", "re", "im", "re_krad_per_s", "im_krad_per_s", "mode_condition"]);
    for (i, z) in dec.eigenvalues.iter().enumerate() {
        t.push(vec![i.to_string(), num(z.re), num(z.im), num(z.re * w), num(z.im * w), num(dec.mode_conditions[i])]);
    }
    b.csv("spectrum.csv", &[], &t)?;

    let regime = classify_regime(&p);
    let lines = [
        ("gap", num(dec.gap)),
        ("gap_krad_per_s", num(dec.gap * w)),
        ("tau1", num(dec.tau1)),
        ("tau1_us", num(microseconds(cfg, dec.tau1))),
        ("tau2", num(dec.tau2)),
        ("tau2_us", num(microseconds(cfg, dec.tau2))),
        ("condition", num(dec.condition)),
        ("zero_multiplicity", dec.zero_multiplicity.to_string()),
        ("defective", dec.is_defective().to_string()),
        ("slow_mode_complex", dec.slow_mode_is_complex().to_string()),
        ("regime", regime.regime.as_str().to_string()),
        ("speedup_factor", num(regime.speedup_factor)),
        ("lep_ratio", regime.lep_ratio.map_or("none".into(), num)),
    ];
    let body: String = lines.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
    b.text("spectrum.txt", &body, true)?;
    for (k, v) in &lines {
        b.result(k, v.as_str());
    }
    let dir = b.finish()?;
    if dec.is_defective() {
        return Err(CliError::Numerical(format!(
            "defective decomposition (condition {:.3e}); outputs written to {}",
            dec.condition,
            dir.display()
        )));
    }
    Ok(dir)
}

/// Column names `rho00_re, rho00_im, rho01_re, ...` in row-major order.
pub fn rho_columns() -> Vec<String> {
    let mut cols = Vec::new();
    for i in 0..3 {
        for j in 0..3 {
            cols.push(format!("rho{i}{j}_re"));
            cols.push(format!("rho{i}{j}_im"));
        }
    }
    cols
}

pub fn rho_cells(m: &Mat3) -> Vec<f64> {
    let mut out = Vec::with_capacity(18);
    for i in 0..3 {
        for j in 0..3 {
            out.push(m[(i, j)].re);
            out.push(m[(i, j)].im);
        }
    }
    out
}

pub fn evolve(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let p = cfg.model_params()?;
    let dec = decomposition(&p)?;
    let rho = initial_state(cfg, &dec)?;
    let mut times = time_grid(cfg, dec.tau1);
    if times[0] > 0.0 {
        times.insert(0, 0.0);
    }
    let spec = evolve_spectral(&dec, &rho, &times)?;
    let ode = evolve_ode(&p, &rho, &times)?;

    let mut cols: Vec<String> = vec!["t".into(), "t_us".into()];
    cols.extend(rho_columns());
    cols.extend(["p0", "p1", "p2"].map(String::from));
    cols.extend((1..9).map(|i| format!("c{i}_abs")));
    cols.extend((1..9).map(|i| format!("c{i}_arg")));
    cols.extend(["d_eq4", "d_frobenius", "d_bures", "d_trace", "ode_trace_dist"].map(String::from));
    let mut table = Table::new(&cols);
    let mut worst = 0.0f64;
    for k in 0..times.len() {
        let m = spec.states[k].matrix();
        let ode_dist = trace_norm(&(m - ode.states[k].matrix()));
        worst = worst.max(ode_dist);
        let mut row = vec![times[k], microseconds(cfg, times[k])];
        row.extend(rho_cells(m));
        row.extend(spec.states[k].populations());
        let c = &spec.overlaps[k].coefficients;
        row.extend((1..9).map(|i| c[i].norm()));
        row.extend((1..9).map(|i| c[i].arg()));
        let d = spec.distances[k];
        row.extend([d.eq4, d.frobenius, d.bures, d.trace, ode_dist]);
        table.push_f64(&row);
    }
    let label = cfg.initial_state.label();
    let mut b = Bundle::create(cfg, "evolve")?;
    b.csv(&format!("trajectory_{label}.csv"), &[format!("initial_state = {label}")], &table)?;
    b.result("initial_state", label);
    b.result("max_ode_trace_dist", worst);
    b.result("re_lambda1", dec.eigenvalues[1].re);
    b.result("re_lambda2", dec.eigenvalues[2].re);
    if !dec.recombined {
        let mode = if cfg.initial_state == InitialState::Sme { 2 } else { 1 };
        if let Ok(fit) = asymptotic_distance_slope(&dec, &rho, mode) {
            b.result("asymptotic_slope", fit.rate);
        }
    }
    b.finish()
}

pub fn lep_scan_cmd(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let p = cfg.model_params()?;
    let ratios = linear_grid(cfg.scan_min, cfg.scan_max, cfg.scan_points);
    let zero = lep_scan(&p, &ratios, &DensityMatrix::basis(0))?;
    let two = lep_scan(&p, &ratios, &DensityMatrix::basis(2))?;
    let mut t = Table::new(&[
        "ratio",
        "l1_re",
        "l1_im",
        "l2_re",
        "l2_im",
        "c1_abs_zero",
        "c2_abs_zero",
        "c1_abs_two",
        "c2_abs_two",
        "condition",
        "high_condition",
    ]);
    for (a, b) in zero.iter().zip(&two) {
        t.push(vec![
            num(a.ratio),
            num(a.lambda1.re),
            num(a.lambda1.im),
            num(a.lambda2.re),
            num(a.lambda2.im),
            num(a.c1.norm()),
            num(a.c2.norm()),
            num(b.c1.norm()),
            num(b.c2.norm()),
            num(a.condition),
            a.high_condition.to_string(),
        ]);
    }
    let mut b = Bundle::create(cfg, "lep_scan")?;
    b.csv("lep_scan.csv", &[], &t)?;
    b.result("flagged_rows", zero.iter().filter(|r| r.high_condition).count());
    b.finish()
}

pub fn lep_locate_cmd(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let p = cfg.model_params()?;
    let lep = match (cfg.bracket_lo, cfg.bracket_hi) {
        (Some(lo), Some(hi)) => locate_lep(&p, (lo, hi)).map_err(|e| CliError::Config(e.to_string()))?,
        _ => find_lep(&p).ok_or_else(|| CliError::Numerical("no exceptional point in Omega2/Omega1 in [1e-3, 1e2]".into()))?,
    };
    let offset = 1e-4;
    let mut t = Table::new(&["rho_in", "lep_ratio", "offset", "gap_below", "gap_above", "extrapolated"]);
    let mut b = Bundle::create(cfg, "lep_locate")?;
    for (label, k) in [("zero", 0), ("two", 2)] {
        let chk = coalescence_at_lep(&p, lep, &DensityMatrix::basis(k), offset);
        t.push(vec![
            label.into(),
            num(lep),
            num(offset),
            num(chk.below[0]),
            num(chk.above[0]),
            num(chk.extrapolated()),
        ]);
        b.result(&format!("coalescence_extrapolated_{label}"), chk.extrapolated());
    }
    b.csv("lep.csv", &[], &t)?;
    b.result("lep_ratio", lep);
    b.result("lep_omega2_khz", lep * cfg.omega1_khz);
    b.finish()
}

fn parse_amplitudes(literal: &str) -> Result<PureState, CliError> {
    let parts: Vec<&str> = literal.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(CliError::Config(format!("state literal needs 3 comma-separated amplitudes, got '{literal}'")));
    }
    let mut v = Vec3::zeros();
    for (k, s) in parts.iter().enumerate() {
        v[k] = s.replace(' ', "").parse::<C64>().map_err(|e| CliError::Config(format!("amplitude '{s}': {e}")))?;
    }
    PureState::normalized(v).map_err(|e| CliError::Config(e.to_string()))
}

/// `max_k |(U|0⟩)_k − e^{iθ} ψ_k|` minimized over the global phase θ.
pub fn recomposition_error(u: &Mat3, target: &PureState) -> f64 {
    let col: Vec3 = u.column(0).into();
    let psi = target.amplitudes();
    let ov = psi.dotc(&col);
    let phase = if ov.norm() > 0.0 { ov / ov.norm() } else { C64::new(1.0, 0.0) };
    (col - psi * phase).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn compile(cfg: &RunConfig, literal: &str, verify: bool) -> Result<PathBuf, CliError> {
    let target = if literal.eq_ignore_ascii_case("sme") {
        sme_for(&decomposition(&cfg.model_params()?)?)?.state
    } else {
        parse_amplitudes(literal)?
    };
    let seq = compile_state_prep(&target)?;
    let text = seq.to_text();
    let err = recomposition_error(&compose(&seq), &target);

    let mut t = Table::new(&["order", "subspace", "theta", "phase"]);
    for (k, g) in seq.gates.iter().rev().enumerate() {
        t.push(vec![k.to_string(), g.subspace.as_str().into(), num(g.theta), num(g.phase)]);
    }
    let mut b = Bundle::create(cfg, "compile")?;
    b.text("gates.txt", &text, false)?;
    let amps = target.amplitudes();
    let echo: Vec<String> = (0..3).map(|k| format!("target_{k} = {} {}", num(amps[k].re), num(amps[k].im))).collect();
    b.csv("pulses.csv", &echo, &t)?;
    b.result("recomposition_error", err);
    b.result("physical_rotations", seq.gates.len());
    let dir = b.finish()?;

    if verify {
        let reread = std::fs::read_to_string(dir.join("gates.txt"))?;
        let parsed = GateSequence::from_text(&reread)?;
        let err2 = recomposition_error(&compose(&parsed), &target);
        if err2 > 1e-10 {
            return Err(CliError::Numerical(format!("verification failed: recomposition error {err2:.3e} > 1e-10")));
        }
        log::info!("verified: recomposition error {err2:.3e}");
    }
    Ok(dir)
}

pub fn tomo_simulate(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let p = cfg.model_params()?;
    let dec = decomposition(&p)?;
    let rho0 = initial_state(cfg, &dec)?;
    let rho = if cfg.tomo_time > 0.0 {
        evolve_spectral(&dec, &rho0, &[cfg.tomo_time])?.states[0]
    } else {
        rho0
    };
    let rec = simulate_measurements(&rho, cfg.shots, cfg.seed, cfg.detection_model()?)?;
    let mut b = Bundle::create(cfg, "tomo_simulate")?;
    b.text("record.txt", &rec.to_text(), false)?;
    let mut t = Table::new(&rho_columns());
    t.push_f64(&rho_cells(rho.matrix()));
    b.csv("truth.csv", &[format!("tomo_time = {}", num(cfg.tomo_time))], &t)?;
    b.finish()
}

pub fn tomo_reconstruct(cfg: &RunConfig, record: &Path) -> Result<PathBuf, CliError> {
    let text = std::fs::read_to_string(record).map_err(|e| CliError::Config(format!("{}: {e}", record.display())))?;
    let rec = TomographyRecord::from_text(&text).map_err(|e| CliError::Config(format!("{}: {e}", record.display())))?;
    let fit = mle_reconstruct(&rec)?;
    let stats = [Statistic::Population(0), Statistic::Population(1), Statistic::Population(2), Statistic::Purity];
    let names = ["p0", "p1", "p2", "purity"];
    let mc = monte_carlo_errors_many(&rec, cfg.resamples, &stats, cfg.seed)?;

    let mut b = Bundle::create(cfg, "tomo_reconstruct")?;
    let mut t = Table::new(&rho_columns());
    t.push_f64(&rho_cells(fit.state.matrix()));
    let echo = vec![format!("record = {}", record.display()), format!("shots_per_basis = {}", rec.shots_per_basis)];
    b.csv("state.csv", &echo, &t)?;
    let mut e = Table::new(&["statistic", "value", "mc_mean", "mc_std", "resamples", "unconverged"]);
    for ((name, s), m) in names.iter().zip(&stats).zip(&mc) {
        e.push(vec![
            name.to_string(),
            num(s.evaluate(&fit.state)),
            num(m.mean),
            num(m.std),
            m.resamples.to_string(),
            m.unconverged.to_string(),
        ]);
    }
    b.csv("estimates.csv", &echo, &e)?;
    b.result("iterations", fit.iterations);
    b.result("converged", fit.converged);
    b.result("log_likelihood", fit.log_likelihood);
    b.finish()
}
