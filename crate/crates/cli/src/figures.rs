//! Theory-curve bundles for each figure panel.

use crate::commands::{decomposition, sme_for, time_grid};
use crate::config::RunConfig;
use crate::output::{num, Bundle, Table};
use crate::CliError;
use clap::ValueEnum;
use mpemba::dynamics::{
    asymptotic_distance_slope, evolve_spectral, linear_grid, rate_equation_evolve, Trajectory,
};
use mpemba::model::{build_liouvillian, DensityMatrix, ModelParams};
use mpemba::mpemba::rotated_state;
use mpemba::spectral::{find_lep, lep_scan, liouvillian_spectrum, overlaps, SpectralDecomposition};
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FigureName {
    Fig1e,
    Fig1f,
    Fig1g,
    Fig2,
    Fig3,
    S2,
    S3,
    S4,
}

impl FigureName {
    fn as_str(self) -> &'static str {
        match self {
            FigureName::Fig1e => "fig1e",
            FigureName::Fig1f => "fig1f",
            FigureName::Fig1g => "fig1g",
            FigureName::Fig2 => "fig2",
            FigureName::Fig3 => "fig3",
            FigureName::S2 => "s2",
            FigureName::S3 => "s3",
            FigureName::S4 => "s4",
        }
    }
}

const STATES: [&str; 3] = ["zero", "two", "sme"];

/// |0⟩, |2⟩ and the sME state for a regular decomposition.
fn reference_states(dec: &SpectralDecomposition) -> Result<[DensityMatrix; 3], CliError> {
    Ok([DensityMatrix::basis(0), DensityMatrix::basis(2), DensityMatrix::pure(&sme_for(dec)?.state)])
}

fn trajectories(dec: &SpectralDecomposition, times: &[f64]) -> Result<Vec<Trajectory>, CliError> {
    reference_states(dec)?.iter().map(|rho| Ok(evolve_spectral(dec, rho, times)?)).collect()
}

pub fn run(cfg: &RunConfig, name: FigureName) -> Result<PathBuf, CliError> {
    let mut b = Bundle::create(cfg, &format!("figure_{}", name.as_str()))?;
    b.result("figure", name.as_str());
    let p = cfg.model_params()?;
    match name {
        FigureName::Fig1e => fig1e(&p, &mut b)?,
        FigureName::Fig1f => distances_vs_time(cfg, &p, &mut b, true)?,
        FigureName::Fig1g => distances_vs_time(cfg, &p, &mut b, false)?,
        FigureName::Fig2 => fig2(cfg, &p, &mut b)?,
        FigureName::Fig3 => {
            ratio_panels(cfg, &p, &mut b, &[0.04, 0.16, 0.25], false)?;
            ratio_sweep(cfg, &p, &mut b)?;
        }
        FigureName::S2 => s2(cfg, &p, &mut b)?,
        FigureName::S3 => ratio_panels(cfg, &p, &mut b, &[0.04, 0.1, 0.16, 0.18, 0.25], false)?,
        FigureName::S4 => ratio_panels(cfg, &p, &mut b, &[0.04, 0.16, 0.25], true)?,
    }
    b.finish()
}

/// `|c₁|` of `cos s |φ₁⟩ − i sin s |φ₂⟩` over `s ∈ [0, π/2]`.
fn fig1e(p: &ModelParams, b: &mut Bundle) -> Result<(), CliError> {
    let dec = decomposition(p)?;
    let sme = sme_for(&dec)?;
    let mut t = Table::new(&["s", "c1_abs", "c1_re", "c1_im", "c1_hermitian"]);
    let grid = linear_grid(0.0, std::f64::consts::FRAC_PI_2, 401);
    let mut crossings = 0;
    let mut last: Option<f64> = None;
    for &s in &grid {
        let rho = DensityMatrix::pure(&rotated_state(&sme, s));
        let c1 = (dec.left_modes[1] * rho.matrix()).trace();
        // L₁ is a phase times the Hermitian rescaling, so this real projection carries the sign of c₁
        let signed = (sme.l1_hermitian * rho.matrix()).trace().re;
        if last.is_some_and(|prev: f64| prev.signum() != signed.signum()) {
            crossings += 1;
        }
        last = Some(signed);
        t.push_f64(&[s, c1.norm(), c1.re, c1.im, signed]);
    }
    b.csv("overlap_vs_angle.csv", &[], &t)?;
    let c_sme = overlaps(&dec, &DensityMatrix::pure(&sme.state))?.coefficients[1].norm();
    b.result("s_sme", sme.s);
    b.result("c1_abs_at_s_sme", c_sme);
    b.result("alpha1", sme.alpha1);
    b.result("alpha2", sme.alpha2);
    b.result("sign_changes", crossings);
    Ok(())
}

fn distances_vs_time(cfg: &RunConfig, p: &ModelParams, b: &mut Bundle, linear: bool) -> Result<(), CliError> {
    let dec = decomposition(p)?;
    let t_max = cfg.t_max.unwrap_or(10.0 * dec.tau1);
    let times = if linear { linear_grid(0.0, t_max, cfg.points) } else { time_grid(cfg, dec.tau1) };
    let trajs = trajectories(&dec, &times)?;
    let mut cols = vec!["t".to_string()];
    cols.extend(STATES.iter().map(|s| format!("d_{s}")));
    if !linear {
        cols.extend(STATES.iter().map(|s| format!("log10_d_{s}")));
    }
    let mut t = Table::new(&cols);
    for (k, &time) in times.iter().enumerate() {
        let d: Vec<f64> = trajs.iter().map(|tr| tr.distances[k].eq4).collect();
        let mut row = vec![time];
        row.extend(&d);
        if !linear {
            row.extend(d.iter().map(|v| v.log10()));
        }
        t.push_f64(&row);
    }
    b.csv("distance.csv", &[], &t)?;
    b.result("re_lambda1", dec.eigenvalues[1].re);
    b.result("re_lambda2", dec.eigenvalues[2].re);
    if !dec.recombined {
        let states = reference_states(&dec)?;
        for ((label, rho), mode) in STATES.iter().zip(&states).zip([1, 1, 2]) {
            b.result(&format!("slope_{label}"), asymptotic_distance_slope(&dec, rho, mode)?.rate);
        }
    }
    Ok(())
}

/// Populations on a log grid plus the overlap bars at `0, τ₂, τ₁`.
fn fig2(cfg: &RunConfig, p: &ModelParams, b: &mut Bundle) -> Result<(), CliError> {
    let dec = decomposition(p)?;
    let times = time_grid(cfg, dec.tau1);
    let trajs = trajectories(&dec, &times)?;
    let mut cols = vec!["t".to_string()];
    for s in STATES {
        cols.extend((0..3).map(|i| format!("p{i}_{s}")));
    }
    let mut t = Table::new(&cols);
    for (k, &time) in times.iter().enumerate() {
        let mut row = vec![time];
        for tr in &trajs {
            row.extend(tr.states[k].populations());
        }
        t.push_f64(&row);
    }
    b.csv("populations.csv", &[], &t)?;

    let stamps = [("0", 0.0), ("tau2", dec.tau2), ("tau1", dec.tau1)];
    let mut cols = vec!["state".to_string(), "stamp".into(), "t".into()];
    cols.extend((1..9).map(|i| format!("c{i}_abs")));
    let mut o = Table::new(&cols);
    for (label, rho) in STATES.iter().zip(reference_states(&dec)?) {
        let tr = evolve_spectral(&dec, &rho, &stamps.map(|s| s.1))?;
        for (k, (stamp, time)) in stamps.iter().enumerate() {
            let mut row = vec![label.to_string(), stamp.to_string(), num(*time)];
            row.extend((1..9).map(|i| num(tr.overlaps[k].coefficients[i].norm())));
            o.push(row);
        }
    }
    b.csv("overlap_bars.csv", &[], &o)?;
    Ok(())
}

/// Distances and slow-mode coefficients for each ratio. Below the exceptional
/// point `c1`, `c2` hold `|c_i|`; above it they hold the real recombined
/// coefficients.
fn ratio_panels(cfg: &RunConfig, p: &ModelParams, b: &mut Bundle, ratios: &[f64], bures: bool) -> Result<(), CliError> {
    let cols: &[&str] = if bures {
        &["ratio", "state", "t", "d_bures"]
    } else {
        &["ratio", "state", "t", "d_eq4", "c1", "c2", "c1_abs", "c2_abs"]
    };
    let mut t = Table::new(cols);
    for &r in ratios {
        let pr = p.with_omega2_ratio(r);
        let dec = decomposition(&pr)?;
        let times = time_grid(cfg, dec.tau1);
        let trajs = trajectories(&dec, &times)?;
        for (label, tr) in STATES.iter().zip(&trajs) {
            for (k, &time) in times.iter().enumerate() {
                let d = tr.distances[k];
                let c = &tr.overlaps[k].coefficients;
                let mut row = vec![num(r), label.to_string(), num(time)];
                if bures {
                    row.push(num(d.bures));
                } else {
                    let (c1, c2) = if dec.recombined { (c[1].re, c[2].re) } else { (c[1].norm(), c[2].norm()) };
                    row.extend([d.eq4, c1, c2, c[1].norm(), c[2].norm()].map(num));
                }
                t.push(row);
            }
        }
        b.result(&format!("recombined_{r}"), dec.recombined);
    }
    b.csv(if bures { "bures.csv" } else { "distance_overlaps.csv" }, &[], &t)?;
    Ok(())
}

/// Real parts of the spectrum and slow-pair overlaps along Ω₂/Ω₁.
fn ratio_sweep(cfg: &RunConfig, p: &ModelParams, b: &mut Bundle) -> Result<(), CliError> {
    let ratios = linear_grid(cfg.scan_min, cfg.scan_max, cfg.scan_points);
    let mut cols = vec!["ratio".to_string()];
    cols.extend((1..9).map(|i| format!("l{i}_re")));
    cols.extend(["l1_im", "l2_im"].map(String::from));
    let mut t = Table::new(&cols);
    for &r in &ratios {
        let vals = liouvillian_spectrum(&build_liouvillian(&p.with_omega2_ratio(r)));
        let mut row = vec![r];
        row.extend(vals[1..].iter().map(|z| z.re));
        row.extend([vals[1].im, vals[2].im]);
        t.push_f64(&row);
    }
    b.csv("spectrum_sweep.csv", &[], &t)?;

    let zero = lep_scan(p, &ratios, &DensityMatrix::basis(0))?;
    let two = lep_scan(p, &ratios, &DensityMatrix::basis(2))?;
    let mut o = Table::new(&["ratio", "c1_abs_zero", "c2_abs_zero", "c1_abs_two", "c2_abs_two"]);
    for (a, c) in zero.iter().zip(&two) {
        o.push_f64(&[a.ratio, a.c1.norm(), a.c2.norm(), c.c1.norm(), c.c2.norm()]);
    }
    b.csv("overlap_sweep.csv", &[], &o)?;
    if let Some(lep) = find_lep(p) {
        b.result("lep_ratio", lep);
    }
    Ok(())
}

/// Lindblad populations next to the population-only rate model.
fn s2(cfg: &RunConfig, p: &ModelParams, b: &mut Bundle) -> Result<(), CliError> {
    let dec = decomposition(p)?;
    let times = time_grid(cfg, dec.tau1);
    let mut cols = vec!["state".to_string(), "t".into()];
    cols.extend((0..3).map(|i| format!("lindblad_p{i}")));
    cols.extend((0..3).map(|i| format!("rate_p{i}")));
    let mut t = Table::new(&cols);
    for (label, rho) in STATES.iter().zip(reference_states(&dec)?) {
        let lind = evolve_spectral(&dec, &rho, &times)?;
        let pops = rho.populations();
        let sum: f64 = pops.iter().sum();
        let rate = rate_equation_evolve(p, pops.map(|v| v.max(0.0) / sum), &times)?;
        for (k, &time) in times.iter().enumerate() {
            let mut row = vec![label.to_string(), num(time)];
            row.extend(lind.states[k].populations().map(num));
            row.extend(rate.populations[k].map(num));
            t.push(row);
        }
    }
    b.csv("populations.csv", &[], &t)?;
    Ok(())
}
