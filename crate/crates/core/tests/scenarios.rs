use mpemba::dynamics::{
    effective_decay_ode_fit, effective_decay_rate, effective_model_eigenvalues, effective_model_matrix, evolve_ode,
    evolve_spectral, linear_grid, log_grid, rate_model_spectrum, EffectiveDecayParams,
};
use mpemba::linalg::{c, max_abs};
use mpemba::model::{build_liouvillian, Convention, DensityMatrix, ModelParams, PureState};
use mpemba::mpemba::{recombined_sme_state, rotated_state, sme_state};
use mpemba::spectral::{
    classify_regime, classify_regime_with_lep, find_lep, hermitian_recombination, liouvillian_spectrum, locate_lep,
    overlaps, Regime, SpectralDecomposition,
};
use mpemba::Error;

const GOLDEN_LEP: f64 = 0.16637095820;

fn reference() -> ModelParams {
    ModelParams::reference()
}

#[test]
fn lep_matches_golden_value() {
    let lep = find_lep(&reference()).expect("exceptional point in range");
    assert!((lep - GOLDEN_LEP).abs() < 1e-6, "lep = {lep}");
}

#[test]
fn lep_is_bracket_independent() {
    let p = reference();
    let found: Vec<f64> =
        [(0.1, 0.2), (0.15, 0.17), (0.01, 0.3), (0.166, 0.167)].iter().map(|&b| locate_lep(&p, b).unwrap()).collect();
    for w in found.windows(2) {
        assert!((w[0] - w[1]).abs() < 1e-9, "{found:?}");
    }
    assert!(matches!(locate_lep(&p, (0.2, 0.3)), Err(Error::InvalidBracket(_))));
    assert!(matches!(locate_lep(&p, (0.01, 0.1)), Err(Error::InvalidBracket(_))));
}

#[test]
fn slow_pair_turns_complex_above_lep() {
    let below = liouvillian_spectrum(&build_liouvillian(&reference().with_omega2_ratio(0.16)));
    let above = liouvillian_spectrum(&build_liouvillian(&reference().with_omega2_ratio(0.25)));
    assert_eq!(below[1].im, 0.0);
    assert_eq!(below[2].im, 0.0);
    assert!(above[1].im.abs() > 1e-3);
    assert!((above[1] - above[2].conj()).norm() < 1e-10);
}

#[test]
fn recombined_coefficients_are_real_and_oscillate() {
    let p = reference().with_omega2_ratio(0.25);
    let dec = hermitian_recombination(&SpectralDecomposition::from_params(&p));
    assert!(dec.recombined);
    let period = 2.0 * std::f64::consts::PI / dec.eigenvalues[1].im.abs();
    let times = linear_grid(0.0, 2.0 * period, 400);
    let traj = evolve_spectral(&dec, &DensityMatrix::basis(0), &times).unwrap();
    let c1: Vec<f64> = traj.overlaps.iter().map(|o| o.coefficients[1].re).collect();
    assert!(traj.overlaps.iter().all(|o| o.coefficients[1].im.abs() < 1e-12));
    let flips = c1.windows(2).filter(|w| w[0].signum() != w[1].signum()).count();
    assert!(flips >= 3, "{flips} sign changes over two periods");
}

#[test]
fn recombined_sme_cancels_hermitian_slow_mode() {
    let p = reference().with_omega2_ratio(0.25);
    let raw = SpectralDecomposition::from_params(&p);
    assert!(matches!(sme_state(&raw), Err(Error::ComplexSlowMode { .. })));
    assert!(matches!(recombined_sme_state(&raw), Err(Error::InvalidState(_))));
    let dec = hermitian_recombination(&raw);
    let sme = recombined_sme_state(&dec).unwrap();
    let c = overlaps(&dec, &DensityMatrix::pure(&sme.state)).unwrap().coefficients;
    assert!(c[1].norm() < 1e-12, "c1' = {}", c[1]);
    assert!(c[2].norm() > 1e-3);
}

#[test]
fn regimes_across_the_exceptional_point() {
    let lep = find_lep(&reference()).unwrap();
    let strong = classify_regime(&reference().with_omega2_ratio(0.04));
    assert_eq!(strong.regime, Regime::Strong);
    assert!(strong.speedup_factor > 0.0);
    assert_eq!((strong.generic_modes.as_slice(), strong.sme_modes.as_slice()), (&[1][..], &[2][..]));

    let at = classify_regime_with_lep(&reference().with_omega2_ratio(lep), Some(lep));
    assert_eq!(at.regime, Regime::SuperStrong);
    assert_eq!(at.sme_modes, vec![3]);

    let weak = classify_regime(&reference().with_omega2_ratio(0.25));
    assert_eq!(weak.regime, Regime::WeakOrNone);
    assert_eq!(weak.speedup_factor, 0.0);
}

#[test]
fn sme_overlap_crosses_zero_once_along_rotation() {
    let dec = SpectralDecomposition::from_params(&reference());
    let sme = sme_state(&dec).unwrap();
    let signed: Vec<f64> = linear_grid(0.0, std::f64::consts::FRAC_PI_2, 201)
        .iter()
        .map(|&s| (sme.l1_hermitian * DensityMatrix::pure(&rotated_state(&sme, s)).matrix()).trace().re)
        .collect();
    let flips = signed.windows(2).filter(|w| w[0].signum() != w[1].signum()).count();
    assert_eq!(flips, 1);
    assert!(signed[0] < 0.0 && signed[200] > 0.0);
    let at = DensityMatrix::pure(&rotated_state(&sme, sme.s));
    assert!((sme.l1_hermitian * at.matrix()).trace().norm() < 1e-12);
}

#[test]
fn spectral_and_ode_agree_on_assorted_parameters() {
    let sets = [
        ModelParams::new(0.04, 1.0, 0.02),
        ModelParams::new(0.3, 2.5, 0.1).with_phases(0.7, 2.1),
        ModelParams::new(0.5, 0.4, 0.3).with_convention(Convention::SuppFactor2),
        ModelParams::new(0.12, 4.0, 0.005).with_phases(3.0, 0.2),
    ];
    let start = PureState::normalized(mpemba::linalg::Vec3::new(c(0.3, 0.1), c(-0.5, 0.4), c(0.2, -0.6))).unwrap();
    for p in sets {
        let dec = hermitian_recombination(&SpectralDecomposition::from_params(&p));
        let times = log_grid(1e-2, 5.0 * dec.tau1, 40);
        let rho = DensityMatrix::pure(&start);
        let a = evolve_spectral(&dec, &rho, &times).unwrap();
        let b = evolve_ode(&p, &rho, &times).unwrap();
        for (x, y) in a.states.iter().zip(&b.states) {
            assert!(max_abs(&(x.matrix() - y.matrix())) < 1e-7, "{p:?}");
        }
    }
}

#[test]
fn doubled_dissipator_equals_doubled_rates() {
    let p = ModelParams::new(0.2, 1.3, 0.07).with_phases(0.4, 1.1);
    let supp = build_liouvillian(&p.with_convention(Convention::SuppFactor2));
    let main = build_liouvillian(&ModelParams::new(0.2, 2.6, 0.14).with_phases(0.4, 1.1));
    assert!((supp.matrix - main.matrix).iter().all(|z| z.norm() < 1e-15));
}

#[test]
fn rate_model_misses_the_slow_coherent_mode() {
    let p = reference();
    let rates = rate_model_spectrum(&p).unwrap();
    assert!(rates[0].abs() < 1e-12);
    let gap = SpectralDecomposition::from_params(&p).gap;
    assert!((rates[1].abs() - gap).abs() / gap > 0.5, "rate {} vs gap {gap}", rates[1]);
}

#[test]
fn effective_decay_overdamped_and_underdamped() {
    let e = EffectiveDecayParams::new(0.1, 2.0).unwrap();
    let rate = effective_decay_rate(&e).unwrap();
    assert!(rate.relative_gap < 0.01);
    let fit = effective_decay_ode_fit(&e).unwrap();
    assert!((fit.rate - rate.exact).abs() / rate.exact < 1e-4, "{} vs {}", fit.rate, rate.exact);

    let under = EffectiveDecayParams::new(1.0, 0.5).unwrap();
    assert!(matches!(effective_decay_rate(&under), Err(Error::Underdamped { .. })));
    let mut numeric: Vec<_> = effective_model_matrix(&under).complex_eigenvalues().iter().copied().collect();
    for z in effective_model_eigenvalues(&under) {
        let k = (0..numeric.len()).min_by(|&a, &b| (numeric[a] - z).norm().total_cmp(&(numeric[b] - z).norm())).unwrap();
        assert!((numeric.remove(k) - z).norm() < 1e-12);
    }
}
