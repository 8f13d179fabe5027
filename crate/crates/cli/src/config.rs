//! Flat TOML run configuration.

use crate::CliError;
use mpemba::model::{Convention, ModelParams};
use mpemba::tomography::DetectionModel;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Log,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialState {
    Zero,
    Two,
    Sme,
    Explicit,
}

impl InitialState {
    pub fn label(self) -> &'static str {
        match self {
            InitialState::Zero => "zero",
            InitialState::Two => "two",
            InitialState::Sme => "sme",
            InitialState::Explicit => "explicit",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Ω₁/2π in kHz; only used to echo physical units.
    pub omega1_khz: f64,
    pub omega2_ratio: f64,
    pub kappa1_ratio: f64,
    pub kappa2_ratio: f64,
    pub convention: String,
    pub t_min: f64,
    /// Defaults to `10 τ₁` when absent.
    pub t_max: Option<f64>,
    pub points: usize,
    pub spacing: Spacing,
    pub initial_state: InitialState,
    /// Amplitudes for `initial_state = "explicit"`; normalized on load.
    pub amplitudes_re: Option<[f64; 3]>,
    pub amplitudes_im: Option<[f64; 3]>,
    pub seed: u64,
    pub out: PathBuf,
    pub scan_min: f64,
    pub scan_max: f64,
    pub scan_points: usize,
    pub bracket_lo: Option<f64>,
    pub bracket_hi: Option<f64>,
    pub shots: u64,
    pub detection: String,
    pub resamples: usize,
    /// Evolution time at which `tomo simulate` samples the state.
    pub tomo_time: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = ModelParams::reference();
        Self {
            omega1_khz: 20.0,
            omega2_ratio: p.omega2_ratio,
            kappa1_ratio: p.kappa1_ratio,
            kappa2_ratio: p.kappa2_ratio,
            convention: Convention::MainText.as_str().into(),
            t_min: 1e-2,
            t_max: None,
            points: 200,
            spacing: Spacing::Log,
            initial_state: InitialState::Zero,
            amplitudes_re: None,
            amplitudes_im: None,
            seed: 0,
            out: PathBuf::from("out"),
            scan_min: 0.01,
            scan_max: 0.3,
            scan_points: 291,
            bracket_lo: None,
            bracket_hi: None,
            shots: 100_000,
            detection: DetectionModel::ThreeOutcome.as_str().into(),
            resamples: 200,
            tomo_time: 0.0,
        }
    }
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => bad(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| bad(e.to_string().trim_end().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.model_params()?;
        self.detection_model()?;
        if !(self.omega1_khz.is_finite() && self.omega1_khz > 0.0) {
            return Err(bad("omega1_khz must be positive"));
        }
        if !(self.t_min.is_finite() && self.t_min >= 0.0) {
            return Err(bad("t_min must be >= 0"));
        }
        if self.spacing == Spacing::Log && self.t_min <= 0.0 {
            return Err(bad("t_min must be > 0 for log spacing"));
        }
        if let Some(t) = self.t_max {
            if !(t.is_finite() && t > self.t_min) {
                return Err(bad("t_max must exceed t_min"));
            }
        }
        if self.points < 2 {
            return Err(bad("points must be >= 2"));
        }
        if !(self.scan_min > 0.0 && self.scan_max > self.scan_min && self.scan_points >= 2) {
            return Err(bad("need 0 < scan_min < scan_max and scan_points >= 2"));
        }
        match (self.bracket_lo, self.bracket_hi) {
            (None, None) => {}
            (Some(lo), Some(hi)) if lo > 0.0 && hi > lo => {}
            _ => return Err(bad("bracket_lo and bracket_hi must be given together with 0 < lo < hi")),
        }
        if self.shots == 0 {
            return Err(bad("shots must be >= 1"));
        }
        if self.resamples < 100 {
            return Err(bad("resamples must be >= 100"));
        }
        if !(self.tomo_time.is_finite() && self.tomo_time >= 0.0) {
            return Err(bad("tomo_time must be >= 0"));
        }
        let explicit = self.amplitudes_re.is_some() || self.amplitudes_im.is_some();
        if explicit != (self.initial_state == InitialState::Explicit) {
            return Err(bad("amplitudes_re/amplitudes_im are required with, and only with, initial_state = \"explicit\""));
        }
        Ok(())
    }

    pub fn convention(&self) -> Result<Convention, CliError> {
        self.convention.parse().map_err(|e: mpemba::Error| bad(e.to_string()))
    }

    pub fn detection_model(&self) -> Result<DetectionModel, CliError> {
        self.detection.parse().map_err(|e: mpemba::Error| bad(e.to_string()))
    }

    pub fn model_params(&self) -> Result<ModelParams, CliError> {
        let p = ModelParams::new(self.omega2_ratio, self.kappa1_ratio, self.kappa2_ratio).with_convention(self.convention()?);
        p.validate().map_err(|e| bad(e.to_string()))?;
        Ok(p)
    }

    /// Ω₁ in krad/s.
    pub fn omega1_angular_khz(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.omega1_khz
    }

    /// `key = value` lines of the resolved configuration, in declaration order.
    pub fn echo_lines(&self) -> Vec<String> {
        let value = toml::Value::try_from(self).expect("config serializes");
        let table = value.as_table().expect("config is a table");
        let mut lines: Vec<String> = Vec::new();
        // toml::Table keeps keys sorted, which is stable across runs
        for (k, v) in table {
            lines.push(format!("{k} = {v}"));
        }
        if self.t_max.is_none() {
            lines.push("t_max = auto (10 tau1)".into());
        }
        lines.push(format!("omega1 = 2pi x {} kHz = {} krad/s", self.omega1_khz, self.omega1_angular_khz()));
        lines
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_reference() {
        let cfg = RunConfig::parse("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.model_params().unwrap(), ModelParams::reference());
    }

    #[test]
    fn unknown_key_rejected() {
        let err = RunConfig::parse("omega2_ratio = 0.1\nkappa3 = 1\n").unwrap_err();
        assert!(err.to_string().contains("kappa3"), "{err}");
    }

    #[test]
    fn explicit_state_needs_amplitudes() {
        assert!(RunConfig::parse("initial_state = \"explicit\"").is_err());
        let ok = "initial_state = \"explicit\"\namplitudes_re = [1.0, 1.0, 0.0]\namplitudes_im = [0.0, 0.0, 0.0]";
        assert!(RunConfig::parse(ok).is_ok());
        assert!(RunConfig::parse("amplitudes_re = [1.0, 0.0, 0.0]").is_err());
    }

    #[test]
    fn invalid_values() {
        for text in ["kappa1_ratio = -1", "points = 1", "spacing = \"cubic\"", "convention = \"other\"", "t_min = 0"] {
            assert!(RunConfig::parse(text).is_err(), "{text}");
        }
        assert!(RunConfig::parse("t_min = 0\nspacing = \"linear\"").is_ok());
    }

    #[test]
    fn khz_echo() {
        let cfg = RunConfig::default();
        assert!((cfg.omega1_angular_khz() - 2.0 * std::f64::consts::PI * 20.0).abs() < 1e-12);
        assert!(cfg.echo_lines().iter().any(|l| l.starts_with("omega1 = 2pi x 20 kHz")));
    }
}
