//! Two-rotation preparation of arbitrary qutrit pure states.
//!
//! `U = A B` with `A` acting on {0, 1} and `B` on {0, 2}; each factor is
//! written as `P(α) Z(β+δ) R(γ, π/2 − 2δ)` and all diagonal phase gates are
//! commuted to the front, leaving `U = D · R₀₁(γ, φ) · R₀₂(γ', φ')` with a
//! diagonal `D` that is never applied physically. Its effect is absorbed by
//! shifting the drive phases during relaxation and the tomography pulse
//! phases by `φ_L1 = arg D₀₀ − arg D₁₁` and `φ_L2 = arg D₀₀ − arg D₂₂`.

use crate::error::{Error, Result};
use crate::linalg::{arg_or, c, cis, Mat3, C64};
use crate::model::{ModelParams, PureState};
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subspace {
    R01,
    R02,
}

impl Subspace {
    fn level(self) -> usize {
        match self {
            Subspace::R01 => 1,
            Subspace::R02 => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Subspace::R01 => "R01",
            Subspace::R02 => "R02",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationGate {
    pub subspace: Subspace,
    pub theta: f64,
    pub phase: f64,
}

impl RotationGate {
    pub fn new(subspace: Subspace, theta: f64, phase: f64) -> Self {
        Self { subspace, theta, phase }
    }

    /// `cos(x/2)` on the diagonal of the two-level block and
    /// `−i e^{∓iy} sin(x/2)` off the diagonal (upper sign above).
    pub fn matrix(&self) -> Mat3 {
        let j = self.subspace.level();
        let (s, co) = (0.5 * self.theta).sin_cos();
        let mut m = Mat3::identity();
        m[(0, 0)] = c(co, 0.0);
        m[(j, j)] = c(co, 0.0);
        m[(0, j)] = c(0.0, -s) * cis(-self.phase);
        m[(j, 0)] = c(0.0, -s) * cis(self.phase);
        m
    }
}

pub fn p_gate(sub: Subspace, x: f64) -> Mat3 {
    let mut m = Mat3::identity();
    m[(0, 0)] = cis(x);
    m[(sub.level(), sub.level())] = cis(x);
    m
}

pub fn z_gate(sub: Subspace, x: f64) -> Mat3 {
    let mut m = Mat3::identity();
    m[(0, 0)] = cis(-x);
    m[(sub.level(), sub.level())] = cis(x);
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhaseLedger {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub alpha_p: f64,
    pub beta_p: f64,
    pub gamma_p: f64,
    pub delta_p: f64,
    /// Axis phase of the physical R₀₁ pulse.
    pub phi: f64,
    /// Axis phase of the physical R₀₂ pulse.
    pub phi_prime: f64,
    pub phi_l1: f64,
    pub phi_l2: f64,
}

impl PhaseLedger {
    /// Builds the ledger from the `(γ, α, β, δ)` parameters of `A` and `B`.
    fn from_factors(a: (f64, f64, f64, f64), b: (f64, f64, f64, f64)) -> Self {
        let (gamma, alpha, beta, delta) = a;
        let (gamma_p, alpha_p, beta_p, delta_p) = b;
        let (b, bp) = (beta + delta, beta_p + delta_p);
        Self {
            alpha,
            beta,
            gamma,
            delta,
            alpha_p,
            beta_p,
            gamma_p,
            delta_p,
            phi: alpha_p - bp + FRAC_PI_2 - 2.0 * delta,
            phi_prime: FRAC_PI_2 - 2.0 * delta_p,
            phi_l1: alpha_p - 2.0 * b - bp,
            phi_l2: alpha - 2.0 * bp - b,
        }
    }

    /// Deferred diagonal `P₀₁(α) P₀₂(α') Z₀₁(β+δ) Z₀₂(β'+δ')`.
    pub fn deferred_phases(&self) -> Mat3 {
        p_gate(Subspace::R01, self.alpha)
            * p_gate(Subspace::R02, self.alpha_p)
            * z_gate(Subspace::R01, self.beta + self.delta)
            * z_gate(Subspace::R02, self.beta_p + self.delta_p)
    }

    fn fields(&self) -> [(&'static str, f64); 12] {
        [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("delta", self.delta),
            ("alpha_p", self.alpha_p),
            ("beta_p", self.beta_p),
            ("gamma_p", self.gamma_p),
            ("delta_p", self.delta_p),
            ("phi", self.phi),
            ("phi_prime", self.phi_prime),
            ("phi_L1", self.phi_l1),
            ("phi_L2", self.phi_l2),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateSequence {
    /// Physical pulses in matrix-product order `R₀₁ · R₀₂` (R₀₂ acts first).
    pub gates: [RotationGate; 2],
    pub ledger: PhaseLedger,
    pub target: PureState,
}

/// Factors the preparation of `(a, b, c)` as `U = A B`, `A` on {0,1}, `B` on {0,2}.
///
/// For `a = b = 0` the first factor is taken as the identity.
pub fn ab_factorize(target: &PureState) -> Result<(Mat3, Mat3)> {
    let v = PureState::new(*target.amplitudes())?.amplitudes().to_owned();
    let (a, b, cc) = (v[0], v[1], v[2]);
    let ap = (a.norm_sqr() + b.norm_sqr()).sqrt();
    let mut m_a = Mat3::identity();
    if ap > 0.0 {
        let s = c(1.0 / ap, 0.0);
        m_a[(0, 0)] = a * s;
        m_a[(0, 1)] = b.conj() * s;
        m_a[(1, 0)] = b * s;
        m_a[(1, 1)] = -a.conj() * s;
    }
    let mut m_b = Mat3::identity();
    m_b[(0, 0)] = c(ap, 0.0);
    m_b[(0, 2)] = cc.conj();
    m_b[(2, 0)] = cc;
    m_b[(2, 2)] = c(-ap, 0.0);
    Ok((m_a, m_b))
}

const ARG_EPS: f64 = 1e-15;

/// `(γ, α, β, δ)` of a two-level block `[[u00, u0j], [uj0, ujj]]`.
fn block_params(u00: C64, u0j: C64, uj0: C64, ujj: C64) -> (f64, f64, f64, f64) {
    let m = u00.norm();
    if m > 1.0 + 1e-12 {
        log::warn!("|U_11| = {m} exceeds 1; clamped");
    } else if m > 1.0 {
        log::debug!("|U_11| exceeds 1 by {:.3e}; clamped", m - 1.0);
    }
    let gamma = 2.0 * m.min(1.0).acos();
    if m <= ARG_EPS {
        // γ = π: only α ± (δ − β) are defined; fix δ = 0.
        let alpha = 0.5 * (arg_or(-u0j, 0.0) + arg_or(uj0, 0.0));
        let beta = arg_or(uj0, 0.0) - alpha;
        return (gamma, alpha, beta, 0.0);
    }
    let (a00, ajj) = (arg_or(u00, 0.0), arg_or(ujj, 0.0));
    let alpha = 0.5 * (a00 + ajj);
    // γ = 0: A_21 carries no phase; β = 0 by convention
    let beta = 0.5 * (arg_or(uj0, a00) - a00);
    let delta = -alpha + ajj - beta;
    (gamma, alpha, beta, delta)
}

pub fn rotation_params(a: &Mat3, b: &Mat3) -> PhaseLedger {
    PhaseLedger::from_factors(
        block_params(a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]),
        block_params(b[(0, 0)], b[(0, 2)], b[(2, 0)], b[(2, 2)]),
    )
}

/// `P(α) Z(β+δ) R(γ, π/2 − 2δ)` on the given subspace.
pub fn factor_matrix(sub: Subspace, gamma: f64, alpha: f64, beta: f64, delta: f64) -> Mat3 {
    p_gate(sub, alpha) * z_gate(sub, beta + delta) * RotationGate::new(sub, gamma, FRAC_PI_2 - 2.0 * delta).matrix()
}

pub fn compile_state_prep(target: &PureState) -> Result<GateSequence> {
    let (a, b) = ab_factorize(target)?;
    let ledger = rotation_params(&a, &b);
    let gates = [
        RotationGate::new(Subspace::R01, ledger.gamma, ledger.phi),
        RotationGate::new(Subspace::R02, ledger.gamma_p, ledger.phi_prime),
    ];
    Ok(GateSequence { gates, ledger, target: *target })
}

/// Product of the physical pulses, `R₀₁ · R₀₂`.
pub fn physical_unitary(seq: &GateSequence) -> Mat3 {
    seq.gates.iter().fold(Mat3::identity(), |acc, g| acc * g.matrix())
}

/// Full unitary including the deferred phase gates.
pub fn compose(seq: &GateSequence) -> Mat3 {
    seq.ledger.deferred_phases() * physical_unitary(seq)
}

/// Drive phases for relaxing the physically prepared state so that undoing
/// the deferred phases afterwards reproduces the evolution of `U|0⟩` under `p`.
pub fn frame_map(p: &ModelParams, ledger: &PhaseLedger) -> ModelParams {
    p.with_phases(p.phi + ledger.phi_l1, p.phi_prime + ledger.phi_l2)
}

/// Nine measurement bases: |0⟩, |1⟩, |2⟩, then (|0⟩+|1⟩), (|0⟩+i|1⟩),
/// (|0⟩+|2⟩), (|0⟩+i|2⟩), (|1⟩+|2⟩), (|1⟩+i|2⟩), each over √2.
pub const BASIS_LABELS: [&str; 9] = ["0", "1", "2", "0+1", "0+i1", "0+2", "0+i2", "1+2", "1+i2"];

pub fn basis_state(index: usize) -> Result<PureState> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let (i0, i1, ph) = match index {
        0..=2 => return Ok(PureState::basis(index)),
        3 => (0, 1, 0.0),
        4 => (0, 1, FRAC_PI_2),
        5 => (0, 2, 0.0),
        6 => (0, 2, FRAC_PI_2),
        7 => (1, 2, 0.0),
        8 => (1, 2, FRAC_PI_2),
        _ => return Err(Error::InvalidBasisIndex(index)),
    };
    let mut v = crate::linalg::Vec3::zeros();
    v[i0] = c(s, 0.0);
    v[i1] = cis(ph) * s;
    PureState::normalized(v)
}

/// Pulses, in time order, that rotate basis state `index` onto |0⟩ in the
/// frame of the physically prepared state.
pub fn tomography_rotation(index: usize, ledger: &PhaseLedger) -> Result<Vec<RotationGate>> {
    let (l1, l2) = (ledger.phi_l1, ledger.phi_l2);
    let chi = if index >= 3 && index.is_multiple_of(2) { FRAC_PI_2 } else { 0.0 };
    Ok(match index {
        0 => vec![],
        1 => vec![RotationGate::new(Subspace::R01, PI, l1)],
        2 => vec![RotationGate::new(Subspace::R02, PI, l2)],
        3 | 4 => vec![RotationGate::new(Subspace::R01, FRAC_PI_2, l1 + chi - FRAC_PI_2)],
        5 | 6 => vec![RotationGate::new(Subspace::R02, FRAC_PI_2, l2 + chi - FRAC_PI_2)],
        7 | 8 => vec![
            RotationGate::new(Subspace::R01, PI, l1),
            RotationGate::new(Subspace::R02, FRAC_PI_2, l2 + chi),
        ],
        _ => return Err(Error::InvalidBasisIndex(index)),
    })
}

/// Net unitary of pulses listed in time order.
pub fn pulse_unitary(pulses: &[RotationGate]) -> Mat3 {
    pulses.iter().fold(Mat3::identity(), |acc, g| g.matrix() * acc)
}

fn fmt12(x: f64) -> String {
    format!("{x:.11e}")
}

impl GateSequence {
    /// Line-oriented record; field order is fixed.
    pub fn to_text(&self) -> String {
        let mut s = String::from("# qutrit state preparation: gates applied right to left\n");
        let amps = self.target.amplitudes();
        let _ = writeln!(
            s,
            "target {} {} {} {} {} {}",
            fmt12(amps[0].re),
            fmt12(amps[0].im),
            fmt12(amps[1].re),
            fmt12(amps[1].im),
            fmt12(amps[2].re),
            fmt12(amps[2].im)
        );
        for g in &self.gates {
            let _ = writeln!(s, "gate {} theta={} phase={}", g.subspace.as_str(), fmt12(g.theta), fmt12(g.phase));
        }
        for (k, v) in self.ledger.fields() {
            let _ = writeln!(s, "ledger {k}={}", fmt12(v));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let err = |line: usize, msg: &str| Error::Parse { line, msg: msg.to_string() };
        let num = |line: usize, v: &str| v.parse::<f64>().map_err(|_| err(line, &format!("bad number '{v}'")));
        let mut target = None;
        let mut gates = Vec::new();
        let mut ledger_vals = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let raw = raw.trim();
            if raw.is_empty() || raw.starts_with('#') {
                continue;
            }
            let mut parts = raw.split_whitespace();
            match parts.next() {
                Some("target") => {
                    let v: Vec<f64> = parts.map(|p| num(line, p)).collect::<Result<_>>()?;
                    if v.len() != 6 {
                        return Err(err(line, "target needs 6 numbers"));
                    }
                    let amps = crate::linalg::Vec3::new(c(v[0], v[1]), c(v[2], v[3]), c(v[4], v[5]));
                    target = Some(PureState::normalized(amps)?);
                }
                Some("gate") => {
                    let sub = match parts.next() {
                        Some("R01") => Subspace::R01,
                        Some("R02") => Subspace::R02,
                        _ => return Err(err(line, "unknown subspace")),
                    };
                    let mut kv = [0.0; 2];
                    for (slot, key) in kv.iter_mut().zip(["theta", "phase"]) {
                        let field = parts.next().ok_or_else(|| err(line, "missing field"))?;
                        let v = field.strip_prefix(key).and_then(|r| r.strip_prefix('='));
                        *slot = num(line, v.ok_or_else(|| err(line, &format!("expected {key}=")))?)?;
                    }
                    gates.push(RotationGate::new(sub, kv[0], kv[1]));
                }
                Some("ledger") => {
                    let field = parts.next().ok_or_else(|| err(line, "missing field"))?;
                    let (k, v) = field.split_once('=').ok_or_else(|| err(line, "expected key=value"))?;
                    let expected = PhaseLedger::default().fields()[ledger_vals.len().min(11)].0;
                    if ledger_vals.len() >= 12 || k != expected {
                        return Err(err(line, &format!("unexpected ledger field '{k}'")));
                    }
                    ledger_vals.push(num(line, v)?);
                }
                Some(other) => return Err(err(line, &format!("unknown record '{other}'"))),
                None => {}
            }
        }
        let target = target.ok_or_else(|| err(0, "missing target"))?;
        if gates.len() != 2 || ledger_vals.len() != 12 {
            return Err(err(0, "expected 2 gates and 12 ledger fields"));
        }
        let l = &ledger_vals;
        let ledger = PhaseLedger {
            alpha: l[0],
            beta: l[1],
            gamma: l[2],
            delta: l[3],
            alpha_p: l[4],
            beta_p: l[5],
            gamma_p: l[6],
            delta_p: l[7],
            phi: l[8],
            phi_prime: l[9],
            phi_l1: l[10],
            phi_l2: l[11],
        };
        Ok(Self { gates: [gates[0], gates[1]], ledger, target })
    }
}
