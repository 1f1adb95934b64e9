//! Euclidean single-vortex action and its dilute-gas saddle point.
//!
//! Velocities are measured in units of c1 (u = v_E/c1) and A = M L_x/c1 throughout.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionTerms {
    /// (A/u)√(1 + u²).
    pub action: f64,
    /// ln u from the 1/τ1 measure of the collective coordinate.
    pub entropy: f64,
}

impl ActionTerms {
    pub fn total(&self) -> f64 {
        self.action + self.entropy
    }
}

/// S = (M L_x/v_E)√(1 + v_E²/c1²), with v_E in the same units as c1.
pub fn action_constant_velocity(m_freq: f64, l_x: f64, v_e: f64, c1: f64) -> ActionTerms {
    let a = m_freq * l_x / c1;
    let u = v_e / c1;
    ActionTerms { action: a / u * (1.0 + u * u).sqrt(), entropy: u.ln() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstantonResult {
    /// Saddle velocity in units of c1.
    pub v_e_star: f64,
    pub tau1: f64,
    /// Pair creation time, estimated as 1/M.
    pub tau0: f64,
    /// Action at the saddle, without the ln v_E term.
    pub s_e: f64,
    /// ln v_E at the saddle (it enters the preexponent).
    pub entropy: f64,
    pub branch: String,
}

/// Minimise f over u ∈ [lo, hi] (log-spaced golden section), then polish the root of
/// the supplied derivative by bisection.
fn minimize_1d(f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64, lo: f64, hi: f64) -> Result<f64> {
    let g = |x: f64| f(x.exp());
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (g(c), g(d));
    while b - a > 1e-6 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = g(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = g(d);
        }
    }
    let (mut x0, mut x1) = ((a - 1e-3).exp(), (b + 1e-3).exp());
    let (s0, s1) = (df(x0), df(x1));
    if !(s0 < 0.0 && s1 > 0.0) {
        return Err(Error::Domain(format!(
            "saddle not bracketed in [{:.4e}, {:.4e}] (derivative signs {s0:e}, {s1:e})",
            x0, x1
        )));
    }
    while (x1 - x0) > 1e-13 * x1 {
        let m = 0.5 * (x0 + x1);
        if df(m) < 0.0 {
            x0 = m;
        } else {
            x1 = m;
        }
    }
    Ok(0.5 * (x0 + x1))
}

/// Saddle of (A/u)√(1 + u²) + ln u.
pub fn saddle(m_freq: f64, l_x: f64, c1: f64) -> Result<InstantonResult> {
    let a = m_freq * l_x / c1;
    if !(a > 1.0) {
        return Err(invalid(format!("M L_x/c1 = {a} must exceed 1")));
    }
    let f = |u: f64| a / u * (1.0 + u * u).sqrt() + u.ln();
    let df = |u: f64| 1.0 / u - a / (u * u * (1.0 + u * u).sqrt());
    let u = minimize_1d(f, df, 1e-3, 1e3 * a.sqrt().max(1.0))?;
    let terms = action_constant_velocity(m_freq, l_x, u * c1, c1);
    Ok(InstantonResult {
        v_e_star: u,
        tau1: l_x / (u * c1),
        tau0: 1.0 / m_freq,
        s_e: terms.action,
        entropy: terms.entropy,
        branch: "kinetic".into(),
    })
}

/// Closed-form saddle: u² = (√(1 + 4A²) − 1)/2.
pub fn saddle_velocity_exact(a: f64) -> f64 {
    (0.5 * ((1.0 + 4.0 * a * a).sqrt() - 1.0)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FermionCore {
    pub k_f: f64,
    pub omega0_0: f64,
    pub d: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveAction {
    pub leading: f64,
    pub kinetic: f64,
    pub fermion: f64,
    pub entropy: f64,
}

impl EffectiveAction {
    pub fn total(&self) -> f64 {
        self.leading + self.kinetic + self.fermion + self.entropy
    }
}

/// Large-v_E action with the longitudinal fermion term:
/// A + A/2u² + C L³k_F³ω0(0) d/(16 c1 u) + ln u.
pub fn effective_action(m_freq: f64, l_x: f64, v_e: f64, c1: f64, core: &FermionCore, c_coeff: f64) -> EffectiveAction {
    let a = m_freq * l_x / c1;
    let u = v_e / c1;
    EffectiveAction {
        leading: a,
        kinetic: a / (2.0 * u * u),
        fermion: fermion_strength(l_x, c1, core, c_coeff) / u,
        entropy: u.ln(),
    }
}

fn fermion_strength(l_x: f64, c1: f64, core: &FermionCore, c_coeff: f64) -> f64 {
    c_coeff * l_x.powi(3) * core.k_f.powi(3) * core.omega0_0 * core.d / (16.0 * c1)
}

/// d S_eff/du.
pub fn effective_action_slope(m_freq: f64, l_x: f64, v_e: f64, c1: f64, core: &FermionCore, c_coeff: f64) -> f64 {
    let a = m_freq * l_x / c1;
    let u = v_e / c1;
    let f = fermion_strength(l_x, c1, core, c_coeff);
    -a / (u * u * u) - f / (u * u) + 1.0 / u
}

pub fn effective_saddle(m_freq: f64, l_x: f64, c1: f64, core: &FermionCore, c_coeff: f64) -> Result<InstantonResult> {
    let a = m_freq * l_x / c1;
    if !(a > 1.0) {
        return Err(invalid(format!("M L_x/c1 = {a} must exceed 1")));
    }
    let fs = fermion_strength(l_x, c1, core, c_coeff);
    let s = |u: f64| effective_action(m_freq, l_x, u * c1, c1, core, c_coeff).total();
    let ds = |u: f64| effective_action_slope(m_freq, l_x, u * c1, c1, core, c_coeff);
    let hi = 1e3 * (a.sqrt() + fs).max(1.0);
    let u = minimize_1d(s, ds, 1e-3, hi)?;
    let e = effective_action(m_freq, l_x, u * c1, c1, core, c_coeff);
    Ok(InstantonResult {
        v_e_star: u,
        tau1: l_x / (u * c1),
        tau0: 1.0 / m_freq,
        s_e: e.leading + e.kinetic + e.fermion,
        entropy: e.entropy,
        branch: if e.fermion > e.kinetic { "fermion" } else { "kinetic" }.into(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LongitudinalAction {
    /// (d/16) L_x² k_F³ ω0(0) τ.
    pub value: f64,
    /// (k_F L_x)²(Δ/ε_F)²/64, when Δ and ε_F are supplied.
    pub estimate: Option<f64>,
}

pub fn longitudinal_fermion_action(
    l_x: f64,
    k_f: f64,
    omega0_0: f64,
    tau: f64,
    d: f64,
    gap_over_eps_f: Option<f64>,
) -> LongitudinalAction {
    LongitudinalAction {
        value: d / 16.0 * l_x * l_x * k_f.powi(3) * omega0_0 * tau,
        estimate: gap_over_eps_f.map(|r| (k_f * l_x).powi(2) * r * r / 64.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransversePhase {
    pub real: f64,
    /// (k_F³ d/3π) L_x y.
    pub imag: f64,
    /// Relative size (ω0 τ1)² of the next term.
    pub correction_scale: f64,
}

pub fn transverse_phase(l_x: f64, y: f64, k_f: f64, d: f64, omega0_0: f64, tau1: f64) -> TransversePhase {
    TransversePhase {
        real: 0.0,
        imag: k_f.powi(3) * d / (3.0 * PI) * l_x * y,
        correction_scale: (omega0_0 * tau1).powi(2),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MagnusCompensation {
    pub k_f: f64,
    pub fractional_shift: f64,
}

/// k_F at which k_F³d/3π equals the Magnus coefficient.
pub fn magnus_compensating_kf(k_f_outside: f64, magnus_coefficient: f64, d: f64) -> Result<MagnusCompensation> {
    if !(magnus_coefficient > 0.0) {
        return Err(Error::Domain(format!("Magnus coefficient must be positive, got {magnus_coefficient}")));
    }
    if !(d > 0.0 && k_f_outside > 0.0) {
        return Err(invalid("k_f_outside and d must be positive"));
    }
    let k_f = (3.0 * PI * magnus_coefficient / d).cbrt();
    Ok(MagnusCompensation { k_f, fractional_shift: k_f / k_f_outside - 1.0 })
}

/// (1/c1)∫M(x)dx for M sampled at x_i = i L_x/n on one period.
pub fn path_averaged_action(m_of_x: &[f64], l_x: f64, c1: f64) -> Result<f64> {
    if m_of_x.is_empty() {
        return Err(invalid("empty mass profile"));
    }
    if let Some(v) = m_of_x.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::Domain(format!("mass profile has a negative sample {v}")));
    }
    // periodic trapezoid rule: spectrally accurate for smooth periodic profiles
    Ok(m_of_x.iter().sum::<f64>() * l_x / (m_of_x.len() as f64 * c1))
}
