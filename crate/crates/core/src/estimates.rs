//! Order-of-magnitude conversion from film parameters (Gaussian units) to the model's
//! scales, and the operating-window inequalities.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::params::{MaterialParams, PhysicalConstants};

/// How many times larger a quantity must be to count as "much larger".
pub const MUCH_GREATER: f64 = 5.0;

/// ħM0 ~ e²d/(16α²δ²), in erg.
pub fn estimate_m0(mat: &MaterialParams, consts: &PhysicalConstants) -> f64 {
    consts.e * consts.e * mat.d / (16.0 * consts.alpha_em.powi(2) * mat.delta_london.powi(2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VortexMass {
    /// ħ²d/(16e²ξ²), in g.
    pub electromagnetic: f64,
    /// ħM0/c1².
    pub from_frequency: f64,
}

pub fn estimate_vortex_mass(mat: &MaterialParams, consts: &PhysicalConstants) -> VortexMass {
    let c1 = estimate_c1(mat, consts);
    VortexMass {
        electromagnetic: consts.hbar.powi(2) * mat.d / (16.0 * consts.e * consts.e * mat.xi * mat.xi),
        from_frequency: estimate_m0(mat, consts) / (c1 * c1),
    }
}

/// c1 ~ (ξ/δ)c, in cm/s.
pub fn estimate_c1(mat: &MaterialParams, consts: &PhysicalConstants) -> f64 {
    mat.xi / mat.delta_london * consts.c
}

/// λ ~ 16α ξδ/d, in cm.
pub fn estimate_lambda(mat: &MaterialParams, consts: &PhysicalConstants) -> f64 {
    16.0 * consts.alpha_em * mat.xi * mat.delta_london / mat.d
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    /// Ratio of the large side to the small side of the inequality.
    pub margin: f64,
    pub required: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: &str, margin: f64, required: f64) -> Self {
        Self { name: name.into(), margin, required, pass: margin >= required }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub lambda_compton: f64,
    pub m0_phys: f64,
    pub c1_phys: f64,
    pub m_vortex: f64,
    pub ratio_lx_lambda: f64,
    pub gap_reduction: f64,
    pub gap_reduced: f64,
    pub xi_reduced: f64,
    pub t_p_bound_quasiparticle: f64,
    pub t_p_bound_vortex: f64,
    pub checks: Vec<Check>,
}

impl ConditionReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ConditionOptions {
    /// Use this gap reduction instead of √(L_x/λ).
    pub gap_reduction_override: Option<f64>,
    /// Multiplies M0, e.g. for the ln(L_x/ξ̄) enhancement from long-range interaction.
    pub m0_log_factor: Option<f64>,
}

pub fn check_conditions(
    mat: &MaterialParams,
    consts: &PhysicalConstants,
    l_x: f64,
    t_p: f64,
    opts: &ConditionOptions,
) -> ConditionReport {
    let c1 = estimate_c1(mat, consts);
    let m0 = estimate_m0(mat, consts) * opts.m0_log_factor.unwrap_or(1.0);
    let lambda = if opts.m0_log_factor.is_some() { c1 * consts.hbar / m0 } else { estimate_lambda(mat, consts) };
    let ratio = l_x / lambda;
    let reduction = opts.gap_reduction_override.unwrap_or_else(|| ratio.sqrt());
    let gap_bar = mat.gap / reduction;
    let xi_bar = mat.xi * reduction;
    let t_qp = consts.hbar / gap_bar;
    let t_v = l_x / c1;
    let period = t_p / (2.0 * PI);
    let checks = vec![
        Check::new("lx_over_lambda", ratio, MUCH_GREATER),
        Check::new("tp_quasiparticle", period / t_qp, MUCH_GREATER),
        Check::new("tp_vortex", period / t_v, MUCH_GREATER),
        Check::new("xi_reduced_below_lx", l_x / xi_bar, MUCH_GREATER),
    ];
    ConditionReport {
        lambda_compton: lambda,
        m0_phys: m0,
        c1_phys: c1,
        m_vortex: estimate_vortex_mass(mat, consts).electromagnetic,
        ratio_lx_lambda: ratio,
        gap_reduction: reduction,
        gap_reduced: gap_bar,
        xi_reduced: xi_bar,
        t_p_bound_quasiparticle: t_qp,
        t_p_bound_vortex: t_v,
        checks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (MaterialParams, PhysicalConstants) {
        let c = PhysicalConstants::gaussian();
        (MaterialParams::reference(&c), c)
    }

    #[test]
    fn reference_numbers() {
        let (m, c) = setup();
        let lam = estimate_lambda(&m, &c);
        assert!((lam / 35e-7 - 1.0).abs() < 0.01);
        assert!((estimate_c1(&m, &c) - 0.3 * c.c).abs() < 1.0);
        let cross = estimate_c1(&m, &c) * c.hbar / estimate_m0(&m, &c);
        assert!((cross / lam - 1.0).abs() < 1e-8);
        let r = check_conditions(&m, &c, 1e-4, 1.0, &ConditionOptions::default());
        assert!((r.gap_reduction.powi(2) / r.ratio_lx_lambda - 1.0).abs() < 1e-14);
        assert!(r.t_p_bound_quasiparticle > r.t_p_bound_vortex);
        assert!(r.all_pass());
    }

    #[test]
    fn scalings() {
        let (m, c) = setup();
        let m0 = estimate_m0(&m, &c);
        assert!((estimate_m0(&MaterialParams { delta_london: 2.0 * m.delta_london, ..m }, &c) * 4.0 / m0 - 1.0).abs() < 1e-14);
        assert!((estimate_m0(&MaterialParams { d: 2.0 * m.d, delta_london: 2.0 * m.delta_london, ..m }, &c) * 2.0 / m0 - 1.0).abs() < 1e-14);
        let mass = estimate_vortex_mass(&m, &c).electromagnetic;
        assert!((estimate_vortex_mass(&MaterialParams { xi: 2.0 * m.xi, ..m }, &c).electromagnetic * 4.0 / mass - 1.0).abs() < 1e-14);
        assert_eq!(estimate_vortex_mass(&MaterialParams { d: 0.0, ..m }, &c).electromagnetic, 0.0);
        let vm = estimate_vortex_mass(&m, &c);
        let r = vm.electromagnetic / vm.from_frequency;
        assert!((0.1..=10.0).contains(&r));
        assert!((estimate_lambda(&MaterialParams { d: 2.0 * m.d, ..m }, &c) * 2.0 / estimate_lambda(&m, &c) - 1.0).abs() < 1e-14);
        assert!((estimate_c1(&MaterialParams { xi: m.delta_london, ..m }, &c) - c.c).abs() < 1e-4);
    }

    #[test]
    fn window_edges() {
        let (m, c) = setup();
        let lam = estimate_lambda(&m, &c);
        let r = check_conditions(&m, &c, lam, 1.0, &ConditionOptions::default());
        let ck = &r.checks[0];
        assert!(!ck.pass && (ck.margin - 1.0).abs() < 1e-14);
        let fast = check_conditions(&m, &c, 1e-4, 1e-13, &ConditionOptions::default());
        assert!(!fast.checks[1].pass && !fast.checks[2].pass);
        let o = ConditionOptions { gap_reduction_override: Some(2.0), m0_log_factor: Some(2.0) };
        let r = check_conditions(&m, &c, 1e-4, 1.0, &o);
        assert_eq!(r.gap_reduction, 2.0);
        assert!((r.lambda_compton * 2.0 / lam - 1.0).abs() < 1e-8);
    }
}
