//! Physical constants, film parameters and the dimensionless run description.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Result};

/// Gaussian (CGS) constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    pub hbar: f64,
    pub c: f64,
    pub e: f64,
    pub alpha_em: f64,
    pub k_b: f64,
    /// 2e/(ħc), inverse flux.
    pub g: f64,
}

impl PhysicalConstants {
    pub fn gaussian() -> Self {
        Self::new(1.054571817e-27, 2.99792458e10, 4.80320471e-10, 1.0 / 137.035999084, 1.380649e-16)
    }

    pub fn new(hbar: f64, c: f64, e: f64, alpha_em: f64, k_b: f64) -> Self {
        Self { hbar, c, e, alpha_em, k_b, g: 2.0 * e / (hbar * c) }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("hbar", self.hbar),
            ("c", self.c),
            ("e", self.e),
            ("alpha_em", self.alpha_em),
            ("k_b", self.k_b),
            ("g", self.g),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("constant {name} must be positive, got {v}")));
            }
        }
        let g = 2.0 * self.e / (self.hbar * self.c);
        if ((self.g - g) / g).abs() > 1e-12 {
            return Err(invalid(format!("g = {} is not 2e/(hbar c) = {}", self.g, g)));
        }
        Ok(())
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::gaussian()
    }
}

/// Film parameters in CGS units (lengths in cm, energies in erg).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    pub d: f64,
    pub xi: f64,
    pub delta_london: f64,
    pub gap: f64,
    pub k_f: f64,
    pub v_f: f64,
    pub eps_f: f64,
}

impl MaterialParams {
    /// The thin-film reference point: d = 10 nm, ξ = 30 nm, δ = 100 nm, Δ = 10 K, and a
    /// free-electron Fermi sea with ε_F = 10⁴ K (Δ/ε_F = 10⁻³).
    pub fn reference(consts: &PhysicalConstants) -> Self {
        const M_E: f64 = 9.1093837015e-28;
        let eps_f = 1.0e4 * consts.k_b;
        let k_f = (2.0 * M_E * eps_f).sqrt() / consts.hbar;
        let v_f = consts.hbar * k_f / M_E;
        Self {
            d: 10e-7,
            xi: 30e-7,
            delta_london: 100e-7,
            gap: 10.0 * consts.k_b,
            k_f,
            v_f,
            eps_f,
        }
    }

    pub fn gap_kelvin(&self, consts: &PhysicalConstants) -> f64 {
        self.gap / consts.k_b
    }

    /// Hard failures for non-positive fields; soft warnings for being outside the
    /// d < ξ < δ ordering or for an inconsistent Fermi triple (ε_F vs ħk_F v_F / 2).
    pub fn validate(&self, consts: &PhysicalConstants, rel_tol: f64) -> Result<Vec<String>> {
        for (name, v) in [
            ("d", self.d),
            ("xi", self.xi),
            ("delta_london", self.delta_london),
            ("gap", self.gap),
            ("k_f", self.k_f),
            ("v_f", self.v_f),
            ("eps_f", self.eps_f),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("material parameter {name} must be positive, got {v}")));
            }
        }
        let mut warnings = Vec::new();
        if !(self.d < self.xi && self.xi < self.delta_london) {
            warnings.push(format!(
                "outside the thin-film ordering d < xi < delta: d = {:e}, xi = {:e}, delta = {:e}",
                self.d, self.xi, self.delta_london
            ));
        }
        let eps = 0.5 * consts.hbar * self.k_f * self.v_f;
        let rel = (eps - self.eps_f).abs() / self.eps_f;
        if rel > rel_tol {
            warnings.push(format!(
                "eps_f = {:e} differs from hbar k_f v_f / 2 = {:e} by {:.3} (relative)",
                self.eps_f, eps, rel
            ));
        }
        Ok(warnings)
    }
}

fn default_one() -> f64 {
    1.0
}
fn default_tol() -> f64 {
    1e-10
}
fn default_ten() -> f64 {
    10.0
}

/// Dimensionless run description (recommended units: M0 = c1 = 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationParams {
    #[serde(default = "default_one")]
    pub m0: f64,
    #[serde(default = "default_one")]
    pub c1: f64,
    pub l_x: f64,
    pub l_y: f64,
    pub n_kx: usize,
    pub n_ky: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    pub t_start: f64,
    pub t_end: f64,
    /// Required ratio c1·k_cut / M0.
    #[serde(default = "default_ten")]
    pub cutoff_factor: f64,
    /// Required ratio L_y / L_x.
    #[serde(default = "default_ten")]
    pub aspect_min: f64,
}

impl SimulationParams {
    pub fn new(l_x: f64, l_y: f64, n_kx: usize, n_ky: usize, t_start: f64, t_end: f64) -> Self {
        Self {
            m0: 1.0,
            c1: 1.0,
            l_x,
            l_y,
            n_kx,
            n_ky,
            tol: 1e-10,
            t_start,
            t_end,
            cutoff_factor: 10.0,
            aspect_min: 10.0,
        }
    }

    pub fn volume(&self) -> f64 {
        self.l_x * self.l_y
    }

    /// UV cutoff of the k_x grid.
    pub fn k_cut(&self) -> f64 {
        2.0 * PI * self.n_kx as f64 / self.l_x
    }

    pub fn kx(&self, ix: i32) -> f64 {
        2.0 * PI * ix as f64 / self.l_x
    }

    pub fn ky(&self, iy: i32) -> f64 {
        2.0 * PI * iy as f64 / self.l_y
    }

    pub fn mode_count(&self) -> usize {
        (2 * self.n_kx + 1) * (2 * self.n_ky + 1)
    }

    /// Integer grid labels, sorted by (k_x, k_y).
    pub fn grid(&self) -> Vec<(i32, i32)> {
        let (nx, ny) = (self.n_kx as i32, self.n_ky as i32);
        let mut out = Vec::with_capacity(self.mode_count());
        for ix in -nx..=nx {
            for iy in -ny..=ny {
                out.push((ix, iy));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("m0", self.m0), ("c1", self.c1), ("l_x", self.l_x), ("l_y", self.l_y), ("tol", self.tol)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.t_end > self.t_start) {
            return Err(invalid(format!("t_end = {} must exceed t_start = {}", self.t_end, self.t_start)));
        }
        if self.c1 * self.k_cut() < self.cutoff_factor * self.m0 {
            return Err(invalid(format!(
                "cutoff too low: c1*k_cut = {:.4} < {} * M0",
                self.c1 * self.k_cut(),
                self.cutoff_factor
            )));
        }
        if self.l_y < self.aspect_min * self.l_x {
            return Err(invalid(format!("l_y = {} must be at least {} * l_x", self.l_y, self.aspect_min)));
        }
        Ok(())
    }
}
