//! Anomalous core-fermion branch under a vortex moving along x: collisionless kinetic
//! equation ∂n/∂t − ω0 ∂n/∂φ + (k×v) ∂n/∂l = 0, solved in closed form and by characteristics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{invalid, Error, Result};
use crate::ode::{Dop853, OdeSystem};
use crate::quad;

/// Gaussian profiles are treated as zero beyond this many widths from the centre.
const GAUSS_REACH: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoreBand {
    pub gap: f64,
    pub v_f: f64,
    pub k_f: f64,
}

impl CoreBand {
    pub fn new(gap: f64, v_f: f64, k_f: f64) -> Result<Self> {
        if !(gap > 0.0 && v_f > 0.0 && k_f > 0.0) {
            return Err(invalid("gap, v_f and k_f must be positive"));
        }
        Ok(Self { gap, v_f, k_f })
    }

    pub fn k_perp(&self, k_z: f64) -> f64 {
        (self.k_f * self.k_f - k_z * k_z).max(0.0).sqrt()
    }

    /// Minigap Δ²/(2 v_F k_⊥).
    pub fn omega0(&self, k_z: f64) -> f64 {
        self.gap * self.gap / (2.0 * self.v_f * self.k_perp(k_z))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum VelocityProfile {
    Zero,
    /// v_max·exp(−((t − t0)/width)²).
    Gaussian { v_max: f64, t0: f64, width: f64 },
    /// x·δ(t − t0).
    Delta { x: f64, t0: f64 },
}

impl VelocityProfile {
    pub fn v(&self, t: f64) -> f64 {
        match *self {
            Self::Gaussian { v_max, t0, width } => {
                let s = (t - t0) / width;
                v_max * (-s * s).exp()
            }
            _ => 0.0,
        }
    }

    pub fn v_dot(&self, t: f64) -> f64 {
        match *self {
            Self::Gaussian { width, t0, .. } => -2.0 * (t - t0) / (width * width) * self.v(t),
            _ => 0.0,
        }
    }

    /// Total displacement ∫v dt.
    pub fn displacement(&self) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::Gaussian { v_max, width, .. } => v_max * width * PI.sqrt(),
            Self::Delta { x, .. } => x,
        }
    }

    /// Interval outside which v vanishes (to rounding).
    pub fn support(&self) -> Option<(f64, f64)> {
        match *self {
            Self::Zero => None,
            Self::Gaussian { t0, width, .. } => Some((t0 - GAUSS_REACH * width, t0 + GAUSS_REACH * width)),
            Self::Delta { t0, .. } => Some((t0, t0)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Gaussian { width, v_max, t0 } if !(width > 0.0) || !v_max.is_finite() || !t0.is_finite() => {
                Err(invalid("gaussian velocity profile needs a positive width and finite amplitude"))
            }
            Self::Delta { x, t0 } if !x.is_finite() || !t0.is_finite() => Err(invalid("non-finite delta pulse")),
            _ => Ok(()),
        }
    }
}

/// h(φ; t) = v cos φ + ω0⁻¹ v̇ sin φ. Delta profiles have no pointwise value and give 0.
pub fn response_kernel(phi: f64, t: f64, v: &VelocityProfile, omega0: f64) -> f64 {
    v.v(t) * phi.cos() + v.v_dot(t) * phi.sin() / omega0
}

/// Location l_b(φ) of the step at time t: n = θ(l − l_b), with
/// l_b = −k_⊥ω0∫G_R(t − t′)h(φ; t′)dt′ and G_R = ω0⁻¹ sin ω0(t − t′).
pub fn boundary_analytic(phi: f64, t: f64, v: &VelocityProfile, band: &CoreBand, k_z: f64) -> f64 {
    let kp = band.k_perp(k_z);
    let w0 = band.omega0(k_z);
    let conv = match *v {
        VelocityProfile::Zero => 0.0,
        VelocityProfile::Delta { x, t0 } => {
            if t > t0 {
                x * (w0 * (t - t0) + phi).sin()
            } else {
                0.0
            }
        }
        VelocityProfile::Gaussian { v_max, width, .. } => {
            let (lo, hi) = v.support().unwrap();
            let hi = hi.min(t);
            if hi <= lo {
                0.0
            } else {
                let scale = v_max.abs() * width.max(1.0 / w0);
                // split so each panel sees only a few oscillations of the kernel
                let panels = (((hi - lo) * w0 / PI).ceil() as usize).clamp(1, 4096);
                let dt = (hi - lo) / panels as f64;
                (0..panels)
                    .map(|i| {
                        let a = lo + i as f64 * dt;
                        let b = if i + 1 == panels { hi } else { a + dt };
                        quad::integrate(
                            |s| (w0 * (t - s)).sin() * response_kernel(phi, s, v, w0),
                            a,
                            b,
                            1e-15 * scale / panels as f64,
                            1e-13,
                        )
                        .value
                    })
                    .sum()
            }
        }
    };
    -kp * conv
}

/// Zero-temperature occupation from the closed-form step solution.
pub fn occupation_analytic(phi: f64, l: f64, t: f64, v: &VelocityProfile, band: &CoreBand, k_z: f64) -> f64 {
    if l - boundary_analytic(phi, t, v, band, k_z) > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Initial (pre-pulse) occupation n0(l).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialOccupation {
    /// θ(l).
    Step,
    /// 1/(1 + exp(−l/width)); tends to the step as width → 0.
    Smeared { width: f64 },
}

impl InitialOccupation {
    pub fn eval(&self, l: f64) -> f64 {
        match *self {
            Self::Step => {
                if l > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Smeared { width } => 1.0 / (1.0 + (-l / width).exp()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FermionOccupation {
    pub t: f64,
    pub k_z: f64,
    pub k_perp: f64,
    pub omega0: f64,
    pub phi: Vec<f64>,
    /// Shift l(t_start) − l(t) along the characteristic through each φ.
    pub shift: Vec<f64>,
    /// Sampled l values; `n[i][j]` is the occupation at (phi[i], l[j]).
    pub l: Vec<f64>,
    pub n: Vec<Vec<f64>>,
    pub stats: crate::ode::StepStats,
}

impl FermionOccupation {
    /// Step location l_b(φ) = −shift for a zero-temperature initial state.
    pub fn boundary(&self) -> Vec<f64> {
        self.shift.iter().map(|s| -s).collect()
    }

    /// Measure of the occupied set {l > l_b} ∩ {|l| < window} per period in φ.
    pub fn occupied_measure(&self, window: f64) -> f64 {
        let dphi = 2.0 * PI / self.phi.len() as f64;
        self.shift.iter().map(|s| (window + s).clamp(0.0, 2.0 * window)).sum::<f64>() * dphi
    }
}

struct Characteristic<'a> {
    v: &'a VelocityProfile,
    omega0: f64,
    k_perp: f64,
    sign: f64,
}

impl OdeSystem for Characteristic<'_> {
    fn dim(&self) -> usize {
        2
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        dy[0] = -self.omega0;
        // k×v = k_x v_y − k_y v_x with v along x
        dy[1] = self.sign * self.k_perp * self.v.v(t) * y[0].sin();
    }
}

/// Integrate one characteristic backward from (φ, l = 0) at t to t_start; returns
/// (φ(t_start), l(t_start)).
fn trace_back(
    phi: f64,
    t: f64,
    t_start: f64,
    v: &VelocityProfile,
    omega0: f64,
    k_perp: f64,
    sign: f64,
    stats: &mut crate::ode::StepStats,
) -> Result<(f64, f64)> {
    let sys = Characteristic { v, omega0, k_perp, sign };
    match *v {
        VelocityProfile::Delta { x, t0 } => {
            // free rotation, then the jump ∫(k×v)dt at t0
            if t <= t0 {
                return Ok((phi + omega0 * (t - t_start), 0.0));
            }
            let phi0 = phi + omega0 * (t - t0);
            Ok((phi + omega0 * (t - t_start), -sign * k_perp * x * phi0.sin()))
        }
        _ => {
            let h_max = match *v {
                VelocityProfile::Gaussian { width, .. } => 0.5 * width.min(1.0 / omega0),
                _ => 1.0 / omega0,
            };
            let mut ode = Dop853::new(2, 1e-13, 1e-15 * k_perp.max(1e-300)).with_max_step(h_max);
            let mut y = [phi, 0.0];
            let mut tt = t;
            *stats += ode.integrate(&sys, &mut tt, &mut y, t_start)?;
            Ok((y[0], y[1]))
        }
    }
}

static CROSS_SIGN: OnceLock<std::result::Result<f64, String>> = OnceLock::new();

/// Orientation of k×v in the kinetic equation, fixed once by matching a test
/// characteristic against the closed-form solution.
pub fn cross_sign() -> Result<f64> {
    CROSS_SIGN
        .get_or_init(|| {
            let band = CoreBand { gap: 1.0, v_f: 1.0, k_f: 1.0 };
            let v = VelocityProfile::Gaussian { v_max: 0.7, t0: 0.0, width: 0.8 };
            let (w0, kp) = (band.omega0(0.0), band.k_perp(0.0));
            let (lo, _) = v.support().unwrap();
            let (phi, t) = (0.4, 3.0);
            let want = -boundary_analytic(phi, t, &v, &band, 0.0);
            let mut stats = Default::default();
            for sign in [-1.0, 1.0] {
                let got = trace_back(phi, t, lo, &v, w0, kp, sign, &mut stats).map_err(|e| e.to_string())?.1;
                if (got - want).abs() < 1e-8 * want.abs().max(1.0) {
                    if sign > 0.0 {
                        log::warn!("k×v orientation flipped to match the closed-form solution");
                    }
                    return Ok(sign);
                }
            }
            Err(format!("characteristics disagree with the closed form for both orientations (want {want})"))
        })
        .clone()
        .map_err(Error::Domain)
}

/// Evolve n(φ, l) for one k_z channel by tracing characteristics backward from t_end on a
/// uniform φ grid of `n_phi` points, sampling the given l values.
pub fn vlasov_evolve(
    initial: &InitialOccupation,
    v: &VelocityProfile,
    band: &CoreBand,
    k_z: f64,
    t_end: f64,
    n_phi: usize,
    l_samples: &[f64],
) -> Result<FermionOccupation> {
    v.validate()?;
    if n_phi == 0 {
        return Err(invalid("n_phi must be positive"));
    }
    if k_z.abs() >= band.k_f {
        return Err(invalid(format!("|k_z| = {} must be below k_F", k_z.abs())));
    }
    let sign = cross_sign()?;
    let (w0, kp) = (band.omega0(k_z), band.k_perp(k_z));
    let t_start = v.support().map_or(t_end, |(lo, _)| lo.min(t_end));
    let phis: Vec<f64> = (0..n_phi).map(|i| 2.0 * PI * i as f64 / n_phi as f64).collect();
    let traced: Vec<Result<(f64, crate::ode::StepStats)>> = phis
        .par_iter()
        .map(|&phi| {
            let mut st = Default::default();
            let (_, dl) = trace_back(phi, t_end, t_start, v, w0, kp, sign, &mut st)?;
            Ok((dl, st))
        })
        .collect();
    let mut shift = Vec::with_capacity(n_phi);
    let mut stats = crate::ode::StepStats::default();
    for r in traced {
        let (dl, st) = r?;
        shift.push(dl);
        stats += st;
    }
    // dl/dt does not depend on l, so one trajectory per φ carries every l sample
    let n = shift.iter().map(|s| l_samples.iter().map(|l| initial.eval(l + s)).collect()).collect();
    Ok(FermionOccupation { t: t_end, k_z, k_perp: kp, omega0: w0, phi: phis, shift, l: l_samples.to_vec(), n, stats })
}

/// Momentum (per dk_z/2π and unit thickness factor d/2) carried by the displaced step of one channel:
/// (d/2π)∫dφ k_⊥(cos φ, sin φ)(−l_b(φ)).
pub fn channel_momentum(occ: &FermionOccupation, d: f64) -> (f64, f64) {
    let dphi = 2.0 * PI / occ.phi.len() as f64;
    let (mut px, mut py) = (0.0, 0.0);
    for (phi, s) in occ.phi.iter().zip(&occ.shift) {
        px += phi.cos() * s;
        py += phi.sin() * s;
    }
    let f = d / (2.0 * PI) * occ.k_perp * dphi;
    (f * px, f * py)
}

/// Magnitude √(p_x² + p_y²) of one channel's momentum at each of `times` (the wobble).
pub fn wobble_amplitudes(
    v: &VelocityProfile,
    band: &CoreBand,
    k_z: f64,
    d: f64,
    n_phi: usize,
    times: &[f64],
) -> Result<Vec<f64>> {
    times
        .iter()
        .map(|&t| {
            let occ = vlasov_evolve(&InitialOccupation::Step, v, band, k_z, t, n_phi, &[])?;
            let (px, py) = channel_momentum(&occ, d);
            Ok(px.hypot(py))
        })
        .collect()
}

/// Momentum transferred to the core fermions by a sudden displacement x at t = 0:
/// p_x = (d/2)x∫(dk_z/2π)k_⊥² sin ω0t, p_y the same with cos.
pub fn momentum_transfer(x: f64, t: f64, band: &CoreBand, d: f64) -> (f64, f64) {
    // k_z = k_F sin θ makes the integrand k_F³cos³θ·trig(ω0 t), even in θ. Panels are graded
    // geometrically toward θ = π/2, where ω0 diverges, and split by the phase they span.
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    let (nodes, weights) = RULE.get_or_init(|| quad::gauss_legendre(20));
    let a = band.gap * band.gap / (2.0 * band.v_f * band.k_f) * t;
    let half = 0.5 * PI;
    let mut cuts = vec![0.0];
    let mut gap = half;
    loop {
        gap *= 0.5;
        // the remaining sliver contributes at most ~gap⁴
        if gap.powi(4) < 1e-18 {
            break;
        }
        cuts.push(half - gap);
    }
    let (mut sx, mut sy) = (0.0, 0.0);
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let span = (a / hi.cos() - a / lo.cos()).abs();
        let panels = ((span / 2.0).ceil() as usize + 4).min(1 << 22);
        let h = (hi - lo) / panels as f64;
        for p in 0..panels {
            let mid = lo + (p as f64 + 0.5) * h;
            for (z, wt) in nodes.iter().zip(weights) {
                let c = (mid + 0.5 * h * z).cos();
                let ph = a / c;
                let f = 0.5 * h * wt * c * c * c;
                sx += f * ph.sin();
                sy += f * ph.cos();
            }
        }
    }
    let f = 2.0 * band.k_f.powi(3) * 0.5 * d * x / (2.0 * PI);
    (f * sx, f * sy)
}
