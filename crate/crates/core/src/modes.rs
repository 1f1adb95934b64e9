//! Mode functions of the dual vortex field: f̈ + ω²(t) f = 0 for every grid wavevector.
//!
//! The default integrator is a fourth-order Magnus method (two Gauss nodes). Its
//! one-step map is the exponential of a traceless real 2×2 matrix, so the Wronskian is
//! conserved to rounding regardless of the step size; the step is chosen by step
//! doubling. An embedded DOP853 path is kept for cross-checks.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{Dop853, OdeSystem, StepStats};
use crate::params::SimulationParams;
use crate::pulse::{PulseProfile, PulseSample};

/// Relative size of Ẽ and M − M0 tolerated at the start of a run.
pub const QUIET_TOL: f64 = 1e-8;

const GAUSS: f64 = 0.288_675_134_594_812_882_254_574_390_250_978_727; // √3/6
const COMM: f64 = 0.144_337_567_297_406_441_127_287_195_125_489_364; // √3/12

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub ix: i32,
    pub iy: i32,
    pub k_x: f64,
    pub k_y: f64,
    pub f: Complex64,
    pub f_dot: Complex64,
    /// Largest Wronskian residual seen at a checkpoint.
    pub drift: f64,
}

impl Mode {
    /// Exact normalisation constant i/V.
    pub fn wronskian_ref(v: f64) -> Complex64 {
        Complex64::new(0.0, 1.0 / v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeEnsemble {
    pub modes: Vec<Mode>,
    pub t: f64,
    pub params: SimulationParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    #[default]
    Magnus4,
    Dop853,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineOptions {
    #[serde(default)]
    pub integrator: Integrator,
    /// Modes per work unit. Part of the reduction order, so fixed independently of the thread count.
    #[serde(default = "default_chunk")]
    pub chunk: usize,
    /// Abort when a Wronskian residual exceeds this multiple of the tolerance.
    #[serde(default = "default_abort")]
    pub abort_factor: f64,
}

fn default_chunk() -> usize {
    256
}
fn default_abort() -> f64 {
    1e3
}

impl Default for EngineOptions {
    fn default() -> Self {
        Self { integrator: Integrator::Magnus4, chunk: default_chunk(), abort_factor: default_abort() }
    }
}

#[inline]
fn w_of(k_x: f64, ky2: f64, c1sq: f64, s: &PulseSample) -> f64 {
    let q = k_x - s.e_tilde;
    c1sq * (ky2 + q * q) + s.m * s.m
}

pub fn omega_sq_at(k_x: f64, k_y: f64, s: &PulseSample, params: &SimulationParams) -> f64 {
    w_of(k_x, k_y * k_y, params.c1 * params.c1, s)
}

/// c1²k_y² + c1²(k_x − Ẽ(t))² + M(t)².
pub fn omega_sq(k_x: f64, k_y: f64, t: f64, pulse: &PulseProfile, params: &SimulationParams) -> f64 {
    omega_sq_at(k_x, k_y, &pulse.evaluate(t), params)
}

/// |f ḟ* − ḟ f* − i/V|·V.
pub fn wronskian_residual(mode: &Mode, v: f64) -> f64 {
    let w = mode.f * mode.f_dot.conj() - mode.f_dot * mode.f.conj();
    (w - Mode::wronskian_ref(v)).norm() * v
}

/// (V/2ω)(|ḟ|² + ω²|f|²) − 1/2.
pub fn occupation(mode: &Mode, omega_now: f64, v: f64) -> f64 {
    v / (2.0 * omega_now) * (mode.f_dot.norm_sqr() + omega_now * omega_now * mode.f.norm_sqr()) - 0.5
}

/// Instantaneous vacuum at `params.t_start`.
pub fn init_modes(params: &SimulationParams, pulse: &PulseProfile) -> Result<ModeEnsemble> {
    params.validate()?;
    init_modes_unchecked(params, pulse)
}

/// As `init_modes`, without the grid/geometry validation (used for small test grids).
pub fn init_modes_unchecked(params: &SimulationParams, pulse: &PulseProfile) -> Result<ModeEnsemble> {
    let t = params.t_start;
    let s = pulse.evaluate(t);
    let dk = 2.0 * std::f64::consts::PI / params.l_x;
    if s.e_tilde.abs() > QUIET_TOL * dk || (s.m - pulse.m0).abs() > QUIET_TOL * pulse.m0 {
        return Err(Error::PulseActive { t, e_tilde: s.e_tilde, dm: s.m - pulse.m0 });
    }
    let v = params.volume();
    let modes = params
        .grid()
        .into_iter()
        .map(|(ix, iy)| {
            let (k_x, k_y) = (params.kx(ix), params.ky(iy));
            let om = omega_sq_at(k_x, k_y, &s, params).sqrt();
            let f = Complex64::new((2.0 * om * v).powf(-0.5), 0.0);
            Mode { ix, iy, k_x, k_y, f, f_dot: Complex64::new(0.0, -om) * f, drift: 0.0 }
        })
        .collect();
    Ok(ModeEnsemble { modes, t, params: params.clone() })
}

/// exp of Ω = [[c, h], [−h w̄, −c]], the Gauss-2 Magnus-4 generator.
#[inline]
fn magnus_map(h: f64, w1: f64, w2: f64) -> [f64; 4] {
    let wb = 0.5 * (w1 + w2);
    let c = COMM * h * h * (w2 - w1);
    let th2 = h * h * wb - c * c;
    let (co, s) = if th2 > 1e-8 {
        let th = th2.sqrt();
        let (sn, cs) = th.sin_cos();
        (cs, sn / th)
    } else if th2 < -1e-8 {
        let th = (-th2).sqrt();
        (th.cosh(), th.sinh() / th)
    } else {
        (1.0 - th2 / 2.0 + th2 * th2 / 24.0, 1.0 - th2 / 6.0 + th2 * th2 / 120.0)
    };
    [co + s * c, s * h, -s * h * wb, co - s * c]
}

#[inline]
fn apply(m: &[f64; 4], y: [f64; 4]) -> [f64; 4] {
    // y = (Re f, Im f, Re ḟ, Im ḟ); the map is real so acts on both parts alike
    [
        m[0] * y[0] + m[1] * y[2],
        m[0] * y[1] + m[1] * y[3],
        m[2] * y[0] + m[3] * y[2],
        m[2] * y[1] + m[3] * y[3],
    ]
}

/// Adaptive Magnus-4 over a block of modes sharing step sizes and pulse evaluations.
#[derive(Debug, Clone)]
struct MagnusBlock {
    rtol: f64,
    h: Option<f64>,
    ky2: Vec<f64>,
    next: Vec<[f64; 4]>,
    h_max: f64,
    max_steps: usize,
}

impl MagnusBlock {
    fn new(modes: &[Mode], rtol: f64, h_max: f64) -> Self {
        Self {
            rtol,
            h: None,
            ky2: modes.iter().map(|m| m.k_y * m.k_y).collect(),
            next: vec![[0.0; 4]; modes.len()],
            h_max,
            max_steps: 50_000_000,
        }
    }

    fn advance(
        &mut self,
        modes: &mut [Mode],
        pulse: &PulseProfile,
        c1sq: f64,
        t: &mut f64,
        t_end: f64,
    ) -> Result<StepStats> {
        let mut stats = StepStats::default();
        let mut h = match self.h {
            Some(h) => h,
            None => {
                let s = pulse.evaluate(*t);
                let wmax = modes
                    .iter()
                    .zip(&self.ky2)
                    .map(|(m, &ky2)| w_of(m.k_x, ky2, c1sq, &s))
                    .fold(0.0f64, f64::max);
                0.5 / wmax.sqrt().max(1e-300)
            }
        };
        while *t < t_end {
            if stats.accepted + stats.rejected >= self.max_steps {
                return Err(crate::ode::OdeError::TooManySteps(self.max_steps).into());
            }
            let last = *t + h >= t_end;
            let hs = if last { t_end - *t } else { h };
            if hs <= 1e-14 * t.abs().max(1.0) {
                return Err(crate::ode::OdeError::StepSizeUnderflow { t: *t, h: hs }.into());
            }
            let nodes = [
                *t + (0.5 - GAUSS) * hs,
                *t + (0.5 + GAUSS) * hs,
                *t + (0.5 - GAUSS) * 0.5 * hs,
                *t + (0.5 + GAUSS) * 0.5 * hs,
                *t + 0.5 * hs + (0.5 - GAUSS) * 0.5 * hs,
                *t + 0.5 * hs + (0.5 + GAUSS) * 0.5 * hs,
            ];
            let ps = nodes.map(|x| pulse.evaluate(x));
            stats.evaluations += 6;
            let mut err = 0.0f64;
            for (i, m) in modes.iter().enumerate() {
                let ky2 = self.ky2[i];
                let w: [f64; 6] = std::array::from_fn(|j| w_of(m.k_x, ky2, c1sq, &ps[j]));
                let y = [m.f.re, m.f.im, m.f_dot.re, m.f_dot.im];
                let full = apply(&magnus_map(hs, w[0], w[1]), y);
                let half = apply(&magnus_map(0.5 * hs, w[4], w[5]), apply(&magnus_map(0.5 * hs, w[2], w[3]), y));
                let sf = (y[0] * y[0] + y[1] * y[1]).max(half[0] * half[0] + half[1] * half[1]).sqrt();
                let sd = (y[2] * y[2] + y[3] * y[3]).max(half[2] * half[2] + half[3] * half[3]).sqrt();
                let ef = ((full[0] - half[0]).powi(2) + (full[1] - half[1]).powi(2)).sqrt() / sf;
                let ed = ((full[2] - half[2]).powi(2) + (full[3] - half[3]).powi(2)).sqrt() / sd;
                err = err.max(ef.max(ed));
                self.next[i] = half;
            }
            // a non-finite estimate (overflowing hyperbolic branch) is treated as a rejection
            let err = if err.is_nan() { f64::INFINITY } else { err / (15.0 * self.rtol) };
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 {
                for (m, y) in modes.iter_mut().zip(&self.next) {
                    m.f = Complex64::new(y[0], y[1]);
                    m.f_dot = Complex64::new(y[2], y[3]);
                }
                *t = if last { t_end } else { *t + hs };
                stats.accepted += 1;
                // a step shortened to land on the checkpoint says little about the natural size
                if !last || hs >= h {
                    h = (hs * fac).min(self.h_max);
                }
            } else {
                stats.rejected += 1;
                h = hs * fac.min(1.0);
            }
        }
        self.h = Some(h);
        Ok(stats)
    }
}

/// Real first-order form of a block of modes, for the Runge–Kutta path.
struct ModeSystem<'a> {
    k_x: Vec<f64>,
    ky2: Vec<f64>,
    c1sq: f64,
    pulse: &'a PulseProfile,
}

impl OdeSystem for ModeSystem<'_> {
    fn dim(&self) -> usize {
        4 * self.k_x.len()
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        let s = self.pulse.evaluate(t);
        for i in 0..self.k_x.len() {
            let w = w_of(self.k_x[i], self.ky2[i], self.c1sq, &s);
            let j = 4 * i;
            dy[j] = y[j + 2];
            dy[j + 1] = y[j + 3];
            dy[j + 2] = -w * y[j];
            dy[j + 3] = -w * y[j + 1];
        }
    }

    // Relative to the modulus of each complex amplitude, so the phase does not matter.
    fn error_scale(&self, y0: &[f64], y1: &[f64], rtol: f64, atol: f64, scale: &mut [f64]) {
        for j in (0..y0.len()).step_by(2) {
            let a = y0[j].hypot(y0[j + 1]).max(y1[j].hypot(y1[j + 1]));
            scale[j] = atol + rtol * a;
            scale[j + 1] = scale[j];
        }
    }
}

enum Stepper {
    Magnus(MagnusBlock),
    Rk(Dop853),
}

/// One independently integrated block of the ensemble.
pub(crate) struct Block {
    stepper: Stepper,
    buf: Vec<f64>,
    pub(crate) stats: StepStats,
}

impl Block {
    /// `h_max` bounds the Magnus step; the pulse timescale is a safe choice.
    pub(crate) fn new(modes: &[Mode], tol: f64, integrator: Integrator, h_max: f64) -> Self {
        let stepper = match integrator {
            Integrator::Magnus4 => Stepper::Magnus(MagnusBlock::new(modes, tol, h_max)),
            Integrator::Dop853 => Stepper::Rk(Dop853::new(4 * modes.len(), tol, 1e-300)),
        };
        Self { stepper, buf: vec![0.0; 4 * modes.len()], stats: StepStats::default() }
    }

    pub(crate) fn advance(
        &mut self,
        modes: &mut [Mode],
        pulse: &PulseProfile,
        c1: f64,
        t0: f64,
        t1: f64,
    ) -> Result<()> {
        let mut t = t0;
        let c1sq = c1 * c1;
        let st = match &mut self.stepper {
            Stepper::Magnus(b) => b.advance(modes, pulse, c1sq, &mut t, t1)?,
            Stepper::Rk(rk) => {
                let sys = ModeSystem {
                    k_x: modes.iter().map(|m| m.k_x).collect(),
                    ky2: modes.iter().map(|m| m.k_y * m.k_y).collect(),
                    c1sq,
                    pulse,
                };
                for (m, y) in modes.iter().zip(self.buf.chunks_exact_mut(4)) {
                    y.copy_from_slice(&[m.f.re, m.f.im, m.f_dot.re, m.f_dot.im]);
                }
                let st = rk.integrate(&sys, &mut t, &mut self.buf, t1)?;
                for (m, y) in modes.iter_mut().zip(self.buf.chunks_exact(4)) {
                    m.f = Complex64::new(y[0], y[1]);
                    m.f_dot = Complex64::new(y[2], y[3]);
                }
                st
            }
        };
        self.stats += st;
        Ok(())
    }
}

/// Record the Wronskian residual of every mode and fail past the abort threshold.
pub(crate) fn check_drift(modes: &mut [Mode], v: f64, t: f64, limit: f64) -> Result<()> {
    for m in modes.iter_mut() {
        let r = wronskian_residual(m, v);
        if r > m.drift {
            m.drift = r;
        }
        if !(r <= limit) {
            return Err(Error::WronskianDrift { ix: m.ix, iy: m.iy, t, drift: r, limit });
        }
    }
    Ok(())
}

/// Advance every mode from `ens.t` to `t_target` at relative tolerance `tol`.
pub fn evolve(
    ens: &mut ModeEnsemble,
    pulse: &PulseProfile,
    t_target: f64,
    tol: f64,
    opts: &EngineOptions,
) -> Result<StepStats> {
    if t_target < ens.t {
        return Err(Error::BackwardTarget { now: ens.t, target: t_target });
    }
    let (t0, v, c1) = (ens.t, ens.params.volume(), ens.params.c1);
    let limit = opts.abort_factor * tol;
    let results: Vec<Result<StepStats>> = ens
        .modes
        .par_chunks_mut(opts.chunk.max(1))
        .map(|chunk| {
            let mut b = Block::new(chunk, tol, opts.integrator, pulse.t_p);
            b.advance(chunk, pulse, c1, t0, t_target)?;
            check_drift(chunk, v, t_target, limit)?;
            Ok(b.stats)
        })
        .collect();
    let mut stats = StepStats::default();
    for r in results {
        stats += r?;
    }
    ens.t = t_target;
    Ok(stats)
}

impl ModeEnsemble {
    pub fn volume(&self) -> f64 {
        self.params.volume()
    }

    pub fn get(&self, ix: i32, iy: i32) -> Option<&Mode> {
        let ny = 2 * self.params.n_ky as i32 + 1;
        let idx = (ix + self.params.n_kx as i32) * ny + iy + self.params.n_ky as i32;
        self.modes.get(usize::try_from(idx).ok()?).filter(|m| m.ix == ix && m.iy == iy)
    }

    pub fn max_drift(&self) -> f64 {
        self.modes.iter().map(|m| m.drift).fold(0.0, f64::max)
    }
}
