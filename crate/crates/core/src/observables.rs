//! Vortex current, occupation numbers and the sampled run driver.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::adiabatic::adiabaticity_margin;
use crate::error::{Error, Result};
use crate::modes::{
    check_drift, init_modes, occupation, omega_sq_at, Block, EngineOptions, ModeEnsemble,
};
use crate::params::SimulationParams;
use crate::pulse::PulseProfile;
use crate::quad::trapezoid;

pub use crate::modes::occupation as mode_occupation;

/// 2c1² Σ_k (k_x − Ẽ)|f_k|², summed in grid order.
pub fn vortex_current(ens: &ModeEnsemble, pulse: &PulseProfile, t: f64) -> f64 {
    let e = pulse.e_tilde(t);
    let s: f64 = ens.modes.iter().map(|m| (m.k_x - e) * m.f.norm_sqr()).sum();
    2.0 * ens.params.c1 * ens.params.c1 * s
}

/// Σ_k n_k in the instantaneous basis at time t.
pub fn residual_excitation(ens: &ModeEnsemble, pulse: &PulseProfile, t: f64) -> f64 {
    let s = pulse.evaluate(t);
    let v = ens.volume();
    ens.modes.iter().map(|m| occupation(m, omega_sq_at(m.k_x, m.k_y, &s, &ens.params).sqrt(), v)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingSpec {
    /// Samples per period 2π/M0.
    pub per_period: usize,
    /// Samples across one t_p.
    pub per_tp: usize,
}

impl Default for SamplingSpec {
    fn default() -> Self {
        Self { per_period: 40, per_tp: 400 }
    }
}

/// Uniform grid over [t_start, t_end] with an even number of intervals (for the
/// Richardson check of the trapezoid rule).
pub fn sample_times(params: &SimulationParams, pulse: &PulseProfile, spec: &SamplingSpec) -> Vec<f64> {
    let dt = (2.0 * std::f64::consts::PI / (params.m0 * spec.per_period.max(1) as f64))
        .min(pulse.t_p / spec.per_tp.max(1) as f64);
    let span = params.t_end - params.t_start;
    let mut n = (span / dt).ceil().max(2.0) as usize;
    n += n % 2;
    (0..=n)
        .map(|i| if i == n { params.t_end } else { params.t_start + span * (i as f64 / n as f64) })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transport {
    pub value: f64,
    /// |T(h) − T(2h)|/3.
    pub error_estimate: f64,
}

/// ∫ j_x dt by the composite trapezoid rule, with a Richardson estimate from the
/// every-other-sample grid.
pub fn transported_number(times: &[f64], j_x: &[f64]) -> Result<Transport> {
    if times.len() != j_x.len() {
        return Err(Error::InvalidParameter("times and j_x differ in length".into()));
    }
    if times.len() < 2 {
        return Ok(Transport { value: 0.0, error_estimate: 0.0 });
    }
    let value = trapezoid(times, j_x)?;
    let error_estimate = if times.len() >= 5 && times.len() % 2 == 1 {
        let t2: Vec<f64> = times.iter().step_by(2).copied().collect();
        let j2: Vec<f64> = j_x.iter().step_by(2).copied().collect();
        (value - trapezoid(&t2, &j2)?).abs() / 3.0
    } else {
        f64::NAN
    };
    Ok(Transport { value, error_estimate })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeOccupation {
    pub ix: i32,
    pub iy: i32,
    pub n: f64,
    pub drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub max_wronskian_drift: f64,
    pub adiabaticity_margin: f64,
    pub quadrature_error: f64,
    pub n_total_final: f64,
    pub max_n_k_final: f64,
    pub min_n_total: f64,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
    pub samples: usize,
    pub modes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub times: Vec<f64>,
    pub j_x: Vec<f64>,
    pub n_total: Vec<f64>,
    pub e_tilde: Vec<f64>,
    pub m_of_t: Vec<f64>,
    pub n_k_final: Vec<ModeOccupation>,
    pub n_transported: f64,
    pub diagnostics: Diagnostics,
}

impl RunResult {
    pub const CSV_HEADER: &'static str = "t,j_x,n_total,e_tilde,m_of_t";

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(Self::CSV_HEADER.split(',')).map_err(csv_err)?;
        for i in 0..self.times.len() {
            out.write_record(
                [self.times[i], self.j_x[i], self.n_total[i], self.e_tilde[i], self.m_of_t[i]].map(fmt_num),
            )
            .map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Per-mode table keyed by the integer grid labels.
    pub fn write_modes_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["ix", "iy", "n_k", "wronskian_drift"]).map_err(csv_err)?;
        for m in &self.n_k_final {
            out.write_record([m.ix.to_string(), m.iy.to_string(), fmt_num(m.n), fmt_num(m.drift)])
                .map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Shortest representation that reads back to the same f64.
pub fn fmt_num(x: f64) -> String {
    format!("{x:e}")
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    #[serde(default)]
    pub engine: EngineOptions,
    #[serde(default)]
    pub sampling: SamplingSpec,
}

struct BlockTrace {
    j: Vec<f64>,
    n: Vec<f64>,
    accepted: usize,
    rejected: usize,
}

/// Evolve the vacuum through the pulse, sampling ⟨J_x⟩ and Σn_k on the uniform grid.
/// Blocks of modes run in parallel; partial sums are combined in block order, so the
/// result does not depend on the number of worker threads.
pub fn run(params: &SimulationParams, pulse: &PulseProfile, opts: &RunOptions) -> Result<RunResult> {
    pulse.validate()?;
    let mut ens = init_modes(params, pulse)?;
    let times = sample_times(params, pulse, &opts.sampling);
    let samples: Vec<_> = times.iter().map(|&t| pulse.evaluate(t)).collect();
    let (v, c1) = (params.volume(), params.c1);
    let limit = opts.engine.abort_factor * params.tol;
    log::info!("run: {} modes, {} samples", ens.modes.len(), times.len());

    let traces: Vec<Result<BlockTrace>> = ens
        .modes
        .par_chunks_mut(opts.engine.chunk.max(1))
        .map(|chunk| {
            let mut block = Block::new(chunk, params.tol, opts.engine.integrator, pulse.t_p);
            let mut j = Vec::with_capacity(times.len());
            let mut n = Vec::with_capacity(times.len());
            for (i, s) in samples.iter().enumerate() {
                if i > 0 {
                    block.advance(chunk, pulse, c1, times[i - 1], times[i])?;
                    check_drift(chunk, v, times[i], limit)?;
                }
                let (mut js, mut ns) = (0.0, 0.0);
                for m in chunk.iter() {
                    js += (m.k_x - s.e_tilde) * m.f.norm_sqr();
                    ns += occupation(m, omega_sq_at(m.k_x, m.k_y, s, params).sqrt(), v);
                }
                j.push(js);
                n.push(ns);
            }
            Ok(BlockTrace { j, n, accepted: block.stats.accepted, rejected: block.stats.rejected })
        })
        .collect();

    let mut j_x = vec![0.0; times.len()];
    let mut n_total = vec![0.0; times.len()];
    let (mut accepted, mut rejected) = (0, 0);
    for tr in traces {
        let tr = tr?;
        for i in 0..times.len() {
            j_x[i] += tr.j[i];
            n_total[i] += tr.n[i];
        }
        accepted += tr.accepted;
        rejected += tr.rejected;
    }
    for j in &mut j_x {
        *j *= 2.0 * c1 * c1;
    }
    ens.t = params.t_end;

    let last = samples.last().unwrap();
    let n_k_final: Vec<ModeOccupation> = ens
        .modes
        .iter()
        .map(|m| ModeOccupation {
            ix: m.ix,
            iy: m.iy,
            n: occupation(m, omega_sq_at(m.k_x, m.k_y, last, params).sqrt(), v),
            drift: m.drift,
        })
        .collect();
    let transport = transported_number(&times, &j_x)?;
    let diagnostics = Diagnostics {
        max_wronskian_drift: ens.max_drift(),
        adiabaticity_margin: adiabaticity_margin(pulse, params),
        quadrature_error: transport.error_estimate,
        n_total_final: *n_total.last().unwrap(),
        max_n_k_final: n_k_final.iter().map(|m| m.n).fold(f64::NEG_INFINITY, f64::max),
        min_n_total: n_total.iter().copied().fold(f64::INFINITY, f64::min),
        steps_accepted: accepted,
        steps_rejected: rejected,
        samples: times.len(),
        modes: ens.modes.len(),
    };
    Ok(RunResult {
        e_tilde: samples.iter().map(|s| s.e_tilde).collect(),
        m_of_t: samples.iter().map(|s| s.m).collect(),
        times,
        j_x,
        n_total,
        n_k_final,
        n_transported: transport.value,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adiabatic::current_linear_response_at;
    use crate::modes::{evolve, init_modes_unchecked, Mode};
    use crate::pulse::make_pulse;
    use num_complex::Complex64;

    fn small() -> SimulationParams {
        let mut p = SimulationParams::new(6.0, 60.0, 12, 4, -80.0, 80.0);
        p.cutoff_factor = 0.0;
        p
    }

    #[test]
    fn vacuum_current_vanishes_and_matches_linear_response() {
        let p = small();
        let ens = init_modes_unchecked(&p, &PulseProfile::null(1.0)).unwrap();
        assert!(vortex_current(&ens, &PulseProfile::null(1.0), p.t_start).abs() < 1e-15);
        // the vacuum with a static field is exactly the linear-response sum
        let mut pu = make_pulse("unipolar-gaussian", 1.0, 0.2, 1.0, 1.0, 0.0).unwrap();
        pu.t_center = p.t_start;
        let mut q = p.clone();
        q.t_start = -1e6;
        let mut ens = init_modes_unchecked(&q, &PulseProfile::null(1.0)).unwrap();
        let s = pu.evaluate(p.t_start);
        for m in &mut ens.modes {
            let om = omega_sq_at(m.k_x, m.k_y, &s, &p).sqrt();
            m.f = Complex64::new((2.0 * om * p.volume()).powf(-0.5), 0.0);
        }
        let j = vortex_current(&ens, &pu, p.t_start);
        let lr = current_linear_response_at(s.e_tilde, s.m, &p).full;
        // identical summands up to rounding; compare on the scale of Σ|term|
        let scale: f64 = ens.modes.iter().map(|m| (m.k_x - s.e_tilde).abs() * 2.0 * m.f.norm_sqr()).sum();
        assert!((j - lr).abs() <= 1e-14 * scale, "{j} {lr}");
    }

    #[test]
    fn occupation_examples() {
        let v: f64 = 50.0;
        let om: f64 = 1.3;
        let f = Complex64::new((2.0 * om * v).powf(-0.5), 0.0);
        let mut m = Mode { ix: 0, iy: 0, k_x: 0.0, k_y: 0.0, f, f_dot: Complex64::new(0.0, -om) * f, drift: 0.0 };
        assert!(occupation(&m, om, v).abs() < 1e-15);
        m.f *= 3f64.sqrt();
        m.f_dot *= 3f64.sqrt();
        assert!((occupation(&m, om, v) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sudden_quench_matches_bogoliubov() {
        // vacuum of M0 evolved under 2 M0
        let p = small();
        let ens0 = init_modes_unchecked(&p, &PulseProfile::null(1.0)).unwrap();
        let mut ens = ens0.clone();
        let after = PulseProfile::null(2.0);
        evolve(&mut ens, &after, p.t_start + 3.7, 1e-12, &Default::default()).unwrap();
        let mut expected = 0.0;
        for m in &ens.modes {
            let w1 = (m.k_x * m.k_x + m.k_y * m.k_y + 1.0).sqrt();
            let w2 = (m.k_x * m.k_x + m.k_y * m.k_y + 4.0).sqrt();
            let nb = (w1 - w2).powi(2) / (4.0 * w1 * w2);
            let n = occupation(m, w2, p.volume());
            assert!((n - nb).abs() < 1e-8);
            expected += nb;
        }
        let k0 = ens.get(0, 0).unwrap();
        assert!((occupation(k0, 2.0, p.volume()) - 0.125).abs() < 1e-10);
        let total = residual_excitation(&ens, &after, ens.t);
        assert!((total - expected).abs() < 1e-8 * ens.modes.len() as f64);
    }

    #[test]
    fn current_reduction_order() {
        let p = small();
        let pu = make_pulse("bipolar-derivative", 1.0, 0.1, 0.4, 6.0, 0.0).unwrap().with_m_offset(-4.0);
        let mut ens = init_modes_unchecked(&p, &pu).unwrap();
        evolve(&mut ens, &pu, -4.0, 1e-10, &Default::default()).unwrap();
        let fwd = vortex_current(&ens, &pu, ens.t);
        let e = pu.e_tilde(ens.t);
        let rev: f64 = 2.0 * ens.modes.iter().rev().map(|m| (m.k_x - e) * m.f.norm_sqr()).sum::<f64>();
        assert!(fwd != 0.0 && ((fwd - rev) / fwd).abs() < 1e-13);
    }

    #[test]
    fn transport_quadrature() {
        let t: Vec<f64> = (0..=200).map(|i| -10.0 + 0.1 * i as f64).collect();
        let zero = vec![0.0; t.len()];
        assert_eq!(transported_number(&t, &zero).unwrap().value, 0.0);
        let odd: Vec<f64> = t.iter().map(|x| x * (-x * x).exp()).collect();
        assert!(transported_number(&t, &odd).unwrap().value.abs() < 1e-15);
        let g: Vec<f64> = t.iter().map(|x| (-x * x).exp()).collect();
        let tr = transported_number(&t, &g).unwrap();
        assert!((tr.value - std::f64::consts::PI.sqrt()).abs() < 1e-12);
        let mut bad = t.clone();
        bad[7] = bad[6];
        assert!(matches!(transported_number(&bad, &g), Err(Error::NonMonotoneTime(7))));
    }

    #[test]
    fn sampling_density() {
        let p = small();
        let pu = make_pulse("bipolar-derivative", 1.0, 0.1, 0.4, 6.0, 0.0).unwrap();
        let ts = sample_times(&p, &pu, &SamplingSpec::default());
        let dt = ts[1] - ts[0];
        assert!(dt <= 6.0 / 400.0 + 1e-12 && (ts.len() - 1) % 2 == 0);
        assert_eq!(*ts.last().unwrap(), p.t_end);
    }

    #[test]
    fn null_run_and_pure_dip() {
        let mut p = SimulationParams::new(4.0, 40.0, 8, 3, -40.0, 40.0);
        p.cutoff_factor = 0.0;
        let null = PulseProfile::null(1.0);
        let mut q = p.clone();
        q.cutoff_factor = 0.0;
        let run0 = run_unchecked(&q, &null);
        assert!(run0.n_transported.abs() < 1e-15);
        assert!(run0.diagnostics.n_total_final < 1e-8);
        let dip = make_pulse("bipolar-derivative", 1.0, 0.0, 0.5, 4.0, 0.0).unwrap();
        let r = run_unchecked(&q, &dip);
        assert!(r.j_x.iter().all(|&j| j.abs() < 1e-14));
        assert!(r.n_total[0].abs() < 1e-12 && r.diagnostics.min_n_total > -1e-9);
    }

    fn run_unchecked(p: &SimulationParams, pu: &PulseProfile) -> RunResult {
        let mut q = p.clone();
        q.aspect_min = 0.0;
        run(&q, pu, &RunOptions::default()).unwrap()
    }

    #[test]
    fn csv_layout() {
        let mut p = SimulationParams::new(4.0, 40.0, 8, 2, -30.0, 30.0);
        p.cutoff_factor = 0.0;
        let r = run_unchecked(&p, &PulseProfile::null(1.0));
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,j_x,n_total,e_tilde,m_of_t\n"));
        assert_eq!(text.lines().count(), r.times.len() + 1);
        let mut buf = Vec::new();
        r.write_modes_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 17 * 5 + 1);
    }
}
