//! Closed-form adiabatic predictions: WKB modes, the linear-response current, the
//! lattice sum and the transported-number formula.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::params::SimulationParams;
use crate::pulse::PulseProfile;
use crate::quad::integrate;

/// Below this value of b′ = M L_x / 2c1 the e^(−4b) terms are no longer negligible.
pub const B_PRIME_WARN: f64 = 2.0;

const MARGIN_SAMPLES: usize = 4000;

/// |ω̇|/ω² of a single mode.
pub fn mode_margin(k_x: f64, k_y: f64, t: f64, pulse: &PulseProfile, params: &SimulationParams) -> f64 {
    let s = pulse.evaluate(t);
    let c1sq = params.c1 * params.c1;
    let q = k_x - s.e_tilde;
    let w = c1sq * (k_y * k_y + q * q) + s.m * s.m;
    // ω̇ = (−c1²(k_x − Ẽ)Ẽ̇ + M Ṁ)/ω
    (-c1sq * q * s.e_dot + s.m * s.m_dot).abs() / w.powf(1.5)
}

/// max over the grid and a dense time grid of |ω̇_k|/ω_k². The numerator does not
/// depend on k_y while ω grows with it, so only the k_y = 0 row is scanned.
pub fn adiabaticity_margin(pulse: &PulseProfile, params: &SimulationParams) -> f64 {
    let (a, b) = params_window(pulse, params);
    let mut best = 0.0f64;
    for i in 0..=MARGIN_SAMPLES {
        let t = a + (b - a) * i as f64 / MARGIN_SAMPLES as f64;
        for ix in -(params.n_kx as i32)..=params.n_kx as i32 {
            best = best.max(mode_margin(params.kx(ix), 0.0, t, pulse, params));
        }
    }
    best
}

fn params_window(pulse: &PulseProfile, params: &SimulationParams) -> (f64, f64) {
    let (lo, hi) = pulse.support();
    (lo.max(params.t_start), hi.min(params.t_end))
}

/// ∫_{t_start}^{t} ω_k dt′.
pub fn wkb_phase(k_x: f64, k_y: f64, pulse: &PulseProfile, t: f64, params: &SimulationParams) -> f64 {
    let om = |s: f64| crate::modes::omega_sq(k_x, k_y, s, pulse, params).sqrt();
    let (lo, hi) = pulse.support();
    // split at the support edges so the adaptive rule sees the pulse
    let mut cuts = vec![params.t_start];
    for c in [lo, pulse.t_center, pulse.t_dip(), hi] {
        if c > params.t_start && c < t {
            cuts.push(c);
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.push(t);
    cuts.windows(2).map(|w| integrate(om, w[0], w[1], 1e-13, 1e-13).value).sum()
}

/// [2ω_k(t)V]^(−1/2) exp(−i∫ω dt′).
pub fn wkb_mode(k_x: f64, k_y: f64, pulse: &PulseProfile, t: f64, params: &SimulationParams) -> Complex64 {
    let om = crate::modes::omega_sq(k_x, k_y, t, pulse, params).sqrt();
    let phase = wkb_phase(k_x, k_y, pulse, t, params);
    Complex64::from_polar((2.0 * om * params.volume()).powf(-0.5), -phase)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearResponse {
    /// (c1²/V) Σ_k (k_x − Ẽ)/ω_k.
    pub full: f64,
    /// −(c1²Ẽ/V) Σ_{k_y} m² Σ_{k_x} (c1²k_x² + m²)^(−3/2), m² = c1²k_y² + M².
    pub first_order: f64,
}

pub fn current_linear_response(pulse: &PulseProfile, params: &SimulationParams, t: f64) -> LinearResponse {
    let s = pulse.evaluate(t);
    current_linear_response_at(s.e_tilde, s.m, params)
}

pub fn current_linear_response_at(e: f64, m: f64, params: &SimulationParams) -> LinearResponse {
    let c1sq = params.c1 * params.c1;
    let v = params.volume();
    let (nx, ny) = (params.n_kx as i32, params.n_ky as i32);
    let mut full = 0.0;
    let mut first = 0.0;
    for ix in -nx..=nx {
        let kx = params.kx(ix);
        for iy in -ny..=ny {
            let ky = params.ky(iy);
            let q = kx - e;
            full += q / (c1sq * (ky * ky + q * q) + m * m).sqrt();
        }
    }
    for iy in -ny..=ny {
        let ky = params.ky(iy);
        let m2 = c1sq * ky * ky + m * m;
        let mut inner = 0.0;
        for ix in -nx..=nx {
            let kx = params.kx(ix);
            inner += (c1sq * kx * kx + m2).powf(-1.5);
        }
        first += m2 * inner;
    }
    LinearResponse { full: c1sq * full / v, first_order: -c1sq * e * first / v }
}

/// Sum minus k_x-integral of the linear-response current over the window
/// n ∈ [−n_kx + shift, n_kx + shift]; the integral covers the same window with
/// half-cell margins. Periodic in Ẽ with period 2π/L_x when the window follows Ẽ.
pub fn current_lattice_part(e: f64, m: f64, params: &SimulationParams, shift: i32) -> f64 {
    let c1sq = params.c1 * params.c1;
    let v = params.volume();
    let (nx, ny) = (params.n_kx as i32, params.n_ky as i32);
    let dk = 2.0 * PI / params.l_x;
    let (lo, hi) = (params.kx(-nx + shift) - 0.5 * dk, params.kx(nx + shift) + 0.5 * dk);
    let mut total = 0.0;
    for iy in -ny..=ny {
        let ky = params.ky(iy);
        let m2 = c1sq * ky * ky + m * m;
        let mut sum = 0.0;
        for ix in (-nx + shift)..=(nx + shift) {
            let q = params.kx(ix) - e;
            sum += q / (c1sq * q * q + m2).sqrt();
        }
        // ∫ q/√(c1²q² + m²) dq = √(c1²q² + m²)/c1²
        let prim = |k: f64| (c1sq * (k - e).powi(2) + m2).sqrt() / c1sq;
        total += sum - (prim(hi) - prim(lo)) / dk;
    }
    c1sq * total / v
}

/// Σ_n (π²n² + b²)^(−3/2) = (2/πb²)(1 + ∫_b^∞ ω dω /(√(ω²−b²) sinh²ω)), with ω = b cosh u.
pub fn lattice_sum(b: f64) -> Option<f64> {
    if !(b > 0.0) {
        return None;
    }
    Some(2.0 / (PI * b * b) * (1.0 + lattice_integral(b)))
}

/// The integral term of `lattice_sum`; this is the exact relative finite-size correction.
pub fn lattice_integral(b: f64) -> f64 {
    // sinh⁻²ω < 4e^(−2ω) is below 1e-40 of the leading term once ω − b > 46
    let u_max = ((b + 46.0) / b).acosh();
    let g = |u: f64| {
        let w = b * u.cosh();
        let sh = w.sinh();
        b * u.cosh() / (sh * sh)
    };
    // the integrand decays on the scale u ~ 1/√b near the origin
    let mut cuts = vec![0.0];
    let mut x = 0.5 / b.sqrt().max(1.0);
    while x < u_max {
        cuts.push(x);
        x *= 2.0;
    }
    cuts.push(u_max);
    cuts.windows(2).map(|w| integrate(g, w[0], w[1], 1e-300, 1e-14).value).sum()
}

/// Direct summation over |n| ≤ n_max plus the integral tail 2∫_{N+½}^∞(π²x² + b²)^(−3/2)dx.
/// Returns the value and a bound on the tail error, O(N⁻⁵).
pub fn lattice_sum_direct(b: f64, n_max: u64) -> (f64, f64) {
    let mut s = b.powi(-3);
    for n in (1..=n_max).rev() {
        s += 2.0 * ((PI * n as f64).powi(2) + b * b).powf(-1.5);
    }
    let a = PI * (n_max as f64 + 0.5);
    let r = (a * a + b * b).sqrt();
    // 1 − a/r without cancellation
    let tail = 2.0 / PI / (r * (r + a));
    (s + tail, 1e-3 * tail)
}

/// Leading exponential correction 2√(πb) e^(−2b).
pub fn lattice_sum_correction(b: f64) -> f64 {
    2.0 * (PI * b).sqrt() * (-2.0 * b).exp()
}

/// First term of 1/sinh²ω = 4Σk e^(−2kω) in `lattice_integral`, exactly 4bK₁(2b).
/// Its large-b series is 2√(πb)e^(−2b)(1 + 3/16b − 15/512b² + …), so the remainder beyond
/// `lattice_sum_correction` is O(e^(−2b)/√b); only beyond this term is it O(e^(−4b)).
pub fn lattice_sum_first_term(b: f64) -> f64 {
    4.0 * b * bessel_k1(2.0 * b)
}

/// K₁(z) = ∫₀^∞ e^(−z cosh t) cosh t dt, for z > 0.
pub fn bessel_k1(z: f64) -> f64 {
    // the integrand is below e^(−z − 745) past cosh t = 1 + 745/z
    let t_max = (1.0 + 745.0 / z).acosh();
    let f = |t: f64| (-z * (t.cosh() - 1.0)).exp() * t.cosh();
    let mut cuts = vec![0.0];
    let mut x = 0.25 / z.sqrt().max(1.0);
    while x < t_max {
        cuts.push(x);
        x *= 2.0;
    }
    cuts.push(t_max);
    (-z).exp() * cuts.windows(2).map(|w| integrate(f, w[0], w[1], 1e-300, 1e-14).value).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedTransport {
    pub value: f64,
    pub b_prime_min: f64,
    pub warning: Option<String>,
}

/// −(1/π) ∫ Ẽ M e^(−M L_x/c1) dt.
pub fn predicted_transport(pulse: &PulseProfile, params: &SimulationParams) -> PredictedTransport {
    let (a, b) = params_window(pulse, params);
    let l = params.l_x / params.c1;
    let g = |t: f64| {
        let s = pulse.evaluate(t);
        s.e_tilde * s.m * (-s.m * l).exp()
    };
    let mut cuts = vec![a];
    for c in [pulse.t_center, pulse.t_dip()] {
        if c > a && c < b {
            cuts.push(c);
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.push(b);
    let scale = pulse.e_max.abs() * pulse.m0 * pulse.t_p;
    let value: f64 =
        -cuts.windows(2).map(|w| integrate(g, w[0], w[1], 1e-14 * scale * (-pulse.m0 * l).exp(), 1e-10).value).sum::<f64>()
            / PI;
    let b_prime_min = b_min(pulse, params);
    let warning = (b_prime_min < B_PRIME_WARN).then(|| {
        let w = format!("b' = M L_x/2c1 falls to {b_prime_min:.3} (< {B_PRIME_WARN}); the e^(-2b) expansion is unreliable");
        log::warn!("{w}");
        w
    });
    PredictedTransport { value, b_prime_min, warning }
}

fn b_min(pulse: &PulseProfile, params: &SimulationParams) -> f64 {
    let m_low = pulse.m(pulse.t_dip()).min(pulse.m_min);
    m_low * params.l_x / (2.0 * params.c1)
}

/// Value of M at the peak of |Ẽ M e^(−M L_x/c1)|, the mass that sets the effective
/// exponent of the transported number.
pub fn dominant_mass(pulse: &PulseProfile, params: &SimulationParams) -> f64 {
    let (a, b) = params_window(pulse, params);
    let l = params.l_x / params.c1;
    let n = 20000;
    let mut best = (0.0, pulse.m0);
    for i in 0..=n {
        let s = pulse.evaluate(a + (b - a) * i as f64 / n as f64);
        let g = (s.e_tilde * s.m * (-s.m * l).exp()).abs();
        if g > best.0 {
            best = (g, s.m);
        }
    }
    best.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdiabaticPrediction {
    pub n_transported_pred: f64,
    pub margin: f64,
    pub b_min: f64,
    pub touch: bool,
    /// (t_p/2π) / (L_x/c1).
    pub tp_ratio: f64,
    pub lx_over_lambda: f64,
    pub dominant_mass: f64,
    pub warning: Option<String>,
}

pub fn operating_conditions(pulse: &PulseProfile, params: &SimulationParams) -> AdiabaticPrediction {
    let pred = predicted_transport(pulse, params);
    let b = pred.b_prime_min;
    AdiabaticPrediction {
        n_transported_pred: pred.value,
        margin: adiabaticity_margin(pulse, params),
        b_min: b,
        touch: b <= 0.5,
        tp_ratio: pulse.t_p / (2.0 * PI) / (params.l_x / params.c1),
        lx_over_lambda: params.l_x * params.m0 / params.c1,
        dominant_mass: dominant_mass(pulse, params),
        warning: pred.warning,
    }
}

/// Least-squares slope of y against x.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modes::{evolve, init_modes_unchecked, EngineOptions, Integrator};
    use crate::pulse::make_pulse;

    fn grid(l: f64, nx: usize, ny: usize) -> SimulationParams {
        let mut p = SimulationParams::new(l, 10.0 * l, nx, ny, -1e4, 1e4);
        p.cutoff_factor = 0.0;
        p
    }

    #[test]
    fn lattice_sum_identity() {
        for b in [1.0, 2.0, 5.0, 10.0] {
            let (exact, _) = lattice_sum_direct(b, 200_000);
            let q = lattice_sum(b).unwrap();
            assert!((q / exact - 1.0).abs() < 1e-10, "b={b}: {q} vs {exact}");
        }
        assert!(lattice_sum(0.0).is_none() && lattice_sum(-1.0).is_none());
        let b = 10.0;
        let asym = 2.0 / (PI * b * b) * (1.0 + lattice_sum_correction(b));
        assert!((lattice_sum(b).unwrap() / asym - 1.0).abs() < 1e-8);
    }

    #[test]
    fn bessel_first_term() {
        // reference values of K₁
        for (z, k) in [(1.0, 0.601_907_230_197_234_6), (2.0, 0.139_865_881_816_522_4), (12.0, 2.290_757_464_767_188e-6)] {
            assert!((bessel_k1(z) / k - 1.0).abs() < 1e-12, "z={z}");
        }
        let b = 8.0;
        let rest = lattice_integral(b) - lattice_sum_first_term(b);
        // next term 8bK₁(4b) = 1.817e-13
        assert!((rest / 1.8166e-13 - 1.0).abs() < 0.05, "{rest}");
    }

    #[test]
    fn correction_terms() {
        assert_eq!(lattice_sum_correction(3.0), 2.0 * (3.0 * PI).sqrt() * (-6.0f64).exp());
        assert!(lattice_sum_correction(200.0) < 1e-150);
        let mut prev = 0.0;
        for b in [0.1, 0.5, 1.0, 3.0, 8.0, 20.0] {
            assert!(lattice_integral(b) > 0.0);
            // b² S(b) → 2/π from above, monotonically
            let y = b * b * lattice_sum(b).unwrap();
            if prev > 0.0 {
                assert!(y < prev);
            }
            prev = y;
        }
    }

    #[test]
    fn margin_scaling_and_location() {
        let p = grid(8.0, 40, 4);
        assert_eq!(adiabaticity_margin(&PulseProfile::null(1.0), &p), 0.0);
        let a = make_pulse("bipolar-derivative", 1.0, 0.05, 0.5, 100.0, 0.0).unwrap().with_m_offset(-70.0);
        let mut b = a.clone();
        b.t_p *= 2.0;
        b.m_offset *= 2.0;
        let ratio = adiabaticity_margin(&a, &p) / adiabaticity_margin(&b, &p);
        assert!((ratio - 2.0).abs() < 0.2, "{ratio}");
        // an exhaustive scan over every grid mode finds the same maximum
        let (lo, hi) = a.support();
        let mut best = (0.0, 0.0, 0);
        for i in 0..=400 {
            let t = lo + (hi - lo) * i as f64 / 400.0;
            for (ix, iy) in p.grid() {
                let g = mode_margin(p.kx(ix), p.ky(iy), t, &a, &p);
                if g > best.0 {
                    best = (g, t, iy);
                }
            }
        }
        assert_eq!(best.2, 0);
        let scan = adiabaticity_margin(&a, &p);
        assert!(best.0 <= scan * (1.0 + 1e-3));
    }

    #[test]
    fn linear_response_orders() {
        let p = grid(6.0, 30, 6);
        let zero = current_linear_response_at(0.0, 1.0, &p);
        assert!(zero.full.abs() < 1e-16 && zero.first_order == 0.0);
        let d = |e: f64| {
            let r = current_linear_response_at(e, 0.8, &p);
            (r.full - r.first_order).abs()
        };
        let e = 0.02;
        let ratio = d(e) / d(e / 2.0);
        // the difference is O(Ẽ²) or smaller: halving Ẽ cuts it by at least 4
        assert!(ratio > 3.9, "{ratio}");
    }

    #[test]
    fn lattice_part_is_periodic() {
        let p = grid(5.0, 25, 5);
        let dk = 2.0 * PI / p.l_x;
        for e in [0.03, 0.2, -0.4] {
            let a = current_lattice_part(e, 0.9, &p, 0);
            let b = current_lattice_part(e + dk, 0.9, &p, 1);
            // relabelling identity, up to rounding of the shifted k values
            assert!((a - b).abs() < 1e-10 * a.abs(), "{a} {b}");
        }
    }

    #[test]
    fn prediction_symmetries() {
        let p = grid(8.0, 40, 4);
        let null = PulseProfile::null(1.0);
        assert_eq!(predicted_transport(&null, &p).value, 0.0);
        let flat = make_pulse("bipolar-derivative", 1.0, 0.05, 1.0, 100.0, 0.0).unwrap();
        let v = predicted_transport(&flat, &p).value;
        assert!(v.abs() < 1e-12 * 0.05 * 100.0 * (-8.0f64).exp());
        let a = make_pulse("bipolar-derivative", 1.0, 0.05, 0.5, 100.0, 0.0).unwrap().with_m_offset(-70.0);
        let mut neg = a.clone();
        neg.e_max = -0.05;
        let (x, y) = (predicted_transport(&a, &p).value, predicted_transport(&neg, &p).value);
        assert!(x < 0.0 && (x + y).abs() < 1e-12 * x.abs());
        let g = make_pulse("unipolar-gaussian", 1.0, 0.05, 0.5, 100.0, 0.0).unwrap();
        assert!(predicted_transport(&g, &p).value < 0.0);
        let low = make_pulse("bipolar-derivative", 1.0, 0.05, 0.3, 100.0, 0.0).unwrap().with_m_offset(-70.0);
        assert!(predicted_transport(&low, &grid(4.0, 20, 2)).warning.is_some());
    }

    #[test]
    fn operating_point_examples() {
        let mut p = grid(10.0, 40, 4);
        let c = operating_conditions(&PulseProfile::null(1.0), &p);
        assert!(!c.touch && (c.lx_over_lambda - 10.0).abs() < 1e-12 && c.margin == 0.0);
        let mut at = make_pulse("bipolar-derivative", 1.0, 0.01, 0.1, 1000.0, 0.0).unwrap();
        at.m_min = 1.0 / p.l_x;
        assert!(operating_conditions(&at, &p).touch);
        at.t_p = 100.0 * p.l_x;
        p.t_start = -1e5;
        p.t_end = 1e5;
        let c = operating_conditions(&at, &p);
        assert!((c.tp_ratio - 100.0 / (2.0 * PI)).abs() < 1e-12);
    }

    #[test]
    fn wkb_tracks_slow_evolution() {
        let mut p = grid(8.0, 10, 1);
        p.t_start = -4000.0;
        p.t_end = 4000.0;
        let null = PulseProfile::null(1.0);
        let z = wkb_mode(p.kx(2), 0.0, &null, -3000.0, &p);
        let om = crate::modes::omega_sq(p.kx(2), 0.0, 0.0, &null, &p).sqrt();
        let f0 = (2.0 * om * p.volume()).powf(-0.5);
        assert!((z - Complex64::from_polar(f0, -om * 1000.0)).norm() < 1e-10 * f0);

        let pu = make_pulse("bipolar-derivative", 1.0, 0.02, 0.8, 400.0, 0.0).unwrap().with_m_offset(-280.0);
        assert!(adiabaticity_margin(&pu, &p) < 1e-3);
        let mut ens = init_modes_unchecked(&p, &pu).unwrap();
        let opts = EngineOptions { integrator: Integrator::Magnus4, ..Default::default() };
        evolve(&mut ens, &pu, p.t_end, 1e-12, &opts).unwrap();
        // softest mode: k_x = 0, k_y = 0
        let m = ens.get(0, 0).unwrap();
        let w = wkb_mode(0.0, 0.0, &pu, p.t_end, &p);
        assert!((m.f - w).norm() < 1e-2 * w.norm(), "{} vs {}", m.f, w);
        assert!((w.norm_sqr() - 1.0 / (2.0 * p.volume())).abs() < 1e-15);
    }

    #[test]
    fn slope_fit() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 0.7 * v).collect();
        assert!((fit_slope(&x, &y) + 0.7).abs() < 1e-14);
    }
}
