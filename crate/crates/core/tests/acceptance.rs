//! End-to-end acceptance checks. One line per criterion is written straight to stdout,
//! so it shows up even when the harness captures test output.

use num_complex::Complex64;
use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use vortex_tunnel::adiabatic;
use vortex_tunnel::estimates::{self, ConditionOptions};
use vortex_tunnel::fermion::{self, CoreBand, InitialOccupation, VelocityProfile};
use vortex_tunnel::harness::{self, Scenario, SweepAxis, SweepSpec};
use vortex_tunnel::instanton;
use vortex_tunnel::modes::{evolve, init_modes_unchecked, occupation};
use vortex_tunnel::observables::SamplingSpec;
use vortex_tunnel::{make_pulse, MaterialParams, PhysicalConstants, PulseProfile, SimulationParams};

struct Ledger {
    results: Vec<(usize, bool)>,
}

impl Ledger {
    fn record(&mut self, n: usize, pass: bool, detail: String) {
        let mut out = std::io::stdout().lock();
        writeln!(out, "criterion {n:>2}: {} — {detail}", if pass { "PASS" } else { "FAIL" }).unwrap();
        out.flush().unwrap();
        self.results.push((n, pass));
    }

    fn note(&self, msg: String) {
        let mut out = std::io::stdout().lock();
        writeln!(out, "    {msg}").unwrap();
    }
}

/// Independent oracle: Σ_n (π²n² + b²)^(−3/2) by direct summation with an integral tail.
fn direct_lattice_sum(b: f64) -> f64 {
    let n_max = 400_000u64;
    let mut s = 0.0;
    for n in (1..=n_max).rev() {
        s += ((PI * n as f64).powi(2) + b * b).powf(-1.5);
    }
    let a = PI * (n_max as f64 + 0.5);
    let r = (a * a + b * b).sqrt();
    b.powi(-3) + 2.0 * s + 2.0 / (PI * r * (r + a))
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

/// Bipolar drive with the mass dip under its positive lobe; t_p in units of 1/M0.
fn wire_scenario(l: f64, t_p: f64) -> Scenario {
    let pulse = make_pulse("bipolar-derivative", 1.0, 0.4 / l, 0.5, t_p, 0.0).unwrap().with_m_offset(-t_p / 2f64.sqrt());
    let (lo, hi) = pulse.support();
    Scenario {
        sim: SimulationParams::new(l, 10.0 * l, 100, 25, lo, hi),
        pulse,
        engine: Default::default(),
        outputs: Default::default(),
        sweep: None,
    }
}

/// First-order adiabatic estimate |∫(ω̇/2ω)e^(−2i∫ω)dt|² for the k = 0 mode.
fn wkb_pair_estimate(p: &PulseProfile, params: &SimulationParams) -> f64 {
    let (lo, hi) = p.support();
    let n = 400_000;
    let dt = (hi - lo) / n as f64;
    let w = |t: f64| {
        let s = p.evaluate(t);
        ((params.c1 * s.e_tilde).powi(2) + s.m * s.m).sqrt()
    };
    let wdot = |t: f64| {
        let s = p.evaluate(t);
        (params.c1 * params.c1 * s.e_tilde * s.e_dot + s.m * s.m_dot) / w(t)
    };
    let (mut phase, mut beta) = (0.0, Complex64::new(0.0, 0.0));
    let mut prev = w(lo);
    for i in 0..n {
        let t = lo + (i as f64 + 0.5) * dt;
        let wm = w(t);
        let next = w(lo + (i + 1) as f64 * dt);
        let ph_mid = phase + 0.5 * dt * (prev + wm) / 2.0;
        beta += wdot(t) / (2.0 * wm) * Complex64::from_polar(1.0, -2.0 * ph_mid) * dt;
        phase += dt * (prev + 4.0 * wm + next) / 6.0;
        prev = next;
    }
    beta.norm_sqr()
}

fn files_equal(a: &Path, b: &Path) -> bool {
    let mut names: Vec<_> = fs::read_dir(a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    !names.is_empty() && names.iter().all(|n| fs::read(a.join(n)).ok() == fs::read(b.join(n)).ok())
}

#[test]
fn acceptance() {
    let mut led = Ledger { results: Vec::new() };
    let mut max_drift = 0.0f64;
    let work = tempfile::tempdir().unwrap();

    // 1. film estimates
    {
        let consts = PhysicalConstants::gaussian();
        let mat = MaterialParams::reference(&consts);
        let r = estimates::check_conditions(&mat, &consts, 1e-4, 1e-9, &ConditionOptions::default());
        let f2 = |x: f64, t: f64| (x / t).max(t / x) <= 2.0;
        let ok = rel(r.lambda_compton, 35e-7) < 0.10
            && rel(r.ratio_lx_lambda, 30.0) < 0.10
            && rel(r.gap_reduction, 5.0) < 0.15
            && f2(r.t_p_bound_quasiparticle, 4e-12)
            && f2(r.t_p_bound_vortex, 1e-14);
        led.record(
            1,
            ok,
            format!(
                "lambda = {:.2} nm, L_x/lambda = {:.2}, gap reduction = {:.2}, t_p bounds {:.2e} s / {:.2e} s",
                r.lambda_compton * 1e7,
                r.ratio_lx_lambda,
                r.gap_reduction,
                r.t_p_bound_quasiparticle,
                r.t_p_bound_vortex
            ),
        );
    }

    // 2. lattice-sum identity against direct summation
    {
        let mut worst = 0.0f64;
        for b in [1.0, 2.0, 5.0, 10.0] {
            worst = worst.max(rel(adiabatic::lattice_sum(b).unwrap(), direct_lattice_sum(b)));
        }
        led.record(2, worst < 1e-10, format!("max relative difference {worst:.2e} (b = 1, 2, 5, 10)"));
    }

    // 3. next exponential correction
    let c3_derived = {
        let bs: Vec<f64> = (0..=16).map(|i| 2.0 + 0.25 * i as f64).collect();
        let lead = |b: f64| 2.0 * (PI * b).sqrt() * (-2.0 * b).exp();
        let resid = |exact: f64, b: f64| exact * PI * b * b / 2.0 - 1.0 - lead(b);
        let quad: Vec<f64> = bs.iter().map(|&b| resid(adiabatic::lattice_sum(b).unwrap(), b).abs().ln()).collect();
        let slope = adiabatic::fit_slope(&bs, &quad);
        let direct: Vec<f64> = bs.iter().map(|&b| resid(direct_lattice_sum(b), b).abs().ln()).collect();
        let slope_direct = adiabatic::fit_slope(&bs, &direct);
        led.record(
            3,
            (slope + 4.0).abs() <= 0.3 && (slope_direct + 4.0).abs() <= 0.3,
            format!("log-slope {slope:.3} (quadrature), {slope_direct:.3} (direct sum), b in [2, 6]"),
        );
        // The whole first term of 1/sinh² = 4Σk e^(−2kω) is 4bK₁(2b) = lead·(1 + 3/16b + …);
        // only after removing all of it does the remainder fall like e^(−4b).
        let k1 = |z: f64| {
            let h = 1e-3;
            (0..=8000).map(|i| {
                let t = i as f64 * h;
                (-z * t.cosh()).exp() * t.cosh() * if i == 0 { 0.5 } else { 1.0 }
            })
            .sum::<f64>()
                * h
        };
        let full: Vec<f64> = bs
            .iter()
            .map(|&b| (direct_lattice_sum(b) * PI * b * b / 2.0 - 1.0 - 4.0 * b * k1(2.0 * b)).abs().ln())
            .collect();
        let slope_full = adiabatic::fit_slope(&bs, &full);
        let b = 6.0;
        let coeff = resid(direct_lattice_sum(b), b) / lead(b) * b;
        let series = 3.0 / 16.0 - 15.0 / (512.0 * b);
        led.note(format!(
            "remainder after 2(pi b)^(1/2) e^(-2b) is lead x {coeff:.4}/b at b = 6 (Bessel series 3/16 - 15/512b = {series:.4}); \
             after the full 4bK1(2b) term the log-slope is {slope_full:.3}"
        ));
        let ok = (slope_full + 4.0).abs() <= 0.3 && (coeff / series - 1.0).abs() < 0.02;
        let mut out = std::io::stdout().lock();
        writeln!(
            out,
            "criterion  3 (derived form): {} — remainder beyond the full first Bessel term decays with slope {slope_full:.3}",
            if ok { "PASS" } else { "FAIL" }
        )
        .unwrap();
        ok
    };

    // 4. transported number against the adiabatic formula, L_x = 8..12
    let t4 = Instant::now();
    let mut base = wire_scenario(8.0, 400.0);
    base.sweep = Some(SweepSpec { axis: SweepAxis::LX, values: vec![8.0, 9.0, 10.0, 11.0, 12.0], similarity: true });
    let sweep = harness::run_sweep(&base, Some(&work.path().join("sweep"))).unwrap();
    {
        let mut ok = true;
        for p in &sweep.points {
            let s = base.at(p.value).unwrap();
            // independent trapezoid of −(1/π)∫Ẽ M e^(−M L_x/c1) dt
            let (lo, hi) = s.pulse.support();
            let n = 200_000;
            let h = (hi - lo) / n as f64;
            let g = |t: f64| {
                let q = s.pulse.evaluate(t);
                q.e_tilde * q.m * (-q.m * s.sim.l_x).exp()
            };
            let trap = -(0..=n).map(|i| g(lo + i as f64 * h) * if i == 0 || i == n { 0.5 } else { 1.0 }).sum::<f64>() * h / PI;
            led.note(format!(
                "L_x = {:>4}: N = {:.5e}, predicted = {:.5e} (trapezoid {:.5e}), ratio {:.4}, M* = {:.4}",
                p.value, p.n_transported, p.n_predicted, trap, p.ratio, p.dominant_mass
            ));
            ok &= (p.ratio - 1.0).abs() < 0.25 && rel(trap, p.n_predicted) < 1e-6;
            max_drift = max_drift.max(p.max_wronskian_drift);
        }
        let fit = sweep.fit.clone().unwrap();
        ok &= fit.relative_difference < 0.05;
        led.record(
            4,
            ok,
            format!(
                "ratios within 25%; slope {:.4} vs predicted {:.4} ({:.2}% apart); {:.0} s",
                fit.slope_measured,
                fit.slope_predicted,
                100.0 * fit.relative_difference,
                t4.elapsed().as_secs_f64()
            ),
        );
    }

    // 5. adiabatic suppression of pair creation
    {
        let max_nk = sweep.points.iter().map(|p| p.max_n_k_final).fold(f64::NEG_INFINITY, f64::max);
        let last = sweep.points.last().unwrap();
        let l_y = 10.0 * last.value;
        let suppressed = last.n_total_final.abs() * 10.0 <= last.n_transported.abs() * l_y;
        led.note(format!(
            "largest t_p: n_total = {:.3e} vs |N| L_y = {:.3e}; max n_k over the sweep {:.3e}",
            last.n_total_final,
            last.n_transported.abs() * l_y,
            max_nk
        ));
        let mut totals = Vec::new();
        for t_p in [2.0, 4.0, 8.0] {
            let mut s = wire_scenario(8.0, t_p);
            s.outputs = harness::OutputSpec { sampling: SamplingSpec::default(), per_mode: true };
            let dir = work.path().join(format!("tp{t_p}_threads1"));
            let (r, _) = harness::with_threads(Some(1), || harness::run_simulate(&s, Some(&dir))).unwrap().unwrap();
            max_drift = max_drift.max(r.diagnostics.max_wronskian_drift);
            let k0 = r.n_k_final.iter().find(|m| m.ix == 0 && m.iy == 0).unwrap().n;
            led.note(format!(
                "t_p = {t_p}: n_total = {:.4e}, n(0,0) = {:.4e}, first-order estimate {:.4e}",
                r.diagnostics.n_total_final,
                k0,
                wkb_pair_estimate(&s.pulse, &s.sim)
            ));
            totals.push(r.diagnostics.n_total_final);
        }
        let (r1, r2) = (totals[0] / totals[1], totals[1] / totals[2]);
        led.record(
            5,
            max_nk < 1e-4 && suppressed && r1 > 1.0 && r2 > r1,
            format!("max n_k {max_nk:.2e}; doubling t_p from 2 reduces n_total by {r1:.1}x then {r2:.1}x"),
        );
    }

    // 7 before 6, so the drift bound covers every run
    let c7 = {
        let p = SimulationParams::new(6.0, 60.0, 16, 6, -10.0, 10.0);
        let mut ens = init_modes_unchecked(&p, &PulseProfile::null(1.0)).unwrap();
        evolve(&mut ens, &PulseProfile::null(2.0), -10.0 + 2.3, 1e-12, &Default::default()).unwrap();
        max_drift = max_drift.max(ens.max_drift());
        let mut worst = 0.0f64;
        for m in &ens.modes {
            let k2 = m.k_x * m.k_x + m.k_y * m.k_y;
            let (w1, w2) = ((k2 + 1.0).sqrt(), (k2 + 4.0).sqrt());
            let nb = (w1 - w2).powi(2) / (4.0 * w1 * w2);
            worst = worst.max((occupation(m, w2, p.volume()) - nb).abs());
        }
        let k0 = occupation(ens.get(0, 0).unwrap(), 2.0, p.volume());
        (worst < 1e-8 && (k0 - 0.125).abs() < 1e-8, format!("max |n - n_Bogoliubov| = {worst:.2e}, k = 0 gives {k0:.12}"))
    };

    // 10. byte-identical outputs for 1, 4 and 8 workers
    let c10 = {
        let mut s = wire_scenario(8.0, 2.0);
        s.outputs = harness::OutputSpec { sampling: SamplingSpec::default(), per_mode: true };
        let one = work.path().join("tp2_threads1");
        let mut ok = true;
        for n in [4, 8] {
            let dir = work.path().join(format!("tp2_threads{n}"));
            let (r, _) = harness::with_threads(Some(n), || harness::run_simulate(&s, Some(&dir))).unwrap().unwrap();
            max_drift = max_drift.max(r.diagnostics.max_wronskian_drift);
            ok &= files_equal(&one, &dir);
        }
        (ok, "summary.json, timeseries.csv and modes.csv identical for 1, 4, 8 workers".to_string())
    };

    led.record(6, max_drift < 1e-8, format!("max Wronskian residual over all runs {max_drift:.2e}"));
    led.record(7, c7.0, c7.1);

    // 8. instanton saddle
    {
        let mut ok = true;
        let mut prev = f64::INFINITY;
        let mut parts = Vec::new();
        for a in [100.0, 400.0, 1600.0] {
            let r = instanton::saddle(a, 1.0, 1.0).unwrap();
            let closed = (0.5 * ((1.0 + 4.0 * a * a).sqrt() - 1.0)).sqrt();
            let excess = r.s_e - a;
            ok &= rel(r.v_e_star, a.sqrt()) < 0.05 && rel(r.v_e_star, closed) < 1e-10 && excess < 5.0 && excess <= prev;
            prev = excess;
            parts.push(format!("A = {a}: v_E* = {:.4}, s_e - A = {:.4}", r.v_e_star, excess));
        }
        led.record(8, ok, parts.join("; "));
    }

    // 9. core fermions
    {
        let band = CoreBand::new(1.0, 1.0, 1.0).unwrap();
        let k_z = 0.5;
        let g = VelocityProfile::Gaussian { v_max: 0.4, t0: 0.0, width: 1.5 };
        let t = 9.0;
        let occ = fermion::vlasov_evolve(&InitialOccupation::Step, &g, &band, k_z, t, 64, &[]).unwrap();
        let dev = occ
            .phi
            .iter()
            .zip(occ.boundary())
            .map(|(p, lb)| (lb - fermion::boundary_analytic(*p, t, &g, &band, k_z)).abs())
            .fold(0.0, f64::max)
            / occ.k_perp;
        let (x, td) = (0.1, 3.0);
        let w0 = band.omega0(k_z);
        let delta = fermion::vlasov_evolve(&InitialOccupation::Step, &VelocityProfile::Delta { x, t0: 0.0 }, &band, k_z, td, 64, &[])
            .unwrap();
        let form = delta
            .phi
            .iter()
            .zip(delta.boundary())
            .map(|(p, lb)| (lb + delta.k_perp * x * (w0 * td + p).sin()).abs())
            .fold(0.0, f64::max);
        let period = 2.0 * PI / w0;
        let times: Vec<f64> = (0..=12).map(|i| 20.0 + 0.25 * period * i as f64).collect();
        let amp = fermion::wobble_amplitudes(&g, &band, k_z, 1.0, 64, &times).unwrap();
        let mean = amp.iter().sum::<f64>() / amp.len() as f64;
        let spread = amp.iter().map(|a| (a / mean - 1.0).abs()).fold(0.0, f64::max);
        led.record(
            9,
            dev < 1e-6 && form < 1e-14 && spread < 1e-6,
            format!("boundary deviation {dev:.2e} k_perp, delta-pulse form {form:.1e}, wobble spread {spread:.2e}"),
        );
    }

    led.record(10, c10.0, c10.1);

    // Criterion 3 as stated cannot hold (see the note above); its derived form must.
    let failed: Vec<usize> = led.results.iter().filter(|r| !r.1 && r.0 != 3).map(|r| r.0).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
    assert!(c3_derived, "lattice-sum remainder does not follow the Bessel expansion");
}
