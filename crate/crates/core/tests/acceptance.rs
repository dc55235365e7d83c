//! End-to-end acceptance checks. Each test prints a single `criterion N: PASS`
//! or `FAIL` line with the measured figures, then asserts.
//!
//! Run with `cargo test --test acceptance -- --nocapture --test-threads=1` to
//! see the lines in order.

use std::time::{Duration, Instant};

use chrono::NaiveDate;
use levy_lrm::calibration::{calibrate, synthetic_quote_set, CalibrationConfig};
use levy_lrm::fourier::{self, direct, CharFn, FourierConfig, Transform};
use levy_lrm::hedging::{sweep, theorem4_constant, StrategyPoint, SLACK_FACTOR};
use levy_lrm::levy_core::{
    c2_split, mmm_cumulant, mmm_cumulant_by_quadrature, nu_half_integral, to_mmm, LevyMeasure,
    LevyModel, MmmModel,
};
use levy_lrm::models::{merton_c2_minus, MertonParams, ModelParams, VgParams};
use levy_lrm::oracle_mc::{simulate_log_returns, McConfig, McEstimate};
use levy_lrm::quad::Tolerance;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TAU: f64 = 0.05;
const SPOT: f64 = 2102.4;

fn report(n: u32, ok: bool, elapsed: Duration, limit: Duration, detail: String) {
    let ok = ok && elapsed < limit;
    let verdict = if ok { "PASS" } else { "FAIL" };
    println!("criterion {n}: {verdict} [{elapsed:.2?} of {limit:?}] {detail}");
    assert!(ok, "criterion {n} failed: {detail}");
}

fn merton() -> LevyModel {
    MertonParams::REFERENCE.model(1.0).unwrap()
}

fn vg() -> LevyModel {
    VgParams::REFERENCE.model(1.0).unwrap()
}

fn reference_models() -> [(&'static str, MmmModel); 2] {
    [("merton", to_mmm(&merton()).unwrap()), ("vg", to_mmm(&vg()).unwrap())]
}

fn reference_chis() -> Vec<f64> {
    (0..13).map(|i| (1900.0 + 50.0 * i as f64) / SPOT).collect()
}

fn points(phi: &CharFn, chis: &[f64]) -> Vec<StrategyPoint> {
    sweep(phi, chis, &FourierConfig::default())
        .unwrap()
        .into_iter()
        .map(Result::unwrap)
        .collect()
}

fn tight() -> Tolerance {
    Tolerance::new(1e-15, 1e-12).with_max_intervals(20_000)
}

#[test]
fn criterion_1_cumulant_normalization() {
    let t0 = Instant::now();
    let mut worst = 0.0f64;
    for (_, m) in reference_models() {
        let scale = m.denominator();
        for z in [Complex64::new(0.0, 0.0), Complex64::new(0.0, -1.0)] {
            worst = worst.max(mmm_cumulant(&m, z).unwrap().norm() / scale);
        }
    }
    report(1, worst <= 1e-10, t0.elapsed(), Duration::from_secs(1), format!("max |Psi*|/(sigma^2+C2) = {worst:.2e}"));
}

#[test]
fn criterion_2_closed_forms_match_quadrature() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for (_, m) in reference_models() {
        for _ in 0..20 {
            let z = Complex64::new(rng.random_range(-8.0..8.0), rng.random_range(-2.0..0.0));
            let a = mmm_cumulant(&m, z).unwrap();
            let b = mmm_cumulant_by_quadrature(&m, z, tight()).unwrap();
            worst = worst.max((a - b).norm() / b.norm());
        }
    }
    let sq = |x: f64| x.exp_m1().powi(2);
    let j = MertonParams::REFERENCE.jumps();
    let q = nu_half_integral(&j, false, sq, tight()).unwrap().value;
    worst = worst.max((merton_c2_minus(&j) - q).abs() / q);
    let model = vg();
    let measure: &dyn LevyMeasure = &*model.measure;
    let (plus, minus) = c2_split(&model).unwrap();
    let qp = nu_half_integral(measure, true, sq, tight()).unwrap().value;
    let qm = nu_half_integral(measure, false, sq, tight()).unwrap().value;
    worst = worst.max((plus - qp).abs() / qp).max((minus - qm).abs() / qm);
    report(2, worst <= 1e-8, t0.elapsed(), Duration::from_secs(10), format!("max relative gap = {worst:.2e}"));
}

#[test]
fn criterion_3_alpha_independence() {
    let t0 = Instant::now();
    let mut worst = 0.0f64;
    for (_, m) in reference_models() {
        let phi = CharFn::new(&m, TAU).unwrap();
        for chi in reference_chis() {
            for t in [Transform::I1, Transform::I2] {
                let vals: Vec<f64> = [1.25, 1.5, 1.75, 2.0]
                    .iter()
                    .map(|&a| direct(&phi, t, chi, a).unwrap().value)
                    .collect();
                for a in &vals {
                    for b in &vals {
                        worst = worst.max((a - b).abs() / b.abs());
                    }
                }
            }
        }
    }
    report(3, worst <= 1e-6, t0.elapsed(), Duration::from_secs(30), format!("max pairwise relative spread = {worst:.2e}"));
}

#[test]
fn criterion_4_monte_carlo_agreement() {
    let t0 = Instant::now();
    let cfg = FourierConfig::default();
    // Merton's horizon standard deviation is about 0.01, so its grid is tighter.
    let grids = [
        [0.97, 0.99, 1.0, 1.01, 1.03],
        [0.9037, 0.95, 1.0, 1.05, 1.1891],
    ];
    let mut worst = 0.0f64;
    let mut ok = true;
    for ((_, m), (chis, seed)) in reference_models().into_iter().zip(grids.iter().zip([20160420, 20160421])) {
        let phi = CharFn::new(&m, TAU).unwrap();
        let s = simulate_log_returns(&m, &McConfig::new(1_000_000, seed, TAU)).unwrap();
        let mut check = |mc: McEstimate, f: f64, err: f64| {
            worst = worst.max(mc.z_score(f).abs());
            ok &= mc.brackets(f, 3.0, err);
        };
        for &chi in chis {
            let f = fourier::i1(&phi, chi, &cfg).unwrap();
            check(s.i1(chi).unwrap(), f.value, f.abs_err);
            let f = fourier::i2(&phi, chi, &cfg).unwrap();
            let mc = s.i2(&m, chi).unwrap();
            check(mc.as_estimate(), f.value, f.abs_err + mc.quad_err);
            let f = fourier::tail_upper(&phi, chi, &cfg).unwrap();
            check(s.tail_upper(chi).unwrap(), f.value, f.abs_err);
            let f = fourier::tail_lower(&phi, chi, &cfg).unwrap();
            check(s.tail_lower(chi).unwrap(), f.value, f.abs_err);
            let f = fourier::call(&phi, chi, &cfg).unwrap();
            check(s.call(chi).unwrap(), f.value, f.abs_err);
        }
    }
    report(4, ok, t0.elapsed(), Duration::from_secs(300), format!("50 checks, worst |z| = {worst:.2}"));
}

#[test]
fn criterion_5_first_bound_and_small_chi() {
    let t0 = Instant::now();
    let mut ok = true;
    let mut detail = String::new();
    let small: Vec<f64> = (1..=8).rev().map(|k| 2f64.powi(-k)).collect();
    for (name, m) in reference_models() {
        let phi = CharFn::new(&m, TAU).unwrap();
        let mut max_ratio = 0.0f64;
        for p in points(&phi, &reference_chis()) {
            let slack = SLACK_FACTOR * (p.accuracy.diff + p.accuracy.bound_t3);
            ok &= p.diff <= p.bound_t3 + slack;
            max_ratio = max_ratio.max(p.diff / p.bound_t3);
        }
        // r(χ) = diff/χ must not grow as χ shrinks beyond its numerical noise.
        let pts = points(&phi, &small);
        let top = pts.last().unwrap();
        let r_top = top.diff / top.chi;
        for p in &pts {
            ok &= p.diff / p.chi <= r_top + SLACK_FACTOR * p.accuracy.diff / p.chi;
        }
        let r_min = pts.iter().map(|p| p.diff / p.chi).fold(f64::INFINITY, f64::min);
        detail += &format!("{name}: max diff/bound_t3 = {max_ratio:.3}, diff/chi in [{r_min:.2e}, {r_top:.2e}]; ");
    }
    report(5, ok, t0.elapsed(), Duration::from_secs(60), detail);
}

#[test]
fn criterion_6_second_bound_and_large_chi() {
    let t0 = Instant::now();
    let mut ok = true;
    let mut detail = String::new();
    let large: Vec<f64> = (1..=8).map(|k| 2f64.powi(k)).collect();
    for (name, m) in reference_models() {
        let phi = CharFn::new(&m, TAU).unwrap();
        let (c, c_err) = theorem4_constant(&phi).unwrap().expect("condition integral converges");
        let mut max_scaled = 0.0f64;
        for p in points(&phi, &large) {
            let bound = p.bound_t4.unwrap();
            ok &= p.diff <= bound + SLACK_FACTOR * (p.accuracy.diff + p.accuracy.bound_t4);
            // χ·diff is bounded by the constant in the second bound.
            max_scaled = max_scaled.max(p.chi * p.diff);
            ok &= p.chi * p.diff <= c + SLACK_FACTOR * (c_err + p.chi * p.accuracy.diff);
        }
        detail += &format!("{name}: max chi*diff = {max_scaled:.3e} vs constant {c:.3e}; ");
    }
    report(6, ok, t0.elapsed(), Duration::from_secs(60), detail);
}

#[test]
fn criterion_7_no_jumps_no_gap() {
    let t0 = Instant::now();
    let mut worst = 0.0f64;
    for (mu, sigma) in [(-0.02, 0.2), (-0.0144, 0.12), (-0.045, 0.3)] {
        let m = to_mmm(&LevyModel::black_scholes(mu, sigma, 1.0).unwrap()).unwrap();
        let phi = CharFn::new(&m, TAU).unwrap();
        for p in points(&phi, &reference_chis()) {
            worst = worst.max((p.lrm - p.delta).abs());
        }
    }
    report(7, worst <= 1e-9, t0.elapsed(), Duration::from_secs(10), format!("max |LRM - Delta| = {worst:.2e}"));
}

#[test]
fn criterion_8_vg_gap_exceeds_merton() {
    let t0 = Instant::now();
    let means: Vec<f64> = reference_models()
        .iter()
        .map(|(_, m)| {
            let pts = points(&CharFn::new(m, TAU).unwrap(), &reference_chis());
            pts.iter().map(|p| p.diff).sum::<f64>() / pts.len() as f64
        })
        .collect();
    report(
        8,
        means[1] > means[0],
        t0.elapsed(),
        Duration::from_secs(10),
        format!("mean diff merton = {:.4e}, vg = {:.4e}", means[0], means[1]),
    );
}

#[test]
fn criterion_9_synthetic_calibration() {
    let t0 = Instant::now();
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
    let date = NaiveDate::from_ymd_opt(2016, 4, 20).unwrap();
    let cfg = CalibrationConfig::default();

    let truth = MertonParams { mu: 0.0, sigma: 0.12, gamma: 0.6, m: -0.12, delta: 0.10 }
        .with_tilt(-0.5)
        .unwrap();
    let init = MertonParams {
        sigma: truth.sigma * 1.2,
        gamma: truth.gamma * 0.8,
        m: truth.m * 1.2,
        delta: truth.delta * 0.8,
        ..truth
    }
    .with_tilt(-0.5)
    .unwrap();
    let quotes = synthetic_quote_set(&ModelParams::Merton(truth), SPOT, date, &cfg.fourier).unwrap();
    let res = calibrate(&ModelParams::Merton(init), &quotes, &cfg).unwrap();
    let ModelParams::Merton(p) = res.params else { unreachable!() };
    let merton_ok = res.rmse < 0.1
        && rel(p.sigma, truth.sigma) < 0.05
        && rel(p.delta, truth.delta) < 0.05
        && rel(p.gamma, truth.gamma) < 0.15
        && rel(p.m, truth.m) < 0.15;
    let merton_rmse = res.rmse;

    let truth = VgParams::REFERENCE;
    let init = VgParams { c: truth.c * 1.2, g: truth.g * 0.8, m: truth.m * 1.2 };
    let quotes = synthetic_quote_set(&ModelParams::Vg(truth), SPOT, date, &cfg.fourier).unwrap();
    let res = calibrate(&ModelParams::Vg(init), &quotes, &cfg).unwrap();
    let ModelParams::Vg(p) = res.params else { unreachable!() };
    let vg_ok = res.rmse < 0.1
        && rel(p.c, truth.c) < 0.1
        && rel(p.g, truth.g) < 0.1
        && rel(p.m, truth.m) < 0.1;

    report(
        9,
        merton_ok && vg_ok,
        t0.elapsed(),
        Duration::from_secs(600),
        format!("merton rmse = {merton_rmse:.2e} ok = {merton_ok}; vg rmse = {:.2e} ok = {vg_ok}", res.rmse),
    );
}

