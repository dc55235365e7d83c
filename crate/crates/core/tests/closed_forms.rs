use levy_lrm::levy_core::{
    c2_split, mmm_cumulant, mmm_cumulant_by_quadrature, nu_half_integral, nu_integral, to_mmm,
    LevyMeasure, LevyModel, QuadratureOnly,
};
use levy_lrm::models::{merton_c2_minus, MertonParams, VgParams};
use levy_lrm::quad::Tolerance;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

fn strip_points(seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..20)
        .map(|_| Complex64::new(rng.random_range(-8.0..8.0), rng.random_range(-2.0..0.0)))
        .collect()
}

fn tight() -> Tolerance {
    Tolerance::new(1e-15, 1e-12).with_max_intervals(20_000)
}

#[test]
fn merton_cumulant_matches_quadrature() {
    let mmm = to_mmm(&MertonParams::REFERENCE.model(1.0).unwrap()).unwrap();
    let mut pts = strip_points(1);
    pts.push(Complex64::new(1.0, 0.0));
    pts.push(Complex64::new(0.7, -1.75));
    for z in pts {
        let closed = mmm_cumulant(&mmm, z).unwrap();
        let quad = mmm_cumulant_by_quadrature(&mmm, z, tight()).unwrap();
        assert!(rel(closed, quad) < 1e-8, "z = {z}: {closed} vs {quad}");
    }
}

#[test]
fn vg_cumulant_matches_quadrature() {
    let mmm = to_mmm(&VgParams::REFERENCE.model(1.0).unwrap()).unwrap();
    let mut pts = strip_points(2);
    pts.push(Complex64::new(1.0, -2.0));
    for z in pts {
        let closed = mmm_cumulant(&mmm, z).unwrap();
        let quad = mmm_cumulant_by_quadrature(&mmm, z, tight()).unwrap();
        assert!(rel(closed, quad) < 1e-8, "z = {z}: {closed} vs {quad}");
    }
}

#[test]
fn quadrature_only_model_reproduces_closed_form_mmm() {
    for model in [
        MertonParams::REFERENCE.model(1.0).unwrap(),
        VgParams::REFERENCE.model(1.0).unwrap(),
    ] {
        let closed = to_mmm(&model).unwrap();
        let hidden = LevyModel::new(
            model.mu,
            model.sigma,
            Arc::new(QuadratureOnly(model.measure.clone())),
            1.0,
        )
        .unwrap();
        let quad = to_mmm(&hidden).unwrap();
        assert!((closed.mu_s() - quad.mu_s()).abs() < 1e-8 * closed.c2());
        assert!((closed.c2() - quad.c2()).abs() < 1e-8 * closed.c2());
        assert!((closed.drift_star() - quad.drift_star()).abs() < 1e-8);
        for z in strip_points(3) {
            let a = mmm_cumulant(&closed, z).unwrap();
            let b = mmm_cumulant(&quad, z).unwrap();
            assert!(rel(a, b) < 1e-8, "z = {z}");
        }
    }
}

#[test]
fn c2_constants_match_quadrature() {
    let sq = |x: f64| x.exp_m1().powi(2);
    for model in [
        MertonParams::REFERENCE.model(1.0).unwrap(),
        VgParams::REFERENCE.model(1.0).unwrap(),
        VgParams::new(2.0, 5.0, 7.5).unwrap().model(1.0).unwrap(),
    ] {
        let m: &dyn LevyMeasure = &*model.measure;
        let (plus, minus) = c2_split(&model).unwrap();
        let qp = nu_half_integral(m, true, sq, tight()).unwrap().value;
        let qm = nu_half_integral(m, false, sq, tight()).unwrap().value;
        let q = nu_integral(m, sq, tight()).unwrap().value;
        assert!((plus - qp).abs() <= 1e-8 * qp, "C2+ {plus} vs {qp}");
        assert!((minus - qm).abs() <= 1e-8 * qm, "C2- {minus} vs {qm}");
        assert!((plus + minus - q).abs() <= 1e-8 * q);
        let e2x = model.upper_e2x_moment().unwrap();
        let qe = nu_half_integral(m, true, |x| (2.0 * x).exp() * sq(x), tight()).unwrap().value;
        assert!((e2x - qe).abs() <= 1e-8 * qe, "e2x {e2x} vs {qe}");
    }
    let j = MertonParams::REFERENCE.jumps();
    let qm = nu_half_integral(&j, false, sq, tight()).unwrap().value;
    assert!((merton_c2_minus(&j) - qm).abs() <= 1e-10 * qm);
}

#[test]
fn lower_order_moments_match_quadrature() {
    for model in [
        MertonParams::REFERENCE.model(1.0).unwrap(),
        VgParams::REFERENCE.model(1.0).unwrap(),
    ] {
        let m: &dyn LevyMeasure = &*model.measure;
        let first = nu_integral(m, |x| x, tight()).unwrap().value;
        assert!((model.first_moment().unwrap() - first).abs() < 1e-10);
        let xe = nu_integral(m, |x| x * x.exp_m1(), tight()).unwrap().value;
        assert!((model.x_em1_moment().unwrap() - xe).abs() < 1e-8 * xe.abs());
    }
}

#[test]
fn merton_total_mass_and_vg_second_moment() {
    let p = MertonParams::REFERENCE;
    let mass = nu_integral(&p.jumps(), |_| 1.0, tight()).unwrap().value;
    assert!((mass - p.gamma).abs() < 1e-12);
    let v = VgParams::REFERENCE;
    let x2 = nu_integral(&v.jumps(), |x| x * x, tight()).unwrap().value;
    let expected = v.c * (2.0 / (v.g * v.g) + 2.0 / (v.m * v.m));
    // ∫x^2 C e^{-Mx}/x dx = C/M^2; the gamma identity gives C(1/G^2 + 1/M^2).
    assert!((x2 - expected / 2.0).abs() < 1e-10 * expected);
}
