use chrono::NaiveDate;
use levy_lrm::calibration::{calibrate, rmse, synthetic_quote_set, CalibrationConfig, QuoteSet};
use levy_lrm::fourier::FourierConfig;
use levy_lrm::models::{MertonParams, ModelParams, VgParams};

const SPOT: f64 = 2102.4;

fn date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2016, 4, 20).unwrap()
}

fn merton_truth() -> MertonParams {
    MertonParams {
        mu: 0.0,
        sigma: 0.12,
        gamma: 0.6,
        m: -0.12,
        delta: 0.10,
    }
    .with_tilt(-0.5)
    .unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn synthetic_layout_has_81_quotes() {
    let q = synthetic_quote_set(&ModelParams::Merton(merton_truth()), SPOT, date(), &FourierConfig::default()).unwrap();
    assert_eq!(q.quotes.len(), 81);
    assert_eq!(QuoteSet::parse(&q.to_text()).unwrap(), q);
    let exact = rmse(&ModelParams::Merton(merton_truth()), &q, &FourierConfig::default());
    assert!(exact < 1e-9, "{exact}");
}

#[test]
fn merton_recovery_from_perturbed_start() {
    let truth = merton_truth();
    let cfg = CalibrationConfig::default();
    let quotes = synthetic_quote_set(&ModelParams::Merton(truth), SPOT, date(), &cfg.fourier).unwrap();
    let init = MertonParams {
        sigma: truth.sigma * 1.2,
        gamma: truth.gamma * 0.8,
        m: truth.m * 1.2,
        delta: truth.delta * 0.8,
        ..truth
    }
    .with_tilt(-0.5)
    .unwrap();
    let t0 = std::time::Instant::now();
    let res = calibrate(&ModelParams::Merton(init), &quotes, &cfg).unwrap();
    println!("{}elapsed = {:?}", res.to_record(), t0.elapsed());
    let ModelParams::Merton(p) = res.params else { panic!() };
    assert!(res.rmse <= res.init_rmse);
    assert!(res.rmse < 0.1);
    assert!(rel(p.sigma, truth.sigma) < 0.05 && rel(p.delta, truth.delta) < 0.05);
    assert!(rel(p.gamma, truth.gamma) < 0.15 && rel(p.m, truth.m) < 0.15);
}

#[test]
fn vg_recovery_from_perturbed_start() {
    let truth = VgParams::REFERENCE;
    let cfg = CalibrationConfig::default();
    let quotes = synthetic_quote_set(&ModelParams::Vg(truth), SPOT, date(), &cfg.fourier).unwrap();
    let init = VgParams {
        c: truth.c * 1.2,
        g: truth.g * 0.8,
        m: truth.m * 1.2,
    };
    let t0 = std::time::Instant::now();
    let res = calibrate(&ModelParams::Vg(init), &quotes, &cfg).unwrap();
    println!("{}elapsed = {:?}", res.to_record(), t0.elapsed());
    let ModelParams::Vg(p) = res.params else { panic!() };
    assert!(res.rmse <= res.init_rmse);
    assert!(res.rmse < 0.1);
    assert!(rel(p.c, truth.c) < 0.1 && rel(p.g, truth.g) < 0.1 && rel(p.m, truth.m) < 0.1);
}
