use levy_lrm::fourier::{self, CharFn, FourierConfig};
use levy_lrm::models::{MertonParams, VgParams};
use levy_lrm::oracle_mc::{simulate_log_returns, McConfig, McEstimate, SamplingMethod};
use levy_lrm::{to_mmm, MmmModel};

const TAU: f64 = 0.05;
// Merton's diffusion scale over the horizon is about 0.01, so its grid is
// tighter; beyond a few standard deviations 10^6 paths see no exercise.
const MERTON_CHIS: [f64; 5] = [0.97, 0.99, 1.0, 1.01, 1.03];
const VG_CHIS: [f64; 5] = [0.9037, 0.95, 1.0, 1.05, 1.1891];

fn merton() -> MmmModel {
    to_mmm(&MertonParams::REFERENCE.model(1.0).unwrap()).unwrap()
}

fn vg() -> MmmModel {
    to_mmm(&VgParams::REFERENCE.model(1.0).unwrap()).unwrap()
}

fn check(name: &str, chi: f64, mc: McEstimate, fourier: f64, fourier_err: f64) {
    let z = mc.z_score(fourier);
    println!("{name:>10} chi={chi:.4} mc={:.8} se={:.2e} fourier={fourier:.8} z={z:.2}", mc.estimate, mc.std_err);
    assert!(mc.brackets(fourier, 3.0, fourier_err), "{name} at chi = {chi}: z = {z}");
}

fn agreement(model: MmmModel, chis: [f64; 5], seed: u64, method: SamplingMethod) {
    let phi = CharFn::new(&model, TAU).unwrap();
    let cfg = FourierConfig::default();
    let sample = simulate_log_returns(&model, &McConfig::new(1_000_000, seed, TAU)).unwrap();
    assert_eq!(sample.method, method);
    let mart = sample.martingale();
    assert!(mart.brackets(1.0, 3.0, 0.0), "martingale: {mart:?}");
    for chi in chis {
        let f = fourier::i1(&phi, chi, &cfg).unwrap();
        check("i1", chi, sample.i1(chi).unwrap(), f.value, f.abs_err);
        let f = fourier::i2(&phi, chi, &cfg).unwrap();
        let mc = sample.i2(&model, chi).unwrap();
        assert!(mc.quad_err < 0.1 * mc.std_err, "{mc:?}");
        check("i2", chi, mc.as_estimate(), f.value, f.abs_err + mc.quad_err);
        let f = fourier::tail_upper(&phi, chi, &cfg).unwrap();
        check("tail_up", chi, sample.tail_upper(chi).unwrap(), f.value, f.abs_err);
        let f = fourier::tail_lower(&phi, chi, &cfg).unwrap();
        check("tail_lo", chi, sample.tail_lower(chi).unwrap(), f.value, f.abs_err);
        let f = fourier::call(&phi, chi, &cfg).unwrap();
        check("call", chi, sample.call(chi).unwrap(), f.value, f.abs_err);
    }
}

#[test]
fn merton_fourier_inside_three_standard_errors() {
    agreement(merton(), MERTON_CHIS, 20160420, SamplingMethod::MertonMixture);
}

#[test]
fn vg_fourier_inside_three_standard_errors() {
    agreement(vg(), VG_CHIS, 20160421, SamplingMethod::GammaDifference);
}
