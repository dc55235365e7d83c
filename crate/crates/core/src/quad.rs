//! Adaptive Gauss–Kronrod quadrature (21-point Kronrod rule embedded on the
//! 10-point Gauss rule) for real and complex integrands.
//!
//! Intervals are bisected greedily by largest error estimate until the summed
//! error satisfies `max(abs, rel * |I|)`. The error rescaling follows the
//! QUADPACK `qk21` heuristics.

use std::collections::BinaryHeap;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use thiserror::Error;

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_980_525_735,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Values that can be integrated: `f64` and `Complex64`.
pub trait QuadValue:
    Copy + Default + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn magnitude(self) -> f64;
    fn is_finite_value(self) -> bool;
}

impl QuadValue for f64 {
    fn magnitude(self) -> f64 {
        self.abs()
    }
    fn is_finite_value(self) -> bool {
        self.is_finite()
    }
}

impl QuadValue for Complex64 {
    fn magnitude(self) -> f64 {
        self.norm()
    }
    fn is_finite_value(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// Integral value with its absolute error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate<T = f64> {
    pub value: T,
    pub abs_err: f64,
}

impl<T: QuadValue> Estimate<T> {
    pub fn new(value: T, abs_err: f64) -> Self {
        Self { value, abs_err }
    }
}

impl<T: QuadValue> Add for Estimate<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.value + rhs.value, self.abs_err + rhs.abs_err)
    }
}

impl<T: QuadValue> Mul<f64> for Estimate<T> {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        Self::new(self.value * rhs, self.abs_err * rhs.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Tolerance {
    pub const fn new(abs: f64, rel: f64) -> Self {
        Self {
            abs,
            rel,
            max_intervals: 4000,
        }
    }

    pub const fn with_max_intervals(mut self, n: usize) -> Self {
        self.max_intervals = n;
        self
    }
}

impl Default for Tolerance {
    /// Lévy-integral default: 1e-12 absolute, 1e-10 relative.
    fn default() -> Self {
        Self::new(1e-12, 1e-10)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error("integrand is not finite at x = {x}")]
    NonFinite { x: f64 },
    #[error("tolerance not reached after {intervals} intervals: value {value:e}, error {abs_err:e}")]
    NotConverged {
        value: f64,
        abs_err: f64,
        intervals: usize,
    },
}

struct Segment<T> {
    a: f64,
    b: f64,
    value: T,
    err: f64,
}

impl<T> PartialEq for Segment<T> {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl<T> Eq for Segment<T> {}
impl<T> PartialOrd for Segment<T> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Segment<T> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut scaled = err.abs();
    if res_asc != 0.0 && scaled != 0.0 {
        let scale = (200.0 * scaled / res_asc).powf(1.5);
        scaled = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        let min_err = 50.0 * f64::EPSILON * res_abs;
        if min_err > scaled {
            scaled = min_err;
        }
    }
    scaled
}

/// One 21-point Kronrod panel on `[a, b]`.
fn kronrod21<T, F>(f: &F, a: f64, b: f64) -> Result<(T, f64), QuadError>
where
    T: QuadValue,
    F: Fn(f64) -> T,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let eval = |x: f64| -> Result<T, QuadError> {
        let y = f(x);
        if y.is_finite_value() {
            Ok(y)
        } else {
            Err(QuadError::NonFinite { x })
        }
    };

    let fc = eval(center)?;
    let mut res_k = fc * WGK[10];
    let mut res_g = T::default();
    let mut res_abs = fc.magnitude() * WGK[10];
    let mut fv1 = [T::default(); 10];
    let mut fv2 = [T::default(); 10];

    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = eval(center - dx)?;
        let f2 = eval(center + dx)?;
        fv1[j] = f1;
        fv2[j] = f2;
        let sum = f1 + f2;
        res_k = res_k + sum * WGK[j];
        res_abs += WGK[j] * (f1.magnitude() + f2.magnitude());
        if j % 2 == 1 {
            res_g = res_g + sum * WG[j / 2];
        }
    }

    let mean = res_k * 0.5;
    let mut res_asc = WGK[10] * (fc - mean).magnitude();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).magnitude() + (fv2[j] - mean).magnitude());
    }

    let value = res_k * half;
    let err = ((res_k - res_g) * half).magnitude();
    let h = half.abs();
    Ok((value, rescale_error(err, res_abs * h, res_asc * h)))
}

/// Adaptive integration of `f` over the finite interval `[a, b]`.
pub fn integrate<T, F>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<Estimate<T>, QuadError>
where
    T: QuadValue,
    F: Fn(f64) -> T,
{
    if a == b {
        return Ok(Estimate::new(T::default(), 0.0));
    }
    let (v0, e0) = kronrod21(&f, a, b)?;
    let mut total = v0;
    let mut total_err = e0;
    let mut heap = BinaryHeap::new();
    heap.push(Segment {
        a,
        b,
        value: v0,
        err: e0,
    });
    // Error of panels too narrow to split further; kept out of the heap.
    let mut frozen_err = 0.0;
    let mut frozen_value = T::default();

    loop {
        let target = tol.abs.max(tol.rel * total.magnitude());
        if total_err <= target {
            break;
        }
        if heap.len() >= tol.max_intervals {
            return Err(QuadError::NotConverged {
                value: total.magnitude(),
                abs_err: total_err,
                intervals: heap.len(),
            });
        }
        let Some(seg) = heap.pop() else { break };
        let mid = 0.5 * (seg.a + seg.b);
        let width = (seg.b - seg.a).abs();
        if width <= 100.0 * f64::EPSILON * mid.abs().max(f64::MIN_POSITIVE) {
            frozen_err += seg.err;
            frozen_value = frozen_value + seg.value;
            if heap.is_empty() {
                break;
            }
            continue;
        }
        let (v1, e1) = kronrod21(&f, seg.a, mid)?;
        let (v2, e2) = kronrod21(&f, mid, seg.b)?;
        total = total - seg.value + v1 + v2;
        total_err = total_err - seg.err + e1 + e2;
        heap.push(Segment {
            a: seg.a,
            b: mid,
            value: v1,
            err: e1,
        });
        heap.push(Segment {
            a: mid,
            b: seg.b,
            value: v2,
            err: e2,
        });
    }

    // Re-sum to shed accumulated cancellation in the running totals.
    let mut value = frozen_value;
    let mut err = frozen_err;
    for seg in heap.iter() {
        value = value + seg.value;
        err += seg.err;
    }
    Ok(Estimate::new(value, err))
}

/// Integral over `[a, ∞)` via the substitution `x = a + t/(1-t)`.
pub fn integrate_to_infinity<T, F>(f: F, a: f64, tol: Tolerance) -> Result<Estimate<T>, QuadError>
where
    T: QuadValue,
    F: Fn(f64) -> T,
{
    integrate(
        |t: f64| {
            let s = 1.0 - t;
            f(a + t / s) * (1.0 / (s * s))
        },
        0.0,
        1.0,
        tol,
    )
}

/// Integral over `(-∞, b]` via `x = b - t/(1-t)`.
pub fn integrate_from_neg_infinity<T, F>(
    f: F,
    b: f64,
    tol: Tolerance,
) -> Result<Estimate<T>, QuadError>
where
    T: QuadValue,
    F: Fn(f64) -> T,
{
    integrate(
        |t: f64| {
            let s = 1.0 - t;
            f(b - t / s) * (1.0 / (s * s))
        },
        0.0,
        1.0,
        tol,
    )
}

/// Integral over `[a, b]` where either end may be infinite.
pub fn integrate_range<T, F>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<Estimate<T>, QuadError>
where
    T: QuadValue,
    F: Fn(f64) -> T,
{
    match (a.is_finite(), b.is_finite()) {
        (true, true) => integrate(f, a, b, tol),
        (true, false) => integrate_to_infinity(f, a, tol),
        (false, true) => integrate_from_neg_infinity(f, b, tol),
        (false, false) => {
            let left = integrate_from_neg_infinity(&f, 0.0, tol)?;
            let right = integrate_to_infinity(&f, 0.0, tol)?;
            Ok(left + right)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let est = integrate(|x: f64| x.powi(5) - 3.0 * x * x, -1.0, 2.0, Tolerance::default())
            .unwrap();
        // 2^6/6 - 1/6 - (8 + 1)
        let exact = 64.0 / 6.0 - 1.0 / 6.0 - 9.0;
        assert!((est.value - exact).abs() < 1e-13);
    }

    #[test]
    fn gaussian_over_real_line() {
        let est = integrate_range(
            |x: f64| (-0.5 * x * x).exp(),
            f64::NEG_INFINITY,
            f64::INFINITY,
            Tolerance::default(),
        )
        .unwrap();
        assert!((est.value - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-10);
    }

    #[test]
    fn endpoint_singularity() {
        // ∫_0^1 x^{-1/2} dx = 2
        let est = integrate(|x: f64| x.powf(-0.5), 0.0, 1.0, Tolerance::new(1e-10, 1e-10))
            .unwrap();
        assert!((est.value - 2.0).abs() < 1e-9, "{}", est.value);
    }

    #[test]
    fn complex_oscillatory() {
        // ∫_0^10 e^{i x} dx = (e^{10 i} - 1)/i
        let est: Estimate<Complex64> = integrate(
            |x: f64| Complex64::new(0.0, x).exp(),
            0.0,
            10.0,
            Tolerance::default(),
        )
        .unwrap();
        let exact = (Complex64::new(0.0, 10.0).exp() - 1.0) / Complex64::i();
        assert!((est.value - exact).norm() < 1e-12);
    }

    #[test]
    fn non_finite_integrand_is_reported() {
        let err = integrate(|x: f64| 1.0 / (x - 0.5), 0.0, 1.0, Tolerance::default());
        assert!(err.is_err());
    }
}
