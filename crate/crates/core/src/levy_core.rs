//! Exponential Lévy models `S_t = S_0 exp(L_t)` and their minimal martingale
//! measure (MMM).
//!
//! A model is the triplet `(mu, sigma, nu)` with `L_t = mu t + sigma W_t +
//! ∫ x Ñ([0,t], dx)`. Under the MMM the Brownian motion picks up the drift
//! `-xi` and jumps are re-weighted by `1 - theta_x`, where
//!
//! ```text
//! mu_s    = mu + sigma^2/2 + ∫ (e^x - 1 - x) nu(dx)
//! theta_x = a (e^x - 1),   xi = a sigma,   a = mu_s / (sigma^2 + C2)
//! ```
//!
//! so `L` stays a Lévy process with triplet `(b*, sigma, (1 - theta_x) nu)`,
//! `b* = mu - sigma xi - a ∫ x (e^x - 1) nu(dx)`. Every Lévy integral has a
//! quadrature route; measures with closed forms override it.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quad::{self, Estimate, QuadValue, Tolerance};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Structural tag used by samplers that need more than the density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeasureKind {
    Zero,
    Merton { gamma: f64, m: f64, delta: f64 },
    VarianceGamma { c: f64, g: f64, m: f64 },
    Other,
}

/// A Lévy measure on `R \ {0}` given by its density, with optional closed
/// forms for the integrals the rest of the crate needs.
pub trait LevyMeasure: Send + Sync + fmt::Debug {
    fn density(&self, x: f64) -> f64;

    /// Open interval `(lo, hi)` of `r` for which `∫_{|x|>1} e^{rx} nu(dx)` is finite.
    fn exp_moment_range(&self) -> (f64, f64);

    /// Interval outside of which the density is negligible. May be infinite.
    fn support(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }

    /// Infinite mass near the origin.
    fn singular_at_zero(&self) -> bool;

    fn kind(&self) -> MeasureKind {
        MeasureKind::Other
    }

    /// `∫ (e^{izx} - 1 - izx) nu(dx)`.
    fn closed_cumulant(&self, _z: Complex64) -> Option<Complex64> {
        None
    }

    /// `∫ (e^{izx} - 1) nu(dx)` for measures with `∫ |x| nu(dx) < ∞`. Free of
    /// the linear term, so it stays accurate for large `|z|`.
    fn closed_fv_cumulant(&self, _z: Complex64) -> Option<Complex64> {
        None
    }

    /// Whether `closed_cumulant` is analytic on `C` minus cuts lying on the
    /// imaginary axis (so it can be evaluated at any `z` with `Re z != 0`).
    fn continues_off_axis(&self) -> bool {
        false
    }

    /// `∫ x nu(dx)`.
    fn closed_first_moment(&self) -> Option<f64> {
        None
    }

    /// `∫ x (e^x - 1) nu(dx)`.
    fn closed_x_em1_moment(&self) -> Option<f64> {
        None
    }

    /// `(∫_0^∞ (e^x-1)^2 nu(dx), ∫_{-∞}^0 (e^x-1)^2 nu(dx))`.
    fn closed_c2_split(&self) -> Option<(f64, f64)> {
        None
    }

    /// `∫_0^∞ e^{2x} (e^x - 1)^2 nu(dx)`.
    fn closed_upper_e2x_moment(&self) -> Option<f64> {
        None
    }
}

/// The empty Lévy measure (Black–Scholes).
#[derive(Debug, Clone, Copy, Default)]
pub struct NoJumps;

impl LevyMeasure for NoJumps {
    fn density(&self, _x: f64) -> f64 {
        0.0
    }
    fn exp_moment_range(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }
    fn support(&self) -> (f64, f64) {
        (0.0, 0.0)
    }
    fn singular_at_zero(&self) -> bool {
        false
    }
    fn kind(&self) -> MeasureKind {
        MeasureKind::Zero
    }
    fn closed_cumulant(&self, _z: Complex64) -> Option<Complex64> {
        Some(Complex64::new(0.0, 0.0))
    }
    fn closed_fv_cumulant(&self, _z: Complex64) -> Option<Complex64> {
        Some(Complex64::new(0.0, 0.0))
    }
    fn continues_off_axis(&self) -> bool {
        true
    }
    fn closed_first_moment(&self) -> Option<f64> {
        Some(0.0)
    }
    fn closed_x_em1_moment(&self) -> Option<f64> {
        Some(0.0)
    }
    fn closed_c2_split(&self) -> Option<(f64, f64)> {
        Some((0.0, 0.0))
    }
    fn closed_upper_e2x_moment(&self) -> Option<f64> {
        Some(0.0)
    }
}

/// Hides every closed form of the wrapped measure, forcing the quadrature
/// route. Used to cross-check closed forms.
#[derive(Debug, Clone)]
pub struct QuadratureOnly(pub Arc<dyn LevyMeasure>);

impl LevyMeasure for QuadratureOnly {
    fn density(&self, x: f64) -> f64 {
        self.0.density(x)
    }
    fn exp_moment_range(&self) -> (f64, f64) {
        self.0.exp_moment_range()
    }
    fn support(&self) -> (f64, f64) {
        self.0.support()
    }
    fn singular_at_zero(&self) -> bool {
        self.0.singular_at_zero()
    }
}

/// `e^w - 1 - w` without cancellation for small `|w|`.
pub fn exp_m1_m_lin(w: Complex64) -> Complex64 {
    if w.norm() < 0.5 {
        let mut term = w * w * 0.5;
        let mut sum = term;
        let mut n = 2.0;
        while term.norm() > 1e-17 * sum.norm().max(f64::MIN_POSITIVE) {
            n += 1.0;
            term = term * w / n;
            sum += term;
            if n > 40.0 {
                break;
            }
        }
        sum
    } else {
        w.exp() - 1.0 - w
    }
}

/// Complex `e^w - 1` and `ln(1 + w)` with full relative precision near 0.
pub trait ComplexM1 {
    fn exp_m1_c(self) -> Complex64;
    fn ln_1p_c(self) -> Complex64;
}

impl ComplexM1 for Complex64 {
    fn exp_m1_c(self) -> Complex64 {
        if self.norm() < 0.5 {
            exp_m1_m_lin(self) + self
        } else {
            self.exp() - 1.0
        }
    }
    fn ln_1p_c(self) -> Complex64 {
        let u = 1.0 + self;
        let d = u - 1.0;
        if d == Complex64::new(0.0, 0.0) {
            self
        } else {
            u.ln() * (self / d)
        }
    }
}

fn exp_m1(x: f64) -> f64 {
    x.exp_m1()
}

fn pieces(measure: &dyn LevyMeasure, positive: Option<bool>) -> Vec<(f64, f64)> {
    let (lo, hi) = measure.support();
    let cuts: [(f64, f64); 4] = [
        (f64::NEG_INFINITY, -1.0),
        (-1.0, 0.0),
        (0.0, 1.0),
        (1.0, f64::INFINITY),
    ];
    cuts.iter()
        .filter(|(a, _)| match positive {
            Some(true) => *a >= 0.0,
            Some(false) => *a < 0.0,
            None => true,
        })
        .filter_map(|&(a, b)| {
            let a = a.max(lo);
            let b = b.min(hi);
            (a < b).then_some((a, b))
        })
        .collect()
}

fn integrate_pieces<T, F>(
    measure: &dyn LevyMeasure,
    positive: Option<bool>,
    f: F,
    tol: Tolerance,
) -> std::result::Result<Estimate<T>, quad::QuadError>
where
    T: QuadValue,
    F: Fn(f64) -> T,
{
    if measure.kind() == MeasureKind::Zero {
        return Ok(Estimate::new(T::default(), 0.0));
    }
    let g = |x: f64| {
        let d = measure.density(x);
        if d == 0.0 {
            T::default()
        } else {
            f(x) * d
        }
    };
    let mut total = Estimate::new(T::default(), 0.0);
    for (a, b) in pieces(measure, positive) {
        total = total + quad::integrate_range(&g, a, b, tol)?;
    }
    Ok(total)
}

/// `∫ f(x) nu(dx)` by adaptive quadrature, split at `-1, 0, 1`.
pub fn nu_integral<F>(measure: &dyn LevyMeasure, f: F, tol: Tolerance) -> Result<Estimate>
where
    F: Fn(f64) -> f64,
{
    Ok(integrate_pieces(measure, None, f, tol)?)
}

/// `∫_{x>0} f nu` (`positive = true`) or `∫_{x<0} f nu`.
pub fn nu_half_integral<F>(
    measure: &dyn LevyMeasure,
    positive: bool,
    f: F,
    tol: Tolerance,
) -> Result<Estimate>
where
    F: Fn(f64) -> f64,
{
    Ok(integrate_pieces(measure, Some(positive), f, tol)?)
}

/// Complex-valued `∫ f(x) nu(dx)`.
pub fn nu_integral_complex<F>(
    measure: &dyn LevyMeasure,
    f: F,
    tol: Tolerance,
) -> Result<Estimate<Complex64>>
where
    F: Fn(f64) -> Complex64,
{
    Ok(integrate_pieces(measure, None, f, tol)?)
}

fn finite_or(moment: &'static str, est: Result<Estimate>) -> Result<f64> {
    match est {
        Ok(e) if e.value.is_finite() => Ok(e.value),
        Ok(e) => Err(Error::Integrability {
            moment,
            detail: format!("value {}", e.value),
        }),
        Err(e) => Err(Error::Integrability {
            moment,
            detail: e.to_string(),
        }),
    }
}

/// Exponential Lévy model under the physical measure.
#[derive(Clone, Debug)]
pub struct LevyModel {
    pub mu: f64,
    pub sigma: f64,
    pub measure: Arc<dyn LevyMeasure>,
    pub s0: f64,
}

impl LevyModel {
    pub fn new(mu: f64, sigma: f64, measure: Arc<dyn LevyMeasure>, s0: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::invalid("mu", "must be finite"));
        }
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::invalid("sigma", format!("must be >= 0, got {sigma}")));
        }
        if !(s0.is_finite() && s0 > 0.0) {
            return Err(Error::invalid("s0", format!("must be > 0, got {s0}")));
        }
        Ok(Self {
            mu,
            sigma,
            measure,
            s0,
        })
    }

    /// Black–Scholes model (no jumps).
    pub fn black_scholes(mu: f64, sigma: f64, s0: f64) -> Result<Self> {
        Self::new(mu, sigma, Arc::new(NoJumps), s0)
    }

    fn in_exp_range(&self, r: f64) -> bool {
        let (lo, hi) = self.measure.exp_moment_range();
        lo < r && r < hi
    }

    /// Integrability: `∫ (|x| ∨ x^2) nu < ∞` and `∫ (e^x - 1)^n nu < ∞`, n = 2, 4.
    pub fn validate(&self) -> Result<()> {
        if self.measure.kind() == MeasureKind::Zero {
            return Ok(());
        }
        if !self.in_exp_range(4.0) {
            return Err(Error::Integrability {
                moment: "∫(e^x-1)^4 nu(dx)",
                detail: format!(
                    "exponential moments only exist for r in {:?}",
                    self.measure.exp_moment_range()
                ),
            });
        }
        let tol = Tolerance::default();
        let m = &*self.measure;
        finite_or(
            "∫(|x| ∨ x^2) nu(dx)",
            nu_integral(m, |x| x.abs().max(x * x), tol),
        )?;
        finite_or("∫(e^x-1)^2 nu(dx)", nu_integral(m, |x| exp_m1(x).powi(2), tol))?;
        finite_or("∫(e^x-1)^4 nu(dx)", nu_integral(m, |x| exp_m1(x).powi(4), tol))?;
        Ok(())
    }

    /// `∫ (e^{izx} - 1 - izx) nu(dx)`, closed form when available.
    pub fn jump_cumulant(&self, z: Complex64) -> Result<Complex64> {
        let r = -z.im;
        let on_strip = r == 0.0 || self.in_exp_range(r);
        if let Some(v) = self.measure.closed_cumulant(z) {
            if on_strip || (self.measure.continues_off_axis() && z.re != 0.0) {
                return Ok(v);
            }
        }
        if !on_strip {
            let (lo, hi) = self.measure.exp_moment_range();
            return Err(Error::Domain { z, lo: -hi, hi: -lo });
        }
        let est = nu_integral_complex(&*self.measure, |x| exp_m1_m_lin(I * z * x), Tolerance::default())?;
        Ok(est.value)
    }

    /// `∫ x nu(dx)`.
    pub fn first_moment(&self) -> Result<f64> {
        match self.measure.closed_first_moment() {
            Some(v) => Ok(v),
            None => finite_or(
                "∫x nu(dx)",
                nu_integral(&*self.measure, |x| x, Tolerance::default()),
            ),
        }
    }

    /// `∫ x (e^x - 1) nu(dx)`.
    pub fn x_em1_moment(&self) -> Result<f64> {
        match self.measure.closed_x_em1_moment() {
            Some(v) => Ok(v),
            None => finite_or(
                "∫x(e^x-1) nu(dx)",
                nu_integral(&*self.measure, |x| x * exp_m1(x), Tolerance::default()),
            ),
        }
    }

    /// `∫_0^∞ e^{2x}(e^x - 1)^2 nu(dx)`.
    pub fn upper_e2x_moment(&self) -> Result<f64> {
        match self.measure.closed_upper_e2x_moment() {
            Some(v) => Ok(v),
            None => {
                if !self.in_exp_range(4.0) {
                    return Err(Error::Integrability {
                        moment: "∫_0^∞ e^{2x}(e^x-1)^2 nu(dx)",
                        detail: "exponential moment of order 4 is infinite".into(),
                    });
                }
                finite_or(
                    "∫_0^∞ e^{2x}(e^x-1)^2 nu(dx)",
                    nu_half_integral(
                        &*self.measure,
                        true,
                        |x| (2.0 * x).exp() * exp_m1(x).powi(2),
                        Tolerance::default(),
                    ),
                )
            }
        }
    }

    /// Cumulant of `L_1` under the physical measure.
    pub fn cumulant(&self, z: Complex64) -> Result<Complex64> {
        Ok(I * z * self.mu - 0.5 * self.sigma * self.sigma * z * z + self.jump_cumulant(z)?)
    }
}

/// `mu_s = mu + sigma^2/2 + ∫ (e^x - 1 - x) nu(dx)`.
pub fn compute_mu_s(model: &LevyModel) -> Result<f64> {
    let jump = match model.measure.closed_cumulant(-I) {
        Some(v) => v.re,
        None => finite_or(
            "∫(e^x-1-x) nu(dx)",
            nu_integral(&*model.measure, |x| exp_m1(x) - x, Tolerance::default()),
        )?,
    };
    Ok(model.mu + 0.5 * model.sigma * model.sigma + jump)
}

/// `(C2+, C2-)`: the second exponential jump moment over the positive and
/// negative half-lines.
pub fn c2_split(model: &LevyModel) -> Result<(f64, f64)> {
    if let Some(split) = model.measure.closed_c2_split() {
        return Ok(split);
    }
    let f = |x: f64| exp_m1(x).powi(2);
    let tol = Tolerance::default();
    let plus = finite_or(
        "∫_0^∞(e^x-1)^2 nu(dx)",
        nu_half_integral(&*model.measure, true, f, tol),
    )?;
    let minus = finite_or(
        "∫_{-∞}^0(e^x-1)^2 nu(dx)",
        nu_half_integral(&*model.measure, false, f, tol),
    )?;
    Ok((plus, minus))
}

/// A model together with its minimal-martingale-measure constants.
#[derive(Clone, Debug)]
pub struct MmmModel {
    base: LevyModel,
    mu_s: f64,
    xi: f64,
    c2: f64,
    c2_plus: f64,
    c2_minus: f64,
    tilt: f64,
    drift_star: f64,
    jump_mean_star: f64,
    k_minus_i: Complex64,
    x_em1: f64,
}

/// Transform a model to the minimal martingale measure, enforcing
/// integrability plus the mean-variance tilt condition `0 >= mu_S > -(sigma^2 + C2)`.
pub fn to_mmm(model: &LevyModel) -> Result<MmmModel> {
    model.validate()?;
    let mut mu_s = compute_mu_s(model)?;
    // Roundoff in mu + sigma^2/2 + ... must not turn a martingale into a violation.
    let magnitude = model.mu.abs() + 0.5 * model.sigma * model.sigma + (mu_s - model.mu).abs();
    if mu_s > 0.0 && mu_s <= 64.0 * f64::EPSILON * magnitude {
        mu_s = 0.0;
    }
    let (c2_plus, c2_minus) = c2_split(model)?;
    let c2 = c2_plus + c2_minus;
    let sigma2 = model.sigma * model.sigma;
    let denom = sigma2 + c2;
    let lower = -sigma2 - c2;
    if denom <= 0.0 {
        // No Brownian part and no jumps: the price is constant.
        if mu_s != 0.0 {
            return Err(Error::Assumption { mu_s, lower });
        }
    } else if !(mu_s <= 0.0 && mu_s > lower) {
        return Err(Error::Assumption { mu_s, lower });
    }
    let tilt = if denom > 0.0 { mu_s / denom } else { 0.0 };
    // theta_x = tilt (e^x - 1) < 1 on the support; equivalent to tilt in (-1, 0].
    if tilt >= 1.0 || tilt <= -1.0 {
        return Err(Error::Assumption { mu_s, lower });
    }
    let xi = tilt * model.sigma;
    let x_em1 = model.x_em1_moment()?;
    let first = model.first_moment()?;
    let drift_star = model.mu - model.sigma * xi - tilt * x_em1;
    let k_minus_i = model.jump_cumulant(-I)?;
    Ok(MmmModel {
        base: model.clone(),
        mu_s,
        xi,
        c2,
        c2_plus,
        c2_minus,
        tilt,
        drift_star,
        jump_mean_star: first - tilt * x_em1,
        k_minus_i,
        x_em1,
    })
}

impl MmmModel {
    pub fn base(&self) -> &LevyModel {
        &self.base
    }
    pub fn mu_s(&self) -> f64 {
        self.mu_s
    }
    pub fn xi(&self) -> f64 {
        self.xi
    }
    pub fn sigma(&self) -> f64 {
        self.base.sigma
    }
    pub fn c2(&self) -> f64 {
        self.c2
    }
    pub fn c2_plus(&self) -> f64 {
        self.c2_plus
    }
    pub fn c2_minus(&self) -> f64 {
        self.c2_minus
    }
    /// `sigma^2 + C2`.
    pub fn denominator(&self) -> f64 {
        self.base.sigma * self.base.sigma + self.c2
    }
    /// `a` in `theta_x = a (e^x - 1)`.
    pub fn tilt(&self) -> f64 {
        self.tilt
    }
    pub fn theta(&self, x: f64) -> f64 {
        self.tilt * exp_m1(x)
    }
    /// Drift `b*` of `L` under the MMM (compensated-jump convention).
    pub fn drift_star(&self) -> f64 {
        self.drift_star
    }
    /// `∫ x nu*(dx)`.
    pub fn jump_mean_star(&self) -> f64 {
        self.jump_mean_star
    }
    /// Drift with jumps left uncompensated: `b* - ∫ x nu*(dx)`.
    pub fn finite_variation_drift(&self) -> f64 {
        self.drift_star - self.jump_mean_star
    }
    /// Density of the tilted measure `(1 - theta_x) nu(dx)`.
    pub fn nu_star_density(&self, x: f64) -> f64 {
        (1.0 - self.theta(x)) * self.base.measure.density(x)
    }
    pub fn measure(&self) -> &dyn LevyMeasure {
        &*self.base.measure
    }

    /// Open interval of `Im z` where the MMM cumulant is defined by its
    /// integral representation.
    pub fn strip(&self) -> (f64, f64) {
        let (lo, hi) = self.base.measure.exp_moment_range();
        // r = -Im z must satisfy r in (lo, hi) and r + 1 in (lo, hi).
        (-(hi - 1.0), -lo)
    }

    pub(crate) fn in_strip(&self, z: Complex64) -> bool {
        let (lo, hi) = self.strip();
        z.im > lo && z.im < hi
    }

    /// Whether `cumulant_unchecked` is valid for every `z` with `Re z != 0`.
    pub fn continues_off_axis(&self) -> bool {
        self.base.measure.continues_off_axis()
    }

    /// Tilted-measure cumulant without domain checks. Callers guarantee `z`
    /// is in the strip or off the imaginary axis for analytic measures.
    pub(crate) fn cumulant_unchecked(&self, z: Complex64) -> Complex64 {
        let sigma = self.base.sigma;
        let a = self.tilt;
        let k = |w: Complex64| -> Complex64 {
            match self.base.measure.closed_cumulant(w) {
                Some(v) => v,
                None => self
                    .base
                    .jump_cumulant(w)
                    .unwrap_or(Complex64::new(f64::NAN, f64::NAN)),
            }
        };
        let measure = &*self.base.measure;
        if measure.kind() == MeasureKind::Zero {
            return I * z * self.drift_star - 0.5 * sigma * sigma * z * z;
        }
        if let (Some(k0), Some(k1), Some(k_mi)) = (
            measure.closed_fv_cumulant(z),
            measure.closed_fv_cumulant(z - I),
            measure.closed_fv_cumulant(-I),
        ) {
            // (1 + a) ∫(e^{izx}-1) nu + (-a) ∫(e^{izx}-1) e^x nu, drift uncompensated.
            return I * z * self.finite_variation_drift() - 0.5 * sigma * sigma * z * z
                + (1.0 + a) * k0
                - a * (k1 - k_mi);
        }
        let base = I * z * self.drift_star - 0.5 * sigma * sigma * z * z;
        let kz = k(z);
        let jump = if a == 0.0 {
            kz
        } else {
            (1.0 + a) * kz - a * (k(z - I) - self.k_minus_i - I * z * self.x_em1)
        };
        base + jump
    }
}

/// `Psi*(z)`: cumulant of `L_1` under the MMM, so that
/// `E*[e^{iz L_t}] = exp(t Psi*(z))`.
pub fn mmm_cumulant(model: &MmmModel, z: Complex64) -> Result<Complex64> {
    if !(model.in_strip(z) || (model.continues_off_axis() && z.re != 0.0)) {
        let (lo, hi) = model.strip();
        return Err(Error::Domain { z, lo, hi });
    }
    let v = model.cumulant_unchecked(z);
    if v.re.is_finite() && v.im.is_finite() {
        Ok(v)
    } else {
        Err(Error::Integrability {
            moment: "∫(e^{izx}-1-izx) nu*(dx)",
            detail: format!("non-finite at z = {z}"),
        })
    }
}

/// Independent route: `Psi*(z)` by direct quadrature against the tilted
/// density, `i z b* - sigma^2 z^2/2 + ∫ (e^{izx} - 1 - izx)(1 - theta_x) nu(dx)`.
pub fn mmm_cumulant_by_quadrature(model: &MmmModel, z: Complex64, tol: Tolerance) -> Result<Complex64> {
    if !model.in_strip(z) {
        let (lo, hi) = model.strip();
        return Err(Error::Domain { z, lo, hi });
    }
    let sigma = model.sigma();
    let jump = nu_integral_complex(
        model.measure(),
        |x| exp_m1_m_lin(I * z * x) * (1.0 - model.theta(x)),
        tol,
    )?;
    Ok(I * z * model.drift_star() - 0.5 * sigma * sigma * z * z + jump.value)
}
