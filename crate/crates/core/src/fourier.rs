//! Damped Fourier transforms of the MMM law of `L_{T-t}`.
//!
//! Every quantity has the form
//!
//! ```text
//! value(k) = (1/π) Re ∫_0^∞ e^{(s - w)k} M(w) g(w) dv,   w = α + iv,  k = log χ
//! ```
//!
//! where `M(w) = E*[e^{w L}] = φ_{T-t}(v - iα)` and `(s, g)` depend on the
//! payoff. Direct mode integrates this adaptively, along a ray into the
//! complex `v` plane when the cumulant continues analytically off the
//! imaginary axis. FFT mode evaluates a whole log-strike grid at once.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levy_core::{mmm_cumulant, nu_integral_complex, ComplexM1, MeasureKind, MmmModel};
use crate::quad::{self, Estimate, Tolerance};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Relative tolerance of direct-mode quadrature.
pub const DIRECT_REL_TOL: f64 = 1e-10;

/// Smallest log-strike spacing used by batch mode.
const MIN_FFT_SPACING: f64 = 1e-6;

/// Truncation point of the condition integral in `v`.
pub const CONDITION_V_MAX: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    FftBatch,
    #[default]
    DirectQuadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FourierConfig {
    pub n_grid: usize,
    pub eta: f64,
    pub alpha: f64,
    pub mode: Mode,
}

impl Default for FourierConfig {
    fn default() -> Self {
        Self {
            n_grid: 1 << 14,
            eta: 0.025,
            alpha: 1.75,
            mode: Mode::DirectQuadrature,
        }
    }
}

impl FourierConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.n_grid.is_power_of_two() || self.n_grid < 16 {
            return Err(Error::invalid(
                "n_grid",
                format!("must be a power of two >= 16, got {}", self.n_grid),
            ));
        }
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(Error::invalid("eta", format!("must be > 0, got {}", self.eta)));
        }
        if !(self.alpha > 1.0 && self.alpha <= 2.0) {
            return Err(Error::invalid(
                "alpha",
                format!("must lie in (1, 2], got {}", self.alpha),
            ));
        }
        Ok(())
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    /// `v_max = n_grid * eta`.
    pub fn v_max(&self) -> f64 {
        self.n_grid as f64 * self.eta
    }
}

/// `z ↦ φ_{T-t}(z) = exp((T-t) Ψ*(z))`.
///
/// `drift_shift` adds `i z ε` to `Ψ*`; it exists to build deliberately wrong
/// characteristic functions for negative-control tests.
#[derive(Debug, Clone)]
pub struct CharFn {
    model: Arc<MmmModel>,
    tau: f64,
    drift_shift: f64,
    // E(1) = ∫(e^x - 1 - x) nu(dx), used by the I2 kernel.
    e1: f64,
}

impl CharFn {
    pub fn new(model: &MmmModel, tau: f64) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::invalid("tau", format!("horizon must be > 0, got {tau}")));
        }
        let e1 = model.base().jump_cumulant(-I)?.re;
        Ok(Self {
            model: Arc::new(model.clone()),
            tau,
            drift_shift: 0.0,
            e1,
        })
    }

    pub fn with_drift_shift(mut self, eps: f64) -> Self {
        self.drift_shift = eps;
        self
    }

    pub fn model(&self) -> &MmmModel {
        &self.model
    }

    pub fn horizon(&self) -> f64 {
        self.tau
    }

    pub fn drift_shift(&self) -> f64 {
        self.drift_shift
    }

    /// Open interval of `Im z` on which `φ` is given by its expectation.
    pub fn strip(&self) -> (f64, f64) {
        self.model.strip()
    }

    /// Range of real `α` for which `M(α) = E*[e^{αL}]` is finite.
    pub fn alpha_range(&self) -> (f64, f64) {
        let (lo, hi) = self.strip();
        (-hi, -lo)
    }

    pub fn log_phi(&self, z: Complex64) -> Result<Complex64> {
        Ok(self.tau * (mmm_cumulant(&self.model, z)? + I * z * self.drift_shift))
    }

    pub fn phi(&self, z: Complex64) -> Result<Complex64> {
        Ok(self.log_phi(z)?.exp())
    }

    /// Whether the cumulant may be evaluated off the imaginary axis outside the strip.
    pub fn analytic(&self) -> bool {
        self.model.continues_off_axis()
    }

    /// `log M(w) = log φ(-iw)` without domain checks.
    fn log_mgf(&self, w: Complex64) -> Complex64 {
        let z = -I * w;
        self.tau * (self.model.cumulant_unchecked(z) + w * self.drift_shift)
    }

    /// Linear growth rate of `Re log M(w)` in `Re w` for large `|w|` off the axis.
    fn linear_rate(&self) -> f64 {
        self.tau * (self.model.finite_variation_drift() + self.drift_shift)
    }

    /// `Λ(w) = ∫ (e^{wx} - 1)(e^x - 1) nu(dx)` under the physical measure.
    fn lambda(&self, w: Complex64) -> Complex64 {
        let base = self.model.base();
        let measure = &*base.measure;
        if measure.kind() == MeasureKind::Zero {
            return Complex64::new(0.0, 0.0);
        }
        match (
            measure.closed_fv_cumulant(-I * (w + 1.0)),
            measure.closed_fv_cumulant(-I * w),
            measure.closed_fv_cumulant(-I),
        ) {
            (Some(a), Some(b), Some(c)) => a - b - c,
            _ => match (
                measure.closed_cumulant(-I * (w + 1.0)),
                measure.closed_cumulant(-I * w),
            ) {
                (Some(a), Some(b)) => a - b - self.e1,
                _ => nu_integral_complex(
                    measure,
                    |x| (w * x).exp_m1_c() * x.exp_m1(),
                    Tolerance::new(1e-15, 1e-12),
                )
                .map(|e| e.value)
                .unwrap_or(Complex64::new(f64::NAN, f64::NAN)),
            },
        }
    }
}

/// The payoff transforms available from the engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Transform {
    /// `I1(1, χ) = E*[e^L 1{L > k}]`.
    I1,
    /// `I2(1, χ) = ∫ E*[(e^{L+x} - χ)^+ - (e^L - χ)^+](e^x - 1) nu(dx)`.
    I2,
    /// `P*(L >= k)`.
    UpperTail,
    /// `P*(L <= k)`, computed with `α < 0`.
    LowerTail,
    /// `E*[(e^L - χ)^+]`.
    Call,
    /// `C2 I1 - I2`, whose kernel is analytic at `w = 0, 1`.
    Difference,
}

impl Transform {
    fn shift(self) -> f64 {
        match self {
            Transform::UpperTail | Transform::LowerTail => 0.0,
            _ => 1.0,
        }
    }

    /// Admissible damping exponents, before intersecting with the strip.
    fn alpha_domain(self) -> (f64, f64) {
        match self {
            Transform::I1 | Transform::I2 | Transform::Call => (1.0, f64::INFINITY),
            Transform::UpperTail => (0.0, f64::INFINITY),
            Transform::LowerTail => (f64::NEG_INFINITY, 0.0),
            Transform::Difference => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// Needs `M(w + 1)`-type moments of the Lévy measure.
    fn uses_lambda(self) -> bool {
        matches!(self, Transform::I2 | Transform::Difference)
    }

    fn kernel(self, phi: &CharFn, w: Complex64) -> Complex64 {
        match self {
            Transform::I1 => 1.0 / (w - 1.0),
            Transform::I2 => phi.lambda(w) / ((w - 1.0) * w),
            Transform::UpperTail => 1.0 / w,
            Transform::LowerTail => -1.0 / w,
            Transform::Call => 1.0 / ((w - 1.0) * w),
            Transform::Difference => (phi.model.c2() - phi.lambda(w) / w) / (w - 1.0),
        }
    }
}

/// Result of a single transform evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierValue {
    pub value: f64,
    /// Estimated absolute error (quadrature, truncation, interpolation).
    pub abs_err: f64,
    pub alpha: f64,
    pub notes: Vec<Note>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Note {
    /// The requested `α` was outside the strip; `used` replaced it.
    AlphaFallback { requested: f64, used: f64 },
    /// A probability slightly outside `[0, 1]` was clamped.
    Clamped { excursion: f64 },
    /// FFT value interpolated between grid nodes.
    Interpolated { error: f64 },
}

impl FourierValue {
    fn new(value: f64, abs_err: f64, alpha: f64) -> Self {
        Self {
            value,
            abs_err,
            alpha,
            notes: Vec::new(),
        }
    }
}

fn check_chi(chi: f64) -> Result<f64> {
    if chi.is_finite() && chi > 0.0 {
        Ok(chi.ln())
    } else {
        Err(Error::invalid("chi", format!("moneyness must be > 0, got {chi}")))
    }
}

/// Validate `α` against the transform and the strip of `φ`.
pub fn check_alpha(phi: &CharFn, transform: Transform, alpha: f64) -> Result<()> {
    let (lo, hi) = transform.alpha_domain();
    let (slo, shi) = phi.alpha_range();
    let shi = if transform.uses_lambda() { shi.min(phi.lambda_hi()) } else { shi };
    if alpha > lo && alpha < hi && alpha > slo && alpha < shi {
        Ok(())
    } else {
        Err(Error::Domain {
            z: Complex64::new(0.0, -alpha),
            lo: -shi,
            hi: -slo,
        })
    }
}

impl CharFn {
    /// Largest `α` for which `Λ(α)` is finite.
    fn lambda_hi(&self) -> f64 {
        self.model.measure().exp_moment_range().1 - 1.0
    }
}

/// `(1/π) Re ∫_{v0}^∞ e^{(s-w)k} M(w) g(w) dv` by adaptive quadrature.
fn integrate_from(
    phi: &CharFn,
    transform: Transform,
    k: f64,
    alpha: f64,
    v0: f64,
    cfg: &FourierConfig,
) -> Result<Estimate> {
    let s = transform.shift();
    let f = |v: Complex64| -> Complex64 {
        let w = alpha + I * v;
        let expo = (s - w) * k + phi.log_mgf(w);
        if expo.re < -745.0 {
            return Complex64::new(0.0, 0.0);
        }
        expo.exp() * transform.kernel(phi, w)
    };
    let scale = f(Complex64::new(v0, 0.0)).norm().max(f64::MIN_POSITIVE);
    let tol = Tolerance::new(1e-15 * scale, DIRECT_REL_TOL).with_max_intervals(20_000);

    if phi.analytic() {
        let d = k - phi.linear_rate();
        let theta = if phi.model.sigma() > 0.0 { PI / 6.0 } else { PI / 4.0 };
        let rho = if d >= 0.0 {
            Complex64::from_polar(1.0, -theta)
        } else {
            Complex64::from_polar(1.0, theta)
        };
        // v = v0 + t rho, t = e^u - 1.
        let g = |u: f64| -> Complex64 {
            let e = u.exp();
            if !e.is_finite() || e > 1e150 {
                return Complex64::new(0.0, 0.0);
            }
            f(v0 + (e - 1.0) * rho) * rho * e
        };
        let est = quad::integrate_to_infinity(g, 0.0, tol)?;
        return Ok(Estimate::new(est.value.re / PI, est.abs_err / PI));
    }

    // Real axis, truncated. The cumulant itself comes from quadrature here,
    // so the outer tolerance is looser.
    let tol = Tolerance::new(1e-15 * scale, 1e-8).with_max_intervals(20_000);
    let sigma2_tau = phi.model.sigma().powi(2) * phi.tau;
    let v_max = if sigma2_tau > 0.0 {
        let (_, shi) = phi.alpha_range();
        let a_eff = alpha.abs().max(shi.min(4.0));
        ((2.0 * 50.0 / sigma2_tau) + a_eff * a_eff).sqrt().max(cfg.v_max())
    } else {
        cfg.v_max()
    };
    let v_max = v_max.max(v0 + 1.0);
    let re = |v: f64| f(Complex64::new(v, 0.0)).re;
    let est = quad::integrate(re, v0, v_max, tol)?;
    // Last decade of the truncated range.
    let last = quad::integrate(
        |v: f64| f(Complex64::new(v, 0.0)).norm(),
        v0.max(0.9 * v_max),
        v_max,
        Tolerance::new(1e-15 * scale, 1e-6),
    )?;
    let tail = last.value * 10.0;
    let target = 1e-6 * est.value.abs().max(1e-12);
    if sigma2_tau == 0.0 && tail > target {
        return Err(Error::Accuracy {
            what: "truncated Fourier integral",
            estimate: tail / PI,
            tolerance: target / PI,
        });
    }
    Ok(Estimate::new(est.value / PI, (est.abs_err + tail) / PI))
}

/// Evaluate `transform` at moneyness `chi` with damping `alpha` in direct mode.
pub fn direct(phi: &CharFn, transform: Transform, chi: f64, alpha: f64) -> Result<FourierValue> {
    direct_with(phi, transform, chi, alpha, &FourierConfig::default())
}

fn direct_with(
    phi: &CharFn,
    transform: Transform,
    chi: f64,
    alpha: f64,
    cfg: &FourierConfig,
) -> Result<FourierValue> {
    let k = check_chi(chi)?;
    check_alpha(phi, transform, alpha)?;
    let est = integrate_from(phi, transform, k, alpha, 0.0, cfg)?;
    Ok(FourierValue::new(est.value, est.abs_err, alpha))
}

/// Dispatch on the configured mode for a single moneyness.
fn evaluate(phi: &CharFn, transform: Transform, chi: f64, alpha: f64, cfg: &FourierConfig) -> Result<FourierValue> {
    match cfg.mode {
        Mode::DirectQuadrature => direct_with(phi, transform, chi, alpha, cfg),
        Mode::FftBatch => {
            let mut out = batch_with_alpha(phi, transform, &[chi], alpha, cfg)?;
            Ok(out.remove(0))
        }
    }
}

/// `I1(1, χ) = E*[1{S_T > K} S_T]/S` at `S = 1`, `K = χ`.
pub fn i1(phi: &CharFn, chi: f64, cfg: &FourierConfig) -> Result<FourierValue> {
    cfg.validate()?;
    evaluate(phi, Transform::I1, chi, cfg.alpha, cfg)
}

/// `I2(1, χ)`.
pub fn i2(phi: &CharFn, chi: f64, cfg: &FourierConfig) -> Result<FourierValue> {
    cfg.validate()?;
    evaluate(phi, Transform::I2, chi, cfg.alpha, cfg)
}

/// `E*[(S_T - K)^+]/S` at `K/S = χ`.
pub fn call(phi: &CharFn, chi: f64, cfg: &FourierConfig) -> Result<FourierValue> {
    cfg.validate()?;
    evaluate(phi, Transform::Call, chi, cfg.alpha, cfg)
}

/// Clamp a probability whose excursion outside `[0, 1]` is roundoff.
fn clamp_probability(mut v: FourierValue) -> Result<FourierValue> {
    let excursion = if v.value < 0.0 {
        -v.value
    } else if v.value > 1.0 {
        v.value - 1.0
    } else {
        return Ok(v);
    };
    if excursion > 1e-8 {
        return Err(Error::Accuracy {
            what: "tail probability outside [0, 1]",
            estimate: excursion,
            tolerance: 1e-8,
        });
    }
    v.value = v.value.clamp(0.0, 1.0);
    v.notes.push(Note::Clamped { excursion });
    Ok(v)
}

/// Largest admissible `α <= requested` for the upper tail.
fn upper_tail_alpha(phi: &CharFn, requested: f64) -> f64 {
    let (_, shi) = phi.alpha_range();
    if requested < shi {
        requested
    } else {
        // Midway between 1 and the edge of the strip.
        0.5 * (1.0 + shi.min(2.0))
    }
}

/// `p*([log χ, ∞)) = (1/π) ∫_0^∞ χ^{-α-iv} φ(v - iα)/(α + iv) dv`.
pub fn tail_upper(phi: &CharFn, chi: f64, cfg: &FourierConfig) -> Result<FourierValue> {
    cfg.validate()?;
    let alpha = upper_tail_alpha(phi, cfg.alpha);
    let mut v = evaluate(phi, Transform::UpperTail, chi, alpha, cfg)?;
    if alpha != cfg.alpha {
        v.notes.push(Note::AlphaFallback {
            requested: cfg.alpha,
            used: alpha,
        });
    }
    clamp_probability(v)
}

/// `p*((-∞, log χ])`, by its own transform with damping `-α` rather than as
/// a complement, so that `tail_lower + tail_upper = 1` is a real check.
pub fn tail_lower(phi: &CharFn, chi: f64, cfg: &FourierConfig) -> Result<FourierValue> {
    cfg.validate()?;
    let (slo, _) = phi.alpha_range();
    let requested = -cfg.alpha;
    let alpha = if requested > slo { requested } else { 0.5 * slo.max(-2.0) };
    let mut v = evaluate(phi, Transform::LowerTail, chi, alpha, cfg)?;
    if alpha != requested {
        v.notes.push(Note::AlphaFallback { requested, used: alpha });
    }
    clamp_probability(v)
}

/// Damping used for the difference kernel: both poles are removable, so `α`
/// is chosen to make `e^{(1-α)k}` small on the side of `χ`.
pub fn difference_alpha(phi: &CharFn, chi: f64) -> f64 {
    let (slo, shi) = phi.alpha_range();
    let shi = shi.min(phi.lambda_hi());
    let target: f64 = if chi < 1.0 { -1.0 } else { 3.0 };
    target.clamp(0.5 * slo.max(-4.0), 0.5 * (1.0 + shi.min(8.0)))
}

/// `C2 I1(1, χ) - I2(1, χ)` via the combined kernel.
pub fn difference(phi: &CharFn, chi: f64, cfg: &FourierConfig) -> Result<FourierValue> {
    cfg.validate()?;
    match cfg.mode {
        Mode::DirectQuadrature => {
            let alpha = difference_alpha(phi, chi);
            direct_with(phi, Transform::Difference, chi, alpha, cfg)
        }
        Mode::FftBatch => evaluate(phi, Transform::Difference, chi, cfg.alpha, cfg),
    }
}

/// `∫_0^∞ |φ(v - 2i)|/(1 + v) dv` with its tail estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionIntegral {
    pub value: f64,
    /// Integral over `[0, v_max]`.
    pub truncated: f64,
    /// Fitted contribution of `(v_max, ∞)`.
    pub tail: f64,
    /// Decay rate `β` of `|φ(v - 2i)| ~ v^{-β}` at `v_max`.
    pub decay: f64,
    pub abs_err: f64,
}

pub fn theorem4_condition_integral(phi: &CharFn) -> Result<ConditionIntegral> {
    theorem4_condition_integral_to(phi, CONDITION_V_MAX)
}

/// As [`theorem4_condition_integral`] with an explicit truncation point.
pub fn theorem4_condition_integral_to(phi: &CharFn, v_max: f64) -> Result<ConditionIntegral> {
    let two = Complex64::new(0.0, -2.0);
    phi.log_phi(two)?;
    // With v = e^u - 1 the measure dv/(1+v) becomes du.
    let h = |u: f64| -> f64 {
        let v = u.exp_m1();
        match phi.log_phi(Complex64::new(v, -2.0)) {
            Ok(l) if l.re < -745.0 => 0.0,
            Ok(l) => l.re.exp(),
            Err(_) => f64::NAN,
        }
    };
    let u_max = v_max.ln_1p();
    let scale = h(0.0).max(f64::MIN_POSITIVE);
    let est = quad::integrate(h, 0.0, u_max, Tolerance::new(1e-15 * scale, 1e-12).with_max_intervals(20_000))?;
    let end = h(u_max);
    let prev = h(u_max - 1.0);
    let (decay, tail) = if end == 0.0 {
        (f64::INFINITY, 0.0)
    } else {
        let beta = (prev / end).ln();
        if !(beta > 1e-3) {
            return Err(Error::Divergence(format!(
                "|φ(v - 2i)| does not decay at v = {v_max:e} (local rate {beta:.3e})"
            )));
        }
        (beta, end / beta)
    };
    if tail > est.value {
        return Err(Error::Divergence(format!(
            "tail estimate {tail:e} exceeds truncated value {:e}",
            est.value
        )));
    }
    Ok(ConditionIntegral {
        value: est.value + tail,
        truncated: est.value,
        tail,
        decay,
        abs_err: est.abs_err + 1e-3 * tail,
    })
}

/// Raw FFT output on the log-strike grid `k_u = k_c + (u - N/2) λ`.
#[derive(Debug, Clone)]
pub struct FftGrid {
    pub k_center: f64,
    pub lambda: f64,
    pub alpha: f64,
    /// Simpson sum over `[0, v_s]` for each node.
    pub values: Vec<f64>,
    /// Richardson estimate of the discretization error; infinite outside
    /// the central half of the grid.
    pub disc_err: Vec<f64>,
    /// Upper end of the Simpson range.
    pub v_s: f64,
}

impl FftGrid {
    pub fn log_strike(&self, u: usize) -> f64 {
        self.k_center + (u as f64 - (self.values.len() / 2) as f64) * self.lambda
    }
}

/// `y_u = Σ_j x_j e^{-2πi γ j u}` for `u < n`. Plain FFT when `γ = 1/n`,
/// otherwise a chirp-z transform through a length-`2n` convolution.
fn fractional_dft(x: Vec<Complex64>, gamma: f64) -> Vec<Complex64> {
    let n = x.len();
    let mut planner = FftPlanner::new();
    if (gamma * n as f64 - 1.0).abs() < 1e-14 {
        let mut x = x;
        planner.plan_fft_forward(n).process(&mut x);
        return x;
    }
    let len = 2 * n;
    let chirp = |m: usize| Complex64::from_polar(1.0, PI * gamma * (m as f64) * (m as f64));
    let mut a = vec![Complex64::new(0.0, 0.0); len];
    let mut b = vec![Complex64::new(0.0, 0.0); len];
    for (j, xj) in x.iter().enumerate() {
        a[j] = xj * chirp(j).conj();
        b[j] = chirp(j);
        if j > 0 {
            b[len - j] = b[j];
        }
    }
    let fwd = planner.plan_fft_forward(len);
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (ai, bi) in a.iter_mut().zip(&b) {
        *ai *= bi;
    }
    planner.plan_fft_inverse(len).process(&mut a);
    (0..n).map(|u| a[u] * chirp(u).conj() / len as f64).collect()
}

/// Simpson sums `(1/π) Re e^{(s-α)k_u} Σ_j e^{-i v_j k_u} h_j ω_j` for all `u`.
#[allow(clippy::too_many_arguments)]
fn fft_sums(
    phi: &CharFn,
    transform: Transform,
    alpha: f64,
    n: usize,
    eta: f64,
    lambda: f64,
    k_c: f64,
) -> Vec<f64> {
    let s = transform.shift();
    let j_end = 4 * ((n - 2) / 4);
    let half = (n / 2) as f64;
    let x: Vec<Complex64> = (0..n)
        .map(|j| {
            if j > j_end {
                return Complex64::new(0.0, 0.0);
            }
            let weight = if j == 0 || j == j_end {
                1.0
            } else if j % 2 == 1 {
                4.0
            } else {
                2.0
            } * eta
                / 3.0;
            let v = j as f64 * eta;
            let w = Complex64::new(alpha, v);
            // Shift so that index u = n/2 sits at k_c.
            let lm = phi.log_mgf(w) - I * v * (k_c - half * lambda);
            let h = if lm.re < -745.0 {
                Complex64::new(0.0, 0.0)
            } else {
                lm.exp() * transform.kernel(phi, w)
            };
            h * weight
        })
        .collect();
    let y = fractional_dft(x, eta * lambda / (2.0 * PI));
    y.iter()
        .enumerate()
        .map(|(u, c)| {
            let k = k_c + (u as f64 - half) * lambda;
            ((s - alpha) * k).exp() * c.re / PI
        })
        .collect()
}

/// Grid with the standard spacing `λ = 2π/(Nη)`; see [`fft_grid_with_spacing`].
pub fn fft_grid(
    phi: &CharFn,
    transform: Transform,
    alpha: f64,
    cfg: &FourierConfig,
    k_center: f64,
) -> Result<FftGrid> {
    let lambda = 2.0 * PI / (cfg.n_grid as f64 * cfg.eta);
    fft_grid_with_spacing(phi, transform, alpha, cfg, k_center, lambda)
}

/// FFT over the grid centred at `k_center` with log-strike spacing `lambda`,
/// with a Richardson error estimate against the half-size grid of spacing
/// `2η` (same `λ`).
pub fn fft_grid_with_spacing(
    phi: &CharFn,
    transform: Transform,
    alpha: f64,
    cfg: &FourierConfig,
    k_center: f64,
    lambda: f64,
) -> Result<FftGrid> {
    cfg.validate()?;
    check_alpha(phi, transform, alpha)?;
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::invalid("lambda", format!("must be > 0, got {lambda}")));
    }
    let n = cfg.n_grid;
    let fine = fft_sums(phi, transform, alpha, n, cfg.eta, lambda, k_center);
    let coarse = fft_sums(phi, transform, alpha, n / 2, 2.0 * cfg.eta, lambda, k_center);
    let mut disc_err = vec![f64::INFINITY; n];
    for (uc, c) in coarse.iter().enumerate() {
        let uf = uc + n / 4;
        disc_err[uf] = (fine[uf] - c).abs() / 15.0;
    }
    if fine.iter().any(|v| !v.is_finite()) {
        return Err(Error::Accuracy {
            what: "FFT grid",
            estimate: f64::INFINITY,
            tolerance: 0.0,
        });
    }
    Ok(FftGrid {
        k_center,
        lambda,
        alpha,
        values: fine,
        disc_err,
        v_s: (4 * ((n - 2) / 4)) as f64 * cfg.eta,
    })
}

/// Value at grid node `u`: Simpson sum plus the tail beyond `v_s`.
fn node_value(
    phi: &CharFn,
    transform: Transform,
    grid: &FftGrid,
    u: usize,
    cfg: &FourierConfig,
) -> Result<(f64, f64)> {
    let k = grid.log_strike(u);
    let tail = integrate_from(phi, transform, k, grid.alpha, grid.v_s, cfg)?;
    Ok((grid.values[u] + tail.value, grid.disc_err[u] + tail.abs_err))
}

/// FFT values at the grid nodes `u`, tail-corrected.
pub fn fft_nodes(
    phi: &CharFn,
    transform: Transform,
    grid: &FftGrid,
    nodes: &[usize],
    cfg: &FourierConfig,
) -> Result<Vec<(f64, f64)>> {
    nodes.iter().map(|&u| node_value(phi, transform, grid, u, cfg)).collect()
}

/// Evaluate `transform` at all `chis` from one FFT pass with damping `alpha`.
pub fn batch_with_alpha(
    phi: &CharFn,
    transform: Transform,
    chis: &[f64],
    alpha: f64,
    cfg: &FourierConfig,
) -> Result<Vec<FourierValue>> {
    if chis.is_empty() {
        return Ok(Vec::new());
    }
    let ks: Vec<f64> = chis.iter().map(|&c| check_chi(c)).collect::<Result<_>>()?;
    let (kmin, kmax) = ks
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &k| (a.min(k), b.max(k)));
    let k_c = 0.5 * (kmin + kmax);
    let n = cfg.n_grid;
    // Finest spacing that keeps every strike inside the central half of the
    // grid, so interpolation error is negligible next to quadrature error.
    let standard = 2.0 * PI / (n as f64 * cfg.eta);
    let cover = 0.5 * (kmax - kmin) / ((n / 4) as f64 - 4.0);
    let lambda = cover.max(MIN_FFT_SPACING).min(standard);
    let grid = fft_grid_with_spacing(phi, transform, alpha, cfg, k_c, lambda)?;
    let mut cache: std::collections::HashMap<usize, (f64, f64)> = Default::default();
    let mut out = Vec::with_capacity(ks.len());
    for &k in &ks {
        let pos = (k - grid.log_strike(0)) / grid.lambda;
        let u0 = pos.floor() as isize;
        if u0 < (n / 4) as isize + 1 || u0 + 2 > (3 * n / 4) as isize - 1 {
            return Err(Error::Accuracy {
                what: "log-strike outside the reliable FFT range",
                estimate: k,
                tolerance: grid.lambda * (n / 4) as f64,
            });
        }
        let mut vals = [0.0; 4];
        let mut errs = [0.0; 4];
        for (i, off) in (-1..=2).enumerate() {
            let u = (u0 + off) as usize;
            let ve = match cache.get(&u) {
                Some(&ve) => ve,
                None => {
                    let ve = node_value(phi, transform, &grid, u, cfg)?;
                    cache.insert(u, ve);
                    ve
                }
            };
            vals[i] = ve.0;
            errs[i] = ve.1;
        }
        let x = pos - u0 as f64;
        let linear = vals[1] + x * (vals[2] - vals[1]);
        // Cubic Lagrange through nodes -1, 0, 1, 2.
        let cubic = -vals[0] * x * (x - 1.0) * (x - 2.0) / 6.0
            + vals[1] * (x + 1.0) * (x - 1.0) * (x - 2.0) / 2.0
            - vals[2] * (x + 1.0) * x * (x - 2.0) / 2.0
            + vals[3] * (x + 1.0) * x * (x - 1.0) / 6.0;
        let interp = (linear - cubic).abs();
        let mut fv = FourierValue::new(linear, errs[1].max(errs[2]) + interp, alpha);
        if x != 0.0 {
            fv.notes.push(Note::Interpolated { error: interp });
        }
        out.push(fv);
    }
    Ok(out)
}

/// Batch evaluation in the configured mode.
pub fn batch(phi: &CharFn, transform: Transform, chis: &[f64], cfg: &FourierConfig) -> Result<Vec<FourierValue>> {
    cfg.validate()?;
    match cfg.mode {
        Mode::FftBatch => {
            let alpha = match transform {
                Transform::LowerTail => -cfg.alpha,
                _ => cfg.alpha,
            };
            batch_with_alpha(phi, transform, chis, alpha, cfg)
        }
        Mode::DirectQuadrature => chis
            .iter()
            .map(|&chi| match transform {
                Transform::I1 => i1(phi, chi, cfg),
                Transform::I2 => i2(phi, chi, cfg),
                Transform::Call => call(phi, chi, cfg),
                Transform::UpperTail => tail_upper(phi, chi, cfg),
                Transform::LowerTail => tail_lower(phi, chi, cfg),
                Transform::Difference => difference(phi, chi, cfg),
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy_core::{to_mmm, LevyModel};

    fn bs(sigma: f64, tau: f64) -> CharFn {
        let m = LevyModel::black_scholes(-0.5 * sigma * sigma, sigma, 1.0).unwrap();
        CharFn::new(&to_mmm(&m).unwrap(), tau).unwrap()
    }

    fn norm_cdf(x: f64) -> f64 {
        0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
    }

    #[test]
    fn black_scholes_closed_forms() {
        let (sigma, tau) = (0.2, 0.5);
        let phi = bs(sigma, tau);
        let cfg = FourierConfig::default();
        let s = sigma * tau.sqrt();
        for chi in [0.7, 1.0, 1.3] {
            let k: f64 = f64::ln(chi);
            let d1 = (-k + 0.5 * s * s) / s;
            let d2 = d1 - s;
            let v = i1(&phi, chi, &cfg).unwrap().value;
            assert!((v - norm_cdf(d1)).abs() < 1e-11, "chi {chi}: {v}");
            let c = call(&phi, chi, &cfg).unwrap().value;
            assert!((c - (norm_cdf(d1) - chi * norm_cdf(d2))).abs() < 1e-11);
            let up = tail_upper(&phi, chi, &cfg).unwrap().value;
            assert!((up - norm_cdf(d2)).abs() < 1e-11);
            let lo = tail_lower(&phi, chi, &cfg).unwrap().value;
            assert!((lo - norm_cdf(-d2)).abs() < 1e-11);
            assert_eq!(i2(&phi, chi, &cfg).unwrap().value, 0.0);
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = FourierConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.n_grid = 1000;
        assert!(cfg.validate().is_err());
        let cfg = FourierConfig::default().with_alpha(2.5);
        assert!(cfg.validate().is_err());
        let cfg = FourierConfig::default().with_alpha(1.0);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn invalid_moneyness() {
        let phi = bs(0.2, 0.1);
        let cfg = FourierConfig::default();
        assert!(i1(&phi, 0.0, &cfg).is_err());
        assert!(i1(&phi, f64::NAN, &cfg).is_err());
    }

    #[test]
    fn phi_normalization() {
        let phi = bs(0.3, 0.25);
        assert!((phi.phi(Complex64::new(0.0, 0.0)).unwrap() - 1.0).norm() < 1e-15);
        assert!((phi.phi(-I).unwrap() - 1.0).norm() < 1e-15);
        let shifted = phi.clone().with_drift_shift(0.1);
        assert!((shifted.phi(-I).unwrap() - 1.0).norm() > 1e-3);
    }

    #[test]
    fn condition_integral_black_scholes() {
        let phi = bs(0.2, 0.05);
        let c = theorem4_condition_integral(&phi).unwrap();
        assert!(c.value.is_finite() && c.value > 0.0);
        assert_eq!(c.tail, 0.0);
    }

    #[test]
    fn fractional_dft_matches_naive_sum() {
        let n = 64;
        let x: Vec<Complex64> = (0..n)
            .map(|j| Complex64::new((j as f64 * 0.37).sin(), (j as f64 * 0.11).cos()))
            .collect();
        for gamma in [1.0 / n as f64, 3.3e-4, 0.021] {
            let fast = fractional_dft(x.clone(), gamma);
            for (u, y) in fast.iter().enumerate() {
                let naive: Complex64 = x
                    .iter()
                    .enumerate()
                    .map(|(j, xj)| xj * Complex64::from_polar(1.0, -2.0 * PI * gamma * (j * u) as f64))
                    .sum();
                assert!((y - naive).norm() < 1e-11, "gamma {gamma} u {u}");
            }
        }
    }

    mod props {
        use super::*;
        use crate::models::{MertonParams, VgParams};
        use proptest::prelude::*;

        fn reference(vg: bool) -> CharFn {
            let model = if vg {
                VgParams::REFERENCE.model(1.0).unwrap()
            } else {
                MertonParams::REFERENCE.model(1.0).unwrap()
            };
            CharFn::new(&to_mmm(&model).unwrap(), 0.05).unwrap()
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn conjugate_symmetry(v in -500.0f64..500.0, vg in any::<bool>()) {
                let phi = reference(vg);
                let a = phi.phi(Complex64::new(v, 0.0)).unwrap();
                let b = phi.phi(Complex64::new(-v, 0.0)).unwrap();
                prop_assert!((a - b.conj()).norm() <= 1e-14 * a.norm().max(1e-300) + 1e-300);
                prop_assert!(a.norm() <= 1.0 + 1e-14);
            }

            #[test]
            fn delta_pieces_are_monotone_and_tails_complementary(
                c1 in 0.85f64..1.2, c2 in 0.85f64..1.2, vg in any::<bool>()
            ) {
                let phi = reference(vg);
                let cfg = FourierConfig::default();
                let (lo, hi) = (c1.min(c2), c1.max(c2));
                let a = i1(&phi, lo, &cfg).unwrap();
                let b = i1(&phi, hi, &cfg).unwrap();
                prop_assert!(b.value <= a.value + a.abs_err + b.abs_err + 1e-12);
                prop_assert!((0.0..=1.0).contains(&a.value));
                let up = tail_upper(&phi, lo, &cfg).unwrap().value;
                let down = tail_lower(&phi, lo, &cfg).unwrap().value;
                prop_assert!((up + down - 1.0).abs() < 1e-9);
            }
        }
    }
}
