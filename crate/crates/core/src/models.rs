//! Merton jump-diffusion and variance-gamma (VG) models.

use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use libm::erfc;

use crate::error::{Error, Result};
use crate::levy_core::{mmm_cumulant, to_mmm, ComplexM1, LevyMeasure, LevyModel, MeasureKind, MmmModel};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// `∫_0^∞ e^{jx} N(m, delta^2)(dx)`.
fn gauss_upper_exp(j: f64, m: f64, delta: f64) -> f64 {
    (j * m + 0.5 * j * j * delta * delta).exp() * norm_cdf((m + j * delta * delta) / delta)
}

/// `∫_{-∞}^0 e^{jx} N(m, delta^2)(dx)`.
fn gauss_lower_exp(j: f64, m: f64, delta: f64) -> f64 {
    (j * m + 0.5 * j * j * delta * delta).exp() * norm_cdf(-(m + j * delta * delta) / delta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MertonParams {
    pub mu: f64,
    pub sigma: f64,
    /// Jump intensity per unit time.
    pub gamma: f64,
    /// Mean log jump size.
    pub m: f64,
    /// Standard deviation of the log jump size.
    pub delta: f64,
}

impl MertonParams {
    /// Jump and diffusion parameters of the S&P 500 fit with `T - t = 0.05`.
    /// The drift is not the published one (which violates `mu_s <= 0`); this
    /// value puts `mu_s` near the middle of the admissible interval.
    pub const REFERENCE: MertonParams = MertonParams {
        mu: -0.002,
        sigma: 0.0435,
        gamma: 0.0054,
        m: -0.0697,
        delta: 0.0889,
    };

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::invalid("sigma", "Merton requires sigma > 0"));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::invalid("gamma", "jump intensity must be > 0"));
        }
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(Error::invalid("delta", "jump-size deviation must be > 0"));
        }
        if !(self.m.is_finite() && self.mu.is_finite()) {
            return Err(Error::invalid("m", "parameters must be finite"));
        }
        Ok(())
    }

    pub fn jumps(&self) -> MertonJumps {
        MertonJumps {
            gamma: self.gamma,
            m: self.m,
            delta: self.delta,
        }
    }

    pub fn model(&self, s0: f64) -> Result<LevyModel> {
        self.validate()?;
        LevyModel::new(self.mu, self.sigma, Arc::new(self.jumps()), s0)
    }

    /// Same jumps and volatility, with the drift chosen so that the MMM tilt
    /// `a = mu_s/(sigma^2 + C2)` equals `tilt`.
    pub fn with_tilt(&self, tilt: f64) -> Result<Self> {
        let (plus, minus) = self
            .jumps()
            .closed_c2_split()
            .ok_or_else(|| Error::invalid("delta", "no closed C2"))?;
        let denom = self.sigma * self.sigma + plus + minus;
        Ok(Self {
            mu: self.mu_for_mu_s(tilt * denom),
            ..*self
        })
    }

    /// Drift that places `mu_s` at `mu_s_target`.
    pub fn mu_for_mu_s(&self, mu_s_target: f64) -> f64 {
        let j = self.jumps();
        mu_s_target - 0.5 * self.sigma * self.sigma - j.closed_cumulant(-I).unwrap_or_default().re
    }
}

/// Gaussian jump measure `gamma N(m, delta^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MertonJumps {
    pub gamma: f64,
    pub m: f64,
    pub delta: f64,
}

impl LevyMeasure for MertonJumps {
    fn density(&self, x: f64) -> f64 {
        let u = (x - self.m) / self.delta;
        self.gamma / ((2.0 * PI).sqrt() * self.delta) * (-0.5 * u * u).exp()
    }
    fn exp_moment_range(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }
    fn support(&self) -> (f64, f64) {
        (self.m - 40.0 * self.delta, self.m + 40.0 * self.delta)
    }
    fn singular_at_zero(&self) -> bool {
        false
    }
    fn kind(&self) -> MeasureKind {
        MeasureKind::Merton {
            gamma: self.gamma,
            m: self.m,
            delta: self.delta,
        }
    }
    fn closed_cumulant(&self, z: Complex64) -> Option<Complex64> {
        let izm = I * z * self.m;
        Some(self.gamma * ((izm - 0.5 * self.delta * self.delta * z * z).exp() - 1.0 - izm))
    }
    fn closed_fv_cumulant(&self, z: Complex64) -> Option<Complex64> {
        let izm = I * z * self.m;
        Some(self.gamma * (izm - 0.5 * self.delta * self.delta * z * z).exp_m1_c())
    }
    fn continues_off_axis(&self) -> bool {
        true
    }
    fn closed_first_moment(&self) -> Option<f64> {
        Some(self.gamma * self.m)
    }
    fn closed_x_em1_moment(&self) -> Option<f64> {
        let d2 = self.delta * self.delta;
        Some(self.gamma * ((self.m + d2) * (self.m + 0.5 * d2).exp() - self.m))
    }
    fn closed_c2_split(&self) -> Option<(f64, f64)> {
        let (g, m, d) = (self.gamma, self.m, self.delta);
        let plus = g * (gauss_upper_exp(2.0, m, d) - 2.0 * gauss_upper_exp(1.0, m, d)
            + gauss_upper_exp(0.0, m, d));
        Some((plus, merton_c2_minus(self)))
    }
    fn closed_upper_e2x_moment(&self) -> Option<f64> {
        let (g, m, d) = (self.gamma, self.m, self.delta);
        Some(
            g * (gauss_upper_exp(4.0, m, d) - 2.0 * gauss_upper_exp(3.0, m, d)
                + gauss_upper_exp(2.0, m, d)),
        )
    }
}

/// `C2- = gamma [e^{2(delta^2+m)} Phi(-(2 delta^2+m)/delta)
///        - 2 e^{(delta^2+2m)/2} Phi(-(delta^2+m)/delta) + Phi(-m/delta)]`.
pub fn merton_c2_minus(p: &MertonJumps) -> f64 {
    let (g, m, d) = (p.gamma, p.m, p.delta);
    let d2 = d * d;
    g * ((2.0 * (d2 + m)).exp() * norm_cdf(-(2.0 * d2 + m) / d)
        - 2.0 * (0.5 * (d2 + 2.0 * m)).exp() * norm_cdf(-(d2 + m) / d)
        + norm_cdf(-m / d))
}

/// Same value through the generic half-line Gaussian moments; kept separate
/// from the displayed formula so the two can be checked against each other.
pub fn merton_c2_minus_by_moments(p: &MertonJumps) -> f64 {
    let (g, m, d) = (p.gamma, p.m, p.delta);
    g * (gauss_lower_exp(2.0, m, d) - 2.0 * gauss_lower_exp(1.0, m, d) + gauss_lower_exp(0.0, m, d))
}

pub fn merton_nu_density(p: &MertonParams, x: f64) -> f64 {
    p.jumps().density(x)
}

/// MMM cumulant `Psi*(z)` of a Merton model.
pub fn merton_cumulant_mmm(p: &MertonParams, z: Complex64) -> Result<Complex64> {
    let mmm = to_mmm(&p.model(1.0)?)?;
    mmm_cumulant(&mmm, z)
}

/// VG parameters in `(C, G, M)` form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VgParams {
    pub c: f64,
    pub g: f64,
    pub m: f64,
}

impl VgParams {
    pub const REFERENCE: VgParams = VgParams {
        c: 6.7910,
        g: 30.1807,
        m: 33.1507,
    };

    pub fn new(c: f64, g: f64, m: f64) -> Result<Self> {
        let p = Self { c, g, m };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(Error::invalid("C", "must be > 0"));
        }
        if !(self.g.is_finite() && self.g > 0.0) {
            return Err(Error::invalid("G", "must be > 0"));
        }
        if !(self.m.is_finite() && self.m > 4.0) {
            return Err(Error::invalid("M", format!("must be > 4, got {}", self.m)));
        }
        Ok(())
    }

    /// `(kappa, m, delta)` of the subordinated Brownian motion `m G_t + delta B_{G_t}`.
    pub fn to_kappa(&self) -> (f64, f64, f64) {
        let kappa = 1.0 / self.c;
        // G M = 2/(delta^2 kappa), G - M = 2m/delta^2.
        let delta2 = 2.0 / (self.g * self.m * kappa);
        let drift = 0.5 * (self.g - self.m) * delta2;
        (kappa, drift, delta2.sqrt())
    }

    pub fn jumps(&self) -> VgJumps {
        VgJumps {
            c: self.c,
            g: self.g,
            m: self.m,
        }
    }

    /// Drift of `L_t = m G_t + delta B_{G_t}` in the compensated-jump
    /// convention: `E[L_1] = C (1/M - 1/G)`.
    pub fn mean_rate(&self) -> f64 {
        self.c * (1.0 / self.m - 1.0 / self.g)
    }

    /// Pure-jump VG model.
    pub fn model(&self, s0: f64) -> Result<LevyModel> {
        self.model_with_sigma(0.0, s0)
    }

    /// VG jumps plus an independent Brownian part with volatility `sigma`.
    pub fn model_with_sigma(&self, sigma: f64, s0: f64) -> Result<LevyModel> {
        self.validate()?;
        LevyModel::new(self.mean_rate(), sigma, Arc::new(self.jumps()), s0)
    }
}

/// Model family selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Merton,
    Vg,
    /// No jumps.
    BlackScholes,
}

impl std::str::FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "merton" => Ok(Family::Merton),
            "vg" | "variance-gamma" => Ok(Family::Vg),
            "black-scholes" | "bs" => Ok(Family::BlackScholes),
            other => Err(Error::Parse(format!("unknown model family `{other}`"))),
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::Merton => "merton",
            Family::Vg => "vg",
            Family::BlackScholes => "black-scholes",
        })
    }
}

/// Parameters of either shipped family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum ModelParams {
    Merton(MertonParams),
    Vg(VgParams),
    BlackScholes { mu: f64, sigma: f64 },
}

impl ModelParams {
    pub fn family(&self) -> Family {
        match self {
            ModelParams::Merton(_) => Family::Merton,
            ModelParams::Vg(_) => Family::Vg,
            ModelParams::BlackScholes { .. } => Family::BlackScholes,
        }
    }

    pub fn model(&self, s0: f64) -> Result<LevyModel> {
        match self {
            ModelParams::Merton(p) => p.model(s0),
            ModelParams::Vg(p) => p.model(s0),
            ModelParams::BlackScholes { mu, sigma } => LevyModel::black_scholes(*mu, *sigma, s0),
        }
    }

    pub fn mmm(&self) -> Result<MmmModel> {
        to_mmm(&self.model(1.0)?)
    }

    /// `(name, value)` pairs in a fixed order, for records and CSV headers.
    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        match self {
            ModelParams::Merton(p) => vec![
                ("mu", p.mu),
                ("sigma", p.sigma),
                ("gamma", p.gamma),
                ("m", p.m),
                ("delta", p.delta),
            ],
            ModelParams::Vg(p) => vec![("c", p.c), ("g", p.g), ("m", p.m)],
            ModelParams::BlackScholes { mu, sigma } => vec![("mu", *mu), ("sigma", *sigma)],
        }
    }
}

/// `C = 1/kappa, G = (sqrt(m^2 + 2 delta^2/kappa) + m)/delta^2,
/// M = (sqrt(m^2 + 2 delta^2/kappa) - m)/delta^2`.
pub fn vg_from_kappa(kappa: f64, m: f64, delta: f64) -> Result<VgParams> {
    if !(kappa.is_finite() && kappa > 0.0) {
        return Err(Error::invalid("kappa", "must be > 0"));
    }
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::invalid("delta", "must be > 0"));
    }
    if !m.is_finite() {
        return Err(Error::invalid("m", "must be finite"));
    }
    let d2 = delta * delta;
    let root = (m * m + 2.0 * d2 / kappa).sqrt();
    VgParams::new(1.0 / kappa, (root + m) / d2, (root - m) / d2)
}

/// Lévy measure `C (1_{x<0} e^{-G|x|} + 1_{x>0} e^{-Mx}) / |x|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VgJumps {
    pub c: f64,
    pub g: f64,
    pub m: f64,
}

impl LevyMeasure for VgJumps {
    fn density(&self, x: f64) -> f64 {
        if x > 0.0 {
            self.c * (-self.m * x).exp() / x
        } else if x < 0.0 {
            self.c * (self.g * x).exp() / -x
        } else {
            f64::INFINITY
        }
    }
    fn exp_moment_range(&self) -> (f64, f64) {
        (-self.g, self.m)
    }
    fn singular_at_zero(&self) -> bool {
        true
    }
    fn kind(&self) -> MeasureKind {
        MeasureKind::VarianceGamma {
            c: self.c,
            g: self.g,
            m: self.m,
        }
    }
    fn closed_cumulant(&self, z: Complex64) -> Option<Complex64> {
        // ∫(e^{izx}-1) nu = C log(GM / ((G+iz)(M-iz))), one principal log per
        // factor so the only cuts are Re z = 0, Im z >= G and Im z <= -M.
        let g = Complex64::new(self.g, 0.0);
        let m = Complex64::new(self.m, 0.0);
        let lin = I * z;
        let logs = g.ln() + m.ln() - (g + lin).ln() - (m - lin).ln();
        Some(self.c * logs - lin * self.c * (1.0 / self.m - 1.0 / self.g))
    }
    fn closed_fv_cumulant(&self, z: Complex64) -> Option<Complex64> {
        let lin = I * z;
        // ln(1 + iz/G) and ln(1 - iz/M) keep precision for small |z|.
        let lg = (lin / self.g).ln_1p_c();
        let lm = (-lin / self.m).ln_1p_c();
        Some(-self.c * (lg + lm))
    }
    fn continues_off_axis(&self) -> bool {
        true
    }
    fn closed_first_moment(&self) -> Option<f64> {
        Some(self.c * (1.0 / self.m - 1.0 / self.g))
    }
    fn closed_x_em1_moment(&self) -> Option<f64> {
        let (c, g, m) = (self.c, self.g, self.m);
        Some(c * (1.0 / (m - 1.0) - 1.0 / (g + 1.0)) - c * (1.0 / m - 1.0 / g))
    }
    fn closed_c2_split(&self) -> Option<(f64, f64)> {
        let (c, g, m) = (self.c, self.g, self.m);
        let plus = c * ((m - 1.0).powi(2) / (m * (m - 2.0))).ln();
        let minus = c * ((g + 1.0).powi(2) / (g * (g + 2.0))).ln();
        Some((plus, minus))
    }
    fn closed_upper_e2x_moment(&self) -> Option<f64> {
        let (c, m) = (self.c, self.m);
        (m > 4.0).then(|| c * ((m - 3.0).powi(2) / ((m - 4.0) * (m - 2.0))).ln())
    }
}

pub fn vg_nu_density(p: &VgParams, x: f64) -> Result<f64> {
    if x == 0.0 {
        return Err(Error::Domain {
            z: Complex64::new(x, 0.0),
            lo: 0.0,
            hi: 0.0,
        });
    }
    Ok(p.jumps().density(x))
}

/// MMM cumulant of a VG model; `sigma` is the optional Brownian part
/// (0 for the pure-jump model).
pub fn vg_cumulant_mmm(p: &VgParams, sigma: f64, z: Complex64) -> Result<Complex64> {
    let mmm = to_mmm(&p.model_with_sigma(sigma, 1.0)?)?;
    mmm_cumulant(&mmm, z)
}
