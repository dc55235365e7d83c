//! Monte Carlo oracle under the minimal martingale measure.
//!
//! The tilted Lévy measure `(1 - θ_x) ν = (1 + a) ν + (-a) e^x ν` is a sum of
//! two positive measures because the tilt `a` lies in `(-1, 0]`. Both pieces
//! are sampled exactly:
//!
//! - Merton: two independent compound Poisson streams, with jump laws
//!   `N(m, δ²)` and `N(m + δ², δ²)`.
//! - Variance gamma: each one-sided piece `c e^{-βx}/x` is a gamma process, so
//!   the jump part is a signed sum of four gamma variates.
//!
//! The diffusion and the uncompensated drift are added on top. No weighting
//! is involved.
//!
//! Paths are produced in fixed blocks of [`BLOCK`]. Each block draws from its
//! own ChaCha8 stream, so the sample does not depend on how rayon schedules
//! the blocks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levy_core::{nu_integral, LevyMeasure, MeasureKind, MmmModel};
use crate::quad::{self, Estimate, Tolerance};

/// Smallest sample size for which estimates are reported.
pub const MIN_PATHS: usize = 10_000;

/// Paths per random stream.
pub const BLOCK: usize = 8192;

/// Recorded in result metadata.
pub const GENERATOR: &str = "ChaCha8Rng (rand_chacha 0.9), seed_from_u64(seed), stream = block index";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_paths: usize,
    pub seed: u64,
    /// `T - t`.
    pub horizon: f64,
}

impl McConfig {
    pub fn new(n_paths: usize, seed: u64, horizon: f64) -> Self {
        Self {
            n_paths,
            seed,
            horizon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths < MIN_PATHS {
            return Err(Error::invalid(
                "n_paths",
                format!("need at least {MIN_PATHS} paths, got {}", self.n_paths),
            ));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::invalid("horizon", "must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingMethod {
    /// No jumps: `b* τ + σ √τ Z`.
    Gaussian,
    /// Exact tilted sampling as two compound Poisson streams.
    MertonMixture,
    /// Exact tilted sampling as a difference of gamma variates.
    GammaDifference,
}

impl SamplingMethod {
    pub fn describe(self) -> &'static str {
        match self {
            SamplingMethod::Gaussian => "gaussian",
            SamplingMethod::MertonMixture => "exact tilted compound Poisson (two Gaussian jump streams)",
            SamplingMethod::GammaDifference => "exact tilted variance gamma (four gamma variates)",
        }
    }
}

/// A sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_err: f64,
}

impl McEstimate {
    /// Number of standard errors between `value` and the estimate.
    pub fn z_score(&self, value: f64) -> f64 {
        let d = (value - self.estimate).abs();
        if self.std_err > 0.0 {
            d / self.std_err
        } else if d == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }

    /// `|value - estimate| <= k SE`, with `tol` absorbing deterministic error
    /// on the other side.
    pub fn brackets(&self, value: f64, k: f64, tol: f64) -> bool {
        (value - self.estimate).abs() <= k * self.std_err + tol
    }
}

/// `I2` estimate, with the deterministic x-quadrature error kept apart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McI2 {
    pub estimate: f64,
    pub std_err: f64,
    pub quad_err: f64,
}

impl McI2 {
    pub fn as_estimate(&self) -> McEstimate {
        McEstimate {
            estimate: self.estimate,
            std_err: self.std_err,
        }
    }
}

/// Draws of `L_{T-t}` under the MMM.
#[derive(Debug, Clone)]
pub struct Sample {
    pub log_returns: Vec<f64>,
    pub method: SamplingMethod,
    pub generator: &'static str,
    pub seed: u64,
    pub horizon: f64,
}

enum Sampler {
    Gaussian {
        drift: f64,
        vol: f64,
    },
    Merton {
        drift: f64,
        vol: f64,
        plain: Option<Poisson<f64>>,
        tilted: Option<Poisson<f64>>,
        m: f64,
        m_tilted: f64,
        delta: f64,
    },
    Vg {
        drift: f64,
        vol: f64,
        up: Option<Gamma<f64>>,
        down: Option<Gamma<f64>>,
        up_tilted: Option<Gamma<f64>>,
        down_tilted: Option<Gamma<f64>>,
    },
}

fn poisson(rate: f64) -> Result<Option<Poisson<f64>>> {
    if rate <= 0.0 {
        return Ok(None);
    }
    Poisson::new(rate)
        .map(Some)
        .map_err(|e| Error::Sampling(format!("Poisson({rate}): {e}")))
}

/// Gamma law with the given shape and rate.
fn gamma(shape: f64, rate: f64) -> Result<Option<Gamma<f64>>> {
    if shape <= 0.0 {
        return Ok(None);
    }
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::Sampling(format!(
            "tilted measure not normalizable: gamma rate {rate}"
        )));
    }
    Gamma::new(shape, 1.0 / rate)
        .map(Some)
        .map_err(|e| Error::Sampling(format!("Gamma({shape}, {rate}): {e}")))
}

fn sum_normals<R: Rng>(rng: &mut R, n: f64, mean: f64, sd: f64) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    let z: f64 = rng.sample(StandardNormal);
    n * mean + sd * n.sqrt() * z
}

fn draw_gamma<R: Rng>(rng: &mut R, g: &Option<Gamma<f64>>) -> f64 {
    g.as_ref().map_or(0.0, |g| g.sample(rng))
}

impl Sampler {
    fn new(model: &MmmModel, tau: f64) -> Result<Self> {
        let a = model.tilt();
        let drift = model.finite_variation_drift() * tau;
        let vol = model.sigma() * tau.sqrt();
        match model.measure().kind() {
            MeasureKind::Zero => Ok(Sampler::Gaussian {
                drift: model.drift_star() * tau,
                vol,
            }),
            MeasureKind::Merton { gamma, m, delta } => {
                let d2 = delta * delta;
                Ok(Sampler::Merton {
                    drift,
                    vol,
                    plain: poisson((1.0 + a) * gamma * tau)?,
                    tilted: poisson(-a * gamma * (m + 0.5 * d2).exp() * tau)?,
                    m,
                    m_tilted: m + d2,
                    delta,
                })
            }
            MeasureKind::VarianceGamma { c, g, m } => {
                let plain = (1.0 + a) * c * tau;
                let tilted = -a * c * tau;
                Ok(Sampler::Vg {
                    drift,
                    vol,
                    up: gamma(plain, m)?,
                    down: gamma(plain, g)?,
                    up_tilted: gamma(tilted, m - 1.0)?,
                    down_tilted: gamma(tilted, g + 1.0)?,
                })
            }
            MeasureKind::Other => Err(Error::Sampling(
                "no exact sampler for a measure given only by its density".into(),
            )),
        }
    }

    fn method(&self) -> SamplingMethod {
        match self {
            Sampler::Gaussian { .. } => SamplingMethod::Gaussian,
            Sampler::Merton { .. } => SamplingMethod::MertonMixture,
            Sampler::Vg { .. } => SamplingMethod::GammaDifference,
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        match self {
            Sampler::Gaussian { drift, vol } => drift + vol * z,
            Sampler::Merton {
                drift,
                vol,
                plain,
                tilted,
                m,
                m_tilted,
                delta,
            } => {
                let n1 = plain.as_ref().map_or(0.0, |p| p.sample(rng));
                let n2 = tilted.as_ref().map_or(0.0, |p| p.sample(rng));
                drift + vol * z + sum_normals(rng, n1, *m, *delta) + sum_normals(rng, n2, *m_tilted, *delta)
            }
            Sampler::Vg {
                drift,
                vol,
                up,
                down,
                up_tilted,
                down_tilted,
            } => {
                let jumps = draw_gamma(rng, up) - draw_gamma(rng, down) + draw_gamma(rng, up_tilted)
                    - draw_gamma(rng, down_tilted);
                drift + vol * z + jumps
            }
        }
    }
}

/// Simulate `n_paths` independent copies of `L_{T-t}` under the MMM.
pub fn simulate_log_returns(model: &MmmModel, cfg: &McConfig) -> Result<Sample> {
    cfg.validate()?;
    let sampler = Sampler::new(model, cfg.horizon)?;
    let n_blocks = cfg.n_paths.div_ceil(BLOCK);
    let blocks: Vec<Vec<f64>> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(b as u64);
            let len = BLOCK.min(cfg.n_paths - b * BLOCK);
            (0..len).map(|_| sampler.draw(&mut rng)).collect()
        })
        .collect();
    Ok(Sample {
        log_returns: blocks.concat(),
        method: sampler.method(),
        generator: GENERATOR,
        seed: cfg.seed,
        horizon: cfg.horizon,
    })
}

fn mean_and_se(values: impl Iterator<Item = f64>) -> McEstimate {
    // Welford, in sample order, so results are bit-reproducible.
    let mut n = 0.0;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for x in values {
        n += 1.0;
        let d = x - mean;
        mean += d / n;
        m2 += d * (x - mean);
    }
    let var = if n > 1.0 { m2 / (n - 1.0) } else { 0.0 };
    McEstimate {
        estimate: mean,
        std_err: (var / n).sqrt(),
    }
}

fn log_moneyness(chi: f64) -> Result<f64> {
    if chi.is_finite() && chi >= 0.0 {
        Ok(chi.ln())
    } else {
        Err(Error::invalid("chi", format!("moneyness must be >= 0, got {chi}")))
    }
}

impl Sample {
    pub fn len(&self) -> usize {
        self.log_returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_returns.is_empty()
    }

    /// `mean(e^L)`, which should be 1.
    pub fn martingale(&self) -> McEstimate {
        mean_and_se(self.log_returns.iter().map(|l| l.exp()))
    }

    /// `E*[1{e^L > χ} e^L]`.
    pub fn i1(&self, chi: f64) -> Result<McEstimate> {
        let k = log_moneyness(chi)?;
        Ok(mean_and_se(
            self.log_returns.iter().map(|&l| if l > k { l.exp() } else { 0.0 }),
        ))
    }

    /// `P*(L > log χ)`.
    pub fn tail_upper(&self, chi: f64) -> Result<McEstimate> {
        let k = log_moneyness(chi)?;
        Ok(mean_and_se(self.log_returns.iter().map(|&l| f64::from(u8::from(l > k)))))
    }

    /// `P*(L <= log χ)`.
    pub fn tail_lower(&self, chi: f64) -> Result<McEstimate> {
        let k = log_moneyness(chi)?;
        Ok(mean_and_se(self.log_returns.iter().map(|&l| f64::from(u8::from(l <= k)))))
    }

    /// `E*[(e^L - χ)^+]`.
    pub fn call(&self, chi: f64) -> Result<McEstimate> {
        log_moneyness(chi)?;
        Ok(mean_and_se(self.log_returns.iter().map(|&l| (l.exp() - chi).max(0.0))))
    }

    /// `I2(1, χ)` with the x-integral done by deterministic quadrature on the
    /// same paths.
    ///
    /// With `y = log χ - L` the inner integral factors as `e^L T(y)`, where
    /// `T(y) = ∫ [(e^x - e^y)^+ - (1 - e^y)^+](e^x - 1) ν(dx)`. `T` is
    /// tabulated on a grid covering the sample and interpolated by cubic
    /// Hermite with exact one-sided slopes at the kink `y = 0`.
    pub fn i2(&self, model: &MmmModel, chi: f64) -> Result<McI2> {
        let k = log_moneyness(chi)?;
        if self.is_empty() {
            return Err(Error::Sampling("empty sample".into()));
        }
        let measure = model.measure();
        if measure.kind() == MeasureKind::Zero {
            return Ok(McI2 {
                estimate: 0.0,
                std_err: 0.0,
                quad_err: 0.0,
            });
        }
        let (lo, hi) = self
            .log_returns
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &l| (a.min(k - l), b.max(k - l)));
        let table = KernelTable::build(measure, lo, hi)?;
        let est = mean_and_se(self.log_returns.iter().map(|&l| l.exp() * table.eval(k - l)));
        Ok(McI2 {
            estimate: est.estimate,
            std_err: est.std_err,
            quad_err: table.quad_err + table.interp_err,
        })
    }
}

/// Convenience: simulate and estimate `I1`.
pub fn mc_i1(model: &MmmModel, chi: f64, cfg: &McConfig) -> Result<McEstimate> {
    simulate_log_returns(model, cfg)?.i1(chi)
}

/// Convenience: simulate and estimate `I2`.
pub fn mc_i2(model: &MmmModel, chi: f64, cfg: &McConfig) -> Result<McI2> {
    simulate_log_returns(model, cfg)?.i2(model, chi)
}

/// Five moneyness values `exp(j sd)`, `j = -2..=2`, where `sd` is the
/// standard deviation of `L_{T-t}` under the MMM. Fixed strikes far in the
/// tails see too few exercises at 10^6 paths for a meaningful band.
pub fn standard_chis(model: &MmmModel, horizon: f64) -> Result<[f64; 5]> {
    let a = model.tilt();
    let jumps = nu_integral(model.measure(), |x| x * x * (1.0 - a * x.exp_m1()), Tolerance::default())?;
    let sd = (horizon * (model.sigma() * model.sigma() + jumps.value)).sqrt();
    if !(sd.is_finite() && sd > 0.0) {
        return Err(Error::Sampling(format!("degenerate return distribution, sd = {sd}")));
    }
    Ok([-2.0, -1.0, 0.0, 1.0, 2.0].map(|j| (j * sd).exp()))
}

const KERNEL_TOL: Tolerance = Tolerance::new(1e-15, 1e-12);
const MAX_STEP: f64 = 2e-3;
const MAX_NODES: usize = 4000;

/// `∫_a^b f ν` split at `-1, 0, 1` and clipped to the support.
fn nu_between<F: Fn(f64) -> f64>(measure: &dyn LevyMeasure, a: f64, b: f64, f: F) -> Result<Estimate> {
    let (slo, shi) = measure.support();
    let (a, b) = (a.max(slo), b.min(shi));
    let mut total = Estimate::new(0.0, 0.0);
    if a >= b {
        return Ok(total);
    }
    let g = |x: f64| {
        let d = measure.density(x);
        if d == 0.0 {
            0.0
        } else {
            f(x) * d
        }
    };
    let mut cuts = vec![a];
    cuts.extend([-1.0, 0.0, 1.0].into_iter().filter(|&c| c > a && c < b));
    cuts.push(b);
    for w in cuts.windows(2) {
        total = total + quad::integrate_range(g, w[0], w[1], KERNEL_TOL)?;
    }
    Ok(total)
}

/// `(T(y), T'(y))`, one-sided from the left at `y = 0` when `left` is set.
fn kernel(measure: &dyn LevyMeasure, y: f64, left: bool) -> Result<(f64, f64, f64)> {
    let ey = y.exp();
    if y < 0.0 || (y == 0.0 && left) {
        let upper = nu_between(measure, y, f64::INFINITY, |x| x.exp_m1().powi(2))?;
        let lower = nu_between(measure, f64::NEG_INFINITY, y, |x| x.exp_m1())?;
        let t = upper.value - (-y.exp_m1()) * lower.value;
        Ok((t, ey * lower.value, upper.abs_err + lower.abs_err))
    } else {
        let value = nu_between(measure, y, f64::INFINITY, |x| (x.exp() - ey) * x.exp_m1())?;
        let slope = nu_between(measure, y, f64::INFINITY, |x| x.exp_m1())?;
        Ok((value.value, -ey * slope.value, value.abs_err + ey * slope.abs_err))
    }
}

/// Uniform-grid cubic Hermite table on one side of the kink.
struct Piece {
    start: f64,
    step: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl Piece {
    fn build(measure: &dyn LevyMeasure, a: f64, b: f64, left: bool) -> Result<(Self, f64)> {
        let n = (((b - a) / MAX_STEP).ceil() as usize).clamp(1, MAX_NODES);
        let step = (b - a) / n as f64;
        let nodes: Vec<(f64, f64, f64)> = (0..=n)
            .into_par_iter()
            .map(|j| {
                let y = if j == n { b } else { a + j as f64 * step };
                kernel(measure, y, left)
            })
            .collect::<Result<_>>()?;
        let quad_err = nodes.iter().fold(0.0f64, |m, n| m.max(n.2));
        Ok((
            Piece {
                start: a,
                step,
                values: nodes.iter().map(|n| n.0).collect(),
                slopes: nodes.iter().map(|n| n.1).collect(),
            },
            quad_err,
        ))
    }

    fn eval(&self, y: f64) -> f64 {
        if self.step == 0.0 {
            return self.values[0];
        }
        let last = self.values.len() - 2;
        let s = (y - self.start) / self.step;
        let j = (s.floor().max(0.0) as usize).min(last);
        let t = (s - j as f64).clamp(0.0, 1.0);
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.values[j]
            + h10 * self.step * self.slopes[j]
            + h01 * self.values[j + 1]
            + h11 * self.step * self.slopes[j + 1]
    }
}

struct KernelTable {
    left: Option<Piece>,
    right: Option<Piece>,
    quad_err: f64,
    interp_err: f64,
}

impl KernelTable {
    fn build(measure: &dyn LevyMeasure, lo: f64, hi: f64) -> Result<Self> {
        let mut quad_err = 0.0f64;
        let mut left = None;
        let mut right = None;
        if lo < 0.0 {
            let (p, e) = Piece::build(measure, lo, hi.min(0.0), true)?;
            quad_err = quad_err.max(e);
            left = Some(p);
        }
        if hi >= 0.0 {
            let (p, e) = Piece::build(measure, lo.max(0.0), hi, false)?;
            quad_err = quad_err.max(e);
            right = Some(p);
        }
        let mut table = KernelTable {
            left,
            right,
            quad_err,
            interp_err: 0.0,
        };
        table.interp_err = table.check_midpoints(measure)?;
        Ok(table)
    }

    /// Largest interpolation error at a spread of cell midpoints.
    fn check_midpoints(&self, measure: &dyn LevyMeasure) -> Result<f64> {
        let mut probes = Vec::new();
        for (piece, left) in [(&self.left, true), (&self.right, false)] {
            let Some(p) = piece else { continue };
            let cells = p.values.len() - 1;
            let stride = (cells / 16).max(1);
            // Always include the cells next to the kink and the ends.
            let mut js: Vec<usize> = (0..cells).step_by(stride).collect();
            js.push(cells - 1);
            probes.extend(js.into_iter().map(|j| (p.start + (j as f64 + 0.5) * p.step, left)));
        }
        let errs: Vec<f64> = probes
            .into_par_iter()
            .map(|(y, left)| Ok((kernel(measure, y, left)?.0 - self.eval(y)).abs()))
            .collect::<Result<_>>()?;
        Ok(errs.into_iter().fold(0.0, f64::max))
    }

    fn eval(&self, y: f64) -> f64 {
        match (&self.left, &self.right) {
            (Some(l), _) if y < 0.0 => l.eval(y),
            (_, Some(r)) => r.eval(y),
            (Some(l), None) => l.eval(y),
            (None, None) => 0.0,
        }
    }
}
