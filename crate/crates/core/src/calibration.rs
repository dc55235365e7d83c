//! RMSE calibration of Merton and VG parameters to call quotes.
//!
//! Model prices are expectations under the minimal martingale measure at
//! zero rates. The objective is minimized with Nelder–Mead (restarted from
//! the incumbent) in an unconstrained inner space:
//!
//! - Merton: `(ln σ, ln γ, m, ln δ)`, with the tilt `a = μ^S/(σ² + C₂)` held at
//!   its initial value. Prices depend on the drift only through `a`, and
//!   fixing it keeps the tilt condition satisfied everywhere.
//! - VG: `(ln κ, m, ln δ)` of the subordinated Brownian motion. `M > 4` and
//!   the MMM constraint are enforced by a quadratic penalty.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use argmin::core::{CostFunction, Executor, State, TerminationReason, TerminationStatus};
use argmin::solver::neldermead::NelderMead;
use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{self, CharFn, FourierConfig};
use crate::levy_core::{compute_mu_s, to_mmm, MmmModel};
use crate::models::{vg_from_kappa, Family, MertonParams, ModelParams, VgParams};

/// One call quote. `expiry` is a year fraction (ACT/365).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quote {
    pub expiry: f64,
    pub strike: f64,
    pub mid: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuoteSet {
    pub spot: f64,
    pub valuation_date: NaiveDate,
    pub quotes: Vec<Quote>,
}

impl QuoteSet {
    pub fn new(spot: f64, valuation_date: NaiveDate, quotes: Vec<Quote>) -> Result<Self> {
        let set = Self {
            spot,
            valuation_date,
            quotes,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.spot.is_finite() && self.spot > 0.0) {
            return Err(Error::Parse(format!("spot must be > 0, got {}", self.spot)));
        }
        if self.quotes.is_empty() {
            return Err(Error::Parse("quote set is empty".into()));
        }
        for (i, q) in self.quotes.iter().enumerate() {
            let ok = |x: f64| x.is_finite() && x > 0.0;
            if !(ok(q.expiry) && ok(q.strike) && ok(q.mid)) {
                return Err(Error::Parse(format!(
                    "quote {}: expiry, strike and mid must be > 0, got {:?}",
                    i + 1,
                    q
                )));
            }
        }
        Ok(())
    }

    /// Parse the text format:
    ///
    /// ```text
    /// # spot = 2102.4
    /// # valuation_date = 2016-04-20
    /// # day_count = ACT/365
    /// expiry,strike,mid
    /// 0.05,2100,31.2
    /// ```
    pub fn parse(text: &str) -> Result<Self> {
        let mut meta = BTreeMap::new();
        for line in text.lines() {
            let Some(rest) = line.trim().strip_prefix('#') else { continue };
            if let Some((k, v)) = rest.split_once('=') {
                meta.insert(k.trim().to_ascii_lowercase(), v.trim().to_string());
            }
        }
        let spot: f64 = meta
            .get("spot")
            .ok_or_else(|| Error::Parse("missing `# spot = ...` header".into()))?
            .parse()
            .map_err(|e| Error::Parse(format!("spot: {e}")))?;
        let valuation_date = match meta.get("valuation_date") {
            Some(d) => NaiveDate::parse_from_str(d, "%Y-%m-%d")
                .map_err(|e| Error::Parse(format!("valuation_date `{d}`: {e}")))?,
            None => return Err(Error::Parse("missing `# valuation_date = YYYY-MM-DD` header".into())),
        };
        if let Some(dc) = meta.get("day_count") {
            if !dc.eq_ignore_ascii_case("ACT/365") {
                return Err(Error::Parse(format!("unsupported day count `{dc}`, expected ACT/365")));
            }
        }
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
        if headers.iter().collect::<Vec<_>>() != ["expiry", "strike", "mid"] {
            return Err(Error::Parse(format!(
                "expected header `expiry,strike,mid`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let quotes = reader
            .deserialize()
            .collect::<std::result::Result<Vec<Quote>, _>>()
            .map_err(|e| Error::Parse(e.to_string()))?;
        Self::new(spot, valuation_date, quotes)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# spot = {}", self.spot);
        let _ = writeln!(out, "# valuation_date = {}", self.valuation_date.format("%Y-%m-%d"));
        let _ = writeln!(out, "# day_count = ACT/365");
        out.push_str("expiry,strike,mid\n");
        for q in &self.quotes {
            let _ = writeln!(out, "{},{},{}", q.expiry, q.strike, q.mid);
        }
        out
    }

    /// Quotes grouped by expiry, in ascending expiry order, keeping indices.
    fn by_expiry(&self) -> Vec<(f64, Vec<usize>)> {
        let mut groups: Vec<(f64, Vec<usize>)> = Vec::new();
        let mut order: Vec<usize> = (0..self.quotes.len()).collect();
        order.sort_by(|&a, &b| self.quotes[a].expiry.total_cmp(&self.quotes[b].expiry));
        for i in order {
            let t = self.quotes[i].expiry;
            match groups.last_mut() {
                Some((g, idx)) if *g == t => idx.push(i),
                _ => groups.push((t, vec![i])),
            }
        }
        groups
    }

    fn price_scale(&self) -> f64 {
        self.quotes.iter().fold(0.0f64, |m, q| m.max(q.mid)).max(1.0)
    }
}

/// `E*[(S_T - K)^+]` at zero rates, clipped to the no-arbitrage band
/// `[max(S - K, 0), S]`.
pub fn model_call_price(
    model: &MmmModel,
    spot: f64,
    strike: f64,
    expiry: f64,
    cfg: &FourierConfig,
) -> Result<f64> {
    let phi = CharFn::new(model, expiry)?;
    price_with(&phi, spot, strike, cfg)
}

fn price_with(phi: &CharFn, spot: f64, strike: f64, cfg: &FourierConfig) -> Result<f64> {
    if !(strike.is_finite() && strike > 0.0) {
        return Err(Error::invalid("strike", "must be > 0"));
    }
    let v = fourier::call(phi, strike / spot, cfg)?.value * spot;
    Ok(v.clamp((spot - strike).max(0.0), spot))
}

/// Model prices for every quote, in quote order.
pub fn model_prices(model: &MmmModel, quotes: &QuoteSet, cfg: &FourierConfig) -> Result<Vec<f64>> {
    let mut prices = vec![0.0; quotes.quotes.len()];
    for (t, idx) in quotes.by_expiry() {
        let phi = CharFn::new(model, t)?;
        let vals: Vec<f64> = idx
            .par_iter()
            .map(|&i| price_with(&phi, quotes.spot, quotes.quotes[i].strike, cfg))
            .collect::<Result<_>>()?;
        for (&i, v) in idx.iter().zip(vals) {
            prices[i] = v;
        }
    }
    Ok(prices)
}

fn rmse_of(prices: &[f64], quotes: &QuoteSet) -> f64 {
    let sum: f64 = prices
        .iter()
        .zip(&quotes.quotes)
        .map(|(p, q)| (p - q.mid).powi(2))
        .sum();
    (sum / prices.len() as f64).sqrt()
}

/// Penalty weight per unit of squared constraint violation, in price units.
pub const PENALTY_WEIGHT: f64 = 1e6;

/// How far `params` is from satisfying the tilt condition and `M > 4`; zero when
/// feasible.
pub fn constraint_violation(params: &ModelParams) -> f64 {
    if let ModelParams::Vg(p) = params {
        if !(p.c > 0.0 && p.g > 0.0 && p.m.is_finite()) {
            return f64::INFINITY;
        }
        if p.m <= 4.0 {
            return 4.0 - p.m + 1e-9;
        }
    }
    let Ok(model) = params.model(1.0) else {
        return f64::INFINITY;
    };
    match to_mmm(&model) {
        Ok(_) => 0.0,
        Err(Error::Assumption { mu_s, lower }) => {
            if mu_s > 0.0 {
                mu_s
            } else {
                lower - mu_s + 1e-12
            }
        }
        Err(_) => f64::INFINITY,
    }
}

fn penalized(scale: f64, violation: f64) -> f64 {
    // Worse than any feasible RMSE, since feasible prices and mids lie in [0, S].
    let v = violation.min(1e6);
    scale * (1.0 + PENALTY_WEIGHT * v * v)
}

/// RMSE of model prices against mids; infeasible parameters get a penalty.
pub fn rmse(params: &ModelParams, quotes: &QuoteSet, cfg: &FourierConfig) -> f64 {
    let scale = quotes.spot.max(quotes.price_scale());
    let violation = constraint_violation(params);
    if violation > 0.0 {
        return penalized(scale, violation);
    }
    match params.mmm().and_then(|m| model_prices(&m, quotes, cfg)) {
        Ok(prices) => rmse_of(&prices, quotes),
        Err(_) => penalized(scale, 1e-3),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationConfig {
    pub fourier: FourierConfig,
    /// Nelder–Mead iterations per run.
    pub max_iters: u64,
    /// Extra runs restarted from the incumbent.
    pub restarts: usize,
    /// Simplex standard-deviation stopping tolerance (in RMSE units).
    pub sd_tolerance: f64,
    /// Initial simplex edge in the inner coordinates.
    pub initial_step: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            fourier: FourierConfig::default(),
            max_iters: 800,
            restarts: 4,
            sd_tolerance: 1e-9,
            initial_step: 0.1,
        }
    }
}

/// The tilt condition and, for VG, `M > 4` at the calibrated parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintReport {
    pub mu_s: f64,
    /// `-(σ² + C₂)`.
    pub lower: f64,
    pub tilt: f64,
    pub assumption_ok: bool,
    /// `M` for VG.
    pub vg_m: Option<f64>,
    /// The initial point was moved into the feasible set.
    pub projected_init: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    pub params: ModelParams,
    pub rmse: f64,
    pub init_rmse: f64,
    pub iterations: u64,
    pub converged: bool,
    pub constraint_report: ConstraintReport,
    pub n_quotes: usize,
}

impl CalibrationResult {
    /// `key = value` lines.
    pub fn to_record(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "family = {}", self.params.family());
        for (k, v) in self.params.entries() {
            let _ = writeln!(out, "param.{k} = {v:.10e}");
        }
        let r = &self.constraint_report;
        let _ = writeln!(out, "rmse = {:.10e}", self.rmse);
        let _ = writeln!(out, "init_rmse = {:.10e}", self.init_rmse);
        let _ = writeln!(out, "iterations = {}", self.iterations);
        let _ = writeln!(out, "converged = {}", self.converged);
        let _ = writeln!(out, "quotes = {}", self.n_quotes);
        let _ = writeln!(out, "constraint.mu_s = {:.10e}", r.mu_s);
        let _ = writeln!(out, "constraint.lower = {:.10e}", r.lower);
        let _ = writeln!(out, "constraint.tilt = {:.10e}", r.tilt);
        let _ = writeln!(out, "constraint.assumption_1 = {}", if r.assumption_ok { "ok" } else { "violated" });
        if let Some(m) = r.vg_m {
            let _ = writeln!(out, "constraint.vg_m = {m:.10e}");
            let _ = writeln!(out, "constraint.vg_m_gt_4 = {}", if m > 4.0 { "ok" } else { "violated" });
        }
        let _ = writeln!(out, "constraint.projected_init = {}", r.projected_init);
        out
    }
}

/// Inner-space parametrization of one family.
#[derive(Debug, Clone, Copy)]
enum Space {
    Merton { tilt: f64 },
    Vg,
}

impl Space {
    fn encode(&self, p: &ModelParams) -> Vec<f64> {
        match p {
            ModelParams::Merton(p) => vec![p.sigma.ln(), p.gamma.ln(), p.m, p.delta.ln()],
            ModelParams::Vg(p) => {
                let (kappa, m, delta) = p.to_kappa();
                vec![kappa.ln(), m, delta.ln()]
            }
            // Rejected by `project` before any encoding happens.
            ModelParams::BlackScholes { .. } => unreachable!("no calibration space for black-scholes"),
        }
    }

    fn decode(&self, x: &[f64]) -> Option<ModelParams> {
        if x.iter().any(|v| !v.is_finite()) {
            return None;
        }
        match *self {
            Space::Merton { tilt } => {
                let p = MertonParams {
                    mu: 0.0,
                    sigma: x[0].exp(),
                    gamma: x[1].exp(),
                    m: x[2],
                    delta: x[3].exp(),
                };
                p.validate().ok()?;
                p.with_tilt(tilt).ok().map(ModelParams::Merton)
            }
            Space::Vg => {
                let (kappa, m, delta) = (x[0].exp(), x[1], x[2].exp());
                let d2 = delta * delta;
                let root = (m * m + 2.0 * d2 / kappa).sqrt();
                // Bypass the M > 4 check so the penalty sees the violation.
                let p = VgParams {
                    c: 1.0 / kappa,
                    g: (root + m) / d2,
                    m: (root - m) / d2,
                };
                (p.c.is_finite() && p.g.is_finite() && p.m.is_finite()).then_some(ModelParams::Vg(p))
            }
        }
    }

    /// Simplex edge per coordinate.
    fn steps(&self, x: &[f64], h: f64) -> Vec<f64> {
        match self {
            Space::Merton { .. } => vec![h, h, h * x[2].abs().max(0.05), h],
            Space::Vg => vec![h, h * x[1].abs().max(0.05), h],
        }
    }
}

struct Objective<'a> {
    space: Space,
    quotes: &'a QuoteSet,
    cfg: FourierConfig,
}

impl CostFunction for Objective<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, x: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        Ok(match self.space.decode(x) {
            Some(p) => rmse(&p, self.quotes, &self.cfg),
            None => penalized(self.quotes.spot, 1.0),
        })
    }
}

/// Move an infeasible starting point into the feasible set.
fn project(init: &ModelParams) -> Result<(ModelParams, Space, bool)> {
    match init {
        ModelParams::Merton(p) => {
            p.validate()?;
            let model = p.model(1.0)?;
            let (plus, minus) = crate::levy_core::c2_split(&model)?;
            let raw = compute_mu_s(&model)? / (p.sigma * p.sigma + plus + minus);
            let tilt = raw.clamp(-0.99, 0.0);
            let projected = tilt != raw;
            let p = if projected { p.with_tilt(tilt)? } else { *p };
            Ok((ModelParams::Merton(p), Space::Merton { tilt }, projected))
        }
        ModelParams::Vg(p) => {
            if !(p.c > 0.0 && p.g > 0.0 && p.m > 0.0) {
                return Err(Error::invalid("C, G, M", "must be > 0"));
            }
            let (kappa, mut m, delta) = p.to_kappa();
            let d2 = delta * delta;
            // With the natural drift, mu_s <= 0 is M >= G + 1 and mu_s > -C2 is
            // M < G + 3. As M - G = -2m/delta^2 this is m in (-1.5, -0.5] delta^2;
            // move m to the middle of the band when outside.
            if !(m > -1.5 * d2 && m <= -0.5 * d2) {
                m = -d2;
            }
            if p.m <= 4.0 {
                // M = 4.5 at m = (2/kappa - 20.25 delta^2)/9; M decreases in m.
                m = m.min((2.0 / kappa - 20.25 * d2) / 9.0);
            }
            let q = vg_from_kappa(kappa, m, delta)?;
            let projected = (q.g - p.g).abs() > 1e-12 * p.g || (q.m - p.m).abs() > 1e-12 * p.m;
            let q = if projected { q } else { *p };
            let params = ModelParams::Vg(q);
            if constraint_violation(&params) > 0.0 {
                return Err(Error::invalid(
                    "init",
                    "cannot project the VG starting point onto the admissible tilt range",
                ));
            }
            Ok((params, Space::Vg, projected))
        }
        ModelParams::BlackScholes { .. } => Err(Error::invalid(
            "family",
            "calibration supports the merton and vg families",
        )),
    }
}

fn report(params: &ModelParams, projected_init: bool) -> Result<ConstraintReport> {
    let mmm = params.mmm()?;
    Ok(ConstraintReport {
        mu_s: mmm.mu_s(),
        lower: -mmm.denominator(),
        tilt: mmm.tilt(),
        assumption_ok: true,
        vg_m: match params {
            ModelParams::Vg(p) => Some(p.m),
            _ => None,
        },
        projected_init,
    })
}

/// Minimize RMSE from `init`. The family is that of `init`.
pub fn calibrate(init: &ModelParams, quotes: &QuoteSet, cfg: &CalibrationConfig) -> Result<CalibrationResult> {
    quotes.validate()?;
    cfg.fourier.validate()?;
    let (start, space, projected) = project(init)?;
    let objective = Objective {
        space,
        quotes,
        cfg: cfg.fourier,
    };
    let mut best_x = space.encode(&start);
    let init_rmse = objective.cost(&best_x).map_err(|e| Error::Optimizer(e.to_string()))?;
    let mut best = init_rmse;
    let mut iterations = 0;
    let mut converged = false;

    for run in 0..=cfg.restarts {
        let h = cfg.initial_step / (1 << run.min(4)) as f64;
        let steps = space.steps(&best_x, h);
        let mut simplex = vec![best_x.clone()];
        for (i, s) in steps.iter().enumerate() {
            let mut v = best_x.clone();
            v[i] += s;
            simplex.push(v);
        }
        let solver = NelderMead::new(simplex)
            .with_sd_tolerance(cfg.sd_tolerance)
            .map_err(|e| Error::Optimizer(e.to_string()))?;
        let res = Executor::new(
            Objective {
                space,
                quotes,
                cfg: cfg.fourier,
            },
            solver,
        )
        .configure(|s| s.max_iters(cfg.max_iters))
        .run()
        .map_err(|e| Error::Optimizer(e.to_string()))?;
        let state = res.state();
        iterations += state.get_iter();
        let run_converged = matches!(
            state.get_termination_status(),
            TerminationStatus::Terminated(TerminationReason::SolverConverged)
        );
        let cost = state.get_best_cost();
        let improved = cost < best;
        let gain = best - cost;
        if improved {
            best = cost;
            best_x = state.get_best_param().cloned().unwrap_or(best_x);
        }
        // A restart that moves nothing confirms the optimum.
        if run_converged && gain <= 1e-9 * best.max(1e-12) {
            converged = true;
            break;
        }
    }

    let params = space
        .decode(&best_x)
        .ok_or_else(|| Error::Optimizer("optimum decodes to invalid parameters".into()))?;
    if constraint_violation(&params) > 0.0 {
        return Err(Error::Optimizer("optimizer returned infeasible parameters".into()));
    }
    Ok(CalibrationResult {
        params,
        rmse: best,
        init_rmse,
        iterations,
        converged,
        constraint_report: report(&params, projected)?,
        n_quotes: quotes.quotes.len(),
    })
}

/// Expiries of the synthetic quote layout (years).
pub const SYNTHETIC_EXPIRIES: [f64; 7] = [0.05, 0.1, 0.2, 0.35, 0.5, 0.75, 1.0];
/// Strikes per expiry; 81 quotes in total.
pub const SYNTHETIC_STRIKES: [usize; 7] = [12, 12, 12, 12, 11, 11, 11];

/// Quotes priced exactly from `params`: strikes evenly spaced in
/// log-moneyness over `[-0.35 √T, 0.25 √T]`, rounded to multiples of 5.
pub fn synthetic_quote_set(
    params: &ModelParams,
    spot: f64,
    valuation_date: NaiveDate,
    cfg: &FourierConfig,
) -> Result<QuoteSet> {
    let model = params.mmm()?;
    let mut quotes = Vec::new();
    for (&t, &n) in SYNTHETIC_EXPIRIES.iter().zip(&SYNTHETIC_STRIKES) {
        let (lo, hi) = (-0.35 * t.sqrt(), 0.25 * t.sqrt());
        for j in 0..n {
            let k = lo + (hi - lo) * j as f64 / (n - 1) as f64;
            let strike = (spot * k.exp() / 5.0).round() * 5.0;
            quotes.push(Quote {
                expiry: t,
                strike,
                mid: 0.0,
            });
        }
    }
    let mut set = QuoteSet {
        spot,
        valuation_date,
        quotes,
    };
    let prices = model_prices(&model, &set, cfg)?;
    for (q, p) in set.quotes.iter_mut().zip(prices) {
        q.mid = p;
    }
    set.validate()?;
    Ok(set)
}

impl std::str::FromStr for ModelParams {
    type Err = Error;
    /// `family:key=value,key=value`, e.g. `vg:c=6.79,g=30.18,m=33.15`.
    fn from_str(s: &str) -> Result<Self> {
        let (family, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("expected `family:key=value,...`, got `{s}`")))?;
        let family: Family = family.parse()?;
        let mut kv = BTreeMap::new();
        for part in rest.split(',').filter(|p| !p.trim().is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value, got `{part}`")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("{}: {e}", k.trim())))?;
            kv.insert(k.trim().to_ascii_lowercase(), v);
        }
        let get = |k: &str| {
            kv.get(k)
                .copied()
                .ok_or_else(|| Error::Parse(format!("missing parameter `{k}`")))
        };
        match family {
            Family::Merton => Ok(ModelParams::Merton(MertonParams {
                mu: get("mu")?,
                sigma: get("sigma")?,
                gamma: get("gamma")?,
                m: get("m")?,
                delta: get("delta")?,
            })),
            Family::Vg => Ok(ModelParams::Vg(VgParams {
                c: get("c")?,
                g: get("g")?,
                m: get("m")?,
            })),
            Family::BlackScholes => Ok(ModelParams::BlackScholes {
                mu: get("mu")?,
                sigma: get("sigma")?,
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn date() -> NaiveDate {
        NaiveDate::from_ymd_opt(2016, 4, 20).unwrap()
    }

    #[test]
    fn parse_round_trip() {
        let set = QuoteSet::new(
            100.0,
            date(),
            vec![
                Quote {
                    expiry: 0.25,
                    strike: 95.0,
                    mid: 6.5,
                },
                Quote {
                    expiry: 0.5,
                    strike: 105.0,
                    mid: 2.25,
                },
            ],
        )
        .unwrap();
        assert_eq!(QuoteSet::parse(&set.to_text()).unwrap(), set);
    }

    #[test]
    fn parse_rejects_bad_input() {
        let head = "# spot = 100\n# valuation_date = 2016-04-20\n";
        assert!(QuoteSet::parse(&format!("{head}expiry,strike,mid\n")).is_err());
        assert!(QuoteSet::parse(&format!("{head}strike,mid\n100,1\n")).is_err());
        assert!(QuoteSet::parse(&format!("{head}expiry,strike,mid\n0.1,100,-1\n")).is_err());
        assert!(QuoteSet::parse("expiry,strike,mid\n0.1,100,1\n").is_err());
        assert!(QuoteSet::parse(&format!("{head}# day_count = 30/360\nexpiry,strike,mid\n0.1,100,1\n")).is_err());
    }

    #[test]
    fn rmse_of_single_quote_off_by_two() {
        let set = QuoteSet::new(
            100.0,
            date(),
            vec![Quote {
                expiry: 0.1,
                strike: 100.0,
                mid: 3.0,
            }],
        )
        .unwrap();
        assert_eq!(rmse_of(&[5.0], &set), 2.0);
    }

    #[test]
    fn params_from_str() {
        let p: ModelParams = "vg:c=6.791,g=30.1807,m=33.1507".parse().unwrap();
        assert_eq!(p, ModelParams::Vg(VgParams::REFERENCE));
        assert!("vg:c=1,g=2".parse::<ModelParams>().is_err());
        assert!("heston:v=1".parse::<ModelParams>().is_err());
    }

    #[test]
    fn infeasible_is_penalized_above_spot() {
        let set = QuoteSet::new(
            100.0,
            date(),
            vec![Quote {
                expiry: 0.1,
                strike: 100.0,
                mid: 3.0,
            }],
        )
        .unwrap();
        let bad = ModelParams::Vg(VgParams {
            c: 5.0,
            g: 10.0,
            m: 3.0,
        });
        assert!(constraint_violation(&bad) > 0.0);
        assert!(rmse(&bad, &set, &FourierConfig::default()) > set.spot);
    }

    #[test]
    fn merton_projection_clamps_positive_mu_s() {
        let p = MertonParams {
            mu: 0.5,
            ..MertonParams::REFERENCE
        };
        let (q, space, projected) = project(&ModelParams::Merton(p)).unwrap();
        assert!(projected);
        assert!(matches!(space, Space::Merton { tilt } if tilt == 0.0));
        assert_eq!(constraint_violation(&q), 0.0);
    }

    #[test]
    fn vg_projection() {
        let p = ModelParams::Vg(VgParams {
            c: 5.0,
            g: 20.0,
            m: 15.0,
        });
        assert!(constraint_violation(&p) > 0.0);
        let (q, _, projected) = project(&p).unwrap();
        assert!(projected);
        assert_eq!(constraint_violation(&q), 0.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(16))]

            #[test]
            fn objective_is_deterministic(sigma in 0.05f64..0.3, gamma in 0.1f64..1.0) {
                let quotes = QuoteSet::new(
                    100.0,
                    date(),
                    vec![
                        Quote { expiry: 0.25, strike: 95.0, mid: 7.0 },
                        Quote { expiry: 0.25, strike: 105.0, mid: 2.0 },
                        Quote { expiry: 0.5, strike: 100.0, mid: 5.0 },
                    ],
                )
                .unwrap();
                let p = ModelParams::Merton(MertonParams { sigma, gamma, ..MertonParams::REFERENCE });
                let cfg = FourierConfig::default();
                let a = rmse(&p, &quotes, &cfg);
                prop_assert_eq!(a.to_bits(), rmse(&p, &quotes, &cfg).to_bits());
                prop_assert!(a.is_finite() && a >= 0.0);
            }

            #[test]
            fn prices_respect_no_arbitrage_band(strike in 50.0f64..200.0, expiry in 0.02f64..2.0) {
                let m = ModelParams::Vg(VgParams::REFERENCE).mmm().unwrap();
                let cfg = FourierConfig::default();
                let p = model_call_price(&m, 100.0, strike, expiry, &cfg).unwrap();
                prop_assert!(p >= (100.0 - strike).max(0.0) && p <= 100.0);
                let q = model_call_price(&m, 100.0, strike * 1.01, expiry, &cfg).unwrap();
                prop_assert!(q <= p + 1e-9);
            }
        }
    }
}
