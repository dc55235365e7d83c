//! TOML run configuration for the command-line tool.
//!
//! Every section is optional except `[model]`, and defaults reproduce the
//! reference setting: `T = 1`, `t = 0.95`, `S_t = 2102.4`, strikes 1900 to 2500
//! in steps of 50, `N = 2^14`, `η = 0.025`, `α = 1.75`.
//!
//! ```toml
//! [model]
//! family = "merton"      # or "vg", "black-scholes"
//! sigma = 0.0435         # any omitted parameter takes its reference value
//!
//! [market]
//! T = 1.0
//! t = 0.95
//! spot = 2102.4
//!
//! [strikes]
//! min = 1900.0
//! max = 2500.0
//! step = 50.0
//! # chis = [0.5, 1.0, 2.0]   # explicit moneyness list instead of a grid
//!
//! [fourier]
//! mode = "direct-quadrature" # or "fft-batch"
//!
//! [mc]
//! n_paths = 1000000
//! seed = 20160420
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fourier::FourierConfig;
use crate::models::{Family, MertonParams, ModelParams, VgParams};
use crate::oracle_mc::McConfig;

/// Model section. VG uses `c`, `g`, `m` for `(C, G, M)`; Merton uses
/// `mu`, `sigma`, `gamma`, `m`, `delta`; Black–Scholes uses `mu`, `sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub family: Family,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
}

/// Black–Scholes defaults when `[model] family = "black-scholes"`.
pub const BS_SIGMA: f64 = 0.2;

impl ModelSection {
    /// Section with every parameter of `p` spelled out.
    pub fn resolved(p: &ModelParams) -> Self {
        let mut s = RunConfig::reference(p.family()).model;
        match *p {
            ModelParams::Merton(q) => {
                s.mu = Some(q.mu);
                s.sigma = Some(q.sigma);
                s.gamma = Some(q.gamma);
                s.m = Some(q.m);
                s.delta = Some(q.delta);
            }
            ModelParams::Vg(q) => {
                s.c = Some(q.c);
                s.g = Some(q.g);
                s.m = Some(q.m);
            }
            ModelParams::BlackScholes { mu, sigma } => {
                s.mu = Some(mu);
                s.sigma = Some(sigma);
            }
        }
        s
    }

    pub fn params(&self) -> Result<ModelParams> {
        let unused = |names: &[(&'static str, Option<f64>)]| -> Result<()> {
            match names.iter().find(|(_, v)| v.is_some()) {
                Some((n, _)) => Err(Error::invalid(n, format!("not a parameter of the {} family", self.family))),
                None => Ok(()),
            }
        };
        match self.family {
            Family::Merton => {
                unused(&[("c", self.c), ("g", self.g)])?;
                let d = MertonParams::REFERENCE;
                let p = MertonParams {
                    mu: self.mu.unwrap_or(d.mu),
                    sigma: self.sigma.unwrap_or(d.sigma),
                    gamma: self.gamma.unwrap_or(d.gamma),
                    m: self.m.unwrap_or(d.m),
                    delta: self.delta.unwrap_or(d.delta),
                };
                p.validate()?;
                Ok(ModelParams::Merton(p))
            }
            Family::Vg => {
                unused(&[
                    ("mu", self.mu),
                    ("sigma", self.sigma),
                    ("gamma", self.gamma),
                    ("delta", self.delta),
                ])?;
                let d = VgParams::REFERENCE;
                Ok(ModelParams::Vg(VgParams::new(
                    self.c.unwrap_or(d.c),
                    self.g.unwrap_or(d.g),
                    self.m.unwrap_or(d.m),
                )?))
            }
            Family::BlackScholes => {
                unused(&[
                    ("gamma", self.gamma),
                    ("m", self.m),
                    ("delta", self.delta),
                    ("c", self.c),
                    ("g", self.g),
                ])?;
                let sigma = self.sigma.unwrap_or(BS_SIGMA);
                Ok(ModelParams::BlackScholes {
                    mu: self.mu.unwrap_or(-0.5 * sigma * sigma),
                    sigma,
                })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Market {
    /// Maturity `T`.
    #[serde(rename = "T")]
    pub maturity: f64,
    /// Current time `t < T`.
    pub t: f64,
    pub spot: f64,
}

impl Default for Market {
    fn default() -> Self {
        Self {
            maturity: 1.0,
            t: 0.95,
            spot: 2102.4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Strikes {
    pub min: f64,
    pub max: f64,
    pub step: f64,
    /// Explicit moneyness values; replaces the strike grid when present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chis: Option<Vec<f64>>,
}

impl Default for Strikes {
    fn default() -> Self {
        Self {
            min: 1900.0,
            max: 2500.0,
            step: 50.0,
            chis: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSection {
    pub n_paths: usize,
    pub seed: u64,
}

impl Default for McSection {
    fn default() -> Self {
        Self {
            n_paths: 1_000_000,
            seed: 20160420,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    /// Moneyness values to check; defaults to five points spanning two
    /// standard deviations of `L_{T-t}` on each side.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chis: Option<Vec<f64>>,
    /// Band half-width in standard errors.
    pub sigmas: f64,
    /// Drift added to the characteristic function only. Non-zero values make
    /// a deliberately wrong model for negative-control runs.
    pub drift_shift: f64,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            chis: None,
            sigmas: 3.0,
            drift_shift: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Output {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    #[serde(default)]
    pub market: Market,
    #[serde(default)]
    pub strikes: Strikes,
    #[serde(default)]
    pub fourier: FourierConfig,
    #[serde(default)]
    pub mc: McSection,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub output: Output,
}

impl RunConfig {
    /// Reference setting for the given family.
    pub fn reference(family: Family) -> Self {
        Self {
            model: ModelSection {
                family,
                mu: None,
                sigma: None,
                gamma: None,
                m: None,
                delta: None,
                c: None,
                g: None,
            },
            market: Market::default(),
            strikes: Strikes::default(),
            fourier: FourierConfig::default(),
            mc: McSection::default(),
            verify: VerifySection::default(),
            output: Output::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.params()?;
        let m = &self.market;
        if !(m.t >= 0.0 && m.t < m.maturity && m.maturity.is_finite()) {
            return Err(Error::invalid("t", format!("need 0 <= t < T, got t = {}, T = {}", m.t, m.maturity)));
        }
        if !(m.spot.is_finite() && m.spot > 0.0) {
            return Err(Error::invalid("spot", "must be > 0"));
        }
        self.fourier.validate()?;
        self.mc_config().validate()?;
        if !(self.verify.sigmas > 0.0) {
            return Err(Error::invalid("sigmas", "must be > 0"));
        }
        self.chis()?;
        if let Some(c) = &self.verify.chis {
            check_chis(c)?;
        }
        Ok(())
    }

    /// `T - t`.
    pub fn horizon(&self) -> f64 {
        self.market.maturity - self.market.t
    }

    pub fn params(&self) -> Result<ModelParams> {
        self.model.params()
    }

    pub fn mc_config(&self) -> McConfig {
        McConfig::new(self.mc.n_paths, self.mc.seed, self.horizon())
    }

    /// Sorted moneyness grid `K/S`.
    pub fn chis(&self) -> Result<Vec<f64>> {
        let mut chis = match &self.strikes.chis {
            Some(c) => c.clone(),
            None => {
                let s = &self.strikes;
                if !(s.step > 0.0 && s.min > 0.0 && s.max >= s.min) {
                    return Err(Error::invalid(
                        "strikes",
                        "need 0 < min <= max and step > 0",
                    ));
                }
                let n = ((s.max - s.min) / s.step + 1e-9).floor() as usize;
                (0..=n).map(|j| (s.min + j as f64 * s.step) / self.market.spot).collect()
            }
        };
        check_chis(&chis)?;
        chis.sort_by(f64::total_cmp);
        Ok(chis)
    }

    /// SHA-256 of the canonical TOML form of the resolved configuration,
    /// leaving out where the output goes.
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.output = Output::default();
        if let Ok(p) = self.model.params() {
            c.model = ModelSection::resolved(&p);
        }
        let canonical = toml::to_string(&c).unwrap_or_default();
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

fn check_chis(chis: &[f64]) -> Result<()> {
    if chis.is_empty() {
        return Err(Error::invalid("chis", "moneyness grid is empty"));
    }
    if let Some(c) = chis.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
        return Err(Error::invalid("chis", format!("moneyness must be > 0, got {c}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_reference_defaults() {
        let cfg = RunConfig::parse("[model]\nfamily = \"merton\"\n").unwrap();
        assert_eq!(cfg.params().unwrap(), ModelParams::Merton(MertonParams::REFERENCE));
        assert_eq!(cfg, RunConfig::reference(Family::Merton));
        let chis = cfg.chis().unwrap();
        assert_eq!(chis.len(), 13);
        assert!((chis[0] - 0.9037).abs() < 1e-4 && (chis[12] - 1.1891).abs() < 1e-4);
        assert!((cfg.horizon() - 0.05).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            "",
            "[model]\nfamily = \"heston\"\n",
            "[model]\nfamily = \"vg\"\ngamma = 1.0\n",
            "[model]\nfamily = \"vg\"\nm = 3.0\n",
            "[model]\nfamily = \"merton\"\n[market]\nt = 1.0\n",
            "[model]\nfamily = \"merton\"\n[strikes]\nstep = 0.0\n",
            "[model]\nfamily = \"merton\"\n[strikes]\nchis = []\n",
            "[model]\nfamily = \"merton\"\n[fourier]\nalpha = 3.0\n",
            "[model]\nfamily = \"merton\"\n[mc]\nn_paths = 10\n",
            "[model]\nfamily = \"merton\"\nbogus = 1\n",
        ] {
            assert!(RunConfig::parse(text).is_err(), "{text}");
        }
    }

    #[test]
    fn digest_tracks_content() {
        let a = RunConfig::reference(Family::Vg);
        let mut b = a.clone();
        assert_eq!(a.digest(), b.digest());
        b.model.sigma = Some(MertonParams::REFERENCE.sigma);
        b.model.family = Family::Merton;
        assert_eq!(b.digest(), RunConfig::reference(Family::Merton).digest());
        let mut b = a.clone();
        b.output.path = Some("elsewhere.csv".into());
        assert_eq!(a.digest(), b.digest());
        b.mc.seed += 1;
        assert_ne!(a.digest(), b.digest());
        let text = toml::to_string(&a).unwrap();
        assert_eq!(RunConfig::parse(&text).unwrap(), a);
    }
}
