//! LRM and delta strategies for a call, their difference, and the two
//! model-independent bounds on `|LRM(χ) - Δ(χ)|`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fourier::{
    self, difference, i1, i2, tail_lower, theorem4_condition_integral, CharFn, FourierConfig,
    FourierValue, Mode, Note, Transform,
};

/// Multiple of the reported numerical error tolerated before an inequality
/// between exact quantities counts as violated.
pub const SLACK_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Flag {
    /// Bound exceeded, but within the numerical slack.
    BoundWarning { bound: &'static str, excess: f64 },
    /// Bound exceeded beyond the slack.
    BoundViolation { bound: &'static str, excess: f64 },
    /// `|I2 - C2 I1|/D` and the combined kernel disagree beyond the slack.
    DiffMismatch { separate: f64, combined: f64 },
    /// Condition integral diverged; no second bound.
    ConditionDiverged,
    Clamped { excursion: f64 },
    AlphaFallback { requested: f64, used: f64 },
    Interpolated { error: f64 },
}

impl Flag {
    pub fn is_failure(&self) -> bool {
        matches!(self, Flag::BoundViolation { .. } | Flag::DiffMismatch { .. })
    }

    pub fn label(&self) -> String {
        match self {
            Flag::BoundWarning { bound, .. } => format!("{bound}-warning"),
            Flag::BoundViolation { bound, .. } => format!("{bound}-violation"),
            Flag::DiffMismatch { .. } => "diff-mismatch".into(),
            Flag::ConditionDiverged => "condition-diverged".into(),
            Flag::Clamped { .. } => "clamped".into(),
            Flag::AlphaFallback { .. } => "alpha-fallback".into(),
            Flag::Interpolated { .. } => "interpolated".into(),
        }
    }
}

impl From<&Note> for Flag {
    fn from(n: &Note) -> Self {
        match *n {
            Note::AlphaFallback { requested, used } => Flag::AlphaFallback { requested, used },
            Note::Clamped { excursion } => Flag::Clamped { excursion },
            Note::Interpolated { error } => Flag::Interpolated { error },
        }
    }
}

/// Absolute error estimates carried by a [`StrategyPoint`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Accuracy {
    pub i1: f64,
    pub i2: f64,
    pub diff: f64,
    pub bound_t3: f64,
    pub bound_t4: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyPoint {
    pub chi: f64,
    pub i1: f64,
    pub i2: f64,
    pub lrm: f64,
    pub delta: f64,
    pub diff: f64,
    pub bound_t3: f64,
    pub bound_t4: Option<f64>,
    pub accuracy: Accuracy,
    pub flags: Vec<Flag>,
}

impl StrategyPoint {
    pub fn passed(&self) -> bool {
        !self.flags.iter().any(Flag::is_failure)
    }
}

fn denominator(phi: &CharFn) -> Result<f64> {
    let d = phi.model().denominator();
    if d > 0.0 {
        Ok(d)
    } else {
        Err(Error::invalid(
            "sigma",
            "sigma^2 + C2 = 0: the price process is deterministic",
        ))
    }
}

/// `LRM(χ) = (σ² I1(1, χ) + I2(1, χ))/(σ² + C2)`.
pub fn lrm(phi: &CharFn, chi: f64, cfg: &FourierConfig) -> Result<FourierValue> {
    let d = denominator(phi)?;
    let s2 = phi.model().sigma().powi(2);
    let a = i1(phi, chi, cfg)?;
    let b = i2(phi, chi, cfg)?;
    let mut v = FourierValue {
        value: (s2 * a.value + b.value) / d,
        abs_err: (s2 * a.abs_err + b.abs_err) / d,
        alpha: a.alpha,
        notes: a.notes,
    };
    v.notes.extend(b.notes);
    Ok(v)
}

/// `Δ(χ) = I1(1, χ)`.
pub fn delta(phi: &CharFn, chi: f64, cfg: &FourierConfig) -> Result<FourierValue> {
    i1(phi, chi, cfg)
}

fn t3_from_tail(phi: &CharFn, chi: f64, p: &FourierValue) -> Result<(f64, f64)> {
    let m = phi.model();
    let d = denominator(phi)?;
    let value = chi * m.c2_minus() / d + chi * p.value / d * (m.c2_plus() - m.c2_minus());
    let err = chi / d * (m.c2_plus() - m.c2_minus()).abs() * p.abs_err;
    Ok((value, err))
}

/// `χ C2-/(σ² + C2) + χ p*((-∞, log χ]) (C2+ - C2-)/(σ² + C2)`.
pub fn bound_t3(phi: &CharFn, chi: f64, cfg: &FourierConfig) -> Result<FourierValue> {
    let p = tail_lower(phi, chi, cfg)?;
    let (value, abs_err) = t3_from_tail(phi, chi, &p)?;
    Ok(FourierValue {
        value,
        abs_err,
        alpha: p.alpha,
        notes: p.notes,
    })
}

/// `χ`-independent factor `C` of the second bound `C/χ`:
/// `√5/(2π(σ² + C2)) ∫_0^∞ |φ(v - 2i)|/(1 + v) dv · (C2- + ∫_0^∞ e^{2x}(e^x - 1)² nu(dx))`.
///
/// `Ok(None)` when the condition integral diverges.
pub fn theorem4_constant(phi: &CharFn) -> Result<Option<(f64, f64)>> {
    let d = denominator(phi)?;
    let m = phi.model();
    let brace = m.c2_minus() + m.base().upper_e2x_moment()?;
    if brace == 0.0 {
        return Ok(Some((0.0, 0.0)));
    }
    let cond = match theorem4_condition_integral(phi) {
        Ok(c) => c,
        Err(Error::Divergence(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    let f = 5f64.sqrt() / (2.0 * PI * d) * brace;
    Ok(Some((f * cond.value, f * cond.abs_err)))
}

/// second bound at `chi`; `None` when the condition integral diverges.
pub fn bound_t4(phi: &CharFn, chi: f64) -> Result<Option<f64>> {
    if !(chi.is_finite() && chi > 0.0) {
        return Err(Error::invalid("chi", format!("moneyness must be > 0, got {chi}")));
    }
    Ok(theorem4_constant(phi)?.map(|(c, _)| c / chi))
}

/// Per-point inputs from the Fourier engine.
struct Pieces {
    i1: FourierValue,
    i2: FourierValue,
    diff: FourierValue,
    lower: FourierValue,
}

fn check_bound(flags: &mut Vec<Flag>, name: &'static str, diff: f64, bound: f64, slack: f64) {
    let excess = diff - bound;
    if excess > slack {
        flags.push(Flag::BoundViolation { bound: name, excess });
    } else if excess > 0.0 {
        flags.push(Flag::BoundWarning { bound: name, excess });
    }
}

fn assemble(phi: &CharFn, chi: f64, p: Pieces, t4: Option<(f64, f64)>) -> Result<StrategyPoint> {
    let d = denominator(phi)?;
    let m = phi.model();
    let s2 = m.sigma().powi(2);
    let lrm = (s2 * p.i1.value + p.i2.value) / d;
    let delta = p.i1.value;
    let diff = p.diff.value.abs() / d;
    let diff_err = p.diff.abs_err / d;
    let (t3, t3_err) = t3_from_tail(phi, chi, &p.lower)?;

    let mut flags: Vec<Flag> = Vec::new();
    for n in p.i1.notes.iter().chain(&p.i2.notes).chain(&p.diff.notes).chain(&p.lower.notes) {
        let f = Flag::from(n);
        if !flags.contains(&f) {
            flags.push(f);
        }
    }

    let separate = (lrm - delta).abs();
    let separate_err = (m.c2() * p.i1.abs_err + p.i2.abs_err) / d;
    let roundoff = 8.0 * f64::EPSILON * (lrm.abs() + delta.abs());
    if (separate - diff).abs() > SLACK_FACTOR * (separate_err + diff_err) + roundoff {
        flags.push(Flag::DiffMismatch {
            separate,
            combined: diff,
        });
    }
    check_bound(&mut flags, "t3", diff, t3, SLACK_FACTOR * (diff_err + t3_err));

    let (bound_t4, t4_err) = match t4 {
        Some((c, e)) => {
            let b = c / chi;
            check_bound(&mut flags, "t4", diff, b, SLACK_FACTOR * (diff_err + e / chi));
            (Some(b), e / chi)
        }
        None => {
            flags.push(Flag::ConditionDiverged);
            (None, 0.0)
        }
    };

    Ok(StrategyPoint {
        chi,
        i1: p.i1.value,
        i2: p.i2.value,
        lrm,
        delta,
        diff,
        bound_t3: t3,
        bound_t4,
        accuracy: Accuracy {
            i1: p.i1.abs_err,
            i2: p.i2.abs_err,
            diff: diff_err,
            bound_t3: t3_err,
            bound_t4: t4_err,
        },
        flags,
    })
}

fn direct_pieces(phi: &CharFn, chi: f64, cfg: &FourierConfig) -> Result<Pieces> {
    Ok(Pieces {
        i1: i1(phi, chi, cfg)?,
        i2: i2(phi, chi, cfg)?,
        diff: difference(phi, chi, cfg)?,
        lower: tail_lower(phi, chi, cfg)?,
    })
}

/// All strategy quantities at a single moneyness.
pub fn strategy_point(phi: &CharFn, chi: f64, cfg: &FourierConfig) -> Result<StrategyPoint> {
    cfg.validate()?;
    let t4 = theorem4_constant(phi)?;
    let pieces = match cfg.mode {
        Mode::DirectQuadrature => direct_pieces(phi, chi, cfg)?,
        Mode::FftBatch => {
            let one = |t| fourier::batch(phi, t, &[chi], cfg).map(|mut v| v.remove(0));
            Pieces {
                i1: one(Transform::I1)?,
                i2: one(Transform::I2)?,
                diff: one(Transform::Difference)?,
                lower: one(Transform::LowerTail)?,
            }
        }
    };
    assemble(phi, chi, pieces, t4)
}

/// Strategies for spot `s` and strike `k`; depends on them only through `k/s`.
pub fn strategy_for(phi: &CharFn, s: f64, k: f64, cfg: &FourierConfig) -> Result<StrategyPoint> {
    if !(s.is_finite() && s > 0.0) {
        return Err(Error::invalid("spot", format!("must be > 0, got {s}")));
    }
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::invalid("strike", format!("must be > 0, got {k}")));
    }
    strategy_point(phi, k / s, cfg)
}

/// Evaluate every moneyness in `chis` (ascending). Per-point failures are
/// returned in place; the outer error covers invalid input only.
pub fn sweep(phi: &CharFn, chis: &[f64], cfg: &FourierConfig) -> Result<Vec<Result<StrategyPoint>>> {
    cfg.validate()?;
    if let Some(bad) = chis.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
        return Err(Error::invalid("chi", format!("moneyness must be > 0, got {bad}")));
    }
    if chis.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::invalid("chi", "moneyness grid must be sorted ascending"));
    }
    let t4 = theorem4_constant(phi)?;
    match cfg.mode {
        Mode::DirectQuadrature => Ok(chis
            .par_iter()
            .map(|&chi| assemble(phi, chi, direct_pieces(phi, chi, cfg)?, t4))
            .collect()),
        Mode::FftBatch => {
            let run = |t| fourier::batch(phi, t, chis, cfg);
            let (a, b) = rayon::join(
                || rayon::join(|| run(Transform::I1), || run(Transform::I2)),
                || rayon::join(|| run(Transform::Difference), || run(Transform::LowerTail)),
            );
            let ((i1s, i2s), (diffs, lowers)) = (a, b);
            let (i1s, i2s, diffs, lowers) = (i1s?, i2s?, diffs?, lowers?);
            Ok(chis
                .iter()
                .enumerate()
                .map(|(j, &chi)| {
                    let pieces = Pieces {
                        i1: i1s[j].clone(),
                        i2: i2s[j].clone(),
                        diff: diffs[j].clone(),
                        lower: lowers[j].clone(),
                    };
                    let lower = fourier_probability(pieces.lower)?;
                    assemble(phi, chi, Pieces { lower, ..pieces }, t4)
                })
                .collect())
        }
    }
}

/// FFT tail values skip the clamping done in direct mode.
fn fourier_probability(mut v: FourierValue) -> Result<FourierValue> {
    let excursion = (-v.value).max(v.value - 1.0);
    if excursion > 0.0 {
        if excursion > 1e-8 + v.abs_err {
            return Err(Error::Accuracy {
                what: "tail probability outside [0, 1]",
                estimate: excursion,
                tolerance: 1e-8,
            });
        }
        v.value = v.value.clamp(0.0, 1.0);
        v.notes.push(Note::Clamped { excursion });
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy_core::{to_mmm, LevyModel};

    fn bs_phi() -> CharFn {
        let m = LevyModel::black_scholes(-0.02, 0.2, 1.0).unwrap();
        CharFn::new(&to_mmm(&m).unwrap(), 0.25).unwrap()
    }

    #[test]
    fn black_scholes_collapse() {
        let phi = bs_phi();
        let cfg = FourierConfig::default();
        for chi in [0.5, 0.9, 1.0, 1.1, 2.0] {
            let p = strategy_point(&phi, chi, &cfg).unwrap();
            assert_eq!(p.i2, 0.0);
            assert!((p.lrm - p.delta).abs() < 1e-12);
            assert_eq!(p.diff, 0.0);
            assert_eq!(p.bound_t3, 0.0);
            assert_eq!(p.bound_t4, Some(0.0));
            assert!(p.passed());
        }
    }

    #[test]
    fn sweep_rejects_unsorted_grid() {
        let phi = bs_phi();
        let cfg = FourierConfig::default();
        assert!(sweep(&phi, &[1.0, 0.9], &cfg).is_err());
        assert!(sweep(&phi, &[0.0, 0.9], &cfg).is_err());
        assert!(sweep(&phi, &[], &cfg).unwrap().is_empty());
    }

    #[test]
    fn flag_classification() {
        let mut flags = Vec::new();
        check_bound(&mut flags, "t3", 1.0, 2.0, 0.1);
        assert!(flags.is_empty());
        check_bound(&mut flags, "t3", 1.05, 1.0, 0.1);
        assert!(matches!(flags[0], Flag::BoundWarning { .. }));
        check_bound(&mut flags, "t3", 1.5, 1.0, 0.1);
        assert!(flags[1].is_failure());
    }

    mod props {
        use super::*;
        use crate::models::{MertonParams, VgParams};
        use proptest::prelude::*;

        fn merton() -> CharFn {
            let m = to_mmm(&MertonParams::REFERENCE.model(1.0).unwrap()).unwrap();
            CharFn::new(&m, 0.05).unwrap()
        }

        fn vg() -> CharFn {
            let m = to_mmm(&VgParams::REFERENCE.model(1.0).unwrap()).unwrap();
            CharFn::new(&m, 0.05).unwrap()
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn scale_invariance_is_exact_for_powers_of_two(
                s in 10.0f64..5000.0, chi in 0.8f64..1.25, j in -20i32..20
            ) {
                let phi = merton();
                let cfg = FourierConfig::default();
                let k = s * chi;
                let lam = 2f64.powi(j);
                let a = strategy_for(&phi, s, k, &cfg).unwrap();
                let b = strategy_for(&phi, lam * s, lam * k, &cfg).unwrap();
                prop_assert_eq!(a, b);
            }

            #[test]
            fn scale_invariance_for_any_factor(s in 10.0f64..5000.0, chi in 0.8f64..1.25, lam in 1e-3f64..1e3) {
                let phi = vg();
                let cfg = FourierConfig::default();
                let a = strategy_for(&phi, s, s * chi, &cfg).unwrap();
                let b = strategy_for(&phi, lam * s, lam * (s * chi), &cfg).unwrap();
                // K/S differs by at most an ulp or two.
                prop_assert!((a.lrm - b.lrm).abs() < 1e-9 && (a.delta - b.delta).abs() < 1e-9);
            }

            #[test]
            fn strategy_ranges_and_first_bound(chi in 0.6f64..1.6, vg_model in any::<bool>()) {
                let phi = if vg_model { vg() } else { merton() };
                let p = strategy_point(&phi, chi, &FourierConfig::default()).unwrap();
                prop_assert!((0.0..=1.0).contains(&p.delta));
                prop_assert!(p.lrm >= -p.accuracy.i1 - p.accuracy.i2);
                prop_assert!(p.diff <= p.bound_t3 + SLACK_FACTOR * (p.accuracy.diff + p.accuracy.bound_t3));
                prop_assert!(p.passed(), "{:?}", p.flags);
            }
        }
    }
}
