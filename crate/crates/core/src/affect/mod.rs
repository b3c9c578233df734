//! Circumplex affect estimation.
//!
//! An estimator turns an utterance into an [`AffectScore`]: four percentages
//! on the pleasure/misery and arousal/sleepiness axes. Two backends exist, a
//! remote chat-completion model driven by a fixed prompt and an offline
//! lexicon used for tests and headless runs.

mod estimator;
mod lexicon;
mod parse;
mod prompt;
pub mod remote;

pub use estimator::{
    estimate_affect, AffectEstimator, Backend, EstimateError, Estimator, EstimatorConfig,
    FailureCause, LexiconEstimator, RemoteEstimator,
};
pub use lexicon::{lexicon_estimate, Lexicon, DEFAULT_LEXICON};
pub use parse::{parse_affect_response, ParseError, ParseErrorKind};
pub use prompt::{build_prompt, PromptSpec, DEFAULT_PROMPT_TEMPLATE, OUTPUT_TEMPLATE};

use serde::{Deserialize, Serialize};
use std::fmt;

/// Largest axis-sum deviation (in percentage points) that is silently
/// renormalized. Anything further off is rejected.
pub const AXIS_SUM_SLACK: f64 = 1.0;

const AXIS_SUM_EXACT: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AffectError {
    #[error("{label} = {value} is outside [0, 100]")]
    OutOfRange { label: &'static str, value: f64 },
    #[error("{axis} axis sums to {sum}, expected 100")]
    AxisSum { axis: &'static str, sum: f64 },
}

/// Percentages on the two circumplex axes. Each axis sums to 100.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawScore", into = "RawScore")]
pub struct AffectScore {
    pleasure: f64,
    misery: f64,
    arousal: f64,
    sleepiness: f64,
}

#[derive(Serialize, Deserialize)]
struct RawScore {
    pleasure: f64,
    misery: f64,
    arousal: f64,
    sleepiness: f64,
}

impl TryFrom<RawScore> for AffectScore {
    type Error = AffectError;
    fn try_from(r: RawScore) -> Result<Self, Self::Error> {
        AffectScore::new(r.pleasure, r.misery, r.arousal, r.sleepiness)
    }
}

impl From<AffectScore> for RawScore {
    fn from(s: AffectScore) -> Self {
        RawScore {
            pleasure: s.pleasure,
            misery: s.misery,
            arousal: s.arousal,
            sleepiness: s.sleepiness,
        }
    }
}

fn check_range(label: &'static str, value: f64) -> Result<(), AffectError> {
    if value.is_finite() && (0.0..=100.0).contains(&value) {
        Ok(())
    } else {
        Err(AffectError::OutOfRange { label, value })
    }
}

/// Scales `(a, b)` so that it sums to exactly 100, provided it is already
/// within `slack` of 100.
fn renormalize_axis(axis: &'static str, a: f64, b: f64, slack: f64) -> Result<(f64, f64), AffectError> {
    let sum = a + b;
    let off = (sum - 100.0).abs();
    if off.is_nan() || off > slack {
        return Err(AffectError::AxisSum { axis, sum });
    }
    if sum == 100.0 {
        return Ok((a, b));
    }
    Ok((a * 100.0 / sum, b * 100.0 / sum))
}

impl AffectScore {
    /// Strict constructor: every value in [0, 100] and each axis summing to
    /// 100 within 1e-6.
    pub fn new(pleasure: f64, misery: f64, arousal: f64, sleepiness: f64) -> Result<Self, AffectError> {
        check_range("pleasure", pleasure)?;
        check_range("misery", misery)?;
        check_range("arousal", arousal)?;
        check_range("sleepiness", sleepiness)?;
        renormalize_axis("valence", pleasure, misery, AXIS_SUM_EXACT)?;
        renormalize_axis("arousal", arousal, sleepiness, AXIS_SUM_EXACT)?;
        Ok(AffectScore {
            pleasure,
            misery,
            arousal,
            sleepiness,
        })
    }

    /// Accepts axes that are off by at most [`AXIS_SUM_SLACK`] and rescales
    /// them proportionally to sum to 100.
    pub fn normalized(pleasure: f64, misery: f64, arousal: f64, sleepiness: f64) -> Result<Self, AffectError> {
        check_range("pleasure", pleasure)?;
        check_range("misery", misery)?;
        check_range("arousal", arousal)?;
        check_range("sleepiness", sleepiness)?;
        let (pleasure, misery) = renormalize_axis("valence", pleasure, misery, AXIS_SUM_SLACK)?;
        let (arousal, sleepiness) = renormalize_axis("arousal", arousal, sleepiness, AXIS_SUM_SLACK)?;
        Ok(AffectScore {
            pleasure,
            misery,
            arousal,
            sleepiness,
        })
    }

    /// Builds a score from the positive pole of each axis.
    pub fn from_poles(pleasure: f64, arousal: f64) -> Result<Self, AffectError> {
        check_range("pleasure", pleasure)?;
        check_range("arousal", arousal)?;
        Ok(AffectScore {
            pleasure,
            misery: 100.0 - pleasure,
            arousal,
            sleepiness: 100.0 - arousal,
        })
    }

    pub fn neutral() -> Self {
        AffectScore {
            pleasure: 50.0,
            misery: 50.0,
            arousal: 50.0,
            sleepiness: 50.0,
        }
    }

    pub fn pleasure(&self) -> f64 {
        self.pleasure
    }

    pub fn misery(&self) -> f64 {
        self.misery
    }

    pub fn arousal(&self) -> f64 {
        self.arousal
    }

    pub fn sleepiness(&self) -> f64 {
        self.sleepiness
    }

    /// Valence on 0 (unpleasant) ..= 100 (pleasant).
    pub fn valence(&self) -> f64 {
        self.pleasure
    }
}

/// Formats the score in the estimator's reply template, one decimal place.
impl fmt::Display for AffectScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Pleasure: {:.1}%, Misery: {:.1}%, Arousal: {:.1}%, Sleepiness: {:.1}%",
            self.pleasure, self.misery, self.arousal, self.sleepiness
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strict_constructor_rejects_slack() {
        assert!(AffectScore::new(70.0, 29.8, 40.0, 60.0).is_err());
        assert!(AffectScore::new(70.0, 30.0, 40.0, 60.0).is_ok());
        assert!(matches!(
            AffectScore::new(101.0, -1.0, 50.0, 50.0),
            Err(AffectError::OutOfRange { label: "pleasure", .. })
        ));
    }

    #[test]
    fn normalized_rescales_within_slack() {
        let s = AffectScore::normalized(70.0, 29.8, 40.0, 60.0).unwrap();
        assert!((s.pleasure() - 7000.0 / 99.8).abs() < 1e-12);
        assert!((s.misery() - 2980.0 / 99.8).abs() < 1e-12);
        assert!((s.pleasure() + s.misery() - 100.0).abs() < 1e-9);
        assert_eq!(s.arousal(), 40.0);
        assert!(AffectScore::normalized(70.0, 28.9, 40.0, 60.0).is_err());
    }

    #[test]
    fn serde_validates() {
        let ok: AffectScore =
            serde_json::from_str(r#"{"pleasure":80,"misery":20,"arousal":65.5,"sleepiness":34.5}"#).unwrap();
        assert_eq!(ok.arousal(), 65.5);
        assert!(serde_json::from_str::<AffectScore>(
            r#"{"pleasure":80,"misery":30,"arousal":50,"sleepiness":50}"#
        )
        .is_err());
    }

    #[test]
    fn display_uses_reply_template() {
        let s = AffectScore::new(80.0, 20.0, 65.5, 34.5).unwrap();
        assert_eq!(
            s.to_string(),
            "Pleasure: 80.0%, Misery: 20.0%, Arousal: 65.5%, Sleepiness: 34.5%"
        );
    }
}
