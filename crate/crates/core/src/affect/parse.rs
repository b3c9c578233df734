use super::{AffectError, AffectScore};
use regex::Regex;
use std::sync::OnceLock;

#[derive(Debug, Clone, PartialEq)]
pub enum ParseErrorKind {
    MissingLabel(&'static str),
    NonNumeric(&'static str),
    Invalid(AffectError),
}

/// Reply text that could not be turned into an [`AffectScore`]. Carries the
/// raw reply for diagnostics.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("unparseable affect reply ({kind}): {raw:?}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub raw: String,
}

impl std::fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParseErrorKind::MissingLabel(l) => write!(f, "missing `{l}`"),
            ParseErrorKind::NonNumeric(l) => write!(f, "non-numeric `{l}`"),
            ParseErrorKind::Invalid(e) => write!(f, "{e}"),
        }
    }
}

const LABELS: [&str; 4] = ["pleasure", "misery", "arousal", "sleepiness"];

fn label_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)\b(pleasure|misery|arousal|sleepiness)\s*[:：]\s*([^\s,;%、，]*)").unwrap()
    })
}

fn number_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^[+-]?(?:\d+(?:\.\d*)?|\.\d+)$").unwrap())
}

/// Extracts the four percentages from an estimator reply.
///
/// Surrounding prose is ignored; for each label the first occurrence with a
/// numeric value wins. Axes within 1.0 of 100 are renormalized, anything
/// further off is an error.
pub fn parse_affect_response(raw: &str) -> Result<AffectScore, ParseError> {
    let err = |kind| ParseError {
        kind,
        raw: raw.to_string(),
    };

    let mut values: [Option<f64>; 4] = [None; 4];
    let mut seen = [false; 4];
    for cap in label_re().captures_iter(raw) {
        let label = cap[1].to_ascii_lowercase();
        let idx = LABELS.iter().position(|l| *l == label).expect("regex alternation");
        seen[idx] = true;
        if values[idx].is_some() {
            continue;
        }
        let text = &cap[2];
        if number_re().is_match(text) {
            values[idx] = text.parse::<f64>().ok();
        }
    }

    let mut out = [0.0; 4];
    for (i, label) in LABELS.iter().enumerate() {
        out[i] = match (values[i], seen[i]) {
            (Some(v), _) => v,
            (None, true) => return Err(err(ParseErrorKind::NonNumeric(label))),
            (None, false) => return Err(err(ParseErrorKind::MissingLabel(label))),
        };
    }

    AffectScore::normalized(out[0], out[1], out[2], out[3]).map_err(|e| err(ParseErrorKind::Invalid(e)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn template_reply() {
        let s = parse_affect_response("Pleasure: 80.0%, Misery: 20.0%, Arousal: 65.5%, Sleepiness: 34.5%").unwrap();
        assert_eq!(s, AffectScore::new(80.0, 20.0, 65.5, 34.5).unwrap());
    }

    #[test]
    fn neutral_reply() {
        let s = parse_affect_response("Pleasure: 50.0%, Misery: 50.0%, Arousal: 50.0%, Sleepiness: 50.0%").unwrap();
        assert_eq!(s, AffectScore::neutral());
    }

    #[test]
    fn renormalizes_small_slack() {
        let s = parse_affect_response("Pleasure: 70.0%, Misery: 29.8%, Arousal: 40.0%, Sleepiness: 60.0%").unwrap();
        // 70 * 100 / 99.8, 29.8 * 100 / 99.8
        assert!((s.pleasure() - 70.140_280_561_122_24).abs() < 1e-9);
        assert!((s.misery() - 29.859_719_438_877_76).abs() < 1e-9);
        assert!((s.pleasure() - 70.14).abs() < 0.005);
        assert!((s.misery() - 29.86).abs() < 0.005);
    }

    #[test]
    fn tolerates_prose_and_spacing() {
        let s = parse_affect_response(
            "Sure! Here you go:\n  pleasure :  12.5 %,misery:87.5%\nAROUSAL: 30% , Sleepiness: 70.0%.\nThanks.",
        )
        .unwrap();
        assert_eq!(s.pleasure(), 12.5);
        assert_eq!(s.sleepiness(), 70.0);
    }

    #[test]
    fn errors() {
        let e = parse_affect_response("no percentages here").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::MissingLabel("pleasure"));
        assert_eq!(e.raw, "no percentages here");

        let e = parse_affect_response("Pleasure: high, Misery: 20%, Arousal: 50%, Sleepiness: 50%").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::NonNumeric("pleasure"));

        let e = parse_affect_response("Pleasure: 120%, Misery: -20%, Arousal: 50%, Sleepiness: 50%").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::Invalid(AffectError::OutOfRange { .. })));

        let e = parse_affect_response("Pleasure: 70%, Misery: 28.9%, Arousal: 50%, Sleepiness: 50%").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::Invalid(AffectError::AxisSum { .. })));

        let e = parse_affect_response("Pleasure: NaN%, Misery: inf%, Arousal: 50%, Sleepiness: 50%").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::NonNumeric("pleasure"));
    }

    #[test]
    fn displeasure_is_not_pleasure() {
        assert!(parse_affect_response("Displeasure: 10%, Misery: 90%, Arousal: 50%, Sleepiness: 50%").is_err());
    }

    fn valid(s: &AffectScore) -> bool {
        let fields = [s.pleasure(), s.misery(), s.arousal(), s.sleepiness()];
        fields.iter().all(|v| (0.0..=100.0).contains(v))
            && (s.pleasure() + s.misery() - 100.0).abs() <= 1e-6
            && (s.arousal() + s.sleepiness() - 100.0).abs() <= 1e-6
    }

    proptest! {
        #[test]
        fn round_trip(p in 0.0f64..=100.0, a in 0.0f64..=100.0) {
            let s = AffectScore::from_poles(p, a).unwrap();
            let back = parse_affect_response(&s.to_string()).unwrap();
            prop_assert!((back.pleasure() - s.pleasure()).abs() <= 0.05 + 1e-9);
            prop_assert!((back.misery() - s.misery()).abs() <= 0.05 + 1e-9);
            prop_assert!((back.arousal() - s.arousal()).abs() <= 0.05 + 1e-9);
            prop_assert!((back.sleepiness() - s.sleepiness()).abs() <= 0.05 + 1e-9);
        }

        #[test]
        fn never_returns_invalid(raw in "(?s).{0,200}") {
            if let Ok(s) = parse_affect_response(&raw) {
                prop_assert!(valid(&s));
            }
        }

        #[test]
        fn near_template_strings_are_valid_or_error(
            p in -10.0f64..120.0, m in -10.0f64..120.0, a in -10.0f64..120.0, s in -10.0f64..120.0
        ) {
            let raw = format!("Pleasure: {p:.1}%, Misery: {m:.1}%, Arousal: {a:.1}%, Sleepiness: {s:.1}%");
            if let Ok(score) = parse_affect_response(&raw) {
                prop_assert!(valid(&score));
            }
        }
    }
}
