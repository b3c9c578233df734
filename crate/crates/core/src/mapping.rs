//! Affect score and utterance text to stimulus parameters.
//!
//! Valence (the pleasure percentage) sets the sine frequency linearly on
//! 60..=500 Hz, arousal sets the 16-bit peak amplitude linearly on
//! 8000..=32767, and the burst lasts 0.5 s plus 0.1 s per kana and 0.2 s per
//! kanji in the text.

use crate::affect::AffectScore;
use serde::{Deserialize, Serialize};

pub const MIN_FREQUENCY_HZ: f64 = 60.0;
pub const MAX_FREQUENCY_HZ: f64 = 500.0;
pub const MIN_AMPLITUDE: u16 = 8000;
pub const MAX_AMPLITUDE: u16 = 32767;
pub const BASE_DURATION_S: f64 = 0.5;

// Duration is accumulated in tenths of a second so that sums stay exact.
const BASE_TENTHS: u64 = 5;
const KANA_TENTHS: u64 = 1;
const KANJI_TENTHS: u64 = 2;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MappingError {
    #[error("{0} is not a finite number")]
    NonFinite(&'static str),
    #[error("invalid stimulus parameters: {0}")]
    Invalid(String),
}

/// One sine burst.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct VibrationParams {
    frequency_hz: f64,
    amplitude: u16,
    duration_s: f64,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    frequency_hz: f64,
    amplitude: u16,
    duration_s: f64,
}

impl TryFrom<RawParams> for VibrationParams {
    type Error = MappingError;
    fn try_from(r: RawParams) -> Result<Self, Self::Error> {
        VibrationParams::new(r.frequency_hz, r.amplitude, r.duration_s)
    }
}

impl From<VibrationParams> for RawParams {
    fn from(p: VibrationParams) -> Self {
        RawParams {
            frequency_hz: p.frequency_hz,
            amplitude: p.amplitude,
            duration_s: p.duration_s,
        }
    }
}

impl VibrationParams {
    pub fn new(frequency_hz: f64, amplitude: u16, duration_s: f64) -> Result<Self, MappingError> {
        if !(MIN_FREQUENCY_HZ..=MAX_FREQUENCY_HZ).contains(&frequency_hz) {
            return Err(MappingError::Invalid(format!("frequency {frequency_hz} Hz outside 60..=500")));
        }
        if !(MIN_AMPLITUDE..=MAX_AMPLITUDE).contains(&amplitude) {
            return Err(MappingError::Invalid(format!("amplitude {amplitude} outside 8000..=32767")));
        }
        if !(duration_s.is_finite() && duration_s >= BASE_DURATION_S) {
            return Err(MappingError::Invalid(format!("duration {duration_s} s below 0.5")));
        }
        Ok(VibrationParams {
            frequency_hz,
            amplitude,
            duration_s,
        })
    }

    pub fn frequency_hz(&self) -> f64 {
        self.frequency_hz
    }

    pub fn amplitude(&self) -> u16 {
        self.amplitude
    }

    pub fn duration_s(&self) -> f64 {
        self.duration_s
    }
}

fn clamp_percent(label: &'static str, x: f64) -> Result<f64, MappingError> {
    if x.is_nan() {
        return Err(MappingError::NonFinite(label));
    }
    // infinities clamp like any other out-of-range value
    Ok(x.clamp(0.0, 100.0))
}

/// Valence 0..=100 to 60..=500 Hz. Out-of-range values are clamped; NaN is
/// rejected.
pub fn valence_to_frequency(valence: f64) -> Result<f64, MappingError> {
    let v = clamp_percent("valence", valence)?;
    Ok(MIN_FREQUENCY_HZ + v * (MAX_FREQUENCY_HZ - MIN_FREQUENCY_HZ) / 100.0)
}

/// Arousal 0..=100 to a peak amplitude of 8000..=32767, rounded half-up.
pub fn arousal_to_amplitude(arousal: f64) -> Result<u16, MappingError> {
    let a = clamp_percent("arousal", arousal)?;
    let span = f64::from(MAX_AMPLITUDE - MIN_AMPLITUDE);
    let exact = f64::from(MIN_AMPLITUDE) + a * span / 100.0;
    Ok((exact + 0.5).floor() as u16)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CharClass {
    Hiragana,
    Katakana,
    Kanji,
    Other,
}

pub fn classify_char(c: char) -> CharClass {
    match c {
        '\u{3041}'..='\u{3096}' | '\u{309D}'..='\u{309F}' => CharClass::Hiragana,
        '\u{30A1}'..='\u{30FA}' | '\u{30FC}'..='\u{30FE}' => CharClass::Katakana,
        '\u{4E00}'..='\u{9FFF}' | '\u{3400}'..='\u{4DBF}' => CharClass::Kanji,
        _ => CharClass::Other,
    }
}

fn duration_tenths(text: &str) -> u64 {
    text.chars()
        .map(|c| match classify_char(c) {
            CharClass::Hiragana | CharClass::Katakana => KANA_TENTHS,
            CharClass::Kanji => KANJI_TENTHS,
            CharClass::Other => 0,
        })
        .sum()
}

/// Stimulus length in seconds for an utterance.
pub fn compute_duration(text: &str) -> f64 {
    (BASE_TENTHS + duration_tenths(text)) as f64 / 10.0
}

pub fn map_affect(score: &AffectScore, text: &str) -> Result<VibrationParams, MappingError> {
    VibrationParams::new(
        valence_to_frequency(score.valence())?,
        arousal_to_amplitude(score.arousal())?,
        compute_duration(text),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn frequency_endpoints() {
        assert_eq!(valence_to_frequency(100.0).unwrap(), 500.0);
        assert_eq!(valence_to_frequency(0.0).unwrap(), 60.0);
        assert_eq!(valence_to_frequency(50.0).unwrap(), 280.0);
        assert_eq!(valence_to_frequency(120.0).unwrap(), 500.0);
        assert_eq!(valence_to_frequency(-3.0).unwrap(), 60.0);
        assert_eq!(valence_to_frequency(f64::INFINITY).unwrap(), 500.0);
        assert!(valence_to_frequency(f64::NAN).is_err());
    }

    #[test]
    fn amplitude_endpoints() {
        assert_eq!(arousal_to_amplitude(0.0).unwrap(), 8000);
        assert_eq!(arousal_to_amplitude(100.0).unwrap(), 32767);
        // 8000 + 50 * 24767 / 100 = 20383.5
        assert_eq!(arousal_to_amplitude(50.0).unwrap(), 20384);
        assert_eq!(arousal_to_amplitude(f64::NEG_INFINITY).unwrap(), 8000);
        assert!(arousal_to_amplitude(f64::NAN).is_err());
    }

    #[test]
    fn classify() {
        assert_eq!(classify_char('あ'), CharClass::Hiragana);
        assert_eq!(classify_char('ゝ'), CharClass::Hiragana);
        assert_eq!(classify_char('ア'), CharClass::Katakana);
        assert_eq!(classify_char('ー'), CharClass::Katakana);
        assert_eq!(classify_char('・'), CharClass::Other);
        assert_eq!(classify_char('漢'), CharClass::Kanji);
        assert_eq!(classify_char('㐀'), CharClass::Kanji);
        assert_eq!(classify_char('A'), CharClass::Other);
        assert_eq!(classify_char('。'), CharClass::Other);
    }

    #[test]
    fn durations() {
        assert_eq!(compute_duration(""), 0.5);
        assert_eq!(compute_duration("こんにちは"), 1.0);
        assert_eq!(compute_duration("漢字だよ"), 1.1);
        assert_eq!(compute_duration("カタカナ"), 0.9);
        assert_eq!(compute_duration("Hello, world! 123"), 0.5);
    }

    #[test]
    fn map_examples() {
        let p = map_affect(&AffectScore::new(100.0, 0.0, 100.0, 0.0).unwrap(), "").unwrap();
        assert_eq!((p.frequency_hz(), p.amplitude(), p.duration_s()), (500.0, 32767, 0.5));
        let p = map_affect(&AffectScore::new(0.0, 100.0, 0.0, 100.0).unwrap(), "").unwrap();
        assert_eq!((p.frequency_hz(), p.amplitude(), p.duration_s()), (60.0, 8000, 0.5));
        let p = map_affect(&AffectScore::neutral(), "こんにちは").unwrap();
        assert_eq!((p.frequency_hz(), p.amplitude(), p.duration_s()), (280.0, 20384, 1.0));
    }

    #[test]
    fn params_validate() {
        assert!(VibrationParams::new(59.9, 8000, 0.5).is_err());
        assert!(VibrationParams::new(60.0, 7999, 0.5).is_err());
        assert!(VibrationParams::new(60.0, 8000, 0.4).is_err());
        assert!(VibrationParams::new(60.0, 8000, f64::NAN).is_err());
        assert!(serde_json::from_str::<VibrationParams>(r#"{"frequency_hz":600,"amplitude":9000,"duration_s":1}"#).is_err());
    }

    proptest! {
        #[test]
        fn ranges_hold(x in proptest::num::f64::ANY) {
            if x.is_nan() {
                prop_assert!(valence_to_frequency(x).is_err());
            } else {
                let f = valence_to_frequency(x).unwrap();
                let a = arousal_to_amplitude(x).unwrap();
                prop_assert!((60.0..=500.0).contains(&f));
                prop_assert!((8000..=32767).contains(&a));
            }
        }

        #[test]
        fn monotone(a in 0.0f64..100.0, b in 0.0f64..100.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            if lo < hi {
                prop_assert!(valence_to_frequency(lo).unwrap() < valence_to_frequency(hi).unwrap());
            }
            prop_assert!(arousal_to_amplitude(lo).unwrap() <= arousal_to_amplitude(hi).unwrap());
        }

        #[test]
        fn duration_additive(s1 in "[あ-んア-ン一-龥a-z ]{0,20}", s2 in "[あ-んア-ン一-龥a-z ]{0,20}") {
            let joined = format!("{s1}{s2}");
            prop_assert!((compute_duration(&joined) - (compute_duration(&s1) + compute_duration(&s2) - 0.5)).abs() < 1e-9);
        }
    }
}
