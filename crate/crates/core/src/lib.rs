//! Affect-driven vibrotactile rendering.
//!
//! Utterance text is scored on the valence/arousal circumplex, the score is
//! mapped linearly onto the frequency and peak amplitude of a sine burst whose
//! length follows the character composition of the text, and the burst is
//! rendered to 16-bit PCM for playback on a tactile actuator driven as an
//! audio device. The [`session`] module runs the two-condition listening
//! protocol (with and without vibration) and aggregates SAM / IOS ratings.
//!
//! ```
//! use vibroaffect::{map_affect, AffectScore};
//!
//! let params = map_affect(&AffectScore::neutral(), "こんにちは").unwrap();
//! assert_eq!(params.frequency_hz(), 280.0);
//! assert_eq!(params.amplitude(), 20384);
//! assert!((params.duration_s() - 1.0).abs() < 1e-12);
//! ```

pub mod affect;
pub mod config;
pub mod mapping;
pub mod pipeline;
pub mod session;
pub mod synth;

pub use affect::{
    build_prompt, estimate_affect, lexicon_estimate, parse_affect_response, AffectError,
    AffectEstimator, AffectScore, Backend, EstimateError, Estimator, EstimatorConfig, Lexicon,
    PromptSpec,
};
pub use config::Config;
pub use mapping::{
    arousal_to_amplitude, classify_char, compute_duration, map_affect, valence_to_frequency,
    CharClass, MappingError, VibrationParams,
};
pub use pipeline::{Pipeline, PipelineError, Rendered, SpeakResponse, Timing};
pub use session::{
    plan_session, record_sam, run_trial, summarize, Condition, IosRecord, Phrase, PhraseSet,
    Session, SessionError, SessionPhase, SessionPlan, SummaryReport, TrialRecord, TrialStatus,
};
pub use synth::{
    apply_envelope, read_wav, synthesize, write_wav, EnvelopeSpec, SampleRate, SynthError,
    WaveBuffer,
};
