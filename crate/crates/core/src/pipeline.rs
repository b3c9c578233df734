//! Text in, stimulus out: estimate → map → synthesize → (play).

use crate::affect::{AffectEstimator, AffectScore, EstimateError};
use crate::mapping::{map_affect, MappingError, VibrationParams};
use crate::session::TrialPipeline;
use crate::synth::{
    encode_wav, render, AudioDevice, DeviceError, EnvelopeSpec, PlaybackHandle, SampleRate,
    StartSignal, SynthError, WaveBuffer,
};
use base64::Engine;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("input error: {0}")]
    Input(String),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error(transparent)]
    Mapping(#[from] MappingError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Device(#[from] DeviceError),
}

/// Marks speech onset. The robot/TTS side implements this; the default fires
/// immediately.
pub trait SpeechOnset: Send + Sync {
    fn speak(&self, text: &str, onset: &StartSignal);
}

#[derive(Debug, Default, Clone, Copy)]
pub struct ImmediateOnset;

impl SpeechOnset for ImmediateOnset {
    fn speak(&self, _text: &str, onset: &StartSignal) {
        onset.fire();
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub affect: AffectScore,
    pub params: VibrationParams,
    pub buffer: WaveBuffer,
    pub synthesized_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub duration_s: f64,
    pub synthesized_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakResponse {
    pub affect: AffectScore,
    pub params: VibrationParams,
    /// Base64 of a complete WAV file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wav: Option<String>,
    pub timing: Timing,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub playback_id: Option<String>,
}

impl SpeakResponse {
    pub fn new(rendered: &Rendered, include_wav: bool, playback_id: Option<String>) -> Self {
        SpeakResponse {
            affect: rendered.affect,
            params: rendered.params,
            wav: include_wav.then(|| base64::engine::general_purpose::STANDARD.encode(encode_wav(&rendered.buffer))),
            timing: Timing {
                duration_s: rendered.params.duration_s(),
                synthesized_at: rendered.synthesized_at,
            },
            playback_id,
        }
    }

    /// Whether `params` is what the mapping gives for `affect` and `text`.
    pub fn is_consistent(&self, text: &str) -> bool {
        map_affect(&self.affect, text).is_ok_and(|p| p == self.params)
    }

    pub fn decode_wav(&self) -> Option<Vec<u8>> {
        self.wav
            .as_ref()
            .and_then(|w| base64::engine::general_purpose::STANDARD.decode(w).ok())
    }
}

#[derive(Clone)]
pub struct Pipeline {
    estimator: Arc<dyn AffectEstimator>,
    sample_rate: SampleRate,
    envelope: EnvelopeSpec,
    device: Option<Arc<AudioDevice>>,
    onset: Arc<dyn SpeechOnset>,
}

impl Pipeline {
    pub fn new(estimator: Arc<dyn AffectEstimator>) -> Self {
        Pipeline {
            estimator,
            sample_rate: SampleRate::default(),
            envelope: EnvelopeSpec::default(),
            device: None,
            onset: Arc::new(ImmediateOnset),
        }
    }

    pub fn with_sample_rate(mut self, rate: SampleRate) -> Self {
        self.sample_rate = rate;
        self
    }

    pub fn with_envelope(mut self, env: EnvelopeSpec) -> Self {
        self.envelope = env;
        self
    }

    pub fn with_device(mut self, device: Arc<AudioDevice>) -> Self {
        self.device = Some(device);
        self
    }

    pub fn with_onset(mut self, onset: Arc<dyn SpeechOnset>) -> Self {
        self.onset = onset;
        self
    }

    pub fn device(&self) -> Option<&Arc<AudioDevice>> {
        self.device.as_ref()
    }

    pub fn sample_rate(&self) -> SampleRate {
        self.sample_rate
    }

    pub fn estimate(&self, text: &str) -> Result<AffectScore, PipelineError> {
        if text.trim().is_empty() {
            return Err(PipelineError::Input("text is empty".into()));
        }
        Ok(self.estimator.estimate(text)?)
    }

    /// Map and synthesize for a known affect score (no estimator call).
    pub fn render_affect(&self, affect: AffectScore, text: &str) -> Result<Rendered, PipelineError> {
        let params = map_affect(&affect, text)?;
        let buffer = render(&params, self.sample_rate, &self.envelope)?;
        Ok(Rendered {
            affect,
            params,
            buffer,
            synthesized_at: Utc::now(),
        })
    }

    pub fn render(&self, text: &str) -> Result<Rendered, PipelineError> {
        let affect = self.estimate(text)?;
        self.render_affect(affect, text)
    }

    /// Queues the stimulus on the device; it starts when `signal` fires.
    pub fn enqueue(&self, rendered: &Rendered, signal: StartSignal) -> Result<PlaybackHandle, PipelineError> {
        let device = self
            .device
            .as_ref()
            .ok_or_else(|| DeviceError::Unavailable("no audio device configured".into()))?;
        Ok(device.enqueue(rendered.buffer.clone(), signal)?)
    }
}

impl TrialPipeline for Pipeline {
    fn present(&self, text: &str) -> Result<VibrationParams, PipelineError> {
        let rendered = self.render(text)?;
        let signal = StartSignal::new();
        let handle = self.enqueue(&rendered, signal.clone())?;
        self.onset.speak(text, &signal);
        handle.wait()?;
        Ok(rendered.params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affect::LexiconEstimator;
    use crate::synth::{decode_wav, NullBackend};

    fn neutral() -> Arc<dyn AffectEstimator> {
        Arc::new(|_: &str| Ok(AffectScore::neutral()))
    }

    #[test]
    fn neutral_stub_maps_to_midpoints() {
        let r = Pipeline::new(neutral()).render("こんにちは").unwrap();
        assert_eq!(r.params, VibrationParams::new(280.0, 20384, 1.0).unwrap());
        assert_eq!(r.buffer.len(), 44100);
    }

    #[test]
    fn response_embeds_decodable_wav() {
        let p = Pipeline::new(Arc::new(LexiconEstimator::default()));
        let text = "It was a calm day today.";
        let r = p.render(text).unwrap();
        let resp = SpeakResponse::new(&r, true, None);
        assert!(resp.is_consistent(text));
        let wav = decode_wav(&resp.decode_wav().unwrap()).unwrap();
        assert_eq!(wav.len(), (resp.params.duration_s() * 44100.0).round() as usize);
        let json = serde_json::to_value(&resp).unwrap();
        assert!(json.get("playback_id").is_none());
        assert_eq!(json["timing"]["duration_s"], 0.5);
        let back: SpeakResponse = serde_json::from_str(&json.to_string()).unwrap();
        assert_eq!(back, resp);
        assert!(back.is_consistent(text));
    }

    #[test]
    fn empty_text() {
        assert!(matches!(Pipeline::new(neutral()).render("  "), Err(PipelineError::Input(_))));
    }

    #[test]
    fn present_plays_through_device() {
        let backend = NullBackend::new();
        let sink = backend.sink();
        let p = Pipeline::new(neutral()).with_device(Arc::new(AudioDevice::open(Box::new(backend))));
        let params = p.present("漢字だよ").unwrap();
        assert_eq!(params.duration_s(), 1.1);
        assert_eq!(sink.played()[0].len(), 48510);
    }

    #[test]
    fn present_without_device_fails() {
        let p = Pipeline::new(neutral());
        assert!(matches!(p.present("hi"), Err(PipelineError::Device(DeviceError::Unavailable(_)))));
    }
}
