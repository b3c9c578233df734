//! Sine-burst rendering to 16-bit mono PCM, WAV I/O and device playback.

pub mod playback;
mod wav;

pub use playback::{
    AudioBackend, AudioDevice, BackendReport, CommandBackend, DeviceError, NullBackend, NullSink,
    PlaybackHandle, PlaybackOutcome, PlaybackReport, StartSignal,
};
pub use wav::{decode_wav, encode_wav, read_wav, write_wav, WavError, WAV_HEADER_LEN};

use crate::mapping::VibrationParams;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum SampleRate {
    #[default]
    Hz44100,
    Hz48000,
}

impl SampleRate {
    pub fn hz(self) -> u32 {
        match self {
            SampleRate::Hz44100 => 44_100,
            SampleRate::Hz48000 => 48_000,
        }
    }
}

impl TryFrom<u32> for SampleRate {
    type Error = SynthError;
    fn try_from(hz: u32) -> Result<Self, Self::Error> {
        match hz {
            44_100 => Ok(SampleRate::Hz44100),
            48_000 => Ok(SampleRate::Hz48000),
            other => Err(SynthError::SampleRate(other)),
        }
    }
}

impl From<SampleRate> for u32 {
    fn from(r: SampleRate) -> u32 {
        r.hz()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("unsupported sample rate {0} Hz (44100 or 48000)")]
    SampleRate(u32),
    #[error("{frequency} Hz is at or above Nyquist for {rate} Hz")]
    Aliasing { frequency: f64, rate: u32 },
    #[error("envelope needs {needed} samples, buffer has {len}")]
    EnvelopeTooLong { needed: usize, len: usize },
    #[error("invalid envelope: {0}")]
    Envelope(String),
}

/// Mono signed 16-bit samples at a fixed rate. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WaveBuffer {
    samples: Vec<i16>,
    sample_rate: SampleRate,
}

impl WaveBuffer {
    pub fn new(samples: Vec<i16>, sample_rate: SampleRate) -> Self {
        WaveBuffer { samples, sample_rate }
    }

    pub fn samples(&self) -> &[i16] {
        &self.samples
    }

    pub fn sample_rate(&self) -> SampleRate {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate.hz())
    }

    pub fn into_samples(self) -> Vec<i16> {
        self.samples
    }
}

/// Renders `amplitude * sin(2π f n / rate)`, starting at phase 0, for
/// `round(duration * rate)` samples.
pub fn synthesize(params: &VibrationParams, sample_rate: SampleRate) -> Result<WaveBuffer, SynthError> {
    let rate = f64::from(sample_rate.hz());
    let frequency = params.frequency_hz();
    if frequency >= rate / 2.0 {
        return Err(SynthError::Aliasing {
            frequency,
            rate: sample_rate.hz(),
        });
    }
    let len = (params.duration_s() * rate).round() as usize;
    let amplitude = f64::from(params.amplitude());
    let step = 2.0 * PI * frequency / rate;
    let samples = (0..len)
        .map(|n| {
            let v = (amplitude * (step * n as f64).sin()).round();
            v.clamp(-32767.0, 32767.0) as i16
        })
        .collect();
    Ok(WaveBuffer::new(samples, sample_rate))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvelopeShape {
    #[default]
    RaisedCosine,
}

/// Onset/offset ramps in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSpec {
    pub fade_in_ms: f64,
    pub fade_out_ms: f64,
    #[serde(default)]
    pub shape: EnvelopeShape,
}

impl Default for EnvelopeSpec {
    fn default() -> Self {
        EnvelopeSpec {
            fade_in_ms: 5.0,
            fade_out_ms: 5.0,
            shape: EnvelopeShape::RaisedCosine,
        }
    }
}

impl EnvelopeSpec {
    pub const NONE: EnvelopeSpec = EnvelopeSpec {
        fade_in_ms: 0.0,
        fade_out_ms: 0.0,
        shape: EnvelopeShape::RaisedCosine,
    };

    /// Ramp lengths in samples, `round(ms * rate / 1000)` each.
    pub fn ramp_samples(&self, sample_rate: SampleRate) -> Result<(usize, usize), SynthError> {
        let to_samples = |ms: f64| {
            if ms.is_finite() && ms >= 0.0 {
                Ok((ms * f64::from(sample_rate.hz()) / 1000.0).round() as usize)
            } else {
                Err(SynthError::Envelope(format!("fade of {ms} ms")))
            }
        };
        Ok((to_samples(self.fade_in_ms)?, to_samples(self.fade_out_ms)?))
    }
}

/// Raised-cosine gain at position `i` of an `n`-sample ramp, 0 at `i = 0`.
fn ramp_gain(i: usize, n: usize) -> f64 {
    0.5 * (1.0 - (PI * i as f64 / n as f64).cos())
}

/// Multiplies the first and last samples by raised-cosine ramps. Samples
/// outside the ramps are untouched.
pub fn apply_envelope(buf: &WaveBuffer, env: &EnvelopeSpec) -> Result<WaveBuffer, SynthError> {
    let (fade_in, fade_out) = env.ramp_samples(buf.sample_rate())?;
    let len = buf.len();
    if fade_in + fade_out > len {
        return Err(SynthError::EnvelopeTooLong {
            needed: fade_in + fade_out,
            len,
        });
    }
    let mut samples = buf.samples().to_vec();
    let scale = |s: i16, g: f64| (f64::from(s) * g).round() as i16;
    for (i, s) in samples[..fade_in].iter_mut().enumerate() {
        *s = scale(*s, ramp_gain(i, fade_in));
    }
    for j in 0..fade_out {
        let idx = len - 1 - j;
        samples[idx] = scale(samples[idx], ramp_gain(j, fade_out));
    }
    Ok(WaveBuffer::new(samples, buf.sample_rate()))
}

/// [`synthesize`] followed by [`apply_envelope`].
pub fn render(params: &VibrationParams, sample_rate: SampleRate, env: &EnvelopeSpec) -> Result<WaveBuffer, SynthError> {
    apply_envelope(&synthesize(params, sample_rate)?, env)
}
