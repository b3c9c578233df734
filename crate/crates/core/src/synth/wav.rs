//! Canonical 44-byte-header RIFF/WAVE, PCM 16-bit mono, little-endian.

use super::{SampleRate, WaveBuffer};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

pub const WAV_HEADER_LEN: usize = 44;

#[derive(Debug, thiserror::Error)]
pub enum WavError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("malformed WAV: {0}")]
    Format(String),
}

pub fn encode_wav(buf: &WaveBuffer) -> Vec<u8> {
    let data_len = (buf.len() * 2) as u32;
    let rate = buf.sample_rate().hz();
    let mut out = Vec::with_capacity(WAV_HEADER_LEN + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&rate.to_le_bytes());
    out.extend_from_slice(&(rate * 2).to_le_bytes()); // byte rate
    out.extend_from_slice(&2u16.to_le_bytes()); // block align
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for s in buf.samples() {
        out.extend_from_slice(&s.to_le_bytes());
    }
    out
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

/// Reads PCM 16-bit mono WAV. Unknown chunks between `fmt ` and `data` are
/// skipped.
pub fn decode_wav(bytes: &[u8]) -> Result<WaveBuffer, WavError> {
    let bad = |m: &str| WavError::Format(m.to_string());
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(bad("missing RIFF/WAVE signature"));
    }
    let mut pos = 12;
    let mut rate = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body = pos + 8;
        let end = body.checked_add(size).filter(|e| *e <= bytes.len()).ok_or_else(|| bad("chunk overruns file"))?;
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(bad("fmt chunk too short"));
                }
                let (format, channels, bits) = (u16_at(bytes, body), u16_at(bytes, body + 2), u16_at(bytes, body + 14));
                if (format, channels, bits) != (1, 1, 16) {
                    return Err(WavError::Format(format!(
                        "need PCM 16-bit mono, got format {format}, {channels} channel(s), {bits} bits"
                    )));
                }
                let hz = u32_at(bytes, body + 4);
                rate = Some(SampleRate::try_from(hz).map_err(|e| WavError::Format(e.to_string()))?);
            }
            b"data" => {
                let rate = rate.ok_or_else(|| bad("data chunk before fmt chunk"))?;
                if !size.is_multiple_of(2) {
                    return Err(bad("odd data length"));
                }
                let samples = bytes[body..end]
                    .chunks_exact(2)
                    .map(|c| i16::from_le_bytes([c[0], c[1]]))
                    .collect();
                return Ok(WaveBuffer::new(samples, rate));
            }
            _ => {}
        }
        pos = end + (size & 1);
    }
    Err(bad("no data chunk"))
}

pub fn write_wav(buf: &WaveBuffer, path: impl AsRef<Path>) -> Result<(), WavError> {
    let path = path.as_ref();
    fs::write(path, encode_wav(buf)).map_err(|source| WavError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<WaveBuffer, WavError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| WavError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_wav(&bytes)
}
