//! TOML configuration.
//!
//! ```toml
//! [audio]
//! device = "null"            # or "command:aplay -q -", or "none"
//! sample_rate = 44100
//! [audio.envelope]
//! fade_in_ms = 5.0
//! fade_out_ms = 5.0
//!
//! [estimator]
//! backend = "lexicon"        # or "remote-llm"
//! model_name = "gpt-4o-mini"
//! max_retries = 2
//! timeout_s = 30.0
//!
//! [paths]
//! prompt = "prompt_template.txt"
//! lexicon = "lexicon.tsv"
//!
//! [server]
//! port = 8080
//! ```

use crate::affect::remote::HttpTransport;
use crate::affect::{Backend, EstimateError, Estimator, EstimatorConfig, Lexicon, PromptSpec};
use crate::synth::{EnvelopeSpec, SampleRate};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AudioConfig {
    pub device: String,
    pub sample_rate: SampleRate,
    pub envelope: EnvelopeSpec,
}

impl Default for AudioConfig {
    fn default() -> Self {
        AudioConfig {
            device: "null".into(),
            sample_rate: SampleRate::Hz44100,
            envelope: EnvelopeSpec::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathsConfig {
    pub prompt: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServerConfig {
    pub port: u16,
    pub playback_expiry_s: u64,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            port: 8080,
            playback_expiry_s: 60,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub audio: AudioConfig,
    pub estimator: EstimatorConfig,
    pub paths: PathsConfig,
    pub server: ServerConfig,
}

impl Config {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        let mut config: Config = toml::from_str(text).map_err(|source| ConfigError::Parse {
            path: origin.to_path_buf(),
            source,
        })?;
        // relative asset paths are relative to the config file
        let base = origin.parent().unwrap_or(Path::new(""));
        for p in [&mut config.paths.prompt, &mut config.paths.lexicon].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text, path)
    }

    pub fn lexicon(&self) -> Result<Arc<Lexicon>, EstimateError> {
        match &self.paths.lexicon {
            Some(p) => Ok(Arc::new(Lexicon::from_file(p)?)),
            None => Ok(Lexicon::shipped()),
        }
    }

    pub fn prompt(&self) -> Result<PromptSpec, EstimateError> {
        match &self.paths.prompt {
            Some(p) => PromptSpec::from_file(p),
            None => Ok(PromptSpec::default()),
        }
    }

    /// Estimator for `backend`, or the configured one when `None`.
    pub fn estimator(&self, backend: Option<Backend>) -> Result<Estimator, EstimateError> {
        let config = EstimatorConfig {
            backend: backend.unwrap_or(self.estimator.backend),
            ..self.estimator.clone()
        };
        let lexicon = self.lexicon()?;
        match config.backend {
            Backend::Lexicon => Ok(Estimator::Lexicon(crate::affect::LexiconEstimator::new(lexicon))),
            Backend::RemoteLlm => {
                let transport = HttpTransport::from_env(&config)?;
                Estimator::with_parts(&config, lexicon, &self.prompt()?, Arc::new(transport))
            }
        }
    }
}
