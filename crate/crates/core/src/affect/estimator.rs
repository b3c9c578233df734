use super::lexicon::Lexicon;
use super::parse::{parse_affect_response, ParseError};
use super::prompt::{build_prompt, PromptSpec};
use super::remote::{ChatMessage, ChatRequest, ChatTransport, HttpTransport, TransportError};
use super::AffectScore;
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use std::time::Duration;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    #[serde(alias = "llm")]
    RemoteLlm,
    Lexicon,
}

impl std::str::FromStr for Backend {
    type Err = EstimateError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "llm" | "remote-llm" => Ok(Backend::RemoteLlm),
            "lexicon" => Ok(Backend::Lexicon),
            other => Err(EstimateError::Config(format!("unknown estimator backend `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorConfig {
    pub backend: Backend,
    pub model_name: String,
    pub endpoint_url: String,
    pub max_retries: u32,
    /// Per-request timeout in seconds.
    pub timeout_s: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            backend: Backend::Lexicon,
            model_name: "gpt-4o-mini".into(),
            endpoint_url: "https://api.openai.com/v1/chat/completions".into(),
            max_retries: 2,
            timeout_s: 30.0,
        }
    }
}

impl EstimatorConfig {
    pub fn lexicon() -> Self {
        Self::default()
    }

    pub fn remote() -> Self {
        EstimatorConfig {
            backend: Backend::RemoteLlm,
            ..Self::default()
        }
    }

    pub fn timeout(&self) -> Result<Duration, EstimateError> {
        if self.timeout_s.is_finite() && self.timeout_s > 0.0 {
            Ok(Duration::from_secs_f64(self.timeout_s))
        } else {
            Err(EstimateError::Config(format!("timeout must be > 0 s, got {}", self.timeout_s)))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureCause {
    Transport,
    Parse,
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum EstimateError {
    #[error("input error: {0}")]
    Input(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("estimation failed after {attempts} attempt(s), last {cause:?} failure: {last}")]
    Exhausted {
        attempts: u32,
        cause: FailureCause,
        last: String,
    },
}

impl EstimateError {
    /// Cause class of an exhausted remote estimate.
    pub fn cause(&self) -> Option<FailureCause> {
        match self {
            EstimateError::Exhausted { cause, .. } => Some(*cause),
            _ => None,
        }
    }
}

pub trait AffectEstimator: Send + Sync {
    fn estimate(&self, text: &str) -> Result<AffectScore, EstimateError>;
}

impl<F> AffectEstimator for F
where
    F: Fn(&str) -> Result<AffectScore, EstimateError> + Send + Sync,
{
    fn estimate(&self, text: &str) -> Result<AffectScore, EstimateError> {
        self(text)
    }
}

#[derive(Debug, Clone)]
pub struct LexiconEstimator {
    lexicon: Arc<Lexicon>,
}

impl LexiconEstimator {
    pub fn new(lexicon: Arc<Lexicon>) -> Self {
        LexiconEstimator { lexicon }
    }
}

impl Default for LexiconEstimator {
    fn default() -> Self {
        Self::new(Lexicon::shipped())
    }
}

impl AffectEstimator for LexiconEstimator {
    fn estimate(&self, text: &str) -> Result<AffectScore, EstimateError> {
        self.lexicon.estimate(text)
    }
}

/// Chat-completion estimator. Every attempt sends the same request; both
/// transport and parse failures are retried up to `max_retries` times.
pub struct RemoteEstimator {
    system_prompt: String,
    config: EstimatorConfig,
    transport: Arc<dyn ChatTransport>,
}

impl RemoteEstimator {
    pub fn new(config: EstimatorConfig, prompt: &PromptSpec, transport: Arc<dyn ChatTransport>) -> Result<Self, EstimateError> {
        config.timeout()?;
        Ok(RemoteEstimator {
            system_prompt: build_prompt(prompt)?,
            config,
            transport,
        })
    }

    pub fn request(&self, text: &str) -> ChatRequest {
        ChatRequest {
            model: self.config.model_name.clone(),
            messages: vec![
                ChatMessage::system(&self.system_prompt),
                ChatMessage::user(text),
            ],
            temperature: 0.0,
        }
    }
}

impl AffectEstimator for RemoteEstimator {
    fn estimate(&self, text: &str) -> Result<AffectScore, EstimateError> {
        let text = text.trim();
        if text.is_empty() {
            return Err(EstimateError::Input("utterance is empty".into()));
        }
        let request = self.request(text);
        let attempts = self.config.max_retries.saturating_add(1);
        let mut last = (FailureCause::Transport, String::new());
        for _ in 0..attempts {
            match self.transport.complete(&request) {
                Ok(reply) => match parse_affect_response(&reply) {
                    Ok(score) => return Ok(score),
                    Err(ParseError { kind, raw }) => last = (FailureCause::Parse, format!("{kind}: {raw:?}")),
                },
                Err(TransportError(msg)) => last = (FailureCause::Transport, msg),
            }
        }
        Err(EstimateError::Exhausted {
            attempts,
            cause: last.0,
            last: last.1,
        })
    }
}

/// Estimator selected by [`EstimatorConfig::backend`].
pub enum Estimator {
    Lexicon(LexiconEstimator),
    Remote(RemoteEstimator),
}

impl Estimator {
    /// Shipped lexicon and prompt; remote requests go over HTTPS with the
    /// key from `AFFECT_API_KEY`.
    pub fn from_config(config: &EstimatorConfig) -> Result<Self, EstimateError> {
        match config.backend {
            Backend::Lexicon => Ok(Estimator::Lexicon(LexiconEstimator::default())),
            Backend::RemoteLlm => {
                let transport = HttpTransport::from_env(config)?;
                Self::with_parts(config, Lexicon::shipped(), &PromptSpec::default(), Arc::new(transport))
            }
        }
    }

    pub fn with_parts(
        config: &EstimatorConfig,
        lexicon: Arc<Lexicon>,
        prompt: &PromptSpec,
        transport: Arc<dyn ChatTransport>,
    ) -> Result<Self, EstimateError> {
        config.timeout()?;
        Ok(match config.backend {
            Backend::Lexicon => Estimator::Lexicon(LexiconEstimator::new(lexicon)),
            Backend::RemoteLlm => Estimator::Remote(RemoteEstimator::new(config.clone(), prompt, transport)?),
        })
    }
}

impl AffectEstimator for Estimator {
    fn estimate(&self, text: &str) -> Result<AffectScore, EstimateError> {
        match self {
            Estimator::Lexicon(e) => e.estimate(text),
            Estimator::Remote(e) => e.estimate(text),
        }
    }
}

/// One-shot estimate with the backend named in `config`.
pub fn estimate_affect(text: &str, config: &EstimatorConfig) -> Result<AffectScore, EstimateError> {
    if text.trim().is_empty() {
        return Err(EstimateError::Input("utterance is empty".into()));
    }
    Estimator::from_config(config)?.estimate(text)
}
