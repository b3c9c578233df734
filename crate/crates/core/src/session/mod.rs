//! Two-condition listening sessions.
//!
//! Each participant hears every phrase once with vibration and once without,
//! in two blocks. Even participant indices start with the vibration block,
//! odd ones without. Phrase order is shuffled independently per block from a
//! seeded RNG, so a plan is reproducible from `(participant_index, seed)`.
//! After every phrase the participant gives SAM valence/arousal ratings; after
//! every block an IOS rating.

mod log;
mod runner;
mod summary;

pub use log::{LogContents, LogEntry, LogError, SessionLog, LOG_SCHEMA_VERSION};
pub use runner::{
    record_sam, run_trial, Session, SessionPhase, SessionView, Submission, TrialPipeline,
};
pub use summary::{
    summarize, write_summary_csv, ConditionSummary, IosSummary, PhraseCounts, RatingStats,
    SummaryReport,
};

use chrono::{DateTime, Utc};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::path::Path;

use crate::mapping::VibrationParams;

pub const SAM_POINTS: u8 = 9;
pub const IOS_POINTS: u8 = 7;

pub const DEFAULT_PHRASES: &str = include_str!("../../assets/phrases.json");

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SessionError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("state error: expected {expected}, session is {actual}")]
    State { expected: String, actual: String },
    #[error("session log: {0}")]
    Log(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Condition {
    WithVibro,
    WithoutVibro,
}

impl Condition {
    pub const ALL: [Condition; 2] = [Condition::WithVibro, Condition::WithoutVibro];

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::WithVibro => "with-vibro",
            Condition::WithoutVibro => "without-vibro",
        }
    }
}

impl std::fmt::Display for Condition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhraseSource {
    /// One of the ten shipped study phrases.
    Standard,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Phrase {
    pub id: u32,
    pub text: String,
    pub source: PhraseSource,
    /// Original-language wording, when the presented text is a translation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub original: Option<String>,
}

/// Non-empty list of phrases with unique ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct PhraseSet(Vec<Phrase>);

impl<'de> Deserialize<'de> for PhraseSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        PhraseSet::new(Vec::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

impl PhraseSet {
    pub fn new(phrases: Vec<Phrase>) -> Result<Self, SessionError> {
        if phrases.is_empty() {
            return Err(SessionError::Config("phrase set is empty".into()));
        }
        let mut ids = HashSet::new();
        for p in &phrases {
            if !ids.insert(p.id) {
                return Err(SessionError::Config(format!("duplicate phrase id {}", p.id)));
            }
        }
        Ok(PhraseSet(phrases))
    }

    /// The ten listening phrases in English.
    pub fn shipped() -> Self {
        Self::from_json(DEFAULT_PHRASES).expect("shipped phrase set parses")
    }

    pub fn from_json(text: &str) -> Result<Self, SessionError> {
        serde_json::from_str(text).map_err(|e| SessionError::Config(format!("phrase set: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self, SessionError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SessionError::Config(format!("phrase set {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn phrases(&self) -> &[Phrase] {
        &self.0
    }

    pub fn get(&self, id: u32) -> Option<&Phrase> {
        self.0.iter().find(|p| p.id == id)
    }

    pub fn ids(&self) -> Vec<u32> {
        self.0.iter().map(|p| p.id).collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub condition: Condition,
    pub phrase_order: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionPlan {
    pub participant_id: String,
    pub participant_index: u32,
    pub rng_seed: u64,
    /// Presentation order: two blocks, one per condition.
    pub blocks: Vec<Block>,
}

impl SessionPlan {
    pub fn condition_order(&self) -> Vec<Condition> {
        self.blocks.iter().map(|b| b.condition).collect()
    }

    pub fn phrase_order(&self, condition: Condition) -> Option<&[u32]> {
        self.blocks
            .iter()
            .find(|b| b.condition == condition)
            .map(|b| b.phrase_order.as_slice())
    }

    pub fn total_trials(&self) -> usize {
        self.blocks.iter().map(|b| b.phrase_order.len()).sum()
    }

    pub fn validate(&self, phrases: &PhraseSet) -> Result<(), SessionError> {
        let mut conds: Vec<Condition> = self.condition_order();
        conds.sort();
        if conds != Condition::ALL {
            return Err(SessionError::Config("plan must contain each condition exactly once".into()));
        }
        let mut expected = phrases.ids();
        expected.sort_unstable();
        for b in &self.blocks {
            let mut got = b.phrase_order.clone();
            got.sort_unstable();
            if got != expected {
                return Err(SessionError::Config(format!(
                    "{} phrase order is not a permutation of the phrase set",
                    b.condition
                )));
            }
        }
        Ok(())
    }
}

pub fn participant_id(index: u32) -> String {
    format!("P{:02}", index + 1)
}

fn rng_for(participant_index: u32, seed: u64) -> ChaCha8Rng {
    // distinct stream per participant under one session seed
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..12].copy_from_slice(&participant_index.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Counterbalanced, seeded plan for one participant.
pub fn plan_session(participant_index: u32, phrases: &PhraseSet, seed: u64) -> Result<SessionPlan, SessionError> {
    if phrases.is_empty() {
        return Err(SessionError::Config("phrase set is empty".into()));
    }
    let mut rng = rng_for(participant_index, seed);
    let mut shuffled = |_: Condition| {
        let mut ids = phrases.ids();
        ids.shuffle(&mut rng);
        ids
    };
    // draw in a fixed condition order so the shuffles do not depend on
    // which block comes first
    let with = shuffled(Condition::WithVibro);
    let without = shuffled(Condition::WithoutVibro);
    let with = Block {
        condition: Condition::WithVibro,
        phrase_order: with,
    };
    let without = Block {
        condition: Condition::WithoutVibro,
        phrase_order: without,
    };
    let blocks = if participant_index.is_multiple_of(2) {
        vec![with, without]
    } else {
        vec![without, with]
    };
    Ok(SessionPlan {
        participant_id: participant_id(participant_index),
        participant_index,
        rng_seed: seed,
        blocks,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialStatus {
    Pending,
    Completed,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub participant_id: String,
    pub condition: Condition,
    pub phrase_id: u32,
    pub status: TrialStatus,
    pub sam_valence: Option<u8>,
    pub sam_arousal: Option<u8>,
    pub vibration: Option<VibrationParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skip_reason: Option<String>,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IosRecord {
    pub participant_id: String,
    pub condition: Condition,
    pub ios: u8,
    pub timestamp: DateTime<Utc>,
}

impl IosRecord {
    pub fn new(participant_id: &str, condition: Condition, ios: u8) -> Result<Self, SessionError> {
        if !(1..=IOS_POINTS).contains(&ios) {
            return Err(SessionError::Validation(format!("IOS rating {ios} outside 1..={IOS_POINTS}")));
        }
        Ok(IosRecord {
            participant_id: participant_id.to_string(),
            condition,
            ios,
            timestamp: Utc::now(),
        })
    }
}
