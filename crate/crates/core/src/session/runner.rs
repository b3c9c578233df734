use super::log::SessionLog;
use super::{
    Condition, IosRecord, Phrase, PhraseSet, SessionError, SessionPlan, TrialRecord, TrialStatus,
    SAM_POINTS,
};
use crate::mapping::VibrationParams;
use crate::pipeline::PipelineError;
use chrono::Utc;
use serde::Serialize;
use std::sync::Arc;

/// What a trial needs from the rendering side.
pub trait TrialPipeline {
    /// Estimates, maps, renders and plays the stimulus for `text`, starting
    /// at speech onset.
    fn present(&self, text: &str) -> Result<VibrationParams, PipelineError>;

    /// Speech-only presentation for the no-vibration condition.
    fn speak_only(&self, _text: &str) {}
}

impl<T: TrialPipeline + ?Sized> TrialPipeline for &T {
    fn present(&self, text: &str) -> Result<VibrationParams, PipelineError> {
        (**self).present(text)
    }

    fn speak_only(&self, text: &str) {
        (**self).speak_only(text)
    }
}

/// Presents one phrase and returns a record awaiting SAM ratings, or a
/// skipped record when the stimulus could not be produced.
pub fn run_trial(
    plan: &SessionPlan,
    phrase: &Phrase,
    condition: Condition,
    pipeline: &dyn TrialPipeline,
) -> Result<TrialRecord, SessionError> {
    let order = plan
        .phrase_order(condition)
        .ok_or_else(|| SessionError::Config(format!("plan has no {condition} block")))?;
    if !order.contains(&phrase.id) {
        return Err(SessionError::Config(format!("phrase {} is not in the plan", phrase.id)));
    }
    let mut record = TrialRecord {
        participant_id: plan.participant_id.clone(),
        condition,
        phrase_id: phrase.id,
        status: TrialStatus::Pending,
        sam_valence: None,
        sam_arousal: None,
        vibration: None,
        skip_reason: None,
        timestamp: Utc::now(),
    };
    match condition {
        Condition::WithoutVibro => pipeline.speak_only(&phrase.text),
        Condition::WithVibro => match pipeline.present(&phrase.text) {
            Ok(params) => record.vibration = Some(params),
            Err(e) => {
                record.status = TrialStatus::Skipped;
                record.skip_reason = Some(e.to_string());
            }
        },
    }
    Ok(record)
}

fn check_rating(name: &str, value: u8, points: u8) -> Result<(), SessionError> {
    if (1..=points).contains(&value) {
        Ok(())
    } else {
        Err(SessionError::Validation(format!("{name} rating {value} outside 1..={points}")))
    }
}

fn complete(record: TrialRecord, valence: u8, arousal: u8, points: u8) -> Result<TrialRecord, SessionError> {
    if record.status != TrialStatus::Pending {
        return Err(SessionError::State {
            expected: "pending trial".into(),
            actual: format!("{:?} trial", record.status).to_lowercase(),
        });
    }
    check_rating("SAM valence", valence, points)?;
    check_rating("SAM arousal", arousal, points)?;
    Ok(TrialRecord {
        status: TrialStatus::Completed,
        sam_valence: Some(valence),
        sam_arousal: Some(arousal),
        timestamp: Utc::now(),
        ..record
    })
}

/// Attaches 9-point SAM ratings to a pending record.
pub fn record_sam(record: TrialRecord, valence: u8, arousal: u8) -> Result<TrialRecord, SessionError> {
    complete(record, valence, arousal, SAM_POINTS)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SessionPhase {
    Idle,
    /// Ready to present the next phrase of the current block.
    Playing,
    AwaitingSam,
    AwaitingIos,
    Done,
}

impl SessionPhase {
    fn name(self) -> &'static str {
        match self {
            SessionPhase::Idle => "idle",
            SessionPhase::Playing => "playing",
            SessionPhase::AwaitingSam => "awaiting-sam",
            SessionPhase::AwaitingIos => "awaiting-ios",
            SessionPhase::Done => "done",
        }
    }
}

/// Serializable snapshot for clients.
#[derive(Debug, Clone, Serialize)]
pub struct SessionView {
    pub participant_id: String,
    pub phase: SessionPhase,
    pub condition: Option<Condition>,
    pub block: usize,
    pub phrase_index: usize,
    pub current_phrase: Option<Phrase>,
    pub trials_done: usize,
    pub trials_total: usize,
    pub pending: Option<TrialRecord>,
    pub plan: SessionPlan,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Submission<T> {
    pub record: T,
    /// The nonce matched the previous accepted submission; nothing new was
    /// recorded.
    pub duplicate: bool,
}

/// Single-participant state machine:
/// idle → playing → awaiting-sam → (playing | awaiting-ios) → … → done.
///
/// Completed and skipped trials and IOS ratings are appended to the log as
/// they happen.
pub struct Session {
    plan: SessionPlan,
    phrases: PhraseSet,
    log: Option<Arc<SessionLog>>,
    sam_points: u8,
    phase: SessionPhase,
    block: usize,
    position: usize,
    pending: Option<TrialRecord>,
    trials: Vec<TrialRecord>,
    ios: Vec<IosRecord>,
    last_nonce: Option<(String, Resubmit)>,
}

#[derive(Debug, Clone)]
enum Resubmit {
    Sam(TrialRecord),
    Ios(IosRecord),
}

impl Session {
    pub fn new(plan: SessionPlan, phrases: PhraseSet, log: Option<Arc<SessionLog>>) -> Result<Self, SessionError> {
        plan.validate(&phrases)?;
        if let Some(log) = &log {
            log.append_plan(&plan)?;
        }
        Ok(Session {
            plan,
            phrases,
            log,
            sam_points: SAM_POINTS,
            phase: SessionPhase::Idle,
            block: 0,
            position: 0,
            pending: None,
            trials: Vec::new(),
            ios: Vec::new(),
            last_nonce: None,
        })
    }

    pub fn with_sam_points(mut self, points: u8) -> Self {
        self.sam_points = points;
        self
    }

    pub fn plan(&self) -> &SessionPlan {
        &self.plan
    }

    pub fn phase(&self) -> SessionPhase {
        self.phase
    }

    pub fn trials(&self) -> &[TrialRecord] {
        &self.trials
    }

    pub fn ios_records(&self) -> &[IosRecord] {
        &self.ios
    }

    pub fn current_condition(&self) -> Option<Condition> {
        (self.phase != SessionPhase::Done).then(|| self.plan.blocks[self.block].condition)
    }

    fn current_phrase(&self) -> Option<&Phrase> {
        if self.phase == SessionPhase::Done {
            return None;
        }
        let id = *self.plan.blocks[self.block].phrase_order.get(self.position)?;
        self.phrases.get(id)
    }

    pub fn view(&self) -> SessionView {
        SessionView {
            participant_id: self.plan.participant_id.clone(),
            phase: self.phase,
            condition: self.current_condition(),
            block: self.block,
            phrase_index: self.position,
            current_phrase: self.current_phrase().cloned(),
            trials_done: self.trials.len(),
            trials_total: self.plan.total_trials(),
            pending: self.pending.clone(),
            plan: self.plan.clone(),
        }
    }

    fn expect(&self, phases: &[SessionPhase]) -> Result<(), SessionError> {
        if phases.contains(&self.phase) {
            Ok(())
        } else {
            Err(SessionError::State {
                expected: phases.iter().map(|p| p.name()).collect::<Vec<_>>().join(" or "),
                actual: self.phase.name().into(),
            })
        }
    }

    fn persist(&self, f: impl FnOnce(&SessionLog) -> Result<(), SessionError>) -> Result<(), SessionError> {
        match &self.log {
            Some(log) => f(log),
            None => Ok(()),
        }
    }

    fn step_after_trial(&mut self) {
        self.position += 1;
        self.phase = if self.position < self.plan.blocks[self.block].phrase_order.len() {
            SessionPhase::Playing
        } else {
            SessionPhase::AwaitingIos
        };
    }

    /// Presents the next planned phrase.
    pub fn advance(&mut self, pipeline: &dyn TrialPipeline) -> Result<TrialRecord, SessionError> {
        self.expect(&[SessionPhase::Idle, SessionPhase::Playing])?;
        let condition = self.plan.blocks[self.block].condition;
        let phrase = self
            .current_phrase()
            .cloned()
            .ok_or_else(|| SessionError::Config("plan refers to an unknown phrase".into()))?;
        let record = run_trial(&self.plan, &phrase, condition, pipeline)?;
        if record.status == TrialStatus::Skipped {
            self.persist(|log| log.append_trial(&record))?;
            self.trials.push(record.clone());
            self.step_after_trial();
        } else {
            self.pending = Some(record.clone());
            self.phase = SessionPhase::AwaitingSam;
        }
        self.last_nonce = None;
        Ok(record)
    }

    pub fn record_sam(&mut self, valence: u8, arousal: u8) -> Result<TrialRecord, SessionError> {
        self.submit_sam(valence, arousal, None).map(|s| s.record)
    }

    /// Records SAM ratings. Repeating the previous nonce returns the earlier
    /// record instead of failing.
    pub fn submit_sam(&mut self, valence: u8, arousal: u8, nonce: Option<&str>) -> Result<Submission<TrialRecord>, SessionError> {
        if let (Some(n), Some((last, Resubmit::Sam(rec)))) = (nonce, &self.last_nonce) {
            if n == last {
                return Ok(Submission {
                    record: rec.clone(),
                    duplicate: true,
                });
            }
        }
        self.expect(&[SessionPhase::AwaitingSam])?;
        let pending = self.pending.clone().expect("awaiting-sam has a pending trial");
        let done = complete(pending, valence, arousal, self.sam_points)?;
        self.persist(|log| log.append_trial(&done))?;
        self.pending = None;
        self.trials.push(done.clone());
        self.step_after_trial();
        self.last_nonce = nonce.map(|n| (n.to_string(), Resubmit::Sam(done.clone())));
        Ok(Submission {
            record: done,
            duplicate: false,
        })
    }

    pub fn record_ios(&mut self, ios: u8) -> Result<IosRecord, SessionError> {
        self.submit_ios(ios, None).map(|s| s.record)
    }

    pub fn submit_ios(&mut self, ios: u8, nonce: Option<&str>) -> Result<Submission<IosRecord>, SessionError> {
        if let (Some(n), Some((last, Resubmit::Ios(rec)))) = (nonce, &self.last_nonce) {
            if n == last {
                return Ok(Submission {
                    record: rec.clone(),
                    duplicate: true,
                });
            }
        }
        self.expect(&[SessionPhase::AwaitingIos])?;
        let condition = self.plan.blocks[self.block].condition;
        let record = IosRecord::new(&self.plan.participant_id, condition, ios)?;
        self.persist(|log| log.append_ios(&record))?;
        self.ios.push(record.clone());
        if self.block + 1 < self.plan.blocks.len() {
            self.block += 1;
            self.position = 0;
            self.phase = SessionPhase::Playing;
        } else {
            self.phase = SessionPhase::Done;
        }
        self.last_nonce = nonce.map(|n| (n.to_string(), Resubmit::Ios(record.clone())));
        Ok(Submission {
            record,
            duplicate: false,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affect::EstimateError;
    use crate::session::plan_session;
    use std::cell::Cell;

    struct Fixed(VibrationParams);

    impl TrialPipeline for Fixed {
        fn present(&self, _text: &str) -> Result<VibrationParams, PipelineError> {
            Ok(self.0)
        }
    }

    struct Failing(Cell<usize>);

    impl TrialPipeline for Failing {
        fn present(&self, _text: &str) -> Result<VibrationParams, PipelineError> {
            self.0.set(self.0.get() + 1);
            Err(PipelineError::Estimate(EstimateError::Input("boom".into())))
        }
    }

    fn fixed() -> Fixed {
        Fixed(VibrationParams::new(280.0, 20384, 1.0).unwrap())
    }

    fn setup() -> (SessionPlan, PhraseSet) {
        let set = PhraseSet::shipped();
        (plan_session(0, &set, 1).unwrap(), set)
    }

    #[test]
    fn without_vibro_has_no_params() {
        let (plan, set) = setup();
        let r = run_trial(&plan, set.get(1).unwrap(), Condition::WithoutVibro, &fixed()).unwrap();
        assert_eq!(r.vibration, None);
        assert_eq!(r.status, TrialStatus::Pending);
    }

    #[test]
    fn with_vibro_carries_params() {
        let (plan, set) = setup();
        let r = run_trial(&plan, set.get(1).unwrap(), Condition::WithVibro, &fixed()).unwrap();
        assert_eq!(r.vibration, Some(fixed().0));
    }

    #[test]
    fn failed_stimulus_is_skipped() {
        let (plan, set) = setup();
        let r = run_trial(&plan, set.get(2).unwrap(), Condition::WithVibro, &Failing(Cell::new(0))).unwrap();
        assert_eq!(r.status, TrialStatus::Skipped);
        assert!(r.skip_reason.unwrap().contains("boom"));
    }

    #[test]
    fn foreign_phrase_rejected() {
        let (plan, _) = setup();
        let stranger = Phrase {
            id: 99,
            text: "?".into(),
            source: super::super::PhraseSource::Custom,
            original: None,
        };
        assert!(run_trial(&plan, &stranger, Condition::WithVibro, &fixed()).is_err());
    }

    #[test]
    fn sam_state_machine() {
        let (plan, set) = setup();
        let pending = run_trial(&plan, set.get(1).unwrap(), Condition::WithoutVibro, &fixed()).unwrap();
        let done = record_sam(pending.clone(), 5, 5).unwrap();
        assert_eq!((done.sam_valence, done.sam_arousal), (Some(5), Some(5)));
        assert_eq!(done.status, TrialStatus::Completed);
        assert!(matches!(record_sam(pending.clone(), 0, 5), Err(SessionError::Validation(_))));
        assert!(matches!(record_sam(pending, 5, 10), Err(SessionError::Validation(_))));
        assert!(matches!(record_sam(done, 4, 4), Err(SessionError::State { .. })));
    }

    #[test]
    fn full_session_walk() {
        let (plan, set) = setup();
        let mut s = Session::new(plan.clone(), set, None).unwrap();
        assert_eq!(s.phase(), SessionPhase::Idle);
        assert!(matches!(s.record_sam(5, 5), Err(SessionError::State { .. })));
        let mut presented = Vec::new();
        for block in 0..2 {
            for _ in 0..10 {
                let r = s.advance(&fixed()).unwrap();
                presented.push((r.condition, r.phrase_id));
                assert_eq!(s.phase(), SessionPhase::AwaitingSam);
                assert!(matches!(s.advance(&fixed()), Err(SessionError::State { .. })));
                s.record_sam(3, 7).unwrap();
            }
            assert_eq!(s.phase(), SessionPhase::AwaitingIos);
            s.record_ios(4 + block as u8).unwrap();
        }
        assert_eq!(s.phase(), SessionPhase::Done);
        assert_eq!(s.trials().len(), 20);
        assert_eq!(s.ios_records().len(), 2);
        let expected: Vec<(Condition, u32)> = plan
            .blocks
            .iter()
            .flat_map(|b| b.phrase_order.iter().map(move |id| (b.condition, *id)))
            .collect();
        assert_eq!(presented, expected);
        for t in s.trials() {
            assert_eq!(t.vibration.is_some(), t.condition == Condition::WithVibro);
        }
    }

    #[test]
    fn skipped_trials_do_not_wait_for_sam() {
        let (plan, set) = setup();
        let mut s = Session::new(plan, set, None).unwrap();
        let failing = Failing(Cell::new(0));
        // participant 0 starts with vibration; every trial in that block fails
        for _ in 0..10 {
            let r = s.advance(&failing).unwrap();
            assert_eq!(r.status, TrialStatus::Skipped);
        }
        assert_eq!(s.phase(), SessionPhase::AwaitingIos);
        assert_eq!(failing.0.get(), 10);
        assert_eq!(s.trials().len(), 10);
    }

    #[test]
    fn nonce_makes_submission_idempotent() {
        let (plan, set) = setup();
        let mut s = Session::new(plan, set, None).unwrap();
        s.advance(&fixed()).unwrap();
        let a = s.submit_sam(4, 6, Some("n1")).unwrap();
        let b = s.submit_sam(4, 6, Some("n1")).unwrap();
        assert!(!a.duplicate && b.duplicate);
        assert_eq!(a.record, b.record);
        assert_eq!(s.trials().len(), 1);
        assert!(s.submit_sam(4, 6, Some("n2")).is_err());
    }

    #[test]
    fn custom_sam_scale() {
        let (plan, set) = setup();
        let mut s = Session::new(plan, set, None).unwrap().with_sam_points(5);
        s.advance(&fixed()).unwrap();
        assert!(matches!(s.record_sam(6, 3), Err(SessionError::Validation(_))));
        s.record_sam(5, 3).unwrap();
    }
}
