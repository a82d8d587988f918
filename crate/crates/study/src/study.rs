//! One study: its plan, its event log, and the participant sessions.
//!
//! Every mutation is logged before it becomes visible. Session-level work
//! (including model retraining) runs under that session's own lock, so one
//! participant's retrain never blocks another participant's requests.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, MutexGuard, RwLock};

use anncur_core::curriculum::CurriculumState;
use anncur_core::rng;
use anncur_core::textfeat::fnv1a;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{GroupPlan, Plan, StudyConfig};
use crate::error::StudyError;
use crate::export::{ExportHeader, ExportRow};
use crate::store::{EventKind, EventLog, EventRecord, StoreError};

const SALT_BLOCK: u64 = 0x424c_4f43_4b;
const SALT_SID: u64 = 0x5349_44;
const SALT_PARTICIPANT: u64 = 0x5041_5254;
const SALT_CHOICES: u64 = 0x4348_4f49_4345;
const SALT_CURRICULUM: u64 = 0x4355_5252;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rating {
    VeryEasy,
    Easy,
    Moderate,
    Difficult,
    VeryDifficult,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrderingPreference {
    NoChange,
    EasyFirst,
    DifficultFirst,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cefr {
    A1,
    A2,
    B1,
    B2,
    C1,
    C2,
}

/// Post-study questionnaire. PQ1 to PQ3 are required.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuestionnaireResponse {
    /// How difficult was the overall task.
    pub pq1_difficulty: Rating,
    /// Were differences in difficulty between instances noticed.
    pub pq2_noticed_differences: bool,
    #[serde(default)]
    pub pq2_details: String,
    /// Would a different ordering have been preferred.
    pub pq3_ordering: OrderingPreference,
    #[serde(default)]
    pub pq3_details: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cefr_level: Option<Cefr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub years_of_english: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub studies_participated: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub studies_conducted: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationEvent {
    pub instance_id: String,
    /// 1-based position in the session.
    pub rank: usize,
    pub difficulty: u8,
    pub choice_order: Vec<String>,
    pub choice: String,
    pub correct: bool,
    pub elapsed_ms: u64,
    pub received_at: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Presented {
    pub instance_id: String,
    pub text: String,
    /// Render in exactly this order.
    pub choices: Vec<String>,
    /// 1-based position of this instance.
    pub position: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Next {
    Instance(Presented),
    Done { total: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Registration {
    pub sid: String,
    pub total: usize,
    pub consent_text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ack {
    /// Annotations completed so far.
    pub position: usize,
    pub total: usize,
    pub done: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RegisteredPayload {
    sid: String,
    key: String,
    participant: String,
    group: String,
    ordinal: u64,
    consent_at: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct AnnotationPayload {
    sid: String,
    instance_id: String,
    rank: usize,
    difficulty: u8,
    choice_order: Vec<String>,
    choice: String,
    correct: bool,
    elapsed_ms: u64,
}

#[derive(Debug)]
pub struct Session {
    pub sid: String,
    key: String,
    pub participant: String,
    pub group: usize,
    ordinal: u64,
    pub consent_at: String,
    position: usize,
    curriculum: Option<CurriculumState>,
    /// Cached adaptive pick for the current position.
    pending: Option<String>,
    events: Vec<AnnotationEvent>,
    questionnaire: Option<QuestionnaireResponse>,
    deleted: bool,
}

impl Session {
    pub fn position(&self) -> usize {
        self.position
    }

    pub fn events(&self) -> &[AnnotationEvent] {
        &self.events
    }

    pub fn questionnaire(&self) -> Option<&QuestionnaireResponse> {
        self.questionnaire.as_ref()
    }

    /// Times this session's model was trained on, in observation order.
    pub fn observed(&self) -> Option<&[(String, f64)]> {
        self.curriculum.as_ref().map(|c| c.observed())
    }
}

#[derive(Default)]
struct Registry {
    /// Registrations so far, deleted ones included.
    ordinal: u64,
    by_key: HashMap<String, String>,
    by_sid: HashMap<String, Arc<Mutex<Session>>>,
    /// Registration order of live sessions.
    order: BTreeMap<u64, String>,
}

pub struct Study {
    plan: Plan,
    log: Mutex<EventLog>,
    registry: RwLock<Registry>,
}

struct Prepared {
    payload: AnnotationPayload,
    curriculum: Option<CurriculumState>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

impl Study {
    /// Validates the config and writes the creation event.
    pub fn create(config: StudyConfig, mut log: EventLog) -> Result<Study, StudyError> {
        let plan = Plan::build(config)?;
        log.append(EventKind::StudyCreated, json!({ "config": plan.config }))?;
        Ok(Study { plan, log: Mutex::new(log), registry: RwLock::new(Registry::default()) })
    }

    /// Rebuilds a study by folding its log. Adaptive models are refit from
    /// the logged times, so decisions match the process that wrote the log.
    pub fn replay(records: &[EventRecord], log: EventLog) -> Result<Study, StudyError> {
        let corrupt = |seq: u64, reason: String| StudyError::Store(StoreError::CorruptRecord { seq, line: seq as usize, reason });
        let first = records.first().ok_or_else(|| corrupt(1, "log has no study-created record".into()))?;
        if first.kind != EventKind::StudyCreated {
            return Err(corrupt(first.seq, "first record is not study-created".into()));
        }
        let config: StudyConfig = serde_json::from_value(first.payload["config"].clone())
            .map_err(|e| corrupt(first.seq, e.to_string()))?;
        let plan = Plan::build(config)?;
        let study = Study { plan, log: Mutex::new(log), registry: RwLock::new(Registry::default()) };
        for r in &records[1..] {
            study.apply(r).map_err(|e| corrupt(r.seq, e.to_string()))?;
        }
        Ok(study)
    }

    fn apply(&self, r: &EventRecord) -> Result<(), StudyError> {
        let bad = |e: serde_json::Error| StudyError::BadRequest(e.to_string());
        let sid_of = |v: &serde_json::Value| v["sid"].as_str().map(str::to_string).ok_or_else(|| StudyError::BadRequest("missing sid".into()));
        match r.kind {
            EventKind::StudyCreated => Err(StudyError::BadRequest("repeated study-created record".into())),
            EventKind::Registered => {
                let p: RegisteredPayload = serde_json::from_value(r.payload.clone()).map_err(bad)?;
                let group = self
                    .plan
                    .group_names
                    .iter()
                    .position(|g| *g == p.group)
                    .ok_or_else(|| StudyError::BadRequest(format!("unknown group '{}'", p.group)))?;
                let mut reg = self.registry.write().unwrap_or_else(|e| e.into_inner());
                reg.ordinal = reg.ordinal.max(p.ordinal + 1);
                self.insert_session(&mut reg, p, group);
                Ok(())
            }
            EventKind::Annotation => {
                let p: AnnotationPayload = serde_json::from_value(r.payload.clone()).map_err(bad)?;
                let cell = self.session(&p.sid)?;
                let mut s = lock(&cell);
                let prepared = self.prepare(&mut s, &p.instance_id, &p.choice, p.elapsed_ms as i64)?;
                if prepared.payload.choice_order != p.choice_order || prepared.payload.rank != p.rank {
                    return Err(StudyError::BadRequest("replayed presentation differs from the log".into()));
                }
                self.commit(&mut s, prepared, r.at.clone());
                Ok(())
            }
            EventKind::Questionnaire => {
                let sid = sid_of(&r.payload)?;
                let resp: QuestionnaireResponse = serde_json::from_value(r.payload["response"].clone()).map_err(bad)?;
                let cell = self.session(&sid)?;
                lock(&cell).questionnaire = Some(resp);
                Ok(())
            }
            EventKind::DeletionTombstone => {
                let sid = sid_of(&r.payload)?;
                let mut reg = self.registry.write().unwrap_or_else(|e| e.into_inner());
                Self::remove_session(&mut reg, &sid);
                Ok(())
            }
        }
    }

    pub fn id(&self) -> &str {
        &self.plan.config.id
    }

    pub fn plan(&self) -> &Plan {
        &self.plan
    }

    pub fn session_length(&self) -> usize {
        self.plan.session_length()
    }

    /// Session handle; sessions of deleted participants are unknown.
    pub fn session(&self, sid: &str) -> Result<Arc<Mutex<Session>>, StudyError> {
        let reg = self.registry.read().unwrap_or_else(|e| e.into_inner());
        reg.by_sid.get(sid).cloned().ok_or_else(|| StudyError::UnknownSession(sid.to_string()))
    }

    pub fn session_ids(&self) -> Vec<String> {
        let reg = self.registry.read().unwrap_or_else(|e| e.into_inner());
        reg.order.values().cloned().collect()
    }

    pub fn has_key(&self, key: &str) -> bool {
        self.registry.read().unwrap_or_else(|e| e.into_inner()).by_key.contains_key(key)
    }

    /// Group for the `ordinal`-th registration: a seeded shuffle of all
    /// group indices per block of `groups` registrations.
    pub fn balanced_group(&self, ordinal: u64) -> usize {
        let g = self.plan.groups.len() as u64;
        let mut block: Vec<usize> = (0..self.plan.groups.len()).collect();
        block.shuffle(&mut rng::seeded(rng::derive(rng::derive(self.plan.config.seed, SALT_BLOCK), ordinal / g)));
        block[(ordinal % g) as usize]
    }

    fn study_salt(&self) -> u64 {
        fnv1a(self.plan.config.id.as_bytes())
    }

    pub fn register(&self, key: &str, consent: bool) -> Result<Registration, StudyError> {
        if !consent {
            return Err(StudyError::ConsentRequired);
        }
        if key.trim().is_empty() {
            return Err(StudyError::BadRequest("participant key must not be empty".into()));
        }
        let mut reg = self.registry.write().unwrap_or_else(|e| e.into_inner());
        if reg.by_key.contains_key(key) {
            return Err(StudyError::DuplicateKey);
        }
        let ordinal = reg.ordinal;
        let seed = self.plan.config.seed ^ self.study_salt();
        let sid = format!("{:016x}", rng::derive(rng::derive(seed, SALT_SID), ordinal));
        let participant = format!("p{:012x}", rng::derive(rng::derive(seed, SALT_PARTICIPANT), ordinal) >> 16);
        let group = self.balanced_group(ordinal);
        let payload = RegisteredPayload {
            sid: sid.clone(),
            key: key.to_string(),
            participant,
            group: self.plan.group_names[group].clone(),
            ordinal,
            consent_at: crate::store::now_rfc3339(),
        };
        lock(&self.log).append(EventKind::Registered, serde_json::to_value(&payload).expect("payload serializes"))?;
        reg.ordinal += 1;
        self.insert_session(&mut reg, payload, group);
        Ok(Registration { sid, total: self.session_length(), consent_text: self.plan.config.consent_text.clone() })
    }

    fn insert_session(&self, reg: &mut Registry, p: RegisteredPayload, group: usize) {
        let curriculum = match &self.plan.groups[group] {
            GroupPlan::Adaptive(_) => Some(CurriculumState::new(
                self.plan.config.evaluation_ids.iter().cloned(),
                rng::derive(fnv1a(p.sid.as_bytes()), SALT_CURRICULUM),
            )),
            GroupPlan::Fixed(_) => None,
        };
        let session = Session {
            sid: p.sid.clone(),
            key: p.key.clone(),
            participant: p.participant,
            group,
            ordinal: p.ordinal,
            consent_at: p.consent_at,
            position: 0,
            curriculum,
            pending: None,
            events: Vec::new(),
            questionnaire: None,
            deleted: false,
        };
        reg.by_key.insert(p.key, p.sid.clone());
        reg.order.insert(p.ordinal, p.sid.clone());
        reg.by_sid.insert(p.sid, Arc::new(Mutex::new(session)));
    }

    fn remove_session(reg: &mut Registry, sid: &str) -> Option<Arc<Mutex<Session>>> {
        let cell = reg.by_sid.remove(sid)?;
        {
            let mut s = lock(&cell);
            s.deleted = true;
            reg.by_key.remove(&s.key);
            reg.order.remove(&s.ordinal);
        }
        Some(cell)
    }

    /// Id at the session's current position, or `None` when complete.
    fn current(&self, s: &mut Session) -> Result<Option<String>, StudyError> {
        let control = &self.plan.config.control_ids;
        if s.position >= self.session_length() {
            return Ok(None);
        }
        if s.position < control.len() {
            return Ok(Some(control[s.position].clone()));
        }
        match &self.plan.groups[s.group] {
            GroupPlan::Fixed(order) => Ok(Some(order[s.position - control.len()].clone())),
            GroupPlan::Adaptive(strategy) => {
                if s.pending.is_none() {
                    let state = s.curriculum.as_ref().expect("adaptive sessions carry a curriculum");
                    s.pending = Some(state.adaptive_next(strategy)?);
                }
                Ok(s.pending.clone())
            }
        }
    }

    /// Presentation order of an instance's choices for one session.
    fn choice_order(&self, sid: &str, instance_id: &str) -> (u8, Vec<String>) {
        let (level, set) = self.plan.instances[instance_id].presented_choices().expect("validated choice sets");
        let mut order = set.to_vec();
        let key = fnv1a(format!("{sid}\u{1f}{instance_id}").as_bytes());
        order.shuffle(&mut rng::seeded(rng::derive(key ^ self.plan.config.seed, SALT_CHOICES)));
        (level, order)
    }

    pub fn next_instance(&self, sid: &str) -> Result<Next, StudyError> {
        let cell = self.session(sid)?;
        let mut s = lock(&cell);
        if s.deleted {
            return Err(StudyError::UnknownSession(sid.to_string()));
        }
        let Some(id) = self.current(&mut s)? else {
            return Ok(Next::Done { total: self.session_length() });
        };
        let (_, choices) = self.choice_order(sid, &id);
        Ok(Next::Instance(Presented {
            text: self.plan.instances[&id].text.clone(),
            instance_id: id,
            choices,
            position: s.position + 1,
            total: self.session_length(),
        }))
    }

    fn prepare(&self, s: &mut Session, instance_id: &str, choice: &str, elapsed_ms: i64) -> Result<Prepared, StudyError> {
        let Some(expected) = self.current(s)? else {
            return Err(StudyError::SessionComplete);
        };
        if instance_id != expected {
            return Err(StudyError::OutOfOrderSubmission { expected, got: instance_id.to_string() });
        }
        if elapsed_ms <= 0 {
            return Err(StudyError::BadElapsed);
        }
        let (difficulty, choice_order) = self.choice_order(&s.sid, instance_id);
        if !choice_order.iter().any(|c| c == choice) {
            return Err(StudyError::UnknownChoice(choice.to_string()));
        }
        let curriculum = match (&self.plan.groups[s.group], &s.curriculum) {
            (GroupPlan::Adaptive(strategy), Some(state)) if s.position >= self.plan.control_len() => {
                let mut next = state.clone();
                next.adaptive_observe(strategy, instance_id, elapsed_ms as f64 / 1000.0)?;
                Some(next)
            }
            _ => None,
        };
        let gold = self.plan.instances[instance_id].gold_label.as_deref();
        Ok(Prepared {
            payload: AnnotationPayload {
                sid: s.sid.clone(),
                instance_id: instance_id.to_string(),
                rank: s.position + 1,
                difficulty,
                choice_order,
                choice: choice.to_string(),
                correct: gold == Some(choice),
                elapsed_ms: elapsed_ms as u64,
            },
            curriculum,
        })
    }

    fn commit(&self, s: &mut Session, prepared: Prepared, received_at: String) {
        let p = prepared.payload;
        if let Some(c) = prepared.curriculum {
            s.curriculum = Some(c);
        }
        s.pending = None;
        s.position += 1;
        s.events.push(AnnotationEvent {
            instance_id: p.instance_id,
            rank: p.rank,
            difficulty: p.difficulty,
            choice_order: p.choice_order,
            choice: p.choice,
            correct: p.correct,
            elapsed_ms: p.elapsed_ms,
            received_at,
        });
    }

    /// Records an annotation for the current instance. The model of an
    /// adaptive session is retrained before the event is acknowledged.
    pub fn submit_annotation(&self, sid: &str, instance_id: &str, choice: &str, elapsed_ms: i64) -> Result<Ack, StudyError> {
        let cell = self.session(sid)?;
        let mut s = lock(&cell);
        if s.deleted {
            return Err(StudyError::UnknownSession(sid.to_string()));
        }
        let prepared = self.prepare(&mut s, instance_id, choice, elapsed_ms)?;
        let payload = serde_json::to_value(&prepared.payload).expect("payload serializes");
        let record = lock(&self.log).append(EventKind::Annotation, payload)?;
        self.commit(&mut s, prepared, record.at);
        let total = self.session_length();
        Ok(Ack { position: s.position, total, done: s.position == total })
    }

    /// Stores the questionnaire; a repeated submission replaces the earlier
    /// one and both stay in the log.
    pub fn submit_questionnaire(&self, sid: &str, response: QuestionnaireResponse) -> Result<(), StudyError> {
        let cell = self.session(sid)?;
        let mut s = lock(&cell);
        if s.deleted {
            return Err(StudyError::UnknownSession(sid.to_string()));
        }
        let total = self.session_length();
        if s.position < total {
            return Err(StudyError::SessionIncomplete { position: s.position, total });
        }
        lock(&self.log).append(EventKind::Questionnaire, json!({ "sid": sid, "response": response }))?;
        s.questionnaire = Some(response);
        Ok(())
    }

    /// Erases a participant from the live state, leaving a tombstone in
    /// the log. Returns the number of annotations removed.
    pub fn delete_participant(&self, key: &str) -> Result<usize, StudyError> {
        let mut reg = self.registry.write().unwrap_or_else(|e| e.into_inner());
        let sid = reg.by_key.get(key).cloned().ok_or(StudyError::UnknownKey)?;
        let cell = reg.by_sid.get(&sid).cloned().ok_or(StudyError::UnknownKey)?;
        let removed = {
            let s = lock(&cell);
            lock(&self.log).append(EventKind::DeletionTombstone, json!({ "sid": sid }))?;
            s.events.len()
        };
        Self::remove_session(&mut reg, &sid);
        Ok(removed)
    }

    pub fn export_header(&self) -> ExportHeader {
        ExportHeader {
            study: self.plan.config.id.clone(),
            groups: self.plan.group_names.clone(),
            control_count: self.plan.control_len(),
            session_length: self.session_length(),
            levels: self.plan.levels.clone(),
        }
    }

    /// Anonymized annotation rows in registration order, then rank.
    pub fn export_rows(&self) -> Vec<ExportRow> {
        let reg = self.registry.read().unwrap_or_else(|e| e.into_inner());
        let mut rows = Vec::new();
        for sid in reg.order.values() {
            let s = lock(&reg.by_sid[sid]);
            for e in &s.events {
                rows.push(ExportRow {
                    participant: s.participant.clone(),
                    group: self.plan.group_names[s.group].clone(),
                    rank: e.rank,
                    instance_id: e.instance_id.clone(),
                    difficulty: e.difficulty,
                    choice_order: e.choice_order.clone(),
                    choice: e.choice.clone(),
                    correct: e.correct,
                    elapsed_ms: e.elapsed_ms,
                });
            }
        }
        rows
    }

    pub fn export(&self) -> String {
        crate::export::write_export(&self.export_header(), &self.export_rows())
    }

    pub fn close(&self) {
        lock(&self.log).close();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::tests::four_arm;

    fn study(n_control: usize, n_eval: usize) -> Study {
        Study::create(four_arm("t", n_control, n_eval), EventLog::ephemeral()).unwrap()
    }

    fn presented(n: Next) -> Presented {
        match n {
            Next::Instance(p) => p,
            Next::Done { .. } => panic!("session is done"),
        }
    }

    #[test]
    fn balanced_blocks() {
        let st = study(2, 10);
        let mut counts = [0; 4];
        for k in 0..8 {
            let sid = st.register(&format!("k{k}"), true).unwrap().sid;
            counts[lock(&st.session(&sid).unwrap()).group] += 1;
        }
        assert_eq!(counts, [2, 2, 2, 2]);
    }

    #[test]
    fn consent_and_duplicate_keys() {
        let st = study(2, 10);
        assert!(matches!(st.register("a", false), Err(StudyError::ConsentRequired)));
        assert!(!st.has_key("a"));
        st.register("a", true).unwrap();
        assert!(matches!(st.register("a", true), Err(StudyError::DuplicateKey)));
    }

    #[test]
    fn control_block_first_and_idempotent_next() {
        let st = study(3, 10);
        let sids: Vec<String> = (0..4).map(|k| st.register(&format!("k{k}"), true).unwrap().sid).collect();
        for sid in &sids {
            let p = presented(st.next_instance(sid).unwrap());
            assert_eq!((p.instance_id.as_str(), p.position, p.total), ("c00", 1, 13));
            assert_eq!(presented(st.next_instance(sid).unwrap()), p);
        }
        let a = presented(st.next_instance(&sids[0]).unwrap()).choices;
        let b = presented(st.next_instance(&sids[1]).unwrap()).choices;
        let mut sa = a.clone();
        sa.sort();
        let mut sb = b.clone();
        sb.sort();
        assert_eq!(sa, sb);
    }

    #[test]
    fn gold_group_starts_evaluation_at_lowest_level() {
        let st = study(10, 50);
        for k in 0..4 {
            let sid = st.register(&format!("k{k}"), true).unwrap().sid;
            if st.plan.group_names[lock(&st.session(&sid).unwrap()).group] != "gold" {
                continue;
            }
            for _ in 0..10 {
                let p = presented(st.next_instance(&sid).unwrap());
                st.submit_annotation(&sid, &p.instance_id, &p.choices[0], 800).unwrap();
            }
            let p = presented(st.next_instance(&sid).unwrap());
            assert_eq!(p.position, 11);
            assert_eq!(st.plan.instances[&p.instance_id].difficulty_level, Some(1));
            return;
        }
        panic!("no gold participant in the first block");
    }

    #[test]
    fn choice_orders_are_spread_across_sessions() {
        let st = study(1, 5);
        let mut first = HashMap::new();
        for k in 0..600 {
            let sid = format!("{k:016x}");
            *first.entry(st.choice_order(&sid, "c00").1[0].clone()).or_insert(0) += 1;
        }
        // six options, 100 expected each
        assert_eq!(first.len(), 6);
        assert!(first.values().all(|&n| (60..=140).contains(&n)), "{first:?}");
    }

    #[test]
    fn submission_rules() {
        let st = study(1, 5);
        let sid = st.register("k", true).unwrap().sid;
        let p = presented(st.next_instance(&sid).unwrap());
        assert!(matches!(
            st.submit_annotation(&sid, "e00", &p.choices[0], 100),
            Err(StudyError::OutOfOrderSubmission { .. })
        ));
        assert!(matches!(st.submit_annotation(&sid, &p.instance_id, &p.choices[0], 0), Err(StudyError::BadElapsed)));
        assert!(matches!(st.submit_annotation(&sid, &p.instance_id, "nope", 10), Err(StudyError::UnknownChoice(_))));
        let ack = st.submit_annotation(&sid, &p.instance_id, &p.choices[0], 1500).unwrap();
        assert_eq!((ack.position, ack.done), (1, false));
        assert!(matches!(st.submit_questionnaire(&sid, questionnaire()), Err(StudyError::SessionIncomplete { .. })));
    }

    pub(crate) fn questionnaire() -> QuestionnaireResponse {
        QuestionnaireResponse {
            pq1_difficulty: Rating::Moderate,
            pq2_noticed_differences: true,
            pq2_details: String::new(),
            pq3_ordering: OrderingPreference::EasyFirst,
            pq3_details: String::new(),
            cefr_level: Some(Cefr::C1),
            years_of_english: None,
            studies_participated: None,
            studies_conducted: None,
        }
    }

    fn complete(st: &Study, sid: &str) {
        while let Next::Instance(p) = st.next_instance(sid).unwrap() {
            let choice = p.choices[p.position % 6].clone();
            st.submit_annotation(sid, &p.instance_id, &choice, 1000 + 37 * p.position as i64).unwrap();
        }
    }

    #[test]
    fn full_session_covers_every_instance_once() {
        let st = study(2, 10);
        for k in 0..4 {
            let sid = st.register(&format!("k{k}"), true).unwrap().sid;
            complete(&st, &sid);
            let s = lock(&st.session(&sid).unwrap()).events.iter().map(|e| e.instance_id.clone()).collect::<Vec<_>>();
            let mut sorted = s.clone();
            sorted.sort();
            let mut want: Vec<String> = st.plan.config.control_ids.clone();
            want.extend(st.plan.config.evaluation_ids.iter().cloned());
            want.sort();
            assert_eq!(sorted, want);
            assert!(matches!(st.next_instance(&sid).unwrap(), Next::Done { total: 12 }));
            assert!(matches!(st.submit_annotation(&sid, "c00", "x", 5), Err(StudyError::SessionComplete)));
            st.submit_questionnaire(&sid, questionnaire()).unwrap();
        }
    }

    #[test]
    fn deletion_erases_and_allows_reregistration() {
        let st = study(1, 5);
        let a = st.register("a", true).unwrap().sid;
        let b = st.register("b", true).unwrap().sid;
        complete(&st, &a);
        complete(&st, &b);
        let before = st.export_rows().len();
        assert_eq!(st.delete_participant("a").unwrap(), 6);
        assert_eq!(st.export_rows().len(), before - 6);
        assert!(!st.export().contains("\"a\""));
        assert!(matches!(st.next_instance(&a), Err(StudyError::UnknownSession(_))));
        assert!(matches!(st.delete_participant("a"), Err(StudyError::UnknownKey)));
        let again = st.register("a", true).unwrap().sid;
        assert_ne!(again, a);
        assert_eq!(lock(&st.session(&again).unwrap()).position, 0);
    }

    #[test]
    fn adaptive_sessions_use_only_their_own_times() {
        let st = study(1, 10);
        let sids: Vec<String> = (0..4).map(|k| st.register(&format!("k{k}"), true).unwrap().sid).collect();
        for sid in &sids {
            complete(&st, sid);
        }
        for sid in &sids {
            let cell = st.session(sid).unwrap();
            let s = lock(&cell);
            if let Some(observed) = s.observed() {
                let own: Vec<(String, f64)> = s.events[1..]
                    .iter()
                    .map(|e| (e.instance_id.clone(), e.elapsed_ms as f64 / 1000.0))
                    .collect();
                assert_eq!(observed, own.as_slice());
            }
        }
    }

    #[test]
    fn replay_reproduces_state_and_decisions() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        let st = Study::create(four_arm("t", 2, 10), EventLog::create(&path).unwrap()).unwrap();
        let sids: Vec<String> = (0..8).map(|k| st.register(&format!("k{k}"), true).unwrap().sid).collect();
        for (k, sid) in sids.iter().enumerate() {
            for _ in 0..(3 + k) {
                let Next::Instance(p) = st.next_instance(sid).unwrap() else { break };
                st.submit_annotation(sid, &p.instance_id, &p.choices[1], 700 + (k * 131 + p.position * 17) as i64).unwrap();
            }
        }
        st.delete_participant("k2").unwrap();
        let export = st.export();
        let nexts: Vec<Next> = st.session_ids().iter().map(|s| st.next_instance(s).unwrap()).collect();
        st.close();

        let (log, records, torn) = EventLog::recover(&path).unwrap();
        assert!(torn.is_none());
        let back = Study::replay(&records, log).unwrap();
        assert_eq!(back.export(), export);
        let again: Vec<Next> = back.session_ids().iter().map(|s| back.next_instance(s).unwrap()).collect();
        assert_eq!(again, nexts);
        assert!(back.register("k2", true).is_ok());
    }

    #[test]
    fn replay_of_one_registration_and_one_annotation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        let st = Study::create(four_arm("t", 2, 10), EventLog::create(&path).unwrap()).unwrap();
        let sid = st.register("k", true).unwrap().sid;
        let p = presented(st.next_instance(&sid).unwrap());
        st.submit_annotation(&sid, &p.instance_id, &p.choices[0], 900).unwrap();
        let (log, records, _) = EventLog::recover(&path).unwrap();
        let back = Study::replay(&records, log).unwrap();
        assert_eq!(lock(&back.session(&sid).unwrap()).position, 1);
    }
}
