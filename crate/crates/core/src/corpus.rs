//! Timed annotation datasets and their splits.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: non-positive annotation time {time} for {instance_id}")]
    NonPositiveTime { line: usize, instance_id: String, time: f64 },
    #[error("record references unknown instance {0}")]
    DanglingReference(String),
    #[error("duplicate record for instance {instance_id} by annotator {annotator_id}")]
    DuplicateRecord { instance_id: String, annotator_id: String },
    #[error("invalid instance {id}: {reason}")]
    InvalidInstance { id: String, reason: String },
    #[error("bad split fractions: {0}")]
    BadFractions(String),
    #[error("bad split file: {0}")]
    BadSplit(String),
}

/// Number of choices presented per instance in a study.
pub const CHOICES_PER_SET: usize = 6;

/// One annotatable unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub id: String,
    pub text: String,
    /// 1 (very easy) to 5 (very difficult).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub difficulty_level: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_label: Option<String>,
    /// Six choices (gold plus five distractors) per difficulty level.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choice_sets: Option<BTreeMap<u8, Vec<String>>>,
}

impl Instance {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Instance {
            id: id.into(),
            text: text.into(),
            difficulty_level: None,
            gold_label: None,
            choice_sets: None,
        }
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let invalid = |reason: String| CorpusError::InvalidInstance { id: self.id.clone(), reason };
        if self.id.is_empty() {
            return Err(invalid("empty id".into()));
        }
        if let Some(level) = self.difficulty_level {
            if !(1..=5).contains(&level) {
                return Err(invalid(format!("difficulty level {level} outside 1..5")));
            }
        }
        if let Some(sets) = &self.choice_sets {
            let gold = self
                .gold_label
                .as_deref()
                .ok_or_else(|| invalid("choice sets without gold label".into()))?;
            for (level, set) in sets {
                if !(1..=5).contains(level) {
                    return Err(invalid(format!("choice set for level {level} outside 1..5")));
                }
                if set.len() != CHOICES_PER_SET {
                    return Err(invalid(format!("choice set {level} has {} entries", set.len())));
                }
                let distinct: HashSet<&String> = set.iter().collect();
                if distinct.len() != set.len() {
                    return Err(invalid(format!("choice set {level} repeats an entry")));
                }
                if !set.iter().any(|c| c == gold) {
                    return Err(invalid(format!("choice set {level} lacks the gold label")));
                }
            }
        }
        Ok(())
    }

    /// Choice set presented at this instance's difficulty level, falling
    /// back to the lowest configured level.
    pub fn presented_choices(&self) -> Option<(u8, &[String])> {
        let sets = self.choice_sets.as_ref()?;
        if let Some(level) = self.difficulty_level {
            if let Some(set) = sets.get(&level) {
                return Some((level, set));
            }
        }
        sets.iter().next().map(|(l, s)| (*l, s.as_slice()))
    }
}

/// One measured annotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedRecord {
    pub instance_id: String,
    pub annotator_id: String,
    pub label: String,
    pub time_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub name: String,
    pub instances: Vec<Instance>,
    pub records: Vec<TimedRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    Jsonl,
    Tsv,
}

impl std::str::FromStr for InputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jsonl" => Ok(InputFormat::Jsonl),
            "tsv" => Ok(InputFormat::Tsv),
            other => Err(format!("unknown format '{other}'")),
        }
    }
}

impl InputFormat {
    /// Guesses from the file extension; anything but `.tsv` is jsonl.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("tsv") => InputFormat::Tsv,
            _ => InputFormat::Jsonl,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonlLine {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    time_seconds: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    annotator: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    difficulty_level: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    choice_sets: Option<BTreeMap<u8, Vec<String>>>,
}

/// Annotator id given to records that do not name one.
pub const DEFAULT_ANNOTATOR: &str = "default";

struct Builder {
    instances: Vec<Instance>,
    index: HashMap<String, usize>,
    records: Vec<(usize, TimedRecord)>,
    seen: HashSet<(String, String)>,
}

impl Builder {
    fn new() -> Self {
        Builder { instances: Vec::new(), index: HashMap::new(), records: Vec::new(), seen: HashSet::new() }
    }

    fn define(&mut self, line: usize, inst: Instance) -> Result<(), CorpusError> {
        inst.validate()?;
        match self.index.get(&inst.id) {
            Some(&i) => {
                let prev = &mut self.instances[i];
                if prev.text != inst.text {
                    return Err(CorpusError::Parse {
                        line,
                        message: format!("conflicting text for instance {}", inst.id),
                    });
                }
                if prev.gold_label.is_none() {
                    prev.gold_label = inst.gold_label;
                }
                if prev.difficulty_level.is_none() {
                    prev.difficulty_level = inst.difficulty_level;
                }
                if prev.choice_sets.is_none() {
                    prev.choice_sets = inst.choice_sets;
                }
            }
            None => {
                self.index.insert(inst.id.clone(), self.instances.len());
                self.instances.push(inst);
            }
        }
        Ok(())
    }

    fn record(&mut self, line: usize, rec: TimedRecord) -> Result<(), CorpusError> {
        if !(rec.time_seconds > 0.0) || !rec.time_seconds.is_finite() {
            return Err(CorpusError::NonPositiveTime {
                line,
                instance_id: rec.instance_id,
                time: rec.time_seconds,
            });
        }
        if !self.seen.insert((rec.instance_id.clone(), rec.annotator_id.clone())) {
            return Err(CorpusError::DuplicateRecord {
                instance_id: rec.instance_id,
                annotator_id: rec.annotator_id,
            });
        }
        self.records.push((line, rec));
        Ok(())
    }

    fn finish(self, name: String, filter: Option<&str>) -> Result<Dataset, CorpusError> {
        let mut records = Vec::with_capacity(self.records.len());
        for (_, rec) in self.records {
            if !self.index.contains_key(&rec.instance_id) {
                return Err(CorpusError::DanglingReference(rec.instance_id));
            }
            if filter.is_none_or(|a| a == rec.annotator_id) {
                records.push(rec);
            }
        }
        Ok(Dataset { name, instances: self.instances, records })
    }
}

fn parse_jsonl(text: &str, name: String, filter: Option<&str>) -> Result<Dataset, CorpusError> {
    let mut b = Builder::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let row: JsonlLine = serde_json::from_str(raw)
            .map_err(|e| CorpusError::Parse { line, message: e.to_string() })?;
        if row.id.is_empty() {
            return Err(CorpusError::Parse { line, message: "empty id".into() });
        }
        if let Some(text) = row.text {
            let gold_label = if row.time_seconds.is_none() || row.choice_sets.is_some() {
                row.label.clone()
            } else {
                None
            };
            b.define(
                line,
                Instance {
                    id: row.id.clone(),
                    text,
                    difficulty_level: row.difficulty_level,
                    gold_label,
                    choice_sets: row.choice_sets,
                },
            )?;
        }
        if let Some(time_seconds) = row.time_seconds {
            b.record(
                line,
                TimedRecord {
                    instance_id: row.id,
                    annotator_id: row.annotator.unwrap_or_else(|| DEFAULT_ANNOTATOR.into()),
                    label: row.label.unwrap_or_default(),
                    time_seconds,
                },
            )?;
        }
    }
    b.finish(name, filter)
}

const TSV_HEADER: [&str; 5] = ["id", "annotator", "time_seconds", "label", "text"];

fn parse_tsv(text: &str, name: String, filter: Option<&str>) -> Result<Dataset, CorpusError> {
    let mut lines = text.lines().enumerate();
    let header = lines
        .next()
        .ok_or(CorpusError::Parse { line: 1, message: "missing header row".into() })?
        .1;
    let cols: Vec<&str> = header.trim_end_matches('\r').split('\t').collect();
    if cols != TSV_HEADER {
        return Err(CorpusError::Parse {
            line: 1,
            message: format!("expected header {:?}", TSV_HEADER.join("\t")),
        });
    }
    let mut b = Builder::new();
    for (i, raw) in lines {
        let line = i + 1;
        let raw = raw.trim_end_matches('\r');
        if raw.is_empty() {
            continue;
        }
        let f: Vec<&str> = raw.splitn(5, '\t').collect();
        if f.len() != 5 {
            return Err(CorpusError::Parse { line, message: format!("{} columns, expected 5", f.len()) });
        }
        let time_seconds: f64 = f[2]
            .trim()
            .parse()
            .map_err(|_| CorpusError::Parse { line, message: format!("bad time '{}'", f[2]) })?;
        b.define(line, Instance::new(f[0], f[4]))?;
        b.record(
            line,
            TimedRecord {
                instance_id: f[0].into(),
                annotator_id: f[1].into(),
                label: f[3].into(),
                time_seconds,
            },
        )?;
    }
    b.finish(name, filter)
}

/// Loads a timed dataset, optionally keeping only one annotator's records.
pub fn load_timed_dataset(
    path: impl AsRef<Path>,
    format: InputFormat,
    annotator_filter: Option<&str>,
) -> Result<Dataset, CorpusError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|source| CorpusError::Io { path: path.display().to_string(), source })?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset").to_string();
    parse_dataset(&text, format, name, annotator_filter)
}

pub fn parse_dataset(
    text: &str,
    format: InputFormat,
    name: impl Into<String>,
    annotator_filter: Option<&str>,
) -> Result<Dataset, CorpusError> {
    match format {
        InputFormat::Jsonl => parse_jsonl(text, name.into(), annotator_filter),
        InputFormat::Tsv => parse_tsv(text, name.into(), annotator_filter),
    }
}

impl Dataset {
    /// Serializes as jsonl: one definition line per instance, then one line
    /// per record. Loading the output reproduces the dataset.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for inst in &self.instances {
            let line = JsonlLine {
                id: inst.id.clone(),
                text: Some(inst.text.clone()),
                label: inst.gold_label.clone(),
                time_seconds: None,
                annotator: None,
                difficulty_level: inst.difficulty_level,
                choice_sets: inst.choice_sets.clone(),
            };
            out.push_str(&serde_json::to_string(&line).expect("instance serializes"));
            out.push('\n');
        }
        for rec in &self.records {
            let line = JsonlLine {
                id: rec.instance_id.clone(),
                text: None,
                label: Some(rec.label.clone()),
                time_seconds: Some(rec.time_seconds),
                annotator: Some(rec.annotator_id.clone()),
                difficulty_level: None,
                choice_sets: None,
            };
            out.push_str(&serde_json::to_string(&line).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn instance(&self, id: &str) -> Option<&Instance> {
        self.instances.iter().find(|i| i.id == id)
    }

    pub fn instance_map(&self) -> HashMap<&str, &Instance> {
        self.instances.iter().map(|i| (i.id.as_str(), i)).collect()
    }

    /// Mean annotation time per instance over its records. Instances
    /// without records are absent.
    pub fn instance_times(&self) -> BTreeMap<String, f64> {
        let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
        for r in &self.records {
            let e = acc.entry(r.instance_id.clone()).or_default();
            e.0 += r.time_seconds;
            e.1 += 1;
        }
        acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
    }

    /// Annotator ids in first-appearance order.
    pub fn annotators(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        self.records
            .iter()
            .filter(|r| seen.insert(r.annotator_id.clone()))
            .map(|r| r.annotator_id.clone())
            .collect()
    }
}

/// Disjoint train/dev/test id lists in shuffled order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SplitAssignment {
    pub train: Vec<String>,
    pub dev: Vec<String>,
    pub test: Vec<String>,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct SplitLine {
    split: String,
    id: String,
}

/// Seeded split. Sizes are `floor(n * fraction)` with the leftover going to
/// the last split. Two fractions give train/test, three give train/dev/test.
pub fn make_splits(dataset: &Dataset, fractions: &[f64], seed: u64) -> Result<SplitAssignment, CorpusError> {
    if !(2..=3).contains(&fractions.len()) {
        return Err(CorpusError::BadFractions(format!("need 2 or 3 fractions, got {}", fractions.len())));
    }
    if fractions.iter().any(|f| !(*f > 0.0)) {
        return Err(CorpusError::BadFractions("fractions must be positive".into()));
    }
    let sum: f64 = fractions.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(CorpusError::BadFractions(format!("fractions sum to {sum}")));
    }
    let mut ids: Vec<String> = dataset.instances.iter().map(|i| i.id.clone()).collect();
    ids.shuffle(&mut rng::seeded(seed));
    let n = ids.len();
    let mut sizes: Vec<usize> =
        fractions[..fractions.len() - 1].iter().map(|f| (n as f64 * f + 1e-9).floor() as usize).collect();
    let used: usize = sizes.iter().sum();
    sizes.push(n - used.min(n));

    let mut parts = Vec::with_capacity(3);
    let mut rest = ids.as_slice();
    for s in sizes {
        let (head, tail) = rest.split_at(s.min(rest.len()));
        parts.push(head.to_vec());
        rest = tail;
    }
    let mut parts = parts.into_iter();
    let train = parts.next().unwrap_or_default();
    let (dev, test) = if fractions.len() == 3 {
        (parts.next().unwrap_or_default(), parts.next().unwrap_or_default())
    } else {
        (Vec::new(), parts.next().unwrap_or_default())
    };
    Ok(SplitAssignment { train, dev, test, seed })
}

impl SplitAssignment {
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for (name, ids) in [("train", &self.train), ("dev", &self.dev), ("test", &self.test)] {
            for id in ids {
                let line = SplitLine { split: name.into(), id: id.clone() };
                out.push_str(&serde_json::to_string(&line).expect("split serializes"));
                out.push('\n');
            }
        }
        out
    }

    pub fn parse_jsonl(text: &str) -> Result<Self, CorpusError> {
        let mut s = SplitAssignment::default();
        let mut seen = HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            if raw.trim().is_empty() {
                continue;
            }
            let line: SplitLine = serde_json::from_str(raw)
                .map_err(|e| CorpusError::Parse { line: i + 1, message: e.to_string() })?;
            if !seen.insert(line.id.clone()) {
                return Err(CorpusError::BadSplit(format!("{} appears twice", line.id)));
            }
            match line.split.as_str() {
                "train" => s.train.push(line.id),
                "dev" => s.dev.push(line.id),
                "test" => s.test.push(line.id),
                other => return Err(CorpusError::BadSplit(format!("unknown split '{other}'"))),
            }
        }
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|source| CorpusError::Io { path: path.display().to_string(), source })?;
        Self::parse_jsonl(&text)
    }

    /// Checks that the split partitions the dataset's instance ids.
    pub fn validate(&self, dataset: &Dataset) -> Result<(), CorpusError> {
        let all: HashSet<&str> = dataset.instances.iter().map(|i| i.id.as_str()).collect();
        let mut seen = HashSet::new();
        for id in self.train.iter().chain(&self.dev).chain(&self.test) {
            if !all.contains(id.as_str()) {
                return Err(CorpusError::BadSplit(format!("unknown id {id}")));
            }
            if !seen.insert(id.as_str()) {
                return Err(CorpusError::BadSplit(format!("{id} in more than one split")));
            }
        }
        if seen.len() != all.len() {
            return Err(CorpusError::BadSplit(format!(
                "split covers {} of {} instances",
                seen.len(),
                all.len()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const THREE: &str = r#"{"id":"a","text":"one two","time_seconds":5.4,"annotator":"A","label":"x"}
{"id":"b","text":"three","time_seconds":2.0,"annotator":"A","label":"y"}
{"id":"c","text":"four five six","time_seconds":9.9,"annotator":"A","label":"x"}
"#;

    fn ten() -> Dataset {
        Dataset {
            name: "t".into(),
            instances: (0..10).map(|i| Instance::new(format!("i{i}"), "x")).collect(),
            records: vec![],
        }
    }

    #[test]
    fn loads_three_lines() {
        let d = parse_dataset(THREE, InputFormat::Jsonl, "d", None).unwrap();
        assert_eq!(d.instances.len(), 3);
        assert_eq!(d.records.len(), 3);
        assert_eq!(d.records[2].time_seconds, 9.9);
    }

    #[test]
    fn zero_time_rejected() {
        let err = parse_dataset(r#"{"id":"a","text":"x","time_seconds":0}"#, InputFormat::Jsonl, "d", None)
            .unwrap_err();
        assert!(matches!(err, CorpusError::NonPositiveTime { line: 1, .. }));
    }

    #[test]
    fn annotator_filter_keeps_instances() {
        let text = r#"{"id":"a","text":"x","time_seconds":1,"annotator":"A"}
{"id":"a","text":"x","time_seconds":2,"annotator":"B"}
{"id":"b","text":"y","time_seconds":3,"annotator":"B"}
"#;
        let d = parse_dataset(text, InputFormat::Jsonl, "d", Some("A")).unwrap();
        assert_eq!(d.instances.len(), 2);
        assert_eq!(d.records.len(), 1);
        assert!(d.records.iter().all(|r| r.annotator_id == "A"));
    }

    #[test]
    fn dangling_and_duplicate_records() {
        let dangling = r#"{"id":"zz","time_seconds":1,"annotator":"A"}"#;
        assert!(matches!(
            parse_dataset(dangling, InputFormat::Jsonl, "d", None),
            Err(CorpusError::DanglingReference(id)) if id == "zz"
        ));
        let dup = r#"{"id":"a","text":"x","time_seconds":1,"annotator":"A"}
{"id":"a","text":"x","time_seconds":2,"annotator":"A"}"#;
        assert!(matches!(
            parse_dataset(dup, InputFormat::Jsonl, "d", None),
            Err(CorpusError::DuplicateRecord { .. })
        ));
        assert!(matches!(
            parse_dataset("{bad", InputFormat::Jsonl, "d", None),
            Err(CorpusError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn tsv_format() {
        let text = "id\tannotator\ttime_seconds\tlabel\ttext\nx1\tA\t3.5\tspec\tSome text\twith tab\n";
        let d = parse_dataset(text, InputFormat::Tsv, "d", None).unwrap();
        assert_eq!(d.instances[0].text, "Some text\twith tab");
        assert_eq!(d.records[0].time_seconds, 3.5);
        assert!(parse_dataset("x1\tA\t3\tl\tt\n", InputFormat::Tsv, "d", None).is_err());
    }

    #[test]
    fn choice_set_invariants() {
        let mut inst = Instance::new("q", "tweet");
        inst.gold_label = Some("g".into());
        let mut sets = BTreeMap::new();
        sets.insert(1u8, vec!["g", "a", "b", "c", "d", "e"].into_iter().map(String::from).collect());
        inst.choice_sets = Some(sets.clone());
        assert!(inst.validate().is_ok());
        sets.insert(2u8, vec!["x", "a", "b", "c", "d", "e"].into_iter().map(String::from).collect());
        inst.choice_sets = Some(sets);
        assert!(inst.validate().is_err());
        inst.choice_sets = None;
        inst.difficulty_level = Some(6);
        assert!(inst.validate().is_err());
    }

    #[test]
    fn split_sizes() {
        let s = make_splits(&ten(), &[0.8, 0.2], 7).unwrap();
        assert_eq!((s.train.len(), s.dev.len(), s.test.len()), (8, 0, 2));
        s.validate(&ten()).unwrap();
        let s = make_splits(&ten(), &[0.7, 0.15, 0.15], 7).unwrap();
        assert_eq!((s.train.len(), s.dev.len(), s.test.len()), (7, 1, 2));
        assert!(matches!(make_splits(&ten(), &[0.5, 0.6], 7), Err(CorpusError::BadFractions(_))));
        assert!(make_splits(&ten(), &[1.0], 7).is_err());
        assert!(make_splits(&ten(), &[1.2, -0.2], 7).is_err());
    }

    #[test]
    fn split_file_round_trip() {
        let s = make_splits(&ten(), &[0.7, 0.15, 0.15], 3).unwrap();
        let back = SplitAssignment::parse_jsonl(&s.to_jsonl()).unwrap();
        assert_eq!((back.train, back.dev, back.test), (s.train, s.dev, s.test));
    }

    fn arb_dataset() -> impl Strategy<Value = Dataset> {
        proptest::collection::vec(("[a-z]{1,6}", "\\PC{0,20}", proptest::option::of(0.01f64..100.0)), 1..15)
            .prop_map(|rows| {
                let mut d = Dataset { name: "p".into(), ..Default::default() };
                let mut seen = HashSet::new();
                for (id, text, t) in rows {
                    if !seen.insert(id.clone()) {
                        continue;
                    }
                    d.instances.push(Instance::new(id.clone(), text));
                    if let Some(t) = t {
                        d.records.push(TimedRecord {
                            instance_id: id,
                            annotator_id: "A".into(),
                            label: "l".into(),
                            time_seconds: t,
                        });
                    }
                }
                d
            })
    }

    proptest! {
        #[test]
        fn jsonl_round_trip(d in arb_dataset()) {
            let back = parse_dataset(&d.to_jsonl(), InputFormat::Jsonl, "p", None).unwrap();
            prop_assert_eq!(back, d);
        }

        #[test]
        fn splits_partition(n in 1usize..60, seed: u64, three: bool) {
            let d = Dataset {
                name: "p".into(),
                instances: (0..n).map(|i| Instance::new(format!("i{i}"), "")).collect(),
                records: vec![],
            };
            let fr: &[f64] = if three { &[0.7, 0.15, 0.15] } else { &[0.8, 0.2] };
            let s = make_splits(&d, fr, seed).unwrap();
            s.validate(&d).unwrap();
            prop_assert_eq!(s.train.len(), (n as f64 * fr[0] + 1e-9).floor() as usize);
            let again = make_splits(&d, fr, seed).unwrap();
            prop_assert_eq!(again.to_jsonl(), s.to_jsonl());
        }
    }
}
