//! Text statistics and feature construction.
//!
//! Sentence embeddings and masked-LM scores are produced by external tools
//! and loaded through [`FeatureTable`] and [`ScoreTable`].

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Instance;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("feature row {0} has a different dimension than the table")]
    DimMismatch(String),
    #[error("non-finite value in row {0}")]
    NonFinite(String),
    #[error("no features for instance {0}")]
    MissingFeatures(String),
    #[error("no score for instance {0}")]
    MissingScore(String),
    #[error("text of {0} has no words or sentences")]
    DegenerateText(String),
    #[error("empty token")]
    EmptyToken,
    #[error("dimension must be positive")]
    ZeroDim,
}

/// Dense model input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for FeatureVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for FeatureVector {
    fn from(v: Vec<f64>) -> Self {
        FeatureVector(v)
    }
}

/// Feature vectors keyed by instance id, all of one dimension.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureTable {
    dim: Option<usize>,
    rows: BTreeMap<String, FeatureVector>,
}

impl FeatureTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: impl Into<String>, v: FeatureVector) -> Result<(), FeatureError> {
        let id = id.into();
        if v.0.iter().any(|x| !x.is_finite()) {
            return Err(FeatureError::NonFinite(id));
        }
        match self.dim {
            Some(d) if d != v.dim() => return Err(FeatureError::DimMismatch(id)),
            None if v.dim() == 0 => return Err(FeatureError::ZeroDim),
            _ => {}
        }
        self.dim = Some(v.dim());
        self.rows.insert(id, v);
        Ok(())
    }

    /// Dimension; `None` for an empty table.
    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, id: &str) -> Result<&FeatureVector, FeatureError> {
        self.rows.get(id).ok_or_else(|| FeatureError::MissingFeatures(id.to_string()))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.rows.contains_key(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &FeatureVector)> {
        self.rows.iter()
    }
}

/// Precomputed per-instance scores, e.g. masked-LM pseudo-losses.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreTable(BTreeMap<String, f64>);

impl ScoreTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: impl Into<String>, score: f64) -> Result<(), FeatureError> {
        let id = id.into();
        if !score.is_finite() {
            return Err(FeatureError::NonFinite(id));
        }
        self.0.insert(id, score);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Result<f64, FeatureError> {
        self.0.get(id).copied().ok_or_else(|| FeatureError::MissingScore(id.to_string()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl FromIterator<(String, f64)> for ScoreTable {
    fn from_iter<I: IntoIterator<Item = (String, f64)>>(iter: I) -> Self {
        ScoreTable(iter.into_iter().collect())
    }
}

/// Non-adaptive difficulty estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeuristicKind {
    /// Sentence length in tokens.
    Sen,
    /// Flesch-Kincaid grade level.
    Fk,
    /// Lookup in a precomputed [`ScoreTable`].
    External,
}

impl std::str::FromStr for HeuristicKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sen" => Ok(HeuristicKind::Sen),
            "fk" => Ok(HeuristicKind::Fk),
            "external" | "mlm" => Ok(HeuristicKind::External),
            other => Err(format!("unknown heuristic '{other}'")),
        }
    }
}

/// Maximal runs of Unicode letters and digits.
pub fn tokenize(text: &str) -> Vec<&str> {
    text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).collect()
}

/// Counts segments terminated by `.`, `!` or `?` followed by whitespace or
/// end of text, plus one for a trailing unterminated segment.
pub fn split_sentences(text: &str) -> usize {
    let mut count = 0;
    let mut has_content = false;
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        if !c.is_whitespace() {
            has_content = true;
        }
        if matches!(c, '.' | '!' | '?') {
            let boundary = chars.peek().is_none_or(|n| n.is_whitespace());
            if boundary && has_content {
                count += 1;
                has_content = false;
            }
        }
    }
    if has_content {
        count += 1;
    }
    count
}

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y')
}

/// Rule-based syllable count: vowel groups, minus a silent final `e`.
pub fn count_syllables(word: &str) -> Result<usize, FeatureError> {
    if word.is_empty() {
        return Err(FeatureError::EmptyToken);
    }
    let chars: Vec<char> = word.chars().flat_map(char::to_lowercase).collect();
    let mut groups = 0;
    let mut prev_vowel = false;
    for &c in &chars {
        let v = is_vowel(c);
        if v && !prev_vowel {
            groups += 1;
        }
        prev_vowel = v;
    }
    let n = chars.len();
    if groups > 1 && chars[n - 1] == 'e' {
        let consonant_le = n >= 3 && chars[n - 2] == 'l' && !is_vowel(chars[n - 3]);
        if !consonant_le {
            groups -= 1;
        }
    }
    Ok(groups.max(1))
}

/// Flesch-Kincaid grade level of `text`.
pub fn flesch_kincaid(text: &str) -> Option<f64> {
    let words = tokenize(text);
    let sentences = split_sentences(text);
    if words.is_empty() || sentences == 0 {
        return None;
    }
    let syllables: usize = words.iter().map(|w| count_syllables(w).unwrap_or(1)).sum();
    let w = words.len() as f64;
    Some(0.39 * (w / sentences as f64) + 11.8 * (syllables as f64 / w) - 15.59)
}

/// Difficulty score of `instance` under a non-adaptive estimator.
pub fn heuristic_score(
    kind: HeuristicKind,
    instance: &Instance,
    scores: Option<&ScoreTable>,
) -> Result<f64, FeatureError> {
    match kind {
        HeuristicKind::Sen => Ok(tokenize(&instance.text).len() as f64),
        HeuristicKind::Fk => flesch_kincaid(&instance.text)
            .ok_or_else(|| FeatureError::DegenerateText(instance.id.clone())),
        HeuristicKind::External => scores
            .ok_or_else(|| FeatureError::MissingScore(instance.id.clone()))?
            .get(&instance.id),
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a over the bytes.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// Bucket of a token in a hashed bag-of-words of width `dim`.
pub fn bow_bucket(token: &str, dim: usize, seed: u64) -> usize {
    ((fnv1a(token.to_lowercase().as_bytes()) ^ seed) % dim as u64) as usize
}

/// Hashed bag-of-words token counts.
pub fn hashed_bow(text: &str, dim: usize, seed: u64) -> Result<FeatureVector, FeatureError> {
    if dim == 0 {
        return Err(FeatureError::ZeroDim);
    }
    let mut v = vec![0.0; dim];
    for t in tokenize(text) {
        v[bow_bucket(t, dim, seed)] += 1.0;
    }
    Ok(FeatureVector(v))
}

/// Hashed bag-of-words table over a set of instances.
pub fn bow_table<'a>(
    instances: impl IntoIterator<Item = &'a Instance>,
    dim: usize,
    seed: u64,
) -> Result<FeatureTable, FeatureError> {
    let mut table = FeatureTable::new();
    for inst in instances {
        table.insert(inst.id.clone(), hashed_bow(&inst.text, dim, seed)?)?;
    }
    Ok(table)
}

#[derive(Deserialize)]
struct FeatureLine {
    id: String,
    vector: Vec<f64>,
}

#[derive(Deserialize)]
struct ScoreLine {
    id: String,
    score: f64,
}

#[derive(Serialize)]
struct FeatureLineRef<'a> {
    id: &'a str,
    vector: &'a [f64],
}

fn read(path: &Path) -> Result<String, FeatureError> {
    fs::read_to_string(path)
        .map_err(|source| FeatureError::Io { path: path.display().to_string(), source })
}

fn json_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty())
}

/// Loads `{"id", "vector"}` jsonl.
pub fn load_feature_file(path: impl AsRef<Path>) -> Result<FeatureTable, FeatureError> {
    parse_feature_jsonl(&read(path.as_ref())?)
}

pub fn parse_feature_jsonl(text: &str) -> Result<FeatureTable, FeatureError> {
    let mut table = FeatureTable::new();
    for (line, raw) in json_lines(text) {
        let row: FeatureLine = serde_json::from_str(raw)
            .map_err(|e| FeatureError::Parse { line, message: e.to_string() })?;
        table.insert(row.id, FeatureVector(row.vector))?;
    }
    Ok(table)
}

pub fn write_feature_jsonl(table: &FeatureTable) -> String {
    let mut out = String::new();
    for (id, v) in table.iter() {
        let line = FeatureLineRef { id, vector: &v.0 };
        out.push_str(&serde_json::to_string(&line).expect("feature row serializes"));
        out.push('\n');
    }
    out
}

/// Loads `{"id", "score"}` jsonl.
pub fn load_score_file(path: impl AsRef<Path>) -> Result<ScoreTable, FeatureError> {
    parse_score_jsonl(&read(path.as_ref())?)
}

pub fn parse_score_jsonl(text: &str) -> Result<ScoreTable, FeatureError> {
    let mut table = ScoreTable::new();
    for (line, raw) in json_lines(text) {
        let row: ScoreLine = serde_json::from_str(raw)
            .map_err(|e| FeatureError::Parse { line, message: e.to_string() })?;
        table.insert(row.id, row.score)?;
    }
    Ok(table)
}
