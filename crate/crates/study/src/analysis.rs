//! Group comparison report over an export.
//!
//! Times are in seconds and capped once over all annotations before any
//! statistic is computed. Tests that cannot be computed on the data at
//! hand (too few values, a single group) are reported as `None`.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use anncur_core::stats::{self, TestResult};
use serde::Serialize;

use crate::error::StudyError;
use crate::export::{parse_export, ExportHeader, ExportRow};

pub const ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalysisParams {
    pub cap_k: f64,
    pub hard_limit: f64,
}

impl Default for AnalysisParams {
    fn default() -> Self {
        AnalysisParams { cap_k: 5.0, hard_limit: 600.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapSummary {
    pub k: f64,
    pub hard_limit: f64,
    pub t_max: f64,
    pub replaced: usize,
}

/// Descriptive statistics of one set of capped times.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeSummary {
    pub n: usize,
    pub mean: f64,
    pub sd: Option<f64>,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub name: String,
    pub participants: usize,
    pub annotations: usize,
    /// Mean over participants of their summed evaluation time.
    pub total_time: Option<f64>,
    pub evaluation_time: Option<TimeSummary>,
    pub control_time: Option<TimeSummary>,
    /// Fraction of evaluation annotations matching the gold label.
    pub accuracy: Option<f64>,
    /// Mean over participants of Spearman between presentation rank and
    /// difficulty level on the evaluation block.
    pub order_rho: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairTest {
    pub a: String,
    pub b: String,
    pub time: Option<TestResult>,
    pub accuracy: Option<TestResult>,
    /// Time difference significant at the corrected threshold.
    pub time_significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelSummary {
    pub level: u8,
    pub time: Option<TimeSummary>,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub study: String,
    pub annotations: usize,
    pub cap: Option<CapSummary>,
    pub groups: Vec<GroupSummary>,
    pub control_kw: Option<TestResult>,
    pub evaluation_kw: Option<TestResult>,
    pub accuracy_kw: Option<TestResult>,
    pub group_threshold: Option<f64>,
    pub group_pairs: Vec<PairTest>,
    pub levels: Vec<LevelSummary>,
    pub level_threshold: Option<f64>,
    pub level_pairs: Vec<PairTest>,
}

fn summarize(times: &[f64]) -> Option<TimeSummary> {
    if times.is_empty() {
        return None;
    }
    let pct = |q| stats::percentile(times, q).expect("non-empty, valid q");
    Some(TimeSummary {
        n: times.len(),
        mean: stats::mean(times),
        sd: (times.len() >= 2).then(|| stats::sample_std(times)),
        p25: pct(25.0),
        p50: pct(50.0),
        p75: pct(75.0),
    })
}

fn fraction(xs: &[bool]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().filter(|&&c| c).count() as f64 / xs.len() as f64)
}

fn mean_opt(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| stats::mean(xs))
}

/// Rows of one comparison unit (group or level), split the ways the tests need.
#[derive(Default)]
struct Cell {
    eval_times: Vec<f64>,
    control_times: Vec<f64>,
    eval_correct: Vec<bool>,
    /// participant -> evaluation rows as (rank, difficulty, time, correct)
    by_participant: BTreeMap<String, Vec<(usize, u8, f64, bool)>>,
}

impl Cell {
    fn participant_accuracy(&self) -> Vec<f64> {
        self.by_participant
            .values()
            .filter_map(|rows| fraction(&rows.iter().map(|r| r.3).collect::<Vec<_>>()))
            .collect()
    }
}

fn pairwise(names: &[String], cells: &[&Cell], threshold: Option<f64>) -> Vec<PairTest> {
    let mut out = Vec::new();
    for i in 0..cells.len() {
        for j in i + 1..cells.len() {
            let time = stats::welch_t(&cells[i].eval_times, &cells[j].eval_times).ok();
            let accuracy = stats::welch_t(&cells[i].participant_accuracy(), &cells[j].participant_accuracy()).ok();
            out.push(PairTest {
                a: names[i].clone(),
                b: names[j].clone(),
                time_significant: matches!((time, threshold), (Some(t), Some(th)) if t.p_two_sided < th),
                time,
                accuracy,
            });
        }
    }
    out
}

pub fn analyze_export(text: &str, params: AnalysisParams) -> Result<Report, StudyError> {
    let (header, rows) = parse_export(text)?;
    analyze(&header, &rows, params)
}

pub fn analyze(header: &ExportHeader, rows: &[ExportRow], params: AnalysisParams) -> Result<Report, StudyError> {
    if !(params.cap_k > 0.0) || !(params.hard_limit > 0.0) {
        return Err(StudyError::BadRequest("cap_k and hard_limit must be positive".into()));
    }
    let raw: Vec<f64> = rows.iter().map(|r| r.elapsed_ms as f64 / 1000.0).collect();
    let (times, cap) = match stats::cap_outliers(&raw, params.cap_k, params.hard_limit) {
        Ok(c) => (
            c.values,
            Some(CapSummary { k: params.cap_k, hard_limit: params.hard_limit, t_max: c.t_max, replaced: c.replaced }),
        ),
        Err(_) => (raw, None),
    };

    let group_index: HashMap<&str, usize> = header.groups.iter().enumerate().map(|(i, g)| (g.as_str(), i)).collect();
    let level_index: HashMap<u8, usize> = header.levels.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    let mut groups: Vec<Cell> = header.groups.iter().map(|_| Cell::default()).collect();
    let mut levels: Vec<Cell> = header.levels.iter().map(|_| Cell::default()).collect();
    let mut participants: Vec<std::collections::BTreeSet<&str>> = vec![Default::default(); header.groups.len()];
    let mut annotations = vec![0usize; header.groups.len()];

    for (r, &t) in rows.iter().zip(&times) {
        let g = group_index[r.group.as_str()];
        participants[g].insert(&r.participant);
        annotations[g] += 1;
        if r.rank <= header.control_count {
            groups[g].control_times.push(t);
            continue;
        }
        let entry = (r.rank, r.difficulty, t, r.correct);
        for cell in std::iter::once(&mut groups[g]).chain(level_index.get(&r.difficulty).map(|&l| &mut levels[l])) {
            cell.eval_times.push(t);
            cell.eval_correct.push(r.correct);
            cell.by_participant.entry(r.participant.clone()).or_default().push(entry);
        }
    }

    let group_summaries = header
        .groups
        .iter()
        .zip(&groups)
        .enumerate()
        .map(|(g, (name, cell))| {
            let totals: Vec<f64> = cell.by_participant.values().map(|rs| rs.iter().map(|r| r.2).sum()).collect();
            let rhos: Vec<f64> = cell
                .by_participant
                .values()
                .filter_map(|rs| {
                    let rank: Vec<f64> = rs.iter().map(|r| r.0 as f64).collect();
                    let level: Vec<f64> = rs.iter().map(|r| r.1 as f64).collect();
                    stats::spearman(&rank, &level).ok().flatten()
                })
                .collect();
            GroupSummary {
                name: name.clone(),
                participants: participants[g].len(),
                annotations: annotations[g],
                total_time: mean_opt(&totals),
                evaluation_time: summarize(&cell.eval_times),
                control_time: summarize(&cell.control_times),
                accuracy: fraction(&cell.eval_correct),
                order_rho: mean_opt(&rhos),
            }
        })
        .collect();

    let control: Vec<&[f64]> = groups.iter().map(|c| c.control_times.as_slice()).collect();
    let evaluation: Vec<&[f64]> = groups.iter().map(|c| c.eval_times.as_slice()).collect();
    let accuracy: Vec<Vec<f64>> = groups.iter().map(Cell::participant_accuracy).collect();
    let group_threshold = stats::bonferroni(ALPHA, stats::pairs(header.groups.len())).ok();
    let level_threshold = stats::bonferroni(ALPHA, stats::pairs(header.levels.len())).ok();
    let level_names: Vec<String> = header.levels.iter().map(|l| l.to_string()).collect();

    Ok(Report {
        study: header.study.clone(),
        annotations: rows.len(),
        cap,
        groups: group_summaries,
        control_kw: stats::kruskal_wallis(&control).ok(),
        evaluation_kw: stats::kruskal_wallis(&evaluation).ok(),
        accuracy_kw: stats::kruskal_wallis(&accuracy).ok(),
        group_threshold,
        group_pairs: pairwise(&header.groups, &groups.iter().collect::<Vec<_>>(), group_threshold),
        levels: header
            .levels
            .iter()
            .zip(&levels)
            .map(|(&level, c)| LevelSummary {
                level,
                time: summarize(&c.eval_times),
                accuracy: fraction(&c.eval_correct),
            })
            .collect(),
        level_threshold,
        level_pairs: pairwise(&level_names, &levels.iter().collect::<Vec<_>>(), level_threshold),
    })
}

fn opt(x: Option<f64>, digits: usize) -> String {
    x.map_or_else(|| "-".into(), |v| format!("{v:.digits$}"))
}

fn test(t: &Option<TestResult>) -> String {
    t.map_or_else(|| "n/a".into(), |t| format!("stat={:.3} p={:.4}", t.statistic, t.p_two_sided))
}

impl Report {
    /// Plain-text rendering for terminals.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "study {}: {} annotations", self.study, self.annotations);
        if let Some(c) = &self.cap {
            let _ = writeln!(s, "capping: t_max = {:.2} s (k={}, hard limit {} s), {} replaced", c.t_max, c.k, c.hard_limit, c.replaced);
        }
        let _ = writeln!(s, "\n{:<12} {:>4} {:>6} {:>9} {:>8} {:>8} {:>8} {:>8} {:>8} {:>7} {:>7}",
            "group", "n", "annot", "sum_t", "mean_t", "sd_t", "p25", "p50", "p75", "acc", "rho");
        for g in &self.groups {
            let e = g.evaluation_time.as_ref();
            let _ = writeln!(
                s,
                "{:<12} {:>4} {:>6} {:>9} {:>8} {:>8} {:>8} {:>8} {:>8} {:>7} {:>7}",
                g.name,
                g.participants,
                g.annotations,
                opt(g.total_time, 1),
                opt(e.map(|e| e.mean), 2),
                opt(e.and_then(|e| e.sd), 2),
                opt(e.map(|e| e.p25), 2),
                opt(e.map(|e| e.p50), 2),
                opt(e.map(|e| e.p75), 2),
                opt(g.accuracy.map(|a| a * 100.0), 1),
                opt(g.order_rho, 2),
            );
        }
        let _ = writeln!(s, "\nKruskal-Wallis control: {}", test(&self.control_kw));
        let _ = writeln!(s, "Kruskal-Wallis evaluation: {}", test(&self.evaluation_kw));
        let _ = writeln!(s, "Kruskal-Wallis accuracy: {}", test(&self.accuracy_kw));
        let _ = writeln!(s, "\npairwise Welch (threshold {})", opt(self.group_threshold, 4));
        for p in &self.group_pairs {
            let mark = if p.time_significant { " *" } else { "" };
            let _ = writeln!(s, "  {} vs {}: time {}{mark}; accuracy {}", p.a, p.b, test(&p.time), test(&p.accuracy));
        }
        let _ = writeln!(s, "\nper difficulty level");
        for l in &self.levels {
            let t = l.time.as_ref();
            let _ = writeln!(
                s,
                "  level {}: n={} mean_t={} acc={}",
                l.level,
                t.map_or(0, |t| t.n),
                opt(t.map(|t| t.mean), 2),
                opt(l.accuracy.map(|a| a * 100.0), 1)
            );
        }
        let _ = writeln!(s, "pairwise Welch by level (threshold {})", opt(self.level_threshold, 4));
        for p in &self.level_pairs {
            let mark = if p.time_significant { " *" } else { "" };
            let _ = writeln!(s, "  {} vs {}: time {}{mark}; accuracy {}", p.a, p.b, test(&p.time), test(&p.accuracy));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn header(groups: &[&str]) -> ExportHeader {
        ExportHeader {
            study: "s".into(),
            groups: groups.iter().map(|g| g.to_string()).collect(),
            control_count: 1,
            session_length: 11,
            levels: vec![1, 2],
        }
    }

    /// Rows for participants with one control then ten evaluation rows.
    fn rows(group: &str, participants: usize, time: impl Fn(usize, usize) -> f64, correct: impl Fn(usize, usize) -> bool) -> Vec<ExportRow> {
        let mut out = Vec::new();
        for p in 0..participants {
            for rank in 1..=11 {
                out.push(ExportRow {
                    participant: format!("{group}-p{p}"),
                    group: group.into(),
                    rank,
                    instance_id: format!("i{rank}"),
                    difficulty: if rank <= 6 { 1 } else { 2 },
                    choice_order: vec!["a".into(), "b".into()],
                    choice: "a".into(),
                    correct: correct(p, rank),
                    elapsed_ms: (time(p, rank) * 1000.0).round() as u64,
                });
            }
        }
        out
    }

    #[test]
    fn identical_groups_give_unit_p_values() {
        let t = |p: usize, r: usize| 5.0 + (p * 3 + r) as f64 % 7.0;
        let c = |p: usize, r: usize| (p + r) % 3 != 0;
        let mut all = rows("a", 4, t, c);
        all.extend(rows("b", 4, t, c));
        let rep = analyze(&header(&["a", "b"]), &all, AnalysisParams::default()).unwrap();
        let pair = &rep.group_pairs[0];
        assert!((pair.time.unwrap().p_two_sided - 1.0).abs() < 1e-12);
        assert!((pair.accuracy.unwrap().p_two_sided - 1.0).abs() < 1e-12);
        assert!((rep.evaluation_kw.unwrap().p_two_sided - 1.0).abs() < 1e-12);
        assert!((rep.control_kw.unwrap().p_two_sided - 1.0).abs() < 1e-12);
        assert_eq!(rep.groups[0].participants, 4);
        assert_eq!(rep.groups[0].annotations, 44);
    }

    #[test]
    fn separated_normals_are_significant() {
        let mut rng = anncur_core::rng::seeded(11);
        let n20 = Normal::new(20.0, 1.0).unwrap();
        let n30 = Normal::new(30.0, 1.0).unwrap();
        let mut draws = |d: &Normal<f64>| (0..50).map(|_| d.sample(&mut rng)).collect::<Vec<f64>>();
        let (a, b) = (draws(&n20), draws(&n30));
        let mut all = rows("a", 5, |p, r| if r == 1 { 10.0 } else { a[p * 10 + r - 2] }, |_, _| true);
        all.extend(rows("b", 5, |p, r| if r == 1 { 10.0 } else { b[p * 10 + r - 2] }, |_, _| true));
        let rep = analyze(&header(&["a", "b"]), &all, AnalysisParams::default()).unwrap();
        let threshold = stats::bonferroni(ALPHA, 6).unwrap();
        assert!(rep.group_pairs[0].time.unwrap().p_two_sided < threshold);
        assert!(rep.group_pairs[0].time_significant);
        assert_eq!(rep.group_threshold, Some(0.05));
        assert!(rep.cap.as_ref().unwrap().replaced == 0);
    }

    #[test]
    fn order_rho_tracks_difficulty_ascending() {
        let all = rows("gold", 2, |_, r| r as f64, |_, _| true);
        let rep = analyze(&header(&["gold"]), &all, AnalysisParams::default()).unwrap();
        assert!(rep.groups[0].order_rho.unwrap() > 0.8);
        assert!(rep.evaluation_kw.is_none() && rep.group_pairs.is_empty());
        assert_eq!(rep.levels.len(), 2);
        assert_eq!(rep.level_pairs.len(), 1);
        assert_eq!(rep.level_threshold, Some(0.05));
    }

    #[test]
    fn empty_export_reports_nothing() {
        let rep = analyze(&header(&["a", "b"]), &[], AnalysisParams::default()).unwrap();
        assert!(rep.cap.is_none() && rep.evaluation_kw.is_none());
        assert!(rep.to_text().contains("0 annotations"));
        assert!(matches!(analyze_export("garbage", AnalysisParams::default()), Err(StudyError::MalformedExport(_))));
    }
}
