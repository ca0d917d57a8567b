//! Episode metrics, aggregation into split tables, and report writers.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::task::{Difficulty, Mode, Partition, SceneSplit};

/// Why an episode ended before its policy finished.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbortCode {
    None,
    Budget,
    Timeout,
    Malformed,
    Transport,
    ResolutionLoop,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub episode_id: String,
    pub success: bool,
    pub gc_satisfied: u32,
    pub gc_total: u32,
    /// Agent trajectory length L̂ in simulator steps.
    pub agent_steps: u32,
    /// Expert demonstration length L*.
    pub expert_steps: u32,
    pub policy: String,
    pub reasoner: String,
    pub abort: AbortCode,
    pub scene_split: SceneSplit,
    pub partition: Partition,
    pub mode: Mode,
    pub difficulty: Difficulty,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub sr: f64,
    pub gc: f64,
    pub plw_sr: f64,
    pub plw_gc: f64,
}

/// SR, GC and their path-length-weighted forms, X · L*/max(L*, L̂).
pub fn episode_metrics(r: &EpisodeResult) -> EpisodeMetrics {
    let sr = if r.success { 1.0 } else { 0.0 };
    let gc = if r.gc_total == 0 { sr } else { f64::from(r.gc_satisfied) / f64::from(r.gc_total) };
    let expert = f64::from(r.expert_steps.max(1));
    let weight = expert / expert.max(f64::from(r.agent_steps));
    EpisodeMetrics { sr, gc, plw_sr: sr * weight, plw_gc: gc * weight }
}

/// Dimensions a report is broken down by, in addition to the policy label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grouping {
    pub split: bool,
    pub partition: bool,
    pub mode: bool,
    pub difficulty: bool,
}

impl Default for Grouping {
    fn default() -> Self {
        Grouping { split: true, partition: false, mode: true, difficulty: true }
    }
}

/// One table row. Metrics are percentages with two decimals, `None` when
/// the cell is empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub policy: String,
    pub split: Option<SceneSplit>,
    pub partition: Option<Partition>,
    pub mode: Option<Mode>,
    pub difficulty: Option<Difficulty>,
    pub n: usize,
    pub gc: Option<f64>,
    pub plw_gc: Option<f64>,
    pub sr: Option<f64>,
    pub plw_sr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub grouping: Grouping,
    pub cells: Vec<CellReport>,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no results to aggregate")]
    Empty,
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path} line {line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn percent(x: f64) -> f64 {
    (x * 10_000.0).round() / 100.0
}

fn opt_all<T: Copy>(on: bool, all: &[T]) -> Vec<Option<T>> {
    if on {
        all.iter().copied().map(Some).collect()
    } else {
        vec![None]
    }
}

type CellId = (String, Option<SceneSplit>, Option<Partition>, Option<Mode>, Option<Difficulty>);

/// Unweighted means per cell over the full grid of the chosen dimensions.
pub fn aggregate(results: &[EpisodeResult], grouping: Grouping) -> Result<SplitReport, EvalError> {
    if results.is_empty() {
        return Err(EvalError::Empty);
    }
    // Summing in a canonical order keeps the report independent of input order.
    let mut sorted: Vec<&EpisodeResult> = results.iter().collect();
    sorted.sort_by(|a, b| (&a.policy, &a.reasoner, &a.episode_id).cmp(&(&b.policy, &b.reasoner, &b.episode_id)));
    let label = |r: &EpisodeResult| format!("{}/{}", r.policy, r.reasoner);
    let mut sums: BTreeMap<CellId, (usize, [f64; 4])> = BTreeMap::new();
    let labels: std::collections::BTreeSet<String> = sorted.iter().map(|r| label(r)).collect();
    for l in &labels {
        for split in opt_all(grouping.split, &[SceneSplit::Seen, SceneSplit::Unseen]) {
            for partition in opt_all(grouping.partition, &[Partition::Train, Partition::Valid, Partition::Test]) {
                for mode in opt_all(grouping.mode, &[Mode::Static, Mode::Dynamic]) {
                    for difficulty in opt_all(grouping.difficulty, &[Difficulty::Basic, Difficulty::Advanced]) {
                        sums.insert((l.clone(), split, partition, mode, difficulty), (0, [0.0; 4]));
                    }
                }
            }
        }
    }
    for r in sorted {
        let key = (
            label(r),
            grouping.split.then_some(r.scene_split),
            grouping.partition.then_some(r.partition),
            grouping.mode.then_some(r.mode),
            grouping.difficulty.then_some(r.difficulty),
        );
        let m = episode_metrics(r);
        let cell = sums.get_mut(&key).expect("grid covers every result");
        cell.0 += 1;
        for (acc, x) in cell.1.iter_mut().zip([m.gc, m.plw_gc, m.sr, m.plw_sr]) {
            *acc += x;
        }
    }
    let cells = sums
        .into_iter()
        .map(|((policy, split, partition, mode, difficulty), (n, s))| {
            let mean = |i: usize| (n > 0).then(|| percent(s[i] / n as f64));
            CellReport {
                policy,
                split,
                partition,
                mode,
                difficulty,
                n,
                gc: mean(0),
                plw_gc: mean(1),
                sr: mean(2),
                plw_sr: mean(3),
            }
        })
        .collect();
    Ok(SplitReport { grouping, cells })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Markdown,
}

impl ReportFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "json" => Some(ReportFormat::Json),
            "csv" => Some(ReportFormat::Csv),
            "md" | "markdown" => Some(ReportFormat::Markdown),
            _ => None,
        }
    }
}

fn label<T: Copy>(v: Option<T>, f: impl Fn(T) -> &'static str) -> &'static str {
    v.map_or("all", f)
}

fn cell_labels(c: &CellReport) -> [&'static str; 4] {
    [
        label(c.split, SceneSplit::as_str),
        label(c.partition, Partition::as_str),
        label(c.mode, Mode::as_str),
        label(c.difficulty, Difficulty::as_str),
    ]
}

fn num(x: Option<f64>) -> String {
    x.map_or(String::new(), |v| format!("{v:.2}"))
}

pub fn render_report(report: &SplitReport, format: ReportFormat) -> Result<String, EvalError> {
    match format {
        ReportFormat::Json => Ok(serde_json::to_string_pretty(report).expect("report serializes") + "\n"),
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record([
                "policy",
                "split",
                "partition",
                "mode",
                "difficulty",
                "n",
                "gc",
                "plw_gc",
                "sr",
                "plw_sr",
            ])?;
            for c in &report.cells {
                let [s, p, m, d] = cell_labels(c);
                let n = c.n.to_string();
                let metrics = [num(c.gc), num(c.plw_gc), num(c.sr), num(c.plw_sr)];
                let mut row = vec![c.policy.as_str(), s, p, m, d, n.as_str()];
                row.extend(metrics.iter().map(String::as_str));
                w.write_record(&row)?;
            }
            let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
        ReportFormat::Markdown => {
            let mut out =
                String::from("| Policy | Split | Partition | Mode | Difficulty | n | GC | PLW GC | SR | PLW SR |\n");
            out.push_str("|---|---|---|---|---|---:|---:|---:|---:|---:|\n");
            for c in &report.cells {
                let [s, p, m, d] = cell_labels(c);
                let cell = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.2}"));
                let _ = writeln!(
                    out,
                    "| {} | {s} | {p} | {m} | {d} | {} | {} | {} | {} | {} |",
                    c.policy,
                    c.n,
                    cell(c.gc),
                    cell(c.plw_gc),
                    cell(c.sr),
                    cell(c.plw_sr)
                );
            }
            Ok(out)
        }
    }
}

pub fn write_report(report: &SplitReport, format: ReportFormat, path: &Path) -> Result<(), EvalError> {
    let text = render_report(report, format)?;
    fs::write(path, text).map_err(|source| EvalError::Io { path: path.display().to_string(), source })
}

/// Results as JSON lines, in the given order.
pub fn results_to_jsonl(results: &[EpisodeResult]) -> String {
    results.iter().map(|r| serde_json::to_string(r).expect("result serializes") + "\n").collect()
}

pub fn read_results(path: &Path) -> Result<Vec<EpisodeResult>, EvalError> {
    let p = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| EvalError::Io { path: p.clone(), source })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let de = &mut serde_json::Deserializer::from_str(l);
            serde_path_to_error::deserialize(de).map_err(|e| EvalError::Parse {
                path: p.clone(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests;
