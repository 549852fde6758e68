//! Correlating tokenizer alignment with generation accuracy, and the CSV and
//! text tables the toolkit emits.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::Read;

use num_traits::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::AlignmentReport;
use crate::probe::Tally;
use crate::scalar::{format_fixed2, format_pct2, Scalar};

/// Alignment metrics that get correlated, in column order.
pub const METRICS: [&str; 6] = ["fertility", "morpheme_f1", "boundary_p", "boundary_r", "boundary_f1", "mcr"];

/// Accuracy columns, in column order.
pub const TASKS: [&str; 3] = ["root_pattern_real", "root_pattern_nonce", "affix_build"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CorrelationError {
    #[error("vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("constant vector; correlation undefined")]
    Constant,
}

/// Sample Pearson correlation coefficient.
pub fn pearson<F: Float>(x: &[F], y: &[F]) -> Result<F, CorrelationError> {
    if x.len() != y.len() {
        return Err(CorrelationError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(CorrelationError::TooFewPoints(x.len()));
    }
    let n = F::from(x.len()).expect("length fits the float type");
    let mean = |v: &[F]| v.iter().fold(F::zero(), |a, &b| a + b) / n;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (F::zero(), F::zero(), F::zero());
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy = sxy + dx * dy;
        sxx = sxx + dx * dx;
        syy = syy + dy * dy;
    }
    if sxx.is_zero() || syy.is_zero() {
        return Err(CorrelationError::Constant);
    }
    let r = sxy / (sxx.sqrt() * syy.sqrt());
    Ok(r.max(-F::one()).min(F::one()))
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("need at least 2 systems to correlate, got {0}")]
    TooFewRows(usize),
    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("unknown boundary averaging {0:?} (pooled | per-word)")]
    Averaging(String),
    #[error("bad value {value:?} in column {column}")]
    Value { column: String, value: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which boundary scores fill the report's boundary columns.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryAveraging {
    #[default]
    Pooled,
    PerWord,
}

impl std::str::FromStr for BoundaryAveraging {
    type Err = AnalysisError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pooled" | "micro" => Ok(Self::Pooled),
            "per-word" | "per_word" | "macro" => Ok(Self::PerWord),
            other => Err(AnalysisError::Averaging(other.to_owned())),
        }
    }
}

/// One line of an alignment report CSV. Scores are percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub dataset: String,
    pub system: String,
    pub fertility: f64,
    pub tokens: u64,
    pub morpheme_f1: f64,
    pub boundary_p: f64,
    pub boundary_r: f64,
    pub boundary_f1: f64,
    pub mcr: f64,
    pub words: u64,
    pub excluded: u64,
}

pub const REPORT_HEADER: &str =
    "dataset,system,fertility,tokens,morpheme_f1,boundary_p,boundary_r,boundary_f1,mcr,words,excluded";

fn rounded(text: String) -> f64 {
    text.parse().expect("formatted number parses")
}

impl ReportRow {
    /// Table values for a report: two-decimal fertility and percentages.
    pub fn from_report<S: Scalar>(
        dataset: &str,
        system: &str,
        report: &AlignmentReport<S>,
        averaging: BoundaryAveraging,
    ) -> Self {
        let (p, r, f) = match averaging {
            BoundaryAveraging::Pooled => (&report.boundary_precision, &report.boundary_recall, &report.boundary_f1),
            BoundaryAveraging::PerWord => (
                &report.per_word_boundary.precision,
                &report.per_word_boundary.recall,
                &report.per_word_boundary.f1,
            ),
        };
        Self {
            dataset: dataset.to_owned(),
            system: system.to_owned(),
            fertility: rounded(format_fixed2(&report.fertility)),
            tokens: report.total_tokens,
            morpheme_f1: rounded(format_pct2(&report.morpheme_f1)),
            boundary_p: rounded(format_pct2(p)),
            boundary_r: rounded(format_pct2(r)),
            boundary_f1: rounded(format_pct2(f)),
            mcr: rounded(format_pct2(&report.mcr)),
            words: report.word_count,
            excluded: report.excluded_count,
        }
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        Some(match name {
            "fertility" => self.fertility,
            "morpheme_f1" => self.morpheme_f1,
            "boundary_p" => self.boundary_p,
            "boundary_r" => self.boundary_r,
            "boundary_f1" => self.boundary_f1,
            "mcr" => self.mcr,
            _ => return None,
        })
    }

    fn csv_fields(&self) -> [String; 11] {
        [
            self.dataset.clone(),
            self.system.clone(),
            format!("{:.2}", self.fertility),
            self.tokens.to_string(),
            format!("{:.2}", self.morpheme_f1),
            format!("{:.2}", self.boundary_p),
            format!("{:.2}", self.boundary_r),
            format!("{:.2}", self.boundary_f1),
            format!("{:.2}", self.mcr),
            self.words.to_string(),
            self.excluded.to_string(),
        ]
    }
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("CSV is UTF-8")
}

fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(reader)
}

/// Report CSV body (header plus rows), without metadata comments.
pub fn write_report_csv(rows: &[ReportRow]) -> String {
    let mut w = csv_writer();
    w.write_record(REPORT_HEADER.split(',')).expect("in-memory write");
    for row in rows {
        w.write_record(row.csv_fields()).expect("in-memory write");
    }
    finish(w)
}

pub fn read_report_csv<R: Read>(reader: R) -> Result<Vec<ReportRow>, AnalysisError> {
    csv_reader(reader).deserialize().map(|r| r.map_err(AnalysisError::from)).collect()
}

/// One line of a score CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub system: String,
    pub group: String,
    pub correct: u64,
    pub total: u64,
    pub failed: u64,
    /// Failures counted as wrong.
    pub accuracy: String,
    /// Failures left out of the denominator.
    pub accuracy_answered: String,
}

impl ScoreRow {
    pub fn new(system: &str, group: &str, tally: &Tally) -> Self {
        Self {
            system: system.to_owned(),
            group: group.to_owned(),
            correct: tally.correct,
            total: tally.total,
            failed: tally.failed,
            accuracy: tally.inclusive_display(),
            accuracy_answered: tally.exclusive_display(),
        }
    }

    pub fn accuracy_value(&self) -> Option<f64> {
        self.accuracy.parse().ok()
    }
}

pub fn write_score_csv(rows: &[ScoreRow]) -> String {
    let mut w = csv_writer();
    for row in rows {
        w.serialize(row).expect("in-memory write");
    }
    if rows.is_empty() {
        w.write_record(["system", "group", "correct", "total", "failed", "accuracy", "accuracy_answered"])
            .expect("in-memory write");
    }
    finish(w)
}

pub fn read_score_csv<R: Read>(reader: R) -> Result<Vec<ScoreRow>, AnalysisError> {
    csv_reader(reader).deserialize().map(|r| r.map_err(AnalysisError::from)).collect()
}

/// Alignment metrics and generation accuracies of one system.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemRow {
    pub system: String,
    pub alignment: ReportRow,
    /// Task key → accuracy percentage.
    pub accuracies: BTreeMap<String, f64>,
}

/// Join report rows (one dataset) with score rows by system name.
pub fn join_rows(reports: &[ReportRow], scores: &[ScoreRow]) -> Vec<SystemRow> {
    reports
        .iter()
        .map(|rep| SystemRow {
            system: rep.system.clone(),
            alignment: rep.clone(),
            accuracies: scores
                .iter()
                .filter(|s| s.system == rep.system && TASKS.contains(&s.group.as_str()))
                .filter_map(|s| Some((s.group.clone(), s.accuracy_value()?)))
                .collect(),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    /// Systems that contributed.
    pub n: usize,
    /// `None` when undefined.
    pub r: Option<f64>,
}

/// Pearson r for every (alignment metric, task) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub dataset: String,
    pub metrics: Vec<String>,
    pub tasks: Vec<String>,
    /// `cells[metric][task]`
    pub cells: Vec<Vec<Cell>>,
}

impl CorrelationMatrix {
    pub fn get(&self, metric: &str, task: &str) -> Option<&Cell> {
        let m = self.metrics.iter().position(|x| x == metric)?;
        let t = self.tasks.iter().position(|x| x == task)?;
        Some(&self.cells[m][t])
    }
}

/// Correlate every metric with every task over the given systems.
///
/// Rows are put in system order first, so the result does not depend on
/// input order. Undefined cells stay `None`.
pub fn correlate(dataset: &str, rows: &[SystemRow]) -> Result<CorrelationMatrix, AnalysisError> {
    if rows.len() < 2 {
        return Err(AnalysisError::TooFewRows(rows.len()));
    }
    let mut sorted: Vec<&SystemRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.system.cmp(&b.system));
    let cells = METRICS
        .iter()
        .map(|metric| {
            TASKS
                .iter()
                .map(|task| {
                    let (x, y): (Vec<f64>, Vec<f64>) = sorted
                        .iter()
                        .filter_map(|row| Some((row.alignment.metric(metric)?, *row.accuracies.get(*task)?)))
                        .unzip();
                    Cell { n: x.len(), r: pearson(&x, &y).ok() }
                })
                .collect()
        })
        .collect();
    Ok(CorrelationMatrix {
        dataset: dataset.to_owned(),
        metrics: METRICS.iter().map(|s| s.to_string()).collect(),
        tasks: TASKS.iter().map(|s| s.to_string()).collect(),
        cells,
    })
}

/// Long-form matrix CSV: `dataset,metric,task,n,r` with `NA` for undefined r.
pub fn write_matrix_csv(matrices: &[CorrelationMatrix]) -> String {
    let mut w = csv_writer();
    w.write_record(["dataset", "metric", "task", "n", "r"]).expect("in-memory write");
    for m in matrices {
        for (mi, metric) in m.metrics.iter().enumerate() {
            for (ti, task) in m.tasks.iter().enumerate() {
                let cell = m.cells[mi][ti];
                let r = cell.r.map_or_else(|| "NA".to_owned(), |r| r.to_string());
                w.write_record([m.dataset.as_str(), metric, task, &cell.n.to_string(), &r])
                    .expect("in-memory write");
            }
        }
    }
    finish(w)
}

/// Parse a long-form matrix CSV back into matrices, in order of appearance.
pub fn read_matrix_csv<R: Read>(reader: R) -> Result<Vec<CorrelationMatrix>, AnalysisError> {
    let mut out: Vec<CorrelationMatrix> = Vec::new();
    for rec in csv_reader(reader).records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("").to_owned();
        let (dataset, metric, task) = (field(0), field(1), field(2));
        let n = field(3).parse().map_err(|_| AnalysisError::Value { column: "n".into(), value: field(3) })?;
        let r = match field(4).as_str() {
            "NA" => None,
            v => Some(v.parse().map_err(|_| AnalysisError::Value { column: "r".into(), value: v.to_owned() })?),
        };
        if out.last().is_none_or(|m| m.dataset != dataset) {
            out.push(CorrelationMatrix { dataset, metrics: vec![], tasks: vec![], cells: vec![] });
        }
        let m = out.last_mut().expect("just pushed");
        let mi = match m.metrics.iter().position(|x| *x == metric) {
            Some(i) => i,
            None => {
                m.metrics.push(metric);
                m.cells.push(Vec::new());
                m.metrics.len() - 1
            }
        };
        if !m.tasks.contains(&task) {
            m.tasks.push(task);
        }
        m.cells[mi].push(Cell { n, r });
    }
    Ok(out)
}

/// Wide, plot-ready matrix: one row per metric, one column per task.
pub fn write_matrix_wide_csv(matrix: &CorrelationMatrix) -> String {
    let mut w = csv_writer();
    let mut header = vec!["metric".to_owned()];
    header.extend(matrix.tasks.iter().cloned());
    w.write_record(&header).expect("in-memory write");
    for (mi, metric) in matrix.metrics.iter().enumerate() {
        let mut row = vec![metric.clone()];
        row.extend(matrix.cells[mi].iter().map(|c| c.r.map_or_else(|| "NA".to_owned(), |r| format!("{r:.4}"))));
        w.write_record(&row).expect("in-memory write");
    }
    finish(w)
}

fn render_table(header: &[String], rows: &[Vec<String>]) -> String {
    let width = |s: &str| s.chars().count();
    let mut widths: Vec<usize> = header.iter().map(|h| width(h)).collect();
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(width(cell));
        }
    }
    let mut out = String::new();
    let line = |cells: &[String], out: &mut String| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, &w)| format!("{c}{}", " ".repeat(w - width(c))))
            .collect();
        let _ = writeln!(out, "{}", padded.join("  ").trim_end());
    };
    line(header, &mut out);
    let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
    line(&rule, &mut out);
    for row in rows {
        line(row, &mut out);
    }
    out
}

/// Mark the largest value in a column with a trailing `*`.
fn mark_best(values: &[Option<f64>]) -> Vec<bool> {
    let best = values.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    values.iter().map(|v| v.is_some_and(|v| v == best && best.is_finite())).collect()
}

fn starred(text: String, best: bool) -> String {
    if best {
        format!("{text}*")
    } else {
        text
    }
}

/// Text table of alignment reports, best score per dataset starred.
pub fn alignment_table(rows: &[ReportRow]) -> String {
    let header: Vec<String> = ["Data", "Model", "Fertility", "# Tokens", "F1", "Boundary P", "Boundary R", "Boundary F1", "MCR"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let datasets: BTreeSet<&str> = rows.iter().map(|r| r.dataset.as_str()).collect();
    let mut body = Vec::new();
    for dataset in datasets {
        let group: Vec<&ReportRow> = rows.iter().filter(|r| r.dataset == dataset).collect();
        let cols = ["morpheme_f1", "boundary_p", "boundary_r", "boundary_f1", "mcr"];
        let stars: Vec<Vec<bool>> = cols
            .iter()
            .map(|c| mark_best(&group.iter().map(|r| r.metric(c)).collect::<Vec<_>>()))
            .collect();
        for (i, r) in group.iter().enumerate() {
            let mut row = vec![
                if i == 0 { dataset.to_owned() } else { String::new() },
                r.system.clone(),
                format!("{:.2}", r.fertility),
                group_thousands(r.tokens),
            ];
            for (ci, c) in cols.iter().enumerate() {
                row.push(starred(format!("{:.2}", r.metric(c).unwrap_or(f64::NAN)), stars[ci][i]));
            }
            body.push(row);
        }
    }
    render_table(&header, &body)
}

/// Text table of accuracies per system and task, best per column starred.
pub fn accuracy_table(scores: &[ScoreRow]) -> String {
    let systems: BTreeSet<&str> = scores.iter().map(|s| s.system.as_str()).collect();
    let systems: Vec<&str> = systems.into_iter().collect();
    let lookup = |system: &str, task: &str| {
        scores
            .iter()
            .find(|s| s.system == system && s.group == task)
            .map(|s| s.accuracy.clone())
    };
    let mut header = vec!["Model".to_owned()];
    header.extend(["Root-Pattern Real", "Root-Pattern Nonce", "Affix Build"].iter().map(|s| s.to_string()));
    let stars: Vec<Vec<bool>> = TASKS
        .iter()
        .map(|t| {
            mark_best(
                &systems
                    .iter()
                    .map(|s| lookup(s, t).and_then(|a| a.parse().ok()))
                    .collect::<Vec<_>>(),
            )
        })
        .collect();
    let body: Vec<Vec<String>> = systems
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut row = vec![s.to_string()];
            for (ti, t) in TASKS.iter().enumerate() {
                row.push(starred(lookup(s, t).unwrap_or_else(|| "NA".into()), stars[ti][i]));
            }
            row
        })
        .collect();
    render_table(&header, &body)
}

/// Text table of a correlation matrix; undefined cells print as `NA`.
pub fn correlation_table(matrix: &CorrelationMatrix) -> String {
    let mut header = vec![format!("{} (r, n)", matrix.dataset)];
    header.extend(matrix.tasks.iter().cloned());
    let body: Vec<Vec<String>> = matrix
        .metrics
        .iter()
        .enumerate()
        .map(|(mi, metric)| {
            let mut row = vec![metric.clone()];
            row.extend(matrix.cells[mi].iter().map(|c| match c.r {
                Some(r) => format!("{r:.2} (n={})", c.n),
                None => format!("NA (n={})", c.n),
            }));
            row
        })
        .collect();
    render_table(&header, &body)
}

fn group_thousands(n: u64) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}
