//! Morphological productivity probes: prompt rendering, model calls, and
//! lenient scoring.

pub mod client;
pub mod mock;
pub mod prompt;

use std::collections::BTreeMap;
use std::io::BufRead;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use client::{
    complete, AttemptError, ChatMessage, ChatRequest, Completer, Completion, CompletionFailure, HttpCompleter,
    ProbeConfig, RateLimiter, API_KEY_ENV,
};
pub use mock::{FnCompleter, MockReply, MockServer, OracleCompleter, RootEchoCompleter};
pub use prompt::{render_prompt, spec_for, Language, PromptSpec, RenderError, Task, TemplateSet};

use crate::corpus::{is_arabic_letter, strip_diacritics};
use crate::datagen::DatasetInstance;
use crate::scalar::{format_percent_exact, Scalar};
use crate::templatic::RootCategory;

/// Maximal runs of Arabic letters in `text` after diacritic removal.
pub fn arabic_runs(text: &str) -> Vec<String> {
    strip_diacritics(text)
        .split(|c: char| !is_arabic_letter(c))
        .filter(|run| !run.is_empty())
        .map(str::to_owned)
        .collect()
}

/// `true` when the target word appears in `output` as a whole, delimited word.
///
/// Both sides lose diacritics and tatweel first. A multi-word target must
/// appear as consecutive runs.
pub fn lenient_match(output: &str, target: &str) -> bool {
    let wanted = arabic_runs(target);
    if wanted.is_empty() {
        return false;
    }
    let runs = arabic_runs(output);
    runs.windows(wanted.len()).any(|w| w == wanted.as_slice())
}

/// One scored model answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub instance_id: usize,
    pub model: String,
    pub task: Task,
    pub root: String,
    pub template: String,
    pub root_category: RootCategory,
    pub raw_output: String,
    pub normalized_output: String,
    pub target: String,
    pub correct: bool,
    /// Wall-clock time of the call, absent when timing is not recorded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_ms: Option<u64>,
    pub attempt_count: u32,
    /// Set when the endpoint never produced an answer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl ProbeResult {
    pub fn is_failure(&self) -> bool {
        self.failure.is_some()
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("results serialize")
    }
}

#[derive(Debug, Error)]
pub enum ProbeError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid probe configuration: {0}")]
    InvalidConfig(String),
    #[error("instance {instance_id}: {source}")]
    Render { instance_id: usize, source: RenderError },
    #[error("instance {instance_id}: endpoint refused credentials: {message}")]
    Auth { instance_id: usize, message: String },
    #[error("no results match the filter")]
    EmptySubset,
}

/// How prompts are built for a run.
#[derive(Debug, Clone)]
pub struct ProbeSetup {
    pub task: Task,
    pub language: Language,
    pub shots: u8,
    pub templates: TemplateSet,
}

impl ProbeSetup {
    pub fn new(task: Task, language: Language, shots: u8) -> Self {
        Self { task, language, shots, templates: TemplateSet::builtin() }
    }

    /// Render every prompt up front.
    pub fn render_all(&self, dataset: &[DatasetInstance]) -> Result<Vec<String>, ProbeError> {
        dataset
            .iter()
            .enumerate()
            .map(|(instance_id, inst)| {
                spec_for(inst, self.task, self.language, self.shots)
                    .and_then(|spec| self.templates.render(inst, &spec))
                    .map_err(|source| ProbeError::Render { instance_id, source })
            })
            .collect()
    }
}

/// Query the model on every instance and score the answers.
///
/// Results come back in dataset order whatever order the calls finish in.
/// Endpoint failures are recorded per instance; refused credentials abort.
pub fn run_probe<C: Completer + ?Sized>(
    dataset: &[DatasetInstance],
    setup: &ProbeSetup,
    config: &ProbeConfig,
    completer: &C,
) -> Result<Vec<ProbeResult>, ProbeError> {
    config.validate().map_err(ProbeError::InvalidConfig)?;
    if dataset.is_empty() {
        return Err(ProbeError::EmptyDataset);
    }
    let prompts = setup.render_all(dataset)?;
    let limiter = config.requests_per_second.map(RateLimiter::new);
    let slots: Vec<Mutex<Option<ProbeResult>>> = dataset.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let abort: Mutex<Option<ProbeError>> = Mutex::new(None);
    let aborted = AtomicBool::new(false);
    let workers = config.concurrency_limit.min(dataset.len());

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                if aborted.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= dataset.len() {
                    break;
                }
                let inst = &dataset[i];
                let target = setup.task.target(inst).to_owned();
                let started = Instant::now();
                let outcome = complete(&prompts[i], config, completer, limiter.as_ref());
                let latency_ms = Some(started.elapsed().as_millis() as u64);
                let (raw_output, attempt_count, failure) = match outcome {
                    Ok(c) => (c.text, c.attempts, None),
                    Err(f) if f.is_auth() => {
                        aborted.store(true, Ordering::SeqCst);
                        abort.lock().unwrap().get_or_insert(ProbeError::Auth {
                            instance_id: i,
                            message: f.error.to_string(),
                        });
                        break;
                    }
                    Err(f) => (String::new(), f.attempts, Some(f.error.to_string())),
                };
                let result = ProbeResult {
                    instance_id: i,
                    model: config.model_name.clone(),
                    task: setup.task,
                    root: inst.root.clone(),
                    template: inst.template.clone(),
                    root_category: inst.root_category,
                    normalized_output: strip_diacritics(&raw_output).trim().to_owned(),
                    correct: failure.is_none() && lenient_match(&raw_output, &target),
                    raw_output,
                    target,
                    latency_ms,
                    attempt_count,
                    failure,
                };
                *slots[i].lock().unwrap() = Some(result);
            });
        }
    });

    if let Some(err) = abort.into_inner().unwrap() {
        return Err(err);
    }
    Ok(slots
        .into_iter()
        .map(|s| s.into_inner().unwrap().expect("every slot filled"))
        .collect())
}

/// Counts behind an accuracy figure.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Tally {
    pub correct: u64,
    pub total: u64,
    pub failed: u64,
}

impl Tally {
    pub fn of<'a>(results: impl IntoIterator<Item = &'a ProbeResult>) -> Self {
        let mut t = Self::default();
        for r in results {
            t.total += 1;
            t.correct += u64::from(r.correct);
            t.failed += u64::from(r.is_failure());
        }
        t
    }

    /// `100 * correct / total`, failures counted as wrong.
    pub fn inclusive<S: Scalar>(&self) -> Option<S> {
        (self.total > 0).then(|| S::from_count(100) * S::ratio_or_zero(self.correct, self.total))
    }

    /// `100 * correct / (total - failed)`, failures left out.
    pub fn exclusive<S: Scalar>(&self) -> Option<S> {
        let answered = self.total - self.failed;
        (answered > 0).then(|| S::from_count(100) * S::ratio_or_zero(self.correct, answered))
    }

    pub fn inclusive_display(&self) -> String {
        if self.total == 0 {
            "NA".into()
        } else {
            format_percent_exact(self.correct, self.total)
        }
    }

    pub fn exclusive_display(&self) -> String {
        let answered = self.total - self.failed;
        if answered == 0 {
            "NA".into()
        } else {
            format_percent_exact(self.correct, answered)
        }
    }
}

/// Percentage of correct answers among results passing `filter`.
pub fn accuracy<S: Scalar>(
    results: &[ProbeResult],
    filter: impl Fn(&ProbeResult) -> bool,
) -> Result<S, ProbeError> {
    Tally::of(results.iter().filter(|r| filter(r)))
        .inclusive()
        .ok_or(ProbeError::EmptySubset)
}

/// Grouping key for scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupBy {
    /// `root_pattern_real`, `root_pattern_nonce`, or `affix_build`.
    Task,
    RootCategory,
    Template,
}

impl std::str::FromStr for GroupBy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "task" => Ok(Self::Task),
            "root_category" => Ok(Self::RootCategory),
            "template" | "pattern" => Ok(Self::Template),
            _ => Err(format!("unknown grouping {s:?} (task | root_category | template)")),
        }
    }
}

/// Task key used in score tables and correlations.
pub fn task_key(result: &ProbeResult) -> &'static str {
    match (result.task, result.root_category.is_real()) {
        (Task::RootPattern, true) => "root_pattern_real",
        (Task::RootPattern, false) => "root_pattern_nonce",
        (Task::AffixBuild, _) => "affix_build",
    }
}

/// Tallies per (model, group).
pub fn group_tallies(results: &[ProbeResult], by: GroupBy) -> BTreeMap<(String, String), Tally> {
    let mut groups: BTreeMap<(String, String), Vec<&ProbeResult>> = BTreeMap::new();
    for r in results {
        let key = match by {
            GroupBy::Task => task_key(r).to_owned(),
            GroupBy::RootCategory => r.root_category.as_str().to_owned(),
            GroupBy::Template => strip_diacritics(&r.template),
        };
        groups.entry((r.model.clone(), key)).or_default().push(r);
    }
    groups.into_iter().map(|(k, v)| (k, Tally::of(v))).collect()
}

#[derive(Debug, Error)]
pub enum ResultsFileError {
    #[error("line {line}: {source}")]
    Record { line: usize, source: serde_json::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Read a results file (one JSON record per line; `#` lines are metadata).
pub fn read_results<R: BufRead>(reader: R) -> Result<Vec<ProbeResult>, ResultsFileError> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        out.push(serde_json::from_str(t).map_err(|source| ResultsFileError::Record { line: idx + 1, source })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Rational64;

    #[test]
    fn lenient_examples() {
        assert!(lenient_match("الكلمة هي مكتوب.", "مكتوب"));
        assert!(!lenient_match("مكتوبة", "مكتوب"));
        assert!(lenient_match("مَكْتُوب", "مكتوب"));
        assert!(lenient_match("The answer is: مكتوب", "مكتوب"));
        assert!(lenient_match("مكتوب123", "مكتوب"));
        assert!(lenient_match("مكـــتوب", "مكتوب"));
        assert!(!lenient_match("", "مكتوب"));
        assert!(!lenient_match("مكتوب", "123"));
        assert!(lenient_match("قال: الثمار اليوم", "الثمار"));
    }

    fn result(correct: bool, failure: bool, category: RootCategory) -> ProbeResult {
        ProbeResult {
            instance_id: 0,
            model: "m".into(),
            task: Task::RootPattern,
            root: "كتب".into(),
            template: "فعال".into(),
            root_category: category,
            raw_output: String::new(),
            normalized_output: String::new(),
            target: "كتاب".into(),
            correct,
            latency_ms: None,
            attempt_count: 1,
            failure: failure.then(|| "HTTP 500".to_owned()),
        }
    }

    #[test]
    fn accuracy_exact_and_formatted() {
        let mut rs: Vec<ProbeResult> = (0..130).map(|i| result(i < 126, false, RootCategory::RealHighFrequency)).collect();
        rs.extend((0..100).map(|i| result(i < 97, false, RootCategory::Nonce)));
        let real: Rational64 = accuracy(&rs, |r| r.root_category.is_real()).unwrap();
        assert_eq!(real, Rational64::new(100 * 126, 130));
        let t = Tally::of(rs.iter().filter(|r| r.root_category.is_real()));
        assert_eq!(t.inclusive_display(), "96.92");
        let t = Tally::of(rs.iter().filter(|r| !r.root_category.is_real()));
        assert_eq!(t.inclusive_display(), "97.00");
        let none: Vec<ProbeResult> = (0..5).map(|_| result(false, false, RootCategory::Nonce)).collect();
        assert_eq!(accuracy::<f64>(&none, |_| true).unwrap(), 0.0);
        assert!(matches!(accuracy::<f64>(&none, |r| r.root_category.is_real()), Err(ProbeError::EmptySubset)));
    }

    #[test]
    fn failures_affect_only_inclusive_denominator() {
        let rs = vec![
            result(true, false, RootCategory::Nonce),
            result(false, false, RootCategory::Nonce),
            result(false, true, RootCategory::Nonce),
        ];
        let t = Tally::of(&rs);
        assert_eq!(t, Tally { correct: 1, total: 3, failed: 1 });
        assert_eq!(t.inclusive_display(), "33.33");
        assert_eq!(t.exclusive_display(), "50.00");
    }

    #[test]
    fn grouping_keys() {
        let rs = vec![
            result(true, false, RootCategory::RealHighFrequency),
            result(true, false, RootCategory::RealLowFrequency),
            result(false, false, RootCategory::Nonce),
        ];
        let g = group_tallies(&rs, GroupBy::Task);
        assert_eq!(g[&("m".into(), "root_pattern_real".into())].total, 2);
        assert_eq!(g[&("m".into(), "root_pattern_nonce".into())].total, 1);
        let g = group_tallies(&rs, GroupBy::RootCategory);
        assert_eq!(g.len(), 3);
    }

    #[test]
    fn results_round_trip() {
        let r = result(true, true, RootCategory::Nonce);
        let text = format!("# meta\n{}\n", r.to_json_line());
        assert_eq!(read_results(text.as_bytes()).unwrap(), vec![r]);
    }
}
