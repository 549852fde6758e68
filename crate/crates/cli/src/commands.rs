//! Subcommand bodies.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::time::Duration;

use morphprobe::analysis::{
    self, accuracy_table, alignment_table, correlate, correlation_table, join_rows, read_report_csv,
    read_score_csv, write_matrix_csv, write_matrix_wide_csv, write_report_csv, write_score_csv, ReportRow,
    ScoreRow,
};
use morphprobe::alignment::{parse_tokens, tokens_from_gold, TokenEntry};
use morphprobe::corpus::{clean_gold, corpus_stats, parse_gold, GoldCorpus};
use morphprobe::datagen::{
    build_nonce_set, dataset_shape_check, generate_nonce_roots, read_dataset, validate_real_record,
    write_dataset, CategoryRule, DatasetInstance, Lexicon, NonceOptions, ShapeExpectation,
};
use morphprobe::metrics::evaluate;
use morphprobe::probe::{
    group_tallies, run_probe, Completer, GroupBy, HttpCompleter, Language, OracleCompleter, ProbeConfig,
    ProbeError, ProbeSetup, RootEchoCompleter, Tally, Task, TemplateSet,
};
use morphprobe::scalar::format_fixed2;
use morphprobe::templatic::{default_nonce_inventory, parse_inventory};
use morphprobe::Report;

use crate::config::RunConfig;
use crate::{Command, CliError};

const VERSION: &str = env!("CARGO_PKG_VERSION");
const DEFAULT_NONCE_ROOTS: usize = 20;
const DEFAULT_SEED: u64 = 0;
const MAX_LISTED_PROBLEMS: usize = 50;

pub fn run(command: &Command, cfg: &RunConfig) -> Result<(), CliError> {
    let name = command.name();
    match command {
        Command::Clean(_) => clean(name, cfg),
        Command::EvalTokenizer(_) => eval_tokenizer(name, cfg),
        Command::MakeNonce(_) => make_nonce(name, cfg),
        Command::BuildDataset(_) => build_dataset(name, cfg),
        Command::RenderPrompts(_) => render_prompts(name, cfg),
        Command::Probe(_) => probe(name, cfg),
        Command::Score(_) => score(name, cfg),
        Command::Correlate(_) => correlate_cmd(name, cfg),
        Command::Report(_) => report(name, cfg),
    }
}

fn header(command: &str, cfg: &RunConfig) -> String {
    let seed = cfg.seed.map_or_else(|| "none".to_owned(), |s| s.to_string());
    format!("# morphprobe {VERSION} command={command} seed={seed} config={}\n", cfg.hash())
}

fn required<'a, T>(value: &'a Option<T>, flag: &str) -> Result<&'a T, CliError> {
    value.as_ref().ok_or_else(|| CliError::Usage(format!("missing {flag}")))
}

fn input<'a>(value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, CliError> {
    let path = required(value, flag)?;
    if !path.exists() {
        return Err(CliError::Usage(format!("{flag} {}: no such file or directory", path.display())));
    }
    Ok(path)
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::Data(format!("{}: {e}", parent.display())))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn emit(out: Option<&PathBuf>, contents: &str) -> Result<(), CliError> {
    match out {
        Some(path) => write_file(path, contents),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn data<E: std::fmt::Display>(path: &Path) -> impl Fn(E) -> CliError + '_ {
    move |e| CliError::Data(format!("{}: {e}", path.display()))
}

fn fail_with_problems(problems: &[String], what: &str) -> Result<(), CliError> {
    if problems.is_empty() {
        return Ok(());
    }
    for p in problems.iter().take(MAX_LISTED_PROBLEMS) {
        eprintln!("  {p}");
    }
    if problems.len() > MAX_LISTED_PROBLEMS {
        eprintln!("  ... and {} more", problems.len() - MAX_LISTED_PROBLEMS);
    }
    Err(CliError::Data(format!("{} problem(s) in {what}", problems.len())))
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "unnamed".to_owned(), |s| s.to_string_lossy().into_owned())
}

fn read_gold(path: &Path) -> Result<GoldCorpus, CliError> {
    parse_gold(open(path)?).map_err(data(path))
}

fn clean(name: &str, cfg: &RunConfig) -> Result<(), CliError> {
    let gold = input(&cfg.paths.gold, "--gold")?;
    let out = required(&cfg.paths.out, "--out")?;
    let corpus = read_gold(gold)?;
    let (mut cleaned, summary) = clean_gold(&corpus);
    let mut emptied = 0;
    for sentence in &mut cleaned.sentences {
        let before = sentence.len();
        sentence.retain(|e| !e.morphemes().is_empty());
        emptied += before - sentence.len();
    }
    cleaned.sentences.retain(|s| !s.is_empty());
    if emptied > 0 {
        log::warn!("{emptied} word(s) had no morphemes left after stripping diacritics and were dropped");
    }
    let flagged = cleaned.flagged().count();
    if flagged > 0 {
        log::warn!("{flagged} word(s) do not reconcile with their morphemes and will be excluded from metrics");
    }
    let stats = corpus_stats::<f64, _>(&cleaned.morpheme_counts());
    let body = format!(
        "{}# words_in={} words_out={} sentences_in={} sentences_out={} flagged={flagged}\n{}",
        header(name, cfg),
        summary.words_in,
        cleaned.word_count(),
        summary.sentences_in,
        cleaned.sentences.len(),
        cleaned.to_gold_string()
    );
    write_file(out, &body)?;
    println!("sentences\twords\ttokens\ttokens/sentence");
    println!(
        "{}\t{}\t{}\t{}",
        stats.sentence_count,
        stats.word_count,
        stats.token_count,
        format_fixed2(&stats.avg_tokens_per_sentence)
    );
    Ok(())
}

fn eval_tokenizer(name: &str, cfg: &RunConfig) -> Result<(), CliError> {
    let gold_path = input(&cfg.paths.gold, "--gold")?;
    let tokens_path = input(&cfg.paths.tokens, "--tokens")?;
    let out = required(&cfg.paths.out, "--out")?;
    let format = cfg.metrics.tokens_format.as_deref().unwrap_or("tsv");
    let gold = read_gold(gold_path)?;
    let tokens: Vec<TokenEntry> = match format {
        "tsv" => parse_tokens(open(tokens_path)?).map_err(data(tokens_path))?,
        "gold" => tokens_from_gold(&read_gold(tokens_path)?),
        other => return Err(CliError::Usage(format!("unknown --tokens-format {other:?} (tsv | gold)"))),
    };
    let report: Report = evaluate(&gold, &tokens).map_err(|e| {
        CliError::Data(format!("{} vs {}: {e}", gold_path.display(), tokens_path.display()))
    })?;
    if report.excluded_count > 0 {
        log::warn!(
            "excluded {} word(s): {} unreconciled gold, {} not reconstructed by the tokens",
            report.excluded_count,
            report.excluded_gold,
            report.excluded_reconstruction
        );
    }
    let dataset = cfg.metrics.dataset.clone().unwrap_or_else(|| stem(gold_path));
    let system = cfg.metrics.system.clone().unwrap_or_else(|| stem(tokens_path));
    let averaging = cfg.metrics.boundary_averaging.unwrap_or_default();
    let row = ReportRow::from_report(&dataset, &system, &report, averaging);
    let pw = &report.per_word_boundary;
    let body = format!(
        "{}# boundary_unit=char zero_denominator=0 boundary_averaging={}\n\
         # pooled_boundary p={:.6} r={:.6} f1={:.6}\n\
         # per_word_boundary p={:.6} r={:.6} f1={:.6}\n\
         # excluded_gold={} excluded_reconstruction={}\n{}",
        header(name, cfg),
        match averaging {
            analysis::BoundaryAveraging::Pooled => "pooled",
            analysis::BoundaryAveraging::PerWord => "per-word",
        },
        report.boundary_precision,
        report.boundary_recall,
        report.boundary_f1,
        pw.precision,
        pw.recall,
        pw.f1,
        report.excluded_gold,
        report.excluded_reconstruction,
        write_report_csv(std::slice::from_ref(&row))
    );
    write_file(out, &body)?;
    print!("{}", alignment_table(&[row]));
    Ok(())
}

fn make_nonce(name: &str, cfg: &RunConfig) -> Result<(), CliError> {
    let out = required(&cfg.paths.out, "--out")?;
    let mut effective = cfg.clone();
    let n = *effective.datagen.n.get_or_insert(DEFAULT_NONCE_ROOTS);
    let seed = *effective.seed.get_or_insert(DEFAULT_SEED);
    let inventory = match &cfg.paths.patterns {
        Some(_) => {
            let path = input(&cfg.paths.patterns, "--patterns")?;
            parse_inventory(&read_text(path)?).map_err(data(path))?
        }
        None => default_nonce_inventory(),
    };
    let lexicon = match &cfg.paths.lexicon {
        Some(_) => {
            let path = input(&cfg.paths.lexicon, "--lexicon")?;
            Lexicon::parse(&read_text(path)?)
        }
        None => {
            log::warn!("no --lexicon given; generated roots are not checked against attested roots");
            Lexicon::default()
        }
    };
    let options = NonceOptions {
        allow_geminate: cfg.datagen.allow_geminate.unwrap_or(false),
        ..NonceOptions::default()
    };
    let roots = generate_nonce_roots(n, seed, &lexicon, &options).map_err(|e| CliError::Data(e.to_string()))?;
    let set = build_nonce_set(&roots, &inventory);
    let problems: Vec<String> = set
        .errors
        .iter()
        .map(|e| format!("({}, {}): {}", e.root, e.template, e.error))
        .collect();
    fail_with_problems(&problems, "nonce generation")?;
    let expectation = ShapeExpectation {
        patterns: Some(inventory.len()),
        pairs: Some(n * inventory.len()),
        rows: Some(n * inventory.len()),
        forms_per_pair: Some((1, 0)),
        categories: CategoryRule::Nonce,
    };
    let mut problems = record_problems("generated", &set.instances);
    problems.extend(dataset_shape_check(&set.instances, &expectation).iter().map(|v| v.to_string()));
    fail_with_problems(&problems, "generated dataset")?;
    write_file(out, &format!("{}{}", header(name, &effective), write_dataset(&set.instances)))?;
    eprintln!("{} nonce records ({} roots x {} patterns)", set.instances.len(), n, inventory.len());
    Ok(())
}

fn record_problems(label: &str, records: &[DatasetInstance]) -> Vec<String> {
    records
        .iter()
        .enumerate()
        .flat_map(|(i, r)| {
            validate_real_record(r)
                .into_iter()
                .map(move |v| format!("{label} record {}: {v}", i + 1))
        })
        .collect()
}

fn read_records(path: &Path) -> Result<Vec<DatasetInstance>, CliError> {
    read_dataset(open(path)?).map_err(data(path))
}

fn build_dataset(name: &str, cfg: &RunConfig) -> Result<(), CliError> {
    let real_path = input(&cfg.paths.real, "--real")?;
    let out = required(&cfg.paths.out, "--out")?;
    let reference = match cfg.datagen.expect.as_deref().unwrap_or("reference") {
        "reference" => true,
        "none" => false,
        other => return Err(CliError::Usage(format!("unknown --expect {other:?} (reference | none)"))),
    };
    let shape = |reference_shape: ShapeExpectation, categories| {
        if reference {
            reference_shape
        } else {
            ShapeExpectation { patterns: None, pairs: None, rows: None, forms_per_pair: None, categories }
        }
    };
    let mut records = read_records(real_path)?;
    let mut problems = record_problems("real", &records);
    problems.extend(
        dataset_shape_check(&records, &shape(ShapeExpectation::real_reference(), CategoryRule::Real))
            .iter()
            .map(|v| format!("real: {v}")),
    );
    if cfg.paths.nonce.is_some() {
        let nonce_path = input(&cfg.paths.nonce, "--nonce")?;
        let nonce = read_records(nonce_path)?;
        problems.extend(record_problems("nonce", &nonce));
        problems.extend(
            dataset_shape_check(&nonce, &shape(ShapeExpectation::nonce_reference(), CategoryRule::Nonce))
                .iter()
                .map(|v| format!("nonce: {v}")),
        );
        records.extend(nonce);
    }
    fail_with_problems(&problems, "dataset")?;
    write_file(out, &format!("{}{}", header(name, cfg), write_dataset(&records)))?;
    eprintln!("{} records", records.len());
    Ok(())
}

fn probe_setup(cfg: &RunConfig) -> Result<ProbeSetup, CliError> {
    let task: Task = required(&cfg.probe.task, "--task")?.parse().map_err(CliError::Usage)?;
    let language: Language = cfg.probe.lang.as_deref().unwrap_or("en").parse().map_err(CliError::Usage)?;
    let shots = cfg.probe.shots.unwrap_or(0);
    if shots > 1 {
        return Err(CliError::Usage(format!("--shots {shots}: only 0 or 1 is supported")));
    }
    let templates = match &cfg.paths.templates {
        Some(_) => {
            let dir = input(&cfg.paths.templates, "--templates")?;
            TemplateSet::builtin_with_overrides(dir).map_err(data(dir))?
        }
        None => TemplateSet::builtin(),
    };
    Ok(ProbeSetup { task, language, shots, templates })
}

fn render_prompts(name: &str, cfg: &RunConfig) -> Result<(), CliError> {
    let dataset_path = input(&cfg.paths.dataset, "--dataset")?;
    let setup = probe_setup(cfg)?;
    let records = read_records(dataset_path)?;
    let prompts = setup.render_all(&records).map_err(data(dataset_path))?;
    let mut body = header(name, cfg);
    for (instance_id, prompt) in prompts.iter().enumerate() {
        body.push_str(&serde_json::json!({ "instance_id": instance_id, "prompt": prompt }).to_string());
        body.push('\n');
    }
    emit(cfg.paths.out.as_ref(), &body)
}

/// Built-in stand-in model for dry runs.
fn mock_completer(kind: &str) -> Result<Box<dyn Completer>, CliError> {
    match kind {
        "oracle" => Ok(Box::new(OracleCompleter)),
        "root-echo" | "root_echo" => Ok(Box::new(RootEchoCompleter)),
        other => Err(CliError::Usage(format!("unknown --mock {other:?} (oracle | root-echo)"))),
    }
}

fn probe_config(cfg: &RunConfig, model: &str) -> ProbeConfig {
    let q = &cfg.probe;
    let endpoint = q.endpoint.as_deref().unwrap_or("http://127.0.0.1/unused");
    let mut config = ProbeConfig::for_model(endpoint, model);
    if let Some(t) = q.temperature {
        config.temperature = t;
    }
    if let Some(m) = q.max_tokens {
        config.max_tokens = m;
    }
    if let Some(r) = q.retry_limit {
        config.retry_limit = r;
    }
    if let Some(c) = q.concurrency {
        config.concurrency_limit = c;
    }
    if let Some(ms) = q.backoff_ms {
        config.backoff_base = Duration::from_millis(ms);
    }
    if let Some(ms) = q.timeout_ms {
        config.request_timeout = Duration::from_millis(ms);
    }
    config.requests_per_second = q.requests_per_second;
    config
}

fn probe(name: &str, cfg: &RunConfig) -> Result<(), CliError> {
    let dataset_path = input(&cfg.paths.dataset, "--dataset")?;
    let out = required(&cfg.paths.out, "--out")?;
    let model = required(&cfg.probe.model, "--model")?;
    let setup = probe_setup(cfg)?;
    let config = probe_config(cfg, model);
    config.validate().map_err(CliError::Usage)?;
    let completer: Box<dyn Completer> = match &cfg.probe.mock {
        Some(kind) => mock_completer(kind)?,
        None => {
            required(&cfg.probe.endpoint, "--endpoint (or --mock)")?;
            Box::new(HttpCompleter::from_env(&config).map_err(CliError::Endpoint)?)
        }
    };
    let records = read_records(dataset_path)?;
    let mut results = run_probe(&records, &setup, &config, completer.as_ref()).map_err(|e| match e {
        ProbeError::Auth { .. } => CliError::Endpoint(e.to_string()),
        ProbeError::InvalidConfig(msg) => CliError::Usage(msg),
        other => CliError::Data(format!("{}: {other}", dataset_path.display())),
    })?;
    if cfg.probe.omit_timing.unwrap_or(false) {
        for r in &mut results {
            r.latency_ms = None;
        }
    }
    let mut body = header(name, cfg);
    for r in &results {
        body.push_str(&r.to_json_line());
        body.push('\n');
    }
    write_file(out, &body)?;
    let tally = Tally::of(&results);
    eprintln!(
        "{model}: {}/{} correct ({}%), {} failed",
        tally.correct,
        tally.total,
        tally.inclusive_display(),
        tally.failed
    );
    if tally.failed == tally.total {
        return Err(CliError::Endpoint(format!("all {} requests failed", tally.total)));
    }
    Ok(())
}

fn score(name: &str, cfg: &RunConfig) -> Result<(), CliError> {
    if cfg.paths.results.is_empty() {
        return Err(CliError::Usage("missing --results".into()));
    }
    let by: GroupBy = cfg.metrics.group_by.as_deref().unwrap_or("task").parse().map_err(CliError::Usage)?;
    let mut results = Vec::new();
    for path in &cfg.paths.results {
        if !path.exists() {
            return Err(CliError::Usage(format!("--results {}: no such file", path.display())));
        }
        results.extend(morphprobe::probe::read_results(open(path)?).map_err(data(path))?);
    }
    if results.is_empty() {
        return Err(CliError::Data("no results to score".into()));
    }
    let rows: Vec<ScoreRow> = group_tallies(&results, by)
        .iter()
        .map(|((system, group), tally)| ScoreRow::new(system, group, tally))
        .collect();
    let body = format!("{}{}", header(name, cfg), write_score_csv(&rows));
    emit(cfg.paths.out.as_ref(), &body)?;
    if cfg.paths.out.is_some() {
        if by == GroupBy::Task {
            print!("{}", accuracy_table(&rows));
        } else {
            for r in &rows {
                println!("{}\t{}\t{} ({}/{})", r.system, r.group, r.accuracy, r.correct, r.total);
            }
        }
    }
    Ok(())
}

/// Every `*.csv` under `dir`, in name order.
fn csv_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(data(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    Ok(files)
}

fn read_reports(dir: &Path) -> Result<Vec<ReportRow>, CliError> {
    let mut rows = Vec::new();
    for path in csv_files(dir)? {
        rows.extend(read_report_csv(open(&path)?).map_err(data(&path))?);
    }
    Ok(rows)
}

fn read_scores(dir: &Path) -> Result<Vec<ScoreRow>, CliError> {
    let mut rows = Vec::new();
    for path in csv_files(dir)? {
        rows.extend(read_score_csv(open(&path)?).map_err(data(&path))?);
    }
    Ok(rows)
}

fn matrices(reports: &[ReportRow], scores: &[ScoreRow]) -> Vec<analysis::CorrelationMatrix> {
    let mut by_dataset: BTreeMap<&str, Vec<ReportRow>> = BTreeMap::new();
    for r in reports {
        by_dataset.entry(&r.dataset).or_default().push(r.clone());
    }
    by_dataset
        .into_iter()
        .filter_map(|(dataset, rows)| match correlate(dataset, &join_rows(&rows, scores)) {
            Ok(m) => Some(m),
            Err(e) => {
                log::warn!("dataset {dataset}: {e}");
                None
            }
        })
        .collect()
}

fn correlate_cmd(name: &str, cfg: &RunConfig) -> Result<(), CliError> {
    let reports = read_reports(input(&cfg.paths.reports, "--reports")?)?;
    let scores = read_scores(input(&cfg.paths.scores, "--scores")?)?;
    let out = required(&cfg.paths.out, "--out")?;
    let matrices = matrices(&reports, &scores);
    if matrices.is_empty() {
        return Err(CliError::Data("no dataset has reports for at least 2 systems".into()));
    }
    write_file(out, &format!("{}{}", header(name, cfg), write_matrix_csv(&matrices)))?;
    for m in &matrices {
        println!("{}", correlation_table(m));
    }
    Ok(())
}

fn report(name: &str, cfg: &RunConfig) -> Result<(), CliError> {
    let reports = read_reports(input(&cfg.paths.reports, "--reports")?)?;
    let scores = match &cfg.paths.scores {
        Some(_) => read_scores(input(&cfg.paths.scores, "--scores")?)?,
        None => Vec::new(),
    };
    let out = required(&cfg.paths.out, "--out")?;
    if reports.is_empty() && scores.is_empty() {
        return Err(CliError::Data("no report or score rows found".into()));
    }
    let head = header(name, cfg);
    let write = |file: &str, body: String| write_file(&out.join(file), &format!("{head}{body}"));
    if !reports.is_empty() {
        write("alignment.csv", write_report_csv(&reports))?;
        write("alignment.txt", alignment_table(&reports))?;
    }
    let task_scores: Vec<ScoreRow> = scores
        .iter()
        .filter(|s| analysis::TASKS.contains(&s.group.as_str()))
        .cloned()
        .collect();
    if !task_scores.is_empty() {
        write("accuracy.csv", write_score_csv(&task_scores))?;
        write("accuracy.txt", accuracy_table(&task_scores))?;
    }
    let matrices = matrices(&reports, &task_scores);
    if !matrices.is_empty() {
        write("correlation.csv", write_matrix_csv(&matrices))?;
        write(
            "correlation.txt",
            matrices.iter().map(correlation_table).collect::<Vec<_>>().join("\n"),
        )?;
        for m in &matrices {
            write(&format!("correlation_{}.csv", m.dataset), write_matrix_wide_csv(m))?;
        }
    }
    eprintln!("tables written to {}", out.display());
    Ok(())
}
