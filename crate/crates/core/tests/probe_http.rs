use std::collections::HashMap;
use std::sync::Mutex;
use std::time::Duration;

use morphprobe::datagen::{build_nonce_set, generate_nonce_roots, DatasetInstance, Lexicon, NonceOptions};
use morphprobe::probe::{
    run_probe, HttpCompleter, Language, MockReply, MockServer, OracleCompleter, ProbeConfig, ProbeError,
    ProbeResult, ProbeSetup, RootEchoCompleter, Tally, Task,
};
use morphprobe::templatic::default_nonce_inventory;

fn dataset(n: usize) -> Vec<DatasetInstance> {
    let roots = generate_nonce_roots(n, 9, &Lexicon::default(), &NonceOptions::default()).unwrap();
    build_nonce_set(&roots, &default_nonce_inventory()).instances
}

fn config(url: &str, model: &str) -> ProbeConfig {
    let mut c = ProbeConfig::for_model(url, model);
    c.backoff_base = Duration::from_millis(1);
    c.request_timeout = Duration::from_secs(10);
    c.retry_limit = 2;
    c
}

fn probe(data: &[DatasetInstance], cfg: &ProbeConfig) -> Result<Vec<ProbeResult>, ProbeError> {
    let client = HttpCompleter::new(cfg, Some("test-key".into())).unwrap();
    run_probe(data, &ProbeSetup::new(Task::RootPattern, Language::En, 1), cfg, &client)
}

#[test]
fn oracle_over_http_scores_everything() {
    let server = MockServer::serving(OracleCompleter).unwrap();
    let data = dataset(4);
    let results = probe(&data, &config(&server.url(), "gpt-4o")).unwrap();
    assert_eq!(results.len(), 20);
    assert!(results.iter().all(|r| r.correct && r.attempt_count == 1 && r.failure.is_none()));
    assert_eq!(server.calls(), 20);
    for (i, r) in results.iter().enumerate() {
        assert_eq!(r.instance_id, i);
        assert_eq!(r.target, data[i].base_form);
    }
}

#[test]
fn request_carries_model_settings() {
    let seen = Mutex::new(Vec::new());
    let seen = std::sync::Arc::new(seen);
    let log = std::sync::Arc::clone(&seen);
    let server = MockServer::start(move |req, _| {
        log.lock().unwrap().push((req.model.clone(), req.temperature, req.max_tokens, req.messages.len()));
        MockReply::content("x")
    })
    .unwrap();
    let data = dataset(1);
    probe(&data[..1], &config(&server.url(), "gpt-4o")).unwrap();
    probe(&data[..1], &config(&server.url(), "jais-30b")).unwrap();
    let seen = seen.lock().unwrap();
    assert_eq!(seen[0], ("gpt-4o".to_owned(), 0.6, 8, 1));
    assert_eq!(seen[1], ("jais-30b".to_owned(), 0.6, 80, 1));
}

#[test]
fn rate_limit_then_success_is_retried() {
    let counts: Mutex<HashMap<String, usize>> = Mutex::new(HashMap::new());
    let server = MockServer::start(move |req, _| {
        let mut counts = counts.lock().unwrap();
        let n = counts.entry(req.prompt().to_owned()).or_default();
        *n += 1;
        if *n == 1 {
            MockReply::status(429)
        } else {
            MockReply::content(&OracleCompleter::answer(req.prompt()).unwrap())
        }
    })
    .unwrap();
    let results = probe(&dataset(2), &config(&server.url(), "gpt-4o")).unwrap();
    assert!(results.iter().all(|r| r.correct && r.attempt_count == 2));
    assert_eq!(server.calls(), 20);
}

#[test]
fn persistent_server_errors_become_failures() {
    let server = MockServer::start(|_, _| MockReply::status(500)).unwrap();
    let cfg = config(&server.url(), "gpt-4o");
    let results = probe(&dataset(1), &cfg).unwrap();
    assert!(results.iter().all(|r| !r.correct && r.failure.is_some() && r.attempt_count == cfg.retry_limit + 1));
    let tally = Tally::of(&results);
    assert_eq!((tally.correct, tally.total, tally.failed), (0, 5, 5));
    assert_eq!(tally.inclusive_display(), "0.00");
    assert_eq!(tally.exclusive_display(), "NA");
}

#[test]
fn client_errors_are_not_retried() {
    let server = MockServer::start(|_, _| MockReply::status(400)).unwrap();
    let results = probe(&dataset(1), &config(&server.url(), "gpt-4o")).unwrap();
    assert!(results.iter().all(|r| r.attempt_count == 1 && r.failure.is_some()));
    assert_eq!(server.calls(), 5);
}

#[test]
fn garbled_body_is_a_failure() {
    let server = MockServer::start(|_, _| MockReply { status: 200, body: "not json".into() }).unwrap();
    let results = probe(&dataset(1), &config(&server.url(), "gpt-4o")).unwrap();
    assert!(results.iter().all(|r| r.failure.is_some() && !r.correct));
}

#[test]
fn refused_credentials_abort_the_run() {
    for status in [401, 403] {
        let server = MockServer::start(move |_, _| MockReply::status(status)).unwrap();
        let err = probe(&dataset(4), &config(&server.url(), "gpt-4o")).unwrap_err();
        assert!(matches!(err, ProbeError::Auth { .. }), "{status}: {err}");
        assert!(server.calls() < 20);
    }
}

#[test]
fn results_do_not_depend_on_concurrency() {
    let server = MockServer::serving(RootEchoCompleter).unwrap();
    let data = dataset(6);
    let strip = |mut rs: Vec<ProbeResult>| {
        rs.iter_mut().for_each(|r| r.latency_ms = None);
        rs
    };
    let mut serial = config(&server.url(), "gpt-4o");
    serial.concurrency_limit = 1;
    let mut parallel = serial.clone();
    parallel.concurrency_limit = 8;
    let a = strip(probe(&data, &serial).unwrap());
    let b = strip(probe(&data, &parallel).unwrap());
    assert_eq!(a, b);
    assert!(a.iter().all(|r| !r.correct));
}

#[test]
fn rate_limited_run_still_completes() {
    let server = MockServer::serving(OracleCompleter).unwrap();
    let mut cfg = config(&server.url(), "gpt-4o");
    cfg.requests_per_second = Some(200.0);
    let results = probe(&dataset(2), &cfg).unwrap();
    assert!(results.iter().all(|r| r.correct));
}

#[test]
fn unreachable_endpoint_fails_every_instance() {
    // A server that has shut down leaves its port closed.
    let url = MockServer::serving(OracleCompleter).unwrap().url();
    let mut cfg = config(&url, "gpt-4o");
    cfg.retry_limit = 0;
    let results = probe(&dataset(1), &cfg).unwrap();
    assert!(results.iter().all(|r| r.failure.is_some()));
}
