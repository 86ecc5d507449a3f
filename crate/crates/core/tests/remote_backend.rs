mod common;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use common::FakeServer;
use glossdom::dataset::GlossRecord;
use glossdom::engine::{classify, EngineConfig};
use glossdom::labelspace::LabelSpace;
use glossdom::scorer::{MockScorer, RemoteConfig, RemoteScorer, Scorer, ScorerError, SentencePair};

fn quick(url: &str) -> RemoteConfig {
    let mut c = RemoteConfig::new(url, "test-model");
    c.initial_backoff = Duration::from_millis(1);
    c.timeout = Duration::from_secs(5);
    c
}

fn pairs(n: usize) -> Vec<SentencePair> {
    (0..n)
        .map(|i| SentencePair::new(format!("word{i} shared"), format!("shared word{}", i % 3)))
        .collect()
}

#[test]
fn matches_in_process_scorer() {
    let server = FakeServer::scoring(MockScorer::new());
    let remote = RemoteScorer::new(quick(&server.url)).unwrap();
    let mock = MockScorer::new();
    let batch = pairs(7);
    assert_eq!(remote.score_nli(&batch).unwrap(), mock.score_nli(&batch).unwrap());
    assert_eq!(remote.score_nsp(&batch).unwrap(), mock.score_nsp(&batch).unwrap());
    let seq = "Context: red card in football Topic: [MASK]";
    assert_eq!(remote.fill_mask(seq, 2).unwrap(), mock.fill_mask(seq, 2).unwrap());

    let labels = LabelSpace::from_names("x", &["Health and medicine", "Music", "Sport"]).unwrap();
    let gloss = GlossRecord::new("g", "a health facility where patients receive treatment");
    let cfg = EngineConfig::default().with_descriptors(true);
    assert_eq!(
        classify(&gloss, &labels, &cfg, &remote).unwrap(),
        classify(&gloss, &labels, &cfg, &mock).unwrap()
    );
}

#[test]
fn request_shape() {
    let server = FakeServer::scoring(MockScorer::new());
    let remote = RemoteScorer::new(quick(&server.url)).unwrap();
    remote.score_nli(&[SentencePair::new("p", "h")]).unwrap();
    remote.fill_mask("x [MASK]", 3).unwrap();
    let reqs = server.requests();
    let nli: serde_json::Value = serde_json::from_str(&reqs[0]).unwrap();
    assert_eq!(
        nli,
        serde_json::json!({"task": "nli", "model": "test-model", "inputs": [{"first": "p", "second": "h"}]})
    );
    let mlm: serde_json::Value = serde_json::from_str(&reqs[1]).unwrap();
    assert_eq!(
        mlm,
        serde_json::json!({"task": "mlm", "model": "test-model", "inputs": [{"sequence": "x [MASK]"}], "top_k": 3})
    );
}

#[test]
fn chunks_keep_order_and_respect_cap() {
    let server = FakeServer::start(|_, body| {
        thread::sleep(Duration::from_millis(30));
        glossdom::scorer::wire::handle_request(&MockScorer::new(), body)
    });
    let mut cfg = quick(&server.url);
    cfg.max_batch_size = 3;
    cfg.max_in_flight = 2;
    let remote = RemoteScorer::new(cfg).unwrap();
    let batch = pairs(20);
    let got = remote.score_nli(&batch).unwrap();
    assert_eq!(got, MockScorer::new().score_nli(&batch).unwrap());
    assert_eq!(server.requests().len(), 7);
    assert!(server.peak_concurrency() <= 2, "peak {}", server.peak_concurrency());
    assert!(server.peak_concurrency() >= 2);
}

#[test]
fn retries_transient_failures() {
    let calls = Arc::new(AtomicUsize::new(0));
    let seen = calls.clone();
    let server = FakeServer::start(move |i, body| {
        seen.fetch_add(1, Ordering::SeqCst);
        if i < 2 {
            (503, r#"{"error":"warming up"}"#.into())
        } else {
            glossdom::scorer::wire::handle_request(&MockScorer::new(), body)
        }
    });
    let remote = RemoteScorer::new(quick(&server.url)).unwrap();
    assert!(remote.score_nli(&pairs(2)).is_ok());
    assert_eq!(calls.load(Ordering::SeqCst), 3);
}

#[test]
fn gives_up_after_bounded_retries() {
    let server = FakeServer::start(|_, _| (500, r#"{"error":"model crashed"}"#.into()));
    let remote = RemoteScorer::new(quick(&server.url)).unwrap();
    let err = remote.score_nli(&pairs(1)).unwrap_err();
    assert!(err.is_backend_failure());
    match err {
        ScorerError::Backend { status, message } => {
            assert_eq!(status, Some(500));
            assert_eq!(message, "model crashed");
        }
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(server.requests().len(), 4);
}

#[test]
fn client_errors_are_not_retried() {
    let server = FakeServer::start(|_, _| (422, r#"{"error":"bad input"}"#.into()));
    let remote = RemoteScorer::new(quick(&server.url)).unwrap();
    let err = remote.score_nsp(&pairs(1)).unwrap_err();
    assert!(matches!(err, ScorerError::Backend { status: Some(422), .. }));
    assert_eq!(server.requests().len(), 1);
}

#[test]
fn connection_refused_is_transport() {
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let remote = RemoteScorer::new(quick(&format!("http://127.0.0.1:{port}"))).unwrap();
    match remote.score_nli(&pairs(1)).unwrap_err() {
        ScorerError::Transport { attempts, .. } => assert_eq!(attempts, 4),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn timeouts_are_transport_errors() {
    let server = FakeServer::start(|_, _| {
        thread::sleep(Duration::from_millis(400));
        (200, "{}".into())
    });
    let mut cfg = quick(&server.url);
    cfg.timeout = Duration::from_millis(50);
    cfg.max_retries = 1;
    let remote = RemoteScorer::new(cfg).unwrap();
    assert!(matches!(
        remote.score_nli(&pairs(1)).unwrap_err(),
        ScorerError::Transport { attempts: 2, .. }
    ));
}

#[test]
fn malformed_responses_are_protocol_errors() {
    let server = FakeServer::start(|_, _| (200, "not json at all".into()));
    let remote = RemoteScorer::new(quick(&server.url)).unwrap();
    match remote.score_nli(&pairs(1)).unwrap_err() {
        ScorerError::Protocol { excerpt, .. } => assert!(excerpt.contains("not json")),
        other => panic!("unexpected {other:?}"),
    }

    let server = FakeServer::start(|_, _| {
        (200, r#"{"normalized":true,"results":[{"is_next":0.5}]}"#.into())
    });
    let remote = RemoteScorer::new(quick(&server.url)).unwrap();
    assert!(matches!(
        remote.score_nsp(&pairs(2)).unwrap_err(),
        ScorerError::Protocol { .. }
    ));
}

#[test]
fn unsupported_formulation_is_refused_locally() {
    let server = FakeServer::scoring(MockScorer::new());
    let mut cfg = quick(&server.url);
    cfg.supported = [glossdom::scorer::Formulation::Nli].into_iter().collect();
    let remote = RemoteScorer::new(cfg).unwrap();
    assert!(matches!(
        remote.fill_mask("x [MASK]", 1).unwrap_err(),
        ScorerError::Unsupported { .. }
    ));
    assert!(server.requests().is_empty());
}
