use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use interank_core::harness::{generate, run_session, SynthConfig};
use interank_core::{CandidatePool, Learner, SessionConfig, Strategy, WarmStart};
use interank_service::{router, AppState};

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    call(app, Method::GET, uri, None).await
}

async fn post(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
    call(app, Method::POST, uri, Some(body)).await
}

fn pool_json(pool: &CandidatePool) -> Value {
    let candidates: Vec<Value> = pool
        .candidates
        .iter()
        .map(|c| json!({ "id": c.id, "features": c.features, "text": format!("candidate {}", c.id) }))
        .collect();
    json!({ "topic_id": pool.topic_id, "candidates": candidates })
}

fn synth_pool(n: usize, seed: u64) -> CandidatePool {
    generate(&SynthConfig::new(n, 4, seed)).unwrap().pool
}

async fn create(app: &Router, cfg: &SessionConfig, pool: &CandidatePool, priors: Option<&[f64]>) -> (StatusCode, Value) {
    let mut body = json!({ "config": cfg, "pool": pool_json(pool) });
    if let Some(p) = priors {
        body["priors"] = json!(p);
    }
    post(app, "/v1/sessions", body).await
}

fn ids(ranking: &Value) -> Vec<usize> {
    ranking.as_array().unwrap().iter().map(|r| r["id"].as_u64().unwrap() as usize).collect()
}

fn pair_of(query: &Value) -> (usize, usize) {
    (query["a"]["id"].as_u64().unwrap() as usize, query["b"]["id"].as_u64().unwrap() as usize)
}

#[tokio::test]
async fn create_returns_201_with_full_ranking() {
    let app = router(AppState::new());
    let cfg = SessionConfig::new(Learner::Gppl, Strategy::Eig, WarmStart::None, 10, 0);
    let (status, body) = create(&app, &cfg, &synth_pool(100, 1), None).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(body["schema_version"], 1);
    assert_eq!(body["status"], "ready");
    assert!(!body["session_id"].as_str().unwrap().is_empty());
    assert_eq!(ids(&body["ranking"]).len(), 100);
}

#[tokio::test]
async fn create_rejects_single_candidate_pool() {
    let app = router(AppState::new());
    let cfg = SessionConfig::new(Learner::Gppl, Strategy::Eig, WarmStart::None, 10, 0);
    let body = json!({ "config": cfg, "pool": { "candidates": [{ "features": [0.0, 1.0] }] } });
    let (status, err) = post(&app, "/v1/sessions", body).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(err["code"], "validation_failed");
    assert!(err["message"].is_string());
}

#[tokio::test]
async fn create_rejects_prior_warm_start_without_priors() {
    let app = router(AppState::new());
    let cfg = SessionConfig::new(Learner::Gppl, Strategy::Imp, WarmStart::Prior, 10, 0);
    let (status, err) = create(&app, &cfg, &synth_pool(10, 2), None).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{err}");
}

#[tokio::test]
async fn create_reports_pool_validation_issues() {
    let app = router(AppState::new());
    let cfg = SessionConfig::new(Learner::Gppl, Strategy::Eig, WarmStart::None, 10, 0);
    let body = json!({ "config": cfg, "pool": { "candidates": [
        { "features": [0.0, 1.0] },
        { "features": [0.0] },
        { "features": [1.0, f64::MAX] }
    ] } });
    let (status, err) = post(&app, "/v1/sessions", body).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(err["details"]["issues"].as_array().is_some_and(|v| !v.is_empty()), "{err}");
}

#[tokio::test]
async fn malformed_json_is_a_bad_request() {
    let app = router(AppState::new());
    let req = Request::builder()
        .method(Method::POST)
        .uri("/v1/sessions")
        .header("content-type", "application/json")
        .body(Body::from("{not json"))
        .unwrap();
    let resp = app.oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn registered_pools_are_usable_by_id() {
    let state = AppState::new();
    state.register_pool("topic-a", synth_pool(12, 3));
    let app = router(state);
    let cfg = SessionConfig::new(Learner::Bt, Strategy::Unc, WarmStart::None, 4, 0);
    let (status, body) = post(&app, "/v1/sessions", json!({ "config": cfg, "pool_id": "topic-a" })).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(ids(&body["ranking"]).len(), 12);
    let (status, _) = post(&app, "/v1/sessions", json!({ "config": cfg, "pool_id": "missing" })).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn unknown_session_is_404() {
    let app = router(AppState::new());
    for uri in ["/v1/sessions/nope", "/v1/sessions/nope/query", "/v1/sessions/nope/ranking", "/v1/sessions/nope/events"] {
        let (status, err) = get(&app, uri).await;
        assert_eq!(status, StatusCode::NOT_FOUND, "{uri}");
        assert_eq!(err["code"], "not_found");
    }
    let (status, _) = post(&app, "/v1/sessions/nope/labels", json!({ "a_id": 0, "b_id": 1, "label": 1 })).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn fresh_imp_query_contains_the_prior_incumbent() {
    let app = router(AppState::new());
    let mut sc = SynthConfig::new(20, 3, 4);
    sc.prior_correlation = Some(0.5);
    let data = generate(&sc).unwrap();
    let mu = data.priors.unwrap().mu;
    let incumbent = (0..mu.len()).max_by(|&i, &j| mu[i].total_cmp(&mu[j])).unwrap();
    let cfg = SessionConfig::new(Learner::Gppl, Strategy::Imp, WarmStart::Prior, 5, 0);
    let (_, created) = create(&app, &cfg, &data.pool, Some(&mu)).await;
    assert_eq!(ids(&created["ranking"])[0], incumbent);
    let id = created["session_id"].as_str().unwrap();
    let (status, q) = get(&app, &format!("/v1/sessions/{id}/query")).await;
    assert_eq!(status, StatusCode::OK);
    let (a, b) = pair_of(&q);
    assert!(a == incumbent || b == incumbent, "pair ({a}, {b}), incumbent {incumbent}");
}

#[tokio::test]
async fn no_labels_prior_warm_start_ranks_in_prior_order() {
    let app = router(AppState::new());
    let pool = synth_pool(8, 5);
    let mu = vec![0.3, -1.0, 2.0, 0.0, 1.5, -0.2, 0.9, 0.1];
    let cfg = SessionConfig::new(Learner::Gppl, Strategy::Eig, WarmStart::Prior, 5, 0);
    let (_, created) = create(&app, &cfg, &pool, Some(&mu)).await;
    let id = created["session_id"].as_str().unwrap();
    let (status, r) = get(&app, &format!("/v1/sessions/{id}/ranking")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(ids(&r["ranking"]), vec![2, 4, 6, 0, 7, 3, 5, 1]);
    let (_, top) = get(&app, &format!("/v1/sessions/{id}/ranking?top_k=5")).await;
    assert_eq!(ids(&top["ranking"]), vec![2, 4, 6, 0, 7]);
    let (_, all) = get(&app, &format!("/v1/sessions/{id}/ranking?top_k=50")).await;
    assert_eq!(ids(&all["ranking"]).len(), 8);
    let (status, _) = get(&app, &format!("/v1/sessions/{id}/ranking?top_k=0")).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) = get(&app, &format!("/v1/sessions/{id}/ranking?top_k=abc")).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn query_is_idempotent_and_labels_follow_the_protocol() {
    let app = router(AppState::new());
    let cfg = SessionConfig::new(Learner::Gppl, Strategy::Eig, WarmStart::None, 2, 7);
    let (_, created) = create(&app, &cfg, &synth_pool(10, 6), None).await;
    let id = created["session_id"].as_str().unwrap().to_string();
    let q_uri = format!("/v1/sessions/{id}/query");
    let l_uri = format!("/v1/sessions/{id}/labels");

    let (status, err) = post(&app, &l_uri, json!({ "a_id": 0, "b_id": 1, "label": 1 })).await;
    assert_eq!(status, StatusCode::CONFLICT, "label before any query: {err}");

    let (_, q1) = get(&app, &q_uri).await;
    let (_, q2) = get(&app, &q_uri).await;
    assert_eq!(q1, q2);
    assert_eq!(q1["remaining"], 2);
    let (a, b) = pair_of(&q1);
    let placement = (q1["placement"]["left"].as_u64().unwrap() as usize, q1["placement"]["right"].as_u64().unwrap() as usize);
    assert!(placement == (a, b) || placement == (b, a));
    assert_eq!(q1["a"]["text"], format!("candidate {a}"));

    let other = (0..10).find(|&c| c != a && c != b).unwrap();
    let (status, err) = post(&app, &l_uri, json!({ "a_id": a, "b_id": other, "label": 1 })).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err["code"], "conflict");
    for bad in [json!(2), json!("yes"), json!(0.5), json!(null), json!(-1)] {
        let (status, _) = post(&app, &l_uri, json!({ "a_id": a, "b_id": b, "label": bad })).await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "label {bad}");
    }

    let (_, view) = get(&app, &format!("/v1/sessions/{id}")).await;
    assert_eq!(view["status"], "awaiting_label");
    assert_eq!(view["pending"]["a_id"], a);

    let (status, l1) = post(&app, &l_uri, json!({ "a_id": a, "b_id": b, "label": 1 })).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(l1["status"], "ready");
    assert_eq!(l1["labels"], 1);
    assert_eq!(ids(&l1["ranking"]).len(), 10);

    let (status, _) = post(&app, &l_uri, json!({ "a_id": a, "b_id": b, "label": 1 })).await;
    assert_eq!(status, StatusCode::CONFLICT, "stale pair");

    let (_, q3) = get(&app, &q_uri).await;
    let (c, d) = pair_of(&q3);
    let (status, l2) = post(&app, &l_uri, json!({ "a_id": d, "b_id": c, "label": false })).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(l2["status"], "complete");
    assert_eq!(l2["remaining"], 0);

    let (status, _) = get(&app, &q_uri).await;
    assert_eq!(status, StatusCode::CONFLICT, "query at budget");
    let (_, view) = get(&app, &format!("/v1/sessions/{id}")).await;
    assert_eq!(view["status"], "complete");
    assert_eq!(view["labels"], 2);
    assert_eq!(view["iteration"], 2);
    assert!(view["pending"].is_null());

    let (_, ev) = get(&app, &format!("/v1/sessions/{id}/events")).await;
    let kinds: Vec<&str> = ev["events"].as_array().unwrap().iter().map(|e| e["event"].as_str().unwrap()).collect();
    assert_eq!(kinds, ["created", "query", "label", "query", "label"]);
}

#[tokio::test]
async fn batched_sessions_query_each_pair_of_the_batch() {
    let app = router(AppState::new());
    let mut cfg = SessionConfig::new(Learner::Gppl, Strategy::Eig, WarmStart::None, 6, 1);
    cfg.batch_size = 3;
    let (_, created) = create(&app, &cfg, &synth_pool(12, 8), None).await;
    let id = created["session_id"].as_str().unwrap().to_string();
    let mut refits = Vec::new();
    for _ in 0..6 {
        let (_, q) = get(&app, &format!("/v1/sessions/{id}/query")).await;
        let (a, b) = pair_of(&q);
        let (status, _) = post(&app, &format!("/v1/sessions/{id}/labels"), json!({ "a_id": a, "b_id": b, "label": 1 })).await;
        assert_eq!(status, StatusCode::OK);
        let (_, view) = get(&app, &format!("/v1/sessions/{id}")).await;
        refits.push(view["iteration"].as_u64().unwrap());
    }
    assert_eq!(refits, [0, 0, 1, 1, 1, 2]);
}

/// Drives a session over HTTP with the labels a harness simulation produced.
async fn replay_harness_labels(cfg: &SessionConfig, seed: u64, priors: bool) {
    let mut sc = SynthConfig::new(25, 3, seed);
    if priors {
        sc.prior_correlation = Some(0.4);
    }
    let data = generate(&sc).unwrap();
    let pool = Arc::new(data.pool.clone());
    let sim = run_session(cfg, pool, &data.gold, data.priors.as_ref()).unwrap();

    let app = router(AppState::new());
    let mu = data.priors.as_ref().map(|p| p.mu.clone());
    let (status, created) = create(&app, cfg, &data.pool, mu.as_deref()).await;
    assert_eq!(status, StatusCode::CREATED, "{created}");
    let id = created["session_id"].as_str().unwrap().to_string();
    for rec in &sim.data.records {
        let (_, q) = get(&app, &format!("/v1/sessions/{id}/query")).await;
        let (a, b) = pair_of(&q);
        assert!((a, b) == (rec.a_id, rec.b_id) || (a, b) == (rec.b_id, rec.a_id));
        let body = json!({ "a_id": rec.a_id, "b_id": rec.b_id, "label": rec.label as u8 });
        let (status, _) = post(&app, &format!("/v1/sessions/{id}/labels"), body).await;
        assert_eq!(status, StatusCode::OK);
    }
    let (_, r) = get(&app, &format!("/v1/sessions/{id}/ranking")).await;
    assert_eq!(ids(&r["ranking"]), sim.ranked_ids);
    let utilities: Vec<f64> = r["ranking"].as_array().unwrap().iter().map(|e| e["utility"].as_f64().unwrap()).collect();
    let expected: Vec<f64> = sim.ranked_ids.iter().map(|&i| sim.final_utilities[i]).collect();
    assert_eq!(utilities, expected);
}

#[tokio::test]
async fn http_replay_matches_the_harness() {
    for (i, (learner, strategy, warm)) in [
        (Learner::Gppl, Strategy::Eig, WarmStart::None),
        (Learner::Gppl, Strategy::Imp, WarmStart::Prior),
        (Learner::Gppl, Strategy::Tp, WarmStart::Sum),
        (Learner::Bt, Strategy::Unc, WarmStart::Sum),
        (Learner::Gppl, Strategy::Random, WarmStart::None),
    ]
    .into_iter()
    .enumerate()
    {
        let mut cfg = SessionConfig::new(learner, strategy, warm, 12, 40 + i as u64);
        cfg.batch_size = if i % 2 == 0 { 1 } else { 2 };
        replay_harness_labels(&cfg, 100 + i as u64, warm != WarmStart::None).await;
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_submissions_admit_exactly_one() {
    let app = router(AppState::new());
    let cfg = SessionConfig::new(Learner::Gppl, Strategy::Eig, WarmStart::None, 10, 3);
    let (_, created) = create(&app, &cfg, &synth_pool(30, 9), None).await;
    let id = created["session_id"].as_str().unwrap().to_string();
    let (_, q) = get(&app, &format!("/v1/sessions/{id}/query")).await;
    let (a, b) = pair_of(&q);
    let tasks: Vec<_> = (0..16)
        .map(|k| {
            let app = app.clone();
            let uri = format!("/v1/sessions/{id}/labels");
            tokio::spawn(async move { post(&app, &uri, json!({ "a_id": a, "b_id": b, "label": k % 2 })).await.0 })
        })
        .collect();
    let mut ok = 0;
    for t in tasks {
        match t.await.unwrap() {
            StatusCode::OK => ok += 1,
            StatusCode::CONFLICT => {}
            other => panic!("unexpected status {other}"),
        }
    }
    assert_eq!(ok, 1);
    let (_, view) = get(&app, &format!("/v1/sessions/{id}")).await;
    assert_eq!(view["labels"], 1);
    let (_, ev) = get(&app, &format!("/v1/sessions/{id}/events")).await;
    let labels: Vec<&Value> = ev["events"].as_array().unwrap().iter().filter(|e| e["event"] == "label").collect();
    assert_eq!(labels.len(), 1);
    assert_eq!((labels[0]["a_id"].as_u64(), labels[0]["b_id"].as_u64()), (Some(a as u64), Some(b as u64)));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn sessions_and_reads_progress_concurrently() {
    let app = router(AppState::new());
    let cfg = SessionConfig::new(Learner::Gppl, Strategy::Eig, WarmStart::None, 10, 3);
    let (_, created) = create(&app, &cfg, &synth_pool(20, 10), None).await;
    let id = created["session_id"].as_str().unwrap().to_string();
    // Several sessions progress concurrently.
    let others: Vec<_> = (0..4)
        .map(|s| {
            let app = app.clone();
            tokio::spawn(async move {
                let cfg = SessionConfig::new(Learner::Gppl, Strategy::Unpa, WarmStart::None, 3, s);
                let (_, c) = create(&app, &cfg, &synth_pool(15, 20 + s), None).await;
                let sid = c["session_id"].as_str().unwrap().to_string();
                for _ in 0..3 {
                    let (_, q) = get(&app, &format!("/v1/sessions/{sid}/query")).await;
                    let (a, b) = pair_of(&q);
                    post(&app, &format!("/v1/sessions/{sid}/labels"), json!({ "a_id": a, "b_id": b, "label": 1 })).await;
                }
                let (_, v) = get(&app, &format!("/v1/sessions/{sid}")).await;
                v["status"].as_str().unwrap().to_string()
            })
        })
        .collect();
    for _ in 0..20 {
        let (status, r) = get(&app, &format!("/v1/sessions/{id}/ranking")).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(r["labels"], 0);
    }
    for o in others {
        assert_eq!(o.await.unwrap(), "complete");
    }
}

#[tokio::test]
async fn event_log_replay_restores_identical_state() {
    let live_dir = tempfile::tempdir().unwrap();
    let crash_dir = tempfile::tempdir().unwrap();
    let app = router(AppState::with_log_dir(live_dir.path()));
    let mut cfg = SessionConfig::new(Learner::Gppl, Strategy::Tp, WarmStart::Prior, 9, 11);
    cfg.batch_size = 2;
    let mut sc = SynthConfig::new(18, 3, 12);
    sc.prior_correlation = Some(0.5);
    let data = generate(&sc).unwrap();
    let mu = data.priors.unwrap().mu;
    let (_, created) = create(&app, &cfg, &data.pool, Some(&mu)).await;
    let id = created["session_id"].as_str().unwrap().to_string();
    for k in 0..5 {
        let (_, q) = get(&app, &format!("/v1/sessions/{id}/query")).await;
        let (a, b) = pair_of(&q);
        post(&app, &format!("/v1/sessions/{id}/labels"), json!({ "a_id": a, "b_id": b, "label": k % 3 == 0 })).await;
    }
    // Leave a pair pending so the placement must survive too.
    let (_, pending) = get(&app, &format!("/v1/sessions/{id}/query")).await;

    let log = format!("{id}.jsonl");
    std::fs::copy(live_dir.path().join(&log), crash_dir.path().join(&log)).unwrap();
    let restored_state = interank_service::AppState::restore(crash_dir.path()).unwrap();
    assert_eq!(restored_state.session_ids(), vec![id.clone()]);
    let restored = router(restored_state);

    for suffix in ["", "/ranking", "/events", "/query"] {
        let uri = format!("/v1/sessions/{id}{suffix}");
        assert_eq!(get(&app, &uri).await, get(&restored, &uri).await, "{uri}");
    }
    assert_eq!(get(&restored, &format!("/v1/sessions/{id}/query")).await.1, pending);

    // Both continue identically, and the restored one keeps logging.
    for k in 0..4 {
        let (_, q) = get(&app, &format!("/v1/sessions/{id}/query")).await;
        assert_eq!(get(&restored, &format!("/v1/sessions/{id}/query")).await.1, q);
        let (a, b) = pair_of(&q);
        let body = json!({ "a_id": a, "b_id": b, "label": k % 2 });
        let l1 = post(&app, &format!("/v1/sessions/{id}/labels"), body.clone()).await;
        let l2 = post(&restored, &format!("/v1/sessions/{id}/labels"), body).await;
        assert_eq!(l1, l2);
    }
    let a = std::fs::read_to_string(live_dir.path().join(&log)).unwrap();
    let b = std::fs::read_to_string(crash_dir.path().join(&log)).unwrap();
    assert_eq!(a, b);
    let twice = router(interank_service::AppState::restore(crash_dir.path()).unwrap());
    assert_eq!(
        get(&app, &format!("/v1/sessions/{id}")).await,
        get(&twice, &format!("/v1/sessions/{id}")).await
    );
}

#[tokio::test]
async fn tampered_log_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(AppState::with_log_dir(dir.path()));
    let cfg = SessionConfig::new(Learner::Gppl, Strategy::Eig, WarmStart::None, 4, 0);
    let (_, created) = create(&app, &cfg, &synth_pool(10, 13), None).await;
    let id = created["session_id"].as_str().unwrap().to_string();
    get(&app, &format!("/v1/sessions/{id}/query")).await;
    let path = dir.path().join(format!("{id}.jsonl"));
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let q = lines.last_mut().unwrap();
    let (a, b) = (q["a_id"].clone(), q["b_id"].clone());
    q["a_id"] = b;
    q["b_id"] = a;
    let tampered: String = lines.iter().map(|l| format!("{l}\n")).collect();
    std::fs::write(&path, tampered).unwrap();
    assert!(AppState::restore(dir.path()).is_err());
}
