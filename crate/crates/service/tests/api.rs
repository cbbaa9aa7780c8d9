use std::collections::BTreeMap;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use adabal_core::dataset::{make_synthetic, standardize, Dataset, SyntheticSpec};
use adabal_core::engine::{ALSession, SessionConfig, SessionMode};
use adabal_core::strategies::{BalancingParams, StrategyKind};
use adabal_service::{router, AppState, SCHEMA};

fn toy(n: usize, name: &str) -> Dataset {
    let mut ds = make_synthetic(&SyntheticSpec::clustered_and_scattered(n), 21).unwrap();
    ds.name = name.to_string();
    ds
}

fn state() -> Arc<AppState> {
    Arc::new(AppState::new(vec![toy(300, "toy"), toy(150, "tiny")], None).unwrap())
}

async fn call(state: &Arc<AppState>, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = match body {
        Some(v) => req.body(Body::from(v.to_string())).unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = router(state.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value =
        serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()));
    (status, value)
}

async fn create(state: &Arc<AppState>, body: Value) -> Value {
    let (status, v) = call(state, Method::POST, "/v1/sessions", Some(body)).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    v
}

fn answers_for(batch: &Value, ds: &Dataset) -> Value {
    let labels: serde_json::Map<String, Value> = batch["items"]
        .as_array()
        .unwrap()
        .iter()
        .map(|it| {
            let i = it["index"].as_u64().unwrap() as usize;
            (i.to_string(), json!(ds.labels[i]))
        })
        .collect();
    json!({ "labels": labels })
}

/// Minimal JSON Schema check covering the keywords the API document uses.
fn conforms(value: &Value, schema: &Value, root: &Value) -> Result<(), String> {
    if let Some(r) = schema.get("$ref").and_then(Value::as_str) {
        let name = r.trim_start_matches("#/$defs/");
        return conforms(value, &root["$defs"][name], root);
    }
    if let Some(options) = schema.get("oneOf").and_then(Value::as_array) {
        let ok = options.iter().filter(|s| conforms(value, s, root).is_ok()).count();
        return if ok == 1 { Ok(()) } else { Err(format!("{value} matches {ok} oneOf branches")) };
    }
    if let Some(allowed) = schema.get("enum").and_then(Value::as_array) {
        if !allowed.contains(value) {
            return Err(format!("{value} not in {allowed:?}"));
        }
    }
    if let Some(ty) = schema.get("type") {
        let types: Vec<&str> = match ty {
            Value::String(s) => vec![s.as_str()],
            Value::Array(a) => a.iter().filter_map(Value::as_str).collect(),
            _ => vec![],
        };
        let matches = |t: &str| match t {
            "object" => value.is_object(),
            "array" => value.is_array(),
            "string" => value.is_string(),
            "integer" => value.is_u64() || value.is_i64(),
            "number" => value.is_number(),
            "boolean" => value.is_boolean(),
            "null" => value.is_null(),
            _ => false,
        };
        if !types.iter().any(|t| matches(t)) {
            return Err(format!("{value} is not {types:?}"));
        }
    }
    if let Some(x) = value.as_f64() {
        if schema.get("minimum").and_then(Value::as_f64).is_some_and(|m| x < m)
            || schema.get("maximum").and_then(Value::as_f64).is_some_and(|m| x > m)
        {
            return Err(format!("{x} out of range"));
        }
    }
    if let Some(obj) = value.as_object() {
        let props = schema.get("properties").and_then(Value::as_object);
        for req in schema.get("required").and_then(Value::as_array).into_iter().flatten() {
            if !obj.contains_key(req.as_str().unwrap()) {
                return Err(format!("missing {req}"));
            }
        }
        for (k, v) in obj {
            match props.and_then(|p| p.get(k)) {
                Some(s) => conforms(v, s, root).map_err(|e| format!("{k}: {e}"))?,
                None => match schema.get("additionalProperties") {
                    Some(Value::Bool(false)) => return Err(format!("unexpected key {k}")),
                    Some(s @ Value::Object(_)) => conforms(v, s, root)?,
                    _ => {}
                },
            }
        }
    }
    if let (Some(items), Some(arr)) = (schema.get("items"), value.as_array()) {
        for v in arr {
            conforms(v, items, root)?;
        }
    }
    Ok(())
}

fn check(value: &Value, def: &str) {
    let root: Value = serde_json::from_str(SCHEMA).unwrap();
    conforms(value, &json!({ "$ref": format!("#/$defs/{def}") }), &root)
        .unwrap_or_else(|e| panic!("{def}: {e}\n{value}"));
}

#[tokio::test]
async fn health_schema_and_datasets() {
    let st = state();
    let (s, v) = call(&st, Method::GET, "/v1/health", None).await;
    assert_eq!((s, v), (StatusCode::OK, json!("ok")));
    let (s, v) = call(&st, Method::GET, "/v1/schema", None).await;
    assert_eq!(s, StatusCode::OK);
    assert!(v["$defs"]["SessionResource"].is_object());
    let (s, v) = call(&st, Method::GET, "/v1/datasets", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v.as_array().unwrap().len(), 2);
    for d in v.as_array().unwrap() {
        check(d, "DatasetInfo");
    }
}

#[tokio::test]
async fn balance_endpoint_matches_golden_vectors() {
    let st = state();
    let golden: Vec<Value> = serde_json::from_str(include_str!("../../core/testdata/balance_golden.json")).unwrap();
    assert_eq!(golden.len(), 40);
    for g in golden {
        let uri = format!("/v1/balance?t={}&b={}&c={}&t1={}&t2={}", g["t"], g["b"], g["c"], g["t1"], g["t2"]);
        let (s, v) = call(&st, Method::GET, &uri, None).await;
        assert_eq!(s, StatusCode::OK, "{uri}");
        assert_eq!((v["n_repr"].clone(), v["n_info"].clone()), (g["n_repr"].clone(), g["n_info"].clone()), "{uri}");
    }
    let (s, _) = call(&st, Method::GET, "/v1/balance?t=1&b=20&c=2&t1=0&t2=5", None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn create_validates_and_defaults() {
    let st = state();
    let v = create(&st, json!({ "dataset": "toy" })).await;
    check(&v, "SessionResource");
    assert_eq!(v["status"], "awaiting_batch");
    assert_eq!(v["mode"], "human");
    assert_eq!(v["params"], json!({ "b": 20, "c": 0.0, "t1": 0, "t2": 5 }));
    assert_eq!(v["next_allocation"], json!({ "n_repr": 19, "n_info": 1 }));
    assert_eq!(v["latest"]["prauc"], Value::Null);
    assert_eq!(v["prauc_available"], false);

    let (s, e) = call(&st, Method::POST, "/v1/sessions", Some(json!({ "dataset": "toy", "c": 1.5 }))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    check(&e, "Error");
    let (s, _) = call(&st, Method::POST, "/v1/sessions", Some(json!({ "dataset": "toy", "t1": 5, "t2": 5 }))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call(&st, Method::POST, "/v1/sessions", Some(json!({ "dataset": "toy", "m": 3 }))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call(&st, Method::POST, "/v1/sessions", Some(json!({ "dataset": "toy", "bogus": 1 }))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, e) = call(&st, Method::POST, "/v1/sessions", Some(json!({ "dataset": "nope" }))).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    check(&e, "Error");
    let (s, _) = call(&st, Method::GET, "/v1/sessions/unknown", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn same_seed_gives_same_first_batch() {
    let st = state();
    let body = json!({ "dataset": "toy", "strategy": "random", "seed": 9 });
    let a = create(&st, body.clone()).await;
    let b = create(&st, body).await;
    let (_, ba) = call(&st, Method::POST, &format!("/v1/sessions/{}/batch", a["id"].as_str().unwrap()), None).await;
    let (_, bb) = call(&st, Method::POST, &format!("/v1/sessions/{}/batch", b["id"].as_str().unwrap()), None).await;
    assert_eq!(ba["items"], bb["items"]);
}

#[tokio::test]
async fn batch_label_cycle() {
    let st = state();
    let ds = toy(300, "toy");
    let v = create(&st, json!({ "dataset": "toy", "strategy": "max_entropy", "mode": "replay", "seed": 1 })).await;
    let id = v["id"].as_str().unwrap().to_string();
    assert!(v["latest"]["prauc"].is_number());
    let base = format!("/v1/sessions/{id}");

    let (s, _) = call(&st, Method::POST, &format!("{base}/labels"), Some(json!({ "labels": {} }))).await;
    assert_eq!(s, StatusCode::CONFLICT);

    let (s, batch) = call(&st, Method::POST, &format!("{base}/batch"), None).await;
    assert_eq!(s, StatusCode::OK);
    check(&batch, "BatchPayload");
    let items = batch["items"].as_array().unwrap();
    assert_eq!(items.len(), 20);
    assert!(items.iter().all(|it| it["provenance"] == "max_entropy"));
    assert_eq!(items[0]["features"].as_array().unwrap().len(), 2);

    let (s, _) = call(&st, Method::POST, &format!("{base}/batch"), None).await;
    assert_eq!(s, StatusCode::CONFLICT);
    let (_, res) = call(&st, Method::GET, &base, None).await;
    check(&res, "SessionResource");
    assert_eq!(res["status"], "awaiting_labels");
    assert_eq!(res["pending"], batch);

    let good = answers_for(&batch, &ds);
    let before = call(&st, Method::GET, &format!("{base}/snapshot"), None).await.1;
    let mut partial = good.clone();
    let first_key = partial["labels"].as_object().unwrap().keys().next().unwrap().clone();
    partial["labels"].as_object_mut().unwrap().remove(&first_key);
    let mut extra = good.clone();
    extra["labels"]["99999"] = json!(0);
    let mut two = good.clone();
    two["labels"][&first_key] = json!(2);
    let mut text = good.clone();
    text["labels"][&first_key] = json!("yes");
    for bad in [partial, extra, two, text, json!({ "labels": { "abc": 1 } }), json!([1, 2])] {
        let (s, e) = call(&st, Method::POST, &format!("{base}/labels"), Some(bad.clone())).await;
        assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY, "{bad}");
        check(&e, "Error");
    }
    assert_eq!(call(&st, Method::GET, &format!("{base}/snapshot"), None).await.1, before);

    let (s, rec) = call(&st, Method::POST, &format!("{base}/labels"), Some(good)).await;
    assert_eq!(s, StatusCode::OK, "{rec}");
    check(&rec, "MetricsRecord");
    assert_eq!(rec["labels_used"], 24);
    assert_eq!(rec["iteration"], 1);

    let (s, m) = call(&st, Method::GET, &format!("{base}/metrics"), None).await;
    assert_eq!(s, StatusCode::OK);
    check(&m, "MetricsView");
    assert_eq!(m["history"].as_array().unwrap().len(), 2);
    assert_eq!(m["pool"], json!({ "labeled": 24, "unlabeled": 216, "test": 60 }));

    let (_, list) = call(&st, Method::GET, "/v1/sessions", None).await;
    check(&list[0], "SessionSummary");
}

#[tokio::test]
async fn steering_between_batches() {
    let st = state();
    let ds = toy(300, "toy");
    let v = create(&st, json!({ "dataset": "toy", "seed": 2 })).await;
    let base = format!("/v1/sessions/{}", v["id"].as_str().unwrap());
    for _ in 0..2 {
        let (_, batch) = call(&st, Method::POST, &format!("{base}/batch"), None).await;
        let (s, _) = call(&st, Method::PATCH, &format!("{base}/params"), Some(json!({ "c": 0.5 }))).await;
        assert_eq!(s, StatusCode::CONFLICT);
        let (s, _) = call(&st, Method::POST, &format!("{base}/labels"), Some(answers_for(&batch, &ds))).await;
        assert_eq!(s, StatusCode::OK);
    }
    let (s, res) = call(&st, Method::PATCH, &format!("{base}/params"), Some(json!({ "c": 0.5 }))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(res["iteration"], 3);
    assert_eq!(res["next_allocation"], json!({ "n_repr": 7, "n_info": 13 }));
    let (_, batch) = call(&st, Method::POST, &format!("{base}/batch"), None).await;
    let tags: Vec<&str> =
        batch["items"].as_array().unwrap().iter().map(|i| i["provenance"].as_str().unwrap()).collect();
    assert_eq!(tags.iter().filter(|&&t| t == "representative").count(), 7);
    assert_eq!(tags.iter().filter(|&&t| t == "informative").count(), 13);
    call(&st, Method::POST, &format!("{base}/labels"), Some(answers_for(&batch, &ds))).await;

    let (s, _) = call(&st, Method::PATCH, &format!("{base}/params"), Some(json!({ "c": -0.1 }))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, res) = call(&st, Method::PATCH, &format!("{base}/params"), Some(json!({ "t2": 2 }))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(res["next_allocation"], json!({ "n_repr": 0, "n_info": 20 }));
    let (_, m) = call(&st, Method::GET, &format!("{base}/metrics"), None).await;
    assert_eq!(m["param_log"].as_array().unwrap().len(), 2);
    let discovered: Vec<u64> =
        m["history"].as_array().unwrap().iter().map(|r| r["anomalies_discovered"].as_u64().unwrap()).collect();
    assert!(discovered.windows(2).all(|w| w[0] <= w[1]));
}

#[tokio::test]
async fn exhausted_pool_is_gone() {
    let st = state();
    let ds = toy(150, "tiny");
    let v = create(&st, json!({ "dataset": "tiny", "strategy": "random", "b": 500 })).await;
    let base = format!("/v1/sessions/{}", v["id"].as_str().unwrap());
    let (_, batch) = call(&st, Method::POST, &format!("{base}/batch"), None).await;
    assert_eq!(batch["items"].as_array().unwrap().len(), ds.n() - 4);
    call(&st, Method::POST, &format!("{base}/labels"), Some(answers_for(&batch, &ds))).await;
    let (s, e) = call(&st, Method::POST, &format!("{base}/batch"), None).await;
    assert_eq!(s, StatusCode::GONE);
    assert_eq!(e["error"], "pool_exhausted");
    assert_eq!(call(&st, Method::GET, &base, None).await.1["status"], "finished");
}

#[tokio::test]
async fn service_matches_direct_engine_calls() {
    let st = state();
    let ds = toy(300, "toy");
    let v = create(&st, json!({ "dataset": "toy", "strategy": "adaptive", "seed": 4, "mode": "replay" })).await;
    let base = format!("/v1/sessions/{}", v["id"].as_str().unwrap());

    let std_ds = standardize(&ds);
    let config =
        SessionConfig { strategy: StrategyKind::Adaptive, mode: SessionMode::Replay, ..SessionConfig::default() };
    let mut direct = ALSession::init(v["id"].as_str().unwrap(), &std_ds, config, 4).unwrap();
    for round in 0..3 {
        if round == 2 {
            call(&st, Method::PATCH, &format!("{base}/params"), Some(json!({ "c": 0.5 }))).await;
            direct.set_balancing(BalancingParams { c: 0.5, ..direct.config.balancing }).unwrap();
        }
        let (_, batch) = call(&st, Method::POST, &format!("{base}/batch"), None).await;
        let answers: BTreeMap<usize, u8> =
            direct.propose_batch(&std_ds).unwrap().batch.indices().into_iter().map(|i| (i, ds.labels[i])).collect();
        call(&st, Method::POST, &format!("{base}/labels"), Some(answers_for(&batch, &ds))).await;
        direct.submit_labels(&std_ds, &answers).unwrap();
    }
    let (_, served) = call(&st, Method::GET, &format!("{base}/snapshot"), None).await;
    let mut served: ALSession = serde_json::from_value(served).unwrap();
    for s in [&mut served, &mut direct] {
        s.history.iter_mut().for_each(|r| r.wall_time_ms = 0.0);
    }
    assert_eq!(served, direct);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn conflicting_mutations_linearize() {
    let st = state();
    let ds = toy(300, "toy");
    let v = create(&st, json!({ "dataset": "toy", "strategy": "random" })).await;
    let base = format!("/v1/sessions/{}", v["id"].as_str().unwrap());

    let proposals: Vec<_> = (0..4)
        .map(|_| {
            let (st, uri) = (st.clone(), format!("{base}/batch"));
            tokio::spawn(async move { call(&st, Method::POST, &uri, None).await })
        })
        .collect();
    let mut batches = Vec::new();
    let mut conflicts = 0;
    for p in proposals {
        match p.await.unwrap() {
            (StatusCode::OK, b) => batches.push(b),
            (StatusCode::CONFLICT, _) => conflicts += 1,
            other => panic!("{other:?}"),
        }
    }
    assert_eq!((batches.len(), conflicts), (1, 3));

    let body = answers_for(&batches[0], &ds);
    let submits: Vec<_> = (0..4)
        .map(|_| {
            let (st, uri, body) = (st.clone(), format!("{base}/labels"), body.clone());
            tokio::spawn(async move { call(&st, Method::POST, &uri, Some(body)).await.0 })
        })
        .collect();
    let mut codes = Vec::new();
    for s in submits {
        codes.push(s.await.unwrap());
    }
    assert_eq!(codes.iter().filter(|&&c| c == StatusCode::OK).count(), 1, "{codes:?}");
    assert_eq!(codes.iter().filter(|&&c| c == StatusCode::CONFLICT).count(), 3, "{codes:?}");
    let (_, m) = call(&st, Method::GET, &format!("{base}/metrics"), None).await;
    assert_eq!(m["history"].as_array().unwrap().len(), 2);
    assert_eq!(m["pool"]["labeled"], 24);
}

#[tokio::test]
async fn restart_restores_sessions_from_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let ds = toy(300, "toy");
    let open = || Arc::new(AppState::new(vec![ds.clone()], Some(dir.path().to_path_buf())).unwrap());

    let first = open();
    let v = create(&first, json!({ "dataset": "toy", "seed": 6, "mode": "replay" })).await;
    let base = format!("/v1/sessions/{}", v["id"].as_str().unwrap());
    let (_, batch) = call(&first, Method::POST, &format!("{base}/batch"), None).await;
    call(&first, Method::POST, &format!("{base}/labels"), Some(answers_for(&batch, &ds))).await;
    let (_, pending) = call(&first, Method::POST, &format!("{base}/batch"), None).await;
    drop(first);

    let second = open();
    assert_eq!(second.session_count(), 1);
    let (s, res) = call(&second, Method::GET, &base, None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(res["pending"], pending);
    let (s, _) = call(&second, Method::POST, &format!("{base}/labels"), Some(answers_for(&pending, &ds))).await;
    assert_eq!(s, StatusCode::OK);
    let (_, next) = call(&second, Method::POST, &format!("{base}/batch"), None).await;

    // The same calls without a restart.
    let reference = Arc::new(AppState::new(vec![ds.clone()], None).unwrap());
    let r = create(&reference, json!({ "dataset": "toy", "seed": 6, "mode": "replay" })).await;
    let rbase = format!("/v1/sessions/{}", r["id"].as_str().unwrap());
    for _ in 0..2 {
        let (_, b) = call(&reference, Method::POST, &format!("{rbase}/batch"), None).await;
        call(&reference, Method::POST, &format!("{rbase}/labels"), Some(answers_for(&b, &ds))).await;
    }
    let (_, rnext) = call(&reference, Method::POST, &format!("{rbase}/batch"), None).await;
    assert_eq!(next["items"], rnext["items"]);
    assert!(std::fs::read_dir(dir.path()).unwrap().all(|e| !e.unwrap().path().to_string_lossy().ends_with(".tmp")));
}
