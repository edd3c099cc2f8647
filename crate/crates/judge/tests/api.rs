use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use qrelkit_core::model::{write_assignments, write_manifest, write_pools, write_topics, CrawlManifest, Pool, Provenance, Topic};
use qrelkit_core::reliability::{assign_judging, default_assessors};
use qrelkit_judge::campaign::{Campaign, CampaignConfig};
use qrelkit_judge::{router, AppState, JudgeError};
use serde_json::{json, Value};
use tower::ServiceExt;

const A: &str = "tok-a";
const B: &str = "tok-b";
const ADMIN: &str = "tok-admin";

fn write_fixture(dir: &Path) -> std::path::PathBuf {
    let topics = vec![
        Topic::new("t1", "Social media in the Arab uprisings")
            .with_level(2, "Analysis of how social media shaped protests")
            .with_level(1, "Mentions social media during the protests")
            .with_level(0, "Anything else"),
        Topic::noise("tn", "Gardening tools"),
    ];
    let mut members = BTreeMap::new();
    members.insert("d1".to_string(), Provenance::Pooled);
    members.insert("d2".to_string(), Provenance::Pooled);
    members.insert("g1".to_string(), Provenance::Google);
    members.insert("n1".to_string(), Provenance::Noise);
    let pool = Pool { topic_id: "t1".into(), target_size: 4, members, depth: 1, underfull: false };
    let assignments = assign_judging(&pool, &default_assessors("t1"), 5).unwrap();
    let mut manifest = CrawlManifest::default();
    for d in ["d1", "d2", "g1"] {
        manifest.add(d, "t1");
    }
    manifest.add("n1", "tn");
    manifest.noise_topics.insert("tn".into());

    fs::write(dir.join("topics.xml"), write_topics(&topics)).unwrap();
    fs::write(dir.join("pools.txt"), write_pools(&[pool])).unwrap();
    fs::write(dir.join("assignments.txt"), write_assignments(&assignments)).unwrap();
    fs::write(dir.join("manifest.txt"), write_manifest(&manifest)).unwrap();
    let docs = dir.join("docs");
    fs::create_dir_all(&docs).unwrap();
    fs::write(docs.join("d1.html"), "<html><head><title>D1</title><script>alert(1)</script></head><body><p style=\"color:red\">Social media grows</p></body></html>").unwrap();
    fs::write(docs.join("d2.html"), "<p>Mediation talks</p>").unwrap();
    fs::write(docs.join("g1.html"), "<p>Protests and media</p>").unwrap();
    fs::write(docs.join("n1.html"), "<p>Rakes and hoes</p>").unwrap();
    let cfg = json!({
        "seed": 42,
        "admin_token": ADMIN,
        "assessors": [{"id": "t1-a", "token": A}, {"id": "t1-b", "token": B}],
        "topics": "topics.xml",
        "pools": "pools.txt",
        "assignments": "assignments.txt",
        "docs": "docs",
        "manifest": "manifest.txt"
    });
    let path = dir.join("campaign.json");
    fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

fn app(campaign: Arc<Campaign>) -> axum::Router {
    router(AppState::new(campaign, false))
}

async fn call(app: &axum::Router, method: &str, uri: &str, token: Option<&str>, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(t) = token {
        req = req.header("authorization", format!("Bearer {t}"));
    }
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap_or(Value::Null) };
    (status, value)
}

fn keys(v: &Value, out: &mut Vec<String>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                out.push(k.to_lowercase());
                keys(x, out);
            }
        }
        Value::Array(a) => a.iter().for_each(|x| keys(x, out)),
        _ => {}
    }
}

fn assert_no_provenance(v: &Value) {
    let mut ks = Vec::new();
    keys(v, &mut ks);
    for k in ks {
        assert!(!["provenance", "source", "google", "noise", "tag", "shared"].contains(&k.as_str()), "key {k} in {v}");
    }
    let text = v.to_string().to_lowercase();
    assert!(!text.contains("\"pooled\"") && !text.contains("\"google\"") && !text.contains("\"both\""), "{text}");
}

#[test]
fn minimal_campaign_loads() {
    let dir = tempfile::tempdir().unwrap();
    let c = Campaign::open(&write_fixture(dir.path())).unwrap();
    assert_eq!(c.assignments().len(), 2);
    assert!(c.assignments().iter().all(|a| a.len() == 3));
}

#[test]
fn missing_document_is_a_load_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_fixture(dir.path());
    fs::remove_file(dir.path().join("docs/g1.html")).unwrap();
    match Campaign::open(&cfg) {
        Err(JudgeError::Load(msg)) => assert!(msg.contains("g1"), "{msg}"),
        other => panic!("expected load error, got {:?}", other.err()),
    }
}

#[tokio::test]
async fn auth_and_forbidden() {
    let dir = tempfile::tempdir().unwrap();
    let c = Arc::new(Campaign::open(&write_fixture(dir.path())).unwrap());
    let app = app(c.clone());
    assert_eq!(call(&app, "GET", "/health", None, None).await.0, StatusCode::OK);
    assert_eq!(call(&app, "GET", "/assignment", None, None).await.0, StatusCode::UNAUTHORIZED);
    assert_eq!(call(&app, "GET", "/assignment", Some("nope"), None).await.0, StatusCode::UNAUTHORIZED);

    let mine: Vec<String> = c.assignments().iter().find(|a| a.assessor_id == "t1-a").unwrap().docs.keys().cloned().collect();
    let theirs = c.assignments().iter().find(|a| a.assessor_id == "t1-b").unwrap().docs.keys().find(|d| !mine.contains(d)).unwrap().clone();
    let (s, _) = call(&app, "GET", &format!("/doc/t1/{theirs}"), Some(A), None).await;
    assert_eq!(s, StatusCode::FORBIDDEN);
    let (s, _) = call(&app, "POST", "/judgment", Some(A), Some(json!({"topic_id": "t1", "doc_id": theirs, "grade": 1}))).await;
    assert_eq!(s, StatusCode::FORBIDDEN);
    assert_eq!(call(&app, "POST", "/export", Some(A), None).await.0, StatusCode::FORBIDDEN);
}

#[tokio::test]
async fn documents_are_clean_highlighted_and_untagged() {
    let dir = tempfile::tempdir().unwrap();
    let c = Arc::new(Campaign::open(&write_fixture(dir.path())).unwrap());
    let app = app(c.clone());
    let mut shapes = Vec::new();
    for (tok, who) in [(A, "t1-a"), (B, "t1-b")] {
        let (s, list) = call(&app, "GET", "/assignment", Some(tok), None).await;
        assert_eq!(s, StatusCode::OK);
        assert_no_provenance(&list);
        let (_, topics) = call(&app, "GET", "/topics", Some(tok), None).await;
        assert_no_provenance(&topics);
        assert_eq!(topics.as_array().unwrap().len(), 1);
        for item in list.as_array().unwrap() {
            let doc = item["doc_id"].as_str().unwrap();
            let (s, payload) = call(&app, "GET", &format!("/doc/t1/{doc}"), Some(tok), None).await;
            assert_eq!(s, StatusCode::OK, "{who} {doc}");
            assert_no_provenance(&payload);
            let body = payload["body"].as_str().unwrap();
            assert!(!body.contains("<script") && !body.contains("style="), "{body}");
            let mut ks: Vec<&String> = payload.as_object().unwrap().keys().collect();
            ks.sort();
            shapes.push(ks.into_iter().cloned().collect::<Vec<_>>());
            if doc == "d1" {
                assert_eq!(payload["title"], "D1");
                assert!(body.contains("<mark>Social</mark> <mark>media</mark> grows"), "{body}");
            }
            if doc == "d2" {
                assert!(!body.contains("<mark>"), "{body}");
            }
        }
    }
    // noise, Google and pooled documents all share one payload shape
    shapes.dedup();
    assert_eq!(shapes.len(), 1);
}

#[tokio::test]
async fn judging_progress_and_revisions() {
    let dir = tempfile::tempdir().unwrap();
    let c = Arc::new(Campaign::open(&write_fixture(dir.path())).unwrap());
    let app = app(c.clone());
    let (_, list) = call(&app, "GET", "/assignment", Some(A), None).await;
    let items = list.as_array().unwrap();
    assert!(items.iter().all(|i| i["status"] == "pending"));
    let (_, again) = call(&app, "GET", "/assignment", Some(A), None).await;
    assert_eq!(list, again);
    let doc = items[0]["doc_id"].as_str().unwrap().to_string();

    let (s, ack) = call(&app, "POST", "/judgment", Some(A), Some(json!({"topic_id": "t1", "doc_id": doc, "grade": 2}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(ack["revision"], 1);
    assert_eq!(ack["progress"]["judged"], 1);
    let (_, ack) = call(&app, "POST", "/judgment", Some(A), Some(json!({"topic_id": "t1", "doc_id": doc, "grade": 1}))).await;
    assert_eq!(ack["revision"], 2);
    assert_eq!(ack["progress"]["judged"], 1);

    for bad in [json!(5), json!(-2), json!(300), json!("high")] {
        let (s, _) = call(&app, "POST", "/judgment", Some(A), Some(json!({"topic_id": "t1", "doc_id": doc, "grade": bad}))).await;
        assert_eq!(s, StatusCode::BAD_REQUEST, "{bad}");
    }

    let (_, after) = call(&app, "GET", "/assignment", Some(A), None).await;
    let judged: Vec<&Value> = after.as_array().unwrap().iter().filter(|i| i["status"] == "judged").collect();
    assert_eq!(judged.len(), 1);
    assert_eq!(judged[0]["grade"], 1);
    let (_, p) = call(&app, "GET", "/progress", Some(A), None).await;
    assert_eq!((p["judged"].as_u64(), p["assigned"].as_u64()), (Some(1), Some(3)));
    // the other assessor sees nothing of this
    let (_, other) = call(&app, "GET", "/assignment", Some(B), None).await;
    assert!(other.as_array().unwrap().iter().all(|i| i["status"] == "pending" && i["grade"].is_null()));
    let (_, all) = call(&app, "GET", "/progress", Some(ADMIN), None).await;
    assert_eq!(all["assessors"]["t1-a"]["judged"], 1);
}

async fn judge_all(app: &axum::Router, grade_for: impl Fn(&str, &str) -> i64) {
    for (tok, who) in [(A, "t1-a"), (B, "t1-b")] {
        let (_, list) = call(app, "GET", "/assignment", Some(tok), None).await;
        for item in list.as_array().unwrap() {
            let doc = item["doc_id"].as_str().unwrap();
            let (s, _) = call(app, "POST", "/judgment", Some(tok), Some(json!({"topic_id": "t1", "doc_id": doc, "grade": grade_for(who, doc)}))).await;
            assert_eq!(s, StatusCode::OK);
        }
    }
}

#[tokio::test]
async fn export_refuses_then_merges() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_fixture(dir.path());
    let c = Arc::new(Campaign::open(&cfg).unwrap());
    let app = app(c.clone());

    let (s, body) = call(&app, "POST", "/export", Some(ADMIN), Some(json!({}))).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(body["missing"].as_array().unwrap().len(), 6);
    let (s, forced) = call(&app, "POST", "/export", Some(ADMIN), Some(json!({"force": true}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(forced["judgments"], 0);

    // identical assessors: kappa 1 on shared docs
    judge_all(&app, |_, d| if d == "d1" || d == "g1" { 2 } else { 0 }).await;
    let (s, summary) = call(&app, "POST", "/export", Some(ADMIN), None).await;
    assert_eq!(s, StatusCode::OK, "{summary}");
    assert_eq!(summary["judgments"], 4);
    assert_eq!(summary["kappa"]["t1"], 1.0);
    assert_eq!(summary["noise_fraction"], 0.0);

    let export = dir.path().join("export");
    let qrels = fs::read_to_string(export.join("qrels.txt")).unwrap();
    assert_eq!(qrels, "t1 0 d1 2\nt1 0 d2 0\nt1 0 g1 2\nt1 0 n1 0\n");
    let sums = fs::read_to_string(export.join("SHA256SUMS")).unwrap();
    assert!(sums.starts_with(summary["qrels_sha256"].as_str().unwrap()));
    let log = fs::read(dir.path().join("judgments.jsonl")).unwrap();
    assert_eq!(qrelkit_judge::campaign::sha256_hex(&log), summary["log_sha256"].as_str().unwrap());

    // same log, same export
    let (_, again) = call(&app, "POST", "/export", Some(ADMIN), None).await;
    assert_eq!(again, summary);
}

#[tokio::test]
async fn replay_reconstructs_state() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_fixture(dir.path());
    let c = Arc::new(Campaign::open(&cfg).unwrap());
    let app = app(c.clone());
    judge_all(&app, |who, d| if who.ends_with('a') && d != "d2" { 1 } else { 0 }).await;
    let before_a = c.get_assignment("t1-a").unwrap();
    let before_b = c.get_assignment("t1-b").unwrap();
    let progress = c.all_progress();
    drop(app);
    drop(c);

    // a crash mid-append leaves a torn final line
    let log_path = dir.path().join("judgments.jsonl");
    let mut log = fs::read_to_string(&log_path).unwrap();
    log.push_str("{\"assessor_id\":\"t1-a\",\"topic_");
    fs::write(&log_path, log).unwrap();

    let reopened = Campaign::open(&cfg).unwrap();
    assert_eq!(reopened.get_assignment("t1-a").unwrap(), before_a);
    assert_eq!(reopened.get_assignment("t1-b").unwrap(), before_b);
    assert_eq!(reopened.all_progress(), progress);
    assert_eq!(reopened.log_len(), 6);
    assert!(reopened.is_complete());
}

#[tokio::test]
async fn export_on_complete_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let c = Arc::new(Campaign::open(&write_fixture(dir.path())).unwrap());
    let app = router(AppState::new(c, true));
    judge_all(&app, |_, _| 1).await;
    assert!(dir.path().join("export/qrels.txt").exists());
}

#[test]
fn concurrent_submissions_are_all_logged() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_fixture(dir.path());
    let c = Arc::new(Campaign::open(&cfg).unwrap());
    let handles: Vec<_> = c
        .assignments()
        .to_vec()
        .into_iter()
        .flat_map(|a| a.docs.keys().cloned().map(move |d| (a.assessor_id.clone(), d)).collect::<Vec<_>>())
        .flat_map(|(who, d)| (0..5).map(move |i| (who.clone(), d.clone(), i)))
        .map(|(who, d, i)| {
            let c = c.clone();
            std::thread::spawn(move || c.submit_judgment(&who, "t1", &d, (i % 3) as i8).unwrap())
        })
        .collect();
    for h in handles {
        h.join().unwrap();
    }
    assert_eq!(c.log_len(), 30);
    let replayed = Campaign::from_config(CampaignConfig::load(&cfg).unwrap()).unwrap();
    assert_eq!(replayed.log_len(), 30);
    for a in c.assignments() {
        assert_eq!(replayed.get_assignment(&a.assessor_id).unwrap(), c.get_assignment(&a.assessor_id).unwrap());
    }
}
