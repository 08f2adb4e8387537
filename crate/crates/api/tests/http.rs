use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use qer_api::{router, ApiError, ErrorCode, OverrideResponse, ScenarioResponse, VersionListing};
use qer_core::exposure::{ExposureStatus, QerEntry};
use qer_core::fixture;
use qer_core::report::PortfolioStats;
use qer_core::store::RegisterStore;
use serde::de::DeserializeOwned;
use serde_json::{json, Value};
use tower::ServiceExt;

fn fixture_app() -> (tempfile::TempDir, Router) {
    let dir = tempfile::tempdir().unwrap();
    let store = RegisterStore::open(dir.path()).unwrap();
    fixture::seed_store(&store).unwrap();
    (dir, router(store))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, String, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header(header::CONTENT_TYPE, "application/json")
            .body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let ctype = resp
        .headers()
        .get(header::CONTENT_TYPE)
        .map(|v| v.to_str().unwrap().to_owned())
        .unwrap_or_default();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, ctype, bytes)
}

async fn get_json<T: DeserializeOwned>(app: &Router, uri: &str) -> T {
    let (status, ctype, body) = call(app, "GET", uri, None).await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&body));
    assert_eq!(ctype, "application/json");
    serde_json::from_slice(&body).unwrap()
}

fn snapshot(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(&p, out);
            } else {
                out.insert(p.display().to_string(), fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, &mut out);
    out
}

#[tokio::test]
async fn lists_fixture_version() {
    let (_dir, app) = fixture_app();
    let versions: Vec<VersionListing> = get_json(&app, "/versions").await;
    assert_eq!(versions.len(), 1);
    assert_eq!(versions[0].version_id, 1);
    assert_eq!(versions[0].t_threat, 8.0);

    let entries: Vec<QerEntry> = get_json(&app, "/versions/1/entries").await;
    assert_eq!(entries.len(), 12);
    assert_eq!(entries, fixture::register_entries().unwrap());

    let stats: PortfolioStats = get_json(&app, "/versions/1/stats").await;
    assert_eq!(stats.total_assets, 12);
    assert_eq!(stats.yes_count, 9);
    assert_eq!(stats.overridden_count, 4);
}

#[tokio::test]
async fn scenario_twenty_years_leaves_one_borderline() {
    let (dir, app) = fixture_app();
    let before = snapshot(dir.path());
    let (status, _, body) = call(&app, "POST", "/scenario", Some(json!({ "t_threat": 20 }))).await;
    assert_eq!(status, StatusCode::OK);
    let r: ScenarioResponse = serde_json::from_slice(&body).unwrap();
    assert_eq!(r.version_id, 1);
    assert_eq!(r.diff.t_threat_before, 8.0);
    assert_eq!(r.diff.t_threat_after, 20.0);
    for (id, o) in &r.requested.outcomes {
        let want = if id == "QER-005" {
            ExposureStatus::Borderline
        } else {
            ExposureStatus::No
        };
        assert_eq!(o.exposure, want, "{id}");
    }
    let qer5 = r.diff.changes.iter().find(|c| c.qer_id == "QER-005").unwrap();
    assert_eq!(qer5.before.exposure, ExposureStatus::Yes);
    assert_eq!(qer5.after.exposure, ExposureStatus::Borderline);
    // Everything that was exposed at 8 years shows up in the diff.
    let exposed_at_8 = r
        .committed
        .outcomes
        .values()
        .filter(|o| o.exposure != ExposureStatus::No)
        .count();
    assert_eq!(r.diff.changes.len(), exposed_at_8);

    for t in [1.0, 12.0, 20.0, 50.0] {
        let (status, _, _) = call(&app, "POST", "/scenario", Some(json!({ "t_threat": t }))).await;
        assert_eq!(status, StatusCode::OK);
    }
    assert_eq!(snapshot(dir.path()), before, "scenario calls must not write");
}

#[tokio::test]
async fn scenario_is_idempotent() {
    let (_dir, app) = fixture_app();
    let a = call(&app, "POST", "/scenario", Some(json!({ "t_threat": 12 }))).await;
    let b = call(&app, "POST", "/scenario", Some(json!({ "t_threat": 12 }))).await;
    assert_eq!(a, b);
}

#[tokio::test]
async fn override_adds_one_version_and_one_event() {
    let (dir, app) = fixture_app();
    let (status, _, body) = call(
        &app,
        "POST",
        "/versions/1/entries/QER-010/override",
        Some(json!({ "to_wave": 1, "actor": "cab", "rationale": "partner cut-over date" })),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&body));
    let r: OverrideResponse = serde_json::from_slice(&body).unwrap();
    assert_eq!(r.version_id, 2);

    let versions: Vec<VersionListing> = get_json(&app, "/versions").await;
    assert_eq!(versions.len(), 2);
    let store = RegisterStore::open_existing(dir.path()).unwrap();
    let v1 = store.load(1).unwrap();
    let v2 = store.load(2).unwrap();
    assert_eq!(v2.parent_version, Some(1));
    assert_eq!(v2.audit_events.len(), 1);
    assert_eq!(v2.audit_events[0].qer_id.as_deref(), Some("QER-010"));
    assert_eq!(v2.entry("QER-010").unwrap().assigned_wave, 1);
    assert_eq!(
        v1,
        fixture::seed_store(&RegisterStore::open(tempfile::tempdir().unwrap().path()).unwrap()).unwrap()
    );
    assert_eq!(store.verify_audit(2).unwrap(), 5);
}

#[tokio::test]
async fn stale_override_conflicts() {
    let (_dir, app) = fixture_app();
    let body = json!({ "to_wave": 2, "actor": "cab", "rationale": "first" });
    let (status, _, _) = call(&app, "POST", "/versions/1/entries/QER-001/override", Some(body.clone())).await;
    assert_eq!(status, StatusCode::OK);
    let (status, _, body) = call(&app, "POST", "/versions/1/entries/QER-002/override", Some(body)).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let err: ApiError = serde_json::from_slice(&body).unwrap();
    assert_eq!(err.code, ErrorCode::Conflict);
    assert_eq!(err.status, 409);
}

#[tokio::test]
async fn errors_are_structured() {
    let (_dir, app) = fixture_app();
    let cases = [
        (
            "POST",
            "/versions/1/entries/QER-003/override",
            Some(json!({ "to_wave": 1, "actor": "cab", "rationale": "  " })),
            StatusCode::BAD_REQUEST,
            ErrorCode::BadInput,
        ),
        (
            "POST",
            "/versions/1/entries/QER-003/override",
            Some(json!({ "to_wave": 9, "actor": "cab", "rationale": "x" })),
            StatusCode::BAD_REQUEST,
            ErrorCode::BadInput,
        ),
        (
            "POST",
            "/versions/1/entries/QER-999/override",
            Some(json!({ "to_wave": 1, "actor": "cab", "rationale": "x" })),
            StatusCode::NOT_FOUND,
            ErrorCode::NotFound,
        ),
        (
            "GET",
            "/versions/7/entries",
            None,
            StatusCode::NOT_FOUND,
            ErrorCode::NotFound,
        ),
        (
            "GET",
            "/versions/abc/stats",
            None,
            StatusCode::BAD_REQUEST,
            ErrorCode::BadInput,
        ),
        (
            "POST",
            "/scenario",
            Some(json!({ "t_threat": -1 })),
            StatusCode::BAD_REQUEST,
            ErrorCode::BadInput,
        ),
        (
            "POST",
            "/scenario",
            Some(json!({ "horizon": 3 })),
            StatusCode::BAD_REQUEST,
            ErrorCode::BadInput,
        ),
    ];
    for (method, uri, body, status, code) in cases {
        let (got, ctype, bytes) = call(&app, method, uri, body).await;
        assert_eq!(got, status, "{method} {uri}");
        assert_eq!(ctype, "application/json");
        let err: ApiError = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(
            (err.status, err.code),
            (status.as_u16(), code),
            "{method} {uri}: {}",
            err.message
        );
    }
    let versions: Vec<VersionListing> = get_json(&app, "/versions").await;
    assert_eq!(versions.len(), 1);
}

#[tokio::test]
async fn empty_store_has_no_scenario_base() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(RegisterStore::open(dir.path()).unwrap());
    let versions: Vec<VersionListing> = get_json(&app, "/versions").await;
    assert!(versions.is_empty());
    let (status, _, _) = call(&app, "POST", "/scenario", Some(json!({ "t_threat": 8 }))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}
