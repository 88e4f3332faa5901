use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;
use udrefine_core::adjudication::{extract_divergences, make_blind_items, sample_items, Side};
use udrefine_core::campaign::{Annotator, Campaign, CampaignConfig};
use udrefine_core::parse_conllu;
use udrefine_server::{router, AppState};

const GOLD: &str = "\
# sent_id = a
1\tarma\tarma\tNOUN\t_\t_\t3\tobj\t_\t_
2\tvirumque\tvir\tNOUN\t_\t_\t1\tconj\t_\t_
3\tcano\tcano\tVERB\t_\t_\t0\troot\t_\t_

# sent_id = b
1\tGallia\tGallia\tPROPN\t_\t_\t2\tnsubj\t_\t_
2\test\tsum\tAUX\t_\t_\t0\troot\t_\t_

# sent_id = c
1\tubi\tubi\tADV\t_\t_\t2\tadvmod\t_\t_
2\tes\tsum\tVERB\t_\t_\t0\troot\t_\t_

";

fn system_text() -> String {
    GOLD.replace("1\tconj", "3\tobj")
        .replace("2\tnsubj", "2\tcsubj")
        .replace("2\tadvmod\t", "2\tadvmod:lmod\t")
}

struct Fixture {
    _dir: tempfile::TempDir,
    state: AppState,
    gold_sides: Vec<(String, Side)>,
}

fn fixture() -> Fixture {
    let gold = parse_conllu(GOLD, "gold", None).unwrap();
    let system = parse_conllu(&system_text(), "system", None).unwrap();
    let divs = extract_divergences(&gold, &system).unwrap();
    let groups = sample_items(&divs, 3, 1).unwrap();
    let (items, mapping) = make_blind_items(&groups, &gold, &system, 4).unwrap();
    let gold_sides = mapping.items.iter().map(|i| (i.item_id.clone(), i.gold_side)).collect();
    let dir = tempfile::tempdir().unwrap();
    let config = CampaignConfig {
        annotators: vec![
            Annotator { id: "ann1".into(), token: "tok1".into() },
            Annotator { id: "ann2".into(), token: "tok2".into() },
        ],
        order_seed: 3,
        per_annotator_shuffle: false,
    };
    let campaign = Campaign::create(dir.path(), config, items, mapping).unwrap();
    Fixture {
        _dir: dir,
        state: AppState::new(campaign),
        gold_sides,
    }
}

async fn call(state: &AppState, req: Request<Body>) -> (StatusCode, String) {
    let resp = router(state.clone(), None).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

fn next(annotator: &str, token: &str) -> Request<Body> {
    Request::get(format!("/api/items/next?annotator={annotator}"))
        .header("X-Annotator-Token", token)
        .body(Body::empty())
        .unwrap()
}

fn verdict(annotator: &str, token: &str, item_id: &str, choice: &str) -> Request<Body> {
    Request::post("/api/verdicts")
        .header("X-Annotator-Token", token)
        .header("content-type", "application/json")
        .body(Body::from(
            json!({"annotator": annotator, "item_id": item_id, "choice": choice}).to_string(),
        ))
        .unwrap()
}

fn get(path: &str) -> Request<Body> {
    Request::get(path).body(Body::empty()).unwrap()
}

fn reveals_origin(body: &str) -> bool {
    let lower = body.to_lowercase();
    lower.contains("gold") || lower.contains("system") || lower.contains("side")
}

#[tokio::test]
async fn full_campaign_over_http() {
    let f = fixture();
    let mut bodies = Vec::new();
    for (who, token, choice) in [("ann1", "tok1", "A-better"), ("ann2", "tok2", "A-better")] {
        loop {
            let (status, body) = call(&f.state, next(who, token)).await;
            assert_eq!(status, StatusCode::OK, "{body}");
            bodies.push(body.clone());
            let v: Value = serde_json::from_str(&body).unwrap();
            if v.get("done").is_some() {
                assert_eq!(v["total"], 3);
                break;
            }
            let rows = v["rows_a"].as_array().unwrap();
            assert!(rows.iter().any(|r| r["divergent"] == true));
            let id = v["item_id"].as_str().unwrap().to_string();
            let (status, body) = call(&f.state, verdict(who, token, &id, choice)).await;
            assert_eq!(status, StatusCode::OK, "{body}");
            bodies.push(body);
        }
    }
    let (status, body) = call(&f.state, get("/api/progress")).await;
    assert_eq!(status, StatusCode::OK);
    let p: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(p["complete"], true);

    let (status, body) = call(&f.state, get("/api/report")).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let r: Value = serde_json::from_str(&body).unwrap();
    let gold_a = f.gold_sides.iter().filter(|(_, s)| *s == Side::A).count() as u64;
    assert_eq!(r["consensus"]["gold_better"], gold_a);
    assert_eq!(r["consensus"]["system_better"], 3 - gold_a);
    assert!(!body.contains("gold_side") && !body.contains("item-0001"));

    for b in &bodies {
        assert!(!reveals_origin(b), "response leaks origin: {b}");
    }
}

#[tokio::test]
async fn auth_and_request_errors() {
    let f = fixture();
    let (status, _) = call(&f.state, next("ann1", "wrong")).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
    let (status, _) = call(&f.state, next("nobody", "tok1")).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let req = Request::get("/api/items/next?annotator=ann1").body(Body::empty()).unwrap();
    assert_eq!(call(&f.state, req).await.0, StatusCode::UNAUTHORIZED);

    let (status, _) = call(&f.state, verdict("ann1", "tok1", "item-9999", "DontKnow")).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(&f.state, verdict("ann1", "tok2", "item-0001", "DontKnow")).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
    let (status, _) = call(&f.state, verdict("ann1", "tok1", "item-0001", "GoldBetter")).await;
    assert!(status.is_client_error());

    let (_, body) = call(&f.state, next("ann1", "tok1")).await;
    let current: Value = serde_json::from_str(&body).unwrap();
    let current = current["item_id"].as_str().unwrap();
    let other = f.gold_sides.iter().map(|(id, _)| id.as_str()).find(|id| *id != current).unwrap();
    let (status, _) = call(&f.state, verdict("ann1", "tok1", other, "DontKnow")).await;
    assert_eq!(status, StatusCode::CONFLICT);

    let (status, body) = call(&f.state, get("/api/report")).await;
    assert_eq!(status, StatusCode::CONFLICT, "{body}");
    let (status, body) = call(&f.state, get("/api/report?partial=true")).await;
    assert_eq!(status, StatusCode::OK, "{body}");
}

#[tokio::test]
async fn resubmission_supersedes() {
    let f = fixture();
    let (_, body) = call(&f.state, next("ann1", "tok1")).await;
    let id = serde_json::from_str::<Value>(&body).unwrap()["item_id"].as_str().unwrap().to_string();
    call(&f.state, verdict("ann1", "tok1", &id, "BothWrong")).await;
    let (status, body) = call(&f.state, verdict("ann1", "tok1", &id, "Undecidable")).await;
    assert_eq!(status, StatusCode::OK);
    let ack: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(ack["superseded"], true);
    assert_eq!(ack["answered"], 1);
    let (_, body) = call(&f.state, next("ann2", "tok2")).await;
    let id2 = serde_json::from_str::<Value>(&body).unwrap()["item_id"].as_str().unwrap().to_string();
    assert_eq!(id, id2);
    call(&f.state, verdict("ann2", "tok2", &id, "Undecidable")).await;
    let (_, body) = call(&f.state, get("/api/report?partial=true")).await;
    let r: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(r["consensus"]["undecidable"], 1);
}

#[tokio::test]
async fn static_ui_is_served() {
    let f = fixture();
    let ui = tempfile::tempdir().unwrap();
    std::fs::write(ui.path().join("index.html"), "<html>ui</html>").unwrap();
    let resp = router(f.state.clone(), Some(ui.path().to_path_buf()))
        .oneshot(get("/index.html"))
        .await
        .unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    assert_eq!(&bytes[..], b"<html>ui</html>");
}
