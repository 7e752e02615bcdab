use std::sync::{Arc, OnceLock};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use cadren_cli::serve::{router, AppState, GraphDetail, GraphSummary, ScoreResponse};
use cadren_core::baselines::PageRankConfig;
use cadren_core::datagen::{generate, GenConfig};
use cadren_core::model::bundle::ProviderSpec;
use cadren_core::model::{train, ModelConfig};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn state() -> Arc<AppState> {
    static STATE: OnceLock<Arc<AppState>> = OnceLock::new();
    STATE
        .get_or_init(|| {
            let dataset = generate(&GenConfig::family_a(24, 5)).unwrap();
            let cfg = ModelConfig {
                d_sem: 32,
                d_model: 16,
                ae_hidden: 16,
                epochs: 8,
                ..ModelConfig::default()
            };
            let out = train(&dataset, &cfg, ProviderSpec::Hash { dim: 32, seed: 0 }).unwrap();
            Arc::new(AppState {
                model: out.model,
                dataset,
                pagerank: PageRankConfig::default(),
            })
        })
        .clone()
}

async fn call(req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let resp = router(state()).oneshot(req).await.unwrap();
    let status = resp.status();
    let ct = resp.headers().get("content-type").map(|v| v.to_str().unwrap().to_string());
    assert_eq!(ct.as_deref(), Some("application/json"));
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

async fn get(uri: &str) -> (StatusCode, Vec<u8>) {
    call(Request::get(uri).body(Body::empty()).unwrap()).await
}

async fn post_score(body: Value) -> (StatusCode, Vec<u8>) {
    call(
        Request::post("/score")
            .header("content-type", "application/json")
            .body(Body::from(body.to_string()))
            .unwrap(),
    )
    .await
}

fn error_of(body: &[u8]) -> String {
    let v: Value = serde_json::from_slice(body).unwrap();
    v["error"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn lists_graphs_with_counts() {
    let (status, body) = get("/graphs").await;
    assert_eq!(status, StatusCode::OK);
    let graphs: Vec<GraphSummary> = serde_json::from_slice(&body).unwrap();
    let s = state();
    assert_eq!(graphs.len(), s.dataset.len());
    for (summary, g) in graphs.iter().zip(s.dataset.graphs()) {
        assert_eq!(summary.id, g.id());
        assert_eq!(summary.node_count, g.len());
        assert_eq!(summary.edge_count, g.edges().len());
    }
}

#[tokio::test]
async fn graph_detail_and_unknown_graph() {
    let s = state();
    let g = &s.dataset.graphs()[3];
    let (status, body) = get(&format!("/graphs/{}", g.id())).await;
    assert_eq!(status, StatusCode::OK);
    let detail: GraphDetail = serde_json::from_slice(&body).unwrap();
    assert_eq!(detail.nodes, g.nodes());
    assert_eq!(detail.edges, g.edges());

    let (status, body) = get("/graphs/missing").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert!(error_of(&body).contains("missing"));
}

#[tokio::test]
async fn score_validation_errors() {
    let s = state();
    let g = &s.dataset.graphs()[0];
    let (status, body) = post_score(json!({"graph_id": g.id(), "ca": [], "top_k": 5})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(error_of(&body), "CA must be non-empty");

    let (status, body) = post_score(json!({"graph_id": g.id(), "ca": ["ghost"]})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(error_of(&body).contains("ghost"));

    let (status, _) = post_score(json!({"graph_id": "nope", "ca": ["a"]})).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (status, _) = call(
        Request::post("/score")
            .header("content-type", "application/json")
            .body(Body::from("{not json"))
            .unwrap(),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn score_is_stateless_and_truncated() {
    let s = state();
    let g = &s.dataset.graphs()[1];
    let ca: Vec<&String> = g.pairs()[0].ca.iter().collect();
    let body = json!({"graph_id": g.id(), "ca": ca, "top_k": 7});
    let (status, first) = post_score(body.clone()).await;
    assert_eq!(status, StatusCode::OK);
    let (_, second) = post_score(body).await;
    assert_eq!(first, second);
    let resp: ScoreResponse = serde_json::from_slice(&first).unwrap();
    assert_eq!(resp.ranking.len(), 7);
    assert_eq!(resp.baseline_ppr.len(), 7);
    for w in resp.ranking.windows(2) {
        assert!(w[0].score >= w[1].score);
    }
    let v: Value = serde_json::from_slice(&first).unwrap();
    let entry = v["ranking"][0].as_object().unwrap();
    assert!(entry.contains_key("node") && entry.contains_key("score"));
}

#[tokio::test]
async fn different_anchor_sets_steer_the_ranking() {
    let s = state();
    let g = &s.dataset.graphs()[2];
    let mut tops = Vec::new();
    for pair in g.pairs() {
        let ca: Vec<&String> = pair.ca.iter().collect();
        let (status, body) = post_score(json!({"graph_id": g.id(), "ca": ca, "top_k": 20})).await;
        assert_eq!(status, StatusCode::OK);
        let resp: ScoreResponse = serde_json::from_slice(&body).unwrap();
        tops.push(resp.ranking.into_iter().map(|e| e.node).collect::<Vec<_>>());
    }
    assert_eq!(tops.len(), 2);
    assert_ne!(tops[0], tops[1]);
}
