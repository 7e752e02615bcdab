//! Read-only HTTP scoring service.
//!
//! `GET /graphs`, `GET /graphs/{id}` and `POST /score`. Every response is
//! JSON; errors carry `{"error": message}`. Handlers share the model and
//! dataset immutably, so the service holds no per-request state.

use std::collections::BTreeSet;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use cadren_core::baselines::{personalized_pagerank, PageRankConfig};
use cadren_core::graph::{AnchorPair, Dataset, Edge, Graph, Node};
use cadren_core::metrics::{RankedEntry, RankedList};
use cadren_core::model::Cadren;
use serde::{Deserialize, Serialize};

pub const DEFAULT_TOP_K: usize = 20;

pub struct AppState {
    pub model: Cadren,
    pub dataset: Dataset,
    pub pagerank: PageRankConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSummary {
    pub id: String,
    pub node_count: usize,
    pub edge_count: usize,
    pub pair_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDetail {
    pub id: String,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub pairs: Vec<AnchorPair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub graph_id: String,
    pub ca: Vec<String>,
    #[serde(default)]
    pub top_k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub graph_id: String,
    pub ca: Vec<String>,
    pub ranking: Vec<RankedEntry>,
    pub baseline_ppr: Vec<RankedEntry>,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        self.status
    }

    pub fn message(&self) -> &str {
        &self.message
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.message }))).into_response()
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/graphs", get(list_graphs))
        .route("/graphs/{id}", get(graph_detail))
        .route("/score", post(score))
        .with_state(state)
}

async fn list_graphs(State(state): State<Arc<AppState>>) -> Json<Vec<GraphSummary>> {
    Json(
        state
            .dataset
            .graphs()
            .iter()
            .map(|g| GraphSummary {
                id: g.id().to_string(),
                node_count: g.len(),
                edge_count: g.edges().len(),
                pair_count: g.pairs().len(),
            })
            .collect(),
    )
}

fn find_graph<'a>(state: &'a AppState, id: &str) -> Result<&'a Graph, ApiError> {
    state
        .dataset
        .graph(id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown graph `{id}`")))
}

async fn graph_detail(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<GraphDetail>, ApiError> {
    let g = find_graph(&state, &id)?;
    Ok(Json(GraphDetail {
        id: g.id().to_string(),
        nodes: g.nodes().to_vec(),
        edges: g.edges().to_vec(),
        pairs: g.pairs().to_vec(),
    }))
}

/// Validates a request and computes both rankings. Pure in `state`.
pub fn score_request(state: &AppState, req: &ScoreRequest) -> Result<ScoreResponse, ApiError> {
    let g = find_graph(state, &req.graph_id)?;
    let bad = |m: String| ApiError::new(StatusCode::BAD_REQUEST, m);
    if req.ca.is_empty() {
        return Err(bad("CA must be non-empty".into()));
    }
    let top_k = req.top_k.unwrap_or(DEFAULT_TOP_K);
    if top_k == 0 {
        return Err(bad("top_k must be >= 1".into()));
    }
    if let Some(unknown) = req.ca.iter().find(|id| g.node_index(id).is_none()) {
        return Err(bad(format!("unknown CA node `{unknown}` in graph `{}`", g.id())));
    }
    let ca: BTreeSet<String> = req.ca.iter().cloned().collect();
    let ranking = state
        .model
        .infer(g, &ca)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    let ca_idx: Vec<usize> = ca.iter().filter_map(|id| g.node_index(id)).collect();
    let ppr = personalized_pagerank(g, &ca_idx, state.pagerank).scores;
    let ids: Vec<&str> = g.nodes().iter().map(|n| n.id.as_str()).collect();
    Ok(ScoreResponse {
        graph_id: g.id().to_string(),
        ca: ca.into_iter().collect(),
        ranking: ranking.truncated(top_k).entries,
        baseline_ppr: RankedList::new(&ids, &ppr).truncated(top_k).entries,
    })
}

async fn score(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Json<ScoreResponse>, ApiError> {
    let req: ScoreRequest = serde_json::from_slice(&body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, format!("invalid request body: {e}")))?;
    let out = tokio::task::spawn_blocking(move || score_request(&state, &req))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok(Json(out))
}

pub async fn serve(state: Arc<AppState>, host: &str, port: u16) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind((host, port)).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await?;
    Ok(())
}
