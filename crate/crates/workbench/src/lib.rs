//! HTTP facade over a piforge project directory. Reads share a lock; every
//! mutation goes through the process engine under the write lock and is
//! persisted before the response is sent.

mod error;
pub mod views;

use std::net::{Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use piforge_core::canonical::Digest;
use piforge_core::harmonize::{HarmonizationDecision, Verdict};
use piforge_core::model::Stakeholder;
use piforge_core::process::{
    resolve_conflict, run_harmonization, Clock, ProcessError, ProcessState, Resolution,
};
use piforge_core::project::{self, ProjectError};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::RwLock;

pub use error::ApiError;

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("{0} is not an initialized project")]
    UninitializedProject(PathBuf),
    #[error(transparent)]
    Project(ProjectError),
    #[error("port {port} is unavailable: {source}")]
    PortUnavailable { port: u16, source: std::io::Error },
    #[error("server failed: {0}")]
    Io(#[from] std::io::Error),
}

pub struct Workbench {
    dir: PathBuf,
    read_only: bool,
    clock: Box<dyn Clock + Send + Sync>,
    state: RwLock<ProcessState>,
}

impl Workbench {
    pub fn open(
        dir: &Path,
        read_only: bool,
        clock: Box<dyn Clock + Send + Sync>,
    ) -> Result<Self, ServeError> {
        let state = project::load(dir).map_err(|e| match e {
            ProjectError::NotInitialized(p) => ServeError::UninitializedProject(p),
            other => ServeError::Project(other),
        })?;
        Ok(Workbench {
            dir: dir.to_path_buf(),
            read_only,
            clock,
            state: RwLock::new(state),
        })
    }

    pub fn router(self) -> Router {
        Router::new()
            .route("/api/version", get(version))
            .route("/api/pilog", get(pilog))
            .route("/api/proposals", get(proposals))
            .route("/api/proposals/{id}/decision", post(decide))
            .route("/api/conflicts", get(conflicts))
            .route("/api/conflicts/{id}/resolution", post(resolve))
            .route("/api/trace/{node}", get(trace))
            .route("/api/graph", get(graph))
            .route("/api/coverage", get(coverage))
            .route("/api/icd", get(icd))
            .route("/api/proreq", get(proreq))
            .route("/api/process/state", get(process_state))
            .fallback(|| async {
                ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
            })
            .with_state(Arc::new(self))
    }

    /// Runs `op`, then persists the result before swapping it in.
    async fn mutate(
        &self,
        digest: &Digest,
        op: impl FnOnce(&ProcessState, &dyn Clock) -> Result<ProcessState, ApiError>,
    ) -> Result<Response, ApiError> {
        if self.read_only {
            return Err(ApiError::read_only());
        }
        let mut guard = self.state.write().await;
        let current = &guard.current_digest;
        if digest != current {
            return Err(ApiError::stale(current, digest).with_digest(current));
        }
        let next = op(&guard, self.clock.as_ref()).map_err(|e| e.with_digest(current))?;
        project::save(&self.dir, &next)?;
        let body = views::mutation(&guard, &next);
        *guard = next;
        Ok(json(StatusCode::OK, &body))
    }
}

/// Binds 127.0.0.1:`port` and serves until ctrl-c.
pub async fn serve(workbench: Workbench, port: u16) -> Result<(), ServeError> {
    let addr = SocketAddr::from((Ipv4Addr::LOCALHOST, port));
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|source| ServeError::PortUnavailable { port, source })?;
    axum::serve(listener, workbench.router())
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

pub(crate) fn json<T: Serialize>(status: StatusCode, body: &T) -> Response {
    let mut bytes = serde_json::to_vec_pretty(body).expect("views serialize");
    bytes.push(b'\n');
    (status, [(header::CONTENT_TYPE, "application/json")], bytes).into_response()
}

type App = State<Arc<Workbench>>;

fn ok<T: Serialize>(body: &T) -> Response {
    json(StatusCode::OK, body)
}

async fn version(State(wb): App) -> Response {
    ok(&views::version(&*wb.state.read().await))
}

async fn pilog(State(wb): App) -> Response {
    ok(&views::pilog(&*wb.state.read().await))
}

async fn proposals(State(wb): App) -> Response {
    ok(&views::proposals(&*wb.state.read().await))
}

async fn conflicts(State(wb): App) -> Response {
    ok(&views::conflicts(&*wb.state.read().await))
}

async fn trace(State(wb): App, UrlPath(node): UrlPath<String>) -> Result<Response, ApiError> {
    let s = wb.state.read().await;
    let view =
        views::trace(&s, &node).map_err(|e| ApiError::from(e).with_digest(&s.current_digest))?;
    Ok(ok(&view))
}

async fn graph(State(wb): App) -> Result<Response, ApiError> {
    Ok(ok(&views::graph(&*wb.state.read().await)?))
}

async fn coverage(State(wb): App) -> Result<Response, ApiError> {
    Ok(ok(&views::coverage(&*wb.state.read().await)?))
}

async fn icd(State(wb): App) -> Result<Response, ApiError> {
    let s = wb.state.read().await;
    let view = views::icd(&s).ok_or_else(|| {
        ApiError::new(
            StatusCode::NOT_FOUND,
            "no_artifacts",
            format!("no artifacts in phase {}", s.phase),
        )
        .with_digest(&s.current_digest)
    })?;
    Ok(ok(&view))
}

async fn proreq(State(wb): App) -> Response {
    ok(&views::proreq(&*wb.state.read().await))
}

async fn process_state(State(wb): App) -> Response {
    ok(&views::state(&*wb.state.read().await))
}

/// Request body of a mutation; read-only mode refuses before parsing.
fn body<T>(wb: &Workbench, payload: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    if wb.read_only {
        return Err(ApiError::read_only());
    }
    payload.map(|Json(t)| t).map_err(|e| {
        ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "invalid_request",
            e.body_text(),
        )
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecisionRequest {
    /// Digest the decision was made against.
    pub digest: Digest,
    pub verdict: Verdict,
    pub actor: Stakeholder,
    pub rationale: String,
    /// Defaults to the next free `D-NNN`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
}

async fn decide(
    State(wb): App,
    UrlPath(proposal): UrlPath<String>,
    payload: Result<Json<DecisionRequest>, JsonRejection>,
) -> Result<Response, ApiError> {
    let req = body(&wb, payload)?;
    wb.mutate(&req.digest, |s, clock| {
        let known = s.proposals().map_err(ProcessError::from)?;
        if !known.iter().any(|p| p.id == proposal) {
            return Err(ApiError::new(
                StatusCode::NOT_FOUND,
                "unknown_proposal",
                format!("no open proposal `{proposal}`"),
            ));
        }
        let decision = HarmonizationDecision {
            id: req
                .id
                .clone()
                .unwrap_or_else(|| format!("D-{:03}", s.decisions.len() + 1)),
            proposal: proposal.clone(),
            verdict: req.verdict,
            decided_by: req.actor.clone(),
            rationale: req.rationale.clone(),
            bundle_digest: req.digest.clone(),
        };
        Ok(run_harmonization(s, &[decision], &req.actor, clock)?)
    })
    .await
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResolutionRequest {
    pub digest: Digest,
    pub resolution: Resolution,
    pub actors: Vec<Stakeholder>,
}

async fn resolve(
    State(wb): App,
    UrlPath(conflict): UrlPath<String>,
    payload: Result<Json<ResolutionRequest>, JsonRejection>,
) -> Result<Response, ApiError> {
    let req = body(&wb, payload)?;
    wb.mutate(&req.digest, |s, clock| {
        Ok(resolve_conflict(
            s,
            &conflict,
            &req.resolution,
            &req.actors,
            clock,
        )?)
    })
    .await
}
