use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use piforge_core::canonical::Digest;
use piforge_core::harmonize::HarmonizeError;
use piforge_core::process::ProcessError;
use piforge_core::project::ProjectError;
use piforge_core::trace::TraceError;
use serde::Serialize;

/// Error body. `code` is stable; `message` is for people.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub current_digest: Option<Digest>,
}

#[derive(Serialize)]
struct Body<'a> {
    status: u16,
    #[serde(flatten)]
    error: &'a ApiError,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            current_digest: None,
        }
    }

    pub fn with_digest(mut self, digest: &Digest) -> Self {
        self.current_digest = Some(digest.clone());
        self
    }

    pub fn read_only() -> Self {
        ApiError::new(
            StatusCode::FORBIDDEN,
            "read_only",
            "the workbench is serving read-only",
        )
    }

    pub fn stale(expected: &Digest, found: &Digest) -> Self {
        ApiError::new(
            StatusCode::CONFLICT,
            "stale_decision",
            format!("request was made against {found}, but the current bundle is {expected}"),
        )
    }
}

impl From<ProcessError> for ApiError {
    fn from(e: ProcessError) -> Self {
        use StatusCode as S;
        let message = e.to_string();
        if e.role_violation().is_some() {
            return ApiError::new(S::FORBIDDEN, "role_violation", message);
        }
        let (status, code) = match &e {
            ProcessError::Harmonize(h) => match h {
                HarmonizeError::StaleDecision { .. } => (S::CONFLICT, "stale_decision"),
                HarmonizeError::UnknownProposal { .. } => (S::NOT_FOUND, "unknown_proposal"),
                HarmonizeError::EmptyRationale { .. } => {
                    (S::UNPROCESSABLE_ENTITY, "empty_rationale")
                }
                HarmonizeError::ConflictingDecisions(_) => {
                    (S::UNPROCESSABLE_ENTITY, "conflicting_decisions")
                }
                HarmonizeError::InvalidThreshold(_) => {
                    (S::UNPROCESSABLE_ENTITY, "invalid_threshold")
                }
                HarmonizeError::RoleViolation { .. } => (S::FORBIDDEN, "role_violation"),
            },
            ProcessError::UnknownConflict(_) => (S::NOT_FOUND, "unknown_conflict"),
            ProcessError::WrongPhase { .. } => (S::UNPROCESSABLE_ENTITY, "wrong_phase"),
            ProcessError::OpenConflicts(_) => (S::UNPROCESSABLE_ENTITY, "open_conflicts"),
            ProcessError::InvalidResolution(_) => (S::UNPROCESSABLE_ENTITY, "invalid_resolution"),
            ProcessError::InvalidProposal(_) => (S::UNPROCESSABLE_ENTITY, "invalid_proposal"),
            ProcessError::InvalidBundle(_) | ProcessError::IncompleteItemDefinition(_) => {
                (S::UNPROCESSABLE_ENTITY, "invalid_bundle")
            }
            ProcessError::RoleViolation(_) => (S::FORBIDDEN, "role_violation"),
            ProcessError::Synth(_) | ProcessError::Trace(_) | ProcessError::Replay(_) => {
                (S::INTERNAL_SERVER_ERROR, "internal")
            }
        };
        ApiError::new(status, code, message)
    }
}

impl From<TraceError> for ApiError {
    fn from(e: TraceError) -> Self {
        match e {
            TraceError::UnknownNode(_) => {
                ApiError::new(StatusCode::NOT_FOUND, "unknown_node", e.to_string())
            }
            _ => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()),
        }
    }
}

impl From<ProjectError> for ApiError {
    fn from(e: ProjectError) -> Self {
        ApiError::new(
            StatusCode::INTERNAL_SERVER_ERROR,
            "persistence",
            e.to_string(),
        )
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = Body {
            status: self.status.as_u16(),
            error: &self,
        };
        crate::json(self.status, &body)
    }
}
