//! Completeness and consistency checks for a single PI log entry.

use crate::diagnostic::{Diagnostic, Severity};
use crate::model::{is_valid_pi_id, PerformanceIndicator, Role, Uncertainty};
use crate::units::Quantity;

/// Descriptions shorter than this (in characters) count as lacking.
pub const MIN_DESCRIPTION_CHARS: usize = 10;

pub const E_PI_ID: &str = "E_PI_ID";
pub const E_DESCRIPTION: &str = "E_DESCRIPTION";
pub const E_RANGE: &str = "E_RANGE";
pub const E_RATE: &str = "E_RATE";
pub const E_PAYLOAD: &str = "E_PAYLOAD";
pub const E_FRESHNESS: &str = "E_FRESHNESS";
pub const E_UNCERTAINTY: &str = "E_UNCERTAINTY";
pub const E_PROVENANCE: &str = "E_PROVENANCE";
pub const E_MERGED_FROM: &str = "E_MERGED_FROM";
pub const E_PROXY: &str = "E_PROXY";
pub const W_UNCERTAINTY_UNDECLARED: &str = "W_UNCERTAINTY_UNDECLARED";

/// Checks every PI invariant except trace presence, which only applies to
/// consolidated entries. Returns an empty list for a complete entry.
pub fn validate_pi(pi: &PerformanceIndicator) -> Vec<Diagnostic> {
    let proposer_role = pi
        .proposed_by
        .iter()
        .next()
        .map(|s| s.role)
        .unwrap_or(Role::SelfPerceptionCoordinator);
    let mut out = Vec::new();
    let mut push = |severity: Severity, code: &str, field: &str, role: Role, message: String| {
        out.push(
            Diagnostic::new(severity, code, message)
                .with_subject(pi.id.clone())
                .with_field(field)
                .with_role(role)
                .with_stakeholders(pi.proposed_by.iter().cloned()),
        );
    };

    if !is_valid_pi_id(&pi.id) {
        push(
            Severity::Error,
            E_PI_ID,
            "id",
            Role::SelfPerceptionCoordinator,
            format!("`{}` is not a dot-separated lowercase identifier", pi.id),
        );
    }

    let chars = pi.description.trim().chars().count();
    if chars == 0 {
        push(
            Severity::Error,
            E_DESCRIPTION,
            "description",
            proposer_role,
            "description is missing".into(),
        );
    } else if chars < MIN_DESCRIPTION_CHARS {
        push(
            Severity::Error,
            E_DESCRIPTION,
            "description",
            proposer_role,
            format!(
                "description has {chars} characters; at least {MIN_DESCRIPTION_CHARS} required"
            ),
        );
    }

    let range = pi.range;
    if !(range.min.is_finite() && range.max.is_finite()) {
        push(
            Severity::Error,
            E_RANGE,
            "range",
            proposer_role,
            "range bounds must be finite".into(),
        );
    } else if range.min > range.max {
        push(
            Severity::Error,
            E_RANGE,
            "range",
            proposer_role,
            format!("range minimum {} exceeds maximum {}", range.min, range.max),
        );
    }

    let mut quantity = |field: &str, code: &str, q: &Quantity, dimension_ok: bool, what: &str| {
        if !dimension_ok {
            push(
                Severity::Error,
                code,
                field,
                proposer_role,
                format!("unit `{}` is not {what}", q.unit),
            );
        } else if !(q.value.is_finite() && q.value > 0.0) {
            push(
                Severity::Error,
                code,
                field,
                proposer_role,
                format!("{field} must be positive"),
            );
        }
    };
    quantity(
        "rate",
        E_RATE,
        &pi.rate,
        pi.rate.unit.vector().is_frequency(),
        "a frequency",
    );
    quantity(
        "payload",
        E_PAYLOAD,
        &pi.payload,
        pi.payload.unit.vector().is_information(),
        "an information size",
    );
    quantity(
        "freshness",
        E_FRESHNESS,
        &pi.freshness,
        pi.freshness.unit.vector().is_time(),
        "a time",
    );

    match &pi.uncertainty {
        Uncertainty::NoneDeclared => push(
            Severity::Warning,
            W_UNCERTAINTY_UNDECLARED,
            "uncertainty",
            Role::FunctionExpert,
            "uncertainty not declared; request from function expert".into(),
        ),
        Uncertainty::Interval { magnitude } | Uncertainty::StandardDeviation { magnitude } => {
            if !(magnitude.is_finite() && *magnitude >= 0.0) {
                push(
                    Severity::Error,
                    E_UNCERTAINTY,
                    "uncertainty",
                    Role::FunctionExpert,
                    "uncertainty magnitude must be a finite nonnegative number".into(),
                );
            }
        }
        Uncertainty::Qualitative { note } => {
            if note.trim().is_empty() {
                push(
                    Severity::Error,
                    E_UNCERTAINTY,
                    "uncertainty",
                    Role::FunctionExpert,
                    "qualitative uncertainty needs a note".into(),
                );
            }
        }
    }

    if pi.proposed_by.is_empty() {
        push(
            Severity::Error,
            E_PROVENANCE,
            "proposed_by",
            Role::SelfPerceptionCoordinator,
            "no proposing stakeholder recorded".into(),
        );
    }
    if pi.provider.trim().is_empty() {
        push(
            Severity::Error,
            E_PROVENANCE,
            "provider",
            proposer_role,
            "provider function is missing".into(),
        );
    }
    if pi.merged_from.contains(&pi.id) {
        push(
            Severity::Error,
            E_MERGED_FROM,
            "merged_from",
            Role::SelfPerceptionCoordinator,
            "merged_from contains the PI's own id".into(),
        );
    }
    if pi.proxy_for.as_deref().is_some_and(|p| p.trim().is_empty()) {
        push(
            Severity::Error,
            E_PROXY,
            "proxy_for",
            proposer_role,
            "proxy_for is empty".into(),
        );
    }
    out
}
