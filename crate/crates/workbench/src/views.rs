//! Response documents. Every one leads with `current_digest`; field order is
//! declaration order and maps are sorted, so equal state gives equal bytes.

use piforge_core::canonical::Digest;
use piforge_core::harmonize::{HarmonizationDecision, MergeProposal};
use piforge_core::model::PerformanceIndicator;
use piforge_core::process::{
    proreq_checklist, AuditEvent, ChecklistEntry, Conflict, Iterations, Phase, ProcessState,
};
use piforge_core::synth::FeasibilityReport;
use piforge_core::trace::{
    coverage_report, impact, trace_origin, CoverageReport, GraphDocument, NodeKind, Origin,
    TraceError,
};
use serde::Serialize;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
pub struct VersionView {
    pub current_digest: Digest,
    pub schema_version: u32,
    pub piforge: &'static str,
}

pub fn version(s: &ProcessState) -> VersionView {
    VersionView {
        current_digest: s.current_digest.clone(),
        schema_version: SCHEMA_VERSION,
        piforge: env!("CARGO_PKG_VERSION"),
    }
}

#[derive(Debug, Serialize)]
pub struct PiLogView {
    pub current_digest: Digest,
    pub phase: Phase,
    pub pis: Vec<PerformanceIndicator>,
}

pub fn pilog(s: &ProcessState) -> PiLogView {
    PiLogView {
        current_digest: s.current_digest.clone(),
        phase: s.phase,
        pis: s.bundle.pis().cloned().collect(),
    }
}

#[derive(Debug, Serialize)]
pub struct ProposalsView {
    pub current_digest: Digest,
    pub phase: Phase,
    pub proposals: Vec<MergeProposal>,
}

pub fn proposals(s: &ProcessState) -> ProposalsView {
    ProposalsView {
        current_digest: s.current_digest.clone(),
        phase: s.phase,
        // The threshold was checked at init.
        proposals: s.proposals().unwrap_or_default(),
    }
}

#[derive(Debug, Serialize)]
pub struct ConflictsView {
    pub current_digest: Digest,
    pub phase: Phase,
    pub conflicts: Vec<Conflict>,
}

pub fn conflicts(s: &ProcessState) -> ConflictsView {
    ConflictsView {
        current_digest: s.current_digest.clone(),
        phase: s.phase,
        conflicts: s.conflicts.values().cloned().collect(),
    }
}

#[derive(Debug, Serialize)]
pub struct TraceView {
    pub current_digest: Digest,
    pub node: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub origin: Option<Origin>,
    /// Nodes that depend on this one.
    pub impact: Vec<String>,
}

pub fn trace(s: &ProcessState, node: &str) -> Result<TraceView, TraceError> {
    let graph = s.graph()?;
    let key = graph.resolve(node)?;
    let origin = match key.kind {
        NodeKind::Pi => Some(trace_origin(&graph, &key.id)?),
        _ => None,
    };
    Ok(TraceView {
        current_digest: s.current_digest.clone(),
        node: key.to_string(),
        origin,
        impact: impact(&graph, &key)?
            .iter()
            .map(ToString::to_string)
            .collect(),
    })
}

#[derive(Debug, Serialize)]
pub struct GraphView {
    pub current_digest: Digest,
    pub graph: GraphDocument,
}

pub fn graph(s: &ProcessState) -> Result<GraphView, TraceError> {
    Ok(GraphView {
        current_digest: s.current_digest.clone(),
        graph: s.graph()?.document(),
    })
}

#[derive(Debug, Serialize)]
pub struct CoverageView {
    pub current_digest: Digest,
    pub complete: bool,
    pub coverage: CoverageReport,
}

pub fn coverage(s: &ProcessState) -> Result<CoverageView, TraceError> {
    let coverage = coverage_report(&s.graph()?);
    Ok(CoverageView {
        current_digest: s.current_digest.clone(),
        complete: coverage.is_empty(),
        coverage,
    })
}

#[derive(Debug, Serialize)]
pub struct IcdView {
    pub current_digest: Digest,
    pub icd_digest: Digest,
    pub idl_digest: Digest,
    pub icd: String,
    pub idl: String,
}

pub fn icd(s: &ProcessState) -> Option<IcdView> {
    let a = s.artifacts.as_ref()?;
    Some(IcdView {
        current_digest: s.current_digest.clone(),
        icd_digest: a.icd_digest.clone(),
        idl_digest: a.idl_digest.clone(),
        icd: a.icd.clone(),
        idl: a.idl.clone(),
    })
}

#[derive(Debug, Serialize)]
pub struct ProreqView {
    pub current_digest: Digest,
    pub satisfied: usize,
    pub checklist: Vec<ChecklistEntry>,
}

pub fn proreq(s: &ProcessState) -> ProreqView {
    let checklist = proreq_checklist(s);
    ProreqView {
        current_digest: s.current_digest.clone(),
        satisfied: checklist.iter().filter(|e| e.satisfied).count(),
        checklist,
    }
}

#[derive(Debug, Serialize)]
pub struct StateView {
    pub current_digest: Digest,
    pub initial_digest: Digest,
    pub phase: Phase,
    pub top_down_submitted: bool,
    pub bottom_up_submitted: bool,
    pub iterations: Iterations,
    pub threshold: f64,
    pub open_conflicts: Vec<String>,
    pub decisions: Vec<HarmonizationDecision>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feasibility: Option<FeasibilityReport>,
    pub audit: Vec<AuditEvent>,
}

pub fn state(s: &ProcessState) -> StateView {
    StateView {
        current_digest: s.current_digest.clone(),
        initial_digest: s.initial_digest.clone(),
        phase: s.phase,
        top_down_submitted: s.top_down_submitted,
        bottom_up_submitted: s.bottom_up_submitted,
        iterations: s.iterations,
        threshold: s.threshold,
        open_conflicts: s.open_conflicts().map(|c| c.id.clone()).collect(),
        decisions: s.decisions.clone(),
        feasibility: s.feasibility.clone(),
        audit: s.audit.clone(),
    }
}

/// Result of a mutation: the new digest and the audit events it appended.
#[derive(Debug, Serialize)]
pub struct MutationView {
    pub current_digest: Digest,
    pub phase: Phase,
    pub events: Vec<AuditEvent>,
}

pub fn mutation(before: &ProcessState, after: &ProcessState) -> MutationView {
    MutationView {
        current_digest: after.current_digest.clone(),
        phase: after.phase,
        events: after.audit[before.audit.len()..].to_vec(),
    }
}

/// Machine report combining the other views.
#[derive(Debug, Serialize)]
pub struct ReportView {
    pub current_digest: Digest,
    pub process: StateView,
    pub coverage: CoverageView,
    pub proreq: ProreqView,
}

pub fn report(s: &ProcessState) -> Result<ReportView, TraceError> {
    Ok(ReportView {
        current_digest: s.current_digest.clone(),
        process: state(s),
        coverage: coverage(s)?,
        proreq: proreq(s),
    })
}
