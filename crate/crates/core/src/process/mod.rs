//! The PI specification process as a state machine over a single
//! [`ProcessState`] value, with a digest-chained audit log and an operation
//! journal that can be replayed.

mod checklist;
mod engine;
mod replay;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical::Digest;
use crate::harmonize::{
    propose_merges, ChangeEvent, HarmonizationDecision, HarmonizeError, MergeProposal, PiPair,
};
use crate::model::{
    Action, ItemBundle, PerformanceIndicator, Perspective, RoleViolation, Stakeholder, UnknownName,
};
use crate::synth::{FeasibilityReport, InformationLoss, PiInterface, SynthError};
use crate::trace::{build_graph, TraceError, TraceGraph};
use crate::units::Quantity;

pub use checklist::{proreq_checklist, ChecklistEntry};
pub use engine::{
    init_process, resolve_conflict, run_harmonization, run_interface_definition, submit_perspective,
};
pub use replay::{replay, verify_chain};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    ItemDefined,
    Analysis,
    PiLogDraft,
    Harmonization,
    InterfaceDefinition,
    ConflictResolution,
    InterfacesDefined,
}

impl Phase {
    pub const ALL: &'static [Phase] = &[
        Phase::ItemDefined,
        Phase::Analysis,
        Phase::PiLogDraft,
        Phase::Harmonization,
        Phase::InterfaceDefinition,
        Phase::ConflictResolution,
        Phase::InterfacesDefined,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::ItemDefined => "item_defined",
            Phase::Analysis => "analysis",
            Phase::PiLogDraft => "pi_log_draft",
            Phase::Harmonization => "harmonization",
            Phase::InterfaceDefinition => "interface_definition",
            Phase::ConflictResolution => "conflict_resolution",
            Phase::InterfacesDefined => "interfaces_defined",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Phase {
    type Err = UnknownName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Phase::ALL
            .iter()
            .copied()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| UnknownName {
                what: "phase",
                value: s.to_string(),
            })
    }
}

/// Source of audit timestamps.
pub trait Clock {
    /// ISO-8601 UTC.
    fn now(&self) -> String;
}

#[derive(Debug, Clone)]
pub struct FixedClock(pub String);

impl Clock for FixedClock {
    fn now(&self) -> String {
        self.0.clone()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> String {
        chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEvent {
    pub seq: u64,
    pub timestamp: String,
    pub actor: Stakeholder,
    pub action: Action,
    pub subject: String,
    pub detail: String,
    pub digest_before: Digest,
    pub digest_after: Digest,
}

impl AuditEvent {
    /// One tab-separated audit.log line, without the trailing newline.
    pub fn line(&self) -> String {
        [
            self.seq.to_string(),
            self.timestamp.clone(),
            self.actor.role.to_string(),
            self.actor.name.clone(),
            self.action.to_string(),
            self.subject.clone(),
            self.digest_before.to_string(),
            self.digest_after.to_string(),
        ]
        .map(|f| f.replace(['\t', '\n'], " "))
        .join("\t")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Iterations {
    pub analysis: u32,
    pub harmonization: u32,
    pub interface_definition: u32,
}

impl Iterations {
    pub fn total(&self) -> u32 {
        self.analysis + self.harmonization + self.interface_definition
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Resolution {
    AdjustPi {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rate: Option<Quantity>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        payload: Option<Quantity>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        freshness: Option<Quantity>,
    },
    ReallocateBus {
        bus: String,
    },
    DropPi {
        rationale: String,
    },
}

impl Resolution {
    pub fn kind_str(&self) -> &'static str {
        match self {
            Resolution::AdjustPi { .. } => "adjust_pi",
            Resolution::ReallocateBus { .. } => "reallocate_bus",
            Resolution::DropPi { .. } => "drop_pi",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conflict {
    pub id: String,
    pub loss: InformationLoss,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<Resolution>,
}

impl Conflict {
    pub fn is_open(&self) -> bool {
        self.resolution.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifacts {
    pub icd: String,
    pub idl: String,
    pub nodes_tsv: String,
    pub edges_tsv: String,
    pub icd_digest: Digest,
    pub idl_digest: Digest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Operation {
    Init {
        actor: Stakeholder,
        threshold: f64,
    },
    Submit {
        perspective: Perspective,
        actor: Stakeholder,
        proposals: Vec<PerformanceIndicator>,
    },
    Harmonize {
        actor: Stakeholder,
        decisions: Vec<HarmonizationDecision>,
    },
    DefineInterfaces {
        actor: Stakeholder,
        warn_utilization: f64,
    },
    ResolveConflict {
        conflict: String,
        resolution: Resolution,
        actors: Vec<Stakeholder>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JournalEntry {
    pub timestamp: String,
    #[serde(flatten)]
    pub operation: Operation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessState {
    pub phase: Phase,
    pub top_down_submitted: bool,
    pub bottom_up_submitted: bool,
    pub iterations: Iterations,
    pub threshold: f64,
    /// The item as given to init; replay starts from here.
    pub initial: ItemBundle,
    /// The item with the current PI log as its proposals.
    pub bundle: ItemBundle,
    pub initial_digest: Digest,
    pub current_digest: Digest,
    pub suppressions: BTreeSet<PiPair>,
    pub decisions: Vec<HarmonizationDecision>,
    pub conflicts: BTreeMap<String, Conflict>,
    pub bus_overrides: BTreeMap<String, String>,
    pub interfaces: Vec<PiInterface>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feasibility: Option<FeasibilityReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub artifacts: Option<Artifacts>,
    pub audit: Vec<AuditEvent>,
    pub journal: Vec<JournalEntry>,
}

impl ProcessState {
    pub fn open_conflicts(&self) -> impl Iterator<Item = &Conflict> {
        self.conflicts.values().filter(|c| c.is_open())
    }

    /// Trace graph of the current log and interfaces.
    pub fn graph(&self) -> Result<TraceGraph, TraceError> {
        let log: Vec<PerformanceIndicator> = self.bundle.pis().cloned().collect();
        build_graph(&self.bundle, &log, &self.interfaces)
    }

    /// Open merge proposals on the current log.
    pub fn proposals(&self) -> Result<Vec<MergeProposal>, HarmonizeError> {
        let log: Vec<PerformanceIndicator> = self.bundle.pis().cloned().collect();
        propose_merges(&log, self.threshold, &self.suppressions)
    }

    pub fn audit_log(&self) -> String {
        self.audit.iter().map(|e| e.line() + "\n").collect()
    }

    pub fn journal_jsonl(&self) -> String {
        self.journal
            .iter()
            .map(|e| serde_json::to_string(e).expect("journal entries serialize") + "\n")
            .collect()
    }

    /// Appends `events`; the first carries the transition from `before` to
    /// the current digest, the rest stay at the current digest.
    fn record(&mut self, timestamp: &str, before: &Digest, events: Vec<ChangeEvent>) {
        let after = self.current_digest.clone();
        let mut prev = before.clone();
        for e in events {
            let seq = self.audit.len() as u64;
            self.audit.push(AuditEvent {
                seq,
                timestamp: timestamp.to_string(),
                actor: e.actor,
                action: e.action,
                subject: e.subject,
                detail: e.detail,
                digest_before: prev,
                digest_after: after.clone(),
            });
            prev = after.clone();
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProcessError {
    #[error(transparent)]
    RoleViolation(#[from] RoleViolation),
    #[error("{operation} is not allowed in phase {phase}")]
    WrongPhase {
        operation: &'static str,
        phase: Phase,
    },
    #[error("incomplete item definition: {0}")]
    IncompleteItemDefinition(String),
    #[error("invalid item bundle: {0}")]
    InvalidBundle(String),
    #[error("invalid proposals: {}", .0.join("; "))]
    InvalidProposal(Vec<String>),
    #[error(transparent)]
    Harmonize(#[from] HarmonizeError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("unknown or already resolved conflict `{0}`")]
    UnknownConflict(String),
    #[error("invalid resolution: {0}")]
    InvalidResolution(String),
    #[error("open conflicts must be resolved first: {}", .0.join(", "))]
    OpenConflicts(Vec<String>),
    #[error("replay diverged: {0}")]
    Replay(String),
}

impl ProcessError {
    /// The role violation behind this error, if any.
    pub fn role_violation(&self) -> Option<&RoleViolation> {
        match self {
            ProcessError::RoleViolation(v) => Some(v),
            ProcessError::Harmonize(HarmonizeError::RoleViolation { violation, .. }) => {
                Some(violation)
            }
            _ => None,
        }
    }
}
