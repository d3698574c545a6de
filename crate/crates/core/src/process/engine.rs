use std::collections::{BTreeMap, BTreeSet};

use super::{
    Artifacts, Clock, Conflict, Iterations, JournalEntry, Operation, Phase, ProcessError,
    ProcessState, Resolution,
};
use crate::canonical::{snapshot_hash, Digest};
use crate::diagnostic::Diagnostic;
use crate::harmonize::{
    apply_decisions, completeness_report, propose_merges, ChangeEvent, HarmonizationDecision,
    HarmonizeError,
};
use crate::model::{
    check_bundle, check_role, Action, EntityKind, ItemBundle, PerformanceIndicator, Perspective,
    Role, RoleViolation, Stakeholder,
};
use crate::synth::{
    allocate_with, assemble_quality_vectors, check_feasibility, emit_icd, emit_idl,
    nonviable_report, SynthError,
};
use crate::trace::{build_graph, coverage_report};
use crate::validate::validate_pi;

fn digest_of(bundle: &ItemBundle) -> Result<Digest, ProcessError> {
    snapshot_hash(bundle).map_err(|e| ProcessError::InvalidBundle(e.to_string()))
}

fn require_phase(
    state: &ProcessState,
    operation: &'static str,
    allowed: &[Phase],
) -> Result<(), ProcessError> {
    if allowed.contains(&state.phase) {
        Ok(())
    } else {
        Err(ProcessError::WrongPhase {
            operation,
            phase: state.phase,
        })
    }
}

fn event(
    actor: &Stakeholder,
    action: Action,
    subject: impl Into<String>,
    detail: impl Into<String>,
) -> ChangeEvent {
    ChangeEvent {
        actor: actor.clone(),
        action,
        subject: subject.into(),
        detail: detail.into(),
    }
}

fn error_messages(diagnostics: &[Diagnostic]) -> Vec<String> {
    diagnostics
        .iter()
        .filter(|d| d.is_error())
        .map(|d| match &d.subject {
            Some(s) => format!("{s}: {} {}", d.code, d.message),
            None => format!("{} {}", d.code, d.message),
        })
        .collect()
}

fn pi_log(state: &ProcessState) -> Vec<PerformanceIndicator> {
    state.bundle.proposals.values().cloned().collect()
}

/// Starts a process on a checked item bundle. Any PIs already in the
/// bundle become the initial PI log.
pub fn init_process(
    bundle: &ItemBundle,
    actor: &Stakeholder,
    threshold: f64,
    clock: &dyn Clock,
) -> Result<ProcessState, ProcessError> {
    check_role(actor.role, Action::InitProcess)?;
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(HarmonizeError::InvalidThreshold(threshold).into());
    }
    let mut problems: Vec<String> = check_bundle(bundle)
        .into_iter()
        .map(|i| i.message)
        .collect();
    for pi in bundle.pis() {
        problems.extend(error_messages(&validate_pi(pi)));
    }
    if !problems.is_empty() {
        return Err(ProcessError::InvalidBundle(problems.join("; ")));
    }
    let mut missing = Vec::new();
    if bundle.item.is_none() {
        missing.push("no item block");
    }
    if bundle.scenarios.is_empty() {
        missing.push("no operational scenario");
    }
    if bundle.architecture.is_empty() {
        missing.push("no architecture");
    }
    if !missing.is_empty() {
        return Err(ProcessError::IncompleteItemDefinition(missing.join(", ")));
    }

    let digest = digest_of(bundle)?;
    let timestamp = clock.now();
    let name = bundle
        .item
        .as_ref()
        .map(|i| i.name.clone())
        .unwrap_or_default();
    let mut state = ProcessState {
        phase: Phase::ItemDefined,
        top_down_submitted: false,
        bottom_up_submitted: false,
        iterations: Iterations::default(),
        threshold,
        initial: bundle.clone(),
        bundle: bundle.clone(),
        initial_digest: digest.clone(),
        current_digest: digest.clone(),
        suppressions: BTreeSet::new(),
        decisions: Vec::new(),
        conflicts: BTreeMap::new(),
        bus_overrides: BTreeMap::new(),
        interfaces: Vec::new(),
        feasibility: None,
        artifacts: None,
        audit: Vec::new(),
        journal: Vec::new(),
    };
    let detail = format!(
        "{} scenarios, {} requirements, {} failure modes, {} PIs",
        bundle.scenarios.len(),
        bundle.requirements.len(),
        bundle.failure_modes.len(),
        bundle.proposals.len()
    );
    state.record(
        &timestamp,
        &digest,
        vec![event(actor, Action::InitProcess, name, detail)],
    );
    state.journal.push(JournalEntry {
        timestamp,
        operation: Operation::Init {
            actor: actor.clone(),
            threshold,
        },
    });
    Ok(state)
}

/// Adds or replaces PIs from one analysis branch. The perspective is
/// stamped from the branch, whatever the proposals declared.
pub fn submit_perspective(
    state: &ProcessState,
    perspective: Perspective,
    proposals: &[PerformanceIndicator],
    actor: &Stakeholder,
    clock: &dyn Clock,
) -> Result<ProcessState, ProcessError> {
    require_phase(state, "submit", &[Phase::ItemDefined, Phase::Analysis])?;
    let action = match perspective {
        Perspective::TopDown => Action::SubmitTopDown,
        Perspective::BottomUp => Action::SubmitBottomUp,
    };
    check_role(actor.role, action)?;

    let mut next = state.clone();
    let mut problems = Vec::new();
    let mut ids = BTreeSet::new();
    for pi in proposals {
        if !ids.insert(pi.id.clone()) {
            problems.push(format!("{}: submitted twice", pi.id));
        }
        let mut pi = pi.clone();
        pi.perspective = perspective;
        problems.extend(error_messages(&validate_pi(&pi)));
        next.bundle.proposals.insert(pi.id.clone(), pi);
    }
    problems.extend(
        check_bundle(&next.bundle)
            .into_iter()
            .filter(|i| i.owner_kind == EntityKind::Pi && ids.contains(&i.owner_id))
            .map(|i| format!("{}: {}", i.owner_id, i.message)),
    );
    if !problems.is_empty() {
        return Err(ProcessError::InvalidProposal(problems));
    }

    let before = state.current_digest.clone();
    next.current_digest = digest_of(&next.bundle)?;
    match perspective {
        Perspective::TopDown => next.top_down_submitted = true,
        Perspective::BottomUp => next.bottom_up_submitted = true,
    }
    next.phase = if next.top_down_submitted && next.bottom_up_submitted {
        Phase::PiLogDraft
    } else {
        Phase::Analysis
    };
    let timestamp = clock.now();
    let detail = if ids.is_empty() {
        "no PIs".to_string()
    } else {
        ids.iter().cloned().collect::<Vec<_>>().join(", ")
    };
    next.record(
        &timestamp,
        &before,
        vec![event(actor, action, perspective.as_str(), detail)],
    );
    next.journal.push(JournalEntry {
        timestamp,
        operation: Operation::Submit {
            perspective,
            actor: actor.clone(),
            proposals: proposals.to_vec(),
        },
    });
    Ok(next)
}

/// Applies a batch of decisions and either closes harmonization or counts
/// another iteration. Decisions already applied under the same id are
/// skipped.
pub fn run_harmonization(
    state: &ProcessState,
    decisions: &[HarmonizationDecision],
    actor: &Stakeholder,
    clock: &dyn Clock,
) -> Result<ProcessState, ProcessError> {
    require_phase(
        state,
        "harmonize",
        &[Phase::PiLogDraft, Phase::Harmonization],
    )?;
    check_role(actor.role, Action::HarmonizationIteration)?;

    let mut fresh = Vec::new();
    for d in decisions {
        match state.decisions.iter().find(|old| old.id == d.id) {
            Some(old) if old == d => {}
            Some(_) => {
                return Err(HarmonizeError::ConflictingDecisions(format!(
                    "decision id `{}` was already used for a different decision",
                    d.id
                ))
                .into())
            }
            None => fresh.push(d.clone()),
        }
    }

    let log = pi_log(state);
    let outcome = apply_decisions(
        &log,
        &fresh,
        &state.current_digest,
        state.threshold,
        &state.suppressions,
    )?;
    let mut next = state.clone();
    next.bundle.proposals = outcome
        .consolidated
        .iter()
        .map(|p| (p.id.clone(), p.clone()))
        .collect();
    next.suppressions
        .extend(outcome.suppressions_added.iter().cloned());
    next.decisions.extend(fresh.iter().cloned());
    next.current_digest = digest_of(&next.bundle)?;

    let open = propose_merges(&outcome.consolidated, state.threshold, &next.suppressions)?;
    let incomplete = error_messages(&completeness_report(&outcome.consolidated));
    let mut events = outcome.events;
    if open.is_empty() && incomplete.is_empty() {
        next.phase = Phase::InterfaceDefinition;
        events.push(event(
            actor,
            Action::HarmonizationComplete,
            "pi-log",
            format!("{} PIs in the consolidated log", outcome.consolidated.len()),
        ));
    } else {
        next.phase = Phase::Harmonization;
        next.iterations.harmonization += 1;
        events.push(event(
            actor,
            Action::HarmonizationIteration,
            "pi-log",
            format!(
                "iteration {}: {} open proposals, {} completeness errors",
                next.iterations.harmonization,
                open.len(),
                incomplete.len()
            ),
        ));
    }

    let timestamp = clock.now();
    next.record(&timestamp, &state.current_digest, events);
    next.journal.push(JournalEntry {
        timestamp,
        operation: Operation::Harmonize {
            actor: actor.clone(),
            decisions: decisions.to_vec(),
        },
    });
    Ok(next)
}

/// Allocates and checks interfaces. Non-viable interfaces open conflicts,
/// and coverage gaps send the process back to analysis. A clean run emits
/// the artifacts and ends in interfaces_defined.
pub fn run_interface_definition(
    state: &ProcessState,
    actor: &Stakeholder,
    warn_utilization: f64,
    clock: &dyn Clock,
) -> Result<ProcessState, ProcessError> {
    require_phase(
        state,
        "define interfaces",
        &[Phase::InterfaceDefinition, Phase::ConflictResolution],
    )?;
    check_role(actor.role, Action::DefineInterfaces)?;
    let open: Vec<String> = state.open_conflicts().map(|c| c.id.clone()).collect();
    if !open.is_empty() {
        return Err(ProcessError::OpenConflicts(open));
    }

    let log = pi_log(state);
    let interfaces = allocate_with(&log, &state.bundle.architecture, &state.bus_overrides)?;
    let report = check_feasibility(&interfaces, &state.bundle.architecture, warn_utilization);
    let graph = build_graph(&state.bundle, &log, &report.interfaces)?;
    let coverage = coverage_report(&graph);

    let mut next = state.clone();
    let mut events = Vec::new();
    if state.phase == Phase::ConflictResolution {
        next.iterations.interface_definition += 1;
        events.push(event(
            actor,
            Action::InterfaceIteration,
            "interfaces",
            format!("iteration {}", next.iterations.interface_definition),
        ));
    }
    let non_viable = report.non_viable.len();
    events.push(event(
        actor,
        Action::DefineInterfaces,
        "interfaces",
        format!(
            "{} interfaces, {} non-viable",
            report.interfaces.len(),
            non_viable
        ),
    ));

    if non_viable > 0 {
        next.phase = Phase::ConflictResolution;
        for loss in nonviable_report(&report, &graph) {
            let id = format!("C-{:03}", next.conflicts.len() + 1);
            events.push(event(
                actor,
                Action::OpenConflict,
                id.clone(),
                format!("{} on {}: {}", loss.pi, loss.interface, loss.reason),
            ));
            next.conflicts.insert(
                id.clone(),
                Conflict {
                    id,
                    loss,
                    resolution: None,
                },
            );
        }
    } else if !coverage.is_empty() {
        next.phase = Phase::Analysis;
        next.iterations.analysis += 1;
        if !coverage.unmonitored_requirements.is_empty() || !coverage.orphan_pis.is_empty() {
            next.top_down_submitted = false;
        }
        if !coverage.unobserved_failure_modes.is_empty() {
            next.bottom_up_submitted = false;
        }
        let gaps: Vec<String> = coverage
            .orphan_pis
            .iter()
            .map(|p| format!("orphan {p}"))
            .chain(
                coverage
                    .unmonitored_requirements
                    .iter()
                    .map(|r| format!("unmonitored {r}")),
            )
            .chain(
                coverage
                    .unobserved_failure_modes
                    .iter()
                    .map(|f| format!("unobserved {f}")),
            )
            .collect();
        events.push(event(
            actor,
            Action::InterfaceIteration,
            "coverage",
            format!("returning to analysis: {}", gaps.join(", ")),
        ));
    } else {
        next.phase = Phase::InterfacesDefined;
        let icd = emit_icd(&state.bundle, &log, &report.interfaces, &graph)?;
        let idl = emit_idl(&assemble_quality_vectors(&report.interfaces, &log));
        let artifacts = Artifacts {
            icd_digest: Digest::of_bytes(icd.as_bytes()),
            idl_digest: Digest::of_bytes(idl.as_bytes()),
            nodes_tsv: graph.nodes_tsv(),
            edges_tsv: graph.edges_tsv(),
            icd,
            idl,
        };
        events.push(event(
            actor,
            Action::EmitArtifacts,
            format!("artifact:icd:{}", artifacts.icd_digest),
            "interface control document",
        ));
        events.push(event(
            actor,
            Action::EmitArtifacts,
            format!("artifact:idl:{}", artifacts.idl_digest),
            "quality vector schema",
        ));
        next.artifacts = Some(artifacts);
    }
    next.interfaces = report.interfaces.clone();
    next.feasibility = Some(report);

    let timestamp = clock.now();
    next.record(&timestamp, &state.current_digest, events);
    next.journal.push(JournalEntry {
        timestamp,
        operation: Operation::DefineInterfaces {
            actor: actor.clone(),
            warn_utilization,
        },
    });
    Ok(next)
}

fn check_cosigners(actors: &[Stakeholder]) -> Result<Stakeholder, RoleViolation> {
    for a in actors {
        check_role(a.role, Action::ResolveConflict)?;
    }
    for required in [
        Role::SelfPerceptionCoordinator,
        Role::ArchitecturalSystemEngineer,
    ] {
        if !actors.iter().any(|a| a.role == required) {
            return Err(RoleViolation::MissingRole {
                required,
                action: Action::ResolveConflict,
            });
        }
    }
    Ok(actors
        .iter()
        .find(|a| a.role == Role::SelfPerceptionCoordinator)
        .cloned()
        .expect("checked above"))
}

/// Closes one conflict. Needs a coordinator and an architect among the
/// actors; a function expert may co-sign.
pub fn resolve_conflict(
    state: &ProcessState,
    conflict: &str,
    resolution: &Resolution,
    actors: &[Stakeholder],
    clock: &dyn Clock,
) -> Result<ProcessState, ProcessError> {
    require_phase(state, "resolve", &[Phase::ConflictResolution])?;
    let signer = check_cosigners(actors)?;
    let open = state
        .conflicts
        .get(conflict)
        .filter(|c| c.is_open())
        .ok_or_else(|| ProcessError::UnknownConflict(conflict.to_string()))?;
    let pi_id = open.loss.pi.clone();
    let mut next = state.clone();
    let pi = next.bundle.proposals.get_mut(&pi_id).ok_or_else(|| {
        ProcessError::InvalidResolution(format!("PI `{pi_id}` is no longer in the log"))
    })?;

    let cosigned = actors
        .iter()
        .map(|a| a.to_string())
        .collect::<Vec<_>>()
        .join(", ");
    let mut events = Vec::new();
    match resolution {
        Resolution::AdjustPi {
            rate,
            payload,
            freshness,
        } => {
            if rate.is_none() && payload.is_none() && freshness.is_none() {
                return Err(ProcessError::InvalidResolution(
                    "adjust_pi changes nothing".into(),
                ));
            }
            let mut changes = Vec::new();
            for (name, new, field) in [
                ("rate", rate, &mut pi.rate),
                ("payload", payload, &mut pi.payload),
                ("freshness", freshness, &mut pi.freshness),
            ] {
                if let Some(q) = new {
                    changes.push(format!("{name} {field} -> {q}"));
                    *field = q.clone();
                }
            }
            let problems = error_messages(&validate_pi(pi));
            if !problems.is_empty() {
                return Err(ProcessError::InvalidResolution(problems.join("; ")));
            }
            events.push(event(
                &signer,
                Action::ResolveConflict,
                conflict,
                format!(
                    "adjust_pi {pi_id}: {} (signed {cosigned})",
                    changes.join(", ")
                ),
            ));
        }
        Resolution::ReallocateBus { bus } => {
            let arch = &state.bundle.architecture;
            let service = arch.service_of(&pi.provider).ok_or_else(|| {
                ProcessError::Synth(SynthError::UnhostedFunction {
                    pi: pi_id.clone(),
                    function: pi.provider.clone(),
                })
            })?;
            if !service.buses.contains(bus) || !arch.buses.contains_key(bus) {
                return Err(ProcessError::InvalidResolution(format!(
                    "service `{}` is not attached to bus `{bus}`",
                    service.id
                )));
            }
            next.bus_overrides.insert(pi_id.clone(), bus.clone());
            events.push(event(
                &signer,
                Action::ResolveConflict,
                conflict,
                format!("reallocate_bus {pi_id} -> {bus} (signed {cosigned})"),
            ));
        }
        Resolution::DropPi { rationale } => {
            if rationale.trim().is_empty() {
                return Err(ProcessError::InvalidResolution(
                    "drop_pi needs a rationale".into(),
                ));
            }
            next.bundle.proposals.remove(&pi_id);
            next.bus_overrides.remove(&pi_id);
            events.push(event(
                &signer,
                Action::ResolveConflict,
                conflict,
                format!("drop_pi {pi_id}: {rationale} (signed {cosigned})"),
            ));
            let loss = &open.loss;
            if loss.affected.is_empty() {
                events.push(event(
                    &signer,
                    Action::InformationLoss,
                    format!("pi:{pi_id}"),
                    loss.warning.clone().unwrap_or_default(),
                ));
            }
            for affected in &loss.affected {
                events.push(event(
                    &signer,
                    Action::InformationLoss,
                    affected.clone(),
                    format!("no longer observed by {pi_id}"),
                ));
            }
        }
    }

    next.conflicts
        .get_mut(conflict)
        .expect("looked up above")
        .resolution = Some(resolution.clone());
    next.current_digest = digest_of(&next.bundle)?;
    let timestamp = clock.now();
    next.record(&timestamp, &state.current_digest, events);
    next.journal.push(JournalEntry {
        timestamp,
        operation: Operation::ResolveConflict {
            conflict: conflict.to_string(),
            resolution: resolution.clone(),
            actors: actors.to_vec(),
        },
    });
    Ok(next)
}
