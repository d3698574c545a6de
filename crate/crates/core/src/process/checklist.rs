use serde::{Deserialize, Serialize};

use super::{verify_chain, Phase, ProcessState};
use crate::model::{Action, Perspective};
use crate::synth::InterfaceStatus;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChecklistEntry {
    pub id: u8,
    pub title: &'static str,
    pub satisfied: bool,
    pub evidence: String,
}

fn entry(id: u8, title: &'static str, result: Result<String, String>) -> ChecklistEntry {
    let satisfied = result.is_ok();
    ChecklistEntry {
        id,
        title,
        satisfied,
        evidence: result.unwrap_or_else(|e| e),
    }
}

/// The seven process requirements, each evaluated against the state.
pub fn proreq_checklist(state: &ProcessState) -> Vec<ChecklistEntry> {
    let mut out = Vec::new();

    out.push(entry(1, "roles are separated and enforced", {
        match state.audit.iter().find(|e| !e.action.permits(e.actor.role)) {
            Some(e) => Err(format!(
                "event {} has {} performing {}",
                e.seq, e.actor.role, e.action
            )),
            None => Ok(format!(
                "{} audit events, all role/action pairs legal",
                state.audit.len()
            )),
        }
    }));

    out.push(entry(2, "item definition is the process input", {
        match state.audit.first() {
            Some(e)
                if e.action == Action::InitProcess && e.digest_before == state.initial_digest =>
            {
                Ok(format!("init_process at seq 0 on {}", state.initial_digest))
            }
            _ => Err("audit log does not start with init_process".into()),
        }
    }));

    out.push(entry(3, "PI interfaces are the process output", {
        let pis = state.bundle.proposals.len();
        let integrated = state
            .interfaces
            .iter()
            .filter(|i| {
                i.status == InterfaceStatus::Integrated
                    && state.bundle.proposals.contains_key(&i.pi)
            })
            .count();
        match &state.artifacts {
            Some(a) if state.phase == Phase::InterfacesDefined && integrated == pis => Ok(format!(
                "ICD {} with {integrated} integrated interfaces",
                a.icd_digest
            )),
            Some(_) => Err(format!(
                "{integrated} of {pis} PIs have an integrated interface"
            )),
            None => Err("no ICD has been emitted".into()),
        }
    }));

    for (id, title, perspective) in [
        (
            4,
            "a top-down analysis branch contributed",
            Perspective::TopDown,
        ),
        (
            5,
            "a bottom-up analysis branch contributed",
            Perspective::BottomUp,
        ),
    ] {
        let traced: Vec<&str> = state
            .bundle
            .pis()
            .filter(|p| p.perspective == perspective && !p.traces.is_empty())
            .map(|p| p.id.as_str())
            .collect();
        out.push(entry(
            id,
            title,
            if traced.is_empty() {
                Err(format!("no traced {perspective} PI"))
            } else {
                Ok(format!("{} traced {perspective} PIs", traced.len()))
            },
        ));
    }

    out.push(entry(6, "every interface is traceable to its origin", {
        let untraceable: Vec<&str> = state
            .interfaces
            .iter()
            .filter(|i| {
                state
                    .bundle
                    .proposals
                    .get(&i.pi)
                    .is_none_or(|p| p.traces.is_empty() || p.proposed_by.is_empty())
            })
            .map(|i| i.id.as_str())
            .collect();
        let recorded: Vec<_> = state.audit.iter().map(|e| &e.digest_before).collect();
        let unanchored = state
            .decisions
            .iter()
            .find(|d| !recorded.contains(&&d.bundle_digest));
        if !untraceable.is_empty() {
            Err(format!(
                "untraceable interfaces: {}",
                untraceable.join(", ")
            ))
        } else if let Some(d) = unanchored {
            Err(format!(
                "decision {} names a digest absent from the audit chain",
                d.id
            ))
        } else if let Err(e) = verify_chain(state) {
            Err(e.to_string())
        } else {
            Ok(format!(
                "{} interfaces traced, {} decisions anchored, audit chain replays",
                state.interfaces.len(),
                state.decisions.len()
            ))
        }
    }));

    out.push(entry(7, "rework is iterative and recorded", {
        let loops = state
            .audit
            .iter()
            .filter(|e| {
                matches!(
                    e.action,
                    Action::HarmonizationIteration | Action::InterfaceIteration
                )
            })
            .count() as u32;
        let counted = state.iterations.total();
        if counted == 0 && loops == 0 {
            Ok("no rework occurred".into())
        } else if loops == counted {
            Ok(format!("{counted} iterations, each with a loop event"))
        } else {
            Err(format!(
                "{counted} iterations counted but {loops} loop events recorded"
            ))
        }
    }));

    out
}
