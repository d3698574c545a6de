use super::{
    init_process, resolve_conflict, run_harmonization, run_interface_definition,
    submit_perspective, FixedClock, JournalEntry, Operation, ProcessError, ProcessState,
};
use crate::model::ItemBundle;

/// Re-executes a journal from the initial bundle, reusing the recorded
/// timestamps.
pub fn replay(
    initial: &ItemBundle,
    journal: &[JournalEntry],
) -> Result<ProcessState, ProcessError> {
    let mut entries = journal.iter();
    let first = entries
        .next()
        .ok_or_else(|| ProcessError::Replay("empty journal".into()))?;
    let Operation::Init { actor, threshold } = &first.operation else {
        return Err(ProcessError::Replay(
            "journal does not start with init".into(),
        ));
    };
    let mut state = init_process(
        initial,
        actor,
        *threshold,
        &FixedClock(first.timestamp.clone()),
    )?;
    for entry in entries {
        let clock = FixedClock(entry.timestamp.clone());
        state = match &entry.operation {
            Operation::Init { .. } => {
                return Err(ProcessError::Replay("second init in journal".into()))
            }
            Operation::Submit {
                perspective,
                actor,
                proposals,
            } => submit_perspective(&state, *perspective, proposals, actor, &clock)?,
            Operation::Harmonize { actor, decisions } => {
                run_harmonization(&state, decisions, actor, &clock)?
            }
            Operation::DefineInterfaces {
                actor,
                warn_utilization,
            } => run_interface_definition(&state, actor, *warn_utilization, &clock)?,
            Operation::ResolveConflict {
                conflict,
                resolution,
                actors,
            } => resolve_conflict(&state, conflict, resolution, actors, &clock)?,
        };
    }
    Ok(state)
}

/// Checks that the audit log is a gapless digest chain from the initial
/// digest to the current one, and that replaying the journal reproduces
/// the same log and digest.
pub fn verify_chain(state: &ProcessState) -> Result<(), ProcessError> {
    let fail = |m: String| Err(ProcessError::Replay(m));
    let mut expected = state.initial_digest.clone();
    for (i, e) in state.audit.iter().enumerate() {
        if e.seq != i as u64 {
            return fail(format!("event {i} has sequence number {}", e.seq));
        }
        if e.digest_before != expected {
            return fail(format!(
                "event {i} starts from {} instead of {expected}",
                e.digest_before
            ));
        }
        expected = e.digest_after.clone();
    }
    if expected != state.current_digest {
        return fail(format!(
            "chain ends at {expected}, state is at {}",
            state.current_digest
        ));
    }
    let replayed = replay(&state.initial, &state.journal)?;
    if replayed.current_digest != state.current_digest {
        return fail(format!(
            "replay ends at {}, state is at {}",
            replayed.current_digest, state.current_digest
        ));
    }
    if replayed.audit != state.audit {
        return fail("replayed audit log differs".into());
    }
    Ok(())
}
