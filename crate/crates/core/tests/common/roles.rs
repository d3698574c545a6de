#![allow(dead_code)]

//! Enumerated role gates: every (role, action) pair against an oracle copy
//! of the legality table, both at `check_role` and at the operations that
//! perform the action directly.

use piforge_core::harmonize::{propose_merges, Verdict};
use piforge_core::model::{check_role, Action, Perspective, Role, RoleViolation, Stakeholder};
use piforge_core::process::{
    init_process, resolve_conflict, run_harmonization, run_interface_definition,
    submit_perspective, ProcessError, ProcessState, Resolution,
};
use piforge_core::synth::DEFAULT_WARN_UTILIZATION;
use piforge_core::units::Quantity;

use super::*;

const LEGAL: &[(&str, &[&str])] = &[
    (
        "self_perception_coordinator",
        &[
            "init_process",
            "decide_merge",
            "decide_keep_separate",
            "merge_field_change",
            "merge_rejected",
            "harmonization_iteration",
            "harmonization_complete",
            "information_loss",
            "resolve_conflict",
        ],
    ),
    ("safety_engineer", &["submit_top_down"]),
    ("function_expert", &["submit_bottom_up", "resolve_conflict"]),
    (
        "architectural_system_engineer",
        &[
            "define_interfaces",
            "open_conflict",
            "interface_iteration",
            "emit_artifacts",
            "resolve_conflict",
        ],
    ),
];

pub fn legal(role: Role, action: Action) -> bool {
    LEGAL
        .iter()
        .any(|(r, actions)| *r == role.as_str() && actions.contains(&action.as_str()))
}

struct Fixtures {
    base: piforge_core::model::ItemBundle,
    initialized: ProcessState,
    draft: ProcessState,
    harmonized: ProcessState,
    conflicted: ProcessState,
}

fn fixtures() -> Fixtures {
    let full = crosswalk();
    let base = full.with_proposals(Vec::new());
    let c = clock();
    let pick = |p| {
        full.pis()
            .filter(|pi| pi.perspective == p)
            .cloned()
            .collect::<Vec<_>>()
    };
    let mut bottom_up = pick(Perspective::BottomUp);
    bottom_up.extend(duplicate(&full));
    let initialized = init_process(&base, &coordinator(), 0.6, &c).unwrap();
    let s = submit_perspective(
        &initialized,
        Perspective::TopDown,
        &pick(Perspective::TopDown),
        &safety_engineer(),
        &c,
    )
    .unwrap();
    let draft = submit_perspective(
        &s,
        Perspective::BottomUp,
        &bottom_up,
        &function_expert(),
        &c,
    )
    .unwrap();
    let log: Vec<_> = draft.bundle.pis().cloned().collect();
    let p = propose_merges(&log, 0.6, &draft.suppressions)
        .unwrap()
        .remove(0);
    let harmonized = run_harmonization(
        &draft,
        &[decision(
            "D-001",
            &p.id,
            Verdict::Merge,
            &draft.current_digest,
        )],
        &coordinator(),
        &c,
    )
    .unwrap();
    let mut slow = harmonized.clone();
    slow.bundle
        .architecture
        .buses
        .get_mut("eth0")
        .unwrap()
        .capacity = Quantity::parse("1 kbit/s").unwrap();
    let conflicted =
        run_interface_definition(&slow, &architect(), DEFAULT_WARN_UTILIZATION, &c).unwrap();
    Fixtures {
        base,
        initialized,
        draft,
        harmonized,
        conflicted,
    }
}

fn rejected(
    result: Result<ProcessState, ProcessError>,
    role: Role,
    action: Action,
) -> Option<bool> {
    match result {
        Ok(_) => Some(false),
        Err(e) => match e.role_violation() {
            Some(RoleViolation::Forbidden { role: r, action: a }) if *r == role && *a == action => {
                Some(true)
            }
            Some(_) => panic!("{role} {action}: wrong violation {e}"),
            None => panic!("{role} {action}: unexpected error {e}"),
        },
    }
}

/// Attempts the operation that performs `action` directly, as `role`.
/// `None` for actions only ever emitted by the engine itself.
fn attempt(f: &Fixtures, role: Role, action: Action) -> Option<bool> {
    let who = Stakeholder::new(role, "Probe");
    let c = clock();
    let result = match action {
        Action::InitProcess => init_process(&f.base, &who, 0.6, &c),
        Action::SubmitTopDown => {
            submit_perspective(&f.initialized, Perspective::TopDown, &[], &who, &c)
        }
        Action::SubmitBottomUp => {
            submit_perspective(&f.initialized, Perspective::BottomUp, &[], &who, &c)
        }
        Action::HarmonizationIteration => run_harmonization(&f.draft, &[], &who, &c),
        Action::DecideMerge | Action::DecideKeepSeparate => {
            let verdict = if action == Action::DecideMerge {
                Verdict::Merge
            } else {
                Verdict::KeepSeparate
            };
            let mut d = decision("D-001", "P-001", verdict, &f.draft.current_digest);
            d.decided_by = who;
            run_harmonization(&f.draft, &[d], &coordinator(), &c)
        }
        Action::DefineInterfaces => {
            run_interface_definition(&f.harmonized, &who, DEFAULT_WARN_UTILIZATION, &c)
        }
        Action::ResolveConflict => {
            let r = Resolution::DropPi {
                rationale: "probe".into(),
            };
            resolve_conflict(
                &f.conflicted,
                "C-001",
                &r,
                &[coordinator(), architect(), who],
                &c,
            )
        }
        _ => return None,
    };
    rejected(result, role, action)
}

/// Returns (pairs checked, illegal pairs, pairs exercised through an
/// operation). Panics on the first mismatch.
pub fn check_role_gates() -> (usize, usize, usize) {
    let f = fixtures();
    let (mut pairs, mut illegal, mut exercised) = (0, 0, 0);
    for &role in Role::ALL {
        for &action in Action::ALL {
            pairs += 1;
            let allowed = legal(role, action);
            match check_role(role, action) {
                Ok(()) => assert!(allowed, "check_role lets {role} perform {action}"),
                Err(RoleViolation::Forbidden { role: r, action: a }) => {
                    assert!(!allowed, "check_role blocks {role} from {action}");
                    assert_eq!((r, a), (role, action));
                }
                Err(e) => panic!("{e}"),
            }
            if !allowed {
                illegal += 1;
            }
            if let Some(was_rejected) = attempt(&f, role, action) {
                exercised += 1;
                assert_eq!(was_rejected, !allowed, "{role} {action}");
            }
        }
    }
    (pairs, illegal, exercised)
}
