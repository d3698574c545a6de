mod common;

use common::*;
use piforge_core::harmonize::{HarmonizeError, Verdict};
use piforge_core::model::{Action, Perspective, Role, RoleViolation};
use piforge_core::process::{
    init_process, proreq_checklist, replay, resolve_conflict, run_harmonization,
    run_interface_definition, submit_perspective, verify_chain, Phase, ProcessError, ProcessState,
    Resolution,
};
use piforge_core::project;
use piforge_core::synth::DEFAULT_WARN_UTILIZATION;
use piforge_core::units::Quantity;

fn slow_pipeline() -> ProcessState {
    let s = crosswalk_pipeline(Some("1 kbit/s"));
    assert_eq!(s.phase, Phase::ConflictResolution);
    s
}

fn adjust() -> Resolution {
    Resolution::AdjustPi {
        rate: Some(Quantity::parse("1 Hz").unwrap()),
        payload: None,
        freshness: Some(Quantity::parse("2 s").unwrap()),
    }
}

#[test]
fn reinit_is_identical() {
    let base = crosswalk().with_proposals(Vec::new());
    let a = init_process(&base, &coordinator(), 0.6, &clock()).unwrap();
    let b = init_process(&base, &coordinator(), 0.6, &clock()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.audit.len(), 1);
    assert_eq!(a.audit[0].seq, 0);
    assert_eq!(a.phase, Phase::ItemDefined);
}

#[test]
fn init_needs_scenarios_and_architecture() {
    let mut b = crosswalk().with_proposals(Vec::new());
    b.requirements.clear();
    b.scenarios.clear();
    let err = init_process(&b, &coordinator(), 0.6, &clock()).unwrap_err();
    assert!(
        matches!(err, ProcessError::IncompleteItemDefinition(_)),
        "{err}"
    );
}

#[test]
fn harmonizing_before_both_branches_is_the_wrong_phase() {
    let base = crosswalk().with_proposals(Vec::new());
    let s = init_process(&base, &coordinator(), 0.6, &clock()).unwrap();
    let err = run_harmonization(&s, &[], &coordinator(), &clock()).unwrap_err();
    assert!(matches!(
        err,
        ProcessError::WrongPhase {
            phase: Phase::ItemDefined,
            ..
        }
    ));
    let s =
        submit_perspective(&s, Perspective::TopDown, &[], &safety_engineer(), &clock()).unwrap();
    assert_eq!(s.phase, Phase::Analysis);
    assert!(run_harmonization(&s, &[], &coordinator(), &clock()).is_err());
}

#[test]
fn stale_decisions_are_rejected() {
    let full = crosswalk();
    let base = full.with_proposals(Vec::new());
    let c = clock();
    let s = init_process(&base, &coordinator(), 0.6, &c).unwrap();
    let td: Vec<_> = full
        .pis()
        .filter(|p| p.perspective == Perspective::TopDown)
        .cloned()
        .collect();
    let mut bu: Vec<_> = full
        .pis()
        .filter(|p| p.perspective == Perspective::BottomUp)
        .cloned()
        .collect();
    bu.extend(duplicate(&full));
    let s = submit_perspective(&s, Perspective::TopDown, &td, &safety_engineer(), &c).unwrap();
    let stale = decision("D-001", "P-001", Verdict::Merge, &s.current_digest);
    let s = submit_perspective(&s, Perspective::BottomUp, &bu, &function_expert(), &c).unwrap();
    let err = run_harmonization(&s, &[stale], &coordinator(), &c).unwrap_err();
    assert!(
        matches!(
            err,
            ProcessError::Harmonize(HarmonizeError::StaleDecision { .. })
        ),
        "{err}"
    );
}

#[test]
fn applied_decisions_are_skipped_on_rerun() {
    let s = crosswalk_pipeline(None);
    let d = s.decisions[0].clone();
    let mut back = s.clone();
    back.phase = Phase::Harmonization;
    let again =
        run_harmonization(&back, std::slice::from_ref(&d), &coordinator(), &clock()).unwrap();
    assert_eq!(again.decisions, s.decisions);
    assert_eq!(again.current_digest, s.current_digest);

    let mut changed = d;
    changed.rationale = "a different reason".into();
    assert!(run_harmonization(&back, &[changed], &coordinator(), &clock()).is_err());
}

#[test]
fn overloaded_bus_opens_one_conflict_per_interface() {
    let s = slow_pipeline();
    assert_eq!(s.conflicts.len(), 7);
    let report = s.feasibility.as_ref().unwrap();
    assert_eq!(report.buses[0].load_bps, 4848.0);
    assert_eq!(
        s.audit
            .iter()
            .filter(|e| e.action == Action::OpenConflict)
            .count(),
        7
    );
    let err =
        run_interface_definition(&s, &architect(), DEFAULT_WARN_UTILIZATION, &clock()).unwrap_err();
    assert!(matches!(err, ProcessError::OpenConflicts(ref open) if open.len() == 7));
}

#[test]
fn adjusting_every_pi_ends_in_interfaces_defined() {
    let mut s = slow_pipeline();
    let ids: Vec<String> = s.conflicts.keys().cloned().collect();
    for id in &ids {
        s = resolve_conflict(&s, id, &adjust(), &[coordinator(), architect()], &clock()).unwrap();
    }
    let s = run_interface_definition(&s, &architect(), DEFAULT_WARN_UTILIZATION, &clock()).unwrap();
    assert_eq!(s.phase, Phase::InterfacesDefined, "{:#?}", s.feasibility);
    assert_eq!(s.iterations.interface_definition, 1);
    assert!(proreq_checklist(&s).iter().all(|e| e.satisfied));
    verify_chain(&s).unwrap();
    assert_eq!(replay(&s.initial, &s.journal).unwrap(), s);
}

#[test]
fn dropping_the_only_observer_loops_back_to_analysis() {
    let s = slow_pipeline();
    let heartbeat = s
        .conflicts
        .values()
        .find(|c| c.loss.pi == "hw.heartbeat")
        .unwrap()
        .id
        .clone();
    let drop = Resolution::DropPi {
        rationale: "redundant compute monitored elsewhere".into(),
    };
    let mut s = resolve_conflict(
        &s,
        &heartbeat,
        &drop,
        &[coordinator(), architect()],
        &clock(),
    )
    .unwrap();
    let loss: Vec<_> = s
        .audit
        .iter()
        .filter(|e| e.action == Action::InformationLoss)
        .collect();
    assert_eq!(loss.len(), 1);
    assert_eq!(loss[0].subject, "failure_mode:FM-001");
    assert!(!s.bundle.proposals.contains_key("hw.heartbeat"));

    let open: Vec<String> = s.open_conflicts().map(|c| c.id.clone()).collect();
    for id in open {
        s = resolve_conflict(&s, &id, &adjust(), &[coordinator(), architect()], &clock()).unwrap();
    }
    let s = run_interface_definition(&s, &architect(), DEFAULT_WARN_UTILIZATION, &clock()).unwrap();
    assert_eq!(s.phase, Phase::Analysis);
    assert_eq!(s.iterations.analysis, 1);
    assert!(s.top_down_submitted);
    assert!(!s.bottom_up_submitted);
    assert!(s.artifacts.is_none());
}

#[test]
fn resolutions_need_both_cosigners() {
    let s = slow_pipeline();
    let err = resolve_conflict(&s, "C-001", &adjust(), &[function_expert()], &clock()).unwrap_err();
    assert!(matches!(
        err.role_violation(),
        Some(RoleViolation::MissingRole {
            required: Role::SelfPerceptionCoordinator,
            ..
        })
    ));
    let err = resolve_conflict(
        &s,
        "C-001",
        &adjust(),
        &[coordinator(), safety_engineer(), architect()],
        &clock(),
    )
    .unwrap_err();
    assert!(matches!(
        err.role_violation(),
        Some(RoleViolation::Forbidden {
            role: Role::SafetyEngineer,
            ..
        })
    ));
    assert!(resolve_conflict(
        &s,
        "C-001",
        &adjust(),
        &[coordinator(), architect(), function_expert()],
        &clock()
    )
    .is_ok());
}

#[test]
fn bad_resolutions_are_rejected() {
    let s = slow_pipeline();
    let signers = [coordinator(), architect()];
    let cases = [
        Resolution::ReallocateBus { bus: "can0".into() },
        Resolution::DropPi {
            rationale: "  ".into(),
        },
        Resolution::AdjustPi {
            rate: None,
            payload: None,
            freshness: None,
        },
        Resolution::AdjustPi {
            rate: Some(Quantity::parse("10 ms").unwrap()),
            payload: None,
            freshness: None,
        },
    ];
    for r in cases {
        let err = resolve_conflict(&s, "C-001", &r, &signers, &clock()).unwrap_err();
        assert!(
            matches!(err, ProcessError::InvalidResolution(_)),
            "{r:?}: {err}"
        );
    }
    let s = resolve_conflict(&s, "C-001", &adjust(), &signers, &clock()).unwrap();
    let err = resolve_conflict(&s, "C-001", &adjust(), &signers, &clock()).unwrap_err();
    assert!(matches!(err, ProcessError::UnknownConflict(_)));
}

#[test]
fn audit_lines_have_eight_fields_and_chain() {
    let s = crosswalk_pipeline(None);
    let log = s.audit_log();
    let mut prev_after: Option<String> = None;
    for (i, line) in log.lines().enumerate() {
        let f: Vec<&str> = line.split('\t').collect();
        assert_eq!(f.len(), 8, "{line}");
        assert_eq!(f[0], i.to_string());
        assert_eq!(f[1], CLOCK);
        if let Some(p) = &prev_after {
            assert_eq!(f[6], p);
        }
        prev_after = Some(f[7].to_string());
    }
    assert_eq!(prev_after.unwrap(), s.current_digest.as_str());
}

#[test]
fn tampered_journal_fails_verification() {
    let mut s = crosswalk_pipeline(None);
    s.audit[3].subject = "P-999".into();
    assert!(verify_chain(&s).is_err());
    let mut s = crosswalk_pipeline(None);
    s.audit[2].digest_after = s.initial_digest.clone();
    assert!(verify_chain(&s).is_err());
}

#[test]
fn project_directory_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let s = crosswalk_pipeline(None);
    project::save(dir.path(), &s).unwrap();
    assert_eq!(project::load(dir.path()).unwrap(), s);
    for f in [
        "state.json",
        "bundle.pid",
        "initial.pid",
        "decisions.pid",
        "audit.log",
        "journal.jsonl",
    ] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let icd = std::fs::read_to_string(dir.path().join("artifacts/icd.txt")).unwrap();
    assert_eq!(icd, s.artifacts.as_ref().unwrap().icd);
    let bundle = piforge_core::pid::parse_pid_str(
        "b",
        &std::fs::read_to_string(dir.path().join("bundle.pid")).unwrap(),
    );
    assert_eq!(bundle.bundle, s.bundle);
    assert!(matches!(
        project::load(&dir.path().join("missing")),
        Err(project::ProjectError::NotInitialized(_))
    ));
}
