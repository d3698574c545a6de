#![allow(dead_code)]

pub mod explore;
pub mod gen;
pub mod oracles;
pub mod roles;

use std::path::PathBuf;

use piforge_core::canonical::Digest;
use piforge_core::harmonize::{propose_merges, HarmonizationDecision, Verdict};
use piforge_core::model::{ItemBundle, PerformanceIndicator, Perspective, Role, Stakeholder};
use piforge_core::pid::{parse_pid, parse_proposals, Source};
use piforge_core::process::{
    init_process, run_harmonization, run_interface_definition, submit_perspective, FixedClock,
    ProcessState,
};
use piforge_core::synth::DEFAULT_WARN_UTILIZATION;

pub const CLOCK: &str = "2026-01-05T09:00:00Z";

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

pub fn source(name: &str) -> Source {
    let path = fixture_path(name);
    let text = std::fs::read_to_string(&path).unwrap();
    Source::new(format!("fixtures/{name}"), text)
}

pub fn crosswalk() -> ItemBundle {
    let parsed = parse_pid(&[source("crosswalk.pid")]);
    assert!(!parsed.has_errors(), "{:#?}", parsed.diagnostics);
    parsed.bundle
}

pub fn duplicate(base: &ItemBundle) -> Vec<PerformanceIndicator> {
    let (pis, diags) = parse_proposals(&[source("crosswalk_duplicate.pid")], base);
    assert!(diags.iter().all(|d| !d.is_error()), "{diags:#?}");
    pis
}

pub fn coordinator() -> Stakeholder {
    Stakeholder::new(Role::SelfPerceptionCoordinator, "Mara")
}

pub fn architect() -> Stakeholder {
    Stakeholder::new(Role::ArchitecturalSystemEngineer, "Jonas")
}

pub fn safety_engineer() -> Stakeholder {
    Stakeholder::new(Role::SafetyEngineer, "Sofia")
}

pub fn function_expert() -> Stakeholder {
    Stakeholder::new(Role::FunctionExpert, "Felix")
}

pub fn clock() -> FixedClock {
    FixedClock(CLOCK.to_string())
}

pub fn decision(
    id: &str,
    proposal: &str,
    verdict: Verdict,
    digest: &Digest,
) -> HarmonizationDecision {
    HarmonizationDecision {
        id: id.to_string(),
        proposal: proposal.to_string(),
        verdict,
        decided_by: coordinator(),
        rationale: "same physical signal".to_string(),
        bundle_digest: digest.clone(),
    }
}

/// The crosswalk flow from init on the bare item up to one
/// interface-definition run. `capacity` replaces the eth0 capacity.
pub fn crosswalk_pipeline(capacity: Option<&str>) -> ProcessState {
    let mut full = crosswalk();
    if let Some(c) = capacity {
        full.architecture.buses.get_mut("eth0").unwrap().capacity =
            piforge_core::units::Quantity::parse(c).unwrap();
    }
    let by = |p: Perspective| -> Vec<PerformanceIndicator> {
        full.pis()
            .filter(|pi| pi.perspective == p)
            .cloned()
            .collect()
    };
    let top_down = by(Perspective::TopDown);
    let mut bottom_up = by(Perspective::BottomUp);
    bottom_up.extend(duplicate(&full));
    let base = full.with_proposals(Vec::new());

    let clock = clock();
    let s = init_process(&base, &coordinator(), 0.6, &clock).unwrap();
    let s = submit_perspective(
        &s,
        Perspective::TopDown,
        &top_down,
        &safety_engineer(),
        &clock,
    )
    .unwrap();
    let s = submit_perspective(
        &s,
        Perspective::BottomUp,
        &bottom_up,
        &function_expert(),
        &clock,
    )
    .unwrap();
    let log: Vec<_> = s.bundle.pis().cloned().collect();
    let queue = propose_merges(&log, s.threshold, &s.suppressions).unwrap();
    assert_eq!(queue.len(), 1, "{queue:#?}");
    let d = decision("D-001", &queue[0].id, Verdict::Merge, &s.current_digest);
    let s = run_harmonization(&s, &[d], &coordinator(), &clock).unwrap();
    run_interface_definition(&s, &architect(), DEFAULT_WARN_UTILIZATION, &clock).unwrap()
}
