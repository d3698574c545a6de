#![allow(dead_code)]

//! Exhaustive search over small process models. Every order of submissions
//! and decisions is tried, with every conflict resolution, up to a depth bound.

use std::collections::BTreeSet;

use piforge_core::harmonize::{propose_merges, Verdict};
use piforge_core::model::{ItemBundle, PerformanceIndicator, Perspective, TraceRef};
use piforge_core::pid::parse_pid_str;
use piforge_core::process::{
    init_process, resolve_conflict, run_harmonization, run_interface_definition,
    submit_perspective, verify_chain, Phase, ProcessState, Resolution,
};
use piforge_core::synth::{InterfaceStatus, DEFAULT_WARN_UTILIZATION};
use piforge_core::units::Quantity;

use super::*;

const BASE: &str = r#"
item "small model" {}
scenario "s" { description: "small model scenario" }
bus "fast" {
  capacity: 100 Mbit/s
  base_latency: 0 s
}
bus "slow" {
  capacity: 10 kbit/s
  base_latency: 1 ms
}
service "svc_a" { buses: bus "slow" }
service "svc_b" { buses: bus "fast", bus "slow" }
function "f_a" { service: service "svc_a" }
function "f_b" { service: service "svc_b" }
requirement "SR-1" {
  statement: "first monitored requirement"
  scenario: scenario "s"
  needs_runtime_monitoring: true
}
requirement "SR-2" {
  statement: "second monitored requirement"
  scenario: scenario "s"
  needs_runtime_monitoring: true
}
failure_mode "FM-1" {
  function: function "f_b"
  mechanism: "first mechanism"
  effect: degradation
  method: fmea
}
failure_mode "FM-2" {
  function: function "f_b"
  mechanism: "second mechanism"
  effect: failure
  method: hazop
}
"#;

/// PI templates for the small models.
type Template = (
    &'static str,
    Perspective,
    Option<&'static str>,
    &'static str,
    &'static str,
    &'static str,
);

const POOL: &[Template] = &[
    (
        "cam.blur",
        Perspective::TopDown,
        Some("SR-1"),
        "f_b",
        "10 Hz",
        "200 ms",
    ),
    (
        "cam_blur",
        Perspective::BottomUp,
        Some("FM-1"),
        "f_b",
        "10 Hz",
        "200 ms",
    ),
    (
        "cpu.temp",
        Perspective::BottomUp,
        Some("FM-2"),
        "f_b",
        "10 Hz",
        "50 ms",
    ),
    (
        "link.load",
        Perspective::TopDown,
        Some("SR-2"),
        "f_a",
        "200 Hz",
        "1 s",
    ),
    (
        "orphan.sig",
        Perspective::BottomUp,
        None,
        "f_a",
        "1 Hz",
        "2 s",
    ),
];

fn template(i: usize) -> PerformanceIndicator {
    let (id, perspective, trace, provider, rate, freshness) = POOL[i];
    let mut pi = gen::log_pi(
        id.into(),
        "1",
        0.0,
        1.0,
        match perspective {
            Perspective::TopDown => safety_engineer(),
            Perspective::BottomUp => function_expert(),
        },
        TraceRef::Requirement("unused".into()),
    );
    pi.perspective = perspective;
    pi.traces = trace
        .map(|t| {
            if t.starts_with("SR") {
                TraceRef::Requirement(t.into())
            } else {
                TraceRef::FailureMode(t.into())
            }
        })
        .into_iter()
        .collect();
    pi.provider = provider.into();
    pi.rate = Quantity::parse(rate).unwrap();
    pi.freshness = Quantity::parse(freshness).unwrap();
    pi
}

pub struct Model {
    pub name: String,
    pub base: ItemBundle,
    pub top_down: Vec<PerformanceIndicator>,
    pub bottom_up: Vec<PerformanceIndicator>,
}

/// Every subset of the pool with one to three PIs. The bundle keeps only
/// the requirements and failure modes those PIs trace to.
pub fn models() -> Vec<Model> {
    let parsed = parse_pid_str("base.pid", BASE);
    assert!(!parsed.has_errors(), "{:#?}", parsed.diagnostics);
    let mut out = Vec::new();
    for mask in 1u32..(1 << POOL.len()) {
        if mask.count_ones() > 3 {
            continue;
        }
        let pis: Vec<PerformanceIndicator> = (0..POOL.len())
            .filter(|i| mask & (1 << i) != 0)
            .map(template)
            .collect();
        let traced: BTreeSet<&str> = pis
            .iter()
            .flat_map(|p| p.traces.iter().map(|t| t.id()))
            .collect();
        let mut base = parsed.bundle.clone();
        base.requirements
            .retain(|id, _| traced.contains(id.as_str()));
        base.failure_modes
            .retain(|id, _| traced.contains(id.as_str()));
        out.push(Model {
            name: pis
                .iter()
                .map(|p| p.id.as_str())
                .collect::<Vec<_>>()
                .join("+"),
            top_down: pis
                .iter()
                .filter(|p| p.perspective == Perspective::TopDown)
                .cloned()
                .collect(),
            bottom_up: pis
                .iter()
                .filter(|p| p.perspective == Perspective::BottomUp)
                .cloned()
                .collect(),
            base,
        });
    }
    out
}

fn successors(model: &Model, s: &ProcessState) -> Vec<ProcessState> {
    let clock = clock();
    let mut out = Vec::new();
    match s.phase {
        Phase::ItemDefined | Phase::Analysis => {
            if !s.top_down_submitted {
                out.extend(
                    submit_perspective(
                        s,
                        Perspective::TopDown,
                        &model.top_down,
                        &safety_engineer(),
                        &clock,
                    )
                    .ok(),
                );
            }
            if !s.bottom_up_submitted {
                out.extend(
                    submit_perspective(
                        s,
                        Perspective::BottomUp,
                        &model.bottom_up,
                        &function_expert(),
                        &clock,
                    )
                    .ok(),
                );
            }
        }
        Phase::PiLogDraft | Phase::Harmonization => {
            let log: Vec<_> = s.bundle.pis().cloned().collect();
            let queue = propose_merges(&log, s.threshold, &s.suppressions).unwrap();
            let id = format!("D-{:03}", s.decisions.len() + 1);
            for p in &queue {
                for v in [Verdict::Merge, Verdict::KeepSeparate] {
                    let d = decision(&id, &p.id, v, &s.current_digest);
                    out.extend(run_harmonization(s, &[d], &coordinator(), &clock).ok());
                }
            }
            if queue.is_empty() {
                out.extend(run_harmonization(s, &[], &coordinator(), &clock).ok());
            }
        }
        Phase::InterfaceDefinition => {
            out.extend(
                run_interface_definition(s, &architect(), DEFAULT_WARN_UTILIZATION, &clock).ok(),
            );
        }
        Phase::ConflictResolution => {
            let open: Vec<_> = s.open_conflicts().cloned().collect();
            if open.is_empty() {
                out.extend(
                    run_interface_definition(s, &architect(), DEFAULT_WARN_UTILIZATION, &clock)
                        .ok(),
                );
            }
            for c in open {
                let mut options = vec![
                    Resolution::AdjustPi {
                        rate: Some(Quantity::parse("1 Hz").unwrap()),
                        payload: None,
                        freshness: Some(Quantity::parse("10 s").unwrap()),
                    },
                    Resolution::DropPi {
                        rationale: "not needed at runtime".into(),
                    },
                ];
                for bus in ["fast", "slow"] {
                    options.push(Resolution::ReallocateBus { bus: bus.into() });
                }
                for r in options {
                    out.extend(
                        resolve_conflict(s, &c.id, &r, &[coordinator(), architect()], &clock).ok(),
                    );
                }
            }
        }
        Phase::InterfacesDefined => {}
    }
    out
}

/// Safety property checked on every reached state, computed from the
/// bundle rather than from the trace graph.
fn check_safety(model: &Model, s: &ProcessState) {
    if s.phase != Phase::InterfacesDefined {
        return;
    }
    assert_eq!(
        s.open_conflicts().count(),
        0,
        "{}: open conflict at the end",
        model.name
    );
    let pis: Vec<&PerformanceIndicator> = s.bundle.pis().collect();
    for p in &pis {
        assert!(
            !p.traces.is_empty(),
            "{}: orphan {} at the end",
            model.name,
            p.id
        );
    }
    for r in s
        .bundle
        .requirements
        .values()
        .filter(|r| r.needs_runtime_monitoring)
    {
        assert!(
            pis.iter()
                .any(|p| p.traces.contains(&TraceRef::Requirement(r.id.clone()))),
            "{}: {} unmonitored at the end",
            model.name,
            r.id
        );
    }
    for f in s.bundle.failure_modes.keys() {
        assert!(
            pis.iter()
                .any(|p| p.traces.contains(&TraceRef::FailureMode(f.clone()))),
            "{}: {f} unobserved at the end",
            model.name
        );
    }
    assert_eq!(s.interfaces.len(), pis.len());
    assert!(s
        .interfaces
        .iter()
        .all(|i| i.status == InterfaceStatus::Integrated));
}

#[derive(Debug, Default, Clone, Copy)]
pub struct Stats {
    pub models: usize,
    pub states: usize,
    pub paths: usize,
    pub terminal: usize,
    pub with_conflicts: usize,
    pub with_loops: usize,
}

/// Explores every path up to `depth` operations after init. Panics on the
/// first safety or replay violation.
pub fn explore(depth: usize) -> Stats {
    let mut stats = Stats::default();
    for model in models() {
        stats.models += 1;
        let root = init_process(&model.base, &coordinator(), 0.6, &clock()).unwrap();
        let mut stack = vec![(root, 0usize)];
        while let Some((s, d)) = stack.pop() {
            stats.states += 1;
            check_safety(&model, &s);
            if s.phase == Phase::InterfacesDefined {
                stats.terminal += 1;
                if !s.conflicts.is_empty() {
                    stats.with_conflicts += 1;
                }
                if s.iterations.total() > 0 {
                    stats.with_loops += 1;
                }
            }
            let next = if d < depth {
                successors(&model, &s)
            } else {
                Vec::new()
            };
            if next.is_empty() {
                // Path end: the chain replays to the final digest.
                stats.paths += 1;
                verify_chain(&s).unwrap_or_else(|e| panic!("{}: {e}", model.name));
            }
            stack.extend(next.into_iter().map(|n| (n, d + 1)));
        }
    }
    stats
}
