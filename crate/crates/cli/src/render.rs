//! Human-readable text for each command. Everything is built into one
//! string and printed once.

use std::fmt::Write;

use piforge_core::diagnostic::{Diagnostic, Severity};
use piforge_core::harmonize::MergeProposal;
use piforge_core::process::{AuditEvent, Conflict, ProcessState};
use piforge_core::synth::{FeasibilityReport, FeasibilityVerdict};
use piforge_workbench::views::{CoverageView, ProreqView, TraceView};

use crate::style::Styles;

pub fn diagnostics(out: &mut String, st: Styles, diags: &[Diagnostic]) {
    for d in diags {
        let text = d.to_string();
        let line = match d.severity {
            Severity::Error => text.replacen("error", &st.error("error"), 1),
            Severity::Warning => text.replacen("warning", &st.warning("warning"), 1),
            _ => text,
        };
        writeln!(out, "{line}").unwrap();
    }
}

pub fn events(out: &mut String, events: &[AuditEvent]) {
    for e in events {
        writeln!(out, "  #{} {} {} {}", e.seq, e.actor, e.action, e.subject).unwrap();
    }
}

pub fn proposals(out: &mut String, queue: &[MergeProposal]) {
    writeln!(out, "{} open proposals", queue.len()).unwrap();
    for p in queue {
        let reasons: Vec<&str> = p.reasons.iter().map(|r| r.as_str()).collect();
        writeln!(
            out,
            "  {}  {:.3}  {} + {}  [{}]  keep as {}",
            p.id,
            p.score,
            p.candidates.0,
            p.candidates.1,
            reasons.join(", "),
            p.suggested_canonical
        )
        .unwrap();
    }
}

pub fn feasibility(out: &mut String, st: Styles, report: &FeasibilityReport) {
    for b in &report.buses {
        writeln!(
            out,
            "bus {}: {} of {} bit/s (utilization {:.3e})",
            b.bus, b.load_bps, b.capacity_bps, b.utilization
        )
        .unwrap();
    }
    for v in &report.verdicts {
        let verdict = match v.verdict {
            FeasibilityVerdict::Ok => st.ok("ok"),
            FeasibilityVerdict::Warn => st.warning("warn"),
            FeasibilityVerdict::Fail => st.error("fail"),
        };
        write!(
            out,
            "  {} {verdict} latency {:.3e} s",
            v.interface, v.latency_s
        )
        .unwrap();
        if !v.reasons.is_empty() {
            write!(out, ": {}", v.reasons.join("; ")).unwrap();
        }
        out.push('\n');
    }
}

pub fn conflicts<'a>(
    out: &mut String,
    st: Styles,
    conflicts: impl IntoIterator<Item = &'a Conflict>,
) {
    for c in conflicts {
        let state = match &c.resolution {
            None => st.error("open"),
            Some(r) => format!("resolved by {}", r.kind_str()),
        };
        writeln!(out, "{} {} ({}): {}", c.id, c.loss.pi, state, c.loss.reason).unwrap();
        if !c.loss.affected.is_empty() {
            writeln!(out, "  would stop observing {}", c.loss.affected.join(", ")).unwrap();
        }
    }
}

pub fn coverage(out: &mut String, st: Styles, view: &CoverageView) {
    let c = &view.coverage;
    let lists = [
        ("orphan PIs", &c.orphan_pis),
        ("unmonitored requirements", &c.unmonitored_requirements),
        ("unobserved failure modes", &c.unobserved_failure_modes),
    ];
    for (label, items) in lists {
        if items.is_empty() {
            writeln!(out, "{label}: none").unwrap();
        } else {
            writeln!(out, "{}: {}", st.warning(label), items.join(", ")).unwrap();
        }
    }
}

pub fn trace(out: &mut String, view: &TraceView) {
    writeln!(out, "{}", view.node).unwrap();
    if let Some(o) = &view.origin {
        writeln!(out, "  perspective: {}", o.perspective).unwrap();
        writeln!(out, "  proposed by: {}", o.proposed_by).unwrap();
        if let Some(p) = &o.proxy_for {
            writeln!(out, "  proxy for: {p}").unwrap();
        }
        for path in &o.paths {
            writeln!(out, "  {}", path.join(" -> ")).unwrap();
        }
    }
    if !view.impact.is_empty() {
        writeln!(out, "  impact: {}", view.impact.join(", ")).unwrap();
    }
}

pub fn proreq(out: &mut String, st: Styles, view: &ProreqView) {
    for e in &view.checklist {
        let mark = if e.satisfied {
            st.ok("[x]")
        } else {
            st.error("[ ]")
        };
        writeln!(out, "{mark} {} {}: {}", e.id, e.title, e.evidence).unwrap();
    }
    writeln!(out, "{}/{} satisfied", view.satisfied, view.checklist.len()).unwrap();
}

pub fn status(out: &mut String, st: Styles, s: &ProcessState) {
    writeln!(out, "{} {}", st.heading("phase"), s.phase).unwrap();
    writeln!(out, "digest {}", s.current_digest).unwrap();
    let i = s.iterations;
    writeln!(
        out,
        "iterations: analysis {}, harmonization {}, interface definition {}",
        i.analysis, i.harmonization, i.interface_definition
    )
    .unwrap();
}
