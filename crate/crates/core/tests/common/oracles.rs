#![allow(dead_code)]

//! Independent oracles and property bodies shared by the focused test
//! files and the acceptance target.

use std::collections::{BTreeMap, BTreeSet};

use piforge_core::canonical::Digest;
use piforge_core::harmonize::{apply_decisions, propose_merges, PiPair, Verdict};
use piforge_core::model::{ItemBundle, PerformanceIndicator, Stakeholder, TraceRef};
use piforge_core::pid::{parse_pid_str, serialize_pid};
use piforge_core::synth::{
    allocate, check_feasibility, FeasibilityVerdict, DEFAULT_WARN_UTILIZATION,
};
use piforge_core::units::Quantity;
use piforge_core::units::{parse_unit, UnitVector};
use proptest::prop_assert;
use proptest::prop_assert_eq;
use proptest::test_runner::TestCaseError;

use super::*;

// ---- PID ----

pub fn pid_round_trip(b: &ItemBundle) -> Result<(), TestCaseError> {
    let text = serialize_pid(b).unwrap();
    let parsed = parse_pid_str("gen.pid", &text);
    prop_assert!(!parsed.has_errors(), "{}\n{:#?}", text, parsed.diagnostics);
    prop_assert_eq!(&parsed.bundle, b, "{}", text);
    Ok(())
}

// ---- units ----

pub type Dims = [i32; 8];

/// Token rows with exponents over m kg s A K mol cd bit and the factor to
/// base units. The flag marks prefixable symbols.
pub const UNIT_TABLE: &[(&str, Dims, f64, bool)] = &[
    ("m", [1, 0, 0, 0, 0, 0, 0, 0], 1.0, true),
    ("kg", [0, 1, 0, 0, 0, 0, 0, 0], 1.0, false),
    ("s", [0, 0, 1, 0, 0, 0, 0, 0], 1.0, true),
    ("A", [0, 0, 0, 1, 0, 0, 0, 0], 1.0, true),
    ("K", [0, 0, 0, 0, 1, 0, 0, 0], 1.0, true),
    ("mol", [0, 0, 0, 0, 0, 1, 0, 0], 1.0, true),
    ("cd", [0, 0, 0, 0, 0, 0, 1, 0], 1.0, true),
    ("Hz", [0, 0, -1, 0, 0, 0, 0, 0], 1.0, true),
    ("min", [0, 0, 1, 0, 0, 0, 0, 0], 60.0, false),
    ("h", [0, 0, 1, 0, 0, 0, 0, 0], 3600.0, false),
    ("ms", [0, 0, 1, 0, 0, 0, 0, 0], 1e-3, false),
    ("us", [0, 0, 1, 0, 0, 0, 0, 0], 1e-6, false),
    ("km", [1, 0, 0, 0, 0, 0, 0, 0], 1e3, false),
    ("bit", [0, 0, 0, 0, 0, 0, 0, 1], 1.0, true),
    ("B", [0, 0, 0, 0, 0, 0, 0, 1], 8.0, true),
];

pub const PREFIXES: &[(&str, f64)] = &[
    ("k", 1e3),
    ("M", 1e6),
    ("G", 1e9),
    ("m", 1e-3),
    ("u", 1e-6),
    ("n", 1e-9),
];

pub fn atoms() -> Vec<(String, Dims, f64)> {
    let mut out = Vec::new();
    for (sym, dims, factor, prefixable) in UNIT_TABLE {
        out.push((sym.to_string(), *dims, *factor));
        if *prefixable {
            for (p, f) in PREFIXES {
                out.push((format!("{p}{sym}"), *dims, factor * f));
            }
        }
    }
    out
}

fn dims_of(v: &UnitVector) -> Dims {
    v.dims().map(i32::from)
}

fn close(actual: f64, expected: f64) -> bool {
    (actual - expected).abs() <= 1e-12 * expected.abs().max(actual.abs())
}

pub fn check_unit(expr: &str, dims: Dims, factor: f64) {
    let v = parse_unit(expr).unwrap_or_else(|e| panic!("{expr}: {e}"));
    assert_eq!(dims_of(&v), dims, "{expr}");
    assert!(
        close(v.scale().to_f64(), factor),
        "{expr}: {} vs {factor}",
        v.scale().to_f64()
    );
}

pub fn check_atoms() -> usize {
    let atoms = atoms();
    for (sym, dims, factor) in &atoms {
        check_unit(sym, *dims, *factor);
    }
    check_unit("1", [0; 8], 1.0);
    atoms.len() + 1
}

/// Every ordered pair of atoms, multiplied and divided.
pub fn check_products() -> usize {
    let atoms = atoms();
    let mut n = 0;
    for (a, da, fa) in &atoms {
        for (b, db, fb) in &atoms {
            let sum: Dims = std::array::from_fn(|i| da[i] + db[i]);
            let diff: Dims = std::array::from_fn(|i| da[i] - db[i]);
            check_unit(&format!("{a}·{b}"), sum, fa * fb);
            check_unit(&format!("{a}*{b}"), sum, fa * fb);
            check_unit(&format!("{a}/{b}"), diff, fa / fb);
            let (pa, pb) = (parse_unit(a).unwrap(), parse_unit(b).unwrap());
            assert_eq!(
                parse_unit(&format!("{a}·{b}")).unwrap().scale(),
                pa.scale() * pb.scale()
            );
            assert_eq!(
                parse_unit(&format!("{a}/{b}")).unwrap().scale(),
                pa.scale() / pb.scale()
            );
            n += 3;
        }
    }
    n
}

/// Integer powers of every atom, and mixed power quotients.
pub fn check_exponents() -> usize {
    let atoms = atoms();
    let mut n = 0;
    for (a, da, fa) in &atoms {
        for k in [-3, -2, -1, 1, 2, 3] {
            let scaled: Dims = std::array::from_fn(|i| da[i] * k);
            check_unit(&format!("{a}^{k}"), scaled, fa.powi(k));
            assert_eq!(
                parse_unit(&format!("{a}^{k}")).unwrap().scale(),
                parse_unit(a).unwrap().scale().powi(k)
            );
            n += 1;
        }
        for (b, db, fb) in atoms.iter().step_by(7) {
            let mixed: Dims = std::array::from_fn(|i| 2 * da[i] - 3 * db[i]);
            check_unit(&format!("{a}^2/{b}^3"), mixed, fa.powi(2) / fb.powi(3));
            check_unit(&format!("{a}^2·{b}^-3"), mixed, fa.powi(2) / fb.powi(3));
            n += 2;
        }
    }
    n
}

/// Groups of mutually compatible, non-affine units.
pub const UNIT_GROUPS: &[&[&str]] = &[
    &["s", "ms", "us", "min", "h", "ns", "ks"],
    &["m", "km", "mm", "um", "Mm"],
    &["Hz", "kHz", "MHz", "s^-1", "min^-1"],
    &["bit", "B", "kbit", "MB", "Gbit"],
    &["bit/s", "Mbit/s", "kB/s", "GB/s", "bit·Hz"],
    &["m/s", "km/h", "mm/ms", "m·s^-1"],
    &["K", "mK", "kK"],
];

pub fn convert_round_trip(a: &str, b: &str, v: f64) -> Result<(), TestCaseError> {
    use piforge_core::units::{convert, Unit};
    let (ua, ub) = (Unit::parse(a).unwrap(), Unit::parse(b).unwrap());
    let there = convert(&Quantity::new(v, ua.clone()), &ub).unwrap();
    let back = convert(&there, &ua).unwrap();
    prop_assert!(
        (back.value - v).abs() <= 1e-12 * v.abs(),
        "{} {} -> {} {} -> {}",
        v,
        a,
        there.value,
        b,
        back.value
    );
    Ok(())
}

// ---- harmonizer ----

pub fn jaccard(a: &str, b: &str) -> f64 {
    let split = |s: &str| -> BTreeSet<String> {
        s.split(['.', '_'])
            .filter(|t| !t.is_empty())
            .map(String::from)
            .collect()
    };
    let (x, y) = (split(a), split(b));
    let inter = x.iter().filter(|t| y.contains(*t)).count();
    let union = x.len() + y.len() - inter;
    inter as f64 / union as f64
}

/// Double loop over the log; numbering happens before suppressed pairs are
/// removed.
pub fn proposals_oracle(
    log: &[PerformanceIndicator],
    labels: &BTreeMap<String, &str>,
    threshold: f64,
    suppressed: &BTreeSet<PiPair>,
) -> Vec<(String, PiPair, f64)> {
    let mut found = Vec::new();
    for i in 0..log.len() {
        for j in 0..log.len() {
            let (a, b) = (&log[i].id, &log[j].id);
            if a >= b || labels[a] != labels[b] {
                continue;
            }
            let s = jaccard(a, b);
            if s >= threshold {
                found.push(((a.clone(), b.clone()), s));
            }
        }
    }
    found.sort_by(|x, y| y.1.partial_cmp(&x.1).unwrap().then(x.0.cmp(&y.0)));
    found
        .into_iter()
        .enumerate()
        .map(|(i, (p, s))| (format!("P-{:03}", i + 1), p, s))
        .filter(|(_, p, _)| !suppressed.contains(p))
        .collect()
}

pub fn prop_proposals_match(
    log: &[PerformanceIndicator],
    labels: &BTreeMap<String, &str>,
    threshold: f64,
    mask: &[bool],
) -> Result<(), TestCaseError> {
    let full = proposals_oracle(log, labels, threshold, &BTreeSet::new());
    let suppressed: BTreeSet<PiPair> = full
        .iter()
        .zip(mask)
        .filter(|(_, m)| **m)
        .map(|((_, p, _), _)| p.clone())
        .collect();
    let got: Vec<(String, PiPair, f64)> = propose_merges(log, threshold, &suppressed)
        .unwrap()
        .into_iter()
        .map(|p| (p.id, p.candidates, p.score))
        .collect();
    prop_assert_eq!(got, proposals_oracle(log, labels, threshold, &suppressed));
    Ok(())
}

fn log_digest() -> Digest {
    Digest::of_bytes(b"log")
}

/// Accepts every proposal in one batch.
pub fn merge_all(log: &[PerformanceIndicator], threshold: f64) -> Vec<PerformanceIndicator> {
    let queue = propose_merges(log, threshold, &BTreeSet::new()).unwrap();
    let decisions: Vec<_> = queue
        .iter()
        .enumerate()
        .map(|(i, p)| decision(&format!("D-{i}"), &p.id, Verdict::Merge, &log_digest()))
        .collect();
    apply_decisions(log, &decisions, &log_digest(), threshold, &BTreeSet::new())
        .unwrap()
        .consolidated
}

pub fn prop_idempotent(log: &[PerformanceIndicator], threshold: f64) -> Result<(), TestCaseError> {
    let merged = merge_all(log, threshold);
    prop_assert!(propose_merges(&merged, threshold, &BTreeSet::new())
        .unwrap()
        .is_empty());
    prop_assert_eq!(merge_all(&merged, threshold), merged);
    Ok(())
}

pub fn prop_conservation(
    log: &[PerformanceIndicator],
    threshold: f64,
) -> Result<(), TestCaseError> {
    let merged = merge_all(log, threshold);
    let covered: BTreeSet<&String> = merged
        .iter()
        .flat_map(|p| std::iter::once(&p.id).chain(&p.merged_from))
        .collect();
    let original: BTreeSet<&String> = log.iter().map(|p| &p.id).collect();
    prop_assert_eq!(covered, original);
    let absorbed: usize = merged.iter().map(|p| p.merged_from.len() + 1).sum();
    prop_assert_eq!(absorbed, log.len());

    let people = |l: &[PerformanceIndicator]| -> BTreeSet<Stakeholder> {
        l.iter().flat_map(|p| p.proposed_by.clone()).collect()
    };
    let traces = |l: &[PerformanceIndicator]| -> BTreeSet<TraceRef> {
        l.iter().flat_map(|p| p.traces.clone()).collect()
    };
    prop_assert_eq!(people(&merged), people(log));
    prop_assert_eq!(traces(&merged), traces(log));

    let by_id: BTreeMap<&String, &PerformanceIndicator> = log.iter().map(|p| (&p.id, p)).collect();
    for m in &merged {
        for src in std::iter::once(&m.id).chain(&m.merged_from) {
            prop_assert!(by_id[src].proposed_by.is_subset(&m.proposed_by));
            prop_assert!(by_id[src].traces.is_subset(&m.traces));
        }
    }
    Ok(())
}

// ---- feasibility ----

const FEASIBILITY_ARCH: &str = r#"
scenario "s" { description: "test scenario" }
bus "a" {
  capacity: 100 Mbit/s
  base_latency: 0 s
}
bus "b" {
  capacity: 10 Mbit/s
  base_latency: 1 ms
}
service "svc" { buses: bus "a", bus "b" }
service "solo" { buses: bus "a" }
function "f" { service: service "svc" }
function "g" { service: service "solo" }
requirement "SR-1" {
  statement: "observe the thing"
  scenario: scenario "s"
}
pi "x.speed" {
  description: "a real-valued signal"
  unit: m/s
  range: [0, 50]
  uncertainty: standard_deviation 0.1
  perspective: top_down
  proposed_by: safety_engineer "Sofia"
  traces: requirement "SR-1"
  provider: function "g"
  rate: 10 Hz
  payload: 32 bit
  freshness: 200 ms
}
"#;

/// Two buses, one float32 PI at 10 Hz on the 100 Mbit/s one.
pub fn feasibility_bundle() -> ItemBundle {
    let parsed = parse_pid_str("arch.pid", FEASIBILITY_ARCH);
    assert!(!parsed.has_errors(), "{:#?}", parsed.diagnostics);
    parsed.bundle
}

/// Bus figures and verdict of the single PI under
/// `freshness`.
pub fn single_interface(freshness: &str) -> (f64, f64, f64, FeasibilityVerdict) {
    let mut b = feasibility_bundle();
    b.proposals.get_mut("x.speed").unwrap().freshness = Quantity::parse(freshness).unwrap();
    let log: Vec<PerformanceIndicator> = b.pis().cloned().collect();
    let ifs = allocate(&log, &b.architecture).unwrap();
    let report = check_feasibility(&ifs, &b.architecture, DEFAULT_WARN_UTILIZATION);
    let bus = report.buses.iter().find(|l| l.bus == "a").unwrap();
    let v = &report.verdicts[0];
    (bus.load_bps, bus.utilization, v.latency_s, v.verdict)
}

pub fn rel_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-15 * b.abs()
}

fn extra_pi(i: usize, rate: u32, bits: u32, on_svc: bool) -> PerformanceIndicator {
    let mut pi = feasibility_bundle().proposals["x.speed"].clone();
    pi.id = format!("p{i:03}");
    pi.rate = Quantity::parse(&format!("{rate} Hz")).unwrap();
    pi.payload = Quantity::parse(&format!("{bits} bit")).unwrap();
    pi.provider = if on_svc { "f" } else { "g" }.into();
    pi
}

/// Adds PIs one at a time: the re-allocated total never drops, and adding
/// to a fixed allocation never lowers any bus.
pub fn prop_load_monotone(adds: &[(u32, u32, bool)]) -> Result<(), TestCaseError> {
    let b = feasibility_bundle();
    let mut log: Vec<PerformanceIndicator> = Vec::new();
    let mut last_total = 0.0;
    let mut fixed = Vec::new();
    let mut last_per_bus = [0.0; 2];
    for (i, (rate, bits, on_svc)) in adds.iter().enumerate() {
        log.push(extra_pi(i, *rate, *bits, *on_svc));

        let ifs = allocate(&log, &b.architecture).unwrap();
        let report = check_feasibility(&ifs, &b.architecture, DEFAULT_WARN_UTILIZATION);
        let total: f64 = report.buses.iter().map(|l| l.load_bps).sum();
        prop_assert!(total >= last_total);
        last_total = total;

        let id = format!("p{i:03}");
        fixed.push(ifs.iter().find(|f| f.pi == id).unwrap().clone());
        let report = check_feasibility(&fixed, &b.architecture, DEFAULT_WARN_UTILIZATION);
        for (slot, l) in last_per_bus.iter_mut().zip(&report.buses) {
            prop_assert!(l.load_bps >= *slot);
            prop_assert!(
                l.utilization * l.capacity_bps == l.load_bps
                    || rel_eq(l.utilization * l.capacity_bps, l.load_bps)
            );
            *slot = l.load_bps;
        }
    }
    Ok(())
}
