#![allow(dead_code)]

//! proptest strategies for canonical bundles and PI logs.

use std::collections::{BTreeMap, BTreeSet};

use piforge_core::canonical::normalize_whitespace;
use piforge_core::model::{
    AnalysisMethod, ArchitectureModel, Bus, Effect, FailureMode, Function, ItemBundle,
    ItemDefinition, PerformanceIndicator, Perspective, Role, SafetyRequirement, Scenario, Service,
    Stakeholder, TraceRef, Uncertainty, ValueRange, ValueType,
};
use piforge_core::units::{Quantity, Unit};
use proptest::collection::{btree_set, vec};
use proptest::prelude::*;
use proptest::sample::select;

pub fn text(min: usize, max: usize) -> impl Strategy<Value = String> {
    proptest::string::string_regex(&format!(
        "[A-Za-z0-9 #:,{{}}\\[\\]\"\\\\éµ°_.-]{{{min},{max}}}"
    ))
    .unwrap()
    .prop_map(|s| normalize_whitespace(&s))
    .prop_filter("non-empty after normalization", move |s| {
        s.chars().count() >= min.max(1)
    })
}

pub fn pi_id() -> impl Strategy<Value = String> {
    proptest::string::string_regex("[a-z][a-z0-9_]{0,6}(\\.[a-z0-9_]{1,6}){0,2}").unwrap()
}

/// Finite values spanning plain and e-notation renderings.
pub fn number() -> impl Strategy<Value = f64> {
    prop_oneof![
        (-1000i32..1000).prop_map(f64::from),
        -1.0e6f64..1.0e6,
        (1u32..9, -12i32..25).prop_map(|(m, e)| f64::from(m) * 10f64.powi(e)),
    ]
}

pub fn positive() -> impl Strategy<Value = f64> {
    prop_oneof![
        (1i32..1000).prop_map(f64::from),
        1.0e-3f64..1.0e6,
        (1u32..9, -9i32..22).prop_map(|(m, e)| f64::from(m) * 10f64.powi(e)),
    ]
}

pub fn quantity(units: &'static [&'static str]) -> impl Strategy<Value = Quantity> {
    (positive(), select(units)).prop_map(|(v, u)| Quantity::new(v, Unit::parse(u).unwrap()))
}

pub const PI_UNITS: &[&str] = &[
    "1", "m", "m/s", "km/h", "°C", "K", "Hz", "m·s^-2", "h", "bit", "kg*m^2", "mol/s",
];
pub const RATE_UNITS: &[&str] = &["Hz", "kHz", "s^-1", "min^-1"];
pub const PAYLOAD_UNITS: &[&str] = &["bit", "B", "kbit", "kB"];
pub const TIME_UNITS: &[&str] = &["s", "ms", "us", "min"];
pub const CAPACITY_UNITS: &[&str] = &["Mbit/s", "kbit/s", "bit/s", "GB/s"];

pub fn stakeholder() -> impl Strategy<Value = Stakeholder> {
    (select(Role::ALL), text(1, 12)).prop_map(|(r, n)| Stakeholder::new(r, n))
}

pub fn uncertainty() -> impl Strategy<Value = Uncertainty> {
    prop_oneof![
        Just(Uncertainty::NoneDeclared),
        positive().prop_map(|magnitude| Uncertainty::Interval { magnitude }),
        positive().prop_map(|magnitude| Uncertainty::StandardDeviation { magnitude }),
        text(1, 20).prop_map(|note| Uncertainty::Qualitative { note }),
    ]
}

fn pick<T: Clone>(items: &[T], i: usize) -> T {
    items[i % items.len()].clone()
}

#[derive(Debug, Clone)]
struct RawPi {
    id: String,
    description: String,
    unit: &'static str,
    range: (f64, f64),
    integer: bool,
    uncertainty: Uncertainty,
    perspective: bool,
    proposed_by: BTreeSet<Stakeholder>,
    traces: Vec<(bool, usize)>,
    provider: usize,
    proxy_for: Option<String>,
    rate: Quantity,
    payload: Quantity,
    freshness: Quantity,
    merged_from: BTreeSet<String>,
}

fn raw_pi() -> impl Strategy<Value = RawPi> {
    (
        (
            pi_id(),
            text(10, 30),
            select(PI_UNITS),
            (number(), number()),
            any::<bool>(),
            uncertainty(),
        ),
        (
            any::<bool>(),
            btree_set(stakeholder(), 1..3),
            vec((any::<bool>(), any::<usize>()), 0..3),
            any::<usize>(),
            proptest::option::of(text(1, 20)),
        ),
        (
            quantity(RATE_UNITS),
            quantity(PAYLOAD_UNITS),
            quantity(TIME_UNITS),
            btree_set(pi_id(), 0..3),
        ),
    )
        .prop_map(
            |(
                (id, description, unit, (a, b), integer, uncertainty),
                (perspective, proposed_by, traces, provider, proxy_for),
                (rate, payload, freshness, merged_from),
            )| RawPi {
                merged_from: merged_from.into_iter().filter(|m| *m != id).collect(),
                id,
                description,
                unit,
                range: (a.min(b), a.max(b)),
                integer,
                uncertainty,
                perspective,
                proposed_by,
                traces,
                provider,
                proxy_for,
                rate,
                payload,
                freshness,
            },
        )
}

/// Random bundles that are valid and already in canonical form.
/// parse(serialize(b)) compares equal to `b`.
pub fn bundle() -> impl Strategy<Value = ItemBundle> {
    let item = proptest::option::of((text(1, 20), vec(text(1, 20), 0..3)));
    let scenarios = btree_set(text(1, 12), 1..3).prop_flat_map(|ids| {
        let n = ids.len();
        (Just(ids), vec(text(1, 30), n))
    });
    let buses = btree_set(text(1, 8), 1..3).prop_flat_map(|ids| {
        let n = ids.len();
        (
            Just(ids),
            vec(
                (
                    quantity(CAPACITY_UNITS),
                    (0u32..100, select(TIME_UNITS)),
                    proptest::option::of(text(1, 8)),
                ),
                n,
            ),
        )
    });
    let services = btree_set(text(1, 10), 1..4).prop_flat_map(|ids| {
        let n = ids.len();
        (
            Just(ids),
            vec(
                (
                    proptest::option::of(text(1, 8)),
                    btree_set(any::<usize>(), 1..3),
                ),
                n,
            ),
        )
    });
    let functions = btree_set(text(1, 10), 1..5).prop_flat_map(|ids| {
        let n = ids.len();
        (
            Just(ids),
            vec((any::<usize>(), proptest::option::of(text(1, 20))), n),
        )
    });
    let requirements = btree_set(text(1, 8), 0..5).prop_flat_map(|ids| {
        let n = ids.len();
        (
            Just(ids),
            vec(
                (
                    text(1, 30),
                    any::<usize>(),
                    proptest::option::of(text(1, 12)),
                    0u32..3,
                    proptest::option::of(any::<usize>()),
                    any::<bool>(),
                ),
                n,
            ),
        )
    });
    let failure_modes = btree_set(text(1, 8), 0..4).prop_flat_map(|ids| {
        let n = ids.len();
        (
            Just(ids),
            vec(
                (
                    any::<usize>(),
                    text(1, 20),
                    select(Effect::ALL),
                    select(AnalysisMethod::ALL),
                ),
                n,
            ),
        )
    });
    let pis = vec(raw_pi(), 0..6);

    (
        item,
        scenarios,
        buses,
        services,
        functions,
        requirements,
        failure_modes,
        pis,
    )
        .prop_map(
            |(
                item,
                (sc_ids, sc_desc),
                (bus_ids, bus_raw),
                (svc_ids, svc_raw),
                (fn_ids, fn_raw),
                (req_ids, req_raw),
                (fm_ids, fm_raw),
                pis,
            )| {
                let mut b = ItemBundle {
                    item: item.map(|(name, use_cases)| ItemDefinition { name, use_cases }),
                    ..ItemBundle::default()
                };
                let sc_ids: Vec<String> = sc_ids.into_iter().collect();
                for (id, description) in sc_ids.iter().zip(sc_desc) {
                    b.scenarios.insert(
                        id.clone(),
                        Scenario {
                            id: id.clone(),
                            description,
                        },
                    );
                }
                let bus_ids: Vec<String> = bus_ids.into_iter().collect();
                let mut arch = ArchitectureModel::default();
                for (id, (capacity, (lat, lat_unit), placement)) in bus_ids.iter().zip(bus_raw) {
                    arch.buses.insert(
                        id.clone(),
                        Bus {
                            id: id.clone(),
                            capacity,
                            base_latency: Quantity::new(
                                f64::from(lat),
                                Unit::parse(lat_unit).unwrap(),
                            ),
                            placement,
                        },
                    );
                }
                let svc_ids: Vec<String> = svc_ids.into_iter().collect();
                for (id, (placement, attach)) in svc_ids.iter().zip(svc_raw) {
                    arch.services.insert(
                        id.clone(),
                        Service {
                            id: id.clone(),
                            placement,
                            buses: attach.iter().map(|i| pick(&bus_ids, *i)).collect(),
                        },
                    );
                }
                let fn_ids: Vec<String> = fn_ids.into_iter().collect();
                for (id, (svc, description)) in fn_ids.iter().zip(fn_raw) {
                    arch.functions.insert(
                        id.clone(),
                        Function {
                            id: id.clone(),
                            service: pick(&svc_ids, svc),
                            description,
                        },
                    );
                }
                b.architecture = arch;

                // Parents always point to an earlier requirement, so chains are acyclic.
                let req_ids: Vec<String> = req_ids.into_iter().collect();
                let mut granularity: BTreeMap<String, u32> = BTreeMap::new();
                for (i, (id, (statement, sc, hazard, root_gran, parent, monitored))) in
                    req_ids.iter().zip(req_raw).enumerate()
                {
                    let parent = parent.filter(|_| i > 0).map(|p| req_ids[p % i].clone());
                    let g = parent
                        .as_ref()
                        .map(|p| granularity[p] + 1)
                        .unwrap_or(root_gran);
                    granularity.insert(id.clone(), g);
                    b.requirements.insert(
                        id.clone(),
                        SafetyRequirement {
                            id: id.clone(),
                            statement,
                            scenario: pick(&sc_ids, sc),
                            hazard,
                            granularity: g,
                            parent,
                            needs_runtime_monitoring: monitored,
                        },
                    );
                }
                let fm_ids: Vec<String> = fm_ids.into_iter().collect();
                for (id, (f, mechanism, effect, method)) in fm_ids.iter().zip(fm_raw) {
                    b.failure_modes.insert(
                        id.clone(),
                        FailureMode {
                            id: id.clone(),
                            function: pick(&fn_ids, f),
                            mechanism,
                            effect,
                            method,
                        },
                    );
                }
                for raw in pis {
                    let traces = raw
                        .traces
                        .iter()
                        .filter_map(|(req, i)| {
                            if *req && !req_ids.is_empty() {
                                Some(TraceRef::Requirement(pick(&req_ids, *i)))
                            } else if !fm_ids.is_empty() {
                                Some(TraceRef::FailureMode(pick(&fm_ids, *i)))
                            } else {
                                None
                            }
                        })
                        .collect();
                    let pi = PerformanceIndicator {
                        id: raw.id.clone(),
                        description: raw.description,
                        unit: Unit::parse(raw.unit).unwrap(),
                        range: ValueRange::new(raw.range.0, raw.range.1),
                        value_type: if raw.integer {
                            ValueType::Integer
                        } else {
                            ValueType::Real
                        },
                        uncertainty: raw.uncertainty,
                        perspective: if raw.perspective {
                            Perspective::TopDown
                        } else {
                            Perspective::BottomUp
                        },
                        proposed_by: raw.proposed_by,
                        traces,
                        provider: pick(&fn_ids, raw.provider),
                        proxy_for: raw.proxy_for,
                        rate: raw.rate,
                        payload: raw.payload,
                        freshness: raw.freshness,
                        merged_from: raw.merged_from,
                    };
                    b.proposals.insert(pi.id.clone(), pi);
                }
                b
            },
        )
}

/// Token pool for harmonizer logs; small enough that similar ids are common.
pub const ID_TOKENS: &[&str] = &["cam", "cpu", "temp", "speed", "ego", "hw", "rate", "flag"];

/// Units tagged with an oracle-side dimension label. No °C: every pair of
/// compatible ranges below intersects.
pub const HARMONIZER_UNITS: &[(&str, &str)] = &[
    ("1", "none"),
    ("m/s", "velocity"),
    ("km/h", "velocity"),
    ("K", "temperature"),
    ("mK", "temperature"),
    ("Hz", "frequency"),
    ("kHz", "frequency"),
    ("s^-1", "frequency"),
];

pub fn harmonizer_id() -> impl Strategy<Value = String> {
    (vec(select(ID_TOKENS), 1..4), vec(any::<bool>(), 3)).prop_map(|(tokens, seps)| {
        let mut id = tokens[0].to_string();
        for (t, dot) in tokens[1..].iter().zip(seps) {
            id.push(if dot { '.' } else { '_' });
            id.push_str(t);
        }
        id
    })
}

/// A valid PI whose range always contains 0 and some positive value.
pub fn log_pi(
    id: String,
    unit: &str,
    lo: f64,
    hi: f64,
    who: Stakeholder,
    trace: TraceRef,
) -> PerformanceIndicator {
    PerformanceIndicator {
        id,
        description: "generated performance indicator".into(),
        unit: Unit::parse(unit).unwrap(),
        range: ValueRange::new(-lo, hi),
        value_type: ValueType::Real,
        uncertainty: Uncertainty::StandardDeviation { magnitude: 0.1 },
        perspective: Perspective::BottomUp,
        proposed_by: BTreeSet::from([who]),
        traces: BTreeSet::from([trace]),
        provider: "f".into(),
        proxy_for: None,
        rate: Quantity::parse("10 Hz").unwrap(),
        payload: Quantity::parse("32 bit").unwrap(),
        freshness: Quantity::parse("1 s").unwrap(),
        merged_from: BTreeSet::new(),
    }
}

/// Up to `max` PIs with unique ids. Returns the log and the oracle label
/// of each PI's unit.
pub fn pi_log(
    max: usize,
) -> impl Strategy<Value = (Vec<PerformanceIndicator>, BTreeMap<String, &'static str>)> {
    vec(
        (
            harmonizer_id(),
            select(HARMONIZER_UNITS),
            1.0f64..100.0,
            1.0f64..100.0,
            stakeholder(),
            (any::<bool>(), 0usize..3),
        ),
        0..=max,
    )
    .prop_map(|raw| {
        let mut seen = BTreeSet::new();
        let mut log = Vec::new();
        let mut labels = BTreeMap::new();
        for (id, (unit, label), lo, hi, who, (req, n)) in raw {
            if !seen.insert(id.clone()) {
                continue;
            }
            let trace = if req {
                TraceRef::Requirement(format!("SR-{n}"))
            } else {
                TraceRef::FailureMode(format!("FM-{n}"))
            };
            labels.insert(id.clone(), label);
            log.push(log_pi(id, unit, lo, hi, who, trace));
        }
        (log, labels)
    })
}
