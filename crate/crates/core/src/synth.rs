//! From a consolidated PI log to checked interfaces and their artifacts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical::{format_decimal, snapshot_hash, Digest};
use crate::model::{
    ArchitectureModel, ItemBundle, PerformanceIndicator, ReferenceError, ValueType,
};
use crate::trace::{EdgeKind, NodeId, NodeKind, TraceGraph};
use crate::units::{Quantity, Unit};

/// Fixed per-message header (a timestamp), counted in every payload.
pub const HEADER_BITS: u64 = 64;
pub const DEFAULT_WARN_UTILIZATION: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoding {
    Float64,
    Float32,
    Uint8Bool,
    Uint32,
    Int32,
}

impl Encoding {
    pub fn as_str(self) -> &'static str {
        match self {
            Encoding::Float64 => "float64",
            Encoding::Float32 => "float32",
            Encoding::Uint8Bool => "uint8_bool",
            Encoding::Uint32 => "uint32",
            Encoding::Int32 => "int32",
        }
    }

    pub fn width_bits(self) -> u64 {
        match self {
            Encoding::Float64 => 64,
            Encoding::Float32 | Encoding::Uint32 | Encoding::Int32 => 32,
            Encoding::Uint8Bool => 8,
        }
    }
}

impl fmt::Display for Encoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterfaceStatus {
    Proposed,
    Integrated,
    NonViable,
}

impl fmt::Display for InterfaceStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InterfaceStatus::Proposed => "proposed",
            InterfaceStatus::Integrated => "integrated",
            InterfaceStatus::NonViable => "non_viable",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiInterface {
    pub id: String,
    pub pi: String,
    pub provider_service: String,
    pub bus: String,
    pub encoding: Encoding,
    /// In Hz.
    pub rate: Quantity,
    pub payload_bits: u64,
    /// In s.
    pub freshness: Quantity,
    pub status: InterfaceStatus,
}

impl PiInterface {
    pub fn rate_hz(&self) -> f64 {
        self.rate.base_value()
    }

    pub fn freshness_s(&self) -> f64 {
        self.freshness.base_value()
    }

    /// Bits per second this interface puts on its bus.
    pub fn load_bps(&self) -> f64 {
        self.payload_bits as f64 * self.rate_hz()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SynthError {
    #[error("PI `{pi}`: provider function `{function}` is not hosted by any service")]
    UnhostedFunction { pi: String, function: String },
    #[error("service `{service}` is attached to no known bus")]
    NoBus { service: String },
    #[error("bus override for `{pi}` names `{bus}`, which service `{service}` is not attached to")]
    InvalidBusOverride {
        pi: String,
        service: String,
        bus: String,
    },
    #[error("graph was built from snapshot {graph} but the inputs hash to {inputs}")]
    DigestMismatch { graph: Digest, inputs: Digest },
    #[error(transparent)]
    UnresolvedReference(#[from] ReferenceError),
}

pub fn interface_id(pi: &str) -> String {
    format!("IF-{pi}")
}

/// The encoding table. Integer PIs get the narrowest integer type that
/// holds their range, with dimensionless [0, 1] read as a flag; real PIs
/// get float32 unless the declared payload or range magnitude needs more.
pub fn choose_encoding(pi: &PerformanceIndicator) -> Encoding {
    let (min, max) = (pi.range.min, pi.range.max);
    match pi.value_type {
        ValueType::Integer => {
            if pi.unit.vector().is_dimensionless() && min >= 0.0 && max <= 1.0 {
                Encoding::Uint8Bool
            } else if min >= 0.0 && max <= u32::MAX as f64 {
                Encoding::Uint32
            } else if min >= i32::MIN as f64 && max <= i32::MAX as f64 {
                Encoding::Int32
            } else {
                Encoding::Float64
            }
        }
        ValueType::Real => {
            let magnitude = min.abs().max(max.abs());
            if pi.payload.base_value() >= 64.0 || magnitude > f32::MAX as f64 {
                Encoding::Float64
            } else {
                Encoding::Float32
            }
        }
    }
}

fn hz() -> Unit {
    Unit::parse("Hz").expect("Hz is in the token table")
}

fn seconds() -> Unit {
    Unit::parse("s").expect("s is in the token table")
}

/// One interface per PI, in PI id order, each placed on the provider
/// service's bus with the lowest resulting utilization. `overrides` pins
/// chosen PIs to a specific bus.
pub fn allocate_with(
    consolidated: &[PerformanceIndicator],
    arch: &ArchitectureModel,
    overrides: &BTreeMap<String, String>,
) -> Result<Vec<PiInterface>, SynthError> {
    let mut sorted: Vec<&PerformanceIndicator> = consolidated.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let mut load: BTreeMap<&str, f64> = BTreeMap::new();
    let mut out = Vec::new();
    for pi in sorted {
        let service =
            arch.service_of(&pi.provider)
                .ok_or_else(|| SynthError::UnhostedFunction {
                    pi: pi.id.clone(),
                    function: pi.provider.clone(),
                })?;
        let encoding = choose_encoding(pi);
        let payload_bits = HEADER_BITS + encoding.width_bits();
        let rate_hz = pi.rate.base_value();
        let added = payload_bits as f64 * rate_hz;

        let bus = match overrides.get(&pi.id) {
            Some(bus) if service.buses.contains(bus) && arch.buses.contains_key(bus) => bus.clone(),
            Some(bus) => {
                return Err(SynthError::InvalidBusOverride {
                    pi: pi.id.clone(),
                    service: service.id.clone(),
                    bus: bus.clone(),
                })
            }
            None => {
                let mut best: Option<(f64, &str)> = None;
                for bus_id in &service.buses {
                    let Some(bus) = arch.buses.get(bus_id) else {
                        continue;
                    };
                    let util = (load.get(bus_id.as_str()).copied().unwrap_or(0.0) + added)
                        / bus.capacity_bps();
                    // Buses iterate in id order, so strict < keeps the lexicographic tie-break.
                    if best.is_none_or(|(u, _)| util < u) {
                        best = Some((util, bus_id));
                    }
                }
                best.ok_or_else(|| SynthError::NoBus {
                    service: service.id.clone(),
                })?
                .1
                .to_string()
            }
        };
        *load
            .entry(
                arch.buses
                    .get_key_value(&bus)
                    .expect("bus checked above")
                    .0
                    .as_str(),
            )
            .or_default() += added;
        out.push(PiInterface {
            id: interface_id(&pi.id),
            pi: pi.id.clone(),
            provider_service: service.id.clone(),
            bus,
            encoding,
            rate: Quantity::new(rate_hz, hz()),
            payload_bits,
            freshness: Quantity::new(pi.freshness.base_value(), seconds()),
            status: InterfaceStatus::Proposed,
        });
    }
    Ok(out)
}

pub fn allocate(
    consolidated: &[PerformanceIndicator],
    arch: &ArchitectureModel,
) -> Result<Vec<PiInterface>, SynthError> {
    allocate_with(consolidated, arch, &BTreeMap::new())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeasibilityVerdict {
    Ok,
    Warn,
    Fail,
}

impl fmt::Display for FeasibilityVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeasibilityVerdict::Ok => "ok",
            FeasibilityVerdict::Warn => "warn",
            FeasibilityVerdict::Fail => "fail",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusLoad {
    pub bus: String,
    pub load_bps: f64,
    pub capacity_bps: f64,
    pub utilization: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterfaceVerdict {
    pub interface: String,
    pub pi: String,
    pub verdict: FeasibilityVerdict,
    pub period_s: f64,
    pub latency_s: f64,
    pub reasons: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NonViable {
    pub pi: String,
    pub interface: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub buses: Vec<BusLoad>,
    pub verdicts: Vec<InterfaceVerdict>,
    pub non_viable: Vec<NonViable>,
    /// The checked interfaces with status integrated or non_viable.
    pub interfaces: Vec<PiInterface>,
}

impl FeasibilityReport {
    pub fn has_failures(&self) -> bool {
        !self.non_viable.is_empty()
    }
}

/// Bandwidth and timing checks plus placement. An overloaded bus fails
/// every interface it carries.
pub fn check_feasibility(
    interfaces: &[PiInterface],
    arch: &ArchitectureModel,
    warn_utilization: f64,
) -> FeasibilityReport {
    let mut load: BTreeMap<&str, f64> = arch.buses.keys().map(|b| (b.as_str(), 0.0)).collect();
    for i in interfaces {
        *load.entry(i.bus.as_str()).or_default() += i.load_bps();
    }
    let buses: Vec<BusLoad> = load
        .iter()
        .map(|(bus, load)| {
            let capacity = arch
                .buses
                .get(*bus)
                .map(|b| b.capacity_bps())
                .unwrap_or(0.0);
            BusLoad {
                bus: bus.to_string(),
                load_bps: *load,
                capacity_bps: capacity,
                utilization: if capacity > 0.0 {
                    load / capacity
                } else {
                    f64::INFINITY
                },
            }
        })
        .collect();
    let by_bus: BTreeMap<&str, &BusLoad> = buses.iter().map(|b| (b.bus.as_str(), b)).collect();

    let mut sorted: Vec<&PiInterface> = interfaces.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let mut verdicts = Vec::new();
    let mut non_viable = Vec::new();
    let mut checked = Vec::new();
    for i in sorted {
        let bus = arch.buses.get(&i.bus);
        let stats = by_bus[i.bus.as_str()];
        let mut reasons = Vec::new();
        let mut fail = false;
        let (period, latency) = match bus {
            Some(bus) => (
                1.0 / i.rate_hz(),
                i.payload_bits as f64 / bus.capacity_bps() + bus.base_latency_s(),
            ),
            None => (1.0 / i.rate_hz(), f64::INFINITY),
        };
        if bus.is_none() {
            fail = true;
            reasons.push(format!("bus `{}` does not exist", i.bus));
        }
        if stats.load_bps > stats.capacity_bps {
            fail = true;
            reasons.push(format!(
                "bandwidth: bus {} load {} bit/s exceeds capacity {} bit/s",
                i.bus,
                format_decimal(stats.load_bps),
                format_decimal(stats.capacity_bps)
            ));
        }
        if period + latency > i.freshness_s() {
            fail = true;
            reasons.push(format!(
                "timing: period {} s + latency {} s exceeds freshness {} s",
                format_decimal(period),
                format_decimal(latency),
                format_decimal(i.freshness_s())
            ));
        }
        let placement = arch
            .services
            .get(&i.provider_service)
            .and_then(|s| s.placement.as_deref());
        if let Some(required) = bus.and_then(|b| b.placement.as_deref()) {
            if placement != Some(required) {
                fail = true;
                reasons.push(format!(
                    "spatial: bus {} is restricted to placement `{required}` but service {} is placed at `{}`",
                    i.bus,
                    i.provider_service,
                    placement.unwrap_or("unspecified")
                ));
            }
        }
        let verdict = if fail {
            FeasibilityVerdict::Fail
        } else if stats.utilization > warn_utilization {
            reasons.push(format!(
                "bus {} utilization {} exceeds warning level {}",
                i.bus,
                format_decimal(stats.utilization),
                format_decimal(warn_utilization)
            ));
            FeasibilityVerdict::Warn
        } else {
            FeasibilityVerdict::Ok
        };
        if fail {
            non_viable.push(NonViable {
                pi: i.pi.clone(),
                interface: i.id.clone(),
                reason: reasons.join("; "),
            });
        }
        let mut updated = i.clone();
        updated.status = if fail {
            InterfaceStatus::NonViable
        } else {
            InterfaceStatus::Integrated
        };
        checked.push(updated);
        verdicts.push(InterfaceVerdict {
            interface: i.id.clone(),
            pi: i.pi.clone(),
            verdict,
            period_s: period,
            latency_s: latency,
            reasons,
        });
    }
    FeasibilityReport {
        buses,
        verdicts,
        non_viable,
        interfaces: checked,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityVectorField {
    pub pi: String,
    pub encoding: Encoding,
    pub unit: String,
    pub range: (f64, f64),
    pub traces: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityVector {
    pub service: String,
    pub fields: Vec<QualityVectorField>,
    pub total_payload_bits: u64,
    /// In Hz.
    pub rate: f64,
}

/// One vector per service with integrated interfaces; other statuses are
/// skipped.
pub fn assemble_quality_vectors(
    interfaces: &[PiInterface],
    consolidated: &[PerformanceIndicator],
) -> Vec<QualityVector> {
    let pis: BTreeMap<&str, &PerformanceIndicator> =
        consolidated.iter().map(|p| (p.id.as_str(), p)).collect();
    let mut grouped: BTreeMap<&str, Vec<&PiInterface>> = BTreeMap::new();
    for i in interfaces
        .iter()
        .filter(|i| i.status == InterfaceStatus::Integrated)
    {
        grouped
            .entry(i.provider_service.as_str())
            .or_default()
            .push(i);
    }
    grouped
        .into_iter()
        .map(|(service, mut members)| {
            members.sort_by(|a, b| a.pi.cmp(&b.pi));
            let fields: Vec<QualityVectorField> = members
                .iter()
                .map(|i| {
                    let pi = pis.get(i.pi.as_str());
                    QualityVectorField {
                        pi: i.pi.clone(),
                        encoding: i.encoding,
                        unit: pi.map(|p| p.unit.to_string()).unwrap_or_default(),
                        range: pi.map(|p| (p.range.min, p.range.max)).unwrap_or((0.0, 0.0)),
                        traces: pi
                            .map(|p| p.traces.iter().map(|t| t.id().to_string()).collect())
                            .unwrap_or_default(),
                    }
                })
                .collect();
            QualityVector {
                service: service.to_string(),
                total_payload_bits: HEADER_BITS
                    + fields.iter().map(|f| f.encoding.width_bits()).sum::<u64>(),
                rate: members.iter().map(|i| i.rate_hz()).fold(0.0, f64::max),
                fields,
            }
        })
        .collect()
}

/// Message-schema text, one block per service.
pub fn emit_idl(vectors: &[QualityVector]) -> String {
    let mut out = String::new();
    for (n, qv) in vectors.iter().enumerate() {
        if n > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "message {}QualityVector {{", qv.service);
        for f in &qv.fields {
            let _ = writeln!(
                out,
                "  {}: {} // unit={} range=[{},{}] trace={}",
                f.pi.replace('.', "_"),
                f.encoding,
                f.unit,
                format_decimal(f.range.0),
                format_decimal(f.range.1),
                f.traces.join(",")
            );
        }
        out.push_str("}\n");
    }
    out
}

/// Interface control document. `graph` must have been built from the same
/// bundle and PI log; trace references are read from it.
pub fn emit_icd(
    bundle: &ItemBundle,
    consolidated: &[PerformanceIndicator],
    interfaces: &[PiInterface],
    graph: &TraceGraph,
) -> Result<String, SynthError> {
    let digest = snapshot_hash(&bundle.with_proposals(consolidated.iter().cloned()))?;
    if digest != graph.source_digest {
        return Err(SynthError::DigestMismatch {
            graph: graph.source_digest.clone(),
            inputs: digest,
        });
    }
    let pis: BTreeMap<&str, &PerformanceIndicator> =
        consolidated.iter().map(|p| (p.id.as_str(), p)).collect();
    let mut sorted: Vec<&PiInterface> = interfaces.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));

    let mut out = String::new();
    let _ = writeln!(out, "PI INTERFACE CONTROL DOCUMENT");
    let _ = writeln!(
        out,
        "item: {}",
        bundle
            .item
            .as_ref()
            .map(|i| i.name.as_str())
            .unwrap_or("(undefined)")
    );
    let _ = writeln!(out, "snapshot: {digest}");
    let _ = writeln!(out, "interfaces: {}", sorted.len());
    for i in sorted {
        let pi = pis.get(i.pi.as_str());
        let node = NodeId::new(NodeKind::Pi, i.pi.clone());
        let traces: BTreeSet<String> = graph
            .out_edges(&node)
            .filter(|e| e.kind == EdgeKind::Observes)
            .map(|e| format!("{} {}", e.to.kind, e.to.id))
            .collect();
        let stakeholders: Vec<String> = graph
            .out_edges(&node)
            .filter(|e| e.kind == EdgeKind::ProposedByRole)
            .filter_map(|e| e.note.clone())
            .collect();
        let text = |f: &dyn Fn(&PerformanceIndicator) -> String| {
            pi.map(|p| f(p)).unwrap_or_else(|| "-".into())
        };
        let _ = writeln!(out);
        let _ = writeln!(out, "== {} ==", i.id);
        let _ = writeln!(out, "pi: {}", i.pi);
        let _ = writeln!(out, "description: {}", text(&|p| p.description.clone()));
        let _ = writeln!(
            out,
            "provider: {} (function {})",
            i.provider_service,
            text(&|p| p.provider.clone())
        );
        let _ = writeln!(out, "bus: {}", i.bus);
        let _ = writeln!(out, "encoding: {}", i.encoding);
        let _ = writeln!(out, "unit: {}", text(&|p| p.unit.to_string()));
        let _ = writeln!(
            out,
            "range: {}",
            text(&|p| format!(
                "[{}, {}]",
                format_decimal(p.range.min),
                format_decimal(p.range.max)
            ))
        );
        let _ = writeln!(out, "rate_hz: {}", format_decimal(i.rate_hz()));
        let _ = writeln!(out, "freshness_s: {}", format_decimal(i.freshness_s()));
        let _ = writeln!(out, "payload_bits: {}", i.payload_bits);
        let _ = writeln!(out, "uncertainty: {}", text(&|p| p.uncertainty.to_string()));
        let _ = writeln!(
            out,
            "proxy_for: {}",
            text(&|p| p.proxy_for.clone().unwrap_or_else(|| "-".into()))
        );
        let _ = writeln!(out, "perspective: {}", text(&|p| p.perspective.to_string()));
        let _ = writeln!(
            out,
            "merged_from: {}",
            text(&|p| {
                if p.merged_from.is_empty() {
                    "-".into()
                } else {
                    p.merged_from.iter().cloned().collect::<Vec<_>>().join(", ")
                }
            })
        );
        let _ = writeln!(
            out,
            "traces: {}",
            if traces.is_empty() {
                "-".to_string()
            } else {
                traces.into_iter().collect::<Vec<_>>().join(", ")
            }
        );
        let _ = writeln!(
            out,
            "stakeholders: {}",
            if stakeholders.is_empty() {
                "-".to_string()
            } else {
                stakeholders.join(", ")
            }
        );
        let _ = writeln!(out, "status: {}", i.status);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InformationLoss {
    pub pi: String,
    pub interface: String,
    pub reason: String,
    /// Requirement and failure-mode node keys the PI observes.
    pub affected: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub warning: Option<String>,
}

/// What each non-viable PI would stop observing.
pub fn nonviable_report(report: &FeasibilityReport, graph: &TraceGraph) -> Vec<InformationLoss> {
    report
        .non_viable
        .iter()
        .map(|nv| {
            let node = NodeId::new(NodeKind::Pi, nv.pi.clone());
            let affected: Vec<String> = graph
                .out_edges(&node)
                .filter(|e| e.kind == EdgeKind::Observes)
                .map(|e| e.to.to_string())
                .collect();
            let warning = affected.is_empty().then(|| {
                format!(
                    "PI {} traces to nothing; its loss cannot be assessed",
                    nv.pi
                )
            });
            InformationLoss {
                pi: nv.pi.clone(),
                interface: nv.interface.clone(),
                reason: nv.reason.clone(),
                affected,
                warning,
            }
        })
        .collect()
}
