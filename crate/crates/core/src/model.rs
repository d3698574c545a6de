//! Domain types of the PI process.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::units::Quantity;
use crate::units::Unit;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown {what} `{value}`")]
pub struct UnknownName {
    pub what: &'static str,
    pub value: String,
}

macro_rules! keyword_enum {
    ($(#[$meta:meta])* $name:ident, $what:literal { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl FromStr for $name {
            type Err = UnknownName;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text => Ok($name::$variant),)+
                    _ => Err(UnknownName { what: $what, value: s.to_string() }),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

keyword_enum!(
    /// The four process roles.
    Role, "role" {
        SelfPerceptionCoordinator => "self_perception_coordinator",
        SafetyEngineer => "safety_engineer",
        ArchitecturalSystemEngineer => "architectural_system_engineer",
        FunctionExpert => "function_expert",
    }
);

keyword_enum!(
    /// Top-down proposals derive from safety requirements, bottom-up ones
    /// from known failures and degradations.
    Perspective, "perspective" {
        TopDown => "top_down",
        BottomUp => "bottom_up",
    }
);

keyword_enum!(
    Effect, "effect" {
        Degradation => "degradation",
        Failure => "failure",
    }
);

keyword_enum!(
    AnalysisMethod, "analysis method" {
        Fmea => "fmea",
        Hazop => "hazop",
        Stpa => "stpa",
        ExpertJudgment => "expert_judgment",
    }
);

keyword_enum!(
    /// Whether a PI's values are integers or reals.
    ValueType, "value type" {
        Real => "real",
        Integer => "integer",
    }
);

keyword_enum!(
    /// Block kinds of the PID language, in canonical serialization order.
    EntityKind, "block kind" {
        Item => "item",
        Scenario => "scenario",
        Service => "service",
        Bus => "bus",
        Function => "function",
        Requirement => "requirement",
        FailureMode => "failure_mode",
        Pi => "pi",
    }
);

keyword_enum!(
    /// Every kind of audited activity.
    Action, "action" {
        InitProcess => "init_process",
        SubmitTopDown => "submit_top_down",
        SubmitBottomUp => "submit_bottom_up",
        DecideMerge => "decide_merge",
        DecideKeepSeparate => "decide_keep_separate",
        MergeFieldChange => "merge_field_change",
        MergeRejected => "merge_rejected",
        HarmonizationIteration => "harmonization_iteration",
        HarmonizationComplete => "harmonization_complete",
        DefineInterfaces => "define_interfaces",
        OpenConflict => "open_conflict",
        InterfaceIteration => "interface_iteration",
        EmitArtifacts => "emit_artifacts",
        ResolveConflict => "resolve_conflict",
        InformationLoss => "information_loss",
    }
);

impl Action {
    /// The legality table: which roles may perform each action.
    pub fn allowed_roles(self) -> &'static [Role] {
        use Role::*;
        match self {
            Action::InitProcess
            | Action::DecideMerge
            | Action::DecideKeepSeparate
            | Action::MergeFieldChange
            | Action::MergeRejected
            | Action::HarmonizationIteration
            | Action::HarmonizationComplete
            | Action::InformationLoss => &[SelfPerceptionCoordinator],
            Action::SubmitTopDown => &[SafetyEngineer],
            Action::SubmitBottomUp => &[FunctionExpert],
            Action::DefineInterfaces
            | Action::OpenConflict
            | Action::InterfaceIteration
            | Action::EmitArtifacts => &[ArchitecturalSystemEngineer],
            Action::ResolveConflict => &[
                SelfPerceptionCoordinator,
                ArchitecturalSystemEngineer,
                FunctionExpert,
            ],
        }
    }

    pub fn permits(self, role: Role) -> bool {
        self.allowed_roles().contains(&role)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RoleViolation {
    #[error("role violation: {role} may not perform {action}")]
    Forbidden { role: Role, action: Action },
    #[error("role violation: {action} must be co-signed by a {required}")]
    MissingRole { required: Role, action: Action },
}

/// Checks `role` against the legality table.
pub fn check_role(role: Role, action: Action) -> Result<(), RoleViolation> {
    if action.permits(role) {
        Ok(())
    } else {
        Err(RoleViolation::Forbidden { role, action })
    }
}

impl Perspective {
    /// The role allowed to submit proposals for this perspective.
    pub fn submitting_role(self) -> Role {
        match self {
            Perspective::TopDown => Role::SafetyEngineer,
            Perspective::BottomUp => Role::FunctionExpert,
        }
    }
}

#[allow(clippy::derivable_impls)]
impl Default for ValueType {
    fn default() -> Self {
        ValueType::Real
    }
}

/// A role plus the free-text name of the person or group acting in it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Stakeholder {
    pub role: Role,
    pub name: String,
}

impl Stakeholder {
    pub fn new(role: Role, name: impl Into<String>) -> Self {
        Stakeholder {
            role,
            name: name.into(),
        }
    }
}

impl fmt::Display for Stakeholder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.role, quote(&self.name))
    }
}

/// `role:name`, as used on the command line.
impl FromStr for Stakeholder {
    type Err = UnknownName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (role, name) = s.split_once(':').ok_or_else(|| UnknownName {
            what: "actor (expected role:name)",
            value: s.to_string(),
        })?;
        let name = crate::canonical::normalize_whitespace(name);
        if name.is_empty() {
            return Err(UnknownName {
                what: "actor (empty name)",
                value: s.to_string(),
            });
        }
        Ok(Stakeholder::new(role.trim().parse()?, name))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Uncertainty {
    NoneDeclared,
    /// Half-width of a symmetric interval, in the PI's unit.
    Interval {
        magnitude: f64,
    },
    StandardDeviation {
        magnitude: f64,
    },
    Qualitative {
        note: String,
    },
}

impl Uncertainty {
    pub fn kind_str(&self) -> &'static str {
        match self {
            Uncertainty::NoneDeclared => "none_declared",
            Uncertainty::Interval { .. } => "interval",
            Uncertainty::StandardDeviation { .. } => "standard_deviation",
            Uncertainty::Qualitative { .. } => "qualitative",
        }
    }

    pub fn magnitude(&self) -> Option<f64> {
        match self {
            Uncertainty::Interval { magnitude } | Uncertainty::StandardDeviation { magnitude } => {
                Some(*magnitude)
            }
            _ => None,
        }
    }

    pub fn is_declared(&self) -> bool {
        !matches!(self, Uncertainty::NoneDeclared)
    }
}

impl fmt::Display for Uncertainty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use crate::canonical::format_decimal;
        match self {
            Uncertainty::NoneDeclared => f.write_str("none_declared"),
            Uncertainty::Interval { magnitude } => {
                write!(f, "interval {}", format_decimal(*magnitude))
            }
            Uncertainty::StandardDeviation { magnitude } => {
                write!(f, "standard_deviation {}", format_decimal(*magnitude))
            }
            Uncertainty::Qualitative { note } => write!(f, "qualitative {}", quote(note)),
        }
    }
}

/// A PI's link back to what motivated it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "snake_case")]
pub enum TraceRef {
    Requirement(String),
    FailureMode(String),
}

impl TraceRef {
    pub fn id(&self) -> &str {
        match self {
            TraceRef::Requirement(id) | TraceRef::FailureMode(id) => id,
        }
    }

    pub fn kind(&self) -> EntityKind {
        match self {
            TraceRef::Requirement(_) => EntityKind::Requirement,
            TraceRef::FailureMode(_) => EntityKind::FailureMode,
        }
    }
}

impl fmt::Display for TraceRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.kind(), quote(self.id()))
    }
}

/// Closed interval in the owning PI's unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueRange {
    pub min: f64,
    pub max: f64,
}

impl ValueRange {
    pub fn new(min: f64, max: f64) -> Self {
        ValueRange { min, max }
    }

    pub fn intersect(&self, other: &ValueRange) -> Option<ValueRange> {
        let min = self.min.max(other.min);
        let max = self.max.min(other.max);
        (min <= max).then_some(ValueRange { min, max })
    }
}

/// One PI log entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceIndicator {
    pub id: String,
    pub description: String,
    pub unit: Unit,
    pub range: ValueRange,
    #[serde(default)]
    pub value_type: ValueType,
    pub uncertainty: Uncertainty,
    pub perspective: Perspective,
    pub proposed_by: BTreeSet<Stakeholder>,
    pub traces: BTreeSet<TraceRef>,
    /// Function id.
    pub provider: String,
    pub proxy_for: Option<String>,
    pub rate: Quantity,
    pub payload: Quantity,
    pub freshness: Quantity,
    pub merged_from: BTreeSet<String>,
}

impl PerformanceIndicator {
    pub fn requirement_traces(&self) -> impl Iterator<Item = &str> {
        self.traces.iter().filter_map(|t| match t {
            TraceRef::Requirement(id) => Some(id.as_str()),
            TraceRef::FailureMode(_) => None,
        })
    }

    pub fn failure_mode_traces(&self) -> impl Iterator<Item = &str> {
        self.traces.iter().filter_map(|t| match t {
            TraceRef::FailureMode(id) => Some(id.as_str()),
            TraceRef::Requirement(_) => None,
        })
    }
}

/// `lowercase_alnum(.lowercase_alnum)*`, underscores allowed in segments.
pub fn is_valid_pi_id(id: &str) -> bool {
    !id.is_empty()
        && id.split('.').all(|seg| {
            !seg.is_empty()
                && seg
                    .chars()
                    .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
        })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemDefinition {
    pub name: String,
    pub use_cases: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Service {
    pub id: String,
    /// Spatial tag; matched exactly against bus placement restrictions.
    pub placement: Option<String>,
    pub buses: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: String,
    pub capacity: Quantity,
    pub base_latency: Quantity,
    /// When set, only services with this placement tag may use the bus.
    pub placement: Option<String>,
}

impl Bus {
    pub fn capacity_bps(&self) -> f64 {
        self.capacity.base_value()
    }

    pub fn base_latency_s(&self) -> f64 {
        self.base_latency.base_value()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Function {
    pub id: String,
    /// Hosting service id.
    pub service: String,
    pub description: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ArchitectureModel {
    #[serde(with = "id_map")]
    pub services: BTreeMap<String, Service>,
    #[serde(with = "id_map")]
    pub buses: BTreeMap<String, Bus>,
    #[serde(with = "id_map")]
    pub functions: BTreeMap<String, Function>,
}

impl ArchitectureModel {
    pub fn is_empty(&self) -> bool {
        self.services.is_empty() || self.buses.is_empty()
    }

    pub fn service_of(&self, function: &str) -> Option<&Service> {
        self.functions
            .get(function)
            .and_then(|f| self.services.get(&f.service))
    }

    pub fn functions_of<'a>(&'a self, service: &'a str) -> impl Iterator<Item = &'a Function> + 'a {
        self.functions
            .values()
            .filter(move |f| f.service == service)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SafetyRequirement {
    pub id: String,
    pub statement: String,
    pub scenario: String,
    pub hazard: Option<String>,
    /// Decomposition depth; a child sits one level below its parent.
    pub granularity: u32,
    pub parent: Option<String>,
    pub needs_runtime_monitoring: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureMode {
    pub id: String,
    pub function: String,
    pub mechanism: String,
    pub effect: Effect,
    pub method: AnalysisMethod,
}

/// Everything known about a project, from the item definition down to the
/// PI log.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ItemBundle {
    pub item: Option<ItemDefinition>,
    #[serde(with = "id_map")]
    pub scenarios: BTreeMap<String, Scenario>,
    pub architecture: ArchitectureModel,
    #[serde(with = "id_map")]
    pub requirements: BTreeMap<String, SafetyRequirement>,
    #[serde(with = "id_map")]
    pub failure_modes: BTreeMap<String, FailureMode>,
    #[serde(with = "id_map")]
    pub proposals: BTreeMap<String, PerformanceIndicator>,
}

impl ItemBundle {
    pub fn pis(&self) -> impl Iterator<Item = &PerformanceIndicator> {
        self.proposals.values()
    }

    pub fn with_proposals(
        &self,
        proposals: impl IntoIterator<Item = PerformanceIndicator>,
    ) -> ItemBundle {
        ItemBundle {
            proposals: proposals.into_iter().map(|p| (p.id.clone(), p)).collect(),
            ..self.clone()
        }
    }

    pub fn contains(&self, kind: EntityKind, id: &str) -> bool {
        match kind {
            EntityKind::Item => self.item.as_ref().is_some_and(|i| i.name == id),
            EntityKind::Scenario => self.scenarios.contains_key(id),
            EntityKind::Service => self.architecture.services.contains_key(id),
            EntityKind::Bus => self.architecture.buses.contains_key(id),
            EntityKind::Function => self.architecture.functions.contains_key(id),
            EntityKind::Requirement => self.requirements.contains_key(id),
            EntityKind::FailureMode => self.failure_modes.contains_key(id),
            EntityKind::Pi => self.proposals.contains_key(id),
        }
    }
}

/// A structural problem in a bundle, located by owning entity and field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BundleIssue {
    pub code: &'static str,
    pub owner_kind: EntityKind,
    pub owner_id: String,
    pub field: &'static str,
    /// The offending referenced id, for reference problems.
    pub target: Option<String>,
    pub message: String,
}

pub const E_UNRESOLVED_REF: &str = "E_UNRESOLVED_REF";
pub const E_STRUCTURE: &str = "E_STRUCTURE";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unresolved reference: {owner_kind} `{owner_id}` field `{field}` names unknown {target_kind} `{target}`")]
pub struct ReferenceError {
    pub owner_kind: EntityKind,
    pub owner_id: String,
    pub field: &'static str,
    pub target_kind: EntityKind,
    pub target: String,
}

fn reference_issues(bundle: &ItemBundle) -> Vec<(BundleIssue, ReferenceError)> {
    let mut out = Vec::new();
    let mut check = |owner_kind: EntityKind,
                     owner_id: &str,
                     field: &'static str,
                     target_kind: EntityKind,
                     target: &str| {
        if !bundle.contains(target_kind, target) {
            let err = ReferenceError {
                owner_kind,
                owner_id: owner_id.to_string(),
                field,
                target_kind,
                target: target.to_string(),
            };
            out.push((
                BundleIssue {
                    code: E_UNRESOLVED_REF,
                    owner_kind,
                    owner_id: owner_id.to_string(),
                    field,
                    target: Some(target.to_string()),
                    message: format!("unknown {target_kind} `{target}`"),
                },
                err,
            ));
        }
    };
    for service in bundle.architecture.services.values() {
        for bus in &service.buses {
            check(
                EntityKind::Service,
                &service.id,
                "buses",
                EntityKind::Bus,
                bus,
            );
        }
    }
    for function in bundle.architecture.functions.values() {
        check(
            EntityKind::Function,
            &function.id,
            "service",
            EntityKind::Service,
            &function.service,
        );
    }
    for req in bundle.requirements.values() {
        check(
            EntityKind::Requirement,
            &req.id,
            "scenario",
            EntityKind::Scenario,
            &req.scenario,
        );
        if let Some(parent) = &req.parent {
            check(
                EntityKind::Requirement,
                &req.id,
                "parent",
                EntityKind::Requirement,
                parent,
            );
        }
    }
    for fm in bundle.failure_modes.values() {
        check(
            EntityKind::FailureMode,
            &fm.id,
            "function",
            EntityKind::Function,
            &fm.function,
        );
    }
    for pi in bundle.proposals.values() {
        check(
            EntityKind::Pi,
            &pi.id,
            "provider",
            EntityKind::Function,
            &pi.provider,
        );
        for t in &pi.traces {
            check(EntityKind::Pi, &pi.id, "traces", t.kind(), t.id());
        }
    }
    out
}

/// First unresolved cross-reference, if any.
pub fn resolve_references(bundle: &ItemBundle) -> Result<(), ReferenceError> {
    match reference_issues(bundle).into_iter().next() {
        Some((_, err)) => Err(err),
        None => Ok(()),
    }
}

/// Unresolved references plus structural invariant violations.
pub fn check_bundle(bundle: &ItemBundle) -> Vec<BundleIssue> {
    let mut issues: Vec<BundleIssue> = reference_issues(bundle)
        .into_iter()
        .map(|(i, _)| i)
        .collect();
    let mut structural = |owner_kind, owner_id: &str, field, message: String| {
        issues.push(BundleIssue {
            code: E_STRUCTURE,
            owner_kind,
            owner_id: owner_id.to_string(),
            field,
            target: None,
            message,
        });
    };

    for service in bundle.architecture.services.values() {
        if service.buses.is_empty() {
            structural(
                EntityKind::Service,
                &service.id,
                "buses",
                "service must attach to at least one bus".into(),
            );
        }
    }
    for bus in bundle.architecture.buses.values() {
        let cap = &bus.capacity;
        if !cap.unit.vector().is_data_rate() {
            structural(
                EntityKind::Bus,
                &bus.id,
                "capacity",
                format!("capacity unit `{}` is not a data rate", cap.unit),
            );
        } else if !(cap.value.is_finite() && cap.value > 0.0) {
            structural(
                EntityKind::Bus,
                &bus.id,
                "capacity",
                "capacity must be positive".into(),
            );
        }
        let lat = &bus.base_latency;
        if !lat.unit.vector().is_time() {
            structural(
                EntityKind::Bus,
                &bus.id,
                "base_latency",
                format!("base_latency unit `{}` is not a time", lat.unit),
            );
        } else if !(lat.value.is_finite() && lat.value >= 0.0) {
            structural(
                EntityKind::Bus,
                &bus.id,
                "base_latency",
                "base_latency must be nonnegative".into(),
            );
        }
    }
    for req in bundle.requirements.values() {
        if let Some(parent) = req
            .parent
            .as_deref()
            .and_then(|p| bundle.requirements.get(p))
        {
            if req.granularity != parent.granularity + 1 {
                structural(
                    EntityKind::Requirement,
                    &req.id,
                    "granularity",
                    format!(
                        "granularity {} must be one below parent `{}` ({})",
                        req.granularity, parent.id, parent.granularity
                    ),
                );
            }
        }
        // Walk the parent chain; a chain longer than the requirement count is a cycle.
        let mut cursor = req.parent.as_deref();
        let mut steps = 0usize;
        while let Some(p) = cursor {
            if p == req.id || steps > bundle.requirements.len() {
                structural(
                    EntityKind::Requirement,
                    &req.id,
                    "parent",
                    "requirement parent chain is cyclic".into(),
                );
                break;
            }
            steps += 1;
            cursor = bundle.requirements.get(p).and_then(|r| r.parent.as_deref());
        }
    }
    issues
}

/// Quotes `text` as a PID string literal.
pub fn quote(text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 2);
    out.push('"');
    for c in text.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Serializes `BTreeMap<id, T>` as an array of `T` and rebuilds the map on
/// the way back in.
pub(crate) mod id_map {
    use std::collections::BTreeMap;

    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub trait Keyed {
        fn key(&self) -> &str;
    }

    macro_rules! keyed {
        ($($ty:ty),*) => {
            $(impl Keyed for $ty {
                fn key(&self) -> &str {
                    &self.id
                }
            })*
        };
    }

    keyed!(
        super::Scenario,
        super::Service,
        super::Bus,
        super::Function,
        super::SafetyRequirement,
        super::FailureMode,
        super::PerformanceIndicator
    );

    pub fn serialize<T: Serialize, S: Serializer>(
        map: &BTreeMap<String, T>,
        serializer: S,
    ) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(map.values())
    }

    pub fn deserialize<'de, T, D>(deserializer: D) -> Result<BTreeMap<String, T>, D::Error>
    where
        T: Deserialize<'de> + Keyed,
        D: Deserializer<'de>,
    {
        let items = Vec::<T>::deserialize(deserializer)?;
        let mut map = BTreeMap::new();
        for item in items {
            let key = item.key().to_string();
            if map.insert(key.clone(), item).is_some() {
                return Err(D::Error::custom(format!("duplicate id `{key}`")));
            }
        }
        Ok(map)
    }
}
