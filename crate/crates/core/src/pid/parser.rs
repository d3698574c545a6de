use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::syntax::{parse_blocks, Block, Field, ValueItem};
use crate::canonical::normalize_whitespace;
use crate::diagnostic::{Diagnostic, SourceSpan};
use crate::model::{
    check_bundle, AnalysisMethod, Bus, Effect, EntityKind, FailureMode, Function, ItemBundle,
    ItemDefinition, PerformanceIndicator, Perspective, Role, SafetyRequirement, Scenario, Service,
    Stakeholder, TraceRef, Uncertainty, ValueRange, ValueType,
};
use crate::units::{convert_value, Quantity, Unit};
use crate::validate::validate_pi;

pub const E_MISSING_FIELD: &str = "E_MISSING_FIELD";
pub const E_UNKNOWN_FIELD: &str = "E_UNKNOWN_FIELD";
pub const E_DUPLICATE_FIELD: &str = "E_DUPLICATE_FIELD";
pub const E_DUPLICATE_ID: &str = "E_DUPLICATE_ID";
pub const E_VALUE: &str = "E_VALUE";
pub const E_UNIT: &str = "E_UNIT";

/// One input file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Source {
    pub path: String,
    pub text: String,
}

impl Source {
    pub fn new(path: impl Into<String>, text: impl Into<String>) -> Self {
        Source {
            path: path.into(),
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedBundle {
    pub bundle: ItemBundle,
    pub diagnostics: Vec<Diagnostic>,
}

impl ParsedBundle {
    pub fn has_errors(&self) -> bool {
        self.diagnostics.iter().any(Diagnostic::is_error)
    }
}

pub const BUNDLE_KINDS: &[&str] = &[
    "item",
    "scenario",
    "service",
    "bus",
    "function",
    "requirement",
    "failure_mode",
    "pi",
];

/// Where each entity and field came from, for locating semantic errors.
#[derive(Default)]
struct SpanIndex {
    blocks: HashMap<(EntityKind, String), BlockSpans>,
}

struct BlockSpans {
    block: SourceSpan,
    fields: HashMap<String, SourceSpan>,
    refs: HashMap<String, Vec<(String, SourceSpan)>>,
}

impl SpanIndex {
    fn record(&mut self, kind: EntityKind, block: &Block) {
        let mut fields = HashMap::new();
        let mut refs: HashMap<String, Vec<(String, SourceSpan)>> = HashMap::new();
        for f in &block.fields {
            fields
                .entry(f.name.clone())
                .or_insert_with(|| f.name_span.clone());
            for item in &f.items {
                if let ValueItem::Name { arg: Some(arg), .. } = item {
                    if let ValueItem::Str { text, span } = arg.as_ref() {
                        refs.entry(f.name.clone())
                            .or_default()
                            .push((normalize_whitespace(text), span.clone()));
                    }
                }
            }
        }
        self.blocks.insert(
            (kind, block.id.clone()),
            BlockSpans {
                block: block.kind_span.clone(),
                fields,
                refs,
            },
        );
    }

    fn locate(
        &self,
        kind: EntityKind,
        id: &str,
        field: Option<&str>,
        target: Option<&str>,
    ) -> Option<SourceSpan> {
        let spans = self.blocks.get(&(kind, id.to_string()))?;
        if let (Some(field), Some(target)) = (field, target) {
            if let Some((_, span)) = spans
                .refs
                .get(field)
                .and_then(|r| r.iter().find(|(t, _)| t == target))
            {
                return Some(span.clone());
            }
        }
        field
            .and_then(|f| spans.fields.get(f))
            .or(Some(&spans.block))
            .cloned()
    }
}

/// Typed access to a block's fields, reporting problems as it goes.
struct Fields<'a> {
    block: &'a Block,
    by_name: BTreeMap<&'a str, &'a Field>,
    diags: &'a mut Vec<Diagnostic>,
    known: &'static [&'static str],
    ok: bool,
}

impl<'a> Fields<'a> {
    fn new(
        block: &'a Block,
        known: &'static [&'static str],
        diags: &'a mut Vec<Diagnostic>,
    ) -> Self {
        let mut by_name = BTreeMap::new();
        let before = diags.len();
        for f in &block.fields {
            if !known.contains(&f.name.as_str()) {
                diags.push(
                    Diagnostic::error(
                        E_UNKNOWN_FIELD,
                        format!(
                            "unknown field `{}` in {} \"{}\"; expected one of {}",
                            f.name,
                            block.kind,
                            block.id,
                            known.join(", ")
                        ),
                    )
                    .with_span(f.name_span.clone()),
                );
            } else if by_name.insert(f.name.as_str(), f).is_some() {
                diags.push(
                    Diagnostic::error(
                        E_DUPLICATE_FIELD,
                        format!(
                            "field `{}` given twice in {} \"{}\"",
                            f.name, block.kind, block.id
                        ),
                    )
                    .with_span(f.name_span.clone()),
                );
            }
        }
        let ok = diags.len() == before;
        Fields {
            block,
            by_name,
            diags,
            known,
            ok,
        }
    }

    fn fail(&mut self, code: &str, span: &SourceSpan, message: String) {
        self.diags
            .push(Diagnostic::error(code, message).with_span(span.clone()));
        self.ok = false;
    }

    fn bad(&mut self, field: &Field, expected: &str) {
        let message = format!("field `{}` expects {expected}", field.name);
        let span = field
            .items
            .first()
            .map(|i| i.span().clone())
            .unwrap_or(field.name_span.clone());
        self.fail(E_VALUE, &span, message);
    }

    fn get(&self, name: &str) -> Option<&'a Field> {
        debug_assert!(self.known.contains(&name));
        self.by_name.get(name).copied()
    }

    fn require(&mut self, name: &str) -> Option<&'a Field> {
        let field = self.get(name);
        if field.is_none() {
            let message = format!(
                "{} \"{}\" is missing required field `{name}`",
                self.block.kind, self.block.id
            );
            let span = self.block.kind_span.clone();
            self.fail(E_MISSING_FIELD, &span, message);
        }
        field
    }

    fn single(&mut self, field: &'a Field, expected: &str) -> Option<&'a ValueItem> {
        if field.items.len() != 1 {
            self.bad(field, expected);
            return None;
        }
        Some(&field.items[0])
    }

    fn string_of(&mut self, field: &'a Field) -> Option<String> {
        match self.single(field, "a quoted string")? {
            ValueItem::Str { text, .. } => Some(normalize_whitespace(text)),
            _ => {
                self.bad(field, "a quoted string");
                None
            }
        }
    }

    fn string(&mut self, name: &str) -> Option<String> {
        let field = self.require(name)?;
        self.string_of(field)
    }

    fn opt_string(&mut self, name: &str) -> Option<String> {
        let field = self.get(name)?;
        self.string_of(field)
    }

    fn strings(&mut self, name: &str) -> Vec<String> {
        let Some(field) = self.get(name) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for item in &field.items {
            match item {
                ValueItem::Str { text, .. } => out.push(normalize_whitespace(text)),
                _ => self.bad(field, "a comma-separated list of quoted strings"),
            }
        }
        out
    }

    /// `kind "id", kind "id", ...` where every kind must equal `kind`.
    fn refs_of(&mut self, field: &'a Field, kinds: &[&str]) -> Vec<(String, String)> {
        let expected = format!("references like {} \"id\"", kinds.join(" \"id\" or "));
        let mut out = Vec::new();
        for item in &field.items {
            match item {
                ValueItem::Name {
                    name,
                    arg: Some(arg),
                    ..
                } if kinds.contains(&name.as_str()) => match arg.as_ref() {
                    ValueItem::Str { text, .. } => {
                        out.push((name.clone(), normalize_whitespace(text)))
                    }
                    _ => self.bad(field, &expected),
                },
                _ => self.bad(field, &expected),
            }
        }
        out
    }

    fn reference(&mut self, name: &str, kind: &str) -> Option<String> {
        let field = self.require(name)?;
        self.single(field, &format!("one reference {kind} \"id\""))?;
        self.refs_of(field, &[kind]).pop().map(|(_, id)| id)
    }

    fn opt_reference(&mut self, name: &str, kind: &str) -> Option<String> {
        let field = self.get(name)?;
        self.single(field, &format!("one reference {kind} \"id\""))?;
        self.refs_of(field, &[kind]).pop().map(|(_, id)| id)
    }

    fn keyword_of(&mut self, field: &'a Field, expected: &str) -> Option<(String, &'a SourceSpan)> {
        match self.single(field, expected)? {
            ValueItem::Name {
                name,
                arg: None,
                span,
            } => Some((name.clone(), span)),
            _ => {
                self.bad(field, expected);
                None
            }
        }
    }

    fn keyword<T: std::str::FromStr<Err = crate::model::UnknownName>>(
        &mut self,
        name: &str,
        required: bool,
    ) -> Option<T> {
        let field = if required {
            self.require(name)?
        } else {
            self.get(name)?
        };
        let (word, span) = self.keyword_of(field, "a keyword")?;
        match word.parse::<T>() {
            Ok(v) => Some(v),
            Err(e) => {
                self.fail(E_VALUE, span, e.to_string());
                None
            }
        }
    }

    fn boolean(&mut self, name: &str) -> Option<bool> {
        let field = self.get(name)?;
        let (word, _) = self.keyword_of(field, "`true` or `false`")?;
        match word.as_str() {
            "true" => Some(true),
            "false" => Some(false),
            _ => {
                self.bad(field, "`true` or `false`");
                None
            }
        }
    }

    fn integer(&mut self, name: &str) -> Option<u32> {
        let field = self.get(name)?;
        match self.single(field, "a nonnegative integer")? {
            ValueItem::Number {
                value, unit: None, ..
            } if value.fract() == 0.0 && *value >= 0.0 && *value <= u32::MAX as f64 => {
                Some(*value as u32)
            }
            _ => {
                self.bad(field, "a nonnegative integer");
                None
            }
        }
    }

    fn parse_unit(&mut self, text: &str, span: &SourceSpan) -> Option<Unit> {
        match Unit::parse(text) {
            Ok(u) => Some(u),
            Err(e) => {
                self.fail(E_UNIT, span, e.to_string());
                None
            }
        }
    }

    fn unit(&mut self, name: &str) -> Option<Unit> {
        let field = self.require(name)?;
        match self.single(field, "a unit expression")? {
            ValueItem::Name {
                name,
                arg: None,
                span,
            } => self.parse_unit(name, span),
            ValueItem::Number {
                raw,
                unit: None,
                span,
                ..
            } if raw == "1" => self.parse_unit(raw, span),
            _ => {
                self.bad(field, "a unit expression");
                None
            }
        }
    }

    fn quantity(&mut self, name: &str) -> Option<Quantity> {
        let field = self.require(name)?;
        match self.single(field, "a number followed by a unit")? {
            ValueItem::Number {
                value,
                unit: Some((unit, unit_span)),
                ..
            } => {
                let unit = self.parse_unit(unit, unit_span)?;
                Some(Quantity::new(*value, unit))
            }
            _ => {
                self.bad(field, "a number followed by a unit");
                None
            }
        }
    }

    /// Range, converted into `unit` when written with a different one.
    fn range(&mut self, name: &str, unit: Option<&Unit>) -> Option<ValueRange> {
        let field = self.require(name)?;
        match self.single(field, "a range [min, max]")? {
            ValueItem::Range {
                min,
                max,
                unit: range_unit,
                ..
            } => {
                let (Some((text, span)), Some(target)) = (range_unit, unit) else {
                    return Some(ValueRange::new(*min, *max));
                };
                let from = self.parse_unit(text, span)?;
                match (
                    convert_value(*min, from.vector(), target.vector()),
                    convert_value(*max, from.vector(), target.vector()),
                ) {
                    (Some(a), Some(b)) => Some(ValueRange::new(a, b)),
                    _ => {
                        self.fail(
                            E_UNIT,
                            span,
                            format!(
                                "range unit `{from}` is not compatible with the PI unit `{target}`"
                            ),
                        );
                        None
                    }
                }
            }
            _ => {
                self.bad(field, "a range [min, max]");
                None
            }
        }
    }

    fn uncertainty(&mut self, name: &str) -> Option<Uncertainty> {
        let Some(field) = self.get(name) else {
            return Some(Uncertainty::NoneDeclared);
        };
        const EXPECTED: &str =
            "`none_declared`, `interval <magnitude>`, `standard_deviation <magnitude>` or `qualitative \"note\"`";
        let item = self.single(field, EXPECTED)?;
        let ValueItem::Name { name, arg, .. } = item else {
            self.bad(field, EXPECTED);
            return None;
        };
        let arg = arg.as_deref();
        let parsed = match (name.as_str(), arg) {
            ("none_declared", None) => Some(Uncertainty::NoneDeclared),
            (
                "interval",
                Some(ValueItem::Number {
                    value, unit: None, ..
                }),
            ) => Some(Uncertainty::Interval { magnitude: *value }),
            (
                "standard_deviation",
                Some(ValueItem::Number {
                    value, unit: None, ..
                }),
            ) => Some(Uncertainty::StandardDeviation { magnitude: *value }),
            ("qualitative", Some(ValueItem::Str { text, .. })) => Some(Uncertainty::Qualitative {
                note: normalize_whitespace(text),
            }),
            _ => None,
        };
        if parsed.is_none() {
            self.bad(field, EXPECTED);
        }
        parsed
    }

    fn stakeholders(&mut self, name: &str) -> Option<BTreeSet<Stakeholder>> {
        let field = self.require(name)?;
        let mut out = BTreeSet::new();
        for item in &field.items {
            match item {
                ValueItem::Name {
                    name: role,
                    arg: Some(arg),
                    span,
                } => match (role.parse::<Role>(), arg.as_ref()) {
                    (Ok(role), ValueItem::Str { text, .. }) => {
                        out.insert(Stakeholder::new(role, normalize_whitespace(text)));
                    }
                    (Err(e), _) => self.fail(E_VALUE, span, e.to_string()),
                    _ => self.bad(field, "role \"name\" pairs"),
                },
                _ => self.bad(field, "role \"name\" pairs"),
            }
        }
        Some(out)
    }

    fn finish<T>(self, value: Option<T>) -> Option<T> {
        if self.ok {
            value
        } else {
            None
        }
    }
}

fn build_item(block: &Block, diags: &mut Vec<Diagnostic>) -> Option<ItemDefinition> {
    let mut f = Fields::new(block, &["use_cases"], diags);
    let use_cases = f.strings("use_cases");
    f.finish(Some(ItemDefinition {
        name: block.id.clone(),
        use_cases,
    }))
}

fn build_scenario(block: &Block, diags: &mut Vec<Diagnostic>) -> Option<Scenario> {
    let mut f = Fields::new(block, &["description"], diags);
    let description = f.string("description");
    let v = description.map(|description| Scenario {
        id: block.id.clone(),
        description,
    });
    f.finish(v)
}

fn build_service(block: &Block, diags: &mut Vec<Diagnostic>) -> Option<Service> {
    let mut f = Fields::new(block, &["placement", "buses"], diags);
    let placement = f.opt_string("placement");
    let buses = f.require("buses").map(|field| {
        f.refs_of(field, &["bus"])
            .into_iter()
            .map(|(_, id)| id)
            .collect()
    });
    let v = buses.map(|buses| Service {
        id: block.id.clone(),
        placement,
        buses,
    });
    f.finish(v)
}

fn build_bus(block: &Block, diags: &mut Vec<Diagnostic>) -> Option<Bus> {
    let mut f = Fields::new(block, &["capacity", "base_latency", "placement"], diags);
    let capacity = f.quantity("capacity");
    let base_latency = f.quantity("base_latency");
    let placement = f.opt_string("placement");
    let v = match (capacity, base_latency) {
        (Some(capacity), Some(base_latency)) => Some(Bus {
            id: block.id.clone(),
            capacity,
            base_latency,
            placement,
        }),
        _ => None,
    };
    f.finish(v)
}

fn build_function(block: &Block, diags: &mut Vec<Diagnostic>) -> Option<Function> {
    let mut f = Fields::new(block, &["service", "description"], diags);
    let service = f.reference("service", "service");
    let description = f.opt_string("description");
    let v = service.map(|service| Function {
        id: block.id.clone(),
        service,
        description,
    });
    f.finish(v)
}

/// Requirement plus whether its granularity was written out.
fn build_requirement(
    block: &Block,
    diags: &mut Vec<Diagnostic>,
) -> Option<(SafetyRequirement, bool)> {
    let mut f = Fields::new(
        block,
        &[
            "statement",
            "scenario",
            "hazard",
            "granularity",
            "parent",
            "needs_runtime_monitoring",
        ],
        diags,
    );
    let statement = f.string("statement");
    let scenario = f.reference("scenario", "scenario");
    let hazard = f.opt_string("hazard");
    let granularity = f.integer("granularity");
    let parent = f.opt_reference("parent", "requirement");
    let monitored = f.boolean("needs_runtime_monitoring").unwrap_or(false);
    let v = match (statement, scenario) {
        (Some(statement), Some(scenario)) => Some((
            SafetyRequirement {
                id: block.id.clone(),
                statement,
                scenario,
                hazard,
                granularity: granularity.unwrap_or(0),
                parent,
                needs_runtime_monitoring: monitored,
            },
            granularity.is_some(),
        )),
        _ => None,
    };
    f.finish(v)
}

fn build_failure_mode(block: &Block, diags: &mut Vec<Diagnostic>) -> Option<FailureMode> {
    let mut f = Fields::new(block, &["function", "mechanism", "effect", "method"], diags);
    let function = f.reference("function", "function");
    let mechanism = f.string("mechanism");
    let effect = f.keyword::<Effect>("effect", true);
    let method = f.keyword::<AnalysisMethod>("method", true);
    let v = match (function, mechanism, effect, method) {
        (Some(function), Some(mechanism), Some(effect), Some(method)) => Some(FailureMode {
            id: block.id.clone(),
            function,
            mechanism,
            effect,
            method,
        }),
        _ => None,
    };
    f.finish(v)
}

const PI_FIELDS: &[&str] = &[
    "description",
    "unit",
    "range",
    "value_type",
    "uncertainty",
    "perspective",
    "proposed_by",
    "traces",
    "provider",
    "proxy_for",
    "rate",
    "payload",
    "freshness",
    "merged_from",
];

fn build_pi(block: &Block, diags: &mut Vec<Diagnostic>) -> Option<PerformanceIndicator> {
    let mut f = Fields::new(block, PI_FIELDS, diags);
    let description = f.string("description");
    let unit = f.unit("unit");
    let range = f.range("range", unit.as_ref());
    let value_type = f
        .keyword::<ValueType>("value_type", false)
        .unwrap_or_default();
    let uncertainty = f.uncertainty("uncertainty");
    let perspective = f.keyword::<Perspective>("perspective", true);
    let proposed_by = f.stakeholders("proposed_by");
    let traces = match f.get("traces") {
        Some(field) => f
            .refs_of(field, &["requirement", "failure_mode"])
            .into_iter()
            .map(|(kind, id)| {
                if kind == "requirement" {
                    TraceRef::Requirement(id)
                } else {
                    TraceRef::FailureMode(id)
                }
            })
            .collect(),
        None => BTreeSet::new(),
    };
    let provider = f.reference("provider", "function");
    let proxy_for = f.opt_string("proxy_for");
    let rate = f.quantity("rate");
    let payload = f.quantity("payload");
    let freshness = f.quantity("freshness");
    let merged_from = match f.get("merged_from") {
        Some(field) => f
            .refs_of(field, &["pi"])
            .into_iter()
            .map(|(_, id)| id)
            .collect(),
        None => BTreeSet::new(),
    };
    let v = (|| {
        Some(PerformanceIndicator {
            id: block.id.clone(),
            description: description?,
            unit: unit?,
            range: range?,
            value_type,
            uncertainty: uncertainty?,
            perspective: perspective?,
            proposed_by: proposed_by?,
            traces,
            provider: provider?,
            proxy_for,
            rate: rate?,
            payload: payload?,
            freshness: freshness?,
            merged_from,
        })
    })();
    f.finish(v)
}

fn duplicate(diags: &mut Vec<Diagnostic>, block: &Block) {
    diags.push(
        Diagnostic::error(
            E_DUPLICATE_ID,
            format!(
                "duplicate {} \"{}\"; the first declaration is kept",
                block.kind, block.id
            ),
        )
        .with_span(block.id_span.clone()),
    );
}

fn insert_unique<T>(
    map: &mut BTreeMap<String, T>,
    block: &Block,
    value: T,
    diags: &mut Vec<Diagnostic>,
) -> bool {
    if map.contains_key(&block.id) {
        duplicate(diags, block);
        return false;
    }
    map.insert(block.id.clone(), value);
    true
}

fn sort_diagnostics(diags: &mut [Diagnostic]) {
    // Stable: diagnostics at the same position keep emission order.
    diags.sort_by(|a, b| match (&a.span, &b.span) {
        (Some(x), Some(y)) => (&x.file, x.line, x.column).cmp(&(&y.file, y.line, y.column)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
}

fn sorted_sources(sources: &[Source]) -> Vec<&Source> {
    let mut sorted: Vec<&Source> = sources.iter().collect();
    sorted.sort_by(|a, b| a.path.cmp(&b.path));
    sorted
}

fn pi_diagnostics(pi: &PerformanceIndicator, index: &SpanIndex) -> Vec<Diagnostic> {
    validate_pi(pi)
        .into_iter()
        .map(|mut d| {
            d.span = index.locate(EntityKind::Pi, &pi.id, d.field.as_deref(), None);
            d
        })
        .collect()
}

fn issue_diagnostics(
    bundle: &ItemBundle,
    index: &SpanIndex,
    only: Option<EntityKind>,
) -> Vec<Diagnostic> {
    check_bundle(bundle)
        .into_iter()
        .filter(|issue| only.is_none_or(|k| k == issue.owner_kind))
        .map(|issue| {
            let mut d = Diagnostic::error(
                issue.code,
                format!(
                    "{} \"{}\" field `{}`: {}",
                    issue.owner_kind, issue.owner_id, issue.field, issue.message
                ),
            )
            .with_subject(issue.owner_id.clone())
            .with_field(issue.field);
            d.span = index.locate(
                issue.owner_kind,
                &issue.owner_id,
                Some(issue.field),
                issue.target.as_deref(),
            );
            d
        })
        .collect()
}

/// Parses a set of PID files into one bundle. Files are processed in path
/// order, so the result does not depend on the order of `sources`.
pub fn parse_pid(sources: &[Source]) -> ParsedBundle {
    let mut bundle = ItemBundle::default();
    let mut diags = Vec::new();
    let mut index = SpanIndex::default();
    let mut explicit_granularity = BTreeMap::new();

    for source in sorted_sources(sources) {
        let (blocks, syntax_diags) = parse_blocks(&source.path, &source.text, BUNDLE_KINDS);
        diags.extend(syntax_diags);
        for block in &blocks {
            let kind: EntityKind = block
                .kind
                .parse()
                .expect("block kinds are filtered by the syntax layer");
            let added = match kind {
                EntityKind::Item => match build_item(block, &mut diags) {
                    Some(item) if bundle.item.is_none() => {
                        bundle.item = Some(item);
                        true
                    }
                    Some(_) => {
                        diags.push(
                            Diagnostic::error(
                                E_DUPLICATE_ID,
                                "only one item may be declared; the first is kept",
                            )
                            .with_span(block.id_span.clone()),
                        );
                        false
                    }
                    None => false,
                },
                EntityKind::Scenario => build_scenario(block, &mut diags)
                    .is_some_and(|v| insert_unique(&mut bundle.scenarios, block, v, &mut diags)),
                EntityKind::Service => build_service(block, &mut diags).is_some_and(|v| {
                    insert_unique(&mut bundle.architecture.services, block, v, &mut diags)
                }),
                EntityKind::Bus => build_bus(block, &mut diags).is_some_and(|v| {
                    insert_unique(&mut bundle.architecture.buses, block, v, &mut diags)
                }),
                EntityKind::Function => build_function(block, &mut diags).is_some_and(|v| {
                    insert_unique(&mut bundle.architecture.functions, block, v, &mut diags)
                }),
                EntityKind::Requirement => match build_requirement(block, &mut diags) {
                    Some((req, explicit)) => {
                        let ok = insert_unique(&mut bundle.requirements, block, req, &mut diags);
                        if ok {
                            explicit_granularity.insert(block.id.clone(), explicit);
                        }
                        ok
                    }
                    None => false,
                },
                EntityKind::FailureMode => build_failure_mode(block, &mut diags).is_some_and(|v| {
                    insert_unique(&mut bundle.failure_modes, block, v, &mut diags)
                }),
                EntityKind::Pi => build_pi(block, &mut diags)
                    .is_some_and(|v| insert_unique(&mut bundle.proposals, block, v, &mut diags)),
            };
            if added {
                index.record(kind, block);
            }
        }
    }

    derive_granularity(&mut bundle, &explicit_granularity);

    for pi in bundle.proposals.values() {
        diags.extend(pi_diagnostics(pi, &index));
    }
    diags.extend(issue_diagnostics(&bundle, &index, None));
    sort_diagnostics(&mut diags);
    ParsedBundle {
        bundle,
        diagnostics: diags,
    }
}

/// Fills in omitted granularities as parent depth + 1 (roots are 0).
fn derive_granularity(bundle: &mut ItemBundle, explicit: &BTreeMap<String, bool>) {
    let ids: Vec<String> = bundle.requirements.keys().cloned().collect();
    for _ in 0..=ids.len() {
        let mut changed = false;
        for id in &ids {
            if explicit.get(id).copied().unwrap_or(true) {
                continue;
            }
            let parent = bundle.requirements[id].parent.clone();
            let derived = parent
                .and_then(|p| bundle.requirements.get(&p))
                .map(|p| p.granularity + 1)
                .unwrap_or(0);
            let req = bundle
                .requirements
                .get_mut(id)
                .expect("id taken from the map");
            if req.granularity != derived {
                req.granularity = derived;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
}

/// Convenience wrapper for a single in-memory file.
pub fn parse_pid_str(path: &str, text: &str) -> ParsedBundle {
    parse_pid(&[Source::new(path, text)])
}

/// Parses files containing only `pi` blocks, resolving their references
/// against `base`. Used for perspective submissions.
pub fn parse_proposals(
    sources: &[Source],
    base: &ItemBundle,
) -> (Vec<PerformanceIndicator>, Vec<Diagnostic>) {
    let mut proposals = BTreeMap::new();
    let mut diags = Vec::new();
    let mut index = SpanIndex::default();
    for source in sorted_sources(sources) {
        let (blocks, syntax_diags) = parse_blocks(&source.path, &source.text, &["pi"]);
        diags.extend(syntax_diags);
        for block in &blocks {
            if let Some(pi) = build_pi(block, &mut diags) {
                if insert_unique(&mut proposals, block, pi, &mut diags) {
                    index.record(EntityKind::Pi, block);
                }
            }
        }
    }
    for pi in proposals.values() {
        diags.extend(pi_diagnostics(pi, &index));
    }
    let scratch = base.with_proposals(proposals.values().cloned());
    diags.extend(issue_diagnostics(&scratch, &index, Some(EntityKind::Pi)));
    sort_diagnostics(&mut diags);
    (proposals.into_values().collect(), diags)
}
