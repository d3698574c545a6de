//! Duplicate detection over the PI log and application of the
//! coordinator's merge decisions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical::{format_decimal, normalize_whitespace, Digest};
use crate::diagnostic::{Diagnostic, SourceSpan};
use crate::model::{
    check_role, quote, Action, PerformanceIndicator, Role, RoleViolation, Stakeholder, Uncertainty,
};
use crate::pid::{
    parse_blocks, Block, ValueItem, E_DUPLICATE_ID, E_MISSING_FIELD, E_UNKNOWN_FIELD, E_VALUE,
};
use crate::units::{convert_difference, convert_value};
use crate::validate::validate_pi;

pub const DEFAULT_THRESHOLD: f64 = 0.6;

pub const E_NO_TRACES: &str = "E_NO_TRACES";
pub const E_MERGE_RANGE: &str = "E_MERGE_RANGE";
pub const W_MERGED_UNCERTAINTY: &str = "W_MERGED_UNCERTAINTY";

/// Unordered PI pair, stored sorted.
pub type PiPair = (String, String);

pub fn pair(a: &str, b: &str) -> PiPair {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MergeReason {
    SameDimension,
    NameSimilarity,
    RangeOverlap,
    SameProvider,
}

impl MergeReason {
    pub fn as_str(self) -> &'static str {
        match self {
            MergeReason::SameDimension => "same_dimension",
            MergeReason::NameSimilarity => "name_similarity",
            MergeReason::RangeOverlap => "range_overlap",
            MergeReason::SameProvider => "same_provider",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeProposal {
    pub id: String,
    pub candidates: PiPair,
    pub score: f64,
    pub reasons: Vec<MergeReason>,
    pub suggested_canonical: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Merge,
    KeepSeparate,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Merge => "merge",
            Verdict::KeepSeparate => "keep_separate",
        }
    }

    pub fn action(self) -> Action {
        match self {
            Verdict::Merge => Action::DecideMerge,
            Verdict::KeepSeparate => Action::DecideKeepSeparate,
        }
    }
}

impl std::str::FromStr for Verdict {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "merge" => Ok(Verdict::Merge),
            "keep_separate" => Ok(Verdict::KeepSeparate),
            _ => Err(format!(
                "unknown verdict `{s}`; expected merge or keep_separate"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HarmonizationDecision {
    pub id: String,
    pub proposal: String,
    pub verdict: Verdict,
    pub decided_by: Stakeholder,
    pub rationale: String,
    pub bundle_digest: Digest,
}

/// A field-level change or decision record, before it is stamped into the
/// audit log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeEvent {
    pub actor: Stakeholder,
    pub action: Action,
    pub subject: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarmonizeError {
    #[error("invalid threshold {0}: must lie in (0, 1]")]
    InvalidThreshold(f64),
    #[error("decision `{decision}`: {violation}")]
    RoleViolation {
        decision: String,
        violation: RoleViolation,
    },
    #[error("decision `{decision}` has an empty rationale")]
    EmptyRationale { decision: String },
    #[error(
        "decision `{decision}` applies to bundle {found}, but the current bundle is {expected}"
    )]
    StaleDecision {
        decision: String,
        expected: Digest,
        found: Digest,
    },
    #[error("decision `{decision}` names unknown proposal `{proposal}`")]
    UnknownProposal { decision: String, proposal: String },
    #[error("conflicting decisions: {0}")]
    ConflictingDecisions(String),
}

fn tokens(id: &str) -> BTreeSet<String> {
    id.split(['.', '_'])
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Jaccard index of the id token sets.
pub fn similarity(a: &PerformanceIndicator, b: &PerformanceIndicator) -> f64 {
    id_similarity(&a.id, &b.id)
}

pub fn id_similarity(a: &str, b: &str) -> f64 {
    let (ta, tb) = (tokens(a), tokens(b));
    let union = ta.union(&tb).count();
    if union == 0 {
        return 1.0;
    }
    ta.intersection(&tb).count() as f64 / union as f64
}

/// `b`'s range expressed in `a`'s unit, if the units are compatible.
fn converted_range(
    a: &PerformanceIndicator,
    b: &PerformanceIndicator,
) -> Option<crate::model::ValueRange> {
    let min = convert_value(b.range.min, b.unit.vector(), a.unit.vector())?;
    let max = convert_value(b.range.max, b.unit.vector(), a.unit.vector())?;
    Some(crate::model::ValueRange::new(min.min(max), min.max(max)))
}

fn check_threshold(threshold: f64) -> Result<(), HarmonizeError> {
    if threshold > 0.0 && threshold <= 1.0 {
        Ok(())
    } else {
        Err(HarmonizeError::InvalidThreshold(threshold))
    }
}

/// Every candidate pair with its stable id, suppressed pairs included.
fn all_proposals(proposals: &[PerformanceIndicator], threshold: f64) -> Vec<MergeProposal> {
    let mut sorted: Vec<&PerformanceIndicator> = proposals.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let mut out = Vec::new();
    for (i, a) in sorted.iter().enumerate() {
        for b in &sorted[i + 1..] {
            if a.id == b.id || !a.unit.compatible(&b.unit) {
                continue;
            }
            let score = similarity(a, b);
            if score < threshold {
                continue;
            }
            let mut reasons = vec![MergeReason::SameDimension, MergeReason::NameSimilarity];
            if converted_range(a, b).is_some_and(|r| a.range.intersect(&r).is_some()) {
                reasons.push(MergeReason::RangeOverlap);
            }
            if a.provider == b.provider {
                reasons.push(MergeReason::SameProvider);
            }
            out.push(MergeProposal {
                id: String::new(),
                candidates: (a.id.clone(), b.id.clone()),
                score,
                reasons,
                suggested_canonical: a.id.clone(),
            });
        }
    }
    out.sort_by(|x, y| {
        y.score
            .total_cmp(&x.score)
            .then_with(|| x.candidates.cmp(&y.candidates))
    });
    for (i, p) in out.iter_mut().enumerate() {
        p.id = format!("P-{:03}", i + 1);
    }
    out
}

/// Pairs of compatible PIs whose id similarity reaches `threshold`, minus
/// suppressed pairs. Ids are numbered before suppression so they stay
/// stable while the coordinator works through the queue.
pub fn propose_merges(
    proposals: &[PerformanceIndicator],
    threshold: f64,
    suppressions: &BTreeSet<PiPair>,
) -> Result<Vec<MergeProposal>, HarmonizeError> {
    check_threshold(threshold)?;
    Ok(all_proposals(proposals, threshold)
        .into_iter()
        .filter(|p| !suppressions.contains(&p.candidates))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarmonizationOutcome {
    /// Sorted by id.
    pub consolidated: Vec<PerformanceIndicator>,
    pub suppressions_added: BTreeSet<PiPair>,
    pub events: Vec<ChangeEvent>,
    pub diagnostics: Vec<Diagnostic>,
}

struct UnionFind {
    parent: BTreeMap<String, String>,
}

impl UnionFind {
    fn find(&mut self, x: &str) -> String {
        let p = self.parent.get(x).cloned().unwrap_or_else(|| x.to_string());
        if p == x {
            return p;
        }
        let root = self.find(&p);
        self.parent.insert(x.to_string(), root.clone());
        root
    }

    /// Smaller id becomes the root, so a cluster's root is its minimum.
    fn union(&mut self, a: &str, b: &str) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent.insert(hi, lo);
        }
    }
}

/// Applies coordinator decisions to the PI log. Merges are transitive: a
/// chain of merge verdicts collapses into the smallest id of the chain.
pub fn apply_decisions(
    proposals: &[PerformanceIndicator],
    decisions: &[HarmonizationDecision],
    current_digest: &Digest,
    threshold: f64,
    suppressions: &BTreeSet<PiPair>,
) -> Result<HarmonizationOutcome, HarmonizeError> {
    check_threshold(threshold)?;
    let queue: BTreeMap<String, MergeProposal> = all_proposals(proposals, threshold)
        .into_iter()
        .map(|p| (p.id.clone(), p))
        .collect();

    let mut verdicts: BTreeMap<&str, (Verdict, &str)> = BTreeMap::new();
    for d in decisions {
        check_role(d.decided_by.role, d.verdict.action()).map_err(|violation| {
            HarmonizeError::RoleViolation {
                decision: d.id.clone(),
                violation,
            }
        })?;
        if d.rationale.trim().is_empty() {
            return Err(HarmonizeError::EmptyRationale {
                decision: d.id.clone(),
            });
        }
        if &d.bundle_digest != current_digest {
            return Err(HarmonizeError::StaleDecision {
                decision: d.id.clone(),
                expected: current_digest.clone(),
                found: d.bundle_digest.clone(),
            });
        }
        if !queue.contains_key(&d.proposal) {
            return Err(HarmonizeError::UnknownProposal {
                decision: d.id.clone(),
                proposal: d.proposal.clone(),
            });
        }
        if let Some((previous, by)) = verdicts.insert(&d.proposal, (d.verdict, &d.id)) {
            if previous != d.verdict {
                return Err(HarmonizeError::ConflictingDecisions(format!(
                    "`{by}` and `{}` give different verdicts on {}",
                    d.id, d.proposal
                )));
            }
        }
    }

    let mut uf = UnionFind {
        parent: BTreeMap::new(),
    };
    let mut separate: BTreeMap<PiPair, String> = suppressions
        .iter()
        .map(|p| (p.clone(), "an earlier keep_separate decision".to_string()))
        .collect();
    for (proposal, (verdict, by)) in &verdicts {
        let (a, b) = &queue[*proposal].candidates;
        match verdict {
            Verdict::Merge => uf.union(a, b),
            Verdict::KeepSeparate => {
                separate.insert(pair(a, b), format!("`{by}`"));
            }
        }
    }
    for ((a, b), source) in &separate {
        if uf.find(a) == uf.find(b) {
            return Err(HarmonizeError::ConflictingDecisions(format!(
                "{a} and {b} are kept separate by {source} but merged by other verdicts"
            )));
        }
    }

    let mut events = Vec::new();
    let mut suppressions_added = BTreeSet::new();
    let mut merge_actor: BTreeMap<String, Stakeholder> = BTreeMap::new();
    for d in decisions {
        let p = &queue[&d.proposal];
        events.push(ChangeEvent {
            actor: d.decided_by.clone(),
            action: d.verdict.action(),
            subject: d.proposal.clone(),
            detail: format!(
                "{} {} / {}: {}",
                d.verdict.as_str(),
                p.candidates.0,
                p.candidates.1,
                normalize_whitespace(&d.rationale)
            ),
        });
        match d.verdict {
            Verdict::KeepSeparate => {
                if !suppressions.contains(&p.candidates) {
                    suppressions_added.insert(p.candidates.clone());
                }
            }
            Verdict::Merge => {
                for id in [&p.candidates.0, &p.candidates.1] {
                    merge_actor
                        .entry(id.clone())
                        .or_insert_with(|| d.decided_by.clone());
                }
            }
        }
    }

    let mut by_id: BTreeMap<String, PerformanceIndicator> = proposals
        .iter()
        .map(|p| (p.id.clone(), p.clone()))
        .collect();
    let mut clusters: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for id in by_id.keys() {
        let root = uf.find(id);
        if &root != id {
            clusters.entry(root).or_default().push(id.clone());
        }
    }
    let mut diagnostics = Vec::new();
    for (canonical_id, members) in clusters {
        let mut canonical = by_id[&canonical_id].clone();
        for member_id in members {
            let member = by_id[&member_id].clone();
            let actor = merge_actor
                .get(&member_id)
                .or_else(|| merge_actor.get(&canonical_id))
                .cloned()
                .expect("every clustered PI was named by a merge verdict");
            match absorb(&canonical, &member, &actor) {
                Ok((merged, mut merge_events)) => {
                    canonical = merged;
                    events.append(&mut merge_events);
                    by_id.remove(&member_id);
                }
                Err(message) => {
                    events.push(ChangeEvent {
                        actor,
                        action: Action::MergeRejected,
                        subject: format!("{canonical_id}#range"),
                        detail: format!("{member_id} not merged: {message}"),
                    });
                    diagnostics.push(
                        Diagnostic::error(
                            E_MERGE_RANGE,
                            format!("cannot merge {member_id} into {canonical_id}: {message}"),
                        )
                        .with_subject(canonical_id.clone())
                        .with_field("range")
                        .with_role(Role::SelfPerceptionCoordinator)
                        .with_stakeholders(
                            canonical
                                .proposed_by
                                .iter()
                                .chain(&member.proposed_by)
                                .cloned(),
                        ),
                    );
                }
            }
        }
        if canonical.uncertainty == Uncertainty::NoneDeclared {
            diagnostics.push(
                Diagnostic::warning(
                    W_MERGED_UNCERTAINTY,
                    "merged PI has no declared uncertainty; request from function expert",
                )
                .with_subject(canonical_id.clone())
                .with_field("uncertainty")
                .with_role(Role::FunctionExpert)
                .with_stakeholders(canonical.proposed_by.iter().cloned()),
            );
        }
        by_id.insert(canonical_id, canonical);
    }

    Ok(HarmonizationOutcome {
        consolidated: by_id.into_values().collect(),
        suppressions_added,
        events,
        diagnostics,
    })
}

fn range_text(r: &crate::model::ValueRange) -> String {
    format!("[{}, {}]", format_decimal(r.min), format_decimal(r.max))
}

fn join<T: fmt::Display>(items: impl IntoIterator<Item = T>) -> String {
    items
        .into_iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Merges `member` into `canonical`, or explains why the ranges are
/// incompatible.
fn absorb(
    canonical: &PerformanceIndicator,
    member: &PerformanceIndicator,
    actor: &Stakeholder,
) -> Result<(PerformanceIndicator, Vec<ChangeEvent>), String> {
    let theirs = converted_range(canonical, member).ok_or("units are not compatible")?;
    let range = canonical.range.intersect(&theirs).ok_or_else(|| {
        format!(
            "ranges {} and {} (in {}) do not intersect",
            range_text(&canonical.range),
            range_text(&theirs),
            canonical.unit
        )
    })?;

    let mut merged = canonical.clone();
    let mut events = Vec::new();
    let mut change = |field: &str, detail: String| {
        events.push(ChangeEvent {
            actor: actor.clone(),
            action: Action::MergeFieldChange,
            subject: format!("{}#{field}", canonical.id),
            detail,
        });
    };

    merged.merged_from.insert(member.id.clone());
    merged
        .merged_from
        .extend(member.merged_from.iter().cloned());
    merged.merged_from.remove(&merged.id);
    change(
        "merged_from",
        format!(
            "{{{}}} -> {{{}}}",
            join(&canonical.merged_from),
            join(&merged.merged_from)
        ),
    );

    merged
        .proposed_by
        .extend(member.proposed_by.iter().cloned());
    if merged.proposed_by != canonical.proposed_by {
        change(
            "proposed_by",
            format!(
                "{{{}}} -> {{{}}}",
                join(&canonical.proposed_by),
                join(&merged.proposed_by)
            ),
        );
    }

    merged.traces.extend(member.traces.iter().cloned());
    if merged.traces != canonical.traces {
        change(
            "traces",
            format!(
                "{{{}}} -> {{{}}}",
                join(&canonical.traces),
                join(&merged.traces)
            ),
        );
    }

    if range != canonical.range {
        merged.range = range;
        change(
            "range",
            format!("{} -> {}", range_text(&canonical.range), range_text(&range)),
        );
    }

    let uncertainty = merge_uncertainty(canonical, member);
    if uncertainty != canonical.uncertainty {
        change(
            "uncertainty",
            format!("{} -> {uncertainty}", canonical.uncertainty),
        );
    }
    if uncertainty == Uncertainty::NoneDeclared {
        change(
            "uncertainty",
            "warning: neither proposal declares an uncertainty".into(),
        );
    }
    merged.uncertainty = uncertainty;

    if merged.proxy_for.is_none() && member.proxy_for.is_some() {
        merged.proxy_for = member.proxy_for.clone();
        change(
            "proxy_for",
            format!(
                "none -> {}",
                quote(member.proxy_for.as_deref().unwrap_or_default())
            ),
        );
    }
    Ok((merged, events))
}

/// Quantitative beats qualitative beats undeclared; among quantitative
/// declarations the larger magnitude (in the canonical unit) wins, and on
/// a tie the canonical's declaration is kept.
fn merge_uncertainty(
    canonical: &PerformanceIndicator,
    member: &PerformanceIndicator,
) -> Uncertainty {
    use Uncertainty::*;
    let rescale = |u: &Uncertainty| -> Uncertainty {
        let to = |m: f64| {
            convert_difference(m, member.unit.vector(), canonical.unit.vector()).unwrap_or(m)
        };
        match u {
            Interval { magnitude } => Interval {
                magnitude: to(*magnitude),
            },
            StandardDeviation { magnitude } => StandardDeviation {
                magnitude: to(*magnitude),
            },
            other => other.clone(),
        }
    };
    let ours = canonical.uncertainty.clone();
    let theirs = rescale(&member.uncertainty);
    match (&ours, &theirs) {
        (_, NoneDeclared) => ours,
        (NoneDeclared, _) => theirs,
        (Qualitative { note: a }, Qualitative { note: b }) => {
            if a == b {
                ours
            } else {
                Qualitative {
                    note: format!("{a}; {b}"),
                }
            }
        }
        (Qualitative { .. }, _) => theirs,
        (_, Qualitative { .. }) => ours,
        _ => {
            let (a, b) = (
                ours.magnitude().unwrap_or(0.0),
                theirs.magnitude().unwrap_or(0.0),
            );
            if b > a {
                theirs
            } else {
                ours
            }
        }
    }
}

/// `validate_pi` plus the consolidated-log requirement of nonempty traces.
pub fn completeness_report(consolidated: &[PerformanceIndicator]) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for pi in consolidated {
        out.extend(validate_pi(pi));
        if pi.traces.is_empty() {
            let role = pi
                .proposed_by
                .iter()
                .next()
                .map(|s| s.role)
                .unwrap_or(Role::SelfPerceptionCoordinator);
            out.push(
                Diagnostic::error(E_NO_TRACES, "PI traces to no requirement or failure mode")
                    .with_subject(pi.id.clone())
                    .with_field("traces")
                    .with_role(role)
                    .with_stakeholders(pi.proposed_by.iter().cloned()),
            );
        }
    }
    out
}

/// Parses `decision` blocks.
pub fn parse_decisions(path: &str, text: &str) -> (Vec<HarmonizationDecision>, Vec<Diagnostic>) {
    let (blocks, mut diags) = parse_blocks(path, text, &["decision"]);
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for block in &blocks {
        if !seen.insert(block.id.clone()) {
            diags.push(
                Diagnostic::error(
                    E_DUPLICATE_ID,
                    format!("duplicate decision \"{}\"", block.id),
                )
                .with_span(block.id_span.clone()),
            );
            continue;
        }
        if let Some(d) = build_decision(block, &mut diags) {
            out.push(d);
        }
    }
    (out, diags)
}

fn build_decision(block: &Block, diags: &mut Vec<Diagnostic>) -> Option<HarmonizationDecision> {
    const FIELDS: &[&str] = &[
        "proposal",
        "verdict",
        "decided_by",
        "rationale",
        "bundle_digest",
    ];
    let before = diags.len();
    let mut err = |span: &SourceSpan, code: &str, message: String| {
        diags.push(Diagnostic::error(code, message).with_span(span.clone()));
    };
    let mut values: BTreeMap<&str, &ValueItem> = BTreeMap::new();
    for f in &block.fields {
        if !FIELDS.contains(&f.name.as_str()) {
            err(
                &f.name_span,
                E_UNKNOWN_FIELD,
                format!("unknown field `{}` in decision", f.name),
            );
        } else if f.items.len() != 1 {
            err(
                &f.name_span,
                E_VALUE,
                format!("field `{}` takes one value", f.name),
            );
        } else {
            values.insert(f.name.as_str(), &f.items[0]);
        }
    }
    for name in FIELDS {
        if !values.contains_key(name) && !block.fields.iter().any(|f| f.name == *name) {
            err(
                &block.kind_span,
                E_MISSING_FIELD,
                format!(
                    "decision \"{}\" is missing required field `{name}`",
                    block.id
                ),
            );
        }
    }
    let text = |name: &str| match values.get(name) {
        Some(ValueItem::Str { text, .. }) => Ok(normalize_whitespace(text)),
        Some(other) => Err((
            other.span().clone(),
            format!("field `{name}` expects a quoted string"),
        )),
        None => Err((block.kind_span.clone(), String::new())),
    };
    let proposal = text("proposal");
    let rationale = text("rationale");
    let digest = text("bundle_digest").and_then(|d| {
        d.parse::<Digest>()
            .map_err(|e| (values["bundle_digest"].span().clone(), e.to_string()))
    });
    let verdict = match values.get("verdict") {
        Some(ValueItem::Name {
            name,
            arg: None,
            span,
        }) => name.parse::<Verdict>().map_err(|e| (span.clone(), e)),
        Some(other) => Err((
            other.span().clone(),
            "field `verdict` expects merge or keep_separate".into(),
        )),
        None => Err((block.kind_span.clone(), String::new())),
    };
    let decided_by = match values.get("decided_by") {
        Some(ValueItem::Name {
            name,
            arg: Some(arg),
            span,
        }) => match (name.parse::<Role>(), arg.as_ref()) {
            (Ok(role), ValueItem::Str { text, .. }) => {
                Ok(Stakeholder::new(role, normalize_whitespace(text)))
            }
            (Err(e), _) => Err((span.clone(), e.to_string())),
            _ => Err((
                span.clone(),
                "field `decided_by` expects role \"name\"".into(),
            )),
        },
        Some(other) => Err((
            other.span().clone(),
            "field `decided_by` expects role \"name\"".into(),
        )),
        None => Err((block.kind_span.clone(), String::new())),
    };
    let failures = [
        proposal.as_ref().err(),
        verdict.as_ref().err(),
        decided_by.as_ref().err(),
        rationale.as_ref().err(),
        digest.as_ref().err(),
    ];
    for (span, message) in failures.into_iter().flatten() {
        if !message.is_empty() {
            err(span, E_VALUE, message.clone());
        }
    }
    if diags.len() != before {
        return None;
    }
    Some(HarmonizationDecision {
        id: block.id.clone(),
        proposal: proposal.ok()?,
        verdict: verdict.ok()?,
        decided_by: decided_by.ok()?,
        rationale: rationale.ok()?,
        bundle_digest: digest.ok()?,
    })
}

/// Decision file text, one block per decision in the given order.
pub fn serialize_decisions(decisions: &[HarmonizationDecision]) -> String {
    let mut out = String::new();
    for (i, d) in decisions.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&format!(
            "decision {} {{\n  proposal: {}\n  verdict: {}\n  decided_by: {}\n  rationale: {}\n  bundle_digest: {}\n}}\n",
            quote(&d.id),
            quote(&d.proposal),
            d.verdict.as_str(),
            d.decided_by,
            quote(&normalize_whitespace(&d.rationale)),
            quote(d.bundle_digest.as_str()),
        ));
    }
    out
}
