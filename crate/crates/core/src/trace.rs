//! Typed traceability multigraph over the project's entities.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical::{snapshot_hash, Digest};
use crate::model::{ItemBundle, PerformanceIndicator, ReferenceError};
use crate::synth::PiInterface;

macro_rules! simple_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
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

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text => Ok($name::$variant),)+
                    _ => Err(format!("unknown {} `{s}`", stringify!($name))),
                }
            }
        }
    };
}

simple_enum!(NodeKind {
    Scenario => "scenario",
    Hazard => "hazard",
    Requirement => "requirement",
    FailureMode => "failure_mode",
    Function => "function",
    Service => "service",
    Bus => "bus",
    Pi => "pi",
    Interface => "interface",
});

simple_enum!(EdgeKind {
    DerivesFrom => "derives_from",
    Mitigates => "mitigates",
    Observes => "observes",
    Proxies => "proxies",
    ProvidedBy => "provided_by",
    HostedOn => "hosted_on",
    TransportedOn => "transported_on",
    Refines => "refines",
    ProposedByRole => "proposed_by_role",
});

/// Whether `kind` may connect a `from` node to a `to` node.
pub fn edge_legal(kind: EdgeKind, from: NodeKind, to: NodeKind) -> bool {
    use EdgeKind as E;
    use NodeKind as N;
    matches!(
        (kind, from, to),
        (E::DerivesFrom, N::Requirement, N::Scenario)
            | (E::DerivesFrom, N::Hazard, N::Scenario)
            | (E::DerivesFrom, N::FailureMode, N::Function)
            | (E::DerivesFrom, N::Interface, N::Pi)
            | (E::Mitigates, N::Requirement, N::Hazard)
            | (E::Observes, N::Pi, N::Requirement | N::FailureMode)
            | (E::Proxies, N::Pi, N::Requirement | N::FailureMode)
            | (E::ProvidedBy, N::Pi, N::Function)
            | (E::HostedOn, N::Function, N::Service)
            | (E::HostedOn, N::Service, N::Bus)
            | (E::HostedOn, N::Interface, N::Service)
            | (E::TransportedOn, N::Interface, N::Bus)
            | (E::Refines, N::Requirement, N::Requirement)
            | (E::ProposedByRole, N::Pi, N::Pi)
    )
}

/// A node key, rendered `kind:id`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId {
    pub kind: NodeKind,
    pub id: String,
}

impl NodeId {
    pub fn new(kind: NodeKind, id: impl Into<String>) -> Self {
        NodeId {
            kind,
            id: id.into(),
        }
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind, self.id)
    }
}

impl FromStr for NodeId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, id) = s
            .split_once(':')
            .ok_or_else(|| format!("node `{s}` must be written kind:id"))?;
        if id.is_empty() {
            return Err(format!("node `{s}` has an empty id"));
        }
        Ok(NodeId::new(kind.parse()?, id))
    }
}

impl Serialize for NodeId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NodeId {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        String::deserialize(deserializer)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
    pub attrs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub from: NodeId,
    pub kind: EdgeKind,
    pub to: NodeId,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceGraph {
    /// Snapshot digest of the bundle with the consolidated log the graph
    /// was built from.
    pub source_digest: Digest,
    pub nodes: BTreeMap<NodeId, Node>,
    pub edges: BTreeSet<Edge>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error(transparent)]
    UnresolvedReference(#[from] ReferenceError),
    #[error("interface `{interface}` names unknown {kind} `{target}`")]
    UnresolvedInterface {
        interface: String,
        kind: NodeKind,
        target: String,
    },
    #[error("illegal {kind} edge from {from} to {to}")]
    IllegalEdgeKind {
        kind: EdgeKind,
        from: NodeId,
        to: NodeId,
    },
    #[error("unknown node `{0}`")]
    UnknownNode(String),
}

struct Builder {
    nodes: BTreeMap<NodeId, Node>,
    edges: BTreeSet<Edge>,
}

impl Builder {
    fn node(&mut self, kind: NodeKind, id: &str, attrs: &[(&str, String)]) -> NodeId {
        let key = NodeId::new(kind, id);
        let node = self.nodes.entry(key.clone()).or_insert_with(|| Node {
            id: key.clone(),
            kind,
            attrs: BTreeMap::new(),
        });
        for (k, v) in attrs {
            node.attrs.insert(k.to_string(), v.clone());
        }
        key
    }

    fn edge(
        &mut self,
        from: &NodeId,
        kind: EdgeKind,
        to: &NodeId,
        note: Option<String>,
    ) -> Result<(), TraceError> {
        let legal = edge_legal(kind, from.kind, to.kind)
            && self.nodes.contains_key(from)
            && self.nodes.contains_key(to)
            && !(kind == EdgeKind::Refines && from == to);
        if !legal {
            return Err(TraceError::IllegalEdgeKind {
                kind,
                from: from.clone(),
                to: to.clone(),
            });
        }
        self.edges.insert(Edge {
            from: from.clone(),
            kind,
            to: to.clone(),
            note,
        });
        Ok(())
    }
}

fn joined<T: fmt::Display>(items: impl IntoIterator<Item = T>) -> String {
    items
        .into_iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Builds the graph for `bundle` with `consolidated` as its PI log and the
/// given interfaces.
pub fn build_graph(
    bundle: &ItemBundle,
    consolidated: &[PerformanceIndicator],
    interfaces: &[PiInterface],
) -> Result<TraceGraph, TraceError> {
    let snapshot = bundle.with_proposals(consolidated.iter().cloned());
    let source_digest = snapshot_hash(&snapshot)?;
    let mut b = Builder {
        nodes: BTreeMap::new(),
        edges: BTreeSet::new(),
    };
    use EdgeKind as E;
    use NodeKind as N;

    for s in snapshot.scenarios.values() {
        b.node(
            N::Scenario,
            &s.id,
            &[("description", s.description.clone())],
        );
    }
    for bus in snapshot.architecture.buses.values() {
        b.node(N::Bus, &bus.id, &[("capacity", bus.capacity.to_string())]);
    }
    for s in snapshot.architecture.services.values() {
        let attrs: Vec<(&str, String)> = s
            .placement
            .iter()
            .map(|p| ("placement", p.clone()))
            .collect();
        let node = b.node(N::Service, &s.id, &attrs);
        for bus in &s.buses {
            b.edge(&node, E::HostedOn, &NodeId::new(N::Bus, bus.clone()), None)?;
        }
    }
    for f in snapshot.architecture.functions.values() {
        let node = b.node(N::Function, &f.id, &[]);
        b.edge(
            &node,
            E::HostedOn,
            &NodeId::new(N::Service, f.service.clone()),
            None,
        )?;
    }
    for r in snapshot.requirements.values() {
        b.node(
            N::Requirement,
            &r.id,
            &[
                ("statement", r.statement.clone()),
                ("granularity", r.granularity.to_string()),
                (
                    "needs_runtime_monitoring",
                    r.needs_runtime_monitoring.to_string(),
                ),
            ],
        );
    }
    for r in snapshot.requirements.values() {
        let node = NodeId::new(N::Requirement, r.id.clone());
        let scenario = NodeId::new(N::Scenario, r.scenario.clone());
        b.edge(&node, E::DerivesFrom, &scenario, None)?;
        if let Some(hazard) = &r.hazard {
            let h = b.node(N::Hazard, hazard, &[]);
            b.edge(&h, E::DerivesFrom, &scenario, None)?;
            b.edge(&node, E::Mitigates, &h, None)?;
        }
        if let Some(parent) = &r.parent {
            b.edge(
                &node,
                E::Refines,
                &NodeId::new(N::Requirement, parent.clone()),
                None,
            )?;
        }
    }
    for fm in snapshot.failure_modes.values() {
        let node = b.node(
            N::FailureMode,
            &fm.id,
            &[
                ("mechanism", fm.mechanism.clone()),
                ("effect", fm.effect.to_string()),
                ("method", fm.method.to_string()),
            ],
        );
        b.edge(
            &node,
            E::DerivesFrom,
            &NodeId::new(N::Function, fm.function.clone()),
            None,
        )?;
    }
    for pi in snapshot.proposals.values() {
        let mut attrs = vec![
            ("description", pi.description.clone()),
            ("perspective", pi.perspective.to_string()),
            ("proposed_by", joined(&pi.proposed_by)),
        ];
        if let Some(p) = &pi.proxy_for {
            attrs.push(("proxy_for", p.clone()));
        }
        let node = b.node(N::Pi, &pi.id, &attrs);
        b.edge(
            &node,
            E::ProvidedBy,
            &NodeId::new(N::Function, pi.provider.clone()),
            None,
        )?;
        for t in &pi.traces {
            let kind = match t {
                crate::model::TraceRef::Requirement(_) => N::Requirement,
                crate::model::TraceRef::FailureMode(_) => N::FailureMode,
            };
            let target = NodeId::new(kind, t.id());
            b.edge(&node, E::Observes, &target, None)?;
            if let Some(p) = &pi.proxy_for {
                b.edge(&node, E::Proxies, &target, Some(p.clone()))?;
            }
        }
        for s in &pi.proposed_by {
            b.edge(&node, E::ProposedByRole, &node, Some(s.to_string()))?;
        }
    }
    for i in interfaces {
        let check = |b: &Builder, kind: NodeKind, target: &str| {
            let key = NodeId::new(kind, target);
            if b.nodes.contains_key(&key) {
                Ok(key)
            } else {
                Err(TraceError::UnresolvedInterface {
                    interface: i.id.clone(),
                    kind,
                    target: target.to_string(),
                })
            }
        };
        let pi = check(&b, N::Pi, &i.pi)?;
        let service = check(&b, N::Service, &i.provider_service)?;
        let bus = check(&b, N::Bus, &i.bus)?;
        let node = b.node(
            N::Interface,
            &i.id,
            &[
                ("encoding", i.encoding.to_string()),
                ("status", i.status.to_string()),
                ("payload_bits", i.payload_bits.to_string()),
            ],
        );
        b.edge(&node, E::DerivesFrom, &pi, None)?;
        b.edge(&node, E::HostedOn, &service, None)?;
        b.edge(&node, E::TransportedOn, &bus, None)?;
    }

    check_refines_forest(&b)?;
    Ok(TraceGraph {
        source_digest,
        nodes: b.nodes,
        edges: b.edges,
    })
}

/// Every requirement has at most one parent, so a cycle shows up as a walk
/// that revisits a node.
fn check_refines_forest(b: &Builder) -> Result<(), TraceError> {
    let parent: BTreeMap<&NodeId, &Edge> = b
        .edges
        .iter()
        .filter(|e| e.kind == EdgeKind::Refines)
        .map(|e| (&e.from, e))
        .collect();
    for start in parent.keys() {
        let mut seen = BTreeSet::new();
        let mut cursor = *start;
        while let Some(edge) = parent.get(cursor) {
            if !seen.insert(cursor) {
                return Err(TraceError::IllegalEdgeKind {
                    kind: EdgeKind::Refines,
                    from: edge.from.clone(),
                    to: edge.to.clone(),
                });
            }
            cursor = &edge.to;
        }
    }
    Ok(())
}

impl TraceGraph {
    pub fn node(&self, key: &NodeId) -> Option<&Node> {
        self.nodes.get(key)
    }

    /// Resolves `kind:id`, or a bare id when exactly one node carries it.
    pub fn resolve(&self, text: &str) -> Result<NodeId, TraceError> {
        if let Ok(key) = text.parse::<NodeId>() {
            if self.nodes.contains_key(&key) {
                return Ok(key);
            }
        }
        let mut matches = self.nodes.keys().filter(|k| k.id == text);
        match (matches.next(), matches.next()) {
            (Some(k), None) => Ok(k.clone()),
            _ => Err(TraceError::UnknownNode(text.to_string())),
        }
    }

    pub fn out_edges<'a>(&'a self, from: &'a NodeId) -> impl Iterator<Item = &'a Edge> + 'a {
        self.edges.iter().filter(move |e| &e.from == from)
    }

    pub fn in_edges<'a>(&'a self, to: &'a NodeId) -> impl Iterator<Item = &'a Edge> + 'a {
        self.edges.iter().filter(move |e| &e.to == to)
    }

    pub fn edges_of_kind(&self, kind: EdgeKind) -> impl Iterator<Item = &Edge> + '_ {
        self.edges.iter().filter(move |e| e.kind == kind)
    }

    /// `id\tkind` lines under a header, sorted.
    pub fn nodes_tsv(&self) -> String {
        let mut out = String::from("id\tkind\n");
        for key in self.nodes.keys() {
            out.push_str(&format!("{}\t{}\n", tsv_cell(&key.to_string()), key.kind));
        }
        out
    }

    /// `from\tkind\tto\tnote` lines under a header, sorted.
    pub fn edges_tsv(&self) -> String {
        let mut out = String::from("from\tkind\tto\tnote\n");
        for e in &self.edges {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                tsv_cell(&e.from.to_string()),
                e.kind,
                tsv_cell(&e.to.to_string()),
                tsv_cell(e.note.as_deref().unwrap_or(""))
            ));
        }
        out
    }

    pub fn document(&self) -> GraphDocument {
        GraphDocument {
            source_digest: self.source_digest.clone(),
            nodes: self.nodes.values().cloned().collect(),
            edges: self.edges.iter().cloned().collect(),
        }
    }
}

fn tsv_cell(text: &str) -> String {
    text.replace(['\t', '\n', '\r'], " ")
}

/// Graph as one structured document: nodes and edges in export order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphDocument {
    pub source_digest: Digest,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Origin {
    pub pi: String,
    pub perspective: String,
    pub proposed_by: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub proxy_for: Option<String>,
    /// Maximal paths from the PI, each rendered as `kind:id` node keys.
    pub paths: Vec<Vec<String>>,
}

const ORIGIN_EDGES: [EdgeKind; 4] = [
    EdgeKind::Observes,
    EdgeKind::Refines,
    EdgeKind::DerivesFrom,
    EdgeKind::Mitigates,
];
const ORIGIN_NODES: [NodeKind; 5] = [
    NodeKind::Pi,
    NodeKind::Requirement,
    NodeKind::FailureMode,
    NodeKind::Scenario,
    NodeKind::Hazard,
];

/// All maximal simple paths from the PI back to its origins, sorted.
pub fn trace_origin(graph: &TraceGraph, pi: &str) -> Result<Origin, TraceError> {
    let start = NodeId::new(NodeKind::Pi, pi);
    let node = graph
        .node(&start)
        .ok_or_else(|| TraceError::UnknownNode(pi.to_string()))?;
    let mut paths = Vec::new();
    let mut stack = vec![start.clone()];
    walk(graph, &mut stack, &mut paths);
    paths.retain(|p: &Vec<NodeId>| p.len() > 1);
    let mut rendered: Vec<Vec<String>> = paths
        .into_iter()
        .map(|p| p.iter().map(ToString::to_string).collect())
        .collect();
    rendered.sort();
    rendered.dedup();
    Ok(Origin {
        pi: pi.to_string(),
        perspective: node.attrs.get("perspective").cloned().unwrap_or_default(),
        proposed_by: node.attrs.get("proposed_by").cloned().unwrap_or_default(),
        proxy_for: node.attrs.get("proxy_for").cloned(),
        paths: rendered,
    })
}

fn walk(graph: &TraceGraph, stack: &mut Vec<NodeId>, out: &mut Vec<Vec<NodeId>>) {
    let current = stack.last().expect("walk starts with one node").clone();
    let next: Vec<NodeId> = graph
        .out_edges(&current)
        .filter(|e| ORIGIN_EDGES.contains(&e.kind) && ORIGIN_NODES.contains(&e.to.kind))
        .map(|e| e.to.clone())
        .filter(|n| !stack.contains(n))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if next.is_empty() {
        out.push(stack.clone());
        return;
    }
    for n in next {
        stack.push(n);
        walk(graph, stack, out);
        stack.pop();
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CoverageReport {
    pub orphan_pis: Vec<String>,
    pub unmonitored_requirements: Vec<String>,
    pub unobserved_failure_modes: Vec<String>,
}

impl CoverageReport {
    pub fn is_empty(&self) -> bool {
        self.orphan_pis.is_empty()
            && self.unmonitored_requirements.is_empty()
            && self.unobserved_failure_modes.is_empty()
    }
}

/// Coverage gaps. A monitored requirement is covered when it or a refining
/// child is observed.
pub fn coverage_report(graph: &TraceGraph) -> CoverageReport {
    let observed: BTreeSet<&NodeId> = graph
        .edges_of_kind(EdgeKind::Observes)
        .map(|e| &e.to)
        .collect();
    let observing: BTreeSet<&NodeId> = graph
        .edges_of_kind(EdgeKind::Observes)
        .map(|e| &e.from)
        .collect();
    let mut children: BTreeMap<&NodeId, Vec<&NodeId>> = BTreeMap::new();
    for e in graph.edges_of_kind(EdgeKind::Refines) {
        children.entry(&e.to).or_default().push(&e.from);
    }

    let covered = |root: &NodeId| {
        let mut stack = vec![root];
        let mut seen = BTreeSet::new();
        while let Some(n) = stack.pop() {
            if !seen.insert(n) {
                continue;
            }
            if observed.contains(n) {
                return true;
            }
            stack.extend(children.get(n).into_iter().flatten().copied());
        }
        false
    };

    let mut report = CoverageReport::default();
    for (key, node) in &graph.nodes {
        match key.kind {
            NodeKind::Pi if !observing.contains(key) => report.orphan_pis.push(key.id.clone()),
            NodeKind::Requirement
                if node
                    .attrs
                    .get("needs_runtime_monitoring")
                    .map(String::as_str)
                    == Some("true")
                    && !covered(key) =>
            {
                report.unmonitored_requirements.push(key.id.clone())
            }
            NodeKind::FailureMode if !observed.contains(key) => {
                report.unobserved_failure_modes.push(key.id.clone())
            }
            _ => {}
        }
    }
    report
}

/// Everything that depends on `node`: nodes reaching it along edges,
/// excluding the node itself, sorted.
pub fn impact(graph: &TraceGraph, node: &NodeId) -> Result<Vec<NodeId>, TraceError> {
    if !graph.nodes.contains_key(node) {
        return Err(TraceError::UnknownNode(node.to_string()));
    }
    let mut reverse: BTreeMap<&NodeId, Vec<&NodeId>> = BTreeMap::new();
    for e in &graph.edges {
        reverse.entry(&e.to).or_default().push(&e.from);
    }
    let mut seen: BTreeSet<&NodeId> = BTreeSet::new();
    let mut stack = vec![node];
    while let Some(n) = stack.pop() {
        for &m in reverse.get(n).into_iter().flatten() {
            if seen.insert(m) {
                stack.push(m);
            }
        }
    }
    seen.remove(node);
    Ok(seen.into_iter().cloned().collect())
}
