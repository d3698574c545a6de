use std::fmt::Write as _;

use crate::canonical::{format_decimal, normalize_whitespace};
use crate::model::{quote, resolve_references, ItemBundle, ReferenceError, ValueType};

pub const HEADER: &str = "# piforge PID v1\n";

struct Out {
    text: String,
}

impl Out {
    fn open(&mut self, kind: &str, id: &str) {
        let _ = writeln!(
            self.text,
            "\n{kind} {} {{",
            quote(&normalize_whitespace(id))
        );
    }

    fn close(&mut self) {
        self.text.push_str("}\n");
    }

    fn field(&mut self, name: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.text, "  {name}: {value}");
    }

    fn string(&mut self, name: &str, value: &str) {
        self.field(name, quote(&normalize_whitespace(value)));
    }

    fn opt_string(&mut self, name: &str, value: Option<&String>) {
        if let Some(v) = value {
            self.string(name, v);
        }
    }

    fn refs<'a>(&mut self, name: &str, items: impl IntoIterator<Item = (&'a str, &'a str)>) {
        let rendered: Vec<String> = items
            .into_iter()
            .map(|(kind, id)| format!("{kind} {}", quote(&normalize_whitespace(id))))
            .collect();
        if !rendered.is_empty() {
            self.field(name, rendered.join(", "));
        }
    }
}

/// Canonical text of `bundle`. Blocks are sorted by kind then id, and
/// absent optional fields are left out.
pub fn serialize_pid(bundle: &ItemBundle) -> Result<String, ReferenceError> {
    resolve_references(bundle)?;
    let mut out = Out {
        text: HEADER.to_string(),
    };

    if let Some(item) = &bundle.item {
        out.open("item", &item.name);
        let cases: Vec<String> = item
            .use_cases
            .iter()
            .map(|c| quote(&normalize_whitespace(c)))
            .collect();
        if !cases.is_empty() {
            out.field("use_cases", cases.join(", "));
        }
        out.close();
    }
    for s in bundle.scenarios.values() {
        out.open("scenario", &s.id);
        out.string("description", &s.description);
        out.close();
    }
    for s in bundle.architecture.services.values() {
        out.open("service", &s.id);
        out.opt_string("placement", s.placement.as_ref());
        out.refs("buses", s.buses.iter().map(|b| ("bus", b.as_str())));
        out.close();
    }
    for b in bundle.architecture.buses.values() {
        out.open("bus", &b.id);
        out.field("capacity", &b.capacity);
        out.field("base_latency", &b.base_latency);
        out.opt_string("placement", b.placement.as_ref());
        out.close();
    }
    for f in bundle.architecture.functions.values() {
        out.open("function", &f.id);
        out.refs("service", [("service", f.service.as_str())]);
        out.opt_string("description", f.description.as_ref());
        out.close();
    }
    for r in bundle.requirements.values() {
        out.open("requirement", &r.id);
        out.string("statement", &r.statement);
        out.refs("scenario", [("scenario", r.scenario.as_str())]);
        out.opt_string("hazard", r.hazard.as_ref());
        out.field("granularity", r.granularity);
        out.refs(
            "parent",
            r.parent.iter().map(|p| ("requirement", p.as_str())),
        );
        out.field("needs_runtime_monitoring", r.needs_runtime_monitoring);
        out.close();
    }
    for fm in bundle.failure_modes.values() {
        out.open("failure_mode", &fm.id);
        out.refs("function", [("function", fm.function.as_str())]);
        out.string("mechanism", &fm.mechanism);
        out.field("effect", fm.effect);
        out.field("method", fm.method);
        out.close();
    }
    for pi in bundle.proposals.values() {
        out.open("pi", &pi.id);
        out.string("description", &pi.description);
        out.field("unit", pi.unit.expr());
        out.field(
            "range",
            format!(
                "[{}, {}]",
                format_decimal(pi.range.min),
                format_decimal(pi.range.max)
            ),
        );
        if pi.value_type == ValueType::Integer {
            out.field("value_type", pi.value_type);
        }
        out.field("uncertainty", &pi.uncertainty);
        out.field("perspective", pi.perspective);
        let stakeholders: Vec<String> = pi.proposed_by.iter().map(ToString::to_string).collect();
        out.field("proposed_by", stakeholders.join(", "));
        out.refs(
            "traces",
            pi.traces.iter().map(|t| (t.kind().as_str(), t.id())),
        );
        out.refs("provider", [("function", pi.provider.as_str())]);
        out.opt_string("proxy_for", pi.proxy_for.as_ref());
        out.field("rate", &pi.rate);
        out.field("payload", &pi.payload);
        out.field("freshness", &pi.freshness);
        out.refs(
            "merged_from",
            pi.merged_from.iter().map(|m| ("pi", m.as_str())),
        );
        out.close();
    }
    Ok(out.text)
}
