//! JSON norm files.
//!
//! ```json
//! {
//!   "mode": "prohibition",
//!   "schema": { "identifiers": { "taxiCapacity": "number" }, "functions": {} },
//!   "norms": [
//!     { "id": "respectCapacity", "type": "prohibition",
//!       "condition": "taxiCapacity >= NumClientsWaiting",
//!       "reward": 0, "penalty": -5, "roles": ["DRIVER"], "domain": "PICKING" }
//!   ],
//!   "actions": [ { "name": "PickClients", "domain": "PICKING" } ]
//! }
//! ```
//!
//! `activation`, `roles`, `domain`, `inviolable`, `issuer`, `reward`,
//! `penalty` and `actions` are optional. Conditions accept `True`/`False`.

use std::collections::{BTreeMap, BTreeSet};
use std::io;
use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;
use thiserror::Error;

use crate::dsl::{parse_lenient, EvaluationContext, Expr, FunctionRegistry, Value};
use crate::engine::{EngineError, EngineMode, NormStore};
use crate::norm::{ActionDescriptor, DeonticType, DomainId, Issuer, Norm, NormativeResponse, RoleId};
use crate::schema::{validate_norm, Diagnostic, StateSchema, ValidationReport};

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("format error: {0}")]
    Format(String),
    #[error("{0}")]
    Validation(ValidationReport),
}

impl LoadError {
    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        match self {
            LoadError::Validation(r) => r.diagnostics.clone(),
            other => vec![Diagnostic::new(other.to_string())],
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawNorm {
    pub id: String,
    #[serde(rename = "type")]
    pub deontic_type: DeonticType,
    pub condition: String,
    #[serde(default)]
    pub activation: Option<String>,
    #[serde(default)]
    pub reward: f64,
    #[serde(default)]
    pub penalty: f64,
    #[serde(default)]
    pub roles: Option<Vec<String>>,
    #[serde(default)]
    pub domain: Option<String>,
    #[serde(default)]
    pub inviolable: Option<bool>,
    #[serde(default)]
    pub issuer: Option<Issuer>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawAction {
    pub name: String,
    #[serde(default)]
    pub domain: Option<String>,
    /// Name of a world effect; only meaningful in scenario files.
    #[serde(default)]
    pub effect: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNormFile {
    mode: EngineMode,
    #[serde(default)]
    schema: StateSchema,
    norms: Vec<RawNorm>,
    #[serde(default)]
    actions: Vec<RawAction>,
}

/// A validated norm file.
#[derive(Debug, Clone)]
pub struct NormFile {
    pub mode: EngineMode,
    pub schema: StateSchema,
    pub norms: Vec<Norm>,
    pub actions: Vec<(String, DomainId)>,
}

impl NormFile {
    /// Loads every norm and declared action into a fresh store.
    pub fn store(&self) -> Result<NormStore, EngineError> {
        let mut store = NormStore::new(self.mode);
        for norm in &self.norms {
            store.add_norm(norm.clone())?;
        }
        for (name, domain) in &self.actions {
            store.register_action(name, domain.clone())?;
        }
        Ok(store)
    }

    /// Checks one action with `bindings` as agent facts and the builtin
    /// functions. When the file declares no actions, the queried action
    /// counts as regulated in `domain`.
    pub fn check(
        &self,
        action: &str,
        domain: &str,
        roles: &BTreeSet<RoleId>,
        bindings: Vec<(String, Value)>,
    ) -> Result<NormativeResponse, String> {
        let mut store = self.store().map_err(|e| e.to_string())?;
        let domain = DomainId::new(domain);
        match store.actions().domain_of(action) {
            Some(d) if *d != domain => {
                return Err(format!("action {action} is registered in domain {d}, not {domain}"))
            }
            Some(_) => {}
            None if self.actions.is_empty() => {
                store
                    .register_action(action, domain.clone())
                    .map_err(|e| e.to_string())?;
            }
            None => {}
        }
        let mut ctx = EvaluationContext::with_functions(Arc::new(FunctionRegistry::with_builtins()));
        for (k, v) in bindings {
            ctx.set_agent(k, v);
        }
        store
            .check_action(&ActionDescriptor::new(action, domain), roles, &ctx)
            .map_err(|e| e.to_string())
    }
}

/// Parses `k=v,k2=v2`. Values are literals of the condition language;
/// commas inside quoted strings do not split.
pub fn parse_bindings(text: &str) -> Result<Vec<(String, Value)>, String> {
    let mut parts = Vec::new();
    let mut current = String::new();
    let mut quoted = false;
    let mut escaped = false;
    for c in text.chars() {
        match c {
            _ if escaped => escaped = false,
            '\\' if quoted => escaped = true,
            '"' => quoted = !quoted,
            ',' if !quoted => {
                parts.push(std::mem::take(&mut current));
                continue;
            }
            _ => {}
        }
        current.push(c);
    }
    parts.push(current);

    let mut out = Vec::new();
    for part in parts {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| format!("binding {part:?} is not key=value"))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(format!("binding {part:?} has an empty name"));
        }
        match parse_lenient(value.trim()) {
            Ok(Expr::Literal(v)) => out.push((key.to_string(), v)),
            Ok(_) => return Err(format!("value of {key} is not a literal")),
            Err(e) => return Err(format!("value of {key}: {e}")),
        }
    }
    Ok(out)
}

pub fn read_document(path: &Path) -> Result<String, LoadError> {
    std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Deserializes a JSON document, rejecting blank input up front.
pub fn from_json<'a, T: Deserialize<'a>>(text: &'a str) -> Result<T, LoadError> {
    if text.trim().is_empty() {
        return Err(LoadError::Format("empty document".into()));
    }
    serde_json::from_str(text).map_err(|e| LoadError::Format(e.to_string()))
}

pub fn load_norm_file(path: &Path) -> Result<NormFile, LoadError> {
    parse_norm_file(&read_document(path)?)
}

/// Parses and validates a norm file; host functions are the builtins.
pub fn parse_norm_file(text: &str) -> Result<NormFile, LoadError> {
    parse_norm_file_with(text, &FunctionRegistry::with_builtins())
}

pub fn parse_norm_file_with(text: &str, host: &FunctionRegistry) -> Result<NormFile, LoadError> {
    let raw: RawNormFile = from_json(text)?;
    let mut report = ValidationReport::default();
    let schema = complete_schema(raw.schema, host, &mut report);
    let norms = compile_norms(text, raw.mode, &schema, &raw.norms, &mut report);
    let actions = compile_actions(&raw.actions, &mut report);
    if !report.is_clean() {
        return Err(LoadError::Validation(report));
    }
    Ok(NormFile {
        mode: raw.mode,
        schema,
        norms,
        actions,
    })
}

/// Adds host functions the schema does not mention, and reports declared
/// functions the host cannot provide.
pub fn complete_schema(
    mut schema: StateSchema,
    host: &FunctionRegistry,
    report: &mut ValidationReport,
) -> StateSchema {
    if let Err(e) = schema.check_unique() {
        report.push(Diagnostic::new(e.to_string()));
    }
    let declared: Vec<(String, usize)> = host
        .signatures()
        .map(|(n, a)| (n.to_string(), a))
        .collect();
    for (name, arity) in &declared {
        if schema.function_arity(name).is_none() && schema.identifier(name).is_none() {
            // cannot clash: checked just above
            let _ = schema.declare_function(name.clone(), *arity);
        }
    }
    for (name, arity) in schema_functions(&schema) {
        match host.get(&name) {
            None => report.push(Diagnostic::new(format!(
                "no host implementation for function {name}"
            ))),
            Some(f) if f.arity() != arity => report.push(Diagnostic::new(format!(
                "function {name} declared with {arity} argument(s), host takes {}",
                f.arity()
            ))),
            Some(_) => {}
        }
    }
    schema
}

fn schema_functions(schema: &StateSchema) -> Vec<(String, usize)> {
    schema
        .functions()
        .map(|(n, a)| (n.to_string(), a))
        .collect()
}

/// Parses, converts and validates raw norms. Findings carry the line where
/// the norm's id appears in `text`.
pub fn compile_norms(
    text: &str,
    mode: EngineMode,
    schema: &StateSchema,
    raw: &[RawNorm],
    report: &mut ValidationReport,
) -> Vec<Norm> {
    let mut norms = Vec::with_capacity(raw.len());
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    for r in raw {
        let nth = seen.entry(r.id.as_str()).or_insert(0);
        let line = id_line(text, &r.id, *nth);
        *nth += 1;
        let mut diag = |msg: String| report.push(Diagnostic::for_norm(&r.id, msg).at_line(line));

        if *seen.get(r.id.as_str()).unwrap() > 1 {
            diag("duplicate norm id".into());
        }
        if !mode.admits(r.deontic_type) {
            diag(format!(
                "mode conflict: {} norm in a {} file",
                r.deontic_type, mode
            ));
        }
        let condition = parse_field("condition", &r.condition, &mut diag);
        let activation = r
            .activation
            .as_ref()
            .map(|src| parse_field("activation", src, &mut diag));
        let (Some(condition), Some(activation)) = (condition, activation.unwrap_or(Some(Expr::literal(true)))) else {
            continue;
        };
        let mut norm = Norm::new(&r.id, r.deontic_type, condition)
            .with_reward(r.reward)
            .with_penalty(r.penalty);
        if r.activation.is_some() {
            norm = norm.with_activation(activation);
        }
        if let Some(roles) = &r.roles {
            norm = norm.with_roles(roles.iter().map(String::as_str));
        }
        if let Some(domain) = &r.domain {
            norm = norm.with_domain(domain.as_str());
        }
        if let Some(inv) = r.inviolable {
            norm = norm.with_inviolable(inv);
        }
        if let Some(issuer) = r.issuer {
            norm = norm.with_issuer(issuer);
        }
        for d in validate_norm(&norm, schema).diagnostics {
            report.push(d.at_line(line));
        }
        norms.push(norm);
    }
    norms
}

fn parse_field(field: &str, source: &str, diag: &mut impl FnMut(String)) -> Option<Expr> {
    match parse_lenient(source) {
        Ok(e) => Some(e),
        Err(err) => {
            diag(format!("{field}: {err}"));
            None
        }
    }
}

pub fn compile_actions(raw: &[RawAction], report: &mut ValidationReport) -> Vec<(String, DomainId)> {
    let mut out: Vec<(String, DomainId)> = Vec::new();
    for a in raw {
        let domain = a
            .domain
            .as_deref()
            .map(DomainId::from)
            .unwrap_or_default();
        if a.name.is_empty() {
            report.push(Diagnostic::new("action with empty name"));
            continue;
        }
        if let Some((_, d)) = out.iter().find(|(n, _)| *n == a.name) {
            if *d != domain {
                report.push(Diagnostic::new(format!(
                    "action {} declared in domains {d} and {domain}",
                    a.name
                )));
            }
            continue;
        }
        out.push((a.name.clone(), domain));
    }
    out
}

/// 1-based line of the `nth` `"id": "<id>"` pair in `text`.
pub fn id_line(text: &str, id: &str, nth: usize) -> Option<usize> {
    let quoted = serde_json::to_string(id).ok()?;
    let mut found = 0;
    let mut from = 0;
    while let Some(rel) = text[from..].find("\"id\"") {
        let key = from + rel;
        from = key + 4;
        let rest = text[from..].trim_start();
        let Some(rest) = rest.strip_prefix(':') else {
            continue;
        };
        if rest.trim_start().starts_with(&quoted) {
            if found == nth {
                return Some(text[..key].matches('\n').count() + 1);
            }
            found += 1;
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norm::RegulatoryStatus;

    const TAXI: &str = r#"{
  "mode": "prohibition",
  "schema": {"identifiers": {"taxiCapacity": "number", "NumClientsWaiting": "number",
                             "driverQueuePos": "number", "numTaxisQueue": "number"}},
  "norms": [
    {"id": "respectLine", "type": "prohibition", "condition": "driverQueuePos == 1",
     "activation": "True", "reward": 0, "penalty": -1, "roles": ["DRIVER"],
     "domain": "QUEUE", "inviolable": false, "issuer": "organization"},
    {"id": "respectCapacity", "type": "prohibition",
     "condition": "taxiCapacity >= NumClientsWaiting", "activation": "True",
     "reward": 0, "penalty": -5, "roles": ["DRIVER"], "domain": "PICKING",
     "inviolable": true, "issuer": "organization"}
  ]
}"#;

    #[test]
    fn loads_taxi_norms() {
        let file = parse_norm_file(TAXI).unwrap();
        assert_eq!(file.mode, EngineMode::Prohibition);
        assert_eq!(file.norms.len(), 2);
        assert_eq!(file.norms[0].id, "respectLine");
        assert!(!file.norms[0].inviolable);
        assert_eq!(file.norms[1].penalty, -5.0);
        assert_eq!(file.norms[1].activation, Some(Expr::literal(true)));
        let store = file.store().unwrap();
        assert_eq!(store.len(), 2);
    }

    #[test]
    fn optional_fields_default() {
        let file = parse_norm_file(
            r#"{"mode": "permission", "norms": [{"id": "p", "type": "permission", "condition": "true"}]}"#,
        )
        .unwrap();
        let n = &file.norms[0];
        assert!(n.activation.is_none());
        assert!(n.roles.is_none());
        assert!(n.domain.is_default());
        assert!(n.inviolable);
        assert_eq!(n.issuer, Issuer::Organization);
    }

    #[test]
    fn mixed_types_are_a_mode_conflict() {
        let text = TAXI.replace(
            r#""id": "respectLine", "type": "prohibition""#,
            r#""id": "respectLine", "type": "permission""#,
        );
        let err = parse_norm_file(&text).unwrap_err();
        let LoadError::Validation(report) = err else {
            panic!("expected validation error");
        };
        assert_eq!(report.len(), 1);
        let d = &report.diagnostics[0];
        assert!(d.message.starts_with("mode conflict"), "{d}");
        assert_eq!(d.line, Some(6));
        assert_eq!(d.norm_id.as_deref(), Some("respectLine"));
    }

    #[test]
    fn empty_and_malformed_documents() {
        assert!(matches!(parse_norm_file(""), Err(LoadError::Format(_))));
        assert!(matches!(parse_norm_file("  \n"), Err(LoadError::Format(_))));
        assert!(matches!(parse_norm_file("{"), Err(LoadError::Format(_))));
        assert!(matches!(
            parse_norm_file(r#"{"mode": "prohibition", "norms": [], "extra": 1}"#),
            Err(LoadError::Format(_))
        ));
    }

    #[test]
    fn diagnostics_are_aggregated() {
        let text = r#"{"mode": "prohibition", "norms": [
  {"id": "a", "type": "prohibition", "condition": "a ==", "penalty": -1},
  {"id": "b", "type": "prohibition", "condition": "true", "reward": -2},
  {"id": "a", "type": "prohibition", "condition": "nope", "penalty": -1}
]}"#;
        let LoadError::Validation(report) = parse_norm_file(text).unwrap_err() else {
            panic!()
        };
        let lines: Vec<_> = report.diagnostics.iter().map(|d| (d.line, d.message.clone())).collect();
        assert_eq!(lines[0].0, Some(2));
        assert!(lines[0].1.contains("offset 4"), "{:?}", lines[0]);
        assert_eq!(lines[1], (Some(3), "reward must be ≥ 0".to_string()));
        assert_eq!(lines[2], (Some(4), "duplicate norm id".to_string()));
        assert_eq!(lines[3], (Some(4), "unresolved identifier: nope".to_string()));
        assert_eq!(report.len(), 4);
    }

    #[test]
    fn host_functions() {
        let ok = r#"{"mode": "prohibition", "schema": {"identifiers": {"x": "number"}},
            "norms": [{"id": "n", "type": "prohibition", "condition": "abs(x) < 3"}]}"#;
        assert!(parse_norm_file(ok).is_ok());
        let missing = r#"{"mode": "prohibition", "schema": {"functions": {"queueLength": 0}},
            "norms": [{"id": "n", "type": "prohibition", "condition": "queueLength() < 3"}]}"#;
        let err = parse_norm_file(missing).unwrap_err();
        assert!(err.to_string().contains("no host implementation"), "{err}");
    }

    #[test]
    fn declared_actions_register() {
        let text = TAXI.replace(
            "\n  ]\n}",
            "\n  ],\n  \"actions\": [{\"name\": \"PickClients\", \"domain\": \"PICKING\"}]\n}",
        );
        let file = parse_norm_file(&text).unwrap();
        let store = file.store().unwrap();
        let mut ctx = crate::dsl::EvaluationContext::new();
        ctx.set_agent("taxiCapacity", 4i64).set_env("NumClientsWaiting", 6i64);
        let roles = [crate::norm::RoleId::new("DRIVER")].into_iter().collect();
        let resp = store
            .check_action(
                &crate::norm::ActionDescriptor::new("PickClients", "PICKING"),
                &roles,
                &ctx,
            )
            .unwrap();
        assert_eq!(resp.status, RegulatoryStatus::Inviolable);
    }

    #[test]
    fn id_lines() {
        let text = "{\n\"id\": \"a\",\n\"id\" : \"b\",\n\"id\":\"a\"}";
        assert_eq!(id_line(text, "a", 0), Some(2));
        assert_eq!(id_line(text, "b", 0), Some(3));
        assert_eq!(id_line(text, "a", 1), Some(4));
        assert_eq!(id_line(text, "c", 0), None);
    }
}
