//! State schemas and norm validation.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{Expr, ValueTag};
use crate::norm::Norm;

/// Identifiers and host functions a norm's expressions may reference.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSchema {
    #[serde(default)]
    identifiers: BTreeMap<String, ValueTag>,
    /// function name -> arity
    #[serde(default)]
    functions: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("name {0:?} declared more than once in the state schema")]
pub struct DuplicateNameError(pub String);

impl StateSchema {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn declare_identifier(
        &mut self,
        name: impl Into<String>,
        tag: ValueTag,
    ) -> Result<&mut Self, DuplicateNameError> {
        let name = name.into();
        if self.identifiers.contains_key(&name) || self.functions.contains_key(&name) {
            return Err(DuplicateNameError(name));
        }
        self.identifiers.insert(name, tag);
        Ok(self)
    }

    pub fn declare_function(
        &mut self,
        name: impl Into<String>,
        arity: usize,
    ) -> Result<&mut Self, DuplicateNameError> {
        let name = name.into();
        if self.identifiers.contains_key(&name) || self.functions.contains_key(&name) {
            return Err(DuplicateNameError(name));
        }
        self.functions.insert(name, arity);
        Ok(self)
    }

    /// Deserialized schemas keep identifiers and functions in separate maps,
    /// so a name can appear in both; this reports such clashes.
    pub fn check_unique(&self) -> Result<(), DuplicateNameError> {
        match self.identifiers.keys().find(|k| self.functions.contains_key(*k)) {
            Some(name) => Err(DuplicateNameError(name.clone())),
            None => Ok(()),
        }
    }

    pub fn identifier(&self, name: &str) -> Option<ValueTag> {
        self.identifiers.get(name).copied()
    }

    pub fn function_arity(&self, name: &str) -> Option<usize> {
        self.functions.get(name).copied()
    }

    pub fn identifiers(&self) -> impl Iterator<Item = (&str, ValueTag)> {
        self.identifiers.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn functions(&self) -> impl Iterator<Item = (&str, usize)> {
        self.functions.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

/// One validation finding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub norm_id: Option<String>,
    pub message: String,
    /// 1-based line in the source document, when known.
    pub line: Option<usize>,
}

impl Diagnostic {
    pub fn new(message: impl Into<String>) -> Self {
        Diagnostic {
            norm_id: None,
            message: message.into(),
            line: None,
        }
    }

    pub fn for_norm(norm_id: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic {
            norm_id: Some(norm_id.into()),
            message: message.into(),
            line: None,
        }
    }

    pub fn at_line(mut self, line: Option<usize>) -> Self {
        self.line = line;
        self
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(line) = self.line {
            write!(f, "line {line}: ")?;
        }
        if let Some(id) = &self.norm_id {
            write!(f, "norm {id:?}: ")?;
        }
        f.write_str(&self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub diagnostics: Vec<Diagnostic>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.diagnostics.is_empty()
    }

    pub fn push(&mut self, d: Diagnostic) {
        self.diagnostics.push(d);
    }

    pub fn extend(&mut self, other: ValidationReport) {
        self.diagnostics.extend(other.diagnostics);
    }

    pub fn len(&self) -> usize {
        self.diagnostics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diagnostics.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.diagnostics.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

/// Checks a norm's field invariants and resolves every identifier and call in
/// its expressions against `schema`. Never fails; findings go in the report.
pub fn validate_norm(norm: &Norm, schema: &StateSchema) -> ValidationReport {
    let mut report = ValidationReport::default();
    let id = norm.id.as_str();
    let mut diag = |msg: String| report.push(Diagnostic::for_norm(id, msg));

    if norm.id.is_empty() {
        diag("empty id".into());
    } else if norm.id.chars().any(char::is_whitespace) {
        diag("id contains whitespace".into());
    }
    if !norm.reward.is_finite() {
        diag("reward must be finite".into());
    } else if norm.reward < 0.0 {
        diag("reward must be ≥ 0".into());
    }
    if !norm.penalty.is_finite() {
        diag("penalty must be finite".into());
    } else if norm.penalty > 0.0 {
        diag("penalty must be ≤ 0".into());
    }
    if norm.roles.as_ref().is_some_and(|r| r.is_empty()) {
        diag("empty role set".into());
    }
    if norm.domain.as_str().is_empty() {
        diag("empty domain".into());
    }

    let exprs: Vec<&Expr> = std::iter::once(&norm.condition)
        .chain(norm.activation.as_ref())
        .collect();
    for expr in exprs {
        for name in expr.identifiers() {
            if schema.identifier(name).is_none() {
                diag(format!("unresolved identifier: {name}"));
            }
        }
        for (name, arity) in expr.calls() {
            match schema.function_arity(name) {
                None => diag(format!("unknown function: {name}")),
                Some(expected) if expected != arity => diag(format!(
                    "function {name} expects {expected} argument(s), called with {arity}"
                )),
                Some(_) => {}
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_lenient, parse_source};
    use crate::norm::Issuer;

    fn taxi_schema() -> StateSchema {
        let mut s = StateSchema::new();
        for name in [
            "taxiCapacity",
            "NumClientsWaiting",
            "driverQueuePos",
            "numTaxisQueue",
        ] {
            s.declare_identifier(name, ValueTag::Number).unwrap();
        }
        s
    }

    fn respect_capacity() -> Norm {
        Norm::prohibition(
            "respectCapacity",
            parse_source("taxiCapacity >= NumClientsWaiting").unwrap(),
        )
        .with_activation(parse_lenient("True").unwrap())
        .with_reward(0.0)
        .with_penalty(-5.0)
        .with_roles(["DRIVER"])
        .with_domain("PICKING")
        .with_inviolable(true)
        .with_issuer(Issuer::Organization)
    }

    #[test]
    fn capacity_norm_is_clean() {
        assert!(validate_norm(&respect_capacity(), &taxi_schema()).is_clean());
    }

    #[test]
    fn empty_id() {
        let mut n = respect_capacity();
        n.id = String::new();
        let report = validate_norm(&n, &taxi_schema());
        assert_eq!(report.len(), 1);
        assert_eq!(report.diagnostics[0].message, "empty id");
    }

    #[test]
    fn undeclared_identifier() {
        let n = Norm::prohibition(
            "respectLine",
            parse_source("driverQueuePoz == numTaxisQueue").unwrap(),
        )
        .with_penalty(-1.0);
        let report = validate_norm(&n, &taxi_schema());
        assert_eq!(report.len(), 1);
        assert!(report.diagnostics[0]
            .message
            .starts_with("unresolved identifier"));
    }

    #[test]
    fn sign_and_role_rules() {
        let n = respect_capacity()
            .with_reward(-2.0)
            .with_penalty(1.0)
            .with_roles(Vec::<&str>::new());
        let msgs: Vec<_> = validate_norm(&n, &taxi_schema())
            .diagnostics
            .into_iter()
            .map(|d| d.message)
            .collect();
        assert_eq!(
            msgs,
            vec!["reward must be ≥ 0", "penalty must be ≤ 0", "empty role set"]
        );
    }

    #[test]
    fn whitespace_id_and_non_finite() {
        let mut n = respect_capacity().with_penalty(f64::NEG_INFINITY);
        n.id = "respect capacity".into();
        let report = validate_norm(&n, &taxi_schema());
        assert_eq!(report.len(), 2);
    }

    #[test]
    fn function_resolution() {
        let mut schema = taxi_schema();
        schema.declare_function("queueLength", 0).unwrap();
        let ok = Norm::prohibition("q", parse_source("queueLength() < 10").unwrap());
        assert!(validate_norm(&ok, &schema).is_clean());
        let bad = Norm::prohibition("q", parse_source("queueLength(1) < f()").unwrap());
        assert_eq!(validate_norm(&bad, &schema).len(), 2);
    }

    #[test]
    fn schema_names_unique() {
        let mut s = StateSchema::new();
        s.declare_identifier("x", ValueTag::Number).unwrap();
        assert!(s.declare_function("x", 0).is_err());
        assert!(s.declare_identifier("x", ValueTag::Boolean).is_err());

        let parsed: StateSchema = serde_json::from_str(
            r#"{"identifiers": {"x": "number"}, "functions": {"x": 1}}"#,
        )
        .unwrap();
        assert_eq!(parsed.check_unique(), Err(DuplicateNameError("x".into())));
    }
}
