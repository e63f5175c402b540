//! Norm data model and verdict vocabulary.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dsl::{evaluate, EvalError, EvaluationContext, Expr, Value};
use crate::engine::EngineMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeonticType {
    Prohibition,
    Permission,
}

impl fmt::Display for DeonticType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DeonticType::Prohibition => "PROHIBITION",
            DeonticType::Permission => "PERMISSION",
        })
    }
}

/// Who issued a norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Issuer {
    /// A private norm, also called a concern.
    #[serde(rename = "self")]
    SelfIssued,
    Society,
    Organization,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RoleId(String);

impl RoleId {
    pub fn new(name: impl Into<String>) -> Self {
        RoleId(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for RoleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for RoleId {
    fn from(s: &str) -> Self {
        RoleId::new(s)
    }
}

/// Action/norm category. `DEFAULT` on a norm matches every action domain.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DomainId(String);

impl DomainId {
    pub const DEFAULT_NAME: &'static str = "DEFAULT";

    pub fn new(name: impl Into<String>) -> Self {
        DomainId(name.into())
    }

    pub fn default_domain() -> Self {
        DomainId(Self::DEFAULT_NAME.to_string())
    }

    pub fn is_default(&self) -> bool {
        self.0 == Self::DEFAULT_NAME
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl Default for DomainId {
    fn default() -> Self {
        Self::default_domain()
    }
}

impl fmt::Display for DomainId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for DomainId {
    fn from(s: &str) -> Self {
        DomainId::new(s)
    }
}

/// A deontic rule.
///
/// `condition` states what must hold for the regulated action to be compliant;
/// `activation` (when present) decides whether the norm applies at all.
/// Rewards are credited on compliance and are non-negative; penalties are
/// charged on violation and are non-positive.
#[derive(Debug, Clone, PartialEq)]
pub struct Norm {
    pub id: String,
    pub deontic_type: DeonticType,
    pub condition: Expr,
    pub activation: Option<Expr>,
    pub reward: f64,
    pub penalty: f64,
    /// `None` affects every role.
    pub roles: Option<BTreeSet<RoleId>>,
    pub domain: DomainId,
    pub inviolable: bool,
    pub issuer: Issuer,
}

impl Norm {
    pub fn new(id: impl Into<String>, deontic_type: DeonticType, condition: Expr) -> Self {
        Norm {
            id: id.into(),
            deontic_type,
            condition,
            activation: None,
            reward: 0.0,
            penalty: 0.0,
            roles: None,
            domain: DomainId::default(),
            inviolable: true,
            issuer: Issuer::Organization,
        }
    }

    pub fn prohibition(id: impl Into<String>, condition: Expr) -> Self {
        Self::new(id, DeonticType::Prohibition, condition)
    }

    pub fn permission(id: impl Into<String>, condition: Expr) -> Self {
        Self::new(id, DeonticType::Permission, condition)
    }

    pub fn with_activation(mut self, activation: Expr) -> Self {
        self.activation = Some(activation);
        self
    }

    pub fn with_reward(mut self, reward: f64) -> Self {
        self.reward = reward;
        self
    }

    pub fn with_penalty(mut self, penalty: f64) -> Self {
        self.penalty = penalty;
        self
    }

    pub fn with_roles<I, R>(mut self, roles: I) -> Self
    where
        I: IntoIterator<Item = R>,
        R: Into<RoleId>,
    {
        self.roles = Some(roles.into_iter().map(Into::into).collect());
        self
    }

    pub fn with_domain(mut self, domain: impl Into<DomainId>) -> Self {
        self.domain = domain.into();
        self
    }

    pub fn with_inviolable(mut self, inviolable: bool) -> Self {
        self.inviolable = inviolable;
        self
    }

    pub fn with_issuer(mut self, issuer: Issuer) -> Self {
        self.issuer = issuer;
        self
    }
}

/// An action an agent proposes to perform.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionDescriptor {
    pub name: String,
    pub domain: DomainId,
    pub params: Vec<(String, Value)>,
}

impl ActionDescriptor {
    pub fn new(name: impl Into<String>, domain: impl Into<DomainId>) -> Self {
        ActionDescriptor {
            name: name.into(),
            domain: domain.into(),
            params: Vec::new(),
        }
    }

    pub fn with_param(mut self, name: impl Into<String>, value: impl Into<Value>) -> Self {
        self.params.push((name.into(), value.into()));
        self
    }

    pub fn param(&self, name: &str) -> Option<&Value> {
        self.params.iter().find(|(k, _)| k == name).map(|(_, v)| v)
    }
}

/// True iff the norm's domain and role filters admit the action and agent.
pub fn matches(norm: &Norm, action: &ActionDescriptor, agent_roles: &BTreeSet<RoleId>) -> bool {
    let domain_ok = norm.domain.is_default() || norm.domain == action.domain;
    let roles_ok = match &norm.roles {
        None => true,
        Some(roles) => roles.iter().any(|r| agent_roles.contains(r)),
    };
    domain_ok && roles_ok
}

fn eval_bool(expr: &Expr, ctx: &EvaluationContext) -> Result<bool, EvalError> {
    match evaluate(expr, ctx)? {
        Value::Bool(b) => Ok(b),
        other => Err(EvalError::TypeMismatch {
            detail: format!("expected boolean result, got {}", other.tag()),
            node: expr.clone(),
        }),
    }
}

pub fn is_active(norm: &Norm, ctx: &EvaluationContext) -> Result<bool, EvalError> {
    match &norm.activation {
        None => Ok(true),
        Some(expr) => eval_bool(expr, ctx),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ComplianceOutcome {
    Complies,
    Violates,
}

/// Evaluates the compliance condition. For a permission a `Complies` outcome
/// means the action is covered by it.
pub fn evaluate_compliance(
    norm: &Norm,
    ctx: &EvaluationContext,
) -> Result<ComplianceOutcome, EvalError> {
    Ok(if eval_bool(&norm.condition, ctx)? {
        ComplianceOutcome::Complies
    } else {
        ComplianceOutcome::Violates
    })
}

/// Verdict of the normative engine, ordered by severity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RegulatoryStatus {
    NotRegulated,
    Allowed,
    Forbidden,
    Inviolable,
}

impl RegulatoryStatus {
    pub const ALL: [RegulatoryStatus; 4] = [
        RegulatoryStatus::NotRegulated,
        RegulatoryStatus::Allowed,
        RegulatoryStatus::Forbidden,
        RegulatoryStatus::Inviolable,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RegulatoryStatus::NotRegulated => "NOT_REGULATED",
            RegulatoryStatus::Allowed => "ALLOWED",
            RegulatoryStatus::Forbidden => "FORBIDDEN",
            RegulatoryStatus::Inviolable => "INVIOLABLE",
        }
    }
}

impl fmt::Display for RegulatoryStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormativeResponse {
    pub status: RegulatoryStatus,
    pub allowing: Vec<String>,
    pub forbidding: Vec<String>,
    pub total_reward: f64,
    pub total_penalty: f64,
}

impl NormativeResponse {
    pub fn not_regulated() -> Self {
        NormativeResponse {
            status: RegulatoryStatus::NotRegulated,
            allowing: Vec::new(),
            forbidding: Vec::new(),
            total_reward: 0.0,
            total_penalty: 0.0,
        }
    }

    /// Checks the status/list/total coherence rules. `inviolable_ids` are the
    /// ids among `forbidding` whose norm is inviolable.
    ///
    /// In permission mode a FORBIDDEN verdict names no norm: nothing permits
    /// the action and nothing was violated.
    pub fn check_coherence(
        &self,
        mode: EngineMode,
        inviolable_ids: &BTreeSet<&str>,
    ) -> Result<(), String> {
        use RegulatoryStatus::*;
        if self.status == NotRegulated
            && (!self.allowing.is_empty()
                || !self.forbidding.is_empty()
                || self.total_reward != 0.0
                || self.total_penalty != 0.0)
        {
            return Err("NOT_REGULATED response carries norms or totals".into());
        }
        let blocked = matches!(self.status, Forbidden | Inviolable);
        match mode {
            EngineMode::Prohibition => {
                if blocked == self.forbidding.is_empty() {
                    return Err(format!(
                        "status {} inconsistent with {} forbidding norm(s)",
                        self.status,
                        self.forbidding.len()
                    ));
                }
            }
            EngineMode::Permission => {
                if !self.forbidding.is_empty() || self.total_penalty != 0.0 {
                    return Err("permission verdicts never list violated norms".into());
                }
                if self.status == Forbidden && !self.allowing.is_empty() {
                    return Err("FORBIDDEN permission verdict lists allowing norms".into());
                }
                if self.status == Allowed && self.allowing.is_empty() {
                    return Err("ALLOWED permission verdict without a permitting norm".into());
                }
            }
        }
        let has_inviolable = self
            .forbidding
            .iter()
            .any(|id| inviolable_ids.contains(id.as_str()));
        if (self.status == Inviolable) != has_inviolable {
            return Err("INVIOLABLE status must coincide with an inviolable violated norm".into());
        }
        if !(self.total_penalty <= 0.0 && self.total_reward >= 0.0) {
            return Err(format!(
                "totals out of sign: reward {} penalty {}",
                self.total_reward, self.total_penalty
            ));
        }
        Ok(())
    }
}
