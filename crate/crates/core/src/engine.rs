//! The normative engine: an indexed norm store that turns a proposed action
//! into a [`NormativeResponse`].

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{EvalError, EvaluationContext};
use crate::norm::{
    evaluate_compliance, is_active, matches, ActionDescriptor, ComplianceOutcome, DeonticType,
    DomainId, Norm, NormativeResponse, RegulatoryStatus, RoleId,
};

/// Whether unregulated behaviour is permitted (prohibition mode) or
/// forbidden (permission mode). Fixed for the lifetime of a store.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineMode {
    Prohibition,
    Permission,
}

impl EngineMode {
    pub fn deontic_type(self) -> DeonticType {
        match self {
            EngineMode::Prohibition => DeonticType::Prohibition,
            EngineMode::Permission => DeonticType::Permission,
        }
    }

    pub fn admits(self, t: DeonticType) -> bool {
        self.deontic_type() == t
    }
}

impl fmt::Display for EngineMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EngineMode::Prohibition => "PROHIBITION_MODE",
            EngineMode::Permission => "PERMISSION_MODE",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("mode conflict: {deontic_type} norm {id:?} cannot be added in {mode}")]
    ModeConflict {
        id: String,
        deontic_type: DeonticType,
        mode: EngineMode,
    },
    #[error("duplicate norm id {0:?}")]
    DuplicateId(String),
    #[error("action {name:?} already registered in domain {existing}, not {requested}")]
    DuplicateAction {
        name: String,
        existing: DomainId,
        requested: DomainId,
    },
    #[error("action name must not be empty")]
    EmptyActionName,
}

/// Evaluation failure of a specific norm during a check.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("norm {norm_id:?}: {error}")]
pub struct CheckError {
    pub norm_id: String,
    #[source]
    pub error: EvalError,
}

/// Names of the regulated actions and the domain each belongs to.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ActionRegistry {
    actions: BTreeMap<String, DomainId>,
}

impl ActionRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Idempotent for an identical (name, domain) pair.
    pub fn register(&mut self, name: &str, domain: DomainId) -> Result<(), EngineError> {
        if name.is_empty() {
            return Err(EngineError::EmptyActionName);
        }
        match self.actions.get(name) {
            Some(existing) if *existing != domain => Err(EngineError::DuplicateAction {
                name: name.to_string(),
                existing: existing.clone(),
                requested: domain,
            }),
            Some(_) => Ok(()),
            None => {
                self.actions.insert(name.to_string(), domain);
                Ok(())
            }
        }
    }

    pub fn contains(&self, name: &str) -> bool {
        self.actions.contains_key(name)
    }

    pub fn domain_of(&self, name: &str) -> Option<&DomainId> {
        self.actions.get(name)
    }

    /// Descriptor for a registered action, with no parameters.
    pub fn describe(&self, name: &str) -> Option<ActionDescriptor> {
        self.domain_of(name)
            .map(|d| ActionDescriptor::new(name, d.clone()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &DomainId)> {
        self.actions.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// Norms in insertion order, indexed by domain and role.
#[derive(Debug, Clone)]
pub struct NormStore {
    mode: EngineMode,
    norms: Vec<Arc<Norm>>,
    ids: HashMap<String, usize>,
    by_domain: BTreeMap<DomainId, Vec<usize>>,
    by_role: BTreeMap<RoleId, Vec<usize>>,
    /// norms with no role restriction
    any_role: Vec<usize>,
    actions: ActionRegistry,
}

impl NormStore {
    pub fn new(mode: EngineMode) -> Self {
        NormStore {
            mode,
            norms: Vec::new(),
            ids: HashMap::new(),
            by_domain: BTreeMap::new(),
            by_role: BTreeMap::new(),
            any_role: Vec::new(),
            actions: ActionRegistry::new(),
        }
    }

    pub fn mode(&self) -> EngineMode {
        self.mode
    }

    pub fn add_norm(&mut self, norm: Norm) -> Result<(), EngineError> {
        if !self.mode.admits(norm.deontic_type) {
            return Err(EngineError::ModeConflict {
                id: norm.id,
                deontic_type: norm.deontic_type,
                mode: self.mode,
            });
        }
        if self.ids.contains_key(&norm.id) {
            return Err(EngineError::DuplicateId(norm.id));
        }
        let idx = self.norms.len();
        self.ids.insert(norm.id.clone(), idx);
        self.by_domain.entry(norm.domain.clone()).or_default().push(idx);
        match &norm.roles {
            None => self.any_role.push(idx),
            Some(roles) => {
                for role in roles {
                    self.by_role.entry(role.clone()).or_default().push(idx);
                }
            }
        }
        self.norms.push(Arc::new(norm));
        Ok(())
    }

    pub fn register_action(&mut self, name: &str, domain: impl Into<DomainId>) -> Result<(), EngineError> {
        self.actions.register(name, domain.into())
    }

    pub fn actions(&self) -> &ActionRegistry {
        &self.actions
    }

    pub fn contains_id(&self, id: &str) -> bool {
        self.ids.contains_key(id)
    }

    pub fn get(&self, id: &str) -> Option<&Norm> {
        self.ids.get(id).map(|&i| &*self.norms[i])
    }

    pub fn norms(&self) -> impl ExactSizeIterator<Item = &Norm> {
        self.norms.iter().map(|n| &**n)
    }

    pub fn len(&self) -> usize {
        self.norms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.norms.is_empty()
    }

    /// Norms whose domain and role filters admit the action, in insertion
    /// order. Uses the indexes rather than scanning.
    pub fn filter_candidates(
        &self,
        action: &ActionDescriptor,
        agent_roles: &BTreeSet<RoleId>,
    ) -> Vec<&Norm> {
        let mut idx: Vec<usize> = Vec::new();
        if let Some(bucket) = self.by_domain.get(&action.domain) {
            idx.extend(bucket);
        }
        if !action.domain.is_default() {
            if let Some(bucket) = self.by_domain.get(&DomainId::default_domain()) {
                idx.extend(bucket);
            }
        }
        if idx.is_empty() {
            return Vec::new();
        }
        idx.sort_unstable();
        idx.dedup();

        let mut role_ok: HashSet<usize> = self.any_role.iter().copied().collect();
        for role in agent_roles {
            if let Some(bucket) = self.by_role.get(role) {
                role_ok.extend(bucket);
            }
        }
        idx.into_iter()
            .filter(|i| role_ok.contains(i))
            .map(|i| &*self.norms[i])
            .collect()
    }

    pub fn check_action(
        &self,
        action: &ActionDescriptor,
        agent_roles: &BTreeSet<RoleId>,
        ctx: &EvaluationContext,
    ) -> Result<NormativeResponse, CheckError> {
        if !self.actions.contains(&action.name) {
            return Ok(NormativeResponse::not_regulated());
        }
        verdict(self.mode, self.filter_candidates(action, agent_roles), ctx)
    }
}

/// Aggregates a verdict over already-filtered candidates. Inactive norms are
/// dropped; evaluation stops at the first failing norm.
pub(crate) fn verdict<'n>(
    mode: EngineMode,
    candidates: impl IntoIterator<Item = &'n Norm>,
    ctx: &EvaluationContext,
) -> Result<NormativeResponse, CheckError> {
    let wrap = |norm: &Norm| {
        let id = norm.id.clone();
        move |error| CheckError { norm_id: id, error }
    };
    let mut any_active = false;
    let mut complied: Vec<&Norm> = Vec::new();
    let mut violated: Vec<&Norm> = Vec::new();
    for norm in candidates {
        if !is_active(norm, ctx).map_err(wrap(norm))? {
            continue;
        }
        any_active = true;
        match evaluate_compliance(norm, ctx).map_err(wrap(norm))? {
            ComplianceOutcome::Complies => complied.push(norm),
            ComplianceOutcome::Violates => violated.push(norm),
        }
    }
    if !any_active {
        return Ok(NormativeResponse::not_regulated());
    }

    let total_reward = complied.iter().fold(0.0, |acc, n| acc + n.reward);
    let allowing = complied.iter().map(|n| n.id.clone()).collect::<Vec<_>>();
    Ok(match mode {
        EngineMode::Prohibition => {
            let status = if violated.iter().any(|n| n.inviolable) {
                RegulatoryStatus::Inviolable
            } else if !violated.is_empty() {
                RegulatoryStatus::Forbidden
            } else {
                RegulatoryStatus::Allowed
            };
            NormativeResponse {
                status,
                allowing,
                forbidding: violated.iter().map(|n| n.id.clone()).collect(),
                total_reward,
                total_penalty: violated.iter().fold(0.0, |acc, n| acc + n.penalty),
            }
        }
        EngineMode::Permission => NormativeResponse {
            status: if allowing.is_empty() {
                RegulatoryStatus::Forbidden
            } else {
                RegulatoryStatus::Allowed
            },
            allowing,
            forbidding: Vec::new(),
            total_reward,
            total_penalty: 0.0,
        },
    })
}

/// Unindexed reference implementation of [`NormStore::check_action`]: one
/// pass over `all_norms` applying the filter and evaluation rules directly.
/// Kept as an oracle for equivalence testing.
pub fn brute_force_check<'n>(
    all_norms: impl IntoIterator<Item = &'n Norm>,
    mode: EngineMode,
    regulated: &ActionRegistry,
    action: &ActionDescriptor,
    agent_roles: &BTreeSet<RoleId>,
    ctx: &EvaluationContext,
) -> Result<NormativeResponse, CheckError> {
    let mut response = NormativeResponse::not_regulated();
    if !regulated.contains(&action.name) {
        return Ok(response);
    }
    let mut active = 0usize;
    let mut inviolable_hit = false;
    for norm in all_norms {
        if !matches(norm, action, agent_roles) {
            continue;
        }
        let fail = |error| CheckError {
            norm_id: norm.id.clone(),
            error,
        };
        if !is_active(norm, ctx).map_err(fail)? {
            continue;
        }
        active += 1;
        let outcome = evaluate_compliance(norm, ctx).map_err(|error| CheckError {
            norm_id: norm.id.clone(),
            error,
        })?;
        match (outcome, mode) {
            (ComplianceOutcome::Complies, _) => {
                response.allowing.push(norm.id.clone());
                response.total_reward += norm.reward;
            }
            (ComplianceOutcome::Violates, EngineMode::Prohibition) => {
                response.forbidding.push(norm.id.clone());
                response.total_penalty += norm.penalty;
                inviolable_hit |= norm.inviolable;
            }
            (ComplianceOutcome::Violates, EngineMode::Permission) => {}
        }
    }
    response.status = match (active, mode) {
        (0, _) => RegulatoryStatus::NotRegulated,
        (_, EngineMode::Prohibition) if inviolable_hit => RegulatoryStatus::Inviolable,
        (_, EngineMode::Prohibition) if !response.forbidding.is_empty() => {
            RegulatoryStatus::Forbidden
        }
        (_, EngineMode::Permission) if response.allowing.is_empty() => RegulatoryStatus::Forbidden,
        _ => RegulatoryStatus::Allowed,
    };
    Ok(response)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_source, Expr};

    fn respect_line() -> Norm {
        Norm::prohibition("respectLine", parse_source("driverQueuePos == 1").unwrap())
            .with_penalty(-1.0)
            .with_roles(["DRIVER"])
            .with_domain("QUEUE")
            .with_inviolable(false)
    }

    fn respect_capacity() -> Norm {
        Norm::prohibition(
            "respectCapacity",
            parse_source("taxiCapacity >= NumClientsWaiting").unwrap(),
        )
        .with_activation(Expr::literal(true))
        .with_penalty(-5.0)
        .with_roles(["DRIVER"])
        .with_domain("PICKING")
    }

    fn taxi_store() -> NormStore {
        let mut store = NormStore::new(EngineMode::Prohibition);
        store.add_norm(respect_line()).unwrap();
        store.add_norm(respect_capacity()).unwrap();
        store.register_action("PickClients", "PICKING").unwrap();
        store.register_action("Queue", "QUEUE").unwrap();
        store
    }

    fn driver() -> BTreeSet<RoleId> {
        [RoleId::new("DRIVER")].into_iter().collect()
    }

    #[test]
    fn mode_conflict() {
        let mut store = NormStore::new(EngineMode::Prohibition);
        let err = store
            .add_norm(Norm::permission("p", Expr::literal(true)))
            .unwrap_err();
        assert!(matches!(err, EngineError::ModeConflict { .. }));
        assert!(err.to_string().starts_with("mode conflict"));
        assert!(store.is_empty());
    }

    #[test]
    fn insertion_order_and_duplicates() {
        let mut store = taxi_store();
        let ids: Vec<_> = store.norms().map(|n| n.id.as_str()).collect();
        assert_eq!(ids, ["respectLine", "respectCapacity"]);
        assert_eq!(
            store.add_norm(respect_line()),
            Err(EngineError::DuplicateId("respectLine".into()))
        );
        assert_eq!(store.len(), 2);
    }

    #[test]
    fn action_registration() {
        let mut store = taxi_store();
        assert_eq!(store.register_action("Queue", "QUEUE"), Ok(()));
        assert!(matches!(
            store.register_action("Queue", "PICKING"),
            Err(EngineError::DuplicateAction { .. })
        ));
        assert_eq!(store.register_action("", "X"), Err(EngineError::EmptyActionName));
        assert_eq!(
            store.actions().domain_of("PickClients"),
            Some(&DomainId::new("PICKING"))
        );
    }

    #[test]
    fn candidates_filtered_by_domain_and_role() {
        let store = taxi_store();
        let pick = ActionDescriptor::new("PickClients", "PICKING");
        let ids: Vec<_> = store
            .filter_candidates(&pick, &driver())
            .into_iter()
            .map(|n| n.id.as_str())
            .collect();
        assert_eq!(ids, ["respectCapacity"]);
        let customer = [RoleId::new("CUSTOMER")].into_iter().collect();
        assert!(store.filter_candidates(&pick, &customer).is_empty());
    }

    #[test]
    fn default_domain_norms_apply_everywhere() {
        let mut store = taxi_store();
        store
            .add_norm(Norm::prohibition("global", Expr::literal(true)))
            .unwrap();
        let pick = ActionDescriptor::new("PickClients", "PICKING");
        let ids: Vec<_> = store
            .filter_candidates(&pick, &BTreeSet::new())
            .into_iter()
            .map(|n| n.id.as_str())
            .collect();
        assert_eq!(ids, ["global"]);
    }

    #[test]
    fn capacity_verdict() {
        let store = taxi_store();
        let mut ctx = EvaluationContext::new();
        ctx.set_agent("taxiCapacity", 4i64).set_env("NumClientsWaiting", 6i64);
        let pick = ActionDescriptor::new("PickClients", "PICKING");
        let r = store.check_action(&pick, &driver(), &ctx).unwrap();
        assert_eq!(r.status, RegulatoryStatus::Inviolable);
        assert_eq!(r.forbidding, ["respectCapacity"]);
        assert_eq!(r.total_penalty, -5.0);
        assert_eq!(r.total_reward, 0.0);
        assert!(r.allowing.is_empty());

        ctx.set_env("NumClientsWaiting", 3i64);
        let r = store.check_action(&pick, &driver(), &ctx).unwrap();
        assert_eq!(r.status, RegulatoryStatus::Allowed);
        assert_eq!(r.allowing, ["respectCapacity"]);
    }

    #[test]
    fn queue_jump_verdict() {
        let store = taxi_store();
        let mut ctx = EvaluationContext::new();
        ctx.set_agent("driverQueuePos", 3i64);
        let jump = ActionDescriptor::new("Queue", "QUEUE");
        let r = store.check_action(&jump, &driver(), &ctx).unwrap();
        assert_eq!(r.status, RegulatoryStatus::Forbidden);
        assert_eq!(r.forbidding, ["respectLine"]);
        assert_eq!(r.total_penalty, -1.0);
    }

    #[test]
    fn unregistered_action() {
        let store = taxi_store();
        let r = store
            .check_action(&ActionDescriptor::new("Sing", "PICKING"), &driver(), &EvaluationContext::new())
            .unwrap();
        assert_eq!(r, NormativeResponse::not_regulated());
    }

    #[test]
    fn errors_carry_norm_id() {
        let store = taxi_store();
        let err = store
            .check_action(
                &ActionDescriptor::new("PickClients", "PICKING"),
                &driver(),
                &EvaluationContext::new(),
            )
            .unwrap_err();
        assert_eq!(err.norm_id, "respectCapacity");
        assert_eq!(err.error.kind(), "UnresolvedIdentifier");
    }

    #[test]
    fn inactive_norms_are_absent() {
        let mut store = NormStore::new(EngineMode::Prohibition);
        store
            .add_norm(
                Norm::prohibition("off", Expr::literal(false))
                    .with_activation(Expr::literal(false)),
            )
            .unwrap();
        store.register_action("A", "DEFAULT").unwrap();
        let r = store
            .check_action(&ActionDescriptor::new("A", "DEFAULT"), &BTreeSet::new(), &EvaluationContext::new())
            .unwrap();
        assert_eq!(r.status, RegulatoryStatus::NotRegulated);
    }

    #[test]
    fn permission_mode() {
        let mut store = NormStore::new(EngineMode::Permission);
        store
            .add_norm(
                Norm::permission("mayPick", parse_source("seats > 0").unwrap())
                    .with_reward(2.0)
                    .with_domain("PICKING"),
            )
            .unwrap();
        store.register_action("PickClients", "PICKING").unwrap();
        let pick = ActionDescriptor::new("PickClients", "PICKING");
        let mut ctx = EvaluationContext::new();
        ctx.set_env("seats", 1i64);
        let r = store.check_action(&pick, &BTreeSet::new(), &ctx).unwrap();
        assert_eq!(r.status, RegulatoryStatus::Allowed);
        assert_eq!(r.total_reward, 2.0);
        ctx.set_env("seats", 0i64);
        let r = store.check_action(&pick, &BTreeSet::new(), &ctx).unwrap();
        assert_eq!(r.status, RegulatoryStatus::Forbidden);
        assert!(r.forbidding.is_empty());
        assert_eq!(r.total_penalty, 0.0);
        assert_eq!(r.total_reward, 0.0);
    }

    #[test]
    fn brute_force_matches_on_fixture() {
        let store = taxi_store();
        let mut ctx = EvaluationContext::new();
        ctx.set_agent("taxiCapacity", 4i64).set_env("NumClientsWaiting", 6i64);
        let pick = ActionDescriptor::new("PickClients", "PICKING");
        let indexed = store.check_action(&pick, &driver(), &ctx).unwrap();
        let oracle =
            brute_force_check(store.norms(), store.mode(), store.actions(), &pick, &driver(), &ctx)
                .unwrap();
        assert_eq!(indexed, oracle);

        let empty = brute_force_check(
            std::iter::empty(),
            EngineMode::Prohibition,
            store.actions(),
            &pick,
            &driver(),
            &ctx,
        )
        .unwrap();
        assert_eq!(empty.status, RegulatoryStatus::NotRegulated);
    }
}
