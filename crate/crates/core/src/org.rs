//! Organizations and the per-agent normative backpack.
//!
//! An [`Organization`] owns a mode, a flat role registry, a state schema and
//! a [`NormStore`]. Joining hands the agent a [`NormativeBackpack`] that sees
//! the organization's norms and regulated actions, holds the agent's private
//! concerns, and carries the reasoning engine. Backpack checks evaluate the
//! organization norms followed by the concerns as one norm list.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock, RwLockReadGuard};

use thiserror::Error;

use crate::dsl::EvaluationContext;
use crate::engine::{verdict, ActionRegistry, CheckError, EngineError, EngineMode, NormStore};
use crate::norm::{matches, ActionDescriptor, DomainId, Issuer, Norm, NormativeResponse, RoleId};
use crate::reasoner::{Decision, DefaultReasoner, Reasoner, ReasoningOutcome};
use crate::runtime::AgentId;
use crate::schema::{validate_norm, Diagnostic, StateSchema, ValidationReport};

#[derive(Debug, Error)]
pub enum OrgError {
    #[error("unknown role {0}")]
    UnknownRole(RoleId),
    #[error("agent {0} is already a member")]
    AlreadyMember(AgentId),
    #[error("agent {0} is not a member")]
    NotMember(AgentId),
    #[error("concern {id:?} must be issued by SELF, not {issuer:?}")]
    Issuer { id: String, issuer: Issuer },
    #[error("invalid norm:\n{0}")]
    Invalid(ValidationReport),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Check(#[from] CheckError),
}

#[derive(Debug, Clone)]
struct Membership {
    roles: BTreeSet<RoleId>,
    serial: u64,
}

struct OrgInner {
    name: String,
    mode: EngineMode,
    roles: BTreeSet<RoleId>,
    schema: StateSchema,
    store: RwLock<NormStore>,
    members: RwLock<BTreeMap<AgentId, Membership>>,
    next_serial: AtomicU64,
}

/// Shared handle to an organization; clones refer to the same organization.
#[derive(Clone)]
pub struct Organization {
    inner: Arc<OrgInner>,
}

impl fmt::Debug for Organization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Organization")
            .field("name", &self.inner.name)
            .field("mode", &self.inner.mode)
            .finish_non_exhaustive()
    }
}

impl Organization {
    pub fn new<I, R>(name: impl Into<String>, mode: EngineMode, roles: I, schema: StateSchema) -> Self
    where
        I: IntoIterator<Item = R>,
        R: Into<RoleId>,
    {
        Organization {
            inner: Arc::new(OrgInner {
                name: name.into(),
                mode,
                roles: roles.into_iter().map(Into::into).collect(),
                schema,
                store: RwLock::new(NormStore::new(mode)),
                members: RwLock::new(BTreeMap::new()),
                next_serial: AtomicU64::new(0),
            }),
        }
    }

    pub fn name(&self) -> &str {
        &self.inner.name
    }

    pub fn mode(&self) -> EngineMode {
        self.inner.mode
    }

    pub fn roles(&self) -> &BTreeSet<RoleId> {
        &self.inner.roles
    }

    pub fn schema(&self) -> &StateSchema {
        &self.inner.schema
    }

    /// Schema and role-registry checks on top of [`validate_norm`].
    pub fn validate(&self, norm: &Norm) -> ValidationReport {
        let mut report = validate_norm(norm, &self.inner.schema);
        for role in norm.roles.iter().flatten() {
            if !self.inner.roles.contains(role) {
                report.push(Diagnostic::for_norm(&norm.id, format!("unknown role: {role}")));
            }
        }
        report
    }

    pub fn add_norm(&self, norm: Norm) -> Result<(), OrgError> {
        let report = self.validate(&norm);
        if !report.is_clean() {
            return Err(OrgError::Invalid(report));
        }
        self.write_store().add_norm(norm)?;
        Ok(())
    }

    pub fn register_action(&self, name: &str, domain: impl Into<DomainId>) -> Result<(), OrgError> {
        self.write_store().register_action(name, domain)?;
        Ok(())
    }

    /// Read access to the norm store. Writers wait until the guard drops.
    pub fn store(&self) -> RwLockReadGuard<'_, NormStore> {
        self.inner.store.read().expect("norm store lock poisoned")
    }

    fn write_store(&self) -> std::sync::RwLockWriteGuard<'_, NormStore> {
        self.inner.store.write().expect("norm store lock poisoned")
    }

    pub fn regulated_actions(&self) -> ActionRegistry {
        self.store().actions().clone()
    }

    pub fn join<I, R>(&self, agent: AgentId, roles: I) -> Result<NormativeBackpack, OrgError>
    where
        I: IntoIterator<Item = R>,
        R: Into<RoleId>,
    {
        let roles: BTreeSet<RoleId> = roles.into_iter().map(Into::into).collect();
        if let Some(unknown) = roles.iter().find(|r| !self.inner.roles.contains(*r)) {
            return Err(OrgError::UnknownRole(unknown.clone()));
        }
        let mut members = self.inner.members.write().expect("member lock poisoned");
        if members.contains_key(&agent) {
            return Err(OrgError::AlreadyMember(agent));
        }
        let serial = self.inner.next_serial.fetch_add(1, Ordering::Relaxed);
        members.insert(agent.clone(), Membership { roles, serial });
        Ok(NormativeBackpack {
            org: self.clone(),
            agent,
            serial,
            concerns: Vec::new(),
            reasoner: Box::new(DefaultReasoner),
            stats: BackpackStats::default(),
        })
    }

    pub fn leave(&self, agent: &AgentId) -> Result<(), OrgError> {
        let mut members = self.inner.members.write().expect("member lock poisoned");
        members
            .remove(agent)
            .map(|_| ())
            .ok_or_else(|| OrgError::NotMember(agent.clone()))
    }

    pub fn is_member(&self, agent: &AgentId) -> bool {
        self.inner
            .members
            .read()
            .expect("member lock poisoned")
            .contains_key(agent)
    }

    pub fn member_roles(&self, agent: &AgentId) -> Option<BTreeSet<RoleId>> {
        self.inner
            .members
            .read()
            .expect("member lock poisoned")
            .get(agent)
            .map(|m| m.roles.clone())
    }

    /// Roles of the membership identified by `serial`, if it is still live.
    fn live_roles(&self, agent: &AgentId, serial: u64) -> Option<BTreeSet<RoleId>> {
        self.inner
            .members
            .read()
            .expect("member lock poisoned")
            .get(agent)
            .filter(|m| m.serial == serial)
            .map(|m| m.roles.clone())
    }
}

/// Counters updated each time the agent runs the normative action process.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BackpackStats {
    pub checks: u64,
    pub performed: u64,
    pub abstained: u64,
    /// performed actions that broke at least one norm
    pub violations: u64,
}

pub struct NormativeBackpack {
    org: Organization,
    agent: AgentId,
    serial: u64,
    concerns: Vec<Norm>,
    reasoner: Box<dyn Reasoner>,
    stats: BackpackStats,
}

impl fmt::Debug for NormativeBackpack {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NormativeBackpack")
            .field("org", &self.org.name())
            .field("agent", &self.agent)
            .field("concerns", &self.concerns.len())
            .field("stats", &self.stats)
            .finish()
    }
}

impl NormativeBackpack {
    pub fn agent(&self) -> &AgentId {
        &self.agent
    }

    pub fn organization(&self) -> &Organization {
        &self.org
    }

    pub fn concerns(&self) -> &[Norm] {
        &self.concerns
    }

    pub fn stats(&self) -> BackpackStats {
        self.stats
    }

    pub fn is_live(&self) -> bool {
        self.org.live_roles(&self.agent, self.serial).is_some()
    }

    pub fn roles(&self) -> Result<BTreeSet<RoleId>, OrgError> {
        self.org
            .live_roles(&self.agent, self.serial)
            .ok_or_else(|| OrgError::NotMember(self.agent.clone()))
    }

    pub fn regulated_actions(&self) -> ActionRegistry {
        self.org.regulated_actions()
    }

    pub fn is_regulated(&self, action: &str) -> bool {
        self.org.store().actions().contains(action)
    }

    /// Number of organization norms visible through this backpack.
    pub fn organization_norm_count(&self) -> usize {
        self.org.store().len()
    }

    pub fn set_reasoner(&mut self, reasoner: Box<dyn Reasoner>) {
        self.reasoner = reasoner;
    }

    pub fn reasoner(&self) -> &dyn Reasoner {
        &*self.reasoner
    }

    pub fn add_concern(&mut self, norm: Norm) -> Result<(), OrgError> {
        if norm.issuer != Issuer::SelfIssued {
            return Err(OrgError::Issuer {
                id: norm.id,
                issuer: norm.issuer,
            });
        }
        let mode = self.org.mode();
        if !mode.admits(norm.deontic_type) {
            return Err(EngineError::ModeConflict {
                id: norm.id,
                deontic_type: norm.deontic_type,
                mode,
            }
            .into());
        }
        let report = validate_norm(&norm, self.org.schema());
        if !report.is_clean() {
            return Err(OrgError::Invalid(report));
        }
        if self.org.store().contains_id(&norm.id) || self.concerns.iter().any(|c| c.id == norm.id) {
            return Err(EngineError::DuplicateId(norm.id).into());
        }
        self.concerns.push(norm);
        Ok(())
    }

    /// Organization norms followed by concerns, in insertion order.
    pub fn all_norms(&self) -> Vec<Norm> {
        let store = self.org.store();
        store.norms().cloned().chain(self.concerns.iter().cloned()).collect()
    }

    pub fn check(&self, action: &ActionDescriptor, ctx: &EvaluationContext) -> Result<NormativeResponse, OrgError> {
        let roles = self.roles()?;
        let store = self.org.store();
        if !store.actions().contains(&action.name) {
            return Ok(NormativeResponse::not_regulated());
        }
        let candidates = store
            .filter_candidates(action, &roles)
            .into_iter()
            .chain(self.concerns.iter().filter(|c| matches(c, action, &roles)));
        Ok(verdict(store.mode(), candidates, ctx)?)
    }

    pub fn reason(&self, response: NormativeResponse, expected_action_utility: f64) -> ReasoningOutcome {
        self.reasoner.reason(response, expected_action_utility)
    }

    /// Records the outcome of a normative action process run.
    pub fn notify(&mut self, decision: Decision, violated_any: bool) {
        self.stats.checks += 1;
        match decision {
            Decision::Perform => {
                self.stats.performed += 1;
                if violated_any {
                    self.stats.violations += 1;
                }
            }
            Decision::Abstain => self.stats.abstained += 1,
        }
    }
}
