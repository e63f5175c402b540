//! Tick-driven agent runtime.
//!
//! Agents own behaviors and a normative backpack. Each tick the runtime
//! delivers messages sent during the previous tick, then runs every due
//! behavior in agent-id order (behaviors of one agent in registration
//! order). Regulated actions go through [`normative_action_process`], which
//! consults the backpack, lets the reasoner decide, and settles the outcome
//! with the [`Environment`].

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{EvaluationContext, Value};
use crate::norm::{ActionDescriptor, RegulatoryStatus};
use crate::org::NormativeBackpack;
use crate::reasoner::Decision;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(String);

impl AgentId {
    pub fn new(name: impl Into<String>) -> Self {
        AgentId(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for AgentId {
    fn from(s: &str) -> Self {
        AgentId::new(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub from: AgentId,
    pub to: AgentId,
    pub performative: String,
    pub body: BTreeMap<String, Value>,
    pub sent_at: u64,
}

impl Message {
    pub fn new(from: AgentId, to: AgentId, performative: impl Into<String>) -> Self {
        Message {
            from,
            to,
            performative: performative.into(),
            body: BTreeMap::new(),
            sent_at: 0,
        }
    }

    pub fn with(mut self, key: impl Into<String>, value: impl Into<Value>) -> Self {
        self.body.insert(key.into(), value.into());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BehaviorKind {
    OneShot,
    Cyclic,
    /// Runs on ticks that are multiples of the period.
    Periodic(u64),
}

pub trait Behavior<S>: Send {
    fn step(&mut self, cx: &mut AgentContext<'_, S>);
}

impl<S, F> Behavior<S> for F
where
    F: FnMut(&mut AgentContext<'_, S>) + Send,
{
    fn step(&mut self, cx: &mut AgentContext<'_, S>) {
        self(cx)
    }
}

/// One line of the simulation trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventRecord {
    pub tick: u64,
    pub agent: AgentId,
    pub action: String,
    pub status: RegulatoryStatus,
    pub decision: Decision,
    pub violated: Vec<String>,
    pub complied: Vec<String>,
    pub utility_delta: f64,
    /// Set when the check itself failed; such records always abstain.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl EventRecord {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("event record serializes")
    }

    pub fn failed(&self) -> bool {
        self.error.is_some()
    }
}

/// Writes one JSON object per line, in order.
pub fn write_event_log<W: Write>(mut out: W, events: &[EventRecord]) -> io::Result<()> {
    for e in events {
        writeln!(out, "{}", e.to_json_line())?;
    }
    out.flush()
}

pub type Effect<S> = Box<dyn Fn(&mut S, &AgentId, &ActionDescriptor) + Send + Sync>;

/// World state plus the bookkeeping every action outcome passes through.
pub struct Environment<S> {
    state: S,
    accounts: BTreeMap<AgentId, f64>,
    violation_counts: BTreeMap<String, u64>,
    effects: BTreeMap<String, Effect<S>>,
    journal: Vec<EventRecord>,
}

impl<S: fmt::Debug> fmt::Debug for Environment<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Environment")
            .field("state", &self.state)
            .field("accounts", &self.accounts)
            .field("violation_counts", &self.violation_counts)
            .field("events", &self.journal.len())
            .finish()
    }
}

impl<S> Environment<S> {
    pub fn new(state: S) -> Self {
        Environment {
            state,
            accounts: BTreeMap::new(),
            violation_counts: BTreeMap::new(),
            effects: BTreeMap::new(),
            journal: Vec::new(),
        }
    }

    /// State transition applied when `action` is performed.
    pub fn register_effect<F>(&mut self, action: impl Into<String>, effect: F)
    where
        F: Fn(&mut S, &AgentId, &ActionDescriptor) + Send + Sync + 'static,
    {
        self.effects.insert(action.into(), Box::new(effect));
    }

    pub fn state(&self) -> &S {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut S {
        &mut self.state
    }

    pub fn into_state(self) -> S {
        self.state
    }

    pub fn open_account(&mut self, agent: &AgentId) {
        self.accounts.entry(agent.clone()).or_insert(0.0);
    }

    pub fn utility(&self, agent: &AgentId) -> f64 {
        self.accounts.get(agent).copied().unwrap_or(0.0)
    }

    pub fn accounts(&self) -> &BTreeMap<AgentId, f64> {
        &self.accounts
    }

    pub fn violation_count(&self, norm_id: &str) -> u64 {
        self.violation_counts.get(norm_id).copied().unwrap_or(0)
    }

    pub fn violation_counts(&self) -> &BTreeMap<String, u64> {
        &self.violation_counts
    }

    pub fn events(&self) -> &[EventRecord] {
        &self.journal
    }

    /// Settles a finished action: credits the utility delta and, when the
    /// action was performed, runs its effect and counts its violations.
    pub fn apply_outcome(&mut self, record: &EventRecord, action: &ActionDescriptor) {
        if record.decision == Decision::Abstain {
            return;
        }
        *self.accounts.entry(record.agent.clone()).or_insert(0.0) += record.utility_delta;
        if let Some(effect) = self.effects.get(&action.name) {
            effect(&mut self.state, &record.agent, action);
        }
        for id in &record.violated {
            *self.violation_counts.entry(id.clone()).or_insert(0) += 1;
        }
    }
}

/// Check, reason, perform or abstain, then notify backpack and environment.
///
/// Unregulated actions skip the check and are performed directly. A failed
/// check aborts only this action: the record abstains and carries the error.
pub fn normative_action_process<S>(
    backpack: &mut NormativeBackpack,
    env: &mut Environment<S>,
    tick: u64,
    action: &ActionDescriptor,
    expected_action_utility: f64,
    ctx: &EvaluationContext,
) -> EventRecord {
    let agent = backpack.agent().clone();
    let mut record = EventRecord {
        tick,
        agent,
        action: action.name.clone(),
        status: RegulatoryStatus::NotRegulated,
        decision: Decision::Perform,
        violated: Vec::new(),
        complied: Vec::new(),
        utility_delta: expected_action_utility,
        error: None,
    };
    if backpack.is_regulated(&action.name) {
        match backpack.check(action, ctx) {
            Ok(response) => {
                let outcome = backpack.reason(response, expected_action_utility);
                let response = outcome.response;
                record.status = response.status;
                record.decision = outcome.decision;
                record.utility_delta = match outcome.decision {
                    Decision::Perform => {
                        expected_action_utility + response.total_penalty + response.total_reward
                    }
                    Decision::Abstain => 0.0,
                };
                record.violated = response.forbidding;
                record.complied = response.allowing;
            }
            Err(err) => {
                record.status = RegulatoryStatus::Forbidden;
                record.decision = Decision::Abstain;
                record.utility_delta = 0.0;
                record.error = Some(err.to_string());
            }
        }
    }
    backpack.notify(record.decision, !record.violated.is_empty());
    env.apply_outcome(&record, action);
    env.journal.push(record.clone());
    record
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuntimeError {
    #[error("agent {0} already exists")]
    DuplicateAgent(AgentId),
    #[error("unknown agent {0}")]
    UnknownAgent(AgentId),
    #[error("periodic behavior needs a period of at least one tick")]
    InvalidPeriod,
    #[error("backpack belongs to {backpack}, not {agent}")]
    BackpackMismatch { agent: AgentId, backpack: AgentId },
}

/// What a behavior sees while it runs.
pub struct AgentContext<'a, S> {
    id: &'a AgentId,
    tick: u64,
    backpack: &'a mut NormativeBackpack,
    mailbox: &'a mut VecDeque<Message>,
    env: &'a mut Environment<S>,
    outbox: &'a mut Vec<Message>,
    directory: &'a BTreeSet<AgentId>,
}

impl<S> AgentContext<'_, S> {
    pub fn id(&self) -> &AgentId {
        self.id
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn state(&self) -> &S {
        self.env.state()
    }

    pub fn utility(&self) -> f64 {
        self.env.utility(self.id)
    }

    pub fn backpack(&self) -> &NormativeBackpack {
        self.backpack
    }

    pub fn backpack_mut(&mut self) -> &mut NormativeBackpack {
        self.backpack
    }

    pub fn receive(&mut self) -> Option<Message> {
        self.mailbox.pop_front()
    }

    pub fn send(&mut self, mut msg: Message) -> Result<(), RuntimeError> {
        if !self.directory.contains(&msg.to) {
            return Err(RuntimeError::UnknownAgent(msg.to));
        }
        msg.from = self.id.clone();
        msg.sent_at = self.tick;
        self.outbox.push(msg);
        Ok(())
    }

    pub fn perform(
        &mut self,
        action: &ActionDescriptor,
        expected_action_utility: f64,
        ctx: &EvaluationContext,
    ) -> EventRecord {
        normative_action_process(
            self.backpack,
            self.env,
            self.tick,
            action,
            expected_action_utility,
            ctx,
        )
    }
}

struct Scheduled<S> {
    kind: BehaviorKind,
    behavior: Box<dyn Behavior<S>>,
    done: bool,
}

impl<S> Scheduled<S> {
    fn due(&self, tick: u64) -> bool {
        match self.kind {
            _ if self.done => false,
            BehaviorKind::OneShot | BehaviorKind::Cyclic => true,
            BehaviorKind::Periodic(p) => tick.is_multiple_of(p),
        }
    }
}

struct AgentSlot<S> {
    backpack: NormativeBackpack,
    behaviors: Vec<Scheduled<S>>,
    mailbox: VecDeque<Message>,
}

type TickHook<S> = Box<dyn FnMut(&mut S, u64) + Send>;

pub struct Runtime<S> {
    clock: u64,
    agents: BTreeMap<AgentId, AgentSlot<S>>,
    directory: BTreeSet<AgentId>,
    env: Environment<S>,
    in_flight: Vec<Message>,
    tick_hook: Option<TickHook<S>>,
}

impl<S> Runtime<S> {
    pub fn new(env: Environment<S>) -> Self {
        Runtime {
            clock: 0,
            agents: BTreeMap::new(),
            directory: BTreeSet::new(),
            env,
            in_flight: Vec::new(),
            tick_hook: None,
        }
    }

    /// Called with the world state at the start of every tick, before
    /// message delivery.
    pub fn set_tick_hook<F>(&mut self, hook: F)
    where
        F: FnMut(&mut S, u64) + Send + 'static,
    {
        self.tick_hook = Some(Box::new(hook));
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn environment(&self) -> &Environment<S> {
        &self.env
    }

    pub fn environment_mut(&mut self) -> &mut Environment<S> {
        &mut self.env
    }

    pub fn into_environment(self) -> Environment<S> {
        self.env
    }

    pub fn agents(&self) -> impl Iterator<Item = &AgentId> {
        self.agents.keys()
    }

    pub fn backpack(&self, id: &AgentId) -> Option<&NormativeBackpack> {
        self.agents.get(id).map(|a| &a.backpack)
    }

    pub fn spawn_agent(
        &mut self,
        id: AgentId,
        behaviors: Vec<(BehaviorKind, Box<dyn Behavior<S>>)>,
        backpack: NormativeBackpack,
    ) -> Result<AgentId, RuntimeError> {
        if self.agents.contains_key(&id) {
            return Err(RuntimeError::DuplicateAgent(id));
        }
        if *backpack.agent() != id {
            return Err(RuntimeError::BackpackMismatch {
                agent: id,
                backpack: backpack.agent().clone(),
            });
        }
        if behaviors
            .iter()
            .any(|(k, _)| matches!(k, BehaviorKind::Periodic(0)))
        {
            return Err(RuntimeError::InvalidPeriod);
        }
        let behaviors = behaviors
            .into_iter()
            .map(|(kind, behavior)| Scheduled {
                kind,
                behavior,
                done: false,
            })
            .collect();
        self.env.open_account(&id);
        self.directory.insert(id.clone());
        self.agents.insert(
            id.clone(),
            AgentSlot {
                backpack,
                behaviors,
                mailbox: VecDeque::new(),
            },
        );
        Ok(id)
    }

    /// Queues a message for delivery at the start of the next tick.
    pub fn send(&mut self, mut msg: Message) -> Result<(), RuntimeError> {
        if !self.directory.contains(&msg.to) {
            return Err(RuntimeError::UnknownAgent(msg.to));
        }
        msg.sent_at = self.clock;
        self.in_flight.push(msg);
        Ok(())
    }

    pub fn pending_messages(&self) -> usize {
        self.in_flight.len()
    }

    pub fn mailbox(&self, id: &AgentId) -> Option<&VecDeque<Message>> {
        self.agents.get(id).map(|a| &a.mailbox)
    }

    /// Delivers every in-flight message to its recipient's mailbox.
    pub fn flush(&mut self) {
        for msg in self.in_flight.drain(..) {
            if let Some(slot) = self.agents.get_mut(&msg.to) {
                slot.mailbox.push_back(msg);
            }
        }
    }

    /// Advances the clock by one tick and returns the events it produced.
    pub fn tick(&mut self) -> Vec<EventRecord> {
        let tick = self.clock;
        if let Some(hook) = self.tick_hook.as_mut() {
            hook(&mut self.env.state, tick);
        }
        self.flush();
        let start = self.env.journal.len();
        for (id, slot) in self.agents.iter_mut() {
            for scheduled in slot.behaviors.iter_mut() {
                if !scheduled.due(tick) {
                    continue;
                }
                let mut cx = AgentContext {
                    id,
                    tick,
                    backpack: &mut slot.backpack,
                    mailbox: &mut slot.mailbox,
                    env: &mut self.env,
                    outbox: &mut self.in_flight,
                    directory: &self.directory,
                };
                scheduled.behavior.step(&mut cx);
                if scheduled.kind == BehaviorKind::OneShot {
                    scheduled.done = true;
                }
            }
        }
        self.clock += 1;
        self.env.journal[start..].to_vec()
    }

    pub fn run(&mut self, ticks: u64) -> Vec<EventRecord> {
        (0..ticks).flat_map(|_| self.tick()).collect()
    }
}

#[cfg(test)]
mod tests {
    use std::sync::{Arc, Mutex};

    use super::*;
    use crate::dsl::{parse_source, Expr};
    use crate::engine::EngineMode;
    use crate::norm::Norm;
    use crate::org::Organization;
    use crate::reasoner::AbstainingReasoner;
    use crate::schema::StateSchema;
    use crate::dsl::ValueTag;

    fn org() -> Organization {
        let mut schema = StateSchema::new();
        for name in ["taxiCapacity", "NumClientsWaiting", "driverQueuePos"] {
            schema.declare_identifier(name, ValueTag::Number).unwrap();
        }
        let org = Organization::new("taxi", EngineMode::Prohibition, ["DRIVER"], schema);
        org.add_norm(
            Norm::prohibition("respectLine", parse_source("driverQueuePos == 1").unwrap())
                .with_penalty(-1.0)
                .with_roles(["DRIVER"])
                .with_domain("QUEUE")
                .with_inviolable(false),
        )
        .unwrap();
        org.add_norm(
            Norm::prohibition(
                "respectCapacity",
                parse_source("taxiCapacity >= NumClientsWaiting").unwrap(),
            )
            .with_penalty(-5.0)
            .with_roles(["DRIVER"])
            .with_domain("PICKING"),
        )
        .unwrap();
        org.register_action("PickClients", "PICKING").unwrap();
        org.register_action("Queue", "QUEUE").unwrap();
        org
    }

    fn ctx(capacity: i64, waiting: i64, pos: i64) -> EvaluationContext {
        let mut c = EvaluationContext::new();
        c.set_agent("taxiCapacity", capacity)
            .set_agent("driverQueuePos", pos)
            .set_env("NumClientsWaiting", waiting);
        c
    }

    #[derive(Debug, Default)]
    struct Picked(u32);

    fn env() -> Environment<Picked> {
        let mut env = Environment::new(Picked::default());
        env.register_effect("PickClients", |s: &mut Picked, _, _| s.0 += 1);
        env.register_effect("Queue", |s: &mut Picked, _, _| s.0 += 1);
        env
    }

    #[test]
    fn over_capacity_abstains() {
        let org = org();
        let mut bp = org.join(AgentId::new("driver1"), ["DRIVER"]).unwrap();
        let mut env = env();
        let pick = ActionDescriptor::new("PickClients", "PICKING");
        let rec = normative_action_process(&mut bp, &mut env, 0, &pick, 12.0, &ctx(4, 6, 1));
        assert_eq!(rec.status, RegulatoryStatus::Inviolable);
        assert_eq!(rec.decision, Decision::Abstain);
        assert_eq!(rec.utility_delta, 0.0);
        assert_eq!(env.state().0, 0);
        assert_eq!(env.utility(&AgentId::new("driver1")), 0.0);
        assert_eq!(bp.stats().abstained, 1);
    }

    #[test]
    fn queue_jump_pays_off() {
        let org = org();
        let mut bp = org.join(AgentId::new("driver1"), ["DRIVER"]).unwrap();
        let mut env = env();
        let jump = ActionDescriptor::new("Queue", "QUEUE");
        let rec = normative_action_process(&mut bp, &mut env, 3, &jump, 6.0, &ctx(4, 3, 4));
        assert_eq!(rec.status, RegulatoryStatus::Forbidden);
        assert_eq!(rec.decision, Decision::Perform);
        assert_eq!(rec.violated, ["respectLine"]);
        assert_eq!(rec.utility_delta, 5.0);
        assert_eq!(env.utility(&AgentId::new("driver1")), 5.0);
        assert_eq!(env.violation_count("respectLine"), 1);
        assert_eq!(env.state().0, 1);
        assert_eq!(bp.stats().violations, 1);
    }

    #[test]
    fn unregulated_performs_directly() {
        let org = org();
        let mut bp = org.join(AgentId::new("driver1"), ["DRIVER"]).unwrap();
        bp.set_reasoner(Box::new(AbstainingReasoner));
        let mut env = env();
        let idle = ActionDescriptor::new("Idle", "DEFAULT");
        let rec = normative_action_process(&mut bp, &mut env, 0, &idle, 0.5, &EvaluationContext::new());
        assert_eq!(rec.status, RegulatoryStatus::NotRegulated);
        assert_eq!(rec.decision, Decision::Perform);
        assert_eq!(rec.utility_delta, 0.5);
    }

    #[test]
    fn evaluation_failure_aborts_only_the_action() {
        let org = org();
        let mut bp = org.join(AgentId::new("driver1"), ["DRIVER"]).unwrap();
        let mut env = env();
        let pick = ActionDescriptor::new("PickClients", "PICKING");
        let rec = normative_action_process(&mut bp, &mut env, 0, &pick, 5.0, &EvaluationContext::new());
        assert!(rec.failed());
        assert_eq!(rec.decision, Decision::Abstain);
        assert!(rec.error.as_deref().unwrap().contains("unresolved identifier"));
        assert_eq!(env.state().0, 0);
        let json = rec.to_json_line();
        assert!(json.contains("\"error\""));
    }

    #[test]
    fn apply_outcome_additivity_and_abstain() {
        let mut env = env();
        let agent = AgentId::new("a");
        env.open_account(&agent);
        let mut rec = EventRecord {
            tick: 0,
            agent: agent.clone(),
            action: "PickClients".into(),
            status: RegulatoryStatus::Allowed,
            decision: Decision::Perform,
            violated: vec![],
            complied: vec![],
            utility_delta: 0.1,
            error: None,
        };
        let pick = ActionDescriptor::new("PickClients", "PICKING");
        env.apply_outcome(&rec, &pick);
        rec.utility_delta = 0.2;
        env.apply_outcome(&rec, &pick);
        assert_eq!(env.utility(&agent), 0.1 + 0.2);
        assert_eq!(env.state().0, 2);

        rec.decision = Decision::Abstain;
        rec.utility_delta = 0.0;
        env.apply_outcome(&rec, &pick);
        assert_eq!(env.utility(&agent), 0.1 + 0.2);
        assert_eq!(env.state().0, 2);
    }

    #[test]
    fn record_json_keys() {
        let rec = EventRecord {
            tick: 7,
            agent: AgentId::new("d1"),
            action: "Queue".into(),
            status: RegulatoryStatus::Forbidden,
            decision: Decision::Perform,
            violated: vec!["respectLine".into()],
            complied: vec![],
            utility_delta: 5.0,
            error: None,
        };
        assert_eq!(
            rec.to_json_line(),
            r#"{"tick":7,"agent":"d1","action":"Queue","status":"FORBIDDEN","decision":"PERFORM","violated":["respectLine"],"complied":[],"utility_delta":5.0}"#
        );
    }

    fn idle_org() -> Organization {
        Organization::new("o", EngineMode::Prohibition, ["R"], StateSchema::new())
    }

    #[test]
    fn spawn_rules() {
        let org = idle_org();
        let mut rt: Runtime<()> = Runtime::new(Environment::new(()));
        let a = AgentId::new("a");
        rt.spawn_agent(a.clone(), vec![], org.join(a.clone(), ["R"]).unwrap())
            .unwrap();
        let b = AgentId::new("b");
        rt.spawn_agent(b.clone(), vec![], org.join(b.clone(), ["R"]).unwrap())
            .unwrap();
        let a2 = Organization::new("o2", EngineMode::Prohibition, ["R"], StateSchema::new())
            .join(a.clone(), ["R"])
            .unwrap();
        assert_eq!(
            rt.spawn_agent(a.clone(), vec![], a2).unwrap_err(),
            RuntimeError::DuplicateAgent(a.clone())
        );
        let c = AgentId::new("c");
        let bp = org.join(c.clone(), ["R"]).unwrap();
        let noop: Box<dyn Behavior<()>> = Box::new(|_: &mut AgentContext<'_, ()>| {});
        assert_eq!(
            rt.spawn_agent(c, vec![(BehaviorKind::Periodic(0), noop)], bp)
                .unwrap_err(),
            RuntimeError::InvalidPeriod
        );
        assert_eq!(rt.agents().count(), 2);
        assert_eq!(rt.environment().utility(&b), 0.0);
    }

    fn counter_behavior(log: Arc<Mutex<Vec<u64>>>) -> Box<dyn Behavior<()>> {
        Box::new(move |cx: &mut AgentContext<'_, ()>| log.lock().unwrap().push(cx.tick()))
    }

    #[test]
    fn scheduling_kinds() {
        let org = idle_org();
        let mut rt: Runtime<()> = Runtime::new(Environment::new(()));
        let periodic5 = Arc::new(Mutex::new(Vec::new()));
        let periodic2 = Arc::new(Mutex::new(Vec::new()));
        let once = Arc::new(Mutex::new(Vec::new()));
        let cyclic = Arc::new(Mutex::new(Vec::new()));
        let a = AgentId::new("a");
        rt.spawn_agent(
            a.clone(),
            vec![
                (BehaviorKind::Periodic(5), counter_behavior(periodic5.clone())),
                (BehaviorKind::Periodic(2), counter_behavior(periodic2.clone())),
                (BehaviorKind::OneShot, counter_behavior(once.clone())),
                (BehaviorKind::Cyclic, counter_behavior(cyclic.clone())),
            ],
            org.join(a, ["R"]).unwrap(),
        )
        .unwrap();
        rt.run(12);
        assert_eq!(*periodic5.lock().unwrap(), [0, 5, 10]);
        assert_eq!(periodic2.lock().unwrap()[..3], [0, 2, 4]);
        assert_eq!(*once.lock().unwrap(), [0]);
        assert_eq!(cyclic.lock().unwrap().len(), 12);
        assert_eq!(rt.clock(), 12);
    }

    #[test]
    fn empty_runtime_tick() {
        let mut rt: Runtime<()> = Runtime::new(Environment::new(()));
        assert!(rt.tick().is_empty());
    }

    #[test]
    fn agents_run_in_id_order() {
        let org = idle_org();
        let order = Arc::new(Mutex::new(Vec::new()));
        let mut rt: Runtime<()> = Runtime::new(Environment::new(()));
        for name in ["zed", "amy", "kim"] {
            let id = AgentId::new(name);
            let log = order.clone();
            let b: Box<dyn Behavior<()>> = Box::new(move |cx: &mut AgentContext<'_, ()>| {
                log.lock().unwrap().push(cx.id().to_string())
            });
            rt.spawn_agent(id.clone(), vec![(BehaviorKind::Cyclic, b)], org.join(id, ["R"]).unwrap())
                .unwrap();
        }
        rt.tick();
        assert_eq!(*order.lock().unwrap(), ["amy", "kim", "zed"]);
    }

    #[test]
    fn fifo_delivery() {
        let org = idle_org();
        let mut rt: Runtime<()> = Runtime::new(Environment::new(()));
        let (a, b) = (AgentId::new("a"), AgentId::new("b"));
        for id in [&a, &b] {
            rt.spawn_agent(id.clone(), vec![], org.join(id.clone(), ["R"]).unwrap())
                .unwrap();
        }
        rt.send(Message::new(a.clone(), b.clone(), "inform").with("n", 1i64)).unwrap();
        rt.send(Message::new(a.clone(), b.clone(), "inform").with("n", 2i64)).unwrap();
        assert_eq!(
            rt.send(Message::new(a.clone(), AgentId::new("ghost"), "inform")),
            Err(RuntimeError::UnknownAgent(AgentId::new("ghost")))
        );
        assert_eq!(rt.mailbox(&b).unwrap().len(), 0);
        rt.tick();
        let got: Vec<_> = rt.mailbox(&b).unwrap().iter().map(|m| m.body["n"].clone()).collect();
        assert_eq!(got, [Value::Number(1.0), Value::Number(2.0)]);
    }

    #[test]
    fn behaviors_exchange_messages() {
        let org = idle_org();
        let mut rt: Runtime<()> = Runtime::new(Environment::new(()));
        let (ping, pong) = (AgentId::new("ping"), AgentId::new("pong"));
        let received = Arc::new(Mutex::new(Vec::new()));
        let to = pong.clone();
        let sender: Box<dyn Behavior<()>> = Box::new(move |cx: &mut AgentContext<'_, ()>| {
            let n = cx.tick() as i64;
            cx.send(Message::new(cx.id().clone(), to.clone(), "inform").with("n", n))
                .unwrap();
        });
        let log = received.clone();
        let receiver: Box<dyn Behavior<()>> = Box::new(move |cx: &mut AgentContext<'_, ()>| {
            while let Some(m) = cx.receive() {
                log.lock().unwrap().push((cx.tick(), m.sent_at, m.from.to_string()));
            }
        });
        rt.spawn_agent(ping.clone(), vec![(BehaviorKind::Cyclic, sender)], org.join(ping, ["R"]).unwrap())
            .unwrap();
        rt.spawn_agent(pong.clone(), vec![(BehaviorKind::Cyclic, receiver)], org.join(pong, ["R"]).unwrap())
            .unwrap();
        rt.run(3);
        // "ping" runs before "pong"; messages arrive the next tick
        assert_eq!(
            *received.lock().unwrap(),
            [(1, 0, "ping".to_string()), (2, 1, "ping".to_string())]
        );
    }

    #[test]
    fn concern_added_by_behavior_takes_effect() {
        let org = org();
        org.register_action("Honk", "DEFAULT").unwrap();
        let mut rt: Runtime<Picked> = Runtime::new(env());
        let id = AgentId::new("d");
        let b: Box<dyn Behavior<Picked>> = Box::new(|cx: &mut AgentContext<'_, Picked>| {
            if cx.tick() == 1 {
                cx.backpack_mut()
                    .add_concern(
                        Norm::prohibition("quiet", Expr::literal(false))
                            .with_issuer(crate::norm::Issuer::SelfIssued),
                    )
                    .unwrap();
            }
            cx.perform(&ActionDescriptor::new("Honk", "DEFAULT"), 1.0, &EvaluationContext::new());
        });
        rt.spawn_agent(id.clone(), vec![(BehaviorKind::Cyclic, b)], org.join(id, ["DRIVER"]).unwrap())
            .unwrap();
        let events = rt.run(2);
        assert_eq!(events[0].status, RegulatoryStatus::NotRegulated);
        assert_eq!(events[1].status, RegulatoryStatus::Inviolable);
        assert_eq!(events[1].decision, Decision::Abstain);
    }
}
