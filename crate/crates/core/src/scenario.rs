//! Scenario files and the taxi-station world.
//!
//! A scenario file is a norm file (see [`crate::format`]) extended with
//! `name`, `roles`, `agents`, `environment`, `ticks` and `seed`. Drivers wait
//! in a single queue; the head driver may pick the waiting group, anyone who
//! declines goes back to the tail, and opportunistic drivers may jump the
//! queue when the group fits their car. Every tick is a quarter hour.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dsl::{EvaluationContext, FunctionRegistry, Value};
use crate::engine::EngineMode;
use crate::format::{
    compile_actions, compile_norms, complete_schema, from_json, id_line, read_document, LoadError,
    RawAction, RawNorm,
};
use crate::norm::{ActionDescriptor, DomainId, Norm, RegulatoryStatus, RoleId};
use crate::org::Organization;
use crate::reasoner::Decision;
use crate::runtime::{AgentContext, AgentId, Behavior, BehaviorKind, Environment, EventRecord, Runtime};
use crate::schema::{Diagnostic, StateSchema, ValidationReport};

/// Bundled reference files.
pub mod bundled {
    pub const TAXI_NORMS: &str = include_str!("../scenarios/taxi.norms");
    pub const TAXI_SCENARIO: &str = include_str!("../scenarios/taxi.scenario");
    pub const TAXI_WALKTHROUGH: &str = include_str!("../scenarios/taxi_walkthrough.scenario");
    pub const TAXI_WORKHOURS: &str = include_str!("../scenarios/taxi_workhours.scenario");
}

/// respectLine exactly as first written down. Read as a compliance
/// condition it lets only the driver at the tail pick customers, so the
/// bundled files use [`RESPECT_LINE_CONDITION`] instead.
pub const RESPECT_LINE_AS_LISTED: &str = "driverQueuePos == numTaxisQueue";
pub const RESPECT_LINE_CONDITION: &str = "driverQueuePos == 1";

pub const PICK_ACTION: &str = "PickClients";
pub const JUMP_ACTION: &str = "Queue";
pub const RETURN_ACTION: &str = "ReturnToQueue";
pub const BREAK_ACTION: &str = "TakeBreak";
pub const DRIVE_ACTION: &str = "Drive";
pub const REST_ACTION: &str = "Rest";
pub const IDLE_ACTION: &str = "Idle";

/// SplitMix64 (Steele, Lea and Flood). State advances by the golden-ratio
/// increment `0x9E3779B97F4A7C15`; the output mix is
/// `z ^= z >> 30; z *= 0xBF58476D1CE4E5B9; z ^= z >> 27; z *= 0x94D049BB133111EB; z ^= z >> 31`.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
    pub const MIX1: u64 = 0xBF58_476D_1CE4_E5B9;
    pub const MIX2: u64 = 0x94D0_49BB_1331_11EB;

    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(Self::GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(Self::MIX1);
        z = (z ^ (z >> 27)).wrapping_mul(Self::MIX2);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` from the top 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `lo..=hi` by rejection, so no modulo bias.
    pub fn range_inclusive(&mut self, lo: u32, hi: u32) -> u32 {
        assert!(lo <= hi);
        let span = u64::from(hi - lo) + 1;
        let zone = u64::MAX - (u64::MAX % span);
        loop {
            let x = self.next_u64();
            if x < zone {
                return lo + (x % span) as u32;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaxiEffect {
    PickClients,
    JumpQueue,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentBehavior {
    Driver,
    Idle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Arrivals {
    Scripted {
        groups: Vec<ScriptedGroup>,
    },
    Random {
        #[serde(default = "default_probability")]
        probability: f64,
        #[serde(default = "default_min_group")]
        min_group: u32,
        #[serde(default = "default_max_group")]
        max_group: u32,
    },
}

impl Default for Arrivals {
    fn default() -> Self {
        Arrivals::Random {
            probability: default_probability(),
            min_group: default_min_group(),
            max_group: default_max_group(),
        }
    }
}

fn default_probability() -> f64 {
    0.5
}
fn default_min_group() -> u32 {
    1
}
fn default_max_group() -> u32 {
    6
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptedGroup {
    pub tick: u64,
    pub size: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvironmentConfig {
    /// Initial queue, head first. Defaults to the drivers in file order.
    pub queue: Option<Vec<String>>,
    pub arrivals: Arrivals,
    /// Ticks a group waits before walking away.
    pub patience: u32,
    pub trip_ticks: u32,
    pub break_ticks: u32,
    pub hours_limit: f64,
    pub tick_hours: f64,
    pub reward_per_customer: f64,
    pub facts: BTreeMap<String, serde_json::Value>,
}

impl Default for EnvironmentConfig {
    fn default() -> Self {
        EnvironmentConfig {
            queue: None,
            arrivals: Arrivals::default(),
            patience: 8,
            trip_ticks: 4,
            break_ticks: 2,
            hours_limit: 8.0,
            tick_hours: 0.25,
            reward_per_customer: 2.0,
            facts: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAgent {
    id: String,
    #[serde(default)]
    roles: Vec<String>,
    #[serde(default = "default_behavior")]
    behavior: AgentBehavior,
    #[serde(default)]
    facts: BTreeMap<String, serde_json::Value>,
}

fn default_behavior() -> AgentBehavior {
    AgentBehavior::Driver
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    #[serde(default = "default_name")]
    name: String,
    mode: EngineMode,
    #[serde(default)]
    schema: StateSchema,
    #[serde(default)]
    roles: Vec<String>,
    norms: Vec<RawNorm>,
    #[serde(default)]
    actions: Vec<RawAction>,
    agents: Vec<RawAgent>,
    #[serde(default)]
    environment: EnvironmentConfig,
    ticks: u64,
    #[serde(default)]
    seed: u64,
}

fn default_name() -> String {
    "scenario".into()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionConfig {
    pub name: String,
    pub domain: DomainId,
    pub effect: Option<TaxiEffect>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub id: AgentId,
    pub roles: Vec<RoleId>,
    pub behavior: AgentBehavior,
    pub facts: BTreeMap<String, Value>,
}

/// A fully validated scenario.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub name: String,
    pub mode: EngineMode,
    pub roles: Vec<RoleId>,
    pub schema: StateSchema,
    pub norms: Vec<Norm>,
    pub actions: Vec<ActionConfig>,
    pub agents: Vec<AgentConfig>,
    pub environment: EnvironmentConfig,
    pub environment_facts: BTreeMap<String, Value>,
    pub ticks: u64,
    pub seed: u64,
}

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig, LoadError> {
    parse_scenario(&read_document(path)?)
}

pub fn parse_scenario(text: &str) -> Result<ScenarioConfig, LoadError> {
    let raw: RawScenario = from_json(text)?;
    let mut report = ValidationReport::default();
    let host = FunctionRegistry::with_builtins();
    let schema = complete_schema(raw.schema, &host, &mut report);
    let norms = compile_norms(text, raw.mode, &schema, &raw.norms, &mut report);

    let roles: Vec<RoleId> = raw.roles.iter().map(RoleId::new).collect();
    let role_set: BTreeSet<&RoleId> = roles.iter().collect();
    for norm in &norms {
        for role in norm.roles.iter().flatten() {
            if !role_set.contains(role) {
                report.push(
                    Diagnostic::for_norm(&norm.id, format!("unknown role: {role}"))
                        .at_line(id_line(text, &norm.id, 0)),
                );
            }
        }
    }

    let declared = compile_actions(&raw.actions, &mut report);
    let mut actions = Vec::new();
    let mut effects_seen = BTreeSet::new();
    for (name, domain) in declared {
        let raw_effect = raw
            .actions
            .iter()
            .find(|a| a.name == name)
            .and_then(|a| a.effect.as_deref());
        let effect = match raw_effect {
            None | Some("none") => None,
            Some("pick_clients") => Some(TaxiEffect::PickClients),
            Some("jump_queue") => Some(TaxiEffect::JumpQueue),
            Some(other) => {
                report.push(Diagnostic::new(format!("action {name}: unknown effect {other}")));
                None
            }
        };
        if let Some(e) = effect {
            if !effects_seen.insert(e) {
                report.push(Diagnostic::new(format!(
                    "action {name}: effect {e:?} bound to more than one action"
                )));
            }
        }
        actions.push(ActionConfig { name, domain, effect });
    }

    let mut agents = Vec::new();
    let mut ids = BTreeSet::new();
    for a in &raw.agents {
        let line = id_line(text, &a.id, 0);
        let diag = |msg: String| Diagnostic::new(format!("agent {:?}: {msg}", a.id)).at_line(line);
        if a.id.is_empty() {
            report.push(diag("empty id".into()));
        }
        if !ids.insert(a.id.as_str()) {
            report.push(diag("duplicate agent id".into()));
        }
        for r in &a.roles {
            if !role_set.contains(&RoleId::new(r)) {
                report.push(diag(format!("unknown role: {r}")));
            }
        }
        let mut facts = BTreeMap::new();
        for (k, v) in &a.facts {
            match json_value(v) {
                Some(v) => {
                    facts.insert(k.clone(), v);
                }
                None => report.push(diag(format!("fact {k} must be a boolean, number or string"))),
            }
        }
        if a.behavior == AgentBehavior::Driver {
            match facts.get("taxiCapacity") {
                Some(Value::Number(n)) if *n >= 1.0 && n.fract() == 0.0 && *n <= f64::from(u32::MAX) => {}
                _ => report.push(diag("drivers need a positive integer taxiCapacity".into())),
            }
            match facts.get("opportunistic") {
                None | Some(Value::Bool(_)) => {}
                _ => report.push(diag("opportunistic must be a boolean".into())),
            }
            match facts.get("hoursWorked") {
                None => {}
                Some(Value::Number(n)) if *n >= 0.0 && n.is_finite() => {}
                _ => report.push(diag("hoursWorked must be a non-negative number".into())),
            }
        }
        agents.push(AgentConfig {
            id: AgentId::new(&a.id),
            roles: a.roles.iter().map(RoleId::new).collect(),
            behavior: a.behavior.clone(),
            facts,
        });
    }

    let env = raw.environment;
    let mut environment_facts = BTreeMap::new();
    for (k, v) in &env.facts {
        match json_value(v) {
            Some(v) => {
                environment_facts.insert(k.clone(), v);
            }
            None => report.push(Diagnostic::new(format!(
                "environment fact {k} must be a boolean, number or string"
            ))),
        }
    }
    if let Some(queue) = &env.queue {
        let mut seen = BTreeSet::new();
        for q in queue {
            let is_driver = raw
                .agents
                .iter()
                .any(|a| a.id == *q && a.behavior == AgentBehavior::Driver);
            if !is_driver {
                report.push(Diagnostic::new(format!("queue entry {q} is not a driver")));
            }
            if !seen.insert(q) {
                report.push(Diagnostic::new(format!("driver {q} queued twice")));
            }
        }
    }
    match &env.arrivals {
        Arrivals::Scripted { groups } => {
            if groups.iter().any(|g| g.size == 0) {
                report.push(Diagnostic::new("scripted groups need at least one customer"));
            }
        }
        Arrivals::Random {
            probability,
            min_group,
            max_group,
        } => {
            if !(0.0..=1.0).contains(probability) {
                report.push(Diagnostic::new("arrival probability must be within [0, 1]"));
            }
            if *min_group == 0 || min_group > max_group {
                report.push(Diagnostic::new("group sizes need 1 <= min_group <= max_group"));
            }
        }
    }
    for (name, v) in [
        ("patience", env.patience),
        ("trip_ticks", env.trip_ticks),
        ("break_ticks", env.break_ticks),
    ] {
        if v == 0 {
            report.push(Diagnostic::new(format!("{name} must be at least 1")));
        }
    }
    if !(env.hours_limit.is_finite() && env.hours_limit > 0.0) {
        report.push(Diagnostic::new("hours_limit must be positive"));
    }
    if !(env.tick_hours.is_finite() && env.tick_hours >= 0.0) {
        report.push(Diagnostic::new("tick_hours must be non-negative"));
    }
    if !env.reward_per_customer.is_finite() {
        report.push(Diagnostic::new("reward_per_customer must be finite"));
    }
    if raw.ticks < 1 {
        report.push(Diagnostic::new("ticks must be at least 1"));
    }

    if !report.is_clean() {
        return Err(LoadError::Validation(report));
    }
    Ok(ScenarioConfig {
        name: raw.name,
        mode: raw.mode,
        roles,
        schema,
        norms,
        actions,
        agents,
        environment: env,
        environment_facts,
        ticks: raw.ticks,
        seed: raw.seed,
    })
}

fn json_value(v: &serde_json::Value) -> Option<Value> {
    match v {
        serde_json::Value::Bool(b) => Some(Value::Bool(*b)),
        serde_json::Value::Number(n) => n.as_f64().map(Value::Number),
        serde_json::Value::String(s) => Some(Value::Str(s.clone())),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activity {
    Queued,
    Driving { remaining: u32 },
    OnBreak { remaining: u32 },
    Idle,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriverState {
    pub taxi_capacity: u32,
    pub hours_worked: f64,
    pub opportunistic: bool,
    pub activity: Activity,
    pub utility: f64,
}

impl DriverState {
    pub fn on_break(&self) -> bool {
        matches!(self.activity, Activity::OnBreak { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Pickup {
    pub tick: u64,
    pub group: u32,
    pub capacity: u32,
    pub jumped: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TaxiState {
    /// Head first.
    pub queue: Vec<AgentId>,
    pub waiting_group_size: u32,
    /// Ticks the current group has been waiting.
    pub waited: u32,
    pub drivers: BTreeMap<AgentId, DriverState>,
    pub pickups: BTreeMap<AgentId, Vec<Pickup>>,
    pub groups_arrived: u64,
    pub groups_lost: u64,
    pub tick: u64,
}

impl TaxiState {
    /// 1-based queue position, 0 when not queued.
    pub fn position(&self, driver: &AgentId) -> usize {
        self.queue
            .iter()
            .position(|d| d == driver)
            .map_or(0, |p| p + 1)
    }

    fn dequeue(&mut self, driver: &AgentId) {
        self.queue.retain(|d| d != driver);
    }

    fn enqueue_tail(&mut self, driver: &AgentId) {
        self.dequeue(driver);
        self.queue.push(driver.clone());
    }

    pub fn queue_is_consistent(&self) -> bool {
        let unique: BTreeSet<_> = self.queue.iter().collect();
        unique.len() == self.queue.len()
            && self
                .queue
                .iter()
                .all(|d| matches!(self.drivers.get(d).map(|s| s.activity), Some(Activity::Queued)))
    }

    fn pick(&mut self, driver: &AgentId, jumped: bool, trip_ticks: u32) {
        let group = self.waiting_group_size;
        let tick = self.tick;
        let Some(state) = self.drivers.get_mut(driver) else {
            return;
        };
        let capacity = state.taxi_capacity;
        state.activity = Activity::Driving { remaining: trip_ticks };
        self.pickups.entry(driver.clone()).or_default().push(Pickup {
            tick,
            group,
            capacity,
            jumped,
        });
        self.waiting_group_size = 0;
        self.waited = 0;
        self.dequeue(driver);
    }
}

#[derive(Debug, Clone)]
pub struct SimulationResult {
    pub state: TaxiState,
    pub events: Vec<EventRecord>,
    pub violation_counts: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimulationError {
    pub tick: Option<u64>,
    pub message: String,
}

impl fmt::Display for SimulationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.tick {
            Some(t) => write!(f, "tick {t}: {}", self.message),
            None => write!(f, "setup: {}", self.message),
        }
    }
}

impl std::error::Error for SimulationError {}

fn setup_error(e: impl fmt::Display) -> SimulationError {
    SimulationError {
        tick: None,
        message: e.to_string(),
    }
}

struct Rules {
    pick: ActionDescriptor,
    jump: ActionDescriptor,
    reward_per_customer: f64,
    hours_limit: f64,
    functions: Arc<FunctionRegistry>,
    environment_facts: BTreeMap<String, Value>,
}

impl Rules {
    fn context(&self, state: &TaxiState, me: &AgentId, facts: &BTreeMap<String, Value>) -> EvaluationContext {
        let mut ctx = EvaluationContext::with_functions(self.functions.clone());
        for (k, v) in &self.environment_facts {
            ctx.set_env(k.clone(), v.clone());
        }
        ctx.set_env("numTaxisQueue", state.queue.len() as u32)
            .set_env("NumClientsWaiting", state.waiting_group_size);
        for (k, v) in facts {
            ctx.set_agent(k.clone(), v.clone());
        }
        if let Some(d) = state.drivers.get(me) {
            ctx.set_agent("taxiCapacity", d.taxi_capacity)
                .set_agent("hoursWorked", d.hours_worked)
                .set_agent("onBreak", d.on_break())
                .set_agent("opportunistic", d.opportunistic);
        }
        ctx.set_agent("driverQueuePos", state.position(me) as u32);
        ctx
    }
}

fn driver_step(rules: &Rules, facts: &BTreeMap<String, Value>, cx: &mut AgentContext<'_, TaxiState>) {
    let me = cx.id().clone();
    let state = cx.state();
    let Some(driver) = state.drivers.get(&me).cloned() else {
        return;
    };
    let ctx = rules.context(state, &me, facts);
    let simple = |name: &str| ActionDescriptor::new(name, DomainId::default());
    let group = state.waiting_group_size;
    let position = state.position(&me);
    let utility = f64::from(group) * rules.reward_per_customer;

    match driver.activity {
        Activity::Driving { remaining: 0 } | Activity::OnBreak { remaining: 0 } | Activity::Idle => {
            cx.perform(&simple(RETURN_ACTION), 0.0, &ctx);
        }
        Activity::Driving { .. } => {
            cx.perform(&simple(DRIVE_ACTION), 0.0, &ctx);
        }
        Activity::OnBreak { .. } => {
            cx.perform(&simple(REST_ACTION), 0.0, &ctx);
        }
        Activity::Queued if position == 1 && group > 0 => {
            let pick = rules.pick.clone().with_param("group", group);
            let rec = cx.perform(&pick, utility, &ctx);
            if rec.decision == Decision::Abstain {
                cx.perform(&simple(RETURN_ACTION), 0.0, &ctx);
            }
        }
        Activity::Queued if driver.hours_worked >= rules.hours_limit => {
            cx.perform(&simple(BREAK_ACTION), 0.0, &ctx);
        }
        Activity::Queued
            if driver.opportunistic && group > 0 && group <= driver.taxi_capacity && position > 1 =>
        {
            // would picking this group be acceptable at the head?
            let feasible = cx
                .backpack()
                .check(&rules.pick, &ctx)
                .map(|r| r.status <= RegulatoryStatus::Allowed)
                .unwrap_or(false);
            if feasible {
                let jump = rules.jump.clone().with_param("jump", true).with_param("group", group);
                cx.perform(&jump, utility, &ctx);
            } else {
                cx.perform(&simple(IDLE_ACTION), 0.0, &ctx);
            }
        }
        Activity::Queued => {
            cx.perform(&simple(IDLE_ACTION), 0.0, &ctx);
        }
    }
}

/// Builds the organization and agents described by `config` and runs it.
pub fn run_simulation(config: &ScenarioConfig) -> Result<SimulationResult, SimulationError> {
    let org = Organization::new(
        config.name.clone(),
        config.mode,
        config.roles.iter().cloned(),
        config.schema.clone(),
    );
    for norm in &config.norms {
        org.add_norm(norm.clone()).map_err(setup_error)?;
    }
    let mut pick = ActionDescriptor::new(PICK_ACTION, "PICKING");
    let mut jump = ActionDescriptor::new(JUMP_ACTION, "QUEUE");
    for a in &config.actions {
        org.register_action(&a.name, a.domain.clone()).map_err(setup_error)?;
        match a.effect {
            Some(TaxiEffect::PickClients) => pick = ActionDescriptor::new(&a.name, a.domain.clone()),
            Some(TaxiEffect::JumpQueue) => jump = ActionDescriptor::new(&a.name, a.domain.clone()),
            None => {}
        }
    }

    let env_cfg = &config.environment;
    let mut state = TaxiState::default();
    for a in config.agents.iter().filter(|a| a.behavior == AgentBehavior::Driver) {
        let num = |k: &str| match a.facts.get(k) {
            Some(Value::Number(n)) => Some(*n),
            _ => None,
        };
        state.drivers.insert(
            a.id.clone(),
            DriverState {
                taxi_capacity: num("taxiCapacity").unwrap_or(1.0) as u32,
                hours_worked: num("hoursWorked").unwrap_or(0.0),
                opportunistic: a.facts.get("opportunistic") == Some(&Value::Bool(true)),
                activity: Activity::Idle,
                utility: 0.0,
            },
        );
    }
    let queue: Vec<AgentId> = match &env_cfg.queue {
        Some(q) => q.iter().map(AgentId::new).collect(),
        None => config
            .agents
            .iter()
            .filter(|a| a.behavior == AgentBehavior::Driver)
            .map(|a| a.id.clone())
            .collect(),
    };
    for d in &queue {
        if let Some(s) = state.drivers.get_mut(d) {
            s.activity = Activity::Queued;
        }
    }
    state.queue = queue;

    let mut env = Environment::new(state);
    let trip_ticks = env_cfg.trip_ticks;
    let break_ticks = env_cfg.break_ticks;
    env.register_effect(pick.name.clone(), move |s: &mut TaxiState, who, _| s.pick(who, false, trip_ticks));
    env.register_effect(jump.name.clone(), move |s: &mut TaxiState, who, _| s.pick(who, true, trip_ticks));
    env.register_effect(RETURN_ACTION, |s: &mut TaxiState, who, _| {
        if let Some(d) = s.drivers.get_mut(who) {
            if d.on_break() {
                d.hours_worked = 0.0;
            }
            d.activity = Activity::Queued;
            s.enqueue_tail(who);
        }
    });
    env.register_effect(BREAK_ACTION, move |s: &mut TaxiState, who, _| {
        if let Some(d) = s.drivers.get_mut(who) {
            d.activity = Activity::OnBreak { remaining: break_ticks };
            s.dequeue(who);
        }
    });

    let mut runtime = Runtime::new(env);
    let mut rng = SplitMix64::new(config.seed);
    let mut scripted: VecDeque<ScriptedGroup> = match &env_cfg.arrivals {
        Arrivals::Scripted { groups } => {
            let mut g = groups.clone();
            g.sort_by_key(|g| g.tick);
            g.into()
        }
        Arrivals::Random { .. } => VecDeque::new(),
    };
    let arrivals = env_cfg.arrivals.clone();
    let patience = env_cfg.patience;
    let tick_hours = env_cfg.tick_hours;
    runtime.set_tick_hook(move |s: &mut TaxiState, tick| {
        s.tick = tick;
        for d in s.drivers.values_mut() {
            match &mut d.activity {
                Activity::Driving { remaining } | Activity::OnBreak { remaining } => {
                    *remaining = remaining.saturating_sub(1)
                }
                Activity::Queued | Activity::Idle => {}
            }
            if !d.on_break() {
                d.hours_worked += tick_hours;
            }
        }
        if s.waiting_group_size > 0 {
            s.waited += 1;
            if s.waited > patience {
                s.waiting_group_size = 0;
                s.waited = 0;
                s.groups_lost += 1;
            }
        }
        if s.waiting_group_size == 0 {
            let size = match &arrivals {
                Arrivals::Scripted { .. } => match scripted.front() {
                    Some(g) if g.tick <= tick => scripted.pop_front().map(|g| g.size),
                    _ => None,
                },
                Arrivals::Random {
                    probability,
                    min_group,
                    max_group,
                } => {
                    // two draws per idle tick keep the stream aligned
                    let arrives = rng.next_f64() < *probability;
                    let size = rng.range_inclusive(*min_group, *max_group);
                    arrives.then_some(size)
                }
            };
            if let Some(size) = size {
                s.waiting_group_size = size;
                s.waited = 0;
                s.groups_arrived += 1;
            }
        }
    });

    let rules = Arc::new(Rules {
        pick,
        jump,
        reward_per_customer: env_cfg.reward_per_customer,
        hours_limit: env_cfg.hours_limit,
        functions: Arc::new(FunctionRegistry::with_builtins()),
        environment_facts: config.environment_facts.clone(),
    });
    for agent in &config.agents {
        let backpack = org
            .join(agent.id.clone(), agent.roles.iter().cloned())
            .map_err(setup_error)?;
        let rules = rules.clone();
        let facts = agent.facts.clone();
        let behavior: Box<dyn Behavior<TaxiState>> = match agent.behavior {
            AgentBehavior::Driver => Box::new(move |cx: &mut AgentContext<'_, TaxiState>| {
                driver_step(&rules, &facts, cx)
            }),
            AgentBehavior::Idle => Box::new(move |cx: &mut AgentContext<'_, TaxiState>| {
                let ctx = rules.context(cx.state(), &cx.id().clone(), &facts);
                cx.perform(&ActionDescriptor::new(IDLE_ACTION, DomainId::default()), 0.0, &ctx);
            }),
        };
        runtime
            .spawn_agent(agent.id.clone(), vec![(BehaviorKind::Cyclic, behavior)], backpack)
            .map_err(setup_error)?;
    }

    for _ in 0..config.ticks {
        let tick = runtime.clock();
        runtime.tick();
        if !runtime.environment().state().queue_is_consistent() {
            return Err(SimulationError {
                tick: Some(tick),
                message: "queue lost its integrity".into(),
            });
        }
    }

    let env = runtime.into_environment();
    let violation_counts = env.violation_counts().clone();
    let accounts = env.accounts().clone();
    let events = env.events().to_vec();
    let mut state = env.into_state();
    for (id, d) in state.drivers.iter_mut() {
        d.utility = accounts.get(id).copied().unwrap_or(0.0);
    }
    Ok(SimulationResult {
        state,
        events,
        violation_counts,
    })
}
