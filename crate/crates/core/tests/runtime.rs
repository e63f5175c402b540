use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use normsim_core::dsl::{parse_source, EvaluationContext, Value, ValueTag};
use normsim_core::norm::{ActionDescriptor, Norm, RegulatoryStatus};
use normsim_core::org::Organization;
use normsim_core::reasoner::{AbstainingReasoner, Decision};
use normsim_core::runtime::{
    AgentContext, AgentId, Behavior, BehaviorKind, Environment, Message, Runtime,
};
use normsim_core::scenario::SplitMix64;
use normsim_core::schema::StateSchema;
use normsim_core::EngineMode;

type Log = Arc<Mutex<Vec<(AgentId, AgentId, u64)>>>;

#[test]
fn hundred_agents_hundred_messages_each() {
    const AGENTS: usize = 100;
    const PER_AGENT: u64 = 100;
    let org = Organization::new("o", EngineMode::Prohibition, ["R"], StateSchema::new());
    let ids: Vec<AgentId> = (0..AGENTS).map(|i| AgentId::new(format!("a{i:03}"))).collect();
    let received: Log = Arc::new(Mutex::new(Vec::new()));
    let mut rt: Runtime<()> = Runtime::new(Environment::new(()));
    for (i, id) in ids.iter().enumerate() {
        let peers = ids.clone();
        let mut rng = SplitMix64::new(i as u64);
        let mut next_seq = 0u64;
        let sender: Box<dyn Behavior<()>> = Box::new(move |cx: &mut AgentContext<'_, ()>| {
            for _ in 0..10 {
                if next_seq == PER_AGENT {
                    return;
                }
                let to = peers[rng.range_inclusive(0, AGENTS as u32 - 1) as usize].clone();
                let msg = Message::new(cx.id().clone(), to, "inform").with("seq", next_seq as f64);
                cx.send(msg).unwrap();
                next_seq += 1;
            }
        });
        let log = received.clone();
        let receiver: Box<dyn Behavior<()>> = Box::new(move |cx: &mut AgentContext<'_, ()>| {
            while let Some(m) = cx.receive() {
                let Value::Number(seq) = m.body["seq"] else { panic!() };
                log.lock().unwrap().push((m.from.clone(), cx.id().clone(), seq as u64));
            }
        });
        rt.spawn_agent(
            id.clone(),
            vec![(BehaviorKind::Cyclic, sender), (BehaviorKind::Cyclic, receiver)],
            org.join(id.clone(), ["R"]).unwrap(),
        )
        .unwrap();
    }
    // ten ticks of sending plus one to deliver the last batch
    rt.run(12);
    assert_eq!(rt.pending_messages(), 0);

    let log = received.lock().unwrap();
    assert_eq!(log.len(), AGENTS * PER_AGENT as usize);
    let mut last: BTreeMap<(AgentId, AgentId), u64> = BTreeMap::new();
    let mut per_sender: BTreeMap<AgentId, u64> = BTreeMap::new();
    for (from, to, seq) in log.iter() {
        *per_sender.entry(from.clone()).or_default() += 1;
        if let Some(prev) = last.insert((from.clone(), to.clone()), *seq) {
            assert!(prev < *seq, "{from} -> {to} reordered");
        }
    }
    assert!(per_sender.values().all(|&n| n == PER_AGENT));
}

#[test]
fn abstaining_reasoner_never_performs_regulated_actions() {
    let mut schema = StateSchema::new();
    schema.declare_identifier("x", ValueTag::Number).unwrap();
    let org = Organization::new("o", EngineMode::Prohibition, ["R"], schema);
    org.add_norm(
        Norm::prohibition("small", parse_source("x < 5").unwrap())
            .with_penalty(-1.0)
            .with_inviolable(false),
    )
    .unwrap();
    org.register_action("Act", "DEFAULT").unwrap();

    let mut rt: Runtime<u32> = Runtime::new(Environment::new(0));
    rt.environment_mut()
        .register_effect("Act", |s: &mut u32, _, _| *s += 1);
    rt.environment_mut()
        .register_effect("Wave", |s: &mut u32, _, _| *s += 100);
    for (name, abstains) in [("compliant", false), ("stubborn", true)] {
        let id = AgentId::new(name);
        let mut bp = org.join(id.clone(), ["R"]).unwrap();
        if abstains {
            bp.set_reasoner(Box::new(AbstainingReasoner));
        }
        let b: Box<dyn Behavior<u32>> = Box::new(|cx: &mut AgentContext<'_, u32>| {
            let mut ctx = EvaluationContext::new();
            ctx.set_agent("x", cx.tick() as f64);
            cx.perform(&ActionDescriptor::new("Act", "DEFAULT"), 10.0, &ctx);
            cx.perform(&ActionDescriptor::new("Wave", "DEFAULT"), 0.0, &ctx);
        });
        rt.spawn_agent(id, vec![(BehaviorKind::Cyclic, b)], bp).unwrap();
    }
    let events = rt.run(10);
    let stubborn = AgentId::new("stubborn");
    for e in &events {
        if e.agent == stubborn && e.action == "Act" {
            assert_eq!(e.decision, Decision::Abstain);
            assert_eq!(e.utility_delta, 0.0);
        }
        if e.action == "Wave" {
            assert_eq!(e.status, RegulatoryStatus::NotRegulated);
            assert_eq!(e.decision, Decision::Perform);
        }
    }
    // compliant agent performs every tick (x >= 5 breaks the norm but pays 9)
    assert_eq!(*rt.environment().state(), 10 + 2 * 10 * 100);
    assert_eq!(rt.environment().utility(&stubborn), 0.0);
    assert_eq!(rt.environment().utility(&AgentId::new("compliant")), 5.0 * 10.0 + 5.0 * 9.0);
    assert_eq!(rt.environment().violation_count("small"), 5);
    assert_eq!(rt.backpack(&stubborn).unwrap().stats().abstained, 10);
}

#[test]
fn periodic_behaviors_on_absolute_ticks() {
    let org = Organization::new("o", EngineMode::Prohibition, ["R"], StateSchema::new());
    let fired = Arc::new(Mutex::new(Vec::new()));
    let mut rt: Runtime<()> = Runtime::new(Environment::new(()));
    let log = fired.clone();
    let b: Box<dyn Behavior<()>> =
        Box::new(move |cx: &mut AgentContext<'_, ()>| log.lock().unwrap().push(cx.tick()));
    let id = AgentId::new("p");
    rt.spawn_agent(id.clone(), vec![(BehaviorKind::Periodic(2), b)], org.join(id, ["R"]).unwrap())
        .unwrap();
    rt.run(5);
    assert_eq!(*fired.lock().unwrap(), [0, 2, 4]);
}
