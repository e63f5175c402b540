//! proptest strategies shared by the property and acceptance suites.
//! Enabled with the `proptest` feature.

use std::collections::BTreeSet;
use std::sync::Arc;

use proptest::prelude::*;
use proptest::sample::select;

use crate::dsl::{BinaryOp, EvaluationContext, Expr, FunctionRegistry, UnaryOp, Value};
use crate::engine::{ActionRegistry, CheckError, EngineMode, NormStore};
use crate::norm::{ActionDescriptor, DeonticType, DomainId, Norm, NormativeResponse, RoleId};

const KEYWORDS: [&str; 5] = ["and", "or", "not", "true", "false"];

pub fn identifier() -> impl Strategy<Value = String> {
    "[a-zA-Z_][a-zA-Z0-9_]{0,7}".prop_filter("keyword", |s| !KEYWORDS.contains(&s.as_str()))
}

fn finite_number() -> impl Strategy<Value = f64> {
    prop_oneof![
        (-1000i64..1000).prop_map(|n| n as f64),
        any::<f64>().prop_filter("finite", |f| f.is_finite()),
    ]
}

fn literal() -> impl Strategy<Value = Expr> {
    prop_oneof![
        any::<bool>().prop_map(Expr::literal),
        finite_number().prop_map(Expr::literal),
        "(\\PC|[\"\\\\\n\t]){0,6}".prop_map(|s| Expr::Literal(Value::Str(s))),
    ]
}

/// Arbitrary syntax trees, well-typed or not.
pub fn expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![literal(), identifier().prop_map(Expr::Identifier)];
    leaf.prop_recursive(5, 48, 3, |inner| {
        prop_oneof![
            (select(vec![UnaryOp::Not, UnaryOp::Negate]), inner.clone())
                .prop_map(|(op, e)| Expr::unary(op, e)),
            (select(BinaryOp::ALL.to_vec()), inner.clone(), inner.clone())
                .prop_map(|(op, l, r)| Expr::binary(op, l, r)),
            (identifier(), prop::collection::vec(inner, 0..3))
                .prop_map(|(name, args)| Expr::Call(name, args)),
        ]
    })
}

pub const NUMBER_FACTS: [&str; 3] = ["x", "y", "z"];
pub const BOOL_FACTS: [&str; 2] = ["p", "q"];
pub const ROLES: [&str; 3] = ["A", "B", "C"];
pub const DOMAINS: [&str; 3] = ["DEFAULT", "D1", "D2"];
pub const ACTIONS: [&str; 3] = ["a1", "a2", "a3"];

fn number_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        4 => select(NUMBER_FACTS.to_vec()).prop_map(Expr::ident),
        3 => (-3i64..8).prop_map(|n| Expr::literal(n as f64)),
        1 => Just(Expr::ident("ghost")),
        1 => Just(Expr::literal(true)),
    ];
    leaf.prop_recursive(3, 12, 2, |inner| {
        prop_oneof![
            (
                select(vec![BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul, BinaryOp::Div]),
                inner.clone(),
                inner.clone()
            )
                .prop_map(|(op, l, r)| Expr::binary(op, l, r)),
            inner.clone().prop_map(|e| Expr::unary(UnaryOp::Negate, e)),
            inner.clone().prop_map(|e| Expr::Call("abs".into(), vec![e])),
            (select(vec!["min", "max"]), inner.clone(), inner)
                .prop_map(|(f, a, b)| Expr::Call(f.into(), vec![a, b])),
        ]
    })
}

/// Mostly well-typed boolean conditions over the fixed fact names; a few
/// reference missing facts, mix types or divide by zero.
pub fn condition() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        2 => any::<bool>().prop_map(Expr::literal),
        2 => select(BOOL_FACTS.to_vec()).prop_map(Expr::ident),
        5 => (
            select(vec![BinaryOp::Lt, BinaryOp::Le, BinaryOp::Gt, BinaryOp::Ge, BinaryOp::Eq, BinaryOp::Ne]),
            number_expr(),
            number_expr()
        )
            .prop_map(|(op, l, r)| Expr::binary(op, l, r)),
        1 => number_expr(),
    ];
    leaf.prop_recursive(3, 16, 2, |inner| {
        prop_oneof![
            (select(vec![BinaryOp::And, BinaryOp::Or]), inner.clone(), inner.clone())
                .prop_map(|(op, l, r)| Expr::binary(op, l, r)),
            inner.prop_map(|e| Expr::unary(UnaryOp::Not, e)),
        ]
    })
}

/// Facts for [`condition`]; each name is bound with high probability.
pub fn context() -> impl Strategy<Value = EvaluationContext> {
    (
        prop::collection::vec(prop::option::weighted(0.9, -4i64..9), NUMBER_FACTS.len()),
        prop::collection::vec(prop::option::weighted(0.9, any::<bool>()), BOOL_FACTS.len()),
        prop::collection::vec(any::<bool>(), NUMBER_FACTS.len()),
    )
        .prop_map(|(nums, bools, in_env)| {
            let mut ctx = EvaluationContext::with_functions(Arc::new(FunctionRegistry::with_builtins()));
            for ((name, v), env) in NUMBER_FACTS.iter().zip(nums).zip(in_env) {
                if let Some(v) = v {
                    if env {
                        ctx.set_env(*name, v);
                    } else {
                        ctx.set_agent(*name, v);
                    }
                }
            }
            for (name, v) in BOOL_FACTS.iter().zip(bools) {
                if let Some(v) = v {
                    ctx.set_agent(*name, v);
                }
            }
            ctx
        })
}

fn amount() -> impl Strategy<Value = f64> {
    select(vec![0.0, 0.1, 0.2, 0.3, 0.7, 1.0, 1.5, 2.0, 5.0, 1e-9])
}

fn roles_filter() -> impl Strategy<Value = Option<BTreeSet<RoleId>>> {
    prop::option::weighted(
        0.6,
        prop::collection::btree_set(select(ROLES.to_vec()), 1..=2)
            .prop_map(|s| s.into_iter().map(RoleId::new).collect()),
    )
}

/// Norm of the given type with id `id`.
pub fn norm(id: String, deontic_type: DeonticType) -> impl Strategy<Value = Norm> {
    (
        condition(),
        prop::option::weighted(0.4, condition()),
        amount(),
        amount(),
        roles_filter(),
        select(DOMAINS.to_vec()),
        any::<bool>(),
    )
        .prop_map(move |(cond, act, reward, penalty, roles, domain, inviolable)| {
            let mut n = Norm::new(id.clone(), deontic_type, cond)
                .with_reward(reward)
                .with_penalty(-penalty)
                .with_domain(domain)
                .with_inviolable(inviolable);
            n.activation = act;
            n.roles = roles;
            n
        })
}

pub fn norm_set(deontic_type: DeonticType, max: usize) -> impl Strategy<Value = Vec<Norm>> {
    (0..=max).prop_flat_map(move |k| {
        (0..k)
            .map(|i| norm(format!("n{i}"), deontic_type))
            .collect::<Vec<_>>()
    })
}

/// One randomized engine query.
#[derive(Debug, Clone)]
pub struct CheckCase {
    pub mode: EngineMode,
    pub norms: Vec<Norm>,
    pub registered: Vec<(String, DomainId)>,
    pub action: ActionDescriptor,
    pub roles: BTreeSet<RoleId>,
    pub ctx: EvaluationContext,
}

impl CheckCase {
    pub fn store(&self) -> NormStore {
        let mut store = NormStore::new(self.mode);
        for n in &self.norms {
            store.add_norm(n.clone()).expect("generated norms are consistent");
        }
        for (name, domain) in &self.registered {
            store.register_action(name, domain.clone()).unwrap();
        }
        store
    }

    pub fn registry(&self) -> ActionRegistry {
        let mut reg = ActionRegistry::new();
        for (name, domain) in &self.registered {
            reg.register(name, domain.clone()).unwrap();
        }
        reg
    }
}

pub fn check_case_in(mode: EngineMode) -> impl Strategy<Value = CheckCase> {
    (
        norm_set(mode.deontic_type(), 8),
        prop::collection::vec(
            prop::option::weighted(0.85, select(DOMAINS.to_vec())),
            ACTIONS.len(),
        ),
        select(ACTIONS.to_vec()),
        select(DOMAINS.to_vec()),
        prop::collection::btree_set(select(ROLES.to_vec()), 0..=3),
        context(),
    )
        .prop_map(move |(norms, reg, action, fallback_domain, roles, ctx)| {
            let registered: Vec<(String, DomainId)> = ACTIONS
                .iter()
                .zip(reg)
                .filter_map(|(a, d)| d.map(|d| (a.to_string(), DomainId::new(d))))
                .collect();
            let domain = registered
                .iter()
                .find(|(n, _)| n == action)
                .map(|(_, d)| d.clone())
                .unwrap_or_else(|| DomainId::new(fallback_domain));
            CheckCase {
                mode,
                norms,
                registered,
                action: ActionDescriptor::new(action, domain),
                roles: roles.into_iter().map(RoleId::new).collect(),
                ctx,
            }
        })
}

pub fn check_case() -> impl Strategy<Value = CheckCase> {
    prop_oneof![
        3 => check_case_in(EngineMode::Prohibition),
        1 => check_case_in(EngineMode::Permission),
    ]
}

/// Field-for-field equality with totals compared bit for bit.
pub fn same_response(a: &NormativeResponse, b: &NormativeResponse) -> bool {
    a.status == b.status
        && a.allowing == b.allowing
        && a.forbidding == b.forbidding
        && a.total_reward.to_bits() == b.total_reward.to_bits()
        && a.total_penalty.to_bits() == b.total_penalty.to_bits()
}

/// Same response, or a failure naming the same norm with the same error kind.
pub fn same_outcome(
    a: &Result<NormativeResponse, CheckError>,
    b: &Result<NormativeResponse, CheckError>,
) -> bool {
    match (a, b) {
        (Ok(x), Ok(y)) => same_response(x, y),
        (Err(x), Err(y)) => x.norm_id == y.norm_id && x.error.kind() == y.error.kind(),
        _ => false,
    }
}
