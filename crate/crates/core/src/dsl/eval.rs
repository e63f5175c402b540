use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use super::ast::{BinaryOp, Expr, UnaryOp, Value};

pub type Bindings = BTreeMap<String, Value>;

type HostFn = dyn Fn(&[Value]) -> Result<Value, String> + Send + Sync;

/// A host function callable from conditions. Host functions are expected to
/// be pure.
#[derive(Clone)]
pub struct HostFunction {
    arity: usize,
    func: Arc<HostFn>,
}

impl HostFunction {
    pub fn new<F>(arity: usize, func: F) -> Self
    where
        F: Fn(&[Value]) -> Result<Value, String> + Send + Sync + 'static,
    {
        HostFunction {
            arity,
            func: Arc::new(func),
        }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }
}

impl fmt::Debug for HostFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HostFunction").field("arity", &self.arity).finish()
    }
}

#[derive(Debug, Clone, Default)]
pub struct FunctionRegistry {
    functions: BTreeMap<String, HostFunction>,
}

impl FunctionRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// `abs(x)`, `min(x, y)` and `max(x, y)` over numbers.
    pub fn with_builtins() -> Self {
        let mut reg = Self::new();
        reg.register("abs", HostFunction::new(1, |args| Ok(Value::Number(num(&args[0])?.abs()))));
        reg.register(
            "min",
            HostFunction::new(2, |args| Ok(Value::Number(num(&args[0])?.min(num(&args[1])?)))),
        );
        reg.register(
            "max",
            HostFunction::new(2, |args| Ok(Value::Number(num(&args[0])?.max(num(&args[1])?)))),
        );
        reg
    }

    pub fn register(&mut self, name: impl Into<String>, func: HostFunction) -> &mut Self {
        self.functions.insert(name.into(), func);
        self
    }

    pub fn get(&self, name: &str) -> Option<&HostFunction> {
        self.functions.get(name)
    }

    pub fn signatures(&self) -> impl Iterator<Item = (&str, usize)> {
        self.functions.iter().map(|(k, f)| (k.as_str(), f.arity))
    }
}

fn num(v: &Value) -> Result<f64, String> {
    match v {
        Value::Number(n) => Ok(*n),
        other => Err(format!("expected number, got {}", other.tag())),
    }
}

/// Facts visible to a condition: the agent layer shadows the environment
/// layer. A name missing from both is an error.
#[derive(Debug, Clone, Default)]
pub struct EvaluationContext {
    agent: Bindings,
    environment: Bindings,
    functions: Arc<FunctionRegistry>,
}

impl EvaluationContext {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_functions(functions: Arc<FunctionRegistry>) -> Self {
        EvaluationContext {
            functions,
            ..Self::default()
        }
    }

    pub fn set_agent(&mut self, name: impl Into<String>, value: impl Into<Value>) -> &mut Self {
        self.agent.insert(name.into(), value.into());
        self
    }

    pub fn set_env(&mut self, name: impl Into<String>, value: impl Into<Value>) -> &mut Self {
        self.environment.insert(name.into(), value.into());
        self
    }

    pub fn agent_facts(&self) -> &Bindings {
        &self.agent
    }

    pub fn environment_facts(&self) -> &Bindings {
        &self.environment
    }

    pub fn functions(&self) -> &FunctionRegistry {
        &self.functions
    }

    pub fn lookup(&self, name: &str) -> Option<&Value> {
        self.agent.get(name).or_else(|| self.environment.get(name))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unresolved identifier: {name}")]
    UnresolvedIdentifier { name: String, node: Expr },
    #[error("type mismatch in {node}: {detail}")]
    TypeMismatch { detail: String, node: Expr },
    #[error("unknown function: {name}")]
    UnknownFunction { name: String, node: Expr },
    #[error("function {name} expects {expected} argument(s), got {got}")]
    ArityMismatch {
        name: String,
        expected: usize,
        got: usize,
        node: Expr,
    },
    #[error("division by zero in {node}")]
    DivisionByZero { node: Expr },
    #[error("host function {name} failed: {detail}")]
    HostFunction {
        name: String,
        detail: String,
        node: Expr,
    },
}

impl EvalError {
    pub fn node(&self) -> &Expr {
        match self {
            EvalError::UnresolvedIdentifier { node, .. }
            | EvalError::TypeMismatch { node, .. }
            | EvalError::UnknownFunction { node, .. }
            | EvalError::ArityMismatch { node, .. }
            | EvalError::DivisionByZero { node }
            | EvalError::HostFunction { node, .. } => node,
        }
    }

    /// Variant name, used when comparing errors by class.
    pub fn kind(&self) -> &'static str {
        match self {
            EvalError::UnresolvedIdentifier { .. } => "UnresolvedIdentifier",
            EvalError::TypeMismatch { .. } => "TypeMismatch",
            EvalError::UnknownFunction { .. } => "UnknownFunction",
            EvalError::ArityMismatch { .. } => "ArityMismatch",
            EvalError::DivisionByZero { .. } => "DivisionByZero",
            EvalError::HostFunction { .. } => "HostFunction",
        }
    }
}

fn mismatch(node: &Expr, detail: String) -> EvalError {
    EvalError::TypeMismatch {
        detail,
        node: node.clone(),
    }
}

fn expect_bool(v: Value, node: &Expr) -> Result<bool, EvalError> {
    match v {
        Value::Bool(b) => Ok(b),
        other => Err(mismatch(node, format!("expected boolean, got {}", other.tag()))),
    }
}

fn expect_number(v: Value, node: &Expr) -> Result<f64, EvalError> {
    match v {
        Value::Number(n) => Ok(n),
        other => Err(mismatch(node, format!("expected number, got {}", other.tag()))),
    }
}

pub fn evaluate(expr: &Expr, ctx: &EvaluationContext) -> Result<Value, EvalError> {
    match expr {
        Expr::Literal(v) => Ok(v.clone()),
        Expr::Identifier(name) => ctx
            .lookup(name)
            .cloned()
            .ok_or_else(|| EvalError::UnresolvedIdentifier {
                name: name.clone(),
                node: expr.clone(),
            }),
        Expr::Unary(UnaryOp::Not, child) => {
            Ok(Value::Bool(!expect_bool(evaluate(child, ctx)?, expr)?))
        }
        Expr::Unary(UnaryOp::Negate, child) => {
            Ok(Value::Number(-expect_number(evaluate(child, ctx)?, expr)?))
        }
        Expr::Binary(op @ (BinaryOp::And | BinaryOp::Or), l, r) => {
            let left = expect_bool(evaluate(l, ctx)?, expr)?;
            match (op, left) {
                (BinaryOp::And, false) => Ok(Value::Bool(false)),
                (BinaryOp::Or, true) => Ok(Value::Bool(true)),
                _ => Ok(Value::Bool(expect_bool(evaluate(r, ctx)?, expr)?)),
            }
        }
        Expr::Binary(op, l, r) => {
            let left = evaluate(l, ctx)?;
            let right = evaluate(r, ctx)?;
            binary(*op, left, right, expr)
        }
        Expr::Call(name, args) => {
            let func = ctx
                .functions
                .get(name)
                .ok_or_else(|| EvalError::UnknownFunction {
                    name: name.clone(),
                    node: expr.clone(),
                })?;
            if func.arity != args.len() {
                return Err(EvalError::ArityMismatch {
                    name: name.clone(),
                    expected: func.arity,
                    got: args.len(),
                    node: expr.clone(),
                });
            }
            let values = args
                .iter()
                .map(|a| evaluate(a, ctx))
                .collect::<Result<Vec<_>, _>>()?;
            (func.func)(&values).map_err(|detail| EvalError::HostFunction {
                name: name.clone(),
                detail,
                node: expr.clone(),
            })
        }
    }
}

fn binary(op: BinaryOp, left: Value, right: Value, node: &Expr) -> Result<Value, EvalError> {
    match op {
        BinaryOp::Eq | BinaryOp::Ne => {
            if left.tag() != right.tag() {
                return Err(mismatch(
                    node,
                    format!("cannot compare {} with {}", left.tag(), right.tag()),
                ));
            }
            // exact comparison, floats included
            let equal = left == right;
            Ok(Value::Bool(if op == BinaryOp::Eq { equal } else { !equal }))
        }
        _ => {
            let (a, b) = match (&left, &right) {
                (Value::Number(a), Value::Number(b)) => (*a, *b),
                _ => {
                    return Err(mismatch(
                        node,
                        format!(
                            "operator {} needs numbers, got {} and {}",
                            op.symbol(),
                            left.tag(),
                            right.tag()
                        ),
                    ))
                }
            };
            Ok(match op {
                BinaryOp::Lt => Value::Bool(a < b),
                BinaryOp::Le => Value::Bool(a <= b),
                BinaryOp::Gt => Value::Bool(a > b),
                BinaryOp::Ge => Value::Bool(a >= b),
                BinaryOp::Add => Value::Number(a + b),
                BinaryOp::Sub => Value::Number(a - b),
                BinaryOp::Mul => Value::Number(a * b),
                BinaryOp::Div => {
                    if b == 0.0 {
                        return Err(EvalError::DivisionByZero { node: node.clone() });
                    }
                    Value::Number(a / b)
                }
                BinaryOp::And | BinaryOp::Or | BinaryOp::Eq | BinaryOp::Ne => unreachable!(),
            })
        }
    }
}
