//! Browser bindings for the demo page in `www/`.
//!
//! Every exported function takes and returns JSON strings. The `*_json`
//! functions hold the logic and run natively as well, which is how the tests
//! exercise them.

use std::collections::BTreeSet;
use std::sync::Arc;

use normsim_core::dsl::{evaluate, parse_lenient, pretty_print, EvaluationContext, FunctionRegistry};
use normsim_core::format::{parse_bindings, parse_norm_file};
use normsim_core::norm::RoleId;
use normsim_core::scenario::{bundled, parse_scenario, run_simulation};
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Longest run the page may request.
pub const MAX_TICKS: u64 = 5000;

pub fn check_action_json(
    norms: &str,
    action: &str,
    domain: &str,
    roles: &str,
    state: &str,
) -> Result<String, String> {
    let file = parse_norm_file(norms).map_err(|e| e.to_string())?;
    let roles: BTreeSet<RoleId> = roles
        .split(',')
        .map(str::trim)
        .filter(|r| !r.is_empty())
        .map(RoleId::new)
        .collect();
    let resp = file.check(action, domain, &roles, parse_bindings(state)?)?;
    Ok(serde_json::to_string(&resp).expect("response serializes"))
}

pub fn run_scenario_json(scenario: &str, seed: u64, ticks: u64) -> Result<String, String> {
    let mut config = parse_scenario(scenario).map_err(|e| e.to_string())?;
    if !(1..=MAX_TICKS).contains(&ticks) {
        return Err(format!("ticks must be between 1 and {MAX_TICKS}"));
    }
    config.seed = seed;
    config.ticks = ticks;
    let result = run_simulation(&config).map_err(|e| e.to_string())?;
    let drivers: Vec<_> = result
        .state
        .drivers
        .iter()
        .map(|(id, d)| {
            json!({
                "id": id,
                "capacity": d.taxi_capacity,
                "utility": d.utility,
                "trips": result.state.pickups.get(id).map_or(0, Vec::len),
            })
        })
        .collect();
    Ok(json!({
        "ticks": ticks,
        "seed": seed,
        "groups_arrived": result.state.groups_arrived,
        "groups_lost": result.state.groups_lost,
        "violations": result.violation_counts,
        "drivers": drivers,
        "events": result.events,
    })
    .to_string())
}

pub fn evaluate_expression_json(source: &str, state: &str) -> Result<String, String> {
    let expr = parse_lenient(source).map_err(|e| e.to_string())?;
    let mut ctx = EvaluationContext::with_functions(Arc::new(FunctionRegistry::with_builtins()));
    for (k, v) in parse_bindings(state)? {
        ctx.set_agent(k, v);
    }
    let value = evaluate(&expr, &ctx).map_err(|e| e.to_string())?;
    Ok(json!({
        "printed": pretty_print(&expr),
        "value": value.to_string(),
        "type": value.tag(),
    })
    .to_string())
}

#[wasm_bindgen]
pub fn check_action(
    norms: &str,
    action: &str,
    domain: &str,
    roles: &str,
    state: &str,
) -> Result<String, JsError> {
    check_action_json(norms, action, domain, roles, state).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn run_scenario(scenario: &str, seed: u64, ticks: u64) -> Result<String, JsError> {
    run_scenario_json(scenario, seed, ticks).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn evaluate_expression(source: &str, state: &str) -> Result<String, JsError> {
    evaluate_expression_json(source, state).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn taxi_norms() -> String {
    bundled::TAXI_NORMS.to_string()
}

#[wasm_bindgen]
pub fn taxi_scenario() -> String {
    bundled::TAXI_SCENARIO.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_over_capacity() {
        let out = check_action_json(
            bundled::TAXI_NORMS,
            "PickClients",
            "PICKING",
            "DRIVER",
            "taxiCapacity=4,NumClientsWaiting=6",
        )
        .unwrap();
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["status"], "INVIOLABLE");
        assert_eq!(v["total_penalty"], -5.0);
    }

    #[test]
    fn check_reports_errors() {
        let err = check_action_json(bundled::TAXI_NORMS, "PickClients", "PICKING", "DRIVER", "")
            .unwrap_err();
        assert!(err.contains("unresolved identifier"), "{err}");
        assert!(check_action_json("{", "a", "DEFAULT", "", "").is_err());
    }

    #[test]
    fn scenario_runs() {
        let out = run_scenario_json(bundled::TAXI_SCENARIO, 42, 50).unwrap();
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["drivers"].as_array().unwrap().len(), 5);
        assert!(!v["events"].as_array().unwrap().is_empty());
        assert_eq!(out, run_scenario_json(bundled::TAXI_SCENARIO, 42, 50).unwrap());
        assert!(run_scenario_json(bundled::TAXI_SCENARIO, 42, 0).is_err());
        assert!(run_scenario_json(bundled::TAXI_SCENARIO, 42, MAX_TICKS + 1).is_err());
    }

    #[test]
    fn expressions() {
        let out = evaluate_expression_json("taxiCapacity >= NumClientsWaiting", "taxiCapacity=4,NumClientsWaiting=3")
            .unwrap();
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["printed"], "(taxiCapacity >= NumClientsWaiting)");
        assert_eq!(v["value"], "true");
        assert_eq!(v["type"], "boolean");
        assert!(evaluate_expression_json("1 +", "").unwrap_err().contains("offset"));
        assert!(evaluate_expression_json("1 / 0", "").is_err());
    }
}
