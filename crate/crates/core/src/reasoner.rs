//! Normative reasoning: turning a verdict plus the expected utility of an
//! action into a perform/abstain decision.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::norm::{NormativeResponse, RegulatoryStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Decision {
    Perform,
    Abstain,
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decision::Perform => "PERFORM",
            Decision::Abstain => "ABSTAIN",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReasoningOutcome {
    pub decision: Decision,
    pub response: NormativeResponse,
    pub expected_action_utility: f64,
    /// `expected_action_utility + response.total_penalty`
    pub net_utility_if_performed: f64,
}

impl ReasoningOutcome {
    pub fn new(decision: Decision, response: NormativeResponse, expected_action_utility: f64) -> Self {
        let net_utility_if_performed = expected_action_utility + response.total_penalty;
        ReasoningOutcome {
            decision,
            response,
            expected_action_utility,
            net_utility_if_performed,
        }
    }
}

/// Pluggable decision component carried in every backpack.
pub trait Reasoner: Send + Sync {
    fn reason(&self, response: NormativeResponse, expected_action_utility: f64) -> ReasoningOutcome;
}

/// Never breaks an inviolable norm; breaks an ordinary one only when the
/// action still pays off strictly after the penalty.
#[derive(Debug, Clone, Copy, Default)]
pub struct DefaultReasoner;

impl Reasoner for DefaultReasoner {
    fn reason(&self, response: NormativeResponse, expected_action_utility: f64) -> ReasoningOutcome {
        default_reason(response, expected_action_utility)
    }
}

pub fn default_reason(response: NormativeResponse, expected_action_utility: f64) -> ReasoningOutcome {
    let decision = match response.status {
        RegulatoryStatus::Inviolable => Decision::Abstain,
        RegulatoryStatus::Forbidden => {
            // ties abstain
            if expected_action_utility + response.total_penalty > 0.0 {
                Decision::Perform
            } else {
                Decision::Abstain
            }
        }
        RegulatoryStatus::Allowed | RegulatoryStatus::NotRegulated => Decision::Perform,
    };
    ReasoningOutcome::new(decision, response, expected_action_utility)
}

/// Refuses every regulated action.
#[derive(Debug, Clone, Copy, Default)]
pub struct AbstainingReasoner;

impl Reasoner for AbstainingReasoner {
    fn reason(&self, response: NormativeResponse, expected_action_utility: f64) -> ReasoningOutcome {
        ReasoningOutcome::new(Decision::Abstain, response, expected_action_utility)
    }
}
