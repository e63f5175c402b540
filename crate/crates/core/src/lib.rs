//! Normative multi-agent simulation core.
//!
//! Norms are prohibitions or permissions guarded by conditions written in a
//! small expression language ([`dsl`]). A [`engine::NormStore`] turns an
//! action plus a context into a regulatory verdict, organizations hand each
//! member a [`org::NormativeBackpack`], and the [`runtime`] drives agents
//! tick by tick. [`scenario`] holds the taxi-station world and the file
//! loaders used by the command-line front end.

pub mod dsl;
pub mod engine;
pub mod format;
pub mod norm;
pub mod org;
pub mod reasoner;
pub mod runtime;
pub mod scenario;
pub mod schema;
#[cfg(feature = "proptest")]
pub mod testing;

pub use engine::{brute_force_check, ActionRegistry, CheckError, EngineError, EngineMode, NormStore};
pub use norm::{
    ActionDescriptor, DeonticType, DomainId, Issuer, Norm, NormativeResponse, RegulatoryStatus, RoleId,
};
pub use org::{NormativeBackpack, OrgError, Organization};
pub use reasoner::{Decision, DefaultReasoner, Reasoner, ReasoningOutcome};
pub use runtime::{AgentId, EventRecord, Runtime};
pub use schema::{validate_norm, Diagnostic, StateSchema, ValidationReport};
