//! Library side of the `normsim` command: each subcommand returns its exit
//! code and output instead of touching the process, so it can be tested.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use normsim_core::dsl::Value;
use normsim_core::format::{from_json, load_norm_file, parse_bindings, read_document, LoadError};
use normsim_core::norm::{NormativeResponse, RegulatoryStatus, RoleId};
use normsim_core::runtime::write_event_log;
use normsim_core::scenario::{parse_scenario, run_simulation};
use normsim_core::schema::Diagnostic;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FORBIDDEN: i32 = 1;
pub const EXIT_INVIOLABLE: i32 = 2;
pub const EXIT_ERROR: i32 = 3;

#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn error(message: impl std::fmt::Display) -> Self {
        Outcome {
            code: EXIT_ERROR,
            stdout: String::new(),
            stderr: format!("error: {message}\n"),
        }
    }
}

pub fn exit_code(status: RegulatoryStatus) -> i32 {
    match status {
        RegulatoryStatus::NotRegulated | RegulatoryStatus::Allowed => EXIT_OK,
        RegulatoryStatus::Forbidden => EXIT_FORBIDDEN,
        RegulatoryStatus::Inviolable => EXIT_INVIOLABLE,
    }
}

/// Parses `k=v,k2=v2` bindings; see [`parse_bindings`].
pub fn parse_state(text: &str) -> Result<Vec<(String, Value)>, String> {
    parse_bindings(text)
}

pub fn parse_roles(text: &str) -> BTreeSet<RoleId> {
    text.split(',')
        .map(str::trim)
        .filter(|r| !r.is_empty())
        .map(RoleId::new)
        .collect()
}

/// Checks one action against a norm file. When the file declares no
/// actions, the queried action counts as regulated in `domain`.
pub fn check(
    norms: &Path,
    action: &str,
    domain: &str,
    roles: &BTreeSet<RoleId>,
    state: &str,
) -> Result<NormativeResponse, String> {
    let file = load_norm_file(norms).map_err(|e| load_message(&e))?;
    let bindings = parse_bindings(state)?;
    file.check(action, domain, roles, bindings)
}

pub fn render_response(resp: &NormativeResponse) -> String {
    format!(
        "status: {}\nallowing: {}\nforbidding: {}\ntotal_reward: {}\ntotal_penalty: {}\n",
        resp.status.as_str(),
        resp.allowing.join(","),
        resp.forbidding.join(","),
        resp.total_reward,
        resp.total_penalty
    )
}

pub fn cmd_check(
    norms: &Path,
    action: &str,
    domain: &str,
    roles: &str,
    state: &str,
    json: bool,
) -> Outcome {
    match check(norms, action, domain, &parse_roles(roles), state) {
        Ok(resp) => Outcome {
            code: exit_code(resp.status),
            stdout: if json {
                serde_json::to_string(&resp).expect("response serializes") + "\n"
            } else {
                render_response(&resp)
            },
            stderr: String::new(),
        },
        Err(msg) => Outcome::error(msg),
    }
}

fn load_message(err: &LoadError) -> String {
    match err {
        LoadError::Validation(report) => report.to_string(),
        other => other.to_string(),
    }
}

fn diagnostics_of(path: &Path) -> Vec<Diagnostic> {
    let text = match read_document(path) {
        Ok(t) => t,
        Err(e) => return e.diagnostics(),
    };
    // scenario files are norm files with an agent section
    let is_scenario = from_json::<serde_json::Value>(&text)
        .map(|v| v.get("agents").is_some())
        .unwrap_or(false);
    let result = if is_scenario {
        parse_scenario(&text).map(|_| ())
    } else {
        normsim_core::format::parse_norm_file(&text).map(|_| ())
    };
    match result {
        Ok(()) => Vec::new(),
        Err(e) => e.diagnostics(),
    }
}

/// Validates a norm or scenario file; exit 0 iff there is nothing to report.
pub fn cmd_validate(path: &Path) -> Outcome {
    let diagnostics = diagnostics_of(path);
    if diagnostics.is_empty() {
        return Outcome {
            code: EXIT_OK,
            stdout: format!("{}: ok\n", path.display()),
            stderr: String::new(),
        };
    }
    let mut stderr = String::new();
    for d in &diagnostics {
        let _ = writeln!(stderr, "{}: {d}", path.display());
    }
    Outcome {
        code: 1,
        stdout: String::new(),
        stderr,
    }
}

/// Runs a scenario. The event log goes to `log` when given, else stdout.
pub fn cmd_run(scenario: &Path, ticks: Option<u64>, seed: Option<u64>, log: Option<&Path>) -> Outcome {
    let text = match read_document(scenario) {
        Ok(t) => t,
        Err(e) => return Outcome::error(e),
    };
    let mut config = match parse_scenario(&text) {
        Ok(c) => c,
        Err(e) => return Outcome::error(load_message(&e)),
    };
    if let Some(t) = ticks {
        if t == 0 {
            return Outcome::error("ticks must be at least 1");
        }
        config.ticks = t;
    }
    if let Some(s) = seed {
        config.seed = s;
    }
    let result = match run_simulation(&config) {
        Ok(r) => r,
        Err(e) => return Outcome::error(e),
    };

    let mut buf = Vec::new();
    write_event_log(&mut buf, &result.events).expect("writing to memory");
    let log_text = String::from_utf8(buf).expect("json is utf-8");

    let mut summary = format!(
        "{}: {} ticks, seed {}, {} events, {} groups arrived, {} walked away\n",
        config.name,
        config.ticks,
        config.seed,
        result.events.len(),
        result.state.groups_arrived,
        result.state.groups_lost
    );
    for (id, d) in &result.state.drivers {
        let trips = result.state.pickups.get(id).map_or(0, Vec::len);
        let _ = writeln!(summary, "  {id}: utility {}, trips {trips}", d.utility);
    }
    for (norm, n) in &result.violation_counts {
        let _ = writeln!(summary, "  violations of {norm}: {n}");
    }

    match log {
        Some(path) => {
            if let Err(e) = std::fs::write(path, log_text) {
                return Outcome::error(format!("cannot write {}: {e}", path.display()));
            }
            Outcome {
                code: EXIT_OK,
                stdout: summary,
                stderr: String::new(),
            }
        }
        None => Outcome {
            code: EXIT_OK,
            stdout: log_text,
            stderr: summary,
        },
    }
}
