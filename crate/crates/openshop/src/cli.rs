//! Command implementations behind the `openshop` binary.
//!
//! Every command returns a [`Verdict`] whose rendering starts with a
//! single machine-readable line `verdict: YES|NO|LIMIT method: <tag>`,
//! optionally followed by witness blocks in the same text formats the
//! tool accepts as input (schedules, states); non-file witnesses such as
//! blocking sets appear as `#`-comment lines so every output remains
//! parseable. Exit codes: 0 = YES, 1 = NO, 2 = error, 3 = limit
//! exceeded.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::exact_search::{self, SearchLimits, SearchVerdict};
use crate::random::{random_system, RandomProfile};
use crate::reachability;
use crate::reductions::{
    self, parse_dimacs, parse_triples, sat_to_state_to_state, tdm_to_deadlock,
};
use crate::safety;
use crate::shop_model::{
    parse_state, parse_system, serialize_schedule, serialize_state, serialize_system, ModelError,
    OpenShopSystem, Schedule, ShopState,
};
use crate::two_machine_deadlock;
use crate::unit_capacity_deadlock;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Model { path: PathBuf, source: ModelError },
    #[error("{path}: {source}")]
    Reduction {
        path: PathBuf,
        source: reductions::ReductionError,
    },
    #[error("{0}")]
    Usage(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Answer {
    Yes,
    No,
    Limit,
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Answer::Yes => write!(f, "YES"),
            Answer::No => write!(f, "NO"),
            Answer::Limit => write!(f, "LIMIT"),
        }
    }
}

/// Outcome of a decision command: the answer, the algorithm that
/// produced it, and optional witness text.
#[derive(Clone, Debug)]
pub struct Verdict {
    pub answer: Answer,
    pub method: &'static str,
    /// Pre-rendered witness blocks appended after the verdict line.
    pub witness: String,
}

impl Verdict {
    fn new(answer: Answer, method: &'static str) -> Self {
        Verdict {
            answer,
            method,
            witness: String::new(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.answer {
            Answer::Yes => 0,
            Answer::No => 1,
            Answer::Limit => 3,
        }
    }

    pub fn render(&self) -> String {
        let mut out = format!("verdict: {} method: {}\n", self.answer, self.method);
        out.push_str(&self.witness);
        out
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn load_system(path: &Path) -> Result<OpenShopSystem, CliError> {
    parse_system(&read(path)?).map_err(|source| CliError::Model {
        path: path.to_path_buf(),
        source,
    })
}

fn load_state(system: &OpenShopSystem, path: &Path) -> Result<ShopState, CliError> {
    parse_state(system, &read(path)?).map_err(|source| CliError::Model {
        path: path.to_path_buf(),
        source,
    })
}

fn schedule_block(system: &OpenShopSystem, label: &str, schedule: &Schedule) -> String {
    format!("# {label}\n{}", serialize_schedule(system, schedule))
}

fn state_block(system: &OpenShopSystem, label: &str, state: &ShopState) -> String {
    format!("# {label}\n{}", serialize_state(system, state))
}

fn machine_set_line(system: &OpenShopSystem, label: &str, machines: &std::collections::BTreeSet<usize>) -> String {
    let names: Vec<&str> = machines
        .iter()
        .map(|&m| system.machines()[m].name.as_str())
        .collect();
    format!("# {label}: {}\n", names.join(" "))
}

/// Is the state safe (can the system still empty out)? NO carries the
/// blocking set, YES a completion schedule.
pub fn cmd_safe(system_path: &Path, state_path: &Path, witness: bool) -> Result<Verdict, CliError> {
    let system = load_system(system_path)?;
    let state = load_state(&system, state_path)?;
    let verdict = match safety::find_blocking_set(&system, &state) {
        Some(blocking) => {
            let mut v = Verdict::new(Answer::No, "blocking-set");
            if witness {
                v.witness = machine_set_line(&system, "blocking-set", &blocking.machines);
            }
            v
        }
        None => {
            let mut v = Verdict::new(Answer::Yes, "blocking-set");
            if witness {
                let sched = reachability::complete_schedule(&system, &state)
                    .expect("a state without blocking set is safe");
                v.witness = schedule_block(&system, "completion schedule", &sched);
            }
            v
        }
    };
    Ok(verdict)
}

/// Is the state reachable from the initial state? YES carries an entry
/// schedule.
pub fn cmd_reachable(
    system_path: &Path,
    state_path: &Path,
    witness: bool,
) -> Result<Verdict, CliError> {
    let system = load_system(system_path)?;
    let state = load_state(&system, state_path)?;
    if reachability::is_reachable(&system, &state) {
        let mut v = Verdict::new(Answer::Yes, "time-reversal");
        if witness {
            let sched = reachability::entry_schedule(&system, &state)
                .expect("reachable states have entry schedules");
            v.witness = schedule_block(&system, "entry schedule", &sched);
        }
        Ok(v)
    } else {
        Ok(Verdict::new(Answer::No, "time-reversal"))
    }
}

/// Can the system reach `to` from `from`? Decided by bounded exact
/// search; YES carries a shortest schedule.
pub fn cmd_state_to_state(
    system_path: &Path,
    from_path: &Path,
    to_path: &Path,
    limits: &SearchLimits,
    witness: bool,
) -> Result<Verdict, CliError> {
    let system = load_system(system_path)?;
    let from = load_state(&system, from_path)?;
    let to = load_state(&system, to_path)?;
    Ok(
        match exact_search::state_to_state(&system, &from, &to, limits) {
            SearchVerdict::Yes(sched) => {
                let mut v = Verdict::new(Answer::Yes, "exact-bfs");
                if witness {
                    v.witness = schedule_block(&system, "schedule", &sched);
                }
                v
            }
            SearchVerdict::No => Verdict::new(Answer::No, "exact-bfs"),
            SearchVerdict::LimitExceeded(_) => Verdict::new(Answer::Limit, "exact-bfs"),
        },
    )
}

/// Can the system ever reach a deadlock? Dispatches to the polynomial
/// criteria when they apply (unit capacities first, then two-machine
/// jobs), otherwise to bounded exact search; `force_exact` skips the
/// special cases.
pub fn cmd_deadlock(
    system_path: &Path,
    limits: &SearchLimits,
    force_exact: bool,
    witness: bool,
) -> Result<Verdict, CliError> {
    let system = load_system(system_path)?;
    Ok(decide_deadlock(&system, limits, force_exact, witness))
}

/// Library-level deadlock dispatch (shared with tests).
pub fn decide_deadlock(
    system: &OpenShopSystem,
    limits: &SearchLimits,
    force_exact: bool,
    witness: bool,
) -> Verdict {
    if !force_exact && unit_capacity_deadlock::check_applicable(system) {
        let graph = unit_capacity_deadlock::build_multigraph(system);
        return match unit_capacity_deadlock::find_rainbow_cycle(&graph) {
            Some(cycle) => {
                let mut v = Verdict::new(Answer::Yes, "unit-capacity");
                if witness {
                    let (state, sched) =
                        unit_capacity_deadlock::construct_deadlock_schedule(system, &cycle)
                            .expect("extracted cycle yields a schedule");
                    v.witness = schedule_block(system, "deadlock schedule", &sched)
                        + &state_block(system, "deadlock state", &state);
                }
                v
            }
            None => Verdict::new(Answer::No, "unit-capacity"),
        };
    }
    if !force_exact && two_machine_deadlock::check_applicable(system) {
        return match two_machine_deadlock::has_reachable_deadlock_2m(system)
            .expect("applicability checked")
        {
            Some(critical) => {
                let mut v = Verdict::new(Answer::Yes, "two-machine-lp");
                if witness {
                    let (state, sched) =
                        two_machine_deadlock::construct_deadlock_witness(system, &critical)
                            .expect("critical set yields a witness");
                    v.witness = machine_set_line(system, "critical-set", &critical.machines)
                        + &schedule_block(system, "deadlock schedule", &sched)
                        + &state_block(system, "deadlock state", &state);
                }
                v
            }
            None => Verdict::new(Answer::No, "two-machine-lp"),
        };
    }
    match exact_search::reachable_deadlock_exact(system, limits) {
        SearchVerdict::Yes(sched) => {
            let mut v = Verdict::new(Answer::Yes, "exact-bfs");
            if witness {
                let state = sched
                    .replay(system, &system.initial_state())
                    .expect("witness schedules replay");
                v.witness = schedule_block(system, "deadlock schedule", &sched)
                    + &state_block(system, "deadlock state", &state);
            }
            v
        }
        SearchVerdict::No => Verdict::new(Answer::No, "exact-bfs"),
        SearchVerdict::LimitExceeded(_) => Verdict::new(Answer::Limit, "exact-bfs"),
    }
}

/// Emits a completion schedule for a safe state (YES), or NO when the
/// state is unsafe.
pub fn cmd_complete(system_path: &Path, state_path: &Path) -> Result<Verdict, CliError> {
    let system = load_system(system_path)?;
    let state = load_state(&system, state_path)?;
    Ok(match reachability::complete_schedule(&system, &state) {
        Ok(sched) => {
            let mut v = Verdict::new(Answer::Yes, "completion");
            v.witness = schedule_block(&system, "completion schedule", &sched);
            v
        }
        Err(_) => Verdict::new(Answer::No, "completion"),
    })
}

/// Generates the State-to-State instance for a CNF formula. Writes
/// `<prefix>.system`, `<prefix>.s`, `<prefix>.t`; with an assignment
/// (signed 1-based integers, e.g. `1 -2 3`), also `<prefix>.schedule`.
/// Returns the written paths.
pub fn cmd_gen_sat(
    cnf_path: &Path,
    out_prefix: &Path,
    assignment_path: Option<&Path>,
) -> Result<Vec<PathBuf>, CliError> {
    let formula = parse_dimacs(&read(cnf_path)?).map_err(|source| CliError::Reduction {
        path: cnf_path.to_path_buf(),
        source,
    })?;
    let variables = formula.variable_count();
    let output = sat_to_state_to_state(formula);
    let mut written = Vec::new();
    let mut emit = |suffix: &str, contents: String| -> Result<(), CliError> {
        let path = with_suffix(out_prefix, suffix);
        write(&path, &contents)?;
        written.push(path);
        Ok(())
    };
    emit("system", serialize_system(&output.system))?;
    emit("s", serialize_state(&output.system, &output.s))?;
    emit("t", serialize_state(&output.system, &output.t))?;
    if let Some(path) = assignment_path {
        let assignment = parse_assignment(&read(path)?, variables)
            .map_err(|msg| CliError::Usage(format!("{}: {msg}", path.display())))?;
        let sched = reductions::sat_witness_schedule(&output, &assignment).map_err(|source| {
            CliError::Reduction {
                path: path.to_path_buf(),
                source,
            }
        })?;
        emit("schedule", serialize_schedule(&output.system, &sched))?;
    }
    Ok(written)
}

/// Generates the Reachable Deadlock instance for a 3DM triples file.
/// Writes `<prefix>.system`; with a matching file (same triple format),
/// also `<prefix>.state` and `<prefix>.schedule`.
pub fn cmd_gen_3dm(
    triples_path: &Path,
    out_prefix: &Path,
    matching_path: Option<&Path>,
) -> Result<Vec<PathBuf>, CliError> {
    let instance = parse_triples(&read(triples_path)?).map_err(|source| CliError::Reduction {
        path: triples_path.to_path_buf(),
        source,
    })?;
    let output = tdm_to_deadlock(instance);
    let mut written = Vec::new();
    let system_path = with_suffix(out_prefix, "system");
    write(&system_path, &serialize_system(&output.system))?;
    written.push(system_path);
    if let Some(path) = matching_path {
        let wrap = |source| CliError::Reduction {
            path: path.to_path_buf(),
            source,
        };
        let chosen = parse_triples(&read(path)?).map_err(wrap)?;
        let matching: Vec<usize> = chosen
            .triples()
            .iter()
            .map(|t| {
                output
                    .instance()
                    .triples()
                    .iter()
                    .position(|u| u == t)
                    .ok_or_else(|| {
                        CliError::Usage(format!(
                            "{}: triple a{} b{} c{} is not part of the instance",
                            path.display(),
                            t[0] + 1,
                            t[1] + 1,
                            t[2] + 1
                        ))
                    })
            })
            .collect::<Result<_, _>>()?;
        let (state, sched, _) =
            reductions::tdm_witness_deadlock(&output, &matching).map_err(wrap)?;
        let state_path = with_suffix(out_prefix, "state");
        write(&state_path, &serialize_state(&output.system, &state))?;
        written.push(state_path);
        let sched_path = with_suffix(out_prefix, "schedule");
        write(&sched_path, &serialize_schedule(&output.system, &sched))?;
        written.push(sched_path);
    }
    Ok(written)
}

/// Deterministic random system for the given seed and profile, as
/// system-file text.
pub fn cmd_random(seed: u64, profile: &RandomProfile) -> Result<String, CliError> {
    if profile.machines == 0 && profile.max_req > 0 {
        return Err(CliError::Usage(
            "jobs cannot require machines in a system without machines".into(),
        ));
    }
    if profile.max_cap == 0 {
        return Err(CliError::Usage("--max-cap must be at least 1".into()));
    }
    Ok(serialize_system(&random_system(seed, profile)))
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut name = prefix.file_name().unwrap_or_default().to_os_string();
    name.push(".");
    name.push(suffix);
    prefix.with_file_name(name)
}

/// Parses a truth assignment given as signed 1-based variable numbers
/// (`2` = x2 true, `-2` = x2 false); every variable must be assigned
/// exactly once.
fn parse_assignment(text: &str, variables: usize) -> Result<Vec<bool>, String> {
    let mut assignment: Vec<Option<bool>> = vec![None; variables];
    for token in text.split_whitespace() {
        let value: i64 = token
            .parse()
            .map_err(|_| format!("bad assignment token {token:?}"))?;
        if value == 0 {
            continue; // tolerate DIMACS-style terminators
        }
        let var = value.unsigned_abs() as usize - 1;
        if var >= variables {
            return Err(format!("variable {} out of range", value.abs()));
        }
        if assignment[var].replace(value > 0).is_some() {
            return Err(format!("variable {} assigned twice", var + 1));
        }
    }
    assignment
        .into_iter()
        .enumerate()
        .map(|(i, v)| v.ok_or_else(|| format!("variable {} unassigned", i + 1)))
        .collect()
}
