//! Core data model: systems, states, moves and the successor relation.
//!
//! A [`ShopState`] records for every job where it currently sits (a real
//! machine, or the `IN`/`OUT` sentinels) and which machines it still has
//! to visit. A state `t` is a successor of `s` if it results from moving
//! a single job to one of its remaining machines, or to `OUT` once its
//! remaining set is empty. Each move strictly decreases the
//! [potential](ShopState::potential), so the successor relation is a DAG.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid system: {0}")]
    InvalidSystem(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("illegal move (job {job}): {reason}")]
    IllegalMove { job: usize, reason: String },
    #[error("{0}")]
    Precondition(String),
}

/// Location of a job: the artificial entry machine, a real machine, or
/// the artificial exit machine.
///
/// The derived order (`In` < `Machine(_)` < `Out`) is the order used for
/// deterministic move enumeration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MachineRef {
    In,
    Machine(usize),
    Out,
}

impl MachineRef {
    pub fn machine(self) -> Option<usize> {
        match self {
            MachineRef::Machine(i) => Some(i),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Machine {
    pub name: String,
    pub capacity: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Job {
    pub name: String,
    /// Machine indices this job must visit (`𝓜(J)`); may be empty.
    pub required: BTreeSet<usize>,
}

/// An open shop system: machines with capacities, jobs with required
/// machine sets. Immutable after construction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OpenShopSystem {
    machines: Vec<Machine>,
    jobs: Vec<Job>,
}

fn check_name(kind: &str, name: &str) -> Result<(), ModelError> {
    if name.is_empty() {
        return Err(ModelError::InvalidSystem(format!("empty {kind} name")));
    }
    if name == "IN" || name == "OUT" {
        return Err(ModelError::InvalidSystem(format!(
            "{kind} name {name:?} collides with a sentinel"
        )));
    }
    if name.contains(char::is_whitespace) || name.starts_with('#') {
        return Err(ModelError::InvalidSystem(format!(
            "{kind} name {name:?} contains whitespace or starts with '#'"
        )));
    }
    Ok(())
}

impl OpenShopSystem {
    pub fn new(machines: Vec<Machine>, jobs: Vec<Job>) -> Result<Self, ModelError> {
        let mut seen = HashSet::new();
        for m in &machines {
            check_name("machine", &m.name)?;
            if m.capacity < 1 {
                return Err(ModelError::InvalidSystem(format!(
                    "machine {} has capacity {}",
                    m.name, m.capacity
                )));
            }
            if !seen.insert(m.name.clone()) {
                return Err(ModelError::InvalidSystem(format!(
                    "duplicate machine name {}",
                    m.name
                )));
            }
        }
        let mut seen = HashSet::new();
        for j in &jobs {
            check_name("job", &j.name)?;
            if !seen.insert(j.name.clone()) {
                return Err(ModelError::InvalidSystem(format!(
                    "duplicate job name {}",
                    j.name
                )));
            }
            if let Some(&i) = j.required.iter().find(|&&i| i >= machines.len()) {
                return Err(ModelError::InvalidSystem(format!(
                    "job {} requires unknown machine index {}",
                    j.name, i
                )));
            }
        }
        Ok(OpenShopSystem { machines, jobs })
    }

    pub fn machines(&self) -> &[Machine] {
        &self.machines
    }

    pub fn jobs(&self) -> &[Job] {
        &self.jobs
    }

    pub fn machine_count(&self) -> usize {
        self.machines.len()
    }

    pub fn job_count(&self) -> usize {
        self.jobs.len()
    }

    pub fn machine_index(&self, name: &str) -> Option<usize> {
        self.machines.iter().position(|m| m.name == name)
    }

    pub fn job_index(&self, name: &str) -> Option<usize> {
        self.jobs.iter().position(|j| j.name == name)
    }

    pub fn capacity(&self, machine: usize) -> usize {
        self.machines[machine].capacity
    }

    /// The state where every job waits outside with its full required set.
    pub fn initial_state(&self) -> ShopState {
        ShopState {
            jobs: self
                .jobs
                .iter()
                .map(|j| JobState {
                    location: MachineRef::In,
                    remaining: j.required.clone(),
                })
                .collect(),
        }
    }

    /// The state where every job has exited the system.
    pub fn final_state(&self) -> ShopState {
        ShopState {
            jobs: self
                .jobs
                .iter()
                .map(|_| JobState {
                    location: MachineRef::Out,
                    remaining: BTreeSet::new(),
                })
                .collect(),
        }
    }

    pub fn is_final(&self, state: &ShopState) -> bool {
        state == &self.final_state()
    }

    pub fn is_initial(&self, state: &ShopState) -> bool {
        state == &self.initial_state()
    }

    /// Checks every `ShopState` invariant against this system and reports
    /// the first violation by name.
    pub fn validate_state(&self, state: &ShopState) -> Result<(), ModelError> {
        if state.jobs.len() != self.jobs.len() {
            return Err(ModelError::InvalidState(format!(
                "state has {} jobs, system has {}",
                state.jobs.len(),
                self.jobs.len()
            )));
        }
        for (idx, (js, job)) in state.jobs.iter().zip(&self.jobs).enumerate() {
            if !js.remaining.is_subset(&job.required) {
                return Err(ModelError::InvalidState(format!(
                    "job {}: remaining set not a subset of its required set",
                    self.jobs[idx].name
                )));
            }
            match js.location {
                MachineRef::In => {
                    if js.remaining != job.required {
                        return Err(ModelError::InvalidState(format!(
                            "job {}: at IN but remaining != required",
                            job.name
                        )));
                    }
                }
                MachineRef::Out => {
                    if !js.remaining.is_empty() {
                        return Err(ModelError::InvalidState(format!(
                            "job {}: at OUT with nonempty remaining",
                            job.name
                        )));
                    }
                }
                MachineRef::Machine(i) => {
                    if !job.required.contains(&i) {
                        return Err(ModelError::InvalidState(format!(
                            "job {}: located on a machine outside its required set",
                            job.name
                        )));
                    }
                    if js.remaining.contains(&i) {
                        return Err(ModelError::InvalidState(format!(
                            "job {}: current machine appears in its remaining set",
                            job.name
                        )));
                    }
                }
            }
        }
        for i in 0..self.machines.len() {
            let occ = state.occupancy(i);
            if occ > self.machines[i].capacity {
                return Err(ModelError::InvalidState(format!(
                    "machine {}: occupancy {} exceeds capacity {}",
                    self.machines[i].name, occ, self.machines[i].capacity
                )));
            }
        }
        Ok(())
    }

    /// All successor moves of `state`, in ascending (job, target) order.
    /// `OUT` targets sort after real machines, so the order is fully
    /// deterministic.
    pub fn legal_moves(&self, state: &ShopState) -> Result<Vec<Move>, ModelError> {
        self.validate_state(state)?;
        Ok(self.legal_moves_unchecked(state))
    }

    /// Like [`legal_moves`](Self::legal_moves) but assumes `state` is valid.
    pub fn legal_moves_unchecked(&self, state: &ShopState) -> Vec<Move> {
        let mut moves = Vec::new();
        for (job, js) in state.jobs.iter().enumerate() {
            if js.location == MachineRef::Out {
                continue;
            }
            if js.remaining.is_empty() {
                moves.push(Move {
                    job,
                    from: js.location,
                    to: MachineRef::Out,
                });
            } else {
                for &target in &js.remaining {
                    if state.occupancy(target) < self.machines[target].capacity {
                        moves.push(Move {
                            job,
                            from: js.location,
                            to: MachineRef::Machine(target),
                        });
                    }
                }
            }
        }
        moves
    }

    /// Applies a single move, returning the successor state. Rejects any
    /// move that is not in [`legal_moves`](Self::legal_moves), naming the
    /// violated precondition.
    pub fn apply_move(&self, state: &ShopState, mv: &Move) -> Result<ShopState, ModelError> {
        if mv.job >= state.jobs.len() {
            return Err(ModelError::IllegalMove {
                job: mv.job,
                reason: "no such job".into(),
            });
        }
        let js = &state.jobs[mv.job];
        if mv.from != js.location {
            return Err(ModelError::IllegalMove {
                job: mv.job,
                reason: format!(
                    "move states the job is at {}, but it is at {}",
                    self.format_ref(mv.from),
                    self.format_ref(js.location)
                ),
            });
        }
        let mut new_js = js.clone();
        match mv.to {
            MachineRef::In => {
                return Err(ModelError::IllegalMove {
                    job: mv.job,
                    reason: "a job can never move back to IN".into(),
                });
            }
            MachineRef::Out => {
                if !js.remaining.is_empty() {
                    return Err(ModelError::IllegalMove {
                        job: mv.job,
                        reason: "job still has remaining machines".into(),
                    });
                }
                if js.location == MachineRef::Out {
                    return Err(ModelError::IllegalMove {
                        job: mv.job,
                        reason: "job already left the system".into(),
                    });
                }
                new_js.location = MachineRef::Out;
            }
            MachineRef::Machine(target) => {
                if !js.remaining.contains(&target) {
                    return Err(ModelError::IllegalMove {
                        job: mv.job,
                        reason: "target machine not in the job's remaining set".into(),
                    });
                }
                // The job vacates its current location first, but since
                // location ∉ remaining the target's occupancy is unaffected
                // by the departure.
                if state.occupancy(target) >= self.machines[target].capacity {
                    return Err(ModelError::IllegalMove {
                        job: mv.job,
                        reason: format!("target machine {} is full", self.machines[target].name),
                    });
                }
                new_js.location = MachineRef::Machine(target);
                new_js.remaining.remove(&target);
            }
        }
        let mut next = state.clone();
        next.jobs[mv.job] = new_js;
        debug_assert!(self.validate_state(&next).is_ok());
        debug_assert_eq!(next.potential() + 1, state.potential());
        Ok(next)
    }

    /// True iff `state` has no successors and is not the final state.
    /// Assumes a valid state.
    pub fn is_deadlock(&self, state: &ShopState) -> bool {
        self.legal_moves_unchecked(state).is_empty() && !self.is_final(state)
    }

    /// The per-job necessary condition for `t` being reachable from `s`:
    /// each job is unchanged, has advanced one machine with a shrunken
    /// remaining set, or has completed at `OUT`.
    pub fn is_subset_reachable(&self, s: &ShopState, t: &ShopState) -> bool {
        s.jobs.iter().zip(&t.jobs).all(|(sj, tj)| {
            (tj.location == sj.location && tj.remaining == sj.remaining)
                || (matches!(tj.location, MachineRef::Machine(i) if sj.remaining.contains(&i))
                    && tj.remaining.is_subset(&sj.remaining)
                    && !tj.remaining.contains(&tj.location.machine().unwrap()))
                || (tj.location == MachineRef::Out && tj.remaining.is_empty())
        })
    }

    fn format_ref(&self, r: MachineRef) -> String {
        match r {
            MachineRef::In => "IN".into(),
            MachineRef::Out => "OUT".into(),
            MachineRef::Machine(i) => self.machines[i].name.clone(),
        }
    }
}

/// Per-job part of a state: current location plus remaining machine set.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct JobState {
    pub location: MachineRef,
    pub remaining: BTreeSet<usize>,
}

/// A system state: one [`JobState`] per job, in job declaration order.
///
/// States are immutable values; `Eq`/`Hash` over the sorted remaining
/// sets give the canonical encoding used for search memoization.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ShopState {
    pub jobs: Vec<JobState>,
}

impl ShopState {
    /// Number of jobs currently located on machine `machine`.
    pub fn occupancy(&self, machine: usize) -> usize {
        self.jobs
            .iter()
            .filter(|js| js.location == MachineRef::Machine(machine))
            .count()
    }

    /// Indices of the jobs currently located on `machine` (`𝓙(M)`).
    pub fn occupants(&self, machine: usize) -> Vec<usize> {
        self.jobs
            .iter()
            .enumerate()
            .filter(|(_, js)| js.location == MachineRef::Machine(machine))
            .map(|(i, _)| i)
            .collect()
    }

    /// Σ over jobs not at `OUT` of (|remaining| + 1). Every legal move
    /// decreases this by exactly one, and it is zero exactly at the final
    /// state, which bounds every move sequence.
    pub fn potential(&self) -> usize {
        self.jobs
            .iter()
            .filter(|js| js.location != MachineRef::Out)
            .map(|js| js.remaining.len() + 1)
            .sum()
    }
}

/// Relocation of a single job.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Move {
    pub job: usize,
    pub from: MachineRef,
    pub to: MachineRef,
}

/// An ordered sequence of moves, validated by replaying it from a start
/// state.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Schedule {
    pub moves: Vec<Move>,
}

impl Schedule {
    pub fn new(moves: Vec<Move>) -> Self {
        Schedule { moves }
    }

    pub fn len(&self) -> usize {
        self.moves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moves.is_empty()
    }

    /// Applies all moves in order from `start`, returning the end state.
    /// Fails on the first illegal intermediate move.
    pub fn replay(
        &self,
        system: &OpenShopSystem,
        start: &ShopState,
    ) -> Result<ShopState, ModelError> {
        system.validate_state(start)?;
        let mut state = start.clone();
        for mv in &self.moves {
            state = system.apply_move(&state, mv)?;
        }
        Ok(state)
    }
}

impl fmt::Display for MachineRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MachineRef::In => write!(f, "IN"),
            MachineRef::Out => write!(f, "OUT"),
            MachineRef::Machine(i) => write!(f, "M#{i}"),
        }
    }
}

// ---------------------------------------------------------------------------
// Text formats
//
// System file:    machine <name> <capacity>
//                 job <name> [<machine-name> ...]
// State file:     job <name> at <machine-name|IN|OUT> todo [<machine-name> ...]
// Schedule file:  move <job-name> <from> <to>
//
// `#` starts a comment, blank lines are ignored.
// ---------------------------------------------------------------------------

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = match line.find('#') {
            Some(pos) => &line[..pos],
            None => line,
        };
        let line = line.trim();
        if line.is_empty() {
            None
        } else {
            Some((i + 1, line))
        }
    })
}

fn parse_err(line: usize, msg: impl Into<String>) -> ModelError {
    ModelError::Parse {
        line,
        msg: msg.into(),
    }
}

pub fn parse_system(text: &str) -> Result<OpenShopSystem, ModelError> {
    let mut machines: Vec<Machine> = Vec::new();
    let mut jobs: Vec<(usize, String, Vec<String>)> = Vec::new();
    for (line_no, line) in content_lines(text) {
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("machine") => {
                let name = tokens
                    .next()
                    .ok_or_else(|| parse_err(line_no, "machine line needs a name"))?;
                let cap = tokens
                    .next()
                    .ok_or_else(|| parse_err(line_no, "machine line needs a capacity"))?;
                let capacity: usize = cap
                    .parse()
                    .map_err(|_| parse_err(line_no, format!("bad capacity {cap:?}")))?;
                if capacity < 1 {
                    return Err(parse_err(line_no, "capacity must be at least 1"));
                }
                if tokens.next().is_some() {
                    return Err(parse_err(line_no, "trailing tokens after capacity"));
                }
                machines.push(Machine {
                    name: name.to_string(),
                    capacity,
                });
            }
            Some("job") => {
                let name = tokens
                    .next()
                    .ok_or_else(|| parse_err(line_no, "job line needs a name"))?;
                jobs.push((
                    line_no,
                    name.to_string(),
                    tokens.map(str::to_string).collect(),
                ));
            }
            Some(other) => {
                return Err(parse_err(line_no, format!("unknown directive {other:?}")));
            }
            None => unreachable!(),
        }
    }
    let mut resolved_jobs = Vec::new();
    for (line_no, name, required_names) in jobs {
        let mut required = BTreeSet::new();
        for mname in &required_names {
            let idx = machines
                .iter()
                .position(|m| &m.name == mname)
                .ok_or_else(|| parse_err(line_no, format!("unknown machine {mname:?}")))?;
            if !required.insert(idx) {
                return Err(parse_err(
                    line_no,
                    format!("machine {mname:?} repeated in required set"),
                ));
            }
        }
        resolved_jobs.push(Job { name, required });
    }
    OpenShopSystem::new(machines, resolved_jobs)
}

pub fn serialize_system(system: &OpenShopSystem) -> String {
    let mut out = String::new();
    for m in system.machines() {
        out.push_str(&format!("machine {} {}\n", m.name, m.capacity));
    }
    for j in system.jobs() {
        out.push_str(&format!("job {}", j.name));
        for &i in &j.required {
            out.push(' ');
            out.push_str(&system.machines()[i].name);
        }
        out.push('\n');
    }
    out
}

fn parse_location(
    system: &OpenShopSystem,
    token: &str,
    line_no: usize,
) -> Result<MachineRef, ModelError> {
    match token {
        "IN" => Ok(MachineRef::In),
        "OUT" => Ok(MachineRef::Out),
        name => system
            .machine_index(name)
            .map(MachineRef::Machine)
            .ok_or_else(|| parse_err(line_no, format!("unknown machine {name:?}"))),
    }
}

pub fn parse_state(system: &OpenShopSystem, text: &str) -> Result<ShopState, ModelError> {
    let mut jobs: Vec<Option<JobState>> = vec![None; system.job_count()];
    for (line_no, line) in content_lines(text) {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() < 4 || tokens[0] != "job" || tokens[2] != "at" {
            return Err(parse_err(
                line_no,
                "expected: job <name> at <location> todo [<machine> ...]",
            ));
        }
        let job_idx = system
            .job_index(tokens[1])
            .ok_or_else(|| parse_err(line_no, format!("unknown job {:?}", tokens[1])))?;
        if jobs[job_idx].is_some() {
            return Err(parse_err(
                line_no,
                format!("job {:?} declared twice", tokens[1]),
            ));
        }
        let location = parse_location(system, tokens[3], line_no)?;
        if tokens.len() < 5 || tokens[4] != "todo" {
            return Err(parse_err(line_no, "expected 'todo' after the location"));
        }
        let mut remaining = BTreeSet::new();
        for mname in &tokens[5..] {
            let idx = system
                .machine_index(mname)
                .ok_or_else(|| parse_err(line_no, format!("unknown machine {mname:?}")))?;
            if !remaining.insert(idx) {
                return Err(parse_err(
                    line_no,
                    format!("machine {mname:?} repeated in todo list"),
                ));
            }
        }
        jobs[job_idx] = Some(JobState {
            location,
            remaining,
        });
    }
    let jobs = jobs
        .into_iter()
        .enumerate()
        .map(|(i, js)| {
            js.ok_or_else(|| {
                ModelError::InvalidState(format!("job {} missing from state", system.jobs()[i].name))
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let state = ShopState { jobs };
    system.validate_state(&state)?;
    Ok(state)
}

pub fn serialize_state(system: &OpenShopSystem, state: &ShopState) -> String {
    let mut out = String::new();
    for (job, js) in state.jobs.iter().enumerate() {
        out.push_str(&format!(
            "job {} at {} todo",
            system.jobs()[job].name,
            system.format_ref(js.location)
        ));
        for &i in &js.remaining {
            out.push(' ');
            out.push_str(&system.machines()[i].name);
        }
        out.push('\n');
    }
    out
}

pub fn parse_schedule(system: &OpenShopSystem, text: &str) -> Result<Schedule, ModelError> {
    let mut moves = Vec::new();
    for (line_no, line) in content_lines(text) {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 4 || tokens[0] != "move" {
            return Err(parse_err(line_no, "expected: move <job> <from> <to>"));
        }
        let job = system
            .job_index(tokens[1])
            .ok_or_else(|| parse_err(line_no, format!("unknown job {:?}", tokens[1])))?;
        let from = parse_location(system, tokens[2], line_no)?;
        let to = parse_location(system, tokens[3], line_no)?;
        moves.push(Move { job, from, to });
    }
    Ok(Schedule::new(moves))
}

pub fn serialize_schedule(system: &OpenShopSystem, schedule: &Schedule) -> String {
    let mut out = String::new();
    for mv in &schedule.moves {
        out.push_str(&format!(
            "move {} {} {}\n",
            system.jobs()[mv.job].name,
            system.format_ref(mv.from),
            system.format_ref(mv.to)
        ));
    }
    out
}
