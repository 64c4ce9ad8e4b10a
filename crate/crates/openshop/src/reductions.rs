//! Hardness gadgets as executable generators.
//!
//! Two classic reductions drive the worst-case analysis of this crate:
//! 3-SAT encodes into State-to-State Reachability, and three-dimensional
//! matching (3DM) encodes into Reachable Deadlock. Both directions that
//! *construct* something are implemented here: the instance generators,
//! and the witness schedules that certify YES answers (a satisfying
//! assignment yields a four-phase schedule from `s` to `t`; a perfect
//! matching yields a reachable deadlock state with an explicit blocking
//! set). The converse directions are exercised empirically against the
//! exact search in the tests.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::safety::BlockingSet;
use crate::shop_model::{
    Job, Machine, MachineRef, Move, OpenShopSystem, Schedule, ShopState,
};

#[derive(Debug, Error)]
pub enum ReductionError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid formula: {0}")]
    InvalidFormula(String),
    #[error("assignment does not satisfy clause {clause}")]
    UnsatisfiedClause { clause: usize },
    #[error("invalid 3DM instance: {0}")]
    InvalidInstance(String),
    #[error("not a perfect matching: {0}")]
    NotPerfectMatching(String),
}

// ---------------------------------------------------------------------------
// 3-SAT → State-to-State Reachability
// ---------------------------------------------------------------------------

/// A literal: variable index (0-based) plus sign.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Literal {
    pub var: usize,
    pub negated: bool,
}

impl Literal {
    pub fn positive(var: usize) -> Self {
        Literal {
            var,
            negated: false,
        }
    }

    pub fn negative(var: usize) -> Self {
        Literal { var, negated: true }
    }

    fn name(&self) -> String {
        if self.negated {
            format!("not_x{}", self.var + 1)
        } else {
            format!("x{}", self.var + 1)
        }
    }

    fn holds_under(&self, assignment: &[bool]) -> bool {
        assignment[self.var] != self.negated
    }
}

/// A CNF formula with exactly three literals per clause, over pairwise
/// distinct variables within each clause. Clauses mixing a variable with
/// its own negation would make the gadget degenerate (the two `U`
/// machines coincide), so they are rejected up front.
#[derive(Clone, Debug)]
pub struct CnfFormula {
    variables: usize,
    clauses: Vec<[Literal; 3]>,
}

impl CnfFormula {
    pub fn new(variables: usize, clauses: Vec<[Literal; 3]>) -> Result<Self, ReductionError> {
        for (j, clause) in clauses.iter().enumerate() {
            for lit in clause {
                if lit.var >= variables {
                    return Err(ReductionError::InvalidFormula(format!(
                        "clause {} uses variable index {} out of range",
                        j + 1,
                        lit.var
                    )));
                }
            }
            let vars: BTreeSet<usize> = clause.iter().map(|l| l.var).collect();
            if vars.len() != 3 {
                return Err(ReductionError::InvalidFormula(format!(
                    "clause {} repeats a variable; three distinct variables are required",
                    j + 1
                )));
            }
        }
        Ok(CnfFormula { variables, clauses })
    }

    pub fn variable_count(&self) -> usize {
        self.variables
    }

    pub fn clauses(&self) -> &[[Literal; 3]] {
        &self.clauses
    }

    /// `Ok` iff every clause has a true literal; otherwise the index of
    /// the first violated clause.
    pub fn check_assignment(&self, assignment: &[bool]) -> Result<(), usize> {
        for (j, clause) in self.clauses.iter().enumerate() {
            if !clause.iter().any(|l| l.holds_under(assignment)) {
                return Err(j);
            }
        }
        Ok(())
    }
}

/// Parses a DIMACS-style CNF: `c` comment lines, a `p cnf <vars>
/// <clauses>` header, then clauses as signed 1-based integers terminated
/// by `0` (clauses may span lines).
pub fn parse_dimacs(text: &str) -> Result<CnfFormula, ReductionError> {
    let mut header: Option<(usize, usize)> = None;
    let mut literals: Vec<Literal> = Vec::new();
    let mut clauses: Vec<[Literal; 3]> = Vec::new();
    for (line_no, raw) in text.lines().enumerate() {
        let line_no = line_no + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        let err = |msg: String| ReductionError::Parse { line: line_no, msg };
        if line.starts_with('p') {
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if tokens.len() != 4 || tokens[1] != "cnf" {
                return Err(err("expected header: p cnf <vars> <clauses>".into()));
            }
            let vars = tokens[2]
                .parse()
                .map_err(|_| err(format!("bad variable count {:?}", tokens[2])))?;
            let count = tokens[3]
                .parse()
                .map_err(|_| err(format!("bad clause count {:?}", tokens[3])))?;
            if header.replace((vars, count)).is_some() {
                return Err(err("duplicate header".into()));
            }
            continue;
        }
        let Some((vars, _)) = header else {
            return Err(err("clause before the p cnf header".into()));
        };
        for token in line.split_whitespace() {
            let value: i64 = token
                .parse()
                .map_err(|_| err(format!("bad literal {token:?}")))?;
            if value == 0 {
                let clause: [Literal; 3] = literals
                    .as_slice()
                    .try_into()
                    .map_err(|_| err(format!("clause has {} literals, need 3", literals.len())))?;
                clauses.push(clause);
                literals.clear();
            } else {
                let var = value.unsigned_abs() as usize - 1;
                if var >= vars {
                    return Err(err(format!("variable {} out of range", value.abs())));
                }
                literals.push(Literal {
                    var,
                    negated: value < 0,
                });
            }
        }
    }
    let Some((vars, count)) = header else {
        return Err(ReductionError::Parse {
            line: 1,
            msg: "missing p cnf header".into(),
        });
    };
    if !literals.is_empty() {
        return Err(ReductionError::InvalidFormula(
            "trailing literals without a closing 0".into(),
        ));
    }
    if clauses.len() != count {
        return Err(ReductionError::InvalidFormula(format!(
            "header promises {count} clauses, found {}",
            clauses.len()
        )));
    }
    CnfFormula::new(vars, clauses)
}

/// The generated State-to-State instance. Machine and job indices are
/// fixed functions of the formula layout, exposed through the accessor
/// methods so callers and tests never hard-code offsets.
#[derive(Clone, Debug)]
pub struct SatReductionOutput {
    pub system: OpenShopSystem,
    pub s: ShopState,
    pub t: ShopState,
    formula: CnfFormula,
}

impl SatReductionOutput {
    pub fn formula(&self) -> &CnfFormula {
        &self.formula
    }

    /// `S(ℓ)`: one machine of capacity 1 per literal.
    pub fn s_machine(&self, lit: Literal) -> usize {
        5 * lit.var + usize::from(lit.negated)
    }

    /// `T(ℓ)`: one machine of capacity 1 per literal.
    pub fn t_machine(&self, lit: Literal) -> usize {
        5 * lit.var + 2 + usize::from(lit.negated)
    }

    /// `U(i)`: capacity 2, shared by both literals of variable `var`.
    pub fn u_machine(&self, var: usize) -> usize {
        5 * var + 4
    }

    /// `V(c_j)`: capacity 3, one per clause.
    pub fn v_machine(&self, clause: usize) -> usize {
        5 * self.formula.variables + clause
    }

    /// `J(ℓ)`: sits on `S(ℓ)` in `s`, on `U(i)` in `t`.
    pub fn job_j(&self, lit: Literal) -> usize {
        4 * lit.var + usize::from(lit.negated)
    }

    /// `J′(ℓ)`: outside in `s`, exited in `t`.
    pub fn job_jp(&self, lit: Literal) -> usize {
        4 * lit.var + 2 + usize::from(lit.negated)
    }

    /// `K(c_j, ℓ)` for the `pos`-th literal of clause `clause`.
    pub fn job_k(&self, clause: usize, pos: usize) -> usize {
        4 * self.formula.variables + 6 * clause + pos
    }

    /// `K′(c_j, ℓ)` for the `pos`-th literal of clause `clause`.
    pub fn job_kp(&self, clause: usize, pos: usize) -> usize {
        4 * self.formula.variables + 6 * clause + 3 + pos
    }
}

fn literals_of(var: usize) -> [Literal; 2] {
    [Literal::positive(var), Literal::negative(var)]
}

/// Builds the open shop system and the state pair `(s, t)` such that `t`
/// is reachable from `s` iff the formula is satisfiable. Sizes: `5n + m`
/// machines and `4n + 6m` jobs.
pub fn sat_to_state_to_state(formula: CnfFormula) -> SatReductionOutput {
    let n = formula.variables;
    let mut machines = Vec::with_capacity(5 * n + formula.clauses.len());
    for var in 0..n {
        for lit in literals_of(var) {
            machines.push(Machine {
                name: format!("S_{}", lit.name()),
                capacity: 1,
            });
        }
        for lit in literals_of(var) {
            machines.push(Machine {
                name: format!("T_{}", lit.name()),
                capacity: 1,
            });
        }
        machines.push(Machine {
            name: format!("U_{}", var + 1),
            capacity: 2,
        });
    }
    for clause in 0..formula.clauses.len() {
        machines.push(Machine {
            name: format!("V_c{}", clause + 1),
            capacity: 3,
        });
    }

    // machine index helpers mirroring the accessors (which need the
    // finished output to exist)
    let s_of = |lit: Literal| 5 * lit.var + usize::from(lit.negated);
    let t_of = |lit: Literal| 5 * lit.var + 2 + usize::from(lit.negated);
    let u_of = |var: usize| 5 * var + 4;
    let v_of = |clause: usize| 5 * n + clause;

    let mut jobs = Vec::with_capacity(4 * n + 6 * formula.clauses.len());
    for var in 0..n {
        for lit in literals_of(var) {
            jobs.push(Job {
                name: format!("J_{}", lit.name()),
                required: [s_of(lit), u_of(var)].into_iter().collect(),
            });
        }
        for lit in literals_of(var) {
            jobs.push(Job {
                name: format!("Jp_{}", lit.name()),
                required: [s_of(lit), t_of(lit), u_of(var)].into_iter().collect(),
            });
        }
    }
    for (j, clause) in formula.clauses.iter().enumerate() {
        for lit in clause {
            jobs.push(Job {
                name: format!("K_c{}_{}", j + 1, lit.name()),
                required: [v_of(j), s_of(*lit), t_of(*lit)].into_iter().collect(),
            });
        }
        for lit in clause {
            jobs.push(Job {
                name: format!("Kp_c{}_{}", j + 1, lit.name()),
                required: [u_of(lit.var), v_of(j)].into_iter().collect(),
            });
        }
    }
    let system = OpenShopSystem::new(machines, jobs).expect("generated system is well-formed");

    let mut s = system.initial_state();
    let mut t = system.initial_state();
    let place = |state: &mut ShopState, job: usize, loc: MachineRef, rem: BTreeSet<usize>| {
        state.jobs[job].location = loc;
        state.jobs[job].remaining = rem;
    };
    for var in 0..n {
        for lit in literals_of(var) {
            let j = 4 * var + usize::from(lit.negated);
            // J(ℓ): on S(ℓ) waiting for U(i) in s; parked on U(i) in t
            place(
                &mut s,
                j,
                MachineRef::Machine(s_of(lit)),
                [u_of(var)].into_iter().collect(),
            );
            place(&mut t, j, MachineRef::Machine(u_of(var)), BTreeSet::new());
            // J′(ℓ): outside in s (already true), exited in t
            let jp = 4 * var + 2 + usize::from(lit.negated);
            place(&mut t, jp, MachineRef::Out, BTreeSet::new());
        }
    }
    for (j, clause) in formula.clauses.iter().enumerate() {
        for (pos, lit) in clause.iter().enumerate() {
            // K: blocks V(c_j) in s, exited in t
            let k = 4 * n + 6 * j + pos;
            place(
                &mut s,
                k,
                MachineRef::Machine(v_of(j)),
                [s_of(*lit), t_of(*lit)].into_iter().collect(),
            );
            place(&mut t, k, MachineRef::Out, BTreeSet::new());
            // K′: outside in s, exited in t
            let kp = 4 * n + 6 * j + 3 + pos;
            place(&mut t, kp, MachineRef::Out, BTreeSet::new());
        }
    }
    debug_assert!(system.validate_state(&s).is_ok());
    debug_assert!(system.validate_state(&t).is_ok());
    SatReductionOutput {
        system,
        s,
        t,
        formula,
    }
}

/// The four-phase schedule from `s` to `t` driven by a satisfying
/// assignment; errors with the first violated clause otherwise.
///
/// Phase 1 activates every variable on its true side (the true `J` job
/// claims `U`, the true `J′` job completes, the false `J′` job parks on
/// its `T` machine). Phase 2 clears, per clause, the `K` job of the
/// first true literal and then cycles all three `K′` jobs through `U`
/// and `V`. Phase 3 deactivates the variables and flushes the parked
/// `J′` jobs. Phase 4 flushes the remaining `K` jobs.
pub fn sat_witness_schedule(
    output: &SatReductionOutput,
    assignment: &[bool],
) -> Result<Schedule, ReductionError> {
    let formula = &output.formula;
    if assignment.len() != formula.variables {
        return Err(ReductionError::InvalidFormula(format!(
            "assignment covers {} variables, formula has {}",
            assignment.len(),
            formula.variables
        )));
    }
    if let Err(clause) = formula.check_assignment(assignment) {
        return Err(ReductionError::UnsatisfiedClause { clause: clause + 1 });
    }

    let mut moves = Vec::new();
    let mut push = |job: usize, from: MachineRef, to: MachineRef| {
        moves.push(Move { job, from, to });
    };
    let mach = MachineRef::Machine;

    // phase 1: activate every variable on its true side
    for (var, &value) in assignment.iter().enumerate() {
        let truth = Literal {
            var,
            negated: !value,
        };
        let false_lit = Literal {
            var,
            negated: assignment[var],
        };
        let u = output.u_machine(var);
        push(output.job_j(truth), mach(output.s_machine(truth)), mach(u));
        let jp = output.job_jp(truth);
        push(jp, MachineRef::In, mach(u));
        push(jp, mach(u), mach(output.t_machine(truth)));
        push(jp, mach(output.t_machine(truth)), mach(output.s_machine(truth)));
        push(jp, mach(output.s_machine(truth)), MachineRef::Out);
        let jp_false = output.job_jp(false_lit);
        push(jp_false, MachineRef::In, mach(u));
        push(jp_false, mach(u), mach(output.t_machine(false_lit)));
    }

    // phase 2: serve every clause through its first true literal
    let mut picked = Vec::with_capacity(formula.clauses.len());
    for (j, clause) in formula.clauses.iter().enumerate() {
        let pos = clause
            .iter()
            .position(|l| l.holds_under(assignment))
            .expect("assignment satisfies every clause");
        picked.push(pos);
        let lit = clause[pos];
        let k = output.job_k(j, pos);
        let v = output.v_machine(j);
        push(k, mach(v), mach(output.s_machine(lit)));
        push(k, mach(output.s_machine(lit)), mach(output.t_machine(lit)));
        push(k, mach(output.t_machine(lit)), MachineRef::Out);
        for (pos, lit) in clause.iter().enumerate() {
            let kp = output.job_kp(j, pos);
            push(kp, MachineRef::In, mach(output.u_machine(lit.var)));
            push(kp, mach(output.u_machine(lit.var)), mach(v));
            push(kp, mach(v), MachineRef::Out);
        }
    }

    // phase 3: deactivate variables, flush the parked J′ jobs
    for (var, &value) in assignment.iter().enumerate() {
        let false_lit = Literal {
            var,
            negated: value,
        };
        let u = output.u_machine(var);
        push(
            output.job_j(false_lit),
            mach(output.s_machine(false_lit)),
            mach(u),
        );
        let jp = output.job_jp(false_lit);
        push(jp, mach(output.t_machine(false_lit)), mach(output.s_machine(false_lit)));
        push(jp, mach(output.s_machine(false_lit)), MachineRef::Out);
    }

    // phase 4: flush the K jobs of the unpicked literals
    for (j, clause) in formula.clauses.iter().enumerate() {
        for (pos, lit) in clause.iter().enumerate() {
            if pos == picked[j] {
                continue;
            }
            let k = output.job_k(j, pos);
            push(k, mach(output.v_machine(j)), mach(output.s_machine(*lit)));
            push(k, mach(output.s_machine(*lit)), mach(output.t_machine(*lit)));
            push(k, mach(output.t_machine(*lit)), MachineRef::Out);
        }
    }

    let schedule = Schedule::new(moves);
    debug_assert_eq!(
        schedule.replay(&output.system, &output.s).ok().as_ref(),
        Some(&output.t)
    );
    Ok(schedule)
}

// ---------------------------------------------------------------------------
// 3DM → Reachable Deadlock
// ---------------------------------------------------------------------------

/// A three-dimensional matching instance over `A`, `B`, `C`, each of
/// size `n`, with 0-based element indices. Every element may occur in at
/// most three triples.
#[derive(Clone, Debug)]
pub struct TdmInstance {
    n: usize,
    triples: Vec<[usize; 3]>,
}

impl TdmInstance {
    pub fn new(n: usize, triples: Vec<[usize; 3]>) -> Result<Self, ReductionError> {
        let mut seen = BTreeSet::new();
        let mut occurrences = vec![[0usize; 3]; n];
        for triple in &triples {
            for (axis, &e) in triple.iter().enumerate() {
                if e >= n {
                    return Err(ReductionError::InvalidInstance(format!(
                        "element index {e} out of range for n = {n}"
                    )));
                }
                occurrences[e][axis] += 1;
            }
            if !seen.insert(*triple) {
                return Err(ReductionError::InvalidInstance(format!(
                    "duplicate triple {triple:?}"
                )));
            }
        }
        for (e, occ) in occurrences.iter().enumerate() {
            for (axis, label) in ["a", "b", "c"].into_iter().enumerate() {
                if occ[axis] > 3 {
                    return Err(ReductionError::InvalidInstance(format!(
                        "element {label}{} occurs in more than three triples",
                        e + 1
                    )));
                }
            }
        }
        Ok(TdmInstance { n, triples })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn triples(&self) -> &[[usize; 3]] {
        &self.triples
    }

    /// True iff the triples at `matching` cover every element exactly once.
    pub fn is_perfect_matching(&self, matching: &[usize]) -> bool {
        self.check_matching(matching).is_ok()
    }

    fn check_matching(&self, matching: &[usize]) -> Result<(), ReductionError> {
        let mut covered = vec![[false; 3]; self.n];
        for &idx in matching {
            let Some(triple) = self.triples.get(idx) else {
                return Err(ReductionError::NotPerfectMatching(format!(
                    "triple index {idx} out of range"
                )));
            };
            for (axis, &e) in triple.iter().enumerate() {
                if covered[e][axis] {
                    let label = ["a", "b", "c"][axis];
                    return Err(ReductionError::NotPerfectMatching(format!(
                        "element {label}{} covered twice",
                        e + 1
                    )));
                }
                covered[e][axis] = true;
            }
        }
        for (e, cov) in covered.iter().enumerate() {
            for (axis, label) in ["a", "b", "c"].into_iter().enumerate() {
                if !cov[axis] {
                    return Err(ReductionError::NotPerfectMatching(format!(
                        "element {label}{} is not covered",
                        e + 1
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Parses a triples file: one `a<i> b<j> c<k>` line per triple, 1-based
/// indices, `#` comments and blank lines ignored. `n` is the largest
/// index mentioned.
pub fn parse_triples(text: &str) -> Result<TdmInstance, ReductionError> {
    let mut triples = Vec::new();
    let mut n = 0;
    for (line_no, raw) in text.lines().enumerate() {
        let line_no = line_no + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| ReductionError::Parse { line: line_no, msg };
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 3 {
            return Err(err("expected: a<i> b<j> c<k>".into()));
        }
        let mut triple = [0usize; 3];
        for (axis, (token, prefix)) in tokens.iter().zip(["a", "b", "c"]).enumerate() {
            let digits = token
                .strip_prefix(prefix)
                .ok_or_else(|| err(format!("expected {prefix}<index>, got {token:?}")))?;
            let idx: usize = digits
                .parse()
                .map_err(|_| err(format!("bad index in {token:?}")))?;
            if idx == 0 {
                return Err(err("indices are 1-based".into()));
            }
            triple[axis] = idx - 1;
            n = n.max(idx);
        }
        triples.push(triple);
    }
    TdmInstance::new(n, triples)
}

/// The generated Reachable Deadlock instance: `n + 2` unit-capacity
/// structure machines, one capacity-3 machine per triple, `4n + 2` jobs.
#[derive(Clone, Debug)]
pub struct TdmReductionOutput {
    pub system: OpenShopSystem,
    instance: TdmInstance,
}

impl TdmReductionOutput {
    pub fn instance(&self) -> &TdmInstance {
        &self.instance
    }

    /// `S_i` for `0 ≤ i ≤ n+1`.
    pub fn structure_machine(&self, i: usize) -> usize {
        i
    }

    /// `T_t` for the `idx`-th triple.
    pub fn triple_machine(&self, idx: usize) -> usize {
        self.instance.n + 2 + idx
    }

    /// `J⁺(a_i)` (0-based element index).
    pub fn job_a_plus(&self, i: usize) -> usize {
        2 * i
    }

    /// `J⁻(a_i)`.
    pub fn job_a_minus(&self, i: usize) -> usize {
        2 * i + 1
    }

    /// `J(b_j)`.
    pub fn job_b(&self, j: usize) -> usize {
        2 * self.instance.n + j
    }

    /// `J(c_k)`.
    pub fn job_c(&self, k: usize) -> usize {
        3 * self.instance.n + k
    }

    /// `D_0`.
    pub fn job_d0(&self) -> usize {
        4 * self.instance.n
    }

    /// `D_{n+1}`.
    pub fn job_d_last(&self) -> usize {
        4 * self.instance.n + 1
    }
}

/// Builds the open shop system that has a reachable deadlock iff the
/// instance has a perfect matching.
pub fn tdm_to_deadlock(instance: TdmInstance) -> TdmReductionOutput {
    let n = instance.n;
    let mut machines = Vec::with_capacity(n + 2 + instance.triples.len());
    for i in 0..=n + 1 {
        machines.push(Machine {
            name: format!("S_{i}"),
            capacity: 1,
        });
    }
    for triple in &instance.triples {
        machines.push(Machine {
            name: format!(
                "T_a{}_b{}_c{}",
                triple[0] + 1,
                triple[1] + 1,
                triple[2] + 1
            ),
            capacity: 3,
        });
    }
    let triple_machines_of = |axis: usize, e: usize| {
        instance
            .triples
            .iter()
            .enumerate()
            .filter(move |(_, t)| t[axis] == e)
            .map(|(idx, _)| n + 2 + idx)
    };
    let mut jobs = Vec::with_capacity(4 * n + 2);
    for i in 0..n {
        jobs.push(Job {
            name: format!("Jp_a{}", i + 1),
            required: [i + 1].into_iter().chain(triple_machines_of(0, i)).collect(),
        });
        jobs.push(Job {
            name: format!("Jm_a{}", i + 1),
            required: [i].into_iter().chain(triple_machines_of(0, i)).collect(),
        });
    }
    for j in 0..n {
        jobs.push(Job {
            name: format!("J_b{}", j + 1),
            required: [n + 1].into_iter().chain(triple_machines_of(1, j)).collect(),
        });
    }
    for k in 0..n {
        jobs.push(Job {
            name: format!("J_c{}", k + 1),
            required: [n + 1].into_iter().chain(triple_machines_of(2, k)).collect(),
        });
    }
    jobs.push(Job {
        name: "D_0".into(),
        required: [0, n + 1].into_iter().collect(),
    });
    jobs.push(Job {
        name: format!("D_{}", n + 1),
        required: [n, n + 1].into_iter().collect(),
    });
    let system = OpenShopSystem::new(machines, jobs).expect("generated system is well-formed");
    TdmReductionOutput { system, instance }
}

/// Turns a perfect matching (triple indices) into a reachable deadlock:
/// the blocking set is all structure machines plus the matched triple
/// machines; every job has finished its work outside that set and parks
/// on its designated machine inside it. The entry schedule comes from
/// the one-job-at-a-time sufficient condition.
pub fn tdm_witness_deadlock(
    output: &TdmReductionOutput,
    matching: &[usize],
) -> Result<(ShopState, Schedule, BlockingSet), ReductionError> {
    let instance = &output.instance;
    instance.check_matching(matching)?;
    let n = instance.n;
    let anchor: BTreeSet<usize> = (0..=n + 1)
        .chain(matching.iter().map(|&idx| output.triple_machine(idx)))
        .collect();

    let system = &output.system;
    let mut state = system.final_state();
    let park = |state: &mut ShopState, job: usize, machine: usize| {
        let in_anchor: BTreeSet<usize> = system.jobs()[job]
            .required
            .iter()
            .copied()
            .filter(|m| anchor.contains(m))
            .collect();
        debug_assert!(in_anchor.contains(&machine));
        state.jobs[job].location = MachineRef::Machine(machine);
        state.jobs[job].remaining = in_anchor.into_iter().filter(|&m| m != machine).collect();
    };
    park(&mut state, output.job_d0(), output.structure_machine(0));
    park(&mut state, output.job_d_last(), output.structure_machine(n + 1));
    for &idx in matching {
        let [a, b, c] = instance.triples[idx];
        let t_machine = output.triple_machine(idx);
        park(&mut state, output.job_a_minus(a), t_machine);
        park(&mut state, output.job_b(b), t_machine);
        park(&mut state, output.job_c(c), t_machine);
        park(&mut state, output.job_a_plus(a), output.structure_machine(a + 1));
    }
    system
        .validate_state(&state)
        .expect("constructed deadlock state is well-formed");

    let schedule = crate::reachability::kkk_witness(system, &state, &anchor)
        .expect("every pending job parks inside the anchor");
    debug_assert!(system.is_deadlock(&state));
    debug_assert!(crate::safety::verify_blocking_set(system, &state, &anchor));
    let witness_jobs = anchor.iter().flat_map(|&m| state.occupants(m)).collect();
    let blocking = BlockingSet {
        machines: anchor,
        witness_jobs,
    };
    Ok((state, schedule, blocking))
}
