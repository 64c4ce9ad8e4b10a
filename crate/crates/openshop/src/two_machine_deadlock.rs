//! Reachable Deadlock for systems where every job needs at most two
//! machines.
//!
//! Jobs with fewer than two machines can never participate in a
//! deadlock and are dropped. The rest are split fractionally over their
//! two machines by a linear program minimizing the total load that
//! exceeds the capacities. The LP is solved exactly as an integral
//! min-cost flow (the constraint matrix is totally unimodular); a
//! rational post-processing step then makes overloaded machines absorb a
//! job only when its other machine is overloaded too. After that, the
//! system can deadlock if and only if some machine carries load at or
//! above its capacity, and a capacity-saturating assignment of jobs to
//! those machines turns the verdict into an executable deadlock
//! schedule.

use std::collections::{BTreeMap, BTreeSet};

use num_rational::Ratio;
use thiserror::Error;

use crate::flow::FlowNetwork;
use crate::shop_model::{MachineRef, Move, OpenShopSystem, Schedule, ShopState};

pub type Rational = Ratio<i64>;

#[derive(Debug, Error)]
pub enum TwoMachineError {
    #[error("some job needs more than two machines; use exact search instead")]
    NotApplicable,
}

/// Exact fractional split of each two-machine job over its machines.
///
/// `x[(job, machine)]` is defined for every retained job and each of its
/// two machines and sums to one per job; `y[machine]` is the induced
/// machine load.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FractionalAssignment {
    pub x: BTreeMap<(usize, usize), Rational>,
    pub y: Vec<Rational>,
}

impl FractionalAssignment {
    /// Σ over machines of max(load, capacity) — the LP objective.
    pub fn objective(&self, system: &OpenShopSystem) -> Rational {
        (0..system.machine_count())
            .map(|m| {
                let cap = Rational::from_integer(system.capacity(m) as i64);
                self.y[m].max(cap)
            })
            .sum()
    }

    /// The feasibility constraints: x ≥ 0, unit split per job, y = Σ x.
    pub fn is_feasible(&self, system: &OpenShopSystem) -> bool {
        if self.x.values().any(|v| *v < Rational::from_integer(0)) {
            return false;
        }
        for (job, j) in system.jobs().iter().enumerate() {
            if j.required.len() != 2 {
                continue;
            }
            let total: Rational = j
                .required
                .iter()
                .map(|&m| self.x.get(&(job, m)).copied().unwrap_or_default())
                .sum();
            if total != Rational::from_integer(1) {
                return false;
            }
        }
        (0..system.machine_count()).all(|m| {
            let load: Rational = self
                .x
                .iter()
                .filter(|(&(_, machine), _)| machine == m)
                .map(|(_, v)| *v)
                .sum();
            load == self.y[m]
        })
    }
}

/// Machines whose post-processed load meets or exceeds capacity, plus
/// the jobs contributing positive load to them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CriticalSet {
    pub machines: BTreeSet<usize>,
    pub jobs: BTreeSet<usize>,
}

/// True iff every job needs at most two machines.
pub fn check_applicable(system: &OpenShopSystem) -> bool {
    system.jobs().iter().all(|j| j.required.len() <= 2)
}

fn two_machine_jobs(system: &OpenShopSystem) -> Vec<usize> {
    system
        .jobs()
        .iter()
        .enumerate()
        .filter(|(_, j)| j.required.len() == 2)
        .map(|(i, _)| i)
        .collect()
}

/// Solves the load-splitting LP exactly via min-cost flow: each retained
/// job pushes one unit split between its two machines; a machine passes
/// its first `cap` units on for free and pays one per unit beyond that.
/// The optimum is integral.
pub fn solve_lp(system: &OpenShopSystem) -> Result<FractionalAssignment, TwoMachineError> {
    if !check_applicable(system) {
        return Err(TwoMachineError::NotApplicable);
    }
    let jobs = two_machine_jobs(system);
    let m = system.machine_count();
    // nodes: 0 = source, 1..=jobs, then machines, then sink
    let machine_node = |i: usize| 1 + jobs.len() + i;
    let sink = 1 + jobs.len() + m;
    let mut net = FlowNetwork::new(sink + 1);
    let mut handles = BTreeMap::new();
    for (pos, &job) in jobs.iter().enumerate() {
        net.add_arc(0, 1 + pos, 1, 0);
        for &machine in &system.jobs()[job].required {
            let handle = net.add_arc(1 + pos, machine_node(machine), 1, 0);
            handles.insert((job, machine), handle);
        }
    }
    for i in 0..m {
        net.add_arc(machine_node(i), sink, system.capacity(i) as i64, 0);
        net.add_arc(machine_node(i), sink, jobs.len() as i64, 1);
    }
    let (flow, _cost) = net.min_cost_max_flow(0, sink);
    assert_eq!(flow as usize, jobs.len(), "every job has a machine");
    let mut x = BTreeMap::new();
    let mut y = vec![Rational::from_integer(0); m];
    for (&(job, machine), &handle) in &handles {
        let v = Rational::from_integer(net.flow(handle));
        x.insert((job, machine), v);
        y[machine] += v;
    }
    let assignment = FractionalAssignment { x, y };
    debug_assert!(assignment.is_feasible(system));
    Ok(assignment)
}

/// Post-processing towards property (*): while some job loads an
/// at-capacity machine although its other machine still has headroom,
/// shift load to the other machine. The shift empties the job's
/// contribution when possible and otherwise takes half the headroom, so
/// the at-capacity machine drops strictly below capacity while the other
/// stays strictly below; each step reduces the number of at-capacity
/// machines and the objective is untouched.
pub fn postprocess(
    system: &OpenShopSystem,
    assignment: &FractionalAssignment,
) -> FractionalAssignment {
    let mut out = assignment.clone();
    let before = out.objective(system);
    let jobs = two_machine_jobs(system);
    for _round in 0..=system.machine_count() {
        let mut violation = None;
        'scan: for &job in &jobs {
            let req: Vec<usize> = system.jobs()[job].required.iter().copied().collect();
            for (a, b) in [(req[0], req[1]), (req[1], req[0])] {
                let cap_a = Rational::from_integer(system.capacity(a) as i64);
                let cap_b = Rational::from_integer(system.capacity(b) as i64);
                if out.y[a] >= cap_a
                    && out.x[&(job, a)] > Rational::from_integer(0)
                    && out.y[b] < cap_b
                {
                    violation = Some((job, a, b));
                    break 'scan;
                }
            }
        }
        let Some((job, a, b)) = violation else {
            break;
        };
        let cap_a = Rational::from_integer(system.capacity(a) as i64);
        let cap_b = Rational::from_integer(system.capacity(b) as i64);
        // an over-capacity machine here would mean the input was not optimal
        assert_eq!(out.y[a], cap_a, "input assignment was not optimal");
        let headroom = cap_b - out.y[b];
        let share = out.x[&(job, a)];
        let step = if share < headroom { share } else { headroom / 2 };
        *out.x.get_mut(&(job, a)).unwrap() -= step;
        *out.x.get_mut(&(job, b)).unwrap() += step;
        out.y[a] -= step;
        out.y[b] += step;
        debug_assert!(out.y[a] < cap_a && out.y[b] < cap_b);
    }
    assert_eq!(out.objective(system), before, "objective drifted");
    assert!(satisfies_star(system, &out), "post-processing did not converge");
    debug_assert!(out.is_feasible(system));
    out
}

/// Property (*): a job never loads an at-capacity machine unless its
/// other machine is at capacity too.
pub fn satisfies_star(system: &OpenShopSystem, assignment: &FractionalAssignment) -> bool {
    two_machine_jobs(system).into_iter().all(|job| {
        let req: Vec<usize> = system.jobs()[job].required.iter().copied().collect();
        [(req[0], req[1]), (req[1], req[0])]
            .into_iter()
            .all(|(a, b)| {
                let cap_a = Rational::from_integer(system.capacity(a) as i64);
                let cap_b = Rational::from_integer(system.capacity(b) as i64);
                !(assignment.y[a] >= cap_a
                    && assignment.x[&(job, a)] > Rational::from_integer(0))
                    || assignment.y[b] >= cap_b
            })
    })
}

/// Decides Reachable Deadlock for an applicable system. Returns the
/// critical machine set on YES, `None` on NO.
pub fn has_reachable_deadlock_2m(
    system: &OpenShopSystem,
) -> Result<Option<CriticalSet>, TwoMachineError> {
    let assignment = postprocess(system, &solve_lp(system)?);
    let machines: BTreeSet<usize> = (0..system.machine_count())
        .filter(|&m| assignment.y[m] >= Rational::from_integer(system.capacity(m) as i64))
        .collect();
    if machines.is_empty() {
        return Ok(None);
    }
    let jobs = assignment
        .x
        .iter()
        .filter(|(&(_, m), &v)| machines.contains(&m) && v > Rational::from_integer(0))
        .map(|(&(job, _), _)| job)
        .collect();
    Ok(Some(CriticalSet { machines, jobs }))
}

/// Builds the deadlock witness for a nonempty critical set: a
/// capacity-saturating assignment of critical jobs to critical machines
/// (guaranteed by the Hall-type counting argument), then a schedule that
/// completes all other jobs one by one and parks each assigned job on
/// its machine. Returns the deadlock state and the schedule from the
/// initial state.
pub fn construct_deadlock_witness(
    system: &OpenShopSystem,
    critical: &CriticalSet,
) -> Result<(ShopState, Schedule), TwoMachineError> {
    if !check_applicable(system) {
        return Err(TwoMachineError::NotApplicable);
    }
    // saturating assignment via max flow, ascending indices for determinism
    let jobs: Vec<usize> = critical.jobs.iter().copied().collect();
    let machines: Vec<usize> = critical.machines.iter().copied().collect();
    let machine_node = |pos: usize| 1 + jobs.len() + pos;
    let sink = 1 + jobs.len() + machines.len();
    let mut net = FlowNetwork::new(sink + 1);
    let mut handles = Vec::new();
    for (jpos, &job) in jobs.iter().enumerate() {
        net.add_arc(0, 1 + jpos, 1, 0);
        for (mpos, &machine) in machines.iter().enumerate() {
            if system.jobs()[job].required.contains(&machine) {
                handles.push((job, machine, net.add_arc(1 + jpos, machine_node(mpos), 1, 0)));
            }
        }
    }
    let demand: i64 = machines.iter().map(|&m| system.capacity(m) as i64).sum();
    for (mpos, &machine) in machines.iter().enumerate() {
        net.add_arc(machine_node(mpos), sink, system.capacity(machine) as i64, 0);
    }
    let (flow, _) = net.min_cost_max_flow(0, sink);
    assert_eq!(flow, demand, "saturating assignment must exist");
    let mut assigned: BTreeMap<usize, usize> = BTreeMap::new();
    for (job, machine, handle) in handles {
        if net.flow(handle) > 0 {
            assigned.insert(job, machine);
        }
    }

    let mut moves = Vec::new();
    // everyone not assigned completes and leaves, one job at a time
    for job in 0..system.job_count() {
        if assigned.contains_key(&job) {
            continue;
        }
        let mut at = MachineRef::In;
        for &m in &system.jobs()[job].required {
            moves.push(Move {
                job,
                from: at,
                to: MachineRef::Machine(m),
            });
            at = MachineRef::Machine(m);
        }
        moves.push(Move {
            job,
            from: at,
            to: MachineRef::Out,
        });
    }
    // assigned jobs enter and park; property (*) puts both of their
    // machines inside the critical set, so nothing is processed on the way
    for (&job, &target) in &assigned {
        debug_assert!(system.jobs()[job]
            .required
            .iter()
            .all(|m| critical.machines.contains(m)));
        moves.push(Move {
            job,
            from: MachineRef::In,
            to: MachineRef::Machine(target),
        });
    }
    let schedule = Schedule::new(moves);
    let state = schedule
        .replay(system, &system.initial_state())
        .expect("witness schedule replays");
    debug_assert!(system.is_deadlock(&state));
    debug_assert!(crate::safety::verify_blocking_set(
        system,
        &state,
        &critical.machines
    ));
    Ok((state, schedule))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact_search::{reachable_deadlock_exact, SearchLimits, SearchVerdict};
    use crate::random::{random_two_machine_system, Lcg, RandomProfile};
    use crate::shop_model::parse_system;

    fn two_jobs_two_machines() -> OpenShopSystem {
        parse_system("machine M1 1\nmachine M2 1\njob J1 M1 M2\njob J2 M1 M2\n").unwrap()
    }

    #[test]
    fn three_machine_jobs_are_rejected() {
        let sys = parse_system(
            "machine M1 1\nmachine M2 1\nmachine M3 1\nmachine M4 1\n\
             job J1 M1 M2 M3\njob J2 M1 M2 M4\n",
        )
        .unwrap();
        assert!(!check_applicable(&sys));
        assert!(matches!(
            has_reachable_deadlock_2m(&sys),
            Err(TwoMachineError::NotApplicable)
        ));
    }

    #[test]
    fn single_machine_jobs_are_harmless() {
        let sys = parse_system("machine M1 1\njob J1 M1\njob J2 M1\njob J3\n").unwrap();
        assert!(check_applicable(&sys));
        assert_eq!(has_reachable_deadlock_2m(&sys).unwrap(), None);
    }

    #[test]
    fn two_jobs_on_two_unit_machines() {
        let sys = two_jobs_two_machines();
        let assignment = solve_lp(&sys).unwrap();
        assert_eq!(assignment.objective(&sys), Rational::from_integer(2));
        assert_eq!(
            assignment.y.iter().copied().sum::<Rational>(),
            Rational::from_integer(2)
        );
        let critical = has_reachable_deadlock_2m(&sys).unwrap().unwrap();
        assert_eq!(critical.machines, [0, 1].into_iter().collect());
        let (state, schedule) = construct_deadlock_witness(&sys, &critical).unwrap();
        assert_eq!(schedule.replay(&sys, &sys.initial_state()).unwrap(), state);
        assert!(sys.is_deadlock(&state));
    }

    #[test]
    fn big_capacities_dominate() {
        let sys = parse_system("machine M1 5\nmachine M2 5\njob J1 M1 M2\n").unwrap();
        let assignment = solve_lp(&sys).unwrap();
        assert_eq!(assignment.objective(&sys), Rational::from_integer(10));
        assert_eq!(has_reachable_deadlock_2m(&sys).unwrap(), None);
    }

    #[test]
    fn shared_machine_with_headroom() {
        // one big machine shared by three jobs with private second machines
        let sys = parse_system(
            "machine M0 10\nmachine M1 10\nmachine M2 10\nmachine M3 10\n\
             job J1 M0 M1\njob J2 M0 M2\njob J3 M0 M3\n",
        )
        .unwrap();
        assert_eq!(has_reachable_deadlock_2m(&sys).unwrap(), None);
    }

    #[test]
    fn postprocess_fixpoint_is_identity() {
        let sys = two_jobs_two_machines();
        let assignment = solve_lp(&sys).unwrap();
        // y = (1,1): both machines at capacity, no machine has headroom
        let processed = postprocess(&sys, &assignment);
        assert_eq!(processed, assignment);
        let again = postprocess(&sys, &processed);
        assert_eq!(again, processed);
    }

    #[test]
    fn postprocess_can_go_fractional() {
        // caps (2,2), three jobs on both machines: the integral optimum
        // pins one machine at capacity, property (*) forces 3/2 each
        let sys = parse_system(
            "machine M1 2\nmachine M2 2\njob J1 M1 M2\njob J2 M1 M2\njob J3 M1 M2\n",
        )
        .unwrap();
        let assignment = postprocess(&sys, &solve_lp(&sys).unwrap());
        assert!(satisfies_star(&sys, &assignment));
        assert_eq!(
            assignment.y.iter().copied().sum::<Rational>(),
            Rational::from_integer(3)
        );
        assert!(assignment.y[0] < Rational::from_integer(2));
        assert!(assignment.y[1] < Rational::from_integer(2));
        assert_eq!(has_reachable_deadlock_2m(&sys).unwrap(), None);
        // and exact search agrees there is no deadlock
        assert_eq!(
            reachable_deadlock_exact(&sys, &SearchLimits::default()),
            SearchVerdict::No
        );
    }

    #[test]
    fn no_star_violations_after_postprocess() {
        let mut rng = Lcg::new(61);
        let profile = RandomProfile {
            machines: 5,
            jobs: 6,
            max_cap: 3,
            max_req: 2,
        };
        for _ in 0..500 {
            let sys = random_two_machine_system(rng.next_u64(), &profile);
            let assignment = postprocess(&sys, &solve_lp(&sys).unwrap());
            assert!(satisfies_star(&sys, &assignment));
            assert!(assignment.is_feasible(&sys));
        }
    }

    #[test]
    fn verdict_matches_exact_search() {
        let profile = RandomProfile {
            machines: 4,
            jobs: 5,
            max_cap: 2,
            max_req: 2,
        };
        let limits = SearchLimits::with_max_states(200_000);
        let mut compared = 0;
        let mut seed_stream = Lcg::new(12_000);
        while compared < 60 {
            let sys = random_two_machine_system(seed_stream.next_u64(), &profile);
            let exact = match reachable_deadlock_exact(&sys, &limits) {
                SearchVerdict::LimitExceeded(_) => continue,
                v => v,
            };
            let lp = has_reachable_deadlock_2m(&sys).unwrap();
            match (&exact, &lp) {
                (SearchVerdict::Yes(_), Some(critical)) => {
                    let (state, schedule) = construct_deadlock_witness(&sys, critical).unwrap();
                    assert_eq!(schedule.replay(&sys, &sys.initial_state()).unwrap(), state);
                    assert!(sys.is_deadlock(&state));
                }
                (SearchVerdict::No, None) => {}
                other => panic!("verdicts disagree: {other:?}"),
            }
            compared += 1;
        }
    }
}
