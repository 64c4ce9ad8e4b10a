//! Exact bounded exploration of the state graph.
//!
//! The successor relation is a DAG (the potential strictly decreases),
//! so breadth-first closure with memoization terminates without a depth
//! limit. The search is the ground truth the polynomial algorithms are
//! validated against, and the exact fallback for the two NP-hard
//! questions. Budgets are explicit: running out of states or time yields
//! a distinct `LimitExceeded` verdict, never a `No`.

use std::collections::{HashMap, VecDeque};
use std::time::Instant;

use crate::shop_model::{Move, OpenShopSystem, Schedule, ShopState};

/// Exploration budget.
#[derive(Clone, Copy, Debug)]
pub struct SearchLimits {
    /// Maximum number of distinct states to visit.
    pub max_states: usize,
    /// Optional wall-clock budget in milliseconds.
    pub max_millis: Option<u64>,
}

impl Default for SearchLimits {
    fn default() -> Self {
        SearchLimits {
            max_states: 1_000_000,
            max_millis: None,
        }
    }
}

impl SearchLimits {
    pub fn with_max_states(max_states: usize) -> Self {
        SearchLimits {
            max_states,
            ..Default::default()
        }
    }
}

/// Outcome of a bounded search.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SearchVerdict {
    /// Found; the schedule replays from the search's start state to a
    /// state satisfying the query.
    Yes(Schedule),
    /// The full closure was explored without a hit.
    No,
    /// The budget ran out after exploring this many distinct states.
    LimitExceeded(usize),
}

/// Result of enumerating a reachability closure.
#[derive(Clone, Debug)]
pub enum Enumeration {
    /// All states reachable from the start, including the start itself.
    Complete(Vec<ShopState>),
    LimitExceeded(usize),
}

struct Bfs {
    states: Vec<ShopState>,
    parents: Vec<Option<(usize, Move)>>,
    seen: HashMap<ShopState, usize>,
}

impl Bfs {
    fn path_to(&self, mut idx: usize) -> Schedule {
        let mut moves = Vec::new();
        while let Some((parent, mv)) = self.parents[idx] {
            moves.push(mv);
            idx = parent;
        }
        moves.reverse();
        Schedule::new(moves)
    }
}

/// BFS closure under legal moves with memoization on the canonical state
/// encoding; stops early when `goal` hits. Frontier order follows the
/// deterministic move enumeration, so witnesses are reproducible and
/// shortest in move count.
fn bfs(
    system: &OpenShopSystem,
    from: &ShopState,
    limits: &SearchLimits,
    mut goal: impl FnMut(&ShopState) -> bool,
) -> (Bfs, SearchVerdict) {
    let started = Instant::now();
    let mut bfs = Bfs {
        states: vec![from.clone()],
        parents: vec![None],
        seen: HashMap::from([(from.clone(), 0)]),
    };
    if goal(from) {
        let verdict = SearchVerdict::Yes(Schedule::default());
        return (bfs, verdict);
    }
    let mut queue = VecDeque::from([0usize]);
    while let Some(idx) = queue.pop_front() {
        let moves = system.legal_moves_unchecked(&bfs.states[idx]);
        for mv in moves {
            let next = system
                .apply_move(&bfs.states[idx], &mv)
                .expect("legal move applies");
            if bfs.seen.contains_key(&next) {
                continue;
            }
            if bfs.states.len() >= limits.max_states {
                return (bfs, SearchVerdict::LimitExceeded(limits.max_states));
            }
            let next_idx = bfs.states.len();
            bfs.seen.insert(next.clone(), next_idx);
            bfs.states.push(next);
            bfs.parents.push(Some((idx, mv)));
            if goal(&bfs.states[next_idx]) {
                let schedule = bfs.path_to(next_idx);
                return (bfs, SearchVerdict::Yes(schedule));
            }
            queue.push_back(next_idx);
        }
        if let Some(budget) = limits.max_millis {
            if started.elapsed().as_millis() as u64 > budget {
                let n = bfs.states.len();
                return (bfs, SearchVerdict::LimitExceeded(n));
            }
        }
    }
    (bfs, SearchVerdict::No)
}

/// The set of states reachable from `from`, or `LimitExceeded`.
pub fn enumerate_reachable(
    system: &OpenShopSystem,
    from: &ShopState,
    limits: &SearchLimits,
) -> Enumeration {
    let (bfs, verdict) = bfs(system, from, limits, |_| false);
    match verdict {
        SearchVerdict::No => Enumeration::Complete(bfs.states),
        SearchVerdict::LimitExceeded(n) => Enumeration::LimitExceeded(n),
        SearchVerdict::Yes(_) => unreachable!("no goal was set"),
    }
}

/// Can the system reach `target` from `from`? `Yes` carries the shortest
/// move path.
pub fn state_to_state(
    system: &OpenShopSystem,
    from: &ShopState,
    target: &ShopState,
    limits: &SearchLimits,
) -> SearchVerdict {
    // subset-reachability is necessary; skip the search when it fails
    if !system.is_subset_reachable(from, target) {
        return SearchVerdict::No;
    }
    bfs(system, from, limits, |s| s == target).1
}

/// Can the system reach a deadlock from the initial state?
pub fn reachable_deadlock_exact(system: &OpenShopSystem, limits: &SearchLimits) -> SearchVerdict {
    let initial = system.initial_state();
    bfs(system, &initial, limits, |s| system.is_deadlock(s)).1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shop_model::{parse_state, parse_system};
    use std::collections::HashSet;

    fn two_by_two() -> crate::shop_model::OpenShopSystem {
        parse_system("machine M1 1\nmachine M2 1\njob J1 M1 M2\njob J2 M1 M2\n").unwrap()
    }

    /// Independent depth-first closure used as a cross-oracle for the
    /// BFS enumeration.
    fn dfs_closure(
        system: &crate::shop_model::OpenShopSystem,
        from: &ShopState,
    ) -> HashSet<ShopState> {
        let mut seen = HashSet::from([from.clone()]);
        let mut stack = vec![from.clone()];
        while let Some(state) = stack.pop() {
            for mv in system.legal_moves_unchecked(&state) {
                let next = system.apply_move(&state, &mv).unwrap();
                if seen.insert(next.clone()) {
                    stack.push(next);
                }
            }
        }
        seen
    }

    #[test]
    fn closure_from_final_state_is_singleton() {
        let sys = two_by_two();
        match enumerate_reachable(&sys, &sys.final_state(), &SearchLimits::default()) {
            Enumeration::Complete(states) => assert_eq!(states, vec![sys.final_state()]),
            _ => panic!("limit exceeded"),
        }
    }

    #[test]
    fn unreachable_state_is_absent_from_closure() {
        let sys = two_by_two();
        let s = parse_state(&sys, "job J1 at M1 todo\njob J2 at M2 todo\n").unwrap();
        let states = match enumerate_reachable(&sys, &sys.initial_state(), &SearchLimits::default())
        {
            Enumeration::Complete(states) => states,
            _ => panic!("limit exceeded"),
        };
        assert!(states.len() < 100);
        assert!(!states.contains(&s));
        // ...and the mirrored configuration is absent too
        let s2 = parse_state(&sys, "job J1 at M2 todo\njob J2 at M1 todo\n").unwrap();
        assert!(!states.contains(&s2));
    }

    #[test]
    fn bfs_closure_matches_dfs_closure() {
        let sys = parse_system(
            "machine M1 1\nmachine M2 1\nmachine M3 1\n\
             job J1 M1 M2 M3\njob J2 M1 M2 M3\njob J3 M1 M2 M3\n",
        )
        .unwrap();
        let bfs_states = match enumerate_reachable(&sys, &sys.initial_state(), &SearchLimits::default()) {
            Enumeration::Complete(states) => states.into_iter().collect::<HashSet<_>>(),
            _ => panic!("limit exceeded"),
        };
        let dfs_states = dfs_closure(&sys, &sys.initial_state());
        assert_eq!(bfs_states, dfs_states);
    }

    #[test]
    fn state_to_state_fixture_verdicts() {
        let sys = two_by_two();
        let s = parse_state(&sys, "job J1 at M1 todo\njob J2 at M2 todo\n").unwrap();
        assert_eq!(
            state_to_state(&sys, &sys.initial_state(), &s, &SearchLimits::default()),
            SearchVerdict::No
        );
        assert_eq!(
            state_to_state(&sys, &s, &s, &SearchLimits::default()),
            SearchVerdict::Yes(Schedule::default())
        );
    }

    #[test]
    fn deadlock_witness_in_three_by_three() {
        let sys = parse_system(
            "machine M1 1\nmachine M2 1\nmachine M3 1\n\
             job J1 M1 M2 M3\njob J2 M1 M2 M3\njob J3 M1 M2 M3\n",
        )
        .unwrap();
        match reachable_deadlock_exact(&sys, &SearchLimits::default()) {
            SearchVerdict::Yes(sched) => {
                // shortest deadlock: all three jobs enter, then every
                // machine is full and everyone waits
                assert_eq!(sched.len(), 3);
                let end = sched.replay(&sys, &sys.initial_state()).unwrap();
                assert!(sys.is_deadlock(&end));
            }
            other => panic!("expected a deadlock, got {other:?}"),
        }
    }

    #[test]
    fn single_machine_jobs_never_deadlock() {
        let sys = parse_system("machine M1 1\nmachine M2 2\njob J1 M1\njob J2 M2\njob J3\n").unwrap();
        assert_eq!(
            reachable_deadlock_exact(&sys, &SearchLimits::default()),
            SearchVerdict::No
        );
    }

    #[test]
    fn limit_exceeded_is_reported_distinctly() {
        let sys = parse_system(
            "machine M1 1\nmachine M2 1\nmachine M3 1\n\
             job J1 M1 M2 M3\njob J2 M1 M2 M3\njob J3 M1 M2 M3\n",
        )
        .unwrap();
        let verdict = state_to_state(
            &sys,
            &sys.initial_state(),
            &sys.final_state(),
            &SearchLimits::with_max_states(3),
        );
        assert_eq!(verdict, SearchVerdict::LimitExceeded(3));
        // enlarging the budget resolves to Yes, never flips to No
        let verdict = state_to_state(
            &sys,
            &sys.initial_state(),
            &sys.final_state(),
            &SearchLimits::default(),
        );
        assert!(matches!(verdict, SearchVerdict::Yes(_)));
    }

    #[test]
    fn witnesses_replay_to_goal_states() {
        let sys = two_by_two();
        let target = parse_state(&sys, "job J1 at M2 todo M1\njob J2 at IN todo M1 M2\n").unwrap();
        match state_to_state(&sys, &sys.initial_state(), &target, &SearchLimits::default()) {
            SearchVerdict::Yes(sched) => {
                assert_eq!(sched.replay(&sys, &sys.initial_state()).unwrap(), target);
            }
            other => panic!("expected Yes, got {other:?}"),
        }
    }
}
