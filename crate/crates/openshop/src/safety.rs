//! Safe State Recognition via blocking sets.
//!
//! A nonempty machine set is *blocking* for a state if every machine in
//! it is full and every job sitting on one of its machines waits only
//! for machines inside the set. A state is unsafe (the final state is
//! unreachable from it) exactly when it has a blocking set. The check
//! runs in linear time on the strongly connected components of an
//! auxiliary digraph over the machines.

use std::collections::BTreeSet;

use crate::shop_model::{MachineRef, OpenShopSystem, ShopState};

/// A machine subset certifying unsafety, together with the jobs that
/// occupy it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockingSet {
    pub machines: BTreeSet<usize>,
    /// Jobs occupying the machines of the set, for audit.
    pub witness_jobs: BTreeSet<usize>,
}

impl BlockingSet {
    fn from_machines(state: &ShopState, machines: BTreeSet<usize>) -> Self {
        let witness_jobs = machines
            .iter()
            .flat_map(|&m| state.occupants(m))
            .collect();
        BlockingSet {
            machines,
            witness_jobs,
        }
    }
}

/// Machines as vertices; an arc `M_i -> M` for every job occupying `M_i`
/// that still needs `M`. Parallel arcs are collapsed.
#[derive(Clone, Debug)]
pub struct AuxiliaryDigraph {
    pub adj: Vec<BTreeSet<usize>>,
}

pub fn build_auxiliary_digraph(system: &OpenShopSystem, state: &ShopState) -> AuxiliaryDigraph {
    let mut adj = vec![BTreeSet::new(); system.machine_count()];
    for js in &state.jobs {
        if let MachineRef::Machine(here) = js.location {
            for &target in &js.remaining {
                adj[here].insert(target);
            }
        }
    }
    AuxiliaryDigraph { adj }
}

/// True iff `machine` handles exactly its capacity in jobs.
pub fn is_full(system: &OpenShopSystem, state: &ShopState, machine: usize) -> bool {
    state.occupancy(machine) == system.capacity(machine)
}

/// Checks the blocking-set definition directly: nonempty, every machine
/// full, every occupying job with `∅ ≠ remaining ⊆ machines`.
pub fn verify_blocking_set(
    system: &OpenShopSystem,
    state: &ShopState,
    machines: &BTreeSet<usize>,
) -> bool {
    if machines.is_empty() {
        return false;
    }
    if machines.iter().any(|&m| !is_full(system, state, m)) {
        return false;
    }
    machines.iter().all(|&m| {
        state.occupants(m).into_iter().all(|job| {
            let rem = &state.jobs[job].remaining;
            !rem.is_empty() && rem.is_subset(machines)
        })
    })
}

/// Runs the monotone closure `𝓑_0 = {machine}`, then repeatedly adds the
/// remaining sets of all jobs occupying the current set, until stable
/// (at most `m` rounds). The fixpoint is returned iff it satisfies the
/// blocking-set definition; it is then the inclusion-minimal blocking
/// set containing `machine`.
pub fn canonical_blocking_set(
    system: &OpenShopSystem,
    state: &ShopState,
    machine: usize,
) -> Option<BlockingSet> {
    let mut set: BTreeSet<usize> = [machine].into_iter().collect();
    loop {
        let mut next = set.clone();
        for &m in &set {
            for job in state.occupants(m) {
                next.extend(state.jobs[job].remaining.iter().copied());
            }
        }
        if next == set {
            break;
        }
        set = next;
    }
    if verify_blocking_set(system, state, &set) {
        Some(BlockingSet::from_machines(state, set))
    } else {
        None
    }
}

/// Iterative Tarjan; components are returned in a deterministic order
/// depending only on the adjacency structure.
fn strongly_connected_components(adj: &[BTreeSet<usize>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut components = Vec::new();
    let mut counter = 0;

    // explicit DFS stack: (vertex, iterator position)
    let mut call_stack: Vec<(usize, std::collections::btree_set::Iter<usize>)> = Vec::new();
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;
        call_stack.push((root, adj[root].iter()));
        while let Some((v, it)) = call_stack.last_mut() {
            let v = *v;
            if let Some(&w) = it.next() {
                if index[w] == usize::MAX {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call_stack.push((w, adj[w].iter()));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call_stack.pop();
                if let Some((parent, _)) = call_stack.last() {
                    low[*parent] = low[*parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    components.push(comp);
                }
            }
        }
    }
    components
}

/// Finds a blocking set, if any, as a sink component of the auxiliary
/// digraph whose machines are all full and whose jobs all still have
/// work inside the component. When several components qualify, the one
/// containing the smallest machine index is returned.
pub fn find_blocking_set(system: &OpenShopSystem, state: &ShopState) -> Option<BlockingSet> {
    let digraph = build_auxiliary_digraph(system, state);
    let mut best: Option<BTreeSet<usize>> = None;
    for comp in strongly_connected_components(&digraph.adj) {
        let set: BTreeSet<usize> = comp.into_iter().collect();
        // sink component: no arc leaves it
        if set.iter().any(|&v| !digraph.adj[v].is_subset(&set)) {
            continue;
        }
        if !set.iter().all(|&m| is_full(system, state, m)) {
            continue;
        }
        if !set.iter().all(|&m| state.occupancy(m) > 0) {
            continue;
        }
        if !verify_blocking_set(system, state, &set) {
            continue;
        }
        let key = *set.first().unwrap();
        if best.as_ref().is_none_or(|b| key < *b.first().unwrap()) {
            best = Some(set);
        }
    }
    best.map(|set| {
        let bs = BlockingSet::from_machines(state, set);
        debug_assert!(verify_blocking_set(system, state, &bs.machines));
        bs
    })
}

/// True iff the final state is reachable from `state`.
pub fn is_safe(system: &OpenShopSystem, state: &ShopState) -> bool {
    find_blocking_set(system, state).is_none()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_system, random_walk_state, Lcg, RandomProfile};
    use crate::shop_model::{parse_state, parse_system, OpenShopSystem, ShopState};

    fn three_by_three() -> (OpenShopSystem, ShopState) {
        let sys = parse_system(
            "machine M1 1\nmachine M2 1\nmachine M3 1\n\
             job J1 M1 M2 M3\njob J2 M1 M2 M3\njob J3 M1 M2 M3\n",
        )
        .unwrap();
        let dead = parse_state(
            &sys,
            "job J1 at M1 todo M2 M3\njob J2 at M2 todo M1 M3\njob J3 at M3 todo M1 M2\n",
        )
        .unwrap();
        (sys, dead)
    }

    /// Brute-force oracle: all nonempty machine subsets, checked against
    /// the definition directly.
    fn enumerate_blocking_sets(system: &OpenShopSystem, state: &ShopState) -> Vec<BTreeSet<usize>> {
        let m = system.machine_count();
        let mut found = Vec::new();
        for mask in 1u32..(1 << m) {
            let set: BTreeSet<usize> = (0..m).filter(|&i| mask & (1 << i) != 0).collect();
            if verify_blocking_set(system, state, &set) {
                found.push(set);
            }
        }
        found
    }

    #[test]
    fn deadlock_state_machines_are_full() {
        let (sys, dead) = three_by_three();
        assert!(is_full(&sys, &dead, 0));
        for m in 0..3 {
            assert!(!is_full(&sys, &sys.initial_state(), m));
        }
    }

    #[test]
    fn fullness_matches_occupancy_count() {
        let mut rng = Lcg::new(11);
        let profile = RandomProfile {
            machines: 4,
            jobs: 5,
            max_cap: 2,
            max_req: 3,
        };
        for _ in 0..100 {
            let sys = random_system(rng.next_u64(), &profile);
            let state = random_walk_state(&sys, &mut rng);
            for m in 0..sys.machine_count() {
                assert_eq!(
                    is_full(&sys, &state, m),
                    state.occupants(m).len() == sys.capacity(m)
                );
            }
        }
    }

    #[test]
    fn canonical_set_of_deadlock_is_all_three() {
        let (sys, dead) = three_by_three();
        let bs = canonical_blocking_set(&sys, &dead, 0).unwrap();
        assert_eq!(bs.machines, (0..3).collect());
        assert_eq!(bs.witness_jobs, (0..3).collect());
    }

    #[test]
    fn canonical_set_absent_when_machine_not_full() {
        let (sys, _) = three_by_three();
        assert!(canonical_blocking_set(&sys, &sys.initial_state(), 0).is_none());
    }

    #[test]
    fn find_blocking_set_on_fixtures() {
        let (sys, dead) = three_by_three();
        let bs = find_blocking_set(&sys, &dead).unwrap();
        assert_eq!(bs.machines, (0..3).collect());
        assert!(find_blocking_set(&sys, &sys.initial_state()).is_none());
        assert!(is_safe(&sys, &sys.initial_state()));
        assert!(!is_safe(&sys, &dead));
    }

    #[test]
    fn verify_rejects_empty_set() {
        let (sys, dead) = three_by_three();
        assert!(!verify_blocking_set(&sys, &dead, &BTreeSet::new()));
        assert!(verify_blocking_set(&sys, &dead, &(0..3).collect()));
    }

    #[test]
    fn job_done_on_full_machine_is_not_blocking() {
        // M1 full, but its job can exit: no blocking set
        let sys = parse_system("machine M1 1\nmachine M2 1\njob J1 M1 M2\njob J2 M1 M2\n").unwrap();
        let s = parse_state(&sys, "job J1 at M1 todo\njob J2 at M2 todo M1\n").unwrap();
        assert!(find_blocking_set(&sys, &s).is_none());
        assert!(is_safe(&sys, &s));
    }

    #[test]
    fn scc_method_agrees_with_subset_enumeration() {
        let mut rng = Lcg::new(31);
        let profile = RandomProfile {
            machines: 5,
            jobs: 5,
            max_cap: 2,
            max_req: 3,
        };
        for _ in 0..300 {
            let sys = random_system(rng.next_u64(), &profile);
            let state = random_walk_state(&sys, &mut rng);
            let all = enumerate_blocking_sets(&sys, &state);
            let found = find_blocking_set(&sys, &state);
            assert_eq!(found.is_some(), !all.is_empty());
            if let Some(bs) = found {
                assert!(verify_blocking_set(&sys, &state, &bs.machines));
            }
        }
    }

    #[test]
    fn canonical_set_is_minimal() {
        let mut rng = Lcg::new(47);
        let profile = RandomProfile {
            machines: 5,
            jobs: 6,
            max_cap: 2,
            max_req: 3,
        };
        let mut nontrivial = 0;
        for _ in 0..400 {
            let sys = random_system(rng.next_u64(), &profile);
            let state = random_walk_state(&sys, &mut rng);
            let all = enumerate_blocking_sets(&sys, &state);
            for mi in 0..sys.machine_count() {
                let canonical = canonical_blocking_set(&sys, &state, mi);
                let containing: Vec<_> =
                    all.iter().filter(|set| set.contains(&mi)).collect();
                assert_eq!(canonical.is_some(), !containing.is_empty());
                if let Some(bs) = canonical {
                    for set in containing {
                        assert!(bs.machines.is_subset(set));
                        nontrivial += 1;
                    }
                }
            }
        }
        assert!(nontrivial > 0, "oracle never produced a blocking set");
    }
}
