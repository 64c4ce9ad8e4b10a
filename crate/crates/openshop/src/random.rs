//! Deterministic random instance generation for the CLI and the
//! cross-validation harness.
//!
//! Reproducibility across implementations matters more than statistical
//! quality here, so the generator is a fixed 64-bit linear congruential
//! generator rather than a library RNG:
//!
//! ```text
//! state' = state * 6364136223846793005 + 1442695040888963407   (mod 2^64)
//! ```
//!
//! Outputs take the upper 32 bits of the state; ranges are reduced by
//! modulo. The same seed and profile always produce byte-identical
//! instances.

use crate::shop_model::{Job, Machine, MachineRef, OpenShopSystem, ShopState};
use std::collections::BTreeSet;

const LCG_MUL: u64 = 6364136223846793005;
const LCG_ADD: u64 = 1442695040888963407;

/// Fixed 64-bit linear congruential generator.
#[derive(Clone, Debug)]
pub struct Lcg {
    state: u64,
}

impl Lcg {
    pub fn new(seed: u64) -> Self {
        // one warm-up step so that seed 0 does not emit 0 first
        Lcg {
            state: seed.wrapping_mul(LCG_MUL).wrapping_add(LCG_ADD),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_mul(LCG_MUL).wrapping_add(LCG_ADD);
        self.state >> 32
    }

    /// Uniform value in `0..n`. `n` must be nonzero.
    pub fn next_range(&mut self, n: u64) -> u64 {
        self.next_u64() % n
    }

    pub fn next_bool(&mut self) -> bool {
        self.next_u64() & 1 == 1
    }
}

/// Shape of a random instance: machine/job counts and upper bounds on
/// capacities and required-set sizes.
#[derive(Clone, Copy, Debug)]
pub struct RandomProfile {
    pub machines: usize,
    pub jobs: usize,
    pub max_cap: usize,
    pub max_req: usize,
}

/// Generates a system from `seed`: capacities uniform in `1..=max_cap`,
/// required-set sizes uniform in `1..=min(max_req, machines)` (0 when the
/// system has no machines), members drawn uniformly without repetition.
pub fn random_system(seed: u64, profile: &RandomProfile) -> OpenShopSystem {
    let mut rng = Lcg::new(seed);
    let machines: Vec<Machine> = (0..profile.machines)
        .map(|i| Machine {
            name: format!("M{}", i + 1),
            capacity: 1 + rng.next_range(profile.max_cap.max(1) as u64) as usize,
        })
        .collect();
    let jobs: Vec<Job> = (0..profile.jobs)
        .map(|j| {
            let bound = profile.max_req.min(profile.machines);
            let size = if bound == 0 {
                0
            } else {
                1 + rng.next_range(bound as u64) as usize
            };
            let mut required = BTreeSet::new();
            while required.len() < size {
                required.insert(rng.next_range(profile.machines as u64) as usize);
            }
            Job {
                name: format!("J{}", j + 1),
                required,
            }
        })
        .collect();
    OpenShopSystem::new(machines, jobs).expect("generated system is valid by construction")
}

/// Generates a system where every job needs exactly two machines
/// (requires `profile.machines >= 2`); used by the two-machine harness.
pub fn random_two_machine_system(seed: u64, profile: &RandomProfile) -> OpenShopSystem {
    let mut rng = Lcg::new(seed);
    let machines: Vec<Machine> = (0..profile.machines)
        .map(|i| Machine {
            name: format!("M{}", i + 1),
            capacity: 1 + rng.next_range(profile.max_cap.max(1) as u64) as usize,
        })
        .collect();
    let jobs: Vec<Job> = (0..profile.jobs)
        .map(|j| {
            let a = rng.next_range(profile.machines as u64) as usize;
            let mut b = rng.next_range(profile.machines as u64) as usize;
            while b == a {
                b = rng.next_range(profile.machines as u64) as usize;
            }
            Job {
                name: format!("J{}", j + 1),
                required: [a, b].into_iter().collect(),
            }
        })
        .collect();
    OpenShopSystem::new(machines, jobs).expect("generated system is valid by construction")
}

/// A reachable state sampled by a random walk of random length from the
/// initial state.
pub fn random_walk_state(system: &OpenShopSystem, rng: &mut Lcg) -> ShopState {
    let mut state = system.initial_state();
    let bound = state.potential() as u64 + 1;
    let steps = rng.next_range(bound);
    for _ in 0..steps {
        let moves = system.legal_moves_unchecked(&state);
        if moves.is_empty() {
            break;
        }
        let mv = moves[rng.next_range(moves.len() as u64) as usize];
        state = system.apply_move(&state, &mv).expect("legal move applies");
    }
    state
}

/// Mutates a state into a near-miss candidate by relocating one job or
/// toggling one machine in a remaining set. The result is only returned
/// if it still passes state validation; otherwise the original state is
/// returned unchanged.
pub fn mutate_state(system: &OpenShopSystem, state: &ShopState, rng: &mut Lcg) -> ShopState {
    if system.job_count() == 0 {
        return state.clone();
    }
    let mut cand = state.clone();
    let job = rng.next_range(system.job_count() as u64) as usize;
    let required = &system.jobs()[job].required;
    match rng.next_range(3) {
        0 => {
            // move the job somewhere else
            let locs: Vec<MachineRef> = [MachineRef::In, MachineRef::Out]
                .into_iter()
                .chain(required.iter().map(|&i| MachineRef::Machine(i)))
                .collect();
            let loc = locs[rng.next_range(locs.len() as u64) as usize];
            cand.jobs[job].location = loc;
            match loc {
                MachineRef::In => cand.jobs[job].remaining = required.clone(),
                MachineRef::Out => cand.jobs[job].remaining.clear(),
                MachineRef::Machine(i) => {
                    cand.jobs[job].remaining.remove(&i);
                }
            }
        }
        1 => {
            if !required.is_empty() {
                let pick = *required
                    .iter()
                    .nth(rng.next_range(required.len() as u64) as usize)
                    .unwrap();
                if !cand.jobs[job].remaining.remove(&pick) {
                    cand.jobs[job].remaining.insert(pick);
                }
            }
        }
        _ => {
            // swap two jobs' states
            let other = rng.next_range(system.job_count() as u64) as usize;
            cand.jobs.swap(job, other);
        }
    }
    if system.validate_state(&cand).is_ok() {
        cand
    } else {
        state.clone()
    }
}
