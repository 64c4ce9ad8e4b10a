//! Reachability and deadlock analysis for multi-stage open shop
//! processing systems.
//!
//! An open shop system consists of machines with finite capacities and
//! jobs that each need processing on a set of machines, in any order.
//! Jobs move through the system one step at a time; a machine holds a
//! job until it moves on, so careless admission can drive the system
//! into a deadlock.
//!
//! The library answers four decision questions about such systems:
//!
//! * **Safety** ([`safety`]) — can all jobs still complete from a given
//!   state? Decided via blocking sets of machines.
//! * **Reachability** ([`reachability`]) — can a given state arise from
//!   the empty system? Decided by time reversal plus the safety check.
//! * **State-to-state reachability** ([`exact_search`]) — NP-hard in
//!   general; answered by exact bounded search.
//! * **Reachable deadlock** — NP-hard in general ([`exact_search`]),
//!   polynomial when every job needs at most two machines
//!   ([`two_machine_deadlock`]) or when all capacities are one
//!   ([`unit_capacity_deadlock`]).
//!
//! Every YES verdict comes with an executable witness (a schedule, a
//! blocking set, a rainbow cycle, or a critical machine set) that can be
//! replayed and verified against the state machine in [`shop_model`].
//! The [`reductions`] module generates the hard instances behind the two
//! NP-hardness results, together with constructive witness schedules.

pub mod cli;
pub mod exact_search;
pub mod random;
pub mod reachability;
pub mod reductions;
pub mod safety;
pub mod shop_model;
pub mod two_machine_deadlock;
pub mod unit_capacity_deadlock;

mod flow;

pub use shop_model::{MachineRef, Move, OpenShopSystem, Schedule, ShopState};
