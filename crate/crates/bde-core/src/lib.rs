//! Bandwidth demand estimation for a radio access network slice.
//!
//! A slice controller observes the traffic state of a network slice once per
//! slot (active users, average MCS, queued bytes) and picks the number of
//! physical resource blocks (PRBs) its MAC scheduler gets for that slot. The
//! goal is to spend as little bandwidth as possible while keeping a per-slot
//! packet-delay statistic under a configured bound.
//!
//! The crate is split along those lines:
//!
//! - [`domain`]: slice state types, state discretization, the slot cost and
//!   the violation-penalty selection rule.
//! - [`env`]: a deterministic, seeded packet-level simulator of the slice
//!   uplink queueing system that stands in for a real base station.
//! - [`bandit`]: cost-flavoured UCB1 plus a variant that propagates each
//!   slot's binary QoS outcome to all arms dominated by (or dominating) the
//!   chosen one.
//! - [`estimator`]: empirical transition counts over the discretized state,
//!   augmented through the same action monotonicity, with optimistic fill-in
//!   for unseen rows.
//! - [`planner`]: value iteration over the estimated model and epsilon-soft
//!   policy extraction.
//! - [`controller`]: the per-slot decide/feedback loop tying the above
//!   together, learning separately per active-user bucket.
//! - [`baselines`]: the comparison schemes (no adaptation, bandit-only,
//!   Monte Carlo control) behind the same agent interface.
//!
//! Everything is `no_std` + `alloc` compatible; IO, file formats and the CLI
//! live in the companion `bde-harness` crate.

#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod bandit;
pub mod baselines;
pub mod controller;
pub mod domain;
pub mod env;
pub mod error;
pub mod estimator;
pub mod planner;
pub mod rng;

mod math;

pub use controller::{BdeConfig, BdeController, SlotAgent, Warmup};
pub use domain::{
    ActionSet, BucketEdges, CostParams, DiscreteState, QosStatistic, RawObservation, SlotRecord,
    StateBuckets,
};
pub use env::{LinkCapacityTable, QoSFeedback, SimConfig, SliceSim, UserSpec};
pub use error::{Error, Result};
pub use planner::{Policy, QTable, ViParams};
