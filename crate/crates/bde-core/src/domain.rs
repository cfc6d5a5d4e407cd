//! Slice state, state discretization and the slot cost.
//!
//! The controller sees a three-component traffic state: number of active
//! users, average MCS over those users, and a buffer-status index for the
//! bytes queued at the MAC scheduler. Each component is bucketed into a small
//! number of ranges; learning happens on the bucketed state.
//!
//! The cost of a slot is the allocated bandwidth plus a large constant
//! `lambda` when the slot's delay statistic exceeded the bound. Choosing
//! `lambda = (w_max - w_min) / alpha` makes any action that improves the
//! violation probability by at least `alpha` preferable regardless of the
//! bandwidth it costs, and conversely lets the controller save bandwidth when
//! the improvement is below `alpha`.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Maximum LTE MCS index.
pub const MCS_MAX: u8 = 28;
/// Maximum buffer-status index.
pub const BSR_MAX: u8 = 63;

/// PRB count allocated for one slot.
pub type Prb = u16;

/// Continuous slice state as observed at the start of a slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawObservation {
    /// Users that are transmitting or still have queued data.
    pub active_users: u32,
    /// Average MCS over the active users, in [0, 28]. Zero when idle.
    pub avg_mcs: f64,
    /// Buffer-status index for the total queued bytes, 0..=63.
    pub queue_level: u8,
    /// Total queued bytes (diagnostic; `queue_level` is derived from it).
    pub queued_bytes: u64,
}

impl RawObservation {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=MCS_MAX as f64).contains(&self.avg_mcs) {
            return Err(Error::Domain {
                component: "avg_mcs",
                value: self.avg_mcs,
                lo: 0.0,
                hi: MCS_MAX as f64,
            });
        }
        if self.queue_level > BSR_MAX {
            return Err(Error::Domain {
                component: "queue_level",
                value: self.queue_level as f64,
                lo: 0.0,
                hi: BSR_MAX as f64,
            });
        }
        if (self.queued_bytes == 0) != (self.queue_level == 0) {
            return Err(Error::config(format!(
                "queued_bytes = {} inconsistent with queue_level = {}",
                self.queued_bytes, self.queue_level
            )));
        }
        Ok(())
    }
}

/// Ascending bucket edges over one state component.
///
/// Edges `[e0, e1, ..., en]` define buckets `[e0, e1), ..., [e_{n-2}, e_{n-1}),
/// [e_{n-1}, en]`; every bucket is half-open except the last, which is closed
/// at its upper end.
#[derive(Debug, Clone, PartialEq)]
pub struct BucketEdges {
    edges: Vec<f64>,
}

impl BucketEdges {
    pub fn new(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 {
            return Err(Error::config("bucket edges need at least two entries"));
        }
        if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config(format!(
                "bucket edges must be strictly ascending, got {edges:?}"
            )));
        }
        Ok(BucketEdges { edges })
    }

    pub fn len(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn lo(&self) -> f64 {
        self.edges[0]
    }

    pub fn hi(&self) -> f64 {
        *self.edges.last().unwrap()
    }

    /// Bucket containing `value`, or `None` when outside `[lo, hi]`.
    pub fn bucket_of(&self, value: f64) -> Option<usize> {
        if value < self.lo() || value > self.hi() {
            return None;
        }
        if value == self.hi() {
            return Some(self.len() - 1);
        }
        // Last bucket whose lower edge is <= value.
        let mut idx = 0;
        for (i, lo) in self.edges[..self.edges.len() - 1].iter().enumerate() {
            if value >= *lo {
                idx = i;
            }
        }
        Some(idx)
    }

    /// A value inside bucket `i` (its lower edge).
    pub fn representative(&self, i: usize) -> f64 {
        self.edges[i]
    }
}

/// Bucket edges for all three state components.
#[derive(Debug, Clone, PartialEq)]
pub struct StateBuckets {
    pub users: BucketEdges,
    pub mcs: BucketEdges,
    pub queue: BucketEdges,
}

impl StateBuckets {
    pub fn new(users: BucketEdges, mcs: BucketEdges, queue: BucketEdges) -> Self {
        StateBuckets { users, mcs, queue }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.users.len(), self.mcs.len(), self.queue.len())
    }
}

/// Bucketed slice state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DiscreteState {
    /// Active-user bucket.
    pub x1: usize,
    /// Average-MCS bucket.
    pub x2: usize,
    /// Queue-level bucket.
    pub x3: usize,
}

/// Map an observation to its bucketed state.
///
/// Each component lands in the unique bucket containing it; values outside
/// the configured edges are a domain error naming the offending component.
pub fn discretize(obs: &RawObservation, buckets: &StateBuckets) -> Result<DiscreteState> {
    let component = |edges: &BucketEdges, name: &'static str, value: f64| {
        edges.bucket_of(value).ok_or(Error::Domain {
            component: name,
            value,
            lo: edges.lo(),
            hi: edges.hi(),
        })
    };
    Ok(DiscreteState {
        x1: component(&buckets.users, "active_users", obs.active_users as f64)?,
        x2: component(&buckets.mcs, "avg_mcs", obs.avg_mcs)?,
        x3: component(&buckets.queue, "queue_level", obs.queue_level as f64)?,
    })
}

/// Finite set of allowed PRB allocations, strictly ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionSet {
    prbs: Vec<Prb>,
}

impl ActionSet {
    pub fn new(prbs: Vec<Prb>) -> Result<Self> {
        if prbs.is_empty() {
            return Err(Error::config("action set must not be empty"));
        }
        if prbs.iter().any(|&w| w == 0 || w > 100) {
            return Err(Error::config(format!(
                "actions must be PRB counts in 1..=100, got {prbs:?}"
            )));
        }
        if prbs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config(format!(
                "actions must be strictly ascending, got {prbs:?}"
            )));
        }
        Ok(ActionSet { prbs })
    }

    pub fn len(&self) -> usize {
        self.prbs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn min(&self) -> Prb {
        self.prbs[0]
    }

    pub fn max(&self) -> Prb {
        *self.prbs.last().unwrap()
    }

    pub fn get(&self, index: usize) -> Prb {
        self.prbs[index]
    }

    pub fn values(&self) -> &[Prb] {
        &self.prbs
    }

    pub fn index_of(&self, w: Prb) -> Option<usize> {
        self.prbs.iter().position(|&v| v == w)
    }
}

/// Per-slot delay statistic the QoS bound applies to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QosStatistic {
    /// Mean of each user's delivered-packet delays.
    PerUserMean,
    /// Nearest-rank p-quantile of each user's delivered-packet delays.
    PerUserQuantile(f64),
}

impl QosStatistic {
    pub fn validate(&self) -> Result<()> {
        if let QosStatistic::PerUserQuantile(p) = self {
            if !(*p > 0.0 && *p < 1.0) {
                return Err(Error::parameter(
                    "quantile",
                    format!("must lie in (0, 1), got {p}"),
                ));
            }
        }
        Ok(())
    }
}

/// Cost and discounting parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct CostParams {
    /// Violation penalty, > 0.
    pub lambda: f64,
    /// Preference margin used by the `lambda` selection rule, in (0, 1).
    pub alpha: f64,
    /// Delay bound in milliseconds.
    pub qc_ms: f64,
    /// Discount factor, in (0, 1).
    pub gamma: f64,
    /// Which delay statistic the bound applies to.
    pub statistic: QosStatistic,
}

impl CostParams {
    /// Parameters with `lambda` fixed by the selection rule
    /// `(w_max - w_min) / alpha`.
    pub fn with_lambda_rule(
        actions: &ActionSet,
        alpha: f64,
        qc_ms: f64,
        gamma: f64,
        statistic: QosStatistic,
    ) -> Result<Self> {
        let lambda = lambda_for(actions.max(), actions.min(), alpha)?;
        CostParams {
            lambda,
            alpha,
            qc_ms,
            gamma,
            statistic,
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        if self.lambda < 0.0 {
            return Err(Error::parameter("lambda", "must be >= 0"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::parameter("alpha", "must lie in (0, 1)"));
        }
        if self.qc_ms <= 0.0 {
            return Err(Error::parameter("qc_ms", "must be > 0"));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::parameter("gamma", "must lie in (0, 1)"));
        }
        self.statistic.validate()?;
        Ok(self)
    }

    /// True when `q_ms` breaks the bound. The comparison is strict, so a
    /// slot that hits the bound exactly still satisfies the QoS; an infinite
    /// statistic (starved nonempty queue) always violates.
    pub fn violates(&self, q_ms: f64) -> bool {
        q_ms > self.qc_ms
    }
}

/// Slot cost: allocated bandwidth plus `lambda` when the QoS was violated.
pub fn cost(w: Prb, q_ms: f64, params: &CostParams) -> f64 {
    w as f64
        + if params.violates(q_ms) {
            params.lambda
        } else {
            0.0
        }
}

/// Violation penalty from the preference rule `(w_max - w_min) / alpha`.
pub fn lambda_for(w_max: Prb, w_min: Prb, alpha: f64) -> Result<f64> {
    if alpha <= 0.0 {
        return Err(Error::parameter(
            "alpha",
            format!("must be > 0, got {alpha}"),
        ));
    }
    if w_max < w_min {
        return Err(Error::parameter("w_max", "must be >= w_min"));
    }
    Ok((w_max - w_min) as f64 / alpha)
}

/// One slot of logged experience.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord {
    /// Slot index within the run.
    pub slot: u64,
    pub state: DiscreteState,
    pub obs: RawObservation,
    /// Allocated PRBs.
    pub action: Prb,
    /// Delay statistic for the slot, in ms (may be infinite).
    pub q_ms: f64,
    pub violated: bool,
    /// `action` or `action + lambda`, consistent with `violated`.
    pub cost: f64,
}

impl SlotRecord {
    pub fn new(
        slot: u64,
        state: DiscreteState,
        obs: RawObservation,
        action: Prb,
        q_ms: f64,
        params: &CostParams,
    ) -> Self {
        let violated = params.violates(q_ms);
        SlotRecord {
            slot,
            state,
            obs,
            action,
            q_ms,
            violated,
            cost: cost(action, q_ms, params),
        }
    }
}
