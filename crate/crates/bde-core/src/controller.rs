//! The slot loop: observe, pick a bandwidth, receive the QoS outcome, learn.
//!
//! Learning runs separately per active-user bucket `x1`, each with its own
//! slot counter, experience log, bandit and policy. A fresh `x1` starts in a
//! bandit warmup for its first `warmup_slots` slots. After warmup, every
//! `episode_slots`-th slot of that `x1` re-estimates the transition model
//! from the full `x1` log, runs value iteration and installs a fresh
//! epsilon-soft policy; between warmup end and the first such boundary the
//! (frozen) bandit keeps choosing. With `episode_slots = 1` the policy is
//! refreshed every slot.
//!
//! `decide` and `feedback` must alternate strictly; the pair covers one slot.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::bandit::CostUcb1;
use crate::domain::{
    discretize, ActionSet, CostParams, DiscreteState, Prb, RawObservation, SlotRecord, StateBuckets,
};
use crate::error::{Error, Result};
use crate::estimator::{self, TransitionCounts};
use crate::planner::{self, Policy, QTable, ViParams};
use crate::rng::RngStream;

/// Warmup policy for each user bucket.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Warmup {
    /// Bandit for the first `n` slots of the bucket, then plan.
    Slots(u64),
    /// Bandit forever; the model and planner never run.
    Forever,
}

/// Controller configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct BdeConfig {
    pub buckets: StateBuckets,
    pub actions: ActionSet,
    pub cost: CostParams,
    pub warmup: Warmup,
    /// Slots between re-plans per user bucket, >= 1.
    pub episode_slots: u64,
    /// Exploration rate of the extracted policy, in [0, 1].
    pub epsilon: f64,
    pub vi: ViParams,
    /// Confidence-radius coefficient of the warmup bandit.
    pub ucb_coeff: f64,
}

impl BdeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.episode_slots == 0 {
            return Err(Error::parameter("episode_slots", "must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::parameter("epsilon", "must lie in [0, 1]"));
        }
        if self.ucb_coeff.is_nan() || self.ucb_coeff < 0.0 {
            return Err(Error::parameter("ucb_coeff", "must be >= 0"));
        }
        self.cost.clone().validated()?;
        Ok(())
    }
}

/// Learning state of one user bucket.
#[derive(Debug, Clone)]
pub struct PerX1Learner {
    counts: u64,
    data: Vec<SlotRecord>,
    bandit: CostUcb1,
    policy: Option<Policy>,
    qtable: Option<QTable>,
    last_counts: Option<TransitionCounts>,
    plans: u32,
}

impl PerX1Learner {
    fn new(cfg: &BdeConfig) -> Self {
        PerX1Learner {
            counts: 0,
            data: Vec::new(),
            bandit: CostUcb1::monotone(cfg.actions.clone(), cfg.cost.lambda, cfg.ucb_coeff),
            policy: None,
            qtable: None,
            last_counts: None,
            plans: 0,
        }
    }

    pub fn counts(&self) -> u64 {
        self.counts
    }

    pub fn data(&self) -> &[SlotRecord] {
        &self.data
    }

    pub fn bandit(&self) -> &CostUcb1 {
        &self.bandit
    }

    pub fn policy(&self) -> Option<&Policy> {
        self.policy.as_ref()
    }

    pub fn qtable(&self) -> Option<&QTable> {
        self.qtable.as_ref()
    }

    /// Counts used for the most recent plan.
    pub fn last_counts(&self) -> Option<&TransitionCounts> {
        self.last_counts.as_ref()
    }

    /// Number of policies installed so far.
    pub fn plans(&self) -> u32 {
        self.plans
    }
}

#[derive(Debug, Clone)]
struct Pending {
    state: DiscreteState,
    obs: RawObservation,
    w: Prb,
}

/// One slice's bandwidth controller.
#[derive(Debug, Clone)]
pub struct BdeController {
    cfg: BdeConfig,
    learners: BTreeMap<usize, PerX1Learner>,
    policy_rng: RngStream,
    pending: Option<Pending>,
    slot: u64,
}

impl BdeController {
    pub fn new(cfg: BdeConfig, policy_rng: RngStream) -> Result<Self> {
        cfg.validate()?;
        Ok(BdeController {
            cfg,
            learners: BTreeMap::new(),
            policy_rng,
            pending: None,
            slot: 0,
        })
    }

    pub fn config(&self) -> &BdeConfig {
        &self.cfg
    }

    pub fn learner(&self, x1: usize) -> Option<&PerX1Learner> {
        self.learners.get(&x1)
    }

    pub fn slots_seen(&self) -> u64 {
        self.slot
    }
}

fn replan(cfg: &BdeConfig, rec_dims: (usize, usize), learner: &mut PerX1Learner) -> Result<()> {
    let (x2_dim, x3_dim) = rec_dims;
    let counts = estimator::build_counts(&learner.data, &cfg.actions, x2_dim, x3_dim)?;
    let augmented = estimator::augment(&counts, &cfg.actions);
    let model = estimator::fill_and_normalize(&counts, &augmented)?;
    let qtable = planner::value_iteration(&model, &cfg.actions, &cfg.cost, cfg.vi)?;
    let policy = planner::extract_epsilon_soft(&qtable, &cfg.actions, cfg.epsilon)?;
    learner.policy = Some(policy);
    learner.qtable = Some(qtable);
    learner.last_counts = Some(counts);
    learner.plans += 1;
    Ok(())
}

/// Per-slot agent interface shared by the controller and the baselines.
pub trait SlotAgent {
    /// Pick the PRBs for the slot that `obs` opens.
    fn decide(&mut self, obs: &RawObservation) -> Result<Prb>;
    /// Deliver the slot's QoS statistic and return the completed record.
    fn feedback(&mut self, q_ms: f64) -> Result<SlotRecord>;
}

impl SlotAgent for BdeController {
    fn decide(&mut self, obs: &RawObservation) -> Result<Prb> {
        if self.pending.is_some() {
            return Err(Error::Protocol("decide called with feedback outstanding"));
        }
        obs.validate()?;
        let state = discretize(obs, &self.cfg.buckets)?;
        let cfg = &self.cfg;
        let learner = self
            .learners
            .entry(state.x1)
            .or_insert_with(|| PerX1Learner::new(cfg));
        learner.counts += 1;
        let in_warmup = match cfg.warmup {
            Warmup::Forever => true,
            Warmup::Slots(t0) => learner.counts <= t0,
        };
        let w = if in_warmup {
            learner.bandit.select()
        } else if let Some(policy) = &learner.policy {
            policy.sample(state.x2, state.x3, &mut self.policy_rng)
        } else {
            // Past warmup but before the first episode boundary: keep using
            // the (now frozen) bandit.
            learner.bandit.select()
        };
        self.pending = Some(Pending {
            state,
            obs: *obs,
            w,
        });
        Ok(w)
    }

    fn feedback(&mut self, q_ms: f64) -> Result<SlotRecord> {
        let pending = self
            .pending
            .take()
            .ok_or(Error::Protocol("feedback without a pending decide"))?;
        let record = SlotRecord::new(
            self.slot,
            pending.state,
            pending.obs,
            pending.w,
            q_ms,
            &self.cfg.cost,
        );
        self.slot += 1;
        let cfg = &self.cfg;
        let dims = (cfg.buckets.mcs.len(), cfg.buckets.queue.len());
        let learner = self
            .learners
            .get_mut(&pending.state.x1)
            .expect("decide created the learner");
        learner.data.push(record.clone());
        match cfg.warmup {
            Warmup::Forever => learner.bandit.update(pending.w, record.violated),
            Warmup::Slots(t0) => {
                if learner.counts <= t0 {
                    learner.bandit.update(pending.w, record.violated);
                } else if (learner.counts - t0).is_multiple_of(cfg.episode_slots) {
                    replan(cfg, dims, learner)?;
                }
            }
        }
        Ok(record)
    }
}
