//! Comparison schemes sharing the controller's agent interface.
//!
//! - No adaptation: one bandit over a single-state world; the observation
//!   never influences the choice.
//! - Bandit only: the full per-user-bucket controller with warmup forever,
//!   so it never estimates a model or plans.
//! - Monte Carlo control: on-policy first-visit Monte Carlo over the same
//!   state grid, with returns truncated at episode boundaries. The task is
//!   continuing, so the truncation biases the estimates; the scheme exists
//!   as a reference point, not as a recommendation.

use alloc::collections::BTreeMap;
use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use crate::bandit::CostUcb1;
use crate::controller::{BdeConfig, BdeController, SlotAgent, Warmup};
use crate::domain::{discretize, DiscreteState, Prb, RawObservation, SlotRecord};
use crate::error::{Error, Result};
use crate::planner::{policy_from_greedy, Policy};
use crate::rng::RngStream;

/// Scheme selector used by reports and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeId {
    NoAdaptation,
    VUcb1Only,
    McControl,
    ProposedRl,
}

impl SchemeId {
    pub fn as_str(&self) -> &'static str {
        match self {
            SchemeId::NoAdaptation => "noadapt",
            SchemeId::VUcb1Only => "vucb1",
            SchemeId::McControl => "mc",
            SchemeId::ProposedRl => "rl",
        }
    }

    pub fn all() -> [SchemeId; 4] {
        [
            SchemeId::NoAdaptation,
            SchemeId::VUcb1Only,
            SchemeId::McControl,
            SchemeId::ProposedRl,
        ]
    }
}

/// Bandit-only scheme: the controller with warmup forever.
pub fn vucb1_only(cfg: BdeConfig, policy_rng: RngStream) -> Result<BdeController> {
    if cfg.warmup != Warmup::Forever {
        return Err(Error::config(
            "the bandit-only scheme requires Warmup::Forever; a finite warmup would plan",
        ));
    }
    BdeController::new(cfg, policy_rng)
}

/// Static scheme: a single bandit, blind to the slice state.
#[derive(Debug, Clone)]
pub struct NoAdaptation {
    cfg: BdeConfig,
    bandit: CostUcb1,
    pending: Option<(DiscreteState, RawObservation, Prb)>,
    slot: u64,
}

impl NoAdaptation {
    pub fn new(cfg: BdeConfig) -> Result<Self> {
        cfg.validate()?;
        let bandit = CostUcb1::monotone(cfg.actions.clone(), cfg.cost.lambda, cfg.ucb_coeff);
        Ok(NoAdaptation {
            cfg,
            bandit,
            pending: None,
            slot: 0,
        })
    }

    pub fn bandit(&self) -> &CostUcb1 {
        &self.bandit
    }
}

impl SlotAgent for NoAdaptation {
    fn decide(&mut self, obs: &RawObservation) -> Result<Prb> {
        if self.pending.is_some() {
            return Err(Error::Protocol("decide called with feedback outstanding"));
        }
        obs.validate()?;
        // The state is recorded for reporting but never consulted.
        let state = discretize(obs, &self.cfg.buckets)?;
        let w = self.bandit.select();
        self.pending = Some((state, *obs, w));
        Ok(w)
    }

    fn feedback(&mut self, q_ms: f64) -> Result<SlotRecord> {
        let (state, obs, w) = self
            .pending
            .take()
            .ok_or(Error::Protocol("feedback without a pending decide"))?;
        let record = SlotRecord::new(self.slot, state, obs, w, q_ms, &self.cfg.cost);
        self.slot += 1;
        self.bandit.update(w, record.violated);
        Ok(record)
    }
}

/// Per-bucket state of the Monte Carlo scheme.
#[derive(Debug, Clone)]
struct McLearner {
    counts: u64,
    data: Vec<SlotRecord>,
    bandit: CostUcb1,
    /// Running-average return per (x2, x3, action index).
    returns: BTreeMap<(usize, usize, usize), (f64, u64)>,
    policy: Option<Policy>,
    episodes: u32,
}

/// On-policy first-visit Monte Carlo control over the bucketed state.
#[derive(Debug, Clone)]
pub struct McControl {
    cfg: BdeConfig,
    learners: BTreeMap<usize, McLearner>,
    policy_rng: RngStream,
    pending: Option<(DiscreteState, RawObservation, Prb)>,
    slot: u64,
}

impl McControl {
    pub fn new(cfg: BdeConfig, policy_rng: RngStream) -> Result<Self> {
        cfg.validate()?;
        if cfg.warmup == Warmup::Forever {
            return Err(Error::config("Monte Carlo control needs a finite warmup"));
        }
        Ok(McControl {
            cfg,
            learners: BTreeMap::new(),
            policy_rng,
            pending: None,
            slot: 0,
        })
    }

    fn warmup_slots(&self) -> u64 {
        match self.cfg.warmup {
            Warmup::Slots(n) => n,
            Warmup::Forever => unreachable!("rejected at construction"),
        }
    }

    pub fn episodes(&self, x1: usize) -> u32 {
        self.learners.get(&x1).map(|l| l.episodes).unwrap_or(0)
    }

    pub fn average_return(&self, x1: usize, x2: usize, x3: usize, w_index: usize) -> Option<f64> {
        self.learners
            .get(&x1)
            .and_then(|l| l.returns.get(&(x2, x3, w_index)))
            .map(|&(mean, _)| mean)
    }

    /// First-visit update over one episode, then a fresh epsilon-soft policy.
    fn finish_episode(&mut self, x1: usize) -> Result<()> {
        let cfg = &self.cfg;
        let episode_len = cfg.episode_slots as usize;
        let learner = self.learners.get_mut(&x1).expect("learner exists");
        let data = &learner.data;
        let episode = &data[data.len() - episode_len..];

        // Discounted suffix returns, truncated at the episode end.
        let mut returns = alloc::vec![0.0f64; episode.len()];
        let mut acc = 0.0;
        for (i, rec) in episode.iter().enumerate().rev() {
            acc = rec.cost + cfg.cost.gamma * acc;
            returns[i] = acc;
        }

        let mut seen: BTreeSet<(usize, usize, usize)> = BTreeSet::new();
        for (i, rec) in episode.iter().enumerate() {
            let w_index = cfg
                .actions
                .index_of(rec.action)
                .ok_or_else(|| Error::config("logged action not in the action set"))?;
            let key = (rec.state.x2, rec.state.x3, w_index);
            if !seen.insert(key) {
                continue;
            }
            let entry = learner.returns.entry(key).or_insert((0.0, 0));
            entry.1 += 1;
            entry.0 += (returns[i] - entry.0) / entry.1 as f64;
        }
        learner.episodes += 1;

        // Greedy per state over the sampled actions; an unsampled state
        // falls back to the largest action to protect the QoS.
        let (x2_dim, x3_dim) = (cfg.buckets.mcs.len(), cfg.buckets.queue.len());
        let mut greedy = Vec::with_capacity(x2_dim * x3_dim);
        for x2 in 0..x2_dim {
            for x3 in 0..x3_dim {
                let mut best: Option<(usize, f64)> = None;
                for w in 0..cfg.actions.len() {
                    if let Some(&(mean, _)) = learner.returns.get(&(x2, x3, w)) {
                        if best.map(|(_, b)| mean < b).unwrap_or(true) {
                            best = Some((w, mean));
                        }
                    }
                }
                greedy.push(best.map(|(w, _)| w).unwrap_or(cfg.actions.len() - 1));
            }
        }
        learner.policy = Some(policy_from_greedy(
            &greedy,
            x2_dim,
            x3_dim,
            &cfg.actions,
            cfg.epsilon,
        )?);
        Ok(())
    }
}

impl SlotAgent for McControl {
    fn decide(&mut self, obs: &RawObservation) -> Result<Prb> {
        if self.pending.is_some() {
            return Err(Error::Protocol("decide called with feedback outstanding"));
        }
        obs.validate()?;
        let state = discretize(obs, &self.cfg.buckets)?;
        let cfg = &self.cfg;
        let learner = self.learners.entry(state.x1).or_insert_with(|| McLearner {
            counts: 0,
            data: Vec::new(),
            bandit: CostUcb1::monotone(cfg.actions.clone(), cfg.cost.lambda, cfg.ucb_coeff),
            returns: BTreeMap::new(),
            policy: None,
            episodes: 0,
        });
        learner.counts += 1;
        let t0 = match cfg.warmup {
            Warmup::Slots(n) => n,
            Warmup::Forever => unreachable!(),
        };
        let w = if learner.counts <= t0 {
            learner.bandit.select()
        } else if let Some(policy) = &learner.policy {
            policy.sample(state.x2, state.x3, &mut self.policy_rng)
        } else {
            learner.bandit.select()
        };
        self.pending = Some((state, *obs, w));
        Ok(w)
    }

    fn feedback(&mut self, q_ms: f64) -> Result<SlotRecord> {
        let (state, obs, w) = self
            .pending
            .take()
            .ok_or(Error::Protocol("feedback without a pending decide"))?;
        let record = SlotRecord::new(self.slot, state, obs, w, q_ms, &self.cfg.cost);
        self.slot += 1;
        let t0 = self.warmup_slots();
        let learner = self.learners.get_mut(&state.x1).expect("learner exists");
        learner.data.push(record.clone());
        let counts = learner.counts;
        if counts <= t0 {
            learner.bandit.update(w, record.violated);
        } else if (counts - t0).is_multiple_of(self.cfg.episode_slots) {
            self.finish_episode(state.x1)?;
        }
        Ok(record)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{ActionSet, BucketEdges, CostParams, QosStatistic, StateBuckets};
    use crate::planner::ViParams;
    use alloc::vec;

    fn config(actions: Vec<Prb>, warmup: Warmup, episode_slots: u64, epsilon: f64) -> BdeConfig {
        let actions = ActionSet::new(actions).unwrap();
        let cost =
            CostParams::with_lambda_rule(&actions, 0.01, 50.0, 0.99, QosStatistic::PerUserMean)
                .unwrap();
        BdeConfig {
            buckets: StateBuckets::new(
                BucketEdges::new(vec![0.0, 2.0, 8.0, 12.0]).unwrap(),
                BucketEdges::new(vec![0.0, 12.0, 28.0]).unwrap(),
                BucketEdges::new(vec![0.0, 20.0, 40.0, 61.0, 63.0]).unwrap(),
            ),
            actions,
            cost,
            warmup,
            episode_slots,
            epsilon,
            vi: ViParams::default(),
            ucb_coeff: crate::bandit::DEFAULT_UCB_COEFF,
        }
    }

    fn obs(users: u32, level: u8) -> RawObservation {
        RawObservation {
            active_users: users,
            avg_mcs: 16.0,
            queue_level: level,
            queued_bytes: if level == 0 { 0 } else { 1000 },
        }
    }

    #[test]
    fn no_adaptation_ignores_observation_content() {
        let cfg = config(vec![20, 40, 90], Warmup::Slots(10), 5, 0.1);
        let mut a = NoAdaptation::new(cfg.clone()).unwrap();
        let mut b = NoAdaptation::new(cfg).unwrap();
        // Different observation sequences, identical outcome sequences.
        let seq_a = [obs(1, 0), obs(10, 30), obs(5, 62), obs(3, 10)];
        let seq_b = [obs(10, 62), obs(1, 0), obs(2, 45), obs(9, 0)];
        for k in 0..40 {
            let q = if k % 5 == 0 { 100.0 } else { 1.0 };
            let wa = {
                a.decide(&seq_a[k % 4]).unwrap();
                a.feedback(q).unwrap().action
            };
            let wb = {
                b.decide(&seq_b[k % 4]).unwrap();
                b.feedback(q).unwrap().action
            };
            assert_eq!(wa, wb, "slot {k}");
        }
        assert_eq!(a.bandit().counts(), b.bandit().counts());
        assert_eq!(a.bandit().means(), b.bandit().means());
    }

    #[test]
    fn no_adaptation_converges_to_cheapest_feasible_arm() {
        let cfg = config(vec![30, 50, 90], Warmup::Slots(10), 5, 0.1);
        let mut agent = NoAdaptation::new(cfg).unwrap();
        let o = obs(5, 0);
        let mut late_picks = BTreeMap::new();
        for k in 0..3000 {
            let w = agent.decide(&o).unwrap();
            // Only 30 PRBs ever violates.
            let q = if w == 30 { 100.0 } else { 1.0 };
            agent.feedback(q).unwrap();
            if k >= 2500 {
                *late_picks.entry(w).or_insert(0u32) += 1;
            }
        }
        assert!(
            late_picks.get(&50).copied().unwrap_or(0) > 450,
            "{late_picks:?}"
        );
    }

    #[test]
    fn singleton_action_set_is_constant() {
        let cfg = config(vec![42], Warmup::Slots(3), 2, 0.1);
        let mut agent = NoAdaptation::new(cfg).unwrap();
        let o = obs(5, 0);
        for _ in 0..10 {
            assert_eq!(agent.decide(&o).unwrap(), 42);
            agent.feedback(1.0).unwrap();
        }
    }

    #[test]
    fn vucb1_only_requires_forever_warmup() {
        let cfg = config(vec![20, 90], Warmup::Slots(10), 5, 0.1);
        assert!(vucb1_only(cfg, RngStream::derive(1, "policy")).is_err());
        let cfg = config(vec![20, 90], Warmup::Forever, 5, 0.1);
        let mut agent = vucb1_only(cfg, RngStream::derive(1, "policy")).unwrap();
        let o = obs(10, 0);
        for _ in 0..25 {
            agent.decide(&o).unwrap();
            agent.feedback(1.0).unwrap();
        }
        assert_eq!(agent.learner(2).unwrap().plans(), 0);
    }

    #[test]
    fn mc_control_rejects_forever_warmup() {
        let cfg = config(vec![20, 90], Warmup::Forever, 5, 0.1);
        assert!(McControl::new(cfg, RngStream::derive(1, "policy")).is_err());
    }

    #[test]
    fn mc_identical_costs_give_geometric_return() {
        // No warmup, episodes of 4, single recurring state-action pair.
        let cfg = config(vec![20, 90], Warmup::Slots(0), 4, 0.0);
        let gamma = cfg.cost.gamma;
        let mut agent = McControl::new(cfg, RngStream::derive(2, "policy")).unwrap();
        let o = obs(10, 0);
        for _ in 0..4 {
            // Cold bandit fallback always proposes the largest unpulled arm,
            // which stays unpulled because warmup never updates it.
            let w = agent.decide(&o).unwrap();
            assert_eq!(w, 90);
            agent.feedback(1.0).unwrap();
        }
        assert_eq!(agent.episodes(2), 1);
        let expected = 90.0 * (1.0 - gamma.powi(4)) / (1.0 - gamma);
        let got = agent.average_return(2, 1, 0, 1).unwrap();
        assert!((got - expected).abs() < 1e-9, "{got} vs {expected}");
    }

    #[test]
    fn mc_first_visit_counts_once_per_episode() {
        let cfg = config(vec![20, 90], Warmup::Slots(0), 3, 0.0);
        let mut agent = McControl::new(cfg, RngStream::derive(2, "policy")).unwrap();
        let o = obs(10, 0);
        for _ in 0..3 {
            agent.decide(&o).unwrap();
            agent.feedback(1.0).unwrap();
        }
        // Three visits of the same pair, one episode: a single sample.
        let l = agent.learners.get(&2).unwrap();
        let (_, n) = l.returns[&(1, 0, 1)];
        assert_eq!(n, 1);
    }

    #[test]
    fn mc_hand_episode_returns() {
        // Distinct states each slot; all succeed, so cost = 90 per slot.
        let cfg = config(vec![20, 90], Warmup::Slots(0), 3, 0.0);
        let gamma = cfg.cost.gamma;
        let mut agent = McControl::new(cfg, RngStream::derive(2, "policy")).unwrap();
        let states = [obs(10, 0), obs(10, 25), obs(10, 45)];
        for o in &states {
            assert_eq!(agent.decide(o).unwrap(), 90);
            agent.feedback(1.0).unwrap();
        }
        let g2 = 90.0;
        let g1 = 90.0 + gamma * g2;
        let g0 = 90.0 + gamma * g1;
        assert_eq!(agent.average_return(2, 1, 0, 1).unwrap(), g0);
        assert_eq!(agent.average_return(2, 1, 1, 1).unwrap(), g1);
        assert_eq!(agent.average_return(2, 1, 2, 1).unwrap(), g2);
        // The policy exists and unvisited states fall back to the big arm.
        let l = agent.learners.get(&2).unwrap();
        let policy = l.policy.as_ref().unwrap();
        assert_eq!(policy.prob(0, 0, 1), 1.0);
    }

    #[test]
    fn mc_episode_boundaries_follow_warmup_offset() {
        let cfg = config(vec![20, 90], Warmup::Slots(2), 3, 0.1);
        let mut agent = McControl::new(cfg, RngStream::derive(2, "policy")).unwrap();
        let o = obs(10, 0);
        let mut episode_trail = Vec::new();
        for _ in 0..11 {
            agent.decide(&o).unwrap();
            agent.feedback(1.0).unwrap();
            episode_trail.push(agent.episodes(2));
        }
        // counts:   1  2  3  4  5  6  7  8  9 10 11
        // episodes: 0  0  0  0  1  1  1  2  2  2  3
        assert_eq!(episode_trail, vec![0, 0, 0, 0, 1, 1, 1, 2, 2, 2, 3]);
    }
}
