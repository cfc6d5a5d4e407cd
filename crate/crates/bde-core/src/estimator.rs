//! Empirical transition model over the bucketed state, learned from logged
//! slots and stretched along the action order.
//!
//! Only the MCS bucket `x2` and queue bucket `x3` enter the model; learning
//! runs separately per user bucket `x1`, whose stream supplies the records.
//! The cost channel is the binary outcome class (violated or not), since the
//! cost given the action takes exactly two values.
//!
//! Counting happens in three stages:
//!
//! 1. `build_counts` tallies every observed `(x2, x3, w) -> (x2', x3', v)`
//!    transition from consecutive records.
//! 2. `augment` adds implied observations: a slot that violated with `w`
//!    would also have violated with any smaller bandwidth, with the queue
//!    bucket one step worse; a slot that succeeded with `w` would also have
//!    succeeded with any larger bandwidth, with the queue bucket one step
//!    better. Queue shifts clamp at the boundary buckets.
//! 3. `fill_and_normalize` keeps observed rows exactly as counted, fills
//!    action rows never observed from the augmented counts, and gives any
//!    row still empty the optimistic single count "this action succeeds and
//!    empties the queue". Rows are then normalized to probabilities.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::domain::{ActionSet, SlotRecord};
use crate::error::{Error, Result};

/// Outcome classes of the cost channel.
pub const OUTCOMES: usize = 2;

/// Dense count tensor indexed by `(x2, x3, w, x2', x3', v)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionCounts {
    x2_dim: usize,
    x3_dim: usize,
    n_actions: usize,
    counts: Vec<u64>,
}

impl TransitionCounts {
    pub fn zeros(x2_dim: usize, x3_dim: usize, n_actions: usize) -> Self {
        TransitionCounts {
            x2_dim,
            x3_dim,
            n_actions,
            counts: vec![0; x2_dim * x3_dim * n_actions * x2_dim * x3_dim * OUTCOMES],
        }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.x2_dim, self.x3_dim, self.n_actions)
    }

    fn idx(&self, x2: usize, x3: usize, w: usize, nx2: usize, nx3: usize, v: usize) -> usize {
        ((((x2 * self.x3_dim + x3) * self.n_actions + w) * self.x2_dim + nx2) * self.x3_dim + nx3)
            * OUTCOMES
            + v
    }

    pub fn get(
        &self,
        x2: usize,
        x3: usize,
        w: usize,
        nx2: usize,
        nx3: usize,
        violated: bool,
    ) -> u64 {
        self.counts[self.idx(x2, x3, w, nx2, nx3, violated as usize)]
    }

    #[allow(clippy::too_many_arguments)]
    pub fn add(
        &mut self,
        x2: usize,
        x3: usize,
        w: usize,
        nx2: usize,
        nx3: usize,
        violated: bool,
        count: u64,
    ) {
        let i = self.idx(x2, x3, w, nx2, nx3, violated as usize);
        self.counts[i] += count;
    }

    /// Total observations in the `(x2, x3, w)` row.
    pub fn row_total(&self, x2: usize, x3: usize, w: usize) -> u64 {
        let base = self.idx(x2, x3, w, 0, 0, 0);
        let len = self.x2_dim * self.x3_dim * OUTCOMES;
        self.counts[base..base + len].iter().sum()
    }

    /// Total observations of the `(x2, x3)` state across all actions.
    pub fn state_total(&self, x2: usize, x3: usize) -> u64 {
        (0..self.n_actions).map(|w| self.row_total(x2, x3, w)).sum()
    }

    fn row(&self, x2: usize, x3: usize, w: usize) -> &[u64] {
        let base = self.idx(x2, x3, w, 0, 0, 0);
        let len = self.x2_dim * self.x3_dim * OUTCOMES;
        &self.counts[base..base + len]
    }

    fn row_mut(&mut self, x2: usize, x3: usize, w: usize) -> &mut [u64] {
        let base = self.idx(x2, x3, w, 0, 0, 0);
        let len = self.x2_dim * self.x3_dim * OUTCOMES;
        &mut self.counts[base..base + len]
    }
}

/// Row-stochastic transition probabilities `p(x2', x3', v | x2, x3, w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionModel {
    x2_dim: usize,
    x3_dim: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl TransitionModel {
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.x2_dim, self.x3_dim, self.n_actions)
    }

    fn idx(&self, x2: usize, x3: usize, w: usize, nx2: usize, nx3: usize, v: usize) -> usize {
        ((((x2 * self.x3_dim + x3) * self.n_actions + w) * self.x2_dim + nx2) * self.x3_dim + nx3)
            * OUTCOMES
            + v
    }

    pub fn prob(
        &self,
        x2: usize,
        x3: usize,
        w: usize,
        nx2: usize,
        nx3: usize,
        violated: bool,
    ) -> f64 {
        self.probs[self.idx(x2, x3, w, nx2, nx3, violated as usize)]
    }

    /// Probability the QoS is violated at `(x2, x3)` under action index `w`.
    pub fn violation_prob(&self, x2: usize, x3: usize, w: usize) -> f64 {
        let mut p = 0.0;
        for nx2 in 0..self.x2_dim {
            for nx3 in 0..self.x3_dim {
                p += self.prob(x2, x3, w, nx2, nx3, true);
            }
        }
        p
    }

    /// Structural check: every row sums to one.
    pub fn validate(&self) -> Result<()> {
        let len = self.x2_dim * self.x3_dim * OUTCOMES;
        for x2 in 0..self.x2_dim {
            for x3 in 0..self.x3_dim {
                for w in 0..self.n_actions {
                    let base = self.idx(x2, x3, w, 0, 0, 0);
                    let sum: f64 = self.probs[base..base + len].iter().sum();
                    if (sum - 1.0).abs() > 1e-9
                        || self.probs[base..base + len].iter().any(|&p| p < 0.0)
                    {
                        return Err(Error::Model(format!(
                            "row ({x2}, {x3}, {w}) sums to {sum}, expected 1"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Build a model directly from probabilities (used by benchmarks/tests).
    pub fn from_probs(
        x2_dim: usize,
        x3_dim: usize,
        n_actions: usize,
        probs: Vec<f64>,
    ) -> Result<Self> {
        let expect = x2_dim * x3_dim * n_actions * x2_dim * x3_dim * OUTCOMES;
        if probs.len() != expect {
            return Err(Error::Model(format!(
                "probability tensor has {} entries, expected {expect}",
                probs.len()
            )));
        }
        let model = TransitionModel {
            x2_dim,
            x3_dim,
            n_actions,
            probs,
        };
        model.validate()?;
        Ok(model)
    }
}

/// Count observed transitions from consecutive records of one `x1` stream.
pub fn build_counts(
    log: &[SlotRecord],
    actions: &ActionSet,
    x2_dim: usize,
    x3_dim: usize,
) -> Result<TransitionCounts> {
    let mut p = TransitionCounts::zeros(x2_dim, x3_dim, actions.len());
    for pair in log.windows(2) {
        let (from, to) = (&pair[0], &pair[1]);
        let w = actions.index_of(from.action).ok_or_else(|| {
            Error::config(format!(
                "logged action {} not in the action set",
                from.action
            ))
        })?;
        if from.state.x2 >= x2_dim
            || from.state.x3 >= x3_dim
            || to.state.x2 >= x2_dim
            || to.state.x3 >= x3_dim
        {
            return Err(Error::config("logged state outside the bucket dimensions"));
        }
        p.add(
            from.state.x2,
            from.state.x3,
            w,
            to.state.x2,
            to.state.x3,
            from.violated,
            1,
        );
    }
    Ok(p)
}

/// Spread observed transitions along the action order.
pub fn augment(p: &TransitionCounts, actions: &ActionSet) -> TransitionCounts {
    debug_assert_eq!(p.n_actions, actions.len());
    let (x2_dim, x3_dim, n_actions) = p.dims();
    let mut out = p.clone();
    for x2 in 0..x2_dim {
        for x3 in 0..x3_dim {
            for w in 0..n_actions {
                for nx2 in 0..x2_dim {
                    for nx3 in 0..x3_dim {
                        let violated = p.get(x2, x3, w, nx2, nx3, true);
                        if violated > 0 {
                            // A smaller bandwidth would have failed too, with
                            // a slightly worse queue.
                            let shifted = (nx3 + 1).min(x3_dim - 1);
                            for smaller in 0..w {
                                out.add(x2, x3, smaller, nx2, shifted, true, violated);
                            }
                        }
                        let succeeded = p.get(x2, x3, w, nx2, nx3, false);
                        if succeeded > 0 {
                            // A larger bandwidth would have succeeded too,
                            // with a slightly better queue.
                            let shifted = nx3.saturating_sub(1);
                            for larger in w + 1..n_actions {
                                out.add(x2, x3, larger, nx2, shifted, false, succeeded);
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Assemble the final counts and normalize them into a model.
///
/// Observed rows are kept exactly as counted. Rows with no observations copy
/// the augmented counts; a row that is still empty gets the optimistic single
/// count "this action succeeds with the least queue possible", keeping the
/// MCS bucket where it is (it evolves on its own).
pub fn fill_and_normalize(
    p: &TransitionCounts,
    p_aug: &TransitionCounts,
) -> Result<TransitionModel> {
    if p.dims() != p_aug.dims() {
        return Err(Error::Model(
            "count tensors have mismatched dimensions".into(),
        ));
    }
    let (x2_dim, x3_dim, n_actions) = p.dims();
    let mut filled = p.clone();
    for x2 in 0..x2_dim {
        for x3 in 0..x3_dim {
            for w in 0..n_actions {
                if p.row_total(x2, x3, w) == 0 {
                    filled
                        .row_mut(x2, x3, w)
                        .copy_from_slice(p_aug.row(x2, x3, w));
                }
                if filled.row_total(x2, x3, w) == 0 {
                    filled.add(x2, x3, w, x2, 0, false, 1);
                }
            }
        }
    }

    let mut probs = vec![0.0; filled.counts.len()];
    for x2 in 0..x2_dim {
        for x3 in 0..x3_dim {
            for w in 0..n_actions {
                let total = filled.row_total(x2, x3, w) as f64;
                let base = filled.idx(x2, x3, w, 0, 0, 0);
                let len = x2_dim * x3_dim * OUTCOMES;
                for k in 0..len {
                    probs[base + k] = filled.counts[base + k] as f64 / total;
                }
            }
        }
    }
    TransitionModel::from_probs(x2_dim, x3_dim, n_actions, probs)
}

/// Convenience: the full pipeline from one `x1` stream.
pub fn estimate(
    log: &[SlotRecord],
    actions: &ActionSet,
    x2_dim: usize,
    x3_dim: usize,
) -> Result<(TransitionCounts, TransitionModel)> {
    let p = build_counts(log, actions, x2_dim, x3_dim)?;
    let p_aug = augment(&p, actions);
    let model = fill_and_normalize(&p, &p_aug)?;
    Ok((p, model))
}
