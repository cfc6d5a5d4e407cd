//! Value iteration over the estimated model and epsilon-soft policy
//! extraction.
//!
//! The objective is a discounted cost minimum, so the Bellman backup takes a
//! minimum over actions and policy extraction is an argmin. The immediate
//! cost of `(x, w)` is `w + lambda * p_v(x, w)`, realized by weighting the
//! outcome channel of the transition model.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::domain::{ActionSet, CostParams, Prb};
use crate::error::{Error, Result};
use crate::estimator::TransitionModel;
use crate::math;
use crate::rng::RngStream;

/// Stopping parameters for value iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViParams {
    /// Max-norm change of the cost-to-go that counts as converged.
    pub stop_threshold: f64,
    pub max_iters: u32,
}

impl Default for ViParams {
    fn default() -> Self {
        ViParams {
            stop_threshold: 1e-6,
            max_iters: 10_000,
        }
    }
}

/// Q factors and cost-to-go over the `(x2, x3)` state grid.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    x2_dim: usize,
    x3_dim: usize,
    n_actions: usize,
    /// Q[x2][x3][w], flattened.
    q: Vec<f64>,
    /// J[x2][x3] = min over w of Q, flattened.
    j: Vec<f64>,
    pub converged: bool,
    pub iterations: u32,
    /// Last max-norm sweep change.
    pub residual: f64,
}

impl QTable {
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.x2_dim, self.x3_dim, self.n_actions)
    }

    pub fn q(&self, x2: usize, x3: usize, w: usize) -> f64 {
        self.q[(x2 * self.x3_dim + x3) * self.n_actions + w]
    }

    pub fn j(&self, x2: usize, x3: usize) -> f64 {
        self.j[x2 * self.x3_dim + x3]
    }

    /// Action index minimizing Q at the state, ties toward the smaller one.
    pub fn greedy(&self, x2: usize, x3: usize) -> usize {
        let mut best = 0;
        for w in 1..self.n_actions {
            if self.q(x2, x3, w) < self.q(x2, x3, best) {
                best = w;
            }
        }
        best
    }
}

/// Iterate the Bellman backup to the stated tolerance.
///
/// Non-convergence within `max_iters` is reported through the `converged`
/// flag, not as an error.
pub fn value_iteration(
    model: &TransitionModel,
    actions: &ActionSet,
    params: &CostParams,
    vi: ViParams,
) -> Result<QTable> {
    model.validate()?;
    let (x2_dim, x3_dim, n_actions) = model.dims();
    if n_actions != actions.len() {
        return Err(Error::Model(format!(
            "model built for {n_actions} actions, action set has {}",
            actions.len()
        )));
    }
    if !(params.gamma > 0.0 && params.gamma < 1.0) {
        return Err(Error::parameter("gamma", "must lie in (0, 1)"));
    }

    let states = x2_dim * x3_dim;
    let mut j = vec![0.0f64; states];
    let mut q = vec![0.0f64; states * n_actions];
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    let mut converged = false;

    while iterations < vi.max_iters {
        iterations += 1;
        let j_prev = j.clone();
        let mut delta = 0.0f64;
        for x2 in 0..x2_dim {
            for x3 in 0..x3_dim {
                let s = x2 * x3_dim + x3;
                let mut best = f64::INFINITY;
                for w in 0..n_actions {
                    let mut value = 0.0;
                    for nx2 in 0..x2_dim {
                        for nx3 in 0..x3_dim {
                            let ns = nx2 * x3_dim + nx3;
                            let p_ok = model.prob(x2, x3, w, nx2, nx3, false);
                            let p_viol = model.prob(x2, x3, w, nx2, nx3, true);
                            let cost_ok = actions.get(w) as f64;
                            let cost_viol = cost_ok + params.lambda;
                            value += p_ok * (cost_ok + params.gamma * j_prev[ns])
                                + p_viol * (cost_viol + params.gamma * j_prev[ns]);
                        }
                    }
                    q[s * n_actions + w] = value;
                    if value < best {
                        best = value;
                    }
                }
                delta = delta.max(math::abs(best - j_prev[s]));
                j[s] = best;
            }
        }
        residual = delta;
        if delta <= vi.stop_threshold {
            converged = true;
            break;
        }
    }

    Ok(QTable {
        x2_dim,
        x3_dim,
        n_actions,
        q,
        j,
        converged,
        iterations,
        residual,
    })
}

/// Stochastic policy over the action set, one distribution per state.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    x2_dim: usize,
    x3_dim: usize,
    actions: ActionSet,
    /// probs[x2][x3][w], flattened.
    probs: Vec<f64>,
}

impl Policy {
    pub fn prob(&self, x2: usize, x3: usize, w: usize) -> f64 {
        self.probs[(x2 * self.x3_dim + x3) * self.actions.len() + w]
    }

    /// Draw an action for the state from the run's policy stream.
    pub fn sample(&self, x2: usize, x3: usize, rng: &mut RngStream) -> Prb {
        let base = (x2 * self.x3_dim + x3) * self.actions.len();
        let u = rng.next_f64();
        let mut acc = 0.0;
        for w in 0..self.actions.len() {
            acc += self.probs[base + w];
            if u < acc {
                return self.actions.get(w);
            }
        }
        self.actions.max()
    }
}

/// Probability row of an epsilon-soft policy with the given greedy index.
pub fn epsilon_soft_row(greedy: usize, n_actions: usize, epsilon: f64) -> Vec<f64> {
    let base = epsilon / n_actions as f64;
    let mut row = vec![base; n_actions];
    row[greedy] = 1.0 - epsilon + base;
    row
}

/// Epsilon-soft policy around the greedy actions of a Q table.
pub fn extract_epsilon_soft(q: &QTable, actions: &ActionSet, epsilon: f64) -> Result<Policy> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::parameter("epsilon", "must lie in [0, 1]"));
    }
    let (x2_dim, x3_dim, n_actions) = q.dims();
    if n_actions != actions.len() {
        return Err(Error::Model("Q table and action set sizes differ".into()));
    }
    let mut probs = Vec::with_capacity(x2_dim * x3_dim * n_actions);
    for x2 in 0..x2_dim {
        for x3 in 0..x3_dim {
            probs.extend(epsilon_soft_row(q.greedy(x2, x3), n_actions, epsilon));
        }
    }
    Ok(Policy {
        x2_dim,
        x3_dim,
        actions: actions.clone(),
        probs,
    })
}

/// Build an epsilon-soft policy from explicit greedy indices (used by the
/// Monte Carlo baseline, whose Q estimates are sparse).
pub fn policy_from_greedy(
    greedy: &[usize],
    x2_dim: usize,
    x3_dim: usize,
    actions: &ActionSet,
    epsilon: f64,
) -> Result<Policy> {
    if greedy.len() != x2_dim * x3_dim {
        return Err(Error::Model("greedy table has wrong size".into()));
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::parameter("epsilon", "must lie in [0, 1]"));
    }
    let mut probs = Vec::with_capacity(greedy.len() * actions.len());
    for &g in greedy {
        probs.extend(epsilon_soft_row(g, actions.len(), epsilon));
    }
    Ok(Policy {
        x2_dim,
        x3_dim,
        actions: actions.clone(),
        probs,
    })
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use crate::domain::QosStatistic;
    use crate::estimator::OUTCOMES;
    use alloc::vec;

    fn params(lambda: f64, gamma: f64) -> CostParams {
        CostParams {
            lambda,
            alpha: 0.01,
            qc_ms: 50.0,
            gamma,
            statistic: QosStatistic::PerUserMean,
        }
    }

    /// Model over a single (x2, x3) state: p(v | w) given, next state fixed.
    fn single_state_model(p_viol: &[f64]) -> TransitionModel {
        let n = p_viol.len();
        let mut probs = vec![0.0; n * OUTCOMES];
        for (w, &pv) in p_viol.iter().enumerate() {
            probs[w * OUTCOMES] = 1.0 - pv;
            probs[w * OUTCOMES + 1] = pv;
        }
        TransitionModel::from_probs(1, 1, n, probs).unwrap()
    }

    #[test]
    fn single_state_single_action_is_geometric_series() {
        let model = single_state_model(&[0.0]);
        let actions = ActionSet::new(vec![30]).unwrap();
        let q =
            value_iteration(&model, &actions, &params(100.0, 0.99), ViParams::default()).unwrap();
        assert!(q.converged);
        assert!(q.residual <= ViParams::default().stop_threshold);
        // J = w / (1 - gamma), up to the stopping tolerance.
        assert!((q.j(0, 0) - 3000.0).abs() < 1e-3, "J = {}", q.j(0, 0));
    }

    #[test]
    fn dominated_action_is_never_greedy() {
        let model = single_state_model(&[0.0, 0.0]);
        let actions = ActionSet::new(vec![20, 90]).unwrap();
        let q =
            value_iteration(&model, &actions, &params(100.0, 0.99), ViParams::default()).unwrap();
        assert_eq!(q.greedy(0, 0), 0);
        assert!((q.j(0, 0) - 2000.0).abs() < 1e-3);
        assert!(q.q(0, 0, 1) > q.q(0, 0, 0));
    }

    /// Exact oracle: enumerate all deterministic policies of a tiny MDP and
    /// solve each policy's linear system directly.
    fn exact_optimal_j(
        model: &TransitionModel,
        actions: &ActionSet,
        params: &CostParams,
    ) -> Vec<f64> {
        let (x2_dim, x3_dim, n_actions) = model.dims();
        let states = x2_dim * x3_dim;
        let mut best = vec![f64::INFINITY; states];
        let mut assignment = vec![0usize; states];
        loop {
            // Solve (I - gamma * P_pi) J = c_pi by Gaussian elimination.
            let mut a = vec![vec![0.0f64; states + 1]; states];
            for s in 0..states {
                let (x2, x3) = (s / x3_dim, s % x3_dim);
                let w = assignment[s];
                let mut c = 0.0;
                for nx2 in 0..x2_dim {
                    for nx3 in 0..x3_dim {
                        let ns = nx2 * x3_dim + nx3;
                        let p = model.prob(x2, x3, w, nx2, nx3, false)
                            + model.prob(x2, x3, w, nx2, nx3, true);
                        a[s][ns] -= params.gamma * p;
                        c += model.prob(x2, x3, w, nx2, nx3, true) * params.lambda;
                    }
                }
                a[s][s] += 1.0;
                a[s][states] = actions.get(w) as f64 + c;
            }
            for col in 0..states {
                let pivot = (col..states)
                    .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
                    .unwrap();
                a.swap(col, pivot);
                for row in 0..states {
                    if row != col {
                        let f = a[row][col] / a[col][col];
                        for k in col..=states {
                            a[row][k] -= f * a[col][k];
                        }
                    }
                }
            }
            let j: Vec<f64> = (0..states).map(|s| a[s][states] / a[s][s]).collect();
            for s in 0..states {
                if j[s] < best[s] {
                    best[s] = j[s];
                }
            }
            // Next assignment in mixed radix.
            let mut k = 0;
            loop {
                if k == states {
                    return best;
                }
                assignment[k] += 1;
                if assignment[k] < n_actions {
                    break;
                }
                assignment[k] = 0;
                k += 1;
            }
        }
    }

    fn random_model(
        x2_dim: usize,
        x3_dim: usize,
        n_actions: usize,
        rng: &mut RngStream,
    ) -> TransitionModel {
        let rows = x2_dim * x3_dim * n_actions;
        let len = x2_dim * x3_dim * OUTCOMES;
        let mut probs = Vec::with_capacity(rows * len);
        for _ in 0..rows {
            let raw: Vec<f64> = (0..len).map(|_| rng.next_f64() + 1e-3).collect();
            let total: f64 = raw.iter().sum();
            probs.extend(raw.into_iter().map(|x| x / total));
        }
        TransitionModel::from_probs(x2_dim, x3_dim, n_actions, probs).unwrap()
    }

    #[test]
    fn three_state_mdp_matches_linear_solve() {
        let mut rng = RngStream::seed_from_u64(2024);
        let model = random_model(3, 1, 2, &mut rng);
        let actions = ActionSet::new(vec![20, 60]).unwrap();
        let p = params(500.0, 0.9);
        let vi = value_iteration(&model, &actions, &p, ViParams::default()).unwrap();
        assert!(vi.converged);
        let exact = exact_optimal_j(&model, &actions, &p);
        for s in 0..3 {
            assert!(
                (vi.j(s, 0) - exact[s]).abs() <= 1e-4,
                "state {s}: vi {} vs exact {}",
                vi.j(s, 0),
                exact[s]
            );
        }
    }

    #[test]
    fn greedy_matches_j_exactly() {
        let mut rng = RngStream::seed_from_u64(5);
        let model = random_model(2, 3, 3, &mut rng);
        let actions = ActionSet::new(vec![10, 40, 80]).unwrap();
        let q =
            value_iteration(&model, &actions, &params(300.0, 0.95), ViParams::default()).unwrap();
        for x2 in 0..2 {
            for x3 in 0..3 {
                assert_eq!(q.j(x2, x3), q.q(x2, x3, q.greedy(x2, x3)));
            }
        }
    }

    #[test]
    fn sweep_distances_contract() {
        let mut rng = RngStream::seed_from_u64(9);
        let model = random_model(2, 2, 2, &mut rng);
        let actions = ActionSet::new(vec![15, 75]).unwrap();
        let p = params(400.0, 0.9);
        // Run sweeps manually by limiting iterations and diffing J snapshots.
        let mut prev_j: Option<Vec<f64>> = None;
        let mut prev_dist: Option<f64> = None;
        for iters in 1..=12u32 {
            let q = value_iteration(
                &model,
                &actions,
                &p,
                ViParams {
                    stop_threshold: 0.0,
                    max_iters: iters,
                },
            )
            .unwrap();
            let j: Vec<f64> = (0..2)
                .flat_map(|x2| (0..2).map(move |x3| (x2, x3)))
                .map(|(x2, x3)| q.j(x2, x3))
                .collect();
            if let Some(prev) = prev_j {
                let dist = j
                    .iter()
                    .zip(&prev)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max);
                if let Some(pd) = prev_dist {
                    assert!(
                        dist <= p.gamma * pd + 1e-9,
                        "sweep distance {dist} vs gamma * {pd}"
                    );
                }
                prev_dist = Some(dist);
            }
            prev_j = Some(j);
        }
    }

    #[test]
    fn non_convergence_sets_flag() {
        let mut rng = RngStream::seed_from_u64(3);
        let model = random_model(2, 2, 2, &mut rng);
        let actions = ActionSet::new(vec![15, 75]).unwrap();
        let q = value_iteration(
            &model,
            &actions,
            &params(400.0, 0.99),
            ViParams {
                stop_threshold: 1e-12,
                max_iters: 3,
            },
        )
        .unwrap();
        assert!(!q.converged);
        assert_eq!(q.iterations, 3);
    }

    #[test]
    fn rejects_non_stochastic_model() {
        let probs = vec![0.5, 0.4]; // sums to 0.9
        assert!(TransitionModel::from_probs(1, 1, 1, probs).is_err());
    }

    // With violation probabilities nonincreasing in the action and identical
    // next-state marginals (so j is flat in w), the lambda rule makes greedy
    // never prefer a noticeably worse arm.
    #[test]
    fn lambda_rule_preference_at_argmin_level() {
        let actions = ActionSet::new(vec![20, 40, 60, 90]).unwrap();
        let alpha = 0.01;
        let lambda = crate::domain::lambda_for(90, 20, alpha).unwrap();
        let mut rng = RngStream::seed_from_u64(31);
        for _ in 0..200 {
            // One state, violation probability nonincreasing in w.
            let mut pv: Vec<f64> = (0..4).map(|_| rng.next_f64()).collect();
            pv.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let model = single_state_model(&pv);
            let p = CostParams {
                lambda,
                alpha,
                qc_ms: 50.0,
                gamma: 0.99,
                statistic: QosStatistic::PerUserMean,
            };
            let q = value_iteration(&model, &actions, &p, ViParams::default()).unwrap();
            let g = q.greedy(0, 0);
            for better in 0..4 {
                if pv[better] <= pv[g] - alpha {
                    panic!(
                        "greedy {} with pv {} ignored action {} with pv {}",
                        g, pv[g], better, pv[better]
                    );
                }
            }
        }
    }

    #[test]
    fn epsilon_soft_probabilities() {
        let row = epsilon_soft_row(0, 3, 0.01);
        assert!((row[0] - (0.99 + 0.01 / 3.0)).abs() < 1e-12);
        assert!((row[1] - 0.01 / 3.0).abs() < 1e-12);
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn epsilon_zero_is_deterministic_greedy() {
        let model = single_state_model(&[0.3, 0.0]);
        let actions = ActionSet::new(vec![20, 90]).unwrap();
        let q =
            value_iteration(&model, &actions, &params(7000.0, 0.99), ViParams::default()).unwrap();
        let policy = extract_epsilon_soft(&q, &actions, 0.0).unwrap();
        let mut rng = RngStream::seed_from_u64(1);
        for _ in 0..50 {
            assert_eq!(policy.sample(0, 0, &mut rng), 90);
        }
    }

    #[test]
    fn equal_q_breaks_toward_smaller_action() {
        let model = single_state_model(&[0.0, 0.0]);
        let actions = ActionSet::new(vec![40, 41]).unwrap();
        // Force exactly equal Q by a degenerate cost scale: impossible with
        // distinct bandwidths, so check the tie-break on the raw table.
        let q = QTable {
            x2_dim: 1,
            x3_dim: 1,
            n_actions: 2,
            q: vec![7.0, 7.0],
            j: vec![7.0],
            converged: true,
            iterations: 1,
            residual: 0.0,
        };
        assert_eq!(q.greedy(0, 0), 0);
        let policy = extract_epsilon_soft(&q, &actions, 0.0).unwrap();
        let mut rng = RngStream::seed_from_u64(1);
        assert_eq!(policy.sample(0, 0, &mut rng), 40);
        drop(model);
    }

    #[test]
    fn sampling_matches_distribution() {
        let greedy = vec![0usize];
        let actions = ActionSet::new(vec![10, 20, 30]).unwrap();
        let policy = policy_from_greedy(&greedy, 1, 1, &actions, 0.1).unwrap();
        let mut rng = RngStream::seed_from_u64(12345);
        let n = 100_000usize;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            let w = policy.sample(0, 0, &mut rng);
            counts[actions.index_of(w).unwrap()] += 1;
        }
        let expected = [0.9 + 0.1 / 3.0, 0.1 / 3.0, 0.1 / 3.0];
        for i in 0..3 {
            let p = expected[i];
            let sigma = (p * (1.0 - p) / n as f64).sqrt();
            let freq = counts[i] as f64 / n as f64;
            assert!(
                (freq - p).abs() <= 3.0 * sigma,
                "arm {i}: freq {freq}, expected {p} +- {}",
                3.0 * sigma
            );
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let greedy = vec![1usize];
        let actions = ActionSet::new(vec![10, 20, 30]).unwrap();
        let policy = policy_from_greedy(&greedy, 1, 1, &actions, 0.2).unwrap();
        let mut a = RngStream::derive(9, "policy");
        let mut b = RngStream::derive(9, "policy");
        for _ in 0..100 {
            assert_eq!(policy.sample(0, 0, &mut a), policy.sample(0, 0, &mut b));
        }
    }
}
