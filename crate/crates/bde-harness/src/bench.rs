//! Wall-time micro-benchmark for the value-iteration core.

use std::time::Instant;

use bde_core::estimator::{TransitionModel, OUTCOMES};
use bde_core::planner::{value_iteration, ViParams};
use bde_core::rng::RngStream;
use bde_core::{ActionSet, CostParams, QosStatistic};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone)]
pub struct BenchResult {
    pub n: usize,
    pub repetitions: u32,
    pub mean_seconds: f64,
    pub run_seconds: Vec<f64>,
    pub iterations: u32,
}

/// Random row-stochastic model with `|X2| = |X3| = |W| = n`.
fn random_model(n: usize, rng: &mut RngStream) -> TransitionModel {
    let rows = n * n * n;
    let row_len = n * n * OUTCOMES;
    let mut probs = Vec::with_capacity(rows * row_len);
    for _ in 0..rows {
        let raw: Vec<f64> = (0..row_len).map(|_| rng.next_f64() + 1e-3).collect();
        let total: f64 = raw.iter().sum();
        probs.extend(raw.into_iter().map(|x| x / total));
    }
    TransitionModel::from_probs(n, n, n, probs).expect("constructed rows are stochastic")
}

/// Time value iteration on a seeded random model of size `n^3`.
pub fn bench_vi(n: usize, repetitions: u32, seed: u64) -> Result<BenchResult> {
    if n < 2 {
        return Err(HarnessError::config("bench-vi needs n >= 2"));
    }
    if n > 50 {
        return Err(HarnessError::config("bench-vi supports n <= 50"));
    }
    if repetitions == 0 {
        return Err(HarnessError::config(
            "bench-vi needs at least one repetition",
        ));
    }
    let mut rng = RngStream::derive(seed, "bench");
    let model = random_model(n, &mut rng);
    // Evenly spread PRB actions; n <= 50 keeps them within 1..=100.
    let actions: Vec<u16> = (0..n).map(|i| (1 + i * 2) as u16).collect();
    let actions = ActionSet::new(actions)?;
    let cost = CostParams::with_lambda_rule(&actions, 0.01, 50.0, 0.99, QosStatistic::PerUserMean)?;

    let mut run_seconds = Vec::with_capacity(repetitions as usize);
    let mut iterations = 0;
    for _ in 0..repetitions {
        let start = Instant::now();
        let q = value_iteration(&model, &actions, &cost, ViParams::default())?;
        run_seconds.push(start.elapsed().as_secs_f64());
        iterations = q.iterations;
    }
    let mean_seconds = run_seconds.iter().sum::<f64>() / run_seconds.len() as f64;
    Ok(BenchResult {
        n,
        repetitions,
        mean_seconds,
        run_seconds,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_size_completes() {
        let r = bench_vi(2, 2, 7).unwrap();
        assert_eq!(r.run_seconds.len(), 2);
        assert!(r.mean_seconds >= 0.0);
        assert!(r.iterations > 0);
    }

    #[test]
    fn rejects_degenerate_sizes() {
        assert!(bench_vi(1, 2, 7).is_err());
        assert!(bench_vi(2, 0, 7).is_err());
        assert!(bench_vi(51, 1, 7).is_err());
    }
}
