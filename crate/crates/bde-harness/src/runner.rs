//! Closed-loop execution of one scenario under one scheme, and multi-seed
//! comparisons.
//!
//! Simulated time is decoupled from wall time: a multi-hour scenario runs in
//! seconds. A `(scenario, scheme, seed)` triple fully determines every
//! output byte.

use bde_core::baselines::{vucb1_only, McControl, NoAdaptation, SchemeId};
use bde_core::rng::RngStream;
use bde_core::{BdeController, SliceSim, SlotAgent, Warmup};

use crate::config::ScenarioConfig;
use crate::error::{HarnessError, Result};
use crate::report::{metric_stats, RunReport, SchemeStats, SlotRow};

fn build_agent(
    scenario: &ScenarioConfig,
    scheme: SchemeId,
    seed: u64,
) -> Result<Box<dyn SlotAgent>> {
    let policy_rng = RngStream::derive(seed, "policy");
    let agent: Box<dyn SlotAgent> = match scheme {
        SchemeId::ProposedRl => {
            let cfg = scenario.bde_config(Warmup::Slots(scenario.bde.t0))?;
            Box::new(BdeController::new(cfg, policy_rng)?)
        }
        SchemeId::VUcb1Only => {
            let cfg = scenario.bde_config(Warmup::Forever)?;
            Box::new(vucb1_only(cfg, policy_rng)?)
        }
        SchemeId::NoAdaptation => {
            let cfg = scenario.bde_config(Warmup::Slots(scenario.bde.t0))?;
            Box::new(NoAdaptation::new(cfg)?)
        }
        SchemeId::McControl => {
            let cfg = scenario.bde_config(Warmup::Slots(scenario.bde.t0))?;
            Box::new(McControl::new(cfg, policy_rng)?)
        }
    };
    Ok(agent)
}

/// Run the full closed loop for `scenario.slots` slots.
pub fn run(scenario: &ScenarioConfig, scheme: SchemeId, seed: u64) -> Result<RunReport> {
    let mut sim = SliceSim::new(scenario.sim_config()?)?;
    let mut agent = build_agent(scenario, scheme, seed)?;
    let mut obs = sim.reset(seed);
    let mut rows = Vec::with_capacity(scenario.slots as usize);
    for slot in 0..scenario.slots {
        let at = |source| HarnessError::AtSlot { slot, source };
        let w = agent.decide(&obs).map_err(at)?;
        let (feedback, next_obs) = sim.step(w, scenario.slot_length_s).map_err(at)?;
        let record = agent.feedback(feedback.q_ms).map_err(at)?;
        rows.push(SlotRow::from_record(&record));
        obs = next_obs;
    }
    Ok(RunReport::new(scheme, seed, rows, scenario.capacity_note()))
}

/// Run every `(scheme, seed)` pair and aggregate per scheme.
pub fn compare(
    scenario: &ScenarioConfig,
    schemes: &[SchemeId],
    seeds: &[u64],
) -> Result<(Vec<RunReport>, Vec<SchemeStats>)> {
    if schemes.is_empty() || seeds.is_empty() {
        return Err(HarnessError::config("compare needs schemes and seeds"));
    }
    let mut reports = Vec::with_capacity(schemes.len() * seeds.len());
    let mut stats = Vec::with_capacity(schemes.len());
    for &scheme in schemes {
        let mut costs = Vec::new();
        let mut bandwidths = Vec::new();
        let mut successes = Vec::new();
        for &seed in seeds {
            let report = run(scenario, scheme, seed)?;
            costs.push(report.aggregates.cumulative_cost);
            bandwidths.push(report.aggregates.avg_bandwidth_prb);
            successes.push(report.aggregates.qos_success_rate);
            reports.push(report);
        }
        stats.push(SchemeStats {
            scheme,
            runs: seeds.len(),
            cumulative_cost: metric_stats(&costs),
            avg_bandwidth_prb: metric_stats(&bandwidths),
            qos_success_rate: metric_stats(&successes),
        });
    }
    Ok((reports, stats))
}
