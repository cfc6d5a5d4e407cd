//! Per-slot rows, their aggregates and the CSV formats.
//!
//! Aggregates are always recomputed from the rows by one code path, so the
//! summary a run prints and the numbers a reader derives from the CSV cannot
//! diverge.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use bde_core::baselines::SchemeId;
use bde_core::SlotRecord;

/// One CSV row: raw and bucketed state, the action and its outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotRow {
    pub slot: u64,
    pub active_users: u32,
    pub x1: usize,
    pub avg_mcs: f64,
    pub x2: usize,
    pub queue_level: u8,
    pub x3: usize,
    pub action_prb: u16,
    pub q_ms: f64,
    pub violated: bool,
    pub cost: f64,
}

impl SlotRow {
    pub fn from_record(record: &SlotRecord) -> Self {
        SlotRow {
            slot: record.slot,
            active_users: record.obs.active_users,
            x1: record.state.x1,
            avg_mcs: record.obs.avg_mcs,
            x2: record.state.x2,
            queue_level: record.obs.queue_level,
            x3: record.state.x3,
            action_prb: record.action,
            q_ms: record.q_ms,
            violated: record.violated,
            cost: record.cost,
        }
    }
}

/// Whole-run aggregates, derived from the rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregates {
    pub slots: u64,
    pub cumulative_cost: f64,
    pub avg_bandwidth_prb: f64,
    pub qos_success_rate: f64,
    pub violations: u64,
    pub per_x1: Vec<X1Aggregate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct X1Aggregate {
    pub x1: usize,
    pub slots: u64,
    pub cumulative_cost: f64,
    pub avg_bandwidth_prb: f64,
    pub qos_success_rate: f64,
}

impl Aggregates {
    pub fn from_rows(rows: &[SlotRow]) -> Self {
        let slots = rows.len() as u64;
        let mut cumulative_cost = 0.0;
        let mut bandwidth = 0u64;
        let mut violations = 0u64;
        let mut groups: BTreeMap<usize, (u64, f64, u64, u64)> = BTreeMap::new();
        for row in rows {
            cumulative_cost += row.cost;
            bandwidth += row.action_prb as u64;
            violations += row.violated as u64;
            let g = groups.entry(row.x1).or_insert((0, 0.0, 0, 0));
            g.0 += 1;
            g.1 += row.cost;
            g.2 += row.action_prb as u64;
            g.3 += row.violated as u64;
        }
        let per_x1 = groups
            .into_iter()
            .map(|(x1, (n, cost, bw, viol))| X1Aggregate {
                x1,
                slots: n,
                cumulative_cost: cost,
                avg_bandwidth_prb: bw as f64 / n as f64,
                qos_success_rate: (n - viol) as f64 / n as f64,
            })
            .collect();
        Aggregates {
            slots,
            cumulative_cost,
            avg_bandwidth_prb: if slots == 0 {
                0.0
            } else {
                bandwidth as f64 / slots as f64
            },
            qos_success_rate: if slots == 0 {
                1.0
            } else {
                (slots - violations) as f64 / slots as f64
            },
            violations,
            per_x1,
        }
    }
}

/// A finished closed-loop run.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub scheme: SchemeId,
    pub seed: u64,
    pub rows: Vec<SlotRow>,
    pub aggregates: Aggregates,
    /// Provenance note for the capacity numbers; printed, never in the CSV.
    pub capacity_note: String,
}

impl RunReport {
    pub fn new(scheme: SchemeId, seed: u64, rows: Vec<SlotRow>, capacity_note: String) -> Self {
        let aggregates = Aggregates::from_rows(&rows);
        RunReport {
            scheme,
            seed,
            rows,
            aggregates,
            capacity_note,
        }
    }

    /// Average allocated bandwidth over the last `n` slots.
    pub fn tail_avg_bandwidth(&self, n: usize) -> f64 {
        let tail = &self.rows[self.rows.len().saturating_sub(n)..];
        if tail.is_empty() {
            return 0.0;
        }
        tail.iter().map(|r| r.action_prb as u64).sum::<u64>() as f64 / tail.len() as f64
    }

    /// QoS success fraction over the last `n` slots.
    pub fn tail_success_rate(&self, n: usize) -> f64 {
        let tail = &self.rows[self.rows.len().saturating_sub(n)..];
        if tail.is_empty() {
            return 1.0;
        }
        tail.iter().filter(|r| !r.violated).count() as f64 / tail.len() as f64
    }
}

pub const RUN_CSV_HEADER: &str =
    "slot,active_users,x1,avg_mcs,x2,queue_level,x3,action_prb,q_ms,violated,cost";

/// Per-slot CSV (UTF-8, header row). Booleans print as 0/1, an infinite
/// delay statistic prints as `inf`.
pub fn run_csv(report: &RunReport) -> String {
    let mut out = String::with_capacity(64 * (report.rows.len() + 1));
    out.push_str(RUN_CSV_HEADER);
    out.push('\n');
    for r in &report.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.slot,
            r.active_users,
            r.x1,
            r.avg_mcs,
            r.x2,
            r.queue_level,
            r.x3,
            r.action_prb,
            r.q_ms,
            r.violated as u8,
            r.cost
        )
        .expect("writing to a String cannot fail");
    }
    out
}

/// Mean and standard deviation of one run metric across seeds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricStats {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single run.
    pub std: f64,
}

pub fn metric_stats(values: &[f64]) -> MetricStats {
    let n = values.len();
    if n == 0 {
        return MetricStats {
            mean: 0.0,
            std: 0.0,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return MetricStats { mean, std: 0.0 };
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
    MetricStats {
        mean,
        std: var.sqrt(),
    }
}

/// Per-scheme aggregate over a set of seeds.
#[derive(Debug, Clone)]
pub struct SchemeStats {
    pub scheme: SchemeId,
    pub runs: usize,
    pub cumulative_cost: MetricStats,
    pub avg_bandwidth_prb: MetricStats,
    pub qos_success_rate: MetricStats,
}

pub const SUMMARY_CSV_HEADER: &str = "scheme,runs,mean_cumulative_cost,std_cumulative_cost,\
mean_avg_bandwidth_prb,std_avg_bandwidth_prb,mean_qos_success_rate,std_qos_success_rate";

pub fn summary_csv(stats: &[SchemeStats]) -> String {
    let mut out = String::new();
    out.push_str(SUMMARY_CSV_HEADER);
    out.push('\n');
    for s in stats {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            s.scheme.as_str(),
            s.runs,
            s.cumulative_cost.mean,
            s.cumulative_cost.std,
            s.avg_bandwidth_prb.mean,
            s.avg_bandwidth_prb.std,
            s.qos_success_rate.mean,
            s.qos_success_rate.std
        )
        .expect("writing to a String cannot fail");
    }
    out
}
