//! Scenario files: a versioned JSON document describing the users, the QoS
//! target, the capacity calibration and the controller parameters.
//!
//! Unknown keys are rejected so a typo cannot silently change a run.

use std::fs;
use std::path::Path;

use serde::Deserialize;

use bde_core::bandit::DEFAULT_UCB_COEFF;
use bde_core::{
    ActionSet, BdeConfig, BucketEdges, CostParams, LinkCapacityTable, QosStatistic, SimConfig,
    StateBuckets, UserSpec, ViParams, Warmup,
};

use crate::error::{HarnessError, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    /// Total slots to simulate, >= 1.
    pub slots: u64,
    /// Slot length in seconds of simulated time.
    pub slot_length_s: f64,
    /// Master seed; the CLI may override it.
    pub seed: u64,
    pub users: Vec<UserConfig>,
    pub qos: QosConfig,
    #[serde(default)]
    pub capacity: CapacityConfig,
    pub bde: BdeSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserConfig {
    pub packet_bytes: u32,
    pub bitrate_bps: u64,
    pub base_mcs: u8,
    #[serde(default)]
    pub mcs_noise_std: f64,
    /// Active intervals in slots, `[start, end)`.
    pub on_slots: Vec<[u64; 2]>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QosConfig {
    pub statistic: StatisticSpec,
    pub qc_ms: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatisticSpec {
    Mean,
    Quantile(f64),
}

impl StatisticSpec {
    pub fn to_core(self) -> QosStatistic {
        match self {
            StatisticSpec::Mean => QosStatistic::PerUserMean,
            StatisticSpec::Quantile(p) => QosStatistic::PerUserQuantile(p),
        }
    }
}

/// Either an anchor calibration or an explicit 29-entry table.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacityConfig {
    #[serde(default)]
    pub anchor_mcs: Option<u8>,
    #[serde(default)]
    pub anchor_bits_per_prb_ms: Option<u32>,
    #[serde(default)]
    pub table: Option<Vec<u32>>,
}

impl Default for CapacityConfig {
    fn default() -> Self {
        CapacityConfig {
            anchor_mcs: Some(16),
            anchor_bits_per_prb_ms: Some(410),
            table: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BdeSection {
    /// Warmup slots per user bucket.
    pub t0: u64,
    /// Slots per planning episode.
    pub t: u64,
    pub epsilon: f64,
    pub user_buckets: Vec<f64>,
    pub mcs_buckets: Vec<f64>,
    pub queue_buckets: Vec<f64>,
    pub actions: Vec<u16>,
    pub alpha: f64,
    pub gamma: f64,
    /// Violation penalty override; defaults to `(w_max - w_min) / alpha`.
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub vi_stop_threshold: Option<f64>,
    #[serde(default)]
    pub vi_max_iters: Option<u32>,
    #[serde(default)]
    pub ucb_coeff: Option<f64>,
}

impl ScenarioConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| HarnessError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let config: ScenarioConfig =
            serde_json::from_str(&text).map_err(|source| HarnessError::Parse {
                path: path.to_path_buf(),
                source,
            })?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let config: ScenarioConfig =
            serde_json::from_str(text).map_err(|source| HarnessError::Parse {
                path: "<inline>".into(),
                source,
            })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(HarnessError::config(format!(
                "schema_version {} unsupported, expected {SCHEMA_VERSION}",
                self.schema_version
            )));
        }
        if self.slots == 0 {
            return Err(HarnessError::config("slots must be >= 1"));
        }
        if !self.slot_length_s.is_finite() || self.slot_length_s <= 0.0 {
            return Err(HarnessError::config("slot_length_s must be positive"));
        }
        // Building the component configurations runs their validations.
        self.sim_config()?;
        self.bde_config(Warmup::Slots(self.bde.t0))?;
        Ok(())
    }

    pub fn capacity_table(&self) -> Result<LinkCapacityTable> {
        let cap = &self.capacity;
        match (&cap.table, cap.anchor_mcs, cap.anchor_bits_per_prb_ms) {
            (Some(entries), None, None) => Ok(LinkCapacityTable::from_entries(entries)?),
            (None, Some(mcs), Some(bits)) => Ok(LinkCapacityTable::calibrated(mcs, bits)?),
            _ => Err(HarnessError::config(
                "capacity needs either `table` or both `anchor_mcs` and `anchor_bits_per_prb_ms`",
            )),
        }
    }

    /// Human-readable provenance of the capacity numbers for reports.
    pub fn capacity_note(&self) -> String {
        match (&self.capacity.table, self.capacity.anchor_mcs) {
            (Some(_), _) => "capacity table: explicit entries from the scenario file (calibrated, not measured)".into(),
            (None, Some(mcs)) => format!(
                "capacity table: calibrated around MCS {mcs} = {} bits/PRB/ms (not measured on hardware)",
                self.capacity.anchor_bits_per_prb_ms.unwrap_or(0)
            ),
            _ => "capacity table: invalid".into(),
        }
    }

    pub fn sim_config(&self) -> Result<SimConfig> {
        let users = self
            .users
            .iter()
            .map(|u| UserSpec {
                packet_bytes: u.packet_bytes,
                bitrate_bps: u.bitrate_bps,
                on_intervals: u.on_slots.iter().map(|w| (w[0], w[1])).collect(),
                base_mcs: u.base_mcs,
                mcs_noise_std: u.mcs_noise_std,
            })
            .collect();
        let config = SimConfig {
            users,
            capacity: self.capacity_table()?,
            statistic: self.qos.statistic.to_core(),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn bde_config(&self, warmup: Warmup) -> Result<BdeConfig> {
        let b = &self.bde;
        let actions = ActionSet::new(b.actions.clone())?;
        let mut cost = CostParams::with_lambda_rule(
            &actions,
            b.alpha,
            self.qos.qc_ms,
            b.gamma,
            self.qos.statistic.to_core(),
        )?;
        if let Some(lambda) = b.lambda {
            cost.lambda = lambda;
            cost = cost.validated()?;
        }
        let buckets = StateBuckets::new(
            BucketEdges::new(b.user_buckets.clone())?,
            BucketEdges::new(b.mcs_buckets.clone())?,
            BucketEdges::new(b.queue_buckets.clone())?,
        );
        let defaults = ViParams::default();
        let config = BdeConfig {
            buckets,
            actions,
            cost,
            warmup,
            episode_slots: b.t,
            epsilon: b.epsilon,
            vi: ViParams {
                stop_threshold: b.vi_stop_threshold.unwrap_or(defaults.stop_threshold),
                max_iters: b.vi_max_iters.unwrap_or(defaults.max_iters),
            },
            ucb_coeff: b.ucb_coeff.unwrap_or(DEFAULT_UCB_COEFF),
        };
        config.validate()?;
        Ok(config)
    }
}
