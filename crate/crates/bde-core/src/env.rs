//! Deterministic packet-level simulator of a slice's uplink MAC queueing
//! system.
//!
//! Users emit fixed-size packets on a constant-bitrate clock while their
//! on/off schedule says so. Each slot is simulated in 1 ms ticks: arrivals
//! land first, then the tick's service budget drains the per-user FIFO
//! queues, split max-min fair across the backlogged users at bit
//! granularity, so capacity is never idle while bits are queued. Fully
//! drained packets record a delay of tick-end minus arrival; packets still
//! queued when the slot closes enter the slot's delay statistic at their age
//! so far, so a growing backlog is visible in the QoS value it produces.
//!
//! Per-user channel quality is a clamped Gaussian around a configured base
//! MCS, redrawn once per slot per user from a seeded stream. The service
//! rate of a slot is the capacity-table entry at the rounded average MCS of
//! the users active that slot, which keeps the queue accounting in exact
//! integer bits.
//!
//! The per-PRB capacity table is calibrated, not measured: entries scale a
//! standard spectral-efficiency curve so that a chosen anchor MCS maps to a
//! chosen bits-per-PRB-per-ms value.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::domain::{QosStatistic, RawObservation, BSR_MAX, MCS_MAX};
use crate::error::{Error, Result};
use crate::math;
use crate::rng::RngStream;

/// Traffic and channel profile of one user.
#[derive(Debug, Clone, PartialEq)]
pub struct UserSpec {
    /// Packet size in bytes, > 0.
    pub packet_bytes: u32,
    /// Constant bitrate while on, in bits/s, > 0.
    pub bitrate_bps: u64,
    /// Active intervals in slots, `[start, end)`, ascending, non-overlapping.
    pub on_intervals: Vec<(u64, u64)>,
    /// Center of the per-slot MCS draw, 0..=28.
    pub base_mcs: u8,
    /// Standard deviation of the per-slot MCS draw, >= 0.
    pub mcs_noise_std: f64,
}

impl UserSpec {
    pub fn validate(&self) -> Result<()> {
        if self.packet_bytes == 0 {
            return Err(Error::config("packet_bytes must be > 0"));
        }
        if self.bitrate_bps == 0 {
            return Err(Error::config("bitrate_bps must be > 0"));
        }
        if self.base_mcs > MCS_MAX {
            return Err(Error::config(format!(
                "base_mcs {} above {}",
                self.base_mcs, MCS_MAX
            )));
        }
        if self.mcs_noise_std.is_nan() || self.mcs_noise_std < 0.0 {
            return Err(Error::config("mcs_noise_std must be >= 0"));
        }
        let mut prev_end = 0u64;
        for (i, &(s, e)) in self.on_intervals.iter().enumerate() {
            if s >= e {
                return Err(Error::config(format!(
                    "on interval {i} is empty: ({s}, {e})"
                )));
            }
            if i > 0 && s < prev_end {
                return Err(Error::config("on intervals must be ascending and disjoint"));
            }
            prev_end = e;
        }
        Ok(())
    }

    /// Packet inter-arrival time in microseconds (rounded to nearest).
    pub fn interarrival_us(&self) -> u64 {
        let bits = self.packet_bytes as u128 * 8 * 1_000_000;
        let us = (bits + self.bitrate_bps as u128 / 2) / self.bitrate_bps as u128;
        (us as u64).max(1)
    }

    pub fn on_at(&self, slot: u64) -> bool {
        self.on_intervals
            .iter()
            .any(|&(s, e)| slot >= s && slot < e)
    }
}

/// Bits one PRB carries in one millisecond, per MCS index.
///
/// Entries are nondecreasing in MCS. The default curve follows the LTE
/// single-PRB transport block sizes; `calibrated` rescales it around an
/// anchor point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkCapacityTable {
    bits_per_prb_per_ms: [u32; (MCS_MAX as usize) + 1],
}

/// Single-PRB transport block sizes (bits per subframe) for MCS 0..=28.
const TBS_CURVE: [u32; 29] = [
    16, 24, 32, 40, 56, 72, 88, 104, 120, 136, 144, 144, 176, 208, 224, 256, 280, 328, 336, 376,
    408, 408, 440, 488, 520, 552, 584, 616, 712,
];

impl LinkCapacityTable {
    /// Scale the default curve so `anchor_mcs` maps to `anchor_bits`.
    pub fn calibrated(anchor_mcs: u8, anchor_bits: u32) -> Result<Self> {
        if anchor_mcs > MCS_MAX {
            return Err(Error::config("anchor_mcs above 28"));
        }
        if anchor_bits == 0 {
            return Err(Error::config("anchor_bits must be > 0"));
        }
        let anchor_ref = TBS_CURVE[anchor_mcs as usize] as f64;
        let mut table = [0u32; 29];
        let mut prev = 0u32;
        for (m, entry) in table.iter_mut().enumerate() {
            let scaled = TBS_CURVE[m] as f64 * anchor_bits as f64 / anchor_ref;
            let v = (math::round(scaled) as u32).max(1).max(prev);
            *entry = v;
            prev = v;
        }
        Ok(LinkCapacityTable {
            bits_per_prb_per_ms: table,
        })
    }

    /// Use an explicit table (29 positive, nondecreasing entries).
    pub fn from_entries(entries: &[u32]) -> Result<Self> {
        if entries.len() != 29 {
            return Err(Error::config(format!(
                "capacity table needs 29 entries, got {}",
                entries.len()
            )));
        }
        if entries[0] == 0 {
            return Err(Error::config("capacity entries must be > 0"));
        }
        if entries.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::config("capacity table must be nondecreasing in MCS"));
        }
        let mut table = [0u32; 29];
        table.copy_from_slice(entries);
        Ok(LinkCapacityTable {
            bits_per_prb_per_ms: table,
        })
    }

    pub fn bits_for(&self, mcs: u8) -> u32 {
        self.bits_per_prb_per_ms[(mcs.min(MCS_MAX)) as usize]
    }

    pub fn entries(&self) -> &[u32; 29] {
        &self.bits_per_prb_per_ms
    }
}

/// Max-min fair integer split of `budget` over `demands`.
///
/// Allocates `min(budget, sum(demands))` bits in total; no user gets more
/// than its demand; below the fair level everyone is served fully; leftover
/// bits after the level go one each to the lowest-indexed users still above
/// it.
fn waterfill(demands: &[u64], budget: u64) -> Vec<u64> {
    let total: u64 = demands.iter().sum();
    if total <= budget {
        return demands.to_vec();
    }
    let spend_at = |level: u64| -> u64 { demands.iter().map(|&d| d.min(level)).sum() };
    // Largest level whose spend fits the budget.
    let (mut lo, mut hi) = (0u64, budget);
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        if spend_at(mid) <= budget {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    let level = lo;
    let mut leftover = budget - spend_at(level);
    let mut allocs: Vec<u64> = demands.iter().map(|&d| d.min(level)).collect();
    for (u, &d) in demands.iter().enumerate() {
        if leftover == 0 {
            break;
        }
        if d > level {
            allocs[u] += 1;
            leftover -= 1;
        }
    }
    allocs
}

/// Buffer-status index for a byte count: 0 for an empty buffer, otherwise a
/// logarithmic scale saturating at 63 around 150 kB.
pub fn bsr_index(queued_bytes: u64) -> u8 {
    if queued_bytes == 0 {
        return 0;
    }
    const MIN_BYTES: f64 = 10.0;
    const MAX_BYTES: f64 = 150_000.0;
    let ratio = math::ln(queued_bytes as f64 / MIN_BYTES) / math::ln(MAX_BYTES / MIN_BYTES);
    let idx = 1.0 + libm::floor(62.0 * ratio);
    if idx < 1.0 {
        1
    } else if idx >= BSR_MAX as f64 {
        BSR_MAX
    } else {
        idx as u8
    }
}

/// Simulator configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub users: Vec<UserSpec>,
    pub capacity: LinkCapacityTable,
    pub statistic: QosStatistic,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        for u in &self.users {
            u.validate()?;
        }
        self.statistic.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Packet {
    arrival_us: u64,
    remaining_bits: u64,
}

/// Per-tick accounting, recorded when tracing is enabled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TickTrace {
    /// Queued bits at tick start, before arrivals.
    pub queued_bits_start: u64,
    pub arrival_bits: u64,
    pub delivered_bits: u64,
    /// Service budget of the tick in bits.
    pub budget_bits: u64,
}

/// QoS outcome of one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct QoSFeedback {
    /// Slot delay statistic in ms: max over active users of the per-user
    /// statistic; infinite when a user delivered nothing but stayed backlogged.
    pub q_ms: f64,
    /// Per-user statistic, `None` for users not active this slot.
    pub per_user_ms: Vec<Option<f64>>,
    pub delivered_packets: u64,
    pub delivered_bits: u64,
    /// Per-tick accounting when tracing was enabled.
    pub trace: Option<Vec<TickTrace>>,
}

/// Simulator state for one slice.
#[derive(Debug, Clone)]
pub struct SliceSim {
    config: SimConfig,
    interarrival_us: Vec<u64>,
    slot: u64,
    now_us: u64,
    queues: Vec<VecDeque<Packet>>,
    queued_bits: u64,
    next_arrival_us: Vec<Option<u64>>,
    cur_mcs: Vec<u8>,
    active: Vec<bool>,
    channel: RngStream,
    trace_enabled: bool,
}

impl SliceSim {
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let n = config.users.len();
        let interarrival_us = config.users.iter().map(|u| u.interarrival_us()).collect();
        Ok(SliceSim {
            config,
            interarrival_us,
            slot: 0,
            now_us: 0,
            queues: vec![VecDeque::new(); n],
            queued_bits: 0,
            next_arrival_us: vec![None; n],
            cur_mcs: vec![0; n],
            active: vec![false; n],
            channel: RngStream::seed_from_u64(0),
            trace_enabled: false,
        })
    }

    /// Record per-tick accounting into the next feedbacks.
    pub fn set_trace(&mut self, enabled: bool) {
        self.trace_enabled = enabled;
    }

    /// Clear all queues, reseed the channel stream and return the slot-0
    /// observation. The same seed always yields the same run.
    pub fn reset(&mut self, seed: u64) -> RawObservation {
        let n = self.config.users.len();
        self.slot = 0;
        self.now_us = 0;
        self.queues = vec![VecDeque::new(); n];
        self.queued_bits = 0;
        self.next_arrival_us = vec![None; n];
        self.channel = RngStream::derive(seed, "channel");
        self.draw_mcs();
        self.enter_slot();
        self.observe()
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    pub fn queued_bytes(&self) -> u64 {
        self.queued_bits.div_ceil(8)
    }

    fn draw_mcs(&mut self) {
        for (i, user) in self.config.users.iter().enumerate() {
            let noisy = user.base_mcs as f64 + self.channel.gaussian() * user.mcs_noise_std;
            self.cur_mcs[i] = math::round(noisy).clamp(0.0, MCS_MAX as f64) as u8;
        }
    }

    /// Recompute activity and arrival clocks for the current slot.
    fn enter_slot(&mut self) {
        for i in 0..self.config.users.len() {
            let on = self.config.users[i].on_at(self.slot);
            self.active[i] = on || !self.queues[i].is_empty();
            if on {
                if self.next_arrival_us[i].is_none() {
                    self.next_arrival_us[i] = Some(self.now_us);
                }
            } else {
                self.next_arrival_us[i] = None;
            }
        }
    }

    fn observe(&self) -> RawObservation {
        let active: Vec<usize> = (0..self.active.len()).filter(|&i| self.active[i]).collect();
        let avg_mcs = if active.is_empty() {
            0.0
        } else {
            active.iter().map(|&i| self.cur_mcs[i] as f64).sum::<f64>() / active.len() as f64
        };
        let queued_bytes = self.queued_bytes();
        RawObservation {
            active_users: active.len() as u32,
            avg_mcs,
            queue_level: bsr_index(queued_bytes),
            queued_bytes,
        }
    }

    /// Service rate of the current slot in bits per PRB per ms.
    fn slot_rate(&self) -> u32 {
        let active: Vec<usize> = (0..self.active.len()).filter(|&i| self.active[i]).collect();
        if active.is_empty() {
            return 0;
        }
        let avg = active.iter().map(|&i| self.cur_mcs[i] as f64).sum::<f64>() / active.len() as f64;
        self.config.capacity.bits_for(math::round(avg) as u8)
    }

    /// Simulate one slot with `w` PRBs and return the QoS feedback for it and
    /// the observation opening the next slot.
    pub fn step(&mut self, w: u16, slot_length_s: f64) -> Result<(QoSFeedback, RawObservation)> {
        if w == 0 || w > 100 {
            return Err(Error::parameter(
                "w",
                format!("PRBs must be 1..=100, got {w}"),
            ));
        }
        if !slot_length_s.is_finite() || slot_length_s <= 0.0 {
            return Err(Error::parameter(
                "slot_length_s",
                "must be positive and finite",
            ));
        }
        let ticks = (math::round(slot_length_s * 1000.0) as u64).max(1);
        let n = self.config.users.len();
        let slot_active = self.active.clone();
        let rate = self.slot_rate() as u64;
        let budget_per_tick = w as u64 * rate;

        let mut delivered: Vec<Vec<u64>> = vec![Vec::new(); n];
        let mut delivered_packets = 0u64;
        let mut delivered_bits_total = 0u64;
        let mut trace = self
            .trace_enabled
            .then(|| Vec::with_capacity(ticks as usize));

        for k in 0..ticks {
            let tick_start = self.now_us + k * 1000;
            let tick_end = tick_start + 1000;
            let queued_bits_start = self.queued_bits;

            // Arrivals: every constant-bitrate clock firing inside this tick.
            let mut arrival_bits = 0u64;
            for i in 0..n {
                let bits = self.config.users[i].packet_bytes as u64 * 8;
                while let Some(t) = self.next_arrival_us[i] {
                    if t >= tick_end {
                        break;
                    }
                    self.queues[i].push_back(Packet {
                        arrival_us: t,
                        remaining_bits: bits,
                    });
                    self.queued_bits += bits;
                    arrival_bits += bits;
                    self.next_arrival_us[i] = Some(t + self.interarrival_us[i]);
                }
            }

            // Service: the tick budget is split max-min fair across the
            // backlogged users (integer water-filling, leftover bits to the
            // lowest user indices), FIFO within each user. The split spends
            // min(budget, queued) bits exactly, and each user's cumulative
            // service is monotone in the budget, which makes the QoS outcome
            // monotone in the allocated bandwidth under common randomness.
            let mut tick_delivered = 0u64;
            if self.queued_bits > 0 && budget_per_tick > 0 {
                let demands: Vec<u64> = self
                    .queues
                    .iter()
                    .map(|q| q.iter().map(|p| p.remaining_bits).sum())
                    .collect();
                let allocs = waterfill(&demands, budget_per_tick);
                for u in 0..n {
                    let mut alloc = allocs[u];
                    tick_delivered += alloc;
                    self.queued_bits -= alloc;
                    while alloc > 0 {
                        let head = self.queues[u].front_mut().expect("alloc within demand");
                        let take = head.remaining_bits.min(alloc);
                        head.remaining_bits -= take;
                        alloc -= take;
                        if head.remaining_bits == 0 {
                            let arrival = head.arrival_us;
                            self.queues[u].pop_front();
                            delivered[u].push(tick_end - arrival);
                            delivered_packets += 1;
                        }
                    }
                }
            }
            delivered_bits_total += tick_delivered;

            if let Some(tr) = trace.as_mut() {
                tr.push(TickTrace {
                    queued_bits_start,
                    arrival_bits,
                    delivered_bits: tick_delivered,
                    budget_bits: budget_per_tick,
                });
            }
        }

        self.now_us += ticks * 1000;

        // Per-user statistic over this slot's packet delays. Packets still
        // queued at slot end contribute their age so far: the measured
        // population is then every packet the user had in flight this slot,
        // which (unlike delivered-only delays) is monotone in the allocated
        // bandwidth under common random numbers. A user that delivered
        // nothing counts 0 when drained, infinite when starved.
        let slot_end_us = self.now_us;
        let mut per_user_ms: Vec<Option<f64>> = vec![None; n];
        let mut q_ms = 0.0f64;
        for i in 0..n {
            if !slot_active[i] {
                continue;
            }
            let value = if delivered[i].is_empty() {
                if self.queues[i].is_empty() {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                delivered[i].extend(self.queues[i].iter().map(|p| slot_end_us - p.arrival_us));
                statistic_ms(&mut delivered[i], self.config.statistic)
            };
            per_user_ms[i] = Some(value);
            if value > q_ms {
                q_ms = value;
            }
        }

        // Open the next slot.
        self.slot += 1;
        self.draw_mcs();
        self.enter_slot();

        Ok((
            QoSFeedback {
                q_ms,
                per_user_ms,
                delivered_packets,
                delivered_bits: delivered_bits_total,
                trace,
            },
            self.observe(),
        ))
    }
}

fn statistic_ms(delays_us: &mut [u64], statistic: QosStatistic) -> f64 {
    match statistic {
        QosStatistic::PerUserMean => {
            let sum: u64 = delays_us.iter().sum();
            sum as f64 / delays_us.len() as f64 / 1000.0
        }
        QosStatistic::PerUserQuantile(p) => {
            delays_us.sort_unstable();
            let n = delays_us.len();
            let rank = libm::ceil(p * n as f64) as usize;
            delays_us[rank.clamp(1, n) - 1] as f64 / 1000.0
        }
    }
}
