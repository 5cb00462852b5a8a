//! Slot-level Monte Carlo engine.
//!
//! Each slot every device independently transmits with its access
//! probability and is unblocked with its blocking probability; the resulting
//! state's rates come from the precomputed table (zero for infeasible
//! states), so the simulator and the analytics share one PHY truth. Slot
//! randomness is counter-addressed: partitioning the slot range produces
//! bit-identical results to a single pass.

use std::collections::BTreeMap;

use crate::access::{FeasibleStateTable, TrafficSpec};
use crate::rng::indexed_unit;
use crate::util::neumaier_sum;

/// Monte Carlo run parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_slots: u64,
    pub seed: u64,
    /// Slot duration in seconds.
    pub slot_duration: f64,
    /// Retain every per-slot service sample (bits) per device. Off by
    /// default; summary statistics need only the state histogram.
    pub retain_samples: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_slots: 500_000,
            seed: 0,
            slot_duration: 5e-4,
            retain_samples: false,
        }
    }
}

/// Per-device empirical statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceSimStats {
    /// Plug-in effective-capacity estimate, bits/s.
    pub empirical_ec: f64,
    /// Empirical mean service rate, bits/s.
    pub empirical_mean_rate: f64,
}

/// Outcome of a Monte Carlo run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub per_device: Vec<DeviceSimStats>,
    /// Sum of the per-device empirical mean rates, bits/s.
    pub empirical_throughput: f64,
    /// Occurrences of every drawn transmit/unblocked state, keyed by packed
    /// bits. Includes infeasible states (which serve nobody).
    pub state_counts: BTreeMap<u32, u64>,
    pub n_slots: u64,
    /// Per-device per-slot service samples in bits, when retention is on.
    pub retained_samples: Option<Vec<Vec<f64>>>,
}

const TRANSMIT_TAG: u64 = 0x5157;
const BLOCK_TAG: u64 = 0xB10C;

/// Draw the packed state of one slot.
fn draw_state(seed: u64, slot: u64, p: &[f64], beta: &[f64]) -> u32 {
    let mut bits = 0u32;
    for j in 0..p.len() {
        let transmit = indexed_unit(seed, &[TRANSMIT_TAG, slot, j as u64]) < p[j];
        if !transmit {
            continue;
        }
        let unblocked = indexed_unit(seed, &[BLOCK_TAG, slot, j as u64]) < beta[j];
        if unblocked {
            bits |= 1 << j;
        }
    }
    bits
}

/// Histogram of drawn states over a slot range. Partitions of [0, n) merge
/// to exactly the full-range histogram because draws are counter-addressed.
pub fn state_histogram(
    seed: u64,
    slots: std::ops::Range<u64>,
    p: &[f64],
    beta: &[f64],
) -> BTreeMap<u32, u64> {
    let mut counts = BTreeMap::new();
    for slot in slots {
        *counts.entry(draw_state(seed, slot, p, beta)).or_insert(0) += 1;
    }
    counts
}

/// Run the slot simulation and reduce to per-device statistics.
pub fn run_slots(
    table: &FeasibleStateTable,
    traffic: &[TrafficSpec],
    p: &[f64],
    cfg: &SimConfig,
) -> SimResult {
    let n = table.n_devices();
    assert_eq!(p.len(), n, "access vector length mismatch");
    assert_eq!(traffic.len(), n, "traffic spec length mismatch");
    assert!(cfg.n_slots >= 1, "need at least one slot");
    let beta: Vec<f64> = traffic.iter().map(|t| t.unblocked_probability).collect();

    let state_counts = state_histogram(cfg.seed, 0..cfg.n_slots, p, &beta);

    // Rate lookup by packed bits; infeasible states are absent and serve
    // nobody.
    let rate_of = |bits: u32, device: usize| -> f64 {
        match table.states().binary_search_by(|e| e.bits().cmp(&bits)) {
            Ok(idx) => table.states()[idx].rate_of(device),
            Err(_) => 0.0,
        }
    };

    let retained = cfg.retain_samples.then(|| {
        let mut samples = vec![Vec::with_capacity(cfg.n_slots as usize); n];
        for slot in 0..cfg.n_slots {
            let bits = draw_state(cfg.seed, slot, p, &beta);
            for (j, device_samples) in samples.iter_mut().enumerate() {
                device_samples.push(rate_of(bits, j) * cfg.slot_duration);
            }
        }
        samples
    });

    let per_device: Vec<DeviceSimStats> = (0..n)
        .map(|j| {
            // Weighted service-value histogram from the state counts.
            let weighted: Vec<(f64, u64)> = state_counts
                .iter()
                .map(|(&bits, &count)| (rate_of(bits, j) * cfg.slot_duration, count))
                .collect();
            let theta = traffic[j].qos_exponent;
            let empirical_ec =
                empirical_ec_weighted(&weighted, cfg.n_slots, theta, cfg.slot_duration);
            let mean_bits = neumaier_sum(
                weighted
                    .iter()
                    .map(|&(s, c)| s * c as f64),
            ) / cfg.n_slots as f64;
            DeviceSimStats {
                empirical_ec,
                empirical_mean_rate: mean_bits / cfg.slot_duration,
            }
        })
        .collect();

    let empirical_throughput =
        neumaier_sum(per_device.iter().map(|d| d.empirical_mean_rate));

    SimResult {
        per_device,
        empirical_throughput,
        state_counts,
        n_slots: cfg.n_slots,
        retained_samples: retained,
    }
}

/// Plug-in effective-capacity estimator from raw per-slot service samples
/// (bits). The log-MGF is evaluated with a max shift so constant samples
/// reproduce their rate exactly and deep underflow cannot zero the mean.
pub fn empirical_ec(samples: &[f64], theta: f64, slot_duration: f64) -> f64 {
    assert!(!samples.is_empty(), "need at least one sample");
    if theta < crate::qos::THETA_FLOOR {
        return neumaier_sum(samples.iter().copied()) / samples.len() as f64 / slot_duration;
    }
    let peak = samples
        .iter()
        .map(|&s| -theta * s)
        .fold(f64::NEG_INFINITY, f64::max);
    let total = neumaier_sum(samples.iter().map(|&s| (-theta * s - peak).exp()));
    let log_mean = peak + (total / samples.len() as f64).ln();
    -log_mean / theta / slot_duration
}

/// Weighted variant over (service bits, occurrence count) pairs.
pub fn empirical_ec_weighted(
    weighted: &[(f64, u64)],
    n_slots: u64,
    theta: f64,
    slot_duration: f64,
) -> f64 {
    assert!(n_slots >= 1);
    if theta < crate::qos::THETA_FLOOR {
        let mean =
            neumaier_sum(weighted.iter().map(|&(s, c)| s * c as f64)) / n_slots as f64;
        return mean / slot_duration;
    }
    let peak = weighted
        .iter()
        .filter(|&&(_, c)| c > 0)
        .map(|&(s, _)| -theta * s)
        .fold(f64::NEG_INFINITY, f64::max);
    let total = neumaier_sum(
        weighted
            .iter()
            .map(|&(s, c)| c as f64 * (-theta * s - peak).exp()),
    );
    let log_mean = peak + (total / n_slots as f64).ln();
    -log_mean / theta / slot_duration
}
