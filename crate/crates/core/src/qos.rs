//! Statistical-QoS analytics over the feasible-state table: per-device
//! effective capacity, effective bandwidth of Poisson traffic, saturation
//! throughput and its gradient, and the constraint-violation bookkeeping
//! used by the optimizer.
//!
//! Exponents are evaluated on per-slot service in bits (rate times slot
//! duration), capacities are computed in bits per slot and reported in
//! bits/s, which keeps effective capacity and effective bandwidth on the
//! same scale.

use crate::access::{state_probability, AccessState, FeasibleStateTable, TrafficSpec};
use crate::util::neumaier_sum;

/// Below this QoS exponent the closed forms switch to their analytic
/// zero-theta limits to avoid catastrophic cancellation.
pub const THETA_FLOOR: f64 = 1e-12;

/// Substitute for an infinite QoS violation so fitness normalization stays
/// finite.
pub const QOS_PENALTY: f64 = 1e12;

/// Per-device outcome of a QoS evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceQos {
    /// Effective capacity, bits/s.
    pub effective_capacity: f64,
    /// Effective bandwidth of the arrival process, bits/s.
    pub effective_bandwidth: f64,
    /// EB / EC; at most 1 when the QoS constraint holds.
    pub slack: f64,
    pub feasible: bool,
}

/// QoS evaluation of every device at one access-probability vector.
#[derive(Debug, Clone, PartialEq)]
pub struct QosEvaluation {
    pub per_device: Vec<DeviceQos>,
}

impl QosEvaluation {
    pub fn all_feasible(&self) -> bool {
        self.per_device.iter().all(|d| d.feasible)
    }
}

/// Per-device constraint violations: QoS shortfall and the two box bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceViolation {
    pub qos: f64,
    pub below_zero: f64,
    pub above_one: f64,
}

/// Sum of all constraint violations; zero exactly on the feasible set.
#[derive(Debug, Clone, PartialEq)]
pub struct ViolationBreakdown {
    pub per_device: Vec<DeviceViolation>,
    pub total: f64,
}

/// Mean service rate of one device, bits/s: the zero-theta limit of its
/// effective capacity.
pub fn mean_service_rate(
    device: usize,
    table: &FeasibleStateTable,
    p: &[f64],
    beta: &[f64],
) -> f64 {
    let n = table.n_devices();
    neumaier_sum(table.states().iter().filter_map(|entry| {
        if (entry.bits() >> device) & 1 == 1 {
            let state = AccessState::from_bits(entry.bits(), n).expect("table state");
            Some(state_probability(&state, p, beta) * entry.rate_of(device))
        } else {
            None
        }
    }))
}

/// Effective capacity of one device, bits/s.
///
/// The service process takes value R_j^i (times the slot duration, in bits)
/// whenever a feasible state with the device active occurs, and zero
/// otherwise. EC is the negative log-MGF of that per-slot service at the
/// device's QoS exponent.
pub fn effective_capacity(
    device: usize,
    table: &FeasibleStateTable,
    p: &[f64],
    beta: &[f64],
    theta: f64,
    slot_duration: f64,
) -> f64 {
    if theta < THETA_FLOOR {
        return mean_service_rate(device, table, p, beta);
    }
    let n = table.n_devices();
    let mut masses: Vec<(f64, f64)> = Vec::new(); // (probability, bits per slot)
    for entry in table.states() {
        if (entry.bits() >> device) & 1 == 1 {
            let state = AccessState::from_bits(entry.bits(), n).expect("table state");
            let pi = state_probability(&state, p, beta);
            masses.push((pi, entry.rate_of(device) * slot_duration));
        }
    }
    let served = neumaier_sum(masses.iter().map(|&(pi, _)| pi));
    let idle = 1.0 - served;
    // S = sum pi * (1 - e^{-theta s}); the MGF argument is 1 - S.
    let s_sum = neumaier_sum(masses.iter().map(|&(pi, s)| pi * (-f64::exp_m1(-theta * s))));
    let any_negative = masses.iter().any(|&(pi, _)| pi < 0.0) || idle < 0.0;
    let ec_per_slot = if s_sum < 0.5 || any_negative {
        // Small-S branch: ln(1 - S) via ln_1p keeps full precision for the
        // near-zero-theta regime.
        if s_sum < 1.0 {
            -f64::ln_1p(-s_sum) / theta
        } else {
            -f64::MIN_POSITIVE.ln() / theta
        }
    } else {
        // Large-S branch: evaluate ln(idle + sum pi e^{-theta s}) in the log
        // domain so deep exponential underflow cannot zero the argument.
        let mut terms: Vec<f64> = masses
            .iter()
            .filter(|&&(pi, _)| pi > 0.0)
            .map(|&(pi, s)| pi.ln() - theta * s)
            .collect();
        if idle > 0.0 {
            terms.push(idle.ln());
        }
        if terms.is_empty() {
            return 0.0;
        }
        let peak = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let log_arg = peak + neumaier_sum(terms.iter().map(|&t| (t - peak).exp())).ln();
        -log_arg / theta
    };
    ec_per_slot / slot_duration
}

/// Effective bandwidth of compound-Poisson arrivals (rate `lambda` packets
/// per slot, fixed `packet_bits` per packet), bits/s. Exponent overflow is
/// reported as infinity: the constraint is then unsatisfiable, not a crash.
pub fn effective_bandwidth_poisson(
    lambda: f64,
    packet_bits: f64,
    theta: f64,
    slot_duration: f64,
) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    if theta < THETA_FLOOR {
        return lambda * packet_bits / slot_duration;
    }
    let x = theta * packet_bits;
    if x > 700.0 {
        return f64::INFINITY;
    }
    lambda * f64::exp_m1(x) / (theta * slot_duration)
}

/// Saturation throughput, bits/s: expected aggregate decoded rate over the
/// feasible access states.
pub fn saturation_throughput(table: &FeasibleStateTable, p: &[f64], beta: &[f64]) -> f64 {
    let n = table.n_devices();
    neumaier_sum(table.states().iter().map(|entry| {
        if entry.total_rate() == 0.0 {
            0.0
        } else {
            let state = AccessState::from_bits(entry.bits(), n).expect("table state");
            state_probability(&state, p, beta) * entry.total_rate()
        }
    }))
}

/// Gradient of the saturation throughput with respect to every access
/// probability. Uses the closed form with leave-one-out state products;
/// the throughput is multilinear in p, so each component is independent of
/// its own coordinate.
pub fn throughput_gradient(table: &FeasibleStateTable, p: &[f64], beta: &[f64]) -> Vec<f64> {
    let n = table.n_devices();
    let mut grad_terms: Vec<Vec<f64>> = vec![Vec::new(); n];
    let mut factors = vec![0.0f64; n];
    let mut prefix = vec![0.0f64; n + 1];
    let mut suffix = vec![0.0f64; n + 1];
    for entry in table.states() {
        if entry.total_rate() == 0.0 {
            continue;
        }
        let bits = entry.bits();
        for (j, f) in factors.iter_mut().enumerate() {
            let q = p[j] * beta[j];
            *f = if (bits >> j) & 1 == 1 { q } else { 1.0 - q };
        }
        prefix[0] = 1.0;
        for j in 0..n {
            prefix[j + 1] = prefix[j] * factors[j];
        }
        suffix[n] = 1.0;
        for j in (0..n).rev() {
            suffix[j] = suffix[j + 1] * factors[j];
        }
        for j in 0..n {
            let leave_one_out = prefix[j] * suffix[j + 1];
            let sign = if (bits >> j) & 1 == 1 { 1.0 } else { -1.0 };
            grad_terms[j].push(sign * beta[j] * entry.total_rate() * leave_one_out);
        }
    }
    grad_terms
        .into_iter()
        .map(|terms| neumaier_sum(terms))
        .collect()
}

/// Evaluate effective capacity, effective bandwidth and slack for every
/// device at the access vector `p`.
pub fn evaluate_qos(
    table: &FeasibleStateTable,
    traffic: &[TrafficSpec],
    p: &[f64],
    slot_duration: f64,
) -> QosEvaluation {
    let beta: Vec<f64> = traffic.iter().map(|t| t.unblocked_probability).collect();
    let per_device = traffic
        .iter()
        .enumerate()
        .map(|(j, spec)| {
            let ec = effective_capacity(j, table, p, &beta, spec.qos_exponent, slot_duration);
            let eb = effective_bandwidth_poisson(
                spec.arrival_rate,
                spec.packet_length_bits,
                spec.qos_exponent,
                slot_duration,
            );
            let slack = if eb == 0.0 {
                0.0
            } else if ec <= 0.0 {
                f64::INFINITY
            } else {
                eb / ec
            };
            DeviceQos {
                effective_capacity: ec,
                effective_bandwidth: eb,
                slack,
                feasible: slack <= 1.0,
            }
        })
        .collect();
    QosEvaluation { per_device }
}

/// Sum of all constraint violations at `p`: per-device QoS shortfalls plus
/// the two box-bound penalties. Zero if and only if every constraint holds.
pub fn constraint_violation(p: &[f64], eval: &QosEvaluation) -> ViolationBreakdown {
    let per_device: Vec<DeviceViolation> = eval
        .per_device
        .iter()
        .zip(p)
        .map(|(dev, &pj)| {
            let qos = if dev.effective_bandwidth == 0.0 {
                0.0
            } else if dev.effective_capacity <= 0.0 {
                QOS_PENALTY
            } else {
                let ratio = dev.effective_bandwidth / dev.effective_capacity - 1.0;
                if ratio.is_finite() {
                    ratio.max(0.0)
                } else {
                    QOS_PENALTY
                }
            };
            DeviceViolation {
                qos,
                below_zero: (-pj).max(0.0),
                above_one: (pj - 1.0).max(0.0),
            }
        })
        .collect();
    let total = neumaier_sum(
        per_device
            .iter()
            .map(|d| d.qos + d.below_zero + d.above_one),
    );
    ViolationBreakdown { per_device, total }
}

/// Steady-state delay-violation probability estimate
/// Pr{D >= d_max} ~ exp(-theta mu d_max), clamped to [0, 1]. The effective
/// rate `mu` is caller-supplied.
pub fn delay_violation_estimate(theta: f64, mu_bits_per_s: f64, d_max_s: f64) -> f64 {
    (-theta * mu_bits_per_s * d_max_s).exp().clamp(0.0, 1.0)
}
