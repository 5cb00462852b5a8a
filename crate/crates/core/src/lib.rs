//! End-to-end model of a multi-packet-reception (MPR) random-access VLC uplink.
//!
//! A coordinator with `M` photo-detectors serves `N` LED devices that access a
//! shared slotted channel ALOHA-style, each with probability `p_j`. The
//! coordinator decodes up to `M` simultaneous transmissions with successive
//! interference cancellation (SIC). This crate provides:
//!
//! * [`channel`] — Lambertian LOS channel gains and receiver noise.
//! * [`sic`] — per-layer ZF/MMSE SINRs and Shannon rates under SIC.
//! * [`access`] — feasible access states, their probabilities, and the
//!   precomputed per-state rate table every analysis reuses.
//! * [`qos`] — effective capacity / effective bandwidth, saturation
//!   throughput, its gradient, and constraint-violation bookkeeping.
//! * [`optimizer`] — the IWO-DE memetic search for the throughput-optimal
//!   access-probability vector under per-device statistical delay constraints.
//! * [`simulator`] — a slot-level Monte Carlo engine validating the analytics.
//! * [`scenario`] — TOML scenario files tying everything together.

pub mod access;
pub mod channel;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod optimizer;
pub mod qos;
pub mod rng;
pub mod scenario;
pub mod sic;
pub mod simulator;
pub mod util;

pub use access::{
    build_rate_table, enumerate_feasible, rate_distribution, state_probability, AccessState,
    AccessVector, FeasibleStateTable, StateEntry, TrafficSpec,
};
pub use channel::{
    channel_matrix, concentrator_gain, lambertian_order, los_gain, noise_components,
    noise_variance, received_optical_power, ChannelMatrix, NoiseComponents, NoiseConfig,
    NoisePowerMode, OpticsConfig,
};
pub use error::{Error, Result};
pub use geometry::{Geometry, Point3, RoomDims};
pub use optimizer::{
    optimize, Candidate, GenerationRecord, ObjectiveContext, OptimizeOutcome, OptimizerParams,
};
pub use qos::{
    constraint_violation, delay_violation_estimate, effective_bandwidth_poisson,
    effective_capacity, evaluate_qos, saturation_throughput, throughput_gradient, QosEvaluation,
    ViolationBreakdown,
};
pub use scenario::Scenario;
pub use sic::{decode_order, layer_rates, mmse_sinr, zf_sinr, DecodeOrder, FilterKind, LayerSinrs, ZfNoiseMode};
pub use simulator::{empirical_ec, run_slots, SimConfig, SimResult};
