//! Acceptance suite: one test per release criterion, each printing a
//! PASS line (visible with `--nocapture`). Every tolerance is pinned here.
//!
//! Run with: cargo test -p vlcra-core --test acceptance -- --nocapture

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use vlcra_core::access::{build_rate_table, AccessState};
use vlcra_core::channel::{
    channel_matrix, noise_variance, received_optical_power, ChannelMatrix, NoiseConfig,
    NoisePowerMode, OpticsConfig,
};
use vlcra_core::geometry::{pd_array, Geometry, Point3, RoomDims};
use vlcra_core::linalg::norm2;
use vlcra_core::optimizer::{
    competitive_exclusion, de_crossover, de_mutant, de_select, dispersion_std, offspring_count,
    optimize, pareto_dominates, Candidate, ObjectiveContext, OptimizerParams,
};
use vlcra_core::qos::{effective_capacity, saturation_throughput, throughput_gradient};
use vlcra_core::rng::stream;
use vlcra_core::sic::{decode_order, mmse_sinr, zf_sinr, FilterKind, ZfNoiseMode};
use vlcra_core::simulator::{run_slots, SimConfig};
use vlcra_core::{Scenario, TrafficSpec};

const SLOT: f64 = 5e-4;

fn paper_optics() -> OpticsConfig {
    OpticsConfig {
        semi_angle_half_power_deg: 70.0,
        fov_deg: 70.0,
        detector_area_m2: 1e-4,
        optical_filter_gain: 0.53,
        refractive_index: 1.5,
        responsivity: 0.97,
        tx_power_w: 0.1,
        bandwidth_hz: 20e6,
    }
}

fn scenario_toml(
    m: usize,
    placement_seed: u64,
    betas: &[f64],
    lambdas: &[f64],
    thetas: &[f64],
) -> String {
    let join = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x:?}"))
            .collect::<Vec<_>>()
            .join(", ")
    };
    format!(
        "[coordinator]\npd_count = {m}\n\n[devices]\ncount = {n}\nplacement_seed = {placement_seed}\n\n\
         [traffic]\nunblocked_probabilities = [{b}]\narrival_rates = [{l}]\nqos_exponents = [{t}]\n",
        n = betas.len(),
        b = join(betas),
        l = join(lambdas),
        t = join(thetas),
    )
}

/// Three devices near the room centre so all see comparable strong gains.
fn three_device_scenario(lambda: f64, theta: f64, beta: f64) -> Scenario {
    let toml = format!(
        "[devices]\npositions = [[4.5, 9.5, 0.85], [5.5, 10.5, 0.85], [5.0, 9.0, 0.85]]\n\n\
         [traffic]\nunblocked_probability = {beta:?}\narrival_rate_packets_per_slot = {lambda:?}\nqos_exponent = {theta:?}\n",
    );
    Scenario::from_toml_str(&toml).unwrap()
}

/// Brute-force throughput over every subset of devices by explicit loops.
fn brute_force_eta(
    table: &vlcra_core::FeasibleStateTable,
    p: &[f64],
    beta: &[f64],
    mpr: usize,
) -> f64 {
    let n = p.len();
    let mut eta = 0.0;
    for bits in 0..(1u32 << n) {
        let mut prob = 1.0;
        for j in 0..n {
            let q = p[j] * beta[j];
            prob *= if (bits >> j) & 1 == 1 { q } else { 1.0 - q };
        }
        if bits.count_ones() as usize > mpr {
            continue; // infeasible states decode nothing
        }
        let mut rate = 0.0;
        for j in 0..n {
            if (bits >> j) & 1 == 1 {
                rate += table
                    .states()
                    .iter()
                    .find(|e| e.bits() == bits)
                    .unwrap()
                    .rate_of(j);
            }
        }
        eta += prob * rate;
    }
    eta
}

// ---------------------------------------------------------------------------
// 1. EC validation against Monte Carlo at 5e5 slots
// ---------------------------------------------------------------------------
#[test]
fn acceptance_1_ec_validation_monte_carlo() {
    for k in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(4100 + k);
        let n = 10;
        let betas: Vec<f64> = (0..n).map(|_| rng.random_range(0.7..1.0)).collect();
        let lambdas = vec![0.01; n];
        // QoS exponents log-uniform across the full allowed range.
        let thetas: Vec<f64> = (0..n)
            .map(|_| 10f64.powf(rng.random_range(-10.0..0.0)))
            .collect();
        let p: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();

        let scenario =
            Scenario::from_toml_str(&scenario_toml(2, 700 + k, &betas, &lambdas, &thetas))
                .unwrap();
        let table = scenario.build_table().unwrap();
        let cfg = SimConfig {
            n_slots: 500_000,
            seed: 900 + k,
            slot_duration: SLOT,
            retain_samples: false,
        };
        let started = std::time::Instant::now();
        let sim = run_slots(&table, scenario.traffic(), &p, &cfg);
        let elapsed = started.elapsed();
        assert!(
            elapsed.as_secs() < 60,
            "scenario {k} simulation took {elapsed:?}"
        );

        for j in 0..n {
            let analytic = effective_capacity(j, &table, &p, &betas, thetas[j], SLOT);
            if analytic <= 1.0 {
                continue;
            }
            let empirical = sim.per_device[j].empirical_ec;
            let rel = (empirical - analytic).abs() / analytic;
            assert!(
                rel <= 0.10,
                "scenario {k} device {j}: analytic {analytic:.4} vs empirical {empirical:.4} (rel {rel:.4})"
            );
        }

        // Aggregate throughput agrees within 2% at this slot count.
        let analytic_eta = saturation_throughput(&table, &p, &betas);
        let rel = (sim.empirical_throughput - analytic_eta).abs() / analytic_eta;
        assert!(
            rel <= 0.02,
            "scenario {k}: throughput {analytic_eta} vs empirical {} (rel {rel:.4})",
            sim.empirical_throughput
        );
    }
    println!("ACCEPTANCE 1 (EC vs Monte Carlo at 10% rel, throughput at 2% rel, 5 scenarios): PASS");
}

// ---------------------------------------------------------------------------
// 2. EC monotonicity in theta and in the MPR capability
// ---------------------------------------------------------------------------
#[test]
fn acceptance_2_ec_monotonicity() {
    let n = 10;
    let betas = vec![0.9; n];
    let lambdas = vec![0.01; n];
    let thetas = vec![1e-8; n];
    let s2 = Scenario::from_toml_str(&scenario_toml(2, 11, &betas, &lambdas, &thetas)).unwrap();
    let s4 = Scenario::from_toml_str(&scenario_toml(4, 11, &betas, &lambdas, &thetas)).unwrap();
    let t2 = s2.build_table().unwrap();
    let t4 = s4.build_table().unwrap();
    let p = vec![1.0 / n as f64; n];

    // 20-point log grid across the full QoS-exponent range.
    let grid: Vec<f64> = (0..20)
        .map(|i| 10f64.powf(-10.0 + 10.0 * i as f64 / 19.0))
        .collect();
    for j in 0..n {
        let mut last = f64::INFINITY;
        for &theta in &grid {
            let ec2 = effective_capacity(j, &t2, &p, &betas, theta, SLOT);
            let ec4 = effective_capacity(j, &t4, &p, &betas, theta, SLOT);
            assert!(ec2 <= last, "EC(M=2) increased at theta {theta} device {j}");
            assert!(
                ec4 >= ec2,
                "EC(M=4) {ec4} below EC(M=2) {ec2} at theta {theta} device {j}"
            );
            last = ec2;
        }
    }
    println!("ACCEPTANCE 2 (EC non-increasing in theta; EC(M=4) >= EC(M=2)): PASS");
}

// ---------------------------------------------------------------------------
// 3. Throughput against exhaustive state enumeration
// ---------------------------------------------------------------------------
#[test]
fn acceptance_3_throughput_oracle() {
    let scenario = three_device_scenario(0.001, 1e-10, 1.0);
    let table = scenario.build_table().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4300);
    for _ in 0..100 {
        let p: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..1.0)).collect();
        let beta: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..1.0)).collect();
        let analytic = saturation_throughput(&table, &p, &beta);
        let brute = brute_force_eta(&table, &p, &beta, 2);
        let denom = brute.abs().max(f64::MIN_POSITIVE);
        assert!(
            ((analytic - brute) / denom).abs() <= 1e-10,
            "eta {analytic} vs brute force {brute}"
        );
    }
    println!("ACCEPTANCE 3 (throughput = 8-state enumeration, 100 draws, 1e-10 rel): PASS");
}

// ---------------------------------------------------------------------------
// 4. Gradient versus central differences; multilinearity
// ---------------------------------------------------------------------------
#[test]
fn acceptance_4_gradient_check() {
    let scenario = three_device_scenario(0.001, 1e-10, 1.0);
    let table = scenario.build_table().unwrap();
    let beta = vec![0.9, 0.8, 1.0];
    let mut rng = ChaCha8Rng::seed_from_u64(4400);
    let step = 1e-6;
    for _ in 0..20 {
        let p: Vec<f64> = (0..3).map(|_| rng.random_range(0.05..0.95)).collect();
        let grad = throughput_gradient(&table, &p, &beta);
        // Deviations are measured relative to the gradient's largest
        // component (throughputs are ~1e6 bits/s, so absolute comparison
        // would be meaningless).
        let scale = grad.iter().fold(1.0f64, |a, &g| a.max(g.abs()));
        let center = saturation_throughput(&table, &p, &beta);
        for j in 0..3 {
            let mut hi = p.clone();
            let mut lo = p.clone();
            hi[j] += step;
            lo[j] -= step;
            let f_hi = saturation_throughput(&table, &hi, &beta);
            let f_lo = saturation_throughput(&table, &lo, &beta);
            let fd = (f_hi - f_lo) / (2.0 * step);
            assert!(
                (fd - grad[j]).abs() <= 1e-6 * scale,
                "gradient component {j}: fd {fd} vs analytic {}",
                grad[j]
            );
            // Second difference vanishes: eta is affine in each coordinate.
            let second = (f_hi + f_lo - 2.0 * center) / center.abs().max(1.0);
            assert!(second.abs() <= 1e-8, "second difference {second}");
        }
    }
    println!("ACCEPTANCE 4 (gradient matches central differences at 1e-6; second difference 0 at 1e-8): PASS");
}

// ---------------------------------------------------------------------------
// 5. Optimizer quality against a grid-search oracle
// ---------------------------------------------------------------------------
#[test]
fn acceptance_5_optimizer_vs_grid_search() {
    let scenario = three_device_scenario(1e-4, 1e-10, 1.0);
    let table = scenario.build_table().unwrap();
    let beta = scenario.betas();

    // Grid oracle over p in {0.05, 0.10, ..., 1.00}^3.
    let axis: Vec<f64> = (1..=20).map(|i| i as f64 * 0.05).collect();
    let mut grid_best = f64::NEG_INFINITY;
    for &a in &axis {
        for &b in &axis {
            for &c in &axis {
                grid_best = grid_best.max(saturation_throughput(&table, &[a, b, c], &beta));
            }
        }
    }

    let started = std::time::Instant::now();
    for seed in 0..5u64 {
        let params = OptimizerParams {
            seed,
            ..OptimizerParams::default()
        };
        let ctx = ObjectiveContext::new(&table, scenario.traffic(), SLOT);
        let out = optimize(&ctx, &params).unwrap();
        assert!(out.feasible, "seed {seed} found no feasible point");
        assert!(
            out.best.eta >= 0.98 * grid_best,
            "seed {seed}: eta {} below 98% of grid best {}",
            out.best.eta,
            grid_best
        );
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 300, "optimizer runs took {elapsed:?}");
    println!(
        "ACCEPTANCE 5 (IWO-DE within 2% of grid search, 5/5 seeds, {:?}): PASS",
        elapsed
    );
}

// ---------------------------------------------------------------------------
// 6. Constraint handling: constrained feasible region and unsatisfiable case
// ---------------------------------------------------------------------------
#[test]
fn acceptance_6_constraint_handling() {
    // (a) Arrivals sized so only part of p-space is feasible.
    let scenario = three_device_scenario(3.4, 1e-9, 1.0);
    let table = scenario.build_table().unwrap();
    let ctx = ObjectiveContext::new(&table, scenario.traffic(), SLOT);

    // Measure the feasible fraction of the grid to confirm the region is a
    // proper non-empty subset.
    let axis: Vec<f64> = (1..=20).map(|i| i as f64 * 0.05).collect();
    let mut feasible_points = 0usize;
    let mut total = 0usize;
    for &a in &axis {
        for &b in &axis {
            for &c in &axis {
                let cand = Candidate::evaluate(&ctx, vec![a, b, c]);
                total += 1;
                if cand.is_feasible() {
                    feasible_points += 1;
                }
            }
        }
    }
    assert!(
        feasible_points > 0 && feasible_points < total,
        "grid: {feasible_points}/{total} feasible; need a proper non-empty sub-region"
    );

    let params = OptimizerParams {
        seed: 5,
        ..OptimizerParams::default()
    };
    let out = optimize(&ctx, &params).unwrap();
    assert!(out.feasible, "optimizer missed the feasible region");
    assert_eq!(out.best.violation, 0.0);

    // (b) Arrivals beyond any achievable effective capacity: the run must
    // terminate with the infeasibility flag.
    let hopeless = three_device_scenario(50.0, 1e-9, 1.0);
    let table = hopeless.build_table().unwrap();
    let ctx = ObjectiveContext::new(&table, hopeless.traffic(), SLOT);
    let mut min_omega = f64::INFINITY;
    for &a in &axis {
        for &b in &axis {
            for &c in &axis {
                min_omega = min_omega.min(Candidate::evaluate(&ctx, vec![a, b, c]).violation);
            }
        }
    }
    assert!(min_omega > 0.0, "unsatisfiable grid has a feasible point");
    let out = optimize(&ctx, &params).unwrap();
    assert!(!out.feasible, "infeasibility flag missing");
    assert!(out.best.violation > 0.0);
    println!(
        "ACCEPTANCE 6 (constrained region: {}/{} grid points feasible, solution has zero violation; unsatisfiable regime flagged): PASS",
        feasible_points, total
    );
}

// ---------------------------------------------------------------------------
// 7. Operator laws
// ---------------------------------------------------------------------------
#[test]
fn acceptance_7_operator_laws() {
    let mut rng = ChaCha8Rng::seed_from_u64(4700);
    let random_candidate = |rng: &mut ChaCha8Rng| {
        let objective = if rng.random_bool(0.2) {
            // Duplicated coordinates exercise the tie cases.
            0.5
        } else {
            rng.random_range(0.0..2.0)
        };
        let violation = if rng.random_bool(0.2) {
            0.0
        } else {
            rng.random_range(0.0..3.0)
        };
        Candidate {
            p: vec![0.5],
            objective,
            violation,
            eta: 1.0,
            fitness: 0.0,
        }
    };

    // Irreflexivity and transitivity of Pareto dominance.
    for _ in 0..10_000 {
        let a = random_candidate(&mut rng);
        assert!(!pareto_dominates(&a, &a));
        let b = random_candidate(&mut rng);
        let c = random_candidate(&mut rng);
        if pareto_dominates(&a, &b) && pareto_dominates(&b, &c) {
            assert!(pareto_dominates(&a, &c));
        }
        // Antisymmetry: both directions can never hold at once.
        assert!(!(pareto_dominates(&a, &b) && pareto_dominates(&b, &a)));
    }

    // Crossover always inherits at least one mutant coordinate.
    let mut cross_rng = stream(47, &[1]);
    for trial in 0..10_000usize {
        let n = 1 + trial % 8;
        let target = vec![0.0; n];
        let mutant = vec![1.0; n];
        let cr = (trial % 11) as f64 / 10.0;
        let u = de_crossover(&target, &mutant, cr, &mut cross_rng);
        assert!(
            u.iter().any(|&x| x == 1.0),
            "trial {trial}: no mutant coordinate inherited at cr {cr}"
        );
    }

    // Dispersion schedule endpoints are exact.
    let params = OptimizerParams::default();
    assert_eq!(dispersion_std(0, &params), params.sigma_initial);
    assert_eq!(
        dispersion_std(params.max_generations, &params),
        params.sigma_final
    );

    // Offspring counts hit the extremes at the fitness extremes.
    assert_eq!(offspring_count(0.0, 0.0, 1.0, 6, 1), 6);
    assert_eq!(offspring_count(1.0, 0.0, 1.0, 6, 1), 1);

    // The exclusion and selection operators agree with the dominance rule
    // on a sample pool.
    let pool: Vec<Candidate> = (0..50).map(|_| random_candidate(&mut rng)).collect();
    let survivors = competitive_exclusion(pool.clone(), 10);
    assert_eq!(survivors.len(), 10);
    for s in &survivors[1..] {
        assert!(!pareto_dominates(s, &survivors[0]) || survivors[0] == *s);
    }
    let kept = de_select(pool[0].clone(), pool[1].clone());
    if pareto_dominates(&pool[1], &pool[0]) {
        assert_eq!(kept, pool[1]);
    } else {
        assert_eq!(kept, pool[0]);
    }
    // Mutant arithmetic sanity.
    let mutant = de_mutant(&[0.5, 0.5], &[0.6, 0.4], &[0.2, 0.8], 0.75);
    assert!((mutant[0] - 0.8).abs() < 1e-15 && (mutant[1] - 0.2).abs() < 1e-15);
    println!("ACCEPTANCE 7 (operator laws over 1e4 random draws): PASS");
}

// ---------------------------------------------------------------------------
// 8. SIC identities
// ---------------------------------------------------------------------------
#[test]
fn acceptance_8_sic_identities() {
    let room = RoomDims {
        length: 10.0,
        width: 20.0,
        height: 5.0,
    };
    let optics = paper_optics();
    let noise = NoiseConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4800);
    let mut checked = 0usize;
    while checked < 1000 {
        let m = if rng.random_bool(0.5) { 2 } else { 4 };
        let tau = rng.random_range(1..=m.min(3));
        // Devices near the room centre stay inside every PD's field of view.
        let geometry = Geometry {
            room,
            pd_positions: pd_array(m, &room, 4.85, 0.15).unwrap(),
            pd_orientation: Point3::new(0.0, 0.0, -1.0),
            device_positions: (0..tau)
                .map(|_| {
                    Point3::new(
                        rng.random_range(2.0..8.0),
                        rng.random_range(7.0..13.0),
                        rng.random_range(0.5..1.5),
                    )
                })
                .collect(),
            device_orientation: Point3::new(0.0, 0.0, 1.0),
        };
        let h = channel_matrix(&geometry, &optics).unwrap();
        let bits = (1u32 << tau) - 1;
        let state = AccessState::from_bits(bits, tau).unwrap();
        let pr = received_optical_power(&h, &state, optics.tx_power_w);
        let sigma2 = noise_variance(pr, &optics, &noise);
        let order = decode_order(&h, &state).unwrap();
        let zf = match zf_sinr(
            &h,
            &state,
            &order,
            sigma2,
            optics.responsivity,
            optics.tx_power_w,
            ZfNoiseMode::RowNorm,
        ) {
            Ok(v) => v,
            Err(_) => continue, // skip near-singular placements
        };
        let mmse = mmse_sinr(
            &h,
            &state,
            &order,
            sigma2,
            optics.responsivity,
            optics.tx_power_w,
        )
        .unwrap();

        // Per-layer MMSE >= ZF.
        for (&(dz, gz), &(dm, gm)) in zf.entries().iter().zip(mmse.entries()) {
            assert_eq!(dz, dm);
            assert!(gm >= gz * (1.0 - 1e-9), "MMSE {gm} < ZF {gz}");
        }
        // Last layer: the filters coincide to 1e-9 relative.
        let gz = zf.entries().last().unwrap().1;
        let gm = mmse.entries().last().unwrap().1;
        assert!(((gm - gz) / gz).abs() <= 1e-9, "last layer {gm} vs {gz}");

        // Single-active-device closed form for both filters.
        let single = AccessState::from_bits(1, tau).unwrap();
        let pr1 = received_optical_power(&h, &single, optics.tx_power_w);
        let s2 = noise_variance(pr1, &optics, &noise);
        let ord1 = decode_order(&h, &single).unwrap();
        let expect = optics.responsivity.powi(2) * optics.tx_power_w.powi(2)
            * norm2(&h.device_column(0)).powi(2)
            / s2;
        let z1 = zf_sinr(
            &h,
            &single,
            &ord1,
            s2,
            optics.responsivity,
            optics.tx_power_w,
            ZfNoiseMode::RowNorm,
        )
        .unwrap();
        let m1 = mmse_sinr(&h, &single, &ord1, s2, optics.responsivity, optics.tx_power_w)
            .unwrap();
        assert!(((z1.entries()[0].1 - expect) / expect).abs() < 1e-10);
        assert!(((m1.entries()[0].1 - expect) / expect).abs() < 1e-10);
        checked += 1;
    }
    println!("ACCEPTANCE 8 (SIC identities over 1000 random geometries): PASS");
}

// ---------------------------------------------------------------------------
// Supporting regression: table construction stays in lockstep between the
// module API and the scenario wrapper used throughout this suite.
// ---------------------------------------------------------------------------
#[test]
fn scenario_wrapper_matches_module_level_build() {
    let scenario = three_device_scenario(0.001, 1e-9, 0.9);
    let via_scenario = scenario.build_table().unwrap();
    let h: ChannelMatrix = scenario.channel_matrix().unwrap();
    let direct = build_rate_table(
        &h,
        scenario.optics(),
        scenario.noise(),
        NoisePowerMode::PerState,
        FilterKind::Mmse,
        ZfNoiseMode::RowNorm,
        scenario.mpr(),
    )
    .unwrap();
    assert_eq!(via_scenario, direct);
    let _ = TrafficSpec {
        unblocked_probability: 0.9,
        arrival_rate: 0.001,
        packet_length_bits: 1000.0,
        qos_exponent: 1e-9,
    };
}
