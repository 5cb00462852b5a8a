//! Memetic IWO-DE search for the throughput-optimal access-probability
//! vector under per-device QoS constraints.
//!
//! The constrained problem (maximize throughput subject to per-device
//! EB/EC <= 1 and the box bounds) is recast as joint minimization of the
//! pair (1/eta, Omega): the inverse throughput and the summed constraint
//! violation. Each generation runs an invasive-weed refinement step —
//! fitness-weighted reproduction, Gaussian dispersal with a shrinking
//! schedule, Pareto-based competitive exclusion — followed by a
//! differential-evolution step of best-vector mutation, binomial crossover
//! and dominance-gated selection.
//!
//! Coordinates are never clamped: the box bounds act only through the
//! violation terms, so the search may roam outside [0, 1] and is pulled
//! back by selection pressure.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::access::{FeasibleStateTable, TrafficSpec};
use crate::error::{Error, Result};
use crate::qos::{constraint_violation, evaluate_qos, saturation_throughput};
use crate::rng::{splitmix64, stream};

/// Objective cap used during fitness normalization so an unbounded inverse
/// throughput cannot poison the min-max scaling.
const OBJECTIVE_CAP: f64 = 1e300;

const TAG_INIT: u64 = 1;
const TAG_DISPERSE: u64 = 2;
const TAG_DE: u64 = 3;

/// Everything a candidate evaluation needs: the immutable rate table plus
/// per-device traffic and the slot duration.
#[derive(Debug, Clone)]
pub struct ObjectiveContext<'a> {
    table: &'a FeasibleStateTable,
    traffic: &'a [TrafficSpec],
    slot_duration: f64,
    beta: Vec<f64>,
}

impl<'a> ObjectiveContext<'a> {
    pub fn new(
        table: &'a FeasibleStateTable,
        traffic: &'a [TrafficSpec],
        slot_duration: f64,
    ) -> Self {
        let beta = traffic.iter().map(|t| t.unblocked_probability).collect();
        ObjectiveContext {
            table,
            traffic,
            slot_duration,
            beta,
        }
    }

    pub fn n_devices(&self) -> usize {
        self.table.n_devices()
    }

    pub fn table(&self) -> &FeasibleStateTable {
        self.table
    }
}

/// One weed: an access-probability vector with its cached objective pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub p: Vec<f64>,
    /// Inverse throughput 1/eta; infinite when the throughput is not
    /// positive.
    pub objective: f64,
    /// Summed constraint violation Omega.
    pub violation: f64,
    /// Throughput at `p`, bits/s.
    pub eta: f64,
    /// Population-relative fitness; assigned by `assign_fitness`.
    pub fitness: f64,
}

impl Candidate {
    /// Evaluate a position. The cached objective pair is always derived
    /// from `p` here, never patched in place.
    pub fn evaluate(ctx: &ObjectiveContext, p: Vec<f64>) -> Candidate {
        let eta = saturation_throughput(ctx.table, &p, &ctx.beta);
        let objective = if eta > 0.0 { 1.0 / eta } else { f64::INFINITY };
        let eval = evaluate_qos(ctx.table, ctx.traffic, &p, ctx.slot_duration);
        let violation = constraint_violation(&p, &eval).total;
        Candidate {
            p,
            objective,
            violation,
            eta,
            fitness: 0.0,
        }
    }

    pub fn is_feasible(&self) -> bool {
        self.violation == 0.0
    }
}

/// Search parameters; defaults follow the reference configuration
/// (population 60, up to 50 survivors, 300 generations).
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerParams {
    pub initial_population: usize,
    pub max_survivors: usize,
    pub max_offspring: usize,
    pub min_offspring: usize,
    /// Non-linear modulation index of the dispersion schedule.
    pub modulation_index: f64,
    pub sigma_initial: f64,
    pub sigma_final: f64,
    pub max_generations: usize,
    /// DE difference scaling factor.
    pub scale_factor: f64,
    pub crossover_probability: f64,
    pub seed: u64,
}

impl Default for OptimizerParams {
    fn default() -> Self {
        OptimizerParams {
            initial_population: 60,
            max_survivors: 50,
            max_offspring: 6,
            min_offspring: 1,
            modulation_index: 3.0,
            sigma_initial: 0.15,
            sigma_final: 1e-6,
            max_generations: 300,
            scale_factor: 0.75,
            crossover_probability: 0.9,
            seed: 0,
        }
    }
}

impl OptimizerParams {
    pub fn validate(&self) -> Result<()> {
        if self.initial_population == 0 {
            return Err(Error::invalid("initial_population", "must be at least 1"));
        }
        if self.max_survivors == 0 {
            return Err(Error::invalid("max_survivors", "must be at least 1"));
        }
        if self.min_offspring > self.max_offspring {
            return Err(Error::invalid(
                "min_offspring",
                "must not exceed max_offspring",
            ));
        }
        if self.max_survivors > self.initial_population * (1 + self.max_offspring) {
            return Err(Error::invalid(
                "max_survivors",
                "cannot exceed the first generation's pool, W0 * (1 + S_max)",
            ));
        }
        if !(self.sigma_final >= 0.0 && self.sigma_initial >= self.sigma_final) {
            return Err(Error::invalid(
                "sigma_final",
                "need sigma_initial >= sigma_final >= 0",
            ));
        }
        if !(0.0..=1.0).contains(&self.crossover_probability) {
            return Err(Error::invalid("crossover_probability", "must lie in [0, 1]"));
        }
        if !(self.scale_factor.is_finite() && self.scale_factor >= 0.0) {
            return Err(Error::invalid("scale_factor", "must be finite and non-negative"));
        }
        if !(self.modulation_index > 0.0) {
            return Err(Error::invalid("modulation_index", "must be strictly positive"));
        }
        Ok(())
    }
}

/// Per-generation progress snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRecord {
    pub generation: usize,
    /// Highest throughput among feasible members, if any are feasible.
    pub best_feasible_eta: Option<f64>,
    pub best_fitness: f64,
    /// Fraction of feasible members.
    pub feasible_fraction: f64,
    pub population_hash: u64,
}

/// Result of a full run.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeOutcome {
    pub best: Candidate,
    /// False when no feasible candidate was ever found; `best` is then the
    /// least-violating candidate.
    pub feasible: bool,
    pub trace: Vec<GenerationRecord>,
    /// First generation whose entire population was feasible.
    pub first_all_feasible: Option<usize>,
}

/// Random initial population: every coordinate uniform on (0, 1].
pub fn initialize(ctx: &ObjectiveContext, w0: usize, rng: &mut ChaCha8Rng) -> Vec<Candidate> {
    let n = ctx.n_devices();
    (0..w0)
        .map(|_| {
            let p: Vec<f64> = (0..n).map(|_| 1.0 - rng.random::<f64>()).collect();
            Candidate::evaluate(ctx, p)
        })
        .collect()
}

/// Adaptive weighted-sum fitness over the current population: min-max
/// normalized objective and violation combined with the feasible-fraction
/// weight. Returns (feasible fraction, min fitness, max fitness).
pub fn assign_fitness(pop: &mut [Candidate]) -> (f64, f64, f64) {
    assert!(!pop.is_empty(), "fitness of an empty population");
    let omega = pop.iter().filter(|c| c.is_feasible()).count() as f64 / pop.len() as f64;
    let clamp = |x: f64| x.min(OBJECTIVE_CAP);
    let (mut f_min, mut f_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut v_min, mut v_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for c in pop.iter() {
        f_min = f_min.min(clamp(c.objective));
        f_max = f_max.max(clamp(c.objective));
        v_min = v_min.min(c.violation);
        v_max = v_max.max(c.violation);
    }
    let f_range = f_max - f_min;
    let v_range = v_max - v_min;
    let mut fit_min = f64::INFINITY;
    let mut fit_max = f64::NEG_INFINITY;
    for c in pop.iter_mut() {
        // Degenerate ranges normalize to zero.
        let df = if f_range > 0.0 {
            (clamp(c.objective) - f_min) / f_range
        } else {
            0.0
        };
        let dv = if v_range > 0.0 {
            (c.violation - v_min) / v_range
        } else {
            0.0
        };
        c.fitness = (omega * df * df + (1.0 - omega) * dv * dv).sqrt();
        fit_min = fit_min.min(c.fitness);
        fit_max = fit_max.max(c.fitness);
    }
    (omega, fit_min, fit_max)
}

/// Offspring count of one weed: linear in its fitness between the
/// population extremes, rounded half-up, clamped to [min, max]. A
/// degenerate fitness range grants everyone the maximum.
pub fn offspring_count(
    fitness: f64,
    fit_min: f64,
    fit_max: f64,
    max_offspring: usize,
    min_offspring: usize,
) -> usize {
    let range = fit_max - fit_min;
    if !(range > 0.0) || !range.is_finite() {
        return max_offspring;
    }
    let s = max_offspring as f64
        - (max_offspring - min_offspring) as f64 * (fitness - fit_min) / range;
    let rounded = (s + 0.5).floor() as i64;
    rounded.clamp(min_offspring as i64, max_offspring as i64) as usize
}

/// Dispersion standard deviation at generation `z`: shrinks from
/// sigma_initial to sigma_final along ((Z_max - z)/Z_max)^phi. Endpoints
/// are returned exactly.
pub fn dispersion_std(z: usize, params: &OptimizerParams) -> f64 {
    if z == 0 {
        return params.sigma_initial;
    }
    if z >= params.max_generations {
        return params.sigma_final;
    }
    let t = (params.max_generations - z) as f64 / params.max_generations as f64;
    t.powf(params.modulation_index) * (params.sigma_initial - params.sigma_final)
        + params.sigma_final
}

/// Spawn every weed's offspring: fitness determines the brood size, each
/// child is the parent plus i.i.d. zero-mean Gaussian noise per coordinate.
/// Children are not clamped; the box bounds act through the violation
/// terms. Fitness must be assigned before calling.
pub fn reproduce_and_disperse(
    pop: &[Candidate],
    z: usize,
    params: &OptimizerParams,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<f64>> {
    let (fit_min, fit_max) = pop.iter().fold(
        (f64::INFINITY, f64::NEG_INFINITY),
        |(lo, hi), c| (lo.min(c.fitness), hi.max(c.fitness)),
    );
    let sigma = dispersion_std(z, params);
    let normal = if sigma > 0.0 {
        Some(rand_distr::Normal::new(0.0, sigma).expect("valid sigma"))
    } else {
        None
    };
    let mut children = Vec::new();
    for parent in pop {
        let brood = offspring_count(
            parent.fitness,
            fit_min,
            fit_max,
            params.max_offspring,
            params.min_offspring,
        );
        for _ in 0..brood {
            let child: Vec<f64> = parent
                .p
                .iter()
                .map(|&x| match &normal {
                    Some(dist) => x + rng.sample(dist),
                    None => x,
                })
                .collect();
            children.push(child);
        }
    }
    children
}

/// Strict Pareto dominance on the (1/eta, Omega) pair.
pub fn pareto_dominates(a: &Candidate, b: &Candidate) -> bool {
    a.objective <= b.objective
        && a.violation <= b.violation
        && (a.objective < b.objective || a.violation < b.violation)
}

/// Fast non-dominated sort: front index per pool member.
fn non_dominated_fronts(pool: &[Candidate]) -> Vec<usize> {
    let n = pool.len();
    let mut dominated_by = vec![0usize; n];
    let mut dominates: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            if pareto_dominates(&pool[i], &pool[j]) {
                dominates[i].push(j);
                dominated_by[j] += 1;
            } else if pareto_dominates(&pool[j], &pool[i]) {
                dominates[j].push(i);
                dominated_by[i] += 1;
            }
        }
    }
    let mut front = vec![usize::MAX; n];
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by[i] == 0).collect();
    let mut level = 0;
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            front[i] = level;
            for &j in &dominates[i] {
                dominated_by[j] -= 1;
                if dominated_by[j] == 0 {
                    next.push(j);
                }
            }
        }
        current = next;
        level += 1;
    }
    front
}

/// Keep the best `w_max` members of the parent/offspring pool: ranked by
/// non-dominated front, ties by smaller violation, then smaller objective,
/// then insertion order. The returned population is in rank order, so
/// index 0 is the generation's best weed.
pub fn competitive_exclusion(pool: Vec<Candidate>, w_max: usize) -> Vec<Candidate> {
    let fronts = non_dominated_fronts(&pool);
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.sort_by(|&a, &b| {
        fronts[a]
            .cmp(&fronts[b])
            .then_with(|| {
                pool[a]
                    .violation
                    .partial_cmp(&pool[b].violation)
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .then_with(|| {
                pool[a]
                    .objective
                    .partial_cmp(&pool[b].objective)
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .then(a.cmp(&b))
    });
    let keep = w_max.min(pool.len());
    let mut by_index: Vec<Option<Candidate>> = pool.into_iter().map(Some).collect();
    order
        .into_iter()
        .take(keep)
        .map(|i| by_index[i].take().expect("unique index"))
        .collect()
}

/// Best-vector mutant for one target: best + F0 (p_r1 - p_r2).
pub fn de_mutant(best_p: &[f64], r1_p: &[f64], r2_p: &[f64], f0: f64) -> Vec<f64> {
    best_p
        .iter()
        .zip(r1_p.iter().zip(r2_p))
        .map(|(&b, (&x, &y))| b + f0 * (x - y))
        .collect()
}

/// One mutant per population member; r1 != r2 are drawn uniformly from the
/// population (the best index is not excluded).
pub fn de_mutate(
    pop: &[Candidate],
    best_p: &[f64],
    f0: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<f64>> {
    assert!(pop.len() >= 2, "mutation needs two distinct donors");
    (0..pop.len())
        .map(|_| {
            let r1 = rng.random_range(0..pop.len());
            let mut r2 = rng.random_range(0..pop.len() - 1);
            if r2 >= r1 {
                r2 += 1;
            }
            de_mutant(best_p, &pop[r1].p, &pop[r2].p, f0)
        })
        .collect()
}

/// Binomial crossover: coordinate j comes from the mutant when its uniform
/// draw falls at or below C_r, and coordinate j_rand always does, so the
/// trial inherits at least one mutant component.
pub fn de_crossover(
    target: &[f64],
    mutant: &[f64],
    crossover_probability: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let n = target.len();
    let j_rand = rng.random_range(0..n);
    (0..n)
        .map(|j| {
            if rng.random::<f64>() <= crossover_probability || j == j_rand {
                mutant[j]
            } else {
                target[j]
            }
        })
        .collect()
}

/// Dominance-gated selection: the trial replaces the incumbent only when it
/// strictly Pareto-dominates it.
pub fn de_select(incumbent: Candidate, trial: Candidate) -> Candidate {
    if pareto_dominates(&trial, &incumbent) {
        trial
    } else {
        incumbent
    }
}

fn population_hash(pop: &[Candidate]) -> u64 {
    let mut h = 0xA5A5_5A5A_0F0F_F0F0u64;
    for c in pop {
        for &x in &c.p {
            h = splitmix64(h ^ x.to_bits());
        }
    }
    h
}

fn best_feasible_eta(pop: &[Candidate]) -> Option<f64> {
    pop.iter()
        .filter(|c| c.is_feasible())
        .map(|c| c.eta)
        .fold(None, |acc, eta| Some(acc.map_or(eta, |a: f64| a.max(eta))))
}

/// Pick the run's answer from the final population: feasibility first, then
/// highest throughput; among infeasible candidates, the smallest violation.
fn select_best(pop: &[Candidate]) -> Candidate {
    let feasible = pop
        .iter()
        .filter(|c| c.is_feasible())
        .max_by(|a, b| a.eta.partial_cmp(&b.eta).unwrap_or(std::cmp::Ordering::Equal));
    match feasible {
        Some(c) => c.clone(),
        None => pop
            .iter()
            .min_by(|a, b| {
                a.violation
                    .partial_cmp(&b.violation)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then_with(|| {
                        a.objective
                            .partial_cmp(&b.objective)
                            .unwrap_or(std::cmp::Ordering::Equal)
                    })
            })
            .expect("non-empty population")
            .clone(),
    }
}

/// Run the full IWO-DE loop for `max_generations` generations.
///
/// When no feasible candidate is ever found the outcome carries
/// `feasible = false` and the least-violating candidate, mirroring regimes
/// where the QoS constraints are unsatisfiable.
pub fn optimize(ctx: &ObjectiveContext, params: &OptimizerParams) -> Result<OptimizeOutcome> {
    params.validate()?;
    let mut rng_init = stream(params.seed, &[TAG_INIT]);
    let mut pop = initialize(ctx, params.initial_population, &mut rng_init);
    let mut trace = Vec::with_capacity(params.max_generations);
    let mut first_all_feasible = None;

    for z in 0..params.max_generations {
        assign_fitness(&mut pop);
        let mut disperse_rng = stream(params.seed, &[TAG_DISPERSE, z as u64]);
        let children = reproduce_and_disperse(&pop, z, params, &mut disperse_rng);
        let mut pool = pop;
        pool.reserve(children.len());
        for child in children {
            pool.push(Candidate::evaluate(ctx, child));
        }
        pop = competitive_exclusion(pool, params.max_survivors);

        if pop.len() >= 3 {
            let best_p = pop[0].p.clone();
            let snapshot = pop.clone();
            let mut de_rng = stream(params.seed, &[TAG_DE, z as u64]);
            let mutants = de_mutate(&snapshot, &best_p, params.scale_factor, &mut de_rng);
            for (i, mutant) in mutants.into_iter().enumerate() {
                let trial_p = de_crossover(
                    &snapshot[i].p,
                    &mutant,
                    params.crossover_probability,
                    &mut de_rng,
                );
                let trial = Candidate::evaluate(ctx, trial_p);
                pop[i] = de_select(snapshot[i].clone(), trial);
            }
        }

        let (omega, fit_min, _) = assign_fitness(&mut pop);
        if omega == 1.0 && first_all_feasible.is_none() {
            first_all_feasible = Some(z);
        }
        trace.push(GenerationRecord {
            generation: z,
            best_feasible_eta: best_feasible_eta(&pop),
            best_fitness: fit_min,
            feasible_fraction: omega,
            population_hash: population_hash(&pop),
        });
    }

    let best = select_best(&pop);
    let feasible = best.is_feasible();
    Ok(OptimizeOutcome {
        best,
        feasible,
        trace,
        first_all_feasible,
    })
}
