//! Clonal selection.
//!
//! Each antibody spawns a fixed number of clones. Clone coordinates mutate
//! independently with probability `mutation_probability` (at least one
//! coordinate always mutates) by Gaussian noise whose spread shrinks
//! exponentially with the parent's rank affinity, so the best
//! antibodies search most locally. Each parent is then replaced by its best
//! clone if that clone is strictly better, and the worst antibodies make way
//! for random newcomers.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{check_dims, evaluate_all, Bounds, Objective, OptResult, Progress, Termination};
use crate::error::{Error, Result};
use crate::seed;

const STREAM_TAG: u64 = 0x41_4953; // "AIS"
const PHASE_INIT: u64 = 0;
const PHASE_CLONE: u64 = 1;
const PHASE_NEWCOMER: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AisParams {
    pub population: usize,
    pub clones_per_antibody: usize,
    pub mutation_probability: f64,
    /// Mutation spread for zero affinity, as a fraction of each dimension's range.
    #[serde(default = "default_sigma")]
    pub mutation_scale: f64,
    /// Exponential decay of the spread with affinity.
    #[serde(default = "default_decay")]
    pub decay: f64,
    #[serde(default = "default_newcomers")]
    pub newcomers: usize,
    pub termination: Termination,
}

fn default_sigma() -> f64 {
    0.1
}

fn default_decay() -> f64 {
    5.0
}

fn default_newcomers() -> usize {
    1
}

impl AisParams {
    /// Structure-search repertoire: 4 antibodies, 4 clones each, hypermutation
    /// probability 0.05, 10 iterations.
    pub fn table2() -> Self {
        Self {
            population: 4,
            clones_per_antibody: 4,
            mutation_probability: 0.05,
            mutation_scale: default_sigma(),
            decay: default_decay(),
            newcomers: default_newcomers(),
            termination: Termination::iterations(10),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParams(format!("ais: {msg}")));
        if self.population < 2 {
            return bad("population must be at least 2");
        }
        if self.clones_per_antibody < 1 {
            return bad("clones_per_antibody must be at least 1");
        }
        if !(self.mutation_probability >= 0.0 && self.mutation_probability <= 1.0) {
            return bad("mutation_probability must lie in [0, 1]");
        }
        if !(self.mutation_scale > 0.0 && self.mutation_scale.is_finite()) {
            return bad("mutation_scale must be positive");
        }
        if !(self.decay >= 0.0 && self.decay.is_finite()) {
            return bad("decay must be non-negative");
        }
        if self.newcomers >= self.population {
            return bad("newcomers must be fewer than the population");
        }
        self.termination.validate()
    }

    pub fn evaluation_budget(&self) -> usize {
        let per_iter = self.population * self.clones_per_antibody + self.newcomers + self.population;
        self.population + self.termination.max_iterations * per_iter
    }

    /// Mutation standard deviation in dimension `d` for a parent of the given affinity.
    pub fn sigma(&self, bounds: &Bounds, d: usize, affinity: f64) -> f64 {
        self.mutation_scale * bounds.width(d) * (-self.decay * affinity).exp()
    }
}

/// Rank-normalised inverted cost: `1 - (number of strictly better antibodies) / (P - 1)`.
/// Best -> 1, a unique worst -> 0, tied antibodies share an affinity.
pub fn affinities(costs: &[f64]) -> Vec<f64> {
    let n = costs.len();
    if n < 2 {
        return vec![1.0; n];
    }
    costs
        .iter()
        .map(|&c| {
            let better = costs.iter().filter(|&&o| o < c).count();
            1.0 - better as f64 / (n - 1) as f64
        })
        .collect()
}

/// Clone and hypermutate the whole repertoire. The pool is grouped by parent:
/// clones of antibody `i` occupy `i * n_c .. (i + 1) * n_c`.
pub fn clone_and_mutate(
    population: &[Vec<f64>],
    costs: &[f64],
    params: &AisParams,
    bounds: &Bounds,
    seed: u64,
    iteration: usize,
) -> Vec<Vec<f64>> {
    let aff = affinities(costs);
    let mut pool = Vec::with_capacity(population.len() * params.clones_per_antibody);
    for (i, parent) in population.iter().enumerate() {
        let mut rng = seed::stream(seed, &[STREAM_TAG, iteration as u64, PHASE_CLONE, i as u64]);
        for _ in 0..params.clones_per_antibody {
            let mut clone = parent.clone();
            let mut any = false;
            for (d, v) in clone.iter_mut().enumerate() {
                if rng.random::<f64>() < params.mutation_probability {
                    any = true;
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *v = bounds.clamp_coord(d, *v + params.sigma(bounds, d, aff[i]) * z);
                }
            }
            // A clone identical to its parent is a wasted evaluation.
            if !any && params.mutation_probability > 0.0 {
                let d = rng.random_range(0..clone.len());
                let z: f64 = StandardNormal.sample(&mut rng);
                clone[d] = bounds.clamp_coord(d, clone[d] + params.sigma(bounds, d, aff[i]) * z);
            }
            pool.push(clone);
        }
    }
    pool
}

#[derive(Debug, Clone)]
pub struct Repertoire {
    pub antibodies: Vec<Vec<f64>>,
    pub costs: Vec<f64>,
}

impl Repertoire {
    pub fn init(obj: &dyn Objective, bounds: &Bounds, params: &AisParams, seed: u64) -> Result<Self> {
        let antibodies: Vec<Vec<f64>> = (0..params.population)
            .map(|i| bounds.sample(&mut seed::stream(seed, &[STREAM_TAG, 0, PHASE_INIT, i as u64])))
            .collect();
        let costs = evaluate_all(obj, &antibodies)?;
        Ok(Self { antibodies, costs })
    }

    pub fn best(&self) -> usize {
        let mut b = 0;
        for (i, &c) in self.costs.iter().enumerate() {
            if c < self.costs[b] {
                b = i;
            }
        }
        b
    }

    /// One generation; returns the number of objective evaluations spent.
    pub fn step(
        &mut self,
        obj: &dyn Objective,
        bounds: &Bounds,
        params: &AisParams,
        seed: u64,
        iteration: usize,
    ) -> Result<usize> {
        let nc = params.clones_per_antibody;
        let pool = clone_and_mutate(&self.antibodies, &self.costs, params, bounds, seed, iteration);
        let pool_costs = evaluate_all(obj, &pool)?;
        let mut evaluations = pool.len();

        // Re-selection: each parent against its own clones, strict improvement.
        for i in 0..self.antibodies.len() {
            for c in i * nc..(i + 1) * nc {
                if pool_costs[c] < self.costs[i] {
                    self.costs[i] = pool_costs[c];
                    self.antibodies[i].clone_from(&pool[c]);
                }
            }
        }

        // Diversity: the worst antibodies are replaced. Worst = highest cost,
        // ties resolved towards the higher index so the best is never chosen.
        if params.newcomers > 0 {
            let mut order: Vec<usize> = (0..self.antibodies.len()).collect();
            order.sort_by(|&a, &b| {
                self.costs[b]
                    .total_cmp(&self.costs[a])
                    .then_with(|| b.cmp(&a))
            });
            let worst: Vec<usize> = order.into_iter().take(params.newcomers).collect();
            let fresh: Vec<Vec<f64>> = worst
                .iter()
                .enumerate()
                .map(|(r, _)| {
                    bounds.sample(&mut seed::stream(
                        seed,
                        &[STREAM_TAG, iteration as u64, PHASE_NEWCOMER, r as u64],
                    ))
                })
                .collect();
            let fresh_costs = evaluate_all(obj, &fresh)?;
            evaluations += fresh.len();
            for ((&i, x), c) in worst.iter().zip(fresh).zip(fresh_costs) {
                self.antibodies[i] = x;
                self.costs[i] = c;
            }
        }
        Ok(evaluations)
    }
}

pub fn minimize(
    obj: &dyn Objective,
    bounds: &Bounds,
    params: &AisParams,
    seed: u64,
) -> Result<OptResult> {
    params.validate()?;
    check_dims(obj, bounds)?;
    let mut progress = Progress::new(params.termination);
    let mut rep = Repertoire::init(obj, bounds, params, seed)?;
    progress.evaluations += params.population;
    let b = rep.best();
    progress.offer(&rep.antibodies[b], rep.costs[b]);
    progress.finish_init();
    let mut iteration = 0;
    while !progress.done() {
        iteration += 1;
        progress.evaluations += rep.step(obj, bounds, params, seed, iteration)?;
        let b = rep.best();
        progress.offer(&rep.antibodies[b], rep.costs[b]);
        progress.finish_iteration();
    }
    Ok(progress.into_result())
}
