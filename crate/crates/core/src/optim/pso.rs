//! Particle swarm optimisation with inertia, per-dimension velocity clamping
//! and position clamping at the box boundary.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_dims, evaluate_all, Bounds, Objective, OptResult, Progress, Termination};
use crate::error::{Error, Result};
use crate::seed;

const STREAM_TAG: u64 = 0x5053_4f; // "PSO"

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsoParams {
    pub swarm_size: usize,
    /// Cognitive learning rate `C_p`.
    pub cognitive: f64,
    /// Social learning rate `C_g`.
    pub social: f64,
    pub inertia: f64,
    /// Velocity limit as a fraction of each dimension's range.
    #[serde(default = "default_velocity_clamp")]
    pub velocity_clamp: f64,
    pub termination: Termination,
}

fn default_velocity_clamp() -> f64 {
    0.2
}

/// Clamp used by the weight-training presets. At `w = 0.9` with large
/// learning rates the swarm never settles, so precision is set by the clamp.
pub const WEIGHT_TRAINING_CLAMP: f64 = 0.01;

impl PsoParams {
    /// Tier-II PSO of the AIS-PSO variant: C_p = C_g = 2.0, w = 0.9, 10
    /// particles, 300 iterations (the end condition repeats the cap).
    pub fn table2_tier2() -> Self {
        Self {
            swarm_size: 10,
            cognitive: 2.0,
            social: 2.0,
            inertia: 0.9,
            velocity_clamp: WEIGHT_TRAINING_CLAMP,
            termination: Termination::iterations(300),
        }
    }

    /// Tier-I PSO of the PSO-PSO variant: 5 particles, 100 iterations, stop
    /// after 25 iterations without improvement.
    pub fn table3_tier1() -> Self {
        Self {
            swarm_size: 5,
            cognitive: 2.0,
            social: 2.0,
            inertia: 0.9,
            velocity_clamp: default_velocity_clamp(),
            termination: Termination::iterations(100).with_stall(25),
        }
    }

    /// Tier-II PSO of the PSO-PSO variant: C_p = C_g = 1.85, 8 particles,
    /// 1000 iterations, stall limit 100.
    pub fn table3_tier2() -> Self {
        Self {
            swarm_size: 8,
            cognitive: 1.85,
            social: 1.85,
            inertia: 0.9,
            velocity_clamp: WEIGHT_TRAINING_CLAMP,
            termination: Termination::iterations(1000).with_stall(100),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParams(format!("pso: {msg}")));
        if self.swarm_size < 2 {
            return bad("swarm_size must be at least 2");
        }
        if !(self.cognitive >= 0.0 && self.social >= 0.0) {
            return bad("learning rates must be non-negative");
        }
        if !(self.inertia > 0.0 && self.inertia <= 1.0) {
            return bad("inertia must lie in (0, 1]");
        }
        if !(self.velocity_clamp > 0.0 && self.velocity_clamp <= 1.0) {
            return bad("velocity_clamp must lie in (0, 1]");
        }
        self.termination.validate()
    }

    /// Upper bound on objective evaluations for a full run.
    pub fn evaluation_budget(&self) -> usize {
        self.swarm_size * (self.termination.max_iterations + 1)
    }
}

/// Velocity and position update for one particle with explicit random factors.
///
/// `V <- w V + C_p r1 (pBest - X) + C_g r2 (gBest - X)`, clamped per dimension
/// to `+-velocity_clamp * (hi - lo)`; then `X <- X + V`, clamped to the box with
/// the violating velocity component zeroed.
#[allow(clippy::too_many_arguments)]
pub fn move_particle(
    position: &mut [f64],
    velocity: &mut [f64],
    personal_best: &[f64],
    global_best: &[f64],
    r1: &[f64],
    r2: &[f64],
    params: &PsoParams,
    bounds: &Bounds,
) {
    for d in 0..position.len() {
        let x = position[d];
        let vmax = params.velocity_clamp * bounds.width(d);
        let v = params.inertia * velocity[d]
            + params.cognitive * r1[d] * (personal_best[d] - x)
            + params.social * r2[d] * (global_best[d] - x);
        let v = v.clamp(-vmax, vmax);
        let moved = x + v;
        let clamped = bounds.clamp_coord(d, moved);
        position[d] = clamped;
        velocity[d] = if clamped == moved { v } else { 0.0 };
    }
}

#[derive(Debug, Clone)]
pub struct Swarm {
    pub positions: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
    pub personal_best: Vec<Vec<f64>>,
    pub personal_best_cost: Vec<f64>,
    pub global_best: Vec<f64>,
    pub global_best_cost: f64,
}

impl Swarm {
    /// Uniform positions, zero velocities; every particle evaluated once.
    pub fn init(
        obj: &dyn Objective,
        bounds: &Bounds,
        params: &PsoParams,
        seed: u64,
    ) -> Result<Self> {
        let positions: Vec<Vec<f64>> = (0..params.swarm_size)
            .map(|i| bounds.sample(&mut seed::stream(seed, &[STREAM_TAG, 0, i as u64])))
            .collect();
        let costs = evaluate_all(obj, &positions)?;
        Ok(Self::from_evaluated(positions, costs))
    }

    pub fn from_evaluated(positions: Vec<Vec<f64>>, costs: Vec<f64>) -> Self {
        let dim = positions[0].len();
        let mut best = 0;
        for (i, &c) in costs.iter().enumerate() {
            if c < costs[best] {
                best = i;
            }
        }
        Self {
            velocities: vec![vec![0.0; dim]; positions.len()],
            personal_best: positions.clone(),
            personal_best_cost: costs.clone(),
            global_best: positions[best].clone(),
            global_best_cost: costs[best],
            positions,
        }
    }

    /// One synchronous iteration: every particle moves against the global best
    /// of the previous iteration, then the swarm is evaluated as a batch.
    pub fn step(
        &mut self,
        obj: &dyn Objective,
        bounds: &Bounds,
        params: &PsoParams,
        seed: u64,
        iteration: usize,
    ) -> Result<()> {
        let dim = bounds.dim();
        let mut r1 = vec![0.0; dim];
        let mut r2 = vec![0.0; dim];
        for i in 0..self.positions.len() {
            let mut rng = seed::stream(seed, &[STREAM_TAG, iteration as u64, i as u64]);
            for d in 0..dim {
                r1[d] = rng.random::<f64>();
                r2[d] = rng.random::<f64>();
            }
            move_particle(
                &mut self.positions[i],
                &mut self.velocities[i],
                &self.personal_best[i],
                &self.global_best,
                &r1,
                &r2,
                params,
                bounds,
            );
        }
        let costs = evaluate_all(obj, &self.positions)?;
        for (i, &c) in costs.iter().enumerate() {
            if c < self.personal_best_cost[i] {
                self.personal_best_cost[i] = c;
                self.personal_best[i].clone_from(&self.positions[i]);
            }
            if c < self.global_best_cost {
                self.global_best_cost = c;
                self.global_best.clone_from(&self.positions[i]);
            }
        }
        Ok(())
    }
}

pub fn minimize(
    obj: &dyn Objective,
    bounds: &Bounds,
    params: &PsoParams,
    seed: u64,
) -> Result<OptResult> {
    params.validate()?;
    check_dims(obj, bounds)?;
    let mut progress = Progress::new(params.termination);
    let mut swarm = Swarm::init(obj, bounds, params, seed)?;
    progress.evaluations += params.swarm_size;
    progress.offer(&swarm.global_best, swarm.global_best_cost);
    progress.finish_init();
    let mut iteration = 0;
    while !progress.done() {
        iteration += 1;
        swarm.step(obj, bounds, params, seed, iteration)?;
        progress.evaluations += params.swarm_size;
        progress.offer(&swarm.global_best, swarm.global_best_cost);
        progress.finish_iteration();
    }
    Ok(progress.into_result())
}
