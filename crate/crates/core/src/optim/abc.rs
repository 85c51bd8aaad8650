//! Artificial bee colony.
//!
//! Employed bees perturb their own food source along one random dimension,
//! onlookers all exploit the current best source, and scouts re-seed sources
//! that failed to improve for `abandonment_limit` employed trials.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_dims, evaluate_all, Bounds, Objective, OptResult, Progress, Termination};
use crate::error::{Error, Result};
use crate::seed;

const STREAM_TAG: u64 = 0x41_4243; // "ABC"
const PHASE_INIT: u64 = 0;
const PHASE_EMPLOYED: u64 = 1;
const PHASE_ONLOOKER: u64 = 2;
const PHASE_SCOUT: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbcParams {
    /// Number of food sources (and of employed bees, and of onlookers).
    pub colony_size: usize,
    pub gamma_lo: f64,
    pub gamma_hi: f64,
    /// `None` means `colony_size * dim`.
    #[serde(default)]
    pub abandonment_limit: Option<usize>,
    /// Carried for parity with published parameter tables; not used by the update.
    #[serde(default = "default_alpha")]
    pub randomness_amplitude: f64,
    /// Carried for parity with published parameter tables; not used by the update.
    #[serde(default = "default_beta")]
    pub convergence_speed: f64,
    pub termination: Termination,
}

fn default_alpha() -> f64 {
    0.45
}

fn default_beta() -> f64 {
    0.85
}

impl AbcParams {
    fn table1(colony_size: usize, iterations: usize) -> Self {
        Self {
            colony_size,
            gamma_lo: 0.5,
            gamma_hi: 1.0,
            abandonment_limit: None,
            randomness_amplitude: default_alpha(),
            convergence_speed: default_beta(),
            termination: Termination::iterations(iterations),
        }
    }

    /// Structure-search colony: 30 bees, 50 iterations.
    pub fn table1_tier1() -> Self {
        Self::table1(30, 50)
    }

    /// Weight-training colony: 40 bees, 5000 iterations.
    pub fn table1_tier2() -> Self {
        Self::table1(40, 5000)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParams(format!("abc: {msg}")));
        if self.colony_size < 2 {
            return bad("colony_size must be at least 2");
        }
        if !(self.gamma_lo.is_finite() && self.gamma_hi.is_finite() && self.gamma_lo < self.gamma_hi) {
            return bad("need gamma_lo < gamma_hi");
        }
        if self.abandonment_limit == Some(0) {
            return bad("abandonment_limit must be at least 1");
        }
        self.termination.validate()
    }

    pub fn limit_for(&self, dim: usize) -> usize {
        self.abandonment_limit.unwrap_or(self.colony_size * dim)
    }

    /// Evaluation count excluding scout re-initialisations.
    pub fn evaluation_budget(&self) -> usize {
        self.colony_size * (1 + 2 * self.termination.max_iterations)
    }
}

/// Scout placement: `x_j = lo_j + (hi_j - lo_j) * rand(0, 1)`.
pub fn scout(bounds: &Bounds, rng: &mut impl Rng) -> Vec<f64> {
    bounds.sample(rng)
}

/// Candidate source: copy of `x_i` with `v_j = x_ij + gamma * (x_ij - x_kj)`,
/// clamped to the box.
pub fn candidate(x_i: &[f64], x_k: &[f64], j: usize, gamma: f64, bounds: &Bounds) -> Vec<f64> {
    let mut v = x_i.to_vec();
    v[j] = bounds.clamp_coord(j, x_i[j] + gamma * (x_i[j] - x_k[j]));
    v
}

/// Greedy selection: the candidate wins only on a strictly lower cost.
pub fn select(incumbent: (Vec<f64>, f64), candidate: (Vec<f64>, f64)) -> (Vec<f64>, f64) {
    if candidate.1 < incumbent.1 {
        candidate
    } else {
        incumbent
    }
}

fn draw_candidate(
    rng: &mut impl Rng,
    sources: &[Vec<f64>],
    i: usize,
    params: &AbcParams,
    bounds: &Bounds,
) -> Vec<f64> {
    let n = sources.len();
    let j = rng.random_range(0..bounds.dim());
    let mut k = rng.random_range(0..n - 1);
    if k >= i {
        k += 1;
    }
    let gamma = rng.random_range(params.gamma_lo..=params.gamma_hi);
    candidate(&sources[i], &sources[k], j, gamma, bounds)
}

#[derive(Debug, Clone)]
pub struct Colony {
    pub sources: Vec<Vec<f64>>,
    pub costs: Vec<f64>,
    pub trials: Vec<usize>,
}

/// What happened during one colony iteration.
#[derive(Debug, Clone, Default)]
pub struct StepReport {
    pub evaluations: usize,
    pub scouted: Vec<usize>,
}

impl Colony {
    pub fn init(obj: &dyn Objective, bounds: &Bounds, params: &AbcParams, seed: u64) -> Result<Self> {
        let sources: Vec<Vec<f64>> = (0..params.colony_size)
            .map(|i| scout(bounds, &mut seed::stream(seed, &[STREAM_TAG, 0, PHASE_INIT, i as u64])))
            .collect();
        let costs = evaluate_all(obj, &sources)?;
        Ok(Self {
            trials: vec![0; sources.len()],
            sources,
            costs,
        })
    }

    /// Index of the best source; the lowest index wins ties.
    pub fn best(&self) -> usize {
        let mut b = 0;
        for (i, &c) in self.costs.iter().enumerate() {
            if c < self.costs[b] {
                b = i;
            }
        }
        b
    }

    pub fn step(
        &mut self,
        obj: &dyn Objective,
        bounds: &Bounds,
        params: &AbcParams,
        seed: u64,
        iteration: usize,
    ) -> Result<StepReport> {
        let n = self.sources.len();
        let it = iteration as u64;
        let mut report = StepReport::default();

        // Employed bees: one candidate per source from the phase-start snapshot.
        let cands: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut rng = seed::stream(seed, &[STREAM_TAG, it, PHASE_EMPLOYED, i as u64]);
                draw_candidate(&mut rng, &self.sources, i, params, bounds)
            })
            .collect();
        let cand_costs = evaluate_all(obj, &cands)?;
        report.evaluations += n;
        for (i, (v, fv)) in cands.into_iter().zip(cand_costs).enumerate() {
            if fv < self.costs[i] {
                self.sources[i] = v;
                self.costs[i] = fv;
                self.trials[i] = 0;
            } else {
                self.trials[i] += 1;
            }
        }

        // Onlookers: all exploit the best source O_b.
        let b = self.best();
        let cands: Vec<Vec<f64>> = (0..n)
            .map(|o| {
                let mut rng = seed::stream(seed, &[STREAM_TAG, it, PHASE_ONLOOKER, o as u64]);
                draw_candidate(&mut rng, &self.sources, b, params, bounds)
            })
            .collect();
        let cand_costs = evaluate_all(obj, &cands)?;
        report.evaluations += n;
        for (v, fv) in cands.into_iter().zip(cand_costs) {
            if fv < self.costs[b] {
                self.sources[b] = v;
                self.costs[b] = fv;
                self.trials[b] = 0;
            }
        }

        // Scouts: abandon exhausted sources other than the current best.
        let b = self.best();
        let limit = params.limit_for(bounds.dim());
        let scouted: Vec<usize> = (0..n).filter(|&i| i != b && self.trials[i] >= limit).collect();
        if !scouted.is_empty() {
            let fresh: Vec<Vec<f64>> = scouted
                .iter()
                .map(|&i| scout(bounds, &mut seed::stream(seed, &[STREAM_TAG, it, PHASE_SCOUT, i as u64])))
                .collect();
            let fresh_costs = evaluate_all(obj, &fresh)?;
            report.evaluations += fresh.len();
            for ((&i, x), c) in scouted.iter().zip(fresh).zip(fresh_costs) {
                self.sources[i] = x;
                self.costs[i] = c;
                self.trials[i] = 0;
            }
        }
        report.scouted = scouted;
        Ok(report)
    }
}

pub fn minimize(
    obj: &dyn Objective,
    bounds: &Bounds,
    params: &AbcParams,
    seed: u64,
) -> Result<OptResult> {
    params.validate()?;
    check_dims(obj, bounds)?;
    let mut progress = Progress::new(params.termination);
    let mut colony = Colony::init(obj, bounds, params, seed)?;
    progress.evaluations += params.colony_size;
    let b = colony.best();
    progress.offer(&colony.sources[b], colony.costs[b]);
    progress.finish_init();
    let mut iteration = 0;
    while !progress.done() {
        iteration += 1;
        let report = colony.step(obj, bounds, params, seed, iteration)?;
        progress.evaluations += report.evaluations;
        let b = colony.best();
        progress.offer(&colony.sources[b], colony.costs[b]);
        progress.finish_iteration();
    }
    Ok(progress.into_result())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::FnObjective;

    struct ZeroRng;

    impl rand::RngCore for ZeroRng {
        fn next_u32(&mut self) -> u32 {
            0
        }
        fn next_u64(&mut self) -> u64 {
            0
        }
        fn fill_bytes(&mut self, dst: &mut [u8]) {
            dst.fill(0);
        }
    }

    fn sphere(d: usize) -> FnObjective<impl Fn(&[f64]) -> f64 + Sync> {
        FnObjective::new(d, |x: &[f64]| x.iter().map(|v| v * v).sum())
    }

    #[test]
    fn scout_endpoints() {
        let b = Bounds::new(vec![(0.0, 4.0), (-3.0, -1.0)]).unwrap();
        assert_eq!(b.from_unit(&[0.0, 0.0]), vec![0.0, -3.0]);
        assert_eq!(b.from_unit(&[1.0, 1.0]), vec![4.0, -1.0]);
        assert_eq!(b.from_unit(&[0.5, 0.5]), vec![2.0, -2.0]);
        // A generator stuck at zero lands on the lower corner.
        assert_eq!(scout(&b, &mut ZeroRng), vec![0.0, -3.0]);
    }

    #[test]
    fn candidate_examples() {
        let b = Bounds::uniform(2, -10.0, 10.0).unwrap();
        let x = vec![2.0, 7.0];
        assert_eq!(candidate(&x, &x, 0, 0.8, &b), x);
        assert_eq!(candidate(&x, &[1.0, 0.0], 0, 1.0, &b), vec![3.0, 7.0]);
        assert_eq!(candidate(&x, &[1.0, 0.0], 0, 0.5, &b), vec![2.5, 7.0]);
        // Clamped at the box.
        assert_eq!(candidate(&x, &[1.0, 0.0], 1, 1.0, &b), vec![2.0, 10.0]);
    }

    #[test]
    fn select_examples() {
        let x = (vec![0.0], 5.0);
        let v = (vec![1.0], 3.0);
        assert_eq!(select(x.clone(), v.clone()), v);
        assert_eq!(select((vec![0.0], 3.0), (vec![1.0], 5.0)).0, vec![0.0]);
        assert_eq!(select((vec![0.0], 3.0), (vec![1.0], 3.0)).0, vec![0.0]);
    }

    #[test]
    fn sphere_2d_table1_colony() {
        let p = AbcParams { termination: Termination::iterations(50), ..AbcParams::table1_tier1() };
        let b = Bounds::uniform(2, -5.0, 5.0).unwrap();
        let r = minimize(&sphere(2), &b, &p, 5).unwrap();
        assert!(r.best_value < 1e-3, "{}", r.best_value);
    }

    #[test]
    fn retained_costs_only_drop_except_scouts() {
        let obj = sphere(3);
        let b = Bounds::uniform(3, -5.0, 5.0).unwrap();
        let p = AbcParams { abandonment_limit: Some(3), colony_size: 6, ..AbcParams::table1_tier1() };
        let mut c = Colony::init(&obj, &b, &p, 9).unwrap();
        let mut saw_scout = false;
        for it in 1..60 {
            let before = c.costs.clone();
            let rep = c.step(&obj, &b, &p, 9, it).unwrap();
            saw_scout |= !rep.scouted.is_empty();
            for i in 0..before.len() {
                if !rep.scouted.contains(&i) {
                    assert!(c.costs[i] <= before[i]);
                }
            }
            assert!(c.sources.iter().all(|s| b.contains(s)));
        }
        assert!(saw_scout);
    }

    #[test]
    fn deterministic_and_budgeted() {
        let b = Bounds::uniform(2, -5.0, 5.0).unwrap();
        let p = AbcParams { termination: Termination::iterations(20), ..AbcParams::table1_tier1() };
        let a = minimize(&sphere(2), &b, &p, 77).unwrap();
        assert_eq!(a, minimize(&sphere(2), &b, &p, 77).unwrap());
        assert!(a.evaluations >= p.evaluation_budget());
        assert!(a.evaluations <= p.evaluation_budget() + 20 * p.colony_size);
    }
}
