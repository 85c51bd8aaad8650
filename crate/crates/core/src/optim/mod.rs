//! Derivative-free box-bounded minimisers sharing one black-box contract.
//!
//! All three algorithms draw their randomness from per-member streams derived
//! from `(seed, iteration, member)`, and evaluate a whole population as one
//! batch. Results are therefore independent of how the batch is scheduled.

pub mod abc;
pub mod functions;
pub mod ais;
pub mod pso;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use abc::AbcParams;
pub use ais::AisParams;
pub use pso::PsoParams;

/// A cost function over a fixed-dimension real vector.
///
/// Implementations must be pure: the same point always yields the same cost.
pub trait Objective: Sync {
    fn dim(&self) -> usize;

    fn evaluate(&self, x: &[f64]) -> Result<f64>;

    /// Evaluate a population. Results are returned in input order.
    fn evaluate_batch(&self, points: &[Vec<f64>]) -> Vec<Result<f64>> {
        points.par_iter().map(|p| self.evaluate(p)).collect()
    }
}

/// Adapter turning a closure into an [`Objective`].
pub struct FnObjective<F> {
    dim: usize,
    f: F,
}

impl<F> FnObjective<F>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> Objective for FnObjective<F>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        Ok((self.f)(x))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct Bounds {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Bounds {
    pub fn new(pairs: Vec<(f64, f64)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidParams("bounds need at least one dimension".into()));
        }
        for (d, &(lo, hi)) in pairs.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidParams(format!(
                    "dimension {d}: need finite lo < hi, got [{lo}, {hi}]"
                )));
            }
        }
        let (lo, hi) = pairs.into_iter().unzip();
        Ok(Self { lo, hi })
    }

    pub fn uniform(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![(lo, hi); dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn width(&self, d: usize) -> f64 {
        self.hi[d] - self.lo[d]
    }

    pub fn clamp_coord(&self, d: usize, v: f64) -> f64 {
        v.clamp(self.lo[d], self.hi[d])
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (d, v) in x.iter_mut().enumerate() {
            *v = self.clamp_coord(d, *v);
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .enumerate()
                .all(|(d, &v)| v >= self.lo[d] && v <= self.hi[d])
    }

    /// Map unit-cube coordinates onto the box: `lo + (hi - lo) * u`.
    pub fn from_unit(&self, unit: &[f64]) -> Vec<f64> {
        unit.iter()
            .enumerate()
            .map(|(d, &u)| self.clamp_coord(d, self.lo[d] + self.width(d) * u))
            .collect()
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Vec<f64> {
        let unit: Vec<f64> = (0..self.dim()).map(|_| rng.random::<f64>()).collect();
        self.from_unit(&unit)
    }
}

impl TryFrom<Vec<(f64, f64)>> for Bounds {
    type Error = Error;

    fn try_from(pairs: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(pairs)
    }
}

impl From<Bounds> for Vec<(f64, f64)> {
    fn from(b: Bounds) -> Self {
        b.lo.into_iter().zip(b.hi).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Termination {
    pub max_iterations: usize,
    /// Stop after this many consecutive iterations without a strict
    /// improvement of the best value.
    #[serde(default)]
    pub stall_iterations: Option<usize>,
}

impl Termination {
    pub fn iterations(max_iterations: usize) -> Self {
        Self {
            max_iterations,
            stall_iterations: None,
        }
    }

    pub fn with_stall(mut self, stall: usize) -> Self {
        self.stall_iterations = Some(stall);
        self
    }

    /// Multiply both budgets; used for the final re-training.
    pub fn scaled(self, factor: usize) -> Self {
        Self {
            max_iterations: self.max_iterations * factor,
            stall_iterations: self.stall_iterations.map(|s| s * factor),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.stall_iterations == Some(0) {
            return Err(Error::InvalidParams("stall_iterations must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub best_point: Vec<f64>,
    pub best_value: f64,
    /// Best-so-far value after initialisation and after every iteration.
    pub history: Vec<f64>,
    pub evaluations: usize,
    pub iterations_run: usize,
}

/// Any of the three minimisers with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum OptimizerParams {
    Pso(PsoParams),
    Abc(AbcParams),
    Ais(AisParams),
}

impl OptimizerParams {
    pub fn minimize(&self, obj: &dyn Objective, bounds: &Bounds, seed: u64) -> Result<OptResult> {
        match self {
            OptimizerParams::Pso(p) => pso::minimize(obj, bounds, p, seed),
            OptimizerParams::Abc(p) => abc::minimize(obj, bounds, p, seed),
            OptimizerParams::Ais(p) => ais::minimize(obj, bounds, p, seed),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            OptimizerParams::Pso(_) => "pso",
            OptimizerParams::Abc(_) => "abc",
            OptimizerParams::Ais(_) => "ais",
        }
    }

    pub fn termination(&self) -> Termination {
        match self {
            OptimizerParams::Pso(p) => p.termination,
            OptimizerParams::Abc(p) => p.termination,
            OptimizerParams::Ais(p) => p.termination,
        }
    }

    pub fn with_termination(&self, t: Termination) -> Self {
        let mut out = self.clone();
        match &mut out {
            OptimizerParams::Pso(p) => p.termination = t,
            OptimizerParams::Abc(p) => p.termination = t,
            OptimizerParams::Ais(p) => p.termination = t,
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            OptimizerParams::Pso(p) => p.validate(),
            OptimizerParams::Abc(p) => p.validate(),
            OptimizerParams::Ais(p) => p.validate(),
        }
    }
}

/// Batch evaluation with finiteness checking.
pub(crate) fn evaluate_all(obj: &dyn Objective, points: &[Vec<f64>]) -> Result<Vec<f64>> {
    let values = obj.evaluate_batch(points);
    points
        .iter()
        .zip(values)
        .map(|(p, v)| {
            let v = v?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFiniteObjective {
                    point: p.clone(),
                    value: v,
                })
            }
        })
        .collect()
}

pub(crate) fn check_dims(obj: &dyn Objective, bounds: &Bounds) -> Result<()> {
    if obj.dim() != bounds.dim() {
        return Err(Error::Shape {
            what: "objective dimension vs bounds",
            expected: bounds.dim(),
            actual: obj.dim(),
        });
    }
    Ok(())
}

/// Best-so-far bookkeeping and the stall counter.
#[derive(Debug, Clone)]
pub(crate) struct Progress {
    pub best_point: Vec<f64>,
    pub best_value: f64,
    pub history: Vec<f64>,
    pub evaluations: usize,
    pub iterations: usize,
    stall: usize,
    termination: Termination,
}

impl Progress {
    pub fn new(termination: Termination) -> Self {
        Self {
            best_point: Vec::new(),
            best_value: f64::INFINITY,
            history: Vec::new(),
            evaluations: 0,
            iterations: 0,
            stall: 0,
            termination,
        }
    }

    /// Offer a candidate; strict improvement only, so ties keep the incumbent.
    pub fn offer(&mut self, point: &[f64], value: f64) -> bool {
        if value < self.best_value {
            self.best_value = value;
            self.best_point.clear();
            self.best_point.extend_from_slice(point);
            true
        } else {
            false
        }
    }

    pub fn finish_init(&mut self) {
        self.history.push(self.best_value);
    }

    pub fn finish_iteration(&mut self) {
        let improved = self.history.last().is_none_or(|&prev| self.best_value < prev);
        self.iterations += 1;
        self.history.push(self.best_value);
        self.stall = if improved { 0 } else { self.stall + 1 };
    }

    pub fn done(&self) -> bool {
        self.iterations >= self.termination.max_iterations
            || self
                .termination
                .stall_iterations
                .is_some_and(|s| self.stall >= s)
    }

    pub fn into_result(self) -> OptResult {
        OptResult {
            best_point: self.best_point,
            best_value: self.best_value,
            history: self.history,
            evaluations: self.evaluations,
            iterations_run: self.iterations,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_validation() {
        assert!(Bounds::new(vec![(1.0, 1.0)]).is_err());
        assert!(Bounds::new(vec![(0.0, f64::INFINITY)]).is_err());
        let b = Bounds::new(vec![(0.0, 4.0), (-1.0, 1.0)]).unwrap();
        assert_eq!(b.from_unit(&[0.5, 1.0]), vec![2.0, 1.0]);
        assert!(b.contains(&[4.0, -1.0]));
        assert!(!b.contains(&[4.1, 0.0]));
    }

    #[test]
    fn stall_counter_stops() {
        let mut p = Progress::new(Termination::iterations(100).with_stall(2));
        p.offer(&[0.0], 1.0);
        p.finish_init();
        p.finish_iteration();
        assert!(!p.done());
        p.finish_iteration();
        assert!(p.done());
    }

    #[test]
    fn non_finite_cost_is_reported_with_point() {
        let obj = FnObjective::new(1, |x: &[f64]| if x[0] > 0.5 { f64::NAN } else { x[0] });
        let err = evaluate_all(&obj, &[vec![0.1], vec![0.9]]).unwrap_err();
        match err {
            Error::NonFiniteObjective { point, .. } => assert_eq!(point, vec![0.9]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn params_serde_is_tagged() {
        let p = OptimizerParams::Pso(PsoParams::table3_tier2());
        let text = serde_json::to_string(&p).unwrap();
        assert!(text.contains("\"algorithm\":\"pso\""));
        let back: OptimizerParams = serde_json::from_str(&text).unwrap();
        assert_eq!(back, p);
    }
}
