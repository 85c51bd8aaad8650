//! Two-tier identification: an outer optimiser searches lag structures, and
//! the fitness of each structure is the error reached by an inner optimiser
//! training that structure's network weights.
//!
//! Fitness is a pure function of the structure: every structure trains with a
//! seed derived from its own content, so results can be cached and the outer
//! landscape is reproducible.

use std::collections::{HashMap, HashSet};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{self, Dataset, NormParams};
use crate::error::{Error, Result};
use crate::narx::{
    predict_window, rmse, weight_count, LagSpec, NarxNetwork, OneStepProblem, PredictionMode,
};
use crate::optim::{
    AbcParams, AisParams, Bounds, Objective, OptResult, OptimizerParams, PsoParams,
};
use crate::seed;

const OUTER_TAG: u64 = 0x4f55_5445; // "OUTE"
const TRAIN_TAG: u64 = 0x5452_4149; // "TRAI"
const POLISH_TAG: u64 = 0x504f_4c49; // "POLI"

/// Range of the optional hidden-size search dimension.
pub const HIDDEN_SEARCH_RANGE: (usize, usize) = (2, 32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    AbcAbc,
    AisPso,
    PsoPso,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::AbcAbc, Variant::AisPso, Variant::PsoPso];

    pub fn name(self) -> &'static str {
        match self {
            Variant::AbcAbc => "abc_abc",
            Variant::AisPso => "ais_pso",
            Variant::PsoPso => "pso_pso",
        }
    }

    /// Optimiser names expected for the (outer, inner) tiers.
    pub fn algorithms(self) -> (&'static str, &'static str) {
        match self {
            Variant::AbcAbc => ("abc", "abc"),
            Variant::AisPso => ("ais", "pso"),
            Variant::PsoPso => ("pso", "pso"),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| {
                Error::InvalidParams(format!(
                    "unknown variant `{s}`; expected one of abc_abc, ais_pso, pso_pso"
                ))
            })
    }
}

/// Which data a structure is scored on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitnessSplit {
    /// Error on the samples the weights were trained on.
    Train,
    /// Error on a held-back tail of the training portion.
    Validation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TierConfig {
    pub variant: Variant,
    pub outer: OptimizerParams,
    pub inner: OptimizerParams,
    #[serde(default = "default_max_lag")]
    pub max_lag: usize,
    #[serde(default = "default_hidden")]
    pub hidden_size: usize,
    /// Append the hidden size as an extra outer dimension.
    #[serde(default)]
    pub search_hidden: bool,
    #[serde(default = "default_split")]
    pub fitness_split: FitnessSplit,
    /// Share of the samples used for identification; the rest is the test set.
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    /// Share of the identification samples held back for validation.
    #[serde(default = "default_validation_fraction")]
    pub validation_fraction: f64,
    /// Every weight is searched in `[-weight_bound, weight_bound]`.
    #[serde(default = "default_weight_bound")]
    pub weight_bound: f64,
    /// Inner budget multiplier for the final re-training.
    #[serde(default = "default_polish")]
    pub polish_factor: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_max_lag() -> usize {
    4
}
fn default_hidden() -> usize {
    12
}
fn default_split() -> FitnessSplit {
    FitnessSplit::Validation
}
fn default_train_fraction() -> f64 {
    0.75
}
fn default_validation_fraction() -> f64 {
    0.25
}
fn default_weight_bound() -> f64 {
    0.5
}
fn default_polish() -> usize {
    2
}

impl TierConfig {
    /// A variant with the parameter tables it ships with.
    pub fn preset(variant: Variant) -> Self {
        let (outer, inner) = match variant {
            Variant::AbcAbc => (
                OptimizerParams::Abc(AbcParams::table1_tier1()),
                OptimizerParams::Abc(AbcParams::table1_tier2()),
            ),
            Variant::AisPso => (
                OptimizerParams::Ais(AisParams::table2()),
                OptimizerParams::Pso(PsoParams::table2_tier2()),
            ),
            Variant::PsoPso => (
                OptimizerParams::Pso(PsoParams::table3_tier1()),
                OptimizerParams::Pso(PsoParams::table3_tier2()),
            ),
        };
        Self {
            variant,
            outer,
            inner,
            max_lag: default_max_lag(),
            hidden_size: default_hidden(),
            search_hidden: false,
            fitness_split: default_split(),
            train_fraction: default_train_fraction(),
            validation_fraction: default_validation_fraction(),
            weight_bound: default_weight_bound(),
            polish_factor: default_polish(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (outer, inner) = self.variant.algorithms();
        if self.outer.name() != outer || self.inner.name() != inner {
            return Err(Error::ConfigMismatch(format!(
                "variant {} needs {outer} outer and {inner} inner parameters, got {} and {}",
                self.variant,
                self.outer.name(),
                self.inner.name()
            )));
        }
        self.outer.validate()?;
        self.inner.validate()?;
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if self.max_lag == 0 {
            return bad("max_lag must be at least 1".into());
        }
        if self.hidden_size == 0 {
            return bad("hidden_size must be at least 1".into());
        }
        for (name, f) in [
            ("train_fraction", self.train_fraction),
            ("validation_fraction", self.validation_fraction),
        ] {
            if !(f > 0.0 && f < 1.0) {
                return bad(format!("{name} must lie in (0, 1), got {f}"));
            }
        }
        if !(self.weight_bound > 0.0 && self.weight_bound.is_finite()) {
            return bad(format!("weight_bound must be positive, got {}", self.weight_bound));
        }
        if self.polish_factor == 0 {
            return bad("polish_factor must be at least 1".into());
        }
        Ok(())
    }
}

/// Round half up, then clamp into `[lo, hi]`.
fn round_clamp(z: f64, lo: usize, hi: usize) -> usize {
    let r = (z + 0.5).floor();
    if r <= lo as f64 {
        lo
    } else if r >= hi as f64 {
        hi
    } else {
        r as usize
    }
}

/// Decode a continuous outer point: the first `n_inputs` coordinates become
/// input orders in `[1, max_lag]`, the rest output degrees in `[0, max_lag]`.
pub fn lag_decode(z: &[f64], n_inputs: usize, max_lag: usize) -> Result<LagSpec> {
    if let Some(v) = z.iter().find(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("cannot decode non-finite lag coordinate {v}")));
    }
    if n_inputs > z.len() {
        return Err(Error::Shape {
            what: "outer point length",
            expected: n_inputs + 1,
            actual: z.len(),
        });
    }
    let (u, y) = z.split_at(n_inputs);
    LagSpec::new(
        u.iter().map(|&v| round_clamp(v, 1, max_lag.max(1))).collect(),
        y.iter().map(|&v| round_clamp(v, 0, max_lag)).collect(),
    )
}

/// A network structure: lags plus hidden size.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Structure {
    pub lags: LagSpec,
    pub hidden_size: usize,
}

impl Structure {
    pub fn weight_count(&self) -> usize {
        weight_count(&self.lags, self.hidden_size)
    }

    fn seed_parts(&self, tag: u64) -> Vec<u64> {
        let mut parts = vec![tag, self.hidden_size as u64, self.lags.n_inputs() as u64];
        parts.extend(self.lags.input_orders().iter().map(|&o| o as u64));
        parts.push(self.lags.n_outputs() as u64);
        parts.extend(self.lags.output_degrees().iter().map(|&d| d as u64));
        parts
    }

    /// Training seed: a function of the master seed and the structure only.
    pub fn training_seed(&self, master: u64) -> u64 {
        seed::derive(master, &self.seed_parts(TRAIN_TAG))
    }

    pub fn polish_seed(&self, master: u64) -> u64 {
        seed::derive(master, &self.seed_parts(POLISH_TAG))
    }
}

/// Result of training one structure's weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Trained {
    pub weights: Vec<f64>,
    /// One-step RMSE on the training window.
    pub rmse: f64,
    pub history: Vec<f64>,
    pub evaluations: usize,
}

struct TrainingObjective(OneStepProblem);

impl Objective for TrainingObjective {
    fn dim(&self) -> usize {
        self.0.weight_count()
    }

    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        self.0.rmse(x)
    }
}

/// Train a network of the given structure by minimising the one-step RMSE
/// over samples `start..end` of `data`, with every weight in
/// `[-weight_bound, weight_bound]`.
pub fn train_weights(
    data: &Dataset,
    window: std::ops::Range<usize>,
    structure: &Structure,
    inner: &OptimizerParams,
    weight_bound: f64,
    seed: u64,
) -> Result<Trained> {
    let problem = OneStepProblem::new(
        data,
        structure.lags.clone(),
        structure.hidden_size,
        window.start,
        window.end,
    )?;
    let bounds = Bounds::uniform(problem.weight_count(), -weight_bound, weight_bound)?;
    let OptResult {
        best_point,
        best_value,
        history,
        evaluations,
        ..
    } = inner.minimize(&TrainingObjective(problem), &bounds, seed)?;
    Ok(Trained {
        weights: best_point,
        rmse: best_value,
        history,
        evaluations,
    })
}

/// Identification data after splitting and normalisation.
#[derive(Debug, Clone)]
pub struct Prepared {
    /// Normalised data, all samples.
    pub data: Dataset,
    pub norm: NormParams,
    /// Samples `0..train_len` are used for identification.
    pub train_len: usize,
    /// Weights are fitted on `0..fit_end`; validation is `fit_end..train_len`.
    pub fit_end: usize,
}

impl Prepared {
    /// Split off the test tail, fit the normalisation on the identification
    /// portion only, and mark the validation tail inside it.
    pub fn new(raw: &Dataset, train_fraction: f64, validation_fraction: f64) -> Result<Self> {
        let (train_raw, _) = data::split(raw, train_fraction)?;
        let train_len = train_raw.len();
        let (_, norm) = data::normalize(&train_raw);
        let data = norm.apply(raw)?;
        let fit_end = ((1.0 - validation_fraction) * train_len as f64).floor() as usize;
        if fit_end < 2 || train_len - fit_end < 2 {
            return Err(Error::Split(format!(
                "validation fraction {validation_fraction} leaves fewer than 2 samples on one side of {train_len}"
            )));
        }
        Ok(Self {
            data,
            norm,
            train_len,
            fit_end,
        })
    }

    pub fn from_config(raw: &Dataset, config: &TierConfig) -> Result<Self> {
        Self::new(raw, config.train_fraction, config.validation_fraction)
    }

    /// The identification portion.
    pub fn train(&self) -> Result<Dataset> {
        self.data.slice(0, self.train_len)
    }

    /// Training window and scoring window for a fitness split.
    pub fn windows(&self, split: FitnessSplit) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        match split {
            FitnessSplit::Train => (0..self.train_len, 0..self.train_len),
            FitnessSplit::Validation => (0..self.fit_end, self.fit_end..self.train_len),
        }
    }
}

/// Cached outcome for one structure.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureFit {
    pub trained: Trained,
    /// Score on the configured fitness split.
    pub fitness: f64,
}

/// Everything needed to score a structure.
pub struct FitnessContext {
    train: Dataset,
    split: FitnessSplit,
    fit_window: std::ops::Range<usize>,
    score_window: std::ops::Range<usize>,
    inner: OptimizerParams,
    weight_bound: f64,
    master_seed: u64,
}

impl FitnessContext {
    pub fn new(prepared: &Prepared, config: &TierConfig) -> Result<Self> {
        let (fit_window, score_window) = prepared.windows(config.fitness_split);
        Ok(Self {
            train: prepared.train()?,
            split: config.fitness_split,
            fit_window,
            score_window,
            inner: config.inner.clone(),
            weight_bound: config.weight_bound,
            master_seed: config.seed,
        })
    }

    pub fn inner(&self) -> &OptimizerParams {
        &self.inner
    }

    /// Score a trained weight vector on the fitness split.
    pub fn score(&self, structure: &Structure, trained: &Trained) -> Result<f64> {
        match self.split {
            FitnessSplit::Train => Ok(trained.rmse),
            FitnessSplit::Validation => OneStepProblem::new(
                &self.train,
                structure.lags.clone(),
                structure.hidden_size,
                self.score_window.start,
                self.score_window.end,
            )?
            .rmse(&trained.weights),
        }
    }

    /// Train with the given inner parameters and seed, then score.
    pub fn fit_with(
        &self,
        structure: &Structure,
        inner: &OptimizerParams,
        seed: u64,
    ) -> Result<StructureFit> {
        let trained = train_weights(
            &self.train,
            self.fit_window.clone(),
            structure,
            inner,
            self.weight_bound,
            seed,
        )?;
        let fitness = self.score(structure, &trained)?;
        Ok(StructureFit { trained, fitness })
    }

    /// Train with the structure's own seed; the value cached for it.
    pub fn fit(&self, structure: &Structure) -> Result<StructureFit> {
        self.fit_with(structure, &self.inner, structure.training_seed(self.master_seed))
    }
}

/// Per-structure memo of training results.
///
/// Concurrent inserts of the same structure keep the first value; by
/// determinism every writer holds the same value anyway.
#[derive(Default)]
pub struct FitnessCache {
    entries: Mutex<HashMap<Structure, Arc<StructureFit>>>,
    /// `(structure, inner dimension)` for every training actually run.
    trainings: Mutex<Vec<(Structure, usize)>>,
}

impl FitnessCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, s: &Structure) -> Option<Arc<StructureFit>> {
        self.entries.lock().expect("cache lock").get(s).cloned()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Trainings run so far, sorted by structure.
    pub fn trainings(&self) -> Vec<(Structure, usize)> {
        let mut t = self.trainings.lock().expect("cache lock").clone();
        t.sort();
        t
    }

    /// Look up or train every structure; distinct misses train in parallel.
    pub fn fit_all(
        &self,
        ctx: &FitnessContext,
        structures: &[Structure],
    ) -> Vec<Result<Arc<StructureFit>>> {
        let mut seen = HashSet::new();
        let missing: Vec<&Structure> = structures
            .iter()
            .filter(|s| self.get(s).is_none() && seen.insert(*s))
            .collect();
        let fresh: Vec<(Structure, Result<StructureFit>)> = missing
            .par_iter()
            .map(|s| ((*s).clone(), ctx.fit(s)))
            .collect();
        let mut errors = HashMap::new();
        {
            let mut entries = self.entries.lock().expect("cache lock");
            let mut trainings = self.trainings.lock().expect("cache lock");
            for (s, r) in fresh {
                match r {
                    Ok(fit) => {
                        trainings.push((s.clone(), s.weight_count()));
                        entries.entry(s).or_insert_with(|| Arc::new(fit));
                    }
                    Err(e) => {
                        errors.insert(s, e.to_string());
                    }
                }
            }
        }
        structures
            .iter()
            .map(|s| match errors.get(s) {
                Some(msg) => Err(Error::Domain(format!("training {} failed: {msg}", s.lags))),
                None => Ok(self.get(s).expect("trained above")),
            })
            .collect()
    }

    pub fn fit_one(&self, ctx: &FitnessContext, s: &Structure) -> Result<Arc<StructureFit>> {
        self.fit_all(ctx, std::slice::from_ref(s))
            .pop()
            .expect("one result per structure")
    }
}

/// Outer-tier search space.
#[derive(Debug, Clone)]
pub struct StructureSpace {
    pub n_inputs: usize,
    pub n_outputs: usize,
    pub max_lag: usize,
    /// `None` searches the hidden size as an extra coordinate.
    pub hidden_size: Option<usize>,
}

impl StructureSpace {
    pub fn from_config(config: &TierConfig, n_inputs: usize, n_outputs: usize) -> Self {
        Self {
            n_inputs,
            n_outputs,
            max_lag: config.max_lag,
            hidden_size: (!config.search_hidden).then_some(config.hidden_size),
        }
    }

    pub fn dim(&self) -> usize {
        self.n_inputs + self.n_outputs + usize::from(self.hidden_size.is_none())
    }

    /// `[1, L]` per input, `[0, L]` per output, then `[2, 32]` for the hidden
    /// size if searched. A collapsed input range (`L = 1`) is widened by half
    /// a lag so the box is non-degenerate; decoding clamps it back.
    pub fn bounds(&self) -> Result<Bounds> {
        let l = self.max_lag as f64;
        let input_hi = if self.max_lag == 1 { 1.5 } else { l };
        let mut pairs = vec![(1.0, input_hi); self.n_inputs];
        pairs.extend(std::iter::repeat_n((0.0, l), self.n_outputs));
        if self.hidden_size.is_none() {
            let (lo, hi) = HIDDEN_SEARCH_RANGE;
            pairs.push((lo as f64, hi as f64));
        }
        Bounds::new(pairs)
    }

    pub fn decode(&self, z: &[f64]) -> Result<Structure> {
        if z.len() != self.dim() {
            return Err(Error::Shape {
                what: "outer point length",
                expected: self.dim(),
                actual: z.len(),
            });
        }
        let split = self.n_inputs + self.n_outputs;
        let lags = lag_decode(&z[..split], self.n_inputs, self.max_lag)?;
        let hidden_size = match self.hidden_size {
            Some(h) => h,
            None => {
                let (lo, hi) = HIDDEN_SEARCH_RANGE;
                round_clamp(z[split], lo, hi)
            }
        };
        Ok(Structure { lags, hidden_size })
    }
}

/// Outer objective: decode, then look up or train.
pub struct StructureObjective<'a> {
    pub space: &'a StructureSpace,
    pub ctx: &'a FitnessContext,
    pub cache: &'a FitnessCache,
}

impl Objective for StructureObjective<'_> {
    fn dim(&self) -> usize {
        self.space.dim()
    }

    fn evaluate(&self, z: &[f64]) -> Result<f64> {
        let s = self.space.decode(z)?;
        Ok(self.cache.fit_one(self.ctx, &s)?.fitness)
    }

    fn evaluate_batch(&self, points: &[Vec<f64>]) -> Vec<Result<f64>> {
        let decoded: Vec<Result<Structure>> = points.iter().map(|z| self.space.decode(z)).collect();
        let ok: Vec<Structure> = decoded.iter().filter_map(|d| d.as_ref().ok().cloned()).collect();
        let mut fits = self.cache.fit_all(self.ctx, &ok).into_iter();
        decoded
            .into_iter()
            .map(|d| {
                d.and_then(|_| {
                    fits.next()
                        .expect("one result per decoded point")
                        .map(|f| f.fitness)
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Traces {
    /// Best structure fitness after initialisation and after each outer iteration.
    pub outer: Vec<f64>,
    /// Best training error per inner iteration of the final model.
    pub inner_final: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchStats {
    pub outer_iterations: usize,
    pub outer_evaluations: usize,
    /// Distinct structures trained during the search.
    pub structures_trained: usize,
    /// Inner objective evaluations over all trainings, polish included.
    pub inner_evaluations: usize,
    /// Whether the re-trained model replaced the cached one.
    pub polished: bool,
}

/// A trained model with the structure chosen by the outer search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentifiedModel {
    pub variant: Variant,
    pub lags: LagSpec,
    pub hidden_size: usize,
    pub weights: Vec<f64>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub norm: NormParams,
    /// RMSE of the stored network on the configured fitness split.
    pub fitness: f64,
    /// Cached fitness of the winning structure before re-training.
    pub search_fitness: f64,
    pub seed: u64,
    /// Sum of input orders.
    pub order: usize,
    pub relative_degree: Vec<usize>,
    pub traces: Traces,
    pub stats: SearchStats,
    pub config: TierConfig,
}

impl IdentifiedModel {
    pub fn structure(&self) -> Structure {
        Structure {
            lags: self.lags.clone(),
            hidden_size: self.hidden_size,
        }
    }

    pub fn network(&self) -> Result<NarxNetwork> {
        NarxNetwork::decode_weights(&self.weights, self.lags.clone(), self.hidden_size)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        crate::io::write_json_atomic(path, self)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let model: Self = crate::io::read_json(path)?;
        model.network()?;
        Ok(model)
    }

    /// Error unless `d` carries exactly this model's channels, in order.
    pub fn check_compatible(&self, d: &Dataset) -> Result<()> {
        let (inputs, outputs) = (d.input_names(), d.output_names());
        if inputs != self.inputs || outputs != self.outputs {
            return Err(Error::Compatibility(format!(
                "model expects inputs {:?} and outputs {:?}, data has inputs {:?} and outputs {:?}",
                self.inputs, self.outputs, inputs, outputs
            )));
        }
        Ok(())
    }

    /// Split and normalise raw data the way the search did.
    pub fn prepare(&self, raw: &Dataset) -> Result<Prepared> {
        self.check_compatible(raw)?;
        let mut p = Prepared::from_config(raw, &self.config)?;
        p.data = self.norm.apply(raw)?;
        p.norm = self.norm.clone();
        Ok(p)
    }

    /// Recompute the stored fitness from raw data.
    pub fn recompute_fitness(&self, raw: &Dataset) -> Result<f64> {
        let p = self.prepare(raw)?;
        let (_, window) = p.windows(self.config.fitness_split);
        let train = p.train()?;
        OneStepProblem::new(&train, self.lags.clone(), self.hidden_size, window.start, window.end)?
            .rmse(&self.weights)
    }

    /// Normalised RMSE over samples `window` of raw data in the given mode.
    pub fn window_rmse(
        &self,
        raw: &Dataset,
        mode: PredictionMode,
        window: std::ops::Range<usize>,
    ) -> Result<f64> {
        self.check_compatible(raw)?;
        let d = self.norm.apply(raw)?;
        let start = window.start.max(self.lags.warmup());
        let pred = predict_window(&self.network()?, &d, mode, start, window.end)?;
        rmse(&pred.channels, &pred.actual(&d))
    }

    /// Predictions in physical units for indices `warmup..N` of raw data.
    pub fn predict(&self, raw: &Dataset, mode: PredictionMode) -> Result<crate::narx::Predictions> {
        self.check_compatible(raw)?;
        let d = self.norm.apply(raw)?;
        let mut pred = crate::narx::predict(&self.network()?, &d, mode)?;
        for (ch, name) in pred.channels.iter_mut().zip(&self.outputs) {
            *ch = self.norm.denormalize_channel(name, ch)?;
        }
        Ok(pred)
    }
}

/// Run the outer search over lag structures and return the re-trained winner.
pub fn evolve_order(raw: &Dataset, config: &TierConfig) -> Result<IdentifiedModel> {
    config.validate()?;
    let prepared = Prepared::from_config(raw, config)?;
    let ctx = FitnessContext::new(&prepared, config)?;
    let cache = FitnessCache::new();
    evolve_with_cache(raw, config, &prepared, &ctx, &cache)
}

/// [`evolve_order`] with caller-provided preprocessing and cache, so the
/// trainings it ran can be inspected afterwards.
pub fn evolve_with_cache(
    raw: &Dataset,
    config: &TierConfig,
    prepared: &Prepared,
    ctx: &FitnessContext,
    cache: &FitnessCache,
) -> Result<IdentifiedModel> {
    config.validate()?;
    let space = StructureSpace::from_config(config, raw.n_inputs(), raw.n_outputs());
    let bounds = space.bounds()?;
    let objective = StructureObjective {
        space: &space,
        ctx,
        cache,
    };
    let outer_seed = seed::derive(config.seed, &[OUTER_TAG]);
    let outer = config.outer.minimize(&objective, &bounds, outer_seed)?;
    let winner = space.decode(&outer.best_point)?;
    let cached = cache.fit_one(ctx, &winner)?;

    let polish_inner = config
        .inner
        .with_termination(config.inner.termination().scaled(config.polish_factor));
    let polished = ctx.fit_with(&winner, &polish_inner, winner.polish_seed(config.seed))?;
    let use_polished = polished.fitness < cached.fitness;
    let final_fit: &StructureFit = if use_polished { &polished } else { &cached };

    let inner_evaluations = cache
        .trainings()
        .iter()
        .map(|(s, _)| cache.get(s).map_or(0, |f| f.trained.evaluations))
        .sum::<usize>()
        + polished.trained.evaluations;

    Ok(IdentifiedModel {
        variant: config.variant,
        order: winner.lags.order(),
        relative_degree: winner.lags.output_degrees().to_vec(),
        lags: winner.lags.clone(),
        hidden_size: winner.hidden_size,
        weights: final_fit.trained.weights.clone(),
        inputs: raw.input_names(),
        outputs: raw.output_names(),
        norm: prepared.norm.clone(),
        fitness: final_fit.fitness,
        search_fitness: cached.fitness,
        seed: config.seed,
        traces: Traces {
            outer: outer.history,
            inner_final: final_fit.trained.history.clone(),
        },
        stats: SearchStats {
            outer_iterations: outer.iterations_run,
            outer_evaluations: outer.evaluations,
            structures_trained: cache.trainings().len(),
            inner_evaluations,
            polished: use_polished,
        },
        config: config.clone(),
    })
}
