//! Run reports: every figure is recomputed from a model file and a dataset.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use narx_core::two_tier::{FitnessSplit, IdentifiedModel, SearchStats, TierConfig, Variant};
use narx_core::{Dataset, LagSpec, PredictionMode};

use crate::CliError;

/// Largest discrepancy tolerated by `report --verify`.
pub const VERIFY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeErrors {
    pub one_step: f64,
    pub free_run: f64,
}

/// Normalised RMSE per data window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowErrors {
    pub train: ModeErrors,
    pub validation: ModeErrors,
    pub test: ModeErrors,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Windows {
    pub samples: usize,
    /// Weights were fitted on `0..fit_end`.
    pub fit_end: usize,
    /// Validation is `fit_end..train_end`, test is `train_end..samples`.
    pub train_end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToleranceCheck {
    pub epsilon: f64,
    /// `max |y - y_hat|` over every output and predicted sample, physical units.
    pub max_abs_error_one_step: f64,
    pub max_abs_error_free_run: f64,
    pub satisfied_one_step: bool,
    pub satisfied_free_run: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSummary {
    pub search_fitness: f64,
    pub outer_trace: Vec<f64>,
    pub stats: SearchStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub variant: Variant,
    pub lags: LagSpec,
    pub order: usize,
    pub relative_degree: Vec<usize>,
    pub hidden_size: usize,
    pub weight_count: usize,
    pub fitness_split: FitnessSplit,
    /// Fitness on the configured split, recomputed from the data.
    pub fitness: f64,
    pub windows: Windows,
    pub errors: WindowErrors,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<ToleranceCheck>,
    pub search: SearchSummary,
    pub config: TierConfig,
    /// Excluded from verification.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_seconds: Option<f64>,
}

fn errors_in(
    model: &IdentifiedModel,
    data: &Dataset,
    window: std::ops::Range<usize>,
) -> Result<ModeErrors, CliError> {
    Ok(ModeErrors {
        one_step: model.window_rmse(data, PredictionMode::OneStep, window.clone())?,
        free_run: model.window_rmse(data, PredictionMode::FreeRun, window)?,
    })
}

fn max_abs_error(model: &IdentifiedModel, data: &Dataset, mode: PredictionMode) -> Result<f64, CliError> {
    let pred = model.predict(data, mode)?;
    let actual = pred.actual(data);
    Ok(pred
        .channels
        .iter()
        .zip(&actual)
        .flat_map(|(p, a)| p.iter().zip(a).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max))
}

pub fn tolerance_check(
    model: &IdentifiedModel,
    data: &Dataset,
    epsilon: f64,
) -> Result<ToleranceCheck, CliError> {
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(CliError::Usage(format!("epsilon must be >= 0, got {epsilon}")));
    }
    let one = max_abs_error(model, data, PredictionMode::OneStep)?;
    let free = max_abs_error(model, data, PredictionMode::FreeRun)?;
    Ok(ToleranceCheck {
        epsilon,
        max_abs_error_one_step: one,
        max_abs_error_free_run: free,
        satisfied_one_step: one <= epsilon,
        satisfied_free_run: free <= epsilon,
    })
}

impl RunReport {
    pub fn build(
        model: &IdentifiedModel,
        data: &Dataset,
        epsilon: Option<f64>,
    ) -> Result<Self, CliError> {
        let p = model.prepare(data)?;
        let windows = Windows {
            samples: data.len(),
            fit_end: p.fit_end,
            train_end: p.train_len,
        };
        let errors = WindowErrors {
            train: errors_in(model, data, 0..p.fit_end)?,
            validation: errors_in(model, data, p.fit_end..p.train_len)?,
            test: errors_in(model, data, p.train_len..data.len())?,
        };
        Ok(Self {
            variant: model.variant,
            lags: model.lags.clone(),
            order: model.lags.order(),
            relative_degree: model.lags.output_degrees().to_vec(),
            hidden_size: model.hidden_size,
            weight_count: model.weights.len(),
            fitness_split: model.config.fitness_split,
            fitness: model.recompute_fitness(data)?,
            windows,
            errors,
            tolerance: epsilon
                .map(|e| tolerance_check(model, data, e))
                .transpose()?,
            search: SearchSummary {
                search_fitness: model.search_fitness,
                outer_trace: model.traces.outer.clone(),
                stats: model.stats.clone(),
            },
            config: model.config.clone(),
            wall_clock_seconds: None,
        })
    }
}

fn diff(path: &str, a: &Value, b: &Value, out: &mut Vec<String>) {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => {
            let (x, y) = (x.as_f64().unwrap_or(f64::NAN), y.as_f64().unwrap_or(f64::NAN));
            if !((x - y).abs() <= VERIFY_TOLERANCE) {
                out.push(format!("{path}: stored {x}, recomputed {y}"));
            }
        }
        (Value::Object(x), Value::Object(y)) => {
            for (k, v) in x {
                if k == "wall_clock_seconds" {
                    continue;
                }
                match y.get(k) {
                    Some(w) => diff(&format!("{path}.{k}"), v, w, out),
                    None => out.push(format!("{path}.{k}: not recomputed")),
                }
            }
            for k in y.keys() {
                if k != "wall_clock_seconds" && !x.contains_key(k) {
                    out.push(format!("{path}.{k}: missing from stored report"));
                }
            }
        }
        (Value::Array(x), Value::Array(y)) if x.len() == y.len() => {
            for (i, (v, w)) in x.iter().zip(y).enumerate() {
                diff(&format!("{path}[{i}]"), v, w, out);
            }
        }
        _ if a == b => {}
        _ => out.push(format!("{path}: stored {a}, recomputed {b}")),
    }
}

/// Compare a stored report with a recomputed one; lists every field that
/// differs by more than [`VERIFY_TOLERANCE`].
pub fn verify(stored: &Value, recomputed: &RunReport) -> Result<(), CliError> {
    let fresh = serde_json::to_value(recomputed).expect("report serialises");
    let mut out = Vec::new();
    diff("report", stored, &fresh, &mut out);
    if out.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification(out.join("; ")))
    }
}
