//! NARX-style one-hidden-layer network fed by a tapped-delay-line regressor.
//!
//! Regressor layout, in channel order: for input `i` the taps
//! `u_i(k), u_i(k-1), ..., u_i(k-ord_i+1)`, followed for output `j` by
//! `y_j(k-1), ..., y_j(k-deg_j)`. The hidden layer is `tanh`, the output layer
//! linear; both carry a bias stored as the last column of their weight matrix.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Tap counts per channel: `input_orders[i]` input taps (current value
/// included) and `output_degrees[j]` strictly-past output taps.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawLagSpec")]
pub struct LagSpec {
    input_orders: Vec<usize>,
    output_degrees: Vec<usize>,
}

impl LagSpec {
    pub fn new(input_orders: Vec<usize>, output_degrees: Vec<usize>) -> Result<Self> {
        if input_orders.is_empty() || output_degrees.is_empty() {
            return Err(Error::InvalidParams(
                "lag spec needs at least one input and one output".into(),
            ));
        }
        if let Some(i) = input_orders.iter().position(|&o| o == 0) {
            return Err(Error::InvalidParams(format!(
                "input order for channel {i} must be at least 1"
            )));
        }
        Ok(Self {
            input_orders,
            output_degrees,
        })
    }

    pub fn input_orders(&self) -> &[usize] {
        &self.input_orders
    }

    pub fn output_degrees(&self) -> &[usize] {
        &self.output_degrees
    }

    pub fn n_inputs(&self) -> usize {
        self.input_orders.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.output_degrees.len()
    }

    /// Sum of input taps, reported as the model order.
    pub fn order(&self) -> usize {
        self.input_orders.iter().sum()
    }

    /// First time index whose full history exists.
    pub fn warmup(&self) -> usize {
        let inp = self.input_orders.iter().map(|&o| o - 1).max().unwrap_or(0);
        let out = self.output_degrees.iter().copied().max().unwrap_or(0);
        inp.max(out)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLagSpec {
    input_orders: Vec<usize>,
    output_degrees: Vec<usize>,
}

impl TryFrom<RawLagSpec> for LagSpec {
    type Error = Error;

    fn try_from(raw: RawLagSpec) -> Result<Self> {
        LagSpec::new(raw.input_orders, raw.output_degrees)
    }
}

impl std::fmt::Display for LagSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ord={:?} deg={:?}", self.input_orders, self.output_degrees)
    }
}

pub fn regressor_length(lags: &LagSpec) -> usize {
    lags.input_orders.iter().sum::<usize>() + lags.output_degrees.iter().sum::<usize>()
}

/// Number of trainable weights for a given structure.
pub fn weight_count(lags: &LagSpec, hidden: usize) -> usize {
    let r = regressor_length(lags);
    let n = lags.n_outputs();
    hidden * (r + 1) + n * (hidden + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionMode {
    /// Measured outputs fill the output taps (series-parallel).
    OneStep,
    /// The model's own predictions fill the output taps after warm-up (parallel).
    FreeRun,
}

fn fill_regressor(
    inputs: &[&[f64]],
    outputs: &[&[f64]],
    lags: &LagSpec,
    k: usize,
    out: &mut Vec<f64>,
) {
    out.clear();
    for (u, &ord) in inputs.iter().zip(&lags.input_orders) {
        out.extend((0..ord).map(|t| u[k - t]));
    }
    for (y, &deg) in outputs.iter().zip(&lags.output_degrees) {
        out.extend((1..=deg).map(|t| y[k - t]));
    }
}

fn check_dataset(d: &Dataset, lags: &LagSpec) -> Result<()> {
    if d.n_inputs() != lags.n_inputs() {
        return Err(Error::Shape {
            what: "input channel count",
            expected: lags.n_inputs(),
            actual: d.n_inputs(),
        });
    }
    if d.n_outputs() != lags.n_outputs() {
        return Err(Error::Shape {
            what: "output channel count",
            expected: lags.n_outputs(),
            actual: d.n_outputs(),
        });
    }
    Ok(())
}

/// Assemble the regressor at time `k`.
///
/// In free-run mode `fed_back` holds one series per output channel aligned with
/// the dataset; entries before the warm-up horizon are ignored in favour of the
/// measured values.
pub fn build_regressor(
    d: &Dataset,
    lags: &LagSpec,
    k: usize,
    mode: PredictionMode,
    fed_back: Option<&[Vec<f64>]>,
) -> Result<Vec<f64>> {
    check_dataset(d, lags)?;
    let warmup = lags.warmup();
    if k < warmup {
        return Err(Error::Index { k, warmup });
    }
    if k >= d.len() {
        return Err(Error::Domain(format!(
            "time index {k} beyond dataset length {}",
            d.len()
        )));
    }
    let inputs = d.input_values();
    let measured = d.output_values();
    let mut reg = Vec::with_capacity(regressor_length(lags));
    match (mode, fed_back) {
        (PredictionMode::FreeRun, Some(fb)) => {
            if fb.len() != d.n_outputs() {
                return Err(Error::Shape {
                    what: "fed-back channel count",
                    expected: d.n_outputs(),
                    actual: fb.len(),
                });
            }
            let mixed: Vec<Vec<f64>> = measured
                .iter()
                .zip(fb)
                .map(|(m, p)| {
                    (0..=k)
                        .map(|t| if t < warmup { m[t] } else { p.get(t).copied().unwrap_or(m[t]) })
                        .collect()
                })
                .collect();
            let views: Vec<&[f64]> = mixed.iter().map(Vec::as_slice).collect();
            fill_regressor(&inputs, &views, lags, k, &mut reg);
        }
        _ => fill_regressor(&inputs, &measured, lags, k, &mut reg),
    }
    Ok(reg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NarxNetwork {
    lags: LagSpec,
    hidden_size: usize,
    n_outputs: usize,
    /// `H x (R+1)`, row-major, bias last.
    weights_hidden: Vec<f64>,
    /// `n x (H+1)`, row-major, bias last.
    weights_output: Vec<f64>,
}

impl NarxNetwork {
    pub fn zeros(lags: LagSpec, hidden_size: usize) -> Result<Self> {
        if hidden_size == 0 {
            return Err(Error::InvalidParams("hidden size must be positive".into()));
        }
        let r = regressor_length(&lags);
        let n = lags.n_outputs();
        Ok(Self {
            weights_hidden: vec![0.0; hidden_size * (r + 1)],
            weights_output: vec![0.0; n * (hidden_size + 1)],
            lags,
            hidden_size,
            n_outputs: n,
        })
    }

    pub fn lags(&self) -> &LagSpec {
        &self.lags
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden_size
    }

    pub fn n_outputs(&self) -> usize {
        self.n_outputs
    }

    pub fn regressor_length(&self) -> usize {
        regressor_length(&self.lags)
    }

    pub fn weight_count(&self) -> usize {
        self.weights_hidden.len() + self.weights_output.len()
    }

    pub fn weights_hidden(&self) -> &[f64] {
        &self.weights_hidden
    }

    pub fn weights_output(&self) -> &[f64] {
        &self.weights_output
    }

    pub fn weights_hidden_mut(&mut self) -> &mut [f64] {
        &mut self.weights_hidden
    }

    pub fn weights_output_mut(&mut self) -> &mut [f64] {
        &mut self.weights_output
    }

    pub fn forward(&self, regressor: &[f64]) -> Result<Vec<f64>> {
        let r = self.regressor_length();
        if regressor.len() != r {
            return Err(Error::Shape {
                what: "regressor length",
                expected: r,
                actual: regressor.len(),
            });
        }
        let mut hidden = vec![0.0; self.hidden_size];
        let mut out = vec![0.0; self.n_outputs];
        forward_raw(
            &self.weights_hidden,
            &self.weights_output,
            self.hidden_size,
            regressor,
            &mut hidden,
            &mut out,
        );
        Ok(out)
    }

    /// Flat layout: hidden matrix row-major, then output matrix row-major.
    pub fn encode_weights(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.weight_count());
        flat.extend_from_slice(&self.weights_hidden);
        flat.extend_from_slice(&self.weights_output);
        flat
    }

    pub fn decode_weights(flat: &[f64], lags: LagSpec, hidden_size: usize) -> Result<Self> {
        let mut net = Self::zeros(lags, hidden_size)?;
        let expected = net.weight_count();
        if flat.len() != expected {
            return Err(Error::Shape {
                what: "flat weight vector length",
                expected,
                actual: flat.len(),
            });
        }
        if flat.iter().any(|w| !w.is_finite()) {
            return Err(Error::Domain("weights must be finite".into()));
        }
        let split = net.weights_hidden.len();
        net.weights_hidden.copy_from_slice(&flat[..split]);
        net.weights_output.copy_from_slice(&flat[split..]);
        Ok(net)
    }
}

#[inline]
fn forward_raw(
    w_hidden: &[f64],
    w_out: &[f64],
    hidden_size: usize,
    reg: &[f64],
    hidden: &mut [f64],
    out: &mut [f64],
) {
    let stride = reg.len() + 1;
    for (h, row) in hidden.iter_mut().zip(w_hidden.chunks_exact(stride)) {
        let s: f64 = row[..reg.len()].iter().zip(reg).map(|(w, x)| w * x).sum();
        *h = (s + row[reg.len()]).tanh();
    }
    for (o, row) in out.iter_mut().zip(w_out.chunks_exact(hidden_size + 1)) {
        let s: f64 = row[..hidden_size].iter().zip(&*hidden).map(|(w, x)| w * x).sum();
        *o = s + row[hidden_size];
    }
}

/// Predicted output channels for the contiguous time indices `start..start+len`.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub start: usize,
    pub channels: Vec<Vec<f64>>,
}

impl Predictions {
    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn end(&self) -> usize {
        self.start + self.len()
    }

    /// Matching window of measured outputs from `d`.
    pub fn actual(&self, d: &Dataset) -> Vec<Vec<f64>> {
        d.outputs()
            .iter()
            .map(|c| c.values[self.start..self.end()].to_vec())
            .collect()
    }

    /// Restrict to time indices `from..` (clamped to the predicted window).
    pub fn tail_from(&self, from: usize) -> Predictions {
        let from = from.clamp(self.start, self.end());
        let skip = from - self.start;
        Predictions {
            start: from,
            channels: self.channels.iter().map(|c| c[skip..].to_vec()).collect(),
        }
    }
}

/// Predict every index from the warm-up horizon to the end of `d`.
pub fn predict(net: &NarxNetwork, d: &Dataset, mode: PredictionMode) -> Result<Predictions> {
    let warmup = net.lags.warmup();
    if d.len() <= warmup {
        return Err(Error::InsufficientData(format!(
            "{} samples do not cover the warm-up horizon {warmup} plus one prediction",
            d.len()
        )));
    }
    predict_window(net, d, mode, warmup, d.len())
}

/// Predict indices `start..end`. History before `start` is always the measured
/// data; in free-run mode predictions from `start` onward are fed back.
pub fn predict_window(
    net: &NarxNetwork,
    d: &Dataset,
    mode: PredictionMode,
    start: usize,
    end: usize,
) -> Result<Predictions> {
    check_dataset(d, &net.lags)?;
    let warmup = net.lags.warmup();
    if start < warmup {
        return Err(Error::Index { k: start, warmup });
    }
    if start >= end || end > d.len() {
        return Err(Error::InsufficientData(format!(
            "empty or out-of-range prediction window {start}..{end} for {} samples",
            d.len()
        )));
    }
    let inputs = d.input_values();
    let mut history: Vec<Vec<f64>> = match mode {
        PredictionMode::FreeRun => d.outputs().iter().map(|c| c.values.clone()).collect(),
        PredictionMode::OneStep => Vec::new(),
    };
    let measured = d.output_values();
    let n = net.n_outputs;
    let mut channels = vec![Vec::with_capacity(end - start); n];
    let mut reg = Vec::with_capacity(net.regressor_length());
    let mut hidden = vec![0.0; net.hidden_size];
    let mut out = vec![0.0; n];
    for k in start..end {
        match mode {
            PredictionMode::OneStep => fill_regressor(&inputs, &measured, &net.lags, k, &mut reg),
            PredictionMode::FreeRun => {
                let views: Vec<&[f64]> = history.iter().map(Vec::as_slice).collect();
                fill_regressor(&inputs, &views, &net.lags, k, &mut reg);
            }
        }
        forward_raw(
            &net.weights_hidden,
            &net.weights_output,
            net.hidden_size,
            &reg,
            &mut hidden,
            &mut out,
        );
        for (j, &v) in out.iter().enumerate() {
            channels[j].push(v);
            if mode == PredictionMode::FreeRun {
                history[j][k] = v;
            }
        }
    }
    Ok(Predictions { start, channels })
}

/// Root mean square of residuals pooled over every channel and time step.
pub fn rmse(predicted: &[Vec<f64>], actual: &[Vec<f64>]) -> Result<f64> {
    if predicted.len() != actual.len() {
        return Err(Error::Shape {
            what: "channel count",
            expected: actual.len(),
            actual: predicted.len(),
        });
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (p, a) in predicted.iter().zip(actual) {
        if p.len() != a.len() {
            return Err(Error::Shape {
                what: "channel length",
                expected: a.len(),
                actual: p.len(),
            });
        }
        sum += p.iter().zip(a).map(|(x, y)| (y - x) * (y - x)).sum::<f64>();
        count += p.len();
    }
    if count == 0 {
        return Err(Error::Domain("rmse of zero samples is undefined".into()));
    }
    Ok((sum / count as f64).sqrt())
}

/// One-step-ahead training problem with all regressors precomputed.
///
/// Evaluates the same quantity as `rmse(predict(.., OneStep), actual)` over a
/// window, without building a network or re-assembling regressors per call.
#[derive(Debug, Clone)]
pub struct OneStepProblem {
    lags: LagSpec,
    hidden_size: usize,
    reg_len: usize,
    rows: usize,
    regressors: Vec<f64>,
    /// Row-major `rows x n`.
    targets: Vec<f64>,
}

impl OneStepProblem {
    /// Targets are the measured outputs at indices `max(start, warmup)..end`.
    pub fn new(
        d: &Dataset,
        lags: LagSpec,
        hidden_size: usize,
        start: usize,
        end: usize,
    ) -> Result<Self> {
        check_dataset(d, &lags)?;
        if hidden_size == 0 {
            return Err(Error::InvalidParams("hidden size must be positive".into()));
        }
        let start = start.max(lags.warmup());
        if start >= end || end > d.len() {
            return Err(Error::InsufficientData(format!(
                "no predictable samples in {start}..{end} for {} samples",
                d.len()
            )));
        }
        let inputs = d.input_values();
        let outputs = d.output_values();
        let reg_len = regressor_length(&lags);
        let rows = end - start;
        let mut regressors = Vec::with_capacity(rows * reg_len);
        let mut targets = Vec::with_capacity(rows * outputs.len());
        let mut reg = Vec::with_capacity(reg_len);
        for k in start..end {
            fill_regressor(&inputs, &outputs, &lags, k, &mut reg);
            regressors.extend_from_slice(&reg);
            targets.extend(outputs.iter().map(|y| y[k]));
        }
        Ok(Self {
            lags,
            hidden_size,
            reg_len,
            rows,
            regressors,
            targets,
        })
    }

    pub fn lags(&self) -> &LagSpec {
        &self.lags
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden_size
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn weight_count(&self) -> usize {
        weight_count(&self.lags, self.hidden_size)
    }

    pub fn rmse(&self, flat: &[f64]) -> Result<f64> {
        let w = self.weight_count();
        if flat.len() != w {
            return Err(Error::Shape {
                what: "flat weight vector length",
                expected: w,
                actual: flat.len(),
            });
        }
        let n = self.lags.n_outputs();
        let split = self.hidden_size * (self.reg_len + 1);
        let (wh, wo) = flat.split_at(split);
        let mut hidden = vec![0.0; self.hidden_size];
        let mut out = vec![0.0; n];
        let mut sum = 0.0;
        for (reg, target) in self
            .regressors
            .chunks_exact(self.reg_len.max(1))
            .zip(self.targets.chunks_exact(n))
            .take(self.rows)
        {
            let reg = &reg[..self.reg_len];
            forward_raw(wh, wo, self.hidden_size, reg, &mut hidden, &mut out);
            sum += out
                .iter()
                .zip(target)
                .map(|(p, y)| (y - p) * (y - p))
                .sum::<f64>();
        }
        Ok((sum / (self.rows * n) as f64).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Channel;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn siso(u: Vec<f64>, y: Vec<f64>) -> Dataset {
        Dataset::new("t", 1.0, vec![Channel::new("u", u)], vec![Channel::new("y", y)]).unwrap()
    }

    fn lags(o: &[usize], d: &[usize]) -> LagSpec {
        LagSpec::new(o.to_vec(), d.to_vec()).unwrap()
    }

    fn random_net(l: LagSpec, h: usize, seed: u64) -> NarxNetwork {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let w = weight_count(&l, h);
        let flat: Vec<f64> = (0..w).map(|_| rng.random_range(-1.0..1.0)).collect();
        NarxNetwork::decode_weights(&flat, l, h).unwrap()
    }

    #[test]
    fn regressor_length_examples() {
        assert_eq!(regressor_length(&lags(&[1, 1], &[1, 2, 0])), 5);
        assert_eq!(regressor_length(&lags(&[1], &[0])), 1);
        assert_eq!(regressor_length(&lags(&[3, 2], &[2, 2])), 9);
    }

    #[test]
    fn lag_spec_requires_current_input() {
        assert!(LagSpec::new(vec![0], vec![1]).is_err());
    }

    #[test]
    fn regressor_examples() {
        let d = siso(vec![5.0, 6.0, 7.0], vec![1.0, 2.0, 3.0]);
        let r = build_regressor(&d, &lags(&[1], &[1]), 1, PredictionMode::OneStep, None).unwrap();
        assert_eq!(r, vec![6.0, 1.0]);
        let r = build_regressor(&d, &lags(&[2], &[0]), 1, PredictionMode::OneStep, None).unwrap();
        assert_eq!(r, vec![6.0, 5.0]);
        let e = build_regressor(&d, &lags(&[1], &[1]), 0, PredictionMode::OneStep, None).unwrap_err();
        assert!(matches!(e, Error::Index { k: 0, warmup: 1 }));
    }

    #[test]
    fn free_run_regressor_uses_fed_back_after_warmup() {
        let d = siso(vec![5.0, 6.0, 7.0], vec![1.0, 2.0, 3.0]);
        let fb = vec![vec![-1.0, -2.0, -3.0]];
        let l = lags(&[1], &[2]);
        let r = build_regressor(&d, &l, 2, PredictionMode::FreeRun, Some(&fb)).unwrap();
        // warm-up is 2: both taps (k-1 = 1, k-2 = 0) fall before it.
        assert_eq!(r, vec![7.0, 2.0, 1.0]);
        let l = lags(&[1], &[1]);
        let r = build_regressor(&d, &l, 2, PredictionMode::FreeRun, Some(&fb)).unwrap();
        assert_eq!(r, vec![7.0, -2.0]);
    }

    #[test]
    fn forward_examples() {
        let net = NarxNetwork::zeros(lags(&[2], &[1]), 3).unwrap();
        assert_eq!(net.forward(&[0.3, -2.0, 9.0]).unwrap(), vec![0.0]);

        let mut net = NarxNetwork::zeros(lags(&[1], &[0]), 1).unwrap();
        net.weights_hidden_mut().copy_from_slice(&[1.0, 0.0]);
        net.weights_output_mut().copy_from_slice(&[1.0, 0.0]);
        assert_abs_diff_eq!(net.forward(&[0.5]).unwrap()[0], 0.462117157260010, epsilon = 1e-12);

        let mut net = NarxNetwork::zeros(lags(&[1, 1], &[0, 0]), 2).unwrap();
        net.weights_output_mut().copy_from_slice(&[0.0, 0.0, 1.5, 0.0, 0.0, -0.25]);
        assert_eq!(net.forward(&[4.0, -7.0]).unwrap(), vec![1.5, -0.25]);

        assert!(matches!(net.forward(&[1.0]), Err(Error::Shape { expected: 2, actual: 1, .. })));
    }

    #[test]
    fn weight_codec() {
        let l = lags(&[1], &[0]);
        assert_eq!(weight_count(&l, 1), 4);
        let net = random_net(lags(&[2, 1], &[1, 0]), 4, 3);
        let flat = net.encode_weights();
        assert_eq!(flat.len(), weight_count(net.lags(), 4));
        let back = NarxNetwork::decode_weights(&flat, net.lags().clone(), 4).unwrap();
        assert_eq!(back, net);
        let e = NarxNetwork::decode_weights(&[0.0; 3], l, 1).unwrap_err();
        assert!(matches!(e, Error::Shape { expected: 4, actual: 3, .. }));
    }

    /// Small-signal construction: tanh(eps * z) / eps reproduces the linear map
    /// y(k) = 0.5 y(k-1) + 0.5 u(k) to O(eps^2).
    fn linear_net(eps: f64) -> NarxNetwork {
        let mut net = NarxNetwork::zeros(lags(&[1], &[1]), 1).unwrap();
        net.weights_hidden_mut().copy_from_slice(&[0.5 * eps, 0.5 * eps, 0.0]);
        net.weights_output_mut().copy_from_slice(&[1.0 / eps, 0.0]);
        net
    }

    fn linear_data(n: usize) -> Dataset {
        let u: Vec<f64> = (0..n).map(|k| ((k * 7 % 11) as f64 / 11.0) - 0.5).collect();
        let mut y = vec![0.0; n];
        for k in 1..n {
            y[k] = 0.5 * y[k - 1] + 0.5 * u[k];
        }
        siso(u, y)
    }

    #[test]
    fn exact_linear_predictions() {
        let d = linear_data(60);
        let net = linear_net(1e-5);
        for mode in [PredictionMode::OneStep, PredictionMode::FreeRun] {
            let p = predict(&net, &d, mode).unwrap();
            assert_eq!(p.start, 1);
            for (a, b) in p.channels[0].iter().zip(&p.actual(&d)[0]) {
                assert!((a - b).abs() < 1e-9, "{mode:?}: {a} vs {b}");
            }
            assert!(rmse(&p.channels, &p.actual(&d)).unwrap() < 1e-6);
        }
    }

    #[test]
    fn zero_net_predicts_zero() {
        let d = linear_data(10);
        let net = NarxNetwork::zeros(lags(&[2], &[1]), 3).unwrap();
        let p = predict(&net, &d, PredictionMode::FreeRun).unwrap();
        assert!(p.channels[0].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn modes_agree_on_first_step() {
        let d = linear_data(30);
        let net = random_net(lags(&[2], &[2]), 5, 11);
        let a = predict(&net, &d, PredictionMode::OneStep).unwrap();
        let b = predict(&net, &d, PredictionMode::FreeRun).unwrap();
        assert_eq!(a.channels[0][0], b.channels[0][0]);
        assert_ne!(a.channels[0][5], b.channels[0][5]);
    }

    #[test]
    fn predict_needs_warmup_plus_one() {
        let d = siso(vec![1.0, 2.0], vec![0.0, 0.0]);
        let net = NarxNetwork::zeros(lags(&[1], &[2]), 1).unwrap();
        assert!(matches!(predict(&net, &d, PredictionMode::OneStep), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[vec![1.0, 2.0]], &[vec![1.0, 2.0]]).unwrap(), 0.0);
        assert_abs_diff_eq!(rmse(&[vec![1.0, 2.0]], &[vec![0.0, 0.0]]).unwrap(), 1.5811388300841898, epsilon = 1e-12);
        assert_abs_diff_eq!(
            rmse(&[vec![1.0, 1.0], vec![2.0, 0.0]], &[vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        assert!(matches!(rmse(&[vec![1.0]], &[vec![1.0, 2.0]]), Err(Error::Shape { .. })));
        assert!(matches!(rmse(&[vec![]], &[vec![]]), Err(Error::Domain(_))));
    }

    #[test]
    fn one_step_problem_matches_predict() {
        let u1: Vec<f64> = (0..40).map(|k| (k as f64 * 0.37).sin()).collect();
        let u2: Vec<f64> = (0..40).map(|k| (k as f64 * 0.11).cos()).collect();
        let y1: Vec<f64> = (0..40).map(|k| (k as f64 * 0.2).sin() * 0.5).collect();
        let y2: Vec<f64> = (0..40).map(|k| (k as f64 * 0.05).cos() * 0.3).collect();
        let d = Dataset::new(
            "t",
            1.0,
            vec![Channel::new("u1", u1), Channel::new("u2", u2)],
            vec![Channel::new("y1", y1), Channel::new("y2", y2)],
        )
        .unwrap();
        let l = lags(&[2, 1], &[3, 0]);
        let net = random_net(l.clone(), 6, 5);
        let p = predict(&net, &d, PredictionMode::OneStep).unwrap();
        let expected = rmse(&p.channels, &p.actual(&d)).unwrap();
        let prob = OneStepProblem::new(&d, l.clone(), 6, 0, d.len()).unwrap();
        assert_abs_diff_eq!(prob.rmse(&net.encode_weights()).unwrap(), expected, epsilon = 1e-13);

        let tail = p.tail_from(25);
        let expected = rmse(&tail.channels, &tail.actual(&d)).unwrap();
        let prob = OneStepProblem::new(&d, l, 6, 25, d.len()).unwrap();
        assert_abs_diff_eq!(prob.rmse(&net.encode_weights()).unwrap(), expected, epsilon = 1e-13);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn codec_roundtrip_is_bitwise(o in 1usize..4, dg in 0usize..4, h in 1usize..6, seed in any::<u64>()) {
            let net = random_net(lags(&[o], &[dg]), h, seed);
            let back = NarxNetwork::decode_weights(&net.encode_weights(), net.lags().clone(), h).unwrap();
            prop_assert_eq!(back.encode_weights(), net.encode_weights());
        }

        #[test]
        fn forward_lipschitz_in_weights(seed in any::<u64>(), idx in 0usize..1000, eps in -1.0f64..1.0) {
            let net = random_net(lags(&[2, 1], &[1]), 4, seed);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 1);
            let reg: Vec<f64> = (0..net.regressor_length()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut flat = net.encode_weights();
            let i = idx % flat.len();
            flat[i] += eps;
            let moved = NarxNetwork::decode_weights(&flat, net.lags().clone(), 4).unwrap();
            let bound = eps.abs() * (1.0 + reg.iter().map(|v| v.abs()).sum::<f64>() + 4.0);
            let a = net.forward(&reg).unwrap();
            let b = moved.forward(&reg).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() <= bound + 1e-12);
            }
        }

        #[test]
        fn rmse_sign_symmetry(a in prop::collection::vec(-10.0f64..10.0, 1..20), r in prop::collection::vec(-1.0f64..1.0, 20)) {
            let plus: Vec<f64> = a.iter().zip(&r).map(|(x, e)| x + e).collect();
            let minus: Vec<f64> = a.iter().zip(&r).map(|(x, e)| x - e).collect();
            prop_assert_eq!(rmse(&[a.clone()], &[a.clone()]).unwrap(), 0.0);
            let p = rmse(&[plus], &[a.clone()]).unwrap();
            let m = rmse(&[minus], &[a]).unwrap();
            prop_assert!((p - m).abs() <= 1e-12 * p.max(1.0));
        }

        #[test]
        fn one_step_is_causal(seed in any::<u64>(), k in 3usize..25, bump in -5.0f64..5.0) {
            let d = linear_data(30);
            let net = random_net(lags(&[2], &[2]), 3, seed);
            let base = predict(&net, &d, PredictionMode::OneStep).unwrap();
            let mut u = d.inputs()[0].values.clone();
            let mut y = d.outputs()[0].values.clone();
            u[k] += bump;
            y[k] += bump;
            let input_changed = siso(u, d.outputs()[0].values.clone());
            let output_changed = siso(d.inputs()[0].values.clone(), y);
            let a = predict(&net, &input_changed, PredictionMode::OneStep).unwrap();
            let b = predict(&net, &output_changed, PredictionMode::OneStep).unwrap();
            // inputs at k reach predictions from k on; outputs at k only from k+1 on.
            for t in base.start..k {
                prop_assert_eq!(base.channels[0][t - base.start], a.channels[0][t - base.start]);
            }
            for t in base.start..=k {
                prop_assert_eq!(base.channels[0][t - base.start], b.channels[0][t - base.start]);
            }
        }
    }
}
