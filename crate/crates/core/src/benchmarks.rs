//! Synthetic systems with known lag structure, and an exhaustive structure
//! search used as an oracle for the outer tier.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{Channel, Dataset};
use crate::error::{Error, Result};
use crate::narx::LagSpec;
use crate::seed;
use crate::two_tier::{FitnessCache, FitnessContext, Prepared, Structure, TierConfig};

const EXCITATION_TAG: u64 = 0x4558_4349; // "EXCI"
const NOISE_TAG: u64 = 0x4e4f_4953; // "NOIS"

/// Largest structure count the oracle will enumerate.
pub const ORACLE_LIMIT: u64 = 10_000;

/// Input waveform. Amplitudes are absolute input levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Excitation {
    /// Zero until `start`, then `amplitude`.
    Step { amplitude: f64, start: usize },
    /// `+amplitude` for `width` samples from `start`, then `-amplitude` for
    /// `width` samples, zero elsewhere.
    Doublet {
        amplitude: f64,
        start: usize,
        width: usize,
    },
    /// Random `+-amplitude` levels, each held for `hold` samples.
    Prbs { amplitude: f64, hold: usize },
    /// A doublet followed by a PRBS tail for persistent excitation.
    DoubletPrbs {
        amplitude: f64,
        start: usize,
        width: usize,
        hold: usize,
    },
}

impl Default for Excitation {
    fn default() -> Self {
        Excitation::DoubletPrbs {
            amplitude: 0.08,
            start: 10,
            width: 10,
            hold: 3,
        }
    }
}

fn doublet(k: usize, amplitude: f64, start: usize, width: usize) -> f64 {
    if k >= start && k < start + width {
        amplitude
    } else if k >= start + width && k < start + 2 * width {
        -amplitude
    } else {
        0.0
    }
}

fn prbs(n: usize, amplitude: f64, hold: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let mut level = 0.0;
    for k in 0..n {
        if k % hold == 0 {
            level = if rng.random::<bool>() { amplitude } else { -amplitude };
        }
        out.push(level);
    }
    out
}

impl Excitation {
    pub fn amplitude(&self) -> f64 {
        match *self {
            Excitation::Step { amplitude, .. }
            | Excitation::Doublet { amplitude, .. }
            | Excitation::Prbs { amplitude, .. }
            | Excitation::DoubletPrbs { amplitude, .. } => amplitude,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.amplitude();
        if !(a.is_finite() && a.abs() <= 1.0) {
            return Err(Error::InvalidParams(format!(
                "excitation amplitude must lie in [-1, 1], got {a}"
            )));
        }
        match *self {
            Excitation::Doublet { width: 0, .. } | Excitation::DoubletPrbs { width: 0, .. } => {
                Err(Error::InvalidParams("doublet width must be positive".into()))
            }
            Excitation::Prbs { hold: 0, .. } | Excitation::DoubletPrbs { hold: 0, .. } => {
                Err(Error::InvalidParams("PRBS hold must be positive".into()))
            }
            _ => Ok(()),
        }
    }

    /// `n` samples for input channel `channel`. Doublets on later channels
    /// are staggered so that channels are not collinear.
    pub fn signal(&self, n: usize, channel: usize, seed: u64) -> Vec<f64> {
        let mut rng = seed::stream(seed, &[EXCITATION_TAG, channel as u64]);
        match *self {
            Excitation::Step { amplitude, start } => {
                (0..n).map(|k| if k >= start { amplitude } else { 0.0 }).collect()
            }
            Excitation::Doublet {
                amplitude,
                start,
                width,
            } => {
                let start = start + 2 * width * channel;
                (0..n).map(|k| doublet(k, amplitude, start, width)).collect()
            }
            Excitation::Prbs { amplitude, hold } => prbs(n, amplitude, hold, &mut rng),
            Excitation::DoubletPrbs {
                amplitude,
                start,
                width,
                hold,
            } => {
                let start = start + 2 * width * channel;
                let tail_from = start + 2 * width;
                let tail = prbs(n.saturating_sub(tail_from), amplitude, hold, &mut rng);
                (0..n)
                    .map(|k| {
                        if k < tail_from {
                            doublet(k, amplitude, start, width)
                        } else {
                            tail[k - tail_from]
                        }
                    })
                    .collect()
            }
        }
    }
}

/// Description of a generator's ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSystem {
    pub name: String,
    pub n_inputs: usize,
    pub n_outputs: usize,
    pub true_lags: LagSpec,
    pub recurrence: Vec<String>,
    pub noise: f64,
}

/// Sidecar written next to a generated CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub system: SyntheticSystem,
    pub n_samples: usize,
    pub excitation: Excitation,
    pub seed: u64,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    SisoNarendra,
    MimoLinear,
}

impl Generator {
    pub const ALL: [Generator; 2] = [Generator::SisoNarendra, Generator::MimoLinear];

    pub fn name(self) -> &'static str {
        match self {
            Generator::SisoNarendra => "siso_narendra",
            Generator::MimoLinear => "mimo_linear",
        }
    }

    pub fn system(self, noise: f64) -> SyntheticSystem {
        match self {
            Generator::SisoNarendra => SyntheticSystem {
                name: self.name().into(),
                n_inputs: 1,
                n_outputs: 1,
                true_lags: LagSpec::new(vec![1], vec![1]).expect("valid"),
                recurrence: vec!["y(k) = y(k-1) / (1 + y(k-1)^2) + u(k)^3".into()],
                noise,
            },
            Generator::MimoLinear => SyntheticSystem {
                name: self.name().into(),
                n_inputs: 2,
                n_outputs: 3,
                true_lags: LagSpec::new(vec![1, 1], vec![1, 2, 0]).expect("valid"),
                recurrence: vec![
                    "y1(k) = 0.6 y1(k-1) + 0.4 u1(k)".into(),
                    "y2(k) = 0.3 y2(k-1) - 0.2 y2(k-2) + 0.5 u2(k)".into(),
                    "y3(k) = 0.7 u1(k) + 0.3 u2(k)".into(),
                ],
                noise,
            },
        }
    }

    /// Generate with the given excitation, noise level and seed.
    pub fn generate(
        self,
        n: usize,
        excitation: &Excitation,
        noise: f64,
        seed: u64,
    ) -> Result<Dataset> {
        match self {
            Generator::SisoNarendra => gen_siso_narendra(n, excitation, noise, seed),
            Generator::MimoLinear => gen_mimo_linear(n, excitation, noise, seed),
        }
    }
}

impl std::str::FromStr for Generator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Generator::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| {
                Error::InvalidParams(format!(
                    "unknown generator `{s}`; valid generators: siso_narendra, mimo_linear"
                ))
            })
    }
}

fn check_args(n: usize, excitation: &Excitation, noise: f64) -> Result<()> {
    if n < 10 {
        return Err(Error::InsufficientData(format!(
            "generators need at least 10 samples, got {n}"
        )));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::InvalidParams(format!("noise level must be >= 0, got {noise}")));
    }
    excitation.validate()
}

/// Add Gaussian noise whose standard deviation is `level` times the half-range
/// of the clean channel.
fn add_noise(outputs: &mut [Vec<f64>], level: f64, seed: u64) {
    if level == 0.0 {
        return;
    }
    for (j, y) in outputs.iter_mut().enumerate() {
        let (lo, hi) = y
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let std = level * 0.5 * (hi - lo);
        if std <= 0.0 {
            continue;
        }
        let normal = Normal::new(0.0, std).expect("positive std");
        let mut rng = seed::stream(seed, &[NOISE_TAG, j as u64]);
        for v in y.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }
}

fn assemble(name: &str, inputs: Vec<Vec<f64>>, outputs: Vec<Vec<f64>>) -> Result<Dataset> {
    let named = |prefix: &str, chans: Vec<Vec<f64>>| -> Vec<Channel> {
        chans
            .into_iter()
            .enumerate()
            .map(|(i, v)| Channel::new(format!("{prefix}{}", i + 1), v))
            .collect()
    };
    Dataset::new(name, 1.0, named("u", inputs), named("y", outputs))
}

/// First-order nonlinear plant `y(k) = y(k-1) / (1 + y(k-1)^2) + u(k)^3` with
/// `y(0) = 0`.
pub fn gen_siso_narendra(
    n: usize,
    excitation: &Excitation,
    noise: f64,
    seed: u64,
) -> Result<Dataset> {
    check_args(n, excitation, noise)?;
    let u = excitation.signal(n, 0, seed);
    let mut y = vec![0.0; n];
    for k in 1..n {
        let p = y[k - 1];
        y[k] = p / (1.0 + p * p) + u[k] * u[k] * u[k];
    }
    let mut outputs = vec![y];
    add_noise(&mut outputs, noise, seed);
    assemble(Generator::SisoNarendra.name(), vec![u], outputs)
}

/// Two-input, three-output linear plant with true input orders `[1, 1]` and
/// output degrees `[1, 2, 0]`; zero initial conditions.
pub fn gen_mimo_linear(
    n: usize,
    excitation: &Excitation,
    noise: f64,
    seed: u64,
) -> Result<Dataset> {
    check_args(n, excitation, noise)?;
    let u1 = excitation.signal(n, 0, seed);
    let u2 = excitation.signal(n, 1, seed);
    let (mut y1, mut y2, mut y3) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for k in 0..n {
        let y1p = if k >= 1 { y1[k - 1] } else { 0.0 };
        let y2p = if k >= 1 { y2[k - 1] } else { 0.0 };
        let y2pp = if k >= 2 { y2[k - 2] } else { 0.0 };
        y1[k] = 0.6 * y1p + 0.4 * u1[k];
        y2[k] = 0.3 * y2p - 0.2 * y2pp + 0.5 * u2[k];
        y3[k] = 0.7 * u1[k] + 0.3 * u2[k];
    }
    let mut outputs = vec![y1, y2, y3];
    add_noise(&mut outputs, noise, seed);
    assemble(Generator::MimoLinear.name(), vec![u1, u2], outputs)
}

/// Every structure the outer tier can reach, in lexicographic order.
pub fn all_lag_specs(n_inputs: usize, n_outputs: usize, max_lag: usize) -> Result<Vec<LagSpec>> {
    let count = (max_lag as u64)
        .checked_pow(n_inputs as u32)
        .and_then(|a| (max_lag as u64 + 1).checked_pow(n_outputs as u32).and_then(|b| a.checked_mul(b)))
        .unwrap_or(u64::MAX);
    if count > ORACLE_LIMIT {
        return Err(Error::Budget {
            structures: count,
            limit: ORACLE_LIMIT,
        });
    }
    let ranges: Vec<(usize, usize)> = std::iter::repeat_n((1, max_lag), n_inputs)
        .chain(std::iter::repeat_n((0, max_lag), n_outputs))
        .collect();
    let mut out = Vec::with_capacity(count as usize);
    let mut cur: Vec<usize> = ranges.iter().map(|r| r.0).collect();
    loop {
        out.push(LagSpec::new(cur[..n_inputs].to_vec(), cur[n_inputs..].to_vec())?);
        // Odometer increment, last coordinate fastest.
        let mut d = ranges.len();
        loop {
            if d == 0 {
                return Ok(out);
            }
            d -= 1;
            if cur[d] < ranges[d].1 {
                cur[d] += 1;
                break;
            }
            cur[d] = ranges[d].0;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub best: LagSpec,
    pub best_fitness: f64,
    /// Fitness of every structure, in enumeration order.
    pub table: Vec<(LagSpec, f64)>,
}

/// Score every structure with `max_lag` and the configured hidden size, using
/// the same preprocessing and seeding as the outer search.
pub fn brute_force_order_search(raw: &Dataset, config: &TierConfig) -> Result<OracleResult> {
    config.validate()?;
    let prepared = Prepared::from_config(raw, config)?;
    let ctx = FitnessContext::new(&prepared, config)?;
    brute_force_with(
        &ctx,
        &FitnessCache::new(),
        raw.n_inputs(),
        raw.n_outputs(),
        config.max_lag,
        config.hidden_size,
    )
}

pub fn brute_force_with(
    ctx: &FitnessContext,
    cache: &FitnessCache,
    n_inputs: usize,
    n_outputs: usize,
    max_lag: usize,
    hidden_size: usize,
) -> Result<OracleResult> {
    let specs = all_lag_specs(n_inputs, n_outputs, max_lag)?;
    let structures: Vec<Structure> = specs
        .into_iter()
        .map(|lags| Structure { lags, hidden_size })
        .collect();
    let fits = cache.fit_all(ctx, &structures);
    let mut table = Vec::with_capacity(structures.len());
    for (s, f) in structures.into_iter().zip(fits) {
        table.push((s.lags, f?.fitness));
    }
    let (best, best_fitness) = table
        .iter()
        .fold(None::<&(LagSpec, f64)>, |acc, e| match acc {
            Some(a) if a.1 <= e.1 => Some(a),
            _ => Some(e),
        })
        .cloned()
        .expect("at least one structure");
    Ok(OracleResult {
        best,
        best_fitness,
        table,
    })
}
