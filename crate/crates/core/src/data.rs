//! Multi-channel input/output time series: loading, validation, scaling and
//! temporal splitting.

use std::collections::{BTreeMap, HashSet};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub name: String,
    pub values: Vec<f64>,
}

impl Channel {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            values,
        }
    }
}

/// Aligned input and output channels sampled at a common period.
///
/// Construction through [`Dataset::new`] enforces that every channel has the
/// same length `N >= 2`, that there is at least one input and one output, that
/// every sample is finite and that channel names are unique.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    sample_period: f64,
    inputs: Vec<Channel>,
    outputs: Vec<Channel>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        sample_period: f64,
        inputs: Vec<Channel>,
        outputs: Vec<Channel>,
    ) -> Result<Self> {
        if inputs.is_empty() || outputs.is_empty() {
            return Err(Error::InvalidDataset(format!(
                "need at least one input and one output channel, got {} and {}",
                inputs.len(),
                outputs.len()
            )));
        }
        if !(sample_period.is_finite() && sample_period > 0.0) {
            return Err(Error::InvalidDataset(format!(
                "sample period must be positive, got {sample_period}"
            )));
        }
        let len = inputs[0].values.len();
        let mut seen = HashSet::new();
        for ch in inputs.iter().chain(&outputs) {
            if !seen.insert(ch.name.as_str()) {
                return Err(Error::InvalidDataset(format!(
                    "duplicate channel name `{}`",
                    ch.name
                )));
            }
            if ch.values.len() != len {
                return Err(Error::InvalidDataset(format!(
                    "channel `{}` has {} samples, expected {len}",
                    ch.name,
                    ch.values.len()
                )));
            }
            if let Some(i) = ch.values.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidDataset(format!(
                    "channel `{}` has a non-finite sample at index {i}",
                    ch.name
                )));
            }
        }
        if len < 2 {
            return Err(Error::InsufficientData(format!(
                "dataset needs at least 2 samples, got {len}"
            )));
        }
        Ok(Self {
            name: name.into(),
            sample_period,
            inputs,
            outputs,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn sample_period(&self) -> f64 {
        self.sample_period
    }

    pub fn inputs(&self) -> &[Channel] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[Channel] {
        &self.outputs
    }

    pub fn len(&self) -> usize {
        self.inputs[0].values.len()
    }

    /// Always false; a valid dataset holds at least two samples.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn n_inputs(&self) -> usize {
        self.inputs.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.outputs.len()
    }

    pub fn input_names(&self) -> Vec<String> {
        self.inputs.iter().map(|c| c.name.clone()).collect()
    }

    pub fn output_names(&self) -> Vec<String> {
        self.outputs.iter().map(|c| c.name.clone()).collect()
    }

    pub fn channels(&self) -> impl Iterator<Item = &Channel> {
        self.inputs.iter().chain(&self.outputs)
    }

    pub fn input_values(&self) -> Vec<&[f64]> {
        self.inputs.iter().map(|c| c.values.as_slice()).collect()
    }

    pub fn output_values(&self) -> Vec<&[f64]> {
        self.outputs.iter().map(|c| c.values.as_slice()).collect()
    }

    /// Contiguous sub-range `[start, end)` of every channel.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len() {
            return Err(Error::Split(format!(
                "invalid range {start}..{end} for a dataset of {} samples",
                self.len()
            )));
        }
        let cut = |chs: &[Channel]| {
            chs.iter()
                .map(|c| Channel::new(c.name.clone(), c.values[start..end].to_vec()))
                .collect::<Vec<_>>()
        };
        Dataset::new(
            self.name.clone(),
            self.sample_period,
            cut(&self.inputs),
            cut(&self.outputs),
        )
    }

    fn map_channels(&self, mut f: impl FnMut(&Channel) -> Vec<f64>) -> Self {
        let mut apply = |chs: &[Channel]| {
            chs.iter()
                .map(|c| Channel::new(c.name.clone(), f(c)))
                .collect::<Vec<_>>()
        };
        let inputs = apply(&self.inputs);
        let outputs = apply(&self.outputs);
        Self {
            name: self.name.clone(),
            sample_period: self.sample_period,
            inputs,
            outputs,
        }
    }
}

/// Column selection for [`load_csv`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    #[serde(default = "default_sample_period")]
    pub sample_period: f64,
}

fn default_sample_period() -> f64 {
    1.0
}

impl Schema {
    pub fn new<S: Into<String>>(
        inputs: impl IntoIterator<Item = S>,
        outputs: impl IntoIterator<Item = S>,
    ) -> Self {
        Self {
            inputs: inputs.into_iter().map(Into::into).collect(),
            outputs: outputs.into_iter().map(Into::into).collect(),
            sample_period: default_sample_period(),
        }
    }

    pub fn with_sample_period(mut self, period: f64) -> Self {
        self.sample_period = period;
        self
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_csv(file, &name, schema)
}

/// Parse CSV text from any reader. Data rows are numbered from 1.
pub fn read_csv(reader: impl std::io::Read, name: &str, schema: &Schema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    let locate = |col: &String| {
        header
            .iter()
            .position(|h| h.trim() == col)
            .ok_or_else(|| Error::Schema { column: col.clone() })
    };
    let in_idx = schema.inputs.iter().map(locate).collect::<Result<Vec<_>>>()?;
    let out_idx = schema.outputs.iter().map(locate).collect::<Result<Vec<_>>>()?;

    let mut in_vals = vec![Vec::new(); in_idx.len()];
    let mut out_vals = vec![Vec::new(); out_idx.len()];
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row = r + 1;
        let cell = |idx: usize, col: &String| -> Result<f64> {
            let raw = record.get(idx).unwrap_or("").trim();
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    row,
                    column: col.clone(),
                    value: raw.to_string(),
                })
        };
        for (k, (&idx, col)) in in_idx.iter().zip(&schema.inputs).enumerate() {
            in_vals[k].push(cell(idx, col)?);
        }
        for (k, (&idx, col)) in out_idx.iter().zip(&schema.outputs).enumerate() {
            out_vals[k].push(cell(idx, col)?);
        }
    }
    let n_rows = in_vals.first().map_or(0, Vec::len);
    if n_rows < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 data rows, found {n_rows}"
        )));
    }
    let zip = |names: &[String], vals: Vec<Vec<f64>>| {
        names
            .iter()
            .zip(vals)
            .map(|(n, v)| Channel::new(n.clone(), v))
            .collect::<Vec<_>>()
    };
    Dataset::new(
        name,
        schema.sample_period,
        zip(&schema.inputs, in_vals),
        zip(&schema.outputs, out_vals),
    )
}

/// Serialise as CSV: header of channel names (inputs then outputs), one row per
/// sample, shortest round-trip decimal formatting.
pub fn write_csv_to(d: &Dataset, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(d.channels().map(|c| c.name.as_str()))?;
    let cols: Vec<&[f64]> = d.channels().map(|c| c.values.as_slice()).collect();
    let mut row = Vec::with_capacity(cols.len());
    for k in 0..d.len() {
        row.clear();
        row.extend(cols.iter().map(|c| c[k].to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

/// Write a dataset to `path`, going through a temporary file in the same
/// directory and renaming it into place.
pub fn write_csv(d: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_csv_to(d, &mut buf)?;
    crate::io::write_atomic(path.as_ref(), &buf)
}

/// Per-channel min/max recorded at normalisation time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    fn of(values: &[f64]) -> Self {
        let (min, max) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        Self { min, max }
    }

    fn is_constant(&self) -> bool {
        self.max <= self.min
    }

    pub fn to_unit(&self, v: f64) -> f64 {
        if self.is_constant() {
            0.0
        } else {
            2.0 * (v - self.min) / (self.max - self.min) - 1.0
        }
    }

    pub fn from_unit(&self, z: f64) -> f64 {
        if self.is_constant() {
            self.min
        } else {
            self.min + (z + 1.0) * 0.5 * (self.max - self.min)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NormParams {
    pub channels: BTreeMap<String, Range>,
}

impl NormParams {
    pub fn range(&self, channel: &str) -> Result<&Range> {
        self.channels.get(channel).ok_or_else(|| {
            Error::Compatibility(format!("no normalisation range for channel `{channel}`"))
        })
    }

    /// Map every channel of `d` with the stored ranges.
    pub fn apply(&self, d: &Dataset) -> Result<Dataset> {
        for ch in d.channels() {
            self.range(&ch.name)?;
        }
        Ok(d.map_channels(|c| {
            let r = self.channels[&c.name];
            c.values.iter().map(|&v| r.to_unit(v)).collect()
        }))
    }

    pub fn invert(&self, d: &Dataset) -> Result<Dataset> {
        for ch in d.channels() {
            self.range(&ch.name)?;
        }
        Ok(d.map_channels(|c| {
            let r = self.channels[&c.name];
            c.values.iter().map(|&z| r.from_unit(z)).collect()
        }))
    }

    pub fn denormalize_channel(&self, channel: &str, values: &[f64]) -> Result<Vec<f64>> {
        let r = self.range(channel)?;
        Ok(values.iter().map(|&z| r.from_unit(z)).collect())
    }
}

/// Min-max scale every channel to [-1, 1]. Constant channels become zero.
pub fn normalize(d: &Dataset) -> (Dataset, NormParams) {
    let params = NormParams {
        channels: d
            .channels()
            .map(|c| (c.name.clone(), Range::of(&c.values)))
            .collect(),
    };
    let scaled = params.apply(d).expect("ranges cover every channel");
    (scaled, params)
}

pub fn denormalize(d: &Dataset, params: &NormParams) -> Result<Dataset> {
    params.invert(d)
}

/// Contiguous prefix/suffix split; the prefix holds `floor(fraction * N)` samples.
pub fn split(d: &Dataset, train_fraction: f64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Split(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let n = d.len();
    let n_train = (train_fraction * n as f64).floor() as usize;
    split_at(d, n_train)
}

pub fn split_at(d: &Dataset, n_train: usize) -> Result<(Dataset, Dataset)> {
    let n = d.len();
    if n_train < 2 || n.saturating_sub(n_train) < 2 {
        return Err(Error::Split(format!(
            "splitting {n} samples at {n_train} leaves fewer than 2 on one side"
        )));
    }
    Ok((d.slice(0, n_train)?, d.slice(n_train, n)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ds(inputs: &[(&str, Vec<f64>)], outputs: &[(&str, Vec<f64>)]) -> Dataset {
        let mk = |v: &[(&str, Vec<f64>)]| v.iter().map(|(n, x)| Channel::new(*n, x.clone())).collect();
        Dataset::new("t", 1.0, mk(inputs), mk(outputs)).unwrap()
    }

    #[test]
    fn load_three_rows() {
        let text = "u1,y1\n1,2\n3,4\n5,6\n";
        let d = read_csv(text.as_bytes(), "t", &Schema::new(["u1"], ["y1"])).unwrap();
        assert_eq!((d.n_inputs(), d.n_outputs(), d.len()), (1, 1, 3));
        assert_eq!(d.outputs()[0].values, vec![2.0, 4.0, 6.0]);
    }

    #[test]
    fn missing_column_is_named() {
        let text = "u1,y2\n1,2\n3,4\n";
        let err = read_csv(text.as_bytes(), "t", &Schema::new(["u1"], ["y1"])).unwrap_err();
        match err {
            Error::Schema { column } => assert_eq!(column, "y1"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_cell_reports_row_and_column() {
        let text = "u1,y1\n1,2\nabc,4\n5,6\n";
        let err = read_csv(text.as_bytes(), "t", &Schema::new(["u1"], ["y1"])).unwrap_err();
        match err {
            Error::Parse { row, column, value } => {
                assert_eq!((row, column.as_str(), value.as_str()), (2, "u1", "abc"))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn single_row_is_insufficient() {
        let err = read_csv("u1,y1\n1,2\n".as_bytes(), "t", &Schema::new(["u1"], ["y1"])).unwrap_err();
        assert!(matches!(err, Error::InsufficientData(_)));
    }

    #[test]
    fn non_finite_cells_rejected() {
        let err = read_csv("u1,y1\n1,2\nNaN,4\n".as_bytes(), "t", &Schema::new(["u1"], ["y1"])).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 2, .. }));
    }

    #[test]
    fn dataset_invariants() {
        let dup = Dataset::new(
            "t",
            1.0,
            vec![Channel::new("a", vec![1.0, 2.0])],
            vec![Channel::new("a", vec![1.0, 2.0])],
        );
        assert!(matches!(dup, Err(Error::InvalidDataset(_))));
        let ragged = Dataset::new(
            "t",
            1.0,
            vec![Channel::new("a", vec![1.0, 2.0])],
            vec![Channel::new("b", vec![1.0])],
        );
        assert!(ragged.is_err());
        let no_out = Dataset::new("t", 1.0, vec![Channel::new("a", vec![1.0, 2.0])], vec![]);
        assert!(no_out.is_err());
    }

    #[test]
    fn normalize_examples() {
        let d = ds(&[("u", vec![0.0, 5.0, 10.0])], &[("y", vec![4.0, 4.0, 4.0])]);
        let (n, p) = normalize(&d);
        assert_eq!(n.inputs()[0].values, vec![-1.0, 0.0, 1.0]);
        assert_eq!(n.outputs()[0].values, vec![0.0, 0.0, 0.0]);
        let back = denormalize(&n, &p).unwrap();
        assert_eq!(back.outputs()[0].values, vec![4.0, 4.0, 4.0]);

        let d = ds(&[("u", vec![-2.0, 2.0])], &[("y", vec![1.0, 3.0])]);
        let (n, p) = normalize(&d);
        assert_eq!(denormalize(&n, &p).unwrap().inputs()[0].values, vec![-2.0, 2.0]);
    }

    #[test]
    fn split_examples() {
        let d = ds(&[("u", (0..20).map(f64::from).collect())], &[("y", vec![0.0; 20])]);
        let (a, b) = split(&d, 0.75).unwrap();
        assert_eq!((a.len(), b.len()), (15, 5));
        assert_eq!(b.inputs()[0].values[0], 15.0);

        let d = ds(&[("u", vec![1.0, 2.0, 3.0, 4.0])], &[("y", vec![0.0; 4])]);
        let (a, b) = split(&d, 0.5).unwrap();
        assert_eq!((a.len(), b.len()), (2, 2));
        assert!(matches!(split(&d, 0.9), Err(Error::Split(_))));
    }

    fn channel_strategy() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-1.0e6f64..1.0e6, 4..40)
    }

    proptest! {
        #[test]
        fn normalize_roundtrip(u in channel_strategy()) {
            let y: Vec<f64> = u.iter().map(|v| v * 0.5 + 3.0).collect();
            let d = ds(&[("u", u.clone())], &[("y", y)]);
            let (n, p) = normalize(&d);
            let back = denormalize(&n, &p).unwrap();
            // Rounding error scales with the channel's span, not the sample.
            let scale = u.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for (a, b) in u.iter().zip(&back.inputs()[0].values) {
                prop_assert!((a - b).abs() <= 1e-12 * scale);
            }
            for v in &n.inputs()[0].values {
                prop_assert!((-1.0..=1.0).contains(v));
            }
        }

        #[test]
        fn split_concatenates_back(u in channel_strategy(), frac in 0.05f64..0.95) {
            let y = vec![1.0; u.len()];
            let d = ds(&[("u", u.clone())], &[("y", y)]);
            if let Ok((a, b)) = split(&d, frac) {
                let mut joined = a.inputs()[0].values.clone();
                joined.extend_from_slice(&b.inputs()[0].values);
                prop_assert_eq!(joined, u);
            }
        }

        #[test]
        fn csv_roundtrip(u in channel_strategy()) {
            let y: Vec<f64> = u.iter().map(|v| v.sin() * 1e-3).collect();
            let d = ds(&[("u", u)], &[("y", y)]);
            let mut buf = Vec::new();
            write_csv_to(&d, &mut buf).unwrap();
            let back = read_csv(buf.as_slice(), "t", &Schema::new(["u"], ["y"])).unwrap();
            prop_assert_eq!(back, d);
        }
    }
}
