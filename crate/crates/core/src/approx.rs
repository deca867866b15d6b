//! Feedforward networks `f(s, θ)` over per-state features with hand-written
//! backpropagation.
//!
//! Parameters live in one flat vector. For each layer, in order from input to
//! output, the weight matrix is stored row-major (`out × in`) followed by the
//! bias vector. Hidden layers apply the configured activation; the output
//! layer is always affine.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::history::fmt_f64;

/// Rows evaluated per work unit. Fixed so reductions do not depend on the
/// number of worker threads.
const CHUNK_ROWS: usize = 64;

pub const CHECKPOINT_VERSION: u32 = 1;

/// Per-state observable features, `|S|` rows by `d` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension {
                what: "feature matrix",
                expected: rows * cols,
                actual: data.len(),
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::pre("features must be finite"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::pre("ragged feature rows"));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn num_rows(&self) -> usize {
        self.rows
    }

    pub fn num_cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, s: usize) -> &[f64] {
        &self.data[s * self.cols..(s + 1) * self.cols]
    }

    /// CSV with columns `state, d1, …, dm`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["state".to_string()];
        header.extend((1..=self.cols).map(|j| format!("d{j}")));
        w.write_record(&header)?;
        for s in 0..self.rows {
            let mut rec = vec![s.to_string()];
            rec.extend(self.row(s).iter().map(|&x| fmt_f64(x)));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let cols = rdr.headers()?.len().saturating_sub(1);
        let mut data = Vec::new();
        let mut rows = 0;
        for rec in rdr.records() {
            let rec = rec?;
            let state: usize = rec[0]
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad state index {:?}", &rec[0])))?;
            if state != rows {
                return Err(Error::Parse(format!(
                    "feature rows must be listed in state order (row {rows} has state {state})"
                )));
            }
            for field in rec.iter().skip(1) {
                data.push(
                    field
                        .trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Parse(format!("bad feature value {field:?}")))?,
                );
            }
            rows += 1;
        }
        Self::new(rows, cols, data)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation output.
    #[inline]
    fn slope_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Identity => 1.0,
        }
    }
}

/// Fixed affine input standardization `x' = (x - shift) / scale`, applied
/// before the first layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputNorm {
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

impl InputNorm {
    /// Column means and standard deviations of `features`; constant columns
    /// get unit scale.
    pub fn fit(features: &FeatureMatrix) -> Self {
        let n = features.num_rows().max(1) as f64;
        let d = features.num_cols();
        let mut shift = vec![0.0; d];
        for s in 0..features.num_rows() {
            for (m, &x) in shift.iter_mut().zip(features.row(s)) {
                *m += x;
            }
        }
        shift.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for s in 0..features.num_rows() {
            for ((v, &x), &m) in var.iter_mut().zip(features.row(s)).zip(&shift) {
                *v += (x - m) * (x - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|v| {
                let sd = (v / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { shift, scale }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NetworkConfig {
    /// `[d, h1, …, hL, 1]`.
    pub layer_sizes: Vec<usize>,
    pub activation: Activation,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_norm: Option<InputNorm>,
}

impl NetworkConfig {
    /// `d → hidden… → 1` with tanh hidden units.
    pub fn mlp(input_dim: usize, hidden: &[usize], seed: u64) -> Self {
        let mut layer_sizes = vec![input_dim];
        layer_sizes.extend_from_slice(hidden);
        layer_sizes.push(1);
        Self {
            layer_sizes,
            activation: Activation::Tanh,
            seed,
            input_norm: None,
        }
    }

    /// Single affine layer `w·x + b`.
    pub fn linear(input_dim: usize, seed: u64) -> Self {
        Self {
            layer_sizes: vec![input_dim, 1],
            activation: Activation::Identity,
            seed,
            input_norm: None,
        }
    }

    pub fn with_input_norm(mut self, norm: InputNorm) -> Self {
        self.input_norm = Some(norm);
        self
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(Error::pre(
                "a network needs at least an input and an output layer",
            ));
        }
        if self.layer_sizes.contains(&0) {
            return Err(Error::pre("layer sizes must be positive"));
        }
        if *self.layer_sizes.last().unwrap() != 1 {
            return Err(Error::pre("the output layer must have exactly one unit"));
        }
        if let Some(norm) = &self.input_norm {
            let d = self.input_dim();
            if norm.shift.len() != d || norm.scale.len() != d {
                return Err(Error::pre(
                    "input normalization does not match input dimension",
                ));
            }
            if norm.scale.iter().any(|&s| !(s > 0.0 && s.is_finite()))
                || norm.shift.iter().any(|s| !s.is_finite())
            {
                return Err(Error::pre(
                    "input normalization must be finite with positive scale",
                ));
            }
        }
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        self.layer_sizes
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    fn widest(&self) -> usize {
        self.layer_sizes.iter().copied().max().unwrap_or(1)
    }
}

/// Deterministic initialization: weights uniform on `±√(3/fan_in)` (zero
/// mean, variance `1/fan_in`), biases zero.
pub fn init_parameters(config: &NetworkConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = Vec::with_capacity(config.num_params());
    for w in config.layer_sizes.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let bound = (3.0 / fan_in as f64).sqrt();
        params.extend((0..fan_in * fan_out).map(|_| rng.random_range(-bound..bound)));
        params.extend(std::iter::repeat_n(0.0, fan_out));
    }
    Ok(params)
}

/// A network configuration together with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Approximator {
    config: NetworkConfig,
    params: Vec<f64>,
}

impl Approximator {
    /// Freshly initialized network.
    pub fn new(config: NetworkConfig) -> Result<Self> {
        let params = init_parameters(&config)?;
        Ok(Self { config, params })
    }

    pub fn with_params(config: NetworkConfig, params: Vec<f64>) -> Result<Self> {
        config.validate()?;
        if params.len() != config.num_params() {
            return Err(Error::Dimension {
                what: "parameter vector",
                expected: config.num_params(),
                actual: params.len(),
            });
        }
        if params.iter().any(|x| !x.is_finite()) {
            return Err(Error::pre("parameters must be finite"));
        }
        Ok(Self { config, params })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Mutable parameter access for optimizers. Callers keep the length fixed.
    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    fn check_features(&self, features: &FeatureMatrix) -> Result<()> {
        if features.num_cols() != self.config.input_dim() {
            return Err(Error::Dimension {
                what: "feature dimension",
                expected: self.config.input_dim(),
                actual: features.num_cols(),
            });
        }
        Ok(())
    }

    /// `f(s, θ)` for every state.
    pub fn forward(&self, features: &FeatureMatrix) -> Result<Vec<f64>> {
        self.check_features(features)?;
        let mut out = vec![0.0; features.num_rows()];
        out.par_chunks_mut(CHUNK_ROWS)
            .enumerate()
            .for_each(|(c, chunk)| {
                let mut scratch = Scratch::new(&self.config);
                for (i, o) in chunk.iter_mut().enumerate() {
                    *o = self.eval_row(features.row(c * CHUNK_ROWS + i), &mut scratch);
                }
            });
        Ok(out)
    }

    /// `f(s, θ)` for the listed states only, in the order given.
    pub fn forward_rows(&self, features: &FeatureMatrix, rows: &[usize]) -> Result<Vec<f64>> {
        self.check_features(features)?;
        if let Some(&bad) = rows.iter().find(|&&s| s >= features.num_rows()) {
            return Err(Error::pre(format!("state {bad} out of range")));
        }
        let mut out = vec![0.0; rows.len()];
        out.par_chunks_mut(CHUNK_ROWS)
            .zip(rows.par_chunks(CHUNK_ROWS))
            .for_each(|(chunk, idx)| {
                let mut scratch = Scratch::new(&self.config);
                for (o, &s) in chunk.iter_mut().zip(idx) {
                    *o = self.eval_row(features.row(s), &mut scratch);
                }
            });
        Ok(out)
    }

    /// `Σ_s weights[s] · ∇_θ f(s, θ)`. States with zero weight are skipped.
    pub fn gradient(&self, features: &FeatureMatrix, weights: &[f64]) -> Result<Vec<f64>> {
        self.check_features(features)?;
        if weights.len() != features.num_rows() {
            return Err(Error::Dimension {
                what: "state weights",
                expected: features.num_rows(),
                actual: weights.len(),
            });
        }
        let active: Vec<usize> = weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w != 0.0)
            .map(|(s, _)| s)
            .collect();
        let partials: Vec<Vec<f64>> = active
            .par_chunks(CHUNK_ROWS)
            .map(|idx| {
                let mut scratch = Scratch::new(&self.config);
                let mut grad = vec![0.0; self.params.len()];
                for &s in idx {
                    self.backprop_row(features.row(s), weights[s], &mut scratch, &mut grad);
                }
                grad
            })
            .collect();
        let mut total = vec![0.0; self.params.len()];
        for part in &partials {
            for (t, p) in total.iter_mut().zip(part) {
                *t += p;
            }
        }
        Ok(total)
    }

    fn load_input(&self, x: &[f64], dst: &mut [f64]) {
        match &self.config.input_norm {
            Some(norm) => {
                for (((d, &x), &m), &sc) in dst.iter_mut().zip(x).zip(&norm.shift).zip(&norm.scale)
                {
                    *d = (x - m) / sc;
                }
            }
            None => dst.copy_from_slice(x),
        }
    }

    fn eval_row(&self, x: &[f64], scratch: &mut Scratch) -> f64 {
        let sizes = &self.config.layer_sizes;
        let n_layers = sizes.len() - 1;
        let (cur, nxt) = (&mut scratch.a, &mut scratch.b);
        self.load_input(x, &mut cur[..sizes[0]]);
        let mut off = 0;
        for l in 0..n_layers {
            let (n_in, n_out) = (sizes[l], sizes[l + 1]);
            let w = &self.params[off..off + n_in * n_out];
            let b = &self.params[off + n_in * n_out..off + n_in * n_out + n_out];
            let hidden = l + 1 < n_layers;
            for j in 0..n_out {
                let z = dot(&w[j * n_in..(j + 1) * n_in], &cur[..n_in]) + b[j];
                nxt[j] = if hidden {
                    self.config.activation.apply(z)
                } else {
                    z
                };
            }
            std::mem::swap(cur, nxt);
            off += n_in * n_out + n_out;
        }
        cur[0]
    }

    fn backprop_row(&self, x: &[f64], seed: f64, scratch: &mut Scratch, grad: &mut [f64]) {
        let sizes = &self.config.layer_sizes;
        let n_layers = sizes.len() - 1;
        // layer outputs, input first
        let Scratch {
            a: delta,
            b: prev,
            acts,
            offsets: offs,
        } = scratch;
        self.load_input(x, &mut acts[offs[0]..offs[0] + sizes[0]]);
        let mut poff = 0;
        for l in 0..n_layers {
            let (n_in, n_out) = (sizes[l], sizes[l + 1]);
            let w = &self.params[poff..poff + n_in * n_out];
            let b = &self.params[poff + n_in * n_out..poff + n_in * n_out + n_out];
            let hidden = l + 1 < n_layers;
            let (lower, upper) = acts.split_at_mut(offs[l + 1]);
            let input = &lower[offs[l]..offs[l] + n_in];
            for j in 0..n_out {
                let z = dot(&w[j * n_in..(j + 1) * n_in], input) + b[j];
                upper[j] = if hidden {
                    self.config.activation.apply(z)
                } else {
                    z
                };
            }
            poff += n_in * n_out + n_out;
        }

        delta[0] = seed;
        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (sizes[l], sizes[l + 1]);
            poff -= n_in * n_out + n_out;
            let input = &acts[offs[l]..offs[l] + n_in];
            let (gw, gb) = grad[poff..poff + n_in * n_out + n_out].split_at_mut(n_in * n_out);
            for j in 0..n_out {
                let d = delta[j];
                gb[j] += d;
                for (g, &a) in gw[j * n_in..(j + 1) * n_in].iter_mut().zip(input) {
                    *g += d * a;
                }
            }
            if l > 0 {
                let w = &self.params[poff..poff + n_in * n_out];
                for (i, p) in prev[..n_in].iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for j in 0..n_out {
                        acc += w[j * n_in + i] * delta[j];
                    }
                    *p = acc * self.config.activation.slope_from_output(input[i]);
                }
                std::mem::swap(delta, prev);
            }
        }
    }
}

struct Scratch {
    a: Vec<f64>,
    b: Vec<f64>,
    acts: Vec<f64>,
    offsets: Vec<usize>,
}

impl Scratch {
    fn new(config: &NetworkConfig) -> Self {
        let widest = config.widest();
        let mut offsets = Vec::with_capacity(config.layer_sizes.len());
        let mut total = 0;
        for &n in &config.layer_sizes {
            offsets.push(total);
            total += n;
        }
        Self {
            a: vec![0.0; widest],
            b: vec![0.0; widest],
            acts: vec![0.0; total],
            offsets,
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Serialized model: network layout, discount, the confidence `b` or
/// approximation level `k` it was trained with, and the flat parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Checkpoint {
    pub version: u32,
    pub network_config: NetworkConfig,
    pub gamma: f64,
    #[serde(default)]
    pub b: Option<f64>,
    #[serde(default)]
    pub k: Option<f64>,
    pub params: Vec<f64>,
}

impl Checkpoint {
    pub fn new(approx: &Approximator, gamma: f64, b: Option<f64>, k: Option<f64>) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            network_config: approx.config.clone(),
            gamma,
            b,
            k,
            params: approx.params.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses and validates a checkpoint, returning it with its network.
    pub fn from_json(text: &str) -> Result<(Self, Approximator)> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Parse(format!(
                "unsupported checkpoint version {}",
                ck.version
            )));
        }
        let approx = Approximator::with_params(ck.network_config.clone(), ck.params.clone())?;
        Ok((ck, approx))
    }
}
