//! Encoder-only causal transformer over normalized (P, θ) sequences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamSet, Tape, Tensor, Var};
use crate::error::{Error, Result};

pub const LOGVAR_MIN: f64 = -10.0;
pub const LOGVAR_MAX: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformerConfig {
    pub input_dim: usize,
    pub d_model: usize,
    pub heads: usize,
    pub layers: usize,
    pub dropout: f64,
    pub max_len: usize,
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    /// Add a position-wise feed-forward sublayer (with its own residual and
    /// normalization) after each attention sublayer.
    pub feed_forward: bool,
    pub ff_hidden: usize,
}

impl Default for TransformerConfig {
    fn default() -> Self {
        TransformerConfig {
            input_dim: 2,
            d_model: 64,
            heads: 4,
            layers: 2,
            dropout: 0.1,
            max_len: 400,
            lr: 1e-4,
            batch: 64,
            epochs: 100,
            feed_forward: false,
            ff_hidden: 128,
        }
    }
}

impl TransformerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim != 2 {
            return Err(Error::contract(format!("input_dim must be 2 (power, angle), got {}", self.input_dim)));
        }
        if self.d_model == 0 || self.heads == 0 || self.layers == 0 {
            return Err(Error::contract("transformer dimensions must be positive"));
        }
        if self.d_model % self.heads != 0 {
            return Err(Error::contract(format!("d_model {} not divisible by {} heads", self.d_model, self.heads)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::contract(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if self.max_len == 0 || self.batch == 0 || !(self.lr > 0.0) {
            return Err(Error::contract("max_len, batch and lr must be positive"));
        }
        if self.feed_forward && self.ff_hidden == 0 {
            return Err(Error::contract("feed-forward sublayer needs a positive width"));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.heads
    }

    /// Number of scalar parameters implied by the configuration.
    pub fn parameter_count(&self) -> usize {
        let (d, i) = (self.d_model, self.input_dim);
        let mut per_layer = 4 * d * d + 2 * d;
        if self.feed_forward {
            per_layer += d * self.ff_hidden + self.ff_hidden + self.ff_hidden * d + d + 2 * d;
        }
        i * d + d + self.layers * per_layer + d * 2 * i + 2 * i
    }
}

/// Per-step Gaussian proposal over the normalized next action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProposalDistribution {
    pub mean: [f64; 2],
    pub var: [f64; 2],
}

/// Parameter indices of one attention block.
#[derive(Debug, Clone)]
pub(crate) struct LayerIds {
    pub wq: usize,
    pub wk: usize,
    pub wv: usize,
    pub wo: usize,
    pub ln1_g: usize,
    pub ln1_b: usize,
    pub ff: Option<[usize; 6]>,
}

#[derive(Debug, Clone)]
pub struct Transformer {
    pub config: TransformerConfig,
    pub params: ParamSet,
    pub(crate) in_w: usize,
    pub(crate) in_b: usize,
    pub(crate) layers: Vec<LayerIds>,
    pub(crate) head_w: usize,
    pub(crate) head_b: usize,
}

fn xavier(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    Tensor::new(vec![rows, cols], (0..rows * cols).map(|_| rng.gen_range(-a..a)).collect()).expect("shape")
}

/// Sinusoidal encoding for positions 0..n.
pub fn positional_encoding(n: usize, d: usize) -> Tensor {
    let mut data = vec![0.0; n * d];
    for pos in 0..n {
        for j in 0..d {
            let i2 = (j - j % 2) as f64;
            let angle = pos as f64 / 10000f64.powf(i2 / d as f64);
            data[pos * d + j] = if j % 2 == 0 { angle.sin() } else { angle.cos() };
        }
    }
    Tensor::new(vec![n, d], data).expect("shape")
}

/// Additive causal mask: −∞ strictly above the diagonal.
pub fn causal_mask(n: usize) -> Tensor {
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            data[i * n + j] = f64::NEG_INFINITY;
        }
    }
    Tensor::new(vec![n, n], data).expect("shape")
}

/// Dropout keep-masks drawn in a fixed order, or none in evaluation mode.
pub struct DropoutSource<'a> {
    pub rate: f64,
    pub rng: Option<&'a mut ChaCha8Rng>,
}

impl DropoutSource<'_> {
    pub fn eval() -> Self {
        DropoutSource { rate: 0.0, rng: None }
    }

    fn apply(&mut self, tape: &mut Tape, x: Var) -> Result<Var> {
        match self.rng.as_deref_mut() {
            Some(rng) if self.rate > 0.0 => {
                let n = tape.value(x).len();
                let keep: Vec<bool> = (0..n).map(|_| rng.gen::<f64>() >= self.rate).collect();
                tape.dropout(x, &keep, self.rate)
            }
            _ => Ok(x),
        }
    }
}

/// Forward outputs on the tape: per-row means and clamped log-variances
/// for the concatenated batch.
pub struct ForwardOutput {
    pub mean: Var,
    pub logvar: Var,
}

impl Transformer {
    pub fn new(config: TransformerConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = config.d_model;
        let mut p = ParamSet::new();
        let in_w = p.push("input.w", xavier(&mut rng, config.input_dim, d));
        let in_b = p.push("input.b", Tensor::zeros(&[1, d]));
        let mut layers = Vec::new();
        for l in 0..config.layers {
            let wq = p.push(format!("layer{l}.wq"), xavier(&mut rng, d, d));
            let wk = p.push(format!("layer{l}.wk"), xavier(&mut rng, d, d));
            let wv = p.push(format!("layer{l}.wv"), xavier(&mut rng, d, d));
            let wo = p.push(format!("layer{l}.wo"), xavier(&mut rng, d, d));
            let ln1_g = p.push(format!("layer{l}.norm1.g"), Tensor::filled(&[1, d], 1.0));
            let ln1_b = p.push(format!("layer{l}.norm1.b"), Tensor::zeros(&[1, d]));
            let ff = if config.feed_forward {
                let f = config.ff_hidden;
                Some([
                    p.push(format!("layer{l}.ff1.w"), xavier(&mut rng, d, f)),
                    p.push(format!("layer{l}.ff1.b"), Tensor::zeros(&[1, f])),
                    p.push(format!("layer{l}.ff2.w"), xavier(&mut rng, f, d)),
                    p.push(format!("layer{l}.ff2.b"), Tensor::zeros(&[1, d])),
                    p.push(format!("layer{l}.norm2.g"), Tensor::filled(&[1, d], 1.0)),
                    p.push(format!("layer{l}.norm2.b"), Tensor::zeros(&[1, d])),
                ])
            } else {
                None
            };
            layers.push(LayerIds { wq, wk, wv, wo, ln1_g, ln1_b, ff });
        }
        let head_w = p.push("head.w", xavier(&mut rng, d, 2 * config.input_dim));
        let head_b = p.push("head.b", Tensor::zeros(&[1, 2 * config.input_dim]));
        Ok(Transformer { config, params: p, in_w, in_b, layers, head_w, head_b })
    }

    /// Rebuilds a model around existing weights (e.g. from a checkpoint).
    pub fn from_params(config: TransformerConfig, params: ParamSet) -> Result<Self> {
        let mut m = Transformer::new(config, 0)?;
        if m.params.names() != params.names() {
            return Err(Error::Format("checkpoint parameter names do not match the configuration".into()));
        }
        for (a, b) in m.params.tensors().iter().zip(params.tensors()) {
            if a.shape() != b.shape() {
                return Err(Error::Shape { op: "from_params", left: a.shape().to_vec(), right: b.shape().to_vec() });
            }
        }
        m.params = params;
        Ok(m)
    }

    /// Forward pass over sequences concatenated row-wise. `lengths` gives
    /// each sequence's length; attention never crosses sequence borders.
    pub fn forward(
        &self,
        tape: &mut Tape,
        p: &[Var],
        inputs: &Tensor,
        lengths: &[usize],
        drop: &mut DropoutSource,
    ) -> Result<ForwardOutput> {
        let c = &self.config;
        let (rows, cols) = inputs.dims()?;
        if cols != c.input_dim || lengths.iter().sum::<usize>() != rows {
            return Err(Error::contract(format!(
                "input {rows}×{cols} does not match lengths {lengths:?} and input dim {}",
                c.input_dim
            )));
        }
        if let Some(&n) = lengths.iter().find(|&&n| n == 0 || n > c.max_len) {
            return Err(Error::contract(format!("sequence length {n} outside 1..={}", c.max_len)));
        }
        let d = c.d_model;
        let dh = c.head_dim();
        let scale = 1.0 / (dh as f64).sqrt();

        let mut pe = Vec::with_capacity(rows * d);
        for &n in lengths {
            pe.extend_from_slice(positional_encoding(n, d).data());
        }
        let pe = Tensor::new(vec![rows, d], pe)?;

        let x = tape.leaf(inputs.clone())?;
        let h = tape.matmul(x, p[self.in_w])?;
        let h = tape.add_row(h, p[self.in_b])?;
        let h = tape.add_const(h, &pe)?;
        let mut h = drop.apply(tape, h)?;

        for layer in &self.layers {
            let q = tape.matmul(h, p[layer.wq])?;
            let k = tape.matmul(h, p[layer.wk])?;
            let v = tape.matmul(h, p[layer.wv])?;
            let mut seq_out = Vec::with_capacity(lengths.len());
            let mut off = 0;
            for &n in lengths {
                let mask = causal_mask(n);
                let (qs, ks, vs) = (tape.slice_rows(q, off, n)?, tape.slice_rows(k, off, n)?, tape.slice_rows(v, off, n)?);
                let mut heads = Vec::with_capacity(c.heads);
                for hd in 0..c.heads {
                    let qh = tape.slice_cols(qs, hd * dh, dh)?;
                    let kh = tape.slice_cols(ks, hd * dh, dh)?;
                    let vh = tape.slice_cols(vs, hd * dh, dh)?;
                    let scores = tape.matmul_t(qh, kh)?;
                    let scores = tape.scale(scores, scale);
                    let scores = tape.add_const(scores, &mask)?;
                    let attn = tape.softmax_rows(scores)?;
                    heads.push(tape.matmul(attn, vh)?);
                }
                seq_out.push(if heads.len() == 1 { heads[0] } else { tape.concat_cols(&heads)? });
                off += n;
            }
            let att = if seq_out.len() == 1 { seq_out[0] } else { tape.concat_rows(&seq_out)? };
            let att = tape.matmul(att, p[layer.wo])?;
            let att = drop.apply(tape, att)?;
            let res = tape.add(h, att)?;
            let normed = tape.layer_norm(res)?;
            let normed = tape.mul_row(normed, p[layer.ln1_g])?;
            h = tape.add_row(normed, p[layer.ln1_b])?;

            if let Some([w1, b1, w2, b2, g2, bb2]) = layer.ff {
                let f = tape.matmul(h, p[w1])?;
                let f = tape.add_row(f, p[b1])?;
                let f = tape.relu(f);
                let f = tape.matmul(f, p[w2])?;
                let f = tape.add_row(f, p[b2])?;
                let f = drop.apply(tape, f)?;
                let res = tape.add(h, f)?;
                let normed = tape.layer_norm(res)?;
                let normed = tape.mul_row(normed, p[g2])?;
                h = tape.add_row(normed, p[bb2])?;
            }
        }
        let out = tape.matmul(h, p[self.head_w])?;
        let out = tape.add_row(out, p[self.head_b])?;
        let mean = tape.slice_cols(out, 0, c.input_dim)?;
        let raw = tape.slice_cols(out, c.input_dim, c.input_dim)?;
        let logvar = tape.clamp(raw, LOGVAR_MIN, LOGVAR_MAX);
        Ok(ForwardOutput { mean, logvar })
    }

    /// Evaluation-mode proposals for every position of one sequence.
    pub fn predict(&self, seq: &[[f64; 2]]) -> Result<Vec<ProposalDistribution>> {
        let mut tape = Tape::new();
        let p = self.params.attach(&mut tape)?;
        let input = Tensor::new(vec![seq.len(), 2], seq.iter().flatten().copied().collect())?;
        let out = self.forward(&mut tape, &p, &input, &[seq.len()], &mut DropoutSource::eval())?;
        let (mu, lv) = (tape.value(out.mean).data(), tape.value(out.logvar).data());
        Ok((0..seq.len())
            .map(|i| ProposalDistribution {
                mean: [mu[2 * i], mu[2 * i + 1]],
                var: [lv[2 * i].exp(), lv[2 * i + 1].exp()],
            })
            .collect())
    }

    /// Proposal for the element following `history`.
    pub fn propose_next(&self, history: &[[f64; 2]]) -> Result<ProposalDistribution> {
        if history.is_empty() || history.len() > self.config.max_len {
            return Err(Error::contract(format!(
                "history length {} outside 1..={}",
                history.len(),
                self.config.max_len
            )));
        }
        Ok(*self.predict(history)?.last().expect("non-empty"))
    }
}
