//! Teacher-forced NLL training and autoregressive generation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::autodiff::{Adam, ParamSet, Tape, Tensor, Var};
use crate::error::{Error, Result};

use super::infer::InferenceState;
use super::model::{DropoutSource, Transformer, TransformerConfig};

/// Sequences stacked row-wise without padding; `lengths` delimits them.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceBatch {
    pub rows: Vec<[f64; 2]>,
    pub lengths: Vec<usize>,
}

impl SequenceBatch {
    pub fn new(seqs: &[&[[f64; 2]]]) -> Result<Self> {
        let mut rows = Vec::new();
        let mut lengths = Vec::new();
        for s in seqs {
            if s.is_empty() {
                return Err(Error::contract("empty sequence in batch"));
            }
            if s.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::contract("sequence values must lie in [0, 1]"));
            }
            rows.extend_from_slice(s);
            lengths.push(s.len());
        }
        Ok(SequenceBatch { rows, lengths })
    }

    pub fn tensor(&self) -> Tensor {
        Tensor::new(vec![self.rows.len(), 2], self.rows.iter().flatten().copied().collect()).expect("shape")
    }

    /// Inputs and one-step-ahead targets: every sequence loses its last
    /// element on the input side and its first on the target side.
    /// Causality makes the truncated forward identical to the full one on
    /// the kept positions. Sequences of length 1 predict nothing and drop out.
    pub fn shifted(&self) -> Option<(SequenceBatch, Tensor)> {
        let mut inputs = Vec::new();
        let mut lengths = Vec::new();
        let mut targets = Vec::new();
        let mut off = 0;
        for &n in &self.lengths {
            if n >= 2 {
                inputs.extend_from_slice(&self.rows[off..off + n - 1]);
                targets.extend(self.rows[off + 1..off + n].iter().flatten());
                lengths.push(n - 1);
            }
            off += n;
        }
        if lengths.is_empty() {
            return None;
        }
        let count = inputs.len();
        Some((SequenceBatch { rows: inputs, lengths }, Tensor::new(vec![count, 2], targets).expect("shape")))
    }
}

const LN_2PI: f64 = 1.8378770664093453;

/// (1/2N)·Σ [ln 2π + log σ² + (y − μ)²/σ²] over N rows and both columns.
pub fn nll_loss(tape: &mut Tape, mean: Var, logvar: Var, target: &Tensor) -> Result<Var> {
    let rows = tape.value(mean).dims()?.0;
    let y = tape.leaf(target.clone())?;
    let diff = tape.sub(y, mean)?;
    let sq = tape.square(diff);
    let neg = tape.neg(logvar);
    let prec = tape.exp(neg);
    let quad = tape.mul(sq, prec)?;
    let terms = tape.add(quad, logvar)?;
    let total = tape.sum(terms);
    let cols = tape.value(mean).dims()?.1;
    let total = tape.add_const(total, &Tensor::scalar(LN_2PI * (rows * cols) as f64))?;
    Ok(tape.scale(total, 1.0 / (2.0 * rows as f64)))
}

/// Builds the loss graph for a batch; returns `None` if nothing is predicted.
fn batch_loss(
    model: &Transformer,
    tape: &mut Tape,
    batch: &SequenceBatch,
    drop: &mut DropoutSource,
) -> Result<Option<Var>> {
    let Some((inputs, targets)) = batch.shifted() else { return Ok(None) };
    let p = model.params.attach(tape)?;
    let out = model.forward(tape, &p, &inputs.tensor(), &inputs.lengths, drop)?;
    Ok(Some(nll_loss(tape, out.mean, out.logvar, &targets)?))
}

/// Evaluation-mode NLL over a set of sequences (one combined average).
pub fn evaluate_nll(model: &Transformer, seqs: &[&[[f64; 2]]]) -> Result<f64> {
    let batch = SequenceBatch::new(seqs)?;
    let mut tape = Tape::new();
    match batch_loss(model, &mut tape, &batch, &mut DropoutSource::eval())? {
        Some(l) => Ok(tape.value(l).item()),
        None => Err(Error::contract("no sequence longer than one element")),
    }
}

/// Loss and parameter gradients for one batch.
pub fn loss_and_grads(
    model: &Transformer,
    batch: &SequenceBatch,
    drop: &mut DropoutSource,
) -> Result<(f64, Vec<Tensor>)> {
    let mut tape = Tape::new();
    let loss = batch_loss(model, &mut tape, batch, drop)?
        .ok_or_else(|| Error::contract("no sequence longer than one element"))?;
    let mut grads = model.params.zero_grads();
    tape.backward(loss)?.accumulate_params(&mut grads);
    Ok((tape.value(loss).item(), grads))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean training loss per epoch.
    pub train_loss: Vec<f64>,
    /// Validation NLL after each epoch.
    pub val_loss: Vec<f64>,
    pub best_epoch: usize,
    pub best_val: f64,
    /// Set when a non-finite loss stopped training early.
    pub diverged: bool,
}

/// Trains from a seeded initialization and returns the model restored to
/// its best validation epoch.
pub fn train(
    config: &TransformerConfig,
    train_seqs: &[&[[f64; 2]]],
    val_seqs: &[&[[f64; 2]]],
    seed: u64,
    mut on_epoch: impl FnMut(usize, f64, f64),
) -> Result<(Transformer, TrainReport)> {
    if train_seqs.is_empty() || val_seqs.is_empty() {
        return Err(Error::contract("training needs non-empty train and validation splits"));
    }
    if let Some(s) = train_seqs.iter().chain(val_seqs).find(|s| s.len() > config.max_len) {
        return Err(Error::contract(format!("sequence of length {} exceeds max_len {}", s.len(), config.max_len)));
    }
    let mut model = Transformer::new(config.clone(), seed)?;
    let mut adam = Adam::new(&model.params, config.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f_da7a);
    let mut best: Option<(ParamSet, usize, f64)> = None;
    let mut report = TrainReport {
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        best_epoch: 0,
        best_val: f64::INFINITY,
        diverged: false,
    };
    let mut order: Vec<usize> = (0..train_seqs.len()).collect();

    'epochs: for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let (mut sum, mut count) = (0.0, 0usize);
        for chunk in order.chunks(config.batch) {
            let seqs: Vec<&[[f64; 2]]> = chunk.iter().map(|&i| train_seqs[i]).collect();
            let batch = SequenceBatch::new(&seqs)?;
            if batch.shifted().is_none() {
                continue;
            }
            let mut drop = DropoutSource { rate: config.dropout, rng: Some(&mut rng) };
            let (loss, grads) = loss_and_grads(&model, &batch, &mut drop)?;
            if !loss.is_finite() || adam.step(&mut model.params, &grads).is_err() {
                report.diverged = true;
                break 'epochs;
            }
            sum += loss;
            count += 1;
        }
        let val = evaluate_nll(&model, val_seqs)?;
        if !val.is_finite() {
            report.diverged = true;
            break;
        }
        let train_mean = if count > 0 { sum / count as f64 } else { f64::NAN };
        report.train_loss.push(train_mean);
        report.val_loss.push(val);
        on_epoch(epoch, train_mean, val);
        if best.as_ref().is_none_or(|b| val < b.2) {
            best = Some((model.params.clone(), epoch, val));
        }
    }
    match best {
        Some((params, epoch, val)) => {
            model.params = params;
            report.best_epoch = epoch;
            report.best_val = val;
            Ok((model, report))
        }
        None => Err(Error::NonFinite("transformer training diverged before the first epoch finished".into())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GenerationMode {
    #[default]
    Mean,
    Sample,
}

/// Autoregressive rollout from a first action. Each appended element is
/// the proposal mean (or a Gaussian draw) clamped to [0, 1].
pub fn generate(
    model: &Transformer,
    first: [f64; 2],
    steps: usize,
    mode: GenerationMode,
    seed: u64,
) -> Result<Vec<[f64; 2]>> {
    if steps + 1 > model.config.max_len {
        return Err(Error::contract(format!("{steps} steps exceed max_len {}", model.config.max_len)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = InferenceState::new(model);
    let mut seq = vec![first];
    let mut prop = state.push(first)?;
    for s in 0..steps {
        let mut next = [0.0; 2];
        for d in 0..2 {
            let v = match mode {
                GenerationMode::Mean => prop.mean[d],
                GenerationMode::Sample => {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    prop.mean[d] + e * prop.var[d].sqrt()
                }
            };
            next[d] = v.clamp(0.0, 1.0);
        }
        seq.push(next);
        if s + 1 < steps {
            prop = state.push(next)?;
        }
    }
    Ok(seq)
}
