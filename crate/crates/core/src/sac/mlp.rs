use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{gemm, ParamSet, Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Fully connected ReLU network with a linear output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    pub params: ParamSet,
}

impl Mlp {
    /// Weights and biases uniform in ±1/√fan_in.
    pub fn new(prefix: &str, sizes: &[usize], seed: u64) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::contract(format!("network sizes {sizes:?} need at least two positive widths")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        for (l, w) in sizes.windows(2).enumerate() {
            let bound = 1.0 / (w[0] as f64).sqrt();
            let mut draw = |n: usize| (0..n).map(|_| rng.gen_range(-bound..bound)).collect::<Vec<_>>();
            params.push(format!("{prefix}.l{l}.w"), Tensor::new(vec![w[0], w[1]], draw(w[0] * w[1]))?);
            params.push(format!("{prefix}.l{l}.b"), Tensor::new(vec![1, w[1]], draw(w[1]))?);
        }
        Ok(Mlp { sizes: sizes.to_vec(), params })
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("non-empty")
    }

    /// Registers the weights as trainable parameters.
    pub fn attach(&self, tape: &mut Tape) -> Result<Vec<Var>> {
        self.params.attach(tape)
    }

    /// Registers the weights as constants; gradients flow through them to
    /// the input but are not reported as parameter gradients.
    pub fn attach_frozen(&self, tape: &mut Tape) -> Result<Vec<Var>> {
        self.params.tensors().iter().map(|t| tape.leaf(t.clone())).collect()
    }

    pub fn forward(&self, tape: &mut Tape, w: &[Var], x: Var) -> Result<Var> {
        let layers = self.sizes.len() - 1;
        let mut h = x;
        for l in 0..layers {
            h = tape.matmul(h, w[2 * l])?;
            h = tape.add_row(h, w[2 * l + 1])?;
            if l + 1 < layers {
                h = tape.relu(h);
            }
        }
        Ok(h)
    }

    /// Tape-free forward for `rows` stacked inputs.
    pub fn infer(&self, x: &[f64], rows: usize) -> Result<Vec<f64>> {
        if x.len() != rows * self.input_dim() {
            return Err(Error::contract(format!("input of {} values for {rows}×{}", x.len(), self.input_dim())));
        }
        let layers = self.sizes.len() - 1;
        let mut h = x.to_vec();
        for l in 0..layers {
            let (k, n) = (self.sizes[l], self.sizes[l + 1]);
            let mut out = vec![0.0; rows * n];
            gemm(rows, k, n, 1.0, &h, false, self.params.get(2 * l).data(), false, 0.0, &mut out);
            let b = self.params.get(2 * l + 1).data();
            for row in out.chunks_mut(n) {
                for (o, bi) in row.iter_mut().zip(b) {
                    *o += bi;
                    if l + 1 < layers {
                        *o = o.max(0.0);
                    }
                }
            }
            h = out;
        }
        Ok(h)
    }
}
