//! Incremental evaluation-mode inference with cached keys and values.
//!
//! Each push costs one row through every layer instead of re-running the
//! whole prefix. Arithmetic mirrors the tape forward operation for
//! operation so both paths produce the same proposals.

use crate::autodiff::{gemm, layer_norm_in_place, softmax_in_place};
use crate::error::{Error, Result};

use super::model::{positional_encoding, ProposalDistribution, Transformer, LOGVAR_MAX, LOGVAR_MIN};

#[derive(Debug, Clone)]
struct LayerCache {
    keys: Vec<f64>,
    values: Vec<f64>,
}

/// Cached keys and values of one sequence, detached from the model so it
/// can live next to a shared handle to it.
#[derive(Debug, Clone)]
pub struct KvCache {
    cache: Vec<LayerCache>,
    pe: Vec<f64>,
    len: usize,
    last: Option<ProposalDistribution>,
}

/// Running state for one autoregressive sequence.
#[derive(Debug, Clone)]
pub struct InferenceState<'m> {
    model: &'m Transformer,
    cache: KvCache,
}

fn row_matmul(x: &[f64], w: &[f64], k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    gemm(1, k, n, 1.0, x, false, w, false, 0.0, &mut out);
    out
}

fn add_in_place(a: &mut [f64], b: &[f64]) {
    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
}

impl<'m> InferenceState<'m> {
    pub fn new(model: &'m Transformer) -> Self {
        InferenceState { model, cache: KvCache::new(model) }
    }

    pub fn len(&self) -> usize {
        self.cache.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cache.is_empty()
    }

    pub fn last(&self) -> Option<ProposalDistribution> {
        self.cache.last()
    }

    /// Appends one element and returns the proposal for the element after it.
    pub fn push(&mut self, x: [f64; 2]) -> Result<ProposalDistribution> {
        self.cache.push(self.model, x)
    }
}

impl KvCache {
    pub fn new(model: &Transformer) -> Self {
        let c = &model.config;
        KvCache {
            cache: vec![LayerCache { keys: Vec::new(), values: Vec::new() }; c.layers],
            pe: positional_encoding(c.max_len, c.d_model).into_data(),
            len: 0,
            last: None,
        }
    }

    /// Forgets the sequence but keeps allocations.
    pub fn clear(&mut self) {
        for c in &mut self.cache {
            c.keys.clear();
            c.values.clear();
        }
        self.len = 0;
        self.last = None;
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Proposal produced by the most recent push.
    pub fn last(&self) -> Option<ProposalDistribution> {
        self.last
    }

    /// Appends one element and returns the proposal for the element after
    /// it. The cache must only ever be used with the model it was built for.
    pub fn push(&mut self, m: &Transformer, x: [f64; 2]) -> Result<ProposalDistribution> {
        let c = &m.config;
        if self.cache.len() != c.layers || self.pe.len() != c.max_len * c.d_model {
            return Err(Error::contract("cache built for a different model shape"));
        }
        if self.len >= c.max_len {
            return Err(Error::contract(format!("sequence already at max_len {}", c.max_len)));
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite(format!("inference input {x:?}")));
        }
        let (d, dh) = (c.d_model, c.head_dim());
        let scale = 1.0 / (dh as f64).sqrt();
        let p = |i: usize| m.params.get(i).data();

        let mut h = row_matmul(&x, p(m.in_w), c.input_dim, d);
        add_in_place(&mut h, p(m.in_b));
        add_in_place(&mut h, &self.pe[self.len * d..(self.len + 1) * d]);

        let n = self.len + 1;
        for (layer, cache) in m.layers.iter().zip(&mut self.cache) {
            let q = row_matmul(&h, p(layer.wq), d, d);
            cache.keys.extend(row_matmul(&h, p(layer.wk), d, d));
            cache.values.extend(row_matmul(&h, p(layer.wv), d, d));
            let mut att = Vec::with_capacity(d);
            let mut kh = vec![0.0; n * dh];
            let mut vh = vec![0.0; n * dh];
            for hd in 0..c.heads {
                for j in 0..n {
                    let src = j * d + hd * dh;
                    kh[j * dh..(j + 1) * dh].copy_from_slice(&cache.keys[src..src + dh]);
                    vh[j * dh..(j + 1) * dh].copy_from_slice(&cache.values[src..src + dh]);
                }
                let mut scores = vec![0.0; n];
                gemm(1, dh, n, 1.0, &q[hd * dh..(hd + 1) * dh], false, &kh, true, 0.0, &mut scores);
                scores.iter_mut().for_each(|s| *s *= scale);
                softmax_in_place(&mut scores);
                let mut out = vec![0.0; dh];
                gemm(1, n, dh, 1.0, &scores, false, &vh, false, 0.0, &mut out);
                att.extend(out);
            }
            let att = row_matmul(&att, p(layer.wo), d, d);
            add_in_place(&mut h, &att);
            layer_norm_in_place(&mut h);
            h.iter_mut().zip(p(layer.ln1_g)).for_each(|(a, g)| *a *= g);
            add_in_place(&mut h, p(layer.ln1_b));

            if let Some([w1, b1, w2, b2, g2, bb2]) = layer.ff {
                let mut f = row_matmul(&h, p(w1), d, c.ff_hidden);
                add_in_place(&mut f, p(b1));
                f.iter_mut().for_each(|v| *v = v.max(0.0));
                let mut f = row_matmul(&f, p(w2), c.ff_hidden, d);
                add_in_place(&mut f, p(b2));
                add_in_place(&mut h, &f);
                layer_norm_in_place(&mut h);
                h.iter_mut().zip(p(g2)).for_each(|(a, g)| *a *= g);
                add_in_place(&mut h, p(bb2));
            }
        }
        let mut out = row_matmul(&h, p(m.head_w), d, 2 * c.input_dim);
        add_in_place(&mut out, p(m.head_b));
        self.len = n;
        let lv = |v: f64| v.clamp(LOGVAR_MIN, LOGVAR_MAX).exp();
        let prop = ProposalDistribution { mean: [out[0], out[1]], var: [lv(out[2]), lv(out[3])] };
        if !(prop.mean.iter().chain(&prop.var).all(|v| v.is_finite())) {
            return Err(Error::NonFinite("transformer proposal".into()));
        }
        self.last = Some(prop);
        Ok(prop)
    }
}
