use std::collections::HashMap;

use super::{Batch, EmbeddingMatrix};
use crate::error::{Error, Result};

/// Gradients of the batch loss, only for parameters the batch touched.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGradients {
    dim: usize,
    row_ids: Vec<u32>,
    row_grads: Vec<f64>,
    weight_ids: Vec<u32>,
    weight_grads: Vec<f64>,
    bias_grads: Vec<f64>,
}

impl SparseGradients {
    pub fn row_ids(&self) -> &[u32] {
        &self.row_ids
    }

    /// Ids whose output weight and bias received a gradient.
    pub fn weight_ids(&self) -> &[u32] {
        &self.weight_ids
    }

    pub fn row(&self, id: u32) -> Option<&[f64]> {
        let i = self.row_ids.iter().position(|r| *r == id)?;
        Some(&self.row_grads[i * self.dim..(i + 1) * self.dim])
    }

    pub fn weight(&self, id: u32) -> Option<&[f64]> {
        let i = self.weight_ids.iter().position(|r| *r == id)?;
        Some(&self.weight_grads[i * self.dim..(i + 1) * self.dim])
    }

    pub fn bias(&self, id: u32) -> Option<f64> {
        let i = self.weight_ids.iter().position(|r| *r == id)?;
        Some(self.bias_grads[i])
    }

    /// One SGD step: `param -= learning_rate * grad`.
    pub fn apply(&self, m: &mut EmbeddingMatrix, learning_rate: f64) {
        let dim = self.dim;
        let (rows, weights, biases) = m.rows_mut_raw();
        for (i, id) in self.row_ids.iter().enumerate() {
            debug_assert_ne!(*id, 0);
            let dst = &mut rows[*id as usize * dim..(*id as usize + 1) * dim];
            for (p, g) in dst.iter_mut().zip(&self.row_grads[i * dim..(i + 1) * dim]) {
                *p = (f64::from(*p) - learning_rate * g) as f32;
            }
        }
        for (i, id) in self.weight_ids.iter().enumerate() {
            let dst = &mut weights[*id as usize * dim..(*id as usize + 1) * dim];
            for (p, g) in dst
                .iter_mut()
                .zip(&self.weight_grads[i * dim..(i + 1) * dim])
            {
                *p = (f64::from(*p) - learning_rate * g) as f32;
            }
            let b = &mut biases[*id as usize];
            *b = (f64::from(*b) - learning_rate * self.bias_grads[i]) as f32;
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Slot allocator keyed by id, preserving first-touch order.
struct Slots {
    index: HashMap<u32, usize>,
    ids: Vec<u32>,
}

impl Slots {
    fn new() -> Self {
        Self {
            index: HashMap::new(),
            ids: Vec::new(),
        }
    }

    fn slot(&mut self, id: u32, grads: &mut Vec<f64>, width: usize) -> usize {
        *self.index.entry(id).or_insert_with(|| {
            self.ids.push(id);
            grads.resize(grads.len() + width, 0.0);
            self.ids.len() - 1
        })
    }
}

/// Mean negative log-likelihood of the batch, where each pair `(t, c)`
/// contributes `-ln σ(s(t, c)) - Σ_k ln σ(-s(t, k))` over the shared noise
/// ids `k`, with `s(t, w) = rows[t] · nce_weights[w] + nce_biases[w]`.
///
/// Gradients are reported for the target rows and for the output weights and
/// biases of contexts and noise ids. Row 0 never receives a gradient.
pub fn nce_loss_and_grad(
    batch: &Batch,
    negatives: &[u32],
    m: &EmbeddingMatrix,
) -> Result<(f64, SparseGradients)> {
    let dim = m.dim();
    let rows = m.vocab_rows() as u32;
    if let Some(bad) = batch
        .targets
        .iter()
        .chain(&batch.contexts)
        .chain(negatives)
        .find(|id| **id >= rows)
    {
        return Err(Error::Consistency(format!(
            "id {bad} out of range for {rows} embedding rows"
        )));
    }
    let mut out = SparseGradients {
        dim,
        row_ids: Vec::new(),
        row_grads: Vec::new(),
        weight_ids: Vec::new(),
        weight_grads: Vec::new(),
        bias_grads: Vec::new(),
    };
    if batch.is_empty() {
        return Ok((0.0, out));
    }
    let scale = 1.0 / batch.len() as f64;

    let to_f64 = |xs: &[f32]| xs.iter().map(|v| f64::from(*v)).collect::<Vec<f64>>();
    // Noise output vectors are reused by every pair.
    let neg_w: Vec<f64> = negatives
        .iter()
        .flat_map(|k| to_f64(m.weight(*k)))
        .collect();
    let neg_b: Vec<f64> = negatives.iter().map(|k| f64::from(m.bias(*k))).collect();
    let mut neg_gw = vec![0.0f64; negatives.len() * dim];
    let mut neg_gb = vec![0.0f64; negatives.len()];

    let mut row_slots = Slots::new();
    let mut weight_slots = Slots::new();
    let mut ctx_gw: Vec<f64> = Vec::new();
    let mut ctx_gb: Vec<f64> = Vec::new();

    let mut loss = 0.0f64;
    let mut grad_u = vec![0.0f64; dim];
    for (t, c) in batch.pairs() {
        let u = to_f64(m.row(t));
        grad_u.iter_mut().for_each(|g| *g = 0.0);

        let wc = to_f64(m.weight(c));
        let s = dot(&u, &wc) + f64::from(m.bias(c));
        loss += softplus(-s);
        let g = (sigmoid(s) - 1.0) * scale;
        axpy(g, &wc, &mut grad_u);
        let slot = weight_slots.slot(c, &mut ctx_gw, dim);
        if ctx_gb.len() <= slot {
            ctx_gb.push(0.0);
        }
        axpy(g, &u, &mut ctx_gw[slot * dim..(slot + 1) * dim]);
        ctx_gb[slot] += g;

        for (j, wk) in neg_w.chunks_exact(dim).enumerate() {
            let s = dot(&u, wk) + neg_b[j];
            loss += softplus(s);
            let g = sigmoid(s) * scale;
            axpy(g, wk, &mut grad_u);
            axpy(g, &u, &mut neg_gw[j * dim..(j + 1) * dim]);
            neg_gb[j] += g;
        }

        if t != 0 {
            let slot = row_slots.slot(t, &mut out.row_grads, dim);
            for (dst, g) in out.row_grads[slot * dim..(slot + 1) * dim]
                .iter_mut()
                .zip(&grad_u)
            {
                *dst += g;
            }
        }
    }

    // Fold the noise gradients into the per-id output slots; a noise id may
    // coincide with a context or repeat within the draw.
    for (j, k) in negatives.iter().enumerate() {
        let slot = weight_slots.slot(*k, &mut ctx_gw, dim);
        if ctx_gb.len() <= slot {
            ctx_gb.push(0.0);
        }
        for (dst, g) in ctx_gw[slot * dim..(slot + 1) * dim]
            .iter_mut()
            .zip(&neg_gw[j * dim..(j + 1) * dim])
        {
            *dst += g;
        }
        ctx_gb[slot] += neg_gb[j];
    }

    out.row_ids = row_slots.ids;
    out.weight_ids = weight_slots.ids;
    out.weight_grads = ctx_gw;
    out.bias_grads = ctx_gb;
    Ok((loss * scale, out))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
