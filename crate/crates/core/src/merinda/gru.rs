//! GRU layer and dense coefficient head.
//!
//! All parameters live in one flat vector so the optimizer, gradient clipping
//! and finite-difference checks can treat the model uniformly. Matrices are
//! stored row-major.

use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Named parameter blocks, in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ParamBlock {
    WReset,
    WUpdate,
    WCandidate,
    BReset,
    BUpdate,
    BCandidate,
    WHead,
    BHead,
}

impl ParamBlock {
    pub const ALL: [ParamBlock; 8] = [
        ParamBlock::WReset,
        ParamBlock::WUpdate,
        ParamBlock::WCandidate,
        ParamBlock::BReset,
        ParamBlock::BUpdate,
        ParamBlock::BCandidate,
        ParamBlock::WHead,
        ParamBlock::BHead,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ParamBlock::WReset => "W_r",
            ParamBlock::WUpdate => "W_z",
            ParamBlock::WCandidate => "W_a",
            ParamBlock::BReset => "b_r",
            ParamBlock::BUpdate => "b_z",
            ParamBlock::BCandidate => "b_a",
            ParamBlock::WHead => "W_head",
            ParamBlock::BHead => "b_head",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|b| b.name() == name)
    }
}

/// GRU with hidden size `V` over inputs of size `input_size`, followed by a
/// dense head producing `n_coefficients` model coefficients and `n_shifts`
/// input shifts.
#[derive(Debug, Clone, PartialEq)]
pub struct GruModel {
    hidden_size: usize,
    input_size: usize,
    n_coefficients: usize,
    n_shifts: usize,
    params: Vec<f64>,
}

/// Intermediates of one GRU step, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct GruStepCache {
    pub a_prev: Vec<f64>,
    pub x: Vec<f64>,
    pub r: Vec<f64>,
    pub z: Vec<f64>,
    pub cc: Vec<f64>,
    /// `r * a_prev`, the gated state fed to the candidate.
    pub gated: Vec<f64>,
}

/// Dense-head outputs after masking.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadOutput {
    pub theta: Vec<f64>,
    pub shifts: Vec<f64>,
}

impl GruModel {
    pub fn zeros(
        hidden_size: usize,
        input_size: usize,
        n_coefficients: usize,
        n_shifts: usize,
    ) -> Self {
        let mut model = Self {
            hidden_size,
            input_size,
            n_coefficients,
            n_shifts,
            params: Vec::new(),
        };
        model.params = vec![0.0; model.param_count()];
        model
    }

    /// Uniform initialization in `+-1/sqrt(fan_in)`.
    pub fn init_uniform<R: Rng>(
        hidden_size: usize,
        input_size: usize,
        n_coefficients: usize,
        n_shifts: usize,
        rng: &mut R,
    ) -> Self {
        let mut model = Self::zeros(hidden_size, input_size, n_coefficients, n_shifts);
        let gate_bound = 1.0 / ((hidden_size + input_size) as f64).sqrt();
        let head_bound = 1.0 / (hidden_size as f64).sqrt();
        for block in ParamBlock::ALL {
            let bound = match block {
                ParamBlock::WHead | ParamBlock::BHead => head_bound,
                _ => gate_bound,
            };
            for p in model.block_mut(block) {
                *p = rng.random_range(-bound..bound);
            }
        }
        model
    }

    pub fn from_params(
        hidden_size: usize,
        input_size: usize,
        n_coefficients: usize,
        n_shifts: usize,
        params: Vec<f64>,
    ) -> Option<Self> {
        let mut model = Self::zeros(hidden_size, input_size, n_coefficients, n_shifts);
        if params.len() != model.params.len() {
            return None;
        }
        model.params = params;
        Some(model)
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden_size
    }

    pub fn input_size(&self) -> usize {
        self.input_size
    }

    pub fn n_coefficients(&self) -> usize {
        self.n_coefficients
    }

    pub fn n_shifts(&self) -> usize {
        self.n_shifts
    }

    pub fn output_size(&self) -> usize {
        self.n_coefficients + self.n_shifts
    }

    pub fn param_count(&self) -> usize {
        self.block_range(ParamBlock::BHead).end
    }

    /// `(rows, cols)` of a block; biases are `(len, 1)`.
    pub fn block_shape(&self, block: ParamBlock) -> (usize, usize) {
        let v = self.hidden_size;
        let concat = v + self.input_size;
        match block {
            ParamBlock::WReset | ParamBlock::WUpdate | ParamBlock::WCandidate => (v, concat),
            ParamBlock::BReset | ParamBlock::BUpdate | ParamBlock::BCandidate => (v, 1),
            ParamBlock::WHead => (self.output_size(), v),
            ParamBlock::BHead => (self.output_size(), 1),
        }
    }

    pub fn block_range(&self, block: ParamBlock) -> Range<usize> {
        let mut start = 0;
        for b in ParamBlock::ALL {
            let (r, c) = self.block_shape(b);
            if b == block {
                return start..start + r * c;
            }
            start += r * c;
        }
        unreachable!("every block is in ALL")
    }

    pub fn block(&self, block: ParamBlock) -> &[f64] {
        &self.params[self.block_range(block)]
    }

    pub fn block_mut(&mut self, block: ParamBlock) -> &mut [f64] {
        let range = self.block_range(block);
        &mut self.params[range]
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// One GRU step:
    ///
    /// ```text
    /// r  = sigmoid(W_r [a_prev; x] + b_r)
    /// z  = sigmoid(W_z [a_prev; x] + b_z)
    /// cc = tanh(W_a [r * a_prev; x] + b_a)
    /// a  = z * cc + (1 - z) * a_prev
    /// ```
    pub fn cell_forward(&self, a_prev: &[f64], x: &[f64]) -> (Vec<f64>, GruStepCache) {
        let v = self.hidden_size;
        debug_assert_eq!(a_prev.len(), v);
        debug_assert_eq!(x.len(), self.input_size);

        let mut r = self.block(ParamBlock::BReset).to_vec();
        let mut z = self.block(ParamBlock::BUpdate).to_vec();
        affine_concat(self.block(ParamBlock::WReset), a_prev, x, &mut r);
        affine_concat(self.block(ParamBlock::WUpdate), a_prev, x, &mut z);
        r.iter_mut().for_each(|g| *g = sigmoid(*g));
        z.iter_mut().for_each(|g| *g = sigmoid(*g));

        let gated: Vec<f64> = r.iter().zip(a_prev).map(|(r, a)| r * a).collect();
        let mut cc = self.block(ParamBlock::BCandidate).to_vec();
        affine_concat(self.block(ParamBlock::WCandidate), &gated, x, &mut cc);
        cc.iter_mut().for_each(|g| *g = g.tanh());

        let a: Vec<f64> = (0..v)
            .map(|i| z[i] * cc[i] + (1.0 - z[i]) * a_prev[i])
            .collect();
        let cache = GruStepCache {
            a_prev: a_prev.to_vec(),
            x: x.to_vec(),
            r,
            z,
            cc,
            gated,
        };
        (a, cache)
    }

    /// Folds the cell over a window (rows of `inputs`), starting from a zero
    /// hidden state.
    pub fn sequence_forward<'a, I>(&self, inputs: I) -> (Vec<f64>, Vec<GruStepCache>)
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut a = vec![0.0; self.hidden_size];
        let mut caches = Vec::new();
        for x in inputs {
            let (next, cache) = self.cell_forward(&a, x);
            caches.push(cache);
            a = next;
        }
        (a, caches)
    }

    /// Dense head `W_head a + b_head` with a linear activation; coefficient
    /// outputs outside `mask` are exactly zero.
    pub fn head_forward(&self, hidden: &[f64], mask: &[bool]) -> HeadOutput {
        debug_assert_eq!(mask.len(), self.n_coefficients);
        let mut out = self.block(ParamBlock::BHead).to_vec();
        matvec_add(self.block(ParamBlock::WHead), hidden, &mut out);
        let shifts = out.split_off(self.n_coefficients);
        let theta = out
            .into_iter()
            .zip(mask)
            .map(|(v, &active)| if active { v } else { 0.0 })
            .collect();
        HeadOutput { theta, shifts }
    }

    /// Accumulates head gradients into `grads` and returns `dL/d hidden`.
    pub fn head_backward(
        &self,
        hidden: &[f64],
        d_theta: &[f64],
        d_shifts: &[f64],
        mask: &[bool],
        grads: &mut [f64],
    ) -> Vec<f64> {
        let d_out: Vec<f64> = d_theta
            .iter()
            .zip(mask)
            .map(|(&g, &active)| if active { g } else { 0.0 })
            .chain(d_shifts.iter().copied())
            .collect();
        let v = self.hidden_size;
        let w_range = self.block_range(ParamBlock::WHead);
        let b_range = self.block_range(ParamBlock::BHead);
        for (o, &g) in d_out.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            grads[b_range.start + o] += g;
            let row = &mut grads[w_range.start + o * v..w_range.start + (o + 1) * v];
            for (w, &h) in row.iter_mut().zip(hidden) {
                *w += g * h;
            }
        }
        let mut d_hidden = vec![0.0; v];
        matvec_t_add(self.block(ParamBlock::WHead), &d_out, &mut d_hidden);
        d_hidden
    }

    /// Backpropagation through time from `dL/d a_k`, accumulating gate
    /// gradients into `grads`.
    pub fn sequence_backward(&self, caches: &[GruStepCache], d_hidden: &[f64], grads: &mut [f64]) {
        let mut da = d_hidden.to_vec();
        for cache in caches.iter().rev() {
            da = self.cell_backward(cache, &da, grads);
        }
    }

    /// Backward through one step; returns `dL/d a_prev`.
    pub fn cell_backward(&self, cache: &GruStepCache, da: &[f64], grads: &mut [f64]) -> Vec<f64> {
        let v = self.hidden_size;
        let concat = v + self.input_size;
        let mut d_prev = vec![0.0; v];
        let mut d_pre_z = vec![0.0; v];
        let mut d_pre_a = vec![0.0; v];
        for i in 0..v {
            let dz = da[i] * (cache.cc[i] - cache.a_prev[i]);
            let dcc = da[i] * cache.z[i];
            d_prev[i] = da[i] * (1.0 - cache.z[i]);
            d_pre_z[i] = dz * cache.z[i] * (1.0 - cache.z[i]);
            d_pre_a[i] = dcc * (1.0 - cache.cc[i] * cache.cc[i]);
        }

        // Candidate: gradient w.r.t. its concatenated input [gated; x].
        let wa = self.block(ParamBlock::WCandidate);
        let mut d_gated = vec![0.0; v];
        for i in 0..v {
            let g = d_pre_a[i];
            if g == 0.0 {
                continue;
            }
            let row = &wa[i * concat..i * concat + v];
            for (d, w) in d_gated.iter_mut().zip(row) {
                *d += g * w;
            }
        }
        accumulate_outer(
            grads,
            self.block_range(ParamBlock::WCandidate),
            self.block_range(ParamBlock::BCandidate),
            &d_pre_a,
            &cache.gated,
            &cache.x,
        );

        let mut d_pre_r = vec![0.0; v];
        for i in 0..v {
            d_prev[i] += d_gated[i] * cache.r[i];
            let dr = d_gated[i] * cache.a_prev[i];
            d_pre_r[i] = dr * cache.r[i] * (1.0 - cache.r[i]);
        }

        for (block_w, block_b, d_pre) in [
            (ParamBlock::WUpdate, ParamBlock::BUpdate, &d_pre_z),
            (ParamBlock::WReset, ParamBlock::BReset, &d_pre_r),
        ] {
            let w = self.block(block_w);
            for i in 0..v {
                let g = d_pre[i];
                if g == 0.0 {
                    continue;
                }
                let row = &w[i * concat..i * concat + v];
                for (d, wij) in d_prev.iter_mut().zip(row) {
                    *d += g * wij;
                }
            }
            accumulate_outer(
                grads,
                self.block_range(block_w),
                self.block_range(block_b),
                d_pre,
                &cache.a_prev,
                &cache.x,
            );
        }
        d_prev
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

// out += W [a; x], W row-major with a.len() + x.len() columns.
fn affine_concat(w: &[f64], a: &[f64], x: &[f64], out: &mut [f64]) {
    let cols = a.len() + x.len();
    for (i, o) in out.iter_mut().enumerate() {
        let row = &w[i * cols..(i + 1) * cols];
        let (wa, wx) = row.split_at(a.len());
        *o += dot(wa, a) + dot(wx, x);
    }
}

fn matvec_add(w: &[f64], x: &[f64], out: &mut [f64]) {
    let cols = x.len();
    for (i, o) in out.iter_mut().enumerate() {
        *o += dot(&w[i * cols..(i + 1) * cols], x);
    }
}

// out += W^T g.
fn matvec_t_add(w: &[f64], g: &[f64], out: &mut [f64]) {
    let cols = out.len();
    for (i, &gi) in g.iter().enumerate() {
        if gi == 0.0 {
            continue;
        }
        for (o, wij) in out.iter_mut().zip(&w[i * cols..(i + 1) * cols]) {
            *o += gi * wij;
        }
    }
}

// dW += d_pre [left; right]^T, db += d_pre.
fn accumulate_outer(
    grads: &mut [f64],
    w_range: Range<usize>,
    b_range: Range<usize>,
    d_pre: &[f64],
    left: &[f64],
    right: &[f64],
) {
    let cols = left.len() + right.len();
    for (i, &g) in d_pre.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        grads[b_range.start + i] += g;
        let row = &mut grads[w_range.start + i * cols..w_range.start + (i + 1) * cols];
        let (rl, rr) = row.split_at_mut(left.len());
        for (d, l) in rl.iter_mut().zip(left) {
            *d += g * l;
        }
        for (d, r) in rr.iter_mut().zip(right) {
            *d += g * r;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
