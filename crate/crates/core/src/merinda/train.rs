//! Windowed training of the GRU flow against the ODE loss.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gru::{GruModel, ParamBlock};
use super::ode_loss::{
    row_major, window_loss, window_loss_with_gradient, WindowData, DIVERGED_LOSS,
};
use super::optim::{clip_global_norm, Adam};
use super::MerindaError;
use crate::dynamics::Trajectory;
use crate::library::{finite_difference_derivatives, CoefficientMatrix, PolynomialLibrary};
use crate::sindy::reconstruction_error_shifted;

/// How per-window head outputs combine into one coefficient estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    Mean,
    Median,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// GRU width `V`.
    pub hidden_size: usize,
    /// Windows per optimizer step `S_B`.
    pub batch_size: usize,
    /// Samples per window `k`.
    pub window_length: usize,
    /// Offset between consecutive window starts.
    pub window_stride: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Cosine decay target reached at the last epoch; `None` keeps the rate
    /// constant.
    pub final_learning_rate: Option<f64>,
    pub beta1: f64,
    pub beta2: f64,
    /// Global gradient-norm clip.
    pub clip_norm: f64,
    /// Epoch at which the top-|Θ| mask is computed and frozen; `None` means
    /// `epochs / 2`.
    pub prune_epoch: Option<usize>,
    /// Active coefficient count |Θ|; `None` keeps the full library.
    pub target_sparsity: Option<usize>,
    /// Pruning rounds. Active counts shrink geometrically toward
    /// `target_sparsity`, with rounds spread over the first half of the
    /// epochs after `prune_epoch`.
    pub prune_stages: usize,
    pub seed: u64,
    /// Internal RK4 step; must divide the sampling step. `None` uses the
    /// sampling step.
    pub solver_step: Option<f64>,
    pub aggregation: Aggregation,
    /// Scale head outputs by [`output_scales`] of the training data.
    pub scale_outputs: bool,
    /// Weight of the penalty on disagreement between the models emitted for
    /// different windows of a batch.
    pub consistency_weight: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden_size: 16,
            batch_size: 16,
            window_length: 20,
            window_stride: 1,
            epochs: 500,
            learning_rate: 1e-3,
            final_learning_rate: None,
            beta1: 0.9,
            beta2: 0.999,
            clip_norm: 10.0,
            prune_epoch: None,
            target_sparsity: None,
            prune_stages: 1,
            seed: 0,
            solver_step: None,
            aggregation: Aggregation::Mean,
            scale_outputs: true,
            consistency_weight: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn prune_epoch(&self) -> usize {
        self.prune_epoch.unwrap_or(self.epochs / 2)
    }

    /// `(epoch, active count)` for each pruning round, ending at the target.
    /// Empty without a target sparsity.
    pub fn prune_schedule(&self, n_coef: usize) -> Vec<(usize, usize)> {
        let Some(target) = self.target_sparsity else {
            return Vec::new();
        };
        let stages = self.prune_stages.max(1);
        let start = self.prune_epoch();
        let gap = self.epochs.saturating_sub(start) / (2 * stages);
        let ratio = n_coef.max(target) as f64 / target as f64;
        (0..stages)
            .map(|s| {
                let remaining = (stages - 1 - s) as f64 / stages as f64;
                let keep = (target as f64 * ratio.powf(remaining)).round() as usize;
                (start + s * gap, keep.clamp(target, n_coef.max(target)))
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), MerindaError> {
        let bad = |msg: &str| Err(MerindaError::InvalidConfig(msg.to_string()));
        if self.window_length < 2 {
            return bad("window_length must be at least 2");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.window_stride == 0 {
            return bad("window_stride must be at least 1");
        }
        if self.hidden_size == 0 {
            return bad("hidden_size must be at least 1");
        }
        if self.prune_epoch() > self.epochs {
            return bad("prune_epoch must not exceed epochs");
        }
        if self.prune_stages == 0 {
            return bad("prune_stages must be at least 1");
        }
        if self.target_sparsity == Some(0) {
            return bad("target_sparsity must be at least 1");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if let Some(lr) = self.final_learning_rate {
            if !(lr.is_finite() && lr > 0.0) {
                return bad("final_learning_rate must be positive");
            }
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        if !(self.clip_norm > 0.0) {
            return bad("clip_norm must be positive");
        }
        if !(self.consistency_weight.is_finite() && self.consistency_weight >= 0.0) {
            return bad("consistency_weight must be non-negative");
        }
        if let Some(h) = self.solver_step {
            if !(h.is_finite() && h > 0.0) {
                return bad("solver_step must be positive");
            }
        }
        Ok(())
    }

    /// Learning rate used during `epoch`.
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        match self.final_learning_rate {
            None => self.learning_rate,
            Some(end) => {
                let span = self.epochs.saturating_sub(1).max(1) as f64;
                let progress = (epoch as f64 / span).min(1.0);
                let cosine = 0.5 * (1.0 + (std::f64::consts::PI * progress).cos());
                end + (self.learning_rate - end) * cosine
            }
        }
    }

    fn substeps(&self, sample_step: f64) -> Result<usize, MerindaError> {
        let Some(h) = self.solver_step else {
            return Ok(1);
        };
        let ratio = sample_step / h;
        let rounded = ratio.round();
        if rounded < 1.0 || (ratio - rounded).abs() > 1e-9 * ratio.max(1.0) {
            return Err(MerindaError::InvalidConfig(format!(
                "solver_step {h} does not divide the sampling step {sample_step}"
            )));
        }
        Ok(rounded as usize)
    }
}

/// One training window: normalized GRU inputs plus the raw data the ODE
/// loss compares against.
#[derive(Debug, Clone)]
pub struct Window {
    /// `k x (n + m)` row-major, normalized per channel.
    pub features: Vec<f64>,
    /// `k x n` row-major.
    pub states: Vec<f64>,
    /// `k x m` row-major.
    pub inputs: Vec<f64>,
}

/// All windows cut from one trajectory.
#[derive(Debug, Clone)]
pub struct WindowSet {
    pub windows: Vec<Window>,
    pub n_states: usize,
    pub n_inputs: usize,
    pub window_length: usize,
    pub step: f64,
    pub substeps: usize,
    /// Fixed factors mapping head outputs to coefficients and shifts
    /// (`n * P` coefficient entries, then `m` shift entries).
    pub output_scale: Vec<f64>,
}

/// Per-output scale `rms(dx_i/dt) / rms(phi_j)` for coefficient `(i, j)` and
/// the input's standard deviation for each shift, so head outputs of order
/// one correspond to terms contributing at the scale of the observed
/// derivatives. Degenerate scales fall back to 1.
pub fn output_scales(traj: &Trajectory, library: &PolynomialLibrary) -> Vec<f64> {
    let n = traj.n_states();
    let m = traj.n_inputs();
    let finite_or_one = |v: f64| if v.is_finite() && v > 1e-12 { v } else { 1.0 };
    let rms = |col: &mut dyn Iterator<Item = f64>, len: usize| {
        (col.map(|v| v * v).sum::<f64>() / len as f64).sqrt()
    };
    let rows = traj.len();
    let d_scale: Vec<f64> = match finite_difference_derivatives(traj) {
        Ok(d) => (0..n)
            .map(|i| finite_or_one(rms(&mut d.column(i).iter().copied(), rows)))
            .collect(),
        Err(_) => vec![1.0; n],
    };
    let mut points = traj.states().clone().resize_horizontally(n + m, 0.0);
    for r in 0..rows {
        for c in 0..m {
            points[(r, n + c)] = traj.inputs()[(r, c)];
        }
    }
    let f_scale: Vec<f64> = match library.evaluate(&points) {
        Ok(phi) => (0..library.len())
            .map(|j| finite_or_one(rms(&mut phi.column(j).iter().copied(), rows)))
            .collect(),
        Err(_) => vec![1.0; library.len()],
    };
    let mut scale = Vec::with_capacity(n * library.len() + m);
    for d in &d_scale {
        scale.extend(f_scale.iter().map(|f| d / f));
    }
    for c in 0..m {
        let col = traj.inputs().column(c);
        let mean = col.mean();
        scale.push(finite_or_one(rms(&mut col.iter().map(|v| v - mean), rows)));
    }
    scale
}

impl WindowSet {
    /// Overlapping windows of `window_length` samples starting every
    /// `stride` samples. GRU features are standardized with the trajectory's
    /// per-channel mean and standard deviation (constant channels are only
    /// centred). The output scale starts at 1; see
    /// [`with_data_scale`](Self::with_data_scale).
    pub fn from_trajectory(
        traj: &Trajectory,
        library: &PolynomialLibrary,
        window_length: usize,
        stride: usize,
        substeps: usize,
    ) -> Result<Self, MerindaError> {
        if window_length < 2 || stride == 0 || substeps == 0 {
            return Err(MerindaError::InvalidConfig(
                "window_length >= 2, stride >= 1 and substeps >= 1 required".into(),
            ));
        }
        if traj.len() < window_length {
            return Err(MerindaError::TooShort {
                samples: traj.len(),
                window: window_length,
            });
        }
        let n = traj.n_states();
        let m = traj.n_inputs();
        let states = row_major(traj.states());
        let inputs = row_major(traj.inputs());
        let channels = n + m;
        let rows = traj.len();
        let mut features = Vec::with_capacity(rows * channels);
        for r in 0..rows {
            features.extend_from_slice(&states[r * n..(r + 1) * n]);
            features.extend_from_slice(&inputs[r * m..(r + 1) * m]);
        }
        for c in 0..channels {
            let mean = (0..rows).map(|r| features[r * channels + c]).sum::<f64>() / rows as f64;
            let var = (0..rows)
                .map(|r| (features[r * channels + c] - mean).powi(2))
                .sum::<f64>()
                / rows as f64;
            let std = var.sqrt();
            let scale = if std > 1e-12 { 1.0 / std } else { 1.0 };
            for r in 0..rows {
                let v = &mut features[r * channels + c];
                *v = (*v - mean) * scale;
            }
        }
        let output_scale = vec![1.0; n * library.len() + m];
        let windows = (0..=rows - window_length)
            .step_by(stride)
            .map(|s| Window {
                features: features[s * channels..(s + window_length) * channels].to_vec(),
                states: states[s * n..(s + window_length) * n].to_vec(),
                inputs: inputs[s * m..(s + window_length) * m].to_vec(),
            })
            .collect();
        Ok(Self {
            windows,
            n_states: n,
            n_inputs: m,
            window_length,
            step: traj.step(),
            substeps,
            output_scale,
        })
    }

    /// Replaces the unit output scale with [`output_scales`] of `traj`.
    pub fn with_data_scale(mut self, traj: &Trajectory, library: &PolynomialLibrary) -> Self {
        self.output_scale = output_scales(traj, library);
        self
    }

    /// Coefficients and shifts for one window under `mask`.
    fn head(&self, model: &GruModel, hidden: &[f64], mask: &[bool]) -> (Vec<f64>, Vec<f64>) {
        let out = model.head_forward(hidden, mask);
        let n_coef = out.theta.len();
        let theta = out
            .theta
            .iter()
            .zip(&self.output_scale)
            .map(|(o, s)| o * s)
            .collect();
        let shifts = out
            .shifts
            .iter()
            .zip(&self.output_scale[n_coef..])
            .map(|(o, s)| o * s)
            .collect();
        (theta, shifts)
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    fn data(&self, index: usize) -> WindowData<'_> {
        let w = &self.windows[index];
        WindowData {
            states: &w.states,
            inputs: &w.inputs,
            n_states: self.n_states,
            n_inputs: self.n_inputs,
            step: self.step,
            substeps: self.substeps,
        }
    }

    fn feature_rows(&self, index: usize) -> impl Iterator<Item = &[f64]> {
        self.windows[index]
            .features
            .chunks_exact(self.n_states + self.n_inputs)
    }
}

fn check_dims(
    model: &GruModel,
    library: &PolynomialLibrary,
    set: &WindowSet,
    mask: &[bool],
) -> Result<(), MerindaError> {
    let expected = set.n_states * library.len();
    if model.n_coefficients() != expected
        || model.n_shifts() != set.n_inputs
        || model.input_size() != set.n_states + set.n_inputs
        || mask.len() != expected
        || library.n_vars() != set.n_states + set.n_inputs
    {
        return Err(MerindaError::Dimension(format!(
            "model ({} coefficients, {} shifts, input {}), mask {}, library {} vars x {} terms, data {} states + {} inputs",
            model.n_coefficients(),
            model.n_shifts(),
            model.input_size(),
            mask.len(),
            library.n_vars(),
            library.len(),
            set.n_states,
            set.n_inputs
        )));
    }
    Ok(())
}

// Head outputs before scaling (coefficients then shifts).
fn raw_outputs(model: &GruModel, hidden: &[f64], mask: &[bool]) -> Vec<f64> {
    let out = model.head_forward(hidden, mask);
    let mut raw = out.theta;
    raw.extend(out.shifts);
    raw
}

fn consistency_penalty(raws: &[Vec<f64>], weight: f64) -> (Vec<f64>, f64) {
    let len = raws.first().map_or(0, Vec::len);
    let count = raws.len().max(1) as f64;
    let mut mean = vec![0.0; len];
    for raw in raws {
        for (m, r) in mean.iter_mut().zip(raw) {
            *m += r / count;
        }
    }
    let penalty = if weight == 0.0 {
        0.0
    } else {
        weight / count
            * raws
                .iter()
                .map(|raw| {
                    raw.iter()
                        .zip(&mean)
                        .map(|(r, m)| (r - m).powi(2))
                        .sum::<f64>()
                })
                .sum::<f64>()
    };
    (mean, penalty)
}

/// Training objective over a batch: mean window ODE loss plus
/// `consistency * mean_w |o_w - mean(o)|^2` over the unscaled head outputs
/// `o_w`.
pub fn batch_loss(
    model: &GruModel,
    library: &PolynomialLibrary,
    set: &WindowSet,
    batch: &[usize],
    mask: &[bool],
    consistency: f64,
) -> Result<f64, MerindaError> {
    check_dims(model, library, set, mask)?;
    let per_window: Vec<(f64, Vec<f64>)> = batch
        .par_iter()
        .map(|&i| {
            let (hidden, _) = model.sequence_forward(set.feature_rows(i));
            let (theta, shifts) = set.head(model, &hidden, mask);
            let loss = window_loss(library, &theta, &shifts, &set.data(i)).loss;
            (loss, raw_outputs(model, &hidden, mask))
        })
        .collect();
    let count = batch.len().max(1) as f64;
    let loss = per_window.iter().map(|(l, _)| l).sum::<f64>() / count;
    let raws: Vec<Vec<f64>> = per_window.into_iter().map(|(_, r)| r).collect();
    Ok(loss + consistency_penalty(&raws, consistency).1)
}

/// Objective terms over a batch and the gradient of their sum w.r.t. every
/// model parameter.
#[derive(Debug, Clone)]
pub struct BatchGradient {
    /// Mean window ODE loss.
    pub loss: f64,
    pub penalty: f64,
    pub grads: Vec<f64>,
    pub diverged: usize,
}

/// Forward and exact backward pass over a batch: ODE loss through the
/// unrolled solver, the masked head and BPTT over every window step, plus
/// the consistency penalty of [`batch_loss`]. Per-window gradients are
/// reduced in batch order, so the result does not depend on the thread
/// count.
pub fn batch_gradient(
    model: &GruModel,
    library: &PolynomialLibrary,
    set: &WindowSet,
    batch: &[usize],
    mask: &[bool],
    consistency: f64,
) -> Result<BatchGradient, MerindaError> {
    check_dims(model, library, set, mask)?;
    let scale = 1.0 / batch.len().max(1) as f64;
    let forward: Vec<_> = batch
        .par_iter()
        .map(|&i| {
            let (hidden, caches) = model.sequence_forward(set.feature_rows(i));
            let raw = raw_outputs(model, &hidden, mask);
            (hidden, caches, raw)
        })
        .collect();
    let raws: Vec<Vec<f64>> = forward.iter().map(|(_, _, r)| r.clone()).collect();
    let (mean, penalty) = consistency_penalty(&raws, consistency);

    let per_window: Vec<(f64, bool, Vec<f64>)> = batch
        .par_iter()
        .zip(forward.par_iter())
        .map(|(&i, (hidden, caches, raw))| {
            let mut grads = vec![0.0; model.param_count()];
            let (theta, shifts) = set.head(model, hidden, mask);
            let g = window_loss_with_gradient(library, &theta, &shifts, &set.data(i));
            let n_coef = theta.len();
            let mut d_raw = vec![0.0; raw.len()];
            if !g.value.diverged {
                for (j, d) in g.d_theta.iter().chain(&g.d_shifts).enumerate() {
                    d_raw[j] = d * set.output_scale[j] * scale;
                }
            }
            if consistency != 0.0 {
                for j in 0..raw.len() {
                    d_raw[j] += 2.0 * consistency * scale * (raw[j] - mean[j]);
                }
            }
            let (d_theta, d_shifts) = d_raw.split_at(n_coef);
            let d_hidden = model.head_backward(hidden, d_theta, d_shifts, mask, &mut grads);
            model.sequence_backward(caches, &d_hidden, &mut grads);
            (g.value.loss, g.value.diverged, grads)
        })
        .collect();

    let mut grads = vec![0.0; model.param_count()];
    let mut loss = 0.0;
    let mut diverged = 0;
    for (l, d, g) in per_window {
        loss += l * scale;
        diverged += usize::from(d);
        for (acc, v) in grads.iter_mut().zip(&g) {
            *acc += v;
        }
    }
    for block in ParamBlock::ALL {
        if model.block_range(block).any(|i| !grads[i].is_finite()) {
            return Err(MerindaError::GradientOverflow {
                block: block.name(),
            });
        }
    }
    Ok(BatchGradient {
        loss,
        penalty,
        grads,
        diverged,
    })
}

/// Relative error of [`batch_gradient`] against central differences of
/// [`batch_loss`] with step `eps`, per parameter block:
/// `|g - g_fd| / max(|g|, |g_fd|)` in the Euclidean norm, 0 when both vanish.
pub fn gradient_check(
    model: &GruModel,
    library: &PolynomialLibrary,
    set: &WindowSet,
    batch: &[usize],
    mask: &[bool],
    consistency: f64,
    eps: f64,
) -> Result<Vec<(ParamBlock, f64)>, MerindaError> {
    let analytic = batch_gradient(model, library, set, batch, mask, consistency)?.grads;
    let mut probe = model.clone();
    let mut numeric = vec![0.0; analytic.len()];
    for (i, slot) in numeric.iter_mut().enumerate() {
        let orig = probe.params()[i];
        probe.params_mut()[i] = orig + eps;
        let up = batch_loss(&probe, library, set, batch, mask, consistency)?;
        probe.params_mut()[i] = orig - eps;
        let down = batch_loss(&probe, library, set, batch, mask, consistency)?;
        probe.params_mut()[i] = orig;
        *slot = (up - down) / (2.0 * eps);
    }
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    Ok(ParamBlock::ALL
        .into_iter()
        .map(|block| {
            let range = model.block_range(block);
            let a = &analytic[range.clone()];
            let f = &numeric[range];
            let diff = norm(&mut a.iter().zip(f).map(|(x, y)| x - y));
            let scale = norm(&mut a.iter().copied()).max(norm(&mut f.iter().copied()));
            (block, if scale == 0.0 { 0.0 } else { diff / scale })
        })
        .collect())
}

/// Coefficients and shifts emitted for every window, in window order.
pub fn window_outputs(
    model: &GruModel,
    set: &WindowSet,
    mask: &[bool],
) -> Vec<(Vec<f64>, Vec<f64>)> {
    (0..set.len())
        .into_par_iter()
        .map(|i| {
            let (hidden, _) = model.sequence_forward(set.feature_rows(i));
            set.head(model, &hidden, mask)
        })
        .collect()
}

/// Indices of the `keep` largest values of `scores` (ties broken by lower
/// index) as a boolean mask.
pub fn top_k_mask(scores: &[f64], keep: usize) -> Vec<bool> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut mask = vec![false; scores.len()];
    for &i in order.iter().take(keep) {
        mask[i] = true;
    }
    mask
}

fn aggregate(columns: impl Fn(usize) -> Vec<f64>, len: usize, how: Aggregation) -> Vec<f64> {
    (0..len)
        .map(|j| {
            let mut values = columns(j);
            match how {
                Aggregation::Mean => values.iter().sum::<f64>() / values.len() as f64,
                Aggregation::Median => {
                    values.sort_by(f64::total_cmp);
                    let mid = values.len() / 2;
                    if values.len() % 2 == 1 {
                        values[mid]
                    } else {
                        0.5 * (values[mid - 1] + values[mid])
                    }
                }
            }
        })
        .collect()
}

/// Outcome of a training run.
#[derive(Debug, Clone)]
pub struct RecoveryResult {
    pub coefficients: CoefficientMatrix,
    pub input_shifts: Vec<f64>,
    /// Mean window loss per completed epoch.
    pub loss_history: Vec<f64>,
    pub reconstruction_mse: f64,
    pub reconstruction_diverged: bool,
    /// Against the ground truth, when one was supplied.
    pub coefficient_mse: Option<f64>,
    pub model: GruModel,
    pub mask: Vec<bool>,
    /// Output scale the model was trained with.
    pub output_scale: Vec<f64>,
    pub config: TrainConfig,
}

/// Trains a GRU flow on `data` and returns the aggregated coefficient
/// estimate. `truth`, when given, only feeds the coefficient-MSE metric.
pub fn train(
    data: &Trajectory,
    library: Arc<PolynomialLibrary>,
    config: &TrainConfig,
    truth: Option<&CoefficientMatrix>,
) -> Result<RecoveryResult, MerindaError> {
    config.validate()?;
    let n = data.n_states();
    let m = data.n_inputs();
    if library.n_vars() != n + m {
        return Err(MerindaError::Dimension(format!(
            "library over {} variables for data with {} states and {} inputs",
            library.n_vars(),
            n,
            m
        )));
    }
    let substeps = config.substeps(data.step())?;
    let mut set = WindowSet::from_trajectory(
        data,
        &library,
        config.window_length,
        config.window_stride,
        substeps,
    )?;
    if config.scale_outputs {
        set = set.with_data_scale(data, &library);
    }
    let n_coef = n * library.len();
    if let Some(s) = config.target_sparsity {
        if s > n_coef {
            return Err(MerindaError::InvalidConfig(format!(
                "target_sparsity {s} exceeds the {n_coef} coefficient outputs"
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = GruModel::init_uniform(config.hidden_size, n + m, n_coef, m, &mut rng);
    let mut adam = Adam::new(model.param_count(), config.beta1, config.beta2);
    let mut mask = vec![true; n_coef];
    let schedule = config.prune_schedule(n_coef);
    let mut next_round = 0;
    let mut order: Vec<usize> = (0..set.len()).collect();
    let mut loss_history = Vec::with_capacity(config.epochs);

    // Rounds only remove entries; inactive ones score below any active one.
    let prune = |model: &GruModel, mask: &mut Vec<bool>, keep: usize| {
        let outputs = window_outputs(model, &set, mask);
        let mut scores = aggregate(
            |j| {
                outputs
                    .iter()
                    .map(|(t, _)| (t[j] / set.output_scale[j]).abs())
                    .collect()
            },
            n_coef,
            Aggregation::Mean,
        );
        for (score, &active) in scores.iter_mut().zip(mask.iter()) {
            if !active {
                *score = -1.0;
            }
        }
        *mask = top_k_mask(&scores, keep);
    };

    for epoch in 0..config.epochs {
        while next_round < schedule.len() && schedule[next_round].0 <= epoch {
            prune(&model, &mut mask, schedule[next_round].1);
            next_round += 1;
        }
        order.shuffle(&mut rng);
        let lr = config.learning_rate_at(epoch);
        let mut epoch_loss = 0.0;
        let mut diverged = 0;
        for batch in order.chunks(config.batch_size) {
            let mut g = batch_gradient(
                &model,
                &library,
                &set,
                batch,
                &mask,
                config.consistency_weight,
            )?;
            epoch_loss += g.loss * batch.len() as f64;
            diverged += g.diverged;
            clip_global_norm(&mut g.grads, config.clip_norm);
            adam.step(model.params_mut(), &g.grads, lr);
        }
        if epoch == 0 && diverged == set.len() {
            return Err(MerindaError::TrainingFailed(
                "every window diverged in the first epoch; try a smaller solver_step or learning_rate"
                    .into(),
            ));
        }
        loss_history.push((epoch_loss / set.len() as f64).min(DIVERGED_LOSS));
    }
    for &(_, keep) in &schedule[next_round..] {
        prune(&model, &mut mask, keep);
    }

    let outputs = window_outputs(&model, &set, &mask);
    let theta = aggregate(
        |j| outputs.iter().map(|(t, _)| t[j]).collect(),
        n_coef,
        config.aggregation,
    );
    let shifts = aggregate(
        |j| outputs.iter().map(|(_, s)| s[j]).collect(),
        m,
        config.aggregation,
    );
    let theta: Vec<f64> = theta
        .into_iter()
        .zip(&mask)
        .map(|(v, &active)| if active { v } else { 0.0 })
        .collect();
    let coefficients = CoefficientMatrix::from_flat(library, n, &theta)?;
    let reconstruction = reconstruction_error_shifted(&coefficients, &shifts, data)?;
    let coefficient_mse = truth.map(|t| coefficients.mse(t)).transpose()?;
    Ok(RecoveryResult {
        coefficients,
        input_shifts: shifts,
        loss_history,
        reconstruction_mse: reconstruction.mse,
        reconstruction_diverged: reconstruction.diverged,
        coefficient_mse,
        model,
        mask,
        output_scale: set.output_scale.clone(),
        config: config.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::catalog_system;
    use proptest::prelude::*;

    #[test]
    fn prune_schedule_shrinks_geometrically_to_target() {
        let cfg = TrainConfig {
            epochs: 100,
            target_sparsity: Some(4),
            prune_stages: 3,
            ..TrainConfig::default()
        };
        // Rounds at 50, 58, 66; counts 4 * 8^(2/3), 4 * 8^(1/3), 4.
        assert_eq!(cfg.prune_schedule(32), vec![(50, 16), (58, 8), (66, 4)]);
        let single = TrainConfig {
            prune_stages: 1,
            ..cfg.clone()
        };
        assert_eq!(single.prune_schedule(32), vec![(50, 4)]);
        let none = TrainConfig {
            target_sparsity: None,
            ..cfg
        };
        assert!(none.prune_schedule(32).is_empty());
    }

    #[test]
    fn cosine_rate_hits_both_ends() {
        let cfg = TrainConfig {
            epochs: 11,
            learning_rate: 1e-2,
            final_learning_rate: Some(1e-4),
            ..TrainConfig::default()
        };
        assert_eq!(cfg.learning_rate_at(0), 1e-2);
        assert!((cfg.learning_rate_at(10) - 1e-4).abs() < 1e-18);
        assert!((cfg.learning_rate_at(5) - (1e-4 + 0.5 * (1e-2 - 1e-4))).abs() < 1e-15);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let base = TrainConfig::default();
        for bad in [
            TrainConfig {
                window_length: 1,
                ..base.clone()
            },
            TrainConfig {
                prune_stages: 0,
                ..base.clone()
            },
            TrainConfig {
                target_sparsity: Some(0),
                ..base.clone()
            },
            TrainConfig {
                learning_rate: -1.0,
                ..base.clone()
            },
            TrainConfig {
                prune_epoch: Some(501),
                ..base.clone()
            },
            TrainConfig {
                beta2: 1.0,
                ..base.clone()
            },
        ] {
            assert!(matches!(
                bad.validate(),
                Err(MerindaError::InvalidConfig(_))
            ));
        }
        assert!(base.validate().is_ok());
    }

    #[test]
    fn short_training_is_deterministic_and_respects_sparsity() {
        let spec = catalog_system("lotka").unwrap();
        let data = spec.simulate(spec.default_dt, 80).unwrap();
        let cfg = TrainConfig {
            epochs: 4,
            target_sparsity: Some(5),
            prune_stages: 2,
            seed: 9,
            ..TrainConfig::default()
        };
        let a = train(&data, spec.library().clone(), &cfg, None).unwrap();
        let b = train(&data, spec.library().clone(), &cfg, None).unwrap();
        assert_eq!(a.coefficients, b.coefficients);
        assert_eq!(a.loss_history, b.loss_history);
        assert_eq!(a.mask.iter().filter(|&&m| m).count(), 5);
        assert!(a.coefficients.sparsity() <= 5);
        assert!(a.loss_history.iter().all(|l| l.is_finite()));
        assert!(a.coefficient_mse.is_none());
    }

    #[test]
    fn too_short_data_is_reported() {
        let spec = catalog_system("lotka").unwrap();
        let data = spec.simulate(spec.default_dt, 10).unwrap();
        let err = train(&data, spec.library().clone(), &TrainConfig::default(), None);
        assert!(matches!(
            err,
            Err(MerindaError::TooShort {
                samples: 10,
                window: 20
            })
        ));
    }

    proptest! {
        #[test]
        fn top_k_keeps_the_largest(scores in prop::collection::vec(-5.0f64..5.0, 1..40), frac in 0.0f64..1.0) {
            let keep = ((scores.len() as f64 * frac) as usize).min(scores.len());
            let mask = top_k_mask(&scores, keep);
            prop_assert_eq!(mask.iter().filter(|&&m| m).count(), keep);
            let kept_min = scores.iter().zip(&mask).filter(|(_, &m)| m).map(|(s, _)| *s).fold(f64::INFINITY, f64::min);
            let dropped_max = scores.iter().zip(&mask).filter(|(_, &m)| !m).map(|(s, _)| *s).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(kept_min >= dropped_max);
        }
    }
}
