//! Versioned JSON checkpoints of a trained model.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::gru::{GruModel, ParamBlock};
use super::train::TrainConfig;
use super::MerindaError;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedMatrix {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    /// Row-major.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub hidden_size: usize,
    pub input_size: usize,
    pub n_coefficients: usize,
    pub n_shifts: usize,
    pub weights: Vec<NamedMatrix>,
    pub mask: Vec<bool>,
    /// Fixed head output scale (coefficients, then shifts).
    pub output_scale: Vec<f64>,
    pub config: TrainConfig,
}

impl Checkpoint {
    pub fn new(
        model: &GruModel,
        mask: &[bool],
        output_scale: &[f64],
        config: &TrainConfig,
    ) -> Self {
        let weights = ParamBlock::ALL
            .iter()
            .map(|&block| {
                let (rows, cols) = model.block_shape(block);
                NamedMatrix {
                    name: block.name().to_string(),
                    rows,
                    cols,
                    values: model.block(block).to_vec(),
                }
            })
            .collect();
        Self {
            version: CHECKPOINT_VERSION,
            hidden_size: model.hidden_size(),
            input_size: model.input_size(),
            n_coefficients: model.n_coefficients(),
            n_shifts: model.n_shifts(),
            weights,
            mask: mask.to_vec(),
            output_scale: output_scale.to_vec(),
            config: config.clone(),
        }
    }

    /// Rebuilds the model, checking every block's name and shape.
    pub fn model(&self) -> Result<GruModel, MerindaError> {
        if self.version != CHECKPOINT_VERSION {
            return Err(MerindaError::Checkpoint(format!(
                "unsupported version {} (expected {CHECKPOINT_VERSION})",
                self.version
            )));
        }
        let mut model = GruModel::zeros(
            self.hidden_size,
            self.input_size,
            self.n_coefficients,
            self.n_shifts,
        );
        if self.mask.len() != self.n_coefficients {
            return Err(MerindaError::Checkpoint(format!(
                "mask has {} entries for {} coefficients",
                self.mask.len(),
                self.n_coefficients
            )));
        }
        if self.output_scale.len() != self.n_coefficients + self.n_shifts {
            return Err(MerindaError::Checkpoint(format!(
                "output scale has {} entries for {} outputs",
                self.output_scale.len(),
                self.n_coefficients + self.n_shifts
            )));
        }
        let mut seen = Vec::new();
        for w in &self.weights {
            let block = ParamBlock::from_name(&w.name)
                .ok_or_else(|| MerindaError::Checkpoint(format!("unknown block {}", w.name)))?;
            if seen.contains(&block) {
                return Err(MerindaError::Checkpoint(format!(
                    "duplicate block {}",
                    w.name
                )));
            }
            if model.block_shape(block) != (w.rows, w.cols) || w.values.len() != w.rows * w.cols {
                return Err(MerindaError::Checkpoint(format!(
                    "block {} has shape {}x{} ({} values), expected {:?}",
                    w.name,
                    w.rows,
                    w.cols,
                    w.values.len(),
                    model.block_shape(block)
                )));
            }
            if w.values.iter().any(|v| !v.is_finite()) {
                return Err(MerindaError::Checkpoint(format!(
                    "block {} is not finite",
                    w.name
                )));
            }
            model.block_mut(block).copy_from_slice(&w.values);
            seen.push(block);
        }
        if seen.len() != ParamBlock::ALL.len() {
            return Err(MerindaError::Checkpoint("missing parameter blocks".into()));
        }
        Ok(model)
    }

    pub fn from_result(result: &super::RecoveryResult) -> Self {
        Self::new(
            &result.model,
            &result.mask,
            &result.output_scale,
            &result.config,
        )
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<(), MerindaError> {
        serde_json::to_writer_pretty(out, self).map_err(|e| MerindaError::Checkpoint(e.to_string()))
    }

    pub fn read_json<R: Read>(input: R) -> Result<Self, MerindaError> {
        let ckpt: Self =
            serde_json::from_reader(input).map_err(|e| MerindaError::Checkpoint(e.to_string()))?;
        ckpt.model()?;
        Ok(ckpt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample() -> Checkpoint {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = GruModel::init_uniform(5, 3, 12, 1, &mut rng);
        let mut mask = vec![true; 12];
        mask[4] = false;
        let scale: Vec<f64> = (0..13).map(|i| 0.1 + i as f64 / 3.0).collect();
        Checkpoint::new(&model, &mask, &scale, &TrainConfig::default())
    }

    #[test]
    fn json_round_trip_is_exact() {
        let ckpt = sample();
        let mut buf = Vec::new();
        ckpt.write_json(&mut buf).unwrap();
        let back = Checkpoint::read_json(buf.as_slice()).unwrap();
        assert_eq!(back, ckpt);
        assert_eq!(back.model().unwrap(), ckpt.model().unwrap());
    }

    #[test]
    fn rejects_bad_shapes_and_versions() {
        let mut ckpt = sample();
        ckpt.weights[0].rows += 1;
        assert!(ckpt.model().is_err());
        let mut ckpt = sample();
        ckpt.version = 99;
        assert!(ckpt.model().is_err());
        let mut ckpt = sample();
        ckpt.weights.pop();
        assert!(ckpt.model().is_err());
    }
}
