//! Convolutional embedding network with a regression head, trained with
//! hand-written reverse-mode gradients.

mod adam;
mod checkpoint;
mod float;
mod layers;
mod network;
mod tensor;

pub use adam::{Adam, DEFAULT_LR};
pub use checkpoint::{Checkpoint, FORMAT_VERSION, MAGIC};
pub use float::Float;
pub use network::{Network, Outputs};
pub use tensor::Tensor;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FEATURE_BINS, FRAMES};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("backward called without a recorded forward pass")]
    GraphNotRecorded,
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Conv blocks (3x3 conv, rectifier, 2x2 max pool) then dropout and a dense layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackboneConfig {
    /// Input map as (frames, bins).
    pub input: [usize; 2],
    pub conv_channels: Vec<usize>,
    pub dense_dim: usize,
    pub dropout: f64,
}

impl Default for BackboneConfig {
    fn default() -> Self {
        Self {
            input: [FRAMES, FEATURE_BINS],
            conv_channels: vec![32, 64, 128, 128, 256],
            dense_dim: 512,
            dropout: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub backbone: BackboneConfig,
    pub embed_dim: usize,
    pub regression_hidden: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            backbone: BackboneConfig::default(),
            embed_dim: 256,
            regression_hidden: 256,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let b = &self.backbone;
        if b.conv_channels.is_empty() || b.conv_channels.contains(&0) {
            return Err(ModelError::InvalidConfig(
                "conv channels must be non-empty and positive".into(),
            ));
        }
        let shrink = 1usize << b.conv_channels.len();
        if b.input[0] < shrink || b.input[1] < shrink {
            return Err(ModelError::InvalidConfig(format!(
                "input {:?} too small for {} pooling stages",
                b.input,
                b.conv_channels.len()
            )));
        }
        if !(0.0..1.0).contains(&b.dropout) {
            return Err(ModelError::InvalidConfig(format!(
                "dropout {} outside [0, 1)",
                b.dropout
            )));
        }
        if b.dense_dim == 0 || self.embed_dim == 0 || self.regression_hidden == 0 {
            return Err(ModelError::InvalidConfig(
                "layer widths must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Parameter count implied by the layer shapes.
    pub fn param_count(&self) -> usize {
        let b = &self.backbone;
        let (mut c, mut h, mut w) = (1, b.input[0], b.input[1]);
        let mut total = 0;
        for &out in &b.conv_channels {
            total += out * c * 9 + out;
            c = out;
            h /= 2;
            w /= 2;
        }
        total += (c * h * w + 1) * b.dense_dim;
        total += (b.dense_dim + 1) * self.embed_dim;
        total += (self.embed_dim + 1) * self.regression_hidden;
        total + self.regression_hidden + 1
    }
}
