//! The bundled desk-scale experiment: a fixed synthetic dataset and the
//! hyperparameters used to compare label variants on it.

use super::{generate_synthetic_dataset, LossKind, SyntheticExcerpt, TrainConfig};
use crate::targets::LabelVariant;

pub const DATA_SEED: u64 = 7;
pub const EXCERPTS: usize = 16;
pub const FRAMES: usize = 64;
pub const POLYPHONY: usize = 3;
pub const NOISE_LEVEL: f64 = 0.05;
pub const EPOCHS: usize = 60;
pub const TRAIN_SEED: u64 = 0;

/// Step size for the soft alignment loss (normalised to 1 on the first batch).
pub const SOFTDTW_LEARNING_RATE: f64 = 1.0;
/// Step size for the per-frame baselines, whose mean-per-cell gradients are
/// much smaller.
pub const PER_FRAME_LEARNING_RATE: f64 = 5.0;

pub fn dataset() -> Vec<SyntheticExcerpt> {
    generate_synthetic_dataset(DATA_SEED, EXCERPTS, FRAMES, POLYPHONY, NOISE_LEVEL)
        .expect("toy parameters are valid")
}

pub fn learning_rate(loss_kind: LossKind) -> f64 {
    if loss_kind.is_per_frame() {
        PER_FRAME_LEARNING_RATE
    } else {
        SOFTDTW_LEARNING_RATE
    }
}

pub fn config(variant: LabelVariant, loss_kind: LossKind) -> TrainConfig {
    TrainConfig {
        learning_rate: learning_rate(loss_kind),
        epochs: EPOCHS,
        seed: TRAIN_SEED,
        variant,
        loss_kind,
        ..TrainConfig::default()
    }
}
