//! # softalign
//!
//! Soft dynamic time warping as a training loss for weakly aligned sequences.
//!
//! The crate is organised bottom-up:
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`matrix`] | [`FeatureSequence`], [`PianoRoll`], [`DenseMatrix`] |
//! | [`alignment`] | soft-min, SoftDTW forward/gradient, classical DTW, path-enumeration oracle |
//! | [`cost`] | local cost functions and cost-matrix assembly |
//! | [`targets`] | label variants (strong, duration-collapsed, stretched, score, overtone) |
//! | [`metrics`] | cosine similarity, P/R/F, accuracy, average precision |
//! | [`training`] | per-frame sigmoid model, losses with analytic gradients, synthetic data, training loop |
//!
//! ```
//! use softalign::{alignment, DenseMatrix, Gamma};
//!
//! let costs = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
//! let gamma = Gamma::new(1.0).unwrap();
//! let soft = alignment::softdtw_forward(&costs, gamma).unwrap();
//! let (hard, _path) = alignment::classical_dtw(&costs);
//! assert!(soft.cost <= hard);
//! ```

pub mod alignment;
pub mod cost;
mod error;
pub mod matrix;
pub mod metrics;
pub mod targets;
pub mod training;

pub use alignment::{AlignmentGradient, Gamma, SoftDtwResult, WarpingPath};
pub use cost::CostFunction;
pub use error::{Error, Result};
pub use matrix::{
    DenseMatrix, FeatureSequence, PianoRoll, PitchFrame, LOWEST_MIDI_PITCH, PITCH_COUNT,
};
pub use metrics::EvalReport;
pub use targets::{LabelVariant, OvertoneModel, Target};
