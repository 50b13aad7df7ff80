use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, FeatureSequence, PITCH_COUNT};

/// Per-frame affine map followed by a logistic sigmoid: `z = σ(W x + b)`,
/// with `W` of shape `72 × input_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    input_dim: usize,
    weight: Vec<f64>,
    bias: Vec<f64>,
}

/// Gradients with the same layout as [`LinearModel`]'s parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ParamGrads {
    pub fn zeros(input_dim: usize) -> Self {
        Self {
            weight: vec![0.0; PITCH_COUNT * input_dim],
            bias: vec![0.0; PITCH_COUNT],
        }
    }

    /// Weight entries followed by bias entries.
    pub fn to_flat(&self) -> Vec<f64> {
        self.weight.iter().chain(&self.bias).copied().collect()
    }

    pub fn scale(&mut self, factor: f64) {
        self.weight
            .iter_mut()
            .chain(&mut self.bias)
            .for_each(|g| *g *= factor);
    }

    pub fn add(&mut self, other: &ParamGrads) {
        for (a, b) in self.weight.iter_mut().zip(&other.weight) {
            *a += b;
        }
        for (a, b) in self.bias.iter_mut().zip(&other.bias) {
            *a += b;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.weight
            .iter()
            .chain(&self.bias)
            .fold(0.0, |m, g| m.max(g.abs()))
    }
}

#[inline]
pub(crate) fn sigmoid(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + exp(a))` without overflow.
#[inline]
pub(crate) fn softplus(a: f64) -> f64 {
    a.max(0.0) + (-a.abs()).exp().ln_1p()
}

impl LinearModel {
    pub fn zeros(input_dim: usize) -> Self {
        Self {
            input_dim,
            weight: vec![0.0; PITCH_COUNT * input_dim],
            bias: vec![0.0; PITCH_COUNT],
        }
    }

    /// Weights drawn uniformly from `[-scale, scale]`, zero bias.
    pub fn random<R: Rng + ?Sized>(input_dim: usize, scale: f64, rng: &mut R) -> Self {
        let weight = (0..PITCH_COUNT * input_dim)
            .map(|_| rng.random_range(-scale..=scale))
            .collect();
        Self {
            input_dim,
            weight,
            bias: vec![0.0; PITCH_COUNT],
        }
    }

    pub fn from_parts(weight: &DenseMatrix, bias: Vec<f64>) -> Result<Self> {
        if weight.rows() != PITCH_COUNT {
            return Err(Error::DimensionMismatch {
                left: weight.rows(),
                right: PITCH_COUNT,
            });
        }
        if bias.len() != PITCH_COUNT {
            return Err(Error::DimensionMismatch {
                left: bias.len(),
                right: PITCH_COUNT,
            });
        }
        Ok(Self {
            input_dim: weight.cols(),
            weight: weight.as_slice().to_vec(),
            bias,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn parameter_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    /// Row-major `72 × input_dim` weights.
    pub fn weight(&self) -> &[f64] {
        &self.weight
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    /// Weights followed by biases, mutable.
    pub fn parameters_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weight.iter_mut().chain(self.bias.iter_mut())
    }

    pub fn weight_matrix(&self) -> DenseMatrix {
        DenseMatrix::new(PITCH_COUNT, self.input_dim, self.weight.clone())
            .expect("model parameters are finite")
    }

    pub(crate) fn apply_step(&mut self, step: &ParamGrads) {
        for (w, s) in self.weight.iter_mut().zip(&step.weight) {
            *w += s;
        }
        for (b, s) in self.bias.iter_mut().zip(&step.bias) {
            *b += s;
        }
    }

    /// Pre-activations `W x_n + b` for every frame, row-major `N × 72`.
    pub(crate) fn pre_activations(&self, input: &FeatureSequence) -> Result<Vec<f64>> {
        if input.dim() != self.input_dim {
            return Err(Error::DimensionMismatch {
                left: input.dim(),
                right: self.input_dim,
            });
        }
        let mut out = Vec::with_capacity(input.len() * PITCH_COUNT);
        for x in input.frames() {
            out.extend(
                self.weight
                    .chunks_exact(self.input_dim)
                    .zip(&self.bias)
                    .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b),
            );
        }
        Ok(out)
    }

    /// Per-frame `σ(W x_n + b)`; output has the input's length and 72 columns.
    pub fn forward(&self, input: &FeatureSequence) -> Result<FeatureSequence> {
        let pre = self.pre_activations(input)?;
        FeatureSequence::from_flat(PITCH_COUNT, pre.into_iter().map(sigmoid).collect())
    }

    /// Chains `∂L/∂a_n` (gradient w.r.t. pre-activations, row-major `N × 72`)
    /// into parameter gradients.
    pub(crate) fn backprop_pre(&self, input: &FeatureSequence, d_pre: &[f64]) -> ParamGrads {
        let mut grads = ParamGrads::zeros(self.input_dim);
        for (x, delta) in input.frames().zip(d_pre.chunks_exact(PITCH_COUNT)) {
            for (k, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                grads.bias[k] += d;
                let row = &mut grads.weight[k * self.input_dim..(k + 1) * self.input_dim];
                for (g, v) in row.iter_mut().zip(x) {
                    *g += d * v;
                }
            }
        }
        grads
    }
}
