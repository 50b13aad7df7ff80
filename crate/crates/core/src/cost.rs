//! Local alignment costs `c(x_n, y_m)` and cost-matrix assembly.

use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, FeatureSequence};

/// Local cost between two frames of equal dimension.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum CostFunction {
    /// `sum_d (a_d - b_d)^2`
    #[default]
    SquaredEuclidean,
}

impl CostFunction {
    /// Whether `c(a, b) == c(b, a)` for all inputs.
    pub fn is_symmetric(self) -> bool {
        match self {
            CostFunction::SquaredEuclidean => true,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CostFunction::SquaredEuclidean => "sqeuclidean",
        }
    }
}

impl std::str::FromStr for CostFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sqeuclidean" | "squared-euclidean" => Ok(CostFunction::SquaredEuclidean),
            other => Err(Error::InvalidConfig(format!(
                "unknown cost function `{other}`"
            ))),
        }
    }
}

fn check_dims(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(())
}

#[inline]
fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn local_cost(func: CostFunction, a: &[f64], b: &[f64]) -> Result<f64> {
    check_dims(a, b)?;
    Ok(match func {
        CostFunction::SquaredEuclidean => squared_euclidean(a, b),
    })
}

/// Gradient of the local cost with respect to its first argument.
pub fn local_cost_grad(func: CostFunction, a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    check_dims(a, b)?;
    Ok(match func {
        CostFunction::SquaredEuclidean => a.iter().zip(b).map(|(x, y)| 2.0 * (x - y)).collect(),
    })
}

/// `N × M` matrix of local costs between every frame of `x` and every frame of `y`.
pub fn build_cost_matrix(
    func: CostFunction,
    x: &FeatureSequence,
    y: &FeatureSequence,
) -> Result<DenseMatrix> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            left: x.dim(),
            right: y.dim(),
        });
    }
    let mut values = Vec::with_capacity(x.len() * y.len());
    for a in x.frames() {
        values.extend(y.frames().map(|b| match func {
            CostFunction::SquaredEuclidean => squared_euclidean(a, b),
        }));
    }
    DenseMatrix::new(x.len(), y.len(), values)
}
