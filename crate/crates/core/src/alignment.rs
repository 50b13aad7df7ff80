//! Soft and classical dynamic time warping over a precomputed cost matrix.
//!
//! The accumulated cost `D` is filled with hard cumulative sums along the
//! first row and first column (each border cell is reachable by exactly one
//! path) and with `D(n,m) = C(n,m) + softmin(D(n-1,m-1), D(n-1,m), D(n,m-1))`
//! elsewhere. The gradient of `D(N,M)` with respect to every `C(n,m)` is the
//! expected occupancy of cell `(n,m)` under the Gibbs distribution over
//! warping paths, `P(path) ∝ exp(-cost(path) / gamma)`, and is computed by a
//! backward sweep in `O(N·M)`.
//!
//! Indices are 0-based throughout.

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

/// Positive, finite smoothing temperature of the soft minimum.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Gamma(f64);

impl Gamma {
    pub const DEFAULT: f64 = 10.0;

    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value > 0.0 {
            Ok(Self(value))
        } else {
            Err(Error::InvalidGamma(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for Gamma {
    fn default() -> Self {
        Self(Self::DEFAULT)
    }
}

/// Output of [`softdtw_forward`].
#[derive(Debug, Clone, PartialEq)]
pub struct SoftDtwResult {
    /// Soft alignment cost, equal to the last entry of `accumulated`.
    pub cost: f64,
    pub accumulated: DenseMatrix,
}

/// Derivative of the soft alignment cost with respect to each local cost.
///
/// Entries lie in `[0, 1]` and both corners are exactly 1, since every
/// warping path visits them.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentGradient {
    pub entries: DenseMatrix,
}

impl AlignmentGradient {
    pub fn get(&self, n: usize, m: usize) -> f64 {
        self.entries.get(n, m)
    }

    pub fn shape(&self) -> (usize, usize) {
        self.entries.shape()
    }
}

/// Monotone alignment from `(0, 0)` to `(N-1, M-1)` with unit steps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WarpingPath {
    pub steps: Vec<(usize, usize)>,
}

impl WarpingPath {
    /// Checks the boundary and step-size constraints for an `rows × cols` grid.
    pub fn is_valid(&self, rows: usize, cols: usize) -> bool {
        let (Some(&first), Some(&last)) = (self.steps.first(), self.steps.last()) else {
            return false;
        };
        first == (0, 0)
            && last == (rows - 1, cols - 1)
            && self.steps.windows(2).all(|w| {
                let (dn, dm) = (w[1].0.wrapping_sub(w[0].0), w[1].1.wrapping_sub(w[0].1));
                matches!((dn, dm), (1, 1) | (1, 0) | (0, 1))
            })
    }

    /// Sum of the local costs visited by the path.
    pub fn cost(&self, costs: &DenseMatrix) -> f64 {
        self.steps.iter().map(|&(n, m)| costs.get(n, m)).sum()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Smoothed minimum `-gamma * ln(sum(exp(-s / gamma)))`.
///
/// Evaluated in shifted form so that tiny temperatures do not overflow. A
/// singleton returns its element exactly.
///
/// # Panics
///
/// Panics if `values` is empty.
pub fn soft_min(values: &[f64], gamma: Gamma) -> f64 {
    assert!(!values.is_empty(), "soft_min of an empty set");
    let g = gamma.value();
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let sum: f64 = values.iter().map(|&s| (-(s - lo) / g).exp()).sum();
    lo - g * sum.ln()
}

#[inline]
fn soft_min3(a: f64, b: f64, c: f64, g: f64) -> f64 {
    let lo = a.min(b).min(c);
    let sum = (-(a - lo) / g).exp() + (-(b - lo) / g).exp() + (-(c - lo) / g).exp();
    lo - g * sum.ln()
}

/// Accumulated cost plus, for every cell, the value its predecessors
/// contributed (`D(n,m) - C(n,m)` before rounding). The backward sweep reads
/// transition probabilities off the latter.
struct ForwardTables {
    rows: usize,
    cols: usize,
    acc: Vec<f64>,
    pred: Vec<f64>,
}

fn forward_tables(costs: &DenseMatrix, gamma: Gamma) -> Result<ForwardTables> {
    let (rows, cols) = costs.shape();
    let c = costs.as_slice();
    let g = gamma.value();
    let mut acc = vec![0.0; rows * cols];
    let mut pred = vec![0.0; rows * cols];

    acc[0] = c[0];
    for m in 1..cols {
        pred[m] = acc[m - 1];
        acc[m] = pred[m] + c[m];
    }
    for n in 1..rows {
        let row = n * cols;
        let up = (n - 1) * cols;
        pred[row] = acc[up];
        acc[row] = pred[row] + c[row];
        for m in 1..cols {
            let p = soft_min3(acc[up + m - 1], acc[up + m], acc[row + m - 1], g);
            pred[row + m] = p;
            acc[row + m] = p + c[row + m];
        }
    }

    if let Some(i) = acc.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteCost {
            row: i / cols,
            col: i % cols,
        });
    }
    Ok(ForwardTables {
        rows,
        cols,
        acc,
        pred,
    })
}

fn backward(tables: &ForwardTables, gamma: Gamma) -> Vec<f64> {
    let ForwardTables {
        rows,
        cols,
        ref acc,
        ref pred,
    } = *tables;
    let g = gamma.value();
    // Probability that successor `s` selected predecessor `p`. Border cells
    // have a single predecessor whose weight evaluates to exp(0) = 1.
    let weight = |s: usize, p: usize| ((pred[s] - acc[p]) / g).exp().clamp(0.0, 1.0);

    let mut occ = vec![0.0; rows * cols];
    occ[rows * cols - 1] = 1.0;
    for n in (0..rows).rev() {
        for m in (0..cols).rev() {
            let p = n * cols + m;
            let mut e = 0.0;
            if n + 1 < rows {
                let down = p + cols;
                e += occ[down] * weight(down, p);
                if m + 1 < cols {
                    e += occ[down + 1] * weight(down + 1, p);
                }
            }
            if m + 1 < cols {
                e += occ[p + 1] * weight(p + 1, p);
            }
            if p + 1 < rows * cols {
                occ[p] = e;
            }
        }
    }
    occ
}

/// Soft alignment cost and accumulated cost matrix.
pub fn softdtw_forward(costs: &DenseMatrix, gamma: Gamma) -> Result<SoftDtwResult> {
    let tables = forward_tables(costs, gamma)?;
    Ok(result_from(tables))
}

fn result_from(tables: ForwardTables) -> SoftDtwResult {
    let cost = *tables.acc.last().expect("non-empty");
    SoftDtwResult {
        cost,
        accumulated: DenseMatrix::new(tables.rows, tables.cols, tables.acc)
            .expect("finite accumulated costs"),
    }
}

/// Gradient of the soft alignment cost with respect to every local cost.
pub fn softdtw_gradient(costs: &DenseMatrix, gamma: Gamma) -> Result<AlignmentGradient> {
    Ok(softdtw_value_and_gradient(costs, gamma)?.1)
}

/// Forward pass and gradient from a single set of tables.
pub fn softdtw_value_and_gradient(
    costs: &DenseMatrix,
    gamma: Gamma,
) -> Result<(SoftDtwResult, AlignmentGradient)> {
    let tables = forward_tables(costs, gamma)?;
    let occ = backward(&tables, gamma);
    let (rows, cols) = (tables.rows, tables.cols);
    let gradient = AlignmentGradient {
        entries: DenseMatrix::new(rows, cols, occ).expect("occupancies are finite"),
    };
    Ok((result_from(tables), gradient))
}

/// Classical DTW cost with the same border initialisation, and one optimal
/// path. Backtracking breaks ties diagonal first, then vertical (previous
/// row), then horizontal (previous column).
pub fn classical_dtw(costs: &DenseMatrix) -> (f64, WarpingPath) {
    let (rows, cols) = costs.shape();
    let mut acc = DenseMatrix::filled(rows, cols, 0.0);
    for n in 0..rows {
        for m in 0..cols {
            let best = match (n, m) {
                (0, 0) => 0.0,
                (0, _) => acc.get(0, m - 1),
                (_, 0) => acc.get(n - 1, 0),
                _ => acc
                    .get(n - 1, m - 1)
                    .min(acc.get(n - 1, m))
                    .min(acc.get(n, m - 1)),
            };
            acc.set(n, m, best + costs.get(n, m));
        }
    }

    let mut steps = vec![(rows - 1, cols - 1)];
    let (mut n, mut m) = (rows - 1, cols - 1);
    while (n, m) != (0, 0) {
        (n, m) = match (n, m) {
            (0, _) => (0, m - 1),
            (_, 0) => (n - 1, 0),
            _ => {
                let diag = acc.get(n - 1, m - 1);
                let vert = acc.get(n - 1, m);
                let horiz = acc.get(n, m - 1);
                if diag <= vert && diag <= horiz {
                    (n - 1, m - 1)
                } else if vert <= horiz {
                    (n - 1, m)
                } else {
                    (n, m - 1)
                }
            }
        };
        steps.push((n, m));
    }
    steps.reverse();
    (acc.get(rows - 1, cols - 1), WarpingPath { steps })
}

/// Number of warping paths through an `n × m` grid (the Delannoy number
/// `D(n-1, m-1)`), saturating at `u128::MAX`.
pub fn path_count(n: usize, m: usize) -> u128 {
    assert!(n >= 1 && m >= 1, "path_count needs a non-empty grid");
    let mut prev = vec![1u128; m];
    for _ in 1..n {
        let mut cur = vec![1u128; m];
        for j in 1..m {
            cur[j] = prev[j]
                .saturating_add(cur[j - 1])
                .saturating_add(prev[j - 1]);
        }
        prev = cur;
    }
    prev[m - 1]
}

/// Largest grid the enumeration oracle accepts, counted in paths.
pub const ENUMERATION_LIMIT: u128 = 1_000_000;

type Cell = (usize, usize);

/// Calls `visit` with every warping path of an `n × m` grid.
pub fn for_each_path(n: usize, m: usize, mut visit: impl FnMut(&[(usize, usize)])) {
    fn walk(path: &mut Vec<Cell>, end: Cell, visit: &mut dyn FnMut(&[Cell])) {
        let (i, j) = *path.last().expect("path starts at origin");
        if (i, j) == end {
            visit(path);
            return;
        }
        for (di, dj) in [(1, 1), (1, 0), (0, 1)] {
            let next = (i + di, j + dj);
            if next.0 <= end.0 && next.1 <= end.1 {
                path.push(next);
                walk(path, end, visit);
                path.pop();
            }
        }
    }
    let mut path = vec![(0, 0)];
    walk(&mut path, (n - 1, m - 1), &mut visit);
}

/// Reference SoftDTW by explicit enumeration of every warping path: the cost
/// is the soft minimum of all path costs, the gradient the Gibbs-weighted
/// occupancy of every cell.
pub fn brute_force_softdtw(costs: &DenseMatrix, gamma: Gamma) -> Result<(f64, AlignmentGradient)> {
    let (rows, cols) = costs.shape();
    let paths = path_count(rows, cols);
    if paths > ENUMERATION_LIMIT {
        return Err(Error::TooLarge {
            paths,
            limit: ENUMERATION_LIMIT,
        });
    }

    let mut path_costs = Vec::with_capacity(paths as usize);
    for_each_path(rows, cols, |p| {
        path_costs.push(p.iter().map(|&(n, m)| costs.get(n, m)).sum::<f64>());
    });
    let cost = soft_min(&path_costs, gamma);

    let g = gamma.value();
    let lo = path_costs.iter().copied().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = path_costs.iter().map(|&c| (-(c - lo) / g).exp()).collect();
    let total: f64 = weights.iter().sum();

    let mut occ = DenseMatrix::filled(rows, cols, 0.0);
    let mut k = 0;
    for_each_path(rows, cols, |p| {
        let w = weights[k] / total;
        k += 1;
        for &(n, m) in p {
            occ.set(n, m, occ.get(n, m) + w);
        }
    });
    Ok((cost, AlignmentGradient { entries: occ }))
}

/// Central differences `(D(c + h e_k) - D(c - h e_k)) / 2h` of
/// [`softdtw_forward`] for every cell `k`, evaluated without cancellation.
///
/// As a function of one local cost, `D(c + t e_k) = D(c) - g ln(1 + p expm1(-t/g))`,
/// where `p` is the Gibbs mass of the paths through `k`. That mass comes from
/// two forward passes, one over the cost matrix and one over its 180° rotation:
/// the soft cost of the paths through `k` is `F(k) + R(k) - c_k`. The quotient
/// therefore never subtracts two nearly equal rounded costs, and the backward
/// sweep is not involved.
pub fn finite_difference_gradient(
    costs: &DenseMatrix,
    gamma: Gamma,
    h: f64,
) -> Result<DenseMatrix> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "step must be positive, got {h}"
        )));
    }
    let (rows, cols) = costs.shape();
    let g = gamma.value();
    let forward = softdtw_forward(costs, gamma)?;
    let rotated: Vec<f64> = costs.as_slice().iter().rev().copied().collect();
    let reverse = softdtw_forward(&DenseMatrix::new(rows, cols, rotated)?, gamma)?;
    let mut out = DenseMatrix::filled(rows, cols, 0.0);
    for n in 0..rows {
        for m in 0..cols {
            let through = forward.accumulated.get(n, m)
                + reverse.accumulated.get(rows - 1 - n, cols - 1 - m)
                - costs.get(n, m);
            let p = (-(through - forward.cost) / g).exp().min(1.0);
            let up = -g * (p * (-h / g).exp_m1()).ln_1p();
            let down = -g * (p * (h / g).exp_m1()).ln_1p();
            out.set(n, m, (up - down) / (2.0 * h));
        }
    }
    Ok(out)
}
