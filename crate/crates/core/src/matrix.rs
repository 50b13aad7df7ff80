//! Dense data types shared by every module: real-valued feature sequences,
//! binary piano rolls and row-major matrices.
//!
//! All indices in this crate are 0-based.

use std::ops::Index;

use crate::error::{Error, Result};

/// Number of pitch bins in a piano roll (C1 to B6).
pub const PITCH_COUNT: usize = 72;

/// MIDI note number of pitch bin 0 (C1). Bin `p` is MIDI note `24 + p`.
pub const LOWEST_MIDI_PITCH: u8 = 24;

/// One frame of a piano roll: `true` where a pitch is active.
pub type PitchFrame = [bool; PITCH_COUNT];

/// Dense row-major matrix with at least one row, one column, and finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl DenseMatrix {
    /// Builds a matrix from row-major values, rejecting empty shapes and
    /// non-finite entries.
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 {
            return Err(Error::EmptySequence);
        }
        if cols == 0 {
            return Err(Error::ZeroDimension);
        }
        if values.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                rows,
                cols,
                len: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteCost {
                row: i / cols,
                col: i % cols,
            });
        }
        Ok(Self { rows, cols, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = check_rows(rows)?;
        Self::new(rows.len(), cols, rows.concat())
    }

    /// Matrix filled with a constant. Callers guarantee a non-empty shape and
    /// finite fill value.
    pub(crate) fn filled(rows: usize, cols: usize, value: f64) -> Self {
        debug_assert!(rows > 0 && cols > 0 && value.is_finite());
        Self {
            rows,
            cols,
            values: vec![value; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub(crate) fn set(&mut self, row: usize, col: usize, value: f64) {
        self.values[row * self.cols + col] = value;
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.cols..(row + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.iter_rows().map(<[f64]>::to_vec).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut values = Vec::with_capacity(self.values.len());
        for c in 0..self.cols {
            values.extend((0..self.rows).map(|r| self.get(r, c)));
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            values,
        }
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (row, col): (usize, usize)) -> &f64 {
        &self.values[row * self.cols + col]
    }
}

fn check_rows<T>(rows: &[Vec<T>]) -> Result<usize> {
    let first = rows.first().ok_or(Error::EmptySequence)?;
    let dim = first.len();
    if let Some((row, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != dim) {
        return Err(Error::RaggedRows {
            expected: dim,
            row,
            found: r.len(),
        });
    }
    if dim == 0 {
        return Err(Error::ZeroDimension);
    }
    Ok(dim)
}

/// A sequence of `len()` real vectors, all of dimension `dim()`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    dim: usize,
    values: Vec<f64>,
}

impl FeatureSequence {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = check_rows(rows)?;
        Ok(Self {
            dim,
            values: rows.concat(),
        })
    }

    /// Wraps `len * dim` row-major values.
    pub fn from_flat(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        if values.is_empty() {
            return Err(Error::EmptySequence);
        }
        if !values.len().is_multiple_of(dim) {
            return Err(Error::ShapeMismatch {
                rows: values.len() / dim,
                cols: dim,
                len: values.len(),
            });
        }
        Ok(Self { dim, values })
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    /// Always false; sequences hold at least one frame.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn frame(&self, n: usize) -> &[f64] {
        &self.values[n * self.dim..(n + 1) * self.dim]
    }

    pub fn frames(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.frames().map(<[f64]>::to_vec).collect()
    }

    pub fn to_matrix(&self) -> Result<DenseMatrix> {
        DenseMatrix::new(self.len(), self.dim, self.values.clone())
    }

    /// Concatenates sequences of equal dimension along time.
    pub fn concat(parts: &[FeatureSequence]) -> Result<Self> {
        let first = parts.first().ok_or(Error::EmptySequence)?;
        let mut values = Vec::new();
        for p in parts {
            if p.dim != first.dim {
                return Err(Error::DimensionMismatch {
                    left: first.dim,
                    right: p.dim,
                });
            }
            values.extend_from_slice(&p.values);
        }
        Ok(Self {
            dim: first.dim,
            values,
        })
    }
}

impl From<DenseMatrix> for FeatureSequence {
    fn from(m: DenseMatrix) -> Self {
        Self {
            dim: m.cols,
            values: m.values,
        }
    }
}

/// Sequence of multi-hot pitch frames over the 72 bins C1..B6.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PianoRoll {
    frames: Vec<PitchFrame>,
}

impl PianoRoll {
    pub fn new(frames: Vec<PitchFrame>) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::EmptySequence);
        }
        Ok(Self { frames })
    }

    /// Builds a roll from per-frame lists of active pitch bins.
    pub fn from_active(active: &[Vec<usize>]) -> Result<Self> {
        let frames = active
            .iter()
            .map(|bins| {
                let mut frame = [false; PITCH_COUNT];
                for &b in bins {
                    if b >= PITCH_COUNT {
                        return Err(Error::WrongWidth(b + 1));
                    }
                    frame[b] = true;
                }
                Ok(frame)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(frames)
    }

    pub fn silent(len: usize) -> Result<Self> {
        Self::new(vec![[false; PITCH_COUNT]; len])
    }

    /// Accepts exactly the matrices that are 72 columns wide with every entry
    /// equal to 0 or 1.
    pub fn validate(candidate: &DenseMatrix) -> Result<Self> {
        if candidate.cols() != PITCH_COUNT {
            return Err(Error::WrongWidth(candidate.cols()));
        }
        let mut frames = Vec::with_capacity(candidate.rows());
        for (row, values) in candidate.iter_rows().enumerate() {
            let mut frame = [false; PITCH_COUNT];
            for (col, &value) in values.iter().enumerate() {
                frame[col] = if value == 1.0 {
                    true
                } else if value == 0.0 {
                    false
                } else {
                    return Err(Error::NotBinary { row, col, value });
                };
            }
            frames.push(frame);
        }
        Self::new(frames)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    /// Always false; rolls hold at least one frame.
    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame(&self, n: usize) -> &PitchFrame {
        &self.frames[n]
    }

    pub fn frames(&self) -> &[PitchFrame] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<PitchFrame> {
        self.frames
    }

    /// Number of active cells over all frames.
    pub fn active_cells(&self) -> usize {
        self.frames
            .iter()
            .map(|f| f.iter().filter(|&&on| on).count())
            .sum()
    }

    /// Widens binary frames to real vectors (1.0 / 0.0).
    pub fn to_features(&self) -> FeatureSequence {
        let values = self
            .frames
            .iter()
            .flat_map(|f| f.iter().map(|&on| if on { 1.0 } else { 0.0 }))
            .collect();
        FeatureSequence {
            dim: PITCH_COUNT,
            values,
        }
    }

    pub fn to_matrix(&self) -> DenseMatrix {
        DenseMatrix::from(self.to_features())
    }

    pub fn concat(parts: &[PianoRoll]) -> Result<Self> {
        Self::new(
            parts
                .iter()
                .flat_map(|p| p.frames.iter().copied())
                .collect(),
        )
    }
}

impl From<FeatureSequence> for DenseMatrix {
    fn from(seq: FeatureSequence) -> Self {
        DenseMatrix {
            rows: seq.len(),
            cols: seq.dim,
            values: seq.values,
        }
    }
}
