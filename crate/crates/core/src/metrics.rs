//! Frame-wise evaluation of real-valued predictions against strongly aligned
//! references. Counts are micro-averaged over all frame/pitch cells.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::matrix::{FeatureSequence, PianoRoll, PITCH_COUNT};

/// Detection threshold used when none is given.
pub const DEFAULT_THRESHOLD: f64 = 0.4;

fn check_lengths(left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(Error::LengthMismatch { left, right });
    }
    Ok(())
}

fn check_pitch_dim(pred: &FeatureSequence) -> Result<()> {
    if pred.dim() != PITCH_COUNT {
        return Err(Error::DimensionMismatch {
            left: pred.dim(),
            right: PITCH_COUNT,
        });
    }
    Ok(())
}

/// Mean per-frame cosine similarity. A frame where one side is the zero
/// vector scores 1 if both are zero and 0 otherwise.
pub fn cosine_similarity(pred: &FeatureSequence, reference: &FeatureSequence) -> Result<f64> {
    check_lengths(pred.len(), reference.len())?;
    if pred.dim() != reference.dim() {
        return Err(Error::DimensionMismatch {
            left: pred.dim(),
            right: reference.dim(),
        });
    }
    let total: f64 = pred
        .frames()
        .zip(reference.frames())
        .map(|(p, r)| {
            let dot: f64 = p.iter().zip(r).map(|(a, b)| a * b).sum();
            let pp: f64 = p.iter().map(|a| a * a).sum();
            let rr: f64 = r.iter().map(|b| b * b).sum();
            match (pp == 0.0, rr == 0.0) {
                (true, true) => 1.0,
                (true, false) | (false, true) => 0.0,
                // One square root keeps identical frames at exactly 1.
                (false, false) => (dot / (pp * rr).sqrt()).clamp(-1.0, 1.0),
            }
        })
        .sum();
    Ok(total / pred.len() as f64)
}

/// Detection counts and the scores derived from them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdScores {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub accuracy: f64,
}

impl ThresholdScores {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |num: usize, den: usize| {
            if den == 0 {
                1.0
            } else {
                num as f64 / den as f64
            }
        };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f_measure = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            true_positives: tp,
            false_positives: fp,
            false_negatives: fn_,
            precision,
            recall,
            f_measure,
            accuracy: ratio(tp, tp + fp + fn_),
        }
    }
}

/// Binarises `pred` at `>= threshold` and scores it against `reference`.
pub fn threshold_metrics(
    pred: &FeatureSequence,
    reference: &PianoRoll,
    threshold: f64,
) -> Result<ThresholdScores> {
    check_lengths(pred.len(), reference.len())?;
    check_pitch_dim(pred)?;
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (p, r) in pred.frames().zip(reference.frames()) {
        for (&score, &on) in p.iter().zip(r.iter()) {
            match (score >= threshold, on) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => {}
            }
        }
    }
    Ok(ThresholdScores::from_counts(tp, fp, fn_))
}

/// Area under the precision-recall curve by step integration over the
/// ranked cells, `sum_k (R_k - R_{k-1}) * P_k`. Cells with equal scores are
/// admitted together.
///
/// Returns [`Error::AllNegatives`] if the reference has no active cell.
pub fn average_precision(pred: &FeatureSequence, reference: &PianoRoll) -> Result<f64> {
    check_lengths(pred.len(), reference.len())?;
    check_pitch_dim(pred)?;
    let mut cells: Vec<(f64, bool)> = pred
        .frames()
        .zip(reference.frames())
        .flat_map(|(p, r)| p.iter().copied().zip(r.iter().copied()))
        .collect();
    let positives = cells.iter().filter(|c| c.1).count();
    if positives == 0 {
        return Err(Error::AllNegatives);
    }
    cells.sort_by(|a, b| b.0.total_cmp(&a.0));

    let (mut tp, mut seen) = (0usize, 0usize);
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    let mut i = 0;
    while i < cells.len() {
        let score = cells[i].0;
        while i < cells.len() && cells[i].0.total_cmp(&score) == Ordering::Equal {
            tp += usize::from(cells[i].1);
            seen += 1;
            i += 1;
        }
        let recall = tp as f64 / positives as f64;
        ap += (recall - prev_recall) * (tp as f64 / seen as f64);
        prev_recall = recall;
    }
    Ok(ap)
}

/// All frame-wise scores for one prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub cosine_similarity: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub accuracy: f64,
    /// 0 when the reference has no positives; see `average_precision_defined`.
    pub average_precision: f64,
    pub average_precision_defined: bool,
    pub threshold: f64,
}

impl EvalReport {
    /// Scores `pred` against a binary reference; cosine similarity uses the
    /// widened roll.
    pub fn compute(pred: &FeatureSequence, reference: &PianoRoll, threshold: f64) -> Result<Self> {
        Self::compute_with_reference(pred, reference, &reference.to_features(), threshold)
    }

    /// Like [`EvalReport::compute`], but measures cosine similarity against a
    /// separate real-valued reference (e.g. overtone-expanded annotations).
    pub fn compute_with_reference(
        pred: &FeatureSequence,
        roll: &PianoRoll,
        real_reference: &FeatureSequence,
        threshold: f64,
    ) -> Result<Self> {
        let cs = cosine_similarity(pred, real_reference)?;
        let t = threshold_metrics(pred, roll, threshold)?;
        let (average_precision, average_precision_defined) = match average_precision(pred, roll) {
            Ok(ap) => (ap, true),
            Err(Error::AllNegatives) => (0.0, false),
            Err(e) => return Err(e),
        };
        Ok(Self {
            cosine_similarity: cs,
            precision: t.precision,
            recall: t.recall,
            f_measure: t.f_measure,
            accuracy: t.accuracy,
            average_precision,
            average_precision_defined,
            threshold,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(rows: &[Vec<f64>]) -> FeatureSequence {
        FeatureSequence::from_rows(rows).unwrap()
    }

    fn frame_with(values: &[(usize, f64)]) -> Vec<f64> {
        let mut f = vec![0.0; PITCH_COUNT];
        for &(i, v) in values {
            f[i] = v;
        }
        f
    }

    #[test]
    fn cosine_identity_orthogonal_and_scale() {
        let r = seq(&[vec![1.0, 2.0], vec![0.0, 3.0]]);
        assert_eq!(cosine_similarity(&r, &r).unwrap(), 1.0);
        let a = seq(&[vec![1.0, 0.0]]);
        let b = seq(&[vec![0.0, 1.0]]);
        assert_eq!(cosine_similarity(&a, &b).unwrap(), 0.0);
        let half = seq(&[vec![0.5, 1.0], vec![0.0, 1.5]]);
        assert!((cosine_similarity(&half, &r).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cosine_zero_frames() {
        let z = seq(&[vec![0.0, 0.0]]);
        let nz = seq(&[vec![0.0, 1.0]]);
        assert_eq!(cosine_similarity(&z, &z).unwrap(), 1.0);
        assert_eq!(cosine_similarity(&z, &nz).unwrap(), 0.0);
    }

    #[test]
    fn cosine_shape_errors() {
        let a = seq(&[vec![1.0, 0.0]]);
        let b = seq(&[vec![1.0, 0.0], vec![1.0, 0.0]]);
        let c = seq(&[vec![1.0]]);
        assert!(matches!(
            cosine_similarity(&a, &b),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            cosine_similarity(&a, &c),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn perfect_binary_prediction() {
        let roll = PianoRoll::from_active(&[vec![1, 2], vec![], vec![40]]).unwrap();
        let pred = roll.to_features();
        let t = threshold_metrics(&pred, &roll, DEFAULT_THRESHOLD).unwrap();
        assert_eq!(
            (t.precision, t.recall, t.f_measure, t.accuracy),
            (1.0, 1.0, 1.0, 1.0)
        );
        let report = EvalReport::compute(&pred, &roll, DEFAULT_THRESHOLD).unwrap();
        assert_eq!(report.average_precision, 1.0);
        assert_eq!(report.cosine_similarity, 1.0);
    }

    #[test]
    fn two_hits_one_false_alarm() {
        let roll = PianoRoll::from_active(&[vec![0, 1]]).unwrap();
        let pred = seq(&[frame_with(&[(0, 0.9), (1, 0.4), (2, 0.7), (3, 0.39)])]);
        let t = threshold_metrics(&pred, &roll, 0.4).unwrap();
        assert_eq!(
            (t.true_positives, t.false_positives, t.false_negatives),
            (2, 1, 0)
        );
        assert_eq!(t.precision, 2.0 / 3.0);
        assert_eq!(t.recall, 1.0);
        assert_eq!(t.f_measure, 0.8);
        assert_eq!(t.accuracy, 2.0 / 3.0);
    }

    #[test]
    fn silent_prediction_against_notes() {
        let roll = PianoRoll::from_active(&[vec![3], vec![4]]).unwrap();
        let pred = seq(&[vec![0.0; 72], vec![0.0; 72]]);
        let t = threshold_metrics(&pred, &roll, 0.4).unwrap();
        assert_eq!(
            (t.precision, t.recall, t.f_measure, t.accuracy),
            (1.0, 0.0, 0.0, 0.0)
        );
    }

    #[test]
    fn empty_reference_and_empty_prediction() {
        let roll = PianoRoll::silent(2).unwrap();
        let pred = seq(&[vec![0.0; 72], vec![0.1; 72]]);
        let t = threshold_metrics(&pred, &roll, 0.4).unwrap();
        assert_eq!(t.accuracy, 1.0);
        assert_eq!(t.f_measure, 1.0);
        assert_eq!(average_precision(&pred, &roll), Err(Error::AllNegatives));
        let report = EvalReport::compute(&pred, &roll, 0.4).unwrap();
        assert_eq!(report.average_precision, 0.0);
        assert!(!report.average_precision_defined);
    }

    #[test]
    fn single_positive_ranked_last() {
        let roll = PianoRoll::from_active(&[vec![5]]).unwrap();
        let mut f = vec![0.9; 72];
        f[5] = 0.1;
        // Every other cell outranks the positive: AP = 1/72.
        let ap = average_precision(&seq(&[f]), &roll).unwrap();
        assert!((ap - 1.0 / 72.0).abs() < 1e-15);
    }

    #[test]
    fn tied_scores_form_one_step() {
        let roll = PianoRoll::from_active(&[vec![0]]).unwrap();
        // All 72 cells tie: one step to recall 1 at precision 1/72.
        let ap = average_precision(&seq(&[vec![0.5; 72]]), &roll).unwrap();
        assert!((ap - 1.0 / 72.0).abs() < 1e-15);
    }

    #[test]
    fn wrong_width_prediction() {
        let roll = PianoRoll::silent(1).unwrap();
        let pred = seq(&[vec![0.0; 10]]);
        assert!(matches!(
            threshold_metrics(&pred, &roll, 0.4),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn instance() -> impl Strategy<Value = (FeatureSequence, PianoRoll)> {
            (1usize..4).prop_flat_map(|n| {
                (
                    proptest::collection::vec(0.0f64..1.0, n * PITCH_COUNT),
                    proptest::collection::vec(proptest::bool::weighted(0.1), n * PITCH_COUNT),
                )
                    .prop_map(move |(scores, labels)| {
                        let pred = FeatureSequence::from_flat(PITCH_COUNT, scores).unwrap();
                        let frames = labels
                            .chunks_exact(PITCH_COUNT)
                            .map(|c| c.try_into().unwrap())
                            .collect();
                        (pred, PianoRoll::new(frames).unwrap())
                    })
            })
        }

        proptest! {
            #[test]
            fn metrics_stay_in_range((pred, roll) in instance(), threshold in 0.0f64..1.0) {
                let report = EvalReport::compute(&pred, &roll, threshold).unwrap();
                for v in [report.precision, report.recall, report.f_measure, report.accuracy, report.average_precision] {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
                prop_assert!((-1.0..=1.0).contains(&report.cosine_similarity));
                let t = threshold_metrics(&pred, &roll, threshold).unwrap();
                prop_assert_eq!(t.f_measure == 1.0, t.false_positives == 0 && t.false_negatives == 0);
            }

            #[test]
            fn zero_threshold_recalls_everything((pred, roll) in instance()) {
                let shifted = FeatureSequence::from_flat(
                    PITCH_COUNT,
                    pred.as_slice().iter().map(|v| v + 1e-3).collect(),
                ).unwrap();
                prop_assert_eq!(threshold_metrics(&shifted, &roll, 0.0).unwrap().recall, 1.0);
            }

            #[test]
            fn ap_invariant_under_monotone_transform((pred, roll) in instance()) {
                prop_assume!(roll.active_cells() > 0);
                let warped = FeatureSequence::from_flat(
                    PITCH_COUNT,
                    pred.as_slice().iter().map(|v| (3.0 * v).exp() - 7.0).collect(),
                ).unwrap();
                let a = average_precision(&pred, &roll).unwrap();
                let b = average_precision(&warped, &roll).unwrap();
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
