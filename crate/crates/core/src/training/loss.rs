use std::fmt;
use std::str::FromStr;

use crate::alignment::{softdtw_value_and_gradient, Gamma};
use crate::cost::{build_cost_matrix, CostFunction};
use crate::error::{Error, Result};
use crate::matrix::{FeatureSequence, PITCH_COUNT};
use crate::training::model::{softplus, LinearModel, ParamGrads};

/// Objective minimised during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossKind {
    /// Soft alignment cost between model output and target.
    SoftDtw,
    /// Mean squared error per frame and bin (strongly aligned targets).
    PerFrameL2,
    /// Mean binary cross-entropy per frame and bin (strongly aligned targets).
    PerFrameCrossEntropy,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::SoftDtw => "softdtw",
            LossKind::PerFrameL2 => "l2",
            LossKind::PerFrameCrossEntropy => "ce",
        }
    }

    pub fn is_per_frame(self) -> bool {
        self != LossKind::SoftDtw
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            LossKind::SoftDtw,
            LossKind::PerFrameL2,
            LossKind::PerFrameCrossEntropy,
        ]
        .into_iter()
        .find(|k| k.name().eq_ignore_ascii_case(s))
        .ok_or_else(|| Error::InvalidConfig(format!("unknown loss kind `{s}`")))
    }
}

/// Divides every loss by the raw loss of the first batch it sees, so the
/// first normalised loss is exactly 1. The reference never changes after
/// that.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossNormalizer {
    reference: Option<f64>,
}

impl LossNormalizer {
    pub fn new() -> Self {
        Self::default()
    }

    /// A normaliser frozen at a known reference.
    pub fn with_reference(reference: f64) -> Result<Self> {
        check_reference(reference)?;
        Ok(Self {
            reference: Some(reference),
        })
    }

    pub fn reference(&self) -> Option<f64> {
        self.reference
    }

    /// Returns the divisor for `raw`, adopting `raw` as the reference on
    /// first use.
    pub fn divisor(&mut self, raw: f64) -> Result<f64> {
        match self.reference {
            Some(r) => Ok(r),
            None => {
                check_reference(raw)?;
                self.reference = Some(raw);
                Ok(raw)
            }
        }
    }

    pub fn normalize(&mut self, raw: f64) -> Result<f64> {
        Ok(raw / self.divisor(raw)?)
    }
}

fn check_reference(reference: f64) -> Result<()> {
    if reference.is_finite() && reference > 0.0 {
        Ok(())
    } else {
        Err(Error::DegenerateNormalizer(reference))
    }
}

/// Unnormalised soft alignment loss between `model(input)` and `target`, and
/// its parameter gradients.
///
/// `∂L/∂z_n = sum_m E(n,m) ∂c(z_n, y_m)/∂z_n` is pushed through the sigmoid
/// and the affine map.
pub fn softdtw_raw_loss_and_grads(
    model: &LinearModel,
    input: &FeatureSequence,
    target: &FeatureSequence,
    gamma: Gamma,
    cost: CostFunction,
) -> Result<(f64, ParamGrads)> {
    let output = model.forward(input)?;
    let costs = build_cost_matrix(cost, &output, target)?;
    let (value, occupancy) = softdtw_value_and_gradient(&costs, gamma)?;

    let mut d_pre = vec![0.0; output.len() * PITCH_COUNT];
    for (n, (z, delta)) in output
        .frames()
        .zip(d_pre.chunks_exact_mut(PITCH_COUNT))
        .enumerate()
    {
        match cost {
            CostFunction::SquaredEuclidean => {
                // sum_m E(n,m) 2 (z - y_m) = 2 (mass z - sum_m E(n,m) y_m)
                let mut mass = 0.0;
                for (m, y) in target.frames().enumerate() {
                    let e = occupancy.get(n, m);
                    if e == 0.0 {
                        continue;
                    }
                    mass += e;
                    for (d, &yv) in delta.iter_mut().zip(y) {
                        *d -= e * yv;
                    }
                }
                for (d, &zv) in delta.iter_mut().zip(z) {
                    *d = 2.0 * (mass * zv + *d) * zv * (1.0 - zv);
                }
            }
        }
    }
    Ok((value.cost, model.backprop_pre(input, &d_pre)))
}

/// Normalised soft alignment loss and gradients; see [`LossNormalizer`].
pub fn softdtw_loss_and_grads(
    model: &LinearModel,
    input: &FeatureSequence,
    target: &FeatureSequence,
    gamma: Gamma,
    normalizer: &mut LossNormalizer,
) -> Result<(f64, ParamGrads)> {
    let (raw, mut grads) =
        softdtw_raw_loss_and_grads(model, input, target, gamma, CostFunction::SquaredEuclidean)?;
    let divisor = normalizer.divisor(raw)?;
    grads.scale(1.0 / divisor);
    Ok((raw / divisor, grads))
}

/// Mean per-cell squared error or binary cross-entropy against a strongly
/// aligned target, with analytic gradients. Unnormalised.
pub fn per_frame_baseline_loss(
    model: &LinearModel,
    input: &FeatureSequence,
    target: &FeatureSequence,
    kind: LossKind,
) -> Result<(f64, ParamGrads)> {
    if target.len() != input.len() {
        return Err(Error::LengthMismatch {
            left: input.len(),
            right: target.len(),
        });
    }
    if target.dim() != PITCH_COUNT {
        return Err(Error::DimensionMismatch {
            left: target.dim(),
            right: PITCH_COUNT,
        });
    }
    let pre = model.pre_activations(input)?;
    let cells = pre.len() as f64;
    let mut loss = 0.0;
    let mut d_pre = Vec::with_capacity(pre.len());
    for (&a, &y) in pre.iter().zip(target.as_slice()) {
        let z = super::model::sigmoid(a);
        match kind {
            LossKind::PerFrameL2 => {
                loss += (z - y) * (z - y);
                d_pre.push(2.0 * (z - y) * z * (1.0 - z) / cells);
            }
            LossKind::PerFrameCrossEntropy => {
                // -y ln σ(a) - (1-y) ln(1-σ(a)) = y softplus(-a) + (1-y) softplus(a)
                loss += y * softplus(-a) + (1.0 - y) * softplus(a);
                d_pre.push((z - y) / cells);
            }
            LossKind::SoftDtw => {
                return Err(Error::InvalidConfig(
                    "soft alignment is not a per-frame loss".into(),
                ))
            }
        }
    }
    Ok((loss / cells, model.backprop_pre(input, &d_pre)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alignment::path_count;
    use crate::matrix::PianoRoll;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_seq(rng: &mut ChaCha8Rng, len: usize, dim: usize) -> FeatureSequence {
        FeatureSequence::from_flat(
            dim,
            (0..len * dim)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
        )
        .unwrap()
    }

    fn fd_check(
        model: &LinearModel,
        analytic: &ParamGrads,
        mut loss: impl FnMut(&LinearModel) -> f64,
        tol: f64,
    ) {
        let h = 1e-5;
        let analytic = analytic.to_flat();
        for (i, &a) in analytic.iter().enumerate() {
            let mut plus = model.clone();
            *plus.parameters_mut().nth(i).unwrap() += h;
            let mut minus = model.clone();
            *minus.parameters_mut().nth(i).unwrap() -= h;
            let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
            let err = (fd - a).abs() / fd.abs().max(a.abs()).max(1e-6);
            assert!(err < tol, "param {i}: analytic {a} fd {fd} rel {err}");
        }
    }

    #[test]
    fn first_normalised_loss_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let model = LinearModel::random(4, 0.5, &mut rng);
        let input = random_seq(&mut rng, 6, 4);
        let target = PianoRoll::from_active(&[vec![1], vec![2, 3], vec![]])
            .unwrap()
            .to_features();
        let mut norm = LossNormalizer::new();
        let (loss, _) =
            softdtw_loss_and_grads(&model, &input, &target, Gamma::default(), &mut norm).unwrap();
        assert_eq!(loss, 1.0);
        assert!(norm.reference().unwrap() > 0.0);
        // Frozen afterwards.
        let (raw, _) = softdtw_raw_loss_and_grads(
            &model,
            &random_seq(&mut rng, 5, 4),
            &target,
            Gamma::default(),
            CostFunction::SquaredEuclidean,
        )
        .unwrap();
        assert_eq!(
            norm.normalize(raw).unwrap(),
            raw / norm.reference().unwrap()
        );
    }

    #[test]
    fn normaliser_rejects_non_positive_reference() {
        assert_eq!(
            LossNormalizer::new().normalize(-3.0),
            Err(Error::DegenerateNormalizer(-3.0))
        );
        assert!(LossNormalizer::new().normalize(0.0).is_err());
        assert!(LossNormalizer::with_reference(f64::NAN).is_err());
    }

    #[test]
    fn single_frame_target_equal_to_output_costs_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let model = LinearModel::random(3, 1.0, &mut rng);
        let input = random_seq(&mut rng, 1, 3);
        let target = model.forward(&input).unwrap();
        let (raw, grads) = softdtw_raw_loss_and_grads(
            &model,
            &input,
            &target,
            Gamma::default(),
            CostFunction::SquaredEuclidean,
        )
        .unwrap();
        assert_eq!(raw, 0.0);
        assert_eq!(grads.max_abs(), 0.0);
    }

    #[test]
    fn target_equal_to_output_is_stationary_for_constant_frames() {
        // Constant input -> constant output; every local cost is zero.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let model = LinearModel::random(3, 1.0, &mut rng);
        let input = FeatureSequence::from_rows(&vec![vec![0.2, -0.4, 0.9]; 5]).unwrap();
        let target = model.forward(&input).unwrap();
        let gamma = Gamma::new(2.0).unwrap();
        let (raw, grads) = softdtw_raw_loss_and_grads(
            &model,
            &input,
            &target,
            gamma,
            CostFunction::SquaredEuclidean,
        )
        .unwrap();
        let expected = -2.0 * (path_count(5, 5) as f64).ln();
        assert!((raw - expected).abs() < 1e-12);
        assert!(grads.max_abs() < 1e-12);
    }

    #[test]
    fn target_equal_to_output_approaches_zero_for_small_gamma() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let model = LinearModel::random(4, 1.0, &mut rng);
        let input = random_seq(&mut rng, 6, 4);
        let target = model.forward(&input).unwrap();
        let (raw, grads) = softdtw_raw_loss_and_grads(
            &model,
            &input,
            &target,
            Gamma::new(1e-4).unwrap(),
            CostFunction::SquaredEuclidean,
        )
        .unwrap();
        assert!(raw <= 0.0 && raw > -1e-9, "raw {raw}");
        assert!(grads.max_abs() < 1e-9);
    }

    #[test]
    fn softdtw_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for gamma in [0.5, 10.0, 20.0] {
            let gamma = Gamma::new(gamma).unwrap();
            let model = LinearModel::random(5, 0.5, &mut rng);
            let input = random_seq(&mut rng, 6, 5);
            let target = PianoRoll::from_active(&[vec![0, 4], vec![4], vec![9, 70], vec![]])
                .unwrap()
                .to_features();
            let mut norm = LossNormalizer::new();
            let (_, grads) =
                softdtw_loss_and_grads(&model, &input, &target, gamma, &mut norm).unwrap();
            fd_check(
                &model,
                &grads,
                |m| {
                    softdtw_loss_and_grads(m, &input, &target, gamma, &mut norm.clone())
                        .unwrap()
                        .0
                },
                1e-4,
            );
        }
    }

    #[test]
    fn cross_entropy_at_one_half_is_ln2() {
        let model = LinearModel::zeros(2);
        let input = FeatureSequence::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let target = PianoRoll::from_active(&[vec![1, 5], vec![70]])
            .unwrap()
            .to_features();
        let (loss, _) =
            per_frame_baseline_loss(&model, &input, &target, LossKind::PerFrameCrossEntropy)
                .unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn l2_of_perfect_prediction_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let model = LinearModel::random(3, 1.0, &mut rng);
        let input = random_seq(&mut rng, 4, 3);
        let target = model.forward(&input).unwrap();
        let (loss, grads) =
            per_frame_baseline_loss(&model, &input, &target, LossKind::PerFrameL2).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(grads.max_abs(), 0.0);
    }

    #[test]
    fn baseline_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let model = LinearModel::random(4, 0.8, &mut rng);
        let input = random_seq(&mut rng, 5, 4);
        let target = PianoRoll::from_active(&[vec![0], vec![1, 2], vec![], vec![71], vec![30]])
            .unwrap()
            .to_features();
        for kind in [LossKind::PerFrameL2, LossKind::PerFrameCrossEntropy] {
            let (_, grads) = per_frame_baseline_loss(&model, &input, &target, kind).unwrap();
            fd_check(
                &model,
                &grads,
                |m| per_frame_baseline_loss(m, &input, &target, kind).unwrap().0,
                1e-5,
            );
        }
    }

    #[test]
    fn baseline_requires_aligned_target() {
        let model = LinearModel::zeros(1);
        let input = FeatureSequence::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        let target = PianoRoll::silent(3).unwrap().to_features();
        assert_eq!(
            per_frame_baseline_loss(&model, &input, &target, LossKind::PerFrameL2).map(|r| r.0),
            Err(Error::LengthMismatch { left: 2, right: 3 })
        );
    }

    #[test]
    fn loss_kind_names() {
        for k in [
            LossKind::SoftDtw,
            LossKind::PerFrameL2,
            LossKind::PerFrameCrossEntropy,
        ] {
            assert_eq!(k.name().parse::<LossKind>().unwrap(), k);
        }
        assert!("mctc".parse::<LossKind>().is_err());
    }
}
