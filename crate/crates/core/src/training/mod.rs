//! Gradient-descent training of a per-frame model against weakly or strongly
//! aligned targets.

mod data;
mod loss;
mod model;
pub mod toy;

pub use data::{generate_synthetic_dataset, SyntheticExcerpt, MAX_RUN, MIN_RUN};
pub use loss::{
    per_frame_baseline_loss, softdtw_loss_and_grads, softdtw_raw_loss_and_grads, LossKind,
    LossNormalizer,
};
pub use model::{LinearModel, ParamGrads};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::alignment::Gamma;
use crate::cost::CostFunction;
use crate::error::{Error, Result};
use crate::matrix::{FeatureSequence, PianoRoll};
use crate::metrics::{EvalReport, DEFAULT_THRESHOLD};
use crate::targets::{apply_overtones, make_variant, LabelVariant, OvertoneModel};

/// Hyperparameters of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub gamma: Gamma,
    pub learning_rate: f64,
    /// Heavy-ball momentum coefficient in `[0, 1)`; 0 is plain gradient descent.
    pub momentum: f64,
    pub epochs: usize,
    /// Excerpt pairs averaged per parameter update.
    pub batch_excerpts: usize,
    pub seed: u64,
    pub variant: LabelVariant,
    pub loss_kind: LossKind,
    /// Half-width of the uniform weight initialisation.
    pub init_scale: f64,
    pub threshold: f64,
    pub overtones: OvertoneModel,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: Gamma::default(),
            learning_rate: 1.0,
            momentum: 0.9,
            epochs: toy::EPOCHS,
            batch_excerpts: 1,
            seed: 0,
            variant: LabelVariant::Strong,
            loss_kind: LossKind::SoftDtw,
            init_scale: 0.01,
            threshold: DEFAULT_THRESHOLD,
            overtones: OvertoneModel::default(),
        }
    }
}

/// Losses and evaluation after one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean of the normalised pair losses of the epoch.
    pub loss: f64,
    /// Normalised loss of every batch, in update order.
    pub batch_losses: Vec<f64>,
    pub eval: EvalReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: LinearModel,
    pub history: Vec<EpochRecord>,
    /// Raw loss of the first batch, used as normaliser.
    pub loss_reference: f64,
}

impl TrainOutcome {
    pub fn first_batch_loss(&self) -> Option<f64> {
        self.history.first()?.batch_losses.first().copied()
    }

    pub fn final_eval(&self) -> Option<&EvalReport> {
        self.history.last().map(|r| &r.eval)
    }
}

fn validate(dataset: &[SyntheticExcerpt], config: &TrainConfig) -> Result<()> {
    let invalid = |msg: String| Err(Error::InvalidConfig(msg));
    let first = dataset
        .first()
        .ok_or_else(|| Error::InvalidConfig("dataset is empty".into()))?;
    if config.epochs == 0 {
        return invalid("epochs must be positive".into());
    }
    if config.batch_excerpts == 0 {
        return invalid("batch size must be positive".into());
    }
    if !(config.learning_rate.is_finite() && config.learning_rate > 0.0) {
        return invalid(format!(
            "learning rate must be positive, got {}",
            config.learning_rate
        ));
    }
    if !(0.0..1.0).contains(&config.momentum) {
        return invalid(format!(
            "momentum must lie in [0, 1), got {}",
            config.momentum
        ));
    }
    if !(config.init_scale.is_finite() && config.init_scale >= 0.0) {
        return invalid(format!(
            "init scale must be non-negative, got {}",
            config.init_scale
        ));
    }
    for (i, ex) in dataset.iter().enumerate() {
        if ex.input.dim() != first.input.dim() {
            return Err(Error::DimensionMismatch {
                left: first.input.dim(),
                right: ex.input.dim(),
            });
        }
        if ex.input.len() != ex.strong_target.len() {
            return invalid(format!(
                "excerpt {i}: input and strong target lengths differ"
            ));
        }
    }
    if config.loss_kind.is_per_frame()
        && matches!(
            config.variant,
            LabelVariant::CollapseDurations | LabelVariant::Score
        )
    {
        return invalid(format!(
            "per-frame loss `{}` needs frame-aligned targets; variant `{}` is not",
            config.loss_kind, config.variant
        ));
    }
    Ok(())
}

fn build_targets(
    dataset: &[SyntheticExcerpt],
    config: &TrainConfig,
) -> Result<Vec<FeatureSequence>> {
    dataset
        .iter()
        .map(|ex| {
            make_variant(
                Some(&ex.strong_target),
                Some(&ex.score_target),
                config.variant,
                ex.input.len(),
                Some(&config.overtones),
            )
            .map(|t| t.to_features())
        })
        .collect()
}

/// Evaluates `model` on every excerpt against its strong annotations,
/// micro-averaged over the concatenation. For real-valued variants, cosine
/// similarity is measured against the overtone-expanded annotations.
pub fn evaluate(
    model: &LinearModel,
    dataset: &[SyntheticExcerpt],
    variant: LabelVariant,
    overtones: &OvertoneModel,
    threshold: f64,
) -> Result<EvalReport> {
    let preds = dataset
        .iter()
        .map(|ex| model.forward(&ex.input))
        .collect::<Result<Vec<_>>>()?;
    let pred = FeatureSequence::concat(&preds)?;
    let rolls: Vec<PianoRoll> = dataset.iter().map(|ex| ex.strong_target.clone()).collect();
    let roll = PianoRoll::concat(&rolls)?;
    if variant.is_real_valued() {
        EvalReport::compute_with_reference(
            &pred,
            &roll,
            &apply_overtones(&roll, overtones),
            threshold,
        )
    } else {
        EvalReport::compute(&pred, &roll, threshold)
    }
}

fn pair_loss(
    model: &LinearModel,
    input: &FeatureSequence,
    target: &FeatureSequence,
    config: &TrainConfig,
) -> Result<(f64, ParamGrads)> {
    match config.loss_kind {
        LossKind::SoftDtw => softdtw_raw_loss_and_grads(
            model,
            input,
            target,
            config.gamma,
            CostFunction::SquaredEuclidean,
        ),
        kind => per_frame_baseline_loss(model, input, target, kind),
    }
}

/// Trains on `dataset` and evaluates on the same excerpts after every epoch.
pub fn train(dataset: &[SyntheticExcerpt], config: &TrainConfig) -> Result<TrainOutcome> {
    train_with_eval(dataset, dataset, config)
}

/// Trains on `dataset`, evaluating on `eval_set` after every epoch.
///
/// Deterministic for a fixed configuration: initial weights and the excerpt
/// order of each epoch come from `config.seed`.
pub fn train_with_eval(
    dataset: &[SyntheticExcerpt],
    eval_set: &[SyntheticExcerpt],
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    validate(dataset, config)?;
    if eval_set.is_empty() {
        return Err(Error::InvalidConfig("evaluation set is empty".into()));
    }
    let targets = build_targets(dataset, config)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let input_dim = dataset[0].input.dim();
    let mut model = LinearModel::random(input_dim, config.init_scale, &mut rng);
    let mut velocity = ParamGrads::zeros(input_dim);
    let mut normalizer = LossNormalizer::new();
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut batch_losses = Vec::new();
        let mut pair_total = 0.0;
        for batch in order.chunks(config.batch_excerpts) {
            let mut raw = 0.0;
            let mut grads = ParamGrads::zeros(input_dim);
            for &i in batch {
                let (l, g) = pair_loss(&model, &dataset[i].input, &targets[i], config)?;
                raw += l;
                grads.add(&g);
            }
            let size = batch.len() as f64;
            let divisor = normalizer.divisor(raw / size)?;
            pair_total += raw / divisor;
            batch_losses.push(raw / size / divisor);

            grads.scale(1.0 / (size * divisor));
            velocity.scale(config.momentum);
            grads.scale(-config.learning_rate);
            velocity.add(&grads);
            model.apply_step(&velocity);
        }
        let eval = evaluate(
            &model,
            eval_set,
            config.variant,
            &config.overtones,
            config.threshold,
        )?;
        history.push(EpochRecord {
            epoch,
            loss: pair_total / dataset.len() as f64,
            batch_losses,
            eval,
        });
    }

    Ok(TrainOutcome {
        model,
        history,
        loss_reference: normalizer.reference().expect("at least one batch ran"),
    })
}
