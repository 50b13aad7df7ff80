//! Synthetic excerpts: random note runs, an overtone-rendered noisy "audio"
//! input, and a tempo-warped score of the same notes.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::matrix::{FeatureSequence, PianoRoll, PitchFrame, PITCH_COUNT};
use crate::targets::{apply_overtones, OvertoneModel};

/// Shortest and longest note run, in frames.
pub const MIN_RUN: usize = 2;
pub const MAX_RUN: usize = 12;

/// Per-run duration factor of the score relative to the excerpt.
const SCORE_TEMPO_RANGE: std::ops::RangeInclusive<f64> = 0.4..=1.0;

/// Probability that a run is a rest.
const REST_PROBABILITY: f64 = 0.1;

/// One training pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticExcerpt {
    /// `frames × 72` input features.
    pub input: FeatureSequence,
    /// Frame-aligned annotations, same length as `input`.
    pub strong_target: PianoRoll,
    /// Same run sequence as `strong_target` with independently shortened
    /// run lengths; never longer than `input`.
    pub score_target: PianoRoll,
}

fn random_chord(rng: &mut ChaCha8Rng, polyphony: usize) -> PitchFrame {
    let mut frame = [false; PITCH_COUNT];
    if rng.random_bool(REST_PROBABILITY) {
        return frame;
    }
    let voices = rng.random_range(1..=polyphony);
    for p in sample(rng, PITCH_COUNT, voices) {
        frame[p] = true;
    }
    frame
}

fn generate_excerpt(
    rng: &mut ChaCha8Rng,
    frames: usize,
    polyphony: usize,
    noise_level: f64,
) -> SyntheticExcerpt {
    let mut chords: Vec<(PitchFrame, usize)> = Vec::new();
    let mut strong = Vec::with_capacity(frames);
    while strong.len() < frames {
        let chord = loop {
            let c = random_chord(rng, polyphony);
            if chords.last().map(|l| l.0) != Some(c) {
                break c;
            }
        };
        let run = rng
            .random_range(MIN_RUN..=MAX_RUN)
            .min(frames - strong.len());
        strong.extend(std::iter::repeat_n(chord, run));
        chords.push((chord, run));
    }

    // Each run is shortened by its own tempo factor, so the score is never
    // longer than the excerpt.
    let score: Vec<PitchFrame> = chords
        .iter()
        .flat_map(|&(c, run)| {
            let factor = rng.random_range(SCORE_TEMPO_RANGE);
            let len = ((run as f64 * factor).round() as usize).clamp(1, run);
            std::iter::repeat_n(c, len)
        })
        .collect();

    let strong_target = PianoRoll::new(strong).expect("frames >= 1");
    let mut input = apply_overtones(&strong_target, &OvertoneModel::default());
    if noise_level > 0.0 {
        let noisy: Vec<f64> = input
            .as_slice()
            .iter()
            .map(|&v| {
                let z: f64 = StandardNormal.sample(rng);
                v + noise_level * z
            })
            .collect();
        input = FeatureSequence::from_flat(PITCH_COUNT, noisy).expect("same shape");
    }
    SyntheticExcerpt {
        input,
        strong_target,
        score_target: PianoRoll::new(score).expect("at least one chord"),
    }
}

/// Deterministic synthetic dataset. Chords hold between one and
/// `polyphony` random pitches; inputs are the overtone rendering of the
/// strong roll plus Gaussian noise of standard deviation `noise_level`.
pub fn generate_synthetic_dataset(
    seed: u64,
    excerpt_count: usize,
    frames: usize,
    polyphony: usize,
    noise_level: f64,
) -> Result<Vec<SyntheticExcerpt>> {
    if excerpt_count == 0 || frames == 0 {
        return Err(Error::InvalidConfig(
            "excerpt count and frame count must be positive".into(),
        ));
    }
    if polyphony == 0 || polyphony > PITCH_COUNT {
        return Err(Error::InvalidConfig(format!(
            "polyphony must lie in 1..=72, got {polyphony}"
        )));
    }
    if !(noise_level.is_finite() && noise_level >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "noise level must be non-negative, got {noise_level}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..excerpt_count)
        .map(|_| generate_excerpt(&mut rng, frames, polyphony, noise_level))
        .collect())
}
