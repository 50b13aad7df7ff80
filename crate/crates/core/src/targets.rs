//! Target-sequence constructors: the label variants used for weakly aligned
//! training and the real-valued overtone expansion of a piano roll.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::matrix::{FeatureSequence, PianoRoll, PITCH_COUNT};

/// Which target sequence a model is trained against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LabelVariant {
    /// Frame-aligned annotations, unchanged.
    Strong,
    /// W1: annotations with note durations removed.
    CollapseDurations,
    /// W2: durations removed, then stretched to the input length.
    CollapseThenStretch,
    /// W3: a non-aligned score roll, used as is.
    Score,
    /// W4: the score roll stretched to the input length.
    ScoreStretch,
    /// Strong annotations expanded with the overtone model (real-valued).
    OvertoneReal,
}

impl LabelVariant {
    pub const ALL: [LabelVariant; 6] = [
        LabelVariant::Strong,
        LabelVariant::CollapseDurations,
        LabelVariant::CollapseThenStretch,
        LabelVariant::Score,
        LabelVariant::ScoreStretch,
        LabelVariant::OvertoneReal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LabelVariant::Strong => "strong",
            LabelVariant::CollapseDurations => "w1",
            LabelVariant::CollapseThenStretch => "w2",
            LabelVariant::Score => "w3",
            LabelVariant::ScoreStretch => "w4",
            LabelVariant::OvertoneReal => "overtone",
        }
    }

    pub fn needs_score(self) -> bool {
        matches!(self, LabelVariant::Score | LabelVariant::ScoreStretch)
    }

    /// Real-valued variants produce a [`Target::Real`].
    pub fn is_real_valued(self) -> bool {
        self == LabelVariant::OvertoneReal
    }
}

impl fmt::Display for LabelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LabelVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown label variant `{s}`")))
    }
}

/// Harmonic energy added above each active pitch.
///
/// Overtone `n` (harmonic `n + 1`) sits `round(12 * log2(n + 1))` semitones
/// above the fundamental with amplitude `decay_base^n`; the fundamental has
/// amplitude 1. Bins saturate at [`OvertoneModel::SATURATION`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OvertoneModel {
    overtone_count: usize,
    decay_base: f64,
}

impl OvertoneModel {
    pub const SATURATION: f64 = 1.0;

    pub fn new(overtone_count: usize, decay_base: f64) -> Result<Self> {
        if !(decay_base > 0.0 && decay_base < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "overtone decay base must lie in (0, 1), got {decay_base}"
            )));
        }
        Ok(Self {
            overtone_count,
            decay_base,
        })
    }

    pub fn overtone_count(&self) -> usize {
        self.overtone_count
    }

    pub fn decay_base(&self) -> f64 {
        self.decay_base
    }

    /// Semitone distance of overtone `n` from its fundamental.
    pub fn semitone_offset(n: usize) -> usize {
        (12.0 * ((n + 1) as f64).log2()).round() as usize
    }
}

impl Default for OvertoneModel {
    fn default() -> Self {
        Self {
            overtone_count: 10,
            decay_base: 1.0 / 3.0,
        }
    }
}

/// A training target: binary multi-hot frames or real-valued frames.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Binary(PianoRoll),
    Real(FeatureSequence),
}

impl Target {
    pub fn len(&self) -> usize {
        match self {
            Target::Binary(r) => r.len(),
            Target::Real(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Real-valued view; binary frames are widened to 0.0 / 1.0.
    pub fn to_features(&self) -> FeatureSequence {
        match self {
            Target::Binary(r) => r.to_features(),
            Target::Real(s) => s.clone(),
        }
    }

    pub fn as_roll(&self) -> Option<&PianoRoll> {
        match self {
            Target::Binary(r) => Some(r),
            Target::Real(_) => None,
        }
    }
}

/// Merges runs of identical consecutive frames into one frame each.
pub fn collapse_durations(roll: &PianoRoll) -> PianoRoll {
    let mut frames = roll.frames().to_vec();
    frames.dedup();
    PianoRoll::new(frames).expect("a non-empty roll collapses to a non-empty roll")
}

/// Repeats frames so that the roll has exactly `target_len` frames. Output
/// frame `n` (1-based) is input frame `ceil(n * M / target_len)`.
pub fn stretch_to_length(roll: &PianoRoll, target_len: usize) -> Result<PianoRoll> {
    let len = roll.len();
    if target_len < len {
        return Err(Error::ShrinkNotSupported {
            from: len,
            to: target_len,
        });
    }
    let frames = (0..target_len)
        .map(|n| *roll.frame(stretch_source_index(n, len, target_len)))
        .collect();
    PianoRoll::new(frames)
}

/// 0-based source frame for 0-based output frame `n`.
fn stretch_source_index(n: usize, len: usize, target_len: usize) -> usize {
    ((n + 1) * len).div_ceil(target_len) - 1
}

/// Real-valued frames obtained by adding overtone energy above every active
/// pitch. Contributions add up and saturate; bins above the top pitch are
/// dropped.
pub fn apply_overtones(roll: &PianoRoll, model: &OvertoneModel) -> FeatureSequence {
    let mut values = vec![0.0; roll.len() * PITCH_COUNT];
    let harmonics: Vec<(usize, f64)> = std::iter::once((0, 1.0))
        .chain((1..=model.overtone_count).map(|n| {
            (
                OvertoneModel::semitone_offset(n),
                model.decay_base.powi(n as i32),
            )
        }))
        .collect();

    for (frame, out) in roll
        .frames()
        .iter()
        .zip(values.chunks_exact_mut(PITCH_COUNT))
    {
        for pitch in (0..PITCH_COUNT).filter(|&p| frame[p]) {
            for &(offset, amplitude) in &harmonics {
                if let Some(bin) = out.get_mut(pitch + offset) {
                    *bin += amplitude;
                }
            }
        }
        for bin in out.iter_mut() {
            *bin = bin.min(OvertoneModel::SATURATION);
        }
    }
    FeatureSequence::from_flat(PITCH_COUNT, values).expect("roll is non-empty")
}

/// Builds the target sequence for `variant`.
///
/// `input_len` is the length of the model output the target will be aligned
/// with; it is only used by the stretching variants.
pub fn make_variant(
    strong: Option<&PianoRoll>,
    score: Option<&PianoRoll>,
    variant: LabelVariant,
    input_len: usize,
    overtones: Option<&OvertoneModel>,
) -> Result<Target> {
    let strong = || strong.ok_or(Error::MissingStrong);
    let score = || score.ok_or(Error::MissingScore);
    Ok(match variant {
        LabelVariant::Strong => Target::Binary(strong()?.clone()),
        LabelVariant::CollapseDurations => Target::Binary(collapse_durations(strong()?)),
        LabelVariant::CollapseThenStretch => Target::Binary(stretch_to_length(
            &collapse_durations(strong()?),
            input_len,
        )?),
        LabelVariant::Score => Target::Binary(score()?.clone()),
        LabelVariant::ScoreStretch => Target::Binary(stretch_to_length(score()?, input_len)?),
        LabelVariant::OvertoneReal => Target::Real(apply_overtones(
            strong()?,
            overtones.unwrap_or(&OvertoneModel::default()),
        )),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roll(active: &[&[usize]]) -> PianoRoll {
        PianoRoll::from_active(&active.iter().map(|a| a.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn collapse_merges_runs() {
        let (a, b): (&[usize], &[usize]) = (&[0, 4], &[7]);
        let r = roll(&[a, a, b, b, b, a]);
        assert_eq!(collapse_durations(&r), roll(&[a, b, a]));
    }

    #[test]
    fn collapse_constant_roll_to_single_frame() {
        let r = roll(&[&[3usize][..]; 10]);
        assert_eq!(collapse_durations(&r).len(), 1);
    }

    #[test]
    fn collapse_leaves_collapsed_input_alone() {
        let r = roll(&[&[1], &[2], &[1], &[]]);
        assert_eq!(collapse_durations(&r), r);
    }

    #[test]
    fn stretch_doubles_and_keeps_identity() {
        let r = roll(&[&[1], &[2]]);
        assert_eq!(
            stretch_to_length(&r, 4).unwrap(),
            roll(&[&[1], &[1], &[2], &[2]])
        );
        let r3 = roll(&[&[1], &[2], &[3]]);
        assert_eq!(stretch_to_length(&r3, 3).unwrap(), r3);
    }

    #[test]
    fn stretch_uses_ceiling_index_rule() {
        // ceil(n * 2 / 5) for n = 1..=5 is 1, 1, 2, 2, 2.
        let r = roll(&[&[1], &[2]]);
        assert_eq!(
            stretch_to_length(&r, 5).unwrap(),
            roll(&[&[1], &[1], &[2], &[2], &[2]])
        );
    }

    #[test]
    fn stretch_rejects_shrinking() {
        let r = roll(&[&[1], &[2], &[3]]);
        assert_eq!(
            stretch_to_length(&r, 2),
            Err(Error::ShrinkNotSupported { from: 3, to: 2 })
        );
    }

    #[test]
    fn stretch_index_map_exhaustive_small_cases() {
        for len in 1..=4usize {
            for target in len..=8usize {
                let map: Vec<usize> = (0..target)
                    .map(|n| stretch_source_index(n, len, target))
                    .collect();
                // Oracle: smallest integer k >= 1 with k * target >= (n+1) * len.
                for (n, &src) in map.iter().enumerate() {
                    let k = (1..=len).find(|k| k * target >= (n + 1) * len).unwrap();
                    assert_eq!(src + 1, k, "len={len} target={target} n={n}");
                }
                assert_eq!(map[0], 0);
                assert_eq!(*map.last().unwrap(), len - 1);
                assert!(map.windows(2).all(|w| w[1] == w[0] || w[1] == w[0] + 1));
                // Every source frame repeats floor or ceil of target/len times.
                for src in 0..len {
                    let reps = map.iter().filter(|&&s| s == src).count();
                    assert!(reps == target / len || reps == target.div_ceil(len));
                }
            }
        }
    }

    #[test]
    fn overtone_offsets_follow_equal_temperament() {
        let offsets: Vec<usize> = (1..=10).map(OvertoneModel::semitone_offset).collect();
        assert_eq!(offsets, vec![12, 19, 24, 28, 31, 34, 36, 38, 40, 42]);
    }

    #[test]
    fn overtones_of_lowest_pitch() {
        let out = apply_overtones(&roll(&[&[0]]), &OvertoneModel::default());
        let f = out.frame(0);
        let expected = [
            (0, 1.0),
            (12, 1.0 / 3.0),
            (19, 1.0 / 9.0),
            (24, 1.0 / 27.0),
            (28, 1.0 / 81.0),
            (31, 1.0 / 243.0),
            (34, 1.0 / 729.0),
            (36, 1.0 / 2187.0),
            (38, 1.0 / 6561.0),
            (40, 1.0 / 19683.0),
            (42, 1.0 / 59049.0),
        ];
        for (bin, amp) in expected {
            assert!(
                (f[bin] - amp).abs() < 1e-15,
                "bin {bin}: {} vs {amp}",
                f[bin]
            );
        }
        let nonzero = f.iter().filter(|&&v| v != 0.0).count();
        assert_eq!(nonzero, expected.len());
    }

    #[test]
    fn overtones_near_top_are_clipped() {
        let out = apply_overtones(&roll(&[&[70]]), &OvertoneModel::default());
        let f = out.frame(0);
        assert_eq!(f[70], 1.0);
        assert_eq!(f.iter().filter(|&&v| v != 0.0).count(), 1);
        let silent = apply_overtones(&roll(&[&[]]), &OvertoneModel::default());
        assert!(silent.frame(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn overlapping_overtones_saturate() {
        // Octave above pitch 0 collides with the fundamental of pitch 12.
        let out = apply_overtones(&roll(&[&[0, 12]]), &OvertoneModel::default());
        assert_eq!(out.frame(0)[12], 1.0);
        // 24: (1/27 from pitch 0) + (1/3 from pitch 12)
        assert!((out.frame(0)[24] - (1.0 / 27.0 + 1.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn overtone_model_validation() {
        assert!(OvertoneModel::new(3, 1.5).is_err());
        assert!(OvertoneModel::new(3, 0.0).is_err());
        assert_eq!(
            OvertoneModel::new(10, 1.0 / 3.0).unwrap(),
            OvertoneModel::default()
        );
    }

    #[test]
    fn variants_compose_basic_ops() {
        let (a, b): (&[usize], &[usize]) = (&[5], &[9, 20]);
        let strong = roll(&[a, a, b]);
        let score = roll(&[a, b, b, b]);

        let t = make_variant(Some(&strong), None, LabelVariant::Strong, 3, None).unwrap();
        assert_eq!(t, Target::Binary(strong.clone()));

        let t = make_variant(
            Some(&strong),
            None,
            LabelVariant::CollapseThenStretch,
            4,
            None,
        )
        .unwrap();
        assert_eq!(t, Target::Binary(roll(&[a, a, b, b])));

        let t = make_variant(
            Some(&strong),
            None,
            LabelVariant::CollapseDurations,
            4,
            None,
        )
        .unwrap();
        assert_eq!(t, Target::Binary(roll(&[a, b])));

        let t = make_variant(None, Some(&score), LabelVariant::Score, 3, None).unwrap();
        assert_eq!(t, Target::Binary(score.clone()));

        let t = make_variant(None, Some(&score), LabelVariant::ScoreStretch, 8, None).unwrap();
        assert_eq!(t.len(), 8);

        let t = make_variant(Some(&strong), None, LabelVariant::OvertoneReal, 3, None).unwrap();
        assert!(matches!(t, Target::Real(ref s) if s.len() == 3));
    }

    #[test]
    fn variant_errors() {
        let r = roll(&[&[1], &[2], &[3]]);
        assert_eq!(
            make_variant(Some(&r), None, LabelVariant::Score, 3, None),
            Err(Error::MissingScore)
        );
        assert_eq!(
            make_variant(None, Some(&r), LabelVariant::Strong, 3, None),
            Err(Error::MissingStrong)
        );
        assert_eq!(
            make_variant(None, Some(&r), LabelVariant::ScoreStretch, 2, None),
            Err(Error::ShrinkNotSupported { from: 3, to: 2 })
        );
    }

    #[test]
    fn variant_names_round_trip() {
        for v in LabelVariant::ALL {
            assert_eq!(v.name().parse::<LabelVariant>().unwrap(), v);
        }
        assert!("w5".parse::<LabelVariant>().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        /// Rolls drawn from a small chord vocabulary so that runs are common.
        fn rolls() -> impl Strategy<Value = PianoRoll> {
            proptest::collection::vec(0usize..4, 1..40).prop_map(|ids| {
                let chords: [&[usize]; 4] = [&[], &[3], &[3, 10], &[50, 60, 70]];
                PianoRoll::from_active(&ids.iter().map(|&i| chords[i].to_vec()).collect::<Vec<_>>())
                    .unwrap()
            })
        }

        proptest! {
            #[test]
            fn collapse_is_idempotent_without_adjacent_duplicates(r in rolls()) {
                let c = collapse_durations(&r);
                prop_assert_eq!(collapse_durations(&c), c.clone());
                prop_assert!(c.frames().windows(2).all(|w| w[0] != w[1]));
            }

            #[test]
            fn stretch_of_collapse_preserves_runs(r in rolls()) {
                let c = collapse_durations(&r);
                let s = stretch_to_length(&c, r.len()).unwrap();
                prop_assert_eq!(s.len(), r.len());
                prop_assert_eq!(collapse_durations(&s), c);
            }

            #[test]
            fn w1_never_longer_than_w2(r in rolls(), extra in 0usize..20) {
                let input_len = r.len() + extra;
                let w1 = make_variant(Some(&r), None, LabelVariant::CollapseDurations, input_len, None).unwrap();
                let w2 = make_variant(Some(&r), None, LabelVariant::CollapseThenStretch, input_len, None).unwrap();
                prop_assert!(w1.len() <= w2.len());
                prop_assert_eq!(w2.len(), input_len);
            }

            #[test]
            fn strong_variant_is_identity(r in rolls()) {
                let t = make_variant(Some(&r), None, LabelVariant::Strong, r.len(), None).unwrap();
                prop_assert_eq!(t, Target::Binary(r));
            }

            #[test]
            fn overtone_values_bounded_with_unit_fundamentals(r in rolls(), count in 0usize..12) {
                let model = OvertoneModel::new(count, 1.0 / 3.0).unwrap();
                let out = apply_overtones(&r, &model);
                for (frame, values) in r.frames().iter().zip(out.frames()) {
                    for p in 0..PITCH_COUNT {
                        prop_assert!((0.0..=1.0).contains(&values[p]));
                        if frame[p] {
                            prop_assert_eq!(values[p], 1.0);
                        }
                    }
                }
                if count == 0 {
                    prop_assert_eq!(out, r.to_features());
                }
            }
        }
    }
}
