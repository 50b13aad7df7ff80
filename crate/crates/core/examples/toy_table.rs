//! Trains every label variant and baseline on the bundled synthetic set and
//! prints the final frame-wise scores.
//!
//! cargo run --release -p softalign --example toy_table

use std::time::Instant;

use softalign::training::{toy, train, LossKind};
use softalign::LabelVariant;

fn main() {
    let data = toy::dataset();
    let runs = [
        (LabelVariant::Strong, LossKind::PerFrameCrossEntropy),
        (LabelVariant::Strong, LossKind::SoftDtw),
        (LabelVariant::CollapseDurations, LossKind::SoftDtw),
        (LabelVariant::CollapseThenStretch, LossKind::SoftDtw),
        (LabelVariant::Score, LossKind::SoftDtw),
        (LabelVariant::ScoreStretch, LossKind::SoftDtw),
        (LabelVariant::OvertoneReal, LossKind::PerFrameL2),
        (LabelVariant::OvertoneReal, LossKind::SoftDtw),
    ];
    println!("variant   loss      F      CS     AP     Acc    time");
    for (variant, loss_kind) in runs {
        let start = Instant::now();
        let out = train(&data, &toy::config(variant, loss_kind)).expect("toy run");
        let e = out.final_eval().expect("non-empty history");
        println!(
            "{:<9} {:<8} {:.3}  {:.3}  {:.3}  {:.3}  {:.1?}",
            variant.name(),
            loss_kind.name(),
            e.f_measure,
            e.cosine_similarity,
            e.average_precision,
            e.accuracy,
            start.elapsed()
        );
    }
}
