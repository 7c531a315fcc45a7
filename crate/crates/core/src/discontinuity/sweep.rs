use rayon::prelude::*;

use super::{DensityTest, DiscontinuityResult};
use crate::registry::{Registry, SizeClass, SponsorSplit};
use crate::sample::{AnalysisGroup, Phase2or3, ScoredOutcome, SponsorGroup};

/// One split × size class cell. Failed tests become `Err(reason)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub split: SponsorSplit,
    pub class: SizeClass,
    pub n: usize,
    pub result: std::result::Result<DiscontinuityResult, String>,
}

/// Runs `test` on the precise primary-outcome z-scores of every split ×
/// {Large, Small} cell of `phase`.
pub fn sponsor_sweep(
    reg: &Registry,
    scored: &[ScoredOutcome],
    splits: &[SponsorSplit],
    phase: Phase2or3,
    cutoff: f64,
    test: &dyn DensityTest,
) -> Vec<SweepCell> {
    let cells: Vec<(SponsorSplit, SizeClass)> = splits
        .iter()
        .flat_map(|&s| [(s, SizeClass::Large), (s, SizeClass::Small)])
        .collect();
    cells
        .into_par_iter()
        .map(|(split, class)| {
            let group = AnalysisGroup::new(phase, SponsorGroup::Sized(split, class));
            let sample: Vec<f64> = scored
                .iter()
                .filter(|o| group.admits(reg, o))
                .filter_map(|o| o.z.precise())
                .collect();
            SweepCell {
                split,
                class,
                n: sample.len(),
                result: test.test(&sample, cutoff).map_err(|e| e.to_string()),
            }
        })
        .collect()
}
