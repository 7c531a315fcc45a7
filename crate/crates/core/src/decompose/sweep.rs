use rayon::prelude::*;

use super::{estimate, DecomposeConfig, DecompositionSample, Shares, TrialBundle};
use crate::linker::LinkReport;
use crate::registry::{Registry, SizeClass, SponsorSplit};
use crate::sample::{ScoredOutcome, SponsorGroup};

/// Point decomposition of one split × size class cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitCell {
    pub split: SponsorSplit,
    pub class: SizeClass,
    pub result: std::result::Result<(Shares, Option<f64>), String>,
}

impl SplitCell {
    /// Explained fraction, `None` when failed or undefined.
    pub fn explained(&self) -> Option<f64> {
        self.result.as_ref().ok().and_then(|(_, e)| *e)
    }
}

/// Explained fraction (ph2_sc − ph2)/(ph3 − ph2) for every split and size
/// class; cells with |ph3 − ph2| below the configured tolerance are
/// reported with an undefined fraction.
pub fn sponsor_split_sweep(
    reg: &Registry,
    scored: &[ScoredOutcome],
    links: &LinkReport,
    splits: &[SponsorSplit],
    cfg: &DecomposeConfig,
) -> Vec<SplitCell> {
    let cells: Vec<(SponsorSplit, SizeClass)> = splits
        .iter()
        .flat_map(|&s| [(s, SizeClass::Large), (s, SizeClass::Small)])
        .collect();
    cells
        .into_par_iter()
        .map(|(split, class)| {
            let sample = DecompositionSample::new(reg, scored, links, SponsorGroup::Sized(split, class));
            let ph2: Vec<&TrialBundle<'_>> = sample.ph2.iter().collect();
            let ph3: Vec<&TrialBundle<'_>> = sample.ph3.iter().collect();
            let result = estimate(&ph2, &ph3, cfg)
                .map(|e| (e.shares, e.shares.explained_fraction(cfg.undefined_tol)))
                .map_err(|e| e.to_string());
            SplitCell {
                split,
                class,
                result,
            }
        })
        .collect()
}
