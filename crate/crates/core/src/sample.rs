//! Scored outcomes and the analysis groups they are split into.

use std::fmt;

use crate::error::Result;
use crate::pz::{impute_other_censors, transform, Sidedness, ZScore};
use crate::registry::{OutcomeRank, Phase, Registry, ReportedP, SizeClass, SponsorSplit, TrialRecord};

/// One outcome of a registry with its constructed z-score.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredOutcome {
    /// Position of the trial in `Registry::trials()`.
    pub trial: usize,
    pub trial_id: String,
    /// Position among the trial's outcomes in file order.
    pub outcome_index: usize,
    pub outcome_rank: OutcomeRank,
    pub mht_adjusted: bool,
    pub reported_p: ReportedP,
    pub z: ZScore,
}

/// Transforms every outcome of the registry. Other-censors are left
/// unimputed; imputation happens within an analysis group.
pub fn score_outcomes(reg: &Registry, side: Sidedness) -> Vec<ScoredOutcome> {
    let index: std::collections::BTreeMap<&str, usize> = reg
        .trials()
        .iter()
        .enumerate()
        .map(|(i, t)| (t.trial_id.as_str(), i))
        .collect();
    reg.indexed_outcomes()
        .into_iter()
        .map(|(k, o)| ScoredOutcome {
            trial: index[o.trial_id.as_str()],
            trial_id: o.trial_id.clone(),
            outcome_index: k,
            outcome_rank: o.outcome_rank,
            mht_adjusted: o.mht_adjusted,
            reported_p: o.reported_p,
            z: transform(o.reported_p, side),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SponsorGroup {
    All,
    Industry,
    NonIndustry,
    Sized(SponsorSplit, SizeClass),
}

impl SponsorGroup {
    pub fn admits(&self, t: &TrialRecord) -> bool {
        match self {
            SponsorGroup::All => true,
            SponsorGroup::Industry => t.is_industry(),
            SponsorGroup::NonIndustry => !t.is_industry(),
            SponsorGroup::Sized(split, class) => split.classify(t) == Some(*class),
        }
    }

    pub fn label(&self) -> String {
        match self {
            SponsorGroup::All => "all".into(),
            SponsorGroup::Industry => "industry".into(),
            SponsorGroup::NonIndustry => "non_industry".into(),
            SponsorGroup::Sized(split, class) => format!("{}_{}", class.label(), split.label()),
        }
    }
}

impl fmt::Display for SponsorGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// A phase × sponsor group × outcome rank cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AnalysisGroup {
    pub phase: Phase2or3,
    pub sponsors: SponsorGroup,
    pub rank: OutcomeRank,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase2or3 {
    II,
    III,
}

impl Phase2or3 {
    pub fn matches(self, p: &Phase) -> bool {
        matches!(
            (self, p),
            (Phase2or3::II, Phase::II) | (Phase2or3::III, Phase::III)
        )
    }

    pub fn label(self) -> &'static str {
        match self {
            Phase2or3::II => "II",
            Phase2or3::III => "III",
        }
    }
}

impl AnalysisGroup {
    pub fn new(phase: Phase2or3, sponsors: SponsorGroup) -> Self {
        AnalysisGroup {
            phase,
            sponsors,
            rank: OutcomeRank::Primary,
        }
    }

    pub fn admits(&self, reg: &Registry, o: &ScoredOutcome) -> bool {
        let t = &reg.trials()[o.trial];
        o.outcome_rank == self.rank && self.phase.matches(&t.phase) && self.sponsors.admits(t)
    }

    /// Outcomes of the group with other-censors imputed within the group.
    pub fn select(&self, reg: &Registry, scored: &[ScoredOutcome]) -> Result<Vec<ScoredOutcome>> {
        let mut rows: Vec<ScoredOutcome> = scored
            .iter()
            .filter(|o| self.admits(reg, o))
            .cloned()
            .collect();
        let imputed = impute_other_censors(&rows.iter().map(|o| o.z).collect::<Vec<_>>())?;
        for (row, z) in rows.iter_mut().zip(imputed) {
            row.z = z;
        }
        Ok(rows)
    }

    pub fn label(&self) -> String {
        format!("phase{}_{}_{}", self.phase.label(), self.sponsors, self.rank.label())
    }
}

/// Precisely reported z-values of a set of outcomes.
pub fn precise_values(rows: &[ScoredOutcome]) -> Vec<f64> {
    rows.iter().filter_map(|o| o.z.precise()).collect()
}
