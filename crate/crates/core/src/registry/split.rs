use std::collections::BTreeMap;
use std::fmt;

use super::{RankCriterion, Registry, TrialRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SizeClass {
    Large,
    Small,
}

impl SizeClass {
    pub fn label(self) -> &'static str {
        match self {
            SizeClass::Large => "large",
            SizeClass::Small => "small",
        }
    }
}

/// A definition of "large" industry sponsors: the top `k` under one
/// ranking criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SponsorSplit {
    pub criterion: RankCriterion,
    pub k: u32,
}

impl SponsorSplit {
    pub const MIN_K: u32 = 7;
    pub const MAX_K: u32 = 20;

    pub fn new(criterion: RankCriterion, k: u32) -> Result<Self> {
        if !(Self::MIN_K..=Self::MAX_K).contains(&k) {
            return Err(Error::config(format!(
                "sponsor split k={k} outside [{}, {}]",
                Self::MIN_K,
                Self::MAX_K
            )));
        }
        Ok(SponsorSplit { criterion, k })
    }

    /// Top ten by 2018 revenue, the main definition.
    pub fn main() -> Self {
        SponsorSplit {
            criterion: RankCriterion::Revenue2018,
            k: 10,
        }
    }

    /// The 4 x 14 admissible definitions.
    pub fn all() -> Vec<SponsorSplit> {
        RankCriterion::ALL
            .into_iter()
            .flat_map(|criterion| {
                (Self::MIN_K..=Self::MAX_K).map(move |k| SponsorSplit { criterion, k })
            })
            .collect()
    }

    /// Size class of an industry trial's sponsor; `None` for non-industry.
    pub fn classify(&self, trial: &TrialRecord) -> Option<SizeClass> {
        if !trial.is_industry() {
            return None;
        }
        match trial.industry_rank_keys.get(&self.criterion) {
            Some(&rank) if rank <= self.k => Some(SizeClass::Large),
            _ => Some(SizeClass::Small),
        }
    }

    /// Sponsor name to class for every industry sponsor in the registry.
    pub fn classification(&self, registry: &Registry) -> BTreeMap<String, SizeClass> {
        registry
            .trials()
            .iter()
            .filter_map(|t| self.classify(t).map(|c| (t.sponsor_name.clone(), c)))
            .collect()
    }

    pub fn label(&self) -> String {
        format!("{}_top{}", self.criterion.label(), self.k)
    }
}

impl fmt::Display for SponsorSplit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifty_six_splits() {
        let all = SponsorSplit::all();
        assert_eq!(all.len(), 56);
        assert!(all.contains(&SponsorSplit::main()));
        assert!(SponsorSplit::new(RankCriterion::NTrials, 6).is_err());
        assert!(SponsorSplit::new(RankCriterion::NTrials, 21).is_err());
        assert!(SponsorSplit::new(RankCriterion::NTrials, 20).is_ok());
    }
}
