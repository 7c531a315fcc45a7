//! Registry-style trial and outcome records, their CSV ingestion and the
//! sample restrictions applied before any analysis.

mod category;
mod filters;
mod io;
mod split;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;

use crate::error::{Error, Result};

pub use category::{CategoryTable, ConditionCategory};
pub use filters::{apply_sample_filters, FilterAudit, FilterRule, FilterRuleCount};
pub use io::{
    ingest, rankings_of, read_aliases, read_rankings, read_synonyms, write_csv, write_outcomes,
    write_rankings, write_synonyms, write_text, write_trials, IngestOptions, RankingRow,
    SynonymRow,
};
pub use split::{SizeClass, SponsorSplit};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    II,
    III,
    /// Any other registry phase label (kept so the sample filter can drop it).
    Other(String),
}

impl Phase {
    pub fn label(&self) -> &str {
        match self {
            Phase::II => "II",
            Phase::III => "III",
            Phase::Other(s) => s,
        }
    }
}

impl FromStr for Phase {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let t = s.trim();
        if t.is_empty() {
            return Err("empty phase".into());
        }
        Ok(match t.to_ascii_lowercase().replace(' ', "").as_str() {
            "ii" | "2" | "phase2" | "phaseii" => Phase::II,
            "iii" | "3" | "phase3" | "phaseiii" => Phase::III,
            _ => Phase::Other(t.to_string()),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SponsorClass {
    Industry,
    NonIndustry,
}

impl SponsorClass {
    pub fn label(self) -> &'static str {
        match self {
            SponsorClass::Industry => "industry",
            SponsorClass::NonIndustry => "non_industry",
        }
    }
}

impl FromStr for SponsorClass {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().replace(['-', ' '], "_").as_str() {
            "industry" => Ok(SponsorClass::Industry),
            "non_industry" | "nonindustry" | "other" => Ok(SponsorClass::NonIndustry),
            other => Err(format!("unknown sponsor class `{other}`")),
        }
    }
}

/// Criteria by which industry sponsors are ranked for the large/small split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RankCriterion {
    Revenue2018,
    RxSales2018,
    Rnd2018,
    NTrials,
}

impl RankCriterion {
    pub const ALL: [RankCriterion; 4] = [
        RankCriterion::Revenue2018,
        RankCriterion::RxSales2018,
        RankCriterion::Rnd2018,
        RankCriterion::NTrials,
    ];

    pub fn label(self) -> &'static str {
        match self {
            RankCriterion::Revenue2018 => "revenue2018",
            RankCriterion::RxSales2018 => "rx_sales2018",
            RankCriterion::Rnd2018 => "rnd2018",
            RankCriterion::NTrials => "n_trials",
        }
    }
}

impl FromStr for RankCriterion {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        RankCriterion::ALL
            .into_iter()
            .find(|c| c.label() == s.trim())
            .ok_or_else(|| format!("unknown ranking criterion `{}`", s.trim()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StudyType {
    InterventionalSuperiority,
    Other,
}

impl StudyType {
    pub fn label(self) -> &'static str {
        match self {
            StudyType::InterventionalSuperiority => "interventional_superiority",
            StudyType::Other => "other",
        }
    }
}

impl FromStr for StudyType {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "interventional_superiority" => Ok(StudyType::InterventionalSuperiority),
            "" => Err("empty study type".into()),
            _ => Ok(StudyType::Other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OutcomeRank {
    Primary,
    Secondary,
}

impl OutcomeRank {
    pub fn label(self) -> &'static str {
        match self {
            OutcomeRank::Primary => "primary",
            OutcomeRank::Secondary => "secondary",
        }
    }
}

impl FromStr for OutcomeRank {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "primary" => Ok(OutcomeRank::Primary),
            "secondary" => Ok(OutcomeRank::Secondary),
            other => Err(format!("unknown outcome rank `{other}`")),
        }
    }
}

/// A p-value as it appears in the registry: exact, or only bounded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReportedP {
    Exact(f64),
    Less(f64),
    Greater(f64),
}

impl ReportedP {
    pub fn validate(self) -> std::result::Result<Self, String> {
        match self {
            ReportedP::Exact(p) if (0.0..=1.0).contains(&p) => Ok(self),
            ReportedP::Exact(p) => Err(format!("exact p-value {p} outside [0, 1]")),
            ReportedP::Less(t) | ReportedP::Greater(t) if t > 0.0 && t < 1.0 => Ok(self),
            ReportedP::Less(t) | ReportedP::Greater(t) => {
                Err(format!("p-value threshold {t} outside (0, 1)"))
            }
        }
    }

    pub fn kind_label(self) -> &'static str {
        match self {
            ReportedP::Exact(_) => "exact",
            ReportedP::Less(_) => "lt",
            ReportedP::Greater(_) => "gt",
        }
    }

    pub fn value(self) -> f64 {
        match self {
            ReportedP::Exact(v) | ReportedP::Less(v) | ReportedP::Greater(v) => v,
        }
    }

    pub fn from_parts(kind: &str, value: f64) -> std::result::Result<Self, String> {
        let p = match kind.trim() {
            "exact" => ReportedP::Exact(value),
            "lt" => ReportedP::Less(value),
            "gt" => ReportedP::Greater(value),
            other => return Err(format!("unknown p_kind `{other}` (expected exact|lt|gt)")),
        };
        p.validate()
    }
}

/// Protocol metadata of one registered trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial_id: String,
    pub phase: Phase,
    pub sponsor_name: String,
    pub sponsor_class: SponsorClass,
    /// Rank of the sponsor under each criterion; empty for unranked sponsors.
    pub industry_rank_keys: BTreeMap<RankCriterion, u32>,
    /// Main interventions. For phase II these are the curated main
    /// intervention sets (each a drug combination); for phase III each
    /// listed intervention is its own single-drug set.
    pub interventions: Vec<BTreeSet<String>>,
    pub mesh_conditions: BTreeSet<String>,
    pub condition_category: ConditionCategory,
    pub start_date: Option<NaiveDate>,
    pub completion_date: Option<NaiveDate>,
    pub enrollment: u32,
    pub placebo_comparator: bool,
    pub study_type: StudyType,
}

impl TrialRecord {
    /// Every drug named anywhere in the record's interventions.
    pub fn listed_drugs(&self) -> BTreeSet<&str> {
        self.interventions
            .iter()
            .flat_map(|set| set.iter().map(String::as_str))
            .collect()
    }

    pub fn is_industry(&self) -> bool {
        self.sponsor_class == SponsorClass::Industry
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeResult {
    pub trial_id: String,
    pub outcome_rank: OutcomeRank,
    pub reported_p: ReportedP,
    pub mht_adjusted: bool,
}

/// Immutable collection of trials and outcomes with verified referential
/// integrity.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Registry {
    trials: Vec<TrialRecord>,
    outcomes: Vec<OutcomeResult>,
    index: BTreeMap<String, usize>,
}

impl Registry {
    pub fn new(trials: Vec<TrialRecord>, outcomes: Vec<OutcomeResult>) -> Result<Self> {
        let mut index = BTreeMap::new();
        for (i, t) in trials.iter().enumerate() {
            if index.insert(t.trial_id.clone(), i).is_some() {
                return Err(Error::Domain(format!("duplicate trial_id `{}`", t.trial_id)));
            }
        }
        let dangling: BTreeSet<String> = outcomes
            .iter()
            .filter(|o| !index.contains_key(&o.trial_id))
            .map(|o| o.trial_id.clone())
            .collect();
        if !dangling.is_empty() {
            return Err(Error::DanglingTrials(dangling.into_iter().collect()));
        }
        Ok(Registry {
            trials,
            outcomes,
            index,
        })
    }

    pub fn trials(&self) -> &[TrialRecord] {
        &self.trials
    }

    pub fn outcomes(&self) -> &[OutcomeResult] {
        &self.outcomes
    }

    pub fn trial(&self, id: &str) -> Option<&TrialRecord> {
        self.index.get(id).map(|&i| &self.trials[i])
    }

    pub fn outcomes_of<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a OutcomeResult> + 'a {
        self.outcomes.iter().filter(move |o| o.trial_id == id)
    }

    /// Outcomes paired with their per-trial index (position among that
    /// trial's outcomes in file order).
    pub fn indexed_outcomes(&self) -> Vec<(usize, &OutcomeResult)> {
        let mut counters: BTreeMap<&str, usize> = BTreeMap::new();
        self.outcomes
            .iter()
            .map(|o| {
                let c = counters.entry(o.trial_id.as_str()).or_insert(0);
                let idx = *c;
                *c += 1;
                (idx, o)
            })
            .collect()
    }

    /// Keeps trials passing `keep` together with their outcomes.
    pub fn retain_trials(&self, mut keep: impl FnMut(&TrialRecord) -> bool) -> Registry {
        let trials: Vec<TrialRecord> = self.trials.iter().filter(|t| keep(t)).cloned().collect();
        let ids: BTreeSet<&str> = trials.iter().map(|t| t.trial_id.as_str()).collect();
        let outcomes = self
            .outcomes
            .iter()
            .filter(|o| ids.contains(o.trial_id.as_str()))
            .cloned()
            .collect();
        Registry::new(trials, outcomes).expect("subset of a valid registry is valid")
    }
}

/// Case-insensitive sponsor key: lowercase with whitespace runs collapsed.
pub fn normalize_sponsor(name: &str) -> String {
    name.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reported_p_bounds() {
        assert!(ReportedP::from_parts("exact", 0.0).is_ok());
        assert!(ReportedP::from_parts("exact", 1.0).is_ok());
        assert!(ReportedP::from_parts("exact", 1.5).is_err());
        assert!(ReportedP::from_parts("lt", 0.0).is_err());
        assert!(ReportedP::from_parts("gt", 1.0).is_err());
        assert!(ReportedP::from_parts("le", 0.1).is_err());
    }

    #[test]
    fn phase_labels() {
        assert_eq!("II".parse::<Phase>().unwrap(), Phase::II);
        assert_eq!("Phase 3".parse::<Phase>().unwrap(), Phase::III);
        assert_eq!(
            "Phase 2/Phase 3".parse::<Phase>().unwrap(),
            Phase::Other("Phase 2/Phase 3".into())
        );
    }

    #[test]
    fn sponsor_normalization() {
        assert_eq!(normalize_sponsor("  Eli   Lilly\t& Co "), "eli lilly & co");
    }
}
