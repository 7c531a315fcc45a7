use std::fmt;

use super::{normalize_sponsor, Phase, Registry, StudyType, TrialRecord};

const EXCLUDED_SPONSORS: [&str; 2] = ["colgate palmolive", "colgate-palmolive"];
const EXCLUDED_TRIALS: [&str; 1] = ["NCT02799472"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FilterRule {
    ExcludedSponsor,
    ExcludedTrial,
    NotInterventionalSuperiority,
    NotPhaseIIOrIII,
}

impl FilterRule {
    pub const ALL: [FilterRule; 4] = [
        FilterRule::ExcludedSponsor,
        FilterRule::ExcludedTrial,
        FilterRule::NotInterventionalSuperiority,
        FilterRule::NotPhaseIIOrIII,
    ];

    pub fn label(self) -> &'static str {
        match self {
            FilterRule::ExcludedSponsor => "excluded_sponsor",
            FilterRule::ExcludedTrial => "excluded_trial",
            FilterRule::NotInterventionalSuperiority => "not_interventional_superiority",
            FilterRule::NotPhaseIIOrIII => "not_phase_ii_or_iii",
        }
    }

    pub fn rationale(self) -> &'static str {
        match self {
            FilterRule::ExcludedSponsor => {
                "Colgate Palmolive: 137 of its 150 reported p-values equal 0.05 exactly"
            }
            FilterRule::ExcludedTrial => "NCT02799472: a single trial reporting 211 primary p-values",
            FilterRule::NotInterventionalSuperiority => {
                "only interventional superiority drug trials are analysed"
            }
            FilterRule::NotPhaseIIOrIII => "only phase II and phase III trials are analysed",
        }
    }

    fn rejects(self, t: &TrialRecord) -> bool {
        match self {
            FilterRule::ExcludedSponsor => {
                EXCLUDED_SPONSORS.contains(&normalize_sponsor(&t.sponsor_name).as_str())
            }
            FilterRule::ExcludedTrial => EXCLUDED_TRIALS.contains(&t.trial_id.as_str()),
            FilterRule::NotInterventionalSuperiority => {
                t.study_type != StudyType::InterventionalSuperiority
            }
            FilterRule::NotPhaseIIOrIII => !matches!(t.phase, Phase::II | Phase::III),
        }
    }
}

impl fmt::Display for FilterRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterRuleCount {
    pub rule: FilterRule,
    pub trials_removed: usize,
    pub outcomes_removed: usize,
}

/// What the sample filters removed. A trial failing several rules is
/// attributed to the first one in [`FilterRule::ALL`] order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterAudit {
    pub counts: Vec<FilterRuleCount>,
    pub trials_before: usize,
    pub trials_after: usize,
    pub outcomes_before: usize,
    pub outcomes_after: usize,
}

impl FilterAudit {
    pub fn removed(&self, rule: FilterRule) -> usize {
        self.counts
            .iter()
            .find(|c| c.rule == rule)
            .map_or(0, |c| c.trials_removed)
    }
}

pub fn apply_sample_filters(reg: &Registry) -> (Registry, FilterAudit) {
    let mut counts: Vec<FilterRuleCount> = FilterRule::ALL
        .into_iter()
        .map(|rule| FilterRuleCount {
            rule,
            trials_removed: 0,
            outcomes_removed: 0,
        })
        .collect();
    let mut n_outcomes = std::collections::BTreeMap::<&str, usize>::new();
    for o in reg.outcomes() {
        *n_outcomes.entry(o.trial_id.as_str()).or_default() += 1;
    }
    for t in reg.trials() {
        if let Some(i) = FilterRule::ALL.iter().position(|r| r.rejects(t)) {
            counts[i].trials_removed += 1;
            counts[i].outcomes_removed += n_outcomes.get(t.trial_id.as_str()).copied().unwrap_or(0);
        }
    }
    let kept = reg.retain_trials(|t| !FilterRule::ALL.iter().any(|r| r.rejects(t)));
    let audit = FilterAudit {
        counts,
        trials_before: reg.trials().len(),
        trials_after: kept.trials().len(),
        outcomes_before: reg.outcomes().len(),
        outcomes_after: kept.outcomes().len(),
    };
    (kept, audit)
}
