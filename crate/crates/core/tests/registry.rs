mod common;

use std::fs;

use common::{fixture, outcome, trial};
use proptest::prelude::*;
use trialscope::registry::{
    apply_sample_filters, ingest, rankings_of, write_outcomes, write_rankings, write_trials,
    ConditionCategory, FilterRule, IngestOptions, OutcomeRank, Phase, RankCriterion, Registry,
    ReportedP, SponsorClass, StudyType,
};
use trialscope::Error;

fn load_toy() -> Registry {
    let dir = fixture("toy");
    ingest(
        &dir.join("trials.csv"),
        &dir.join("outcomes.csv"),
        &dir.join("rankings.csv"),
        &IngestOptions::default(),
    )
    .unwrap()
}

#[test]
fn toy_fixture_loads_two_trials_three_outcomes() {
    let reg = load_toy();
    assert_eq!(reg.trials().len(), 2);
    assert_eq!(reg.outcomes().len(), 3);

    let t1 = reg.trial("NCT00000001").unwrap();
    assert_eq!(t1.phase, Phase::II);
    assert_eq!(t1.sponsor_class, SponsorClass::Industry);
    assert_eq!(t1.industry_rank_keys.get(&RankCriterion::Revenue2018), Some(&3));
    assert_eq!(t1.industry_rank_keys.get(&RankCriterion::NTrials), Some(&12));
    assert_eq!(t1.interventions.len(), 2);
    assert!(t1.interventions[0].contains("drug a") && t1.interventions[0].contains("drug b"));
    assert_eq!(t1.condition_category, ConditionCategory::Cardiovascular);
    assert!(t1.placebo_comparator);

    let t2 = reg.trial("NCT00000002").unwrap();
    assert_eq!(t2.sponsor_name, "Memorial Hospital, Inc.");
    assert!(t2.industry_rank_keys.is_empty());
    assert_eq!(t2.completion_date, None);
    // C14 outranks C17 on spending
    assert_eq!(t2.condition_category, ConditionCategory::Cardiovascular);

    let o: Vec<_> = reg.outcomes_of("NCT00000001").collect();
    assert_eq!(o[1].outcome_rank, OutcomeRank::Secondary);
    assert_eq!(o[1].reported_p, ReportedP::Less(0.001));
    assert!(o[1].mht_adjusted);
}

#[test]
fn serialize_and_reingest_is_bit_identical() {
    let reg = load_toy();
    let dir = tempfile::tempdir().unwrap();
    let write = |reg: &Registry, sub: &str| {
        let d = dir.path().join(sub);
        fs::create_dir_all(&d).unwrap();
        write_trials(&d.join("trials.csv"), reg.trials()).unwrap();
        write_outcomes(&d.join("outcomes.csv"), reg.outcomes()).unwrap();
        write_rankings(&d.join("rankings.csv"), &rankings_of(reg)).unwrap();
        d
    };
    let first = write(&reg, "a");
    let again = ingest(
        &first.join("trials.csv"),
        &first.join("outcomes.csv"),
        &first.join("rankings.csv"),
        &IngestOptions::default(),
    )
    .unwrap();
    assert_eq!(again, reg);
    let second = write(&again, "b");
    for f in ["trials.csv", "outcomes.csv", "rankings.csv"] {
        assert_eq!(fs::read(first.join(f)).unwrap(), fs::read(second.join(f)).unwrap(), "{f}");
    }
    // the fixture is already in canonical form
    for f in ["trials.csv", "outcomes.csv"] {
        assert_eq!(
            fs::read_to_string(first.join(f)).unwrap(),
            fs::read_to_string(fixture("toy").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn dangling_outcome_is_a_referential_error() {
    let dir = tempfile::tempdir().unwrap();
    let outcomes = dir.path().join("outcomes.csv");
    let mut text = fs::read_to_string(fixture("toy").join("outcomes.csv")).unwrap();
    text.push_str("NCT99999999,primary,exact,0.5,false\n");
    fs::write(&outcomes, text).unwrap();
    let err = ingest(
        &fixture("toy").join("trials.csv"),
        &outcomes,
        &fixture("toy").join("rankings.csv"),
        &IngestOptions::default(),
    )
    .unwrap_err();
    match err {
        Error::DanglingTrials(ids) => assert_eq!(ids, vec!["NCT99999999".to_string()]),
        other => panic!("unexpected error {other}"),
    }
}

#[test]
fn schema_errors_name_file_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let outcomes = dir.path().join("outcomes.csv");
    fs::write(
        &outcomes,
        "trial_id,outcome_rank,p_kind,p_value,mht_adjusted\nNCT00000001,primary,exact,1.7,false\n",
    )
    .unwrap();
    let err = ingest(
        &fixture("toy").join("trials.csv"),
        &outcomes,
        &fixture("toy").join("rankings.csv"),
        &IngestOptions::default(),
    )
    .unwrap_err();
    match &err {
        Error::Schema { file, line, column, .. } => {
            assert!(file.ends_with("outcomes.csv"));
            assert_eq!(*line, 2);
            assert_eq!(column, "p_value");
        }
        other => panic!("unexpected error {other}"),
    }

    let trials = dir.path().join("trials.csv");
    let text = fs::read_to_string(fixture("toy").join("trials.csv")).unwrap();
    fs::write(&trials, text.replace("Acme Pharma,", "Acme Pharma; Beta Bio,")).unwrap();
    let err = ingest(
        &trials,
        &fixture("toy").join("outcomes.csv"),
        &fixture("toy").join("rankings.csv"),
        &IngestOptions::default(),
    )
    .unwrap_err();
    assert!(matches!(&err, Error::Schema { column, line: 2, .. } if column == "sponsor_name"), "{err}");
}

fn filter_fixture() -> Registry {
    let mut trials = Vec::new();
    let mut outcomes = Vec::new();
    let mut colgate = trial("NCT10000001", Phase::II, &["fluoride"], &["C07"], "2012-01-01");
    colgate.sponsor_name = "Colgate  Palmolive".into();
    trials.push(colgate);
    for i in 0..150 {
        let p = if i < 137 { 0.05 } else { 0.3 };
        outcomes.push(outcome("NCT10000001", ReportedP::Exact(p)));
    }
    trials.push(trial("NCT02799472", Phase::III, &["x"], &["C04"], "2016-01-01"));
    for _ in 0..211 {
        outcomes.push(outcome("NCT02799472", ReportedP::Exact(0.5)));
    }
    let mut observational = trial("NCT10000003", Phase::II, &["y"], &["C04"], "2012-01-01");
    observational.study_type = StudyType::Other;
    trials.push(observational);
    trials.push(trial("NCT10000004", Phase::Other("I".into()), &["z"], &["C04"], "2012-01-01"));
    trials.push(trial("NCT10000005", Phase::II, &["w"], &["C04"], "2012-01-01"));
    outcomes.push(outcome("NCT10000005", ReportedP::Exact(0.01)));
    Registry::new(trials, outcomes).unwrap()
}

#[test]
fn filters_remove_each_rule_and_audit_it() {
    let (kept, audit) = apply_sample_filters(&filter_fixture());
    assert_eq!(kept.trials().len(), 1);
    assert_eq!(kept.trials()[0].trial_id, "NCT10000005");
    assert_eq!(kept.outcomes().len(), 1);
    for rule in FilterRule::ALL {
        assert_eq!(audit.removed(rule), 1, "{rule}");
    }
    let colgate = audit.counts.iter().find(|c| c.rule == FilterRule::ExcludedSponsor).unwrap();
    assert_eq!(colgate.outcomes_removed, 150);
    assert!(FilterRule::ExcludedSponsor.rationale().contains("137 of its 150"));
    let single = audit.counts.iter().find(|c| c.rule == FilterRule::ExcludedTrial).unwrap();
    assert_eq!(single.outcomes_removed, 211);
    assert_eq!((audit.trials_before, audit.trials_after), (5, 1));
    assert_eq!((audit.outcomes_before, audit.outcomes_after), (362, 1));
}

#[test]
fn clean_registry_passes_unchanged() {
    let reg = load_toy();
    let (kept, audit) = apply_sample_filters(&reg);
    assert_eq!(kept, reg);
    assert!(audit.counts.iter().all(|c| c.trials_removed == 0));
    let (empty, _) = apply_sample_filters(&Registry::default());
    assert!(empty.trials().is_empty());
}

fn arb_trial(i: usize) -> impl Strategy<Value = trialscope::registry::TrialRecord> {
    (0..4u8, 0..3u8, any::<bool>()).prop_map(move |(sponsor, phase, superiority)| {
        let phase = match phase {
            0 => Phase::II,
            1 => Phase::III,
            _ => Phase::Other("IV".into()),
        };
        let mut t = trial(&format!("NCT{:08}", i), phase, &["d"], &["C04"], "2012-01-01");
        t.sponsor_name = ["Acme", "colgate palmolive", "COLGATE-PALMOLIVE", "Beta"][sponsor as usize].into();
        if !superiority {
            t.study_type = StudyType::Other;
        }
        t
    })
}

proptest! {
    #[test]
    fn filtering_is_idempotent(
        trials in (1usize..30).prop_flat_map(|n| (0..n).map(arb_trial).collect::<Vec<_>>()),
        special in any::<bool>(),
    ) {
        let mut trials = trials;
        if special {
            trials[0].trial_id = "NCT02799472".into();
        }
        let outcomes = trials.iter().map(|t| outcome(&t.trial_id, ReportedP::Exact(0.2))).collect();
        let reg = Registry::new(trials, outcomes).unwrap();
        let (once, _) = apply_sample_filters(&reg);
        let (twice, audit) = apply_sample_filters(&once);
        prop_assert_eq!(&once, &twice);
        prop_assert!(audit.counts.iter().all(|c| c.trials_removed == 0));
    }
}
