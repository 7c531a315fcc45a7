mod common;

use std::collections::BTreeMap;

use common::{brute_force_clustered, read_selection_fixture, LogitTruth};
use trialscope::linker::LinkReport;
use trialscope::pz::Sidedness;
use trialscope::registry::{OutcomeRank, Phase, ReportedP};
use trialscope::sample::{score_outcomes, AnalysisGroup, Phase2or3, SponsorGroup};
use trialscope::selection::{
    build_design, fit_logit, logistic, predict, wald_equality, SelectionDesignRow, WALD_COEFS,
};
use trialscope::simulate::{generate, SimConfig};
use trialscope::Error;

#[test]
fn clustered_covariance_matches_brute_force_on_the_fixture() {
    let rows = read_selection_fixture();
    assert_eq!(rows.len(), 50);
    let model = fit_logit(&rows).unwrap();
    assert!(model.converged);
    assert_eq!(model.n_clusters, 6);
    let brute = brute_force_clustered(&rows, &model);
    let k = model.coefficients.len();
    for a in 0..k {
        for b in 0..k {
            let v = model.vcov_clustered[(a, b)];
            assert!((v - brute[a][b]).abs() < 1e-10 * brute[a][b].abs().max(1.0), "({a},{b}): {v} vs {}", brute[a][b]);
        }
    }
}

#[test]
fn optimum_has_a_vanishing_score_and_psd_covariance() {
    let rows = LogitTruth::table1().rows(3000, 1);
    let model = fit_logit(&rows).unwrap();
    assert!(model.converged);
    assert!(model.score.amax() < 1e-6, "{}", model.score.amax());
    let k = model.coefficients.len();
    assert_eq!(model.vcov_clustered.shape(), (k, k));
    for a in 0..k {
        for b in 0..k {
            assert!((model.vcov_clustered[(a, b)] - model.vcov_clustered[(b, a)]).abs() < 1e-12);
        }
    }
    let eig = model.vcov_clustered.clone().symmetric_eigen().eigenvalues;
    assert!(eig.iter().all(|&e| e > -1e-8), "{eig}");
    assert_eq!(model.n_obs, 3000);
    assert_eq!(model.n_trials, 3000);
    assert_eq!(model.n_clusters, 16);
}

#[test]
fn predictions_are_half_at_zero_coefficients_and_rise_with_z() {
    let rows = read_selection_fixture();
    let mut model = fit_logit(&rows).unwrap();
    let (p, _) = predict(&model, &rows);
    assert!(p.iter().all(|&v| v > 0.0 && v < 1.0));
    assert!(model.coefficient("z_ph2").unwrap().0 > 0.0);

    let mut probe: Vec<SelectionDesignRow> = (0..20)
        .map(|i| SelectionDesignRow { z_ph2: i as f64 * 0.25, d1: false, d2: false, ..rows[0].clone() })
        .collect();
    let (p, _) = predict(&model, &probe);
    assert!(p.windows(2).all(|w| w[1] > w[0]));

    model.coefficients.fill(0.0);
    probe.extend(rows.iter().cloned());
    let (p, _) = predict(&model, &probe);
    assert!(p.iter().all(|&v| v == 0.5));
}

#[test]
fn unseen_levels_fall_back_to_the_reference_with_a_warning() {
    let rows = read_selection_fixture();
    let model = fit_logit(&rows).unwrap();
    let mut novel = rows[0].clone();
    novel.completion_year = Some(1999);
    let (p, warnings) = predict(&model, &[novel.clone()]);
    assert_eq!(warnings.len(), 1);
    assert!(warnings[0].contains("1999"));
    let mut as_reference = novel;
    as_reference.completion_year = model.schema.year_reference;
    assert_eq!(p, predict(&model, &[as_reference]).0);
}

#[test]
fn relabelling_years_leaves_predictions_unchanged() {
    let rows = LogitTruth::table1().rows(2000, 2);
    let shifted: Vec<SelectionDesignRow> = rows
        .iter()
        .cloned()
        .map(|mut r| {
            r.completion_year = r.completion_year.map(|y| y + 100);
            r
        })
        .collect();
    let (a, _) = predict(&fit_logit(&rows).unwrap(), &rows);
    let (b, _) = predict(&fit_logit(&shifted).unwrap(), &shifted);
    for (u, v) in a.iter().zip(&b) {
        assert!((u - v).abs() < 1e-9);
    }
}

#[test]
fn separating_columns_are_errors() {
    let rows = read_selection_fixture();
    // every d2 row continues
    let d2_sep: Vec<SelectionDesignRow> =
        rows.iter().cloned().map(|mut r| { if r.d2 { r.continuation = true; } r }).collect();
    assert!(matches!(fit_logit(&d2_sep), Err(Error::Separation(c)) if c == "d2"));

    // half the condition categories always continue, the other half never
    let by_cluster: Vec<SelectionDesignRow> = rows
        .iter()
        .cloned()
        .map(|mut r| {
            r.continuation = ["C14", "C04", "C10"].contains(&r.condition_category.code());
            r
        })
        .collect();
    assert!(matches!(fit_logit(&by_cluster), Err(Error::Separation(_))));

    let constant: Vec<SelectionDesignRow> =
        rows.iter().cloned().map(|mut r| { r.continuation = false; r }).collect();
    assert!(matches!(fit_logit(&constant), Err(Error::InsufficientData(_))));
}

#[test]
fn a_perfectly_predicted_year_is_set_aside() {
    let mut rows = LogitTruth::table1().rows(2000, 3);
    for (i, r) in rows.iter_mut().take(6).enumerate() {
        r.completion_year = Some(2030);
        r.continuation = i % 7 == 0 || i < 10;
    }
    let model = fit_logit(&rows).unwrap();
    assert_eq!(model.n_obs, 1994);
    assert!(model.schema.index_of("year:2030").is_none());
    assert!(model.warnings.iter().any(|w| w.contains("year:2030")));
    let (p, _) = predict(&model, &rows[..8]);
    assert_eq!(&p[..6], &[1.0; 6]);
    assert!(p[6] < 1.0 && p[7] < 1.0);
}

#[test]
fn wald_test_of_a_model_against_itself() {
    let rows = LogitTruth::table1().rows(2000, 4);
    let m = fit_logit(&rows).unwrap();
    let w = wald_equality(&m, &m, &WALD_COEFS).unwrap();
    assert_eq!(w.df, 4);
    assert_eq!(w.statistic, 0.0);
    assert!((w.p_value - 1.0).abs() < 1e-12);
}

fn ks_uniform(mut p: Vec<f64>) -> f64 {
    p.sort_by(f64::total_cmp);
    let n = p.len() as f64;
    p.iter()
        .enumerate()
        .map(|(i, v)| ((i + 1) as f64 / n - v).max(v - i as f64 / n))
        .fold(0.0, f64::max)
}

#[test]
fn wald_p_values_on_disjoint_halves_are_roughly_uniform() {
    let truth = LogitTruth::table1();
    let p: Vec<f64> = (0..200u64)
        .map(|seed| {
            let rows = truth.rows(4000, 1000 + seed);
            let a = fit_logit(&rows[..2000]).unwrap();
            let b = fit_logit(&rows[2000..]).unwrap();
            wald_equality(&a, &b, &WALD_COEFS[..3]).unwrap().p_value
        })
        .collect();
    // 1% critical value of the one-sample KS statistic at n = 200
    let ks = ks_uniform(p);
    assert!(ks < 1.63 / 200f64.sqrt(), "KS distance {ks}");
}

#[test]
fn cluster_scores_carry_no_information_on_the_constant() {
    // Clusters coincide with the category fixed effects, so every cluster's
    // residuals sum to zero and the sandwich sees no variation in the
    // constant beyond what leaks in from the slopes.
    let rows = LogitTruth::table1().rows(2000, 5);
    let model = fit_logit(&rows).unwrap();
    let (x, _) = model.schema.matrix(&rows);
    let c = model.schema.index_of("const").unwrap();
    let eta = &x * &model.coefficients;
    let mut sums: BTreeMap<&str, f64> = BTreeMap::new();
    for (i, r) in rows.iter().enumerate() {
        let y = f64::from(u8::from(r.continuation));
        *sums.entry(r.condition_category.code()).or_default() += x[(i, c)] * (y - logistic(eta[i]));
    }
    assert_eq!(sums.len(), 16);
    assert!(sums.values().all(|s| s.abs() < 1e-6), "{sums:?}");
}

#[test]
fn censored_phase2_results_enter_as_dummies() {
    let sim = generate(&SimConfig { n_trials: 800, ..SimConfig::default() }).unwrap();
    let scored = score_outcomes(&sim.registry, Sidedness::TwoSided);
    let group = AnalysisGroup::new(Phase2or3::II, SponsorGroup::Industry);
    let rows = build_design(&sim.registry, &group.select(&sim.registry, &scored).unwrap(), &sim.links).unwrap();
    let ids: BTreeMap<&str, &SelectionDesignRow> = rows.iter().map(|r| (r.trial_id.as_str(), r)).collect();
    let mut seen = 0;
    for o in sim.registry.outcomes().iter().filter(|o| o.outcome_rank == OutcomeRank::Primary) {
        if o.reported_p == ReportedP::Less(0.0001) {
            if let Some(r) = ids.get(o.trial_id.as_str()) {
                assert_eq!((r.z_ph2, r.d1, r.d2), (0.0, false, true));
                seen += 1;
            }
        }
    }
    assert!(seen > 0);
    assert!(rows.iter().all(|r| !(r.d1 && r.d2) && (r.z_ph2 == 0.0 || !(r.d1 || r.d2))));
    assert!(rows.iter().all(|r| sim.registry.trial(&r.trial_id).unwrap().phase == Phase::II));
    assert!(build_design(&sim.registry, &[], &sim.links).is_err());
    assert!(build_design(&sim.registry, &scored, &LinkReport::default()).is_err());
}

#[test]
fn secondary_outcomes_show_no_selection_on_z() {
    let reps = 40;
    let mut calm = 0;
    for seed in 1..=reps {
        let sim = generate(&SimConfig { seed, ..SimConfig::default() }).unwrap();
        let scored = score_outcomes(&sim.registry, Sidedness::TwoSided);
        let mut group = AnalysisGroup::new(Phase2or3::II, SponsorGroup::Industry);
        group.rank = OutcomeRank::Secondary;
        let rows = build_design(&sim.registry, &group.select(&sim.registry, &scored).unwrap(), &sim.links).unwrap();
        // null secondary results are rarely censored; a lone censored row
        // separates its dummy and carries nothing about the z slope
        let model = match fit_logit(&rows) {
            Err(Error::Separation(c)) if c == "d1" || c == "d2" => {
                let precise: Vec<SelectionDesignRow> = rows.into_iter().filter(|r| !r.d1 && !r.d2).collect();
                fit_logit(&precise).unwrap()
            }
            other => other.unwrap(),
        };
        let (b, se) = model.coefficient("z_ph2").unwrap();
        if (b / se).abs() < 1.959964 {
            calm += 1;
        }
    }
    assert!(calm as f64 / reps as f64 >= 0.9, "{calm}/{reps}");
}
