use statrs::distribution::{ChiSquared, ContinuousCDF};
use trialscope::decompose::DecomposeConfig;
use trialscope::discontinuity::tests;
use trialscope::pz::{norm_sf, transform, Sidedness};
use trialscope::registry::{Phase, ReportedP};
use trialscope::simulate::{end_to_end_truth_check, generate, SimConfig, SimOutput, TruthCheckConfig, TruthRow};

fn phase2(sim: &SimOutput) -> Vec<&TruthRow> {
    sim.truth.iter().filter(|t| t.phase == Phase::II).collect()
}

fn quick_check() -> TruthCheckConfig {
    TruthCheckConfig {
        decompose: DecomposeConfig { bootstrap_reps: 0, ..DecomposeConfig::default() },
        ..TruthCheckConfig::default()
    }
}

#[test]
fn continuation_frequency_matches_the_logistic_probability() {
    for rule in ["closed-form", "shocks"] {
        let sim = generate(&SimConfig { n_trials: 50_000, continuation: rule.into(), ..SimConfig::default() }).unwrap();
        let rows = phase2(&sim);
        let expected: f64 = rows.iter().map(|t| t.probability.unwrap()).sum();
        let var: f64 = rows.iter().map(|t| t.probability.unwrap() * (1.0 - t.probability.unwrap())).sum();
        let observed = rows.iter().filter(|t| t.continued == Some(true)).count() as f64;
        assert!((observed - expected).abs() < 3.0 * var.sqrt(), "{rule}: {observed} vs {expected}");
    }
}

#[test]
fn shock_draws_and_closed_form_agree() {
    let run = |rule: &str| generate(&SimConfig { n_trials: 50_000, continuation: rule.into(), ..SimConfig::default() }).unwrap();
    let (a, b) = (run("closed-form"), run("shocks"));
    let (pa, pb) = (phase2(&a), phase2(&b));
    assert_eq!(pa.len(), pb.len());
    // the seed pairs trials across the two runs
    assert!(pa.iter().zip(&pb).all(|(x, y)| x.z_signed == y.z_signed && x.index == y.index));

    // continuation by decile of the index, 2 × 10 homogeneity table
    let mut idx: Vec<f64> = pa.iter().map(|t| t.index.unwrap()).collect();
    idx.sort_by(f64::total_cmp);
    let edges: Vec<f64> = (1..10).map(|k| idx[k * idx.len() / 10]).collect();
    let bin = |x: f64| edges.iter().filter(|&&e| x >= e).count();
    let mut table = [[[0.0f64; 2]; 10]; 2];
    for (run, rows) in [&pa, &pb].into_iter().enumerate() {
        for t in rows {
            table[run][bin(t.index.unwrap())][usize::from(t.continued == Some(true))] += 1.0;
        }
    }
    let total: f64 = table.iter().flatten().flatten().sum();
    let mut stat = 0.0;
    for k in 0..10 {
        for c in 0..2 {
            let col: f64 = (0..2).map(|r| table[r][k][c]).sum();
            for r in 0..2 {
                let row: f64 = table[r].iter().flatten().sum();
                let e = row * col / total;
                stat += (table[r][k][c] - e).powi(2) / e;
            }
        }
    }
    // bin totals coincide across the paired runs, so this is the sum of
    // ten 2 × 2 statistics
    let p = 1.0 - ChiSquared::new(10.0).unwrap().cdf(stat);
    assert!(p > 0.01, "chi-square {stat}, p {p}");
}

#[test]
fn null_effects_give_half_normal_phase2_scores() {
    let sim = generate(&SimConfig { n_trials: 20_000, effect_mean: 0.0, effect_sd: 0.0, ..SimConfig::default() }).unwrap();
    let mut z: Vec<f64> = phase2(&sim).iter().map(|t| t.z_signed.abs()).collect();
    assert_eq!(z.len(), 20_000);
    z.sort_by(f64::total_cmp);
    let n = z.len() as f64;
    let ks = z
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = 1.0 - 2.0 * norm_sf(v);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max);
    assert!(ks < 0.02, "KS distance {ks}");
}

#[test]
fn same_seed_same_registry() {
    let cfg = SimConfig { n_trials: 600, misreporting: "suppress:share=0.3".into(), ..SimConfig::default() };
    let (a, b) = (generate(&cfg).unwrap(), generate(&cfg).unwrap());
    assert_eq!(a.registry, b.registry);
    assert_eq!(a.links, b.links);
    let (da, db) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    a.write(da.path()).unwrap();
    b.write(db.path()).unwrap();
    let mut names: Vec<_> = std::fs::read_dir(da.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(!names.is_empty());
    for name in names {
        assert_eq!(std::fs::read(da.path().join(&name)).unwrap(), std::fs::read(db.path().join(&name)).unwrap());
    }
    let other = generate(&SimConfig { seed: 2, ..cfg }).unwrap();
    assert_ne!(other.registry, a.registry);
}

#[test]
fn prohibitive_cost_stops_all_continuation() {
    let sim = generate(&SimConfig { n_trials: 2000, cost: 1e6, ..SimConfig::default() }).unwrap();
    assert_eq!(sim.continuation_rate(), 0.0);
    assert!(sim.truth.iter().all(|t| t.phase == Phase::II));
}

#[test]
fn honest_phase3_density_is_continuous_at_the_cutoff() {
    let cutoff = Sidedness::TwoSided.significance_cutoff();
    let test = tests().build_spec("cjm").unwrap();
    let seeds = 200;
    let rejections = (0..seeds)
        .filter(|&seed| {
            let sim = generate(&SimConfig { seed, ..SimConfig::default() }).unwrap();
            let z: Vec<f64> = sim
                .truth
                .iter()
                .filter(|t| t.phase == Phase::III)
                .filter_map(|t| match t.p_reported {
                    Some(p @ ReportedP::Exact(_)) => transform(p, Sidedness::TwoSided).precise(),
                    _ => None,
                })
                .collect();
            test.test(&z, cutoff).unwrap().p_value < 0.05
        })
        .count();
    // 99% binomial interval around the nominal 5% at 200 seeds
    let rate = rejections as f64 / seeds as f64;
    assert!((0.01..=0.09).contains(&rate), "rejection rate {rate}");
}

#[test]
fn spike_at_the_cutoff_is_detected() {
    let reps = 60;
    let detected = (0..reps)
        .filter(|&seed| {
            let cfg = SimConfig {
                seed,
                n_trials: 3000,
                misreporting: "inflate:share=0.1,window=0".into(),
                ..SimConfig::default()
            };
            end_to_end_truth_check(&cfg, &quick_check()).unwrap().spike_detected()
        })
        .count();
    assert!(detected as f64 / reps as f64 >= 0.8, "{detected}/{reps}");
}

#[test]
fn suppression_residual_matches_the_enumerated_effect() {
    for seed in 1..=10 {
        let cfg = SimConfig { seed, misreporting: "suppress:share=0.3".into(), ..SimConfig::default() };
        let r = end_to_end_truth_check(&cfg, &quick_check()).unwrap();
        assert!(r.injected_effect > 0.0);
        assert!((r.residual - r.injected_effect).abs() <= 0.05, "seed {seed}: {} vs {}", r.residual, r.injected_effect);
    }
}
