use rand::Rng;
use rand_distr::StandardNormal;
use trialscope::discontinuity::{binned_test, cjm_test, sponsor_sweep, tests, Cjm};
use trialscope::registry::{RankCriterion, Registry, SponsorSplit};
use trialscope::rng::stream;
use trialscope::sample::{score_outcomes, Phase2or3};
use trialscope::simulate::{generate, SimConfig};
use trialscope::pz::Sidedness;

fn half_normal(n: usize, seed: u64) -> Vec<f64> {
    let mut r = stream(seed, 0);
    (0..n).map(|_| r.sample::<f64, _>(StandardNormal).abs()).collect()
}

/// Moves each point of (1.6, 1.96) to a uniform spot in (1.96, 2.4) with
/// probability 0.15.
fn shifted(n: usize, seed: u64) -> Vec<f64> {
    let mut x = half_normal(n, seed);
    let mut r = stream(seed, 1);
    for v in x.iter_mut() {
        if *v > 1.6 && *v < 1.96 && r.random::<f64>() < 0.15 {
            *v = r.random_range(1.96..2.4);
        }
    }
    x
}

fn uniform(n: usize, lo: f64, hi: f64, seed: u64) -> Vec<f64> {
    let mut r = stream(seed, 2);
    (0..n).map(|_| r.random_range(lo..hi)).collect()
}

#[test]
fn cjm_is_location_scale_equivariant() {
    let x = half_normal(3000, 21);
    let base = cjm_test(&x, 1.96, 2).unwrap();
    for (a, b) in [(2.0, 0.0), (0.5, 3.0), (3.0, -1.0)] {
        let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let r = cjm_test(&y, a * 1.96 + b, 2).unwrap();
        assert!((r.t_stat - base.t_stat).abs() < 1e-8, "a={a} b={b}: {} vs {}", r.t_stat, base.t_stat);
        assert!((r.p_value - base.p_value).abs() < 1e-8);
        assert!((r.jump * a - base.jump).abs() < 1e-8);
    }
}

#[test]
fn binned_is_location_scale_equivariant() {
    let x = half_normal(3000, 22);
    let base = binned_test(&x, 1.96, 0.05).unwrap();
    let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
    let r = binned_test(&y, 2.0 * 1.96 + 1.0, 0.1).unwrap();
    assert!((r.t_stat - base.t_stat).abs() < 1e-8);
    assert!((r.p_value - base.p_value).abs() < 1e-8);
}

#[test]
fn mirroring_negates_the_jump() {
    let x = shifted(3000, 23);
    let mirrored: Vec<f64> = x.iter().map(|v| 2.0 * 1.96 - v).collect();
    for test in [tests().build_spec("cjm").unwrap(), tests().build_spec("binned").unwrap()] {
        let a = test.test(&x, 1.96).unwrap();
        let b = test.test(&mirrored, 1.96).unwrap();
        assert!((a.jump + b.jump).abs() < 1e-8, "{}", test.name());
        assert!((a.t_stat.abs() - b.t_stat.abs()).abs() < 1e-8, "{}", test.name());
    }
}

#[test]
fn cjm_finds_no_jump_on_an_exact_grid() {
    let n = 10_000;
    let x: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64 * 4.0).collect();
    let r = cjm_test(&x, 2.0, 2).unwrap();
    assert!(r.jump.abs() < 0.02, "{}", r.jump);
}

#[test]
fn binned_uniform_size() {
    let seeds = 400;
    let calm = (0..seeds)
        .filter(|&s| binned_test(&uniform(5000, 0.0, 4.0, s), 2.0, 0.05).unwrap().t_stat.abs() < 2.0)
        .count();
    let rate = calm as f64 / seeds as f64;
    assert!(rate >= 0.95, "|t| < 2 in {rate}");
}

#[test]
fn binned_recovers_a_piecewise_constant_jump() {
    // density 0.4 on [0, 1), 0.6 on [1, 2)
    let mut r = stream(31, 0);
    let x: Vec<f64> = (0..10_000)
        .map(|_| if r.random::<f64>() < 0.4 { r.random_range(0.0..1.0) } else { r.random_range(1.0..2.0) })
        .collect();
    let b = binned_test(&x, 1.0, 0.025).unwrap();
    assert!((b.jump - 0.2).abs() < 0.05, "{}", b.jump);
    assert!((b.f_left - 0.4).abs() < 0.05 && (b.f_right - 0.6).abs() < 0.05);
}

#[test]
fn contract_errors() {
    assert!(binned_test(&half_normal(100, 1), 1.96, 0.05).is_err());
    assert!(binned_test(&half_normal(3000, 1), 1.96, 0.0).is_err());
    assert!(binned_test(&half_normal(3000, 1), 1.96, -0.1).is_err());
    let err = cjm_test(&half_normal(300, 1), 1.96, 2).unwrap_err().to_string();
    assert!(err.contains("right"), "{err}");
    let left_thin: Vec<f64> = half_normal(3000, 2).into_iter().map(|v| v + 1.95).collect();
    let err = cjm_test(&left_thin, 1.96, 2).unwrap_err().to_string();
    assert!(err.contains("left"), "{err}");
    assert!(Cjm { order: 1, h_left: None, h_right: None }.validate().is_err());
    assert!(tests().build_spec("binned:bin_width=-1").is_err());
}

#[test]
fn tests_agree_on_the_sign_of_an_injected_shift() {
    let seeds = 100;
    let agree = (0..seeds)
        .filter(|&s| {
            let x = shifted(20_000, 500 + s);
            let c = cjm_test(&x, 1.96, 2).unwrap();
            let b = binned_test(&x, 1.96, 0.05).unwrap();
            (c.jump > 0.0) == (b.jump > 0.0)
        })
        .count();
    assert!(agree as f64 / seeds as f64 >= 0.9, "agreement {agree}/{seeds}");
}

fn with_copied_ranks(reg: &Registry) -> Registry {
    let trials = reg
        .trials()
        .iter()
        .cloned()
        .map(|mut t| {
            if let Some(&r) = t.industry_rank_keys.get(&RankCriterion::Revenue2018) {
                t.industry_rank_keys.insert(RankCriterion::RxSales2018, r);
            }
            t
        })
        .collect();
    Registry::new(trials, reg.outcomes().to_vec()).unwrap()
}

#[test]
fn identical_classifications_give_identical_cells() {
    let sim = generate(&SimConfig { n_trials: 3000, ..SimConfig::default() }).unwrap();
    let reg = with_copied_ranks(&sim.registry);
    let scored = score_outcomes(&reg, Sidedness::TwoSided);
    let splits = [
        SponsorSplit::new(RankCriterion::Revenue2018, 10).unwrap(),
        SponsorSplit::new(RankCriterion::RxSales2018, 10).unwrap(),
    ];
    let test = tests().build_spec("cjm").unwrap();
    let cells = sponsor_sweep(&reg, &scored, &splits, Phase2or3::II, 1.96, test.as_ref());
    assert_eq!(cells.len(), 4);
    for class_cells in [[&cells[0], &cells[2]], [&cells[1], &cells[3]]] {
        assert_eq!(class_cells[0].class, class_cells[1].class);
        assert_eq!(class_cells[0].n, class_cells[1].n);
        assert_eq!(class_cells[0].result, class_cells[1].result);
        assert!(class_cells[0].result.is_ok());
    }
}

#[test]
fn null_sweep_cells_have_roughly_uniform_p_values() {
    // the main-split small cell of phase II across independent registries
    let test = tests().build_spec("cjm").unwrap();
    let mut p: Vec<f64> = (1..=40u64)
        .map(|seed| {
            let sim = generate(&SimConfig { seed, ..SimConfig::default() }).unwrap();
            let scored = score_outcomes(&sim.registry, Sidedness::TwoSided);
            let cells = sponsor_sweep(&sim.registry, &scored, &[SponsorSplit::main()], Phase2or3::II, 1.96, test.as_ref());
            cells[1].result.as_ref().unwrap().p_value
        })
        .collect();
    p.sort_by(f64::total_cmp);
    let n = p.len() as f64;
    let ks = p
        .iter()
        .enumerate()
        .map(|(i, v)| ((i + 1) as f64 / n - v).max(v - i as f64 / n))
        .fold(0.0, f64::max);
    // 1% critical value of the one-sample KS statistic at n = 40
    assert!(ks < 0.252, "KS distance {ks}");
}
