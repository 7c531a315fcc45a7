#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use trialscope::selection::{logistic, SelectionDesignRow, SelectionModel};
use trialscope::registry::{
    ConditionCategory, OutcomeRank, OutcomeResult, Phase, ReportedP, SponsorClass, StudyType,
    TrialRecord,
};

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn date(s: &str) -> NaiveDate {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
}

pub fn set(items: &[&str]) -> BTreeSet<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// A filter-passing industry trial with one intervention set.
pub fn trial(id: &str, phase: Phase, drugs: &[&str], mesh: &[&str], start: &str) -> TrialRecord {
    TrialRecord {
        trial_id: id.to_string(),
        phase,
        sponsor_name: "Acme Pharma".into(),
        sponsor_class: SponsorClass::Industry,
        industry_rank_keys: BTreeMap::new(),
        interventions: vec![set(drugs)],
        mesh_conditions: set(mesh),
        condition_category: ConditionCategory::Other,
        start_date: Some(date(start)),
        completion_date: Some(date("2015-01-01")),
        enrollment: 100,
        placebo_comparator: false,
        study_type: StudyType::InterventionalSuperiority,
    }
}

pub fn outcome(id: &str, p: ReportedP) -> OutcomeResult {
    OutcomeResult {
        trial_id: id.to_string(),
        outcome_rank: OutcomeRank::Primary,
        reported_p: p,
        mht_adjusted: false,
    }
}

/// Sample mean and standard deviation.
pub fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

/// Design rows drawn from a known logit: coefficients for
/// (const, z_ph2, d1, d2, sqrt_enroll, placebo), a fixed effect per
/// condition category and completion year, one outcome per trial.
pub struct LogitTruth {
    pub beta: [f64; 6],
    pub category_effect: f64,
    pub year_effect: f64,
}

impl LogitTruth {
    pub fn table1() -> Self {
        LogitTruth { beta: [-1.6, 0.331, 1.063, 1.232, 0.03, -0.1], category_effect: 0.3, year_effect: 0.2 }
    }

    pub fn rows(&self, n: usize, seed: u64) -> Vec<trialscope::selection::SelectionDesignRow> {
        use rand::Rng;
        use rand_distr::StandardNormal;
        let mut rng = trialscope::rng::stream(seed, 0);
        let cats: Vec<ConditionCategory> = ConditionCategory::NAMED
            .into_iter()
            .chain([ConditionCategory::Other])
            .collect();
        (0..n)
            .map(|i| {
                let u: f64 = rng.random();
                let (d1, d2) = (u < 0.1, (0.1..0.2).contains(&u));
                let z = if d1 || d2 { 0.0 } else { (1.0 + rng.sample::<f64, _>(StandardNormal)).abs() };
                let enroll: f64 = 30.0 + 300.0 * rng.random::<f64>();
                let placebo = rng.random::<f64>() < 0.5;
                let c = rng.random_range(0..cats.len());
                let year = 2008 + rng.random_range(0..12);
                let b = &self.beta;
                let eta = b[0]
                    + b[1] * z
                    + b[2] * f64::from(u8::from(d1))
                    + b[3] * f64::from(u8::from(d2))
                    + b[4] * enroll.sqrt()
                    + b[5] * f64::from(u8::from(placebo))
                    + self.category_effect * ((c as f64 * 1.7).sin())
                    + self.year_effect * (((year - 2008) as f64 * 2.3).cos());
                let continuation = rng.random::<f64>() < trialscope::selection::logistic(eta);
                trialscope::selection::SelectionDesignRow {
                    trial_id: format!("T{i:06}"),
                    outcome_index: 0,
                    continuation,
                    z_ph2: z,
                    d1,
                    d2,
                    sqrt_enroll: enroll.sqrt(),
                    placebo,
                    mht_adjusted: false,
                    condition_category: cats[c],
                    completion_year: Some(year),
                }
            })
            .collect()
    }
}

pub fn read_selection_fixture() -> Vec<trialscope::selection::SelectionDesignRow> {
    let mut rdr = csv::Reader::from_path(fixture("selection_50.csv")).unwrap();
    rdr.records()
        .map(|r| {
            let r = r.unwrap();
            let b = |i: usize| &r[i] == "true";
            trialscope::selection::SelectionDesignRow {
                trial_id: r[0].to_string(),
                outcome_index: r[1].parse().unwrap(),
                continuation: b(2),
                z_ph2: r[3].parse().unwrap(),
                d1: b(4),
                d2: b(5),
                sqrt_enroll: r[6].parse::<f64>().unwrap().sqrt(),
                placebo: b(7),
                mht_adjusted: b(8),
                condition_category: r[9].parse().unwrap(),
                completion_year: Some(r[10].parse().unwrap()),
            }
        })
        .collect()
}

fn invert(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..k).map(|j| f64::from(u8::from(i == j))));
            r
        })
        .collect();
    for c in 0..k {
        let p = (c..k).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
        m.swap(c, p);
        let d = m[c][c];
        for v in m[c].iter_mut() {
            *v /= d;
        }
        for r in 0..k {
            if r != c {
                let f = m[r][c];
                let pivot = m[c].clone();
                for (v, pv) in m[r].iter_mut().zip(pivot) {
                    *v -= f * pv;
                }
            }
        }
    }
    m.into_iter().map(|r| r[k..].to_vec()).collect()
}

/// CR1 covariance with the cluster score sums accumulated explicitly.
pub fn brute_force_clustered(rows: &[SelectionDesignRow], model: &SelectionModel) -> Vec<Vec<f64>> {
    let (x, _) = model.schema.matrix(rows);
    let (n, k) = (x.nrows(), x.ncols());
    let beta: Vec<f64> = model.coefficients.iter().copied().collect();
    let mut info = vec![vec![0.0; k]; k];
    let mut sums: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for i in 0..n {
        let eta: f64 = (0..k).map(|j| x[(i, j)] * beta[j]).sum();
        let p = logistic(eta);
        let y = f64::from(u8::from(rows[i].continuation));
        let s = sums.entry(rows[i].condition_category.code().to_string()).or_insert(vec![0.0; k]);
        for a in 0..k {
            s[a] += x[(i, a)] * (y - p);
            for b in 0..k {
                info[a][b] += p * (1.0 - p) * x[(i, a)] * x[(i, b)];
            }
        }
    }
    let bread = invert(&info);
    let mut meat = vec![vec![0.0; k]; k];
    for s in sums.values() {
        for a in 0..k {
            for b in 0..k {
                meat[a][b] += s[a] * s[b];
            }
        }
    }
    let g = sums.len() as f64;
    let factor = g / (g - 1.0) * (n as f64 - 1.0) / (n - k) as f64;
    let mut out = vec![vec![0.0; k]; k];
    for a in 0..k {
        for b in 0..k {
            let mut v = 0.0;
            for c in 0..k {
                for d in 0..k {
                    v += bread[a][c] * meat[c][d] * bread[d][b];
                }
            }
            out[a][b] = factor * v;
        }
    }
    out
}
