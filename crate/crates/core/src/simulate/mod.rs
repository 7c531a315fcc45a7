//! Structural simulator of phase II → phase III portfolios with a known
//! continuation rule and optional misreporting of phase III results.
//!
//! Each phase II trial draws a true standardized effect θ ~ N(μ, τ²) and a
//! log-normal enrollment m; its z-statistic is θ·√m/2 + ε. The sponsor
//! continues when −c − η + δ·E[V(z₃)|I₂] exceeds V̲(I₂) + η̲, with
//! V(z₃) = slope·z₃·1(z₃ ≥ 1.96) and V̲ linear in z₂. Phase III results
//! come either from the structural model (fresh z₃ for the same θ at the
//! phase III enrollment) or as a selected replica: a fresh phase II-style
//! draw for the same θ accepted with the continuation probability it
//! would have produced. Under the replica mode the phase III distribution
//! equals the selection-reweighted phase II distribution, so continuation
//! explains the whole phase II → III gap.

mod model;
mod rules;
mod truth;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::str::FromStr;

use chrono::{Duration, NaiveDate};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linker::{LinkReport, LinkResult};
use crate::pz::{two_sided_p, Sidedness};
use crate::registry::{
    rankings_of, write_csv, write_outcomes, write_rankings, write_synonyms, write_trials,
    ConditionCategory, OutcomeRank, OutcomeResult, Phase, RankCriterion, Registry, ReportedP,
    SponsorClass, StudyType, TrialRecord,
};
use crate::rng;

pub use model::{
    gauss_hermite, noncentrality, truncated_first_moment, ContinuationModel, EffectPrior, Payoff,
    GH_NODES,
};
pub use rules::{
    continuation_rules, misreporting, ClosedForm, ContinuationRule, Honest, InflateSpike,
    MisreportAction, Misreporting, Shocks, SuppressShare,
};
pub use truth::{end_to_end_truth_check, truth_check, TruthCheckConfig, TruthReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase3Mode {
    Replica,
    Structural,
}

impl Phase3Mode {
    pub fn label(self) -> &'static str {
        match self {
            Phase3Mode::Replica => "replica",
            Phase3Mode::Structural => "structural",
        }
    }
}

impl FromStr for Phase3Mode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "replica" => Ok(Phase3Mode::Replica),
            "structural" => Ok(Phase3Mode::Structural),
            other => Err(format!("unknown phase III mode `{other}` (expected replica|structural)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Number of phase II trials.
    pub n_trials: usize,
    pub effect_mean: f64,
    pub effect_sd: f64,
    /// Log-normal phase II enrollment: mean and sd of log m.
    pub enroll_log_mean: f64,
    pub enroll_log_sd: f64,
    /// Planned phase III enrollment as a multiple of phase II enrollment.
    pub phase3_enroll_ratio: f64,
    pub cost: f64,
    pub discount: f64,
    pub outside_intercept: f64,
    pub outside_slope: f64,
    pub payoff_slope: f64,
    pub shock_scale: f64,
    /// Index shift for placebo-controlled trials.
    pub placebo_effect: f64,
    pub category_effect_sd: f64,
    pub year_effect_sd: f64,
    /// Probability that p < 0.001 is reported only as a bound.
    pub censor_share: f64,
    /// Null secondary outcomes per trial.
    pub n_secondary: usize,
    pub industry_share: f64,
    pub n_sponsors: usize,
    /// Continuation rule spec (`closed-form` or `shocks`).
    pub continuation: String,
    pub phase3: Phase3Mode,
    /// Misreporting spec: `none`, `suppress:share=q`, `inflate:share=q,window=w`.
    pub misreporting: String,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_trials: 2000,
            effect_mean: 0.2,
            effect_sd: 0.25,
            enroll_log_mean: 100f64.ln(),
            enroll_log_sd: 0.6,
            phase3_enroll_ratio: 4.0,
            cost: 3.5,
            discount: 0.9,
            outside_intercept: 0.0,
            outside_slope: 0.0,
            payoff_slope: 1.0,
            shock_scale: 2.5,
            placebo_effect: 0.2,
            category_effect_sd: 0.3,
            year_effect_sd: 0.2,
            censor_share: 0.5,
            n_secondary: 1,
            industry_share: 0.8,
            n_sponsors: 30,
            continuation: "closed-form".into(),
            phase3: Phase3Mode::Replica,
            misreporting: "none".into(),
            seed: 1,
        }
    }
}

impl SimConfig {
    pub const KEYS: [&'static str; 24] = [
        "n_trials",
        "effect_mean",
        "effect_sd",
        "enroll_log_mean",
        "enroll_log_sd",
        "phase3_enroll_ratio",
        "cost",
        "discount",
        "outside_intercept",
        "outside_slope",
        "payoff_slope",
        "shock_scale",
        "placebo_effect",
        "category_effect_sd",
        "year_effect_sd",
        "censor_share",
        "n_secondary",
        "industry_share",
        "n_sponsors",
        "continuation",
        "phase3",
        "misreporting",
        "seed",
        "enroll_median",
    ];

    /// Sets one field from its key=value form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.trim()
                .parse()
                .map_err(|_| Error::config(format!("simulator key `{key}`: cannot parse `{v}`")))
        }
        match key {
            "n_trials" => self.n_trials = num(key, value)?,
            "effect_mean" => self.effect_mean = num(key, value)?,
            "effect_sd" => self.effect_sd = num(key, value)?,
            "enroll_log_mean" => self.enroll_log_mean = num(key, value)?,
            "enroll_median" => self.enroll_log_mean = num::<f64>(key, value)?.ln(),
            "enroll_log_sd" => self.enroll_log_sd = num(key, value)?,
            "phase3_enroll_ratio" => self.phase3_enroll_ratio = num(key, value)?,
            "cost" => self.cost = num(key, value)?,
            "discount" => self.discount = num(key, value)?,
            "outside_intercept" => self.outside_intercept = num(key, value)?,
            "outside_slope" => self.outside_slope = num(key, value)?,
            "payoff_slope" => self.payoff_slope = num(key, value)?,
            "shock_scale" => self.shock_scale = num(key, value)?,
            "placebo_effect" => self.placebo_effect = num(key, value)?,
            "category_effect_sd" => self.category_effect_sd = num(key, value)?,
            "year_effect_sd" => self.year_effect_sd = num(key, value)?,
            "censor_share" => self.censor_share = num(key, value)?,
            "n_secondary" => self.n_secondary = num(key, value)?,
            "industry_share" => self.industry_share = num(key, value)?,
            "n_sponsors" => self.n_sponsors = num(key, value)?,
            "continuation" => self.continuation = value.trim().to_string(),
            "phase3" => self.phase3 = value.parse().map_err(Error::config)?,
            "misreporting" => self.misreporting = value.trim().to_string(),
            "seed" => self.seed = num(key, value)?,
            other => {
                return Err(Error::config(format!(
                    "unknown simulator key `{other}` (expected one of: {})",
                    Self::KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Canonical key=value listing (for manifests).
    pub fn pairs(&self) -> Vec<(String, String)> {
        let f = |k: &str, v: String| (k.to_string(), v);
        vec![
            f("n_trials", self.n_trials.to_string()),
            f("effect_mean", self.effect_mean.to_string()),
            f("effect_sd", self.effect_sd.to_string()),
            f("enroll_log_mean", self.enroll_log_mean.to_string()),
            f("enroll_log_sd", self.enroll_log_sd.to_string()),
            f("phase3_enroll_ratio", self.phase3_enroll_ratio.to_string()),
            f("cost", self.cost.to_string()),
            f("discount", self.discount.to_string()),
            f("outside_intercept", self.outside_intercept.to_string()),
            f("outside_slope", self.outside_slope.to_string()),
            f("payoff_slope", self.payoff_slope.to_string()),
            f("shock_scale", self.shock_scale.to_string()),
            f("placebo_effect", self.placebo_effect.to_string()),
            f("category_effect_sd", self.category_effect_sd.to_string()),
            f("year_effect_sd", self.year_effect_sd.to_string()),
            f("censor_share", self.censor_share.to_string()),
            f("n_secondary", self.n_secondary.to_string()),
            f("industry_share", self.industry_share.to_string()),
            f("n_sponsors", self.n_sponsors.to_string()),
            f("continuation", self.continuation.clone()),
            f("phase3", self.phase3.label().to_string()),
            f("misreporting", self.misreporting.clone()),
            f("seed", self.seed.to_string()),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::config(msg));
        if self.n_trials == 0 {
            return bad("n_trials must be positive".into());
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return bad(format!("discount must be in (0, 1], got {}", self.discount));
        }
        for (name, v) in [
            ("censor_share", self.censor_share),
            ("industry_share", self.industry_share),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must be in [0, 1], got {v}"));
            }
        }
        for (name, v) in [
            ("effect_sd", self.effect_sd),
            ("enroll_log_sd", self.enroll_log_sd),
            ("category_effect_sd", self.category_effect_sd),
            ("year_effect_sd", self.year_effect_sd),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be a finite value ≥ 0, got {v}"));
            }
        }
        if !(self.shock_scale > 0.0 && self.shock_scale.is_finite()) {
            return bad(format!("shock_scale must be positive, got {}", self.shock_scale));
        }
        if !(self.phase3_enroll_ratio > 0.0) {
            return bad(format!("phase3_enroll_ratio must be positive, got {}", self.phase3_enroll_ratio));
        }
        for (name, v) in [
            ("effect_mean", self.effect_mean),
            ("enroll_log_mean", self.enroll_log_mean),
            ("cost", self.cost),
            ("outside_intercept", self.outside_intercept),
            ("outside_slope", self.outside_slope),
            ("payoff_slope", self.payoff_slope),
            ("placebo_effect", self.placebo_effect),
        ] {
            if !v.is_finite() {
                return bad(format!("{name} must be finite, got {v}"));
            }
        }
        if self.n_sponsors == 0 {
            return bad("n_sponsors must be positive".into());
        }
        continuation_rules().build_spec(&self.continuation)?;
        misreporting().build_spec(&self.misreporting)?;
        Ok(())
    }

    pub fn model(&self) -> ContinuationModel {
        ContinuationModel {
            prior: EffectPrior {
                mean: self.effect_mean,
                sd: self.effect_sd,
            },
            payoff: Payoff {
                slope: self.payoff_slope,
                threshold: Sidedness::TwoSided.significance_cutoff(),
            },
            cost: self.cost,
            discount: self.discount,
            outside_intercept: self.outside_intercept,
            outside_slope: self.outside_slope,
            shock_scale: self.shock_scale,
        }
    }
}

/// One simulated trial's primary result and latent state.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthRow {
    pub trial_id: String,
    pub phase: Phase,
    pub industry: bool,
    pub theta: f64,
    pub enrollment: u32,
    pub z_signed: f64,
    /// Continuation index I₂ and probability (phase II only).
    pub index: Option<f64>,
    pub probability: Option<f64>,
    pub continued: Option<bool>,
    /// Primary p-value as generated, before misreporting.
    pub p_true: ReportedP,
    /// Primary p-value as it appears in outcomes.csv (`None`: withheld).
    pub p_reported: Option<ReportedP>,
    pub action: MisreportAction,
}

pub const TRUTH_COLUMNS: [&str; 14] = [
    "trial_id",
    "phase",
    "industry",
    "theta",
    "enrollment",
    "z_signed",
    "index",
    "probability",
    "continued",
    "p_true_kind",
    "p_true",
    "p_reported_kind",
    "p_reported",
    "misreport",
];

/// Simulated registry with its ground truth.
#[derive(Debug, Clone)]
pub struct SimOutput {
    pub config: SimConfig,
    pub registry: Registry,
    pub links: LinkReport,
    pub truth: Vec<TruthRow>,
}

impl SimOutput {
    /// Writes trials.csv, outcomes.csv, rankings.csv, synonyms.csv,
    /// links.csv, links_summary.csv and truth.csv into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_trials(&dir.join("trials.csv"), self.registry.trials())?;
        write_outcomes(&dir.join("outcomes.csv"), self.registry.outcomes())?;
        write_rankings(&dir.join("rankings.csv"), &rankings_of(&self.registry))?;
        write_synonyms(&dir.join("synonyms.csv"), &[])?;
        self.links.write_links(&dir.join("links.csv"))?;
        self.links.write_summary(&dir.join("links_summary.csv"))?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let p_parts = |p: Option<ReportedP>| match p {
            Some(p) => (p.kind_label().to_string(), p.value().to_string()),
            None => (String::new(), String::new()),
        };
        write_csv(
            &dir.join("truth.csv"),
            &TRUTH_COLUMNS,
            self.truth.iter().map(|t| {
                let (tk, tv) = p_parts(Some(t.p_true));
                let (rk, rv) = p_parts(t.p_reported);
                vec![
                    t.trial_id.clone(),
                    t.phase.label().to_string(),
                    t.industry.to_string(),
                    t.theta.to_string(),
                    t.enrollment.to_string(),
                    t.z_signed.to_string(),
                    opt(t.index),
                    opt(t.probability),
                    t.continued.map(|c| c.to_string()).unwrap_or_default(),
                    tk,
                    tv,
                    rk,
                    rv,
                    t.action.label().to_string(),
                ]
            }),
        )
    }

    /// Share of significant phase III primary results by direct count,
    /// before (`after_misreporting = false`) or after misreporting.
    pub fn phase3_significant_share(&self, industry_only: bool, after_misreporting: bool) -> f64 {
        let cutoff = Sidedness::TwoSided.significance_cutoff();
        let (mut sig, mut n) = (0usize, 0usize);
        for t in self
            .truth
            .iter()
            .filter(|t| t.phase == Phase::III && (!industry_only || t.industry))
        {
            let p = if after_misreporting { t.p_reported } else { Some(t.p_true) };
            if let Some(p) = p {
                n += 1;
                let z = crate::pz::transform(p, Sidedness::TwoSided);
                if matches!(z.is_significant(cutoff), Ok(true)) {
                    sig += 1;
                }
            }
        }
        sig as f64 / n.max(1) as f64
    }

    /// Change in the phase III significant share caused by misreporting,
    /// enumerated over the simulated population.
    pub fn misreporting_effect(&self, industry_only: bool) -> f64 {
        self.phase3_significant_share(industry_only, true) - self.phase3_significant_share(industry_only, false)
    }

    pub fn continuation_rate(&self) -> f64 {
        let ph2: Vec<&TruthRow> = self.truth.iter().filter(|t| t.phase == Phase::II).collect();
        ph2.iter().filter(|t| t.continued == Some(true)).count() as f64 / ph2.len().max(1) as f64
    }
}

/// Representative MeSH tree number per category (`Other` gets a code
/// outside the category table).
fn category_tree(c: ConditionCategory) -> &'static str {
    use ConditionCategory::*;
    match c {
        Cardiovascular => "C14",
        Mental => "F03",
        NutritionalMetabolic => "C18",
        Endocrine => "C19",
        Nervous => "C10",
        Respiratory => "C08",
        Digestive => "C06",
        Musculoskeletal => "C05",
        Neoplasms => "C04",
        Urogenital => "C12",
        Immune => "C20",
        PathologicalSigns => "C23",
        SkinConnective => "C17",
        ChemicallyInduced => "C25",
        Congenital => "C16",
        Other => "Z01",
    }
}

const FIRST_START: (i32, u32, u32) = (2004, 1, 1);
const START_WINDOW_DAYS: u32 = 3650;

struct World {
    categories: Vec<ConditionCategory>,
    category_effect: Vec<f64>,
    year_effect: BTreeMap<i32, f64>,
    sponsor_ranks: Vec<BTreeMap<RankCriterion, u32>>,
}

fn world(cfg: &SimConfig) -> World {
    let mut rng = rng::stream(cfg.seed, u64::MAX);
    let mut categories: Vec<ConditionCategory> = ConditionCategory::NAMED.to_vec();
    categories.push(ConditionCategory::Other);
    let category_effect = categories
        .iter()
        .map(|_| cfg.category_effect_sd * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let year_effect = (2004..=2020)
        .map(|y| (y, cfg.year_effect_sd * rng.sample::<f64, _>(StandardNormal)))
        .collect();
    let mut sponsor_ranks = vec![BTreeMap::new(); cfg.n_sponsors];
    for criterion in RankCriterion::ALL {
        let mut order: Vec<usize> = (0..cfg.n_sponsors).collect();
        order.shuffle(&mut rng);
        for (rank, &s) in order.iter().enumerate() {
            sponsor_ranks[s].insert(criterion, rank as u32 + 1);
        }
    }
    World {
        categories,
        category_effect,
        year_effect,
        sponsor_ranks,
    }
}

/// Two-sided p as reported: small p-values are sometimes only bounded.
fn report(z: f64, censor_share: f64, rng: &mut rng::StreamRng) -> ReportedP {
    let p = two_sided_p(z.abs());
    let u: f64 = rng.random();
    if p < 0.001 && u < censor_share {
        ReportedP::Less(if p < 0.0001 { 0.0001 } else { 0.001 })
    } else {
        ReportedP::Exact(p)
    }
}

const MAX_REPLICA_DRAWS: usize = 100_000;

struct TrialDraw {
    trials: Vec<TrialRecord>,
    outcomes: Vec<OutcomeResult>,
    truth: Vec<TruthRow>,
    link: (String, LinkResult),
}

fn simulate_trial(
    i: usize,
    cfg: &SimConfig,
    w: &World,
    model: &ContinuationModel,
    rule: &dyn ContinuationRule,
    misreport: &dyn Misreporting,
) -> TrialDraw {
    let mut rng = rng::stream(cfg.seed, i as u64);
    let normal = |rng: &mut rng::StreamRng| rng.sample::<f64, _>(StandardNormal);

    let theta = cfg.effect_mean + cfg.effect_sd * normal(&mut rng);
    let enroll2 = (cfg.enroll_log_mean + cfg.enroll_log_sd * normal(&mut rng)).exp().round().max(10.0);
    let enroll3 = (cfg.phase3_enroll_ratio * enroll2).round().max(10.0);
    let category_idx = rng.random_range(0..w.categories.len());
    let category = w.categories[category_idx];
    let placebo = rng.random::<f64>() < 0.5;
    let industry = rng.random::<f64>() < cfg.industry_share;
    let sponsor = rng.random_range(0..cfg.n_sponsors);
    let start_offset = rng.random_range(0..START_WINDOW_DAYS) as i64;
    let duration2 = rng.random_range(365..=1095) as i64;
    let gap = rng.random_range(30..=365) as i64;
    let duration3 = rng.random_range(730..=1460) as i64;

    let first = NaiveDate::from_ymd_opt(FIRST_START.0, FIRST_START.1, FIRST_START.2).expect("valid date");
    let start2 = first + Duration::days(start_offset);
    let complete2 = start2 + Duration::days(duration2);
    let start3 = complete2 + Duration::days(gap);
    let complete3 = start3 + Duration::days(duration3);
    let year = chrono::Datelike::year(&complete2);

    let shifter = w.category_effect[category_idx]
        + w.year_effect.get(&year).copied().unwrap_or(0.0)
        + if placebo { cfg.placebo_effect } else { 0.0 };
    let a2 = noncentrality(enroll2);
    let z2 = theta * a2 + normal(&mut rng);
    let index = model.index(z2, enroll2, enroll3, shifter);
    let probability = model.probability(index);
    let continued = rule.decide(index, cfg.shock_scale, &mut rng);
    let p2 = report(z2, cfg.censor_share, &mut rng);

    let (sponsor_name, sponsor_class, ranks) = if industry {
        (format!("Pharma {:02}", sponsor + 1), SponsorClass::Industry, w.sponsor_ranks[sponsor].clone())
    } else {
        (format!("Academic Center {:02}", sponsor + 1), SponsorClass::NonIndustry, BTreeMap::new())
    };
    let drug = format!("simdrug-{:06}", i + 1);
    let id2 = format!("SIM2-{:06}", i + 1);
    let id3 = format!("SIM3-{:06}", i + 1);
    let mesh: BTreeSet<String> = [category_tree(category).to_string()].into();
    let record = |id: &str, phase: Phase, enroll: f64, start: NaiveDate, end: NaiveDate| TrialRecord {
        trial_id: id.to_string(),
        phase,
        sponsor_name: sponsor_name.clone(),
        sponsor_class,
        industry_rank_keys: ranks.clone(),
        interventions: vec![[drug.clone()].into()],
        mesh_conditions: mesh.clone(),
        condition_category: category,
        start_date: Some(start),
        completion_date: Some(end),
        enrollment: enroll as u32,
        placebo_comparator: placebo,
        study_type: StudyType::InterventionalSuperiority,
    };
    let outcome = |id: &str, rank: OutcomeRank, p: ReportedP| OutcomeResult {
        trial_id: id.to_string(),
        outcome_rank: rank,
        reported_p: p,
        mht_adjusted: false,
    };

    let mut trials = vec![record(&id2, Phase::II, enroll2, start2, complete2)];
    let mut outcomes = vec![outcome(&id2, OutcomeRank::Primary, p2)];
    for _ in 0..cfg.n_secondary {
        let z = normal(&mut rng);
        outcomes.push(outcome(&id2, OutcomeRank::Secondary, report(z, cfg.censor_share, &mut rng)));
    }
    let mut truth = vec![TruthRow {
        trial_id: id2.clone(),
        phase: Phase::II,
        industry,
        theta,
        enrollment: enroll2 as u32,
        z_signed: z2,
        index: Some(index),
        probability: Some(probability),
        continued: Some(continued),
        p_true: p2,
        p_reported: Some(p2),
        action: MisreportAction::Keep,
    }];

    let mut matched = BTreeSet::new();
    if continued {
        let z3 = match cfg.phase3 {
            Phase3Mode::Structural => theta * noncentrality(enroll3) + normal(&mut rng),
            Phase3Mode::Replica => {
                let mut accepted = z2;
                for _ in 0..MAX_REPLICA_DRAWS {
                    let z = theta * a2 + normal(&mut rng);
                    let p = model.probability(model.index(z, enroll2, enroll3, shifter));
                    if rng.random::<f64>() < p {
                        accepted = z;
                        break;
                    }
                }
                accepted
            }
        };
        let p3 = report(z3, cfg.censor_share, &mut rng);
        let nonsignificant = matches!(p3, ReportedP::Exact(p) if p > 0.05);
        let action = if nonsignificant {
            misreport.apply(&mut rng)
        } else {
            MisreportAction::Keep
        };
        let reported = match action {
            MisreportAction::Keep => Some(p3),
            MisreportAction::Suppress => None,
            MisreportAction::Replace(p) => Some(ReportedP::Exact(p)),
        };
        trials.push(record(&id3, Phase::III, enroll3, start3, complete3));
        if let Some(p) = reported {
            outcomes.push(outcome(&id3, OutcomeRank::Primary, p));
        }
        for _ in 0..cfg.n_secondary {
            let z = normal(&mut rng);
            outcomes.push(outcome(&id3, OutcomeRank::Secondary, report(z, cfg.censor_share, &mut rng)));
        }
        truth.push(TruthRow {
            trial_id: id3.clone(),
            phase: Phase::III,
            industry,
            theta,
            enrollment: enroll3 as u32,
            z_signed: z3,
            index: None,
            probability: None,
            continued: None,
            p_true: p3,
            p_reported: reported,
            action,
        });
        matched.insert(id3);
    }
    TrialDraw {
        trials,
        outcomes,
        truth,
        link: (
            id2.clone(),
            LinkResult {
                phase2_id: id2,
                matched_phase3_ids: matched,
            },
        ),
    }
}

/// Generates a registry with ground-truth links and a truth log. Trial i
/// draws from stream i of the seed, so the output does not depend on the
/// number of threads.
pub fn generate(cfg: &SimConfig) -> Result<SimOutput> {
    cfg.validate()?;
    let rule = continuation_rules().build_spec(&cfg.continuation)?;
    let misreport = misreporting().build_spec(&cfg.misreporting)?;
    let model = cfg.model();
    let w = world(cfg);
    let draws: Vec<TrialDraw> = (0..cfg.n_trials)
        .into_par_iter()
        .map(|i| simulate_trial(i, cfg, &w, &model, rule.as_ref(), misreport.as_ref()))
        .collect();

    let mut trials = Vec::new();
    let mut outcomes = Vec::new();
    let mut truth = Vec::new();
    let mut links = BTreeMap::new();
    for d in draws {
        trials.extend(d.trials);
        outcomes.extend(d.outcomes);
        truth.extend(d.truth);
        links.insert(d.link.0, Ok(d.link.1));
    }
    Ok(SimOutput {
        config: cfg.clone(),
        registry: Registry::new(trials, outcomes)?,
        links: LinkReport { outcomes: links },
        truth,
    })
}
