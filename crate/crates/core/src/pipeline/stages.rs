use std::path::PathBuf;

use super::svg::{self, Series};
use super::PipelineConfig;
use crate::decompose::{self as dec, DecomposeConfig, DecompositionSample, ENTRY_NAMES};
use crate::density::{self, KdeSpec, TailMass};
use crate::discontinuity::{self, DiscontinuityResult};
use crate::error::{Error, Result};
use crate::linker::{link_all, DrugCanon, LinkConfig, LinkReport};
use crate::pz::{self, TransformSummary, ZScore};
use crate::registry::{
    self, apply_sample_filters, FilterAudit, FilterRule, IngestOptions, OutcomeRank, Phase, Registry,
    SizeClass, SponsorClass, SponsorSplit,
};
use crate::sample::{score_outcomes, AnalysisGroup, Phase2or3, ScoredOutcome, SponsorGroup};
use crate::selection::{self, build_design, fit_logit, stars, SelectionModel, WALD_COEFS};
use crate::simulate;

struct Loaded {
    reg: Registry,
    audit: Option<FilterAudit>,
    scored: Vec<ScoredOutcome>,
}

pub(super) struct Context<'a> {
    cfg: &'a PipelineConfig,
    pub written: Vec<PathBuf>,
    pub warnings: Vec<String>,
    loaded: Option<Loaded>,
    links: Option<LinkReport>,
}

fn num(x: f64) -> String {
    x.to_string()
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

impl<'a> Context<'a> {
    pub fn new(cfg: &'a PipelineConfig) -> Self {
        Context {
            cfg,
            written: Vec::new(),
            warnings: Vec::new(),
            loaded: None,
            links: None,
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.cfg.output.join(name)
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
        let p = self.path(name);
        registry::write_csv(&p, header, rows)?;
        self.written.push(p);
        Ok(())
    }

    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let p = self.path(name);
        registry::write_text(&p, body)?;
        self.written.push(p);
        Ok(())
    }

    fn take_loaded(&mut self) -> Result<Loaded> {
        if let Some(l) = self.loaded.take() {
            return Ok(l);
        }
        let cfg = self.cfg;
        let missing = |what: &str| Error::config(format!("no {what} file configured"));
        let raw = registry::ingest(
            cfg.trials.as_deref().ok_or_else(|| missing("trials"))?,
            cfg.outcomes.as_deref().ok_or_else(|| missing("outcomes"))?,
            cfg.rankings.as_deref().ok_or_else(|| missing("rankings"))?,
            &IngestOptions {
                sponsor_aliases: cfg.aliases.clone(),
                mesh_terms: cfg.mesh_terms.clone(),
                category_spending: cfg.category_spending.clone(),
            },
        )?;
        let (reg, audit) = if cfg.filters {
            let (r, a) = apply_sample_filters(&raw);
            (r, Some(a))
        } else {
            (raw, None)
        };
        let scored = score_outcomes(&reg, cfg.side);
        Ok(Loaded { reg, audit, scored })
    }

    fn links(&mut self, reg: &Registry) -> Result<LinkReport> {
        if let Some(l) = &self.links {
            return Ok(l.clone());
        }
        let cfg = self.cfg;
        let report = match (&cfg.links_summary, &cfg.links) {
            (Some(summary), Some(links)) => LinkReport::read(summary, links)?,
            _ => {
                let synonyms = match &cfg.synonyms {
                    Some(p) => registry::read_synonyms(p)?,
                    None => Vec::new(),
                };
                let canon = DrugCanon::new(&synonyms);
                let mut link_cfg = LinkConfig::default().with_stopwords(cfg.stopwords.iter().map(String::as_str));
                link_cfg.completion_cutoff = cfg.completion_cutoff;
                link_all(reg, &canon, &link_cfg)
            }
        };
        self.links = Some(report.clone());
        Ok(report)
    }

    fn decompose_config(&self, reps: usize) -> Result<DecomposeConfig> {
        Ok(DecomposeConfig {
            side: self.cfg.side,
            cutoff: self.cfg.cutoff(),
            tail: self.cfg.tail,
            bandwidth: density::selectors().build_spec(&self.cfg.bandwidth)?,
            reflect: self.cfg.reflect,
            bootstrap_reps: reps,
            seed: self.cfg.seed,
            ..DecomposeConfig::default()
        })
    }
}

pub(super) fn simulate(ctx: &mut Context<'_>) -> Result<()> {
    let sim = simulate::generate(&ctx.cfg.sim)?;
    sim.write(&ctx.cfg.output)?;
    for f in [
        "trials.csv",
        "outcomes.csv",
        "rankings.csv",
        "synonyms.csv",
        "links.csv",
        "links_summary.csv",
        "truth.csv",
    ] {
        ctx.written.push(ctx.path(f));
    }
    let n3 = sim.registry.trials().iter().filter(|t| t.phase == Phase::III).count();
    let rows = vec![
        vec!["phase2_trials".into(), sim.config.n_trials.to_string()],
        vec!["phase3_trials".into(), n3.to_string()],
        vec!["continuation_rate".into(), num(sim.continuation_rate())],
        vec!["phase3_share_before_misreporting".into(), num(sim.phase3_significant_share(false, false))],
        vec!["phase3_share_after_misreporting".into(), num(sim.phase3_significant_share(false, true))],
        vec!["misreporting_effect".into(), num(sim.misreporting_effect(false))],
    ];
    ctx.csv("simulation_summary.csv", &["quantity", "value"], rows)
}

pub(super) fn ingest(ctx: &mut Context<'_>) -> Result<()> {
    let l = ctx.take_loaded()?;
    let mut counts = std::collections::BTreeMap::<(String, SponsorClass), (usize, usize)>::new();
    for t in l.reg.trials() {
        let e = counts.entry((t.phase.label().to_string(), t.sponsor_class)).or_default();
        e.0 += 1;
        e.1 += l.reg.outcomes_of(&t.trial_id).count();
    }
    let rows = counts
        .into_iter()
        .map(|((phase, class), (t, o))| vec![phase, class.label().to_string(), t.to_string(), o.to_string()])
        .collect();
    ctx.csv("registry_summary.csv", &["phase", "sponsor_class", "trials", "outcomes"], rows)?;
    if let Some(audit) = &l.audit {
        let mut rows: Vec<Vec<String>> = audit
            .counts
            .iter()
            .map(|c| {
                vec![
                    c.rule.label().to_string(),
                    c.trials_removed.to_string(),
                    c.outcomes_removed.to_string(),
                    c.rule.rationale().to_string(),
                ]
            })
            .collect();
        rows.push(vec![
            "kept".into(),
            audit.trials_after.to_string(),
            audit.outcomes_after.to_string(),
            format!("of {} trials and {} outcomes", audit.trials_before, audit.outcomes_before),
        ]);
        debug_assert_eq!(FilterRule::ALL.len() + 1, rows.len());
        ctx.csv("filter_audit.csv", &["rule", "trials", "outcomes", "note"], rows)?;
    }
    ctx.loaded = Some(l);
    Ok(())
}

fn z_value(z: ZScore) -> f64 {
    match z {
        ZScore::Precise(v) => v,
        ZScore::AboveD1 => pz::D1_Z,
        ZScore::AboveD2 => pz::D2_Z,
        ZScore::OtherCensor { threshold, .. } => threshold,
    }
}

pub(super) fn transform(ctx: &mut Context<'_>) -> Result<()> {
    let l = ctx.take_loaded()?;
    let rows = l
        .scored
        .iter()
        .map(|o| {
            vec![
                o.trial_id.clone(),
                o.outcome_rank.label().to_string(),
                o.z.kind_label().to_string(),
                num(z_value(o.z)),
            ]
        })
        .collect();
    ctx.csv("zscores.csv", &["trial_id", "outcome_rank", "z_kind", "z_value"], rows)?;
    let reported: Vec<_> = l.scored.iter().map(|o| o.reported_p).collect();
    let scores: Vec<_> = l.scored.iter().map(|o| o.z).collect();
    let s = TransformSummary::tally(&reported, &scores);
    let rows = [
        ("precise", s.precise),
        ("above_d1", s.above_d1),
        ("above_d2", s.above_d2),
        ("censored_above", s.censored_above),
        ("censored_below", s.censored_below),
        ("less_than_0.05", s.less_than_005),
    ]
    .into_iter()
    .map(|(k, v)| vec![k.to_string(), v.to_string()])
    .collect();
    ctx.csv("transform_summary.csv", &["kind", "count"], rows)?;
    ctx.loaded = Some(l);
    Ok(())
}

pub(super) fn density(ctx: &mut Context<'_>) -> Result<()> {
    let l = ctx.take_loaded()?;
    let cfg = ctx.cfg;
    let selector = density::selectors().build_spec(&cfg.bandwidth)?;
    let cutoff = cfg.cutoff();
    let mut fitted = Vec::new();
    for phase in [Phase2or3::II, Phase2or3::III] {
        let group = AnalysisGroup::new(phase, SponsorGroup::All);
        let rows = group.select(&l.reg, &l.scored)?;
        let precise = crate::sample::precise_values(&rows);
        let bw = selector.select(&precise)?;
        let spec = KdeSpec {
            h: bw.h,
            weights: None,
            reflect: cfg.reflect,
        };
        let z: Vec<ZScore> = rows.iter().map(|o| o.z).collect();
        let share = density::significant_share(&z, None, cutoff, TailMass::Kernel { h: bw.h, reflect: cfg.reflect })?;
        fitted.push((phase, rows.len(), precise, bw, spec, share));
    }
    let upper = fitted
        .iter()
        .map(|(_, _, p, bw, _, _)| p.iter().copied().fold(0.0, f64::max) + 4.0 * bw.h)
        .fold(0.0, f64::max);
    let grid = density::linspace(0.0, upper, 512);
    let mut curve_rows = Vec::new();
    let mut summary = Vec::new();
    let mut curves = Vec::new();
    for (i, (phase, n, precise, bw, spec, share)) in fitted.iter().enumerate() {
        let curve = density::kde(precise, spec, &grid)?;
        let curve = if cfg.band_reps >= 2 {
            density::with_bands(precise, spec, curve, cfg.band_reps, 0.95, crate::rng::child_seed(cfg.seed, i as u64))?
        } else {
            curve
        };
        let label = format!("phase_{}", phase.label().to_lowercase());
        for k in 0..grid.len() {
            curve_rows.push(vec![
                label.clone(),
                num(grid[k]),
                num(curve.values[k]),
                opt_num(curve.band_low.as_ref().map(|b| b[k])),
                opt_num(curve.band_high.as_ref().map(|b| b[k])),
            ]);
        }
        if bw.fallback {
            ctx.warnings.push(format!("{label}: bandwidth selector fell back to Silverman's rule"));
        }
        summary.push(vec![
            label.clone(),
            n.to_string(),
            precise.len().to_string(),
            (n - precise.len()).to_string(),
            num(bw.h),
            bw.fallback.to_string(),
            num(*share),
        ]);
        curves.push((format!("Phase {}", phase.label()), curve.values));
    }
    ctx.csv("density_curves.csv", &["group", "grid", "value", "lo", "hi"], curve_rows)?;
    ctx.csv(
        "density_summary.csv",
        &["group", "n_outcomes", "n_precise", "n_censored", "bandwidth", "bandwidth_fallback", "significant_share"],
        summary,
    )?;
    let series: Vec<Series<'_>> = curves
        .iter()
        .map(|(label, y)| Series {
            label,
            x: &grid,
            y,
        })
        .collect();
    let plot = svg::line_plot("Density of z-statistics (primary outcomes)", "z", "density", &series, &[cutoff]);
    ctx.text("density.svg", &plot)?;
    ctx.loaded = Some(l);
    Ok(())
}

const DISC_COLUMNS: [&str; 17] = [
    "phase",
    "sponsors",
    "outcome_rank",
    "test",
    "n_precise",
    "f_left",
    "f_right",
    "jump",
    "std_err",
    "t_stat",
    "p_value",
    "stars",
    "h_left",
    "h_right",
    "n_left",
    "n_right",
    "error",
];

fn disc_fields(r: &std::result::Result<DiscontinuityResult, String>) -> Vec<String> {
    match r {
        Ok(r) => vec![
            num(r.f_left),
            num(r.f_right),
            num(r.jump),
            num(r.std_err),
            num(r.t_stat),
            num(r.p_value),
            stars(r.jump, r.std_err).to_string(),
            num(r.h_left),
            num(r.h_right),
            r.n_left.to_string(),
            r.n_right.to_string(),
            String::new(),
        ],
        Err(e) => {
            let mut v = vec![String::new(); 11];
            v.push(e.clone());
            v
        }
    }
}

fn main_groups(split: SponsorSplit) -> Vec<SponsorGroup> {
    vec![
        SponsorGroup::All,
        SponsorGroup::Industry,
        SponsorGroup::NonIndustry,
        SponsorGroup::Sized(split, SizeClass::Large),
        SponsorGroup::Sized(split, SizeClass::Small),
    ]
}

pub(super) fn disctest(ctx: &mut Context<'_>) -> Result<()> {
    let l = ctx.take_loaded()?;
    let cfg = ctx.cfg;
    let test = discontinuity::tests().build_spec(&cfg.test)?;
    let groups = match cfg.group_by {
        super::GroupBy::Phase => vec![SponsorGroup::All],
        super::GroupBy::SponsorClassPhase => main_groups(cfg.split),
    };
    let mut rows = Vec::new();
    for phase in [Phase2or3::II, Phase2or3::III] {
        for &sponsors in &groups {
            for rank in [OutcomeRank::Primary, OutcomeRank::Secondary] {
                let group = AnalysisGroup { phase, sponsors, rank };
                let sample: Vec<f64> = l
                    .scored
                    .iter()
                    .filter(|o| group.admits(&l.reg, o))
                    .filter_map(|o| o.z.precise())
                    .collect();
                let result = test.test(&sample, cfg.cutoff()).map_err(|e| e.to_string());
                let mut row = vec![
                    phase.label().to_string(),
                    sponsors.label(),
                    rank.label().to_string(),
                    test.name().to_string(),
                    sample.len().to_string(),
                ];
                row.extend(disc_fields(&result));
                rows.push(row);
            }
        }
    }
    ctx.csv("disctest.csv", &DISC_COLUMNS, rows)?;
    let cells = discontinuity::sponsor_sweep(
        &l.reg,
        &l.scored,
        &SponsorSplit::all(),
        Phase2or3::III,
        cfg.cutoff(),
        test.as_ref(),
    );
    let p: Vec<f64> = cells.iter().filter_map(|c| c.result.as_ref().ok().map(|r| r.p_value)).collect();
    let plot = svg::histogram("Phase III discontinuity p-values across sponsor splits", "p-value", &p, 0.0, 1.0, 20);
    ctx.text("disctest_sweep_pvalues.svg", &plot)?;
    ctx.loaded = Some(l);
    Ok(())
}

pub(super) fn link(ctx: &mut Context<'_>) -> Result<()> {
    let l = ctx.take_loaded()?;
    let report = ctx.links(&l.reg)?;
    let links = ctx.path("links.csv");
    let summary = ctx.path("links_summary.csv");
    report.write_links(&links)?;
    report.write_summary(&summary)?;
    ctx.written.extend([links, summary]);
    let rates = report
        .summary(&l.reg)
        .into_iter()
        .map(|(class, r)| {
            vec![
                class.label().to_string(),
                r.eligible.to_string(),
                r.continued.to_string(),
                num(r.rate()),
            ]
        })
        .collect();
    ctx.csv("continuation_rates.csv", &["sponsor_class", "eligible", "continued", "rate"], rates)?;
    let skips = report
        .skip_counts()
        .into_iter()
        .map(|(r, n)| vec![r.label().to_string(), n.to_string()])
        .collect();
    ctx.csv("link_skips.csv", &["skip_reason", "count"], skips)?;
    ctx.loaded = Some(l);
    Ok(())
}

/// Prediction curve in z with every other column at its sample mean and
/// the censoring dummies off.
fn selection_curve(model: &SelectionModel, rows: &[selection::SelectionDesignRow], z: &[f64]) -> Option<Vec<f64>> {
    let (x, _) = model.schema.matrix(rows);
    let zi = model.schema.index_of("z_ph2")?;
    let mut mean: Vec<f64> = (0..x.ncols()).map(|j| x.column(j).mean()).collect();
    for name in ["d1", "d2"] {
        if let Some(j) = model.schema.index_of(name) {
            mean[j] = 0.0;
        }
    }
    Some(
        z.iter()
            .map(|&zv| {
                mean[zi] = zv;
                let eta: f64 = mean.iter().zip(model.coefficients.iter()).map(|(a, b)| a * b).sum();
                selection::logistic(eta)
            })
            .collect(),
    )
}

pub(super) fn fit_selection(ctx: &mut Context<'_>) -> Result<()> {
    let l = ctx.take_loaded()?;
    let links = ctx.links(&l.reg)?;
    let split = ctx.cfg.split;
    let specs = [
        ("industry", SponsorGroup::Industry, OutcomeRank::Primary),
        ("large", SponsorGroup::Sized(split, SizeClass::Large), OutcomeRank::Primary),
        ("small", SponsorGroup::Sized(split, SizeClass::Small), OutcomeRank::Primary),
        ("industry_secondary", SponsorGroup::Industry, OutcomeRank::Secondary),
    ];
    let mut fits: Vec<(&str, Result<(SelectionModel, Vec<selection::SelectionDesignRow>)>)> = Vec::new();
    for (name, sponsors, rank) in specs {
        let group = AnalysisGroup {
            phase: Phase2or3::II,
            sponsors,
            rank,
        };
        let fit = group
            .select(&l.reg, &l.scored)
            .and_then(|rows| build_design(&l.reg, &rows, &links))
            .and_then(|design| fit_logit(&design).map(|m| (m, design)));
        fits.push((name, fit));
    }
    if let (_, Err(e)) = &fits[0] {
        return Err(Error::Domain(format!("industry selection model: {e}")));
    }
    let mut coef_rows = Vec::new();
    let mut stat_rows = Vec::new();
    for (name, fit) in &fits {
        match fit {
            Ok((m, _)) => {
                for (k, term) in m.names().iter().enumerate() {
                    let se = m.vcov_clustered[(k, k)].max(0.0).sqrt();
                    let b = m.coefficients[k];
                    coef_rows.push(vec![name.to_string(), term.clone(), num(b), num(se), stars(b, se).to_string()]);
                }
                for w in &m.warnings {
                    ctx.warnings.push(format!("{name}: {w}"));
                }
                stat_rows.push(vec![
                    name.to_string(),
                    m.n_obs.to_string(),
                    m.n_trials.to_string(),
                    m.n_clusters.to_string(),
                    num(m.mean_dep_var),
                    num(m.log_likelihood),
                    m.converged.to_string(),
                    m.iterations.to_string(),
                    m.warnings.join("; "),
                ]);
            }
            Err(e) => {
                let mut row = vec![name.to_string()];
                row.extend(vec![String::new(); 7]);
                row.push(e.to_string());
                stat_rows.push(row);
            }
        }
    }
    ctx.csv("selection_coefficients.csv", &["model", "term", "estimate", "std_err", "stars"], coef_rows)?;
    ctx.csv(
        "selection_stats.csv",
        &["model", "n_obs", "n_trials", "n_clusters", "mean_dep_var", "log_likelihood", "converged", "iterations", "note"],
        stat_rows,
    )?;
    let wald_row = match (&fits[1].1, &fits[2].1) {
        (Ok((a, _)), Ok((b, _))) => match selection::wald_equality(a, b, &WALD_COEFS) {
            Ok(w) => vec!["large_vs_small".into(), num(w.statistic), w.df.to_string(), num(w.p_value), String::new()],
            Err(e) => vec!["large_vs_small".into(), String::new(), String::new(), String::new(), e.to_string()],
        },
        _ => vec![
            "large_vs_small".into(),
            String::new(),
            String::new(),
            String::new(),
            "a size-class model failed".into(),
        ],
    };
    ctx.csv("wald.csv", &["comparison", "statistic", "df", "p_value", "note"], vec![wald_row])?;

    let (model, design) = fits[0].1.as_ref().expect("checked above");
    let (p, w) = selection::predict(model, design);
    ctx.warnings.extend(w);
    let pred_rows = design
        .iter()
        .zip(&p)
        .map(|(r, p)| vec![r.trial_id.clone(), r.outcome_index.to_string(), r.continuation.to_string(), num(*p)])
        .collect();
    ctx.csv("predictions.csv", &["trial_id", "outcome_index", "continuation", "predicted"], pred_rows)?;

    let zgrid = density::linspace(0.0, 5.0, 101);
    let mut curve_rows = Vec::new();
    let mut curves = Vec::new();
    for (name, fit) in fits.iter().take(3) {
        if let Ok((m, d)) = fit {
            if let Some(c) = selection_curve(m, d, &zgrid) {
                for (z, p) in zgrid.iter().zip(&c) {
                    curve_rows.push(vec![name.to_string(), num(*z), num(*p)]);
                }
                curves.push((name.to_string(), c));
            }
        }
    }
    ctx.csv("selection_curve.csv", &["model", "z", "predicted"], curve_rows)?;
    let series: Vec<Series<'_>> = curves
        .iter()
        .map(|(n, c)| Series {
            label: n,
            x: &zgrid,
            y: c,
        })
        .collect();
    let plot = svg::line_plot(
        "Predicted continuation probability (controls at means)",
        "phase II z",
        "probability",
        &series,
        &[ctx.cfg.cutoff()],
    );
    ctx.text("selection_curve.svg", &plot)?;
    ctx.loaded = Some(l);
    Ok(())
}

pub(super) fn decompose(ctx: &mut Context<'_>) -> Result<()> {
    let l = ctx.take_loaded()?;
    let links = ctx.links(&l.reg)?;
    let split = ctx.cfg.split;
    let dcfg = ctx.decompose_config(ctx.cfg.bootstrap_reps)?;
    let groups = [
        ("industry", SponsorGroup::Industry),
        ("large", SponsorGroup::Sized(split, SizeClass::Large)),
        ("small", SponsorGroup::Sized(split, SizeClass::Small)),
    ];
    let mut rows = Vec::new();
    let mut stats = Vec::new();
    let mut bars = Vec::new();
    for (i, (name, sponsors)) in groups.iter().enumerate() {
        let sample = DecompositionSample::new(&l.reg, &l.scored, &links, *sponsors);
        match dec::decompose(&sample, &dcfg) {
            Ok(r) => {
                for (k, entry) in ENTRY_NAMES.iter().enumerate() {
                    let est = r.shares.entries()[k];
                    let se = r.std_errs.map(|s| s[k]);
                    let ci = r.interval(k);
                    rows.push(vec![
                        name.to_string(),
                        entry.to_string(),
                        num(est),
                        opt_num(se),
                        se.map(|s| stars(est, s).to_string()).unwrap_or_default(),
                        opt_num(ci.map(|c| c.0)),
                        opt_num(ci.map(|c| c.1)),
                    ]);
                }
                ctx.warnings.extend(r.warnings.iter().map(|w| format!("{name}: {w}")));
                stats.push(vec![
                    name.to_string(),
                    r.n_obs_ph2.to_string(),
                    r.n_trials_ph2.to_string(),
                    r.n_obs_ph3.to_string(),
                    r.n_trials_ph3.to_string(),
                    r.n_obs_selection.to_string(),
                    num(r.h_ph2),
                    num(r.h_ph3),
                    r.bootstrap_reps.to_string(),
                    r.dropped_reps.to_string(),
                    opt_num(r.shares.explained_fraction(dcfg.undefined_tol)),
                    String::new(),
                ]);
                let d = r.diffs;
                bars.push((name.to_string(), vec![r.shares.ph2, d.ph2sc_ph2, d.ph3_ph2sc]));
            }
            Err(e) if i > 0 => {
                let mut row = vec![name.to_string()];
                row.extend(vec![String::new(); 10]);
                row.push(e.to_string());
                stats.push(row);
            }
            Err(e) => return Err(Error::Domain(format!("industry decomposition: {e}"))),
        }
    }
    ctx.csv(
        "decomposition.csv",
        &["group", "entry", "estimate", "std_err", "stars", "ci_low", "ci_high"],
        rows,
    )?;
    ctx.csv(
        "decomposition_stats.csv",
        &[
            "group",
            "n_obs_ph2",
            "n_trials_ph2",
            "n_obs_ph3",
            "n_trials_ph3",
            "n_obs_selection",
            "h_ph2",
            "h_ph3",
            "bootstrap_reps",
            "dropped_reps",
            "explained_fraction",
            "note",
        ],
        stats,
    )?;
    let (cats, vals): (Vec<String>, Vec<Vec<f64>>) = bars.into_iter().unzip();
    let plot = svg::stacked_bars(
        "Share of significant results: phase II, selective continuation, residual",
        "share significant",
        &cats,
        &["phase II", "selective continuation", "unexplained"],
        &vals,
    );
    ctx.text("decomposition.svg", &plot)?;
    ctx.loaded = Some(l);
    Ok(())
}

pub(super) fn sweep(ctx: &mut Context<'_>) -> Result<()> {
    let l = ctx.take_loaded()?;
    let links = ctx.links(&l.reg)?;
    let cfg = ctx.cfg;
    let splits = SponsorSplit::all();
    let test = discontinuity::tests().build_spec(&cfg.test)?;
    let mut disc_rows = Vec::new();
    let mut p3 = Vec::new();
    for phase in [Phase2or3::II, Phase2or3::III] {
        for c in discontinuity::sponsor_sweep(&l.reg, &l.scored, &splits, phase, cfg.cutoff(), test.as_ref()) {
            if let (Phase2or3::III, Ok(r)) = (phase, &c.result) {
                p3.push(r.p_value);
            }
            let (jump, se, p, err) = match &c.result {
                Ok(r) => (num(r.jump), num(r.std_err), num(r.p_value), String::new()),
                Err(e) => (String::new(), String::new(), String::new(), e.clone()),
            };
            disc_rows.push(vec![
                phase.label().to_string(),
                c.split.criterion.label().to_string(),
                c.split.k.to_string(),
                c.class.label().to_string(),
                c.n.to_string(),
                jump,
                se,
                p,
                err,
            ]);
        }
    }
    ctx.csv(
        "sweep_discontinuity.csv",
        &["phase", "criterion", "k", "class", "n_precise", "jump", "std_err", "p_value", "error"],
        disc_rows,
    )?;
    let dcfg = ctx.decompose_config(0)?;
    let cells = dec::sponsor_split_sweep(&l.reg, &l.scored, &links, &splits, &dcfg);
    let mut explained = Vec::new();
    let rows = cells
        .iter()
        .map(|c| {
            let mut row = vec![
                c.split.criterion.label().to_string(),
                c.split.k.to_string(),
                c.class.label().to_string(),
            ];
            match &c.result {
                Ok((s, e)) => {
                    if let Some(e) = e {
                        explained.push(*e);
                    }
                    row.extend([num(s.ph2), num(s.ph3), num(s.ph2_sc), opt_num(*e)]);
                    row.push(if e.is_some() { "ok".into() } else { "undefined".into() });
                }
                Err(err) => {
                    row.extend(vec![String::new(); 4]);
                    row.push(format!("failed: {err}"));
                }
            }
            row
        })
        .collect();
    ctx.csv(
        "sweep_explained.csv",
        &["criterion", "k", "class", "ph2", "ph3", "ph2_sc", "explained_fraction", "status"],
        rows,
    )?;
    let plot = svg::histogram("Phase III discontinuity p-values across sponsor splits", "p-value", &p3, 0.0, 1.0, 20);
    ctx.text("sweep_pvalues.svg", &plot)?;
    let plot = svg::histogram(
        "Share of the phase II to III gap explained by continuation",
        "explained fraction",
        &explained,
        -0.5,
        1.5,
        20,
    );
    ctx.text("sweep_explained.svg", &plot)?;
    ctx.loaded = Some(l);
    Ok(())
}
