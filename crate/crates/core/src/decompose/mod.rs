//! Splits the phase II → phase III rise in the share of significant
//! results into selective continuation and an unexplained residual.
//!
//! [Ph2] is the share of significant phase II results, [Ph3] that of
//! phase III results and [Ph2+SC] the phase II share after reweighting
//! every phase II result with its predicted continuation probability.

mod bootstrap;
mod sweep;

use crate::density::{BandwidthSelector, TailMass};
use crate::error::{Error, Result};
use crate::linker::LinkReport;
use crate::pz::{impute_other_censors, Sidedness, ZScore};
use crate::registry::{Registry, TrialRecord};
use crate::sample::{AnalysisGroup, Phase2or3, ScoredOutcome, SponsorGroup};
use crate::selection::{design_row, fit_logit, predict, SelectionDesignRow, SelectionModel};

pub use bootstrap::bootstrap;
pub use sweep::{sponsor_split_sweep, SplitCell};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailKind {
    Kernel,
    Empirical,
}

impl std::str::FromStr for TailKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "kernel" => Ok(TailKind::Kernel),
            "empirical" => Ok(TailKind::Empirical),
            other => Err(format!("unknown tail mass `{other}` (expected kernel|empirical)")),
        }
    }
}

pub struct DecomposeConfig {
    pub side: Sidedness,
    pub cutoff: f64,
    pub tail: TailKind,
    pub bandwidth: Box<dyn BandwidthSelector>,
    pub reflect: bool,
    pub bootstrap_reps: usize,
    pub seed: u64,
    /// Largest share of failed bootstrap replications tolerated.
    pub max_failed_share: f64,
    /// |[Ph3] − [Ph2]| below which the explained fraction is undefined.
    pub undefined_tol: f64,
}

impl Default for DecomposeConfig {
    fn default() -> Self {
        DecomposeConfig {
            side: Sidedness::TwoSided,
            cutoff: Sidedness::TwoSided.significance_cutoff(),
            tail: TailKind::Kernel,
            bandwidth: Box::new(crate::density::SheatherJones::default()),
            reflect: false,
            bootstrap_reps: 500,
            seed: 1,
            max_failed_share: 0.10,
            undefined_tol: 0.02,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shares {
    pub ph2: f64,
    pub ph3: f64,
    pub ph2_sc: f64,
}

/// The three differences, in the order [Ph3]−[Ph2], [Ph3]−[Ph2+SC],
/// [Ph2+SC]−[Ph2].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diffs {
    pub ph3_ph2: f64,
    pub ph3_ph2sc: f64,
    pub ph2sc_ph2: f64,
}

impl Shares {
    pub fn diffs(&self) -> Diffs {
        Diffs {
            ph3_ph2: self.ph3 - self.ph2,
            ph3_ph2sc: self.ph3 - self.ph2_sc,
            ph2sc_ph2: self.ph2_sc - self.ph2,
        }
    }

    /// Entries in report order: ph2, ph3, ph2_sc, then the diffs.
    pub fn entries(&self) -> [f64; 6] {
        let d = self.diffs();
        [self.ph2, self.ph3, self.ph2_sc, d.ph3_ph2, d.ph3_ph2sc, d.ph2sc_ph2]
    }

    /// Fraction of the phase II → III gap explained by continuation.
    pub fn explained_fraction(&self, undefined_tol: f64) -> Option<f64> {
        let gap = self.ph3 - self.ph2;
        if gap.abs() < undefined_tol {
            None
        } else {
            Some((self.ph2_sc - self.ph2) / gap)
        }
    }
}

pub const ENTRY_NAMES: [&str; 6] = ["ph2", "ph3", "ph2_sc", "ph3-ph2", "ph3-ph2_sc", "ph2_sc-ph2"];

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionReport {
    pub shares: Shares,
    pub diffs: Diffs,
    /// Bootstrap standard errors in [`ENTRY_NAMES`] order.
    pub std_errs: Option<[f64; 6]>,
    pub n_obs_ph2: usize,
    pub n_trials_ph2: usize,
    pub n_obs_ph3: usize,
    pub n_trials_ph3: usize,
    pub n_obs_selection: usize,
    pub h_ph2: f64,
    pub h_ph3: f64,
    pub bootstrap_reps: usize,
    pub dropped_reps: usize,
    pub warnings: Vec<String>,
}

impl DecompositionReport {
    /// Normal 95% interval of an entry.
    pub fn interval(&self, entry: usize) -> Option<(f64, f64)> {
        let est = self.shares.entries()[entry];
        self.std_errs.map(|se| (est - 1.96 * se[entry], est + 1.96 * se[entry]))
    }
}

/// Trials of one phase with their (unimputed) scored outcomes.
#[derive(Debug, Clone)]
pub struct TrialBundle<'a> {
    pub trial: &'a TrialRecord,
    pub outcomes: Vec<ScoredOutcome>,
    /// Link result; `None` when the trial is not eligible for linking.
    pub continuation: Option<bool>,
}

/// Phase II and phase III bundles of one sponsor group.
#[derive(Debug, Clone)]
pub struct DecompositionSample<'a> {
    pub ph2: Vec<TrialBundle<'a>>,
    pub ph3: Vec<TrialBundle<'a>>,
}

impl<'a> DecompositionSample<'a> {
    pub fn new(
        reg: &'a Registry,
        scored: &[ScoredOutcome],
        links: &LinkReport,
        sponsors: SponsorGroup,
    ) -> DecompositionSample<'a> {
        let bundles = |phase: Phase2or3| -> Vec<TrialBundle<'a>> {
            let group = AnalysisGroup::new(phase, sponsors);
            let mut by_trial: std::collections::BTreeMap<usize, Vec<ScoredOutcome>> =
                std::collections::BTreeMap::new();
            for o in scored.iter().filter(|o| group.admits(reg, o)) {
                by_trial.entry(o.trial).or_default().push(o.clone());
            }
            by_trial
                .into_iter()
                .map(|(t, outcomes)| {
                    let trial = &reg.trials()[t];
                    TrialBundle {
                        trial,
                        continuation: links.continued(&trial.trial_id),
                        outcomes,
                    }
                })
                .collect()
        };
        DecompositionSample {
            ph2: bundles(Phase2or3::II),
            ph3: bundles(Phase2or3::III),
        }
    }
}

/// Point estimate on a (possibly resampled) list of bundles.
#[derive(Debug, Clone)]
pub struct Estimate {
    pub shares: Shares,
    pub model: SelectionModel,
    pub h_ph2: f64,
    pub h_ph3: f64,
    pub n_obs_ph2: usize,
    pub n_obs_ph3: usize,
    pub warnings: Vec<String>,
}

fn imputed_scores(bundles: &[&TrialBundle<'_>]) -> Result<Vec<ZScore>> {
    let raw: Vec<ZScore> = bundles
        .iter()
        .flat_map(|b| b.outcomes.iter().map(|o| o.z))
        .collect();
    impute_other_censors(&raw)
}

fn tail(cfg: &DecomposeConfig, h: f64) -> TailMass {
    match cfg.tail {
        TailKind::Kernel => TailMass::Kernel {
            h,
            reflect: cfg.reflect,
        },
        TailKind::Empirical => TailMass::Empirical,
    }
}

fn bandwidth(cfg: &DecomposeConfig, scores: &[ZScore], what: &str) -> Result<(f64, Option<String>)> {
    let precise: Vec<f64> = scores.iter().filter_map(|z| z.precise()).collect();
    match cfg.tail {
        TailKind::Empirical => Ok((f64::NAN, None)),
        TailKind::Kernel => {
            let bw = cfg.bandwidth.select(&precise)?;
            let warn = bw
                .fallback
                .then(|| format!("{what}: bandwidth selector fell back to Silverman's rule"));
            Ok((bw.h, warn))
        }
    }
}

/// Runs the whole estimation on bundles: fit the selection function on
/// the link-eligible phase II outcomes, predict for every phase II
/// outcome, and compute the three shares.
pub fn estimate(ph2: &[&TrialBundle<'_>], ph3: &[&TrialBundle<'_>], cfg: &DecomposeConfig) -> Result<Estimate> {
    if ph2.is_empty() || ph3.is_empty() {
        return Err(Error::insufficient("decomposition needs phase II and phase III trials"));
    }
    let mut warnings = Vec::new();
    let z2 = imputed_scores(ph2)?;
    let z3 = imputed_scores(ph3)?;

    let mut all_rows: Vec<SelectionDesignRow> = Vec::with_capacity(z2.len());
    let mut fit_rows: Vec<SelectionDesignRow> = Vec::new();
    let mut k = 0;
    for b in ph2 {
        for o in &b.outcomes {
            let mut o = o.clone();
            o.z = z2[k];
            k += 1;
            let row = design_row(b.trial, &o, b.continuation.unwrap_or(false))?;
            if b.continuation.is_some() {
                fit_rows.push(row.clone());
            }
            all_rows.push(row);
        }
    }
    let model = fit_logit(&fit_rows)?;
    if !model.converged {
        return Err(Error::Domain("selection function did not converge".into()));
    }
    warnings.extend(model.warnings.iter().cloned());
    let (weights, w) = predict(&model, &all_rows);
    warnings.extend(w);

    let (h2, w2) = bandwidth(cfg, &z2, "phase II")?;
    let (h3, w3) = bandwidth(cfg, &z3, "phase III")?;
    warnings.extend(w2.into_iter().chain(w3));
    let share = |z: &[ZScore], w: Option<&[f64]>, h: f64| {
        crate::density::significant_share(z, w, cfg.cutoff, tail(cfg, h))
    };
    let shares = Shares {
        ph2: share(&z2, None, h2)?,
        ph2_sc: share(&z2, Some(&weights), h2)?,
        ph3: share(&z3, None, h3)?,
    };
    Ok(Estimate {
        shares,
        model,
        h_ph2: h2,
        h_ph3: h3,
        n_obs_ph2: z2.len(),
        n_obs_ph3: z3.len(),
        warnings,
    })
}

/// Point estimates with trial-clustered bootstrap standard errors.
pub fn decompose(sample: &DecompositionSample<'_>, cfg: &DecomposeConfig) -> Result<DecompositionReport> {
    let ph2: Vec<&TrialBundle<'_>> = sample.ph2.iter().collect();
    let ph3: Vec<&TrialBundle<'_>> = sample.ph3.iter().collect();
    let point = estimate(&ph2, &ph3, cfg)?;
    let (std_errs, reps, dropped) = if cfg.bootstrap_reps > 0 {
        let b = bootstrap(sample, cfg)?;
        (Some(b.std_errs), b.successful, b.dropped)
    } else {
        (None, 0, 0)
    };
    Ok(DecompositionReport {
        shares: point.shares,
        diffs: point.shares.diffs(),
        std_errs,
        n_obs_ph2: point.n_obs_ph2,
        n_trials_ph2: ph2.len(),
        n_obs_ph3: point.n_obs_ph3,
        n_trials_ph3: ph3.len(),
        n_obs_selection: point.model.n_obs,
        h_ph2: point.h_ph2,
        h_ph3: point.h_ph3,
        bootstrap_reps: reps,
        dropped_reps: dropped,
        warnings: point.warnings,
    })
}

/// Share of significant results among weighted phase II scores; the
/// [Ph2+SC] building block exposed for direct use.
pub fn counterfactual_share(
    ph2_scores: &[ZScore],
    model: &SelectionModel,
    design_rows: &[SelectionDesignRow],
    cutoff: f64,
    tail: TailMass,
) -> Result<f64> {
    if ph2_scores.len() != design_rows.len() {
        return Err(Error::Domain(format!(
            "{} scores for {} design rows",
            ph2_scores.len(),
            design_rows.len()
        )));
    }
    let (w, _) = predict(model, design_rows);
    crate::density::significant_share(ph2_scores, Some(&w), cutoff, tail)
}
