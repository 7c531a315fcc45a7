//! Runs the analysis pipeline on simulated data and compares it with the
//! simulator's ground truth.

use super::{generate, SimConfig, SimOutput};
use crate::decompose::{decompose, DecomposeConfig, DecompositionReport, DecompositionSample};
use crate::discontinuity::{DensityTest, DiscontinuityResult};
use crate::error::Result;
use crate::pz::Sidedness;
use crate::sample::{precise_values, score_outcomes, AnalysisGroup, Phase2or3, SponsorGroup};

pub struct TruthCheckConfig {
    pub decompose: DecomposeConfig,
    pub sponsors: SponsorGroup,
    /// Test run on the phase III precise z-scores at the cutoff.
    pub density_test: Box<dyn DensityTest>,
}

impl Default for TruthCheckConfig {
    fn default() -> Self {
        TruthCheckConfig {
            decompose: DecomposeConfig::default(),
            sponsors: SponsorGroup::All,
            density_test: Box::new(crate::discontinuity::Binned::default()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TruthReport {
    pub decomposition: DecompositionReport,
    /// [Ph3] − [Ph2+SC].
    pub residual: f64,
    pub residual_interval: Option<(f64, f64)>,
    /// Change in the phase III significant share due to misreporting,
    /// enumerated over the simulated population.
    pub injected_effect: f64,
    pub misreporting: String,
    pub phase3_test: std::result::Result<DiscontinuityResult, String>,
}

impl TruthReport {
    pub fn residual_covers_zero(&self) -> Option<bool> {
        self.residual_interval.map(|(lo, hi)| lo <= 0.0 && 0.0 <= hi)
    }

    pub fn residual_significantly_positive(&self) -> Option<bool> {
        self.residual_interval.map(|(lo, _)| lo > 0.0)
    }

    /// Rejection at 5% with a positive jump.
    pub fn spike_detected(&self) -> bool {
        matches!(&self.phase3_test, Ok(r) if r.p_value < 0.05 && r.jump > 0.0)
    }
}

/// Transform, take the ground-truth links, fit the selection function,
/// decompose, and test the phase III density at the cutoff.
pub fn truth_check(sim: &SimOutput, cfg: &TruthCheckConfig) -> Result<TruthReport> {
    let reg = &sim.registry;
    let side = cfg.decompose.side;
    let scored = score_outcomes(reg, side);
    let sample = DecompositionSample::new(reg, &scored, &sim.links, cfg.sponsors);
    let decomposition = decompose(&sample, &cfg.decompose)?;
    let ph3 = AnalysisGroup::new(Phase2or3::III, cfg.sponsors).select(reg, &scored)?;
    let phase3_test = cfg
        .density_test
        .test(&precise_values(&ph3), cfg.decompose.cutoff)
        .map_err(|e| e.to_string());
    let industry_only = matches!(cfg.sponsors, SponsorGroup::Industry);
    Ok(TruthReport {
        residual: decomposition.diffs.ph3_ph2sc,
        residual_interval: decomposition.interval(4),
        injected_effect: sim.misreporting_effect(industry_only),
        misreporting: sim.config.misreporting.clone(),
        phase3_test,
        decomposition,
    })
}

pub fn end_to_end_truth_check(sim_cfg: &SimConfig, cfg: &TruthCheckConfig) -> Result<TruthReport> {
    debug_assert_eq!(cfg.decompose.side, Sidedness::TwoSided);
    truth_check(&generate(sim_cfg)?, cfg)
}
