use rand::Rng;
use rand_distr::{Distribution, Gumbel};

use crate::error::{Error, Result};
use crate::strategy::{check_keys, param_f64, Params, StrategyRegistry};

/// How the continue/stop choice is drawn from the continuation index.
pub trait ContinuationRule: Send + Sync {
    fn name(&self) -> &'static str;
    fn decide(&self, index: f64, shock_scale: f64, rng: &mut dyn rand::RngCore) -> bool;
}

/// Bernoulli draw with the logistic probability.
pub struct ClosedForm;

impl ContinuationRule for ClosedForm {
    fn name(&self) -> &'static str {
        "closed-form"
    }
    fn decide(&self, index: f64, shock_scale: f64, rng: &mut dyn rand::RngCore) -> bool {
        rng.random::<f64>() < crate::selection::logistic(index / shock_scale)
    }
}

/// Draws the two extreme-value shocks and compares the branch values.
/// The continue branch carries −η, so with η̲ and −η iid Gumbel(0, σ)
/// the choice probability is logistic(I₂/σ).
pub struct Shocks;

impl ContinuationRule for Shocks {
    fn name(&self) -> &'static str {
        "shocks"
    }
    fn decide(&self, index: f64, shock_scale: f64, rng: &mut dyn rand::RngCore) -> bool {
        let g = Gumbel::new(0.0, shock_scale).expect("positive shock scale");
        let minus_eta: f64 = g.sample(rng);
        let eta_outside: f64 = g.sample(rng);
        index + minus_eta > eta_outside
    }
}

pub fn continuation_rules() -> StrategyRegistry<dyn ContinuationRule> {
    let mut r = StrategyRegistry::<dyn ContinuationRule>::new("continuation rule");
    r.register("closed-form", |p| {
        check_keys(p, &[])?;
        Ok(Box::new(ClosedForm))
    });
    r.register("shocks", |p| {
        check_keys(p, &[])?;
        Ok(Box::new(Shocks))
    });
    r
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MisreportAction {
    Keep,
    Suppress,
    /// Report this two-sided p-value instead.
    Replace(f64),
}

impl MisreportAction {
    pub fn label(&self) -> &'static str {
        match self {
            MisreportAction::Keep => "none",
            MisreportAction::Suppress => "suppressed",
            MisreportAction::Replace(_) => "inflated",
        }
    }
}

/// Applied to each nonsignificant phase III primary result.
pub trait Misreporting: Send + Sync {
    fn name(&self) -> &'static str;
    fn spec(&self) -> String;
    fn apply(&self, rng: &mut dyn rand::RngCore) -> MisreportAction;
}

pub struct Honest;

impl Misreporting for Honest {
    fn name(&self) -> &'static str {
        "none"
    }
    fn spec(&self) -> String {
        "none".into()
    }
    fn apply(&self, _: &mut dyn rand::RngCore) -> MisreportAction {
        MisreportAction::Keep
    }
}

/// Withholds a share q of nonsignificant results.
pub struct SuppressShare {
    pub share: f64,
}

impl Misreporting for SuppressShare {
    fn name(&self) -> &'static str {
        "suppress"
    }
    fn spec(&self) -> String {
        format!("suppress:share={}", self.share)
    }
    fn apply(&self, rng: &mut dyn rand::RngCore) -> MisreportAction {
        if rng.random::<f64>() < self.share {
            MisreportAction::Suppress
        } else {
            MisreportAction::Keep
        }
    }
}

/// Moves a share q of nonsignificant results to z uniform on
/// [z(0.05), z(0.05) + window]; a zero window reports p = 0.05 exactly.
pub struct InflateSpike {
    pub share: f64,
    pub window: f64,
}

impl Misreporting for InflateSpike {
    fn name(&self) -> &'static str {
        "inflate"
    }
    fn spec(&self) -> String {
        format!("inflate:share={},window={}", self.share, self.window)
    }
    fn apply(&self, rng: &mut dyn rand::RngCore) -> MisreportAction {
        if rng.random::<f64>() >= self.share {
            return MisreportAction::Keep;
        }
        if self.window == 0.0 {
            return MisreportAction::Replace(0.05);
        }
        let cutoff = crate::pz::Sidedness::TwoSided.significance_cutoff();
        let z = cutoff + self.window * rng.random::<f64>();
        MisreportAction::Replace(crate::pz::two_sided_p(z).min(0.05))
    }
}

fn share_param(p: &Params) -> Result<f64> {
    let q = param_f64(p, "share", f64::NAN)?;
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::config(format!("misreporting share must be in [0, 1], got {q}")));
    }
    Ok(q)
}

pub fn misreporting() -> StrategyRegistry<dyn Misreporting> {
    let mut r = StrategyRegistry::<dyn Misreporting>::new("misreporting");
    r.register("none", |p| {
        check_keys(p, &[])?;
        Ok(Box::new(Honest))
    });
    r.register("suppress", |p| {
        check_keys(p, &["share"])?;
        Ok(Box::new(SuppressShare { share: share_param(p)? }))
    });
    r.register("inflate", |p| {
        check_keys(p, &["share", "window"])?;
        let window = param_f64(p, "window", 0.0)?;
        if !(window >= 0.0 && window.is_finite()) {
            return Err(Error::config(format!("inflate window must be ≥ 0, got {window}")));
        }
        Ok(Box::new(InflateSpike {
            share: share_param(p)?,
            window,
        }))
    });
    r
}
