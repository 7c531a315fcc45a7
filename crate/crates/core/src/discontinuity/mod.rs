//! Density discontinuity tests at a known cutoff.

mod binned;
mod cjm;
mod sweep;

use crate::error::Result;
use crate::strategy::{check_keys, param_f64, param_opt_f64, param_usize, Params, StrategyRegistry};

pub use binned::{binned_test, Binned};
pub use cjm::{cjm_test, Cjm};
pub use sweep::{sponsor_sweep, SweepCell};

#[derive(Debug, Clone, PartialEq)]
pub struct DiscontinuityResult {
    pub cutoff: f64,
    pub f_left: f64,
    pub f_right: f64,
    pub jump: f64,
    pub std_err: f64,
    pub t_stat: f64,
    pub p_value: f64,
    pub h_left: f64,
    pub h_right: f64,
    /// Observations inside the estimation window on each side.
    pub n_left: usize,
    pub n_right: usize,
}

impl DiscontinuityResult {
    pub(crate) fn from_sides(
        cutoff: f64,
        (f_left, h_left, n_left): (f64, f64, usize),
        (f_right, h_right, n_right): (f64, f64, usize),
        variance: f64,
    ) -> Self {
        let jump = f_right - f_left;
        let std_err = variance.max(0.0).sqrt();
        let t_stat = jump / std_err;
        DiscontinuityResult {
            cutoff,
            f_left,
            f_right,
            jump,
            std_err,
            t_stat,
            p_value: crate::pz::two_sided_p(t_stat),
            h_left,
            h_right,
            n_left,
            n_right,
        }
    }
}

pub trait DensityTest: Send + Sync {
    fn name(&self) -> &'static str;
    fn test(&self, sample: &[f64], cutoff: f64) -> Result<DiscontinuityResult>;
}

/// `cjm[:order=2,h=..,h_left=..,h_right=..]` and
/// `binned[:bin_width=0.05,max_bins=40]`.
pub fn tests() -> StrategyRegistry<dyn DensityTest> {
    let mut reg: StrategyRegistry<dyn DensityTest> = StrategyRegistry::new("discontinuity test");
    reg.register("cjm", |p: &Params| {
        check_keys(p, &["order", "h", "h_left", "h_right"])?;
        let h = param_opt_f64(p, "h")?;
        let cjm = Cjm {
            order: param_usize(p, "order", 2)?,
            h_left: param_opt_f64(p, "h_left")?.or(h),
            h_right: param_opt_f64(p, "h_right")?.or(h),
        };
        cjm.validate()?;
        Ok(Box::new(cjm))
    });
    reg.register("binned", |p: &Params| {
        check_keys(p, &["bin_width", "max_bins"])?;
        let b = Binned {
            bin_width: param_f64(p, "bin_width", 0.05)?,
            max_bins: param_usize(p, "max_bins", 40)?,
        };
        b.validate()?;
        Ok(Box::new(b))
    });
    reg
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Side {
    Left,
    Right,
}

impl Side {
    pub(crate) fn label(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}
