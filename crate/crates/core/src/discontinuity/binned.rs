//! Histogram-based cross-check: bins with an edge at the cutoff, a
//! triangular-weighted local linear fit to the bin heights on each side,
//! and a delta-method standard error treating bin counts as Poisson.

use super::{DensityTest, DiscontinuityResult, Side};
use crate::error::{Error, Result};

pub const MIN_BINS_PER_SIDE: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Binned {
    pub bin_width: f64,
    /// Bins used on each side at most.
    pub max_bins: usize,
}

impl Default for Binned {
    fn default() -> Self {
        Binned {
            bin_width: 0.05,
            max_bins: 40,
        }
    }
}

impl Binned {
    pub fn validate(&self) -> Result<()> {
        if !(self.bin_width > 0.0 && self.bin_width.is_finite()) {
            return Err(Error::Domain(format!("bin width must be positive, got {}", self.bin_width)));
        }
        if self.max_bins < MIN_BINS_PER_SIDE {
            return Err(Error::config(format!(
                "max_bins must be at least {MIN_BINS_PER_SIDE}, got {}",
                self.max_bins
            )));
        }
        Ok(())
    }
}

struct SideFit {
    f: f64,
    var: f64,
    window: f64,
    n: usize,
}

impl DensityTest for Binned {
    fn name(&self) -> &'static str {
        "binned"
    }

    fn test(&self, sample: &[f64], cutoff: f64) -> Result<DiscontinuityResult> {
        self.validate()?;
        if sample.is_empty() {
            return Err(Error::insufficient("binned test of an empty sample"));
        }
        if sample.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite value in discontinuity test input".into()));
        }
        let n = sample.len() as f64;
        let b = self.bin_width;
        let min = sample.iter().copied().fold(f64::INFINITY, f64::min);
        let max = sample.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let fit_side = |side: Side| -> Result<SideFit> {
            let room = match side {
                Side::Left => cutoff - min,
                Side::Right => max - cutoff,
            };
            let bins = ((room / b + 1e-9).floor().max(0.0) as usize).min(self.max_bins);
            if bins < MIN_BINS_PER_SIDE {
                return Err(Error::insufficient(format!(
                    "{} side of cutoff {cutoff} spans {bins} bins of width {b}, need at least {MIN_BINS_PER_SIDE}",
                    side.label()
                )));
            }
            let mut counts = vec![0.0f64; bins];
            for &x in sample {
                let d = match side {
                    Side::Left if x < cutoff => (cutoff - x) / b,
                    Side::Right if x >= cutoff => (x - cutoff) / b,
                    _ => continue,
                };
                let k = d.floor() as usize;
                // left bins are (c − (k+1)b, c − kb]; right bins [c + kb, c + (k+1)b)
                let k = if side == Side::Left && d == d.floor() && k > 0 { k - 1 } else { k };
                if k < bins {
                    counts[k] += 1.0;
                }
            }
            let window = bins as f64 * b;
            // local linear in distance from the cutoff, triangular weights
            let mut s = [0.0f64; 3];
            let mids: Vec<f64> = (0..bins).map(|k| (k as f64 + 0.5) * b).collect();
            let weights: Vec<f64> = mids.iter().map(|m| 1.0 - m / window).collect();
            for (m, w) in mids.iter().zip(&weights) {
                s[0] += w;
                s[1] += w * m;
                s[2] += w * m * m;
            }
            let det = s[0] * s[2] - s[1] * s[1];
            // intercept = Σ a_k y_k
            let a: Vec<f64> = mids
                .iter()
                .zip(&weights)
                .map(|(m, w)| w * (s[2] - s[1] * m) / det)
                .collect();
            let slope_w: Vec<f64> = mids
                .iter()
                .zip(&weights)
                .map(|(m, w)| w * (s[0] * m - s[1]) / det)
                .collect();
            let heights: Vec<f64> = counts.iter().map(|c| c / (n * b)).collect();
            let f: f64 = a.iter().zip(&heights).map(|(a, y)| a * y).sum();
            let slope: f64 = slope_w.iter().zip(&heights).map(|(a, y)| a * y).sum();
            // Poisson variance of each height at its fitted value
            let var: f64 = a
                .iter()
                .zip(&mids)
                .map(|(a, m)| a * a * (f + slope * m).max(0.0) / (n * b))
                .sum();
            Ok(SideFit {
                f,
                var,
                window,
                n: counts.iter().sum::<f64>() as usize,
            })
        };
        let left = fit_side(Side::Left)?;
        let right = fit_side(Side::Right)?;
        Ok(DiscontinuityResult::from_sides(
            cutoff,
            (left.f, left.window, left.n),
            (right.f, right.window, right.n),
            left.var + right.var,
        ))
    }
}

pub fn binned_test(sample: &[f64], cutoff: f64, bin_width: f64) -> Result<DiscontinuityResult> {
    Binned {
        bin_width,
        ..Binned::default()
    }
    .test(sample, cutoff)
}
