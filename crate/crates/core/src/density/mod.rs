//! Weighted Epanechnikov kernel density estimation and shares of
//! significant results.

mod bandwidth;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::pz::ZScore;
use crate::rng;

pub use bandwidth::{
    gauss_to_epanechnikov, selectors, silverman, sj_bandwidth, Bandwidth, BandwidthSelector,
    Fixed, SheatherJones, Silverman,
};
pub(crate) use bandwidth::quantile_sorted;

/// K(u) = ¾(1 − u²) on |u| ≤ 1.
pub fn epanechnikov(u: f64) -> f64 {
    if u.abs() <= 1.0 {
        0.75 * (1.0 - u * u)
    } else {
        0.0
    }
}

/// ∫_{−∞}^{u} K.
pub fn epanechnikov_cdf(u: f64) -> f64 {
    if u <= -1.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        0.25 * (2.0 + 3.0 * u - u * u * u)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KdeSpec {
    pub h: f64,
    /// Per-observation weights; `None` means unit weights.
    pub weights: Option<Vec<f64>>,
    /// Reflect mass across z = 0 (support [0, ∞)).
    pub reflect: bool,
}

impl KdeSpec {
    pub fn new(h: f64) -> Self {
        KdeSpec {
            h,
            weights: None,
            reflect: false,
        }
    }

    pub fn weighted(h: f64, weights: Vec<f64>) -> Self {
        KdeSpec {
            h,
            weights: Some(weights),
            reflect: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityCurve {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub band_low: Option<Vec<f64>>,
    pub band_high: Option<Vec<f64>>,
}

impl DensityCurve {
    /// Trapezoid integral over the grid.
    pub fn integral(&self) -> f64 {
        self.grid
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(g, v)| (g[1] - g[0]) * (v[0] + v[1]) / 2.0)
            .sum()
    }
}

/// A sample sorted by value with aligned normalized weights, ready for
/// repeated evaluation.
#[derive(Debug, Clone)]
pub struct Kde {
    points: Vec<f64>,
    weights: Vec<f64>,
    h: f64,
    reflect: bool,
}

impl Kde {
    pub fn new(sample: &[f64], spec: &KdeSpec) -> Result<Kde> {
        if sample.is_empty() {
            return Err(Error::insufficient("kernel density of an empty sample"));
        }
        if !(spec.h > 0.0 && spec.h.is_finite()) {
            return Err(Error::Domain(format!("bandwidth must be positive, got {}", spec.h)));
        }
        let weights: Vec<f64> = match &spec.weights {
            Some(w) if w.len() != sample.len() => {
                return Err(Error::Domain(format!(
                    "{} weights for {} observations",
                    w.len(),
                    sample.len()
                )))
            }
            Some(w) => w.clone(),
            None => vec![1.0; sample.len()],
        };
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::Domain("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::Domain("all kernel weights are zero".into()));
        }
        if sample.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite value in density sample".into()));
        }
        let mut order: Vec<usize> = (0..sample.len()).collect();
        order.sort_by(|&a, &b| sample[a].total_cmp(&sample[b]));
        Ok(Kde {
            points: order.iter().map(|&i| sample[i]).collect(),
            weights: order.iter().map(|&i| weights[i] / total).collect(),
            h: spec.h,
            reflect: spec.reflect,
        })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    fn window(&self, x: f64) -> std::ops::Range<usize> {
        let lo = self.points.partition_point(|&p| p < x - self.h);
        let hi = self.points.partition_point(|&p| p <= x + self.h);
        lo..hi
    }

    /// f̂(x) = (1/W) Σ (w_i/h) K((x − Z_i)/h).
    pub fn density(&self, x: f64) -> f64 {
        let raw = |x: f64| -> f64 {
            self.window(x)
                .map(|i| self.weights[i] * epanechnikov((x - self.points[i]) / self.h))
                .sum::<f64>()
                / self.h
        };
        if self.reflect {
            if x < 0.0 {
                0.0
            } else {
                raw(x) + raw(-x)
            }
        } else {
            raw(x)
        }
    }

    /// ∫_{−∞}^{x} f̂ (with reflection, ∫_0^x).
    pub fn cdf(&self, x: f64) -> f64 {
        let raw = |x: f64| -> f64 {
            let below = self.points.partition_point(|&p| p < x - self.h);
            let full: f64 = self.weights[..below].iter().sum();
            full + self
                .window(x)
                .map(|i| self.weights[i] * epanechnikov_cdf((x - self.points[i]) / self.h))
                .sum::<f64>()
        };
        if self.reflect {
            if x <= 0.0 {
                0.0
            } else {
                // mass of the sample plus its mirror image on [0, x]
                raw(x) - raw(0.0) + (1.0 - raw(-x)) - (1.0 - raw(0.0))
            }
        } else {
            raw(x)
        }
    }

    /// Estimated mass at or above `c`.
    pub fn mass_above(&self, c: f64) -> f64 {
        1.0 - self.cdf(c)
    }

    pub fn curve(&self, grid: &[f64]) -> DensityCurve {
        DensityCurve {
            grid: grid.to_vec(),
            values: grid.iter().map(|&x| self.density(x)).collect(),
            band_low: None,
            band_high: None,
        }
    }
}

pub fn kde(sample: &[f64], spec: &KdeSpec, grid: &[f64]) -> Result<DensityCurve> {
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Domain("evaluation grid must be strictly ascending".into()));
    }
    Ok(Kde::new(sample, spec)?.curve(grid))
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![lo];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| lo + step * i as f64).collect()
}

/// 512 points from 0 to max(sample) + 4h.
pub fn default_grid(sample: &[f64], h: f64) -> Vec<f64> {
    let max = sample.iter().copied().fold(0.0, f64::max);
    linspace(0.0, max + 4.0 * h, 512)
}

/// `n` points from min(sample) − 4h to max(sample) + 4h.
pub fn full_grid(sample: &[f64], h: f64, n: usize) -> Vec<f64> {
    let min = sample.iter().copied().fold(f64::INFINITY, f64::min);
    let max = sample.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    linspace(min - 4.0 * h, max + 4.0 * h, n)
}

/// Attaches pointwise percentile-bootstrap bands. Observations are
/// resampled with replacement, carrying their weights; the bandwidth is
/// held at `spec.h`. Replication `r` draws from stream `r` of `seed`.
pub fn with_bands(
    sample: &[f64],
    spec: &KdeSpec,
    mut curve: DensityCurve,
    reps: usize,
    level: f64,
    seed: u64,
) -> Result<DensityCurve> {
    if reps < 2 {
        return Err(Error::config("confidence bands need at least 2 bootstrap replications"));
    }
    let n = sample.len();
    let reps_values: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::stream(seed, r as u64);
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let xs: Vec<f64> = idx.iter().map(|&i| sample[i]).collect();
            let ws = spec
                .weights
                .as_ref()
                .map(|w| idx.iter().map(|&i| w[i]).collect::<Vec<_>>());
            let spec_r = KdeSpec {
                h: spec.h,
                weights: ws,
                reflect: spec.reflect,
            };
            match Kde::new(&xs, &spec_r) {
                Ok(k) => curve.grid.iter().map(|&x| k.density(x)).collect(),
                // a resample with all-zero weights carries no density
                Err(_) => vec![0.0; curve.grid.len()],
            }
        })
        .collect();
    let alpha = (1.0 - level) / 2.0;
    let mut lo = Vec::with_capacity(curve.grid.len());
    let mut hi = Vec::with_capacity(curve.grid.len());
    let mut column = vec![0.0; reps];
    for g in 0..curve.grid.len() {
        for (r, vals) in reps_values.iter().enumerate() {
            column[r] = vals[g];
        }
        column.sort_by(f64::total_cmp);
        lo.push(quantile_sorted(&column, alpha));
        hi.push(quantile_sorted(&column, 1.0 - alpha));
    }
    curve.band_low = Some(lo);
    curve.band_high = Some(hi);
    Ok(curve)
}

/// How the precisely reported part of a sample contributes mass above the
/// cutoff.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailMass {
    /// Weighted fraction of precise values at or above the cutoff.
    Empirical,
    /// Mass of the weighted kernel estimate above the cutoff.
    Kernel { h: f64, reflect: bool },
}

/// Decomposition of a significant share into its parts; all masses are
/// in weight units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShareBreakdown {
    pub precise_mass: f64,
    pub precise_above: f64,
    pub censored_mass: f64,
    pub censored_above: f64,
}

impl ShareBreakdown {
    pub fn share(&self) -> f64 {
        let total = self.precise_mass + self.censored_mass;
        if total > 0.0 {
            (self.precise_above + self.censored_above) / total
        } else {
            f64::NAN
        }
    }
}

/// Share of results at or above `cutoff`, combining the (possibly
/// weighted) density of precise z-scores with the mass of the censored
/// groups and renormalizing to one.
///
/// With weights set to predicted continuation probabilities, the censored
/// rows contribute their predicted counts.
pub fn significant_share_breakdown(
    scores: &[ZScore],
    weights: Option<&[f64]>,
    cutoff: f64,
    tail: TailMass,
) -> Result<ShareBreakdown> {
    if scores.is_empty() {
        return Err(Error::insufficient("significant share of an empty sample"));
    }
    if let Some(w) = weights {
        if w.len() != scores.len() {
            return Err(Error::Domain(format!("{} weights for {} scores", w.len(), scores.len())));
        }
    }
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let mut precise = Vec::new();
    let mut precise_w = Vec::new();
    let mut b = ShareBreakdown {
        precise_mass: 0.0,
        precise_above: 0.0,
        censored_mass: 0.0,
        censored_above: 0.0,
    };
    for (i, z) in scores.iter().enumerate() {
        let wi = w(i);
        if !(wi >= 0.0 && wi.is_finite()) {
            return Err(Error::Domain("weights must be finite and nonnegative".into()));
        }
        match z {
            ZScore::Precise(v) => {
                precise.push(*v);
                precise_w.push(wi);
                b.precise_mass += wi;
            }
            other => {
                b.censored_mass += wi;
                if other.is_significant(cutoff)? {
                    b.censored_above += wi;
                }
            }
        }
    }
    if b.precise_mass > 0.0 {
        b.precise_above = match tail {
            TailMass::Empirical => precise
                .iter()
                .zip(&precise_w)
                .filter(|(v, _)| **v >= cutoff)
                .map(|(_, w)| w)
                .sum(),
            TailMass::Kernel { h, reflect } => {
                let spec = KdeSpec {
                    h,
                    weights: Some(precise_w),
                    reflect,
                };
                b.precise_mass * Kde::new(&precise, &spec)?.mass_above(cutoff)
            }
        };
    }
    if b.precise_mass + b.censored_mass <= 0.0 {
        return Err(Error::Domain("all weights are zero".into()));
    }
    Ok(b)
}

pub fn significant_share(
    scores: &[ZScore],
    weights: Option<&[f64]>,
    cutoff: f64,
    tail: TailMass,
) -> Result<f64> {
    Ok(significant_share_breakdown(scores, weights, cutoff, tail)?.share())
}
