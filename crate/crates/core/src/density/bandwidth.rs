//! Bandwidth selectors for the Epanechnikov kernel.
//!
//! Selectors return the Epanechnikov half-width `h` (support [−h, h]).
//! Rules derived for the Gaussian kernel are converted through canonical
//! kernel equivalence.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::strategy::{check_keys, param_f64, param_usize, Params, StrategyRegistry};

/// Ratio of the Epanechnikov to the Gaussian canonical bandwidth,
/// (R(K)/μ₂(K)²)^(1/5) for each: 15^(1/5) / (1/(2√π))^(1/5).
pub fn gauss_to_epanechnikov() -> f64 {
    15f64.powf(0.2) / (0.5 / PI.sqrt()).powf(0.2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bandwidth {
    pub h: f64,
    /// Set when the requested rule failed and the rule of thumb was used.
    pub fallback: bool,
}

pub trait BandwidthSelector: Send + Sync {
    fn name(&self) -> &'static str;
    fn select(&self, sample: &[f64]) -> Result<Bandwidth>;
}

pub fn selectors() -> StrategyRegistry<dyn BandwidthSelector> {
    let mut reg: StrategyRegistry<dyn BandwidthSelector> = StrategyRegistry::new("bandwidth selector");
    reg.register("sj", |p: &Params| {
        check_keys(p, &["bins"])?;
        Ok(Box::new(SheatherJones {
            bins: param_usize(p, "bins", 1000)?,
        }))
    });
    reg.register("silverman", |p: &Params| {
        check_keys(p, &[])?;
        Ok(Box::new(Silverman))
    });
    reg.register("fixed", |p: &Params| {
        check_keys(p, &["h"])?;
        let h = param_f64(p, "h", f64::NAN)?;
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::config("fixed bandwidth needs h > 0 (e.g. `fixed:h=0.3`)"));
        }
        Ok(Box::new(Fixed(h)))
    });
    reg
}

pub struct Fixed(pub f64);

impl BandwidthSelector for Fixed {
    fn name(&self) -> &'static str {
        "fixed"
    }
    fn select(&self, _: &[f64]) -> Result<Bandwidth> {
        Ok(Bandwidth {
            h: self.0,
            fallback: false,
        })
    }
}

fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Type-7 sample quantile of sorted data.
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn robust_scale(sample: &[f64]) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&s, 0.75) - quantile_sorted(&s, 0.25);
    let sd = mean_sd(sample).1;
    if iqr > 0.0 {
        sd.min(iqr / 1.349)
    } else {
        sd
    }
}

fn check_sample(sample: &[f64]) -> Result<()> {
    if sample.len() < 2 {
        return Err(Error::insufficient("bandwidth selection needs at least 2 observations"));
    }
    if sample.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite value in bandwidth sample".into()));
    }
    Ok(())
}

/// Silverman's rule of thumb, 0.9·min(sd, IQR/1.349)·n^(−1/5), converted
/// to the Epanechnikov scale.
pub struct Silverman;

pub fn silverman(sample: &[f64]) -> Result<f64> {
    check_sample(sample)?;
    let scale = robust_scale(sample);
    if scale <= 0.0 {
        return Err(Error::Domain("bandwidth sample has zero spread".into()));
    }
    Ok(0.9 * scale * (sample.len() as f64).powf(-0.2) * gauss_to_epanechnikov())
}

impl BandwidthSelector for Silverman {
    fn name(&self) -> &'static str {
        "silverman"
    }
    fn select(&self, sample: &[f64]) -> Result<Bandwidth> {
        Ok(Bandwidth {
            h: silverman(sample)?,
            fallback: false,
        })
    }
}

/// Sheather–Jones solve-the-equation plug-in bandwidth on binned pair
/// distances.
pub struct SheatherJones {
    pub bins: usize,
}

impl Default for SheatherJones {
    fn default() -> Self {
        SheatherJones { bins: 1000 }
    }
}

struct PairBins {
    n: f64,
    width: f64,
    counts: Vec<f64>,
}

impl PairBins {
    fn new(sample: &[f64], nb: usize) -> PairBins {
        let lo = sample.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = sample.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let width = (hi - lo) * 1.01 / nb as f64;
        let mut per_bin = vec![0.0f64; nb];
        for &x in sample {
            let i = (((x - lo) / width) as usize).min(nb - 1);
            per_bin[i] += 1.0;
        }
        // counts[d] = number of pairs i<j whose bins are d apart
        let mut counts = vec![0.0f64; nb];
        for i in 0..nb {
            let ci = per_bin[i];
            if ci == 0.0 {
                continue;
            }
            counts[0] += ci * (ci - 1.0) / 2.0;
            for j in i + 1..nb {
                counts[j - i] += ci * per_bin[j];
            }
        }
        PairBins {
            n: sample.len() as f64,
            width,
            counts,
        }
    }

    /// Gaussian-kernel estimate of ∫(f'')² at pilot bandwidth h.
    fn phi4(&self, h: f64) -> f64 {
        let mut sum = 0.0;
        for (i, &c) in self.counts.iter().enumerate() {
            let d = i as f64 * self.width / h;
            let d2 = d * d;
            if d2 >= 1000.0 {
                break;
            }
            sum += (-d2 / 2.0).exp() * (d2 * d2 - 6.0 * d2 + 3.0) * c;
        }
        let sum = 2.0 * sum + self.n * 3.0;
        sum / (self.n * (self.n - 1.0) * h.powi(5) * (2.0 * PI).sqrt())
    }

    /// Gaussian-kernel estimate of −∫(f''')² at pilot bandwidth h.
    fn phi6(&self, h: f64) -> f64 {
        let mut sum = 0.0;
        for (i, &c) in self.counts.iter().enumerate() {
            let d = i as f64 * self.width / h;
            let d2 = d * d;
            if d2 >= 1000.0 {
                break;
            }
            sum += (-d2 / 2.0).exp() * (d2 * d2 * d2 - 15.0 * d2 * d2 + 45.0 * d2 - 15.0) * c;
        }
        let sum = 2.0 * sum - 15.0 * self.n;
        sum / (self.n * (self.n - 1.0) * h.powi(7) * (2.0 * PI).sqrt())
    }
}

impl SheatherJones {
    /// Gaussian-kernel SJ bandwidth, or `None` when the equation has no
    /// root on the bracket or the pilot estimates degenerate.
    pub fn gaussian_bandwidth(&self, sample: &[f64]) -> Result<Option<f64>> {
        check_sample(sample)?;
        let n = sample.len() as f64;
        let scale = robust_scale(sample);
        let sd = mean_sd(sample).1;
        if !(scale > 0.0) {
            return Ok(None);
        }
        let bins = PairBins::new(sample, self.bins.max(10));
        let a = 1.24 * scale * n.powf(-1.0 / 7.0);
        let b = 1.23 * scale * n.powf(-1.0 / 9.0);
        let c1 = 1.0 / (2.0 * PI.sqrt() * n);
        let td = -bins.phi6(b);
        if !(td.is_finite() && td > 0.0) {
            return Ok(None);
        }
        let alph2 = 1.357 * (bins.phi4(a) / td).powf(1.0 / 7.0);
        if !alph2.is_finite() {
            return Ok(None);
        }
        let f = |h: f64| (c1 / bins.phi4(alph2 * h.powf(5.0 / 7.0))).powf(0.2) - h;
        let (mut lo, mut hi) = (sd / n, 2.0 * sd);
        let (mut flo, fhi) = (f(lo), f(hi));
        if !(flo.is_finite() && fhi.is_finite()) || flo * fhi > 0.0 {
            return Ok(None);
        }
        while hi - lo > 1e-6 * 0.5 * (hi + lo) {
            let mid = 0.5 * (lo + hi);
            let fm = f(mid);
            if !fm.is_finite() {
                return Ok(None);
            }
            if (fm > 0.0) == (flo > 0.0) {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
            }
        }
        Ok(Some(0.5 * (lo + hi)))
    }
}

impl BandwidthSelector for SheatherJones {
    fn name(&self) -> &'static str {
        "sj"
    }
    fn select(&self, sample: &[f64]) -> Result<Bandwidth> {
        let mut sorted = sample.to_vec();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        if sorted.len() < 10 {
            return Err(Error::insufficient(format!(
                "Sheather-Jones bandwidth needs at least 10 distinct values, got {}",
                sorted.len()
            )));
        }
        match self.gaussian_bandwidth(sample)? {
            Some(h) => Ok(Bandwidth {
                h: h * gauss_to_epanechnikov(),
                fallback: false,
            }),
            None => Ok(Bandwidth {
                h: silverman(sample)?,
                fallback: true,
            }),
        }
    }
}

/// Sheather–Jones bandwidth on the Epanechnikov scale.
pub fn sj_bandwidth(sample: &[f64]) -> Result<Bandwidth> {
    SheatherJones::default().select(sample)
}
