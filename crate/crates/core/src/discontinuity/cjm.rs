//! Local polynomial density estimation on the empirical CDF, without
//! pre-binning, in the manner of Cattaneo, Jansson and Ma (2020).
//!
//! On each side of the cutoff the full-sample empirical CDF is regressed
//! on powers of (x − c) with triangular weights; the linear coefficient is
//! the boundary density. The reported densities come from an order p+1
//! fit at the order-p MSE-optimal bandwidth (robust bias correction), and
//! the variance is the plug-in of the estimator's influence through the
//! empirical CDF.

use nalgebra::{DMatrix, DVector};

use super::{DensityTest, DiscontinuityResult, Side};
use crate::error::{Error, Result};

pub const MIN_SIDE_OBS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cjm {
    pub order: usize,
    pub h_left: Option<f64>,
    pub h_right: Option<f64>,
}

impl Default for Cjm {
    fn default() -> Self {
        Cjm {
            order: 2,
            h_left: None,
            h_right: None,
        }
    }
}

impl Cjm {
    pub fn validate(&self) -> Result<()> {
        if !(2..=6).contains(&self.order) {
            return Err(Error::config(format!("polynomial order {} outside [2, 6]", self.order)));
        }
        for h in [self.h_left, self.h_right].into_iter().flatten() {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::config(format!("bandwidth override must be positive, got {h}")));
            }
        }
        Ok(())
    }
}

impl DensityTest for Cjm {
    fn name(&self) -> &'static str {
        "cjm"
    }
    fn test(&self, sample: &[f64], cutoff: f64) -> Result<DiscontinuityResult> {
        self.validate()?;
        let data = Data::new(sample, cutoff)?;
        let left = data.side_estimate(Side::Left, self.order, self.h_left)?;
        let right = data.side_estimate(Side::Right, self.order, self.h_right)?;
        let n = data.sorted.len() as f64;
        // Influence functions of the two slopes have disjoint support, so
        // their centred covariance is −f_L f_R / (n − 1).
        let cov = -left.f * right.f / (n - 1.0);
        let variance = left.var + right.var - 2.0 * cov;
        Ok(DiscontinuityResult::from_sides(
            cutoff,
            (left.f, left.h, left.n_window),
            (right.f, right.h, right.n_window),
            variance,
        ))
    }
}

pub fn cjm_test(sample: &[f64], cutoff: f64, poly_order: usize) -> Result<DiscontinuityResult> {
    Cjm {
        order: poly_order,
        ..Cjm::default()
    }
    .test(sample, cutoff)
}

struct Data {
    sorted: Vec<f64>,
    cutoff: f64,
    /// Index of the first observation ≥ cutoff.
    split: usize,
    sd: f64,
}

struct SideFit {
    f: f64,
    var: f64,
    h: f64,
    n_window: usize,
}

impl Data {
    fn new(sample: &[f64], cutoff: f64) -> Result<Data> {
        if !cutoff.is_finite() || sample.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite value in discontinuity test input".into()));
        }
        let mut sorted = sample.to_vec();
        sorted.sort_by(f64::total_cmp);
        let split = sorted.partition_point(|&x| x < cutoff);
        for (side, count, values) in [
            (Side::Left, split, &sorted[..split]),
            (Side::Right, sorted.len() - split, &sorted[split..]),
        ] {
            if count < MIN_SIDE_OBS {
                return Err(Error::insufficient(format!(
                    "{} side of cutoff {cutoff} has {count} observations, need at least {MIN_SIDE_OBS}",
                    side.label()
                )));
            }
            if values.first() == values.last() {
                return Err(Error::insufficient(format!(
                    "{} side of cutoff {cutoff} is degenerate (all values equal)",
                    side.label()
                )));
            }
        }
        let n = sorted.len() as f64;
        let mean = sorted.iter().sum::<f64>() / n;
        let sd = (sorted.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        Ok(Data {
            sorted,
            cutoff,
            split,
            sd,
        })
    }

    fn ecdf_at_index(&self, j: usize) -> f64 {
        // #{X ≤ x_j} / n, ties included
        let x = self.sorted[j];
        let upper = j + self.sorted[j..].partition_point(|&v| v <= x);
        upper as f64 / self.sorted.len() as f64
    }

    /// Observations on `side` ordered by distance from the cutoff.
    fn side_slice(&self, side: Side) -> &[f64] {
        match side {
            Side::Left => &self.sorted[..self.split],
            Side::Right => &self.sorted[self.split..],
        }
    }

    fn extent(&self, side: Side) -> f64 {
        match side {
            Side::Left => self.cutoff - self.sorted[0],
            Side::Right => self.sorted[self.sorted.len() - 1] - self.cutoff,
        }
    }

    /// Index range of the observations within distance h on `side`.
    fn window(&self, side: Side, h: f64) -> std::ops::Range<usize> {
        match side {
            Side::Left => {
                let lo = self.sorted.partition_point(|&x| x < self.cutoff - h);
                lo..self.split
            }
            Side::Right => {
                let hi = self.sorted.partition_point(|&x| x <= self.cutoff + h);
                self.split..hi
            }
        }
    }

    /// Weighted local polynomial fit of order `p` at bandwidth `h`:
    /// boundary density and its variance.
    fn fit(&self, side: Side, p: usize, h: f64) -> Result<(f64, f64, usize)> {
        let range = self.window(side, h);
        let m = range.len();
        if m < p + 2 {
            return Err(Error::insufficient(format!(
                "{} side: {m} observations within bandwidth {h}, need at least {}",
                side.label(),
                p + 2
            )));
        }
        let k = p + 1;
        let mut a = DMatrix::<f64>::zeros(k, k);
        let mut rhs = DVector::<f64>::zeros(k);
        let mut wr: Vec<DVector<f64>> = Vec::with_capacity(m);
        for j in range.clone() {
            let t = (self.sorted[j] - self.cutoff) / h;
            let w = 1.0 - t.abs();
            let r = DVector::from_iterator(k, (0..k).map(|e| t.powi(e as i32)));
            a.ger(w, &r, &r, 1.0);
            rhs.axpy(w * self.ecdf_at_index(j), &r, 1.0);
            wr.push(r * w);
        }
        let lu = a.clone().lu();
        let ainv = lu
            .try_inverse()
            .ok_or_else(|| Error::Singular(format!("{} side local polynomial design", side.label())))?;
        let beta = &ainv * &rhs;
        let f = beta[1] / h;
        // l(x) = e₁' A⁻¹ Σ_{x_j ≥ x} w_j r_j / h, the slope's influence
        let e1_ainv: Vec<f64> = (0..k).map(|c| ainv[(1, c)]).collect();
        let proj: Vec<f64> = wr
            .iter()
            .map(|v| v.iter().zip(&e1_ainv).map(|(a, b)| a * b).sum::<f64>() / h)
            .collect();
        let mut suffix = vec![0.0; m + 1];
        for j in (0..m).rev() {
            suffix[j] = suffix[j + 1] + proj[j];
        }
        let n = self.sorted.len();
        // observations below the window see every design point (l = suffix[0],
        // zero up to rounding); above the window none (l = 0)
        let below = range.start;
        let mut sum = below as f64 * suffix[0];
        let mut sum_sq = below as f64 * suffix[0] * suffix[0];
        let mut jj = 0;
        for i in range.clone() {
            let x = self.sorted[i];
            while jj < m && self.sorted[range.start + jj] < x {
                jj += 1;
            }
            let l = suffix[jj];
            sum += l;
            sum_sq += l * l;
        }
        let nf = n as f64;
        let mean = sum / nf;
        let var = (sum_sq - nf * mean * mean) / (nf * (nf - 1.0));
        Ok((f, var, m))
    }

    fn side_estimate(&self, side: Side, p: usize, h_override: Option<f64>) -> Result<SideFit> {
        let h = match h_override {
            Some(h) => h,
            None => self.mse_bandwidth(side, p)?,
        };
        let (f, var, n_window) = self.fit(side, p + 1, h)?;
        Ok(SideFit { f, var, h, n_window })
    }

    /// Plug-in MSE-optimal bandwidth for the order-p slope on one side.
    fn mse_bandwidth(&self, side: Side, p: usize) -> Result<f64> {
        let n = self.sorted.len() as f64;
        let extent = self.extent(side);
        let pts = self.side_slice(side);
        let near = match side {
            Side::Left => self.cutoff - pts[pts.len() - 20.min(pts.len())],
            Side::Right => pts[19.min(pts.len() - 1)] - self.cutoff,
        };
        let h_min = near.min(extent);
        let h_pilot = (2.0 * self.sd * n.powf(-0.2)).clamp(h_min, extent);
        let (_, v_pilot, _) = self.fit(side, p, h_pilot)?;

        let deriv = self.higher_derivative(side, p, extent.min(3.0 * self.sd))?;
        let b = kernel_bias_constant(side, p)?;
        let factorial: f64 = (1..=p + 1).map(|i| i as f64).product();
        let bias_const = deriv / factorial * b;
        let h = if bias_const.abs() > 0.0 && v_pilot > 0.0 {
            (v_pilot * h_pilot / (2.0 * p as f64 * bias_const * bias_const))
                .powf(1.0 / (2 * p + 1) as f64)
        } else {
            extent
        };
        Ok(h.clamp(h_min, extent))
    }

    /// F^(p+1)(c) from an unweighted order p+2 polynomial fit of the
    /// empirical CDF within `span` of the cutoff.
    fn higher_derivative(&self, side: Side, p: usize, span: f64) -> Result<f64> {
        let range = self.window(side, span);
        let k = p + 3;
        if range.len() < k + 1 {
            return Err(Error::insufficient(format!(
                "{} side: too few observations to estimate the bias term",
                side.label()
            )));
        }
        let mut a = DMatrix::<f64>::zeros(k, k);
        let mut rhs = DVector::<f64>::zeros(k);
        for j in range {
            let t = (self.sorted[j] - self.cutoff) / span;
            let r = DVector::from_iterator(k, (0..k).map(|e| t.powi(e as i32)));
            a.ger(1.0, &r, &r, 1.0);
            rhs.axpy(self.ecdf_at_index(j), &r, 1.0);
        }
        let beta = a
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Singular(format!("{} side pilot polynomial", side.label())))?;
        let factorial: f64 = (1..=p + 1).map(|i| i as f64).product();
        Ok(beta[p + 1] * factorial / span.powi(p as i32 + 1))
    }
}

/// e₁' S⁻¹ c for the one-sided triangular kernel, where S holds the kernel
/// moments of the order-p basis and c those of t^(p+1).
fn kernel_bias_constant(side: Side, p: usize) -> Result<f64> {
    // ∫_0^1 t^m (1 − t) dt = 1/((m+1)(m+2)); the left side flips odd moments
    let moment = |m: usize| {
        let v = 1.0 / ((m + 1) * (m + 2)) as f64;
        match side {
            Side::Right => v,
            Side::Left if m % 2 == 1 => -v,
            Side::Left => v,
        }
    };
    let k = p + 1;
    let s = DMatrix::from_fn(k, k, |i, j| moment(i + j));
    let c = DVector::from_fn(k, |i, _| moment(i + p + 1));
    let sol = s
        .lu()
        .solve(&c)
        .ok_or_else(|| Error::Singular("kernel moment matrix".into()))?;
    Ok(sol[1])
}
