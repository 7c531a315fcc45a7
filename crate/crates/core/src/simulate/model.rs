//! The continuation model: posterior over the true effect after phase II,
//! expected phase III payoff, and the continuation index.

use nalgebra::{DMatrix, SymmetricEigen};
use std::sync::OnceLock;

use crate::pz::{norm_cdf, norm_pdf};

/// Number of Gauss-Hermite nodes used for the expected phase III payoff.
pub const GH_NODES: usize = 32;

/// Physicists' Gauss-Hermite rule (weight e^{−x²}) by Golub-Welsch.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        let b = (i as f64 / 2.0).sqrt();
        jacobi[(i, i - 1)] = b;
        jacobi[(i - 1, i)] = b;
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let v0 = eig.eigenvectors[(0, k)];
            (eig.eigenvalues[k], std::f64::consts::PI.sqrt() * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

fn gh32() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_hermite(GH_NODES))
}

/// Normal prior on the true standardized effect θ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectPrior {
    pub mean: f64,
    pub sd: f64,
}

/// Signal-to-noise factor of a two-arm trial with `enrollment` patients:
/// z ~ N(θ·√m/2, 1).
pub fn noncentrality(enrollment: f64) -> f64 {
    enrollment.sqrt() / 2.0
}

impl EffectPrior {
    /// Posterior mean and sd of θ after observing z ~ N(θ·a, 1).
    pub fn posterior(&self, z: f64, a: f64) -> (f64, f64) {
        if self.sd == 0.0 {
            return (self.mean, 0.0);
        }
        let prec = 1.0 / (self.sd * self.sd) + a * a;
        let mean = (self.mean / (self.sd * self.sd) + a * z) / prec;
        (mean, prec.recip().sqrt())
    }
}

/// E[z·1(z ≥ c)] for z ~ N(m, s²).
pub fn truncated_first_moment(m: f64, s: f64, c: f64) -> f64 {
    if s == 0.0 {
        return if m >= c { m } else { 0.0 };
    }
    let u = (c - m) / s;
    m * norm_cdf(-u) + s * norm_pdf(u)
}

/// Phase III payoff V(z₃) = slope·z₃ above the threshold and 0 below.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Payoff {
    pub slope: f64,
    pub threshold: f64,
}

impl Payoff {
    pub fn value(&self, z3: f64) -> f64 {
        if z3 >= self.threshold {
            self.slope * z3
        } else {
            0.0
        }
    }

    /// E[V(z₃) | θ] with z₃ ~ N(θ·a₃, 1).
    pub fn expected_given_effect(&self, theta: f64, a3: f64) -> f64 {
        self.slope * truncated_first_moment(theta * a3, 1.0, self.threshold)
    }

    /// E[V(z₃) | I₂] by Gauss-Hermite quadrature over the posterior of θ.
    pub fn expected_quadrature(&self, post_mean: f64, post_sd: f64, a3: f64) -> f64 {
        let (x, w) = gh32();
        let scale = std::f64::consts::SQRT_2 * post_sd;
        x.iter()
            .zip(w)
            .map(|(&xi, &wi)| wi * self.expected_given_effect(post_mean + scale * xi, a3))
            .sum::<f64>()
            / std::f64::consts::PI.sqrt()
    }

    /// Same expectation in closed form: z₃ | I₂ ~ N(a₃μ, 1 + a₃²σ²).
    pub fn expected_closed_form(&self, post_mean: f64, post_sd: f64, a3: f64) -> f64 {
        let s = (1.0 + a3 * a3 * post_sd * post_sd).sqrt();
        self.slope * truncated_first_moment(a3 * post_mean, s, self.threshold)
    }
}

/// Deterministic part of the value difference between continuing and
/// stopping after phase II:
/// I₂ = −c + δ·E[V(z₃)|I₂] − (v₀ + v₁·z₂) + shifters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuationModel {
    pub prior: EffectPrior,
    pub payoff: Payoff,
    pub cost: f64,
    pub discount: f64,
    pub outside_intercept: f64,
    pub outside_slope: f64,
    pub shock_scale: f64,
}

impl ContinuationModel {
    pub fn index(&self, z2: f64, enroll2: f64, enroll3: f64, shifter: f64) -> f64 {
        let (m, s) = self.prior.posterior(z2, noncentrality(enroll2));
        let ev = self.payoff.expected_quadrature(m, s, noncentrality(enroll3));
        -self.cost + self.discount * ev - (self.outside_intercept + self.outside_slope * z2) + shifter
    }

    /// Continuation probability implied by iid extreme-value shocks.
    pub fn probability(&self, index: f64) -> f64 {
        crate::selection::logistic(index / self.shock_scale)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_rule_integrates_moments() {
        let (x, w) = gauss_hermite(GH_NODES);
        let pi_sqrt = std::f64::consts::PI.sqrt();
        let m0: f64 = w.iter().sum();
        let m2: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
        let m4: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(4)).sum();
        assert!((m0 - pi_sqrt).abs() < 1e-12);
        assert!((m2 - pi_sqrt / 2.0).abs() < 1e-12);
        assert!((m4 - 3.0 * pi_sqrt / 4.0).abs() < 1e-11);
    }

    #[test]
    fn quadrature_matches_closed_form() {
        let p = Payoff {
            slope: 1.3,
            threshold: 1.96,
        };
        for &(m, s, a3) in &[(0.2, 0.1, 10.0), (0.0, 0.3, 5.0), (0.5, 0.05, 12.0), (-0.1, 0.2, 8.0)] {
            let q = p.expected_quadrature(m, s, a3);
            let c = p.expected_closed_form(m, s, a3);
            assert!((q - c).abs() < 1e-8 * c.abs().max(1.0), "{q} vs {c}");
        }
    }

    #[test]
    fn posterior_is_precision_weighted() {
        let prior = EffectPrior { mean: 0.2, sd: 0.25 };
        let (m, s) = prior.posterior(2.0, 5.0);
        let prec = 16.0 + 25.0;
        assert!((m - (0.2 * 16.0 + 10.0) / prec).abs() < 1e-14);
        assert!((s - prec.recip().sqrt()).abs() < 1e-14);
        let degenerate = EffectPrior { mean: 0.0, sd: 0.0 };
        assert_eq!(degenerate.posterior(3.0, 5.0), (0.0, 0.0));
    }
}
