use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::design::{DesignSchema, SelectionDesignRow, SeparatedColumn};
use crate::error::{Error, Result};
use crate::registry::ConditionCategory;

pub const MAX_ITER: usize = 100;
pub const SCORE_TOL: f64 = 1e-8;
pub const LL_REL_TOL: f64 = 1e-12;

/// Fitted continuation logit with cluster-robust covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionModel {
    pub schema: DesignSchema,
    pub coefficients: DVector<f64>,
    /// CR1 sandwich, clusters = condition category.
    pub vcov_clustered: DMatrix<f64>,
    /// Inverse information (model-based).
    pub vcov_model: DMatrix<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub n_obs: usize,
    pub n_trials: usize,
    pub n_clusters: usize,
    pub log_likelihood: f64,
    pub mean_dep_var: f64,
    /// Score at the returned coefficients.
    pub score: DVector<f64>,
    /// Fixed-effect levels set aside for perfect prediction, with the
    /// outcome they predict.
    pub perfectly_predicted: Vec<(SeparatedColumn, bool)>,
    pub warnings: Vec<String>,
}

impl SelectionModel {
    pub fn names(&self) -> Vec<String> {
        self.schema.names()
    }

    /// Estimate and clustered standard error of a named coefficient.
    pub fn coefficient(&self, name: &str) -> Option<(f64, f64)> {
        self.schema
            .index_of(name)
            .map(|k| (self.coefficients[k], self.vcov_clustered[(k, k)].max(0.0).sqrt()))
    }
}

pub fn logistic(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^η) without overflow.
fn softplus(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

fn log_likelihood(x: &DMatrix<f64>, y: &[f64], beta: &DVector<f64>) -> f64 {
    let eta = x * beta;
    eta.iter().zip(y).map(|(e, yi)| yi * e - softplus(*e)).sum()
}

/// Maximum likelihood logit by Newton-Raphson (IRLS) with step halving.
pub fn fit_logit(rows: &[SelectionDesignRow]) -> Result<SelectionModel> {
    let n_pos = rows.iter().filter(|r| r.continuation).count();
    if n_pos == 0 || n_pos == rows.len() {
        return Err(Error::insufficient(
            "the selection function needs both continued and non-continued observations",
        ));
    }
    // A fixed-effect level with a constant outcome is perfectly predicted:
    // its rows are set aside and its dummy dropped, as in standard logit
    // software. Separation on any other column is an error.
    let mut set_aside: Vec<String> = Vec::new();
    let mut perfectly_predicted = Vec::new();
    let mut owned: Option<Vec<SelectionDesignRow>> = None;
    let schema = loop {
        let current = owned.as_deref().unwrap_or(rows);
        let schema = DesignSchema::build(current)?;
        match schema.separated_column(current) {
            None => break schema,
            Some(sep) if sep.is_fixed_effect_level() => {
                let kept: Vec<SelectionDesignRow> =
                    current.iter().filter(|r| !sep.covers(r)).cloned().collect();
                set_aside.push(format!(
                    "{} predicts the outcome perfectly; dropped with {} observations",
                    sep.name,
                    current.len() - kept.len()
                ));
                let outcome = current.iter().find(|r| sep.covers(r)).is_some_and(|r| r.continuation);
                perfectly_predicted.push((sep, outcome));
                owned = Some(kept);
            }
            Some(sep) => return Err(Error::Separation(sep.name)),
        }
    };
    let rows = owned.as_deref().unwrap_or(rows);
    let n_pos = rows.iter().filter(|r| r.continuation).count();
    if n_pos == 0 || n_pos == rows.len() {
        // the fixed effects jointly separate the outcome
        return Err(Error::Separation(perfectly_predicted[0].0.name.clone()));
    }
    let mut warnings: Vec<String> = schema
        .dropped
        .iter()
        .map(|c| format!("dropped collinear column {c}"))
        .collect();
    warnings.extend(set_aside);
    let (x, w) = schema.matrix(rows);
    warnings.extend(w);
    let y: Vec<f64> = rows.iter().map(|r| f64::from(u8::from(r.continuation))).collect();
    let n = rows.len();
    let k = schema.len();
    if n <= k {
        return Err(Error::insufficient(format!("{n} observations for {k} coefficients")));
    }

    let mut beta = DVector::<f64>::zeros(k);
    let mut ll = log_likelihood(&x, &y, &beta);
    let mut converged = false;
    let mut iterations = 0;
    let (mut score, mut info) = score_info(&x, &y, &beta);
    while iterations < MAX_ITER {
        if score.amax() < SCORE_TOL {
            converged = true;
            break;
        }
        iterations += 1;
        let step = info
            .clone()
            .cholesky()
            .map(|c| c.solve(&score))
            .or_else(|| info.clone().lu().solve(&score))
            .ok_or_else(|| Error::Singular("logit information matrix".into()))?;
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let cand = &beta + &step * t;
            let ll_c = log_likelihood(&x, &y, &cand);
            if ll_c.is_finite() && ll_c >= ll - 1e-12 * ll.abs() {
                accepted = Some((cand, ll_c));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, ll_c)) = accepted else { break };
        let rel = (ll_c - ll).abs() / ll.abs().max(1e-300);
        beta = cand;
        ll = ll_c;
        (score, info) = score_info(&x, &y, &beta);
        if rel < LL_REL_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        warnings.push(format!("logit did not converge in {MAX_ITER} iterations"));
    }
    let vcov_model = info
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .or_else(|| info.clone().try_inverse())
        .ok_or_else(|| Error::Singular("logit information matrix".into()))?;
    for j in 0..k {
        let se = vcov_model[(j, j)].max(0.0).sqrt();
        if beta[j].abs() > 15.0 && se > 100.0 {
            return Err(Error::Separation(schema.names()[j].clone()));
        }
    }
    let clusters: Vec<ConditionCategory> = rows.iter().map(|r| r.cluster()).collect();
    let vcov_clustered = cluster_sandwich(&x, &y, &beta, &vcov_model, &clusters)?;
    let n_trials = rows
        .iter()
        .map(|r| r.trial_id.as_str())
        .collect::<std::collections::BTreeSet<_>>()
        .len();
    let n_clusters = clusters.iter().collect::<std::collections::BTreeSet<_>>().len();
    Ok(SelectionModel {
        schema,
        coefficients: beta,
        vcov_clustered,
        vcov_model,
        converged,
        iterations,
        n_obs: n,
        n_trials,
        n_clusters,
        log_likelihood: ll,
        mean_dep_var: n_pos as f64 / n as f64,
        score,
        perfectly_predicted,
        warnings,
    })
}

fn score_info(x: &DMatrix<f64>, y: &[f64], beta: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eta = x * beta;
    let k = x.ncols();
    let mut score = DVector::zeros(k);
    let mut xw = x.clone();
    for i in 0..x.nrows() {
        let p = logistic(eta[i]);
        let resid = y[i] - p;
        let w = p * (1.0 - p);
        for j in 0..k {
            score[j] += x[(i, j)] * resid;
            xw[(i, j)] *= w;
        }
    }
    let info = x.transpose() * xw;
    (score, info)
}

/// CR1 cluster-robust covariance B·(Σ_g s_g s_g')·B scaled by
/// G/(G−1)·(N−1)/(N−K), where B is the inverse information and s_g the
/// score summed within cluster g.
pub fn cluster_sandwich<C: Ord + Clone>(
    x: &DMatrix<f64>,
    y: &[f64],
    beta: &DVector<f64>,
    bread: &DMatrix<f64>,
    clusters: &[C],
) -> Result<DMatrix<f64>> {
    let (n, k) = (x.nrows(), x.ncols());
    let eta = x * beta;
    let mut sums: BTreeMap<C, DVector<f64>> = BTreeMap::new();
    for i in 0..n {
        let r = y[i] - logistic(eta[i]);
        let s = sums.entry(clusters[i].clone()).or_insert_with(|| DVector::zeros(k));
        for j in 0..k {
            s[j] += x[(i, j)] * r;
        }
    }
    let g = sums.len();
    if g < 2 {
        return Err(Error::insufficient("cluster-robust covariance needs at least 2 clusters"));
    }
    let mut meat = DMatrix::zeros(k, k);
    for s in sums.values() {
        meat.ger(1.0, s, s, 1.0);
    }
    let (gf, nf, kf) = (g as f64, n as f64, k as f64);
    let factor = gf / (gf - 1.0) * (nf - 1.0) / (nf - kf);
    let v = bread * meat * bread * factor;
    Ok((&v + v.transpose()) * 0.5)
}
