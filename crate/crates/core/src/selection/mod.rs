//! The continuation (selection) function: a logit of phase III follow-up
//! on the phase II z-score, censoring dummies, controls and fixed effects,
//! with condition-clustered covariance.

mod design;
mod logit;

use nalgebra::DVector;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

pub use design::{build_design, design_row, DesignSchema, SelectionDesignRow, SeparatedColumn, BASE_COLUMNS};
pub use logit::{cluster_sandwich, fit_logit, logistic, SelectionModel, LL_REL_TOL, MAX_ITER, SCORE_TOL};

/// Coefficients compared across samples by default.
pub const WALD_COEFS: [&str; 4] = ["z_ph2", "d1", "d2", "const"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaldTest {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Wald test of equality of the named coefficients across two
/// independently estimated models.
pub fn wald_equality(a: &SelectionModel, b: &SelectionModel, names: &[&str]) -> Result<WaldTest> {
    if !a.converged || !b.converged {
        return Err(Error::Domain("Wald test requires two converged models".into()));
    }
    let idx = |m: &SelectionModel, name: &str| {
        m.schema
            .index_of(name)
            .ok_or_else(|| Error::Domain(format!("coefficient `{name}` missing from a model")))
    };
    let ia: Vec<usize> = names.iter().map(|n| idx(a, n)).collect::<Result<_>>()?;
    let ib: Vec<usize> = names.iter().map(|n| idx(b, n)).collect::<Result<_>>()?;
    let q = names.len();
    let diff = DVector::from_fn(q, |i, _| a.coefficients[ia[i]] - b.coefficients[ib[i]]);
    let v = nalgebra::DMatrix::from_fn(q, q, |i, j| {
        a.vcov_clustered[(ia[i], ia[j])] + b.vcov_clustered[(ib[i], ib[j])]
    });
    let chol = v
        .cholesky()
        .ok_or_else(|| Error::Singular("combined covariance of the Wald test".into()))?;
    let statistic = diff.dot(&chol.solve(&diff));
    let p_value = ChiSquared::new(q as f64)
        .map_err(|e| Error::Domain(e.to_string()))?
        .sf(statistic);
    Ok(WaldTest {
        statistic,
        df: q,
        p_value,
    })
}

/// Predicted continuation probabilities, with warnings for fixed-effect
/// levels the model has not seen. Rows of a level set aside for perfect
/// prediction get that level's outcome.
pub fn predict(model: &SelectionModel, rows: &[SelectionDesignRow]) -> (Vec<f64>, Vec<String>) {
    let (ordinary, perfect): (Vec<_>, Vec<_>) = rows.iter().enumerate().partition(|(_, r)| {
        !model.perfectly_predicted.iter().any(|(sep, _)| sep.covers(r))
    });
    let fit_rows: Vec<SelectionDesignRow> = ordinary.iter().map(|(_, r)| (*r).clone()).collect();
    let (x, warnings) = model.schema.matrix(&fit_rows);
    let eta = x * &model.coefficients;
    let mut out = vec![0.0; rows.len()];
    for ((i, _), e) in ordinary.iter().zip(eta.iter()) {
        out[*i] = logit::logistic(*e);
    }
    for (i, r) in perfect {
        let (_, y) = model.perfectly_predicted.iter().find(|(sep, _)| sep.covers(r)).unwrap();
        out[i] = f64::from(u8::from(*y));
    }
    (out, warnings)
}

/// Significance stars from two-sided normal p-values: *** < 0.01,
/// ** < 0.05, * < 0.1.
pub fn stars(estimate: f64, std_err: f64) -> &'static str {
    let p = crate::pz::two_sided_p(estimate / std_err);
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.1 {
        "*"
    } else {
        ""
    }
}
