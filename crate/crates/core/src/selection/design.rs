use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linker::LinkReport;
use crate::registry::{ConditionCategory, Registry};
use crate::sample::ScoredOutcome;

/// One trial-outcome observation of the selection function.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionDesignRow {
    pub trial_id: String,
    pub outcome_index: usize,
    pub continuation: bool,
    /// Zero when d1 or d2 is set.
    pub z_ph2: f64,
    pub d1: bool,
    pub d2: bool,
    pub sqrt_enroll: f64,
    pub placebo: bool,
    pub mht_adjusted: bool,
    pub condition_category: ConditionCategory,
    pub completion_year: Option<i32>,
}

impl SelectionDesignRow {
    /// Cluster key: the condition category.
    pub fn cluster(&self) -> ConditionCategory {
        self.condition_category
    }
}

/// Rows for the outcomes in `scored` whose trial has a link result.
/// Other-censors must already be imputed.
pub fn build_design(
    reg: &Registry,
    scored: &[ScoredOutcome],
    links: &LinkReport,
) -> Result<Vec<SelectionDesignRow>> {
    let mut rows = Vec::new();
    for o in scored {
        let Some(continuation) = links.continued(&o.trial_id) else {
            continue;
        };
        let t = &reg.trials()[o.trial];
        rows.push(design_row(t, o, continuation)?);
    }
    if rows.is_empty() {
        return Err(Error::insufficient("selection design is empty"));
    }
    Ok(rows)
}

/// The design row of one outcome, with a given continuation label.
pub fn design_row(
    t: &crate::registry::TrialRecord,
    o: &ScoredOutcome,
    continuation: bool,
) -> Result<SelectionDesignRow> {
    use chrono::Datelike;
    Ok(SelectionDesignRow {
        trial_id: o.trial_id.clone(),
        outcome_index: o.outcome_index,
        continuation,
        z_ph2: o.z.regression_value()?,
        d1: o.z.is_d1(),
        d2: o.z.is_d2(),
        sqrt_enroll: (t.enrollment as f64).sqrt(),
        placebo: t.placebo_comparator,
        mht_adjusted: o.mht_adjusted,
        condition_category: t.condition_category,
        completion_year: t.completion_date.map(|d| d.year()),
    })
}

pub const BASE_COLUMNS: [&str; 7] = [
    "const",
    "z_ph2",
    "d1",
    "d2",
    "sqrt_enroll",
    "placebo",
    "mht_adjusted",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Column {
    Base(usize),
    Cond(ConditionCategory),
    Year(Option<i32>),
}

/// Column layout of a fitted selection function: kept columns and the
/// fixed-effect levels with their references.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSchema {
    columns: Vec<Column>,
    pub cond_reference: ConditionCategory,
    pub year_reference: Option<i32>,
    /// Columns removed as collinear, in design order.
    pub dropped: Vec<String>,
}

fn column_name(c: &Column) -> String {
    match c {
        Column::Base(i) => BASE_COLUMNS[*i].to_string(),
        Column::Cond(cat) => format!("cond:{}", cat.code()),
        Column::Year(Some(y)) => format!("year:{y}"),
        Column::Year(None) => "year:missing".to_string(),
    }
}

fn most_frequent<K: Ord + Copy>(keys: impl Iterator<Item = K>) -> Option<K> {
    let mut counts: BTreeMap<K, usize> = BTreeMap::new();
    for k in keys {
        *counts.entry(k).or_insert(0) += 1;
    }
    // max count; among equals the smallest key
    counts
        .into_iter()
        .fold(None, |best: Option<(K, usize)>, (k, c)| match best {
            Some((_, bc)) if bc >= c => best,
            _ => Some((k, c)),
        })
        .map(|(k, _)| k)
}

impl DesignSchema {
    /// Lays out columns for `rows`: the base regressors, then one dummy per
    /// non-reference condition category and completion year. Reference
    /// levels are the most frequent ones. Columns that are linear
    /// combinations of earlier ones are dropped.
    pub fn build(rows: &[SelectionDesignRow]) -> Result<DesignSchema> {
        if rows.is_empty() {
            return Err(Error::insufficient("selection design is empty"));
        }
        let cond_reference = most_frequent(rows.iter().map(|r| r.condition_category)).unwrap();
        let year_reference = most_frequent(rows.iter().map(|r| r.completion_year)).unwrap();
        let mut candidates: Vec<Column> = (0..BASE_COLUMNS.len()).map(Column::Base).collect();
        let mut conds: Vec<ConditionCategory> = rows.iter().map(|r| r.condition_category).collect();
        conds.sort();
        conds.dedup();
        candidates.extend(conds.into_iter().filter(|c| *c != cond_reference).map(Column::Cond));
        let mut years: Vec<Option<i32>> = rows.iter().map(|r| r.completion_year).collect();
        years.sort();
        years.dedup();
        candidates.extend(years.into_iter().filter(|y| *y != year_reference).map(Column::Year));

        let full = DesignSchema {
            columns: candidates.clone(),
            cond_reference,
            year_reference,
            dropped: Vec::new(),
        };
        let x = full.raw_matrix(rows);
        // Gram-Schmidt: keep a column when its residual on the kept ones
        // is not negligible
        let n = x.nrows();
        let mut basis: Vec<Vec<f64>> = Vec::new();
        let mut kept = Vec::new();
        let mut dropped = Vec::new();
        for (j, col) in candidates.iter().enumerate() {
            let mut v: Vec<f64> = (0..n).map(|i| x[(i, j)]).collect();
            let norm0 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            for _ in 0..2 {
                for b in &basis {
                    let dot: f64 = v.iter().zip(b).map(|(a, b)| a * b).sum();
                    for (vi, bi) in v.iter_mut().zip(b) {
                        *vi -= dot * bi;
                    }
                }
            }
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm0 > 0.0 && norm > 1e-9 * norm0.max(1.0) {
                basis.push(v.iter().map(|a| a / norm).collect());
                kept.push(*col);
            } else {
                dropped.push(column_name(col));
            }
        }
        Ok(DesignSchema {
            columns: kept,
            cond_reference,
            year_reference,
            dropped,
        })
    }

    pub fn names(&self) -> Vec<String> {
        self.columns.iter().map(column_name).collect()
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| column_name(c) == name)
    }

    fn raw_matrix(&self, rows: &[SelectionDesignRow]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), self.columns.len(), |i, j| {
            let r = &rows[i];
            match self.columns[j] {
                Column::Base(0) => 1.0,
                Column::Base(1) => r.z_ph2,
                Column::Base(2) => f64::from(u8::from(r.d1)),
                Column::Base(3) => f64::from(u8::from(r.d2)),
                Column::Base(4) => r.sqrt_enroll,
                Column::Base(5) => f64::from(u8::from(r.placebo)),
                Column::Base(_) => f64::from(u8::from(r.mht_adjusted)),
                Column::Cond(c) => f64::from(u8::from(r.condition_category == c)),
                Column::Year(y) => f64::from(u8::from(r.completion_year == y)),
            }
        })
    }

    /// Design matrix for `rows`. Levels the schema has not seen fall to
    /// the reference level; each such level is reported once.
    pub fn matrix(&self, rows: &[SelectionDesignRow]) -> (DMatrix<f64>, Vec<String>) {
        let mut warnings = Vec::new();
        let known_cond = |c: ConditionCategory| {
            c == self.cond_reference || self.columns.contains(&Column::Cond(c))
        };
        let known_year =
            |y: Option<i32>| y == self.year_reference || self.columns.contains(&Column::Year(y));
        let mut seen = std::collections::BTreeSet::new();
        for r in rows {
            if !known_cond(r.condition_category) && seen.insert(column_name(&Column::Cond(r.condition_category))) {
                warnings.push(format!(
                    "condition category {} not in the fitted model; using reference {}",
                    r.condition_category.code(),
                    self.cond_reference.code()
                ));
            }
            if !known_year(r.completion_year) && seen.insert(column_name(&Column::Year(r.completion_year))) {
                warnings.push(format!(
                    "{} not in the fitted model; using the reference year",
                    column_name(&Column::Year(r.completion_year))
                ));
            }
        }
        (self.raw_matrix(rows), warnings)
    }

    /// First binary column (other than the constant) on whose support, or
    /// off whose support, the outcome does not vary: the likelihood has no
    /// finite maximum.
    pub fn separated_column(&self, rows: &[SelectionDesignRow]) -> Option<SeparatedColumn> {
        let x = self.raw_matrix(rows);
        for (j, col) in self.columns.iter().enumerate() {
            if matches!(col, Column::Base(0) | Column::Base(1) | Column::Base(4)) {
                continue;
            }
            let fixed_effect = matches!(col, Column::Cond(_) | Column::Year(_));
            let mut ones = rows.iter().enumerate().filter(|(i, _)| x[(*i, j)] != 0.0);
            if let Some((_, first)) = ones.next() {
                if ones.all(|(_, r)| r.continuation == first.continuation) {
                    return Some(SeparatedColumn {
                        name: column_name(col),
                        level: fixed_effect.then_some(*col),
                    });
                }
            }
            let mut zeros = rows.iter().enumerate().filter(|(i, _)| x[(*i, j)] == 0.0);
            if let Some((_, first)) = zeros.next() {
                if zeros.all(|(_, r)| r.continuation == first.continuation) {
                    return Some(SeparatedColumn { name: column_name(col), level: None });
                }
            }
        }
        None
    }
}

/// A column that separates the outcome. `level` is set when the column is a
/// fixed-effect dummy whose own rows are perfectly predicted; those rows can
/// be set aside and the column dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparatedColumn {
    pub name: String,
    level: Option<Column>,
}

impl SeparatedColumn {
    pub fn is_fixed_effect_level(&self) -> bool {
        self.level.is_some()
    }

    /// Whether `row` belongs to the separating fixed-effect level.
    pub fn covers(&self, row: &SelectionDesignRow) -> bool {
        match self.level {
            Some(Column::Cond(c)) => row.condition_category == c,
            Some(Column::Year(y)) => row.completion_year == y,
            _ => false,
        }
    }
}
