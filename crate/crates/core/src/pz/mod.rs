//! From reported p-values to censored z-scores.

mod normal;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::registry::ReportedP;

pub use normal::{inv_norm_cdf, norm_cdf, norm_pdf, norm_sf, two_sided_p};

/// z above which "p < 0.001" results lie (two-sided).
pub const D1_Z: f64 = 3.2905;
/// z above which "p < 0.0001" results lie (two-sided).
pub const D2_Z: f64 = 3.8906;

/// Exact p-values below this are treated like a reported zero.
pub const EXACT_ZERO_P: f64 = 1e-15;

const D1_P: f64 = 0.001;
const D2_P: f64 = 0.0001;
const THRESHOLD_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Sidedness {
    #[default]
    TwoSided,
    OneSided,
}

impl Sidedness {
    pub fn label(self) -> &'static str {
        match self {
            Sidedness::TwoSided => "two-sided",
            Sidedness::OneSided => "one-sided",
        }
    }

    /// z of an exact p-value. Callers guarantee p in (0, 1].
    pub fn z_of_p(self, p: f64) -> f64 {
        match self {
            // Φ⁻¹ is evaluated in the lower tail where it is accurate.
            Sidedness::TwoSided => -normal::ppnd16(p / 2.0),
            Sidedness::OneSided => -normal::ppnd16(p.clamp(EXACT_ZERO_P, 1.0 - EXACT_ZERO_P)),
        }
    }

    /// p-value of a z-score, the inverse of [`Sidedness::z_of_p`].
    pub fn p_of_z(self, z: f64) -> f64 {
        match self {
            Sidedness::TwoSided => 2.0 * norm_sf(z),
            Sidedness::OneSided => norm_sf(z),
        }
    }

    /// The z-score corresponding to p = 0.05; z at or above it is
    /// significant (p = 0.05 itself counts).
    pub fn significance_cutoff(self) -> f64 {
        self.z_of_p(0.05)
    }
}

impl FromStr for Sidedness {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "two-sided" | "twosided" | "two" => Ok(Sidedness::TwoSided),
            "one-sided" | "onesided" | "one" => Ok(Sidedness::OneSided),
            other => Err(format!("unknown sidedness `{other}` (expected two-sided|one-sided)")),
        }
    }
}

impl fmt::Display for Sidedness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CensorDirection {
    Above,
    Below,
}

/// A constructed z-statistic, either precise or known only by a bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ZScore {
    /// Nonnegative for two-sided transforms; one-sided values may be negative.
    Precise(f64),
    /// Reported as p < 0.001.
    AboveD1,
    /// Reported as p < 0.0001 or as exactly zero.
    AboveD2,
    /// Any other bound. `imputed` is filled by [`impute_other_censors`].
    OtherCensor {
        direction: CensorDirection,
        threshold: f64,
        imputed: Option<f64>,
    },
}

impl ZScore {
    pub fn precise(self) -> Option<f64> {
        match self {
            ZScore::Precise(z) => Some(z),
            _ => None,
        }
    }

    pub fn is_d1(self) -> bool {
        matches!(self, ZScore::AboveD1)
    }

    pub fn is_d2(self) -> bool {
        matches!(self, ZScore::AboveD2)
    }

    /// z value entering the regression: the precise or imputed value, and
    /// 0 for the D1/D2 groups (whose effect is carried by their dummies).
    pub fn regression_value(self) -> Result<f64> {
        match self {
            ZScore::Precise(z) => Ok(z),
            ZScore::AboveD1 | ZScore::AboveD2 => Ok(0.0),
            ZScore::OtherCensor {
                imputed: Some(z), ..
            } => Ok(z),
            ZScore::OtherCensor {
                direction,
                threshold,
                imputed: None,
            } => Err(Error::Imputation {
                direction: direction_label(direction).into(),
                threshold,
            }),
        }
    }

    /// Whether the score lies at or above `cutoff`. D1/D2 groups are above
    /// any cutoff below 3.29; other censors use their imputed value.
    pub fn is_significant(self, cutoff: f64) -> Result<bool> {
        match self {
            ZScore::AboveD1 => Ok(cutoff <= D1_Z),
            ZScore::AboveD2 => Ok(cutoff <= D2_Z),
            other => Ok(other.regression_value()? >= cutoff),
        }
    }

    pub fn kind_label(self) -> &'static str {
        match self {
            ZScore::Precise(_) => "precise",
            ZScore::AboveD1 => "above_d1",
            ZScore::AboveD2 => "above_d2",
            ZScore::OtherCensor {
                direction: CensorDirection::Above,
                ..
            } => "censored_above",
            ZScore::OtherCensor {
                direction: CensorDirection::Below,
                ..
            } => "censored_below",
        }
    }
}

fn direction_label(d: CensorDirection) -> &'static str {
    match d {
        CensorDirection::Above => "above",
        CensorDirection::Below => "below",
    }
}

pub fn transform(p: ReportedP, side: Sidedness) -> ZScore {
    match p {
        ReportedP::Exact(v) if v < EXACT_ZERO_P => ZScore::AboveD2,
        ReportedP::Exact(v) if v >= 1.0 && side == Sidedness::TwoSided => ZScore::Precise(0.0),
        ReportedP::Exact(v) => ZScore::Precise(side.z_of_p(v)),
        ReportedP::Less(t) if (t - D1_P).abs() < THRESHOLD_TOL => ZScore::AboveD1,
        ReportedP::Less(t) if (t - D2_P).abs() < THRESHOLD_TOL => ZScore::AboveD2,
        ReportedP::Less(t) => ZScore::OtherCensor {
            direction: CensorDirection::Above,
            threshold: side.z_of_p(t),
            imputed: None,
        },
        ReportedP::Greater(t) => ZScore::OtherCensor {
            direction: CensorDirection::Below,
            threshold: side.z_of_p(t),
            imputed: None,
        },
    }
}

/// Fills every other-censor with the mean of the precise scores strictly
/// beyond its threshold, computed over `scores` itself.
pub fn impute_other_censors(scores: &[ZScore]) -> Result<Vec<ZScore>> {
    let mut precise: Vec<f64> = scores.iter().filter_map(|z| z.precise()).collect();
    precise.sort_by(f64::total_cmp);
    let mut prefix = Vec::with_capacity(precise.len() + 1);
    prefix.push(0.0);
    for &z in &precise {
        prefix.push(prefix.last().unwrap() + z);
    }
    let total = *prefix.last().unwrap();
    let mut cache: BTreeMap<(bool, u64), f64> = BTreeMap::new();
    scores
        .iter()
        .map(|&z| match z {
            ZScore::OtherCensor {
                direction,
                threshold,
                ..
            } => {
                let key = (direction == CensorDirection::Above, threshold.to_bits());
                let value = match cache.get(&key) {
                    Some(&v) => v,
                    None => {
                        let (count, sum) = match direction {
                            CensorDirection::Above => {
                                let i = precise.partition_point(|&x| x <= threshold);
                                (precise.len() - i, total - prefix[i])
                            }
                            CensorDirection::Below => {
                                let i = precise.partition_point(|&x| x < threshold);
                                (i, prefix[i])
                            }
                        };
                        if count == 0 {
                            return Err(Error::Imputation {
                                direction: direction_label(direction).into(),
                                threshold,
                            });
                        }
                        let v = sum / count as f64;
                        cache.insert(key, v);
                        v
                    }
                };
                Ok(ZScore::OtherCensor {
                    direction,
                    threshold,
                    imputed: Some(value),
                })
            }
            other => Ok(other),
        })
        .collect()
}

/// Counts by z kind, including how many results were reported only as
/// p < 0.05 (censored at the significance threshold itself).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TransformSummary {
    pub precise: usize,
    pub above_d1: usize,
    pub above_d2: usize,
    pub censored_above: usize,
    pub censored_below: usize,
    pub less_than_005: usize,
}

impl TransformSummary {
    pub fn tally(reported: &[ReportedP], scores: &[ZScore]) -> Self {
        let mut s = TransformSummary::default();
        for z in scores {
            match z {
                ZScore::Precise(_) => s.precise += 1,
                ZScore::AboveD1 => s.above_d1 += 1,
                ZScore::AboveD2 => s.above_d2 += 1,
                ZScore::OtherCensor {
                    direction: CensorDirection::Above,
                    ..
                } => s.censored_above += 1,
                ZScore::OtherCensor { .. } => s.censored_below += 1,
            }
        }
        s.less_than_005 = reported
            .iter()
            .filter(|p| matches!(p, ReportedP::Less(t) if (t - 0.05).abs() < THRESHOLD_TOL))
            .count();
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thresholds() {
        let z = transform(ReportedP::Exact(0.05), Sidedness::TwoSided).precise().unwrap();
        assert!((z - 1.959964).abs() < 1e-6);
        let z = transform(ReportedP::Exact(0.05), Sidedness::OneSided).precise().unwrap();
        assert!((z - 1.6449).abs() < 1e-4);
        assert_eq!(transform(ReportedP::Exact(1.0), Sidedness::TwoSided), ZScore::Precise(0.0));
        assert!((Sidedness::TwoSided.z_of_p(0.001) - D1_Z).abs() < 5e-5);
        assert!((Sidedness::TwoSided.z_of_p(0.0001) - D2_Z).abs() < 5e-5);
    }

    #[test]
    fn censoring_rules() {
        let t = |p| transform(p, Sidedness::TwoSided);
        assert_eq!(t(ReportedP::Exact(0.0)), ZScore::AboveD2);
        assert_eq!(t(ReportedP::Exact(1e-16)), ZScore::AboveD2);
        assert_eq!(t(ReportedP::Less(0.001)), ZScore::AboveD1);
        assert_eq!(t(ReportedP::Less(0.0001)), ZScore::AboveD2);
        match t(ReportedP::Less(0.05)) {
            ZScore::OtherCensor {
                direction: CensorDirection::Above,
                threshold,
                imputed: None,
            } => assert_eq!(threshold, Sidedness::TwoSided.significance_cutoff()),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            t(ReportedP::Greater(0.05)),
            ZScore::OtherCensor {
                direction: CensorDirection::Below,
                ..
            }
        ));
    }

    #[test]
    fn p_005_is_significant() {
        let side = Sidedness::TwoSided;
        let z = transform(ReportedP::Exact(0.05), side);
        assert!(z.is_significant(side.significance_cutoff()).unwrap());
        let z = transform(ReportedP::Exact(0.0500001), side);
        assert!(!z.is_significant(side.significance_cutoff()).unwrap());
    }

    #[test]
    fn imputation_examples() {
        let above = ZScore::OtherCensor {
            direction: CensorDirection::Above,
            threshold: 1.5,
            imputed: None,
        };
        let out = impute_other_censors(&[
            ZScore::Precise(1.0),
            ZScore::Precise(2.0),
            ZScore::Precise(3.0),
            above,
        ])
        .unwrap();
        assert!(matches!(out[3], ZScore::OtherCensor { imputed: Some(v), .. } if (v - 2.5).abs() < 1e-15));

        let below = ZScore::OtherCensor {
            direction: CensorDirection::Below,
            threshold: 2.0,
            imputed: None,
        };
        let out = impute_other_censors(&[ZScore::Precise(1.0), below]).unwrap();
        assert!(matches!(out[1], ZScore::OtherCensor { imputed: Some(v), .. } if v == 1.0));

        let high = ZScore::OtherCensor {
            direction: CensorDirection::Above,
            threshold: 5.0,
            imputed: None,
        };
        match impute_other_censors(&[ZScore::Precise(1.0), high]) {
            Err(Error::Imputation { threshold, .. }) => assert_eq!(threshold, 5.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn regression_values() {
        assert_eq!(ZScore::AboveD2.regression_value().unwrap(), 0.0);
        assert_eq!(ZScore::Precise(2.2).regression_value().unwrap(), 2.2);
        assert!(ZScore::OtherCensor {
            direction: CensorDirection::Above,
            threshold: 2.0,
            imputed: None
        }
        .regression_value()
        .is_err());
    }
}
