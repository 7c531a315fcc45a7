//! Rule-based linking of phase II trials to phase III follow-ups.
//!
//! A phase III trial continues a phase II trial when (1) every drug of at
//! least one phase II main-intervention set is among the phase III listed
//! drugs, up to synonyms; (2) the phase II MeSH conditions, minus generic
//! stoplisted terms, are all among the phase III conditions; and (3) the
//! phase II trial started strictly before the phase III trial.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use rayon::prelude::*;
use regex::Regex;

use crate::error::{Error, Result};
use crate::registry::{write_csv, Phase, Registry, SponsorClass, SynonymRow, TrialRecord};

/// Dosage suffixes removed from drug names, applied repeatedly at the end
/// of the name: "metformin 500 mg" → "metformin",
/// "drug x 2.5 mg/kg" → "drug x", "insulin 100 iu/ml" → "insulin".
pub const DOSAGE_PATTERNS: [&str; 1] = [
    r"\s*\(?\d+(?:[.,]\d+)?\s*(?:mg|mcg|µg|ug|g|ml|iu|units?|%|mmol|nmol)(?:/(?:day|d|kg|m2|ml|dose))?\)?$",
];

pub const DEFAULT_STOPLIST: [&str; 2] = ["disease", "syndrome"];

pub fn default_cutoff_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2018, 12, 31).expect("valid date")
}

/// Canonical drug keys: normalized names with synonyms merged.
#[derive(Debug, Clone)]
pub struct DrugCanon {
    dosage: Vec<Regex>,
    representative: BTreeMap<String, String>,
}

impl DrugCanon {
    pub fn new(synonyms: &[SynonymRow]) -> Self {
        let dosage: Vec<Regex> = DOSAGE_PATTERNS
            .iter()
            .map(|p| Regex::new(p).expect("valid dosage pattern"))
            .collect();
        let mut canon = DrugCanon {
            dosage,
            representative: BTreeMap::new(),
        };
        // union-find over normalized names; the lexicographically smallest
        // member of each class represents it
        let mut parent: BTreeMap<String, String> = BTreeMap::new();
        fn find(parent: &mut BTreeMap<String, String>, x: &str) -> String {
            let mut root = x.to_string();
            while let Some(p) = parent.get(&root) {
                if *p == root {
                    break;
                }
                root = p.clone();
            }
            let mut cur = x.to_string();
            while cur != root {
                let next = parent.insert(cur.clone(), root.clone()).unwrap_or_else(|| root.clone());
                cur = next;
            }
            root
        }
        for row in synonyms {
            let a = canon.normalize(&row.canonical_drug);
            let b = canon.normalize(&row.synonym);
            if a.is_empty() || b.is_empty() {
                continue;
            }
            parent.entry(a.clone()).or_insert_with(|| a.clone());
            parent.entry(b.clone()).or_insert_with(|| b.clone());
            let ra = find(&mut parent, &a);
            let rb = find(&mut parent, &b);
            if ra != rb {
                let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
                parent.insert(hi, lo);
            }
        }
        let names: Vec<String> = parent.keys().cloned().collect();
        for name in names {
            let root = find(&mut parent, &name);
            canon.representative.insert(name, root);
        }
        canon
    }

    /// Lowercase, trim, collapse whitespace and strip dosage suffixes.
    pub fn normalize(&self, name: &str) -> String {
        let mut s = name
            .split_whitespace()
            .collect::<Vec<_>>()
            .join(" ")
            .to_lowercase();
        loop {
            let before = s.len();
            for re in &self.dosage {
                let stripped = re.replace(&s, "").trim().to_string();
                // a name that is nothing but a number stays as it is
                if !stripped.is_empty() {
                    s = stripped;
                }
            }
            if s.len() == before {
                return s;
            }
        }
    }

    pub fn canonical(&self, name: &str) -> String {
        let n = self.normalize(name);
        self.representative.get(&n).cloned().unwrap_or(n)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkConfig {
    /// Lowercased generic MeSH terms ignored on the phase II side.
    pub stoplist: BTreeSet<String>,
    /// Phase II trials must have completed on or before this date.
    pub completion_cutoff: NaiveDate,
}

impl Default for LinkConfig {
    fn default() -> Self {
        LinkConfig {
            stoplist: DEFAULT_STOPLIST.iter().map(|s| s.to_string()).collect(),
            completion_cutoff: default_cutoff_date(),
        }
    }
}

impl LinkConfig {
    pub fn with_stopwords<'a>(mut self, extra: impl IntoIterator<Item = &'a str>) -> Self {
        self.stoplist
            .extend(extra.into_iter().map(|s| s.trim().to_lowercase()).filter(|s| !s.is_empty()));
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SkipReason {
    NoResults,
    NoCuratedIntervention,
    CompletedAfterCutoff,
    MissingStartDate,
}

impl SkipReason {
    pub fn label(self) -> &'static str {
        match self {
            SkipReason::NoResults => "no_results",
            SkipReason::NoCuratedIntervention => "no_curated_intervention",
            SkipReason::CompletedAfterCutoff => "completed_after_cutoff",
            SkipReason::MissingStartDate => "missing_start_date",
        }
    }
}

impl fmt::Display for SkipReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SkipReason {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        [
            SkipReason::NoResults,
            SkipReason::NoCuratedIntervention,
            SkipReason::CompletedAfterCutoff,
            SkipReason::MissingStartDate,
        ]
        .into_iter()
        .find(|r| r.label() == s.trim())
        .ok_or_else(|| format!("unknown skip reason `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkResult {
    pub phase2_id: String,
    pub matched_phase3_ids: BTreeSet<String>,
}

impl LinkResult {
    pub fn continued(&self) -> bool {
        !self.matched_phase3_ids.is_empty()
    }
}

/// A phase III trial prepared for matching.
#[derive(Debug, Clone)]
pub struct Phase3Entry<'a> {
    pub trial: &'a TrialRecord,
    drugs: BTreeSet<String>,
    mesh: BTreeSet<String>,
}

impl<'a> Phase3Entry<'a> {
    pub fn new(trial: &'a TrialRecord, canon: &DrugCanon) -> Self {
        Phase3Entry {
            trial,
            drugs: trial.listed_drugs().into_iter().map(|d| canon.canonical(d)).collect(),
            mesh: trial.mesh_conditions.iter().map(|m| m.trim().to_lowercase()).collect(),
        }
    }
}

fn eligibility(phase2: &TrialRecord, cfg: &LinkConfig) -> std::result::Result<NaiveDate, SkipReason> {
    if phase2.interventions.is_empty() {
        return Err(SkipReason::NoCuratedIntervention);
    }
    match phase2.completion_date {
        Some(d) if d <= cfg.completion_cutoff => {}
        _ => return Err(SkipReason::CompletedAfterCutoff),
    }
    phase2.start_date.ok_or(SkipReason::MissingStartDate)
}

/// Links one phase II trial against a pool of prepared phase III trials.
pub fn link(
    phase2: &TrialRecord,
    pool: &[Phase3Entry<'_>],
    canon: &DrugCanon,
    cfg: &LinkConfig,
) -> std::result::Result<LinkResult, SkipReason> {
    let start = eligibility(phase2, cfg)?;
    let sets: Vec<BTreeSet<String>> = phase2
        .interventions
        .iter()
        .map(|s| s.iter().map(|d| canon.canonical(d)).collect())
        .collect();
    let mesh: Vec<String> = phase2
        .mesh_conditions
        .iter()
        .map(|m| m.trim().to_lowercase())
        .filter(|m| !cfg.stoplist.contains(m))
        .collect();
    let matched = pool
        .iter()
        .filter(|p3| {
            p3.trial.start_date.is_some_and(|s3| start < s3)
                && mesh.iter().all(|m| p3.mesh.contains(m))
                && sets.iter().any(|set| set.iter().all(|d| p3.drugs.contains(d)))
        })
        .map(|p3| p3.trial.trial_id.clone())
        .collect();
    Ok(LinkResult {
        phase2_id: phase2.trial_id.clone(),
        matched_phase3_ids: matched,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassRate {
    pub eligible: usize,
    pub continued: usize,
}

impl ClassRate {
    pub fn rate(&self) -> f64 {
        if self.eligible == 0 {
            f64::NAN
        } else {
            self.continued as f64 / self.eligible as f64
        }
    }
}

/// Linking outcome of every phase II trial, keyed by trial id.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LinkReport {
    pub outcomes: BTreeMap<String, std::result::Result<LinkResult, SkipReason>>,
}

impl LinkReport {
    pub fn continued(&self, phase2_id: &str) -> Option<bool> {
        match self.outcomes.get(phase2_id) {
            Some(Ok(r)) => Some(r.continued()),
            _ => None,
        }
    }

    pub fn summary(&self, reg: &Registry) -> BTreeMap<SponsorClass, ClassRate> {
        let mut out = BTreeMap::new();
        for (id, res) in &self.outcomes {
            let Some(t) = reg.trial(id) else { continue };
            let e = out.entry(t.sponsor_class).or_insert(ClassRate {
                eligible: 0,
                continued: 0,
            });
            if let Ok(r) = res {
                e.eligible += 1;
                e.continued += usize::from(r.continued());
            }
        }
        out
    }

    pub fn skip_counts(&self) -> BTreeMap<SkipReason, usize> {
        let mut out = BTreeMap::new();
        for res in self.outcomes.values() {
            if let Err(r) = res {
                *out.entry(*r).or_insert(0) += 1;
            }
        }
        out
    }

    /// links.csv: one row per matched pair.
    pub fn write_links(&self, path: &Path) -> Result<()> {
        write_csv(
            path,
            &["phase2_id", "phase3_id"],
            self.outcomes.iter().flat_map(|(id, res)| {
                res.iter()
                    .flat_map(|r| r.matched_phase3_ids.iter())
                    .map(move |p3| vec![id.clone(), p3.clone()])
            }),
        )
    }

    /// links_summary.csv: one row per phase II trial.
    pub fn write_summary(&self, path: &Path) -> Result<()> {
        write_csv(
            path,
            &["phase2_id", "continued", "n_matches", "skip_reason"],
            self.outcomes.iter().map(|(id, res)| match res {
                Ok(r) => vec![
                    id.clone(),
                    r.continued().to_string(),
                    r.matched_phase3_ids.len().to_string(),
                    String::new(),
                ],
                Err(reason) => vec![id.clone(), String::new(), String::new(), reason.to_string()],
            }),
        )
    }

    /// Reads links_summary.csv and links.csv back, e.g. a curated or
    /// simulated ground-truth linkage.
    pub fn read(summary: &Path, links: &Path) -> Result<LinkReport> {
        let mut pairs: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (_, rec) in read_records(links, &["phase2_id", "phase3_id"])? {
            pairs.entry(rec[0].clone()).or_default().insert(rec[1].clone());
        }
        let file = summary.display().to_string();
        let mut outcomes = BTreeMap::new();
        for (line, rec) in read_records(summary, &["phase2_id", "continued", "skip_reason"])? {
            let schema = |column: &str, message: String| Error::Schema {
                file: file.clone(),
                line,
                column: column.into(),
                message,
            };
            let id = rec[0].clone();
            let res = if !rec[2].is_empty() {
                Err(rec[2].parse::<SkipReason>().map_err(|m| schema("skip_reason", m))?)
            } else {
                let continued = match rec[1].as_str() {
                    "true" | "1" => true,
                    "false" | "0" => false,
                    other => return Err(schema("continued", format!("`{other}` is not a boolean"))),
                };
                let matched = pairs.remove(&id).unwrap_or_default();
                if continued == matched.is_empty() {
                    return Err(schema(
                        "continued",
                        format!("`{id}` has {} links in the links file", matched.len()),
                    ));
                }
                Ok(LinkResult {
                    phase2_id: id.clone(),
                    matched_phase3_ids: matched,
                })
            };
            outcomes.insert(id, res);
        }
        if let Some(id) = pairs.keys().next() {
            return Err(Error::Domain(format!(
                "links file pairs `{id}` with phase III trials but the summary has no such row"
            )));
        }
        Ok(LinkReport { outcomes })
    }
}

/// Rows of `columns` (trimmed) with their line numbers.
fn read_records(path: &Path, columns: &[&str]) -> Result<Vec<(u64, Vec<String>)>> {
    let file = path.display().to_string();
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Domain(format!("{file}: {other:?}")),
    })?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Domain(format!("{file}: {e}")))?
        .clone();
    let idx: Vec<usize> = columns
        .iter()
        .map(|name| {
            headers.iter().position(|h| h.trim() == *name).ok_or_else(|| Error::Schema {
                file: file.clone(),
                line: 1,
                column: name.to_string(),
                message: "missing column in header".into(),
            })
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Domain(format!("{file}: {e}")))?;
        let line = rec.position().map_or(0, |p| p.line());
        out.push((line, idx.iter().map(|&i| rec.get(i).unwrap_or("").trim().to_string()).collect()));
    }
    Ok(out)
}

/// Links every phase II trial of the registry against all its phase III
/// trials. Phase II trials without any outcome are skipped as
/// `NoResults`.
pub fn link_all(reg: &Registry, canon: &DrugCanon, cfg: &LinkConfig) -> LinkReport {
    let pool: Vec<Phase3Entry<'_>> = reg
        .trials()
        .iter()
        .filter(|t| t.phase == Phase::III)
        .map(|t| Phase3Entry::new(t, canon))
        .collect();
    let with_results: BTreeSet<&str> = reg.outcomes().iter().map(|o| o.trial_id.as_str()).collect();
    // index the pool by canonical drug to avoid scanning it per trial
    let mut by_drug: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, p) in pool.iter().enumerate() {
        for d in &p.drugs {
            by_drug.entry(d.as_str()).or_default().push(i);
        }
    }
    let phase2: Vec<&TrialRecord> = reg.trials().iter().filter(|t| t.phase == Phase::II).collect();
    let outcomes = phase2
        .par_iter()
        .map(|t| {
            if !with_results.contains(t.trial_id.as_str()) {
                return (t.trial_id.clone(), Err(SkipReason::NoResults));
            }
            let mut candidates: BTreeSet<usize> = BTreeSet::new();
            for set in &t.interventions {
                if let Some(first) = set.iter().next() {
                    if let Some(ids) = by_drug.get(canon.canonical(first).as_str()) {
                        candidates.extend(ids);
                    }
                }
            }
            let sub: Vec<Phase3Entry<'_>> = candidates.into_iter().map(|i| pool[i].clone()).collect();
            (t.trial_id.clone(), link(t, &sub, canon, cfg))
        })
        .collect();
    LinkReport { outcomes }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn syn(a: &str, b: &str) -> SynonymRow {
        SynonymRow {
            canonical_drug: a.into(),
            synonym: b.into(),
        }
    }

    #[test]
    fn normalization() {
        let c = DrugCanon::new(&[]);
        assert_eq!(c.normalize("  Metformin   500 mg "), "metformin");
        assert_eq!(c.normalize("Drug X 2.5 mg/kg"), "drug x");
        assert_eq!(c.normalize("Insulin 100 IU/mL"), "insulin");
        assert_eq!(c.normalize("BI 10773"), "bi 10773");
        assert_eq!(c.normalize("drug (10 mg)"), "drug");
        assert_eq!(c.normalize("12345"), "12345");
    }

    #[test]
    fn synonym_classes() {
        let c = DrugCanon::new(&[syn("Paracetamol", "Acetaminophen"), syn("APAP", "acetaminophen")]);
        let a = c.canonical("paracetamol");
        assert_eq!(a, c.canonical("APAP 500 mg"));
        assert_eq!(a, c.canonical("Acetaminophen"));
        assert_eq!(c.canonical(&a), a);
        assert_eq!(a, "acetaminophen");
    }
}
