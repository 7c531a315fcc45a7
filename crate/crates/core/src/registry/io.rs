//! CSV ingestion and serialization. Column layouts are documented in
//! `docs/schemas.md`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;

use super::{
    normalize_sponsor, CategoryTable, ConditionCategory, OutcomeRank, OutcomeResult, Phase,
    RankCriterion, Registry, ReportedP, SponsorClass, StudyType, TrialRecord,
};
use crate::error::{Error, Result};

pub const TRIAL_COLUMNS: [&str; 11] = [
    "trial_id",
    "phase",
    "sponsor_name",
    "sponsor_class",
    "interventions",
    "mesh_conditions",
    "start_date",
    "completion_date",
    "enrollment",
    "placebo_comparator",
    "study_type",
];
pub const OUTCOME_COLUMNS: [&str; 5] =
    ["trial_id", "outcome_rank", "p_kind", "p_value", "mht_adjusted"];
pub const RANKING_COLUMNS: [&str; 3] = ["sponsor_name", "criterion", "rank"];
pub const SYNONYM_COLUMNS: [&str; 2] = ["canonical_drug", "synonym"];
pub const ALIAS_COLUMNS: [&str; 2] = ["alias", "parent"];
pub const MESH_TERM_COLUMNS: [&str; 2] = ["mesh_term", "tree_number"];
pub const SPENDING_COLUMNS: [&str; 2] = ["category_code", "spending"];

/// Optional side files read alongside the three core tables.
#[derive(Debug, Clone, Default)]
pub struct IngestOptions {
    /// alias,parent: subsidiaries grouped under their parent company.
    pub sponsor_aliases: Option<PathBuf>,
    /// mesh_term,tree_number: resolves named MeSH terms to tree numbers.
    pub mesh_terms: Option<PathBuf>,
    /// category_code,spending: overrides the embedded spending table.
    pub category_spending: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankingRow {
    pub sponsor_name: String,
    pub criterion: RankCriterion,
    pub rank: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynonymRow {
    pub canonical_drug: String,
    pub synonym: String,
}

struct Table {
    file: String,
    columns: BTreeMap<String, usize>,
    rows: Vec<(u64, csv::StringRecord)>,
}

impl Table {
    fn read(path: &Path, required: &[&str]) -> Result<Table> {
        let file = path.display().to_string();
        let handle = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(handle);
        let headers = reader.headers().map_err(|e| csv_error(&file, e))?.clone();
        let columns: BTreeMap<String, usize> = headers
            .iter()
            .enumerate()
            .map(|(i, h)| (h.trim().trim_start_matches('\u{feff}').to_string(), i))
            .collect();
        for col in required {
            if !columns.contains_key(*col) {
                return Err(Error::Schema {
                    file,
                    line: 1,
                    column: col.to_string(),
                    message: "missing column in header".into(),
                });
            }
        }
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| csv_error(&file, e))?;
            let line = rec.position().map_or(0, |p| p.line());
            if rec.iter().all(|f| f.trim().is_empty()) {
                continue;
            }
            rows.push((line, rec));
        }
        Ok(Table { file, columns, rows })
    }

    fn get<'r>(&self, rec: &'r csv::StringRecord, col: &str) -> &'r str {
        self.columns
            .get(col)
            .and_then(|&i| rec.get(i))
            .unwrap_or("")
            .trim()
    }

    fn err(&self, line: u64, column: &str, message: impl Into<String>) -> Error {
        Error::Schema {
            file: self.file.clone(),
            line,
            column: column.to_string(),
            message: message.into(),
        }
    }

    fn required<'r>(&self, line: u64, rec: &'r csv::StringRecord, col: &str) -> Result<&'r str> {
        let v = self.get(rec, col);
        if v.is_empty() {
            Err(self.err(line, col, "value is required"))
        } else {
            Ok(v)
        }
    }

    fn parse<T: FromStr>(&self, line: u64, rec: &csv::StringRecord, col: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let v = self.required(line, rec, col)?;
        v.parse::<T>()
            .map_err(|e| self.err(line, col, format!("cannot parse `{v}`: {e}")))
    }
}

fn csv_error(file: &str, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Schema {
        file: file.to_string(),
        line,
        column: String::new(),
        message: e.to_string(),
    }
}

fn parse_bool(v: &str) -> std::result::Result<bool, String> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "t" => Ok(true),
        "false" | "0" | "no" | "f" => Ok(false),
        _ => Err(format!("`{v}` is not a boolean")),
    }
}

fn parse_date(v: &str) -> std::result::Result<Option<NaiveDate>, String> {
    if v.is_empty() {
        return Ok(None);
    }
    NaiveDate::parse_from_str(v, "%Y-%m-%d")
        .map(Some)
        .map_err(|e| format!("`{v}` is not an ISO-8601 date: {e}"))
}

fn split_list(v: &str) -> impl Iterator<Item = &str> {
    v.split(';').map(str::trim).filter(|s| !s.is_empty())
}

/// `a+b;c` is two main interventions: the combination {a, b} and {c}.
fn parse_interventions(v: &str) -> Vec<BTreeSet<String>> {
    split_list(v)
        .map(|combo| {
            combo
                .split('+')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_string)
                .collect::<BTreeSet<_>>()
        })
        .filter(|s| !s.is_empty())
        .collect()
}

fn format_interventions(sets: &[BTreeSet<String>]) -> String {
    sets.iter()
        .map(|s| s.iter().map(String::as_str).collect::<Vec<_>>().join("+"))
        .collect::<Vec<_>>()
        .join(";")
}

pub fn read_rankings(path: &Path) -> Result<Vec<RankingRow>> {
    let t = Table::read(path, &RANKING_COLUMNS)?;
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(t.rows.len());
    for (line, rec) in &t.rows {
        let sponsor_name = t.required(*line, rec, "sponsor_name")?.to_string();
        let criterion: RankCriterion = t.parse(*line, rec, "criterion")?;
        let rank: u32 = t.parse(*line, rec, "rank")?;
        if rank == 0 {
            return Err(t.err(*line, "rank", "ranks start at 1"));
        }
        if !seen.insert((normalize_sponsor(&sponsor_name), criterion)) {
            return Err(t.err(*line, "sponsor_name", format!(
                "`{sponsor_name}` ranked twice under {}",
                criterion.label()
            )));
        }
        out.push(RankingRow {
            sponsor_name,
            criterion,
            rank,
        });
    }
    Ok(out)
}

pub fn read_synonyms(path: &Path) -> Result<Vec<SynonymRow>> {
    let t = Table::read(path, &SYNONYM_COLUMNS)?;
    t.rows
        .iter()
        .map(|(line, rec)| {
            Ok(SynonymRow {
                canonical_drug: t.required(*line, rec, "canonical_drug")?.to_string(),
                synonym: t.required(*line, rec, "synonym")?.to_string(),
            })
        })
        .collect()
}

/// Normalized alias name to parent display name.
pub fn read_aliases(path: &Path) -> Result<BTreeMap<String, String>> {
    let t = Table::read(path, &ALIAS_COLUMNS)?;
    let mut out = BTreeMap::new();
    for (line, rec) in &t.rows {
        let alias = t.required(*line, rec, "alias")?;
        let parent = t.required(*line, rec, "parent")?;
        out.insert(normalize_sponsor(alias), parent.to_string());
    }
    Ok(out)
}

fn read_category_table(opts: &IngestOptions) -> Result<CategoryTable> {
    let mut table = CategoryTable::default();
    if let Some(path) = &opts.category_spending {
        let t = Table::read(path, &SPENDING_COLUMNS)?;
        for (line, rec) in &t.rows {
            let cat: ConditionCategory = t.parse(*line, rec, "category_code")?;
            let spending: f64 = t.parse(*line, rec, "spending")?;
            if !spending.is_finite() || spending < 0.0 {
                return Err(t.err(*line, "spending", "spending must be finite and nonnegative"));
            }
            table = table.with_spending(cat, spending);
        }
    }
    if let Some(path) = &opts.mesh_terms {
        let t = Table::read(path, &MESH_TERM_COLUMNS)?;
        for (line, rec) in &t.rows {
            table = table.with_term(
                t.required(*line, rec, "mesh_term")?,
                t.required(*line, rec, "tree_number")?,
            );
        }
    }
    Ok(table)
}

pub fn ingest(
    trials_csv: &Path,
    outcomes_csv: &Path,
    rankings_csv: &Path,
    opts: &IngestOptions,
) -> Result<Registry> {
    let aliases = match &opts.sponsor_aliases {
        Some(p) => read_aliases(p)?,
        None => BTreeMap::new(),
    };
    let categories = read_category_table(opts)?;
    let rankings = read_rankings(rankings_csv)?;
    let mut ranks: BTreeMap<String, BTreeMap<RankCriterion, u32>> = BTreeMap::new();
    for r in &rankings {
        let key = resolve_sponsor(&aliases, &r.sponsor_name);
        ranks
            .entry(normalize_sponsor(&key))
            .or_default()
            .insert(r.criterion, r.rank);
    }

    let t = Table::read(trials_csv, &TRIAL_COLUMNS)?;
    let mut trials = Vec::with_capacity(t.rows.len());
    for (line, rec) in &t.rows {
        let line = *line;
        let trial_id = t.required(line, rec, "trial_id")?.to_string();
        let phase: Phase = t.parse(line, rec, "phase")?;
        let raw_sponsor = t.required(line, rec, "sponsor_name")?;
        if raw_sponsor.contains(';') || raw_sponsor.contains('|') {
            return Err(t.err(
                line,
                "sponsor_name",
                format!("`{raw_sponsor}` lists several sponsors; a single lead sponsor is required"),
            ));
        }
        let sponsor_name = resolve_sponsor(&aliases, raw_sponsor);
        let sponsor_class: SponsorClass = t.parse(line, rec, "sponsor_class")?;
        let industry_rank_keys = match sponsor_class {
            SponsorClass::Industry => ranks
                .get(&normalize_sponsor(&sponsor_name))
                .cloned()
                .unwrap_or_default(),
            SponsorClass::NonIndustry => {
                if ranks.contains_key(&normalize_sponsor(&sponsor_name)) {
                    return Err(t.err(
                        line,
                        "sponsor_class",
                        format!("`{sponsor_name}` is ranked as an industry sponsor but classed non_industry"),
                    ));
                }
                BTreeMap::new()
            }
        };
        let interventions = parse_interventions(t.get(rec, "interventions"));
        let mesh_conditions: BTreeSet<String> = split_list(t.get(rec, "mesh_conditions"))
            .map(str::to_string)
            .collect();
        let condition_category = categories.assign(&mesh_conditions);
        let start_date = parse_date(t.get(rec, "start_date"))
            .map_err(|m| t.err(line, "start_date", m))?;
        let completion_date = parse_date(t.get(rec, "completion_date"))
            .map_err(|m| t.err(line, "completion_date", m))?;
        if let (Some(s), Some(c)) = (start_date, completion_date) {
            if s > c {
                return Err(t.err(line, "completion_date", format!("completion {c} precedes start {s}")));
            }
        }
        let enrollment: u32 = t.parse(line, rec, "enrollment")?;
        let placebo_comparator = parse_bool(t.required(line, rec, "placebo_comparator")?)
            .map_err(|m| t.err(line, "placebo_comparator", m))?;
        let study_type: StudyType = t.parse(line, rec, "study_type")?;
        trials.push(TrialRecord {
            trial_id,
            phase,
            sponsor_name,
            sponsor_class,
            industry_rank_keys,
            interventions,
            mesh_conditions,
            condition_category,
            start_date,
            completion_date,
            enrollment,
            placebo_comparator,
            study_type,
        });
    }

    let t = Table::read(outcomes_csv, &OUTCOME_COLUMNS)?;
    let mut outcomes = Vec::with_capacity(t.rows.len());
    for (line, rec) in &t.rows {
        let line = *line;
        let trial_id = t.required(line, rec, "trial_id")?.to_string();
        let outcome_rank: OutcomeRank = t.parse(line, rec, "outcome_rank")?;
        let kind = t.required(line, rec, "p_kind")?;
        let value: f64 = t.parse(line, rec, "p_value")?;
        let reported_p =
            ReportedP::from_parts(kind, value).map_err(|m| t.err(line, "p_value", m))?;
        let mht_adjusted = parse_bool(t.required(line, rec, "mht_adjusted")?)
            .map_err(|m| t.err(line, "mht_adjusted", m))?;
        outcomes.push(OutcomeResult {
            trial_id,
            outcome_rank,
            reported_p,
            mht_adjusted,
        });
    }
    Registry::new(trials, outcomes)
}

fn resolve_sponsor(aliases: &BTreeMap<String, String>, name: &str) -> String {
    aliases
        .get(&normalize_sponsor(name))
        .cloned()
        .unwrap_or_else(|| name.split_whitespace().collect::<Vec<_>>().join(" "))
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(f))
}

fn write_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::io(path, std::io::Error::other(format!("{other:?}"))),
    }
}

/// Writes rows of string fields as a CSV file with a header.
pub fn write_csv<R, I>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut w = writer(path)?;
    w.write_record(header).map_err(|e| write_err(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| write_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn date_str(d: Option<NaiveDate>) -> String {
    d.map(|d| d.format("%Y-%m-%d").to_string()).unwrap_or_default()
}

pub fn write_trials(path: &Path, trials: &[TrialRecord]) -> Result<()> {
    write_csv(
        path,
        &TRIAL_COLUMNS,
        trials.iter().map(|t| {
            vec![
                t.trial_id.clone(),
                t.phase.label().to_string(),
                t.sponsor_name.clone(),
                t.sponsor_class.label().to_string(),
                format_interventions(&t.interventions),
                t.mesh_conditions.iter().cloned().collect::<Vec<_>>().join(";"),
                date_str(t.start_date),
                date_str(t.completion_date),
                t.enrollment.to_string(),
                t.placebo_comparator.to_string(),
                t.study_type.label().to_string(),
            ]
        }),
    )
}

pub fn write_outcomes(path: &Path, outcomes: &[OutcomeResult]) -> Result<()> {
    write_csv(
        path,
        &OUTCOME_COLUMNS,
        outcomes.iter().map(|o| {
            vec![
                o.trial_id.clone(),
                o.outcome_rank.label().to_string(),
                o.reported_p.kind_label().to_string(),
                o.reported_p.value().to_string(),
                o.mht_adjusted.to_string(),
            ]
        }),
    )
}

pub fn write_rankings(path: &Path, rows: &[RankingRow]) -> Result<()> {
    write_csv(
        path,
        &RANKING_COLUMNS,
        rows.iter().map(|r| {
            vec![
                r.sponsor_name.clone(),
                r.criterion.label().to_string(),
                r.rank.to_string(),
            ]
        }),
    )
}

pub fn write_synonyms(path: &Path, rows: &[SynonymRow]) -> Result<()> {
    write_csv(
        path,
        &SYNONYM_COLUMNS,
        rows.iter()
            .map(|r| vec![r.canonical_drug.clone(), r.synonym.clone()]),
    )
}

/// Ranking rows implied by the trials of a registry (one per ranked
/// sponsor and criterion), sorted by criterion then rank.
pub fn rankings_of(registry: &Registry) -> Vec<RankingRow> {
    let mut seen = BTreeSet::new();
    let mut rows: Vec<RankingRow> = registry
        .trials()
        .iter()
        .flat_map(|t| {
            t.industry_rank_keys.iter().map(move |(&criterion, &rank)| RankingRow {
                sponsor_name: t.sponsor_name.clone(),
                criterion,
                rank,
            })
        })
        .filter(|r| seen.insert((normalize_sponsor(&r.sponsor_name), r.criterion)))
        .collect();
    rows.sort_by(|a, b| (a.criterion, a.rank, &a.sponsor_name).cmp(&(b.criterion, b.rank, &b.sponsor_name)));
    rows
}

/// Writes a free-form text file, mapping failures to the path.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}
