//! Subcommand orchestration: configuration, stage dispatch, CSV/SVG
//! emission and the provenance manifest.

mod manifest;
mod stages;
pub mod svg;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::pz::Sidedness;
use crate::registry::{RankCriterion, SponsorSplit};
use crate::simulate::SimConfig;

pub use manifest::{sha256_file, Manifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Ingest,
    Transform,
    Density,
    Disctest,
    Link,
    FitSelection,
    Decompose,
    Sweep,
    Simulate,
    Report,
}

impl Subcommand {
    pub const ALL: [Subcommand; 10] = [
        Subcommand::Ingest,
        Subcommand::Transform,
        Subcommand::Density,
        Subcommand::Disctest,
        Subcommand::Link,
        Subcommand::FitSelection,
        Subcommand::Decompose,
        Subcommand::Sweep,
        Subcommand::Simulate,
        Subcommand::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Ingest => "ingest",
            Subcommand::Transform => "transform",
            Subcommand::Density => "density",
            Subcommand::Disctest => "disctest",
            Subcommand::Link => "link",
            Subcommand::FitSelection => "fit-selection",
            Subcommand::Decompose => "decompose",
            Subcommand::Sweep => "sweep",
            Subcommand::Simulate => "simulate",
            Subcommand::Report => "report",
        }
    }
}

impl FromStr for Subcommand {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Subcommand::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown subcommand `{s}`"))
    }
}

impl fmt::Display for Subcommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which sponsor groupings `disctest` reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupBy {
    Phase,
    SponsorClassPhase,
}

impl FromStr for GroupBy {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().replace(['×', 'x', '*', '+'], ",").replace(' ', "").as_str() {
            "phase" => Ok(GroupBy::Phase),
            "sponsor_class,phase" | "phase,sponsor_class" => Ok(GroupBy::SponsorClassPhase),
            other => Err(format!("unknown grouping `{other}` (expected phase|sponsor_class,phase)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub trials: Option<PathBuf>,
    pub outcomes: Option<PathBuf>,
    pub rankings: Option<PathBuf>,
    pub synonyms: Option<PathBuf>,
    pub aliases: Option<PathBuf>,
    pub mesh_terms: Option<PathBuf>,
    pub category_spending: Option<PathBuf>,
    /// Curated or ground-truth links (links.csv + links_summary.csv); when
    /// absent the rule-based linker runs.
    pub links: Option<PathBuf>,
    pub links_summary: Option<PathBuf>,
    pub side: Sidedness,
    pub cutoff: Option<f64>,
    pub split: SponsorSplit,
    pub bootstrap_reps: usize,
    pub band_reps: usize,
    pub seed: u64,
    pub output: PathBuf,
    pub bandwidth: String,
    pub test: String,
    pub tail: crate::decompose::TailKind,
    pub reflect: bool,
    pub filters: bool,
    pub stopwords: Vec<String>,
    pub completion_cutoff: NaiveDate,
    pub group_by: GroupBy,
    pub sim: SimConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            trials: None,
            outcomes: None,
            rankings: None,
            synonyms: None,
            aliases: None,
            mesh_terms: None,
            category_spending: None,
            links: None,
            links_summary: None,
            side: Sidedness::TwoSided,
            cutoff: None,
            split: SponsorSplit::main(),
            bootstrap_reps: 500,
            band_reps: 200,
            seed: 1,
            output: PathBuf::from("out"),
            bandwidth: "sj".into(),
            test: "cjm".into(),
            tail: crate::decompose::TailKind::Kernel,
            reflect: false,
            filters: true,
            stopwords: Vec::new(),
            completion_cutoff: crate::linker::default_cutoff_date(),
            group_by: GroupBy::SponsorClassPhase,
            sim: SimConfig::default(),
        }
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::config(format!("`{key}`: expected true|false, got `{v}`"))),
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::config(format!("`{key}`: cannot parse `{v}`")))
}

/// `criterion:k`, e.g. `revenue2018:10`.
pub fn parse_split(v: &str) -> Result<SponsorSplit> {
    let (c, k) = v
        .split_once(':')
        .ok_or_else(|| Error::config(format!("split `{v}`: expected criterion:k")))?;
    let criterion: RankCriterion = c.parse().map_err(Error::config)?;
    SponsorSplit::new(criterion, parse_num("split", k)?)
}

impl PipelineConfig {
    /// Applies one key=value setting. Keys prefixed `sim.` go to the
    /// simulator configuration.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        let path = || Some(PathBuf::from(value.trim()));
        match key {
            "input_dir" => {
                let dir = PathBuf::from(value.trim());
                self.trials = Some(dir.join("trials.csv"));
                self.outcomes = Some(dir.join("outcomes.csv"));
                self.rankings = Some(dir.join("rankings.csv"));
                for (slot, file) in [
                    (&mut self.synonyms, "synonyms.csv"),
                    (&mut self.aliases, "sponsor_aliases.csv"),
                    (&mut self.mesh_terms, "mesh_terms.csv"),
                    (&mut self.category_spending, "category_spending.csv"),
                    (&mut self.links, "links.csv"),
                    (&mut self.links_summary, "links_summary.csv"),
                ] {
                    let p = dir.join(file);
                    *slot = p.exists().then_some(p);
                }
            }
            "trials" => self.trials = path(),
            "outcomes" => self.outcomes = path(),
            "rankings" => self.rankings = path(),
            "synonyms" => self.synonyms = path(),
            "aliases" => self.aliases = path(),
            "mesh_terms" => self.mesh_terms = path(),
            "category_spending" => self.category_spending = path(),
            "links" => self.links = path(),
            "links_summary" => self.links_summary = path(),
            "side" => self.side = value.parse().map_err(Error::config)?,
            "cutoff" => self.cutoff = Some(parse_num(key, value)?),
            "split" => self.split = parse_split(value)?,
            "bootstrap_reps" => self.bootstrap_reps = parse_num(key, value)?,
            "band_reps" => self.band_reps = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "output" => self.output = PathBuf::from(value.trim()),
            "bandwidth" => self.bandwidth = value.trim().to_string(),
            "test" => self.test = value.trim().to_string(),
            "tail" => self.tail = value.parse().map_err(Error::config)?,
            "reflect" => self.reflect = parse_bool(key, value)?,
            "filters" => self.filters = parse_bool(key, value)?,
            "stopwords" => {
                self.stopwords = value
                    .split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect()
            }
            "completion_cutoff" => {
                self.completion_cutoff = NaiveDate::parse_from_str(value.trim(), "%Y-%m-%d")
                    .map_err(|_| Error::config(format!("`{key}`: expected YYYY-MM-DD, got `{value}`")))?
            }
            "group_by" => self.group_by = value.parse().map_err(Error::config)?,
            k if k.starts_with("sim.") => self.sim.set(&k[4..], value)?,
            other => return Err(Error::config(format!("unknown configuration key `{other}`"))),
        }
        Ok(())
    }

    /// Reads a key=value file; `#` starts a comment.
    pub fn load(path: &Path) -> Result<PipelineConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = PipelineConfig::default();
        cfg.apply_text(&text, &path.display().to_string())?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("{origin}:{}: expected key=value", i + 1)))?;
            self.set(k, v)
                .map_err(|e| Error::config(format!("{origin}:{}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff.unwrap_or_else(|| self.side.significance_cutoff())
    }

    /// Settings recorded in the manifest (input and output locations are
    /// recorded by content hash instead).
    pub fn manifest_pairs(&self) -> Vec<(String, String)> {
        let mut v = vec![
            ("side".to_string(), self.side.to_string()),
            ("cutoff".into(), self.cutoff().to_string()),
            ("split".into(), format!("{}:{}", self.split.criterion.label(), self.split.k)),
            ("bootstrap_reps".into(), self.bootstrap_reps.to_string()),
            ("band_reps".into(), self.band_reps.to_string()),
            ("seed".into(), self.seed.to_string()),
            ("bandwidth".into(), self.bandwidth.clone()),
            ("test".into(), self.test.clone()),
            (
                "tail".into(),
                match self.tail {
                    crate::decompose::TailKind::Kernel => "kernel".into(),
                    crate::decompose::TailKind::Empirical => "empirical".into(),
                },
            ),
            ("reflect".into(), self.reflect.to_string()),
            ("filters".into(), self.filters.to_string()),
            ("stopwords".into(), self.stopwords.join(",")),
            ("completion_cutoff".into(), self.completion_cutoff.to_string()),
        ];
        v.extend(self.sim.pairs().into_iter().map(|(k, val)| (format!("sim.{k}"), val)));
        v
    }

    fn input_paths(&self) -> Vec<&PathBuf> {
        [
            &self.trials,
            &self.outcomes,
            &self.rankings,
            &self.synonyms,
            &self.aliases,
            &self.mesh_terms,
            &self.category_spending,
            &self.links,
            &self.links_summary,
        ]
        .into_iter()
        .flatten()
        .collect()
    }

    /// Checks that the configured inputs exist before any work starts.
    pub fn validate(&self, cmd: Subcommand) -> Result<()> {
        if cmd != Subcommand::Simulate {
            for (name, p) in [
                ("trials", &self.trials),
                ("outcomes", &self.outcomes),
                ("rankings", &self.rankings),
            ] {
                if p.is_none() {
                    return Err(Error::config(format!(
                        "no {name} file configured (set `{name}=` or `input_dir=`)"
                    )));
                }
            }
        }
        for p in self.input_paths() {
            if !p.is_file() {
                return Err(Error::io(
                    p,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "input file not found"),
                ));
            }
        }
        if self.links.is_some() != self.links_summary.is_some() {
            return Err(Error::config("`links` and `links_summary` must be given together"));
        }
        crate::density::selectors().build_spec(&self.bandwidth)?;
        crate::discontinuity::tests().build_spec(&self.test)?;
        self.sim.validate()?;
        Ok(())
    }
}

/// What a run produced.
#[derive(Debug, Clone, Default)]
pub struct RunSummary {
    pub outputs: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

/// Runs one subcommand, writing its artifacts and `manifest.txt` into
/// the configured output directory.
pub fn run(cmd: Subcommand, cfg: &PipelineConfig) -> Result<RunSummary> {
    cfg.validate(cmd)?;
    std::fs::create_dir_all(&cfg.output).map_err(|e| Error::io(&cfg.output, e))?;
    let mut ctx = stages::Context::new(cfg);
    match cmd {
        Subcommand::Simulate => stages::simulate(&mut ctx)?,
        Subcommand::Ingest => stages::ingest(&mut ctx)?,
        Subcommand::Transform => stages::transform(&mut ctx)?,
        Subcommand::Density => stages::density(&mut ctx)?,
        Subcommand::Disctest => stages::disctest(&mut ctx)?,
        Subcommand::Link => stages::link(&mut ctx)?,
        Subcommand::FitSelection => stages::fit_selection(&mut ctx)?,
        Subcommand::Decompose => stages::decompose(&mut ctx)?,
        Subcommand::Sweep => stages::sweep(&mut ctx)?,
        Subcommand::Report => {
            stages::ingest(&mut ctx)?;
            stages::transform(&mut ctx)?;
            stages::density(&mut ctx)?;
            stages::disctest(&mut ctx)?;
            stages::link(&mut ctx)?;
            stages::fit_selection(&mut ctx)?;
            stages::decompose(&mut ctx)?;
            stages::sweep(&mut ctx)?;
        }
    }
    let manifest = Manifest {
        subcommand: cmd.name().to_string(),
        seed: cfg.seed,
        config: cfg.manifest_pairs(),
        inputs: cfg.input_paths().into_iter().cloned().collect(),
        outputs: ctx.written.clone(),
    };
    let path = cfg.output.join("manifest.txt");
    crate::registry::write_text(&path, &manifest.render()?)?;
    let mut outputs = ctx.written;
    outputs.push(path);
    Ok(RunSummary {
        outputs,
        warnings: ctx.warnings,
    })
}

/// Files of a directory tree with their SHA-256, for determinism checks.
pub fn directory_digest(dir: &Path) -> Result<BTreeMap<PathBuf, String>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).map_err(|e| Error::io(&d, e))? {
            let p = entry.map_err(|e| Error::io(&d, e))?.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap_or(&p).to_path_buf();
                out.insert(rel, sha256_file(&p)?);
            }
        }
    }
    Ok(out)
}
