//! Project configuration and the four `anisoeval` commands.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anisoeval_core::analytics::{self, AnalyticsError};
use anisoeval_core::datapipe::{self, DatapipeError, NgramIndex, SemanticIndex, NGRAM_SIZE};
use anisoeval_core::model::{read_jsonl, validate_scheme, write_jsonl};
use anisoeval_core::oracle::{EndpointClient, EndpointOptions};
use anisoeval_core::report::{self, AnalysisReport, ControlReport, ControlSettings, ReportError};
use anisoeval_core::scheduler::{read_run_summary, sanitize_file_component, RunSummary};
use anisoeval_core::scoring::{char_ngram_cosine, default_scorer, judge_from_completion, CascadeScorer, JudgeTemplate};
use anisoeval_core::synth::{synthetic_dataset, CohortKind, CohortSpec, PopulationSpec};
use anisoeval_core::{
    default_dimensions, default_schemes, default_schemes_for, run_evaluation, ContaminationFlag, ModelDescriptor, ModelError, Population,
    ResponderError, Sample, SchedulerConfig, SchedulerError, Scorer, SyntheticProfile, WeightScheme,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Scheduler(#[from] SchedulerError),
    #[error(transparent)]
    Datapipe(#[from] DatapipeError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error(transparent)]
    Responder(#[from] ResponderError),
    #[error("inconsistent dimensions: {0}")]
    InconsistentDimensions(String),
    #[error("unknown model {0}")]
    UnknownModel(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    /// Stable error name for the JSON error line.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "ConfigError",
            CliError::Model(ModelError::Parse { .. }) => "ParseError",
            CliError::Model(ModelError::DuplicateId { .. }) => "DuplicateId",
            CliError::Model(_) => "ModelError",
            CliError::Scheduler(SchedulerError::BudgetTooSmallForPilot { .. }) => "BudgetTooSmallForPilot",
            CliError::Scheduler(_) => "SchedulerError",
            CliError::Datapipe(_) => "DatapipeError",
            CliError::Report(ReportError::InconsistentDimensions(_)) | CliError::InconsistentDimensions(_) => {
                "InconsistentDimensions"
            }
            CliError::Report(_) | CliError::Analytics(_) => "AnalyticsError",
            CliError::Responder(_) => "ResponderError",
            CliError::UnknownModel(_) => "UnknownModel",
            CliError::Io { .. } => "IoError",
        }
    }

    pub fn to_json(&self) -> String {
        let mut v = serde_json::json!({ "error": self.kind(), "message": self.to_string() });
        if let CliError::Model(ModelError::Parse { line, .. } | ModelError::DuplicateId { line, .. }) = self {
            v["line"] = (*line).into();
        }
        v.to_string()
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

fn io_at(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_at(dir))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(io_at(path))?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e.into(),
    })?;
    writeln!(w).and_then(|_| w.flush()).map_err(io_at(path))
}

/// A configured model: a remote endpoint or a simulated profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelEntry {
    Endpoint(ModelDescriptor),
    Synthetic(SyntheticProfile),
}

impl ModelEntry {
    pub fn id(&self) -> &str {
        match self {
            ModelEntry::Endpoint(d) => &d.id,
            ModelEntry::Synthetic(p) => &p.model_id,
        }
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_workers() -> usize {
    1
}
fn default_timeout_ms() -> u64 {
    EndpointOptions::default().timeout_ms
}
fn default_max_inflight() -> usize {
    EndpointOptions::default().max_inflight
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectConfig {
    /// Sample file. When absent, `population` generates one.
    #[serde(default)]
    pub dataset_path: Option<PathBuf>,
    #[serde(default)]
    pub population: Option<PopulationSpec>,
    /// Strata; defaults to the dimensions present in the dataset.
    #[serde(default)]
    pub dimensions: Option<Vec<String>>,
    #[serde(default)]
    pub corpus_path: Option<PathBuf>,
    #[serde(default)]
    pub private_anchor_size: Option<usize>,
    #[serde(default)]
    pub scheduler: SchedulerConfig,
    /// Weighting schemes; the default ones restricted to the strata present
    /// when absent.
    #[serde(default)]
    pub schemes: Option<Vec<WeightScheme>>,
    #[serde(default)]
    pub models: Vec<ModelEntry>,
    /// Endpoint that adjudicates the similarity band; without one the band
    /// scores 0.
    #[serde(default)]
    pub judge: Option<ModelDescriptor>,
    #[serde(default)]
    pub cohort: Option<CohortSpec>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Models evaluated concurrently by `control`.
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_max_inflight")]
    pub max_inflight: usize,
}

impl Default for ProjectConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("every field has a default")
    }
}

impl ProjectConfig {
    /// Reads a JSON config; relative paths are taken from the config's
    /// directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_at(path))?;
        let mut cfg: ProjectConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = cfg.dataset_path.as_mut() {
            resolve(p);
        }
        if let Some(p) = cfg.corpus_path.as_mut() {
            resolve(p);
        }
        resolve(&mut cfg.output_dir);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.scheduler.validate()?;
        if self.workers == 0 {
            return Err(CliError::Config("workers must be >= 1".into()));
        }
        for m in &self.models {
            match m {
                ModelEntry::Endpoint(d) => d.validate()?,
                ModelEntry::Synthetic(p) => p.validate().map_err(CliError::Config)?,
            }
        }
        if let Some(dims) = &self.dimensions {
            for s in self.schemes_for(dims) {
                validate_scheme(&s, dims)?;
            }
        }
        Ok(())
    }

    pub fn schemes_for(&self, dims: &[String]) -> Vec<WeightScheme> {
        self.schemes.clone().unwrap_or_else(|| default_schemes_for(dims))
    }

    pub fn model(&self, id: &str) -> Result<&ModelEntry> {
        self.models
            .iter()
            .find(|m| m.id() == id)
            .ok_or_else(|| CliError::UnknownModel(id.to_string()))
    }

    /// Builds the stratified population from the dataset file or the
    /// synthetic specification.
    pub fn load_population(&self) -> Result<Population> {
        let dataset = match (&self.dataset_path, &self.population) {
            (Some(path), _) => {
                let f = File::open(path).map_err(io_at(path))?;
                read_jsonl(BufReader::new(f))?
            }
            (None, Some(spec)) => synthetic_dataset(spec),
            (None, None) => return Err(CliError::Config("set dataset_path or population".into())),
        };
        let pop = Population::new(&dataset, self.dimensions.as_deref())?;
        Ok(pop)
    }

    fn endpoint_options(&self) -> EndpointOptions {
        EndpointOptions {
            timeout_ms: self.timeout_ms,
            max_inflight: self.max_inflight,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub total: usize,
    pub active: usize,
    pub flagged: usize,
    pub private: usize,
    pub dataset_path: PathBuf,
    pub contamination_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub private_path: Option<PathBuf>,
}

/// Validates a sample file, drops samples found in the corpus and writes
/// `dataset.jsonl`, `contamination.jsonl` and `ingest.json` under `out_dir`.
/// With `private_anchor`, that many active samples are held out into
/// `private_anchor.jsonl`.
pub fn cmd_ingest(input: &Path, corpus: Option<&Path>, out_dir: &Path, private_anchor: Option<usize>, seed: u64) -> Result<IngestReport> {
    let f = File::open(input).map_err(io_at(input))?;
    let samples = read_jsonl(BufReader::new(f))?;
    let (ngrams, semantic) = match corpus {
        Some(dir) => {
            let docs = datapipe::load_corpus(dir)?;
            log::info!("corpus: {} documents", docs.len());
            (
                NgramIndex::build(&docs, NGRAM_SIZE),
                SemanticIndex::build(&docs, datapipe::trigram_embed)?,
            )
        }
        None => (NgramIndex::new(NGRAM_SIZE), SemanticIndex::default()),
    };
    let outcome = datapipe::decontaminate(&samples, &ngrams, &semantic, datapipe::trigram_embed)?;
    let (public, private) = match private_anchor {
        Some(n) => datapipe::split_private_anchor(&outcome.active, n, seed)?,
        None => (outcome.active.clone(), Vec::new()),
    };

    let dataset_path = out_dir.join("dataset.jsonl");
    let contamination_path = out_dir.join("contamination.jsonl");
    let mut w = create(&dataset_path)?;
    write_jsonl(&public, false, &mut w)?;
    w.flush().map_err(io_at(&dataset_path))?;
    write_flags(&contamination_path, &outcome.flags)?;
    let private_path = if private_anchor.is_some() {
        let p = out_dir.join("private_anchor.jsonl");
        let mut w = create(&p)?;
        write_jsonl(&private, true, &mut w)?;
        w.flush().map_err(io_at(&p))?;
        Some(p)
    } else {
        None
    };
    let report = IngestReport {
        total: samples.len(),
        active: public.len(),
        flagged: outcome.flags.len(),
        private: private.len(),
        dataset_path,
        contamination_path,
        private_path,
    };
    write_json(&out_dir.join("ingest.json"), &report)?;
    Ok(report)
}

fn write_flags(path: &Path, flags: &[ContaminationFlag]) -> Result<()> {
    let mut w = create(path)?;
    for f in flags {
        let line = serde_json::to_string(f).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e.into(),
        })?;
        writeln!(w, "{line}").map_err(io_at(path))?;
    }
    w.flush().map_err(io_at(path))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluateOutcome {
    pub path: PathBuf,
    pub summary: RunSummary,
}

fn judge_scorer(cfg: &ProjectConfig) -> Result<Box<dyn Scorer>> {
    let Some(judge) = &cfg.judge else {
        log::warn!("no judge configured; similarity-band answers score 0");
        return Ok(Box::new(default_scorer()));
    };
    let client = EndpointClient::new(judge, cfg.endpoint_options())?;
    let call = move |prompt: &str| -> std::result::Result<String, String> {
        let probe = Sample {
            prompt: prompt.to_string(),
            constraints: String::new(),
            ..judge_probe()
        };
        client.send(&probe).map(|r| r.content).map_err(|e| e.to_string())
    };
    let judge_fn = judge_from_completion(JudgeTemplate::bundled(), call);
    Ok(Box::new(CascadeScorer::new(char_ngram_cosine as fn(&str, &str) -> f64, judge_fn)))
}

fn judge_probe() -> Sample {
    Sample {
        id: "judge".into(),
        cell: anisoeval_core::CapabilityCell::new("Judge", "Judge"),
        task_type: "judge".into(),
        prompt: String::new(),
        constraints: String::new(),
        gold: anisoeval_core::GoldAnswer::exact(""),
        unit_cost: 1.0,
        source_tier: anisoeval_core::SourceTier::Fresh,
        created_at: String::new(),
        subtask: None,
        difficulty: None,
    }
}

/// Evaluates one configured model and writes `<model>.<seed>.run.jsonl`.
pub fn cmd_evaluate(cfg: &ProjectConfig, population: &Population, model_id: &str, out_dir: &Path) -> Result<EvaluateOutcome> {
    let entry = cfg.model(model_id)?;
    let run = match entry {
        ModelEntry::Synthetic(p) => run_evaluation(model_id, population, &cfg.scheduler, p, &default_scorer().prefer_hint(true))?,
        ModelEntry::Endpoint(d) => {
            let client = EndpointClient::new(d, cfg.endpoint_options())?;
            let scorer = judge_scorer(cfg)?;
            run_evaluation(model_id, population, &cfg.scheduler, &client, scorer.as_ref())?
        }
    };
    let path = out_dir.join(run.file_name());
    let mut w = create(&path)?;
    let summary = run.write_jsonl(population, cfg.scheduler.alpha, &mut w)?;
    w.flush().map_err(io_at(&path))?;
    Ok(EvaluateOutcome { path, summary })
}

/// Human-readable per-dimension estimates for the terminal.
pub fn render_summary(s: &RunSummary) -> String {
    let mut out = format!("{} ({} mode, seed {})\n", s.model_id, s.mode, s.seed);
    let width = s.strata.iter().map(|h| h.id.len()).max().unwrap_or(0);
    for h in &s.strata {
        out.push_str(&format!(
            "  {:<width$}  {:.4} ± {:.4}  n={}/{}  {:?}\n",
            h.id, h.mean, h.halfwidth, h.n, h.population_size, h.stopped_reason
        ));
    }
    out.push_str(&format!("  overall  {:.4} ± {:.4}\n", s.mean, s.halfwidth));
    out.push_str(&format!(
        "  cost {:.2} of {:.2} (ratio {:.4}), {} failed draws\n",
        s.total_cost, s.full_set_cost, s.cost_ratio, s.failures
    ));
    out
}

/// Every `*.run.jsonl` in `dir`, sorted by name.
pub fn find_run_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_at(dir))? {
        let p = entry.map_err(io_at(dir))?.path();
        if p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with(".run.jsonl")) {
            files.push(p);
        }
    }
    files.sort();
    Ok(files)
}

/// Per-model stratum means from run summaries. Several runs of one model
/// are averaged stratum by stratum.
pub fn matrix_from_summaries(summaries: &[RunSummary]) -> Result<(Vec<String>, Vec<String>, Vec<Vec<f64>>)> {
    let first = summaries
        .first()
        .ok_or_else(|| CliError::Config("no run files to analyze".into()))?;
    let dims: Vec<String> = first.strata.iter().map(|h| h.id.clone()).collect();
    let mut by_model: BTreeMap<&str, (Vec<f64>, usize)> = BTreeMap::new();
    for s in summaries {
        let ids: Vec<&str> = s.strata.iter().map(|h| h.id.as_str()).collect();
        if ids != dims.iter().map(String::as_str).collect::<Vec<_>>() {
            return Err(CliError::InconsistentDimensions(format!(
                "{} has [{}], expected [{}]",
                s.model_id,
                ids.join(","),
                dims.join(",")
            )));
        }
        let slot = by_model.entry(&s.model_id).or_insert_with(|| (vec![0.0; dims.len()], 0));
        for (acc, h) in slot.0.iter_mut().zip(&s.strata) {
            *acc += h.mean;
        }
        slot.1 += 1;
    }
    let (ids, rows) = by_model
        .into_iter()
        .map(|(id, (sum, k))| (id.to_string(), sum.into_iter().map(|x| x / k as f64).collect()))
        .unzip();
    Ok((ids, dims, rows))
}

/// Builds the score matrix from run files and writes `analysis.json`,
/// `leaderboard.<scheme>.csv`, `trajectories.csv` and `scores.csv`.
/// Without `schemes` the default ones are restricted to the run dimensions.
pub fn cmd_analyze(
    run_files: &[PathBuf],
    schemes: Option<&[WeightScheme]>,
    groups: &BTreeMap<String, String>,
    out_dir: &Path,
    seed: u64,
) -> Result<AnalysisReport> {
    let summaries = run_files
        .iter()
        .map(|p| {
            let f = File::open(p).map_err(io_at(p))?;
            read_run_summary(BufReader::new(f)).map_err(CliError::from)
        })
        .collect::<Result<Vec<_>>>()?;
    let (ids, dims, raw) = matrix_from_summaries(&summaries)?;
    let schemes = schemes.map_or_else(|| default_schemes_for(&dims), <[WeightScheme]>::to_vec);
    let schemes = schemes.as_slice();
    for s in schemes {
        validate_scheme(s, &dims)?;
    }
    let matrix = analytics::build_score_matrix(ids, dims, raw, analytics::DEFAULT_ANCHORS)?;
    let mut rep = report::analyze(&matrix, schemes, seed)?;
    report::ks_between_groups(&mut rep, groups)?;

    write_json(&out_dir.join("analysis.json"), &rep)?;
    for board in &rep.leaderboards {
        let p = out_dir.join(format!("leaderboard.{}.csv", sanitize_file_component(&board.scheme)));
        let mut w = create(&p)?;
        report::write_leaderboard_csv(board, &matrix, &mut w)?;
    }
    let names: Vec<String> = schemes.iter().map(|s| s.name.clone()).collect();
    let p = out_dir.join("trajectories.csv");
    report::write_trajectories_csv(&rep.rsa, &names, create(&p)?)?;
    let p = out_dir.join("scores.csv");
    let mut w = create(&p)?;
    matrix.write_csv(true, &mut w)?;
    w.flush().map_err(io_at(&p))?;
    Ok(rep)
}

/// Model id to category name for configured endpoint models.
pub fn model_groups(cfg: &ProjectConfig) -> BTreeMap<String, String> {
    cfg.models
        .iter()
        .filter_map(|m| match m {
            ModelEntry::Endpoint(d) => serde_json::to_value(d.category)
                .ok()
                .and_then(|v| v.as_str().map(|s| (d.id.clone(), s.to_string()))),
            ModelEntry::Synthetic(_) => None,
        })
        .collect()
}

pub const DEFAULT_COHORT_SIZE: usize = 50;
pub const DEFAULT_SYNTHETIC_PER_DIMENSION: usize = 1000;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ControlOverrides {
    pub seed: Option<u64>,
    pub size: Option<usize>,
    pub kind: Option<CohortKind>,
    pub workers: Option<usize>,
}

/// The cohort used by `control`: the configured one, else an anisotropic
/// cohort of 50.
pub fn control_settings(cfg: &ProjectConfig, o: &ControlOverrides) -> ControlSettings {
    let mut cohort = cfg.cohort.clone().unwrap_or(CohortSpec {
        kind: CohortKind::Anisotropic,
        size: DEFAULT_COHORT_SIZE,
        low: 0.3,
        high: 0.9,
        grading: Default::default(),
        seed: cfg.scheduler.rng_seed,
    });
    if let Some(s) = o.seed {
        cohort.seed = s;
    }
    if let Some(n) = o.size {
        cohort.size = n;
    }
    if let Some(k) = o.kind {
        cohort.kind = k;
    }
    ControlSettings {
        cohort,
        scheduler: cfg.scheduler.clone(),
        schemes: cfg.schemes.clone().unwrap_or_else(default_schemes),
        workers: o.workers.unwrap_or(cfg.workers),
    }
}

/// Population for `control`: the configured one, else 1,000 synthetic
/// samples in each default dimension.
pub fn control_population(cfg: &ProjectConfig) -> Result<Population> {
    if cfg.dataset_path.is_some() || cfg.population.is_some() {
        return cfg.load_population();
    }
    let spec = PopulationSpec {
        dimensions: default_dimensions(),
        per_dimension: DEFAULT_SYNTHETIC_PER_DIMENSION,
        cost_spread: 0.5,
    };
    Ok(Population::new(&synthetic_dataset(&spec), None)?)
}

/// Runs the dynamic-versus-full-set control experiment and writes
/// `control.json`.
pub fn cmd_control(cfg: &ProjectConfig, overrides: &ControlOverrides, out_dir: &Path) -> Result<(PathBuf, ControlReport)> {
    let population = control_population(cfg)?;
    let mut settings = control_settings(cfg, overrides);
    settings.schemes = cfg.schemes_for(&population.dimension_ids());
    for s in &settings.schemes {
        validate_scheme(s, &population.dimension_ids())?;
    }
    let rep = report::run_control(&settings, &population)?;
    let path = out_dir.join("control.json");
    write_json(&path, &rep)?;
    Ok((path, rep))
}
