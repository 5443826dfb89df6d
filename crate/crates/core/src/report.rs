//! Whole-cohort reports: the analysis report over a score matrix, and the
//! dynamic-versus-full-set control experiment.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::{self, AnalyticsError, AnisotropyReport, Interval, RankTrajectory, RankedModel, StabilityReport};
use crate::model::{ScoreMatrix, WeightScheme};
use crate::oracle::SyntheticProfile;
use crate::scheduler::{run_evaluation, EvaluationRun, Mode, Population, SchedulerConfig, SchedulerError};
use crate::scoring::{default_scorer, Scorer};
use crate::synth::{synthetic_cohort, CohortKind, CohortSpec};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error(transparent)]
    Scheduler(#[from] SchedulerError),
    #[error("inconsistent dimensions: {0}")]
    InconsistentDimensions(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDiagnostics {
    pub model_id: String,
    pub ci: f64,
    pub dgs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlations {
    pub dimension_ids: Vec<String>,
    pub pearson: Vec<Vec<Option<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeLeaderboard {
    pub scheme: String,
    pub ranking: Vec<RankedModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    /// Absent when fewer than two models or dimensions vary.
    pub anisotropy: Option<AnisotropyReport>,
    pub ci_per_model: Vec<ModelDiagnostics>,
    pub rsa: Vec<RankTrajectory>,
    pub stability: StabilityReport,
    pub correlations: Correlations,
    pub leaderboards: Vec<SchemeLeaderboard>,
    pub matrix: ScoreMatrix,
    pub warnings: Vec<String>,
}

/// Runs every diagnostic over `matrix.normalized`.
pub fn analyze(matrix: &ScoreMatrix, schemes: &[WeightScheme], bootstrap_seed: u64) -> Result<AnalysisReport, ReportError> {
    let mut warnings = Vec::new();
    let s = &matrix.normalized;
    let anisotropy = if matrix.model_ids.len() >= 2 {
        match analytics::anisotropy_detail(s) {
            Ok(r) => Some(r),
            Err(e) => {
                warnings.push(format!("anisotropy index unavailable: {e}"));
                None
            }
        }
    } else {
        warnings.push("anisotropy index needs at least two models".into());
        None
    };
    let ci_per_model = matrix
        .model_ids
        .iter()
        .zip(s)
        .map(|(id, row)| {
            Ok(ModelDiagnostics {
                model_id: id.clone(),
                ci: analytics::capability_inconsistency(row, analytics::CI_EPSILON)?,
                dgs: analytics::dgs(row)?,
            })
        })
        .collect::<Result<Vec<_>, AnalyticsError>>()?;
    let leaderboards = schemes
        .iter()
        .map(|scheme| {
            Ok(SchemeLeaderboard {
                scheme: scheme.name.clone(),
                ranking: analytics::rank_under_scheme(s, &matrix.model_ids, &matrix.dimension_ids, scheme)?,
            })
        })
        .collect::<Result<Vec<_>, AnalyticsError>>()?;
    let pairs: Vec<(String, Vec<RankedModel>)> =
        leaderboards.iter().map(|l| (l.scheme.clone(), l.ranking.clone())).collect();
    let (rsa, mut stability) = analytics::rsa(&pairs)?;
    let rsa_values: Vec<f64> = rsa.iter().map(|t| t.rsa as f64).collect();
    if rsa_values.len() >= 2 {
        let ci = analytics::bootstrap_mean_ci(&rsa_values, analytics::DEFAULT_BOOTSTRAP_ITERS, bootstrap_seed)?;
        stability.bootstrap_ci = Some((ci.lo, ci.hi));
    }
    Ok(AnalysisReport {
        anisotropy,
        ci_per_model,
        rsa,
        stability,
        correlations: Correlations {
            dimension_ids: matrix.dimension_ids.clone(),
            pearson: analytics::correlation_matrix(s),
        },
        leaderboards,
        matrix: matrix.clone(),
        warnings,
    })
}

/// Fills `stability.ks` with the two-sample KS test between the RSA values
/// of the two largest model groups. Groups come from `group_of`; models
/// without a group are ignored. Fewer than two groups leaves the report as is.
pub fn ks_between_groups(report: &mut AnalysisReport, group_of: &BTreeMap<String, String>) -> Result<(), ReportError> {
    let mut groups: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for t in &report.rsa {
        if let Some(g) = group_of.get(&t.model_id) {
            groups.entry(g.as_str()).or_default().push(t.rsa as f64);
        }
    }
    let mut sized: Vec<(&str, Vec<f64>)> = groups.into_iter().collect();
    sized.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then(a.0.cmp(b.0)));
    if sized.len() >= 2 {
        report.stability.ks = Some(analytics::ks_statistic(&sized[0].1, &sized[1].1)?);
    }
    Ok(())
}

fn csv_err(e: csv::Error) -> ReportError {
    ReportError::Io(std::io::Error::other(e))
}

/// `rank,model_id,overall,<dimension columns>` with normalized scores.
pub fn write_leaderboard_csv<W: Write>(board: &SchemeLeaderboard, matrix: &ScoreMatrix, out: W) -> Result<(), ReportError> {
    let row_of: BTreeMap<&str, &Vec<f64>> = matrix
        .model_ids
        .iter()
        .map(String::as_str)
        .zip(&matrix.normalized)
        .collect();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["rank".to_string(), "model_id".into(), "overall".into()];
    header.extend(matrix.dimension_ids.iter().cloned());
    w.write_record(&header).map_err(csv_err)?;
    for r in &board.ranking {
        let mut row = vec![r.rank.to_string(), r.model_id.clone(), r.overall.to_string()];
        row.extend(row_of[r.model_id.as_str()].iter().map(|x| x.to_string()));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// `model_id,<rank under each scheme>,rsa`.
pub fn write_trajectories_csv<W: Write>(trajectories: &[RankTrajectory], schemes: &[String], out: W) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["model_id".to_string()];
    header.extend(schemes.iter().cloned());
    header.push("rsa".into());
    w.write_record(&header).map_err(csv_err)?;
    for t in trajectories {
        let mut row = vec![t.model_id.clone()];
        row.extend(schemes.iter().map(|s| t.ranks.get(s).map_or(String::new(), |r| r.to_string())));
        row.push(t.rsa.to_string());
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-model stratum means from finished runs, in the population's
/// dimension order.
pub fn raw_matrix(runs: &[EvaluationRun], population: &Population) -> Result<(Vec<String>, Vec<Vec<f64>>), ReportError> {
    let dims = population.dimension_ids();
    let mut ids = Vec::with_capacity(runs.len());
    let mut rows = Vec::with_capacity(runs.len());
    for run in runs {
        let row = dims
            .iter()
            .map(|d| {
                run.per_stratum
                    .get(d)
                    .and_then(|a| a.mean())
                    .ok_or_else(|| ReportError::InconsistentDimensions(format!("{} lacks {d}", run.model_id)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        ids.push(run.model_id.clone());
        rows.push(row);
    }
    Ok((ids, rows))
}

/// Evaluates every profile, spreading models over `workers` threads. Runs
/// come back in profile order whatever the thread count.
pub fn evaluate_cohort<S: Scorer>(
    profiles: &[SyntheticProfile],
    population: &Population,
    config: &SchedulerConfig,
    scorer: &S,
    workers: usize,
) -> Result<Vec<EvaluationRun>, ReportError> {
    let per_model = SchedulerConfig {
        workers: 1,
        ..config.clone()
    };
    let job = |p: &SyntheticProfile| run_evaluation(&p.model_id, population, &per_model, p, scorer);
    let results: Vec<Result<EvaluationRun, SchedulerError>> = if workers > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| ReportError::Invalid(e.to_string()))?;
        pool.install(|| profiles.par_iter().map(job).collect())
    } else {
        profiles.iter().map(job).collect()
    };
    Ok(results.into_iter().collect::<Result<Vec<_>, _>>()?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSettings {
    pub cohort: CohortSpec,
    pub scheduler: SchedulerConfig,
    pub schemes: Vec<WeightScheme>,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlReport {
    pub cohort_kind: CohortKind,
    pub cohort_size: usize,
    pub seed: u64,
    pub delta: f64,
    pub alpha: f64,
    pub dimensions: Vec<String>,
    pub schemes: Vec<String>,
    pub mean_rsa_dynamic: f64,
    pub mean_rsa_full_set: f64,
    /// Dynamic minus full-set mean RSA.
    pub rsa_delta: f64,
    pub rsa_ci_dynamic: Interval,
    pub rsa_ci_full_set: Interval,
    /// Spearman correlation of population-weighted overall estimates.
    pub spearman_overall: Option<f64>,
    pub spearman_per_scheme: BTreeMap<String, Option<f64>>,
    pub mean_cost_ratio: f64,
    pub total_cost_dynamic: f64,
    pub total_cost_full_set: f64,
    pub stability_dynamic: StabilityReport,
    pub stability_full_set: StabilityReport,
    /// KS test between the per-model RSA values of the two modes.
    pub ks_rsa: Option<(f64, f64)>,
    pub warnings: Vec<String>,
}

fn overall(runs: &[EvaluationRun], population: &Population, alpha: f64) -> Result<Vec<f64>, ReportError> {
    runs.iter()
        .map(|r| Ok(crate::scheduler::stratified_estimate(r, &population.strata, alpha)?.mean))
        .collect()
}

fn scheme_scores(report: &AnalysisReport, model_ids: &[String]) -> BTreeMap<String, Vec<f64>> {
    report
        .leaderboards
        .iter()
        .map(|b| {
            let by_id: BTreeMap<&str, f64> = b.ranking.iter().map(|r| (r.model_id.as_str(), r.overall)).collect();
            (b.scheme.clone(), model_ids.iter().map(|m| by_id[m.as_str()]).collect())
        })
        .collect()
}

/// Evaluates a synthetic cohort in both modes and compares rank stability
/// and ranking fidelity.
pub fn run_control(settings: &ControlSettings, population: &Population) -> Result<ControlReport, ReportError> {
    let dims = population.dimension_ids();
    let profiles = synthetic_cohort(&settings.cohort, &dims);
    let scorer = default_scorer().prefer_hint(true);
    let cfg = |mode| SchedulerConfig {
        mode,
        rng_seed: settings.cohort.seed,
        ..settings.scheduler.clone()
    };
    let dynamic = evaluate_cohort(&profiles, population, &cfg(Mode::Dynamic), &scorer, settings.workers)?;
    let full = evaluate_cohort(&profiles, population, &cfg(Mode::FullSet), &scorer, settings.workers)?;

    let build = |runs: &[EvaluationRun]| -> Result<ScoreMatrix, ReportError> {
        let (ids, raw) = raw_matrix(runs, population)?;
        Ok(analytics::build_score_matrix(ids, dims.clone(), raw, analytics::DEFAULT_ANCHORS)?)
    };
    let seed = settings.cohort.seed;
    let rep_dyn = analyze(&build(&dynamic)?, &settings.schemes, seed)?;
    let rep_full = analyze(&build(&full)?, &settings.schemes, seed)?;

    let mut warnings = Vec::new();
    let alpha = settings.scheduler.alpha;
    let spearman_or_warn = |a: &[f64], b: &[f64], what: &str, warnings: &mut Vec<String>| match analytics::spearman(a, b) {
        Ok(r) => Some(r),
        Err(e) => {
            warnings.push(format!("{what}: rank correlation undefined ({e}); cohort is degenerate"));
            None
        }
    };
    let spearman_overall = spearman_or_warn(
        &overall(&dynamic, population, alpha)?,
        &overall(&full, population, alpha)?,
        "overall",
        &mut warnings,
    );
    let ids: Vec<String> = profiles.iter().map(|p| p.model_id.clone()).collect();
    let (sd, sf) = (scheme_scores(&rep_dyn, &ids), scheme_scores(&rep_full, &ids));
    let mut spearman_per_scheme = BTreeMap::new();
    for (name, d) in &sd {
        let r = spearman_or_warn(d, &sf[name], name, &mut warnings);
        spearman_per_scheme.insert(name.clone(), r);
    }

    let rsa_of = |r: &AnalysisReport| r.rsa.iter().map(|t| t.rsa as f64).collect::<Vec<_>>();
    let (rd, rf) = (rsa_of(&rep_dyn), rsa_of(&rep_full));
    let ci = |x: &[f64]| -> Result<Interval, ReportError> {
        if x.len() >= 2 {
            Ok(analytics::bootstrap_mean_ci(x, analytics::DEFAULT_BOOTSTRAP_ITERS, seed)?)
        } else {
            let m = x.first().copied().unwrap_or(0.0);
            Ok(Interval { lo: m, hi: m })
        }
    };
    let full_cost = population.total_cost();
    let cost_dyn: f64 = dynamic.iter().map(|r| r.total_cost).sum();
    let cost_full: f64 = full.iter().map(|r| r.total_cost).sum();
    let mean_cost_ratio = dynamic.iter().map(|r| r.total_cost / full_cost).sum::<f64>() / dynamic.len().max(1) as f64;
    warnings.extend(rep_dyn.warnings.iter().map(|w| format!("dynamic: {w}")));
    warnings.extend(rep_full.warnings.iter().map(|w| format!("full_set: {w}")));

    Ok(ControlReport {
        cohort_kind: settings.cohort.kind,
        cohort_size: profiles.len(),
        seed,
        delta: settings.scheduler.delta,
        alpha,
        dimensions: dims,
        schemes: settings.schemes.iter().map(|s| s.name.clone()).collect(),
        mean_rsa_dynamic: rep_dyn.stability.mean_rsa,
        mean_rsa_full_set: rep_full.stability.mean_rsa,
        rsa_delta: rep_dyn.stability.mean_rsa - rep_full.stability.mean_rsa,
        rsa_ci_dynamic: ci(&rd)?,
        rsa_ci_full_set: ci(&rf)?,
        spearman_overall,
        spearman_per_scheme,
        mean_cost_ratio,
        total_cost_dynamic: cost_dyn,
        total_cost_full_set: cost_full,
        stability_dynamic: rep_dyn.stability,
        stability_full_set: rep_full.stability,
        ks_rsa: analytics::ks_statistic(&rd, &rf).ok(),
        warnings,
    })
}
