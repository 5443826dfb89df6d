//! Anisotropy and ranking-stability diagnostics over a model x dimension
//! score table.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{validate_scheme, ScoreMatrix, WeightScheme};
use crate::rng;

/// Floor applied to difficulty parameters.
pub const BETA_FLOOR: f64 = 0.05;
/// Smoothing constant of the regularized coefficient of variation.
pub const CI_EPSILON: f64 = 0.1;
/// Generalization gaps above this flag a model.
pub const GAP_THRESHOLD: f64 = 0.15;
pub const DEFAULT_ANCHORS: usize = 10;
pub const DEFAULT_BOOTSTRAP_ITERS: usize = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticsError {
    #[error("need at least {need} models, have {have}")]
    TooFewModels { need: usize, have: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("every dimension is constant across models")]
    DegenerateMatrix,
    #[error("empty vector")]
    EmptyVector,
    #[error("scheme does not match matrix dimensions: {0}")]
    SchemeDimensionMismatch(String),
    #[error("model {model} has no rank under scheme {scheme}")]
    MissingRank { model: String, scheme: String },
    #[error("length mismatch ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("zero variance")]
    ZeroVariance,
    #[error("empty sample")]
    Empty,
    #[error("value {0} outside [0,1]")]
    OutOfRange(f64),
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Difficulty parameter per dimension: the mean raw score of the `top_n`
/// models with the highest unweighted mean (ties by model id), floored at
/// [`BETA_FLOOR`].
pub fn anchor_difficulty(raw: &[Vec<f64>], model_ids: &[String], top_n: usize) -> Result<Vec<f64>, AnalyticsError> {
    if raw.len() != model_ids.len() {
        return Err(AnalyticsError::ShapeMismatch("raw rows vs model ids".into()));
    }
    if top_n == 0 || raw.len() < top_n {
        return Err(AnalyticsError::TooFewModels {
            need: top_n.max(1),
            have: raw.len(),
        });
    }
    let k = raw[0].len();
    if raw.iter().any(|r| r.len() != k) || k == 0 {
        return Err(AnalyticsError::ShapeMismatch("ragged or empty rows".into()));
    }
    let mut order: Vec<(f64, &str, usize)> = raw
        .iter()
        .zip(model_ids)
        .enumerate()
        .map(|(i, (r, id))| (mean(r), id.as_str(), i))
        .collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    let anchors: Vec<usize> = order.iter().take(top_n).map(|x| x.2).collect();
    Ok((0..k)
        .map(|j| {
            let b = anchors.iter().map(|&i| raw[i][j]).sum::<f64>() / top_n as f64;
            b.max(BETA_FLOOR)
        })
        .collect())
}

/// `s = min(r / beta, 1)`.
pub fn normalize_scores(raw: &[Vec<f64>], beta: &[f64]) -> Result<Vec<Vec<f64>>, AnalyticsError> {
    raw.iter()
        .map(|row| {
            if row.len() != beta.len() {
                return Err(AnalyticsError::ShapeMismatch("row length vs beta".into()));
            }
            Ok(row.iter().zip(beta).map(|(r, b)| (r / b).clamp(0.0, 1.0)).collect())
        })
        .collect()
}

/// Builds a [`ScoreMatrix`] with anchor-normalized scores. Uses
/// `min(top_n, models)` anchors.
pub fn build_score_matrix(
    model_ids: Vec<String>,
    dimension_ids: Vec<String>,
    raw: Vec<Vec<f64>>,
    top_n: usize,
) -> Result<ScoreMatrix, AnalyticsError> {
    let anchors = top_n.min(model_ids.len());
    let difficulty = anchor_difficulty(&raw, &model_ids, anchors)?;
    if difficulty.len() != dimension_ids.len() {
        return Err(AnalyticsError::ShapeMismatch("dimension ids vs columns".into()));
    }
    let normalized = normalize_scores(&raw, &difficulty)?;
    Ok(ScoreMatrix {
        model_ids,
        dimension_ids,
        raw,
        normalized,
        difficulty,
    })
}

/// Product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, AnalyticsError> {
    if x.len() != y.len() {
        return Err(AnalyticsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(AnalyticsError::Empty);
    }
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(AnalyticsError::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks, ties receive the average of their positions.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, AnalyticsError> {
    if x.len() != y.len() {
        return Err(AnalyticsError::LengthMismatch(x.len(), y.len()));
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

fn column(scores: &[Vec<f64>], j: usize) -> Vec<f64> {
    scores.iter().map(|r| r[j]).collect()
}

fn has_variance(col: &[f64]) -> bool {
    col.iter().any(|&v| v != col[0])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnisotropyReport {
    pub index: f64,
    pub mean_correlation: f64,
    pub pairs_used: usize,
    pub constant_dimensions: Vec<usize>,
}

/// One minus the mean pairwise Pearson correlation between dimension
/// columns. Pairs touching a constant column are skipped.
pub fn anisotropy_index(scores: &[Vec<f64>]) -> Result<f64, AnalyticsError> {
    anisotropy_detail(scores).map(|r| r.index)
}

pub fn anisotropy_detail(scores: &[Vec<f64>]) -> Result<AnisotropyReport, AnalyticsError> {
    if scores.len() < 2 {
        return Err(AnalyticsError::TooFewModels {
            need: 2,
            have: scores.len(),
        });
    }
    let k = scores[0].len();
    if scores.iter().any(|r| r.len() != k) {
        return Err(AnalyticsError::ShapeMismatch("ragged rows".into()));
    }
    if k < 2 {
        return Err(AnalyticsError::ShapeMismatch("need at least two dimensions".into()));
    }
    let cols: Vec<Vec<f64>> = (0..k).map(|j| column(scores, j)).collect();
    let constant: Vec<usize> = (0..k).filter(|&j| !has_variance(&cols[j])).collect();
    if !constant.is_empty() {
        log::warn!("skipping {} constant dimension(s) in anisotropy index", constant.len());
    }
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..k {
        for j in i + 1..k {
            if constant.contains(&i) || constant.contains(&j) {
                continue;
            }
            total += pearson(&cols[i], &cols[j])?;
            pairs += 1;
        }
    }
    if pairs == 0 {
        return Err(AnalyticsError::DegenerateMatrix);
    }
    let rho = total / pairs as f64;
    Ok(AnisotropyReport {
        index: 1.0 - rho,
        mean_correlation: rho,
        pairs_used: pairs,
        constant_dimensions: constant,
    })
}

/// Pairwise Pearson matrix between dimension columns; `None` where a
/// column is constant.
pub fn correlation_matrix(scores: &[Vec<f64>]) -> Vec<Vec<Option<f64>>> {
    let k = scores.first().map_or(0, Vec::len);
    let cols: Vec<Vec<f64>> = (0..k).map(|j| column(scores, j)).collect();
    (0..k)
        .map(|i| (0..k).map(|j| pearson(&cols[i], &cols[j]).ok()).collect())
        .collect()
}

/// Regularized coefficient of variation `sigma / (mean + epsilon)`, with the
/// population (1/K) standard deviation.
pub fn capability_inconsistency(s: &[f64], epsilon: f64) -> Result<f64, AnalyticsError> {
    if s.is_empty() {
        return Err(AnalyticsError::EmptyVector);
    }
    let m = mean(s);
    let var = s.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / s.len() as f64;
    Ok(var.sqrt() / (m + epsilon))
}

/// Spread between a model's strongest and weakest dimension.
pub fn dgs(s: &[f64]) -> Result<f64, AnalyticsError> {
    let max = s.iter().copied().reduce(f64::max).ok_or(AnalyticsError::EmptyVector)?;
    let min = s.iter().copied().reduce(f64::min).ok_or(AnalyticsError::EmptyVector)?;
    Ok(max - min)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedModel {
    pub rank: usize,
    pub model_id: String,
    pub overall: f64,
}

/// Sorts models by `sum_k w_k s_{m,k}`, highest first; ties go to the
/// smaller model id.
pub fn rank_under_scheme(
    scores: &[Vec<f64>],
    model_ids: &[String],
    dimension_ids: &[String],
    scheme: &WeightScheme,
) -> Result<Vec<RankedModel>, AnalyticsError> {
    validate_scheme(scheme, dimension_ids).map_err(|e| AnalyticsError::SchemeDimensionMismatch(e.to_string()))?;
    if scores.len() != model_ids.len() {
        return Err(AnalyticsError::ShapeMismatch("scores vs model ids".into()));
    }
    let w: Vec<f64> = dimension_ids.iter().map(|d| scheme.weight(d)).collect();
    let mut rows = Vec::with_capacity(scores.len());
    for (row, id) in scores.iter().zip(model_ids) {
        if row.len() != w.len() {
            return Err(AnalyticsError::ShapeMismatch(format!("row for {id}")));
        }
        let overall: f64 = row.iter().zip(&w).map(|(s, w)| s * w).sum();
        rows.push((overall, id));
    }
    rows.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    Ok(rows
        .into_iter()
        .enumerate()
        .map(|(i, (overall, id))| RankedModel {
            rank: i + 1,
            model_id: id.clone(),
            overall,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTrajectory {
    pub model_id: String,
    pub ranks: BTreeMap<String, usize>,
    pub rsa: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub mean_rsa: f64,
    pub share_rsa_ge_10: f64,
    pub share_rsa_ge_20: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bootstrap_ci: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ks: Option<(f64, f64)>,
}

/// Rank stability amplitude per model: max minus min rank across schemes.
/// Trajectories come back sorted by model id.
pub fn rsa(rankings: &[(String, Vec<RankedModel>)]) -> Result<(Vec<RankTrajectory>, StabilityReport), AnalyticsError> {
    let mut models: Vec<String> = rankings
        .iter()
        .flat_map(|(_, r)| r.iter().map(|m| m.model_id.clone()))
        .collect();
    models.sort();
    models.dedup();
    if models.is_empty() {
        return Err(AnalyticsError::Empty);
    }
    let lookup: Vec<(&String, BTreeMap<&str, usize>)> = rankings
        .iter()
        .map(|(name, r)| (name, r.iter().map(|m| (m.model_id.as_str(), m.rank)).collect()))
        .collect();
    let mut traj = Vec::with_capacity(models.len());
    for m in &models {
        let mut ranks = BTreeMap::new();
        for (scheme, table) in &lookup {
            let r = table.get(m.as_str()).ok_or_else(|| AnalyticsError::MissingRank {
                model: m.clone(),
                scheme: (*scheme).clone(),
            })?;
            ranks.insert((*scheme).clone(), *r);
        }
        let hi = ranks.values().max().copied().unwrap_or(0);
        let lo = ranks.values().min().copied().unwrap_or(0);
        traj.push(RankTrajectory {
            model_id: m.clone(),
            ranks,
            rsa: hi - lo,
        });
    }
    let report = stability_summary(&traj.iter().map(|t| t.rsa as f64).collect::<Vec<_>>());
    Ok((traj, report))
}

pub fn stability_summary(rsa_values: &[f64]) -> StabilityReport {
    let n = rsa_values.len().max(1) as f64;
    StabilityReport {
        mean_rsa: if rsa_values.is_empty() { 0.0 } else { mean(rsa_values) },
        share_rsa_ge_10: rsa_values.iter().filter(|&&r| r >= 10.0).count() as f64 / n,
        share_rsa_ge_20: rsa_values.iter().filter(|&&r| r >= 20.0).count() as f64 / n,
        bootstrap_ci: None,
        ks: None,
    }
}

/// Type-7 sample quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn overlaps(&self, other: &Interval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

fn percentile_interval(mut stats: Vec<f64>) -> Interval {
    stats.sort_by(f64::total_cmp);
    Interval {
        lo: quantile_sorted(&stats, 0.025),
        hi: quantile_sorted(&stats, 0.975),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedBootstrap {
    pub iterations: usize,
    pub mean_a: Interval,
    pub mean_b: Interval,
    pub difference: Interval,
}

/// Percentile 95% intervals for mean(a), mean(b) and mean(a - b) from
/// resampling model indices with replacement. Iteration `i` draws from its
/// own stream keyed by `seed + i`.
pub fn paired_bootstrap(a: &[f64], b: &[f64], iters: usize, seed: u64) -> Result<PairedBootstrap, AnalyticsError> {
    if a.len() != b.len() {
        return Err(AnalyticsError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 || iters == 0 {
        return Err(AnalyticsError::Empty);
    }
    let n = a.len();
    let stats: Vec<(f64, f64)> = (0..iters)
        .into_par_iter()
        .map(|i| {
            let mut g = rng::stream(seed.wrapping_add(i as u64));
            let (mut sa, mut sb) = (0.0, 0.0);
            for _ in 0..n {
                let j = g.gen_range(0..n);
                sa += a[j];
                sb += b[j];
            }
            (sa / n as f64, sb / n as f64)
        })
        .collect();
    Ok(PairedBootstrap {
        iterations: iters,
        mean_a: percentile_interval(stats.iter().map(|s| s.0).collect()),
        mean_b: percentile_interval(stats.iter().map(|s| s.1).collect()),
        difference: percentile_interval(stats.iter().map(|s| s.0 - s.1).collect()),
    })
}

/// Percentile 95% interval of the mean of one sample.
pub fn bootstrap_mean_ci(x: &[f64], iters: usize, seed: u64) -> Result<Interval, AnalyticsError> {
    paired_bootstrap(x, x, iters, seed).map(|p| p.mean_a)
}

/// Asymptotic Kolmogorov survival function `P(K > lambda)`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let p = if lambda < 1.18 {
        let y = (-std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda)).exp();
        let mut s = 0.0;
        for k in 0..50 {
            let e = (2 * k + 1) as f64;
            s += y.powf(e * e);
        }
        1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s
    } else {
        let mut s = 0.0;
        for k in 1..=100 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * lambda * lambda).exp();
            s += if k % 2 == 1 { term } else { -term };
            if term < 1e-300 {
                break;
            }
        }
        2.0 * s
    };
    p.clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
pub fn ks_statistic(xs: &[f64], ys: &[f64]) -> Result<(f64, f64), AnalyticsError> {
    if xs.is_empty() || ys.is_empty() {
        return Err(AnalyticsError::Empty);
    }
    let mut a = xs.to_vec();
    let mut b = ys.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = na * nb / (na + nb);
    Ok((d, kolmogorov_survival(ne.sqrt() * d)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneralizationGap {
    pub gap: f64,
    pub flagged: bool,
    /// The lower of the two scores when flagged, else the public score.
    pub reported: f64,
}

pub fn generalization_gap(public: f64, private: f64) -> Result<GeneralizationGap, AnalyticsError> {
    for v in [public, private] {
        if !(0.0..=1.0).contains(&v) {
            return Err(AnalyticsError::OutOfRange(v));
        }
    }
    let gap = (public - private).abs();
    let flagged = gap > GAP_THRESHOLD;
    Ok(GeneralizationGap {
        gap,
        flagged,
        reported: if flagged { public.min(private) } else { public },
    })
}
