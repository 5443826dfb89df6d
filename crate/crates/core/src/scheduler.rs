//! Two-stage stratified sequential sampler.
//!
//! Stage 1 draws a pilot from every stratum to estimate its spread. Stage 2
//! repeatedly re-targets the remaining budget with a cost-weighted Neyman
//! allocation and draws fixed-size batches from every stratum that has not
//! yet met its Hoeffding-Serfling stopping condition.
//!
//! Sampling is without replacement: each stratum is walked in the order of a
//! seeded permutation fixed when the run starts, so the draw sequence does not
//! depend on how responses are dispatched.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{partition, ModelError, Sample, Stratum, StratumAccumulator};
use crate::oracle::{Responder, ResponderError, Response};
use crate::rng;
use crate::scoring::{Scorer, Tier};

/// Total attempts per sample before it is scored 0 and flagged.
pub const DEFAULT_MAX_ATTEMPTS: u32 = 3;

/// Smallest pilot per stratum; the sample variance needs two points.
pub const MIN_PILOT: usize = 2;

#[derive(Debug, Error, PartialEq)]
pub enum SchedulerError {
    #[error("vectors have mismatched lengths")]
    DimensionMismatch,
    #[error("stratum cost must be positive and finite")]
    NonPositiveCost,
    #[error("invalid range: {0}")]
    InvalidRange(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("stratum {0} has no draws")]
    EmptyStratum(String),
    #[error("budget {budget} cannot cover the pilot cost {pilot_cost}")]
    BudgetTooSmallForPilot { budget: f64, pilot_cost: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Dynamic,
    FullSet,
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dynamic" => Ok(Mode::Dynamic),
            "full_set" | "full-set" => Ok(Mode::FullSet),
            other => Err(format!("unknown mode {other:?} (expected dynamic or full_set)")),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Dynamic => "dynamic",
            Mode::FullSet => "full_set",
        })
    }
}

fn default_pilot_fraction() -> f64 {
    0.05
}
fn default_alpha() -> f64 {
    0.05
}
fn default_delta() -> f64 {
    0.01
}
fn default_batch_fraction() -> f64 {
    0.01
}
fn default_workers() -> usize {
    1
}
fn default_max_attempts() -> u32 {
    DEFAULT_MAX_ATTEMPTS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedulerConfig {
    #[serde(default = "default_pilot_fraction")]
    pub pilot_fraction: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Target global half-width; also the per-stratum target unless
    /// overridden in `per_stratum_delta`.
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub per_stratum_delta: BTreeMap<String, f64>,
    #[serde(default)]
    pub budget: Option<f64>,
    #[serde(default = "default_batch_fraction")]
    pub batch_fraction: f64,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default)]
    pub mode: Mode,
    /// Concurrent responder calls per batch.
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_max_attempts")]
    pub max_attempts: u32,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        Self {
            pilot_fraction: default_pilot_fraction(),
            alpha: default_alpha(),
            delta: default_delta(),
            per_stratum_delta: BTreeMap::new(),
            budget: None,
            batch_fraction: default_batch_fraction(),
            rng_seed: 0,
            mode: Mode::Dynamic,
            workers: default_workers(),
            max_attempts: default_max_attempts(),
        }
    }
}

impl SchedulerConfig {
    pub fn validate(&self) -> Result<(), SchedulerError> {
        let bad = |m: &str| Err(SchedulerError::InvalidConfig(m.to_string()));
        if !(self.pilot_fraction > 0.0 && self.pilot_fraction <= 1.0) {
            return bad("pilot_fraction must be in (0, 1]");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha must be in (0, 1)");
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return bad("delta must be positive");
        }
        if self.per_stratum_delta.values().any(|d| !(*d > 0.0 && d.is_finite())) {
            return bad("per-stratum delta must be positive");
        }
        if !(self.batch_fraction > 0.0 && self.batch_fraction <= 1.0) {
            return bad("batch_fraction must be in (0, 1]");
        }
        if let Some(b) = self.budget {
            if !(b >= 0.0 && b.is_finite()) {
                return bad("budget must be nonnegative");
            }
        }
        if self.workers == 0 {
            return bad("workers must be at least 1");
        }
        if self.max_attempts == 0 {
            return bad("max_attempts must be at least 1");
        }
        Ok(())
    }

    pub fn delta_for(&self, stratum: &str) -> f64 {
        self.per_stratum_delta.get(stratum).copied().unwrap_or(self.delta)
    }
}

/// Cost-weighted Neyman allocation of `total` draws.
///
/// Shares are proportional to `W_h S_h / sqrt(c_h)`; if every share is zero
/// the allocation falls back to proportional-to-weight. Strata whose share
/// would exceed `caps[h]` are pinned at the cap and the surplus goes to the
/// rest in proportion. Integer rounding is largest-remainder, ties to the
/// lower index. The result sums to `total` unless the caps cannot hold it.
pub fn neyman_allocation(
    weights: &[f64],
    stddevs: &[f64],
    costs: &[f64],
    total: usize,
    caps: Option<&[usize]>,
) -> Result<Vec<usize>, SchedulerError> {
    let h = weights.len();
    if stddevs.len() != h || costs.len() != h || caps.is_some_and(|c| c.len() != h) {
        return Err(SchedulerError::DimensionMismatch);
    }
    if costs.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
        return Err(SchedulerError::NonPositiveCost);
    }
    if weights.iter().chain(stddevs).any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(SchedulerError::InvalidRange("weights and stddevs must be finite and >= 0".into()));
    }
    let mut shares: Vec<f64> = (0..h).map(|i| weights[i] * stddevs[i] / costs[i].sqrt()).collect();
    if shares.iter().sum::<f64>() <= 0.0 {
        shares = weights.to_vec();
        if shares.iter().sum::<f64>() <= 0.0 {
            shares = vec![1.0; h];
        }
    }
    let caps: Vec<usize> = match caps {
        Some(c) => c.to_vec(),
        None => vec![usize::MAX; h],
    };

    let mut alloc = vec![0usize; h];
    let mut pinned = vec![false; h];
    let mut remaining = total;
    // Pin strata whose proportional share overflows their cap.
    loop {
        let free_share: f64 = (0..h).filter(|&i| !pinned[i]).map(|i| shares[i]).sum();
        let mut changed = false;
        for i in 0..h {
            if pinned[i] {
                continue;
            }
            let want = if free_share > 0.0 {
                remaining as f64 * shares[i] / free_share
            } else {
                0.0
            };
            if want >= caps[i] as f64 {
                pinned[i] = true;
                alloc[i] = caps[i];
                remaining -= caps[i].min(remaining);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let free: Vec<usize> = (0..h).filter(|&i| !pinned[i]).collect();
    let free_share: f64 = free.iter().map(|&i| shares[i]).sum();
    if free.is_empty() || remaining == 0 {
        return Ok(alloc);
    }
    if free_share <= 0.0 {
        // Only zero-share strata left with room: spread evenly.
        let mut left = remaining;
        while left > 0 {
            let mut progressed = false;
            for &i in &free {
                if left > 0 && alloc[i] < caps[i] {
                    alloc[i] += 1;
                    left -= 1;
                    progressed = true;
                }
            }
            if !progressed {
                break;
            }
        }
        return Ok(alloc);
    }
    let mut rems: Vec<(usize, f64)> = Vec::with_capacity(free.len());
    let mut assigned = 0usize;
    for &i in &free {
        let x = remaining as f64 * shares[i] / free_share;
        let base = (x.floor() as usize).min(caps[i]);
        alloc[i] = base;
        assigned += base;
        rems.push((i, x - x.floor()));
    }
    let mut leftover = remaining.saturating_sub(assigned);
    rems.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    while leftover > 0 {
        let mut progressed = false;
        for &(i, _) in &rems {
            if leftover == 0 {
                break;
            }
            if alloc[i] < caps[i] {
                alloc[i] += 1;
                leftover -= 1;
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
    }
    Ok(alloc)
}

/// Half-width `t` at which the Hoeffding-Serfling tail bound
/// `2 exp(-2 n t^2 / (1 - (n-1)/N))` equals `alpha`.
pub fn hs_halfwidth(n: usize, population: usize, alpha: f64) -> Result<f64, SchedulerError> {
    if n == 0 || n > population {
        return Err(SchedulerError::InvalidRange(format!(
            "need 1 <= n <= N, got n={n}, N={population}"
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(SchedulerError::InvalidRange(format!("alpha {alpha} not in (0,1)")));
    }
    // 1 - (n-1)/N = (N-n+1)/N, folded so that n = N reduces to
    // ln(2/alpha) / (2 N^2) with no extra rounding.
    let num = (2.0 / alpha).ln() * (population - n + 1) as f64;
    let den = 2.0 * (n as u128 * population as u128) as f64;
    Ok((num / den).sqrt())
}

/// Whether a stratum may stop drawing. `alpha_h` is the per-stratum level.
pub fn should_stop(acc: &StratumAccumulator, population: usize, alpha_h: f64, delta_h: f64) -> bool {
    if acc.n >= population && population > 0 {
        return true;
    }
    if acc.n < 2 {
        return false;
    }
    match hs_halfwidth(acc.n, population, alpha_h) {
        Ok(t) => t < delta_h,
        Err(_) => false,
    }
}

/// Pilot size per stratum: `max(2, ceil(fraction * N_h))`, capped at `N_h`.
pub fn pilot_allocation(strata: &[Stratum], pilot_fraction: f64) -> Vec<usize> {
    strata
        .iter()
        .map(|s| {
            let raw = (pilot_fraction * s.population_size as f64 - 1e-9).ceil().max(0.0) as usize;
            raw.max(MIN_PILOT).min(s.population_size)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    BudgetExhausted,
    PopulationExhausted,
}

/// One scored draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub sample_id: String,
    pub stratum: String,
    pub perm_index: usize,
    pub raw_output: String,
    pub score: f64,
    pub scorer_tier: Tier,
    pub latency_ms: f64,
    pub unit_cost: f64,
    pub attempts: u32,
    pub failed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRun {
    pub model_id: String,
    pub mode: Mode,
    pub seed: u64,
    pub per_stratum: BTreeMap<String, StratumAccumulator>,
    pub total_cost: f64,
    pub records: Vec<RunRecord>,
    pub stopped_reason: BTreeMap<String, StopReason>,
}

/// Point estimate and half-width for one stratum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumEstimate {
    pub id: String,
    pub n: usize,
    pub population_size: usize,
    pub mean: f64,
    pub halfwidth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub halfwidth: f64,
    pub strata: Vec<StratumEstimate>,
}

/// `mu = sum W_h mu_h`, with the global half-width `sum W_h t_h` where each
/// `t_h` is taken at level `alpha / H`.
pub fn stratified_estimate(run: &EvaluationRun, strata: &[Stratum], alpha: f64) -> Result<Estimate, SchedulerError> {
    let alpha_h = alpha / strata.len() as f64;
    let mut mean = 0.0;
    let mut halfwidth = 0.0;
    let mut per = Vec::with_capacity(strata.len());
    for s in strata {
        let acc = run
            .per_stratum
            .get(&s.id)
            .filter(|a| a.n > 0)
            .ok_or_else(|| SchedulerError::EmptyStratum(s.id.clone()))?;
        let mu = acc.mean().unwrap_or(0.0);
        let t = hs_halfwidth(acc.n, s.population_size, alpha_h)?;
        mean += s.weight * mu;
        halfwidth += s.weight * t;
        per.push(StratumEstimate {
            id: s.id.clone(),
            n: acc.n,
            population_size: s.population_size,
            mean: mu,
            halfwidth: t,
        });
    }
    Ok(Estimate {
        mean: mean.clamp(0.0, 1.0),
        halfwidth,
        strata: per,
    })
}

/// A dataset split into strata, each with its members in dataset order.
#[derive(Debug, Clone)]
pub struct Population {
    pub strata: Vec<Stratum>,
    pub members: Vec<Vec<Sample>>,
}

impl Population {
    pub fn new(dataset: &[Sample], dimensions: Option<&[String]>) -> Result<Self, ModelError> {
        let parts = partition(dataset, dimensions)?;
        let (strata, members) = parts
            .into_iter()
            .map(|(s, m)| (s, m.into_iter().cloned().collect()))
            .unzip();
        Ok(Self { strata, members })
    }

    pub fn total_cost(&self) -> f64 {
        self.members.iter().flatten().map(|s| s.unit_cost).sum()
    }

    pub fn len(&self) -> usize {
        self.members.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dimension_ids(&self) -> Vec<String> {
        self.strata.iter().map(|s| s.id.clone()).collect()
    }
}

/// Seeded visiting order of one stratum.
pub fn stratum_permutation(seed: u64, stratum_id: &str, size: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..size).collect();
    let mut g = rng::stream(rng::key(seed, stratum_id));
    order.shuffle(&mut g);
    order
}

struct Draw<'a> {
    stratum: usize,
    perm_index: usize,
    sample: &'a Sample,
}

fn call_with_retries<R: Responder + ?Sized>(
    responder: &R,
    sample: &Sample,
    max_attempts: u32,
) -> (Result<Response, ResponderError>, u32) {
    let mut last = None;
    for attempt in 1..=max_attempts {
        match responder.respond(sample) {
            Ok(r) => return (Ok(r), attempt),
            Err(e) => {
                log::debug!("sample {} attempt {attempt} failed: {e}", sample.id);
                last = Some(e);
            }
        }
    }
    (Err(last.expect("at least one attempt")), max_attempts)
}

fn execute<R, S>(draws: &[Draw<'_>], config: &SchedulerConfig, pool: Option<&rayon::ThreadPool>, responder: &R, scorer: &S, ids: &[String]) -> Vec<RunRecord>
where
    R: Responder + ?Sized,
    S: Scorer + ?Sized,
{
    let one = |d: &Draw<'_>| {
        let (result, attempts) = call_with_retries(responder, d.sample, config.max_attempts);
        let base = RunRecord {
            sample_id: d.sample.id.clone(),
            stratum: ids[d.stratum].clone(),
            perm_index: d.perm_index,
            raw_output: String::new(),
            score: 0.0,
            scorer_tier: Tier::for_gold(&d.sample.gold),
            latency_ms: 0.0,
            unit_cost: d.sample.unit_cost,
            attempts,
            failed: false,
            failure: None,
        };
        match result {
            Ok(resp) => {
                let rec = scorer.score(d.sample, &resp);
                RunRecord {
                    raw_output: resp.output,
                    score: rec.score,
                    scorer_tier: rec.tier,
                    latency_ms: resp.latency_ms,
                    failure: rec.flag.map(|f| f.to_string()),
                    ..base
                }
            }
            Err(e) => RunRecord {
                failed: true,
                failure: Some(e.to_string()),
                ..base
            },
        }
    };
    match pool {
        Some(p) => p.install(|| draws.par_iter().map(one).collect()),
        None => draws.iter().map(one).collect(),
    }
}

/// Evaluates one model over a stratified population.
pub fn run_evaluation<R, S>(
    model_id: &str,
    population: &Population,
    config: &SchedulerConfig,
    responder: &R,
    scorer: &S,
) -> Result<EvaluationRun, SchedulerError>
where
    R: Responder + ?Sized,
    S: Scorer + ?Sized,
{
    config.validate()?;
    let strata = &population.strata;
    let h = strata.len();
    if h == 0 {
        return Err(ModelError::EmptyDataset.into());
    }
    let ids: Vec<String> = strata.iter().map(|s| s.id.clone()).collect();
    let perms: Vec<Vec<usize>> = strata
        .iter()
        .map(|s| stratum_permutation(config.rng_seed, &s.id, s.population_size))
        .collect();
    let pool = if config.workers > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(config.workers)
                .build()
                .map_err(|e| SchedulerError::InvalidConfig(e.to_string()))?,
        )
    } else {
        None
    };

    let mut cursor = vec![0usize; h];
    let mut accs: Vec<StratumAccumulator> = vec![StratumAccumulator::new(); h];
    let mut records: Vec<RunRecord> = Vec::new();
    let mut spent = 0.0f64;
    let mut stopped: Vec<Option<StopReason>> = vec![None; h];

    let sample_at = |hh: usize, pos: usize| &population.members[hh][perms[hh][pos]];

    let draw_batch = |counts: &[usize], cursor: &mut [usize], accs: &mut [StratumAccumulator], spent: &mut f64, records: &mut Vec<RunRecord>| {
        let mut draws = Vec::new();
        for (hh, &c) in counts.iter().enumerate() {
            for pos in cursor[hh]..cursor[hh] + c {
                draws.push(Draw {
                    stratum: hh,
                    perm_index: pos,
                    sample: sample_at(hh, pos),
                });
            }
            cursor[hh] += c;
        }
        let batch = execute(&draws, config, pool.as_ref(), responder, scorer, &ids);
        for (d, rec) in draws.iter().zip(&batch) {
            accs[d.stratum].push(&rec.sample_id, rec.score);
            *spent += rec.unit_cost;
        }
        records.extend(batch);
    };

    match config.mode {
        Mode::FullSet => {
            let counts: Vec<usize> = strata.iter().map(|s| s.population_size).collect();
            draw_batch(&counts, &mut cursor, &mut accs, &mut spent, &mut records);
            stopped = vec![Some(StopReason::PopulationExhausted); h];
        }
        Mode::Dynamic => {
            let pilot = pilot_allocation(strata, config.pilot_fraction);
            if let Some(budget) = config.budget {
                let pilot_cost: f64 = (0..h)
                    .flat_map(|hh| (0..pilot[hh]).map(move |p| (hh, p)))
                    .map(|(hh, p)| sample_at(hh, p).unit_cost)
                    .sum();
                if pilot_cost > budget {
                    return Err(SchedulerError::BudgetTooSmallForPilot { budget, pilot_cost });
                }
            }
            draw_batch(&pilot, &mut cursor, &mut accs, &mut spent, &mut records);

            let alpha_h = config.alpha / h as f64;
            let batch: Vec<usize> = strata
                .iter()
                .map(|s| ((config.batch_fraction * s.population_size as f64).floor() as usize).max(1))
                .collect();
            let budget_total = config.budget.unwrap_or(f64::INFINITY);

            loop {
                for hh in 0..h {
                    if stopped[hh].is_some() {
                        continue;
                    }
                    let n_h = strata[hh].population_size;
                    if should_stop(&accs[hh], n_h, alpha_h, config.delta_for(&ids[hh])) {
                        let converged = accs[hh].n >= 2
                            && hs_halfwidth(accs[hh].n, n_h, alpha_h)
                                .is_ok_and(|t| t < config.delta_for(&ids[hh]));
                        stopped[hh] = Some(if converged {
                            StopReason::Converged
                        } else {
                            StopReason::PopulationExhausted
                        });
                    }
                }
                let active: Vec<usize> = (0..h).filter(|&hh| stopped[hh].is_none()).collect();
                if active.is_empty() {
                    break;
                }

                let remaining_budget = budget_total - spent;
                let room: Vec<usize> = active
                    .iter()
                    .map(|&hh| strata[hh].population_size - cursor[hh])
                    .collect();
                let w: Vec<f64> = active.iter().map(|&hh| strata[hh].weight).collect();
                let sd: Vec<f64> = active.iter().map(|&hh| accs[hh].stddev().unwrap_or(0.0)).collect();
                let c: Vec<f64> = active.iter().map(|&hh| strata[hh].unit_cost.max(f64::MIN_POSITIVE)).collect();
                let total_room: usize = room.iter().sum();
                // Turn the remaining cost budget into a draw count under the
                // allocation's own cost mix.
                let draws_affordable = if remaining_budget.is_infinite() {
                    total_room
                } else {
                    let mut num: f64 = (0..active.len()).map(|i| w[i] * sd[i] / c[i].sqrt()).sum();
                    let mut den: f64 = (0..active.len()).map(|i| w[i] * sd[i] * c[i].sqrt()).sum();
                    if num <= 0.0 {
                        num = w.iter().sum();
                        den = (0..active.len()).map(|i| w[i] * c[i]).sum();
                    }
                    if den > 0.0 {
                        ((remaining_budget.max(0.0) * num / den).floor() as usize).min(total_room)
                    } else {
                        total_room
                    }
                };
                let target = neyman_allocation(&w, &sd, &c, draws_affordable, Some(&room))?;

                let mut counts = vec![0usize; h];
                let mut planned_cost = 0.0;
                for (i, &hh) in active.iter().enumerate() {
                    let want = batch[hh].min(target[i]).min(room[i]);
                    let mut take = 0;
                    while take < want {
                        let cost = sample_at(hh, cursor[hh] + take).unit_cost;
                        if spent + planned_cost + cost > budget_total {
                            break;
                        }
                        planned_cost += cost;
                        take += 1;
                    }
                    counts[hh] = take;
                }
                if counts.iter().all(|&c| c == 0) {
                    // Allocation rounded everything to zero; try one draw per
                    // active stratum and retire the ones the budget cannot reach.
                    for &hh in &active {
                        let cost = sample_at(hh, cursor[hh]).unit_cost;
                        if spent + planned_cost + cost <= budget_total {
                            counts[hh] = 1;
                            planned_cost += cost;
                        } else {
                            stopped[hh] = Some(StopReason::BudgetExhausted);
                        }
                    }
                    if counts.iter().all(|&c| c == 0) {
                        continue;
                    }
                }
                draw_batch(&counts, &mut cursor, &mut accs, &mut spent, &mut records);
            }
        }
    }

    let order: BTreeMap<&str, usize> = ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    records.sort_by_key(|r| (order[r.stratum.as_str()], r.perm_index));
    let total_cost = records.iter().map(|r| r.unit_cost).sum();
    Ok(EvaluationRun {
        model_id: model_id.to_string(),
        mode: config.mode,
        seed: config.rng_seed,
        per_stratum: ids.iter().cloned().zip(accs).collect(),
        total_cost,
        records,
        stopped_reason: ids
            .iter()
            .cloned()
            .zip(stopped.into_iter().map(|s| s.unwrap_or(StopReason::BudgetExhausted)))
            .collect(),
    })
}

/// Final line of a run file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub kind: String,
    pub model_id: String,
    pub mode: Mode,
    pub seed: u64,
    pub mean: f64,
    pub halfwidth: f64,
    pub total_cost: f64,
    pub full_set_cost: f64,
    pub cost_ratio: f64,
    pub failures: usize,
    pub strata: Vec<StratumSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumSummary {
    pub id: String,
    pub weight: f64,
    pub n: usize,
    pub population_size: usize,
    pub mean: f64,
    pub halfwidth: f64,
    pub stopped_reason: StopReason,
}

impl EvaluationRun {
    pub fn summary(&self, population: &Population, alpha: f64) -> Result<RunSummary, SchedulerError> {
        let est = stratified_estimate(self, &population.strata, alpha)?;
        let full = population.total_cost();
        Ok(RunSummary {
            kind: "summary".into(),
            model_id: self.model_id.clone(),
            mode: self.mode,
            seed: self.seed,
            mean: est.mean,
            halfwidth: est.halfwidth,
            total_cost: self.total_cost,
            full_set_cost: full,
            cost_ratio: if full > 0.0 { self.total_cost / full } else { 1.0 },
            failures: self.records.iter().filter(|r| r.failed).count(),
            strata: est
                .strata
                .into_iter()
                .zip(&population.strata)
                .map(|(e, s)| StratumSummary {
                    weight: s.weight,
                    stopped_reason: self.stopped_reason[&e.id],
                    id: e.id,
                    n: e.n,
                    population_size: e.population_size,
                    mean: e.mean,
                    halfwidth: e.halfwidth,
                })
                .collect(),
        })
    }

    /// Records as JSON-Lines followed by the summary object.
    pub fn write_jsonl<W: std::io::Write>(&self, population: &Population, alpha: f64, mut out: W) -> Result<RunSummary, SchedulerError> {
        let io = |e: std::io::Error| SchedulerError::Model(e.into());
        let ser = |e: serde_json::Error| SchedulerError::Model(ModelError::Io(e.to_string()));
        for r in &self.records {
            writeln!(out, "{}", serde_json::to_string(r).map_err(ser)?).map_err(io)?;
        }
        let summary = self.summary(population, alpha)?;
        writeln!(out, "{}", serde_json::to_string(&summary).map_err(ser)?).map_err(io)?;
        Ok(summary)
    }

    pub fn file_name(&self) -> String {
        format!("{}.{}.run.jsonl", sanitize_file_component(&self.model_id), self.seed)
    }
}

/// Maps path separators and other awkward bytes in a model id to `_`.
pub fn sanitize_file_component(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect()
}

/// Reads the summary line back out of a run file.
pub fn read_run_summary<R: std::io::BufRead>(reader: R) -> Result<RunSummary, ModelError> {
    let mut last = None;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        last = Some((i + 1, line));
    }
    let (line_no, text) = last.ok_or_else(|| ModelError::Parse {
        line: 0,
        message: "empty run file".into(),
    })?;
    serde_json::from_str(&text).map_err(|e| ModelError::Parse {
        line: line_no,
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neyman_examples() {
        let a = neyman_allocation(&[0.5, 0.5], &[0.2, 0.4], &[1.0, 1.0], 30, None).unwrap();
        assert_eq!(a, vec![10, 20]);
        let b = neyman_allocation(&[0.5, 0.5], &[0.3, 0.3], &[1.0, 4.0], 30, None).unwrap();
        assert_eq!(b, vec![20, 10]);
        // Frozen from an exhaustive search over all (n1, n2, n3) summing to 100.
        let c = neyman_allocation(&[0.6, 0.3, 0.1], &[0.1, 0.5, 0.25], &[1.0, 1.0, 1.0], 100, None).unwrap();
        assert_eq!(c, vec![25, 64, 11]);
    }

    #[test]
    fn neyman_caps_redistribute_surplus() {
        let a = neyman_allocation(&[0.5, 0.25, 0.25], &[0.5, 0.2, 0.2], &[1.0; 3], 100, Some(&[10, 1000, 1000])).unwrap();
        assert_eq!(a[0], 10);
        assert_eq!(a[1] + a[2], 90);
        assert_eq!(a[1], a[2]);

        let all = neyman_allocation(&[0.5, 0.5], &[0.1, 0.1], &[1.0; 2], 100, Some(&[3, 4])).unwrap();
        assert_eq!(all, vec![3, 4]);
    }

    #[test]
    fn neyman_zero_spread_falls_back_to_weights() {
        let a = neyman_allocation(&[0.75, 0.25], &[0.0, 0.0], &[1.0, 1.0], 40, None).unwrap();
        assert_eq!(a, vec![30, 10]);
    }

    #[test]
    fn neyman_errors() {
        assert_eq!(
            neyman_allocation(&[0.5], &[0.1, 0.1], &[1.0], 10, None),
            Err(SchedulerError::DimensionMismatch)
        );
        assert_eq!(
            neyman_allocation(&[0.5, 0.5], &[0.1, 0.1], &[1.0, 0.0], 10, None),
            Err(SchedulerError::NonPositiveCost)
        );
        assert_eq!(neyman_allocation(&[1.0], &[0.3], &[2.0], 0, None).unwrap(), vec![0]);
    }

    #[test]
    fn hs_halfwidth_closed_forms() {
        let alpha: f64 = 0.05;
        let n = 500;
        let t = hs_halfwidth(n, n, alpha).unwrap();
        let expected = ((2.0 / alpha).ln() / (2.0 * (n * n) as f64)).sqrt();
        assert_eq!(t, expected);

        let far = hs_halfwidth(1, usize::MAX / 2, alpha).unwrap();
        assert!((far - ((2.0 / alpha).ln() / 2.0).sqrt()).abs() < 1e-12);

        assert!(hs_halfwidth(0, 10, alpha).is_err());
        assert!(hs_halfwidth(11, 10, alpha).is_err());
        assert!(hs_halfwidth(5, 10, 2.0).is_err());
        assert!(hs_halfwidth(5, 10, 0.0).is_err());
    }

    #[test]
    fn hs_halfwidth_strictly_decreasing() {
        let big_n = 1000;
        let mut prev = f64::INFINITY;
        for n in 1..=big_n {
            let t = hs_halfwidth(n, big_n, 0.01).unwrap();
            assert!(t < prev);
            prev = t;
        }
    }

    #[test]
    fn stopping_rule() {
        let mut acc = StratumAccumulator::new();
        acc.push("a", 1.0);
        acc.push("b", 1.0);
        assert!(!should_stop(&acc, 10_000, 0.0025, 0.01));
        assert!(should_stop(&acc, 2, 0.0025, 0.01));
        let mut one = StratumAccumulator::new();
        one.push("a", 1.0);
        assert!(should_stop(&one, 1, 0.0025, 0.01));
        assert!(!should_stop(&one, 10, 0.0025, 10.0));
    }

    #[test]
    fn pilot_sizes() {
        let s = |n| Stratum {
            id: "x".into(),
            population_size: n,
            weight: 1.0,
            unit_cost: 1.0,
        };
        assert_eq!(pilot_allocation(&[s(1000), s(10), s(1)], 0.05), vec![50, 2, 1]);
        assert_eq!(pilot_allocation(&[s(2000)], 0.05), vec![100]);
        assert_eq!(pilot_allocation(&[s(7)], 1.0), vec![7]);
    }

    #[test]
    fn permutation_is_seeded() {
        let a = stratum_permutation(3, "Law", 50);
        assert_eq!(a, stratum_permutation(3, "Law", 50));
        assert_ne!(a, stratum_permutation(4, "Law", 50));
        let mut sorted = a.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn config_validation() {
        let mut c = SchedulerConfig::default();
        c.validate().unwrap();
        c.alpha = 1.0;
        assert!(c.validate().is_err());
        let c = SchedulerConfig {
            batch_fraction: 0.0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let json = r#"{"delta": 0.02, "rng_seed": 9, "mode": "full_set"}"#;
        let parsed: SchedulerConfig = serde_json::from_str(json).unwrap();
        assert_eq!(parsed.mode, Mode::FullSet);
        assert_eq!(parsed.pilot_fraction, 0.05);
        assert_eq!(parsed.delta, 0.02);
    }
}
