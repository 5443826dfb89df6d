//! Acceptance suite: one PASS/FAIL line per criterion.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anisoeval_cli::{cmd_control, ControlOverrides, ProjectConfig};
use anisoeval_core::analytics::{self, RankedModel};
use anisoeval_core::datapipe::{decontaminate, trigram_embed, NgramIndex, SemanticIndex, NGRAM_SIZE};
use anisoeval_core::oracle::full_set_oracle;
use anisoeval_core::report::{evaluate_cohort, ControlSettings};
use anisoeval_core::scheduler::{hs_halfwidth, neyman_allocation, run_evaluation, stratified_estimate};
use anisoeval_core::scoring::{cohen_kappa, default_scorer, hybrid_score, Tier};
use anisoeval_core::synth::{synthetic_cohort, synthetic_dataset, CohortKind, CohortSpec, PopulationSpec};
use anisoeval_core::{
    default_dimensions, default_schemes, rng, CapabilityCell, CorpusDoc, GoldAnswer, Grading, Mode, Population, Sample,
    SchedulerConfig, SourceTier, StopReason, SyntheticProfile, TextMatch, WeightScheme,
};
use rayon::prelude::*;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn uniform(seed: u64, label: &str) -> f64 {
    rng::unit_f64(rng::key(seed, label))
}

fn dims(k: usize) -> Vec<String> {
    (0..k).map(|i| format!("s{i}")).collect()
}

fn population(dimensions: Vec<String>, per_dimension: usize, cost_spread: f64) -> Population {
    let spec = PopulationSpec {
        dimensions,
        per_dimension,
        cost_spread,
    };
    Population::new(&synthetic_dataset(&spec), None).unwrap()
}

/// Estimator coverage of the Hoeffding-Serfling half-width.
fn c1_coverage() -> Outcome {
    let start = Instant::now();
    let h = 4;
    let pop = population(dims(h), 2000, 0.0);
    let cfg = SchedulerConfig {
        alpha: 0.01,
        delta: 0.05,
        ..Default::default()
    };
    let alpha_h = cfg.alpha / h as f64;
    let scorer = default_scorer().prefer_hint(true);
    let per_population: Vec<(usize, usize, usize)> = (0..500u64)
        .into_par_iter()
        .map(|p| {
            let profile = SyntheticProfile {
                model_id: format!("pop-{p}"),
                ability: dims(h)
                    .into_iter()
                    .map(|d| {
                        let a = 0.05 + 0.9 * uniform(p, &d);
                        (d, a)
                    })
                    .collect(),
                difficulty_sensitivity: 0.0,
                grading: Grading::Binary,
                concentration: 10.0,
                seed: rng::key(p, "responder"),
            };
            let run_cfg = SchedulerConfig {
                rng_seed: p,
                ..cfg.clone()
            };
            let run = run_evaluation(&profile.model_id, &pop, &run_cfg, &profile, &scorer).unwrap();
            let truth: BTreeMap<String, f64> = full_set_oracle(&profile, &pop, &scorer).into_iter().collect();
            let (mut stopped, mut covered, mut drawn) = (0, 0, 0);
            for (id, acc) in &run.per_stratum {
                drawn += acc.n;
                if run.stopped_reason[id] != StopReason::Converged {
                    continue;
                }
                stopped += 1;
                let t = hs_halfwidth(acc.n, 2000, alpha_h).unwrap();
                if (acc.mean().unwrap() - truth[id]).abs() <= t {
                    covered += 1;
                }
            }
            (stopped, covered, drawn)
        })
        .collect();
    let stopped: usize = per_population.iter().map(|x| x.0).sum();
    let covered: usize = per_population.iter().map(|x| x.1).sum();
    let drawn: usize = per_population.iter().map(|x| x.2).sum();
    let rate = covered as f64 / stopped.max(1) as f64;
    let elapsed = start.elapsed();
    check(
        stopped > 0 && rate >= 0.995 && elapsed < Duration::from_secs(120),
        format!(
            "coverage {covered}/{stopped} = {rate:.5} (need >= 0.995); mean fraction drawn {:.3}; {:.1}s (limit 120s)",
            drawn as f64 / (500.0 * 8000.0),
            elapsed.as_secs_f64()
        ),
    )
}

/// Dynamic versus full-set cost and ranking fidelity.
fn c2_cost_fidelity() -> Outcome {
    let start = Instant::now();
    let d = dims(8);
    let pop = population(d.clone(), 2000, 0.5);
    let cohort = synthetic_cohort(
        &CohortSpec {
            kind: CohortKind::Anisotropic,
            size: 100,
            low: 0.3,
            high: 0.9,
            grading: Grading::Binary,
            seed: 2024,
        },
        &d,
    );
    let base = SchedulerConfig {
        alpha: 0.05,
        delta: 0.01,
        rng_seed: 2024,
        ..Default::default()
    };
    let scorer = default_scorer().prefer_hint(true);
    let workers = std::thread::available_parallelism().map_or(4, |n| n.get());
    let dynamic = evaluate_cohort(&cohort, &pop, &base, &scorer, workers).unwrap();
    let full = evaluate_cohort(
        &cohort,
        &pop,
        &SchedulerConfig {
            mode: Mode::FullSet,
            ..base.clone()
        },
        &scorer,
        workers,
    )
    .unwrap();
    let full_cost = pop.total_cost();
    let ratio = dynamic.iter().map(|r| r.total_cost / full_cost).sum::<f64>() / dynamic.len() as f64;
    let overall = |runs: &[anisoeval_core::EvaluationRun]| -> Vec<f64> {
        runs.iter()
            .map(|r| stratified_estimate(r, &pop.strata, base.alpha).unwrap().mean)
            .collect()
    };
    let rho = analytics::spearman(&overall(&dynamic), &overall(&full)).unwrap();
    let elapsed = start.elapsed();
    check(
        ratio <= 0.40 && rho >= 0.95 && elapsed < Duration::from_secs(600),
        format!(
            "mean cost ratio {ratio:.4} (need <= 0.40); spearman {rho:.4} (need >= 0.95); {:.1}s (limit 600s)",
            elapsed.as_secs_f64()
        ),
    )
}

/// Anisotropic cohorts are less rank-stable than isotropic ones.
fn c3_anisotropy_separation() -> Outcome {
    let pop = population(default_dimensions(), 1000, 0.5);
    let settings = |kind| ControlSettings {
        cohort: CohortSpec {
            kind,
            size: 50,
            low: 0.3,
            high: 0.9,
            grading: Grading::Binary,
            seed: 77,
        },
        scheduler: SchedulerConfig::default(),
        schemes: default_schemes(),
        workers: 4,
    };
    let rsa_vector = |kind| -> (f64, Vec<f64>) {
        let s = settings(kind);
        let profiles = synthetic_cohort(&s.cohort, &pop.dimension_ids());
        let runs = evaluate_cohort(&profiles, &pop, &s.scheduler, &default_scorer().prefer_hint(true), 4).unwrap();
        let (ids, raw) = anisoeval_core::report::raw_matrix(&runs, &pop).unwrap();
        let m = analytics::build_score_matrix(ids, pop.dimension_ids(), raw, analytics::DEFAULT_ANCHORS).unwrap();
        let rep = anisoeval_core::report::analyze(&m, &s.schemes, 77).unwrap();
        (rep.stability.mean_rsa, rep.rsa.iter().map(|t| t.rsa as f64).collect())
    };
    let (aniso_mean, aniso) = rsa_vector(CohortKind::Anisotropic);
    let (iso_mean, iso) = rsa_vector(CohortKind::Isotropic);
    let boot = analytics::paired_bootstrap(&aniso, &iso, 1000, 77).unwrap();
    let ratio = aniso_mean / iso_mean.max(f64::MIN_POSITIVE);
    check(
        ratio >= 2.0 && !boot.mean_a.overlaps(&boot.mean_b),
        format!(
            "mean RSA anisotropic {aniso_mean:.3} CI [{:.3}, {:.3}] vs isotropic {iso_mean:.3} CI [{:.3}, {:.3}]; ratio {ratio:.2} (need >= 2.0, disjoint CIs)",
            boot.mean_a.lo, boot.mean_a.hi, boot.mean_b.lo, boot.mean_b.hi
        ),
    )
}

fn brute_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..x.len() {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    sxy / (sxx * syy).sqrt()
}

fn brute_ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|a| {
            let below = x.iter().filter(|b| *b < a).count() as f64;
            let equal = x.iter().filter(|b| *b == a).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

fn brute_ks(x: &[f64], y: &[f64]) -> f64 {
    let mut best: f64 = 0.0;
    for &t in x.iter().chain(y) {
        let fx = x.iter().filter(|&&v| v <= t).count() as f64 / x.len() as f64;
        let fy = y.iter().filter(|&&v| v <= t).count() as f64 / y.len() as f64;
        best = best.max((fx - fy).abs());
    }
    best
}

fn brute_aniso(s: &[Vec<f64>]) -> f64 {
    let k = s[0].len();
    let col = |j: usize| s.iter().map(|r| r[j]).collect::<Vec<f64>>();
    let varying: Vec<usize> = (0..k).filter(|&j| col(j).iter().any(|v| *v != col(j)[0])).collect();
    let mut total = 0.0;
    let mut pairs = 0;
    for a in 0..varying.len() {
        for b in a + 1..varying.len() {
            total += brute_pearson(&col(varying[a]), &col(varying[b]));
            pairs += 1;
        }
    }
    1.0 - total / pairs as f64
}

fn brute_ci(s: &[f64]) -> f64 {
    let n = s.len() as f64;
    let m = s.iter().sum::<f64>() / n;
    let var = s.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
    var.sqrt() / (m + 0.1)
}

fn brute_rank(s: &[Vec<f64>], ids: &[String], w: &[f64]) -> BTreeMap<String, usize> {
    let mut scored: Vec<(f64, &String)> = s
        .iter()
        .zip(ids)
        .map(|(row, id)| (row.iter().zip(w).map(|(a, b)| a * b).sum(), id))
        .collect();
    // Selection sort: highest score first, lower id on ties.
    let mut out = BTreeMap::new();
    let mut rank = 1;
    while !scored.is_empty() {
        let mut best = 0;
        for i in 1..scored.len() {
            let (v, id) = scored[i];
            let (bv, bid) = scored[best];
            if v > bv || (v == bv && id < bid) {
                best = i;
            }
        }
        out.insert(scored[best].1.clone(), rank);
        scored.remove(best);
        rank += 1;
    }
    out
}

/// Metric implementations against brute-force references.
fn c4_metric_oracles() -> Outcome {
    let tol = 1e-9;
    let mut worst: BTreeMap<&str, f64> = BTreeMap::new();
    let mut note = |name: &'static str, err: f64| {
        let e = worst.entry(name).or_insert(0.0);
        *e = e.max(err);
    };
    for case in 0..100u64 {
        let m = 3 + (case % 10) as usize;
        let k = 3 + (case % 5) as usize;
        // A coarse grid on every fifth case forces ties.
        let grid = case % 5 == 0;
        let val = |label: String| {
            let v = uniform(case, &label);
            if grid {
                (v * 4.0).round() / 4.0
            } else {
                v
            }
        };
        let s: Vec<Vec<f64>> = (0..m).map(|i| (0..k).map(|j| val(format!("s{i}/{j}"))).collect()).collect();
        let ids: Vec<String> = (0..m).map(|i| format!("model-{:02}", (i * 7) % m)).collect();
        let dim_ids = dims(k);

        match analytics::anisotropy_index(&s) {
            Ok(v) => note("anisotropy", (v - brute_aniso(&s)).abs()),
            Err(_) => note("anisotropy", if brute_aniso(&s).is_finite() { f64::INFINITY } else { 0.0 }),
        }
        for row in &s {
            note("ci", (analytics::capability_inconsistency(row, 0.1).unwrap() - brute_ci(row)).abs());
            let range = row.iter().cloned().fold(f64::MIN, f64::max) - row.iter().cloned().fold(f64::MAX, f64::min);
            note("dgs", (analytics::dgs(row).unwrap() - range).abs());
        }

        let x: Vec<f64> = s.iter().map(|r| r[0]).collect();
        let y: Vec<f64> = s.iter().map(|r| r[1]).collect();
        if x.iter().any(|v| *v != x[0]) && y.iter().any(|v| *v != y[0]) {
            note("pearson", (analytics::pearson(&x, &y).unwrap() - brute_pearson(&x, &y)).abs());
            let rho = brute_pearson(&brute_ranks(&x), &brute_ranks(&y));
            note("spearman", (analytics::spearman(&x, &y).unwrap() - rho).abs());
        }

        let xs: Vec<f64> = (0..5 + case as usize % 9).map(|i| val(format!("ks-x{i}"))).collect();
        let ys: Vec<f64> = (0..4 + case as usize % 7).map(|i| val(format!("ks-y{i}")) * 1.2).collect();
        note("ks", (analytics::ks_statistic(&xs, &ys).unwrap().0 - brute_ks(&xs, &ys)).abs());

        let schemes: Vec<WeightScheme> = (0..3)
            .map(|n| {
                let raw: Vec<f64> = (0..k).map(|j| uniform(case, &format!("w{n}/{j}"))).collect();
                let total: f64 = raw.iter().sum();
                WeightScheme::new(format!("w{n}"), dim_ids.iter().cloned().zip(raw.iter().map(|r| r / total)))
            })
            .collect();
        let mut unique_ids = ids.clone();
        for (i, id) in unique_ids.iter_mut().enumerate() {
            id.push_str(&format!("-{i}"));
        }
        let rankings: Vec<(String, Vec<RankedModel>)> = schemes
            .iter()
            .map(|w| (w.name.clone(), analytics::rank_under_scheme(&s, &unique_ids, &dim_ids, w).unwrap()))
            .collect();
        let (traj, _) = analytics::rsa(&rankings).unwrap();
        for t in &traj {
            let ranks: Vec<usize> = schemes
                .iter()
                .map(|w| {
                    let weights: Vec<f64> = dim_ids.iter().map(|d| w.weight(d)).collect();
                    brute_rank(&s, &unique_ids, &weights)[&t.model_id]
                })
                .collect();
            let expected = ranks.iter().max().unwrap() - ranks.iter().min().unwrap();
            note("rsa", (t.rsa as f64 - expected as f64).abs());
        }
    }
    let failing: Vec<String> = worst
        .iter()
        .filter(|(_, e)| **e > tol)
        .map(|(n, e)| format!("{n}={e:e}"))
        .collect();
    let summary = worst.iter().map(|(n, e)| format!("{n} {e:.1e}")).collect::<Vec<_>>().join(", ");
    check(failing.is_empty(), format!("100 instances, max abs error: {summary} (tol 1e-9)"))
}

/// Two-stratum Neyman allocation against exhaustive search.
fn c5_neyman_optimality() -> Outcome {
    let mut hits = 0;
    let mut misses = Vec::new();
    for case in 0..100u64 {
        let w1 = 0.05 + 0.9 * uniform(case, "w");
        let w = [w1, 1.0 - w1];
        let s = [0.05 + 0.45 * uniform(case, "s1"), 0.05 + 0.45 * uniform(case, "s2")];
        let budget = 10 + (uniform(case, "b") * 191.0) as usize;
        let alloc = neyman_allocation(&w, &s, &[1.0, 1.0], budget, None).unwrap();
        let var = |n1: usize| (w[0] * s[0]).powi(2) / n1 as f64 + (w[1] * s[1]).powi(2) / (budget - n1) as f64;
        let best = (1..budget).min_by(|&a, &b| var(a).total_cmp(&var(b))).unwrap();
        if alloc[0] + alloc[1] == budget && alloc[0].abs_diff(best) <= 1 {
            hits += 1;
        } else {
            misses.push(format!("case {case}: {alloc:?} vs n1*={best}"));
        }
    }
    check(hits == 100, format!("{hits}/100 within one draw of the exhaustive optimum {}", misses.join("; ")))
}

/// Similarity routing table and judge call accounting.
fn c6_scoring_cascade() -> Outcome {
    let table = [
        (0.40, Tier::SemanticAutoReject),
        (0.59, Tier::SemanticAutoReject),
        (0.60, Tier::Judge),
        (0.75, Tier::Judge),
        (0.92, Tier::Judge),
        (0.93, Tier::SemanticAutoAccept),
        (1.0, Tier::SemanticAutoAccept),
    ];
    let sample = Sample {
        id: "q".into(),
        cell: CapabilityCell::new("General", "Language"),
        task_type: "open".into(),
        prompt: "Explain.".into(),
        constraints: String::new(),
        gold: GoldAnswer::Text {
            value: "reference".into(),
            r#match: TextMatch::Semantic,
        },
        unit_cost: 1.0,
        source_tier: SourceTier::Fresh,
        created_at: "2025-10-01T00:00:00Z".into(),
        subtask: None,
        difficulty: None,
    };
    let calls = std::cell::Cell::new(0usize);
    let mut wrong = Vec::new();
    for (sim, tier) in table {
        let rec = hybrid_score(&sample, "candidate", |_, _| sim, |_, _| {
            calls.set(calls.get() + 1);
            Ok(0.5)
        });
        if rec.tier != tier {
            wrong.push(format!("{sim} -> {:?}", rec.tier));
        }
    }
    let judged = table.iter().filter(|(_, t)| *t == Tier::Judge).count();
    check(
        wrong.is_empty() && calls.get() == judged,
        format!("7 similarities routed, {} misrouted {wrong:?}; judge calls {} for {judged} judge-routed", wrong.len(), calls.get()),
    )
}

/// Hand-worked reference values.
fn c7_hand_values() -> Outcome {
    let ci = analytics::capability_inconsistency(&[1.0, 0.0], 0.1).unwrap();
    let ci_ok = (ci - 0.5 / 0.6).abs() < 1e-12;
    // 2x2 table [[20, 5], [10, 15]]: p_o = 0.7, p_e = 0.5, kappa = 0.4.
    let mut a = Vec::new();
    let mut b = Vec::new();
    for (x, y, n) in [(1, 1, 20), (1, 0, 5), (0, 1, 10), (0, 0, 15)] {
        for _ in 0..n {
            a.push(x);
            b.push(y);
        }
    }
    let kappa = cohen_kappa(&a, &b).unwrap();
    let kappa_ok = (kappa - 0.4).abs() < 1e-12;
    let mut hs_ok = true;
    for (n, alpha) in [(1usize, 0.05f64), (50, 0.05), (500, 0.0025), (2000, 0.01), (12345, 0.2)] {
        let closed = ((2.0 / alpha).ln() / (2.0 * (n * n) as f64)).sqrt();
        hs_ok &= hs_halfwidth(n, n, alpha).unwrap() == closed;
    }
    check(
        ci_ok && kappa_ok && hs_ok,
        format!("CI((1,0)) = {ci:.15}; kappa = {kappa:.15}; hs_halfwidth(N,N) bitwise equal to closed form: {hs_ok}"),
    )
}

fn words(seed: u64, label: &str, n: usize) -> Vec<String> {
    (0..n)
        .map(|i| format!("w{:x}", rng::key(seed, &format!("{label}/{i}")) % 0xfffff))
        .collect()
}

/// Planted n-gram contamination.
fn c8_decontamination() -> Outcome {
    let make = |overlap: usize| {
        let base = |id: String, prompt: String| Sample {
            id,
            cell: CapabilityCell::new("General", "Language"),
            task_type: "qa".into(),
            prompt,
            constraints: String::new(),
            gold: GoldAnswer::exact("x"),
            unit_cost: 1.0,
            source_tier: SourceTier::Fresh,
            created_at: "2025-10-01T00:00:00Z".into(),
            subtask: None,
            difficulty: None,
        };
        let mut data: Vec<Sample> = (0..5000)
            .map(|i| base(format!("clean-{i}"), words(11, &format!("c{i}"), 25).join(" ")))
            .collect();
        let mut corpus = Vec::new();
        let mut planted = BTreeSet::new();
        for j in 0..50 {
            let doc = words(12, &format!("d{j}"), 80);
            let mut prompt = words(13, &format!("a{j}"), 8);
            prompt.extend_from_slice(&doc[30..30 + overlap]);
            prompt.extend(words(13, &format!("b{j}"), 8));
            data.push(base(format!("planted-{j}"), prompt.join(" ")));
            planted.insert(format!("planted-{j}"));
            corpus.push(CorpusDoc {
                doc_id: format!("doc-{j}"),
                text: doc.join(" "),
            });
        }
        let index = NgramIndex::build(&corpus, NGRAM_SIZE);
        let out = decontaminate(&data, &index, &SemanticIndex::default(), trigram_embed).unwrap();
        let flagged: BTreeSet<String> = out.flags.into_iter().map(|f| f.sample_id).collect();
        (flagged, planted)
    };
    let (flagged, planted) = make(13);
    let tp = flagged.intersection(&planted).count() as f64;
    let recall = tp / planted.len() as f64;
    let precision = if flagged.is_empty() { 0.0 } else { tp / flagged.len() as f64 };
    let (flagged12, _) = make(12);
    check(
        recall == 1.0 && precision == 1.0 && flagged12.is_empty(),
        format!("13-token plants: recall {recall}, precision {precision}; 12-token plants flagged: {}", flagged12.len()),
    )
}

/// Byte-identical control reports across runs and worker counts.
fn c9_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ProjectConfig {
        population: Some(PopulationSpec {
            dimensions: default_dimensions(),
            per_dimension: 300,
            cost_spread: 0.5,
        }),
        scheduler: SchedulerConfig {
            delta: 0.05,
            workers: 3,
            ..Default::default()
        },
        ..Default::default()
    };
    let mut outputs = Vec::new();
    for (i, workers) in [1, 1, 4, 8].into_iter().enumerate() {
        let out = dir.path().join(format!("run{i}"));
        let o = ControlOverrides {
            seed: Some(99),
            size: Some(20),
            kind: None,
            workers: Some(workers),
        };
        let (path, _) = cmd_control(&cfg, &o, &out).unwrap();
        outputs.push(std::fs::read(path).unwrap());
    }
    let identical = outputs.windows(2).all(|w| w[0] == w[1]);
    // The report must actually depend on the seed.
    let other = cmd_control(
        &cfg,
        &ControlOverrides {
            seed: Some(100),
            size: Some(20),
            kind: None,
            workers: Some(1),
        },
        &dir.path().join("other"),
    )
    .unwrap();
    let differs = std::fs::read(other.0).unwrap() != outputs[0];
    check(
        identical && differs,
        format!("4 invocations (workers 1,1,4,8) byte-identical: {identical}; different seed changes report: {differs}"),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("C1 estimator coverage", c1_coverage),
        ("C2 cost-fidelity", c2_cost_fidelity),
        ("C3 anisotropy separation", c3_anisotropy_separation),
        ("C4 metric oracle equivalence", c4_metric_oracles),
        ("C5 neyman optimality", c5_neyman_optimality),
        ("C6 scoring cascade", c6_scoring_cascade),
        ("C7 hand-worked values", c7_hand_values),
        ("C8 decontamination planted truth", c8_decontamination),
        ("C9 determinism", c9_determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("acceptance {name}: PASS ({detail})"),
            Err(detail) => {
                failed += 1;
                println!("acceptance {name}: FAIL ({detail})");
            }
        }
    }
    if failed > 0 {
        println!("acceptance: {failed} criterion(s) failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
