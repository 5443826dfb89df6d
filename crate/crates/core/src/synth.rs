//! Synthetic populations and model cohorts with known ground truth.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{CapabilityCell, GoldAnswer, Sample, SourceTier};
use crate::oracle::{Grading, SyntheticProfile};
use crate::rng;

fn default_cost_spread() -> f64 {
    0.5
}

/// Shape of a synthetic benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub dimensions: Vec<String>,
    pub per_dimension: usize,
    /// Dimension `k` of `K` costs `1 + spread * k / K` per sample.
    #[serde(default = "default_cost_spread")]
    pub cost_spread: f64,
}

/// Builds `per_dimension` exact-match samples for each dimension.
pub fn synthetic_dataset(spec: &PopulationSpec) -> Vec<Sample> {
    let k = spec.dimensions.len().max(1) as f64;
    spec.dimensions
        .iter()
        .enumerate()
        .flat_map(|(j, dim)| {
            let cost = 1.0 + spec.cost_spread * j as f64 / k;
            (0..spec.per_dimension).map(move |i| Sample {
                id: format!("{dim}-{i:06}"),
                cell: CapabilityCell::new("Synthetic", dim.clone()),
                task_type: "short_answer".into(),
                prompt: format!("[{dim}] item {i}"),
                constraints: "Reply with the answer token only.".into(),
                gold: GoldAnswer::exact(format!("ans-{dim}-{i}")),
                unit_cost: cost,
                source_tier: SourceTier::Fresh,
                created_at: "2025-10-01T00:00:00Z".into(),
                subtask: None,
                difficulty: None,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CohortKind {
    /// Independent per-dimension abilities.
    Anisotropic,
    /// One latent ability per model; every dimension is increasing in it.
    Isotropic,
    /// Every model is the same profile, seed included.
    Identical,
}

fn default_low() -> f64 {
    0.3
}
fn default_high() -> f64 {
    0.9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSpec {
    pub kind: CohortKind,
    pub size: usize,
    #[serde(default = "default_low")]
    pub low: f64,
    #[serde(default = "default_high")]
    pub high: f64,
    #[serde(default)]
    pub grading: Grading,
    pub seed: u64,
}

/// Profiles named `syn-000`, `syn-001`, ... with abilities drawn from
/// Uniform[low, high].
pub fn synthetic_cohort(spec: &CohortSpec, dimensions: &[String]) -> Vec<SyntheticProfile> {
    let width = spec.high - spec.low;
    let uniform = |label: &str| spec.low + width * rng::unit_f64(rng::key(spec.seed, label));
    // Per-dimension slopes in [0.85, 1] keep isotropic columns monotone in
    // the latent ability while not identical.
    let slope = |dim: &str| 0.85 + 0.15 * rng::unit_f64(rng::key(spec.seed, &format!("slope/{dim}")));
    (0..spec.size)
        .map(|m| {
            let model_id = format!("syn-{m:03}");
            let ability: BTreeMap<String, f64> = match spec.kind {
                CohortKind::Anisotropic => dimensions
                    .iter()
                    .map(|d| (d.clone(), uniform(&format!("{model_id}/{d}"))))
                    .collect(),
                CohortKind::Isotropic => {
                    let latent = uniform(&format!("{model_id}/latent"));
                    dimensions
                        .iter()
                        .map(|d| (d.clone(), (latent * slope(d)).clamp(0.0, 1.0)))
                        .collect()
                }
                CohortKind::Identical => dimensions.iter().map(|d| (d.clone(), uniform(&format!("shared/{d}")))).collect(),
            };
            let seed = match spec.kind {
                CohortKind::Identical => spec.seed,
                _ => rng::key(spec.seed, &model_id),
            };
            SyntheticProfile {
                model_id,
                ability,
                difficulty_sensitivity: 0.0,
                grading: spec.grading,
                concentration: 10.0,
                seed,
            }
        })
        .collect()
}
