#![allow(dead_code)]

use anisoeval_core::{CapabilityCell, GoldAnswer, Sample, SourceTier};

pub fn sample(id: &str, dim: &str, gold: GoldAnswer, cost: f64) -> Sample {
    Sample {
        id: id.into(),
        cell: CapabilityCell::new("General", dim),
        task_type: "qa".into(),
        prompt: format!("question {id}"),
        constraints: String::new(),
        gold,
        unit_cost: cost,
        source_tier: SourceTier::Fresh,
        created_at: "2025-10-01T00:00:00Z".into(),
        subtask: None,
        difficulty: None,
    }
}

/// `sizes[k]` samples in dimension `d{k}`, all costing `cost`.
pub fn dataset(sizes: &[usize], cost: f64) -> Vec<Sample> {
    sizes
        .iter()
        .enumerate()
        .flat_map(|(k, &n)| (0..n).map(move |i| sample(&format!("d{k}-{i}"), &format!("d{k}"), GoldAnswer::exact(format!("g{k}-{i}")), cost)))
        .collect()
}
