//! Domain types shared by the sampler, scorers and diagnostics.
//!
//! Every value here is immutable once built. Scores are kept on the unit
//! interval; percentages are a display concern.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on weight sums (scheme weights and stratum weights).
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("sample {0} belongs to an unconfigured dimension")]
    UnknownDimension(String),
    #[error("scheme weights sum to {0}, expected 1")]
    WeightSumInvalid(f64),
    #[error("negative weight on dimension {0}")]
    NegativeWeight(String),
    #[error("scheme references unknown dimension {0}")]
    UnknownSchemeDimension(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: duplicate sample id {id}")]
    DuplicateId { line: usize, id: String },
    #[error("invalid value: {0}")]
    Invalid(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for ModelError {
    fn from(e: std::io::Error) -> Self {
        ModelError::Io(e.to_string())
    }
}

/// One cell of the Domain x Capability matrix.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CapabilityCell {
    pub domain: String,
    pub capability: String,
}

impl CapabilityCell {
    pub fn new(domain: impl Into<String>, capability: impl Into<String>) -> Self {
        Self {
            domain: domain.into(),
            capability: capability.into(),
        }
    }

    /// The stratum key. Strata are formed at capability-dimension granularity.
    pub fn dimension(&self) -> &str {
        &self.capability
    }
}

/// Which part of the dataset a sample came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceTier {
    Fresh,
    Refined,
    Private,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextMatch {
    /// Deterministic normalized string comparison.
    #[default]
    Exact,
    /// Free-form reference answer; scored through the semantic cascade.
    Semantic,
}

/// One step of an agent trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    pub tool: String,
    #[serde(default)]
    pub args: serde_json::Value,
}

/// Reference answer. The variant decides which scoring tier handles a sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GoldAnswer {
    Text {
        value: String,
        #[serde(default)]
        r#match: TextMatch,
    },
    Numeric {
        value: f64,
    },
    LabelSet {
        labels: Vec<String>,
    },
    ToolTrace {
        steps: Vec<ToolCall>,
    },
}

impl GoldAnswer {
    pub fn exact(value: impl Into<String>) -> Self {
        GoldAnswer::Text {
            value: value.into(),
            r#match: TextMatch::Exact,
        }
    }

    /// Plain-text rendering, used as the "correct" synthetic output.
    pub fn render(&self) -> String {
        match self {
            GoldAnswer::Text { value, .. } => value.clone(),
            GoldAnswer::Numeric { value } => format!("{value}"),
            GoldAnswer::LabelSet { labels } => labels.join(", "),
            GoldAnswer::ToolTrace { steps } => {
                serde_json::to_string(steps).unwrap_or_else(|_| String::from("[]"))
            }
        }
    }
}

/// One benchmark item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub cell: CapabilityCell,
    pub task_type: String,
    pub prompt: String,
    #[serde(default)]
    pub constraints: String,
    pub gold: GoldAnswer,
    pub unit_cost: f64,
    pub source_tier: SourceTier,
    pub created_at: String,
    /// Fine-grained sub-task label, kept as metadata only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subtask: Option<String>,
    /// Item difficulty used by the synthetic responder; 0 when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub difficulty: Option<f64>,
}

impl Sample {
    pub fn dimension(&self) -> &str {
        self.cell.dimension()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.id.is_empty() {
            return Err(ModelError::Invalid("empty sample id".into()));
        }
        if self.cell.domain.is_empty() || self.cell.capability.is_empty() {
            return Err(ModelError::Invalid(format!("sample {}: empty cell", self.id)));
        }
        if !(self.unit_cost.is_finite() && self.unit_cost >= 0.0) {
            return Err(ModelError::Invalid(format!(
                "sample {}: unit_cost must be finite and >= 0",
                self.id
            )));
        }
        if let GoldAnswer::Numeric { value } = self.gold {
            if !value.is_finite() {
                return Err(ModelError::Invalid(format!("sample {}: non-finite gold", self.id)));
            }
        }
        Ok(())
    }
}

/// A sub-population of samples sharing one capability dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stratum {
    pub id: String,
    pub population_size: usize,
    pub weight: f64,
    pub unit_cost: f64,
}

/// Groups samples by dimension. Strata come out in first-appearance order
/// unless `dimensions` is given, in which case that order is used and every
/// sample must belong to one of them.
pub fn build_strata(dataset: &[Sample], dimensions: Option<&[String]>) -> Result<Vec<Stratum>, ModelError> {
    Ok(partition(dataset, dimensions)?
        .into_iter()
        .map(|(s, _)| s)
        .collect())
}

/// Same as [`build_strata`] but also returns each stratum's members in
/// dataset order.
pub fn partition<'a>(
    dataset: &'a [Sample],
    dimensions: Option<&[String]>,
) -> Result<Vec<(Stratum, Vec<&'a Sample>)>, ModelError> {
    if dataset.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let mut order: Vec<String> = match dimensions {
        Some(dims) => dims.to_vec(),
        None => Vec::new(),
    };
    let mut groups: BTreeMap<String, Vec<&Sample>> = BTreeMap::new();
    for s in dataset {
        let dim = s.dimension();
        if dimensions.is_some() {
            if !order.iter().any(|d| d == dim) {
                return Err(ModelError::UnknownDimension(s.id.clone()));
            }
        } else if !groups.contains_key(dim) {
            order.push(dim.to_string());
        }
        groups.entry(dim.to_string()).or_default().push(s);
    }
    let total = dataset.len() as f64;
    Ok(order
        .into_iter()
        .filter_map(|dim| {
            let members = groups.remove(&dim)?;
            let n = members.len();
            let cost = members.iter().map(|s| s.unit_cost).sum::<f64>() / n as f64;
            Some((
                Stratum {
                    id: dim,
                    population_size: n,
                    weight: n as f64 / total,
                    unit_cost: cost,
                },
                members,
            ))
        })
        .collect())
}

/// Sufficient statistics of the scores drawn from one stratum.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StratumAccumulator {
    pub n: usize,
    pub sum: f64,
    pub sum_sq: f64,
    pub drawn_ids: BTreeSet<String>,
}

impl StratumAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records one score. Returns false (and changes nothing) if the id was
    /// already drawn.
    pub fn push(&mut self, id: &str, score: f64) -> bool {
        if !self.drawn_ids.insert(id.to_string()) {
            return false;
        }
        self.n += 1;
        self.sum += score;
        self.sum_sq += score * score;
        true
    }

    /// Combines two accumulators over disjoint draws.
    pub fn merge(&self, other: &Self) -> Self {
        let mut drawn_ids = self.drawn_ids.clone();
        drawn_ids.extend(other.drawn_ids.iter().cloned());
        Self {
            n: self.n + other.n,
            sum: self.sum + other.sum,
            sum_sq: self.sum_sq + other.sum_sq,
            drawn_ids,
        }
    }

    pub fn mean(&self) -> Option<f64> {
        (self.n > 0).then(|| (self.sum / self.n as f64).clamp(0.0, 1.0))
    }

    /// Unbiased sample variance; defined for n >= 2.
    pub fn variance(&self) -> Option<f64> {
        if self.n < 2 {
            return None;
        }
        let n = self.n as f64;
        let v = (self.sum_sq - self.sum * self.sum / n) / (n - 1.0);
        Some(v.max(0.0))
    }

    pub fn stddev(&self) -> Option<f64> {
        self.variance().map(f64::sqrt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelCategory {
    Commercial,
    OpenSource,
    MultiAgent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDescriptor {
    pub id: String,
    pub category: ModelCategory,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price_per_1k_tokens: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Provider name used to locate the API key; defaults to the id prefix.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provider: Option<String>,
}

impl ModelDescriptor {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.endpoint.is_some() == self.seed.is_some() {
            return Err(ModelError::Invalid(format!(
                "model {}: exactly one of endpoint/seed must be set",
                self.id
            )));
        }
        if let Some(p) = self.price_per_1k_tokens {
            if !(p.is_finite() && p >= 0.0) {
                return Err(ModelError::Invalid(format!("model {}: bad price", self.id)));
            }
        }
        Ok(())
    }

    /// `RELE_API_KEY_<PROVIDER>` with the provider upper-cased and every
    /// non-alphanumeric byte replaced by `_`.
    pub fn api_key_var(&self) -> String {
        let provider = self
            .provider
            .clone()
            .unwrap_or_else(|| self.id.split('/').next().unwrap_or(&self.id).to_string());
        let cleaned: String = provider
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_uppercase() } else { '_' })
            .collect();
        format!("RELE_API_KEY_{cleaned}")
    }
}

/// Named weights over dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightScheme {
    pub name: String,
    pub weights: BTreeMap<String, f64>,
}

impl WeightScheme {
    pub fn new(name: impl Into<String>, weights: impl IntoIterator<Item = (String, f64)>) -> Self {
        Self {
            name: name.into(),
            weights: weights.into_iter().collect(),
        }
    }

    pub fn uniform(name: impl Into<String>, dimensions: &[String]) -> Self {
        let w = 1.0 / dimensions.len() as f64;
        Self::new(name, dimensions.iter().map(|d| (d.clone(), w)))
    }

    pub fn weight(&self, dimension: &str) -> f64 {
        self.weights.get(dimension).copied().unwrap_or(0.0)
    }
}

pub fn validate_scheme(scheme: &WeightScheme, dimensions: &[String]) -> Result<(), ModelError> {
    for (dim, &w) in &scheme.weights {
        if !dimensions.iter().any(|d| d == dim) {
            return Err(ModelError::UnknownSchemeDimension(dim.clone()));
        }
        if !w.is_finite() || w < 0.0 {
            return Err(ModelError::NegativeWeight(dim.clone()));
        }
    }
    for (dim, &w) in &scheme.weights {
        if w > 1.0 {
            return Err(ModelError::Invalid(format!("weight on {dim} exceeds 1")));
        }
    }
    let sum: f64 = scheme.weights.values().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
        return Err(ModelError::WeightSumInvalid(sum));
    }
    Ok(())
}

/// The three named weighting schemes over the seven headline dimensions.
/// Weights not fixed by name are spread uniformly over the rest.
pub fn default_schemes() -> Vec<WeightScheme> {
    let dims = default_dimensions();
    let spread = |name: &str, fixed: &[(&str, f64)]| {
        let fixed_sum: f64 = fixed.iter().map(|(_, w)| w).sum();
        let rest: Vec<&String> = dims
            .iter()
            .filter(|d| !fixed.iter().any(|(f, _)| f == d))
            .collect();
        let each = (1.0 - fixed_sum) / rest.len() as f64;
        let mut weights: BTreeMap<String, f64> =
            fixed.iter().map(|(d, w)| (d.to_string(), *w)).collect();
        for d in rest {
            weights.insert(d.clone(), each);
        }
        WeightScheme {
            name: name.to_string(),
            weights,
        }
    };
    vec![
        spread("general-heavy", &[("Language", 0.40), ("Reasoning", 0.20)]),
        spread(
            "professional-heavy",
            &[("Education", 0.15), ("Medical", 0.15), ("Finance", 0.15), ("Law", 0.15)],
        ),
        spread("reasoning-heavy", &[("Reasoning", 0.50), ("Agent", 0.20)]),
    ]
}

/// The default schemes restricted to `dims`, each renormalised to sum to 1.
/// A scheme with no weight left on `dims` becomes uniform over them.
pub fn default_schemes_for(dims: &[String]) -> Vec<WeightScheme> {
    default_schemes()
        .into_iter()
        .map(|s| {
            let kept: BTreeMap<String, f64> = dims.iter().map(|d| (d.clone(), s.weight(d))).collect();
            let total: f64 = kept.values().sum();
            let weights = if total > 0.0 {
                kept.into_iter().map(|(d, w)| (d, w / total)).collect()
            } else {
                dims.iter().map(|d| (d.clone(), 1.0 / dims.len() as f64)).collect()
            };
            WeightScheme { name: s.name, weights }
        })
        .collect()
}

pub fn default_dimensions() -> Vec<String> {
    ["Language", "Reasoning", "Education", "Medical", "Finance", "Law", "Agent"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

/// Models x dimensions score table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    pub model_ids: Vec<String>,
    pub dimension_ids: Vec<String>,
    pub raw: Vec<Vec<f64>>,
    pub normalized: Vec<Vec<f64>>,
    pub difficulty: Vec<f64>,
}

impl ScoreMatrix {
    pub fn validate(&self) -> Result<(), ModelError> {
        let k = self.dimension_ids.len();
        let m = self.model_ids.len();
        let shape_ok = |mat: &Vec<Vec<f64>>| mat.len() == m && mat.iter().all(|r| r.len() == k);
        if !shape_ok(&self.raw) || !shape_ok(&self.normalized) || self.difficulty.len() != k {
            return Err(ModelError::Invalid("score matrix shape mismatch".into()));
        }
        let in_unit = |x: &f64| x.is_finite() && (0.0..=1.0).contains(x);
        if !self.raw.iter().flatten().all(in_unit) || !self.normalized.iter().flatten().all(in_unit) {
            return Err(ModelError::Invalid("score outside [0,1]".into()));
        }
        if !self.difficulty.iter().all(|b| b.is_finite() && *b > 0.0 && *b <= 1.0) {
            return Err(ModelError::Invalid("difficulty outside (0,1]".into()));
        }
        Ok(())
    }

    /// CSV with header `model_id,<dimension ids...>`.
    pub fn write_csv<W: Write>(&self, normalized: bool, out: W) -> Result<(), ModelError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["model_id".to_string()];
        header.extend(self.dimension_ids.iter().cloned());
        w.write_record(&header).map_err(|e| ModelError::Io(e.to_string()))?;
        let mat = if normalized { &self.normalized } else { &self.raw };
        for (id, row) in self.model_ids.iter().zip(mat) {
            let mut rec = vec![id.clone()];
            rec.extend(row.iter().map(|x| x.to_string()));
            w.write_record(&rec).map_err(|e| ModelError::Io(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Reads a JSON-Lines dataset. Blank lines are skipped; line numbers in
/// errors are 1-based.
pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Vec<Sample>, ModelError> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let sample: Sample = serde_json::from_str(&line).map_err(|e| ModelError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        sample.validate().map_err(|e| ModelError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if !seen.insert(sample.id.clone()) {
            return Err(ModelError::DuplicateId {
                line: line_no,
                id: sample.id,
            });
        }
        out.push(sample);
    }
    Ok(out)
}

/// Writes samples as JSON-Lines. Private-tier samples are dropped unless
/// `include_private` is set.
pub fn write_jsonl<W: Write>(samples: &[Sample], include_private: bool, mut out: W) -> Result<usize, ModelError> {
    let mut written = 0;
    for s in samples {
        if s.source_tier == SourceTier::Private && !include_private {
            continue;
        }
        let line = serde_json::to_string(s).map_err(|e| ModelError::Io(e.to_string()))?;
        writeln!(out, "{line}")?;
        written += 1;
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn sample(id: &str, dim: &str, cost: f64) -> Sample {
        Sample {
            id: id.into(),
            cell: CapabilityCell::new("General", dim),
            task_type: "qa".into(),
            prompt: format!("prompt {id}"),
            constraints: String::new(),
            gold: GoldAnswer::exact("x"),
            unit_cost: cost,
            source_tier: SourceTier::Fresh,
            created_at: "2025-10-01T00:00:00Z".into(),
            subtask: None,
            difficulty: None,
        }
    }

    fn dataset(sizes: &[(&str, usize)]) -> Vec<Sample> {
        sizes
            .iter()
            .flat_map(|(d, n)| (0..*n).map(move |i| sample(&format!("{d}-{i}"), d, 1.0)))
            .collect()
    }

    #[test]
    fn strata_weights_follow_population_shares() {
        let strata = build_strata(&dataset(&[("a", 60), ("b", 40)]), None).unwrap();
        assert_eq!(strata.len(), 2);
        assert_eq!(strata[0].weight, 0.6);
        assert_eq!(strata[1].weight, 0.4);

        let single = build_strata(&dataset(&[("a", 100)]), None).unwrap();
        assert_eq!(single[0].weight, 1.0);
        assert_eq!(single[0].population_size, 100);
    }

    #[test]
    fn strata_weights_for_capability_column_totals() {
        let totals = [59_400usize, 59_750, 41_933, 14_888];
        let n: usize = 207_843;
        let expected = [0.2858, 0.2875, 0.2017, 0.0716];
        for (t, e) in totals.iter().zip(expected) {
            assert!((*t as f64 / n as f64 - e).abs() < 1e-4);
        }
    }

    #[test]
    fn strata_cost_is_mean_unit_cost() {
        let ds = vec![sample("1", "a", 1.0), sample("2", "a", 3.0), sample("3", "b", 2.0)];
        let strata = build_strata(&ds, None).unwrap();
        assert_eq!(strata[0].unit_cost, 2.0);
        assert_eq!(strata[1].unit_cost, 2.0);
    }

    #[test]
    fn strata_errors() {
        assert_eq!(build_strata(&[], None), Err(ModelError::EmptyDataset));
        let dims = vec!["a".to_string()];
        let ds = vec![sample("1", "a", 1.0), sample("2", "zzz", 1.0)];
        assert_eq!(
            build_strata(&ds, Some(&dims)),
            Err(ModelError::UnknownDimension("2".into()))
        );
    }

    #[test]
    fn configured_dimension_order_is_kept() {
        let dims = vec!["b".to_string(), "a".to_string(), "c".to_string()];
        let strata = build_strata(&dataset(&[("a", 3), ("b", 1)]), Some(&dims)).unwrap();
        let ids: Vec<_> = strata.iter().map(|s| s.id.as_str()).collect();
        assert_eq!(ids, ["b", "a"]);
    }

    #[test]
    fn scheme_validation() {
        let dims: Vec<String> = (0..22).map(|i| format!("d{i}")).collect();
        validate_scheme(&WeightScheme::uniform("u", &dims), &dims).unwrap();

        let short = WeightScheme::new("s", [("d0".to_string(), 0.5), ("d1".to_string(), 0.48)]);
        match validate_scheme(&short, &dims) {
            Err(ModelError::WeightSumInvalid(s)) => assert!((s - 0.98).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }

        let neg = WeightScheme::new("n", [("d0".to_string(), 1.5), ("d1".to_string(), -0.5)]);
        assert!(matches!(validate_scheme(&neg, &dims), Err(ModelError::NegativeWeight(_))));

        let unknown = WeightScheme::new("x", [("nope".to_string(), 1.0)]);
        assert!(matches!(
            validate_scheme(&unknown, &dims),
            Err(ModelError::UnknownSchemeDimension(_))
        ));
    }

    #[test]
    fn default_schemes_are_valid() {
        let dims = default_dimensions();
        let schemes = default_schemes();
        assert_eq!(schemes.len(), 3);
        for s in &schemes {
            validate_scheme(s, &dims).unwrap();
        }
        let general = &schemes[0];
        assert_eq!(general.weight("Language"), 0.40);
        assert_eq!(general.weight("Reasoning"), 0.20);
        assert!((general.weight("Law") - 0.08).abs() < 1e-15);
        let pro = &schemes[1];
        let pro_sum: f64 = ["Education", "Medical", "Finance", "Law"].iter().map(|d| pro.weight(d)).sum();
        assert!((pro_sum - 0.60).abs() < 1e-12);
        assert_eq!(schemes[2].weight("Reasoning"), 0.50);
        assert_eq!(schemes[2].weight("Agent"), 0.20);
    }

    #[test]
    fn default_schemes_restrict_to_present_dimensions() {
        let dims: Vec<String> = vec!["Language".into(), "Law".into()];
        let schemes = default_schemes_for(&dims);
        for s in &schemes {
            validate_scheme(s, &dims).unwrap();
        }
        // general-heavy keeps 0.40 : 0.08.
        assert!((schemes[0].weight("Language") - 0.40 / 0.48).abs() < 1e-12);
        assert_eq!(default_schemes_for(&default_dimensions()).len(), 3);
        let other = default_schemes_for(&["x".to_string(), "y".to_string()]);
        assert!(other.iter().all(|s| s.weight("x") == 0.5));
    }

    #[test]
    fn accumulator_stats_and_no_replacement() {
        let mut acc = StratumAccumulator::new();
        assert!(acc.mean().is_none());
        assert!(acc.push("a", 1.0));
        assert!(acc.variance().is_none());
        assert!(acc.push("b", 0.0));
        assert!(!acc.push("b", 1.0));
        assert_eq!(acc.n, 2);
        assert_eq!(acc.mean(), Some(0.5));
        assert_eq!(acc.variance(), Some(0.5));
    }

    #[test]
    fn descriptor_requires_exactly_one_source() {
        let mut d = ModelDescriptor {
            id: "acme/model-x".into(),
            category: ModelCategory::Commercial,
            endpoint: None,
            price_per_1k_tokens: None,
            seed: None,
            provider: None,
        };
        assert!(d.validate().is_err());
        d.seed = Some(1);
        d.validate().unwrap();
        d.endpoint = Some("http://localhost".into());
        assert!(d.validate().is_err());
        assert_eq!(d.api_key_var(), "RELE_API_KEY_ACME");
    }

    #[test]
    fn jsonl_errors_carry_line_numbers() {
        let a = serde_json::to_string(&sample("a", "x", 1.0)).unwrap();
        let text = format!("{a}\n\n{a}\n");
        assert_eq!(
            read_jsonl(text.as_bytes()),
            Err(ModelError::DuplicateId { line: 3, id: "a".into() })
        );
        let bad = format!("{a}\n{{not json\n");
        assert!(matches!(read_jsonl(bad.as_bytes()), Err(ModelError::Parse { line: 2, .. })));
    }

    #[test]
    fn private_samples_are_not_exported() {
        let mut p = sample("p", "x", 1.0);
        p.source_tier = SourceTier::Private;
        let ds = vec![sample("a", "x", 1.0), p];
        let mut buf = Vec::new();
        assert_eq!(write_jsonl(&ds, false, &mut buf).unwrap(), 1);
        let back = read_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].id, "a");
    }

    #[test]
    fn matrix_csv_header() {
        let m = ScoreMatrix {
            model_ids: vec!["m1".into()],
            dimension_ids: vec!["a".into(), "b".into()],
            raw: vec![vec![0.5, 1.0]],
            normalized: vec![vec![0.5, 1.0]],
            difficulty: vec![1.0, 1.0],
        };
        m.validate().unwrap();
        let mut buf = Vec::new();
        m.write_csv(false, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("model_id,a,b"));
    }
}
