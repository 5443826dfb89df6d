//! Hybrid verification: deterministic matching for objective items, a
//! similarity filter with fixed accept/reject thresholds for free-form items,
//! and an injected judge for the ambiguous band between them.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{GoldAnswer, Sample, TextMatch, ToolCall};
use crate::oracle::Response;

/// Similarity strictly above this is accepted without a judge.
pub const ACCEPT_THRESHOLD: f64 = 0.92;
/// Similarity strictly below this is rejected without a judge.
pub const REJECT_THRESHOLD: f64 = 0.60;

/// Relative tolerance for numeric answers.
pub const NUMERIC_TOLERANCE: f64 = 1e-6;

pub const EXTRACTION_TABLE: &str = include_str!("../data/extraction_v1.json");
pub const DEFAULT_JUDGE_PROMPT: &str = include_str!("../data/judge_prompt.txt");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoringError {
    #[error("no number found in output")]
    NoNumberFound,
    #[error("similarity {0} outside [-1, 1]")]
    OutOfRange(f64),
    #[error("label vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    Empty,
    #[error("gold trace is empty")]
    EmptyGold,
    #[error("judge failed: {0}")]
    JudgeFailure(String),
    #[error("judge template is missing placeholder {0}")]
    TemplatePlaceholder(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    ObjectiveExact,
    ObjectiveNumeric,
    SemanticAutoAccept,
    SemanticAutoReject,
    Judge,
    AgentComposite,
}

impl Tier {
    /// Tier a gold answer lands in before any routing.
    pub fn for_gold(gold: &GoldAnswer) -> Tier {
        match gold {
            GoldAnswer::Text { r#match: TextMatch::Exact, .. } | GoldAnswer::LabelSet { .. } => Tier::ObjectiveExact,
            GoldAnswer::Text { r#match: TextMatch::Semantic, .. } => Tier::Judge,
            GoldAnswer::Numeric { .. } => Tier::ObjectiveNumeric,
            GoldAnswer::ToolTrace { .. } => Tier::AgentComposite,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreFlag {
    NoNumberFound,
    JudgeFailure,
    InvalidSimilarity,
    MalformedTrace,
}

impl std::fmt::Display for ScoreFlag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ScoreFlag::NoNumberFound => "no_number_found",
            ScoreFlag::JudgeFailure => "judge_failure",
            ScoreFlag::InvalidSimilarity => "invalid_similarity",
            ScoreFlag::MalformedTrace => "malformed_trace",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub sample_id: String,
    pub score: f64,
    pub tier: Tier,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub similarity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub judge_verdict: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag: Option<ScoreFlag>,
}

impl ScoreRecord {
    fn new(sample_id: &str, score: f64, tier: Tier) -> Self {
        Self {
            sample_id: sample_id.to_string(),
            score,
            tier,
            similarity: None,
            judge_verdict: None,
            flag: None,
        }
    }
}

pub trait Scorer: Sync {
    fn score(&self, sample: &Sample, response: &Response) -> ScoreRecord;
}

#[derive(Debug, Deserialize)]
struct ExtractionTable {
    #[allow(dead_code)]
    version: u32,
    rules: Vec<ExtractionRule>,
}

#[derive(Debug, Deserialize)]
struct ExtractionRule {
    #[allow(dead_code)]
    name: String,
    pattern: String,
}

fn extraction_rules() -> &'static [Regex] {
    static RULES: OnceLock<Vec<Regex>> = OnceLock::new();
    RULES.get_or_init(|| {
        let table: ExtractionTable = serde_json::from_str(EXTRACTION_TABLE).expect("bundled extraction table parses");
        table
            .rules
            .iter()
            .map(|r| Regex::new(&r.pattern).expect("bundled extraction pattern compiles"))
            .collect()
    })
}

/// Pulls the answer span out of a verbose output using the bundled rule
/// table. The first matching rule wins; unmatched text passes through.
pub fn extract_answer(output: &str) -> &str {
    for rule in extraction_rules() {
        if let Some(m) = rule.captures(output).and_then(|c| c.name("answer")) {
            return m.as_str();
        }
    }
    output
}

fn is_trailing_punct(c: char) -> bool {
    matches!(c, '。' | '．' | '.' | '!' | '?' | '！' | '？')
}

/// Trim, collapse whitespace, casefold, strip trailing sentence punctuation.
pub fn normalize_answer(text: &str) -> String {
    let mut s: String = text.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
    loop {
        let trimmed = s.trim_end_matches(is_trailing_punct).trim_end();
        if trimmed.len() == s.len() {
            break;
        }
        s = trimmed.to_string();
    }
    s
}

/// 1 iff the extracted, normalized output equals the normalized gold.
pub fn exact_match(output: &str, gold: &str) -> f64 {
    if normalize_answer(extract_answer(output)) == normalize_answer(gold) {
        1.0
    } else {
        0.0
    }
}

fn number_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?P<num>[-+−]?\d+(?:\.\d+)?)(?:\s*/\s*(?P<den>\d+(?:\.\d+)?))?(?P<pct>\s*%)?").unwrap()
    })
}

/// Last numeric literal in `text`: integer, decimal, `a/b` fraction, or a
/// percentage (divided by 100).
pub fn last_number(text: &str) -> Option<f64> {
    let caps = number_pattern().captures_iter(text).last()?;
    let num: f64 = caps["num"].replace('−', "-").parse().ok()?;
    let mut value = match caps.name("den") {
        Some(d) => {
            let den: f64 = d.as_str().parse().ok()?;
            if den == 0.0 {
                return None;
            }
            num / den
        }
        None => num,
    };
    if caps.name("pct").is_some() {
        value /= 100.0;
    }
    Some(value)
}

/// 1 iff the last number in `output` is within `1e-6 * max(1, |gold|)`.
pub fn numeric_equiv(output: &str, gold: f64) -> Result<f64, ScoringError> {
    let x = last_number(output).ok_or(ScoringError::NoNumberFound)?;
    Ok(if (x - gold).abs() <= NUMERIC_TOLERANCE * gold.abs().max(1.0) {
        1.0
    } else {
        0.0
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Route {
    AutoAccept,
    AutoReject,
    Judge,
}

/// Both thresholds are inclusive on the judge side.
pub fn route(similarity: f64) -> Result<Route, ScoringError> {
    if !(-1.0..=1.0).contains(&similarity) {
        return Err(ScoringError::OutOfRange(similarity));
    }
    Ok(if similarity > ACCEPT_THRESHOLD {
        Route::AutoAccept
    } else if similarity < REJECT_THRESHOLD {
        Route::AutoReject
    } else {
        Route::Judge
    })
}

/// Tool selection accuracy (LCS over tool names, divided by trace length)
/// and step redundancy `max(0, |trace| - |gold|) / |trace|`.
pub fn tool_metrics(trace: &[ToolCall], gold: &[ToolCall]) -> Result<(f64, f64), ScoringError> {
    if gold.is_empty() {
        return Err(ScoringError::EmptyGold);
    }
    if trace.is_empty() {
        return Ok((0.0, 0.0));
    }
    let (n, m) = (trace.len(), gold.len());
    let mut dp = vec![vec![0usize; m + 1]; n + 1];
    for i in 1..=n {
        for j in 1..=m {
            dp[i][j] = if trace[i - 1].tool == gold[j - 1].tool {
                dp[i - 1][j - 1] + 1
            } else {
                dp[i - 1][j].max(dp[i][j - 1])
            };
        }
    }
    let accuracy = dp[n][m] as f64 / n as f64;
    let redundancy = n.saturating_sub(m) as f64 / n as f64;
    Ok((accuracy, redundancy))
}

fn label_set(text: &str) -> BTreeSet<String> {
    static SEP: OnceLock<Regex> = OnceLock::new();
    let sep = SEP.get_or_init(|| Regex::new(r"[,，;；、\s]+").unwrap());
    sep.split(text)
        .map(normalize_answer)
        .filter(|s| !s.is_empty())
        .collect()
}

/// Scores one output. Objective gold bypasses the similarity cascade;
/// free-form gold is routed by `similarity_fn`, and only the judge band calls
/// `judge_fn`. A failing judge scores 0.
pub fn hybrid_score<S, J>(sample: &Sample, output: &str, similarity_fn: S, judge_fn: J) -> ScoreRecord
where
    S: Fn(&str, &str) -> f64,
    J: Fn(&Sample, &str) -> Result<f64, String>,
{
    let id = &sample.id;
    match &sample.gold {
        GoldAnswer::Text { value, r#match: TextMatch::Exact } => {
            ScoreRecord::new(id, exact_match(output, value), Tier::ObjectiveExact)
        }
        GoldAnswer::Numeric { value } => match numeric_equiv(output, *value) {
            Ok(s) => ScoreRecord::new(id, s, Tier::ObjectiveNumeric),
            Err(_) => ScoreRecord {
                flag: Some(ScoreFlag::NoNumberFound),
                ..ScoreRecord::new(id, 0.0, Tier::ObjectiveNumeric)
            },
        },
        GoldAnswer::LabelSet { labels } => {
            let want: BTreeSet<String> = labels.iter().map(|l| normalize_answer(l)).collect();
            let got = label_set(extract_answer(output));
            ScoreRecord::new(id, if got == want { 1.0 } else { 0.0 }, Tier::ObjectiveExact)
        }
        GoldAnswer::ToolTrace { steps } => {
            let parsed: Result<Vec<ToolCall>, _> = serde_json::from_str(output.trim());
            match parsed.map_err(|_| ()).and_then(|t| tool_metrics(&t, steps).map_err(|_| ())) {
                Ok((acc, red)) => ScoreRecord::new(id, acc * (1.0 - red), Tier::AgentComposite),
                Err(()) => ScoreRecord {
                    flag: Some(ScoreFlag::MalformedTrace),
                    ..ScoreRecord::new(id, 0.0, Tier::AgentComposite)
                },
            }
        }
        GoldAnswer::Text { value, r#match: TextMatch::Semantic } => {
            let sim = similarity_fn(output, value);
            let routed = route(sim);
            let judged = |similarity: Option<f64>, flag: Option<ScoreFlag>| match judge_fn(sample, output) {
                Ok(v) if (0.0..=1.0).contains(&v) => ScoreRecord {
                    similarity,
                    judge_verdict: Some(v),
                    flag,
                    ..ScoreRecord::new(id, v, Tier::Judge)
                },
                _ => ScoreRecord {
                    similarity,
                    flag: Some(ScoreFlag::JudgeFailure),
                    ..ScoreRecord::new(id, 0.0, Tier::Judge)
                },
            };
            match routed {
                Ok(Route::AutoAccept) => ScoreRecord {
                    similarity: Some(sim),
                    ..ScoreRecord::new(id, 1.0, Tier::SemanticAutoAccept)
                },
                Ok(Route::AutoReject) => ScoreRecord {
                    similarity: Some(sim),
                    ..ScoreRecord::new(id, 0.0, Tier::SemanticAutoReject)
                },
                Ok(Route::Judge) => judged(Some(sim), None),
                Err(_) => judged(None, Some(ScoreFlag::InvalidSimilarity)),
            }
        }
    }
}

/// Removes every `open ... close` span (reasoning traces) from `text`.
/// An unterminated span is removed to the end.
pub fn strip_think(text: &str, open: &str, close: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(start) = rest.find(open) {
        out.push_str(&rest[..start]);
        let after = &rest[start + open.len()..];
        match after.find(close) {
            Some(end) => rest = &after[end + close.len()..],
            None => {
                rest = "";
                break;
            }
        }
    }
    out.push_str(rest);
    out.trim().to_string()
}

fn char_bigrams(text: &str) -> HashMap<(char, char), f64> {
    let chars: Vec<char> = normalize_answer(text).chars().collect();
    let mut counts = HashMap::new();
    if chars.len() == 1 {
        *counts.entry((chars[0], '\0')).or_insert(0.0) += 1.0;
    }
    for w in chars.windows(2) {
        *counts.entry((w[0], w[1])).or_insert(0.0) += 1.0;
    }
    counts
}

/// Cosine similarity of character-bigram count vectors. The default
/// stand-in for an embedding model.
pub fn char_ngram_cosine(a: &str, b: &str) -> f64 {
    let (va, vb) = (char_bigrams(a), char_bigrams(b));
    if va.is_empty() && vb.is_empty() {
        return 1.0;
    }
    let dot: f64 = va.iter().filter_map(|(k, x)| vb.get(k).map(|y| x * y)).sum();
    let na: f64 = va.values().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = vb.values().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(0.0, 1.0)
    }
}

/// A judge that always returns `verdict`.
pub fn constant_judge(verdict: f64) -> impl Fn(&Sample, &str) -> Result<f64, String> + Sync + Clone {
    move |_, _| Ok(verdict)
}

/// Prompt template with `{question}`, `{gold}` and `{candidate}` slots.
#[derive(Debug, Clone, PartialEq)]
pub struct JudgeTemplate {
    text: String,
}

impl JudgeTemplate {
    pub fn new(text: impl Into<String>) -> Result<Self, ScoringError> {
        let text = text.into();
        for p in ["{question}", "{gold}", "{candidate}"] {
            if !text.contains(p) {
                return Err(ScoringError::TemplatePlaceholder(p));
            }
        }
        Ok(Self { text })
    }

    pub fn bundled() -> Self {
        Self::new(DEFAULT_JUDGE_PROMPT).expect("bundled judge prompt has all placeholders")
    }

    pub fn render(&self, question: &str, gold: &str, candidate: &str) -> String {
        self.text
            .replace("{question}", question)
            .replace("{gold}", gold)
            .replace("{candidate}", candidate)
    }
}

/// Parses the last non-empty line of a judge reply as `SCORE: <0|0.5|1>`.
pub fn parse_verdict(reply: &str) -> Result<f64, ScoringError> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"^SCORE:\s*(0|0\.5|1)$").unwrap());
    let last = reply.lines().map(str::trim).filter(|l| !l.is_empty()).last().unwrap_or("");
    let caps = re
        .captures(last)
        .ok_or_else(|| ScoringError::JudgeFailure(format!("unparseable verdict line {last:?}")))?;
    Ok(caps[1].parse().expect("grammar only admits numbers"))
}

/// Adapts a text-in/text-out model call into a judge function.
pub fn judge_from_completion<C>(template: JudgeTemplate, call: C) -> impl Fn(&Sample, &str) -> Result<f64, String> + Sync
where
    C: Fn(&str) -> Result<String, String> + Sync,
{
    move |sample: &Sample, candidate: &str| {
        let prompt = template.render(&sample.prompt, &sample.gold.render(), candidate);
        let reply = call(&prompt)?;
        parse_verdict(&reply).map_err(|e| e.to_string())
    }
}

/// Cohen's kappa between two raters.
pub fn cohen_kappa<T: Ord + Clone>(a: &[T], b: &[T]) -> Result<f64, ScoringError> {
    if a.len() != b.len() {
        return Err(ScoringError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(ScoringError::Empty);
    }
    let n = a.len() as f64;
    let agree = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64;
    let p_o = agree / n;
    let mut marg: BTreeMap<&T, (f64, f64)> = BTreeMap::new();
    for x in a {
        marg.entry(x).or_default().0 += 1.0;
    }
    for y in b {
        marg.entry(y).or_default().1 += 1.0;
    }
    let p_e: f64 = marg.values().map(|(ca, cb)| (ca / n) * (cb / n)).sum();
    if (1.0 - p_e).abs() < f64::EPSILON {
        return Ok(if p_o >= 1.0 { 1.0 } else { 0.0 });
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

/// The cascade as a [`Scorer`] with injected similarity and judge functions.
pub struct CascadeScorer<S, J> {
    pub similarity: S,
    pub judge: J,
    /// Reasoning-trace delimiters stripped before scoring.
    pub think_tags: Option<(String, String)>,
    /// Use a responder-supplied score when one is present.
    pub prefer_hint: bool,
}

impl<S, J> CascadeScorer<S, J> {
    pub fn new(similarity: S, judge: J) -> Self {
        Self {
            similarity,
            judge,
            think_tags: Some(("<think>".into(), "</think>".into())),
            prefer_hint: false,
        }
    }

    pub fn prefer_hint(mut self, yes: bool) -> Self {
        self.prefer_hint = yes;
        self
    }
}

/// Character-bigram similarity and a judge that always rejects.
pub fn default_scorer() -> CascadeScorer<fn(&str, &str) -> f64, impl Fn(&Sample, &str) -> Result<f64, String> + Sync + Clone> {
    CascadeScorer::new(char_ngram_cosine as fn(&str, &str) -> f64, constant_judge(0.0))
}

impl<S, J> Scorer for CascadeScorer<S, J>
where
    S: Fn(&str, &str) -> f64 + Sync,
    J: Fn(&Sample, &str) -> Result<f64, String> + Sync,
{
    fn score(&self, sample: &Sample, response: &Response) -> ScoreRecord {
        if let (true, Some(h)) = (self.prefer_hint, response.score_hint) {
            return ScoreRecord::new(&sample.id, h.clamp(0.0, 1.0), Tier::for_gold(&sample.gold));
        }
        let text = match &self.think_tags {
            Some((open, close)) => strip_think(&response.output, open, close),
            None => response.output.clone(),
        };
        hybrid_score(sample, &text, &self.similarity, &self.judge)
    }
}
