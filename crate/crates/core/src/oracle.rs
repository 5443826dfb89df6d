//! Model responders: a seeded synthetic simulator with known ground truth,
//! and a chat-completions client for hosted endpoints.

use std::collections::BTreeMap;
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ModelDescriptor, Sample};
use crate::rng;
use crate::scheduler::Population;
use crate::scoring::Scorer;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ResponderError {
    #[error("request timed out")]
    Timeout,
    #[error("http status {0}")]
    HttpStatus(u16),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("transport: {0}")]
    Transport(String),
    #[error("no ability configured for dimension {0}")]
    UnknownDimension(String),
    #[error("missing credential in ${0}")]
    MissingCredential(String),
    #[error("model has no endpoint")]
    NoEndpoint,
}

/// What a responder hands back for one sample.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Response {
    pub output: String,
    pub latency_ms: f64,
    /// Ground-truth score when the responder knows it (synthetic models).
    pub score_hint: Option<f64>,
}

pub trait Responder: Sync {
    fn respond(&self, sample: &Sample) -> Result<Response, ResponderError>;
}

impl<F> Responder for F
where
    F: Fn(&Sample) -> Result<Response, ResponderError> + Sync,
{
    fn respond(&self, sample: &Sample) -> Result<Response, ResponderError> {
        self(sample)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grading {
    #[default]
    Binary,
    Graded,
}

fn default_concentration() -> f64 {
    10.0
}

/// A simulated model with a known per-dimension success probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticProfile {
    pub model_id: String,
    pub ability: BTreeMap<String, f64>,
    #[serde(default)]
    pub difficulty_sensitivity: f64,
    #[serde(default)]
    pub grading: Grading,
    #[serde(default = "default_concentration")]
    pub concentration: f64,
    pub seed: u64,
}

/// Output text of a synthetic miss.
pub const SYNTHETIC_MISS: &str = "<incorrect>";

impl SyntheticProfile {
    pub fn validate(&self) -> Result<(), String> {
        if self.ability.values().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(format!("{}: abilities must lie in [0,1]", self.model_id));
        }
        if !(self.difficulty_sensitivity.is_finite() && self.difficulty_sensitivity >= 0.0) {
            return Err(format!("{}: difficulty_sensitivity must be finite and >= 0", self.model_id));
        }
        if !(self.concentration.is_finite() && self.concentration > 0.0) {
            return Err(format!("{}: concentration must be finite and > 0", self.model_id));
        }
        Ok(())
    }

    pub fn success_probability(&self, sample: &Sample) -> Result<f64, ResponderError> {
        let a = self
            .ability
            .get(sample.dimension())
            .ok_or_else(|| ResponderError::UnknownDimension(sample.dimension().to_string()))?;
        let d = sample.difficulty.unwrap_or(0.0);
        Ok((a - self.difficulty_sensitivity * d).clamp(0.0, 1.0))
    }
}

/// Deterministic response of a synthetic model: `(output, score)`.
///
/// The draw depends only on `(profile.seed, sample.id)`.
pub fn synthetic_respond(profile: &SyntheticProfile, sample: &Sample) -> Result<(String, f64), ResponderError> {
    let p = profile.success_probability(sample)?;
    let k = rng::key(profile.seed, &sample.id);
    match profile.grading {
        Grading::Binary => {
            if rng::unit_f64(k) < p {
                Ok((sample.gold.render(), 1.0))
            } else {
                Ok((SYNTHETIC_MISS.to_string(), 0.0))
            }
        }
        Grading::Graded => {
            let score = if p <= 0.0 {
                0.0
            } else if p >= 1.0 {
                1.0
            } else {
                let nu = profile.concentration;
                let beta = Beta::new(p * nu, (1.0 - p) * nu)
                    .map_err(|e| ResponderError::MalformedResponse(e.to_string()))?;
                beta.sample(&mut rng::stream(k)).clamp(0.0, 1.0)
            };
            let output = if score >= 0.5 {
                sample.gold.render()
            } else {
                SYNTHETIC_MISS.to_string()
            };
            Ok((output, score))
        }
    }
}

impl Responder for SyntheticProfile {
    fn respond(&self, sample: &Sample) -> Result<Response, ResponderError> {
        let (output, score) = synthetic_respond(self, sample)?;
        Ok(Response {
            output,
            latency_ms: 0.0,
            score_hint: Some(score),
        })
    }
}

/// Exact per-stratum means from scoring every sample once.
pub fn full_set_oracle<R, S>(responder: &R, population: &Population, scorer: &S) -> Vec<(String, f64)>
where
    R: Responder + ?Sized,
    S: Scorer + ?Sized,
{
    population
        .strata
        .iter()
        .zip(&population.members)
        .map(|(stratum, members)| {
            let total: f64 = members
                .iter()
                .map(|s| match responder.respond(s) {
                    Ok(r) => scorer.score(s, &r).score,
                    Err(_) => 0.0,
                })
                .sum();
            (stratum.id.clone(), total / members.len() as f64)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointRequest {
    pub model: String,
    pub messages: Vec<Message>,
    pub max_tokens: u32,
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TokenUsage {
    #[serde(default)]
    pub prompt_tokens: u64,
    #[serde(default)]
    pub completion_tokens: u64,
    #[serde(default)]
    pub total_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointResponse {
    pub content: String,
    pub usage: TokenUsage,
    pub end_to_end_latency_ms: f64,
}

/// Builds the message list for a sample. The default is a single user turn
/// with the prompt followed by the output constraints.
pub type PromptTemplate = fn(&Sample) -> Vec<Message>;

pub fn default_template(sample: &Sample) -> Vec<Message> {
    let mut content = sample.prompt.clone();
    if !sample.constraints.is_empty() {
        content.push_str("\n\n");
        content.push_str(&sample.constraints);
    }
    vec![Message {
        role: "user".into(),
        content,
    }]
}

/// Counting semaphore bounding in-flight requests.
#[derive(Debug)]
pub struct InflightLimiter {
    slots: Mutex<usize>,
    cv: Condvar,
}

impl InflightLimiter {
    pub fn new(max: usize) -> Self {
        Self {
            slots: Mutex::new(max.max(1)),
            cv: Condvar::new(),
        }
    }

    pub fn acquire(&self) -> InflightGuard<'_> {
        let mut slots = self.slots.lock().unwrap_or_else(|e| e.into_inner());
        while *slots == 0 {
            slots = self.cv.wait(slots).unwrap_or_else(|e| e.into_inner());
        }
        *slots -= 1;
        InflightGuard { limiter: self }
    }
}

pub struct InflightGuard<'a> {
    limiter: &'a InflightLimiter,
}

impl Drop for InflightGuard<'_> {
    fn drop(&mut self) {
        let mut slots = self.limiter.slots.lock().unwrap_or_else(|e| e.into_inner());
        *slots += 1;
        self.limiter.cv.notify_one();
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EndpointOptions {
    pub timeout_ms: u64,
    pub max_inflight: usize,
    pub max_tokens: u32,
}

impl Default for EndpointOptions {
    fn default() -> Self {
        Self {
            timeout_ms: 60_000,
            max_inflight: 4,
            max_tokens: 1024,
        }
    }
}

/// Blocking chat-completions client for one model.
pub struct EndpointClient {
    model: String,
    url: String,
    api_key: String,
    agent: ureq::Agent,
    limiter: InflightLimiter,
    options: EndpointOptions,
    template: PromptTemplate,
}

impl EndpointClient {
    /// Reads the API key from `RELE_API_KEY_<PROVIDER>`.
    pub fn new(descriptor: &ModelDescriptor, options: EndpointOptions) -> Result<Self, ResponderError> {
        let url = descriptor.endpoint.clone().ok_or(ResponderError::NoEndpoint)?;
        let var = descriptor.api_key_var();
        let api_key = std::env::var(&var).map_err(|_| ResponderError::MissingCredential(var))?;
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_millis(options.timeout_ms))
            .build();
        Ok(Self {
            model: descriptor.id.clone(),
            url,
            api_key,
            agent,
            limiter: InflightLimiter::new(options.max_inflight),
            options,
            template: default_template,
        })
    }

    pub fn with_template(mut self, template: PromptTemplate) -> Self {
        self.template = template;
        self
    }

    pub fn request_for(&self, sample: &Sample) -> EndpointRequest {
        EndpointRequest {
            model: self.model.clone(),
            messages: (self.template)(sample),
            max_tokens: self.options.max_tokens,
            temperature: 0.0,
        }
    }

    pub fn send(&self, sample: &Sample) -> Result<EndpointResponse, ResponderError> {
        let body = serde_json::to_value(self.request_for(sample))
            .map_err(|e| ResponderError::MalformedResponse(e.to_string()))?;
        let _slot = self.limiter.acquire();
        let start = Instant::now();
        let result = self
            .agent
            .post(&self.url)
            .set("Authorization", &format!("Bearer {}", self.api_key))
            .set("Content-Type", "application/json")
            .send_json(body);
        let resp = match result {
            Ok(r) => r,
            Err(ureq::Error::Status(code, _)) => return Err(ResponderError::HttpStatus(code)),
            Err(ureq::Error::Transport(t)) => {
                let timed_out = start.elapsed() >= Duration::from_millis(self.options.timeout_ms)
                    || t.to_string().to_ascii_lowercase().contains("timed out");
                return Err(if timed_out {
                    ResponderError::Timeout
                } else {
                    ResponderError::Transport(t.to_string())
                });
            }
        };
        let text = resp.into_string().map_err(|e| {
            if start.elapsed() >= Duration::from_millis(self.options.timeout_ms) {
                ResponderError::Timeout
            } else {
                ResponderError::MalformedResponse(e.to_string())
            }
        })?;
        let latency = start.elapsed().as_secs_f64() * 1000.0;
        parse_completion(&text, latency)
    }
}

/// Extracts `choices[0].message.content` and `usage` from a response body.
pub fn parse_completion(body: &str, latency_ms: f64) -> Result<EndpointResponse, ResponderError> {
    let v: serde_json::Value =
        serde_json::from_str(body).map_err(|e| ResponderError::MalformedResponse(e.to_string()))?;
    let content = v
        .pointer("/choices/0/message/content")
        .and_then(|c| c.as_str())
        .ok_or_else(|| ResponderError::MalformedResponse("missing choices[0].message.content".into()))?;
    let usage = match v.get("usage") {
        Some(u) => serde_json::from_value(u.clone()).unwrap_or_default(),
        None => TokenUsage::default(),
    };
    Ok(EndpointResponse {
        content: content.to_string(),
        usage,
        end_to_end_latency_ms: latency_ms,
    })
}

impl Responder for EndpointClient {
    fn respond(&self, sample: &Sample) -> Result<Response, ResponderError> {
        let r = self.send(sample)?;
        Ok(Response {
            output: r.content,
            latency_ms: r.end_to_end_latency_ms,
            score_hint: None,
        })
    }
}

/// One-shot request to a described endpoint.
pub fn endpoint_respond(descriptor: &ModelDescriptor, sample: &Sample, timeout_ms: u64) -> Result<EndpointResponse, ResponderError> {
    let client = EndpointClient::new(
        descriptor,
        EndpointOptions {
            timeout_ms,
            ..Default::default()
        },
    )?;
    client.send(sample)
}
