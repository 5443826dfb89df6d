//! Decontamination and dataset splitting.
//!
//! Two contamination rules are applied to sample prompts: exact 13-token
//! window overlap with a reference corpus, and embedding similarity above a
//! fixed threshold.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Sample, SourceTier};
use crate::rng;

pub const NGRAM_SIZE: usize = 13;
/// Cosine similarity strictly above this flags a sample.
pub const SEMANTIC_THRESHOLD: f64 = 0.85;
/// Dimension of the hashed trigram test embedder.
pub const TRIGRAM_DIM: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatapipeError {
    #[error("corpus index has not been built")]
    IndexNotBuilt,
    #[error("embedder failed: {0}")]
    EmbedderFailure(String),
    #[error("requested {requested} private samples from a dataset of {available}")]
    SizeTooLarge { requested: usize, available: usize },
    #[error("corpus: {0}")]
    Corpus(String),
}

/// CJK ideographs, kana and hangul syllables; each is its own token.
pub fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x3040..=0x30FF
        | 0x3400..=0x4DBF
        | 0x4E00..=0x9FFF
        | 0xAC00..=0xD7AF
        | 0xF900..=0xFAFF
        | 0x20000..=0x2A6DF
        | 0x2A700..=0x2EBEF
        | 0x30000..=0x3134F)
}

/// Mixed-script tokenizer: one token per CJK character, one per run of
/// other letters/digits, everything else separates. Output is lowercased.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut run = String::new();
    for c in text.chars() {
        if is_cjk(c) {
            if !run.is_empty() {
                out.push(std::mem::take(&mut run));
            }
            out.push(c.to_string());
        } else if c.is_alphanumeric() {
            run.extend(c.to_lowercase());
        } else if !run.is_empty() {
            out.push(std::mem::take(&mut run));
        }
    }
    if !run.is_empty() {
        out.push(run);
    }
    out
}

fn window_hash(tokens: &[String]) -> u64 {
    let mut h = 0u64;
    for t in tokens {
        h = rng::mix64(h ^ rng::hash_str(t));
    }
    h
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContaminationReason {
    NgramOverlap,
    SemanticOverlap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Evidence {
    Window(String),
    Similarity(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContaminationFlag {
    pub sample_id: String,
    pub reason: ContaminationReason,
    pub evidence: Evidence,
    pub corpus_doc_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusDoc {
    pub doc_id: String,
    pub text: String,
}

/// Exact index of every `n`-token window in a corpus. Window hashes are
/// verified against the stored tokens on hit.
#[derive(Debug, Clone)]
pub struct NgramIndex {
    n: usize,
    doc_ids: Vec<String>,
    doc_tokens: Vec<Vec<String>>,
    windows: HashMap<u64, Vec<(u32, u32)>>,
}

impl NgramIndex {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            doc_ids: Vec::new(),
            doc_tokens: Vec::new(),
            windows: HashMap::new(),
        }
    }

    pub fn build(docs: &[CorpusDoc], n: usize) -> Self {
        let mut idx = Self::new(n);
        for d in docs {
            idx.add(d);
        }
        idx
    }

    pub fn add(&mut self, doc: &CorpusDoc) {
        let tokens = tokenize(&doc.text);
        let di = self.doc_ids.len() as u32;
        if tokens.len() >= self.n {
            for (start, w) in tokens.windows(self.n).enumerate() {
                self.windows.entry(window_hash(w)).or_default().push((di, start as u32));
            }
        }
        self.doc_ids.push(doc.doc_id.clone());
        self.doc_tokens.push(tokens);
    }

    pub fn is_empty(&self) -> bool {
        self.doc_ids.is_empty()
    }

    pub fn window_size(&self) -> usize {
        self.n
    }

    /// Document containing `window` verbatim, if any.
    pub fn lookup(&self, window: &[String]) -> Option<&str> {
        let hits = self.windows.get(&window_hash(window))?;
        hits.iter().find_map(|&(d, s)| {
            let toks = &self.doc_tokens[d as usize][s as usize..s as usize + self.n];
            (toks == window).then(|| self.doc_ids[d as usize].as_str())
        })
    }
}

/// One flag per window of the sample prompt found verbatim in the corpus.
/// Prompts shorter than the window size are never flagged.
pub fn ngram_flag(sample: &Sample, index: &NgramIndex) -> Result<Vec<ContaminationFlag>, DatapipeError> {
    if index.is_empty() {
        return Err(DatapipeError::IndexNotBuilt);
    }
    let tokens = tokenize(&sample.prompt);
    if tokens.len() < index.n {
        return Ok(Vec::new());
    }
    Ok(tokens
        .windows(index.n)
        .filter_map(|w| {
            index.lookup(w).map(|doc| ContaminationFlag {
                sample_id: sample.id.clone(),
                reason: ContaminationReason::NgramOverlap,
                evidence: Evidence::Window(w.join(" ")),
                corpus_doc_id: doc.to_string(),
            })
        })
        .collect())
}

/// Hashed character-trigram bag, L2-normalized. Deterministic test embedder.
pub fn trigram_embed(text: &str) -> Result<Vec<f32>, String> {
    let chars: Vec<char> = text.to_lowercase().chars().collect();
    let mut v = vec![0f32; TRIGRAM_DIM];
    if chars.len() < 3 {
        if !chars.is_empty() {
            let s: String = chars.iter().collect();
            v[(rng::hash_str(&s) % TRIGRAM_DIM as u64) as usize] += 1.0;
        }
    } else {
        for w in chars.windows(3) {
            let s: String = w.iter().collect();
            v[(rng::hash_str(&s) % TRIGRAM_DIM as u64) as usize] += 1.0;
        }
    }
    let norm = v.iter().map(|x| x * x).sum::<f32>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    Ok(v)
}

pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| f64::from(*x) * f64::from(*y)).sum();
    let na: f64 = a.iter().map(|x| f64::from(*x).powi(2)).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| f64::from(*x).powi(2)).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Precomputed corpus embeddings.
#[derive(Debug, Clone, Default)]
pub struct SemanticIndex {
    doc_ids: Vec<String>,
    vectors: Vec<Vec<f32>>,
}

impl SemanticIndex {
    pub fn build<E>(docs: &[CorpusDoc], embed: E) -> Result<Self, DatapipeError>
    where
        E: Fn(&str) -> Result<Vec<f32>, String>,
    {
        let mut idx = Self::default();
        for d in docs {
            idx.vectors.push(embed(&d.text).map_err(DatapipeError::EmbedderFailure)?);
            idx.doc_ids.push(d.doc_id.clone());
        }
        Ok(idx)
    }

    pub fn is_empty(&self) -> bool {
        self.doc_ids.is_empty()
    }

    /// Best match as (doc id, cosine); ties keep the earlier document.
    pub fn nearest(&self, v: &[f32]) -> Option<(&str, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, c) in self.vectors.iter().enumerate() {
            let s = cosine(v, c);
            if best.map_or(true, |(_, b)| s > b) {
                best = Some((i, s));
            }
        }
        best.map(|(i, s)| (self.doc_ids[i].as_str(), s))
    }
}

/// Flags the sample iff its nearest corpus document has cosine above `threshold`.
pub fn semantic_flag<E>(
    sample: &Sample,
    embed: E,
    index: &SemanticIndex,
    threshold: f64,
) -> Result<Option<ContaminationFlag>, DatapipeError>
where
    E: Fn(&str) -> Result<Vec<f32>, String>,
{
    if index.is_empty() {
        return Err(DatapipeError::IndexNotBuilt);
    }
    let v = embed(&sample.prompt).map_err(DatapipeError::EmbedderFailure)?;
    Ok(index.nearest(&v).and_then(|(doc, sim)| {
        (sim > threshold).then(|| ContaminationFlag {
            sample_id: sample.id.clone(),
            reason: ContaminationReason::SemanticOverlap,
            evidence: Evidence::Similarity(sim),
            corpus_doc_id: doc.to_string(),
        })
    }))
}

/// Seeded split into (public, private anchor set). Private samples are
/// re-tagged with the private tier; both halves keep dataset order.
pub fn split_private_anchor(dataset: &[Sample], size: usize, seed: u64) -> Result<(Vec<Sample>, Vec<Sample>), DatapipeError> {
    if size > dataset.len() {
        return Err(DatapipeError::SizeTooLarge {
            requested: size,
            available: dataset.len(),
        });
    }
    let mut idx: Vec<usize> = (0..dataset.len()).collect();
    idx.shuffle(&mut rng::stream(rng::key(seed, "private-anchor")));
    let chosen: HashSet<usize> = idx.into_iter().take(size).collect();
    let mut public = Vec::with_capacity(dataset.len() - size);
    let mut private = Vec::with_capacity(size);
    for (i, s) in dataset.iter().enumerate() {
        if chosen.contains(&i) {
            let mut p = s.clone();
            p.source_tier = SourceTier::Private;
            private.push(p);
        } else {
            public.push(s.clone());
        }
    }
    Ok((public, private))
}

/// Loads a corpus from a directory of `.txt` files (doc id = file stem) and
/// `.jsonl` files of `{doc_id, text}` objects, or from a single such file.
/// Files are visited in name order.
pub fn load_corpus(path: &Path) -> Result<Vec<CorpusDoc>, DatapipeError> {
    let err = |e: std::io::Error| DatapipeError::Corpus(format!("{}: {e}", path.display()));
    let mut files = Vec::new();
    if path.is_dir() {
        for entry in std::fs::read_dir(path).map_err(err)? {
            let p = entry.map_err(err)?.path();
            if p.is_file() {
                files.push(p);
            }
        }
        files.sort();
    } else {
        files.push(path.to_path_buf());
    }
    let mut docs = Vec::new();
    for f in files {
        let text = std::fs::read_to_string(&f).map_err(|e| DatapipeError::Corpus(format!("{}: {e}", f.display())))?;
        match f.extension().and_then(|e| e.to_str()) {
            Some("jsonl") => {
                for (i, line) in text.lines().enumerate() {
                    if line.trim().is_empty() {
                        continue;
                    }
                    let d: CorpusDoc = serde_json::from_str(line)
                        .map_err(|e| DatapipeError::Corpus(format!("{}:{}: {e}", f.display(), i + 1)))?;
                    docs.push(d);
                }
            }
            Some("txt") => docs.push(CorpusDoc {
                doc_id: f.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string(),
                text,
            }),
            _ => {}
        }
    }
    Ok(docs)
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DecontaminationOutcome {
    pub active: Vec<Sample>,
    /// One flag per discarded sample: the first n-gram hit, else the semantic hit.
    pub flags: Vec<ContaminationFlag>,
}

/// Runs both rules over a dataset and drops every flagged sample.
pub fn decontaminate<E>(
    dataset: &[Sample],
    ngrams: &NgramIndex,
    semantic: &SemanticIndex,
    embed: E,
) -> Result<DecontaminationOutcome, DatapipeError>
where
    E: Fn(&str) -> Result<Vec<f32>, String>,
{
    let mut out = DecontaminationOutcome::default();
    for s in dataset {
        let mut flag = if ngrams.is_empty() {
            None
        } else {
            ngram_flag(s, ngrams)?.into_iter().next()
        };
        if flag.is_none() && !semantic.is_empty() {
            flag = semantic_flag(s, &embed, semantic, SEMANTIC_THRESHOLD)?;
        }
        match flag {
            Some(f) => out.flags.push(f),
            None => out.active.push(s.clone()),
        }
    }
    Ok(out)
}
