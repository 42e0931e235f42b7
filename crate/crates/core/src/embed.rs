//! Sentence embeddings, cosine similarity, and the semantic gate that decides
//! whether a cleaned candidate still means what the original meant.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::corpus::LangCode;
use crate::http::{HttpClient, HttpError};
use crate::sync::{fnv1a, Semaphore};

/// Appended to the request when a candidate falls below the gate threshold.
pub const RETRY_NOTICE: &str =
    "Please ensure that your response accurately reflects the meaning of the original input sentence.";
pub const DEFAULT_THRESHOLD: f64 = 0.7;
pub const DEFAULT_MAX_ITERS: u32 = 10;
pub const EMBED_KEY_ENV: &str = "NOISEFORGE_EMBED_KEY";

#[derive(Debug, thiserror::Error)]
pub enum EmbedError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("zero-norm embedding")]
    ZeroNorm,
    #[error("embedding contains a non-finite value")]
    NonFinite,
    #[error("empty embedding")]
    Empty,
    #[error("provider returned dimension {got}, session dimension is {expected}")]
    WrongDim { expected: usize, got: usize },
    #[error("provider returned {got} vectors for {expected} texts")]
    CountMismatch { expected: usize, got: usize },
    #[error("no scripted embedding for {0:?}")]
    Unscripted(String),
    #[error("empty text cannot be gated")]
    EmptyText,
    #[error(transparent)]
    Provider(#[from] HttpError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self, EmbedError> {
        if values.is_empty() {
            return Err(EmbedError::Empty);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EmbedError::NonFinite);
        }
        Ok(EmbeddingVector { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, alpha: f64) -> Result<Self, EmbedError> {
        EmbeddingVector::new(self.values.iter().map(|v| v * alpha).collect())
    }
}

/// Cosine of the angle between two embeddings.
pub fn cosine(e1: &EmbeddingVector, e2: &EmbeddingVector) -> Result<f64, EmbedError> {
    if e1.dim() != e2.dim() {
        return Err(EmbedError::DimMismatch(e1.dim(), e2.dim()));
    }
    let (n1, n2) = (e1.norm(), e2.norm());
    if n1 == 0.0 || n2 == 0.0 {
        return Err(EmbedError::ZeroNorm);
    }
    let dot: f64 = e1.values.iter().zip(&e2.values).map(|(a, b)| a * b).sum();
    Ok(dot / (n1 * n2))
}

/// A sentence-embedding provider.
pub trait Embedder: Send + Sync {
    /// Embeds `texts` in order; one vector per text.
    fn embed_batch(&self, texts: &[&str], lang: &LangCode) -> Result<Vec<EmbeddingVector>, EmbedError>;

    fn embed(&self, text: &str, lang: &LangCode) -> Result<EmbeddingVector, EmbedError> {
        let mut v = self.embed_batch(&[text], lang)?;
        v.pop().ok_or(EmbedError::CountMismatch { expected: 1, got: 0 })
    }
}

impl<E: Embedder + ?Sized> Embedder for Arc<E> {
    fn embed_batch(&self, texts: &[&str], lang: &LangCode) -> Result<Vec<EmbeddingVector>, EmbedError> {
        (**self).embed_batch(texts, lang)
    }
}

impl<E: Embedder + ?Sized> Embedder for &E {
    fn embed_batch(&self, texts: &[&str], lang: &LangCode) -> Result<Vec<EmbeddingVector>, EmbedError> {
        (**self).embed_batch(texts, lang)
    }
}

/// Client for `POST /embed` services.
#[derive(Debug)]
pub struct HttpEmbedder {
    client: HttpClient,
    dim: OnceLock<usize>,
    in_flight: Semaphore,
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
    lang: &'a str,
}

#[derive(Deserialize)]
struct EmbedResponse {
    dim: usize,
    vectors: Vec<Vec<f64>>,
}

impl HttpEmbedder {
    pub fn new(base_url: &str, timeout: Duration, token_env: &str, max_in_flight: usize) -> Self {
        HttpEmbedder {
            client: HttpClient::new(base_url, timeout).with_token_env(token_env),
            dim: OnceLock::new(),
            in_flight: Semaphore::new(max_in_flight),
        }
    }

    pub fn from_client(client: HttpClient, max_in_flight: usize) -> Self {
        HttpEmbedder {
            client,
            dim: OnceLock::new(),
            in_flight: Semaphore::new(max_in_flight),
        }
    }
}

impl Embedder for HttpEmbedder {
    fn embed_batch(&self, texts: &[&str], lang: &LangCode) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let resp: EmbedResponse = {
            let _permit = self.in_flight.acquire();
            self.client.post_json(
                "/embed",
                &EmbedRequest {
                    texts,
                    lang: lang.as_str(),
                },
            )?
        };
        if resp.vectors.len() != texts.len() {
            return Err(EmbedError::CountMismatch {
                expected: texts.len(),
                got: resp.vectors.len(),
            });
        }
        let expected = *self.dim.get_or_init(|| resp.dim);
        if resp.dim != expected {
            return Err(EmbedError::WrongDim { expected, got: resp.dim });
        }
        resp.vectors
            .into_iter()
            .map(|v| {
                if v.len() != expected {
                    return Err(EmbedError::WrongDim { expected, got: v.len() });
                }
                EmbeddingVector::new(v)
            })
            .collect()
    }
}

/// Deterministic offline embedder: hashed bag of lowercased words and
/// character trigrams. Texts that share words land close together, which is
/// enough to drive the gate in tests and dry runs.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dim: usize,
}

impl HashEmbedder {
    pub fn new(dim: usize) -> Self {
        HashEmbedder { dim: dim.max(1) }
    }
}

impl Default for HashEmbedder {
    fn default() -> Self {
        HashEmbedder::new(256)
    }
}

impl HashEmbedder {
    fn vector(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        let lower = text.to_lowercase();
        let mut bump = |feature: &str, weight: f64| {
            let h = fnv1a(feature.as_bytes());
            let sign = if h & 1 == 0 { 1.0 } else { -1.0 };
            v[((h >> 1) % self.dim as u64) as usize] += sign * weight;
        };
        for w in lower.split_whitespace() {
            bump(&format!("w:{w}"), 1.0);
        }
        let chars: Vec<char> = lower.chars().collect();
        for tri in chars.windows(3) {
            let s: String = tri.iter().collect();
            bump(&format!("c:{s}"), 0.5);
        }
        v
    }
}

impl Embedder for HashEmbedder {
    fn embed_batch(&self, texts: &[&str], _lang: &LangCode) -> Result<Vec<EmbeddingVector>, EmbedError> {
        texts.iter().map(|t| EmbeddingVector::new(self.vector(t))).collect()
    }
}

/// Test double returning pre-registered vectors per text.
#[derive(Debug, Default, Clone)]
pub struct ScriptedEmbedder {
    vectors: HashMap<String, Vec<f64>>,
}

impl ScriptedEmbedder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, text: impl Into<String>, vector: Vec<f64>) -> Self {
        self.vectors.insert(text.into(), vector);
        self
    }

    pub fn insert(&mut self, text: impl Into<String>, vector: Vec<f64>) {
        self.vectors.insert(text.into(), vector);
    }
}

impl Embedder for ScriptedEmbedder {
    fn embed_batch(&self, texts: &[&str], _lang: &LangCode) -> Result<Vec<EmbeddingVector>, EmbedError> {
        texts
            .iter()
            .map(|t| {
                let v = self
                    .vectors
                    .get(*t)
                    .ok_or_else(|| EmbedError::Unscripted(t.to_string()))?;
                EmbeddingVector::new(v.clone())
            })
            .collect()
    }
}

/// Memoizes embeddings by `(text, lang)`, so a retry loop embeds the
/// unchanged original once. Readers share the lock; inserts serialize.
pub struct CachedEmbedder<E> {
    inner: E,
    cache: RwLock<HashMap<(String, LangCode), EmbeddingVector>>,
}

impl<E: Embedder> CachedEmbedder<E> {
    pub fn new(inner: E) -> Self {
        CachedEmbedder {
            inner,
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn cached(&self) -> usize {
        self.cache.read().unwrap().len()
    }
}

impl<E: Embedder> Embedder for CachedEmbedder<E> {
    fn embed_batch(&self, texts: &[&str], lang: &LangCode) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let mut out: Vec<Option<EmbeddingVector>> = {
            let cache = self.cache.read().unwrap();
            texts
                .iter()
                .map(|t| cache.get(&(t.to_string(), lang.clone())).cloned())
                .collect()
        };
        let missing: Vec<&str> = texts
            .iter()
            .zip(&out)
            .filter(|(_, v)| v.is_none())
            .map(|(t, _)| *t)
            .collect();
        if !missing.is_empty() {
            let fresh = self.inner.embed_batch(&missing, lang)?;
            let mut cache = self.cache.write().unwrap();
            let mut fresh = fresh.into_iter();
            for (t, slot) in texts.iter().zip(out.iter_mut()) {
                if slot.is_none() {
                    let v = fresh.next().ok_or(EmbedError::CountMismatch {
                        expected: missing.len(),
                        got: 0,
                    })?;
                    cache.insert((t.to_string(), lang.clone()), v.clone());
                    *slot = Some(v);
                }
            }
        }
        Ok(out.into_iter().map(|v| v.expect("filled")).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GateConfig {
    pub threshold: f64,
    pub max_iters: u32,
    pub notice: String,
}

impl Default for GateConfig {
    fn default() -> Self {
        GateConfig {
            threshold: DEFAULT_THRESHOLD,
            max_iters: DEFAULT_MAX_ITERS,
            notice: RETRY_NOTICE.to_string(),
        }
    }
}

impl GateConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(format!("gate threshold {} outside (0, 1]", self.threshold));
        }
        if self.max_iters == 0 {
            return Err("max_iters must be positive".into());
        }
        if self.notice.trim().is_empty() {
            return Err("retry notice must not be empty".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LangText {
    pub text: String,
    pub lang: LangCode,
}

impl LangText {
    pub fn new(text: impl Into<String>, lang: LangCode) -> Self {
        LangText {
            text: text.into(),
            lang,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateDecision {
    pub similarity: f64,
    pub passed: bool,
    pub original: LangText,
    pub candidate: LangText,
}

/// Embeds both sides and passes iff `cosine >= cfg.threshold`.
pub fn gate(
    original: &LangText,
    candidate: &LangText,
    cfg: &GateConfig,
    embedder: &dyn Embedder,
) -> Result<GateDecision, EmbedError> {
    if original.text.trim().is_empty() || candidate.text.trim().is_empty() {
        return Err(EmbedError::EmptyText);
    }
    let e1 = embedder.embed(&original.text, &original.lang)?;
    let e2 = embedder.embed(&candidate.text, &candidate.lang)?;
    let similarity = cosine(&e1, &e2)?;
    Ok(GateDecision {
        similarity,
        passed: similarity >= cfg.threshold,
        original: original.clone(),
        candidate: candidate.clone(),
    })
}
