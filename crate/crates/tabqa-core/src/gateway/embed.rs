//! Text embeddings for row retrieval. The default embedder is a local
//! hashed bag-of-tokens model, so retrieval works with no network and is
//! fully deterministic; an HTTP embedder can replace it when available.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::token::tokenize;

pub const FALLBACK_DIM: usize = 256;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("embedding transport failure: {0}")]
    Transport(String),
    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid embedding response: {0}")]
    InvalidResponse(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Cosine similarity, zero when either vector has zero norm. Accumulates
/// in index order so the result is bit-reproducible.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> f64 {
    assert_eq!(a.dim(), b.dim(), "cosine over mismatched dimensions");
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for i in 0..a.values.len() {
        dot += a.values[i] * b.values[i];
        na += a.values[i] * a.values[i];
        nb += b.values[i] * b.values[i];
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na.sqrt() * nb.sqrt())
}

pub trait Embedder: Send + Sync {
    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError>;

    fn dim(&self) -> usize;
}

const FNV_PRIME: u64 = 0x100000001b3;
const FNV_OFFSET_BUCKET: u64 = 0xcbf29ce484222325;
// Different offset basis decorrelates the sign hash from the bucket hash.
const FNV_OFFSET_SIGN: u64 = 0x84222325cbf29ce4;

fn fnv1a(offset: u64, bytes: &[u8]) -> u64 {
    let mut hash = offset;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// Signed hashed bag-of-tokens embedding over lowercased rule tokens,
/// L2-normalized. Whitespace-only text embeds to the zero vector.
#[derive(Debug, Default, Clone, Copy)]
pub struct FallbackEmbedder;

impl Embedder for FallbackEmbedder {
    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        let mut values = vec![0.0f64; FALLBACK_DIM];
        let lowered = text.to_lowercase();
        for token in tokenize(&lowered) {
            let bytes = token.as_bytes();
            let bucket = (fnv1a(FNV_OFFSET_BUCKET, bytes) % FALLBACK_DIM as u64) as usize;
            let sign = if fnv1a(FNV_OFFSET_SIGN, bytes) & 1 == 0 { 1.0 } else { -1.0 };
            values[bucket] += sign;
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in &mut values {
                *v /= norm;
            }
        }
        Ok(EmbeddingVector { values })
    }

    fn dim(&self) -> usize {
        FALLBACK_DIM
    }
}

/// Remote embedding endpoint. Expects `{"input": text}` in and
/// `{"embedding": [..]}` out; the first response fixes the dimension.
pub struct HttpEmbedder {
    client: reqwest::blocking::Client,
    url: String,
    api_key: Option<String>,
    dim: usize,
}

pub const ENV_EMBED_URL: &str = "TABQA_EMBED_URL";

impl HttpEmbedder {
    pub fn new(url: String, api_key: Option<String>, dim: usize) -> Self {
        let client = reqwest::blocking::Client::builder()
            .connect_timeout(std::time::Duration::from_secs(10))
            .timeout(std::time::Duration::from_secs(60))
            .build()
            .expect("reqwest client");
        HttpEmbedder { client, url, api_key, dim }
    }
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    embedding: Vec<f64>,
}

impl Embedder for HttpEmbedder {
    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        let mut http = self.client.post(&self.url).json(&serde_json::json!({"input": text}));
        if let Some(key) = &self.api_key {
            http = http.bearer_auth(key);
        }
        let response = http.send().map_err(|e| EmbedError::Transport(e.to_string()))?;
        if !response.status().is_success() {
            return Err(EmbedError::Transport(format!("status {}", response.status())));
        }
        let parsed: EmbeddingResponse = response
            .json()
            .map_err(|e| EmbedError::InvalidResponse(e.to_string()))?;
        if parsed.embedding.len() != self.dim {
            return Err(EmbedError::DimensionMismatch {
                expected: self.dim,
                got: parsed.embedding.len(),
            });
        }
        Ok(EmbeddingVector { values: parsed.embedding })
    }

    fn dim(&self) -> usize {
        self.dim
    }
}
