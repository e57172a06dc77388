//! Gateway and embedder construction for the configured backend.

use anyhow::anyhow;
use tabqa_core::gateway::embed::{Embedder, FallbackEmbedder, HttpEmbedder, ENV_EMBED_URL};
use tabqa_core::gateway::live::{LiveBackend, ENV_KEY};
use tabqa_core::gateway::replay::{FileReplayStore, RecordingBackend, TraceWriter};
use tabqa_core::Gateway;

use crate::config::{BackendKind, RunConfig};
use crate::error::CliError;

pub const ENV_EMBED_DIM: &str = "TABQA_EMBED_DIM";
const DEFAULT_EMBED_DIM: usize = 384;

/// The replay arm never constructs an HTTP client, so replay commands
/// cannot open sockets by construction.
pub fn build_gateway(config: &RunConfig) -> Result<Gateway, CliError> {
    match config.backend {
        BackendKind::Replay => {
            let path = config.trace_path.as_deref().expect("validated: replay carries a trace");
            let store = FileReplayStore::load(path).map_err(|e| {
                CliError::backend(anyhow!("cannot load trace {}: {e}", path.display()))
            })?;
            Ok(Gateway::new(Box::new(store)))
        }
        BackendKind::Live => {
            let inner =
                LiveBackend::from_env(config.parallelism).map_err(CliError::backend)?;
            Ok(match &config.trace_path {
                Some(path) => {
                    let writer = TraceWriter::create(path).map_err(|e| {
                        CliError::usage(anyhow!("cannot create trace {}: {e}", path.display()))
                    })?;
                    Gateway::new(Box::new(RecordingBackend::new(inner, writer)))
                }
                None => Gateway::new(Box::new(inner)),
            })
        }
    }
}

/// Hash-based fallback embeddings unless a live run points at an endpoint.
pub fn build_embedder(config: &RunConfig) -> Box<dyn Embedder> {
    if config.backend == BackendKind::Live {
        if let Ok(url) = std::env::var(ENV_EMBED_URL) {
            let dim = std::env::var(ENV_EMBED_DIM)
                .ok()
                .and_then(|v| v.parse().ok())
                .unwrap_or(DEFAULT_EMBED_DIM);
            return Box::new(HttpEmbedder::new(url, std::env::var(ENV_KEY).ok(), dim));
        }
    }
    Box::new(FallbackEmbedder)
}
