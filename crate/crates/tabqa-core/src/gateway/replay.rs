//! Trace persistence: append-only JSONL writing during recorded runs and
//! hash-keyed lookup for offline replay.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;

use super::{ChatBackend, ChatRequest, GatewayError, TraceRecord};

/// Serves recorded responses by request hash. Any request that was not
/// recorded is an error, never a silent fallback to the network.
pub struct FileReplayStore {
    records: HashMap<String, TraceRecord>,
}

impl FileReplayStore {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, GatewayError> {
        let file = File::open(path.as_ref())?;
        let reader = BufReader::new(file);
        let mut records = HashMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: TraceRecord = serde_json::from_str(&line).map_err(|e| {
                GatewayError::InvalidResponse(format!("trace line {}: {e}", i + 1))
            })?;
            // Later duplicates win so re-recorded traces can be appended.
            records.insert(record.request_hash.clone(), record);
        }
        Ok(FileReplayStore { records })
    }

    pub fn from_records(records: impl IntoIterator<Item = TraceRecord>) -> Self {
        FileReplayStore {
            records: records.into_iter().map(|r| (r.request_hash.clone(), r)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

impl ChatBackend for FileReplayStore {
    fn complete(&self, request: &ChatRequest) -> Result<Vec<String>, GatewayError> {
        let hash = request.request_hash();
        match self.records.get(&hash) {
            Some(record) => Ok(record.responses.clone()),
            None => Err(GatewayError::ReplayMiss {
                request_hash: hash,
                stage: request.stage.as_str().to_string(),
            }),
        }
    }

    fn is_offline(&self) -> bool {
        true
    }
}

/// Appends one JSON line per exchange. Shared across worker threads.
pub struct TraceWriter {
    out: Mutex<BufWriter<File>>,
}

impl TraceWriter {
    pub fn create(path: impl AsRef<Path>) -> Result<Self, GatewayError> {
        if let Some(parent) = path.as_ref().parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        let file = File::create(path.as_ref())?;
        Ok(TraceWriter { out: Mutex::new(BufWriter::new(file)) })
    }

    pub fn append(&self, record: &TraceRecord) -> Result<(), GatewayError> {
        let line = serde_json::to_string(record)
            .map_err(|e| GatewayError::InvalidResponse(e.to_string()))?;
        let mut out = self.out.lock().expect("trace writer lock");
        writeln!(out, "{line}")?;
        out.flush()?;
        Ok(())
    }
}

/// Wraps another backend and records every successful exchange.
pub struct RecordingBackend<B> {
    inner: B,
    writer: TraceWriter,
}

impl<B: ChatBackend> RecordingBackend<B> {
    pub fn new(inner: B, writer: TraceWriter) -> Self {
        RecordingBackend { inner, writer }
    }
}

impl<B: ChatBackend> ChatBackend for RecordingBackend<B> {
    fn complete(&self, request: &ChatRequest) -> Result<Vec<String>, GatewayError> {
        let responses = self.inner.complete(request)?;
        self.writer.append(&TraceRecord::from_exchange(request, responses.clone()))?;
        Ok(responses)
    }

    fn is_offline(&self) -> bool {
        self.inner.is_offline()
    }
}
