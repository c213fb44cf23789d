//! Annotated corpus files.
//!
//! Two layouts are supported: the canonical JSONL schema (one utterance per
//! line with embedded labels) and a TSV layout mirroring the annotation table
//! with Open CGUs / CGUs Closed columns. The column layout and field names are
//! documented in `docs/format.md`.

mod jsonl;
mod timestamp;
mod tsv;

use std::collections::HashSet;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::engine::ReplayError;
use crate::model::DialogAnnotation;

pub use jsonl::{
    read_jsonl, read_jsonl_str, write_jsonl, write_jsonl_to, write_timeline_jsonl_to,
    LabelEntry, FORMAT_VERSION,
};
pub use timestamp::{format_timestamp, parse_timestamp, BadTimestamp};
pub use tsv::{read_tsv, read_tsv_str, write_tsv, write_tsv_to, TSV_COLUMNS};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("dialog `{dialog_id}`: {reason}")]
    InvariantViolation { dialog_id: String, reason: String },
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error("write failed: {0}")]
    Write(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Jsonl,
    Tsv,
}

impl Format {
    /// `.tsv` selects TSV; anything else is read as JSONL.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("tsv") => Format::Tsv,
            _ => Format::Jsonl,
        }
    }
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "json" => Ok(Format::Jsonl),
            "tsv" => Ok(Format::Tsv),
            other => Err(format!("unknown format `{other}` (expected jsonl or tsv)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusFile {
    pub dialogs: Vec<DialogAnnotation>,
    pub source_path: PathBuf,
    pub format: Format,
}

impl CorpusFile {
    pub fn utterance_count(&self) -> usize {
        self.dialogs.iter().map(|d| d.utterances.len()).sum()
    }
}

/// Reads a corpus, choosing the layout from `format` or the file extension.
pub fn read_corpus(path: &Path, format: Option<Format>) -> Result<CorpusFile, CorpusError> {
    match format.unwrap_or_else(|| Format::from_path(path)) {
        Format::Jsonl => read_jsonl(path),
        Format::Tsv => read_tsv(path),
    }
}

pub(crate) fn read_to_string(path: &Path) -> Result<String, CorpusError> {
    std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn check_dialogs(dialogs: &[DialogAnnotation]) -> Result<(), CorpusError> {
    let mut seen = HashSet::new();
    for d in dialogs {
        if !seen.insert(d.dialog_id.as_str()) {
            return Err(CorpusError::InvariantViolation {
                dialog_id: d.dialog_id.clone(),
                reason: "dialog id appears more than once in the file".into(),
            });
        }
        d.check().map_err(|e| CorpusError::InvariantViolation {
            dialog_id: d.dialog_id.clone(),
            reason: e.to_string(),
        })?;
    }
    Ok(())
}

pub(crate) fn create_file(path: &Path) -> Result<io::BufWriter<std::fs::File>, CorpusError> {
    std::fs::File::create(path)
        .map(io::BufWriter::new)
        .map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })
}
