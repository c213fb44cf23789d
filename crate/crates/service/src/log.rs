//! Per-session event log: one JSON object per line, fsynced on append.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use groundwork_core::corpus::LabelEntry;
use groundwork_core::model::DialogAnnotation;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    /// Transcript without labels.
    Created { dialog: DialogAnnotation },
    Labels { utt_id: u32, labels: Vec<LabelEntry> },
    /// Replaces the labels of an already labeled utterance. Everything after
    /// it has been dropped from the log by the time this line is written.
    Revise { utt_id: u32, labels: Vec<LabelEntry> },
}

impl Event {
    pub fn utt_id(&self) -> Option<u32> {
        match self {
            Event::Created { .. } => None,
            Event::Labels { utt_id, .. } | Event::Revise { utt_id, .. } => Some(*utt_id),
        }
    }
}

fn encode(event: &Event) -> io::Result<Vec<u8>> {
    let mut line = serde_json::to_vec(event)?;
    line.push(b'\n');
    Ok(line)
}

pub fn append(path: &Path, event: &Event) -> io::Result<()> {
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    file.write_all(&encode(event)?)?;
    file.sync_data()
}

/// Replaces the whole log through a temporary file and a rename.
pub fn rewrite(path: &Path, events: &[Event]) -> io::Result<()> {
    let tmp = path.with_extension("log.tmp");
    {
        let mut file = File::create(&tmp)?;
        for e in events {
            file.write_all(&encode(e)?)?;
        }
        file.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    if let Some(dir) = path.parent() {
        // Persist the rename itself; not supported everywhere.
        if let Ok(d) = File::open(dir) {
            let _ = d.sync_all();
        }
    }
    Ok(())
}

#[derive(Debug)]
pub struct LoadedLog {
    pub events: Vec<Event>,
    /// A final line cut short by a crash. It was never acknowledged.
    pub torn_tail: bool,
}

pub fn read(path: &Path) -> io::Result<LoadedLog> {
    let reader = BufReader::new(File::open(path)?);
    let lines: Vec<String> = reader.lines().collect::<Result<_, _>>()?;
    let mut events = Vec::with_capacity(lines.len());
    let mut torn_tail = false;
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(e) => events.push(e),
            Err(_) if i + 1 == lines.len() => torn_tail = true,
            Err(e) => {
                return Err(io::Error::new(
                    io::ErrorKind::InvalidData,
                    format!("{} line {}: {e}", path.display(), i + 1),
                ))
            }
        }
    }
    Ok(LoadedLog { events, torn_tail })
}
