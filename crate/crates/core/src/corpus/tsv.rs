//! Annotation-table layout: one row per utterance with the Open CGUs /
//! CGUs Closed / degree columns alongside the labels.
//!
//! Multi-label cells are `;`-separated and parallel (`acts` with `cgus`,
//! `closed_cgus` with `degree`). An act cell may carry options:
//! `Explicit-Ack(degree=Ambiguous)`, `Use(link=CGU 2)`.

use std::collections::{BTreeSet, HashMap};
use std::io::Write;
use std::path::Path;

use super::{
    check_dialogs, create_file, format_timestamp, parse_timestamp, read_to_string, CorpusError,
    CorpusFile, Format,
};
use crate::engine::replay;
use crate::model::{
    ActLabel, CguId, CorpusTag, Degree, DerivedColumns, DialogAnnotation, GroundingAct, Utterance,
    UtteranceFlag,
};

/// Columns written by [`write_tsv_to`], in order.
pub const TSV_COLUMNS: [&str; 12] = [
    "dialog_id",
    "utt_id",
    "corpus",
    "ts",
    "speaker",
    "text",
    "acts",
    "cgus",
    "open_cgus",
    "closed_cgus",
    "degree",
    "flags",
];

const REQUIRED: [&str; 4] = ["speaker", "text", "acts", "cgus"];

pub fn read_tsv(path: &Path) -> Result<CorpusFile, CorpusError> {
    let text = read_to_string(path)?;
    read_tsv_str(&text, path)
}

/// Reads the table layout. Columns are located by header name; only
/// `speaker`, `text`, `acts` and `cgus` are required. Without a `dialog_id`
/// column the whole file is one dialog named after the file stem; without
/// `utt_id` rows are numbered from 1.
pub fn read_tsv_str(text: &str, source_path: &Path) -> Result<CorpusFile, CorpusError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let Some((_, header)) = lines.next() else {
        return Err(CorpusError::Parse {
            line: 1,
            reason: "missing header row".into(),
        });
    };
    let columns: HashMap<&str, usize> = header
        .split('\t')
        .enumerate()
        .map(|(i, name)| (name.trim(), i))
        .collect();
    if let Some(missing) = REQUIRED.iter().find(|c| !columns.contains_key(*c)) {
        return Err(CorpusError::Parse {
            line: 1,
            reason: format!("header lacks required column `{missing}`"),
        });
    }
    let default_dialog = source_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("dialog")
        .to_string();

    let mut dialogs: Vec<DialogAnnotation> = Vec::new();
    for (idx, raw) in lines {
        let line_no = idx + 1;
        let err = |reason: String| CorpusError::Parse {
            line: line_no,
            reason,
        };
        let cells: Vec<String> = raw.split('\t').map(unescape).collect();
        let cell = |name: &str| -> Option<&str> {
            columns
                .get(name)
                .map(|&i| cells.get(i).map(String::as_str).unwrap_or(""))
        };

        let dialog_id = cell("dialog_id")
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .unwrap_or_else(|| default_dialog.clone());
        let corpus: CorpusTag = cell("corpus")
            .unwrap_or("")
            .parse()
            .map_err(|e: crate::model::ModelError| err(e.to_string()))?;
        if dialogs.last().map(|d| &d.dialog_id) != Some(&dialog_id) {
            dialogs.push(DialogAnnotation::new(dialog_id.clone(), corpus));
        }
        let dialog = dialogs.last_mut().expect("pushed above");
        if dialog.corpus != corpus {
            return Err(CorpusError::InvariantViolation {
                dialog_id,
                reason: format!("line {line_no} changes corpus tag within the dialog"),
            });
        }

        let utt_id = match cell("utt_id").filter(|s| !s.is_empty()) {
            Some(s) => s.parse().map_err(|_| err(format!("bad utt_id `{s}`")))?,
            None => dialog.utterances.len() as u32 + 1,
        };
        let timestamp = match cell("ts").map(str::trim).filter(|s| !s.is_empty()) {
            None => None,
            Some(s) if s.starts_with('[') => Some(parse_timestamp(s).map_err(|e| err(e.to_string()))?),
            Some(s) => Some(
                s.parse::<f64>()
                    .or_else(|_| parse_timestamp(s))
                    .map_err(|_| err(format!("bad timestamp `{s}`")))?,
            ),
        };
        let flags = split_list(cell("flags").unwrap_or(""), ',')
            .map(|f| f.parse::<UtteranceFlag>().map_err(|e| err(e.to_string())))
            .collect::<Result<BTreeSet<_>, _>>()?;

        let acts: Vec<&str> = split_list(cell("acts").unwrap_or(""), ';').collect();
        let cgus: Vec<&str> = cell("cgus").unwrap_or("").split(';').map(str::trim).collect();
        let cgus = if acts.is_empty() && cgus == [""] { Vec::new() } else { cgus };
        if acts.len() != cgus.len() {
            return Err(err(format!(
                "{} acts but {} CGU ids; the two columns must be parallel",
                acts.len(),
                cgus.len()
            )));
        }
        let labels = acts
            .iter()
            .zip(&cgus)
            .map(|(act, cgu)| parse_act_cell(act, cgu, utt_id).map_err(&err))
            .collect::<Result<Vec<_>, _>>()?;

        let id_list = |name: &str| {
            cell(name).map(|s| split_list(s, ';').map(CguId::from).collect::<Vec<_>>())
        };
        let degrees = cell("degree")
            .map(|s| {
                split_list(s, ';')
                    .map(|d| d.parse::<Degree>().map_err(|e| err(e.to_string())))
                    .collect::<Result<Vec<_>, _>>()
            })
            .transpose()?;
        let derived = DerivedColumns {
            utterance_id: utt_id,
            open_cgus: id_list("open_cgus"),
            closed_cgus: id_list("closed_cgus"),
            degrees,
        };
        if derived.open_cgus.is_some() || derived.closed_cgus.is_some() || derived.degrees.is_some() {
            dialog.derived.push(derived);
        }

        let utterance = Utterance {
            id: utt_id,
            speaker: cell("speaker").unwrap_or("").to_string(),
            timestamp,
            text: cell("text").unwrap_or("").to_string(),
            flags,
        };
        dialog.push(utterance, labels);
    }
    check_dialogs(&dialogs)?;
    Ok(CorpusFile {
        dialogs,
        source_path: source_path.to_path_buf(),
        format: Format::Tsv,
    })
}

fn split_list(cell: &str, sep: char) -> impl Iterator<Item = &str> {
    cell.split(sep).map(str::trim).filter(|s| !s.is_empty())
}

fn parse_act_cell(act_cell: &str, cgu: &str, utterance_id: u32) -> Result<ActLabel, String> {
    let (name, options) = match act_cell.split_once('(') {
        Some((name, rest)) => {
            let opts = rest
                .strip_suffix(')')
                .ok_or_else(|| format!("unterminated options in `{act_cell}`"))?;
            (name.trim(), Some(opts))
        }
        None => (act_cell.trim(), None),
    };
    let act: GroundingAct = name.parse().map_err(|e: crate::model::ModelError| e.to_string())?;
    let mut label = ActLabel {
        utterance_id,
        cgu: (!cgu.is_empty()).then(|| CguId::from(cgu)),
        act,
        degree_override: None,
        link: None,
    };
    for opt in options.into_iter().flat_map(|o| o.split(',')) {
        match opt.split_once('=').map(|(k, v)| (k.trim(), v.trim())) {
            Some(("degree", v)) => {
                label.degree_override = Some(v.parse().map_err(|e: crate::model::ModelError| e.to_string())?)
            }
            Some(("link", v)) => label.link = Some(CguId::from(v)),
            _ => return Err(format!("unknown act option `{opt}` in `{act_cell}`")),
        }
    }
    Ok(label)
}

fn act_cell(label: &ActLabel) -> String {
    let mut options = Vec::new();
    if let Some(d) = label.degree_override {
        options.push(format!("degree={d}"));
    }
    if let Some(link) = &label.link {
        options.push(format!("link={link}"));
    }
    if options.is_empty() {
        label.act.canonical_name().to_string()
    } else {
        format!("{}({})", label.act.canonical_name(), options.join(","))
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some(other) => out.push(other),
            None => out.push('\\'),
        }
    }
    out
}

fn format_ts(seconds: f64) -> String {
    if seconds.fract() == 0.0 {
        format_timestamp(seconds)
    } else {
        seconds.to_string()
    }
}

fn join<T: std::fmt::Display>(items: impl IntoIterator<Item = T>, sep: &str) -> String {
    items
        .into_iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join(sep)
}

/// Writes the table with derived columns computed by replay. Fails if any
/// dialog does not replay.
pub fn write_tsv(dialogs: &[DialogAnnotation], path: &Path) -> Result<(), CorpusError> {
    let mut out = create_file(path)?;
    write_tsv_to(dialogs, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn write_tsv_to<W: Write>(dialogs: &[DialogAnnotation], out: &mut W) -> Result<(), CorpusError> {
    writeln!(out, "{}", TSV_COLUMNS.join("\t"))?;
    for dialog in dialogs {
        let replayed = replay(dialog)?;
        for ((utt, labels), row) in dialog
            .utterances
            .iter()
            .zip(dialog.labels_by_utterance())
            .zip(&replayed.timeline.rows)
        {
            let cells = [
                escape(&dialog.dialog_id),
                utt.id.to_string(),
                dialog.corpus.name().to_string(),
                utt.timestamp.map(format_ts).unwrap_or_default(),
                escape(&utt.speaker),
                escape(&utt.text),
                join(labels.iter().map(act_cell), ";"),
                join(
                    labels.iter().map(|l| l.cgu.as_ref().map(|c| c.0.as_str()).unwrap_or("")),
                    ";",
                ),
                join(&row.open_after, ";"),
                join(row.closed_here.iter().map(|c| &c.cgu), ";"),
                join(row.closed_here.iter().map(|c| c.degree), ";"),
                join(utt.flags.iter().map(|f| f.symbol()), ","),
            ];
            writeln!(out, "{}", cells.join("\t"))?;
        }
    }
    Ok(())
}
