mod config;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use groundwork_core::analytics::{
    cohen_kappa, corpus_stats, paired_primary_acts, response_time_profile, CorpusStats,
};
use groundwork_core::corpus::{
    read_corpus, write_jsonl_to, write_timeline_jsonl_to, write_tsv_to, Format,
};
use groundwork_core::dataset::{
    instance_class_weights, read_instances_str, stratified_split, write_instances_to, Encoder,
    Markers, SplitRatios,
};
use groundwork_core::engine::{replay, validate_with, Feasibility, Severity, ValidateOptions};
use groundwork_core::model::DialogAnnotation;
use groundwork_service::{ServiceConfig, DEFAULT_PORT};

use crate::config::{pick, FileConfig};

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct UsageError(String);

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Parser)]
#[command(name = "groundwork", version, about = "Grounding-act annotation tools")]
struct Cli {
    /// TOML file with default settings; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct InputArgs {
    /// Annotated corpus files.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Input format; inferred from the extension when omitted.
    #[arg(long)]
    format: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Check annotation files against the CGU lifecycle rules.
    Validate {
        #[command(flatten)]
        input: InputArgs,
        /// Also flag acknowledgments faster than the corpus response-time profile.
        #[arg(long)]
        feasibility: bool,
        #[arg(long)]
        threshold_factor: Option<f64>,
        /// Print findings as JSON lines.
        #[arg(long)]
        json: bool,
    },
    /// Replay annotations and print the per-utterance CGU state.
    Replay {
        input: PathBuf,
        /// Input format; inferred from the extension when omitted.
        #[arg(long)]
        input_format: Option<String>,
        /// Output: timeline rows, or the corpus rewritten as JSONL or TSV.
        #[arg(long, value_enum, default_value_t = ReplayOutput::Timeline)]
        format: ReplayOutput,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Act histogram and CGU trajectory statistics.
    Stats {
        #[command(flatten)]
        input: InputArgs,
        /// Print only the named table.
        #[arg(long, value_enum)]
        table: Option<StatsTable>,
        #[arg(long)]
        json: bool,
    },
    /// Cohen's kappa between two annotations of the same dialogs.
    Kappa {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        format: Option<String>,
    },
    /// Build classifier instances from annotated corpora.
    Encode {
        #[command(flatten)]
        input: InputArgs,
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[arg(long)]
        max_history: Option<usize>,
        #[arg(long)]
        focal_marker: Option<String>,
        #[arg(long)]
        separator: Option<String>,
    },
    /// Stratified train/dev/test split of encoded instances.
    Split {
        /// Instances file written by `encode`.
        instances: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for train/dev/test files.
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Percentages, e.g. 70,15,15.
        #[arg(long, default_value = "70,15,15")]
        ratios: String,
    },
    /// Run the annotation service.
    Serve {
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        host: Option<String>,
        #[arg(long)]
        data_dir: Option<PathBuf>,
        #[arg(long)]
        static_dir: Option<PathBuf>,
        #[arg(long)]
        corpora_dir: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ReplayOutput {
    Timeline,
    Jsonl,
    Tsv,
}

#[derive(Clone, Copy, ValueEnum)]
enum StatsTable {
    Acts,
    Trajectory,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", render_error(&e));
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

/// The error chain joined by `: `, skipping causes already quoted by the
/// message above them.
fn render_error(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !out.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

fn init_logging() {
    let filter = tracing_subscriber::EnvFilter::try_from_env("GROUNDWORK_LOG")
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn"));
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(io::stderr)
        .init();
}

fn parse_format(flag: Option<String>, file: &FileConfig) -> anyhow::Result<Option<Format>> {
    flag.or_else(|| file.format.clone())
        .map(|f| f.parse::<Format>().map_err(usage))
        .transpose()
}

fn load(inputs: &[PathBuf], format: Option<Format>) -> anyhow::Result<Vec<DialogAnnotation>> {
    let mut dialogs = Vec::new();
    for path in inputs {
        let file = read_corpus(path, format)?;
        tracing::info!(path = %path.display(), dialogs = file.dialogs.len(), "loaded");
        dialogs.extend(file.dialogs);
    }
    Ok(dialogs)
}

/// Renders into memory, then writes to `path` or stdout. Nothing is written
/// if rendering fails.
fn emit(path: Option<&Path>, render: impl FnOnce(&mut Vec<u8>) -> anyhow::Result<()>) -> anyhow::Result<()> {
    let mut buf = Vec::new();
    render(&mut buf)?;
    match path {
        Some(p) => fs::write(p, buf).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(&buf)?;
            out.flush()?;
            Ok(())
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let file = FileConfig::load(cli.config.as_deref()).map_err(|e| usage(format!("{e:#}")))?;
    match cli.command {
        Command::Validate {
            input,
            feasibility,
            threshold_factor,
            json,
        } => {
            let format = parse_format(input.format, &file)?;
            let dialogs = load(&input.inputs, format)?;
            let factor = pick(threshold_factor, file.threshold_factor, 1.0);
            let mut options = ValidateOptions::default();
            if feasibility {
                match response_time_profile(&dialogs) {
                    Ok(profile) => {
                        options.feasibility = Some(Feasibility {
                            profile,
                            threshold_factor: factor,
                        })
                    }
                    Err(e) => eprintln!("note: feasibility check skipped: {e}"),
                }
            }
            let (mut errors, mut warnings) = (0usize, 0usize);
            let stdout = io::stdout();
            let mut out = stdout.lock();
            for d in &dialogs {
                for f in validate_with(d, &options) {
                    match f.severity {
                        Severity::Error => errors += 1,
                        Severity::Warning => warnings += 1,
                    }
                    if json {
                        writeln!(out, "{}", serde_json::to_string(&f)?)?;
                    } else {
                        writeln!(out, "{f}")?;
                    }
                }
            }
            writeln!(out, "{errors} errors, {warnings} warnings")?;
            Ok(if errors > 0 {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Replay {
            input,
            input_format,
            format,
            out,
        } => {
            let in_format = parse_format(input_format, &file)?;
            let dialogs = load(std::slice::from_ref(&input), in_format)?;
            let out = out.or(file.out.clone());
            emit(out.as_deref(), |w| {
                match format {
                    ReplayOutput::Timeline => {
                        let timelines = dialogs
                            .iter()
                            .map(|d| replay(d).map(|r| r.timeline))
                            .collect::<Result<Vec<_>, _>>()?;
                        write_timeline_jsonl_to(&timelines, w)?;
                    }
                    ReplayOutput::Jsonl => {
                        for d in &dialogs {
                            replay(d)?;
                        }
                        write_jsonl_to(&dialogs, w)?;
                    }
                    ReplayOutput::Tsv => write_tsv_to(&dialogs, w)?,
                }
                Ok(())
            })?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Stats { input, table, json } => {
            let format = parse_format(input.format, &file)?;
            let dialogs = load(&input.inputs, format)?;
            let stats = corpus_stats(&dialogs)?;
            emit(None, |w| {
                if json {
                    serde_json::to_writer_pretty(&mut *w, &stats)?;
                    writeln!(w)?;
                    return Ok(());
                }
                match table {
                    Some(StatsTable::Acts) => write_act_table(w, &stats)?,
                    Some(StatsTable::Trajectory) => write_trajectory(w, &stats)?,
                    None => {
                        writeln!(w, "dialogs\t{}", stats.dialogs)?;
                        writeln!(w, "utterances\t{}", stats.utterances)?;
                        writeln!(w)?;
                        write_act_table(w, &stats)?;
                        writeln!(w)?;
                        write_trajectory(w, &stats)?;
                        writeln!(w)?;
                        for note in &stats.notes {
                            writeln!(w, "note: {note}")?;
                        }
                    }
                }
                Ok(())
            })?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Kappa { a, b, format } => {
            let format = parse_format(format, &file)?;
            let da = load(std::slice::from_ref(&a), format)?;
            let db = load(std::slice::from_ref(&b), format)?;
            let (left, right) = paired_primary_acts(&da, &db)?;
            let k = cohen_kappa(&left, &right)?;
            println!("kappa\t{k:.6}");
            println!("items\t{}", left.len());
            Ok(ExitCode::SUCCESS)
        }
        Command::Encode {
            input,
            out,
            max_history,
            focal_marker,
            separator,
        } => {
            let format = parse_format(input.format, &file)?;
            let dialogs = load(&input.inputs, format)?;
            let defaults = Markers::default();
            let encoder = Encoder {
                markers: Markers {
                    focal: pick(focal_marker, file.focal_marker.clone(), defaults.focal),
                    separator: pick(separator, file.separator.clone(), defaults.separator),
                },
                max_history: max_history.or(file.max_history),
            };
            let instances = encoder.build_instances(&dialogs)?;
            let out = out.or(file.out.clone());
            emit(out.as_deref(), |w| Ok(write_instances_to(&instances, w)?))?;
            eprintln!("{} instances", instances.len());
            Ok(ExitCode::SUCCESS)
        }
        Command::Split {
            instances,
            seed,
            out,
            ratios,
        } => {
            let seed = pick(seed, file.seed, 0);
            let ratios = parse_ratios(&ratios)?;
            let out = out
                .or(file.out.clone())
                .ok_or_else(|| usage("split needs --out DIR"))?;
            let text = fs::read_to_string(&instances)
                .with_context(|| format!("reading {}", instances.display()))?;
            let items = read_instances_str(&text)?;
            let split = stratified_split(&items, ratios, seed)?;
            fs::create_dir_all(&out)?;
            for (name, part) in [("train", &split.train), ("dev", &split.dev), ("test", &split.test)] {
                let mut buf = Vec::new();
                write_instances_to(part, &mut buf)?;
                fs::write(out.join(format!("{name}.jsonl")), buf)?;
                println!("{name}\t{}", part.len());
            }
            if !split.train.is_empty() {
                let weights = instance_class_weights(&split.train)?;
                let named: serde_json::Map<String, serde_json::Value> = weights
                    .iter()
                    .map(|(act, w)| (act.canonical_name().to_string(), (*w).into()))
                    .collect();
                let mut text = serde_json::to_string_pretty(&named)?;
                text.push('\n');
                fs::write(out.join("class_weights.json"), text)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Serve {
            port,
            host,
            data_dir,
            static_dir,
            corpora_dir,
        } => {
            let port = pick(port, file.port, DEFAULT_PORT);
            let host = pick(host, file.host.clone(), "127.0.0.1".to_string());
            let config = ServiceConfig {
                data_dir: pick(data_dir, file.data_dir.clone(), PathBuf::from("groundwork-sessions")),
                static_dir: static_dir.or(file.static_dir.clone()),
                corpora_dir: corpora_dir.or(file.corpora_dir.clone()),
            };
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let app = groundwork_service::build(config).context("opening session store")?;
                let listener = tokio::net::TcpListener::bind((host.as_str(), port))
                    .await
                    .with_context(|| format!("binding {host}:{port}"))?;
                println!("listening on http://{}", listener.local_addr()?);
                io::stdout().flush()?;
                groundwork_service::serve_router(listener, app)
                    .await
                    .context("server stopped")
            })?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn parse_ratios(s: &str) -> anyhow::Result<SplitRatios> {
    let parts: Vec<u32> = s
        .split(',')
        .map(|p| p.trim().parse::<u32>())
        .collect::<Result<_, _>>()
        .map_err(|_| usage(format!("bad --ratios `{s}`")))?;
    match parts[..] {
        [train, dev, test] if train + dev + test == 100 => Ok(SplitRatios { train, dev, test }),
        _ => Err(usage(format!("--ratios must be three percentages summing to 100, got `{s}`"))),
    }
}

fn write_act_table(w: &mut dyn Write, stats: &CorpusStats) -> io::Result<()> {
    writeln!(w, "act\tcount\tpercent")?;
    for (act, count, pct) in stats.histogram.table_rows() {
        writeln!(w, "{}\t{count}\t{pct:.2}", act.table_name())?;
    }
    writeln!(w, "Total acts\t{}\t", stats.histogram.total_acts)
}

fn write_trajectory(w: &mut dyn Write, stats: &CorpusStats) -> io::Result<()> {
    let t = &stats.trajectory;
    writeln!(w, "grounded_in_next\t{}", t.grounded_in_next_count)?;
    writeln!(w, "max_span\t{}", t.max_span)?;
    let spans: Vec<String> = t.span_histogram.iter().map(|(s, n)| format!("{s}:{n}")).collect();
    writeln!(w, "span_histogram\t{}", spans.join(" "))?;
    writeln!(w, "revisits\t{}", t.revisit_count)?;
    writeln!(w, "revisits_over_10s\t{}", t.revisits_over_10s)?;
    match t.max_revisit_gap_seconds {
        Some(g) => writeln!(w, "max_revisit_gap_seconds\t{g}")?,
        None => writeln!(w, "max_revisit_gap_seconds\t-")?,
    }
    writeln!(w, "revisits_without_timestamps\t{}", t.revisits_without_timestamps)?;
    writeln!(w, "ambiguous\t{}", t.ambiguous_count)?;
    for (flag, n) in &t.flag_census {
        writeln!(w, "flag_{}\t{n}", flag.name())?;
    }
    Ok(())
}
