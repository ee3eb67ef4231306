//! Command-line front end.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};

use taskguide_core::engine::log::{log_header, parse_log, replay_log, ReplayMode};
use taskguide_core::subtitle::parse_subtitle_with;
use taskguide_core::trace::{parse_trace, replay_trace};
use taskguide_core::{parse_guide_json, parse_transcript_json, SegmentationRules, SubtitleFormat, Transcript, TwinConfig};

use crate::config::{ServiceConfig, ENV_DATA_DIR};
use crate::runtime::{Providers, Service, TranscriptUpload};
use crate::store::Store;

#[derive(Debug, Parser)]
#[command(name = "taskguide", version, about = "Transcript-grounded task guidance")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    Json,
    Srt,
    Vtt,
}

impl InputFormat {
    fn detect(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("srt") => Self::Srt,
            Some("vtt") => Self::Vtt,
            _ => Self::Json,
        }
    }

    fn upload(self, task_id: &str, language_tag: &str) -> TranscriptUpload {
        let format = match self {
            Self::Json => return TranscriptUpload::Json,
            Self::Srt => SubtitleFormat::Srt,
            Self::Vtt => SubtitleFormat::Vtt,
        };
        TranscriptUpload::Subtitle {
            format,
            task_id: task_id.into(),
            language_tag: language_tag.into(),
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a transcript (JSON, SRT or VTT) and store it.
    Ingest {
        file: PathBuf,
        #[arg(long, value_enum)]
        format: Option<InputFormat>,
        #[arg(long, default_value = "subtitle")]
        task_id: String,
        #[arg(long, default_value = "und")]
        language: String,
        #[arg(long, env = ENV_DATA_DIR, default_value = "data")]
        data_dir: PathBuf,
    },
    /// Compile a stored transcript into a step guide and store it.
    Guide {
        transcript_id: String,
        /// JSON segmentation rules; the default marker phrases otherwise.
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long, env = ENV_DATA_DIR, default_value = "data")]
        data_dir: PathBuf,
    },
    /// Check a transcript or guide file without storing it.
    Validate {
        file: PathBuf,
        #[arg(long, value_enum)]
        format: Option<InputFormat>,
        /// Treat the file as a step guide and check it against this transcript.
        #[arg(long)]
        against: Option<PathBuf>,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Re-run a session log and report turns whose output differs.
    Replay {
        log: PathBuf,
        /// Defaults to the directory two levels above the log.
        #[arg(long)]
        data_dir: Option<PathBuf>,
        /// Feed the recorded provider replies back in instead of using the
        /// scripted responder throughout.
        #[arg(long)]
        recorded: bool,
    },
    /// Replay a twin action trace and print the final state and phase.
    TwinSim {
        trace: PathBuf,
        /// TOML twin configuration.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Failed(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn fail(e: impl std::fmt::Display) -> CliError {
    CliError::Failed(e.to_string())
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn offline_service(data_dir: &Path) -> Result<Arc<Service>, CliError> {
    let config = ServiceConfig {
        data_dir: data_dir.to_path_buf(),
        ..ServiceConfig::default()
    };
    let providers = Providers::from_config(&config);
    Service::open(config, providers).map_err(fail)
}

fn parse_any(bytes: &[u8], format: InputFormat, task_id: &str, language: &str) -> Result<Transcript, CliError> {
    match format.upload(task_id, language) {
        TranscriptUpload::Json => parse_transcript_json(bytes).map_err(fail),
        TranscriptUpload::Subtitle {
            format,
            task_id,
            language_tag,
        } => parse_subtitle_with(bytes, format, &task_id, &language_tag).map_err(fail),
    }
}

/// Runs every command except `serve`. Returns the process exit code.
pub fn run(command: Command, out: &mut dyn Write) -> Result<i32, CliError> {
    let w = |out: &mut dyn Write, s: String| writeln!(out, "{s}").map_err(fail);
    match command {
        Command::Ingest {
            file,
            format,
            task_id,
            language,
            data_dir,
        } => {
            let format = format.unwrap_or_else(|| InputFormat::detect(&file));
            let service = offline_service(&data_dir)?;
            let (meta, t) = service
                .ingest_transcript(&read(&file)?, format.upload(&task_id, &language))
                .map_err(fail)?;
            w(out, format!("{}\t{} segments\t{} ms", meta.id, t.segments().len(), t.duration_ms()))?;
            Ok(0)
        }
        Command::Guide {
            transcript_id,
            rules,
            data_dir,
        } => {
            let rules = match rules {
                Some(p) => serde_json::from_slice(&read(&p)?).map_err(fail)?,
                None => SegmentationRules::default(),
            };
            let service = offline_service(&data_dir)?;
            let (meta, g) = service.compile_guide(&transcript_id, &rules).map_err(fail)?;
            w(out, meta.id.clone())?;
            for s in g.steps() {
                w(
                    out,
                    format!(
                        "  {} {:<14} {:>6}-{:<6} {}",
                        s.index + 1,
                        s.title,
                        s.window.start_ms,
                        s.window.end_ms,
                        s.segment_ids.join(",")
                    ),
                )?;
            }
            Ok(0)
        }
        Command::Validate { file, format, against } => {
            let bytes = read(&file)?;
            if let Some(t) = against {
                let t = parse_any(&read(&t)?, InputFormat::detect(&t), "subtitle", "und")?;
                let result = parse_guide_json(&bytes).and_then(|g| g.check_against(&t).map(|_| g));
                return match result {
                    Ok(g) => {
                        w(out, format!("ok: guide with {} steps", g.len()))?;
                        Ok(0)
                    }
                    Err(e) => {
                        w(out, format!("invalid: {e}"))?;
                        Ok(1)
                    }
                };
            }
            let format = format.unwrap_or_else(|| InputFormat::detect(&file));
            match parse_any(&bytes, format, "subtitle", "und") {
                Ok(t) => {
                    w(
                        out,
                        format!("ok: {} segments, {} ms", t.segments().len(), t.duration_ms()),
                    )?;
                    Ok(0)
                }
                Err(e) => {
                    w(out, format!("invalid: {e}"))?;
                    Ok(1)
                }
            }
        }
        Command::Replay {
            log,
            data_dir,
            recorded,
        } => {
            let data_dir = data_dir
                .or_else(|| log.parent()?.parent().map(Path::to_path_buf))
                .unwrap_or_else(|| PathBuf::from("."));
            let store = Store::open(&data_dir).map_err(fail)?;
            let text = String::from_utf8(read(&log)?).map_err(fail)?;
            let events = parse_log(&text).map_err(fail)?;
            let (_, transcript_id, guide_id) =
                log_header(&events).ok_or_else(|| fail("log does not start with a created event"))?;
            let t = store.transcript(transcript_id).map_err(fail)?;
            let (_, g) = store.guide(guide_id).map_err(fail)?;
            let mode = if recorded { ReplayMode::Recorded } else { ReplayMode::Scripted };
            let r = replay_log(&events, Arc::new(t), Arc::new(g), mode).map_err(fail)?;
            for d in &r.divergences {
                w(out, format!("seq {}:", d.seq))?;
                w(out, format!("  recorded: {}", serde_json::to_string(&d.recorded).map_err(fail)?))?;
                w(out, format!("  replayed: {}", serde_json::to_string(&d.replayed).map_err(fail)?))?;
            }
            let snap = r.session.snapshot();
            w(
                out,
                format!(
                    "{} events, {} differing turns; step {}/{} ({:?})",
                    events.len(),
                    r.divergences.len(),
                    snap.current_step,
                    snap.step_count,
                    snap.stage
                ),
            )?;
            Ok(if r.divergences.is_empty() { 0 } else { 1 })
        }
        Command::TwinSim { trace, config } => {
            let config: TwinConfig = match config {
                Some(p) => toml::from_str(&String::from_utf8(read(&p)?).map_err(fail)?).map_err(fail)?,
                None => TwinConfig::default(),
            };
            let text = String::from_utf8(read(&trace)?).map_err(fail)?;
            let entries = parse_trace(&text).map_err(fail)?;
            let report = replay_trace(config, &entries).map_err(fail)?;
            for step in report.steps.iter().filter(|s| s.rejection.is_some()) {
                w(
                    out,
                    format!("rejected at {} ms: {} ({:?})", step.at_ms, step.action.name(), step.rejection.unwrap()),
                )?;
            }
            w(out, serde_json::to_string_pretty(&report.final_state).map_err(fail)?)?;
            w(out, format!("phase: {}", report.phase.title()))?;
            Ok(0)
        }
        Command::Serve { .. } => Err(fail("serve runs through `serve`, not `run`")),
    }
}

/// Binds the configured address and serves until ctrl-c.
pub async fn serve(config_path: &Path) -> Result<(), CliError> {
    let config = ServiceConfig::load(config_path).map_err(fail)?;
    let providers = Providers::from_config(&config);
    let bind = config.bind.clone();
    let service = Service::open(config, providers).map_err(fail)?;
    tracing::info!(sessions = service.session_ids().len(), "restored sessions");
    let listener = tokio::net::TcpListener::bind(&bind).await.map_err(|source| CliError::Io {
        path: PathBuf::from(&bind),
        source,
    })?;
    tracing::info!(addr = %bind, "listening");
    axum::serve(listener, crate::api::router(service))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(fail)
}
