//! Command line: `serve`, `replay`, `export`, `simulate`.
//!
//! Exit codes: 0 success, 1 failed simulation assertion, 2 unreadable or
//! invalid input, 3 live provider without credentials.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::api::{self, ServerConfig};
use crate::error::{Error, ProviderError, Result};
use crate::event::SessionEvent;
use crate::layout::BalloonSnapshot;
use crate::provider::{provider_for, ProviderMode, ProviderScript, RuleProvider};
use crate::segmenter::{parse_transcript, DEFAULT_WORDS_PER_SECOND};
use crate::session::{Session, SessionConfig};
use crate::sim::{self, SimOptions};

#[derive(Debug, Parser)]
#[command(name = "balloons", version, about = "Spoken ideas as a room of topic balloons")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Serve sessions over HTTP and WebSocket.
    Serve {
        /// Port on 127.0.0.1; overrides BIND_ADDR.
        #[arg(long)]
        port: Option<u16>,
        #[arg(long, env = "BIND_ADDR", default_value = api::DEFAULT_BIND_ADDR)]
        bind: String,
        #[arg(long, env = "PROVIDER_MODE", default_value = "rule")]
        provider: ProviderMode,
        /// Provider answers for `--provider scripted`.
        #[arg(long)]
        responses: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Default playback rate.
        #[arg(long)]
        speed: Option<f64>,
        /// Directory for saved sessions.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run a transcript file headlessly; writes events.json and layout.json.
    Replay {
        file: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "rule")]
        provider: ProviderMode,
        #[arg(long)]
        responses: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Speaking rate used to time untimed lines.
        #[arg(long, default_value_t = DEFAULT_WORDS_PER_SECOND)]
        words_per_second: f64,
    },
    /// Write the layout snapshot of a saved session.
    Export {
        session: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a simulation script and report.
    Simulate {
        #[arg(long)]
        script: PathBuf,
        #[arg(long)]
        provider: Option<ProviderMode>,
        #[arg(long)]
        responses: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        speed: Option<f64>,
        /// Also write the event log of each run here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// A failure with its process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        let code = match &err {
            Error::Provider(ProviderError::MissingCredentials(_)) => 3,
            Error::Io(_)
            | Error::Persistence { .. }
            | Error::Config(_)
            | Error::Bind { .. }
            | Error::InvalidInput(_) => 2,
            _ => 1,
        };
        Self {
            code,
            message: err.to_string(),
        }
    }
}

fn read(path: &Path) -> std::result::Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError {
        code: 2,
        message: format!("cannot read {}: {e}", path.display()),
    })
}

fn read_responses(path: Option<&Path>) -> std::result::Result<Option<ProviderScript>, CliError> {
    let Some(path) = path else { return Ok(None) };
    let text = read(path)?;
    serde_json::from_str(&text).map(Some).map_err(|e| CliError {
        code: 2,
        message: format!("invalid responses file {}: {e}", path.display()),
    })
}

/// Canonical JSON used for every output file.
pub fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("outputs serialize");
    s.push('\n');
    s
}

fn write(path: &Path, contents: &str) -> std::result::Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError {
        code: 2,
        message: format!("cannot write {}: {e}", path.display()),
    })
}

/// Runs a transcript through a live session with the transcript's own clock.
pub fn replay_transcript(
    content: &str,
    config: SessionConfig,
    provider: Box<dyn crate::provider::Provider>,
) -> Result<(Vec<SessionEvent>, Vec<BalloonSnapshot>)> {
    let segments = parse_transcript(content, config.words_per_second);
    let mut session = Session::new(config, provider)?;
    session.start_session()?;
    for seg in segments {
        session.advance_to(seg.t_start.max(session.now()))?;
        session.ingest_segment(seg)?;
    }
    Ok((session.events().to_vec(), session.scene().layout.snapshot()))
}

pub fn run(cli: Cli) -> std::result::Result<(), CliError> {
    match cli.command {
        Command::Serve {
            port,
            bind,
            provider,
            responses,
            seed,
            speed,
            out,
        } => {
            let mut cfg = ServerConfig {
                bind: port.map(|p| format!("127.0.0.1:{p}")).unwrap_or(bind),
                provider,
                script: read_responses(responses.as_deref())?,
                save_dir: out,
                ..ServerConfig::default()
            };
            cfg.session.room.rng_seed = seed;
            if let Some(speed) = speed {
                cfg.session.playback_rate = speed;
            }
            cfg.session.validate()?;
            // Fail before binding if the provider cannot be built.
            provider_for(cfg.provider, cfg.script.as_ref()).map_err(Error::from)?;
            let rt = tokio::runtime::Runtime::new().map_err(Error::from)?;
            rt.block_on(api::serve(cfg))?;
            Ok(())
        }
        Command::Replay {
            file,
            seed,
            provider,
            responses,
            out,
            words_per_second,
        } => {
            let content = read(&file)?;
            let script = read_responses(responses.as_deref())?;
            let provider = provider_for(provider, script.as_ref()).map_err(Error::from)?;
            let mut config = SessionConfig::with_seed(seed);
            config.words_per_second = words_per_second;
            let (events, layout) = replay_transcript(&content, config, provider)?;
            std::fs::create_dir_all(&out).map_err(Error::from)?;
            write(&out.join("events.json"), &to_json(&events))?;
            write(&out.join("layout.json"), &to_json(&layout))?;
            println!(
                "{} events, {} balloons -> {}",
                events.len(),
                layout.len(),
                out.display()
            );
            Ok(())
        }
        Command::Export { session, out } => {
            let text = read(&session)?;
            let loaded = Session::from_json(&text, Box::new(RuleProvider))?;
            let json = to_json(&loaded.scene().layout.snapshot());
            match out {
                Some(path) => write(&path, &json),
                None => {
                    print!("{json}");
                    Ok(())
                }
            }
        }
        Command::Simulate {
            script,
            provider,
            responses,
            seed,
            speed,
            out,
        } => {
            let parsed = sim::parse_script(&read(&script)?)?;
            let opts = SimOptions {
                provider,
                responses: read_responses(responses.as_deref())?,
                seed,
                speed,
            };
            let report = sim::run_script(&parsed, &opts)?;
            print!("{}", report.render());
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir).map_err(Error::from)?;
                for (i, log) in report.logs.iter().enumerate() {
                    write(&dir.join(format!("run{}.events.json", i + 1)), &to_json(log))?;
                }
            }
            match report.failure {
                None => Ok(()),
                Some(message) => Err(CliError { code: 1, message }),
            }
        }
    }
}

/// Parses `args` (including the program name) and runs.
pub fn main_from<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
