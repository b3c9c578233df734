use clap::{Parser, Subcommand};
use serde_json::json;
use std::io::Write;
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use vibroaffect::affect::{Backend, EstimateError};
use vibroaffect::config::ConfigError;
use vibroaffect::session::{write_summary_csv, SessionLog};
use vibroaffect::synth::{AudioDevice, DeviceError, StartSignal, WavError};
use vibroaffect::{summarize, Config, PhraseSet, Pipeline, PipelineError, SessionError, SpeakResponse};
use vibroaffect_service::{router, AppState};

#[derive(Parser)]
#[command(name = "vibroaffect", version, about = "Affect-driven vibrotactile stimuli for spoken text")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate, map and render one utterance.
    Speak {
        text: String,
        /// `lexicon` or `llm`.
        #[arg(long)]
        estimator: Option<Backend>,
        #[arg(long)]
        wav: Option<PathBuf>,
        /// Play through the configured audio device.
        #[arg(long)]
        play: bool,
    },
    /// Run the HTTP service.
    Serve {
        /// 0 picks a free port.
        #[arg(long)]
        port: Option<u16>,
        #[arg(long, default_value_t = IpAddr::V4(Ipv4Addr::LOCALHOST))]
        host: IpAddr,
        /// Static files for the experiment UI.
        #[arg(long)]
        ui_dir: Option<PathBuf>,
        /// Append session records to this JSONL file.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    #[command(subcommand)]
    Session(SessionCommand),
    /// Render every phrase of a phrase file and print the mapping.
    Demo {
        #[arg(long)]
        phrases: PathBuf,
        #[arg(long)]
        estimator: Option<Backend>,
        /// Write one WAV per phrase here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum SessionCommand {
    /// Serve a session for one participant.
    Run {
        /// Participant index; even indices start with the vibration block.
        #[arg(long)]
        participant: u32,
        #[arg(long)]
        phrases: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Defaults to `<participant id>.jsonl`.
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        port: Option<u16>,
        #[arg(long, default_value_t = IpAddr::V4(Ipv4Addr::LOCALHOST))]
        host: IpAddr,
        #[arg(long)]
        ui_dir: Option<PathBuf>,
    },
    /// Summarize a session log as JSON or long-format CSV.
    Summary {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        csv: bool,
    },
}

/// Exit status plus a JSON line for stderr.
struct Failure {
    code: u8,
    class: &'static str,
    message: String,
}

impl Failure {
    fn new(code: u8, class: &'static str, message: impl ToString) -> Self {
        Failure {
            code,
            class,
            message: message.to_string(),
        }
    }

    fn input(message: impl ToString) -> Self {
        Self::new(2, "input", message)
    }

    fn other(message: impl ToString) -> Self {
        Self::new(1, "error", message)
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::new(3, "config", e)
    }
}

impl From<EstimateError> for Failure {
    fn from(e: EstimateError) -> Self {
        match e {
            EstimateError::Input(_) => Failure::input(e),
            EstimateError::Config(_) => Failure::new(3, "config", e),
            EstimateError::Exhausted { .. } => Failure::new(4, "estimator", e),
        }
    }
}

impl From<DeviceError> for Failure {
    fn from(e: DeviceError) -> Self {
        Failure::new(5, "device", e)
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Input(m) => Failure::input(m),
            PipelineError::Estimate(e) => e.into(),
            PipelineError::Device(e) => e.into(),
            other => Failure::other(other),
        }
    }
}

impl From<SessionError> for Failure {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::Config(_) => Failure::new(3, "config", e),
            SessionError::Validation(_) => Failure::input(e),
            _ => Failure::other(e),
        }
    }
}

impl From<WavError> for Failure {
    fn from(e: WavError) -> Self {
        Failure::other(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::other(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.render().to_string();
            return report(Failure::new(2, "usage", message.trim_end()));
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => report(f),
    }
}

fn report(f: Failure) -> ExitCode {
    eprintln!("{}", json!({"error": f.class, "message": f.message}));
    ExitCode::from(f.code)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    match cli.command {
        Command::Speak {
            text,
            estimator,
            wav,
            play,
        } => speak(&config, &text, estimator, wav.as_deref(), play),
        Command::Serve {
            port,
            host,
            ui_dir,
            log,
        } => {
            let mut builder = AppState::from_config(config.clone())?;
            if let Some(log) = log {
                builder = builder.log(open_log(&log)?);
            }
            serve(builder.build(), SocketAddr::new(host, port.unwrap_or(config.server.port)), ui_dir, None)
        }
        Command::Session(SessionCommand::Run {
            participant,
            phrases,
            seed,
            log,
            port,
            host,
            ui_dir,
        }) => {
            let phrases = PhraseSet::from_file(&phrases)?;
            let log = log.unwrap_or_else(|| PathBuf::from(format!("{}.jsonl", vibroaffect::session::participant_id(participant))));
            let state = AppState::from_config(config.clone())?
                .phrases(phrases)
                .log(open_log(&log)?)
                .build();
            let id = state.create_session(participant, seed)?;
            serve(state, SocketAddr::new(host, port.unwrap_or(config.server.port)), ui_dir, Some(&id))
        }
        Command::Session(SessionCommand::Summary { log, csv }) => {
            let contents = SessionLog::replay(&log).map_err(Failure::input)?;
            let report = summarize(&contents.trials, &contents.ios);
            let stdout = std::io::stdout();
            if csv {
                write_summary_csv(&report, stdout.lock()).map_err(Failure::other)?;
            } else {
                serde_json::to_writer_pretty(stdout.lock(), &report).map_err(Failure::other)?;
                println!();
            }
            Ok(())
        }
        Command::Demo {
            phrases,
            estimator,
            out_dir,
        } => demo(&config, &phrases, estimator, out_dir.as_deref()),
    }
}

fn open_log(path: &Path) -> Result<Arc<SessionLog>, Failure> {
    SessionLog::open(path).map(Arc::new).map_err(Failure::other)
}

fn pipeline(config: &Config, backend: Option<Backend>) -> Result<Pipeline, Failure> {
    Ok(Pipeline::new(Arc::new(config.estimator(backend)?))
        .with_sample_rate(config.audio.sample_rate)
        .with_envelope(config.audio.envelope))
}

fn speak(config: &Config, text: &str, backend: Option<Backend>, wav: Option<&Path>, play: bool) -> Result<(), Failure> {
    if text.trim().is_empty() {
        return Err(Failure::input("text is empty"));
    }
    let mut pipeline = pipeline(config, backend)?;
    if play {
        pipeline = pipeline.with_device(Arc::new(AudioDevice::from_name(&config.audio.device)?));
    }
    let rendered = pipeline.render(text)?;
    let mut out = serde_json::to_value(SpeakResponse::new(&rendered, false, None)).map_err(Failure::other)?;
    if let Some(path) = wav {
        vibroaffect::write_wav(&rendered.buffer, path)?;
        out["wav_path"] = path.display().to_string().into();
    }
    if play {
        let signal = StartSignal::new();
        let handle = pipeline.enqueue(&rendered, signal.clone())?;
        signal.fire();
        let report = handle.wait()?;
        out["playback"] = serde_json::to_value(report).map_err(Failure::other)?;
    }
    println!("{out}");
    Ok(())
}

fn demo(config: &Config, phrases: &Path, backend: Option<Backend>, out_dir: Option<&Path>) -> Result<(), Failure> {
    let phrases = PhraseSet::from_file(phrases)?;
    let pipeline = pipeline(config, backend)?;
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
    }
    let mut stdout = std::io::stdout().lock();
    for phrase in phrases.phrases() {
        let rendered = pipeline.render(&phrase.text)?;
        let mut line = json!({
            "id": phrase.id,
            "text": phrase.text,
            "affect": rendered.affect,
            "params": rendered.params,
        });
        if let Some(dir) = out_dir {
            let path = dir.join(format!("phrase-{:02}.wav", phrase.id));
            vibroaffect::write_wav(&rendered.buffer, &path)?;
            line["wav_path"] = path.display().to_string().into();
        }
        writeln!(stdout, "{line}")?;
    }
    Ok(())
}

fn serve(state: AppState, addr: SocketAddr, ui_dir: Option<PathBuf>, session: Option<&str>) -> Result<(), Failure> {
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        let bound = listener.local_addr()?;
        println!("listening on http://{bound}");
        if let Some(id) = session {
            println!("session {id}: http://{bound}/?session={id}");
        }
        std::io::stdout().flush()?;
        axum::serve(listener, router(state, ui_dir))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}
