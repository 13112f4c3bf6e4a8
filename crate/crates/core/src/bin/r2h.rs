use std::collections::HashMap;
use std::io::Read;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use r2h::bench::{self, BenchConfig, Corpus, HelperSpec};
use r2h::dialog::{Protocol, Responder};
use r2h::helper::{EchoHelper, EmptyHelper, HelperModel, ModelHelper, OracleHelper};
use r2h::metrics::render_table;
use r2h::parse_step::{format_steps, parse_by_step, Backend, RemoteBackend, RemoteConfig};
use r2h::ui_gateway::{serve, Gateway};

#[derive(Parser)]
#[command(name = "r2h", version, about = "Benchmark harness for conversational navigation helpers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProtocolArg {
    Rdh,
    Rdi,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Rule,
    Remote,
}

#[derive(Subcommand)]
enum Command {
    /// Generate train and unseen worlds into `<out>/worlds`.
    GenWorlds {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Synthesize task splits for the worlds in `<out>/worlds` (generated when absent).
    GenTasks {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a helper and write its checkpoint.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "helper.ckpt.json")]
        out: PathBuf,
    },
    /// Run a benchmark suite.
    Bench {
        protocol: ProtocolArg,
        #[arg(long)]
        config: PathBuf,
    },
    /// Train and evaluate the cos_mask x parse_by_step grid.
    Ablate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Rewrite a response into numbered steps (reads stdin when no text is given).
    Parse {
        text: Option<String>,
        #[arg(long, value_enum, default_value = "rule")]
        backend: BackendArg,
        #[arg(long)]
        endpoint: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// Serve the human-performer session API and the web bundle.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        static_dir: Option<PathBuf>,
        #[arg(long, default_value = "sessions.jsonl")]
        results_log: PathBuf,
        /// Extra helpers as `name=checkpoint.json`.
        #[arg(long = "checkpoint")]
        checkpoints: Vec<String>,
    },
}

#[derive(Debug)]
struct CliError {
    code: &'static str,
    message: String,
}

impl<E: std::fmt::Display> From<(&'static str, E)> for CliError {
    fn from((code, e): (&'static str, E)) -> Self {
        Self { code, message: e.to_string() }
    }
}

impl From<bench::BenchError> for CliError {
    fn from(e: bench::BenchError) -> Self {
        let code = match e {
            bench::BenchError::Config(_) => "config",
            bench::BenchError::MissingCheckpoint(_) => "missing_checkpoint",
            bench::BenchError::Data(_) | bench::BenchError::Task(_) | bench::BenchError::World(_) => "dataset",
            _ => "runtime",
        };
        Self { code, message: e.to_string() }
    }
}

fn load_config(path: Option<&PathBuf>) -> Result<BenchConfig, CliError> {
    match path {
        Some(p) => Ok(BenchConfig::load(p)?),
        None => Ok(BenchConfig::default()),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenWorlds { config, out } => {
            let cfg = load_config(config.as_ref())?;
            let worlds = bench::generate_worlds(&cfg.data)?;
            bench::save_worlds(&out.join("worlds"), &worlds)?;
            println!("{}", json!({ "worlds": worlds.len(), "dir": out.join("worlds") }));
        }
        Command::GenTasks { config, out } => {
            let cfg = load_config(config.as_ref())?;
            let wdir = out.join("worlds");
            let worlds = if wdir.is_dir() { bench::load_worlds(&wdir)? } else { bench::generate_worlds(&cfg.data)? };
            let corpus = Corpus::with_tasks(worlds, &cfg.data)?;
            corpus.save(&out)?;
            let sizes: HashMap<&str, usize> = corpus.splits.iter().map(|(k, v)| (k.as_str(), v.len())).collect();
            println!("{}", json!({ "dir": out, "tasks": sizes }));
        }
        Command::Train { config, out } => {
            let cfg = load_config(Some(&config))?;
            let corpus = Corpus::load_or_synthesize(&cfg.data)?;
            let trained = bench::train(&cfg, &corpus, &cfg.train)?;
            trained.model.save(&out).map_err(|e| CliError::from(("checkpoint", e)))?;
            if let Some(dir) = &cfg.output_dir {
                std::fs::create_dir_all(dir).map_err(|e| CliError::from(("io", e)))?;
                let log = serde_json::to_string_pretty(&trained.log).expect("log serializes");
                std::fs::write(dir.join("train_log.json"), log).map_err(|e| CliError::from(("io", e)))?;
            }
            println!(
                "{}",
                json!({
                    "checkpoint": out,
                    "best_step": trained.best_step,
                    "best_seen_gp": trained.best_seen_gp,
                    "aborted": trained.aborted,
                })
            );
        }
        Command::Bench { protocol, config } => {
            let mut cfg = load_config(Some(&config))?;
            cfg.protocol = match protocol {
                ProtocolArg::Rdh => Protocol::Rdh,
                ProtocolArg::Rdi => Protocol::Rdi,
            };
            let out = bench::run_suite(&cfg)?;
            print!("{}", render_table(std::slice::from_ref(&out.report)));
        }
        Command::Ablate { config } => {
            let cfg = load_config(Some(&config))?;
            let report = bench::run_ablation(&cfg)?;
            let reports: Vec<_> = report.cells.iter().map(|c| c.report.clone()).collect();
            print!("{}", render_table(&reports));
        }
        Command::Parse { text, backend, endpoint, json: as_json } => {
            let text = match text {
                Some(t) => t,
                None => {
                    let mut s = String::new();
                    std::io::stdin().read_to_string(&mut s).map_err(|e| CliError::from(("io", e)))?;
                    s
                }
            };
            let backend = match backend {
                BackendArg::Rule => Backend::rule(),
                BackendArg::Remote => {
                    let mut rc = RemoteConfig::default();
                    if let Some(e) = endpoint {
                        rc.endpoint = e;
                    }
                    Backend::Remote(RemoteBackend::from_config(rc).map_err(|e| CliError::from(("config", e)))?)
                }
            };
            let steps = parse_by_step(&text, &backend).map_err(|e| CliError::from(("parse", e)))?;
            if as_json {
                println!("{}", serde_json::to_string(&steps).expect("steps serialize"));
            } else {
                println!("{}", format_steps(&steps));
            }
        }
        Command::Serve { port, host, config, static_dir, results_log, checkpoints } => {
            let cfg = load_config(config.as_ref())?;
            let corpus = Corpus::load_or_synthesize(&cfg.data)?;
            let mut helpers: HashMap<String, Arc<dyn Responder>> = HashMap::new();
            helpers.insert("oracle".into(), Arc::new(OracleHelper));
            helpers.insert("empty".into(), Arc::new(EmptyHelper));
            helpers.insert("echo".into(), Arc::new(EchoHelper));
            if let HelperSpec::Checkpoint { path } = &cfg.helper {
                checkpoints_insert(&mut helpers, "model", path)?;
            }
            for spec in &checkpoints {
                let (name, path) = spec
                    .split_once('=')
                    .ok_or_else(|| CliError::from(("config", format!("expected name=path, got {spec:?}"))))?;
                checkpoints_insert(&mut helpers, name, &PathBuf::from(path))?;
            }
            let tasks = corpus.splits.values().flatten().cloned();
            let gw = Arc::new(Gateway::new(corpus.world_map(), tasks, helpers, cfg.episode.clone(), Some(results_log)));
            let addr: SocketAddr = format!("{host}:{port}").parse().map_err(|e| CliError::from(("config", e)))?;
            let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::from(("io", e)))?;
            rt.block_on(serve(addr, gw, static_dir)).map_err(|e| CliError::from(("io", e)))?;
        }
    }
    Ok(())
}

fn checkpoints_insert(
    helpers: &mut HashMap<String, Arc<dyn Responder>>,
    name: &str,
    path: &PathBuf,
) -> Result<(), CliError> {
    let model = HelperModel::<f32>::load(path).map_err(|e| CliError::from(("missing_checkpoint", e)))?;
    helpers.insert(name.to_string(), Arc::new(ModelHelper::new(name, model)));
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({ "code": e.code, "message": e.message }));
            ExitCode::FAILURE
        }
    }
}
