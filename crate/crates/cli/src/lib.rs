//! The `idp` command: batch processing, evaluation, corpus generation and the
//! HTTP service.
//!
//! Exit codes: 0 success, 1 processing failures present, 2 configuration,
//! manifest or input errors.

pub mod remote;

use std::ffi::OsString;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use clap::{Parser, Subcommand};

use idp_core::batch::{
    builtin_extractor, evaluate, generate_corpus, process, write_corpus, CorpusSpec, LoadedConfig,
    ProcessOptions, BUILTIN_BACKENDS,
};
use idp_core::extraction::{ExtractorBackend, Modality};
use idp_core::model::load_class_config;
use idp_core::orchestrator::{Components, Engine, JobStore, ThreadSleeper};
use idp_core::segmentation::KeywordClassifier;
use idp_core::{Error, Result};
use idp_service::{AppState, Tokens};

use remote::RemoteExtractor;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURES: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "idp", version, about = "Document packet processing pipeline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Process every packet of a manifest and write results and a run report.
    Process {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// ocr, image or ocr+image; defaults to the configured modality.
        #[arg(long)]
        modality: Option<String>,
        /// mock, always_prose, failing or remote.
        #[arg(long, default_value = "mock")]
        backend: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score stored results against ground-truth baselines.
    Evaluate {
        /// Run directory (or its results directory) written by `process`.
        #[arg(long)]
        results: PathBuf,
        /// Manifest whose rows name the ground-truth files.
        #[arg(long)]
        baselines: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Class configuration; defaults to the one saved with the results.
        #[arg(long)]
        classes: Option<PathBuf>,
    },
    /// Generate a synthetic packet corpus with exact ground truth.
    GenCorpus {
        #[arg(long)]
        classes: PathBuf,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 3)]
        min_pages: usize,
        #[arg(long, default_value_t = 8)]
        max_pages: usize,
        /// Probability of rendering an attribute with its low-confidence variant.
        #[arg(long, default_value_t = 0.0)]
        low_confidence_rate: f64,
        /// Probability of inserting an unclassifiable page between sections.
        #[arg(long, default_value_t = 0.1)]
        other_page_rate: f64,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
        #[arg(long)]
        tokens_file: PathBuf,
        #[arg(long, default_value = "mock")]
        backend: String,
        /// Job store directory; defaults to `store_dir` from the config, then `./idp-store`.
        #[arg(long)]
        store: Option<PathBuf>,
    },
}

fn extractor(name: &str, timeout_secs: f64) -> Result<Arc<dyn ExtractorBackend>> {
    if name == "remote" {
        return Ok(Arc::new(RemoteExtractor::from_env(
            Duration::from_secs_f64(timeout_secs),
        )?));
    }
    builtin_extractor(name).ok_or_else(|| {
        Error::Validation(format!(
            "backend {name:?} is not one of {}, remote",
            BUILTIN_BACKENDS.join(", ")
        ))
    })
}

fn fail(e: impl std::fmt::Display) -> i32 {
    eprintln!("error: {e}");
    EXIT_CONFIG
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    execute(cli.command)
}

pub fn execute(command: Command) -> i32 {
    match command {
        Command::Process {
            manifest,
            config,
            modality,
            backend,
            out,
        } => {
            let config = match LoadedConfig::load(&config) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            let modality = match modality.as_deref().map(str::parse::<Modality>).transpose() {
                Ok(m) => m,
                Err(e) => return fail(e),
            };
            let extractor = match extractor(&backend, config.config.request_timeout_secs) {
                Ok(b) => b,
                Err(e) => return fail(e),
            };
            let opts = ProcessOptions {
                extractor,
                classifier: Arc::new(KeywordClassifier),
                sleeper: Arc::new(ThreadSleeper),
                modality,
            };
            match process(&manifest, &config, opts, &out) {
                Ok(outcome) => {
                    print!("{}", outcome.report.to_table());
                    outcome.exit_code()
                }
                Err(e) => fail(e),
            }
        }
        Command::Evaluate {
            results,
            baselines,
            out,
            classes,
        } => {
            let classes = match classes.map(load_class_config).transpose() {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            match evaluate(&results, &baselines, classes.as_deref(), &out) {
                Ok(outcome) => {
                    for w in &outcome.warnings {
                        eprintln!("warning: {w}");
                    }
                    print!("{}", outcome.to_table());
                    EXIT_OK
                }
                Err(e) => fail(e),
            }
        }
        Command::GenCorpus {
            classes,
            count,
            seed,
            out,
            min_pages,
            max_pages,
            low_confidence_rate,
            other_page_rate,
        } => {
            let spec = CorpusSpec {
                count,
                seed,
                min_pages,
                max_pages,
                low_confidence_rate,
                other_page_rate,
            };
            let result = load_class_config(&classes)
                .and_then(|c| generate_corpus(&c, &spec))
                .and_then(|corpus| write_corpus(&out, &spec, &corpus));
            match result {
                Ok(summary) => {
                    let pages: usize = summary.packets.iter().map(|p| p.pages).sum();
                    println!(
                        "wrote {} packets ({pages} pages) to {}",
                        summary.packets.len(),
                        out.display()
                    );
                    EXIT_OK
                }
                Err(e) => fail(e),
            }
        }
        Command::Serve {
            config,
            bind,
            tokens_file,
            backend,
            store,
        } => match serve(&config, bind, &tokens_file, &backend, store) {
            Ok(()) => EXIT_OK,
            Err(e) => fail(e),
        },
    }
}

fn serve(
    config: &std::path::Path,
    bind: SocketAddr,
    tokens_file: &std::path::Path,
    backend: &str,
    store: Option<PathBuf>,
) -> Result<()> {
    let config = LoadedConfig::load(config)?;
    let tokens = Tokens::load(tokens_file)?;
    let store_dir = store
        .or_else(|| config.config.store_dir.clone())
        .unwrap_or_else(|| PathBuf::from("idp-store"));
    let engine = Engine::new(
        JobStore::open(&store_dir)?,
        Components {
            classes: config.classes.clone(),
            rules: config.rules.clone(),
            prices: config.prices.clone(),
            classifier: Arc::new(KeywordClassifier),
            extractor: extractor(backend, config.config.request_timeout_secs)?,
            sleeper: Arc::new(ThreadSleeper),
        },
        config.config.settings(),
    )?;
    let state = AppState::start(Arc::new(engine), tokens)?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Error::io(&store_dir, e))?;
    runtime
        .block_on(idp_service::serve(state, bind))
        .map_err(|e| Error::Validation(format!("serve on {bind}: {e}")))
}
