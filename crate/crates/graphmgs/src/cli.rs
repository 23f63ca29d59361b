use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::commands::{self, EncoderSource};
use crate::config::{parse_setting, Config, Preset};
use crate::error::{exit, CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "graphmgs", version, about = "Graph structure metrics, fingerprints and metric-guided GNN pre-training")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Master seed; every random component derives its stream from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,

    /// `key = value` configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Base preset: desk or paper.
    #[arg(long, global = true, value_parser = parse_preset)]
    pub preset: Option<Preset>,

    /// Override one configuration key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE", value_parser = parse_setting)]
    pub set: Vec<(String, String)>,

    /// More logging (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

fn parse_preset(s: &str) -> std::result::Result<Preset, String> {
    s.parse().map_err(|e: CliError| e.to_string())
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic corpus built from the `synthetic.*` keys.
    Generate,
    /// Per-graph and corpus homophily of the node labels.
    Homophily { corpus: PathBuf },
    /// Compute (or reuse) the fingerprint cache of a corpus.
    Fingerprint { corpus: PathBuf },
    /// MGS of an encoder over sampled graph pairs.
    Mgs {
        corpus: PathBuf,
        /// Model checkpoint from `pretrain` or `finetune`.
        #[arg(long, conflicts_with = "encoder", required_unless_present = "encoder")]
        checkpoint: Option<PathBuf>,
        /// Built-in encoder instead of a checkpoint; only `fingerprint`.
        #[arg(long, value_parser = ["fingerprint"])]
        encoder: Option<String>,
    },
    /// Self-supervised pre-training.
    Pretrain { corpus: PathBuf },
    /// Supervised fine-tuning, optionally from a checkpoint.
    Finetune {
        corpus: PathBuf,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Every corpus × arch × strategy over `seeds` runs.
    Benchmark {
        #[arg(required = true)]
        corpora: Vec<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Generate => "generate",
            Command::Homophily { .. } => "homophily",
            Command::Fingerprint { .. } => "fingerprint",
            Command::Mgs { .. } => "mgs",
            Command::Pretrain { .. } => "pretrain",
            Command::Finetune { .. } => "finetune",
            Command::Benchmark { .. } => "benchmark",
        }
    }
}

/// Resolves the configuration: preset, then file, then `--set`, then `--seed`.
pub fn resolve_config(g: &GlobalArgs) -> Result<Config> {
    let mut cfg = Config::resolve(g.preset, g.config.as_deref(), &g.set)?;
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn write_resolved(cfg: &Config, out: &Path, command: &str, argv: &[OsString]) -> Result<()> {
    let args: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let text = format!("# {}\n{}", args.join(" "), cfg.dump());
    let path = out.join(format!("{command}.config"));
    fs::write(&path, text).map_err(|e| CliError::io(&path, e))
}

pub fn execute(cli: &Cli, argv: &[OsString]) -> Result<String> {
    let cfg = resolve_config(&cli.global)?;
    let out = &cli.global.out;
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    write_resolved(&cfg, out, cli.command.name(), argv)?;
    match &cli.command {
        Command::Generate => commands::generate(&cfg, out),
        Command::Homophily { corpus } => commands::homophily(&cfg, corpus, out),
        Command::Fingerprint { corpus } => commands::fingerprint(&cfg, corpus, out),
        Command::Mgs { corpus, checkpoint, .. } => {
            let enc = checkpoint
                .clone()
                .map_or(EncoderSource::Fingerprint, EncoderSource::Checkpoint);
            commands::mgs(&cfg, corpus, &enc, out)
        }
        Command::Pretrain { corpus } => commands::pretrain_cmd(&cfg, corpus, out),
        Command::Finetune { corpus, checkpoint } => commands::finetune_cmd(&cfg, corpus, checkpoint.as_deref(), out),
        Command::Benchmark { corpora } => commands::benchmark(&cfg, corpora, out),
    }
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn run(argv: Vec<OsString>) -> i32 {
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::USAGE } else { exit::OK };
        }
    };
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match execute(&cli, &argv) {
        Ok(summary) => {
            println!("{summary}");
            exit::OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
