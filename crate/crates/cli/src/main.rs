use std::path::PathBuf;
use std::process::ExitCode;

use anisoeval_cli::{
    cmd_analyze, cmd_control, cmd_evaluate, cmd_ingest, find_run_files, model_groups, render_summary, CliError,
    ControlOverrides, ProjectConfig,
};
use anisoeval_core::{CohortKind, Mode};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "anisoeval", version, about = "Stratified adaptive LLM evaluation and anisotropy analysis")]
struct Cli {
    /// Project configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Sampling mode: dynamic or full_set.
    #[arg(long, global = true)]
    mode: Option<Mode>,
    /// Output directory; defaults to the configured one.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Anisotropic,
    Isotropic,
    Identical,
}

impl From<Kind> for CohortKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Anisotropic => CohortKind::Anisotropic,
            Kind::Isotropic => CohortKind::Isotropic,
            Kind::Identical => CohortKind::Identical,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Validate and decontaminate a sample file.
    Ingest {
        /// Sample JSONL; defaults to the configured dataset.
        input: Option<PathBuf>,
        /// Corpus directory or file to decontaminate against.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Hold out this many samples as a private anchor set.
        #[arg(long)]
        private_anchor: Option<usize>,
    },
    /// Evaluate configured models.
    Evaluate {
        /// Model ids; all configured models when omitted.
        #[arg(long = "model")]
        models: Vec<String>,
    },
    /// Build leaderboards and diagnostics from run files.
    Analyze {
        /// Run files; every `*.run.jsonl` in the output directory when omitted.
        runs: Vec<PathBuf>,
    },
    /// Dynamic versus full-set control experiment on a synthetic cohort.
    Control {
        #[arg(long)]
        size: Option<usize>,
        #[arg(long, value_enum)]
        kind: Option<Kind>,
        /// Models evaluated concurrently.
        #[arg(long)]
        workers: Option<usize>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => ProjectConfig::load(p)?,
        None => ProjectConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.scheduler.rng_seed = seed;
    }
    if let Some(mode) = cli.mode {
        cfg.scheduler.mode = mode;
    }
    let out = cli.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    match cli.command {
        Command::Ingest {
            input,
            corpus,
            private_anchor,
        } => {
            let input = input
                .or_else(|| cfg.dataset_path.clone())
                .ok_or_else(|| CliError::Config("no input file".into()))?;
            let corpus = corpus.or_else(|| cfg.corpus_path.clone());
            let anchor = private_anchor.or(cfg.private_anchor_size);
            let r = cmd_ingest(&input, corpus.as_deref(), &out, anchor, cfg.scheduler.rng_seed)?;
            println!("{} samples: {} active, {} flagged, {} private", r.total, r.active, r.flagged, r.private);
        }
        Command::Evaluate { models } => {
            let ids: Vec<String> = if models.is_empty() {
                cfg.models.iter().map(|m| m.id().to_string()).collect()
            } else {
                models
            };
            if ids.is_empty() {
                return Err(CliError::Config("no models configured".into()));
            }
            let population = cfg.load_population()?;
            for id in ids {
                let o = cmd_evaluate(&cfg, &population, &id, &out)?;
                print!("{}", render_summary(&o.summary));
                println!("  wrote {}", o.path.display());
            }
        }
        Command::Analyze { runs } => {
            let runs = if runs.is_empty() { find_run_files(&out)? } else { runs };
            let rep = cmd_analyze(&runs, cfg.schemes.as_deref(), &model_groups(&cfg), &out, cfg.scheduler.rng_seed)?;
            if let Some(a) = &rep.anisotropy {
                println!("anisotropy index {:.4}", a.index);
            }
            println!(
                "mean RSA {:.3}; RSA>=10 {:.1}%; RSA>=20 {:.1}%",
                rep.stability.mean_rsa,
                100.0 * rep.stability.share_rsa_ge_10,
                100.0 * rep.stability.share_rsa_ge_20
            );
            println!("wrote {}", out.join("analysis.json").display());
        }
        Command::Control { size, kind, workers } => {
            let o = ControlOverrides {
                seed: cli.seed,
                size,
                kind: kind.map(Into::into),
                workers,
            };
            let (path, rep) = cmd_control(&cfg, &o, &out)?;
            println!(
                "mean RSA dynamic {:.3}, full-set {:.3} (delta {:+.3}); spearman {}; cost ratio {:.4}",
                rep.mean_rsa_dynamic,
                rep.mean_rsa_full_set,
                rep.rsa_delta,
                rep.spearman_overall.map_or("undefined".to_string(), |r| format!("{r:.4}")),
                rep.mean_cost_ratio
            );
            for w in &rep.warnings {
                eprintln!("warning: {w}");
            }
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
