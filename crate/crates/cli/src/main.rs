use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use adaptation_cli::{
    cmd_analyze, cmd_bench, cmd_gen, cmd_select, cmd_train, config_reference, resolve_config,
    with_threads, CliError, Overrides, OUTPUT_DIR_ENV,
};
use adaptation_core::dataio::ProviderKind;
use adaptation_core::selection::{CombineMode, UncertaintyMode};
use adaptation_core::tinynet::HeadSide;
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "adaptation",
    version,
    about = "Unsupervised active sample selection for domain adaptation",
    after_long_help = config_reference()
)]
struct Cli {
    /// JSON config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Artifact directory.
    #[arg(long, global = true, env = OUTPUT_DIR_ENV)]
    output_dir: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Feature file (ADAPTFV1).
    #[arg(long, global = true)]
    features: Option<PathBuf>,
    /// Sample manifest (JSON).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    /// Head checkpoint path.
    #[arg(long, global = true)]
    checkpoint: Option<PathBuf>,
    /// Sets every seed (trainer, clustering, generator, bench base seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    #[arg(long = "lr", global = true)]
    learning_rate: Option<f64>,
    #[arg(long, global = true)]
    batch_size: Option<usize>,
    /// Number of clusters.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Representativeness weight.
    #[arg(long, global = true)]
    omega: Option<f64>,
    /// Annotation budget in percent of the pool.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true, value_enum)]
    uncertainty_mode: Option<UncertaintyArg>,
    #[arg(long, global = true, value_enum)]
    combine_mode: Option<CombineArg>,
    #[arg(long, global = true, value_enum)]
    embed_side: Option<SideArg>,
    #[arg(long, global = true, value_enum)]
    provider: Option<ProviderArg>,
    /// Proxy blend weight.
    #[arg(long, global = true)]
    lambda: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a seeded synthetic multi-domain feature set.
    Gen {
        /// Append proxy reconstructions as manifest recon rows.
        #[arg(long)]
        with_recon: bool,
    },
    /// Train the student and teacher heads; prints epoch,loss.
    Train,
    /// Embed, cluster and rank the pool with a trained head.
    Select,
    /// Accuracy-versus-budget sweep against the baselines.
    Bench {
        /// Paired seeds per cell.
        #[arg(long)]
        seeds: Option<usize>,
        /// Comma-separated budgets in percent.
        #[arg(long, value_delimiter = ',')]
        alphas: Option<Vec<f64>>,
        /// Also rerun the pipeline at each of these cluster counts.
        #[arg(long, value_delimiter = ',')]
        ablate_k: Option<Vec<usize>>,
    },
    /// Per-domain similarity to the source centroid, before and after
    /// homogenization.
    Analyze,
    /// Print the effective config as JSON.
    Config,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum UncertaintyArg {
    PairwiseMin,
    Range,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CombineArg {
    Raw,
    Rank,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SideArg {
    Student,
    Teacher,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ProviderArg {
    Proxy,
    External,
}

impl Cli {
    fn overrides(&self) -> Overrides {
        let (seeds, alphas) = match &self.command {
            Command::Bench { seeds, alphas, .. } => (*seeds, alphas.clone()),
            _ => (None, None),
        };
        Overrides {
            output_dir: self.output_dir.clone(),
            features: self.features.clone(),
            manifest: self.manifest.clone(),
            checkpoint: self.checkpoint.clone(),
            threads: self.threads,
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            seed: self.seed,
            k: self.k,
            omega: self.omega,
            alpha: self.alpha,
            uncertainty_mode: self.uncertainty_mode.map(|m| match m {
                UncertaintyArg::PairwiseMin => UncertaintyMode::PairwiseMin,
                UncertaintyArg::Range => UncertaintyMode::Range,
            }),
            combine_mode: self.combine_mode.map(|m| match m {
                CombineArg::Raw => CombineMode::Raw,
                CombineArg::Rank => CombineMode::Rank,
            }),
            embed_side: self.embed_side.map(|s| match s {
                SideArg::Student => HeadSide::Student,
                SideArg::Teacher => HeadSide::Teacher,
            }),
            provider: self.provider.map(|p| match p {
                ProviderArg::Proxy => ProviderKind::Proxy,
                ProviderArg::External => ProviderKind::External,
            }),
            lambda: self.lambda,
            bench_seeds: seeds,
            alphas,
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    // The env var is already folded into `output_dir` by clap.
    let cfg = resolve_config(cli.config.as_deref(), None, &cli.overrides())?;
    with_threads(cfg.threads, || match &cli.command {
        Command::Gen { with_recon } => cmd_gen(&cfg, *with_recon, &mut io::stdout()),
        Command::Train => cmd_train(&cfg, &mut io::stdout()).map(drop),
        Command::Select => cmd_select(&cfg, &mut io::stdout()).map(drop),
        Command::Bench { ablate_k, .. } => {
            cmd_bench(&cfg, ablate_k.as_deref(), &mut io::stdout()).map(drop)
        }
        Command::Analyze => cmd_analyze(&cfg, &mut io::stdout()).map(drop),
        Command::Config => {
            println!("{}", cfg.to_json());
            Ok(())
        }
    })??;
    io::stdout().flush().ok();
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
