use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Graph vision networks for link prediction.
#[derive(Debug, Parser)]
#[command(name = "gvn", version)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Replaces the configured seed list with this single seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory for reports, checkpoints and the repository.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Image cache directory (default: OUT/cache).
    #[arg(long, global = true)]
    pub cache: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render subgraph images into the cache.
    Render {
        #[arg(long, value_enum, default_value = "node")]
        mode: RenderMode,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..=3))]
        k: Option<u64>,
    },
    /// Build (or verify) the per-node VSF repository for E-GVN.
    VsfBuild,
    /// Train one model per seed; writes checkpoints and a report.
    Train {
        /// baseline-gcn, gvn or egvn.
        #[arg(long)]
        model: Option<String>,
        /// attention, concat or weighted.
        #[arg(long)]
        integration: Option<String>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Evaluate a saved checkpoint on the test split.
    Eval {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Analysis experiments.
    Probe {
        #[command(subcommand)]
        probe: ProbeCommand,
    },
    /// Write freshly initialized encoder weights.
    EncoderInit {
        /// Destination file.
        path: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RenderMode {
    Link,
    Node,
}

#[derive(Debug, Subcommand)]
pub enum ProbeCommand {
    /// Triangle / 3-star counting on synthetic graphs.
    Substructure {
        #[arg(long, value_enum, default_value = "triangle")]
        kind: SubKind,
        #[arg(long, value_enum, default_value = "erdos-renyi")]
        dataset: SynthKind,
        #[arg(long)]
        with_vsf: bool,
        #[arg(long)]
        graphs: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        /// 5000 graphs and five seeds.
        #[arg(long)]
        full_scale: bool,
    },
    /// Base MPNN vs VSF model on automorphic links of a 6-cycle.
    Isomorphic,
    /// How well VSFs reproduce hand-crafted structural features.
    Reproduction {
        /// Comma-separated subset of CN,AA,RA,SPD,DRNL,DE.
        #[arg(long, default_value = "CN,AA,RA,SPD,DRNL,DE")]
        targets: String,
        /// Probe links drawn from the training edges.
        #[arg(long, default_value_t = 200)]
        pairs: usize,
        #[arg(long)]
        finetune: bool,
    },
    /// Positional-encoding features through a GCN.
    Pe {
        #[arg(long, value_enum, default_value = "laplacian")]
        kind: PeArg,
        #[arg(long, default_value_t = 16)]
        dim: usize,
    },
    /// One run per grid value along an ablation axis.
    Ablation {
        #[arg(long)]
        axis: String,
        /// Comma-separated grid values.
        #[arg(long)]
        grid: String,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SubKind {
    Triangle,
    ThreeStar,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SynthKind {
    ErdosRenyi,
    RandomRegular,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PeArg {
    Coords,
    Laplacian,
    Distance,
    Degree,
}

/// Parses the process arguments and runs the command.
pub fn main_entry() -> ExitCode {
    let cli = Cli::parse();
    match crate::commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
