//! vigil — grounded video-anomaly data engine.
//!
//! Pipeline phases communicate only through files, so every subcommand can be
//! rerun in isolation. Exit codes: 0 success, 2 usage, 3 missing input or
//! I/O failure, 4 schema or config violation, 5 service failure, 1 other.

mod commands;
mod errors;

use clap::{Args, Parser, Subcommand};
use errors::AppError;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "vigil",
    version,
    about = "Grounded video-anomaly data engine and evaluation harness"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Run configuration file (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Persist client request/response transcripts next to the output.
    #[arg(long, global = true)]
    archive: bool,
    /// Use the deterministic in-process mock clients instead of HTTP.
    #[arg(long, global = true)]
    mock: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Segment embedding streams into subclips.
    Segment {
        #[arg(long)]
        videos: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Apply the per-video subsampling policy after segmentation.
        #[arg(long)]
        subsample: bool,
    },
    /// Narrate subclips into per-object event annotations.
    Narrate {
        #[arg(long)]
        subclips: PathBuf,
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Ground narrated objects with anchor-frame boxes.
    Ground {
        #[arg(long)]
        narrated: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Synthesize chain-of-thought instruction items.
    Synth {
        #[arg(long)]
        grounded: PathBuf,
        #[arg(long)]
        narrated: PathBuf,
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Assemble stage-keyed training manifests.
    Assemble {
        #[arg(long)]
        subclips: PathBuf,
        #[arg(long)]
        grounded: PathBuf,
        #[arg(long)]
        items: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Classification metrics over eval records.
    EvalCls {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Spatial-grounding metrics over eval records.
    EvalGrounding {
        #[arg(long)]
        records: PathBuf,
        /// Pool unmatched ground-truth boxes as IoU 0.
        #[arg(long)]
        penalize_unmatched: Option<bool>,
        /// IoU threshold for detection recall.
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Finite-difference verification of the GIoU loss gradient.
    LossCheck {
        /// Number of random configurations to check.
        #[arg(long, default_value_t = 50)]
        configs: usize,
        /// Optional loss fixtures (JSONL) to evaluate and print.
        #[arg(long)]
        fixtures: Option<PathBuf>,
    },
    /// Print the per-stage curriculum schedule.
    Plan {
        /// Override the configured steps per epoch.
        #[arg(long)]
        steps_per_epoch: Option<usize>,
    },
    /// Dataset statistics across pipeline phases.
    Stats {
        #[arg(long)]
        subclips: PathBuf,
        #[arg(long)]
        grounded: Option<PathBuf>,
        #[arg(long)]
        items: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Consume an embedding stream and emit subclips live.
    Stream {
        /// Embedding JSONL; `-` reads stdin.
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        videos: PathBuf,
    },
    /// Serve the deterministic mock teacher service over HTTP.
    MockServe {
        #[arg(long, default_value_t = 8800)]
        port: u16,
        /// Answer the first N requests with 503.
        #[arg(long, default_value_t = 0)]
        fail_first: u32,
    },
    /// Generate a synthetic offline world (videos, embeddings, annotations).
    MockData {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 12)]
        videos: usize,
    },
}

#[tokio::main]
async fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match run(cli).await {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}

async fn run(cli: Cli) -> Result<(), AppError> {
    let mut config = match &cli.common.config {
        Some(path) => vigil_core::store::RunConfig::load(path)?,
        None => vigil_core::store::RunConfig::default(),
    };
    if let Some(seed) = cli.common.seed {
        config.seed = seed;
    }
    if cli.common.archive {
        config.archive = true;
    }
    config.endpoints.apply_env();

    let ctx = commands::Context {
        config,
        mock: cli.common.mock,
    };
    match cli.command {
        Command::Segment {
            videos,
            embeddings,
            out,
            subsample,
        } => commands::segment(&ctx, &videos, &embeddings, &out, subsample),
        Command::Narrate {
            subclips,
            annotations,
            out,
        } => commands::narrate(&ctx, &subclips, &annotations, &out).await,
        Command::Ground { narrated, out } => commands::ground(&ctx, &narrated, &out).await,
        Command::Synth {
            grounded,
            narrated,
            annotations,
            out,
        } => commands::synth(&ctx, &grounded, &narrated, &annotations, &out).await,
        Command::Assemble {
            subclips,
            grounded,
            items,
            out_dir,
        } => commands::assemble(&ctx, &subclips, &grounded, &items, &out_dir),
        Command::EvalCls { records, out } => commands::eval_cls(&records, out.as_deref()),
        Command::EvalGrounding {
            records,
            penalize_unmatched,
            threshold,
            out,
        } => commands::eval_grounding(
            &ctx,
            &records,
            penalize_unmatched,
            threshold,
            out.as_deref(),
        ),
        Command::LossCheck { configs, fixtures } => {
            commands::loss_check(&ctx, configs, fixtures.as_deref())
        }
        Command::Plan { steps_per_epoch } => commands::plan(&ctx, steps_per_epoch),
        Command::Stats {
            subclips,
            grounded,
            items,
            out,
        } => commands::stats(
            &ctx,
            &subclips,
            grounded.as_deref(),
            items.as_deref(),
            out.as_deref(),
        ),
        Command::Stream { embeddings, videos } => commands::stream(&ctx, &embeddings, &videos),
        Command::MockServe { port, fail_first } => {
            commands::mock_serve(&ctx, port, fail_first).await
        }
        Command::MockData { out_dir, videos } => commands::mock_data(&ctx, &out_dir, videos),
    }
}
