mod commands;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use surgtrack::tracking::Variant;

#[derive(Debug, Parser)]
#[command(name = "surgtrack", version, about = "Instrument tracking and surgical-skill analytics")]
pub(crate) struct Cli {
    /// TOML configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, env = "SURGTRACK_OUT", default_value = "out")]
    out: PathBuf,

    /// Seed for every random choice.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// More log output (-v info, -vv debug); overrides SURGTRACK_LOG.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum VariantArg {
    Sort,
    Deepsort,
    Strongsort,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Sort => Variant::Sort,
            VariantArg::Deepsort => Variant::DeepSort,
            VariantArg::Strongsort => Variant::StrongSort,
        }
    }
}

#[derive(Debug, Args)]
pub(crate) struct TrackerArgs {
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,

    /// Run the detector every N frames and coast in between.
    #[arg(long)]
    detection_interval: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub(crate) enum Command {
    /// Track a detection file (JSONL) into tracks.jsonl.
    Track {
        /// Detection file; `-` reads stdin.
        input: PathBuf,
        #[command(flatten)]
        tracker: TrackerArgs,
        /// Emit one line per frame on stdout as soon as it is tracked.
        #[arg(long)]
        stream: bool,
    },
    /// Score tracks against an annotation directory.
    Evaluate {
        tracks: PathBuf,
        annotations: PathBuf,
        /// Detections with masks, used for mIoU.
        #[arg(long)]
        detections: Option<PathBuf>,
    },
    /// Extract the 34 skill metrics per video.
    Metrics {
        tracks: PathBuf,
        /// Detection file whose camera transforms feed the compensated path.
        #[arg(long)]
        detections: Option<PathBuf>,
    },
    /// Pearson correlation of every metric with every assessment aspect.
    Correlate { metrics: PathBuf, mosats: PathBuf },
    /// Cross-validated skill classification.
    Classify {
        metrics: PathBuf,
        mosats: PathBuf,
        #[arg(long, default_value = "all")]
        task: String,
        #[arg(long, default_value = "all")]
        model: String,
        /// Features kept by ANOVA selection.
        #[arg(long)]
        k: Option<usize>,
        /// folds.json from the `folds` command; otherwise label-stratified.
        #[arg(long)]
        folds: Option<PathBuf>,
    },
    /// Balance videos into folds and resample images per class.
    Folds {
        /// Annotation directory, or CSV with video_id,class,count.
        input: PathBuf,
    },
    /// Throughput on a synthetic four-object stream.
    Bench {
        #[arg(long, default_value_t = 10_000)]
        frames: u64,
        #[command(flatten)]
        tracker: TrackerArgs,
    },
    /// Write a synthetic demo dataset.
    DemoSynth {
        #[arg(long, default_value_t = 60.0)]
        duration_s: f64,
        /// Annotate every N frames; defaults to one frame per second.
        #[arg(long)]
        annotate_every: Option<u64>,
    },
}

fn exit_code(e: &anyhow::Error) -> u8 {
    let invariant = e
        .chain()
        .filter_map(|c| c.downcast_ref::<surgtrack::Error>())
        .any(surgtrack::Error::is_invariant_violation);
    if invariant {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let mut logger = env_logger::Builder::from_env(env_logger::Env::new().filter_or("SURGTRACK_LOG", "warn"));
    match cli.verbose {
        0 => {}
        1 => {
            logger.filter_level(log::LevelFilter::Info);
        }
        _ => {
            logger.filter_level(log::LevelFilter::Debug);
        }
    }
    logger.init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
