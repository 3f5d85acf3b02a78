//! `mscluster`: multiscale clustering of images, point clouds and labeled
//! feature sets.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 bad input data,
//! 3 numerical failure.

mod config;
mod run;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mscluster::ErrorKind;

use config::{CommandKind, ConfigFile, Settings, THREADS_ENV};

#[derive(Debug)]
pub struct CliError {
    kind: ErrorKind,
    message: String,
}

impl CliError {
    pub fn usage(message: String) -> Self {
        CliError { kind: ErrorKind::Usage, message }
    }

    pub fn data(message: String) -> Self {
        CliError { kind: ErrorKind::Data, message }
    }

    fn exit_code(&self) -> u8 {
        match self.kind {
            ErrorKind::Usage => 1,
            ErrorKind::Data => 2,
            ErrorKind::Numerical => 3,
        }
    }
}

impl From<mscluster::Error> for CliError {
    fn from(e: mscluster::Error) -> Self {
        CliError {
            kind: e.kind(),
            message: e.to_string(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

#[derive(Parser)]
#[command(name = "mscluster", version, about = "Multiscale clustering with optimal-transport cluster distances")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment a PNG: SLIC superpixels, then coarsen level by level.
    SegmentImage {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        image: ImageArgs,
    },
    /// Cluster a PLY point cloud: k-means initial clusters, then coarsen.
    SegmentCloud {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        cloud: CloudArgs,
    },
    /// Coarsen an existing label map over a feature matrix.
    Coarsen {
        #[command(flatten)]
        common: CommonArgs,
        /// Feature matrix text file (one row per node).
        #[arg(long)]
        features: Option<PathBuf>,
        /// Per-node colors for the color-std metric (.png, .ply or feature text).
        #[arg(long)]
        colors: Option<PathBuf>,
    },
    /// Recompute metrics from a hierarchy.json.
    Metrics {
        /// hierarchy.json written by a previous run.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Per-node colors (.png, .ply or feature text).
        #[arg(long)]
        colors: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Replay a config file or manifest.json; its `command` key picks the mode.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the file).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
}

#[derive(Args)]
struct CommonArgs {
    /// Input file: PNG, PLY or label map, depending on the command.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// TOML (or .json) config; flags given on the command line win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of coarsening levels L.
    #[arg(long)]
    levels: Option<usize>,
    /// Cluster count at the coarsest level.
    #[arg(long)]
    clusters_final: Option<usize>,
    /// Explicit cluster counts per level, e.g. 60,25,10.
    #[arg(long, value_delimiter = ',')]
    schedule: Option<Vec<usize>>,
    /// Upper bound on sub-clusters per cluster signature.
    #[arg(long)]
    kmax: Option<usize>,
    /// Signature representative: mean or medoid.
    #[arg(long)]
    representative: Option<String>,
    /// order-statistic, fixed-k:<k> or mean-distance.
    #[arg(long)]
    alpha_policy: Option<String>,
    /// gaussian, gaussian:<sigma> or binary.
    #[arg(long)]
    kernel: Option<String>,
    /// kernel or literal-distance.
    #[arg(long)]
    weight_mode: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: $MSCLUSTER_THREADS, then all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Leave the per-level distance and adjacency matrices out of hierarchy.json.
    #[arg(long)]
    no_matrices: bool,
}

#[derive(Args)]
struct ImageArgs {
    #[arg(long)]
    superpixels: Option<usize>,
    #[arg(long)]
    compactness: Option<f64>,
    #[arg(long)]
    slic_iterations: Option<usize>,
    /// rgb or lab.
    #[arg(long)]
    color_space: Option<String>,
    /// Weight of pixel coordinates appended to the color features (0 = color only).
    #[arg(long)]
    spatial_weight: Option<f64>,
}

#[derive(Args)]
struct CloudArgs {
    /// k-means clusters forming level 0.
    #[arg(long)]
    initial_clusters: Option<usize>,
    /// Cluster on geometry only, ignoring vertex colors.
    #[arg(long)]
    no_colors: bool,
    /// ascii or binary.
    #[arg(long)]
    ply_encoding: Option<String>,
}

fn flag(set: bool, value: bool) -> Option<bool> {
    set.then_some(value)
}

impl CommonArgs {
    fn into_config(self) -> (ConfigFile, Option<PathBuf>) {
        let c = ConfigFile {
            input: self.input,
            out: self.out,
            levels: self.levels,
            clusters_final: self.clusters_final,
            schedule: self.schedule,
            kmax: self.kmax,
            representative: self.representative,
            alpha_policy: self.alpha_policy,
            kernel: self.kernel,
            weight_mode: self.weight_mode,
            seed: self.seed,
            threads: self.threads,
            matrices: flag(self.no_matrices, false),
            ..ConfigFile::default()
        };
        (c, self.config)
    }
}

fn resolve(command: Command) -> Result<Settings, CliError> {
    let (kind, flags, file) = match command {
        Command::SegmentImage { common, image } => {
            let (mut c, file) = common.into_config();
            c.superpixels = image.superpixels;
            c.compactness = image.compactness;
            c.slic_iterations = image.slic_iterations;
            c.color_space = image.color_space;
            c.spatial_weight = image.spatial_weight;
            (CommandKind::SegmentImage, c, file)
        }
        Command::SegmentCloud { common, cloud } => {
            let (mut c, file) = common.into_config();
            c.initial_clusters = cloud.initial_clusters;
            c.use_colors = flag(cloud.no_colors, false);
            c.ply_encoding = cloud.ply_encoding;
            (CommandKind::SegmentCloud, c, file)
        }
        Command::Coarsen { common, features, colors } => {
            let (mut c, file) = common.into_config();
            c.features = features;
            c.colors = colors;
            (CommandKind::Coarsen, c, file)
        }
        Command::Metrics { input, colors, out, config } => {
            let c = ConfigFile {
                input,
                colors,
                out,
                ..ConfigFile::default()
            };
            (CommandKind::Metrics, c, config)
        }
        Command::Run { config, out, threads } => {
            let file = ConfigFile::load(&config)?;
            let name = file
                .command
                .clone()
                .ok_or_else(|| CliError::usage(format!("{} has no 'command' key", config.display())))?;
            let flags = ConfigFile {
                out,
                threads,
                ..ConfigFile::default()
            };
            return Settings::resolve(CommandKind::parse(&name)?, flags.over(file));
        }
    };
    let file = match file {
        Some(path) => ConfigFile::load(&path)?,
        None => ConfigFile::default(),
    };
    Settings::resolve(kind, flags.over(file))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = resolve(cli.command).and_then(|settings| {
        if let Some(n) = settings.threads {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| CliError::usage(format!("cannot start {n} threads ({THREADS_ENV}): {e}")))?;
        }
        run::execute(&settings)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mscluster: error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
