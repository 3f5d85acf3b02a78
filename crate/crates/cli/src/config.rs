//! Run configuration: config files, flag overrides and the resolved settings
//! echoed into `manifest.json`.

use std::fmt;
use std::path::{Path, PathBuf};

use mscluster::ingest::{PlyEncoding, SlicColorSpace, SlicParams};
use mscluster::{AlphaPolicy, PipelineConfig, Representative, SimilarityKernel, WeightMode};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const THREADS_ENV: &str = "MSCLUSTER_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    SegmentImage,
    SegmentCloud,
    Coarsen,
    Metrics,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::SegmentImage => "segment-image",
            CommandKind::SegmentCloud => "segment-cloud",
            CommandKind::Coarsen => "coarsen",
            CommandKind::Metrics => "metrics",
        }
    }

    pub fn parse(s: &str) -> Result<Self, CliError> {
        Ok(match s {
            "segment-image" => CommandKind::SegmentImage,
            "segment-cloud" => CommandKind::SegmentCloud,
            "coarsen" => CommandKind::Coarsen,
            "metrics" => CommandKind::Metrics,
            other => return Err(CliError::usage(format!("unknown command '{other}' in config"))),
        })
    }
}

/// Every key a config file (or manifest) may carry. Flags use the same names
/// with dashes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub features: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub colors: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub levels: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clusters_final: Option<usize>,
    /// `N^(1..=L)`; when present it overrides `levels` / `clusters_final`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Vec<usize>>,
    /// Cluster count of the initial partition, recorded by runs and checked on replay.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_initial: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kmax: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub representative: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kmeans_iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_policy: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weight_mode: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub superpixels: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub compactness: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slic_iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub color_space: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spatial_weight: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_clusters: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub use_colors: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ply_encoding: Option<String>,
    /// Include Z and A per level in `hierarchy.json`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrices: Option<bool>,
}

impl ConfigFile {
    /// TOML unless the extension is `.json`.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::data(format!("cannot read config {}: {e}", path.display())))?;
        let parsed = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| e.to_string())
        } else {
            toml::from_str(&text).map_err(|e| e.to_string())
        };
        parsed.map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))
    }

    /// Field-wise `self` (flags) over `file`. The schedule keys travel as
    /// a group so a flag `--levels` is never mixed with a file `schedule`.
    pub fn over(self, file: ConfigFile) -> ConfigFile {
        let flag_schedule = self.levels.is_some() || self.clusters_final.is_some() || self.schedule.is_some();
        let (levels, clusters_final, schedule) = if flag_schedule {
            (self.levels, self.clusters_final, self.schedule)
        } else {
            (file.levels, file.clusters_final, file.schedule)
        };
        ConfigFile {
            command: self.command.or(file.command),
            input: self.input.or(file.input),
            features: self.features.or(file.features),
            colors: self.colors.or(file.colors),
            out: self.out.or(file.out),
            seed: self.seed.or(file.seed),
            threads: self.threads.or(file.threads),
            levels,
            clusters_final,
            schedule,
            n_initial: self.n_initial.or(file.n_initial),
            kmax: self.kmax.or(file.kmax),
            representative: self.representative.or(file.representative),
            kmeans_iterations: self.kmeans_iterations.or(file.kmeans_iterations),
            alpha_policy: self.alpha_policy.or(file.alpha_policy),
            kernel: self.kernel.or(file.kernel),
            weight_mode: self.weight_mode.or(file.weight_mode),
            superpixels: self.superpixels.or(file.superpixels),
            compactness: self.compactness.or(file.compactness),
            slic_iterations: self.slic_iterations.or(file.slic_iterations),
            color_space: self.color_space.or(file.color_space),
            spatial_weight: self.spatial_weight.or(file.spatial_weight),
            initial_clusters: self.initial_clusters.or(file.initial_clusters),
            use_colors: self.use_colors.or(file.use_colors),
            ply_encoding: self.ply_encoding.or(file.ply_encoding),
            matrices: self.matrices.or(file.matrices),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleSpec {
    Explicit(Vec<usize>),
    Geometric { levels: usize, clusters_final: usize },
}

/// Fully resolved settings for one run.
#[derive(Debug, Clone)]
pub struct Settings {
    pub command: CommandKind,
    pub input: PathBuf,
    pub features: Option<PathBuf>,
    pub colors: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    pub threads: Option<usize>,
    pub schedule: ScheduleSpec,
    pub n_initial: Option<usize>,
    pub pipeline: PipelineConfig,
    pub slic: SlicParams,
    pub spatial_weight: f64,
    pub initial_clusters: usize,
    pub use_colors: bool,
    pub ply_encoding: PlyEncoding,
    pub matrices: bool,
}

fn default_levels(command: CommandKind) -> (usize, usize) {
    match command {
        CommandKind::SegmentCloud => (3, 10),
        _ => (4, 10),
    }
}

fn required(value: Option<PathBuf>, what: &str) -> Result<PathBuf, CliError> {
    value.ok_or_else(|| CliError::usage(format!("missing --{what}")))
}

impl Settings {
    pub fn resolve(command: CommandKind, c: ConfigFile) -> Result<Self, CliError> {
        if let Some(name) = &c.command {
            if CommandKind::parse(name)? != command {
                return Err(CliError::usage(format!(
                    "config is for '{name}' but '{}' was run",
                    command.name()
                )));
            }
        }
        let schedule = match (c.schedule, c.levels, c.clusters_final) {
            (Some(s), levels, last) => {
                if levels.is_some_and(|l| l != s.len()) || last.is_some_and(|n| Some(&n) != s.last()) {
                    return Err(CliError::usage(
                        "--schedule disagrees with --levels/--clusters-final".to_string(),
                    ));
                }
                if s.is_empty() {
                    return Err(CliError::usage("--schedule is empty".to_string()));
                }
                ScheduleSpec::Explicit(s)
            }
            (None, levels, last) => {
                let (dl, dn) = default_levels(command);
                ScheduleSpec::Geometric {
                    levels: levels.unwrap_or(dl),
                    clusters_final: last.unwrap_or(dn),
                }
            }
        };

        let mut pipeline = PipelineConfig::default();
        if let Some(k) = c.kmax {
            if k == 0 {
                return Err(CliError::usage("--kmax must be at least 1".to_string()));
            }
            pipeline.subclusters.k_max = k;
        }
        if let Some(r) = &c.representative {
            pipeline.subclusters.representative = parse_representative(r)?;
        }
        if let Some(it) = c.kmeans_iterations {
            pipeline.subclusters.max_iterations = it;
        }
        if let Some(a) = &c.alpha_policy {
            pipeline.alpha = parse_alpha(a)?;
        }
        if let Some(k) = &c.kernel {
            pipeline.adjacency.kernel = parse_kernel(k)?;
        }
        if let Some(w) = &c.weight_mode {
            pipeline.adjacency.weight_mode = parse_weight_mode(w)?;
        }

        let mut slic = SlicParams::default();
        if let Some(n) = c.superpixels {
            slic.n_superpixels = n;
        }
        if let Some(m) = c.compactness {
            slic.compactness = m;
        }
        if let Some(i) = c.slic_iterations {
            slic.iterations = i;
        }
        if let Some(cs) = &c.color_space {
            slic.color_space = parse_color_space(cs)?;
        }

        let threads = match c.threads {
            Some(t) => Some(t),
            None => match std::env::var(THREADS_ENV) {
                Ok(v) if !v.trim().is_empty() => Some(v.trim().parse().map_err(|_| {
                    CliError::usage(format!("{THREADS_ENV}='{v}' is not a thread count"))
                })?),
                _ => None,
            },
        };
        if threads == Some(0) {
            return Err(CliError::usage("thread count must be at least 1".to_string()));
        }

        let features = c.features;
        if command == CommandKind::Coarsen && features.is_none() {
            return Err(CliError::usage("coarsen needs --features".to_string()));
        }
        Ok(Settings {
            command,
            input: required(c.input, "input")?,
            features,
            colors: c.colors,
            out: required(c.out, "out")?,
            seed: c.seed.unwrap_or(0),
            threads,
            schedule,
            n_initial: c.n_initial,
            pipeline,
            slic,
            spatial_weight: c.spatial_weight.unwrap_or(0.0),
            initial_clusters: c.initial_clusters.unwrap_or(200),
            use_colors: c.use_colors.unwrap_or(true),
            ply_encoding: match &c.ply_encoding {
                Some(e) => parse_ply_encoding(e)?,
                None => PlyEncoding::BinaryLittleEndian,
            },
            matrices: c.matrices.unwrap_or(true),
        })
    }

    /// The config that replays this run; keys irrelevant to the command are left out.
    pub fn manifest(&self, schedule: &[usize], n_initial: usize) -> ConfigFile {
        let p = &self.pipeline;
        let image = self.command == CommandKind::SegmentImage;
        let cloud = self.command == CommandKind::SegmentCloud;
        let mut m = ConfigFile {
            command: Some(self.command.name().to_string()),
            input: Some(self.input.clone()),
            features: self.features.clone(),
            colors: self.colors.clone(),
            out: Some(self.out.clone()),
            seed: Some(self.seed),
            threads: self.threads,
            ..ConfigFile::default()
        };
        if self.command == CommandKind::Metrics {
            return m;
        }
        m.levels = Some(schedule.len());
        m.clusters_final = schedule.last().copied();
        m.schedule = Some(schedule.to_vec());
        m.n_initial = Some(n_initial);
        m.kmax = Some(p.subclusters.k_max);
        m.representative = Some(RepresentativeName(p.subclusters.representative).to_string());
        m.kmeans_iterations = Some(p.subclusters.max_iterations);
        m.alpha_policy = Some(AlphaName(p.alpha).to_string());
        m.kernel = Some(KernelName(p.adjacency.kernel).to_string());
        m.weight_mode = Some(WeightModeName(p.adjacency.weight_mode).to_string());
        m.matrices = Some(self.matrices);
        if image {
            m.superpixels = Some(self.slic.n_superpixels);
            m.compactness = Some(self.slic.compactness);
            m.slic_iterations = Some(self.slic.iterations);
            m.color_space = Some(
                match self.slic.color_space {
                    SlicColorSpace::Rgb => "rgb",
                    SlicColorSpace::Lab => "lab",
                }
                .to_string(),
            );
            m.spatial_weight = Some(self.spatial_weight);
        }
        if cloud {
            m.initial_clusters = Some(self.initial_clusters);
            m.use_colors = Some(self.use_colors);
            m.ply_encoding = Some(
                match self.ply_encoding {
                    PlyEncoding::Ascii => "ascii",
                    PlyEncoding::BinaryLittleEndian => "binary",
                }
                .to_string(),
            );
        }
        m
    }
}

pub fn parse_alpha(s: &str) -> Result<AlphaPolicy, CliError> {
    match s.split_once(':') {
        None if s == "order-statistic" => Ok(AlphaPolicy::OrderStatistic),
        None if s == "mean-distance" => Ok(AlphaPolicy::MeanDistance),
        Some(("fixed-k", k)) => match k.parse::<usize>() {
            Ok(k) if k >= 1 => Ok(AlphaPolicy::FixedK { k }),
            _ => Err(CliError::usage(format!("fixed-k needs a positive integer, got '{k}'"))),
        },
        _ => Err(CliError::usage(format!(
            "alpha policy '{s}' is not one of order-statistic, fixed-k:<k>, mean-distance"
        ))),
    }
}

pub fn parse_kernel(s: &str) -> Result<SimilarityKernel, CliError> {
    match s.split_once(':') {
        None if s == "gaussian" => Ok(SimilarityKernel::Gaussian),
        None if s == "binary" => Ok(SimilarityKernel::Binary),
        Some(("gaussian", sigma)) => match sigma.parse::<f64>() {
            Ok(v) if v.is_finite() && v > 0.0 => Ok(SimilarityKernel::GaussianFixed { sigma: v }),
            _ => Err(CliError::usage(format!("gaussian bandwidth must be positive, got '{sigma}'"))),
        },
        _ => Err(CliError::usage(format!(
            "kernel '{s}' is not one of gaussian, gaussian:<sigma>, binary"
        ))),
    }
}

pub fn parse_weight_mode(s: &str) -> Result<WeightMode, CliError> {
    match s {
        "kernel" => Ok(WeightMode::Kernel),
        "literal-distance" => Ok(WeightMode::LiteralDistance),
        _ => Err(CliError::usage(format!("weight mode '{s}' is not kernel or literal-distance"))),
    }
}

fn parse_representative(s: &str) -> Result<Representative, CliError> {
    match s {
        "mean" => Ok(Representative::Mean),
        "medoid" => Ok(Representative::Medoid),
        _ => Err(CliError::usage(format!("representative '{s}' is not mean or medoid"))),
    }
}

fn parse_color_space(s: &str) -> Result<SlicColorSpace, CliError> {
    match s {
        "rgb" => Ok(SlicColorSpace::Rgb),
        "lab" => Ok(SlicColorSpace::Lab),
        _ => Err(CliError::usage(format!("color space '{s}' is not rgb or lab"))),
    }
}

fn parse_ply_encoding(s: &str) -> Result<PlyEncoding, CliError> {
    match s {
        "ascii" => Ok(PlyEncoding::Ascii),
        "binary" => Ok(PlyEncoding::BinaryLittleEndian),
        _ => Err(CliError::usage(format!("ply encoding '{s}' is not ascii or binary"))),
    }
}

struct AlphaName(AlphaPolicy);

impl fmt::Display for AlphaName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            AlphaPolicy::OrderStatistic => write!(f, "order-statistic"),
            AlphaPolicy::FixedK { k } => write!(f, "fixed-k:{k}"),
            AlphaPolicy::MeanDistance => write!(f, "mean-distance"),
        }
    }
}

struct KernelName(SimilarityKernel);

impl fmt::Display for KernelName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            SimilarityKernel::Gaussian => write!(f, "gaussian"),
            // {:?} prints the shortest string that parses back to the same f64
            SimilarityKernel::GaussianFixed { sigma } => write!(f, "gaussian:{sigma:?}"),
            SimilarityKernel::Binary => write!(f, "binary"),
        }
    }
}

struct WeightModeName(WeightMode);

impl fmt::Display for WeightModeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self.0 {
            WeightMode::Kernel => "kernel",
            WeightMode::LiteralDistance => "literal-distance",
        })
    }
}

struct RepresentativeName(Representative);

impl fmt::Display for RepresentativeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self.0 {
            Representative::Mean => "mean",
            Representative::Medoid => "medoid",
        })
    }
}
