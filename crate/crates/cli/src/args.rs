use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sphereloc::descriptor::{Backend, DescriptorConfig};
use sphereloc::geo::Pose;
use sphereloc::localize::{HierarchyConfig, LOCALIZE_BAND_LIMIT};

#[derive(Debug, Parser)]
#[command(
    name = "sphereloc",
    version,
    about = "Spherical place recognition and hierarchical re-localization over overhead maps"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a seeded synthetic world raster and its sidecar.
    Synth(SynthArgs),
    /// Render the view from one pose.
    Render(RenderArgs),
    /// Estimate the yaw taking a reference view into a query view.
    Orient(OrientArgs),
    /// Localize one pose or every sample of a trajectory.
    Localize(LocalizeArgs),
    /// Compare brute-force and hierarchical localization.
    Benchmark(BenchmarkArgs),
    /// Score trajectory views against the lattice reference database.
    Retrieval(RetrievalArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    PowerSpectrum,
    SconvVlad,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::PowerSpectrum => Backend::PowerSpectrum,
            BackendArg::SconvVlad => Backend::SconvVlad,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Hier,
    Brute,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Spherical,
    Pinhole,
}

#[derive(Debug, Clone, Args)]
pub struct MapArgs {
    /// Overhead raster (binary PPM).
    #[arg(long)]
    pub map: PathBuf,
    /// Georeferencing sidecar JSON.
    #[arg(long)]
    pub sidecar: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct DescriptorArgs {
    #[arg(long, default_value_t = LOCALIZE_BAND_LIMIT)]
    pub band_limit: usize,
    #[arg(long, value_enum, default_value_t = BackendArg::PowerSpectrum)]
    pub backend: BackendArg,
    /// Seed of the fixed sconv-vlad weights.
    #[arg(long, default_value_t = 0)]
    pub weight_seed: u64,
}

impl DescriptorArgs {
    pub fn config(&self) -> DescriptorConfig {
        DescriptorConfig {
            weight_seed: self.weight_seed,
            ..DescriptorConfig::with_backend(self.backend.into())
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct HierarchyArgs {
    /// Coarsest altitude is alpha times the base altitude.
    #[arg(long, default_value_t = 3.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 5)]
    pub levels: usize,
    /// Finest altitude, meters.
    #[arg(long, default_value_t = 40.0)]
    pub base_altitude: f64,
    #[arg(long, default_value_t = 0.5)]
    pub r_olp: f64,
    /// Fraction of lowest-weight particles culled per resample.
    #[arg(long, default_value_t = 0.2)]
    pub cull: f64,
    #[arg(long, default_value_t = 0.99)]
    pub min_similarity: f64,
    /// Success radius, meters.
    #[arg(long, default_value_t = 20.0)]
    pub threshold: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl HierarchyArgs {
    pub fn config(&self) -> HierarchyConfig {
        HierarchyConfig {
            alpha: self.alpha,
            l_max: self.levels,
            base_altitude: self.base_altitude,
            r_olp: self.r_olp,
            cull_fraction: self.cull,
            min_similarity: self.min_similarity,
            success_threshold_m: self.threshold,
            seed: self.seed,
            ..HierarchyConfig::default()
        }
    }
}

/// Parses `x,y,alt,yaw` with yaw in radians.
pub fn parse_pose(s: &str) -> Result<Pose, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [x, y, alt, yaw] => Ok(Pose::new(x, y, alt, yaw)),
        _ => Err(format!("expected x,y,alt,yaw, got {} values", v.len())),
    }
}

/// Parses `WIDTHxHEIGHT` in meters.
pub fn parse_extent(s: &str) -> Result<(f64, f64), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WIDTHxHEIGHT, got `{s}`"))?;
    let w: f64 = w.trim().parse().map_err(|e| format!("width: {e}"))?;
    let h: f64 = h.trim().parse().map_err(|e| format!("height: {e}"))?;
    Ok((w, h))
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Raster output (binary PPM).
    #[arg(long)]
    pub out: PathBuf,
    /// Sidecar output; defaults to the raster path with a .json extension.
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
    /// World size in meters, WIDTHxHEIGHT.
    #[arg(long, value_parser = parse_extent, default_value = "1000x500", allow_hyphen_values = true)]
    pub extent: (f64, f64),
    #[arg(long, default_value_t = 1.0)]
    pub gsd: f64,
    #[arg(long, default_value_t = 10)]
    pub landmarks: usize,
    #[arg(long, default_value_t = 5)]
    pub octaves: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[command(flatten)]
    pub map: MapArgs,
    /// x,y,alt,yaw (meters, radians).
    #[arg(long, value_parser = parse_pose, allow_hyphen_values = true)]
    pub pose: Pose,
    #[arg(long, default_value_t = LOCALIZE_BAND_LIMIT)]
    pub band_limit: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Spherical)]
    pub mode: ModeArg,
    /// Fill this many degrees above the horizon (spherical mode only).
    #[arg(long)]
    pub crop_deg: Option<f64>,
    /// Rendered view (binary PPM).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct OrientArgs {
    /// Query view (square binary PPM, 2B x 2B).
    #[arg(long)]
    pub query: PathBuf,
    #[arg(long)]
    pub reference: PathBuf,
    /// power-spectrum correlates raw intensities, sconv-vlad its first-stage
    /// feature maps.
    #[arg(long, value_enum, default_value_t = BackendArg::PowerSpectrum)]
    pub backend: BackendArg,
    #[arg(long, default_value_t = 0)]
    pub weight_seed: u64,
    /// JSON output; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LocalizeArgs {
    #[command(flatten)]
    pub map: MapArgs,
    #[arg(long, value_enum, default_value_t = MethodArg::Hier)]
    pub method: MethodArg,
    /// Single query pose x,y,alt,yaw; the altitude is replaced by the level
    /// schedule.
    #[arg(long, value_parser = parse_pose, allow_hyphen_values = true, conflicts_with = "trajectory", required_unless_present = "trajectory")]
    pub pose: Option<Pose>,
    /// Trajectory CSV (timestamp,x,y,altitude,yaw).
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
    /// Trajectory resampling rate, Hz.
    #[arg(long, default_value_t = 1.0)]
    pub rate: f64,
    /// Render query views from this raster instead of the search map.
    #[arg(long, requires = "query_sidecar")]
    pub query_map: Option<PathBuf>,
    #[arg(long, requires = "query_map")]
    pub query_sidecar: Option<PathBuf>,
    #[command(flatten)]
    pub descriptor: DescriptorArgs,
    #[command(flatten)]
    pub hierarchy: HierarchyArgs,
    /// Per-iteration trace as JSON lines.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// JSON output; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[command(flatten)]
    pub map: MapArgs,
    /// Number of seeded random query poses (ignored with --trajectory).
    #[arg(long, default_value_t = 50)]
    pub queries: usize,
    /// Seed of the random query poses.
    #[arg(long, default_value_t = 99)]
    pub query_seed: u64,
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub rate: f64,
    /// Yaw added to every query, radians.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub yaw_offset: f64,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [MethodArg::Brute, MethodArg::Hier])]
    pub methods: Vec<MethodArg>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.9, 0.8, 0.7])]
    pub acc: Vec<f64>,
    #[command(flatten)]
    pub descriptor: DescriptorArgs,
    #[command(flatten)]
    pub hierarchy: HierarchyArgs,
    /// Summary report; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Directory for per-query CSVs, one per method.
    #[arg(long)]
    pub records_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RetrievalArgs {
    #[command(flatten)]
    pub map: MapArgs,
    #[arg(long)]
    pub trajectory: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub rate: f64,
    /// Reference lattice altitude, meters.
    #[arg(long, default_value_t = 40.0)]
    pub altitude: f64,
    #[arg(long, default_value_t = 0.5)]
    pub r_olp: f64,
    #[arg(long, default_value_t = 20.0)]
    pub threshold: f64,
    /// Largest N of the recall@N curve.
    #[arg(long, default_value_t = 25)]
    pub max_n: usize,
    #[command(flatten)]
    pub descriptor: DescriptorArgs,
    /// Output directory for records.csv, recall.csv, roc.csv and
    /// similarity.csv.
    #[arg(long)]
    pub out: PathBuf,
}
