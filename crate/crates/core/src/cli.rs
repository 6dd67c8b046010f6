//! Command-line front end. Exit codes: 0 success, 2 input or validation
//! error, 3 inference refused.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::binning::bin_scatter_to_grid;
use crate::error::{Error, Result};
use crate::estimator::{algorithm1, algorithm2, coarse_init, equispaced_open, EstimationTrace, ThresholdConfig};
use crate::grid::{ChangePoint, DataGrid, GridDims};
use crate::image_io::{add_gaussian_noise, read_image, write_image};
use crate::inference::{infer, MonteCarlo};
use crate::io::{read_grid_csv, read_scatter_csv, write_grid_csv};
use crate::segtree::{quarterly_segmentation, reconstruct_means, tree_report, SegmentationConfig};
use crate::sim::{run_replications, write_metrics_csv, write_records_jsonl, NoiseFamily, SimDesign, ThetaPattern};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_REFUSED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "gridseg", version, about = "Two-dimensional change points in high-dimensional grids")]
pub struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the Monte Carlo design and write a metrics CSV row.
    Simulate(SimulateArgs),
    /// Estimate a single change point and print the estimation trace.
    Estimate(EstimateArgs),
    /// Estimate a single change point and build confidence intervals.
    Infer(InferArgs),
    /// Quarterly segmentation into a tree of change points.
    SegmentTree(SegmentArgs),
    /// Segment an image and replace each pixel by its partition mean.
    Denoise(DenoiseArgs),
    /// Bin scattered observations onto a regular grid by k-nearest-neighbour averaging.
    BinGrid(BinArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 30)]
    pub tw: usize,
    #[arg(long, default_value_t = 30)]
    pub th: usize,
    #[arg(long, default_value_t = 10)]
    pub p: usize,
    /// Number of nonzero leading entries of the Q1/Q3 mean.
    #[arg(long, default_value_t = 5)]
    pub s: usize,
    /// Change location as fractions of each axis, `fw,fh`.
    #[arg(long, default_value = "0.2,0.2", value_parser = parse_pair_f64)]
    pub tau: [f64; 2],
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    pub rho: f64,
    /// gaussian, laplace or centered_exponential.
    #[arg(long, default_value = "gaussian")]
    pub noise: NoiseFamily,
    #[arg(long, default_value_t = 1.0)]
    pub noise_scale: f64,
    #[arg(long, default_value_t = 500)]
    pub reps: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 4000)]
    pub mc_draws: usize,
    /// Metrics CSV path (stdout if omitted).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Per-replication JSON lines.
    #[arg(long)]
    pub reps_output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ThresholdArgs {
    /// Upper end of the lambda grid, or `auto` to scale it to the largest
    /// absolute component of the global mean.
    #[arg(long, default_value = "auto")]
    pub lambda_max: String,
    #[arg(long, default_value_t = 25)]
    pub lambda_count: usize,
    /// Tune one lambda per quadrant instead of a shared one.
    #[arg(long)]
    pub per_quadrant_lambda: bool,
    /// Skip thresholding when `p` is at most this value.
    #[arg(long, default_value_t = 3)]
    pub dense_max_p: usize,
}

impl ThresholdArgs {
    fn config(&self, grid: &DataGrid) -> Result<ThresholdConfig> {
        if self.lambda_count == 0 {
            return Err(Error::invalid("lambda count must be positive"));
        }
        let mut cfg = if self.lambda_max == "auto" {
            ThresholdConfig::auto_scaled(grid, self.lambda_count)
        } else {
            let upper: f64 = self
                .lambda_max
                .parse()
                .map_err(|_| Error::Parse(format!("invalid lambda max '{}'", self.lambda_max)))?;
            if !(upper > 0.0 && upper.is_finite()) {
                return Err(Error::invalid("lambda max must be positive"));
            }
            ThresholdConfig {
                lambda_grid: equispaced_open(upper, self.lambda_count),
                ..ThresholdConfig::default()
            }
        };
        cfg.shared_lambda = !self.per_quadrant_lambda;
        cfg = cfg.with_dense_max_p(self.dense_max_p);
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Grid CSV with header `w,h,x1,...,xp`.
    #[arg(long)]
    pub input: PathBuf,
    /// 1: two-step iterative; 2: with boundary selection.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub algorithm: u8,
    /// Starting point `w,h`; coarse 3x3 search if omitted.
    #[arg(long, value_parser = parse_pair_usize)]
    pub init: Option<[usize; 2]>,
    #[arg(long, default_value_t = 1.0)]
    pub cbic: f64,
    #[command(flatten)]
    pub threshold: ThresholdArgs,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_parser = parse_pair_usize)]
    pub init: Option<[usize; 2]>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 4000)]
    pub mc_draws: usize,
    /// Seed for the Monte Carlo quantile.
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub threshold: ThresholdArgs,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TreeArgs {
    #[arg(long, default_value_t = 1.0)]
    pub cbic: f64,
    #[arg(long, default_value_t = 16)]
    pub min_cells: usize,
    #[arg(long, default_value_t = 20)]
    pub max_level: usize,
    #[command(flatten)]
    pub threshold: ThresholdArgs,
}

impl TreeArgs {
    fn config(&self, grid: &DataGrid) -> Result<SegmentationConfig> {
        if self.max_level == 0 {
            return Err(Error::invalid("max level must be at least 1"));
        }
        Ok(SegmentationConfig {
            threshold: self.threshold.config(grid)?,
            c_bic: self.cbic,
            min_cells: self.min_cells,
            max_level: self.max_level,
        })
    }
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    /// Grid CSV, or a .png/.ppm image.
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub tree: TreeArgs,
    /// Tree JSON path (stdout if omitted).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Piecewise-constant reconstruction, as grid CSV or image by extension.
    #[arg(long)]
    pub reconstructed: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DenoiseArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Tree JSON path.
    #[arg(long)]
    pub tree_output: Option<PathBuf>,
    /// Add Gaussian noise of this variance per channel before segmenting.
    #[arg(long)]
    pub add_noise: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub noise_seed: u64,
    /// Where to save the noisy image when `--add-noise` is given.
    #[arg(long)]
    pub noisy_output: Option<PathBuf>,
    #[command(flatten)]
    pub tree: TreeArgs,
}

#[derive(Debug, Args)]
pub struct BinArgs {
    /// Scatter CSV with header `cx,cy,x1,...,xp`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 25)]
    pub tw: usize,
    #[arg(long, default_value_t = 25)]
    pub th: usize,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

fn parse_pair<T: std::str::FromStr>(s: &str) -> std::result::Result<[T; 2], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(format!("expected two comma-separated values, got '{s}'"));
    }
    let a = parts[0].parse().map_err(|_| format!("invalid value '{}'", parts[0]))?;
    let b = parts[1].parse().map_err(|_| format!("invalid value '{}'", parts[1]))?;
    Ok([a, b])
}

fn parse_pair_f64(s: &str) -> std::result::Result<[f64; 2], String> {
    parse_pair(s)
}

fn parse_pair_usize(s: &str) -> std::result::Result<[usize; 2], String> {
    parse_pair(s)
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    let mut out = sink(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

fn is_image(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("png" | "ppm" | "pnm")
    )
}

fn read_grid(path: &Path) -> Result<DataGrid> {
    if is_image(path) {
        if !path.exists() {
            return Err(Error::Io(io::Error::new(io::ErrorKind::NotFound, format!("{}: not found", path.display()))));
        }
        read_image(path)
    } else {
        read_grid_csv(open(path)?)
    }
}

fn write_grid(path: &Path, grid: &DataGrid) -> Result<()> {
    if is_image(path) {
        write_image(grid, path)
    } else {
        let mut out = BufWriter::new(File::create(path)?);
        write_grid_csv(grid, &mut out)?;
        out.flush()?;
        Ok(())
    }
}

fn initial_point(grid: &DataGrid, init: Option<[usize; 2]>, config: &ThresholdConfig) -> Result<ChangePoint> {
    match init {
        Some([w, h]) => ChangePoint::new(w, h, grid.dims()),
        None => coarse_init(grid, config),
    }
}

#[derive(Serialize)]
struct EstimateReport<'a> {
    schema: &'static str,
    tw: usize,
    th: usize,
    p: usize,
    algorithm: u8,
    trace: &'a EstimationTrace,
}

fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let design = SimDesign {
        tw: a.tw,
        th: a.th,
        p: a.p,
        s: a.s,
        tau0_frac: a.tau,
        theta_pattern: ThetaPattern::Reference,
        rho: a.rho,
        noise: a.noise,
        noise_scale: a.noise_scale,
        n_reps: a.reps,
        alpha: a.alpha,
        seed: a.seed,
        mc_draws: a.mc_draws,
    };
    design.validate()?;
    let res = run_replications(&design)?;
    let mut out = sink(a.output.as_deref())?;
    write_metrics_csv(&mut out, &design, &res.metrics)?;
    out.flush()?;
    if let Some(path) = &a.reps_output {
        let mut out = BufWriter::new(File::create(path)?);
        write_records_jsonl(&mut out, &res.records)?;
        out.flush()?;
    }
    Ok(())
}

fn cmd_estimate(a: &EstimateArgs) -> Result<()> {
    let grid = read_grid_csv(open(&a.input)?)?;
    let config = a.threshold.config(&grid)?;
    let init = initial_point(&grid, a.init, &config)?;
    let trace = match a.algorithm {
        1 => algorithm1(&grid, init, &config)?,
        _ => algorithm2(&grid, init, &config, a.cbic)?,
    };
    let report = EstimateReport {
        schema: crate::SCHEMA,
        tw: grid.tw(),
        th: grid.th(),
        p: grid.p(),
        algorithm: a.algorithm,
        trace: &trace,
    };
    write_json(a.output.as_deref(), &report)
}

fn cmd_infer(a: &InferArgs) -> Result<()> {
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {}", a.alpha)));
    }
    if a.mc_draws == 0 {
        return Err(Error::invalid("--mc-draws must be positive"));
    }
    let grid = read_grid_csv(open(&a.input)?)?;
    let config = a.threshold.config(&grid)?;
    let init = initial_point(&grid, a.init, &config)?;
    let trace = algorithm1(&grid, init, &config)?;
    let report = infer(
        &grid,
        &trace,
        a.alpha,
        MonteCarlo {
            n_draws: a.mc_draws,
            seed: a.seed,
        },
    )?;
    write_json(a.output.as_deref(), &report)
}

fn cmd_segment_tree(a: &SegmentArgs) -> Result<()> {
    let grid = read_grid(&a.input)?;
    let config = a.tree.config(&grid)?;
    let tree = quarterly_segmentation(&grid, &config)?;
    if let Some(path) = &a.reconstructed {
        write_grid(path, &reconstruct_means(&grid, &tree)?)?;
    }
    write_json(a.output.as_deref(), &tree_report(&tree))
}

fn cmd_denoise(a: &DenoiseArgs) -> Result<()> {
    if !is_image(&a.input) || !is_image(&a.output) {
        return Err(Error::invalid("denoise reads and writes .png or .ppm images"));
    }
    let mut grid = read_grid(&a.input)?;
    if let Some(var) = a.add_noise {
        grid = add_gaussian_noise(&grid, var, a.noise_seed)?;
        if let Some(path) = &a.noisy_output {
            write_image(&grid, path)?;
        }
    }
    let config = a.tree.config(&grid)?;
    let tree = quarterly_segmentation(&grid, &config)?;
    write_image(&reconstruct_means(&grid, &tree)?, &a.output)?;
    if let Some(path) = &a.tree_output {
        write_json(Some(path), &tree_report(&tree))?;
    }
    Ok(())
}

fn cmd_bin_grid(a: &BinArgs) -> Result<()> {
    let points = read_scatter_csv(open(&a.input)?)?;
    let grid = bin_scatter_to_grid(&points, GridDims::new(a.tw, a.th), a.k)?;
    let mut out = sink(a.output.as_deref())?;
    write_grid_csv(&grid, &mut out)?;
    out.flush()?;
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Infer(a) => cmd_infer(a),
        Command::SegmentTree(a) => cmd_segment_tree(a),
        Command::Denoise(a) => cmd_denoise(a),
        Command::BinGrid(a) => cmd_bin_grid(a),
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InferenceRefused(_) => EXIT_REFUSED,
        _ => EXIT_INPUT,
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code. Errors go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return EXIT_INPUT;
        }
        builder = builder.num_threads(n);
    }
    let pool = match builder.build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INPUT;
        }
    };
    match pool.install(|| dispatch(&cli)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
