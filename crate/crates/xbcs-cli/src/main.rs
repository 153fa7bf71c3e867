//! Command-line front end: mask generation, measurement simulation,
//! reconstruction, zero-fill baseline, image-quality metrics, and synthetic
//! phantoms, all speaking the shared container format.
//!
//! Exit codes: 0 success, 2 usage errors, 3 data/configuration errors,
//! 4 numerical or invariant failures.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use xbcs_cli::config::RunConfig;
use xbcs_cli::container::{read_image, read_kspace, read_mask, Container, ContainerError};
use xbcs_cli::phantom;
use xbcs::sensing::{gen_mask_cartesian, gen_mask_random2d, simulate_kspace, zero_fill_recon};
use xbcs::solver::{
    solve, Algo, IterationTrace, Measurements, SolverParams, SparsityLevel,
};
use xbcs::{metrics, Error as LibError, PatchConfig};

#[derive(Debug)]
enum CliError {
    /// Unreadable/mismatched inputs, infeasible parameters: exit 3.
    Data(String),
    /// Numerical failures and broken solver invariants: exit 4.
    Numerical(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Data(msg) | CliError::Numerical(msg) => f.write_str(msg),
        }
    }
}

impl From<ContainerError> for CliError {
    fn from(e: ContainerError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<LibError> for CliError {
    fn from(e: LibError) -> Self {
        match e {
            LibError::Numerical(_) | LibError::Convergence(_) | LibError::Invariant(_) => {
                CliError::Numerical(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

#[derive(Parser)]
#[command(name = "xbcs", about = "Transform-blind compressed sensing from undersampled Fourier data", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a sampling mask container
    Mask(MaskArgs),
    /// Simulate undersampled k-space from an image and a mask
    Simulate(SimulateArgs),
    /// Jointly reconstruct the image and its sparsifying transform
    Reconstruct(Box<ReconstructArgs>),
    /// Zero-fill reconstruction baseline
    Zerofill(ZerofillArgs),
    /// PSNR/HFEN between a reconstruction and a reference, as JSON
    Metrics(MetricsArgs),
    /// Generate a synthetic test image container
    Phantom(PhantomArgs),
}

#[derive(Clone, Copy, Debug)]
struct Shape {
    height: usize,
    width: usize,
}

fn parse_shape(s: &str) -> Result<Shape, String> {
    let (h, w) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected HxW, got {s:?}"))?;
    let height: usize = h.trim().parse().map_err(|e| format!("bad height {h:?}: {e}"))?;
    let width: usize = w.trim().parse().map_err(|e| format!("bad width {w:?}: {e}"))?;
    if height == 0 || width == 0 {
        return Err("shape dimensions must be positive".into());
    }
    Ok(Shape { height, width })
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Scheme {
    Random2d,
    Cartesian,
}

#[derive(Args)]
struct MaskArgs {
    /// Grid shape as HxW, e.g. 64x64
    #[arg(long, value_parser = parse_shape)]
    shape: Shape,
    #[arg(long, value_enum)]
    scheme: Scheme,
    /// Undersampling factor p/m, strictly greater than 1
    #[arg(long)]
    accel: f64,
    /// Variable-density decay exponent (0 = uniform)
    #[arg(long, default_value_t = 1.0)]
    density_power: f64,
    /// Fully sampled center: disk radius (random2d) or line count (cartesian); 0 disables
    #[arg(long, default_value_t = 0)]
    center: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    mask: PathBuf,
    /// Standard deviation of complex Gaussian measurement noise
    #[arg(long, default_value_t = 0.0)]
    noise_std: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AlgoArg {
    A1,
    A2,
    A3,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Args)]
struct ReconstructArgs {
    /// JSON run configuration; explicit flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    kspace: Option<PathBuf>,
    #[arg(long)]
    mask: Option<PathBuf>,
    /// a1 well-conditioned, a2 unitary, a3 thresholded [default: a1]
    #[arg(long, value_enum)]
    algo: Option<AlgoArg>,
    /// Patch side length [default: 6]
    #[arg(long)]
    patch: Option<usize>,
    /// Patch stride [default: 1]
    #[arg(long)]
    stride: Option<usize>,
    /// Wrap patches around the image boundary [default: true]
    #[arg(long)]
    wrap: Option<bool>,
    /// Data fidelity weight [default: 3.81]
    #[arg(long)]
    nu: Option<f64>,
    /// Conditioning penalty scale; the penalty weight is lambda0 times the patch count [default: 0.2]
    #[arg(long)]
    lambda0: Option<f64>,
    /// Sparsity budget as a fraction of all code entries [default: 0.055]
    #[arg(long, conflicts_with = "sparsity_count")]
    sparsity_frac: Option<f64>,
    /// Sparsity budget as an absolute count
    #[arg(long)]
    sparsity_count: Option<usize>,
    /// Hard threshold for a3
    #[arg(long)]
    eta: Option<f64>,
    /// Radius of the energy ball constraint [default: 1e5]
    #[arg(long)]
    energy_cap: Option<f64>,
    /// Transform/code alternations per outer iteration [default: 1]
    #[arg(long)]
    inner: Option<usize>,
    /// Outer iterations; 0 writes the zero-fill initialization [default: 40]
    #[arg(long)]
    iters: Option<usize>,
    /// Ramp the sparsity budget over the first half of the run [default: off]
    #[arg(long, value_enum)]
    schedule: Option<OnOff>,
    /// Stop when the relative objective drop falls below this
    #[arg(long)]
    early_stop: Option<f64>,
    /// Ground-truth image; adds PSNR/HFEN columns to the trace
    #[arg(long = "ref")]
    reference: Option<PathBuf>,
    /// Write the per-iteration CSV trace here
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Subtract the analytic objective floor from the trace's objective column
    #[arg(long, default_value_t = false)]
    trace_subtract_floor: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the learned transform as a matrix container
    #[arg(long)]
    save_transform: Option<PathBuf>,
}

#[derive(Args)]
struct ZerofillArgs {
    #[arg(long)]
    kspace: PathBuf,
    #[arg(long)]
    mask: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long)]
    recon: PathBuf,
    #[arg(long = "ref")]
    reference: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PhantomKind {
    SheppLogan,
    SmoothBlobs,
}

#[derive(Args)]
struct PhantomArgs {
    #[arg(long, value_enum)]
    kind: PhantomKind,
    #[arg(long, value_parser = parse_shape)]
    shape: Shape,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Mask(args) => run_mask(args),
        Command::Simulate(args) => run_simulate(args),
        Command::Reconstruct(args) => run_reconstruct(*args),
        Command::Zerofill(args) => run_zerofill(args),
        Command::Metrics(args) => run_metrics(args),
        Command::Phantom(args) => run_phantom(args),
    }
}

fn run_mask(args: MaskArgs) -> Result<(), CliError> {
    let Shape { height, width } = args.shape;
    let mask = match args.scheme {
        Scheme::Random2d => gen_mask_random2d(
            height,
            width,
            args.accel,
            args.density_power,
            args.center as f64,
            args.seed,
        )?,
        Scheme::Cartesian => gen_mask_cartesian(
            height,
            width,
            args.accel,
            args.density_power,
            args.center,
            args.seed,
        )?,
    };
    let m = mask.sampled_count();
    let p = height * width;
    Container::mask(&mask).write(&args.out)?;
    println!(
        "sampled m = {m} of {p} locations (achieved acceleration {:.2}x)",
        p as f64 / m as f64
    );
    Ok(())
}

fn run_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let image = read_image(&args.image)?;
    let mask = read_mask(&args.mask)?;
    let kspace = simulate_kspace(&image, &mask, args.noise_std, args.seed)?;
    Container::kspace(&kspace).write(&args.out)?;
    Ok(())
}

fn run_zerofill(args: ZerofillArgs) -> Result<(), CliError> {
    let kspace = read_kspace(&args.kspace)?;
    let mask = read_mask(&args.mask)?;
    let image = zero_fill_recon(&kspace, &mask)?;
    Container::image(&image).write(&args.out)?;
    Ok(())
}

fn run_metrics(args: MetricsArgs) -> Result<(), CliError> {
    let recon = read_image(&args.recon)?;
    let reference = read_image(&args.reference)?;
    let psnr = metrics::psnr(&recon, &reference)?;
    let hfen = metrics::hfen(&recon, &reference)?;
    // an exact match has infinite PSNR, which JSON renders as null
    let psnr_json = if psnr.is_finite() {
        serde_json::json!(psnr)
    } else {
        serde_json::Value::Null
    };
    println!("{}", serde_json::json!({ "psnr_db": psnr_json, "hfen": hfen }));
    Ok(())
}

fn run_phantom(args: PhantomArgs) -> Result<(), CliError> {
    let Shape { height, width } = args.shape;
    let image = match args.kind {
        PhantomKind::SheppLogan => phantom::shepp_logan(height, width),
        PhantomKind::SmoothBlobs => phantom::smooth_blobs(height, width, args.seed),
    };
    Container::image(&image).write(&args.out)?;
    Ok(())
}

fn resolve_config(args: &ReconstructArgs) -> Result<RunConfig, CliError> {
    let base = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            RunConfig::from_json(&text)
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    let flags = RunConfig {
        algo: args.algo.map(|a| {
            match a {
                AlgoArg::A1 => "a1",
                AlgoArg::A2 => "a2",
                AlgoArg::A3 => "a3",
            }
            .to_string()
        }),
        nu: args.nu,
        lambda0: args.lambda0,
        sparsity_frac: args.sparsity_frac,
        sparsity_count: args.sparsity_count,
        eta: args.eta,
        energy_cap: args.energy_cap,
        inner: args.inner,
        iters: args.iters,
        schedule: args.schedule.map(|s| matches!(s, OnOff::On)),
        early_stop: args.early_stop,
        patch: args.patch,
        stride: args.stride,
        wrap: args.wrap,
        kspace: args.kspace.clone(),
        mask: args.mask.clone(),
        reference: args.reference.clone(),
        out: args.out.clone(),
        trace: args.trace.clone(),
        save_transform: args.save_transform.clone(),
    };
    Ok(base.overridden_by(flags))
}

fn build_params(cfg: &RunConfig) -> Result<SolverParams, CliError> {
    let algo = match cfg.algo.as_deref().unwrap_or("a1") {
        "a1" => Algo::A1,
        "a2" => Algo::A2,
        "a3" => Algo::A3,
        other => return Err(CliError::Data(format!("unknown algorithm {other:?}"))),
    };
    let mut params = SolverParams::defaults(algo);
    if let Some(nu) = cfg.nu {
        params.nu = nu;
    }
    if let Some(lambda0) = cfg.lambda0 {
        params.lambda0 = lambda0;
    }
    params.sparsity = match (algo, cfg.sparsity_count, cfg.sparsity_frac) {
        (Algo::A3, None, None) => None,
        (Algo::A3, _, _) => {
            return Err(CliError::Data("a3 takes a threshold eta, not a sparsity budget".into()));
        }
        (_, Some(count), None) => Some(SparsityLevel::Count(count)),
        (_, None, Some(frac)) => Some(SparsityLevel::Fraction(frac)),
        (_, None, None) => params.sparsity,
        (_, Some(_), Some(_)) => {
            return Err(CliError::Data(
                "sparsity_count and sparsity_frac are mutually exclusive".into(),
            ));
        }
    };
    params.eta = cfg.eta;
    if let Some(cap) = cfg.energy_cap {
        params.energy_cap = cap;
    }
    if let Some(inner) = cfg.inner {
        params.inner = inner;
    }
    if let Some(iters) = cfg.iters {
        params.outer = iters;
    }
    if let Some(schedule) = cfg.schedule {
        params.schedule = schedule;
    }
    params.early_stop = cfg.early_stop;
    params.validate()?;
    Ok(params)
}

fn run_reconstruct(args: ReconstructArgs) -> Result<(), CliError> {
    let trace_subtract_floor = args.trace_subtract_floor;
    let cfg = resolve_config(&args)?;
    let missing = |what: &str| CliError::Data(format!("missing required input: {what}"));
    let kspace_path = cfg.kspace.as_ref().ok_or_else(|| missing("--kspace"))?;
    let mask_path = cfg.mask.as_ref().ok_or_else(|| missing("--mask"))?;
    let out_path = cfg.out.as_ref().ok_or_else(|| missing("--out"))?;

    let params = build_params(&cfg)?;
    let patch_cfg = PatchConfig::new(
        cfg.patch.unwrap_or(6),
        cfg.stride.unwrap_or(1),
        cfg.wrap.unwrap_or(true),
    )?;

    let kspace = read_kspace(kspace_path)?;
    let mask = read_mask(mask_path)?;
    let reference = cfg.reference.as_ref().map(|p| read_image(p)).transpose()?;

    let output = solve(
        &Measurements::KSpace { kspace: &kspace, mask: &mask },
        &params,
        &patch_cfg,
        reference.as_ref(),
        None,
    )?;

    check_trace_monotone(&output.trace)?;

    Container::image(&output.x).write(out_path)?;
    if let Some(path) = &cfg.save_transform {
        let n = output.w.n();
        let w = &output.w.data;
        let row_major: Vec<_> =
            (0..n).flat_map(|r| (0..n).map(move |c| w[(r, c)])).collect();
        Container::matrix(n, n, row_major).write(path)?;
    }
    if let Some(path) = &cfg.trace {
        let offset = if trace_subtract_floor {
            // the objective's analytic floor: λn/2 for the penalized modes
            match params.algo {
                Algo::A1 | Algo::A3 => {
                    let (h, w) = kspace.shape();
                    params.lambda(patch_cfg.patch_count(h, w)) * patch_cfg.n() as f64 / 2.0
                }
                Algo::A2 => 0.0,
            }
        } else {
            0.0
        };
        let mut file = fs::File::create(path).map_err(|e| io_err(path, e))?;
        output
            .trace
            .to_csv(&mut file, offset)
            .map_err(|e| io_err(path, e))?;
    }

    match output.trace.rows.last() {
        Some(last) => {
            let mut line = format!(
                "finished {} iterations: objective {}, sparsity {:.4}, kappa {:.3}",
                output.trace.rows.len(),
                last.objective.total,
                last.sparsity_fraction,
                last.kappa
            );
            if let Some(psnr) = last.psnr_db {
                line.push_str(&format!(", psnr {psnr:.2} dB"));
            }
            if let Some(hfen) = last.hfen {
                line.push_str(&format!(", hfen {hfen:.4}"));
            }
            println!("{line}");
        }
        None => println!("0 iterations requested: wrote the zero-fill initialization"),
    }
    Ok(())
}

/// Post-run check that the recorded objective column never increases beyond
/// round-off slack; the solver enforces this per sub-step, this guards the
/// written artifact.
fn check_trace_monotone(trace: &IterationTrace) -> Result<(), CliError> {
    for pair in trace.rows.windows(2) {
        let (prev, next) = (pair[0].objective.total, pair[1].objective.total);
        if next > prev + 1e-9 * prev.abs().max(1.0) {
            return Err(CliError::Numerical(format!(
                "trace objective rose from {prev} to {next}"
            )));
        }
    }
    Ok(())
}

