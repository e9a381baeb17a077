//! Command-line front end for the realization library.
//!
//! Data (kernels, signals, realizations, reports) travels as JSON files;
//! human-readable summaries go to stdout. Exit codes: 0 success or
//! verified, 1 verification failure, 2 input/usage error, 3 unsupported
//! feature combination.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;

use roesser::analysis::{
    dim_report, minimality_certificate, observability_1d, verify_realization, DimReport,
    ObservabilityReport, RankCertificate, VerificationReport,
};
use roesser::fixtures::{random_kernel, random_signal, SplitMix64};
use roesser::realization::LayerRealization;
use roesser::simulator::{apply_realization, realize_layer};
use roesser::tensor::{convolve, crop_for_padding, ConvConfig, Kernel, MultiIndex, Padding, Signal};
use roesser::Error as CoreError;

/// Residual bound a realization must meet to count as verified.
const RESIDUAL_TOL: f64 = 1e-9;

const EXIT_VERIFY_FAILED: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_UNSUPPORTED: u8 = 3;

#[derive(Parser)]
#[command(name = "roesser", version, about = "State-space realizations of convolutional layers")]
struct Cli {
    /// Suppress report tables (exit codes and data output are unaffected).
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a state-space realization from a kernel file.
    Realize(RealizeArgs),
    /// Apply a kernel to a signal by direct convolution.
    Convolve(ConvolveArgs),
    /// Run a signal through a realization of a kernel.
    Simulate(SimulateArgs),
    /// Check that a realization reproduces its kernel's convolution.
    Verify(VerifyArgs),
    /// Report state dimensions and rank diagnostics for a realized kernel.
    Analyze(AnalyzeArgs),
    /// Generate seeded pseudo-random kernels and signals.
    Gen(GenArgs),
}

#[derive(Args)]
struct LayerFlags {
    /// Per-direction stride (one value per direction).
    #[arg(long, num_args = 1.., value_name = "S")]
    stride: Option<Vec<usize>>,
    /// Per-direction dilation (one value per direction).
    #[arg(long, num_args = 1.., value_name = "D")]
    dilation: Option<Vec<usize>>,
    /// Output crop mode.
    #[arg(long, value_enum, default_value_t = PadMode::Full)]
    padding: PadMode,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PadMode {
    Full,
    Same,
    None,
}

impl From<PadMode> for Padding {
    fn from(m: PadMode) -> Padding {
        match m {
            PadMode::Full => Padding::Full,
            PadMode::Same => Padding::Same,
            PadMode::None => Padding::None,
        }
    }
}

#[derive(Args)]
struct RealizeArgs {
    /// Kernel JSON file.
    #[arg(short, long, value_name = "FILE")]
    kernel: PathBuf,
    /// Where to write the realization JSON (stdout if omitted).
    #[arg(short, long, value_name = "FILE")]
    output: Option<PathBuf>,
    #[command(flatten)]
    layer: LayerFlags,
}

#[derive(Args)]
struct ConvolveArgs {
    /// Kernel JSON file.
    #[arg(short, long, value_name = "FILE")]
    kernel: PathBuf,
    /// Input signal JSON file.
    #[arg(short, long, value_name = "FILE")]
    input: PathBuf,
    /// Where to write the output signal JSON (stdout if omitted).
    #[arg(short, long, value_name = "FILE")]
    output: Option<PathBuf>,
    #[command(flatten)]
    layer: LayerFlags,
}

#[derive(Args)]
struct SimulateArgs {
    /// Kernel JSON file (a realization is built from it unless
    /// --realization is given).
    #[arg(short, long, value_name = "FILE", required_unless_present = "realization")]
    kernel: Option<PathBuf>,
    /// Pre-built realization JSON file to run instead of building one.
    #[arg(long, value_name = "FILE")]
    realization: Option<PathBuf>,
    /// Input signal JSON file.
    #[arg(short, long, value_name = "FILE")]
    input: PathBuf,
    /// Where to write the output signal JSON (stdout if omitted).
    #[arg(short, long, value_name = "FILE")]
    output: Option<PathBuf>,
    #[command(flatten)]
    layer: LayerFlags,
}

#[derive(Args)]
struct VerifyArgs {
    /// Kernel JSON file.
    #[arg(short, long, value_name = "FILE")]
    kernel: PathBuf,
    /// Realization JSON file to check; rebuilt from the kernel if omitted.
    #[arg(long, value_name = "FILE")]
    realization: Option<PathBuf>,
    /// Random input trials.
    #[arg(long, default_value_t = 5)]
    trials: usize,
    /// Input extent per direction for the random trials.
    #[arg(long, num_args = 1.., value_name = "N")]
    extent: Option<Vec<usize>>,
    /// Seed for the trial inputs.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Where to write the verification report JSON.
    #[arg(short, long, value_name = "FILE")]
    output: Option<PathBuf>,
    #[command(flatten)]
    layer: LayerFlags,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Kernel JSON file.
    #[arg(short, long, value_name = "FILE")]
    kernel: PathBuf,
    /// Where to write the analysis report JSON.
    #[arg(short, long, value_name = "FILE")]
    output: Option<PathBuf>,
    #[command(flatten)]
    layer: LayerFlags,
}

#[derive(Args)]
struct GenArgs {
    #[command(subcommand)]
    target: GenTarget,
}

#[derive(Subcommand)]
enum GenTarget {
    /// Generate a kernel.
    Kernel {
        /// Number of grid directions.
        #[arg(short = 'd', long)]
        dim: usize,
        /// Kernel extents (size minus one), one per direction.
        #[arg(short = 'r', long, num_args = 1.., value_name = "R")]
        extents: Vec<usize>,
        /// Input channels.
        #[arg(long, default_value_t = 1)]
        cin: usize,
        /// Output channels.
        #[arg(long, default_value_t = 1)]
        cout: usize,
        /// Generator seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Where to write the kernel JSON (stdout if omitted).
        #[arg(short, long, value_name = "FILE")]
        output: Option<PathBuf>,
    },
    /// Generate a signal.
    Signal {
        /// Number of grid directions.
        #[arg(short = 'd', long)]
        dim: usize,
        /// Signal extents, one per direction.
        #[arg(short = 'N', long, num_args = 1.., value_name = "N")]
        extents: Vec<usize>,
        /// Channels.
        #[arg(short = 'c', long, default_value_t = 1)]
        channels: usize,
        /// Generator seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Where to write the signal JSON (stdout if omitted).
        #[arg(short, long, value_name = "FILE")]
        output: Option<PathBuf>,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Failure {
        Failure { code: EXIT_INPUT, message: message.into() }
    }
}

impl From<CoreError> for Failure {
    fn from(e: CoreError) -> Failure {
        let code = match e {
            CoreError::Unsupported(_) => EXIT_UNSUPPORTED,
            _ => EXIT_INPUT,
        };
        Failure { code, message: e.to_string() }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let quiet = cli.quiet;
    let outcome = match cli.command {
        Command::Realize(a) => cmd_realize(a, quiet),
        Command::Convolve(a) => cmd_convolve(a, quiet),
        Command::Simulate(a) => cmd_simulate(a, quiet),
        Command::Verify(a) => cmd_verify(a, quiet),
        Command::Analyze(a) => cmd_analyze(a, quiet),
        Command::Gen(a) => cmd_gen(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

/// Writes `value` as pretty JSON to `out`, or to stdout when no path is
/// given. Returns true when the destination was a file (so reports can
/// share stdout).
fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<bool, Failure> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Failure::input(format!("serialization failed: {e}")))?;
    text.push('\n');
    match out {
        Some(path) => {
            fs::write(path, text)
                .map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display())))?;
            Ok(true)
        }
        None => {
            print!("{text}");
            Ok(false)
        }
    }
}

fn layer_config(flags: &LayerFlags, dim: usize) -> Result<ConvConfig, Failure> {
    let mut cfg = ConvConfig::unit(dim).with_padding(flags.padding.into());
    if let Some(s) = &flags.stride {
        cfg = cfg.with_stride(MultiIndex::new(s.clone())?)?;
    }
    if let Some(d) = &flags.dilation {
        cfg = cfg.with_dilation(MultiIndex::new(d.clone())?)?;
    }
    Ok(cfg)
}

fn dims_line(rep: &DimReport) -> String {
    let status = if rep.matches { "ok" } else { "MISMATCH" };
    format!(
        "state dims      {:?}  (expected {:?}, {status})\ntotal states    {}\nchannels        {} in, {} out",
        rep.state_dims, rep.expected, rep.total, rep.input_dim, rep.output_dim
    )
}

fn certificate_lines(cert: &RankCertificate) -> String {
    let mut s = String::new();
    if cert.applicable {
        let verdict = if cert.holds { "holds" } else { "FAILS" };
        let _ = write!(
            s,
            "minimality      rank {} of required {} ({verdict})\ncorner tap      sigma_min {:.3e}\nresiduals       corner {:.3e}, tail {:.3e}",
            cert.rank, cert.required, cert.leading_tap_sigma_min,
            cert.leading_tap_residual, cert.tail_residual
        );
    } else {
        let _ = write!(
            s,
            "minimality      not applicable (needs square channels and a full-rank corner tap)\nrank            {} (window requires {})",
            cert.rank, cert.required
        );
    }
    s
}

fn kalman_lines(rep: &ObservabilityReport, total: usize) -> String {
    format!(
        "controllability rank {} of {} ({})\nobservability   rank {} of {} ({}; last tap full rank: {})",
        rep.controllability_rank,
        total,
        if rep.controllable { "controllable" } else { "NOT controllable" },
        rep.observability_rank,
        total,
        if rep.observable { "observable" } else { "not observable" },
        if rep.leading_tap_full_rank { "yes" } else { "no" },
    )
}

fn cmd_realize(args: RealizeArgs, quiet: bool) -> Result<u8, Failure> {
    let kernel: Kernel = read_json(&args.kernel)?;
    let cfg = layer_config(&args.layer, kernel.dim())?;
    let lr = realize_layer(&kernel, &cfg)?;
    let rep = dim_report(&lr, &kernel, &cfg)?;
    let to_file = write_json(&lr, args.output.as_deref())?;
    if to_file && !quiet {
        println!("{}", dims_line(&rep));
    }
    Ok(0)
}

fn cmd_convolve(args: ConvolveArgs, quiet: bool) -> Result<u8, Failure> {
    let kernel: Kernel = read_json(&args.kernel)?;
    let input: Signal = read_json(&args.input)?;
    let cfg = layer_config(&args.layer, kernel.dim())?;
    let out = convolve(&kernel, &input, &cfg)?;
    let to_file = write_json(&out, args.output.as_deref())?;
    if to_file && !quiet {
        println!("output extent   {:?}", out.extent().as_slice());
        println!("channels        {}", out.channels());
    }
    Ok(0)
}

fn cmd_simulate(args: SimulateArgs, quiet: bool) -> Result<u8, Failure> {
    let input: Signal = read_json(&args.input)?;
    let out = match &args.realization {
        Some(path) => {
            if args.layer.stride.is_some() || args.layer.dilation.is_some() {
                return Err(Failure::input(
                    "--stride/--dilation describe how to build a realization; they cannot \
                     be combined with --realization",
                ));
            }
            let lr: LayerRealization = read_json(path)?;
            let full = apply_realization(&lr, &input)?;
            match (args.layer.padding, &args.kernel) {
                (PadMode::Full, _) => full,
                (_, None) => {
                    return Err(Failure::input(
                        "cropping needs the kernel extents; pass -k along with --padding",
                    ));
                }
                (_, Some(kpath)) => {
                    let kernel: Kernel = read_json(kpath)?;
                    let stride = match &lr {
                        LayerRealization::Plain(_) => MultiIndex::ones(kernel.dim()),
                        LayerRealization::Strided(s) => s.stride().clone(),
                    };
                    let r_out = kernel.extents().ceil_div(&stride);
                    crop_for_padding(&full, &r_out, args.layer.padding.into())?
                }
            }
        }
        None => {
            let kernel: Kernel =
                read_json(args.kernel.as_deref().expect("clap enforces -k without --realization"))?;
            let cfg = layer_config(&args.layer, kernel.dim())?;
            roesser::simulator::run_layer(&kernel, &input, &cfg)?
        }
    };
    let to_file = write_json(&out, args.output.as_deref())?;
    if to_file && !quiet {
        println!("output extent   {:?}", out.extent().as_slice());
        println!("channels        {}", out.channels());
    }
    Ok(0)
}

/// Extent used for random trials when none is given: covers full kernel
/// overlap plus a stride period, bounded to keep runs quick.
fn default_extent(kernel: &Kernel, cfg: &ConvConfig) -> MultiIndex {
    let r_eff = kernel.extents().mul(cfg.dilation());
    let v = (0..kernel.dim())
        .map(|k| (r_eff[k] + cfg.stride()[k] + 2).clamp(4, 12))
        .collect();
    MultiIndex::new(v).expect("kernel dimension is at least 1")
}

fn verification_passes(kernel: &Kernel, rep: &VerificationReport) -> bool {
    let cert_ok = rep.rank_certificate.as_ref().is_none_or(|c| {
        !c.applicable
            || (c.holds
                && c.leading_tap_residual <= RESIDUAL_TOL
                && c.tail_residual <= RESIDUAL_TOL)
    });
    let kalman_ok = kernel.dim() != 1 || rep.controllability_rank == rep.total_state_dim;
    rep.max_abs_residual <= RESIDUAL_TOL && rep.kernel_recovered && cert_ok && kalman_ok
}

fn cmd_verify(args: VerifyArgs, quiet: bool) -> Result<u8, Failure> {
    let kernel: Kernel = read_json(&args.kernel)?;
    let mut cfg = layer_config(&args.layer, kernel.dim())?;
    let lr = match &args.realization {
        Some(path) => {
            let lr: LayerRealization = read_json(path)?;
            // A strided file fixes the stride; adopt it when no flag was given.
            if args.layer.stride.is_none() {
                if let LayerRealization::Strided(s) = &lr {
                    cfg = cfg.with_stride(s.stride().clone())?;
                }
            }
            lr
        }
        None => realize_layer(&kernel, &cfg)?,
    };
    let extent = match &args.extent {
        Some(v) => MultiIndex::new(v.clone())?,
        None => default_extent(&kernel, &cfg),
    };
    if extent.dim() != kernel.dim() {
        return Err(Failure::input(format!(
            "--extent lists {} values for a {}-direction kernel",
            extent.dim(),
            kernel.dim()
        )));
    }
    let rep = verify_realization(&lr, &kernel, &cfg, args.trials, &extent, args.seed)?;
    let pass = verification_passes(&kernel, &rep);

    if args.output.is_some() {
        write_json(&rep, args.output.as_deref())?;
    }
    if !quiet {
        println!("trials          {}", rep.trials);
        println!("max residual    {:.3e}", rep.max_abs_residual);
        println!(
            "kernel recovery {}",
            if rep.kernel_recovered { "ok" } else { "FAILED" }
        );
        println!("state dims      {:?}  (total {})", rep.state_dims, rep.total_state_dim);
        println!("dim lower bound {}", rep.dim_lower_bound);
        println!(
            "kalman ranks    controllability {}, observability {}",
            rep.controllability_rank, rep.observability_rank
        );
        if let Some(cert) = &rep.rank_certificate {
            println!("{}", certificate_lines(cert));
        }
    }
    println!("verification: {}", if pass { "PASS" } else { "FAIL" });
    Ok(if pass { 0 } else { EXIT_VERIFY_FAILED })
}

fn cmd_analyze(args: AnalyzeArgs, quiet: bool) -> Result<u8, Failure> {
    let kernel: Kernel = read_json(&args.kernel)?;
    let cfg = layer_config(&args.layer, kernel.dim())?;
    let lr = realize_layer(&kernel, &cfg)?;
    let dims = dim_report(&lr, &kernel, &cfg)?;
    let mut ok = dims.matches;

    let mut cert: Option<RankCertificate> = None;
    let mut kalman: Option<ObservabilityReport> = None;
    if let LayerRealization::Plain(real) = &lr {
        let k_eff = roesser::tensor::dilate_kernel(&kernel, cfg.dilation())?;
        if kernel.dim() == 2 {
            let c = minimality_certificate(real, &k_eff)?;
            ok &= !c.applicable || c.holds;
            cert = Some(c);
        } else if kernel.dim() == 1 {
            let rep = observability_1d(real, &k_eff)?;
            ok &= rep.controllable;
            kalman = Some(rep);
        }
    }

    if args.output.is_some() {
        let combined = serde_json::json!({
            "dims": dims,
            "rank_certificate": cert,
            "kalman_1d": kalman,
        });
        write_json(&combined, args.output.as_deref())?;
    }
    if !quiet {
        println!("{}", dims_line(&dims));
        if let Some(c) = &cert {
            println!("{}", certificate_lines(c));
        }
        if let Some(k) = &kalman {
            println!("{}", kalman_lines(k, dims.total));
        }
    }
    Ok(if ok { 0 } else { EXIT_VERIFY_FAILED })
}

fn cmd_gen(args: GenArgs) -> Result<u8, Failure> {
    match args.target {
        GenTarget::Kernel { dim, extents, cin, cout, seed, output } => {
            if extents.len() != dim {
                return Err(Failure::input(format!(
                    "-r lists {} extents for -d {dim}",
                    extents.len()
                )));
            }
            let mut rng = SplitMix64::new(seed);
            let kernel = random_kernel(&MultiIndex::new(extents)?, cout, cin, &mut rng)?;
            write_json(&kernel, output.as_deref())?;
        }
        GenTarget::Signal { dim, extents, channels, seed, output } => {
            if extents.len() != dim {
                return Err(Failure::input(format!(
                    "-N lists {} extents for -d {dim}",
                    extents.len()
                )));
            }
            let mut rng = SplitMix64::new(seed);
            let signal = random_signal(&MultiIndex::new(extents)?, channels, &mut rng)?;
            write_json(&signal, output.as_deref())?;
        }
    }
    Ok(0)
}
