//! The `lfic` command line.
//!
//! Exit codes: 0 success, 1 gradient check failed, 2 bad flags, 3 IO error,
//! 4 malformed input (PNM, container or weights), 5 budget infeasible (the
//! coarsest encode already exceeds it; the container is still written).

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::bdrate::{bd_rate, format_bd_rate, parse_rd_csv};
use crate::bitstream::summary;
use crate::codec::decode;
use crate::error::Error;
use crate::harness::list_corpus;
use crate::image::{load_pnm, mean_squared_error, psnr_from_mse, save_pnm, ImageU8};
use crate::metric::gradcheck::{run_grad_check, GradCheckConfig};
use crate::metric::{EmbeddingNet, LossWeights, TotalLoss};
use crate::quant::QuantSpec;
use crate::ratecontrol::{
    encode_with_budget, format_psnr, Budget, EncodeReport, EncoderSettings, RefineConfig,
    Termination, REPORT_CSV_HEADER,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_FORMAT: i32 = 4;
pub const EXIT_INFEASIBLE: i32 = 5;

pub const SWEEP_CSV_HEADER: &str = "budget,bpp,psnr";

#[derive(Parser, Debug)]
#[command(
    name = "lfic",
    version,
    about = "Regionally adaptive pooling image codec"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Compress a PGM/PPM image under a bit budget.
    Encode(EncodeArgs),
    /// Reconstruct a PGM/PPM image from a container.
    Decode(DecodeArgs),
    /// Print a container summary.
    Info(InfoArgs),
    /// Encode a corpus at several budgets and write `budget,bpp,psnr` rows.
    RdSweep(SweepArgs),
    /// Bjøntegaard delta rate between two `rate,quality` CSV files.
    Bdrate(BdrateArgs),
    /// Finite-difference check of the metric gradients.
    GradCheck(GradCheckArgs),
}

#[derive(Args, Debug, Clone)]
pub struct CodecArgs {
    /// Maximum block size N (4 or 8).
    #[arg(long, default_value_t = 8)]
    pub block_max: usize,
    /// Quantizer levels L (2..=256; 256 bypasses quantization).
    #[arg(long, default_value_t = 8)]
    pub levels: u32,
    /// Embedding network weights (LFW1). Without it only the pixel loss is used.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long, default_value_t = 0.01)]
    pub lambda_con: f64,
    #[arg(long, default_value_t = 10.0)]
    pub lambda_sem: f64,
    /// Fraction of refinable superblocks split per loop.
    #[arg(long, default_value_t = 0.05)]
    pub refine_fraction: f64,
    #[arg(long, default_value_t = 32)]
    pub max_loops: usize,
    /// Seed for every random choice (reserved for randomized commands).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct EncodeArgs {
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long)]
    pub budget_bpp: f64,
    /// Write the key-value report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Write the report as a CSV header plus one row here.
    #[arg(long)]
    pub report_csv: Option<PathBuf>,
    #[command(flatten)]
    pub codec: CodecArgs,
}

#[derive(Args, Debug)]
pub struct DecodeArgs {
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Args, Debug)]
pub struct InfoArgs {
    pub input: PathBuf,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// Directory of PGM/PPM files, or a single image.
    pub corpus: PathBuf,
    /// Strictly increasing, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub budgets: Vec<f64>,
    #[arg(short, long)]
    pub output: PathBuf,
    /// Also write every container as `<stem>_<budget>.lfic` here.
    #[arg(long)]
    pub containers: Option<PathBuf>,
    /// Per-file rows `file,budget,bpp,psnr,mask_overhead,loops,termination`.
    #[arg(long)]
    pub detail: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    #[command(flatten)]
    pub codec: CodecArgs,
}

#[derive(Args, Debug)]
pub struct BdrateArgs {
    pub anchor: PathBuf,
    pub test: PathBuf,
}

#[derive(Args, Debug)]
pub struct GradCheckArgs {
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub probes: usize,
    #[arg(long, default_value_t = 0.01)]
    pub lambda_con: f64,
    #[arg(long, default_value_t = 10.0)]
    pub lambda_sem: f64,
}

/// A failed command: message for stderr plus its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn io(path: &Path, err: std::io::Error) -> Self {
        CliError {
            code: EXIT_IO,
            message: format!("{}: {err}", path.display()),
        }
    }

    fn format(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError {
            code: EXIT_FORMAT,
            message: format!("{}: {err}", path.display()),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) => EXIT_USAGE,
            _ => EXIT_FORMAT,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code. Output goes to stdout/stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli.command) {
        Ok((code, out)) => {
            print!("{out}");
            let _ = std::io::stdout().flush();
            code
        }
        Err(e) => {
            eprintln!("lfic: {}", e.message);
            e.code
        }
    }
}

/// Runs a parsed command and returns its exit code and stdout text.
pub fn execute(command: &Command) -> Result<(i32, String), CliError> {
    match command {
        Command::Encode(a) => cmd_encode(a),
        Command::Decode(a) => cmd_decode(a),
        Command::Info(a) => cmd_info(a),
        Command::RdSweep(a) => cmd_rd_sweep(a),
        Command::Bdrate(a) => cmd_bdrate(a),
        Command::GradCheck(a) => cmd_grad_check(a),
    }
}

struct ValidatedCodec {
    quant: QuantSpec,
    refine: RefineConfig,
    weights: LossWeights,
    max_block: usize,
}

fn validate_codec(a: &CodecArgs) -> Result<ValidatedCodec, CliError> {
    if a.block_max != 4 && a.block_max != 8 {
        return Err(CliError::usage(format!(
            "--block-max must be 4 or 8, got {}",
            a.block_max
        )));
    }
    let quant =
        QuantSpec::with_levels(a.levels).map_err(|e| CliError::usage(format!("--levels: {e}")))?;
    let refine = RefineConfig::new(a.max_loops, a.refine_fraction)
        .map_err(|e| CliError::usage(e.to_string()))?;
    let weights = LossWeights::new(a.lambda_con, a.lambda_sem, 0.0)
        .map_err(|e| CliError::usage(e.to_string()))?;
    Ok(ValidatedCodec {
        quant,
        refine,
        weights,
        max_block: a.block_max,
    })
}

fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

fn read_image(path: &Path) -> Result<ImageU8, CliError> {
    load_pnm(&read_file(path)?).map_err(|e| CliError::format(path, e))
}

fn load_net(path: &Path) -> Result<EmbeddingNet, CliError> {
    EmbeddingNet::from_bytes(&read_file(path)?).map_err(|e| CliError::format(path, e))
}

fn build_metric(weights: LossWeights, path: Option<&Path>) -> Result<TotalLoss, CliError> {
    Ok(match path {
        Some(p) => TotalLoss::with_net(weights, load_net(p)?),
        None => TotalLoss {
            weights,
            net: None,
            adversarial: None,
        },
    })
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so a failed command never leaves a partial file behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

fn file_label(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn cmd_encode(a: &EncodeArgs) -> Result<(i32, String), CliError> {
    let codec = validate_codec(&a.codec)?;
    let budget =
        Budget::new(a.budget_bpp).map_err(|e| CliError::usage(format!("--budget-bpp: {e}")))?;
    let img = read_image(&a.input)?;
    let metric = build_metric(codec.weights, a.codec.weights.as_deref())?;
    let settings = EncoderSettings {
        budget,
        refine: codec.refine,
        quant: codec.quant,
        max_block: codec.max_block,
        metric: &metric,
    };
    let (enc, report) = encode_with_budget(&img, &settings)?;
    write_atomic(&a.output, &enc.bytes)?;
    let text = report.to_text();
    if let Some(p) = &a.report {
        write_atomic(p, text.as_bytes())?;
    }
    if let Some(p) = &a.report_csv {
        let csv = format!(
            "{REPORT_CSV_HEADER}\n{}\n",
            report.csv_row(&file_label(&a.input))
        );
        write_atomic(p, csv.as_bytes())?;
    }
    if report.termination == Termination::InitialOvershoot {
        eprintln!(
            "lfic: budget {} bpp is infeasible; coarsest encode needs {:.6} bpp (container written)",
            budget.target_bpp(),
            report.achieved_bpp
        );
        return Ok((EXIT_INFEASIBLE, text));
    }
    Ok((EXIT_OK, text))
}

fn cmd_decode(a: &DecodeArgs) -> Result<(i32, String), CliError> {
    let bytes = read_file(&a.input)?;
    let dec = decode(&bytes).map_err(|e| CliError::format(&a.input, e))?;
    write_atomic(&a.output, &save_pnm(&dec.image))?;
    Ok((EXIT_OK, String::new()))
}

fn cmd_info(a: &InfoArgs) -> Result<(i32, String), CliError> {
    let bytes = read_file(&a.input)?;
    let container =
        crate::bitstream::read_container(&bytes).map_err(|e| CliError::format(&a.input, e))?;
    Ok((EXIT_OK, summary(&container)))
}

/// One encode in a sweep.
#[derive(Clone, Debug)]
pub struct SweepItem {
    pub file: String,
    pub budget: f64,
    pub report: EncodeReport,
    pub squared_error: f64,
    pub samples: usize,
    pub container: Vec<u8>,
}

fn budget_label(b: f64) -> String {
    format!("{b}")
}

fn cmd_rd_sweep(a: &SweepArgs) -> Result<(i32, String), CliError> {
    let codec = validate_codec(&a.codec)?;
    if a.budgets.is_empty() {
        return Err(CliError::usage("--budgets needs at least one value"));
    }
    for &b in &a.budgets {
        Budget::new(b).map_err(|e| CliError::usage(format!("--budgets: {e}")))?;
    }
    if a.budgets.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::usage("--budgets must be strictly increasing"));
    }

    let paths = if a.corpus.is_dir() {
        list_corpus(&a.corpus).map_err(|e| CliError::io(&a.corpus, e))?
    } else if a.corpus.is_file() {
        vec![a.corpus.clone()]
    } else {
        return Err(CliError::io(
            &a.corpus,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no such corpus"),
        ));
    };
    if paths.is_empty() {
        return Err(CliError::io(
            &a.corpus,
            std::io::Error::new(std::io::ErrorKind::NotFound, "corpus has no PGM/PPM files"),
        ));
    }
    let images = paths
        .iter()
        .map(|p| Ok((file_label(p), read_image(p)?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    let metric = build_metric(codec.weights, a.codec.weights.as_deref())?;

    let jobs: Vec<(usize, f64)> = (0..images.len())
        .flat_map(|i| a.budgets.iter().map(move |&b| (i, b)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs)
        .build()
        .map_err(|e| CliError::usage(format!("--jobs: {e}")))?;
    let items: Vec<SweepItem> = pool.install(|| {
        jobs.par_iter()
            .map(|&(i, b)| {
                let (name, img) = &images[i];
                let settings = EncoderSettings {
                    budget: Budget::new(b).expect("validated"),
                    refine: codec.refine,
                    quant: codec.quant,
                    max_block: codec.max_block,
                    metric: &metric,
                };
                let (enc, report) = encode_with_budget(img, &settings)?;
                let decoded = decode(&enc.bytes)?.image;
                let mse = mean_squared_error(img, &decoded)?;
                Ok(SweepItem {
                    file: name.clone(),
                    budget: b,
                    report,
                    squared_error: mse * img.data().len() as f64,
                    samples: img.data().len(),
                    container: enc.bytes,
                })
            })
            .collect::<Result<Vec<_>, Error>>()
    })?;

    let csv = sweep_csv(&a.budgets, &items);
    if let Some(dir) = &a.containers {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        for it in &items {
            let stem = Path::new(&it.file)
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            write_atomic(
                &dir.join(format!("{stem}_{}.lfic", budget_label(it.budget))),
                &it.container,
            )?;
        }
    }
    if let Some(p) = &a.detail {
        let mut s = String::from("file,budget,bpp,psnr,mask_overhead,loops,termination\n");
        for it in &items {
            let r = &it.report;
            let _ = writeln!(
                s,
                "{},{},{:.6},{},{:.6},{},{}",
                it.file,
                budget_label(it.budget),
                r.achieved_bpp,
                format_psnr(r.psnr),
                r.mask_overhead_fraction,
                r.loops_used,
                r.termination
            );
        }
        write_atomic(p, s.as_bytes())?;
    }
    write_atomic(&a.output, csv.as_bytes())?;
    Ok((EXIT_OK, csv))
}

/// Aggregates sweep items per budget: mean bpp over files, and PSNR of the
/// pooled squared error over all files.
pub fn sweep_csv(budgets: &[f64], items: &[SweepItem]) -> String {
    let mut s = format!("{SWEEP_CSV_HEADER}\n");
    for &b in budgets {
        let rows: Vec<&SweepItem> = items.iter().filter(|it| it.budget == b).collect();
        let n = rows.len() as f64;
        let bpp = rows.iter().map(|it| it.report.achieved_bpp).sum::<f64>() / n;
        let se: f64 = rows.iter().map(|it| it.squared_error).sum();
        let samples: usize = rows.iter().map(|it| it.samples).sum();
        let _ = writeln!(
            s,
            "{},{:.6},{}",
            budget_label(b),
            bpp,
            format_psnr(psnr_from_mse(se / samples as f64))
        );
    }
    s
}

fn cmd_bdrate(a: &BdrateArgs) -> Result<(i32, String), CliError> {
    let read_curve = |p: &Path| -> Result<_, CliError> {
        let text = String::from_utf8(read_file(p)?).map_err(|e| CliError::format(p, e))?;
        parse_rd_csv(&text).map_err(|e| CliError::format(p, e))
    };
    let anchor = read_curve(&a.anchor)?;
    let test = read_curve(&a.test)?;
    let bd = bd_rate(&anchor, &test).map_err(|e| CliError {
        code: EXIT_FORMAT,
        message: e.to_string(),
    })?;
    Ok((EXIT_OK, format!("{}\n", format_bd_rate(bd))))
}

fn cmd_grad_check(a: &GradCheckArgs) -> Result<(i32, String), CliError> {
    if a.probes == 0 {
        return Err(CliError::usage("--probes must be at least 1"));
    }
    let weights = LossWeights::new(a.lambda_con, a.lambda_sem, 0.0)
        .map_err(|e| CliError::usage(e.to_string()))?;
    let net = a.weights.as_deref().map(load_net).transpose()?;
    let cfg = GradCheckConfig {
        probes: a.probes,
        ..GradCheckConfig::default()
    };
    let report = run_grad_check(net.as_ref(), &weights, a.seed, &cfg)
        .map_err(|e| CliError::from(Error::from(e)))?;
    let code = if report.passed() {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    };
    Ok((code, report.to_string()))
}
