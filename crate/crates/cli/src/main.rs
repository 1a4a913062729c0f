use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use jpeg_compat::{BlockCodec, BlockShape, Budget, QuantTable};
use jpeg_compat_cli::error::{CliError, CliResult};
use jpeg_compat_cli::experiments::{
    incompat_rate, payload_detect, timing, verify_block, BlockInput, ExperimentConfig, Source,
};
use jpeg_compat_cli::results::{save_rows, write_rows, Format, ResultRow};

/// Compatibility and timing steganalysis of high-quality JPEG blocks.
#[derive(Parser)]
#[command(name = "jpeg-compat", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide whether one block has an integer pixel antecedent.
    VerifyBlock(VerifyArgs),
    /// Proportion of incompatible blocks against the number of +-1 changes.
    IncompatRate(ExperimentArgs),
    /// Incompatible blocks against modified blocks under LSB matching.
    PayloadDetect(ExperimentArgs),
    /// Unsolved-block ratios and detector error against the search budget.
    Timing(ExperimentArgs),
}

#[derive(Args)]
struct BlockArgs {
    /// Block shape as ROWSxCOLS.
    #[arg(long, default_value = "8x8", value_parser = parse_shape)]
    shape: BlockShape,
    /// Quantization table: a text file of ROWS*COLS integers (default all ones).
    #[arg(long)]
    quant: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    block: BlockArgs,
    /// Pixel values, comma or space separated.
    #[arg(long, conflicts_with = "coeffs", required_unless_present = "coeffs")]
    pixels: Option<String>,
    /// Quantized DCT coefficients, comma or space separated.
    #[arg(long)]
    coeffs: Option<String>,
    /// Node limit of the search.
    #[arg(long)]
    budget_nodes: Option<u64>,
    /// Wall-clock limit of the search in seconds.
    #[arg(long)]
    budget_seconds: Option<f64>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    block: BlockArgs,
    /// Master seed; every random choice derives from it.
    #[arg(long)]
    seed: u64,
    /// Blocks per point.
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    /// Number of images.
    #[arg(long, default_value_t = 20)]
    images: usize,
    /// Side of the synthetic images in pixels.
    #[arg(long, default_value_t = 256)]
    image_size: usize,
    /// Blur of the synthetic images in pixels (0 for white noise).
    #[arg(long, default_value_t = 1.5)]
    smoothness: f64,
    /// Numbers of +-1 changes, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6")]
    changes: Vec<usize>,
    /// Node limits, comma separated and ascending.
    #[arg(long, value_delimiter = ',', conflicts_with = "budget_seconds")]
    budget_nodes: Vec<u64>,
    /// Wall-clock limits in seconds, comma separated and ascending.
    #[arg(long, value_delimiter = ',')]
    budget_seconds: Vec<f64>,
    /// Payload in bits per non-zero AC coefficient.
    #[arg(long, default_value_t = 0.01)]
    payload: f64,
    /// Read cover images from the PGM files of this directory.
    #[arg(long)]
    input_dir: Option<PathBuf>,
    /// Output file; `.json` selects JSON, anything else CSV. Stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_shape(s: &str) -> Result<BlockShape, String> {
    let (r, c) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected ROWSxCOLS, got {s:?}"))?;
    let rows = r.trim().parse().map_err(|_| format!("bad row count {r:?}"))?;
    let cols = c.trim().parse().map_err(|_| format!("bad column count {c:?}"))?;
    BlockShape::new(rows, cols).map_err(|e| e.to_string())
}

fn parse_ints(s: &str) -> Result<Vec<i32>, String> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| format!("not an integer: {t:?}")))
        .collect()
}

fn load_quant(path: &Path, shape: BlockShape) -> CliResult<QuantTable> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let values = parse_ints(&text).map_err(|reason| CliError::Malformed {
        path: path.to_path_buf(),
        reason,
    })?;
    QuantTable::for_shape(shape, values).map_err(|e| CliError::Malformed {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

impl BlockArgs {
    fn quant(&self) -> CliResult<QuantTable> {
        match &self.quant {
            Some(path) => load_quant(path, self.shape),
            None => Ok(QuantTable::qf100(self.shape)),
        }
    }
}

fn seconds(s: f64) -> CliResult<Duration> {
    Duration::try_from_secs_f64(s).map_err(|_| CliError::Usage(format!("invalid duration {s}")))
}

fn budget(nodes: Option<u64>, secs: Option<f64>) -> CliResult<Budget> {
    Ok(Budget {
        max_nodes: Some(nodes.unwrap_or(u64::MAX)),
        max_time: secs.map(seconds).transpose()?,
    })
}

impl ExperimentArgs {
    fn config(&self) -> CliResult<ExperimentConfig> {
        let mut cfg = ExperimentConfig::new(self.block.shape, self.seed);
        cfg.quant = self.block.quant()?;
        cfg.samples = self.samples;
        cfg.images = self.images;
        cfg.changes = self.changes.clone();
        cfg.payload = self.payload;
        cfg.budgets = if self.budget_seconds.is_empty() {
            self.budget_nodes.iter().map(|&n| Budget::nodes(n)).collect()
        } else {
            self.budget_seconds
                .iter()
                .map(|&s| Ok(Budget::time(seconds(s)?)))
                .collect::<CliResult<_>>()?
        };
        cfg.source = match &self.input_dir {
            Some(dir) if !dir.is_dir() => {
                return Err(CliError::io(
                    dir,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory"),
                ))
            }
            Some(dir) => Source::PgmDir(dir.clone()),
            None => Source::Synthetic {
                size: self.image_size,
                smoothness: self.smoothness,
            },
        };
        Ok(cfg)
    }

    fn emit(&self, rows: &[ResultRow]) -> CliResult<()> {
        match &self.out {
            Some(path) => save_rows(rows, path),
            None => write_rows(rows, Format::Csv, std::io::stdout().lock()),
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::VerifyBlock(args) => {
            let codec = BlockCodec::new(jpeg_compat::transform::dct_matrix(args.block.shape), args.block.quant()?)?;
            let input = match (&args.pixels, &args.coeffs) {
                (Some(p), _) => BlockInput::Pixels(parse_ints(p).map_err(CliError::Usage)?),
                (None, Some(c)) => BlockInput::Coeffs(parse_ints(c).map_err(CliError::Usage)?),
                (None, None) => return Err(CliError::Usage("give --pixels or --coeffs".into())),
            };
            let report = verify_block(&input, &codec, budget(args.budget_nodes, args.budget_seconds)?)?;
            std::io::stdout()
                .lock()
                .write_all(report.as_bytes())
                .map_err(|e| CliError::Output(e.to_string()))
        }
        Command::IncompatRate(args) => args.emit(&incompat_rate(&args.config()?)?),
        Command::PayloadDetect(args) => args.emit(&payload_detect(&args.config()?)?),
        Command::Timing(args) => args.emit(&timing(&args.config()?)?),
    }
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
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
