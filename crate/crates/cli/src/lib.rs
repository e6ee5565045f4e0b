//! Command-line front end for the linhlc experiments.
//!
//! Every subcommand writes its results into `--out <dir>` together with a
//! `config.json` sidecar holding the fully resolved configuration.

pub mod commands;
pub mod wav;

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use linhlc::model::{Audiogram, FilterbankConfig, BISGAARD_NAMES};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable or invalid inputs.
    Config(String),
    /// The computation itself failed.
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) | CliError::Numerical(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

impl From<linhlc::Error> for CliError {
    fn from(e: linhlc::Error) -> Self {
        use linhlc::Error as E;
        match e {
            E::SingularBin { .. } | E::Stall { .. } | E::Numerical(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "linhlc", version, about = "Linear hearing-loss compensation experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Channel center frequencies, log-spaced or placed by response decay.
    Spacing(SpacingArgs),
    /// Optimal compensation gain, FIR and restoration residual for an audiogram.
    Compensate(CompensateArgs),
    /// Gain-to-ripple ratio across channel counts and spacing strategies.
    GnrSweep(GnrSweepArgs),
    /// Long-term gain between two recordings, estimated with Welch's method.
    AnalyzeGain(AnalyzeGainArgs),
    /// Loss and SER report between two channel-response files.
    Metrics(MetricsArgs),
    /// NAL-R insertion gain, optionally realized as an FIR.
    Nalr(NalrArgs),
    /// Seeded white or speech-shaped noise.
    Noise(NoiseArgs),
    /// Filter a recording with an FIR stored as WAV.
    Filter(FilterArgs),
}

#[derive(Debug, Args)]
pub struct ModelArg {
    /// Filterbank config JSON; defaults apply to missing keys.
    #[arg(long, value_name = "JSON")]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SpacingArgs {
    #[command(flatten)]
    pub model: ModelArg,
    #[arg(long, default_value = "log", value_parser = ["log", "proposed"])]
    pub strategy: String,
    /// Number of channels (log spacing).
    #[arg(long)]
    pub k: Option<usize>,
    /// Decay threshold in (0, 1) (proposed spacing).
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub cf_min: Option<f64>,
    #[arg(long)]
    pub cf_max: Option<f64>,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompensateArgs {
    #[command(flatten)]
    pub model: ModelArg,
    /// Audiogram CSV/JSON file or a standard name (N1..N7).
    #[arg(long)]
    pub audiogram: String,
    /// Halve every threshold before compensating.
    #[arg(long)]
    pub half_gain: bool,
    /// Drop the +1 offset of the bandwidth broadening rule.
    #[arg(long)]
    pub no_plus_one: bool,
    /// Three-point smoothing of the per-channel loss.
    #[arg(long)]
    pub smooth: bool,
    #[arg(long, default_value_t = 512)]
    pub fir_taps: usize,
    #[arg(long, default_value = "hann")]
    pub window: String,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GnrSweepArgs {
    #[command(flatten)]
    pub model: ModelArg,
    #[arg(long, value_delimiter = ',', default_value = "24,32,48,64,96,128")]
    pub k: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "log,proposed")]
    pub strategies: Vec<String>,
    #[arg(long)]
    pub audiogram: String,
    #[arg(long, default_value_t = 512)]
    pub ref_k: usize,
    #[arg(long)]
    pub no_plus_one: bool,
    #[arg(long)]
    pub smooth: bool,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AnalyzeGainArgs {
    /// Unprocessed recording.
    #[arg(long = "in", value_name = "WAV")]
    pub input: PathBuf,
    /// Processed recording.
    #[arg(long = "out", value_name = "WAV")]
    pub processed: PathBuf,
    #[arg(long, default_value_t = 8192)]
    pub welch_seg: usize,
    #[arg(long, default_value_t = 0.5)]
    pub overlap: f64,
    /// DFT length per segment; defaults to the segment length.
    #[arg(long)]
    pub nfft: Option<usize>,
    #[arg(long, default_value = "hann")]
    pub window: String,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub dest: PathBuf,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Normal-hearing channel responses.
    #[arg(long, value_name = "FILE")]
    pub reference: PathBuf,
    /// Channel responses to compare.
    #[arg(long, value_name = "FILE")]
    pub test: PathBuf,
    /// Waveforms for the low-frequency penalty (both or neither).
    #[arg(long, value_name = "WAV", requires = "test_wav")]
    pub reference_wav: Option<PathBuf>,
    #[arg(long, value_name = "WAV", requires = "reference_wav")]
    pub test_wav: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, value_delimiter = ',', default_value = "1,10,100")]
    pub segments_ms: Vec<f64>,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct NalrArgs {
    #[arg(long)]
    pub audiogram: String,
    /// Also design an FIR with this many taps.
    #[arg(long)]
    pub fir_taps: Option<usize>,
    #[arg(long, default_value_t = 32000.0)]
    pub sample_rate: f64,
    /// Design grid for the FIR.
    #[arg(long, default_value_t = 8192)]
    pub nfft: usize,
    #[arg(long, default_value = "hann")]
    pub window: String,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    #[arg(long, default_value = "white")]
    pub kind: String,
    /// Seconds.
    #[arg(long, default_value_t = 10.0)]
    pub duration: f64,
    #[arg(long, default_value_t = 32000.0)]
    pub sample_rate: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Normalize to this level in dB SPL (RMS 1.0 = 100 dB SPL).
    #[arg(long)]
    pub spl: Option<f64>,
    #[arg(long, default_value = "float32")]
    pub format: String,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[arg(long = "in", value_name = "WAV")]
    pub input: PathBuf,
    /// Impulse response as a mono WAV.
    #[arg(long, value_name = "WAV")]
    pub fir: PathBuf,
    #[arg(long, default_value = "float32")]
    pub format: String,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

/// Apply `HLC_THREADS` to the global worker pool.
pub fn configure_threads() -> CliResult<()> {
    let Ok(v) = std::env::var("HLC_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Config(format!("HLC_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Spacing(a) => commands::spacing(&a),
        Command::Compensate(a) => commands::compensate(&a),
        Command::GnrSweep(a) => commands::gnr_sweep(&a),
        Command::AnalyzeGain(a) => commands::analyze_gain(&a),
        Command::Metrics(a) => commands::metrics(&a),
        Command::Nalr(a) => commands::nalr(&a),
        Command::Noise(a) => commands::noise(&a),
        Command::Filter(a) => commands::filter(&a),
    }
}

pub(crate) fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub(crate) fn load_model(arg: &ModelArg) -> CliResult<FilterbankConfig> {
    match &arg.model {
        Some(p) => Ok(FilterbankConfig::from_json(&read_text(p)?)?),
        None => Ok(FilterbankConfig::default()),
    }
}

/// An existing file is parsed by extension (`.json`, otherwise CSV);
/// anything else must name a standard audiogram.
pub(crate) fn load_audiogram(spec: &str) -> CliResult<Audiogram> {
    let path = Path::new(spec);
    if path.is_file() {
        let text = read_text(path)?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let a = if is_json { Audiogram::from_json(&text) } else { Audiogram::from_csv(&text) };
        return a.map_err(|e| CliError::Config(format!("{spec}: {e}")));
    }
    if BISGAARD_NAMES.iter().any(|n| n.eq_ignore_ascii_case(spec)) {
        return Ok(Audiogram::standard(&spec.to_ascii_uppercase())?);
    }
    Err(CliError::Config(format!(
        "audiogram '{spec}' is neither a file nor one of {}",
        BISGAARD_NAMES.join(", ")
    )))
}

/// Where an audiogram came from, for sidecars.
pub(crate) fn audiogram_source(spec: &str) -> CliResult<serde_json::Value> {
    let path = Path::new(spec);
    if path.is_file() {
        Ok(serde_json::json!({ "path": spec, "sha256": file_sha256(path)? }))
    } else {
        Ok(serde_json::json!({ "standard": spec.to_ascii_uppercase() }))
    }
}

pub(crate) fn file_sha256(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

pub(crate) fn prepare_out(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Config(format!("{}: {e}", dir.display())))
}

pub(crate) fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub(crate) fn write_json(path: &Path, value: &serde_json::Value) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("JSON values serialize");
    text.push('\n');
    write_file(path, &text)
}

pub(crate) fn write_sidecar(dir: &Path, command: &str, config: serde_json::Value) -> CliResult<()> {
    write_json(
        &dir.join("config.json"),
        &serde_json::json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "config": config,
        }),
    )
}
