mod commands;
mod manifest;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "wavecwt", version, about = "Physical-wavelet analysis and synthesis of 3-D wave fields")]
struct Cli {
    /// Worker threads (falls back to WAVECWT_THREADS, then to the hardware count)
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// List catalog wavelets and their parameters
    Catalog,
    /// Compute the admissibility constant of a catalog wavelet
    Admissibility(AdmissibilityArgs),
    /// Wavelet coefficients of a field
    Analyze(AnalyzeArgs),
    /// Field at time t from stored coefficients
    Synthesize(SynthesizeArgs),
    /// Solve the initial-value problem
    Ivp(IvpArgs),
    /// Run a verification check and report pass/fail
    #[command(subcommand)]
    Verify(VerifyCommand),
    /// Write a test field
    MakeField(MakeFieldArgs),
}

/// Catalog wavelet selection. A `reversed:` prefix applies time reversal.
#[derive(Debug, Clone, Args, Serialize)]
pub struct WaveletArgs {
    #[arg(long)]
    pub wavelet: String,
    /// Wavelet parameter as key=value (repeatable)
    #[arg(long = "param", value_name = "KEY=VALUE")]
    pub params: Vec<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct NuGridArgs {
    /// Smallest dilation (default: chosen from the data's band)
    #[arg(long)]
    pub a_min: Option<f64>,
    /// Largest dilation (default: chosen from the data's band)
    #[arg(long)]
    pub a_max: Option<f64>,
    #[arg(long, default_value_t = 24)]
    pub n_a: usize,
    #[arg(long, default_value_t = 16)]
    pub n_theta1: usize,
    #[arg(long, default_value_t = 8)]
    pub n_theta2: usize,
    #[arg(long, default_value_t = 8)]
    pub n_theta3: usize,
    /// Fraction of the admissibility integral covered when the range is automatic
    #[arg(long, default_value_t = 0.999)]
    pub coverage: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum SignArg {
    Plus,
    Minus,
}

#[derive(Debug, Args, Serialize)]
pub struct AdmissibilityArgs {
    #[command(flatten)]
    pub wavelet: WaveletArgs,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub input: String,
    #[command(flatten)]
    pub wavelet: WaveletArgs,
    #[command(flatten)]
    pub nu: NuGridArgs,
    /// Subspace of the analysing wavelet (default: the wavelet's own)
    #[arg(long, value_enum)]
    pub sign: Option<SignArg>,
    /// Wave speed (default: from the input header, else 1)
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub out: String,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthesizeArgs {
    #[arg(long)]
    pub coeffs: String,
    /// Synthesis wavelet (default: the wavelet recorded in the coefficient file)
    #[arg(long)]
    pub wavelet: Option<String>,
    #[arg(long = "param", value_name = "KEY=VALUE")]
    pub params: Vec<String>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub t: f64,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub out: String,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum IvpMethod {
    Wavelet,
    Fourier,
}

#[derive(Debug, Args, Serialize)]
pub struct IvpArgs {
    #[arg(long)]
    pub w: String,
    #[arg(long)]
    pub v: String,
    #[arg(long, default_value = "kaiser")]
    pub wavelet_plus: String,
    /// Defaults to the time reversal of the plus wavelet
    #[arg(long)]
    pub wavelet_minus: Option<String>,
    #[arg(long = "param", value_name = "KEY=VALUE")]
    pub params: Vec<String>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub t: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, value_enum, default_value_t = IvpMethod::Wavelet)]
    pub method: IvpMethod,
    #[command(flatten)]
    pub nu: NuGridArgs,
    #[arg(long)]
    pub out: String,
}

#[derive(Debug, Subcommand)]
enum VerifyCommand {
    /// d'Alembertian residual of three snapshots or of a sampled wavelet
    Residual(ResidualArgs),
    /// Relative L² difference of two fields
    Compare(CompareArgs),
    /// Isometry defect of a field's coefficients
    Isometry(IsometryArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct ResidualArgs {
    /// Three snapshot files at t − dt, t, t + dt
    #[arg(long, num_args = 3, value_name = "FILE", conflicts_with = "wavelet")]
    pub snapshots: Option<Vec<String>>,
    #[arg(long, requires = "snapshots")]
    pub dt: Option<f64>,
    /// Catalog wavelet sampled on successively halved grids
    #[arg(long)]
    pub wavelet: Option<String>,
    #[arg(long = "param", value_name = "KEY=VALUE")]
    pub params: Vec<String>,
    /// Points per axis on the coarsest level
    #[arg(long, default_value_t = 40)]
    pub n: usize,
    /// Side of the sampled cube
    #[arg(long, default_value_t = 4.0)]
    pub length: f64,
    #[arg(long, default_value_t = 0.3, allow_hyphen_values = true)]
    pub t: f64,
    #[arg(long, default_value_t = 2)]
    pub levels: usize,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, default_value_t = 1e-2)]
    pub tol: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct CompareArgs {
    #[arg(long)]
    pub a: String,
    #[arg(long)]
    pub b: String,
    #[arg(long, default_value_t = 5e-2)]
    pub tol: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct IsometryArgs {
    #[arg(long)]
    pub input: String,
    #[command(flatten)]
    pub wavelet: WaveletArgs,
    #[command(flatten)]
    pub nu: NuGridArgs,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long, default_value_t = 2e-2)]
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    /// Lattice plane wave exp(i k·r)
    Tone,
    /// Gaussian pulse
    Gaussian,
    /// Random spectrum on a shell of wavenumbers
    Shell,
    /// Sampled catalog wavelet
    Wavelet,
}

#[derive(Debug, Args, Serialize)]
pub struct MakeFieldArgs {
    #[arg(long, value_enum)]
    pub kind: FieldKind,
    /// Points per axis of the cube
    #[arg(long, default_value_t = 32)]
    pub n: usize,
    /// Side of the centred cube (default 2π)
    #[arg(long)]
    pub length: Option<f64>,
    /// Lattice indices of a tone
    #[arg(long, value_delimiter = ',', default_values_t = [1i64, 0, 0], allow_hyphen_values = true)]
    pub mode: Vec<i64>,
    #[arg(long, default_value_t = 0.5)]
    pub sigma: f64,
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.0, 0.0], allow_hyphen_values = true)]
    pub center: Vec<f64>,
    /// Shell limits in units of the lattice wavenumber 2π/L
    #[arg(long, value_delimiter = ',', default_values_t = [4.0, 12.0])]
    pub band: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub wavelet: Option<String>,
    #[arg(long = "param", value_name = "KEY=VALUE")]
    pub params: Vec<String>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub t: f64,
    /// Write the time derivative instead of the value (wavelet kind)
    #[arg(long)]
    pub time_derivative: bool,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long)]
    pub out: String,
}

/// Failure of a command: a library error, a usage problem found after
/// parsing, or a verification check that did not pass.
#[derive(Debug)]
pub enum Failure {
    Domain(wavecwt::Error),
    Usage(String),
    CheckFailed(String),
}

impl From<wavecwt::Error> for Failure {
    fn from(e: wavecwt::Error) -> Self {
        Failure::Domain(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Domain(wavecwt::Error::Io(e))
    }
}

fn error_line(kind: &str, message: &str) {
    eprintln!("{}", serde_json::json!({ "error": kind, "message": message }));
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, String> {
    if let Some(n) = flag {
        return Ok(Some(n));
    }
    match std::env::var("WAVECWT_THREADS") {
        Ok(v) if !v.trim().is_empty() => {
            v.trim().parse().map(Some).map_err(|_| format!("WAVECWT_THREADS is not a thread count: `{v}`"))
        }
        _ => Ok(None),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            error_line("usage", e.to_string().trim());
            return ExitCode::from(2);
        }
    };
    let threads = match thread_count(cli.threads) {
        Ok(t) => t,
        Err(msg) => {
            error_line("usage", &msg);
            return ExitCode::from(2);
        }
    };
    if let Some(n) = threads {
        if n == 0 {
            error_line("usage", "thread count must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            error_line("usage", &e.to_string());
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Catalog => commands::catalog(),
        Command::Admissibility(a) => commands::admissibility(&a),
        Command::Analyze(a) => commands::analyze(&a),
        Command::Synthesize(a) => commands::synthesize(&a),
        Command::Ivp(a) => commands::ivp(&a),
        Command::Verify(VerifyCommand::Residual(a)) => commands::verify_residual(&a),
        Command::Verify(VerifyCommand::Compare(a)) => commands::verify_compare(&a),
        Command::Verify(VerifyCommand::Isometry(a)) => commands::verify_isometry(&a),
        Command::MakeField(a) => commands::make_field(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Domain(e)) => {
            error_line(e.kind(), &e.to_string());
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            error_line("usage", &msg);
            ExitCode::from(2)
        }
        Err(Failure::CheckFailed(msg)) => {
            error_line("check_failed", &msg);
            ExitCode::from(1)
        }
    }
}
