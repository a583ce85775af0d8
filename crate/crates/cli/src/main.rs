//! `raindoa`: seeded simulation studies of rain-distorted array data.
//!
//! Every subcommand writes CSV and JSON files into `--out`. On failure a
//! single JSON object `{"error": {"kind": ..., "message": ...}}` goes to
//! stderr and the process exits with a nonzero status.

mod commands;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "raindoa", version, about = "Rain-distortion DoA simulation and calibration")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML experiment file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Start from a built-in setup instead of a config file.
    #[arg(long, global = true, value_enum)]
    profile: Option<Profile>,
    /// Accept 25 mm/h `a2`, `a3` at another anchored rain rate.
    #[arg(long = "share-a2a3", global = true)]
    share_a2a3: bool,
    /// Trials per SNR point.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Snapshots per trial.
    #[arg(long, global = true)]
    snapshots: Option<usize>,
    /// SNR grid of the sweep, comma separated (dB).
    #[arg(long = "snr-grid", global = true, value_delimiter = ',', allow_hyphen_values = true)]
    snr_grid: Option<Vec<f64>>,
    /// SNR of the spectrum and distortion-recovery studies (dB).
    #[arg(long = "probe-snr", global = true, allow_hyphen_values = true)]
    probe_snr: Option<f64>,
    /// Redraw the distortion every snapshot or hold one draw per trial.
    #[arg(long = "distortion-timing", global = true, value_enum)]
    distortion_timing: Option<TimingArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TimingArg {
    Independent,
    Static,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Profile {
    /// Eight elements, 40 degrees, 50 mm/h at 200 m; requires --seed.
    Reference,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// RMSE against SNR for each configured method.
    RmseSweep,
    /// MUSIC spectra without rain, with rain, and with rain after calibration.
    Spectrum,
    /// Recovered distortion covariance against the model, per lag.
    RbRecovery,
    /// Phase-difference and magnitude-ratio densities of correlated gain pairs.
    PdfStudy {
        /// Samples per case; overrides the config file.
        #[arg(long)]
        samples: Option<usize>,
    },
    /// One synthesis: snapshot file plus its sample covariance.
    Simulate {
        /// Leave out the rain distortion.
        #[arg(long)]
        no_rain: bool,
    },
    /// Toeplitz calibration of a covariance CSV.
    Calibrate {
        /// Covariance CSV (`re,im` column pairs).
        #[arg(long)]
        input: PathBuf,
        /// Clip negative eigenvalues before the phase/magnitude split.
        #[arg(long)]
        psd_clip: bool,
    },
    /// Direction estimates from a covariance CSV.
    Estimate {
        #[arg(long)]
        input: PathBuf,
        /// Element spacing in wavelengths.
        #[arg(long, default_value_t = 0.5)]
        spacing: f64,
        #[arg(long, default_value_t = 1)]
        sources: usize,
        /// Calibrate before estimating.
        #[arg(long)]
        calibrate: bool,
        #[arg(long, value_enum, default_value = "root-music")]
        estimator: EstimatorArg,
        /// Report out-of-range roots at the nearest endfire angle.
        #[arg(long)]
        clamp: bool,
    },
    /// Fit the decorrelation coefficients to tabulated values.
    FitAlpha {
        /// CSV with `range_m,d_over_lambda,alpha`; defaults to the built-in anchors.
        #[arg(long)]
        observations: Option<PathBuf>,
        /// Fix `a2` (requires --a3) and fit only `a1`.
        #[arg(long, requires = "a3")]
        a2: Option<f64>,
        #[arg(long, requires = "a2")]
        a3: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EstimatorArg {
    Music,
    RootMusic,
}

fn error_json(kind: &str, message: &str) -> String {
    json!({ "error": { "kind": kind, "message": message } }).to_string()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", error_json("usage", e.to_string().trim()));
            return ExitCode::from(2);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_json(e.kind(), &e.to_string()));
            ExitCode::FAILURE
        }
    }
}
