use serde::Serialize;
use serde_json::json;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use raindoa::array::{sample_covariance, synthesize_snapshots_with, DistortionTiming};
use raindoa::calibration::{calibrate_with, CalibrationOptions, HtCoefficients};
use raindoa::config::{ExperimentFile, PdfSettings};
use raindoa::distortion::{alpha_model, anchors, fit_alpha_coeffs, fit_rate_coefficient, AlphaFit, AlphaObservation, PairPdfOptions};
use raindoa::doa::{music_spectrum, root_music, AngleGrid, InvalidPolicy, SpectrumResult};
use raindoa::experiment::{
    anchor_pdf_cases, run_pdf_study, run_rb_recovery, run_rmse_sweep, run_spectrum_comparison, Condition, Estimator,
    ExperimentSpec, Method,
};
use raindoa::io::{self, Document, EstimateRecord};
use raindoa::{Error, Result};

use crate::{Cli, Command, Common, EstimatorArg, Profile, TimingArg};

const DEFAULT_PDF_SAMPLES: usize = 1_000_000;

pub fn run(cli: Cli) -> Result<()> {
    let common = &cli.common;
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    std::fs::create_dir_all(&common.out)?;
    match &cli.command {
        Command::RmseSweep => rmse_sweep(common),
        Command::Spectrum => spectrum(common),
        Command::RbRecovery => rb_recovery(common),
        Command::PdfStudy { samples } => pdf_study(common, *samples),
        Command::Simulate { no_rain } => simulate(common, *no_rain),
        Command::Calibrate { input, psd_clip } => calibrate(common, input, *psd_clip),
        Command::Estimate { input, spacing, sources, calibrate, estimator, clamp } => {
            estimate(common, input, *spacing, *sources, *calibrate, *estimator, *clamp)
        }
        Command::FitAlpha { observations, a2, a3 } => fit_alpha(common, observations.as_deref(), *a2, *a3),
    }
}

fn load_file(common: &Common) -> Result<Option<ExperimentFile>> {
    match (common.profile, &common.config) {
        (Some(_), Some(_)) => Err(Error::Config("use either --config or --profile, not both".into())),
        (None, Some(path)) => {
            let mut file = ExperimentFile::load(path)?;
            if common.share_a2a3 {
                if let Some(s) = file.scenario.as_mut() {
                    s.share_a2_a3 = true;
                }
            }
            Ok(Some(file))
        }
        (Some(Profile::Reference), None) => Ok(None),
        (None, None) => Err(Error::Config("pass --config <file> or --profile reference".into())),
    }
}

fn resolve_spec(common: &Common) -> Result<ExperimentSpec> {
    let mut spec = match load_file(common)? {
        Some(file) => file.to_spec(common.seed)?,
        None => {
            let seed = common.seed.ok_or_else(|| Error::Config("--profile reference requires --seed".into()))?;
            ExperimentSpec::reference(seed)?
        }
    };
    if let Some(v) = common.trials {
        spec.n_trials = v;
    }
    if let Some(v) = common.snapshots {
        spec.n_snapshots = v;
    }
    if let Some(v) = &common.snr_grid {
        spec.snr_grid_db = v.clone();
    }
    if let Some(v) = common.probe_snr {
        spec.probe_snr_db = v;
    }
    if let Some(v) = common.distortion_timing {
        spec.distortion_timing = match v {
            TimingArg::Independent => DistortionTiming::Independent,
            TimingArg::Static => DistortionTiming::Static,
        };
    }
    spec.validate()?;
    Ok(spec)
}

fn create(out: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(out.join(name))?))
}

fn write_json<S: Serialize + ?Sized, T: Serialize>(out: &Path, name: &str, settings: &S, data: T) -> Result<()> {
    let mut w = create(out, name)?;
    serde_json::to_writer_pretty(&mut w, &Document::new(settings, data)?)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn rmse_sweep(common: &Common) -> Result<()> {
    let spec = resolve_spec(common)?;
    let records = run_rmse_sweep(&spec)?;
    let header = io::provenance(&spec)?;
    io::write_rmse_csv(create(&common.out, "rmse.csv")?, &records, &header)?;
    write_json(&common.out, "rmse.json", &spec, &records)
}

#[derive(Serialize)]
struct PeakSummary {
    peak_deg: Option<f64>,
    prominence_db: Option<f64>,
    peak_angles_deg: Vec<f64>,
    peak_values_db: Vec<f64>,
}

impl From<&SpectrumResult> for PeakSummary {
    fn from(s: &SpectrumResult) -> Self {
        PeakSummary {
            peak_deg: s.top_peak(),
            prominence_db: s.prominence_db(),
            peak_angles_deg: s.peak_angles_deg.clone(),
            peak_values_db: s.peak_values_db.clone(),
        }
    }
}

fn spectrum(common: &Common) -> Result<()> {
    let spec = resolve_spec(common)?;
    let cmp = run_spectrum_comparison(&spec)?;
    let header = io::provenance(&spec)?;
    for (name, s) in [("no_rain", &cmp.no_rain), ("uncalibrated", &cmp.uncalibrated), ("calibrated", &cmp.calibrated)] {
        let mut h = header.clone();
        h.push(format!("condition: {name}, snr_db: {}", cmp.snr_db));
        io::write_spectrum_csv(create(&common.out, &format!("spectrum_{name}.csv"))?, s, &h)?;
    }
    let summary = json!({
        "snr_db": cmp.snr_db,
        "seed": cmp.seed,
        "no_rain": PeakSummary::from(&cmp.no_rain),
        "uncalibrated": PeakSummary::from(&cmp.uncalibrated),
        "calibrated": PeakSummary::from(&cmp.calibrated),
    });
    write_json(&common.out, "spectrum.json", &spec, summary)
}

fn rb_recovery(common: &Common) -> Result<()> {
    let spec = resolve_spec(common)?;
    let rows = run_rb_recovery(&spec)?;
    let mut header = io::provenance(&spec)?;
    header.push(format!(
        "values divided by signal power; lag 0 includes the noise power, snr_db: {}",
        spec.probe_snr_db
    ));
    io::write_rb_recovery_csv(create(&common.out, "rb_recovery.csv")?, &rows, &header)?;
    write_json(&common.out, "rb_recovery.json", &spec, &rows)
}

#[derive(Serialize)]
struct PdfRun<'a> {
    seed: u64,
    #[serde(flatten)]
    settings: &'a PdfSettings,
}

fn pdf_study(common: &Common, samples: Option<usize>) -> Result<()> {
    let (mut settings, file_seed) = match load_file(common)? {
        Some(file) => (file.pdf_settings(), file.seed),
        None => (
            PdfSettings { cases: anchor_pdf_cases(), n_samples: DEFAULT_PDF_SAMPLES, options: PairPdfOptions::default() },
            None,
        ),
    };
    if let Some(n) = samples {
        settings.n_samples = n;
    }
    let seed = common
        .seed
        .or(file_seed)
        .ok_or_else(|| Error::Config("a seed is required (config 'seed' or --seed)".into()))?;
    let run = PdfRun { seed, settings: &settings };
    let header = io::provenance(&run)?;
    let results = run_pdf_study(&settings.cases, settings.n_samples, &settings.options, seed)?;
    let mut summary = Vec::with_capacity(results.len());
    for (case, stats) in &results {
        let mut h = header.clone();
        h.push(format!("case: {}, alpha: {}", case.label, case.alpha));
        io::write_histogram_csv(create(&common.out, &format!("pdf_{}_phase.csv", case.label))?, &stats.phase_diff_histogram, &h)?;
        io::write_histogram_csv(
            create(&common.out, &format!("pdf_{}_ratio.csv", case.label))?,
            &stats.magnitude_ratio_histogram,
            &h,
        )?;
        summary.push(json!({
            "label": case.label,
            "alpha": case.alpha,
            "n_samples": stats.n_samples,
            "mean_phase_deg": stats.mean_phase_deg,
            "mean_phase_stderr": stats.mean_phase_stderr,
            "mean_log_ratio": stats.mean_log_ratio,
            "mean_log_ratio_stderr": stats.mean_log_ratio_stderr,
            "ratio_samples_binned": stats.magnitude_ratio_histogram.n_binned,
        }));
    }
    write_json(&common.out, "pdf_study.json", &run, summary)
}

fn simulate(common: &Common, no_rain: bool) -> Result<()> {
    let spec = resolve_spec(common)?;
    let distortion = if no_rain { None } else { Some(spec.distortion()?) };
    let source = spec.source_at(spec.probe_snr_db)?;
    let snaps = synthesize_snapshots_with(
        &spec.array,
        &source,
        distortion.as_ref(),
        spec.n_snapshots,
        spec.seed,
        spec.distortion_timing,
    )?;
    let r = sample_covariance(&snaps)?;
    let mut header = io::provenance(&spec)?;
    header.push(format!("rain: {}, snr_db: {}", !no_rain, spec.probe_snr_db));
    io::write_snapshots_bin(create(&common.out, "snapshots.bin")?, &snaps)?;
    io::write_covariance_csv(create(&common.out, "covariance.csv")?, &r, &header)?;
    let data = json!({
        "seed": spec.seed,
        "rain": !no_rain,
        "snr_db": spec.probe_snr_db,
        "n_elements": snaps.n_elements(),
        "n_snapshots": snaps.n_snapshots(),
        "source": source,
    });
    write_json(&common.out, "simulate.json", &spec, data)
}

fn read_covariance(input: &Path) -> Result<raindoa::linalg::CMatrix> {
    io::read_covariance_csv(BufReader::new(File::open(input)?))
}

#[derive(Serialize)]
struct CalibrationSummary<'a> {
    coeffs: &'a HtCoefficients,
    residual: f64,
}

fn calibrate(common: &Common, input: &Path, psd_clip: bool) -> Result<()> {
    let r = read_covariance(input)?;
    let opts = CalibrationOptions { psd_clip };
    let cal = calibrate_with(&r, &opts)?;
    let settings = json!({ "input": input.display().to_string(), "calibration": opts });
    let header = io::provenance(&settings)?;
    io::write_covariance_csv(create(&common.out, "rx_hat.csv")?, &cal.rx_hat, &header)?;
    io::write_real_matrix_csv(create(&common.out, "rb_hat.csv")?, &cal.rb_hat, &header)?;
    write_json(&common.out, "calibration.json", &settings, CalibrationSummary { coeffs: &cal.coeffs, residual: cal.residual })
}

fn estimate(
    common: &Common,
    input: &Path,
    spacing: f64,
    sources: usize,
    calibrate: bool,
    estimator: EstimatorArg,
    clamp: bool,
) -> Result<()> {
    let mut r = read_covariance(input)?;
    if calibrate {
        r = calibrate_with(&r, &CalibrationOptions::default())?.rx_hat;
    }
    let estimator = match estimator {
        EstimatorArg::Music => Estimator::Music,
        EstimatorArg::RootMusic => Estimator::RootMusic,
    };
    let method = Method::new(estimator, if calibrate { Condition::Calibrated } else { Condition::Uncalibrated });
    let policy = if clamp { InvalidPolicy::Clamp } else { InvalidPolicy::Exclude };
    let records: Vec<EstimateRecord> = match estimator {
        Estimator::Music => {
            let s = music_spectrum(&r, sources, spacing, &AngleGrid::default().points()?)?;
            (0..sources)
                .map(|k| {
                    let theta = s.peak_angles_deg.get(k).copied();
                    EstimateRecord { theta_hat_deg: theta, valid: theta.is_some(), method }
                })
                .collect()
        }
        Estimator::RootMusic => root_music(&r, sources, spacing, policy)?
            .into_iter()
            .map(|e| EstimateRecord { theta_hat_deg: e.theta_hat_deg.is_finite().then_some(e.theta_hat_deg), valid: e.valid, method })
            .collect(),
    };
    let settings = json!({
        "input": input.display().to_string(),
        "spacing": spacing,
        "n_sources": sources,
        "method": method,
        "invalid_policy": policy,
    });
    write_json(&common.out, "estimates.json", &settings, records)
}

#[derive(Serialize)]
struct FittedPoint {
    range_m: f64,
    d_over_lambda: f64,
    alpha: f64,
    predicted: f64,
}

#[derive(Serialize)]
struct FitReport {
    rain_rate_mm_hr: Option<f64>,
    /// Which coefficients were free in the fit.
    fitted: &'static str,
    #[serde(flatten)]
    fit: AlphaFit,
    points: Vec<FittedPoint>,
}

impl FitReport {
    fn new(rain_rate_mm_hr: Option<f64>, fitted: &'static str, fit: AlphaFit, obs: &[AlphaObservation]) -> Self {
        let points = obs
            .iter()
            .map(|o| FittedPoint {
                range_m: o.range_m,
                d_over_lambda: o.d_over_lambda,
                alpha: o.alpha,
                predicted: alpha_model(&fit.coeffs, o.range_m, o.d_over_lambda),
            })
            .collect();
        FitReport { rain_rate_mm_hr, fitted, fit, points }
    }
}

fn anchor_observations(rate: f64) -> Vec<AlphaObservation> {
    anchors::ANCHOR_CASES.iter().filter(|c| c.rain_rate_mm_hr == rate).map(|c| c.observation()).collect()
}

fn fit_alpha(common: &Common, observations: Option<&Path>, a2: Option<f64>, a3: Option<f64>) -> Result<()> {
    let reports = match observations {
        Some(path) => {
            let obs = io::read_observations_csv(BufReader::new(File::open(path)?))?;
            let report = match (a2, a3) {
                (Some(a2), Some(a3)) => FitReport::new(None, "a1", fit_rate_coefficient(&obs, a2, a3)?, &obs),
                _ => FitReport::new(None, "a1,a2,a3", fit_alpha_coeffs(&obs)?, &obs),
            };
            vec![report]
        }
        None => {
            if a2.is_some() {
                return Err(Error::Config("--a2/--a3 need --observations".into()));
            }
            let mut reports = vec![FitReport::new(Some(25.0), "a1,a2,a3", anchors::fit_25mm()?, &anchor_observations(25.0))];
            if common.share_a2a3 {
                reports.push(FitReport::new(Some(50.0), "a1", anchors::fit_50mm_shared_shape()?, &anchor_observations(50.0)));
            } else {
                log::info!("50 mm/h coefficients skipped; pass --share-a2a3 to fit a1 with shared a2, a3");
            }
            reports
        }
    };
    let settings = json!({
        "observations": observations.map(|p| p.display().to_string()),
        "a2": a2,
        "a3": a3,
        "share_a2_a3": common.share_a2a3,
    });
    write_json(&common.out, "fit_alpha.json", &settings, reports)
}
