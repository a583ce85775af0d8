//! Seeded Monte Carlo studies: RMSE against SNR, distortion-covariance
//! recovery, three-condition MUSIC spectra and phase/ratio densities.
//!
//! Trial `t` at SNR index `i` draws from `derive_seed(seed, [tag, i, t])`,
//! trials run on the rayon pool, and per-trial results are reduced in trial
//! order, so outputs do not depend on the number of threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::array::{analytic_covariance, sample_covariance, synthesize_snapshots_with, ArrayConfig, DistortionTiming, SourceConfig};
use crate::calibration::{calibrate_with, CalibrationOptions};
use crate::distortion::{
    anchors, build_distortion_covariance, empirical_pair_pdfs, AlphaCoeffs, DistortionCovariance, FieldPairStats,
    PairPdfOptions, RainScenario,
};
use crate::doa::{music_spectrum, root_music, AngleGrid, InvalidPolicy, SpectrumResult};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::rng::derive_seed;

const TAG_RMSE: u64 = 0x12;
const TAG_SPECTRUM: u64 = 0x5E;
const TAG_RB: u64 = 0xB0;
const TAG_PDF: u64 = 0xDF;

/// Speed of light used to turn a carrier frequency into a wavelength.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Music,
    RootMusic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// Rain-distorted data, sample covariance used as is.
    Uncalibrated,
    /// Rain-distorted data, phase matrix from the Toeplitz calibration.
    Calibrated,
    /// Undistorted data.
    NoRain,
}

/// An estimator applied under one data condition, written `estimator:condition`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Method {
    pub estimator: Estimator,
    pub condition: Condition,
}

impl Method {
    pub const fn new(estimator: Estimator, condition: Condition) -> Self {
        Method { estimator, condition }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let e = match self.estimator {
            Estimator::Music => "music",
            Estimator::RootMusic => "root_music",
        };
        let c = match self.condition {
            Condition::Uncalibrated => "uncalibrated",
            Condition::Calibrated => "calibrated",
            Condition::NoRain => "no_rain",
        };
        write!(f, "{e}:{c}")
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (e, c) = s.split_once(':').ok_or_else(|| Error::Config(format!("method '{s}' is not 'estimator:condition'")))?;
        let estimator = match e {
            "music" => Estimator::Music,
            "root_music" => Estimator::RootMusic,
            _ => return Err(Error::Config(format!("unknown estimator '{e}'"))),
        };
        let condition = match c {
            "uncalibrated" => Condition::Uncalibrated,
            "calibrated" => Condition::Calibrated,
            "no_rain" => Condition::NoRain,
            _ => return Err(Error::Config(format!("unknown condition '{c}'"))),
        };
        Ok(Method { estimator, condition })
    }
}

impl TryFrom<String> for Method {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Method> for String {
    fn from(m: Method) -> String {
        m.to_string()
    }
}

/// Sample covariances from simulated snapshots, or the exact covariance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceSource {
    #[default]
    Sampled,
    Analytic,
}

/// Everything needed to reproduce a study. Noise power is always derived
/// from an SNR, so the source is described by direction and power only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub scenario: RainScenario,
    pub array: ArrayConfig,
    pub theta_deg: f64,
    pub signal_power: f64,
    pub lambda11: f64,
    pub snr_grid_db: Vec<f64>,
    pub n_trials: usize,
    pub n_snapshots: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub n_sources: usize,
    /// SNR of the spectrum comparison and distortion-recovery studies.
    pub probe_snr_db: f64,
    pub grid: AngleGrid,
    pub invalid_policy: InvalidPolicy,
    pub calibration: CalibrationOptions,
    pub covariance: CovarianceSource,
    /// Only affects sampled covariances.
    #[serde(default)]
    pub distortion_timing: DistortionTiming,
}

/// 77 GHz automotive radar band.
pub const DEFAULT_WAVELENGTH_M: f64 = SPEED_OF_LIGHT / 77e9;

impl ExperimentSpec {
    /// Eight-element half-wavelength array, source at 40 degrees, 50 mm/h of
    /// rain at 200 m. The 50 mm/h coefficients share `a2`, `a3` with the
    /// 25 mm/h anchor fit.
    pub fn reference(seed: u64) -> Result<Self> {
        let coeffs = anchors::anchor_coeffs(50.0, true)?;
        Self::reference_with(seed, coeffs)
    }

    fn reference_with(seed: u64, coeffs: AlphaCoeffs) -> Result<Self> {
        let scenario = RainScenario::new(50.0, 200.0, coeffs, DEFAULT_WAVELENGTH_M)?;
        Ok(ExperimentSpec {
            scenario,
            array: ArrayConfig::new(8, 0.5, DEFAULT_WAVELENGTH_M)?,
            theta_deg: 40.0,
            signal_power: 1.0,
            lambda11: 0.5,
            snr_grid_db: vec![-10.0, 0.0, 10.0, 20.0, 30.0],
            n_trials: 500,
            n_snapshots: 1000,
            seed,
            methods: vec![
                Method::new(Estimator::RootMusic, Condition::Calibrated),
                Method::new(Estimator::RootMusic, Condition::Uncalibrated),
                Method::new(Estimator::RootMusic, Condition::NoRain),
            ],
            n_sources: 1,
            probe_snr_db: 20.0,
            grid: AngleGrid::default(),
            invalid_policy: InvalidPolicy::Exclude,
            calibration: CalibrationOptions::default(),
            covariance: CovarianceSource::Sampled,
            distortion_timing: DistortionTiming::Independent,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.array.validate()?;
        SourceConfig::new(self.theta_deg, self.signal_power, 0.0)?;
        if self.n_trials == 0 {
            return Err(Error::Config("n_trials must be at least 1".into()));
        }
        if self.n_snapshots == 0 {
            return Err(Error::Config("n_snapshots must be at least 1".into()));
        }
        if self.snr_grid_db.is_empty() || self.snr_grid_db.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("snr grid must be non-empty and finite".into()));
        }
        if !(self.lambda11.is_finite() && self.lambda11 > 0.0) {
            return Err(Error::Config("lambda11 must be positive".into()));
        }
        if self.n_sources == 0 || self.n_sources >= self.array.n_elements {
            return Err(Error::Config("need 1 <= n_sources < n_elements".into()));
        }
        self.grid.points()?;
        Ok(())
    }

    pub fn distortion(&self) -> Result<DistortionCovariance> {
        build_distortion_covariance(&self.scenario, &self.array, self.lambda11)
    }

    pub fn source_at(&self, snr_db: f64) -> Result<SourceConfig> {
        SourceConfig::with_snr(self.theta_deg, self.signal_power, 2.0 * self.lambda11, snr_db)
    }
}

/// Root-mean-square error of one method at one SNR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseRecord {
    pub snr_db: f64,
    pub method: Method,
    /// `None` when no trial produced a usable estimate.
    pub rmse_deg: Option<f64>,
    /// Fraction of trials whose estimate was invalid or failed.
    pub invalid_rate: f64,
    pub n_trials: usize,
    pub n_valid: usize,
    pub n_failed: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy)]
enum Outcome {
    Estimate { theta: f64, valid: bool },
    Failed,
}

fn estimate(r: &CMatrix, estimator: Estimator, spec: &ExperimentSpec, grid: &[f64]) -> Outcome {
    let result = match estimator {
        Estimator::Music => music_spectrum(r, spec.n_sources, spec.array.spacing, grid).map(|s| match s.top_peak() {
            Some(theta) => Outcome::Estimate { theta, valid: true },
            None => Outcome::Estimate { theta: f64::NAN, valid: false },
        }),
        Estimator::RootMusic => root_music(r, spec.n_sources, spec.array.spacing, spec.invalid_policy)
            .map(|e| Outcome::Estimate { theta: e[0].theta_hat_deg, valid: e[0].valid }),
    };
    result.unwrap_or_else(|e| {
        log::debug!("trial failed: {e}");
        Outcome::Failed
    })
}

struct TrialCovariances {
    rain: Option<CMatrix>,
    no_rain: Option<CMatrix>,
}

fn trial_covariances(
    spec: &ExperimentSpec,
    source: &SourceConfig,
    distortion: &DistortionCovariance,
    need_rain: bool,
    need_clear: bool,
    seed: u64,
) -> Result<TrialCovariances> {
    let build = |d: Option<&DistortionCovariance>| -> Result<CMatrix> {
        match spec.covariance {
            CovarianceSource::Analytic => analytic_covariance(&spec.array, source, d),
            CovarianceSource::Sampled => sample_covariance(&synthesize_snapshots_with(
                &spec.array,
                source,
                d,
                spec.n_snapshots,
                seed,
                spec.distortion_timing,
            )?),
        }
    };
    Ok(TrialCovariances {
        rain: need_rain.then(|| build(Some(distortion))).transpose()?,
        no_rain: need_clear.then(|| build(None)).transpose()?,
    })
}

fn run_trial(spec: &ExperimentSpec, source: &SourceConfig, distortion: &DistortionCovariance, grid: &[f64], seed: u64) -> Vec<Outcome> {
    let need_rain = spec.methods.iter().any(|m| m.condition != Condition::NoRain);
    let need_clear = spec.methods.iter().any(|m| m.condition == Condition::NoRain);
    let covs = match trial_covariances(spec, source, distortion, need_rain, need_clear, seed) {
        Ok(c) => c,
        Err(e) => {
            log::debug!("trial synthesis failed: {e}");
            return vec![Outcome::Failed; spec.methods.len()];
        }
    };
    let need_cal = spec.methods.iter().any(|m| m.condition == Condition::Calibrated);
    let calibrated = if need_cal {
        covs.rain.as_ref().and_then(|r| calibrate_with(r, &spec.calibration).ok()).map(|c| c.rx_hat)
    } else {
        None
    };
    spec.methods
        .iter()
        .map(|m| {
            let r = match m.condition {
                Condition::Uncalibrated => covs.rain.as_ref(),
                Condition::Calibrated => calibrated.as_ref(),
                Condition::NoRain => covs.no_rain.as_ref(),
            };
            r.map_or(Outcome::Failed, |r| estimate(r, m.estimator, spec, grid))
        })
        .collect()
}

/// Monte Carlo RMSE of every configured method at every SNR.
pub fn run_rmse_sweep(spec: &ExperimentSpec) -> Result<Vec<RmseRecord>> {
    spec.validate()?;
    if spec.methods.is_empty() {
        return Err(Error::Config("no methods selected".into()));
    }
    let distortion = spec.distortion()?;
    let grid = spec.grid.points()?;
    let mut records = Vec::with_capacity(spec.snr_grid_db.len() * spec.methods.len());
    for (si, &snr) in spec.snr_grid_db.iter().enumerate() {
        let source = spec.source_at(snr)?;
        let outcomes: Vec<Vec<Outcome>> = (0..spec.n_trials)
            .into_par_iter()
            .map(|t| run_trial(spec, &source, &distortion, &grid, derive_seed(spec.seed, &[TAG_RMSE, si as u64, t as u64])))
            .collect();
        for (mi, method) in spec.methods.iter().enumerate() {
            let (mut sq, mut n_valid, mut n_used, mut n_failed) = (0.0, 0, 0, 0);
            for trial in &outcomes {
                match trial[mi] {
                    Outcome::Estimate { theta, valid } => {
                        if valid {
                            n_valid += 1;
                        }
                        if theta.is_finite() && (valid || spec.invalid_policy == InvalidPolicy::Clamp) {
                            sq += (theta - spec.theta_deg).powi(2);
                            n_used += 1;
                        }
                    }
                    Outcome::Failed => n_failed += 1,
                }
            }
            records.push(RmseRecord {
                snr_db: snr,
                method: *method,
                rmse_deg: (n_used > 0).then(|| (sq / n_used as f64).sqrt()),
                invalid_rate: (spec.n_trials - n_valid) as f64 / spec.n_trials as f64,
                n_trials: spec.n_trials,
                n_valid,
                n_failed,
                seed: spec.seed,
            });
        }
    }
    Ok(records)
}

/// MUSIC spectra without rain, with rain uncalibrated, and with rain calibrated,
/// on one shared grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumComparison {
    pub snr_db: f64,
    pub seed: u64,
    pub no_rain: SpectrumResult,
    pub uncalibrated: SpectrumResult,
    pub calibrated: SpectrumResult,
}

/// The three spectra from given undistorted and distorted covariances.
pub fn spectra_from_covariances(
    spec: &ExperimentSpec,
    no_rain: &CMatrix,
    rain: &CMatrix,
) -> Result<(SpectrumResult, SpectrumResult, SpectrumResult)> {
    let grid = spec.grid.points()?;
    let k = spec.n_sources;
    let d = spec.array.spacing;
    let cal = calibrate_with(rain, &spec.calibration)?;
    Ok((
        music_spectrum(no_rain, k, d, &grid)?,
        music_spectrum(rain, k, d, &grid)?,
        music_spectrum(&cal.rx_hat, k, d, &grid)?,
    ))
}

pub fn run_spectrum_comparison(spec: &ExperimentSpec) -> Result<SpectrumComparison> {
    spec.validate()?;
    let distortion = spec.distortion()?;
    let source = spec.source_at(spec.probe_snr_db)?;
    let seed = derive_seed(spec.seed, &[TAG_SPECTRUM]);
    let covs = trial_covariances(spec, &source, &distortion, true, true, seed)?;
    let (no_rain, uncalibrated, calibrated) =
        spectra_from_covariances(spec, covs.no_rain.as_ref().expect("requested"), covs.rain.as_ref().expect("requested"))?;
    Ok(SpectrumComparison { snr_db: spec.probe_snr_db, seed: spec.seed, no_rain, uncalibrated, calibrated })
}

/// Mean recovered distortion covariance at one lag against the model value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RbRecoveryRow {
    pub lag: usize,
    pub true_value: f64,
    pub estimated_value: f64,
    pub stderr: f64,
}

/// Averages the first row of the calibrated magnitude matrix over trials.
///
/// Estimates are divided by the signal power. Lag 0 additionally carries the
/// noise power (`signal_power * 2 l11 + noise_power` before scaling).
pub fn run_rb_recovery(spec: &ExperimentSpec) -> Result<Vec<RbRecoveryRow>> {
    spec.validate()?;
    let distortion = spec.distortion()?;
    let source = spec.source_at(spec.probe_snr_db)?;
    let m = spec.array.n_elements;
    let rows: Vec<Result<Vec<f64>>> = (0..spec.n_trials)
        .into_par_iter()
        .map(|t| {
            let seed = derive_seed(spec.seed, &[TAG_RB, t as u64]);
            let covs = trial_covariances(spec, &source, &distortion, true, false, seed)?;
            let cal = calibrate_with(covs.rain.as_ref().expect("requested"), &spec.calibration)?;
            Ok((0..m).map(|k| cal.rb_hat[(0, k)] / spec.signal_power).collect())
        })
        .collect();
    let rows: Vec<Vec<f64>> = rows.into_iter().collect::<Result<_>>()?;
    let n = rows.len() as f64;
    Ok((0..m)
        .map(|k| {
            let mean = rows.iter().map(|r| r[k]).sum::<f64>() / n;
            let var = if rows.len() > 1 { rows.iter().map(|r| (r[k] - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
            RbRecoveryRow { lag: k, true_value: distortion.first_row()[k], estimated_value: mean, stderr: (var / n).sqrt() }
        })
        .collect())
}

/// One labelled decorrelation value to histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdfCase {
    pub label: String,
    pub alpha: f64,
}

/// The four anchor cases, labelled `i` to `iv`.
pub fn anchor_pdf_cases() -> Vec<PdfCase> {
    anchors::ANCHOR_CASES.iter().map(|c| PdfCase { label: c.label.to_string(), alpha: c.alpha }).collect()
}

pub fn run_pdf_study(cases: &[PdfCase], n_samples: usize, opts: &PairPdfOptions, seed: u64) -> Result<Vec<(PdfCase, FieldPairStats)>> {
    cases
        .iter()
        .enumerate()
        .map(|(i, case)| {
            let stats = empirical_pair_pdfs(case.alpha, n_samples, opts, derive_seed(seed, &[TAG_PDF, i as u64]))?;
            Ok((case.clone(), stats))
        })
        .collect()
}
