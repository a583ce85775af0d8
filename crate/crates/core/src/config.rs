//! TOML configuration files.
//!
//! A scenario file holds the flat keys `rain_rate_mm_hr`, `range_m`,
//! `wavelength_m`, `a1`, `a2`, `a3`. An experiment file nests the same keys
//! under `[scenario]` next to `[array]`, `[source]`, `[experiment]` and
//! `[pdf]`; anything omitted falls back to the reference setup.

use serde::{Deserialize, Serialize};

use crate::array::{ArrayConfig, DistortionTiming};
use crate::calibration::CalibrationOptions;
use crate::distortion::{anchors, AlphaCoeffs, PairPdfOptions, RainScenario};
use crate::doa::{AngleGrid, InvalidPolicy};
use crate::error::{Error, Result};
use crate::experiment::{anchor_pdf_cases, CovarianceSource, ExperimentSpec, Method, PdfCase, DEFAULT_WAVELENGTH_M};

fn parse_toml<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub rain_rate_mm_hr: f64,
    pub range_m: f64,
    pub wavelength_m: Option<f64>,
    pub a1: Option<f64>,
    pub a2: Option<f64>,
    pub a3: Option<f64>,
    /// Accept `a2`, `a3` from the 25 mm/h anchors at another anchored rate.
    #[serde(default)]
    pub share_a2_a3: bool,
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self> {
        parse_toml(text)
    }

    /// Uses explicit coefficients when all three are given, otherwise the
    /// anchor values for the rain rate.
    pub fn resolve(&self) -> Result<RainScenario> {
        let coeffs = match (self.a1, self.a2, self.a3) {
            (Some(a1), Some(a2), Some(a3)) => AlphaCoeffs::new(a1, a2, a3)?,
            (None, None, None) => anchors::anchor_coeffs(self.rain_rate_mm_hr, self.share_a2_a3)?,
            _ => return Err(Error::Config("give all of a1, a2, a3 or none of them".into())),
        };
        RainScenario::new(self.rain_rate_mm_hr, self.range_m, coeffs, self.wavelength_m.unwrap_or(DEFAULT_WAVELENGTH_M))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArraySection {
    pub n_elements: Option<usize>,
    pub spacing: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSection {
    pub theta_deg: Option<f64>,
    pub signal_power: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub snr_grid_db: Option<Vec<f64>>,
    pub n_trials: Option<usize>,
    pub n_snapshots: Option<usize>,
    pub methods: Option<Vec<Method>>,
    pub n_sources: Option<usize>,
    pub probe_snr_db: Option<f64>,
    pub lambda11: Option<f64>,
    pub grid_step_deg: Option<f64>,
    pub invalid_policy: Option<InvalidPolicy>,
    pub psd_clip: Option<bool>,
    pub covariance: Option<CovarianceSource>,
    pub distortion_timing: Option<DistortionTiming>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdfSection {
    pub cases: Option<Vec<PdfCase>>,
    pub n_samples: Option<usize>,
    pub phase_bins: Option<usize>,
    pub ratio_bins: Option<usize>,
    pub ratio_max: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub seed: Option<u64>,
    pub scenario: Option<ScenarioFile>,
    #[serde(default)]
    pub array: ArraySection,
    #[serde(default)]
    pub source: SourceSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub pdf: PdfSection,
}

/// Resolved settings of the phase/ratio density study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PdfSettings {
    pub cases: Vec<PdfCase>,
    pub n_samples: usize,
    pub options: PairPdfOptions,
}

impl ExperimentFile {
    pub fn parse(text: &str) -> Result<Self> {
        parse_toml(text)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Builds the experiment. `seed_override` wins over the file's seed; one
    /// of the two must be present.
    pub fn to_spec(&self, seed_override: Option<u64>) -> Result<ExperimentSpec> {
        let seed = seed_override
            .or(self.seed)
            .ok_or_else(|| Error::Config("a seed is required (config 'seed' or --seed)".into()))?;
        let mut spec = ExperimentSpec::reference(seed)?;
        if let Some(s) = &self.scenario {
            spec.scenario = s.resolve()?;
        }
        spec.array = ArrayConfig::new(
            self.array.n_elements.unwrap_or(spec.array.n_elements),
            self.array.spacing.unwrap_or(spec.array.spacing),
            spec.scenario.wavelength_m,
        )?;
        if let Some(v) = self.source.theta_deg {
            spec.theta_deg = v;
        }
        if let Some(v) = self.source.signal_power {
            spec.signal_power = v;
        }
        let e = &self.experiment;
        if let Some(v) = &e.snr_grid_db {
            spec.snr_grid_db = v.clone();
        }
        if let Some(v) = &e.methods {
            spec.methods = v.clone();
        }
        spec.n_trials = e.n_trials.unwrap_or(spec.n_trials);
        spec.n_snapshots = e.n_snapshots.unwrap_or(spec.n_snapshots);
        spec.n_sources = e.n_sources.unwrap_or(spec.n_sources);
        spec.probe_snr_db = e.probe_snr_db.unwrap_or(spec.probe_snr_db);
        spec.lambda11 = e.lambda11.unwrap_or(spec.lambda11);
        if let Some(step) = e.grid_step_deg {
            spec.grid = AngleGrid { step_deg: step, ..AngleGrid::default() };
        }
        spec.invalid_policy = e.invalid_policy.unwrap_or(spec.invalid_policy);
        if let Some(clip) = e.psd_clip {
            spec.calibration = CalibrationOptions { psd_clip: clip };
        }
        spec.covariance = e.covariance.unwrap_or(spec.covariance);
        spec.distortion_timing = e.distortion_timing.unwrap_or(spec.distortion_timing);
        spec.validate()?;
        Ok(spec)
    }

    pub fn pdf_settings(&self) -> PdfSettings {
        let d = PairPdfOptions::default();
        PdfSettings {
            cases: self.pdf.cases.clone().unwrap_or_else(anchor_pdf_cases),
            n_samples: self.pdf.n_samples.unwrap_or(1_000_000),
            options: PairPdfOptions {
                phase_bins: self.pdf.phase_bins.unwrap_or(d.phase_bins),
                ratio_bins: self.pdf.ratio_bins.unwrap_or(d.ratio_bins),
                ratio_max: self.pdf.ratio_max.unwrap_or(d.ratio_max),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn explicit_scenario_file() {
        let s = ScenarioFile::parse("rain_rate_mm_hr = 12.5\nrange_m = 150\na1 = 0.01\na2 = 0.02\na3 = 0.3\nwavelength_m = 0.004\n").unwrap();
        let r = s.resolve().unwrap();
        assert_eq!(r.coeffs, AlphaCoeffs { a1: 0.01, a2: 0.02, a3: 0.3 });
        assert_eq!(r.wavelength_m, 0.004);
    }

    #[test]
    fn anchored_rates_and_shared_shape() {
        let at25 = ScenarioFile::parse("rain_rate_mm_hr = 25\nrange_m = 200\n").unwrap();
        assert!(at25.resolve().is_ok());
        let at50 = ScenarioFile::parse("rain_rate_mm_hr = 50\nrange_m = 200\n").unwrap();
        assert!(matches!(at50.resolve(), Err(Error::Config(_))));
        let shared = ScenarioFile::parse("rain_rate_mm_hr = 50\nrange_m = 200\nshare_a2_a3 = true\n").unwrap();
        assert!(shared.resolve().is_ok());
        let partial = ScenarioFile::parse("rain_rate_mm_hr = 25\nrange_m = 200\na1 = 0.1\n").unwrap();
        assert!(partial.resolve().is_err());
        assert!(ScenarioFile::parse("rain_rate_mm_hr = 25\nrange_m = 200\nbogus = 1\n").is_err());
    }

    #[test]
    fn experiment_file_overrides_reference() {
        let text = r#"
seed = 99
[array]
n_elements = 6
[experiment]
snr_grid_db = [0.0, 10.0]
n_trials = 7
methods = ["music:calibrated"]
invalid_policy = "clamp"
covariance = "analytic"
distortion_timing = "static"
[pdf]
n_samples = 20000
cases = [{ label = "x", alpha = 0.3 }]
"#;
        let f = ExperimentFile::parse(text).unwrap();
        let spec = f.to_spec(None).unwrap();
        assert_eq!(spec.seed, 99);
        assert_eq!(spec.array.n_elements, 6);
        assert_eq!(spec.n_trials, 7);
        assert_eq!(spec.methods, vec!["music:calibrated".parse().unwrap()]);
        assert_eq!(spec.invalid_policy, InvalidPolicy::Clamp);
        assert_eq!(spec.covariance, CovarianceSource::Analytic);
        assert_eq!(spec.distortion_timing, DistortionTiming::Static);
        assert_eq!(f.to_spec(Some(5)).unwrap().seed, 5);
        let pdf = f.pdf_settings();
        assert_eq!(pdf.n_samples, 20000);
        assert_eq!(pdf.cases.len(), 1);
    }

    #[test]
    fn seed_required() {
        let f = ExperimentFile::parse("").unwrap();
        assert!(matches!(f.to_spec(None), Err(Error::Config(_))));
        assert_eq!(f.pdf_settings().cases.len(), 4);
    }
}
