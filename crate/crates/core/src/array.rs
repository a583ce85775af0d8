//! Uniform linear array snapshots under multiplicative rain distortion:
//! `y(t) = (a(theta) ⊙ b(t)) s(t) + n(t)`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::distortion::{DistortionCovariance, DistortionSampler, RainScenario, STREAM_DISTORTION};
use crate::error::{Error, Result};
use crate::linalg::{all_finite, hermitian_part, CMatrix, CVector};
use crate::rng::{self, BLOCK_LEN};

const STREAM_SIGNAL: u64 = 0x5167;
const STREAM_NOISE: u64 = 0x4015;

/// Largest aperture, in wavelengths, covered by the decorrelation model.
pub const MAX_MODEL_APERTURE: f64 = 8.0;

/// Geometry of a uniform linear array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayConfig {
    pub n_elements: usize,
    /// Element spacing in wavelengths, `d0 / lambda0`.
    pub spacing: f64,
    pub wavelength_m: f64,
}

impl ArrayConfig {
    pub fn new(n_elements: usize, spacing: f64, wavelength_m: f64) -> Result<Self> {
        let a = ArrayConfig { n_elements, spacing, wavelength_m };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_elements < 2 {
            return Err(Error::domain(format!("array needs at least 2 elements, got {}", self.n_elements)));
        }
        if !(self.spacing.is_finite() && self.spacing > 0.0) {
            return Err(Error::domain(format!("spacing must be positive, got {}", self.spacing)));
        }
        if !(self.wavelength_m.is_finite() && self.wavelength_m > 0.0) {
            return Err(Error::domain(format!("wavelength must be positive, got {}", self.wavelength_m)));
        }
        Ok(())
    }

    /// Aperture `(M - 1) * spacing` in wavelengths.
    pub fn aperture(&self) -> f64 {
        (self.n_elements - 1) as f64 * self.spacing
    }

    /// True when the aperture exceeds the decorrelation model's separation range.
    pub fn exceeds_model_aperture(&self) -> bool {
        self.aperture() > MAX_MODEL_APERTURE
    }

    /// Spacing of at most half a wavelength, so every direction maps to a unique phase.
    pub fn is_unambiguous(&self) -> bool {
        self.spacing <= 0.5
    }
}

/// Single narrowband source plus white sensor noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceConfig {
    pub theta_deg: f64,
    pub signal_power: f64,
    pub noise_power: f64,
}

impl SourceConfig {
    pub fn new(theta_deg: f64, signal_power: f64, noise_power: f64) -> Result<Self> {
        let s = SourceConfig { theta_deg, signal_power, noise_power };
        s.validate()?;
        Ok(s)
    }

    /// Source whose noise power yields `snr_db`, defined as
    /// `signal_power * distortion_variance / noise_power`.
    pub fn with_snr(theta_deg: f64, signal_power: f64, distortion_variance: f64, snr_db: f64) -> Result<Self> {
        Self::new(theta_deg, signal_power, noise_power_for_snr(signal_power, distortion_variance, snr_db))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta_deg.is_finite() && self.theta_deg.abs() < 90.0) {
            return Err(Error::domain(format!("theta must lie in (-90, 90) degrees, got {}", self.theta_deg)));
        }
        if !(self.signal_power.is_finite() && self.signal_power > 0.0) {
            return Err(Error::domain(format!("signal power must be positive, got {}", self.signal_power)));
        }
        if !(self.noise_power.is_finite() && self.noise_power >= 0.0) {
            return Err(Error::domain(format!("noise power must be non-negative, got {}", self.noise_power)));
        }
        Ok(())
    }
}

/// Per-element mean received signal power over noise power.
pub fn noise_power_for_snr(signal_power: f64, distortion_variance: f64, snr_db: f64) -> f64 {
    signal_power * distortion_variance / 10f64.powf(snr_db / 10.0)
}

/// Provenance of a snapshot matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub array: ArrayConfig,
    pub source: SourceConfig,
    pub scenario: Option<RainScenario>,
}

/// `M x T` matrix of array snapshots (one column per time instant).
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSet {
    pub data: CMatrix,
    pub seed: u64,
    pub meta: Option<SnapshotMeta>,
}

impl SnapshotSet {
    pub fn new(data: CMatrix, seed: u64) -> Result<Self> {
        if data.ncols() == 0 || data.nrows() == 0 {
            return Err(Error::domain("snapshot set must contain at least one snapshot"));
        }
        if !all_finite(&data) {
            return Err(Error::domain("snapshot data contains non-finite values"));
        }
        Ok(SnapshotSet { data, seed, meta: None })
    }

    pub fn n_elements(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_snapshots(&self) -> usize {
        self.data.ncols()
    }
}

#[inline]
pub(crate) fn steering_unchecked(m: usize, spacing: f64, theta_deg: f64) -> CVector {
    let omega = 2.0 * PI * spacing * theta_deg.to_radians().sin();
    CVector::from_fn(m, |k, _| Complex64::cis(omega * k as f64))
}

/// Steering vector with element `m` equal to `exp(j 2 pi m spacing sin(theta))`.
pub fn steering_vector(array: &ArrayConfig, theta_deg: f64) -> Result<CVector> {
    array.validate()?;
    if !(theta_deg.is_finite() && theta_deg.abs() < 90.0) {
        return Err(Error::domain(format!("theta must lie in (-90, 90) degrees, got {theta_deg}")));
    }
    Ok(steering_unchecked(array.n_elements, array.spacing, theta_deg))
}

fn check_distortion_dim(array: &ArrayConfig, distortion: Option<&DistortionCovariance>) -> Result<()> {
    if let Some(d) = distortion {
        if d.dim() != array.n_elements {
            return Err(Error::Dimension {
                expected: format!("{} distortion lags", array.n_elements),
                got: d.dim().to_string(),
            });
        }
    }
    Ok(())
}

/// How the distortion vector evolves over one snapshot set.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistortionTiming {
    /// A fresh draw of `b` for every snapshot.
    #[default]
    Independent,
    /// One draw of `b` held for all snapshots of the set.
    Static,
}

/// Generates `n_snapshots` columns of `y(t)` with a fresh distortion draw per
/// snapshot.
///
/// Signal, noise and distortion come from separate counter-derived streams,
/// so the same `seed` with and without distortion shares `s(t)` and `n(t)`,
/// and the distortion columns equal `sample_distortion(cov, T, seed)`.
pub fn synthesize_snapshots(
    array: &ArrayConfig,
    source: &SourceConfig,
    distortion: Option<&DistortionCovariance>,
    n_snapshots: usize,
    seed: u64,
) -> Result<SnapshotSet> {
    synthesize_snapshots_with(array, source, distortion, n_snapshots, seed, DistortionTiming::Independent)
}

/// [`synthesize_snapshots`] with a choice of distortion timing. A static
/// distortion equals the first column of `sample_distortion(cov, 1, seed)`.
pub fn synthesize_snapshots_with(
    array: &ArrayConfig,
    source: &SourceConfig,
    distortion: Option<&DistortionCovariance>,
    n_snapshots: usize,
    seed: u64,
    timing: DistortionTiming,
) -> Result<SnapshotSet> {
    array.validate()?;
    source.validate()?;
    check_distortion_dim(array, distortion)?;
    if n_snapshots == 0 {
        return Err(Error::domain("n_snapshots must be at least 1"));
    }
    let m = array.n_elements;
    let sampler = distortion.map(DistortionSampler::new).transpose()?;
    let held: Option<Vec<Complex64>> = match (&sampler, timing) {
        (Some(smp), DistortionTiming::Static) => {
            let mut block = vec![Complex64::new(0.0, 0.0); m];
            smp.fill_block(seed, 0, &mut block);
            Some(block)
        }
        _ => None,
    };
    let steer = steering_unchecked(m, array.spacing, source.theta_deg);
    let (sig_amp, noise_amp) = (source.signal_power.sqrt(), source.noise_power.sqrt());

    let mut data = DMatrix::from_element(m, n_snapshots, Complex64::new(0.0, 0.0));
    data.as_mut_slice().par_chunks_mut(m * BLOCK_LEN).enumerate().for_each(|(k, chunk)| {
        let mut rng_s = rng::stream(seed, &[STREAM_SIGNAL, k as u64]);
        let mut rng_n = rng::stream(seed, &[STREAM_NOISE, k as u64]);
        let mut rng_b = rng::stream(seed, &[STREAM_DISTORTION, k as u64]);
        let mut white = vec![Complex64::new(0.0, 0.0); m];
        let mut gain = held.clone().unwrap_or_else(|| vec![Complex64::new(1.0, 0.0); m]);
        for col in chunk.chunks_exact_mut(m) {
            if let (Some(s), None) = (&sampler, &held) {
                s.draw_into(&mut rng_b, &mut white, &mut gain);
            }
            let s = rng::complex_normal(&mut rng_s) * sig_amp;
            for ((y, a), b) in col.iter_mut().zip(steer.iter()).zip(&gain) {
                *y = a * b * s;
                if noise_amp > 0.0 {
                    *y += rng::complex_normal(&mut rng_n) * noise_amp;
                }
            }
        }
    });

    Ok(SnapshotSet {
        data,
        seed,
        meta: Some(SnapshotMeta { array: *array, source: *source, scenario: distortion.and_then(|d| d.scenario().copied()) }),
    })
}

/// `(1/T) sum_t y(t) y(t)^H` of raw snapshot columns, Hermitian-symmetrized.
pub fn sample_covariance_of(data: &CMatrix) -> Result<CMatrix> {
    if data.ncols() == 0 || data.nrows() == 0 {
        return Err(Error::domain("cannot form a covariance from an empty snapshot set"));
    }
    let r = (data * data.adjoint()).unscale(data.ncols() as f64);
    Ok(hermitian_part(&r))
}

pub fn sample_covariance(snapshots: &SnapshotSet) -> Result<CMatrix> {
    sample_covariance_of(&snapshots.data)
}

/// `signal_power * a aᴴ ⊙ R_b + noise_power * I`; `R_b` defaults to all ones.
pub fn analytic_covariance(array: &ArrayConfig, source: &SourceConfig, distortion: Option<&DistortionCovariance>) -> Result<CMatrix> {
    array.validate()?;
    source.validate()?;
    check_distortion_dim(array, distortion)?;
    let m = array.n_elements;
    let a = steering_unchecked(m, array.spacing, source.theta_deg);
    Ok(CMatrix::from_fn(m, m, |i, j| {
        let rb = distortion.map_or(1.0, |d| d.first_row()[i.abs_diff(j)]);
        let mut v = a[i] * a[j].conj() * (source.signal_power * rb);
        if i == j {
            v += source.noise_power;
        }
        v
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::frobenius;

    fn ula(m: usize) -> ArrayConfig {
        ArrayConfig::new(m, 0.5, 0.01).unwrap()
    }

    #[test]
    fn steering_examples() {
        let a0 = steering_vector(&ula(6), 0.0).unwrap();
        assert!(a0.iter().all(|z| *z == Complex64::new(1.0, 0.0)));
        let a30 = steering_vector(&ula(2), 30.0).unwrap();
        assert!((a30[0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((a30[1] - Complex64::new(0.0, 1.0)).norm() < 1e-15);
        let p = steering_vector(&ula(8), 23.0).unwrap();
        let n = steering_vector(&ula(8), -23.0).unwrap();
        assert!(p.iter().zip(n.iter()).all(|(x, y)| (x.conj() - y).norm() < 1e-15));
        assert!((p.dotc(&p).re - 8.0).abs() < 1e-12);
        assert!(steering_vector(&ula(4), 90.0).is_err());
    }

    #[test]
    fn config_flags() {
        let a = ArrayConfig::new(17, 0.5, 0.01).unwrap();
        assert!(!a.exceeds_model_aperture());
        assert!(ArrayConfig::new(18, 0.5, 0.01).unwrap().exceeds_model_aperture());
        assert!(a.is_unambiguous());
        assert!(!ArrayConfig::new(4, 0.7, 0.01).unwrap().is_unambiguous());
        assert!(ArrayConfig::new(1, 0.5, 0.01).is_err());
        assert!(SourceConfig::new(10.0, 0.0, 1.0).is_err());
        assert!(SourceConfig::new(10.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn snr_definition() {
        let s = SourceConfig::with_snr(0.0, 2.0, 1.0, 10.0).unwrap();
        assert!((s.noise_power - 0.2).abs() < 1e-15);
    }

    #[test]
    fn noiseless_undistorted_column_is_scaled_steering() {
        let array = ula(5);
        let source = SourceConfig::new(40.0, 1.0, 0.0).unwrap();
        let snaps = synthesize_snapshots(&array, &source, None, 1, 17).unwrap();
        let a = steering_vector(&array, 40.0).unwrap();
        let s = snaps.data[(0, 0)];
        for k in 0..5 {
            assert!((snaps.data[(k, 0)] - a[k] * s).norm() < 1e-14);
        }
    }

    #[test]
    fn single_snapshot_covariance_is_outer_product() {
        let y = CMatrix::from_fn(3, 1, |i, _| Complex64::new(i as f64 + 1.0, 0.5 - i as f64));
        let r = sample_covariance_of(&y).unwrap();
        let outer = &y * y.adjoint();
        assert!(frobenius(&(r - outer)) < 1e-14);
        assert!(sample_covariance_of(&CMatrix::zeros(3, 0)).is_err());
    }

    #[test]
    fn analytic_two_element_entry() {
        let array = ula(2);
        let source = SourceConfig::new(25.0, 1.5, 0.0).unwrap();
        let cov = DistortionCovariance::from_alphas(&[0.7], 0.5).unwrap();
        let r = analytic_covariance(&array, &source, Some(&cov)).unwrap();
        let expected = Complex64::cis(-2.0 * PI * 0.5 * 25f64.to_radians().sin()) * (1.5 * 0.7);
        assert!((r[(0, 1)] - expected).norm() < 1e-15);
    }

    #[test]
    fn analytic_broadside_fully_correlated() {
        let array = ula(4);
        let source = SourceConfig::new(0.0, 2.5, 0.0).unwrap();
        let r = analytic_covariance(&array, &source, Some(&DistortionCovariance::fully_correlated(4, 0.5).unwrap())).unwrap();
        assert!(r.iter().all(|z| (z - Complex64::new(2.5, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn distortion_preserves_phase_pattern() {
        let array = ula(6);
        let source = SourceConfig::new(-33.0, 1.0, 0.3).unwrap();
        let cov = DistortionCovariance::from_alphas(&[0.9, 0.8, 0.7, 0.65, 0.6], 0.5).unwrap();
        let r = analytic_covariance(&array, &source, Some(&cov)).unwrap();
        let a = steering_vector(&array, -33.0).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                if i != j {
                    let rx = a[i] * a[j].conj();
                    let d = (r[(i, j)] / rx).arg();
                    assert!(d.abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn distortion_dimension_checked() {
        let cov = DistortionCovariance::from_alphas(&[0.9], 0.5).unwrap();
        let source = SourceConfig::new(0.0, 1.0, 0.1).unwrap();
        assert!(matches!(synthesize_snapshots(&ula(4), &source, Some(&cov), 10, 1), Err(Error::Dimension { .. })));
        assert!(synthesize_snapshots(&ula(4), &source, None, 0, 1).is_err());
    }

    #[test]
    fn static_distortion_is_held_across_snapshots() {
        let array = ula(4);
        let source = SourceConfig::new(12.0, 1.0, 0.0).unwrap();
        let cov = DistortionCovariance::from_alphas(&[0.8, 0.6, 0.5], 0.5).unwrap();
        let set = synthesize_snapshots_with(&array, &source, Some(&cov), 2500, 9, DistortionTiming::Static).unwrap();
        let b = crate::distortion::sample_distortion(&cov, 1, 9).unwrap();
        let a = steering_vector(&array, 12.0).unwrap();
        for t in [0, 1, 1500, 2499] {
            for i in 1..4 {
                let got = set.data[(i, t)] / set.data[(0, t)];
                let want = a[i] * b[(i, 0)] / (a[0] * b[(0, 0)]);
                assert!((got - want).norm() < 1e-12 * want.norm());
            }
        }
        let fresh = synthesize_snapshots(&array, &source, Some(&cov), 2500, 9).unwrap();
        assert_eq!(fresh.data.column(0), set.data.column(0));
        assert_ne!(fresh.data.column(1), set.data.column(1));
    }
}
