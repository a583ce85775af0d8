//! Subspace direction-of-arrival estimators for uniform linear arrays.

mod poly;

pub use poly::{eval_with_derivative, polynomial_roots};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::array::steering_unchecked;
use crate::error::{Error, Result};
use crate::linalg::{all_finite, hermitian_eigen_desc, CMatrix};

/// Pseudo-spectrum denominators are floored here.
pub const SPECTRUM_FLOOR: f64 = 1e-15;
/// Roots this close outside the unit circle still count as on it.
pub const UNIT_CIRCLE_TOL: f64 = 1e-6;

/// Signal/noise split of a Hermitian covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceDecomposition {
    /// Descending.
    pub eigenvalues: Vec<f64>,
    /// `M x (M - K)` orthonormal basis of the noise subspace.
    pub noise_subspace: CMatrix,
    pub n_sources: usize,
    /// Set when the gap between eigenvalue `K` and `K + 1` is numerically zero.
    pub degenerate_gap: bool,
}

pub fn subspace(r: &CMatrix, n_sources: usize) -> Result<SubspaceDecomposition> {
    let m = r.nrows();
    if r.ncols() != m {
        return Err(Error::Dimension { expected: "square matrix".into(), got: format!("{}x{}", r.nrows(), r.ncols()) });
    }
    if n_sources == 0 || n_sources >= m {
        return Err(Error::domain(format!("need 1 <= K < M, got K={n_sources}, M={m}")));
    }
    if !all_finite(r) {
        return Err(Error::domain("covariance contains non-finite values"));
    }
    let (eigenvalues, vectors) = hermitian_eigen_desc(r);
    let gap = eigenvalues[n_sources - 1] - eigenvalues[n_sources];
    let degenerate_gap = gap < 1e-12 * eigenvalues[0].abs();
    if degenerate_gap {
        log::debug!("no spectral gap between signal and noise eigenvalues (gap {gap:e})");
    }
    let noise_subspace = vectors.columns(n_sources, m - n_sources).into_owned();
    Ok(SubspaceDecomposition { eigenvalues, noise_subspace, n_sources, degenerate_gap })
}

/// Angles strictly inside `(lo, hi)` at integer multiples of `step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleGrid {
    pub lo_deg: f64,
    pub hi_deg: f64,
    pub step_deg: f64,
}

impl Default for AngleGrid {
    fn default() -> Self {
        AngleGrid { lo_deg: -90.0, hi_deg: 90.0, step_deg: 0.1 }
    }
}

impl AngleGrid {
    pub fn points(&self) -> Result<Vec<f64>> {
        if !(self.step_deg > 0.0 && self.lo_deg < self.hi_deg && self.lo_deg >= -90.0 && self.hi_deg <= 90.0) {
            return Err(Error::domain(format!("invalid angle grid {self:?}")));
        }
        let first = (self.lo_deg / self.step_deg).floor() as i64 + 1;
        let last = (self.hi_deg / self.step_deg).ceil() as i64 - 1;
        Ok((first..=last)
            .map(|k| k as f64 * self.step_deg)
            .filter(|&a| a > self.lo_deg && a < self.hi_deg)
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub grid_deg: Vec<f64>,
    /// Normalized so the maximum is 0 dB.
    pub pseudo_spectrum_db: Vec<f64>,
    /// Interior local maxima, strongest first.
    pub peak_angles_deg: Vec<f64>,
    pub peak_values_db: Vec<f64>,
}

impl SpectrumResult {
    pub fn top_peak(&self) -> Option<f64> {
        self.peak_angles_deg.first().copied()
    }

    /// Gap in dB between the main peak and the highest other local maximum,
    /// or the spectrum minimum when there is only one peak.
    pub fn prominence_db(&self) -> Option<f64> {
        let main = *self.peak_values_db.first()?;
        let second = match self.peak_values_db.get(1) {
            Some(&v) => v,
            None => self.pseudo_spectrum_db.iter().copied().fold(f64::INFINITY, f64::min),
        };
        Some(main - second)
    }
}

/// MUSIC pseudo-spectrum `1 / ||E_n^H a(theta)||^2` on `grid_deg`.
pub fn music_spectrum(r: &CMatrix, n_sources: usize, spacing: f64, grid_deg: &[f64]) -> Result<SpectrumResult> {
    if grid_deg.is_empty() || grid_deg.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("grid must be non-empty and strictly increasing"));
    }
    if grid_deg.iter().any(|a| !(a.abs() < 90.0)) {
        return Err(Error::domain("grid angles must lie in (-90, 90)"));
    }
    let sub = subspace(r, n_sources)?;
    let en_h = sub.noise_subspace.adjoint();
    let m = r.nrows();
    let raw: Vec<f64> = grid_deg
        .iter()
        .map(|&theta| {
            let a = steering_unchecked(m, spacing, theta);
            let denom = (&en_h * a).norm_squared().max(SPECTRUM_FLOOR);
            -10.0 * denom.log10()
        })
        .collect();
    let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pseudo_spectrum_db: Vec<f64> = raw.iter().map(|v| v - max).collect();

    let mut peaks: Vec<(f64, f64)> = (1..grid_deg.len().saturating_sub(1))
        .filter(|&i| pseudo_spectrum_db[i] > pseudo_spectrum_db[i - 1] && pseudo_spectrum_db[i] >= pseudo_spectrum_db[i + 1])
        .map(|i| (grid_deg[i], pseudo_spectrum_db[i]))
        .collect();
    peaks.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.total_cmp(&b.0)));

    Ok(SpectrumResult {
        grid_deg: grid_deg.to_vec(),
        pseudo_spectrum_db,
        peak_angles_deg: peaks.iter().map(|p| p.0).collect(),
        peak_values_db: peaks.iter().map(|p| p.1).collect(),
    })
}

/// How root-MUSIC reports roots whose phase maps outside `[-90, 90]` degrees.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InvalidPolicy {
    /// Mark invalid; callers exclude it from error statistics.
    #[default]
    Exclude,
    /// Mark invalid but report the nearest endfire angle.
    Clamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootEstimate {
    pub theta_hat_deg: f64,
    pub valid: bool,
    pub root: Complex64,
}

/// Coefficients (ascending powers of `z`) of `z^{M-1} a(1/z)^T C a(z)` with
/// `C = E_n E_n^H`: coefficient `k + M - 1` is the sum of diagonal `k` of `C`.
pub fn root_music_polynomial(noise_subspace: &CMatrix) -> Vec<Complex64> {
    let c = noise_subspace * noise_subspace.adjoint();
    let m = c.nrows();
    let mut coeffs = vec![Complex64::new(0.0, 0.0); 2 * m - 1];
    for i in 0..m {
        for j in 0..m {
            coeffs[j + m - 1 - i] += c[(i, j)];
        }
    }
    coeffs
}

/// Root-MUSIC for a uniform linear array with element spacing `spacing`
/// (in wavelengths). Returns `K` estimates, most confident first.
///
/// Picks the `K` roots inside the unit circle (allowing `UNIT_CIRCLE_TOL`
/// for roots that sit on it) nearest the circle, skipping roots that
/// duplicate the phase of one already taken.
pub fn root_music(r: &CMatrix, n_sources: usize, spacing: f64, policy: InvalidPolicy) -> Result<Vec<RootEstimate>> {
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(Error::domain(format!("spacing must be positive, got {spacing}")));
    }
    let sub = subspace(r, n_sources)?;
    let roots = polynomial_roots(&root_music_polynomial(&sub.noise_subspace))?;
    let mut candidates: Vec<Complex64> = roots.into_iter().filter(|z| z.norm() <= 1.0 + UNIT_CIRCLE_TOL).collect();
    candidates.sort_by(|a, b| (1.0 - a.norm()).abs().total_cmp(&(1.0 - b.norm()).abs()));

    let mut chosen: Vec<Complex64> = Vec::with_capacity(n_sources);
    for z in candidates {
        if chosen.len() == n_sources {
            break;
        }
        if chosen.iter().any(|c| (c.arg() - z.arg()).abs() < UNIT_CIRCLE_TOL) {
            continue;
        }
        chosen.push(z);
    }
    if chosen.len() < n_sources {
        return Err(Error::Decomposition(format!("only {} usable roots for {} sources", chosen.len(), n_sources)));
    }

    Ok(chosen
        .into_iter()
        .map(|z| {
            let s = z.arg() / (2.0 * PI * spacing);
            if s.abs() <= 1.0 {
                RootEstimate { theta_hat_deg: s.asin().to_degrees(), valid: true, root: z }
            } else {
                let theta = match policy {
                    InvalidPolicy::Exclude => f64::NAN,
                    InvalidPolicy::Clamp => 90.0_f64.copysign(s),
                };
                RootEstimate { theta_hat_deg: theta, valid: false, root: z }
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::{analytic_covariance, ArrayConfig, SourceConfig};

    fn rank_one(m: usize, theta: f64) -> CMatrix {
        let a = steering_unchecked(m, 0.5, theta);
        &a * a.adjoint()
    }

    #[test]
    fn noise_subspace_orthogonal_to_steering() {
        let r = rank_one(8, 40.0);
        let sub = subspace(&r, 1).unwrap();
        let a = steering_unchecked(8, 0.5, 40.0);
        assert!((sub.noise_subspace.adjoint() * a).norm() < 1e-10);
        let gram = sub.noise_subspace.adjoint() * &sub.noise_subspace;
        assert!((gram - CMatrix::identity(7, 7)).norm() < 1e-10);
        assert!(!sub.degenerate_gap);
    }

    #[test]
    fn identity_has_no_gap() {
        let sub = subspace(&CMatrix::identity(4, 4), 1).unwrap();
        assert!(sub.degenerate_gap);
        assert!(subspace(&CMatrix::identity(4, 4), 4).is_err());
        assert!(subspace(&CMatrix::identity(4, 4), 0).is_err());
    }

    #[test]
    fn rank_one_plus_noise_spectrum() {
        let array = ArrayConfig::new(8, 0.5, 0.01).unwrap();
        let source = SourceConfig::new(40.0, 1.0, 0.01).unwrap();
        let r = analytic_covariance(&array, &source, None).unwrap();
        let sub = subspace(&r, 1).unwrap();
        assert!((sub.eigenvalues[0] - 8.01).abs() < 1e-12);
        assert!(sub.eigenvalues[1..].iter().all(|v| (v - 0.01).abs() < 1e-12));
    }

    #[test]
    fn default_grid() {
        let g = AngleGrid::default().points().unwrap();
        assert_eq!(g.len(), 1799);
        assert!((g[0] + 89.9).abs() < 1e-12 && (g[1798] - 89.9).abs() < 1e-12);
        assert!(g.contains(&40.0));
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn music_peak_on_true_angle() {
        let grid = AngleGrid::default().points().unwrap();
        let s = music_spectrum(&rank_one(8, 40.0), 1, 0.5, &grid).unwrap();
        assert_eq!(s.top_peak(), Some(40.0));
        assert!(s.pseudo_spectrum_db.iter().all(|v| v.is_finite() && *v <= 0.0));
        assert!(s.prominence_db().unwrap() > 0.0);
    }

    #[test]
    fn root_music_exact_cases() {
        let est = root_music(&rank_one(8, 40.0), 1, 0.5, InvalidPolicy::Exclude).unwrap();
        assert!(est[0].valid);
        assert!((est[0].theta_hat_deg - 40.0).abs() < 1e-6, "{}", est[0].theta_hat_deg);
        let est0 = root_music(&rank_one(8, 0.0), 1, 0.5, InvalidPolicy::Exclude).unwrap();
        assert!(est0[0].theta_hat_deg.abs() < 1e-6);
    }

    #[test]
    fn roots_conjugate_reciprocal() {
        let array = ArrayConfig::new(6, 0.5, 0.01).unwrap();
        let r = analytic_covariance(&array, &SourceConfig::new(12.0, 1.0, 0.2).unwrap(), None).unwrap()
            + CMatrix::from_fn(6, 6, |i, j| Complex64::new(0.01 * (i as f64 - j as f64).cos(), 0.02 * (i as f64 - j as f64)));
        let sub = subspace(&crate::linalg::hermitian_part(&r), 1).unwrap();
        let roots = polynomial_roots(&root_music_polynomial(&sub.noise_subspace)).unwrap();
        for z in &roots {
            let mirror = Complex64::new(1.0, 0.0) / z.conj();
            assert!(roots.iter().any(|w| (w - mirror).norm() < 1e-8 * (1.0 + mirror.norm())), "{z} has no partner");
        }
    }

    #[test]
    fn unmappable_roots_flagged() {
        // spacing 0.25: phases beyond pi/2 cannot come from a real angle
        let a = steering_unchecked(6, 0.5, 50.0);
        let r = &a * a.adjoint();
        let est = root_music(&r, 1, 0.25, InvalidPolicy::Exclude).unwrap();
        assert!(!est[0].valid && est[0].theta_hat_deg.is_nan());
        let clamped = root_music(&r, 1, 0.25, InvalidPolicy::Clamp).unwrap();
        assert_eq!(clamped[0].theta_hat_deg, 90.0);
    }
}
