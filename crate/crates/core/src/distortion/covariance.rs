use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use super::alpha::{alpha_empirical, RainScenario};
use crate::array::ArrayConfig;
use crate::error::{Error, Result};
use crate::rng::{self, BLOCK_LEN};

/// Tag of the random stream that feeds distortion draws.
pub(crate) const STREAM_DISTORTION: u64 = 0xD157;

/// Eigenvalues down to `-PSD_TOLERANCE * max(1, lambda_max)` count as zero.
pub const PSD_TOLERANCE: f64 = 1e-10;

/// Real symmetric Toeplitz covariance of the per-element complex gains,
/// stored by its first row `[2 l11, 2 a_1 l11, ..., 2 a_{M-1} l11]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortionCovariance {
    first_row: Vec<f64>,
    scenario: Option<RainScenario>,
    outside_validity: bool,
}

impl DistortionCovariance {
    /// Checks symmetry-compatible bounds and positive semi-definiteness.
    pub fn from_first_row(first_row: Vec<f64>) -> Result<Self> {
        if first_row.is_empty() {
            return Err(Error::domain("distortion covariance needs at least one element"));
        }
        let var = first_row[0];
        if !(var.is_finite() && var > 0.0) {
            return Err(Error::domain(format!("distortion variance must be positive, got {var}")));
        }
        if let Some((k, v)) = first_row.iter().enumerate().find(|(_, v)| !v.is_finite() || v.abs() > var * (1.0 + 1e-12)) {
            return Err(Error::domain(format!("lag {k} correlation {v} exceeds the variance {var}")));
        }
        let cov = DistortionCovariance { first_row, scenario: None, outside_validity: false };
        let min_eig = cov.min_eigenvalue();
        if min_eig < -PSD_TOLERANCE * var.max(1.0) {
            return Err(Error::Decomposition(format!("distortion covariance is not PSD (min eigenvalue {min_eig:e})")));
        }
        Ok(cov)
    }

    /// Builds `2 l11 * [1, alphas...]`.
    pub fn from_alphas(alphas: &[f64], lambda11: f64) -> Result<Self> {
        let mut row = Vec::with_capacity(alphas.len() + 1);
        row.push(2.0 * lambda11);
        row.extend(alphas.iter().map(|a| 2.0 * a * lambda11));
        Self::from_first_row(row)
    }

    /// Fully correlated gains: every element sees the same complex factor.
    pub fn fully_correlated(m: usize, lambda11: f64) -> Result<Self> {
        Self::from_alphas(&vec![1.0; m.saturating_sub(1)], lambda11)
    }

    pub fn dim(&self) -> usize {
        self.first_row.len()
    }

    pub fn first_row(&self) -> &[f64] {
        &self.first_row
    }

    pub fn lambda11(&self) -> f64 {
        self.first_row[0] / 2.0
    }

    /// Diagonal value `2 l11`.
    pub fn variance(&self) -> f64 {
        self.first_row[0]
    }

    /// Normalized correlation at `lag`.
    pub fn alpha(&self, lag: usize) -> f64 {
        self.first_row[lag] / self.first_row[0]
    }

    pub fn scenario(&self) -> Option<&RainScenario> {
        self.scenario.as_ref()
    }

    /// Whether any lag was evaluated outside the empirical model's window.
    pub fn outside_validity(&self) -> bool {
        self.outside_validity
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let m = self.dim();
        DMatrix::from_fn(m, m, |i, j| self.first_row[i.abs_diff(j)])
    }

    pub fn to_complex_matrix(&self) -> DMatrix<Complex64> {
        self.to_matrix().map(|v| Complex64::new(v, 0.0))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.to_matrix().symmetric_eigenvalues().min()
    }
}

/// Evaluates the decorrelation model at every lag of the array.
pub fn build_distortion_covariance(scenario: &RainScenario, array: &ArrayConfig, lambda11: f64) -> Result<DistortionCovariance> {
    array.validate()?;
    if !(lambda11.is_finite() && lambda11 > 0.0) {
        return Err(Error::domain(format!("lambda11 must be positive, got {lambda11}")));
    }
    if (array.wavelength_m - scenario.wavelength_m).abs() > 1e-12 * scenario.wavelength_m {
        return Err(Error::Config(format!(
            "array wavelength {} m differs from scenario wavelength {} m",
            array.wavelength_m, scenario.wavelength_m
        )));
    }
    let mut alphas = Vec::with_capacity(array.n_elements - 1);
    let mut outside = false;
    for k in 1..array.n_elements {
        let a = alpha_empirical(scenario, k as f64 * array.spacing * array.wavelength_m)?;
        outside |= a.outside_validity;
        alphas.push(a.value);
    }
    if outside {
        log::warn!("decorrelation model evaluated outside its validity window (R <= 500 m, 0.1 <= d/lambda0 <= 8)");
    }
    let mut cov = DistortionCovariance::from_alphas(&alphas, lambda11)?;
    cov.scenario = Some(*scenario);
    cov.outside_validity = outside;
    Ok(cov)
}

/// Square-root factor `F` with `F F^T = R_b`, used to colour white CN(0, I) draws.
#[derive(Debug, Clone)]
pub struct DistortionSampler {
    factor: DMatrix<f64>,
    lower: bool,
}

impl DistortionSampler {
    /// Cholesky when `R_b` is positive definite; otherwise the symmetric
    /// eigen square root with eigenvalues inside the tolerance clipped to zero.
    pub fn new(cov: &DistortionCovariance) -> Result<Self> {
        let r = cov.to_matrix();
        if let Some(ch) = r.clone().cholesky() {
            let l = ch.l();
            if l.iter().all(|v| v.is_finite()) {
                return Ok(DistortionSampler { factor: l, lower: true });
            }
        }
        let eig = r.symmetric_eigen();
        let scale = eig.eigenvalues.max().max(1.0);
        let tol = PSD_TOLERANCE * scale;
        let mut factor = eig.eigenvectors.clone();
        for (k, &lam) in eig.eigenvalues.iter().enumerate() {
            if lam < -tol {
                return Err(Error::Decomposition(format!("negative eigenvalue {lam:e} below tolerance")));
            }
            let s = if lam <= tol { 0.0 } else { lam.sqrt() };
            factor.column_mut(k).scale_mut(s);
        }
        Ok(DistortionSampler { factor, lower: false })
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    /// Writes one draw of `b` into `out` (length `M`), using `white` as scratch.
    #[inline]
    pub fn draw_into<R: Rng + ?Sized>(&self, rng: &mut R, white: &mut [Complex64], out: &mut [Complex64]) {
        let m = self.dim();
        for z in white.iter_mut() {
            *z = rng::complex_normal(rng);
        }
        for (i, o) in out.iter_mut().enumerate().take(m) {
            let cols = if self.lower { i + 1 } else { m };
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, z) in white.iter().enumerate().take(cols) {
                acc += z * self.factor[(i, j)];
            }
            *o = acc;
        }
    }

    /// Fills consecutive columns (column-major, `M` values each) of one block.
    pub(crate) fn fill_block(&self, seed: u64, block: usize, out: &mut [Complex64]) {
        let m = self.dim();
        let mut rng = rng::stream(seed, &[STREAM_DISTORTION, block as u64]);
        let mut white = vec![Complex64::new(0.0, 0.0); m];
        for col in out.chunks_exact_mut(m) {
            self.draw_into(&mut rng, &mut white, col);
        }
    }
}

/// Draws `n_snapshots` independent CSCG vectors with covariance `R_b` as the
/// columns of an `M x T` matrix.
///
/// Column blocks of `BLOCK_LEN` use counter-derived seeds, so the output
/// depends only on `seed`, not on the number of worker threads.
pub fn sample_distortion(cov: &DistortionCovariance, n_snapshots: usize, seed: u64) -> Result<DMatrix<Complex64>> {
    if n_snapshots == 0 {
        return Err(Error::domain("n_snapshots must be at least 1"));
    }
    let sampler = DistortionSampler::new(cov)?;
    let m = cov.dim();
    let mut out = DMatrix::from_element(m, n_snapshots, Complex64::new(0.0, 0.0));
    out.as_mut_slice()
        .par_chunks_mut(m * BLOCK_LEN)
        .enumerate()
        .for_each(|(k, chunk)| sampler.fill_block(seed, k, chunk));
    Ok(out)
}
