//! Monte Carlo estimates of the phase-difference and magnitude-ratio densities
//! of two correlated field samples on the same wavefront.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::covariance::{DistortionCovariance, DistortionSampler};
use crate::error::{Error, Result};
use crate::rng::{block_count, BLOCK_LEN};

/// Fixed-width histogram over the half-open interval `(lo, hi]`, stored as a density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
    pub density: Vec<f64>,
    /// Samples that fell inside `(lo, hi]` and were binned.
    pub n_binned: u64,
}

impl Histogram {
    fn from_counts(lo: f64, hi: f64, counts: Vec<u64>) -> Self {
        let n_binned: u64 = counts.iter().sum();
        let w = (hi - lo) / counts.len() as f64;
        let density = counts
            .iter()
            .map(|&c| if n_binned == 0 { 0.0 } else { c as f64 / (n_binned as f64 * w) })
            .collect();
        Histogram { lo, hi, counts, density, n_binned }
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.n_bins() as f64
    }

    pub fn centers(&self) -> Vec<f64> {
        let w = self.bin_width();
        (0..self.n_bins()).map(|k| self.lo + (k as f64 + 0.5) * w).collect()
    }

    /// Binomial standard error of each density value.
    pub fn density_stderr(&self) -> Vec<f64> {
        let n = self.n_binned as f64;
        let w = self.bin_width();
        self.counts
            .iter()
            .map(|&c| {
                let p = c as f64 / n;
                (p * (1.0 - p) / n).sqrt() / w
            })
            .collect()
    }

    pub fn integral(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.bin_width()
    }

    /// Index of the bin containing `v`, if inside `(lo, hi]`.
    pub fn bin_of(&self, v: f64) -> Option<usize> {
        bin_index(self.lo, self.hi, self.n_bins(), v)
    }
}

fn bin_index(lo: f64, hi: f64, n_bins: usize, v: f64) -> Option<usize> {
    if !(v > lo && v <= hi) {
        return None;
    }
    let pos = (v - lo) / (hi - lo) * n_bins as f64;
    Some((pos.ceil() as usize).clamp(1, n_bins) - 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairPdfOptions {
    pub phase_bins: usize,
    pub ratio_bins: usize,
    pub ratio_max: f64,
}

impl Default for PairPdfOptions {
    fn default() -> Self {
        PairPdfOptions { phase_bins: 181, ratio_bins: 200, ratio_max: 5.0 }
    }
}

/// Histograms and moments of `phi = angle(b1) - angle(b2)` (degrees, wrapped
/// to `(-180, 180]`) and `r = |b1 / b2|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldPairStats {
    pub alpha: f64,
    pub n_samples: u64,
    pub phase_diff_histogram: Histogram,
    /// Normalized over the samples with `r <= ratio_max`.
    pub magnitude_ratio_histogram: Histogram,
    pub mean_phase_deg: f64,
    pub mean_phase_stderr: f64,
    pub mean_log_ratio: f64,
    pub mean_log_ratio_stderr: f64,
}

#[derive(Clone)]
struct Partial {
    phase: Vec<u64>,
    ratio: Vec<u64>,
    sum_phi: f64,
    sum_phi2: f64,
    sum_lr: f64,
    sum_lr2: f64,
}

impl Partial {
    fn new(opts: &PairPdfOptions) -> Self {
        Partial { phase: vec![0; opts.phase_bins], ratio: vec![0; opts.ratio_bins], sum_phi: 0.0, sum_phi2: 0.0, sum_lr: 0.0, sum_lr2: 0.0 }
    }

    fn merge(mut self, other: &Partial) -> Self {
        self.phase.iter_mut().zip(&other.phase).for_each(|(a, b)| *a += b);
        self.ratio.iter_mut().zip(&other.ratio).for_each(|(a, b)| *a += b);
        self.sum_phi += other.sum_phi;
        self.sum_phi2 += other.sum_phi2;
        self.sum_lr += other.sum_lr;
        self.sum_lr2 += other.sum_lr2;
        self
    }
}

/// Draws `(b1, b2)` jointly CSCG with unit variances and real correlation
/// `alpha`, and bins their phase difference and magnitude ratio.
pub fn empirical_pair_pdfs(alpha: f64, n_samples: usize, opts: &PairPdfOptions, seed: u64) -> Result<FieldPairStats> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if n_samples < 10_000 {
        return Err(Error::domain(format!("need at least 1e4 samples, got {n_samples}")));
    }
    if opts.phase_bins == 0 || opts.ratio_bins == 0 || !(opts.ratio_max > 0.0) {
        return Err(Error::domain("histogram needs at least one bin and a positive ratio range"));
    }
    let cov = DistortionCovariance::from_alphas(&[alpha], 0.5)?;
    let sampler = DistortionSampler::new(&cov)?;

    let partials: Vec<Partial> = (0..block_count(n_samples))
        .into_par_iter()
        .map(|k| {
            let len = BLOCK_LEN.min(n_samples - k * BLOCK_LEN);
            let mut buf = vec![Complex64::new(0.0, 0.0); 2 * len];
            sampler.fill_block(seed, k, &mut buf);
            let mut p = Partial::new(opts);
            for pair in buf.chunks_exact(2) {
                let (b1, b2) = (pair[0], pair[1]);
                let phi = (b1 * b2.conj()).arg().to_degrees();
                let r = b1.norm() / b2.norm();
                if let Some(i) = bin_index(-180.0, 180.0, opts.phase_bins, phi) {
                    p.phase[i] += 1;
                }
                if let Some(i) = bin_index(0.0, opts.ratio_max, opts.ratio_bins, r) {
                    p.ratio[i] += 1;
                }
                let lr = r.ln();
                p.sum_phi += phi;
                p.sum_phi2 += phi * phi;
                p.sum_lr += lr;
                p.sum_lr2 += lr * lr;
            }
            p
        })
        .collect();
    let total = partials.iter().fold(Partial::new(opts), |acc, p| acc.merge(p));

    let n = n_samples as f64;
    let mean_and_se = |s: f64, s2: f64| {
        let mean = s / n;
        let var = (s2 / n - mean * mean).max(0.0) * n / (n - 1.0);
        (mean, (var / n).sqrt())
    };
    let (mean_phase_deg, mean_phase_stderr) = mean_and_se(total.sum_phi, total.sum_phi2);
    let (mean_log_ratio, mean_log_ratio_stderr) = mean_and_se(total.sum_lr, total.sum_lr2);

    Ok(FieldPairStats {
        alpha,
        n_samples: n_samples as u64,
        phase_diff_histogram: Histogram::from_counts(-180.0, 180.0, total.phase),
        magnitude_ratio_histogram: Histogram::from_counts(0.0, opts.ratio_max, total.ratio),
        mean_phase_deg,
        mean_phase_stderr,
        mean_log_ratio,
        mean_log_ratio_stderr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bin_edges_are_left_open() {
        assert_eq!(bin_index(-180.0, 180.0, 4, -180.0), None);
        assert_eq!(bin_index(-180.0, 180.0, 4, 180.0), Some(3));
        assert_eq!(bin_index(-180.0, 180.0, 4, -90.0), Some(0));
        assert_eq!(bin_index(-180.0, 180.0, 4, -89.9), Some(1));
        assert_eq!(bin_index(0.0, 5.0, 10, 5.1), None);
    }

    #[test]
    fn odd_bin_count_centres_a_bin_on_zero() {
        let h = Histogram::from_counts(-180.0, 180.0, vec![1; 181]);
        assert!(h.centers()[90].abs() < 1e-12);
        assert!((h.integral() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn histograms_integrate_to_one() {
        let s = empirical_pair_pdfs(0.6, 50_000, &PairPdfOptions::default(), 5).unwrap();
        assert!((s.phase_diff_histogram.integral() - 1.0).abs() < 1e-6);
        assert!((s.magnitude_ratio_histogram.integral() - 1.0).abs() < 1e-6);
        assert_eq!(s.phase_diff_histogram.n_binned, 50_000);
    }

    #[test]
    fn rejects_out_of_domain() {
        let o = PairPdfOptions::default();
        assert!(empirical_pair_pdfs(0.0, 20_000, &o, 1).is_err());
        assert!(empirical_pair_pdfs(1.0, 20_000, &o, 1).is_err());
        assert!(empirical_pair_pdfs(0.5, 9_999, &o, 1).is_err());
    }

    #[test]
    fn stronger_correlation_concentrates_phase() {
        let o = PairPdfOptions::default();
        let strong = empirical_pair_pdfs(0.6470, 400_000, &o, 21).unwrap();
        let weak = empirical_pair_pdfs(0.4994, 400_000, &o, 21).unwrap();
        let zero_bin = strong.phase_diff_histogram.bin_of(0.0).unwrap();
        assert_eq!(zero_bin, 90);
        assert!(strong.phase_diff_histogram.density[zero_bin] > weak.phase_diff_histogram.density[zero_bin]);
    }

    #[test]
    fn near_zero_alpha_is_uniform_in_phase() {
        let o = PairPdfOptions { phase_bins: 36, ..Default::default() };
        let s = empirical_pair_pdfs(1e-9, 360_000, &o, 8).unwrap();
        // chi-square against the uniform law; 35 dof, 0.999 quantile ~ 66.6
        let expected = 360_000.0 / 36.0;
        let chi2: f64 = s.phase_diff_histogram.counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        assert!(chi2 < 66.6, "chi2 {chi2}");
    }

    #[test]
    fn exchangeable_moments_vanish() {
        let s = empirical_pair_pdfs(0.55, 200_000, &PairPdfOptions::default(), 13).unwrap();
        assert!(s.mean_phase_deg.abs() < 3.0 * s.mean_phase_stderr);
        assert!(s.mean_log_ratio.abs() < 3.0 * s.mean_log_ratio_stderr);
    }
}
