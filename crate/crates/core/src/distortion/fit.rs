//! Back-solving the decorrelation-model coefficients from tabulated alpha values.
//!
//! Taking logs, `-ln(alpha) = a1 * x(R; a2) * y(u; a3)` with
//! `x = R/(a2 R + 1)` and `y = u/(a3 u + 1)`. Rearranged,
//! `R u / (-ln alpha) = (a2 R + 1)(a3 u + 1) / a1`, which is linear in
//! `(1/a1, a3/a1)` once `a2` is fixed. A scan over `a2` using that linear
//! form seeds a Levenberg-Marquardt refinement of the log-alpha residual.

use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::alpha::{range_factor, separation_factor, AlphaCoeffs};
use crate::error::{Error, Result};

/// One tabulated value of the decorrelation parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaObservation {
    pub range_m: f64,
    pub d_over_lambda: f64,
    pub alpha: f64,
}

impl AlphaObservation {
    pub fn new(range_m: f64, d_over_lambda: f64, alpha: f64) -> Self {
        AlphaObservation { range_m, d_over_lambda, alpha }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaFit {
    pub coeffs: AlphaCoeffs,
    /// Euclidean norm of the `ln(alpha)` residuals.
    pub residual: f64,
}

fn validate(obs: &[AlphaObservation]) -> Result<()> {
    for o in obs {
        if !(o.range_m.is_finite() && o.range_m > 0.0 && o.d_over_lambda.is_finite() && o.d_over_lambda > 0.0) {
            return Err(Error::Fit(format!("range and separation must be positive: {o:?}")));
        }
        if !(o.alpha > 0.0 && o.alpha < 1.0) {
            return Err(Error::Fit(format!("alpha must lie in (0, 1): {o:?}")));
        }
    }
    Ok(())
}

fn distinct(values: impl Iterator<Item = f64>) -> usize {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.len()
}

fn log_residuals(obs: &[AlphaObservation], c: &AlphaCoeffs) -> Vec<f64> {
    obs.iter()
        .map(|o| o.alpha.ln() + c.a1 * range_factor(c.a2, o.range_m) * separation_factor(c.a3, o.d_over_lambda))
        .collect()
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn jacobian(obs: &[AlphaObservation], c: &AlphaCoeffs) -> DMatrix<f64> {
    DMatrix::from_fn(obs.len(), 3, |i, j| {
        let o = &obs[i];
        let x = range_factor(c.a2, o.range_m);
        let y = separation_factor(c.a3, o.d_over_lambda);
        match j {
            0 => x * y,
            1 => -c.a1 * y * (o.range_m * o.range_m) / (c.a2 * o.range_m + 1.0).powi(2),
            _ => -c.a1 * x * (o.d_over_lambda * o.d_over_lambda) / (c.a3 * o.d_over_lambda + 1.0).powi(2),
        }
    })
}

/// Best `(a1, a3)` for a fixed `a2` from the linearized relation.
fn linear_seed(obs: &[AlphaObservation], a2: f64) -> Option<AlphaCoeffs> {
    let n = obs.len() as f64;
    let (mut su, mut sw, mut suu, mut suw) = (0.0, 0.0, 0.0, 0.0);
    for o in obs {
        let w = o.range_m * o.d_over_lambda / (-o.alpha.ln()) / (a2 * o.range_m + 1.0);
        su += o.d_over_lambda;
        sw += w;
        suu += o.d_over_lambda * o.d_over_lambda;
        suw += o.d_over_lambda * w;
    }
    let det = n * suu - su * su;
    if det.abs() < 1e-300 {
        return None;
    }
    let q = (n * suw - su * sw) / det;
    let p = (sw - q * su) / n;
    if !(p > 0.0) {
        return None;
    }
    Some(AlphaCoeffs { a1: 1.0 / p, a2, a3: (q / p).max(0.0) })
}

fn feasible(c: &AlphaCoeffs) -> bool {
    c.a1.is_finite() && c.a1 > 0.0 && c.a2.is_finite() && c.a2 >= 0.0 && c.a3.is_finite() && c.a3 >= 0.0
}

fn levenberg_marquardt(obs: &[AlphaObservation], start: AlphaCoeffs) -> AlphaCoeffs {
    let mut c = start;
    let mut cost = sum_sq(&log_residuals(obs, &c));
    let mut damping = 1e-3;
    for _ in 0..500 {
        if cost < 1e-30 {
            break;
        }
        let j = jacobian(obs, &c);
        let r = nalgebra::DVector::from_vec(log_residuals(obs, &c));
        let jtj: Matrix3<f64> = (j.transpose() * &j).fixed_view::<3, 3>(0, 0).into_owned();
        let jtr: Vector3<f64> = (j.transpose() * r).fixed_rows::<3>(0).into_owned();
        let mut improved = false;
        while damping < 1e12 {
            let mut a = jtj;
            for k in 0..3 {
                a[(k, k)] += damping * jtj[(k, k)].max(1e-300);
            }
            let Some(step) = a.lu().solve(&(-jtr)) else {
                damping *= 10.0;
                continue;
            };
            let trial = AlphaCoeffs { a1: c.a1 + step[0], a2: c.a2 + step[1], a3: c.a3 + step[2] };
            if feasible(&trial) {
                let trial_cost = sum_sq(&log_residuals(obs, &trial));
                if trial_cost < cost {
                    let rel = (step[0] / c.a1).abs().max((step[1] / c.a2.max(1e-12)).abs()).max((step[2] / c.a3.max(1e-12)).abs());
                    c = trial;
                    cost = trial_cost;
                    damping = (damping * 0.1).max(1e-15);
                    improved = true;
                    if rel < 1e-15 {
                        return c;
                    }
                    break;
                }
            }
            damping *= 10.0;
        }
        if !improved {
            break;
        }
    }
    c
}

/// Fits `(a1, a2, a3)` by least squares on `ln(alpha)`.
///
/// Needs at least three distinct `(range, d/lambda0)` pairs spanning at least
/// two ranges and two separations; otherwise `a2` or `a3` is unidentifiable.
pub fn fit_alpha_coeffs(obs: &[AlphaObservation]) -> Result<AlphaFit> {
    validate(obs)?;
    let pairs = {
        let mut v: Vec<(f64, f64)> = obs.iter().map(|o| (o.range_m, o.d_over_lambda)).collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        v.dedup();
        v.len()
    };
    if pairs < 3 {
        return Err(Error::Fit(format!("need at least 3 distinct (range, d/lambda0) pairs, got {pairs}")));
    }
    if distinct(obs.iter().map(|o| o.range_m)) < 2 || distinct(obs.iter().map(|o| o.d_over_lambda)) < 2 {
        return Err(Error::Fit("observations must span at least two ranges and two separations".into()));
    }

    let seed = std::iter::once(0.0)
        .chain((0..=160).map(|k| 10f64.powf(-8.0 + 0.0625 * k as f64)))
        .filter_map(|a2| linear_seed(obs, a2))
        .map(|c| (sum_sq(&log_residuals(obs, &c)), c))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, c)| c)
        .ok_or_else(|| Error::Fit("no feasible starting point".into()))?;

    let coeffs = levenberg_marquardt(obs, seed);

    let mut j = jacobian(obs, &coeffs);
    for mut col in j.column_iter_mut() {
        let n = col.norm();
        if n > 0.0 {
            col /= n;
        }
    }
    let sv = j.singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    if !(smin > 1e-10 * smax) {
        return Err(Error::Fit("observation set is rank-deficient at the solution".into()));
    }

    Ok(AlphaFit { coeffs, residual: sum_sq(&log_residuals(obs, &coeffs)).sqrt() })
}

/// Fits only `a1` with `a2`, `a3` held fixed (closed form in `ln(alpha)`).
///
/// Used to carry a shape fitted at one rain rate over to another rate for
/// which only the overall strength is known.
pub fn fit_rate_coefficient(obs: &[AlphaObservation], a2: f64, a3: f64) -> Result<AlphaFit> {
    validate(obs)?;
    if obs.is_empty() {
        return Err(Error::Fit("need at least one observation".into()));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for o in obs {
        let g = range_factor(a2, o.range_m) * separation_factor(a3, o.d_over_lambda);
        num += -o.alpha.ln() * g;
        den += g * g;
    }
    let coeffs = AlphaCoeffs::new(num / den, a2, a3).map_err(|e| Error::Fit(e.to_string()))?;
    Ok(AlphaFit { coeffs, residual: sum_sq(&log_residuals(obs, &coeffs)).sqrt() })
}
