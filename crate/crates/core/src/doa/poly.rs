//! Complex polynomial roots as eigenvalues of a balanced companion matrix.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;

/// Evaluates `sum_k coeffs[k] z^k` by Horner's rule, with the derivative.
pub fn eval_with_derivative(coeffs: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// Parlett-Reinsch diagonal similarity scaling by powers of two.
fn balance(a: &mut CMatrix) {
    const RADIX: f64 = 2.0;
    let n = a.nrows();
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let (mut c, mut r) = (0.0, 0.0);
            for j in (0..n).filter(|&j| j != i) {
                c += a[(j, i)].l1_norm();
                r += a[(i, j)].l1_norm();
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            while c < r / RADIX {
                f *= RADIX;
                c *= RADIX * RADIX;
            }
            while c > r * RADIX {
                f /= RADIX;
                c /= RADIX * RADIX;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                for j in 0..n {
                    a[(i, j)] = a[(i, j)].unscale(f);
                    a[(j, i)] = a[(j, i)].scale(f);
                }
            }
        }
    }
}

/// Roots of `sum_k coeffs[k] z^k` (ascending powers).
///
/// Trailing zero coefficients are dropped; each root is refined by a few
/// safeguarded Newton steps on the original polynomial.
pub fn polynomial_roots(coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::domain("polynomial coefficients must be finite and not all zero"));
    }
    let deg = coeffs.iter().rposition(|c| c.norm() > 1e-14 * scale).unwrap_or(0);
    if deg == 0 {
        return Ok(Vec::new());
    }
    let lead = coeffs[deg];
    let mut companion = CMatrix::zeros(deg, deg);
    for j in 0..deg {
        companion[(0, j)] = -coeffs[deg - 1 - j] / lead;
    }
    for i in 1..deg {
        companion[(i, i - 1)] = Complex64::new(1.0, 0.0);
    }
    balance(&mut companion);
    let eig = companion
        .schur()
        .eigenvalues()
        .ok_or_else(|| Error::Decomposition("companion matrix Schur form did not converge".into()))?;

    let poly = &coeffs[..=deg];
    Ok(eig
        .iter()
        .map(|&z0| {
            let mut z = z0;
            let mut best = eval_with_derivative(poly, z).0.norm();
            for _ in 0..3 {
                let (p, dp) = eval_with_derivative(poly, z);
                if dp.norm() == 0.0 {
                    break;
                }
                let cand = z - p / dp;
                let val = eval_with_derivative(poly, cand).0.norm();
                if val < best && cand.re.is_finite() && cand.im.is_finite() {
                    z = cand;
                    best = val;
                } else {
                    break;
                }
            }
            z
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn expand(roots: &[Complex64]) -> Vec<Complex64> {
        roots.iter().fold(vec![Complex64::new(1.0, 0.0)], |acc, &r| {
            let mut next = vec![Complex64::new(0.0, 0.0); acc.len() + 1];
            for (k, &a) in acc.iter().enumerate() {
                next[k + 1] += a;
                next[k] -= a * r;
            }
            next
        })
    }

    fn matched(found: &[Complex64], truth: &[Complex64], tol: f64) -> bool {
        let mut used = vec![false; found.len()];
        truth.iter().all(|t| {
            if let Some((i, _)) = found.iter().enumerate().filter(|(i, _)| !used[*i]).find(|(_, f)| (*f - t).norm() < tol) {
                used[i] = true;
                true
            } else {
                false
            }
        })
    }

    #[test]
    fn recovers_known_roots() {
        let truth = vec![
            Complex64::new(0.5, 0.2),
            Complex64::new(-1.2, 0.0),
            Complex64::new(0.0, 2.0),
            Complex64::cis(1.1),
            Complex64::new(3.0, -1.0),
        ];
        let roots = polynomial_roots(&expand(&truth)).unwrap();
        assert_eq!(roots.len(), 5);
        assert!(matched(&roots, &truth, 1e-10));
    }

    #[test]
    fn handles_badly_scaled_coefficients() {
        let truth = vec![Complex64::new(1e-3, 0.0), Complex64::new(1e3, 0.0), Complex64::new(1.0, 1.0)];
        let roots = polynomial_roots(&expand(&truth)).unwrap();
        for t in &truth {
            assert!(roots.iter().any(|r| ((r - t).norm() / t.norm()) < 1e-9), "missing {t}");
        }
    }

    #[test]
    fn trailing_zeros_reduce_degree() {
        let c = vec![Complex64::new(-2.0, 0.0), Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        let roots = polynomial_roots(&c).unwrap();
        assert_eq!(roots.len(), 1);
        assert!((roots[0] - Complex64::new(2.0, 0.0)).norm() < 1e-14);
        assert!(polynomial_roots(&[Complex64::new(0.0, 0.0)]).is_err());
        assert!(polynomial_roots(&[Complex64::new(3.0, 0.0)]).unwrap().is_empty());
    }
}
