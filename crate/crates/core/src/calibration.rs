//! Hermitian-Toeplitz least-squares calibration of a distorted covariance.
//!
//! A Hermitian Toeplitz `M x M` matrix is a real combination of `2M - 1`
//! basis matrices: the identity, `T_k` (ones on diagonals `±k`) and `T~_k`
//! (`+j` on superdiagonal `k`, `-j` on subdiagonal `k`). The basis is
//! orthogonal under `Re trace(A B^H)`, so the least-squares fit to a sample
//! covariance reduces to averaging each diagonal. The fitted matrix is then
//! split into a unit-modulus phase matrix and a non-negative magnitude matrix.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{all_finite, frobenius, hermitian_eigen_desc, CMatrix};

/// Which diagonal a basis element occupies and whether it is the imaginary one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BasisIndex {
    pub lag: usize,
    pub imaginary: bool,
}

/// The `2M - 1` Hermitian-Toeplitz basis matrices, generated on demand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HtBasis {
    m: usize,
}

impl HtBasis {
    pub fn new(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::domain(format!("basis dimension must be at least 2, got {m}")));
        }
        Ok(HtBasis { m })
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        2 * self.m - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index 0 is the identity, `1..M` the real lags, `M..2M-1` the imaginary lags.
    pub fn index(&self, n: usize) -> BasisIndex {
        assert!(n < self.len(), "basis index {n} out of range");
        match n {
            0 => BasisIndex { lag: 0, imaginary: false },
            n if n < self.m => BasisIndex { lag: n, imaginary: false },
            n => BasisIndex { lag: n - (self.m - 1), imaginary: true },
        }
    }

    /// `||Sigma_n||_F^2`.
    pub fn norm_sq(&self, n: usize) -> f64 {
        match self.index(n).lag {
            0 => self.m as f64,
            lag => 2.0 * (self.m - lag) as f64,
        }
    }

    pub fn matrix(&self, n: usize) -> CMatrix {
        let BasisIndex { lag, imaginary } = self.index(n);
        CMatrix::from_fn(self.m, self.m, |i, j| {
            if lag == 0 {
                return if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
            }
            match (j as isize - i as isize, imaginary) {
                (d, false) if d.unsigned_abs() == lag => Complex64::new(1.0, 0.0),
                (d, true) if d == lag as isize => Complex64::new(0.0, 1.0),
                (d, true) if d == -(lag as isize) => Complex64::new(0.0, -1.0),
                _ => Complex64::new(0.0, 0.0),
            }
        })
    }

    pub fn matrices(&self) -> impl Iterator<Item = CMatrix> + '_ {
        (0..self.len()).map(|n| self.matrix(n))
    }
}

/// Real coefficients `c_0 .. c_{2M-2}` of a Hermitian Toeplitz matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HtCoefficients(Vec<f64>);

impl HtCoefficients {
    pub fn new(c: Vec<f64>) -> Result<Self> {
        if c.len() < 3 || c.len() % 2 == 0 {
            return Err(Error::Dimension { expected: "odd length 2M-1 with M >= 2".into(), got: c.len().to_string() });
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("coefficients must be finite"));
        }
        Ok(HtCoefficients(c))
    }

    pub fn dim(&self) -> usize {
        self.0.len().div_ceil(2)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// First row `[c_0, c_1 + j c_M, ..., c_{M-1} + j c_{2M-2}]`.
    pub fn first_row(&self) -> Vec<Complex64> {
        let m = self.dim();
        (0..m)
            .map(|k| if k == 0 { Complex64::new(self.0[0], 0.0) } else { Complex64::new(self.0[k], self.0[k + m - 1]) })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub coeffs: HtCoefficients,
    /// `||R - R_T||_F` against the unsymmetrized input.
    pub residual: f64,
}

/// Least-squares projection onto the Hermitian Toeplitz subspace.
///
/// The anti-Hermitian part of the input is orthogonal to every basis matrix,
/// so it only contributes to the residual.
pub fn ht_project(r: &CMatrix) -> Result<Projection> {
    let m = r.nrows();
    if r.ncols() != m {
        return Err(Error::Dimension { expected: "square matrix".into(), got: format!("{}x{}", r.nrows(), r.ncols()) });
    }
    if m < 2 {
        return Err(Error::domain("projection needs M >= 2"));
    }
    if !all_finite(r) {
        return Err(Error::domain("covariance contains non-finite values"));
    }
    let mut c = vec![0.0; 2 * m - 1];
    c[0] = (0..m).map(|i| r[(i, i)].re).sum::<f64>() / m as f64;
    for k in 1..m {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..m - k {
            acc += r[(i, i + k)] + r[(i + k, i)].conj();
        }
        acc /= 2.0 * (m - k) as f64;
        c[k] = acc.re;
        c[k + m - 1] = acc.im;
    }
    let coeffs = HtCoefficients::new(c)?;
    let residual = frobenius(&(r - reconstruct_rt(&coeffs)));
    Ok(Projection { coeffs, residual })
}

/// `sum_n c_n Sigma_n`.
pub fn reconstruct_rt(c: &HtCoefficients) -> CMatrix {
    let row = c.first_row();
    let m = row.len();
    CMatrix::from_fn(m, m, |i, j| if j >= i { row[j - i] } else { row[i - j].conj() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decoupled {
    /// `exp(j angle(R_T))`; zero entries map to 1.
    pub rx_hat: CMatrix,
    /// `|R_T|` entrywise.
    pub rb_hat: DMatrix<f64>,
}

/// Polar split of each entry into phase and magnitude.
pub fn decouple(rt: &CMatrix) -> Result<Decoupled> {
    if rt.nrows() != rt.ncols() {
        return Err(Error::Dimension { expected: "square matrix".into(), got: format!("{}x{}", rt.nrows(), rt.ncols()) });
    }
    if !all_finite(rt) {
        return Err(Error::domain("matrix contains non-finite values"));
    }
    let rb_hat = rt.map(|z| z.norm());
    let rx_hat = rt.zip_map(&rb_hat, |z, mag| if mag > 0.0 { z.unscale(mag) } else { Complex64::new(1.0, 0.0) });
    Ok(Decoupled { rx_hat, rb_hat })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CalibrationOptions {
    /// Clip negative eigenvalues of the fitted matrix to zero before the
    /// polar split. The result is then no longer exactly Toeplitz.
    pub psd_clip: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationOutput {
    pub coeffs: HtCoefficients,
    pub rt_hat: CMatrix,
    pub rx_hat: CMatrix,
    pub rb_hat: DMatrix<f64>,
    pub residual: f64,
}

/// Projection, reconstruction and polar split of a sample covariance.
pub fn calibrate(r: &CMatrix) -> Result<CalibrationOutput> {
    calibrate_with(r, &CalibrationOptions::default())
}

pub fn calibrate_with(r: &CMatrix, opts: &CalibrationOptions) -> Result<CalibrationOutput> {
    let Projection { coeffs, residual } = ht_project(r)?;
    let mut rt_hat = reconstruct_rt(&coeffs);
    if opts.psd_clip {
        rt_hat = clip_negative_eigenvalues(&rt_hat);
    }
    let Decoupled { rx_hat, rb_hat } = decouple(&rt_hat)?;
    Ok(CalibrationOutput { coeffs, rt_hat, rx_hat, rb_hat, residual })
}

fn clip_negative_eigenvalues(a: &CMatrix) -> CMatrix {
    let (vals, vecs) = hermitian_eigen_desc(a);
    let m = a.nrows();
    let mut out = CMatrix::zeros(m, m);
    for (k, &lam) in vals.iter().enumerate() {
        if lam > 0.0 {
            let v = vecs.column(k);
            out += (&v * v.adjoint()).scale(lam);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermitian_part, re_inner};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn two_element_basis() {
        let b = HtBasis::new(2).unwrap();
        assert_eq!(b.len(), 3);
        assert_eq!(b.matrix(0), CMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(1., 0.)]));
        assert_eq!(b.matrix(1), CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]));
        assert_eq!(b.matrix(2), CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., 1.), c(0., -1.), c(0., 0.)]));
        assert!(HtBasis::new(1).is_err());
    }

    #[test]
    fn basis_orthogonal_with_expected_norms() {
        for m in 2..=17 {
            let b = HtBasis::new(m).unwrap();
            let mats: Vec<CMatrix> = b.matrices().collect();
            for (i, a) in mats.iter().enumerate() {
                assert_eq!(re_inner(a, a), b.norm_sq(i));
                for bm in &mats[i + 1..] {
                    assert_eq!(re_inner(a, bm), 0.0);
                }
            }
            assert_eq!(b.norm_sq(0), m as f64);
        }
    }

    #[test]
    fn reconstruct_examples() {
        let id = reconstruct_rt(&HtCoefficients::new(vec![1.0, 0.0, 0.0, 0.0, 0.0]).unwrap());
        assert_eq!(id, CMatrix::identity(3, 3));
        let r = reconstruct_rt(&HtCoefficients::new(vec![1.0, 0.5, 0.25]).unwrap());
        assert_eq!(r, CMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0.5, 0.25), c(0.5, -0.25), c(1., 0.)]));
        assert!(HtCoefficients::new(vec![1.0, 2.0]).is_err());
        assert!(HtCoefficients::new(vec![1.0, f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn reconstruct_matches_basis_sum() {
        let coeffs = HtCoefficients::new(vec![2.0, -0.3, 0.7, 0.1, 1.1, -0.4, 0.2]).unwrap();
        let b = HtBasis::new(4).unwrap();
        let sum = b.matrices().zip(coeffs.as_slice()).fold(CMatrix::zeros(4, 4), |acc, (s, &w)| acc + s.scale(w));
        assert!(frobenius(&(sum - reconstruct_rt(&coeffs))) < 1e-15);
    }

    #[test]
    fn ht_input_projects_exactly() {
        let coeffs = HtCoefficients::new(vec![3.0, 0.4, -0.2, 0.9, -1.3]).unwrap();
        let rt = reconstruct_rt(&coeffs);
        let p = ht_project(&rt).unwrap();
        assert!(p.residual < 1e-12);
        for (a, b) in p.coeffs.as_slice().iter().zip(coeffs.as_slice()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn non_square_rejected() {
        assert!(matches!(ht_project(&CMatrix::zeros(2, 3)), Err(Error::Dimension { .. })));
        assert!(decouple(&CMatrix::zeros(3, 2)).is_err());
    }

    #[test]
    fn decouple_zero_matrix_is_finite() {
        let d = decouple(&CMatrix::zeros(4, 4)).unwrap();
        assert!(d.rx_hat.iter().all(|z| *z == c(1.0, 0.0)));
        assert!(d.rb_hat.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn decouple_real_positive_gives_unit_phases() {
        let rt = reconstruct_rt(&HtCoefficients::new(vec![2.0, 1.5, 0.8, 0.0, 0.0]).unwrap());
        let d = decouple(&rt).unwrap();
        assert!(d.rx_hat.iter().all(|z| (z - c(1.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn polar_identity() {
        let rt = reconstruct_rt(&HtCoefficients::new(vec![2.0, 1.5, -0.8, 0.3, 0.0, 0.7, -1.9]).unwrap());
        let d = decouple(&rt).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!((d.rx_hat[(i, j)] * d.rb_hat[(i, j)] - rt[(i, j)]).norm() <= 4.0 * f64::EPSILON * rt[(i, j)].norm());
                assert!((d.rx_hat[(i, j)].norm() - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn closed_form_is_diagonal_average_of_hermitian_part() {
        let a = CMatrix::from_fn(5, 5, |i, j| c((i * 7 + j * 3) as f64 % 5.0 - 2.0, (i * j) as f64 * 0.3 - 1.0));
        let h = hermitian_part(&a);
        let p = ht_project(&a).unwrap();
        let cs = p.coeffs.as_slice();
        for k in 1..5 {
            let diag: Vec<Complex64> = (0..5 - k).map(|i| h[(i, i + k)]).collect();
            let mean_re = diag.iter().map(|z| z.re).sum::<f64>() / diag.len() as f64;
            let mean_im = diag.iter().map(|z| z.im).sum::<f64>() / diag.len() as f64;
            assert!((cs[k] - mean_re).abs() < 1e-14);
            assert!((cs[k + 4] - mean_im).abs() < 1e-14);
        }
        // residual orthogonal to the span
        let resid = &a - reconstruct_rt(&p.coeffs);
        for s in HtBasis::new(5).unwrap().matrices() {
            assert!(re_inner(&resid, &s).abs() < 1e-10);
        }
    }

    #[test]
    fn psd_clip_removes_negative_spectrum() {
        // Toeplitz with a negative eigenvalue
        let rt_coeffs = vec![1.0, 0.9, -0.6, 0.0, 0.0];
        let a = reconstruct_rt(&HtCoefficients::new(rt_coeffs).unwrap());
        let plain = calibrate(&a).unwrap();
        let clipped = calibrate_with(&a, &CalibrationOptions { psd_clip: true }).unwrap();
        assert!(hermitian_eigen_desc(&plain.rt_hat).0.last().unwrap() < &-1e-3);
        assert!(hermitian_eigen_desc(&clipped.rt_hat).0.last().unwrap() > &-1e-12);
        assert_eq!(plain.coeffs, clipped.coeffs);
    }
}
