//! Oracles and generators shared by the integration tests.
#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use raindoa::linalg::CMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_complex(rng: &mut impl Rng, m: usize) -> CMatrix {
    CMatrix::from_fn(m, m, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

pub fn random_hermitian(rng: &mut impl Rng, m: usize) -> CMatrix {
    let a = random_complex(rng, m);
    (&a + a.adjoint()).unscale(2.0)
}

/// Columns `vec(Sigma_n)` built entry by entry from the basis definition:
/// identity, ones on diagonals `±k`, then `+j` above / `-j` below on diagonal `k`.
pub fn basis_columns(m: usize) -> DMatrix<Complex64> {
    let n = 2 * m - 1;
    let mut v = DMatrix::from_element(m * m, n, Complex64::new(0.0, 0.0));
    let vec_idx = |i: usize, j: usize| j * m + i;
    for i in 0..m {
        v[(vec_idx(i, i), 0)] = Complex64::new(1.0, 0.0);
    }
    for k in 1..m {
        for i in 0..m - k {
            v[(vec_idx(i, i + k), k)] = Complex64::new(1.0, 0.0);
            v[(vec_idx(i + k, i), k)] = Complex64::new(1.0, 0.0);
            v[(vec_idx(i, i + k), k + m - 1)] = Complex64::new(0.0, 1.0);
            v[(vec_idx(i + k, i), k + m - 1)] = Complex64::new(0.0, -1.0);
        }
    }
    v
}

/// `(V^H V)^{-1} V^H vec(R)` with an explicit inverse. Returns the complex
/// coefficients; for Hermitian `R` their imaginary parts vanish.
pub fn ls_oracle(r: &CMatrix) -> Vec<Complex64> {
    let m = r.nrows();
    let v = basis_columns(m);
    let vh = v.adjoint();
    let gram_inv = (&vh * &v).try_inverse().expect("basis Gram matrix is invertible");
    let vec_r = DMatrix::from_column_slice(m * m, 1, r.as_slice());
    let c = gram_inv * vh * vec_r;
    c.iter().copied().collect()
}

/// `sum_n c_n Sigma_n` from the explicit basis columns.
pub fn oracle_reconstruct(c: &[f64], m: usize) -> CMatrix {
    let v = basis_columns(m);
    let coeffs = DMatrix::from_iterator(c.len(), 1, c.iter().map(|&x| Complex64::new(x, 0.0)));
    let vec_rt = v * coeffs;
    CMatrix::from_column_slice(m, m, vec_rt.as_slice())
}

pub fn median(mut v: Vec<f64>) -> f64 {
    assert!(!v.is_empty());
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}
