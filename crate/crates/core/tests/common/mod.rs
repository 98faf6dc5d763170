//! Independent dense oracles shared by the integration tests.

#![allow(dead_code)]

use alin_core::SparseMatrix;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Random sparse matrix and its dense twin.
pub fn random_sparse(
    rng: &mut ChaCha8Rng,
    m: usize,
    n: usize,
    density: f64,
) -> (SparseMatrix, Vec<Vec<f64>>) {
    let mut dense = vec![vec![0.0; n]; m];
    let mut triplets = Vec::new();
    for (i, row) in dense.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            if rng.random::<f64>() < density {
                *v = rng.sample(StandardNormal);
                triplets.push((i, j, *v));
            }
        }
    }
    (SparseMatrix::from_triplets(m, n, triplets).unwrap(), dense)
}

pub fn to_na(a: &[Vec<f64>]) -> DMatrix<f64> {
    let m = a.len();
    let n = a.first().map_or(0, Vec::len);
    DMatrix::from_fn(m, n, |i, j| a[i][j])
}

pub fn sparse_to_na(a: &SparseMatrix) -> DMatrix<f64> {
    to_na(&a.to_dense())
}

pub fn dense_matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|row| {
            let mut s = 0.0;
            for j in 0..row.len() {
                s += row[j] * x[j];
            }
            s
        })
        .collect()
}

pub fn dense_matvec_t(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    let n = a.first().map_or(0, Vec::len);
    let mut out = vec![0.0; n];
    for (i, row) in a.iter().enumerate() {
        for j in 0..n {
            out[j] += row[j] * x[i];
        }
    }
    out
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `GᵀG + I` for a Gaussian `G`.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    g.transpose() * &g + DMatrix::identity(n, n)
}

pub fn na_to_sparse(a: &DMatrix<f64>) -> SparseMatrix {
    let rows: Vec<Vec<f64>> = (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)]).collect())
        .collect();
    SparseMatrix::from_dense(&rows).unwrap()
}

/// `½‖y − Xβ‖² + λ‖Rβ‖₁` with dense algebra.
pub fn dense_objective(x: &DMatrix<f64>, y: &[f64], r: &DMatrix<f64>, lambda: f64, beta: &[f64]) -> f64 {
    let b = DVector::from_column_slice(beta);
    let res = x * &b - DVector::from_column_slice(y);
    0.5 * res.norm_squared() + lambda * (r * &b).lp_norm(1)
}

/// Generalized lasso by ADMM on the split `z = Rβ`, with a Cholesky
/// factorization of `XᵀX + ρRᵀR` (plus a tiny ridge when singular).
pub fn admm_reference(
    x: &DMatrix<f64>,
    y: &[f64],
    r: &DMatrix<f64>,
    lambda: f64,
    iterations: usize,
) -> Vec<f64> {
    let rho = 1.0;
    let p = x.ncols();
    let yv = DVector::from_column_slice(y);
    let xty = x.transpose() * &yv;
    let mut sys = x.transpose() * x + r.transpose() * r * rho;
    let chol = match sys.clone().cholesky() {
        Some(c) => c,
        None => {
            sys += DMatrix::identity(p, p) * 1e-12;
            sys.cholesky().expect("regularized system is positive definite")
        }
    };
    let mut z = DVector::zeros(r.nrows());
    let mut u = DVector::zeros(r.nrows());
    let mut beta = DVector::zeros(p);
    let k = lambda / rho;
    for _ in 0..iterations {
        let rhs = &xty + r.transpose() * (&z - &u) * rho;
        beta = chol.solve(&rhs);
        let rb = r * &beta;
        let v = &rb + &u;
        z = v.map(|t| t.signum() * (t.abs() - k).max(0.0));
        u += rb - &z;
    }
    beta.as_slice().to_vec()
}

/// Subgradient descent with step `c/√t`, `c = 1/‖XᵀX‖`, keeping the best
/// iterate.
pub fn subgradient_reference(
    x: &DMatrix<f64>,
    y: &[f64],
    r: &DMatrix<f64>,
    lambda: f64,
    iterations: usize,
) -> (Vec<f64>, f64) {
    let p = x.ncols();
    let xtx = x.transpose() * x;
    let c = 1.0 / xtx.norm().max(1e-12);
    let xty = x.transpose() * DVector::from_column_slice(y);
    let rt = r.transpose();
    let mut beta = DVector::zeros(p);
    let mut best = beta.as_slice().to_vec();
    let mut best_val = dense_objective(x, y, r, lambda, &best);
    for t in 1..=iterations {
        let sign = (r * &beta).map(|v| if v > 0.0 { 1.0 } else if v < 0.0 { -1.0 } else { 0.0 });
        let g = &xtx * &beta - &xty + &rt * sign * lambda;
        beta -= g * (c / (t as f64).sqrt());
        let val = dense_objective(x, y, r, lambda, beta.as_slice());
        if val < best_val {
            best_val = val;
            best = beta.as_slice().to_vec();
        }
    }
    (best, best_val)
}
