//! Reference solvers for checking the ALIN output. They use nothing from
//! the solver crate beyond the sparse matrix type.
//!
//! * [`subgradient_oracle`]: plain subgradient descent with step `c/√t`,
//!   `c = 1/‖XᵀX‖`, returning the best iterate. Slow but assumption-free.
//! * [`admm_oracle`]: ADMM on the split `z = Rβ` with dense Cholesky
//!   solves and residual balancing. Accurate to many digits at desk scale.

use alin_core::SparseMatrix;
use nalgebra::{DMatrix, DVector};

use crate::error::{usage, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub beta: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

/// A generalized lasso instance as seen by the oracles.
#[derive(Debug, Clone, Copy)]
pub struct OracleProblem<'a> {
    pub x: &'a SparseMatrix,
    pub y: &'a [f64],
    pub r: &'a SparseMatrix,
    pub lambda: f64,
}

impl OracleProblem<'_> {
    fn check(&self) -> CliResult<()> {
        if self.x.nrows() != self.y.len() || self.x.ncols() != self.r.ncols() {
            return Err(usage("oracle: inconsistent problem dimensions"));
        }
        Ok(())
    }

    pub fn objective(&self, beta: &[f64]) -> f64 {
        let xb = self.x.matvec(beta).expect("checked dimensions");
        let loss: f64 = xb.iter().zip(self.y).map(|(a, b)| (a - b) * (a - b)).sum();
        let rb = self.r.matvec(beta).expect("checked dimensions");
        0.5 * loss + self.lambda * rb.iter().map(|v| v.abs()).sum::<f64>()
    }
}

/// Power iteration for the largest eigenvalue of `XᵀX`.
pub fn gram_norm_estimate(x: &SparseMatrix, iterations: usize) -> f64 {
    let p = x.ncols();
    if p == 0 {
        return 0.0;
    }
    let mut v: Vec<f64> = (0..p).map(|j| 1.0 + (j % 7) as f64 * 0.1).collect();
    let mut est = 0.0;
    for _ in 0..iterations.max(1) {
        let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if nv == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|a| *a /= nv);
        let w = x.matvec_t(&x.matvec(&v).expect("square")).expect("square");
        est = w.iter().zip(&v).map(|(a, b)| a * b).sum();
        v = w;
    }
    est
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Subgradient descent from `β = 0`, keeping the best iterate seen.
pub fn subgradient_oracle(problem: &OracleProblem, iterations: usize) -> CliResult<OracleResult> {
    problem.check()?;
    let p = problem.x.ncols();
    // A slight overestimate keeps the first steps stable.
    let c = 1.0 / (1.01 * gram_norm_estimate(problem.x, 100)).max(1e-12);
    let mut beta = vec![0.0; p];
    let mut best = beta.clone();
    let mut best_val = problem.objective(&beta);
    for t in 1..=iterations {
        let resid: Vec<f64> = problem
            .x
            .matvec(&beta)?
            .iter()
            .zip(problem.y)
            .map(|(a, b)| a - b)
            .collect();
        let mut g = problem.x.matvec_t(&resid)?;
        let signs: Vec<f64> = problem.r.matvec(&beta)?.into_iter().map(sign).collect();
        let rt = problem.r.matvec_t(&signs)?;
        let step = c / (t as f64).sqrt();
        for ((b, gi), ri) in beta.iter_mut().zip(&mut g).zip(&rt) {
            *gi += problem.lambda * ri;
            *b -= step * *gi;
        }
        let val = problem.objective(&beta);
        if val < best_val {
            best_val = val;
            best.copy_from_slice(&beta);
        }
    }
    Ok(OracleResult {
        beta: best,
        objective: best_val,
        iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmConfig {
    pub max_iterations: usize,
    /// Stop when both residual norms fall below this, relative to the
    /// iterate scale.
    pub tolerance: f64,
    pub rho: f64,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self {
            max_iterations: 200_000,
            tolerance: 1e-12,
            rho: 1.0,
        }
    }
}

fn dense(a: &SparseMatrix) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(a.nrows(), a.ncols());
    for (i, j, v) in a.triplets() {
        m[(i, j)] = v;
    }
    m
}

fn factor(xtx: &DMatrix<f64>, rtr: &DMatrix<f64>, rho: f64) -> nalgebra::Cholesky<f64, nalgebra::Dyn> {
    let p = xtx.nrows();
    let sys = xtx + rtr * rho;
    sys.clone().cholesky().unwrap_or_else(|| {
        (sys + DMatrix::identity(p, p) * 1e-12)
            .cholesky()
            .expect("regularized system is positive definite")
    })
}

/// ADMM for `min ½‖y − Xβ‖² + λ‖z‖₁` subject to `z = Rβ`.
pub fn admm_oracle(problem: &OracleProblem, cfg: &AdmmConfig) -> CliResult<OracleResult> {
    problem.check()?;
    let x = dense(problem.x);
    let r = dense(problem.r);
    let rt = r.transpose();
    let xtx = x.transpose() * &x;
    let rtr = &rt * &r;
    let xty = x.transpose() * DVector::from_column_slice(problem.y);
    let m = r.nrows();

    let mut rho = cfg.rho;
    let mut chol = factor(&xtx, &rtr, rho);
    let mut z = DVector::zeros(m);
    // Scaled dual variable.
    let mut u = DVector::zeros(m);
    let mut beta = DVector::zeros(x.ncols());
    let mut iterations = cfg.max_iterations;
    for k in 0..cfg.max_iterations {
        beta = chol.solve(&(&xty + &rt * (&z - &u) * rho));
        let rb = &r * &beta;
        let thresh = problem.lambda / rho;
        let z_old = z.clone();
        z = (&rb + &u).map(|t| sign(t) * (t.abs() - thresh).max(0.0));
        let primal = &rb - &z;
        u += &primal;
        let rp = primal.norm();
        let rd = rho * (&rt * (&z - &z_old)).norm();
        let scale = 1.0 + rb.norm().max(z.norm());
        if rp <= cfg.tolerance * scale && rd <= cfg.tolerance * (1.0 + rho * (&rt * &u).norm()) {
            iterations = k + 1;
            break;
        }
        if k % 50 == 49 {
            if rp > 10.0 * rd {
                rho *= 2.0;
                u /= 2.0;
                chol = factor(&xtx, &rtr, rho);
            } else if rd > 10.0 * rp {
                rho /= 2.0;
                u *= 2.0;
                chol = factor(&xtx, &rtr, rho);
            }
        }
    }
    let beta = beta.as_slice().to_vec();
    Ok(OracleResult {
        objective: problem.objective(&beta),
        beta,
        iterations,
    })
}

/// The lower of the two oracle objectives, with its point.
pub fn best_reference(problem: &OracleProblem, subgradient_iters: usize) -> CliResult<OracleResult> {
    let a = admm_oracle(problem, &AdmmConfig::default())?;
    if subgradient_iters == 0 {
        return Ok(a);
    }
    let s = subgradient_oracle(problem, subgradient_iters)?;
    Ok(if s.objective < a.objective { s } else { a })
}
