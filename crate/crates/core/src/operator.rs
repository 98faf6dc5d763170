//! Matrix-free symmetric operators consumed by the CG and box-QP solvers.

use crate::sparse::{DiagonalScaling, SparseMatrix};

/// A symmetric positive semidefinite map `v ↦ Av`, applied without ever
/// forming `A`.
pub trait LinearOperator {
    fn dim(&self) -> usize;

    /// `out ← A x`. Both slices have length [`dim`](Self::dim).
    fn apply(&self, x: &[f64], out: &mut [f64]);

    fn apply_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.apply(x, &mut out);
        out
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        (**self).apply(x, out)
    }
}

/// A square sparse matrix used directly as an operator.
impl LinearOperator for SparseMatrix {
    fn dim(&self) -> usize {
        debug_assert_eq!(self.nrows(), self.ncols());
        self.nrows()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        self.matvec_into(x, out)
            .expect("square operator applied to conforming vectors");
    }
}

/// `XᵀX + D`, the loss-subproblem system matrix.
pub struct NormalPlusDiagonal<'a> {
    pub x: &'a SparseMatrix,
    pub d: &'a DiagonalScaling,
}

impl LinearOperator for NormalPlusDiagonal<'_> {
    fn dim(&self) -> usize {
        self.x.ncols()
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        let xv = self.x.matvec(v).expect("conforming operand");
        self.x.matvec_t_into(&xv, out).expect("conforming operand");
        for ((o, d), vi) in out.iter_mut().zip(self.d.entries()).zip(v) {
            *o += d * vi;
        }
    }
}

/// `R D⁻¹ Rᵀ`, the Hessian of the penalty-subproblem dual.
pub struct ScaledRowGram<'a> {
    pub r: &'a SparseMatrix,
    pub d: &'a DiagonalScaling,
}

impl LinearOperator for ScaledRowGram<'_> {
    fn dim(&self) -> usize {
        self.r.nrows()
    }

    fn apply(&self, mu: &[f64], out: &mut [f64]) {
        let rt_mu = self.r.matvec_t(mu).expect("conforming operand");
        let scaled = self.d.solve(&rt_mu);
        self.r.matvec_into(&scaled, out).expect("conforming operand");
    }
}

/// Wraps a closure as an operator.
pub struct FnOperator<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64])> FnOperator<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64], &mut [f64])> LinearOperator for FnOperator<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        (self.f)(x, out)
    }
}
