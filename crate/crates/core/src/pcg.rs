//! Diagonally preconditioned conjugate gradients for `min ½xᵀAx − bᵀx`.
//!
//! [`pcg_solve`] is the plain unconstrained method. [`pcg_solve_on_face`]
//! runs the same recursion on the free coordinates of a face of the box
//! `‖x‖_∞ ≤ λ`, truncating the step when an iterate would leave the closed
//! face and handing control back to the caller whenever a leave-face probe
//! fires.

use serde::{Deserialize, Serialize};

use crate::boxqp::{BoxDomain, FacePartition, FaceState};
use crate::error::{check_len, Error, Result};
use crate::operator::LinearOperator;
use crate::sparse::DiagonalScaling;
use crate::vecops::{axpy, dot, is_finite, norm2};

/// Tolerance `ε` for the residual test `‖g‖ ≤ ε`, and an iteration cap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PcgConfig {
    pub tolerance: f64,
    /// Scale the tolerance by `max(1, ‖b‖)`.
    pub relative: bool,
    /// Defaults to `10·n` when unset.
    pub max_iterations: Option<usize>,
}

impl Default for PcgConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            relative: true,
            max_iterations: None,
        }
    }
}

impl PcgConfig {
    pub fn absolute(tolerance: f64) -> Self {
        Self {
            tolerance,
            relative: false,
            max_iterations: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "CG tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == Some(0) {
            return Err(Error::InvalidArgument(
                "CG needs at least one iteration".into(),
            ));
        }
        Ok(())
    }

    pub fn effective_tolerance(&self, b: &[f64]) -> f64 {
        if self.relative {
            self.tolerance * norm2(b).max(1.0)
        } else {
            self.tolerance
        }
    }

    pub fn iteration_limit(&self, n: usize) -> usize {
        self.max_iterations.unwrap_or(10 * n.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PcgStatus {
    Converged,
    /// A step was truncated at the boundary of the closed face.
    HitBoundary,
    LeaveFaceRequested,
    MaxIterations,
    /// `gᵀM⁻¹g ≤ 0`, or a direction of nonpositive curvature without a box
    /// to stop it. The caller restarts from the returned point.
    ResetCurvature,
}

#[derive(Debug, Clone)]
pub struct PcgOutcome {
    pub x: Vec<f64>,
    pub status: PcgStatus,
    pub iterations: usize,
    /// Norm of the recursively updated (face) gradient at exit.
    pub residual_norm: f64,
}

/// Solves `Ax = b` (equivalently minimizes `½xᵀAx − bᵀx`) from `x0`.
pub fn pcg_solve<A: LinearOperator + ?Sized>(
    a: &A,
    b: &[f64],
    m: &DiagonalScaling,
    x0: &[f64],
    cfg: &PcgConfig,
) -> Result<PcgOutcome> {
    let n = a.dim();
    check_len("pcg right-hand side", n, b.len())?;
    check_len("pcg preconditioner", n, m.len())?;
    check_len("pcg start", n, x0.len())?;
    cfg.validate()?;
    run(a, b, m, x0.to_vec(), cfg, None, &mut |_: &[f64], _: &[f64]| false)
}

/// CG restricted to the free coordinates of `face`, with step truncation at
/// the face boundary. The probe sees `(x, g)` with `g = Ax − b` over all
/// coordinates after every completed iteration.
#[allow(clippy::too_many_arguments)]
pub fn pcg_solve_on_face<A, P>(
    a: &A,
    b: &[f64],
    m: &DiagonalScaling,
    x0: &[f64],
    cfg: &PcgConfig,
    bx: &BoxDomain,
    face: &FacePartition,
    mut leave_face_probe: P,
) -> Result<PcgOutcome>
where
    A: LinearOperator + ?Sized,
    P: FnMut(&[f64], &[f64]) -> bool,
{
    let n = a.dim();
    check_len("pcg right-hand side", n, b.len())?;
    check_len("pcg preconditioner", n, m.len())?;
    check_len("pcg start", n, x0.len())?;
    check_len("face partition", n, face.len())?;
    check_len("box dimension", n, bx.dim())?;
    cfg.validate()?;
    let lam = bx.bound();
    for (i, (&xi, st)) in x0.iter().zip(face.states()).enumerate() {
        let ok = match st {
            FaceState::Lower => xi == -lam,
            FaceState::Upper => xi == lam,
            FaceState::Free => xi.abs() <= lam,
        };
        if !ok {
            return Err(Error::Precondition(format!(
                "start point coordinate {i} = {xi} is outside the closed face ({st:?}, λ = {lam})"
            )));
        }
    }
    run(a, b, m, x0.to_vec(), cfg, Some((bx, face)), &mut leave_face_probe)
}

fn masked(v: &mut [f64], face: Option<&FacePartition>) {
    if let Some(face) = face {
        for (vi, st) in v.iter_mut().zip(face.states()) {
            if *st != FaceState::Free {
                *vi = 0.0;
            }
        }
    }
}

/// Largest `τ ≥ 0` with `x + τd` inside the box `[−λ, λ]ⁿ`.
pub(crate) fn max_feasible_step(x: &[f64], d: &[f64], lam: f64) -> f64 {
    x.iter()
        .zip(d)
        .filter(|(_, &di)| di != 0.0)
        .map(|(&xi, &di)| {
            let limit = if di > 0.0 { lam - xi } else { -lam - xi };
            (limit / di).max(0.0)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Moves `x` by `tau·d` and pins every coordinate whose own boundary step
/// lies within `1e-12` (relative) of `tau` exactly onto that bound.
pub(crate) fn step_and_snap(x: &mut [f64], d: &[f64], tau: f64, lam: f64) {
    let slack = 1e-12 * tau.max(1.0);
    for (xi, &di) in x.iter_mut().zip(d) {
        if di == 0.0 {
            continue;
        }
        let bound = if di > 0.0 { lam } else { -lam };
        let own = ((bound - *xi) / di).max(0.0);
        if own <= tau + slack {
            *xi = bound;
        } else {
            *xi = (*xi + tau * di).clamp(-lam, lam);
        }
    }
}

fn run<A, P>(
    a: &A,
    b: &[f64],
    m: &DiagonalScaling,
    mut x: Vec<f64>,
    cfg: &PcgConfig,
    bounded: Option<(&BoxDomain, &FacePartition)>,
    probe: &mut P,
) -> Result<PcgOutcome>
where
    A: LinearOperator + ?Sized,
    P: FnMut(&[f64], &[f64]) -> bool,
{
    let n = a.dim();
    let face = bounded.map(|(_, f)| f);
    let eps = cfg.effective_tolerance(b);
    let limit = cfg.iteration_limit(face.map_or(n, |f| f.free_count()));

    let mut g = a.apply_vec(&x);
    for (gi, bi) in g.iter_mut().zip(b) {
        *gi -= bi;
    }
    let mut gf = g.clone();
    masked(&mut gf, face);
    let outcome = |x: Vec<f64>, status, iterations, gf: &[f64]| PcgOutcome {
        x,
        status,
        iterations,
        residual_norm: norm2(gf),
    };
    if !is_finite(&g) {
        return Err(Error::NumericalFailure {
            context: "conjugate gradient",
            iteration: 0,
        });
    }
    if norm2(&gf) <= eps {
        return Ok(outcome(x, PcgStatus::Converged, 0, &gf));
    }

    let z = m.solve(&gf);
    let mut gz = dot(&gf, &z);
    if !(gz > 0.0) {
        return Ok(outcome(x, PcgStatus::ResetCurvature, 0, &gf));
    }
    let mut d: Vec<f64> = z.iter().map(|v| -v).collect();
    let mut ad = vec![0.0; n];

    for k in 0..limit {
        a.apply(&d, &mut ad);
        let curvature = dot(&d, &ad);
        let mut tau = if curvature > 0.0 {
            gz / curvature
        } else {
            f64::INFINITY
        };

        if let Some((bx, _)) = bounded {
            let tau_max = max_feasible_step(&x, &d, bx.bound());
            if tau >= tau_max {
                tau = tau_max;
                step_and_snap(&mut x, &d, tau, bx.bound());
                axpy(tau, &ad, &mut g);
                gf.copy_from_slice(&g);
                masked(&mut gf, face);
                return Ok(outcome(x, PcgStatus::HitBoundary, k + 1, &gf));
            }
        } else if !tau.is_finite() {
            return Ok(outcome(x, PcgStatus::ResetCurvature, k, &gf));
        }

        axpy(tau, &d, &mut x);
        axpy(tau, &ad, &mut g);
        let g_old = std::mem::replace(&mut gf, g.clone());
        masked(&mut gf, face);
        if !is_finite(&x) || !is_finite(&g) {
            return Err(Error::NumericalFailure {
                context: "conjugate gradient",
                iteration: k + 1,
            });
        }
        if norm2(&gf) <= eps {
            return Ok(outcome(x, PcgStatus::Converged, k + 1, &gf));
        }
        if probe(&x, &g) {
            return Ok(outcome(x, PcgStatus::LeaveFaceRequested, k + 1, &gf));
        }

        let z_new = m.solve(&gf);
        let gz_new = dot(&gf, &z_new);
        if !(gz_new > 0.0) {
            return Ok(outcome(x, PcgStatus::ResetCurvature, k + 1, &gf));
        }
        let alpha = z_new
            .iter()
            .zip(gf.iter().zip(&g_old))
            .fold(0.0, |acc, (zi, (gn, go))| acc + zi * (gn - go))
            / gz;
        for (di, zi) in d.iter_mut().zip(&z_new) {
            *di = -zi + alpha * *di;
        }
        gz = gz_new;
    }
    Ok(outcome(x, PcgStatus::MaxIterations, limit, &gf))
}
