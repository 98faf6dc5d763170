//! Active-set solver for `min ½xᵀAx − bᵀx` subject to `‖x‖_∞ ≤ λ`.
//!
//! The method works face by face. Inside a face, preconditioned CG runs on
//! the free coordinates; when it hits the face boundary the blocking
//! coordinates are fixed at their bounds. When the gradient inside the face
//! becomes small compared with the projected gradient
//! (`‖g^Π‖ ≤ η‖g^P‖`), a spectral projected-gradient step with an exact
//! line search releases bound coordinates. The loop stops once
//! `‖g^P‖ ≤ tol`, which is the KKT condition for the box.
//!
//! `A` only needs to be positive semidefinite. Zero-curvature directions
//! are followed to the boundary, so singular Hessians such as `RD⁻¹Rᵀ` for
//! grid penalties are handled; only the objective value is certified then.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::operator::LinearOperator;
use crate::pcg::{max_feasible_step, pcg_solve_on_face, step_and_snap, PcgConfig, PcgStatus};
use crate::sparse::DiagonalScaling;
use crate::vecops::{dot, norm2, sub};

/// The box `Ω = {x : ‖x‖_∞ ≤ λ}` in `dim` dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxDomain {
    bound: f64,
    dim: usize,
}

impl BoxDomain {
    pub fn new(bound: f64, dim: usize) -> Result<Self> {
        if !(bound >= 0.0) || !bound.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "box bound must be finite and nonnegative, got {bound}"
            )));
        }
        Ok(Self { bound, dim })
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim && x.iter().all(|v| v.abs() <= self.bound)
    }

    /// Orthogonal projection: component-wise clipping to `[−λ, λ]`.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|v| v.clamp(-self.bound, self.bound)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FaceState {
    /// In `I₋`, fixed at `−λ`.
    Lower,
    /// In `I₀`.
    Free,
    /// In `I₊`, fixed at `+λ`.
    Upper,
}

/// Partition `{I₋, I₀, I₊}` of the coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FacePartition {
    states: Vec<FaceState>,
}

impl FacePartition {
    pub fn all_free(n: usize) -> Self {
        Self {
            states: vec![FaceState::Free; n],
        }
    }

    pub fn from_states(states: Vec<FaceState>) -> Self {
        Self { states }
    }

    /// Face of a point: coordinates sitting exactly on a bound are fixed.
    pub fn from_point(x: &[f64], bx: &BoxDomain) -> Self {
        let lam = bx.bound();
        Self {
            states: x
                .iter()
                .map(|&v| {
                    if v == lam {
                        FaceState::Upper
                    } else if v == -lam {
                        FaceState::Lower
                    } else {
                        FaceState::Free
                    }
                })
                .collect(),
        }
    }

    pub fn states(&self) -> &[FaceState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn free_count(&self) -> usize {
        self.states.iter().filter(|s| **s == FaceState::Free).count()
    }

    fn indices(&self, which: FaceState) -> Vec<usize> {
        self.states
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == which)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn lower(&self) -> Vec<usize> {
        self.indices(FaceState::Lower)
    }

    pub fn free(&self) -> Vec<usize> {
        self.indices(FaceState::Free)
    }

    pub fn upper(&self) -> Vec<usize> {
        self.indices(FaceState::Upper)
    }
}

/// `g^Π`: the gradient on `I₀`, zero elsewhere.
pub fn face_gradient(g: &[f64], face: &FacePartition) -> Vec<f64> {
    g.iter()
        .zip(face.states())
        .map(|(&gi, s)| if *s == FaceState::Free { gi } else { 0.0 })
        .collect()
}

fn projected_gradient_unchecked(g: &[f64], x: &[f64], lam: f64) -> Vec<f64> {
    g.iter()
        .zip(x)
        .map(|(&gi, &xi)| {
            if (xi == -lam && gi > 0.0) || (xi == lam && gi < 0.0) {
                0.0
            } else {
                gi
            }
        })
        .collect()
}

/// `g^P`: components whose descent direction `−g_i` points out of the box
/// at an active bound are zeroed.
pub fn projected_gradient(g: &[f64], x: &[f64], bx: &BoxDomain) -> Result<Vec<f64>> {
    check_len("projected gradient", g.len(), x.len())?;
    if !bx.contains(x) {
        return Err(Error::Precondition(
            "projected gradient evaluated outside the box".into(),
        ));
    }
    Ok(projected_gradient_unchecked(g, x, bx.bound()))
}

/// `‖g^Π‖ ≤ η‖g^P‖` with `g^P ≠ 0`.
pub fn leave_face_test(
    g: &[f64],
    x: &[f64],
    face: &FacePartition,
    bx: &BoxDomain,
    eta: f64,
) -> bool {
    let gp = norm2(&projected_gradient_unchecked(g, x, bx.bound()));
    gp > 0.0 && norm2(&face_gradient(g, face)) <= eta * gp
}

/// Curvature memory for the spectral step.
#[derive(Debug, Clone)]
pub struct SpectralState {
    previous: Option<(Vec<f64>, Vec<f64>)>,
    sigma_min: f64,
    sigma_max: f64,
}

impl SpectralState {
    pub fn new(sigma_min: f64, sigma_max: f64) -> Self {
        Self {
            previous: None,
            sigma_min,
            sigma_max,
        }
    }

    /// Remembers `(x, g)` as the previous point.
    pub fn record(&mut self, x: &[f64], g: &[f64]) {
        self.previous = Some((x.to_vec(), g.to_vec()));
    }

    /// `σ = ΔxᵀΔg / ‖Δx‖²`, clamped to `[σ_min, σ_max]`; 1 without history.
    pub fn sigma(&self, x: &[f64], g: &[f64]) -> f64 {
        let Some((xp, gp)) = &self.previous else {
            return 1.0;
        };
        let dx = sub(x, xp);
        let dg = sub(g, gp);
        let dxx = dot(&dx, &dx);
        if dxx == 0.0 {
            return 1.0;
        }
        let s = dot(&dx, &dg) / dxx;
        if s.is_nan() {
            self.sigma_min
        } else {
            s.clamp(self.sigma_min, self.sigma_max)
        }
    }
}

/// `d = P_Ω(x − g/σ) − x`, where `σ` is the spectral curvature estimate.
pub fn spectral_direction(
    x: &[f64],
    g: &[f64],
    spectral: &SpectralState,
    bx: &BoxDomain,
) -> Vec<f64> {
    let step = 1.0 / spectral.sigma(x, g);
    let lam = bx.bound();
    x.iter()
        .zip(g)
        .map(|(&xi, &gi)| (xi - step * gi).clamp(-lam, lam) - xi)
        .collect()
}

/// Exact minimizer of the quadratic along `x + τd`, `τ ≥ 0`, kept inside
/// the box. Needs the current gradient `g = Ax − b` and `Ad`.
fn exact_step(x: &[f64], g: &[f64], d: &[f64], ad: &[f64], bx: &BoxDomain) -> (f64, Vec<f64>) {
    let slope = dot(g, d);
    let mut x_new = x.to_vec();
    if !(slope < 0.0) {
        return (0.0, x_new);
    }
    let curvature = dot(d, ad);
    let unconstrained = if curvature > 0.0 {
        -slope / curvature
    } else {
        f64::INFINITY
    };
    let boundary = max_feasible_step(x, d, bx.bound());
    if unconstrained < boundary {
        for (xi, di) in x_new.iter_mut().zip(d) {
            *xi = (*xi + unconstrained * di).clamp(-bx.bound(), bx.bound());
        }
        (unconstrained, x_new)
    } else {
        step_and_snap(&mut x_new, d, boundary, bx.bound());
        (boundary, x_new)
    }
}

/// Exact line search of `½xᵀAx − bᵀx` along `d` from `x`, truncated to Ω.
/// Returns the step and the new point.
pub fn constrained_line_search<A: LinearOperator + ?Sized>(
    a: &A,
    b: &[f64],
    x: &[f64],
    d: &[f64],
    bx: &BoxDomain,
) -> Result<(f64, Vec<f64>)> {
    let n = a.dim();
    check_len("line search rhs", n, b.len())?;
    check_len("line search point", n, x.len())?;
    check_len("line search direction", n, d.len())?;
    if !bx.contains(x) {
        return Err(Error::Precondition("line search starts outside the box".into()));
    }
    let g = sub(&a.apply_vec(x), b);
    let ad = a.apply_vec(d);
    Ok(exact_step(x, &g, d, &ad, bx))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxQpConfig {
    /// Leave-face constant `η ∈ (0, 1)`.
    pub eta: f64,
    /// Absolute tolerance on `‖g^P‖₂`.
    pub tolerance: f64,
    /// CG iteration cap per face visit; `10·|I₀|` when unset.
    pub inner_max_iterations: Option<usize>,
    pub max_cycles: usize,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

impl Default for BoxQpConfig {
    fn default() -> Self {
        Self {
            eta: 0.1,
            tolerance: 1e-10,
            inner_max_iterations: None,
            max_cycles: 10_000,
            sigma_min: 1e-10,
            sigma_max: 1e10,
        }
    }
}

impl BoxQpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "η must lie in (0, 1), got {}",
                self.eta
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "box-QP tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if !(self.sigma_min > 0.0 && self.sigma_min <= self.sigma_max) {
            return Err(Error::InvalidArgument("invalid σ clamps".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoxQpStatus {
    Converged,
    NotConverged,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CycleKind {
    Cg(PcgStatus),
    Spectral,
}

/// State at the start of one outer cycle, plus what the cycle did.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxQpCycle {
    pub objective: f64,
    pub projected_gradient_norm: f64,
    pub free: usize,
    pub kind: Option<CycleKind>,
}

#[derive(Debug, Clone)]
pub struct BoxQpResult {
    pub x: Vec<f64>,
    /// `‖g^P(x)‖₂`, the optimality certificate.
    pub projected_gradient_norm: f64,
    pub status: BoxQpStatus,
    pub cycles: usize,
    pub cg_iterations: usize,
    pub spectral_steps: usize,
    pub trace: Vec<BoxQpCycle>,
}

impl BoxQpResult {
    pub fn converged(&self) -> bool {
        self.status == BoxQpStatus::Converged
    }
}

fn gradient<A: LinearOperator + ?Sized>(a: &A, b: &[f64], x: &[f64]) -> Vec<f64> {
    let mut g = a.apply_vec(x);
    for (gi, bi) in g.iter_mut().zip(b) {
        *gi -= bi;
    }
    g
}

/// `½xᵀAx − bᵀx` from `g = Ax − b`.
fn objective_from_gradient(x: &[f64], g: &[f64], b: &[f64]) -> f64 {
    0.5 * (dot(x, g) - dot(x, b))
}

/// Minimizes `½xᵀAx − bᵀx` over `‖x‖_∞ ≤ λ` from `x0` (projected onto the
/// box; zero when absent) with Jacobi preconditioner `m`.
pub fn solve_boxqp<A: LinearOperator + ?Sized>(
    a: &A,
    b: &[f64],
    bx: &BoxDomain,
    m: &DiagonalScaling,
    x0: Option<&[f64]>,
    cfg: &BoxQpConfig,
) -> Result<BoxQpResult> {
    let n = a.dim();
    check_len("box-QP rhs", n, b.len())?;
    check_len("box-QP box", n, bx.dim())?;
    check_len("box-QP preconditioner", n, m.len())?;
    cfg.validate()?;

    let lam = bx.bound();
    if lam == 0.0 || n == 0 {
        let x = vec![0.0; n];
        let g = gradient(a, b, &x);
        let pg = norm2(&projected_gradient_unchecked(&g, &x, lam));
        return Ok(BoxQpResult {
            x,
            projected_gradient_norm: pg,
            status: BoxQpStatus::Converged,
            cycles: 0,
            cg_iterations: 0,
            spectral_steps: 0,
            trace: Vec::new(),
        });
    }

    let mut x = match x0 {
        Some(x0) => {
            check_len("box-QP start", n, x0.len())?;
            let act = 1e-12 * lam.max(1.0);
            x0.iter()
                .map(|&v| {
                    let v = v.clamp(-lam, lam);
                    if v >= lam - act {
                        lam
                    } else if v <= -lam + act {
                        -lam
                    } else {
                        v
                    }
                })
                .collect()
        }
        None => vec![0.0; n],
    };

    let inner = PcgConfig {
        tolerance: 0.5 * cfg.eta * cfg.tolerance,
        relative: false,
        max_iterations: cfg.inner_max_iterations,
    };
    let mut spectral = SpectralState::new(cfg.sigma_min, cfg.sigma_max);
    let mut g = gradient(a, b, &x);
    let mut trace = Vec::new();
    let mut cg_iterations = 0;
    let mut spectral_steps = 0;
    let mut force_spectral = false;

    for cycle in 0..cfg.max_cycles {
        let face = FacePartition::from_point(&x, bx);
        let gp = norm2(&projected_gradient_unchecked(&g, &x, lam));
        let objective = objective_from_gradient(&x, &g, b);
        trace.push(BoxQpCycle {
            objective,
            projected_gradient_norm: gp,
            free: face.free_count(),
            kind: None,
        });
        if gp <= cfg.tolerance {
            return Ok(BoxQpResult {
                x,
                projected_gradient_norm: gp,
                status: BoxQpStatus::Converged,
                cycles: cycle,
                cg_iterations,
                spectral_steps,
                trace,
            });
        }

        if force_spectral || leave_face_test(&g, &x, &face, bx, cfg.eta) {
            force_spectral = false;
            let d = spectral_direction(&x, &g, &spectral, bx);
            let ad = a.apply_vec(&d);
            let (tau, x_new) = exact_step(&x, &g, &d, &ad, bx);
            spectral_steps += 1;
            trace.last_mut().expect("pushed above").kind = Some(CycleKind::Spectral);
            if tau == 0.0 || x_new == x {
                break;
            }
            spectral.record(&x, &g);
            x = x_new;
            g = gradient(a, b, &x);
            continue;
        }

        let out = pcg_solve_on_face(a, b, m, &x, &inner, bx, &face, |xk, gk| {
            leave_face_test(gk, xk, &face, bx, cfg.eta)
        })?;
        cg_iterations += out.iterations;
        trace.last_mut().expect("pushed above").kind = Some(CycleKind::Cg(out.status));
        if out.iterations == 0 && out.status != PcgStatus::HitBoundary {
            force_spectral = true;
        }
        if out.x != x {
            spectral.record(&x, &g);
            x = out.x;
            g = gradient(a, b, &x);
        }
    }

    let gp = norm2(&projected_gradient_unchecked(&g, &x, lam));
    Ok(BoxQpResult {
        x,
        projected_gradient_norm: gp,
        status: if gp <= cfg.tolerance {
            BoxQpStatus::Converged
        } else {
            BoxQpStatus::NotConverged
        },
        cycles: trace.len(),
        cg_iterations,
        spectral_steps,
        trace,
    })
}
