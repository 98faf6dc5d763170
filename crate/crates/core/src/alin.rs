//! The alternating linearization method for `½‖y − Xβ‖² + λ‖Rβ‖₁`.
//!
//! Each outer iteration solves two proximal subproblems in the metric
//! `D = diag(XᵀX)`:
//!
//! * the *h-subproblem* keeps the penalty and linearizes the loss at the
//!   last loss trial point. It is solved through its dual, a box-constrained
//!   QP in multipliers `μ` with `‖μ‖_∞ ≤ λ` (or in closed form when `R = I`);
//! * the *f-subproblem* keeps the loss and linearizes the penalty. It is a
//!   linear system in `XᵀX + D`, solved by preconditioned CG.
//!
//! After each subproblem a descent test decides whether the trial point
//! replaces the incumbent `β̂`. Accepting unconditionally after both (or
//! only one) of the subproblems turns the method into scaled
//! Peaceman–Rachford (or Douglas–Rachford) splitting; see [`Variant`].
//!
//! The loss enters only through [`solve_f_subproblem`] and the
//! [`Problem::loss`]/[`Problem::loss_gradient`] pair. Another smooth convex
//! loss would replace those three and nothing else.

use serde::{Deserialize, Serialize};

use crate::boxqp::{solve_boxqp, BoxDomain, BoxQpConfig, BoxQpResult};
use crate::error::{check_len, Error, Result};
use crate::operator::{NormalPlusDiagonal, ScaledRowGram};
use crate::pcg::{pcg_solve, PcgConfig, PcgStatus};
use crate::sparse::{DiagonalScaling, SparseMatrix};
use crate::vecops::{add, dot, ensure_finite, norm1, norm2, norm_inf, sub};

/// `λ‖Rβ‖₁`.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltySpec {
    lambda: f64,
    r: SparseMatrix,
}

impl PenaltySpec {
    pub fn new(lambda: f64, r: SparseMatrix) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "λ must be positive and finite, got {lambda}"
            )));
        }
        Ok(Self { lambda, r })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn r(&self) -> &SparseMatrix {
        &self.r
    }

    /// `R = I`, where the h-subproblem has a closed form.
    pub fn is_lasso(&self) -> bool {
        self.r.is_identity()
    }
}

/// A generalized lasso instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    x: SparseMatrix,
    y: Vec<f64>,
    penalty: PenaltySpec,
}

impl Problem {
    pub fn new(x: SparseMatrix, y: Vec<f64>, penalty: PenaltySpec) -> Result<Self> {
        check_len("response length vs. rows of X", x.nrows(), y.len())?;
        check_len("columns of R vs. columns of X", x.ncols(), penalty.r.ncols())?;
        ensure_finite("response y", &y)?;
        Ok(Self { x, y, penalty })
    }

    /// Signal approximation: `X = I`.
    pub fn identity_design(y: Vec<f64>, penalty: PenaltySpec) -> Result<Self> {
        let x = SparseMatrix::identity(y.len());
        Self::new(x, y, penalty)
    }

    pub fn x(&self) -> &SparseMatrix {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn penalty(&self) -> &PenaltySpec {
        &self.penalty
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn has_identity_design(&self) -> bool {
        self.x.is_identity()
    }

    /// `f(β) = ½‖y − Xβ‖²`
    pub fn loss(&self, beta: &[f64]) -> Result<f64> {
        let r = sub(&self.x.matvec(beta)?, &self.y);
        Ok(0.5 * dot(&r, &r))
    }

    /// `∇f(β) = Xᵀ(Xβ − y)`
    pub fn loss_gradient(&self, beta: &[f64]) -> Result<Vec<f64>> {
        let r = sub(&self.x.matvec(beta)?, &self.y);
        self.x.matvec_t(&r)
    }

    /// `h(β) = λ‖Rβ‖₁`
    pub fn penalty_value(&self, beta: &[f64]) -> Result<f64> {
        Ok(self.penalty.lambda * norm1(&self.penalty.r.matvec(beta)?))
    }
}

/// `𝓛(β) = ½‖y − Xβ‖² + λ‖Rβ‖₁`
pub fn objective(problem: &Problem, beta: &[f64]) -> Result<f64> {
    check_len("β", problem.dim(), beta.len())?;
    Ok(problem.loss(beta)? + problem.penalty_value(beta)?)
}

/// `D = diag(XᵀX)`, floored at `floor`.
pub fn build_scaling(problem: &Problem, floor: f64) -> Result<DiagonalScaling> {
    problem.x.column_sq_norms(floor)
}

/// Which subproblems move the incumbent, and how.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Descent test after both subproblems.
    Alin,
    /// Unconditional update after both subproblems.
    PeacemanRachford,
    /// Unconditional update after the h-subproblem, never after f.
    DouglasRachfordAfterH,
    /// Unconditional update after the f-subproblem, never after h.
    DouglasRachfordAfterF,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum UpdatePolicy {
    Test,
    Always,
    Never,
}

impl Variant {
    fn after_h(self) -> UpdatePolicy {
        match self {
            Variant::Alin => UpdatePolicy::Test,
            Variant::PeacemanRachford | Variant::DouglasRachfordAfterH => UpdatePolicy::Always,
            Variant::DouglasRachfordAfterF => UpdatePolicy::Never,
        }
    }

    fn after_f(self) -> UpdatePolicy {
        match self {
            Variant::Alin => UpdatePolicy::Test,
            Variant::PeacemanRachford | Variant::DouglasRachfordAfterF => UpdatePolicy::Always,
            Variant::DouglasRachfordAfterH => UpdatePolicy::Never,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlinConfig {
    /// Descent-test parameter `γ ∈ (0, 1)`.
    pub gamma: f64,
    /// Stopping test: gap `≤ eps_abs + eps_rel·|𝓛(β̂)|`.
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub max_iterations: usize,
    /// Floor on the entries of `D`.
    pub scaling_floor: f64,
    pub variant: Variant,
    /// Loss-subproblem CG.
    pub pcg: PcgConfig,
    /// Penalty-subproblem dual solver. Its tolerance is replaced by the
    /// schedule below, scaled by `max(1, ‖b‖)` of each dual.
    pub boxqp: BoxQpConfig,
    pub dual_tolerance_start: f64,
    pub dual_tolerance_factor: f64,
    pub dual_tolerance_floor: f64,
    /// Solve `X = I` problems started at `y` with a single dual solve.
    pub identity_fast_path: bool,
}

impl Default for AlinConfig {
    fn default() -> Self {
        Self {
            gamma: 0.1,
            eps_abs: 1e-10,
            eps_rel: 1e-8,
            max_iterations: 1000,
            scaling_floor: 1e-8,
            variant: Variant::Alin,
            pcg: PcgConfig::default(),
            boxqp: BoxQpConfig::default(),
            dual_tolerance_start: 1e-6,
            dual_tolerance_factor: 0.5,
            dual_tolerance_floor: 1e-10,
            identity_fast_path: true,
        }
    }
}

impl AlinConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "γ must lie in (0, 1), got {}",
                self.gamma
            )));
        }
        if !(self.eps_abs > 0.0) || !(self.eps_rel >= 0.0) {
            return Err(Error::InvalidArgument(
                "stopping tolerance must be positive".into(),
            ));
        }
        if !(self.scaling_floor > 0.0) {
            return Err(Error::InvalidArgument(
                "scaling floor must be positive".into(),
            ));
        }
        if !(self.dual_tolerance_floor > 0.0)
            || !(self.dual_tolerance_start >= self.dual_tolerance_floor)
            || !(self.dual_tolerance_factor > 0.0 && self.dual_tolerance_factor <= 1.0)
        {
            return Err(Error::InvalidArgument(
                "invalid dual tolerance schedule".into(),
            ));
        }
        self.pcg.validate()?;
        self.boxqp.validate()
    }

    /// Relative dual tolerance at outer iteration `k` (1-based).
    pub fn dual_tolerance(&self, k: usize) -> f64 {
        let exp = k.saturating_sub(1).min(i32::MAX as usize) as i32;
        (self.dual_tolerance_start * self.dual_tolerance_factor.powi(exp))
            .max(self.dual_tolerance_floor)
    }
}

/// Live state of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct AlinState {
    /// Incumbent `β̂`.
    pub beta_hat: Vec<f64>,
    /// Last penalty-subproblem solution `β̃_h`.
    pub beta_h: Vec<f64>,
    /// Last loss-subproblem solution `β̃_f`.
    pub beta_f: Vec<f64>,
    pub s_f: Vec<f64>,
    pub s_h: Vec<f64>,
    /// Proximal centers `z_f = β̂ − D⁻¹s_f`, `z_h = β̂ − D⁻¹s_h`.
    pub z_f: Vec<f64>,
    pub z_h: Vec<f64>,
    /// Dual multipliers of the last h-subproblem, reused as warm start.
    pub mu: Vec<f64>,
    pub d: DiagonalScaling,
    pub iteration: usize,
    /// `𝓛(β̂)`
    pub objective_hat: f64,
    /// `f(β̃_f)` and `h(β̃_h)`, the constants of the two linearizations.
    pub loss_at_beta_f: f64,
    pub penalty_at_beta_h: f64,
}

/// One line of the JSON-lines trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    /// `𝓛(β̂)` at the end of the iteration.
    pub objective: f64,
    /// Last model value `f(β̃)+h̃(β̃)` or `f̃(β̃)+h(β̃)` that was tested.
    pub model_value: f64,
    pub accepted_h: bool,
    pub accepted_f: bool,
    /// `‖s_f + s_h‖_∞`
    pub kkt_inf_norm: f64,
    pub cg_iters: usize,
    pub boxqp_cycles: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunStatus {
    Optimal,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct AlinOutcome {
    pub beta: Vec<f64>,
    pub trace: Vec<IterationRecord>,
    pub status: RunStatus,
    pub state: AlinState,
}

impl AlinOutcome {
    pub fn objective(&self) -> f64 {
        self.state.objective_hat
    }
}

/// Result of a penalty subproblem.
#[derive(Debug, Clone)]
pub struct HStep {
    pub beta: Vec<f64>,
    pub s_h: Vec<f64>,
    pub mu: Vec<f64>,
    pub boxqp_cycles: usize,
    pub cg_iterations: usize,
    /// `‖g^P‖` of the dual solution, zero for closed forms.
    pub dual_certificate: f64,
}

/// Result of a loss subproblem.
#[derive(Debug, Clone)]
pub struct FStep {
    pub beta: Vec<f64>,
    pub s_f: Vec<f64>,
    pub cg_iterations: usize,
    pub residual_norm: f64,
}

fn dual_jacobi(r: &SparseMatrix, d: &DiagonalScaling, floor: f64) -> Result<DiagonalScaling> {
    DiagonalScaling::floored(r.row_gram_diag(d)?, floor)
}

/// Penalty subproblem `min s_fᵀβ + λ‖Rβ‖₁ + ½‖β − β̂‖²_D` through its dual
/// `min ½μᵀRD⁻¹Rᵀμ − μᵀR(β̂ − D⁻¹s_f)` over `‖μ‖_∞ ≤ λ`, warm-started
/// from `state.mu`. Recovers `β̃_h = β̂ − D⁻¹(s_f + Rᵀμ)`.
pub fn solve_h_subproblem(
    state: &AlinState,
    problem: &Problem,
    cfg: &BoxQpConfig,
    floor: f64,
) -> Result<HStep> {
    let r = &problem.penalty.r;
    let lambda = problem.penalty.lambda;
    let d = &state.d;
    let center = sub(&state.beta_hat, &d.solve(&state.s_f));
    let b = r.matvec(&center)?;
    let a = ScaledRowGram { r, d };
    let m = dual_jacobi(r, d, floor)?;
    let bx = BoxDomain::new(lambda, r.nrows())?;
    let warm = (state.mu.len() == r.nrows()).then_some(state.mu.as_slice());
    let mut cfg = *cfg;
    cfg.tolerance *= norm2(&b).max(1.0);
    let dual: BoxQpResult = solve_boxqp(&a, &b, &bx, &m, warm, &cfg)?;
    if !dual.converged() {
        return Err(Error::NotConverged {
            solver: "box-QP",
            iteration: state.iteration,
            detail: format!(
                "‖g^P‖ = {:.3e} > {:.3e} after {} cycles",
                dual.projected_gradient_norm, cfg.tolerance, dual.cycles
            ),
        });
    }
    let rt_mu = r.matvec_t(&dual.x)?;
    let beta = sub(&state.beta_hat, &d.solve(&add(&state.s_f, &rt_mu)));
    let s_h = subgradient_from_step(&state.s_f, d, &beta, &state.beta_hat);
    Ok(HStep {
        beta,
        s_h,
        mu: dual.x,
        boxqp_cycles: dual.cycles,
        cg_iterations: dual.cg_iterations,
        dual_certificate: dual.projected_gradient_norm,
    })
}

/// `−s_other − D(β̃ − β̂)`
fn subgradient_from_step(
    s_other: &[f64],
    d: &DiagonalScaling,
    trial: &[f64],
    hat: &[f64],
) -> Vec<f64> {
    let step = d.apply(&sub(trial, hat));
    s_other.iter().zip(&step).map(|(s, t)| -s - t).collect()
}

fn soft_threshold(t: f64, k: f64) -> f64 {
    t.signum() * (t.abs() - k).max(0.0)
}

/// Closed-form penalty subproblem for `R = I`:
/// `β̃_j = sgn(τ_j)·max(0, |τ_j| − λ/d_j)` with `τ_j = β̂_j − s_fj/d_j`.
pub fn lasso_prox(state: &AlinState, problem: &Problem) -> Result<HStep> {
    if !problem.penalty.is_lasso() {
        return Err(Error::InvalidArgument(
            "closed-form prox requires R = I".into(),
        ));
    }
    let lambda = problem.penalty.lambda;
    let beta: Vec<f64> = state
        .beta_hat
        .iter()
        .zip(&state.s_f)
        .zip(state.d.entries())
        .map(|((b, s), d)| soft_threshold(b - s / d, lambda / d))
        .collect();
    let s_h = subgradient_from_step(&state.s_f, &state.d, &beta, &state.beta_hat);
    let mu = s_h.iter().map(|v| v.clamp(-lambda, lambda)).collect();
    Ok(HStep {
        beta,
        s_h,
        mu,
        boxqp_cycles: 0,
        cg_iterations: 0,
        dual_certificate: 0.0,
    })
}

/// Loss subproblem: `(XᵀX + D)δ = Xᵀ(y − Xβ̂) − s_h` by CG from zero with
/// preconditioner `2D`; `β̃_f = β̂ + δ` and `s_f = −s_h − Dδ`.
pub fn solve_f_subproblem(state: &AlinState, problem: &Problem, cfg: &PcgConfig) -> Result<FStep> {
    let x = &problem.x;
    let d = &state.d;
    let residual = sub(&problem.y, &x.matvec(&state.beta_hat)?);
    let rhs = sub(&x.matvec_t(&residual)?, &state.s_h);
    let a = NormalPlusDiagonal { x, d };
    let out = pcg_solve(&a, &rhs, &d.scaled(2.0), &vec![0.0; rhs.len()], cfg)?;
    if out.status != PcgStatus::Converged {
        return Err(Error::NotConverged {
            solver: "conjugate gradient",
            iteration: state.iteration,
            detail: format!(
                "{:?} after {} iterations, residual {:.3e}",
                out.status, out.iterations, out.residual_norm
            ),
        });
    }
    let beta = add(&state.beta_hat, &out.x);
    let s_f = subgradient_from_step(&state.s_h, d, &beta, &state.beta_hat);
    Ok(FStep {
        beta,
        s_f,
        cg_iterations: out.iterations,
        residual_norm: out.residual_norm,
    })
}

/// Descent test: `candidate ≤ (1−γ)·incumbent + γ·model`.
pub fn update_test(candidate: f64, model: f64, incumbent: f64, gamma: f64) -> bool {
    candidate <= (1.0 - gamma) * incumbent + gamma * model
}

/// `model ≥ incumbent − (eps_abs + eps_rel·|incumbent|)`
pub fn stopping_test(model: f64, incumbent: f64, eps_abs: f64, eps_rel: f64) -> bool {
    model >= incumbent - (eps_abs + eps_rel * incumbent.abs())
}

/// Outcome of the fast path for `X = I` started at `β̂ = y`.
#[derive(Debug, Clone)]
pub struct FastPathSolution {
    pub beta: Vec<f64>,
    pub mu: Vec<f64>,
    pub boxqp_cycles: usize,
    pub cg_iterations: usize,
    pub dual_certificate: f64,
}

/// With `X = I`, `β̂ = y` gives `s_f = 0` and `D = I`, so the first
/// h-subproblem is the whole problem: maximize `−½μᵀRRᵀμ + μᵀRy` over
/// `‖μ‖_∞ ≤ λ` and return `β = y − Rᵀμ`.
pub fn identity_design_fast_path(problem: &Problem, config: &AlinConfig) -> Result<FastPathSolution> {
    if !problem.has_identity_design() {
        return Err(Error::InvalidArgument(
            "fast path requires an identity design matrix".into(),
        ));
    }
    let p = problem.dim();
    let state = AlinState::initial(problem, problem.y.to_vec(), DiagonalScaling::identity(p), Vec::new())?;
    let step = if problem.penalty.is_lasso() {
        lasso_prox(&state, problem)?
    } else {
        let mut cfg = config.boxqp;
        cfg.tolerance = config.dual_tolerance_floor;
        solve_h_subproblem(&state, problem, &cfg, config.scaling_floor)?
    };
    Ok(FastPathSolution {
        beta: step.beta,
        mu: step.mu,
        boxqp_cycles: step.boxqp_cycles,
        cg_iterations: step.cg_iterations,
        dual_certificate: step.dual_certificate,
    })
}

impl AlinState {
    /// State at `β̂⁰`: `β̃_f = β̂⁰`, `s_f = ∇f(β̂⁰)`, `s_h = 0`.
    pub fn initial(
        problem: &Problem,
        beta0: Vec<f64>,
        d: DiagonalScaling,
        mu: Vec<f64>,
    ) -> Result<Self> {
        check_len("starting point", problem.dim(), beta0.len())?;
        ensure_finite("starting point", &beta0)?;
        let s_f = problem.loss_gradient(&beta0)?;
        let loss = problem.loss(&beta0)?;
        let pen = problem.penalty_value(&beta0)?;
        let z_f = sub(&beta0, &d.solve(&s_f));
        let p = beta0.len();
        Ok(Self {
            beta_h: beta0.clone(),
            beta_f: beta0.clone(),
            s_h: vec![0.0; p],
            z_h: beta0.clone(),
            z_f,
            s_f,
            mu,
            d,
            iteration: 0,
            objective_hat: loss + pen,
            loss_at_beta_f: loss,
            penalty_at_beta_h: pen,
            beta_hat: beta0,
        })
    }

    /// `‖s_f + s_h‖_∞`
    pub fn kkt_residual(&self) -> f64 {
        norm_inf(&add(&self.s_f, &self.s_h))
    }
}

/// What happened in one half-iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfStep {
    pub model_value: f64,
    pub trial_objective: f64,
    pub stop: bool,
    pub accepted: bool,
    pub cg_iterations: usize,
    pub boxqp_cycles: usize,
}

/// Step-by-step driver. [`run`] is the usual entry point; the solver is
/// public so that individual half-iterations can be inspected.
pub struct AlinSolver<'a> {
    problem: &'a Problem,
    config: AlinConfig,
    state: AlinState,
    trace: Vec<IterationRecord>,
}

impl<'a> AlinSolver<'a> {
    pub fn new(problem: &'a Problem, config: AlinConfig, beta0: Option<&[f64]>) -> Result<Self> {
        config.validate()?;
        let beta0 = match beta0 {
            Some(b) => b.to_vec(),
            None if problem.has_identity_design() => problem.y.clone(),
            None => vec![0.0; problem.dim()],
        };
        let d = build_scaling(problem, config.scaling_floor)?;
        let state = AlinState::initial(problem, beta0, d, Vec::new())?;
        Ok(Self {
            problem,
            config,
            state,
            trace: Vec::new(),
        })
    }

    pub fn state(&self) -> &AlinState {
        &self.state
    }

    pub fn trace(&self) -> &[IterationRecord] {
        &self.trace
    }

    pub fn config(&self) -> &AlinConfig {
        &self.config
    }

    fn stop(&self, model: f64) -> bool {
        stopping_test(
            model,
            self.state.objective_hat,
            self.config.eps_abs,
            self.config.eps_rel,
        )
    }

    fn decide(&self, policy: UpdatePolicy, candidate: f64, model: f64) -> bool {
        match policy {
            UpdatePolicy::Test => {
                update_test(candidate, model, self.state.objective_hat, self.config.gamma)
            }
            UpdatePolicy::Always => true,
            UpdatePolicy::Never => false,
        }
    }

    /// h-subproblem, stopping test, update step, then `z_h ← β̂ + β̃_h − z_f`.
    pub fn h_half(&mut self) -> Result<HalfStep> {
        let problem = self.problem;
        let step = if problem.penalty.is_lasso() {
            lasso_prox(&self.state, problem)?
        } else {
            let mut cfg = self.config.boxqp;
            cfg.tolerance = self.config.dual_tolerance(self.state.iteration.max(1));
            solve_h_subproblem(&self.state, problem, &cfg, self.config.scaling_floor)?
        };
        let st = &mut self.state;
        let loss_h = problem.loss(&step.beta)?;
        let pen_h = problem.penalty_value(&step.beta)?;
        // f̃(β̃_h) = f(β̃_f) + s_fᵀ(β̃_h − β̃_f)
        let model = st.loss_at_beta_f + dot(&st.s_f, &sub(&step.beta, &st.beta_f)) + pen_h;
        let trial = loss_h + pen_h;
        st.beta_h = step.beta;
        st.s_h = step.s_h;
        st.mu = step.mu;
        st.penalty_at_beta_h = pen_h;

        let mut half = HalfStep {
            model_value: model,
            trial_objective: trial,
            stop: self.stop(model),
            accepted: false,
            cg_iterations: step.cg_iterations,
            boxqp_cycles: step.boxqp_cycles,
        };
        if half.stop {
            return Ok(half);
        }
        half.accepted = self.decide(self.config.variant.after_h(), trial, model);
        let st = &mut self.state;
        if half.accepted {
            st.beta_hat = st.beta_h.clone();
            st.objective_hat = trial;
        }
        st.z_h = sub(&add(&st.beta_hat, &st.beta_h), &st.z_f);
        Ok(half)
    }

    /// f-subproblem, stopping test, update step, then `z_f ← β̂ + β̃_f − z_h`.
    pub fn f_half(&mut self) -> Result<HalfStep> {
        let problem = self.problem;
        let step = solve_f_subproblem(&self.state, problem, &self.config.pcg)?;
        let st = &mut self.state;
        let loss_f = problem.loss(&step.beta)?;
        let pen_f = problem.penalty_value(&step.beta)?;
        // h̃(β̃_f) = h(β̃_h) + s_hᵀ(β̃_f − β̃_h)
        let model = loss_f + st.penalty_at_beta_h + dot(&st.s_h, &sub(&step.beta, &st.beta_h));
        let trial = loss_f + pen_f;
        st.beta_f = step.beta;
        st.s_f = step.s_f;
        st.loss_at_beta_f = loss_f;

        let mut half = HalfStep {
            model_value: model,
            trial_objective: trial,
            stop: self.stop(model),
            accepted: false,
            cg_iterations: step.cg_iterations,
            boxqp_cycles: 0,
        };
        if half.stop {
            return Ok(half);
        }
        half.accepted = self.decide(self.config.variant.after_f(), trial, model);
        let st = &mut self.state;
        if half.accepted {
            st.beta_hat = st.beta_f.clone();
            st.objective_hat = trial;
        }
        st.z_f = sub(&add(&st.beta_hat, &st.beta_f), &st.z_h);
        Ok(half)
    }

    /// One outer iteration. Returns `true` when the stopping test fired.
    pub fn iterate(&mut self) -> Result<bool> {
        self.state.iteration += 1;
        let k = self.state.iteration;
        let h = self.h_half()?;
        let mut record = IterationRecord {
            k,
            objective: self.state.objective_hat,
            model_value: h.model_value,
            accepted_h: h.accepted,
            accepted_f: false,
            kkt_inf_norm: self.state.kkt_residual(),
            cg_iters: h.cg_iterations,
            boxqp_cycles: h.boxqp_cycles,
        };
        if h.stop {
            self.trace.push(record);
            return Ok(true);
        }
        let f = self.f_half()?;
        record.objective = self.state.objective_hat;
        record.model_value = f.model_value;
        record.accepted_f = f.accepted;
        record.kkt_inf_norm = self.state.kkt_residual();
        record.cg_iters += f.cg_iterations;
        self.trace.push(record);
        Ok(f.stop)
    }

    pub fn finish(self, status: RunStatus) -> AlinOutcome {
        AlinOutcome {
            beta: self.state.beta_hat.clone(),
            trace: self.trace,
            status,
            state: self.state,
        }
    }

    pub fn solve(mut self) -> Result<AlinOutcome> {
        while self.state.iteration < self.config.max_iterations {
            if self.iterate()? {
                return Ok(self.finish(RunStatus::Optimal));
            }
        }
        Ok(self.finish(RunStatus::MaxIterations))
    }
}

/// Runs the method from `beta0` (default: `y` when `X = I`, else zero).
///
/// An identity design started at `y` is solved by one dual solve; its
/// trace has a single record whose model value equals the objective.
pub fn run(problem: &Problem, config: &AlinConfig, beta0: Option<&[f64]>) -> Result<AlinOutcome> {
    config.validate()?;
    let starts_at_y = match beta0 {
        None => true,
        Some(b) => b == problem.y.as_slice(),
    };
    if config.identity_fast_path && problem.has_identity_design() && starts_at_y {
        return run_identity_fast_path(problem, config);
    }
    AlinSolver::new(problem, config.clone(), beta0)?.solve()
}

fn run_identity_fast_path(problem: &Problem, config: &AlinConfig) -> Result<AlinOutcome> {
    let sol = identity_design_fast_path(problem, config)?;
    let p = problem.dim();
    let mut state = AlinState::initial(
        problem,
        problem.y.to_vec(),
        DiagonalScaling::identity(p),
        Vec::new(),
    )?;
    let s_f = state.s_f.clone();
    let s_h = problem.penalty.r.matvec_t(&sol.mu)?;
    let loss = problem.loss(&sol.beta)?;
    let pen = problem.penalty_value(&sol.beta)?;
    state.iteration = 1;
    state.z_h = sub(&add(&sol.beta, &sol.beta), &state.z_f);
    state.beta_h = sol.beta.clone();
    state.beta_hat = sol.beta.clone();
    state.s_h = s_h;
    state.s_f = s_f;
    state.mu = sol.mu;
    state.objective_hat = loss + pen;
    state.penalty_at_beta_h = pen;
    // The subgradient pair at the solution: ∇f(β*) and Rᵀμ.
    let grad = problem.loss_gradient(&sol.beta)?;
    let kkt = norm_inf(&add(&grad, &state.s_h));
    let record = IterationRecord {
        k: 1,
        objective: state.objective_hat,
        model_value: state.objective_hat,
        accepted_h: true,
        accepted_f: false,
        kkt_inf_norm: kkt,
        cg_iters: sol.cg_iterations,
        boxqp_cycles: sol.boxqp_cycles,
    };
    Ok(AlinOutcome {
        beta: sol.beta,
        trace: vec![record],
        status: RunStatus::Optimal,
        state,
    })
}
