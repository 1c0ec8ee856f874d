//! The parameterized proximal-gradient solvers.
//!
//! Each outer iteration recomputes the ratio parameter
//! `C_k = (lambda ||x^k||_1 + env(A x^k)) / ||x^k||_2` and takes a proximal
//! step on `f - C_k g` at the gradient-shifted point
//! `x^k - alpha_k * grad_env(x^k)`:
//!
//! * [`solve_ppga`] uses a constant step below `1 / L`; its objective values
//!   decrease monotonically.
//! * [`solve_ppga_ls`] picks a Barzilai-Borwein trial step, then backtracks by
//!   `shrink` until the new point is feasible and its objective does not
//!   exceed the largest of the last `window + 1` ratio values minus a
//!   quadratic decrease term. `window = 0` is the monotone variant, larger
//!   windows the nonmonotone one.
//!
//! The module also houses the ADMM warm start that produces the approximate
//! l1 solution every experiment starts from, and the pseudoinverse-based
//! initial point used on noisy data.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::linalg::{self, Cholesky, DenseMatrix, Vector};
use crate::model::{PenaltyObjective, ProblemInstance};
use crate::prox::{prox_rho, soft_threshold, ProxCase, ProxParams, ProxSelection};

/// Hard cap on step shrinks within one iteration. The termination theory
/// bounds the required count by a small number; the cap only guards
/// numerical pathologies.
pub const BACKTRACK_CAP: u32 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Relative iterate change fell below `rel_tol`.
    RelTol,
    /// Iteration budget exhausted.
    MaxIter,
    /// Backtracking exceeded [`BACKTRACK_CAP`] (or the step degenerated);
    /// the result carries the best iterate reached.
    LineSearchFail,
}

impl Termination {
    pub fn label(self) -> &'static str {
        match self {
            Termination::RelTol => "rel_tol",
            Termination::MaxIter => "max_iter",
            Termination::LineSearchFail => "line_search_fail",
        }
    }
}

/// Halve the smoothing weight every `halve_every` iterations, frozen once the
/// iteration count exceeds `freeze_after`.
#[derive(Debug, Clone, Copy)]
pub struct LambdaSchedule {
    pub halve_every: usize,
    pub freeze_after: usize,
}

impl Default for LambdaSchedule {
    fn default() -> Self {
        LambdaSchedule {
            halve_every: 10,
            freeze_after: 500,
        }
    }
}

impl LambdaSchedule {
    /// Smoothing weight active at 0-based outer iteration `k`.
    pub fn lambda_at(&self, lambda0: f64, k: usize) -> f64 {
        let capped = k.min(self.freeze_after);
        lambda0 * 0.5f64.powi((capped / self.halve_every) as i32)
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Lower step bound (alpha underline).
    pub step_min: f64,
    /// Upper step bound (alpha bar); the fixed-step solver runs at exactly
    /// this value and requires it below `1 / L`.
    pub step_max: f64,
    /// Backtracking factor eta in (0, 1).
    pub shrink: f64,
    /// Sufficient-decrease weight `a >= 0` in the acceptance test.
    pub sufficient_decrease: f64,
    /// Nonmonotone memory `N`; the acceptance test compares against the max
    /// ratio value over the last `window + 1` iterations.
    pub window: usize,
    /// Stop once `||x^{k+1} - x^k|| / ||x^k|| <= rel_tol`.
    pub rel_tol: f64,
    pub max_iter: usize,
    pub lambda_schedule: Option<LambdaSchedule>,
}

impl SolverConfig {
    /// Constant-step configuration at `0.999 / lipschitz`.
    pub fn fixed_step(lipschitz: f64, rel_tol: f64, max_iter: usize) -> Self {
        let alpha = 0.999 / lipschitz;
        SolverConfig {
            step_min: alpha,
            step_max: alpha,
            shrink: 0.5,
            sufficient_decrease: 0.0,
            window: 0,
            rel_tol,
            max_iter,
            lambda_schedule: None,
        }
    }

    /// Line-search configuration with the standard experiment constants:
    /// trial steps clamped to `[1e-8 / L, 10 / L]`, eta 0.5, a 1e-8.
    pub fn line_search(lipschitz: f64, window: usize, rel_tol: f64, max_iter: usize) -> Self {
        SolverConfig {
            step_min: 1e-8 / lipschitz,
            step_max: 10.0 / lipschitz,
            shrink: 0.5,
            sufficient_decrease: 1e-8,
            window,
            rel_tol,
            max_iter,
            lambda_schedule: None,
        }
    }

    pub fn with_lambda_schedule(mut self, schedule: LambdaSchedule) -> Self {
        self.lambda_schedule = Some(schedule);
        self
    }

    fn validate(&self) -> Result<()> {
        if !(crate::error::positive(self.step_min) && self.step_min <= self.step_max) {
            return Err(Error::InvalidArgument(format!(
                "step bounds must satisfy 0 < step_min <= step_max, got [{}, {}]",
                self.step_min, self.step_max
            )));
        }
        if !(crate::error::positive(self.shrink) && self.shrink < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "shrink factor must lie in (0, 1), got {}",
                self.shrink
            )));
        }
        if !crate::error::nonnegative(self.sufficient_decrease) {
            return Err(Error::InvalidArgument(
                "sufficient-decrease weight must be nonnegative".into(),
            ));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be positive".into()));
        }
        if !crate::error::nonnegative(self.rel_tol) {
            return Err(Error::InvalidArgument("rel_tol must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolverResult {
    pub x_final: Vector,
    /// Objective at `x^0 .. x^K` (length `iterations + 1`), evaluated with
    /// the smoothing weight active when each iterate was current.
    pub objective_trace: Vector,
    /// Accepted step per iteration.
    pub step_trace: Vector,
    /// `||x^{k+1} - x^k||` per iteration.
    pub step_norm_trace: Vector,
    /// `||x^{k+1}||` per iteration.
    pub iterate_norm_trace: Vector,
    /// Step shrinks needed per iteration; all zero for the fixed-step solver.
    pub backtrack_trace: Vec<u32>,
    /// Which prox branch produced each iterate.
    pub prox_case_trace: Vec<ProxCase>,
    pub iterations: usize,
    pub termination: Termination,
    /// `||x - ppga_step(x)|| / (1 + ||x||)` at the final iterate and step.
    pub stationarity_residual: f64,
}

/// One proximal-gradient step from `x` with step `alpha`.
///
/// Returns the prox selection so callers can inspect which branch fired; the
/// new iterate is `selection.result`. Errors when `x` is outside the domain.
pub fn ppga_step(obj: &PenaltyObjective, x: &[f64], alpha: f64) -> Result<ProxSelection> {
    if !crate::error::positive(alpha) {
        return Err(Error::InvalidArgument(format!(
            "step must be positive, got {alpha}"
        )));
    }
    let ratio = obj.ratio_parameter(x)?;
    let grad = obj.envelope_gradient(x);
    let shifted = linalg::axpy(x, -alpha, &grad);
    let params = ProxParams::new(
        alpha * obj.lambda(),
        ratio / obj.lambda(),
        obj.problem().ball_radius(),
    )?;
    Ok(prox_rho(&shifted, &params))
}

/// Prox-gradient fixed-point residual `||x - T(x)|| / (1 + ||x||)`; zero (up
/// to the set-valued representative convention) exactly at stationary points.
pub fn stationarity_residual(obj: &PenaltyObjective, x: &[f64], alpha: f64) -> Result<f64> {
    let step = ppga_step(obj, x, alpha)?;
    let moved = linalg::sub(x, &step.result);
    Ok(linalg::norm2(&moved) / (1.0 + linalg::norm2(x)))
}

/// Line-search bookkeeping: the ring buffer of the last `window + 1` ratio
/// values (for the nonmonotone acceptance test) and the previous iterate and
/// gradient (for the Barzilai-Borwein trial step).
struct LineSearchState {
    window: usize,
    recent_ratios: VecDeque<f64>,
    previous: Option<(Vector, Vector)>,
}

impl LineSearchState {
    fn new(window: usize) -> Self {
        LineSearchState {
            window,
            recent_ratios: VecDeque::with_capacity(window + 1),
            previous: None,
        }
    }

    fn push_ratio(&mut self, ratio: f64) {
        if self.recent_ratios.len() > self.window {
            self.recent_ratios.pop_front();
        }
        self.recent_ratios.push_back(ratio);
    }

    fn window_max(&self) -> f64 {
        self.recent_ratios
            .iter()
            .fold(f64::NEG_INFINITY, |m, &v| m.max(v))
    }

    /// BB quotient `||dx||^2 / |<dx, d_grad>|` clamped to the step bounds;
    /// the upper bound on the first iteration or at zero curvature.
    fn trial_step(&self, x: &[f64], grad: &[f64], cfg: &SolverConfig) -> f64 {
        match &self.previous {
            None => cfg.step_max,
            Some((x_prev, grad_prev)) => {
                let dx = linalg::sub(x, x_prev);
                let dg = linalg::sub(grad, grad_prev);
                let curvature = linalg::dot(&dx, &dg);
                if curvature != 0.0 {
                    (linalg::dot(&dx, &dx) / curvature.abs()).clamp(cfg.step_min, cfg.step_max)
                } else {
                    cfg.step_max
                }
            }
        }
    }

    fn remember(&mut self, x: Vector, grad: Vector) {
        self.previous = Some((x, grad));
    }
}

#[derive(Default)]
struct Traces {
    objective: Vector,
    step: Vector,
    step_norm: Vector,
    iterate_norm: Vector,
    backtracks: Vec<u32>,
    prox_case: Vec<ProxCase>,
}

fn finish(
    obj: &PenaltyObjective,
    x: Vector,
    ax: &[f64],
    mut traces: Traces,
    iterations: usize,
    termination: Termination,
) -> SolverResult {
    traces.objective.push(obj.q_lambda_from_parts(&x, ax));
    let alpha = traces.step.last().copied().unwrap_or(1.0 / obj.lipschitz());
    let stationarity = stationarity_residual(obj, &x, alpha).unwrap_or(f64::NAN);
    SolverResult {
        x_final: x,
        objective_trace: traces.objective,
        step_trace: traces.step,
        step_norm_trace: traces.step_norm,
        iterate_norm_trace: traces.iterate_norm,
        backtrack_trace: traces.backtracks,
        prox_case_trace: traces.prox_case,
        iterations,
        termination,
        stationarity_residual: stationarity,
    }
}

/// Fixed-step solver. Requires `cfg.step_max < 1 / obj.lipschitz()`; runs at
/// that constant step. The objective trace is nonincreasing.
pub fn solve_ppga(obj: &PenaltyObjective, x0: &[f64], cfg: &SolverConfig) -> Result<SolverResult> {
    cfg.validate()?;
    let alpha = cfg.step_max;
    if alpha >= 1.0 / obj.lipschitz() {
        return Err(Error::InvalidArgument(format!(
            "fixed step {alpha} must stay below 1/L = {}",
            1.0 / obj.lipschitz()
        )));
    }
    obj.ratio_parameter(x0)?;

    let mut active = obj.clone();
    let mut x = x0.to_vec();
    let mut ax = active.problem().matrix().matvec(&x)?;
    let mut traces = Traces::default();
    let mut iterations = 0;
    let mut termination = Termination::MaxIter;

    for k in 0..cfg.max_iter {
        if let Some(schedule) = cfg.lambda_schedule {
            let lambda = schedule.lambda_at(obj.lambda(), k);
            if lambda != active.lambda() {
                active = active.with_lambda(lambda);
            }
        }
        let ratio = active.q_lambda_from_parts(&x, &ax);
        traces.objective.push(ratio);

        let residual = linalg::sub(&ax, active.problem().measurements());
        let grad = active.envelope_gradient_from_residual(&residual);
        let shifted = linalg::axpy(&x, -alpha, &grad);
        let params = ProxParams::new(
            alpha * active.lambda(),
            ratio / active.lambda(),
            active.problem().ball_radius(),
        )?;
        let selection = prox_rho(&shifted, &params);
        let x_next = selection.result;
        if x_next.iter().all(|&v| v == 0.0) {
            termination = Termination::LineSearchFail;
            traces.objective.pop();
            break;
        }
        let ax_next = active.problem().matrix().matvec(&x_next)?;
        let step_norm = linalg::norm2(&linalg::sub(&x_next, &x));
        let prev_norm = linalg::norm2(&x);

        traces.step.push(alpha);
        traces.step_norm.push(step_norm);
        traces.iterate_norm.push(linalg::norm2(&x_next));
        traces.backtracks.push(0);
        traces.prox_case.push(selection.case);

        x = x_next;
        ax = ax_next;
        iterations = k + 1;

        if step_norm / prev_norm.max(1e-300) <= cfg.rel_tol {
            termination = Termination::RelTol;
            break;
        }
    }

    Ok(finish(&active, x, &ax, traces, iterations, termination))
}

/// Line-search solver: monotone for `window = 0`, nonmonotone otherwise.
///
/// The trial step is the Barzilai-Borwein quotient
/// `||dx||^2 / |<dx, d_grad>|` clamped to `[step_min, step_max]` (step_max on
/// the first iteration or when the quotient is undefined); it is then shrunk
/// by `shrink` until the candidate is feasible and satisfies the acceptance
/// inequality against the window maximum.
pub fn solve_ppga_ls(
    obj: &PenaltyObjective,
    x0: &[f64],
    cfg: &SolverConfig,
) -> Result<SolverResult> {
    cfg.validate()?;
    obj.ratio_parameter(x0)?;

    let mut active = obj.clone();
    let mut x = x0.to_vec();
    let mut ax = active.problem().matrix().matvec(&x)?;
    let mut state = LineSearchState::new(cfg.window);
    let mut traces = Traces::default();
    let mut iterations = 0;
    let mut termination = Termination::MaxIter;

    for k in 0..cfg.max_iter {
        if let Some(schedule) = cfg.lambda_schedule {
            let lambda = schedule.lambda_at(obj.lambda(), k);
            if lambda != active.lambda() {
                active = active.with_lambda(lambda);
            }
        }
        let ratio = active.q_lambda_from_parts(&x, &ax);
        traces.objective.push(ratio);
        state.push_ratio(ratio);
        let window_max = state.window_max();

        let residual = linalg::sub(&ax, active.problem().measurements());
        let grad = active.envelope_gradient_from_residual(&residual);

        let mut alpha = state.trial_step(&x, &grad, cfg);
        let mut accepted: Option<(f64, ProxSelection, Vector, f64, u32)> = None;
        for backtracks in 0..=BACKTRACK_CAP {
            let shifted = linalg::axpy(&x, -alpha, &grad);
            let params = ProxParams::new(
                alpha * active.lambda(),
                ratio / active.lambda(),
                active.problem().ball_radius(),
            )?;
            let selection = prox_rho(&shifted, &params);
            if selection.result.iter().any(|&v| v != 0.0) {
                let ax_candidate = active.problem().matrix().matvec(&selection.result)?;
                let value = active.q_lambda_from_parts(&selection.result, &ax_candidate);
                let step_norm = linalg::norm2(&linalg::sub(&selection.result, &x));
                let bound =
                    window_max - 0.5 * cfg.sufficient_decrease * step_norm * step_norm;
                if value.is_finite() && value <= bound {
                    accepted = Some((alpha, selection, ax_candidate, step_norm, backtracks));
                    break;
                }
            }
            alpha *= cfg.shrink;
        }

        let Some((alpha, selection, ax_next, step_norm, backtracks)) = accepted else {
            termination = Termination::LineSearchFail;
            traces.objective.pop();
            break;
        };

        let prev_norm = linalg::norm2(&x);
        traces.step.push(alpha);
        traces.step_norm.push(step_norm);
        traces.iterate_norm.push(linalg::norm2(&selection.result));
        traces.backtracks.push(backtracks);
        traces.prox_case.push(selection.case);

        state.remember(std::mem::replace(&mut x, selection.result), grad);
        ax = ax_next;
        iterations = k + 1;

        if step_norm / prev_norm.max(1e-300) <= cfg.rel_tol {
            termination = Termination::RelTol;
            break;
        }
    }

    Ok(finish(&active, x, &ax, traces, iterations, termination))
}

/// Approximate l1 solution by a fixed number of ADMM iterations on
/// `min weight * ||x||_1 + 0.5 ||Ax - b||^2`.
///
/// The x-update solves `(A^T A + rho I) x = A^T b + rho (z - u)` with a
/// factorization computed once; for wide matrices the small system
/// `(rho I + A A^T)` is factored instead and applied through the matrix
/// inversion lemma. Returns the final sparse copy `z`.
pub fn admm_l1_warm_start(
    a: &DenseMatrix,
    b: &[f64],
    weight: f64,
    iters: usize,
    rho: f64,
) -> Result<Vector> {
    if b.len() != a.rows() {
        return Err(Error::DimensionMismatch {
            context: "admm_l1_warm_start",
            expected: a.rows(),
            actual: b.len(),
        });
    }
    if !(crate::error::positive(weight) && crate::error::positive(rho)) || iters == 0 {
        return Err(Error::InvalidArgument(
            "admm_l1_warm_start needs weight > 0, rho > 0, iters >= 1".into(),
        ));
    }
    let m = a.rows();
    let n = a.cols();
    let atb = a.matvec_t(b)?;

    enum Factored {
        Wide(Cholesky),
        Tall(Cholesky),
    }
    let factored = if m < n {
        let mut g = DenseMatrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let v = linalg::dot(a.row(i), a.row(j));
                g.set(i, j, v);
                g.set(j, i, v);
            }
            g.set(i, i, g.get(i, i) + rho);
        }
        Factored::Wide(Cholesky::factor(&g, "admm x-update")?)
    } else {
        let mut g = a.gram();
        for i in 0..n {
            g.set(i, i, g.get(i, i) + rho);
        }
        Factored::Tall(Cholesky::factor(&g, "admm x-update")?)
    };

    let threshold = weight / rho;
    let mut z = vec![0.0; n];
    let mut u = vec![0.0; n];
    for _ in 0..iters {
        let q: Vector = atb
            .iter()
            .zip(z.iter().zip(&u))
            .map(|(&t, (&zi, &ui))| t + rho * (zi - ui))
            .collect();
        let x = match &factored {
            Factored::Wide(chol) => {
                let aq = a.matvec(&q)?;
                let small = chol.solve(&aq);
                let back = a.matvec_t(&small)?;
                q.iter()
                    .zip(&back)
                    .map(|(&qi, &bi)| (qi - bi) / rho)
                    .collect::<Vector>()
            }
            Factored::Tall(chol) => chol.solve(&q),
        };
        let xu: Vector = x.iter().zip(&u).map(|(&xi, &ui)| xi + ui).collect();
        z = soft_threshold(&xu, threshold);
        u = xu.iter().zip(&z).map(|(&s, &zi)| s - zi).collect();
    }
    Ok(z)
}

/// Initial point for noisy problems: move from the minimum-norm least-squares
/// solution toward the l1 warm start until the tube boundary, or keep the
/// warm start if it already satisfies the noise constraint. For full-row-rank
/// matrices the returned point satisfies `||A x0 - b|| <= eps`.
pub fn noisy_warm_start(problem: &ProblemInstance, x_l1: &[f64]) -> Result<Vector> {
    if x_l1.len() != problem.dimension() {
        return Err(Error::DimensionMismatch {
            context: "noisy_warm_start",
            expected: problem.dimension(),
            actual: x_l1.len(),
        });
    }
    let ax = problem.matrix().matvec(x_l1)?;
    let residual_norm = linalg::norm2(&linalg::sub(&ax, problem.measurements()));
    if residual_norm <= problem.noise_bound() {
        return Ok(x_l1.to_vec());
    }
    let pinv_b = linalg::min_norm_lsq(problem.matrix(), problem.measurements(), 1e-10)?;
    let eps = problem.noise_bound();
    Ok(pinv_b
        .iter()
        .zip(x_l1)
        .map(|(&p, &xi)| p + eps * (xi - p) / residual_norm)
        .collect())
}
