//! The prox-linear method for `F = g + h∘c`.
//!
//! Each step linearizes `c` at the current point and solves the strongly convex
//! model problem `min_x F(x; x_t) + (beta/2)||x - x_t||^2`. The scaled step
//! `beta (x_{t+1} - x_t)` is the stationarity surrogate: its norm is within a
//! factor 4 (below) and 3 (above) of `||∇F_{1/(2 beta)}(x_t)||`.

mod rate;
pub mod saddle;

pub use rate::{estimate_local_rate, LocalRate};

use crate::composite::CompositeProblem;
use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::report::SolverReport;

use saddle::LinearizedSubproblem;

/// Iteration cap for each model solve.
pub const DEFAULT_INNER_BUDGET: usize = 200_000;

/// The convex model `F(x; y) = g(x) + h(c(y) + ∇c(y)(x - y))` anchored at `y`.
pub struct LocalModel<'a> {
    problem: &'a CompositeProblem,
    anchor: Vector,
    c_anchor: Vector,
}

impl<'a> LocalModel<'a> {
    pub fn new(problem: &'a CompositeProblem, anchor: &Vector) -> Self {
        Self {
            problem,
            anchor: anchor.clone(),
            c_anchor: problem.c.eval(anchor),
        }
    }

    pub fn anchor(&self) -> &Vector {
        &self.anchor
    }

    pub fn value(&self, x: &Vector) -> f64 {
        let lin = self.problem.c.jvp(&self.anchor, &(x - &self.anchor));
        self.problem.g.value(x) + self.problem.h.value(&(&self.c_anchor + &lin))
    }
}

/// `F(x; y)` with one Jacobian-vector product.
pub fn model_value(problem: &CompositeProblem, y: &Vector, x: &Vector) -> f64 {
    LocalModel::new(problem, y).value(x)
}

#[derive(Clone, Debug)]
pub struct SurrogateGradient {
    /// `beta (x_next - x_t)`
    pub g_vec: Vector,
    pub norm: f64,
    pub beta_used: f64,
}

#[derive(Clone, Debug)]
pub struct ProxLinearStep {
    pub x_next: Vector,
    pub surrogate: SurrogateGradient,
    /// Certified primal-dual gap of the model solve.
    pub gap: f64,
    pub inner_iterations: usize,
    pub jvp_calls: u64,
    pub vjp_calls: u64,
}

/// One prox-linear step from `x_t` with penalty `beta >= L * beta_c`.
pub fn proxlinear_step(
    problem: &CompositeProblem,
    x_t: &Vector,
    beta: f64,
    inner_tol: f64,
) -> Result<ProxLinearStep> {
    proxlinear_step_with_budget(problem, x_t, beta, inner_tol, DEFAULT_INNER_BUDGET)
}

pub fn proxlinear_step_with_budget(
    problem: &CompositeProblem,
    x_t: &Vector,
    beta: f64,
    inner_tol: f64,
    budget: usize,
) -> Result<ProxLinearStep> {
    x_t.check_dim(problem.dim())?;
    // Relative slack so that passing `problem.penalty()` recomputed elsewhere is accepted.
    if !(beta >= problem.penalty() * (1.0 - 1e-12)) {
        return Err(Error::invalid(format!(
            "penalty {beta} is below L * beta = {}",
            problem.penalty()
        )));
    }
    if !(inner_tol > 0.0) {
        return Err(Error::invalid("inner tolerance must be positive"));
    }
    let sub = LinearizedSubproblem::new(
        problem.g.as_ref(),
        problem.h.as_ref(),
        problem.c.as_ref(),
        x_t,
        beta,
        x_t.clone(),
    );
    let sol = sub.solve(Some(x_t), inner_tol, budget)?;
    let g_vec = (&sol.x - x_t).scaled(beta);
    let norm = g_vec.norm();
    Ok(ProxLinearStep {
        x_next: sol.x,
        surrogate: SurrogateGradient {
            g_vec,
            norm,
            beta_used: beta,
        },
        gap: sol.gap,
        inner_iterations: sol.iterations,
        // One evaluation of c per model.
        jvp_calls: sol.jvp_calls,
        vjp_calls: sol.vjp_calls,
    })
}

/// Runs prox-linear steps until `||G(x_t)|| <= stat_tol` or `outer_iters` steps.
///
/// History entry `t` holds `F(x_t)` and `||G(x_t)||`; the work column counts
/// Jacobian products. `final_point` is the last computed step `x_{t+1}`.
pub fn proxlinear_run(
    problem: &CompositeProblem,
    x0: &Vector,
    beta: f64,
    outer_iters: usize,
    stat_tol: f64,
    inner_tol: f64,
) -> Result<SolverReport> {
    let mut report = SolverReport::new("proxlinear", x0, 1);
    report.echo("beta", beta);
    report.echo("stat_tol", stat_tol);
    report.echo("inner_tol", inner_tol);
    let mut x = x0.clone();
    let mut work = 0u64;
    for t in 0..=outer_iters {
        let step = proxlinear_step(problem, &x, beta, inner_tol)?;
        work += step.jvp_calls + step.vjp_calls;
        report.oracle_calls.add("jvp", step.jvp_calls);
        report.oracle_calls.add("vjp", step.vjp_calls);
        report.oracle_calls.add("model_solve", 1);
        report.record(&x, problem.value(&x), step.surrogate.norm, work);
        let done = step.surrogate.norm <= stat_tol;
        x = step.x_next;
        if done {
            report.converged = true;
            break;
        }
        if t == outer_iters {
            break;
        }
    }
    report.final_point = x;
    Ok(report)
}

/// `inner_tol = stat_tol / 100`, the default pairing.
pub fn default_inner_tol(stat_tol: f64) -> f64 {
    stat_tol / 100.0
}
