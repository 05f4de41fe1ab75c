//! Proximal maps, Moreau envelopes and the proximal point method.
//!
//! For a `rho`-weakly convex `f` and `nu < 1/rho` the envelope
//! `f_nu(z) = min_x f(x) + ||x - z||^2 / (2 nu)` is C¹ with gradient
//! `(z - prox_{nu f}(z)) / nu`, so a proximal step is a gradient step on the
//! envelope and the step length is a stationarity measure.

use std::sync::Arc;

use crate::composite::CompositeProblem;
use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::oracle::{ProxOracle, SmoothFunction};
use crate::proxlinear::saddle::LinearizedSubproblem;
use crate::report::SolverReport;

/// Inner iteration cap of each primal-dual solve inside a composite prox.
const SADDLE_BUDGET: usize = 200_000;

/// Result of an (approximate) proximal subproblem solve.
#[derive(Clone, Debug)]
pub struct ProxSolve {
    pub point: Vector,
    /// Achieved stationarity residual of the subproblem; 0 for closed forms.
    pub certificate: f64,
    pub iterations: usize,
}

/// A weakly convex function whose proximal subproblems can be solved.
pub trait ProxFunction: Send + Sync {
    fn value(&self, x: &Vector) -> f64;

    /// Weak convexity modulus `rho`; proximal parameters must satisfy `nu < 1/rho`.
    fn weak_convexity(&self) -> f64;

    /// Solves `min_x f(x) + ||x - z||^2 / (2 nu)` to residual `tol`. Callers
    /// guarantee `nu * rho < 1`.
    fn solve_prox(&self, nu: f64, z: &Vector, tol: f64, budget: usize) -> Result<ProxSolve>;
}

impl<T: ProxOracle + ?Sized> ProxFunction for T {
    fn value(&self, x: &Vector) -> f64 {
        ProxOracle::value(self, x)
    }

    fn weak_convexity(&self) -> f64 {
        0.0
    }

    fn solve_prox(&self, nu: f64, z: &Vector, _tol: f64, _budget: usize) -> Result<ProxSolve> {
        Ok(ProxSolve {
            point: self.prox(nu, z),
            certificate: 0.0,
            iterations: 0,
        })
    }
}

/// `s + g` with `s` smooth and `g` prox-friendly; prox subproblems are solved by
/// accelerated proximal gradient.
#[derive(Clone)]
pub struct SmoothPlusProx {
    pub smooth: Arc<dyn SmoothFunction>,
    pub g: Arc<dyn ProxOracle>,
}

impl ProxFunction for SmoothPlusProx {
    fn value(&self, x: &Vector) -> f64 {
        self.smooth.value(x) + self.g.value(x)
    }

    fn weak_convexity(&self) -> f64 {
        self.smooth.weak_convexity()
    }

    fn solve_prox(&self, nu: f64, z: &Vector, tol: f64, budget: usize) -> Result<ProxSolve> {
        accelerated_prox_gradient(
            |x| self.smooth.gradient(x),
            self.smooth.smoothness(),
            self.smooth.weak_convexity(),
            self.g.as_ref(),
            nu,
            z,
            tol,
            budget,
        )
    }
}

impl ProxFunction for CompositeProblem {
    fn value(&self, x: &Vector) -> f64 {
        CompositeProblem::value(self, x)
    }

    fn weak_convexity(&self) -> f64 {
        CompositeProblem::weak_convexity(self)
    }

    fn solve_prox(&self, nu: f64, z: &Vector, tol: f64, budget: usize) -> Result<ProxSolve> {
        if let Some(a) = self.h.linear_coefficients() {
            // h linear: h∘c is smooth with gradient ∇c(x)^T a.
            let rho = self.weak_convexity();
            return accelerated_prox_gradient(
                |x| self.c.vjp(x, &a),
                rho,
                rho,
                self.g.as_ref(),
                nu,
                z,
                tol,
                budget,
            );
        }
        composite_prox(self, nu, z, tol, budget)
    }
}

/// Prox-linear iterations on `Φ(x) = F(x) + ||x - z||^2 / (2 nu)`: the quadratic
/// stays exact, `c` is linearized, and each convex model is solved by the
/// primal-dual method. The residual is the prox-linear step scaled by its penalty.
fn composite_prox(
    problem: &CompositeProblem,
    nu: f64,
    z: &Vector,
    tol: f64,
    budget: usize,
) -> Result<ProxSolve> {
    let pen = problem.penalty().max(f64::MIN_POSITIVE);
    let s = pen + 1.0 / nu;
    // Position accuracy of a model solve must sit well below tol / pen.
    let gap_tol = (0.5 * s * (0.1 * tol / pen).powi(2)).max(1e-15);
    let mut x = z.clone();
    let mut best = (f64::INFINITY, x.clone());
    for it in 1..=budget {
        let center = Vector::lincomb(pen / s, &x, 1.0 / (nu * s), z);
        let sub = LinearizedSubproblem::new(
            problem.g.as_ref(),
            problem.h.as_ref(),
            problem.c.as_ref(),
            &x,
            s,
            center,
        );
        let next = match sub.solve(Some(&x), gap_tol, SADDLE_BUDGET) {
            Ok(sol) => sol.x,
            Err(Error::BudgetExceeded { best, .. }) => best,
            Err(e) => return Err(e),
        };
        let residual = pen * next.dist(&x);
        if residual < best.0 {
            best = (residual, next.clone());
        }
        x = next;
        if residual <= tol {
            return Ok(ProxSolve {
                point: x,
                certificate: residual,
                iterations: it,
            });
        }
    }
    Err(Error::BudgetExceeded {
        best: best.1,
        achieved: best.0,
        target: tol,
        budget,
    })
}

/// Accelerated proximal gradient on `s(x) + ||x - z||^2/(2 nu) + g(x)` where `s`
/// has `smoothness`-Lipschitz gradient and is `rho`-weakly convex. The residual
/// is the norm of the proximal-gradient mapping.
#[allow(clippy::too_many_arguments)]
pub fn accelerated_prox_gradient(
    grad: impl Fn(&Vector) -> Vector,
    smoothness: f64,
    rho: f64,
    g: &dyn ProxOracle,
    nu: f64,
    z: &Vector,
    tol: f64,
    budget: usize,
) -> Result<ProxSolve> {
    let lip = smoothness + 1.0 / nu;
    let strong = (1.0 / nu - rho).max(0.0);
    let momentum = {
        let (a, b) = (lip.sqrt(), strong.sqrt());
        (a - b) / (a + b)
    };
    let mut x = z.clone();
    let mut y = z.clone();
    let mut best = (f64::INFINITY, x.clone());
    for it in 1..=budget {
        let mut gy = grad(&y);
        gy.axpy(1.0 / nu, &(&y - z));
        if !gy.is_finite() {
            return Err(Error::OracleFailure {
                context: format!("accelerated proximal gradient iteration {it}"),
                detail: "non-finite gradient".into(),
            });
        }
        let x_next = g.prox(1.0 / lip, &Vector::lincomb(1.0, &y, -1.0 / lip, &gy));
        let residual = lip * y.dist(&x_next);
        if residual < best.0 {
            best = (residual, x_next.clone());
        }
        if residual <= tol {
            return Ok(ProxSolve {
                point: x_next,
                certificate: residual,
                iterations: it,
            });
        }
        y = Vector::lincomb(1.0 + momentum, &x_next, -momentum, &x);
        x = x_next;
    }
    Err(Error::BudgetExceeded {
        best: best.1,
        achieved: best.0,
        target: tol,
        budget,
    })
}

/// A certified proximal point together with the envelope value and gradient.
#[derive(Clone, Debug)]
pub struct MoreauPoint {
    pub prox_point: Vector,
    pub envelope_value: f64,
    /// `(z - prox_point) / nu`.
    pub envelope_gradient: Vector,
    pub nu: f64,
    pub certificate: f64,
}

/// Computes `prox_{nu f}(z)` with the envelope value and gradient.
pub fn prox_map(
    f: &dyn ProxFunction,
    nu: f64,
    z: &Vector,
    inner_tol: f64,
    budget: usize,
) -> Result<MoreauPoint> {
    if !(nu > 0.0) {
        return Err(Error::invalid(format!("prox parameter {nu} must be positive")));
    }
    if !(inner_tol > 0.0) {
        return Err(Error::invalid(format!("inner tolerance {inner_tol} must be positive")));
    }
    let rho = f.weak_convexity();
    if rho > 0.0 && nu * rho >= 1.0 {
        return Err(Error::NonconvexSubproblem {
            nu,
            rho,
            limit: 1.0 / rho,
        });
    }
    let sol = f.solve_prox(nu, z, inner_tol, budget)?;
    let p = sol.point;
    let envelope_value = f.value(&p) + p.dist(z).powi(2) / (2.0 * nu);
    let envelope_gradient = Vector::lincomb(1.0 / nu, z, -1.0 / nu, &p);
    Ok(MoreauPoint {
        prox_point: p,
        envelope_value,
        envelope_gradient,
        nu,
        certificate: sol.certificate,
    })
}

pub const DEFAULT_INNER_TOL: f64 = 1e-10;
pub const DEFAULT_INNER_BUDGET: usize = 10_000;

/// The proximal point method `x_{t+1} = prox_{nu f}(x_t)`.
///
/// Entry `t` of the stationarity history is `||(x_t - x_{t+1}) / nu||`, which
/// equals `||∇f_nu(x_t)||`. Stops once it drops below `step_tol`.
pub fn proximal_point_run(
    f: &dyn ProxFunction,
    nu: f64,
    x0: &Vector,
    max_iters: usize,
    step_tol: f64,
) -> Result<SolverReport> {
    proximal_point_run_with(
        f,
        nu,
        x0,
        max_iters,
        step_tol,
        DEFAULT_INNER_TOL,
        DEFAULT_INNER_BUDGET,
    )
}

pub fn proximal_point_run_with(
    f: &dyn ProxFunction,
    nu: f64,
    x0: &Vector,
    max_iters: usize,
    step_tol: f64,
    inner_tol: f64,
    inner_budget: usize,
) -> Result<SolverReport> {
    if !(step_tol >= 0.0) {
        return Err(Error::invalid("step tolerance must be nonnegative"));
    }
    let mut report = SolverReport::new("proximal_point", x0, 1);
    report.echo("nu", nu);
    report.echo("step_tol", step_tol);
    let mut x = x0.clone();
    let mut prox_calls = 0u64;
    for _ in 0..max_iters {
        let mp = prox_map(f, nu, &x, inner_tol, inner_budget)?;
        prox_calls += 1;
        let stationarity = mp.envelope_gradient.norm();
        report.record(&x, f.value(&x), stationarity, prox_calls);
        x = mp.prox_point;
        if stationarity < step_tol {
            report.converged = true;
            break;
        }
    }
    report.oracle_calls.add("prox", prox_calls);
    report.final_point = x;
    Ok(report)
}
