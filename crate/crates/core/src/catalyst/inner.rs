//! Linearly convergent inner methods for `κ`-regularized subproblems.

use super::FiniteSumProblem;
use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::rng::RandomStream;

/// `h(x) = F(x) + (kappa/2) ||x - center||^2`, which is `(mu + kappa)`-strongly
/// convex. Component `i` of its smooth part is `f_i + (kappa/2) ||. - center||^2`.
pub struct ProximalSubproblem<'a> {
    pub problem: &'a dyn FiniteSumProblem,
    pub kappa: f64,
    pub center: Vector,
}

impl<'a> ProximalSubproblem<'a> {
    pub fn new(problem: &'a dyn FiniteSumProblem, kappa: f64, center: Vector) -> Self {
        Self {
            problem,
            kappa,
            center,
        }
    }

    /// The problem itself (`kappa = 0`).
    pub fn plain(problem: &'a dyn FiniteSumProblem) -> Self {
        Self::new(problem, 0.0, Vector::zeros(problem.dim()))
    }

    pub fn strong_convexity(&self) -> f64 {
        self.problem.mu() + self.kappa
    }

    pub fn beta_full(&self) -> f64 {
        self.problem.beta_full() + self.kappa
    }

    pub fn beta_component(&self) -> f64 {
        self.problem.beta_component() + self.kappa
    }

    pub fn value(&self, x: &Vector) -> f64 {
        self.problem.value(x) + 0.5 * self.kappa * x.dist(&self.center).powi(2)
    }

    /// Gradient of the smooth part; costs `m` component gradients.
    pub fn smooth_grad(&self, x: &Vector) -> Vector {
        let mut g = self.problem.full_grad(x);
        self.add_prox_term(x, &mut g);
        g
    }

    fn add_prox_term(&self, x: &Vector, g: &mut Vector) {
        if self.kappa != 0.0 {
            g.axpy(self.kappa, &(x - &self.center));
        }
    }

    fn prox_g(&self, step: f64, z: &Vector) -> Vector {
        match self.problem.nonsmooth() {
            Some(g) => g.prox(step, z),
            None => z.clone(),
        }
    }

    /// Certificate for a point with smooth gradient `grad` and step `1/lip`.
    ///
    /// Without `g` the point itself is returned with `||∇h||^2 / (2 sigma)`.
    /// With `g` the prox-gradient point `x+` is returned with `2 ||G||^2 / sigma`,
    /// where `G` is the gradient mapping; `dist(0, ∂h(x+)) <= 2 ||G||`.
    fn certify(&self, x: &Vector, grad: Vector, lip: f64) -> Certified {
        let sigma = self.strong_convexity();
        match self.problem.nonsmooth() {
            None => Certified {
                bound: grad.norm_sq() / (2.0 * sigma),
                point: x.clone(),
                grad,
            },
            Some(_) => {
                let next = self.prox_g(1.0 / lip, &Vector::lincomb(1.0, x, -1.0 / lip, &grad));
                let mapping = (x - &next).scaled(lip);
                Certified {
                    bound: 2.0 * mapping.norm_sq() / sigma,
                    point: next,
                    grad: mapping,
                }
            }
        }
    }
}

struct Certified {
    point: Vector,
    bound: f64,
    grad: Vector,
}

/// Output of an inner solve.
#[derive(Clone, Debug)]
pub struct InnerResult {
    pub point: Vector,
    /// Certified upper bound on `h(point) - min h`.
    pub bound: f64,
    /// Gradient of `h` at `point` (the gradient mapping when `g` is present).
    pub grad: Vector,
    /// Component gradients evaluated.
    pub calls: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InnerMethod {
    /// Full gradient steps `1/beta_full`; requires `g = 0`.
    Gd,
    /// Proximal gradient steps `1/beta_full`.
    ProxGd,
    /// SVRG epochs of `m` steps `1/(10 beta_component)`.
    Svrg,
}

impl InnerMethod {
    pub fn name(&self) -> &'static str {
        match self {
            InnerMethod::Gd => "gd",
            InnerMethod::ProxGd => "prox_gd",
            InnerMethod::Svrg => "svrg",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "gd" => Some(InnerMethod::Gd),
            "prox_gd" => Some(InnerMethod::ProxGd),
            "svrg" => Some(InnerMethod::Svrg),
            _ => None,
        }
    }

    /// Modeled linear rate per component gradient on a subproblem with
    /// smoothness `beta + kappa` and strong convexity `mu + kappa`. The SVRG
    /// model is the `m + condition` epoch-complexity heuristic.
    pub fn tau(&self, mu: f64, beta: f64, m: usize, kappa: f64) -> f64 {
        let cond = (beta + kappa) / (mu + kappa);
        match self {
            InnerMethod::Gd | InnerMethod::ProxGd => 1.0 / cond,
            InnerMethod::Svrg => 1.0 / (m as f64 + cond),
        }
    }

    /// Solves `sub` from `warm` until the certified bound is at most `target`,
    /// spending at most `budget` component gradients.
    pub fn run(
        &self,
        sub: &ProximalSubproblem<'_>,
        warm: &Vector,
        target: f64,
        budget: u64,
        rng: &mut RandomStream,
    ) -> Result<InnerResult> {
        let mut out = None;
        let calls = match self {
            InnerMethod::Gd | InnerMethod::ProxGd => {
                if *self == InnerMethod::Gd && sub.problem.nonsmooth().is_some() {
                    return Err(Error::invalid("gd needs a smooth problem; use prox_gd"));
                }
                gradient_steps(sub, warm, budget, |c, _| {
                    let stop = c.bound <= target;
                    if stop {
                        out = Some(c);
                    }
                    stop
                })?
            }
            InnerMethod::Svrg => svrg_epochs(sub, warm, budget, rng, |c, _| {
                let stop = c.bound <= target;
                if stop {
                    out = Some(c);
                }
                stop
            })?,
        };
        match out {
            Some(c) => Ok(InnerResult {
                point: c.point,
                bound: c.bound,
                grad: c.grad,
                calls: calls.total,
            }),
            None => Err(Error::BudgetExceeded {
                best: calls.last_point,
                achieved: calls.last_bound,
                target,
                budget: budget.min(usize::MAX as u64) as usize,
            }),
        }
    }
}

/// A certified point as seen by a progress callback.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub point: Vector,
    pub bound: f64,
    pub grad: Vector,
}

impl From<Certified> for Checkpoint {
    fn from(c: Certified) -> Self {
        Self {
            point: c.point,
            bound: c.bound,
            grad: c.grad,
        }
    }
}

pub(crate) struct Spent {
    pub total: u64,
    pub last_point: Vector,
    pub last_bound: f64,
}

/// (Proximal) gradient descent with step `1/beta_full`. `visit` sees every
/// certified point with the component gradients spent so far and returns true
/// to stop. Returns once stopped or when the budget is spent.
pub(crate) fn gradient_steps(
    sub: &ProximalSubproblem<'_>,
    warm: &Vector,
    budget: u64,
    mut visit: impl FnMut(Checkpoint, u64) -> bool,
) -> Result<Spent> {
    let m = sub.problem.num_components() as u64;
    let lip = sub.beta_full();
    let mut x = warm.clone();
    let mut calls = 0u64;
    loop {
        let grad = sub.smooth_grad(&x);
        calls += m;
        check_finite(&grad, "gradient step")?;
        let c = sub.certify(&x, grad.clone(), lip);
        let (bound, last) = (c.bound, c.point.clone());
        if visit(c.into(), calls) || calls + m > budget {
            return Ok(Spent {
                total: calls,
                last_point: last,
                last_bound: bound,
            });
        }
        x = sub.prox_g(1.0 / lip, &Vector::lincomb(1.0, &x, -1.0 / lip, &grad));
    }
}

/// SVRG with stored anchor gradients: each epoch costs `m` component
/// gradients for the anchor and one per stochastic step. The next anchor is the
/// last inner iterate. `visit` sees each certified anchor.
pub(crate) fn svrg_epochs(
    sub: &ProximalSubproblem<'_>,
    warm: &Vector,
    budget: u64,
    rng: &mut RandomStream,
    mut visit: impl FnMut(Checkpoint, u64) -> bool,
) -> Result<Spent> {
    let p = sub.problem;
    let m = p.num_components();
    let d = p.dim();
    let step = 1.0 / (10.0 * sub.beta_component());
    let mut anchor = warm.clone();
    let mut calls = 0u64;
    loop {
        let stored: Vec<Vector> = (0..m).map(|i| p.grad_i(i, &anchor)).collect();
        calls += m as u64;
        let mut mean = Vector::zeros(d);
        for g in &stored {
            mean.axpy(1.0 / m as f64, g);
        }
        check_finite(&mean, "svrg anchor")?;
        let mut anchor_grad = mean.clone();
        sub.add_prox_term(&anchor, &mut anchor_grad);
        let c = sub.certify(&anchor, anchor_grad, sub.beta_full());
        let (bound, last) = (c.bound, c.point.clone());
        if visit(c.into(), calls) || calls + 2 * m as u64 > budget {
            return Ok(Spent {
                total: calls,
                last_point: last,
                last_bound: bound,
            });
        }
        let mut x = anchor.clone();
        for _ in 0..m {
            let i = rng.below(m);
            let mut v = mean.clone();
            p.add_grad_i(i, &x, 1.0, &mut v);
            v.axpy(-1.0, &stored[i]);
            sub.add_prox_term(&x, &mut v);
            x = sub.prox_g(step, &Vector::lincomb(1.0, &x, -step, &v));
        }
        calls += m as u64;
        check_finite(&x, "svrg epoch")?;
        anchor = x;
    }
}

fn check_finite(v: &Vector, context: &str) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::OracleFailure {
            context: context.to_string(),
            detail: "non-finite gradient".into(),
        })
    }
}

/// One SVRG solve of `sub` to certified accuracy `target`.
pub fn svrg_run(
    sub: &ProximalSubproblem<'_>,
    warm: &Vector,
    target: f64,
    budget: u64,
    rng: &mut RandomStream,
) -> Result<InnerResult> {
    InnerMethod::Svrg.run(sub, warm, target, budget, rng)
}
