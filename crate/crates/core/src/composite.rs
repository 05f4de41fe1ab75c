//! Composite objectives `F = g + h∘c`.

use std::sync::Arc;

use crate::linalg::Vector;
use crate::oracle::{LipschitzConvex, ProxOracle, SmoothMap, SubgradientOracle};

/// `F(x) = g(x) + h(c(x))` with `g` closed convex and prox-friendly, `h` convex
/// and Lipschitz, and `c` smooth with Lipschitz Jacobian.
///
/// `F` is `lip * beta` weakly convex.
#[derive(Clone)]
pub struct CompositeProblem {
    pub g: Arc<dyn ProxOracle>,
    pub h: Arc<dyn LipschitzConvex>,
    pub c: Arc<dyn SmoothMap>,
    pub lip: f64,
    pub beta: f64,
}

impl CompositeProblem {
    pub fn new(
        g: Arc<dyn ProxOracle>,
        h: Arc<dyn LipschitzConvex>,
        c: Arc<dyn SmoothMap>,
    ) -> Self {
        let lip = h.lip();
        let beta = c.beta();
        Self { g, h, c, lip, beta }
    }

    pub fn dim(&self) -> usize {
        self.c.input_dim()
    }

    pub fn value(&self, x: &Vector) -> f64 {
        self.g.value(x) + self.h.value(&self.c.eval(x))
    }

    /// Upper bound on the weak convexity modulus of `F`.
    pub fn weak_convexity(&self) -> f64 {
        self.lip * self.beta
    }

    /// The default prox-linear penalty `L * beta`.
    pub fn penalty(&self) -> f64 {
        self.weak_convexity()
    }

    /// `h(c(x))` alone, viewed as a subgradient oracle.
    pub fn composed_part(&self) -> ComposedLoss<'_> {
        ComposedLoss { problem: self }
    }

    /// True when `h` is linear, i.e. `h∘c` is smooth.
    pub fn is_additive(&self) -> bool {
        self.h.linear_coefficients().is_some()
    }
}

/// `x -> h(c(x))` with subgradient `∇c(x)^T v`, `v ∈ ∂h(c(x))`.
pub struct ComposedLoss<'a> {
    problem: &'a CompositeProblem,
}

impl SubgradientOracle for ComposedLoss<'_> {
    fn value(&self, x: &Vector) -> f64 {
        self.problem.h.value(&self.problem.c.eval(x))
    }

    fn subgrad(&self, x: &Vector) -> Vector {
        let cx = self.problem.c.eval(x);
        let v = self.problem.h.subgrad(&cx);
        self.problem.c.vjp(x, &v)
    }

    fn rho(&self) -> f64 {
        self.problem.weak_convexity()
    }

    fn lip(&self) -> f64 {
        self.problem.lip
    }
}
