use crate::linalg::Vector;
use crate::oracle::ProxOracle;

/// `F(x) = (1/m) sum_i f_i(x) + g(x)` with `F` `mu`-strongly convex and each
/// `f_i` having a `beta_component`-Lipschitz gradient.
pub trait FiniteSumProblem: Send + Sync {
    fn num_components(&self) -> usize;
    fn dim(&self) -> usize;
    fn value_i(&self, i: usize, x: &Vector) -> f64;

    /// `out += weight * ∇f_i(x)`
    fn add_grad_i(&self, i: usize, x: &Vector, weight: f64, out: &mut Vector);

    /// The convex regularizer `g`; `None` when `g = 0`.
    fn nonsmooth(&self) -> Option<&dyn ProxOracle> {
        None
    }

    /// Strong convexity of the smooth average.
    fn mu(&self) -> f64;

    /// Gradient Lipschitz constant of every component.
    fn beta_component(&self) -> f64;

    /// Gradient Lipschitz constant of the average; never above `beta_component`.
    fn beta_full(&self) -> f64 {
        self.beta_component()
    }

    fn grad_i(&self, i: usize, x: &Vector) -> Vector {
        let mut out = Vector::zeros(self.dim());
        self.add_grad_i(i, x, 1.0, &mut out);
        out
    }

    /// `(1/m) sum_i f_i(x)`
    fn smooth_value(&self, x: &Vector) -> f64 {
        let m = self.num_components();
        (0..m).map(|i| self.value_i(i, x)).sum::<f64>() / m as f64
    }

    fn value(&self, x: &Vector) -> f64 {
        self.smooth_value(x) + self.nonsmooth().map_or(0.0, |g| g.value(x))
    }

    /// Average of the component gradients. Costs `m` component gradients;
    /// solvers account for them.
    fn full_grad(&self, x: &Vector) -> Vector {
        let m = self.num_components();
        let mut out = Vector::zeros(self.dim());
        let w = 1.0 / m as f64;
        for i in 0..m {
            self.add_grad_i(i, x, w, &mut out);
        }
        out
    }
}
