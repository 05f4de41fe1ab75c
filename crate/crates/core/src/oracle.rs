//! Oracle interfaces and the closed-form building blocks used by the shipped
//! problems.

use crate::linalg::Vector;

/// A closed convex function with an inexpensive proximal map.
///
/// `value` may return `+inf` outside the domain (indicators).
pub trait ProxOracle: Send + Sync {
    fn value(&self, x: &Vector) -> f64;

    /// `argmin_x value(x) + ||x - z||^2 / (2 nu)`.
    fn prox(&self, nu: f64, z: &Vector) -> Vector;

    /// True only for the zero function.
    fn is_zero(&self) -> bool {
        false
    }
}

/// A weakly convex function queried through values and subgradients.
pub trait SubgradientOracle: Send + Sync {
    fn value(&self, x: &Vector) -> f64;
    fn subgrad(&self, x: &Vector) -> Vector;
    /// Weak convexity modulus.
    fn rho(&self) -> f64;
    /// Lipschitz constant (possibly only on the region of interest).
    fn lip(&self) -> f64;
}

/// A convex Lipschitz outer function `h` of a composite objective.
pub trait LipschitzConvex: Send + Sync {
    fn value(&self, u: &Vector) -> f64;
    fn subgrad(&self, u: &Vector) -> Vector;
    fn prox(&self, nu: f64, u: &Vector) -> Vector;

    /// Fenchel conjugate, `+inf` outside its domain.
    fn conjugate(&self, u: &Vector) -> f64;

    /// Declared Lipschitz constant. Paired with the inner map's smoothness
    /// constant, the product bounds the linearization error of `h∘c`.
    fn lip(&self) -> f64;

    /// `prox` of the conjugate via the Moreau decomposition.
    fn prox_conjugate(&self, sigma: f64, u: &Vector) -> Vector {
        let inner = self.prox(1.0 / sigma, &u.scaled(1.0 / sigma));
        Vector::lincomb(1.0, u, -sigma, &inner)
    }

    /// `Some(a)` when `h(u) = <a, u>`; the conjugate domain is then `{a}`.
    fn linear_coefficients(&self) -> Option<Vector> {
        None
    }

    /// `Some(w)` when `h = w ||.||_1`, whose conjugate is the indicator of
    /// the box `[-w, w]^m`.
    fn box_conjugate_radius(&self) -> Option<f64> {
        None
    }
}

/// A C¹ map `c: R^d -> R^m` accessed through Jacobian products.
pub trait SmoothMap: Send + Sync {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn eval(&self, x: &Vector) -> Vector;
    /// `∇c(x) v`
    fn jvp(&self, x: &Vector, v: &Vector) -> Vector;
    /// `∇c(x)^T u`
    fn vjp(&self, x: &Vector, u: &Vector) -> Vector;
    /// Lipschitz constant of the Jacobian.
    fn beta(&self) -> f64;
}

/// A C¹ function with Lipschitz gradient.
pub trait SmoothFunction: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &Vector) -> f64;
    fn gradient(&self, x: &Vector) -> Vector;
    /// Gradient Lipschitz constant.
    fn smoothness(&self) -> f64;
    /// Weak convexity modulus, at most `smoothness`.
    fn weak_convexity(&self) -> f64 {
        self.smoothness()
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Zero;

impl ProxOracle for Zero {
    fn value(&self, _x: &Vector) -> f64 {
        0.0
    }

    fn prox(&self, _nu: f64, z: &Vector) -> Vector {
        z.clone()
    }

    fn is_zero(&self) -> bool {
        true
    }
}

impl SubgradientOracle for Zero {
    fn value(&self, _x: &Vector) -> f64 {
        0.0
    }
    fn subgrad(&self, x: &Vector) -> Vector {
        Vector::zeros(x.dim())
    }
    fn rho(&self) -> f64 {
        0.0
    }
    fn lip(&self) -> f64 {
        0.0
    }
}

/// `weight * ||u||_1`.
#[derive(Clone, Copy, Debug)]
pub struct L1 {
    pub weight: f64,
    lip: f64,
}

impl L1 {
    /// Lipschitz constant reported as `weight * sqrt(dim)`, the Euclidean one.
    pub fn new(weight: f64, dim: usize) -> Self {
        Self {
            weight,
            lip: weight * (dim as f64).sqrt(),
        }
    }

    /// An ℓ1 term whose Lipschitz constant is declared by the caller, for
    /// problems that bound the linearization error with a different norm pairing.
    pub fn with_lip(weight: f64, lip: f64) -> Self {
        Self { weight, lip }
    }
}

pub fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

impl ProxOracle for L1 {
    fn value(&self, x: &Vector) -> f64 {
        self.weight * x.norm_l1()
    }

    fn prox(&self, nu: f64, z: &Vector) -> Vector {
        let t = nu * self.weight;
        z.map(|v| soft_threshold(v, t))
    }
}

impl SubgradientOracle for L1 {
    fn value(&self, x: &Vector) -> f64 {
        self.weight * x.norm_l1()
    }
    fn subgrad(&self, x: &Vector) -> Vector {
        x.map(|v| self.weight * sign(v))
    }
    fn rho(&self) -> f64 {
        0.0
    }
    fn lip(&self) -> f64 {
        self.lip
    }
}

impl LipschitzConvex for L1 {
    fn value(&self, u: &Vector) -> f64 {
        self.weight * u.norm_l1()
    }

    fn subgrad(&self, u: &Vector) -> Vector {
        u.map(|v| self.weight * sign(v))
    }

    fn prox(&self, nu: f64, u: &Vector) -> Vector {
        ProxOracle::prox(self, nu, u)
    }

    fn conjugate(&self, u: &Vector) -> f64 {
        if u.norm_inf() <= self.weight * (1.0 + 1e-12) {
            0.0
        } else {
            f64::INFINITY
        }
    }

    fn lip(&self) -> f64 {
        self.lip
    }

    fn prox_conjugate(&self, _sigma: f64, u: &Vector) -> Vector {
        let w = self.weight;
        u.map(|v| v.clamp(-w, w))
    }

    fn box_conjugate_radius(&self) -> Option<f64> {
        Some(self.weight)
    }
}

/// `weight * ||u||_2`.
#[derive(Clone, Copy, Debug)]
pub struct L2 {
    pub weight: f64,
}

impl ProxOracle for L2 {
    fn value(&self, x: &Vector) -> f64 {
        self.weight * x.norm()
    }

    fn prox(&self, nu: f64, z: &Vector) -> Vector {
        let n = z.norm();
        let t = nu * self.weight;
        if n <= t {
            Vector::zeros(z.dim())
        } else {
            z.scaled(1.0 - t / n)
        }
    }
}

impl SubgradientOracle for L2 {
    fn value(&self, x: &Vector) -> f64 {
        self.weight * x.norm()
    }
    fn subgrad(&self, x: &Vector) -> Vector {
        let n = x.norm();
        if n == 0.0 {
            Vector::zeros(x.dim())
        } else {
            x.scaled(self.weight / n)
        }
    }
    fn rho(&self) -> f64 {
        0.0
    }
    fn lip(&self) -> f64 {
        self.weight
    }
}

impl LipschitzConvex for L2 {
    fn value(&self, u: &Vector) -> f64 {
        self.weight * u.norm()
    }

    fn subgrad(&self, u: &Vector) -> Vector {
        SubgradientOracle::subgrad(self, u)
    }

    fn prox(&self, nu: f64, u: &Vector) -> Vector {
        ProxOracle::prox(self, nu, u)
    }

    fn conjugate(&self, u: &Vector) -> f64 {
        if u.norm() <= self.weight * (1.0 + 1e-12) {
            0.0
        } else {
            f64::INFINITY
        }
    }

    fn lip(&self) -> f64 {
        self.weight
    }

    fn prox_conjugate(&self, _sigma: f64, u: &Vector) -> Vector {
        let n = u.norm();
        if n <= self.weight {
            u.clone()
        } else {
            u.scaled(self.weight / n)
        }
    }
}

/// The linear functional `u -> <a, u>`; with `a = (1)` this is the identity
/// on the real line.
#[derive(Clone, Debug)]
pub struct Linear {
    pub coefficients: Vector,
}

impl Linear {
    pub fn identity() -> Self {
        Self {
            coefficients: Vector::filled(1, 1.0),
        }
    }
}

impl LipschitzConvex for Linear {
    fn value(&self, u: &Vector) -> f64 {
        self.coefficients.dot(u)
    }

    fn subgrad(&self, _u: &Vector) -> Vector {
        self.coefficients.clone()
    }

    fn prox(&self, nu: f64, u: &Vector) -> Vector {
        Vector::lincomb(1.0, u, -nu, &self.coefficients)
    }

    fn conjugate(&self, u: &Vector) -> f64 {
        if u.max_abs_diff(&self.coefficients) <= 1e-12 {
            0.0
        } else {
            f64::INFINITY
        }
    }

    fn lip(&self) -> f64 {
        self.coefficients.norm()
    }

    fn prox_conjugate(&self, _sigma: f64, _u: &Vector) -> Vector {
        self.coefficients.clone()
    }

    fn linear_coefficients(&self) -> Option<Vector> {
        Some(self.coefficients.clone())
    }
}

/// Indicator of the box `lo <= x <= hi`.
#[derive(Clone, Debug)]
pub struct BoxIndicator {
    pub lo: Vector,
    pub hi: Vector,
}

impl BoxIndicator {
    pub fn new(lo: Vector, hi: Vector) -> Self {
        assert_eq!(lo.dim(), hi.dim());
        assert!(lo.iter().zip(hi.iter()).all(|(l, h)| l <= h));
        Self { lo, hi }
    }

    pub fn project(&self, z: &Vector) -> Vector {
        Vector::from_fn(z.dim(), |i| z[i].clamp(self.lo[i], self.hi[i]))
    }

    pub fn contains(&self, x: &Vector) -> bool {
        (0..x.dim()).all(|i| x[i] >= self.lo[i] && x[i] <= self.hi[i])
    }
}

impl ProxOracle for BoxIndicator {
    fn value(&self, x: &Vector) -> f64 {
        if self.contains(x) {
            0.0
        } else {
            f64::INFINITY
        }
    }

    fn prox(&self, _nu: f64, z: &Vector) -> Vector {
        self.project(z)
    }
}

/// `(weight / 2) ||x||^2`.
#[derive(Clone, Copy, Debug)]
pub struct HalfSquaredNorm {
    pub weight: f64,
}

impl ProxOracle for HalfSquaredNorm {
    fn value(&self, x: &Vector) -> f64 {
        0.5 * self.weight * x.norm_sq()
    }

    fn prox(&self, nu: f64, z: &Vector) -> Vector {
        z.scaled(1.0 / (1.0 + nu * self.weight))
    }
}

impl SubgradientOracle for HalfSquaredNorm {
    fn value(&self, x: &Vector) -> f64 {
        0.5 * self.weight * x.norm_sq()
    }
    fn subgrad(&self, x: &Vector) -> Vector {
        x.scaled(self.weight)
    }
    fn rho(&self) -> f64 {
        0.0
    }
    fn lip(&self) -> f64 {
        f64::INFINITY
    }
}

type ValueFn = Box<dyn Fn(&Vector) -> f64 + Send + Sync>;
type VectorFn = Box<dyn Fn(&Vector) -> Vector + Send + Sync>;

/// A subgradient oracle assembled from closures.
pub struct FnSubgradient {
    value: ValueFn,
    subgrad: VectorFn,
    rho: f64,
    lip: f64,
}

impl FnSubgradient {
    pub fn new(
        value: impl Fn(&Vector) -> f64 + Send + Sync + 'static,
        subgrad: impl Fn(&Vector) -> Vector + Send + Sync + 'static,
        rho: f64,
        lip: f64,
    ) -> Self {
        Self {
            value: Box::new(value),
            subgrad: Box::new(subgrad),
            rho,
            lip,
        }
    }
}

impl SubgradientOracle for FnSubgradient {
    fn value(&self, x: &Vector) -> f64 {
        (self.value)(x)
    }
    fn subgrad(&self, x: &Vector) -> Vector {
        (self.subgrad)(x)
    }
    fn rho(&self) -> f64 {
        self.rho
    }
    fn lip(&self) -> f64 {
        self.lip
    }
}

pub(crate) fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> Vector {
        Vector::from_slice(x).unwrap()
    }

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(2.0, 1.0), 1.0);
        assert_eq!(soft_threshold(-2.0, 1.0), -1.0);
        assert_eq!(soft_threshold(0.5, 1.0), 0.0);
    }

    #[test]
    fn prox_oracles_satisfy_descent_against_the_anchor() {
        let z = v(&[1.5, -0.2, 3.0]);
        let nu = 0.7;
        let oracles: Vec<Box<dyn ProxOracle>> = vec![
            Box::new(Zero),
            Box::new(L1::new(1.0, 3)),
            Box::new(L2 { weight: 2.0 }),
            Box::new(HalfSquaredNorm { weight: 3.0 }),
            Box::new(BoxIndicator::new(v(&[-1.0, -1.0, -1.0]), v(&[1.0, 1.0, 1.0]))),
        ];
        for g in oracles {
            let p = g.prox(nu, &z);
            let lhs = g.value(&p) + p.dist(&z).powi(2) / (2.0 * nu);
            // z itself may be infeasible for the box; compare against its projection then.
            let rhs = if g.value(&z).is_finite() {
                g.value(&z)
            } else {
                let q = g.prox(nu, &z);
                g.value(&q) + q.dist(&z).powi(2) / (2.0 * nu)
            };
            assert!(lhs <= rhs + 1e-12);
        }
    }

    #[test]
    fn moreau_decomposition_matches_projection() {
        let h = L2 { weight: 1.0 };
        let u = v(&[3.0, 4.0]);
        let generic = {
            let inner = LipschitzConvex::prox(&h, 1.0 / 0.5, &u.scaled(1.0 / 0.5));
            Vector::lincomb(1.0, &u, -0.5, &inner)
        };
        let direct = h.prox_conjugate(0.5, &u);
        assert!(generic.max_abs_diff(&direct) < 1e-12);
        assert!((direct.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identity_conjugate_is_pinned() {
        let h = Linear::identity();
        assert_eq!(h.prox_conjugate(3.0, &v(&[-7.0]))[0], 1.0);
        assert_eq!(h.conjugate(&v(&[1.0])), 0.0);
        assert!(h.conjugate(&v(&[0.5])).is_infinite());
    }
}
