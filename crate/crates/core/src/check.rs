//! Numerical cross-checks: finite differences, weak convexity sampling and
//! Jacobian adjoint consistency.

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::oracle::{SmoothMap, SubgradientOracle};
use crate::rng::RandomStream;

/// Default central-difference step `1e-5 * (1 + ||x||_inf)`.
pub fn default_step(x: &Vector) -> f64 {
    1e-5 * (1.0 + x.norm_inf())
}

/// Componentwise central differences `(f(x + h e_i) - f(x - h e_i)) / 2h`.
pub fn finite_difference_gradient(
    f: impl Fn(&Vector) -> f64,
    x: &Vector,
    h: f64,
) -> Result<Vector> {
    if !(h > 0.0) {
        return Err(Error::invalid(format!("finite-difference step {h} must be positive")));
    }
    let mut probe = x.clone();
    let mut grad = Vec::with_capacity(x.dim());
    for i in 0..x.dim() {
        let xi = x[i];
        probe.set(i, xi + h);
        let fp = f(&probe);
        probe.set(i, xi - h);
        let fm = f(&probe);
        probe.set(i, xi);
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::ProbeFailure { index: i, step: h });
        }
        grad.push((fp - fm) / (2.0 * h));
    }
    Vector::new(grad)
}

/// Central-difference directional derivative of a vector map.
pub fn finite_difference_jvp(
    c: &dyn SmoothMap,
    x: &Vector,
    v: &Vector,
    h: f64,
) -> Vector {
    let plus = c.eval(&Vector::lincomb(1.0, x, h, v));
    let minus = c.eval(&Vector::lincomb(1.0, x, -h, v));
    Vector::lincomb(0.5 / h, &plus, -0.5 / h, &minus)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeakConvexityReport {
    pub violations: usize,
    /// Largest violation amount observed (0 when none).
    pub worst_gap: f64,
}

/// Samples points at scales from 1e-3 to 10 and tests, per trial, the midpoint
/// inequality for `f + rho/2 ||.||^2` and the weakly convex subgradient
/// inequality. A test counts as violated when it fails by more than
/// `1e-8 * (1 + |f|)`.
pub fn check_weak_convexity(
    f: &dyn SubgradientOracle,
    dim: usize,
    rho: f64,
    sampler: &mut RandomStream,
    trials: usize,
) -> WeakConvexityReport {
    let mut violations = 0;
    let mut worst_gap: f64 = 0.0;
    let phi = |x: &Vector| f.value(x) + 0.5 * rho * x.norm_sq();
    for _ in 0..trials {
        let x = random_point(sampler, dim);
        let y = if sampler.bernoulli(0.5) {
            random_point(sampler, dim)
        } else {
            // Nearby pairs probe curvature at small scales.
            let scale = 10f64.powf(sampler.uniform_in(-4.0, 0.0));
            Vector::lincomb(1.0, &x, scale, &sampler.normal_vector(dim))
        };

        let mid = Vector::lincomb(0.5, &x, 0.5, &y);
        let (fx, fy, fm) = (phi(&x), phi(&y), phi(&mid));
        let tol = 1e-8 * (1.0 + fx.abs().max(fy.abs()).max(fm.abs()));
        let gap = fm - 0.5 * (fx + fy);
        if gap > tol {
            violations += 1;
            worst_gap = worst_gap.max(gap);
        }

        let vx = f.subgrad(&x);
        let d = &y - &x;
        let lower = f.value(&x) + vx.dot(&d) - 0.5 * rho * d.norm_sq();
        let fy = f.value(&y);
        let tol = 1e-8 * (1.0 + fy.abs().max(lower.abs()));
        let gap = lower - fy;
        if gap > tol {
            violations += 1;
            worst_gap = worst_gap.max(gap);
        }
    }
    WeakConvexityReport {
        violations,
        worst_gap,
    }
}

/// Largest curvature deficit seen on sampled pairs:
/// `max 2 (f(x) + <v, y - x> - f(y)) / ||y - x||^2` over `trials` pairs, with
/// `v` the oracle subgradient at `x`, floored at zero. A lower estimate of
/// the weak convexity modulus.
pub fn estimate_weak_convexity(f: &dyn SubgradientOracle, dim: usize, sampler: &mut RandomStream, trials: usize) -> f64 {
    let mut est: f64 = 0.0;
    for _ in 0..trials {
        let x = random_point(sampler, dim);
        let scale = 10f64.powf(sampler.uniform_in(-4.0, 0.0));
        let y = Vector::lincomb(1.0, &x, scale, &sampler.normal_vector(dim));
        let d = &y - &x;
        let deficit = f.value(&x) + f.subgrad(&x).dot(&d) - f.value(&y);
        let r = d.norm_sq();
        if r > 0.0 && deficit.is_finite() {
            est = est.max(2.0 * deficit / r);
        }
    }
    est
}

fn random_point(rng: &mut RandomStream, dim: usize) -> Vector {
    let scale = 10f64.powf(rng.uniform_in(-3.0, 1.0));
    rng.normal_vector(dim).scaled(scale)
}

/// Largest relative adjoint mismatch `|<u, Jv> - <J^T u, v>| / (1 + |<u, Jv>|)`
/// over random triples.
pub fn adjoint_mismatch(c: &dyn SmoothMap, rng: &mut RandomStream, trials: usize) -> f64 {
    let (d, m) = (c.input_dim(), c.output_dim());
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let x = rng.normal_vector(d);
        let v = rng.normal_vector(d);
        let u = rng.normal_vector(m);
        let lhs = u.dot(&c.jvp(&x, &v));
        let rhs = c.vjp(&x, &u).dot(&v);
        worst = worst.max((lhs - rhs).abs() / (1.0 + lhs.abs()));
    }
    worst
}
