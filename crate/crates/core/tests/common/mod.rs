#![allow(dead_code)]

use std::sync::Arc;

use proxkit::oracle::{SmoothMap, Zero, L1};
use proxkit::{CompositeProblem, Vector};

/// c(x) = x^2 - 1 on the line.
pub struct SquareMinusOne;

impl SmoothMap for SquareMinusOne {
    fn input_dim(&self) -> usize {
        1
    }
    fn output_dim(&self) -> usize {
        1
    }
    fn eval(&self, x: &Vector) -> Vector {
        Vector::filled(1, x[0] * x[0] - 1.0)
    }
    fn jvp(&self, x: &Vector, v: &Vector) -> Vector {
        Vector::filled(1, 2.0 * x[0] * v[0])
    }
    fn vjp(&self, x: &Vector, u: &Vector) -> Vector {
        Vector::filled(1, 2.0 * x[0] * u[0])
    }
    fn beta(&self) -> f64 {
        2.0
    }
}

/// |x^2 - 1|, 2-weakly convex.
pub fn abs_square_minus_one() -> CompositeProblem {
    CompositeProblem::new(Arc::new(Zero), Arc::new(L1::new(1.0, 1)), Arc::new(SquareMinusOne))
}

pub fn scalar(x: f64) -> Vector {
    Vector::filled(1, x)
}

/// Brute-force minimizer of `f(x) + (x - z)^2 / (2 nu)` over a grid on `[lo, hi]`.
pub fn grid_prox(f: impl Fn(f64) -> f64, nu: f64, z: f64, lo: f64, hi: f64, step: f64) -> (f64, f64) {
    let n = ((hi - lo) / step).round() as usize;
    let mut best = (f64::INFINITY, lo);
    for k in 0..=n {
        let x = lo + k as f64 * step;
        let v = f(x) + (x - z) * (x - z) / (2.0 * nu);
        if v < best.0 {
            best = (v, x);
        }
    }
    (best.1, best.0)
}
