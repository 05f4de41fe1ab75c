//! Box-constrained nonlinear least squares `min ||c(x)||_2` s.t. `lo <= x <= hi`.

use std::sync::Arc;

use super::{check_positive, InstanceData, InstanceProblem, SyntheticInstance};
use crate::composite::CompositeProblem;
use crate::error::{Error, Result};
use crate::linalg::{dot, Vector};
use crate::oracle::{BoxIndicator, SmoothMap, L2};
use crate::rng::RandomStream;

/// `c_i(x) = x^T Q_i x / 2 + p_i^T x + r_i` with symmetric `Q_i`.
#[derive(Clone, Debug)]
pub struct QuadraticMap {
    d: usize,
    m: usize,
    q: Arc<Vec<f64>>,
    p: Arc<Vec<f64>>,
    r: Arc<Vec<f64>>,
    beta: f64,
}

impl QuadraticMap {
    pub fn new(d: usize, m: usize, q: Vec<f64>, p: Vec<f64>, r: Vec<f64>) -> Result<Self> {
        for (len, want) in [(q.len(), m * d * d), (p.len(), m * d), (r.len(), m)] {
            if len != want {
                return Err(Error::DimensionMismatch { expected: want, got: len });
            }
        }
        let beta = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        Ok(Self {
            d,
            m,
            q: Arc::new(q),
            p: Arc::new(p),
            r: Arc::new(r),
            beta,
        })
    }

    fn q_row(&self, i: usize, k: usize) -> &[f64] {
        let start = (i * self.d + k) * self.d;
        &self.q[start..start + self.d]
    }

    fn p_row(&self, i: usize) -> &[f64] {
        &self.p[i * self.d..(i + 1) * self.d]
    }

    /// `Q_i x + p_i`, the gradient of `c_i`.
    fn grad_i(&self, i: usize, x: &Vector) -> Vec<f64> {
        (0..self.d)
            .map(|k| dot(self.q_row(i, k), x.as_slice()) + self.p_row(i)[k])
            .collect()
    }
}

impl SmoothMap for QuadraticMap {
    fn input_dim(&self) -> usize {
        self.d
    }

    fn output_dim(&self) -> usize {
        self.m
    }

    fn eval(&self, x: &Vector) -> Vector {
        Vector::from_fn(self.m, |i| {
            let qx: f64 = (0..self.d).map(|k| x[k] * dot(self.q_row(i, k), x.as_slice())).sum();
            0.5 * qx + dot(self.p_row(i), x.as_slice()) + self.r[i]
        })
    }

    fn jvp(&self, x: &Vector, v: &Vector) -> Vector {
        Vector::from_fn(self.m, |i| dot(&self.grad_i(i, x), v.as_slice()))
    }

    fn vjp(&self, x: &Vector, u: &Vector) -> Vector {
        let mut out = Vector::zeros(self.d);
        for i in 0..self.m {
            out.axpy_slice(u[i], &self.grad_i(i, x));
        }
        out
    }

    /// `sqrt(sum_i ||Q_i||_F^2)`, which bounds the Jacobian's Lipschitz
    /// constant in operator norm.
    fn beta(&self) -> f64 {
        self.beta
    }
}

/// Gaussian symmetric `Q_i` (scaled by `1/sqrt(d)`) and Gaussian `p_i`, with
/// `r_i` chosen so that a Gaussian `x̄` is a root; the box around `x̄` has
/// half-widths uniform in `[0.5, 1.5]` per coordinate, so the root is interior.
pub fn make_box_nls(d: usize, m: usize, seed: u64) -> Result<SyntheticInstance> {
    check_positive("d", d)?;
    check_positive("m", m)?;
    let root = RandomStream::new(seed, 0x6e6c73);
    let mut rng = root.fork(0);
    let scale = 1.0 / (2.0 * (d as f64).sqrt());
    let mut q = vec![0.0; m * d * d];
    for i in 0..m {
        for a in 0..d {
            for b in a..d {
                let v = if a == b { 2.0 * scale * rng.normal() } else { scale * rng.normal() };
                q[(i * d + a) * d + b] = v;
                q[(i * d + b) * d + a] = v;
            }
        }
    }
    let p: Vec<f64> = (0..m * d).map(|_| rng.normal()).collect();
    let x_bar = root.fork(1).normal_vector(d);
    let zero_r = QuadraticMap::new(d, m, q.clone(), p.clone(), vec![0.0; m])?;
    let r: Vec<f64> = zero_r.eval(&x_bar).iter().map(|v| -v).collect();
    let mut widths = root.fork(2);
    let lo: Vec<f64> = (0..d).map(|k| x_bar[k] - widths.uniform_in(0.5, 1.5)).collect();
    let hi: Vec<f64> = (0..d).map(|k| x_bar[k] + widths.uniform_in(0.5, 1.5)).collect();

    let mut data = InstanceData::new("box_nls");
    data.param("d", d).param("m", m).param("seed", seed);
    data.array("Q", q)
        .array("p", p)
        .array("r", r)
        .array("lo", lo)
        .array("hi", hi)
        .array("x_bar", x_bar.into_vec());
    build(data)
}

pub(super) fn build(data: InstanceData) -> Result<SyntheticInstance> {
    let (d, m) = (data.get_usize("d")?, data.get_usize("m")?);
    let map = QuadraticMap::new(
        d,
        m,
        data.get_array_len("Q", m * d * d)?.to_vec(),
        data.get_array_len("p", m * d)?.to_vec(),
        data.get_array_len("r", m)?.to_vec(),
    )?;
    let lo = Vector::from_slice(data.get_array_len("lo", d)?)?;
    let hi = Vector::from_slice(data.get_array_len("hi", d)?)?;
    let x_bar = Vector::from_slice(data.get_array_len("x_bar", d)?)?;
    let problem = CompositeProblem::new(
        Arc::new(BoxIndicator::new(lo, hi)),
        Arc::new(L2 { weight: 1.0 }),
        Arc::new(map),
    );
    Ok(SyntheticInstance {
        problem: InstanceProblem::Composite(problem),
        ground_truth: Some(x_bar),
        optimum_value: Some(0.0),
        data,
    })
}
