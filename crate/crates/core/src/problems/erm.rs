//! LASSO and regularized empirical risk minimization instances.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{check_positive, largest_eigenvalue, InstanceData, InstanceProblem, RowMajor, SyntheticInstance};
use crate::catalyst::FiniteSumProblem;
use crate::composite::CompositeProblem;
use crate::error::{Error, Result};
use crate::linalg::{dot, Vector};
use crate::oracle::{Linear, SmoothMap, L1};
use crate::rng::RandomStream;

/// `c(x) = ||A x - b||^2 / 2`, a map to the real line.
#[derive(Clone, Debug)]
pub struct LeastSquaresHalf {
    a: RowMajor,
    b: Arc<Vec<f64>>,
    beta: f64,
}

impl LeastSquaresHalf {
    fn residual(&self, x: &Vector) -> Vec<f64> {
        let mut r = self.a.mul(x.as_slice());
        for (ri, bi) in r.iter_mut().zip(self.b.iter()) {
            *ri -= bi;
        }
        r
    }

    /// `A^T (A x - b)`.
    pub fn gradient(&self, x: &Vector) -> Vector {
        Vector::from_raw(self.a.mul_t(&self.residual(x)))
    }
}

impl SmoothMap for LeastSquaresHalf {
    fn input_dim(&self) -> usize {
        self.a.cols
    }

    fn output_dim(&self) -> usize {
        1
    }

    fn eval(&self, x: &Vector) -> Vector {
        let r = self.residual(x);
        Vector::filled(1, 0.5 * dot(&r, &r))
    }

    fn jvp(&self, x: &Vector, v: &Vector) -> Vector {
        Vector::filled(1, self.gradient(x).dot(v))
    }

    fn vjp(&self, x: &Vector, u: &Vector) -> Vector {
        self.gradient(x).scaled(u[0])
    }

    /// `lambda_max(A^T A)`, computed exactly.
    fn beta(&self) -> f64 {
        self.beta
    }
}

/// `A` with `N(0, 1/m)` entries, a planted `x̄` with `max(1, d/10)` entries
/// equal to `±1`, `b = A x̄ + 0.01 N(0, 1)`; `F = lambda ||x||_1 + c(x)` with
/// `h` the identity.
pub fn make_lasso(d: usize, m: usize, lambda: f64, seed: u64) -> Result<SyntheticInstance> {
    check_positive("d", d)?;
    check_positive("m", m)?;
    if !(lambda >= 0.0) {
        return Err(Error::invalid(format!("lambda = {lambda} must be nonnegative")));
    }
    let root = RandomStream::new(seed, 0x6c6173);
    let mut rng = root.fork(0);
    let s = 1.0 / (m as f64).sqrt();
    let a: Vec<f64> = (0..m * d).map(|_| s * rng.normal()).collect();
    let mut planted = root.fork(1);
    let k = (d / 10).max(1);
    let mut x_bar = vec![0.0; d];
    for &j in &planted.permutation(d)[..k] {
        x_bar[j] = planted.sign();
    }
    let rows = RowMajor::new(m, d, a)?;
    let mut noise = root.fork(2);
    let b: Vec<f64> = rows.mul(&x_bar).iter().map(|v| v + 0.01 * noise.normal()).collect();
    let beta = largest_eigenvalue(&rows.gram(1.0));

    let mut data = InstanceData::new("lasso");
    data.param("d", d)
        .param("m", m)
        .param_f64("lambda", lambda)
        .param("seed", seed)
        .param_f64("beta", beta);
    data.array("A", rows.data.to_vec()).array("b", b).array("x_bar", x_bar);
    build_lasso(data)
}

pub(super) fn build_lasso(data: InstanceData) -> Result<SyntheticInstance> {
    let (d, m) = (data.get_usize("d")?, data.get_usize("m")?);
    let c = LeastSquaresHalf {
        a: RowMajor::new(m, d, data.get_array_len("A", m * d)?.to_vec())?,
        b: Arc::new(data.get_array_len("b", m)?.to_vec()),
        beta: data.get_f64("beta")?,
    };
    let problem = CompositeProblem::new(
        Arc::new(L1::new(data.get_f64("lambda")?, d)),
        Arc::new(Linear::identity()),
        Arc::new(c),
    );
    let x_bar = Vector::from_slice(data.get_array_len("x_bar", d)?)?;
    Ok(SyntheticInstance {
        problem: InstanceProblem::Composite(problem),
        ground_truth: Some(x_bar),
        optimum_value: None,
        data,
    })
}

/// Feature scales `10^(-decades * j / (d - 1))`, which give the data term a
/// spread spectrum so that the condition number is set by the regularizer.
fn feature_scales(d: usize, decades: f64) -> Vec<f64> {
    if d == 1 {
        return vec![1.0];
    }
    (0..d).map(|j| 10f64.powf(-decades * j as f64 / (d - 1) as f64)).collect()
}

/// `f_i(x) = (<a_i, x> - b_i)^2 / 2 + (mu/2) ||x||^2`.
#[derive(Clone, Debug)]
pub struct Ridge {
    a: RowMajor,
    b: Arc<Vec<f64>>,
    mu: f64,
    beta_component: f64,
    beta_full: f64,
}

impl Ridge {
    pub fn new(rows: usize, cols: usize, a: Vec<f64>, b: Vec<f64>, mu: f64) -> Result<Self> {
        let a = RowMajor::new(rows, cols, a)?;
        if b.len() != rows {
            return Err(Error::DimensionMismatch { expected: rows, got: b.len() });
        }
        let max_sq = (0..rows).map(|i| dot(a.row(i), a.row(i))).fold(0.0, f64::max);
        let beta_full = largest_eigenvalue(&a.gram(1.0 / rows as f64)) + mu;
        Ok(Self {
            a,
            b: Arc::new(b),
            mu,
            beta_component: max_sq + mu,
            beta_full,
        })
    }

    /// The exact minimizer from the normal equations.
    pub fn solve(&self) -> Result<Vector> {
        let (m, d) = (self.a.rows, self.a.cols);
        let h = self.a.gram(1.0 / m as f64) + DMatrix::identity(d, d) * self.mu;
        let rhs = DVector::from_vec(self.a.mul_t(&self.b)) / m as f64;
        let chol = h
            .cholesky()
            .ok_or_else(|| Error::invalid("ridge normal equations are not positive definite"))?;
        Vector::new(chol.solve(&rhs).iter().copied().collect())
    }
}

impl FiniteSumProblem for Ridge {
    fn num_components(&self) -> usize {
        self.a.rows
    }

    fn dim(&self) -> usize {
        self.a.cols
    }

    fn value_i(&self, i: usize, x: &Vector) -> f64 {
        let r = dot(self.a.row(i), x.as_slice()) - self.b[i];
        0.5 * r * r + 0.5 * self.mu * x.norm_sq()
    }

    fn add_grad_i(&self, i: usize, x: &Vector, weight: f64, out: &mut Vector) {
        let r = dot(self.a.row(i), x.as_slice()) - self.b[i];
        out.axpy_slice(weight * r, self.a.row(i));
        out.axpy(weight * self.mu, x);
    }

    fn mu(&self) -> f64 {
        self.mu
    }

    fn beta_component(&self) -> f64 {
        self.beta_component
    }

    fn beta_full(&self) -> f64 {
        self.beta_full
    }
}

/// Ridge regression with features scaled over three decades and `mu` chosen
/// so that `beta_full / mu = cond`, where `beta_full` is the smoothness of the
/// averaged loss.
///
/// The minimizer is planted as a standard Gaussian vector: `b = A w + r` with
/// `w` solving the normal equations for it and `r` noise orthogonal to the
/// columns of `A`. Every eigendirection, including the slow ones near `mu`,
/// then carries error from a zero start. Needs `m >= d`.
pub fn make_ridge(d: usize, m: usize, cond: f64, seed: u64) -> Result<SyntheticInstance> {
    check_positive("d", d)?;
    if m < d {
        return Err(Error::invalid(format!("ridge generator needs m >= d; got m = {m}, d = {d}")));
    }
    if !(cond > 1.0) {
        return Err(Error::invalid(format!("condition number {cond} must exceed 1")));
    }
    let root = RandomStream::new(seed, 0x7269_6467);
    let scales = feature_scales(d, 3.0);
    let mut rng = root.fork(0);
    let a: Vec<f64> = (0..m * d).map(|k| scales[k % d] * rng.normal()).collect();
    let x_bar = root.fork(1).normal_vector(d);
    let rows = RowMajor::new(m, d, a)?;
    let gram = rows.gram(1.0 / m as f64);
    let lambda = largest_eigenvalue(&gram);
    let mu = lambda / (cond - 1.0);
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::invalid("ridge design has rank below d"))?;
    // (A^T A / m) w = (A^T A / m + mu) x_bar
    let x_dv = DVector::from_row_slice(x_bar.as_slice());
    let w = &x_dv + chol.solve(&x_dv) * mu;
    let mut noise = root.fork(2);
    let n: Vec<f64> = (0..m).map(|_| 0.1 * noise.normal()).collect();
    let coef = chol.solve(&(DVector::from_vec(rows.mul_t(&n)) / m as f64));
    let in_range = rows.mul(coef.as_slice());
    let fit = rows.mul(w.as_slice());
    let b: Vec<f64> = (0..m).map(|i| fit[i] + n[i] - in_range[i]).collect();

    let mut data = InstanceData::new("ridge");
    data.param("d", d)
        .param("m", m)
        .param_f64("cond", cond)
        .param("seed", seed)
        .param_f64("mu", mu);
    data.array("A", rows.data.to_vec()).array("b", b);
    build_ridge(data)
}

pub(super) fn build_ridge(data: InstanceData) -> Result<SyntheticInstance> {
    let (d, m) = (data.get_usize("d")?, data.get_usize("m")?);
    let ridge = Ridge::new(
        m,
        d,
        data.get_array_len("A", m * d)?.to_vec(),
        data.get_array_len("b", m)?.to_vec(),
        data.get_f64("mu")?,
    )?;
    let x_star = ridge.solve()?;
    let f_star = ridge.value(&x_star);
    Ok(SyntheticInstance {
        problem: InstanceProblem::FiniteSum(Arc::new(ridge)),
        ground_truth: Some(x_star),
        optimum_value: Some(f_star),
        data,
    })
}

/// `log(1 + exp(-t))` without overflow.
fn log1p_exp_neg(t: f64) -> f64 {
    if t > 0.0 {
        (-t).exp().ln_1p()
    } else {
        -t + t.exp().ln_1p()
    }
}

/// `1 / (1 + exp(t))`
fn sigmoid_neg(t: f64) -> f64 {
    if t > 0.0 {
        let e = (-t).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + t.exp())
    }
}

/// `f_i(x) = log(1 + exp(-b_i <a_i, x>)) + (mu/2) ||x||^2` with `b_i = ±1`.
#[derive(Clone, Debug)]
pub struct Logistic {
    a: RowMajor,
    b: Arc<Vec<f64>>,
    mu: f64,
    beta_component: f64,
    beta_full: f64,
}

impl Logistic {
    pub fn new(rows: usize, cols: usize, a: Vec<f64>, b: Vec<f64>, mu: f64) -> Result<Self> {
        let a = RowMajor::new(rows, cols, a)?;
        if b.len() != rows {
            return Err(Error::DimensionMismatch { expected: rows, got: b.len() });
        }
        let max_sq = (0..rows).map(|i| dot(a.row(i), a.row(i))).fold(0.0, f64::max);
        let beta_full = 0.25 * largest_eigenvalue(&a.gram(1.0 / rows as f64)) + mu;
        Ok(Self {
            a,
            b: Arc::new(b),
            mu,
            beta_component: 0.25 * max_sq + mu,
            beta_full,
        })
    }

    /// Newton's method with backtracking from the origin, stopped when the
    /// gradient norm no longer decreases below `1e-13`.
    pub fn solve(&self) -> Result<Vector> {
        let (m, d) = (self.a.rows, self.a.cols);
        let mut x = Vector::zeros(d);
        for _ in 0..100 {
            let g = self.full_grad(&x);
            if g.norm() <= 1e-13 {
                break;
            }
            let mut h = DMatrix::identity(d, d) * self.mu;
            for i in 0..m {
                let s = sigmoid_neg(dot(self.a.row(i), x.as_slice()));
                let w = s * (1.0 - s) / m as f64;
                let row = DVector::from_row_slice(self.a.row(i));
                h.ger(w, &row, &row, 1.0);
            }
            let chol = h
                .cholesky()
                .ok_or_else(|| Error::invalid("logistic Hessian is not positive definite"))?;
            let step = chol.solve(&DVector::from_row_slice(g.as_slice()));
            let step = Vector::from_raw(step.iter().copied().collect());
            let f0 = self.value(&x);
            let slope = g.dot(&step);
            let mut t = 1.0;
            loop {
                let trial = Vector::lincomb(1.0, &x, -t, &step);
                // Near the optimum the decrease drowns in rounding, so a step
                // that halves the gradient norm is also accepted.
                let armijo = self.value(&trial) <= f0 - 1e-4 * t * slope;
                if armijo || self.full_grad(&trial).norm() <= 0.5 * g.norm() || t < 1e-10 {
                    x = trial;
                    break;
                }
                t *= 0.5;
            }
        }
        Ok(x)
    }
}

impl FiniteSumProblem for Logistic {
    fn num_components(&self) -> usize {
        self.a.rows
    }

    fn dim(&self) -> usize {
        self.a.cols
    }

    fn value_i(&self, i: usize, x: &Vector) -> f64 {
        log1p_exp_neg(self.b[i] * dot(self.a.row(i), x.as_slice())) + 0.5 * self.mu * x.norm_sq()
    }

    fn add_grad_i(&self, i: usize, x: &Vector, weight: f64, out: &mut Vector) {
        let bi = self.b[i];
        let s = sigmoid_neg(bi * dot(self.a.row(i), x.as_slice()));
        out.axpy_slice(-weight * bi * s, self.a.row(i));
        out.axpy(weight * self.mu, x);
    }

    fn mu(&self) -> f64 {
        self.mu
    }

    fn beta_component(&self) -> f64 {
        self.beta_component
    }

    fn beta_full(&self) -> f64 {
        self.beta_full
    }
}

/// Logistic regression with features scaled over three decades and labels
/// drawn from the logistic model of a Gaussian `w̄`.
///
/// `mu` is either given or, with `mu <= 0` and `cond > 1`, chosen so that
/// `beta_component / mu = cond`.
fn generate_logistic(d: usize, m: usize, mu: f64, cond: f64, seed: u64) -> Result<SyntheticInstance> {
    check_positive("d", d)?;
    check_positive("m", m)?;
    let root = RandomStream::new(seed, 0x6c6f_6769);
    let scales = feature_scales(d, 3.0);
    let mut rng = root.fork(0);
    let a: Vec<f64> = (0..m * d).map(|k| scales[k % d] * rng.normal()).collect();
    let w_bar = root.fork(1).normal_vector(d);
    let rows = RowMajor::new(m, d, a)?;
    let mut labels = root.fork(2);
    let b: Vec<f64> = rows
        .mul(w_bar.as_slice())
        .iter()
        .map(|&t| if labels.bernoulli(sigmoid_neg(-t)) { 1.0 } else { -1.0 })
        .collect();
    let mu = if mu > 0.0 {
        mu
    } else {
        let max_sq = (0..m).map(|i| dot(rows.row(i), rows.row(i))).fold(0.0, f64::max);
        0.25 * max_sq / (cond - 1.0)
    };

    let mut data = InstanceData::new("erm_logistic");
    data.param("d", d).param("m", m).param("seed", seed).param_f64("mu", mu);
    data.array("A", rows.data.to_vec()).array("b", b);
    build_logistic(data)
}

pub fn make_erm_logistic(d: usize, m: usize, mu: f64, seed: u64) -> Result<SyntheticInstance> {
    if !(mu > 0.0) {
        return Err(Error::invalid(format!("mu = {mu} must be positive")));
    }
    generate_logistic(d, m, mu, 0.0, seed)
}

/// As [`make_erm_logistic`] with `mu` set from the component condition number.
pub fn make_erm_logistic_conditioned(d: usize, m: usize, cond: f64, seed: u64) -> Result<SyntheticInstance> {
    if !(cond > 1.0) {
        return Err(Error::invalid(format!("condition number {cond} must exceed 1")));
    }
    generate_logistic(d, m, 0.0, cond, seed)
}

pub(super) fn build_logistic(data: InstanceData) -> Result<SyntheticInstance> {
    let (d, m) = (data.get_usize("d")?, data.get_usize("m")?);
    let problem = Logistic::new(
        m,
        d,
        data.get_array_len("A", m * d)?.to_vec(),
        data.get_array_len("b", m)?.to_vec(),
        data.get_f64("mu")?,
    )?;
    let x_star = problem.solve()?;
    let f_star = problem.value(&x_star);
    Ok(SyntheticInstance {
        problem: InstanceProblem::FiniteSum(Arc::new(problem)),
        ground_truth: Some(x_star),
        optimum_value: Some(f_star),
        data,
    })
}
