//! Primal-dual solver for linearized composite subproblems
//!
//! ```text
//! min_x  g(x) + (s/2)||x - center||^2 + h(c(y) + ∇c(y)(x - y))
//! ```
//!
//! through the saddle formulation
//! `min_x max_u G(x) + <u, c(y) + ∇c(y)(x - y)> - h*(u)`.
//!
//! The general solver is accelerated projected ascent on the dual, touching
//! the Jacobian only through `jvp`/`vjp`. For `g = 0` and `h` a weighted l1
//! norm in small dimension a smoothing-Newton path with an explicit Jacobian
//! is tried first. Either way the answer is certified by the primal-dual gap.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::oracle::{LipschitzConvex, ProxOracle, SmoothMap};
use crate::rng::RandomStream;

const POWER_ITERATIONS: usize = 20;
const NORM_SAFETY: f64 = 1.1;
const GAP_CHECK_EVERY: usize = 10;
/// Gaps below this multiple of `eps * (|primal| + |dual|)` are rounding noise.
const ROUNDING_GAP: f64 = 1024.0;
/// Largest primal dimension for which the Jacobian is formed explicitly.
const NEWTON_MAX_DIM: usize = 200;
const NEWTON_STEPS_PER_STAGE: usize = 30;
const NEWTON_SHRINK: f64 = 0.1;
/// Smallest Huber width, relative to the initial residual scale.
const NEWTON_MIN_WIDTH: f64 = 1e-16;
/// Continuation stops once a stage's gap exceeds the best one by this factor.
const NEWTON_STALL: f64 = 100.0;

pub struct LinearizedSubproblem<'a> {
    pub g: &'a dyn ProxOracle,
    pub h: &'a dyn LipschitzConvex,
    pub c: &'a dyn SmoothMap,
    pub anchor: &'a Vector,
    pub c_anchor: Vector,
    /// Strong convexity of the quadratic part.
    pub s: f64,
    pub center: Vector,
}

#[derive(Clone, Debug)]
pub struct SaddleSolution {
    pub x: Vector,
    pub dual: Vector,
    /// Certified primal-dual gap at `x`.
    pub gap: f64,
    pub primal_value: f64,
    pub iterations: usize,
    pub jvp_calls: u64,
    pub vjp_calls: u64,
}

impl<'a> LinearizedSubproblem<'a> {
    /// Builds the subproblem `g + (s/2)||. - center||^2 + h(linearization at anchor)`.
    pub fn new(
        g: &'a dyn ProxOracle,
        h: &'a dyn LipschitzConvex,
        c: &'a dyn SmoothMap,
        anchor: &'a Vector,
        s: f64,
        center: Vector,
    ) -> Self {
        let c_anchor = c.eval(anchor);
        Self {
            g,
            h,
            c,
            anchor,
            c_anchor,
            s,
            center,
        }
    }

    fn quadratic(&self, x: &Vector) -> f64 {
        0.5 * self.s * x.dist(&self.center).powi(2)
    }

    /// `c(y) + ∇c(y)(x - y)`
    fn linearization(&self, x: &Vector) -> Vector {
        let lin = self.c.jvp(self.anchor, &(x - self.anchor));
        &self.c_anchor + &lin
    }

    pub fn primal(&self, x: &Vector) -> f64 {
        self.g.value(x) + self.quadratic(x) + self.h.value(&self.linearization(x))
    }

    /// `argmin_x G(x) + ||x - v||^2 / (2 tau)`
    fn prox_primal(&self, tau: f64, v: &Vector) -> Vector {
        let w = self.s + 1.0 / tau;
        let point = Vector::lincomb(self.s / w, &self.center, 1.0 / (tau * w), v);
        self.g.prox(1.0 / w, &point)
    }

    /// `argmin_x G(x) + <K^T u, x>` given `K^T u`.
    fn best_response(&self, kt_u: &Vector) -> Vector {
        let point = Vector::lincomb(1.0, &self.center, -1.0 / self.s, kt_u);
        self.g.prox(1.0 / self.s, &point)
    }

    /// Dual value at `u` and the primal best response to it.
    fn dual(&self, u: &Vector, kt_u: &Vector) -> (f64, Vector) {
        let x = self.best_response(kt_u);
        let lin = self.linearization(&x);
        let value = self.g.value(&x) + self.quadratic(&x) + u.dot(&lin) - self.h.conjugate(u);
        (value, x)
    }

    fn operator_norm(&self) -> f64 {
        let d = self.anchor.dim();
        let mut rng = RandomStream::new(0x5add1e, d as u64);
        let mut v = rng.unit_vector(d);
        let mut est = 0.0;
        for _ in 0..POWER_ITERATIONS {
            let w = self.c.vjp(self.anchor, &self.c.jvp(self.anchor, &v));
            let n = w.norm();
            if n == 0.0 {
                return 0.0;
            }
            est = n.sqrt();
            v = w.scaled(1.0 / n);
        }
        est
    }

    /// Solves to primal-dual gap `tol` within `budget` iterations. A gap at the
    /// rounding level of the objective values also counts as solved.
    pub fn solve(&self, warm: Option<&Vector>, tol: f64, budget: usize) -> Result<SaddleSolution> {
        self.solve_from(warm, None, tol, budget)
    }

    /// [`solve`](Self::solve) with an optional dual warm start.
    pub fn solve_from(
        &self,
        warm: Option<&Vector>,
        warm_dual: Option<&Vector>,
        tol: f64,
        budget: usize,
    ) -> Result<SaddleSolution> {
        let mut jvp_calls = 0u64;
        let mut vjp_calls = 0u64;

        if let Some(a) = self.h.linear_coefficients() {
            // h* has the single point a in its domain: one best response is exact.
            let kt_a = self.c.vjp(self.anchor, &a);
            let x = self.best_response(&kt_a);
            let primal_value = self.primal(&x);
            return Ok(SaddleSolution {
                x,
                dual: a,
                gap: 0.0,
                primal_value,
                iterations: 1,
                jvp_calls: 1,
                vjp_calls: 1,
            });
        }

        let norm = self.operator_norm() * NORM_SAFETY;
        jvp_calls += POWER_ITERATIONS as u64;
        vjp_calls += POWER_ITERATIONS as u64;
        if norm == 0.0 {
            let x = self.prox_primal(f64::INFINITY, &self.center);
            let primal_value = self.primal(&x);
            return Ok(SaddleSolution {
                x,
                dual: Vector::zeros(self.c.output_dim()),
                gap: 0.0,
                primal_value,
                iterations: 0,
                jvp_calls,
                vjp_calls,
            });
        }

        let x0 = warm.cloned().unwrap_or_else(|| self.anchor.clone());
        let u0 = match warm_dual {
            Some(u) if u.dim() == self.c.output_dim() => u.clone(),
            _ => {
                jvp_calls += 1;
                self.h.prox_conjugate(1.0, &self.linearization(&x0))
            }
        };
        let mut tracker = Tracker { best: None, tol, jvp_calls, vjp_calls };
        if let (Some(w), true) = (self.h.box_conjugate_radius(), self.g.is_zero()) {
            if x0.dim() <= NEWTON_MAX_DIM {
                if let Some(it) = self.smoothing_newton(w, &x0, &mut tracker) {
                    let (gap, x, dual, primal_value) = tracker.best.expect("set before success");
                    return Ok(SaddleSolution {
                        x,
                        dual,
                        gap,
                        primal_value,
                        iterations: it,
                        jvp_calls: tracker.jvp_calls,
                        vjp_calls: tracker.vjp_calls,
                    });
                }
            }
        }
        if let Some(it) = self.dual_ascent(u0, norm, budget, &mut tracker) {
            let (gap, x, dual, primal_value) = tracker.best.expect("set before success");
            return Ok(SaddleSolution {
                x,
                dual,
                gap,
                primal_value,
                iterations: it,
                jvp_calls: tracker.jvp_calls,
                vjp_calls: tracker.vjp_calls,
            });
        }
        let best = tracker.best;
        let x = warm.cloned().unwrap_or_else(|| self.anchor.clone());
        let (achieved, best_x) = best
            .map(|(g, x, _, _)| (g, x))
            .unwrap_or((f64::INFINITY, x));
        Err(Error::BudgetExceeded {
            best: best_x,
            achieved,
            target: tol,
            budget,
        })
    }

    /// Records the gap of the pair `(x, u)` and of `u` with its best
    /// response; true once the target is met.
    fn check(&self, x: &Vector, u: &Vector, kt_u: &Vector, t: &mut Tracker) -> bool {
        let p_x = self.primal(x);
        let (d_u, x_resp) = self.dual(u, kt_u);
        let p_resp = self.primal(&x_resp);
        t.jvp_calls += 2;
        let (p, cand) = if p_resp < p_x { (p_resp, x_resp) } else { (p_x, x.clone()) };
        let gap = (p - d_u).max(0.0);
        if t.best.as_ref().is_none_or(|b| gap < b.0) {
            t.best = Some((gap, cand, u.clone(), p));
        }
        let noise = ROUNDING_GAP * f64::EPSILON * (p.abs() + d_u.abs());
        gap <= t.tol.max(noise)
    }

    /// Accelerated projected ascent on the dual with adaptive restart. The
    /// dual gradient at `u` is the linearization at the best response to `u`.
    fn dual_ascent(&self, mut u: Vector, norm: f64, budget: usize, t: &mut Tracker) -> Option<usize> {
        let step = self.s / (norm * norm);
        let mut v = u.clone();
        let mut k = 0.0f64;
        let mut x_avg = Vector::zeros(self.anchor.dim());
        let mut weight = 0.0;
        for it in 1..=budget {
            let kt_v = self.c.vjp(self.anchor, &v);
            let x_v = self.best_response(&kt_v);
            let lin = self.linearization(&x_v);
            t.jvp_calls += 1;
            t.vjp_calls += 1;
            weight += k + 1.0;
            x_avg = Vector::lincomb(1.0 - (k + 1.0) / weight, &x_avg, (k + 1.0) / weight, &x_v);
            let u_next = self.h.prox_conjugate(step, &Vector::lincomb(1.0, &v, step, &lin));
            let diff = &u_next - &u;
            if (&v - &u_next).dot(&diff) > 0.0 {
                k = 0.0;
                v = u_next.clone();
                weight = 0.0;
            } else {
                k += 1.0;
                v = Vector::lincomb(1.0, &u_next, (k - 1.0) / (k + 2.0), &diff);
            }
            u = u_next;
            if it % GAP_CHECK_EVERY == 0 || it == budget {
                let kt_u = self.c.vjp(self.anchor, &u);
                t.vjp_calls += 1;
                if self.check(&x_avg, &u, &kt_u, t) {
                    return Some(it);
                }
            }
        }
        None
    }
}

impl LinearizedSubproblem<'_> {
    /// Smoothing-Newton solve when `g = 0` and `h = w ||.||_1`.
    ///
    /// `|.|` is replaced by the Huber function of width `mu`, which makes the
    /// subproblem smooth and strongly convex in `x`; Newton steps with
    /// backtracking solve it, and `mu` shrinks geometrically. Every stage
    /// yields the feasible dual point `w clip(lin / mu, -1, 1)`, so the
    /// certified gap decides when to stop. Needs the Jacobian explicitly
    /// (`d` products), hence only used in small dimension.
    fn smoothing_newton(&self, w: f64, warm: &Vector, t: &mut Tracker) -> Option<usize> {
        let d = self.anchor.dim();
        let m = self.c.output_dim();
        let mut jac = DMatrix::zeros(m, d);
        for j in 0..d {
            let col = self.c.jvp(self.anchor, &Vector::basis(d, j));
            for i in 0..m {
                jac[(i, j)] = col[i];
            }
        }
        t.jvp_calls += d as u64;
        // Work in the displacement from the anchor so that small residuals
        // are not lost to cancellation.
        let anchor = DVector::from_column_slice(self.anchor.as_slice());
        let offset = DVector::from_column_slice(self.c_anchor.as_slice());
        let center = DVector::from_column_slice(self.center.as_slice()) - &anchor;
        let lin = |x: &DVector<f64>| &offset + &jac * x;
        let to_point = |x: &DVector<f64>| Vector::from_raw((x + &anchor).iter().copied().collect());
        let huber = |z: f64, mu: f64| if z.abs() <= mu { z * z / (2.0 * mu) } else { z.abs() - 0.5 * mu };
        let phi = |x: &DVector<f64>, mu: f64| {
            0.5 * self.s * (x - &center).norm_squared() + w * lin(x).iter().map(|&z| huber(z, mu)).sum::<f64>()
        };

        let mut x = DVector::from_column_slice(warm.as_slice()) - &anchor;
        let scale = lin(&x).amax().max(f64::MIN_POSITIVE);
        let mut mu = scale;
        let mut newton_steps = 0;
        while mu > NEWTON_MIN_WIDTH * scale {
            for _ in 0..NEWTON_STEPS_PER_STAGE {
                let z = lin(&x);
                let psi = z.map(|v| (v / mu).clamp(-1.0, 1.0));
                let grad = (&x - &center) * self.s + jac.tr_mul(&psi) * w;
                let mut hess = DMatrix::identity(d, d) * self.s;
                for i in 0..m {
                    if z[i].abs() < mu {
                        let row = jac.row(i);
                        hess += row.transpose() * row * (w / mu);
                    }
                }
                let step = match hess.cholesky() {
                    Some(ch) => ch.solve(&(-&grad)),
                    None => return None,
                };
                let slope = grad.dot(&step);
                if !(slope < 0.0) || step.norm() <= 1e-15 * (1.0 + x.norm()) {
                    break;
                }
                let f0 = phi(&x, mu);
                let mut a = 1.0;
                while phi(&(&x + &step * a), mu) > f0 + 1e-4 * a * slope && a > 1e-10 {
                    a *= 0.5;
                }
                x += &step * a;
                newton_steps += 1;
            }
            let z = lin(&x);
            let u = Vector::from_raw(z.iter().map(|&v| w * (v / mu).clamp(-1.0, 1.0)).collect());
            let kt_u = self.c.vjp(self.anchor, &u);
            t.vjp_calls += 1;
            let before = t.best.as_ref().map_or(f64::INFINITY, |b| b.0);
            if self.check(&to_point(&x), &u, &kt_u, t) {
                return Some(newton_steps);
            }
            // Limit mu -> 0 with the active set of this stage held fixed.
            let active: Vec<usize> = (0..m).filter(|&i| z[i].abs() < mu).collect();
            if active.len() <= d {
                if let Some((x_lim, u_lim)) = self.active_set_limit(&jac, &offset, &center, w, &z, &active) {
                    let kt = self.c.vjp(self.anchor, &u_lim);
                    t.vjp_calls += 1;
                    if self.check(&to_point(&x_lim), &u_lim, &kt, t) {
                        return Some(newton_steps);
                    }
                }
            }
            let after = t.best.as_ref().map_or(f64::INFINITY, |b| b.0);
            if after > NEWTON_STALL * before.min(after) && before.is_finite() {
                return None;
            }
            mu *= NEWTON_SHRINK;
        }
        None
    }
}

impl LinearizedSubproblem<'_> {
    /// Solves the optimality system of the subproblem, written in the
    /// displacement `x` from the anchor, when the linearized residuals on
    /// `active` vanish and every other one keeps the sign it has in `z`:
    ///
    /// ```text
    /// s (x - center) + J_A^T u_A + w J_N^T sign(z_N) = 0,   c_A + J_A x = 0.
    /// ```
    ///
    /// Returns the displacement and the dual clipped into the box.
    fn active_set_limit(
        &self,
        jac: &DMatrix<f64>,
        offset: &DVector<f64>,
        center: &DVector<f64>,
        w: f64,
        z: &DVector<f64>,
        active: &[usize],
    ) -> Option<(DVector<f64>, Vector)> {
        let (m, d) = jac.shape();
        let k = active.len();
        let mut is_active = vec![false; m];
        for &i in active {
            is_active[i] = true;
        }
        let signs = DVector::from_fn(m, |i, _| if is_active[i] { 0.0 } else { w * sign(z[i]) });
        let mut kkt = DMatrix::zeros(d + k, d + k);
        let mut rhs = DVector::zeros(d + k);
        for j in 0..d {
            kkt[(j, j)] = self.s;
        }
        let rest = center * self.s - jac.tr_mul(&signs);
        rhs.rows_mut(0, d).copy_from(&rest);
        for (a, &i) in active.iter().enumerate() {
            for j in 0..d {
                kkt[(d + a, j)] = jac[(i, j)];
                kkt[(j, d + a)] = jac[(i, j)];
            }
            rhs[d + a] = -offset[i];
        }
        let sol = kkt.lu().solve(&rhs)?;
        let x = sol.rows(0, d).into_owned();
        let mut u = signs;
        for (a, &i) in active.iter().enumerate() {
            u[i] = sol[d + a].clamp(-w, w);
        }
        let u = Vector::from_raw(u.iter().copied().collect());
        (x.iter().all(|v| v.is_finite()) && u.is_finite()).then_some((x, u))
    }
}

fn sign(v: f64) -> f64 {
    if v < 0.0 { -1.0 } else { 1.0 }
}

struct Tracker {
    best: Option<(f64, Vector, Vector, f64)>, // (gap, x, u, primal)
    tol: f64,
    jvp_calls: u64,
    vjp_calls: u64,
}
