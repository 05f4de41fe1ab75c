//! Catalyst acceleration for strongly convex finite sums.
//!
//! Each outer step approximately minimizes `F(x) + (kappa/2) ||x - y_{t-1}||^2`
//! with a linearly convergent inner method and extrapolates
//! `y_t = x_t + beta_t (x_t - x_{t-1})`. Subproblems are indexed from `t = 1`,
//! so the first one is centered at `y_0 = x_0`.

mod baseline;
mod finite_sum;
mod inner;

pub use baseline::{gd_run, svrg_plain_run, StopRule};
pub use finite_sum::FiniteSumProblem;
pub use inner::{svrg_run, Checkpoint, InnerMethod, InnerResult, ProximalSubproblem};

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::report::SolverReport;
use crate::rng::RandomStream;

/// `alpha_t` in `(0, 1]` solving `alpha_t^2 = (1 - alpha_t) alpha_prev^2 + q alpha_t`,
/// and `beta_t = alpha_prev (1 - alpha_prev) / (alpha_prev^2 + alpha_t)`.
pub fn momentum_update(alpha_prev: f64, q: f64) -> Result<(f64, f64)> {
    if !(alpha_prev > 0.0 && alpha_prev <= 1.0) || !(q > 0.0 && q <= 1.0) {
        return Err(Error::invalid(format!(
            "momentum update needs alpha_prev, q in (0, 1]; got {alpha_prev}, {q}"
        )));
    }
    // Positive root of alpha^2 + b alpha - a2 = 0, in the form that avoids
    // cancellation for either sign of b.
    let a2 = alpha_prev * alpha_prev;
    let b = a2 - q;
    let disc = (b * b + 4.0 * a2).sqrt();
    let alpha = if b >= 0.0 { 2.0 * a2 / (b + disc) } else { 0.5 * (disc - b) };
    assert!(alpha > 0.0 && alpha <= 1.0 + 1e-15, "momentum root {alpha} outside (0, 1]");
    let alpha = alpha.min(1.0);
    let beta = alpha_prev * (1.0 - alpha_prev) / (a2 + alpha);
    Ok((alpha, beta))
}

/// The `kappa` minimizing `sqrt(mu + kappa) / (tau(kappa) sqrt(mu))` under the
/// inner method's rate model.
///
/// For gd the minimizer is `beta_full - 2 mu` (plus a `1e-12 beta` floor). For
/// SVRG it is `(beta_component - mu) / (m + 1) - mu`, floored at zero, which
/// is zero whenever `m + 1 >= beta/mu - 1`: acceleration does not pay off for
/// large `m`.
pub fn choose_kappa(problem: &dyn FiniteSumProblem, inner: InnerMethod) -> f64 {
    let mu = problem.mu();
    match inner {
        InnerMethod::Gd | InnerMethod::ProxGd => {
            kappa_gd(mu, problem.beta_full())
        }
        InnerMethod::Svrg => kappa_svrg(mu, problem.beta_component(), problem.num_components()),
    }
}

pub fn kappa_gd(mu: f64, beta: f64) -> f64 {
    (beta - 2.0 * mu).max(0.0) + 1e-12 * beta
}

pub fn kappa_svrg(mu: f64, beta: f64, m: usize) -> f64 {
    ((beta - mu) / (m as f64 + 1.0) - mu).max(0.0)
}

/// Where each subproblem solve starts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WarmStart {
    /// The previous outer iterate `x_{t-1}`.
    Previous,
    /// The current center `y_{t-1}`.
    Extrapolated,
}

#[derive(Clone, Debug)]
pub struct CatalystOptions {
    pub warm_start: WarmStart,
    /// Component-gradient budget of a single subproblem solve.
    pub inner_budget: u64,
    /// Total component-gradient budget; the run stops once it is spent.
    pub max_work: u64,
    /// Stop once `F(x_t) <= f_target` (evaluation only, not counted as work).
    pub f_target: Option<f64>,
    /// Replaces the certified gap at `x_0` as the constant `C` of the
    /// subproblem accuracy schedule.
    pub gap_scale: Option<f64>,
}

impl Default for CatalystOptions {
    fn default() -> Self {
        Self {
            warm_start: WarmStart::Previous,
            inner_budget: u64::MAX / 4,
            max_work: u64::MAX / 4,
            f_target: None,
            gap_scale: None,
        }
    }
}

/// Catalyst with default options and a fixed stream for stochastic inner methods.
pub fn catalyst_run(
    problem: &dyn FiniteSumProblem,
    inner: InnerMethod,
    kappa: f64,
    x0: &Vector,
    outer_iters: usize,
    eps: f64,
) -> Result<SolverReport> {
    catalyst_run_with(
        problem,
        inner,
        kappa,
        x0,
        outer_iters,
        eps,
        &CatalystOptions::default(),
        &mut RandomStream::new(0, 0),
    )
}

/// Runs at most `outer_iters` outer steps, stopping when the certified gap
/// `||∇F(x_t)||^2 / (2 mu)` drops to `eps`.
///
/// Subproblem `t` is solved to certified accuracy `C (1 - 0.9 sqrt(q))^t`
/// where `C` is the certified gap at `x_0` and `q = mu / (mu + kappa)`.
/// `kappa = 0` is accepted and makes the wrapper a restarted inner method.
/// History entry `t` holds `F(x_t)`, `||∇F(x_t)||` and the cumulative
/// component-gradient count.
#[allow(clippy::too_many_arguments)]
pub fn catalyst_run_with(
    problem: &dyn FiniteSumProblem,
    inner: InnerMethod,
    kappa: f64,
    x0: &Vector,
    outer_iters: usize,
    eps: f64,
    opts: &CatalystOptions,
    rng: &mut RandomStream,
) -> Result<SolverReport> {
    x0.check_dim(problem.dim())?;
    if !(kappa >= 0.0 && kappa.is_finite()) {
        return Err(Error::invalid(format!("kappa = {kappa} must be finite and nonnegative")));
    }
    let mu = problem.mu();
    if !(mu > 0.0) {
        return Err(Error::InvalidModulus(mu));
    }
    let mut report = SolverReport::new(&format!("catalyst_{}", inner.name()), x0, 1).with_seed(rng.seed());
    report.echo("kappa", kappa);
    report.echo("inner", inner.name());
    report.echo("eps", eps);
    report.echo(
        "warm_start",
        match opts.warm_start {
            WarmStart::Previous => "previous",
            WarmStart::Extrapolated => "extrapolated",
        },
    );

    let m = problem.num_components() as u64;
    let plain = ProximalSubproblem::plain(problem);
    let start = inner::gradient_steps(&plain, x0, 0, |c, _| {
        report.record(x0, problem.value(x0), c.grad.norm(), m);
        true
    })?;
    let scale = opts.gap_scale.unwrap_or(start.last_bound);
    let mut work = m;
    let q = mu / (mu + kappa);
    let decay = 1.0 - 0.9 * q.sqrt();
    let mut alpha = q.sqrt();
    let mut x_prev = x0.clone();
    let mut y = x0.clone();
    let mut done = start.last_bound <= eps || opts.f_target.is_some_and(|f| problem.value(x0) <= f);

    let mut t = 0;
    while !done && t < outer_iters {
        t += 1;
        let target = scale * decay.powi(t as i32);
        let sub = ProximalSubproblem::new(problem, kappa, y.clone());
        let warm = match opts.warm_start {
            WarmStart::Previous => &x_prev,
            WarmStart::Extrapolated => &y,
        };
        let budget = opts.inner_budget.min(opts.max_work.saturating_sub(work).max(2 * m));
        let res = inner.run(&sub, warm, target, budget, rng)?;
        work += res.calls;
        let x = res.point;
        let grad = Vector::lincomb(1.0, &res.grad, -kappa, &(&x - &y));
        let f = problem.value(&x);
        report.record(&x, f, grad.norm(), work);
        let (alpha_next, beta) = momentum_update(alpha, q)?;
        y = Vector::lincomb(1.0 + beta, &x, -beta, &x_prev);
        alpha = alpha_next;
        done = grad.norm_sq() / (2.0 * mu) <= eps
            || opts.f_target.is_some_and(|ft| f <= ft)
            || work >= opts.max_work;
        x_prev = x;
    }
    report.converged = done;
    report.oracle_calls.add("grad_i", work);
    report.final_point = x_prev;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use std::sync::atomic::{AtomicU64, Ordering};

    use super::*;
    use crate::oracle::ProxOracle;

    /// `f_i(x) = (w_i / 2) ||x - c_i||^2`, a quadratic finite sum with known optimum.
    struct Quadratics {
        weights: Vec<f64>,
        centers: Vec<Vector>,
        calls: AtomicU64,
        g: Option<crate::oracle::L1>,
    }

    impl Quadratics {
        fn new(weights: Vec<f64>, centers: Vec<Vector>) -> Self {
            Self { weights, centers, calls: AtomicU64::new(0), g: None }
        }

        fn optimum(&self) -> Vector {
            let w: f64 = self.weights.iter().sum();
            let mut x = Vector::zeros(self.dim());
            for (wi, ci) in self.weights.iter().zip(&self.centers) {
                x.axpy(wi / w, ci);
            }
            x
        }
    }

    impl FiniteSumProblem for Quadratics {
        fn num_components(&self) -> usize {
            self.weights.len()
        }
        fn dim(&self) -> usize {
            self.centers[0].dim()
        }
        fn value_i(&self, i: usize, x: &Vector) -> f64 {
            0.5 * self.weights[i] * x.dist(&self.centers[i]).powi(2)
        }
        fn add_grad_i(&self, i: usize, x: &Vector, weight: f64, out: &mut Vector) {
            self.calls.fetch_add(1, Ordering::Relaxed);
            out.axpy(weight * self.weights[i], &(x - &self.centers[i]));
        }
        fn nonsmooth(&self) -> Option<&dyn ProxOracle> {
            self.g.as_ref().map(|g| g as &dyn ProxOracle)
        }
        fn mu(&self) -> f64 {
            self.weights.iter().sum::<f64>() / self.weights.len() as f64
        }
        fn beta_component(&self) -> f64 {
            self.weights.iter().fold(0.0, |a, &b| a.max(b))
        }
        fn beta_full(&self) -> f64 {
            self.mu()
        }
    }

    fn random_quadratics(m: usize, d: usize, seed: u64) -> Quadratics {
        let mut rng = RandomStream::new(seed, 0);
        let weights = (0..m).map(|_| rng.uniform_in(0.5, 20.0)).collect();
        let centers = (0..m).map(|_| rng.normal_vector(d)).collect();
        Quadratics::new(weights, centers)
    }

    fn bisect_root(a: f64, q: f64) -> f64 {
        let f = |x: f64| x * x - (1.0 - x) * a * a - q * x;
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn momentum_examples() {
        let (a, b) = momentum_update(0.5, 0.25).unwrap();
        assert!((a - 0.5).abs() < 1e-15);
        assert!((b - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(momentum_update(1.0, 1.0).unwrap(), (1.0, 0.0));
        let (a, _) = momentum_update(0.9, 0.01).unwrap();
        assert!((a - bisect_root(0.9, 0.01)).abs() < 1e-12);
        assert!(momentum_update(0.0, 0.5).is_err());
        assert!(momentum_update(0.5, 1.5).is_err());
    }

    #[test]
    fn momentum_root_solves_quadratic_and_drifts_to_sqrt_q() {
        let mut rng = RandomStream::new(7, 0);
        for _ in 0..100 {
            let q = rng.uniform_in(1e-6, 1.0);
            let a0 = rng.uniform_in(1e-3, 1.0);
            let (a, _) = momentum_update(a0, q).unwrap();
            assert!((a * a - (1.0 - a) * a0 * a0 - q * a).abs() <= 1e-12);
            assert!(a > 0.0 && a < 1.0);
            let (fixed, _) = momentum_update(q.sqrt(), q).unwrap();
            assert!((fixed - q.sqrt()).abs() <= 1e-14);
            let mut alpha = a0;
            let mut gap = (alpha - q.sqrt()).abs();
            for _ in 0..200 {
                alpha = momentum_update(alpha, q).unwrap().0;
                let g = (alpha - q.sqrt()).abs();
                assert!(g <= gap + 1e-15);
                gap = g;
            }
        }
    }

    #[test]
    fn kappa_matches_grid_search_of_rate_ratio() {
        let (mu, beta) = (1.0, 1e4);
        let ratio = |k: f64| (mu + k).sqrt() / (InnerMethod::Gd.tau(mu, beta, 1, k) * mu.sqrt());
        let mut best = (f64::INFINITY, 0.0);
        let mut k = 0.0;
        while k <= 3e4 {
            if ratio(k) < best.0 {
                best = (ratio(k), k);
            }
            k += 0.5;
        }
        assert!((kappa_gd(mu, beta) - 9998.0).abs() < 1e-6);
        assert!((best.1 - 9998.0).abs() <= 0.5);
        assert!(kappa_gd(1.0, 2.0) <= 1e-11);

        let m = 100;
        let ratio = |k: f64| (mu + k).sqrt() / (InnerMethod::Svrg.tau(mu, beta, m, k) * mu.sqrt());
        let mut best = (f64::INFINITY, 0.0);
        let mut k = 0.0;
        while k <= 1000.0 {
            if ratio(k) < best.0 {
                best = (ratio(k), k);
            }
            k += 0.01;
        }
        assert!((kappa_svrg(mu, beta, m) - best.1).abs() <= 0.01);
        assert_eq!(kappa_svrg(mu, beta, 1_000_000), 0.0);
    }

    #[test]
    fn svrg_gap_decays_linearly() {
        let p = random_quadratics(50, 4, 1);
        let x_star = p.optimum();
        let f_star = p.value(&x_star);
        let sub = ProximalSubproblem::plain(&p);
        let mut gaps = Vec::new();
        inner::svrg_epochs(&sub, &Vector::zeros(4), u64::MAX, &mut RandomStream::new(1, 1), |c, _| {
            gaps.push(p.value(&c.point) - f_star);
            gaps.len() >= 12
        })
        .unwrap();
        let logs: Vec<f64> = gaps.iter().map(|g| g.max(1e-300).ln()).collect();
        let n = logs.len() as f64;
        let mx = (n - 1.0) / 2.0;
        let my = logs.iter().sum::<f64>() / n;
        let slope = logs.iter().enumerate().map(|(i, y)| (i as f64 - mx) * (y - my)).sum::<f64>()
            / logs.iter().enumerate().map(|(i, _)| (i as f64 - mx).powi(2)).sum::<f64>();
        assert!(slope.exp() < 1.0, "fitted rate {}", slope.exp());
    }

    #[test]
    fn single_component_svrg_is_gradient_descent() {
        let p = Quadratics::new(vec![3.0], vec![Vector::new(vec![1.0, -2.0]).unwrap()]);
        let sub = ProximalSubproblem::plain(&p);
        let mut anchors = Vec::new();
        inner::svrg_epochs(&sub, &Vector::zeros(2), u64::MAX, &mut RandomStream::new(1, 1), |c, _| {
            anchors.push(c.point);
            anchors.len() >= 5
        })
        .unwrap();
        let step = 1.0 / (10.0 * 3.0);
        let mut x = Vector::zeros(2);
        for a in &anchors {
            assert!(a.max_abs_diff(&x) < 1e-14);
            x = Vector::lincomb(1.0, &x, -step * 3.0, &(&x - &p.centers[0]));
        }
    }

    #[test]
    fn svrg_at_optimum_returns_after_one_anchor() {
        let p = random_quadratics(30, 3, 2);
        let sub = ProximalSubproblem::plain(&p);
        let res = svrg_run(&sub, &p.optimum(), 1e-12, u64::MAX, &mut RandomStream::new(2, 2)).unwrap();
        assert_eq!(res.calls, 30);
    }

    #[test]
    fn gradient_counts_match_oracle_calls() {
        let p = random_quadratics(40, 3, 3);
        let sub = ProximalSubproblem::new(&p, 2.0, Vector::filled(3, 0.5));
        p.calls.store(0, Ordering::Relaxed);
        let res = svrg_run(&sub, &Vector::zeros(3), 1e-10, u64::MAX, &mut RandomStream::new(3, 3)).unwrap();
        // Each epoch: m anchor gradients and m stochastic steps.
        assert_eq!(res.calls % 40, 0);
        assert_eq!(p.calls.load(Ordering::Relaxed), res.calls);

        p.calls.store(0, Ordering::Relaxed);
        let r = catalyst_run(&p, InnerMethod::Svrg, 5.0, &Vector::zeros(3), 20, 1e-12).unwrap();
        assert_eq!(*r.work.last().unwrap(), p.calls.load(Ordering::Relaxed));
        assert_eq!(r.oracle_calls.get("grad_i"), p.calls.load(Ordering::Relaxed));
    }

    #[test]
    fn inner_bounds_shrink_with_budget() {
        let p = random_quadratics(20, 5, 4);
        let sub = ProximalSubproblem::new(&p, 1.0, Vector::zeros(5));
        for method in [InnerMethod::Gd, InnerMethod::ProxGd, InnerMethod::Svrg] {
            let mut bounds = Vec::new();
            for epochs in [2u64, 6, 12] {
                match method.run(&sub, &Vector::filled(5, 3.0), 0.0, epochs * 40, &mut RandomStream::new(4, 0)) {
                    Err(Error::BudgetExceeded { achieved, .. }) => bounds.push(achieved),
                    other => panic!("{other:?}"),
                }
            }
            assert!(bounds[0] >= bounds[1] && bounds[1] >= bounds[2], "{method:?}: {bounds:?}");
            if method == InnerMethod::Svrg {
                assert!(bounds[0] > bounds[2], "{bounds:?}");
            }
        }
    }

    #[test]
    fn unit_q_is_the_proximal_point_method() {
        // With kappa = 0 the subproblem is the problem itself.
        let p = random_quadratics(10, 2, 5);
        let r = catalyst_run(&p, InnerMethod::Gd, 0.0, &Vector::zeros(2), 3, 1e-20).unwrap();
        assert!(r.final_point.max_abs_diff(&p.optimum()) < 1e-9);
    }

    #[test]
    fn trajectory_matches_inertial_proximal_point() {
        // f(x) = (mu/2)(x - 3)^2 with exact subproblem solves.
        let (mu, kappa) = (1.0, 9.0);
        let p = Quadratics::new(vec![mu], vec![Vector::filled(1, 3.0)]);
        let opts = CatalystOptions { gap_scale: Some(1e-20), ..Default::default() };
        let r = catalyst_run_with(&p, InnerMethod::Gd, kappa, &Vector::zeros(1), 8, 0.0, &opts, &mut RandomStream::new(0, 0))
            .unwrap();
        let q = mu / (mu + kappa);
        let (mut x_prev, mut y, mut alpha) = (0.0, 0.0, q.sqrt());
        for t in 1..r.len() {
            let x = (mu * 3.0 + kappa * y) / (mu + kappa);
            assert!((r.iterates[t].1[0] - x).abs() < 1e-6, "t = {t}");
            let (a, b) = momentum_update(alpha, q).unwrap();
            y = x + b * (x - x_prev);
            alpha = a;
            x_prev = x;
        }
        assert_eq!(r.len(), 9);
    }

    #[test]
    fn gd_rejects_nonsmooth_problems() {
        let mut p = random_quadratics(5, 2, 6);
        p.g = Some(crate::oracle::L1::new(0.1, 2));
        assert!(catalyst_run(&p, InnerMethod::Gd, 1.0, &Vector::zeros(2), 3, 1e-8).is_err());
        let r = catalyst_run(&p, InnerMethod::ProxGd, 1.0, &Vector::zeros(2), 50, 1e-14).unwrap();
        // Optimality of the composite problem: soft-thresholded fixed point.
        let x = r.final_point;
        let grad = p.full_grad(&x);
        let lip = p.beta_full();
        let next = crate::oracle::L1::new(0.1, 2).prox(1.0 / lip, &Vector::lincomb(1.0, &x, -1.0 / lip, &grad));
        assert!(next.dist(&x) < 1e-6);
    }
}
