//! Unaccelerated reference runs of the inner methods on the full problem.

use super::inner::{gradient_steps, svrg_epochs, Checkpoint, ProximalSubproblem};
use super::FiniteSumProblem;
use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::report::SolverReport;
use crate::rng::RandomStream;

/// When a plain run stops. Whichever condition triggers first wins.
#[derive(Clone, Debug)]
pub struct StopRule {
    /// Component-gradient budget.
    pub max_work: u64,
    /// Stop once `F(x) <= f_target`.
    pub f_target: Option<f64>,
    /// Stop once the certified gap is at most this.
    pub gap_tol: f64,
}

impl StopRule {
    pub fn work(max_work: u64) -> Self {
        Self { max_work, f_target: None, gap_tol: 0.0 }
    }

    fn reached(&self, c: &Checkpoint, f: f64) -> bool {
        c.bound <= self.gap_tol || self.f_target.is_some_and(|t| f <= t)
    }
}

/// Full (proximal) gradient descent with step `1/beta_full`. One history
/// entry per step.
pub fn gd_run(problem: &dyn FiniteSumProblem, x0: &Vector, stop: &StopRule) -> Result<SolverReport> {
    x0.check_dim(problem.dim())?;
    let name = if problem.nonsmooth().is_some() { "prox_gd" } else { "gd" };
    let mut report = SolverReport::new(name, x0, 1);
    let sub = ProximalSubproblem::plain(problem);
    let spent = gradient_steps(&sub, x0, stop.max_work, |c, calls| visit(&mut report, problem, stop, c, calls))?;
    finish(report, spent.total)
}

/// Plain SVRG; one history entry per epoch anchor.
pub fn svrg_plain_run(
    problem: &dyn FiniteSumProblem,
    x0: &Vector,
    stop: &StopRule,
    rng: &mut RandomStream,
) -> Result<SolverReport> {
    x0.check_dim(problem.dim())?;
    if !(problem.mu() > 0.0) {
        return Err(Error::InvalidModulus(problem.mu()));
    }
    let mut report = SolverReport::new("svrg", x0, 1).with_seed(rng.seed());
    let sub = ProximalSubproblem::plain(problem);
    let spent = svrg_epochs(&sub, x0, stop.max_work, rng, |c, calls| visit(&mut report, problem, stop, c, calls))?;
    finish(report, spent.total)
}

fn visit(report: &mut SolverReport, problem: &dyn FiniteSumProblem, stop: &StopRule, c: Checkpoint, calls: u64) -> bool {
    let f = problem.value(&c.point);
    report.record(&c.point, f, c.grad.norm(), calls);
    let done = stop.reached(&c, f);
    report.converged = done;
    done
}

fn finish(mut report: SolverReport, total: u64) -> Result<SolverReport> {
    report.oracle_calls.add("grad_i", total);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::make_ridge;

    #[test]
    fn plain_runs_reach_the_ridge_optimum() {
        let inst = make_ridge(5, 40, 50.0, 1).unwrap();
        let p = inst.finite_sum().unwrap().as_ref();
        let f_star = inst.optimum_value.unwrap();
        let stop = StopRule { max_work: 2_000_000, f_target: Some(f_star + 1e-9), gap_tol: 0.0 };
        let gd = gd_run(p, &Vector::zeros(5), &stop).unwrap();
        assert!(gd.converged);
        assert!(gd.work.windows(2).all(|w| w[1] == w[0] + 40));
        let svrg = svrg_plain_run(p, &Vector::zeros(5), &stop, &mut RandomStream::new(1, 0)).unwrap();
        assert!(svrg.converged);
        assert!(svrg.work.windows(2).all(|w| w[1] == w[0] + 80));
    }

    #[test]
    fn budget_stops_unconverged_runs() {
        let inst = make_ridge(5, 40, 1e4, 2).unwrap();
        let p = inst.finite_sum().unwrap().as_ref();
        let r = gd_run(p, &Vector::zeros(5), &StopRule::work(400)).unwrap();
        assert!(!r.converged);
        assert_eq!(*r.work.last().unwrap(), 400);
        assert_eq!(r.len(), 10);
    }
}
