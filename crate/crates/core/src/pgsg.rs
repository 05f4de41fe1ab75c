//! The proximally guided stochastic subgradient method.
//!
//! Outer step `t` approximately solves the proximal subproblem
//! `min_y f(y) + rho ||y - x_t||^2` by `j_t - 1` stochastic subgradient steps
//! started at `y_0 = x_t`, and sets `x_{t+1}` to the average of `y_0..y_{j_t - 1}`.
//!
//! The regularized model has gradient term `2 rho (y - x_t)` and is therefore
//! `rho`-strongly convex for a `rho`-weakly convex `f`. Progress is measured by
//! `||∇F_nu(x_t)||` with `nu = 1 / (2 rho)`.

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::moreau::{prox_map, ProxFunction};
use crate::oracle::BoxIndicator;
use crate::report::SolverReport;
use crate::rng::RandomStream;

/// Inner accuracy of the deterministic prox solves behind the stationarity
/// measure.
pub const STATIONARITY_TOL: f64 = 1e-8;
const STATIONARITY_BUDGET: usize = 10_000;

/// A stochastic objective `F(x) = E f(x, ζ)`.
pub trait StochasticProblem: Send + Sync {
    type Sample;

    fn dim(&self) -> usize;
    fn sample(&self, rng: &mut RandomStream) -> Self::Sample;
    fn stoch_value(&self, x: &Vector, z: &Self::Sample) -> f64;
    fn stoch_subgrad(&self, x: &Vector, z: &Self::Sample) -> Vector;

    /// Weak convexity modulus of every `f(., ζ)`.
    fn rho(&self) -> f64;
    fn lip(&self) -> f64;

    /// The exact objective, available on synthetic instances; used for
    /// evaluation only.
    fn full_objective(&self) -> Option<&dyn ProxFunction> {
        None
    }
}

/// Inner iteration counts `j_t = t + offset` and step sizes
/// `alpha_j = 2 / (rho (j + shift))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PgsgSchedule {
    pub rho: f64,
    pub offset: usize,
    pub shift: f64,
}

impl PgsgSchedule {
    pub fn new(rho: f64, offset: usize, shift: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::InvalidModulus(rho));
        }
        if offset == 0 || !(shift > 0.0) {
            return Err(Error::invalid("schedule needs offset >= 1 and shift > 0"));
        }
        Ok(Self { rho, offset, shift })
    }

    pub fn inner_counts(&self, t: usize) -> usize {
        t + self.offset
    }

    pub fn inner_steps(&self, j: usize) -> f64 {
        2.0 / (self.rho * (j as f64 + self.shift))
    }
}

/// `ceil(648 ln 648)`; the logarithm is taken to be natural.
pub fn default_inner_offset() -> usize {
    (648.0 * 648f64.ln()).ceil() as usize
}

/// `j_t = t + ceil(648 ln 648)` and `alpha_j = 2 / (rho (j + 49))`.
pub fn default_schedule(rho: f64) -> Result<PgsgSchedule> {
    PgsgSchedule::new(rho, default_inner_offset(), 49.0)
}

/// Result of one outer step.
#[derive(Clone, Debug)]
pub struct PgsgStep {
    pub x_next: Vector,
    /// Number of stochastic subgradients drawn (`j_t - 1`).
    pub draws: u64,
    /// Mean of the sampled values `f(y_j, ζ_j)`.
    pub sampled_value: f64,
}

/// One outer step from `x_t` with `j_t` averaged inner points. When `trace` is
/// given, every inner point `y_0..y_{j_t - 1}` is appended to it.
pub fn pgsg_step<P: StochasticProblem + ?Sized>(
    problem: &P,
    x_t: &Vector,
    j_t: usize,
    schedule: &PgsgSchedule,
    rng: &mut RandomStream,
    projector: Option<&BoxIndicator>,
    mut trace: Option<&mut Vec<Vector>>,
) -> Result<PgsgStep> {
    let two_rho = 2.0 * schedule.rho;
    let mut y = x_t.clone();
    let mut sum = Vector::zeros(x_t.dim());
    let mut value_sum = 0.0;
    for j in 0..j_t {
        sum.axpy(1.0, &y);
        if let Some(tr) = trace.as_deref_mut() {
            tr.push(y.clone());
        }
        if j + 1 == j_t {
            break;
        }
        let z = problem.sample(rng);
        value_sum += problem.stoch_value(&y, &z);
        let mut v = problem.stoch_subgrad(&y, &z);
        if !v.is_finite() || v.dim() != y.dim() {
            return Err(Error::OracleFailure {
                context: format!("pgsg inner step {j}"),
                detail: "stochastic subgradient is not a finite vector of the right size".into(),
            });
        }
        v.axpy(two_rho, &(&y - x_t));
        y.axpy(-schedule.inner_steps(j), &v);
        if let Some(b) = projector {
            y = b.project(&y);
        }
    }
    let draws = (j_t - 1) as u64;
    Ok(PgsgStep {
        x_next: sum.scaled(1.0 / j_t as f64),
        draws,
        sampled_value: if draws > 0 { value_sum / draws as f64 } else { f64::NAN },
    })
}

/// `||∇F_nu(x)||` with `nu = 1/(2 rho)` from a deterministic prox solve.
pub fn envelope_stationarity(f: &dyn ProxFunction, rho: f64, x: &Vector) -> Result<f64> {
    let mp = prox_map(f, 0.5 / rho, x, STATIONARITY_TOL, STATIONARITY_BUDGET)?;
    Ok(mp.envelope_gradient.norm())
}

/// Runs `outer_iters` outer steps from `x0`.
///
/// With a full objective, entry `t` (for `t = 0..=outer_iters`) records
/// `F(x_t)` and `||∇F_{1/(2 rho)}(x_t)||`. Without one, entry `t` (for
/// `t < outer_iters`) records the mean sampled value and the step proxy
/// `2 rho ||x_t - x_{t+1}||`. The work column counts stochastic subgradients.
///
/// `final_point` is the last iterate; the named points `best` (smallest
/// recorded stationarity among `x_1..x_T`) and `sampled` (uniform over
/// `x_1..x_T`, from a stream forked off `rng`) are also reported.
pub fn pgsg_run<P: StochasticProblem + ?Sized>(
    problem: &P,
    x0: &Vector,
    outer_iters: usize,
    schedule: &PgsgSchedule,
    rng: &mut RandomStream,
    projector: Option<&BoxIndicator>,
) -> Result<SolverReport> {
    x0.check_dim(problem.dim())?;
    if !x0.is_finite() {
        return Err(Error::invalid("initial point is not finite"));
    }
    let mut report = SolverReport::new("pgsg", x0, 1).with_seed(rng.seed());
    report.echo("rho", schedule.rho);
    report.echo("offset", schedule.offset);
    report.echo("shift", schedule.shift);
    report.echo("outer_iters", outer_iters);
    let full = problem.full_objective();
    let mut x = match projector {
        Some(b) => b.project(x0),
        None => x0.clone(),
    };
    let mut work = 0u64;
    let mut prox_solves = 0u64;
    let mut points = Vec::with_capacity(outer_iters);

    if let Some(f) = full {
        report.record(&x, f.value(&x), envelope_stationarity(f, schedule.rho, &x)?, 0);
        prox_solves += 1;
    }
    for t in 0..outer_iters {
        let step = pgsg_step(problem, &x, schedule.inner_counts(t), schedule, rng, projector, None)?;
        work += step.draws;
        match full {
            Some(f) => {
                let s = envelope_stationarity(f, schedule.rho, &step.x_next)?;
                prox_solves += 1;
                report.record(&step.x_next, f.value(&step.x_next), s, work);
                points.push((s, step.x_next.clone()));
            }
            None => {
                let s = 2.0 * schedule.rho * x.dist(&step.x_next);
                report.record(&x, step.sampled_value, s, work - step.draws);
                points.push((s, step.x_next.clone()));
            }
        }
        x = step.x_next;
    }
    report.oracle_calls.add("stoch_subgrad", work);
    report.oracle_calls.add("prox", prox_solves);
    report.final_point = x;
    if !points.is_empty() {
        let best = points
            .iter()
            .enumerate()
            .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0).then(a.0.cmp(&b.0)))
            .map(|(_, p)| p.1.clone())
            .expect("nonempty");
        let pick = rng.fork(u64::MAX).below(points.len());
        report.named_points.push(("best".into(), best));
        report.named_points.push(("sampled".into(), points[pick].1.clone()));
    }
    Ok(report)
}
