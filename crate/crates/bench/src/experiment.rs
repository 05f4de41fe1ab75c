//! Building instances, running solver arms and assembling the output bundle.

use std::fs;
use std::io;
use std::path::Path;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use proxkit::catalyst::{
    catalyst_run_with, choose_kappa, gd_run, svrg_plain_run, CatalystOptions, FiniteSumProblem, StopRule,
};
use proxkit::moreau::{proximal_point_run, ProxFunction};
use proxkit::pgsg::{default_schedule, pgsg_run, PgsgSchedule, StochasticProblem};
use proxkit::problems::{
    make_box_nls, make_erm_logistic, make_erm_logistic_conditioned, make_lasso, make_phase_retrieval,
    make_robust_pca, make_ridge, make_z2_sync, SyntheticInstance,
};
use proxkit::proxlinear::proxlinear_run;
use proxkit::{CompositeProblem, RandomStream, SolverReport, Vector};

use crate::config::{ExperimentConfig, InitSpec, ProblemSpec, SolverSpec};
use crate::summary::{emit_summary, fmt_real, Arm};

pub const SCHEMA_VERSION: u32 = 1;
pub const RUN_HEADER: &str = "iter,objective,stationarity,grad_evals,wall_ns";

/// Stream ids of the per-run random streams; arms never share one.
const STREAM_SOLVER: u64 = 1;
const STREAM_BASELINE: u64 = 2;
const STREAM_INIT: u64 = 3;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{0}")]
    Solver(#[from] proxkit::Error),
    #[error("{0}")]
    Unsupported(String),
}

pub fn build_instance(spec: &ProblemSpec, seed: u64) -> proxkit::Result<SyntheticInstance> {
    match *spec {
        ProblemSpec::PhaseRetrieval { d, m, outlier_frac } => make_phase_retrieval(d, m, outlier_frac, seed),
        ProblemSpec::RobustPca { mrows, ncols, rank, sparsity } => make_robust_pca(mrows, ncols, rank, sparsity, seed),
        ProblemSpec::Z2Sync { d, edge_prob, flip_prob } => make_z2_sync(d, edge_prob, flip_prob, seed),
        ProblemSpec::BoxNls { d, m } => make_box_nls(d, m, seed),
        ProblemSpec::Lasso { d, m, lambda } => make_lasso(d, m, lambda, seed),
        ProblemSpec::Ridge { d, m, cond } => make_ridge(d, m, cond, seed),
        ProblemSpec::Logistic { d, m, mu: Some(mu), .. } => make_erm_logistic(d, m, mu, seed),
        ProblemSpec::Logistic { d, m, cond, .. } => make_erm_logistic_conditioned(d, m, cond.unwrap_or(0.0), seed),
    }
}

fn initial_point(init: InitSpec, solver: &SolverSpec, inst: &SyntheticInstance, rng: &mut RandomStream) -> Vector {
    let d = inst.dim();
    match init {
        InitSpec::Zero => Vector::zeros(d),
        InitSpec::Gaussian => rng.normal_vector(d),
        InitSpec::Unit => rng.unit_vector(d),
        InitSpec::NearTruth { radius } => match &inst.ground_truth {
            Some(truth) => {
                let sign = rng.sign();
                Vector::lincomb(sign, truth, radius * truth.norm(), &rng.unit_vector(d))
            }
            None => Vector::zeros(d),
        },
        // The origin is stationary for phase retrieval, so pgsg starts on the sphere.
        InitSpec::Default if matches!(solver, SolverSpec::Pgsg { .. }) => rng.unit_vector(d),
        InitSpec::Default => Vector::zeros(d),
    }
}

fn composite<'a>(inst: &'a SyntheticInstance, solver: &str) -> Result<&'a CompositeProblem, RunError> {
    inst.composite()
        .ok_or_else(|| RunError::Unsupported(format!("{solver} needs a composite problem, got `{}`", inst.kind())))
}

fn finite_sum<'a>(inst: &'a SyntheticInstance, solver: &str) -> Result<&'a dyn FiniteSumProblem, RunError> {
    inst.finite_sum()
        .map(|p| p.as_ref())
        .ok_or_else(|| RunError::Unsupported(format!("{solver} needs a finite-sum problem, got `{}`", inst.kind())))
}

/// Runs one solver arm on a built instance.
pub fn run_solver(
    cfg: &ExperimentConfig,
    spec: &SolverSpec,
    inst: &SyntheticInstance,
    x0: &Vector,
    rng: &mut RandomStream,
) -> Result<SolverReport, RunError> {
    let f_target = match (cfg.run.f_tol, inst.optimum_value) {
        (Some(tol), Some(f)) => Some(f + tol),
        _ => None,
    };
    let stop = StopRule { max_work: cfg.run.max_work, f_target, gap_tol: cfg.run.gap_tol };
    let report = match *spec {
        SolverSpec::ProximalPoint { nu, max_iters, step_tol } => {
            let p = composite(inst, "proximal_point")?;
            let rho = ProxFunction::weak_convexity(p);
            let nu = nu.unwrap_or(if rho > 0.0 { 0.5 / rho } else { 1.0 });
            proximal_point_run(p, nu, x0, max_iters, step_tol)?
        }
        SolverSpec::ProxLinear { outer_iters, stat_tol, inner_tol, beta } => {
            let p = composite(inst, "proxlinear")?;
            proxlinear_run(p, x0, beta.unwrap_or(p.penalty()), outer_iters, stat_tol, inner_tol)?
        }
        SolverSpec::Pgsg { outer_iters, offset, shift } => {
            let sp = inst
                .stochastic_phase_retrieval()
                .ok_or_else(|| RunError::Unsupported(format!("pgsg needs phase_retrieval, got `{}`", inst.kind())))?;
            let default = default_schedule(sp.rho())?;
            let schedule = PgsgSchedule::new(
                sp.rho(),
                offset.unwrap_or(default.offset),
                shift.unwrap_or(default.shift),
            )?;
            pgsg_run(&sp, x0, outer_iters, &schedule, rng, None)?
        }
        SolverSpec::Catalyst { inner, kappa, outer_iters, eps, warm_start, inner_budget } => {
            let p = finite_sum(inst, "catalyst")?;
            let kappa = kappa.unwrap_or_else(|| choose_kappa(p, inner));
            let opts = CatalystOptions {
                warm_start,
                inner_budget: inner_budget.unwrap_or(u64::MAX / 4),
                max_work: cfg.run.max_work,
                f_target,
                gap_scale: None,
            };
            catalyst_run_with(p, inner, kappa, x0, outer_iters, eps, &opts, rng)?
        }
        SolverSpec::Gd => gd_run(finite_sum(inst, "gd")?, x0, &stop)?,
        SolverSpec::Svrg => svrg_plain_run(finite_sum(inst, "svrg")?, x0, &stop, rng)?,
    };
    Ok(report)
}

/// One (arm, seed) run.
pub struct RunOutcome {
    pub arm: &'static str,
    pub seed: u64,
    /// Optimal value of the run's instance, when known.
    pub optimum: Option<f64>,
    pub result: Result<SolverReport, String>,
}

impl RunOutcome {
    pub fn file_name(&self) -> String {
        format!("{}_seed{}.csv", self.arm, self.seed)
    }
}

/// Everything an experiment produces, before it touches the filesystem.
pub struct ExperimentOutput {
    pub outcomes: Vec<RunOutcome>,
    /// `(file name, contents)`, in write order; includes the MANIFEST.
    pub files: Vec<(String, Vec<u8>)>,
    /// Median over seeds of baseline over solver work to reach `f* + f_tol`.
    pub ratio: Option<f64>,
    pub failed: bool,
}

impl ExperimentOutput {
    pub fn reports(&self, arm: &str) -> Vec<&SolverReport> {
        self.outcomes
            .iter()
            .filter(|o| o.arm == arm)
            .filter_map(|o| o.result.as_ref().ok())
            .collect()
    }

    pub fn write_to(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        for (name, bytes) in &self.files {
            fs::write(dir.join(name), bytes)?;
        }
        Ok(())
    }
}

pub fn config_hash(text: &str) -> String {
    format!("{:x}", Sha256::digest(text.as_bytes()))
}

/// Runs every seed of every arm on a pool of `jobs` workers. Output does not
/// depend on `jobs`. Seeds are shifted by `seed_offset`.
pub fn run_experiment(cfg: &ExperimentConfig, config_text: &str, jobs: usize, seed_offset: u64) -> ExperimentOutput {
    let mut tasks: Vec<(&'static str, &SolverSpec, u64, u64)> = Vec::new();
    for &seed in &cfg.run.seeds {
        let seed = seed.wrapping_add(seed_offset);
        tasks.push(("solver", &cfg.solver, seed, STREAM_SOLVER));
        if let Some(b) = &cfg.baseline {
            tasks.push(("baseline", b, seed, STREAM_BASELINE));
        }
    }
    let run = |&(arm, spec, seed, stream): &(&'static str, &SolverSpec, u64, u64)| {
        let instance_seed = cfg.problem.seed.map_or(seed, |s| s.wrapping_add(seed_offset));
        let mut optimum = None;
        let result = build_instance(&cfg.problem.spec, instance_seed)
            .map_err(RunError::from)
            .and_then(|inst| {
                optimum = inst.optimum_value;
                let x0 = initial_point(cfg.init, spec, &inst, &mut RandomStream::new(seed, STREAM_INIT));
                run_solver(cfg, spec, &inst, &x0, &mut RandomStream::new(seed, stream))
            })
            .map(|mut r| {
                r.seed = seed;
                if !cfg.run.wall_clock {
                    r.wall_ns.iter_mut().for_each(|w| *w = 0);
                }
                r
            })
            .map_err(|e| e.to_string());
        RunOutcome { arm, seed, optimum, result }
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build();
    let outcomes: Vec<RunOutcome> = match pool {
        Ok(pool) => pool.install(|| tasks.par_iter().map(run).collect()),
        Err(_) => tasks.iter().map(run).collect(),
    };
    assemble(cfg, config_text, outcomes)
}

fn assemble(cfg: &ExperimentConfig, config_text: &str, outcomes: Vec<RunOutcome>) -> ExperimentOutput {
    let hash = config_hash(config_text);
    let version = env!("CARGO_PKG_VERSION");
    let comment = |extra: &str| format!("# proxkit-bench {version} schema={SCHEMA_VERSION} config_sha256={hash} {extra}\n");
    let mut files = Vec::new();
    let mut manifest = comment("manifest");
    let mut failed = false;

    for o in &outcomes {
        match &o.result {
            Ok(r) => {
                let mut text = comment(&format!(
                    "seed={} arm={} solver={} problem={}",
                    o.seed,
                    o.arm,
                    r.solver,
                    cfg.problem.spec.kind()
                ));
                text.push_str(RUN_HEADER);
                text.push('\n');
                for t in 0..r.len() {
                    text.push_str(&format!(
                        "{t},{},{},{},{}\n",
                        fmt_real(r.objective_history[t]),
                        fmt_real(r.stationarity_history[t]),
                        r.work[t],
                        r.wall_ns[t]
                    ));
                }
                files.push((o.file_name(), text.into_bytes()));
            }
            Err(e) => {
                failed = true;
                manifest.push_str(&format!("FAILED {} seed={}: {}\n", o.arm, o.seed, e.replace('\n', " ")));
            }
        }
    }

    let solver = outcomes.iter().filter(|o| o.arm == "solver").filter_map(|o| o.result.as_ref().ok()).collect::<Vec<_>>();
    let baseline = outcomes.iter().filter(|o| o.arm == "baseline").filter_map(|o| o.result.as_ref().ok()).collect::<Vec<_>>();
    let ratio = match (&cfg.baseline, cfg.run.f_tol) {
        (Some(_), Some(tol)) => Some(work_ratio(&outcomes, tol).unwrap_or(f64::NAN)),
        _ => None,
    };

    let mut arms = vec![Arm { name: "solver", reports: solver }];
    if cfg.baseline.is_some() {
        arms.push(Arm { name: "baseline", reports: baseline });
    }
    let seeds: Vec<String> = outcomes.iter().filter(|o| o.arm == "solver").map(|o| o.seed.to_string()).collect();
    if let Ok(csv) = emit_summary(&arms, ratio) {
        let mut text = comment(&format!("seeds={}", seeds.join(";")));
        text.push_str(&csv);
        files.push(("summary.csv".to_string(), text.into_bytes()));
    }

    for (name, bytes) in &files {
        manifest.push_str(&format!("{name} {} {:x}\n", bytes.len(), Sha256::digest(bytes)));
    }
    files.push(("MANIFEST".to_string(), manifest.into_bytes()));
    ExperimentOutput { outcomes, files, ratio, failed }
}

/// Median over seeds of `baseline work / solver work` to reach `f* + tol`;
/// `None` when some run failed or never reached the target.
pub fn work_ratio(outcomes: &[RunOutcome], tol: f64) -> Option<f64> {
    let mut ratios = Vec::new();
    for o in outcomes.iter().filter(|o| o.arm == "solver") {
        let target = o.optimum? + tol;
        let s = o.result.as_ref().ok()?.work_to_reach(target)?;
        let b = outcomes.iter().find(|b| b.arm == "baseline" && b.seed == o.seed)?;
        let b = b.result.as_ref().ok()?.work_to_reach(target)?;
        ratios.push(b as f64 / s.max(1) as f64);
    }
    if ratios.is_empty() {
        return None;
    }
    ratios.sort_by(f64::total_cmp);
    Some(crate::summary::quantile(&ratios, 0.5))
}

#[cfg(test)]
mod tests {
    use super::*;

    const LASSO: &str = "problem.kind = lasso\nproblem.d = 50\nproblem.m = 100\nproblem.lambda = 0.1\n\
                         solver.name = proxlinear\nsolver.outer_iters = 5\nrun.seeds = 1\n";

    fn run(text: &str, jobs: usize) -> ExperimentOutput {
        run_experiment(&ExperimentConfig::parse(text).unwrap(), text, jobs, 0)
    }

    #[test]
    fn run_csv_has_the_schema_columns() {
        let out = run(LASSO, 1);
        assert!(!out.failed);
        let (name, bytes) = &out.files[0];
        assert_eq!(name, "solver_seed1.csv");
        let text = String::from_utf8(bytes.clone()).unwrap();
        let mut lines = text.lines();
        let comment = lines.next().unwrap();
        assert!(comment.starts_with("# proxkit-bench ") && comment.contains("seed=1") && comment.contains("config_sha256="));
        assert_eq!(lines.next().unwrap(), RUN_HEADER);
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 6);
        for (t, row) in rows.iter().enumerate() {
            let cols: Vec<&str> = row.split(',').collect();
            assert_eq!(cols.len(), 5);
            assert_eq!(cols[0], t.to_string());
            assert!(cols[1].parse::<f64>().unwrap().is_finite());
            assert_eq!(cols[4], "0");
        }
        assert!(!text.contains('\r'));
        assert_eq!(out.files.last().unwrap().0, "MANIFEST");
    }

    #[test]
    fn output_is_independent_of_worker_count() {
        let text = "problem.kind = ridge\nproblem.d = 5\nproblem.m = 30\nproblem.cond = 100\n\
                    solver.name = catalyst\nsolver.inner = svrg\nbaseline.name = svrg\n\
                    run.seeds = 1, 2, 3\nrun.f_tol = 1e-8\nrun.max_work = 200000\n";
        let a = run(text, 1);
        let b = run(text, 4);
        assert_eq!(a.files, b.files);
        assert!(a.ratio.is_some_and(|r| r.is_finite()));
        let summary = String::from_utf8(a.files.iter().find(|f| f.0 == "summary.csv").unwrap().1.clone()).unwrap();
        assert!(summary.lines().last().unwrap().starts_with("ratio,"));
    }

    #[test]
    fn seed_offset_shifts_every_seed() {
        let cfg = ExperimentConfig::parse(LASSO).unwrap();
        let out = run_experiment(&cfg, LASSO, 1, 10);
        assert_eq!(out.outcomes[0].seed, 11);
        assert_eq!(out.files[0].0, "solver_seed11.csv");
    }

    #[test]
    fn solver_failures_are_recorded_in_the_manifest() {
        let text = LASSO.replace("solver.name = proxlinear\nsolver.outer_iters = 5", "solver.name = svrg");
        let out = run(&text, 1);
        assert!(out.failed);
        let manifest = String::from_utf8(out.files.last().unwrap().1.clone()).unwrap();
        assert!(manifest.contains("FAILED solver seed=1"), "{manifest}");
    }
}
