//! Flat `section.key = value` experiment configs.
//!
//! Blank lines and lines starting with `#` are ignored. Every key must be
//! known for its section; errors name the offending line.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use proxkit::catalyst::{InnerMethod, WarmStart};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        Self { line: Some(line), message: message.into() }
    }

    fn global(message: impl Into<String>) -> Self {
        Self { line: None, message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Debug, PartialEq)]
pub enum ProblemSpec {
    PhaseRetrieval { d: usize, m: usize, outlier_frac: f64 },
    RobustPca { mrows: usize, ncols: usize, rank: usize, sparsity: f64 },
    Z2Sync { d: usize, edge_prob: f64, flip_prob: f64 },
    BoxNls { d: usize, m: usize },
    Lasso { d: usize, m: usize, lambda: f64 },
    Ridge { d: usize, m: usize, cond: f64 },
    /// Exactly one of `mu` and `cond` is set.
    Logistic { d: usize, m: usize, mu: Option<f64>, cond: Option<f64> },
}

impl ProblemSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ProblemSpec::PhaseRetrieval { .. } => "phase_retrieval",
            ProblemSpec::RobustPca { .. } => "robust_pca",
            ProblemSpec::Z2Sync { .. } => "z2_sync",
            ProblemSpec::BoxNls { .. } => "box_nls",
            ProblemSpec::Lasso { .. } => "lasso",
            ProblemSpec::Ridge { .. } => "ridge",
            ProblemSpec::Logistic { .. } => "erm_logistic",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProblemConfig {
    pub spec: ProblemSpec,
    /// Fixed instance seed; by default each run seed also seeds the instance.
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SolverSpec {
    ProximalPoint { nu: Option<f64>, max_iters: usize, step_tol: f64 },
    ProxLinear { outer_iters: usize, stat_tol: f64, inner_tol: f64, beta: Option<f64> },
    Pgsg { outer_iters: usize, offset: Option<usize>, shift: Option<f64> },
    Catalyst {
        inner: InnerMethod,
        /// `None` means `choose_kappa`.
        kappa: Option<f64>,
        outer_iters: usize,
        eps: f64,
        warm_start: WarmStart,
        inner_budget: Option<u64>,
    },
    Gd,
    Svrg,
}

pub const SOLVERS: &[(&str, &str)] = &[
    ("proximal_point", "proximal point method on a composite problem"),
    ("proxlinear", "prox-linear method on a composite problem"),
    ("pgsg", "proximally guided stochastic subgradient (phase retrieval)"),
    ("catalyst", "Catalyst around gd, prox_gd or svrg on a finite sum"),
    ("gd", "full (proximal) gradient descent on a finite sum"),
    ("svrg", "SVRG on a finite sum"),
];

impl SolverSpec {
    pub fn name(&self) -> &'static str {
        match self {
            SolverSpec::ProximalPoint { .. } => "proximal_point",
            SolverSpec::ProxLinear { .. } => "proxlinear",
            SolverSpec::Pgsg { .. } => "pgsg",
            SolverSpec::Catalyst { .. } => "catalyst",
            SolverSpec::Gd => "gd",
            SolverSpec::Svrg => "svrg",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitSpec {
    /// The solver's default start.
    Default,
    Zero,
    Gaussian,
    /// Uniform on the unit sphere.
    Unit,
    /// `±truth + radius ||truth|| u` with `u` a random unit vector.
    NearTruth { radius: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seeds: Vec<u64>,
    /// Work budget in the solver's complexity unit.
    pub max_work: u64,
    /// Stop (finite sums) and measure work once `f <= f* + f_tol`.
    pub f_tol: Option<f64>,
    pub gap_tol: f64,
    /// Record wall time; off by default so bundles are byte-identical.
    pub wall_clock: bool,
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub solver: SolverSpec,
    /// Optional comparison arm; the summary then gets a ratio row.
    pub baseline: Option<SolverSpec>,
    pub init: InitSpec,
    pub run: RunConfig,
}

struct Entry {
    value: String,
    line: usize,
}

/// Keys of one section, consumed by typed getters.
struct Section<'a> {
    name: &'a str,
    entries: BTreeMap<String, Entry>,
}

impl<'a> Section<'a> {
    fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, ConfigError> {
        match self.entries.remove(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse()
                .map(Some)
                .map_err(|_| ConfigError::at(e.line, format!("invalid value `{}` for `{}.{key}`", e.value, self.name))),
        }
    }

    fn required<T: FromStr>(&mut self, key: &str, context: usize) -> Result<T, ConfigError> {
        self.take(key)?
            .ok_or_else(|| ConfigError::at(context, format!("missing key `{}.{key}`", self.name)))
    }

    fn take_raw(&mut self, key: &str) -> Option<Entry> {
        self.entries.remove(key)
    }

    fn finish(self) -> Result<(), ConfigError> {
        match self.entries.iter().min_by_key(|(_, e)| e.line) {
            Some((k, e)) => Err(ConfigError::at(e.line, format!("unknown key `{}.{k}`", self.name))),
            None => Ok(()),
        }
    }

    fn first_line(&self) -> usize {
        self.entries.values().map(|e| e.line).min().unwrap_or(1)
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut sections: BTreeMap<String, BTreeMap<String, Entry>> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.trim();
            if body.is_empty() || body.starts_with('#') {
                continue;
            }
            let (key, value) = body
                .split_once('=')
                .ok_or_else(|| ConfigError::at(line, format!("expected `key = value`, got `{body}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let (section, name) = key
                .split_once('.')
                .ok_or_else(|| ConfigError::at(line, format!("unknown key `{key}`")))?;
            if !matches!(section, "problem" | "solver" | "baseline" | "init" | "run") {
                return Err(ConfigError::at(line, format!("unknown key `{key}`")));
            }
            let entry = Entry { value: value.to_string(), line };
            if sections.entry(section.to_string()).or_default().insert(name.to_string(), entry).is_some() {
                return Err(ConfigError::at(line, format!("duplicate key `{key}`")));
            }
        }
        let mut section = |name: &'static str| Section { name, entries: sections.remove(name).unwrap_or_default() };
        let problem = parse_problem(section("problem"))?;
        let solver = parse_solver(section("solver"))?
            .ok_or_else(|| ConfigError::global("missing key `solver.name`"))?;
        let baseline = parse_solver(section("baseline"))?;
        let init = parse_init(section("init"))?;
        let run = parse_run(section("run"))?;
        Ok(Self { problem, solver, baseline, init, run })
    }
}

fn parse_problem(mut s: Section<'_>) -> Result<ProblemConfig, ConfigError> {
    let kind_entry = s.take_raw("kind").ok_or_else(|| ConfigError::global("missing key `problem.kind`"))?;
    let at = kind_entry.line;
    let seed = s.take("seed")?;
    let spec = match kind_entry.value.as_str() {
        "phase_retrieval" => ProblemSpec::PhaseRetrieval {
            d: s.required("d", at)?,
            m: s.required("m", at)?,
            outlier_frac: s.take("outlier_frac")?.unwrap_or(0.0),
        },
        "robust_pca" => ProblemSpec::RobustPca {
            mrows: s.required("mrows", at)?,
            ncols: s.required("ncols", at)?,
            rank: s.required("rank", at)?,
            sparsity: s.take("sparsity")?.unwrap_or(0.0),
        },
        "z2_sync" => ProblemSpec::Z2Sync {
            d: s.required("d", at)?,
            edge_prob: s.required("edge_prob", at)?,
            flip_prob: s.take("flip_prob")?.unwrap_or(0.0),
        },
        "box_nls" => ProblemSpec::BoxNls { d: s.required("d", at)?, m: s.required("m", at)? },
        "lasso" => ProblemSpec::Lasso {
            d: s.required("d", at)?,
            m: s.required("m", at)?,
            lambda: s.required("lambda", at)?,
        },
        "ridge" => ProblemSpec::Ridge {
            d: s.required("d", at)?,
            m: s.required("m", at)?,
            cond: s.required("cond", at)?,
        },
        "erm_logistic" => {
            let (d, m) = (s.required("d", at)?, s.required("m", at)?);
            let (mu, cond) = (s.take("mu")?, s.take("cond")?);
            if mu.is_some() == cond.is_some() {
                return Err(ConfigError::at(at, "erm_logistic needs exactly one of `problem.mu` and `problem.cond`"));
            }
            ProblemSpec::Logistic { d, m, mu, cond }
        }
        other => return Err(ConfigError::at(at, format!("unknown problem kind `{other}`"))),
    };
    s.finish()?;
    Ok(ProblemConfig { spec, seed })
}

fn parse_solver(mut s: Section<'_>) -> Result<Option<SolverSpec>, ConfigError> {
    let Some(name) = s.take_raw("name") else {
        return match s.entries.is_empty() {
            true => Ok(None),
            false => Err(ConfigError::at(s.first_line(), format!("missing key `{}.name`", s.name))),
        };
    };
    let at = name.line;
    let spec = match name.value.as_str() {
        "proximal_point" => SolverSpec::ProximalPoint {
            nu: s.take("nu")?,
            max_iters: s.take("max_iters")?.unwrap_or(100),
            step_tol: s.take("step_tol")?.unwrap_or(0.0),
        },
        "proxlinear" => SolverSpec::ProxLinear {
            outer_iters: s.take("outer_iters")?.unwrap_or(100),
            stat_tol: s.take("stat_tol")?.unwrap_or(0.0),
            inner_tol: s.take("inner_tol")?.unwrap_or(1e-10),
            beta: s.take("beta")?,
        },
        "pgsg" => SolverSpec::Pgsg {
            outer_iters: s.take("outer_iters")?.unwrap_or(100),
            offset: s.take("offset")?,
            shift: s.take("shift")?,
        },
        "catalyst" => {
            let inner = match s.take_raw("inner") {
                None => InnerMethod::Gd,
                Some(e) => InnerMethod::parse(&e.value)
                    .ok_or_else(|| ConfigError::at(e.line, format!("unknown inner method `{}`", e.value)))?,
            };
            let kappa = match s.take_raw("kappa") {
                None => None,
                Some(e) if e.value == "auto" => None,
                Some(e) => Some(e.value.parse::<f64>().ok().filter(|k| *k >= 0.0).ok_or_else(|| {
                    ConfigError::at(e.line, format!("invalid value `{}` for `{}.kappa`", e.value, s.name))
                })?),
            };
            let warm_start = match s.take_raw("warm_start") {
                None => WarmStart::Previous,
                Some(e) => match e.value.as_str() {
                    "previous" => WarmStart::Previous,
                    "extrapolated" => WarmStart::Extrapolated,
                    other => return Err(ConfigError::at(e.line, format!("unknown warm start `{other}`"))),
                },
            };
            SolverSpec::Catalyst {
                inner,
                kappa,
                outer_iters: s.take("outer_iters")?.unwrap_or(1_000_000),
                eps: s.take("eps")?.unwrap_or(0.0),
                warm_start,
                inner_budget: s.take("inner_budget")?,
            }
        }
        "gd" | "prox_gd" => SolverSpec::Gd,
        "svrg" => SolverSpec::Svrg,
        other => return Err(ConfigError::at(at, format!("unknown solver `{other}`"))),
    };
    s.finish()?;
    Ok(Some(spec))
}

fn parse_init(mut s: Section<'_>) -> Result<InitSpec, ConfigError> {
    let kind = s.take_raw("kind");
    let radius: Option<f64> = s.take("radius")?;
    let init = match kind {
        None => InitSpec::Default,
        Some(e) => match e.value.as_str() {
            "default" => InitSpec::Default,
            "zero" => InitSpec::Zero,
            "gaussian" => InitSpec::Gaussian,
            "unit" => InitSpec::Unit,
            "near_truth" => InitSpec::NearTruth {
                radius: radius.ok_or_else(|| ConfigError::at(e.line, "near_truth needs `init.radius`"))?,
            },
            other => return Err(ConfigError::at(e.line, format!("unknown init kind `{other}`"))),
        },
    };
    s.finish()?;
    Ok(init)
}

fn parse_run(mut s: Section<'_>) -> Result<RunConfig, ConfigError> {
    let seeds = match s.take_raw("seeds") {
        None => vec![1],
        Some(e) => parse_seeds(&e.value).map_err(|m| ConfigError::at(e.line, m))?,
    };
    let run = RunConfig {
        seeds,
        max_work: s.take("max_work")?.unwrap_or(u64::MAX / 4),
        f_tol: s.take("f_tol")?,
        gap_tol: s.take("gap_tol")?.unwrap_or(0.0),
        wall_clock: s.take("wall_clock")?.unwrap_or(false),
        out: s.take::<String>("out")?.map(PathBuf::from),
    };
    s.finish()?;
    Ok(run)
}

/// Comma-separated seeds; `a..b` and `a..=b` expand to ranges.
fn parse_seeds(text: &str) -> Result<Vec<u64>, String> {
    let bad = || format!("invalid seed list `{text}`");
    let mut seeds = Vec::new();
    for part in text.split(',').map(str::trim) {
        if let Some((a, b)) = part.split_once("..=") {
            let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
            seeds.extend(a..=b);
        } else if let Some((a, b)) = part.split_once("..") {
            let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
            seeds.extend(a..b);
        } else {
            seeds.push(part.parse().map_err(|_| bad())?);
        }
    }
    if seeds.is_empty() {
        return Err(bad());
    }
    Ok(seeds)
}

#[cfg(test)]
mod tests {
    use super::*;

    const LASSO: &str = "\
# lasso with prox-linear
problem.kind = lasso
problem.d = 50
problem.m = 100
problem.lambda = 0.1

solver.name = proxlinear
solver.outer_iters = 20
run.seeds = 1, 2, 5..=6
";

    #[test]
    fn parses_a_full_config() {
        let cfg = ExperimentConfig::parse(LASSO).unwrap();
        assert_eq!(cfg.problem.spec, ProblemSpec::Lasso { d: 50, m: 100, lambda: 0.1 });
        assert_eq!(cfg.run.seeds, vec![1, 2, 5, 6]);
        assert!(matches!(cfg.solver, SolverSpec::ProxLinear { outer_iters: 20, .. }));
        assert_eq!(cfg.baseline, None);
        assert_eq!(cfg.init, InitSpec::Default);
        assert!(!cfg.run.wall_clock);
    }

    #[test]
    fn unknown_keys_name_their_line() {
        let text = format!("{LASSO}solver.momentum = 0.9\n");
        let err = ExperimentConfig::parse(&text).unwrap_err();
        assert_eq!(err.line, Some(10));
        assert!(err.to_string().starts_with("line 10: unknown key `solver.momentum`"));

        let err = ExperimentConfig::parse("problem.kind = lasso\nbogus = 1\n").unwrap_err();
        assert_eq!(err.line, Some(2));
        let err = ExperimentConfig::parse("problem.kind = lasso\nfoo.bar = 1\n").unwrap_err();
        assert_eq!(err.line, Some(2));
    }

    #[test]
    fn malformed_values_and_lines_are_rejected() {
        let err = ExperimentConfig::parse(&LASSO.replace("problem.m = 100", "problem.m = many")).unwrap_err();
        assert_eq!(err.line, Some(4));
        let err = ExperimentConfig::parse(&LASSO.replace("problem.m = 100", "problem.m 100")).unwrap_err();
        assert_eq!(err.line, Some(4));
        let err = ExperimentConfig::parse(&format!("{LASSO}problem.d = 3\n")).unwrap_err();
        assert!(err.message.contains("duplicate"));
        let err = ExperimentConfig::parse(&LASSO.replace("problem.lambda = 0.1\n", "")).unwrap_err();
        assert!(err.message.contains("problem.lambda"), "{err}");
        assert!(ExperimentConfig::parse(&LASSO.replace("1, 2, 5..=6", "x")).is_err());
    }

    #[test]
    fn catalyst_options() {
        let text = "problem.kind = ridge\nproblem.d = 5\nproblem.m = 10\nproblem.cond = 100\n\
                    solver.name = catalyst\nsolver.inner = svrg\nsolver.kappa = auto\nsolver.warm_start = extrapolated\n\
                    baseline.name = svrg\nrun.f_tol = 1e-6\nrun.seeds = 0..3\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        match cfg.solver {
            SolverSpec::Catalyst { inner, kappa, warm_start, .. } => {
                assert_eq!(inner, InnerMethod::Svrg);
                assert_eq!(kappa, None);
                assert_eq!(warm_start, WarmStart::Extrapolated);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(cfg.baseline, Some(SolverSpec::Svrg));
        assert_eq!(cfg.run.seeds, vec![0, 1, 2]);
        assert_eq!(cfg.run.f_tol, Some(1e-6));
        let err = ExperimentConfig::parse(&text.replace("kappa = auto", "kappa = -1")).unwrap_err();
        assert_eq!(err.line, Some(7));
    }

    #[test]
    fn logistic_needs_exactly_one_scale() {
        let base = "problem.kind = erm_logistic\nproblem.d = 3\nproblem.m = 10\nsolver.name = svrg\n";
        assert!(ExperimentConfig::parse(base).is_err());
        assert!(ExperimentConfig::parse(&format!("{base}problem.mu = 0.1\n")).is_ok());
        assert!(ExperimentConfig::parse(&format!("{base}problem.mu = 0.1\nproblem.cond = 5\n")).is_err());
    }
}
