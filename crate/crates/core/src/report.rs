//! Per-run solver output.

use std::collections::BTreeMap;
use std::time::Instant;

use crate::linalg::Vector;

/// Oracle-call counters keyed by oracle kind (`"grad_i"`, `"subgrad"`, `"jvp"`, ...).
/// Counters only ever increase.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OracleCalls {
    counts: BTreeMap<String, u64>,
}

impl OracleCalls {
    pub fn add(&mut self, kind: &str, n: u64) {
        *self.counts.entry(kind.to_string()).or_insert(0) += n;
    }

    pub fn get(&self, kind: &str) -> u64 {
        self.counts.get(kind).copied().unwrap_or(0)
    }

    pub fn merge(&mut self, other: &OracleCalls) {
        for (k, v) in &other.counts {
            self.add(k, *v);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.counts.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

/// History of one solver run, the unit of benchmark output.
///
/// Entry `t` of every history refers to iterate `x_t`. `work` holds the
/// cumulative count of the solver's complexity unit (component gradients for
/// finite sums, subgradient samples for stochastic methods, Jacobian products
/// for composite methods) when `x_t` became available.
#[derive(Clone, Debug)]
pub struct SolverReport {
    pub solver: String,
    pub iterates: Vec<(usize, Vector)>,
    pub stride: usize,
    pub objective_history: Vec<f64>,
    pub stationarity_history: Vec<f64>,
    pub work: Vec<u64>,
    pub wall_ns: Vec<u64>,
    pub oracle_calls: OracleCalls,
    pub seed: u64,
    pub config_echo: Vec<(String, String)>,
    pub final_point: Vector,
    /// Additional named outputs (best iterate, sampled iterate, ...).
    pub named_points: Vec<(String, Vector)>,
    pub converged: bool,
    started: Instant,
}

impl SolverReport {
    pub fn new(solver: &str, x0: &Vector, stride: usize) -> Self {
        Self {
            solver: solver.to_string(),
            iterates: Vec::new(),
            stride: stride.max(1),
            objective_history: Vec::new(),
            stationarity_history: Vec::new(),
            work: Vec::new(),
            wall_ns: Vec::new(),
            oracle_calls: OracleCalls::default(),
            seed: 0,
            config_echo: Vec::new(),
            final_point: x0.clone(),
            named_points: Vec::new(),
            converged: false,
            started: Instant::now(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn echo(&mut self, key: &str, value: impl ToString) {
        self.config_echo.push((key.to_string(), value.to_string()));
    }

    /// Appends the history entry for iterate `x`.
    pub fn record(&mut self, x: &Vector, objective: f64, stationarity: f64, work: u64) {
        let t = self.len();
        if t % self.stride == 0 {
            self.iterates.push((t, x.clone()));
        }
        self.objective_history.push(objective);
        self.stationarity_history.push(stationarity);
        self.work.push(work);
        self.wall_ns
            .push(self.started.elapsed().as_nanos().min(u64::MAX as u128) as u64);
        self.final_point = x.clone();
    }

    pub fn len(&self) -> usize {
        self.objective_history.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn named_point(&self, name: &str) -> Option<&Vector> {
        self.named_points
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v)
    }

    /// Cumulative work at the first entry whose objective is at most `target`.
    pub fn work_to_reach(&self, target: f64) -> Option<u64> {
        self.objective_history
            .iter()
            .position(|&f| f <= target)
            .map(|i| self.work[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histories_stay_aligned_and_thinned() {
        let x = Vector::zeros(2);
        let mut r = SolverReport::new("t", &x, 3);
        for t in 0..7 {
            r.record(&x, 10.0 - t as f64, 1.0 / (1.0 + t as f64), 10 * t);
        }
        assert_eq!(r.len(), 7);
        assert_eq!(r.stationarity_history.len(), 7);
        assert_eq!(r.work.len(), 7);
        assert_eq!(r.wall_ns.len(), 7);
        let idx: Vec<usize> = r.iterates.iter().map(|(t, _)| *t).collect();
        assert_eq!(idx, vec![0, 3, 6]);
        assert_eq!(r.work_to_reach(7.5), Some(30));
        assert_eq!(r.work_to_reach(-100.0), None);
    }

    #[test]
    fn counters_accumulate() {
        let mut c = OracleCalls::default();
        c.add("grad_i", 5);
        c.add("grad_i", 2);
        let mut d = OracleCalls::default();
        d.add("grad_i", 1);
        d.add("prox", 1);
        c.merge(&d);
        assert_eq!(c.get("grad_i"), 8);
        assert_eq!(c.get("prox"), 1);
        assert_eq!(c.get("none"), 0);
    }
}
