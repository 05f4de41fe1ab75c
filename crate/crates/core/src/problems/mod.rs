//! Synthetic problem instances.
//!
//! Every generator is a pure function of its parameters and seed. It first
//! draws raw [`InstanceData`] (named arrays plus scalar parameters) and then
//! builds the oracles from that data, so an instance read back from its binary
//! container is identical to the generated one.

mod box_nls;
mod container;
mod erm;
mod phase_retrieval;
mod rpca;
mod z2;

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::catalyst::FiniteSumProblem;
use crate::composite::CompositeProblem;
use crate::error::{Error, Result};
use crate::linalg::{self, Vector};
use crate::rng::RandomStream;

pub use box_nls::{make_box_nls, QuadraticMap};
pub use container::{InstanceData, CONTAINER_MAGIC};
pub use erm::{make_erm_logistic, make_erm_logistic_conditioned, make_lasso, make_ridge, LeastSquaresHalf, Logistic, Ridge};
pub use phase_retrieval::{make_phase_retrieval, PhaseRetrievalMap, StochasticPhaseRetrieval};
pub use rpca::{make_robust_pca, FactorResidual};
pub use z2::{make_z2_sync, EdgeProducts};

/// Names accepted by [`SyntheticInstance::from_data`].
pub const KINDS: &[&str] = &[
    "phase_retrieval",
    "robust_pca",
    "z2_sync",
    "box_nls",
    "lasso",
    "ridge",
    "erm_logistic",
];

#[derive(Clone)]
pub enum InstanceProblem {
    Composite(CompositeProblem),
    FiniteSum(Arc<dyn FiniteSumProblem>),
}

/// A generated problem with its ground truth.
#[derive(Clone)]
pub struct SyntheticInstance {
    pub problem: InstanceProblem,
    /// Planted point (phase retrieval, PCA, Z2, NLS, LASSO) or the exact
    /// minimizer (ridge, logistic).
    pub ground_truth: Option<Vector>,
    /// Known optimal value, when the instance has one.
    pub optimum_value: Option<f64>,
    pub data: InstanceData,
}

impl SyntheticInstance {
    /// Rebuilds an instance from its raw data.
    pub fn from_data(data: InstanceData) -> Result<Self> {
        match data.kind.as_str() {
            "phase_retrieval" => phase_retrieval::build(data),
            "robust_pca" => rpca::build(data),
            "z2_sync" => z2::build(data),
            "box_nls" => box_nls::build(data),
            "lasso" => erm::build_lasso(data),
            "ridge" => erm::build_ridge(data),
            "erm_logistic" => erm::build_logistic(data),
            other => Err(Error::invalid(format!("unknown instance kind `{other}`"))),
        }
    }

    pub fn kind(&self) -> &str {
        &self.data.kind
    }

    /// Generator parameters (dimensions, noise levels, seed, declared constants).
    pub fn generator_config(&self) -> &[(String, String)] {
        &self.data.params
    }

    pub fn composite(&self) -> Option<&CompositeProblem> {
        match &self.problem {
            InstanceProblem::Composite(p) => Some(p),
            InstanceProblem::FiniteSum(_) => None,
        }
    }

    pub fn finite_sum(&self) -> Option<&Arc<dyn FiniteSumProblem>> {
        match &self.problem {
            InstanceProblem::FiniteSum(p) => Some(p),
            InstanceProblem::Composite(_) => None,
        }
    }

    pub fn dim(&self) -> usize {
        match &self.problem {
            InstanceProblem::Composite(p) => p.dim(),
            InstanceProblem::FiniteSum(p) => p.dim(),
        }
    }

    pub fn value(&self, x: &Vector) -> f64 {
        match &self.problem {
            InstanceProblem::Composite(p) => p.value(x),
            InstanceProblem::FiniteSum(p) => p.value(x),
        }
    }

    /// For composite instances, the declared weak convexity bound `L * beta`
    /// next to the curvature deficit measured on `trials` sampled pairs.
    pub fn weak_convexity_moduli(&self, trials: usize, seed: u64) -> Option<(f64, f64)> {
        let p = self.composite()?;
        let mut rng = RandomStream::new(seed, 0x77_63);
        let measured = crate::check::estimate_weak_convexity(&p.composed_part(), p.dim(), &mut rng, trials);
        Some((p.weak_convexity(), measured))
    }

    /// The stochastic view of a phase retrieval instance.
    pub fn stochastic_phase_retrieval(&self) -> Option<StochasticPhaseRetrieval> {
        if self.kind() == "phase_retrieval" {
            StochasticPhaseRetrieval::from_data(&self.data).ok()
        } else {
            None
        }
    }
}

/// Dense row-major matrix shared between oracles.
#[derive(Clone, Debug)]
pub(crate) struct RowMajor {
    pub rows: usize,
    pub cols: usize,
    pub data: Arc<Vec<f64>>,
}

impl RowMajor {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self {
            rows,
            cols,
            data: Arc::new(data),
        })
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        linalg::matvec(&self.data, self.rows, self.cols, x)
    }

    pub fn mul_t(&self, y: &[f64]) -> Vec<f64> {
        linalg::matvec_t(&self.data, self.rows, self.cols, y)
    }

    /// `scale * A^T A` as a dense symmetric matrix.
    pub fn gram(&self, scale: f64) -> DMatrix<f64> {
        let a = DMatrix::from_row_slice(self.rows, self.cols, &self.data);
        a.transpose() * a * scale
    }
}

pub(crate) fn largest_eigenvalue(sym: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(sym.clone())
        .eigenvalues
        .iter()
        .fold(f64::NEG_INFINITY, |m, &v| m.max(v))
}

/// Power iteration estimate of the top eigenvalue of a PSD operator.
pub(crate) fn power_iteration(
    apply: impl Fn(&Vector) -> Vector,
    dim: usize,
    iters: usize,
    rng: &mut RandomStream,
) -> f64 {
    let mut v = rng.unit_vector(dim);
    let mut lambda = 0.0;
    for _ in 0..iters {
        let w = apply(&v);
        lambda = v.dot(&w);
        let n = w.norm();
        if n == 0.0 {
            return 0.0;
        }
        v = w.scaled(1.0 / n);
    }
    lambda
}

pub(crate) fn check_positive(name: &str, v: usize) -> Result<()> {
    if v == 0 {
        Err(Error::invalid(format!("{name} must be at least 1")))
    } else {
        Ok(())
    }
}

pub(crate) fn check_fraction(name: &str, v: f64, closed_above: bool) -> Result<()> {
    let ok = v >= 0.0 && (v < 1.0 || (closed_above && v <= 1.0));
    if ok {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} = {v} is out of range")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_iteration_matches_exact_eigenvalue() {
        let a = RowMajor::new(3, 2, vec![1.0, 2.0, 0.0, 1.0, 3.0, -1.0]).unwrap();
        let exact = largest_eigenvalue(&a.gram(1.0));
        let mut rng = RandomStream::new(1, 0);
        let est = power_iteration(
            |v| Vector::from_raw(a.mul_t(&a.mul(v.as_slice()))),
            2,
            200,
            &mut rng,
        );
        assert!((est - exact).abs() < 1e-10 * exact);
    }

    #[test]
    fn every_kind_roundtrips_through_the_container() {
        let instances = vec![
            make_phase_retrieval(4, 12, 0.25, 3).unwrap(),
            make_robust_pca(4, 3, 2, 0.2, 3).unwrap(),
            make_z2_sync(6, 0.7, 0.1, 3).unwrap(),
            make_box_nls(3, 4, 3).unwrap(),
            make_lasso(5, 8, 0.1, 3).unwrap(),
            make_ridge(4, 10, 100.0, 3).unwrap(),
            make_erm_logistic(4, 10, 0.05, 3).unwrap(),
        ];
        assert_eq!(instances.len(), KINDS.len());
        for inst in instances {
            let bytes = inst.data.to_bytes();
            let back = SyntheticInstance::from_data(InstanceData::from_bytes(&bytes).unwrap()).unwrap();
            assert_eq!(back.data, inst.data, "{}", inst.kind());
            let mut rng = RandomStream::new(9, 0);
            let x = rng.normal_vector(inst.dim());
            let (a, b) = (inst.value(&x), back.value(&x));
            assert!(a.to_bits() == b.to_bits() || (a.is_infinite() && b.is_infinite()));
            assert_eq!(back.optimum_value, inst.optimum_value);
        }
    }

    #[test]
    fn generators_are_pure() {
        let a = make_phase_retrieval(5, 20, 0.1, 11).unwrap();
        let b = make_phase_retrieval(5, 20, 0.1, 11).unwrap();
        assert_eq!(a.data.to_bytes(), b.data.to_bytes());
        let c = make_phase_retrieval(5, 20, 0.1, 12).unwrap();
        assert_ne!(a.data.to_bytes(), c.data.to_bytes());
    }
}
