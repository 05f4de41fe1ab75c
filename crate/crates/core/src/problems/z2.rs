//! Censored Z2 synchronization `min_θ ||P_E(θ θ^T - M)||_1`.

use std::sync::Arc;

use super::{check_fraction, check_positive, InstanceData, InstanceProblem, SyntheticInstance};
use crate::composite::CompositeProblem;
use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::oracle::{SmoothMap, Zero, L1};
use crate::rng::RandomStream;

/// `c(θ)_e = θ_i θ_j - M_e` over the observed edges `e = (i, j)`, `i < j`.
#[derive(Clone, Debug)]
pub struct EdgeProducts {
    d: usize,
    edges: Arc<Vec<(usize, usize)>>,
    observed: Arc<Vec<f64>>,
}

impl EdgeProducts {
    pub fn new(d: usize, edges: Vec<(usize, usize)>, observed: Vec<f64>) -> Result<Self> {
        if edges.len() != observed.len() {
            return Err(Error::DimensionMismatch {
                expected: edges.len(),
                got: observed.len(),
            });
        }
        if let Some(&(i, j)) = edges.iter().find(|&&(i, j)| i >= j || j >= d) {
            return Err(Error::invalid(format!("edge ({i}, {j}) is not an upper-triangular pair in 0..{d}")));
        }
        Ok(Self {
            d,
            edges: Arc::new(edges),
            observed: Arc::new(observed),
        })
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }
}

impl SmoothMap for EdgeProducts {
    fn input_dim(&self) -> usize {
        self.d
    }

    fn output_dim(&self) -> usize {
        self.edges.len()
    }

    fn eval(&self, x: &Vector) -> Vector {
        Vector::from_raw(
            self.edges
                .iter()
                .zip(self.observed.iter())
                .map(|(&(i, j), m)| x[i] * x[j] - m)
                .collect(),
        )
    }

    fn jvp(&self, x: &Vector, v: &Vector) -> Vector {
        Vector::from_raw(self.edges.iter().map(|&(i, j)| x[i] * v[j] + v[i] * x[j]).collect())
    }

    fn vjp(&self, x: &Vector, u: &Vector) -> Vector {
        let mut out = vec![0.0; self.d];
        for (e, &(i, j)) in self.edges.iter().enumerate() {
            out[i] += u[e] * x[j];
            out[j] += u[e] * x[i];
        }
        Vector::from_raw(out)
    }

    /// `sum_e (Δ_i Δ_j)^2 <= ||Δ||^4 / 2`.
    fn beta(&self) -> f64 {
        std::f64::consts::SQRT_2
    }
}

/// Planted `θ̄ ∈ {±1}^d`, Erdős–Rényi edges with probability `edge_prob`, and
/// observations `θ̄_i θ̄_j` flipped independently with probability `flip_prob`.
pub fn make_z2_sync(d: usize, edge_prob: f64, flip_prob: f64, seed: u64) -> Result<SyntheticInstance> {
    check_positive("d", d)?;
    if !(edge_prob > 0.0 && edge_prob <= 1.0) {
        return Err(Error::invalid(format!("edge_prob = {edge_prob} is out of range")));
    }
    check_fraction("flip_prob", flip_prob, false)?;
    let root = RandomStream::new(seed, 0x7a32);
    let mut rng = root.fork(0);
    let theta: Vec<f64> = (0..d).map(|_| rng.sign()).collect();
    let mut graph = root.fork(1);
    let mut flips = root.fork(2);
    let (mut ei, mut ej, mut m) = (Vec::new(), Vec::new(), Vec::new());
    let mut n_flipped = 0usize;
    for i in 0..d {
        for j in i + 1..d {
            if !graph.bernoulli(edge_prob) {
                continue;
            }
            let mut value = theta[i] * theta[j];
            if flips.bernoulli(flip_prob) {
                value = -value;
                n_flipped += 1;
            }
            ei.push(i as f64);
            ej.push(j as f64);
            m.push(value);
        }
    }
    let mut data = InstanceData::new("z2_sync");
    data.param("d", d)
        .param_f64("edge_prob", edge_prob)
        .param_f64("flip_prob", flip_prob)
        .param("n_edges", m.len())
        .param("n_flipped", n_flipped)
        .param("seed", seed);
    data.array("edge_i", ei)
        .array("edge_j", ej)
        .array("M", m)
        .array("theta_bar", theta);
    build(data)
}

pub(super) fn build(data: InstanceData) -> Result<SyntheticInstance> {
    let (d, n) = (data.get_usize("d")?, data.get_usize("n_edges")?);
    let ei = data.get_array_len("edge_i", n)?;
    let ej = data.get_array_len("edge_j", n)?;
    let edges = ei.iter().zip(ej).map(|(&i, &j)| (i as usize, j as usize)).collect();
    let map = EdgeProducts::new(d, edges, data.get_array_len("M", n)?.to_vec())?;
    let theta = Vector::from_slice(data.get_array_len("theta_bar", d)?)?;
    let noiseless = data.get_usize("n_flipped")? == 0;
    let problem = CompositeProblem::new(Arc::new(Zero), Arc::new(L1::new(1.0, n)), Arc::new(map));
    Ok(SyntheticInstance {
        problem: InstanceProblem::Composite(problem),
        ground_truth: Some(theta),
        optimum_value: noiseless.then_some(0.0),
        data,
    })
}
