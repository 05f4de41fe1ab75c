//! Robust PCA `min_{U,V} ||U V^T - M||_1`.

use std::sync::Arc;

use super::{check_fraction, check_positive, InstanceData, InstanceProblem, SyntheticInstance};
use crate::composite::CompositeProblem;
use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::oracle::{SmoothMap, Zero, L1};
use crate::rng::RandomStream;

/// `c(U, V) = U V^T - M` on the flattened variable `(U, V)`, with `U` an
/// `mrows x r` and `V` an `ncols x r` row-major block. Jacobian products are
/// matrix-free: `J(ΔU, ΔV) = ΔU V^T + U ΔV^T` and `J^T W = (W V, W^T U)`.
#[derive(Clone, Debug)]
pub struct FactorResidual {
    mrows: usize,
    ncols: usize,
    rank: usize,
    target: Arc<Vec<f64>>,
}

impl FactorResidual {
    pub fn new(mrows: usize, ncols: usize, rank: usize, target: Vec<f64>) -> Result<Self> {
        if target.len() != mrows * ncols {
            return Err(Error::DimensionMismatch {
                expected: mrows * ncols,
                got: target.len(),
            });
        }
        Ok(Self {
            mrows,
            ncols,
            rank,
            target: Arc::new(target),
        })
    }

    fn split<'a>(&self, x: &'a Vector) -> (&'a [f64], &'a [f64]) {
        x.as_slice().split_at(self.mrows * self.rank)
    }

    /// `P Q^T` for `P` (mrows x r) and `Q` (ncols x r).
    fn outer(&self, p: &[f64], q: &[f64]) -> Vec<f64> {
        let r = self.rank;
        let mut out = vec![0.0; self.mrows * self.ncols];
        for i in 0..self.mrows {
            let pi = &p[i * r..(i + 1) * r];
            for j in 0..self.ncols {
                out[i * self.ncols + j] = crate::linalg::dot(pi, &q[j * r..(j + 1) * r]);
            }
        }
        out
    }
}

impl SmoothMap for FactorResidual {
    fn input_dim(&self) -> usize {
        (self.mrows + self.ncols) * self.rank
    }

    fn output_dim(&self) -> usize {
        self.mrows * self.ncols
    }

    fn eval(&self, x: &Vector) -> Vector {
        let (u, v) = self.split(x);
        let mut out = self.outer(u, v);
        for (o, m) in out.iter_mut().zip(self.target.iter()) {
            *o -= m;
        }
        Vector::from_raw(out)
    }

    fn jvp(&self, x: &Vector, dx: &Vector) -> Vector {
        let (u, v) = self.split(x);
        let (du, dv) = self.split(dx);
        let a = self.outer(du, v);
        let b = self.outer(u, dv);
        Vector::from_raw(a.iter().zip(&b).map(|(p, q)| p + q).collect())
    }

    fn vjp(&self, x: &Vector, w: &Vector) -> Vector {
        let (u, v) = self.split(x);
        let (r, n) = (self.rank, self.ncols);
        let mut gu = vec![0.0; self.mrows * r];
        let mut gv = vec![0.0; self.ncols * r];
        for i in 0..self.mrows {
            for j in 0..n {
                let wij = w[i * n + j];
                if wij == 0.0 {
                    continue;
                }
                for k in 0..r {
                    gu[i * r + k] += wij * v[j * r + k];
                    gv[j * r + k] += wij * u[i * r + k];
                }
            }
        }
        gu.extend_from_slice(&gv);
        Vector::from_raw(gu)
    }

    /// The linearization error `ΔU ΔV^T` has Frobenius norm at most
    /// `(||ΔU||^2 + ||ΔV||^2) / 2`.
    fn beta(&self) -> f64 {
        1.0
    }
}

/// Planted `M = Ū V̄^T + S` with Gaussian factors and `S` supported on a
/// `sparsity` fraction of entries with values uniform in `±[1, 3]`.
///
/// `h = ||.||_1` on `mrows * ncols` entries, so `L = sqrt(mrows * ncols)`.
pub fn make_robust_pca(mrows: usize, ncols: usize, r: usize, sparsity: f64, seed: u64) -> Result<SyntheticInstance> {
    check_positive("mrows", mrows)?;
    check_positive("ncols", ncols)?;
    check_positive("r", r)?;
    if r > mrows.min(ncols) {
        return Err(Error::invalid(format!("rank {r} exceeds min({mrows}, {ncols})")));
    }
    check_fraction("sparsity", sparsity, true)?;
    let root = RandomStream::new(seed, 0x7270_6361);
    let mut rng = root.fork(0);
    let u: Vec<f64> = (0..mrows * r).map(|_| rng.normal()).collect();
    let v: Vec<f64> = (0..ncols * r).map(|_| rng.normal()).collect();
    let clean = FactorResidual::new(mrows, ncols, r, vec![0.0; mrows * ncols])?;
    let mut m = clean.outer(&u, &v);

    let mut noise = root.fork(1);
    let n_corrupt = (sparsity * (mrows * ncols) as f64).round() as usize;
    let perm = noise.permutation(mrows * ncols);
    let mut s = vec![0.0; mrows * ncols];
    for &k in &perm[..n_corrupt] {
        s[k] = noise.sign() * noise.uniform_in(1.0, 3.0);
        m[k] += s[k];
    }

    let mut data = InstanceData::new("robust_pca");
    data.param("mrows", mrows)
        .param("ncols", ncols)
        .param("r", r)
        .param_f64("sparsity", sparsity)
        .param("n_corrupt", n_corrupt)
        .param("seed", seed);
    data.array("M", m).array("U_bar", u).array("V_bar", v).array("S", s);
    build(data)
}

pub(super) fn build(data: InstanceData) -> Result<SyntheticInstance> {
    let (mr, nc, r) = (data.get_usize("mrows")?, data.get_usize("ncols")?, data.get_usize("r")?);
    let map = FactorResidual::new(mr, nc, r, data.get_array_len("M", mr * nc)?.to_vec())?;
    let truth = Vector::from_slice(data.get_array_len("U_bar", mr * r)?)?
        .concat(&Vector::from_slice(data.get_array_len("V_bar", nc * r)?)?);
    let noiseless = data.get_usize("n_corrupt")? == 0;
    let problem = CompositeProblem::new(Arc::new(Zero), Arc::new(L1::new(1.0, mr * nc)), Arc::new(map));
    Ok(SyntheticInstance {
        problem: InstanceProblem::Composite(problem),
        ground_truth: Some(truth),
        optimum_value: noiseless.then_some(0.0),
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::check::{adjoint_mismatch, check_weak_convexity, finite_difference_jvp};

    #[test]
    fn planted_factors_are_optimal_up_to_scaling() {
        let inst = make_robust_pca(5, 4, 2, 0.0, 1).unwrap();
        let x = inst.ground_truth.clone().unwrap();
        assert_eq!(inst.optimum_value, Some(0.0));
        assert!(inst.value(&x) < 1e-12);
        let split = 5 * 2;
        for alpha in [2.0, -0.5, 3.0] {
            let y = Vector::from_fn(x.dim(), |i| if i < split { x[i] * alpha } else { x[i] / alpha });
            assert!(inst.value(&y) < 1e-12, "alpha = {alpha}");
        }
    }

    #[test]
    fn sparse_corruption_costs_its_l1_norm_at_truth() {
        let inst = make_robust_pca(6, 5, 2, 0.2, 2).unwrap();
        let s: f64 = inst.data.get_array("S").unwrap().iter().map(|v| v.abs()).sum();
        let v = inst.value(inst.ground_truth.as_ref().unwrap());
        assert!((v - s).abs() < 1e-10 * s, "{v} vs {s}");
    }

    #[test]
    fn jvp_matches_formula_and_finite_differences() {
        let inst = make_robust_pca(4, 3, 2, 0.1, 3).unwrap();
        let c = inst.composite().unwrap().c.clone();
        let mut rng = RandomStream::new(3, 0);
        assert!(adjoint_mismatch(c.as_ref(), &mut rng, 100) <= 1e-10);
        for _ in 0..10 {
            let x = rng.normal_vector(c.input_dim());
            let v = rng.normal_vector(c.input_dim());
            let fd = finite_difference_jvp(c.as_ref(), &x, &v, 1e-5);
            let jv = c.jvp(&x, &v);
            assert!(fd.dist(&jv) <= 1e-5 * (1.0 + jv.norm()));
        }
    }

    #[test]
    fn declared_modulus_passes_weak_convexity_check() {
        let inst = make_robust_pca(3, 3, 1, 0.2, 4).unwrap();
        let p = inst.composite().unwrap();
        let mut rng = RandomStream::new(4, 4);
        let report = check_weak_convexity(&p.composed_part(), p.dim(), p.weak_convexity(), &mut rng, 10_000);
        assert_eq!(report.violations, 0, "{report:?}");
    }
}
