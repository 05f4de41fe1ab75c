//! Robust phase retrieval `min_x (1/m) sum_i |<a_i, x>^2 - b_i^2|`.

use std::sync::Arc;

use super::{check_fraction, check_positive, power_iteration, InstanceData, InstanceProblem, RowMajor, SyntheticInstance};
use crate::composite::CompositeProblem;
use crate::error::Result;
use crate::linalg::{dot, Vector};
use crate::moreau::ProxFunction;
use crate::oracle::{SmoothMap, Zero, L1};
use crate::pgsg::StochasticProblem;
use crate::rng::RandomStream;

/// Safety factor on the power-iteration estimate of the curvature.
const BETA_SAFETY: f64 = 1.1;
/// Scale of the folded Gaussian that replaces corrupted measurements.
const OUTLIER_SCALE: f64 = 3.0;

/// `c(x)_i = <a_i, x>^2 - b_i^2`.
#[derive(Clone, Debug)]
pub struct PhaseRetrievalMap {
    a: RowMajor,
    b2: Vec<f64>,
    beta: f64,
}

impl SmoothMap for PhaseRetrievalMap {
    fn input_dim(&self) -> usize {
        self.a.cols
    }

    fn output_dim(&self) -> usize {
        self.a.rows
    }

    fn eval(&self, x: &Vector) -> Vector {
        let ax = self.a.mul(x.as_slice());
        Vector::from_fn(self.a.rows, |i| ax[i] * ax[i] - self.b2[i])
    }

    fn jvp(&self, x: &Vector, v: &Vector) -> Vector {
        let ax = self.a.mul(x.as_slice());
        let av = self.a.mul(v.as_slice());
        Vector::from_fn(self.a.rows, |i| 2.0 * ax[i] * av[i])
    }

    fn vjp(&self, x: &Vector, u: &Vector) -> Vector {
        let ax = self.a.mul(x.as_slice());
        let w: Vec<f64> = ax.iter().zip(u.iter()).map(|(p, q)| 2.0 * p * q).collect();
        Vector::from_raw(self.a.mul_t(&w))
    }

    /// Declared so that `L * beta` with `L = 1` bounds the linearization
    /// error of the ℓ1-mean: `2 * 1.1 * lambda_max(A^T A / m)`.
    fn beta(&self) -> f64 {
        self.beta
    }
}

/// Planted unit vector `x̄`, Gaussian measurements `a_i`, `b_i = |<a_i, x̄>|`,
/// and a fraction `outlier_frac` of the `b_i` replaced by `3 |N(0, 1)|`.
///
/// The composite form is `g = 0`, `h = (1/m) ||.||_1` with declared `L = 1`
/// and `c` from [`PhaseRetrievalMap`].
pub fn make_phase_retrieval(d: usize, m: usize, outlier_frac: f64, seed: u64) -> Result<SyntheticInstance> {
    check_positive("d", d)?;
    check_positive("m", m)?;
    check_fraction("outlier_frac", outlier_frac, false)?;
    let root = RandomStream::new(seed, 0x7068_6173_65);
    let mut rng = root.fork(0);
    let x_bar = rng.unit_vector(d);
    let a: Vec<f64> = (0..m * d).map(|_| rng.normal()).collect();
    let mut b: Vec<f64> = (0..m).map(|i| dot(&a[i * d..(i + 1) * d], x_bar.as_slice()).abs()).collect();

    let mut corrupt = root.fork(1);
    let n_out = (outlier_frac * m as f64).round() as usize;
    let perm = corrupt.permutation(m);
    for &i in &perm[..n_out] {
        b[i] = OUTLIER_SCALE * corrupt.normal().abs();
    }

    let rows = RowMajor::new(m, d, a)?;
    let mut power = root.fork(2);
    let lambda = power_iteration(
        |v| Vector::from_raw(rows.mul_t(&rows.mul(v.as_slice()))).scaled(1.0 / m as f64),
        d,
        200,
        &mut power,
    );
    let beta = 2.0 * BETA_SAFETY * lambda;

    let mut data = InstanceData::new("phase_retrieval");
    data.param("d", d)
        .param("m", m)
        .param_f64("outlier_frac", outlier_frac)
        .param("n_outliers", n_out)
        .param("seed", seed)
        .param_f64("lip", 1.0)
        .param_f64("beta", beta);
    data.array("a", rows.data.to_vec())
        .array("b", b)
        .array("x_bar", x_bar.into_vec());
    build(data)
}

pub(super) fn build(data: InstanceData) -> Result<SyntheticInstance> {
    let (d, m) = (data.get_usize("d")?, data.get_usize("m")?);
    let map = map_from(&data)?;
    let x_bar = Vector::from_slice(data.get_array_len("x_bar", d)?)?;
    let noiseless = data.get_usize("n_outliers")? == 0;
    let problem = CompositeProblem::new(
        Arc::new(Zero),
        Arc::new(L1::with_lip(1.0 / m as f64, data.get_f64("lip")?)),
        Arc::new(map),
    );
    Ok(SyntheticInstance {
        problem: InstanceProblem::Composite(problem),
        ground_truth: Some(x_bar),
        optimum_value: noiseless.then_some(0.0),
        data,
    })
}

fn map_from(data: &InstanceData) -> Result<PhaseRetrievalMap> {
    let (d, m) = (data.get_usize("d")?, data.get_usize("m")?);
    let a = RowMajor::new(m, d, data.get_array_len("a", m * d)?.to_vec())?;
    let b2 = data.get_array_len("b", m)?.iter().map(|b| b * b).collect();
    Ok(PhaseRetrievalMap {
        a,
        b2,
        beta: data.get_f64("beta")?,
    })
}

/// `f(x, i) = |<a_i, x>^2 - b_i^2|` with `i` uniform on the measurements.
///
/// Each `f(., i)` is `2 ||a_i||^2`-weakly convex; `rho` is the maximum over
/// `i`. The Lipschitz constant is reported on the ball of radius 2.
#[derive(Clone)]
pub struct StochasticPhaseRetrieval {
    map: PhaseRetrievalMap,
    rho: f64,
    lip: f64,
    full: CompositeProblem,
}

impl StochasticPhaseRetrieval {
    pub fn from_data(data: &InstanceData) -> Result<Self> {
        let map = map_from(data)?;
        let max_sq = (0..map.a.rows)
            .map(|i| dot(map.a.row(i), map.a.row(i)))
            .fold(0.0, f64::max);
        let full = match build(data.clone())?.problem {
            InstanceProblem::Composite(p) => p,
            InstanceProblem::FiniteSum(_) => unreachable!("phase retrieval is composite"),
        };
        Ok(Self {
            map,
            rho: 2.0 * max_sq,
            lip: 4.0 * max_sq,
            full,
        })
    }

    pub fn composite(&self) -> &CompositeProblem {
        &self.full
    }

    fn residual(&self, x: &Vector, i: usize) -> (f64, f64) {
        let ax = dot(self.map.a.row(i), x.as_slice());
        (ax, ax * ax - self.map.b2[i])
    }
}

impl StochasticProblem for StochasticPhaseRetrieval {
    type Sample = usize;

    fn dim(&self) -> usize {
        self.map.a.cols
    }

    fn sample(&self, rng: &mut RandomStream) -> usize {
        rng.below(self.map.a.rows)
    }

    fn stoch_value(&self, x: &Vector, i: &usize) -> f64 {
        self.residual(x, *i).1.abs()
    }

    fn stoch_subgrad(&self, x: &Vector, i: &usize) -> Vector {
        let (ax, r) = self.residual(x, *i);
        let s = if r > 0.0 {
            1.0
        } else if r < 0.0 {
            -1.0
        } else {
            0.0
        };
        let mut g = Vector::zeros(self.dim());
        g.axpy_slice(2.0 * s * ax, self.map.a.row(*i));
        g
    }

    fn rho(&self) -> f64 {
        self.rho
    }

    fn lip(&self) -> f64 {
        self.lip
    }

    fn full_objective(&self) -> Option<&dyn ProxFunction> {
        Some(&self.full)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::check::{adjoint_mismatch, check_weak_convexity, finite_difference_gradient, finite_difference_jvp};
    use crate::oracle::{FnSubgradient, SubgradientOracle};

    #[test]
    fn noiseless_truth_is_optimal_and_sign_invariant() {
        let inst = make_phase_retrieval(6, 30, 0.0, 1).unwrap();
        let x = inst.ground_truth.clone().unwrap();
        assert_eq!(inst.optimum_value, Some(0.0));
        assert_eq!(inst.value(&x), 0.0);
        let y = RandomStream::new(5, 5).normal_vector(6);
        assert_eq!(inst.value(&y), inst.value(&(-&y)));
        assert_eq!(inst.value(&(-&x)), 0.0);
    }

    #[test]
    fn outliers_are_counted() {
        let inst = make_phase_retrieval(5, 40, 0.1, 2).unwrap();
        assert_eq!(inst.data.get_usize("n_outliers").unwrap(), 4);
        assert_eq!(inst.optimum_value, None);
        assert!(inst.value(inst.ground_truth.as_ref().unwrap()) > 0.0);
    }

    #[test]
    fn subgradient_matches_finite_differences() {
        let inst = make_phase_retrieval(3, 6, 0.0, 7).unwrap();
        let p = inst.composite().unwrap();
        let loss = p.composed_part();
        let mut rng = RandomStream::new(7, 1);
        let mut checked = 0;
        while checked < 20 {
            let x = rng.normal_vector(3);
            // Resample near kinks.
            if p.c.eval(&x).iter().any(|r| r.abs() < 1e-6) {
                continue;
            }
            let fd = finite_difference_gradient(|y| p.value(y), &x, 1e-6).unwrap();
            let g = loss.subgrad(&x);
            assert!(fd.dist(&g) <= 1e-4 * (1.0 + g.norm()), "{fd:?} vs {g:?}");
            checked += 1;
        }
    }

    #[test]
    fn jacobian_products_are_consistent() {
        let inst = make_phase_retrieval(5, 15, 0.2, 3).unwrap();
        let p = inst.composite().unwrap();
        let mut rng = RandomStream::new(3, 3);
        assert!(adjoint_mismatch(p.c.as_ref(), &mut rng, 100) <= 1e-10);
        let x = rng.normal_vector(5);
        let v = rng.normal_vector(5);
        let fd = finite_difference_jvp(p.c.as_ref(), &x, &v, 1e-6);
        let jv = p.c.jvp(&x, &v);
        assert!(fd.dist(&jv) <= 1e-5 * (1.0 + jv.norm()));
    }

    #[test]
    fn declared_modulus_passes_weak_convexity_check() {
        let inst = make_phase_retrieval(4, 20, 0.1, 4).unwrap();
        let p = inst.composite().unwrap();
        let mut rng = RandomStream::new(4, 4);
        let report = check_weak_convexity(&p.composed_part(), 4, p.weak_convexity(), &mut rng, 10_000);
        assert_eq!(report.violations, 0, "{report:?}");
    }

    #[test]
    fn measured_modulus_stays_below_declared() {
        let inst = make_phase_retrieval(5, 40, 0.1, 6).unwrap();
        let (declared, measured) = inst.weak_convexity_moduli(2_000, 6).unwrap();
        assert!(measured > 0.0 && measured <= declared, "{measured} vs {declared}");
    }

    #[test]
    fn stochastic_components_are_weakly_convex() {
        let inst = make_phase_retrieval(4, 10, 0.2, 5).unwrap();
        let sp = inst.stochastic_phase_retrieval().unwrap();
        let sp = Arc::new(sp);
        for i in 0..10 {
            let (s1, s2) = (sp.clone(), sp.clone());
            let f = FnSubgradient::new(
                move |x: &Vector| s1.stoch_value(x, &i),
                move |x: &Vector| s2.stoch_subgrad(x, &i),
                sp.rho(),
                sp.lip(),
            );
            let mut rng = RandomStream::new(5, i as u64);
            let report = check_weak_convexity(&f, 4, f.rho(), &mut rng, 2_000);
            assert_eq!(report.violations, 0, "component {i}: {report:?}");
        }
        // The full objective is the mean of the components.
        let x = RandomStream::new(1, 1).normal_vector(4);
        let mean = (0..10).map(|i| sp.stoch_value(&x, &i)).sum::<f64>() / 10.0;
        assert!((mean - inst.value(&x)).abs() < 1e-12 * (1.0 + mean));
    }

    #[test]
    fn model_error_is_two_sided() {
        use crate::proxlinear::model_value;
        let inst = make_phase_retrieval(5, 30, 0.1, 6).unwrap();
        let p = inst.composite().unwrap();
        let mut rng = RandomStream::new(6, 0);
        for _ in 0..1000 {
            let y = rng.normal_vector(5);
            let x = Vector::lincomb(1.0, &y, rng.uniform(), &rng.normal_vector(5));
            let gap = (p.value(&x) - model_value(p, &y, &x)).abs();
            let bound = 0.5 * p.weak_convexity() * x.dist(&y).powi(2);
            assert!(gap <= bound * (1.0 + 1e-12) + 1e-12);
        }
    }
}
