//! Random-space discretization.
//!
//! Sample sets carry collocation points, probability weights (the diagonal of
//! the random-space mass matrix) and the discrete expectation inner product.
//! Both tensor-product Gauss-Legendre collocation and Monte Carlo sampling
//! fit the same diagonal-mass formalism; Monte Carlo is simply collocation
//! with uniform weights `1/s`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Default cap on the total sample count accepted by the tensor rule.
pub const DEFAULT_SAMPLE_CAP: usize = 200_000;

/// How a sample set was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingKind {
    TensorCollocation,
    MonteCarlo,
}

/// Collocation points and weights in the random space.
///
/// Coordinates are `s x d`, one row per sample, each entry in `[-1, 1]`
/// (uniform variables). Weights are positive and sum to one.
#[derive(Debug, Clone)]
pub struct SampleSet {
    d: usize,
    xi: DMatrix<f64>,
    weights: DVector<f64>,
    kind: SamplingKind,
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` (weights sum to 2).
fn gauss_legendre_rule(q: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; q];
    let mut weights = vec![0.0; q];
    for i in 0..q.div_ceil(2) {
        // Chebyshev-based initial guess, then Newton on P_q.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (q as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=q {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = q as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[q - 1 - i] = x;
        weights[i] = w;
        weights[q - 1 - i] = w;
    }
    if q % 2 == 1 {
        nodes[q / 2] = 0.0;
    }
    (nodes, weights)
}

/// Tensor-product Gauss-Legendre collocation, `q` points per dimension.
///
/// Weights are products of the 1D weights folded with the uniform density
/// `1/2` per dimension, so they sum to one.
pub fn gauss_legendre_tensor(d: usize, q: usize, cap: usize) -> Result<SampleSet> {
    if d == 0 || q == 0 {
        return Err(Error::InvalidParameter(format!(
            "tensor rule needs d >= 1 and q >= 1, got d={d}, q={q}"
        )));
    }
    let s = q
        .checked_pow(d as u32)
        .filter(|&s| s <= cap)
        .ok_or(Error::BudgetExceeded {
            requested: q.pow(d as u32),
            cap,
        })?;
    let (nodes, w1) = gauss_legendre_rule(q);
    let mut xi = DMatrix::zeros(s, d);
    let mut weights = DVector::zeros(s);
    for j in 0..s {
        let mut rest = j;
        let mut w = 1.0;
        // first dimension varies slowest
        for k in (0..d).rev() {
            let idx = rest % q;
            rest /= q;
            xi[(j, k)] = nodes[idx];
            w *= 0.5 * w1[idx];
        }
        weights[j] = w;
    }
    Ok(SampleSet {
        d,
        xi,
        weights,
        kind: SamplingKind::TensorCollocation,
    })
}

/// Seeded i.i.d. uniform draws on `[-1, 1]^d` with equal weights `1/s`.
pub fn monte_carlo(d: usize, s: usize, seed: u64) -> Result<SampleSet> {
    if d == 0 || s < 2 {
        return Err(Error::InvalidParameter(format!(
            "monte carlo needs d >= 1 and s >= 2, got d={d}, s={s}"
        )));
    }
    let mut rng = SplitMix64::new(seed);
    let mut xi = DMatrix::zeros(s, d);
    for i in 0..s {
        for k in 0..d {
            xi[(i, k)] = rng.next_symmetric();
        }
    }
    let weights = DVector::from_element(s, 1.0 / s as f64);
    Ok(SampleSet {
        d,
        xi,
        weights,
        kind: SamplingKind::MonteCarlo,
    })
}

impl SampleSet {
    pub fn d(&self) -> usize {
        self.d
    }

    /// Sample count.
    pub fn s(&self) -> usize {
        self.xi.nrows()
    }

    /// Sample coordinates, `s x d`.
    pub fn xi(&self) -> &DMatrix<f64> {
        &self.xi
    }

    /// Coordinate `k` across all samples.
    pub fn xi_column(&self, k: usize) -> DVector<f64> {
        self.xi.column(k).into_owned()
    }

    /// Probability weights (diagonal of the random-space mass matrix).
    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn kind(&self) -> SamplingKind {
        self.kind
    }

    /// Discrete inner product `y' diag(w_xi) z`, i.e. the expectation `E[yz]`.
    pub fn inner_xi(&self, y: &DVector<f64>, z: &DVector<f64>) -> Result<f64> {
        let s = self.s();
        if y.len() != s || z.len() != s {
            return Err(Error::DimensionMismatch(format!(
                "inner_xi expects length {s}, got {} and {}",
                y.len(),
                z.len()
            )));
        }
        Ok(y.iter()
            .zip(z.iter())
            .zip(self.weights.iter())
            .map(|((a, b), w)| a * b * w)
            .sum())
    }

    /// Discrete expectation of a sampled random variable.
    pub fn mean(&self, y: &DVector<f64>) -> Result<f64> {
        self.inner_xi(y, &DVector::from_element(self.s(), 1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_rule() {
        let set = gauss_legendre_tensor(1, 2, DEFAULT_SAMPLE_CAP).unwrap();
        let r = 1.0 / 3.0_f64.sqrt();
        assert!((set.xi()[(0, 0)] + r).abs() < 1e-14);
        assert!((set.xi()[(1, 0)] - r).abs() < 1e-14);
        assert!((set.weights()[0] - 0.5).abs() < 1e-14);
        assert!((set.weights()[1] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn tensor_sample_counts_and_cap() {
        let set = gauss_legendre_tensor(4, 4, DEFAULT_SAMPLE_CAP).unwrap();
        assert_eq!(set.s(), 256);
        match gauss_legendre_tensor(4, 4, 100) {
            Err(Error::BudgetExceeded { requested, cap }) => {
                assert_eq!(requested, 256);
                assert_eq!(cap, 100);
            }
            other => panic!("expected budget error, got {other:?}"),
        }
    }

    #[test]
    fn probability_measure_and_moments() {
        for (d, q) in [(1, 2), (2, 3), (3, 4), (2, 5)] {
            let set = gauss_legendre_tensor(d, q, DEFAULT_SAMPLE_CAP).unwrap();
            let total: f64 = set.weights().iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
            for k in 0..d {
                let xi_k = set.xi_column(k);
                assert!(set.mean(&xi_k).unwrap().abs() < 1e-12);
                let second = set.inner_xi(&xi_k, &xi_k).unwrap();
                assert!((second - 1.0 / 3.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn moment_exactness_to_degree_2q_minus_1() {
        // E[xi^m] over U[-1,1] is 0 for odd m, 1/(m+1) for even m.
        for q in 1..=6usize {
            let set = gauss_legendre_tensor(1, q, DEFAULT_SAMPLE_CAP).unwrap();
            for m in 0..2 * q {
                let v: f64 = (0..q)
                    .map(|i| set.weights()[i] * set.xi()[(i, 0)].powi(m as i32))
                    .sum();
                let exact = if m % 2 == 1 {
                    0.0
                } else {
                    1.0 / (m as f64 + 1.0)
                };
                assert!((v - exact).abs() < 1e-12, "q={q} m={m}: {v} vs {exact}");
            }
        }
    }

    #[test]
    fn mixed_moment_is_product_of_1d_moments() {
        let set = gauss_legendre_tensor(2, 3, DEFAULT_SAMPLE_CAP).unwrap();
        let x1 = set.xi_column(0);
        let x2 = set.xi_column(1);
        let prod = DVector::from_iterator(set.s(), x1.iter().zip(x2.iter()).map(|(a, b)| a * b));
        let m = set.inner_xi(&prod, &prod).unwrap();
        assert!((m - 1.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn monte_carlo_is_deterministic() {
        let a = monte_carlo(1, 10, 7).unwrap();
        let b = monte_carlo(1, 10, 7).unwrap();
        assert_eq!(a.xi().as_slice(), b.xi().as_slice());
        assert!(a.weights().iter().all(|&w| (w - 0.1).abs() < 1e-16));
        let c = monte_carlo(1, 10, 8).unwrap();
        assert_ne!(a.xi().as_slice(), c.xi().as_slice());
    }

    #[test]
    fn monte_carlo_mean_within_clt_band() {
        let set = monte_carlo(1, 100_000, 2024).unwrap();
        let xi = set.xi_column(0);
        let mean = set.mean(&xi).unwrap();
        assert!(mean.abs() <= 0.02, "sample mean {mean}");
    }

    #[test]
    fn expectation_of_one_is_one() {
        let set = monte_carlo(3, 50, 1).unwrap();
        let ones = DVector::from_element(50, 1.0);
        assert!((set.inner_xi(&ones, &ones).unwrap() - 1.0).abs() < 1e-12);
        assert!(set.inner_xi(&ones, &DVector::zeros(49)).is_err());
    }
}
