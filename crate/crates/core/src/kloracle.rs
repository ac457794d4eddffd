//! Instantaneous Karhunen-Loeve snapshots of full-order fields.
//!
//! The discrete KL decomposition of a sample matrix is its SVD under the
//! quadrature inner products: scale rows by `sqrt(w_x)` and columns by
//! `sqrt(w_xi)`, take the thin SVD, and map the factors back. It is the
//! mean-square-optimal rank-r representation and serves as the baseline the
//! low-rank integrators are compared against. Energetic ranking rotates
//! low-rank factors in-subspace so their modes are ordered by singular value
//! like the KL modes.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::stochastic::SampleSet;

/// Singular values below this floor are reported as zero; comparisons that
/// far down are roundoff-dominated.
pub const SINGULAR_VALUE_FLOOR: f64 = 1e-14;

/// A rank-r KL snapshot: `V ~ U diag(sigma) Y'` with weighted-orthonormal
/// factors.
#[derive(Debug, Clone)]
pub struct KlSnapshot {
    /// Spatial modes, `n x r`, orthonormal under `diag(w_x)`.
    pub u: DMatrix<f64>,
    /// Singular values, descending.
    pub sigma: DVector<f64>,
    /// Stochastic modes, `s x r`, orthonormal under `diag(w_xi)`.
    pub y: DMatrix<f64>,
    /// Time stamp of the snapshot.
    pub t: f64,
}

impl KlSnapshot {
    /// `U diag(sigma) Y'`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let r = self.sigma.len();
        let mut scaled = self.u.clone();
        for k in 0..r {
            scaled.column_mut(k).scale_mut(self.sigma[k]);
        }
        scaled * self.y.transpose()
    }
}

/// Deterministic column signs: the entry of largest magnitude in each `u`
/// column is made positive, flipping the paired `y` column to compensate.
fn canonicalize_signs(u: &mut DMatrix<f64>, y: &mut DMatrix<f64>) {
    for k in 0..u.ncols() {
        let col = u.column(k);
        let mut flip = 1.0;
        let mut best = 0.0;
        for v in col.iter() {
            if v.abs() > best {
                best = v.abs();
                flip = v.signum();
            }
        }
        if flip < 0.0 {
            u.column_mut(k).neg_mut();
            y.column_mut(k).neg_mut();
        }
    }
}

/// One-sided Jacobi SVD of `a` (`m x k`, `m >= k`): returns `(U, sigma, V)`
/// with `a = U diag(sigma) V'`, `sigma` descending.
///
/// Jacobi iterates column rotations until all column pairs are orthogonal,
/// which reaches machine-accurate factors even for rank-deficient or
/// badly scaled matrices.
fn jacobi_svd_tall(mut a: DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    let k = a.ncols();
    debug_assert!(a.nrows() >= k);
    let mut v = DMatrix::identity(k, k);
    let tol = 1e-15;
    for _sweep in 0..60 {
        let mut rotated = false;
        for i in 0..k {
            for j in i + 1..k {
                let ci = a.column(i);
                let cj = a.column(j);
                let alpha = ci.dot(&ci);
                let beta = cj.dot(&cj);
                let gamma = ci.dot(&cj);
                if gamma.abs() <= tol * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for row in 0..a.nrows() {
                    let ai = a[(row, i)];
                    let aj = a[(row, j)];
                    a[(row, i)] = c * ai - s * aj;
                    a[(row, j)] = s * ai + c * aj;
                }
                for row in 0..k {
                    let vi = v[(row, i)];
                    let vj = v[(row, j)];
                    v[(row, i)] = c * vi - s * vj;
                    v[(row, j)] = s * vi + c * vj;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<usize> = (0..k).collect();
    let norms: Vec<f64> = (0..k).map(|j| a.column(j).norm()).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap());
    let mut u = DMatrix::zeros(a.nrows(), k);
    let mut sigma = DVector::zeros(k);
    let mut vs = DMatrix::zeros(k, k);
    let scale = norms[order[0]].max(f64::MIN_POSITIVE);
    for (dst, &src) in order.iter().enumerate() {
        sigma[dst] = norms[src];
        vs.column_mut(dst).copy_from(&v.column(src));
        if norms[src] > scale * 1e-300 && norms[src] > 0.0 {
            let col = a.column(src) / norms[src];
            u.column_mut(dst).copy_from(&col);
        }
    }
    // orthonormal completion for exactly null columns
    for dst in 0..k {
        if sigma[dst] > 0.0 {
            continue;
        }
        for candidate in 0..u.nrows() {
            let mut e = DVector::zeros(u.nrows());
            e[candidate] = 1.0;
            for _ in 0..2 {
                for other in 0..k {
                    if other == dst {
                        continue;
                    }
                    let proj = u.column(other).dot(&e);
                    e -= proj * u.column(other).into_owned();
                }
            }
            let norm = e.norm();
            if norm > 0.5 {
                u.column_mut(dst).copy_from(&(e / norm));
                break;
            }
        }
    }
    (u, sigma, vs)
}

/// Thin SVD with singular values sorted descending. The factorization runs
/// on the thin side of the matrix.
fn sorted_thin_svd(a: DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    if a.nrows() >= a.ncols() {
        jacobi_svd_tall(a)
    } else {
        let (p, sigma, q) = jacobi_svd_tall(a.transpose());
        (q, sigma, p)
    }
}

/// Rank-r KL decomposition of a field under the grid/sample inner products.
pub fn weighted_svd(
    v: &DMatrix<f64>,
    grid: &Grid,
    samples: &SampleSet,
    r: usize,
    t: f64,
) -> Result<KlSnapshot> {
    let n = grid.n();
    let s = samples.s();
    if v.nrows() != n || v.ncols() != s {
        return Err(Error::DimensionMismatch(format!(
            "field is {} x {}, expected {n} x {s}",
            v.nrows(),
            v.ncols()
        )));
    }
    if r == 0 || r > n.min(s) {
        return Err(Error::DimensionMismatch(format!(
            "rank {r} must be in 1..={}",
            n.min(s)
        )));
    }
    let sqrt_wx = grid.weights().map(f64::sqrt);
    let sqrt_wxi = samples.weights().map(f64::sqrt);
    let mut a = v.clone();
    for i in 0..n {
        for j in 0..s {
            a[(i, j)] *= sqrt_wx[i] * sqrt_wxi[j];
        }
    }
    let (p, sv, q) = sorted_thin_svd(a);
    let mut u = DMatrix::zeros(n, r);
    let mut y = DMatrix::zeros(s, r);
    let mut sigma = DVector::zeros(r);
    for k in 0..r {
        sigma[k] = if sv[k] < SINGULAR_VALUE_FLOOR {
            0.0
        } else {
            sv[k]
        };
        for i in 0..n {
            u[(i, k)] = p[(i, k)] / sqrt_wx[i];
        }
        for j in 0..s {
            y[(j, k)] = q[(j, k)] / sqrt_wxi[j];
        }
    }
    canonicalize_signs(&mut u, &mut y);
    Ok(KlSnapshot { u, sigma, y, t })
}

/// Orthonormalize `m` under `diag(w)`: returns `(Q, R)` with
/// `Q' diag(w) Q = I`, `Q R = m`, and `diag(R) >= 0`.
pub fn weighted_qr(m: &DMatrix<f64>, w: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let sqrt_w = w.map(f64::sqrt);
    let mut a = m.clone();
    for i in 0..m.nrows() {
        for k in 0..m.ncols() {
            a[(i, k)] *= sqrt_w[i];
        }
    }
    let qr = a.qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for k in 0..r.nrows() {
        if r[(k, k)] < 0.0 {
            q.column_mut(k).neg_mut();
            r.row_mut(k).neg_mut();
        }
    }
    for i in 0..q.nrows() {
        for k in 0..q.ncols() {
            q[(i, k)] /= sqrt_w[i];
        }
    }
    (q, r)
}

/// Energetic ranking of DBO factors `(U, S, Y)`: SVD the small correlation
/// factor and rotate both mode sets in-subspace.
pub fn energetic_rank_factors(
    u: &DMatrix<f64>,
    s_factor: &DMatrix<f64>,
    y: &DMatrix<f64>,
    t: f64,
) -> Result<KlSnapshot> {
    if !s_factor.iter().all(|x| x.is_finite()) {
        return Err(Error::NumericalBlowup {
            t,
            context: "correlation factor is not finite".into(),
        });
    }
    let (mut p, sv, mut q) = sorted_thin_svd(s_factor.clone());
    // canonical rotation: dominant entry of each left vector positive, so a
    // diagonal descending factor maps to the identity rotation
    for k in 0..p.ncols() {
        let col = p.column(k);
        let mut flip = 1.0;
        let mut best = 0.0;
        for v in col.iter() {
            if v.abs() > best {
                best = v.abs();
                flip = v.signum();
            }
        }
        if flip < 0.0 {
            p.column_mut(k).neg_mut();
            q.column_mut(k).neg_mut();
        }
    }
    Ok(KlSnapshot {
        u: u * &p,
        sigma: sv,
        y: y * &q,
        t,
    })
}

/// Energetic ranking of DO factors `(U, Y)`: eigendecompose the stochastic
/// covariance `C = Y' diag(w_xi) Y` and rotate.
pub fn energetic_rank_covariance(
    u: &DMatrix<f64>,
    y: &DMatrix<f64>,
    samples: &SampleSet,
    t: f64,
) -> Result<KlSnapshot> {
    if !y.iter().all(|x| x.is_finite()) || !u.iter().all(|x| x.is_finite()) {
        return Err(Error::NumericalBlowup {
            t,
            context: "factors are not finite".into(),
        });
    }
    let r = y.ncols();
    let mut wy = y.clone();
    for j in 0..y.nrows() {
        let w = samples.weights()[j];
        for k in 0..r {
            wy[(j, k)] *= w;
        }
    }
    let c = y.transpose() * wy;
    let c = (&c + c.transpose()) * 0.5;
    let eig = c.symmetric_eigen();
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap());
    let mut q = DMatrix::zeros(r, r);
    let mut sigma = DVector::zeros(r);
    for (dst, &src) in order.iter().enumerate() {
        q.column_mut(dst).copy_from(&eig.eigenvectors.column(src));
        sigma[dst] = eig.eigenvalues[src].max(0.0).sqrt();
    }
    let u_rot = u * &q;
    let mut y_rot = y * &q;
    for k in 0..r {
        if sigma[k] > SINGULAR_VALUE_FLOOR {
            y_rot.column_mut(k).scale_mut(1.0 / sigma[k]);
        }
    }
    Ok(KlSnapshot {
        u: u_rot,
        sigma,
        y: y_rot,
        t,
    })
}

/// Sign-aligned copy of `test` against `reference` under a weighted inner
/// product.
#[derive(Debug, Clone)]
pub struct AlignedModes {
    pub modes: DMatrix<f64>,
    /// Columns whose overlap with the reference was below the ambiguity
    /// threshold (modes may have crossed).
    pub ambiguous: Vec<usize>,
}

/// Flip each test column so its weighted overlap with the matching reference
/// column is nonnegative. Near-zero overlaps are flagged, not errors.
pub fn align_modes(
    test: &DMatrix<f64>,
    reference: &DMatrix<f64>,
    weights: &DVector<f64>,
) -> Result<AlignedModes> {
    if test.nrows() != reference.nrows()
        || test.ncols() != reference.ncols()
        || weights.len() != test.nrows()
    {
        return Err(Error::DimensionMismatch(format!(
            "align_modes: test {}x{}, reference {}x{}, weights {}",
            test.nrows(),
            test.ncols(),
            reference.nrows(),
            reference.ncols(),
            weights.len()
        )));
    }
    let mut out = test.clone();
    let mut ambiguous = Vec::new();
    for k in 0..test.ncols() {
        let overlap: f64 = (0..test.nrows())
            .map(|i| test[(i, k)] * weights[i] * reference[(i, k)])
            .sum();
        if overlap.abs() < 1e-8 {
            ambiguous.push(k);
        }
        if overlap < 0.0 {
            out.column_mut(k).neg_mut();
        }
    }
    Ok(AlignedModes {
        modes: out,
        ambiguous,
    })
}
