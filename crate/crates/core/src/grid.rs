//! Spatial collocation grids.
//!
//! Uniform finite-difference collocation on an interval or a tensor-product
//! rectangle: quadrature weights (trapezoid rule, the diagonal of the spatial
//! mass matrix), second-order derivative operators with one-sided boundary
//! stencils, and the boundary/interior index split used by the full-order
//! model assembly.

use nalgebra::{DMatrix, DMatrixView, DVector, Dyn};

use crate::error::{Error, Result};

/// Minimum points per direction for a solver-grade grid.
const MIN_POINTS: usize = 8;

/// One face of the domain. 1D grids use `X1Lo` / `X1Hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Face {
    X1Lo,
    X1Hi,
    X2Lo,
    X2Hi,
}

impl Face {
    /// Axis the face is orthogonal to.
    pub fn axis(self) -> usize {
        match self {
            Face::X1Lo | Face::X1Hi => 0,
            Face::X2Lo | Face::X2Hi => 1,
        }
    }

    /// Outward-normal sign along [`Face::axis`].
    pub fn normal_sign(self) -> f64 {
        match self {
            Face::X1Lo | Face::X2Lo => -1.0,
            Face::X1Hi | Face::X2Hi => 1.0,
        }
    }
}

/// Outward normal attached to a boundary point.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryNormal {
    pub axis: usize,
    pub sign: f64,
}

/// Uniform collocation grid in one or two dimensions.
///
/// 2D grids flatten point `(i1, i2)` to index `i1 * n2 + i2` (the second
/// coordinate varies fastest). Derivative operators are stored per direction
/// and applied through the tensor structure, never as an `n x n` matrix.
#[derive(Debug, Clone)]
pub struct Grid {
    dims: usize,
    shape: [usize; 2],
    bounds: [[f64; 2]; 2],
    coords: Vec<[f64; 2]>,
    weights: DVector<f64>,
    d1: Vec<DMatrix<f64>>,
    d2: Vec<DMatrix<f64>>,
    boundary_idx: Vec<usize>,
    interior_idx: Vec<usize>,
    normals: Vec<BoundaryNormal>,
}

/// Second-order first-derivative operator on a uniform 1D grid: central in
/// the interior, 3-point one-sided at the ends.
fn d1_matrix(n: usize, h: f64) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(n, n);
    let inv2h = 1.0 / (2.0 * h);
    d[(0, 0)] = -3.0 * inv2h;
    d[(0, 1)] = 4.0 * inv2h;
    d[(0, 2)] = -inv2h;
    for i in 1..n - 1 {
        d[(i, i - 1)] = -inv2h;
        d[(i, i + 1)] = inv2h;
    }
    d[(n - 1, n - 1)] = 3.0 * inv2h;
    d[(n - 1, n - 2)] = -4.0 * inv2h;
    d[(n - 1, n - 3)] = inv2h;
    d
}

/// Second-order second-derivative operator: central interior, 4-point
/// one-sided rows at the ends.
fn d2_matrix(n: usize, h: f64) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(n, n);
    let invh2 = 1.0 / (h * h);
    d[(0, 0)] = 2.0 * invh2;
    d[(0, 1)] = -5.0 * invh2;
    d[(0, 2)] = 4.0 * invh2;
    d[(0, 3)] = -invh2;
    for i in 1..n - 1 {
        d[(i, i - 1)] = invh2;
        d[(i, i)] = -2.0 * invh2;
        d[(i, i + 1)] = invh2;
    }
    d[(n - 1, n - 1)] = 2.0 * invh2;
    d[(n - 1, n - 2)] = -5.0 * invh2;
    d[(n - 1, n - 3)] = 4.0 * invh2;
    d[(n - 1, n - 4)] = -invh2;
    d
}

/// Composite-trapezoid weights on a uniform grid.
fn trapezoid_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n];
    w[0] = 0.5 * h;
    w[n - 1] = 0.5 * h;
    w
}

impl Grid {
    /// Uniform 1D grid on `[x_l, x_r]` with trapezoid quadrature.
    pub fn uniform_1d(n: usize, x_l: f64, x_r: f64) -> Result<Self> {
        if n < MIN_POINTS {
            return Err(Error::InvalidDiscretization(format!(
                "1d grid needs at least {MIN_POINTS} points, got {n}"
            )));
        }
        if !(x_l.is_finite() && x_r.is_finite() && x_l < x_r) {
            return Err(Error::InvalidDiscretization(format!(
                "empty interval [{x_l}, {x_r}]"
            )));
        }
        let h = (x_r - x_l) / (n - 1) as f64;
        let coords: Vec<[f64; 2]> = (0..n).map(|i| [x_l + i as f64 * h, 0.0]).collect();
        let weights = DVector::from_vec(trapezoid_weights(n, h));
        let boundary_idx = vec![0, n - 1];
        let interior_idx = (1..n - 1).collect();
        let normals = vec![
            BoundaryNormal {
                axis: 0,
                sign: -1.0,
            },
            BoundaryNormal { axis: 0, sign: 1.0 },
        ];
        Ok(Self {
            dims: 1,
            shape: [n, 1],
            bounds: [[x_l, x_r], [0.0, 0.0]],
            coords,
            weights,
            d1: vec![d1_matrix(n, h)],
            d2: vec![d2_matrix(n, h)],
            boundary_idx,
            interior_idx,
            normals,
        })
    }

    /// Uniform tensor-product grid on a rectangle.
    ///
    /// `bounds[k] = [lo, hi]` per direction. Weights are products of the 1D
    /// trapezoid weights; derivative operators act per direction.
    pub fn uniform_2d(n1: usize, n2: usize, bounds: [[f64; 2]; 2]) -> Result<Self> {
        if n1 < MIN_POINTS || n2 < MIN_POINTS {
            return Err(Error::InvalidDiscretization(format!(
                "2d grid needs at least {MIN_POINTS} points per direction, got {n1} x {n2}"
            )));
        }
        for b in &bounds {
            if !(b[0].is_finite() && b[1].is_finite() && b[0] < b[1]) {
                return Err(Error::InvalidDiscretization(format!(
                    "empty interval [{}, {}]",
                    b[0], b[1]
                )));
            }
        }
        let h1 = (bounds[0][1] - bounds[0][0]) / (n1 - 1) as f64;
        let h2 = (bounds[1][1] - bounds[1][0]) / (n2 - 1) as f64;
        let w1 = trapezoid_weights(n1, h1);
        let w2 = trapezoid_weights(n2, h2);

        let n = n1 * n2;
        let mut coords = Vec::with_capacity(n);
        let mut weights = DVector::zeros(n);
        let mut boundary_idx = Vec::new();
        let mut interior_idx = Vec::new();
        let mut normals = Vec::new();
        for i1 in 0..n1 {
            for i2 in 0..n2 {
                let p = i1 * n2 + i2;
                coords.push([bounds[0][0] + i1 as f64 * h1, bounds[1][0] + i2 as f64 * h2]);
                weights[p] = w1[i1] * w2[i2];
                let on_x1 = i1 == 0 || i1 == n1 - 1;
                let on_x2 = i2 == 0 || i2 == n2 - 1;
                if on_x1 || on_x2 {
                    boundary_idx.push(p);
                    // Corners take the x2-face normal so rows attached to the
                    // horizontal walls stay contiguous per face.
                    let normal = if on_x2 {
                        BoundaryNormal {
                            axis: 1,
                            sign: if i2 == 0 { -1.0 } else { 1.0 },
                        }
                    } else {
                        BoundaryNormal {
                            axis: 0,
                            sign: if i1 == 0 { -1.0 } else { 1.0 },
                        }
                    };
                    normals.push(normal);
                } else {
                    interior_idx.push(p);
                }
            }
        }
        Ok(Self {
            dims: 2,
            shape: [n1, n2],
            bounds,
            coords,
            weights,
            d1: vec![d1_matrix(n1, h1), d1_matrix(n2, h2)],
            d2: vec![d2_matrix(n1, h1), d2_matrix(n2, h2)],
            boundary_idx,
            interior_idx,
            normals,
        })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    /// Total point count.
    pub fn n(&self) -> usize {
        self.coords.len()
    }

    /// Points per direction, `[n1, n2]` (`n2 = 1` in 1D).
    pub fn shape(&self) -> [usize; 2] {
        self.shape
    }

    pub fn bounds(&self) -> [[f64; 2]; 2] {
        self.bounds
    }

    /// Grid spacing along `axis`.
    pub fn spacing(&self, axis: usize) -> f64 {
        (self.bounds[axis][1] - self.bounds[axis][0]) / (self.shape[axis] - 1) as f64
    }

    pub fn coord(&self, p: usize) -> [f64; 2] {
        self.coords[p]
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    /// Quadrature weights (diagonal of the spatial mass matrix).
    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    /// Measure of the domain.
    pub fn measure(&self) -> f64 {
        let mut m = self.bounds[0][1] - self.bounds[0][0];
        if self.dims == 2 {
            m *= self.bounds[1][1] - self.bounds[1][0];
        }
        m
    }

    pub fn boundary_idx(&self) -> &[usize] {
        &self.boundary_idx
    }

    pub fn interior_idx(&self) -> &[usize] {
        &self.interior_idx
    }

    /// Outward normal of the `b`-th boundary point (same order as
    /// [`Grid::boundary_idx`]).
    pub fn normal(&self, b: usize) -> BoundaryNormal {
        self.normals[b]
    }

    /// Point indices on one face, corners included.
    pub fn face_indices(&self, face: Face) -> Vec<usize> {
        let [n1, n2] = self.shape;
        match (self.dims, face) {
            (1, Face::X1Lo) => vec![0],
            (1, Face::X1Hi) => vec![n1 - 1],
            (1, _) => Vec::new(),
            (_, Face::X1Lo) => (0..n2).collect(),
            (_, Face::X1Hi) => (0..n2).map(|i2| (n1 - 1) * n2 + i2).collect(),
            (_, Face::X2Lo) => (0..n1).map(|i1| i1 * n2).collect(),
            (_, Face::X2Hi) => (0..n1).map(|i1| i1 * n2 + n2 - 1).collect(),
        }
    }

    /// Discrete inner product `u' diag(w_x) v`.
    pub fn inner_x(&self, u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
        let n = self.n();
        if u.len() != n || v.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "inner_x expects length {n}, got {} and {}",
                u.len(),
                v.len()
            )));
        }
        Ok(u.iter()
            .zip(v.iter())
            .zip(self.weights.iter())
            .map(|((a, b), w)| a * b * w)
            .sum())
    }

    /// Norm induced by [`Grid::inner_x`].
    pub fn norm_x(&self, u: &DVector<f64>) -> f64 {
        self.inner_x(u, u).map(f64::sqrt).unwrap_or(f64::NAN)
    }

    fn apply_direction(&self, op: &[DMatrix<f64>], axis: usize, v: &DMatrix<f64>) -> DMatrix<f64> {
        assert!(
            axis < self.dims,
            "axis {axis} out of range for {}d grid",
            self.dims
        );
        let n = self.n();
        assert_eq!(
            v.nrows(),
            n,
            "field has {} rows, grid has {n} points",
            v.nrows()
        );
        let s = v.ncols();
        if self.dims == 1 {
            return &op[0] * v;
        }
        let [n1, n2] = self.shape;
        if axis == 1 {
            // x2 varies fastest: the whole n x s buffer doubles as an
            // n2 x (n1 s) matrix, so one product covers every column.
            let view = DMatrixView::from_slice(v.as_slice(), n2, n1 * s);
            let prod = &op[1] * view;
            prod.reshape_generic(Dyn(n), Dyn(s))
        } else {
            let opt = op[0].transpose();
            let mut out = DMatrix::zeros(n, s);
            for c in 0..s {
                let z = DMatrixView::from_slice(&v.as_slice()[c * n..(c + 1) * n], n2, n1);
                let w = z * &opt;
                out.column_mut(c).copy_from_slice(w.as_slice());
            }
            out
        }
    }

    /// First derivative along `axis` of every column of `v`.
    pub fn apply_d1(&self, axis: usize, v: &DMatrix<f64>) -> DMatrix<f64> {
        self.apply_direction(&self.d1, axis, v)
    }

    /// Second derivative along `axis` of every column of `v`.
    pub fn apply_d2(&self, axis: usize, v: &DMatrix<f64>) -> DMatrix<f64> {
        self.apply_direction(&self.d2, axis, v)
    }

    /// Sum of per-direction second derivatives.
    pub fn laplacian(&self, v: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = self.apply_d2(0, v);
        if self.dims == 2 {
            out += self.apply_d2(1, v);
        }
        out
    }

    /// One-sided first-derivative row along `axis` at point `p`, scattered to
    /// flattened indices.
    fn directional_row(&self, axis: usize, p: usize) -> Vec<(usize, f64)> {
        let [n1, n2] = self.shape;
        if self.dims == 1 {
            let row = self.d1[0].row(p);
            return (0..n1)
                .filter(|&j| row[j] != 0.0)
                .map(|j| (j, row[j]))
                .collect();
        }
        let (i1, i2) = (p / n2, p % n2);
        if axis == 0 {
            let row = self.d1[0].row(i1);
            (0..n1)
                .filter(|&j| row[j] != 0.0)
                .map(|j| (j * n2 + i2, row[j]))
                .collect()
        } else {
            let row = self.d1[1].row(i2);
            (0..n2)
                .filter(|&j| row[j] != 0.0)
                .map(|j| (i1 * n2 + j, row[j]))
                .collect()
        }
    }

    /// Discrete outward-normal derivative operator, one row per boundary
    /// point in [`Grid::boundary_idx`] order.
    ///
    /// Rows are the signed one-sided rows of the directional first-derivative
    /// operator, so only points near the boundary carry nonzero entries. Used
    /// both in the boundary block of the full-order model and in the
    /// Neumann/Robin error metrics.
    pub fn normal_derivative_rows(&self) -> DMatrix<f64> {
        let nb = self.boundary_idx.len();
        let mut rows = DMatrix::zeros(nb, self.n());
        for (b, (&p, normal)) in self
            .boundary_idx
            .iter()
            .zip(self.normals.iter())
            .enumerate()
        {
            for (j, val) in self.directional_row(normal.axis, p) {
                rows[(b, j)] = normal.sign * val;
            }
        }
        rows
    }
}
