//! Error measures for comparing low-rank and full-order fields.
//!
//! The global error is the plain Frobenius norm of the field difference,
//! with a quadrature-weighted variant reported alongside. Boundary errors
//! measure the residual of the boundary condition itself and come in two
//! forms depending on whether the condition has a value part (`a != 0`) or
//! is purely a flux condition (`a = 0`).

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fom::SemiDiscreteModel;
use crate::grid::Grid;
use crate::stochastic::SampleSet;

/// Global difference between two fields.
#[derive(Debug, Clone, Copy)]
pub struct GlobalError {
    /// Plain Frobenius norm of the entrywise difference.
    pub plain: f64,
    /// Quadrature-weighted Frobenius norm (`w_x`, `w_xi` folded in).
    pub weighted: f64,
}

/// `|| V_lr - V_ref ||_F`, plain and weighted.
pub fn global_error(
    v_lr: &DMatrix<f64>,
    v_ref: &DMatrix<f64>,
    grid: &Grid,
    samples: &SampleSet,
) -> Result<GlobalError> {
    let (n, s) = (grid.n(), samples.s());
    if v_lr.nrows() != n || v_lr.ncols() != s || v_ref.nrows() != n || v_ref.ncols() != s {
        return Err(Error::DimensionMismatch(format!(
            "fields are {}x{} and {}x{}, expected {n}x{s}",
            v_lr.nrows(),
            v_lr.ncols(),
            v_ref.nrows(),
            v_ref.ncols()
        )));
    }
    let mut plain = 0.0;
    let mut weighted = 0.0;
    for j in 0..s {
        let wj = samples.weights()[j];
        for i in 0..n {
            let e = v_lr[(i, j)] - v_ref[(i, j)];
            plain += e * e;
            weighted += grid.weights()[i] * wj * e * e;
        }
    }
    Ok(GlobalError {
        plain: plain.sqrt(),
        weighted: weighted.sqrt(),
    })
}

/// Boundary residual for conditions with a value part (`a != 0`):
/// `E_b = V(x_b) - (1/a)(G - b D_n V)`, reduced to the weighted RMS
/// `sqrt(sum_k sum_j w_xb_k w_xi_j E_b^2)`.
///
/// Only boundary points governed by an `a != 0` spec are measured; errors if
/// the model has none.
pub fn boundary_error_dirichlet_robin(
    v: &DMatrix<f64>,
    model: &SemiDiscreteModel,
    t: f64,
) -> Result<f64> {
    boundary_error(v, model, t, true)
}

/// Boundary residual for pure flux conditions (`a = 0, b != 0`):
/// `E_b = D_n V - G / b`, same weighted RMS.
pub fn boundary_error_neumann(v: &DMatrix<f64>, model: &SemiDiscreteModel, t: f64) -> Result<f64> {
    boundary_error(v, model, t, false)
}

fn boundary_error(
    v: &DMatrix<f64>,
    model: &SemiDiscreteModel,
    t: f64,
    value_part: bool,
) -> Result<f64> {
    let grid = model.grid();
    let samples = model.samples();
    let (n, s) = (grid.n(), samples.s());
    if v.nrows() != n || v.ncols() != s {
        return Err(Error::DimensionMismatch(format!(
            "field is {}x{}, expected {n}x{s}",
            v.nrows(),
            v.ncols()
        )));
    }
    let boundary = grid.boundary_idx();
    let slots: Vec<usize> = (0..boundary.len())
        .filter(|&k| {
            let bc = model.spec_of_slot(k);
            if value_part {
                bc.a != 0.0
            } else {
                bc.a == 0.0
            }
        })
        .collect();
    if slots.is_empty() {
        return Err(Error::WrongMetric(if value_part {
            "no Dirichlet/Robin boundary in this model; use the Neumann metric".into()
        } else {
            "no Neumann boundary in this model; use the Dirichlet/Robin metric".into()
        }));
    }
    let g = model.boundary_values(t)?;
    let dn = grid.normal_derivative_rows();
    let dnv = &dn * v; // n_b x s
    let mut acc = 0.0;
    for &k in &slots {
        let bc = model.spec_of_slot(k);
        let p = boundary[k];
        let w_xb = grid.weights()[p];
        for j in 0..s {
            let e = if value_part {
                v[(p, j)] - (g[(k, j)] - bc.b * dnv[(k, j)]) / bc.a
            } else {
                dnv[(k, j)] - g[(k, j)] / bc.b
            };
            acc += w_xb * samples.weights()[j] * e * e;
        }
    }
    Ok(acc.sqrt())
}

/// A labelled time series of a nonnegative error measure.
#[derive(Debug, Clone)]
pub struct ErrorSeries {
    pub label: String,
    times: Vec<f64>,
    values: Vec<f64>,
}

impl ErrorSeries {
    pub fn new(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            times: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Append a point; times must be strictly increasing and values finite.
    pub fn push(&mut self, t: f64, value: f64) -> Result<()> {
        if let Some(&last) = self.times.last() {
            if t <= last {
                return Err(Error::InvalidParameter(format!(
                    "series '{}': time {t} is not after {last}",
                    self.label
                )));
            }
        }
        if !value.is_finite() {
            return Err(Error::NumericalBlowup {
                t,
                context: format!("series '{}' received a non-finite value", self.label),
            });
        }
        self.times.push(t);
        self.values.push(value);
        Ok(())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Time-averaged value (trapezoid in time, normalized by the span).
    pub fn time_average(&self) -> f64 {
        trapezoid_mean(&self.times, &self.values)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }
}

fn trapezoid_mean(times: &[f64], values: &[f64]) -> f64 {
    if times.len() < 2 {
        return values.first().copied().unwrap_or(0.0);
    }
    let mut acc = 0.0;
    for k in 1..times.len() {
        acc += 0.5 * (values[k] + values[k - 1]) * (times[k] - times[k - 1]);
    }
    acc / (times[times.len() - 1] - times[0])
}

/// Normalized L2-in-time distance between two singular-value trajectories:
/// `sqrt( (1/T) integral (sigma_test - sigma_ref)^2 dt )` with trapezoid
/// weights. A constant offset of `delta` over any span evaluates to `delta`.
pub fn singular_value_error(times: &[f64], sigma_test: &[f64], sigma_ref: &[f64]) -> Result<f64> {
    if times.len() != sigma_test.len() || times.len() != sigma_ref.len() {
        return Err(Error::DimensionMismatch(format!(
            "series lengths differ: {} times, {} test, {} ref",
            times.len(),
            sigma_test.len(),
            sigma_ref.len()
        )));
    }
    if times.len() < 2 {
        return Err(Error::InvalidParameter(
            "need at least two samples in time".into(),
        ));
    }
    let sq: Vec<f64> = sigma_test
        .iter()
        .zip(sigma_ref.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .collect();
    Ok(trapezoid_mean(times, &sq).sqrt())
}
