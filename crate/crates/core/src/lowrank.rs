//! DBO and DO low-rank integrators.
//!
//! Both methods evolve a time-dependent basis against the same full-order
//! right-hand side `F(V, t)`; the boundary data rides along inside `F`, so a
//! stochastic boundary costs nothing beyond the homogeneous problem and the
//! rank never couples to the random dimension.
//!
//! DBO factors `V ~ U S Y'` with both mode sets weighted-orthonormal:
//!
//! ```text
//! dU/dt = (I - U U' Mx) F  Mxi Y  S^-1
//! dS/dt =      U' Mx    F  Mxi Y
//! dY/dt = (I - Y Y' Mxi) F' Mx  U  S^-T
//! ```
//!
//! DO factors `V ~ U Y'` with orthonormal spatial modes and free stochastic
//! coefficients (`C = Y' Mxi Y`):
//!
//! ```text
//! dU/dt = (I - U U' Mx) F Mxi Y C^-1
//! dY/dt = F' Mx U
//! ```
//!
//! All mass-matrix products are diagonal scalings; the only inversions are
//! `r x r`. The tangent projectors annihilate `U' Mx dU` (and `Y' Mxi dY` for
//! DBO) identically, which keeps the factors orthonormal up to
//! time-integration drift; the stepper re-orthonormalizes through weighted QR
//! when that drift exceeds a threshold, absorbing the triangular factors so
//! the reconstructed field is unchanged.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fom::SemiDiscreteModel;
use crate::grid::Grid;
use crate::kloracle::{self, KlSnapshot};
use crate::stochastic::SampleSet;

/// Floor under which an initialization snapshot is considered rank-deficient.
pub const INIT_SINGULAR_FLOOR: f64 = 1e-14;

/// Tuning knobs for the low-rank integrators.
#[derive(Debug, Clone, Copy)]
pub struct LowRankOptions {
    /// Condition-number cap for the DBO correlation factor `S`.
    pub factor_cond_cap: f64,
    /// Condition-number cap for the DO covariance `C = Y' Mxi Y`.
    pub covariance_cond_cap: f64,
    /// Orthonormality drift that triggers re-orthonormalization.
    pub reortho_tol: f64,
    /// Disable to measure raw drift (regression baselines).
    pub maintain_orthonormality: bool,
}

impl Default for LowRankOptions {
    fn default() -> Self {
        Self {
            factor_cond_cap: 1e12,
            covariance_cond_cap: 1e14,
            reortho_tol: 1e-8,
            maintain_orthonormality: true,
        }
    }
}

/// Per-evaluation diagnostics returned by the RHS functions.
#[derive(Debug, Clone, Copy, Default)]
pub struct RhsDiagnostics {
    /// Condition number of the inverted small matrix (`S` or `C`).
    pub cond: f64,
    /// `max |U' Mx dU|`: the dynamically orthogonal residual.
    pub dyn_ortho_u: f64,
    /// `max |Y' Mxi dY|` (DBO only; zero for DO).
    pub dyn_ortho_y: f64,
}

/// Aggregated statistics over an integration run.
#[derive(Debug, Clone, Default)]
pub struct RunStats {
    pub steps: usize,
    pub max_cond: f64,
    pub max_dyn_ortho: f64,
    /// Largest post-step orthonormality drift of the spatial modes.
    pub max_ortho_drift_u: f64,
    /// Largest post-step orthonormality drift of the stochastic modes.
    pub max_ortho_drift_y: f64,
    pub reortho_count: usize,
}

impl RunStats {
    fn absorb(&mut self, d: &RhsDiagnostics) {
        self.max_cond = self.max_cond.max(d.cond);
        self.max_dyn_ortho = self.max_dyn_ortho.max(d.dyn_ortho_u.max(d.dyn_ortho_y));
    }
}

/// `max |M' diag(w) M - I|`
pub fn ortho_drift(m: &DMatrix<f64>, w: &DVector<f64>) -> f64 {
    let r = m.ncols();
    let mut wm = m.clone();
    for i in 0..m.nrows() {
        for k in 0..r {
            wm[(i, k)] *= w[i];
        }
    }
    let mut gram = m.transpose() * wm;
    for k in 0..r {
        gram[(k, k)] -= 1.0;
    }
    gram.amax()
}

fn scale_rows(m: &DMatrix<f64>, w: &DVector<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for i in 0..m.nrows() {
        for k in 0..m.ncols() {
            out[(i, k)] *= w[i];
        }
    }
    out
}

/// Remove the weighted span of `basis` from `z`, iterating the projection so
/// the residual `basis' diag(w) out` sits at roundoff even when `basis`
/// itself carries drift (RK4 stage states drift at O(dt^2)).
fn project_out(z: DMatrix<f64>, basis: &DMatrix<f64>, w: &DVector<f64>) -> DMatrix<f64> {
    let wb = scale_rows(basis, w);
    let mut out = z;
    let scale = 1.0 + out.amax();
    for _ in 0..4 {
        let coeff = wb.transpose() * &out;
        out -= basis * &coeff;
        if coeff.amax() <= 1e-15 * scale {
            break;
        }
    }
    out
}

fn cond_from_singular_values(sv: &DVector<f64>) -> f64 {
    let max = sv.max();
    let min = sv.min();
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// Dynamically bi-orthonormal state `V ~ U S Y'`.
#[derive(Debug, Clone)]
pub struct DboState {
    /// Spatial modes, `n x r`, orthonormal under `diag(w_x)`.
    pub u: DMatrix<f64>,
    /// Correlation factor, `r x r`.
    pub s: DMatrix<f64>,
    /// Stochastic modes, `s x r`, orthonormal under `diag(w_xi)`.
    pub y: DMatrix<f64>,
}

/// Derivatives of the DBO factors.
#[derive(Debug, Clone)]
pub struct DboDelta {
    pub du: DMatrix<f64>,
    pub ds: DMatrix<f64>,
    pub dy: DMatrix<f64>,
}

impl DboState {
    pub fn rank(&self) -> usize {
        self.s.nrows()
    }

    /// `U S Y'`
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.u * &self.s * self.y.transpose()
    }

    /// Condition number of the correlation factor.
    pub fn factor_cond(&self) -> f64 {
        cond_from_singular_values(&self.s.clone().svd(false, false).singular_values)
    }

    /// Energetically ranked view (modes ordered by singular value).
    pub fn energetic_rank(&self, t: f64) -> Result<KlSnapshot> {
        kloracle::energetic_rank_factors(&self.u, &self.s, &self.y, t)
    }

    fn axpy(&self, delta: &DboDelta, h: f64) -> DboState {
        DboState {
            u: &self.u + &delta.du * h,
            s: &self.s + &delta.ds * h,
            y: &self.y + &delta.dy * h,
        }
    }
}

/// Dynamically orthogonal state `V ~ U Y'`.
#[derive(Debug, Clone)]
pub struct DoState {
    /// Spatial modes, `n x r`, orthonormal under `diag(w_x)`.
    pub u: DMatrix<f64>,
    /// Stochastic coefficients, `s x r` (covariance is free).
    pub y: DMatrix<f64>,
}

/// Derivatives of the DO factors.
#[derive(Debug, Clone)]
pub struct DoDelta {
    pub du: DMatrix<f64>,
    pub dy: DMatrix<f64>,
}

impl DoState {
    pub fn rank(&self) -> usize {
        self.y.ncols()
    }

    /// `U Y'`
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.u * self.y.transpose()
    }

    /// Energetically ranked view.
    pub fn energetic_rank(&self, samples: &SampleSet, t: f64) -> Result<KlSnapshot> {
        kloracle::energetic_rank_covariance(&self.u, &self.y, samples, t)
    }

    fn axpy(&self, delta: &DoDelta, h: f64) -> DoState {
        DoState {
            u: &self.u + &delta.du * h,
            y: &self.y + &delta.dy * h,
        }
    }
}

/// DBO evolution equations at `(state, t)`.
pub fn dbo_rhs(
    state: &DboState,
    model: &SemiDiscreteModel,
    t: f64,
    opts: &LowRankOptions,
) -> Result<(DboDelta, RhsDiagnostics)> {
    let wx = model.grid().weights();
    let wxi = model.samples().weights();
    let cond = state.factor_cond();
    if !cond.is_finite() || cond > opts.factor_cond_cap {
        return Err(Error::IllConditionedFactor {
            cond,
            cap: opts.factor_cond_cap,
        });
    }

    let f = model.fom_rhs(&state.reconstruct(), t)?;
    let wxf = scale_rows(&f, wx); // Mx F
    let my = scale_rows(&state.y, wxi); // Mxi Y
    let k = state.u.transpose() * &wxf; // U' Mx F      (r x s)
    let g1 = &f * &my; // F Mxi Y      (n x r)
    let ds = &k * &my; // U' Mx F Mxi Y

    let lu_s = state.s.clone().lu();
    let lu_st = state.s.transpose().lu();
    // X = F Mxi Y S^-1  <=>  S' X' = G1'
    let xt = lu_st
        .solve(&g1.transpose())
        .ok_or(Error::IllConditionedFactor {
            cond,
            cap: opts.factor_cond_cap,
        })?;
    let du = project_out(xt.transpose(), &state.u, wx);
    // W = F' Mx U S^-T  <=>  S W' = (F' Mx U)'
    let h = wxf.transpose() * &state.u; // (s x r)
    let wt = lu_s
        .solve(&h.transpose())
        .ok_or(Error::IllConditionedFactor {
            cond,
            cap: opts.factor_cond_cap,
        })?;
    let dy = project_out(wt.transpose(), &state.y, wxi);

    let diag = RhsDiagnostics {
        cond,
        dyn_ortho_u: (scale_rows(&state.u, wx).transpose() * &du).amax(),
        dyn_ortho_y: (scale_rows(&state.y, wxi).transpose() * &dy).amax(),
    };
    Ok((DboDelta { du, ds, dy }, diag))
}

/// DO evolution equations at `(state, t)`.
pub fn do_rhs(
    state: &DoState,
    model: &SemiDiscreteModel,
    t: f64,
    opts: &LowRankOptions,
) -> Result<(DoDelta, RhsDiagnostics)> {
    let wx = model.grid().weights();
    let wxi = model.samples().weights();
    let my = scale_rows(&state.y, wxi);
    let c = state.y.transpose() * &my;
    let c = (&c + c.transpose()) * 0.5;
    let eig = c.clone().symmetric_eigen();
    let lmax = eig.eigenvalues.amax();
    let lmin = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let cond = if lmin > 0.0 {
        lmax / lmin
    } else {
        f64::INFINITY
    };
    if !cond.is_finite() || cond > opts.covariance_cond_cap {
        return Err(Error::IllConditionedCovariance {
            cond,
            cap: opts.covariance_cond_cap,
        });
    }

    let f = model.fom_rhs(&state.reconstruct(), t)?;
    let g1 = &f * &my; // F Mxi Y
    let lu_c = c.lu();
    // X = F Mxi Y C^-1, C symmetric
    let xt = lu_c
        .solve(&g1.transpose())
        .ok_or(Error::IllConditionedCovariance {
            cond,
            cap: opts.covariance_cond_cap,
        })?;
    let du = project_out(xt.transpose(), &state.u, wx);
    let dy = scale_rows(&f, wx).transpose() * &state.u;

    let diag = RhsDiagnostics {
        cond,
        dyn_ortho_u: (scale_rows(&state.u, wx).transpose() * &du).amax(),
        dyn_ortho_y: 0.0,
    };
    Ok((DoDelta { du, dy }, diag))
}

/// Closed-form boundary rows of `dU/dt` for Dirichlet boundaries:
/// `dU_b/dt = (1/a) dG/dt Mxi Y S^-1 - U_b (U' Mx F) Mxi Y S^-1`.
///
/// Purely a cross-check diagnostic: the same rows emerge from [`dbo_rhs`]
/// without any boundary-specific handling. Returns the rows and the grid
/// boundary slots they correspond to.
pub fn boundary_rows_dbo(
    state: &DboState,
    model: &SemiDiscreteModel,
    t: f64,
) -> Result<(DMatrix<f64>, Vec<usize>)> {
    let slots: Vec<usize> = (0..model.grid().boundary_idx().len())
        .filter(|&k| model.spec_of_slot(k).kind() == crate::fom::BcKind::Dirichlet)
        .collect();
    if slots.is_empty() {
        return Err(Error::UnsupportedDiagnostic(
            "boundary-row extraction applies to Dirichlet boundaries only".into(),
        ));
    }
    let wx = model.grid().weights();
    let wxi = model.samples().weights();
    let r = state.rank();

    let f = model.fom_rhs(&state.reconstruct(), t)?;
    let my = scale_rows(&state.y, wxi);
    let k = state.u.transpose() * scale_rows(&f, wx); // U' Mx F
    let gdot = model.boundary_rates(t)?;

    let lu_st = state.s.transpose().lu();
    let solve_right = |m: DMatrix<f64>| -> Result<DMatrix<f64>> {
        // M S^-1  <=>  S' X' = M'
        lu_st
            .solve(&m.transpose())
            .map(|x| x.transpose())
            .ok_or(Error::IllConditionedFactor {
                cond: f64::INFINITY,
                cap: f64::INFINITY,
            })
    };
    let kms = solve_right(&k * &my)?; // (U' Mx F) Mxi Y S^-1  (r x r)

    let boundary = model.grid().boundary_idx();
    let mut rows = DMatrix::zeros(slots.len(), r);
    for (out_row, &slot) in slots.iter().enumerate() {
        let a = model.spec_of_slot(slot).a;
        let p = boundary[slot];
        // (1/a) Gdot_row Mxi Y S^-1
        let mut grow = DMatrix::zeros(1, model.samples().s());
        grow.row_mut(0).copy_from(&gdot.row(slot));
        let gterm = solve_right(grow * &my)? / a;
        for j in 0..r {
            let mut proj = 0.0;
            for q in 0..r {
                proj += state.u[(p, q)] * kms[(q, j)];
            }
            rows[(out_row, j)] = gterm[(0, j)] - proj;
        }
    }
    Ok((rows, slots))
}

fn reorthonormalize_dbo(state: &mut DboState, grid: &Grid, samples: &SampleSet) {
    let (qu, ru) = kloracle::weighted_qr(&state.u, grid.weights());
    let (qy, ry) = kloracle::weighted_qr(&state.y, samples.weights());
    state.s = &ru * &state.s * ry.transpose();
    state.u = qu;
    state.y = qy;
}

fn reorthonormalize_do(state: &mut DoState, grid: &Grid) {
    let (qu, ru) = kloracle::weighted_qr(&state.u, grid.weights());
    state.u = qu;
    state.y = &state.y * ru.transpose();
}

/// One RK4 step of the DBO system, with drift-triggered maintenance.
///
/// All three factors advance with the same stage values. If the post-step
/// orthonormality drift of either mode set exceeds `opts.reortho_tol`, the
/// factors are re-orthonormalized through weighted QR with the triangular
/// parts absorbed into `S`, leaving the reconstruction unchanged.
pub fn step_dbo(
    state: &DboState,
    model: &SemiDiscreteModel,
    t: f64,
    dt: f64,
    opts: &LowRankOptions,
    stats: &mut RunStats,
) -> Result<DboState> {
    let (k1, d1) = dbo_rhs(state, model, t, opts)?;
    let (k2, d2) = dbo_rhs(&state.axpy(&k1, dt / 2.0), model, t + dt / 2.0, opts)?;
    let (k3, d3) = dbo_rhs(&state.axpy(&k2, dt / 2.0), model, t + dt / 2.0, opts)?;
    let (k4, d4) = dbo_rhs(&state.axpy(&k3, dt), model, t + dt, opts)?;
    for d in [&d1, &d2, &d3, &d4] {
        stats.absorb(d);
    }
    let mut next = DboState {
        u: &state.u + (&k1.du + &k2.du * 2.0 + &k3.du * 2.0 + &k4.du) * (dt / 6.0),
        s: &state.s + (&k1.ds + &k2.ds * 2.0 + &k3.ds * 2.0 + &k4.ds) * (dt / 6.0),
        y: &state.y + (&k1.dy + &k2.dy * 2.0 + &k3.dy * 2.0 + &k4.dy) * (dt / 6.0),
    };
    let drift_u = ortho_drift(&next.u, model.grid().weights());
    let drift_y = ortho_drift(&next.y, model.samples().weights());
    if opts.maintain_orthonormality && drift_u.max(drift_y) > opts.reortho_tol {
        reorthonormalize_dbo(&mut next, model.grid(), model.samples());
        stats.reortho_count += 1;
        stats.max_ortho_drift_u = stats
            .max_ortho_drift_u
            .max(ortho_drift(&next.u, model.grid().weights()));
        stats.max_ortho_drift_y = stats
            .max_ortho_drift_y
            .max(ortho_drift(&next.y, model.samples().weights()));
    } else {
        stats.max_ortho_drift_u = stats.max_ortho_drift_u.max(drift_u);
        stats.max_ortho_drift_y = stats.max_ortho_drift_y.max(drift_y);
    }
    stats.steps += 1;
    Ok(next)
}

/// One RK4 step of the DO system, with drift-triggered maintenance of the
/// spatial modes (the triangular adjustment is absorbed into `Y`).
pub fn step_do(
    state: &DoState,
    model: &SemiDiscreteModel,
    t: f64,
    dt: f64,
    opts: &LowRankOptions,
    stats: &mut RunStats,
) -> Result<DoState> {
    let (k1, d1) = do_rhs(state, model, t, opts)?;
    let (k2, d2) = do_rhs(&state.axpy(&k1, dt / 2.0), model, t + dt / 2.0, opts)?;
    let (k3, d3) = do_rhs(&state.axpy(&k2, dt / 2.0), model, t + dt / 2.0, opts)?;
    let (k4, d4) = do_rhs(&state.axpy(&k3, dt), model, t + dt, opts)?;
    for d in [&d1, &d2, &d3, &d4] {
        stats.absorb(d);
    }
    let mut next = DoState {
        u: &state.u + (&k1.du + &k2.du * 2.0 + &k3.du * 2.0 + &k4.du) * (dt / 6.0),
        y: &state.y + (&k1.dy + &k2.dy * 2.0 + &k3.dy * 2.0 + &k4.dy) * (dt / 6.0),
    };
    let drift_u = ortho_drift(&next.u, model.grid().weights());
    if opts.maintain_orthonormality && drift_u > opts.reortho_tol {
        reorthonormalize_do(&mut next, model.grid());
        stats.reortho_count += 1;
        stats.max_ortho_drift_u = stats
            .max_ortho_drift_u
            .max(ortho_drift(&next.u, model.grid().weights()));
    } else {
        stats.max_ortho_drift_u = stats.max_ortho_drift_u.max(drift_u);
    }
    stats.steps += 1;
    Ok(next)
}

fn checked_snapshot(
    v: &DMatrix<f64>,
    grid: &Grid,
    samples: &SampleSet,
    r: usize,
    t: f64,
) -> Result<KlSnapshot> {
    let kl = kloracle::weighted_svd(v, grid, samples, r, t)?;
    for k in 0..r {
        if kl.sigma[k] <= INIT_SINGULAR_FLOOR {
            return Err(Error::DegenerateInitialization {
                index: k,
                value: kl.sigma[k],
                floor: INIT_SINGULAR_FLOOR,
            });
        }
    }
    Ok(kl)
}

/// Initialize a DBO state from the rank-r KL truncation of a snapshot
/// (`U = U_kl`, `S = diag(sigma)`, `Y = Y_kl`).
pub fn init_dbo_from_snapshot(
    v: &DMatrix<f64>,
    grid: &Grid,
    samples: &SampleSet,
    r: usize,
) -> Result<DboState> {
    let kl = checked_snapshot(v, grid, samples, r, 0.0)?;
    Ok(DboState {
        u: kl.u,
        s: DMatrix::from_diagonal(&kl.sigma),
        y: kl.y,
    })
}

/// Initialize a DO state from the same truncation (`Y` absorbs the scale).
pub fn init_do_from_snapshot(
    v: &DMatrix<f64>,
    grid: &Grid,
    samples: &SampleSet,
    r: usize,
) -> Result<DoState> {
    let kl = checked_snapshot(v, grid, samples, r, 0.0)?;
    let mut y = kl.y;
    for k in 0..r {
        y.column_mut(k).scale_mut(kl.sigma[k]);
    }
    Ok(DoState { u: kl.u, y })
}
