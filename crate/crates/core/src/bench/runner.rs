//! Case execution: reference solve, low-rank solves, series output.
//!
//! A run integrates the PCM reference over the whole horizon, optionally
//! switching: with `t_switch > 0` the low-rank states are initialized from
//! the instantaneous KL decomposition of the reference at the switching time
//! instead of the initial condition, letting weak modes gain energy before
//! the factorization is truncated.
//!
//! Per rank, the runner writes `singvals.csv`, `err_global.csv`,
//! `err_boundary.csv` and `boundary_modes_<method>.csv` under
//! `<out_dir>/r<rank>/`, plus a human-readable `report.txt` at the case
//! root. Series rows stream to disk as they are produced.

use std::path::PathBuf;
use std::time::Instant;

use nalgebra::DMatrix;

use crate::bench::cases::{build_case, build_homogeneous_model, BoundaryMetric, CaseSetup};
use crate::bench::config::{CaseConfig, Method};
use crate::bench::csv::CsvWriter;
use crate::error::Result;
use crate::fom::{pcm_integrate, SemiDiscreteModel, Trajectory};
use crate::kloracle::{align_modes, weighted_svd, KlSnapshot};
use crate::lowrank::{
    init_dbo_from_snapshot, init_do_from_snapshot, step_dbo, step_do, DboState, DoState,
    LowRankOptions, RunStats,
};
use crate::metrics::{boundary_error_dirichlet_robin, boundary_error_neumann, global_error};

/// Statistics of one integrated method at one rank.
#[derive(Debug, Clone, Default)]
pub struct MethodReport {
    pub max_cond: f64,
    pub max_dyn_ortho: f64,
    pub max_ortho_drift: f64,
    pub reortho_count: usize,
    pub median_step_us: f64,
    pub wall_s: f64,
    pub final_eps_g_plain: f64,
    pub final_eps_g_weighted: f64,
    pub mean_eps_g_plain: f64,
    pub final_eps_b: f64,
    pub max_eps_b: f64,
    pub ambiguous_alignments: usize,
}

/// All series produced for one rank (times are the post-switch snapshots).
#[derive(Debug, Clone, Default)]
pub struct RankSeries {
    pub rank: usize,
    pub times: Vec<f64>,
    /// `sigma[mode][snapshot]`
    pub sigma_kl: Vec<Vec<f64>>,
    pub sigma_dbo: Vec<Vec<f64>>,
    pub sigma_do: Vec<Vec<f64>>,
    pub eps_g_dbo_plain: Vec<f64>,
    pub eps_g_do_plain: Vec<f64>,
    pub eps_b_pcm: Vec<f64>,
    pub eps_b_dbo: Vec<f64>,
    pub eps_b_do: Vec<f64>,
    pub dbo: Option<MethodReport>,
    pub do_: Option<MethodReport>,
}

/// Median DBO step times with stochastic vs. homogeneous boundary data.
#[derive(Debug, Clone, Copy)]
pub struct NoCostCheck {
    pub stochastic_us: f64,
    pub homogeneous_us: f64,
}

impl NoCostCheck {
    pub fn ratio(&self) -> f64 {
        self.stochastic_us / self.homogeneous_us
    }
}

/// Everything a case run produced.
#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub case: String,
    pub out_dir: PathBuf,
    /// PCM boundary error over the full horizon (including pre-switch).
    pub pcm_eps_b_times: Vec<f64>,
    pub pcm_eps_b: Vec<f64>,
    pub pcm_step_us: f64,
    pub pcm_wall_s: f64,
    pub boundary_condition_number: f64,
    pub ranks: Vec<RankSeries>,
    pub nocost: Option<NoCostCheck>,
}

fn median(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        0.5 * (xs[m - 1] + xs[m])
    }
}

fn boundary_error_for(
    metric: BoundaryMetric,
    v: &DMatrix<f64>,
    model: &SemiDiscreteModel,
    t: f64,
) -> Result<f64> {
    match metric {
        BoundaryMetric::ValuePart => boundary_error_dirichlet_robin(v, model, t),
        BoundaryMetric::Flux => boundary_error_neumann(v, model, t),
    }
}

/// Continuity alignment of a KL snapshot against its predecessor, so mode
/// signs do not flicker along a trajectory.
fn align_kl_to_previous(
    current: &mut KlSnapshot,
    previous: Option<&KlSnapshot>,
    setup: &CaseSetup,
) {
    if let Some(prev) = previous {
        if let Ok(aligned) = align_modes(&current.u, &prev.u, setup.grid.weights()) {
            for (k, col) in aligned.modes.column_iter().enumerate() {
                let flipped = (col - current.u.column(k)).amax() > 0.0;
                if flipped {
                    current.u.column_mut(k).neg_mut();
                    current.y.column_mut(k).neg_mut();
                }
            }
        }
    }
}

struct ModeWriters {
    kl: CsvWriter,
    dbo: Option<CsvWriter>,
    do_: Option<CsvWriter>,
}

fn mode_header(r: usize, n_pts: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for m in 1..=r {
        for p in 0..n_pts {
            h.push(format!("m{m}_p{p}"));
        }
    }
    h
}

/// Boundary rows of sign-aligned spatial modes, flattened mode-major.
fn boundary_mode_row(
    t: f64,
    modes: &DMatrix<f64>,
    reference: &DMatrix<f64>,
    setup: &CaseSetup,
    ambiguous: &mut usize,
) -> Result<Vec<f64>> {
    let aligned = align_modes(modes, reference, setup.grid.weights())?;
    *ambiguous += aligned.ambiguous.len();
    let boundary = setup.grid.boundary_idx();
    let mut row = vec![t];
    for k in 0..modes.ncols() {
        for &slot in &setup.stochastic_slots {
            row.push(aligned.modes[(boundary[slot], k)]);
        }
    }
    Ok(row)
}

/// Execute one case end to end.
pub fn run_case(cfg: &CaseConfig) -> Result<RunReport> {
    cfg.validate()?;
    let setup = build_case(cfg)?;
    let model = &setup.model;
    let run_dbo = cfg.wants(Method::Dbo);
    let run_do = cfg.wants(Method::Do);

    let mut report = RunReport {
        case: cfg.case.name().to_string(),
        out_dir: cfg.out_dir.clone(),
        boundary_condition_number: model.boundary_condition_number(),
        ..Default::default()
    };

    // --- PCM reference over the full horizon -----------------------------
    let pcm_start = Instant::now();
    let pre_switch: Option<Trajectory> = if cfg.t_switch > 0.0 {
        Some(pcm_integrate(
            model,
            setup.v0.clone(),
            0.0,
            cfg.t_switch,
            cfg.dt,
            cfg.output_stride,
        )?)
    } else {
        None
    };
    let v_at_switch = pre_switch
        .as_ref()
        .map(|tr| tr.states.last().unwrap().clone())
        .unwrap_or_else(|| setup.v0.clone());
    let main_leg = pcm_integrate(
        model,
        v_at_switch.clone(),
        cfg.t_switch,
        cfg.t_final,
        cfg.dt,
        cfg.output_stride,
    )?;
    report.pcm_wall_s = pcm_start.elapsed().as_secs_f64();
    let total_steps = ((cfg.t_final - 0.0) / cfg.dt).round().max(1.0);
    report.pcm_step_us = report.pcm_wall_s * 1e6 / total_steps;

    // PCM boundary error over everything we snapshotted
    if let Some(pre) = &pre_switch {
        for (t, v) in pre.times.iter().zip(pre.states.iter()) {
            report.pcm_eps_b_times.push(*t);
            report
                .pcm_eps_b
                .push(boundary_error_for(setup.boundary_metric, v, model, *t)?);
        }
    }
    for (i, (t, v)) in main_leg
        .times
        .iter()
        .zip(main_leg.states.iter())
        .enumerate()
    {
        if i == 0 && pre_switch.is_some() {
            continue; // switch point already recorded
        }
        report.pcm_eps_b_times.push(*t);
        report
            .pcm_eps_b
            .push(boundary_error_for(setup.boundary_metric, v, model, *t)?);
    }

    // exact low-rank walk aligned with the main PCM leg
    let span = cfg.t_final - cfg.t_switch;
    let n_steps = (span / cfg.dt).round().max(1.0) as usize;
    let dt_eff = span / n_steps as f64;
    let opts = LowRankOptions::default();

    for &rank in &cfg.ranks {
        let mut series = RankSeries {
            rank,
            ..Default::default()
        };
        series.times = main_leg.times.clone();
        series.sigma_kl = vec![Vec::new(); rank];
        series.sigma_dbo = vec![Vec::new(); rank];
        series.sigma_do = vec![Vec::new(); rank];

        let rank_dir = cfg.out_dir.join(format!("r{rank}"));
        let mut singvals = {
            let mut header = vec!["t".to_string()];
            for m in 1..=rank {
                header.push(format!("s{m}_kl"));
                if run_dbo {
                    header.push(format!("s{m}_dbo"));
                }
                if run_do {
                    header.push(format!("s{m}_do"));
                }
            }
            CsvWriter::create(&rank_dir.join("singvals.csv"), &header)?
        };
        let mut err_global = {
            let mut header = vec!["t".to_string()];
            if run_dbo {
                header.push("eps_g_dbo_plain".into());
                header.push("eps_g_dbo_weighted".into());
            }
            if run_do {
                header.push("eps_g_do_plain".into());
                header.push("eps_g_do_weighted".into());
            }
            CsvWriter::create(&rank_dir.join("err_global.csv"), &header)?
        };
        let mut err_boundary = {
            let mut header = vec!["t".to_string(), "eps_b_pcm".to_string()];
            if run_dbo {
                header.push("eps_b_dbo".into());
            }
            if run_do {
                header.push("eps_b_do".into());
            }
            CsvWriter::create(&rank_dir.join("err_boundary.csv"), &header)?
        };
        let n_b_pts = setup.stochastic_slots.len();
        let mut modes = ModeWriters {
            kl: CsvWriter::create(
                &rank_dir.join("boundary_modes_kl.csv"),
                &mode_header(rank, n_b_pts),
            )?,
            dbo: if run_dbo {
                Some(CsvWriter::create(
                    &rank_dir.join("boundary_modes_dbo.csv"),
                    &mode_header(rank, n_b_pts),
                )?)
            } else {
                None
            },
            do_: if run_do {
                Some(CsvWriter::create(
                    &rank_dir.join("boundary_modes_do.csv"),
                    &mode_header(rank, n_b_pts),
                )?)
            } else {
                None
            },
        };

        let mut dbo_state: Option<DboState> = if run_dbo {
            Some(init_dbo_from_snapshot(
                &v_at_switch,
                &setup.grid,
                &setup.samples,
                rank,
            )?)
        } else {
            None
        };
        let mut do_state: Option<DoState> = if run_do {
            Some(init_do_from_snapshot(
                &v_at_switch,
                &setup.grid,
                &setup.samples,
                rank,
            )?)
        } else {
            None
        };
        let mut dbo_stats = RunStats::default();
        let mut do_stats = RunStats::default();
        let mut dbo_report = MethodReport::default();
        let mut do_report = MethodReport::default();
        let mut dbo_steps_us: Vec<f64> = Vec::new();
        let mut do_steps_us: Vec<f64> = Vec::new();
        let mut kl_prev: Option<KlSnapshot> = None;

        let record = |snap_idx: usize,
                      t: f64,
                      dbo_state: &Option<DboState>,
                      do_state: &Option<DoState>,
                      kl_prev: &mut Option<KlSnapshot>,
                      series: &mut RankSeries,
                      singvals: &mut CsvWriter,
                      err_global_w: &mut CsvWriter,
                      err_boundary_w: &mut CsvWriter,
                      modes: &mut ModeWriters,
                      dbo_report: &mut MethodReport,
                      do_report: &mut MethodReport|
         -> Result<()> {
            let v_ref = &main_leg.states[snap_idx];
            let mut kl = weighted_svd(v_ref, &setup.grid, &setup.samples, rank, t)?;
            align_kl_to_previous(&mut kl, kl_prev.as_ref(), &setup);

            let eps_b_ref = boundary_error_for(setup.boundary_metric, v_ref, model, t)?;
            series.eps_b_pcm.push(eps_b_ref);

            let mut sv_row = vec![t];
            let mut eg_row = vec![t];
            let mut eb_row = vec![t, eps_b_ref];

            let mut dbo_ranked = None;
            if let Some(state) = dbo_state {
                let ranked = state.energetic_rank(t)?;
                let recon = state.reconstruct();
                let eg = global_error(&recon, v_ref, &setup.grid, &setup.samples)?;
                let eb = boundary_error_for(setup.boundary_metric, &recon, model, t)?;
                series.eps_g_dbo_plain.push(eg.plain);
                series.eps_b_dbo.push(eb);
                eg_row.push(eg.plain);
                eg_row.push(eg.weighted);
                eb_row.push(eb);
                dbo_report.final_eps_g_plain = eg.plain;
                dbo_report.final_eps_g_weighted = eg.weighted;
                dbo_report.final_eps_b = eb;
                dbo_report.max_eps_b = dbo_report.max_eps_b.max(eb);
                dbo_ranked = Some(ranked);
            }
            let mut do_ranked = None;
            if let Some(state) = do_state {
                let ranked = state.energetic_rank(&setup.samples, t)?;
                let recon = state.reconstruct();
                let eg = global_error(&recon, v_ref, &setup.grid, &setup.samples)?;
                let eb = boundary_error_for(setup.boundary_metric, &recon, model, t)?;
                series.eps_g_do_plain.push(eg.plain);
                series.eps_b_do.push(eb);
                eg_row.push(eg.plain);
                eg_row.push(eg.weighted);
                eb_row.push(eb);
                do_report.final_eps_g_plain = eg.plain;
                do_report.final_eps_g_weighted = eg.weighted;
                do_report.final_eps_b = eb;
                do_report.max_eps_b = do_report.max_eps_b.max(eb);
                do_ranked = Some(ranked);
            }

            for m in 0..rank {
                series.sigma_kl[m].push(kl.sigma[m]);
                sv_row.push(kl.sigma[m]);
                if let Some(rk) = &dbo_ranked {
                    series.sigma_dbo[m].push(rk.sigma[m]);
                    sv_row.push(rk.sigma[m]);
                }
                if let Some(rk) = &do_ranked {
                    series.sigma_do[m].push(rk.sigma[m]);
                    sv_row.push(rk.sigma[m]);
                }
            }

            singvals.write_row(&sv_row)?;
            if eg_row.len() > 1 {
                err_global_w.write_row(&eg_row)?;
            }
            err_boundary_w.write_row(&eb_row)?;

            let mut scratch = 0usize;
            let kl_row = boundary_mode_row(t, &kl.u, &kl.u, &setup, &mut scratch)?;
            modes.kl.write_row(&kl_row)?;
            if let (Some(rk), Some(w)) = (&dbo_ranked, modes.dbo.as_mut()) {
                let row = boundary_mode_row(
                    t,
                    &rk.u,
                    &kl.u,
                    &setup,
                    &mut dbo_report.ambiguous_alignments,
                )?;
                w.write_row(&row)?;
            }
            if let (Some(rk), Some(w)) = (&do_ranked, modes.do_.as_mut()) {
                let row = boundary_mode_row(
                    t,
                    &rk.u,
                    &kl.u,
                    &setup,
                    &mut do_report.ambiguous_alignments,
                )?;
                w.write_row(&row)?;
            }
            *kl_prev = Some(kl);
            Ok(())
        };

        // initial snapshot at the switching time
        record(
            0,
            cfg.t_switch,
            &dbo_state,
            &do_state,
            &mut kl_prev,
            &mut series,
            &mut singvals,
            &mut err_global,
            &mut err_boundary,
            &mut modes,
            &mut dbo_report,
            &mut do_report,
        )?;

        let dbo_wall = Instant::now();
        let mut snap_idx = 1usize;
        for k in 0..n_steps {
            let t = cfg.t_switch + k as f64 * dt_eff;
            if let Some(state) = dbo_state.take() {
                let tick = Instant::now();
                let next = step_dbo(&state, model, t, dt_eff, &opts, &mut dbo_stats)?;
                dbo_steps_us.push(tick.elapsed().as_secs_f64() * 1e6);
                dbo_state = Some(next);
            }
            if let Some(state) = do_state.take() {
                let tick = Instant::now();
                let next = step_do(&state, model, t, dt_eff, &opts, &mut do_stats)?;
                do_steps_us.push(tick.elapsed().as_secs_f64() * 1e6);
                do_state = Some(next);
            }
            if (k + 1) % cfg.output_stride == 0 || k + 1 == n_steps {
                let t_snap = cfg.t_switch + (k + 1) as f64 * dt_eff;
                record(
                    snap_idx,
                    t_snap,
                    &dbo_state,
                    &do_state,
                    &mut kl_prev,
                    &mut series,
                    &mut singvals,
                    &mut err_global,
                    &mut err_boundary,
                    &mut modes,
                    &mut dbo_report,
                    &mut do_report,
                )?;
                snap_idx += 1;
            }
        }
        let wall = dbo_wall.elapsed().as_secs_f64();

        if run_dbo {
            dbo_report.max_cond = dbo_stats.max_cond;
            dbo_report.max_dyn_ortho = dbo_stats.max_dyn_ortho;
            dbo_report.max_ortho_drift =
                dbo_stats.max_ortho_drift_u.max(dbo_stats.max_ortho_drift_y);
            dbo_report.reortho_count = dbo_stats.reortho_count;
            dbo_report.median_step_us = median(dbo_steps_us.clone());
            dbo_report.wall_s = wall;
            dbo_report.mean_eps_g_plain = trapezoid_mean(&series.times, &series.eps_g_dbo_plain);
            series.dbo = Some(dbo_report);
        }
        if run_do {
            do_report.max_cond = do_stats.max_cond;
            do_report.max_dyn_ortho = do_stats.max_dyn_ortho;
            do_report.max_ortho_drift = do_stats.max_ortho_drift_u;
            do_report.reortho_count = do_stats.reortho_count;
            do_report.median_step_us = median(do_steps_us.clone());
            do_report.wall_s = wall;
            do_report.mean_eps_g_plain = trapezoid_mean(&series.times, &series.eps_g_do_plain);
            series.do_ = Some(do_report);
        }

        singvals.finish()?;
        err_global.finish()?;
        err_boundary.finish()?;
        modes.kl.finish()?;
        if let Some(w) = modes.dbo {
            w.finish()?;
        }
        if let Some(w) = modes.do_ {
            w.finish()?;
        }
        report.ranks.push(series);
    }

    // --- no-cost hook: DBO step timing with homogeneous boundary data ----
    if run_dbo && !cfg.ranks.is_empty() {
        let rank = cfg.ranks[0];
        let homogeneous = build_homogeneous_model(cfg)?;
        let timing_steps = n_steps.min(200);
        let warmup = 20.min(timing_steps / 4);
        let time_run = |m: &SemiDiscreteModel| -> Result<f64> {
            let mut stats = RunStats::default();
            let mut state =
                init_dbo_from_snapshot(&v_at_switch, &setup.grid, &setup.samples, rank)?;
            let mut us = Vec::with_capacity(timing_steps);
            for k in 0..timing_steps {
                let t = cfg.t_switch + k as f64 * dt_eff;
                let tick = Instant::now();
                state = step_dbo(&state, m, t, dt_eff, &opts, &mut stats)?;
                us.push(tick.elapsed().as_secs_f64() * 1e6);
            }
            Ok(median(us.split_off(warmup)))
        };
        let stochastic_us = time_run(model)?;
        let homogeneous_us = time_run(&homogeneous)?;
        report.nocost = Some(NoCostCheck {
            stochastic_us,
            homogeneous_us,
        });
    }

    write_report_txt(cfg, &setup, &report)?;
    Ok(report)
}

fn trapezoid_mean(times: &[f64], values: &[f64]) -> f64 {
    if times.len() < 2 || values.len() != times.len() {
        return values.first().copied().unwrap_or(0.0);
    }
    let mut acc = 0.0;
    for k in 1..times.len() {
        acc += 0.5 * (values[k] + values[k - 1]) * (times[k] - times[k - 1]);
    }
    acc / (times[times.len() - 1] - times[0])
}

fn write_report_txt(cfg: &CaseConfig, setup: &CaseSetup, report: &RunReport) -> Result<()> {
    use std::fmt::Write as _;
    let mut text = String::new();
    let _ = writeln!(text, "case: {}", report.case);
    let _ = writeln!(
        text,
        "grid: {} points ({}d), samples: {}, d = {}",
        setup.grid.n(),
        setup.grid.dims(),
        setup.samples.s(),
        cfg.d
    );
    let _ = writeln!(
        text,
        "dt = {:.3e}, t_final = {}, t_switch = {}, output stride = {}",
        cfg.dt, cfg.t_final, cfg.t_switch, cfg.output_stride
    );
    if let Some(hint) = setup.model.stable_dt_hint() {
        let _ = writeln!(text, "advisory stable dt: {:.3e}", hint);
    }
    let _ = writeln!(
        text,
        "boundary system condition number: {:.3e}",
        report.boundary_condition_number
    );
    let _ = writeln!(
        text,
        "pcm: wall {:.2} s ({:.1} us/step), max eps_b {:.3e}",
        report.pcm_wall_s,
        report.pcm_step_us,
        report.pcm_eps_b.iter().cloned().fold(0.0, f64::max)
    );
    for series in &report.ranks {
        let _ = writeln!(text, "rank {}:", series.rank);
        for (name, rep) in [("dbo", series.dbo.as_ref()), ("do ", series.do_.as_ref())] {
            if let Some(r) = rep {
                let _ = writeln!(
                    text,
                    "  {name}: median {:.1} us/step, final eps_g {:.3e} (weighted {:.3e}), \
                     mean eps_g {:.3e}, final eps_b {:.3e}, max cond {:.3e}, \
                     max dyn-ortho {:.3e}, reortho x{}, ambiguous alignments {}",
                    r.median_step_us,
                    r.final_eps_g_plain,
                    r.final_eps_g_weighted,
                    r.mean_eps_g_plain,
                    r.final_eps_b,
                    r.max_cond,
                    r.max_dyn_ortho,
                    r.reortho_count,
                    r.ambiguous_alignments
                );
            }
        }
    }
    if let Some(nc) = &report.nocost {
        let _ = writeln!(
            text,
            "no-cost check: dbo median step {:.1} us stochastic vs {:.1} us homogeneous \
             (ratio {:.3})",
            nc.stochastic_us,
            nc.homogeneous_us,
            nc.ratio()
        );
    }
    std::fs::create_dir_all(&cfg.out_dir)?;
    std::fs::write(cfg.out_dir.join("report.txt"), text)?;
    Ok(())
}
