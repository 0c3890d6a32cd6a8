//! Sweeps and diagnostics driven by a [`RunConfig`].

use std::time::Instant;

use ngo_core::hopping::{densities, slice_at_p, HoppingDirectSolver, HoppingNgoSolver, KineticState};
use ngo_core::real::linf_distance;
use ngo_core::scalar::{solve_asymptotic, solve_spectral_reference_with, ScalarSolver};
use ngo_core::system::SystemSolver;
use ngo_core::{NgoError, PeriodicGrid, PhaseMethod};
use num_complex::Complex64 as C;
use serde::Serialize;

use crate::config::{ProblemKind, ReferenceSolver, RunConfig};
use crate::error::{HarnessError, Result};
use crate::problems::{hopping_problem, reference_grid, restrict, scalar_problem, system_problem, ReferenceCache};
use crate::report::{ErrorReport, ErrorRow};

fn require(cfg: &RunConfig, kinds: &[ProblemKind], what: &str) -> Result<()> {
    if kinds.contains(&cfg.kind) {
        Ok(())
    } else {
        Err(HarnessError::Config(format!("{what} does not apply to {} problems", cfg.kind)))
    }
}

fn finite(values: &[C], what: &'static str) -> Result<()> {
    if values.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(NgoError::NonFinite(what).into())
    }
}

/// NGO solution of a scalar or system run at `t_final`: reconstructed
/// components and the stepping wall time.
pub struct NgoRun {
    pub grid: PeriodicGrid<f64>,
    pub dt: f64,
    pub components: Vec<Vec<C>>,
    pub phase: Vec<f64>,
    pub wall_seconds: f64,
}

pub fn run_ngo(cfg: &RunConfig, epsilon: f64, n: usize) -> Result<NgoRun> {
    match cfg.kind {
        ProblemKind::Scalar => {
            let p = scalar_problem(cfg, epsilon, n)?;
            let solver = ScalarSolver::new(&p)?;
            let mut state = solver.initial_state(cfg.init)?;
            let start = Instant::now();
            for _ in 0..solver.steps() {
                state = solver.step(&state);
            }
            let wall_seconds = start.elapsed().as_secs_f64();
            let u = solver.reconstruct(&state);
            finite(&u, "the scalar scheme")?;
            Ok(NgoRun { grid: p.xgrid, dt: solver.dt(), components: vec![u], phase: state.s, wall_seconds })
        }
        ProblemKind::System => {
            let p = system_problem(cfg, epsilon, n)?;
            let solver = SystemSolver::new(&p)?;
            let mut state = solver.initial_state(cfg.init)?;
            let start = Instant::now();
            for _ in 0..solver.steps() {
                state = solver.step(&state);
            }
            let wall_seconds = start.elapsed().as_secs_f64();
            let (u1, u2) = solver.reconstruct(&state);
            finite(&u1, "the system scheme")?;
            finite(&u2, "the system scheme")?;
            Ok(NgoRun { grid: p.xgrid, dt: solver.dt(), components: vec![u1, u2], phase: state.s, wall_seconds })
        }
        ProblemKind::Hopping => Err(HarnessError::Config("use the hopping run for kinetic problems".into())),
    }
}

fn max_error(a: &[Vec<C>], b: &[Vec<C>]) -> f64 {
    a.iter().zip(b).map(|(u, v)| linf_distance(u, v)).fold(0.0, f64::max)
}

/// ℓ∞-in-x error of the reconstructed NGO solution against the reference
/// for every `(ε, N_ts)` pair.
pub fn run_convergence(cfg: &RunConfig, cache: &ReferenceCache) -> Result<ErrorReport> {
    require(cfg, &[ProblemKind::Scalar, ProblemKind::System], "a convergence sweep")?;
    let mut report = ErrorReport::new(&cfg.preset);
    report.note("kind", cfg.kind);
    report.note("t_final", cfg.t_final);
    report.note("dt_rule", cfg.dt_rule);
    let mut grids = Vec::new();
    for &eps in &cfg.epsilons {
        grids.push(reference_grid(cfg, eps)?);
    }
    cache.prepare(cfg)?;
    for (&eps, grid) in cfg.epsilons.iter().zip(&grids) {
        for &n in &cfg.n_ts {
            let ngo = run_ngo(cfg, eps, n)?;
            let reference = cache.get(cfg, eps, n)?.restrict(&ngo.grid);
            report.rows.push(ErrorRow {
                epsilon: eps,
                n_ts: n,
                dt: ngo.dt,
                dx: ngo.grid.spacing(),
                linf_error: max_error(&ngo.components, &reference),
                wall_seconds: ngo.wall_seconds,
                solver_id: format!("ngo_{};{};{}", cfg.kind, cfg.solver_tag(), grid.describe(cfg.reference.solver)),
            });
        }
    }
    report.finish()?;
    Ok(report)
}

/// Distance between the NGO profile at `τ = S/ε` and the limit model `ū`.
pub fn run_asymptotic_compare(cfg: &RunConfig) -> Result<ErrorReport> {
    require(cfg, &[ProblemKind::Scalar], "the asymptotic comparison")?;
    if cfg.phase == PhaseMethod::Upwind1 {
        return Err(HarnessError::Config("the asymptotic comparison needs the exact or spectral_rk4 phase".into()));
    }
    let mut report = ErrorReport::new(&cfg.preset);
    report.note("t_final", cfg.t_final);
    for &eps in &cfg.epsilons {
        for &n in &cfg.n_ts {
            let p = scalar_problem(cfg, eps, n)?;
            let solver = ScalarSolver::new(&p)?;
            let mut state = solver.initial_state(cfg.init)?;
            let start = Instant::now();
            for _ in 0..solver.steps() {
                state = solver.step(&state);
            }
            let wall_seconds = start.elapsed().as_secs_f64();
            let profile = solver.evaluate_profile(&state);
            finite(&profile, "the scalar scheme")?;
            let limit = solve_asymptotic(&p, cfg.t_final)?;
            finite(&limit, "the asymptotic model")?;
            report.rows.push(ErrorRow {
                epsilon: eps,
                n_ts: n,
                dt: solver.dt(),
                dx: p.xgrid.spacing(),
                linf_error: linf_distance(&profile, &limit),
                wall_seconds,
                solver_id: format!("asymptotic_distance;{}", cfg.solver_tag()),
            });
        }
    }
    report.finish()?;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeriesRow {
    pub epsilon: f64,
    pub n_ts: usize,
    pub t: f64,
    pub r: f64,
    pub solver_id: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SnapshotRow {
    pub epsilon: f64,
    pub n_ts: usize,
    pub x: f64,
    pub re_u: f64,
    pub im_u: f64,
    pub solver_id: String,
}

pub struct Timeseries {
    pub series: Vec<SeriesRow>,
    pub snapshots: Vec<SnapshotRow>,
    /// `max_t |ℛ_ngo − ℛ_ref|` at the NGO step times, in `linf_error`.
    pub gaps: ErrorReport,
}

/// `ℛ = |Σ u(x_j) x_j Δx|` on `grid`.
pub fn moment(u: &[C], grid: &PeriodicGrid<f64>) -> f64 {
    let dx = grid.spacing();
    u.iter().zip(grid.nodes()).map(|(v, x)| *v * x).sum::<C>().norm() * dx
}

fn snapshot(eps: f64, n: usize, grid: &PeriodicGrid<f64>, u: &[C], id: &str) -> Vec<SnapshotRow> {
    grid.nodes()
        .into_iter()
        .zip(u)
        .map(|(x, v)| SnapshotRow { epsilon: eps, n_ts: n, x, re_u: v.re, im_u: v.im, solver_id: id.to_string() })
        .collect()
}

/// `ℛ(t)` of the NGO and reference runs, both by quadrature on the NGO
/// mesh, and the final solutions.
pub fn run_timeseries(cfg: &RunConfig) -> Result<Timeseries> {
    require(cfg, &[ProblemKind::Scalar], "the time series")?;
    if cfg.reference.solver != ReferenceSolver::SpectralRk4 {
        return Err(HarnessError::Config("the time series uses the spectral_rk4 reference".into()));
    }
    let mut out = Timeseries { series: Vec::new(), snapshots: Vec::new(), gaps: ErrorReport::new(&cfg.preset) };
    for &eps in &cfg.epsilons {
        let grid = reference_grid(cfg, eps)?;
        for &n in &cfg.n_ts {
            let p = scalar_problem(cfg, eps, n)?;
            let solver = ScalarSolver::new(&p)?;
            let ngo_id = format!("ngo_scalar;{}", cfg.solver_tag());
            let mut ngo_r = Vec::new();
            let start = Instant::now();
            let state = solver.run_with(cfg.init, |s| ngo_r.push((s.t, moment(&solver.reconstruct(s), &p.xgrid))))?;
            let wall_seconds = start.elapsed().as_secs_f64();
            let u = solver.reconstruct(&state);
            out.snapshots.extend(snapshot(eps, n, &p.xgrid, &u, &ngo_id));

            let per_step = (solver.dt() / grid.dt_d).ceil().max(1.0) as usize;
            let mut rp = scalar_problem(cfg, eps, grid.n_d)?;
            rp.dt = cfg.t_final / (solver.steps() * per_step) as f64;
            let ref_id = format!("reference;{}", grid.describe(cfg.reference.solver).replacen(
                &format!("dt_d={}", grid.dt_d),
                &format!("dt_d={}", rp.dt),
                1,
            ));
            let mut ref_r = Vec::new();
            let fine = rp.xgrid;
            let u_ref = solve_spectral_reference_with(&rp, cfg.t_final, |t, v| {
                let on_ngo = restrict(&fine, &[v.to_vec()], &p.xgrid);
                ref_r.push((t, moment(&on_ngo[0], &p.xgrid)));
            })?;
            out.snapshots.extend(snapshot(eps, n, &fine, &u_ref, &ref_id));

            let gap = ngo_r
                .iter()
                .enumerate()
                .map(|(k, (_, r))| (r - ref_r[k * per_step].1).abs())
                .fold(0.0, f64::max);
            for (t, r) in ngo_r {
                out.series.push(SeriesRow { epsilon: eps, n_ts: n, t, r, solver_id: ngo_id.clone() });
            }
            for (t, r) in ref_r {
                out.series.push(SeriesRow { epsilon: eps, n_ts: n, t, r, solver_id: ref_id.clone() });
            }
            out.gaps.rows.push(ErrorRow {
                epsilon: eps,
                n_ts: n,
                dt: solver.dt(),
                dx: p.xgrid.spacing(),
                linf_error: gap,
                wall_seconds,
                solver_id: format!("moment_gap;{ngo_id};{ref_id}"),
            });
        }
    }
    out.gaps.finish()?;
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KineticRow {
    pub epsilon: f64,
    pub x: f64,
    pub plus: f64,
    pub minus: f64,
    pub re_i: f64,
    pub im_i: f64,
    pub solver_id: String,
}

/// Per-ε diagnostics of a hopping run.
#[derive(Clone, Debug, PartialEq)]
pub struct HoppingCase {
    pub epsilon: f64,
    pub n_x: usize,
    pub ngo_seconds: f64,
    /// Reconstructed `∫∫(f⁺ + f⁻)` at `t = 0` and `t_final`.
    pub ngo_mass: (f64, f64),
    /// `∫∫Π(F⁺ + F⁻)` at `t = 0` and `t_final`.
    pub ngo_averaged_mass: (f64, f64),
    /// Reconstructed mass from the momentum-refined densities.
    pub ngo_density_mass: (f64, f64),
    pub reference: Option<HoppingReference>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HoppingReference {
    pub n_x: usize,
    pub n_p: usize,
    pub dt: f64,
    pub seconds: f64,
    /// Largest `|mass(t) − mass(0)|` over all steps.
    pub mass_drift: f64,
    pub slice_error: f64,
    pub density_error: f64,
}

pub struct HoppingOutput {
    pub slices: Vec<KineticRow>,
    pub densities: Vec<KineticRow>,
    pub timings: ErrorReport,
    pub cases: Vec<HoppingCase>,
}

fn kinetic_rows(eps: f64, grid: &PeriodicGrid<f64>, f: &[Vec<f64>; 4], id: &str) -> Vec<KineticRow> {
    grid.nodes()
        .into_iter()
        .enumerate()
        .map(|(j, x)| KineticRow {
            epsilon: eps,
            x,
            plus: f[0][j],
            minus: f[1][j],
            re_i: f[2][j],
            im_i: f[3][j],
            solver_id: id.to_string(),
        })
        .collect()
}

fn zero_momentum(grid: &PeriodicGrid<f64>) -> usize {
    let nodes = grid.nodes();
    (0..nodes.len()).min_by(|&a, &b| nodes[a].abs().total_cmp(&nodes[b].abs())).unwrap_or(0)
}

fn kinetic_error(fine: &PeriodicGrid<f64>, reference: &[Vec<f64>; 4], coarse: &PeriodicGrid<f64>, f: &[Vec<f64>; 4]) -> f64 {
    let as_complex = |v: &Vec<f64>| v.iter().map(|&a| C::new(a, 0.0)).collect::<Vec<_>>();
    let on_coarse = restrict(fine, &reference.iter().map(as_complex).collect::<Vec<_>>(), coarse);
    f.iter().zip(&on_coarse).map(|(a, b)| linf_distance(&as_complex(a), b)).fold(0.0, f64::max)
}

/// NGO and (optionally) direct runs: slices at `p = 0`, densities, timings.
pub fn run_hopping(cfg: &RunConfig) -> Result<HoppingOutput> {
    require(cfg, &[ProblemKind::Hopping], "the hopping run")?;
    let h = &cfg.hopping;
    let dt = match cfg.dt_rule {
        crate::config::DtRule::Fixed(dt) => dt,
        rule => return Err(HarnessError::Config(format!("hopping runs need a fixed dt, got {rule}"))),
    };
    let mut out = HoppingOutput {
        slices: Vec::new(),
        densities: Vec::new(),
        timings: ErrorReport::new(&cfg.preset),
        cases: Vec::new(),
    };
    out.timings.note("t_final", cfg.t_final);
    for &eps in &cfg.epsilons {
        let rgrid = reference_grid(cfg, eps)?;
        let reference = if h.run_reference {
            let p = hopping_problem(cfg, eps, rgrid.n_d, rgrid.n_p, 2, rgrid.dt_d)?;
            let solver = HoppingDirectSolver::new(&p)?;
            let initial = ngo_core::hopping::hopping_initial_kinetic(&p);
            let m0 = solver.mass(&initial);
            let mut drift = 0.0f64;
            let mut state = initial;
            let start = Instant::now();
            for _ in 0..solver.steps() {
                state = solver.step(&state);
                drift = drift.max((solver.mass(&state) - m0).abs());
            }
            let seconds = start.elapsed().as_secs_f64();
            check_kinetic(&state)?;
            let slice = slice_at_p(&state, p.pgrid.len(), zero_momentum(&p.pgrid));
            let rho = densities(&state, &p.pgrid);
            let id = format!("direct_hopping;{}", rgrid.describe(ReferenceSolver::Kinetic));
            out.slices.extend(kinetic_rows(eps, &p.xgrid, &slice, &id));
            out.densities.extend(kinetic_rows(eps, &p.xgrid, &rho, &id));
            out.timings.rows.push(ErrorRow {
                epsilon: eps,
                n_ts: rgrid.n_d,
                dt: solver_dt(&p),
                dx: p.xgrid.spacing(),
                linf_error: 0.0,
                wall_seconds: seconds,
                solver_id: id,
            });
            Some((p, slice, rho, seconds, drift))
        } else {
            None
        };
        for &nx in &cfg.n_ts {
            let p = hopping_problem(cfg, eps, nx, h.n_p, cfg.n_tau, dt)?;
            let solver = HoppingNgoSolver::new(&p)?;
            let initial = solver.initial_state(cfg.init)?;
            let mut seconds = f64::INFINITY;
            let mut state = initial.clone();
            for _ in 0..h.repeats.max(1) {
                state = initial.clone();
                let start = Instant::now();
                for _ in 0..solver.steps() {
                    state = solver.step(&state);
                }
                seconds = seconds.min(start.elapsed().as_secs_f64());
            }
            let kinetic = solver.reconstruct(&state);
            check_kinetic(&kinetic)?;
            let cell = p.xgrid.spacing() * p.pgrid.spacing();
            let mass = |k: &KineticState<f64>| k.fields[0].iter().chain(&k.fields[1]).sum::<f64>() * cell;
            let ngo_mass = (mass(&solver.reconstruct(&initial)), mass(&kinetic));
            let ngo_averaged_mass = (solver.averaged_mass(&initial), solver.averaged_mass(&state));
            let density_np = h.density_np.unwrap_or(if h.run_reference { rgrid.n_p } else { h.n_p }).max(h.n_p);
            let slice = slice_at_p(&kinetic, h.n_p, zero_momentum(&p.pgrid));
            let rho = solver.densities(&state, density_np)?;
            let rho0 = solver.densities(&initial, density_np)?;
            let dx = p.xgrid.spacing();
            let total = |r: &[Vec<f64>; 4]| r[0].iter().chain(&r[1]).sum::<f64>() * dx;
            let ngo_density_mass = (total(&rho0), total(&rho));
            let id = format!("ngo_hopping;n_x={nx};{};density_np={density_np};dt={dt}", cfg.solver_tag());
            out.slices.extend(kinetic_rows(eps, &p.xgrid, &slice, &id));
            out.densities.extend(kinetic_rows(eps, &p.xgrid, &rho, &id));
            let mut row = |metric: &str, err: f64| {
                out.timings.rows.push(ErrorRow {
                    epsilon: eps,
                    n_ts: nx,
                    dt: solver_dt(&p),
                    dx: p.xgrid.spacing(),
                    linf_error: err,
                    wall_seconds: seconds,
                    solver_id: format!("{id};metric={metric}"),
                })
            };
            let reference = match &reference {
                Some((rp, rslice, rrho, rsec, drift)) => {
                    let slice_error = kinetic_error(&rp.xgrid, rslice, &p.xgrid, &slice);
                    let density_error = kinetic_error(&rp.xgrid, rrho, &p.xgrid, &rho);
                    row("slices", slice_error);
                    row("densities", density_error);
                    Some(HoppingReference {
                        n_x: rgrid.n_d,
                        n_p: rgrid.n_p,
                        dt: solver_dt(rp),
                        seconds: *rsec,
                        mass_drift: *drift,
                        slice_error,
                        density_error,
                    })
                }
                None => {
                    row("mass_drift", (ngo_mass.1 - ngo_mass.0).abs());
                    None
                }
            };
            out.cases.push(HoppingCase {
                epsilon: eps,
                n_x: nx,
                ngo_seconds: seconds,
                ngo_mass,
                ngo_averaged_mass,
                ngo_density_mass,
                reference,
            });
        }
    }
    out.timings.finish()?;
    Ok(out)
}

fn solver_dt(p: &ngo_core::hopping::HoppingProblem<f64>) -> f64 {
    p.steps().1
}

fn check_kinetic(state: &KineticState<f64>) -> Result<()> {
    if state.fields.iter().flatten().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(NgoError::NonFinite("the hopping solver").into())
    }
}

/// Reconstructed solution of single NGO runs, one row per node.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolutionRow {
    pub epsilon: f64,
    pub n_ts: usize,
    pub x: f64,
    pub phase: f64,
    pub re_u1: f64,
    pub im_u1: f64,
    pub re_u2: f64,
    pub im_u2: f64,
}

/// NGO runs without a reference: solution rows and the stepping wall time
/// of each `(ε, N_ts)` pair.
pub fn run_solutions(cfg: &RunConfig) -> Result<(Vec<SolutionRow>, Vec<(f64, usize, f64)>)> {
    require(cfg, &[ProblemKind::Scalar, ProblemKind::System], "a single run")?;
    let mut rows = Vec::new();
    let mut timings = Vec::new();
    for &eps in &cfg.epsilons {
        for &n in &cfg.n_ts {
            let run = run_ngo(cfg, eps, n)?;
            let zero = vec![C::new(0.0, 0.0); run.grid.len()];
            let u2 = run.components.get(1).unwrap_or(&zero);
            for (j, x) in run.grid.nodes().into_iter().enumerate() {
                let (a, b) = (run.components[0][j], u2[j]);
                rows.push(SolutionRow {
                    epsilon: eps,
                    n_ts: n,
                    x,
                    phase: run.phase[j],
                    re_u1: a.re,
                    im_u1: a.im,
                    re_u2: b.re,
                    im_u2: b.im,
                });
            }
            timings.push((eps, n, run.wall_seconds));
        }
    }
    Ok((rows, timings))
}
