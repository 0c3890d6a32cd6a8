//! Builds solver problems and resolved references from a [`RunConfig`].

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use ngo_core::hopping::HoppingProblem;
use ngo_core::scalar::{solve_characteristics_reference, solve_direct_reference, solve_spectral_reference_with, ScalarProblem};
use ngo_core::system::{system_direct_reference_with, DirectSettings, Splitting, SystemProblem, Transport};
use ngo_core::{Fourier, PeriodicGrid};
use num_complex::Complex64 as C;
use rayon::prelude::*;

use crate::config::{ReferenceSolver, RunConfig};
use crate::error::{HarnessError, Result};
use crate::registry;

/// Cap on automatically chosen reference grids.
pub const MAX_AUTO_NODES: usize = 20_000;

fn max_abs_on(f: &dyn Fn(f64) -> f64, grid: &PeriodicGrid<f64>) -> f64 {
    grid.nodes().iter().fold(0.0, |m, &x| m.max(f(x).abs()))
}

/// `max |f'|` by central differences on 4096 points of the period.
fn max_slope(f: &dyn Fn(f64) -> f64, lower: f64, length: f64) -> f64 {
    let n = 4096;
    let h = length / n as f64;
    (0..n)
        .map(|k| {
            let x = lower + k as f64 * h;
            ((f(x + h) - f(x - h)) / (2.0 * h)).abs()
        })
        .fold(0.0, f64::max)
}

pub fn scalar_problem(cfg: &RunConfig, epsilon: f64, n: usize) -> Result<ScalarProblem<f64>> {
    let xg = PeriodicGrid::new(cfg.domain.0, cfg.domain.1, n)?;
    let s = &cfg.scalar;
    let c = registry::real(&s.c, epsilon)?;
    let dt = cfg.dt_rule.dt(xg.spacing(), max_abs_on(&*c, &xg));
    let mut p = ScalarProblem::new(xg, PeriodicGrid::tau(cfg.n_tau)?, epsilon, dt, cfg.t_final);
    p.c = c;
    p.a = registry::real(&s.a, epsilon)?;
    p.r = registry::source(&s.r)?;
    p.alpha = registry::data(&s.alpha)?;
    p.beta = registry::real(&s.beta, epsilon)?;
    p.phase_method = cfg.phase;
    p.clamp = cfg.clamp;
    Ok(p)
}

pub fn system_problem(cfg: &RunConfig, epsilon: f64, n: usize) -> Result<SystemProblem<f64>> {
    let xg = PeriodicGrid::new(cfg.domain.0, cfg.domain.1, n)?;
    let s = &cfg.system;
    let a1 = registry::real(&s.a1, epsilon)?;
    let a2 = registry::real(&s.a2, epsilon)?;
    let speed = max_abs_on(&*a1, &xg).max(max_abs_on(&*a2, &xg));
    let dt = cfg.dt_rule.dt(xg.spacing(), speed);
    let mut p = SystemProblem::new(xg, PeriodicGrid::tau(cfg.n_tau)?, epsilon, dt, cfg.t_final);
    p.a1 = a1;
    p.a2 = a2;
    p.big_e = registry::real(&s.e, epsilon)?;
    p.cmat = s.cmat;
    p.f1_in = registry::data(&s.f1)?;
    p.f2_in = registry::data(&s.f2)?;
    p.phase_method = cfg.phase;
    p.clamp = cfg.clamp;
    p.drift = s.drift;
    Ok(p)
}

/// Hopping problem on `domain²` with `nx × np` nodes, `ntau` τ-nodes and step `dt`.
pub fn hopping_problem(
    cfg: &RunConfig,
    epsilon: f64,
    nx: usize,
    np: usize,
    ntau: usize,
    dt: f64,
) -> Result<HoppingProblem<f64>> {
    let (lo, len) = cfg.domain;
    let h = &cfg.hopping;
    let mut p = HoppingProblem::new(
        PeriodicGrid::new(lo, len, nx)?,
        PeriodicGrid::new(lo, len, np)?,
        PeriodicGrid::tau(ntau)?,
        epsilon,
        dt,
        cfg.t_final,
    );
    p.big_e = registry::real(&h.e, epsilon)?;
    p.upot = registry::real(&h.u, epsilon)?;
    p.bi = registry::coupling(&h.bi)?;
    let (fp, fm, fi) = registry::kinetic(&h.data)?;
    p.f_plus_in = fp;
    p.f_minus_in = fm;
    p.f_i_in = fi;
    p.tau_integrator = h.tau_integrator;
    p.clamp = cfg.clamp;
    Ok(p)
}

/// Resolved discretisation of a grid reference for one ε.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReferenceGrid {
    pub n_d: usize,
    pub dt_d: f64,
    /// Hopping momentum nodes.
    pub n_p: usize,
}

impl ReferenceGrid {
    pub fn describe(&self, solver: ReferenceSolver) -> String {
        match solver {
            ReferenceSolver::Characteristics => "ref=characteristics".into(),
            ReferenceSolver::Kinetic => {
                format!("ref=kinetic:n_x={}:n_p={}:dt={}", self.n_d, self.n_p, self.dt_d)
            }
            s => format!("ref={}:n_d={}:dt_d={}", s.as_str(), self.n_d, self.dt_d),
        }
    }
}

/// Reference grid for `epsilon`, checked to resolve it.
pub fn reference_grid(cfg: &RunConfig, epsilon: f64) -> Result<ReferenceGrid> {
    let r = &cfg.reference;
    let (lo, len) = cfg.domain;
    let explicit = r.n_d.is_some();
    let unresolved = |reason: String| Err(HarnessError::Unresolved { epsilon, reason });
    let even = |n: usize| n + n % 2;
    match r.solver {
        ReferenceSolver::Characteristics => Ok(ReferenceGrid { n_d: 0, dt_d: 0.0, n_p: 0 }),
        ReferenceSolver::SpectralRk4 | ReferenceSolver::Direct | ReferenceSolver::StrangSpectral | ReferenceSolver::LieUpwind => {
            let scalar = matches!(r.solver, ReferenceSolver::SpectralRk4 | ReferenceSolver::Direct);
            let spectral = matches!(r.solver, ReferenceSolver::SpectralRk4 | ReferenceSolver::StrangSpectral);
            let (speed, rate): (Vec<_>, _) = if scalar {
                (vec![registry::real(&cfg.scalar.c, epsilon)?], registry::real(&cfg.scalar.a, epsilon)?)
            } else {
                let s = &cfg.system;
                (vec![registry::real(&s.a1, epsilon)?, registry::real(&s.a2, epsilon)?], registry::real(&s.e, epsilon)?)
            };
            let n_d = r.n_d.unwrap_or_else(|| match r.solver {
                ReferenceSolver::SpectralRk4 => even((20.0 / epsilon).ceil() as usize).clamp(256, MAX_AUTO_NODES),
                ReferenceSolver::StrangSpectral => (1.0 / epsilon).ceil().max(256.0).min(MAX_AUTO_NODES as f64) as usize,
                _ => even((3.0 * len / epsilon).ceil() as usize).clamp(256, MAX_AUTO_NODES),
            });
            let n_d = if r.n_d.is_none() && r.solver == ReferenceSolver::StrangSpectral {
                n_d.next_power_of_two()
            } else {
                n_d
            };
            let grid = PeriodicGrid::new(lo, len, n_d)?;
            let dx = grid.spacing();
            let cmax = speed.iter().map(|f| max_abs_on(&**f, &grid)).fold(0.0, f64::max);
            let amax = max_abs_on(&*rate, &grid);
            let dt_d = r.dt_d.unwrap_or_else(|| {
                let mut dt = 0.1 * epsilon / amax.max(1e-300);
                if !spectral || scalar {
                    dt = dt.min(0.5 * dx / cmax.max(1e-300));
                }
                dt.min(1e-3)
            });
            if spectral {
                let wavenumber = max_slope(&*rate, lo, len) * cfg.t_final / epsilon;
                let nyquist = std::f64::consts::PI / dx;
                if wavenumber > nyquist / 2.0 {
                    return unresolved(format!(
                        "phase wavenumber {wavenumber:.1} exceeds half the Nyquist wavenumber {nyquist:.1} of n_d = {n_d}"
                    ));
                }
                if dt_d * amax / epsilon > 0.5 {
                    return unresolved(format!("dt_d = {dt_d} exceeds half an oscillation radian (max a/ε = {})", amax / epsilon));
                }
            } else if !explicit && dx > epsilon / 3.0 {
                return unresolved(format!("dx = {dx:.3e} > ε/3 with the node cap {MAX_AUTO_NODES}"));
            }
            Ok(ReferenceGrid { n_d, dt_d, n_p: 0 })
        }
        ReferenceSolver::Kinetic => Ok(ReferenceGrid {
            n_d: r.n_d.unwrap_or_else(|| ((16.0 / epsilon).ceil() as usize).max(256).next_power_of_two()),
            dt_d: r.dt_d.unwrap_or((epsilon / 16.0).min(0.005)),
            n_p: r.n_p.unwrap_or_else(|| {
                ((2.0 * cfg.t_final * cfg.t_final / epsilon).ceil() as usize).max(128).next_power_of_two()
            }),
        }),
    }
}

/// A reference solution on its own grid.
#[derive(Clone, Debug)]
pub struct Reference {
    pub grid: PeriodicGrid<f64>,
    pub components: Vec<Vec<C>>,
}

impl Reference {
    /// Each component at the nodes of `target`: subsampled when the grids
    /// nest, trigonometric interpolation otherwise.
    pub fn restrict(&self, target: &PeriodicGrid<f64>) -> Vec<Vec<C>> {
        restrict(&self.grid, &self.components, target)
    }
}

pub fn restrict(grid: &PeriodicGrid<f64>, components: &[Vec<C>], target: &PeriodicGrid<f64>) -> Vec<Vec<C>> {
    let (n, m) = (grid.len(), target.len());
    let nested = n % m == 0 && grid.lower() == target.lower() && grid.length() == target.length();
    if nested {
        return components.iter().map(|u| u.iter().step_by(n / m).copied().collect()).collect();
    }
    let fourier = Fourier::new(*grid);
    let nodes = target.nodes();
    components
        .iter()
        .map(|u| {
            let coeffs = fourier.coefficients(u);
            nodes.par_iter().map(|&x| fourier.evaluate(&coeffs, x)).collect()
        })
        .collect()
}

type CacheKey = (String, u64, usize);

/// Memoised references keyed by settings, ε and (for node-wise oracles) the
/// NGO resolution. Reuse gives results identical to a fresh computation.
#[derive(Default)]
pub struct ReferenceCache {
    map: Mutex<BTreeMap<CacheKey, Arc<Reference>>>,
}

impl ReferenceCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.map.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn key(cfg: &RunConfig, epsilon: f64, n: usize) -> Result<CacheKey> {
        let grid = reference_grid(cfg, epsilon)?;
        let coefficients = match cfg.kind {
            crate::config::ProblemKind::System => format!("{:?}", cfg.system),
            _ => format!("{:?}", cfg.scalar),
        };
        let n = if cfg.reference.solver == ReferenceSolver::Characteristics { n } else { 0 };
        Ok((
            format!("{coefficients};{:?};{};{}", cfg.domain, cfg.t_final, grid.describe(cfg.reference.solver)),
            epsilon.to_bits(),
            n,
        ))
    }

    /// References for every `(ε, n)` pair, computed in parallel where missing.
    pub fn prepare(&self, cfg: &RunConfig) -> Result<()> {
        let mut missing = Vec::new();
        for &eps in &cfg.epsilons {
            for &n in &cfg.n_ts {
                let key = Self::key(cfg, eps, n)?;
                if !self.map.lock().expect("cache lock").contains_key(&key) && !missing.iter().any(|(k, _, _)| *k == key) {
                    missing.push((key, eps, n));
                }
            }
        }
        let built: Vec<_> = missing
            .into_par_iter()
            .map(|(key, eps, n)| compute_reference(cfg, eps, n).map(|r| (key, Arc::new(r))))
            .collect::<Result<_>>()?;
        self.map.lock().expect("cache lock").extend(built);
        Ok(())
    }

    pub fn get(&self, cfg: &RunConfig, epsilon: f64, n: usize) -> Result<Arc<Reference>> {
        let key = Self::key(cfg, epsilon, n)?;
        if let Some(r) = self.map.lock().expect("cache lock").get(&key) {
            return Ok(r.clone());
        }
        let r = Arc::new(compute_reference(cfg, epsilon, n)?);
        self.map.lock().expect("cache lock").insert(key, r.clone());
        Ok(r)
    }
}

/// Reference solution at `t_final` for a scalar or system configuration.
pub fn compute_reference(cfg: &RunConfig, epsilon: f64, n: usize) -> Result<Reference> {
    let grid = reference_grid(cfg, epsilon)?;
    let t_f = cfg.t_final;
    match cfg.reference.solver {
        ReferenceSolver::Characteristics => {
            let p = scalar_problem(cfg, epsilon, n)?;
            let u = solve_characteristics_reference(&p, t_f, &p.xgrid.nodes())?;
            Ok(Reference { grid: p.xgrid, components: vec![u] })
        }
        ReferenceSolver::SpectralRk4 | ReferenceSolver::Direct => {
            let mut p = scalar_problem(cfg, epsilon, grid.n_d)?;
            p.dt = grid.dt_d;
            let u = if cfg.reference.solver == ReferenceSolver::Direct {
                solve_direct_reference(&p, t_f)?
            } else {
                solve_spectral_reference_with(&p, t_f, |_, _| {})?
            };
            Ok(Reference { grid: p.xgrid, components: vec![u] })
        }
        ReferenceSolver::StrangSpectral | ReferenceSolver::LieUpwind => {
            let p = system_problem(cfg, epsilon, grid.n_d)?;
            let (transport, splitting) = if cfg.reference.solver == ReferenceSolver::StrangSpectral {
                (Transport::Spectral, Splitting::Strang)
            } else {
                (Transport::Upwind, Splitting::Lie)
            };
            let settings = DirectSettings { grid: p.xgrid, dt: grid.dt_d, transport, splitting };
            let (u1, u2) = system_direct_reference_with(&p, t_f, settings, |_, _, _| {})?;
            Ok(Reference { grid: p.xgrid, components: vec![u1, u2] })
        }
        ReferenceSolver::Kinetic => Err(HarnessError::Config("kinetic references are built by the hopping run".into())),
    }
}
