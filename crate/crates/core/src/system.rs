//! The 2×2 system
//!
//! ```text
//! ∂_t u + A(x) ∂_x u + R(u) = (i E(x)/ε) D u + C u,   A = diag(a₁, a₂),  D = diag(0, −1),
//! ```
//!
//! reformulated with one phase `S` (`∂_t S + a₂ ∂_x S = E`) and the profiles
//! `U₁(t, x, τ)`, `V₂ = e^{iτ} U₂`, so that `u₁ = U₁(S/ε)` and
//! `u₂ = e^{−iS/ε} V₂(S/ε)`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex;
use rayon::prelude::*;

use crate::coeff::{complex_fn, constant, ClampPolicy, ComplexFn, PairSourceFn, RealFn};
use crate::error::{NgoError, Result};
use crate::expm::{expm_scaled, matvec, Matrix};
use crate::phase::{PhaseMethod, PhaseSolver};
use crate::real::{cis, fast_phase, Real};
use crate::scalar::{positive, uniform_steps};
use crate::spectral::{Fourier, PeriodicGrid, ProfileField};
use crate::InitMode;

/// Sign in front of `(a₁ − a₂) ∂_x S` in the stiffness of `U₁`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum DriftSign {
    /// `E + (a₁ − a₂) ∂_x S`, from the chain rule with `∂_t S + a₂ ∂_x S = E`.
    #[default]
    Plus,
    /// `E − (a₁ − a₂) ∂_x S`.
    Minus,
}

impl FromStr for DriftSign {
    type Err = NgoError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plus" => Ok(DriftSign::Plus),
            "minus" => Ok(DriftSign::Minus),
            other => Err(NgoError::InvalidParameter {
                name: "drift_sign",
                reason: format!("unknown sign `{other}` (expected plus or minus)"),
            }),
        }
    }
}

#[derive(Clone)]
pub struct SystemProblem<T: Real> {
    pub a1: RealFn<T>,
    pub a2: RealFn<T>,
    pub big_e: RealFn<T>,
    pub cmat: [[T; 2]; 2],
    pub rfun: Option<PairSourceFn<T>>,
    pub f1_in: ComplexFn<T>,
    pub f2_in: ComplexFn<T>,
    pub epsilon: T,
    pub xgrid: PeriodicGrid<T>,
    pub taugrid: PeriodicGrid<T>,
    pub dt: T,
    pub t_final: T,
    pub phase_method: PhaseMethod,
    pub clamp: ClampPolicy<T>,
    pub drift: DriftSign,
}

impl<T: Real> fmt::Debug for SystemProblem<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemProblem")
            .field("cmat", &self.cmat)
            .field("epsilon", &self.epsilon)
            .field("xgrid", &self.xgrid)
            .field("taugrid", &self.taugrid)
            .field("dt", &self.dt)
            .field("t_final", &self.t_final)
            .field("phase_method", &self.phase_method)
            .finish_non_exhaustive()
    }
}

impl<T: Real> SystemProblem<T> {
    /// Zero speeds, gap and coupling; unit data.
    pub fn new(xgrid: PeriodicGrid<T>, taugrid: PeriodicGrid<T>, epsilon: T, dt: T, t_final: T) -> Self {
        let one = complex_fn(|_| Complex::new(T::one(), T::zero()));
        Self {
            a1: constant(T::zero()),
            a2: constant(T::zero()),
            big_e: constant(T::zero()),
            cmat: [[T::zero(); 2]; 2],
            rfun: None,
            f1_in: one.clone(),
            f2_in: one,
            epsilon,
            xgrid,
            taugrid,
            dt,
            t_final,
            phase_method: PhaseMethod::default(),
            clamp: ClampPolicy::default(),
            drift: DriftSign::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("epsilon", self.epsilon)?;
        positive("dt", self.dt)?;
        positive("t_final", self.t_final)?;
        if !self.taugrid.is_tau_grid() {
            return Err(NgoError::InvalidGrid("the τ-grid must cover [0, 2π)".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> (usize, T) {
        uniform_steps(self.t_final, self.dt)
    }

    /// `max(|a₁|, |a₂|)·dt/dx` at the nodes of `grid`.
    pub fn courant_on(&self, grid: &PeriodicGrid<T>, dt: T) -> T {
        let amax = grid
            .nodes()
            .iter()
            .fold(T::zero(), |m, &x| m.max((self.a1)(x).abs()).max((self.a2)(x).abs()));
        amax * dt / grid.spacing()
    }

    pub fn check_cfl(&self) -> Result<()> {
        let courant = self.courant_on(&self.xgrid, self.steps().1);
        if courant >= T::one() {
            return Err(NgoError::Cfl { courant: courant.to_f64().unwrap_or(f64::NAN) });
        }
        Ok(())
    }

    pub fn phase_solver(&self) -> PhaseSolver<T> {
        PhaseSolver::new(self.xgrid, self.a2.clone(), self.big_e.clone(), constant(T::zero()), self.phase_method)
    }

    fn source_pair(&self, u1: Complex<T>, u2: Complex<T>) -> (Complex<T>, Complex<T>) {
        match &self.rfun {
            Some(r) => r(u1, u2),
            None => (Complex::new(T::zero(), T::zero()), Complex::new(T::zero(), T::zero())),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SystemState<T> {
    pub u1: ProfileField<T>,
    pub v2: ProfileField<T>,
    pub s: Vec<T>,
    pub t: T,
    /// Node-steps at which the stiffness of `U₁` was negative.
    pub negative_stiffness: usize,
}

/// Corrected (or raw) initial profiles `(U₁, V₂)`.
pub fn system_well_prepared_init<T: Real>(
    problem: &SystemProblem<T>,
    init: InitMode,
) -> Result<(ProfileField<T>, ProfileField<T>)> {
    problem.validate()?;
    let p = problem;
    let nodes = p.xgrid.nodes();
    let (c12, c21) = (p.cmat[0][1], p.cmat[1][0]);
    let eps = p.epsilon;
    let factors = match init {
        InitMode::Uncorrected => vec![T::zero(); nodes.len()],
        InitMode::Corrected => p.clamp.ratios(
            "E² − ε²C₁₂C₂₁",
            |j| eps * (p.big_e)(nodes[j]),
            |j| {
                let e = (p.big_e)(nodes[j]);
                e * e - eps * eps * c12 * c21
            },
            nodes.len(),
        )?,
    };
    let i = Complex::new(T::zero(), T::one());
    let one = Complex::new(T::one(), T::zero());
    let index = |x: T| -> usize {
        let j = ((x - p.xgrid.lower()) / p.xgrid.spacing()).round().to_usize().unwrap_or(0);
        j.min(nodes.len() - 1)
    };
    let u1 = ProfileField::from_fn(p.xgrid, p.taugrid, |x, t| {
        let f = factors[index(x)];
        (p.f1_in)(x) + i * (cis(-t) - one) * (p.f2_in)(x) * (f * c12)
    })?;
    let v2 = ProfileField::from_fn(p.xgrid, p.taugrid, |x, t| {
        let f = factors[index(x)];
        i * (one - cis(t)) * (p.f1_in)(x) * (f * c21) + (p.f2_in)(x)
    })?;
    Ok((u1, v2))
}

/// Precomputed operators for stepping one [`SystemProblem`].
#[derive(Clone, Debug)]
pub struct SystemSolver<T: Real> {
    problem: SystemProblem<T>,
    tau: Fourier<T>,
    x: Fourier<T>,
    rotation: Vec<Complex<T>>,
    a1: Vec<T>,
    a2: Vec<T>,
    e: Vec<T>,
    steps: usize,
    dt: T,
    phase: PhaseSolver<T>,
}

impl<T: Real> SystemSolver<T> {
    pub fn new(problem: &SystemProblem<T>) -> Result<Self> {
        problem.validate()?;
        problem.check_cfl()?;
        let (steps, dt) = problem.steps();
        let phase = problem.phase_solver();
        phase.check(dt)?;
        let nodes = problem.xgrid.nodes();
        Ok(Self {
            tau: Fourier::new(problem.taugrid),
            x: Fourier::new(problem.xgrid),
            rotation: problem.taugrid.nodes().into_iter().map(cis).collect(),
            a1: nodes.iter().map(|&x| (problem.a1)(x)).collect(),
            a2: nodes.iter().map(|&x| (problem.a2)(x)).collect(),
            e: nodes.iter().map(|&x| (problem.big_e)(x)).collect(),
            steps,
            dt,
            phase,
            problem: problem.clone(),
        })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn initial_state(&self, init: InitMode) -> Result<SystemState<T>> {
        let (u1, v2) = system_well_prepared_init(&self.problem, init)?;
        Ok(SystemState { u1, v2, s: self.phase.initial(), t: T::zero(), negative_stiffness: 0 })
    }

    /// Stiffness `dt·[E ± (a₁ − a₂) ∂_x S]/ε` of `U₁` at every node.
    pub fn stiffness_u1(&self, s: &[T]) -> Vec<T> {
        let ds = self.x.derivative_real(s);
        let sign = match self.problem.drift {
            DriftSign::Plus => T::one(),
            DriftSign::Minus => -T::one(),
        };
        (0..s.len())
            .map(|j| self.dt * (self.e[j] + sign * (self.a1[j] - self.a2[j]) * ds[j]) / self.problem.epsilon)
            .collect()
    }

    pub fn step(&self, state: &SystemState<T>) -> SystemState<T> {
        let p = &self.problem;
        let (n, m) = (p.xgrid.len(), p.taugrid.len());
        let inv_dx = T::one() / p.xgrid.spacing();
        let dt = self.dt;
        let c = p.cmat;
        let mu1 = self.stiffness_u1(&state.s);
        let negative = mu1.iter().filter(|v| **v < T::zero()).count();
        let (old1, old2) = (&state.u1.values, &state.v2.values);
        let zero = Complex::new(T::zero(), T::zero());
        let mut new1 = vec![zero; n * m];
        let mut new2 = vec![zero; n * m];
        new1.par_chunks_mut(m)
            .zip(new2.par_chunks_mut(m))
            .enumerate()
            .for_each(|(j, (out1, out2))| {
                let (a1, a2) = (self.a1[j], self.a2[j]);
                for l in 0..m {
                    let rot = self.rotation[l];
                    let u1 = old1[j * m + l];
                    let v2 = old2[j * m + l];
                    let u2 = rot.conj() * v2;
                    let (r1, r2) = p.source_pair(u1, u2);
                    let d1 = upwind(old1, m, n, j, l, a1, inv_dx);
                    let d2 = upwind(old2, m, n, j, l, a2, inv_dx);
                    out1[l] = u1 - (d1 * a1 + r1 - u1 * c[0][0] - u2 * c[0][1]) * dt;
                    out2[l] = v2 - (d2 * a2 + rot * r2 - rot * u1 * c[1][0] - v2 * c[1][1]) * dt;
                }
                self.tau.q_inverse_in_place(out1, mu1[j]);
                self.tau.q_inverse_in_place(out2, dt * self.e[j] / p.epsilon);
            });
        let mut s = state.s.clone();
        self.phase.advance(&mut s, state.t, dt);
        let step = (state.t / dt).round().to_usize().unwrap_or(0) + 1;
        SystemState {
            u1: ProfileField { xgrid: p.xgrid, taugrid: p.taugrid, values: new1 },
            v2: ProfileField { xgrid: p.xgrid, taugrid: p.taugrid, values: new2 },
            s,
            t: T::count(step) * dt,
            negative_stiffness: state.negative_stiffness + negative,
        }
    }

    pub fn run(&self, init: InitMode) -> Result<SystemState<T>> {
        let mut state = self.initial_state(init)?;
        for _ in 0..self.steps {
            state = self.step(&state);
        }
        let bad = |v: &[Complex<T>]| v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite());
        if bad(&state.u1.values) || bad(&state.v2.values) {
            return Err(NgoError::NonFinite("the system scheme"));
        }
        Ok(state)
    }

    /// `(u₁, u₂)` at the nodes.
    pub fn reconstruct(&self, state: &SystemState<T>) -> (Vec<Complex<T>>, Vec<Complex<T>>) {
        system_reconstruct_with(&self.tau, state, self.problem.epsilon)
    }
}

#[inline]
fn upwind<T: Real>(values: &[Complex<T>], m: usize, n: usize, j: usize, l: usize, c: T, inv_dx: T) -> Complex<T> {
    if c >= T::zero() {
        (values[j * m + l] - values[((j + n - 1) % n) * m + l]) * inv_dx
    } else {
        (values[((j + 1) % n) * m + l] - values[j * m + l]) * inv_dx
    }
}

fn system_reconstruct_with<T: Real>(
    tau: &Fourier<T>,
    state: &SystemState<T>,
    epsilon: T,
) -> (Vec<Complex<T>>, Vec<Complex<T>>) {
    let m = state.u1.ntau();
    (0..state.s.len())
        .into_par_iter()
        .map(|j| {
            let t = fast_phase(state.s[j], epsilon);
            let u1 = tau.evaluate(&tau.coefficients(&state.u1.values[j * m..(j + 1) * m]), t);
            let v2 = tau.evaluate(&tau.coefficients(&state.v2.values[j * m..(j + 1) * m]), t);
            (u1, v2 * cis(-t))
        })
        .unzip()
}

/// `(u₁, u₂)` from a state.
pub fn system_reconstruct<T: Real>(
    state: &SystemState<T>,
    problem: &SystemProblem<T>,
) -> (Vec<Complex<T>>, Vec<Complex<T>>) {
    system_reconstruct_with(&Fourier::new(problem.taugrid), state, problem.epsilon)
}

/// One step of the system scheme.
pub fn system_step<T: Real>(state: &SystemState<T>, problem: &SystemProblem<T>) -> Result<SystemState<T>> {
    Ok(SystemSolver::new(problem)?.step(state))
}

/// The phase after one step from `state`.
pub fn system_phase_step<T: Real>(state: &SystemState<T>, problem: &SystemProblem<T>) -> Result<Vec<T>> {
    let (_, dt) = problem.steps();
    let phase = problem.phase_solver();
    phase.check(dt)?;
    let mut s = state.s.clone();
    phase.advance(&mut s, state.t, dt);
    Ok(s)
}

/// Transport substep of the direct solver.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Transport {
    /// First-order upwind, any speeds, CFL-limited.
    #[default]
    Upwind,
    /// Exact Fourier shift; constant speeds only.
    Spectral,
}

/// Composition of the transport and source substeps.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Splitting {
    #[default]
    Lie,
    Strang,
}

/// Settings of [`system_direct_reference`]; `grid` and `dt` replace the
/// problem's discretisation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DirectSettings<T> {
    pub grid: PeriodicGrid<T>,
    pub dt: T,
    pub transport: Transport,
    pub splitting: Splitting,
}

/// Resolved direct solver: exact `exp(dt[(iE/ε)D + C])` per node and
/// transport of each component, composed per `settings`. `observe` sees the
/// solution after the initial data and after every step.
pub fn system_direct_reference_with<T: Real>(
    problem: &SystemProblem<T>,
    t_final: T,
    settings: DirectSettings<T>,
    mut observe: impl FnMut(usize, &[Complex<T>], &[Complex<T>]),
) -> Result<(Vec<Complex<T>>, Vec<Complex<T>>)> {
    problem.validate()?;
    positive("t_final", t_final)?;
    let grid = settings.grid;
    let (steps, dt) = uniform_steps(t_final, settings.dt);
    let nodes = grid.nodes();
    let a1: Vec<T> = nodes.iter().map(|&x| (problem.a1)(x)).collect();
    let a2: Vec<T> = nodes.iter().map(|&x| (problem.a2)(x)).collect();
    let fourier = Fourier::new(grid);
    match settings.transport {
        Transport::Upwind => {
            let courant = problem.courant_on(&grid, dt);
            if courant >= T::one() {
                return Err(NgoError::Cfl { courant: courant.to_f64().unwrap_or(f64::NAN) });
            }
        }
        Transport::Spectral => {
            if a1.iter().any(|v| *v != a1[0]) || a2.iter().any(|v| *v != a2[0]) {
                return Err(NgoError::Unsupported("spectral transport needs constant speeds".into()));
            }
        }
    }
    let source_dt = match settings.splitting {
        Splitting::Lie => dt,
        Splitting::Strang => dt / T::lit(2.0),
    };
    let c = problem.cmat;
    let propagators: Vec<Matrix<Complex<T>, 2>> = nodes
        .par_iter()
        .map(|&x| {
            let e = (problem.big_e)(x) / problem.epsilon;
            let m = [
                [Complex::new(c[0][0], T::zero()), Complex::new(c[0][1], T::zero())],
                [Complex::new(c[1][0], T::zero()), Complex::new(c[1][1], -e)],
            ];
            expm_scaled(&m, source_dt)
        })
        .collect();
    let source = |u1: &mut [Complex<T>], u2: &mut [Complex<T>]| {
        u1.par_iter_mut().zip(u2.par_iter_mut()).zip(propagators.par_iter()).for_each(|((a, b), m)| {
            let [x, y] = matvec(m, &[*a, *b]);
            *a = x;
            *b = y;
        });
    };
    let transport = |u: &mut Vec<Complex<T>>, speed: &[T]| match settings.transport {
        Transport::Spectral => *u = fourier.advect(u, speed[0], dt),
        Transport::Upwind => {
            let n = u.len();
            let inv_dx = T::one() / grid.spacing();
            let old = u.clone();
            for j in 0..n {
                u[j] = old[j] - upwind(&old, 1, n, j, 0, speed[j], inv_dx) * speed[j] * dt;
            }
        }
    };
    let mut u1: Vec<_> = nodes.iter().map(|&x| (problem.f1_in)(x)).collect();
    let mut u2: Vec<_> = nodes.iter().map(|&x| (problem.f2_in)(x)).collect();
    observe(0, &u1, &u2);
    for step in 0..steps {
        source(&mut u1, &mut u2);
        if problem.rfun.is_some() {
            for (a, b) in u1.iter_mut().zip(u2.iter_mut()) {
                let (r1, r2) = problem.source_pair(*a, *b);
                *a = *a - r1 * dt;
                *b = *b - r2 * dt;
            }
        }
        transport(&mut u1, &a1);
        transport(&mut u2, &a2);
        if settings.splitting == Splitting::Strang {
            source(&mut u1, &mut u2);
        }
        observe(step + 1, &u1, &u2);
    }
    let bad = |v: &[Complex<T>]| v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite());
    if bad(&u1) || bad(&u2) {
        return Err(NgoError::NonFinite("the direct system solver"));
    }
    Ok((u1, u2))
}

/// Lie splitting with upwind transport on the problem grid and step.
pub fn system_direct_reference<T: Real>(
    problem: &SystemProblem<T>,
    t_final: T,
) -> Result<(Vec<Complex<T>>, Vec<Complex<T>>)> {
    let settings = DirectSettings {
        grid: problem.xgrid,
        dt: problem.dt,
        transport: Transport::Upwind,
        splitting: Splitting::Lie,
    };
    system_direct_reference_with(problem, t_final, settings, |_, _, _| {})
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::real_fn;
    use std::f64::consts::TAU;

    type C = Complex<f64>;

    fn preset(n: usize, eps: f64) -> SystemProblem<f64> {
        let xg = PeriodicGrid::new(0.0, TAU, n).unwrap();
        let mut p = SystemProblem::new(xg, PeriodicGrid::tau(32).unwrap(), eps, xg.spacing() / 8.0, 0.1);
        p.a1 = constant(1.0);
        p.a2 = constant(4.0);
        p.big_e = real_fn(|x: f64| 1.5 + x.cos());
        p.cmat = [[0.0, 1.0], [-1.0, 0.0]];
        let f = complex_fn(|x: f64| C::new(1.0 + 0.5 * x.cos(), x.sin()));
        p.f1_in = f.clone();
        p.f2_in = f;
        p
    }

    #[test]
    fn corrected_data_matches_printed_formula() {
        let p = preset(16, 0.1);
        let (u1, v2) = system_well_prepared_init(&p, InitMode::Corrected).unwrap();
        let f1 = (p.f1_in)(0.0);
        let f2 = (p.f2_in)(0.0);
        let fac = 0.1 * 2.5 / (6.25 + 0.01);
        for (l, t) in p.taugrid.nodes().into_iter().enumerate() {
            let e = C::new(0.0, -t).exp();
            let expect1 = f1 + C::new(0.0, fac) * (e - 1.0) * f2;
            let expect2 = C::new(0.0, -fac) * (e - 1.0) * f1 + e * f2;
            assert!((u1.slice(0)[l] - expect1).norm() < 1e-14);
            assert!((v2.slice(0)[l] * e - expect2).norm() < 1e-14);
        }
    }

    #[test]
    fn no_coupling_gives_raw_data() {
        let mut p = preset(8, 0.1);
        p.cmat = [[0.3, 0.0], [0.0, -0.2]];
        let (u1, v2) = system_well_prepared_init(&p, InitMode::Corrected).unwrap();
        for j in 0..8 {
            let x = p.xgrid.node(j);
            assert!(u1.slice(j).iter().all(|z| (z - (p.f1_in)(x)).norm() < 1e-15));
            assert!(v2.slice(j).iter().all(|z| (z - (p.f2_in)(x)).norm() < 1e-15));
        }
    }

    #[test]
    fn reconstruction_at_start_is_raw_data() {
        let p = preset(16, 0.01);
        let solver = SystemSolver::new(&p).unwrap();
        let state = solver.initial_state(InitMode::Corrected).unwrap();
        let (u1, u2) = solver.reconstruct(&state);
        for j in 0..16 {
            let x = p.xgrid.node(j);
            assert!((u1[j] - (p.f1_in)(x)).norm() < 1e-12);
            assert!((u2[j] - (p.f2_in)(x)).norm() < 1e-12);
        }
    }

    #[test]
    fn coupling_only_step_is_explicit_euler() {
        let mut p = preset(8, 0.1);
        p.a1 = constant(0.0);
        p.a2 = constant(0.0);
        p.big_e = constant(0.0);
        let solver = SystemSolver::new(&p).unwrap();
        let u1 = ProfileField::from_fn(p.xgrid, p.taugrid, |x, t| C::new(x.cos(), t.sin())).unwrap();
        let v2 = ProfileField::from_fn(p.xgrid, p.taugrid, |x, t| C::new(t.cos(), x)).unwrap();
        let state = SystemState { u1: u1.clone(), v2: v2.clone(), s: vec![0.0; 8], t: 0.0, negative_stiffness: 0 };
        let next = solver.step(&state);
        let dt = solver.dt();
        let taus = p.taugrid.nodes();
        for j in 0..8 {
            for (l, &t) in taus.iter().enumerate() {
                let e = C::new(0.0, t).exp();
                let expect1 = u1.slice(j)[l] + e.conj() * v2.slice(j)[l] * dt;
                let expect2 = v2.slice(j)[l] - e * u1.slice(j)[l] * dt;
                assert!((next.u1.slice(j)[l] - expect1).norm() < 1e-14);
                assert!((next.v2.slice(j)[l] - expect2).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn decoupled_single_mode_decays() {
        let mut p = preset(8, 0.01);
        p.cmat = [[0.0; 2]; 2];
        p.big_e = constant(2.0);
        p.a1 = constant(1.0);
        p.a2 = constant(1.0);
        let solver = SystemSolver::new(&p).unwrap();
        let u1 = ProfileField::from_fn(p.xgrid, p.taugrid, |x, _| C::new(x.sin(), 0.0)).unwrap();
        let v2 = ProfileField::from_fn(p.xgrid, p.taugrid, |_, t| C::new(0.0, t).exp()).unwrap();
        let state = SystemState { u1, v2: v2.clone(), s: vec![0.0; 8], t: 0.0, negative_stiffness: 0 };
        let next = solver.step(&state);
        let mu2 = solver.dt() * 2.0 / 0.01;
        for j in 0..8 {
            for (z, w) in next.v2.slice(j).iter().zip(v2.slice(j)) {
                assert!((z - w / C::new(1.0, mu2)).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn phase_examples() {
        let mut p = preset(16, 0.1);
        p.a2 = constant(0.0);
        let s = system_phase_step(
            &SystemState {
                u1: system_well_prepared_init(&p, InitMode::Uncorrected).unwrap().0,
                v2: system_well_prepared_init(&p, InitMode::Uncorrected).unwrap().1,
                s: vec![0.0; 16],
                t: 0.0,
                negative_stiffness: 0,
            },
            &p,
        )
        .unwrap();
        let dt = p.steps().1;
        for (j, v) in s.iter().enumerate() {
            assert!((v - (p.big_e)(p.xgrid.node(j)) * dt).abs() < 1e-14);
        }
        let mut q = preset(64, 0.1);
        q.phase_method = PhaseMethod::SpectralRk4;
        let (steps, dt) = q.steps();
        let s = q.phase_solver().solve(steps, dt).unwrap();
        let e: Vec<f64> = q.xgrid.nodes().iter().map(|&x| (q.big_e)(x)).collect();
        let exact = crate::phase::exact_phase_constant_c(&q.xgrid, 4.0, &e, 0.1).unwrap();
        for (a, b) in s.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn pure_gap_oracle() {
        for &eps in &[1.0, 1e-3] {
            let mut p = preset(16, eps);
            p.cmat = [[0.0; 2]; 2];
            p.a1 = constant(0.0);
            p.a2 = constant(0.0);
            p.phase_method = PhaseMethod::SpectralRk4;
            let solver = SystemSolver::new(&p).unwrap();
            let (u1, u2) = solver.reconstruct(&solver.run(InitMode::Corrected).unwrap());
            for j in 0..16 {
                let x = p.xgrid.node(j);
                let rot = cis(-fast_phase((p.big_e)(x) * 0.1, eps));
                assert!((u1[j] - (p.f1_in)(x)).norm() < 1e-10);
                assert!((u2[j] - (p.f2_in)(x) * rot).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn direct_rotation_without_gap() {
        let mut p = preset(16, 0.1);
        p.big_e = constant(0.0);
        p.a1 = constant(0.0);
        p.a2 = constant(0.0);
        let (u1, u2) = system_direct_reference(&p, 0.1).unwrap();
        let (s, c) = 0.1f64.sin_cos();
        for j in 0..16 {
            let x = p.xgrid.node(j);
            let (f1, f2) = ((p.f1_in)(x), (p.f2_in)(x));
            assert!((u1[j] - (f1 * c + f2 * s)).norm() < 1e-13);
            assert!((u2[j] - (f2 * c - f1 * s)).norm() < 1e-13);
        }
    }

    #[test]
    fn direct_conserves_norm_with_skew_coupling() {
        let p = preset(64, 0.01);
        let settings = DirectSettings {
            grid: p.xgrid,
            dt: 1e-3,
            transport: Transport::Spectral,
            splitting: Splitting::Strang,
        };
        let mut norms = Vec::new();
        system_direct_reference_with(&p, 0.1, settings, |_, a, b| {
            norms.push(a.iter().chain(b).map(|z| z.norm_sqr()).sum::<f64>());
        })
        .unwrap();
        for w in norms.windows(2) {
            assert!((w[1] - w[0]).abs() <= 1e-12 * w[0]);
        }
    }

    #[test]
    fn spectral_transport_rejects_varying_speed() {
        let mut p = preset(16, 0.1);
        p.a1 = real_fn(|x: f64| 1.0 + 0.1 * x.sin());
        let settings = DirectSettings {
            grid: p.xgrid,
            dt: 1e-3,
            transport: Transport::Spectral,
            splitting: Splitting::Lie,
        };
        assert!(system_direct_reference_with(&p, 0.1, settings, |_, _, _| {}).is_err());
    }
}
