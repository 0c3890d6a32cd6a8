//! The scalar oscillatory transport model
//!
//! ```text
//! ∂_t u + c(x) ∂_x u + r(u) = (i a(x)/ε) u,   u(0, x) = α(x) e^{iβ(x)/ε},
//! ```
//!
//! solved through the phase `S` (`∂_t S + c ∂_x S = a`) and the filtered
//! profile `V(t, x, τ) = e^{−iτ} U(t, x, τ)`, with `u(t, x) = U(t, x, S/ε)`.

use std::fmt;

use num_complex::Complex;
use rayon::prelude::*;

use crate::coeff::{complex_fn, constant, zero_source, ClampPolicy, ComplexFn, RealFn, SourceFn};
use crate::error::{NgoError, Result};
use crate::phase::{PhaseMethod, PhaseSolver};
use crate::real::{cis, fast_phase, Real};
use crate::spectral::{Fourier, MeanPolicy, PeriodicGrid, ProfileField};
use crate::InitMode;

/// Coefficients, data and discretisation of one scalar run.
#[derive(Clone)]
pub struct ScalarProblem<T: Real> {
    pub c: RealFn<T>,
    pub a: RealFn<T>,
    pub r: SourceFn<T>,
    pub alpha: ComplexFn<T>,
    pub beta: RealFn<T>,
    pub epsilon: T,
    pub xgrid: PeriodicGrid<T>,
    pub taugrid: PeriodicGrid<T>,
    pub dt: T,
    pub t_final: T,
    pub phase_method: PhaseMethod,
    pub clamp: ClampPolicy<T>,
}

impl<T: Real> fmt::Debug for ScalarProblem<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarProblem")
            .field("epsilon", &self.epsilon)
            .field("xgrid", &self.xgrid)
            .field("taugrid", &self.taugrid)
            .field("dt", &self.dt)
            .field("t_final", &self.t_final)
            .field("phase_method", &self.phase_method)
            .finish_non_exhaustive()
    }
}

/// Number of uniform steps covering `[0, t_final]` with steps no longer than
/// `dt`, and the resulting step.
pub fn uniform_steps<T: Real>(t_final: T, dt: T) -> (usize, T) {
    let ratio = t_final / dt * (T::one() - T::lit(1e-12));
    let n = ratio.ceil().to_usize().unwrap_or(1).max(1);
    (n, t_final / T::count(n))
}

impl<T: Real> ScalarProblem<T> {
    /// A problem with `c = a = r = β = 0` and `α = 1`.
    pub fn new(xgrid: PeriodicGrid<T>, taugrid: PeriodicGrid<T>, epsilon: T, dt: T, t_final: T) -> Self {
        Self {
            c: constant(T::zero()),
            a: constant(T::zero()),
            r: zero_source(),
            alpha: complex_fn(|_| Complex::new(T::one(), T::zero())),
            beta: constant(T::zero()),
            epsilon,
            xgrid,
            taugrid,
            dt,
            t_final,
            phase_method: PhaseMethod::default(),
            clamp: ClampPolicy::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("epsilon", self.epsilon)?;
        positive("dt", self.dt)?;
        positive("t_final", self.t_final)?;
        positive("corr_cap", self.clamp.cap)?;
        if !self.taugrid.is_tau_grid() {
            return Err(NgoError::InvalidGrid("the τ-grid must cover [0, 2π)".into()));
        }
        Ok(())
    }

    /// Step count and uniform step actually used.
    pub fn steps(&self) -> (usize, T) {
        uniform_steps(self.t_final, self.dt)
    }

    pub fn courant(&self) -> T {
        let (_, dt) = self.steps();
        let cmax = self.xgrid.nodes().iter().fold(T::zero(), |m, &x| m.max((self.c)(x).abs()));
        cmax * dt / self.xgrid.spacing()
    }

    pub fn check_cfl(&self) -> Result<()> {
        let courant = self.courant();
        if courant >= T::one() {
            return Err(NgoError::Cfl { courant: courant.to_f64().unwrap_or(f64::NAN) });
        }
        Ok(())
    }

    pub fn phase_solver(&self) -> PhaseSolver<T> {
        PhaseSolver::new(self.xgrid, self.c.clone(), self.a.clone(), self.beta.clone(), self.phase_method)
    }

    /// `u₀(x) = α(x) e^{iβ(x)/ε}`.
    pub fn initial_data(&self, x: T) -> Complex<T> {
        (self.alpha)(x) * cis(fast_phase((self.beta)(x), self.epsilon))
    }
}

pub(crate) fn positive<T: Real>(name: &'static str, v: T) -> Result<()> {
    if v > T::zero() && v.is_finite() {
        Ok(())
    } else {
        Err(NgoError::InvalidParameter { name, reason: format!("must be positive and finite, got {v}") })
    }
}

/// Profile, phase and time of a scalar run.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarState<T> {
    pub v: ProfileField<T>,
    pub s: Vec<T>,
    pub t: T,
}

/// First-order upwind difference at node `j` of the lines `rows[j]`, sampled at
/// offset `l`; backward where `c ≥ 0`.
#[inline]
fn upwind<T: Real>(values: &[Complex<T>], m: usize, n: usize, j: usize, l: usize, c: T, inv_dx: T) -> Complex<T> {
    if c >= T::zero() {
        let jm = (j + n - 1) % n;
        (values[j * m + l] - values[jm * m + l]) * inv_dx
    } else {
        let jp = (j + 1) % n;
        (values[jp * m + l] - values[j * m + l]) * inv_dx
    }
}

/// Precomputed operators for stepping one [`ScalarProblem`].
#[derive(Clone, Debug)]
pub struct ScalarSolver<T: Real> {
    problem: ScalarProblem<T>,
    tau: Fourier<T>,
    rotation: Vec<Complex<T>>,
    c: Vec<T>,
    mu: Vec<T>,
    steps: usize,
    dt: T,
    phase: PhaseSolver<T>,
}

impl<T: Real> ScalarSolver<T> {
    pub fn new(problem: &ScalarProblem<T>) -> Result<Self> {
        problem.validate()?;
        problem.check_cfl()?;
        let (steps, dt) = problem.steps();
        let phase = problem.phase_solver();
        phase.check(dt)?;
        let nodes = problem.xgrid.nodes();
        Ok(Self {
            tau: Fourier::new(problem.taugrid),
            rotation: problem.taugrid.nodes().into_iter().map(cis).collect(),
            c: nodes.iter().map(|&x| (problem.c)(x)).collect(),
            mu: nodes.iter().map(|&x| dt * (problem.a)(x) / problem.epsilon).collect(),
            steps,
            dt,
            phase,
            problem: problem.clone(),
        })
    }

    pub fn problem(&self) -> &ScalarProblem<T> {
        &self.problem
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn initial_state(&self, init: InitMode) -> Result<ScalarState<T>> {
        let v = match init {
            InitMode::Corrected => well_prepared_init(&self.problem)?,
            InitMode::Uncorrected => one_mode_init(&self.problem)?.0,
        };
        Ok(ScalarState { v, s: self.phase.initial(), t: T::zero() })
    }

    /// One step of the profile scheme followed by one phase step.
    pub fn step(&self, state: &ScalarState<T>) -> ScalarState<T> {
        let p = &self.problem;
        let (n, m) = (p.xgrid.len(), p.taugrid.len());
        let inv_dx = T::one() / p.xgrid.spacing();
        let dt = self.dt;
        let old = &state.v.values;
        let mut values = vec![Complex::new(T::zero(), T::zero()); n * m];
        values.par_chunks_mut(m).enumerate().for_each(|(j, out)| {
            let c = self.c[j];
            for (l, w) in out.iter_mut().enumerate() {
                let v = old[j * m + l];
                let rot = self.rotation[l];
                let source = rot.conj() * (p.r)(rot * v);
                *w = v - (upwind(old, m, n, j, l, c, inv_dx) * c + source) * dt;
            }
            self.tau.q_inverse_in_place(out, self.mu[j]);
        });
        let mut s = state.s.clone();
        self.phase.advance(&mut s, state.t, dt);
        ScalarState {
            v: ProfileField { xgrid: p.xgrid, taugrid: p.taugrid, values },
            s,
            t: T::count(step_index(state.t, dt) + 1) * dt,
        }
    }

    /// Runs all steps, calling `observe` on every state including the first.
    pub fn run_with(&self, init: InitMode, mut observe: impl FnMut(&ScalarState<T>)) -> Result<ScalarState<T>> {
        let mut state = self.initial_state(init)?;
        observe(&state);
        for _ in 0..self.steps {
            state = self.step(&state);
            observe(&state);
        }
        if state.v.values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(NgoError::NonFinite("the profile scheme"));
        }
        Ok(state)
    }

    pub fn run(&self, init: InitMode) -> Result<ScalarState<T>> {
        self.run_with(init, |_| {})
    }

    /// `V(t, x_j, S_j/ε)`.
    pub fn evaluate_profile(&self, state: &ScalarState<T>) -> Vec<Complex<T>> {
        evaluate_at_phase(&self.tau, &state.v, &state.s, self.problem.epsilon, false)
    }

    /// `u(t, x_j) = U(t, x_j, S_j/ε) = e^{iS_j/ε} V(t, x_j, S_j/ε)`.
    pub fn reconstruct(&self, state: &ScalarState<T>) -> Vec<Complex<T>> {
        evaluate_at_phase(&self.tau, &state.v, &state.s, self.problem.epsilon, true)
    }
}

fn step_index<T: Real>(t: T, dt: T) -> usize {
    (t / dt).round().to_usize().unwrap_or(0)
}

/// Interpolates every τ-slice at `S_j/ε`, optionally multiplied by `e^{iS_j/ε}`.
pub(crate) fn evaluate_at_phase<T: Real>(
    tau: &Fourier<T>,
    v: &ProfileField<T>,
    s: &[T],
    epsilon: T,
    rotate: bool,
) -> Vec<Complex<T>> {
    v.values
        .par_chunks(v.ntau())
        .zip(s.par_iter())
        .map(|(slice, &phase)| {
            let t = fast_phase(phase, epsilon);
            let value = tau.evaluate(&tau.coefficients(slice), t);
            if rotate {
                value * cis(t)
            } else {
                value
            }
        })
        .collect()
}

/// Chapman-Enskog corrected profile
/// `V(0, x, τ) = α + (ε/a)[G(τ₀) − G(τ)]`, `G = L⁻¹(I − Π)[e^{−iτ} r(e^{iτ} α)]`,
/// with `τ₀ = β/ε` (zero in the usual case `β ≡ 0`), so that `V(0, x, τ₀) = α`.
pub fn well_prepared_init<T: Real>(problem: &ScalarProblem<T>) -> Result<ProfileField<T>> {
    problem.validate()?;
    let tau = Fourier::new(problem.taugrid);
    let taus = problem.taugrid.nodes();
    let nodes = problem.xgrid.nodes();
    let factors = problem.clamp.ratios(
        "a",
        |_| problem.epsilon,
        |j| (problem.a)(nodes[j]),
        nodes.len(),
    )?;
    let m = taus.len();
    let mut values = vec![Complex::new(T::zero(), T::zero()); nodes.len() * m];
    values
        .par_chunks_mut(m)
        .zip(nodes.par_iter().zip(factors.par_iter()))
        .try_for_each(|(out, (&x, &factor))| -> Result<()> {
            let alpha = (problem.alpha)(x);
            let h: Vec<_> = taus
                .iter()
                .map(|&t| {
                    let rot = cis(t);
                    rot.conj() * (problem.r)(rot * alpha)
                })
                .collect();
            let g = tau.antiderivative(&h, MeanPolicy::Subtract)?;
            let t0 = fast_phase((problem.beta)(x), problem.epsilon);
            let anchor = if t0 == T::zero() { g[0] } else { tau.interpolate(&g, t0) };
            for (o, gl) in out.iter_mut().zip(&g) {
                *o = alpha + (anchor - *gl) * factor;
            }
            Ok(())
        })?;
    ProfileField::new(problem.xgrid, problem.taugrid, values)
}

/// Uncorrected one-mode data: `V(0, x, τ) = α(x)`, `S(0, x) = β(x)`.
pub fn one_mode_init<T: Real>(problem: &ScalarProblem<T>) -> Result<(ProfileField<T>, Vec<T>)> {
    problem.validate()?;
    let v = ProfileField::from_fn(problem.xgrid, problem.taugrid, |x, _| (problem.alpha)(x))?;
    let s = problem.xgrid.nodes().into_iter().map(|x| (problem.beta)(x)).collect();
    Ok((v, s))
}

/// One step of the profile scheme for `state`.
pub fn step_profile<T: Real>(state: &ScalarState<T>, problem: &ScalarProblem<T>) -> Result<ScalarState<T>> {
    Ok(ScalarSolver::new(problem)?.step(state))
}

/// `u(t, x_j)` reconstructed from `state`.
pub fn reconstruct<T: Real>(state: &ScalarState<T>, problem: &ScalarProblem<T>) -> Vec<Complex<T>> {
    let tau = Fourier::new(problem.taugrid);
    evaluate_at_phase(&tau, &state.v, &state.s, problem.epsilon, true)
}

/// `V(t, x_j, S_j/ε)`.
pub fn evaluate_profile<T: Real>(state: &ScalarState<T>, problem: &ScalarProblem<T>) -> Vec<Complex<T>> {
    let tau = Fourier::new(problem.taugrid);
    evaluate_at_phase(&tau, &state.v, &state.s, problem.epsilon, false)
}

/// The phase at `t_final` on the problem grid.
pub fn solve_phase<T: Real>(problem: &ScalarProblem<T>, t_final: T, method: PhaseMethod) -> Result<Vec<T>> {
    let (steps, dt) = uniform_steps(t_final, problem.dt);
    PhaseSolver::new(problem.xgrid, problem.c.clone(), problem.a.clone(), problem.beta.clone(), method)
        .solve(steps, dt)
}

/// Closed-form phase for constant `c`; rejects a speed that varies across nodes.
pub fn exact_phase_constant_c<T: Real>(problem: &ScalarProblem<T>, t: T) -> Result<Vec<T>> {
    let nodes = problem.xgrid.nodes();
    let c0 = (problem.c)(nodes[0]);
    if nodes.iter().any(|&x| (problem.c)(x) != c0) {
        return Err(NgoError::Unsupported("the closed-form phase needs a constant speed".into()));
    }
    let a: Vec<T> = nodes.iter().map(|&x| (problem.a)(x)).collect();
    crate::phase::exact_phase_constant_c(&problem.xgrid, c0, &a, t)
}

/// The limit model `∂_t ū + c ∂_x ū + Π[e^{−iτ} r(e^{iτ} ū)] = 0`, `ū(0) = α`,
/// by first-order upwind and forward Euler.
pub fn solve_asymptotic<T: Real>(problem: &ScalarProblem<T>, t_final: T) -> Result<Vec<Complex<T>>> {
    problem.validate()?;
    let (steps, dt) = uniform_steps(t_final, problem.dt);
    let grid = problem.xgrid;
    let nodes = grid.nodes();
    let c: Vec<T> = nodes.iter().map(|&x| (problem.c)(x)).collect();
    check_courant(&c, dt, grid.spacing())?;
    let rotation: Vec<_> = problem.taugrid.nodes().into_iter().map(cis).collect();
    let inv_m = T::one() / T::count(rotation.len());
    let inv_dx = T::one() / grid.spacing();
    let n = nodes.len();
    let mut u: Vec<_> = nodes.iter().map(|&x| (problem.alpha)(x)).collect();
    for _ in 0..steps {
        let old = u.clone();
        u.par_iter_mut().enumerate().for_each(|(j, uj)| {
            let v = old[j];
            let mean = rotation
                .iter()
                .fold(Complex::new(T::zero(), T::zero()), |acc, rot| acc + rot.conj() * (problem.r)(*rot * v))
                * inv_m;
            *uj = v - (upwind(&old, 1, n, j, 0, c[j], inv_dx) * c[j] + mean) * dt;
        });
    }
    Ok(u)
}

fn check_courant<T: Real>(speed: &[T], dt: T, dx: T) -> Result<()> {
    let courant = speed.iter().fold(T::zero(), |m, v| m.max(v.abs())) * dt / dx;
    if courant >= T::one() {
        return Err(NgoError::Cfl { courant: courant.to_f64().unwrap_or(f64::NAN) });
    }
    Ok(())
}

/// Direct solver of the oscillatory equation on the problem grid by Lie
/// splitting: exact rotation `e^{i a dt/ε}`, first-order upwind transport,
/// forward Euler on `−r(u)`. Resolves the wavelength only when `dx, dt ≪ ε`.
pub fn solve_direct_reference<T: Real>(problem: &ScalarProblem<T>, t_final: T) -> Result<Vec<Complex<T>>> {
    problem.validate()?;
    let (steps, dt) = uniform_steps(t_final, problem.dt);
    let grid = problem.xgrid;
    let nodes = grid.nodes();
    let c: Vec<T> = nodes.iter().map(|&x| (problem.c)(x)).collect();
    check_courant(&c, dt, grid.spacing())?;
    let spin: Vec<_> = nodes
        .iter()
        .map(|&x| cis(fast_phase((problem.a)(x) * dt, problem.epsilon)))
        .collect();
    let inv_dx = T::one() / grid.spacing();
    let n = nodes.len();
    let mut u: Vec<_> = nodes.iter().map(|&x| problem.initial_data(x)).collect();
    for _ in 0..steps {
        for (v, s) in u.iter_mut().zip(&spin) {
            *v = *v * *s;
        }
        let old = u.clone();
        u.par_iter_mut().enumerate().for_each(|(j, uj)| {
            let moved = old[j] - upwind(&old, 1, n, j, 0, c[j], inv_dx) * c[j] * dt;
            *uj = moved - (problem.r)(moved) * dt;
        });
    }
    Ok(u)
}

/// Direct pseudo-spectral solver with classical RK4 on the problem grid,
/// calling `observe(t, u)` after the initial data and every step.
pub fn solve_spectral_reference_with<T: Real>(
    problem: &ScalarProblem<T>,
    t_final: T,
    mut observe: impl FnMut(T, &[Complex<T>]),
) -> Result<Vec<Complex<T>>> {
    problem.validate()?;
    let (steps, dt) = uniform_steps(t_final, problem.dt);
    let grid = problem.xgrid;
    let fourier = Fourier::new(grid);
    let nodes = grid.nodes();
    let c: Vec<T> = nodes.iter().map(|&x| (problem.c)(x)).collect();
    let rate: Vec<T> = nodes.iter().map(|&x| (problem.a)(x) / problem.epsilon).collect();
    let rhs = |u: &[Complex<T>]| -> Vec<Complex<T>> {
        let du = fourier.derivative(u);
        u.iter()
            .enumerate()
            .map(|(j, v)| -du[j] * c[j] + Complex::new(T::zero(), rate[j]) * *v - (problem.r)(*v))
            .collect()
    };
    let axpy = |base: &[Complex<T>], k: &[Complex<T>], h: T| -> Vec<Complex<T>> {
        base.iter().zip(k).map(|(b, d)| *b + *d * h).collect()
    };
    let mut u: Vec<_> = nodes.iter().map(|&x| problem.initial_data(x)).collect();
    observe(T::zero(), &u);
    let half = dt / T::lit(2.0);
    let sixth = dt / T::lit(6.0);
    let two = T::lit(2.0);
    for n in 0..steps {
        let k1 = rhs(&u);
        let k2 = rhs(&axpy(&u, &k1, half));
        let k3 = rhs(&axpy(&u, &k2, half));
        let k4 = rhs(&axpy(&u, &k3, dt));
        for (j, v) in u.iter_mut().enumerate() {
            *v = *v + (k1[j] + k2[j] * two + k3[j] * two + k4[j]) * sixth;
        }
        observe(T::count(n + 1) * dt, &u);
    }
    if u.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(NgoError::NonFinite("the spectral reference"));
    }
    Ok(u)
}

/// Reference solution at arbitrary points `at` by integrating along
/// characteristics: `x' = c(x)`, `φ' = a(x)`, `w' = −e^{−iφ/ε} r(e^{iφ/ε} w)`,
/// `u = w e^{iφ/ε}`, with steps resolving the local wavelength.
pub fn solve_characteristics_reference<T: Real>(
    problem: &ScalarProblem<T>,
    t_final: T,
    at: &[T],
) -> Result<Vec<Complex<T>>> {
    problem.validate()?;
    positive("t_final", t_final)?;
    let eps = problem.epsilon;
    let amax = (0..512)
        .map(|k| {
            let x = problem.xgrid.lower() + problem.xgrid.length() * T::count(k) / T::lit(512.0);
            (problem.a)(x).abs()
        })
        .fold(T::zero(), T::max);
    let mut h = T::lit(1e-3);
    if amax > T::zero() {
        h = h.min(T::lit(0.01) * eps / amax);
    }
    let steps = (t_final / h).ceil().to_usize().unwrap_or(1).max(1);
    let h = t_final / T::count(steps);
    let out: Vec<_> = at
        .par_iter()
        .map(|&x| {
            let foot = crate::phase::characteristic_phase(
                &*problem.c,
                &*constant(T::zero()),
                &|y| y,
                x,
                t_final,
            );
            characteristic_solution(problem, foot, steps, h)
        })
        .collect();
    if out.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(NgoError::NonFinite("the characteristics reference"));
    }
    Ok(out)
}

fn characteristic_solution<T: Real>(problem: &ScalarProblem<T>, foot: T, steps: usize, h: T) -> Complex<T> {
    let eps = problem.epsilon;
    let f = |x: T, phi: T, w: Complex<T>| -> (T, T, Complex<T>) {
        let rot = cis(fast_phase(phi, eps));
        ((problem.c)(x), (problem.a)(x), -(rot.conj() * (problem.r)(rot * w)))
    };
    let (mut x, mut phi, mut w) = (foot, (problem.beta)(foot), (problem.alpha)(foot));
    let half = h / T::lit(2.0);
    let sixth = h / T::lit(6.0);
    let two = T::lit(2.0);
    for _ in 0..steps {
        let (a1, b1, c1) = f(x, phi, w);
        let (a2, b2, c2) = f(x + half * a1, phi + half * b1, w + c1 * half);
        let (a3, b3, c3) = f(x + half * a2, phi + half * b2, w + c2 * half);
        let (a4, b4, c4) = f(x + h * a3, phi + h * b3, w + c3 * h);
        x = x + sixth * (a1 + two * a2 + two * a3 + a4);
        phi = phi + sixth * (b1 + two * b2 + two * b3 + b4);
        w = w + (c1 + c2 * two + c3 * two + c4) * sixth;
    }
    w * cis(fast_phase(phi, eps))
}
