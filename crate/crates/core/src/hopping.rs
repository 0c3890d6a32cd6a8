//! Semiclassical surface hopping in one space and one momentum dimension:
//!
//! ```text
//! ∂_t f⁺ + p∂_x f⁺ − ∂_x(U+E)∂_p f⁺ =  b̄ f + b f̄
//! ∂_t f⁻ + p∂_x f⁻ − ∂_x(U−E)∂_p f⁻ = −b̄ f − b f̄
//! ∂_t f  + p∂_x f  + ∂_x U ∂_p f    = −i(2E/ε) f + b(f⁻ − f⁺) + (b⁺ − b⁻) f
//! ```
//!
//! with `f = fⁱ`, `b = bⁱ`. The NGO solver follows the phase
//! `∂_t S + p∂_x S + ∂_x U ∂_p S = 2E` and carries `(F⁺, F⁻, Gⁱ = e^{iτ}Fⁱ)`
//! on an extra periodic `τ` axis. `∂_p S` is transported as its own field
//! `Q` (`∂_t Q + p∂_x Q + ∂_x U ∂_p Q = −∂_x S`), since `S` is not periodic in `p`.
//!
//! Fields are stored as four real components `(f⁺, f⁻, Re fⁱ, Im fⁱ)` with
//! index `(ix·n_p + ip)·m + l`, `m = 1` for kinetic fields and `m = N_τ` for
//! augmented ones.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex;
use rayon::prelude::*;

use crate::coeff::{constant, ClampPolicy, PhaseSpaceComplexFn, PhaseSpaceFn, RealFn};
use crate::error::{NgoError, Result};
use crate::expm::{expm_scaled, matvec, Matrix};
use crate::real::{cis, fast_phase, Real};
use crate::scalar::{positive, uniform_steps};
use crate::spectral::{Fourier, PeriodicGrid};
use crate::InitMode;

/// Time integrator of the `τ`-advection substep.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum TauIntegrator {
    /// Divide mode `k` by `1 + i k dt 𝓔/ε`.
    #[default]
    ImplicitEuler,
    /// Multiply mode `k` by `e^{−i k dt 𝓔/ε}`.
    Exact,
}

impl TauIntegrator {
    pub fn as_str(&self) -> &'static str {
        match self {
            TauIntegrator::ImplicitEuler => "implicit_euler",
            TauIntegrator::Exact => "exact",
        }
    }
}

impl fmt::Display for TauIntegrator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TauIntegrator {
    type Err = NgoError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "implicit_euler" => Ok(TauIntegrator::ImplicitEuler),
            "exact" => Ok(TauIntegrator::Exact),
            other => Err(NgoError::InvalidParameter {
                name: "tau_integrator",
                reason: format!("unknown integrator `{other}` (expected implicit_euler or exact)"),
            }),
        }
    }
}

#[derive(Clone)]
pub struct HoppingProblem<T: Real> {
    pub upot: RealFn<T>,
    pub big_e: RealFn<T>,
    pub bi: PhaseSpaceComplexFn<T>,
    pub bplus: PhaseSpaceComplexFn<T>,
    pub bminus: PhaseSpaceComplexFn<T>,
    pub f_plus_in: PhaseSpaceFn<T>,
    pub f_minus_in: PhaseSpaceFn<T>,
    pub f_i_in: PhaseSpaceComplexFn<T>,
    pub epsilon: T,
    pub xgrid: PeriodicGrid<T>,
    pub pgrid: PeriodicGrid<T>,
    pub taugrid: PeriodicGrid<T>,
    pub dt: T,
    pub t_final: T,
    pub tau_integrator: TauIntegrator,
    pub clamp: ClampPolicy<T>,
}

impl<T: Real> fmt::Debug for HoppingProblem<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HoppingProblem")
            .field("epsilon", &self.epsilon)
            .field("xgrid", &self.xgrid)
            .field("pgrid", &self.pgrid)
            .field("taugrid", &self.taugrid)
            .field("dt", &self.dt)
            .field("t_final", &self.t_final)
            .field("tau_integrator", &self.tau_integrator)
            .finish_non_exhaustive()
    }
}

fn zero_pair<T: Real>() -> PhaseSpaceComplexFn<T> {
    std::sync::Arc::new(|_, _| Complex::new(T::zero(), T::zero()))
}

impl<T: Real> HoppingProblem<T> {
    /// `U = 0`, `E = 1`, no coupling, zero data.
    pub fn new(
        xgrid: PeriodicGrid<T>,
        pgrid: PeriodicGrid<T>,
        taugrid: PeriodicGrid<T>,
        epsilon: T,
        dt: T,
        t_final: T,
    ) -> Self {
        Self {
            upot: constant(T::zero()),
            big_e: constant(T::one()),
            bi: zero_pair(),
            bplus: zero_pair(),
            bminus: zero_pair(),
            f_plus_in: std::sync::Arc::new(|_, _| T::zero()),
            f_minus_in: std::sync::Arc::new(|_, _| T::zero()),
            f_i_in: zero_pair(),
            epsilon,
            xgrid,
            pgrid,
            taugrid,
            dt,
            t_final,
            tau_integrator: TauIntegrator::default(),
            clamp: ClampPolicy::default(),
        }
    }

    /// Avoided crossing on `[−2π, 2π]²`: `E = 1 − cos(x/2) + ε`,
    /// `bⁱ = −sin(p+1)/2`, Maxwellian data.
    pub fn avoided_crossing(epsilon: T, nx: usize, np: usize, ntau: usize, dt: T, t_final: T) -> Result<Self> {
        let two_pi = T::TAU();
        let xgrid = PeriodicGrid::new(-two_pi, T::lit(2.0) * two_pi, nx)?;
        let pgrid = PeriodicGrid::new(-two_pi, T::lit(2.0) * two_pi, np)?;
        let mut p = Self::new(xgrid, pgrid, PeriodicGrid::tau(ntau)?, epsilon, dt, t_final);
        let half = T::lit(0.5);
        p.big_e = std::sync::Arc::new(move |x: T| T::one() - (x * half).cos() + epsilon);
        p.bi = std::sync::Arc::new(move |_, v: T| Complex::new(-half * (v + T::one()).sin(), T::zero()));
        let maxwell = move |v: T| (-v * v * half).exp() / two_pi.sqrt();
        p.f_plus_in = std::sync::Arc::new(move |x: T, v: T| (T::one() + half * x.cos()) * maxwell(v));
        p.f_minus_in = p.f_plus_in.clone();
        p.f_i_in = std::sync::Arc::new(move |x: T, v: T| {
            Complex::new(T::one() + half * x.sin(), T::one() + half * x.cos()) * maxwell(v)
        });
        Ok(p)
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

    fn cell(&self) -> T {
        self.xgrid.spacing() * self.pgrid.spacing()
    }
}

/// `(f⁺, f⁻, Re fⁱ, Im fⁱ)` on the `(x, p)` grid.
#[derive(Clone, Debug, PartialEq)]
pub struct KineticState<T> {
    pub fields: [Vec<T>; 4],
    pub t: T,
}

/// `(F⁺, F⁻, Re Gⁱ, Im Gⁱ)` on `(x, p, τ)`, the phase `S` and `Q = ∂_p S`.
#[derive(Clone, Debug, PartialEq)]
pub struct AugmentedKineticState<T> {
    pub fields: [Vec<T>; 4],
    pub s2d: Vec<T>,
    pub q2d: Vec<T>,
    pub t: T,
}

#[derive(Clone, Copy, Debug)]
struct Shape {
    nx: usize,
    np: usize,
    m: usize,
}

impl Shape {
    fn len(&self) -> usize {
        self.nx * self.np * self.m
    }
}

fn to_complex<T: Real>(v: T) -> Complex<T> {
    Complex::new(v, T::zero())
}

/// Exact real transport along `x` at speed `p[ip]` on every `(ip, l)` line.
fn transport_x<T: Real>(fx: &Fourier<T>, shape: Shape, data: &mut [T], speed: &[T], dt: T) {
    let Shape { nx, np, m } = shape;
    let lines: Vec<Option<Vec<Complex<T>>>> = (0..np * m)
        .into_par_iter()
        .map(|q| {
            let (ip, l) = (q / m, q % m);
            if speed[ip] == T::zero() {
                return None;
            }
            let mut buf: Vec<_> = (0..nx).map(|ix| to_complex(data[(ix * np + ip) * m + l])).collect();
            fx.advect_real_in_place(&mut buf, speed[ip], dt);
            Some(buf)
        })
        .collect();
    for (q, line) in lines.into_iter().enumerate() {
        if let Some(line) = line {
            let (ip, l) = (q / m, q % m);
            for (ix, z) in line.into_iter().enumerate() {
                data[(ix * np + ip) * m + l] = z.re;
            }
        }
    }
}

/// Exact real transport along `p` at speed `speed[ix]` on every `(ix, l)` line.
fn transport_p<T: Real>(fp: &Fourier<T>, shape: Shape, data: &mut [T], speed: &[T], dt: T) {
    let Shape { np, m, .. } = shape;
    data.par_chunks_mut(np * m).enumerate().for_each(|(ix, chunk)| {
        if speed[ix] == T::zero() {
            return;
        }
        let mut buf = vec![Complex::new(T::zero(), T::zero()); np];
        for l in 0..m {
            for (ip, z) in buf.iter_mut().enumerate() {
                *z = to_complex(chunk[ip * m + l]);
            }
            fp.advect_real_in_place(&mut buf, speed[ix], dt);
            for (ip, z) in buf.iter().enumerate() {
                chunk[ip * m + l] = z.re;
            }
        }
    });
}

/// Source matrix on `(f⁺, f⁻, Re fⁱ, Im fⁱ)` for coupling `b`, `β = b⁺ − b⁻`
/// and rotation rate `gap = 2E/ε`. With `b → b e^{iτ}` and `gap = 0` it is
/// the matrix acting on `(F⁺, F⁻, Re Gⁱ, Im Gⁱ)`.
pub fn source_matrix<T: Real>(b: Complex<T>, beta: Complex<T>, gap: T) -> Matrix<T, 4> {
    let two = T::lit(2.0);
    let z = T::zero();
    [
        [z, z, two * b.re, two * b.im],
        [z, z, -two * b.re, -two * b.im],
        [-b.re, b.re, beta.re, gap - beta.im],
        [-b.im, b.im, beta.im - gap, beta.re],
    ]
}

/// Shared derivative data of `U` and `E` on the `x`-grid.
#[derive(Clone, Debug)]
struct Coefficients<T> {
    e: Vec<T>,
    de: Vec<T>,
    du: Vec<T>,
    p: Vec<T>,
}

impl<T: Real> Coefficients<T> {
    fn new(problem: &HoppingProblem<T>, fx: &Fourier<T>) -> Self {
        let xs = problem.xgrid.nodes();
        let e: Vec<T> = xs.iter().map(|&x| (problem.big_e)(x)).collect();
        let u: Vec<T> = xs.iter().map(|&x| (problem.upot)(x)).collect();
        Self { de: fx.derivative_real(&e), du: fx.derivative_real(&u), e, p: problem.pgrid.nodes() }
    }

    /// `𝓐` for the four components at `x_ix`.
    fn p_speeds(&self) -> [Vec<T>; 4] {
        let plus = self.du.iter().zip(&self.de).map(|(u, e)| -(*u + *e)).collect();
        let minus = self.du.iter().zip(&self.de).map(|(u, e)| -(*u - *e)).collect();
        [plus, minus, self.du.clone(), self.du.clone()]
    }
}

/// `g₁(z) = (1 − e^{−z})/z` and `g₂(z) = (g₁(z) − e^{−z})/z`, by series near 0.
fn phi_functions<T: Real>(z: Complex<T>) -> (Complex<T>, Complex<T>) {
    let decay = (-z).exp();
    if z.norm() > T::lit(0.5) {
        let g1 = (Complex::new(T::one(), T::zero()) - decay) / z;
        return (g1, (g1 - decay) / z);
    }
    let (mut g1, mut g2) = (Complex::new(T::zero(), T::zero()), Complex::new(T::zero(), T::zero()));
    let mut power = Complex::new(T::one(), T::zero());
    let mut factorial = T::one();
    for n in 0..24 {
        factorial = factorial * T::count(n + 1);
        g1 = g1 + power / factorial;
        g2 = g2 + power * T::count(n + 1) / (factorial * T::count(n + 2));
        power = power * -z;
    }
    (g1, g2)
}

/// Phase solver for `S` and `Q = ∂_p S`. Each step is a Strang composition
/// of half-step `p`-transport (speed `∂_x U`) around an `x`-step that solves
/// `∂_t S + p∂_x S = 2E`, `∂_t Q + p∂_x Q = −∂_x S` exactly per Fourier mode,
/// so the phase is exact when `U` is constant.
#[derive(Clone, Debug)]
pub struct HoppingPhase<T: Real> {
    fx: Fourier<T>,
    fp: Fourier<T>,
    coeffs: Coefficients<T>,
    e_hat: Vec<Complex<T>>,
    nx: usize,
    np: usize,
}

impl<T: Real> HoppingPhase<T> {
    pub fn new(problem: &HoppingProblem<T>) -> Self {
        let fx = Fourier::new(problem.xgrid);
        let coeffs = Coefficients::new(problem, &fx);
        let e_hat = fx.coefficients(&coeffs.e.iter().map(|&v| to_complex(v)).collect::<Vec<_>>());
        Self {
            fp: Fourier::new(problem.pgrid),
            e_hat,
            coeffs,
            fx,
            nx: problem.xgrid.len(),
            np: problem.pgrid.len(),
        }
    }

    fn x_step(&self, s: &mut [T], q: &mut [T], dt: T) {
        let (nx, np) = (self.nx, self.np);
        let nyquist = self.fx.grid().nyquist();
        let two = T::lit(2.0);
        let rows: Vec<(Vec<Complex<T>>, Vec<Complex<T>>)> = (0..np)
            .into_par_iter()
            .map(|ip| {
                let p = self.coeffs.p[ip];
                let mut sh: Vec<_> = (0..nx).map(|ix| to_complex(s[ix * np + ip])).collect();
                let mut qh: Vec<_> = (0..nx).map(|ix| to_complex(q[ix * np + ip])).collect();
                self.fx.forward_in_place(&mut sh);
                self.fx.forward_in_place(&mut qh);
                for (k, &w) in self.fx.omega().iter().enumerate() {
                    let z = Complex::new(T::zero(), w * p * dt);
                    let (mut g1, mut g2) = phi_functions(z);
                    let mut decay = (-z).exp();
                    let mut dx = Complex::new(T::zero(), w);
                    if Some(k) == nyquist {
                        g1 = to_complex(g1.re);
                        g2 = to_complex(g2.re);
                        decay = to_complex(decay.re);
                        dx = Complex::new(T::zero(), T::zero());
                    }
                    let forcing = self.e_hat[k] * two;
                    let s0 = sh[k];
                    sh[k] = decay * s0 + forcing * g1 * dt;
                    qh[k] = decay * qh[k] - dx * (decay * s0 * dt + forcing * g2 * dt * dt);
                }
                self.fx.inverse_in_place(&mut sh);
                self.fx.inverse_in_place(&mut qh);
                (sh, qh)
            })
            .collect();
        for (ip, (sr, qr)) in rows.into_iter().enumerate() {
            for ix in 0..nx {
                s[ix * np + ip] = sr[ix].re;
                q[ix * np + ip] = qr[ix].re;
            }
        }
    }

    pub fn step(&self, s: &mut [T], q: &mut [T], dt: T) {
        let shape = Shape { nx: self.nx, np: self.np, m: 1 };
        let half = dt / T::lit(2.0);
        for field in [&mut *s, &mut *q] {
            transport_p(&self.fp, shape, field, &self.coeffs.du, half);
        }
        self.x_step(s, q, dt);
        for field in [&mut *s, &mut *q] {
            transport_p(&self.fp, shape, field, &self.coeffs.du, half);
        }
    }
}

/// One phase step of `state`.
pub fn hopping_phase_step<T: Real>(state: &AugmentedKineticState<T>, problem: &HoppingProblem<T>) -> (Vec<T>, Vec<T>) {
    let (mut s, mut q) = (state.s2d.clone(), state.q2d.clone());
    HoppingPhase::new(problem).step(&mut s, &mut q, problem.steps().1);
    (s, q)
}

/// Corrected (or raw) augmented data at `t = 0`, where `𝓔^± = 2E`.
pub fn hopping_well_prepared_init<T: Real>(
    problem: &HoppingProblem<T>,
    init: InitMode,
) -> Result<AugmentedKineticState<T>> {
    problem.validate()?;
    let (nx, np, m) = (problem.xgrid.len(), problem.pgrid.len(), problem.taugrid.len());
    let xs = problem.xgrid.nodes();
    let ps = problem.pgrid.nodes();
    let eps = problem.epsilon;
    let two = T::lit(2.0);
    let factors = match init {
        InitMode::Uncorrected => vec![T::zero(); nx],
        InitMode::Corrected => problem.clamp.ratios("2E", |_| eps, |j| two * (problem.big_e)(xs[j]), nx)?,
    };
    let rot: Vec<Complex<T>> = problem.taugrid.nodes().into_iter().map(cis).collect();
    let one = to_complex(T::one());
    let i = Complex::new(T::zero(), T::one());
    let n = nx * np * m;
    let mut fields = [vec![T::zero(); n], vec![T::zero(); n], vec![T::zero(); n], vec![T::zero(); n]];
    for ix in 0..nx {
        let k = factors[ix];
        for ip in 0..np {
            let (x, p) = (xs[ix], ps[ip]);
            let (fp, fm, fi) = ((problem.f_plus_in)(x, p), (problem.f_minus_in)(x, p), (problem.f_i_in)(x, p));
            let b = (problem.bi)(x, p);
            for (l, r) in rot.iter().enumerate() {
                let at = (ix * np + ip) * m + l;
                let bracket = (b.conj() * fi * (one - r.conj())).im * two * k;
                let g = fi + i * b * (*r - one) * (fp - fm) * k;
                fields[0][at] = fp + bracket;
                fields[1][at] = fm - bracket;
                fields[2][at] = g.re;
                fields[3][at] = g.im;
            }
        }
    }
    Ok(AugmentedKineticState { fields, s2d: vec![T::zero(); nx * np], q2d: vec![T::zero(); nx * np], t: T::zero() })
}

/// Raw data on the `(x, p)` grid.
pub fn hopping_initial_kinetic<T: Real>(problem: &HoppingProblem<T>) -> KineticState<T> {
    let xs = problem.xgrid.nodes();
    let ps = problem.pgrid.nodes();
    let mut fields: [Vec<T>; 4] = Default::default();
    for &x in &xs {
        for &p in &ps {
            let fi = (problem.f_i_in)(x, p);
            fields[0].push((problem.f_plus_in)(x, p));
            fields[1].push((problem.f_minus_in)(x, p));
            fields[2].push(fi.re);
            fields[3].push(fi.im);
        }
    }
    KineticState { fields, t: T::zero() }
}

fn apply_sources<T: Real>(fields: &mut [Vec<T>; 4], matrices: &[Matrix<T, 4>]) {
    let [a, b, c, d] = fields;
    a.par_iter_mut()
        .zip(b.par_iter_mut())
        .zip(c.par_iter_mut())
        .zip(d.par_iter_mut())
        .zip(matrices.par_iter())
        .for_each(|((((a, b), c), d), m)| {
            let [w, x, y, z] = matvec(m, &[*a, *b, *c, *d]);
            *a = w;
            *b = x;
            *c = y;
            *d = z;
        });
}

/// Direct splitting solver: `x`-transport, `p`-transport, exact source.
#[derive(Clone, Debug)]
pub struct HoppingDirectSolver<T: Real> {
    fx: Fourier<T>,
    fp: Fourier<T>,
    coeffs: Coefficients<T>,
    speeds: [Vec<T>; 4],
    propagators: Vec<Matrix<T, 4>>,
    shape: Shape,
    steps: usize,
    dt: T,
    cell: T,
}

impl<T: Real> HoppingDirectSolver<T> {
    pub fn new(problem: &HoppingProblem<T>) -> Result<Self> {
        problem.validate()?;
        let (steps, dt) = problem.steps();
        let fx = Fourier::new(problem.xgrid);
        let coeffs = Coefficients::new(problem, &fx);
        let (nx, np) = (problem.xgrid.len(), problem.pgrid.len());
        let xs = problem.xgrid.nodes();
        let two = T::lit(2.0);
        let propagators = (0..nx * np)
            .into_par_iter()
            .map(|k| {
                let (x, p) = (xs[k / np], coeffs.p[k % np]);
                let beta = (problem.bplus)(x, p) - (problem.bminus)(x, p);
                let gap = two * coeffs.e[k / np] / problem.epsilon;
                expm_scaled(&source_matrix((problem.bi)(x, p), beta, gap), dt)
            })
            .collect();
        Ok(Self {
            fp: Fourier::new(problem.pgrid),
            fx,
            speeds: coeffs.p_speeds(),
            coeffs,
            propagators,
            shape: Shape { nx, np, m: 1 },
            steps,
            dt,
            cell: problem.cell(),
        })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn step(&self, state: &KineticState<T>) -> KineticState<T> {
        let mut fields = state.fields.clone();
        for (k, field) in fields.iter_mut().enumerate() {
            transport_x(&self.fx, self.shape, field, &self.coeffs.p, self.dt);
            transport_p(&self.fp, self.shape, field, &self.speeds[k], self.dt);
        }
        apply_sources(&mut fields, &self.propagators);
        KineticState { fields, t: state.t + self.dt }
    }

    /// Runs to the final time; `observe` sees every state including the first.
    pub fn run_with(
        &self,
        initial: KineticState<T>,
        mut observe: impl FnMut(&KineticState<T>),
    ) -> Result<KineticState<T>> {
        let mut state = initial;
        observe(&state);
        for n in 0..self.steps {
            state = self.step(&state);
            state.t = T::count(n + 1) * self.dt;
            observe(&state);
        }
        check_finite(&state.fields, "the direct hopping solver")?;
        Ok(state)
    }

    pub fn mass(&self, state: &KineticState<T>) -> T {
        mass(&state.fields, self.cell)
    }
}

fn check_finite<T: Real>(fields: &[Vec<T>; 4], what: &'static str) -> Result<()> {
    if fields.iter().flatten().any(|v| !v.is_finite()) {
        return Err(NgoError::NonFinite(what));
    }
    Ok(())
}

fn mass<T: Real>(fields: &[Vec<T>; 4], cell: T) -> T {
    fields[0].iter().zip(&fields[1]).fold(T::zero(), |acc, (a, b)| acc + *a + *b) * cell
}

/// NGO splitting solver on the augmented unknowns.
#[derive(Clone, Debug)]
pub struct HoppingNgoSolver<T: Real> {
    problem: HoppingProblem<T>,
    fx: Fourier<T>,
    fp: Fourier<T>,
    ftau: Fourier<T>,
    coeffs: Coefficients<T>,
    speeds: [Vec<T>; 4],
    propagators: Vec<Matrix<T, 4>>,
    phase: HoppingPhase<T>,
    shape: Shape,
    steps: usize,
    dt: T,
}

impl<T: Real> HoppingNgoSolver<T> {
    pub fn new(problem: &HoppingProblem<T>) -> Result<Self> {
        problem.validate()?;
        let (steps, dt) = problem.steps();
        let fx = Fourier::new(problem.xgrid);
        let coeffs = Coefficients::new(problem, &fx);
        let shape = Shape { nx: problem.xgrid.len(), np: problem.pgrid.len(), m: problem.taugrid.len() };
        let xs = problem.xgrid.nodes();
        let rot: Vec<Complex<T>> = problem.taugrid.nodes().into_iter().map(cis).collect();
        let (np, m) = (shape.np, shape.m);
        let propagators = (0..shape.len())
            .into_par_iter()
            .map(|k| {
                let node = k / m;
                let (x, p) = (xs[node / np], coeffs.p[node % np]);
                let beta = (problem.bplus)(x, p) - (problem.bminus)(x, p);
                let w = (problem.bi)(x, p) * rot[k % m];
                expm_scaled(&source_matrix(w, beta, T::zero()), dt)
            })
            .collect();
        Ok(Self {
            fp: Fourier::new(problem.pgrid),
            ftau: Fourier::new(problem.taugrid),
            phase: HoppingPhase::new(problem),
            speeds: coeffs.p_speeds(),
            fx,
            coeffs,
            propagators,
            shape,
            steps,
            dt,
            problem: problem.clone(),
        })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn initial_state(&self, init: InitMode) -> Result<AugmentedKineticState<T>> {
        hopping_well_prepared_init(&self.problem, init)
    }

    /// `(𝓔⁺, 𝓔⁻, 2E, 2E)` at every `(x, p)` node for the current `Q`.
    fn tau_speeds(&self, q: &[T]) -> Vec<[T; 4]> {
        let two = T::lit(2.0);
        let np = self.shape.np;
        q.iter()
            .enumerate()
            .map(|(k, &q)| {
                let ix = k / np;
                let (e, de, du) = (self.coeffs.e[ix], self.coeffs.de[ix], self.coeffs.du[ix]);
                [two * e - (two * du + de) * q, two * e - (two * du - de) * q, two * e, two * e]
            })
            .collect()
    }

    fn tau_step(&self, fields: &mut [Vec<T>; 4], q: &[T]) {
        let speeds = self.tau_speeds(q);
        let m = self.shape.m;
        let (dt, eps) = (self.dt, self.problem.epsilon);
        let nyquist = self.problem.taugrid.nyquist();
        let integrator = self.problem.tau_integrator;
        for (c, field) in fields.iter_mut().enumerate() {
            field.par_chunks_mut(m).zip(speeds.par_iter()).for_each(|(line, sp)| {
                let mu = dt * sp[c] / eps;
                if mu == T::zero() {
                    return;
                }
                let mut buf: Vec<_> = line.iter().map(|&v| to_complex(v)).collect();
                match integrator {
                    TauIntegrator::Exact => self.ftau.advect_real_in_place(&mut buf, sp[c] / eps, dt),
                    TauIntegrator::ImplicitEuler => self.ftau.apply_multiplier(&mut buf, |j, w| {
                        if Some(j) == nyquist {
                            to_complex(T::one() / (T::one() + w * w * mu * mu))
                        } else {
                            Complex::new(T::one(), w * mu).inv()
                        }
                    }),
                }
                for (v, z) in line.iter_mut().zip(&buf) {
                    *v = z.re;
                }
            });
        }
    }

    pub fn step(&self, state: &AugmentedKineticState<T>) -> AugmentedKineticState<T> {
        let mut fields = state.fields.clone();
        for (k, field) in fields.iter_mut().enumerate() {
            transport_x(&self.fx, self.shape, field, &self.coeffs.p, self.dt);
            transport_p(&self.fp, self.shape, field, &self.speeds[k], self.dt);
        }
        apply_sources(&mut fields, &self.propagators);
        self.tau_step(&mut fields, &state.q2d);
        let (mut s, mut q) = (state.s2d.clone(), state.q2d.clone());
        self.phase.step(&mut s, &mut q, self.dt);
        AugmentedKineticState { fields, s2d: s, q2d: q, t: state.t + self.dt }
    }

    pub fn run_with(
        &self,
        initial: AugmentedKineticState<T>,
        mut observe: impl FnMut(&AugmentedKineticState<T>),
    ) -> Result<AugmentedKineticState<T>> {
        let mut state = initial;
        observe(&state);
        for n in 0..self.steps {
            state = self.step(&state);
            state.t = T::count(n + 1) * self.dt;
            observe(&state);
        }
        check_finite(&state.fields, "the NGO hopping solver")?;
        Ok(state)
    }

    pub fn run(&self, init: InitMode) -> Result<AugmentedKineticState<T>> {
        self.run_with(self.initial_state(init)?, |_| {})
    }

    pub fn reconstruct(&self, state: &AugmentedKineticState<T>) -> KineticState<T> {
        reconstruct_with(&self.ftau, state, self.problem.epsilon)
    }

    /// `state` on `np` momentum nodes: profiles resampled spectrally in `p`,
    /// phase recomputed on the finer grid. Only the diagnostics grid changes;
    /// the oscillation `e^{−iS/ε}` is then sampled finely enough for moments.
    pub fn refine_momentum(
        &self,
        state: &AugmentedKineticState<T>,
        np: usize,
    ) -> Result<(AugmentedKineticState<T>, HoppingProblem<T>)> {
        let coarse = self.problem.pgrid;
        if np < coarse.len() {
            return Err(NgoError::InvalidGrid(format!("cannot refine {} momentum nodes to {np}", coarse.len())));
        }
        let mut problem = self.problem.clone();
        problem.pgrid = PeriodicGrid::new(coarse.lower(), coarse.length(), np)?;
        let fine = Fourier::new(problem.pgrid);
        let Shape { nx, np: nc, m } = self.shape;
        let zero = Complex::new(T::zero(), T::zero());
        let fields = state.fields.clone().map(|field| {
            let lines: Vec<Vec<T>> = (0..nx * m)
                .into_par_iter()
                .map(|q| {
                    let (ix, l) = (q / m, q % m);
                    let mut c: Vec<_> = (0..nc).map(|ip| to_complex(field[(ix * nc + ip) * m + l])).collect();
                    self.fp.forward_in_place(&mut c);
                    let mut padded = vec![zero; np];
                    for (j, v) in c.into_iter().enumerate() {
                        let k = coarse.wavenumber(j);
                        let at = |k: i64| k.rem_euclid(np as i64) as usize;
                        if coarse.nyquist() == Some(j) && np > nc {
                            let half = v * T::lit(0.5);
                            padded[at(k)] = padded[at(k)] + half;
                            padded[at(-k)] = padded[at(-k)] + half;
                        } else {
                            padded[at(k)] = v;
                        }
                    }
                    fine.inverse_in_place(&mut padded);
                    padded.into_iter().map(|z| z.re).collect()
                })
                .collect();
            let mut out = vec![T::zero(); nx * np * m];
            for (q, line) in lines.into_iter().enumerate() {
                let (ix, l) = (q / m, q % m);
                for (ip, v) in line.into_iter().enumerate() {
                    out[(ix * np + ip) * m + l] = v;
                }
            }
            out
        });
        let phase = HoppingPhase::new(&problem);
        let (mut s, mut q) = (vec![T::zero(); nx * np], vec![T::zero(); nx * np]);
        let steps = (state.t / self.dt).round().to_usize().unwrap_or(0);
        for _ in 0..steps {
            phase.step(&mut s, &mut q, self.dt);
        }
        Ok((AugmentedKineticState { fields, s2d: s, q2d: q, t: state.t }, problem))
    }

    /// Densities of the reconstruction on `np ≥ N_p` momentum nodes.
    pub fn densities(&self, state: &AugmentedKineticState<T>, np: usize) -> Result<[Vec<T>; 4]> {
        let (fine, problem) = self.refine_momentum(state, np)?;
        Ok(densities(&hopping_reconstruct(&fine, &problem), &problem.pgrid))
    }

    /// `∫∫ Π(F⁺ + F⁻)`, the quantity the augmented scheme conserves exactly.
    pub fn averaged_mass(&self, state: &AugmentedKineticState<T>) -> T {
        mass(&state.fields, self.problem.cell()) / T::count(self.shape.m)
    }
}

fn reconstruct_with<T: Real>(ftau: &Fourier<T>, state: &AugmentedKineticState<T>, epsilon: T) -> KineticState<T> {
    let m = ftau.grid().len();
    let values: Vec<[T; 4]> = state
        .s2d
        .par_iter()
        .enumerate()
        .map(|(k, &s)| {
            let t = fast_phase(s, epsilon);
            let at = |c: usize| {
                let line: Vec<_> = state.fields[c][k * m..(k + 1) * m].iter().map(|&v| to_complex(v)).collect();
                ftau.evaluate(&ftau.coefficients(&line), t).re
            };
            let g = Complex::new(at(2), at(3)) * cis(-t);
            [at(0), at(1), g.re, g.im]
        })
        .collect();
    let mut fields: [Vec<T>; 4] = Default::default();
    for v in values {
        for c in 0..4 {
            fields[c].push(v[c]);
        }
    }
    KineticState { fields, t: state.t }
}

/// `f^± = F^±(S/ε)`, `fⁱ = e^{−iS/ε} Gⁱ(S/ε)`.
pub fn hopping_reconstruct<T: Real>(state: &AugmentedKineticState<T>, problem: &HoppingProblem<T>) -> KineticState<T> {
    reconstruct_with(&Fourier::new(problem.taugrid), state, problem.epsilon)
}

/// One NGO step.
pub fn hopping_ngo_step<T: Real>(
    state: &AugmentedKineticState<T>,
    problem: &HoppingProblem<T>,
) -> Result<AugmentedKineticState<T>> {
    Ok(HoppingNgoSolver::new(problem)?.step(state))
}

/// One direct step.
pub fn hopping_direct_step<T: Real>(state: &KineticState<T>, problem: &HoppingProblem<T>) -> Result<KineticState<T>> {
    Ok(HoppingDirectSolver::new(problem)?.step(state))
}

/// `ρ_k(x) = Δp Σ_p f_k(x, p)` for the four components.
pub fn densities<T: Real>(state: &KineticState<T>, pgrid: &PeriodicGrid<T>) -> [Vec<T>; 4] {
    let np = pgrid.len();
    let dp = pgrid.spacing();
    state.fields.clone().map(|f| f.chunks(np).map(|row| row.iter().copied().sum::<T>() * dp).collect())
}

/// The four components along `x` at the momentum node `ip`.
pub fn slice_at_p<T: Real>(state: &KineticState<T>, np: usize, ip: usize) -> [Vec<T>; 4] {
    state.fields.clone().map(|f| f.iter().skip(ip).step_by(np).copied().collect())
}

/// `∫∫ (f⁺ + f⁻) dx dp` by the rectangle rule.
pub fn kinetic_mass<T: Real>(state: &KineticState<T>, problem: &HoppingProblem<T>) -> T {
    mass(&state.fields, problem.cell())
}
