//! Solvers for the 1-D phase equation `∂_t S + c(x) ∂_x S = a(x)`.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::coeff::RealFn;
use crate::error::{NgoError, Result};
use crate::real::Real;
use crate::spectral::{Fourier, PeriodicGrid};

/// How the phase is advanced.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum PhaseMethod {
    /// Characteristics integrated to near machine accuracy at every node.
    Exact,
    /// First-order upwind in space, forward Euler in time.
    Upwind1,
    /// Pseudo-spectral in space, classical RK4 in time.
    #[default]
    SpectralRk4,
}

impl PhaseMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            PhaseMethod::Exact => "exact",
            PhaseMethod::Upwind1 => "upwind1",
            PhaseMethod::SpectralRk4 => "spectral_rk4",
        }
    }
}

impl fmt::Display for PhaseMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PhaseMethod {
    type Err = NgoError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(PhaseMethod::Exact),
            "upwind1" => Ok(PhaseMethod::Upwind1),
            "spectral_rk4" => Ok(PhaseMethod::SpectralRk4),
            other => Err(NgoError::InvalidParameter {
                name: "phase",
                reason: format!("unknown method `{other}` (expected exact, upwind1 or spectral_rk4)"),
            }),
        }
    }
}

/// Largest step used when integrating along characteristics.
const CHARACTERISTIC_STEP: f64 = 1e-3;

/// `S(t, x)` for `∂_t S + c ∂_x S = a`, `S(0) = s0`, by RK4 along the
/// backward characteristic through `x`.
pub fn characteristic_phase<T: Real>(
    speed: &(dyn Fn(T) -> T + Send + Sync),
    forcing: &(dyn Fn(T) -> T + Send + Sync),
    initial: &(dyn Fn(T) -> T + Send + Sync),
    x: T,
    t: T,
) -> T {
    if t <= T::zero() {
        return initial(x);
    }
    let steps = (t / T::lit(CHARACTERISTIC_STEP)).ceil().to_usize().unwrap_or(1).max(1);
    let h = t / T::count(steps);
    let half = h / T::lit(2.0);
    let sixth = h / T::lit(6.0);
    // Backwards in time: y' = −c(y), accumulated integral of a(y).
    let (mut y, mut acc) = (x, T::zero());
    for _ in 0..steps {
        let k1 = -speed(y);
        let q1 = forcing(y);
        let y2 = y + half * k1;
        let k2 = -speed(y2);
        let q2 = forcing(y2);
        let y3 = y + half * k2;
        let k3 = -speed(y3);
        let q3 = forcing(y3);
        let y4 = y + h * k3;
        let k4 = -speed(y4);
        let q4 = forcing(y4);
        let two = T::lit(2.0);
        y = y + sixth * (k1 + two * k2 + two * k3 + k4);
        acc = acc + sixth * (q1 + two * q2 + two * q3 + q4);
    }
    initial(y) + acc
}

/// `S(t, ·)` in closed form for a constant speed `c` and zero initial phase:
/// `S = (A(x) − A(x − ct))/c` with `A' = a`, where `A` is the linear part
/// `mean(a)·x` plus the spectral antiderivative of `a − mean(a)`.
pub fn exact_phase_constant_c<T: Real>(grid: &PeriodicGrid<T>, c: T, a: &[T], t: T) -> Result<Vec<T>> {
    if a.len() != grid.len() {
        return Err(NgoError::InvalidGrid("forcing samples do not match the grid".into()));
    }
    let mean = a.iter().copied().sum::<T>() / T::count(a.len());
    if c == T::zero() {
        return Ok(a.iter().map(|&v| v * t).collect());
    }
    let fourier = Fourier::new(*grid);
    let samples: Vec<_> = a.iter().map(|&v| num_complex::Complex::new(v, T::zero())).collect();
    let periodic = fourier.antiderivative(&samples, crate::spectral::MeanPolicy::Subtract)?;
    let coeffs = fourier.coefficients(&periodic);
    let shift = c * t;
    Ok(grid
        .nodes()
        .iter()
        .zip(&periodic)
        .map(|(&x, here)| {
            let there = fourier.evaluate(&coeffs, x - shift).re;
            mean * t + (here.re - there) / c
        })
        .collect())
}

/// Steps `∂_t S + c(x) ∂_x S = a(x)` on a periodic grid.
#[derive(Clone)]
pub struct PhaseSolver<T: Real> {
    grid: PeriodicGrid<T>,
    fourier: Fourier<T>,
    nodes: Vec<T>,
    speed: Vec<T>,
    forcing: Vec<T>,
    speed_fn: RealFn<T>,
    forcing_fn: RealFn<T>,
    initial_fn: RealFn<T>,
    method: PhaseMethod,
}

impl<T: Real> fmt::Debug for PhaseSolver<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PhaseSolver")
            .field("grid", &self.grid)
            .field("method", &self.method)
            .finish()
    }
}

impl<T: Real> PhaseSolver<T> {
    pub fn new(
        grid: PeriodicGrid<T>,
        speed: RealFn<T>,
        forcing: RealFn<T>,
        initial: RealFn<T>,
        method: PhaseMethod,
    ) -> Self {
        let nodes = grid.nodes();
        Self {
            fourier: Fourier::new(grid),
            speed: nodes.iter().map(|&x| speed(x)).collect(),
            forcing: nodes.iter().map(|&x| forcing(x)).collect(),
            nodes,
            grid,
            speed_fn: speed,
            forcing_fn: forcing,
            initial_fn: initial,
            method,
        }
    }

    pub fn method(&self) -> PhaseMethod {
        self.method
    }

    pub fn grid(&self) -> &PeriodicGrid<T> {
        &self.grid
    }

    pub fn initial(&self) -> Vec<T> {
        self.nodes.iter().map(|&x| (self.initial_fn)(x)).collect()
    }

    /// Courant number `max|c|·dt/dx`.
    pub fn courant(&self, dt: T) -> T {
        let cmax = self.speed.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        cmax * dt / self.grid.spacing()
    }

    /// Rejects steps violating the CFL condition of the upwind method.
    pub fn check(&self, dt: T) -> Result<()> {
        if self.method == PhaseMethod::Upwind1 {
            let courant = self.courant(dt);
            if courant >= T::one() {
                return Err(NgoError::Cfl { courant: courant.to_f64().unwrap_or(f64::NAN) });
            }
        }
        Ok(())
    }

    /// The phase at time `t` along characteristics.
    pub fn exact_at(&self, t: T) -> Vec<T> {
        self.nodes
            .par_iter()
            .map(|&x| characteristic_phase(&*self.speed_fn, &*self.forcing_fn, &*self.initial_fn, x, t))
            .collect()
    }

    /// Advances `s` from time `t` to `t + dt`.
    pub fn advance(&self, s: &mut [T], t: T, dt: T) {
        match self.method {
            PhaseMethod::Exact => s.copy_from_slice(&self.exact_at(t + dt)),
            PhaseMethod::Upwind1 => self.upwind_step(s, dt),
            PhaseMethod::SpectralRk4 => self.rk4_step(s, dt),
        }
    }

    /// Runs `steps` uniform steps of size `dt` from the initial phase.
    pub fn solve(&self, steps: usize, dt: T) -> Result<Vec<T>> {
        self.check(dt)?;
        if self.method == PhaseMethod::Exact {
            return Ok(self.exact_at(T::count(steps) * dt));
        }
        let mut s = self.initial();
        for n in 0..steps {
            self.advance(&mut s, T::count(n) * dt, dt);
        }
        Ok(s)
    }

    fn upwind_step(&self, s: &mut [T], dt: T) {
        let n = s.len();
        let inv_dx = T::one() / self.grid.spacing();
        let old = s.to_vec();
        for j in 0..n {
            let c = self.speed[j];
            let slope = if c >= T::zero() {
                (old[j] - old[(j + n - 1) % n]) * inv_dx
            } else {
                (old[(j + 1) % n] - old[j]) * inv_dx
            };
            s[j] = old[j] + dt * (self.forcing[j] - c * slope);
        }
    }

    fn rhs(&self, s: &[T]) -> Vec<T> {
        let ds = self.fourier.derivative_real(s);
        ds.iter()
            .zip(&self.speed)
            .zip(&self.forcing)
            .map(|((d, c), a)| *a - *c * *d)
            .collect()
    }

    fn rk4_step(&self, s: &mut [T], dt: T) {
        let half = dt / T::lit(2.0);
        let stage = |base: &[T], k: &[T], h: T| -> Vec<T> {
            base.iter().zip(k).map(|(b, d)| *b + h * *d).collect()
        };
        let k1 = self.rhs(s);
        let k2 = self.rhs(&stage(s, &k1, half));
        let k3 = self.rhs(&stage(s, &k2, half));
        let k4 = self.rhs(&stage(s, &k3, dt));
        let two = T::lit(2.0);
        let sixth = dt / T::lit(6.0);
        for (j, v) in s.iter_mut().enumerate() {
            *v = *v + sixth * (k1[j] + two * k2[j] + two * k3[j] + k4[j]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::{constant, real_fn};
    use std::f64::consts::PI;

    fn grid(n: usize) -> PeriodicGrid<f64> {
        PeriodicGrid::new(-PI / 2.0, PI, n).unwrap()
    }

    #[test]
    fn method_names_round_trip() {
        for m in [PhaseMethod::Exact, PhaseMethod::Upwind1, PhaseMethod::SpectralRk4] {
            assert_eq!(m.as_str().parse::<PhaseMethod>().unwrap(), m);
        }
        assert!("rk4".parse::<PhaseMethod>().is_err());
    }

    #[test]
    fn closed_form_constant_forcing() {
        let g = grid(16);
        let s = exact_phase_constant_c(&g, 0.7, &[2.0; 16], 0.3).unwrap();
        assert!(s.iter().all(|v| (v - 0.6).abs() < 1e-14));
    }

    #[test]
    fn closed_form_matches_hand_antiderivative() {
        let g = grid(32);
        let a: Vec<f64> = g.nodes().iter().map(|x| 1.5 + (2.0 * x).cos()).collect();
        let t = 0.4;
        let s = exact_phase_constant_c(&g, 1.0, &a, t).unwrap();
        for (x, v) in g.nodes().iter().zip(&s) {
            let expect = 1.5 * t + ((2.0 * x).sin() - (2.0 * (x - t)).sin()) / 2.0;
            assert!((v - expect).abs() < 1e-12);
        }
        assert!(exact_phase_constant_c(&g, 1.0, &a, 0.0).unwrap().iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn characteristics_match_closed_form() {
        let a = real_fn(|x: f64| 1.5 + (2.0 * x).cos());
        let c = constant(1.0);
        let zero = constant(0.0);
        let x = 0.37;
        let t = 0.1;
        let s = characteristic_phase(&*c, &*a, &*zero, x, t);
        let expect = 1.5 * t + ((2.0 * x).sin() - (2.0 * (x - t)).sin()) / 2.0;
        assert!((s - expect).abs() < 1e-13);
    }

    #[test]
    fn zero_forcing_keeps_zero() {
        for method in [PhaseMethod::Exact, PhaseMethod::Upwind1, PhaseMethod::SpectralRk4] {
            let p = PhaseSolver::new(grid(20), real_fn(|x: f64| x.cos().powi(2)), constant(0.0), constant(0.0), method);
            let s = p.solve(10, 0.01).unwrap();
            assert!(s.iter().all(|v| v.abs() < 1e-15), "{method}");
        }
    }

    #[test]
    fn zero_speed_integrates_pointwise() {
        let a = real_fn(|x: f64| 1.0 + 0.5 * (2.0 * x).sin());
        let beta = real_fn(|x: f64| 0.1 * (2.0 * x).cos());
        let g = grid(24);
        let p = PhaseSolver::new(g, constant(0.0), a.clone(), beta.clone(), PhaseMethod::SpectralRk4);
        let s = p.solve(50, 0.002).unwrap();
        for (x, v) in g.nodes().iter().zip(&s) {
            assert!((v - (beta(*x) + a(*x) * 0.1)).abs() < 1e-10);
        }
    }

    #[test]
    fn spectral_rk4_matches_closed_form() {
        let g = grid(64);
        let a = real_fn(|x: f64| 1.5 + (2.0 * x).cos());
        let p = PhaseSolver::new(g, constant(1.0), a.clone(), constant(0.0), PhaseMethod::SpectralRk4);
        let dt = g.spacing() / 2.0;
        let steps = (0.1 / dt).ceil() as usize;
        let dt = 0.1 / steps as f64;
        let s = p.solve(steps, dt).unwrap();
        let samples: Vec<f64> = g.nodes().iter().map(|&x| a(x)).collect();
        let exact = exact_phase_constant_c(&g, 1.0, &samples, 0.1).unwrap();
        let err = s.iter().zip(&exact).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "err = {err}");
    }

    #[test]
    fn upwind_is_first_order_and_checks_cfl() {
        let g = grid(40);
        let a = real_fn(|x: f64| 1.5 + (2.0 * x).cos());
        let p = PhaseSolver::new(g, constant(1.0), a, constant(0.0), PhaseMethod::Upwind1);
        assert!(matches!(p.solve(1, 2.0 * g.spacing()), Err(NgoError::Cfl { .. })));
        let s = p.solve(10, 0.01).unwrap();
        let exact = p.exact_at(0.1);
        let err = s.iter().zip(&exact).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        assert!(err > 1e-6 && err < 5e-2, "err = {err}");
    }
}
