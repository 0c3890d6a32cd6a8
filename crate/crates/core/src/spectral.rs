//! Periodic grids and Fourier-space operators.
//!
//! Every operator here acts mode-wise on the discrete Fourier coefficients of
//! samples on a uniform periodic grid. Coefficients are normalised so that
//!
//! ```text
//! f_j = Σ_k c_k · exp(i ω_k (x_j − lower)),   ω_k = 2π k / length,
//! ```
//!
//! with `k` in FFT order (`0, 1, …, n/2 − 1, −n/2, …, −1`). For even `n` the
//! mode `k = −n/2` is the unmatched Nyquist mode; each operator documents how
//! it treats it.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{NgoError, Result};
use crate::real::{max_abs, Real};

/// Uniform periodic 1-D grid `lower + j·length/n`, `j = 0..n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PeriodicGrid<T> {
    lower: T,
    length: T,
    n: usize,
}

impl<T: Real> PeriodicGrid<T> {
    pub fn new(lower: T, length: T, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(NgoError::InvalidGrid(format!("need at least 2 nodes, got {n}")));
        }
        if !(length > T::zero()) || !length.is_finite() || !lower.is_finite() {
            return Err(NgoError::InvalidGrid(format!(
                "period must be positive and finite (lower = {lower}, length = {length})"
            )));
        }
        Ok(Self { lower, length, n })
    }

    /// Like [`PeriodicGrid::new`] but additionally requires a power-of-two size.
    pub fn new_pow2(lower: T, length: T, n: usize) -> Result<Self> {
        if !n.is_power_of_two() {
            return Err(NgoError::InvalidGrid(format!("{n} is not a power of two")));
        }
        Self::new(lower, length, n)
    }

    /// The fast-phase grid on `[0, 2π)`.
    pub fn tau(n: usize) -> Result<Self> {
        Self::new(T::zero(), T::TAU(), n)
    }

    pub fn lower(&self) -> T {
        self.lower
    }

    pub fn length(&self) -> T {
        self.length
    }

    pub fn upper(&self) -> T {
        self.lower + self.length
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> T {
        self.length / T::count(self.n)
    }

    pub fn node(&self, j: usize) -> T {
        self.lower + T::count(j) * self.spacing()
    }

    pub fn nodes(&self) -> Vec<T> {
        (0..self.n).map(|j| self.node(j)).collect()
    }

    /// Signed integer wavenumber stored at FFT index `j`.
    pub fn wavenumber(&self, j: usize) -> i64 {
        let (j, n) = (j as i64, self.n as i64);
        if j < (n + 1) / 2 {
            j
        } else {
            j - n
        }
    }

    /// Angular wavenumber `2π k / length` for integer wavenumber `k`.
    pub fn angular(&self, k: i64) -> T {
        T::TAU() * T::from_i64(k).expect("wavenumber") / self.length
    }

    /// FFT index of the unmatched Nyquist mode, present for even sizes.
    pub fn nyquist(&self) -> Option<usize> {
        (self.n % 2 == 0).then_some(self.n / 2)
    }

    /// True when this is a `[0, 2π)` grid.
    pub fn is_tau_grid(&self) -> bool {
        self.lower == T::zero() && (self.length - T::TAU()).abs() <= T::lit(1e-12) * T::TAU()
    }

    /// Maps `x` into `[0, length)` relative to `lower`.
    pub fn offset(&self, x: T) -> T {
        let t = (x - self.lower) % self.length;
        if t < T::zero() {
            let wrapped = t + self.length;
            if wrapped >= self.length {
                T::zero()
            } else {
                wrapped
            }
        } else {
            t
        }
    }
}

/// Transform plans and wavenumbers for one grid.
///
/// Cloning is cheap; plans are shared and every call allocates its own
/// scratch, so one value may be used from many threads at once.
#[derive(Clone)]
pub struct Fourier<T: Real> {
    grid: PeriodicGrid<T>,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
    omega: Vec<T>,
}

impl<T: Real> fmt::Debug for Fourier<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Fourier").field("grid", &self.grid).finish()
    }
}

/// What [`Fourier::antiderivative`] does with a nonzero mean.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum MeanPolicy {
    /// Drop the mean before integrating.
    #[default]
    Subtract,
    /// Reject inputs whose mean exceeds `1e-10·max|f|` (or 64 ulp in single precision).
    Strict,
}

impl<T: Real> Fourier<T> {
    pub fn new(grid: PeriodicGrid<T>) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(grid.len());
        let inverse = planner.plan_fft_inverse(grid.len());
        let omega = (0..grid.len()).map(|j| grid.angular(grid.wavenumber(j))).collect();
        Self { grid, forward, inverse, omega }
    }

    pub fn grid(&self) -> &PeriodicGrid<T> {
        &self.grid
    }

    /// Angular wavenumbers in FFT order.
    pub fn omega(&self) -> &[T] {
        &self.omega
    }

    /// Normalised Fourier coefficients of `samples`.
    pub fn coefficients(&self, samples: &[Complex<T>]) -> Vec<Complex<T>> {
        let mut c = samples.to_vec();
        self.forward_in_place(&mut c);
        c
    }

    /// Samples from normalised coefficients.
    pub fn samples(&self, coeffs: &[Complex<T>]) -> Vec<Complex<T>> {
        let mut v = coeffs.to_vec();
        self.inverse_in_place(&mut v);
        v
    }

    pub fn forward_in_place(&self, data: &mut [Complex<T>]) {
        assert_eq!(data.len(), self.grid.len(), "sample count does not match grid");
        self.forward.process(data);
        let scale = T::one() / T::count(data.len());
        for c in data.iter_mut() {
            *c = *c * scale;
        }
    }

    pub fn inverse_in_place(&self, data: &mut [Complex<T>]) {
        assert_eq!(data.len(), self.grid.len(), "sample count does not match grid");
        self.inverse.process(data);
    }

    /// Applies the Fourier multiplier `m(index, ω)` in place.
    pub fn apply_multiplier<F>(&self, data: &mut [Complex<T>], multiplier: F)
    where
        F: Fn(usize, T) -> Complex<T>,
    {
        self.forward_in_place(data);
        for (j, c) in data.iter_mut().enumerate() {
            *c = *c * multiplier(j, self.omega[j]);
        }
        self.inverse_in_place(data);
    }

    fn is_nyquist(&self, j: usize) -> bool {
        self.grid.nyquist() == Some(j)
    }

    /// Spectral derivative; the Nyquist coefficient is zeroed.
    pub fn derivative(&self, f: &[Complex<T>]) -> Vec<Complex<T>> {
        let mut g = f.to_vec();
        self.apply_multiplier(&mut g, |j, w| {
            if self.is_nyquist(j) {
                Complex::new(T::zero(), T::zero())
            } else {
                Complex::new(T::zero(), w)
            }
        });
        g
    }

    /// Spectral derivative of real samples.
    pub fn derivative_real(&self, f: &[T]) -> Vec<T> {
        let c: Vec<_> = f.iter().map(|&x| Complex::new(x, T::zero())).collect();
        self.derivative(&c).into_iter().map(|z| z.re).collect()
    }

    /// Exact solution operator of `∂_t g + speed ∂_x g = 0` over `dt`.
    ///
    /// The Nyquist mode is shifted as wavenumber `−n/2`, which keeps the
    /// operator unitary.
    pub fn advect(&self, f: &[Complex<T>], speed: T, dt: T) -> Vec<Complex<T>> {
        let mut g = f.to_vec();
        let shift = speed * dt;
        self.apply_multiplier(&mut g, |_, w| {
            let (s, c) = (w * shift).sin_cos();
            Complex::new(c, -s)
        });
        g
    }

    /// Exact advection of real samples; the Nyquist mode is shifted
    /// symmetrically (multiplied by `cos(ω_N·speed·dt)`) so the result stays real.
    pub fn advect_real(&self, f: &[T], speed: T, dt: T) -> Vec<T> {
        let mut g: Vec<_> = f.iter().map(|&x| Complex::new(x, T::zero())).collect();
        self.advect_real_in_place(&mut g, speed, dt);
        g.into_iter().map(|z| z.re).collect()
    }

    /// In-place variant of [`Fourier::advect_real`] working on a complex
    /// buffer whose imaginary part is ignored on input and cleared on output.
    pub fn advect_real_in_place(&self, g: &mut [Complex<T>], speed: T, dt: T) {
        for z in g.iter_mut() {
            z.im = T::zero();
        }
        let shift = speed * dt;
        self.apply_multiplier(g, |j, w| {
            let (s, c) = (w * shift).sin_cos();
            if self.is_nyquist(j) {
                Complex::new(c, T::zero())
            } else {
                Complex::new(c, -s)
            }
        });
        for z in g.iter_mut() {
            z.im = T::zero();
        }
    }

    /// Grid average (zeroth Fourier coefficient).
    pub fn average(&self, f: &[Complex<T>]) -> Complex<T> {
        average(f)
    }

    /// `L⁻¹(I − Π)`: the zero-mean periodic antiderivative.
    pub fn antiderivative(&self, f: &[Complex<T>], policy: MeanPolicy) -> Result<Vec<Complex<T>>> {
        let mean = average(f);
        if policy == MeanPolicy::Strict {
            let rel = T::lit(1e-10).max(T::lit(64.0) * T::epsilon());
            let tolerance = rel * max_abs(f);
            if mean.norm() > tolerance {
                return Err(NgoError::NonzeroMean {
                    mean: mean.norm().to_f64().unwrap_or(f64::NAN),
                    tolerance: tolerance.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        let mut g = f.to_vec();
        self.apply_multiplier(&mut g, |j, w| {
            if j == 0 {
                Complex::new(T::zero(), T::zero())
            } else {
                Complex::new(T::zero(), -T::one() / w)
            }
        });
        Ok(g)
    }

    /// Solves `w + mu ∂_x w = f` mode-wise: `ŵ_k = f̂_k / (1 + i mu ω_k)`.
    pub fn q_inverse(&self, f: &[Complex<T>], mu: T) -> Vec<Complex<T>> {
        let mut g = f.to_vec();
        self.q_inverse_in_place(&mut g, mu);
        g
    }

    pub fn q_inverse_in_place(&self, g: &mut [Complex<T>], mu: T) {
        if mu == T::zero() {
            return;
        }
        self.apply_multiplier(g, |_, w| Complex::new(T::one(), mu * w).inv());
    }

    /// Trigonometric interpolant of `samples` evaluated at `x`.
    pub fn interpolate(&self, samples: &[Complex<T>], x: T) -> Complex<T> {
        self.evaluate(&self.coefficients(samples), x)
    }

    /// Evaluates the trigonometric polynomial with normalised coefficients
    /// `coeffs` at `x` (any real; reduced modulo the period). The Nyquist
    /// coefficient contributes through `cos`, so the interpolant is real for
    /// real data and exact at the nodes.
    pub fn evaluate(&self, coeffs: &[Complex<T>], x: T) -> Complex<T> {
        let t = self.grid.offset(x);
        let mut acc = Complex::new(T::zero(), T::zero());
        for (j, c) in coeffs.iter().enumerate() {
            let phase = self.omega[j] * t;
            if self.is_nyquist(j) {
                acc = acc + *c * phase.cos();
            } else {
                let (s, co) = phase.sin_cos();
                acc = acc + *c * Complex::new(co, s);
            }
        }
        acc
    }
}

/// Arithmetic mean of samples.
pub fn average<T: Real>(f: &[Complex<T>]) -> Complex<T> {
    let sum = f.iter().fold(Complex::new(T::zero(), T::zero()), |a, b| a + *b);
    sum / T::count(f.len())
}

/// Complex samples on a periodic grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField1D<T> {
    pub grid: PeriodicGrid<T>,
    pub values: Vec<Complex<T>>,
}

impl<T: Real> SpectralField1D<T> {
    pub fn new(grid: PeriodicGrid<T>, values: Vec<Complex<T>>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(NgoError::InvalidGrid(format!(
                "{} samples for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: PeriodicGrid<T>, f: impl Fn(T) -> Complex<T>) -> Self {
        let values = grid.nodes().into_iter().map(f).collect();
        Self { grid, values }
    }

    pub fn from_real(grid: PeriodicGrid<T>, values: &[T]) -> Result<Self> {
        Self::new(grid, values.iter().map(|&v| Complex::new(v, T::zero())).collect())
    }

    fn with_values(&self, values: Vec<Complex<T>>) -> Self {
        Self { grid: self.grid, values }
    }

    fn fourier(&self) -> Fourier<T> {
        Fourier::new(self.grid)
    }

    pub fn max_abs(&self) -> T {
        max_abs(&self.values)
    }
}

pub fn spectral_derivative<T: Real>(f: &SpectralField1D<T>) -> SpectralField1D<T> {
    f.with_values(f.fourier().derivative(&f.values))
}

pub fn advect_exact<T: Real>(f: &SpectralField1D<T>, speed: T, dt: T) -> SpectralField1D<T> {
    f.with_values(f.fourier().advect(&f.values, speed, dt))
}

pub fn tau_average<T: Real>(f: &SpectralField1D<T>) -> Complex<T> {
    average(&f.values)
}

pub fn tau_antiderivative<T: Real>(
    f: &SpectralField1D<T>,
    policy: MeanPolicy,
) -> Result<SpectralField1D<T>> {
    Ok(f.with_values(f.fourier().antiderivative(&f.values, policy)?))
}

pub fn apply_q_inverse<T: Real>(f: &SpectralField1D<T>, mu: T) -> Result<SpectralField1D<T>> {
    if !(mu >= T::zero()) {
        return Err(NgoError::InvalidParameter {
            name: "mu",
            reason: format!("must be non-negative, got {mu}"),
        });
    }
    Ok(f.with_values(f.fourier().q_inverse(&f.values, mu)))
}

pub fn trig_interpolate<T: Real>(f: &SpectralField1D<T>, at: T) -> Complex<T> {
    f.fourier().interpolate(&f.values, at)
}

/// Complex samples on an (x-grid × τ-grid) tensor grid, stored x-major: the
/// τ-slice of node `j` is contiguous.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileField<T> {
    pub xgrid: PeriodicGrid<T>,
    pub taugrid: PeriodicGrid<T>,
    pub values: Vec<Complex<T>>,
}

impl<T: Real> ProfileField<T> {
    pub fn new(xgrid: PeriodicGrid<T>, taugrid: PeriodicGrid<T>, values: Vec<Complex<T>>) -> Result<Self> {
        if !taugrid.is_tau_grid() {
            return Err(NgoError::InvalidGrid("the τ-grid must cover [0, 2π)".into()));
        }
        if values.len() != xgrid.len() * taugrid.len() {
            return Err(NgoError::InvalidGrid(format!(
                "{} samples for a {}×{} grid",
                values.len(),
                xgrid.len(),
                taugrid.len()
            )));
        }
        Ok(Self { xgrid, taugrid, values })
    }

    /// Samples `f(x, τ)` at every node.
    pub fn from_fn(
        xgrid: PeriodicGrid<T>,
        taugrid: PeriodicGrid<T>,
        f: impl Fn(T, T) -> Complex<T>,
    ) -> Result<Self> {
        let taus = taugrid.nodes();
        let values = xgrid
            .nodes()
            .into_iter()
            .flat_map(|x| taus.iter().map(move |&t| (x, t)).collect::<Vec<_>>())
            .map(|(x, t)| f(x, t))
            .collect();
        Self::new(xgrid, taugrid, values)
    }

    pub fn ntau(&self) -> usize {
        self.taugrid.len()
    }

    pub fn slice(&self, j: usize) -> &[Complex<T>] {
        let m = self.ntau();
        &self.values[j * m..(j + 1) * m]
    }

    pub fn slice_mut(&mut self, j: usize) -> &mut [Complex<T>] {
        let m = self.ntau();
        &mut self.values[j * m..(j + 1) * m]
    }

    pub fn slices(&self) -> std::slice::ChunksExact<'_, Complex<T>> {
        self.values.chunks_exact(self.ntau())
    }

    pub fn max_abs(&self) -> T {
        max_abs(&self.values)
    }
}
