//! Exponentials of small dense matrices.
//!
//! Scaling and squaring around a degree-14 Taylor core: the argument is
//! scaled so its 1-norm is at most 1/2, where the truncated series is
//! accurate to well below 1e-15 relative.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex;
use num_traits::{One, Zero};

use crate::real::Real;

/// Entry type of a matrix that can be exponentiated: a real or complex scalar.
pub trait MatrixEntry:
    Copy + Zero + One + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Send + Sync
{
    type Real: Real;
    fn modulus(self) -> Self::Real;
    fn scale(self, s: Self::Real) -> Self;
}

impl<T: Real> MatrixEntry for T {
    type Real = T;
    fn modulus(self) -> T {
        self.abs()
    }
    fn scale(self, s: T) -> T {
        self * s
    }
}

impl<T: Real> MatrixEntry for Complex<T> {
    type Real = T;
    fn modulus(self) -> T {
        self.norm()
    }
    fn scale(self, s: T) -> Self {
        self * s
    }
}

pub type Matrix<S, const N: usize> = [[S; N]; N];

pub fn identity<S: MatrixEntry, const N: usize>() -> Matrix<S, N> {
    let mut m = [[S::zero(); N]; N];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = S::one();
    }
    m
}

pub fn matmul<S: MatrixEntry, const N: usize>(a: &Matrix<S, N>, b: &Matrix<S, N>) -> Matrix<S, N> {
    let mut c = [[S::zero(); N]; N];
    for i in 0..N {
        for k in 0..N {
            let aik = a[i][k];
            for j in 0..N {
                c[i][j] = c[i][j] + aik * b[k][j];
            }
        }
    }
    c
}

pub fn matvec<S: MatrixEntry, const N: usize>(a: &Matrix<S, N>, v: &[S; N]) -> [S; N] {
    let mut out = [S::zero(); N];
    for (o, row) in out.iter_mut().zip(a) {
        *o = row.iter().zip(v).fold(S::zero(), |acc, (x, y)| acc + *x * *y);
    }
    out
}

/// Maximum absolute column sum.
pub fn one_norm<S: MatrixEntry, const N: usize>(a: &Matrix<S, N>) -> S::Real {
    (0..N)
        .map(|j| a.iter().map(|row| row[j].modulus()).sum::<S::Real>())
        .fold(S::Real::zero(), num_traits::Float::max)
}

const TAYLOR_DEGREE: usize = 14;

fn squarings_for<T: Real>(norm: T, target: T) -> usize {
    if norm > target {
        (norm / target).log2().ceil().to_usize().unwrap_or(0)
    } else {
        0
    }
}

/// `exp(a)`.
pub fn expm<S: MatrixEntry, const N: usize>(a: &Matrix<S, N>) -> Matrix<S, N> {
    let half = S::Real::lit(0.5);
    let norm = one_norm(a);
    let squarings = squarings_for(norm, half);
    let factor = S::Real::one() / S::Real::lit(2f64.powi(squarings as i32));
    let mut scaled = *a;
    for row in scaled.iter_mut() {
        for v in row.iter_mut() {
            *v = v.scale(factor);
        }
    }

    // Horner: I + A(I + A/2(I + A/3(...))).
    let eye = identity::<S, N>();
    let mut p = eye;
    for k in (1..=TAYLOR_DEGREE).rev() {
        let inv_k = S::Real::one() / S::Real::count(k);
        let ap = matmul(&scaled, &p);
        for i in 0..N {
            for j in 0..N {
                p[i][j] = eye[i][j] + ap[i][j].scale(inv_k);
            }
        }
    }
    for _ in 0..squarings {
        p = matmul(&p, &p);
    }
    p
}

/// `exp(dt·a)`.
pub fn expm_scaled<S: MatrixEntry, const N: usize>(a: &Matrix<S, N>, dt: S::Real) -> Matrix<S, N> {
    let mut m = *a;
    for row in m.iter_mut() {
        for v in row.iter_mut() {
            *v = v.scale(dt);
        }
    }
    expm(&m)
}
