//! Scalar abstraction shared by every solver.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FloatConst};
use rustfft::FftNum;

/// Floating point type the solvers are generic over (`f32` or `f64`).
pub trait Real: FftNum + Float + FloatConst + Display + Debug + Default + Sum + Send + Sync {
    /// Converts an `f64` literal. Panics only for values not representable at all.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal not representable")
    }

    /// Converts a count.
    fn count(n: usize) -> Self {
        Self::from_usize(n).expect("count not representable")
    }

    /// Low-order part of 2π, so that `TAU + tau_lo()` carries about twice the
    /// working precision.
    fn tau_lo() -> Self;
}

impl Real for f32 {
    fn tau_lo() -> Self {
        (std::f64::consts::TAU - f64::from(std::f32::consts::TAU) + TAU_LO_F64) as f32
    }
}

impl Real for f64 {
    fn tau_lo() -> Self {
        TAU_LO_F64
    }
}

/// 2π − fl64(2π).
const TAU_LO_F64: f64 = 2.449_293_598_294_706_4e-16;

/// Reduces the fast phase `phase / epsilon` to `[0, 2π)`.
///
/// The reduction is carried out on `phase` modulo `2π·epsilon` before the
/// division, with the period split into an exactly rounded head and a
/// correction tail, so large `phase / epsilon` does not lose digits.
pub fn fast_phase<T: Real>(phase: T, epsilon: T) -> T {
    let tau = T::TAU();
    let head = tau * epsilon;
    // Error-free remainder of the product plus the tail of 2π itself.
    let tail = tau.mul_add(epsilon, -head) + T::tau_lo() * epsilon;
    let turns = (phase / head).floor();
    let mut r = (-turns).mul_add(head, phase) - turns * tail;
    if r < T::zero() {
        r = r + head + tail;
    } else if r >= head {
        r = r - head - tail;
    }
    let out = r / epsilon;
    if out >= tau || out < T::zero() {
        T::zero()
    } else {
        out
    }
}

/// `e^{iθ}`.
#[inline]
pub fn cis<T: Real>(theta: T) -> Complex<T> {
    let (s, c) = theta.sin_cos();
    Complex::new(c, s)
}

/// Largest modulus in a slice.
pub fn max_abs<T: Real>(values: &[Complex<T>]) -> T {
    values.iter().map(|v| v.norm()).fold(T::zero(), T::max)
}

/// `max_j |a_j - b_j|`.
pub fn linf_distance<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> T {
    assert_eq!(a.len(), b.len(), "length mismatch");
    a.iter()
        .zip(b)
        .map(|(x, y)| (*x - *y).norm())
        .fold(T::zero(), T::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_phase_matches_direct_for_small_arguments() {
        let eps = 0.1_f64;
        for &s in &[0.0, 0.05, 0.3, 0.62, 1.7, -0.4] {
            let direct = (s / eps).rem_euclid(std::f64::consts::TAU);
            assert!((fast_phase(s, eps) - direct).abs() < 1e-12, "s = {s}");
        }
    }

    #[test]
    fn fast_phase_is_periodic_in_whole_turns() {
        let eps = 1e-3_f64;
        let base = 0.3 * eps;
        let far = 1000.0 * std::f64::consts::TAU * eps + base;
        assert!((fast_phase(far, eps) - 0.3).abs() < 1e-10);
    }

    #[test]
    fn fast_phase_lands_in_range() {
        for k in 0..2000 {
            let s = -3.0 + 0.003_7 * f64::from(k);
            let t = fast_phase(s, 7e-4);
            assert!((0.0..std::f64::consts::TAU).contains(&t));
        }
    }

    #[test]
    fn tau_tail_is_small() {
        assert!(f32::tau_lo().abs() < 1e-6);
        assert!(f64::tau_lo().abs() < 1e-15);
    }
}
