//! Coefficient function handles and the correction clamp policy.

use std::sync::Arc;

use num_complex::Complex;

use crate::error::{NgoError, Result};
use crate::real::Real;

/// `x ↦ real`.
pub type RealFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;
/// `x ↦ complex`.
pub type ComplexFn<T> = Arc<dyn Fn(T) -> Complex<T> + Send + Sync>;
/// `u ↦ r(u)`.
pub type SourceFn<T> = Arc<dyn Fn(Complex<T>) -> Complex<T> + Send + Sync>;
/// `(u₁, u₂) ↦ (R₁, R₂)`.
pub type PairSourceFn<T> = Arc<dyn Fn(Complex<T>, Complex<T>) -> (Complex<T>, Complex<T>) + Send + Sync>;
/// `(x, p) ↦ real`.
pub type PhaseSpaceFn<T> = Arc<dyn Fn(T, T) -> T + Send + Sync>;
/// `(x, p) ↦ complex`.
pub type PhaseSpaceComplexFn<T> = Arc<dyn Fn(T, T) -> Complex<T> + Send + Sync>;

pub fn real_fn<T: Real>(f: impl Fn(T) -> T + Send + Sync + 'static) -> RealFn<T> {
    Arc::new(f)
}

pub fn complex_fn<T: Real>(f: impl Fn(T) -> Complex<T> + Send + Sync + 'static) -> ComplexFn<T> {
    Arc::new(f)
}

pub fn source_fn<T: Real>(f: impl Fn(Complex<T>) -> Complex<T> + Send + Sync + 'static) -> SourceFn<T> {
    Arc::new(f)
}

pub fn constant<T: Real>(value: T) -> RealFn<T> {
    Arc::new(move |_| value)
}

pub fn zero_source<T: Real>() -> SourceFn<T> {
    Arc::new(|_| Complex::new(T::zero(), T::zero()))
}

/// Treatment of nodes where a correction factor `ε/d` would exceed the cap.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum ClampMode {
    /// Saturate the factor at `±cap`.
    Saturate,
    /// Drop the correction at those nodes.
    #[default]
    Zero,
    /// Report the offending nodes as an error.
    Reject,
}

impl ClampMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ClampMode::Saturate => "saturate",
            ClampMode::Zero => "zero",
            ClampMode::Reject => "reject",
        }
    }
}

impl std::str::FromStr for ClampMode {
    type Err = NgoError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "saturate" => Ok(ClampMode::Saturate),
            "zero" => Ok(ClampMode::Zero),
            "reject" => Ok(ClampMode::Reject),
            other => Err(NgoError::InvalidParameter {
                name: "clamp",
                reason: format!("unknown mode `{other}` (expected saturate, zero or reject)"),
            }),
        }
    }
}

/// What to do where a correction factor `ε/d` would exceed `cap` in modulus.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClampPolicy<T> {
    pub cap: T,
    pub mode: ClampMode,
}

impl<T: Real> Default for ClampPolicy<T> {
    fn default() -> Self {
        Self { cap: T::lit(10.0), mode: ClampMode::default() }
    }
}

impl<T: Real> ClampPolicy<T> {
    /// `numerator / denominator`, clamped to modulus `cap`; `None` where the
    /// clamp would be needed but rejection is requested.
    pub fn ratio(&self, numerator: T, denominator: T) -> Option<T> {
        let limit = self.cap * denominator.abs();
        if numerator.abs() <= limit && denominator != T::zero() {
            return Some(numerator / denominator);
        }
        match self.mode {
            ClampMode::Reject => return None,
            ClampMode::Zero => return Some(T::zero()),
            ClampMode::Saturate => {}
        }
        let sign = if (numerator < T::zero()) != (denominator < T::zero()) && denominator != T::zero() {
            -T::one()
        } else {
            T::one()
        };
        Some(sign * self.cap)
    }

    /// Applies [`ClampPolicy::ratio`] at every node, collecting the rejected ones.
    pub fn ratios(
        &self,
        name: &'static str,
        numerator: impl Fn(usize) -> T,
        denominator: impl Fn(usize) -> T,
        n: usize,
    ) -> Result<Vec<T>> {
        let mut out = Vec::with_capacity(n);
        let mut bad = Vec::new();
        for j in 0..n {
            match self.ratio(numerator(j), denominator(j)) {
                Some(v) => out.push(v),
                None => {
                    bad.push(j);
                    out.push(T::zero());
                }
            }
        }
        if bad.is_empty() {
            Ok(out)
        } else {
            Err(NgoError::Degenerate { name, nodes: bad })
        }
    }
}
