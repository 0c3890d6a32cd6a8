//! Named coefficient functions selectable from configuration files.
//!
//! A name that parses as a number stands for that constant (for `r`, the
//! linear damping `r(u) = λu`).

use std::f64::consts::TAU;
use std::sync::Arc;

use ngo_core::coeff::{ComplexFn, PhaseSpaceComplexFn, PhaseSpaceFn, RealFn, SourceFn};
use num_complex::Complex64 as C;

use crate::error::{HarnessError, Result};

pub const REAL_NAMES: &[&str] = &[
    "zero",
    "one",
    "cos2",
    "three_halves_plus_cos2x",
    "one_plus_cos2x",
    "E_3half_cos",
    "E_avoided",
];
pub const SOURCE_NAMES: &[&str] = &["zero", "rational_r"];
pub const DATA_NAMES: &[&str] = &["one", "scalar_smooth", "system_smooth"];
pub const COUPLING_NAMES: &[&str] = &["zero", "b_avoided"];
pub const KINETIC_NAMES: &[&str] = &["zero", "gaussian_maxwellian"];

fn unknown(kind: &str, name: &str, known: &[&str]) -> HarnessError {
    HarnessError::Config(format!("unknown {kind} function `{name}` (known: {}, or a number)", known.join(", ")))
}

/// `x ↦ f(x)`; `E_avoided` depends on `ε`.
pub fn real(name: &str, epsilon: f64) -> Result<RealFn<f64>> {
    if let Ok(v) = name.parse::<f64>() {
        return Ok(Arc::new(move |_| v));
    }
    let f: RealFn<f64> = match name {
        "zero" => Arc::new(|_| 0.0),
        "one" => Arc::new(|_| 1.0),
        "cos2" => Arc::new(|x: f64| x.cos().powi(2)),
        "three_halves_plus_cos2x" => Arc::new(|x: f64| 1.5 + (2.0 * x).cos()),
        "one_plus_cos2x" => Arc::new(|x: f64| 1.0 + (2.0 * x).cos()),
        "E_3half_cos" => Arc::new(|x: f64| 1.5 + x.cos()),
        "E_avoided" => Arc::new(move |x: f64| 1.0 - (x / 2.0).cos() + epsilon),
        _ => return Err(unknown("real", name, REAL_NAMES)),
    };
    Ok(f)
}

/// `r(u)`.
pub fn source(name: &str) -> Result<SourceFn<f64>> {
    if let Ok(lambda) = name.parse::<f64>() {
        return Ok(Arc::new(move |u| u * lambda));
    }
    let f: SourceFn<f64> = match name {
        "zero" => Arc::new(|_| C::new(0.0, 0.0)),
        "rational_r" => Arc::new(|u: C| {
            let d = u * u + 2.0 * u.norm_sqr();
            if d == C::new(0.0, 0.0) {
                d
            } else {
                u * u / d
            }
        }),
        _ => return Err(unknown("source", name, SOURCE_NAMES)),
    };
    Ok(f)
}

/// Complex initial data `x ↦ α(x)`.
pub fn data(name: &str) -> Result<ComplexFn<f64>> {
    if let Ok(v) = name.parse::<f64>() {
        return Ok(Arc::new(move |_| C::new(v, 0.0)));
    }
    let f: ComplexFn<f64> = match name {
        "one" => Arc::new(|_| C::new(1.0, 0.0)),
        "scalar_smooth" => Arc::new(|x: f64| C::new(1.0 + 0.5 * (2.0 * x).cos(), 1.0 + 0.5 * (2.0 * x).sin())),
        "system_smooth" => Arc::new(|x: f64| C::new(1.0 + 0.5 * x.cos(), x.sin())),
        _ => return Err(unknown("data", name, DATA_NAMES)),
    };
    Ok(f)
}

/// Interband coupling `(x, p) ↦ b`.
pub fn coupling(name: &str) -> Result<PhaseSpaceComplexFn<f64>> {
    if let Ok(v) = name.parse::<f64>() {
        return Ok(Arc::new(move |_, _| C::new(v, 0.0)));
    }
    let f: PhaseSpaceComplexFn<f64> = match name {
        "zero" => Arc::new(|_, _| C::new(0.0, 0.0)),
        "b_avoided" => Arc::new(|_, p: f64| C::new(-0.5 * (p + 1.0).sin(), 0.0)),
        _ => return Err(unknown("coupling", name, COUPLING_NAMES)),
    };
    Ok(f)
}

/// Kinetic data `(f⁺, f⁻, fⁱ)`.
pub fn kinetic(name: &str) -> Result<(PhaseSpaceFn<f64>, PhaseSpaceFn<f64>, PhaseSpaceComplexFn<f64>)> {
    match name {
        "zero" => Ok((Arc::new(|_, _| 0.0), Arc::new(|_, _| 0.0), Arc::new(|_, _| C::new(0.0, 0.0)))),
        "gaussian_maxwellian" => {
            let maxwell = |p: f64| (-p * p / 2.0).exp() / TAU.sqrt();
            let fpm: PhaseSpaceFn<f64> = Arc::new(move |x: f64, p: f64| (1.0 + 0.5 * x.cos()) * maxwell(p));
            let fi: PhaseSpaceComplexFn<f64> =
                Arc::new(move |x: f64, p: f64| C::new(1.0 + 0.5 * x.sin(), 1.0 + 0.5 * x.cos()) * maxwell(p));
            Ok((fpm.clone(), fpm, fi))
        }
        _ => Err(unknown("kinetic data", name, KINETIC_NAMES)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_are_constants() {
        assert_eq!(real("4", 0.1).unwrap()(0.3), 4.0);
        assert_eq!(source("-0.5").unwrap()(C::new(2.0, 1.0)), C::new(-1.0, -0.5));
    }

    #[test]
    fn avoided_gap_closes_to_epsilon() {
        let e = real("E_avoided", 0.01).unwrap();
        assert!((e(0.0) - 0.01).abs() < 1e-15);
    }

    #[test]
    fn rational_source_at_zero() {
        assert_eq!(source("rational_r").unwrap()(C::new(0.0, 0.0)), C::new(0.0, 0.0));
        let r = source("rational_r").unwrap()(C::new(1.0, 0.0));
        assert!((r - C::new(1.0 / 3.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn unknown_names_are_config_errors() {
        let err = real("cos3", 1.0).err().unwrap();
        assert_eq!(err.exit_code(), 2);
        assert!(kinetic("flat").is_err());
    }
}
