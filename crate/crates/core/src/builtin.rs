//! Registry of ready-made plant + Lyapunov pairs.

use std::sync::Arc;

use crate::clf::{AffineSystem, LyapunovCandidate, VectorField};
use crate::error::{Error, Result};

const SQRT_3: f64 = 1.732_050_807_568_877_2;

/// Default name; resolves to the `V̇`-consistent triangle plant.
pub const TRIANGLE_EXAMPLE: &str = "triangle-example";

#[derive(Debug, Clone)]
pub struct BuiltinExample {
    pub name: &'static str,
    pub description: &'static str,
    pub system: AffineSystem,
    pub lyapunov: LyapunovCandidate,
}

const NAMES: [&str; 5] = [
    TRIANGLE_EXAMPLE,
    "triangle-example-vdot",
    "triangle-example-f",
    "scalar-unstable",
    "scalar-integrator",
];

pub fn names() -> &'static [&'static str] {
    &NAMES
}

pub fn lookup(name: &str) -> Result<BuiltinExample> {
    let (name, description, (system, lyapunov)) = match name {
        TRIANGLE_EXAMPLE => (
            TRIANGLE_EXAMPLE,
            "planar plant with unit input columns, drift matching the displayed a(x); V = ½‖x‖²",
            triangle_example_vdot(),
        ),
        "triangle-example-vdot" => (
            "triangle-example-vdot",
            "f₂ = x₁/(1+x₁²) + x₂²/(1+x₂²); V = ½‖x‖²",
            triangle_example_vdot(),
        ),
        "triangle-example-f" => (
            "triangle-example-f",
            "f₂ = x₁/(1+x₁²) + x₁²/(1+x₂²); V = ½‖x‖²",
            triangle_example_f(),
        ),
        "scalar-unstable" => ("scalar-unstable", "ẋ = x + u; V = ½x²", scalar(1.0)),
        "scalar-integrator" => ("scalar-integrator", "ẋ = u; V = ½x²", scalar(0.0)),
        other => return Err(Error::UnknownExample(other.to_string())),
    };
    Ok(BuiltinExample {
        name,
        description,
        system,
        lyapunov,
    })
}

fn unit_columns() -> Vec<VectorField> {
    vec![
        Arc::new(|_: &[f64]| vec![1.0, 0.0]),
        Arc::new(|_: &[f64]| vec![0.0, 1.0]),
    ]
}

/// `f = (√3 x₂/(1+x₂²), x₁/(1+x₁²) + x₂²/(1+x₂²))`, `G = I`, `V = ½‖x‖²`.
///
/// This drift is the one whose `L_f V` is the displayed
/// `a(x) = √3 x₁x₂/(1+x₂²) + x₂(x₁/(1+x₁²) + x₂²/(1+x₂²))`.
pub fn triangle_example_vdot() -> (AffineSystem, LyapunovCandidate) {
    let sys = AffineSystem::new(
        2,
        Arc::new(|x: &[f64]| {
            let (x1, x2) = (x[0], x[1]);
            vec![
                SQRT_3 * x2 / (1.0 + x2 * x2),
                x1 / (1.0 + x1 * x1) + x2 * x2 / (1.0 + x2 * x2),
            ]
        }),
        unit_columns(),
    )
    .expect("f(0) = 0");
    (sys, LyapunovCandidate::half_squared_norm(2))
}

/// Same plant with `f₂ = x₁/(1+x₁²) + x₁²/(1+x₂²)`. Its `a(x)` grows like
/// `x₂ x₁²`, so the box CLF condition fails away from the origin.
pub fn triangle_example_f() -> (AffineSystem, LyapunovCandidate) {
    let sys = AffineSystem::new(
        2,
        Arc::new(|x: &[f64]| {
            let (x1, x2) = (x[0], x[1]);
            vec![
                SQRT_3 * x2 / (1.0 + x2 * x2),
                x1 / (1.0 + x1 * x1) + x1 * x1 / (1.0 + x2 * x2),
            ]
        }),
        unit_columns(),
    )
    .expect("f(0) = 0");
    (sys, LyapunovCandidate::half_squared_norm(2))
}

/// `ẋ = gain·x + u`, `V = ½x²`.
pub fn scalar(gain: f64) -> (AffineSystem, LyapunovCandidate) {
    let sys = AffineSystem::new(
        1,
        Arc::new(move |x: &[f64]| vec![gain * x[0]]),
        vec![Arc::new(|_: &[f64]| vec![1.0])],
    )
    .expect("f(0) = 0");
    (sys, LyapunovCandidate::half_squared_norm(1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_name_resolves() {
        for name in names() {
            assert_eq!(lookup(name).unwrap().name, *name);
        }
        assert!(matches!(lookup("nope"), Err(Error::UnknownExample(_))));
    }

    #[test]
    fn drift_variants_agree_at_one_one() {
        let (a, _) = triangle_example_vdot();
        let (b, _) = triangle_example_f();
        assert_eq!(a.drift(&[1.0, 1.0]).unwrap(), b.drift(&[1.0, 1.0]).unwrap());
        assert_ne!(a.drift(&[2.0, 1.0]).unwrap(), b.drift(&[2.0, 1.0]).unwrap());
    }
}
