//! Stereographic projection between S^n ⊂ R^{n+1} and R^n.
//!
//! The standard pole is `(0, …, 0, 1)`: `σ(x) = x̂ / (1 − x_last)` where `x̂`
//! drops the last coordinate. Another pole `P` is handled by first applying
//! the Householder reflection that carries `P` to the standard pole.

use super::{Ambient, Immersion, ImmersionError};
use crate::jets::Jet;
use crate::scalar::Real;

/// Minimal distance `1 − x_last` to the pole accepted by the projection.
pub const POLE_CLEARANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StereoDirection {
    SphereToEuclid,
    EuclidToSphere,
}

/// Projects a point of S^n from the standard pole.
pub fn stereographic_point<T: Real>(x: &[T]) -> Result<Vec<T>, ImmersionError> {
    let n = x.len() - 1;
    let d = T::one() - x[n];
    if d < T::lit(POLE_CLEARANCE) {
        return Err(ImmersionError::PoleProximity { distance: d.as_f64() });
    }
    Ok(x[..n].iter().map(|&c| c / d).collect())
}

/// Inverse projection `y ↦ (2y, |y|² − 1) / (|y|² + 1)`.
pub fn inverse_stereographic<T: Real>(y: &[T]) -> Vec<T> {
    let r2 = y.iter().fold(T::zero(), |acc, &c| acc + c * c);
    let d = r2 + T::one();
    let mut out: Vec<T> = y.iter().map(|&c| (c + c) / d).collect();
    out.push((r2 - T::one()) / d);
    out
}

fn project_jets<T: Real>(x: &[Jet<T>]) -> Result<Vec<Jet<T>>, ImmersionError> {
    let n = x.len() - 1;
    let d = Jet::constant(T::one()) - x[n];
    if d.value() < T::lit(POLE_CLEARANCE) {
        return Err(ImmersionError::PoleProximity {
            distance: d.value().as_f64(),
        });
    }
    let inv = d.try_recip()?;
    Ok(x[..n].iter().map(|&c| c * inv).collect())
}

fn lift_jets<T: Real>(y: &[Jet<T>]) -> Result<Vec<Jet<T>>, ImmersionError> {
    let r2 = crate::jets::norm_squared(y);
    let inv = (r2 + T::one()).try_recip()?;
    let mut out: Vec<Jet<T>> = y.iter().map(|&c| c * inv * T::lit(2.0)).collect();
    out.push((r2 - T::one()) * inv);
    Ok(out)
}

/// Orthogonal reflection sending unit `pole` to `e_last` (identity if already there).
pub(crate) fn pole_reflection<T: Real>(pole: &[T]) -> Option<Vec<T>> {
    let n = pole.len();
    let mut v = pole.to_vec();
    v[n - 1] -= T::one();
    let vv = v.iter().fold(T::zero(), |a, &c| a + c * c);
    if vv < T::lit(1e-24) {
        None
    } else {
        let s = T::one() / vv.sqrt();
        Some(v.into_iter().map(|c| c * s).collect())
    }
}

fn reflect<T: Real>(v: &Option<Vec<T>>, x: Vec<Jet<T>>) -> Vec<Jet<T>> {
    match v {
        None => x,
        Some(v) => {
            let d = x
                .iter()
                .zip(v)
                .fold(Jet::constant(T::zero()), |acc, (c, &w)| acc + *c * w);
            x.iter().zip(v).map(|(c, &w)| *c - d * (w + w)).collect()
        }
    }
}

/// Re-ambients an immersion by stereographic projection.
///
/// `SphereToEuclid` needs a sphere-valued input and projects from `pole`
/// (unit vector; `None` means the standard pole). `EuclidToSphere` ignores
/// `pole` and lands in the sphere through the inverse projection.
pub fn stereographic<T: Real>(
    immersion: &Immersion<T>,
    direction: StereoDirection,
    pole: Option<&[T]>,
) -> Result<Immersion<T>, ImmersionError> {
    match (direction, immersion.ambient()) {
        (StereoDirection::SphereToEuclid, Ambient::UnitSphere(n)) => {
            let refl = match pole {
                None => None,
                Some(p) => {
                    if p.len() != n + 1 {
                        return Err(ImmersionError::InvalidParams(format!(
                            "pole has {} components, expected {}",
                            p.len(),
                            n + 1
                        )));
                    }
                    let norm = p.iter().fold(T::zero(), |a, &c| a + c * c).sqrt();
                    let unit: Vec<T> = p.iter().map(|&c| c / norm).collect();
                    pole_reflection(&unit)
                }
            };
            Ok(immersion.then(
                format!("stereo({})", immersion.name()),
                Ambient::Euclidean(n),
                move |x: &[Jet<T>]| project_jets(&reflect(&refl, x.to_vec())),
            ))
        }
        (StereoDirection::EuclidToSphere, Ambient::Euclidean(n)) => Ok(immersion.then(
            format!("stereo_inv({})", immersion.name()),
            Ambient::UnitSphere(n),
            |y: &[Jet<T>]| lift_jets(y),
        )),
        (StereoDirection::SphereToEuclid, _) => Err(ImmersionError::NotSphereValued),
        (StereoDirection::EuclidToSphere, _) => Err(ImmersionError::InvalidParams(
            "inverse stereographic projection needs a Euclidean immersion".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn south_pole_to_origin() {
        let y = stereographic_point(&[0.0, 0.0, 0.0, -1.0]).unwrap();
        assert_eq!(y, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let y: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
            let x = inverse_stereographic(&y);
            let n: f64 = x.iter().map(|c| c * c).sum();
            assert!((n - 1.0).abs() < 1e-14);
            let back = stereographic_point(&x).unwrap();
            for (a, b) in back.iter().zip(&y) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pole_rejected() {
        let err = stereographic_point(&[0.0, 0.0, 1.0]).unwrap_err();
        assert!(matches!(err, ImmersionError::PoleProximity { .. }));
    }

    #[test]
    fn reflection_moves_pole() {
        let p = [0.6, 0.0, -0.8];
        let v = pole_reflection(&p);
        let x: Vec<Jet<f64>> = p.iter().map(|&c| Jet::constant(c)).collect();
        let r = reflect(&v, x);
        assert!(r[0].value().abs() < 1e-15 && (r[2].value() - 1.0).abs() < 1e-15);
    }
}
