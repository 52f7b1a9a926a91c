use super::{Ambient, ChartDomain, Immersion, ImmersionError};
use crate::jets::Jet;
use crate::scalar::Real;

/// Cone `f(t, y, u) = (y, t·u)` over a sphere-valued immersion `u`.
///
/// The chart is `(t, y_1 … y_k, base coordinates)` with `t > 0`; the image
/// lies in `R^{k + n + 1}` for a base in `S^n`.
pub fn cone<T: Real>(base: &Immersion<T>, extra_flat_dims: usize) -> Result<Immersion<T>, ImmersionError> {
    let Ambient::UnitSphere(n) = base.ambient() else {
        return Err(ImmersionError::NotSphereValued);
    };
    let k = extra_flat_dims;
    let r = base.chart_dim();
    let chart_dim = 1 + k + r;
    if chart_dim > crate::jets::MAX_DIM {
        return Err(ImmersionError::InvalidParams(format!(
            "cone chart dimension {chart_dim} exceeds {}",
            crate::jets::MAX_DIM
        )));
    }
    let mut lower = vec![0.5];
    let mut upper = vec![2.0];
    lower.extend(std::iter::repeat_n(-1.0, k));
    upper.extend(std::iter::repeat_n(1.0, k));
    lower.extend_from_slice(&base.domain().lower);
    upper.extend_from_slice(&base.domain().upper);
    let domain = ChartDomain::new(lower, upper).excluding("t <= 0");
    let base = base.clone();
    Ok(Immersion::new(
        format!("cone({})", base.name()),
        chart_dim,
        Ambient::Euclidean(k + n + 1),
        domain,
        move |v: &[Jet<T>]| {
            let t = v[0];
            if !(t.value() > T::zero()) {
                return Err(ImmersionError::OutsideDomain {
                    point: v.iter().map(|j| j.value().as_f64()).collect(),
                    reason: "cone parameter t must be positive".into(),
                });
            }
            let mut out: Vec<Jet<T>> = v[1..1 + k].to_vec();
            out.extend(base.map_jets(&v[1 + k..])?.into_iter().map(|c| c * t));
            Ok(out)
        },
    ))
}
