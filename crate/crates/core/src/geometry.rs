//! Pointwise extrinsic geometry: orthonormal frames, fundamental forms,
//! mean curvature and shape operators.
//!
//! Frames are chosen per point and are not smooth in the point; anything that
//! differentiates frame-dependent fields has to fix a gauge first.

use nalgebra::{Cholesky, DMatrix, DVector};
use thiserror::Error;

use crate::immersions::{Immersion, ImmersionError};
use crate::jets::Jet;
use crate::linalg::{gram_schmidt, orthonormal_completion, sym_eigen_desc};
use crate::scalar::Real;

/// Relative eigenvalue floor of the induced metric for the immersion check.
pub const DEGENERACY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error(transparent)]
    Immersion(#[from] ImmersionError),
    #[error("not an immersion here: induced metric eigenvalues span [{min:e}, {max:e}]")]
    Degenerate { min: f64, max: f64 },
    #[error("ambient dimension too small: chart dimension {chart_dim} leaves no normal directions in {ambient}")]
    AmbientTooSmall { chart_dim: usize, ambient: String },
}

/// Orthonormal tangent and normal frames at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameData<T: Real> {
    /// Ambient position f(u).
    pub position: DVector<T>,
    /// Jacobian, ambient × m, columns ∂_a f.
    pub jacobian: DMatrix<T>,
    /// Induced metric I in the chart basis.
    pub metric: DMatrix<T>,
    /// `e_i = Σ_a T_{ia} ∂_a f`; rows of this m × m matrix are the `T_{i·}`.
    pub chart_to_frame: DMatrix<T>,
    /// Ambient × m, columns e_i.
    pub tangents: DMatrix<T>,
    /// Ambient × p, columns n_α (the position vector is excluded for sphere ambients).
    pub normals: DMatrix<T>,
}

impl<T: Real> FrameData<T> {
    pub fn chart_dim(&self) -> usize {
        self.tangents.ncols()
    }

    pub fn codim(&self) -> usize {
        self.normals.ncols()
    }
}

/// Induced metric, second fundamental form and mean curvature at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalForms<T: Real> {
    pub frame: FrameData<T>,
    /// `h^α_{ij}` in the orthonormal frame, one symmetric m × m matrix per normal.
    pub second: Vec<DMatrix<T>>,
    /// `H^α = tr(h^α) / m`.
    pub mean: DVector<T>,
    /// Curvature of the ambient space form (0 or 1).
    pub curvature: T,
}

impl<T: Real> FundamentalForms<T> {
    pub fn metric(&self) -> &DMatrix<T> {
        &self.frame.metric
    }

    /// |H|².
    pub fn mean_norm2(&self) -> T {
        self.mean.norm_squared()
    }

    /// Mean curvature vector in ambient coordinates.
    pub fn mean_vector(&self) -> DVector<T> {
        &self.frame.normals * &self.mean
    }

    /// Trace-free parts `h^α − H^α I`.
    pub fn traceless(&self) -> Vec<DMatrix<T>> {
        let m = self.frame.chart_dim();
        self.second
            .iter()
            .zip(self.mean.iter())
            .map(|(h, &hm)| h - DMatrix::identity(m, m) * hm)
            .collect()
    }

    /// |II − (1/m) tr(II) I|².
    pub fn traceless_norm2(&self) -> T {
        self.traceless().iter().map(|a| a.norm_squared()).fold(T::zero(), |a, b| a + b)
    }

    /// |II|².
    pub fn second_norm2(&self) -> T {
        self.second.iter().map(|a| a.norm_squared()).fold(T::zero(), |a, b| a + b)
    }
}

/// Frames from already evaluated jets.
pub fn frames_from_jets<T: Real>(
    jets: &[Jet<T>],
    chart_dim: usize,
    sphere: bool,
    ambient_dim: usize,
) -> Result<FrameData<T>, GeometryError> {
    let m = chart_dim;
    let n = jets.len();
    let p = ambient_dim.saturating_sub(m);
    if p == 0 {
        return Err(GeometryError::AmbientTooSmall {
            chart_dim: m,
            ambient: if sphere {
                format!("S^{ambient_dim}")
            } else {
                format!("R^{ambient_dim}")
            },
        });
    }
    let position = DVector::from_iterator(n, jets.iter().map(|j| j.value()));
    let jacobian = DMatrix::from_fn(n, m, |i, a| jets[i].grad(a));
    let metric = jacobian.transpose() * &jacobian;
    let (eigs, _) = sym_eigen_desc(&metric);
    let (max, min) = (eigs[0], eigs[m - 1]);
    if !(min > T::lit(DEGENERACY_TOL) * max) {
        return Err(GeometryError::Degenerate {
            min: min.as_f64(),
            max: max.as_f64(),
        });
    }
    let chol = Cholesky::new(metric.clone()).ok_or(GeometryError::Degenerate {
        min: min.as_f64(),
        max: max.as_f64(),
    })?;
    let l_inv = chol
        .l()
        .solve_lower_triangular(&DMatrix::identity(m, m))
        .expect("Cholesky factor is invertible");
    let tangents = &jacobian * l_inv.transpose();
    let mut span = tangents.clone();
    if sphere {
        span = span.insert_column(m, T::zero());
        span.set_column(m, &position);
    }
    let (span, _) = gram_schmidt(&span);
    let normals = orthonormal_completion(&span, p);
    Ok(FrameData {
        position,
        jacobian,
        metric,
        chart_to_frame: l_inv,
        tangents,
        normals,
    })
}

/// Orthonormal tangent frame by Cholesky of I and a normal frame completing
/// the tangent space (and the position vector, for sphere ambients).
pub fn frames<T: Real>(immersion: &Immersion<T>, point: &[T]) -> Result<FrameData<T>, GeometryError> {
    let jets = immersion.evaluate(point)?;
    let amb = immersion.ambient();
    frames_from_jets(&jets, immersion.chart_dim(), amb.is_sphere(), amb.dim())
}

/// Second fundamental form from jets and a frame.
pub fn forms_from_jets<T: Real>(jets: &[Jet<T>], frame: FrameData<T>, curvature: T) -> FundamentalForms<T> {
    let m = frame.chart_dim();
    let p = frame.codim();
    let mut second = Vec::with_capacity(p);
    let mut mean = DVector::zeros(p);
    for alpha in 0..p {
        let n = frame.normals.column(alpha);
        let chart = DMatrix::from_fn(m, m, |a, b| {
            jets.iter()
                .enumerate()
                .fold(T::zero(), |acc, (i, j)| acc + n[i] * j.hess(a, b))
        });
        let h = &frame.chart_to_frame * chart * frame.chart_to_frame.transpose();
        let h = (&h + h.transpose()) * T::lit(0.5);
        mean[alpha] = h.trace() / T::from_usize_lossy(m);
        second.push(h);
    }
    FundamentalForms {
        frame,
        second,
        mean,
        curvature,
    }
}

pub fn fundamental_forms<T: Real>(
    immersion: &Immersion<T>,
    point: &[T],
) -> Result<FundamentalForms<T>, GeometryError> {
    let jets = immersion.evaluate(point)?;
    let amb = immersion.ambient();
    let frame = frames_from_jets(&jets, immersion.chart_dim(), amb.is_sphere(), amb.dim())?;
    Ok(forms_from_jets(&jets, frame, amb.curvature()))
}

/// Shape operators `A_α = (h^α_{ij})` in the orthonormal tangent frame.
pub fn shape_operators<T: Real>(ff: &FundamentalForms<T>) -> Vec<DMatrix<T>> {
    ff.second.clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::immersions::{gallery_get, Ambient, ChartDomain, Params};

    fn round_sphere(ambient: Ambient) -> Immersion<f64> {
        Immersion::new(
            "s2",
            2,
            ambient,
            ChartDomain::new(vec![0.3, 0.0], vec![2.8, 6.2]),
            |v: &[Jet<f64>]| {
                let (t, p) = (v[0], v[1]);
                Ok(vec![t.sin() * p.cos(), t.sin() * p.sin(), t.cos()])
            },
        )
    }

    #[test]
    fn plane_frames() {
        let f = gallery_get::<f64>("plane", &Params::new()).unwrap();
        let fr = frames(&f, &[0.1, 0.2, -0.3]).unwrap();
        assert!((&fr.tangents - DMatrix::<f64>::identity(5, 3)).amax() < 1e-15);
        assert_eq!(fr.normals.ncols(), 2);
        for a in 0..2 {
            assert!((fr.normals[(3 + a, a)].abs() - 1.0).abs() < 1e-15);
        }
        let ff = fundamental_forms(&f, &[0.1, 0.2, -0.3]).unwrap();
        assert!(ff.second.iter().all(|h| h.amax() == 0.0));
        assert_eq!(ff.mean_norm2(), 0.0);
    }

    #[test]
    fn sphere_in_itself_has_no_normals() {
        let err = frames(&round_sphere(Ambient::UnitSphere(2)), &[1.0, 1.0]).unwrap_err();
        assert!(matches!(err, GeometryError::AmbientTooSmall { .. }));
    }

    #[test]
    fn round_sphere_in_r3() {
        let s = round_sphere(Ambient::Euclidean(3));
        let u = [1.0, 2.0];
        let fr = frames(&s, &u).unwrap();
        let f = fr.position.clone();
        assert!((fr.normals.column(0).dot(&f).abs() - 1.0).abs() < 1e-14);
        let ff = fundamental_forms(&s, &u).unwrap();
        let h = &ff.second[0];
        let sign = h[(0, 0)].signum();
        assert!((h - DMatrix::identity(2, 2) * sign).amax() < 1e-13);
        assert!((ff.mean_norm2() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn degenerate_metric_rejected() {
        let f = Immersion::<f64>::new(
            "fold",
            2,
            Ambient::Euclidean(3),
            ChartDomain::new(vec![-1.0, -1.0], vec![1.0, 1.0]),
            |v: &[Jet<f64>]| Ok(vec![v[0], v[1] * v[1], Jet::constant(0.0)]),
        );
        assert!(matches!(frames(&f, &[0.3, 0.0]), Err(GeometryError::Degenerate { .. })));
    }

    #[test]
    fn clifford_torus_principal_curvatures() {
        let f = gallery_get::<f64>("clifford", &[("preset".to_string(), "torus".to_string())].into()).unwrap();
        let ff = fundamental_forms(&f, &[0.7, -1.9]).unwrap();
        assert_eq!(ff.second.len(), 1);
        let (ev, _) = sym_eigen_desc(&ff.second[0]);
        assert!((ev[0] - 1.0).abs() < 1e-12 && (ev[1] + 1.0).abs() < 1e-12, "{ev:?}");
        assert!(ff.mean_norm2() < 1e-24);
    }
}
