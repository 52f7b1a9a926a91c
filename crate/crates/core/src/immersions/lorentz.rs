//! Moebius transformations of R^n as Lorentz matrices acting on the light cone
//! of R^{n+2}_1 with metric diag(−1, 1, …, 1).

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{Ambient, Immersion, ImmersionError};
use crate::jets::{norm_squared, Jet};
use crate::scalar::Real;

/// Denominator below which a transformed point counts as sent to infinity.
pub const INFINITY_GUARD: f64 = 1e-9;

/// An `(n+2) × (n+2)` matrix in the Lorentz group, acting on column vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct LorentzMatrix<T: Real> {
    mat: DMatrix<T>,
}

/// Change of light-cone coordinates `(v0, v1, w) → (v0 + v1, v0 − v1, w)`.
fn to_ab<T: Real>(n: usize) -> DMatrix<T> {
    let mut c = DMatrix::identity(n + 2, n + 2);
    c[(0, 0)] = T::one();
    c[(0, 1)] = T::one();
    c[(1, 0)] = T::one();
    c[(1, 1)] = -T::one();
    c
}

fn from_ab<T: Real>(n: usize) -> DMatrix<T> {
    to_ab::<T>(n) * T::lit(0.5) + {
        let mut fix = DMatrix::zeros(n + 2, n + 2);
        for i in 2..n + 2 {
            fix[(i, i)] = T::lit(0.5);
        }
        fix
    }
}

impl<T: Real> LorentzMatrix<T> {
    /// Wraps a matrix, checking `TᵗηT = η` within `tol`.
    pub fn from_matrix(mat: DMatrix<T>, tol: T) -> Result<Self, ImmersionError> {
        let l = Self { mat };
        let dev = l.lorentz_defect();
        if dev > tol {
            return Err(ImmersionError::InvalidParams(format!(
                "matrix violates the Lorentz condition by {}",
                dev.as_f64()
            )));
        }
        Ok(l)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            mat: DMatrix::identity(n + 2, n + 2),
        }
    }

    /// `x ↦ λ x`, `λ > 0`.
    pub fn dilation(n: usize, lambda: T) -> Self {
        let mut ab = DMatrix::identity(n + 2, n + 2);
        ab[(0, 0)] = T::one() / lambda;
        ab[(1, 1)] = lambda;
        Self {
            mat: from_ab::<T>(n) * ab * to_ab::<T>(n),
        }
    }

    /// `x ↦ x + c`.
    pub fn translation(c: &[T]) -> Self {
        let n = c.len();
        let mut ab = DMatrix::identity(n + 2, n + 2);
        let c2 = c.iter().fold(T::zero(), |acc, &x| acc + x * x);
        ab[(1, 0)] = c2;
        for i in 0..n {
            ab[(2 + i, 0)] = c[i];
            ab[(1, 2 + i)] = c[i] + c[i];
        }
        Self {
            mat: from_ab::<T>(n) * ab * to_ab::<T>(n),
        }
    }

    /// `x ↦ Q x` for orthogonal `Q`.
    pub fn rotation(q: &DMatrix<T>) -> Self {
        let n = q.nrows();
        let mut m = DMatrix::identity(n + 2, n + 2);
        m.view_mut((2, 2), (n, n)).copy_from(q);
        Self { mat: m }
    }

    /// Inversion in the unit sphere, `x ↦ x / |x|²`.
    pub fn inversion(n: usize) -> Self {
        let mut m = DMatrix::identity(n + 2, n + 2);
        m[(1, 1)] = -T::one();
        Self { mat: m }
    }

    /// `self ∘ other` (apply `other` first).
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            mat: &self.mat * &other.mat,
        }
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.mat
    }

    /// Dimension `n` of the Euclidean space acted on.
    pub fn space_dim(&self) -> usize {
        self.mat.nrows() - 2
    }

    /// max-norm of `TᵗηT − η`.
    pub fn lorentz_defect(&self) -> T {
        let k = self.mat.nrows();
        let mut eta = DMatrix::identity(k, k);
        eta[(0, 0)] = -T::one();
        let d = self.mat.transpose() * &eta * &self.mat - eta;
        d.iter().fold(T::zero(), |acc, x| acc.max(x.abs()))
    }

    /// Future light-like vectors stay future light-like.
    pub fn preserves_time_orientation(&self) -> bool {
        self.mat[(0, 0)] > T::zero()
    }
}

/// `x ↦ ((1 + |x|²)/2, (1 − |x|²)/2, x)`.
pub fn light_cone_lift<T: Real>(x: &[T]) -> Vec<T> {
    let r2 = x.iter().fold(T::zero(), |acc, &c| acc + c * c);
    let half = T::lit(0.5);
    let mut v = vec![(T::one() + r2) * half, (T::one() - r2) * half];
    v.extend_from_slice(x);
    v
}

/// Lifts `x` to the light cone, applies `t`, and dehomogenizes.
pub fn apply_moebius<T: Real>(t: &LorentzMatrix<T>, x: &[T]) -> Result<Vec<T>, ImmersionError> {
    let v = nalgebra::DVector::from_vec(light_cone_lift(x));
    let w = &t.mat * v;
    let d = w[0] + w[1];
    if d.abs() <= T::lit(INFINITY_GUARD) {
        return Err(ImmersionError::PointAtInfinity);
    }
    Ok((2..w.len()).map(|i| w[i] / d).collect())
}

pub(crate) fn apply_moebius_jets<T: Real>(
    t: &DMatrix<T>,
    x: &[Jet<T>],
) -> Result<Vec<Jet<T>>, ImmersionError> {
    let r2 = norm_squared(x);
    let half = T::lit(0.5);
    let one = Jet::constant(T::one());
    let mut lift = vec![(one + r2) * half, (one - r2) * half];
    lift.extend_from_slice(x);
    let row = |i: usize| {
        lift.iter()
            .enumerate()
            .fold(Jet::constant(T::zero()), |acc, (j, c)| acc + *c * t[(i, j)])
    };
    let d = row(0) + row(1);
    if d.value().abs() <= T::lit(INFINITY_GUARD) {
        return Err(ImmersionError::PointAtInfinity);
    }
    let inv = d.try_recip()?;
    Ok((2..lift.len()).map(|i| row(i) * inv).collect())
}

fn random_rotation(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Random Moebius transformation of R^n: rotation, dilation, translation and,
/// with probability 1/2, one inversion centered well away from the unit ball.
pub fn random_moebius<T: Real>(n: usize, seed: u64) -> LorentzMatrix<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = LorentzMatrix::<f64>::rotation(&random_rotation(n, &mut rng));
    if rng.random_bool(0.5) {
        let dir: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
        let s: Vec<f64> = dir.iter().map(|x| 4.0 * x / norm).collect();
        t = LorentzMatrix::translation(&s).compose(&t);
        t = LorentzMatrix::inversion(n).compose(&t);
        t = LorentzMatrix::dilation(n, 16.0).compose(&t);
    }
    let lambda = rng.random_range(-0.7f64..0.7).exp();
    t = LorentzMatrix::dilation(n, lambda).compose(&t);
    t = LorentzMatrix::rotation(&random_rotation(n, &mut rng)).compose(&t);
    let c: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    t = LorentzMatrix::translation(&c).compose(&t);
    LorentzMatrix {
        mat: t.mat.map(T::lit),
    }
}

impl<T: Real> Immersion<T> {
    /// `T ∘ f` for a Euclidean immersion.
    pub fn moebius_transform(&self, t: &LorentzMatrix<T>) -> Result<Immersion<T>, ImmersionError> {
        let Ambient::Euclidean(n) = self.ambient() else {
            return Err(ImmersionError::InvalidParams(
                "Moebius transformations act on Euclidean immersions; project sphere-valued ones first".into(),
            ));
        };
        if t.space_dim() != n {
            return Err(ImmersionError::InvalidParams(format!(
                "transformation acts on R^{}, immersion lives in R^{n}",
                t.space_dim()
            )));
        }
        let mat = t.mat.clone();
        Ok(self.then(format!("moebius({})", self.name()), Ambient::Euclidean(n), move |x: &[Jet<T>]| {
            apply_moebius_jets(&mat, x)
        }))
    }
}
