//! The DDVV inequality at a point and the constructive certificate for its
//! equality case.
//!
//! For shape operators `A_1, …, A_p` (symmetric m × m, orthonormal frames) in a
//! space form of curvature `c`,
//!
//! ```text
//! ρ  = 2/(m(m−1)) Σ_{i<j} [c + Σ_α (A_α[i][i] A_α[j][j] − A_α[i][j]²)]
//! ρ⊥ = 2/(m(m−1)) sqrt(Σ_{α<β} Σ_{i<j} [A_α, A_β]_{ij}²)
//! ρ + ρ⊥ ≤ |H|² + c
//! ```
//!
//! Equality holds exactly when suitable orthonormal tangent and normal frames
//! bring the operators into the form
//!
//! ```text
//! A'_1 = λ_1 I + μ0 (E_12 + E_21)
//! A'_2 = λ_2 I + μ0 (E_11 − E_22)
//! A'_3 = λ_3 I,   A'_r = 0 (r ≥ 4)
//! ```
//!
//! [`wintgen_certificate`] finds those frames (or reports that none exist at
//! the given tolerance).

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::linalg::{frobenius, max_abs, orthonormal_completion, random_rotation, sym_eigen_desc};
use crate::scalar::Real;

/// Equality threshold for quantities computed from exact jets.
pub const JET_EXACT_TOL: f64 = 1e-7;
/// Equality threshold for quantities that pass through finite differences.
pub const FD_CLASS_TOL: f64 = 1e-4;
/// Largest tolerated asymmetry of an input operator.
pub const SYMMETRY_TOL: f64 = 1e-9;
/// Relative eigenvalue cutoff for rank decisions.
pub const RANK_CUTOFF: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DdvvError {
    #[error("need m ≥ 2 and p ≥ 1, got m = {m}, p = {p}")]
    TooSmall { m: usize, p: usize },
    #[error("operator {index} is {rows}×{cols}, expected {m}×{m}")]
    Shape {
        index: usize,
        rows: usize,
        cols: usize,
        m: usize,
    },
    #[error("operator {index} is not symmetric (asymmetry {asymmetry:e})")]
    Asymmetric { index: usize, asymmetry: f64 },
}

/// Both sides of the DDVV inequality at a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DdvvReport<T: Real> {
    pub rho: T,
    pub rho_perp: T,
    pub h2: T,
    pub c: T,
    /// `h2 + c − rho − rho_perp`, nonnegative up to rounding.
    pub gap: T,
    /// `gap < JET_EXACT_TOL`.
    pub equality: bool,
}

impl<T: Real> DdvvReport<T> {
    pub fn equality_at(&self, tol: T) -> bool {
        self.gap.abs() < tol
    }
}

fn validate<T: Real>(ops: &[DMatrix<T>]) -> Result<usize, DdvvError> {
    let p = ops.len();
    let m = ops.first().map_or(0, |a| a.nrows());
    if m < 2 || p < 1 {
        return Err(DdvvError::TooSmall { m, p });
    }
    for (index, a) in ops.iter().enumerate() {
        if a.shape() != (m, m) {
            return Err(DdvvError::Shape {
                index,
                rows: a.nrows(),
                cols: a.ncols(),
                m,
            });
        }
        let asymmetry = max_abs(&(a - a.transpose())).as_f64();
        if !(asymmetry <= SYMMETRY_TOL) {
            return Err(DdvvError::Asymmetric { index, asymmetry });
        }
    }
    Ok(m)
}

/// Evaluates ρ, ρ⊥, |H|² and the gap for one tuple of shape operators.
pub fn ddvv_report<T: Real>(ops: &[DMatrix<T>], c: T) -> Result<DdvvReport<T>, DdvvError> {
    let m = validate(ops)?;
    let mm = T::from_usize_lossy(m);
    let norm = T::lit(2.0) / (mm * (mm - T::one()));

    let mut sectional = T::zero();
    for i in 0..m {
        for j in i + 1..m {
            sectional += c;
            for a in ops {
                sectional += a[(i, i)] * a[(j, j)] - a[(i, j)] * a[(i, j)];
            }
        }
    }

    let mut normal = T::zero();
    for (k, a) in ops.iter().enumerate() {
        for b in &ops[k + 1..] {
            let comm = a * b - b * a;
            for i in 0..m {
                for j in i + 1..m {
                    normal += comm[(i, j)] * comm[(i, j)];
                }
            }
        }
    }

    let h2 = ops
        .iter()
        .map(|a| {
            let h = a.trace() / mm;
            h * h
        })
        .fold(T::zero(), |x, y| x + y);
    let rho = norm * sectional;
    let rho_perp = norm * normal.sqrt();
    let gap = h2 + c - rho - rho_perp;
    Ok(DdvvReport {
        rho,
        rho_perp,
        h2,
        c,
        gap,
        equality: gap.abs() < T::lit(JET_EXACT_TOL),
    })
}

/// Frames realizing the canonical equality form.
///
/// With `A'_β = Σ_α S_{βα} Rᵗ A_α R`, the operators `A'_β` have the canonical
/// pattern with the recorded `mu0` and `lambda`. In the umbilic case every
/// `A'_β = λ_β I` and `R = S = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct WintgenCertificate<T: Real> {
    /// Tangent frame change, columns are the new tangent vectors. May have
    /// determinant −1.
    pub r: DMatrix<T>,
    /// Normal frame change, rows are the new normals in the old basis.
    pub s: DMatrix<T>,
    pub mu0: T,
    /// Umbilic parts in the new normal frame.
    pub lambda: DVector<T>,
    /// Max-norm distance of the conjugated operators from the pattern.
    pub residual: T,
}

impl<T: Real> WintgenCertificate<T> {
    /// The canonical operators `A'_β`.
    pub fn canonical(&self) -> Vec<DMatrix<T>> {
        canonical_form(self.r.nrows(), self.mu0, self.lambda.as_slice())
    }

    /// The original operators, `A_α = Σ_β S_{βα} R A'_β Rᵗ`.
    pub fn reconstruct(&self) -> Vec<DMatrix<T>> {
        mix(&self.canonical(), &self.r, &self.s)
    }
}

/// Canonical operators with `A'_r = λ_r I` for every `r ≥ 3`.
pub fn canonical_form<T: Real>(m: usize, mu0: T, lambda: &[T]) -> Vec<DMatrix<T>> {
    lambda
        .iter()
        .enumerate()
        .map(|(k, &l)| {
            let mut a = DMatrix::identity(m, m) * l;
            match k {
                0 => {
                    a[(0, 1)] = mu0;
                    a[(1, 0)] = mu0;
                }
                1 => {
                    a[(0, 0)] += mu0;
                    a[(1, 1)] -= mu0;
                }
                _ => {}
            }
            a
        })
        .collect()
}

/// `A_α = Σ_β S_{βα} R A'_β Rᵗ`.
fn mix<T: Real>(canon: &[DMatrix<T>], r: &DMatrix<T>, s: &DMatrix<T>) -> Vec<DMatrix<T>> {
    let m = r.nrows();
    let rotated: Vec<DMatrix<T>> = canon.iter().map(|a| r * a * r.transpose()).collect();
    (0..canon.len())
        .map(|alpha| {
            rotated
                .iter()
                .enumerate()
                .fold(DMatrix::zeros(m, m), |acc, (beta, a)| acc + a * s[(beta, alpha)])
        })
        .collect()
}

/// `A'_β = Σ_α S_{βα} Rᵗ A_α R`.
fn unmix<T: Real>(ops: &[DMatrix<T>], r: &DMatrix<T>, s: &DMatrix<T>) -> Vec<DMatrix<T>> {
    let m = r.nrows();
    let rotated: Vec<DMatrix<T>> = ops.iter().map(|a| r.transpose() * a * r).collect();
    (0..ops.len())
        .map(|beta| {
            rotated
                .iter()
                .enumerate()
                .fold(DMatrix::zeros(m, m), |acc, (alpha, a)| acc + a * s[(beta, alpha)])
        })
        .collect()
}

fn pattern_residual<T: Real>(conj: &[DMatrix<T>], mu0: T, lambda: &[T]) -> T {
    let m = conj[0].nrows();
    canonical_form(m, mu0, lambda)
        .iter()
        .zip(conj)
        .map(|(a, b)| max_abs(&(a - b)))
        .fold(T::zero(), |x, y| x.max(y))
}

/// Tries to bring `ops` into the canonical equality form.
///
/// Returns `None` when no frames achieve the pattern within
/// `tol · max(1, max|A|)`.
pub fn wintgen_certificate<T: Real>(
    ops: &[DMatrix<T>],
    tol: T,
) -> Result<Option<WintgenCertificate<T>>, DdvvError> {
    let m = validate(ops)?;
    let p = ops.len();
    let mm = T::from_usize_lossy(m);
    let scale = ops.iter().fold(T::one(), |acc, a| acc.max(max_abs(a)));
    let accept = tol * scale;

    let lambda: Vec<T> = ops.iter().map(|a| a.trace() / mm).collect();
    let free: Vec<DMatrix<T>> = ops
        .iter()
        .zip(&lambda)
        .map(|(a, &l)| {
            let s = (a + a.transpose()) * T::lit(0.5);
            s - DMatrix::identity(m, m) * l
        })
        .collect();

    let gram = DMatrix::from_fn(p, p, |a, b| frobenius(&free[a], &free[b]));
    let (g, v) = sym_eigen_desc(&gram);
    let gmax = g[0].max(T::zero());

    if gmax.sqrt() < accept {
        let id_m = DMatrix::identity(m, m);
        let id_p = DMatrix::identity(p, p);
        let conj = unmix(ops, &id_m, &id_p);
        let residual = pattern_residual(&conj, T::zero(), &lambda);
        return Ok((residual <= accept).then(|| WintgenCertificate {
            r: id_m,
            s: id_p,
            mu0: T::zero(),
            lambda: DVector::from_vec(lambda),
            residual,
        }));
    }
    let rank = g.iter().filter(|&&x| x > T::lit(RANK_CUTOFF) * gmax).count();
    if rank > 2 || p < 2 {
        return Ok(None);
    }

    let v1 = v.column(0).into_owned();
    let v2 = v.column(1).into_owned();
    let combine = |w: &DVector<T>| {
        free.iter()
            .enumerate()
            .fold(DMatrix::zeros(m, m), |acc, (a, op)| acc + op * w[a])
    };
    let pm = combine(&v1);
    let qm = combine(&v2);

    let (_, eig) = sym_eigen_desc(&(&pm * &pm + &qm * &qm));
    let plane = eig.columns(0, 2).into_owned();
    let rest = orthonormal_completion(&plane, m - 2);
    let mut w1 = plane.column(0).into_owned();
    let mut w2 = plane.column(1).into_owned();

    let block = |a: &DMatrix<T>, x: &DVector<T>, y: &DVector<T>| {
        let a11 = x.dot(&(a * x));
        let a22 = y.dot(&(a * y));
        let a12 = x.dot(&(a * y));
        ((a11 - a22) * T::lit(0.5), a12)
    };
    let (qre, qim) = block(&qm, &w1, &w2);
    let phi = qim.atan2(qre) * T::lit(0.5);
    let (cs, sn) = (phi.cos(), phi.sin());
    let n1 = &w1 * cs + &w2 * sn;
    let n2 = &w2 * cs - &w1 * sn;
    w1 = n1;
    w2 = n2;
    let (_, pim) = block(&pm, &w1, &w2);
    if pim < T::zero() {
        w2 = -w2;
    }

    let mut r = DMatrix::zeros(m, m);
    r.set_column(0, &w1);
    r.set_column(1, &w2);
    for k in 0..m - 2 {
        r.set_column(2 + k, &rest.column(k));
    }

    let lam = DVector::from_vec(lambda);
    let mut rows = vec![v1.clone(), v2.clone()];
    if p > 2 {
        let perp = &lam - &v1 * v1.dot(&lam) - &v2 * v2.dot(&lam);
        let norm = perp.norm();
        if norm > T::lit(1e-14) * scale {
            rows.push(perp / norm);
        }
        let basis = DMatrix::from_columns(&rows);
        let ext = orthonormal_completion(&basis, p - rows.len());
        rows.extend(ext.column_iter().map(|c| c.into_owned()));
    }
    let s = DMatrix::from_fn(p, p, |b, a| rows[b][a]);

    let conj = unmix(ops, &r, &s);
    let lambda_new: Vec<T> = conj.iter().map(|a| a.trace() / mm).collect();
    let mu0 = (conj[1][(0, 0)] - conj[1][(1, 1)]) * T::lit(0.25) + conj[0][(0, 1)] * T::lit(0.5);
    let residual = pattern_residual(&conj, mu0, &lambda_new);
    if residual > accept {
        return Ok(None);
    }
    Ok(Some(WintgenCertificate {
        r,
        s,
        mu0,
        lambda: DVector::from_vec(lambda_new),
        residual,
    }))
}

/// Builds the canonical operators and conjugates them by seeded random frame
/// changes: tangent `A ↦ R A Rᵗ`, normal `A_α = Σ_β S_{βα} A'_β`.
///
/// `lambda` has one entry per normal; entries past the third enter as
/// `λ_r I`. A `None` seed means the identity.
pub fn planted_instance<T: Real>(
    m: usize,
    mu0: T,
    lambda: &[T],
    r_seed: Option<u64>,
    s_seed: Option<u64>,
) -> Vec<DMatrix<T>> {
    assert!(m >= 2, "planted instances need m ≥ 2");
    let p = lambda.len();
    let r = r_seed.map_or_else(
        || DMatrix::identity(m, m),
        |seed| random_rotation(m, &mut ChaCha8Rng::seed_from_u64(seed)),
    );
    let s = s_seed.map_or_else(
        || DMatrix::identity(p, p),
        |seed| random_rotation(p, &mut ChaCha8Rng::seed_from_u64(seed)),
    );
    mix(&canonical_form(m, mu0, lambda), &r, &s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random_symmetric;
    use rand::Rng;

    /// Independent evaluation summing over all ordered index pairs.
    fn brute_force(ops: &[DMatrix<f64>], c: f64) -> (f64, f64, f64) {
        let m = ops[0].nrows();
        let p = ops.len();
        let mut scal = 0.0;
        for i in 0..m {
            for j in 0..m {
                if i == j {
                    continue;
                }
                scal += c;
                for a in ops {
                    scal += a[(i, i)] * a[(j, j)] - a[(i, j)] * a[(j, i)];
                }
            }
        }
        let mut perp = 0.0;
        for al in 0..p {
            for be in 0..p {
                for i in 0..m {
                    for j in 0..m {
                        let mut x = 0.0;
                        for k in 0..m {
                            x += ops[al][(i, k)] * ops[be][(k, j)] - ops[be][(i, k)] * ops[al][(k, j)];
                        }
                        perp += x * x;
                    }
                }
            }
        }
        let n = (m * (m - 1)) as f64;
        let h2: f64 = ops.iter().map(|a| (a.trace() / m as f64).powi(2)).sum();
        (scal / n, (perp / 4.0).sqrt() * 2.0 / n, h2)
    }

    #[test]
    fn totally_geodesic() {
        let ops = vec![DMatrix::<f64>::zeros(3, 3); 2];
        let r = ddvv_report(&ops, 1.0).unwrap();
        assert_eq!((r.rho, r.rho_perp, r.h2, r.gap), (1.0, 0.0, 0.0, 0.0));
        assert!(r.equality);
    }

    #[test]
    fn planted_literal_pattern() {
        let ops = planted_instance(4, 0.7, &[0.0, 0.0, 0.0], None, None);
        let mut a1 = DMatrix::<f64>::zeros(4, 4);
        a1[(0, 1)] = 0.7;
        a1[(1, 0)] = 0.7;
        let a2 = DMatrix::from_diagonal(&DVector::from_vec(vec![0.7, -0.7, 0.0, 0.0]));
        assert_eq!(ops, vec![a1, a2, DMatrix::zeros(4, 4)]);
        assert!(planted_instance(3, 0.0, &[0.0; 4], Some(1), Some(2))
            .iter()
            .all(|a| a.amax() == 0.0));
    }

    #[test]
    fn planted_commutator_values() {
        for m in 2..6 {
            let mu: f64 = 0.37;
            let ops = planted_instance(m, mu, &[0.0, 0.0, 0.0], None, None);
            let r = ddvv_report(&ops, 0.0).unwrap();
            let n = (m * (m - 1)) as f64;
            assert!((r.rho + 4.0 * mu * mu / n).abs() < 1e-15);
            assert!((r.rho_perp - 4.0 * mu * mu / n).abs() < 1e-15);
            assert_eq!(r.h2, 0.0);
            assert!(r.gap.abs() < 1e-15);
            let (rho, perp, h2) = brute_force(&ops, 0.0);
            assert!((rho - r.rho).abs() < 1e-15 && (perp - r.rho_perp).abs() < 1e-15 && h2 == 0.0);
        }
    }

    #[test]
    fn matches_brute_force_on_random_tuples() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let m = rng.random_range(2..6);
            let p = rng.random_range(1..5);
            let ops: Vec<_> = (0..p).map(|_| random_symmetric::<f64, _>(m, &mut rng)).collect();
            let c = rng.random_range(-1.0..1.0);
            let r = ddvv_report(&ops, c).unwrap();
            let (rho, perp, h2) = brute_force(&ops, c);
            assert!((r.rho - rho).abs() < 1e-12);
            assert!((r.rho_perp - perp).abs() < 1e-12);
            assert!((r.h2 - h2).abs() < 1e-12);
        }
    }

    #[test]
    fn inequality_on_200_tuples() {
        let mut rng = ChaCha8Rng::seed_from_u64(200);
        for _ in 0..200 {
            let m = rng.random_range(2..6);
            let p = rng.random_range(1..5);
            let ops: Vec<_> = (0..p).map(|_| random_symmetric::<f64, _>(m, &mut rng)).collect();
            assert!(ddvv_report(&ops, 0.0).unwrap().gap >= -1e-9);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let mut a = DMatrix::<f64>::zeros(3, 3);
        a[(0, 1)] = 1e-6;
        assert!(matches!(ddvv_report(&[a], 0.0), Err(DdvvError::Asymmetric { .. })));
        assert!(matches!(
            ddvv_report(&[DMatrix::<f64>::zeros(1, 1)], 0.0),
            Err(DdvvError::TooSmall { .. })
        ));
        assert!(matches!(
            ddvv_report(&[DMatrix::<f64>::zeros(2, 2), DMatrix::zeros(3, 3)], 0.0),
            Err(DdvvError::Shape { .. })
        ));
    }

    #[test]
    fn certificate_recovers_planted() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for k in 0..40u64 {
            let m = 2 + (k as usize % 3);
            let p = 3 + (k as usize / 3) % 2;
            let mu0 = rng.random_range(0.1..2.0);
            let lambda: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
            let ops = planted_instance(m, mu0, &lambda, Some(k), Some(k + 1000));
            let cert = wintgen_certificate(&ops, 1e-10).unwrap().expect("certified");
            assert!((cert.mu0 - mu0).abs() < 1e-10, "{} vs {mu0}", cert.mu0);
            assert!(cert.residual < 1e-10);
            let rt = cert.r.transpose() * &cert.r;
            assert!((rt - DMatrix::identity(m, m)).amax() < 1e-10);
            let st = cert.s.transpose() * &cert.s;
            assert!((st - DMatrix::identity(p, p)).amax() < 1e-10);
            assert!(cert.lambda.iter().skip(3).all(|l| l.abs() < 1e-10));
            for (a, b) in cert.reconstruct().iter().zip(&ops) {
                assert!((a - b).amax() < 1e-9);
            }
        }
    }

    #[test]
    fn umbilic_certificate() {
        let ops: Vec<_> = [0.5, -1.0, 2.0]
            .iter()
            .map(|&l| DMatrix::<f64>::identity(3, 3) * l)
            .collect();
        let cert = wintgen_certificate(&ops, 1e-7).unwrap().unwrap();
        assert_eq!(cert.mu0, 0.0);
        assert_eq!(cert.r, DMatrix::identity(3, 3));
        assert_eq!(cert.s, DMatrix::identity(3, 3));
    }

    #[test]
    fn generic_tuples_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..50 {
            let ops: Vec<_> = (0..3).map(|_| random_symmetric::<f64, _>(3, &mut rng)).collect();
            let gap = ddvv_report(&ops, 0.0).unwrap().gap;
            assert!(gap > 1e-3);
            assert!(wintgen_certificate(&ops, 1e-6).unwrap().is_none());
        }
    }

    #[test]
    fn perturbation_breaks_certificate() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let ops = planted_instance(3, 0.8, &[0.2, -0.1, 0.3], Some(1), Some(2));
        let pert: Vec<_> = ops
            .iter()
            .map(|a| a + random_symmetric::<f64, _>(3, &mut rng) * 1e-2)
            .collect();
        let gap = ddvv_report(&pert, 0.0).unwrap().gap;
        assert!(gap > 1e-4 && gap < 1e-1, "{gap}");
        assert!(wintgen_certificate(&pert, 1e-6).unwrap().is_none());
    }
}
