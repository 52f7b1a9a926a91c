//! Small dense helpers shared by the frame and certificate code.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::scalar::Real;

/// Eigenpairs of a symmetric matrix sorted by descending eigenvalue.
pub fn sym_eigen_desc<T: Real>(a: &DMatrix<T>) -> (Vec<T>, DMatrix<T>) {
    let n = a.nrows();
    let sym = (a + a.transpose()) * T::lit(0.5);
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Extends the orthonormal columns of `basis` (n × k) by `count` further
/// orthonormal vectors, greedily choosing the coordinate axis with the
/// largest residual after projection (a pivoted Gram–Schmidt).
pub fn orthonormal_completion<T: Real>(basis: &DMatrix<T>, count: usize) -> DMatrix<T> {
    let n = basis.nrows();
    let mut cols: Vec<DVector<T>> = basis.column_iter().map(|c| c.into_owned()).collect();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut best: Option<(T, DVector<T>)> = None;
        for axis in 0..n {
            let mut v = DVector::zeros(n);
            v[axis] = T::one();
            for _ in 0..2 {
                for c in &cols {
                    let d = c.dot(&v);
                    v.axpy(-d, c, T::one());
                }
            }
            let norm = v.norm();
            if best.as_ref().is_none_or(|(b, _)| norm > *b) {
                best = Some((norm, v));
            }
        }
        let (norm, v) = best.expect("n > 0");
        let v = v / norm;
        cols.push(v.clone());
        out.push(v);
    }
    if out.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&out)
    }
}

/// Modified Gram–Schmidt on the columns of `a`, returning orthonormal
/// columns and the smallest normalized residual seen.
pub fn gram_schmidt<T: Real>(a: &DMatrix<T>) -> (DMatrix<T>, T) {
    let mut cols: Vec<DVector<T>> = Vec::with_capacity(a.ncols());
    let mut min_ratio = T::one();
    for c in a.column_iter() {
        let mut v = c.into_owned();
        let n0 = v.norm();
        for _ in 0..2 {
            for q in &cols {
                let d = q.dot(&v);
                v.axpy(-d, q, T::one());
            }
        }
        let n = v.norm();
        if n0 > T::zero() {
            min_ratio = min_ratio.min(n / n0);
        } else {
            min_ratio = T::zero();
        }
        cols.push(if n > T::zero() { v / n } else { v });
    }
    let q = if cols.is_empty() {
        DMatrix::zeros(a.nrows(), 0)
    } else {
        DMatrix::from_columns(&cols)
    };
    (q, min_ratio)
}

/// Haar-random rotation in SO(n).
pub fn random_rotation<T: Real, R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<T> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    if q.determinant() < 0.0 {
        q.column_mut(0).neg_mut();
    }
    q.map(T::lit)
}

/// Random symmetric matrix with standard normal entries.
pub fn random_symmetric<T: Real, R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<T> {
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = T::lit(rng.sample::<f64, _>(StandardNormal));
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    a
}

pub fn max_abs<T: Real>(a: &DMatrix<T>) -> T {
    a.iter().fold(T::zero(), |acc, x| acc.max(x.abs()))
}

/// Frobenius inner product.
pub fn frobenius<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> T {
    a.component_mul(b).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn completion_is_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let q = random_rotation::<f64, _>(6, &mut rng);
        let basis = q.columns(0, 2).into_owned();
        let ext = orthonormal_completion(&basis, 4);
        let all = DMatrix::from_columns(
            &basis.column_iter().chain(ext.column_iter()).map(|c| c.into_owned()).collect::<Vec<_>>(),
        );
        let g = all.transpose() * &all;
        assert!((g - DMatrix::identity(6, 6)).amax() < 1e-14);
    }

    #[test]
    fn rotation_is_special_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for n in 1..6 {
            let q = random_rotation::<f64, _>(n, &mut rng);
            assert!((q.transpose() * &q - DMatrix::identity(n, n)).amax() < 1e-13);
            assert!((q.determinant() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn eigen_sorted() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0f64, 0.0, 0.0, 0.0, 3.0, 0.0, 0.0, 0.0, 2.0]);
        let (v, e) = sym_eigen_desc(&a);
        assert_eq!(v, vec![3.0, 2.0, 1.0]);
        assert!((e[(1, 0)].abs() - 1.0).abs() < 1e-15);
    }
}
