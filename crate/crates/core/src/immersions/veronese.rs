use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;

use super::{Ambient, ChartDomain, Immersion, ImmersionError};
use crate::jets::Jet;
use crate::scalar::Real;

/// A homogeneous polynomial in (x, y, z): list of (coefficient, [i, j, k]) terms.
pub type Polynomial = Vec<(f64, [u32; 3])>;

fn sphere_point<T: Real>(v: &[Jet<T>]) -> [Jet<T>; 3] {
    let (theta, phi) = (v[0], v[1]);
    let st = theta.sin();
    [st * phi.cos(), st * phi.sin(), theta.cos()]
}

fn sphere_domain() -> ChartDomain {
    ChartDomain::new(vec![0.3, 0.0], vec![PI - 0.3, 2.0 * PI]).excluding("theta in {0, pi}")
}

/// The quadratic Veronese surface S² → S⁴ in spherical coordinates (θ, φ).
pub fn veronese_s4<T: Real>() -> Immersion<T> {
    let s3 = T::lit(3f64.sqrt());
    let half = T::lit(0.5);
    Immersion::new("veronese_s4", 2, Ambient::UnitSphere(4), sphere_domain(), move |v: &[Jet<T>]| {
        let [x, y, z] = sphere_point(v);
        Ok(vec![
            x * y * s3,
            x * z * s3,
            y * z * s3,
            (x * x - y * y) * (s3 * half),
            (z * z * T::lit(2.0) - x * x - y * y) * half,
        ])
    })
}

/// Seven harmonic cubics spanning the degree-3 harmonic space on R³.
fn harmonic_cubic_spanning_set() -> Vec<Polynomial> {
    vec![
        // z(2z² - 3x² - 3y²)
        vec![(2.0, [0, 0, 3]), (-3.0, [2, 0, 1]), (-3.0, [0, 2, 1])],
        // x(4z² - x² - y²)
        vec![(4.0, [1, 0, 2]), (-1.0, [3, 0, 0]), (-1.0, [1, 2, 0])],
        // y(4z² - x² - y²)
        vec![(4.0, [0, 1, 2]), (-1.0, [2, 1, 0]), (-1.0, [0, 3, 0])],
        // z(x² - y²)
        vec![(1.0, [2, 0, 1]), (-1.0, [0, 2, 1])],
        // xyz
        vec![(1.0, [1, 1, 1])],
        // x³ - 3xy²
        vec![(1.0, [3, 0, 0]), (-3.0, [1, 2, 0])],
        // 3x²y - y³
        vec![(3.0, [2, 1, 0]), (-1.0, [0, 3, 0])],
    ]
}

fn eval_poly(p: &Polynomial, x: f64, y: f64, z: f64) -> f64 {
    p.iter()
        .map(|(c, [i, j, k])| c * x.powi(*i as i32) * y.powi(*j as i32) * z.powi(*k as i32))
        .sum()
}

/// Tensor-product Gauss–Legendre (in cos θ) × trapezoid (in φ) rule on S².
fn sphere_rule(n_gauss: usize, n_phi: usize) -> Vec<([f64; 3], f64)> {
    let gl = GaussLegendre::new(NonZeroUsize::new(n_gauss).expect("positive"));
    let dphi = 2.0 * PI / n_phi as f64;
    let mut nodes = Vec::with_capacity(n_gauss * n_phi);
    for &(z, w) in gl.as_node_weight_pairs() {
        let s = (1.0 - z * z).max(0.0).sqrt();
        for k in 0..n_phi {
            let phi = k as f64 * dphi;
            nodes.push(([s * phi.cos(), s * phi.sin(), z], w * dphi));
        }
    }
    nodes
}

/// L²(S²)-orthonormal basis of degree-3 harmonics, built by Gram–Schmidt
/// against a 50 × 100 quadrature grid (exact for the degree-6 integrands).
pub fn harmonic_cubic_basis() -> Vec<Polynomial> {
    let rule = sphere_rule(50, 100);
    let inner = |a: &Polynomial, b: &Polynomial| -> f64 {
        rule.iter()
            .map(|([x, y, z], w)| w * eval_poly(a, *x, *y, *z) * eval_poly(b, *x, *y, *z))
            .sum()
    };
    let mut basis: Vec<Polynomial> = Vec::new();
    for p in harmonic_cubic_spanning_set() {
        let mut q = p.clone();
        // modified Gram–Schmidt, twice for stability
        for _ in 0..2 {
            for b in &basis {
                let c = inner(&q, b);
                for (coef, mono) in b {
                    add_term(&mut q, -c * coef, *mono);
                }
            }
        }
        let n = inner(&q, &q).sqrt();
        for t in &mut q {
            t.0 /= n;
        }
        q.retain(|t| t.0.abs() > 1e-15);
        basis.push(q);
    }
    basis
}

fn add_term(p: &mut Polynomial, c: f64, mono: [u32; 3]) {
    match p.iter_mut().find(|t| t.1 == mono) {
        Some(t) => t.0 += c,
        None => p.push((c, mono)),
    }
}

fn poly_jet<T: Real>(p: &Polynomial, xyz: &[Jet<T>; 3]) -> Jet<T> {
    p.iter().fold(Jet::constant(T::zero()), |acc, (c, [i, j, k])| {
        acc + xyz[0].powi(*i as i32) * xyz[1].powi(*j as i32) * xyz[2].powi(*k as i32) * T::lit(*c)
    })
}

/// Veronese surface S² → S^{2k} for k ∈ {2, 3}.
pub fn veronese_sphere<T: Real>(k: usize) -> Result<Immersion<T>, ImmersionError> {
    match k {
        2 => Ok(veronese_s4()),
        3 => {
            // addition theorem: Σ Y_i² = 7/(4π) for an orthonormal basis
            let scale = (4.0 * PI / 7.0).sqrt();
            let basis: Vec<Polynomial> = harmonic_cubic_basis()
                .into_iter()
                .map(|p| p.into_iter().map(|(c, m)| (c * scale, m)).collect())
                .collect();
            Ok(Immersion::new(
                "veronese_s6",
                2,
                Ambient::UnitSphere(6),
                sphere_domain(),
                move |v: &[Jet<T>]| {
                    let xyz = sphere_point(v);
                    Ok(basis.iter().map(|p| poly_jet(p, &xyz)).collect())
                },
            ))
        }
        _ => Err(ImmersionError::InvalidParams(format!(
            "Veronese degree {k} is not supported (2 or 3)"
        ))),
    }
}
