use std::f64::consts::PI;

use super::{Ambient, ChartDomain, ComplexJet, Immersion, ImmersionError};
use crate::jets::Jet;
use crate::scalar::Real;

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Hopf lift of the degree-n Veronese curve CP¹ → CP^n into S^{2n+1}.
///
/// Chart `(s, x, y)`; `ψ = e^{is} (sqrt(C(n,k)) ζ^k / (1+|ζ|²)^{n/2})_{k=0..n}`
/// with `ζ = x + iy`, written as `(Re ψ_0, Im ψ_0, Re ψ_1, …)`.
pub fn hopf_veronese<T: Real>(n: usize) -> Result<Immersion<T>, ImmersionError> {
    if n < 2 {
        return Err(ImmersionError::InvalidParams(format!("hopf_veronese needs n >= 2, got {n}")));
    }
    let coef: Vec<T> = (0..=n).map(|k| T::lit(binomial(n, k).sqrt())).collect();
    let half_n = T::lit(n as f64 / 2.0);
    let domain = ChartDomain::new(vec![0.0, -1.5, -1.5], vec![2.0 * PI, 1.5, 1.5])
        .excluding("the point zeta = infinity of CP^1");
    Ok(Immersion::new(
        format!("hopf_veronese(n={n})"),
        3,
        Ambient::UnitSphere(2 * n + 1),
        domain,
        move |v: &[Jet<T>]| {
            let (s, x, y) = (v[0], v[1], v[2]);
            let w = x * x + y * y + T::one();
            // (1+|ζ|²)^{-n/2}
            let wv = w.value();
            let inv = w.chain(
                wv.powf(-half_n),
                -half_n * wv.powf(-half_n - T::one()),
                half_n * (half_n + T::one()) * wv.powf(-half_n - T::one() - T::one()),
            );
            let phase = ComplexJet::new(s.cos(), s.sin()).scale(inv);
            let zeta = ComplexJet::new(x, y);
            let mut power = ComplexJet::one();
            let mut out = Vec::with_capacity(2 * n + 2);
            for c in &coef {
                let term = phase.mul(power);
                out.push(term.re * *c);
                out.push(term.im * *c);
                power = power.mul(zeta);
            }
            Ok(out)
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_value() {
        let f = hopf_veronese::<f64>(2).unwrap();
        let x = f.position(&[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(x, vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn unit_norm() {
        for n in 2..5 {
            let f = hopf_veronese::<f64>(n).unwrap();
            for k in 0..100 {
                let t = k as f64;
                let u = [0.1 * t, (0.37 * t).sin() * 1.4, (0.53 * t).cos() * 1.4];
                let x = f.position(&u).unwrap();
                let s: f64 = x.iter().map(|c| c * c).sum();
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_small_degree() {
        assert!(hopf_veronese::<f64>(1).is_err());
    }
}
