use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Ambient, ChartDomain, Immersion, ImmersionError};
use crate::jets::Jet;
use crate::scalar::Real;

/// Radii and angles of a flat Clifford-type surface in S^{2m-1}.
#[derive(Debug, Clone, PartialEq)]
pub struct CliffordParams {
    radii: Vec<f64>,
    angles: Vec<f64>,
}

impl CliffordParams {
    /// Validates and normalizes.
    ///
    /// Radii whose squares sum to within 1e-6 of one are rescaled onto the
    /// unit sphere; larger deviations are rejected. Angles must be pairwise
    /// distinct modulo π.
    pub fn new(radii: Vec<f64>, angles: Vec<f64>) -> Result<Self, ImmersionError> {
        let m = radii.len();
        if m < 2 || angles.len() != m {
            return Err(ImmersionError::InvalidParams(format!(
                "need at least two (radius, angle) pairs of equal length, got {} radii and {} angles",
                m,
                angles.len()
            )));
        }
        if let Some(r) = radii.iter().find(|r| !(**r > 0.0) || !r.is_finite()) {
            return Err(ImmersionError::InvalidParams(format!("radius {r} is not positive")));
        }
        let sum: f64 = radii.iter().map(|r| r * r).sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(ImmersionError::InvalidParams(format!(
                "sum of squared radii is {sum}, expected 1"
            )));
        }
        for i in 0..m {
            for j in 0..i {
                if (angles[i] - angles[j]).sin().abs() < 1e-9 {
                    return Err(ImmersionError::InvalidParams(format!(
                        "angles {} and {} coincide modulo pi",
                        angles[j], angles[i]
                    )));
                }
            }
        }
        let s = sum.sqrt();
        Ok(Self {
            radii: radii.into_iter().map(|r| r / s).collect(),
            angles,
        })
    }

    /// Equal radii `1/sqrt(m)` and angles `k pi / m`.
    pub fn equilateral(m: usize) -> Result<Self, ImmersionError> {
        let r = (1.0 / m as f64).sqrt();
        Self::new(vec![r; m], (0..m).map(|k| k as f64 * PI / m as f64).collect())
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn pairs(&self) -> usize {
        self.radii.len()
    }

    /// Seeded minimal parameter set.
    ///
    /// Wintgen sets are equilateral with `m` drawn from {3, 4, 5} and a
    /// random phase. The others use three random directions weighted by the
    /// barycentric coordinates of the origin in the triangle of the
    /// `e^{2iθ_k}`; they are minimal, with `|Σ e^{4iθ_k} r_k²| ≥ 0.05`.
    pub fn seeded_minimal(seed: u64, wintgen: bool) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if wintgen {
            let m = rng.random_range(3..=5usize);
            let phase = rng.random_range(0.0..PI);
            let r = (1.0 / m as f64).sqrt();
            let angles = (0..m).map(|k| phase + k as f64 * PI / m as f64).collect();
            return Self::new(vec![r; m], angles).expect("equilateral angles are distinct");
        }
        loop {
            let t: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..PI)).collect();
            let z: Vec<(f64, f64)> = t.iter().map(|a| ((2.0 * a).cos(), (2.0 * a).sin())).collect();
            // w1 (z1 - z3) + w2 (z2 - z3) = -z3
            let (a, b) = (z[0].0 - z[2].0, z[1].0 - z[2].0);
            let (c, d) = (z[0].1 - z[2].1, z[1].1 - z[2].1);
            let det = a * d - b * c;
            if det.abs() < 1e-3 {
                continue;
            }
            let w1 = (-z[2].0 * d + z[2].1 * b) / det;
            let w2 = (-a * z[2].1 + c * z[2].0) / det;
            let w = [w1, w2, 1.0 - w1 - w2];
            if w.iter().any(|x| *x < 0.05) {
                continue;
            }
            let radii: Vec<f64> = w.iter().map(|x| x.sqrt()).collect();
            if clifford_conditions(&radii, &t).wintgen_defect < 0.05 {
                continue;
            }
            if let Ok(p) = Self::new(radii, t) {
                return p;
            }
        }
    }
}

/// Defects of the unit-sphere, minimality and Wintgen conditions.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct CliffordConditions {
    /// |Σ r_k² − 1|
    pub unit_sum: f64,
    /// |Σ e^{2iθ_k} r_k²|
    pub minimal_defect: f64,
    /// |Σ e^{4iθ_k} r_k²|
    pub wintgen_defect: f64,
}

impl CliffordConditions {
    pub fn is_minimal(&self, tol: f64) -> bool {
        self.unit_sum < tol && self.minimal_defect < tol
    }

    pub fn is_wintgen(&self, tol: f64) -> bool {
        self.is_minimal(tol) && self.wintgen_defect < tol
    }
}

pub fn clifford_conditions(radii: &[f64], angles: &[f64]) -> CliffordConditions {
    let moment = |k: f64| {
        let (re, im) = radii
            .iter()
            .zip(angles)
            .fold((0.0, 0.0), |(re, im), (r, t)| {
                (re + r * r * (k * t).cos(), im + r * r * (k * t).sin())
            });
        re.hypot(im)
    };
    let sum: f64 = radii.iter().map(|r| r * r).sum();
    CliffordConditions {
        unit_sum: (sum - 1.0).abs(),
        minimal_defect: moment(2.0),
        wintgen_defect: moment(4.0),
    }
}

/// Flat surface `(x, y) ↦ (r_k cos(x cos θ_k + y sin θ_k), r_k sin(…))_k` in S^{2m-1}.
pub fn clifford<T: Real>(params: &CliffordParams) -> Immersion<T> {
    let m = params.pairs();
    let radii: Vec<T> = params.radii.iter().map(|&r| T::lit(r)).collect();
    let dirs: Vec<(T, T)> = params
        .angles
        .iter()
        .map(|&t| (T::lit(t.cos()), T::lit(t.sin())))
        .collect();
    let domain = ChartDomain::new(vec![0.0, 0.0], vec![2.0 * PI, 2.0 * PI]);
    Immersion::new(
        format!("clifford(m={m})"),
        2,
        Ambient::UnitSphere(2 * m - 1),
        domain,
        move |v: &[Jet<T>]| {
            let mut out = Vec::with_capacity(2 * m);
            for (r, (c, s)) in radii.iter().zip(&dirs) {
                let phase = v[0] * *c + v[1] * *s;
                out.push(phase.cos() * *r);
                out.push(phase.sin() * *r);
            }
            Ok(out)
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_sets_are_minimal() {
        for seed in 0..20 {
            for wintgen in [true, false] {
                let p = CliffordParams::seeded_minimal(seed, wintgen);
                let c = clifford_conditions(p.radii(), p.angles());
                assert!(c.is_minimal(1e-12), "{c:?}");
                assert_eq!(c.wintgen_defect < 1e-9, wintgen, "{c:?}");
            }
        }
    }

    #[test]
    fn torus_at_origin() {
        let h = 0.5f64.sqrt();
        let p = CliffordParams::new(vec![h, h], vec![0.0, PI / 2.0]).unwrap();
        let f = clifford::<f64>(&p).position(&[0.0, 0.0]).unwrap();
        assert_eq!(f.len(), 4);
        assert!((f[0] - h).abs() < 1e-15 && f[1].abs() < 1e-15);
        assert!((f[2] - h).abs() < 1e-15 && f[3].abs() < 1e-15);
    }

    #[test]
    fn equal_angles_rejected() {
        assert!(CliffordParams::new(vec![0.6, 0.8], vec![0.0, 0.0]).is_err());
        assert!(CliffordParams::new(vec![0.6, 0.8], vec![0.3, 0.3 + PI]).is_err());
    }

    #[test]
    fn radii_normalized_or_rejected() {
        let p = CliffordParams::new(vec![0.6, 0.8 + 1e-7], vec![0.0, 1.0]).unwrap();
        let s: f64 = p.radii().iter().map(|r| r * r).sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(CliffordParams::new(vec![0.6, 0.81], vec![0.0, 1.0]).is_err());
        assert!(CliffordParams::new(vec![-0.6, 0.8], vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn unit_norm_everywhere() {
        let p = CliffordParams::new(vec![0.5, 0.5, 0.5f64.sqrt()], vec![0.1, 1.2, 2.0]).unwrap();
        let f = clifford::<f64>(&p);
        for k in 0..50 {
            let u = [0.37 * k as f64, -0.21 * k as f64 + 1.0];
            let x = f.position(&u).unwrap();
            let n: f64 = x.iter().map(|c| c * c).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }

    /// Independent complex-arithmetic oracle for the moment sums.
    fn moments_oracle(r2: &[f64], theta: &[f64], k: f64) -> f64 {
        use num_complex_oracle::C;
        let mut s = C(0.0, 0.0);
        for (a, t) in r2.iter().zip(theta) {
            s = s.add(C::polar(*a, k * t));
        }
        s.abs()
    }

    mod num_complex_oracle {
        #[derive(Clone, Copy)]
        pub struct C(pub f64, pub f64);
        impl C {
            pub fn polar(r: f64, t: f64) -> C {
                C(r * t.cos(), r * t.sin())
            }
            pub fn add(self, o: C) -> C {
                C(self.0 + o.0, self.1 + o.1)
            }
            pub fn abs(self) -> f64 {
                (self.0 * self.0 + self.1 * self.1).sqrt()
            }
        }
    }

    #[test]
    fn equilateral_is_minimal_and_wintgen() {
        let r = (1.0f64 / 3.0).sqrt();
        let th = [0.0, PI / 3.0, 2.0 * PI / 3.0];
        let c = clifford_conditions(&[r, r, r], &th);
        assert!(c.unit_sum < 1e-15);
        assert!(c.minimal_defect < 1e-15);
        assert!(c.wintgen_defect < 1e-15);
        let r2 = [1.0 / 3.0; 3];
        assert!(moments_oracle(&r2, &th, 2.0) < 1e-15);
        assert!(moments_oracle(&r2, &th, 4.0) < 1e-15);
    }

    #[test]
    fn torus_is_minimal_not_wintgen() {
        let h = 0.5f64.sqrt();
        let c = clifford_conditions(&[h, h], &[0.0, PI / 2.0]);
        assert!(c.unit_sum < 1e-15 && c.minimal_defect < 1e-15);
        assert!((c.wintgen_defect - 1.0).abs() < 1e-15);
        assert!((moments_oracle(&[0.5, 0.5], &[0.0, PI / 2.0], 4.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_single_radius() {
        let c = clifford_conditions(&[1.0, 0.0], &[0.0, 0.5]);
        assert_eq!(c.unit_sum, 0.0);
        assert!(CliffordParams::new(vec![1.0, 0.0], vec![0.0, 0.5]).is_err());
    }
}
