#![allow(clippy::needless_range_loop)]

use mwl_core::expr::Ast;
use mwl_core::immersions::{gallery_dsl_sources, gallery_get, Immersion, Params};
use mwl_core::jets::{field_derivative, FdScheme, FieldDerivativeSpec, Partial};
use mwl_core::probe::{sample_points, Sampling};
use proptest::prelude::*;

fn params(kv: &[(&str, &str)]) -> Params {
    kv.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

#[test]
fn dsl_sources_match_hand_coded_maps() {
    let cases = [
        ("veronese_s4", params(&[])),
        ("clifford", params(&[])),
        ("clifford", params(&[("preset", "torus")])),
        ("clifford", params(&[("r", "0.6,0.8"), ("theta", "0.1,1.3")])),
        ("hopf_veronese", params(&[])),
        ("hopf_veronese", params(&[("n", "3")])),
        ("plane", params(&[])),
    ];
    for (name, p) in cases {
        let coded: Immersion<f64> = gallery_get(name, &p).unwrap();
        let (dim, ambient, comps) = gallery_dsl_sources(name, &p).unwrap();
        let dsl = Immersion::<f64>::from_dsl(name, dim, ambient, coded.domain().clone(), &comps).unwrap();
        for u in sample_points(coded.domain(), Sampling::Random { count: 20, seed: 11 }) {
            let a = coded.evaluate(&u).unwrap();
            let b = dsl.evaluate(&u).unwrap();
            for (x, y) in a.iter().zip(&b) {
                let scale = 1.0 + x.value().abs();
                assert!((x.value() - y.value()).abs() < 1e-12 * scale, "{name} value at {u:?}");
                for i in 0..dim {
                    assert!((x.grad(i) - y.grad(i)).abs() < 1e-12 * scale, "{name} grad at {u:?}");
                    for j in 0..dim {
                        assert!((x.hess(i, j) - y.hess(i, j)).abs() < 1e-12 * scale, "{name} hess at {u:?}");
                    }
                }
            }
        }
    }
}

type Term = (f64, [u32; 3]);

fn source(terms: &[Term]) -> String {
    terms
        .iter()
        .map(|(c, e)| format!("({c:?})*u1^{}*u2^{}*u3^{}", e[0], e[1], e[2]))
        .collect::<Vec<_>>()
        .join(" + ")
}

/// Value, gradient and Hessian of a polynomial by the power rule.
fn symbolic(terms: &[Term], x: &[f64; 3]) -> (f64, [f64; 3], [[f64; 3]; 3]) {
    let pw = |b: f64, e: u32| if e == 0 { 1.0 } else { b.powi(e as i32) };
    // d^k/dx^k x^e
    let d = |b: f64, e: u32, k: u32| -> f64 {
        if k > e {
            return 0.0;
        }
        let fall: f64 = (0..k).map(|i| (e - i) as f64).product();
        fall * pw(b, e - k)
    };
    let mut v = 0.0;
    let mut g = [0.0; 3];
    let mut h = [[0.0; 3]; 3];
    for (c, e) in terms {
        let mono = |k: [u32; 3]| c * (0..3).map(|i| d(x[i], e[i], k[i])).product::<f64>();
        v += mono([0, 0, 0]);
        for i in 0..3 {
            let mut k = [0; 3];
            k[i] = 1;
            g[i] += mono(k);
            for j in 0..3 {
                let mut k = [0; 3];
                k[i] += 1;
                k[j] += 1;
                h[i][j] += mono(k);
            }
        }
    }
    (v, g, h)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn polynomial_jets_match_symbolic_derivatives(
        terms in prop::collection::vec((-3.0f64..3.0, [0u32..4, 0u32..4, 0u32..4]), 1..6),
        x in [-1.5f64..1.5, -1.5f64..1.5, -1.5f64..1.5],
    ) {
        let ast = Ast::parse(&source(&terms)).unwrap();
        ast.validate(3).unwrap();
        let jet = ast.eval_jet(&x).unwrap();
        let (v, g, h) = symbolic(&terms, &x);
        let scale = 1.0 + terms.iter().map(|(c, _)| c.abs()).sum::<f64>() * 50.0;
        prop_assert!((jet.value() - v).abs() < 1e-12 * scale);
        for i in 0..3 {
            prop_assert!((jet.grad(i) - g[i]).abs() < 1e-12 * scale);
            for j in 0..3 {
                prop_assert!((jet.hess(i, j) - h[i][j]).abs() < 1e-12 * scale);
            }
        }
    }
}

#[test]
fn finite_differences_converge_at_scheme_order() {
    let f = |p: &[f64]| -> Result<f64, String> { Ok(p[0].sin() * (0.5 * p[1]).exp()) };
    let x = [0.7, -0.3];
    let exact_xy = 0.7f64.cos() * 0.5 * (-0.15f64).exp();
    for (scheme, order) in [(FdScheme::Order2, 2.0), (FdScheme::Order4, 4.0)] {
        let err = |h: f64| {
            let spec = FieldDerivativeSpec {
                step: h,
                richardson_levels: 1,
                scheme,
            };
            (field_derivative(f, &x, Partial::Second(0, 1), &spec).unwrap() - exact_xy).abs()
        };
        let rate = (err(0.08) / err(0.04)).log2();
        assert!((rate - order).abs() < 0.3, "{scheme:?}: observed order {rate}");
    }
    let spec = FieldDerivativeSpec::<f64>::default();
    let v = field_derivative(f, &x, Partial::Second(0, 1), &spec).unwrap();
    assert!((v - exact_xy).abs() < 1e-8);
}
