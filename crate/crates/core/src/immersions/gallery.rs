use std::collections::BTreeMap;

use super::hopf::binomial;
use super::{
    clifford, cone, hopf_veronese, veronese_sphere, Ambient, ChartDomain, CliffordParams, Immersion,
    ImmersionError,
};
use crate::jets::Jet;
use crate::scalar::Real;

/// Family parameters as `key → value` strings (lists are comma separated).
pub type Params = BTreeMap<String, String>;

/// Name and parameter signature of a gallery family.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GalleryEntry {
    pub name: &'static str,
    pub signature: &'static str,
    pub summary: &'static str,
}

pub fn gallery_names() -> Vec<GalleryEntry> {
    vec![
        GalleryEntry {
            name: "veronese_s4",
            signature: "",
            summary: "quadratic Veronese surface S^2 -> S^4",
        },
        GalleryEntry {
            name: "veronese_s2k",
            signature: "k=2|3",
            summary: "Veronese surface S^2 -> S^2k from degree-k harmonics",
        },
        GalleryEntry {
            name: "clifford",
            signature: "preset=equilateral|torus m=<int> | r=<list> theta=<list>",
            summary: "flat Clifford-type surface R^2 -> S^(2m-1)",
        },
        GalleryEntry {
            name: "hopf_veronese",
            signature: "n=<int >= 2>",
            summary: "Hopf lift of the Veronese curve CP^1 -> CP^n into S^(2n+1)",
        },
        GalleryEntry {
            name: "cone_of",
            signature: "base=<name> extra=<int> base.<key>=<value>...",
            summary: "cone f(t,y,u) = (y, t u) over a sphere-valued family",
        },
        GalleryEntry {
            name: "plane",
            signature: "dim=<int> ambient=<int>",
            summary: "affine subspace R^dim in R^ambient (totally umbilic)",
        },
    ]
}

struct ParamReader<'a> {
    family: &'a str,
    params: &'a Params,
    used: Vec<&'a str>,
}

impl<'a> ParamReader<'a> {
    fn new(family: &'a str, params: &'a Params) -> Self {
        Self {
            family,
            params,
            used: Vec::new(),
        }
    }

    fn raw(&mut self, key: &'a str) -> Option<&'a str> {
        self.used.push(key);
        self.params.get(key).map(|s| s.as_str())
    }

    fn usize_or(&mut self, key: &'a str, default: usize) -> Result<usize, ImmersionError> {
        match self.raw(key) {
            None => Ok(default),
            Some(s) => s.trim().parse().map_err(|_| {
                ImmersionError::InvalidParams(format!("{}: '{key}' must be an integer, got '{s}'", self.family))
            }),
        }
    }

    fn list(&mut self, key: &'a str) -> Result<Option<Vec<f64>>, ImmersionError> {
        match self.raw(key) {
            None => Ok(None),
            Some(s) => s
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map(Some)
                .map_err(|_| {
                    ImmersionError::InvalidParams(format!("{}: '{key}' must be a list of numbers", self.family))
                }),
        }
    }

    fn finish(self, allow_prefix: Option<&str>) -> Result<(), ImmersionError> {
        for k in self.params.keys() {
            let known = self.used.contains(&k.as_str())
                || allow_prefix.is_some_and(|p| k.starts_with(p));
            if !known {
                return Err(ImmersionError::InvalidParams(format!(
                    "{}: unknown parameter '{k}'",
                    self.family
                )));
            }
        }
        Ok(())
    }
}

fn clifford_params(r: &mut ParamReader<'_>) -> Result<CliffordParams, ImmersionError> {
    let radii = r.list("r")?;
    let theta = r.list("theta")?;
    let preset = r.raw("preset");
    let m = r.usize_or("m", 3)?;
    match (radii, theta) {
        (Some(radii), Some(theta)) => {
            if preset.is_some() {
                return Err(ImmersionError::InvalidParams(
                    "clifford: give either a preset or r/theta".into(),
                ));
            }
            CliffordParams::new(radii, theta)
        }
        (None, None) => match preset.unwrap_or("equilateral") {
            "equilateral" => {
                if m < 2 {
                    return Err(ImmersionError::InvalidParams(format!("clifford: m must be >= 2, got {m}")));
                }
                CliffordParams::equilateral(m)
            }
            "torus" => CliffordParams::equilateral(2),
            other => Err(ImmersionError::InvalidParams(format!("clifford: unknown preset '{other}'"))),
        },
        _ => Err(ImmersionError::InvalidParams(
            "clifford: r and theta must be given together".into(),
        )),
    }
}

/// Builds a gallery immersion by family name.
pub fn gallery_get<T: Real>(name: &str, params: &Params) -> Result<Immersion<T>, ImmersionError> {
    let mut r = ParamReader::new(name, params);
    let out = match name {
        "veronese_s4" => veronese_sphere(2)?,
        "veronese_s2k" => {
            let k = r.usize_or("k", 2)?;
            if k < 2 {
                return Err(ImmersionError::InvalidParams(format!("veronese_s2k: k must be >= 2, got {k}")));
            }
            veronese_sphere(k)?
        }
        "clifford" => clifford(&clifford_params(&mut r)?),
        "hopf_veronese" => hopf_veronese(r.usize_or("n", 2)?)?,
        "cone_of" => {
            let base_name = r.raw("base").unwrap_or("veronese_s4").to_string();
            let extra = r.usize_or("extra", 0)?;
            let base_params: Params = params
                .iter()
                .filter_map(|(k, v)| k.strip_prefix("base.").map(|k| (k.to_string(), v.clone())))
                .collect();
            if base_name == "cone_of" {
                return Err(ImmersionError::InvalidParams("cone_of: base must be sphere-valued".into()));
            }
            let base = gallery_get::<T>(&base_name, &base_params)?;
            r.finish(Some("base."))?;
            return cone(&base, extra);
        }
        "plane" => {
            let dim = r.usize_or("dim", 3)?;
            let ambient = r.usize_or("ambient", 5)?;
            if dim < 2 || ambient <= dim || dim > crate::jets::MAX_DIM {
                return Err(ImmersionError::InvalidParams(format!(
                    "plane: need 2 <= dim < ambient and dim <= {}, got dim={dim} ambient={ambient}",
                    crate::jets::MAX_DIM
                )));
            }
            plane(dim, ambient)
        }
        other => return Err(ImmersionError::UnknownExample(other.to_string())),
    };
    r.finish(None)?;
    Ok(out)
}

fn plane<T: Real>(dim: usize, ambient: usize) -> Immersion<T> {
    Immersion::new(
        format!("plane({dim} in {ambient})"),
        dim,
        Ambient::Euclidean(ambient),
        ChartDomain::new(vec![-1.0; dim], vec![1.0; dim]),
        move |v: &[Jet<T>]| {
            let mut out = v.to_vec();
            out.resize(ambient, Jet::constant(T::zero()));
            Ok(out)
        },
    )
}

fn lit(x: f64) -> String {
    format!("{x:?}")
}

/// DSL component sources for the families expressible in the expression
/// language, with chart dimension and ambient. Used to cross-check the DSL
/// against the hand-coded maps.
pub fn gallery_dsl_sources(name: &str, params: &Params) -> Option<(usize, Ambient, Vec<String>)> {
    match name {
        "veronese_s4" => {
            let s3 = lit(3f64.sqrt());
            let x = "(sin(u1)*cos(u2))";
            let y = "(sin(u1)*sin(u2))";
            let z = "cos(u1)";
            Some((
                2,
                Ambient::UnitSphere(4),
                vec![
                    format!("{s3}*{x}*{y}"),
                    format!("{s3}*{x}*{z}"),
                    format!("{s3}*{y}*{z}"),
                    format!("{}*({x}^2 - {y}^2)", lit(3f64.sqrt() / 2.0)),
                    format!("0.5*(2*{z}^2 - {x}^2 - {y}^2)"),
                ],
            ))
        }
        "clifford" => {
            let mut r = ParamReader::new(name, params);
            let p = clifford_params(&mut r).ok()?;
            let mut comps = Vec::new();
            for (rad, th) in p.radii().iter().zip(p.angles()) {
                let phase = format!("(u1*{} + u2*{})", lit(th.cos()), lit(th.sin()));
                comps.push(format!("{}*cos{phase}", lit(*rad)));
                comps.push(format!("{}*sin{phase}", lit(*rad)));
            }
            Some((2, Ambient::UnitSphere(2 * p.pairs() - 1), comps))
        }
        "hopf_veronese" => {
            let n: usize = params.get("n").map_or(Some(2), |s| s.parse().ok())?;
            if n < 2 {
                return None;
            }
            let mut comps = Vec::new();
            let scale = format!("pow(1 + u2^2 + u3^2, -{})", lit(n as f64 / 2.0));
            for k in 0..=n {
                let mut re = Vec::new();
                let mut im = Vec::new();
                for j in 0..=k {
                    let c = binomial(k, j);
                    let sign = if (j / 2) % 2 == 0 { "" } else { "-" };
                    let term = format!("{sign}{}*u2^{}*u3^{}", lit(c), k - j, j);
                    if j % 2 == 0 {
                        re.push(term);
                    } else {
                        im.push(term);
                    }
                }
                let re = if re.is_empty() { "0".to_string() } else { format!("({})", re.join(" + ")) };
                let im = if im.is_empty() { "0".to_string() } else { format!("({})", im.join(" + ")) };
                let c = lit(binomial(n, k).sqrt());
                comps.push(format!("{c}*(cos(u1)*{re} - sin(u1)*{im})*{scale}"));
                comps.push(format!("{c}*(sin(u1)*{re} + cos(u1)*{im})*{scale}"));
            }
            Some((3, Ambient::UnitSphere(2 * n + 1), comps))
        }
        "plane" => {
            let dim: usize = params.get("dim").map_or(Some(3), |s| s.parse().ok())?;
            let ambient: usize = params.get("ambient").map_or(Some(5), |s| s.parse().ok())?;
            let mut comps: Vec<String> = (1..=dim).map(|i| format!("u{i}")).collect();
            comps.resize(ambient, "0".into());
            Some((dim, Ambient::Euclidean(ambient), comps))
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(kv: &[(&str, &str)]) -> Params {
        kv.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn every_family_builds_with_defaults() {
        for e in gallery_names() {
            let f = gallery_get::<f64>(e.name, &Params::new()).unwrap();
            let u = f.domain().from_unit(&vec![0.4; f.chart_dim()]);
            let x = f.position(&u).unwrap();
            assert_eq!(x.len(), f.ambient().components());
        }
    }

    #[test]
    fn equilateral_clifford_is_flat_torus_in_s5() {
        let f = gallery_get::<f64>("clifford", &params(&[("preset", "equilateral"), ("m", "3")])).unwrap();
        assert_eq!(f.ambient(), Ambient::UnitSphere(5));
        assert_eq!(f.chart_dim(), 2);
    }

    #[test]
    fn plane_is_three_in_five() {
        let f = gallery_get::<f64>("plane", &Params::new()).unwrap();
        assert_eq!((f.chart_dim(), f.ambient()), (3, Ambient::Euclidean(5)));
    }

    #[test]
    fn errors() {
        assert!(matches!(
            gallery_get::<f64>("klein_bottle", &Params::new()),
            Err(ImmersionError::UnknownExample(_))
        ));
        assert!(gallery_get::<f64>("hopf_veronese", &params(&[("n", "1")])).is_err());
        assert!(gallery_get::<f64>("veronese_s2k", &params(&[("k", "1")])).is_err());
        assert!(gallery_get::<f64>("clifford", &params(&[("r", "-0.6,0.8"), ("theta", "0,1")])).is_err());
        assert!(gallery_get::<f64>("plane", &params(&[("colour", "red")])).is_err());
        assert!(gallery_get::<f64>("cone_of", &params(&[("base", "plane")])).is_err());
    }

    #[test]
    fn cone_of_passes_base_params() {
        let f = gallery_get::<f64>(
            "cone_of",
            &params(&[("base", "clifford"), ("base.preset", "torus"), ("extra", "1")]),
        )
        .unwrap();
        assert_eq!(f.chart_dim(), 4);
        assert_eq!(f.ambient(), Ambient::Euclidean(5));
    }
}
