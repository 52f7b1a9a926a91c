//! JSON run configuration.
//!
//! A config fully describes a computation; the CLI flags are translated into
//! the same structure, and reports echo it so a run can be repeated with
//! `mwl eval --config`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use mwl_core::immersions::{gallery_get, Ambient, ChartDomain, Immersion, Params};
use mwl_core::jets::{FdScheme, FieldDerivativeSpec};
use mwl_core::probe::Sampling;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub immersion: ImmersionConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<RegionConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling: Option<SamplingConfig>,
    /// Single chart point, for `certify` and `invariants`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<f64>>,
    #[serde(default)]
    pub fd: FdConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Either a gallery family with parameters, or DSL component strings.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImmersionConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gallery: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chart_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ambient: Option<Ambient>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingKind {
    Grid,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    pub kind: SamplingKind,
    /// Points per axis (grid) or total count (random).
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FdConfig {
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_richardson")]
    pub richardson: u32,
    #[serde(default = "default_scheme")]
    pub scheme: FdScheme,
}

fn default_step() -> f64 {
    1e-3
}

fn default_richardson() -> u32 {
    2
}

fn default_scheme() -> FdScheme {
    FdScheme::Order4
}

impl Default for FdConfig {
    fn default() -> Self {
        Self {
            step: default_step(),
            richardson: default_richardson(),
            scheme: default_scheme(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_jet")]
    pub jet_exact: f64,
    #[serde(default = "default_fd")]
    pub fd_class: f64,
}

fn default_jet() -> f64 {
    mwl_core::ddvv::JET_EXACT_TOL
}

fn default_fd() -> f64 {
    mwl_core::ddvv::FD_CLASS_TOL
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            jet_exact: default_jet(),
            fd_class: default_fd(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub json: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default)]
    pub pretty: bool,
}

impl Config {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: Config = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Schema checks that serde cannot express.
    pub fn validate(&self) -> Result<(), CliError> {
        let im = &self.immersion;
        let dsl = im.chart_dim.is_some() || im.ambient.is_some() || im.components.is_some();
        match (&im.gallery, dsl) {
            (Some(_), true) => {
                return Err(CliError::Usage(
                    "immersion: give either 'gallery' or 'chart_dim'/'ambient'/'components', not both".into(),
                ))
            }
            (None, false) => {
                return Err(CliError::Usage("immersion: 'gallery' or DSL components required".into()))
            }
            (None, true) => {
                if im.chart_dim.is_none() || im.ambient.is_none() || im.components.is_none() {
                    return Err(CliError::Usage(
                        "immersion: DSL immersions need 'chart_dim', 'ambient' and 'components'".into(),
                    ));
                }
                if self.region.is_none() {
                    return Err(CliError::Usage("DSL immersions need a 'region'".into()));
                }
                if !im.params.is_empty() {
                    return Err(CliError::Usage("immersion: 'params' only applies to gallery families".into()));
                }
            }
            (Some(_), false) => {}
        }
        if let Some(r) = &self.region {
            if r.lower.len() != r.upper.len() || r.lower.iter().zip(&r.upper).any(|(a, b)| !(a <= b)) {
                return Err(CliError::Usage("region: 'lower' and 'upper' must have equal length and lower <= upper".into()));
            }
        }
        if let Some(s) = &self.sampling {
            if s.n == 0 {
                return Err(CliError::Usage("sampling: 'n' must be positive".into()));
            }
            if s.kind == SamplingKind::Random && s.seed.is_none() {
                return Err(CliError::Usage("sampling: random sampling needs a 'seed'".into()));
            }
        }
        self.fd_spec().validate().map_err(|e| CliError::Usage(e.to_string()))?;
        if !(self.tolerances.jet_exact > 0.0 && self.tolerances.fd_class > 0.0) {
            return Err(CliError::Usage("tolerances must be positive".into()));
        }
        Ok(())
    }

    pub fn gallery_params(&self) -> Params {
        self.immersion
            .params
            .iter()
            .map(|(k, v)| {
                let s = match v {
                    Value::String(s) => s.clone(),
                    Value::Array(items) => items
                        .iter()
                        .map(|x| match x {
                            Value::String(s) => s.clone(),
                            other => other.to_string(),
                        })
                        .collect::<Vec<_>>()
                        .join(","),
                    other => other.to_string(),
                };
                (k.clone(), s)
            })
            .collect()
    }

    pub fn build_immersion(&self) -> Result<Immersion<f64>, CliError> {
        let im = &self.immersion;
        if let Some(name) = &im.gallery {
            return gallery_get(name, &self.gallery_params()).map_err(|e| CliError::Usage(e.to_string()));
        }
        let region = self.region.as_ref().expect("validated");
        let domain = ChartDomain::new(region.lower.clone(), region.upper.clone());
        Immersion::from_dsl(
            im.name.clone().unwrap_or_else(|| "dsl".into()),
            im.chart_dim.expect("validated"),
            im.ambient.expect("validated"),
            domain,
            im.components.as_deref().expect("validated"),
        )
        .map_err(|e| CliError::Usage(e.to_string()))
    }

    pub fn region_for(&self, immersion: &Immersion<f64>) -> ChartDomain {
        match &self.region {
            Some(r) => ChartDomain::new(r.lower.clone(), r.upper.clone()),
            None => immersion.domain().clone(),
        }
    }

    pub fn sampling(&self) -> Option<Sampling> {
        self.sampling.map(|s| match s.kind {
            SamplingKind::Grid => Sampling::Grid { n: s.n },
            SamplingKind::Random => Sampling::Random {
                count: s.n,
                seed: s.seed.unwrap_or(0),
            },
        })
    }

    pub fn fd_spec(&self) -> FieldDerivativeSpec<f64> {
        FieldDerivativeSpec {
            step: self.fd.step,
            richardson_levels: self.fd.richardson,
            scheme: self.fd.scheme,
        }
    }

    pub fn echo(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_gallery_config() {
        let cfg: Config = serde_json::from_str(
            r#"{"immersion": {"gallery": "veronese_s4"}, "sampling": {"kind": "grid", "n": 3}}"#,
        )
        .unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.fd, FdConfig::default());
        assert_eq!(cfg.sampling(), Some(Sampling::Grid { n: 3 }));
        let again: Config = serde_json::from_value(cfg.echo()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn unknown_keys_rejected() {
        for text in [
            r#"{"immersion": {"gallery": "plane"}, "colour": 1}"#,
            r#"{"immersion": {"gallery": "plane", "bogus": 1}}"#,
            r#"{"immersion": {"gallery": "plane"}, "fd": {"step": 0.01, "order": 2}}"#,
        ] {
            assert!(serde_json::from_str::<Config>(text).is_err(), "{text}");
        }
    }

    #[test]
    fn dsl_config_builds() {
        let cfg: Config = serde_json::from_str(
            r#"{"immersion": {"chart_dim": 2, "ambient": {"kind": "euclidean", "dim": 3},
                "components": ["u1", "u2", "u1^2 - u2^2"]},
               "region": {"lower": [-1, -1], "upper": [1, 1]}}"#,
        )
        .unwrap();
        cfg.validate().unwrap();
        let f = cfg.build_immersion().unwrap();
        assert_eq!(f.position(&[0.5, 0.25]).unwrap(), vec![0.5, 0.25, 0.1875]);
    }

    #[test]
    fn mixed_immersion_rejected() {
        let cfg: Config = serde_json::from_str(
            r#"{"immersion": {"gallery": "plane", "components": ["u1"]}}"#,
        )
        .unwrap();
        assert!(cfg.validate().is_err());
    }
}
