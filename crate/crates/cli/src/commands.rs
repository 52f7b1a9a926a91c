//! Subcommand implementations. Each produces a report, a short human
//! summary, and optionally a failure status that is raised after the report
//! has been written.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use mwl_core::ddvv::{ddvv_report, wintgen_certificate, WintgenCertificate};
use mwl_core::geometry::{fundamental_forms, shape_operators};
use mwl_core::immersions::{clifford, clifford_conditions, gallery_names, random_moebius, CliffordParams, Immersion};
use mwl_core::moebius::{moebius_b, moebius_invariants, MoebiusInvariants};
use mwl_core::probe::{
    euclidean_representative, grid_scan, invariance_check, probe_records, sample_points, InvarianceDepth,
    ProbeError, ProbeSummary, Sampling, ScanOptions, ScanSummary, Stats,
};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{Config, FdConfig, ImmersionConfig, OutputConfig, Tolerances};
use crate::report::{to_value, Report};
use crate::{CliError, Depth, Task};

pub struct Outcome {
    pub report: Report,
    pub human: String,
    pub status: Option<CliError>,
}

impl Outcome {
    fn new(report: Report, human: String) -> Self {
        Self {
            report,
            human,
            status: None,
        }
    }

    fn fail_if(&mut self, cond: bool, err: impl FnOnce() -> CliError) {
        if cond && self.status.is_none() {
            self.status = Some(err());
        }
    }
}

pub fn list() -> String {
    let mut out = String::new();
    for e in gallery_names() {
        let _ = writeln!(out, "{:<14} {:<60} {}", e.name, e.signature, e.summary);
    }
    out
}

/// Config for a gallery family given as `K=V` strings.
pub fn config_for(example: &str, params: &[String]) -> Result<Config, CliError> {
    let mut map = BTreeMap::new();
    for p in params {
        let (k, v) = p
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--param expects K=V, got '{p}'")))?;
        map.insert(k.trim().to_string(), Value::String(v.trim().to_string()));
    }
    Ok(Config {
        immersion: ImmersionConfig {
            gallery: Some(example.to_string()),
            params: map,
            ..Default::default()
        },
        region: None,
        sampling: None,
        point: None,
        fd: FdConfig::default(),
        tolerances: Tolerances::default(),
        output: OutputConfig::default(),
    })
}

fn probe_error(e: ProbeError) -> CliError {
    match e {
        ProbeError::Exhausted { .. } => CliError::Geometric(e.to_string()),
        other => CliError::Usage(other.to_string()),
    }
}

fn rows(m: &DMatrix<f64>) -> Value {
    Value::Array(
        m.row_iter()
            .map(|r| Value::Array(r.iter().map(|x| json!(x)).collect()))
            .collect(),
    )
}

fn certificate_value(c: &WintgenCertificate<f64>) -> Value {
    json!({
        "lambda": c.lambda.iter().copied().collect::<Vec<_>>(),
        "mu0": c.mu0,
        "r": rows(&c.r),
        "residual": c.residual,
        "s": rows(&c.s),
    })
}

/// `μ0` of the Moebius second fundamental form of a Wintgen ideal submanifold.
fn expected_moebius_mu0(m: usize) -> f64 {
    let m = m as f64;
    ((m - 1.0) / (4.0 * m)).sqrt()
}

pub fn run_task(task: Task, cfg: &Config, assert: bool) -> Result<Outcome, CliError> {
    let imm = cfg.build_immersion()?;
    match task {
        Task::Gap => gap(cfg, &imm, assert),
        Task::Certify => certify(cfg, &imm, assert),
        Task::Invariants => invariants(cfg, &imm, assert),
        Task::Probe => probe(cfg, &imm, assert),
    }
}

fn sampling_of(cfg: &Config, what: &str) -> Result<Sampling, CliError> {
    cfg.sampling()
        .ok_or_else(|| CliError::Usage(format!("{what} needs a sampling (grid or random)")))
}

fn gap(cfg: &Config, imm: &Immersion<f64>, assert: bool) -> Result<Outcome, CliError> {
    let sampling = sampling_of(cfg, "gap")?;
    let tol = cfg.tolerances.jet_exact;
    let opts = ScanOptions {
        tol,
        moebius_form: None,
    };
    let records = grid_scan(imm, &cfg.region_for(imm), sampling, &opts).map_err(probe_error)?;
    let seed = match sampling {
        Sampling::Random { seed, .. } => Some(seed),
        Sampling::Grid { .. } => None,
    };
    let summary = ScanSummary::of(&records, seed);

    let mut report = Report::new("gap", cfg.echo());
    report.summary = to_value(&summary);
    report.records = records.iter().map(to_value).collect();
    let human = format!(
        "{}: {} points, max gap {}, certified {}/{}, errors {}\n",
        imm.name(),
        summary.samples,
        summary.max_gap.map_or("n/a".into(), |g| format!("{g:.3e}")),
        summary.certified,
        summary.samples,
        summary.errors,
    );
    let mut out = Outcome::new(report, human);
    if summary.all_failed() {
        let first = records.iter().find_map(|r| r.error.clone()).unwrap_or_default();
        out.fail_if(true, || CliError::Geometric(format!("every sample point failed; first error: {first}")));
    }
    if assert {
        let missing = records.iter().filter(|r| r.gap.is_none()).count();
        let max = summary.max_gap.unwrap_or(f64::INFINITY);
        out.fail_if(missing > 0 || max >= tol, || {
            CliError::Tolerance(format!("max gap {max:.3e} (tolerance {tol:e}), {missing} points without a gap"))
        });
    }
    Ok(out)
}

fn certify(cfg: &Config, imm: &Immersion<f64>, assert: bool) -> Result<Outcome, CliError> {
    let point = cfg
        .point
        .clone()
        .ok_or_else(|| CliError::Usage("certify needs a point".into()))?;
    if point.len() != imm.chart_dim() {
        return Err(CliError::Usage(format!(
            "point has {} coordinates, chart dimension is {}",
            point.len(),
            imm.chart_dim()
        )));
    }
    let tol = cfg.tolerances.jet_exact;
    let mut report = Report::new("certify", cfg.echo());
    let ff = match fundamental_forms(imm, &point) {
        Ok(ff) => ff,
        Err(e) => {
            report.summary = json!({ "error": e.to_string(), "point": point });
            let mut out = Outcome::new(report, format!("{}: {e}\n", imm.name()));
            out.status = Some(CliError::Geometric(e.to_string()));
            return Ok(out);
        }
    };
    let m = imm.chart_dim();
    let ops = shape_operators(&ff);
    let ddvv = ddvv_report(&ops, ff.curvature).map_err(|e| CliError::Geometric(e.to_string()))?;
    let cert = wintgen_certificate(&ops, tol).map_err(|e| CliError::Geometric(e.to_string()))?;

    let moebius = match moebius_b(imm, &point) {
        Ok(b) => {
            let b_norm2: f64 = b.iter().map(|x| x.norm_squared()).sum();
            let bc = wintgen_certificate(&b, tol).ok().flatten();
            json!({
                "b_norm2": b_norm2,
                "certificate": bc.as_ref().map(certificate_value),
                "expected_mu0": expected_moebius_mu0(m),
                "gap": ddvv_report(&b, 0.0).map(|r| r.gap).ok(),
            })
        }
        Err(e) => json!({ "error": e.to_string() }),
    };
    report.summary = json!({
        "certificate": cert.as_ref().map(certificate_value),
        "ddvv": to_value(&ddvv),
        "moebius": moebius,
        "point": point,
    });
    let human = match &cert {
        Some(c) => format!(
            "{}: gap {:.3e}, certified with mu0 = {:.12} (residual {:.1e})\n",
            imm.name(),
            ddvv.gap,
            c.mu0,
            c.residual
        ),
        None => format!("{}: gap {:.3e}, no certificate at tolerance {tol:e}\n", imm.name(), ddvv.gap),
    };
    let mut out = Outcome::new(report, human);
    if assert {
        out.fail_if(cert.is_none(), || {
            CliError::Tolerance(format!("no Wintgen certificate at tolerance {tol:e} (gap {:.3e})", ddvv.gap))
        });
    }
    Ok(out)
}

struct InvariantChecks {
    b_trace: f64,
    b_norm_defect: f64,
    trace_identity: f64,
    mu0_defect: Option<f64>,
}

fn invariant_record(point: Vec<f64>, m: usize, tol: f64, res: Result<MoebiusInvariants<f64>, String>) -> (Value, Option<InvariantChecks>) {
    let inv = match res {
        Ok(inv) => inv,
        Err(e) => return (json!({ "error": e, "point": point }), None),
    };
    let mf = m as f64;
    let s = &inv.scalars;
    let checks = InvariantChecks {
        b_trace: inv.b.iter().map(|b| b.trace().abs()).fold(0.0, f64::max),
        b_norm_defect: (s.b_norm2 - (mf - 1.0) / mf).abs(),
        trace_identity: (s.tr_a - (1.0 + mf * mf * s.kappa) / (2.0 * mf)).abs(),
        mu0_defect: wintgen_certificate(&inv.b, tol)
            .ok()
            .flatten()
            .map(|c| (c.mu0 - expected_moebius_mu0(m)).abs()),
    };
    let cert = wintgen_certificate(&inv.b, tol).ok().flatten();
    let value = json!({
        "a_eigenvalues": s.a_eigenvalues,
        "b_norm2": s.b_norm2,
        "b_trace_max": checks.b_trace,
        "certificate": cert.as_ref().map(certificate_value),
        "error": null,
        "gap": s.gap,
        "gauss_residual": inv.gauss_residual,
        "kappa": s.kappa,
        "metric": rows(&inv.metric),
        "phi_norm2": s.phi_norm2,
        "point": point,
        "rho": inv.rho,
        "tr_a": s.tr_a,
        "trace_identity_residual": checks.trace_identity,
        "y_n": inv.y.inner(&inv.n),
        "y_norm2": inv.y.norm2(),
        "n_norm2": inv.n.norm2(),
    });
    (value, Some(checks))
}

fn invariants(cfg: &Config, imm: &Immersion<f64>, assert: bool) -> Result<Outcome, CliError> {
    let points = match (&cfg.point, cfg.sampling()) {
        (Some(p), _) => {
            if p.len() != imm.chart_dim() {
                return Err(CliError::Usage(format!(
                    "point has {} coordinates, chart dimension is {}",
                    p.len(),
                    imm.chart_dim()
                )));
            }
            vec![p.clone()]
        }
        (None, Some(s)) => {
            let region = cfg.region_for(imm);
            if region.dim() != imm.chart_dim() {
                return Err(CliError::Usage(format!(
                    "region has {} axes, chart dimension is {}",
                    region.dim(),
                    imm.chart_dim()
                )));
            }
            sample_points(&region, s)
        }
        (None, None) => return Err(CliError::Usage("invariants needs a point or a sampling".into())),
    };
    let spec = cfg.fd_spec();
    let m = imm.chart_dim();
    let tol = cfg.tolerances.jet_exact;
    let results: Vec<(Value, Option<InvariantChecks>)> = points
        .into_par_iter()
        .map(|p| {
            let res = moebius_invariants(imm, &p, &spec).map_err(|e| e.to_string());
            invariant_record(p, m, tol, res)
        })
        .collect();

    let col = |key: &str| -> Value {
        let v: Vec<f64> = results.iter().filter_map(|(r, _)| r[key].as_f64()).collect();
        to_value(&Stats::of(&v))
    };
    let ok: Vec<&InvariantChecks> = results.iter().filter_map(|(_, c)| c.as_ref()).collect();
    let worst = |f: fn(&InvariantChecks) -> f64| ok.iter().map(|c| f(c)).fold(0.0, f64::max);
    let b_trace = worst(|c| c.b_trace);
    let b_norm = worst(|c| c.b_norm_defect);
    let trace_id = worst(|c| c.trace_identity);
    let mu0 = ok.iter().filter_map(|c| c.mu0_defect).fold(0.0, f64::max);
    let certified = ok.iter().filter(|c| c.mu0_defect.is_some()).count();
    let errors = results.len() - ok.len();

    let mut report = Report::new("invariants", cfg.echo());
    report.summary = json!({
        "b_norm2": col("b_norm2"),
        "certified": certified,
        "errors": errors,
        "gap": col("gap"),
        "gauss_residual": col("gauss_residual"),
        "kappa": col("kappa"),
        "max_b_norm2_defect": b_norm,
        "max_b_trace": b_trace,
        "max_mu0_defect": mu0,
        "max_trace_identity_residual": trace_id,
        "phi_norm2": col("phi_norm2"),
        "samples": results.len(),
        "tr_a": col("tr_a"),
    });
    report.records = results.into_iter().map(|(r, _)| r).collect();
    let samples = report.records.len();
    let human = format!(
        "{}: {samples} points ({errors} errors), max |tr B| {b_trace:.1e}, max ||B|^2-(m-1)/m| {b_norm:.1e}, \
         max trace-identity residual {trace_id:.1e}, certified {certified}\n",
        imm.name()
    );
    let mut out = Outcome::new(report, human);
    if errors == samples {
        let first = out.report.records[0]["error"].as_str().unwrap_or_default().to_string();
        out.fail_if(true, || CliError::Geometric(format!("every point failed; first error: {first}")));
    }
    if assert {
        let fd = 10.0 * cfg.tolerances.fd_class;
        let failed = errors > 0 || b_trace >= 1e-8 || b_norm >= tol || trace_id >= fd || mu0 >= tol;
        out.fail_if(failed, || {
            CliError::Tolerance(format!(
                "errors {errors}, |tr B| {b_trace:.1e}, |B|^2 defect {b_norm:.1e}, trace identity {trace_id:.1e}, mu0 {mu0:.1e}"
            ))
        });
    }
    Ok(out)
}

fn probe(cfg: &Config, imm: &Immersion<f64>, assert: bool) -> Result<Outcome, CliError> {
    let Some(Sampling::Random { count, seed }) = cfg.sampling() else {
        return Err(CliError::Usage("probe needs random sampling with a seed".into()));
    };
    let records =
        probe_records(imm, &cfg.region_for(imm), count, seed, &cfg.fd_spec()).map_err(probe_error)?;
    let summary = ProbeSummary::of(&records, seed);
    let mut report = Report::new("probe", cfg.echo());
    report.summary = to_value(&summary);
    report.records = records.iter().map(to_value).collect();
    let spread = |s: &Option<Stats>| s.map_or("n/a".to_string(), |s| format!("{:.1e}", s.spread));
    let human = format!(
        "{}: {} points ({} errors), spreads |B|^2 {}, gap {}, Phi {}, kappa {}, tr A {}; {}\n",
        imm.name(),
        summary.samples,
        summary.errors,
        spread(&summary.b_norm2),
        spread(&summary.gap),
        spread(&summary.phi_norm2),
        spread(&summary.kappa),
        spread(&summary.tr_a),
        if summary.consistent_with_homogeneity {
            "consistent with homogeneity"
        } else {
            "not consistent with homogeneity"
        }
    );
    let mut out = Outcome::new(report, human);
    out.fail_if(summary.errors == summary.samples, || {
        CliError::Geometric("every probe point failed".into())
    });
    if assert {
        out.fail_if(!summary.consistent_with_homogeneity, || {
            CliError::Tolerance("invariants are not constant over the sample".into())
        });
    }
    Ok(out)
}

pub const WINTGEN_IDEAL: &str = "minimal, Wintgen ideal";
pub const MINIMAL_ONLY: &str = "minimal, not Wintgen ideal";
pub const NOT_MINIMAL: &str = "not minimal";

pub fn clifford_check(
    radii: &[f64],
    angles: &[f64],
    tol: f64,
    samples: usize,
    seed: u64,
    assert: bool,
) -> Result<Outcome, CliError> {
    if radii.len() != angles.len() || radii.len() < 2 {
        return Err(CliError::Usage(format!(
            "need at least two radii and as many angles, got {} and {}",
            radii.len(),
            angles.len()
        )));
    }
    if radii.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
        return Err(CliError::Usage("radii must be positive".into()));
    }
    if !(tol > 0.0) {
        return Err(CliError::Usage("--tol must be positive".into()));
    }
    let raw = clifford_conditions(radii, angles);
    let norm = radii.iter().map(|r| r * r).sum::<f64>().sqrt();
    let unit: Vec<f64> = radii.iter().map(|r| r / norm).collect();
    let cond = clifford_conditions(&unit, angles);
    let verdict = if cond.minimal_defect < tol {
        if cond.wintgen_defect < tol {
            WINTGEN_IDEAL
        } else {
            MINIMAL_ONLY
        }
    } else {
        NOT_MINIMAL
    };

    let (geometry, records) = match CliffordParams::new(unit.clone(), angles.to_vec()) {
        Ok(params) => {
            let imm: Immersion<f64> = clifford(&params);
            let recs = grid_scan(
                &imm,
                imm.domain(),
                Sampling::Random { count: samples, seed },
                &ScanOptions::default(),
            )
            .map_err(probe_error)?;
            let s = ScanSummary::of(&recs, Some(seed));
            (
                json!({ "certified": s.certified, "max_gap": s.max_gap, "samples": s.samples }),
                recs.iter().map(to_value).collect(),
            )
        }
        Err(e) => (json!({ "error": e.to_string() }), Vec::new()),
    };

    let conditions = |c: &mwl_core::immersions::CliffordConditions| {
        json!({
            "minimal_defect": c.minimal_defect,
            "unit_sum": c.unit_sum,
            "wintgen_defect": c.wintgen_defect,
        })
    };
    let mut report = Report::new(
        "clifford-check",
        json!({ "r": radii, "samples": samples, "seed": seed, "theta": angles, "tol": tol }),
    );
    report.summary = json!({
        "geometry": geometry,
        "normalized": conditions(&cond),
        "normalized_radii": unit,
        "raw": conditions(&raw),
        "verdict": verdict,
    });
    report.records = records;
    let max_gap = report.summary["geometry"]["max_gap"]
        .as_f64()
        .map_or("n/a".to_string(), |g| format!("{g:.3e}"));
    let human = format!(
        "defects: unit_sum {:.3e}, minimal {:.3e}, wintgen {:.3e} (after normalization: {:.3e}, {:.3e})\n\
         verdict: {verdict}\nmax DDVV gap at {samples} surface points: {max_gap}\n",
        raw.unit_sum, raw.minimal_defect, raw.wintgen_defect, cond.minimal_defect, cond.wintgen_defect
    );
    let mut out = Outcome::new(report, human);
    if assert {
        out.fail_if(verdict != WINTGEN_IDEAL, || CliError::Tolerance(format!("verdict: {verdict}")));
    }
    Ok(out)
}

pub struct TransformOptions {
    pub moebius_seed: u64,
    pub check_invariance: bool,
    pub samples: usize,
    pub seed: u64,
    pub depth: Depth,
}

pub fn transform(cfg: &Config, opts: &TransformOptions, assert: bool) -> Result<Outcome, CliError> {
    let imm = cfg.build_immersion()?;
    let rep = euclidean_representative(&imm).map_err(|e| CliError::Geometric(e.to_string()))?;
    let n = rep.ambient().dim();
    let t = random_moebius::<f64>(n, opts.moebius_seed);
    let moved = rep.moebius_transform(&t).map_err(|e| CliError::Geometric(e.to_string()))?;

    let mut echo = cfg.echo();
    echo["transform"] = json!({
        "check_invariance": opts.check_invariance,
        "depth": format!("{:?}", opts.depth).to_lowercase(),
        "moebius_seed": opts.moebius_seed,
        "samples": opts.samples,
        "seed": opts.seed,
    });
    let mut report = Report::new("transform", echo);
    report.records = sample_points(imm.domain(), Sampling::Random { count: opts.samples, seed: opts.seed })
        .into_iter()
        .map(|u| match moved.position(&u) {
            Ok(x) => json!({ "error": null, "point": u, "position": x }),
            Err(e) => json!({ "error": e.to_string(), "point": u, "position": null }),
        })
        .collect();

    let mut summary = json!({
        "lorentz_defect": t.lorentz_defect(),
        "matrix": rows(t.matrix()),
        "space_dim": n,
    });
    let mut human = format!(
        "{}: Moebius transformation of R^{n} from seed {} (Lorentz defect {:.1e})\n",
        imm.name(),
        opts.moebius_seed,
        t.lorentz_defect()
    );
    let mut status = None;
    if opts.check_invariance {
        let depth = match opts.depth {
            Depth::Jet => InvarianceDepth::JetExact,
            Depth::Form => InvarianceDepth::MoebiusForm,
            Depth::Full => InvarianceDepth::Full,
        };
        match invariance_check(&imm, &t, opts.samples, opts.seed, &cfg.fd_spec(), depth) {
            Ok(inv) => {
                let jet = 10.0 * cfg.tolerances.jet_exact;
                let fd = 10.0 * cfg.tolerances.fd_class;
                let exact_ok = inv.gap < jet && inv.b_norm2 < jet && inv.metric < jet;
                let fd_ok = inv.phi_norm2 < fd && inv.kappa < fd && inv.tr_a < fd && inv.a_eigenvalues < fd;
                let _ = writeln!(
                    human,
                    "invariance at {} points: gap {:.1e}, |B|^2 {:.1e}, metric {:.1e}, Phi {:.1e}, kappa {:.1e}, tr A {:.1e}",
                    inv.points.len(),
                    inv.gap,
                    inv.b_norm2,
                    inv.metric,
                    inv.phi_norm2,
                    inv.kappa,
                    inv.tr_a
                );
                if assert && !(exact_ok && fd_ok) {
                    status = Some(CliError::Tolerance(format!(
                        "invariants changed beyond tolerance (jet {jet:e}, finite difference {fd:e})"
                    )));
                }
                summary["invariance"] = to_value(&inv);
                summary["within_tolerance"] = json!(exact_ok && fd_ok);
            }
            Err(e) => {
                summary["invariance"] = json!({ "error": e.to_string() });
                status = Some(probe_error(e));
            }
        }
    }
    report.summary = summary;
    let mut out = Outcome::new(report, human);
    out.status = status;
    Ok(out)
}
