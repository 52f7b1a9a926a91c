//! Scans over chart regions, homogeneity probes and Moebius-invariance checks.
//!
//! Sample points are generated sequentially from the region and seed, and
//! every point is processed independently, so results do not depend on the
//! thread schedule. Failures at individual points (umbilic points, pole
//! proximity) are recorded alongside the successful records.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::ddvv::{ddvv_report, wintgen_certificate, FD_CLASS_TOL, JET_EXACT_TOL};
use crate::geometry::fundamental_forms;
use crate::immersions::{stereographic, Ambient, ChartDomain, Immersion, ImmersionError, LorentzMatrix, StereoDirection};
use crate::jets::FieldDerivativeSpec;
use crate::moebius::{
    exact_scalars, moebius_b, moebius_form, moebius_invariants, moebius_metric, InvariantScalars, MoebiusError,
};

/// Number of consecutive resampling attempts before an invariance check gives up.
pub const MAX_RESAMPLES: usize = 100;
/// Tolerance for `|B|²` constancy, which holds identically.
pub const B_NORM_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProbeError {
    #[error("region has {region} axes, chart dimension is {chart}")]
    RegionShape { region: usize, chart: usize },
    #[error("region [{lower:?}, {upper:?}] is not inside the chart domain")]
    OutsideDomain { lower: Vec<f64>, upper: Vec<f64> },
    #[error("sampling needs at least one point")]
    Empty,
    #[error("gave up after {MAX_RESAMPLES} consecutive failed samples; last error: {last}")]
    Exhausted { last: String },
    #[error(transparent)]
    Immersion(#[from] ImmersionError),
}

/// How sample points are drawn from a region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sampling {
    /// `n` cell centres per axis, row-major (last axis fastest).
    Grid { n: usize },
    /// `count` uniform points from a seeded ChaCha8 stream.
    Random { count: usize, seed: u64 },
}

/// Deterministic list of chart points.
pub fn sample_points(region: &ChartDomain, sampling: Sampling) -> Vec<Vec<f64>> {
    let d = region.dim();
    match sampling {
        Sampling::Grid { n } => {
            let total = n.checked_pow(d as u32).unwrap_or(usize::MAX);
            (0..total)
                .map(|mut k| {
                    let mut unit = vec![0.0; d];
                    for axis in (0..d).rev() {
                        unit[axis] = ((k % n) as f64 + 0.5) / n as f64;
                        k /= n;
                    }
                    region.from_unit(&unit)
                })
                .collect()
        }
        Sampling::Random { count, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..count)
                .map(|_| {
                    let unit: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
                    region.from_unit(&unit)
                })
                .collect()
        }
    }
}

fn check_region(immersion: &Immersion<f64>, region: &ChartDomain) -> Result<(), ProbeError> {
    if region.dim() != immersion.chart_dim() {
        return Err(ProbeError::RegionShape {
            region: region.dim(),
            chart: immersion.chart_dim(),
        });
    }
    let dom = immersion.domain();
    if !(dom.contains(&region.lower) && dom.contains(&region.upper)) {
        return Err(ProbeError::OutsideDomain {
            lower: region.lower.clone(),
            upper: region.upper.clone(),
        });
    }
    Ok(())
}

/// Tolerance class of the values in a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ToleranceClass {
    JetExact,
    FiniteDifference,
}

/// Equality certificate found at a scan point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertificateRecord {
    /// μ0 of the shape operators.
    pub mu0: f64,
    /// μ0 of the Moebius second fundamental form, absent at umbilic points.
    pub mu0_moebius: Option<f64>,
    pub residual: f64,
}

/// Result at one scan point. Absent values were not computable there.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRecord {
    pub b_norm2: Option<f64>,
    pub certificate: Option<CertificateRecord>,
    pub error: Option<String>,
    pub gap: Option<f64>,
    pub h2: Option<f64>,
    pub phi_norm: Option<f64>,
    pub point: Vec<f64>,
    pub rho: Option<f64>,
    pub rho_perp: Option<f64>,
    pub tolerance_class: ToleranceClass,
}

impl ScanRecord {
    fn empty(point: Vec<f64>, class: ToleranceClass) -> Self {
        Self {
            b_norm2: None,
            certificate: None,
            error: None,
            gap: None,
            h2: None,
            phi_norm: None,
            point,
            rho: None,
            rho_perp: None,
            tolerance_class: class,
        }
    }
}

/// What a scan computes besides the jet-exact DDVV data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanOptions {
    /// Certificate tolerance.
    pub tol: f64,
    /// When set, the Moebius form is computed with this spec.
    pub moebius_form: Option<FieldDerivativeSpec<f64>>,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            tol: JET_EXACT_TOL,
            moebius_form: None,
        }
    }
}

fn scan_point(immersion: &Immersion<f64>, point: Vec<f64>, opts: &ScanOptions) -> ScanRecord {
    let class = if opts.moebius_form.is_some() {
        ToleranceClass::FiniteDifference
    } else {
        ToleranceClass::JetExact
    };
    let mut rec = ScanRecord::empty(point, class);
    let ff = match fundamental_forms(immersion, &rec.point) {
        Ok(ff) => ff,
        Err(e) => {
            rec.error = Some(e.to_string());
            return rec;
        }
    };
    let report = match ddvv_report(&ff.second, ff.curvature) {
        Ok(r) => r,
        Err(e) => {
            rec.error = Some(e.to_string());
            return rec;
        }
    };
    rec.gap = Some(report.gap);
    rec.rho = Some(report.rho);
    rec.rho_perp = Some(report.rho_perp);
    rec.h2 = Some(report.h2);
    let cert = wintgen_certificate(&ff.second, opts.tol).ok().flatten();

    match moebius_b(immersion, &rec.point) {
        Ok(b) => {
            rec.b_norm2 = Some(b.iter().map(|x| x.norm_squared()).sum());
            let mb = wintgen_certificate(&b, opts.tol).ok().flatten();
            rec.certificate = cert.map(|c| CertificateRecord {
                mu0: c.mu0,
                mu0_moebius: mb.map(|x| x.mu0),
                residual: c.residual,
            });
            if let Some(spec) = &opts.moebius_form {
                match moebius_form(immersion, &rec.point, spec) {
                    Ok(form) => rec.phi_norm = Some(form.phi_norm2.sqrt()),
                    Err(e) => rec.error = Some(e.to_string()),
                }
            }
        }
        Err(e) => {
            rec.certificate = cert.map(|c| CertificateRecord {
                mu0: c.mu0,
                mu0_moebius: None,
                residual: c.residual,
            });
            rec.error = Some(e.to_string());
        }
    }
    rec
}

/// Computes one record per sample point, in sample order.
pub fn grid_scan(
    immersion: &Immersion<f64>,
    region: &ChartDomain,
    sampling: Sampling,
    opts: &ScanOptions,
) -> Result<Vec<ScanRecord>, ProbeError> {
    check_region(immersion, region)?;
    let points = sample_points(region, sampling);
    if points.is_empty() {
        return Err(ProbeError::Empty);
    }
    Ok(points
        .into_par_iter()
        .map(|p| scan_point(immersion, p, opts))
        .collect())
}

/// Min, max, mean and spreads of one scalar over the successful samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stats {
    pub count: usize,
    pub max: f64,
    pub max_abs_deviation: f64,
    pub mean: f64,
    pub min: f64,
    /// `max − min`; never decreases when samples are added.
    pub spread: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = mean.clamp(min, max);
        let max_abs_deviation = values.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
        Some(Self {
            count: values.len(),
            max,
            max_abs_deviation,
            mean,
            min,
            spread: max - min,
        })
    }
}

/// Aggregate of a scan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanSummary {
    pub b_norm2: Option<Stats>,
    pub certified: usize,
    pub errors: usize,
    pub gap: Option<Stats>,
    pub h2: Option<Stats>,
    pub max_gap: Option<f64>,
    pub phi_norm: Option<Stats>,
    pub rho: Option<Stats>,
    pub rho_perp: Option<Stats>,
    pub samples: usize,
    pub seed: Option<u64>,
    pub uncertified: usize,
}

impl ScanSummary {
    pub fn of(records: &[ScanRecord], seed: Option<u64>) -> Self {
        let col = |f: fn(&ScanRecord) -> Option<f64>| -> Option<Stats> {
            Stats::of(&records.iter().filter_map(f).collect::<Vec<_>>())
        };
        let gap = col(|r| r.gap);
        let certified = records.iter().filter(|r| r.certificate.is_some()).count();
        Self {
            b_norm2: col(|r| r.b_norm2),
            certified,
            errors: records.iter().filter(|r| r.error.is_some()).count(),
            max_gap: gap.map(|g| g.max),
            gap,
            h2: col(|r| r.h2),
            phi_norm: col(|r| r.phi_norm),
            rho: col(|r| r.rho),
            rho_perp: col(|r| r.rho_perp),
            samples: records.len(),
            seed,
            uncertified: records.len() - certified,
        }
    }

    /// Every record failed the Moebius part (for instance an umbilic-only scan).
    pub fn all_failed(&self) -> bool {
        self.errors == self.samples
    }
}

/// Scalar statistics of a homogeneity probe.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeSummary {
    /// One entry per Blaschke eigenvalue, ascending order.
    pub a_eigenvalues: Vec<Stats>,
    pub b_norm2: Option<Stats>,
    pub certified: usize,
    pub consistent_with_homogeneity: bool,
    pub errors: usize,
    pub gap: Option<Stats>,
    pub kappa: Option<Stats>,
    pub phi_norm2: Option<Stats>,
    pub samples: usize,
    pub seed: u64,
    pub tr_a: Option<Stats>,
    pub uncertified: usize,
}

/// Invariants at one probe point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeRecord {
    /// Whether the Moebius second fundamental form admits the equality certificate.
    pub certified: bool,
    pub error: Option<String>,
    pub point: Vec<f64>,
    pub scalars: Option<InvariantScalars<f64>>,
}

/// Invariant scalars at `samples` seeded random points of `region`.
pub fn probe_records(
    immersion: &Immersion<f64>,
    region: &ChartDomain,
    samples: usize,
    seed: u64,
    spec: &FieldDerivativeSpec<f64>,
) -> Result<Vec<ProbeRecord>, ProbeError> {
    check_region(immersion, region)?;
    if samples == 0 {
        return Err(ProbeError::Empty);
    }
    let points = sample_points(region, Sampling::Random { count: samples, seed });
    Ok(points
        .into_par_iter()
        .map(|point| {
            let res = moebius_invariants(immersion, &point, spec).and_then(|inv| {
                let cert = wintgen_certificate(&inv.b, JET_EXACT_TOL)?;
                Ok((inv.scalars, cert.is_some()))
            });
            match res {
                Ok((scalars, certified)) => ProbeRecord {
                    certified,
                    error: None,
                    point,
                    scalars: Some(scalars),
                },
                Err(e) => ProbeRecord {
                    certified: false,
                    error: Some(e.to_string()),
                    point,
                    scalars: None,
                },
            }
        })
        .collect())
}

impl ProbeSummary {
    /// Aggregates probe records. The verdict requires the spread of `|B|²`
    /// below [`B_NORM_TOL`], of the gap below the jet-exact tolerance and of
    /// the finite-difference scalars below `10 ×` the finite-difference
    /// tolerance.
    pub fn of(records: &[ProbeRecord], seed: u64) -> Self {
        let ok: Vec<&InvariantScalars<f64>> = records.iter().filter_map(|r| r.scalars.as_ref()).collect();
        let col = |f: &dyn Fn(&InvariantScalars<f64>) -> f64| {
            Stats::of(&ok.iter().map(|s| f(s)).collect::<Vec<_>>())
        };
        let dims = ok.first().map_or(0, |s| s.a_eigenvalues.len());
        let a_eigenvalues: Vec<Stats> = (0..dims).filter_map(|k| col(&|s| s.a_eigenvalues[k])).collect();
        let b_norm2 = col(&|s| s.b_norm2);
        let gap = col(&|s| s.gap);
        let kappa = col(&|s| s.kappa);
        let phi_norm2 = col(&|s| s.phi_norm2);
        let tr_a = col(&|s| s.tr_a);
        let certified = records.iter().filter(|r| r.certified).count();

        let fd = 10.0 * FD_CLASS_TOL;
        let under = |s: &Option<Stats>, tol: f64| s.is_some_and(|s| s.spread < tol);
        let consistent = !ok.is_empty()
            && under(&b_norm2, B_NORM_TOL)
            && under(&gap, JET_EXACT_TOL)
            && under(&phi_norm2, fd)
            && under(&kappa, fd)
            && under(&tr_a, fd)
            && a_eigenvalues.iter().all(|s| s.spread < fd);
        Self {
            a_eigenvalues,
            b_norm2,
            certified,
            consistent_with_homogeneity: consistent,
            errors: records.len() - ok.len(),
            gap,
            kappa,
            phi_norm2,
            samples: records.len(),
            seed,
            tr_a,
            uncertified: ok.len() - certified,
        }
    }
}

/// Samples the scalar invariants at random points of the chart domain and
/// reports their spread.
pub fn homogeneity_probe(
    immersion: &Immersion<f64>,
    samples: usize,
    seed: u64,
    spec: &FieldDerivativeSpec<f64>,
) -> Result<ProbeSummary, ProbeError> {
    let recs = probe_records(immersion, immersion.domain(), samples, seed, spec)?;
    Ok(ProbeSummary::of(&recs, seed))
}

/// Euclidean representative used to apply Moebius transformations: the
/// immersion itself, or its stereographic projection from the antipode of
/// the image of the domain centre.
pub fn euclidean_representative(immersion: &Immersion<f64>) -> Result<Immersion<f64>, ImmersionError> {
    match immersion.ambient() {
        Ambient::Euclidean(_) => Ok(immersion.clone()),
        Ambient::UnitSphere(_) => {
            let dom = immersion.domain();
            let centre = dom.from_unit(&vec![0.5; dom.dim()]);
            let pole: Vec<f64> = immersion.position(&centre)?.iter().map(|x| -x).collect();
            stereographic(immersion, StereoDirection::SphereToEuclid, Some(&pole))
        }
    }
}

/// Largest discrepancies between the invariants of `f` and `T ∘ f`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvarianceReport {
    pub a_eigenvalues: f64,
    pub b_norm2: f64,
    pub gap: f64,
    pub kappa: f64,
    /// Relative max-norm discrepancy of the Moebius metric.
    pub metric: f64,
    pub phi_norm2: f64,
    pub points: Vec<Vec<f64>>,
    pub resamples: usize,
    pub tr_a: f64,
}

/// Which invariants an invariance check compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InvarianceDepth {
    /// Metric, `|B|²` and gap (no finite differences).
    JetExact,
    /// Adds the Moebius form.
    MoebiusForm,
    /// Adds the Blaschke tensor and curvature.
    Full,
}

/// Compares the invariants of `f` and of `T ∘ f` at the same chart points.
///
/// Sphere-valued immersions are compared against `T ∘ σ ∘ f` with the
/// projection `σ` of [`euclidean_representative`]. Points where either side
/// fails (near the projection pole, sent to infinity) are replaced by fresh
/// samples from the same stream.
pub fn invariance_check(
    immersion: &Immersion<f64>,
    t: &LorentzMatrix<f64>,
    samples: usize,
    seed: u64,
    spec: &FieldDerivativeSpec<f64>,
    depth: InvarianceDepth,
) -> Result<InvarianceReport, ProbeError> {
    let k = t.matrix().nrows();
    let transformed = if t.matrix() == &DMatrix::identity(k, k) {
        immersion.clone()
    } else {
        euclidean_representative(immersion)?.moebius_transform(t)?
    };
    let dom = immersion.domain().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = InvarianceReport {
        a_eigenvalues: 0.0,
        b_norm2: 0.0,
        gap: 0.0,
        kappa: 0.0,
        metric: 0.0,
        phi_norm2: 0.0,
        points: Vec::with_capacity(samples),
        resamples: 0,
        tr_a: 0.0,
    };
    let mut failures = 0;
    while rep.points.len() < samples {
        let unit: Vec<f64> = (0..dom.dim()).map(|_| rng.random::<f64>()).collect();
        let u = dom.from_unit(&unit);
        match compare_at(immersion, &transformed, &u, spec, depth) {
            Ok(d) => {
                failures = 0;
                rep.metric = rep.metric.max(d[0]);
                rep.b_norm2 = rep.b_norm2.max(d[1]);
                rep.gap = rep.gap.max(d[2]);
                rep.phi_norm2 = rep.phi_norm2.max(d[3]);
                rep.kappa = rep.kappa.max(d[4]);
                rep.tr_a = rep.tr_a.max(d[5]);
                rep.a_eigenvalues = rep.a_eigenvalues.max(d[6]);
                rep.points.push(u);
            }
            Err(e) => {
                rep.resamples += 1;
                failures += 1;
                if failures >= MAX_RESAMPLES {
                    return Err(ProbeError::Exhausted { last: e.to_string() });
                }
            }
        }
    }
    Ok(rep)
}

fn compare_at(
    f: &Immersion<f64>,
    g: &Immersion<f64>,
    u: &[f64],
    spec: &FieldDerivativeSpec<f64>,
    depth: InvarianceDepth,
) -> Result<[f64; 7], MoebiusError> {
    let mut d = [0.0; 7];
    let (gf, gg) = (moebius_metric(f, u)?, moebius_metric(g, u)?);
    d[0] = (&gf - &gg).amax() / gf.amax();
    let (bf, gapf) = exact_scalars(f, u)?;
    let (bg, gapg) = exact_scalars(g, u)?;
    d[1] = (bf - bg).abs();
    d[2] = (gapf - gapg).abs();
    match depth {
        InvarianceDepth::JetExact => {}
        InvarianceDepth::MoebiusForm => {
            d[3] = (moebius_form(f, u, spec)?.phi_norm2 - moebius_form(g, u, spec)?.phi_norm2).abs();
        }
        InvarianceDepth::Full => {
            let a = moebius_invariants(f, u, spec)?.scalars;
            let b = moebius_invariants(g, u, spec)?.scalars;
            d[3] = (a.phi_norm2 - b.phi_norm2).abs();
            d[4] = (a.kappa - b.kappa).abs();
            d[5] = (a.tr_a - b.tr_a).abs();
            d[6] = a
                .a_eigenvalues
                .iter()
                .zip(&b.a_eigenvalues)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
        }
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::immersions::{gallery_get, random_moebius, Params};

    fn get(name: &str) -> Immersion<f64> {
        gallery_get(name, &Params::new()).unwrap()
    }

    #[test]
    fn grid_is_row_major_cell_centres() {
        let region = ChartDomain::new(vec![0.0, 0.0], vec![1.0, 2.0]);
        let pts = sample_points(&region, Sampling::Grid { n: 2 });
        assert_eq!(pts, vec![vec![0.25, 0.5], vec![0.25, 1.5], vec![0.75, 0.5], vec![0.75, 1.5]]);
    }

    #[test]
    fn random_points_are_prefix_stable() {
        let region = ChartDomain::new(vec![0.0; 3], vec![1.0; 3]);
        let a = sample_points(&region, Sampling::Random { count: 5, seed: 3 });
        let b = sample_points(&region, Sampling::Random { count: 9, seed: 3 });
        assert_eq!(a[..], b[..5]);
    }

    #[test]
    fn plane_scan_is_all_umbilic_errors() {
        let f = get("plane");
        let recs = grid_scan(&f, f.domain(), Sampling::Grid { n: 2 }, &ScanOptions::default()).unwrap();
        assert_eq!(recs.len(), 8);
        assert!(recs.iter().all(|r| r.error.as_deref().is_some_and(|e| e.contains("umbilic"))));
        assert!(ScanSummary::of(&recs, None).all_failed());
    }

    #[test]
    fn veronese_grid_has_zero_gap() {
        let f = get("veronese_s4");
        let recs = grid_scan(&f, f.domain(), Sampling::Grid { n: 10 }, &ScanOptions::default()).unwrap();
        assert_eq!(recs.len(), 100);
        let s = ScanSummary::of(&recs, None);
        assert!(s.max_gap.unwrap() < 1e-7);
        assert_eq!(s.certified, 100);
    }

    #[test]
    fn region_outside_domain_rejected() {
        let f = get("veronese_s4");
        let region = ChartDomain::new(vec![0.0, 0.0], vec![1.0, 1.0]);
        assert!(matches!(
            grid_scan(&f, &region, Sampling::Grid { n: 2 }, &ScanOptions::default()),
            Err(ProbeError::OutsideDomain { .. })
        ));
    }

    #[test]
    fn stats_spread_is_monotone() {
        let vals = [0.0, 1.0, 1.0, 1.0, 0.0, 0.3];
        let mut last = 0.0;
        for k in 1..=vals.len() {
            let s = Stats::of(&vals[..k]).unwrap();
            assert!(s.max >= s.mean && s.mean >= s.min && s.max_abs_deviation >= 0.0);
            assert!(s.spread >= last);
            last = s.spread;
        }
    }

    #[test]
    fn identity_has_zero_discrepancy() {
        let f = get("veronese_s4");
        let t = LorentzMatrix::identity(5);
        let r = invariance_check(&f, &t, 5, 1, &FieldDerivativeSpec::default(), InvarianceDepth::MoebiusForm).unwrap();
        assert_eq!((r.metric, r.b_norm2, r.gap, r.phi_norm2), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn dilation_preserves_gap() {
        let f = get("veronese_s4");
        let t = LorentzMatrix::dilation(4, 2.5);
        let r = invariance_check(&f, &t, 10, 2, &FieldDerivativeSpec::default(), InvarianceDepth::JetExact).unwrap();
        assert!(r.gap < 1e-8 && r.b_norm2 < 1e-10 && r.metric < 1e-8, "{r:?}");
    }

    #[test]
    fn random_transformation_on_cone() {
        let f = get("cone_of");
        let t = random_moebius(5, 7);
        let r = invariance_check(&f, &t, 3, 7, &FieldDerivativeSpec::default(), InvarianceDepth::Full).unwrap();
        assert!(r.gap < 1e-6 && r.b_norm2 < 1e-6 && r.metric < 1e-6, "{r:?}");
        assert!(r.phi_norm2 < 1e-3 && r.tr_a < 1e-3 && r.a_eigenvalues < 1e-3, "{r:?}");
    }
}
