//! Moebius invariants of umbilic-free immersions.
//!
//! Everything is computed for a Euclidean immersion `f: U → R^{m+p}`.
//! Sphere-valued inputs are first projected stereographically from the
//! antipode of the sampled point, which keeps the point at the origin of the
//! Euclidean model.
//!
//! With `h̊ = II − H I` the trace-free second fundamental form,
//!
//! ```text
//! ρ² = m/(m−1) |h̊|²
//! Y  = ρ ((1+|f|²)/2, (1−|f|²)/2, f)         light-cone lift in R^{m+p+2}_1
//! g  = ⟨dY, dY⟩ = ρ² df·df                     Moebius metric
//! B^α_ij = ρ^{-1} h̊^α_ij                       Moebius second fundamental form
//! C^α_i  = −ρ^{-2} [H^α_{,i} + Σ_j h̊^α_ij e_j(ln ρ)]   Moebius form
//! N  = −(1/m) ΔY − 1/(2m²) ⟨ΔY, ΔY⟩ Y
//! A_ij = −⟨E_j E_i Y, N⟩                        Blaschke tensor
//! ```
//!
//! Tensor components refer to the g-orthonormal frame `E_i = ρ^{-1} e_i`
//! built from the Cholesky tangent frame `e_i` and to the normal frame `n_α`
//! of [`crate::geometry`]. Quantities that need derivatives of ρ or of the
//! mean curvature field use [`crate::jets::field_derivative_vec`]; the
//! parts that only involve derivatives of `f` come from the jets.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::ddvv::{ddvv_report, DdvvError};
use crate::geometry::{forms_from_jets, frames_from_jets, FundamentalForms, GeometryError};
use crate::immersions::{stereographic, Ambient, Immersion, ImmersionError, StereoDirection};
use crate::jets::{field_derivative_vec, norm_squared, FdError, FieldDerivativeSpec, Jet, Partial};
use crate::linalg::{max_abs, sym_eigen_desc};
use crate::scalar::Real;

/// `|h̊|²` at or below this value counts as an umbilic point.
pub const UMBILIC_TOL: f64 = 1e-12;
/// Largest accepted Procrustes misfit between neighbouring normal frames.
pub const ALIGNMENT_TOL: f64 = 0.1;
/// Largest accepted asymmetry of the Blaschke tensor before symmetrizing.
pub const BLASCHKE_ASYMMETRY_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MoebiusError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("Moebius invariants undefined here: umbilic point (|II - H I|^2 = {traceless_norm2:e})")]
    Umbilic { traceless_norm2: f64 },
    #[error(transparent)]
    FiniteDifference(#[from] FdError),
    #[error("normal frames on the stencil could not be aligned (Procrustes residual {residual:.3}); try a smaller step")]
    Alignment { residual: f64 },
    #[error("Blaschke tensor asymmetry {asymmetry:e} exceeds {BLASCHKE_ASYMMETRY_TOL:e}")]
    Asymmetric { asymmetry: f64 },
    #[error(transparent)]
    Ddvv(#[from] DdvvError),
}

impl From<ImmersionError> for MoebiusError {
    fn from(e: ImmersionError) -> Self {
        MoebiusError::Geometry(GeometryError::Immersion(e))
    }
}

/// Vector in `R^{n+2}_1` with `⟨Y, Z⟩ = −Y₀Z₀ + Σ Y_i Z_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct LorentzVector<T: Real>(pub DVector<T>);

impl<T: Real> LorentzVector<T> {
    pub fn inner(&self, other: &Self) -> T {
        assert_eq!(self.0.len(), other.0.len());
        self.0.dot(&other.0) - self.0[0] * other.0[0] - self.0[0] * other.0[0]
    }

    pub fn norm2(&self) -> T {
        self.inner(self)
    }

    pub fn as_slice(&self) -> &[T] {
        self.0.as_slice()
    }
}

/// The Euclidean model used for Moebius computations around `point`.
///
/// Euclidean immersions are returned unchanged. Sphere-valued ones are
/// projected stereographically from `−f(point)`.
pub fn euclidean_model<T: Real>(immersion: &Immersion<T>, point: &[T]) -> Result<Immersion<T>, MoebiusError> {
    match immersion.ambient() {
        Ambient::Euclidean(_) => Ok(immersion.clone()),
        Ambient::UnitSphere(_) => {
            let pole: Vec<T> = immersion.position(point)?.into_iter().map(|x| -x).collect();
            Ok(stereographic(immersion, StereoDirection::SphereToEuclid, Some(&pole))?)
        }
    }
}

/// Pointwise data of the Euclidean model at one chart point.
struct Local<T: Real> {
    jets: Vec<Jet<T>>,
    forms: FundamentalForms<T>,
    traceless: Vec<DMatrix<T>>,
    rho: T,
}

impl<T: Real> Local<T> {
    fn m(&self) -> usize {
        self.forms.frame.chart_dim()
    }

    fn p(&self) -> usize {
        self.forms.frame.codim()
    }
}

fn local<T: Real>(model: &Immersion<T>, point: &[T]) -> Result<Local<T>, MoebiusError> {
    let jets = model.evaluate(point)?;
    let m = model.chart_dim();
    let frame = frames_from_jets(&jets, m, false, model.ambient().dim())?;
    let forms = forms_from_jets(&jets, frame, T::zero());
    let traceless = forms.traceless();
    let t2 = traceless.iter().fold(T::zero(), |acc, a| acc + a.norm_squared());
    if !(t2 > T::lit(UMBILIC_TOL)) {
        return Err(MoebiusError::Umbilic {
            traceless_norm2: t2.as_f64(),
        });
    }
    let mm = T::from_usize_lossy(m);
    let rho = (mm / (mm - T::one()) * t2).sqrt();
    Ok(Local {
        jets,
        forms,
        traceless,
        rho,
    })
}

/// Conformal factor `ρ = sqrt(m/(m−1) |II − (1/m) tr(II) I|²)`.
pub fn conformal_factor<T: Real>(immersion: &Immersion<T>, point: &[T]) -> Result<T, MoebiusError> {
    Ok(local(&euclidean_model(immersion, point)?, point)?.rho)
}

fn lift_value<T: Real>(rho: T, f: &[T]) -> LorentzVector<T> {
    let r2 = f.iter().fold(T::zero(), |acc, &x| acc + x * x);
    let half = T::lit(0.5);
    let mut v = Vec::with_capacity(f.len() + 2);
    v.push(rho * (T::one() + r2) * half);
    v.push(rho * (T::one() - r2) * half);
    v.extend(f.iter().map(|&x| rho * x));
    LorentzVector(DVector::from_vec(v))
}

/// Light-cone lift `Y = ρ((1+|f|²)/2, (1−|f|²)/2, f)` of the Euclidean model.
pub fn moebius_position<T: Real>(immersion: &Immersion<T>, point: &[T]) -> Result<LorentzVector<T>, MoebiusError> {
    let loc = local(&euclidean_model(immersion, point)?, point)?;
    let f: Vec<T> = loc.jets.iter().map(|j| j.value()).collect();
    Ok(lift_value(loc.rho, &f))
}

/// Moebius metric `g = ρ² I` in the chart basis.
pub fn moebius_metric<T: Real>(immersion: &Immersion<T>, point: &[T]) -> Result<DMatrix<T>, MoebiusError> {
    let loc = local(&euclidean_model(immersion, point)?, point)?;
    Ok(loc.forms.frame.metric.clone() * (loc.rho * loc.rho))
}

fn b_of<T: Real>(loc: &Local<T>) -> Vec<DMatrix<T>> {
    loc.traceless.iter().map(|a| a / loc.rho).collect()
}

/// Moebius second fundamental form `B^α_ij = ρ^{-1}(h^α_ij − H^α δ_ij)`.
pub fn moebius_b<T: Real>(immersion: &Immersion<T>, point: &[T]) -> Result<Vec<DMatrix<T>>, MoebiusError> {
    Ok(b_of(&local(&euclidean_model(immersion, point)?, point)?))
}

/// Mean curvature spheres `ξ_α = (⟨f,n_α⟩, −⟨f,n_α⟩, n_α) + H^α X(f)` with
/// `X(f) = ((1+|f|²)/2, (1−|f|²)/2, f)`.
pub fn mean_curvature_spheres<T: Real>(
    immersion: &Immersion<T>,
    point: &[T],
) -> Result<Vec<LorentzVector<T>>, MoebiusError> {
    let loc = local(&euclidean_model(immersion, point)?, point)?;
    let frame = &loc.forms.frame;
    let f = frame.position.as_slice();
    let x = lift_value(T::one(), f);
    Ok((0..loc.p())
        .map(|a| {
            let n = frame.normals.column(a);
            let fn_ = n.dot(&frame.position);
            let mut v = x.0.clone() * loc.forms.mean[a];
            v[0] += fn_;
            v[1] -= fn_;
            for (k, &c) in n.iter().enumerate() {
                v[2 + k] += c;
            }
            LorentzVector(v)
        })
        .collect())
}

/// Coefficients `C^α_i` of the Moebius form (rows α, columns i) and `|Φ|²`.
#[derive(Debug, Clone, PartialEq)]
pub struct MoebiusForm<T: Real> {
    pub c: DMatrix<T>,
    pub phi_norm2: T,
}

/// `Q` minimizing `|n1 Q − n0|` over orthogonal matrices, and the misfit.
fn procrustes<T: Real>(n1: &DMatrix<T>, n0: &DMatrix<T>) -> (DMatrix<T>, T) {
    let svd = (n1.transpose() * n0).svd(true, true);
    let q = svd.u.expect("requested U") * svd.v_t.expect("requested V");
    let residual = max_abs(&(n1 * &q - n0));
    (q, residual)
}

/// Samples `[ρ, H̃^1 … H̃^p]` where `H̃` is the mean curvature expressed in
/// the normal frame aligned to `n0`.
fn aligned_sampler<'a, T: Real>(
    model: &'a Immersion<T>,
    n0: &'a DMatrix<T>,
) -> impl Fn(&[T]) -> Result<Vec<T>, MoebiusError> + 'a {
    move |q: &[T]| {
        let loc = local(model, q)?;
        let (rot, residual) = procrustes(&loc.forms.frame.normals, n0);
        if residual > T::lit(ALIGNMENT_TOL) {
            return Err(MoebiusError::Alignment {
                residual: residual.as_f64(),
            });
        }
        let h = rot.transpose() * &loc.forms.mean;
        let mut out = vec![loc.rho];
        out.extend(h.iter().copied());
        Ok(out)
    }
}

/// Chart gradients of ρ and of the aligned mean curvature components.
fn first_derivatives<T: Real>(
    model: &Immersion<T>,
    loc: &Local<T>,
    point: &[T],
    spec: &FieldDerivativeSpec<T>,
) -> Result<(DVector<T>, DMatrix<T>), MoebiusError> {
    let m = loc.m();
    let p = loc.p();
    let n0 = loc.forms.frame.normals.clone();
    let sampler = aligned_sampler(model, &n0);
    let mut grad_rho = DVector::zeros(m);
    let mut grad_h = DMatrix::zeros(p, m);
    for a in 0..m {
        let d = field_derivative_vec(&sampler, point, Partial::First(a), spec)?;
        grad_rho[a] = d[0];
        for al in 0..p {
            grad_h[(al, a)] = d[1 + al];
        }
    }
    Ok((grad_rho, grad_h))
}

fn form_from<T: Real>(loc: &Local<T>, grad_rho: &DVector<T>, grad_h: &DMatrix<T>) -> MoebiusForm<T> {
    let t = &loc.forms.frame.chart_to_frame;
    let e_ln_rho = t * grad_rho / loc.rho;
    let e_h = grad_h * t.transpose();
    let r2 = loc.rho * loc.rho;
    let c = DMatrix::from_fn(loc.p(), loc.m(), |al, i| {
        let s = (0..loc.m()).fold(e_h[(al, i)], |acc, j| acc + loc.traceless[al][(i, j)] * e_ln_rho[j]);
        -s / r2
    });
    let phi_norm2 = c.norm_squared();
    MoebiusForm { c, phi_norm2 }
}

/// Moebius form, with `H^α_{,i}` obtained by differencing the mean curvature
/// in Procrustes-aligned normal frames.
pub fn moebius_form<T: Real>(
    immersion: &Immersion<T>,
    point: &[T],
    spec: &FieldDerivativeSpec<T>,
) -> Result<MoebiusForm<T>, MoebiusError> {
    let model = euclidean_model(immersion, point)?;
    let loc = local(&model, point)?;
    let (gr, gh) = first_derivatives(&model, &loc, point, spec)?;
    Ok(form_from(&loc, &gr, &gh))
}

/// Blaschke tensor and the objects computed on the way.
#[derive(Debug, Clone, PartialEq)]
pub struct Blaschke<T: Real> {
    /// Symmetrized `A_ij` in the g-orthonormal frame.
    pub a: DMatrix<T>,
    /// Asymmetry before symmetrizing.
    pub asymmetry: T,
    pub y: LorentzVector<T>,
    pub n: LorentzVector<T>,
    /// Laplacian of `Y` with respect to `g`.
    pub laplacian_y: LorentzVector<T>,
    /// Normalized scalar curvature of `g`, from the conformal change of the
    /// Gauss-equation curvature of `I`.
    pub kappa: T,
    /// Curvature tensor `R_ijkl` of `g` in the g-orthonormal frame, flattened
    /// row-major over `(i, j, k, l)`.
    pub riemann: Vec<T>,
}

impl<T: Real> Blaschke<T> {
    pub fn trace(&self) -> T {
        self.a.trace()
    }

    /// `(1 + m²κ) / (2m)`.
    pub fn trace_from_kappa(&self) -> T {
        let m = T::from_usize_lossy(self.a.nrows());
        (T::one() + m * m * self.kappa) / (m + m)
    }
}

/// Second-order data of ρ at the center.
struct RhoDerivatives<T: Real> {
    grad: DVector<T>,
    hess: DMatrix<T>,
}

fn rho_derivatives<T: Real>(
    model: &Immersion<T>,
    loc: &Local<T>,
    point: &[T],
    grad: DVector<T>,
    spec: &FieldDerivativeSpec<T>,
) -> Result<RhoDerivatives<T>, MoebiusError> {
    let m = loc.m();
    let sampler = |q: &[T]| local(model, q).map(|l| vec![l.rho]);
    let mut hess = DMatrix::zeros(m, m);
    for a in 0..m {
        for b in 0..=a {
            let v = field_derivative_vec(sampler, point, Partial::Second(a, b), spec)?[0];
            hess[(a, b)] = v;
            hess[(b, a)] = v;
        }
    }
    Ok(RhoDerivatives { grad, hess })
}

/// Christoffel symbols `Γ^c_ab` of the induced metric, indexed `[c][(a, b)]`.
fn christoffel_induced<T: Real>(jets: &[Jet<T>], metric_inv: &DMatrix<T>) -> Vec<DMatrix<T>> {
    let m = metric_inv.nrows();
    // dI[c][(a, b)] = ∂_c I_ab
    let di: Vec<DMatrix<T>> = (0..m)
        .map(|c| {
            DMatrix::from_fn(m, m, |a, b| {
                jets.iter().fold(T::zero(), |acc, j| {
                    acc + j.hess(a, c) * j.grad(b) + j.grad(a) * j.hess(b, c)
                })
            })
        })
        .collect();
    let half = T::lit(0.5);
    (0..m)
        .map(|c| {
            DMatrix::from_fn(m, m, |a, b| {
                (0..m).fold(T::zero(), |acc, d| {
                    acc + metric_inv[(c, d)] * (di[a][(b, d)] + di[b][(a, d)] - di[d][(a, b)]) * half
                })
            })
        })
        .collect()
}

fn blaschke_from<T: Real>(loc: &Local<T>, rd: &RhoDerivatives<T>) -> Result<Blaschke<T>, MoebiusError> {
    let m = loc.m();
    let mm = T::from_usize_lossy(m);
    let rho = loc.rho;
    let frame = &loc.forms.frame;
    let metric_inv = frame
        .metric
        .clone()
        .try_inverse()
        .expect("metric is positive definite");
    let gamma_i = christoffel_induced(&loc.jets, &metric_inv);

    let dphi = &rd.grad / rho;
    let ddphi = DMatrix::from_fn(m, m, |a, b| rd.hess[(a, b)] / rho - dphi[a] * dphi[b]);
    let dphi_up = &metric_inv * &dphi;

    // Γ(g)^c_ab = Γ(I)^c_ab + δ^c_a φ_b + δ^c_b φ_a − I_ab φ^c
    let gamma_g: Vec<DMatrix<T>> = (0..m)
        .map(|c| {
            DMatrix::from_fn(m, m, |a, b| {
                let mut v = gamma_i[c][(a, b)] - frame.metric[(a, b)] * dphi_up[c];
                if c == a {
                    v += dphi[b];
                }
                if c == b {
                    v += dphi[a];
                }
                v
            })
        })
        .collect();

    // X(f) = ((1+|f|²)/2, (1−|f|²)/2, f) carried as jets.
    let r2 = norm_squared(&loc.jets);
    let half = T::lit(0.5);
    let one = Jet::constant(T::one());
    let mut x = vec![(one + r2) * half, (one - r2) * half];
    x.extend_from_slice(&loc.jets);
    let x: Vec<Jet<T>> = x.into_iter().map(|j| j.widen(m)).collect();
    let k = x.len();

    let y = LorentzVector(DVector::from_iterator(k, x.iter().map(|j| rho * j.value())));
    let dy: Vec<DVector<T>> = (0..m)
        .map(|a| DVector::from_iterator(k, x.iter().map(|j| rd.grad[a] * j.value() + rho * j.grad(a))))
        .collect();
    let ddy = |a: usize, b: usize| {
        DVector::from_iterator(
            k,
            x.iter().map(|j| {
                rd.hess[(a, b)] * j.value() + rd.grad[a] * j.grad(b) + rd.grad[b] * j.grad(a) + rho * j.hess(a, b)
            }),
        )
    };

    let g_inv = &metric_inv / (rho * rho);
    let mut lap = DVector::zeros(k);
    for a in 0..m {
        for b in 0..m {
            let mut v = ddy(a, b);
            for (c, dyc) in dy.iter().enumerate() {
                v -= dyc * gamma_g[c][(a, b)];
            }
            lap += v * g_inv[(a, b)];
        }
    }
    let lap = LorentzVector(lap);
    let ll = lap.norm2();
    let n = LorentzVector(-&lap.0 / mm - &y.0 * (ll / (T::lit(2.0) * mm * mm)));

    // A_ij = −Σ S_ia S_jb ⟨∂_a∂_b Y, N⟩ with S = ρ^{-1} T.
    let s = &frame.chart_to_frame / rho;
    let ny = DMatrix::from_fn(m, m, |a, b| LorentzVector(ddy(a, b)).inner(&n));
    let a_raw = -(&s * ny * s.transpose());
    let asymmetry = max_abs(&(&a_raw - a_raw.transpose()));
    if asymmetry > T::lit(BLASCHKE_ASYMMETRY_TOL) {
        return Err(MoebiusError::Asymmetric {
            asymmetry: asymmetry.as_f64(),
        });
    }
    let a = (&a_raw + a_raw.transpose()) * half;

    // Curvature of g: conformal change of the Gauss curvature of I.
    let t = &frame.chart_to_frame;
    let hess_phi = DMatrix::from_fn(m, m, |a, b| {
        (0..m).fold(ddphi[(a, b)], |acc, c| acc - gamma_i[c][(a, b)] * dphi[c])
    });
    let hess_e = t * hess_phi * t.transpose();
    let dphi_e = t * &dphi;
    let grad2 = dphi_e.norm_squared();
    let pm = DMatrix::from_fn(m, m, |i, j| {
        let mut v = hess_e[(i, j)] - dphi_e[i] * dphi_e[j];
        if i == j {
            v += grad2 * half;
        }
        v
    });
    let h = &loc.forms.second;
    let delta = |i: usize, j: usize| if i == j { T::one() } else { T::zero() };
    let mut riemann = Vec::with_capacity(m * m * m * m);
    let mut scal = T::zero();
    for i in 0..m {
        for j in 0..m {
            for kk in 0..m {
                for l in 0..m {
                    let gauss = h.iter().fold(T::zero(), |acc, hh| {
                        acc + hh[(i, kk)] * hh[(j, l)] - hh[(i, l)] * hh[(j, kk)]
                    });
                    let kn = pm[(i, kk)] * delta(j, l) + pm[(j, l)] * delta(i, kk)
                        - pm[(i, l)] * delta(j, kk)
                        - pm[(j, kk)] * delta(i, l);
                    let r = (gauss - kn) / (rho * rho);
                    if i == kk && j == l {
                        scal += r;
                    }
                    riemann.push(r);
                }
            }
        }
    }
    let kappa = scal / (mm * (mm - T::one()));
    Ok(Blaschke {
        a,
        asymmetry,
        y,
        n,
        laplacian_y: lap,
        kappa,
        riemann,
    })
}

/// Blaschke tensor `A`, the conormal `N` and the Moebius scalar curvature.
pub fn blaschke_a<T: Real>(
    immersion: &Immersion<T>,
    point: &[T],
    spec: &FieldDerivativeSpec<T>,
) -> Result<Blaschke<T>, MoebiusError> {
    let model = euclidean_model(immersion, point)?;
    let loc = local(&model, point)?;
    let (gr, _) = first_derivatives(&model, &loc, point, spec)?;
    let rd = rho_derivatives(&model, &loc, point, gr, spec)?;
    blaschke_from(&loc, &rd)
}

/// Max-norm residual of
/// `R_ijkl = Σ_α(B_ik B_jl − B_il B_jk) + δ_ik A_jl + δ_jl A_ik − δ_il A_jk − δ_jk A_il`.
pub fn gauss_residual<T: Real>(b: &[DMatrix<T>], blaschke: &Blaschke<T>) -> T {
    let m = blaschke.a.nrows();
    let a = &blaschke.a;
    let delta = |i: usize, j: usize| if i == j { T::one() } else { T::zero() };
    let mut worst = T::zero();
    let mut idx = 0;
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                for l in 0..m {
                    let bb = b.iter().fold(T::zero(), |acc, bm| {
                        acc + bm[(i, k)] * bm[(j, l)] - bm[(i, l)] * bm[(j, k)]
                    });
                    let rhs = bb + delta(i, k) * a[(j, l)] + delta(j, l) * a[(i, k)]
                        - delta(i, l) * a[(j, k)]
                        - delta(j, k) * a[(i, l)];
                    worst = worst.max((blaschke.riemann[idx] - rhs).abs());
                    idx += 1;
                }
            }
        }
    }
    worst
}

/// Scalar Moebius invariants at a point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantScalars<T: Real> {
    /// Eigenvalues of the Blaschke tensor, ascending.
    pub a_eigenvalues: Vec<T>,
    pub b_norm2: T,
    /// DDVV gap of the Moebius second fundamental form (`c = 0`), which is
    /// `ρ^{-2}` times the gap of the Euclidean model.
    pub gap: T,
    pub kappa: T,
    pub phi_norm2: T,
    pub tr_a: T,
}

/// Every Moebius invariant at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct MoebiusInvariants<T: Real> {
    pub rho: T,
    pub y: LorentzVector<T>,
    pub n: LorentzVector<T>,
    /// Moebius metric in the chart basis.
    pub metric: DMatrix<T>,
    pub b: Vec<DMatrix<T>>,
    pub c: DMatrix<T>,
    pub a: DMatrix<T>,
    pub gauss_residual: T,
    pub scalars: InvariantScalars<T>,
}

/// Computes all invariants with one pass of finite differences.
pub fn moebius_invariants<T: Real>(
    immersion: &Immersion<T>,
    point: &[T],
    spec: &FieldDerivativeSpec<T>,
) -> Result<MoebiusInvariants<T>, MoebiusError> {
    let model = euclidean_model(immersion, point)?;
    let loc = local(&model, point)?;
    let (gr, gh) = first_derivatives(&model, &loc, point, spec)?;
    let form = form_from(&loc, &gr, &gh);
    let rd = rho_derivatives(&model, &loc, point, gr, spec)?;
    let bl = blaschke_from(&loc, &rd)?;
    let b = b_of(&loc);
    let b_norm2 = b.iter().fold(T::zero(), |acc, x| acc + x.norm_squared());
    let gap = ddvv_report(&b, T::zero())?.gap;
    let (mut eig, _) = sym_eigen_desc(&bl.a);
    eig.reverse();
    let gauss_residual = gauss_residual(&b, &bl);
    Ok(MoebiusInvariants {
        rho: loc.rho,
        y: bl.y.clone(),
        n: bl.n.clone(),
        metric: loc.forms.frame.metric.clone() * (loc.rho * loc.rho),
        scalars: InvariantScalars {
            a_eigenvalues: eig,
            b_norm2,
            gap,
            kappa: bl.kappa,
            phi_norm2: form.phi_norm2,
            tr_a: bl.trace(),
        },
        b,
        c: form.c,
        a: bl.a,
        gauss_residual,
    })
}

/// The scalar bundle of [`moebius_invariants`].
pub fn invariant_scalars<T: Real>(
    immersion: &Immersion<T>,
    point: &[T],
    spec: &FieldDerivativeSpec<T>,
) -> Result<InvariantScalars<T>, MoebiusError> {
    Ok(moebius_invariants(immersion, point, spec)?.scalars)
}

/// Jet-exact part of the invariants: `|B|²` and the Moebius-level gap.
pub fn exact_scalars<T: Real>(immersion: &Immersion<T>, point: &[T]) -> Result<(T, T), MoebiusError> {
    let b = moebius_b(immersion, point)?;
    let b_norm2 = b.iter().fold(T::zero(), |acc, x| acc + x.norm_squared());
    Ok((b_norm2, ddvv_report(&b, T::zero())?.gap))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::fundamental_forms;
    use crate::immersions::{cone, gallery_get, ChartDomain, CliffordParams, Params};

    fn params(kv: &[(&str, &str)]) -> Params {
        kv.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    fn spec() -> FieldDerivativeSpec<f64> {
        FieldDerivativeSpec::default()
    }

    #[test]
    fn lorentz_signature() {
        let e = |i: usize| LorentzVector(DVector::from_fn(4, |k, _| if k == i { 1.0 } else { 0.0 }));
        assert_eq!(e(0).norm2(), -1.0);
        for i in 1..4 {
            assert_eq!(e(i).norm2(), 1.0);
            assert_eq!(e(0).inner(&e(i)), 0.0);
        }
        let v = LorentzVector(DVector::from_vec(vec![0.5, 0.5, 0.0, 0.0]));
        assert_eq!(v.norm2(), 0.0);
    }

    #[test]
    fn lift_of_origin() {
        assert_eq!(lift_value(1.0, &[0.0, 0.0]).0.as_slice(), &[0.5, 0.5, 0.0, 0.0]);
    }

    #[test]
    fn umbilic_members_rejected() {
        let plane = gallery_get::<f64>("plane", &Params::new()).unwrap();
        assert!(matches!(conformal_factor(&plane, &[0.1, 0.2, 0.3]), Err(MoebiusError::Umbilic { .. })));
        let sphere = Immersion::<f64>::new(
            "s2",
            2,
            Ambient::Euclidean(3),
            ChartDomain::new(vec![0.3, 0.0], vec![2.8, 6.2]),
            |v: &[Jet<f64>]| {
                let (t, p) = (v[0], v[1]);
                Ok(vec![t.sin() * p.cos(), t.sin() * p.sin(), t.cos()])
            },
        );
        assert!(matches!(conformal_factor(&sphere, &[1.0, 1.0]), Err(MoebiusError::Umbilic { .. })));
    }

    #[test]
    fn rho_from_traceless_norm() {
        let f = Immersion::<f64>::new(
            "graph",
            3,
            Ambient::Euclidean(4),
            ChartDomain::new(vec![-1.0; 3], vec![1.0; 3]),
            |v: &[Jet<f64>]| {
                let q = v[0] * v[0] * 0.5 - v[1] * v[1] * 0.25 + v[2] * v[0] * 0.3;
                Ok(vec![v[0], v[1], v[2], q])
            },
        );
        let u = [0.2, -0.1, 0.4];
        let s = fundamental_forms(&f, &u).unwrap().traceless_norm2();
        let rho = conformal_factor(&f, &u).unwrap();
        assert!((rho - (1.5 * s).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn lift_is_null_and_b_normalized() {
        let f = gallery_get::<f64>("veronese_s4", &Params::new()).unwrap();
        for u in [[0.7, 1.1], [1.9, 4.0], [1.2, 0.1]] {
            let y = moebius_position(&f, &u).unwrap();
            assert!(y.norm2().abs() < 1e-12);
            let b = moebius_b(&f, &u).unwrap();
            let tr: f64 = b.iter().map(|x| x.trace().abs()).fold(0.0, f64::max);
            assert!(tr < 1e-12);
            let n2: f64 = b.iter().map(|x| x.norm_squared()).sum();
            assert!((n2 - 0.5).abs() < 1e-12);
            let g = moebius_metric(&f, &u).unwrap();
            let rho = conformal_factor(&f, &u).unwrap();
            let i = fundamental_forms(&euclidean_model(&f, &u).unwrap(), &u).unwrap().frame.metric;
            assert!((g - i * rho * rho).amax() < 1e-12);
        }
    }

    #[test]
    fn mean_curvature_spheres_orthonormal_to_lift() {
        let f = gallery_get::<f64>("hopf_veronese", &Params::new()).unwrap();
        let u = [0.4, 0.3, -0.2];
        let y = moebius_position(&f, &u).unwrap();
        let xi = mean_curvature_spheres(&f, &u).unwrap();
        for (a, xa) in xi.iter().enumerate() {
            assert!(xa.inner(&y).abs() < 1e-12);
            for (b, xb) in xi.iter().enumerate() {
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((xa.inner(xb) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cone_over_clifford_rho_constant_along_base() {
        let base = crate::immersions::clifford::<f64>(&CliffordParams::equilateral(3).unwrap());
        let c = cone(&base, 0).unwrap();
        let r0 = conformal_factor(&c, &[1.3, 0.2, 0.9]).unwrap();
        for (x, y) in [(1.0, 2.0), (-2.0, 0.5), (4.0, 3.0)] {
            assert!((conformal_factor(&c, &[1.3, x, y]).unwrap() - r0).abs() < 1e-12);
        }
    }

    /// Normal derivative of the ambient mean curvature vector, which needs no
    /// frame alignment.
    fn gauge_free_mean_derivative(f: &Immersion<f64>, u: &[f64]) -> DMatrix<f64> {
        let loc = local(f, u).unwrap();
        let m = loc.m();
        let sampler = |q: &[f64]| local(f, q).map(|l| l.forms.mean_vector().as_slice().to_vec());
        let mut dh = DMatrix::zeros(f.ambient().dim(), m);
        for a in 0..m {
            let d = field_derivative_vec(sampler, u, Partial::First(a), &spec()).unwrap();
            dh.set_column(a, &DVector::from_vec(d));
        }
        loc.forms.frame.normals.transpose() * dh * loc.forms.frame.chart_to_frame.transpose()
    }

    #[test]
    fn aligned_frames_match_gauge_free_derivative() {
        let f = Immersion::<f64>::new(
            "bumpy",
            2,
            Ambient::Euclidean(4),
            ChartDomain::new(vec![-1.0; 2], vec![1.0; 2]),
            |v: &[Jet<f64>]| {
                let (x, y) = (v[0], v[1]);
                Ok(vec![x, y, (x * x * 0.7 + y * 0.4).sin(), x * y * y * 0.5 + y.exp() * 0.2])
            },
        );
        let u = [0.3, -0.2];
        let loc = local(&f, &u).unwrap();
        let (_, gh) = first_derivatives(&f, &loc, &u, &spec()).unwrap();
        let aligned = gh * loc.forms.frame.chart_to_frame.transpose();
        let reference = gauge_free_mean_derivative(&f, &u);
        assert!((aligned - reference).amax() < 1e-8);
    }

    #[test]
    fn wintgen_members_have_vanishing_form() {
        for (name, p, u) in [
            ("veronese_s4", params(&[]), vec![0.8, 1.3]),
            ("hopf_veronese", params(&[]), vec![0.3, 0.2, -0.4]),
            ("cone_of", params(&[]), vec![1.1, 0.9, 2.0]),
        ] {
            let f = gallery_get::<f64>(name, &p).unwrap();
            let form = moebius_form(&f, &u, &spec()).unwrap();
            assert!(form.phi_norm2.sqrt() < 1e-6, "{name}: {}", form.phi_norm2);
        }
    }

    #[test]
    fn blaschke_identities_on_veronese_cone() {
        let f = gallery_get::<f64>("cone_of", &Params::new()).unwrap();
        let inv = moebius_invariants(&f, &[1.2, 0.9, 2.2], &spec()).unwrap();
        let bl = blaschke_a(&f, &[1.2, 0.9, 2.2], &spec()).unwrap();
        assert!((bl.y.inner(&bl.n) - 1.0).abs() < 1e-6);
        assert!(bl.n.norm2().abs() < 1e-6);
        assert!((bl.trace() - bl.trace_from_kappa()).abs() < 1e-6);
        let e = &inv.scalars.a_eigenvalues;
        assert!((e[1] - e[2]).abs() < 1e-5 && (e[0] + e[2]).abs() < 1e-5, "{e:?}");
        assert!(inv.gauss_residual < 1e-5, "{}", inv.gauss_residual);
    }

    #[test]
    fn gap_matches_geometry_level_on_wintgen_member() {
        let f = gallery_get::<f64>("veronese_s4", &Params::new()).unwrap();
        let u = [0.9, 2.0];
        let ff = fundamental_forms(&f, &u).unwrap();
        let geo = ddvv_report(&ff.second, 1.0).unwrap().gap;
        let (_, gap) = exact_scalars(&f, &u).unwrap();
        assert!((geo - gap).abs() < 1e-8 && gap.abs() < 1e-12);
    }
}
