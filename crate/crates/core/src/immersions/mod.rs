//! Parametrized immersions, the example gallery and geometric constructions.

mod clifford;
mod cone;
mod gallery;
mod hopf;
mod lorentz;
mod stereo;
mod veronese;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::expr::{Ast, EvalError, ParseError};
use crate::jets::{DomainError, Jet, MAX_DIM};
use crate::scalar::Real;

pub use clifford::{clifford, clifford_conditions, CliffordConditions, CliffordParams};
pub use cone::cone;
pub use gallery::{gallery_dsl_sources, gallery_get, gallery_names, GalleryEntry, Params};
pub use hopf::hopf_veronese;
pub use lorentz::{apply_moebius, light_cone_lift, random_moebius, LorentzMatrix};
pub use stereo::{inverse_stereographic, stereographic, stereographic_point, StereoDirection, POLE_CLEARANCE};
pub use veronese::{harmonic_cubic_basis, veronese_s4, veronese_sphere};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ImmersionError {
    #[error("unknown example '{0}'")]
    UnknownExample(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("point {point:?} is outside the chart domain: {reason}")]
    OutsideDomain { point: Vec<f64>, reason: String },
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("component {component}: {messages}")]
    Validation { component: usize, messages: String },
    #[error("base immersion must be sphere-valued")]
    NotSphereValued,
    #[error("point lies within {distance:e} of the projection pole")]
    PoleProximity { distance: f64 },
    #[error("Moebius transformation sends the point to infinity")]
    PointAtInfinity,
}

/// Target space of an immersion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", content = "dim", rename_all = "snake_case")]
pub enum Ambient {
    /// Euclidean space R^n.
    Euclidean(usize),
    /// Unit sphere S^n, embedded in R^{n+1}.
    UnitSphere(usize),
}

impl Ambient {
    /// Number of Cartesian components of the embedding space.
    pub fn components(&self) -> usize {
        match *self {
            Ambient::Euclidean(n) => n,
            Ambient::UnitSphere(n) => n + 1,
        }
    }

    /// Intrinsic dimension of the target space form.
    pub fn dim(&self) -> usize {
        match *self {
            Ambient::Euclidean(n) | Ambient::UnitSphere(n) => n,
        }
    }

    /// Sectional curvature `c` of the space form.
    pub fn curvature<T: Real>(&self) -> T {
        match self {
            Ambient::Euclidean(_) => T::zero(),
            Ambient::UnitSphere(_) => T::one(),
        }
    }

    pub fn is_sphere(&self) -> bool {
        matches!(self, Ambient::UnitSphere(_))
    }
}

impl fmt::Display for Ambient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ambient::Euclidean(n) => write!(f, "R^{n}"),
            Ambient::UnitSphere(n) => write!(f, "S^{n} in R^{}", n + 1),
        }
    }
}

/// Sampling box of a chart plus a description of excluded sets.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartDomain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub excluded: String,
}

impl ChartDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        assert_eq!(lower.len(), upper.len());
        Self {
            lower,
            upper,
            excluded: String::new(),
        }
    }

    pub fn excluding(mut self, what: impl Into<String>) -> Self {
        self.excluded = what.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dim()
            && point
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (lo, hi))| *lo <= *x && *x <= *hi)
    }

    /// Affine map from the unit cube onto the box.
    pub fn from_unit(&self, unit: &[f64]) -> Vec<f64> {
        unit.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(s, (lo, hi))| lo + s * (hi - lo))
            .collect()
    }
}

/// Map from coordinate jets to ambient component jets.
pub type MapFn<T> = dyn Fn(&[Jet<T>]) -> Result<Vec<Jet<T>>, ImmersionError> + Send + Sync;

/// A smooth map from an `m`-dimensional chart into Euclidean space or a unit sphere.
///
/// The evaluator receives seeded coordinate jets, which lets constructions
/// (cones, stereographic projection, Moebius transformations) compose maps
/// while the chain rule is carried by the jet arithmetic.
#[derive(Clone)]
pub struct Immersion<T> {
    name: String,
    chart_dim: usize,
    ambient: Ambient,
    domain: ChartDomain,
    map: Arc<MapFn<T>>,
}

impl<T: Real> fmt::Debug for Immersion<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Immersion")
            .field("name", &self.name)
            .field("chart_dim", &self.chart_dim)
            .field("ambient", &self.ambient)
            .finish()
    }
}

impl<T: Real> Immersion<T> {
    pub fn new<F>(
        name: impl Into<String>,
        chart_dim: usize,
        ambient: Ambient,
        domain: ChartDomain,
        map: F,
    ) -> Self
    where
        F: Fn(&[Jet<T>]) -> Result<Vec<Jet<T>>, ImmersionError> + Send + Sync + 'static,
    {
        assert!((1..=MAX_DIM).contains(&chart_dim));
        assert_eq!(domain.dim(), chart_dim);
        Self {
            name: name.into(),
            chart_dim,
            ambient,
            domain,
            map: Arc::new(map),
        }
    }

    /// Builds an immersion from one DSL expression per ambient component.
    pub fn from_dsl<S: AsRef<str>>(
        name: impl Into<String>,
        chart_dim: usize,
        ambient: Ambient,
        domain: ChartDomain,
        components: &[S],
    ) -> Result<Self, ImmersionError> {
        if components.len() != ambient.components() {
            return Err(ImmersionError::InvalidParams(format!(
                "{} components given, ambient {ambient} needs {}",
                components.len(),
                ambient.components()
            )));
        }
        if domain.dim() != chart_dim {
            return Err(ImmersionError::InvalidParams(format!(
                "region has {} axes, chart dimension is {chart_dim}",
                domain.dim()
            )));
        }
        if !(1..=MAX_DIM).contains(&chart_dim) {
            return Err(ImmersionError::InvalidParams(format!(
                "chart dimension must be in 1..={MAX_DIM}"
            )));
        }
        let mut asts = Vec::with_capacity(components.len());
        for (i, src) in components.iter().enumerate() {
            let ast = Ast::parse(src.as_ref())?;
            ast.validate(chart_dim).map_err(|issues| ImmersionError::Validation {
                component: i,
                messages: issues.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; "),
            })?;
            asts.push(ast);
        }
        Ok(Self::new(name, chart_dim, ambient, domain, move |vars: &[Jet<T>]| {
            asts.iter()
                .map(|a| a.eval_on(vars).map_err(ImmersionError::from))
                .collect()
        }))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn chart_dim(&self) -> usize {
        self.chart_dim
    }

    pub fn ambient(&self) -> Ambient {
        self.ambient
    }

    pub fn domain(&self) -> &ChartDomain {
        &self.domain
    }

    /// Codimension `p` inside the target space form.
    pub fn codim(&self) -> usize {
        self.ambient.dim().saturating_sub(self.chart_dim)
    }

    /// Applies the map to caller-seeded jets (for composition).
    pub fn map_jets(&self, vars: &[Jet<T>]) -> Result<Vec<Jet<T>>, ImmersionError> {
        (self.map)(vars)
    }

    /// Value, gradient and Hessian of every ambient component at `point`.
    pub fn evaluate(&self, point: &[T]) -> Result<Vec<Jet<T>>, ImmersionError> {
        if point.len() != self.chart_dim {
            return Err(ImmersionError::InvalidParams(format!(
                "point has {} coordinates, chart dimension is {}",
                point.len(),
                self.chart_dim
            )));
        }
        let vars = Jet::seed(point);
        let out = (self.map)(&vars)?;
        debug_assert_eq!(out.len(), self.ambient.components());
        Ok(out.into_iter().map(|j| j.widen(self.chart_dim)).collect())
    }

    /// Point values only.
    pub fn position(&self, point: &[T]) -> Result<Vec<T>, ImmersionError> {
        Ok(self.evaluate(point)?.iter().map(|j| j.value()).collect())
    }

    /// Post-composes with a map of the ambient components.
    pub fn then<F>(&self, name: impl Into<String>, ambient: Ambient, post: F) -> Self
    where
        F: Fn(&[Jet<T>]) -> Result<Vec<Jet<T>>, ImmersionError> + Send + Sync + 'static,
    {
        let inner = self.map.clone();
        Self::new(name, self.chart_dim, ambient, self.domain.clone(), move |vars: &[Jet<T>]| {
            post(&inner(vars)?)
        })
    }

    /// Precomposes with an affine change of chart `u = A v + b`.
    pub fn reparametrize(&self, a: &nalgebra::DMatrix<T>, b: &[T], domain: ChartDomain) -> Self {
        let m = self.chart_dim;
        assert_eq!(a.shape(), (m, m));
        let inner = self.map.clone();
        let a = a.clone();
        let b = b.to_vec();
        Self::new(format!("{}∘affine", self.name), m, self.ambient, domain, move |vars: &[Jet<T>]| {
            let u: Vec<Jet<T>> = (0..m)
                .map(|i| {
                    (0..m).fold(Jet::constant(b[i]), |acc, j| acc + vars[j] * a[(i, j)])
                })
                .collect();
            inner(&u)
        })
    }
}

/// Real and imaginary jet parts of a complex-valued function.
#[derive(Clone, Copy)]
pub(crate) struct ComplexJet<T: Real> {
    pub re: Jet<T>,
    pub im: Jet<T>,
}

impl<T: Real> ComplexJet<T> {
    pub fn new(re: Jet<T>, im: Jet<T>) -> Self {
        Self { re, im }
    }

    pub fn one() -> Self {
        Self::new(Jet::constant(T::one()), Jet::constant(T::zero()))
    }

    pub fn mul(self, o: Self) -> Self {
        Self::new(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)
    }

    pub fn scale(self, s: Jet<T>) -> Self {
        Self::new(self.re * s, self.im * s)
    }
}
