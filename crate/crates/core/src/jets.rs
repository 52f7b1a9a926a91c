//! Order-2 truncated Taylor arithmetic and finite-difference derivatives of
//! sampled fields.
//!
//! A [`Jet`] carries the value, gradient and Hessian of a scalar function of
//! up to [`MAX_DIM`] chart variables. Arithmetic on jets applies the first and
//! second order chain rule exactly, so compositions of elementary functions
//! are differentiated to round-off. Quantities needing three or more
//! derivatives of an immersion are obtained by differencing jet-derived fields
//! with [`field_derivative`].

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::scalar::Real;

/// Largest supported chart dimension (variables `u1` … `u9`).
pub const MAX_DIM: usize = 9;
const HESS_LEN: usize = MAX_DIM * (MAX_DIM + 1) / 2;

#[inline]
const fn tri(a: usize, b: usize) -> usize {
    if a <= b {
        b * (b + 1) / 2 + a
    } else {
        a * (a + 1) / 2 + b
    }
}

/// Domain violation raised by checked jet operations.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{op} is undefined at {value}")]
pub struct DomainError {
    pub op: &'static str,
    pub value: f64,
}

/// Value, gradient and Hessian of a scalar function on an `m`-dimensional chart.
///
/// The Hessian is stored packed (upper triangle), so `hess(a, b)` and
/// `hess(b, a)` read the same slot and symmetry holds exactly.
#[derive(Clone, Copy, PartialEq)]
pub struct Jet<T> {
    dim: usize,
    value: T,
    grad: [T; MAX_DIM],
    hess: [T; HESS_LEN],
}

impl<T: Real> fmt::Debug for Jet<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("value", &self.value)
            .field("grad", &self.gradient())
            .field("hess", &self.hessian().as_slice())
            .finish()
    }
}

impl<T: Real> Jet<T> {
    /// A constant. Its dimension is 0 and widens when combined with variables.
    pub fn constant(value: T) -> Self {
        Self {
            dim: 0,
            value,
            grad: [T::zero(); MAX_DIM],
            hess: [T::zero(); HESS_LEN],
        }
    }

    /// The coordinate function `u_{index+1}` on a `dim`-dimensional chart.
    pub fn variable(value: T, index: usize, dim: usize) -> Self {
        assert!(dim <= MAX_DIM, "chart dimension {dim} exceeds {MAX_DIM}");
        assert!(index < dim, "variable index {index} out of range for dim {dim}");
        let mut j = Self::constant(value);
        j.dim = dim;
        j.grad[index] = T::one();
        j
    }

    /// Seeds one variable jet per chart coordinate.
    pub fn seed(point: &[T]) -> Vec<Self> {
        let dim = point.len();
        point
            .iter()
            .enumerate()
            .map(|(i, &v)| Self::variable(v, i, dim))
            .collect()
    }

    /// Builds a jet from explicit parts; `hess` is read from its upper triangle.
    pub fn from_parts(value: T, grad: &[T], hess: &DMatrix<T>) -> Self {
        let dim = grad.len();
        assert!(dim <= MAX_DIM);
        assert_eq!(hess.nrows(), dim);
        let mut j = Self::constant(value);
        j.dim = dim;
        j.grad[..dim].copy_from_slice(grad);
        for b in 0..dim {
            for a in 0..=b {
                j.hess[tri(a, b)] = hess[(a, b)];
            }
        }
        j
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Reports at least `dim` chart variables (missing partials are zero).
    pub fn widen(mut self, dim: usize) -> Self {
        assert!(dim <= MAX_DIM);
        self.dim = self.dim.max(dim);
        self
    }

    pub fn value(&self) -> T {
        self.value
    }

    pub fn grad(&self, a: usize) -> T {
        if a < self.dim {
            self.grad[a]
        } else {
            T::zero()
        }
    }

    pub fn hess(&self, a: usize, b: usize) -> T {
        if a < self.dim && b < self.dim {
            self.hess[tri(a, b)]
        } else {
            T::zero()
        }
    }

    pub fn gradient(&self) -> Vec<T> {
        self.grad[..self.dim].to_vec()
    }

    pub fn hessian(&self) -> DMatrix<T> {
        DMatrix::from_fn(self.dim, self.dim, |a, b| self.hess[tri(a, b)])
    }

    /// Applies a scalar function given its value and first two derivatives at
    /// `self.value`.
    #[inline]
    pub fn chain(&self, f0: T, f1: T, f2: T) -> Self {
        let n = self.dim;
        let mut out = Self::constant(f0);
        out.dim = n;
        for a in 0..n {
            out.grad[a] = f1 * self.grad[a];
        }
        for b in 0..n {
            for a in 0..=b {
                let k = tri(a, b);
                out.hess[k] = f1 * self.hess[k] + f2 * self.grad[a] * self.grad[b];
            }
        }
        out
    }

    pub fn sin(&self) -> Self {
        let (s, c) = (self.value.sin(), self.value.cos());
        self.chain(s, c, -s)
    }

    pub fn cos(&self) -> Self {
        let (s, c) = (self.value.sin(), self.value.cos());
        self.chain(c, -s, -c)
    }

    pub fn exp(&self) -> Self {
        let e = self.value.exp();
        self.chain(e, e, e)
    }

    pub fn atan(&self) -> Self {
        let v = self.value;
        let d = T::one() / (T::one() + v * v);
        self.chain(v.atan(), d, -(T::one() + T::one()) * v * d * d)
    }

    pub fn try_tan(&self) -> Result<Self, DomainError> {
        let c = self.value.cos();
        if c == T::zero() {
            return Err(self.domain("tan"));
        }
        let t = self.value.tan();
        let sec2 = T::one() / (c * c);
        Ok(self.chain(t, sec2, (T::one() + T::one()) * t * sec2))
    }

    pub fn try_ln(&self) -> Result<Self, DomainError> {
        let v = self.value;
        if !(v > T::zero()) {
            return Err(self.domain("log"));
        }
        let r = T::one() / v;
        Ok(self.chain(v.ln(), r, -r * r))
    }

    pub fn try_sqrt(&self) -> Result<Self, DomainError> {
        let v = self.value;
        if !(v > T::zero()) {
            return Err(self.domain("sqrt"));
        }
        let s = v.sqrt();
        let half = T::lit(0.5);
        Ok(self.chain(s, half / s, -half * half / (s * v)))
    }

    pub fn try_recip(&self) -> Result<Self, DomainError> {
        let v = self.value;
        if v == T::zero() || !v.is_finite() {
            return Err(self.domain("division"));
        }
        let r = T::one() / v;
        Ok(self.chain(r, -r * r, (T::one() + T::one()) * r * r * r))
    }

    pub fn try_div(&self, rhs: &Self) -> Result<Self, DomainError> {
        Ok(*self * rhs.try_recip()?)
    }

    /// Integer power; exact for negative exponents away from zero.
    pub fn powi(&self, n: i32) -> Self {
        let v = self.value;
        let nf = T::from_i32(n).expect("i32 representable");
        if n == 0 {
            return Self::constant(T::one());
        }
        let p2 = if !(0..2).contains(&n) { v.powi(n - 2) } else { T::zero() };
        let p1 = if n != 0 { v.powi(n - 1) } else { T::zero() };
        self.chain(v.powi(n), nf * p1, nf * (nf - T::one()) * p2)
    }

    /// `self ^ exponent` for a jet exponent.
    ///
    /// Constant integer exponents take the exact polynomial route and accept
    /// any sign of the base; otherwise the base must be positive.
    pub fn try_pow(&self, exponent: &Self) -> Result<Self, DomainError> {
        let e = exponent.value;
        let exponent_is_const = (0..exponent.dim).all(|a| exponent.grad[a] == T::zero())
            && (0..exponent.dim * (exponent.dim + 1) / 2).all(|k| exponent.hess[k] == T::zero());
        if exponent_is_const && e.round() == e && e.abs() <= T::lit(64.0) {
            let n = e.as_f64() as i32;
            if n < 0 && self.value == T::zero() {
                return Err(self.domain("pow"));
            }
            return Ok(self.powi(n));
        }
        if !(self.value > T::zero()) {
            return Err(self.domain("pow"));
        }
        if exponent_is_const {
            let v = self.value;
            return Ok(self.chain(
                v.powf(e),
                e * v.powf(e - T::one()),
                e * (e - T::one()) * v.powf(e - T::one() - T::one()),
            ));
        }
        Ok((*exponent * self.try_ln()?).exp())
    }

    fn domain(&self, op: &'static str) -> DomainError {
        DomainError {
            op,
            value: self.value.as_f64(),
        }
    }
}

impl<T: Real> Add for Jet<T> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl<T: Real> AddAssign for Jet<T> {
    fn add_assign(&mut self, rhs: Self) {
        let n = self.dim.max(rhs.dim);
        self.dim = n;
        self.value += rhs.value;
        for a in 0..n {
            self.grad[a] += rhs.grad[a];
        }
        for k in 0..n * (n + 1) / 2 {
            self.hess[k] += rhs.hess[k];
        }
    }
}

impl<T: Real> Sub for Jet<T> {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        self -= rhs;
        self
    }
}

impl<T: Real> SubAssign for Jet<T> {
    fn sub_assign(&mut self, rhs: Self) {
        let n = self.dim.max(rhs.dim);
        self.dim = n;
        self.value -= rhs.value;
        for a in 0..n {
            self.grad[a] -= rhs.grad[a];
        }
        for k in 0..n * (n + 1) / 2 {
            self.hess[k] -= rhs.hess[k];
        }
    }
}

impl<T: Real> Neg for Jet<T> {
    type Output = Self;
    fn neg(mut self) -> Self {
        let n = self.dim;
        self.value = -self.value;
        for a in 0..n {
            self.grad[a] = -self.grad[a];
        }
        for k in 0..n * (n + 1) / 2 {
            self.hess[k] = -self.hess[k];
        }
        self
    }
}

impl<T: Real> Mul for Jet<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let n = self.dim.max(rhs.dim);
        let (f, g) = (self.value, rhs.value);
        let mut out = Self::constant(f * g);
        out.dim = n;
        for a in 0..n {
            out.grad[a] = f * rhs.grad[a] + g * self.grad[a];
        }
        for b in 0..n {
            for a in 0..=b {
                let k = tri(a, b);
                out.hess[k] = f * rhs.hess[k]
                    + g * self.hess[k]
                    + self.grad[a] * rhs.grad[b]
                    + self.grad[b] * rhs.grad[a];
            }
        }
        out
    }
}

impl<T: Real> MulAssign for Jet<T> {
    fn mul_assign(&mut self, rhs: Self) {
        *self = *self * rhs;
    }
}

/// Unchecked division. Use [`Jet::try_div`] when the denominator may vanish.
impl<T: Real> Div for Jet<T> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let r = T::one() / rhs.value;
        self * rhs.chain(r, -r * r, (T::one() + T::one()) * r * r * r)
    }
}

impl<T: Real> Add<T> for Jet<T> {
    type Output = Self;
    fn add(mut self, rhs: T) -> Self {
        self.value += rhs;
        self
    }
}

impl<T: Real> Sub<T> for Jet<T> {
    type Output = Self;
    fn sub(mut self, rhs: T) -> Self {
        self.value -= rhs;
        self
    }
}

impl<T: Real> Mul<T> for Jet<T> {
    type Output = Self;
    fn mul(mut self, rhs: T) -> Self {
        let n = self.dim;
        self.value *= rhs;
        for a in 0..n {
            self.grad[a] *= rhs;
        }
        for k in 0..n * (n + 1) / 2 {
            self.hess[k] *= rhs;
        }
        self
    }
}

impl<T: Real> Div<T> for Jet<T> {
    type Output = Self;
    fn div(self, rhs: T) -> Self {
        self * (T::one() / rhs)
    }
}

/// Sum of squares of a vector of jets.
pub fn norm_squared<T: Real>(v: &[Jet<T>]) -> Jet<T> {
    v.iter().fold(Jet::constant(T::zero()), |acc, c| acc + *c * *c)
}

/// Euclidean dot product of two vectors of jets.
pub fn dot<T: Real>(a: &[Jet<T>], b: &[Jet<T>]) -> Jet<T> {
    a.iter()
        .zip(b)
        .fold(Jet::constant(T::zero()), |acc, (x, y)| acc + *x * *y)
}

/// Evaluates a map given as a closure over seeded coordinate jets.
///
/// Every output component carries value, gradient and Hessian with respect
/// to the chart coordinates of `point`.
pub fn jet_lift<T, F, E>(map: F, point: &[T]) -> Result<Vec<Jet<T>>, E>
where
    T: Real,
    F: Fn(&[Jet<T>]) -> Result<Vec<Jet<T>>, E>,
{
    let vars = Jet::seed(point);
    let mut out = map(&vars)?;
    let dim = point.len();
    for c in &mut out {
        // constants produced by the map still report the chart dimension
        *c = c.widen(dim);
    }
    Ok(out)
}

/// Splits a vector-valued jet into value vector, Jacobian (components × m)
/// and per-component Hessians.
pub fn split_vector<T: Real>(jets: &[Jet<T>], dim: usize) -> (DVector<T>, DMatrix<T>) {
    let value = DVector::from_iterator(jets.len(), jets.iter().map(|j| j.value()));
    let jac = DMatrix::from_fn(jets.len(), dim, |i, a| jets[i].grad(a));
    (value, jac)
}

/// Central-difference scheme order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum FdScheme {
    #[serde(rename = "2")]
    Order2,
    #[serde(rename = "4")]
    Order4,
}

impl FdScheme {
    pub fn order(self) -> u32 {
        match self {
            FdScheme::Order2 => 2,
            FdScheme::Order4 => 4,
        }
    }

    pub fn from_order(order: u32) -> Option<Self> {
        match order {
            2 => Some(FdScheme::Order2),
            4 => Some(FdScheme::Order4),
            _ => None,
        }
    }
}

/// Step, scheme and extrapolation depth for [`field_derivative`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldDerivativeSpec<T> {
    pub step: T,
    pub richardson_levels: u32,
    pub scheme: FdScheme,
}

impl<T: Real> Default for FieldDerivativeSpec<T> {
    fn default() -> Self {
        Self {
            step: T::lit(1e-3),
            richardson_levels: 2,
            scheme: FdScheme::Order4,
        }
    }
}

impl<T: Real> FieldDerivativeSpec<T> {
    pub fn validate(&self) -> Result<(), FdError> {
        if !(self.step > T::zero()) {
            return Err(FdError::InvalidSpec(format!(
                "step must be positive, got {}",
                self.step.as_f64()
            )));
        }
        if !(1..=3).contains(&self.richardson_levels) {
            return Err(FdError::InvalidSpec(format!(
                "richardson_levels must be 1, 2 or 3, got {}",
                self.richardson_levels
            )));
        }
        Ok(())
    }
}

/// Which partial derivative to estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Partial {
    /// ∂/∂u_a
    First(usize),
    /// ∂²/∂u_a∂u_b (a may equal b)
    Second(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FdError {
    #[error("invalid finite-difference spec: {0}")]
    InvalidSpec(String),
    #[error("sampler failed at stencil point {point:?}: {message}")]
    Stencil { point: Vec<f64>, message: String },
    #[error("sampler returned {got} components, expected {expected}")]
    Shape { expected: usize, got: usize },
}

fn first_weights(scheme: FdScheme) -> &'static [(i32, f64)] {
    match scheme {
        FdScheme::Order2 => &[(-1, -0.5), (1, 0.5)],
        FdScheme::Order4 => &[(-2, 1.0 / 12.0), (-1, -8.0 / 12.0), (1, 8.0 / 12.0), (2, -1.0 / 12.0)],
    }
}

fn second_weights(scheme: FdScheme) -> &'static [(i32, f64)] {
    match scheme {
        FdScheme::Order2 => &[(-1, 1.0), (0, -2.0), (1, 1.0)],
        FdScheme::Order4 => &[
            (-2, -1.0 / 12.0),
            (-1, 16.0 / 12.0),
            (0, -30.0 / 12.0),
            (1, 16.0 / 12.0),
            (2, -1.0 / 12.0),
        ],
    }
}

/// Raw (non-extrapolated) stencil estimate for a vector-valued sampler.
fn stencil_estimate<T, F, E>(
    sampler: &F,
    point: &[T],
    partial: Partial,
    h: T,
    scheme: FdScheme,
) -> Result<Vec<T>, FdError>
where
    T: Real,
    F: Fn(&[T]) -> Result<Vec<T>, E>,
    E: fmt::Display,
{
    // list of (offsets per axis, weight)
    let mut terms: Vec<(Vec<(usize, i32)>, f64)> = Vec::new();
    let scale = match partial {
        Partial::First(a) => {
            for &(k, w) in first_weights(scheme) {
                terms.push((vec![(a, k)], w));
            }
            T::one() / h
        }
        Partial::Second(a, b) if a == b => {
            for &(k, w) in second_weights(scheme) {
                terms.push((vec![(a, k)], w));
            }
            T::one() / (h * h)
        }
        Partial::Second(a, b) => {
            for &(ka, wa) in first_weights(scheme) {
                for &(kb, wb) in first_weights(scheme) {
                    terms.push((vec![(a, ka), (b, kb)], wa * wb));
                }
            }
            T::one() / (h * h)
        }
    };
    let mut acc: Option<Vec<T>> = None;
    let mut q = point.to_vec();
    for (offsets, w) in terms {
        q.copy_from_slice(point);
        for &(axis, k) in &offsets {
            q[axis] += T::from_i32(k).expect("small int") * h;
        }
        let v = sampler(&q).map_err(|e| FdError::Stencil {
            point: q.iter().map(|x| x.as_f64()).collect(),
            message: e.to_string(),
        })?;
        let w = T::lit(w);
        match &mut acc {
            None => acc = Some(v.into_iter().map(|x| x * w).collect()),
            Some(acc) => {
                if acc.len() != v.len() {
                    return Err(FdError::Shape {
                        expected: acc.len(),
                        got: v.len(),
                    });
                }
                for (s, x) in acc.iter_mut().zip(v) {
                    *s += x * w;
                }
            }
        }
    }
    Ok(acc.unwrap_or_default().into_iter().map(|x| x * scale).collect())
}

/// Finite-difference partial derivative of a vector-valued field with
/// Richardson extrapolation over successively halved steps.
pub fn field_derivative_vec<T, F, E>(
    sampler: F,
    point: &[T],
    partial: Partial,
    spec: &FieldDerivativeSpec<T>,
) -> Result<Vec<T>, FdError>
where
    T: Real,
    F: Fn(&[T]) -> Result<Vec<T>, E>,
    E: fmt::Display,
{
    spec.validate()?;
    let levels = spec.richardson_levels as usize;
    let mut table: Vec<Vec<T>> = Vec::with_capacity(levels);
    let mut h = spec.step;
    for _ in 0..levels {
        table.push(stencil_estimate(&sampler, point, partial, h, spec.scheme)?);
        h *= T::lit(0.5);
    }
    // Neville-style elimination of h^p, h^{p+2}, ...
    let p = spec.scheme.order() as i32;
    for level in 1..levels {
        let factor = T::lit(2f64.powi(p + 2 * (level as i32 - 1)));
        for i in 0..levels - level {
            let coarse = &table[i];
            let fine = &table[i + 1];
            table[i] = fine
                .iter()
                .zip(coarse)
                .map(|(&f, &c)| (factor * f - c) / (factor - T::one()))
                .collect();
        }
    }
    Ok(table.swap_remove(0))
}

/// Scalar convenience wrapper around [`field_derivative_vec`].
pub fn field_derivative<T, F, E>(
    sampler: F,
    point: &[T],
    partial: Partial,
    spec: &FieldDerivativeSpec<T>,
) -> Result<T, FdError>
where
    T: Real,
    F: Fn(&[T]) -> Result<T, E>,
    E: fmt::Display,
{
    let v = field_derivative_vec(|q: &[T]| sampler(q).map(|x| vec![x]), point, partial, spec)?;
    Ok(v[0])
}

/// Gradient and Hessian of a scalar field by finite differences.
pub fn field_gradient_hessian<T, F, E>(
    sampler: F,
    point: &[T],
    spec: &FieldDerivativeSpec<T>,
) -> Result<(DVector<T>, DMatrix<T>), FdError>
where
    T: Real,
    F: Fn(&[T]) -> Result<T, E>,
    E: fmt::Display,
{
    let m = point.len();
    let s = |q: &[T]| sampler(q).map(|x| vec![x]);
    let mut grad = DVector::zeros(m);
    let mut hess = DMatrix::zeros(m, m);
    for a in 0..m {
        grad[a] = field_derivative_vec(s, point, Partial::First(a), spec)?[0];
        for b in 0..=a {
            let v = field_derivative_vec(s, point, Partial::Second(a, b), spec)?[0];
            hess[(a, b)] = v;
            hess[(b, a)] = v;
        }
    }
    Ok((grad, hess))
}
