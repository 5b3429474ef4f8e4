use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

/// Axis-aligned region of the base containing the support of a potential.
#[derive(Debug, Clone, PartialEq)]
pub enum Support {
    Unbounded,
    Bounded { lo: DVector<f64>, hi: DVector<f64> },
}

impl Support {
    pub fn contains(&self, q: &DVector<f64>) -> bool {
        match self {
            Support::Unbounded => true,
            Support::Bounded { lo, hi } => q
                .iter()
                .zip(lo.iter().zip(hi.iter()))
                .all(|(x, (a, b))| *x >= *a && *x <= *b),
        }
    }
}

/// A function `u(q)` on the base with its first two derivatives.
pub trait PotentialField: Send + Sync + fmt::Debug {
    fn base_dim(&self) -> usize;
    fn value(&self, q: &DVector<f64>) -> f64;
    fn gradient(&self, q: &DVector<f64>) -> DVector<f64>;
    fn hessian(&self, q: &DVector<f64>) -> DMatrix<f64>;

    fn support(&self) -> Support {
        Support::Unbounded
    }

    /// Defining data as `key = value` lines.
    fn describe(&self) -> String {
        format!("kind = {self:?}")
    }
}

#[derive(Debug, Clone)]
pub struct ZeroPotential {
    pub n: usize,
}

impl PotentialField for ZeroPotential {
    fn base_dim(&self) -> usize {
        self.n
    }
    fn value(&self, _q: &DVector<f64>) -> f64 {
        0.0
    }
    fn gradient(&self, _q: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(self.n)
    }
    fn hessian(&self, _q: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(self.n, self.n)
    }
    fn support(&self) -> Support {
        Support::Bounded {
            lo: DVector::zeros(self.n),
            hi: DVector::zeros(self.n),
        }
    }
    fn describe(&self) -> String {
        format!("kind = zero\nbase_dim = {}", self.n)
    }
}

/// `u(q) = c + b.q + q^T A q / 2`.
#[derive(Debug, Clone)]
pub struct QuadraticPotential {
    pub c: f64,
    pub b: DVector<f64>,
    pub a: DMatrix<f64>,
}

impl QuadraticPotential {
    pub fn new(c: f64, b: DVector<f64>, a: DMatrix<f64>) -> Self {
        let a = (&a + a.transpose()) * 0.5;
        Self { c, b, a }
    }

    pub fn diagonal(c: f64, diag: &[f64]) -> Self {
        let n = diag.len();
        Self::new(c, DVector::zeros(n), DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }
}

impl PotentialField for QuadraticPotential {
    fn base_dim(&self) -> usize {
        self.b.len()
    }
    fn value(&self, q: &DVector<f64>) -> f64 {
        self.c + self.b.dot(q) + 0.5 * q.dot(&(&self.a * q))
    }
    fn gradient(&self, q: &DVector<f64>) -> DVector<f64> {
        &self.b + &self.a * q
    }
    fn hessian(&self, _q: &DVector<f64>) -> DMatrix<f64> {
        self.a.clone()
    }
    fn describe(&self) -> String {
        format!(
            "kind = quadratic\nc = {:e}\nb = {:?}\na = {:?}",
            self.c,
            self.b.as_slice(),
            crate::linalg::row_major(&self.a)
        )
    }
}

/// `u(q) = alpha (1 - cos q_1) + kappa/2 * |q_hat|^2 (1 + mu q_1^2)`: a pendulum
/// well along `q_1` with a transverse confinement whose stiffness depends on `q_1`.
#[derive(Debug, Clone)]
pub struct PendulumWell {
    pub n: usize,
    pub alpha: f64,
    pub kappa: f64,
    pub mu: f64,
}

impl PotentialField for PendulumWell {
    fn base_dim(&self) -> usize {
        self.n
    }
    fn value(&self, q: &DVector<f64>) -> f64 {
        let r2: f64 = q.iter().skip(1).map(|x| x * x).sum();
        self.alpha * (1.0 - q[0].cos()) + 0.5 * self.kappa * r2 * (1.0 + self.mu * q[0] * q[0])
    }
    fn gradient(&self, q: &DVector<f64>) -> DVector<f64> {
        let r2: f64 = q.iter().skip(1).map(|x| x * x).sum();
        let s = 1.0 + self.mu * q[0] * q[0];
        let mut g = DVector::zeros(self.n);
        g[0] = self.alpha * q[0].sin() + self.kappa * r2 * self.mu * q[0];
        for i in 1..self.n {
            g[i] = self.kappa * s * q[i];
        }
        g
    }
    fn hessian(&self, q: &DVector<f64>) -> DMatrix<f64> {
        let r2: f64 = q.iter().skip(1).map(|x| x * x).sum();
        let s = 1.0 + self.mu * q[0] * q[0];
        let mut h = DMatrix::zeros(self.n, self.n);
        h[(0, 0)] = self.alpha * q[0].cos() + self.kappa * r2 * self.mu;
        for i in 1..self.n {
            h[(0, i)] = 2.0 * self.kappa * self.mu * q[0] * q[i];
            h[(i, 0)] = h[(0, i)];
            h[(i, i)] = self.kappa * s;
        }
        h
    }
    fn describe(&self) -> String {
        format!(
            "kind = pendulum-well\nbase_dim = {}\nalpha = {:e}\nkappa = {:e}\nmu = {:e}",
            self.n, self.alpha, self.kappa, self.mu
        )
    }
}

type ScalarFn = dyn Fn(&DVector<f64>) -> f64 + Send + Sync;
type VectorFn = dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync;
type MatrixFn = dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync;

/// Potential defined by user closures for value, gradient and Hessian.
#[derive(Clone)]
pub struct FnPotential {
    n: usize,
    name: String,
    value: Arc<ScalarFn>,
    gradient: Arc<VectorFn>,
    hessian: Arc<MatrixFn>,
}

impl FnPotential {
    pub fn new(
        n: usize,
        name: impl Into<String>,
        value: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        hessian: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            n,
            name: name.into(),
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            hessian: Arc::new(hessian),
        }
    }
}

impl fmt::Debug for FnPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FnPotential({})", self.name)
    }
}

impl PotentialField for FnPotential {
    fn base_dim(&self) -> usize {
        self.n
    }
    fn value(&self, q: &DVector<f64>) -> f64 {
        (self.value)(q)
    }
    fn gradient(&self, q: &DVector<f64>) -> DVector<f64> {
        (self.gradient)(q)
    }
    fn hessian(&self, q: &DVector<f64>) -> DMatrix<f64> {
        (self.hessian)(q)
    }
    fn describe(&self) -> String {
        format!("kind = closure\nname = {}", self.name)
    }
}

/// Pointwise sum of two potentials.
#[derive(Debug, Clone)]
pub struct SumPotential {
    pub a: Arc<dyn PotentialField>,
    pub b: Arc<dyn PotentialField>,
}

impl PotentialField for SumPotential {
    fn base_dim(&self) -> usize {
        self.a.base_dim()
    }
    fn value(&self, q: &DVector<f64>) -> f64 {
        self.a.value(q) + self.b.value(q)
    }
    fn gradient(&self, q: &DVector<f64>) -> DVector<f64> {
        self.a.gradient(q) + self.b.gradient(q)
    }
    fn hessian(&self, q: &DVector<f64>) -> DMatrix<f64> {
        self.a.hessian(q) + self.b.hessian(q)
    }
    fn support(&self) -> Support {
        match (self.a.support(), self.b.support()) {
            (Support::Bounded { lo: l1, hi: h1 }, Support::Bounded { lo: l2, hi: h2 }) => {
                Support::Bounded {
                    lo: l1.zip_map(&l2, f64::min),
                    hi: h1.zip_map(&h2, f64::max),
                }
            }
            _ => Support::Unbounded,
        }
    }
    fn describe(&self) -> String {
        format!("kind = sum\n[a]\n{}\n[b]\n{}", self.a.describe(), self.b.describe())
    }
}

/// `scale * u`.
#[derive(Debug, Clone)]
pub struct ScaledPotential {
    pub scale: f64,
    pub inner: Arc<dyn PotentialField>,
}

impl PotentialField for ScaledPotential {
    fn base_dim(&self) -> usize {
        self.inner.base_dim()
    }
    fn value(&self, q: &DVector<f64>) -> f64 {
        self.scale * self.inner.value(q)
    }
    fn gradient(&self, q: &DVector<f64>) -> DVector<f64> {
        self.inner.gradient(q) * self.scale
    }
    fn hessian(&self, q: &DVector<f64>) -> DMatrix<f64> {
        self.inner.hessian(q) * self.scale
    }
    fn support(&self) -> Support {
        self.inner.support()
    }
    fn describe(&self) -> String {
        format!("kind = scaled\nscale = {:e}\n{}", self.scale, self.inner.describe())
    }
}
