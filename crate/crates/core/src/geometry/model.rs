use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::point::{ChartDomain, PhasePoint};
use super::potential::PotentialField;
use crate::error::{Error, Result};

/// Anything that evaluates `H`, its gradient and Hessian on `T*R^n`.
///
/// Phase vectors are laid out as `[q_1..q_n, p_1..p_n]`; gradients and
/// Hessians use the same ordering.
pub trait Hamiltonian: Send + Sync {
    fn base_dim(&self) -> usize;
    fn value(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64>;

    fn domain(&self) -> ChartDomain {
        ChartDomain::euclidean(self.base_dim())
    }

    fn try_gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let g = self.gradient(x);
        if g.iter().all(|v| v.is_finite()) {
            Ok(g)
        } else {
            Err(Error::Evaluation {
                x: x.as_slice().to_vec(),
                what: "gradient".into(),
            })
        }
    }

    fn try_hessian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let h = self.hessian(x);
        if h.iter().all(|v| v.is_finite()) {
            Ok(h)
        } else {
            Err(Error::Evaluation {
                x: x.as_slice().to_vec(),
                what: "hessian".into(),
            })
        }
    }
}

/// A base-dependent symmetric matrix field `G(q)` with two derivatives.
pub trait MatrixField: Send + Sync + fmt::Debug {
    fn base_dim(&self) -> usize;
    fn value(&self, q: &DVector<f64>) -> DMatrix<f64>;
    /// `dG/dq_k`.
    fn derivative(&self, q: &DVector<f64>, k: usize) -> DMatrix<f64>;
    /// `d^2G/dq_k dq_l`.
    fn second_derivative(&self, q: &DVector<f64>, k: usize, l: usize) -> DMatrix<f64>;
}

/// `G(q) = G_0 + sum_k q_k G_k`.
#[derive(Debug, Clone)]
pub struct AffineMatrixField {
    pub g0: DMatrix<f64>,
    pub slopes: Vec<DMatrix<f64>>,
}

impl AffineMatrixField {
    pub fn constant(g0: DMatrix<f64>) -> Self {
        let n = g0.nrows();
        Self {
            slopes: vec![DMatrix::zeros(n, n); n],
            g0,
        }
    }
}

impl MatrixField for AffineMatrixField {
    fn base_dim(&self) -> usize {
        self.g0.nrows()
    }
    fn value(&self, q: &DVector<f64>) -> DMatrix<f64> {
        let mut g = self.g0.clone();
        for (k, s) in self.slopes.iter().enumerate() {
            g += s * q[k];
        }
        g
    }
    fn derivative(&self, _q: &DVector<f64>, k: usize) -> DMatrix<f64> {
        self.slopes[k].clone()
    }
    fn second_derivative(&self, _q: &DVector<f64>, _k: usize, _l: usize) -> DMatrix<f64> {
        let n = self.g0.nrows();
        DMatrix::zeros(n, n)
    }
}

/// How derivatives of a model are obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DerivativeMode {
    Analytic,
    /// Central differences of the value: gradient step `grad_step * (1 + |x_i|)`,
    /// Hessian step `hess_step * (1 + |x_i|)`.
    CentralDifference { grad_step: f64, hess_step: f64 },
}

impl DerivativeMode {
    pub fn central_default() -> Self {
        DerivativeMode::CentralDifference {
            grad_step: 1e-5,
            hess_step: 1e-4,
        }
    }
}

#[derive(Clone)]
pub enum ModelKind {
    /// `H = p^T G(q) p / 2 + V(q)`.
    FiberwiseQuadratic {
        g: Arc<dyn MatrixField>,
        v: Arc<dyn PotentialField>,
    },
    /// Same formula with `G` the (positive definite) inverse metric.
    Natural {
        cometric: Arc<dyn MatrixField>,
        v: Arc<dyn PotentialField>,
    },
    /// `H = p_1`.
    MomentumLinear,
    Custom(Arc<dyn Hamiltonian>),
}

impl fmt::Debug for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::FiberwiseQuadratic { g, v } => {
                write!(f, "FiberwiseQuadratic {{ g: {g:?}, v: {v:?} }}")
            }
            ModelKind::Natural { cometric, v } => {
                write!(f, "Natural {{ cometric: {cometric:?}, v: {v:?} }}")
            }
            ModelKind::MomentumLinear => write!(f, "MomentumLinear"),
            ModelKind::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// A Hamiltonian on a chart domain, possibly with added potentials.
#[derive(Clone, Debug)]
pub struct HamiltonianModel {
    kind: ModelKind,
    mode: DerivativeMode,
    domain: ChartDomain,
    potentials: Vec<Arc<dyn PotentialField>>,
}

impl HamiltonianModel {
    pub fn fiberwise_quadratic(
        g: Arc<dyn MatrixField>,
        v: Arc<dyn PotentialField>,
        domain: ChartDomain,
    ) -> Result<Self> {
        check_dims(g.base_dim(), v.base_dim(), domain.base_dim())?;
        Ok(Self {
            kind: ModelKind::FiberwiseQuadratic { g, v },
            mode: DerivativeMode::Analytic,
            domain,
            potentials: Vec::new(),
        })
    }

    /// Rejects cometrics that are not positive definite at the origin.
    pub fn natural(
        cometric: Arc<dyn MatrixField>,
        v: Arc<dyn PotentialField>,
        domain: ChartDomain,
    ) -> Result<Self> {
        check_dims(cometric.base_dim(), v.base_dim(), domain.base_dim())?;
        let g0 = cometric.value(&DVector::zeros(domain.base_dim()));
        let sym = (&g0 + g0.transpose()) * 0.5;
        if sym.symmetric_eigenvalues().iter().any(|&l| l <= 0.0) {
            return Err(Error::InvalidArgument(
                "natural model needs a positive definite cometric".into(),
            ));
        }
        Ok(Self {
            kind: ModelKind::Natural { cometric, v },
            mode: DerivativeMode::Analytic,
            domain,
            potentials: Vec::new(),
        })
    }

    pub fn momentum_linear(domain: ChartDomain) -> Result<Self> {
        if domain.base_dim() < 2 {
            return Err(Error::InvalidDimension("base dimension must be >= 2".into()));
        }
        Ok(Self {
            kind: ModelKind::MomentumLinear,
            mode: DerivativeMode::Analytic,
            domain,
            potentials: Vec::new(),
        })
    }

    pub fn custom(h: Arc<dyn Hamiltonian>) -> Result<Self> {
        let domain = h.domain();
        if domain.base_dim() < 2 {
            return Err(Error::InvalidDimension("base dimension must be >= 2".into()));
        }
        Ok(Self {
            kind: ModelKind::Custom(h),
            mode: DerivativeMode::Analytic,
            domain,
            potentials: Vec::new(),
        })
    }

    pub fn with_derivative_mode(mut self, mode: DerivativeMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn derivative_mode(&self) -> DerivativeMode {
        self.mode
    }

    pub fn potentials(&self) -> &[Arc<dyn PotentialField>] {
        &self.potentials
    }

    /// `H + u`. Fails only on a dimension mismatch.
    pub fn add_potential(&self, u: Arc<dyn PotentialField>) -> Result<Self> {
        if u.base_dim() != self.domain.base_dim() {
            return Err(Error::InvalidDimension(format!(
                "potential on R^{} added to a model on R^{}",
                u.base_dim(),
                self.domain.base_dim()
            )));
        }
        let mut out = self.clone();
        out.potentials.push(u);
        Ok(out)
    }

    /// Fiber matrix `G(q)` for quadratic kinds.
    pub fn fiber_matrix(&self, q: &DVector<f64>) -> Option<DMatrix<f64>> {
        match &self.kind {
            ModelKind::FiberwiseQuadratic { g, .. } => Some(g.value(q)),
            ModelKind::Natural { cometric, .. } => Some(cometric.value(q)),
            _ => None,
        }
    }

    fn split<'a>(&self, x: &'a DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let n = self.domain.base_dim();
        (x.rows(0, n).into_owned(), x.rows(n, n).into_owned())
    }

    fn analytic_value(&self, x: &DVector<f64>) -> f64 {
        let (q, p) = self.split(x);
        let base = match &self.kind {
            ModelKind::FiberwiseQuadratic { g, v } | ModelKind::Natural { cometric: g, v } => {
                0.5 * p.dot(&(g.value(&q) * &p)) + v.value(&q)
            }
            ModelKind::MomentumLinear => p[0],
            ModelKind::Custom(h) => h.value(x),
        };
        base + self.potentials.iter().map(|u| u.value(&q)).sum::<f64>()
    }

    fn analytic_gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = self.domain.base_dim();
        let (q, p) = self.split(x);
        let mut out = match &self.kind {
            ModelKind::FiberwiseQuadratic { g, v } | ModelKind::Natural { cometric: g, v } => {
                let mut out = DVector::zeros(2 * n);
                let dv = v.gradient(&q);
                for k in 0..n {
                    out[k] = 0.5 * p.dot(&(g.derivative(&q, k) * &p)) + dv[k];
                }
                out.rows_mut(n, n).copy_from(&(g.value(&q) * &p));
                out
            }
            ModelKind::MomentumLinear => {
                let mut out = DVector::zeros(2 * n);
                out[n] = 1.0;
                out
            }
            ModelKind::Custom(h) => h.gradient(x),
        };
        for u in &self.potentials {
            let du = u.gradient(&q);
            for k in 0..n {
                out[k] += du[k];
            }
        }
        out
    }

    fn analytic_hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let n = self.domain.base_dim();
        let (q, p) = self.split(x);
        let mut out = match &self.kind {
            ModelKind::FiberwiseQuadratic { g, v } | ModelKind::Natural { cometric: g, v } => {
                let mut out = DMatrix::zeros(2 * n, 2 * n);
                let d2v = v.hessian(&q);
                for k in 0..n {
                    let gk = g.derivative(&q, k);
                    let gkp = &gk * &p;
                    for i in 0..n {
                        out[(k, n + i)] = gkp[i];
                        out[(n + i, k)] = gkp[i];
                    }
                    for l in k..n {
                        let val = 0.5 * p.dot(&(g.second_derivative(&q, k, l) * &p)) + d2v[(k, l)];
                        out[(k, l)] = val;
                        out[(l, k)] = val;
                    }
                }
                let gq = g.value(&q);
                let gq = (&gq + gq.transpose()) * 0.5;
                out.view_mut((n, n), (n, n)).copy_from(&gq);
                out
            }
            ModelKind::MomentumLinear => DMatrix::zeros(2 * n, 2 * n),
            ModelKind::Custom(h) => h.hessian(x),
        };
        for u in &self.potentials {
            let d2u = u.hessian(&q);
            let mut blk = out.view_mut((0, 0), (n, n));
            blk += d2u;
        }
        out
    }
}

fn check_dims(a: usize, b: usize, c: usize) -> Result<()> {
    if a != b || b != c {
        return Err(Error::InvalidDimension(format!(
            "matrix field, potential and domain disagree: {a}, {b}, {c}"
        )));
    }
    if c < 2 {
        return Err(Error::InvalidDimension("base dimension must be >= 2".into()));
    }
    Ok(())
}

impl Hamiltonian for HamiltonianModel {
    fn base_dim(&self) -> usize {
        self.domain.base_dim()
    }

    fn domain(&self) -> ChartDomain {
        self.domain.clone()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        self.analytic_value(x)
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        match self.mode {
            DerivativeMode::Analytic => self.analytic_gradient(x),
            DerivativeMode::CentralDifference { grad_step, .. } => {
                fd_gradient(|y| self.analytic_value(y), x, grad_step)
            }
        }
    }

    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        match self.mode {
            DerivativeMode::Analytic => self.analytic_hessian(x),
            DerivativeMode::CentralDifference { hess_step, .. } => {
                fd_hessian(|y| self.analytic_value(y), x, hess_step)
            }
        }
    }
}

/// Central-difference gradient with step `h * (1 + |x_i|)`.
pub fn fd_gradient(f: impl Fn(&DVector<f64>) -> f64, x: &DVector<f64>, h: f64) -> DVector<f64> {
    let mut y = x.clone();
    DVector::from_fn(x.len(), |i, _| {
        let hi = h * (1.0 + x[i].abs());
        y[i] = x[i] + hi;
        let fp = f(&y);
        y[i] = x[i] - hi;
        let fm = f(&y);
        y[i] = x[i];
        (fp - fm) / (2.0 * hi)
    })
}

/// Central-difference Hessian of a scalar function, symmetrized.
pub fn fd_hessian(f: impl Fn(&DVector<f64>) -> f64, x: &DVector<f64>, h: f64) -> DMatrix<f64> {
    let m = x.len();
    let steps: Vec<f64> = x.iter().map(|v| h * (1.0 + v.abs())).collect();
    let f0 = f(x);
    let mut y = x.clone();
    let mut out = DMatrix::zeros(m, m);
    for i in 0..m {
        let hi = steps[i];
        y[i] = x[i] + hi;
        let fp = f(&y);
        y[i] = x[i] - hi;
        let fm = f(&y);
        y[i] = x[i];
        out[(i, i)] = (fp - 2.0 * f0 + fm) / (hi * hi);
        for j in 0..i {
            let hj = steps[j];
            let mut eval = |si: f64, sj: f64| {
                y[i] = x[i] + si * hi;
                y[j] = x[j] + sj * hj;
                let v = f(&y);
                y[i] = x[i];
                y[j] = x[j];
                v
            };
            let v = (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0))
                / (4.0 * hi * hj);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// `X_H = (d_p H, -d_q H)`.
pub fn hamiltonian_vector_field(h: &dyn Hamiltonian, x: &PhasePoint) -> Result<DVector<f64>> {
    if x.base_dim() != h.base_dim() {
        return Err(Error::InvalidDimension(format!(
            "point on R^{} for a model on R^{}",
            x.base_dim(),
            h.base_dim()
        )));
    }
    let g = h.try_gradient(&x.to_vector())?;
    Ok(symplectic_gradient(&g))
}

/// `J * grad` for a phase-space gradient.
pub fn symplectic_gradient(g: &DVector<f64>) -> DVector<f64> {
    let n = g.len() / 2;
    DVector::from_fn(2 * n, |i, _| if i < n { g[n + i] } else { -g[i - n] })
}

/// `H + u` for any evaluator `H`, borrowing both parts.
pub struct Perturbed<'a> {
    pub h: &'a dyn Hamiltonian,
    pub u: &'a dyn PotentialField,
}

impl Hamiltonian for Perturbed<'_> {
    fn base_dim(&self) -> usize {
        self.h.base_dim()
    }
    fn domain(&self) -> ChartDomain {
        self.h.domain()
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        let n = self.h.base_dim();
        self.h.value(x) + self.u.value(&x.rows(0, n).into_owned())
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = self.h.base_dim();
        let mut g = self.h.gradient(x);
        let du = self.u.gradient(&x.rows(0, n).into_owned());
        for k in 0..n {
            g[k] += du[k];
        }
        g
    }
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let n = self.h.base_dim();
        let mut hs = self.h.hessian(x);
        let d2u = self.u.hessian(&x.rows(0, n).into_owned());
        let mut blk = hs.view_mut((0, 0), (n, n));
        blk += d2u;
        hs
    }
}
