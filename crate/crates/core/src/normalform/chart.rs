use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::geometry::{ChartDomain, Hamiltonian};
use crate::linalg::jmat;

/// Second-order jet of a base map `phi` at a point, with third derivatives.
#[derive(Debug, Clone)]
pub struct BaseJet {
    pub value: DVector<f64>,
    /// `F = d phi`.
    pub f: DMatrix<f64>,
    /// `df[i] = d_i F`, so `d_i d_j phi_k = df[i][(k, j)]`.
    pub df: Vec<DMatrix<f64>>,
    /// `ddf[i][j] = d_i d_j F`.
    pub ddf: Vec<Vec<DMatrix<f64>>>,
}

impl BaseJet {
    pub fn zeros(n: usize) -> Self {
        Self {
            value: DVector::zeros(n),
            f: DMatrix::zeros(n, n),
            df: vec![DMatrix::zeros(n, n); n],
            ddf: vec![vec![DMatrix::zeros(n, n); n]; n],
        }
    }
}

/// A local diffeomorphism of the base, lifted to a homogeneous chart piece.
pub trait BaseMap: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn jet(&self, q: &DVector<f64>) -> BaseJet;

    fn apply(&self, q: &DVector<f64>) -> DVector<f64> {
        self.jet(q).value
    }

    /// Starting point for the Newton inversion of `y`.
    fn inverse_guess(&self, y: &DVector<f64>) -> DVector<f64> {
        y.clone()
    }

    /// Preimage of `y` by Newton's method, `None` if it does not converge.
    fn inverse(&self, y: &DVector<f64>) -> Option<DVector<f64>> {
        let mut q = self.inverse_guess(y);
        let scale = 1.0 + y.amax();
        for _ in 0..50 {
            let jet = self.jet(&q);
            let r = &jet.value - y;
            if r.amax() <= 1e-14 * scale {
                return Some(q);
            }
            let step = jet.f.lu().solve(&r)?;
            q -= &step;
            if step.amax() <= 1e-15 * (1.0 + q.amax()) {
                return Some(q);
            }
        }
        let r = self.apply(&q) - y;
        (r.amax() <= 1e-11 * scale).then_some(q)
    }

    fn describe(&self) -> String;
}

/// Derivatives of a generating function `g` for a vertical piece.
#[derive(Debug, Clone)]
pub struct GeneratorJet {
    pub dg: DVector<f64>,
    pub ddg: DMatrix<f64>,
    /// `sum_k w_k d_k d_i d_j g`.
    pub dddg_w: DMatrix<f64>,
}

/// A function on the base, lifted to the vertical piece `(q, p + dg(q))`.
pub trait Generator: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn value(&self, q: &DVector<f64>) -> f64;
    /// Derivatives at `q`; the third-derivative contraction uses `w`.
    fn jet(&self, q: &DVector<f64>, w: &DVector<f64>) -> GeneratorJet;
    fn describe(&self) -> String;
}

#[derive(Debug, Clone)]
pub enum ChartPiece {
    /// `(q, p) -> (phi(q), dphi(q)^{-T} p)`.
    Homogeneous(Arc<dyn BaseMap>),
    /// `(q, p) -> (q, p + dg(q))`.
    Vertical(Arc<dyn Generator>),
}

fn split(x: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let n = x.len() / 2;
    (x.rows(0, n).into_owned(), x.rows(n, n).into_owned())
}

fn join(q: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
    let n = q.len();
    let mut x = DVector::zeros(2 * n);
    x.rows_mut(0, n).copy_from(q);
    x.rows_mut(n, n).copy_from(p);
    x
}

fn inv_t(f: &DMatrix<f64>) -> DMatrix<f64> {
    let n = f.nrows();
    f.clone()
        .try_inverse()
        .map(|m| m.transpose())
        .unwrap_or_else(|| DMatrix::from_element(n, n, f64::NAN))
}

/// Jacobian blocks of a homogeneous piece: `A = F^{-T}`, `d_i A`.
struct HomogeneousParts {
    jet: BaseJet,
    a: DMatrix<f64>,
    da: Vec<DMatrix<f64>>,
}

fn homogeneous_parts(map: &dyn BaseMap, q: &DVector<f64>) -> HomogeneousParts {
    let jet = map.jet(q);
    let a = inv_t(&jet.f);
    let da = jet.df.iter().map(|dfi| -(&a * dfi.transpose() * &a)).collect();
    HomogeneousParts { jet, a, da }
}

impl ChartPiece {
    pub fn dim(&self) -> usize {
        match self {
            ChartPiece::Homogeneous(m) => m.dim(),
            ChartPiece::Vertical(g) => g.dim(),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            ChartPiece::Homogeneous(m) => format!("homogeneous: {}", m.describe()),
            ChartPiece::Vertical(g) => format!("vertical: {}", g.describe()),
        }
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        let (q, p) = split(x);
        match self {
            ChartPiece::Homogeneous(m) => {
                let jet = m.jet(&q);
                join(&jet.value, &(inv_t(&jet.f) * p))
            }
            ChartPiece::Vertical(g) => {
                let jet = g.jet(&q, &DVector::zeros(q.len()));
                join(&q, &(p + jet.dg))
            }
        }
    }

    pub fn inverse(&self, y: &DVector<f64>) -> Option<DVector<f64>> {
        let (qy, py) = split(y);
        match self {
            ChartPiece::Homogeneous(m) => {
                let q = m.inverse(&qy)?;
                let f = m.jet(&q).f;
                Some(join(&q, &(f.transpose() * py)))
            }
            ChartPiece::Vertical(g) => {
                let jet = g.jet(&qy, &DVector::zeros(qy.len()));
                Some(join(&qy, &(py - jet.dg)))
            }
        }
    }

    pub fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let n = self.dim();
        let (q, p) = split(x);
        let mut out = DMatrix::zeros(2 * n, 2 * n);
        match self {
            ChartPiece::Homogeneous(m) => {
                let parts = homogeneous_parts(m.as_ref(), &q);
                out.view_mut((0, 0), (n, n)).copy_from(&parts.jet.f);
                for (i, dai) in parts.da.iter().enumerate() {
                    out.view_mut((n, i), (n, 1)).copy_from(&(dai * &p));
                }
                out.view_mut((n, n), (n, n)).copy_from(&parts.a);
            }
            ChartPiece::Vertical(g) => {
                let jet = g.jet(&q, &DVector::zeros(n));
                out.fill_with_identity();
                out.view_mut((n, 0), (n, n)).copy_from(&jet.ddg);
            }
        }
        out
    }

    /// Gradient of `H o piece` at `x` from the gradient `g` of `H` at the image.
    pub fn pull_gradient(&self, x: &DVector<f64>, g: &DVector<f64>) -> DVector<f64> {
        self.jacobian(x).transpose() * g
    }

    /// Gradient and Hessian of `H o piece` at `x` from those of `H` at the
    /// image.
    pub fn pull_hessian(
        &self,
        x: &DVector<f64>,
        g: &DVector<f64>,
        hs: &DMatrix<f64>,
    ) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.dim();
        let (q, p) = split(x);
        let gy = g.rows(0, n).into_owned();
        let gp = g.rows(n, n).into_owned();
        match self {
            ChartPiece::Homogeneous(m) => {
                let parts = homogeneous_parts(m.as_ref(), &q);
                let mut jac = DMatrix::zeros(2 * n, 2 * n);
                jac.view_mut((0, 0), (n, n)).copy_from(&parts.jet.f);
                for (i, dai) in parts.da.iter().enumerate() {
                    jac.view_mut((n, i), (n, 1)).copy_from(&(dai * &p));
                }
                jac.view_mut((n, n), (n, n)).copy_from(&parts.a);
                let grad = jac.transpose() * g;
                let mut hess = jac.transpose() * hs * &jac;
                let a = &parts.a;
                for i in 0..n {
                    let dfi = &parts.jet.df[i];
                    for j in 0..n {
                        // d_i d_j A = -d_j A dF_i^T A - A ddF_ij^T A - A dF_i^T d_j A
                        let ddf = &parts.jet.ddf[i][j];
                        let dda = -(&parts.da[j] * dfi.transpose() * a)
                            - a * ddf.transpose() * a
                            - a * dfi.transpose() * &parts.da[j];
                        let t = (dfi.column(j).dot(&gy)) + gp.dot(&(dda * &p));
                        hess[(i, j)] += t;
                    }
                    let tqp = parts.da[i].transpose() * &gp;
                    for l in 0..n {
                        hess[(i, n + l)] += tqp[l];
                        hess[(n + l, i)] += tqp[l];
                    }
                }
                (grad, hess)
            }
            ChartPiece::Vertical(gen) => {
                let jet = gen.jet(&q, &gp);
                let mut jac = DMatrix::identity(2 * n, 2 * n);
                jac.view_mut((n, 0), (n, n)).copy_from(&jet.ddg);
                let grad = jac.transpose() * g;
                let mut hess = jac.transpose() * hs * &jac;
                let mut blk = hess.view_mut((0, 0), (n, n));
                blk += &jet.dddg_w;
                (grad, hess)
            }
        }
    }
}

/// Composition `Psi = P_1 o P_2 o ... o P_k` of fibered symplectic pieces,
/// mapping chart coordinates to the original phase space.
#[derive(Debug, Clone)]
pub struct FiberedChart {
    n: usize,
    /// Outermost piece first.
    pieces: Vec<ChartPiece>,
    /// The original coordinates' domain, used to wrap periodic coordinates.
    domain: ChartDomain,
    /// Half-length `delta` of the normalized segment.
    pub delta: f64,
    /// Tube radius around the segment `{t e_1}`.
    pub radius: f64,
}

impl FiberedChart {
    pub fn identity(n: usize, domain: ChartDomain) -> Self {
        Self {
            n,
            pieces: Vec::new(),
            domain,
            delta: f64::INFINITY,
            radius: f64::INFINITY,
        }
    }

    pub fn base_dim(&self) -> usize {
        self.n
    }

    pub fn pieces(&self) -> &[ChartPiece] {
        &self.pieces
    }

    pub fn domain(&self) -> &ChartDomain {
        &self.domain
    }

    /// Appends a piece applied before (inside) the existing ones.
    pub fn push_inner(&mut self, piece: ChartPiece) {
        assert_eq!(piece.dim(), self.n, "chart piece dimension mismatch");
        self.pieces.push(piece);
    }

    /// Intermediate points: `xs[k]` is the input of piece `k`; the last entry
    /// is the image in original coordinates.
    fn trace(&self, x: &DVector<f64>) -> Vec<DVector<f64>> {
        let m = self.pieces.len();
        let mut xs = vec![DVector::zeros(0); m + 1];
        let mut cur = x.clone();
        for k in (0..m).rev() {
            xs[k] = cur.clone();
            cur = self.pieces[k].apply(&cur);
        }
        xs[m] = cur;
        xs
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        self.trace(x).pop().expect("trace is never empty")
    }

    /// Chart coordinates of an original point, `None` outside the chart.
    pub fn inverse(&self, y: &DVector<f64>) -> Option<DVector<f64>> {
        let mut cur = self.unwrap_point(y);
        for piece in &self.pieces {
            cur = piece.inverse(&cur)?;
        }
        Some(cur)
    }

    /// Brings periodic coordinates of `y` next to the chart's base origin.
    fn unwrap_point(&self, y: &DVector<f64>) -> DVector<f64> {
        let origin = self.apply(&DVector::zeros(2 * self.n));
        let mut delta = y - &origin;
        self.domain.wrap_phase_delta(&mut delta);
        origin + delta
    }

    pub fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let xs = self.trace(x);
        let mut jac = DMatrix::identity(2 * self.n, 2 * self.n);
        for (k, piece) in self.pieces.iter().enumerate().rev() {
            jac = piece.jacobian(&xs[k]) * jac;
        }
        jac
    }

    /// `|dPsi^T J dPsi - J|_inf` at `x`.
    pub fn symplectic_residual(&self, x: &DVector<f64>) -> f64 {
        let j = jmat(self.n);
        let d = self.jacobian(x);
        crate::linalg::max_abs(&(d.transpose() * &j * &d - j))
    }

    /// Composite base map with its first and second derivatives:
    /// `(phi(q), dphi(q), [Hessian of phi_k])`.
    pub fn base_jet(&self, q: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>, Vec<DMatrix<f64>>) {
        let n = self.n;
        let mut val = q.clone();
        let mut f = DMatrix::identity(n, n);
        let mut hess = vec![DMatrix::zeros(n, n); n];
        for piece in self.pieces.iter().rev() {
            if let ChartPiece::Homogeneous(m) = piece {
                let jet = m.jet(&val);
                // Hessians of the outer map a at the current point.
                let ha: Vec<DMatrix<f64>> = (0..n)
                    .map(|k| DMatrix::from_fn(n, n, |i, j| jet.df[i][(k, j)]))
                    .collect();
                let new_hess = (0..n)
                    .map(|k| {
                        let mut h = f.transpose() * &ha[k] * &f;
                        for l in 0..n {
                            h += &hess[l] * jet.f[(k, l)];
                        }
                        h
                    })
                    .collect();
                f = &jet.f * f;
                hess = new_hess;
                val = jet.value;
            }
        }
        (val, f, hess)
    }

    /// Base point of an original base point, `None` outside the chart.
    pub fn base_inverse(&self, y: &DVector<f64>) -> Option<DVector<f64>> {
        let n = self.n;
        let mut x = DVector::zeros(2 * n);
        x.rows_mut(0, n).copy_from(y);
        let mut cur = self.unwrap_point(&x).rows(0, n).into_owned();
        for piece in &self.pieces {
            if let ChartPiece::Homogeneous(m) = piece {
                cur = m.inverse(&cur)?;
            }
        }
        Some(cur)
    }

    /// `H o Psi` as a Hamiltonian in chart coordinates.
    pub fn pullback<'a>(&'a self, h: &'a dyn Hamiltonian) -> ChartHamiltonian<'a> {
        ChartHamiltonian { h, chart: self }
    }
}

/// `H o Psi` with chain-rule derivatives through the chart pieces.
pub struct ChartHamiltonian<'a> {
    h: &'a dyn Hamiltonian,
    chart: &'a FiberedChart,
}

impl ChartHamiltonian<'_> {
    pub fn chart(&self) -> &FiberedChart {
        self.chart
    }
}

impl Hamiltonian for ChartHamiltonian<'_> {
    fn base_dim(&self) -> usize {
        self.chart.n
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        self.h.value(&self.chart.apply(x))
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let xs = self.chart.trace(x);
        let m = self.chart.pieces.len();
        let mut g = self.h.gradient(&xs[m]);
        for k in 0..m {
            g = self.chart.pieces[k].pull_gradient(&xs[k], &g);
        }
        g
    }

    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let xs = self.chart.trace(x);
        let m = self.chart.pieces.len();
        let mut g = self.h.gradient(&xs[m]);
        let mut hs = self.h.hessian(&xs[m]);
        for k in 0..m {
            let (g2, h2) = self.chart.pieces[k].pull_hessian(&xs[k], &g, &hs);
            g = g2;
            hs = h2;
        }
        hs
    }
}
