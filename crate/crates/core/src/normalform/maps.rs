//! The concrete base maps and generating functions used by the normal form.
//! Index `0` is `q_1`; indices `1..n` are `q_hat`.

use nalgebra::{DMatrix, DVector};

use super::chart::{BaseJet, BaseMap, Generator, GeneratorJet};
use crate::curves::Curve;

fn hat(q: &DVector<f64>) -> DVector<f64> {
    q.rows(1, q.len() - 1).into_owned()
}

fn col(m: &DMatrix<f64>) -> DVector<f64> {
    m.column(0).into_owned()
}

/// `phi(q) = Q(q_1) + N q_hat`: a curve `Q` with a fixed transverse frame `N`.
#[derive(Debug, Clone)]
pub struct StraightenMap {
    /// `n x 1` curve `Q(t)`.
    pub curve: Curve,
    /// `n x d` transverse frame.
    pub frame: DMatrix<f64>,
}

impl BaseMap for StraightenMap {
    fn dim(&self) -> usize {
        self.frame.nrows()
    }

    fn jet(&self, q: &DVector<f64>) -> BaseJet {
        let n = self.dim();
        let t = q[0];
        let mut jet = BaseJet::zeros(n);
        jet.value = col(&self.curve.value(t)) + &self.frame * hat(q);
        jet.f.set_column(0, &col(&self.curve.derivative(t, 1)));
        jet.f.view_mut((0, 1), (n, n - 1)).copy_from(&self.frame);
        jet.df[0].set_column(0, &col(&self.curve.derivative(t, 2)));
        jet.ddf[0][0].set_column(0, &col(&self.curve.derivative(t, 3)));
        jet
    }

    fn inverse_guess(&self, y: &DVector<f64>) -> DVector<f64> {
        let jet = self.jet(&DVector::zeros(self.dim()));
        jet.f
            .lu()
            .solve(&(y - &jet.value))
            .unwrap_or_else(|| DVector::zeros(self.dim()))
    }

    fn describe(&self) -> String {
        "projected orbit straightened to the first axis".into()
    }
}

/// Momentum `P(t)` of the orbit in a straightened chart.
#[derive(Debug, Clone)]
pub enum MomentumCurve {
    /// Interpolated directly.
    Sampled(Curve),
    /// `P = dphi(t e_1)^T p(t)` for the straightening `phi = Q(q_1) + N q_hat`
    /// and the interpolated original momentum `p(t)`. Both factors
    /// interpolate smooth orbit data, so the orbit stays on its energy level
    /// to interpolation accuracy.
    Transported {
        /// `n x 1` curve `Q(t)`.
        base: Curve,
        /// `n x d` frame `N`.
        frame: DMatrix<f64>,
        /// `n x 1` curve `p(t)`.
        momentum: Curve,
    },
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, exact to degree nine.
const GAUSS5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

impl MomentumCurve {
    pub fn dim(&self) -> usize {
        match self {
            MomentumCurve::Sampled(c) => c.shape().0,
            MomentumCurve::Transported { base, .. } => base.shape().0,
        }
    }

    /// `P` and its first three derivatives at `t`.
    pub fn derivatives(&self, t: f64) -> [DVector<f64>; 4] {
        match self {
            MomentumCurve::Sampled(c) => [0, 1, 2, 3].map(|k| col(&c.derivative(t, k))),
            MomentumCurve::Transported { base, frame, momentum } => {
                let p: Vec<DVector<f64>> = (0..4).map(|k| col(&momentum.derivative(t, k))).collect();
                let dq: Vec<DVector<f64>> = (1..5).map(|k| col(&base.derivative(t, k))).collect();
                const BINOM: [[f64; 4]; 4] = [[1.0, 0.0, 0.0, 0.0], [1.0, 1.0, 0.0, 0.0], [1.0, 2.0, 1.0, 0.0], [1.0, 3.0, 3.0, 1.0]];
                [0, 1, 2, 3].map(|k| {
                    let mut out = DVector::zeros(p[0].len());
                    out[0] = (0..=k).map(|j| BINOM[k][j] * dq[j].dot(&p[k - j])).sum();
                    out.rows_mut(1, frame.ncols()).copy_from(&(frame.transpose() * &p[k]));
                    out
                })
            }
        }
    }

    /// `int_0^t P_1`.
    pub fn first_integral(&self, t: f64) -> f64 {
        match self {
            MomentumCurve::Sampled(c) => c.integral(t)[(0, 0)] - c.integral(0.0)[(0, 0)],
            MomentumCurve::Transported { base, .. } => {
                // P_1 is a polynomial of degree nine on each grid interval.
                let g = base.grid();
                let h = g.step();
                let (lo, hi) = (t.min(0.0), t.max(0.0));
                let ka = ((lo - g.a) / h).floor() as i64;
                let kb = ((hi - g.a) / h).floor() as i64;
                let mut acc = 0.0;
                for k in ka..=kb {
                    let a = (g.a + k as f64 * h).max(lo);
                    let b = (g.a + (k + 1) as f64 * h).min(hi);
                    if b <= a {
                        continue;
                    }
                    let (m, r) = (0.5 * (a + b), 0.5 * (b - a));
                    acc += GAUSS5
                        .iter()
                        .map(|&(x, w)| w * r * self.derivatives(m + r * x)[0][0])
                        .sum::<f64>();
                }
                if t >= 0.0 {
                    acc
                } else {
                    -acc
                }
            }
        }
    }
}

/// `g(q) = v(q_1) + P_hat(q_1) . q_hat` with `v' = P_1`, `v(0) = 0`.
#[derive(Debug, Clone)]
pub struct MomentumGenerator {
    pub momentum: MomentumCurve,
}

impl Generator for MomentumGenerator {
    fn dim(&self) -> usize {
        self.momentum.dim()
    }

    fn value(&self, q: &DVector<f64>) -> f64 {
        let t = q[0];
        let [p, ..] = self.momentum.derivatives(t);
        self.momentum.first_integral(t) + hat(&p).dot(&hat(q))
    }

    fn jet(&self, q: &DVector<f64>, w: &DVector<f64>) -> GeneratorJet {
        let n = self.dim();
        let t = q[0];
        let qh = hat(q);
        let d = self.momentum.derivatives(t);
        let dh: Vec<DVector<f64>> = d.iter().map(hat).collect();
        let mut dg = d[0].clone();
        dg[0] += dh[1].dot(&qh);
        let mut ddg = DMatrix::zeros(n, n);
        ddg[(0, 0)] = d[1][0] + dh[2].dot(&qh);
        for j in 1..n {
            ddg[(0, j)] = dh[1][j - 1];
            ddg[(j, 0)] = dh[1][j - 1];
        }
        let mut c = DMatrix::zeros(n, n);
        c[(0, 0)] = w[0] * (d[2][0] + dh[3].dot(&qh)) + hat(w).dot(&dh[2]);
        for j in 1..n {
            c[(0, j)] = w[0] * dh[2][j - 1];
            c[(j, 0)] = c[(0, j)];
        }
        GeneratorJet {
            dg,
            ddg,
            dddg_w: c,
        }
    }

    fn describe(&self) -> String {
        "orbit momentum removed along the segment".into()
    }
}

/// `phi(q) = q_1 e_1 + Phi_hat(q_1) q_hat`, the flow box of the field
/// `d_p H(q, 0)` truncated at first order in `q_hat`.
#[derive(Debug, Clone)]
pub struct FlowBoxMap {
    /// `n x d` curve of the transverse columns of the linearized flow.
    pub phi_hat: Curve,
}

impl BaseMap for FlowBoxMap {
    fn dim(&self) -> usize {
        self.phi_hat.shape().0
    }

    fn jet(&self, q: &DVector<f64>) -> BaseJet {
        let n = self.dim();
        let t = q[0];
        let qh = hat(q);
        let d: Vec<DMatrix<f64>> = (0..4).map(|k| self.phi_hat.derivative(t, k)).collect();
        let mut jet = BaseJet::zeros(n);
        jet.value = &d[0] * &qh;
        jet.value[0] += t;
        let mut c0 = &d[1] * &qh;
        c0[0] += 1.0;
        jet.f.set_column(0, &c0);
        jet.f.view_mut((0, 1), (n, n - 1)).copy_from(&d[0]);
        jet.df[0].set_column(0, &(&d[2] * &qh));
        jet.df[0].view_mut((0, 1), (n, n - 1)).copy_from(&d[1]);
        jet.ddf[0][0].set_column(0, &(&d[3] * &qh));
        jet.ddf[0][0].view_mut((0, 1), (n, n - 1)).copy_from(&d[2]);
        for j in 1..n {
            jet.df[j].set_column(0, &d[1].column(j - 1));
            jet.ddf[0][j].set_column(0, &d[2].column(j - 1));
            jet.ddf[j][0].set_column(0, &d[2].column(j - 1));
        }
        jet
    }

    fn describe(&self) -> String {
        "flow box of the zero-section velocity field".into()
    }
}

/// `phi(q) = (q_1 + l(q_1) . q_hat, q_hat)`.
#[derive(Debug, Clone)]
pub struct ShearMap {
    /// `d x 1` curve `l(t)`.
    pub l: Curve,
}

impl BaseMap for ShearMap {
    fn dim(&self) -> usize {
        self.l.shape().0 + 1
    }

    fn jet(&self, q: &DVector<f64>) -> BaseJet {
        let n = self.dim();
        let t = q[0];
        let qh = hat(q);
        let d: Vec<DVector<f64>> = (0..4).map(|k| col(&self.l.derivative(t, k))).collect();
        let mut jet = BaseJet::zeros(n);
        jet.value = q.clone();
        jet.value[0] += d[0].dot(&qh);
        jet.f.fill_with_identity();
        jet.f[(0, 0)] += d[1].dot(&qh);
        jet.df[0][(0, 0)] = d[2].dot(&qh);
        jet.ddf[0][0][(0, 0)] = d[3].dot(&qh);
        for j in 1..n {
            jet.f[(0, j)] = d[0][j - 1];
            jet.df[0][(0, j)] = d[1][j - 1];
            jet.ddf[0][0][(0, j)] = d[2][j - 1];
            jet.df[j][(0, 0)] = d[1][j - 1];
            jet.ddf[0][j][(0, 0)] = d[2][j - 1];
            jet.ddf[j][0][(0, 0)] = d[2][j - 1];
        }
        jet
    }

    fn describe(&self) -> String {
        "shear removing the mixed p_1 p_hat fiber term".into()
    }
}

/// `phi(q) = (q_1, M(q_1) q_hat)`.
#[derive(Debug, Clone)]
pub struct MatrixMap {
    /// `d x d` curve `M(t)`.
    pub m: Curve,
}

impl BaseMap for MatrixMap {
    fn dim(&self) -> usize {
        self.m.shape().0 + 1
    }

    fn jet(&self, q: &DVector<f64>) -> BaseJet {
        let n = self.dim();
        let d = n - 1;
        let t = q[0];
        let qh = hat(q);
        let m: Vec<DMatrix<f64>> = (0..4).map(|k| self.m.derivative(t, k)).collect();
        let mut jet = BaseJet::zeros(n);
        jet.value[0] = t;
        jet.value.rows_mut(1, d).copy_from(&(&m[0] * &qh));
        jet.f[(0, 0)] = 1.0;
        jet.f.view_mut((1, 0), (d, 1)).copy_from(&(&m[1] * &qh));
        jet.f.view_mut((1, 1), (d, d)).copy_from(&m[0]);
        jet.df[0].view_mut((1, 0), (d, 1)).copy_from(&(&m[2] * &qh));
        jet.df[0].view_mut((1, 1), (d, d)).copy_from(&m[1]);
        jet.ddf[0][0].view_mut((1, 0), (d, 1)).copy_from(&(&m[3] * &qh));
        jet.ddf[0][0].view_mut((1, 1), (d, d)).copy_from(&m[2]);
        for j in 1..n {
            jet.df[j].view_mut((1, 0), (d, 1)).copy_from(&m[1].column(j - 1));
            jet.ddf[0][j].view_mut((1, 0), (d, 1)).copy_from(&m[2].column(j - 1));
            jet.ddf[j][0].view_mut((1, 0), (d, 1)).copy_from(&m[2].column(j - 1));
        }
        jet
    }

    fn inverse(&self, y: &DVector<f64>) -> Option<DVector<f64>> {
        let t = y[0];
        let qh = self.m.value(t).lu().solve(&hat(y))?;
        let mut q = y.clone();
        q.rows_mut(1, self.dim() - 1).copy_from(&qh);
        Some(q)
    }

    fn describe(&self) -> String {
        "transverse frame M(q_1) diagonalizing the vertical fiber Hessian".into()
    }
}

/// `g(q) = q_hat^T B(q_1) q_hat / 2` with `B = sym(D M^{-1} M')`.
#[derive(Debug, Clone)]
pub struct QuadraticGenerator {
    pub m: Curve,
    pub signs: DVector<f64>,
}

fn sym(a: DMatrix<f64>) -> DMatrix<f64> {
    (&a + a.transpose()) * 0.5
}

impl QuadraticGenerator {
    /// `[B, B', B'', B''']` at `t`.
    pub fn b_derivatives(&self, t: f64) -> [DMatrix<f64>; 4] {
        let m: Vec<DMatrix<f64>> = (0..5).map(|k| self.m.derivative(t, k)).collect();
        let dd = DMatrix::from_diagonal(&self.signs);
        let n = m[0].nrows();
        let y0 = m[0]
            .clone()
            .try_inverse()
            .unwrap_or_else(|| DMatrix::from_element(n, n, f64::NAN));
        let y1 = -(&y0 * &m[1] * &y0);
        let y2 = -(&y1 * &m[1] * &y0 + &y0 * &m[2] * &y0 + &y0 * &m[1] * &y1);
        let y3 = -(&y2 * &m[1] * &y0
            + &y1 * &m[2] * &y0 * 2.0
            + &y1 * &m[1] * &y1 * 2.0
            + &y0 * &m[3] * &y0
            + &y0 * &m[2] * &y1 * 2.0
            + &y0 * &m[1] * &y2);
        let b0 = &dd * (&y0 * &m[1]);
        let b1 = &dd * (&y1 * &m[1] + &y0 * &m[2]);
        let b2 = &dd * (&y2 * &m[1] + &y1 * &m[2] * 2.0 + &y0 * &m[3]);
        let b3 = &dd * (&y3 * &m[1] + &y2 * &m[2] * 3.0 + &y1 * &m[3] * 3.0 + &y0 * &m[4]);
        [sym(b0), sym(b1), sym(b2), sym(b3)]
    }

    /// `B(t) = D M^{-1} M'` before symmetrization.
    pub fn raw_b(&self, t: f64) -> DMatrix<f64> {
        let m0 = self.m.value(t);
        let m1 = self.m.derivative(t, 1);
        let dd = DMatrix::from_diagonal(&self.signs);
        let n = m0.nrows();
        dd * m0.try_inverse().unwrap_or_else(|| DMatrix::from_element(n, n, f64::NAN)) * m1
    }
}

impl Generator for QuadraticGenerator {
    fn dim(&self) -> usize {
        self.signs.len() + 1
    }

    fn value(&self, q: &DVector<f64>) -> f64 {
        let qh = hat(q);
        let b = self.b_derivatives(q[0]);
        0.5 * qh.dot(&(&b[0] * &qh))
    }

    fn jet(&self, q: &DVector<f64>, w: &DVector<f64>) -> GeneratorJet {
        let n = self.dim();
        let d = n - 1;
        let qh = hat(q);
        let wh = hat(w);
        let b = self.b_derivatives(q[0]);
        let bq: Vec<DVector<f64>> = b.iter().map(|bk| bk * &qh).collect();
        let mut dg = DVector::zeros(n);
        dg[0] = 0.5 * qh.dot(&bq[1]);
        dg.rows_mut(1, d).copy_from(&bq[0]);
        let mut ddg = DMatrix::zeros(n, n);
        ddg[(0, 0)] = 0.5 * qh.dot(&bq[2]);
        ddg.view_mut((0, 1), (1, d)).copy_from(&bq[1].transpose());
        ddg.view_mut((1, 0), (d, 1)).copy_from(&bq[1]);
        ddg.view_mut((1, 1), (d, d)).copy_from(&b[0]);
        let mut c = DMatrix::zeros(n, n);
        c[(0, 0)] = w[0] * 0.5 * qh.dot(&bq[3]) + wh.dot(&bq[2]);
        let c0 = &bq[2] * w[0] + &b[1] * &wh;
        c.view_mut((0, 1), (1, d)).copy_from(&c0.transpose());
        c.view_mut((1, 0), (d, 1)).copy_from(&c0);
        c.view_mut((1, 1), (d, d)).copy_from(&(&b[1] * w[0]));
        GeneratorJet { dg, ddg, dddg_w: c }
    }

    fn describe(&self) -> String {
        "quadratic correction restoring the vanishing q p_hat terms".into()
    }
}
