//! The five construction steps. Each reads the Hamiltonian in the current
//! chart and returns the piece(s) to append on the inside.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::chart::ChartPiece;
use super::maps::{FlowBoxMap, MatrixMap, MomentumCurve, MomentumGenerator, QuadraticGenerator, ShearMap, StraightenMap};
use crate::curves::{Curve, Grid};
use crate::error::{Error, Result};
use crate::linalg::block;
use crate::geometry::{Hamiltonian, PhasePoint};
use crate::ode::solve_on_lattice;

/// Grid intervals per `delta` for large segments.
pub const NODES_PER_DELTA: usize = 64;
/// Fewest grid intervals per `delta`.
pub const MIN_NODES_PER_DELTA: usize = 8;
/// Preferred smallest grid step. Third derivatives of the interpolants carry
/// rounding noise of order `eps / h^3`, which enters the chart Hessians.
pub const MIN_STEP: f64 = 4e-3;
/// The curves extend past `[-delta, delta]` by this factor.
pub const GRID_OVERHANG: f64 = 1.25;

/// The curve grid for a segment of half-length `delta`: symmetric about
/// `t = 0`, which is a node.
pub fn segment_grid(delta: f64) -> Result<Grid> {
    let h = (delta / NODES_PER_DELTA as f64).max((delta / MIN_NODES_PER_DELTA as f64).min(MIN_STEP));
    let half = (GRID_OVERHANG * delta / h).ceil() as usize;
    Grid::new(-(half as f64) * h, half as f64 * h, 2 * half)
}

/// `(t e_1, 0)`.
pub fn segment_point(n: usize, t: f64) -> DVector<f64> {
    let mut x = DVector::zeros(2 * n);
    x[0] = t;
    x
}

/// Fixed substeps per grid interval for the lattice integrations.
const SUBSTEPS: usize = 16;

/// ODE solution at the grid nodes `-3..=n+3`, the range read by
/// [`Curve::from_samples`]. The grid must have a node at `t = 0`.
struct Lattice {
    grid: Grid,
    states: Vec<DVector<f64>>,
}

impl Lattice {
    fn new(f: impl Fn(f64, &DVector<f64>) -> Result<DVector<f64>>, y0: DVector<f64>, grid: Grid) -> Result<Self> {
        let half = grid.n / 2 + 3;
        let states = solve_on_lattice(f, y0, grid.step(), half, half, SUBSTEPS)?;
        Ok(Self { grid, states })
    }

    /// State at grid node `i`, `-3 <= i <= n + 3`.
    fn node(&self, i: isize) -> &DVector<f64> {
        &self.states[(i + 3) as usize]
    }

    /// State at a grid node given by its time.
    fn at(&self, t: f64) -> &DVector<f64> {
        let i = ((t - self.grid.a) / self.grid.step()).round() as isize;
        self.node(i)
    }
}

/// Orthonormal complement of the unit vector `u` via the Householder
/// reflection taking `e_1` to `u`.
fn orthonormal_complement(u: &DVector<f64>) -> DMatrix<f64> {
    let n = u.len();
    let mut e1 = DVector::zeros(n);
    e1[0] = 1.0;
    let v = &e1 - u;
    let refl = if v.norm() < 1e-14 {
        DMatrix::identity(n, n)
    } else {
        let v = v.normalize();
        DMatrix::identity(n, n) - &v * v.transpose() * 2.0
    };
    refl.columns(1, n - 1).into_owned()
}

/// Straightens the projected orbit through `x0` to `t e_1`, with `q_1` the
/// orbit's time.
/// Output of [`straighten_projection`].
#[derive(Debug, Clone)]
pub struct Straightening {
    pub piece: ChartPiece,
    /// The orbit's momentum in the straightened chart.
    pub momentum: MomentumCurve,
}

pub fn straighten_projection(h: &dyn Hamiltonian, x0: &PhasePoint, delta: f64) -> Result<Straightening> {
    const STEP: &str = "straighten_projection";
    let n = h.base_dim();
    let x = x0.to_vector();
    let g = h.try_gradient(&x)?;
    let speed = g.rows(n, n).norm();
    if speed <= 1e-10 * (1.0 + g.norm()) {
        return Err(Error::HypothesisViolation {
            step: STEP.into(),
            t: 0.0,
            detail: format!("projected velocity vanishes at the base point (|d_p H| = {speed:e})"),
        });
    }
    let grid = segment_grid(delta)?;
    let f = move |_: f64, y: &DVector<f64>| -> Result<DVector<f64>> {
        let g = h.try_gradient(y)?;
        let mut out = DVector::zeros(2 * n);
        out.rows_mut(0, n).copy_from(&g.rows(n, n));
        out.rows_mut(n, n).copy_from(&(-g.rows(0, n)));
        Ok(out)
    };
    let orbit = Lattice::new(f, x.clone(), grid)?;
    let jets = grid
        .nodes()
        .iter()
        .map(|&t| {
            let y = orbit.at(t);
            let g = h.try_gradient(y)?;
            let hs = h.try_hessian(y)?;
            let hp = g.rows(n, n).into_owned();
            let hq = g.rows(0, n).into_owned();
            let pdot = -hq;
            let qddot = block(&hs, n, 0, n, n) * &hp + block(&hs, n, n, n, n) * &pdot;
            let pddot = -(block(&hs, 0, 0, n, n) * &hp + block(&hs, 0, n, n, n) * &pdot);
            let c = |v: &DVector<f64>| DMatrix::from_column_slice(n, 1, v.as_slice());
            Ok((
                [c(&y.rows(0, n).into_owned()), c(&hp), c(&qddot)],
                [c(&y.rows(n, n).into_owned()), c(&pdot), c(&pddot)],
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let (qjets, pjets): (Vec<_>, Vec<_>) = jets.into_iter().unzip();
    let curve = Curve::from_jets(grid, qjets)?;
    let momentum = Curve::from_jets(grid, pjets)?;
    let v0 = curve.derivative(0.0, 1).column(0).into_owned();
    let u0 = v0.normalize();
    for t in grid.nodes() {
        let along = curve.derivative(t, 1).column(0).dot(&u0);
        if along < 0.5 * v0.norm() {
            return Err(Error::ConstructionFailure {
                step: STEP.into(),
                detail: format!("projected orbit turns too far from its initial direction at t = {t:.6}"),
            });
        }
    }
    let frame = orthonormal_complement(&u0);
    Ok(Straightening {
        momentum: MomentumCurve::Transported {
            base: curve.clone(),
            frame: frame.clone(),
            momentum,
        },
        piece: ChartPiece::Homogeneous(Arc::new(StraightenMap { curve, frame })),
    })
}

/// Removes the orbit's momentum `P(t)` by the vertical piece with generator
/// `v(q_1) + P_hat(q_1) . q_hat`, `v' = P_1`.
pub fn vertical_normalization(momentum: MomentumCurve) -> ChartPiece {
    ChartPiece::Vertical(Arc::new(MomentumGenerator { momentum }))
}

/// Momentum of the orbit through `x_chart` in a chart where its projection
/// is already `t e_1`. It solves `P' = -d_q H(t e_1, P)` with the base pinned
/// to the segment.
pub fn chart_momentum(h_chart: &dyn Hamiltonian, x_chart: &DVector<f64>, delta: f64) -> Result<MomentumCurve> {
    const STEP: &str = "vertical_normalization";
    let n = h_chart.base_dim();
    let grid = segment_grid(delta)?;
    if x_chart.rows(0, n).amax() > 1e-10 {
        return Err(Error::ConstructionFailure {
            step: STEP.into(),
            detail: format!("base point is not the chart origin (offset {:e})", x_chart.rows(0, n).amax()),
        });
    }
    let state = move |t: f64, p: &DVector<f64>| {
        let mut x = segment_point(n, t);
        x.rows_mut(n, n).copy_from(p);
        x
    };
    let f = move |t: f64, p: &DVector<f64>| -> Result<DVector<f64>> {
        Ok(-h_chart.try_gradient(&state(t, p))?.rows(0, n).into_owned())
    };
    let p0 = x_chart.rows(n, n).into_owned();
    let sol = Lattice::new(f, p0, grid)?;
    let jets = grid
        .nodes()
        .iter()
        .map(|&t| {
            let p = sol.at(t);
            let x = state(t, p);
            let g = h_chart.try_gradient(&x)?;
            let mut drift = g.rows(n, n).into_owned();
            drift[0] -= 1.0;
            if t.abs() <= delta && drift.amax() > 1e-8 {
                return Err(Error::ConstructionFailure {
                    step: STEP.into(),
                    detail: format!("projected orbit is not t e_1 at t = {t:.6} (velocity error {:e})", drift.amax()),
                });
            }
            let hs = h_chart.try_hessian(&x)?;
            let pdot = -g.rows(0, n).into_owned();
            let pddot = -(hs.column(0).rows(0, n).into_owned() + block(&hs, 0, n, n, n) * &pdot);
            Ok([
                DMatrix::from_column_slice(n, 1, p.as_slice()),
                DMatrix::from_column_slice(n, 1, pdot.as_slice()),
                DMatrix::from_column_slice(n, 1, pddot.as_slice()),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MomentumCurve::Sampled(Curve::from_jets(grid, jets)?))
}

/// Flow box of `V(q) = d_p H(q, 0)` to first order in `q_hat`.
pub fn flowbox_normalization(h_chart: &dyn Hamiltonian, delta: f64) -> Result<ChartPiece> {
    const STEP: &str = "flowbox_normalization";
    let n = h_chart.base_dim();
    let grid = segment_grid(delta)?;
    for t in grid.nodes() {
        let g = h_chart.try_gradient(&segment_point(n, t))?;
        let mut v = g.rows(n, n).into_owned();
        v[0] -= 1.0;
        if v.amax() > 1e-7 {
            return Err(Error::HypothesisViolation {
                step: STEP.into(),
                t,
                detail: format!("zero-section velocity differs from e_1 by {:e}", v.amax()),
            });
        }
    }
    let f = move |t: f64, y: &DVector<f64>| -> Result<DVector<f64>> {
        let hs = h_chart.try_hessian(&segment_point(n, t))?;
        let a = block(&hs, n, 0, n, n);
        let phi = DMatrix::from_column_slice(n, n, y.as_slice());
        Ok(DVector::from_column_slice((a * phi).as_slice()))
    };
    let id = DVector::from_column_slice(DMatrix::<f64>::identity(n, n).as_slice());
    let sol = Lattice::new(f, id, grid)?;
    let phi_hat = Curve::from_samples(grid, |t| {
        let phi = DMatrix::from_column_slice(n, n, sol.at(t).as_slice());
        Ok(phi.columns(1, n - 1).into_owned())
    })?;
    for t in grid.nodes() {
        let mut full = DMatrix::identity(n, n);
        full.view_mut((0, 1), (n, n - 1)).copy_from(&phi_hat.value(t));
        if full.determinant().abs() < 1e-8 {
            return Err(Error::ConstructionFailure {
                step: STEP.into(),
                detail: format!("flow box frame degenerates at t = {t:.6}"),
            });
        }
    }
    Ok(ChartPiece::Homogeneous(Arc::new(FlowBoxMap { phi_hat })))
}

/// Singularity threshold for `d2_{p_hat p_hat} H`.
fn invertibility_floor(a: &DMatrix<f64>) -> f64 {
    1e-9 * (1.0 + a.amax()).powi(a.nrows() as i32)
}

/// Vertical fiber Hessian `d2_{p_hat p_hat} H(t e_1, 0)`.
fn vertical_hessian(h_chart: &dyn Hamiltonian, t: f64) -> Result<DMatrix<f64>> {
    let n = h_chart.base_dim();
    let hs = h_chart.try_hessian(&segment_point(n, t))?;
    Ok(block(&hs, n + 1, n + 1, n - 1, n - 1))
}

fn check_invertible(step: &str, a: &DMatrix<f64>, t: f64) -> Result<()> {
    let det = a.determinant();
    if det.abs() <= invertibility_floor(a) {
        return Err(Error::HypothesisViolation {
            step: step.into(),
            t,
            detail: format!("vertical fiber Hessian is singular (det = {det:e})"),
        });
    }
    Ok(())
}

/// Shear `q_1 -> q_1 + l(q_1) . q_hat` removing `d2_{p_1 p_hat} H(t e_1, 0)`.
pub fn shear_normalization(h_chart: &dyn Hamiltonian, delta: f64) -> Result<ChartPiece> {
    const STEP: &str = "shear_normalization";
    let n = h_chart.base_dim();
    let grid = segment_grid(delta)?;
    let l = Curve::from_samples(grid, |t| {
        let hs = h_chart.try_hessian(&segment_point(n, t))?;
        let a = block(&hs, n + 1, n + 1, n - 1, n - 1);
        let c = block(&hs, n + 1, n, n - 1, 1);
        check_invertible(STEP, &a, t)?;
        a.lu().solve(&c).ok_or_else(|| Error::HypothesisViolation {
            step: STEP.into(),
            t,
            detail: "vertical fiber Hessian is singular".into(),
        })
    })?;
    Ok(ChartPiece::Homogeneous(Arc::new(ShearMap { l })))
}

/// Result of [`diagonalize_vertical_hessian`].
#[derive(Debug, Clone)]
pub struct Diagonalization {
    pub matrix_piece: ChartPiece,
    pub quadratic_piece: ChartPiece,
    /// Diagonal of `D`, `+1` entries first.
    pub signs: DVector<f64>,
    /// `max |M D M^T - A|` over the grid nodes in `[-delta, delta]`.
    pub congruence_residual: f64,
    /// `max |B - B^T|` for `B = D M^{-1} M'` over the same nodes.
    pub b_asymmetry: f64,
}

/// Signs of the eigenvalues of `a`, positive first, and `M(0) = Q |L|^{1/2}`
/// with columns in the same order.
fn signature_factor(a: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(a.clone());
    let d = a.nrows();
    let mut idx: Vec<usize> = (0..d).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap_or(std::cmp::Ordering::Equal));
    let signs = DVector::from_iterator(d, idx.iter().map(|&i| eig.eigenvalues[i].signum()));
    let mut m = DMatrix::zeros(d, d);
    for (k, &i) in idx.iter().enumerate() {
        m.set_column(k, &(eig.eigenvectors.column(i) * eig.eigenvalues[i].abs().sqrt()));
    }
    (signs, m)
}

/// Brings `d2_{p_hat p_hat} H(t e_1, 0)` to the constant `D` by the frame
/// `M(q_1)` solving `M' = A'(M^T)^{-1} D / 2`, then restores the vanishing
/// mixed terms with `u = q_hat^T B(q_1) q_hat / 2`.
pub fn diagonalize_vertical_hessian(h_chart: &dyn Hamiltonian, delta: f64) -> Result<Diagonalization> {
    const STEP: &str = "diagonalize_vertical_hessian";
    let n = h_chart.base_dim();
    let d = n - 1;
    let grid = segment_grid(delta)?;
    let a_curve = Curve::from_samples(grid, |t| {
        let a = vertical_hessian(h_chart, t)?;
        check_invertible(STEP, &a, t)?;
        Ok(a)
    })?;
    let (signs, m0) = signature_factor(&a_curve.value(0.0));
    let dd = DMatrix::from_diagonal(&signs);
    let inv_t = |m: &DMatrix<f64>, t: f64| -> Result<DMatrix<f64>> {
        m.transpose().try_inverse().ok_or_else(|| Error::HypothesisViolation {
            step: STEP.into(),
            t,
            detail: "frame M lost invertibility".into(),
        })
    };
    let rhs = |t: f64, y: &DVector<f64>| -> Result<DVector<f64>> {
        let m = DMatrix::from_column_slice(d, d, y.as_slice());
        let dm = a_curve.derivative(t, 1) * inv_t(&m, t)? * &dd * 0.5;
        Ok(DVector::from_column_slice(dm.as_slice()))
    };
    let sol = Lattice::new(rhs, DVector::from_column_slice(m0.as_slice()), grid)?;
    let jets = grid
        .nodes()
        .iter()
        .map(|&t| {
            let m = DMatrix::from_column_slice(d, d, sol.at(t).as_slice());
            let w = inv_t(&m, t)?;
            let a1 = a_curve.derivative(t, 1);
            let a2 = a_curve.derivative(t, 2);
            let m1 = &a1 * &w * &dd * 0.5;
            let m2 = (&a2 * &w * &dd - &a1 * &w * m1.transpose() * &w * &dd) * 0.5;
            Ok([m, m1, m2])
        })
        .collect::<Result<Vec<_>>>()?;
    let m_curve = Curve::from_jets(grid, jets)?;
    let gen = QuadraticGenerator {
        m: m_curve.clone(),
        signs: signs.clone(),
    };
    let mut congruence_residual = 0.0f64;
    let mut b_asymmetry = 0.0f64;
    for t in grid.nodes().into_iter().filter(|t| t.abs() <= delta * (1.0 + 1e-12)) {
        let m = m_curve.value(t);
        let r = &m * &dd * m.transpose() - a_curve.value(t);
        congruence_residual = congruence_residual.max(r.amax());
        let b = gen.raw_b(t);
        b_asymmetry = b_asymmetry.max((&b - b.transpose()).amax());
    }
    Ok(Diagonalization {
        matrix_piece: ChartPiece::Homogeneous(Arc::new(MatrixMap { m: m_curve })),
        quadratic_piece: ChartPiece::Vertical(Arc::new(gen)),
        signs,
        congruence_residual,
        b_asymmetry,
    })
}
