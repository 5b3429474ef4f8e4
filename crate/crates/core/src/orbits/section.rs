use nalgebra::{DMatrix, DVector};

use super::PeriodicOrbit;
use crate::error::{Error, Result};
use crate::flow::propagate_tangents;
use crate::geometry::{symplectic_gradient, Hamiltonian, Perturbed, PotentialField};
use crate::linalg::{eigenvalues, jmat, SympMatrix};

/// `omega(u, v) = u^T J v`.
fn omega(u: &DVector<f64>, v: &DVector<f64>) -> f64 {
    let n = u.len() / 2;
    let mut s = 0.0;
    for i in 0..n {
        s += u[i] * v[n + i] - u[n + i] * v[i];
    }
    s
}

/// A hyperplane section through `theta(t0)` with a symplectic basis of
/// `ker(normal) ∩ ker(dH)`. Columns `0..d` of `basis` are `e_1..e_d`,
/// columns `d..2d` are `f_1..f_d`, with `omega(e_i, f_j) = delta_ij`.
#[derive(Debug, Clone)]
pub struct SectionFrame {
    pub t0: f64,
    pub anchor: DVector<f64>,
    /// Covector `n` of the section `{n . (x - anchor) = 0}`.
    pub normal: DVector<f64>,
    pub basis: DMatrix<f64>,
}

const TANGENCY_TOL: f64 = 1e-12;
const GRAM_TOL: f64 = 1e-10;

impl SectionFrame {
    /// Section `{Q'(t0) . (q - Q(t0)) = 0}` with a basis built from the
    /// coordinate vectors.
    pub fn at_time(h: &dyn Hamiltonian, orbit: &PeriodicOrbit, t0: f64) -> Result<Self> {
        let n = h.base_dim();
        let x = orbit.state(t0);
        let g = h.try_gradient(&x)?;
        let mut normal = DVector::zeros(2 * n);
        let qdot = g.rows(n, n);
        let norm = qdot.norm();
        if norm == 0.0 {
            return Err(Error::Tangency { component: 0.0 });
        }
        normal.rows_mut(0, n).copy_from(&(qdot / norm));
        Self::with_normal(h, orbit, t0, normal)
    }

    /// Section with a prescribed normal covector.
    pub fn with_normal(
        h: &dyn Hamiltonian,
        orbit: &PeriodicOrbit,
        t0: f64,
        normal: DVector<f64>,
    ) -> Result<Self> {
        let anchor = orbit.state(t0);
        let basis = generic_basis(h, &anchor, &normal)?;
        Ok(Self {
            t0,
            anchor,
            normal,
            basis,
        })
    }

    /// Section with an explicit basis, validated against the frame invariants.
    pub fn with_basis(
        h: &dyn Hamiltonian,
        orbit: &PeriodicOrbit,
        t0: f64,
        normal: DVector<f64>,
        basis: DMatrix<f64>,
    ) -> Result<Self> {
        let anchor = orbit.state(t0);
        let f = symplectic_gradient(&h.try_gradient(&anchor)?);
        check_transverse(&normal, &f)?;
        let frame = Self {
            t0,
            anchor,
            normal,
            basis,
        };
        let res = frame.residuals(h);
        if res.0 > 1e-8 || res.1 > GRAM_TOL {
            return Err(Error::InvalidArgument(format!(
                "basis violates frame invariants: annihilation {:e}, Gram {:e}",
                res.0, res.1
            )));
        }
        Ok(frame)
    }

    pub fn d(&self) -> usize {
        self.basis.ncols() / 2
    }

    /// `(max |dH . v|, max |n . v|)` over basis vectors relative to their
    /// norms, and `|Gram - J|_inf`.
    pub fn residuals(&self, h: &dyn Hamiltonian) -> (f64, f64) {
        let g = h.gradient(&self.anchor);
        let gn = g.norm().max(1e-300);
        let nn = self.normal.norm().max(1e-300);
        let mut ann = 0.0f64;
        for c in self.basis.column_iter() {
            let c = c.into_owned();
            let cn = c.norm().max(1e-300);
            ann = ann.max((g.dot(&c) / (gn * cn)).abs());
            ann = ann.max((self.normal.dot(&c) / (nn * cn)).abs());
        }
        let gram = self.gram();
        let j = jmat(self.d());
        (ann, crate::linalg::max_abs(&(gram - j)))
    }

    /// `omega(b_i, b_j)` over the basis.
    pub fn gram(&self) -> DMatrix<f64> {
        let k = self.basis.ncols();
        DMatrix::from_fn(k, k, |i, j| {
            omega(
                &self.basis.column(i).into_owned(),
                &self.basis.column(j).into_owned(),
            )
        })
    }

    /// Coordinates `(a, b)` of a vector in `span(basis)`:
    /// `a_k = omega(v, f_k)`, `b_k = -omega(v, e_k)`.
    pub fn coordinates(&self, v: &DVector<f64>) -> DVector<f64> {
        let d = self.d();
        DVector::from_fn(2 * d, |i, _| {
            if i < d {
                omega(v, &self.basis.column(d + i).into_owned())
            } else {
                -omega(v, &self.basis.column(i - d).into_owned())
            }
        })
    }
}

fn check_transverse(normal: &DVector<f64>, f: &DVector<f64>) -> Result<()> {
    let comp = normal.dot(f);
    if comp.abs() < TANGENCY_TOL * normal.norm() * f.norm() || f.norm() == 0.0 {
        let rel = if f.norm() > 0.0 {
            comp / (normal.norm() * f.norm())
        } else {
            0.0
        };
        return Err(Error::Tangency { component: rel });
    }
    Ok(())
}

/// Projects coordinate vectors onto `ker n ∩ ker dH` along
/// `span(X_H, J n)` and runs a symplectic Gram-Schmidt with pivoting.
fn generic_basis(h: &dyn Hamiltonian, x: &DVector<f64>, normal: &DVector<f64>) -> Result<DMatrix<f64>> {
    let n = h.base_dim();
    let m = 2 * n;
    let d = n - 1;
    let g = h.try_gradient(x)?;
    let f = symplectic_gradient(&g);
    check_transverse(normal, &f)?;
    let jn = symplectic_gradient(normal);
    let gjn = g.dot(&jn);
    let nf = normal.dot(&f);
    let project = |v: DVector<f64>| -> DVector<f64> {
        let beta = g.dot(&v) / gjn;
        let alpha = normal.dot(&v) / nf;
        v - &f * alpha - &jn * beta
    };
    let skip = (0..n)
        .max_by(|&a, &b| {
            let sa = normal[a].abs() + normal[n + a].abs();
            let sb = normal[b].abs() + normal[n + b].abs();
            sa.partial_cmp(&sb).unwrap_or(std::cmp::Ordering::Equal)
        })
        .unwrap();
    let mut pool: Vec<DVector<f64>> = Vec::with_capacity(2 * d);
    for i in (0..n).filter(|&i| i != skip) {
        let mut e = DVector::zeros(m);
        e[i] = 1.0;
        pool.push(project(e));
    }
    for i in (0..n).filter(|&i| i != skip) {
        let mut e = DVector::zeros(m);
        e[n + i] = 1.0;
        pool.push(project(e));
    }
    let mut es: Vec<DVector<f64>> = Vec::new();
    let mut fs: Vec<DVector<f64>> = Vec::new();
    let orth = |v: &DVector<f64>, es: &[DVector<f64>], fs: &[DVector<f64>]| {
        let mut w = v.clone();
        for (e, f) in es.iter().zip(fs) {
            w = &w - e * omega(v, f) + f * omega(v, e);
        }
        w
    };
    for _ in 0..d {
        let mut cands: Vec<DVector<f64>> = pool.iter().map(|v| orth(v, &es, &fs)).collect();
        // First remaining candidate with non-negligible size becomes e.
        let ei = (0..cands.len())
            .find(|&i| cands[i].norm() > 1e-8)
            .ok_or_else(|| Error::InvalidArgument("section basis degenerate".into()))?;
        let e = cands.remove(ei);
        pool.remove(ei);
        let (fi, w) = cands
            .iter()
            .enumerate()
            .map(|(i, c)| (i, omega(&e, c)))
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap_or(std::cmp::Ordering::Equal))
            .ok_or_else(|| Error::InvalidArgument("section basis degenerate".into()))?;
        if w.abs() < 1e-10 {
            return Err(Error::InvalidArgument(
                "restricted symplectic form is degenerate on the section".into(),
            ));
        }
        let fvec = &cands[fi] / w;
        pool.remove(fi);
        es.push(e);
        fs.push(fvec);
    }
    let mut basis = DMatrix::zeros(m, 2 * d);
    for k in 0..d {
        basis.set_column(k, &es[k]);
        basis.set_column(d + k, &fs[k]);
    }
    Ok(basis)
}

/// Restricted linearized return map of `H + u` in the frame basis, over one
/// minimal period of the orbit.
pub fn restricted_return_map(
    h: &dyn Hamiltonian,
    orbit: &PeriodicOrbit,
    frame: &SectionFrame,
    u: Option<&dyn PotentialField>,
) -> Result<SympMatrix> {
    let l = match u {
        Some(u) => return_matrix(&Perturbed { h, u }, orbit, frame)?,
        None => return_matrix(h, orbit, frame)?,
    };
    SympMatrix::new(l, 1e-6)
}

fn return_matrix(h: &dyn Hamiltonian, orbit: &PeriodicOrbit, frame: &SectionFrame) -> Result<DMatrix<f64>> {
    let f0 = symplectic_gradient(&h.try_gradient(&frame.anchor)?);
    check_transverse(&frame.normal, &f0)?;
    let (xt, v) = propagate_tangents(
        h,
        &frame.anchor,
        &frame.basis,
        orbit.minimal_period,
        &orbit.flow_config,
    )?;
    let ft = symplectic_gradient(&h.try_gradient(&xt)?);
    let nf = frame.normal.dot(&ft);
    check_transverse(&frame.normal, &ft)?;
    let d = frame.d();
    let mut l = DMatrix::zeros(2 * d, 2 * d);
    for k in 0..2 * d {
        let col = v.column(k).into_owned();
        let landed = &col - &ft * (frame.normal.dot(&col) / nf);
        l.set_column(k, &frame.coordinates(&landed));
    }
    Ok(l)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NondegeneracyVerdict {
    pub verdict: bool,
    pub distance_to_1: f64,
    pub eigenvalues: Vec<(f64, f64)>,
}

/// `1` is not an eigenvalue of `L` (distance above `tol`).
pub fn orbit_nondegenerate(l: &SympMatrix, tol: f64) -> NondegeneracyVerdict {
    let ev = eigenvalues(l.matrix());
    let distance_to_1 = ev
        .iter()
        .map(|(re, im)| ((re - 1.0).powi(2) + im * im).sqrt())
        .fold(f64::INFINITY, f64::min);
    NondegeneracyVerdict {
        verdict: distance_to_1 > tol,
        distance_to_1,
        eigenvalues: ev,
    }
}
