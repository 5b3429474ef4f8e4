use nalgebra::DMatrix;

use super::model::Hamiltonian;
use super::point::PhasePoint;

/// Result of the bordered-determinant test at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsoEnergeticTest {
    pub det_value: f64,
    pub tol: f64,
    pub non_degenerate: bool,
}

/// The `(n+1) x (n+1)` matrix `[[d2_pp H, d_p H], [d_p H^T, 0]]`.
pub fn bordered_matrix(h: &dyn Hamiltonian, x: &PhasePoint) -> DMatrix<f64> {
    let n = h.base_dim();
    let xv = x.to_vector();
    let g = h.gradient(&xv);
    let hess = h.hessian(&xv);
    let mut m = DMatrix::zeros(n + 1, n + 1);
    m.view_mut((0, 0), (n, n)).copy_from(&hess.view((n, n), (n, n)));
    for i in 0..n {
        m[(i, n)] = g[n + i];
        m[(n, i)] = g[n + i];
    }
    m
}

/// Default verdict threshold `1e-8 * (1 + |d2_pp H|^d)`, Frobenius norm.
pub fn default_iso_energetic_tol(h: &dyn Hamiltonian, x: &PhasePoint) -> f64 {
    let n = h.base_dim();
    let hess = h.hessian(&x.to_vector());
    let norm = hess.view((n, n), (n, n)).norm();
    1e-8 * (1.0 + norm.powi((n - 1) as i32))
}

/// Fiberwise iso-energetic non-degeneracy: nonzero bordered determinant.
/// `tol = None` uses [`default_iso_energetic_tol`].
pub fn fiberwise_iso_energetic_test(
    h: &dyn Hamiltonian,
    x: &PhasePoint,
    tol: Option<f64>,
) -> IsoEnergeticTest {
    let det_value = bordered_matrix(h, x).determinant();
    let tol = tol.unwrap_or_else(|| default_iso_energetic_tol(h, x));
    IsoEnergeticTest {
        det_value,
        tol,
        non_degenerate: det_value.abs() > tol,
    }
}

/// True iff `|H(q,-p) - H(q,p)| <= tol` at every sample.
pub fn reversibility_check(h: &dyn Hamiltonian, samples: &[PhasePoint], tol: f64) -> bool {
    samples.iter().all(|x| {
        let v = x.to_vector();
        let n = h.base_dim();
        let mut r = v.clone();
        for i in n..2 * n {
            r[i] = -r[i];
        }
        (h.value(&r) - h.value(&v)).abs() <= tol
    })
}
