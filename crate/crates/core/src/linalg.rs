//! Small dense linear-algebra helpers shared by every module: the standard
//! symplectic matrix, symplectic and Hamiltonian matrix newtypes, symmetric
//! matrix bases, and auditable SVD rank decisions.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative singular-value threshold below which a direction counts as null.
pub const RANK_REL_TOL: f64 = 1e-9;

/// `J = [[0, I], [-I, 0]]` of size `2m x 2m`.
pub fn standard_symplectic_form(m: usize) -> Result<DMatrix<f64>> {
    if m < 1 {
        return Err(Error::InvalidDimension(format!(
            "symplectic form needs half-dimension >= 1, got {m}"
        )));
    }
    let mut j = DMatrix::zeros(2 * m, 2 * m);
    for i in 0..m {
        j[(i, m + i)] = 1.0;
        j[(m + i, i)] = -1.0;
    }
    Ok(j)
}

pub(crate) fn jmat(m: usize) -> DMatrix<f64> {
    standard_symplectic_form(m).expect("half-dimension >= 1")
}

/// Largest absolute entry.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub fn max_abs_vec(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// `max |(L^T J L - J)_ij|` for a square matrix of even size.
pub fn symplectic_residual(l: &DMatrix<f64>) -> f64 {
    let m = l.nrows() / 2;
    let j = jmat(m);
    max_abs(&(l.transpose() * &j * l - j))
}

/// `max |(J W) - (J W)^T|`, zero for Hamiltonian matrices.
pub fn hamiltonian_residual(w: &DMatrix<f64>) -> f64 {
    let m = w.nrows() / 2;
    let jw = jmat(m) * w;
    max_abs(&(&jw - jw.transpose()))
}

/// A `2d x 2d` matrix checked to be symplectic at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SympMatrix {
    entries: DMatrix<f64>,
    tol: f64,
}

impl SympMatrix {
    pub fn new(entries: DMatrix<f64>, tol: f64) -> Result<Self> {
        if entries.nrows() != entries.ncols() || entries.nrows() % 2 != 0 || entries.nrows() == 0 {
            return Err(Error::InvalidDimension(format!(
                "symplectic matrix must be square of even size, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        let res = symplectic_residual(&entries);
        if !(res <= tol) {
            return Err(Error::InvalidArgument(format!(
                "matrix is not symplectic: residual {res:e} > {tol:e}"
            )));
        }
        Ok(Self { entries, tol })
    }

    pub fn identity(d: usize) -> Self {
        Self {
            entries: DMatrix::identity(2 * d, 2 * d),
            tol: 0.0,
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// Half-dimension `d`.
    pub fn half_dim(&self) -> usize {
        self.entries.nrows() / 2
    }

    pub fn residual(&self) -> f64 {
        symplectic_residual(&self.entries)
    }
}

/// An element of `sp(2d)`: `J W` symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct HamMatrix {
    entries: DMatrix<f64>,
}

impl HamMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() || entries.nrows() % 2 != 0 || entries.nrows() == 0 {
            return Err(Error::InvalidDimension(
                "Hamiltonian matrix must be square of even size".into(),
            ));
        }
        let res = hamiltonian_residual(&entries);
        if res > 1e-12 * (1.0 + max_abs(&entries)) {
            return Err(Error::InvalidArgument(format!(
                "matrix is not Hamiltonian: residual {res:e}"
            )));
        }
        Ok(Self { entries })
    }

    /// `W = J^{-1} S = -J S` for a symmetric `S`.
    pub fn from_symmetric(s: &DMatrix<f64>) -> Self {
        let m = s.nrows() / 2;
        let sym = (s + s.transpose()) * 0.5;
        Self {
            entries: -(jmat(m) * sym),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.entries
    }
}

/// Basis of symmetric `d x d` matrices: `E_ii`, then `E_ij + E_ji` for `i < j`.
pub fn symmetric_basis(d: usize) -> Vec<DMatrix<f64>> {
    let mut out = Vec::with_capacity(d * (d + 1) / 2);
    for i in 0..d {
        let mut e = DMatrix::zeros(d, d);
        e[(i, i)] = 1.0;
        out.push(e);
    }
    for i in 0..d {
        for j in (i + 1)..d {
            let mut e = DMatrix::zeros(d, d);
            e[(i, j)] = 1.0;
            e[(j, i)] = 1.0;
            out.push(e);
        }
    }
    out
}

/// Coordinates of a symmetric matrix in [`symmetric_basis`].
pub fn symmetric_coords(s: &DMatrix<f64>) -> DVector<f64> {
    let d = s.nrows();
    let mut v = Vec::with_capacity(d * (d + 1) / 2);
    for i in 0..d {
        v.push(s[(i, i)]);
    }
    for i in 0..d {
        for j in (i + 1)..d {
            v.push(0.5 * (s[(i, j)] + s[(j, i)]));
        }
    }
    DVector::from_vec(v)
}

/// Strictly-upper entries of an antisymmetric matrix.
pub fn antisymmetric_coords(a: &DMatrix<f64>) -> DVector<f64> {
    let d = a.nrows();
    let mut v = Vec::with_capacity(d * d.saturating_sub(1) / 2);
    for i in 0..d {
        for j in (i + 1)..d {
            v.push(0.5 * (a[(i, j)] - a[(j, i)]));
        }
    }
    DVector::from_vec(v)
}

/// Basis of `sp(2d)` built from the symmetric basis of size `2d`.
pub fn hamiltonian_basis(d: usize) -> Vec<DMatrix<f64>> {
    symmetric_basis(2 * d)
        .iter()
        .map(|s| HamMatrix::from_symmetric(s).into_matrix())
        .collect()
}

/// Coordinates of a Hamiltonian matrix in [`hamiltonian_basis`]: those of `J W`.
pub fn hamiltonian_coords(w: &DMatrix<f64>) -> DVector<f64> {
    let m = w.nrows() / 2;
    symmetric_coords(&(jmat(m) * w))
}

pub fn hamiltonian_from_coords(d: usize, c: &DVector<f64>) -> DMatrix<f64> {
    let basis = hamiltonian_basis(d);
    let mut w = DMatrix::zeros(2 * d, 2 * d);
    for (b, ci) in basis.iter().zip(c.iter()) {
        w += b * *ci;
    }
    w
}

/// Result of an SVD rank decision; always carries the full spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct RankReport {
    pub rank: usize,
    /// Singular values in decreasing order.
    pub singular_values: Vec<f64>,
    pub threshold: f64,
}

impl RankReport {
    /// Smallest singular value counted in the rank divided by the largest.
    pub fn margin(&self) -> f64 {
        match (self.rank, self.singular_values.first()) {
            (0, _) | (_, None) => 0.0,
            (r, Some(&s0)) => self.singular_values[r - 1] / s0,
        }
    }
}

/// Numerical rank with singular values below `rel_tol * sigma_max` counted as zero.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> RankReport {
    if m.nrows() == 0 || m.ncols() == 0 {
        return RankReport {
            rank: 0,
            singular_values: vec![],
            threshold: 0.0,
        };
    }
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let smax = sv.first().copied().unwrap_or(0.0);
    let threshold = rel_tol * smax;
    let rank = if smax == 0.0 {
        0
    } else {
        sv.iter().filter(|&&s| s > threshold).count()
    };
    RankReport {
        rank,
        singular_values: sv,
        threshold,
    }
}

/// Numerical rank with singular values at or below `rel_tol * max(sigma_max, scale)`
/// counted as zero. The floor `scale` keeps maps that vanish up to rounding
/// from being judged relative to their own round-off.
pub fn numerical_rank_scaled(m: &DMatrix<f64>, rel_tol: f64, scale: f64) -> RankReport {
    let mut r = numerical_rank(m, rel_tol);
    let smax = r.singular_values.first().copied().unwrap_or(0.0);
    r.threshold = rel_tol * smax.max(scale);
    r.rank = r.singular_values.iter().filter(|&&s| s > r.threshold).count();
    r
}

/// Minimum-norm least-squares solution of `A x = b`, truncating singular
/// values below `rel_tol * sigma_max`.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>, rel_tol: f64) -> DVector<f64> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let eps = (rel_tol * smax).max(f64::MIN_POSITIVE);
    svd.solve(b, eps).unwrap_or_else(|_| DVector::zeros(a.ncols()))
}

/// Eigenvalues (real, imaginary) of a real square matrix.
pub fn eigenvalues(m: &DMatrix<f64>) -> Vec<(f64, f64)> {
    m.complex_eigenvalues().iter().map(|c| (c.re, c.im)).collect()
}

/// Flattens row-major.
pub fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            v.push(m[(i, j)]);
        }
    }
    v
}

/// Stacks the entries of `m` column-major into a vector.
pub fn vectorize(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

pub(crate) fn block(m: &DMatrix<f64>, r0: usize, c0: usize, nr: usize, nc: usize) -> DMatrix<f64> {
    m.view((r0, c0), (nr, nc)).into_owned()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn j_small_cases() {
        let j1 = standard_symplectic_form(1).unwrap();
        assert_eq!(j1, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]));
        for d in 1..5 {
            let j = standard_symplectic_form(d).unwrap();
            let id = DMatrix::<f64>::identity(2 * d, 2 * d);
            assert_eq!(&j * &j, -&id);
            assert_eq!(j.transpose() * &j, id);
        }
        assert!(standard_symplectic_form(0).is_err());
    }

    #[test]
    fn hamiltonian_basis_is_hamiltonian_and_complete() {
        for d in 1..4 {
            let basis = hamiltonian_basis(d);
            assert_eq!(basis.len(), d * (2 * d + 1));
            let mut stacked = DMatrix::zeros(4 * d * d, basis.len());
            for (k, b) in basis.iter().enumerate() {
                assert!(hamiltonian_residual(b) < 1e-14);
                stacked.set_column(k, &vectorize(b));
                let c = hamiltonian_coords(b);
                let back = hamiltonian_from_coords(d, &c);
                assert!(max_abs(&(back - b)) < 1e-14);
            }
            assert_eq!(numerical_rank(&stacked, RANK_REL_TOL).rank, basis.len());
        }
    }

    #[test]
    fn symp_matrix_rejects_shear_of_wrong_type() {
        let shear = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(SympMatrix::new(shear, 1e-12).is_ok());
        let bad = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        assert!(SympMatrix::new(bad, 1e-12).is_err());
    }

    #[test]
    fn rank_of_zero_matrix_is_zero() {
        let r = numerical_rank(&DMatrix::zeros(3, 3), RANK_REL_TOL);
        assert_eq!(r.rank, 0);
        assert_eq!(r.singular_values.len(), 3);
    }
}
