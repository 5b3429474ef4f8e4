use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{span_test, transition_ode_solve, ControlBasis, ControlCurve, ControlData};
use crate::error::{Error, Result};
use crate::linalg::{hamiltonian_coords, hamiltonian_from_coords, numerical_rank, row_major, RankReport, SympMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisConfig {
    pub max_iter: usize,
    /// Stop once `|achieved - target|_F` is at most this.
    pub residual_tol: f64,
    /// Largest admissible `|log(L_0(delta)^{-1} target)|_F`.
    pub trust_radius: f64,
    /// Coefficient step of the central differences.
    pub fd_step: f64,
    /// Relative singular value below which a sensitivity direction counts
    /// as unreachable. Looser than the bracket rank threshold because the
    /// sensitivity carries finite-difference error.
    pub sensitivity_tol: f64,
    /// Tikhonov weight relative to the largest squared singular value.
    pub regularization: f64,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            max_iter: 12,
            residual_tol: 1e-10,
            trust_radius: 1e-2,
            fd_step: 1e-4,
            sensitivity_tol: 1e-6,
            regularization: 1e-12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthesisResult {
    pub b: ControlCurve,
    pub achieved: SympMatrix,
    /// `|achieved - target|_F`.
    pub residual: f64,
    /// Residual after every accepted iteration, starting with the zero control.
    pub history: Vec<f64>,
    /// Rank of the sensitivity at the zero control, in `sp(2d)` coordinates.
    pub sensitivity_rank: RankReport,
    /// Set when the bracket span test at depth 3 is not full.
    pub warning: Option<String>,
}

/// Matrix logarithm by its power series, for `x` close to the identity.
pub fn log_near_identity(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let z = x - DMatrix::<f64>::identity(n, n);
    let mut term = z.clone();
    let mut out = z.clone();
    for k in 2..40 {
        term = &term * &z;
        let add = &term * (if k % 2 == 0 { -1.0 } else { 1.0 } / k as f64);
        out += &add;
        if add.amax() < 1e-18 {
            break;
        }
    }
    out
}

/// Matrix exponential by scaling and squaring of the Taylor series.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm = a.amax() * n as f64;
    let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scaled = a / 2f64.powi(s);
    let mut out = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..30 {
        term = &term * &scaled / k as f64;
        out += &term;
        if term.amax() < 1e-18 {
            break;
        }
    }
    for _ in 0..s {
        out = &out * &out;
    }
    out
}

fn endpoint(cd: &ControlData, basis: &ControlBasis, c: &DVector<f64>) -> Result<DMatrix<f64>> {
    let curve = ControlCurve::new(basis.clone(), c.clone())?;
    Ok(transition_ode_solve(cd, Some(&curve), cd.delta)?.into_matrix())
}

/// Columns `hamiltonian_coords(L^{-1} dL/dc_m)` by central differences,
/// one independent pair of solves per column, spread over threads.
fn sensitivity(
    cd: &ControlData,
    basis: &ControlBasis,
    c: &DVector<f64>,
    l_inv: &DMatrix<f64>,
    h: f64,
) -> Result<DMatrix<f64>> {
    let m = basis.len();
    let column = |i: usize| -> Result<DVector<f64>> {
        let mut cp = c.clone();
        let mut cm = c.clone();
        cp[i] += h;
        cm[i] -= h;
        let diff = (endpoint(cd, basis, &cp)? - endpoint(cd, basis, &cm)?) / (2.0 * h);
        Ok(hamiltonian_coords(&(l_inv * diff)))
    };
    let threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).min(m.max(1));
    let chunk = m.div_ceil(threads);
    // Targets without threads (wasm32) report no parallelism and stay on this one.
    let cols: Vec<Result<DVector<f64>>> = if threads <= 1 {
        (0..m).map(column).collect()
    } else {
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..threads)
                .map(|t| {
                    let column = &column;
                    s.spawn(move || (t * chunk..((t + 1) * chunk).min(m)).map(column).collect::<Vec<_>>())
                })
                .collect();
            handles.into_iter().flat_map(|h| h.join().expect("sensitivity worker panicked")).collect()
        })
    };
    let cols = cols.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(DMatrix::from_columns(&cols))
}

/// Unit Hamiltonian matrices spanning the left null space of `s`.
fn null_directions(s: &DMatrix<f64>, d: usize, rel_tol: f64) -> Vec<Vec<f64>> {
    let gram = s * s.transpose();
    let eig = SymmetricEigen::new(gram);
    let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let cut = rel_tol * rel_tol * top;
    let mut out = Vec::new();
    for (i, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev <= cut {
            let v = eig.eigenvectors.column(i).into_owned();
            let w = hamiltonian_from_coords(d, &v);
            let norm = w.norm();
            out.push(row_major(&(w / norm)));
        }
    }
    out
}

/// Shooting on the coefficients of `basis` so that `L_B(delta)` reaches
/// `target`. Each step solves the regularized least-squares problem for the
/// linearized endpoint map and is halved until the residual decreases.
pub fn synthesize_control(
    cd: &ControlData,
    target: &SympMatrix,
    basis: &ControlBasis,
    cfg: &SynthesisConfig,
) -> Result<SynthesisResult> {
    let d = cd.d();
    if target.half_dim() != d || basis.d() != d {
        return Err(Error::InvalidDimension(format!(
            "target is Sp({}), basis has d = {}, control data d = {d}",
            2 * target.half_dim(),
            basis.d()
        )));
    }
    let dim = d * (2 * d + 1);
    let warning = match span_test(cd, 3) {
        Ok(r) if r.full => None,
        Ok(r) => Some(format!(
            "bracket span at depth 3 has rank {} < {}; local controllability is not guaranteed",
            r.rank.rank, r.dim_target
        )),
        Err(e) => Some(format!("bracket span test failed: {e}")),
    };
    let tgt = target.matrix();
    let l0 = transition_ode_solve(cd, None, cd.delta)?.into_matrix();
    let l0_inv = l0.clone().try_inverse().ok_or_else(|| Error::InvalidArgument("L_0 singular".into()))?;
    let reach = log_near_identity(&(&l0_inv * tgt)).norm();
    if reach > cfg.trust_radius {
        return Err(Error::InvalidArgument(format!(
            "target lies {reach:e} from L_0(delta), outside the trust radius {:e}",
            cfg.trust_radius
        )));
    }

    let mut c = DVector::zeros(basis.len());
    let mut l = l0;
    let mut residual = (&l - tgt).norm();
    let mut history = vec![residual];
    let mut sensitivity_rank = None;
    for _ in 0..cfg.max_iter {
        if residual <= cfg.residual_tol {
            break;
        }
        let l_inv = l.clone().try_inverse().ok_or_else(|| Error::InvalidArgument("L singular".into()))?;
        let s = sensitivity(cd, basis, &c, &l_inv, cfg.fd_step)?;
        if sensitivity_rank.is_none() {
            let rank = numerical_rank(&s, cfg.sensitivity_tol);
            if rank.rank < dim {
                return Err(Error::Uncontrollable {
                    rank: rank.rank,
                    target: dim,
                    null_directions: null_directions(&s, d, cfg.sensitivity_tol),
                });
            }
            sensitivity_rank = Some(rank);
        }
        let xi = hamiltonian_coords(&log_near_identity(&(&l_inv * tgt)));
        let svd = s.clone().svd(true, true);
        let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
        let lambda = cfg.regularization * smax * smax;
        let (u, vt) = (svd.u.expect("u requested"), svd.v_t.expect("v requested"));
        let coeffs = DVector::from_iterator(
            svd.singular_values.len(),
            svd.singular_values.iter().zip(u.column_iter()).map(|(sv, col)| sv / (sv * sv + lambda) * col.dot(&xi)),
        );
        let step = vt.transpose() * coeffs;
        let mut accepted = false;
        let mut scale = 1.0;
        for _ in 0..8 {
            let c_try = &c + &step * scale;
            let l_try = endpoint(cd, basis, &c_try)?;
            let r_try = (&l_try - tgt).norm();
            if r_try < residual {
                c = c_try;
                l = l_try;
                residual = r_try;
                history.push(residual);
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let sensitivity_rank = match sensitivity_rank {
        Some(r) => r,
        None => {
            let l_inv = l.clone().try_inverse().ok_or_else(|| Error::InvalidArgument("L singular".into()))?;
            numerical_rank(&sensitivity(cd, basis, &c, &l_inv, cfg.fd_step)?, cfg.sensitivity_tol)
        }
    };
    Ok(SynthesisResult {
        b: ControlCurve::new(basis.clone(), c)?,
        achieved: SympMatrix::new(l, 1e-6)?,
        residual,
        history,
        sensitivity_rank,
        warning,
    })
}
