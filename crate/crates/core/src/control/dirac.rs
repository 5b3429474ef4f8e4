use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::brackets::RANK_TOL;
use super::ControlData;
use crate::error::{Error, Result};
use crate::flow::{flow_map, flow_with_jacobian, FlowConfig};
use crate::geometry::{Hamiltonian, Perturbed, PhasePoint, ScaledPotential};
use crate::linalg::{numerical_rank, RankReport};
use crate::normalform::{segment_point, straighten_projection, vertical_normalization, FiberedChart};
use crate::ode::solve;
use crate::potentials::dirac_jet_potential;
use crate::profiles::Bump;

/// `y(sigma)` columns for the Dirac-like vertical controls.
#[derive(Debug, Clone)]
pub struct DiracSpan {
    /// `2d x 2d`: column `i` answers `delta_w e_i`, column `d + j` answers
    /// `delta_w' e_j`.
    pub vectors: DMatrix<f64>,
    /// Limits `(0 | e_i)` and `(D e_j | 0)` as the width goes to zero.
    pub limits: DMatrix<f64>,
    /// Joint rank of `vectors`, target `2d`.
    pub rank: RankReport,
    /// `2d x d^2`, column `i d + j` answers the combined control
    /// `delta_w e_i + delta_w' e_j`.
    pub pair_vectors: DMatrix<f64>,
    /// Rank of the combined columns. Their coefficients on the two families
    /// always have equal sums, so this is at most `2d - 1`.
    pub pair_rank: RankReport,
    /// `(w, max column error)` for `w, w/2, w/4, w/8`.
    pub errors: Vec<(f64, f64)>,
    /// Mean of `log2(err(w) / err(w/2))` over the halvings.
    pub convergence_rate: f64,
}

/// `y(sigma) = M(sigma)^{-1} omega(sigma)` for `omega' = Y omega + b`,
/// `omega(0) = 0`, `M' = Y M`, `M(0) = I`, with a vertical forcing
/// `b(t) = f(t) (0 | e)` where `f` is the bump (`order = 0`) or its
/// derivative (`order = 1`).
fn response(cd: &ControlData, bump: &Bump, order: usize, e: usize, sigma: f64) -> Result<DVector<f64>> {
    let d = cd.d();
    let m = 2 * d;
    let rhs = |t: f64, z: &DVector<f64>| -> Result<DVector<f64>> {
        let y = cd.y_at(t);
        let mm = DMatrix::from_column_slice(m, m, &z.as_slice()[..m * m]);
        let om = z.rows(m * m, m).into_owned();
        let mut dom = &y * om;
        dom[d + e] += bump.jet(t)[order];
        let mut out = DVector::zeros(m * m + m);
        out.rows_mut(0, m * m).copy_from_slice((&y * mm).as_slice());
        out.rows_mut(m * m, m).copy_from(&dom);
        Ok(out)
    };
    let mut z = DVector::zeros(m * m + m);
    z.rows_mut(0, m * m).copy_from_slice(DMatrix::<f64>::identity(m, m).as_slice());
    let end = bump.support().1;
    let mut cfg = super::control_flow_config();
    cfg.max_step = bump.half_width / 8.0;
    let z = solve(rhs, 0.0, z, end, &cfg)?.final_state().clone();
    cfg.max_step = super::control_flow_config().max_step;
    let z = solve(rhs, end, z, sigma, &cfg)?.final_state().clone();
    let mm = DMatrix::from_column_slice(m, m, &z.as_slice()[..m * m]);
    let om = z.rows(m * m, m).into_owned();
    mm.lu().solve(&om).ok_or_else(|| Error::InvalidArgument("M(sigma) is singular".into()))
}

/// Columns for `delta_w e_i` then `delta_w' e_j`.
fn family_vectors(cd: &ControlData, w: f64, sigma: f64) -> Result<DMatrix<f64>> {
    let d = cd.d();
    let bump = Bump::dirac(0.5 * w, 0.5 * w);
    let mut out = DMatrix::zeros(2 * d, 2 * d);
    for i in 0..d {
        out.set_column(i, &response(cd, &bump, 0, i, sigma)?);
        out.set_column(d + i, &response(cd, &bump, 1, i, sigma)?);
    }
    Ok(out)
}

fn pairs(families: &DMatrix<f64>, d: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(2 * d, d * d);
    for i in 0..d {
        for j in 0..d {
            out.set_column(i * d + j, &(families.column(i) + families.column(d + j)));
        }
    }
    out
}

/// Spanning check for the Dirac-like vertical controls `delta_w e_i` and
/// `delta_w' e_j`, with `delta_w` a unit-mass bump supported in `(0, w)`:
/// the vectors `y(sigma)`, their joint rank, and their convergence to
/// `(0 | e_i)` and `Y(0) (0 | e_j) = (D e_j | 0)` over three halvings of `w`.
pub fn dirac_control_span(cd: &ControlData, sigma: f64, w: f64) -> Result<DiracSpan> {
    if !(w > 0.0) || !(sigma > w) || sigma > cd.delta {
        return Err(Error::InvalidArgument(format!(
            "need 0 < w < sigma <= delta, got w = {w}, sigma = {sigma}, delta = {}",
            cd.delta
        )));
    }
    let d = cd.d();
    let mut limits = DMatrix::zeros(2 * d, 2 * d);
    for i in 0..d {
        limits[(d + i, i)] = 1.0;
        limits[(i, d + i)] = cd.signs[i];
    }
    let vectors = family_vectors(cd, w, sigma)?;
    let mut errors = vec![(w, (&vectors - &limits).amax())];
    for k in 1..=3 {
        let wk = w / 2f64.powi(k);
        let v = family_vectors(cd, wk, sigma)?;
        errors.push((wk, (&v - &limits).amax()));
    }
    let rates: Vec<f64> = errors.windows(2).map(|p| (p[0].1 / p[1].1).log2()).collect();
    let convergence_rate = rates.iter().sum::<f64>() / rates.len() as f64;
    let pair_vectors = pairs(&vectors, d);
    Ok(DiracSpan {
        rank: numerical_rank(&vectors, RANK_TOL),
        pair_rank: numerical_rank(&pair_vectors, RANK_TOL),
        vectors,
        limits,
        pair_vectors,
        errors,
        convergence_rate,
    })
}

/// Finite-difference responses of the flow to the Dirac-jet potentials
/// `u_{i,j}`, and the limit vectors `eta_{i,j}` built from the transition
/// matrices, all in straightened coordinates.
#[derive(Debug, Clone)]
pub struct VerticalSpan {
    /// `2n k x n k`, column `i n + j` holds `eta_{i,j}` slot by slot.
    pub eta: DMatrix<f64>,
    /// Responses of `phi(sigma_{i'})` to the potential `-u_{i,j}`, same layout.
    pub responses: DMatrix<f64>,
    pub eta_rank: RankReport,
    pub response_rank: RankReport,
    /// Rank of the responses restricted to the momentum slots.
    pub vertical_rank: RankReport,
    /// `k (d + 1)`.
    pub target: usize,
    pub spans_verticals: bool,
    /// `max |responses - eta|`.
    pub deviation: f64,
}

/// Checks that the potentials `u_{i,j}`, with `du(t e_1) = e_j delta(t - sigma_i)`
/// in straightened coordinates, move the points `phi(sigma_1), ..,
/// phi(sigma_k)` in directions spanning the product of the verticals.
pub fn vertical_span_check(h: &dyn Hamiltonian, x0: &PhasePoint, sigmas: &[f64], w: f64) -> Result<VerticalSpan> {
    let n = h.base_dim();
    let k = sigmas.len();
    if k <= 2 * n {
        return Err(Error::InvalidArgument(format!("need more than 2d + 2 = {} times, got {k}", 2 * n)));
    }
    let mut prev = 0.0;
    for &s in sigmas {
        if !(s - prev > 2.0 * w) {
            return Err(Error::InvalidArgument(format!(
                "times must increase by more than 2w = {} from 0, got {sigmas:?}",
                2.0 * w
            )));
        }
        prev = s;
    }
    let last = sigmas[k - 1];
    let delta = last + 4.0 * w;
    let straight = straighten_projection(h, x0, delta)?;
    let mut chart = FiberedChart::identity(n, h.domain());
    chart.push_inner(straight.piece);
    chart.push_inner(vertical_normalization(straight.momentum));
    chart.delta = delta;
    chart.radius = delta;
    let hc = chart.pullback(h);
    let radius = (0.25 * delta).min(0.1);
    let mut cfg = FlowConfig::with_tol(1e-12, 1e-13);
    cfg.max_step = 0.25 * w;

    let m = 2 * n;
    let mut eta = DMatrix::zeros(m * k, n * k);
    for i in 0..k {
        let xi = segment_point(n, sigmas[i]);
        for i2 in i..k {
            let xi_map = if i2 == i {
                DMatrix::identity(m, m)
            } else {
                flow_with_jacobian(&hc, &xi, sigmas[i2] - sigmas[i], &cfg)?.1
            };
            for j in 0..n {
                let col = xi_map.column(n + j).into_owned();
                eta.view_mut((m * i2, i * n + j), (m, 1)).copy_from(&col);
            }
        }
    }

    let eps = 1e-3;
    let origin = DVector::zeros(m);
    let mut responses = DMatrix::zeros(m * k, n * k);
    for i in 0..k {
        for j in 0..n {
            let u = dirac_jet_potential(n, j, sigmas[i] - w, w, radius, last + w)?;
            let u: Arc<dyn crate::geometry::PotentialField> = Arc::new(u);
            let mut ends = Vec::with_capacity(2);
            for sign in [1.0, -1.0] {
                let su = ScaledPotential {
                    scale: -sign * eps,
                    inner: u.clone(),
                };
                let hp = Perturbed { h: &hc, u: &su };
                let mut x = origin.clone();
                let mut t = 0.0;
                let mut pts = Vec::with_capacity(k);
                for &s in sigmas {
                    x = flow_map(&hp, &x, s - t, &cfg)?;
                    t = s;
                    pts.push(x.clone());
                }
                ends.push(pts);
            }
            for i2 in 0..k {
                let diff = (&ends[0][i2] - &ends[1][i2]) / (2.0 * eps);
                responses.view_mut((m * i2, i * n + j), (m, 1)).copy_from(&diff);
            }
        }
    }

    let mut vertical = DMatrix::zeros(n * k, n * k);
    for i2 in 0..k {
        vertical
            .view_mut((n * i2, 0), (n, n * k))
            .copy_from(&responses.view((m * i2 + n, 0), (n, n * k)));
    }
    let target = n * k;
    let eta_rank = numerical_rank(&eta, RANK_TOL);
    let response_rank = numerical_rank(&responses, RANK_TOL);
    let vertical_rank = numerical_rank(&vertical, RANK_TOL);
    Ok(VerticalSpan {
        deviation: (&responses - &eta).amax(),
        spans_verticals: vertical_rank.rank == target && eta_rank.rank == target,
        eta,
        responses,
        eta_rank,
        response_rank,
        vertical_rank,
        target,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dirac_span_with_zero_k() {
        let cd = ControlData::constant(&[1.0, -1.0], DMatrix::zeros(2, 2), 1.0).unwrap();
        let r = dirac_control_span(&cd, 0.5, 0.04).unwrap();
        assert_eq!(r.rank.rank, 4);
        assert_eq!(r.pair_rank.rank, 3);
        assert!(r.errors.last().unwrap().1 < 0.01, "{:?}", r.errors);
        assert!((r.convergence_rate - 1.0).abs() < 0.2, "{}", r.convergence_rate);
    }
}
