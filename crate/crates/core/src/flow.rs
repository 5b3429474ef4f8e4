//! Hamiltonian flow, variational flow and section crossings.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{symplectic_gradient, Hamiltonian, PhasePoint};
use crate::ode::{solve, OdeSolution};
use crate::roots::illinois;

pub use crate::ode::FlowConfig;

/// Time-sampled solution of `x' = J grad H(x)` with dense output.
#[derive(Debug, Clone)]
pub struct Trajectory {
    sol: OdeSolution,
    n: usize,
    energy_reference: f64,
    energy_drift: f64,
}

impl Trajectory {
    pub fn base_dim(&self) -> usize {
        self.n
    }

    pub fn times(&self) -> &[f64] {
        self.sol.times()
    }

    /// Phase vectors at the accepted step times.
    pub fn states(&self) -> &[DVector<f64>] {
        self.sol.states()
    }

    pub fn t_start(&self) -> f64 {
        self.sol.t_start()
    }

    pub fn t_end(&self) -> f64 {
        self.sol.t_end()
    }

    /// Interpolated phase vector.
    pub fn state(&self, t: f64) -> DVector<f64> {
        self.sol.eval(t)
    }

    pub fn point(&self, t: f64) -> PhasePoint {
        PhasePoint::from_vector(&self.state(t)).expect("trajectory states are valid phase points")
    }

    pub fn final_state(&self) -> &DVector<f64> {
        self.sol.final_state()
    }

    pub fn energy_reference(&self) -> f64 {
        self.energy_reference
    }

    /// `max |H(x(t_i)) - H(x(t_0))|` over the accepted steps.
    pub fn energy_drift(&self) -> f64 {
        self.energy_drift
    }

    /// Tab-separated table with header `t q1.. p1..`, one row per step.
    pub fn to_table(&self) -> String {
        let mut out = String::from("t");
        for i in 0..self.n {
            let _ = write!(out, "\tq{}", i + 1);
        }
        for i in 0..self.n {
            let _ = write!(out, "\tp{}", i + 1);
        }
        out.push('\n');
        for (t, x) in self.times().iter().zip(self.states()) {
            let _ = write!(out, "{t:.17e}");
            for v in x.iter() {
                let _ = write!(out, "\t{v:.17e}");
            }
            out.push('\n');
        }
        out
    }
}

/// A trajectory with the fundamental solution of the variational equation.
#[derive(Debug, Clone)]
pub struct VariationalTrajectory {
    base: Trajectory,
    sol: OdeSolution,
}

impl VariationalTrajectory {
    pub fn base(&self) -> &Trajectory {
        &self.base
    }

    /// `X(t)` with `X(t_0) = I`.
    pub fn fundamental(&self, t: f64) -> DMatrix<f64> {
        let m = 2 * self.base.n;
        let y = self.sol.eval(t);
        DMatrix::from_column_slice(m, m, &y.as_slice()[m..])
    }

    /// `Xi_s^t = X(t) X(s)^{-1}`.
    pub fn transition(&self, s: f64, t: f64) -> DMatrix<f64> {
        let xs = self.fundamental(s);
        let xt = self.fundamental(t);
        let inv = xs
            .clone()
            .try_inverse()
            .unwrap_or_else(|| DMatrix::identity(xs.nrows(), xs.ncols()));
        xt * inv
    }
}

fn field(h: &dyn Hamiltonian, x: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(symplectic_gradient(&h.try_gradient(x)?))
}

/// `J M` for a `2n x k` matrix.
pub(crate) fn j_times(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows() / 2;
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    out.rows_mut(0, n).copy_from(&m.rows(n, n));
    out.rows_mut(n, n).copy_from(&(-m.rows(0, n)));
    out
}

fn energy_drift(h: &dyn Hamiltonian, sol: &OdeSolution, m: usize) -> (f64, f64) {
    let e0 = h.value(&sol.states()[0].rows(0, m).into_owned());
    let drift = sol
        .states()
        .iter()
        .map(|y| (h.value(&y.rows(0, m).into_owned()) - e0).abs())
        .fold(0.0, f64::max);
    (e0, drift)
}

/// Raw flow solution from `t0` to `t1` in either direction.
pub fn flow_solution(
    h: &dyn Hamiltonian,
    x0: &DVector<f64>,
    t0: f64,
    t1: f64,
    cfg: &FlowConfig,
) -> Result<OdeSolution> {
    solve(|_, x| field(h, x), t0, x0.clone(), t1, cfg)
}

/// `phi^t(x)`; `t` may be negative.
pub fn flow_map(h: &dyn Hamiltonian, x: &DVector<f64>, t: f64, cfg: &FlowConfig) -> Result<DVector<f64>> {
    let mut c = *cfg;
    c.dense_output = false;
    Ok(flow_solution(h, x, 0.0, t, &c)?.final_state().clone())
}

fn variational_rhs(h: &dyn Hamiltonian, y: &DVector<f64>, m: usize) -> Result<DVector<f64>> {
    let x = y.rows(0, m).into_owned();
    let fx = field(h, &x)?;
    let hess = h.try_hessian(&x)?;
    let big = DMatrix::from_column_slice(m, y.len() / m - 1, &y.as_slice()[m..]);
    let d = j_times(&(hess * big));
    let mut out = DVector::zeros(y.len());
    out.rows_mut(0, m).copy_from(&fx);
    out.rows_mut(m, y.len() - m).copy_from(&DVector::from_column_slice(d.as_slice()));
    Ok(out)
}

/// `(phi^t(x), d phi^t(x))`; `t` may be negative.
pub fn flow_with_jacobian(
    h: &dyn Hamiltonian,
    x: &DVector<f64>,
    t: f64,
    cfg: &FlowConfig,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let m = x.len();
    let mut c = *cfg;
    c.dense_output = false;
    let sol = solve(|_, y| variational_rhs(h, y, m), 0.0, augmented_initial(x, None), t, &c)?;
    let y = sol.final_state();
    Ok((
        y.rows(0, m).into_owned(),
        DMatrix::from_column_slice(m, m, &y.as_slice()[m..]),
    ))
}

/// Propagates the columns of `v` (tangent vectors at `x`) along the flow.
pub fn propagate_tangents(
    h: &dyn Hamiltonian,
    x: &DVector<f64>,
    v: &DMatrix<f64>,
    t: f64,
    cfg: &FlowConfig,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let m = x.len();
    let mut c = *cfg;
    c.dense_output = false;
    let sol = solve(|_, y| variational_rhs(h, y, m), 0.0, augmented_initial(x, Some(v)), t, &c)?;
    let y = sol.final_state();
    Ok((
        y.rows(0, m).into_owned(),
        DMatrix::from_column_slice(m, v.ncols(), &y.as_slice()[m..]),
    ))
}

fn augmented_initial(x: &DVector<f64>, v: Option<&DMatrix<f64>>) -> DVector<f64> {
    let m = x.len();
    let id = DMatrix::identity(m, m);
    let v = v.unwrap_or(&id);
    let mut y = DVector::zeros(m + m * v.ncols());
    y.rows_mut(0, m).copy_from(x);
    y.rows_mut(m, m * v.ncols()).copy_from(&DVector::from_column_slice(v.as_slice()));
    y
}

fn check_span(h: &dyn Hamiltonian, x0: &PhasePoint, t0: f64, t1: f64) -> Result<()> {
    if x0.base_dim() != h.base_dim() {
        return Err(Error::InvalidDimension(format!(
            "point on R^{} for a model on R^{}",
            x0.base_dim(),
            h.base_dim()
        )));
    }
    if !(t1 > t0) {
        return Err(Error::InvalidArgument(format!(
            "time span must satisfy t1 > t0, got [{t0}, {t1}]"
        )));
    }
    Ok(())
}

/// Solves `x' = J grad H(x)` on `[t0, t1]` with `t1 > t0`.
pub fn integrate_flow(
    h: &dyn Hamiltonian,
    x0: &PhasePoint,
    t_span: [f64; 2],
    cfg: &FlowConfig,
) -> Result<Trajectory> {
    check_span(h, x0, t_span[0], t_span[1])?;
    let m = 2 * h.base_dim();
    let sol = flow_solution(h, &x0.to_vector(), t_span[0], t_span[1], cfg)?;
    let (e0, drift) = energy_drift(h, &sol, m);
    Ok(Trajectory {
        sol,
        n: h.base_dim(),
        energy_reference: e0,
        energy_drift: drift,
    })
}

/// Integrates the flow jointly with `X' = J hess H(x(t)) X`, `X(t0) = I`.
pub fn integrate_variational(
    h: &dyn Hamiltonian,
    x0: &PhasePoint,
    t_span: [f64; 2],
    cfg: &FlowConfig,
) -> Result<VariationalTrajectory> {
    check_span(h, x0, t_span[0], t_span[1])?;
    let n = h.base_dim();
    let m = 2 * n;
    let y0 = augmented_initial(&x0.to_vector(), None);
    let sol = solve(|_, y| variational_rhs(h, y, m), t_span[0], y0, t_span[1], cfg)?;
    // The base flow is integrated on its own so that its step control is not
    // diluted by the variational components.
    let base_sol = flow_solution(h, &x0.to_vector(), t_span[0], t_span[1], cfg)?;
    let (e0, drift) = energy_drift(h, &base_sol, m);
    Ok(VariationalTrajectory {
        base: Trajectory {
            sol: base_sol,
            n,
            energy_reference: e0,
            energy_drift: drift,
        },
        sol,
    })
}

/// Which sign changes of a section function to report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossingDirection {
    /// From negative to positive.
    Increasing,
    /// From positive to negative.
    Decreasing,
    Both,
}

/// Subintervals scanned per accepted step when bracketing crossings.
const CROSSING_SUBDIVISION: usize = 4;

/// Times `t*` where `section(x(t*)) = 0`, with `x(t*)`.
pub fn section_crossing(
    traj: &Trajectory,
    section: &dyn Fn(&DVector<f64>) -> f64,
    direction: CrossingDirection,
) -> Vec<(f64, DVector<f64>)> {
    let ts = traj.times();
    let mut grid = Vec::with_capacity(ts.len() * CROSSING_SUBDIVISION);
    for w in ts.windows(2) {
        for k in 0..CROSSING_SUBDIVISION {
            grid.push(w[0] + (w[1] - w[0]) * k as f64 / CROSSING_SUBDIVISION as f64);
        }
    }
    grid.push(traj.t_end());
    let vals: Vec<f64> = grid.iter().map(|&t| section(&traj.state(t))).collect();
    let scale = vals.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
    let mut out = Vec::new();
    for i in 0..grid.len() - 1 {
        let (fa, fb) = (vals[i], vals[i + 1]);
        let up = fa < 0.0 && fb >= 0.0;
        let down = fa >= 0.0 && fb < 0.0;
        let wanted = match direction {
            CrossingDirection::Increasing => up,
            CrossingDirection::Decreasing => down,
            CrossingDirection::Both => up || down,
        };
        if !wanted {
            continue;
        }
        let g = |t: f64| section(&traj.state(t));
        let t = illinois(g, grid[i], grid[i + 1], fa, fb, 1e-14 * scale, 1e-15 * (1.0 + grid[i].abs()));
        out.push((t, traj.state(t)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ChartDomain, HamiltonianModel};

    #[test]
    fn momentum_linear_translates() {
        let h = HamiltonianModel::momentum_linear(ChartDomain::euclidean(2)).unwrap();
        let x0 = PhasePoint::from_slice(&[0.0; 4]).unwrap();
        let tr = integrate_flow(&h, &x0, [0.0, 1.0], &FlowConfig::default()).unwrap();
        assert!((tr.final_state()[0] - 1.0).abs() < 1e-14);
        assert!(tr.to_table().starts_with("t\tq1\tq2\tp1\tp2\n"));
    }

    #[test]
    fn rejects_reversed_span() {
        let h = HamiltonianModel::momentum_linear(ChartDomain::euclidean(2)).unwrap();
        let x0 = PhasePoint::from_slice(&[0.0; 4]).unwrap();
        assert!(integrate_flow(&h, &x0, [1.0, 0.0], &FlowConfig::default()).is_err());
    }
}
