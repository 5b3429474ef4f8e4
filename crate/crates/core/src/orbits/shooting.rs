use nalgebra::{DMatrix, DVector};

use super::PeriodicOrbit;
use crate::error::{Error, Result};
use crate::flow::{flow_map, flow_with_jacobian, integrate_flow, FlowConfig};
use crate::geometry::{symplectic_gradient, Hamiltonian, PhasePoint};
use crate::linalg::{eigenvalues, lstsq};

/// Energy constraint added to the shooting system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnergyPin {
    /// No energy equation.
    None,
    /// Keep the energy of the guess.
    Guess,
    Value(f64),
}

#[derive(Debug, Clone, Copy)]
pub struct ShootingConfig {
    pub flow: FlowConfig,
    pub max_iter: usize,
    /// Closure tolerance, relative to `max(1, |x|)`.
    pub tol: f64,
    pub energy: EnergyPin,
    /// Largest divisor `k` tried when looking for the minimal period `T / k`.
    pub max_multiplicity: usize,
}

impl Default for ShootingConfig {
    fn default() -> Self {
        Self {
            flow: FlowConfig::default(),
            max_iter: 30,
            tol: 1e-9,
            energy: EnergyPin::Guess,
            max_multiplicity: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShootingDiagnostics {
    pub iterations: usize,
    /// Residual norm before each Newton step and after the last one.
    pub residual_history: Vec<f64>,
    /// Smallest singular value of the last Newton matrix relative to the largest.
    pub min_singular_ratio: f64,
    pub warnings: Vec<String>,
}

fn phase_normal(f0: &DVector<f64>) -> DVector<f64> {
    let norm = f0.norm();
    let (imax, vmax) = f0
        .iter()
        .enumerate()
        .fold((0, 0.0f64), |acc, (i, v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc });
    if vmax >= (1.0 - 1e-9) * norm {
        let mut e = DVector::zeros(f0.len());
        e[imax] = 1.0;
        e
    } else {
        f0 / norm
    }
}

/// Newton shooting on `F(x, T) = phi^T(x) - x` with a phase condition through
/// the guess and an optional energy equation; steps are minimum-norm
/// least-squares solutions with backtracking.
pub fn find_periodic_orbit(
    h: &dyn Hamiltonian,
    guess_x: &PhasePoint,
    guess_t: f64,
    cfg: &ShootingConfig,
) -> Result<PeriodicOrbit> {
    if !(guess_t > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "period guess must be positive, got {guess_t}"
        )));
    }
    let domain = h.domain();
    let m = 2 * h.base_dim();
    let xg = guess_x.to_vector();
    let f0 = symplectic_gradient(&h.try_gradient(&xg)?);
    if f0.norm() == 0.0 {
        return Err(Error::InvalidArgument(
            "guess is an equilibrium (zero Hamiltonian vector field)".into(),
        ));
    }
    let c = phase_normal(&f0);
    let energy = match cfg.energy {
        EnergyPin::None => None,
        EnergyPin::Guess => Some(h.value(&xg)),
        EnergyPin::Value(e) => Some(e),
    };

    let residual = |x: &DVector<f64>, xt: &DVector<f64>| -> DVector<f64> {
        let rows = m + 1 + usize::from(energy.is_some());
        let mut r = DVector::zeros(rows);
        let mut d = xt - x;
        domain.wrap_phase_delta(&mut d);
        r.rows_mut(0, m).copy_from(&d);
        r[m] = c.dot(&(x - &xg));
        if let Some(e) = energy {
            r[m + 1] = h.value(x) - e;
        }
        r
    };

    let mut x = xg.clone();
    let mut t = guess_t;
    let mut history = Vec::new();
    let mut warnings = Vec::new();
    let mut min_ratio = 1.0;
    let mut iterations = 0;
    let (mut xt, mut phi) = flow_with_jacobian(h, &x, t, &cfg.flow)?;
    let mut r = residual(&x, &xt);
    loop {
        let norm = r.norm();
        history.push(norm);
        let scale = x.norm().max(1.0);
        if norm <= cfg.tol * scale {
            break;
        }
        if iterations >= cfg.max_iter {
            return Err(Error::NoConvergence {
                iterations,
                history,
            });
        }
        iterations += 1;
        let rows = r.len();
        let mut jac = DMatrix::zeros(rows, m + 1);
        jac.view_mut((0, 0), (m, m))
            .copy_from(&(&phi - DMatrix::identity(m, m)));
        let ft = symplectic_gradient(&h.try_gradient(&xt)?);
        jac.view_mut((0, m), (m, 1)).copy_from(&ft);
        for j in 0..m {
            jac[(m, j)] = c[j];
        }
        if energy.is_some() {
            let g = h.try_gradient(&x)?;
            for j in 0..m {
                jac[(m + 1, j)] = g[j];
            }
        }
        let sv = jac.clone().svd(false, false).singular_values;
        let smax = sv.iter().copied().fold(0.0, f64::max);
        let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
        min_ratio = if smax > 0.0 { smin / smax } else { 0.0 };
        if min_ratio < 1e-8 && warnings.is_empty() {
            let near_one = eigenvalues(&phi)
                .iter()
                .filter(|(re, im)| ((re - 1.0).powi(2) + im * im).sqrt() < 1e-4)
                .count();
            warnings.push(format!(
                "degenerate orbit: shooting matrix nearly singular (ratio {min_ratio:e}); \
                 monodromy has {near_one} eigenvalues within 1e-4 of 1 (2 expected)"
            ));
        }
        let dz = lstsq(&jac, &(-&r), 1e-12);
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            let xn = &x + dz.rows(0, m) * lambda;
            let tn = t + dz[m] * lambda;
            if tn > 0.0 {
                if let Ok((xtn, phin)) = flow_with_jacobian(h, &xn, tn, &cfg.flow) {
                    let rn = residual(&xn, &xtn);
                    if rn.norm() < norm {
                        x = xn;
                        t = tn;
                        xt = xtn;
                        phi = phin;
                        r = rn;
                        accepted = true;
                        break;
                    }
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(Error::NoConvergence {
                iterations,
                history,
            });
        }
    }

    let x0 = PhasePoint::from_vector(&x)?;
    let samples = integrate_flow(h, &x0, [0.0, t], &cfg.flow)?;
    let closure_residual = domain.phase_distance(samples.final_state(), &x);
    let mut orbit = PeriodicOrbit {
        energy: h.value(&x),
        x0,
        period: t,
        minimal_period: t,
        multiplicity: 1,
        samples,
        closure_residual,
        domain,
        flow_config: cfg.flow,
        diagnostics: Some(ShootingDiagnostics {
            iterations,
            residual_history: history,
            min_singular_ratio: min_ratio,
            warnings,
        }),
    };
    let tol = (10.0 * cfg.tol * x.norm().max(1.0)).max(10.0 * closure_residual);
    let mp = minimal_period(h, &orbit, tol, cfg.max_multiplicity)?;
    orbit.minimal_period = mp.t_min;
    orbit.multiplicity = mp.multiplicity;
    Ok(orbit)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimalPeriod {
    pub t_min: f64,
    pub multiplicity: usize,
    pub closure: f64,
}

/// Largest `k <= max_k` with `phi^{T/k}(x0)` within `tol` of `x0`; the
/// candidate is then polished by Newton steps along the flow direction.
pub fn minimal_period(
    h: &dyn Hamiltonian,
    orbit: &PeriodicOrbit,
    tol: f64,
    max_k: usize,
) -> Result<MinimalPeriod> {
    let x0 = orbit.x0.to_vector();
    let f0 = symplectic_gradient(&h.try_gradient(&x0)?);
    let dist = |t: f64| -> Result<(f64, DVector<f64>)> {
        let xt = flow_map(h, &x0, t, &orbit.flow_config)?;
        let mut d = &xt - &x0;
        orbit.domain.wrap_phase_delta(&mut d);
        Ok((d.norm(), d))
    };
    for k in (2..=max_k.max(1)).rev() {
        let mut tk = orbit.period / k as f64;
        let (d, _) = dist(tk)?;
        // Cheap rejection: far from closing even allowing for a phase error.
        if d > 1e3 * tol.max(1e-6) {
            continue;
        }
        for _ in 0..4 {
            let (_, delta) = dist(tk)?;
            let ff = f0.dot(&f0);
            if ff == 0.0 {
                break;
            }
            tk -= f0.dot(&delta) / ff;
        }
        let (d, _) = dist(tk)?;
        if d <= tol {
            return Ok(MinimalPeriod {
                t_min: tk,
                multiplicity: k,
                closure: d,
            });
        }
    }
    let (d, _) = dist(orbit.period)?;
    Ok(MinimalPeriod {
        t_min: orbit.period,
        multiplicity: 1,
        closure: d,
    })
}
