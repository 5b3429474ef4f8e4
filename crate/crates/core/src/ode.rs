//! Dormand–Prince 5(4) integrator with continuous output.

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Integrator tolerances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    /// Keep per-step interpolation data. Without it the solution can only be
    /// evaluated at the accepted step times.
    pub dense_output: bool,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-11,
            abs_tol: 1e-12,
            max_step: 0.1,
            dense_output: true,
        }
    }
}

impl FlowConfig {
    pub fn with_tol(rel_tol: f64, abs_tol: f64) -> Self {
        Self {
            rel_tol,
            abs_tol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v > 0.0 && v <= 1e-2;
        if !ok(self.rel_tol) || !ok(self.abs_tol) {
            return Err(Error::InvalidArgument(format!(
                "tolerances must lie in (0, 1e-2], got rel {} abs {}",
                self.rel_tol, self.abs_tol
            )));
        }
        if !(self.max_step > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "max_step must be positive, got {}",
                self.max_step
            )));
        }
        Ok(())
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const MAX_STEPS: usize = 2_000_000;

/// Interpolation coefficients for one accepted step.
#[derive(Debug, Clone)]
struct DenseStep {
    r: [DVector<f64>; 5],
}

/// Output of [`solve`]: accepted step times and states plus dense output.
/// Times are monotone in the direction of integration.
#[derive(Debug, Clone)]
pub struct OdeSolution {
    ts: Vec<f64>,
    ys: Vec<DVector<f64>>,
    dense: Vec<DenseStep>,
}

impl OdeSolution {
    pub fn times(&self) -> &[f64] {
        &self.ts
    }

    pub fn states(&self) -> &[DVector<f64>] {
        &self.ys
    }

    pub fn t_start(&self) -> f64 {
        self.ts[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.ts.last().unwrap()
    }

    pub fn final_state(&self) -> &DVector<f64> {
        self.ys.last().unwrap()
    }

    pub fn has_dense_output(&self) -> bool {
        !self.dense.is_empty() || self.ts.len() == 1
    }

    fn forward(&self) -> bool {
        self.t_end() >= self.t_start()
    }

    /// Index `i` of the step `[ts[i], ts[i+1]]` containing `t` (clamped).
    fn segment(&self, t: f64) -> usize {
        let n = self.ts.len();
        if n < 2 {
            return 0;
        }
        let fwd = self.forward();
        let idx = self
            .ts
            .partition_point(|&s| if fwd { s <= t } else { s >= t });
        idx.clamp(1, n - 1) - 1
    }

    /// State at time `t`, clamped to the integration interval.
    pub fn eval(&self, t: f64) -> DVector<f64> {
        if self.ts.len() == 1 {
            return self.ys[0].clone();
        }
        let i = self.segment(t);
        let (t0, t1) = (self.ts[i], self.ts[i + 1]);
        let h = t1 - t0;
        let theta = ((t - t0) / h).clamp(0.0, 1.0);
        if self.dense.is_empty() {
            return &self.ys[i] * (1.0 - theta) + &self.ys[i + 1] * theta;
        }
        let r = &self.dense[i].r;
        let th1 = 1.0 - theta;
        &r[0] + (&r[1] + (&r[2] + (&r[3] + &r[4] * th1) * theta) * th1) * theta
    }
}

fn error_norm(
    err: &DVector<f64>,
    y0: &DVector<f64>,
    y1: &DVector<f64>,
    cfg: &FlowConfig,
) -> f64 {
    let mut acc = 0.0;
    for i in 0..err.len() {
        let sc = cfg.abs_tol + cfg.rel_tol * y0[i].abs().max(y1[i].abs());
        acc += (err[i] / sc).powi(2);
    }
    (acc / err.len() as f64).sqrt()
}

fn check_finite(v: &DVector<f64>, t: f64, last: &DVector<f64>) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::IntegrationFailure {
            t,
            state: last.as_slice().to_vec(),
            reason: "non-finite right-hand side".into(),
        })
    }
}

/// Integrates `y' = f(t, y)` from `t0` to `t1` (either direction).
pub fn solve<F>(f: F, t0: f64, y0: DVector<f64>, t1: f64, cfg: &FlowConfig) -> Result<OdeSolution>
where
    F: Fn(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    cfg.validate()?;
    let mut sol = OdeSolution {
        ts: vec![t0],
        ys: vec![y0.clone()],
        dense: Vec::new(),
    };
    if t1 == t0 {
        return Ok(sol);
    }
    let dir = (t1 - t0).signum();
    let span = (t1 - t0).abs();

    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y)?;
    check_finite(&k1, t, &y)?;

    // Initial step from the size of y and y'.
    let sc = |v: &DVector<f64>, y: &DVector<f64>| {
        let mut acc = 0.0;
        for i in 0..v.len() {
            acc += (v[i] / (cfg.abs_tol + cfg.rel_tol * y[i].abs())).powi(2);
        }
        (acc / v.len().max(1) as f64).sqrt()
    };
    let d0 = sc(&y, &y);
    let d1 = sc(&k1, &y);
    let mut h = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    h = h.min(cfg.max_step).min(span);

    let mut steps = 0usize;
    let mut last_rejected = false;
    loop {
        steps += 1;
        if steps > MAX_STEPS {
            return Err(Error::IntegrationFailure {
                t,
                state: y.as_slice().to_vec(),
                reason: "maximum number of steps exceeded".into(),
            });
        }
        let remaining = (t1 - t) * dir;
        let mut last = false;
        if h >= remaining - 1e-12 * span {
            h = remaining;
            last = true;
        }
        if h <= 1e-14 * t.abs().max(span) {
            return Err(Error::IntegrationFailure {
                t,
                state: y.as_slice().to_vec(),
                reason: format!("step size underflow (h = {h:e})"),
            });
        }
        let hs = h * dir;
        let k2 = f(t + C2 * hs, &(&y + &k1 * (hs * A21)))?;
        let k3 = f(t + C3 * hs, &(&y + (&k1 * A31 + &k2 * A32) * hs))?;
        let k4 = f(t + C4 * hs, &(&y + (&k1 * A41 + &k2 * A42 + &k3 * A43) * hs))?;
        let k5 = f(
            t + C5 * hs,
            &(&y + (&k1 * A51 + &k2 * A52 + &k3 * A53 + &k4 * A54) * hs),
        )?;
        let k6 = f(
            t + hs,
            &(&y + (&k1 * A61 + &k2 * A62 + &k3 * A63 + &k4 * A64 + &k5 * A65) * hs),
        )?;
        let y_new = &y + (&k1 * A71 + &k3 * A73 + &k4 * A74 + &k5 * A75 + &k6 * A76) * hs;
        let k7 = f(t + hs, &y_new)?;
        let finite = [&k2, &k3, &k4, &k5, &k6, &k7]
            .iter()
            .all(|k| k.iter().all(|v| v.is_finite()))
            && y_new.iter().all(|v| v.is_finite());
        let err_est = (&k1 * E1 + &k3 * E3 + &k4 * E4 + &k5 * E5 + &k6 * E6 + &k7 * E7) * hs;
        let err = if finite {
            error_norm(&err_est, &y, &y_new, cfg)
        } else {
            f64::INFINITY
        };

        if err <= 1.0 {
            let t_new = if last { t1 } else { t + hs };
            if cfg.dense_output {
                let ydiff = &y_new - &y;
                let bspl = &k1 * hs - &ydiff;
                let r4 = &ydiff - &k7 * hs - &bspl;
                let r5 = (&k1 * D1 + &k3 * D3 + &k4 * D4 + &k5 * D5 + &k6 * D6 + &k7 * D7) * hs;
                sol.dense.push(DenseStep {
                    r: [y.clone(), ydiff, bspl, r4, r5],
                });
            }
            t = t_new;
            y = y_new;
            k1 = k7;
            sol.ts.push(t);
            sol.ys.push(y.clone());
            if last {
                return Ok(sol);
            }
            let mut fac = if err == 0.0 { 10.0 } else { 0.9 * err.powf(-0.2) };
            fac = fac.clamp(0.2, 10.0);
            if last_rejected {
                fac = fac.min(1.0);
            }
            h = (h * fac).min(cfg.max_step);
            last_rejected = false;
        } else {
            let fac = if err.is_finite() {
                (0.9 * err.powf(-0.2)).clamp(0.1, 0.9)
            } else {
                0.1
            };
            h *= fac;
            last_rejected = true;
        }
    }
}

/// One Dormand–Prince step of size `h` without error control.
fn dp5_step<F>(f: &F, t: f64, y: &DVector<f64>, h: f64) -> Result<DVector<f64>>
where
    F: Fn(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    let k1 = f(t, y)?;
    let k2 = f(t + C2 * h, &(y + &k1 * (h * A21)))?;
    let k3 = f(t + C3 * h, &(y + (&k1 * A31 + &k2 * A32) * h))?;
    let k4 = f(t + C4 * h, &(y + (&k1 * A41 + &k2 * A42 + &k3 * A43) * h))?;
    let k5 = f(t + C5 * h, &(y + (&k1 * A51 + &k2 * A52 + &k3 * A53 + &k4 * A54) * h))?;
    let k6 = f(
        t + h,
        &(y + (&k1 * A61 + &k2 * A62 + &k3 * A63 + &k4 * A64 + &k5 * A65) * h),
    )?;
    let y_new = y + (&k1 * A71 + &k3 * A73 + &k4 * A74 + &k5 * A75 + &k6 * A76) * h;
    check_finite(&y_new, t + h, y)?;
    Ok(y_new)
}

/// States at the lattice times `k h`, `-back <= k <= fwd`, from `y(0) = y0`
/// by fixed Dormand–Prince steps of size `h / substeps`. The global error of
/// a fixed-step method is smooth in `t`, unlike adaptive dense output, so
/// the states can be differentiated by interpolation.
pub fn solve_on_lattice<F>(
    f: F,
    y0: DVector<f64>,
    h: f64,
    fwd: usize,
    back: usize,
    substeps: usize,
) -> Result<Vec<DVector<f64>>>
where
    F: Fn(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    let m = substeps.max(1);
    let hs = h / m as f64;
    let mut out = vec![y0.clone(); back + fwd + 1];
    for (dir, count) in [(1.0, fwd), (-1.0, back)] {
        let mut y = y0.clone();
        for k in 0..count {
            for j in 0..m {
                let t = dir * (k as f64 * h + j as f64 * hs);
                y = dp5_step(&f, t, &y, dir * hs)?;
            }
            let idx = if dir > 0.0 { back + k + 1 } else { back - k - 1 };
            out[idx] = y.clone();
        }
    }
    Ok(out)
}

/// Classical fixed-step RK4, returning the end state only.
pub fn rk4_fixed<F>(f: F, t0: f64, y0: &DVector<f64>, t1: f64, steps: usize) -> DVector<f64>
where
    F: Fn(f64, &DVector<f64>) -> DVector<f64>,
{
    let h = (t1 - t0) / steps as f64;
    let mut y = y0.clone();
    let mut t = t0;
    for _ in 0..steps {
        let k1 = f(t, &y);
        let k2 = f(t + 0.5 * h, &(&y + &k1 * (0.5 * h)));
        let k3 = f(t + 0.5 * h, &(&y + &k2 * (0.5 * h)));
        let k4 = f(t + h, &(&y + &k3 * h));
        y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        t += h;
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let cfg = FlowConfig::with_tol(1e-10, 1e-12);
        let sol = solve(|_, y| Ok(-y), 0.0, DVector::from_element(1, 1.0), 3.0, &cfg).unwrap();
        assert!((sol.final_state()[0] - (-3.0f64).exp()).abs() < 1e-9);
        for &t in &[0.1, 0.77, 1.5, 2.999] {
            assert!((sol.eval(t)[0] - (-t).exp()).abs() < 1e-8, "t = {t}");
        }
    }

    #[test]
    fn backward_rotation() {
        let cfg = FlowConfig::with_tol(1e-10, 1e-12);
        let f = |_: f64, y: &DVector<f64>| Ok(DVector::from_vec(vec![y[1], -y[0]]));
        let sol = solve(f, 0.0, DVector::from_vec(vec![0.0, 1.0]), -2.0, &cfg).unwrap();
        assert!((sol.final_state()[0] - (-2.0f64).sin()).abs() < 1e-9);
        assert!((sol.eval(-1.3)[0] - (-1.3f64).sin()).abs() < 1e-8);
    }

    #[test]
    fn blowup_reports_failure() {
        let cfg = FlowConfig::with_tol(1e-8, 1e-10);
        let res = solve(|_, y| Ok(y.map(|v| v * v)), 0.0, DVector::from_element(1, 1.0), 2.0, &cfg);
        assert!(matches!(res, Err(Error::IntegrationFailure { .. })));
    }

    #[test]
    fn rejects_loose_tolerance() {
        let cfg = FlowConfig::with_tol(0.1, 1e-8);
        assert!(cfg.validate().is_err());
    }
}
