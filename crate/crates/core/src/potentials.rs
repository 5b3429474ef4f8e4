//! Admissible potentials realizing prescribed second jets along the chart
//! segment `{t e_1}`, Dirac-like first-jet potentials, and their transport
//! back to the original coordinates.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::control::ControlCurve;
use crate::error::{Error, Result};
use crate::geometry::{PotentialField, Support};
use crate::normalform::FiberedChart;
use crate::orbits::PeriodicOrbit;
use crate::profiles::{Bump, Plateau, RadialCutoff};

fn split(q: &DVector<f64>) -> (f64, Vec<f64>) {
    (q[0], q.iter().skip(1).copied().collect())
}

fn cylinder(n: usize, a: f64, b: f64, r: f64) -> Support {
    let mut lo = DVector::from_element(n, -r);
    let mut hi = DVector::from_element(n, r);
    lo[0] = a;
    hi[0] = b;
    Support::Bounded { lo, hi }
}

/// `u(q_1, q_hat) = q_hat^T B(q_1) q_hat / 2 * chi(|q_hat| / r)` in chart
/// coordinates. Value and differential vanish on `{q_hat = 0}` and the
/// `q_hat q_hat` Hessian there is `B(q_1)`.
#[derive(Debug, Clone)]
pub struct AdmissiblePotential {
    b: ControlCurve,
    cutoff: RadialCutoff,
}

/// Potential whose `q_hat q_hat` Hessian along the segment is `b`.
pub fn admissible_from_b(b: &ControlCurve, r: f64) -> Result<AdmissiblePotential> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidArgument(format!("tube radius must be positive, got {r}")));
    }
    Ok(AdmissiblePotential {
        b: b.clone(),
        cutoff: RadialCutoff { radius: r },
    })
}

impl AdmissiblePotential {
    pub fn b(&self) -> &ControlCurve {
        &self.b
    }

    pub fn radius(&self) -> f64 {
        self.cutoff.radius
    }

    /// The control `B_u = -d2_{q_hat q_hat} u` this potential induces in
    /// the transition equation along the segment.
    pub fn control(&self) -> ControlCurve {
        self.b.scaled(-1.0)
    }

    /// `(B(t), B'(t), B''(t))`, all zero outside the support.
    fn b_jet(&self, t: f64) -> [DMatrix<f64>; 3] {
        [self.b.derivative(t, 0), self.b.derivative(t, 1), self.b.derivative(t, 2)]
    }
}

impl PotentialField for AdmissiblePotential {
    fn base_dim(&self) -> usize {
        self.b.d() + 1
    }

    fn value(&self, q: &DVector<f64>) -> f64 {
        let (t, x) = split(q);
        let (chi, _, _) = self.cutoff.jet(&x);
        if chi == 0.0 {
            return 0.0;
        }
        let x = DVector::from_vec(x);
        0.5 * x.dot(&(self.b.value(t) * &x)) * chi
    }

    fn gradient(&self, q: &DVector<f64>) -> DVector<f64> {
        let n = self.base_dim();
        let (t, xs) = split(q);
        let (chi, gchi, _) = self.cutoff.jet(&xs);
        let mut g = DVector::zeros(n);
        if chi == 0.0 {
            return g;
        }
        let x = DVector::from_vec(xs);
        let gchi = DVector::from_vec(gchi);
        let [b, b1, _] = self.b_jet(t);
        let bx = &b * &x;
        g[0] = 0.5 * x.dot(&(&b1 * &x)) * chi;
        let gh = &bx * chi + &gchi * (0.5 * x.dot(&bx));
        g.rows_mut(1, n - 1).copy_from(&gh);
        g
    }

    fn hessian(&self, q: &DVector<f64>) -> DMatrix<f64> {
        let n = self.base_dim();
        let d = n - 1;
        let (t, xs) = split(q);
        let (chi, gchi, hchi) = self.cutoff.jet(&xs);
        let mut h = DMatrix::zeros(n, n);
        if chi == 0.0 {
            return h;
        }
        let x = DVector::from_vec(xs);
        let gchi = DVector::from_vec(gchi);
        let hchi = DMatrix::from_fn(d, d, |i, j| hchi[i][j]);
        let [b, b1, b2] = self.b_jet(t);
        let bx = &b * &x;
        let b1x = &b1 * &x;
        let quad = 0.5 * x.dot(&bx);
        h[(0, 0)] = 0.5 * x.dot(&(&b2 * &x)) * chi;
        let cross = &b1x * chi + &gchi * (0.5 * x.dot(&b1x));
        for i in 0..d {
            h[(0, 1 + i)] = cross[i];
            h[(1 + i, 0)] = cross[i];
        }
        let hh = &b * chi + &bx * gchi.transpose() + &gchi * bx.transpose() + &hchi * quad;
        h.view_mut((1, 1), (d, d)).copy_from(&hh);
        h
    }

    fn support(&self) -> Support {
        let n = self.base_dim();
        match self.b.support() {
            Some((a, b)) => cylinder(n, a, b, self.cutoff.radius),
            None => cylinder(n, 0.0, 0.0, 0.0),
        }
    }

    fn describe(&self) -> String {
        let bumps: Vec<String> = self
            .b
            .basis
            .bumps()
            .iter()
            .map(|b| format!("{:.12e}:{:.12e}", b.center, b.half_width))
            .collect();
        let coeffs: Vec<String> = self.b.coeffs.iter().map(|c| format!("{c:.12e}")).collect();
        format!(
            "kind = admissible\nd = {}\nradius = {:.12e}\ncutoff = C3 plateau, 1 on [0, r/2], 0 beyond r\nbumps = {}\ncoefficients = {}",
            self.b.d(),
            self.cutoff.radius,
            bumps.join(" "),
            coeffs.join(" ")
        )
    }
}

/// Potential with `du(t e_1) = e_j delta_w(t - sigma)` along the segment,
/// `delta_w` a unit-mass bump of half-width `w`. For `j = 0` the potential
/// is the cumulative bump in `q_1`, cut off after `axial_end`.
#[derive(Debug, Clone)]
pub struct DiracJetPotential {
    n: usize,
    j: usize,
    bump: Bump,
    cutoff: RadialCutoff,
    axial: Plateau,
}

pub fn dirac_jet_potential(
    n: usize,
    j: usize,
    sigma: f64,
    w: f64,
    r: f64,
    axial_end: f64,
) -> Result<DiracJetPotential> {
    if j >= n {
        return Err(Error::InvalidArgument(format!("direction {j} out of range for base dimension {n}")));
    }
    if !(w > 0.0) || !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("width and radius must be positive, got {w}, {r}")));
    }
    if j == 0 && axial_end < sigma + w {
        return Err(Error::InvalidArgument(format!(
            "axial cutoff {axial_end} starts inside the bump support ending at {}",
            sigma + w
        )));
    }
    Ok(DiracJetPotential {
        n,
        j,
        bump: Bump::dirac(sigma, w),
        cutoff: RadialCutoff { radius: r },
        axial: Plateau {
            inner: axial_end,
            outer: axial_end + w,
        },
    })
}

impl DiracJetPotential {
    pub fn bump(&self) -> &Bump {
        &self.bump
    }

    /// Axial profile `f(q_1)` with two derivatives for the `j = 0` case.
    fn axial_jet(&self, t: f64) -> [f64; 3] {
        let c = self.bump.cumulative(t);
        let [b0, b1, _, _] = self.bump.jet(t);
        let [a0, a1, a2] = self.axial.jet(t);
        [c * a0, b0 * a0 + c * a1, b1 * a0 + 2.0 * b0 * a1 + c * a2]
    }
}

impl PotentialField for DiracJetPotential {
    fn base_dim(&self) -> usize {
        self.n
    }

    fn value(&self, q: &DVector<f64>) -> f64 {
        let (t, x) = split(q);
        let (chi, _, _) = self.cutoff.jet(&x);
        if self.j == 0 {
            self.axial_jet(t)[0] * chi
        } else {
            self.bump.value(t) * x[self.j - 1] * chi
        }
    }

    fn gradient(&self, q: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        let (t, x) = split(q);
        let (chi, gchi, _) = self.cutoff.jet(&x);
        let mut g = DVector::zeros(n);
        if self.j == 0 {
            let [f0, f1, _] = self.axial_jet(t);
            g[0] = f1 * chi;
            for i in 0..n - 1 {
                g[1 + i] = f0 * gchi[i];
            }
        } else {
            let [b0, b1, _, _] = self.bump.jet(t);
            let xj = x[self.j - 1];
            g[0] = b1 * xj * chi;
            for i in 0..n - 1 {
                g[1 + i] = b0 * xj * gchi[i];
            }
            g[self.j] += b0 * chi;
        }
        g
    }

    fn hessian(&self, q: &DVector<f64>) -> DMatrix<f64> {
        let n = self.n;
        let d = n - 1;
        let (t, x) = split(q);
        let (chi, gchi, hchi) = self.cutoff.jet(&x);
        let mut h = DMatrix::zeros(n, n);
        if self.j == 0 {
            let [f0, f1, f2] = self.axial_jet(t);
            h[(0, 0)] = f2 * chi;
            for i in 0..d {
                h[(0, 1 + i)] = f1 * gchi[i];
                h[(1 + i, 0)] = f1 * gchi[i];
                for k in 0..d {
                    h[(1 + i, 1 + k)] = f0 * hchi[i][k];
                }
            }
        } else {
            let [b0, b1, b2, _] = self.bump.jet(t);
            let jj = self.j - 1;
            let xj = x[jj];
            h[(0, 0)] = b2 * xj * chi;
            for i in 0..d {
                let mut cross = b1 * xj * gchi[i];
                if i == jj {
                    cross += b1 * chi;
                }
                h[(0, 1 + i)] = cross;
                h[(1 + i, 0)] = cross;
                for k in 0..d {
                    let mut v = b0 * xj * hchi[i][k];
                    if i == jj {
                        v += b0 * gchi[k];
                    }
                    if k == jj {
                        v += b0 * gchi[i];
                    }
                    h[(1 + i, 1 + k)] = v;
                }
            }
        }
        h
    }

    fn support(&self) -> Support {
        let (a, b) = self.bump.support();
        let b = if self.j == 0 { self.axial.outer } else { b };
        cylinder(self.n, a, b, self.cutoff.radius)
    }

    fn describe(&self) -> String {
        format!(
            "kind = dirac-jet\nn = {}\ndirection = {}\ncenter = {:.12e}\nhalf_width = {:.12e}\nradius = {:.12e}\naxial_end = {:.12e}",
            self.n, self.j, self.bump.center, self.bump.half_width, self.cutoff.radius, self.axial.inner
        )
    }
}

/// A chart-coordinate potential `u` seen in original coordinates as
/// `u o (base part of the chart)^{-1}`, zero outside its support.
#[derive(Clone)]
pub struct TransportedPotential {
    inner: Arc<dyn PotentialField>,
    chart: FiberedChart,
    /// Chart-coordinate cylinder `q_1 in [a, b]`, `|q_hat|_inf <= r`.
    lo: DVector<f64>,
    hi: DVector<f64>,
    /// Original-coordinate ball containing the image of the support.
    center: DVector<f64>,
    reach: f64,
}

impl fmt::Debug for TransportedPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TransportedPotential({:?})", self.inner)
    }
}

/// Pushes a chart-coordinate potential forward to the original coordinates.
pub fn transport_potential(u: Arc<dyn PotentialField>, chart: &FiberedChart) -> Result<TransportedPotential> {
    let n = chart.base_dim();
    if u.base_dim() != n {
        return Err(Error::Transport(format!(
            "potential has base dimension {}, chart {n}",
            u.base_dim()
        )));
    }
    let Support::Bounded { lo, hi } = u.support() else {
        return Err(Error::Transport("potential support is unbounded".into()));
    };
    let radial = (1..n).map(|i| lo[i].abs().max(hi[i].abs())).fold(0.0, f64::max);
    if lo[0] < -chart.delta || hi[0] > chart.delta || radial > chart.radius {
        return Err(Error::Transport(format!(
            "support q_1 in [{}, {}], radius {radial} exits the chart (delta {}, radius {})",
            lo[0], hi[0], chart.delta, chart.radius
        )));
    }
    let mid = (&lo + &hi) * 0.5;
    let (center, _, _) = chart.base_jet(&mid);
    let mut reach = 0.0f64;
    let steps = 16;
    for k in 0..=steps {
        let t = lo[0] + (hi[0] - lo[0]) * k as f64 / steps as f64;
        for corner in 0..(1usize << (n - 1)) {
            let mut q = mid.clone();
            q[0] = t;
            for i in 1..n {
                q[i] = if corner >> (i - 1) & 1 == 1 { hi[i] } else { lo[i] };
            }
            let (img, _, _) = chart.base_jet(&q);
            reach = reach.max(chart.domain().base_distance(&img, &center));
        }
    }
    // Room for the curvature of the image between samples.
    let reach = 1.25 * reach + 1e-9 + (hi[0] - lo[0]) / steps as f64;
    Ok(TransportedPotential {
        inner: u,
        chart: chart.clone(),
        lo,
        hi,
        center,
        reach,
    })
}

impl TransportedPotential {
    pub fn inner(&self) -> &Arc<dyn PotentialField> {
        &self.inner
    }

    pub fn chart(&self) -> &FiberedChart {
        &self.chart
    }

    /// Chart coordinates of `q` if it may lie in the support.
    fn locate(&self, q: &DVector<f64>) -> Option<DVector<f64>> {
        if self.chart.domain().base_distance(q, &self.center) > self.reach {
            return None;
        }
        let qc = self.chart.base_inverse(q)?;
        let inside = qc.iter().zip(self.lo.iter().zip(self.hi.iter())).all(|(x, (a, b))| x >= a && x <= b);
        inside.then_some(qc)
    }

    /// Distance in chart coordinates from the chart preimage of `q` to the
    /// support cylinder, `None` when `q` is far outside the chart.
    pub fn chart_distance(&self, q: &DVector<f64>) -> Option<f64> {
        let qc = self.chart.base_inverse(q)?;
        let n = qc.len();
        let d1 = (self.lo[0] - qc[0]).max(qc[0] - self.hi[0]).max(0.0);
        let r = (1..n).map(|i| self.hi[i]).fold(0.0, f64::max);
        let rad = (1..n).map(|i| qc[i] * qc[i]).sum::<f64>().sqrt();
        let d2 = (rad - r).max(0.0);
        Some((d1 * d1 + d2 * d2).sqrt())
    }

    /// Whether `q` lies in the original-coordinate ball around the support.
    pub fn near(&self, q: &DVector<f64>, margin: f64) -> bool {
        self.chart.domain().base_distance(q, &self.center) <= self.reach + margin
    }
}

impl PotentialField for TransportedPotential {
    fn base_dim(&self) -> usize {
        self.chart.base_dim()
    }

    fn value(&self, q: &DVector<f64>) -> f64 {
        self.locate(q).map_or(0.0, |qc| self.inner.value(&qc))
    }

    fn gradient(&self, q: &DVector<f64>) -> DVector<f64> {
        let n = self.base_dim();
        let Some(qc) = self.locate(q) else {
            return DVector::zeros(n);
        };
        let (_, f, _) = self.chart.base_jet(&qc);
        let Some(g) = f.try_inverse() else {
            return DVector::from_element(n, f64::NAN);
        };
        g.transpose() * self.inner.gradient(&qc)
    }

    fn hessian(&self, q: &DVector<f64>) -> DMatrix<f64> {
        let n = self.base_dim();
        let Some(qc) = self.locate(q) else {
            return DMatrix::zeros(n, n);
        };
        let (_, f, hphi) = self.chart.base_jet(&qc);
        let Some(g) = f.try_inverse() else {
            return DMatrix::from_element(n, n, f64::NAN);
        };
        let grad = g.transpose() * self.inner.gradient(&qc);
        let mut inner = self.inner.hessian(&qc);
        for (m, hm) in hphi.iter().enumerate() {
            inner -= hm * grad[m];
        }
        g.transpose() * inner * g
    }

    fn support(&self) -> Support {
        let n = self.base_dim();
        let r = DVector::from_element(n, self.reach);
        Support::Bounded {
            lo: &self.center - &r,
            hi: &self.center + &r,
        }
    }

    fn describe(&self) -> String {
        format!(
            "kind = transported\nchart_pieces = {}\n{}",
            self.chart.pieces().iter().map(|p| p.describe()).collect::<Vec<_>>().join("; "),
            self.inner.describe()
        )
    }
}

fn in_window(t: f64, window: (f64, f64), period: f64) -> bool {
    let (a, b) = window;
    let s = a + (t - a).rem_euclid(period);
    s <= b
}

/// Number of orbit samples per minimal period in the support scans.
const SCAN_SAMPLES: usize = 4000;

/// True when the support of `u` stays farther than `margin` (chart
/// coordinates) from the projected orbit at every sampled time outside
/// `window`.
pub fn disjoint_support_check(
    u: &TransportedPotential,
    orbit: &PeriodicOrbit,
    window: (f64, f64),
    margin: f64,
) -> bool {
    let period = orbit.minimal_period;
    for k in 0..SCAN_SAMPLES {
        let t = period * k as f64 / SCAN_SAMPLES as f64;
        if in_window(t, window, period) {
            continue;
        }
        let q = orbit.base_point(t);
        if !u.near(&q, margin) {
            continue;
        }
        match u.chart_distance(&q) {
            Some(dist) if dist <= margin => return false,
            _ => {}
        }
    }
    true
}

/// `min |Q(s) - Q(t)|` over `s` in `support` and `t` outside `window`.
pub fn orbit_self_distance(orbit: &PeriodicOrbit, support: (f64, f64), window: (f64, f64)) -> f64 {
    let period = orbit.minimal_period;
    let inner: Vec<DVector<f64>> = (0..=64)
        .map(|k| orbit.base_point(support.0 + (support.1 - support.0) * k as f64 / 64.0))
        .collect();
    let mut best = f64::INFINITY;
    for k in 0..SCAN_SAMPLES {
        let t = period * k as f64 / SCAN_SAMPLES as f64;
        if in_window(t, window, period) {
            continue;
        }
        let q = orbit.base_point(t);
        for p in &inner {
            best = best.min(orbit.domain.base_distance(&q, p));
        }
    }
    best
}

/// Tube radius `min(self distance / 4, chart radius / 4)`, the self
/// distance converted to chart units by the largest stretch of the chart's
/// base map along the segment.
pub fn default_tube_radius(
    orbit: &PeriodicOrbit,
    chart: &FiberedChart,
    support: (f64, f64),
    window: (f64, f64),
) -> f64 {
    let n = chart.base_dim();
    let mut stretch = 0.0f64;
    for k in 0..=16 {
        let mut q = DVector::zeros(n);
        q[0] = support.0 + (support.1 - support.0) * k as f64 / 16.0;
        let (_, f, _) = chart.base_jet(&q);
        stretch = stretch.max(f.svd(false, false).singular_values.max());
    }
    let self_dist = orbit_self_distance(orbit, support, window) / stretch.max(1e-300);
    (0.25 * self_dist).min(0.25 * chart.radius)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::ControlBasis;
    use crate::geometry::fd_gradient;

    fn check_derivatives(u: &dyn PotentialField, q: &DVector<f64>) {
        let g = u.gradient(q);
        let num = fd_gradient(|x| u.value(x), q, 1e-5);
        assert!((&g - &num).amax() <= 1e-6 * (1.0 + g.amax()), "{g} {num}");
        let h = u.hessian(q);
        let n = q.len();
        for k in 0..n {
            let col = fd_gradient(|x| u.gradient(x)[k], q, 1e-5);
            for i in 0..n {
                assert!((h[(k, i)] - col[i]).abs() <= 1e-5 * (1.0 + h.amax()), "{h}");
            }
        }
    }

    fn sample_curve(d: usize) -> ControlCurve {
        let basis = ControlBasis::bumps_on(d, 0.5, 4).unwrap();
        let coeffs = DVector::from_fn(basis.len(), |i, _| (i as f64 * 0.7).sin());
        ControlCurve::new(basis, coeffs).unwrap()
    }

    #[test]
    fn admissible_potential_has_prescribed_hessian() {
        let b = sample_curve(2);
        let u = admissible_from_b(&b, 0.2).unwrap();
        for k in 0..200 {
            let t = 0.5 * k as f64 / 199.0;
            let q = DVector::from_vec(vec![t, 0.0, 0.0]);
            assert_eq!(u.value(&q), 0.0);
            assert!(u.gradient(&q).amax() == 0.0);
            let h = u.hessian(&q);
            assert!((h.view((1, 1), (2, 2)) - b.value(t)).amax() <= 1e-12);
        }
        check_derivatives(&u, &DVector::from_vec(vec![0.21, 0.05, -0.03]));
        check_derivatives(&u, &DVector::from_vec(vec![0.33, 0.12, 0.07]));
        let far = DVector::from_vec(vec![0.3, 0.25, 0.0]);
        assert_eq!(u.value(&far), 0.0);
    }

    #[test]
    fn zero_curve_gives_zero_potential() {
        let basis = ControlBasis::bumps_on(1, 0.5, 8).unwrap();
        let u = admissible_from_b(&ControlCurve::zero(basis), 0.1).unwrap();
        let q = DVector::from_vec(vec![0.2, 0.03]);
        assert_eq!(u.value(&q), 0.0);
        assert_eq!(u.hessian(&q), DMatrix::zeros(2, 2));
    }

    #[test]
    fn dirac_jets_along_the_segment() {
        for j in 0..3 {
            let u = dirac_jet_potential(3, j, 0.3, 0.05, 0.2, 0.45).unwrap();
            let mut mass = 0.0;
            let steps = 4000;
            for k in 0..steps {
                let t = 0.2 + 0.2 * (k as f64 + 0.5) / steps as f64;
                let g = u.gradient(&DVector::from_vec(vec![t, 0.0, 0.0]));
                let expected = u.bump().value(t);
                assert!((g[j] - expected).abs() <= 1e-8 * (1.0 + expected));
                for i in (0..3).filter(|&i| i != j) {
                    assert!(g[i].abs() <= 1e-12);
                }
                mass += g[j] * 0.2 / steps as f64;
            }
            assert!((mass - 1.0).abs() <= 1e-8, "{mass}");
            check_derivatives(&u, &DVector::from_vec(vec![0.31, 0.06, -0.04]));
        }
    }
}
