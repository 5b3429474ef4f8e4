//! The linear control system on `Sp(2d)` induced by a normal form:
//! `L' = Y(t) L + W(B(t)) L` with `Y = [[0, D], [-K, 0]]`, `W(B) = [[0, 0], [B, 0]]`.

mod brackets;
mod dirac;
mod synthesis;

pub use brackets::{
    bracket_closed_forms, bracket_sequence, kd_characterization_check, kd_membership, span_test,
    KdCharacterization, KdMembership, SpanReport,
};
pub use dirac::{dirac_control_span, vertical_span_check, DiracSpan, VerticalSpan};
pub use synthesis::{expm, log_near_identity, synthesize_control, SynthesisConfig, SynthesisResult};

use nalgebra::{DMatrix, DVector};

use crate::curves::Curve;
use crate::error::{Error, Result};
use crate::flow::flow_with_jacobian;
use crate::geometry::{Hamiltonian, Perturbed, PotentialField};
use crate::linalg::{symmetric_basis, SympMatrix};
use crate::normalform::NormalFormData;
use crate::ode::{solve, FlowConfig};
use crate::profiles::Bump;

/// Source of the curve `K(t)`.
#[derive(Debug, Clone)]
pub enum KProfile {
    /// `K(t) = sum_i K_i t^i`.
    Polynomial(Vec<DMatrix<f64>>),
    /// Interpolated curve, for instance the `K` of a normal form.
    Sampled(Curve),
}

/// `D`, `K(t)` on `[0, delta]` and the derived `Y(t)`.
#[derive(Debug, Clone)]
pub struct ControlData {
    /// Diagonal of `D`.
    pub signs: DVector<f64>,
    pub k: KProfile,
    pub delta: f64,
}

impl ControlData {
    pub fn new(signs: &[f64], k: KProfile, delta: f64) -> Result<Self> {
        let d = signs.len();
        if d == 0 || signs.iter().any(|s| (s.abs() - 1.0).abs() > 0.0) {
            return Err(Error::InvalidArgument(format!("D must have entries +-1, got {signs:?}")));
        }
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")));
        }
        let shape_ok = match &k {
            KProfile::Polynomial(c) => !c.is_empty() && c.iter().all(|m| m.shape() == (d, d)),
            KProfile::Sampled(c) => c.shape() == (d, d),
        };
        if !shape_ok {
            return Err(Error::InvalidDimension(format!("K must be {d} x {d}")));
        }
        Ok(Self {
            signs: DVector::from_column_slice(signs),
            k,
            delta,
        })
    }

    /// Constant `K`.
    pub fn constant(signs: &[f64], k0: DMatrix<f64>, delta: f64) -> Result<Self> {
        Self::new(signs, KProfile::Polynomial(vec![k0]), delta)
    }

    /// `D` and `K(t)` of a normal form on `[0, delta]`.
    pub fn from_normal_form(nf: &NormalFormData) -> Self {
        Self {
            signs: nf.signs.clone(),
            k: KProfile::Sampled(nf.k.clone()),
            delta: nf.delta,
        }
    }

    pub fn d(&self) -> usize {
        self.signs.len()
    }

    pub fn d_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.signs)
    }

    /// `k`-th derivative of `K` at `t`, symmetrized.
    pub fn k_derivative(&self, t: f64, order: usize) -> DMatrix<f64> {
        let d = self.d();
        let m = match &self.k {
            KProfile::Polynomial(c) => {
                let mut out = DMatrix::zeros(d, d);
                for (i, ci) in c.iter().enumerate().skip(order) {
                    let mut coef = 1.0;
                    for j in 0..order {
                        coef *= (i - j) as f64;
                    }
                    out += ci * (coef * t.powi((i - order) as i32));
                }
                out
            }
            KProfile::Sampled(c) => {
                if order > 5 {
                    DMatrix::zeros(d, d)
                } else {
                    c.derivative(t, order)
                }
            }
        };
        (&m + m.transpose()) * 0.5
    }

    pub fn k_at(&self, t: f64) -> DMatrix<f64> {
        self.k_derivative(t, 0)
    }

    /// `k`-th derivative of `Y` at `t`.
    pub fn y_derivative(&self, t: f64, order: usize) -> DMatrix<f64> {
        let d = self.d();
        let mut y = DMatrix::zeros(2 * d, 2 * d);
        if order == 0 {
            y.view_mut((0, d), (d, d)).copy_from(&self.d_matrix());
        }
        y.view_mut((d, 0), (d, d)).copy_from(&(-self.k_derivative(t, order)));
        y
    }

    pub fn y_at(&self, t: f64) -> DMatrix<f64> {
        self.y_derivative(t, 0)
    }
}

/// `W(B) = [[0, 0], [B, 0]]`.
pub fn control_matrix(b: &DMatrix<f64>) -> DMatrix<f64> {
    let d = b.nrows();
    let mut w = DMatrix::zeros(2 * d, 2 * d);
    w.view_mut((d, 0), (d, d)).copy_from(b);
    w
}

/// The family `{phi_m(t) E_s}` of bumps times the symmetric basis.
/// Element `i` uses bump `i / S` and matrix `i % S`, `S = d(d+1)/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlBasis {
    d: usize,
    bumps: Vec<Bump>,
    mats: Vec<DMatrix<f64>>,
}

impl ControlBasis {
    /// `count` bumps with equally spaced centers in `(0, delta)`, each
    /// supported strictly inside the interval.
    pub fn bumps_on(d: usize, delta: f64, count: usize) -> Result<Self> {
        if d == 0 || count == 0 || !(delta > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "control basis needs d, count and delta positive (got {d}, {count}, {delta})"
            )));
        }
        let spacing = delta / (count + 1) as f64;
        let bumps = (1..=count).map(|m| Bump::new(m as f64 * spacing, 0.95 * spacing)).collect();
        Ok(Self::from_bumps(d, bumps))
    }

    pub fn from_bumps(d: usize, bumps: Vec<Bump>) -> Self {
        Self {
            d,
            bumps,
            mats: symmetric_basis(d),
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.bumps.len() * self.mats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn bumps(&self) -> &[Bump] {
        &self.bumps
    }

    /// Bump and matrix of element `i`.
    pub fn element(&self, i: usize) -> (&Bump, &DMatrix<f64>) {
        let s = self.mats.len();
        (&self.bumps[i / s], &self.mats[i % s])
    }
}

/// `B(t) = sum_i c_i phi_i(t) E_i` over a [`ControlBasis`].
#[derive(Debug, Clone, PartialEq)]
pub struct ControlCurve {
    pub basis: ControlBasis,
    pub coeffs: DVector<f64>,
}

impl ControlCurve {
    pub fn zero(basis: ControlBasis) -> Self {
        let n = basis.len();
        Self {
            basis,
            coeffs: DVector::zeros(n),
        }
    }

    pub fn new(basis: ControlBasis, coeffs: DVector<f64>) -> Result<Self> {
        if coeffs.len() != basis.len() {
            return Err(Error::InvalidDimension(format!(
                "{} coefficients for a basis of {}",
                coeffs.len(),
                basis.len()
            )));
        }
        Ok(Self { basis, coeffs })
    }

    /// `bump(t) * m` for a single symmetric matrix `m`.
    pub fn single(bump: Bump, m: &DMatrix<f64>) -> Self {
        let basis = ControlBasis::from_bumps(m.nrows(), vec![bump]);
        let coeffs = crate::linalg::symmetric_coords(m);
        Self { basis, coeffs }
    }

    pub fn d(&self) -> usize {
        self.basis.d
    }

    /// `k`-th derivative of `B` at `t`, `k <= 3`.
    pub fn derivative(&self, t: f64, k: usize) -> DMatrix<f64> {
        let d = self.d();
        let mut out = DMatrix::zeros(d, d);
        for (i, c) in self.coeffs.iter().enumerate() {
            if *c == 0.0 {
                continue;
            }
            let (bump, m) = self.basis.element(i);
            let v = bump.jet(t)[k.min(3)];
            if v != 0.0 {
                out += m * (c * v);
            }
        }
        out
    }

    pub fn value(&self, t: f64) -> DMatrix<f64> {
        self.derivative(t, 0)
    }

    /// Hull of the supports of the bumps with nonzero coefficients, `None`
    /// for the zero curve.
    pub fn support(&self) -> Option<(f64, f64)> {
        let mut out: Option<(f64, f64)> = None;
        for (i, c) in self.coeffs.iter().enumerate() {
            if *c != 0.0 {
                let (a, b) = self.basis.element(i).0.support();
                out = Some(match out {
                    None => (a, b),
                    Some((lo, hi)) => (lo.min(a), hi.max(b)),
                });
            }
        }
        out
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            basis: self.basis.clone(),
            coeffs: &self.coeffs * s,
        }
    }
}

/// Tolerances for [`transition_ode_solve`].
pub fn control_flow_config() -> FlowConfig {
    FlowConfig {
        rel_tol: 1e-12,
        abs_tol: 1e-13,
        max_step: 0.02,
        dense_output: false,
    }
}

/// `L(t_end)` for `L' = Y L + W(B) L`, `L(0) = I`.
pub fn transition_ode_solve(cd: &ControlData, b: Option<&ControlCurve>, t_end: f64) -> Result<SympMatrix> {
    if !(t_end > 0.0) || t_end > cd.delta * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "t_end must lie in (0, {}], got {t_end}",
            cd.delta
        )));
    }
    let d = cd.d();
    if let Some(b) = b {
        if b.d() != d {
            return Err(Error::InvalidDimension(format!("control is {} x {}, expected {d}", b.d(), b.d())));
        }
    }
    let m = 2 * d;
    let rhs = |t: f64, y: &DVector<f64>| -> Result<DVector<f64>> {
        let mut a = cd.y_at(t);
        if let Some(b) = b {
            a += control_matrix(&b.value(t));
        }
        let l = DMatrix::from_column_slice(m, m, y.as_slice());
        Ok(DVector::from_column_slice((a * l).as_slice()))
    };
    let y0 = DVector::from_column_slice(DMatrix::<f64>::identity(m, m).as_slice());
    let sol = solve(rhs, 0.0, y0, t_end, &control_flow_config())?;
    let l = DMatrix::from_column_slice(m, m, sol.final_state().as_slice());
    SympMatrix::new(l, 1e-7)
}

/// Transverse `(q_hat, p_hat)` block of the linearized flow of
/// `H o Psi + u` along the chart segment from `0` to `t_end`, with `u` given
/// in chart coordinates. This is the map `L(t_end)` of the control system
/// computed from the full variational equation instead of from `(D, K)`.
pub fn chart_transition_map(
    h: &dyn Hamiltonian,
    nf: &NormalFormData,
    u: Option<&dyn PotentialField>,
    t_end: f64,
    cfg: &FlowConfig,
) -> Result<SympMatrix> {
    if !(t_end > 0.0) || t_end > nf.delta * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "t_end must lie in (0, {}], got {t_end}",
            nf.delta
        )));
    }
    let hc = nf.chart_hamiltonian(h);
    let n = hc.base_dim();
    let origin = DVector::zeros(2 * n);
    let (_, jac) = match u {
        Some(u) => flow_with_jacobian(&Perturbed { h: &hc, u }, &origin, t_end, cfg)?,
        None => flow_with_jacobian(&hc, &origin, t_end, cfg)?,
    };
    let d = n - 1;
    let idx: Vec<usize> = (1..n).chain(n + 1..2 * n).collect();
    let l = DMatrix::from_fn(2 * d, 2 * d, |i, j| jac[(idx[i], idx[j])]);
    SympMatrix::new(l, 1e-6)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nilpotent_and_rotation_closed_forms() {
        let t = 0.7;
        let cd = ControlData::constant(&[1.0], DMatrix::zeros(1, 1), 1.0).unwrap();
        let l = transition_ode_solve(&cd, None, t).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[1.0, t, 0.0, 1.0]);
        assert!((l.matrix() - expected).amax() <= 1e-11);
        let cd = ControlData::constant(&[1.0], DMatrix::identity(1, 1), 1.0).unwrap();
        let l = transition_ode_solve(&cd, None, t).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[t.cos(), t.sin(), -t.sin(), t.cos()]);
        assert!((l.matrix() - expected).amax() <= 1e-11);
    }

    #[test]
    fn polynomial_k_derivatives() {
        let k0 = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 2.0]);
        let k1 = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let k2 = DMatrix::identity(2, 2);
        let cd = ControlData::new(&[1.0, -1.0], KProfile::Polynomial(vec![k0.clone(), k1.clone(), k2.clone()]), 1.0)
            .unwrap();
        let t = 0.3;
        assert!((cd.k_at(t) - (&k0 + &k1 * t + &k2 * (t * t))).amax() <= 1e-15);
        assert!((cd.k_derivative(t, 1) - (&k1 + &k2 * (2.0 * t))).amax() <= 1e-15);
        assert!((cd.k_derivative(t, 2) - &k2 * 2.0).amax() <= 1e-15);
        assert_eq!(cd.k_derivative(t, 3), DMatrix::zeros(2, 2));
        let y = cd.y_at(t);
        let j = crate::linalg::jmat(2);
        assert!(((&j * &y) - (&j * &y).transpose()).amax() <= 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(ControlData::constant(&[2.0], DMatrix::zeros(1, 1), 1.0).is_err());
        assert!(ControlData::constant(&[1.0], DMatrix::zeros(2, 2), 1.0).is_err());
        let cd = ControlData::constant(&[1.0], DMatrix::zeros(1, 1), 1.0).unwrap();
        assert!(transition_ode_solve(&cd, None, 1.5).is_err());
        assert!(transition_ode_solve(&cd, None, 0.0).is_err());
    }

    #[test]
    fn control_curve_is_symmetric_and_supported_inside() {
        let basis = ControlBasis::bumps_on(2, 0.5, 8).unwrap();
        assert_eq!(basis.len(), 24);
        let coeffs = DVector::from_fn(24, |i, _| ((i * 7) % 5) as f64 - 2.0);
        let b = ControlCurve::new(basis, coeffs).unwrap();
        let (lo, hi) = b.support().unwrap();
        assert!(lo > 0.0 && hi < 0.5);
        for t in [0.05, 0.21, 0.4] {
            let v = b.value(t);
            assert!((&v - v.transpose()).amax() == 0.0);
        }
        assert_eq!(b.value(0.0), DMatrix::zeros(2, 2));
        assert_eq!(b.value(0.5), DMatrix::zeros(2, 2));
    }
}
