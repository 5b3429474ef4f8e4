//! Reference models with known periodic orbits.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::Result;
use crate::geometry::{
    AffineMatrixField, ChartDomain, HamiltonianModel, PendulumWell, PhasePoint, QuadraticPotential,
    ZeroPotential,
};

/// A model together with a point on a periodic orbit and its period.
#[derive(Debug, Clone)]
pub struct ZooEntry {
    pub name: &'static str,
    pub model: HamiltonianModel,
    pub x0: PhasePoint,
    pub period: f64,
}

fn diag_field(diag: &[f64]) -> Arc<AffineMatrixField> {
    Arc::new(AffineMatrixField::constant(DMatrix::from_diagonal(
        &DVector::from_column_slice(diag),
    )))
}

fn point(x: &[f64]) -> PhasePoint {
    PhasePoint::from_slice(x).expect("zoo points are valid")
}

/// `H = (p_1^2 + p_2^2)/2 + omega^2 q_2^2 / 2` with `q_1` of period `2 pi`.
/// The orbit through `(0,0,1,0)` winds once around the circle in time `2 pi`.
pub fn harmonic(omega: f64) -> ZooEntry {
    let model = HamiltonianModel::fiberwise_quadratic(
        diag_field(&[1.0, 1.0]),
        Arc::new(QuadraticPotential::diagonal(0.0, &[0.0, omega * omega])),
        ChartDomain::periodic_first(2, 2.0 * PI),
    )
    .unwrap();
    ZooEntry {
        name: "harmonic",
        model,
        x0: point(&[0.0, 0.0, 1.0, 0.0]),
        period: 2.0 * PI,
    }
}

/// `H = |p|^2/2 + (a^2 q_2^2 + b^2 q_3^2)/2` with `q_1` of period `2 pi`.
/// With `a != b` the transverse `K` has simple spectrum.
pub fn anisotropic_harmonic(a: f64, b: f64) -> ZooEntry {
    let model = HamiltonianModel::fiberwise_quadratic(
        diag_field(&[1.0, 1.0, 1.0]),
        Arc::new(QuadraticPotential::diagonal(0.0, &[0.0, a * a, b * b])),
        ChartDomain::periodic_first(3, 2.0 * PI),
    )
    .unwrap();
    ZooEntry {
        name: "anisotropic-harmonic",
        model,
        x0: point(&[0.0, 0.0, 0.0, 1.0, 0.0, 0.0]),
        period: 2.0 * PI,
    }
}

/// `H = (p_1^2 - p_2^2)/2 + q_2^2/2 - 1/2` on a circle times a line; the orbit
/// through `(0,0,1,0)` lies on the zero level with hyperbolic transverse part.
pub fn nonconvex_d1() -> ZooEntry {
    let model = HamiltonianModel::fiberwise_quadratic(
        diag_field(&[1.0, -1.0]),
        Arc::new(QuadraticPotential::diagonal(-0.5, &[0.0, 1.0])),
        ChartDomain::periodic_first(2, 2.0 * PI),
    )
    .unwrap();
    ZooEntry {
        name: "nonconvex-d1",
        model,
        x0: point(&[0.0, 0.0, 1.0, 0.0]),
        period: 2.0 * PI,
    }
}

/// `H = (p_1^2 - p_2^2 + p_3^2)/2 + (q_2^2 + 2 q_3^2)/2 - 1/2`.
pub fn nonconvex_d2() -> ZooEntry {
    let model = HamiltonianModel::fiberwise_quadratic(
        diag_field(&[1.0, -1.0, 1.0]),
        Arc::new(QuadraticPotential::diagonal(-0.5, &[0.0, 1.0, 2.0])),
        ChartDomain::periodic_first(3, 2.0 * PI),
    )
    .unwrap();
    ZooEntry {
        name: "nonconvex-d2",
        model,
        x0: point(&[0.0, 0.0, 0.0, 1.0, 0.0, 0.0]),
        period: 2.0 * PI,
    }
}

/// Natural system `|p|^2/2 + (1 - cos q_1) + kappa |q_hat|^2 (1 + mu q_1^2)/2`
/// on `R^{d+1}`. The orbit through the turning point `(amplitude, 0, .., 0)`
/// is a libration along the `q_1` axis.
pub fn pendulum_well(d: usize, kappa: f64, mu: f64, amplitude: f64) -> ZooEntry {
    let n = d + 1;
    let model = HamiltonianModel::natural(
        diag_field(&vec![1.0; n]),
        Arc::new(PendulumWell {
            n,
            alpha: 1.0,
            kappa,
            mu,
        }),
        ChartDomain::euclidean(n),
    )
    .unwrap();
    let mut x = vec![0.0; 2 * n];
    x[0] = amplitude;
    ZooEntry {
        name: "pendulum-well",
        model,
        x0: point(&x),
        period: pendulum_period(amplitude),
    }
}

/// Same natural system started at the bottom of the well with momentum `p_1`,
/// a rotation over the top when `p_1 > 2`; `q_1` is treated as periodic.
pub fn pendulum_rotation(d: usize, kappa: f64, p1: f64) -> ZooEntry {
    let n = d + 1;
    let model = HamiltonianModel::natural(
        diag_field(&vec![1.0; n]),
        Arc::new(PendulumWell {
            n,
            alpha: 1.0,
            kappa,
            mu: 0.0,
        }),
        ChartDomain::periodic_first(n, 2.0 * PI),
    )
    .unwrap();
    let mut x = vec![0.0; 2 * n];
    x[n] = p1;
    // Time to cross one period: 2 * int_0^pi dq / sqrt(p1^2 - 2(1 - cos q)).
    let k = 2.0 / p1;
    let period = 2.0 * 2.0 / p1 * complete_elliptic_k(k);
    ZooEntry {
        name: "pendulum-rotation",
        model,
        x0: point(&x),
        period,
    }
}

/// `H = p_1` with `q_1` of period `2 pi`; every orbit is periodic.
pub fn momentum_linear(d: usize) -> ZooEntry {
    let n = d + 1;
    ZooEntry {
        name: "momentum-linear",
        model: HamiltonianModel::momentum_linear(ChartDomain::periodic_first(n, 2.0 * PI)).unwrap(),
        x0: point(&vec![0.0; 2 * n]),
        period: 2.0 * PI,
    }
}

/// `H = (p_1^2 - p_2^2)/2` on the torus `(R / 2 pi Z)^2`; the orbit through
/// `(0,0,1,1)` is a closed null geodesic on the zero level.
pub fn lorentz_torus() -> ZooEntry {
    let model = HamiltonianModel::fiberwise_quadratic(
        diag_field(&[1.0, -1.0]),
        Arc::new(ZeroPotential { n: 2 }),
        ChartDomain::with_periods(vec![Some(2.0 * PI), Some(2.0 * PI)]),
    )
    .unwrap();
    ZooEntry {
        name: "lorentz-torus",
        model,
        x0: point(&[0.0, 0.0, 1.0, 1.0]),
        period: 2.0 * PI,
    }
}

/// `H = |p|^2/2 + (q_1^2 + 4 q_2^2)/2`; the orbit through `(0,0,1,1)` projects
/// to a figure eight with a self-intersection at the origin (times 0 and pi).
pub fn figure_eight() -> ZooEntry {
    let model = HamiltonianModel::natural(
        diag_field(&[1.0, 1.0]),
        Arc::new(QuadraticPotential::diagonal(0.0, &[1.0, 4.0])),
        ChartDomain::euclidean(2),
    )
    .unwrap();
    ZooEntry {
        name: "figure-eight",
        model,
        x0: point(&[0.0, 0.0, 1.0, 1.0]),
        period: 2.0 * PI,
    }
}

/// Convex flat model `|p|^2/2` with `q_1` periodic, orbit along `q_1`.
pub fn free_particle(d: usize) -> ZooEntry {
    let n = d + 1;
    let model = HamiltonianModel::fiberwise_quadratic(
        diag_field(&vec![1.0; n]),
        Arc::new(ZeroPotential { n }),
        ChartDomain::periodic_first(n, 2.0 * PI),
    )
    .unwrap();
    let mut x = vec![0.0; 2 * n];
    x[n] = 1.0;
    ZooEntry {
        name: "free-particle",
        model,
        x0: point(&x),
        period: 2.0 * PI,
    }
}

/// Random `G(q) = G_0 + sum_k q_k G_k` with `G_0` symmetric, well conditioned
/// and of random signature, small symmetric slopes, and `V = 0`.
pub fn random_fiberwise_quadratic(rng: &mut impl Rng, d: usize) -> Result<HamiltonianModel> {
    let n = d + 1;
    let sym = |rng: &mut dyn rand::RngCore, scale: f64| {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0) * scale);
        (&a + a.transpose()) * 0.5
    };
    // Orthogonal factor from the QR decomposition of a random matrix.
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let q = a.qr().q();
    let lam = DVector::from_fn(n, |_, _| {
        let mag = rng.random_range(0.5..2.0);
        if rng.random_bool(0.5) {
            mag
        } else {
            -mag
        }
    });
    let g0 = &q * DMatrix::from_diagonal(&lam) * q.transpose();
    let slopes = (0..n).map(|_| sym(rng, 0.1)).collect();
    HamiltonianModel::fiberwise_quadratic(
        Arc::new(AffineMatrixField { g0, slopes }),
        Arc::new(ZeroPotential { n }),
        ChartDomain::euclidean(n),
    )
}

/// Complete elliptic integral of the first kind `K(k)` via the AGM.
pub fn complete_elliptic_k(k: f64) -> f64 {
    let mut a = 1.0;
    let mut b = (1.0 - k * k).sqrt();
    for _ in 0..60 {
        let an = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = an;
        if (a - b).abs() < 1e-16 * a {
            break;
        }
    }
    PI / (2.0 * a)
}

/// Period of the libration `q'' = -sin q` with amplitude `A`: `4 K(sin(A/2))`.
pub fn pendulum_period(amplitude: f64) -> f64 {
    4.0 * complete_elliptic_k((0.5 * amplitude).sin())
}
