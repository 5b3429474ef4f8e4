use nalgebra::DVector;

use crate::error::{Error, Result};

/// A point `(q, p)` of `T*R^{d+1}`; `q` and `p` both have length `d + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    q: DVector<f64>,
    p: DVector<f64>,
}

impl PhasePoint {
    pub fn new(q: DVector<f64>, p: DVector<f64>) -> Result<Self> {
        if q.len() != p.len() {
            return Err(Error::InvalidDimension(format!(
                "q has length {} but p has length {}",
                q.len(),
                p.len()
            )));
        }
        if q.len() < 2 {
            return Err(Error::InvalidDimension(format!(
                "base dimension must be at least 2 (d >= 1), got {}",
                q.len()
            )));
        }
        if !q.iter().chain(p.iter()).all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument("phase point has non-finite entries".into()));
        }
        Ok(Self { q, p })
    }

    /// Splits `[q_1..q_n, p_1..p_n]`.
    pub fn from_slice(x: &[f64]) -> Result<Self> {
        if x.len() % 2 != 0 {
            return Err(Error::InvalidDimension(format!(
                "phase vector must have even length, got {}",
                x.len()
            )));
        }
        let n = x.len() / 2;
        Self::new(
            DVector::from_column_slice(&x[..n]),
            DVector::from_column_slice(&x[n..]),
        )
    }

    pub fn from_vector(x: &DVector<f64>) -> Result<Self> {
        Self::from_slice(x.as_slice())
    }

    pub fn q(&self) -> &DVector<f64> {
        &self.q
    }

    pub fn p(&self) -> &DVector<f64> {
        &self.p
    }

    /// Base dimension `d + 1`.
    pub fn base_dim(&self) -> usize {
        self.q.len()
    }

    /// Transverse dimension `d`.
    pub fn d(&self) -> usize {
        self.q.len() - 1
    }

    pub fn to_vector(&self) -> DVector<f64> {
        let n = self.q.len();
        DVector::from_fn(2 * n, |i, _| if i < n { self.q[i] } else { self.p[i - n] })
    }
}

/// Coordinate chart of the base: `R^{d+1}`, optionally with periodic coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartDomain {
    periods: Vec<Option<f64>>,
}

impl ChartDomain {
    pub fn euclidean(n: usize) -> Self {
        Self {
            periods: vec![None; n],
        }
    }

    /// `q_1` periodic with the given period, the rest Euclidean.
    pub fn periodic_first(n: usize, period: f64) -> Self {
        let mut periods = vec![None; n];
        periods[0] = Some(period);
        Self { periods }
    }

    pub fn with_periods(periods: Vec<Option<f64>>) -> Self {
        Self { periods }
    }

    pub fn base_dim(&self) -> usize {
        self.periods.len()
    }

    pub fn period(&self, i: usize) -> Option<f64> {
        self.periods.get(i).copied().flatten()
    }

    pub fn is_euclidean(&self) -> bool {
        self.periods.iter().all(|p| p.is_none())
    }

    /// Reduces the base part of a phase-space difference to the nearest lift.
    pub fn wrap_phase_delta(&self, dx: &mut DVector<f64>) {
        for (i, per) in self.periods.iter().enumerate() {
            if let Some(l) = per {
                dx[i] -= l * (dx[i] / l).round();
            }
        }
    }

    /// Same for a base-space difference.
    pub fn wrap_base_delta(&self, dq: &mut DVector<f64>) {
        for (i, per) in self.periods.iter().enumerate() {
            if let Some(l) = per {
                dq[i] -= l * (dq[i] / l).round();
            }
        }
    }

    pub fn phase_distance(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        let mut d = a - b;
        self.wrap_phase_delta(&mut d);
        d.norm()
    }

    pub fn base_distance(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        let mut d = a - b;
        self.wrap_base_delta(&mut d);
        d.norm()
    }
}
