use crate::flow::Trajectory;
use crate::geometry::{fiberwise_iso_energetic_test, Hamiltonian};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigmaEventKind {
    /// The bordered determinant changes sign inside `[t_lo, t_hi]`.
    SignChange,
    /// `|det| <= tol` on the sampled run `[t_lo, t_hi]` without a sign change.
    NearZero,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaEvent {
    pub kind: SigmaEventKind,
    pub t_lo: f64,
    pub t_hi: f64,
    pub det_lo: f64,
    pub det_hi: f64,
}

impl SigmaEvent {
    pub fn t(&self) -> f64 {
        0.5 * (self.t_lo + self.t_hi)
    }
}

const SUBDIVISION: usize = 4;
const BISECTIONS: usize = 60;

/// Samples the bordered determinant along a trajectory and reports where it
/// vanishes. `tol = None` uses the pointwise default threshold.
pub fn sigma_scan(h: &dyn Hamiltonian, traj: &Trajectory, tol: Option<f64>) -> Vec<SigmaEvent> {
    let ts = traj.times();
    let mut grid = Vec::with_capacity(ts.len() * SUBDIVISION + 1);
    for w in ts.windows(2) {
        for k in 0..SUBDIVISION {
            grid.push(w[0] + (w[1] - w[0]) * k as f64 / SUBDIVISION as f64);
        }
    }
    grid.push(traj.t_end());
    let eval = |t: f64| {
        let r = fiberwise_iso_energetic_test(h, &traj.point(t), tol);
        (r.det_value, r.tol)
    };
    let vals: Vec<(f64, f64)> = grid.iter().map(|&t| eval(t)).collect();
    let mut events = Vec::new();
    let mut i = 0;
    while i + 1 < grid.len() {
        let (da, db) = (vals[i].0, vals[i + 1].0);
        if (da < 0.0 && db > 0.0) || (da > 0.0 && db < 0.0) {
            let (mut a, mut b, mut fa, mut fb) = (grid[i], grid[i + 1], da, db);
            for _ in 0..BISECTIONS {
                let m = 0.5 * (a + b);
                let fm = eval(m).0;
                if fm == 0.0 {
                    a = m;
                    b = m;
                    fa = 0.0;
                    fb = 0.0;
                    break;
                }
                if (fm > 0.0) == (fa > 0.0) {
                    a = m;
                    fa = fm;
                } else {
                    b = m;
                    fb = fm;
                }
            }
            events.push(SigmaEvent {
                kind: SigmaEventKind::SignChange,
                t_lo: a,
                t_hi: b,
                det_lo: fa,
                det_hi: fb,
            });
            i += 1;
            continue;
        }
        if vals[i].0.abs() <= vals[i].1 {
            let start = i;
            let mut end = i;
            let mut sign_change = false;
            while end + 1 < grid.len() && vals[end + 1].0.abs() <= vals[end + 1].1 {
                let (x, y) = (vals[end].0, vals[end + 1].0);
                if (x < 0.0 && y > 0.0) || (x > 0.0 && y < 0.0) {
                    sign_change = true;
                    break;
                }
                end += 1;
            }
            if !sign_change {
                events.push(SigmaEvent {
                    kind: SigmaEventKind::NearZero,
                    t_lo: grid[start],
                    t_hi: grid[end],
                    det_lo: vals[start].0,
                    det_hi: vals[end].0,
                });
                i = end + 1;
                continue;
            }
            i = end;
            continue;
        }
        i += 1;
    }
    events
}
