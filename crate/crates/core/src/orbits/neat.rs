use nalgebra::DVector;

use super::PeriodicOrbit;
use crate::geometry::{ChartDomain, Hamiltonian};
use crate::roots::bisect_predicate;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeatConfig {
    /// Grid points per minimal period.
    pub samples: usize,
    /// Minimum projected speed `|d_p H|`.
    pub tol_speed: f64,
    /// Minimum distance to non-local parts of the projected orbit;
    /// `None` uses `1e-3 *` the projected orbit's diameter.
    pub tol_sep: Option<f64>,
    /// Bisection steps used to refine each interval endpoint.
    pub refine_iters: usize,
}

impl Default for NeatConfig {
    fn default() -> Self {
        Self {
            samples: 2000,
            tol_speed: 1e-8,
            tol_sep: None,
            refine_iters: 40,
        }
    }
}

/// Neat times of an orbit as open intervals in `[0, T_min)`; an interval may
/// extend past `T_min` when it wraps around.
#[derive(Debug, Clone, PartialEq)]
pub struct NeatTimes {
    pub period: f64,
    /// Every sampled time is neat.
    pub all: bool,
    pub intervals: Vec<(f64, f64)>,
    pub tol_speed: f64,
    pub tol_sep: f64,
}

impl NeatTimes {
    pub fn is_empty(&self) -> bool {
        !self.all && self.intervals.is_empty()
    }

    pub fn contains(&self, s: f64) -> bool {
        if self.all {
            return true;
        }
        let s = s.rem_euclid(self.period);
        self.intervals
            .iter()
            .any(|&(a, b)| (s > a && s < b) || (s + self.period > a && s + self.period < b))
    }

    /// Total length of the neat set.
    pub fn measure(&self) -> f64 {
        if self.all {
            self.period
        } else {
            self.intervals.iter().map(|(a, b)| b - a).sum()
        }
    }
}

/// Sampled projected orbit used by the neat-time predicate.
struct Projection<'a> {
    domain: ChartDomain,
    period: f64,
    pts: Vec<DVector<f64>>,
    orbit: &'a PeriodicOrbit,
}

impl Projection<'_> {
    fn new(orbit: &PeriodicOrbit, samples: usize) -> Projection<'_> {
        let period = orbit.minimal_period;
        let pts = (0..samples)
            .map(|i| orbit.base_point(period * i as f64 / samples as f64))
            .collect();
        Projection {
            domain: orbit.domain.clone(),
            period,
            pts,
            orbit,
        }
    }

    fn dist(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        self.domain.base_distance(a, b)
    }

    /// Distance from `q` to the chord from sample `j` to `j + 1`.
    fn seg_dist(&self, q: &DVector<f64>, j: usize) -> f64 {
        let n = self.pts.len();
        let a = &self.pts[j % n];
        let mut ab = &self.pts[(j + 1) % n] - a;
        self.domain.wrap_base_delta(&mut ab);
        let mut aq = q - a;
        self.domain.wrap_base_delta(&mut aq);
        let l2 = ab.norm_squared();
        let s = if l2 > 0.0 {
            (aq.dot(&ab) / l2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        (aq - ab * s).norm()
    }

    fn diameter(&self) -> f64 {
        let mut d = 0.0f64;
        for i in 0..self.pts.len() {
            for j in i + 1..self.pts.len() {
                d = d.max(self.dist(&self.pts[i], &self.pts[j]));
            }
        }
        d
    }

    /// Minimum distance from `Q(s)` to the orbit outside the arc through `s`
    /// along which the distance to `Q(s)` grows monotonically.
    fn separation(&self, s: f64) -> f64 {
        let n = self.pts.len();
        let q = self.orbit.base_point(s);
        let h = self.period / n as f64;
        let sr = s.rem_euclid(self.period);
        let i_next = ((sr / h).floor() as usize + 1) % n;
        let i_prev = (i_next + n - 1) % n;
        // Forward walk.
        let mut steps_f = 0;
        let mut d_prev = self.dist(&q, &self.pts[i_next]);
        while steps_f + 1 < n {
            let d = self.dist(&q, &self.pts[(i_next + steps_f + 1) % n]);
            if d <= d_prev {
                break;
            }
            d_prev = d;
            steps_f += 1;
        }
        // Backward walk.
        let mut steps_b = 0;
        let mut d_prev = self.dist(&q, &self.pts[i_prev]);
        while steps_b + 1 < n {
            let d = self.dist(&q, &self.pts[(i_prev + n - steps_b - 1) % n]);
            if d <= d_prev {
                break;
            }
            d_prev = d;
            steps_b += 1;
        }
        if steps_f + steps_b + 2 >= n {
            return f64::INFINITY;
        }
        let start = (i_next + steps_f) % n;
        let end = (i_prev + n - steps_b) % n;
        let len = (end + n - start) % n;
        (start..start + len)
            .map(|j| self.seg_dist(&q, j))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Pointwise neat-time test: projected speed above `tol_speed` and
/// separation from the non-local rest of the projected orbit above `tol_sep`.
pub fn neat_predicate(
    h: &dyn Hamiltonian,
    orbit: &PeriodicOrbit,
    s: f64,
    tol_speed: f64,
    tol_sep: f64,
    samples: usize,
) -> bool {
    let proj = Projection::new(orbit, samples);
    predicate(h, &proj, s, tol_speed, tol_sep)
}

fn speed(h: &dyn Hamiltonian, orbit: &PeriodicOrbit, s: f64) -> f64 {
    let n = orbit.base_dim();
    h.gradient(&orbit.state(s)).rows(n, n).norm()
}

fn predicate(h: &dyn Hamiltonian, proj: &Projection<'_>, s: f64, tol_speed: f64, tol_sep: f64) -> bool {
    speed(h, proj.orbit, s) > tol_speed && proj.separation(s) > tol_sep
}

/// Maximal open intervals of neat times over one minimal period.
pub fn neat_times(h: &dyn Hamiltonian, orbit: &PeriodicOrbit, cfg: &NeatConfig) -> NeatTimes {
    let n = cfg.samples.max(16);
    let proj = Projection::new(orbit, n);
    let tol_sep = cfg.tol_sep.unwrap_or_else(|| 1e-3 * proj.diameter());
    let period = proj.period;
    let hstep = period / n as f64;
    let flags: Vec<bool> = (0..n)
        .map(|i| predicate(h, &proj, i as f64 * hstep, cfg.tol_speed, tol_sep))
        .collect();
    let mut out = NeatTimes {
        period,
        all: false,
        intervals: Vec::new(),
        tol_speed: cfg.tol_speed,
        tol_sep,
    };
    if flags.iter().all(|&f| f) {
        out.all = true;
        out.intervals.push((0.0, period));
        return out;
    }
    if flags.iter().all(|&f| !f) {
        return out;
    }
    let pred = |s: f64| predicate(h, &proj, s, cfg.tol_speed, tol_sep);
    // Rotate so that the scan starts on a non-neat sample.
    let first_bad = flags.iter().position(|&f| !f).unwrap();
    let mut i = 0;
    while i < n {
        let k = (first_bad + i) % n;
        if flags[k] {
            let start = first_bad + i;
            let mut end = start;
            while end + 1 < first_bad + n && flags[(end + 1) % n] {
                end += 1;
            }
            let t_lo_bad = (start - 1) as f64 * hstep;
            let t_lo_good = start as f64 * hstep;
            let t_hi_good = end as f64 * hstep;
            let t_hi_bad = (end + 1) as f64 * hstep;
            let (_, a) = bisect_predicate(&pred, t_lo_bad, t_lo_good, cfg.refine_iters);
            let (b, _) = bisect_predicate(|s| !pred(s), t_hi_good, t_hi_bad, cfg.refine_iters);
            let (mut a, mut b) = (a, b);
            if a >= period {
                a -= period;
                b -= period;
            }
            out.intervals.push((a, b));
            i = end - first_bad + 1;
        } else {
            i += 1;
        }
    }
    out.intervals
        .sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap_or(std::cmp::Ordering::Equal));
    out
}
