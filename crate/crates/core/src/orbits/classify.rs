use super::neat::{neat_times, NeatConfig, NeatTimes};
use super::section::{orbit_nondegenerate, restricted_return_map, NondegeneracyVerdict, SectionFrame};
use super::sigma::{sigma_scan, SigmaEvent};
use super::PeriodicOrbit;
use crate::geometry::{fiberwise_iso_energetic_test, Hamiltonian, PhasePoint};
use crate::linalg::SympMatrix;
use crate::roots::bisect_predicate;

/// Summary of the perturbation hypotheses along an orbit.
#[derive(Debug, Clone)]
pub struct OrbitClassification {
    pub energy: f64,
    pub period: f64,
    pub minimal_period: f64,
    pub multiplicity: usize,
    pub neat: NeatTimes,
    /// Zeros of the bordered determinant over one minimal period.
    pub sigma_events: Vec<SigmaEvent>,
    /// Times that are neat and where the bordered determinant is nonzero.
    pub joint: Vec<(f64, f64)>,
    pub joint_all: bool,
    /// Anchor time used for the return map, if any anchor was transverse.
    pub anchor: Option<f64>,
    pub return_map: Option<SympMatrix>,
    pub nondegeneracy: Option<NondegeneracyVerdict>,
    /// The joint set is non-empty.
    pub perturbable: bool,
}

fn nondegenerate_at(h: &dyn Hamiltonian, orbit: &PeriodicOrbit, s: f64) -> bool {
    let x = PhasePoint::from_vector(&orbit.state(s)).expect("orbit states are valid");
    fiberwise_iso_energetic_test(h, &x, None).non_degenerate
}

pub fn classify_orbit(h: &dyn Hamiltonian, orbit: &PeriodicOrbit) -> OrbitClassification {
    let cfg = NeatConfig::default();
    let neat = neat_times(h, orbit, &cfg);
    let tm = orbit.minimal_period;
    let sigma_events: Vec<SigmaEvent> = sigma_scan(h, &orbit.samples, None)
        .into_iter()
        .filter(|e| e.t_lo <= tm)
        .collect();

    let n = cfg.samples;
    let step = tm / n as f64;
    let pred = |s: f64| neat.contains(s) && nondegenerate_at(h, orbit, s);
    let flags: Vec<bool> = (0..n).map(|i| pred(i as f64 * step)).collect();
    let mut joint = Vec::new();
    let joint_all = flags.iter().all(|&f| f);
    if joint_all {
        joint.push((0.0, tm));
    } else if let Some(first_bad) = flags.iter().position(|&f| !f) {
        let mut i = 0;
        while i < n {
            let k = first_bad + i;
            if flags[k % n] {
                let mut end = k;
                while end + 1 < first_bad + n && flags[(end + 1) % n] {
                    end += 1;
                }
                let (_, a) = bisect_predicate(pred, (k - 1) as f64 * step, k as f64 * step, 30);
                let (b, _) =
                    bisect_predicate(|s| !pred(s), end as f64 * step, (end + 1) as f64 * step, 30);
                let (a, b) = if a >= tm { (a - tm, b - tm) } else { (a, b) };
                joint.push((a, b));
                i = end - first_bad + 1;
            } else {
                i += 1;
            }
        }
        joint.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap_or(std::cmp::Ordering::Equal));
    }

    let mut anchors = Vec::new();
    if let Some(&(a, b)) = joint
        .iter()
        .max_by(|x, y| (x.1 - x.0).partial_cmp(&(y.1 - y.0)).unwrap_or(std::cmp::Ordering::Equal))
    {
        anchors.push(if joint_all { 0.0 } else { 0.5 * (a + b) });
    }
    anchors.extend([0.0, 0.25 * tm, tm / 3.0, 0.5 * tm]);
    let mut anchor = None;
    let mut return_map = None;
    for t0 in anchors {
        if let Ok(frame) = SectionFrame::at_time(h, orbit, t0) {
            if let Ok(l) = restricted_return_map(h, orbit, &frame, None) {
                anchor = Some(t0);
                return_map = Some(l);
                break;
            }
        }
    }
    let nondegeneracy = return_map.as_ref().map(|l| orbit_nondegenerate(l, 1e-6));
    OrbitClassification {
        energy: orbit.energy,
        period: orbit.period,
        minimal_period: tm,
        multiplicity: orbit.multiplicity,
        perturbable: !joint.is_empty(),
        neat,
        sigma_events,
        joint,
        joint_all,
        anchor,
        return_map,
        nondegeneracy,
    }
}
