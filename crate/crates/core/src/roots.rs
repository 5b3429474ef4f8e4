//! Scalar root polishing on a bracketing interval.

/// Illinois-modified regula falsi on `[a, b]` with `f(a)`, `f(b)` of opposite
/// sign. Stops when `|f| <= ftol` or the bracket is below `xtol`.
pub fn illinois(
    f: impl Fn(f64) -> f64,
    mut a: f64,
    mut b: f64,
    mut fa: f64,
    mut fb: f64,
    ftol: f64,
    xtol: f64,
) -> f64 {
    if fa == 0.0 {
        return a;
    }
    if fb == 0.0 {
        return b;
    }
    let mut side = 0i8;
    let mut best = if fa.abs() < fb.abs() { a } else { b };
    for _ in 0..200 {
        let c = (a * fb - b * fa) / (fb - fa);
        let c = if c.is_finite() && c > a.min(b) && c < a.max(b) {
            c
        } else {
            0.5 * (a + b)
        };
        let fc = f(c);
        best = c;
        if fc.abs() <= ftol || (b - a).abs() <= xtol {
            break;
        }
        if (fc > 0.0) == (fb > 0.0) {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    best
}

/// Bisection for a predicate that is `false` at `a` and `true` at `b`.
/// Returns the final bracket.
pub fn bisect_predicate(p: impl Fn(f64) -> bool, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    for _ in 0..iters {
        let m = 0.5 * (a + b);
        if p(m) {
            b = m;
        } else {
            a = m;
        }
    }
    (a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_root() {
        let r = illinois(f64::cos, 1.0, 2.0, 1f64.cos(), 2f64.cos(), 1e-15, 1e-15);
        assert!((r - std::f64::consts::FRAC_PI_2).abs() < 1e-13);
    }

    #[test]
    fn predicate_threshold() {
        let (a, b) = bisect_predicate(|x| x > 0.3, 0.0, 1.0, 50);
        assert!(a <= 0.3 && b >= 0.3 && b - a < 1e-12);
    }
}
