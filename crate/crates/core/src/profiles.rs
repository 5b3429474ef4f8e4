//! Compactly supported polynomial bumps and plateau cutoffs.

/// Bump `scale (1 - s^2)^4`, `s = (t - center) / half_width`, zero for
/// `|s| >= 1`. The profile is C³ with a degree-8 polynomial inside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub center: f64,
    pub half_width: f64,
    pub scale: f64,
}

/// `int_{-1}^{1} (1 - s^2)^4 ds`.
const BUMP_MASS: f64 = 256.0 / 315.0;

impl Bump {
    /// Peak value 1.
    pub fn new(center: f64, half_width: f64) -> Self {
        Self {
            center,
            half_width,
            scale: 1.0,
        }
    }

    /// Unit integral, an approximation of the Dirac mass at `center`.
    pub fn dirac(center: f64, half_width: f64) -> Self {
        Self {
            center,
            half_width,
            scale: 1.0 / (BUMP_MASS * half_width),
        }
    }

    /// Closed support interval.
    pub fn support(&self) -> (f64, f64) {
        (self.center - self.half_width, self.center + self.half_width)
    }

    /// Value and first three derivatives in `t`.
    pub fn jet(&self, t: f64) -> [f64; 4] {
        let w = self.half_width;
        let s = (t - self.center) / w;
        if s.abs() >= 1.0 {
            return [0.0; 4];
        }
        let s2 = s * s;
        let v = (1.0 - s2).powi(4);
        let d1 = -8.0 * s * (1.0 - s2).powi(3);
        let d2 = (1.0 - s2).powi(2) * (56.0 * s2 - 8.0);
        let d3 = s * (144.0 - 480.0 * s2 + 336.0 * s2 * s2);
        let c = self.scale;
        [c * v, c * d1 / w, c * d2 / (w * w), c * d3 / (w * w * w)]
    }

    pub fn value(&self, t: f64) -> f64 {
        self.jet(t)[0]
    }

    /// `int_{-inf}^t` of the bump.
    pub fn cumulative(&self, t: f64) -> f64 {
        let w = self.half_width;
        let s = (t - self.center) / w;
        if s <= -1.0 {
            return 0.0;
        }
        if s >= 1.0 {
            return self.scale * w * BUMP_MASS;
        }
        let prim = |s: f64| {
            let s2 = s * s;
            s * (1.0 - s2 * (4.0 / 3.0 - s2 * (6.0 / 5.0 - s2 * (4.0 / 7.0 - s2 / 9.0))))
        };
        self.scale * w * (prim(s) + 0.5 * BUMP_MASS)
    }
}

/// C³ step equal to 1 on `(-inf, inner]` and 0 on `[outer, inf)`, built
/// from the smoothstep `35y^4 - 84y^5 + 70y^6 - 20y^7`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plateau {
    pub inner: f64,
    pub outer: f64,
}

impl Plateau {
    /// Value and first two derivatives.
    pub fn jet(&self, x: f64) -> [f64; 3] {
        let len = self.outer - self.inner;
        let y = (x - self.inner) / len;
        if y <= 0.0 {
            return [1.0, 0.0, 0.0];
        }
        if y >= 1.0 {
            return [0.0; 3];
        }
        let z = 1.0 - y;
        let s = y.powi(4) * (35.0 - 84.0 * y + 70.0 * y * y - 20.0 * y.powi(3));
        let s1 = 140.0 * y.powi(3) * z.powi(3);
        let s2 = 420.0 * y * y * z * z * (1.0 - 2.0 * y);
        [1.0 - s, -s1 / len, -s2 / (len * len)]
    }
}

/// Radial cutoff `chi(|x|^2 / r^2)` with `chi = 1` for `|x| <= r/2` and
/// `chi = 0` for `|x| >= r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialCutoff {
    pub radius: f64,
}

impl RadialCutoff {
    const PROFILE: Plateau = Plateau {
        inner: 0.25,
        outer: 1.0,
    };

    /// Value, gradient and Hessian in `x`.
    pub fn jet(&self, x: &[f64]) -> (f64, Vec<f64>, Vec<Vec<f64>>) {
        let r2 = self.radius * self.radius;
        let m = x.len();
        let rho = x.iter().map(|v| v * v).sum::<f64>() / r2;
        let [c0, c1, c2] = Self::PROFILE.jet(rho);
        let grad = x.iter().map(|v| c1 * 2.0 * v / r2).collect();
        let hess = (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| {
                        let diag = if i == j { c1 * 2.0 / r2 } else { 0.0 };
                        c2 * 4.0 * x[i] * x[j] / (r2 * r2) + diag
                    })
                    .collect()
            })
            .collect();
        (c0, grad, hess)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd(f: impl Fn(f64) -> f64, t: f64, h: f64) -> f64 {
        (f(t - 2.0 * h) - 8.0 * f(t - h) + 8.0 * f(t + h) - f(t + 2.0 * h)) / (12.0 * h)
    }

    #[test]
    fn bump_derivatives_match_differences() {
        let b = Bump::new(0.3, 0.2);
        for t in [0.15, 0.27, 0.33, 0.45] {
            let j = b.jet(t);
            for k in 0..3 {
                let num = fd(|s| b.jet(s)[k], t, 1e-4);
                assert!((num - j[k + 1]).abs() <= 1e-6 * (1.0 + j[k + 1].abs()), "{t} {k}");
            }
        }
    }

    #[test]
    fn dirac_bump_has_unit_mass() {
        let b = Bump::dirac(1.0, 0.05);
        assert!((b.cumulative(2.0) - 1.0).abs() <= 1e-14);
        assert_eq!(b.cumulative(0.0), 0.0);
        assert!((b.cumulative(1.0) - 0.5).abs() <= 1e-14);
        let num = fd(|t| b.cumulative(t), 1.02, 1e-5);
        assert!((num - b.value(1.02)).abs() <= 1e-6);
    }

    #[test]
    fn plateau_is_c1_with_matching_derivatives() {
        let p = Plateau {
            inner: 0.25,
            outer: 1.0,
        };
        assert_eq!(p.jet(0.1)[0], 1.0);
        assert_eq!(p.jet(1.2)[0], 0.0);
        for x in [0.3, 0.5, 0.8, 0.95] {
            let j = p.jet(x);
            assert!((fd(|s| p.jet(s)[0], x, 1e-5) - j[1]).abs() <= 1e-7);
            assert!((fd(|s| p.jet(s)[1], x, 1e-5) - j[2]).abs() <= 1e-6);
        }
    }
}
