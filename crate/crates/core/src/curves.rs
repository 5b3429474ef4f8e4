//! Matrix-valued curves on a uniform grid, interpolated by quintic Hermite
//! pieces. Derivatives and integrals are exact for the interpolant, so maps
//! built from one curve and its derivative stay mutually consistent.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Uniform grid `a = t_0 < ... < t_n = b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub a: f64,
    pub b: f64,
    pub n: usize,
}

impl Grid {
    pub fn new(a: f64, b: f64, n: usize) -> Result<Self> {
        if !(b > a) || n == 0 || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidArgument(format!("bad grid [{a}, {b}] with {n} intervals")));
        }
        Ok(Self { a, b, n })
    }

    pub fn step(&self) -> f64 {
        (self.b - self.a) / self.n as f64
    }

    pub fn node(&self, i: isize) -> f64 {
        self.a + i as f64 * self.step()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n as isize).map(|i| self.node(i)).collect()
    }
}

/// `f(s) = sum c_k s^k` on one interval, `s = (t - t_i) / h`.
#[derive(Debug, Clone)]
struct Piece {
    c: [DMatrix<f64>; 6],
}

#[derive(Debug, Clone)]
pub struct Curve {
    grid: Grid,
    rows: usize,
    cols: usize,
    pieces: Vec<Piece>,
    /// Integral from `a` to the start of each piece.
    prefix: Vec<DMatrix<f64>>,
}

impl Curve {
    /// Interpolates node values with first and second derivatives.
    pub fn from_jets(grid: Grid, jets: Vec<[DMatrix<f64>; 3]>) -> Result<Self> {
        if jets.len() != grid.n + 1 {
            return Err(Error::InvalidArgument(format!(
                "expected {} node jets, got {}",
                grid.n + 1,
                jets.len()
            )));
        }
        let (rows, cols) = jets[0][0].shape();
        let h = grid.step();
        let h2 = h * h;
        let mut pieces = Vec::with_capacity(grid.n);
        for i in 0..grid.n {
            let [f0, d0, s0] = &jets[i];
            let [f1, d1, s1] = &jets[i + 1];
            let c0 = f0.clone();
            let c1 = d0 * h;
            let c2 = s0 * (0.5 * h2);
            let c3 = f0 * -10.0 + d0 * (-6.0 * h) + s0 * (-1.5 * h2) + s1 * (0.5 * h2) + d1 * (-4.0 * h) + f1 * 10.0;
            let c4 = f0 * 15.0 + d0 * (8.0 * h) + s0 * (1.5 * h2) - s1 * h2 + d1 * (7.0 * h) - f1 * 15.0;
            let c5 = f0 * -6.0 + d0 * (-3.0 * h) + s0 * (-0.5 * h2) + s1 * (0.5 * h2) + d1 * (-3.0 * h) + f1 * 6.0;
            pieces.push(Piece {
                c: [c0, c1, c2, c3, c4, c5],
            });
        }
        let mut prefix = Vec::with_capacity(grid.n);
        let mut acc = DMatrix::zeros(rows, cols);
        for p in &pieces {
            prefix.push(acc.clone());
            acc += piece_integral(p, 1.0) * h;
        }
        Ok(Self {
            grid,
            rows,
            cols,
            pieces,
            prefix,
        })
    }

    /// Interpolates `f` sampled on the grid; node derivatives come from
    /// seven-point central differences, using three extra samples past each
    /// end.
    pub fn from_samples(grid: Grid, mut f: impl FnMut(f64) -> Result<DMatrix<f64>>) -> Result<Self> {
        let n = grid.n as isize;
        let h = grid.step();
        let vals = (-3..=n + 3).map(|i| f(grid.node(i))).collect::<Result<Vec<_>>>()?;
        let jets = (0..=grid.n)
            .map(|i| {
                let v = &vals[i..i + 7];
                let d1 = (-&v[0] + &v[1] * 9.0 - &v[2] * 45.0 + &v[4] * 45.0 - &v[5] * 9.0 + &v[6]) / (60.0 * h);
                let d2 = (&v[0] * 2.0 - &v[1] * 27.0 + &v[2] * 270.0 - &v[3] * 490.0 + &v[4] * 270.0
                    - &v[5] * 27.0
                    + &v[6] * 2.0)
                    / (180.0 * h * h);
                [v[3].clone(), d1, d2]
            })
            .collect();
        Self::from_jets(grid, jets)
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        let h = self.grid.step();
        let x = (t - self.grid.a) / h;
        let i = (x.floor().max(0.0) as usize).min(self.grid.n - 1);
        (i, x - i as f64)
    }

    /// `k`-th derivative at `t`, for `k <= 5`. Outside the grid the end
    /// pieces are extended polynomially.
    pub fn derivative(&self, t: f64, k: usize) -> DMatrix<f64> {
        let (i, s) = self.locate(t);
        let c = &self.pieces[i].c;
        let h = self.grid.step();
        let mut out = DMatrix::zeros(self.rows, self.cols);
        for (j, cj) in c.iter().enumerate().skip(k) {
            // d^k/ds^k s^j = j!/(j-k)! s^(j-k)
            let mut coef = 1.0;
            for m in 0..k {
                coef *= (j - m) as f64;
            }
            out += cj * (coef * s.powi((j - k) as i32));
        }
        out / h.powi(k as i32)
    }

    pub fn value(&self, t: f64) -> DMatrix<f64> {
        self.derivative(t, 0)
    }

    /// `int_a^t f`.
    pub fn integral(&self, t: f64) -> DMatrix<f64> {
        let (i, s) = self.locate(t);
        &self.prefix[i] + piece_integral(&self.pieces[i], s) * self.grid.step()
    }

    /// Scalar view for `1 x 1` curves.
    pub fn scalar(&self, t: f64, k: usize) -> f64 {
        self.derivative(t, k)[(0, 0)]
    }
}

fn piece_integral(p: &Piece, s: f64) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(p.c[0].nrows(), p.c[0].ncols());
    for (j, cj) in p.c.iter().enumerate() {
        out += cj * (s.powi(j as i32 + 1) / (j as f64 + 1.0));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(x: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, x)
    }

    #[test]
    fn reproduces_quintics_exactly() {
        let g = Grid::new(-1.0, 1.0, 7).unwrap();
        let f = |t: f64| 1.0 - 2.0 * t + 0.5 * t.powi(3) + 0.25 * t.powi(5);
        let df = |t: f64| -2.0 + 1.5 * t * t + 1.25 * t.powi(4);
        let d2f = |t: f64| 3.0 * t + 5.0 * t.powi(3);
        let jets = g.nodes().iter().map(|&t| [m(f(t)), m(df(t)), m(d2f(t))]).collect();
        let c = Curve::from_jets(g, jets).unwrap();
        for &t in &[-0.93f64, -0.2, 0.0, 0.31, 0.77] {
            assert!((c.scalar(t, 0) - f(t)).abs() < 1e-13);
            assert!((c.scalar(t, 1) - df(t)).abs() < 1e-12);
            assert!((c.scalar(t, 2) - d2f(t)).abs() < 1e-11);
            assert!((c.scalar(t, 3) - (3.0 + 15.0 * t * t)).abs() < 1e-9);
        }
        let exact = |t: f64| t - t * t + 0.125 * t.powi(4) + t.powi(6) / 24.0;
        assert!((c.integral(0.6)[(0, 0)] - (exact(0.6) - exact(-1.0))).abs() < 1e-13);
    }

    #[test]
    fn sampled_curve_tracks_smooth_functions() {
        let g = Grid::new(-0.5, 0.5, 64).unwrap();
        let c = Curve::from_samples(g, |t| Ok(m(t.sin() * t.exp()))).unwrap();
        for &t in &[-0.41f64, 0.013, 0.37] {
            let f = t.sin() * t.exp();
            let df = (t.cos() + t.sin()) * t.exp();
            assert!((c.scalar(t, 0) - f).abs() < 1e-12, "{}", c.scalar(t, 0) - f);
            assert!((c.scalar(t, 1) - df).abs() < 1e-10, "{}", c.scalar(t, 1) - df);
            let e2 = c.scalar(t, 2) - 2.0 * t.cos() * t.exp();
            assert!(e2.abs() < 1e-8, "{e2}");
        }
    }
}
