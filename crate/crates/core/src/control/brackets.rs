use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{control_matrix, ControlData};
use crate::error::{Error, Result};
use crate::linalg::{antisymmetric_coords, numerical_rank, numerical_rank_scaled, symmetric_basis, vectorize, RankReport};

/// Singular values below this fraction of the largest count as zero.
pub const RANK_TOL: f64 = 1e-9;

/// Deepest bracket supported; `W_m` needs `K^{(m-1)}`.
pub const MAX_DEPTH: usize = 4;

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `[W_0(0,B), ..., W_m(0,B)]` from `W_0 = W(B)` and
/// `W_{i+1} = W_i' + [W_i, Y]`, propagated as Taylor jets at `t = 0`.
pub fn bracket_sequence(cd: &ControlData, b: &DMatrix<f64>, m: usize) -> Result<Vec<DMatrix<f64>>> {
    if m > MAX_DEPTH {
        return Err(Error::InvalidArgument(format!("bracket depth {m} exceeds {MAX_DEPTH}")));
    }
    let d = cd.d();
    if b.shape() != (d, d) {
        return Err(Error::InvalidDimension(format!("B must be {d} x {d}")));
    }
    let y: Vec<DMatrix<f64>> = (0..m.max(1)).map(|k| cd.y_derivative(0.0, k)).collect();
    // jet[k] = k-th time derivative of the current W_i at 0.
    let mut jet = vec![DMatrix::zeros(2 * d, 2 * d); m + 1];
    jet[0] = control_matrix(b);
    let mut out = vec![jet[0].clone()];
    for i in 0..m {
        let next: Vec<DMatrix<f64>> = (0..m - i)
            .map(|k| {
                let mut w = jet[k + 1].clone();
                for l in 0..=k {
                    let yk = &y[k - l];
                    w += (&jet[l] * yk - yk * &jet[l]) * binomial(k, l);
                }
                w
            })
            .collect();
        out.push(next[0].clone());
        jet = next;
    }
    Ok(out)
}

/// Block formulas for `W_0(0,B) .. W_3(0,B)` in terms of `D`, `K(0)`, `K'(0)`.
pub fn bracket_closed_forms(cd: &ControlData, b: &DMatrix<f64>) -> [DMatrix<f64>; 4] {
    let d = cd.d();
    let dm = cd.d_matrix();
    let k = cd.k_derivative(0.0, 0);
    let k1 = cd.k_derivative(0.0, 1);
    let blocks = |ul: DMatrix<f64>, ur: DMatrix<f64>, ll: DMatrix<f64>, lr: DMatrix<f64>| {
        let mut w = DMatrix::zeros(2 * d, 2 * d);
        w.view_mut((0, 0), (d, d)).copy_from(&ul);
        w.view_mut((0, d), (d, d)).copy_from(&ur);
        w.view_mut((d, 0), (d, d)).copy_from(&ll);
        w.view_mut((d, d), (d, d)).copy_from(&lr);
        w
    };
    let z = || DMatrix::zeros(d, d);
    let dbd = &dm * b * &dm;
    [
        control_matrix(b),
        blocks(-(&dm * b), z(), z(), b * &dm),
        blocks(z(), -(&dbd * 2.0), -(b * &dm * &k) - &k * &dm * b, z()),
        blocks(
            &dbd * &k * 3.0 + &dm * &k * &dm * b,
            z(),
            -(b * &dm * &k1) - &k1 * &dm * b,
            -(b * &dm * &k * &dm) - &k * &dbd * 3.0,
        ),
    ]
}

/// Rank of `W_* E` truncated at depth `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanReport {
    pub rank: RankReport,
    pub full: bool,
    /// `dim sp(2d) = d(2d+1)`.
    pub dim_target: usize,
}

/// Rank of the vectorized `W_i(0, E_j)`, `i <= m`, over the symmetric basis.
pub fn span_test(cd: &ControlData, m: usize) -> Result<SpanReport> {
    if !(3..=MAX_DEPTH).contains(&m) {
        return Err(Error::InvalidArgument(format!("span test depth must lie in 3..={MAX_DEPTH}, got {m}")));
    }
    let d = cd.d();
    let mut cols = Vec::new();
    for e in symmetric_basis(d) {
        for w in bracket_sequence(cd, &e, m)? {
            cols.push(vectorize(&w));
        }
    }
    let mat = DMatrix::from_columns(&cols);
    let rank = numerical_rank(&mat, RANK_TOL);
    let dim_target = d * (2 * d + 1);
    Ok(SpanReport {
        full: rank.rank == dim_target,
        rank,
        dim_target,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct KdMembership {
    pub rank: RankReport,
    /// `dim S^-(d) = d(d-1)/2`.
    pub target_dim: usize,
    /// `B -> B D K - K D B` is not onto the antisymmetric matrices.
    pub member: bool,
}

/// Whether `K` lies in the exceptional set `K_D`.
pub fn kd_membership(signs: &[f64], k: &DMatrix<f64>) -> Result<KdMembership> {
    let d = signs.len();
    if signs.iter().any(|s| (s * s - 1.0).abs() > 0.0) {
        return Err(Error::InvalidArgument(format!("D must square to I, got {signs:?}")));
    }
    if k.shape() != (d, d) {
        return Err(Error::InvalidDimension(format!("K must be {d} x {d}")));
    }
    let dm = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(signs));
    let target_dim = d * d.saturating_sub(1) / 2;
    let cols: Vec<_> = symmetric_basis(d)
        .iter()
        .map(|b| antisymmetric_coords(&(b * &dm * k - k * &dm * b)))
        .collect();
    let mat = if target_dim == 0 {
        DMatrix::zeros(0, cols.len())
    } else {
        DMatrix::from_columns(&cols)
    };
    // The map is `O(|K|)`; judging it against its own largest singular
    // value would count round-off as rank when K is a multiple of I.
    let scale = k.norm().max(f64::MIN_POSITIVE);
    let rank = numerical_rank_scaled(&mat, RANK_TOL, scale);
    Ok(KdMembership {
        member: rank.rank < target_dim,
        rank,
        target_dim,
    })
}

/// Agreement of `K_I` membership with the repeated-eigenvalue test.
#[derive(Debug, Clone, PartialEq)]
pub struct KdCharacterization {
    pub d: usize,
    pub trials: usize,
    pub members: usize,
    /// Trials whose relative eigenvalue gap is below [`GAP_THRESHOLD`].
    pub repeated: usize,
    pub agreements: usize,
    /// Gaps between [`RANK_TOL`] and [`GAP_THRESHOLD`], where the two tests
    /// may legitimately differ.
    pub in_band: usize,
    pub disagreements_outside_band: usize,
}

/// Relative eigenvalue gap below which `K` counts as having a repeated eigenvalue.
pub const GAP_THRESHOLD: f64 = 1e-6;

/// Smallest gap between sorted eigenvalues over `max(1, spectral radius)`;
/// infinite for `d = 1`.
pub fn relative_eigen_gap(k: &DMatrix<f64>) -> f64 {
    let mut ev: Vec<f64> = SymmetricEigen::new(k.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let scale = ev.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    ev.windows(2).map(|w| (w[1] - w[0]) / scale).fold(f64::INFINITY, f64::min)
}

fn random_orthogonal(rng: &mut impl Rng, d: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    a.qr().q()
}

/// `trials` random symmetric `K` with `D = I`: odd trials are generic,
/// even trials get an exactly repeated eigenvalue by construction.
pub fn kd_characterization_check(d: usize, trials: usize, seed: u64) -> Result<KdCharacterization> {
    if d == 0 {
        return Err(Error::InvalidArgument("d must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let signs = vec![1.0; d];
    let mut rep = KdCharacterization {
        d,
        trials,
        members: 0,
        repeated: 0,
        agreements: 0,
        in_band: 0,
        disagreements_outside_band: 0,
    };
    for trial in 0..trials {
        let k = if trial % 2 == 0 && d > 1 {
            let q = random_orthogonal(&mut rng, d);
            let mut lam: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
            lam[1] = lam[0];
            &q * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(lam)) * q.transpose()
        } else {
            let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
            (&a + a.transpose()) * 0.5
        };
        let gap = relative_eigen_gap(&k);
        let member = kd_membership(&signs, &k)?.member;
        let repeated = gap < GAP_THRESHOLD;
        rep.members += member as usize;
        rep.repeated += repeated as usize;
        if member == repeated {
            rep.agreements += 1;
        } else if (RANK_TOL..GAP_THRESHOLD).contains(&gap) {
            rep.in_band += 1;
        } else {
            rep.disagreements_outside_band += 1;
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::KProfile;
    use crate::linalg::hamiltonian_residual;

    fn data(signs: &[f64], k0: DMatrix<f64>, k1: DMatrix<f64>) -> ControlData {
        ControlData::new(signs, KProfile::Polynomial(vec![k0, k1]), 1.0).unwrap()
    }

    #[test]
    fn first_brackets_match_block_formulas() {
        let k0 = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, -2.0]);
        let k1 = DMatrix::from_row_slice(2, 2, &[0.5, -1.0, -1.0, 0.2]);
        let cd = data(&[1.0, -1.0], k0, k1);
        let b = DMatrix::from_row_slice(2, 2, &[0.7, 0.1, 0.1, 1.3]);
        let rec = bracket_sequence(&cd, &b, 3).unwrap();
        let closed = bracket_closed_forms(&cd, &b);
        for i in 0..4 {
            assert!((&rec[i] - &closed[i]).amax() <= 1e-12, "W{i}");
            assert!(hamiltonian_residual(&rec[i]) <= 1e-12);
        }
    }

    #[test]
    fn depth_four_uses_second_derivative_of_k() {
        let k0 = DMatrix::identity(1, 1);
        let cd_lin = data(&[1.0], k0.clone(), DMatrix::zeros(1, 1));
        let cd_quad = ControlData::new(
            &[1.0],
            KProfile::Polynomial(vec![k0, DMatrix::zeros(1, 1), DMatrix::identity(1, 1)]),
            1.0,
        )
        .unwrap();
        let b = DMatrix::identity(1, 1);
        let w_lin = bracket_sequence(&cd_lin, &b, 4).unwrap();
        let w_quad = bracket_sequence(&cd_quad, &b, 4).unwrap();
        assert!((&w_lin[3] - &w_quad[3]).amax() == 0.0);
        assert!((&w_lin[4] - &w_quad[4]).amax() > 0.5);
        assert!(bracket_sequence(&cd_lin, &b, 5).is_err());
    }

    #[test]
    fn span_examples() {
        let cd = ControlData::constant(&[1.0], DMatrix::from_element(1, 1, 0.4), 1.0).unwrap();
        let r = span_test(&cd, 3).unwrap();
        assert_eq!((r.rank.rank, r.full, r.dim_target), (3, true, 3));
        let cd = ControlData::constant(&[1.0, 1.0], DMatrix::from_diagonal(&nalgebra::dvector![1.0, 2.0]), 1.0).unwrap();
        assert_eq!(span_test(&cd, 3).unwrap().rank.rank, 10);
        let cd = ControlData::constant(&[1.0, 1.0], DMatrix::identity(2, 2), 1.0).unwrap();
        let r = span_test(&cd, 3).unwrap();
        assert_eq!((r.rank.rank, r.full), (9, false));
    }

    #[test]
    fn membership_examples() {
        let m = kd_membership(&[1.0], &DMatrix::from_element(1, 1, 3.0)).unwrap();
        assert_eq!((m.target_dim, m.member), (0, false));
        let m = kd_membership(&[1.0, 1.0], &DMatrix::identity(2, 2)).unwrap();
        assert_eq!((m.rank.rank, m.member), (0, true));
        let m = kd_membership(&[1.0, 1.0], &DMatrix::from_diagonal(&nalgebra::dvector![1.0, 2.0])).unwrap();
        assert_eq!((m.rank.rank, m.member), (1, false));
        let k = DMatrix::from_diagonal(&nalgebra::dvector![1.0, 1.0, 2.0]);
        assert!(kd_membership(&[1.0; 3], &k).unwrap().member);
        assert_eq!(kd_membership(&[1.0; 3], &(DMatrix::identity(3, 3) * 2.5)).unwrap().rank.rank, 0);
    }

    #[test]
    fn characterization_agrees_on_small_batch() {
        for d in 1..=4 {
            let r = kd_characterization_check(d, 40, 7).unwrap();
            assert_eq!(r.disagreements_outside_band, 0, "{r:?}");
            if d > 1 {
                assert_eq!(r.members, 20);
            }
        }
    }
}
