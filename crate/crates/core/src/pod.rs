//! Cotangent-lift proper orthogonal decomposition: one spatial basis `V`
//! shared by positions and momenta, projector `blkdiag(V, V)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrate::{stencil_derivatives, IntegrateError, Trajectory};
use crate::linalg::{dot, orthonormalize_columns, symmetric_eigen, LinalgError, Mat};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PodError {
    #[error("no snapshots")]
    Empty,
    #[error("state dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("state dimension {0} is odd")]
    OddDimension(usize),
    #[error("rank {requested} requested but numerical rank is {rank}")]
    RankTooLarge { requested: usize, rank: usize },
    #[error("rank must be at least 1")]
    ZeroRank,
    #[error("empty singular-value spectrum")]
    EmptySpectrum,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
}

/// Relative cut-off on Gram eigenvalues (`σ²`) below which modes count as
/// numerically zero. Squaring in the Gram matrix means `σ` itself is only
/// resolved to about `√ε·σ₁`.
const GRAM_RANK_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PodBasis<T> {
    /// `N × r`, orthonormal columns.
    pub v: Mat<T>,
    /// Full spectrum, non-increasing.
    pub singular_values: Vec<T>,
    pub r: usize,
    /// Spatial half-dimension.
    pub n: usize,
}

/// `N × 2S` matrix: every q-snapshot as a column, then every p-snapshot.
pub fn assemble_snapshots<T: Scalar>(trajs: &[Trajectory<T>]) -> Result<Mat<T>, PodError> {
    let dim = trajs
        .iter()
        .flat_map(|t| t.states.first())
        .map(Vec::len)
        .next()
        .ok_or(PodError::Empty)?;
    if dim % 2 != 0 {
        return Err(PodError::OddDimension(dim));
    }
    let n = dim / 2;
    let states: Vec<&Vec<T>> = trajs.iter().flat_map(|t| t.states.iter()).collect();
    if let Some(bad) = states.iter().find(|s| s.len() != dim) {
        return Err(PodError::DimensionMismatch {
            expected: dim,
            got: bad.len(),
        });
    }
    let s = states.len();
    Ok(Mat::from_fn(n, 2 * s, |i, j| {
        if j < s {
            states[j][i]
        } else {
            states[j - s][n + i]
        }
    }))
}

/// Leading `r` left singular vectors of `snapshots` via the smaller Gram
/// matrix, re-orthonormalized.
pub fn pod_basis<T: Scalar>(snapshots: &Mat<T>, r: usize) -> Result<PodBasis<T>, PodError> {
    if r == 0 {
        return Err(PodError::ZeroRank);
    }
    let (n, c) = snapshots.shape();
    if n == 0 || c == 0 {
        return Err(PodError::Empty);
    }
    let eig_tol = T::lit(1e-13);
    let (mut values, v) = if c < n {
        // XᵀX route: u_i = X w_i / σ_i
        let xt = snapshots.transpose();
        let gram = Mat::from_fn(c, c, |i, j| dot(xt.row(i), xt.row(j)));
        let eig = symmetric_eigen(&gram, eig_tol)?;
        let order: Vec<usize> = (0..c).rev().collect();
        let vals: Vec<T> = order.iter().map(|k| eig.values[*k].max(T::zero())).collect();
        let keep = r.min(c);
        let mut v = Mat::zeros(n, keep);
        for (col, k) in order.iter().take(keep).enumerate() {
            let w = eig.vectors.col(*k);
            let u = snapshots.matvec(&w)?;
            let s = vals[col].sqrt();
            for i in 0..n {
                v[(i, col)] = if s > T::zero() { u[i] / s } else { T::zero() };
            }
        }
        (vals, v)
    } else {
        let gram = Mat::from_fn(n, n, |i, j| dot(snapshots.row(i), snapshots.row(j)));
        let eig = symmetric_eigen(&gram, eig_tol)?;
        let order: Vec<usize> = (0..n).rev().collect();
        let vals: Vec<T> = order.iter().map(|k| eig.values[*k].max(T::zero())).collect();
        let keep = r.min(n);
        let v = Mat::from_fn(n, keep, |i, col| eig.vectors[(i, order[col])]);
        (vals, v)
    };
    let top = values[0];
    let rank = values
        .iter()
        .take_while(|l| **l > T::lit(GRAM_RANK_TOL) * top && **l > T::zero())
        .count();
    if r > rank {
        return Err(PodError::RankTooLarge { requested: r, rank });
    }
    let mut v = v;
    orthonormalize_columns(&mut v);
    for l in values.iter_mut() {
        *l = l.sqrt();
    }
    Ok(PodBasis {
        v,
        singular_values: values,
        r,
        n,
    })
}

/// `Σ_{i≤r} σᵢ² / Σ σᵢ²`.
pub fn energy_fraction<T: Scalar>(singular_values: &[T], r: usize) -> Result<T, PodError> {
    if singular_values.is_empty() {
        return Err(PodError::EmptySpectrum);
    }
    let total: T = singular_values.iter().map(|s| *s * *s).sum();
    if total == T::zero() {
        return Err(PodError::EmptySpectrum);
    }
    let head: T = singular_values.iter().take(r).map(|s| *s * *s).sum();
    Ok(head / total)
}

impl<T: Scalar> PodBasis<T> {
    /// `𝒱 = blkdiag(V, V)`, shape `2N × 2r`.
    pub fn projector(&self) -> Mat<T> {
        self.v.block_diag2()
    }

    /// `𝒱ᵀx`.
    pub fn project(&self, x: &[T]) -> Result<Vec<T>, PodError> {
        if x.len() != 2 * self.n {
            return Err(PodError::DimensionMismatch {
                expected: 2 * self.n,
                got: x.len(),
            });
        }
        let mut out = self.v.tr_matvec(&x[..self.n])?;
        out.extend(self.v.tr_matvec(&x[self.n..])?);
        Ok(out)
    }

    /// `𝒱x̂`.
    pub fn lift(&self, xr: &[T]) -> Result<Vec<T>, PodError> {
        if xr.len() != 2 * self.r {
            return Err(PodError::DimensionMismatch {
                expected: 2 * self.r,
                got: xr.len(),
            });
        }
        let mut out = self.v.matvec(&xr[..self.r])?;
        out.extend(self.v.matvec(&xr[self.r..])?);
        Ok(out)
    }

    /// Cumulative energy fractions for ranks `1..=len`.
    pub fn energy_table(&self) -> Vec<T> {
        (1..=self.singular_values.len())
            .map(|r| energy_fraction(&self.singular_values, r).unwrap_or(T::zero()))
            .collect()
    }

    /// Projects every state; derivatives come from the five-point stencil.
    pub fn reduce(&self, traj: &Trajectory<T>) -> Result<Trajectory<T>, PodError> {
        let states = traj
            .states
            .iter()
            .map(|x| self.project(x))
            .collect::<Result<Vec<_>, _>>()?;
        let reduced = Trajectory::new(traj.times.clone(), states, None, traj.ic_id.clone())?;
        let derivs = if reduced.len() >= 5 {
            Some(stencil_derivatives(&reduced)?)
        } else {
            None
        };
        Ok(Trajectory { derivs, ..reduced })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj(states: Vec<Vec<f64>>) -> Trajectory<f64> {
        let times = (0..states.len()).map(|k| k as f64).collect();
        Trajectory::new(times, states, None, "t").unwrap()
    }

    #[test]
    fn snapshot_layout() {
        let t = traj(vec![vec![1.0, 2.0, 3.0, 4.0], vec![5.0, 6.0, 7.0, 8.0], vec![0.0; 4]]);
        let x = assemble_snapshots(&[t]).unwrap();
        assert_eq!(x.shape(), (2, 6));
        assert_eq!(x.row(0), &[1.0, 5.0, 0.0, 3.0, 7.0, 0.0]);
        assert_eq!(x.row(1), &[2.0, 6.0, 0.0, 4.0, 8.0, 0.0]);
    }

    #[test]
    fn rank_one_snapshots() {
        let u = [3.0f64, 4.0, 0.0];
        let c = [1.0, -2.0, 0.5, 2.0];
        let x = Mat::from_fn(3, 4, |i, j| u[i] * c[j]);
        let b = pod_basis(&x, 1).unwrap();
        assert!((b.v[(0, 0)].abs() - 0.6).abs() < 1e-12);
        assert!((b.v[(1, 0)].abs() - 0.8).abs() < 1e-12);
        assert!((energy_fraction(&b.singular_values, 1).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(pod_basis(&x, 2), Err(PodError::RankTooLarge { rank: 1, .. })));
    }

    #[test]
    fn scaled_orthogonal_columns() {
        // both Gram routes
        let wide = Mat::from_fn(3, 5, |i, j| if i == j { [3.0f64, 2.0, 1.0][i] } else { 0.0 });
        let tall = Mat::from_fn(5, 3, |i, j| if i == j { [1.0, 3.0, 2.0][i] } else { 0.0 });
        for x in [wide, tall] {
            let b = pod_basis(&x, 2).unwrap();
            let s = &b.singular_values;
            assert!((s[0] - 3.0).abs() < 1e-12 && (s[1] - 2.0).abs() < 1e-12 && (s[2] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn energy_fraction_values() {
        assert!((energy_fraction(&[2.0f64, 1.0], 1).unwrap() - 0.8).abs() < 1e-15);
        assert_eq!(energy_fraction(&[2.0, 1.0], 2).unwrap(), 1.0);
        assert!(energy_fraction::<f64>(&[], 1).is_err());
        assert!(pod_basis(&Mat::<f64>::identity(2), 0).is_err());
    }

    #[test]
    fn project_lift_identities() {
        let x = Mat::from_fn(4, 6, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let b = pod_basis(&x, 2).unwrap();
        let inside = b.lift(&[1.0, -2.0, 0.5, 3.0]).unwrap();
        let back = b.lift(&b.project(&inside).unwrap()).unwrap();
        for (a, c) in inside.iter().zip(&back) {
            assert!((a - c).abs() < 1e-10);
        }
        assert!(b.project(&[1.0; 3]).is_err());
        assert!(b.lift(&[1.0; 3]).is_err());
    }
}
