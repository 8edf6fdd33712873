//! Operator inference with canonical Hamiltonian structure: a linear model
//! `ẏ = J(2Ay + b)` with symmetric `A`, fitted by least squares.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hamsys::apply_symplectic;
use crate::integrate::{uniform_spacing, IntegrateError, Trajectory, VectorField};
use crate::linalg::{cholesky_solve, LinalgError, Lu, Mat};
use crate::scalar::{all_finite, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaselineError {
    #[error("no snapshots")]
    Empty,
    #[error("{what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("snapshot data contains non-finite entries")]
    NonFinite,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
}

/// Relative diagonal shift added to the normal equations.
const NORMAL_EQ_REG: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpInfModel<T> {
    /// Half-dimension; the state has `2m` entries.
    pub m: usize,
    /// Upper triangle of `A` packed row-wise (`i ≤ j`).
    pub a_upper: Vec<T>,
    pub b: Vec<T>,
}

fn upper_index(d: usize, i: usize, j: usize) -> usize {
    debug_assert!(i <= j);
    i * d - i * (i + 1) / 2 + j
}

impl<T: Scalar> OpInfModel<T> {
    pub fn from_parts(a: &Mat<T>, b: Vec<T>) -> Result<Self, BaselineError> {
        let d = a.rows();
        if a.cols() != d || !d.is_multiple_of(2) || d == 0 {
            return Err(BaselineError::DimensionMismatch {
                what: "operator shape",
                expected: d,
                got: a.cols(),
            });
        }
        if b.len() != d {
            return Err(BaselineError::DimensionMismatch {
                what: "affine term",
                expected: d,
                got: b.len(),
            });
        }
        let mut a_upper = Vec::with_capacity(d * (d + 1) / 2);
        for i in 0..d {
            for j in i..d {
                a_upper.push((a[(i, j)] + a[(j, i)]) * T::lit(0.5));
            }
        }
        Ok(Self { m: d / 2, a_upper, b })
    }

    pub fn dim(&self) -> usize {
        2 * self.m
    }

    /// The symmetric operator `A`.
    pub fn a(&self) -> Mat<T> {
        let d = self.dim();
        Mat::from_fn(d, d, |i, j| {
            let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
            self.a_upper[upper_index(d, lo, hi)]
        })
    }

    /// `H(y) = yᵀAy + bᵀy`.
    pub fn hamiltonian(&self, y: &[T]) -> T {
        let ay = self.a().matvec(y).expect("dimension");
        y.iter().zip(&ay).map(|(u, v)| *u * *v).sum::<T>()
            + y.iter().zip(&self.b).map(|(u, v)| *u * *v).sum::<T>()
    }

    /// `∇H = 2Ay + b`.
    pub fn grad(&self, y: &[T]) -> Vec<T> {
        let ay = self.a().matvec(y).expect("dimension");
        ay.iter().zip(&self.b).map(|(u, v)| T::lit(2.0) * *u + *v).collect()
    }

    /// Linear part `2JA` of the dynamics.
    pub fn system_matrix(&self) -> Mat<T> {
        let a = self.a();
        let m = self.m;
        Mat::from_fn(2 * m, 2 * m, |i, j| {
            let two = T::lit(2.0);
            if i < m {
                two * a[(i + m, j)]
            } else {
                -two * a[(i - m, j)]
            }
        })
    }

    /// Sum of squared residuals `Σₖ‖ẏₖ − J(2Ayₖ + b)‖²`.
    pub fn residual(&self, ys: &[Vec<T>], dys: &[Vec<T>]) -> T {
        ys.iter()
            .zip(dys)
            .map(|(y, dy)| {
                let f = apply_symplectic(&self.grad(y));
                dy.iter().zip(&f).map(|(u, v)| (*u - *v) * (*u - *v)).sum::<T>()
            })
            .sum()
    }
}

impl<T: Scalar> VectorField<T> for OpInfModel<T> {
    fn dim(&self) -> usize {
        2 * self.m
    }

    fn eval(&self, x: &[T], out: &mut [T]) {
        out.copy_from_slice(&apply_symplectic(&self.grad(x)));
    }
}

/// Feature rows of sample `y` for the system `Jᵀẏ = 2Ay + b` in the unknowns
/// `[upper(A); b]`: row `r` has coefficient `2y_j` on `a_{rj}`.
fn accumulate<T: Scalar>(d: usize, y: &[T], target: &[T], gram: &mut Mat<T>, rhs: &mut [T]) {
    let na = d * (d + 1) / 2;
    let two = T::lit(2.0);
    for r in 0..d {
        // sparse row: (index, coefficient)
        let mut row: Vec<(usize, T)> = Vec::with_capacity(d + 1);
        for (j, yj) in y.iter().enumerate() {
            let (lo, hi) = if r <= j { (r, j) } else { (j, r) };
            row.push((upper_index(d, lo, hi), two * *yj));
        }
        row.push((na + r, T::one()));
        for &(p, cp) in &row {
            rhs[p] += cp * target[r];
            for &(q, cq) in &row {
                gram[(p, q)] += cp * cq;
            }
        }
    }
}

/// Least-squares fit over symmetric `A` and `b`. Each `ys[k]` pairs with
/// `dys[k]`.
pub fn opinf_fit<T: Scalar>(ys: &[Vec<T>], dys: &[Vec<T>]) -> Result<OpInfModel<T>, BaselineError> {
    if ys.is_empty() {
        return Err(BaselineError::Empty);
    }
    if ys.len() != dys.len() {
        return Err(BaselineError::DimensionMismatch {
            what: "snapshot count",
            expected: ys.len(),
            got: dys.len(),
        });
    }
    let d = ys[0].len();
    if d == 0 || !d.is_multiple_of(2) {
        return Err(BaselineError::DimensionMismatch {
            what: "even coordinate dimension",
            expected: d + d % 2,
            got: d,
        });
    }
    for (y, dy) in ys.iter().zip(dys) {
        for v in [y, dy] {
            if v.len() != d {
                return Err(BaselineError::DimensionMismatch {
                    what: "coordinate dimension",
                    expected: d,
                    got: v.len(),
                });
            }
            if !all_finite(v) {
                return Err(BaselineError::NonFinite);
            }
        }
    }
    let m = d / 2;
    let unknowns = d * (d + 1) / 2 + d;
    if ys.len() < m * (2 * m + 1) + 2 * m {
        log::warn!(
            "{} snapshots for {} unknowns; the operator may not be identifiable",
            ys.len(),
            unknowns
        );
    }
    let mut gram = Mat::zeros(unknowns, unknowns);
    let mut rhs = vec![T::zero(); unknowns];
    for (y, dy) in ys.iter().zip(dys) {
        // Jᵀẏ = −Jẏ
        let target: Vec<T> = apply_symplectic(dy).into_iter().map(|v| -v).collect();
        accumulate(d, y, &target, &mut gram, &mut rhs);
    }
    let mean_diag = (0..unknowns).map(|i| gram[(i, i)]).sum::<T>() / T::from_usize_lossy(unknowns);
    let shift = T::lit(NORMAL_EQ_REG) * mean_diag.max(T::min_positive_value());
    for i in 0..unknowns {
        gram[(i, i)] += shift;
    }
    let theta = cholesky_solve(&gram, &rhs).or_else(|e| {
        log::warn!("normal equations are numerically rank deficient ({e}); using LU");
        Lu::factor(&gram).and_then(|lu| lu.solve(&rhs))
    })?;
    let na = d * (d + 1) / 2;
    Ok(OpInfModel {
        m,
        a_upper: theta[..na].to_vec(),
        b: theta[na..].to_vec(),
    })
}

/// Implicit-midpoint rollout on a uniform grid. For affine dynamics
/// `ẏ = My + c` the step is the Cayley update
/// `(I − hM/2)y⁺ = (I + hM/2)y + hc`, solved with one factorization.
pub fn opinf_rollout<T: Scalar>(
    model: &OpInfModel<T>,
    y0: &[T],
    t_grid: &[T],
) -> Result<Trajectory<T>, BaselineError> {
    let d = model.dim();
    if y0.len() != d {
        return Err(BaselineError::DimensionMismatch {
            what: "initial state",
            expected: d,
            got: y0.len(),
        });
    }
    let mut states = vec![y0.to_vec()];
    if t_grid.len() > 1 {
        let h = uniform_spacing(t_grid)?;
        let mmat = model.system_matrix();
        let c = apply_symplectic(&model.b);
        let half = h * T::lit(0.5);
        let lhs = Mat::from_fn(d, d, |i, j| {
            (if i == j { T::one() } else { T::zero() }) - half * mmat[(i, j)]
        });
        let lu = Lu::factor(&lhs)?;
        let mut y = y0.to_vec();
        for _ in 1..t_grid.len() {
            let my = mmat.matvec(&y)?;
            let rhs: Vec<T> = (0..d).map(|i| y[i] + half * my[i] + h * c[i]).collect();
            y = lu.solve(&rhs)?;
            if !all_finite(&y) {
                return Err(IntegrateError::NonFinite.into());
            }
            states.push(y.clone());
        }
    }
    let derivs = states.iter().map(|y| apply_symplectic(&model.grad(y))).collect();
    Ok(Trajectory::new(t_grid.to_vec(), states, Some(derivs), "opinf")?)
}
