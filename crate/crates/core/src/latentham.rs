//! Latent Hamiltonians: sum-of-squares forms `zᵀQz` with `Q = LLᵀ + εI`
//! (quadratic `z = [y; w]`, quartic `z = [y; y∘y; w]`) and an unconstrained
//! cubic polynomial.
//!
//! Evaluation is written against [`Real`] with the trainable parameters passed
//! in explicitly, so the same formulas serve rollouts (plain floats) and
//! training (tape variables).

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diffkit::Real;
use crate::hamsys::apply_symplectic;
use crate::integrate::VectorField;
use crate::linalg::{symmetric_eigen, LinalgError, Mat};
use crate::scalar::{norm_sq, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatentError {
    #[error("latent dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("the cubic polynomial Hamiltonian carries no stability certificate")]
    NoCertificate,
    #[error("matrix is not positive semidefinite (eigenvalue {min_eig:e})")]
    NotPsd { min_eig: f64 },
    #[error("no positive part: every eigenvalue is below the tolerance")]
    NoPositivePart,
    #[error("latent half-dimension must be at least 1")]
    ZeroDimension,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SosKind {
    /// `z = [y; w]`
    Quadratic,
    /// `z = [y; y∘y; w]`
    Quartic,
}

/// `H(y) = zᵀ(LLᵀ + εI)z` with `L` lower triangular, stored row by row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SosHamiltonian<T> {
    pub kind: SosKind,
    pub m: usize,
    pub w: T,
    pub eps: T,
    pub l: Vec<T>,
}

fn tri_len(d: usize) -> usize {
    d * (d + 1) / 2
}

#[inline]
fn tri_idx(i: usize, j: usize) -> usize {
    i * (i + 1) / 2 + j
}

impl<T: Scalar> SosHamiltonian<T> {
    pub fn lift_dim(kind: SosKind, m: usize) -> usize {
        match kind {
            SosKind::Quadratic => 2 * m + 1,
            SosKind::Quartic => 4 * m + 1,
        }
    }

    /// Builds from a dense lower-triangular factor (upper part ignored).
    pub fn from_factor(kind: SosKind, m: usize, l: &Mat<T>, w: T, eps: T) -> Result<Self, LatentError> {
        if m == 0 {
            return Err(LatentError::ZeroDimension);
        }
        let d = Self::lift_dim(kind, m);
        if l.shape() != (d, d) {
            return Err(LatentError::DimensionMismatch {
                expected: d,
                got: l.rows(),
            });
        }
        let mut packed = Vec::with_capacity(tri_len(d));
        for i in 0..d {
            packed.extend_from_slice(&l.row(i)[..=i]);
        }
        Ok(Self {
            kind,
            m,
            w,
            eps,
            l: packed,
        })
    }

    /// `L = I/√2` plus uniform noise of size `jitter` on the strictly lower
    /// part, so `H ≈ ½(‖z‖²)` at the start of training.
    pub fn init<G: Rng + ?Sized>(kind: SosKind, m: usize, jitter: f64, rng: &mut G) -> Self {
        let d = Self::lift_dim(kind, m);
        let mut l = Vec::with_capacity(tri_len(d));
        for i in 0..d {
            for j in 0..=i {
                let v = if i == j {
                    std::f64::consts::FRAC_1_SQRT_2
                } else if jitter > 0.0 {
                    rng.gen_range(-jitter..jitter)
                } else {
                    0.0
                };
                l.push(T::lit(v));
            }
        }
        Self {
            kind,
            m,
            w: T::one(),
            eps: T::lit(1e-6),
            l,
        }
    }

    pub fn dim(&self) -> usize {
        Self::lift_dim(self.kind, self.m)
    }

    pub fn factor(&self) -> Mat<T> {
        let d = self.dim();
        Mat::from_fn(d, d, |i, j| if j <= i { self.l[tri_idx(i, j)] } else { T::zero() })
    }

    /// `Q = LLᵀ + εI`.
    pub fn q_matrix(&self) -> Mat<T> {
        let l = self.factor();
        let mut q = l.matmul(&l.transpose()).expect("square factor");
        for i in 0..q.rows() {
            q[(i, i)] += self.eps;
        }
        q
    }

    /// `(A, b, c)` with `H(y) = yᵀAy + bᵀy + c`; quadratic kind only.
    pub fn quadratic_view(&self) -> Option<(Mat<T>, Vec<T>, T)> {
        if self.kind != SosKind::Quadratic {
            return None;
        }
        let q = self.q_matrix();
        let k = 2 * self.m;
        let a = Mat::from_fn(k, k, |i, j| q[(i, j)]);
        let two_w = self.w + self.w;
        let b = (0..k).map(|i| two_w * q[(i, k)]).collect();
        Some((a, b, self.w * self.w * q[(k, k)]))
    }
}

fn lifted<T: Scalar, R: Real<T>>(kind: SosKind, w: T, y: &[R]) -> Vec<R> {
    let mut z = Vec::with_capacity(2 * y.len() + 1);
    z.extend_from_slice(y);
    if kind == SosKind::Quartic {
        z.extend(y.iter().map(|v| *v * *v));
    }
    z.push(y[0].lift(w));
    z
}

/// `Lᵀz` with `L` packed row by row.
fn lt_times<T: Scalar, R: Real<T>>(l: &[R], z: &[R]) -> Vec<R> {
    let d = z.len();
    let mut col = Vec::with_capacity(d);
    (0..d)
        .map(|j| {
            col.clear();
            col.extend((j..d).map(|i| l[tri_idx(i, j)]));
            R::dot(&col, &z[j..])
        })
        .collect()
}

/// `Qz = L(Lᵀz) + εz`.
fn q_times<T: Scalar, R: Real<T>>(l: &[R], eps: T, z: &[R]) -> Vec<R> {
    let u = lt_times(l, z);
    (0..z.len())
        .map(|i| {
            let row = &l[tri_idx(i, 0)..=tri_idx(i, i)];
            R::dot(row, &u[..=i]) + z[i] * eps
        })
        .collect()
}

/// Monomial `y_i y_j y_k` with unused slots marked `usize::MAX`.
fn cubic_monomials(k: usize) -> Vec<[usize; 3]> {
    const NONE: usize = usize::MAX;
    let mut out = vec![[NONE; 3]];
    for i in 0..k {
        out.push([i, NONE, NONE]);
    }
    for i in 0..k {
        for j in i..k {
            out.push([i, j, NONE]);
        }
    }
    for i in 0..k {
        for j in i..k {
            for l in j..k {
                out.push([i, j, l]);
            }
        }
    }
    out
}

/// Polynomial of total degree ≤ 3 in `2m` variables; coefficient `r` belongs
/// to the `r`-th monomial in graded order `1, y_i, y_iy_j (i≤j), y_iy_jy_k
/// (i≤j≤k)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubicPoly<T> {
    pub m: usize,
    pub coeffs: Vec<T>,
}

impl<T: Scalar> CubicPoly<T> {
    pub fn coeff_count(m: usize) -> usize {
        let k = 2 * m;
        1 + k + k * (k + 1) / 2 + k * (k + 1) * (k + 2) / 6
    }

    pub fn zeros(m: usize) -> Self {
        Self {
            m,
            coeffs: vec![T::zero(); Self::coeff_count(m)],
        }
    }

    /// Starts at `½‖y‖²` plus uniform noise of size `jitter` on every
    /// non-constant coefficient.
    pub fn init<G: Rng + ?Sized>(m: usize, jitter: f64, rng: &mut G) -> Self {
        let mut p = Self::zeros(m);
        for (c, mono) in p.coeffs.iter_mut().zip(cubic_monomials(2 * m)) {
            if mono[0] == usize::MAX {
                continue;
            }
            let base = if mono[2] == usize::MAX && mono[1] == mono[0] { 0.5 } else { 0.0 };
            let noise = if jitter > 0.0 { rng.gen_range(-jitter..jitter) } else { 0.0 };
            *c = T::lit(base + noise);
        }
        p
    }

    /// Sets the coefficient of `∏ y_idx` (indices in any order, length ≤ 3).
    pub fn set(&mut self, idx: &[usize], value: T) {
        let mut key = [usize::MAX; 3];
        let mut sorted = idx.to_vec();
        sorted.sort_unstable();
        key[..sorted.len()].copy_from_slice(&sorted);
        let r = cubic_monomials(2 * self.m)
            .iter()
            .position(|mono| *mono == key)
            .expect("monomial of degree at most 3 in range");
        self.coeffs[r] = value;
    }
}

fn cubic_h<T: Scalar, R: Real<T>>(coeffs: &[R], y: &[R]) -> R {
    let monos = cubic_monomials(y.len());
    let one = y[0].lift(T::one());
    let terms: Vec<R> = monos
        .iter()
        .map(|mono| {
            mono.iter()
                .filter(|i| **i != usize::MAX)
                .fold(one, |acc, i| acc * y[*i])
        })
        .collect();
    R::dot(coeffs, &terms)
}

fn cubic_grad<T: Scalar, R: Real<T>>(coeffs: &[R], y: &[R]) -> Vec<R> {
    let k = y.len();
    let one = y[0].lift(T::one());
    let mut c_terms: Vec<Vec<R>> = vec![Vec::new(); k];
    let mut f_terms: Vec<Vec<R>> = vec![Vec::new(); k];
    for (r, mono) in cubic_monomials(k).iter().enumerate() {
        let deg = mono.iter().filter(|i| **i != usize::MAX).count();
        for pos in 0..deg {
            // product of the remaining factors
            let f = (0..deg)
                .filter(|q| *q != pos)
                .fold(one, |acc, q| acc * y[mono[q]]);
            c_terms[mono[pos]].push(coeffs[r]);
            f_terms[mono[pos]].push(f);
        }
    }
    (0..k).map(|a| R::dot(&c_terms[a], &f_terms[a])).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "kebab-case")]
pub enum LatentHamiltonian<T> {
    Sos(SosHamiltonian<T>),
    Cubic(CubicPoly<T>),
}

/// Factorization `Q = VᵀQ₁V` over the positive spectrum.
#[derive(Clone, Debug)]
pub struct PsdDecomposition<T> {
    /// `rank × d`, rows are orthonormal eigenvectors.
    pub v: Mat<T>,
    /// Diagonal positive part.
    pub q1: Mat<T>,
    pub rank: usize,
    /// Eigenvalues at or below the tolerance.
    pub dropped: Vec<T>,
}

pub fn psd_decompose<T: Scalar>(q: &Mat<T>, tol: T) -> Result<PsdDecomposition<T>, LatentError> {
    let eig = symmetric_eigen(q, T::lit(1e-14))?;
    if let Some(min) = eig.values.first() {
        if *min < -tol {
            return Err(LatentError::NotPsd {
                min_eig: min.to_f64_lossy(),
            });
        }
    }
    let keep: Vec<usize> = (0..eig.values.len()).filter(|i| eig.values[*i] > tol).collect();
    if keep.is_empty() {
        return Err(LatentError::NoPositivePart);
    }
    let d = q.rows();
    let v = Mat::from_fn(keep.len(), d, |r, c| eig.vectors[(c, keep[r])]);
    let vals: Vec<T> = keep.iter().map(|i| eig.values[*i]).collect();
    let dropped = eig.values.iter().copied().filter(|x| *x <= tol).collect();
    Ok(PsdDecomposition {
        v,
        q1: Mat::diag(&vals),
        rank: keep.len(),
        dropped,
    })
}

impl<T: Scalar> LatentHamiltonian<T> {
    pub fn m(&self) -> usize {
        match self {
            Self::Sos(s) => s.m,
            Self::Cubic(c) => c.m,
        }
    }

    pub fn dim(&self) -> usize {
        2 * self.m()
    }

    /// Trainable parameters: packed `L` or the polynomial coefficients.
    pub fn params(&self) -> &[T] {
        match self {
            Self::Sos(s) => &s.l,
            Self::Cubic(c) => &c.coeffs,
        }
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        match self {
            Self::Sos(s) => &mut s.l,
            Self::Cubic(c) => &mut c.coeffs,
        }
    }

    pub fn is_certified(&self) -> bool {
        matches!(self, Self::Sos(_))
    }

    fn check(&self, y: usize) -> Result<(), LatentError> {
        if y != self.dim() {
            return Err(LatentError::DimensionMismatch {
                expected: self.dim(),
                got: y,
            });
        }
        Ok(())
    }

    /// `H(y)` evaluated with external parameters `theta` of this model's shape.
    pub fn h_with<R: Real<T>>(&self, theta: &[R], y: &[R]) -> R {
        match self {
            Self::Sos(s) => {
                let z = lifted(s.kind, s.w, y);
                let u = lt_times(theta, &z);
                R::dot(&u, &u) + R::dot(&z, &z) * s.eps
            }
            Self::Cubic(_) => cubic_h(theta, y),
        }
    }

    /// `∇H(y)` evaluated with external parameters `theta`.
    pub fn grad_with<R: Real<T>>(&self, theta: &[R], y: &[R]) -> Vec<R> {
        match self {
            Self::Sos(s) => {
                let z = lifted(s.kind, s.w, y);
                let qz = q_times(theta, s.eps, &z);
                let k = y.len();
                let two = T::lit(2.0);
                match s.kind {
                    SosKind::Quadratic => qz[..k].iter().map(|v| *v * two).collect(),
                    SosKind::Quartic => (0..k)
                        .map(|i| (qz[i] + y[i] * qz[k + i] * two) * two)
                        .collect(),
                }
            }
            Self::Cubic(_) => cubic_grad(theta, y),
        }
    }

    pub fn latent_h(&self, y: &[T]) -> Result<T, LatentError> {
        self.check(y.len())?;
        Ok(self.h_with(self.params(), y))
    }

    pub fn latent_grad(&self, y: &[T]) -> Result<Vec<T>, LatentError> {
        self.check(y.len())?;
        Ok(self.grad_with(self.params(), y))
    }

    pub fn latent_vector_field(&self, y: &[T]) -> Result<Vec<T>, LatentError> {
        Ok(apply_symplectic(&self.latent_grad(y)?))
    }

    pub fn q_matrix(&self) -> Result<Mat<T>, LatentError> {
        match self {
            Self::Sos(s) => Ok(s.q_matrix()),
            Self::Cubic(_) => Err(LatentError::NoCertificate),
        }
    }

    /// Smallest eigenvalue of `Q`.
    pub fn sos_min_eig(&self) -> Result<T, LatentError> {
        let q = self.q_matrix()?;
        let eig = symmetric_eigen(&q, T::lit(1e-10))?;
        Ok(eig.values[0])
    }

    /// `B = H(y₀)/σ_min(Q)`.
    pub fn stability_bound(&self, y0: &[T]) -> Result<T, LatentError> {
        let sigma = self.sos_min_eig()?;
        Ok(self.latent_h(y0)? / sigma)
    }

    /// The quantity bounded by [`Self::stability_bound`]: `‖y‖²` for the
    /// quadratic form, `‖y‖² + ‖y∘y‖²` for the quartic one (the lifted
    /// coordinates actually appearing in `z`).
    pub fn certified_quantity(&self, y: &[T]) -> Result<T, LatentError> {
        self.check(y.len())?;
        match self {
            Self::Sos(s) => {
                let r2 = norm_sq(y);
                Ok(match s.kind {
                    SosKind::Quadratic => r2,
                    SosKind::Quartic => r2 + y.iter().map(|v| (*v * *v) * (*v * *v)).sum(),
                })
            }
            Self::Cubic(_) => Err(LatentError::NoCertificate),
        }
    }
}

impl<T: Scalar> VectorField<T> for LatentHamiltonian<T> {
    fn dim(&self) -> usize {
        2 * self.m()
    }

    fn eval(&self, x: &[T], out: &mut [T]) {
        let g = self.grad_with(self.params(), x);
        let k = g.len() / 2;
        for i in 0..k {
            out[i] = g[k + i];
            out[k + i] = -g[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sos(kind: SosKind, m: usize, l: Mat<f64>, w: f64, eps: f64) -> LatentHamiltonian<f64> {
        LatentHamiltonian::Sos(SosHamiltonian::from_factor(kind, m, &l, w, eps).unwrap())
    }

    #[test]
    fn quadratic_identity_values() {
        let h = sos(SosKind::Quadratic, 1, Mat::identity(3), 1.0, 0.0);
        assert_eq!(h.latent_h(&[0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(h.latent_grad(&[1.0, 2.0]).unwrap(), vec![2.0, 4.0]);
    }

    #[test]
    fn quartic_identity_values() {
        let h = sos(SosKind::Quartic, 1, Mat::identity(5), 0.0, 0.0);
        assert_eq!(h.latent_h(&[1.0, 1.0]).unwrap(), 4.0);
        assert_eq!(h.latent_grad(&[1.0, 1.0]).unwrap(), vec![6.0, 6.0]);
    }

    #[test]
    fn half_identity_gives_rotation() {
        let h = sos(SosKind::Quadratic, 1, Mat::identity(3).scale(0.5f64.sqrt()), 1.0, 0.0);
        let f = h.latent_vector_field(&[0.3, -0.7]).unwrap();
        assert!((f[0] + 0.7).abs() < 1e-15 && (f[1] + 0.3).abs() < 1e-15);
        assert_eq!(h.latent_vector_field(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn cubic_example_is_indefinite() {
        let mut c = CubicPoly::zeros(1);
        c.set(&[1, 1], 0.5);
        c.set(&[0, 0], 0.5);
        c.set(&[0, 0, 0], 1.0 / 3.0);
        let h = LatentHamiltonian::Cubic(c);
        assert!((h.latent_h(&[-3.0, 0.0]).unwrap() + 4.5).abs() < 1e-12);
        // q̇ = p, ṗ = −q − q²
        let f = h.latent_vector_field(&[2.0, 0.5]).unwrap();
        assert!((f[0] - 0.5).abs() < 1e-12 && (f[1] + 6.0).abs() < 1e-12);
        assert!(h.sos_min_eig().is_err());
        assert!(h.stability_bound(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn min_eig_and_bound() {
        let h = sos(SosKind::Quadratic, 1, Mat::identity(3), 1.0, 0.0);
        assert!((h.sos_min_eig().unwrap() - 1.0).abs() < 1e-12);
        let h = sos(SosKind::Quadratic, 1, Mat::diag(&[2.0, 1.0, 1.0]), 1.0, 1e-6);
        assert!((h.sos_min_eig().unwrap() - (1.0 + 1e-6)).abs() < 1e-12);
        let h = sos(SosKind::Quadratic, 1, Mat::identity(3), 0.0, 0.0);
        assert_eq!(h.stability_bound(&[2.0, 0.0]).unwrap(), 4.0);
        assert_eq!(h.stability_bound(&[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn quadratic_view_reproduces_h() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = SosHamiltonian::<f64>::init(SosKind::Quadratic, 2, 0.3, &mut rng);
        let (a, b, c) = s.quadratic_view().unwrap();
        let h = LatentHamiltonian::Sos(s);
        let y = [0.4, -1.2, 0.3, 2.0];
        let ay = a.matvec(&y).unwrap();
        let direct: f64 = crate::linalg::dot(&y, &ay) + crate::linalg::dot(&b, &y) + c;
        assert!((direct - h.latent_h(&y).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn psd_decompose_example() {
        let q = Mat::diag(&[0.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
        let d = psd_decompose(&q, 1e-12).unwrap();
        assert_eq!(d.rank, 2);
        assert_eq!(d.q1, Mat::identity(2));
        for (r, col) in [(0, 2), (1, 5)] {
            for c in 0..6 {
                let want = if c == col { 1.0 } else { 0.0 };
                assert!((d.v[(r, c)].abs() - want).abs() < 1e-14);
            }
        }
        let d = psd_decompose(&Mat::<f64>::identity(3), 1e-12).unwrap();
        assert_eq!(d.rank, 3);
        assert!(matches!(
            psd_decompose(&Mat::<f64>::zeros(3, 3), 1e-12),
            Err(LatentError::NoPositivePart)
        ));
        assert!(matches!(
            psd_decompose(&Mat::diag(&[1.0, -1.0]), 1e-12),
            Err(LatentError::NotPsd { .. })
        ));
    }

    #[test]
    fn dimension_checks() {
        let h = sos(SosKind::Quadratic, 1, Mat::identity(3), 1.0, 0.0);
        assert!(h.latent_h(&[1.0]).is_err());
        assert!(h.latent_grad(&[1.0, 2.0, 3.0]).is_err());
        assert!(SosHamiltonian::from_factor(SosKind::Quartic, 1, &Mat::<f64>::identity(3), 1.0, 0.0).is_err());
    }
}
