//! Benchmark canonical Hamiltonian systems `ẋ = J∇H(x)` with `x = [q; p]`,
//! and initial-condition sampling.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrate::VectorField;
use crate::linalg::Mat;
use crate::scalar::{all_finite, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SystemError {
    #[error("state dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("state contains non-finite entries")]
    NonFinite,
    #[error("half-dimension must be at least 1")]
    ZeroDimension,
    #[error("grid needs at least 8 points, got {0}")]
    GridTooSmall(usize),
    #[error("only periodic boundary conditions are supported")]
    NonPeriodic,
    #[error("unknown system '{0}'")]
    UnknownSystem(String),
    #[error("invalid initial-condition spec: {0}")]
    InvalidSpec(String),
    #[error("rejection sampler gave up: {accepted} of {wanted} accepted after {attempts} attempts")]
    SamplerAbort {
        accepted: usize,
        wanted: usize,
        attempts: usize,
    },
}

/// Standard symplectic matrix `[[0, I_m], [−I_m, 0]]`.
pub fn symplectic_form<T: Scalar>(m: usize) -> Result<Mat<T>, SystemError> {
    if m == 0 {
        return Err(SystemError::ZeroDimension);
    }
    Ok(Mat::from_fn(2 * m, 2 * m, |i, j| {
        if j == i + m {
            T::one()
        } else if i == j + m {
            -T::one()
        } else {
            T::zero()
        }
    }))
}

/// Applies `J_{2m}` to a vector of length `2m` without forming the matrix.
pub fn apply_symplectic<T: Scalar>(v: &[T]) -> Vec<T> {
    let m = v.len() / 2;
    let mut out = Vec::with_capacity(v.len());
    out.extend_from_slice(&v[m..]);
    out.extend(v[..m].iter().map(|x| -*x));
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SystemName {
    Pendulum,
    Oscillator,
    LotkaVolterra,
    Nls,
    Wave,
}

impl SystemName {
    pub const ALL: [SystemName; 5] = [
        SystemName::Pendulum,
        SystemName::Oscillator,
        SystemName::LotkaVolterra,
        SystemName::Nls,
        SystemName::Wave,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SystemName::Pendulum => "pendulum",
            SystemName::Oscillator => "oscillator",
            SystemName::LotkaVolterra => "lotka-volterra",
            SystemName::Nls => "nls",
            SystemName::Wave => "wave",
        }
    }

    pub fn is_field(self) -> bool {
        matches!(self, SystemName::Nls | SystemName::Wave)
    }
}

impl fmt::Display for SystemName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SystemName {
    type Err = SystemError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SystemName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| SystemError::UnknownSystem(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    Periodic,
    Dirichlet,
}

/// Uniform periodic grid of `points` nodes on `[lo, hi)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicGrid<T> {
    pub points: usize,
    pub lo: T,
    pub hi: T,
}

impl<T: Scalar> PeriodicGrid<T> {
    pub fn spacing(&self) -> T {
        (self.hi - self.lo) / T::from_usize_lossy(self.points)
    }

    pub fn nodes(&self) -> Vec<T> {
        let h = self.spacing();
        (0..self.points)
            .map(|i| self.lo + h * T::from_usize_lossy(i))
            .collect()
    }

    /// Three-point periodic second-difference `D_ζζ x`.
    pub fn apply_laplacian(&self, x: &[T], out: &mut [T]) {
        let n = self.points;
        let inv = T::one() / (self.spacing() * self.spacing());
        let two = T::lit(2.0);
        for i in 0..n {
            let left = x[(i + n - 1) % n];
            let right = x[(i + 1) % n];
            out[i] = (left - two * x[i] + right) * inv;
        }
    }

    pub fn laplacian_matrix(&self) -> Mat<T> {
        let n = self.points;
        let inv = T::one() / (self.spacing() * self.spacing());
        Mat::from_fn(n, n, |i, j| {
            if i == j {
                T::lit(-2.0) * inv
            } else if (i + 1) % n == j || (j + 1) % n == i {
                inv
            } else {
                T::zero()
            }
        })
    }
}

/// System-specific constants.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemParams<T> {
    pub grid: Option<PeriodicGrid<T>>,
    /// Gradient-energy weight of the NLS Hamiltonian.
    pub alpha: T,
    /// Nonlinearity weight of the NLS Hamiltonian.
    pub beta: T,
}

/// A canonical Hamiltonian system from the benchmark registry.
#[derive(Clone, Debug)]
pub struct CanonicalSystem<T> {
    name: SystemName,
    n: usize,
    params: SystemParams<T>,
    stiff: Option<Mat<T>>,
}

impl<T: Scalar> CanonicalSystem<T> {
    pub fn pendulum() -> Self {
        Self::low_dim(SystemName::Pendulum)
    }

    /// `H = p²/2 + q²/2 + q²/4`.
    pub fn oscillator() -> Self {
        Self::low_dim(SystemName::Oscillator)
    }

    /// `H = p − eᵖ + 2q − e^q` in canonical coordinates.
    pub fn lotka_volterra() -> Self {
        Self::low_dim(SystemName::LotkaVolterra)
    }

    fn low_dim(name: SystemName) -> Self {
        Self {
            name,
            n: 1,
            params: SystemParams {
                grid: None,
                alpha: T::zero(),
                beta: T::zero(),
            },
            stiff: None,
        }
    }

    /// Builds a registry system; `grid_points` is used by `nls` and `wave` only.
    pub fn by_name(name: SystemName, grid_points: usize) -> Result<Self, SystemError> {
        let domain = (T::lit(-10.0), T::lit(10.0));
        match name {
            SystemName::Pendulum => Ok(Self::pendulum()),
            SystemName::Oscillator => Ok(Self::oscillator()),
            SystemName::LotkaVolterra => Ok(Self::lotka_volterra()),
            SystemName::Nls => build_nls_system(grid_points, domain, Boundary::Periodic),
            SystemName::Wave => build_wave_system(grid_points, domain, Boundary::Periodic),
        }
    }

    pub fn name(&self) -> SystemName {
        self.name
    }

    /// Half-dimension `n`; the state has `2n` entries.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn params(&self) -> &SystemParams<T> {
        &self.params
    }

    fn check(&self, x: &[T]) -> Result<(), SystemError> {
        if x.len() != 2 * self.n {
            return Err(SystemError::DimensionMismatch {
                expected: 2 * self.n,
                got: x.len(),
            });
        }
        Ok(())
    }

    fn grid(&self) -> &PeriodicGrid<T> {
        self.params.grid.as_ref().expect("field systems carry a grid")
    }

    pub fn eval_hamiltonian(&self, x: &[T]) -> Result<T, SystemError> {
        self.check(x)?;
        Ok(self.hamiltonian_unchecked(x))
    }

    fn hamiltonian_unchecked(&self, x: &[T]) -> T {
        let half = T::lit(0.5);
        match self.name {
            SystemName::Pendulum => {
                let (q, p) = (x[0], x[1]);
                T::one() - q.cos() + half * p * p
            }
            SystemName::Oscillator => {
                let (q, p) = (x[0], x[1]);
                half * p * p + half * q * q + T::lit(0.25) * q * q
            }
            SystemName::LotkaVolterra => {
                let (q, p) = (x[0], x[1]);
                p - p.exp() + T::lit(2.0) * q - q.exp()
            }
            SystemName::Nls => {
                // −α/2 (qᵀDq + pᵀDp) − β/4 Σ (q²+p²)²
                let n = self.n;
                let (q, p) = x.split_at(n);
                let grid = self.grid();
                let mut dq = vec![T::zero(); n];
                let mut dp = vec![T::zero(); n];
                grid.apply_laplacian(q, &mut dq);
                grid.apply_laplacian(p, &mut dp);
                let quad: T = (0..n).map(|i| q[i] * dq[i] + p[i] * dp[i]).sum();
                let quart: T = (0..n)
                    .map(|i| {
                        let r = q[i] * q[i] + p[i] * p[i];
                        r * r
                    })
                    .sum();
                -half * self.params.alpha * quad - T::lit(0.25) * self.params.beta * quart
            }
            SystemName::Wave => {
                // ½ pᵀp − ½ qᵀDq
                let n = self.n;
                let (q, p) = x.split_at(n);
                let mut dq = vec![T::zero(); n];
                self.grid().apply_laplacian(q, &mut dq);
                let pp: T = p.iter().map(|v| *v * *v).sum();
                let qdq: T = q.iter().zip(&dq).map(|(a, b)| *a * *b).sum();
                half * pp - half * qdq
            }
        }
    }

    /// Analytic `∇H(x)`.
    pub fn grad_h(&self, x: &[T]) -> Result<Vec<T>, SystemError> {
        self.check(x)?;
        let mut g = vec![T::zero(); x.len()];
        self.grad_unchecked(x, &mut g);
        Ok(g)
    }

    fn grad_unchecked(&self, x: &[T], g: &mut [T]) {
        match self.name {
            SystemName::Pendulum => {
                g[0] = x[0].sin();
                g[1] = x[1];
            }
            SystemName::Oscillator => {
                g[0] = T::lit(1.5) * x[0];
                g[1] = x[1];
            }
            SystemName::LotkaVolterra => {
                g[0] = T::lit(2.0) - x[0].exp();
                g[1] = T::one() - x[1].exp();
            }
            SystemName::Nls => {
                let n = self.n;
                let (q, p) = x.split_at(n);
                let (gq, gp) = g.split_at_mut(n);
                let grid = self.grid();
                grid.apply_laplacian(q, gq);
                grid.apply_laplacian(p, gp);
                let (a, b) = (self.params.alpha, self.params.beta);
                for i in 0..n {
                    let r = q[i] * q[i] + p[i] * p[i];
                    gq[i] = -a * gq[i] - b * r * q[i];
                    gp[i] = -a * gp[i] - b * r * p[i];
                }
            }
            SystemName::Wave => {
                let n = self.n;
                let (q, p) = x.split_at(n);
                let (gq, gp) = g.split_at_mut(n);
                self.grid().apply_laplacian(q, gq);
                for v in gq.iter_mut() {
                    *v = -*v;
                }
                gp.copy_from_slice(p);
            }
        }
    }

    /// `f(x) = J_{2n} ∇H(x)`.
    pub fn eval_vector_field(&self, x: &[T]) -> Result<Vec<T>, SystemError> {
        self.check(x)?;
        if !all_finite(x) {
            return Err(SystemError::NonFinite);
        }
        let mut out = vec![T::zero(); x.len()];
        self.eval(x, &mut out);
        Ok(out)
    }
}

impl<T: Scalar> VectorField<T> for CanonicalSystem<T> {
    fn dim(&self) -> usize {
        2 * self.n
    }

    fn eval(&self, x: &[T], out: &mut [T]) {
        let n = self.n;
        let mut g = vec![T::zero(); 2 * n];
        self.grad_unchecked(x, &mut g);
        out[..n].copy_from_slice(&g[n..]);
        for i in 0..n {
            out[n + i] = -g[i];
        }
    }

    fn stiff_linear_part(&self) -> Option<&Mat<T>> {
        self.stiff.as_ref()
    }
}

fn check_grid(points: usize, boundary: Boundary) -> Result<(), SystemError> {
    if boundary != Boundary::Periodic {
        return Err(SystemError::NonPeriodic);
    }
    if points < 8 {
        return Err(SystemError::GridTooSmall(points));
    }
    Ok(())
}

/// Cubic NLS `i u_t + ½ u_ζζ + |u|² u = 0` with `u = q + i p` on a periodic
/// grid; α = ½, β = 1.
pub fn build_nls_system<T: Scalar>(
    points: usize,
    domain: (T, T),
    boundary: Boundary,
) -> Result<CanonicalSystem<T>, SystemError> {
    check_grid(points, boundary)?;
    let grid = PeriodicGrid {
        points,
        lo: domain.0,
        hi: domain.1,
    };
    let alpha = T::lit(0.5);
    let d = grid.laplacian_matrix();
    // linear part of f: q̇ = −α D p, ṗ = α D q
    let stiff = Mat::from_fn(2 * points, 2 * points, |i, j| {
        match (i < points, j < points) {
            (true, false) => -alpha * d[(i, j - points)],
            (false, true) => alpha * d[(i - points, j)],
            _ => T::zero(),
        }
    });
    Ok(CanonicalSystem {
        name: SystemName::Nls,
        n: points,
        params: SystemParams {
            grid: Some(grid),
            alpha,
            beta: T::one(),
        },
        stiff: Some(stiff),
    })
}

/// Linear wave equation `u_tt = u_ζζ` as `ż = K z`, `K = [[0, I], [D, 0]]`,
/// with discrete Hamiltonian `½ pᵀp − ½ qᵀ D q`.
pub fn build_wave_system<T: Scalar>(
    points: usize,
    domain: (T, T),
    boundary: Boundary,
) -> Result<CanonicalSystem<T>, SystemError> {
    check_grid(points, boundary)?;
    let grid = PeriodicGrid {
        points,
        lo: domain.0,
        hi: domain.1,
    };
    let k = wave_operator(&grid);
    Ok(CanonicalSystem {
        name: SystemName::Wave,
        n: points,
        params: SystemParams {
            grid: Some(grid),
            alpha: T::zero(),
            beta: T::zero(),
        },
        stiff: Some(k),
    })
}

/// Dense `K = [[0, I], [D_ζζ, 0]]`.
pub fn wave_operator<T: Scalar>(grid: &PeriodicGrid<T>) -> Mat<T> {
    let n = grid.points;
    let d = grid.laplacian_matrix();
    Mat::from_fn(2 * n, 2 * n, |i, j| match (i < n, j < n) {
        (true, false) if j - n == i => T::one(),
        (false, true) => d[(i - n, j)],
        _ => T::zero(),
    })
}

/// `u₀ = sech(ζ/2)`, i.e. `q = sech(ζ/2)`, `p = 0`.
pub fn nls_initial_state<T: Scalar>(grid: &PeriodicGrid<T>) -> Vec<T> {
    let half = T::lit(0.5);
    let mut x: Vec<T> = grid.nodes().into_iter().map(|z| sech(z * half)).collect();
    x.extend(std::iter::repeat_n(T::zero(), grid.points));
    x
}

/// `u₀ = sech(μζ)` at rest.
pub fn wave_initial_state<T: Scalar>(grid: &PeriodicGrid<T>, mu: T) -> Vec<T> {
    let mut x: Vec<T> = grid.nodes().into_iter().map(|z| sech(mu * z)).collect();
    x.extend(std::iter::repeat_n(T::zero(), grid.points));
    x
}

fn sech<T: Scalar>(x: T) -> T {
    T::one() / x.cosh()
}

/// Box-uniform rejection sampling spec.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialConditionSpec<T> {
    /// One closed interval per state coordinate.
    pub bounds: Vec<(T, T)>,
    pub energy_cap: Option<T>,
    pub count: usize,
    pub seed: u64,
}

const MAX_ATTEMPTS: usize = 1_000_000;
const MIN_ACCEPTANCE: f64 = 1e-4;

/// Draws `count` states uniformly from the box, keeping those with
/// `H(x) ≤ energy_cap`. Deterministic for a fixed seed.
pub fn sample_initial_conditions<T: Scalar>(
    sys: &CanonicalSystem<T>,
    spec: &InitialConditionSpec<T>,
) -> Result<Vec<Vec<T>>, SystemError> {
    let dim = 2 * sys.n();
    if spec.bounds.len() != dim {
        return Err(SystemError::DimensionMismatch {
            expected: dim,
            got: spec.bounds.len(),
        });
    }
    if spec.count == 0 {
        return Err(SystemError::InvalidSpec("count must be positive".into()));
    }
    if spec.bounds.iter().any(|(lo, hi)| !(lo <= hi) || !lo.is_finite() || !hi.is_finite()) {
        return Err(SystemError::InvalidSpec("each bound must be a finite interval lo ≤ hi".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(spec.count);
    let mut attempts = 0usize;
    while out.len() < spec.count {
        let abort = attempts >= MAX_ATTEMPTS
            || (attempts >= MAX_ATTEMPTS / 10
                && (out.len() as f64) < MIN_ACCEPTANCE * attempts as f64);
        if abort {
            return Err(SystemError::SamplerAbort {
                accepted: out.len(),
                wanted: spec.count,
                attempts,
            });
        }
        attempts += 1;
        let x: Vec<T> = spec
            .bounds
            .iter()
            .map(|(lo, hi)| *lo + (*hi - *lo) * T::lit(rng.gen::<f64>()))
            .collect();
        match spec.energy_cap {
            Some(cap) if sys.hamiltonian_unchecked(&x) > cap => continue,
            _ => out.push(x),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn symplectic_form_small_cases() {
        let j1: Mat<f64> = symplectic_form(1).unwrap();
        assert_eq!(j1.as_slice(), &[0.0, 1.0, -1.0, 0.0]);
        let j2: Mat<f64> = symplectic_form(2).unwrap();
        let jtj = j2.transpose().matmul(&j2).unwrap();
        assert_eq!(jtj, Mat::identity(4));
        let j3: Mat<f64> = symplectic_form(3).unwrap();
        assert_eq!(j3.matmul(&j3).unwrap(), Mat::identity(6).scale(-1.0));
        assert_eq!(j3.transpose(), j3.scale(-1.0));
        assert!(matches!(symplectic_form::<f64>(0), Err(SystemError::ZeroDimension)));
    }

    #[test]
    fn hamiltonian_values() {
        let pend = CanonicalSystem::<f64>::pendulum();
        assert_eq!(pend.eval_hamiltonian(&[0.0, 0.0]).unwrap(), 0.0);
        assert_relative_eq!(pend.eval_hamiltonian(&[PI, 0.0]).unwrap(), 2.0);
        let lv = CanonicalSystem::<f64>::lotka_volterra();
        assert_eq!(lv.eval_hamiltonian(&[0.0, 0.0]).unwrap(), -2.0);
        assert!(matches!(
            pend.eval_hamiltonian(&[0.0]),
            Err(SystemError::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn vector_field_values() {
        let pend = CanonicalSystem::<f64>::pendulum();
        assert_eq!(pend.eval_vector_field(&[0.0, 1.0]).unwrap(), vec![1.0, 0.0]);
        let lv = CanonicalSystem::<f64>::lotka_volterra();
        assert_eq!(lv.eval_vector_field(&[0.0, 0.0]).unwrap(), vec![0.0, -1.0]);
        let osc = CanonicalSystem::<f64>::oscillator();
        assert_eq!(osc.eval_vector_field(&[1.0, 0.0]).unwrap(), vec![0.0, -1.5]);
        assert_eq!(
            pend.eval_vector_field(&[f64::NAN, 0.0]),
            Err(SystemError::NonFinite)
        );
    }

    #[test]
    fn nls_constant_state() {
        let sys = build_nls_system::<f64>(16, (-10.0, 10.0), Boundary::Periodic).unwrap();
        let c = 0.7;
        let mut x = vec![c; 16];
        x.extend(vec![0.0; 16]);
        let f = sys.eval_vector_field(&x).unwrap();
        for i in 0..16 {
            assert!(f[i].abs() < 1e-12);
            assert_relative_eq!(f[16 + i], c * c * c, epsilon = 1e-12);
        }
        let zero = sys.eval_vector_field(&vec![0.0; 32]).unwrap();
        assert!(zero.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn field_systems_reject_bad_grids() {
        assert!(matches!(
            build_nls_system::<f64>(4, (-10.0, 10.0), Boundary::Periodic),
            Err(SystemError::GridTooSmall(4))
        ));
        assert!(matches!(
            build_nls_system::<f64>(16, (-10.0, 10.0), Boundary::Dirichlet),
            Err(SystemError::NonPeriodic)
        ));
        assert!(matches!(
            build_wave_system::<f64>(7, (-10.0, 10.0), Boundary::Periodic),
            Err(SystemError::GridTooSmall(7))
        ));
    }

    #[test]
    fn full_size_field_systems() {
        let nls = CanonicalSystem::<f64>::by_name(SystemName::Nls, 256).unwrap();
        assert_eq!(nls.dim(), 512);
        let wave = CanonicalSystem::<f64>::by_name(SystemName::Wave, 256).unwrap();
        assert_eq!(wave.dim(), 512);
    }

    #[test]
    fn periodic_stencil_rows_are_cyclic_shifts() {
        let grid = PeriodicGrid {
            points: 4,
            lo: -10.0,
            hi: 10.0,
        };
        let h2 = grid.spacing() * grid.spacing();
        let d = grid.laplacian_matrix();
        let base = [-2.0, 1.0, 0.0, 1.0];
        for i in 0..4 {
            for j in 0..4 {
                assert_relative_eq!(d[(i, j)] * h2, base[(j + 4 - i) % 4], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn wave_constant_position_is_stationary() {
        let sys = build_wave_system::<f64>(16, (-10.0, 10.0), Boundary::Periodic).unwrap();
        let mut x = vec![1.3; 16];
        x.extend(vec![0.0; 16]);
        let f = sys.eval_vector_field(&x).unwrap();
        assert!(f.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn wave_operator_matches_hamiltonian_field() {
        let sys = build_wave_system::<f64>(12, (-10.0, 10.0), Boundary::Periodic).unwrap();
        let x: Vec<f64> = (0..24).map(|i| ((i * 7 % 11) as f64 - 5.0) / 3.0).collect();
        let kz = sys.stiff_linear_part().unwrap().matvec(&x).unwrap();
        let f = sys.eval_vector_field(&x).unwrap();
        for (a, b) in kz.iter().zip(&f) {
            assert_relative_eq!(*a, *b, epsilon = 1e-10, max_relative = 1e-13);
        }
    }

    #[test]
    fn sampler_respects_cap_and_seed() {
        let pend = CanonicalSystem::<f64>::pendulum();
        let spec = InitialConditionSpec {
            bounds: vec![(-3.0, 3.0), (-3.0, 3.0)],
            energy_cap: Some(2.0),
            count: 20,
            seed: 7,
        };
        let a = sample_initial_conditions(&pend, &spec).unwrap();
        assert_eq!(a.len(), 20);
        for x in &a {
            assert!(pend.eval_hamiltonian(x).unwrap() <= 2.0);
            assert!(x.iter().all(|v| (-3.0..=3.0).contains(v)));
        }
        assert_eq!(a, sample_initial_conditions(&pend, &spec).unwrap());
        let uncapped = InitialConditionSpec {
            energy_cap: None,
            ..spec.clone()
        };
        let b = sample_initial_conditions(&pend, &uncapped).unwrap();
        assert!(b.iter().flatten().all(|v| (-3.0..=3.0).contains(v)));
    }

    #[test]
    fn sampler_aborts_on_unreachable_cap() {
        let pend = CanonicalSystem::<f64>::pendulum();
        let spec = InitialConditionSpec {
            bounds: vec![(2.0, 3.0), (2.0, 3.0)],
            energy_cap: Some(0.1),
            count: 3,
            seed: 0,
        };
        assert!(matches!(
            sample_initial_conditions(&pend, &spec),
            Err(SystemError::SamplerAbort { accepted: 0, .. })
        ));
    }

    #[test]
    fn registry_names_round_trip() {
        for name in SystemName::ALL {
            assert_eq!(name.as_str().parse::<SystemName>().unwrap(), name);
        }
        assert!("duffing".parse::<SystemName>().is_err());
    }
}
