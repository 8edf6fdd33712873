//! Implicit midpoint time stepping and five-point stencil derivatives.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{LinalgError, Lu, Mat};
use crate::scalar::{all_finite, max_abs, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegrateError {
    #[error("midpoint solve did not converge (residual {residual:e})")]
    NoConvergence { residual: f64 },
    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<IntegrateError>,
    },
    #[error("state contains non-finite entries")]
    NonFinite,
    #[error("step size must be non-zero and finite")]
    BadStep,
    #[error("time grid is empty or not strictly increasing")]
    BadGrid,
    #[error("time grid is not uniform")]
    NonUniformGrid,
    #[error("need at least 5 samples for the five-point stencil, got {0}")]
    TooFewSamples(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid solver config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// An autonomous vector field `ẋ = f(x)`.
pub trait VectorField<T: Scalar> {
    fn dim(&self) -> usize;

    fn eval(&self, x: &[T], out: &mut [T]);

    /// Constant matrix `A` capturing the stiff linear part of `f`. When present
    /// the implicit solve iterates with the fixed preconditioner `I − h/2·A`.
    fn stiff_linear_part(&self) -> Option<&Mat<T>> {
        None
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig<T> {
    /// Residual tolerance, relative to `max(1, ‖x‖∞)`; floored at `64ε`.
    pub tol: T,
    pub max_iter: usize,
    /// Largest internal step used by [`integrate_trajectory`]; grid intervals
    /// longer than this are split into equal substeps.
    pub max_step: Option<T>,
}

impl<T: Scalar> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-12),
            max_iter: 50,
            max_step: None,
        }
    }
}

impl<T: Scalar> SolverConfig<T> {
    /// Data-generation policy: internal steps no longer than 0.01.
    pub fn fine() -> Self {
        Self {
            max_step: Some(T::lit(0.01)),
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<(), IntegrateError> {
        if !(self.tol > T::zero()) {
            return Err(IntegrateError::BadConfig("tol must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(IntegrateError::BadConfig("max_iter must be at least 1".into()));
        }
        if let Some(h) = self.max_step {
            if !(h > T::zero()) {
                return Err(IntegrateError::BadConfig("max_step must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Time-stamped states of one trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<T> {
    pub times: Vec<T>,
    pub states: Vec<Vec<T>>,
    pub derivs: Option<Vec<Vec<T>>>,
    pub ic_id: String,
}

impl<T: Scalar> Trajectory<T> {
    pub fn new(
        times: Vec<T>,
        states: Vec<Vec<T>>,
        derivs: Option<Vec<Vec<T>>>,
        ic_id: impl Into<String>,
    ) -> Result<Self, IntegrateError> {
        check_grid(&times)?;
        if states.len() != times.len() {
            return Err(IntegrateError::DimensionMismatch {
                expected: times.len(),
                got: states.len(),
            });
        }
        let dim = states[0].len();
        for s in states.iter().chain(derivs.iter().flatten()) {
            if s.len() != dim {
                return Err(IntegrateError::DimensionMismatch {
                    expected: dim,
                    got: s.len(),
                });
            }
        }
        if let Some(d) = &derivs {
            if d.len() != times.len() {
                return Err(IntegrateError::DimensionMismatch {
                    expected: times.len(),
                    got: d.len(),
                });
            }
        }
        Ok(Self {
            times,
            states,
            derivs,
            ic_id: ic_id.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.ic_id = id.into();
        self
    }
}

fn check_grid<T: Scalar>(times: &[T]) -> Result<(), IntegrateError> {
    if times.is_empty() || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(IntegrateError::BadGrid);
    }
    Ok(())
}

/// Uniform spacing of a grid, or an error when spacings differ by more than
/// a relative `1e-9` (or the rounding of the time stamps themselves).
pub fn uniform_spacing<T: Scalar>(times: &[T]) -> Result<T, IntegrateError> {
    check_grid(times)?;
    if times.len() < 2 {
        return Ok(T::zero());
    }
    let h = (times[times.len() - 1] - times[0]) / T::from_usize_lossy(times.len() - 1);
    let span = times[0].abs().max(times[times.len() - 1].abs());
    let tol = (h * T::lit(1e-9)).max(span * T::epsilon() * T::lit(8.0));
    if times.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > tol) {
        return Err(IntegrateError::NonUniformGrid);
    }
    Ok(h)
}

/// `n` equidistant points on `[t0, t1]`, endpoints included.
pub fn linspace<T: Scalar>(t0: T, t1: T, n: usize) -> Vec<T> {
    match n {
        0 => Vec::new(),
        1 => vec![t0],
        _ => {
            let h = (t1 - t0) / T::from_usize_lossy(n - 1);
            (0..n).map(|i| t0 + h * T::from_usize_lossy(i)).collect()
        }
    }
}

/// Reusable implicit-midpoint stepper; caches the preconditioner factorization
/// for the last step size.
pub struct MidpointSolver<T: Scalar> {
    cfg: SolverConfig<T>,
    precond: Option<(T, Lu<T>)>,
}

impl<T: Scalar> MidpointSolver<T> {
    pub fn new(cfg: SolverConfig<T>) -> Result<Self, IntegrateError> {
        cfg.validate()?;
        Ok(Self { cfg, precond: None })
    }

    pub fn config(&self) -> &SolverConfig<T> {
        &self.cfg
    }

    /// Solves `x⁺ = x + h f((x + x⁺)/2)`.
    ///
    /// Fixed-point iteration (or simplified Newton with `I − h/2·A` when the
    /// field exposes a stiff linear part) first, then damped Newton with a
    /// finite-difference Jacobian.
    pub fn step<F: VectorField<T> + ?Sized>(
        &mut self,
        f: &F,
        x: &[T],
        h: T,
    ) -> Result<Vec<T>, IntegrateError> {
        let n = f.dim();
        if x.len() != n {
            return Err(IntegrateError::DimensionMismatch {
                expected: n,
                got: x.len(),
            });
        }
        if !all_finite(x) {
            return Err(IntegrateError::NonFinite);
        }
        if h == T::zero() || !h.is_finite() {
            return Err(IntegrateError::BadStep);
        }
        // never ask for less than roundoff can deliver (matters for f32)
        let tol = self.cfg.tol.max(T::epsilon() * T::lit(64.0)) * max_abs(x).max(T::one());
        let mut ws = Workspace::new(n);

        if let Some(a) = f.stiff_linear_part() {
            let cached = matches!(&self.precond, Some((hc, _)) if *hc == h);
            if !cached {
                let half = h * T::lit(0.5);
                let m = Mat::from_fn(n, n, |i, j| {
                    let id = if i == j { T::one() } else { T::zero() };
                    id - half * a[(i, j)]
                });
                self.precond = Some((h, Lu::factor(&m)?));
            }
        }
        let precond = match (&self.precond, f.stiff_linear_part()) {
            (Some((_, lu)), Some(_)) => Some(lu),
            _ => None,
        };

        // explicit Euler predictor
        f.eval(x, &mut ws.fx);
        let mut y: Vec<T> = x.iter().zip(&ws.fx).map(|(a, b)| *a + h * *b).collect();
        let mut best = (T::infinity(), y.clone());

        let mut first = T::nan();
        for _ in 0..self.cfg.max_iter {
            residual(f, x, &y, h, &mut ws);
            let rn = max_abs(&ws.res);
            if !rn.is_finite() {
                break;
            }
            if rn < best.0 {
                best = (rn, y.clone());
            }
            if rn < tol {
                return Ok(y);
            }
            if first.is_nan() {
                first = rn;
            } else if rn > first * T::lit(1e6) {
                break;
            }
            match precond {
                Some(lu) => {
                    let d = lu.solve(&ws.res)?;
                    for (yi, di) in y.iter_mut().zip(&d) {
                        *yi -= *di;
                    }
                }
                None => {
                    for (yi, ri) in y.iter_mut().zip(&ws.res) {
                        *yi -= *ri;
                    }
                }
            }
        }

        let (mut rbest, mut y) = best;
        if !rbest.is_finite() {
            y = x.to_vec();
            residual(f, x, &y, h, &mut ws);
            rbest = max_abs(&ws.res);
        }
        newton(f, x, y, h, tol, rbest, self.cfg.max_iter, &mut ws)
    }
}

struct Workspace<T> {
    fx: Vec<T>,
    mid: Vec<T>,
    res: Vec<T>,
}

impl<T: Scalar> Workspace<T> {
    fn new(n: usize) -> Self {
        Self {
            fx: vec![T::zero(); n],
            mid: vec![T::zero(); n],
            res: vec![T::zero(); n],
        }
    }
}

/// Fills `ws.res = y − x − h f((x+y)/2)`.
fn residual<T: Scalar, F: VectorField<T> + ?Sized>(
    f: &F,
    x: &[T],
    y: &[T],
    h: T,
    ws: &mut Workspace<T>,
) {
    let half = T::lit(0.5);
    for ((m, a), b) in ws.mid.iter_mut().zip(x).zip(y) {
        *m = (*a + *b) * half;
    }
    f.eval(&ws.mid, &mut ws.fx);
    for (((r, yi), xi), fi) in ws.res.iter_mut().zip(y).zip(x).zip(&ws.fx) {
        *r = *yi - *xi - h * *fi;
    }
}

#[allow(clippy::too_many_arguments)]
fn newton<T: Scalar, F: VectorField<T> + ?Sized>(
    f: &F,
    x: &[T],
    mut y: Vec<T>,
    h: T,
    tol: T,
    mut rnorm: T,
    max_iter: usize,
    ws: &mut Workspace<T>,
) -> Result<Vec<T>, IntegrateError> {
    let n = y.len();
    let half = T::lit(0.5);
    let mut fp = vec![T::zero(); n];
    let mut fm = vec![T::zero(); n];
    for _ in 0..max_iter {
        residual(f, x, &y, h, ws);
        rnorm = max_abs(&ws.res);
        if rnorm < tol {
            return Ok(y);
        }
        let r = ws.res.clone();
        // Jacobian of the residual: I − h/2 · Df(mid), Df by central differences
        let mid = ws.mid.clone();
        let mut jac = Mat::identity(n);
        let mut probe = mid.clone();
        for j in 0..n {
            let eps = T::epsilon().cbrt() * mid[j].abs().max(T::one());
            probe[j] = mid[j] + eps;
            f.eval(&probe, &mut fp);
            probe[j] = mid[j] - eps;
            f.eval(&probe, &mut fm);
            probe[j] = mid[j];
            for i in 0..n {
                jac[(i, j)] -= h * half * (fp[i] - fm[i]) / (eps + eps);
            }
        }
        let delta = match Lu::factor(&jac) {
            Ok(lu) => lu.solve(&r)?,
            Err(_) => break,
        };
        let mut lambda = T::one();
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<T> = y.iter().zip(&delta).map(|(a, d)| *a - lambda * *d).collect();
            residual(f, x, &trial, h, ws);
            let tn = max_abs(&ws.res);
            if tn.is_finite() && tn < rnorm {
                y = trial;
                accepted = true;
                break;
            }
            lambda *= half;
        }
        if !accepted {
            break;
        }
    }
    residual(f, x, &y, h, ws);
    let final_norm = max_abs(&ws.res);
    if final_norm < tol {
        return Ok(y);
    }
    Err(IntegrateError::NoConvergence {
        residual: final_norm.min(rnorm).to_f64_lossy(),
    })
}

/// One implicit-midpoint step with a fresh solver.
pub fn midpoint_step<T: Scalar, F: VectorField<T> + ?Sized>(
    f: &F,
    x: &[T],
    h: T,
    cfg: &SolverConfig<T>,
) -> Result<Vec<T>, IntegrateError> {
    MidpointSolver::new(cfg.clone())?.step(f, x, h)
}

/// Integrates from `x0` at `t_grid[0]` over a uniform grid. Each grid interval
/// is split into `⌈Δt / max_step⌉` midpoint substeps; derivatives are the
/// exact field values at the stored states.
pub fn integrate_trajectory<T: Scalar, F: VectorField<T> + ?Sized>(
    f: &F,
    x0: &[T],
    t_grid: &[T],
    cfg: &SolverConfig<T>,
) -> Result<Trajectory<T>, IntegrateError> {
    let states = integrate_states(f, x0, t_grid, cfg)?;
    let derivs = states
        .iter()
        .map(|s| {
            let mut d = vec![T::zero(); s.len()];
            f.eval(s, &mut d);
            d
        })
        .collect();
    Trajectory::new(t_grid.to_vec(), states, Some(derivs), "")
}

/// Like [`integrate_trajectory`] without the derivative pass.
pub fn integrate_states<T: Scalar, F: VectorField<T> + ?Sized>(
    f: &F,
    x0: &[T],
    t_grid: &[T],
    cfg: &SolverConfig<T>,
) -> Result<Vec<Vec<T>>, IntegrateError> {
    let spacing = uniform_spacing(t_grid)?;
    if x0.len() != f.dim() {
        return Err(IntegrateError::DimensionMismatch {
            expected: f.dim(),
            got: x0.len(),
        });
    }
    let substeps = match cfg.max_step {
        Some(hmax) if spacing > hmax => (spacing / hmax).ceil().to_usize().unwrap_or(1).max(1),
        _ => 1,
    };
    let h = spacing / T::from_usize_lossy(substeps);
    let mut solver = MidpointSolver::new(cfg.clone())?;
    let mut states = Vec::with_capacity(t_grid.len());
    states.push(x0.to_vec());
    let mut x = x0.to_vec();
    for k in 1..t_grid.len() {
        for _ in 0..substeps {
            x = solver.step(f, &x, h).map_err(|e| IntegrateError::AtStep {
                step: k,
                source: Box::new(e),
            })?;
        }
        states.push(x.clone());
    }
    Ok(states)
}

/// Five-point stencil estimate of `dx/dt` at every sample: central
/// `(−x_{k+2} + 8x_{k+1} − 8x_{k−1} + x_{k−2}) / 12h` inside, one-sided
/// fourth-order formulas at the two samples nearest each end.
pub fn stencil_derivatives<T: Scalar>(traj: &Trajectory<T>) -> Result<Vec<Vec<T>>, IntegrateError> {
    let n = traj.len();
    if n < 5 {
        return Err(IntegrateError::TooFewSamples(n));
    }
    let h = uniform_spacing(&traj.times)?;
    let x = &traj.states;
    let dim = traj.dim();
    let denom = T::lit(12.0) * h;
    let combo = |idx: [usize; 5], w: [f64; 5]| -> Vec<T> {
        (0..dim)
            .map(|c| {
                idx.iter()
                    .zip(w)
                    .map(|(&k, wk)| T::lit(wk) * x[k][c])
                    .sum::<T>()
                    / denom
            })
            .collect()
    };
    let mut out = Vec::with_capacity(n);
    out.push(combo([0, 1, 2, 3, 4], [-25.0, 48.0, -36.0, 16.0, -3.0]));
    out.push(combo([0, 1, 2, 3, 4], [-3.0, -10.0, 18.0, -6.0, 1.0]));
    for k in 2..n - 2 {
        out.push(combo([k - 2, k - 1, k, k + 1, k + 2], [1.0, -8.0, 0.0, 8.0, -1.0]));
    }
    let b = n - 5;
    out.push(combo([b, b + 1, b + 2, b + 3, b + 4], [-1.0, 6.0, -18.0, 10.0, 3.0]));
    out.push(combo([b, b + 1, b + 2, b + 3, b + 4], [3.0, -16.0, 36.0, -48.0, 25.0]));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamsys::CanonicalSystem;
    use approx::assert_relative_eq;

    struct Linear(Mat<f64>);
    impl VectorField<f64> for Linear {
        fn dim(&self) -> usize {
            self.0.rows()
        }
        fn eval(&self, x: &[f64], out: &mut [f64]) {
            out.copy_from_slice(&self.0.matvec(x).unwrap());
        }
    }

    struct Zero;
    impl VectorField<f64> for Zero {
        fn dim(&self) -> usize {
            3
        }
        fn eval(&self, _: &[f64], out: &mut [f64]) {
            out.fill(0.0);
        }
    }

    #[test]
    fn rotation_step_matches_cayley() {
        let f = Linear(crate::hamsys::symplectic_form(1).unwrap());
        let x = midpoint_step(&f, &[1.0, 0.0], 0.2, &SolverConfig::default()).unwrap();
        assert!((x[0] - 0.99 / 1.01).abs() < 1e-12);
        assert!((x[1] + 0.2 / 1.01).abs() < 1e-12);
    }

    #[test]
    fn zero_field_is_fixed() {
        let x = [1.0, -2.0, 3.5];
        assert_eq!(midpoint_step(&Zero, &x, 0.3, &SolverConfig::default()).unwrap(), x);
    }

    #[test]
    fn pendulum_single_step_energy() {
        let sys = CanonicalSystem::<f64>::pendulum();
        let x = [1.0, 0.0];
        let y = midpoint_step(&sys, &x, 0.01, &SolverConfig::default()).unwrap();
        let dh = sys.eval_hamiltonian(&y).unwrap() - sys.eval_hamiltonian(&x).unwrap();
        assert!(dh.abs() < 1e-8);
    }

    #[test]
    fn stiff_preconditioner_path_converges() {
        let sys = crate::hamsys::build_nls_system::<f64>(
            32,
            (-10.0, 10.0),
            crate::hamsys::Boundary::Periodic,
        )
        .unwrap();
        let grid = sys.params().grid.clone().unwrap();
        let x0 = crate::hamsys::nls_initial_state(&grid);
        let y = midpoint_step(&sys, &x0, 0.05, &SolverConfig::default()).unwrap();
        // plain fixed point diverges at this step, newton fallback is slow but agrees
        struct NoPrecond<'a>(&'a CanonicalSystem<f64>);
        impl VectorField<f64> for NoPrecond<'_> {
            fn dim(&self) -> usize {
                self.0.dim()
            }
            fn eval(&self, x: &[f64], out: &mut [f64]) {
                self.0.eval(x, out)
            }
        }
        let z = midpoint_step(&NoPrecond(&sys), &x0, 0.05, &SolverConfig::default()).unwrap();
        for (a, b) in y.iter().zip(&z) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn single_point_grid() {
        let sys = CanonicalSystem::<f64>::pendulum();
        let t = integrate_trajectory(&sys, &[0.5, 0.1], &[0.0], &SolverConfig::default()).unwrap();
        assert_eq!(t.states, vec![vec![0.5, 0.1]]);
    }

    #[test]
    fn non_uniform_grid_rejected() {
        let sys = CanonicalSystem::<f64>::pendulum();
        let err = integrate_trajectory(&sys, &[0.5, 0.1], &[0.0, 0.1, 0.3], &SolverConfig::default());
        assert_eq!(err.unwrap_err(), IntegrateError::NonUniformGrid);
    }

    fn traj_of(f: impl Fn(f64) -> f64, t: Vec<f64>) -> Trajectory<f64> {
        let states = t.iter().map(|&s| vec![f(s)]).collect();
        Trajectory::new(t, states, None, "").unwrap()
    }

    #[test]
    fn stencil_is_exact_on_polynomials() {
        let lin = stencil_derivatives(&traj_of(|t| t, linspace(0.0, 1.0, 9))).unwrap();
        assert!(lin.iter().all(|d| (d[0] - 1.0).abs() < 1e-12));
        let t = linspace(-0.3, 0.3, 7);
        let sq = stencil_derivatives(&traj_of(|t| t * t, t)).unwrap();
        assert!(sq[3][0].abs() < 1e-14);
        let t = linspace(0.6, 1.4, 9);
        let quart = stencil_derivatives(&traj_of(|t| t.powi(4), t.clone())).unwrap();
        assert_relative_eq!(quart[4][0], 4.0, epsilon = 1e-10);
        for (k, d) in quart.iter().enumerate() {
            assert_relative_eq!(d[0], 4.0 * t[k].powi(3), epsilon = 1e-9);
        }
    }

    #[test]
    fn stencil_needs_five_points() {
        let t = traj_of(|t| t, linspace(0.0, 1.0, 4));
        assert_eq!(stencil_derivatives(&t), Err(IntegrateError::TooFewSamples(4)));
    }

    #[test]
    fn substeps_split_long_intervals() {
        let f = Linear(crate::hamsys::symplectic_form(1).unwrap());
        let grid = linspace(0.0, 1.0, 3);
        let coarse = SolverConfig::default();
        let fine = SolverConfig {
            max_step: Some(0.1),
            ..SolverConfig::default()
        };
        let a = integrate_states(&f, &[1.0, 0.0], &grid, &coarse).unwrap();
        let b = integrate_states(&f, &[1.0, 0.0], &grid, &fine).unwrap();
        // fine run is closer to the exact rotation
        let exact = [1.0f64.cos(), -1.0f64.sin()];
        let ea = (a[2][0] - exact[0]).abs() + (a[2][1] - exact[1]).abs();
        let eb = (b[2][0] - exact[0]).abs() + (b[2][1] - exact[1]).abs();
        assert!(eb < ea / 10.0);
    }
}
