//! Trajectory error metrics and per-initial-condition benchmark reports.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrate::{SolverConfig, Trajectory};
use crate::scalar::Scalar;
use crate::training::{latent_rollout, EmbeddingModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("time grids differ ({gt} vs {pred} samples or mismatched times)")]
    GridMismatch { gt: usize, pred: usize },
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("ground truth has zero norm")]
    ZeroNorm,
    #[error("no test ICs")]
    NoTestIcs,
    #[error("no snapshots")]
    Empty,
}

/// Relative tolerance when comparing time stamps of two grids.
const GRID_TOL: f64 = 1e-9;

fn check_series<T: Scalar>(gt: &[Vec<T>], pred: &[Vec<T>]) -> Result<(), EvalError> {
    if gt.is_empty() {
        return Err(EvalError::Empty);
    }
    if gt.len() != pred.len() {
        return Err(EvalError::ShapeMismatch {
            expected: gt.len(),
            got: pred.len(),
        });
    }
    let dim = gt[0].len();
    for (a, b) in gt.iter().zip(pred) {
        if a.len() != dim || b.len() != dim {
            return Err(EvalError::ShapeMismatch {
                expected: dim,
                got: if a.len() != dim { a.len() } else { b.len() },
            });
        }
    }
    Ok(())
}

fn sq_dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(u, v)| (*u - *v) * (*u - *v)).sum()
}

/// `(1/(𝒩·m)) Σᵢ ‖x_gt(tᵢ) − x_pred(tᵢ)‖²` over `𝒩` times and `m` components.
pub fn traj_error<T: Scalar>(gt: &Trajectory<T>, pred: &Trajectory<T>) -> Result<T, EvalError> {
    let mismatch = EvalError::GridMismatch {
        gt: gt.len(),
        pred: pred.len(),
    };
    if gt.len() != pred.len() {
        return Err(mismatch);
    }
    let scale = gt
        .times
        .iter()
        .fold(T::one(), |acc, t| acc.max(t.abs()));
    if gt
        .times
        .iter()
        .zip(&pred.times)
        .any(|(a, b)| (*a - *b).abs() > T::lit(GRID_TOL) * scale)
    {
        return Err(mismatch);
    }
    check_series(&gt.states, &pred.states)?;
    let total: T = gt.states.iter().zip(&pred.states).map(|(a, b)| sq_dist(a, b)).sum();
    Ok(total / T::from_usize_lossy(gt.len() * gt.dim()))
}

/// `‖pred − gt‖_F / ‖gt‖_F` over the whole series.
pub fn relative_l2<T: Scalar>(gt: &[Vec<T>], pred: &[Vec<T>]) -> Result<T, EvalError> {
    check_series(gt, pred)?;
    let den: T = gt.iter().flatten().map(|v| *v * *v).sum();
    if den == T::zero() {
        return Err(EvalError::ZeroNorm);
    }
    let num: T = gt.iter().zip(pred).map(|(a, b)| sq_dist(a, b)).sum();
    Ok((num / den).sqrt())
}

/// Mean over snapshots of `‖x̂ − x‖₂`.
pub fn mean_l2<T: Scalar>(gt: &[Vec<T>], pred: &[Vec<T>]) -> Result<T, EvalError> {
    check_series(gt, pred)?;
    let sum: T = gt.iter().zip(pred).map(|(a, b)| sq_dist(a, b).sqrt()).sum();
    Ok(sum / T::from_usize_lossy(gt.len()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    TrajError,
    RelativeL2,
    MeanL2,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::TrajError => "traj-error",
            Metric::RelativeL2 => "relative-l2",
            Metric::MeanL2 => "mean-l2",
        }
    }

    pub fn compute<T: Scalar>(self, gt: &Trajectory<T>, pred: &Trajectory<T>) -> Result<T, EvalError> {
        match self {
            Metric::TrajError => traj_error(gt, pred),
            Metric::RelativeL2 => relative_l2(&gt.states, &pred.states),
            Metric::MeanL2 => mean_l2(&gt.states, &pred.states),
        }
    }
}

/// Median of the finite entries; `None` when there are none.
pub fn median<T: Scalar>(values: &[T]) -> Option<T> {
    let mut v: Vec<T> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let k = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[k]
    } else {
        (v[k - 1] + v[k]) * T::lit(0.5)
    })
}

/// Per-IC errors of one model under one metric. Failed rollouts carry `+∞`
/// and are left out of the summary statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorReport<T> {
    pub metric: Metric,
    pub variant: String,
    pub ic_ids: Vec<String>,
    pub values: Vec<T>,
    pub median: Option<T>,
    pub min: Option<T>,
    pub max: Option<T>,
    pub failed: usize,
    /// Index of the lowest finite error.
    pub best_ic: Option<usize>,
    /// Index of the highest finite error.
    pub worst_ic: Option<usize>,
}

impl<T: Scalar> ErrorReport<T> {
    pub fn from_values(metric: Metric, variant: impl Into<String>, ic_ids: Vec<String>, values: Vec<T>) -> Self {
        let finite: Vec<(usize, T)> = values
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .collect();
        let cmp = |a: &&(usize, T), b: &&(usize, T)| a.1.partial_cmp(&b.1).expect("finite");
        let best = finite.iter().min_by(cmp).copied();
        let worst = finite.iter().max_by(cmp).copied();
        Self {
            metric,
            variant: variant.into(),
            median: median(&values),
            min: best.map(|b| b.1),
            max: worst.map(|w| w.1),
            failed: values.len() - finite.len(),
            best_ic: best.map(|b| b.0),
            worst_ic: worst.map(|w| w.0),
            ic_ids,
            values,
        }
    }

    /// One CSV row per IC: `variant,metric,ic,error`.
    pub fn csv_rows(&self) -> String {
        let mut out = String::new();
        for (id, v) in self.ic_ids.iter().zip(&self.values) {
            let _ = writeln!(out, "{},{},{},{:.16e}", self.variant, self.metric.as_str(), id, v.to_f64_lossy());
        }
        out
    }
}

pub const CSV_HEADER: &str = "variant,metric,ic,error";

fn fmt_opt<T: Scalar>(v: Option<T>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{:.4e}", x.to_f64_lossy()))
}

/// Plain-text comparison table, one line per report.
pub fn summary_table<T: Scalar>(reports: &[ErrorReport<T>]) -> String {
    let mut out = format!(
        "{:<16} {:<12} {:>12} {:>12} {:>12} {:>7} {:>6} {:>6}\n",
        "variant", "metric", "median", "min", "max", "failed", "best", "worst"
    );
    for r in reports {
        let _ = writeln!(
            out,
            "{:<16} {:<12} {:>12} {:>12} {:>12} {:>7} {:>6} {:>6}",
            r.variant,
            r.metric.as_str(),
            fmt_opt(r.median),
            fmt_opt(r.min),
            fmt_opt(r.max),
            r.failed,
            r.best_ic.map_or("-".into(), |i| i.to_string()),
            r.worst_ic.map_or("-".into(), |i| i.to_string()),
        );
    }
    out
}

/// Anything that predicts a trajectory on the grid of a ground-truth one,
/// starting from its first state.
pub trait Predictor<T: Scalar> {
    fn label(&self) -> String;

    fn predict(&self, gt: &Trajectory<T>) -> Result<Trajectory<T>, String>;
}

/// Rolls a trained embedding model out in latent space and decodes.
pub struct EmbeddingPredictor<'a, T: Scalar> {
    pub model: &'a EmbeddingModel<T>,
    pub solver: SolverConfig<T>,
}

impl<T: Scalar> Predictor<T> for EmbeddingPredictor<'_, T> {
    fn label(&self) -> String {
        self.model.variant.to_string()
    }

    fn predict(&self, gt: &Trajectory<T>) -> Result<Trajectory<T>, String> {
        latent_rollout(self.model, &gt.states[0], &gt.times, &self.solver)
            .map(|r| r.decoded)
            .map_err(|e| e.to_string())
    }
}

/// Wraps a closure as a named predictor.
pub struct FnPredictor<F> {
    pub name: String,
    pub f: F,
}

impl<T: Scalar, F: Fn(&Trajectory<T>) -> Result<Trajectory<T>, String>> Predictor<T> for FnPredictor<F> {
    fn label(&self) -> String {
        self.name.clone()
    }

    fn predict(&self, gt: &Trajectory<T>) -> Result<Trajectory<T>, String> {
        (self.f)(gt)
    }
}

/// Evaluates every predictor on every test trajectory under each metric.
/// A failed prediction or a non-finite error is recorded as `+∞`.
pub fn benchmark_suite<T: Scalar>(
    test: &[Trajectory<T>],
    predictors: &[&dyn Predictor<T>],
    metrics: &[Metric],
) -> Result<Vec<ErrorReport<T>>, EvalError> {
    if test.is_empty() {
        return Err(EvalError::NoTestIcs);
    }
    let ids: Vec<String> = test
        .iter()
        .enumerate()
        .map(|(k, t)| if t.ic_id.is_empty() { k.to_string() } else { t.ic_id.clone() })
        .collect();
    let mut reports = Vec::new();
    for p in predictors {
        let preds: Vec<Option<Trajectory<T>>> = test
            .iter()
            .map(|gt| match p.predict(gt) {
                Ok(t) => Some(t),
                Err(e) => {
                    log::warn!("{} failed on IC {}: {e}", p.label(), gt.ic_id);
                    None
                }
            })
            .collect();
        for &metric in metrics {
            let mut values = Vec::with_capacity(test.len());
            for (gt, pred) in test.iter().zip(&preds) {
                let v = match pred {
                    Some(pred) => match metric.compute(gt, pred) {
                        Ok(v) => v,
                        Err(e @ (EvalError::ShapeMismatch { .. } | EvalError::GridMismatch { .. })) => {
                            return Err(e)
                        }
                        Err(_) => T::infinity(),
                    },
                    None => T::infinity(),
                };
                values.push(if v.is_finite() { v } else { T::infinity() });
            }
            reports.push(ErrorReport::from_values(metric, p.label(), ids.clone(), values));
        }
    }
    Ok(reports)
}
