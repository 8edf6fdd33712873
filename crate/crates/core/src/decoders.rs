//! Full-field reconstruction from reduced coordinates: the linear POD lift
//! and a quadratic manifold `x̂ = Vy + H(y⊗y)`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diffkit::{lr_schedule, Adam, DiffError};
use crate::linalg::Mat;
use crate::pod::{PodBasis, PodError};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecoderError {
    #[error("no training pairs")]
    Empty,
    #[error("{what}: expected dimension {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("non-finite loss at epoch {epoch}")]
    NonFinite { epoch: usize },
    #[error("invalid fit config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Pod(#[from] PodError),
    #[error(transparent)]
    Diff(#[from] DiffError),
}

/// `x̂ = Vy + H(y⊗y)` with the full Kronecker square.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadDecoder<T> {
    /// `N × d`.
    pub v: Mat<T>,
    /// `N × d²`; column `a·d + b` multiplies `y_a y_b`.
    pub h: Mat<T>,
    pub d: usize,
}

impl<T: Scalar> QuadDecoder<T> {
    pub fn zeros(full_dim: usize, d: usize) -> Self {
        Self {
            v: Mat::zeros(full_dim, d),
            h: Mat::zeros(full_dim, d * d),
            d,
        }
    }

    pub fn full_dim(&self) -> usize {
        self.v.rows()
    }
}

fn kron_square<T: Scalar>(y: &[T]) -> Vec<T> {
    y.iter().flat_map(|a| y.iter().map(move |b| *a * *b)).collect()
}

pub fn quad_reconstruct<T: Scalar>(dec: &QuadDecoder<T>, y: &[T]) -> Result<Vec<T>, DecoderError> {
    if y.len() != dec.d {
        return Err(DecoderError::DimensionMismatch {
            what: "reduced coordinates",
            expected: dec.d,
            got: y.len(),
        });
    }
    let lin = dec.v.matvec(y).expect("checked dimension");
    let quad = dec.h.matvec(&kron_square(y)).expect("checked dimension");
    Ok(lin.iter().zip(&quad).map(|(a, b)| *a + *b).collect())
}

/// Linear decoder: the cotangent POD lift.
pub fn linear_reconstruct<T: Scalar>(basis: &PodBasis<T>, y: &[T]) -> Result<Vec<T>, DecoderError> {
    Ok(basis.lift(y)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoderFitConfig<T> {
    pub epochs: usize,
    pub base_lr: T,
    pub lr_gamma: T,
    pub lr_step_epochs: usize,
    pub weight_decay: T,
    pub batch_size: usize,
    pub seed: u64,
}

impl<T: Scalar> Default for DecoderFitConfig<T> {
    fn default() -> Self {
        Self {
            epochs: 600,
            base_lr: T::lit(1e-3),
            lr_gamma: T::lit(0.1),
            lr_step_epochs: 250,
            weight_decay: T::lit(1e-5),
            batch_size: 32,
            seed: 0,
        }
    }
}

impl<T: Scalar> DecoderFitConfig<T> {
    fn validate(&self) -> Result<(), DecoderError> {
        if self.epochs == 0 || self.batch_size == 0 || self.lr_step_epochs == 0 {
            return Err(DecoderError::BadConfig(
                "epochs, batch_size and lr_step_epochs must be at least 1".into(),
            ));
        }
        if !(self.base_lr > T::zero() && self.lr_gamma > T::zero() && self.weight_decay >= T::zero())
        {
            return Err(DecoderError::BadConfig(
                "learning rate and decay must be positive, weight decay non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Per-sample objective `½·mean(e²) + ½·mean(|e|)` with `e = x − x̂`, averaged
/// over the given pairs.
pub fn decoder_loss<T: Scalar>(
    dec: &QuadDecoder<T>,
    ys: &[Vec<T>],
    xs: &[Vec<T>],
) -> Result<T, DecoderError> {
    if ys.is_empty() {
        return Err(DecoderError::Empty);
    }
    let half = T::lit(0.5);
    let mut acc = T::zero();
    for (y, x) in ys.iter().zip(xs) {
        let xr = quad_reconstruct(dec, y)?;
        let n = T::from_usize_lossy(x.len());
        let (sq, ab) = x.iter().zip(&xr).fold((T::zero(), T::zero()), |(s, a), (u, v)| {
            let e = *u - *v;
            (s + e * e, a + e.abs())
        });
        acc += half * (sq + ab) / n;
    }
    Ok(acc / T::from_usize_lossy(ys.len()))
}

/// Loss and gradient over `idx`; gradient laid out as `V` then `H`, row-major.
fn batch_grad<T: Scalar>(
    dec: &QuadDecoder<T>,
    ys: &[Vec<T>],
    xs: &[Vec<T>],
    idx: &[usize],
    grad: &mut [T],
) -> T {
    grad.iter_mut().for_each(|g| *g = T::zero());
    let (full, d) = (dec.full_dim(), dec.d);
    let nv = full * d;
    let half = T::lit(0.5);
    let scale = T::one() / (T::from_usize_lossy(full) * T::from_usize_lossy(idx.len()));
    let mut loss = T::zero();
    for &k in idx {
        let y = &ys[k];
        let yy = kron_square(y);
        let xr = quad_reconstruct(dec, y).expect("validated dimensions");
        for i in 0..full {
            let e = xs[k][i] - xr[i];
            loss += half * (e * e + e.abs()) * scale;
            let sign = if e > T::zero() {
                T::one()
            } else if e < T::zero() {
                -T::one()
            } else {
                T::zero()
            };
            // ∂loss/∂x̂_i
            let g = -(e + half * sign) * scale;
            if g == T::zero() {
                continue;
            }
            for (a, ya) in y.iter().enumerate() {
                grad[i * d + a] += g * *ya;
            }
            let row = &mut grad[nv + i * d * d..nv + (i + 1) * d * d];
            for (r, v) in row.iter_mut().zip(&yy) {
                *r += g * *v;
            }
        }
    }
    loss
}

/// Fits `V, H` from zero with Adam on mini-batches; returns the decoder and
/// the per-epoch mean loss.
pub fn fit_quad_decoder<T: Scalar>(
    ys: &[Vec<T>],
    xs: &[Vec<T>],
    cfg: &DecoderFitConfig<T>,
) -> Result<(QuadDecoder<T>, Vec<T>), DecoderError> {
    cfg.validate()?;
    if ys.is_empty() || xs.is_empty() {
        return Err(DecoderError::Empty);
    }
    if ys.len() != xs.len() {
        return Err(DecoderError::DimensionMismatch {
            what: "pair count",
            expected: ys.len(),
            got: xs.len(),
        });
    }
    let d = ys[0].len();
    let full = xs[0].len();
    for (y, x) in ys.iter().zip(xs) {
        if y.len() != d {
            return Err(DecoderError::DimensionMismatch {
                what: "reduced coordinates",
                expected: d,
                got: y.len(),
            });
        }
        if x.len() != full {
            return Err(DecoderError::DimensionMismatch {
                what: "full state",
                expected: full,
                got: x.len(),
            });
        }
    }
    let needed = d * (d + 1) / 2 + d;
    if ys.len() < needed {
        log::warn!(
            "{} training pairs for a quadratic decoder needing at least {} to be identifiable",
            ys.len(),
            needed
        );
    }
    let mut dec = QuadDecoder::zeros(full, d);
    let nv = full * d;
    let total = nv + full * d * d;
    let mut params = vec![T::zero(); total];
    let mut grad = vec![T::zero(); total];
    let decay = vec![cfg.weight_decay; total];
    let mut opt = Adam::new(total);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..ys.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let lr = lr_schedule(epoch, cfg.base_lr, cfg.lr_gamma, cfg.lr_step_epochs);
        let mut acc = T::zero();
        for idx in order.chunks(cfg.batch_size) {
            let loss = batch_grad(&dec, ys, xs, idx, &mut grad);
            if !loss.is_finite() {
                return Err(DecoderError::NonFinite { epoch });
            }
            acc += loss * T::from_usize_lossy(idx.len());
            opt.step(&mut params, &grad, lr, &decay)?;
            dec = unflatten(&params, full, d);
        }
        history.push(acc / T::from_usize_lossy(ys.len()));
    }
    Ok((dec, history))
}

fn unflatten<T: Scalar>(params: &[T], full: usize, d: usize) -> QuadDecoder<T> {
    let nv = full * d;
    QuadDecoder {
        v: Mat::from_row_major(full, d, params[..nv].to_vec()).expect("sized"),
        h: Mat::from_row_major(full, d * d, params[nv..].to_vec()).expect("sized"),
        d,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reconstruct_basics() {
        let mut dec = QuadDecoder::<f64>::zeros(3, 2);
        assert_eq!(quad_reconstruct(&dec, &[0.0, 0.0]).unwrap(), vec![0.0; 3]);
        dec.v = Mat::from_fn(3, 2, |i, j| (i + 2 * j) as f64);
        dec.h = Mat::from_fn(3, 4, |i, j| (i * 4 + j) as f64 * 0.1);
        // e_1 → column 1 of V plus column (1,1) = 3 of H
        let r = quad_reconstruct(&dec, &[0.0, 1.0]).unwrap();
        for i in 0..3 {
            assert!((r[i] - (dec.v[(i, 1)] + dec.h[(i, 3)])).abs() < 1e-15);
        }
        assert!(quad_reconstruct(&dec, &[1.0]).is_err());
    }

    #[test]
    fn homogeneity() {
        let mut dec = QuadDecoder::<f64>::zeros(2, 2);
        dec.v = Mat::from_fn(2, 2, |i, j| 1.0 + i as f64 - j as f64);
        dec.h = Mat::from_fn(2, 4, |i, j| 0.3 * (i + j) as f64 - 0.5);
        let y = [0.7, -1.3];
        let t = 2.5;
        let lin = dec.v.matvec(&y).unwrap();
        let quad = dec.h.matvec(&kron_square(&y)).unwrap();
        let scaled = quad_reconstruct(&dec, &[t * y[0], t * y[1]]).unwrap();
        for i in 0..2 {
            assert!((scaled[i] - (t * lin[i] + t * t * quad[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn analytic_gradient_matches_differences() {
        let ys = vec![vec![0.3, -0.8], vec![1.1, 0.4], vec![-0.5, 0.9]];
        let xs = vec![vec![1.0, 0.2, -0.4], vec![0.5, -1.5, 0.3], vec![0.0, 0.7, 1.2]];
        let params: Vec<f64> = (0..18).map(|k| ((k * 37 % 11) as f64 - 5.0) * 0.07).collect();
        let dec = unflatten(&params, 3, 2);
        let idx = [0, 1, 2];
        let mut g = vec![0.0; 18];
        batch_grad(&dec, &ys, &xs, &idx, &mut g);
        for k in 0..18 {
            let h = 1e-6;
            let mut p = params.clone();
            p[k] += h;
            let up = decoder_loss(&unflatten(&p, 3, 2), &ys, &xs).unwrap();
            p[k] -= 2.0 * h;
            let dn = decoder_loss(&unflatten(&p, 3, 2), &ys, &xs).unwrap();
            assert!((g[k] - (up - dn) / (2.0 * h)).abs() < 1e-7, "coordinate {k}");
        }
    }

    #[test]
    fn zero_targets_stay_zero() {
        let ys = vec![vec![1.0, 2.0]; 4];
        let xs = vec![vec![0.0; 3]; 4];
        let cfg = DecoderFitConfig {
            epochs: 5,
            ..DecoderFitConfig::default()
        };
        let (dec, hist) = fit_quad_decoder(&ys, &xs, &cfg).unwrap();
        assert_eq!(dec.v.max_abs(), 0.0);
        assert_eq!(dec.h.max_abs(), 0.0);
        assert_eq!(hist.last().copied(), Some(0.0));
    }
}
