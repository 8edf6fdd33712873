//! Symplectic autoencoder losses, the training loop and latent rollouts.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diffkit::{
    lr_schedule, mlp_forward, mlp_forward_jacobian, Adam, DiffError, MlpSpec, ParamVector, Real,
    Tape,
};
use crate::integrate::{integrate_states, IntegrateError, SolverConfig, Trajectory};
use crate::latentham::{CubicPoly, LatentError, LatentHamiltonian, SosHamiltonian, SosKind};
use crate::scalar::{all_finite, Scalar};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("empty batch or dataset")]
    Empty,
    #[error("sample {index} has no time derivative")]
    MissingDerivatives { index: usize },
    #[error("sample {index}: expected dimension {expected}, got {got}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("symplectic lifting needs m ≥ n, got m = {m}, n = {n}")]
    NotALifting { m: usize, n: usize },
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("non-finite gradient at epoch {epoch}, batch {batch}")]
    NonFiniteGradient { epoch: usize, batch: usize },
    #[error("invalid training config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error(transparent)]
    Latent(#[from] LatentError),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Quadratic sum-of-squares latent Hamiltonian (linear latent dynamics).
    #[serde(rename = "s-linear-embs")]
    SLinear,
    /// Unconstrained cubic latent Hamiltonian (quadratic latent dynamics).
    #[serde(rename = "quad-embs")]
    Quad,
    /// Quartic sum-of-squares latent Hamiltonian (cubic latent dynamics).
    #[serde(rename = "s-cubic-embs")]
    SCubic,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::SLinear, Variant::Quad, Variant::SCubic];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::SLinear => "s-linear-embs",
            Variant::Quad => "quad-embs",
            Variant::SCubic => "s-cubic-embs",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| format!("unknown variant '{s}' (expected s-linear-embs, quad-embs or s-cubic-embs)"))
    }
}

/// Encoder `2n → 2m`, decoder `2m → 2n` and a latent Hamiltonian.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingModel<T> {
    pub variant: Variant,
    pub n: usize,
    pub m: usize,
    pub encoder: MlpSpec,
    pub decoder: MlpSpec,
    pub enc_params: Vec<T>,
    pub dec_params: Vec<T>,
    pub latent: LatentHamiltonian<T>,
}

const ENCODER: &str = "encoder";
const DECODER: &str = "decoder";
const HAMILTONIAN: &str = "hamiltonian";

/// Spread of the random off-diagonal entries of freshly initialized latent
/// Hamiltonians.
const LATENT_JITTER: f64 = 0.1;

impl<T: Scalar> EmbeddingModel<T> {
    /// Fresh model; the decoder mirrors the encoder's hidden widths.
    pub fn init(
        variant: Variant,
        n: usize,
        m: usize,
        hidden: &[usize],
        rng: &mut ChaCha8Rng,
    ) -> Result<Self, TrainError> {
        if n == 0 || m == 0 {
            return Err(TrainError::BadConfig("n and m must be positive".into()));
        }
        let encoder = MlpSpec::new(2 * n, 2 * m, hidden.to_vec())?;
        let decoder = MlpSpec::new(2 * m, 2 * n, hidden.iter().rev().copied().collect())?;
        let enc_params = encoder.init(rng);
        let dec_params = decoder.init(rng);
        let latent = match variant {
            Variant::SLinear => LatentHamiltonian::Sos(SosHamiltonian::init(
                SosKind::Quadratic,
                m,
                LATENT_JITTER,
                rng,
            )),
            Variant::SCubic => LatentHamiltonian::Sos(SosHamiltonian::init(
                SosKind::Quartic,
                m,
                LATENT_JITTER,
                rng,
            )),
            Variant::Quad => LatentHamiltonian::Cubic(CubicPoly::init(m, LATENT_JITTER, rng)),
        };
        Ok(Self {
            variant,
            n,
            m,
            encoder,
            decoder,
            enc_params,
            dec_params,
            latent,
        })
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        self.encoder.validate()?;
        self.decoder.validate()?;
        let ok = self.encoder.in_dim == 2 * self.n
            && self.encoder.out_dim == 2 * self.m
            && self.decoder.in_dim == 2 * self.m
            && self.decoder.out_dim == 2 * self.n
            && self.latent.m() == self.m
            && self.enc_params.len() == self.encoder.param_count()
            && self.dec_params.len() == self.decoder.param_count();
        if !ok {
            return Err(TrainError::BadConfig(
                "encoder, decoder and latent dimensions are inconsistent".into(),
            ));
        }
        Ok(())
    }

    pub fn param_vector(&self) -> ParamVector<T> {
        ParamVector::pack(vec![
            (ENCODER, self.enc_params.clone()),
            (DECODER, self.dec_params.clone()),
            (HAMILTONIAN, self.latent.params().to_vec()),
        ])
        .expect("distinct segment names")
    }

    pub fn set_params(&mut self, flat: &[T]) {
        let (e, rest) = flat.split_at(self.enc_params.len());
        let (d, h) = rest.split_at(self.dec_params.len());
        self.enc_params.copy_from_slice(e);
        self.dec_params.copy_from_slice(d);
        self.latent.params_mut().copy_from_slice(h);
    }

    pub fn encode(&self, x: &[T]) -> Result<Vec<T>, TrainError> {
        Ok(mlp_forward(&self.encoder, &self.enc_params, x)?)
    }

    pub fn decode(&self, y: &[T]) -> Result<Vec<T>, TrainError> {
        Ok(mlp_forward(&self.decoder, &self.dec_params, y)?)
    }
}

/// Hyperparameters of one training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig<T> {
    /// Weights of the reconstruction, symplecticity and derivative losses.
    pub lambdas: [T; 3],
    pub epochs: usize,
    pub batch_size: usize,
    pub base_lr: T,
    pub lr_gamma: T,
    pub lr_step_epochs: usize,
    /// Decoupled weight decay on autoencoder weights.
    pub wd_a: T,
    /// Decoupled weight decay on latent Hamiltonian parameters.
    pub wd_h: T,
    /// L1 penalty weight on latent Hamiltonian parameters.
    pub l1_h: T,
    pub seed: u64,
}

impl<T: Scalar> Default for TrainingConfig<T> {
    fn default() -> Self {
        Self {
            lambdas: [T::lit(0.1), T::one(), T::one()],
            epochs: 4000,
            batch_size: 32,
            base_lr: T::lit(3e-3),
            lr_gamma: T::lit(0.1),
            lr_step_epochs: 1000,
            wd_a: T::lit(1e-5),
            wd_h: T::lit(1e-5),
            l1_h: T::lit(1e-4),
            seed: 0,
        }
    }
}

impl<T: Scalar> TrainingConfig<T> {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.lambdas.iter().any(|l| !(*l >= T::zero())) {
            return Err(TrainError::BadConfig("loss weights must be non-negative".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 || self.lr_step_epochs == 0 {
            return Err(TrainError::BadConfig(
                "epochs, batch_size and lr_step_epochs must be at least 1".into(),
            ));
        }
        if !(self.base_lr > T::zero()) || !(self.lr_gamma > T::zero()) {
            return Err(TrainError::BadConfig("learning rate and decay must be positive".into()));
        }
        if [self.wd_a, self.wd_h, self.l1_h].iter().any(|v| !(*v >= T::zero())) {
            return Err(TrainError::BadConfig("penalties must be non-negative".into()));
        }
        Ok(())
    }
}

/// State samples with their time derivatives.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingData<T> {
    pub states: Vec<Vec<T>>,
    pub derivs: Vec<Vec<T>>,
}

impl<T: Scalar> TrainingData<T> {
    pub fn from_trajectories(trajs: &[Trajectory<T>]) -> Result<Self, TrainError> {
        let mut data = Self::default();
        for (k, t) in trajs.iter().enumerate() {
            let d = t
                .derivs
                .as_ref()
                .ok_or(TrainError::MissingDerivatives { index: k })?;
            data.states.extend(t.states.iter().cloned());
            data.derivs.extend(d.iter().cloned());
        }
        Ok(data)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    fn check(&self, dim: usize) -> Result<(), TrainError> {
        if self.states.is_empty() {
            return Err(TrainError::Empty);
        }
        if self.derivs.len() != self.states.len() {
            return Err(TrainError::MissingDerivatives {
                index: self.derivs.len().min(self.states.len()),
            });
        }
        for (i, (x, d)) in self.states.iter().zip(&self.derivs).enumerate() {
            for v in [x, d] {
                if v.len() != dim {
                    return Err(TrainError::DimensionMismatch {
                        index: i,
                        expected: dim,
                        got: v.len(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Per-sample loss terms evaluated with explicit parameter values.
struct Terms<R> {
    encdec: R,
    symp: R,
    deri: R,
}

fn mean<T: Scalar, R: Real<T>>(xs: &[R]) -> R {
    R::sum(xs) * (T::one() / T::from_usize_lossy(xs.len()))
}

fn squares_mean<T: Scalar, R: Real<T>>(xs: &[R]) -> R {
    R::dot(xs, xs) * (T::one() / T::from_usize_lossy(xs.len()))
}

/// `(DᵀJ_{2m}D)_{ab}` for a row-major `2m × 2n` Jacobian.
fn symplectic_defect<T: Scalar, R: Real<T>>(jac: &[R], m: usize, n: usize) -> Vec<R> {
    let cols = 2 * n;
    let col = |a: usize, rows: std::ops::Range<usize>| -> Vec<R> {
        rows.map(|k| jac[k * cols + a]).collect()
    };
    let mut out = Vec::with_capacity(cols * cols);
    for a in 0..cols {
        let (qa, pa) = (col(a, 0..m), col(a, m..2 * m));
        for b in 0..cols {
            let (qb, pb) = (col(b, 0..m), col(b, m..2 * m));
            let v = R::dot(&qa, &pb) - R::dot(&pa, &qb);
            // J_{2n} entry
            let target = if b == a + n {
                T::one()
            } else if a == b + n {
                -T::one()
            } else {
                T::zero()
            };
            out.push(v - target);
        }
    }
    out
}

/// All loss terms for one sample, parameters given as `(encoder, decoder,
/// hamiltonian)` slices.
fn sample_terms<T: Scalar, R: Real<T>>(
    model: &EmbeddingModel<T>,
    theta: (&[R], &[R], &[R]),
    x: &[R],
    dx: &[R],
) -> Result<Terms<R>, TrainError> {
    let (pe, pd, ph) = theta;
    let (y, jac) = mlp_forward_jacobian(&model.encoder, pe, x)?;
    let xr = mlp_forward(&model.decoder, pd, &y)?;
    let err: Vec<R> = x.iter().zip(&xr).map(|(a, b)| *a - *b).collect();
    let encdec = squares_mean(&err);

    let (n, m) = (model.n, model.m);
    let symp = squares_mean(&symplectic_defect(&jac, m, n));

    let g = model.latent.grad_with(ph, &y);
    let deri_err: Vec<R> = (0..2 * m)
        .map(|i| {
            let jv = R::dot(&jac[i * 2 * n..(i + 1) * 2 * n], dx);
            // (J∇H)_i
            let f = if i < m { g[m + i] } else { -g[i - m] };
            jv - f
        })
        .collect();
    let deri = squares_mean(&deri_err);
    Ok(Terms {
        encdec,
        symp,
        deri,
    })
}

/// Batch means of the three losses.
fn batch_terms<T: Scalar, R: Real<T>>(
    model: &EmbeddingModel<T>,
    theta: (&[R], &[R], &[R]),
    xs: &[Vec<R>],
    dxs: &[Vec<R>],
) -> Result<Terms<R>, TrainError> {
    if xs.is_empty() {
        return Err(TrainError::Empty);
    }
    let mut e = Vec::with_capacity(xs.len());
    let mut s = Vec::with_capacity(xs.len());
    let mut d = Vec::with_capacity(xs.len());
    for (x, dx) in xs.iter().zip(dxs) {
        let t = sample_terms(model, theta, x, dx)?;
        e.push(t.encdec);
        s.push(t.symp);
        d.push(t.deri);
    }
    Ok(Terms {
        encdec: mean(&e),
        symp: mean(&s),
        deri: mean(&d),
    })
}

fn check_batch<T: Scalar>(model: &EmbeddingModel<T>, xs: &[Vec<T>]) -> Result<(), TrainError> {
    if xs.is_empty() {
        return Err(TrainError::Empty);
    }
    for (i, x) in xs.iter().enumerate() {
        if x.len() != 2 * model.n {
            return Err(TrainError::DimensionMismatch {
                index: i,
                expected: 2 * model.n,
                got: x.len(),
            });
        }
    }
    Ok(())
}

fn own_theta<T: Scalar>(model: &EmbeddingModel<T>) -> (&[T], &[T], &[T]) {
    (&model.enc_params, &model.dec_params, model.latent.params())
}

/// Mean squared reconstruction error `x − ψ(φ(x))`.
pub fn loss_encdec<T: Scalar>(model: &EmbeddingModel<T>, xs: &[Vec<T>]) -> Result<T, TrainError> {
    check_batch(model, xs)?;
    let mut acc = Vec::with_capacity(xs.len());
    for x in xs {
        let y = model.encode(x)?;
        let xr = model.decode(&y)?;
        let err: Vec<T> = x.iter().zip(&xr).map(|(a, b)| *a - *b).collect();
        acc.push(squares_mean(&err));
    }
    Ok(mean(&acc))
}

/// Mean squared entry of `Dφᵀ J_{2m} Dφ − J_{2n}`.
pub fn loss_symp<T: Scalar>(model: &EmbeddingModel<T>, xs: &[Vec<T>]) -> Result<T, TrainError> {
    if model.m < model.n {
        return Err(TrainError::NotALifting {
            m: model.m,
            n: model.n,
        });
    }
    check_batch(model, xs)?;
    let mut acc = Vec::with_capacity(xs.len());
    for x in xs {
        let jac = crate::diffkit::mlp_input_jacobian(&model.encoder, &model.enc_params, x)?;
        acc.push(squares_mean(&symplectic_defect(&jac, model.m, model.n)));
    }
    Ok(mean(&acc))
}

/// Mean squared mismatch `Dφ(x)·ẋ − J∇H(φ(x))`.
pub fn loss_deri<T: Scalar>(
    model: &EmbeddingModel<T>,
    xs: &[Vec<T>],
    dxs: &[Vec<T>],
) -> Result<T, TrainError> {
    check_batch(model, xs)?;
    check_derivs(model, xs, dxs)?;
    Ok(batch_terms(model, own_theta(model), xs, dxs)?.deri)
}

fn check_derivs<T: Scalar>(
    model: &EmbeddingModel<T>,
    xs: &[Vec<T>],
    dxs: &[Vec<T>],
) -> Result<(), TrainError> {
    if dxs.len() != xs.len() {
        return Err(TrainError::MissingDerivatives {
            index: dxs.len().min(xs.len()),
        });
    }
    for (i, d) in dxs.iter().enumerate() {
        if d.len() != 2 * model.n {
            return Err(TrainError::DimensionMismatch {
                index: i,
                expected: 2 * model.n,
                got: d.len(),
            });
        }
    }
    Ok(())
}

/// Loss components of one evaluation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown<T> {
    pub total: T,
    pub encdec: T,
    pub symp: T,
    pub deri: T,
    pub l1: T,
}

fn combine<T: Scalar, R: Real<T>>(
    terms: &Terms<R>,
    ph: &[R],
    lambdas: [T; 3],
    l1_weight: T,
) -> (R, R) {
    let abs: Vec<R> = ph.iter().map(|v| v.abs()).collect();
    let l1 = R::sum(&abs) * l1_weight;
    let total = terms.encdec * lambdas[0] + terms.symp * lambdas[1] + terms.deri * lambdas[2] + l1;
    (total, l1)
}

/// `λ₁L_encdec + λ₂L_symp + λ₃L_deri + l1·‖θ_H‖₁`.
pub fn total_loss<T: Scalar>(
    model: &EmbeddingModel<T>,
    xs: &[Vec<T>],
    dxs: &[Vec<T>],
    lambdas: [T; 3],
    l1_weight: T,
) -> Result<LossBreakdown<T>, TrainError> {
    if model.m < model.n {
        return Err(TrainError::NotALifting {
            m: model.m,
            n: model.n,
        });
    }
    check_batch(model, xs)?;
    check_derivs(model, xs, dxs)?;
    let theta = own_theta(model);
    let terms = batch_terms(model, theta, xs, dxs)?;
    let (total, l1) = combine(&terms, theta.2, lambdas, l1_weight);
    Ok(LossBreakdown {
        total,
        encdec: terms.encdec,
        symp: terms.symp,
        deri: terms.deri,
        l1,
    })
}

/// Value and gradient of [`total_loss`] with respect to the flat parameter
/// vector (encoder, decoder, Hamiltonian), recording on `tape`.
pub fn total_loss_grad<T: Scalar>(
    model: &EmbeddingModel<T>,
    xs: &[Vec<T>],
    dxs: &[Vec<T>],
    lambdas: [T; 3],
    l1_weight: T,
    tape: &mut Tape<T>,
) -> Result<(LossBreakdown<T>, Vec<T>), TrainError> {
    if model.m < model.n {
        return Err(TrainError::NotALifting {
            m: model.m,
            n: model.n,
        });
    }
    check_batch(model, xs)?;
    check_derivs(model, xs, dxs)?;
    tape.clear();
    let tape = &*tape;
    let flat = model.param_vector().values;
    let vars = tape.vars(&flat);
    let ne = model.enc_params.len();
    let nd = model.dec_params.len();
    let theta = (&vars[..ne], &vars[ne..ne + nd], &vars[ne + nd..]);
    let xv: Vec<Vec<_>> = xs.iter().map(|x| tape.vars(x)).collect();
    let dv: Vec<Vec<_>> = dxs.iter().map(|d| tape.vars(d)).collect();
    let terms = batch_terms(model, theta, &xv, &dv)?;
    let (total, l1) = combine(&terms, theta.2, lambdas, l1_weight);
    let adj = tape.gradient(total);
    let grad = vars.iter().map(|v| adj[v.index()]).collect();
    Ok((
        LossBreakdown {
            total: total.value(),
            encdec: terms.encdec.value(),
            symp: terms.symp.value(),
            deri: terms.deri.value(),
            l1: l1.value(),
        },
        grad,
    ))
}

/// Sample-weighted epoch means of the loss components.
pub type History<T> = Vec<LossBreakdown<T>>;

/// Trains a freshly initialized model. Deterministic for a fixed seed.
pub fn train<T: Scalar>(
    data: &TrainingData<T>,
    variant: Variant,
    m: usize,
    hidden: &[usize],
    cfg: &TrainingConfig<T>,
) -> Result<(EmbeddingModel<T>, History<T>), TrainError> {
    cfg.validate()?;
    let dim = data.states.first().map(Vec::len).ok_or(TrainError::Empty)?;
    if dim % 2 != 0 {
        return Err(TrainError::BadConfig(format!("state dimension {dim} is odd")));
    }
    data.check(dim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let model = EmbeddingModel::init(variant, dim / 2, m, hidden, &mut rng)?;
    train_from(model, data, cfg, &mut rng)
}

/// Continues training `model` with the given config and shuffling stream.
pub fn train_from<T: Scalar>(
    mut model: EmbeddingModel<T>,
    data: &TrainingData<T>,
    cfg: &TrainingConfig<T>,
    rng: &mut ChaCha8Rng,
) -> Result<(EmbeddingModel<T>, History<T>), TrainError> {
    cfg.validate()?;
    model.validate()?;
    if model.m < model.n {
        return Err(TrainError::NotALifting {
            m: model.m,
            n: model.n,
        });
    }
    data.check(2 * model.n)?;
    let pv = model.param_vector();
    let decay = pv.expand(|name| if name == HAMILTONIAN { cfg.wd_h } else { cfg.wd_a });
    let mut params = pv.values;
    let mut opt = Adam::new(params.len());
    let mut tape = Tape::new();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut xs = Vec::with_capacity(cfg.batch_size);
    let mut dxs = Vec::with_capacity(cfg.batch_size);
    for epoch in 0..cfg.epochs {
        order.shuffle(rng);
        let lr = lr_schedule(epoch, cfg.base_lr, cfg.lr_gamma, cfg.lr_step_epochs);
        let mut acc = LossBreakdown::<T>::default();
        for (batch, idx) in order.chunks(cfg.batch_size).enumerate() {
            xs.clear();
            dxs.clear();
            xs.extend(idx.iter().map(|i| data.states[*i].clone()));
            dxs.extend(idx.iter().map(|i| data.derivs[*i].clone()));
            let (loss, grad) =
                total_loss_grad(&model, &xs, &dxs, cfg.lambdas, cfg.l1_h, &mut tape)?;
            if !loss.total.is_finite() {
                return Err(TrainError::NonFiniteLoss { epoch, batch });
            }
            opt.step(&mut params, &grad, lr, &decay)
                .map_err(|e| match e {
                    DiffError::NonFiniteGradient { .. } => {
                        TrainError::NonFiniteGradient { epoch, batch }
                    }
                    other => TrainError::Diff(other),
                })?;
            model.set_params(&params);
            let w = T::from_usize_lossy(idx.len());
            acc.total += loss.total * w;
            acc.encdec += loss.encdec * w;
            acc.symp += loss.symp * w;
            acc.deri += loss.deri * w;
            acc.l1 += loss.l1 * w;
        }
        let inv = T::one() / T::from_usize_lossy(data.len());
        let rec = LossBreakdown {
            total: acc.total * inv,
            encdec: acc.encdec * inv,
            symp: acc.symp * inv,
            deri: acc.deri * inv,
            l1: acc.l1 * inv,
        };
        if epoch % 500 == 0 || epoch + 1 == cfg.epochs {
            log::debug!(
                "epoch {epoch}: loss {:.4e} (encdec {:.3e}, symp {:.3e}, deri {:.3e})",
                rec.total,
                rec.encdec,
                rec.symp,
                rec.deri
            );
        }
        history.push(rec);
    }
    Ok((model, history))
}

/// A step where the certified quantity exceeded the stability bound.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundViolation<T> {
    pub step: usize,
    pub value: T,
    pub bound: T,
}

#[derive(Clone, Debug)]
pub struct Rollout<T> {
    pub latent: Trajectory<T>,
    pub decoded: Trajectory<T>,
    /// Stability bound for certified variants.
    pub bound: Option<T>,
    pub violations: Vec<BoundViolation<T>>,
}

/// Relative slack allowed before a rollout step counts as a bound violation.
pub const BOUND_SLACK: f64 = 1e-6;

/// Encodes `x0`, integrates the latent system over `t_grid` with the implicit
/// midpoint rule and decodes every state. Bound violations are logged and
/// recorded, not fatal.
pub fn latent_rollout<T: Scalar>(
    model: &EmbeddingModel<T>,
    x0: &[T],
    t_grid: &[T],
    cfg: &SolverConfig<T>,
) -> Result<Rollout<T>, TrainError> {
    if x0.len() != 2 * model.n {
        return Err(TrainError::DimensionMismatch {
            index: 0,
            expected: 2 * model.n,
            got: x0.len(),
        });
    }
    let y0 = model.encode(x0)?;
    if !all_finite(&y0) {
        return Err(TrainError::Integrate(IntegrateError::NonFinite));
    }
    let ys = integrate_states(&model.latent, &y0, t_grid, cfg)?;
    let mut violations = Vec::new();
    let bound = if model.latent.is_certified() {
        let b = model.latent.stability_bound(&y0)?;
        let limit = b * (T::one() + T::lit(BOUND_SLACK));
        for (k, y) in ys.iter().enumerate() {
            let v = model.latent.certified_quantity(y)?;
            if v > limit {
                violations.push(BoundViolation {
                    step: k,
                    value: v,
                    bound: b,
                });
            }
        }
        if let Some(first) = violations.first() {
            log::warn!(
                "stability bound {:e} exceeded at {} steps (first at step {}, value {:e})",
                b,
                violations.len(),
                first.step,
                first.value
            );
        }
        Some(b)
    } else {
        None
    };
    let xs = ys
        .iter()
        .map(|y| model.decode(y))
        .collect::<Result<Vec<_>, _>>()?;
    let latent = Trajectory::new(t_grid.to_vec(), ys, None, "latent")?;
    let decoded = Trajectory::new(t_grid.to_vec(), xs, None, "decoded")?;
    Ok(Rollout {
        latent,
        decoded,
        bound,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat;

    /// Linear single-layer model with the given encoder and decoder matrices
    /// and latent `H = ½‖y‖²`.
    fn linear_model(enc: &[f64], dec: &[f64], n: usize, m: usize) -> EmbeddingModel<f64> {
        let encoder = MlpSpec::new(2 * n, 2 * m, vec![]).unwrap();
        let decoder = MlpSpec::new(2 * m, 2 * n, vec![]).unwrap();
        let mut enc_params = enc.to_vec();
        enc_params.extend(std::iter::repeat_n(0.0, 2 * m));
        let mut dec_params = dec.to_vec();
        dec_params.extend(std::iter::repeat_n(0.0, 2 * n));
        let d = 2 * m + 1;
        let l = Mat::identity(d).scale(0.5f64.sqrt());
        let latent = LatentHamiltonian::Sos(
            SosHamiltonian::from_factor(SosKind::Quadratic, m, &l, 0.0, 0.0).unwrap(),
        );
        EmbeddingModel {
            variant: Variant::SLinear,
            n,
            m,
            encoder,
            decoder,
            enc_params,
            dec_params,
            latent,
        }
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.as_str().parse::<Variant>().unwrap(), v);
        }
        assert!("cubic".parse::<Variant>().is_err());
    }

    #[test]
    fn identity_autoencoder_has_zero_losses() {
        let id = [1.0, 0.0, 0.0, 1.0];
        let model = linear_model(&id, &id, 1, 1);
        let xs = vec![vec![0.3, -1.0], vec![2.0, 0.5]];
        // harmonic-oscillator data ẋ = Jx matches H = ½‖y‖²
        let dxs: Vec<Vec<f64>> = xs.iter().map(|x| vec![x[1], -x[0]]).collect();
        assert_eq!(loss_encdec(&model, &xs).unwrap(), 0.0);
        assert_eq!(loss_symp(&model, &xs).unwrap(), 0.0);
        // √½·√½ is not exactly ½ in floating point
        assert!(loss_deri(&model, &xs, &dxs).unwrap() < 1e-30);
        let t = total_loss(&model, &xs, &dxs, [0.1, 1.0, 1.0], 0.0).unwrap();
        assert!(t.total < 1e-30);
    }

    #[test]
    fn scaled_encoder_symplectic_defect() {
        let model = linear_model(&[2.0, 0.0, 0.0, 2.0], &[0.5, 0.0, 0.0, 0.5], 1, 1);
        let xs = vec![vec![0.1, 0.2]];
        assert!((loss_symp(&model, &xs).unwrap() - 4.5).abs() < 1e-12);
    }

    #[test]
    fn constant_offset_reconstruction() {
        let id = [1.0, 0.0, 0.0, 1.0];
        let mut model = linear_model(&id, &id, 1, 1);
        let nd = model.dec_params.len();
        model.dec_params[nd - 2] = 0.3;
        model.dec_params[nd - 1] = 0.3;
        let xs = vec![vec![1.0, 2.0], vec![-1.0, 0.0]];
        assert!((loss_encdec(&model, &xs).unwrap() - 0.09).abs() < 1e-12);
    }

    #[test]
    fn lifting_required() {
        let model = linear_model(&[1.0; 8], &[1.0; 8], 2, 1);
        let xs = vec![vec![0.0; 4]];
        assert!(matches!(loss_symp(&model, &xs), Err(TrainError::NotALifting { .. })));
    }

    #[test]
    fn l1_only_when_weights_zero() {
        let id = [1.0, 0.0, 0.0, 1.0];
        let model = linear_model(&id, &id, 1, 1);
        let xs = vec![vec![1.0, 1.0]];
        let t = total_loss(&model, &xs, &xs, [0.0; 3], 1e-4).unwrap();
        let l1: f64 = model.latent.params().iter().map(|v| v.abs()).sum::<f64>() * 1e-4;
        assert!((t.total - l1).abs() < 1e-18);
    }

    #[test]
    fn rollout_of_single_point_is_reconstruction() {
        let id = [1.0, 0.0, 0.0, 1.0];
        let model = linear_model(&id, &id, 1, 1);
        let r = latent_rollout(&model, &[0.4, 0.1], &[0.0], &SolverConfig::default()).unwrap();
        assert_eq!(r.decoded.states, vec![vec![0.4, 0.1]]);
        assert!(r.violations.is_empty());
    }
}
