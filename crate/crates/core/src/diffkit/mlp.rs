//! Dense SeLU networks with forward-mode input tangents.
//!
//! Parameters are a flat slice; each layer stores its weight matrix row-major
//! (`fan_out × fan_in`) followed by its bias. All functions are generic over
//! [`Real`], so the same code evaluates with plain floats or records a tape,
//! and Jacobian entries computed on a tape stay differentiable with respect
//! to the parameters.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::real::Real;
use super::DiffError;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub hidden: Vec<usize>,
}

impl MlpSpec {
    pub fn new(in_dim: usize, out_dim: usize, hidden: Vec<usize>) -> Result<Self, DiffError> {
        let spec = Self {
            in_dim,
            out_dim,
            hidden,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), DiffError> {
        if self.in_dim == 0 || self.out_dim == 0 || self.hidden.contains(&0) {
            return Err(DiffError::BadSpec(format!(
                "layer widths must be positive: {} -> {:?} -> {}",
                self.in_dim, self.hidden, self.out_dim
            )));
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` of every affine layer, input to output.
    pub fn layers(&self) -> Vec<(usize, usize)> {
        let mut widths = Vec::with_capacity(self.hidden.len() + 2);
        widths.push(self.in_dim);
        widths.extend_from_slice(&self.hidden);
        widths.push(self.out_dim);
        widths.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers().iter().map(|(i, o)| (i + 1) * o).sum()
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init<T: Scalar, G: Rng + ?Sized>(&self, rng: &mut G) -> Vec<T> {
        let mut out = Vec::with_capacity(self.param_count());
        for (fan_in, fan_out) in self.layers() {
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for _ in 0..fan_in * fan_out {
                out.push(T::lit(rng.gen_range(-bound..bound)));
            }
            out.extend(std::iter::repeat_n(T::zero(), fan_out));
        }
        out
    }

    fn check(&self, params: usize, x: usize) -> Result<(), DiffError> {
        if params != self.param_count() {
            return Err(DiffError::DimensionMismatch {
                what: "mlp parameters",
                expected: self.param_count(),
                got: params,
            });
        }
        if x != self.in_dim {
            return Err(DiffError::DimensionMismatch {
                what: "mlp input",
                expected: self.in_dim,
                got: x,
            });
        }
        Ok(())
    }
}

/// Walks the layers, calling `visit(weights, bias, fan_in, is_last)`.
fn for_each_layer<'a, R>(
    spec: &MlpSpec,
    params: &'a [R],
    mut visit: impl FnMut(&'a [R], &'a [R], usize, bool),
) {
    let layers = spec.layers();
    let last = layers.len() - 1;
    let mut off = 0;
    for (l, (fan_in, fan_out)) in layers.into_iter().enumerate() {
        let w = &params[off..off + fan_in * fan_out];
        let b = &params[off + fan_in * fan_out..off + (fan_in + 1) * fan_out];
        off += (fan_in + 1) * fan_out;
        visit(w, b, fan_in, l == last);
    }
}

fn affine<T: Scalar, R: Real<T>>(w: &[R], b: &[R], fan_in: usize, x: &[R]) -> Vec<R> {
    b.iter()
        .enumerate()
        .map(|(i, bi)| R::affine(&w[i * fan_in..(i + 1) * fan_in], x, *bi))
        .collect()
}

pub fn mlp_forward<T: Scalar, R: Real<T>>(
    spec: &MlpSpec,
    params: &[R],
    x: &[R],
) -> Result<Vec<R>, DiffError> {
    spec.check(params.len(), x.len())?;
    let mut h = x.to_vec();
    for_each_layer(spec, params, |w, b, fan_in, last| {
        let a = affine(w, b, fan_in, &h);
        h = if last {
            a
        } else {
            a.into_iter().map(Real::selu).collect()
        };
    });
    Ok(h)
}

/// Output together with the pushed-forward tangents of `dirs`: entry `k` of
/// the returned tangent list is `Dφ(x)·dirs[k]`.
pub fn mlp_forward_tangents<T: Scalar, R: Real<T>>(
    spec: &MlpSpec,
    params: &[R],
    x: &[R],
    dirs: &[Vec<R>],
) -> Result<(Vec<R>, Vec<Vec<R>>), DiffError> {
    spec.check(params.len(), x.len())?;
    if let Some(d) = dirs.iter().find(|d| d.len() != spec.in_dim) {
        return Err(DiffError::DimensionMismatch {
            what: "tangent direction",
            expected: spec.in_dim,
            got: d.len(),
        });
    }
    let mut h = x.to_vec();
    let mut tangents = dirs.to_vec();
    for_each_layer(spec, params, |w, b, fan_in, last| {
        let a = affine(w, b, fan_in, &h);
        for t in tangents.iter_mut() {
            let ta: Vec<R> = (0..b.len())
                .map(|i| R::dot(&w[i * fan_in..(i + 1) * fan_in], t))
                .collect();
            *t = if last {
                ta
            } else {
                ta.into_iter()
                    .zip(&a)
                    .map(|(ti, ai)| ai.selu_prime() * ti)
                    .collect()
            };
        }
        h = if last {
            a
        } else {
            a.into_iter().map(Real::selu).collect()
        };
    });
    Ok((h, tangents))
}

/// Output and the full input Jacobian, row-major `out_dim × in_dim`.
pub fn mlp_forward_jacobian<T: Scalar, R: Real<T>>(
    spec: &MlpSpec,
    params: &[R],
    x: &[R],
) -> Result<(Vec<R>, Vec<R>), DiffError> {
    spec.check(params.len(), x.len())?;
    let (zero, one) = (x[0].lift(T::zero()), x[0].lift(T::one()));
    let dirs: Vec<Vec<R>> = (0..spec.in_dim)
        .map(|k| {
            (0..spec.in_dim)
                .map(|j| if j == k { one } else { zero })
                .collect()
        })
        .collect();
    let (y, cols) = mlp_forward_tangents(spec, params, x, &dirs)?;
    let mut jac = Vec::with_capacity(spec.out_dim * spec.in_dim);
    for i in 0..spec.out_dim {
        for col in &cols {
            jac.push(col[i]);
        }
    }
    Ok((y, jac))
}

pub fn mlp_input_jacobian<T: Scalar, R: Real<T>>(
    spec: &MlpSpec,
    params: &[R],
    x: &[R],
) -> Result<Vec<R>, DiffError> {
    Ok(mlp_forward_jacobian(spec, params, x)?.1)
}

pub fn mlp_input_jvp<T: Scalar, R: Real<T>>(
    spec: &MlpSpec,
    params: &[R],
    x: &[R],
    v: &[R],
) -> Result<Vec<R>, DiffError> {
    let (_, mut t) = mlp_forward_tangents(spec, params, x, &[v.to_vec()])?;
    Ok(t.pop().expect("one tangent"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffkit::tape::grad;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn parameter_count_and_layers() {
        let spec = MlpSpec::new(2, 4, vec![8, 8, 8]).unwrap();
        assert_eq!(spec.layers(), vec![(2, 8), (8, 8), (8, 8), (8, 4)]);
        assert_eq!(spec.param_count(), 24 + 72 + 72 + 36);
        assert!(MlpSpec::new(2, 0, vec![]).is_err());
        assert!(MlpSpec::new(2, 2, vec![3, 0]).is_err());
    }

    #[test]
    fn linear_layer_is_affine() {
        let spec = MlpSpec::new(2, 2, vec![]).unwrap();
        let p = [1.0, 2.0, 3.0, 4.0, 0.5, -0.5];
        let y = mlp_forward(&spec, &p, &[1.0, -1.0]).unwrap();
        assert_eq!(y, vec![-1.0 + 0.5, -1.0 - 0.5]);
        let j = mlp_input_jacobian(&spec, &p, &[0.3, 0.1]).unwrap();
        assert_eq!(j, vec![1.0, 2.0, 3.0, 4.0]);
        let v = mlp_input_jvp(&spec, &p, &[0.3, 0.1], &[1.0, 1.0]).unwrap();
        assert_eq!(v, vec![3.0, 7.0]);
    }

    #[test]
    fn dimension_errors() {
        let spec = MlpSpec::new(2, 1, vec![3]).unwrap();
        let p = vec![0.0; spec.param_count()];
        assert!(mlp_forward(&spec, &p, &[1.0]).is_err());
        assert!(mlp_forward(&spec, &p[1..], &[1.0, 2.0]).is_err());
        assert!(mlp_input_jvp(&spec, &p, &[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let spec = MlpSpec::new(3, 2, vec![5]).unwrap();
        let a: Vec<f64> = spec.init(&mut ChaCha8Rng::seed_from_u64(4));
        let b: Vec<f64> = spec.init(&mut ChaCha8Rng::seed_from_u64(4));
        assert_eq!(a, b);
        let bound = (6.0f64 / 8.0).sqrt();
        assert!(a[..15].iter().all(|w| w.abs() <= bound));
        assert!(a[15..20].iter().all(|w| *w == 0.0));
    }

    #[test]
    fn scalar_jacobian_is_differentiable() {
        // φ(x) = a·x, loss (∂φ/∂x − 1)² → d/da = 2(a − 1) = 4 at a = 3.
        let spec = MlpSpec::new(1, 1, vec![]).unwrap();
        let (v, g) = grad(&[3.0, 0.0], |t, p| {
            let x = [t.var(0.7)];
            let j = mlp_input_jacobian(&spec, p, &x).unwrap();
            let d = j[0] - 1.0;
            d * d
        });
        assert_eq!(v, 4.0);
        assert_eq!(g, vec![4.0, 0.0]);
    }
}
