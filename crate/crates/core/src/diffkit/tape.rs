//! Wengert-list reverse-mode differentiation over scalars.
//!
//! Every operation appends a node holding its value's local partial
//! derivatives with respect to its parents. Nodes may have any number of
//! parents, so an affine map `Σ wᵢxᵢ + b` is a single node rather than a
//! chain of binary additions. A backward sweep in reverse insertion order
//! accumulates adjoints.
//!
//! ```
//! use hamkoop::diffkit::Tape;
//!
//! let tape = Tape::<f64>::new();
//! let x = tape.var(3.0);
//! let y = x * x;
//! let adj = tape.gradient(y);
//! assert_eq!(y.value(), 9.0);
//! assert_eq!(adj[x.index()], 6.0);
//! ```

use std::cell::RefCell;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::scalar::Scalar;

#[derive(Default)]
struct Inner<T> {
    /// Per node: start offset and parent count into `parents`/`partials`.
    spans: Vec<(u32, u32)>,
    parents: Vec<u32>,
    partials: Vec<T>,
}

pub struct Tape<T> {
    inner: RefCell<Inner<T>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self {
            inner: RefCell::new(Inner {
                spans: Vec::new(),
                parents: Vec::new(),
                partials: Vec::new(),
            }),
        }
    }

    /// Drops all nodes, keeping allocations.
    pub fn clear(&mut self) {
        let inner = self.inner.get_mut();
        inner.spans.clear();
        inner.parents.clear();
        inner.partials.clear();
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().spans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// New leaf (independent variable or constant).
    pub fn var(&self, value: T) -> Var<'_, T> {
        self.push(value, std::iter::empty())
    }

    pub fn vars(&self, values: &[T]) -> Vec<Var<'_, T>> {
        values.iter().map(|v| self.var(*v)).collect()
    }

    /// Appends a node with the given `(parent, ∂value/∂parent)` pairs.
    pub fn push(&self, value: T, edges: impl IntoIterator<Item = (u32, T)>) -> Var<'_, T> {
        let mut inner = self.inner.borrow_mut();
        let start = inner.parents.len() as u32;
        for (p, d) in edges {
            inner.parents.push(p);
            inner.partials.push(d);
        }
        let count = inner.parents.len() as u32 - start;
        let idx = inner.spans.len() as u32;
        inner.spans.push((start, count));
        Var {
            tape: self,
            idx,
            val: value,
        }
    }

    /// Adjoints `∂root/∂node` for every node up to `root`.
    pub fn gradient(&self, root: Var<'_, T>) -> Vec<T> {
        assert!(
            std::ptr::eq(root.tape, self),
            "gradient root belongs to another tape"
        );
        let inner = self.inner.borrow();
        let n = root.idx as usize + 1;
        let mut adj = vec![T::zero(); n];
        adj[n - 1] = T::one();
        for i in (0..n).rev() {
            let a = adj[i];
            if a == T::zero() {
                continue;
            }
            let (start, count) = inner.spans[i];
            let (s, e) = (start as usize, (start + count) as usize);
            for (p, d) in inner.parents[s..e].iter().zip(&inner.partials[s..e]) {
                adj[*p as usize] += a * *d;
            }
        }
        adj
    }
}

/// Handle to a tape node; carries its forward value.
#[derive(Clone, Copy)]
pub struct Var<'t, T> {
    tape: &'t Tape<T>,
    idx: u32,
    val: T,
}

impl<T: fmt::Debug> fmt::Debug for Var<'_, T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var#{}({:?})", self.idx, self.val)
    }
}

impl<'t, T: Scalar> Var<'t, T> {
    #[inline]
    pub fn value(&self) -> T {
        self.val
    }

    #[inline]
    pub fn index(&self) -> usize {
        self.idx as usize
    }

    pub fn tape(&self) -> &'t Tape<T> {
        self.tape
    }

    #[inline]
    pub(crate) fn unary(self, value: T, partial: T) -> Self {
        self.tape.push(value, [(self.idx, partial)])
    }
}

impl<'t, T: Scalar> Add for Var<'t, T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        self.tape
            .push(self.val + rhs.val, [(self.idx, T::one()), (rhs.idx, T::one())])
    }
}

impl<'t, T: Scalar> Sub for Var<'t, T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self.tape
            .push(self.val - rhs.val, [(self.idx, T::one()), (rhs.idx, -T::one())])
    }
}

impl<'t, T: Scalar> Mul for Var<'t, T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        self.tape
            .push(self.val * rhs.val, [(self.idx, rhs.val), (rhs.idx, self.val)])
    }
}

impl<'t, T: Scalar> Neg for Var<'t, T> {
    type Output = Self;
    fn neg(self) -> Self {
        self.unary(-self.val, -T::one())
    }
}

impl<'t, T: Scalar> Add<T> for Var<'t, T> {
    type Output = Self;
    fn add(self, rhs: T) -> Self {
        self.unary(self.val + rhs, T::one())
    }
}

impl<'t, T: Scalar> Sub<T> for Var<'t, T> {
    type Output = Self;
    fn sub(self, rhs: T) -> Self {
        self.unary(self.val - rhs, T::one())
    }
}

impl<'t, T: Scalar> Mul<T> for Var<'t, T> {
    type Output = Self;
    fn mul(self, rhs: T) -> Self {
        self.unary(self.val * rhs, rhs)
    }
}

/// Value and gradient of `f` at `params`.
pub fn grad<T, F>(params: &[T], f: F) -> (T, Vec<T>)
where
    T: Scalar,
    F: for<'t> FnOnce(&'t Tape<T>, &[Var<'t, T>]) -> Var<'t, T>,
{
    let tape = Tape::new();
    let vars = tape.vars(params);
    let root = f(&tape, &vars);
    let adj = tape.gradient(root);
    let g = vars
        .iter()
        .map(|v| adj.get(v.index()).copied().unwrap_or(T::zero()))
        .collect();
    (root.value(), g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_gradient() {
        let (v, g) = grad(&[3.0], |_, p| p[0] * p[0]);
        assert_eq!(v, 9.0);
        assert_eq!(g, vec![6.0]);
    }

    #[test]
    fn shared_subexpressions_accumulate() {
        // f = (a·b + a)·b  →  ∂a = b² + b, ∂b = 2ab + a
        let (_, g) = grad(&[2.0, 5.0], |_, p| {
            let (a, b) = (p[0], p[1]);
            (a * b + a) * b
        });
        assert_eq!(g, vec![30.0, 22.0]);
    }

    #[test]
    fn constants_do_not_leak_gradient() {
        let (_, g) = grad(&[1.5, 2.0], |t, p| {
            let c = t.var(4.0);
            p[0] * c - p[1] * 2.0 + 1.0
        });
        assert_eq!(g, vec![4.0, -2.0]);
    }

    #[test]
    fn unused_parameters_get_zero() {
        let (_, g) = grad(&[1.0, 2.0, 3.0], |_, p| -p[1]);
        assert_eq!(g, vec![0.0, -1.0, 0.0]);
    }

    #[test]
    fn clear_reuses_tape() {
        let mut tape = Tape::<f64>::new();
        {
            let x = tape.var(2.0);
            let _ = x * x;
        }
        assert_eq!(tape.len(), 2);
        tape.clear();
        assert!(tape.is_empty());
    }
}
