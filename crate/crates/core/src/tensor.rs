//! Dense f64 tensors with reverse-mode automatic differentiation.
//!
//! The engine covers exactly the operations the degradation network needs:
//! add, scalar-multiply, sum, ReLU, row softmax, L1 loss and the
//! convolutions in [`crate::conv`]. Graphs are rebuilt per forward pass;
//! [`backward`] accumulates gradients into leaf tensors created with
//! [`Tensor::param`].

use alloc::boxed::Box;
use alloc::rc::Rc;
use alloc::vec;
use alloc::vec::Vec;
use core::cell::{Ref, RefCell};
use core::fmt;
use core::sync::atomic::{AtomicU64, Ordering};

// std's inherent float methods shadow the trait in test builds.
#[cfg_attr(test, allow(unused_imports))]
use crate::fmath::FloatExt;

#[derive(Clone, Debug, PartialEq)]
pub enum TensorError {
    /// Elementwise operands with different shapes.
    ShapeMismatch { left: Vec<usize>, right: Vec<usize> },
    /// Buffer length inconsistent with the shape.
    LengthMismatch { expected: usize, got: usize },
    /// `backward` needs a scalar root.
    NotScalar(Vec<usize>),
    /// Operation expects a rank-2 tensor.
    NotMatrix(Vec<usize>),
    /// Operation expects a rank-4 [N, C, H, W] tensor.
    NotBatched(Vec<usize>),
    /// Convolution input channels do not match the weight tensor.
    ChannelMismatch { input: usize, weight: usize },
    /// Convolution weight must be [out_ch, in_ch, kh, kw].
    BadWeightShape(Vec<usize>),
    /// Bias length must equal the output channel count.
    BadBiasShape { expected: usize, got: usize },
    /// Padded input smaller than the kernel.
    InputTooSmall { padded: (usize, usize), kernel: (usize, usize) },
    ZeroStride,
    /// Mixture weight columns do not match the kernel bank.
    BankMismatch { weights: usize, kernels: usize },
    /// A parameter had no gradient when the optimizer stepped.
    MissingGradient { index: usize },
}

impl fmt::Display for TensorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TensorError::ShapeMismatch { left, right } => {
                write!(f, "shape mismatch: {left:?} vs {right:?}")
            }
            TensorError::LengthMismatch { expected, got } => {
                write!(f, "buffer length {got} does not match shape ({expected} elements)")
            }
            TensorError::NotScalar(s) => write!(f, "expected scalar, got shape {s:?}"),
            TensorError::NotMatrix(s) => write!(f, "expected 2-d tensor, got shape {s:?}"),
            TensorError::NotBatched(s) => write!(f, "expected [N, C, H, W] tensor, got {s:?}"),
            TensorError::ChannelMismatch { input, weight } => {
                write!(f, "input has {input} channels but weight expects {weight}")
            }
            TensorError::BadWeightShape(s) => {
                write!(f, "weight must be [out_ch, in_ch, kh, kw], got {s:?}")
            }
            TensorError::BadBiasShape { expected, got } => {
                write!(f, "bias length {got} does not match {expected} output channels")
            }
            TensorError::InputTooSmall { padded, kernel } => {
                write!(f, "padded input {padded:?} smaller than kernel {kernel:?}")
            }
            TensorError::ZeroStride => write!(f, "stride must be >= 1"),
            TensorError::BankMismatch { weights, kernels } => {
                write!(f, "{weights} weight columns vs {kernels} bank kernels")
            }
            TensorError::MissingGradient { index } => {
                write!(f, "parameter {index} has no gradient")
            }
        }
    }
}

impl core::error::Error for TensorError {}

static NEXT_ID: AtomicU64 = AtomicU64::new(0);

type BackFn = Box<dyn Fn(&[f64], &[Tensor])>;

struct Inner {
    id: u64,
    shape: Vec<usize>,
    data: RefCell<Vec<f64>>,
    /// Persistent accumulated gradient; populated on leaves by `backward`.
    grad: RefCell<Option<Vec<f64>>>,
    requires_grad: bool,
    parents: Vec<Tensor>,
    backward: Option<BackFn>,
    /// Transient upstream gradient while a `backward` call is in flight.
    pending: RefCell<Option<Vec<f64>>>,
}

/// A shared handle to a dense tensor node. Cloning is cheap and aliases the
/// same storage, which is how parameters stay live across rebuilt graphs.
#[derive(Clone)]
pub struct Tensor {
    inner: Rc<Inner>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.inner.shape)
            .field("requires_grad", &self.inner.requires_grad)
            .finish()
    }
}

fn check_len(shape: &[usize], len: usize) -> Result<(), TensorError> {
    let expected: usize = shape.iter().product();
    if expected != len {
        return Err(TensorError::LengthMismatch { expected, got: len });
    }
    Ok(())
}

impl Tensor {
    fn new_node(
        shape: Vec<usize>,
        data: Vec<f64>,
        parents: Vec<Tensor>,
        backward: Option<BackFn>,
        requires_grad: bool,
    ) -> Tensor {
        Tensor {
            inner: Rc::new(Inner {
                id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
                shape,
                data: RefCell::new(data),
                grad: RefCell::new(None),
                requires_grad,
                parents,
                backward,
                pending: RefCell::new(None),
            }),
        }
    }

    /// A constant tensor outside the differentiation graph.
    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Tensor, TensorError> {
        check_len(shape, data.len())?;
        Ok(Tensor::new_node(shape.to_vec(), data, Vec::new(), None, false))
    }

    /// A trainable leaf; `backward` accumulates into its gradient buffer.
    pub fn param(shape: &[usize], data: Vec<f64>) -> Result<Tensor, TensorError> {
        check_len(shape, data.len())?;
        Ok(Tensor::new_node(shape.to_vec(), data, Vec::new(), None, true))
    }

    pub fn zeros(shape: &[usize]) -> Tensor {
        let n = shape.iter().product();
        Tensor::new_node(shape.to_vec(), vec![0.0; n], Vec::new(), None, false)
    }

    pub fn scalar(v: f64) -> Tensor {
        Tensor::new_node(Vec::new(), vec![v], Vec::new(), None, false)
    }

    pub fn shape(&self) -> &[usize] {
        &self.inner.shape
    }

    pub fn numel(&self) -> usize {
        self.inner.shape.iter().product()
    }

    pub fn requires_grad(&self) -> bool {
        self.inner.requires_grad
    }

    pub(crate) fn data(&self) -> Ref<'_, Vec<f64>> {
        self.inner.data.borrow()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.inner.data.borrow().clone()
    }

    /// Value of a scalar tensor. Panics if the tensor is not scalar.
    pub fn item(&self) -> f64 {
        assert_eq!(self.numel(), 1, "item() on tensor of shape {:?}", self.inner.shape);
        self.inner.data.borrow()[0]
    }

    /// Overwrites the stored values in place (parameter updates, loading).
    pub fn set_data(&self, values: &[f64]) -> Result<(), TensorError> {
        check_len(&self.inner.shape, values.len())?;
        self.inner.data.borrow_mut().copy_from_slice(values);
        Ok(())
    }

    pub fn grad(&self) -> Option<Vec<f64>> {
        self.inner.grad.borrow().clone()
    }

    pub fn zero_grad(&self) {
        *self.inner.grad.borrow_mut() = None;
    }

    fn id(&self) -> u64 {
        self.inner.id
    }
}

/// Adds `f`'s output into the node's pending gradient buffer.
fn add_pending(t: &Tensor, f: impl FnOnce(&mut [f64])) {
    if !t.inner.requires_grad {
        return;
    }
    let n = t.numel();
    let mut slot = t.inner.pending.borrow_mut();
    let buf = slot.get_or_insert_with(|| vec![0.0; n]);
    f(buf);
}

/// Adds a ready-made contribution into a node's pending gradient; used by
/// the convolution backward passes.
pub(crate) fn accumulate_pending(t: &Tensor, contribution: &[f64]) {
    add_pending(t, |buf| {
        for (dst, src) in buf.iter_mut().zip(contribution.iter()) {
            *dst += src;
        }
    });
}

pub(crate) fn make_op(shape: Vec<usize>, data: Vec<f64>, parents: Vec<Tensor>, back: BackFn) -> Tensor {
    if parents.iter().any(|p| p.inner.requires_grad) {
        Tensor::new_node(shape, data, parents, Some(back), true)
    } else {
        Tensor::new_node(shape, data, Vec::new(), None, false)
    }
}

pub(crate) use make_op as op_node;

/// Elementwise sum of two same-shape tensors.
pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
    if a.shape() != b.shape() {
        return Err(TensorError::ShapeMismatch {
            left: a.shape().to_vec(),
            right: b.shape().to_vec(),
        });
    }
    let data: Vec<f64> = a
        .data()
        .iter()
        .zip(b.data().iter())
        .map(|(x, y)| x + y)
        .collect();
    Ok(make_op(
        a.shape().to_vec(),
        data,
        vec![a.clone(), b.clone()],
        Box::new(|g, parents| {
            for p in parents {
                add_pending(p, |buf| {
                    for (dst, src) in buf.iter_mut().zip(g.iter()) {
                        *dst += src;
                    }
                });
            }
        }),
    ))
}

/// Multiplies every element by a constant.
pub fn scalar_mul(t: &Tensor, c: f64) -> Tensor {
    let data: Vec<f64> = t.data().iter().map(|x| x * c).collect();
    make_op(
        t.shape().to_vec(),
        data,
        vec![t.clone()],
        Box::new(move |g, parents| {
            add_pending(&parents[0], |buf| {
                for (dst, src) in buf.iter_mut().zip(g.iter()) {
                    *dst += c * src;
                }
            });
        }),
    )
}

/// Sum of all elements, as a scalar.
pub fn sum(t: &Tensor) -> Tensor {
    let total: f64 = t.data().iter().sum();
    make_op(
        Vec::new(),
        vec![total],
        vec![t.clone()],
        Box::new(|g, parents| {
            let s = g[0];
            add_pending(&parents[0], |buf| {
                for dst in buf.iter_mut() {
                    *dst += s;
                }
            });
        }),
    )
}

/// Elementwise max(0, x); the subgradient at 0 is 0.
pub fn relu(t: &Tensor) -> Tensor {
    let data: Vec<f64> = t.data().iter().map(|&x| if x > 0.0 { x } else { 0.0 }).collect();
    make_op(
        t.shape().to_vec(),
        data,
        vec![t.clone()],
        Box::new(|g, parents| {
            let p = &parents[0];
            let input = p.data().clone();
            add_pending(p, |buf| {
                for ((dst, src), x) in buf.iter_mut().zip(g.iter()).zip(input.iter()) {
                    if *x > 0.0 {
                        *dst += src;
                    }
                }
            });
        }),
    )
}

/// Row-wise softmax of a [rows, cols] tensor, max-subtracted for stability.
/// Every output row is strictly positive and sums to one.
pub fn softmax_rows(t: &Tensor) -> Result<Tensor, TensorError> {
    if t.shape().len() != 2 {
        return Err(TensorError::NotMatrix(t.shape().to_vec()));
    }
    let rows = t.shape()[0];
    let cols = t.shape()[1];
    let input = t.data();
    let mut data = vec![0.0; rows * cols];
    for r in 0..rows {
        let row = &input[r * cols..(r + 1) * cols];
        let max = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let out = &mut data[r * cols..(r + 1) * cols];
        let mut denom = 0.0;
        for (o, &x) in out.iter_mut().zip(row.iter()) {
            *o = (x - max).exp();
            denom += *o;
        }
        for o in out.iter_mut() {
            *o /= denom;
        }
    }
    drop(input);
    let saved = data.clone();
    Ok(make_op(
        t.shape().to_vec(),
        data,
        vec![t.clone()],
        Box::new(move |g, parents| {
            add_pending(&parents[0], |buf| {
                for r in 0..rows {
                    let y = &saved[r * cols..(r + 1) * cols];
                    let gr = &g[r * cols..(r + 1) * cols];
                    let dot: f64 = y.iter().zip(gr.iter()).map(|(yj, gj)| yj * gj).sum();
                    let out = &mut buf[r * cols..(r + 1) * cols];
                    for ((dst, &yj), &gj) in out.iter_mut().zip(y.iter()).zip(gr.iter()) {
                        *dst += yj * (gj - dot);
                    }
                }
            });
        }),
    ))
}

/// Mean absolute error; the gradient at ties is 0.
pub fn l1_loss(pred: &Tensor, target: &Tensor) -> Result<Tensor, TensorError> {
    if pred.shape() != target.shape() {
        return Err(TensorError::ShapeMismatch {
            left: pred.shape().to_vec(),
            right: target.shape().to_vec(),
        });
    }
    let n = pred.numel();
    let total: f64 = pred
        .data()
        .iter()
        .zip(target.data().iter())
        .map(|(p, t)| (p - t).abs())
        .sum();
    Ok(make_op(
        Vec::new(),
        vec![total / n as f64],
        vec![pred.clone(), target.clone()],
        Box::new(move |g, parents| {
            let scale = g[0] / n as f64;
            let p = parents[0].data().clone();
            let t = parents[1].data().clone();
            let sign = |a: f64, b: f64| -> f64 {
                if a > b {
                    1.0
                } else if a < b {
                    -1.0
                } else {
                    0.0
                }
            };
            add_pending(&parents[0], |buf| {
                for (i, dst) in buf.iter_mut().enumerate() {
                    *dst += scale * sign(p[i], t[i]);
                }
            });
            add_pending(&parents[1], |buf| {
                for (i, dst) in buf.iter_mut().enumerate() {
                    *dst -= scale * sign(p[i], t[i]);
                }
            });
        }),
    ))
}

/// Reverse topological order over the reachable requires-grad subgraph.
fn topo_order(root: &Tensor) -> Vec<Tensor> {
    let mut order: Vec<Tensor> = Vec::new();
    let mut visited: alloc::collections::BTreeSet<u64> = alloc::collections::BTreeSet::new();
    // Iterative postorder DFS.
    let mut stack: Vec<(Tensor, usize)> = vec![(root.clone(), 0)];
    visited.insert(root.id());
    while let Some((node, child)) = stack.pop() {
        if child < node.inner.parents.len() {
            stack.push((node.clone(), child + 1));
            let parent = node.inner.parents[child].clone();
            if parent.inner.requires_grad && visited.insert(parent.id()) {
                stack.push((parent, 0));
            }
        } else {
            order.push(node);
        }
    }
    order
}

/// Propagates d(loss)/d(node) from a scalar loss to every reachable leaf,
/// accumulating additively into the leaves' gradient buffers.
pub fn backward(loss: &Tensor) -> Result<(), TensorError> {
    if loss.numel() != 1 {
        return Err(TensorError::NotScalar(loss.shape().to_vec()));
    }
    if !loss.inner.requires_grad {
        return Ok(());
    }
    let order = topo_order(loss);
    *loss.inner.pending.borrow_mut() = Some(vec![1.0]);
    for node in order.iter().rev() {
        let Some(g) = node.inner.pending.borrow_mut().take() else {
            continue;
        };
        match &node.inner.backward {
            Some(back) => back(&g, &node.inner.parents),
            None => {
                let n = node.numel();
                let mut slot = node.inner.grad.borrow_mut();
                let buf = slot.get_or_insert_with(|| vec![0.0; n]);
                for (dst, src) in buf.iter_mut().zip(g.iter()) {
                    *dst += src;
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_values_and_gradient() {
        let x = Tensor::param(&[3], vec![-1.0, 0.0, 2.0]).unwrap();
        let y = relu(&x);
        assert_eq!(y.to_vec(), vec![0.0, 0.0, 2.0]);

        let x = Tensor::param(&[2], vec![-1.0, 2.0]).unwrap();
        let loss = sum(&relu(&x));
        backward(&loss).unwrap();
        assert_eq!(x.grad().unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn softmax_uniform_and_saturated() {
        let t = Tensor::from_vec(&[1, 4], vec![0.0; 4]).unwrap();
        let y = softmax_rows(&t).unwrap();
        for &v in &y.to_vec() {
            assert!((v - 0.25).abs() < 1e-15);
        }
        let t = Tensor::from_vec(&[1, 4], vec![1e3, 0.0, 0.0, 0.0]).unwrap();
        let y = softmax_rows(&t).unwrap().to_vec();
        assert!(y.iter().all(|v| v.is_finite()));
        assert!((y[0] - 1.0).abs() < 1e-12);
        assert!(y[1] < 1e-300);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let t = Tensor::from_vec(&[3, 5], (0..15).map(|i| (i as f64) * 0.37 - 2.0).collect())
            .unwrap();
        let y = softmax_rows(&t).unwrap().to_vec();
        for r in 0..3 {
            let s: f64 = y[r * 5..(r + 1) * 5].iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
            assert!(y[r * 5..(r + 1) * 5].iter().all(|&v| v > 0.0));
        }
        assert!(matches!(
            softmax_rows(&Tensor::from_vec(&[4], vec![0.0; 4]).unwrap()),
            Err(TensorError::NotMatrix(_))
        ));
    }

    #[test]
    fn l1_examples() {
        let a = Tensor::from_vec(&[2], vec![1.0, 0.0]).unwrap();
        let b = Tensor::from_vec(&[2], vec![0.0, 0.0]).unwrap();
        assert_eq!(l1_loss(&a, &a).unwrap().item(), 0.0);
        assert_eq!(l1_loss(&a, &b).unwrap().item(), 0.5);
        let c = Tensor::from_vec(&[3], vec![0.0; 3]).unwrap();
        assert!(matches!(l1_loss(&a, &c), Err(TensorError::ShapeMismatch { .. })));
    }

    #[test]
    fn backward_of_sum_is_ones_and_accumulates() {
        let x = Tensor::param(&[4], vec![0.5, -1.0, 2.0, 0.0]).unwrap();
        let loss = sum(&x);
        backward(&loss).unwrap();
        assert_eq!(x.grad().unwrap(), vec![1.0; 4]);
        // Second backward without zeroing doubles the gradient.
        backward(&loss).unwrap();
        assert_eq!(x.grad().unwrap(), vec![2.0; 4]);
        x.zero_grad();
        assert!(x.grad().is_none());
    }

    #[test]
    fn backward_requires_scalar() {
        let x = Tensor::param(&[2], vec![1.0, 2.0]).unwrap();
        let y = relu(&x);
        assert!(matches!(backward(&y), Err(TensorError::NotScalar(_))));
    }

    #[test]
    fn shared_subexpression_gradients_add() {
        // loss = sum(x + x) => d/dx = 2.
        let x = Tensor::param(&[3], vec![1.0, -2.0, 3.0]).unwrap();
        let loss = sum(&add(&x, &x).unwrap());
        backward(&loss).unwrap();
        assert_eq!(x.grad().unwrap(), vec![2.0; 3]);
    }

    #[test]
    fn scalar_mul_chain() {
        let x = Tensor::param(&[2], vec![3.0, -1.0]).unwrap();
        let loss = sum(&scalar_mul(&x, -0.5));
        backward(&loss).unwrap();
        assert_eq!(x.grad().unwrap(), vec![-0.5; 2]);
        assert_eq!(loss.item(), -1.0);
    }
}
