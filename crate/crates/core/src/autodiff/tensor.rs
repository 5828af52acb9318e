use std::cell::{Ref, RefCell, RefMut};
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::Scalar;

static NEXT_ID: AtomicU64 = AtomicU64::new(0);

/// An n-dimensional row-major value that participates in a dynamic
/// computation graph.
///
/// Cloning a `Tensor` is cheap and yields a handle to the same node, so a
/// parameter can be used any number of times in one graph and its gradient
/// accumulates every use.
pub struct Tensor<T: Scalar> {
    node: Rc<Node<T>>,
}

struct Node<T: Scalar> {
    id: u64,
    shape: Vec<usize>,
    data: RefCell<Vec<T>>,
    grad: RefCell<Option<Vec<T>>>,
    requires_grad: bool,
    op: Op<T>,
}

enum Op<T: Scalar> {
    Leaf,
    MatMul(Tensor<T>, Tensor<T>),
    Add(Tensor<T>, Tensor<T>),
    AddRowBias(Tensor<T>, Tensor<T>),
    Mul(Tensor<T>, Tensor<T>),
    Scale(Tensor<T>, T),
    Sigmoid(Tensor<T>),
    Tanh(Tensor<T>),
    Relu(Tensor<T>),
    Softmax(Tensor<T>),
    LogSoftmax(Tensor<T>),
    Concat(Vec<Tensor<T>>),
    Stack(Vec<Tensor<T>>),
    Slice(Tensor<T>, usize),
    Reshape(Tensor<T>),
    Row(Tensor<T>, usize),
    Sum(Tensor<T>),
    Pick(Tensor<T>, usize),
    Mask(Tensor<T>, Vec<T>),
}

impl<T: Scalar> Op<T> {
    fn parents(&self) -> Vec<&Tensor<T>> {
        match self {
            Op::Leaf => Vec::new(),
            Op::MatMul(a, b) | Op::Add(a, b) | Op::AddRowBias(a, b) | Op::Mul(a, b) => vec![a, b],
            Op::Scale(x, _)
            | Op::Sigmoid(x)
            | Op::Tanh(x)
            | Op::Relu(x)
            | Op::Softmax(x)
            | Op::LogSoftmax(x)
            | Op::Slice(x, _)
            | Op::Reshape(x)
            | Op::Row(x, _)
            | Op::Sum(x)
            | Op::Pick(x, _)
            | Op::Mask(x, _) => vec![x],
            Op::Concat(parts) | Op::Stack(parts) => parts.iter().collect(),
        }
    }
}

impl<T: Scalar> Clone for Tensor<T> {
    fn clone(&self) -> Self {
        Tensor {
            node: Rc::clone(&self.node),
        }
    }
}

impl<T: Scalar> fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.node.shape)
            .field("data", &self.node.data.borrow())
            .field("requires_grad", &self.node.requires_grad)
            .finish()
    }
}

fn check_shape(shape: &[usize], len: usize) -> Result<()> {
    if shape.is_empty() || shape.contains(&0) {
        return Err(Error::Domain(format!("shape {shape:?} must have positive dims")));
    }
    let numel: usize = shape.iter().product();
    if numel != len {
        return Err(Error::Domain(format!(
            "shape {shape:?} needs {numel} values, got {len}"
        )));
    }
    Ok(())
}

impl<T: Scalar> Tensor<T> {
    fn build(shape: Vec<usize>, data: Vec<T>, requires_grad: bool, op: Op<T>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Tensor {
            node: Rc::new(Node {
                id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
                shape,
                data: RefCell::new(data),
                grad: RefCell::new(None),
                requires_grad,
                op,
            }),
        }
    }

    /// Result of an operation: records `op` only when some parent needs a
    /// gradient, otherwise the result is a plain constant.
    fn from_op(shape: Vec<usize>, data: Vec<T>, op: Op<T>) -> Self {
        let requires_grad = op.parents().iter().any(|p| p.requires_grad());
        if requires_grad {
            Self::build(shape, data, true, op)
        } else {
            Self::build(shape, data, false, Op::Leaf)
        }
    }

    /// A constant tensor (no gradient).
    pub fn new(shape: &[usize], data: Vec<T>) -> Result<Self> {
        check_shape(shape, data.len())?;
        Ok(Self::build(shape.to_vec(), data, false, Op::Leaf))
    }

    /// A trainable leaf.
    pub fn param(shape: &[usize], data: Vec<T>) -> Result<Self> {
        check_shape(shape, data.len())?;
        Ok(Self::build(shape.to_vec(), data, true, Op::Leaf))
    }

    pub fn from_vec(data: Vec<T>) -> Result<Self> {
        let n = data.len();
        Self::new(&[n], data)
    }

    pub fn scalar(value: T) -> Self {
        Self::build(vec![1], vec![value], false, Op::Leaf)
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        let n = shape.iter().product();
        Self::new(shape, vec![T::zero(); n])
    }

    pub fn shape(&self) -> &[usize] {
        &self.node.shape
    }

    pub fn numel(&self) -> usize {
        self.node.shape.iter().product()
    }

    pub fn requires_grad(&self) -> bool {
        self.node.requires_grad
    }

    pub fn data(&self) -> Ref<'_, Vec<T>> {
        self.node.data.borrow()
    }

    /// Mutable access to the values, for optimizers and finite differences.
    pub fn data_mut(&self) -> RefMut<'_, Vec<T>> {
        self.node.data.borrow_mut()
    }

    pub fn to_vec(&self) -> Vec<T> {
        self.node.data.borrow().clone()
    }

    /// The single value of a one-element tensor.
    pub fn item(&self) -> Result<T> {
        if self.numel() != 1 {
            return Err(Error::Domain(format!(
                "item() on tensor of shape {:?}",
                self.shape()
            )));
        }
        Ok(self.node.data.borrow()[0])
    }

    /// Accumulated gradient, if any backward pass reached this tensor.
    pub fn grad(&self) -> Option<Vec<T>> {
        self.node.grad.borrow().clone()
    }

    pub fn zero_grad(&self) {
        *self.node.grad.borrow_mut() = None;
    }

    pub(crate) fn set_grad(&self, g: Vec<T>) {
        debug_assert_eq!(g.len(), self.numel());
        *self.node.grad.borrow_mut() = Some(g);
    }

    pub fn same_node(&self, other: &Tensor<T>) -> bool {
        Rc::ptr_eq(&self.node, &other.node)
    }

    fn accumulate_grad(&self, g: &[T]) {
        let mut slot = self.node.grad.borrow_mut();
        match slot.as_mut() {
            Some(acc) => acc.iter_mut().zip(g).for_each(|(a, &b)| *a += b),
            None => *slot = Some(g.to_vec()),
        }
    }

    fn unary(&self, op: Op<T>, f: impl Fn(T) -> T) -> Self {
        let data = self.data().iter().map(|&v| f(v)).collect();
        Self::from_op(self.shape().to_vec(), data, op)
    }

    fn same_shape(&self, other: &Self, op: &'static str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::Dimension {
                op,
                left: self.shape().to_vec(),
                right: other.shape().to_vec(),
            });
        }
        Ok(())
    }

    /// Matrix product. `self` is `[m, k]`; `rhs` is `[k, n]` (result `[m, n]`)
    /// or a vector `[k]` (result `[m]`).
    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        let (m, k) = match self.shape() {
            [m, k] => (*m, *k),
            _ => {
                return Err(Error::Dimension {
                    op: "matmul",
                    left: self.shape().to_vec(),
                    right: rhs.shape().to_vec(),
                })
            }
        };
        let (k2, n, out_shape) = match rhs.shape() {
            [k2] => (*k2, 1, vec![m]),
            [k2, n] => (*k2, *n, vec![m, *n]),
            _ => (0, 0, Vec::new()),
        };
        if k2 != k || out_shape.is_empty() {
            return Err(Error::Dimension {
                op: "matmul",
                left: self.shape().to_vec(),
                right: rhs.shape().to_vec(),
            });
        }
        let a = self.data();
        let b = rhs.data();
        let mut out = vec![T::zero(); m * n];
        for i in 0..m {
            let a_row = &a[i * k..(i + 1) * k];
            let out_row = &mut out[i * n..(i + 1) * n];
            for (p, &av) in a_row.iter().enumerate() {
                if av == T::zero() {
                    continue;
                }
                let b_row = &b[p * n..(p + 1) * n];
                for (o, &bv) in out_row.iter_mut().zip(b_row) {
                    *o += av * bv;
                }
            }
        }
        drop(a);
        drop(b);
        Ok(Self::from_op(out_shape, out, Op::MatMul(self.clone(), rhs.clone())))
    }

    pub fn add(&self, rhs: &Self) -> Result<Self> {
        self.same_shape(rhs, "add")?;
        let data = self.data().iter().zip(rhs.data().iter()).map(|(&a, &b)| a + b).collect();
        Ok(Self::from_op(self.shape().to_vec(), data, Op::Add(self.clone(), rhs.clone())))
    }

    /// Adds a bias vector `[n]` to every row of `self` (`[m, n]` or `[n]`).
    pub fn add_row_bias(&self, bias: &Self) -> Result<Self> {
        let n = *self.shape().last().expect("shape is nonempty");
        if bias.shape() != [n] || self.shape().len() > 2 {
            return Err(Error::Dimension {
                op: "add_row_bias",
                left: self.shape().to_vec(),
                right: bias.shape().to_vec(),
            });
        }
        let b = bias.data();
        let data = self
            .data()
            .chunks(n)
            .flat_map(|row| row.iter().zip(b.iter()).map(|(&x, &y)| x + y).collect::<Vec<_>>())
            .collect();
        drop(b);
        Ok(Self::from_op(
            self.shape().to_vec(),
            data,
            Op::AddRowBias(self.clone(), bias.clone()),
        ))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&self, rhs: &Self) -> Result<Self> {
        self.same_shape(rhs, "mul")?;
        let data = self.data().iter().zip(rhs.data().iter()).map(|(&a, &b)| a * b).collect();
        Ok(Self::from_op(self.shape().to_vec(), data, Op::Mul(self.clone(), rhs.clone())))
    }

    pub fn scale(&self, factor: T) -> Self {
        self.unary(Op::Scale(self.clone(), factor), |v| v * factor)
    }

    pub fn sigmoid(&self) -> Self {
        self.unary(Op::Sigmoid(self.clone()), sigmoid)
    }

    pub fn tanh(&self) -> Self {
        self.unary(Op::Tanh(self.clone()), |v| v.tanh())
    }

    pub fn relu(&self) -> Self {
        self.unary(Op::Relu(self.clone()), |v| if v > T::zero() { v } else { T::zero() })
    }

    fn vector_len(&self, op: &'static str) -> Result<usize> {
        match self.shape() {
            [n] => Ok(*n),
            other => Err(Error::Domain(format!("{op} expects a vector, got shape {other:?}"))),
        }
    }

    /// Numerically stable softmax of a vector.
    pub fn softmax(&self) -> Result<Self> {
        self.vector_len("softmax")?;
        let data = softmax_values(&self.data());
        Ok(Self::from_op(self.shape().to_vec(), data, Op::Softmax(self.clone())))
    }

    pub fn log_softmax(&self) -> Result<Self> {
        self.vector_len("log_softmax")?;
        let x = self.data();
        let max = x.iter().copied().fold(T::neg_infinity(), T::max);
        let log_z = max + x.iter().map(|&v| (v - max).exp()).sum::<T>().ln();
        let data = x.iter().map(|&v| v - log_z).collect();
        drop(x);
        Ok(Self::from_op(self.shape().to_vec(), data, Op::LogSoftmax(self.clone())))
    }

    /// Concatenates vectors end to end.
    pub fn concat(parts: &[Self]) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::Domain("concat of an empty list".into()));
        }
        let mut data = Vec::new();
        for p in parts {
            p.vector_len("concat")?;
            data.extend_from_slice(&p.data());
        }
        let n = data.len();
        Ok(Self::from_op(vec![n], data, Op::Concat(parts.to_vec())))
    }

    /// Stacks equal-length vectors as the rows of a matrix.
    pub fn stack(rows: &[Self]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::Domain("stack of an empty list".into()))?;
        let d = first.vector_len("stack")?;
        let mut data = Vec::with_capacity(d * rows.len());
        for r in rows {
            if r.shape() != [d] {
                return Err(Error::Dimension {
                    op: "stack",
                    left: first.shape().to_vec(),
                    right: r.shape().to_vec(),
                });
            }
            data.extend_from_slice(&r.data());
        }
        Ok(Self::from_op(vec![rows.len(), d], data, Op::Stack(rows.to_vec())))
    }

    /// A contiguous sub-vector `[start, start + len)`.
    pub fn slice(&self, start: usize, len: usize) -> Result<Self> {
        let n = self.vector_len("slice")?;
        if len == 0 || start + len > n {
            return Err(Error::Domain(format!(
                "slice [{start}, {}) out of range for length {n}",
                start + len
            )));
        }
        let data = self.data()[start..start + len].to_vec();
        Ok(Self::from_op(vec![len], data, Op::Slice(self.clone(), start)))
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Self> {
        check_shape(shape, self.numel())?;
        Ok(Self::from_op(shape.to_vec(), self.to_vec(), Op::Reshape(self.clone())))
    }

    /// Row `index` of a matrix, as a vector.
    pub fn row(&self, index: usize) -> Result<Self> {
        let (rows, cols) = match self.shape() {
            [r, c] => (*r, *c),
            other => return Err(Error::Domain(format!("row() expects a matrix, got {other:?}"))),
        };
        if index >= rows {
            return Err(Error::Lookup { index, size: rows });
        }
        let data = self.data()[index * cols..(index + 1) * cols].to_vec();
        Ok(Self::from_op(vec![cols], data, Op::Row(self.clone(), index)))
    }

    /// Sum of all elements, as a one-element tensor.
    pub fn sum(&self) -> Self {
        let s = self.data().iter().copied().sum();
        Self::from_op(vec![1], vec![s], Op::Sum(self.clone()))
    }

    /// Element `index` of a vector, as a one-element tensor.
    pub fn pick(&self, index: usize) -> Result<Self> {
        let n = self.vector_len("pick")?;
        if index >= n {
            return Err(Error::Lookup { index, size: n });
        }
        let v = self.data()[index];
        Ok(Self::from_op(vec![1], vec![v], Op::Pick(self.clone(), index)))
    }

    /// Elementwise product with a constant mask (used by dropout).
    pub fn mask(&self, mask: Vec<T>) -> Result<Self> {
        if mask.len() != self.numel() {
            return Err(Error::Dimension {
                op: "mask",
                left: self.shape().to_vec(),
                right: vec![mask.len()],
            });
        }
        let data = self.data().iter().zip(&mask).map(|(&a, &b)| a * b).collect();
        Ok(Self::from_op(self.shape().to_vec(), data, Op::Mask(self.clone(), mask)))
    }

    /// Nodes that need a gradient, parents before children.
    fn topo_order(&self) -> Vec<Tensor<T>> {
        let mut order = Vec::new();
        let mut visited = HashSet::new();
        let mut stack = vec![(self.clone(), false)];
        while let Some((t, expanded)) = stack.pop() {
            if expanded {
                order.push(t);
                continue;
            }
            if !visited.insert(t.node.id) {
                continue;
            }
            stack.push((t.clone(), true));
            for p in t.node.op.parents() {
                if p.requires_grad() && !visited.contains(&p.node.id) {
                    stack.push((p.clone(), false));
                }
            }
        }
        order
    }

    /// Reverse-mode sweep from a scalar loss. Gradients are added to the
    /// `grad` buffer of every reachable tensor that requires one; calling
    /// this twice without [`Tensor::zero_grad`] accumulates.
    pub fn backward(&self) -> Result<()> {
        if self.numel() != 1 {
            return Err(Error::Domain(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape()
            )));
        }
        if !self.requires_grad() {
            return Ok(());
        }
        let order = self.topo_order();
        let position: HashMap<u64, usize> =
            order.iter().enumerate().map(|(i, t)| (t.node.id, i)).collect();
        let mut grads: Vec<Option<Vec<T>>> = vec![None; order.len()];
        grads[order.len() - 1] = Some(vec![T::one()]);

        for pos in (0..order.len()).rev() {
            let Some(g) = grads[pos].take() else {
                continue;
            };
            let node = &order[pos];
            node.accumulate_grad(&g);
            node.propagate(&g, &mut |parent, contribution| {
                let slot = &mut grads[position[&parent.node.id]];
                match slot {
                    Some(acc) => acc.iter_mut().zip(contribution).for_each(|(a, b)| *a += b),
                    None => *slot = Some(contribution),
                }
            });
        }
        Ok(())
    }

    /// Pushes this node's gradient `g` to each parent that requires one.
    fn propagate(&self, g: &[T], emit: &mut dyn FnMut(&Tensor<T>, Vec<T>)) {
        let out = self.node.data.borrow();
        match &self.node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = (a.shape()[0], a.shape()[1]);
                let n = if b.shape().len() == 1 { 1 } else { b.shape()[1] };
                if a.requires_grad() {
                    let bd = b.data();
                    let mut ga = vec![T::zero(); m * k];
                    for i in 0..m {
                        let g_row = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            let b_row = &bd[p * n..(p + 1) * n];
                            ga[i * k + p] = g_row.iter().zip(b_row).map(|(&x, &y)| x * y).sum();
                        }
                    }
                    drop(bd);
                    emit(a, ga);
                }
                if b.requires_grad() {
                    let ad = a.data();
                    let mut gb = vec![T::zero(); k * n];
                    for i in 0..m {
                        let g_row = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            let av = ad[i * k + p];
                            for (o, &gv) in gb[p * n..(p + 1) * n].iter_mut().zip(g_row) {
                                *o += av * gv;
                            }
                        }
                    }
                    drop(ad);
                    emit(b, gb);
                }
            }
            Op::Add(a, b) => {
                if a.requires_grad() {
                    emit(a, g.to_vec());
                }
                if b.requires_grad() {
                    emit(b, g.to_vec());
                }
            }
            Op::AddRowBias(x, bias) => {
                if x.requires_grad() {
                    emit(x, g.to_vec());
                }
                if bias.requires_grad() {
                    let n = bias.numel();
                    let mut gb = vec![T::zero(); n];
                    for row in g.chunks(n) {
                        gb.iter_mut().zip(row).for_each(|(a, &b)| *a += b);
                    }
                    emit(bias, gb);
                }
            }
            Op::Mul(a, b) => {
                if a.requires_grad() {
                    let ga = g.iter().zip(b.data().iter()).map(|(&x, &y)| x * y).collect();
                    emit(a, ga);
                }
                if b.requires_grad() {
                    let gb = g.iter().zip(a.data().iter()).map(|(&x, &y)| x * y).collect();
                    emit(b, gb);
                }
            }
            Op::Scale(x, factor) => emit(x, g.iter().map(|&v| v * *factor).collect()),
            Op::Sigmoid(x) => {
                let gx = g
                    .iter()
                    .zip(out.iter())
                    .map(|(&gv, &y)| gv * y * (T::one() - y))
                    .collect();
                emit(x, gx);
            }
            Op::Tanh(x) => {
                let gx = g
                    .iter()
                    .zip(out.iter())
                    .map(|(&gv, &y)| gv * (T::one() - y * y))
                    .collect();
                emit(x, gx);
            }
            Op::Relu(x) => {
                let gx = g
                    .iter()
                    .zip(x.data().iter())
                    .map(|(&gv, &v)| if v > T::zero() { gv } else { T::zero() })
                    .collect();
                emit(x, gx);
            }
            Op::Softmax(x) => {
                let dot: T = g.iter().zip(out.iter()).map(|(&a, &b)| a * b).sum();
                let gx = g.iter().zip(out.iter()).map(|(&gv, &y)| y * (gv - dot)).collect();
                emit(x, gx);
            }
            Op::LogSoftmax(x) => {
                let total: T = g.iter().copied().sum();
                let gx = g
                    .iter()
                    .zip(out.iter())
                    .map(|(&gv, &ly)| gv - ly.exp() * total)
                    .collect();
                emit(x, gx);
            }
            Op::Concat(parts) | Op::Stack(parts) => {
                let mut offset = 0;
                for p in parts {
                    let n = p.numel();
                    if p.requires_grad() {
                        emit(p, g[offset..offset + n].to_vec());
                    }
                    offset += n;
                }
            }
            Op::Slice(x, start) => {
                let mut gx = vec![T::zero(); x.numel()];
                gx[*start..*start + g.len()].copy_from_slice(g);
                emit(x, gx);
            }
            Op::Reshape(x) => emit(x, g.to_vec()),
            Op::Row(table, index) => {
                let cols = g.len();
                let mut gt = vec![T::zero(); table.numel()];
                gt[index * cols..(index + 1) * cols].copy_from_slice(g);
                emit(table, gt);
            }
            Op::Sum(x) => emit(x, vec![g[0]; x.numel()]),
            Op::Pick(x, index) => {
                let mut gx = vec![T::zero(); x.numel()];
                gx[*index] = g[0];
                emit(x, gx);
            }
            Op::Mask(x, mask) => emit(x, g.iter().zip(mask).map(|(&a, &b)| a * b).collect()),
        }
    }
}

pub(crate) fn sigmoid<T: Scalar>(v: T) -> T {
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}

fn softmax_values<T: Scalar>(x: &[T]) -> Vec<T> {
    let max = x.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = x.iter().map(|&v| (v - max).exp()).collect();
    let z: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / z).collect()
}
