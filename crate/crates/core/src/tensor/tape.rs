use super::kernels::{self, ConvDims};
use super::{Activation, Tensor};
use crate::error::{shape_err, Error, Result};
use crate::scalar::Scalar;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op<T> {
    Leaf,
    MatMul {
        a: Var,
        b: Var,
    },
    Add {
        a: Var,
        b: Var,
    },
    AddRowBias {
        a: Var,
        bias: Var,
    },
    Sub {
        a: Var,
        b: Var,
    },
    Hadamard {
        a: Var,
        b: Var,
    },
    ScaleShift {
        x: Var,
        scale: T,
    },
    Activate {
        x: Var,
        kind: Activation,
    },
    Conv {
        input: Var,
        kernels: Var,
        bias: Var,
        dims: ConvDims,
    },
    MaxPool {
        input: Var,
        argmax: Vec<usize>,
    },
    Concat {
        a: Var,
        b: Var,
        outer: usize,
        a_inner: usize,
        b_inner: usize,
    },
    Reshape {
        x: Var,
    },
    Row {
        x: Var,
        index: usize,
    },
    Stack {
        rows: Vec<Var>,
    },
    Mask {
        x: Var,
        mask: Vec<T>,
    },
    Sum {
        x: Var,
    },
    Mse {
        pred: Var,
        target: Var,
    },
}

#[derive(Clone, Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Wengert list for reverse-mode differentiation.
///
/// Values are appended in evaluation order, so node order is always a valid
/// topological order and [`Tape::backward`] is a single reverse sweep.
#[derive(Clone, Debug, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

fn accumulate<T: Scalar>(slot: &mut Option<Vec<T>>, len: usize, f: impl FnOnce(&mut [T])) {
    let buf = slot.get_or_insert_with(|| vec![T::zero(); len]);
    f(buf);
}

fn add_into<T: Scalar>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d = *d + s;
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, inputs: &[Var]) -> Var {
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.push_with(value, op, requires_grad)
    }

    fn push_with(&mut self, mut value: Tensor<T>, op: Op<T>, requires_grad: bool) -> Var {
        value.clear_grad();
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Trainable leaf: receives a gradient on [`Tape::backward`].
    pub fn param(&mut self, value: Tensor<T>) -> Var {
        self.push_with(value, Op::Leaf, true)
    }

    /// Non-trainable leaf.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push_with(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Gradient of the last [`Tape::backward`] loss with respect to `v`.
    pub fn grad(&self, v: Var) -> Option<&[T]> {
        self.nodes[v.0].value.grad()
    }

    /// Matrix product. `b` may be rank 1, in which case it is a column
    /// vector and the result is rank 1.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        let (m, k, n, out_shape) = match (sa.as_slice(), sb.as_slice()) {
            ([m, k], [k2, n]) if k == k2 => (*m, *k, *n, vec![*m, *n]),
            ([m, k], [k2]) if k == k2 => (*m, *k, 1, vec![*m]),
            _ => return Err(shape_err(format!("matmul of {sa:?} and {sb:?}"))),
        };
        let mut out = vec![T::zero(); m * n];
        kernels::gemm(
            self.value(a).data(),
            self.value(b).data(),
            &mut out,
            m,
            k,
            n,
        );
        let value = Tensor::new(out_shape, out)?;
        Ok(self.push(value, Op::MatMul { a, b }, &[a, b]))
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(shape_err(format!(
                "{what} of {:?} and {:?}",
                self.shape(a),
                self.shape(b)
            )));
        }
        Ok(())
    }

    fn zip_values(&self, a: Var, b: Var, f: impl Fn(T, T) -> T) -> Result<Tensor<T>> {
        let (va, vb) = (self.value(a), self.value(b));
        let data = va
            .data()
            .iter()
            .zip(vb.data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        Tensor::new(va.shape().to_vec(), data)
    }

    /// Elementwise sum of equal shapes. A rank-2 `a` of shape `[m, n]` with a
    /// rank-1 `b` of length `m` broadcasts `b[i]` across row `i`.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() == 2 && sb.len() == 1 && sa[0] == sb[0] {
            let n = sa[1];
            let bias = self.value(b).data().to_vec();
            let mut value = self.value(a).clone();
            for (i, row) in value.data_mut().chunks_mut(n).enumerate() {
                for v in row {
                    *v = *v + bias[i];
                }
            }
            return Ok(self.push(value, Op::AddRowBias { a, bias: b }, &[a, b]));
        }
        self.same_shape(a, b, "add")?;
        let value = self.zip_values(a, b, |x, y| x + y)?;
        Ok(self.push(value, Op::Add { a, b }, &[a, b]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "sub")?;
        let value = self.zip_values(a, b, |x, y| x - y)?;
        Ok(self.push(value, Op::Sub { a, b }, &[a, b]))
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "hadamard")?;
        let value = self.zip_values(a, b, |x, y| x * y)?;
        Ok(self.push(value, Op::Hadamard { a, b }, &[a, b]))
    }

    /// `scale * x + shift`, elementwise.
    pub fn scale_shift(&mut self, x: Var, scale: T, shift: T) -> Var {
        let value = self.value(x).map(|v| scale * v + shift);
        self.push(value, Op::ScaleShift { x, scale }, &[x])
    }

    /// `1 - x`, elementwise.
    pub fn one_minus(&mut self, x: Var) -> Var {
        self.scale_shift(x, -T::one(), T::one())
    }

    pub fn activate(&mut self, x: Var, kind: Activation) -> Var {
        if kind == Activation::Linear {
            return x;
        }
        let value = self.value(x).map(|v| kind.apply(v));
        self.push(value, Op::Activate { x, kind }, &[x])
    }

    pub fn conv2d(&mut self, input: Var, kernels: Var, bias: Var) -> Result<Var> {
        let dims = kernels::conv2d_dims(self.shape(input), self.shape(kernels), self.shape(bias))?;
        let (_, oh, ow) = dims.out();
        self.conv(input, kernels, bias, dims, vec![dims.o, oh, ow])
    }

    pub fn conv3d(&mut self, input: Var, kernels: Var, bias: Var) -> Result<Var> {
        let dims = kernels::conv3d_dims(self.shape(input), self.shape(kernels), self.shape(bias))?;
        let (od, oh, ow) = dims.out();
        self.conv(input, kernels, bias, dims, vec![dims.o, od, oh, ow])
    }

    fn conv(
        &mut self,
        input: Var,
        kernels: Var,
        bias: Var,
        dims: ConvDims,
        shape: Vec<usize>,
    ) -> Result<Var> {
        let out = kernels::conv_forward(
            &dims,
            self.value(input).data(),
            self.value(kernels).data(),
            self.value(bias).data(),
        );
        let value = Tensor::new(shape, out)?;
        Ok(self.push(
            value,
            Op::Conv {
                input,
                kernels,
                bias,
                dims,
            },
            &[input, kernels, bias],
        ))
    }

    pub fn max_pool3d(&mut self, input: Var) -> Result<Var> {
        let (shape, out, argmax) =
            kernels::pool_forward(self.shape(input), self.value(input).data())?;
        let value = Tensor::new(shape, out)?;
        Ok(self.push(value, Op::MaxPool { input, argmax }, &[input]))
    }

    pub fn concat(&mut self, a: Var, b: Var, axis: usize) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        let compatible = sa.len() == sb.len()
            && axis < sa.len()
            && sa
                .iter()
                .zip(&sb)
                .enumerate()
                .all(|(i, (x, y))| i == axis || x == y);
        if !compatible {
            return Err(shape_err(format!(
                "concat of {sa:?} and {sb:?} along axis {axis}"
            )));
        }
        let outer: usize = sa[..axis].iter().product();
        let a_inner = self.value(a).len() / outer;
        let b_inner = self.value(b).len() / outer;
        let (da, db) = (self.value(a).data(), self.value(b).data());
        let mut out = Vec::with_capacity(da.len() + db.len());
        for i in 0..outer {
            out.extend_from_slice(&da[i * a_inner..(i + 1) * a_inner]);
            out.extend_from_slice(&db[i * b_inner..(i + 1) * b_inner]);
        }
        let mut shape = sa;
        shape[axis] += sb[axis];
        let value = Tensor::new(shape, out)?;
        Ok(self.push(
            value,
            Op::Concat {
                a,
                b,
                outer,
                a_inner,
                b_inner,
            },
            &[a, b],
        ))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(x).reshaped(shape.to_vec())?;
        Ok(self.push(value, Op::Reshape { x }, &[x]))
    }

    pub fn flatten(&mut self, x: Var) -> Result<Var> {
        let n = self.value(x).len();
        self.reshape(x, &[n])
    }

    /// Row `index` of a rank-2 value, as a rank-1 value.
    pub fn row(&mut self, x: Var, index: usize) -> Result<Var> {
        let shape = self.shape(x);
        if shape.len() != 2 || index >= shape[0] {
            return Err(shape_err(format!("row {index} of {shape:?}")));
        }
        let value = Tensor::vector(self.value(x).row(index).to_vec());
        Ok(self.push(value, Op::Row { x, index }, &[x]))
    }

    /// Stack equally long rank-1 values into a rank-2 value.
    pub fn stack(&mut self, rows: &[Var]) -> Result<Var> {
        let first = rows
            .first()
            .ok_or_else(|| Error::Contract("stack of zero rows".into()))?;
        let n = self.value(*first).len();
        let mut data = Vec::with_capacity(n * rows.len());
        for &r in rows {
            if self.shape(r) != [n] {
                return Err(shape_err(format!(
                    "stack row of shape {:?}, expected [{n}]",
                    self.shape(r)
                )));
            }
            data.extend_from_slice(self.value(r).data());
        }
        let value = Tensor::new(vec![rows.len(), n], data)?;
        Ok(self.push(
            value,
            Op::Stack {
                rows: rows.to_vec(),
            },
            rows,
        ))
    }

    /// Multiply elementwise by a constant mask (dropout).
    pub fn mask(&mut self, x: Var, mask: Vec<T>) -> Result<Var> {
        if mask.len() != self.value(x).len() {
            return Err(shape_err(format!(
                "mask of length {} for {:?}",
                mask.len(),
                self.shape(x)
            )));
        }
        let data = self
            .value(x)
            .data()
            .iter()
            .zip(&mask)
            .map(|(&v, &m)| v * m)
            .collect();
        let value = Tensor::new(self.shape(x).to_vec(), data)?;
        Ok(self.push(value, Op::Mask { x, mask }, &[x]))
    }

    /// Sum of all elements, accumulated in row-major order.
    pub fn sum(&mut self, x: Var) -> Var {
        let s = self
            .value(x)
            .data()
            .iter()
            .fold(T::zero(), |acc, &v| acc + v);
        self.push(Tensor::scalar(s), Op::Sum { x }, &[x])
    }

    /// Mean of squared elementwise differences.
    pub fn mse(&mut self, pred: Var, target: Var) -> Result<Var> {
        self.same_shape(pred, target, "mse")?;
        let (p, t) = (self.value(pred).data(), self.value(target).data());
        let n = T::from_usize_lossy(p.len());
        let s = p
            .iter()
            .zip(t)
            .fold(T::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b));
        Ok(self.push(
            Tensor::scalar(s / n),
            Op::Mse { pred, target },
            &[pred, target],
        ))
    }

    /// Reverse sweep from a scalar `loss`. Gradients accumulate additively
    /// across fan-out and are readable through [`Tape::grad`] afterwards.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if !self.value(loss).is_scalar() {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Vec<T>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![T::one()]);

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }

        for (node, g) in self.nodes.iter_mut().zip(grads) {
            match g {
                Some(g) if node.requires_grad => node.value.set_grad(g)?,
                _ => node.value.clear_grad(),
            }
        }
        Ok(())
    }

    fn propagate(&self, i: usize, g: &[T], grads: &mut [Option<Vec<T>>]) {
        let needs = |v: Var| self.nodes[v.0].requires_grad;
        let len = |v: Var| self.nodes[v.0].value.len();
        let val = |v: Var| self.nodes[v.0].value.data();
        let out = self.nodes[i].value.data();

        match &self.nodes[i].op {
            Op::Leaf => {}
            &Op::MatMul { a, b } => {
                let sa = self.shape(a);
                let (m, k) = (sa[0], sa[1]);
                let n = len(b) / k;
                if needs(a) {
                    let bv = val(b);
                    accumulate(&mut grads[a.0], m * k, |ga| {
                        for r in 0..m {
                            for l in 0..k {
                                let mut s = T::zero();
                                for j in 0..n {
                                    s = s + g[r * n + j] * bv[l * n + j];
                                }
                                ga[r * k + l] = ga[r * k + l] + s;
                            }
                        }
                    });
                }
                if needs(b) {
                    let av = val(a);
                    accumulate(&mut grads[b.0], k * n, |gb| {
                        for r in 0..m {
                            for l in 0..k {
                                let a_rl = av[r * k + l];
                                for j in 0..n {
                                    gb[l * n + j] = gb[l * n + j] + a_rl * g[r * n + j];
                                }
                            }
                        }
                    });
                }
            }
            &Op::Add { a, b } => {
                for v in [a, b] {
                    if needs(v) {
                        accumulate(&mut grads[v.0], g.len(), |gv| add_into(gv, g));
                    }
                }
            }
            &Op::AddRowBias { a, bias } => {
                if needs(a) {
                    accumulate(&mut grads[a.0], g.len(), |ga| add_into(ga, g));
                }
                if needs(bias) {
                    let m = len(bias);
                    let n = g.len() / m;
                    accumulate(&mut grads[bias.0], m, |gb| {
                        for (r, row) in g.chunks(n).enumerate() {
                            gb[r] = row.iter().fold(gb[r], |acc, &x| acc + x);
                        }
                    });
                }
            }
            &Op::Sub { a, b } => {
                if needs(a) {
                    accumulate(&mut grads[a.0], g.len(), |ga| add_into(ga, g));
                }
                if needs(b) {
                    accumulate(&mut grads[b.0], g.len(), |gb| {
                        for (d, &s) in gb.iter_mut().zip(g) {
                            *d = *d - s;
                        }
                    });
                }
            }
            &Op::Hadamard { a, b } => {
                for (v, other) in [(a, b), (b, a)] {
                    if needs(v) {
                        let ov = val(other);
                        accumulate(&mut grads[v.0], g.len(), |gv| {
                            for ((d, &s), &o) in gv.iter_mut().zip(g).zip(ov) {
                                *d = *d + s * o;
                            }
                        });
                    }
                }
            }
            &Op::ScaleShift { x, scale } => {
                accumulate(&mut grads[x.0], g.len(), |gx| {
                    for (d, &s) in gx.iter_mut().zip(g) {
                        *d = *d + s * scale;
                    }
                });
            }
            &Op::Activate { x, kind } => {
                accumulate(&mut grads[x.0], g.len(), |gx| {
                    for ((d, &s), &y) in gx.iter_mut().zip(g).zip(out) {
                        *d = *d + s * kind.derivative_from_output(y);
                    }
                });
            }
            &Op::Conv {
                input,
                kernels: k,
                bias,
                dims,
            } => {
                let cg = kernels::conv_backward(&dims, val(input), val(k), g);
                for (v, part) in [(input, &cg.input), (k, &cg.kernels), (bias, &cg.bias)] {
                    if needs(v) {
                        accumulate(&mut grads[v.0], part.len(), |gv| add_into(gv, part));
                    }
                }
            }
            Op::MaxPool { input, argmax } => {
                let input = *input;
                accumulate(&mut grads[input.0], len(input), |gi| {
                    for (&s, &j) in g.iter().zip(argmax) {
                        gi[j] = gi[j] + s;
                    }
                });
            }
            &Op::Concat {
                a,
                b,
                outer,
                a_inner,
                b_inner,
            } => {
                let stride = a_inner + b_inner;
                if needs(a) {
                    accumulate(&mut grads[a.0], outer * a_inner, |ga| {
                        for r in 0..outer {
                            add_into(
                                &mut ga[r * a_inner..(r + 1) * a_inner],
                                &g[r * stride..r * stride + a_inner],
                            );
                        }
                    });
                }
                if needs(b) {
                    accumulate(&mut grads[b.0], outer * b_inner, |gb| {
                        for r in 0..outer {
                            add_into(
                                &mut gb[r * b_inner..(r + 1) * b_inner],
                                &g[r * stride + a_inner..(r + 1) * stride],
                            );
                        }
                    });
                }
            }
            &Op::Reshape { x } => {
                accumulate(&mut grads[x.0], g.len(), |gx| add_into(gx, g));
            }
            &Op::Row { x, index } => {
                let n = g.len();
                accumulate(&mut grads[x.0], len(x), |gx| {
                    add_into(&mut gx[index * n..(index + 1) * n], g);
                });
            }
            Op::Stack { rows } => {
                let n = g.len() / rows.len();
                for (r, &v) in rows.iter().enumerate() {
                    if needs(v) {
                        accumulate(&mut grads[v.0], n, |gv| {
                            add_into(gv, &g[r * n..(r + 1) * n])
                        });
                    }
                }
            }
            Op::Mask { x, mask } => {
                accumulate(&mut grads[x.0], g.len(), |gx| {
                    for ((d, &s), &m) in gx.iter_mut().zip(g).zip(mask) {
                        *d = *d + s * m;
                    }
                });
            }
            &Op::Sum { x } => {
                let s = g[0];
                accumulate(&mut grads[x.0], len(x), |gx| {
                    for d in gx {
                        *d = *d + s;
                    }
                });
            }
            &Op::Mse { pred, target } => {
                let (p, t) = (val(pred), val(target));
                let scale = g[0] * T::lit(2.0) / T::from_usize_lossy(p.len());
                if needs(pred) {
                    accumulate(&mut grads[pred.0], p.len(), |gp| {
                        for ((d, &a), &b) in gp.iter_mut().zip(p).zip(t) {
                            *d = *d + scale * (a - b);
                        }
                    });
                }
                if needs(target) {
                    accumulate(&mut grads[target.0], t.len(), |gt| {
                        for ((d, &a), &b) in gt.iter_mut().zip(p).zip(t) {
                            *d = *d - scale * (a - b);
                        }
                    });
                }
            }
        }
    }
}
