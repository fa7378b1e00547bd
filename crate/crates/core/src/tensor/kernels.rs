//! Slice-level compute kernels shared by the plain and taped tensor APIs.
//! Summation orders are fixed so results never depend on scheduling.

use super::Tensor;
use crate::error::{shape_err, Result};
use crate::scalar::Scalar;

pub(crate) fn gemm<T: Scalar>(a: &[T], b: &[T], out: &mut [T], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for (l, &av) in a[i * k..(i + 1) * k].iter().enumerate() {
            if av == T::zero() {
                continue;
            }
            let brow = &b[l * n..(l + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o = *o + av * bv;
            }
        }
    }
}

/// Dimensions of a volumetric cross-correlation: input `[c, d, h, w]`,
/// kernels `[o, c, r, p, q]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct ConvDims {
    pub c: usize,
    pub d: usize,
    pub h: usize,
    pub w: usize,
    pub o: usize,
    pub r: usize,
    pub p: usize,
    pub q: usize,
}

impl ConvDims {
    pub fn out(&self) -> (usize, usize, usize) {
        (
            self.d - self.r + 1,
            self.h - self.p + 1,
            self.w - self.q + 1,
        )
    }

    pub fn out_len(&self) -> usize {
        let (a, b, c) = self.out();
        self.o * a * b * c
    }

    pub fn check(&self) -> Result<()> {
        if self.r > self.d || self.p > self.h || self.q > self.w {
            return Err(shape_err(format!(
                "kernel {}x{}x{} larger than input {}x{}x{}",
                self.r, self.p, self.q, self.d, self.h, self.w
            )));
        }
        Ok(())
    }
}

pub(crate) fn conv_forward<T: Scalar>(
    dims: &ConvDims,
    input: &[T],
    kernels: &[T],
    bias: &[T],
) -> Vec<T> {
    let ConvDims {
        c,
        d,
        h,
        w,
        o,
        r,
        p,
        q,
    } = *dims;
    let (od, oh, ow) = dims.out();
    let mut out = Vec::with_capacity(dims.out_len());
    for oc in 0..o {
        let kbase = oc * c * r * p * q;
        for x in 0..od {
            for y in 0..oh {
                for z in 0..ow {
                    let mut acc = bias[oc];
                    for ic in 0..c {
                        for dr in 0..r {
                            for dp in 0..p {
                                let ib = ((ic * d + x + dr) * h + y + dp) * w + z;
                                let kb = kbase + ((ic * r + dr) * p + dp) * q;
                                for dq in 0..q {
                                    acc = acc + kernels[kb + dq] * input[ib + dq];
                                }
                            }
                        }
                    }
                    out.push(acc);
                }
            }
        }
    }
    out
}

pub(crate) struct ConvGrads<T> {
    pub input: Vec<T>,
    pub kernels: Vec<T>,
    pub bias: Vec<T>,
}

pub(crate) fn conv_backward<T: Scalar>(
    dims: &ConvDims,
    input: &[T],
    kernels: &[T],
    grad_out: &[T],
) -> ConvGrads<T> {
    let ConvDims {
        c,
        d,
        h,
        w,
        o,
        r,
        p,
        q,
    } = *dims;
    let (od, oh, ow) = dims.out();
    let mut gi = vec![T::zero(); input.len()];
    let mut gk = vec![T::zero(); kernels.len()];
    let mut gb = vec![T::zero(); o];
    let mut idx = 0;
    for oc in 0..o {
        let kbase = oc * c * r * p * q;
        for x in 0..od {
            for y in 0..oh {
                for z in 0..ow {
                    let g = grad_out[idx];
                    idx += 1;
                    if g == T::zero() {
                        continue;
                    }
                    gb[oc] = gb[oc] + g;
                    for ic in 0..c {
                        for dr in 0..r {
                            for dp in 0..p {
                                let ib = ((ic * d + x + dr) * h + y + dp) * w + z;
                                let kb = kbase + ((ic * r + dr) * p + dp) * q;
                                for dq in 0..q {
                                    gk[kb + dq] = gk[kb + dq] + g * input[ib + dq];
                                    gi[ib + dq] = gi[ib + dq] + g * kernels[kb + dq];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    ConvGrads {
        input: gi,
        kernels: gk,
        bias: gb,
    }
}

pub(crate) fn conv2d_dims(input: &[usize], kernels: &[usize], bias: &[usize]) -> Result<ConvDims> {
    if input.len() != 3 || kernels.len() != 4 || bias.len() != 1 {
        return Err(shape_err(format!(
            "conv2d expects input [c,h,w], kernels [o,c,p,q], bias [o]; got {input:?}, {kernels:?}, {bias:?}"
        )));
    }
    if kernels[1] != input[0] || bias[0] != kernels[0] {
        return Err(shape_err(format!(
            "conv2d channel mismatch: input {input:?}, kernels {kernels:?}, bias {bias:?}"
        )));
    }
    let dims = ConvDims {
        c: input[0],
        d: 1,
        h: input[1],
        w: input[2],
        o: kernels[0],
        r: 1,
        p: kernels[2],
        q: kernels[3],
    };
    dims.check()?;
    Ok(dims)
}

pub(crate) fn conv3d_dims(input: &[usize], kernels: &[usize], bias: &[usize]) -> Result<ConvDims> {
    if input.len() != 4 || kernels.len() != 5 || bias.len() != 1 {
        return Err(shape_err(format!(
            "conv3d expects input [c,d,h,w], kernels [o,c,r,p,q], bias [o]; got {input:?}, {kernels:?}, {bias:?}"
        )));
    }
    if kernels[1] != input[0] || bias[0] != kernels[0] {
        return Err(shape_err(format!(
            "conv3d channel mismatch: input {input:?}, kernels {kernels:?}, bias {bias:?}"
        )));
    }
    let dims = ConvDims {
        c: input[0],
        d: input[1],
        h: input[2],
        w: input[3],
        o: kernels[0],
        r: kernels[2],
        p: kernels[3],
        q: kernels[4],
    };
    dims.check()?;
    Ok(dims)
}

/// Output shape and argmax indices of a non-overlapping 2x2x2 max-pool over
/// `[ch, d, h, w]`. Ties resolve to the first element in row-major order.
pub(crate) fn pool_forward<T: Scalar>(
    shape: &[usize],
    input: &[T],
) -> Result<(Vec<usize>, Vec<T>, Vec<usize>)> {
    if shape.len() != 4 {
        return Err(shape_err(format!(
            "max_pool3d expects [ch,d,h,w], got {shape:?}"
        )));
    }
    let (c, d, h, w) = (shape[0], shape[1], shape[2], shape[3]);
    if d < 2 || h < 2 || w < 2 {
        return Err(shape_err(format!(
            "max_pool3d needs every spatial dim >= 2, got {shape:?}"
        )));
    }
    let (od, oh, ow) = (d / 2, h / 2, w / 2);
    let mut out = Vec::with_capacity(c * od * oh * ow);
    let mut arg = Vec::with_capacity(c * od * oh * ow);
    for ch in 0..c {
        for x in 0..od {
            for y in 0..oh {
                for z in 0..ow {
                    let mut best_i = ((ch * d + 2 * x) * h + 2 * y) * w + 2 * z;
                    let mut best = input[best_i];
                    for dx in 0..2 {
                        for dy in 0..2 {
                            for dz in 0..2 {
                                let i = ((ch * d + 2 * x + dx) * h + 2 * y + dy) * w + 2 * z + dz;
                                if input[i] > best {
                                    best = input[i];
                                    best_i = i;
                                }
                            }
                        }
                    }
                    out.push(best);
                    arg.push(best_i);
                }
            }
        }
    }
    Ok((vec![c, od, oh, ow], out, arg))
}

/// Valid (unpadded, stride 1) 2D cross-correlation summed over input
/// channels plus a per-output-channel bias.
///
/// `input` is `[in_ch, h, w]`, `kernels` is `[out_ch, in_ch, p, q]` and the
/// result is `[out_ch, h - p + 1, w - q + 1]`.
pub fn conv2d_valid<T: Scalar>(
    input: &Tensor<T>,
    kernels: &Tensor<T>,
    bias: &Tensor<T>,
) -> Result<Tensor<T>> {
    let dims = conv2d_dims(input.shape(), kernels.shape(), bias.shape())?;
    let (_, oh, ow) = dims.out();
    let out = conv_forward(&dims, input.data(), kernels.data(), bias.data());
    Tensor::new(vec![dims.o, oh, ow], out)
}

/// Valid 3D cross-correlation: `[in_ch, d, h, w]` with `[out_ch, in_ch, r, p, q]`
/// kernels gives `[out_ch, d - r + 1, h - p + 1, w - q + 1]`.
pub fn conv3d_valid<T: Scalar>(
    input: &Tensor<T>,
    kernels: &Tensor<T>,
    bias: &Tensor<T>,
) -> Result<Tensor<T>> {
    let dims = conv3d_dims(input.shape(), kernels.shape(), bias.shape())?;
    let (od, oh, ow) = dims.out();
    let out = conv_forward(&dims, input.data(), kernels.data(), bias.data());
    Tensor::new(vec![dims.o, od, oh, ow], out)
}

/// Non-overlapping 2x2x2 max-pool; trailing odd slices are dropped.
pub fn max_pool3d<T: Scalar>(input: &Tensor<T>) -> Result<Tensor<T>> {
    let (shape, out, _) = pool_forward(input.shape(), input.data())?;
    Tensor::new(shape, out)
}
