//! Checked forward kernels shared by the tape and by direct callers.
//!
//! All kernels validate shapes and report both operand shapes on mismatch.
//! Loop orders favour contiguous row access; nothing here allocates beyond
//! the output tensor.

use super::tensor::{sorted_sum, Tensor, TensorError};

fn binary_same_shape(
    op: &'static str,
    a: &Tensor,
    b: &Tensor,
    f: impl Fn(f64, f64) -> f64,
) -> Result<Tensor, TensorError> {
    if a.shape() != b.shape() {
        return Err(TensorError::ShapeMismatch {
            op,
            left: a.shape().to_vec(),
            right: b.shape().to_vec(),
        });
    }
    let data = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| f(x, y))
        .collect();
    Tensor::from_vec(a.shape(), data)
}

pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
    binary_same_shape("add", a, b, |x, y| x + y)
}

pub fn sub(a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
    binary_same_shape("sub", a, b, |x, y| x - y)
}

pub fn mul(a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
    binary_same_shape("mul", a, b, |x, y| x * y)
}

pub fn minimum(a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
    binary_same_shape("minimum", a, b, f64::min)
}

pub fn scale(a: &Tensor, c: f64) -> Tensor {
    let data = a.data().iter().map(|&x| x * c).collect();
    Tensor::from_vec(a.shape(), data).expect("same shape")
}

pub fn add_scalar(a: &Tensor, c: f64) -> Tensor {
    let data = a.data().iter().map(|&x| x + c).collect();
    Tensor::from_vec(a.shape(), data).expect("same shape")
}

pub fn map(a: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    let data = a.data().iter().map(|&x| f(x)).collect();
    Tensor::from_vec(a.shape(), data).expect("same shape")
}

/// Numerically stable ln(1 + e^x).
pub fn softplus_scalar(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn require_rank(op: &'static str, t: &Tensor, rank: usize) -> Result<(), TensorError> {
    if t.shape().len() != rank {
        return Err(TensorError::BadRank {
            op,
            expected: rank,
            shape: t.shape().to_vec(),
        });
    }
    Ok(())
}

/// C = A · B for A [n,k], B [k,m].
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
    require_rank("matmul", a, 2)?;
    require_rank("matmul", b, 2)?;
    if a.cols() != b.rows() {
        return Err(TensorError::ShapeMismatch {
            op: "matmul",
            left: a.shape().to_vec(),
            right: b.shape().to_vec(),
        });
    }
    let (n, k, m) = (a.rows(), a.cols(), b.cols());
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        let arow = &a.data()[i * k..(i + 1) * k];
        let orow = &mut out[i * m..(i + 1) * m];
        for (p, &av) in arow.iter().enumerate() {
            let brow = &b.data()[p * m..(p + 1) * m];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    Tensor::from_vec(&[n, m], out)
}

/// C = A · Bᵀ for A [n,k], B [m,k].
pub fn matmul_nt(a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
    require_rank("matmul_nt", a, 2)?;
    require_rank("matmul_nt", b, 2)?;
    if a.cols() != b.cols() {
        return Err(TensorError::ShapeMismatch {
            op: "matmul_nt",
            left: a.shape().to_vec(),
            right: b.shape().to_vec(),
        });
    }
    let (n, k, m) = (a.rows(), a.cols(), b.rows());
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        let arow = &a.data()[i * k..(i + 1) * k];
        for j in 0..m {
            let brow = &b.data()[j * k..(j + 1) * k];
            out[i * m + j] = arow.iter().zip(brow).map(|(&x, &y)| x * y).sum();
        }
    }
    Tensor::from_vec(&[n, m], out)
}

/// C = Aᵀ · B for A [n,k], B [n,m].
pub fn matmul_tn(a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
    require_rank("matmul_tn", a, 2)?;
    require_rank("matmul_tn", b, 2)?;
    if a.rows() != b.rows() {
        return Err(TensorError::ShapeMismatch {
            op: "matmul_tn",
            left: a.shape().to_vec(),
            right: b.shape().to_vec(),
        });
    }
    let (n, k, m) = (a.rows(), a.cols(), b.cols());
    let mut out = vec![0.0; k * m];
    for i in 0..n {
        let arow = &a.data()[i * k..(i + 1) * k];
        let brow = &b.data()[i * m..(i + 1) * m];
        for (p, &av) in arow.iter().enumerate() {
            let orow = &mut out[p * m..(p + 1) * m];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    Tensor::from_vec(&[k, m], out)
}

/// A · B with value-sorted inner accumulation, so permuting the contraction
/// axis consistently in both operands changes nothing, bit for bit. Used for
/// the attention-weights × values product; the contraction axis there is the
/// object axis, which must be exchangeable.
pub fn matmul_sorted(a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
    require_rank("matmul_sorted", a, 2)?;
    require_rank("matmul_sorted", b, 2)?;
    if a.cols() != b.rows() {
        return Err(TensorError::ShapeMismatch {
            op: "matmul_sorted",
            left: a.shape().to_vec(),
            right: b.shape().to_vec(),
        });
    }
    let (n, k, m) = (a.rows(), a.cols(), b.cols());
    let mut out = vec![0.0; n * m];
    let mut scratch = vec![0.0; k];
    for i in 0..n {
        let arow = &a.data()[i * k..(i + 1) * k];
        for j in 0..m {
            for (s, (p, &av)) in scratch.iter_mut().zip(arow.iter().enumerate()) {
                *s = av * b.data()[p * m + j];
            }
            out[i * m + j] = sorted_sum(&mut scratch);
        }
    }
    Tensor::from_vec(&[n, m], out)
}

/// y = x · W for x [k], W [k,m].
pub fn vecmat(x: &Tensor, w: &Tensor) -> Result<Tensor, TensorError> {
    require_rank("vecmat", x, 1)?;
    require_rank("vecmat", w, 2)?;
    if x.numel() != w.rows() {
        return Err(TensorError::ShapeMismatch {
            op: "vecmat",
            left: x.shape().to_vec(),
            right: w.shape().to_vec(),
        });
    }
    let (k, m) = (w.rows(), w.cols());
    let mut out = vec![0.0; m];
    for (p, &xv) in x.data().iter().enumerate() {
        let wrow = &w.data()[p * m..(p + 1) * m];
        for (o, &wv) in out.iter_mut().zip(wrow) {
            *o += xv * wv;
        }
    }
    let _ = k;
    Tensor::from_vec(&[m], out)
}

/// Row-wise softmax with a max-shifted exponent and sorted denominator sum.
pub fn softmax_rows(x: &Tensor) -> Result<Tensor, TensorError> {
    require_rank("softmax_rows", x, 2)?;
    let (n, m) = (x.rows(), x.cols());
    let mut out = vec![0.0; n * m];
    let mut scratch = vec![0.0; m];
    for i in 0..n {
        let row = &x.data()[i * m..(i + 1) * m];
        let mx = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let orow = &mut out[i * m..(i + 1) * m];
        for ((o, s), &v) in orow.iter_mut().zip(scratch.iter_mut()).zip(row) {
            let e = (v - mx).exp();
            *o = e;
            *s = e;
        }
        let denom = sorted_sum(&mut scratch);
        for o in orow.iter_mut() {
            *o /= denom;
        }
    }
    Tensor::from_vec(&[n, m], out)
}

/// Column means of a rank-2 tensor, each column reduced with a sorted sum.
pub fn mean_rows(x: &Tensor) -> Result<Tensor, TensorError> {
    require_rank("mean_rows", x, 2)?;
    let (n, m) = (x.rows(), x.cols());
    let mut out = vec![0.0; m];
    let mut scratch = vec![0.0; n];
    for (j, o) in out.iter_mut().enumerate() {
        for (s, i) in scratch.iter_mut().zip(0..n) {
            *s = x.data()[i * m + j];
        }
        *o = sorted_sum(&mut scratch) / n as f64;
    }
    Tensor::from_vec(&[m], out)
}

/// 2-D cross-correlation with zero padding.
/// x [C,H,W], w [F,C,kh,kw], b [F] -> [F,OH,OW].
pub fn conv2d(
    x: &Tensor,
    w: &Tensor,
    b: &Tensor,
    stride: usize,
    pad: usize,
) -> Result<Tensor, TensorError> {
    require_rank("conv2d", x, 3)?;
    require_rank("conv2d", w, 4)?;
    require_rank("conv2d", b, 1)?;
    let (c, h, wd) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (f, wc, kh, kw) = (w.shape()[0], w.shape()[1], w.shape()[2], w.shape()[3]);
    if wc != c || b.numel() != f {
        return Err(TensorError::ShapeMismatch {
            op: "conv2d",
            left: x.shape().to_vec(),
            right: w.shape().to_vec(),
        });
    }
    let oh = (h + 2 * pad - kh) / stride + 1;
    let ow = (wd + 2 * pad - kw) / stride + 1;
    let mut out = vec![0.0; f * oh * ow];
    for fi in 0..f {
        let bias = b.data()[fi];
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = bias;
                for ci in 0..c {
                    let xplane = &x.data()[ci * h * wd..(ci + 1) * h * wd];
                    let wplane = &w.data()[(fi * c + ci) * kh * kw..(fi * c + ci + 1) * kh * kw];
                    for ky in 0..kh {
                        let iy = (oy * stride + ky) as isize - pad as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for kx in 0..kw {
                            let ix = (ox * stride + kx) as isize - pad as isize;
                            if ix < 0 || ix >= wd as isize {
                                continue;
                            }
                            acc += wplane[ky * kw + kx] * xplane[iy as usize * wd + ix as usize];
                        }
                    }
                }
                out[(fi * oh + oy) * ow + ox] = acc;
            }
        }
    }
    Tensor::from_vec(&[f, oh, ow], out)
}

/// Gradients of [`conv2d`] w.r.t. input, weights, and bias.
pub fn conv2d_backward(
    x: &Tensor,
    w: &Tensor,
    dy: &Tensor,
    stride: usize,
    pad: usize,
) -> (Tensor, Tensor, Tensor) {
    let (c, h, wd) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (f, _, kh, kw) = (w.shape()[0], w.shape()[1], w.shape()[2], w.shape()[3]);
    let (oh, ow) = (dy.shape()[1], dy.shape()[2]);
    let mut dx = Tensor::zeros(x.shape());
    let mut dw = Tensor::zeros(w.shape());
    let mut db = Tensor::zeros(&[f]);
    for fi in 0..f {
        for oy in 0..oh {
            for ox in 0..ow {
                let g = dy.data()[(fi * oh + oy) * ow + ox];
                db.data_mut()[fi] += g;
                for ci in 0..c {
                    for ky in 0..kh {
                        let iy = (oy * stride + ky) as isize - pad as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for kx in 0..kw {
                            let ix = (ox * stride + kx) as isize - pad as isize;
                            if ix < 0 || ix >= wd as isize {
                                continue;
                            }
                            let xi = (ci * h + iy as usize) * wd + ix as usize;
                            let wi = ((fi * c + ci) * kh + ky) * kw + kx;
                            dw.data_mut()[wi] += g * x.data()[xi];
                            dx.data_mut()[xi] += g * w.data()[wi];
                        }
                    }
                }
            }
        }
    }
    (dx, dw, db)
}
