//! Forward and backward passes of the individual layer kinds.

use crate::error::{Error, Result};

use super::tensor::Tensor;

/// `C = alpha·A·B + beta·C` on strided row/column-major views.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    a_strides: (isize, isize),
    b: &[f64],
    b_strides: (isize, isize),
    beta: f64,
    c: &mut [f64],
    c_strides: (isize, isize),
) {
    let extent = |rows: usize, cols: usize, (rs, cs): (isize, isize)| {
        if rows == 0 || cols == 0 {
            0
        } else {
            ((rows - 1) as isize * rs + (cols - 1) as isize * cs) as usize + 1
        }
    };
    assert!(a.len() >= extent(m, k, a_strides));
    assert!(b.len() >= extent(k, n, b_strides));
    assert!(c.len() >= extent(m, n, c_strides));
    // SAFETY: the asserts above keep every strided access inside the slices,
    // and `c` is uniquely borrowed.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            a_strides.0,
            a_strides.1,
            b.as_ptr(),
            b_strides.0,
            b_strides.1,
            beta,
            c.as_mut_ptr(),
            c_strides.0,
            c_strides.1,
        );
    }
}

/// Geometry of a stride-1, same-padded 1-D convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvShape {
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
}

impl ConvShape {
    pub fn weight_len(&self) -> usize {
        self.out_ch * self.in_ch * self.kernel
    }

    /// Left padding; even kernels put the extra zero on the right.
    pub fn pad_left(&self) -> usize {
        (self.kernel - 1) / 2
    }
}

fn im2col(x: &[f64], len: usize, shape: ConvShape, cols: &mut [f64]) {
    let pad = shape.pad_left() as isize;
    let k = shape.kernel;
    for c in 0..shape.in_ch {
        let row_in = &x[c * len..(c + 1) * len];
        for j in 0..k {
            let row = &mut cols[(c * k + j) * len..(c * k + j + 1) * len];
            let off = j as isize - pad;
            for (t, v) in row.iter_mut().enumerate() {
                let src = t as isize + off;
                *v = if src >= 0 && (src as usize) < len {
                    row_in[src as usize]
                } else {
                    0.0
                };
            }
        }
    }
}

fn col2im_add(cols: &[f64], len: usize, shape: ConvShape, dx: &mut [f64]) {
    let pad = shape.pad_left() as isize;
    let k = shape.kernel;
    for c in 0..shape.in_ch {
        let row_out = &mut dx[c * len..(c + 1) * len];
        for j in 0..k {
            let row = &cols[(c * k + j) * len..(c * k + j + 1) * len];
            let off = j as isize - pad;
            let t_lo = (-off).max(0) as usize;
            let t_hi = ((len as isize - off).min(len as isize)).max(0) as usize;
            for t in t_lo..t_hi {
                row_out[(t as isize + off) as usize] += row[t];
            }
        }
    }
}

fn check_conv(x: &Tensor, weights: &[f64], bias: &[f64], shape: ConvShape) -> Result<()> {
    if x.channels() != shape.in_ch
        || weights.len() != shape.weight_len()
        || bias.len() != shape.out_ch
        || shape.kernel == 0
    {
        return Err(Error::ShapeMismatch(format!(
            "conv {shape:?} with input {:?}, {} weights, {} biases",
            x.shape,
            weights.len(),
            bias.len()
        )));
    }
    Ok(())
}

/// Cross-correlation `y[o,t] = b[o] + Σ_{c,j} w[o,c,j]·x[c, t + j − pad]`,
/// output length equal to input length. Weights are `[out, in, kernel]`.
pub fn conv1d_forward(
    x: &Tensor,
    weights: &[f64],
    bias: &[f64],
    shape: ConvShape,
) -> Result<Tensor> {
    check_conv(x, weights, bias, shape)?;
    let len = x.len();
    let ck = shape.in_ch * shape.kernel;
    let mut y = Tensor::zeros([x.batch(), shape.out_ch, len]);
    let mut cols = vec![0.0; ck * len];
    for b in 0..x.batch() {
        im2col(x.sample(b), len, shape, &mut cols);
        let out = y.sample_mut(b);
        for (o, row) in out.chunks_mut(len).enumerate() {
            row.fill(bias[o]);
        }
        gemm(
            shape.out_ch,
            ck,
            len,
            1.0,
            weights,
            (ck as isize, 1),
            &cols,
            (len as isize, 1),
            1.0,
            out,
            (len as isize, 1),
        );
    }
    y.debug_assert_finite();
    Ok(y)
}

/// Accumulates weight and bias gradients into `dw`/`db`; returns the input
/// gradient when `want_dx`.
pub fn conv1d_backward(
    x: &Tensor,
    weights: &[f64],
    shape: ConvShape,
    dy: &Tensor,
    dw: &mut [f64],
    db: &mut [f64],
    want_dx: bool,
) -> Result<Option<Tensor>> {
    if dy.shape != [x.batch(), shape.out_ch, x.len()]
        || dw.len() != shape.weight_len()
        || db.len() != shape.out_ch
    {
        return Err(Error::ShapeMismatch(format!(
            "conv backward: dy {:?} for input {:?}",
            dy.shape, x.shape
        )));
    }
    let len = x.len();
    let ck = shape.in_ch * shape.kernel;
    let mut cols = vec![0.0; ck * len];
    let mut dcols = vec![0.0; ck * len];
    let mut dx = want_dx.then(|| Tensor::zeros(x.shape));
    for b in 0..x.batch() {
        let g = dy.sample(b);
        for (o, row) in g.chunks(len).enumerate() {
            db[o] += row.iter().sum::<f64>();
        }
        im2col(x.sample(b), len, shape, &mut cols);
        // dW[out, ck] += dY[out, len] · colsᵀ[len, ck]
        gemm(
            shape.out_ch,
            len,
            ck,
            1.0,
            g,
            (len as isize, 1),
            &cols,
            (1, len as isize),
            1.0,
            dw,
            (ck as isize, 1),
        );
        if let Some(dx) = dx.as_mut() {
            // dcols[ck, len] = Wᵀ[ck, out] · dY[out, len]
            gemm(
                ck,
                shape.out_ch,
                len,
                1.0,
                weights,
                (1, ck as isize),
                g,
                (len as isize, 1),
                0.0,
                &mut dcols,
                (len as isize, 1),
            );
            col2im_add(&dcols, len, shape, dx.sample_mut(b));
        }
    }
    Ok(dx)
}

pub fn relu_forward(x: &Tensor) -> Tensor {
    Tensor {
        data: x.data.iter().map(|&v| v.max(0.0)).collect(),
        shape: x.shape,
    }
}

/// Gradient passes where the pre-activation is strictly positive.
pub fn relu_backward(pre: &Tensor, dy: &Tensor) -> Tensor {
    Tensor {
        data: pre
            .data
            .iter()
            .zip(&dy.data)
            .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
            .collect(),
        shape: pre.shape,
    }
}

pub fn pooled_len(len: usize) -> usize {
    len.div_ceil(2)
}

/// Size-2, stride-2 max pooling. A trailing odd sample forms its own
/// window; ties keep the earlier index. Returned indices are offsets into
/// the input's `data`.
pub fn maxpool_forward(x: &Tensor) -> (Tensor, Vec<usize>) {
    let [batch, ch, len] = x.shape;
    let out_len = pooled_len(len);
    let mut y = Tensor::zeros([batch, ch, out_len]);
    let mut argmax = vec![0; batch * ch * out_len];
    for row in 0..batch * ch {
        let base = row * len;
        for i in 0..out_len {
            let a = base + 2 * i;
            let idx = if 2 * i + 1 < len && x.data[a + 1] > x.data[a] {
                a + 1
            } else {
                a
            };
            y.data[row * out_len + i] = x.data[idx];
            argmax[row * out_len + i] = idx;
        }
    }
    (y, argmax)
}

pub fn maxpool_backward(input_shape: [usize; 3], argmax: &[usize], dy: &Tensor) -> Tensor {
    let mut dx = Tensor::zeros(input_shape);
    for (&idx, &g) in argmax.iter().zip(&dy.data) {
        dx.data[idx] += g;
    }
    dx
}

pub const BN_EPSILON: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Per-channel running statistics of a batch-normalization layer.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl RunningStats {
    pub fn new(channels: usize) -> Self {
        RunningStats {
            mean: vec![0.0; channels],
            var: vec![1.0; channels],
        }
    }
}

/// What the backward pass needs from a training-mode forward pass.
#[derive(Debug, Clone)]
pub struct BatchNormCache {
    pub normalized: Tensor,
    pub inv_std: Vec<f64>,
}

/// Normalizes each channel over batch and length. Training mode uses batch
/// statistics (biased variance) and blends them into `running` as
/// `running ← (1 − m)·running + m·batch`; inference uses `running`.
pub fn batchnorm_forward(
    x: &Tensor,
    gamma: &[f64],
    beta: &[f64],
    running: &mut RunningStats,
    mode: Mode,
    momentum: f64,
) -> Result<(Tensor, Option<BatchNormCache>)> {
    let [batch, ch, len] = x.shape;
    if gamma.len() != ch || beta.len() != ch || running.mean.len() != ch || running.var.len() != ch
    {
        return Err(Error::ShapeMismatch(format!(
            "batchnorm over {ch} channels with {} scales",
            gamma.len()
        )));
    }
    let count = (batch * len) as f64;
    let (mean, var) = match mode {
        Mode::Train => {
            let mut mean = vec![0.0; ch];
            let mut var = vec![0.0; ch];
            for c in 0..ch {
                let rows = (0..batch).map(|b| &x.data[(b * ch + c) * len..(b * ch + c + 1) * len]);
                let m = rows.clone().flatten().sum::<f64>() / count;
                let v = rows.flatten().map(|v| (v - m) * (v - m)).sum::<f64>() / count;
                mean[c] = m;
                var[c] = v;
            }
            for c in 0..ch {
                running.mean[c] = (1.0 - momentum) * running.mean[c] + momentum * mean[c];
                running.var[c] = (1.0 - momentum) * running.var[c] + momentum * var[c];
            }
            (mean, var)
        }
        Mode::Infer => (running.mean.clone(), running.var.clone()),
    };
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPSILON).sqrt()).collect();
    let mut normalized = Tensor::zeros(x.shape);
    let mut y = Tensor::zeros(x.shape);
    for b in 0..batch {
        for c in 0..ch {
            let off = (b * ch + c) * len;
            for t in off..off + len {
                let h = (x.data[t] - mean[c]) * inv_std[c];
                normalized.data[t] = h;
                y.data[t] = gamma[c] * h + beta[c];
            }
        }
    }
    y.debug_assert_finite();
    let cache = (mode == Mode::Train).then_some(BatchNormCache {
        normalized,
        inv_std,
    });
    Ok((y, cache))
}

/// Backward pass through training-mode batch normalization. Accumulates
/// into `dgamma`/`dbeta` and returns the input gradient.
pub fn batchnorm_backward(
    cache: &BatchNormCache,
    gamma: &[f64],
    dy: &Tensor,
    dgamma: &mut [f64],
    dbeta: &mut [f64],
) -> Tensor {
    let [batch, ch, len] = dy.shape;
    let count = (batch * len) as f64;
    let xhat = &cache.normalized;
    let mut dx = Tensor::zeros(dy.shape);
    for c in 0..ch {
        let mut sum_dy = 0.0;
        let mut sum_dy_xhat = 0.0;
        for b in 0..batch {
            let off = (b * ch + c) * len;
            for t in off..off + len {
                sum_dy += dy.data[t];
                sum_dy_xhat += dy.data[t] * xhat.data[t];
            }
        }
        dgamma[c] += sum_dy_xhat;
        dbeta[c] += sum_dy;
        let scale = gamma[c] * cache.inv_std[c] / count;
        for b in 0..batch {
            let off = (b * ch + c) * len;
            for t in off..off + len {
                dx.data[t] = scale * (count * dy.data[t] - sum_dy - xhat.data[t] * sum_dy_xhat);
            }
        }
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_kernel() {
        let x = Tensor::new(vec![1.0, -2.0, 3.0, 0.5, 4.0], [1, 1, 5]).unwrap();
        let shape = ConvShape {
            in_ch: 1,
            out_ch: 1,
            kernel: 3,
        };
        let y = conv1d_forward(&x, &[0.0, 1.0, 0.0], &[0.0], shape).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn box_kernel_by_hand() {
        let x = Tensor::new(vec![0.0, 1.0, 0.0, 0.0], [1, 1, 4]).unwrap();
        let shape = ConvShape {
            in_ch: 1,
            out_ch: 1,
            kernel: 3,
        };
        let y = conv1d_forward(&x, &[1.0; 3], &[0.0], shape).unwrap();
        assert_eq!(y.data, vec![1.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn even_kernel_pads_right() {
        // kernel 2: y[t] = w0·x[t] + w1·x[t+1]
        let x = Tensor::new(vec![1.0, 2.0, 3.0], [1, 1, 3]).unwrap();
        let shape = ConvShape {
            in_ch: 1,
            out_ch: 1,
            kernel: 2,
        };
        let y = conv1d_forward(&x, &[1.0, 10.0], &[0.0], shape).unwrap();
        assert_eq!(y.data, vec![21.0, 32.0, 3.0]);
    }

    #[test]
    fn conv_shape_errors() {
        let x = Tensor::zeros([1, 2, 8]);
        let shape = ConvShape {
            in_ch: 1,
            out_ch: 1,
            kernel: 3,
        };
        assert!(matches!(
            conv1d_forward(&x, &[0.0; 3], &[0.0], shape),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn maxpool_cases() {
        let x = Tensor::new(vec![1.0, 3.0, 2.0, 0.0], [1, 1, 4]).unwrap();
        let (y, idx) = maxpool_forward(&x);
        assert_eq!(y.data, vec![3.0, 2.0]);
        assert_eq!(idx, vec![1, 2]);

        let x = Tensor::new(vec![5.0, 1.0, 4.0], [1, 1, 3]).unwrap();
        let (y, idx) = maxpool_forward(&x);
        assert_eq!(y.data, vec![5.0, 4.0]);
        assert_eq!(idx, vec![0, 2]);

        let x = Tensor::new(vec![2.0; 6], [1, 1, 6]).unwrap();
        let (_, idx) = maxpool_forward(&x);
        assert_eq!(idx, vec![0, 2, 4]);
    }

    #[test]
    fn maxpool_routes_gradient_to_argmax() {
        let x = Tensor::new(vec![1.0, 3.0, 2.0, 0.0, 7.0], [1, 1, 5]).unwrap();
        let (y, idx) = maxpool_forward(&x);
        let dy = Tensor::new(vec![10.0, 20.0, 30.0], y.shape).unwrap();
        let dx = maxpool_backward(x.shape, &idx, &dy);
        assert_eq!(dx.data, vec![0.0, 10.0, 20.0, 0.0, 30.0]);
    }

    #[test]
    fn relu_gradient_is_zero_for_non_positive() {
        let pre = Tensor::new(vec![-1.0, 0.0, 2.0], [1, 1, 3]).unwrap();
        let dy = Tensor::new(vec![5.0, 5.0, 5.0], [1, 1, 3]).unwrap();
        assert_eq!(relu_backward(&pre, &dy).data, vec![0.0, 0.0, 5.0]);
        assert_eq!(relu_forward(&pre).data, vec![0.0, 0.0, 2.0]);
    }

    #[test]
    fn batchnorm_standardizes_in_train_mode() {
        let data: Vec<f64> = (0..2 * 3 * 7)
            .map(|i| ((i * 37) % 11) as f64 * 7.0 - 10.0)
            .collect();
        let x = Tensor::new(data, [2, 3, 7]).unwrap();
        let mut running = RunningStats::new(3);
        let (y, _) = batchnorm_forward(
            &x,
            &[1.0; 3],
            &[0.0; 3],
            &mut running,
            Mode::Train,
            BN_MOMENTUM,
        )
        .unwrap();
        for c in 0..3 {
            let vals: Vec<f64> = (0..2)
                .flat_map(|b| y.data[(b * 3 + c) * 7..(b * 3 + c + 1) * 7].to_vec())
                .collect();
            let m = vals.iter().sum::<f64>() / 14.0;
            let v = vals.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 14.0;
            assert!(m.abs() < 1e-10);
            assert!((v - 1.0).abs() < 1e-6, "{v}");
        }
    }

    #[test]
    fn batchnorm_identity_on_standard_batch() {
        let x = Tensor::new(vec![1.0, -1.0, 1.0, -1.0], [1, 1, 4]).unwrap();
        let mut running = RunningStats::new(1);
        let (y, _) =
            batchnorm_forward(&x, &[1.0], &[0.0], &mut running, Mode::Train, BN_MOMENTUM).unwrap();
        for (a, b) in x.data.iter().zip(&y.data) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn full_momentum_makes_inference_match_training() {
        let data: Vec<f64> = (0..24)
            .map(|i| (i as f64 * 0.9).sin() * 3.0 + 1.0)
            .collect();
        let x = Tensor::new(data, [2, 2, 6]).unwrap();
        let gamma = [1.5, 0.5];
        let beta = [0.1, -0.2];
        let mut running = RunningStats::new(2);
        let (train, _) =
            batchnorm_forward(&x, &gamma, &beta, &mut running, Mode::Train, 1.0).unwrap();
        let (infer, _) =
            batchnorm_forward(&x, &gamma, &beta, &mut running, Mode::Infer, 1.0).unwrap();
        assert_eq!(train, infer);
    }
}
