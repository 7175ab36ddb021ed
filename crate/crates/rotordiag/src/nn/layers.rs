//! Layer primitives: valid-padding convolution, ReLU, max/average pooling,
//! fully-connected affine, softmax, and cross-entropy, each with its exact
//! backward pass.
//!
//! Dot products accumulate in f64 and are stored as f32, always in the same
//! index order (channel, then kernel row, then kernel column), so results are
//! reproducible and match a naive loop evaluation bit-for-bit.

use super::tensor::Tensor;
use super::NnError;

fn shape_err(msg: String) -> NnError {
    NnError::ShapeMismatch(msg)
}

/// Output side length of a valid (no padding) convolution, or an error when
/// the kernel does not tile the input at this stride.
fn conv_out_dim(input: usize, kernel: usize, stride: usize) -> Result<usize, NnError> {
    if kernel > input {
        return Err(shape_err(format!(
            "kernel {kernel} larger than input {input}"
        )));
    }
    if (input - kernel) % stride != 0 {
        return Err(NnError::NonIntegralOutput {
            input,
            kernel,
            stride,
        });
    }
    Ok((input - kernel) / stride + 1)
}

/// 2D convolution over `[C_in, H, W]` with weights `[C_out, C_in, kh, kw]`:
/// `out[o][i][j] = bias[o] + sum_{c,u,v} weights[o][c][u][v] * input[c][i*s+u][j*s+v]`.
pub fn conv2d_forward(
    input: &Tensor,
    weights: &Tensor,
    bias: &Tensor,
    stride: usize,
) -> Result<Tensor, NnError> {
    let [c_in, h, w] = rank3(input, "conv input")?;
    let ws = weights.shape();
    if ws.len() != 4 {
        return Err(shape_err(format!(
            "conv weights must be rank 4, got {ws:?}"
        )));
    }
    let (c_out, wc_in, kh, kw) = (ws[0], ws[1], ws[2], ws[3]);
    if wc_in != c_in {
        return Err(shape_err(format!(
            "conv expects {wc_in} input channels, got {c_in}"
        )));
    }
    if bias.shape() != [c_out] {
        return Err(shape_err(format!(
            "conv bias must be [{c_out}], got {:?}",
            bias.shape()
        )));
    }
    if stride == 0 {
        return Err(shape_err("stride must be positive".into()));
    }
    let oh = conv_out_dim(h, kh, stride)?;
    let ow = conv_out_dim(w, kw, stride)?;

    let x = input.data();
    let wt = weights.data();
    let mut out = vec![0.0f32; c_out * oh * ow];
    for o in 0..c_out {
        for i in 0..oh {
            for j in 0..ow {
                let mut acc = bias.data()[o] as f64;
                for c in 0..c_in {
                    for u in 0..kh {
                        let in_row = (c * h + i * stride + u) * w + j * stride;
                        let w_row = ((o * c_in + c) * kh + u) * kw;
                        for v in 0..kw {
                            acc += wt[w_row + v] as f64 * x[in_row + v] as f64;
                        }
                    }
                }
                out[(o * oh + i) * ow + j] = acc as f32;
            }
        }
    }
    Ok(Tensor::new(vec![c_out, oh, ow], out))
}

/// Gradients of a conv layer: returns (d_weights, d_bias, d_input).
pub fn conv2d_backward(
    input: &Tensor,
    weights: &Tensor,
    stride: usize,
    grad_out: &Tensor,
) -> Result<(Tensor, Tensor, Tensor), NnError> {
    let [c_in, h, w] = rank3(input, "conv input")?;
    let ws = weights.shape();
    let (c_out, _, kh, kw) = (ws[0], ws[1], ws[2], ws[3]);
    let [go_c, oh, ow] = rank3(grad_out, "conv grad")?;
    if go_c != c_out {
        return Err(shape_err(format!(
            "conv grad has {go_c} channels, expected {c_out}"
        )));
    }

    let x = input.data();
    let wt = weights.data();
    let g = grad_out.data();

    let mut d_w = vec![0.0f64; weights.len()];
    let mut d_b = vec![0.0f64; c_out];
    let mut d_x = vec![0.0f64; input.len()];
    for o in 0..c_out {
        for i in 0..oh {
            for j in 0..ow {
                let delta = g[(o * oh + i) * ow + j] as f64;
                d_b[o] += delta;
                for c in 0..c_in {
                    for u in 0..kh {
                        let in_row = (c * h + i * stride + u) * w + j * stride;
                        let w_row = ((o * c_in + c) * kh + u) * kw;
                        for v in 0..kw {
                            d_w[w_row + v] += delta * x[in_row + v] as f64;
                            d_x[in_row + v] += delta * wt[w_row + v] as f64;
                        }
                    }
                }
            }
        }
    }

    Ok((
        Tensor::new(ws.to_vec(), d_w.into_iter().map(|v| v as f32).collect()),
        Tensor::new(vec![c_out], d_b.into_iter().map(|v| v as f32).collect()),
        Tensor::new(
            vec![c_in, h, w],
            d_x.into_iter().map(|v| v as f32).collect(),
        ),
    ))
}

/// Elementwise max(0, x).
pub fn relu(x: &Tensor) -> Tensor {
    Tensor::new(
        x.shape().to_vec(),
        x.data().iter().map(|&v| v.max(0.0)).collect(),
    )
}

/// ReLU gradient: passes `grad_out` where the forward input was positive.
pub fn relu_backward(input: &Tensor, grad_out: &Tensor) -> Tensor {
    Tensor::new(
        input.shape().to_vec(),
        input
            .data()
            .iter()
            .zip(grad_out.data())
            .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
            .collect(),
    )
}

/// Non-overlapping max pooling over `size x size` blocks. Also returns the
/// flat input index of each block maximum (first hit in row-major scan wins
/// ties), which routes the backward pass.
pub fn maxpool(x: &Tensor, size: usize) -> Result<(Tensor, Vec<usize>), NnError> {
    let [c, h, w] = rank3(x, "maxpool input")?;
    check_divisible(h, w, size)?;
    let (oh, ow) = (h / size, w / size);
    let mut out = vec![0.0f32; c * oh * ow];
    let mut argmax = vec![0usize; c * oh * ow];
    for ch in 0..c {
        for i in 0..oh {
            for j in 0..ow {
                let mut best = f32::NEG_INFINITY;
                let mut best_at = 0;
                for u in 0..size {
                    for v in 0..size {
                        let at = (ch * h + i * size + u) * w + j * size + v;
                        let val = x.data()[at];
                        if val > best {
                            best = val;
                            best_at = at;
                        }
                    }
                }
                let out_at = (ch * oh + i) * ow + j;
                out[out_at] = best;
                argmax[out_at] = best_at;
            }
        }
    }
    Ok((Tensor::new(vec![c, oh, ow], out), argmax))
}

/// Max-pool gradient: each output gradient flows to its recorded argmax.
pub fn maxpool_backward(input_shape: &[usize], argmax: &[usize], grad_out: &Tensor) -> Tensor {
    let mut d_x = Tensor::zeros(input_shape.to_vec());
    for (at, &src) in argmax.iter().enumerate() {
        d_x.data_mut()[src] += grad_out.data()[at];
    }
    d_x
}

/// Non-overlapping average pooling over `size x size` blocks.
pub fn avgpool(x: &Tensor, size: usize) -> Result<Tensor, NnError> {
    let [c, h, w] = rank3(x, "avgpool input")?;
    check_divisible(h, w, size)?;
    let (oh, ow) = (h / size, w / size);
    let inv_area = 1.0 / (size * size) as f64;
    let mut out = vec![0.0f32; c * oh * ow];
    for ch in 0..c {
        for i in 0..oh {
            for j in 0..ow {
                let mut acc = 0.0f64;
                for u in 0..size {
                    for v in 0..size {
                        acc += x.data()[(ch * h + i * size + u) * w + j * size + v] as f64;
                    }
                }
                out[(ch * oh + i) * ow + j] = (acc * inv_area) as f32;
            }
        }
    }
    Ok(Tensor::new(vec![c, oh, ow], out))
}

/// Average-pool gradient: output gradients spread uniformly over each block.
pub fn avgpool_backward(input_shape: &[usize], size: usize, grad_out: &Tensor) -> Tensor {
    let (c, h, w) = (input_shape[0], input_shape[1], input_shape[2]);
    let (oh, ow) = (h / size, w / size);
    let inv_area = 1.0 / (size * size) as f32;
    let mut d_x = Tensor::zeros(input_shape.to_vec());
    for ch in 0..c {
        for i in 0..oh {
            for j in 0..ow {
                let g = grad_out.data()[(ch * oh + i) * ow + j] * inv_area;
                for u in 0..size {
                    for v in 0..size {
                        d_x.data_mut()[(ch * h + i * size + u) * w + j * size + v] += g;
                    }
                }
            }
        }
    }
    d_x
}

/// Fully-connected affine map: `out[o] = bias[o] + sum_i weights[o][i] * x[i]`.
pub fn dense_forward(x: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor, NnError> {
    let ws = weights.shape();
    if ws.len() != 2 {
        return Err(shape_err(format!(
            "dense weights must be rank 2, got {ws:?}"
        )));
    }
    let (out_dim, in_dim) = (ws[0], ws[1]);
    if x.len() != in_dim {
        return Err(shape_err(format!(
            "dense expects {in_dim} inputs, got {}",
            x.len()
        )));
    }
    if bias.shape() != [out_dim] {
        return Err(shape_err(format!(
            "dense bias must be [{out_dim}], got {:?}",
            bias.shape()
        )));
    }
    let mut out = vec![0.0f32; out_dim];
    for o in 0..out_dim {
        let mut acc = bias.data()[o] as f64;
        let row = o * in_dim;
        for i in 0..in_dim {
            acc += weights.data()[row + i] as f64 * x.data()[i] as f64;
        }
        out[o] = acc as f32;
    }
    Ok(Tensor::new(vec![out_dim], out))
}

/// Gradients of a dense layer: returns (d_weights, d_bias, d_input).
pub fn dense_backward(
    x: &Tensor,
    weights: &Tensor,
    grad_out: &Tensor,
) -> Result<(Tensor, Tensor, Tensor), NnError> {
    let ws = weights.shape();
    let (out_dim, in_dim) = (ws[0], ws[1]);
    if grad_out.len() != out_dim {
        return Err(shape_err(format!(
            "dense grad has {} entries, expected {out_dim}",
            grad_out.len()
        )));
    }
    let mut d_w = vec![0.0f32; weights.len()];
    let d_b = grad_out.data().to_vec();
    let mut d_x = vec![0.0f64; in_dim];
    for o in 0..out_dim {
        let g = grad_out.data()[o];
        let row = o * in_dim;
        for i in 0..in_dim {
            d_w[row + i] = g * x.data()[i];
            d_x[i] += g as f64 * weights.data()[row + i] as f64;
        }
    }
    Ok((
        Tensor::new(ws.to_vec(), d_w),
        Tensor::new(vec![out_dim], d_b),
        Tensor::new(vec![in_dim], d_x.into_iter().map(|v| v as f32).collect()),
    ))
}

/// Max-stabilized softmax: probabilities in (0, 1) summing to 1.
pub fn softmax(logits: &Tensor) -> Tensor {
    assert!(logits.len() >= 2, "softmax needs at least two classes");
    let max = logits
        .data()
        .iter()
        .fold(f32::NEG_INFINITY, |m, &v| m.max(v));
    let exps: Vec<f64> = logits
        .data()
        .iter()
        .map(|&z| ((z - max) as f64).exp())
        .collect();
    let sum: f64 = exps.iter().sum();
    Tensor::new(
        logits.shape().to_vec(),
        exps.into_iter().map(|e| (e / sum) as f32).collect(),
    )
}

/// Negative log-likelihood of the labeled class: `-ln(probs[label] + 1e-12)`.
pub fn cross_entropy(probs: &Tensor, label: usize) -> Result<f64, NnError> {
    if label >= probs.len() {
        return Err(NnError::LabelOutOfRange {
            label,
            classes: probs.len(),
        });
    }
    Ok(-((probs.data()[label] as f64 + 1e-12).ln()))
}

/// Fused softmax + cross-entropy gradient at the logits: `p - onehot(label)`.
pub fn softmax_cross_entropy_grad(probs: &Tensor, label: usize) -> Tensor {
    let mut grad = probs.data().to_vec();
    grad[label] -= 1.0;
    Tensor::new(probs.shape().to_vec(), grad)
}

fn rank3(t: &Tensor, what: &str) -> Result<[usize; 3], NnError> {
    let s = t.shape();
    if s.len() != 3 {
        return Err(shape_err(format!("{what} must be rank 3, got {s:?}")));
    }
    Ok([s[0], s[1], s[2]])
}

fn check_divisible(h: usize, w: usize, size: usize) -> Result<(), NnError> {
    if size < 2 {
        return Err(shape_err(format!(
            "pool size must be at least 2, got {size}"
        )));
    }
    if h % size != 0 || w % size != 0 {
        return Err(NnError::IndivisibleDims { h, w, size });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn random_tensor(rng: &mut SplitMix64, shape: Vec<usize>) -> Tensor {
        let len = shape.iter().product();
        Tensor::new(
            shape,
            (0..len)
                .map(|_| (rng.next_f64() * 2.0 - 1.0) as f32)
                .collect(),
        )
    }

    #[test]
    fn identity_kernel_copies_input() {
        let mut rng = SplitMix64::new(1);
        let x = random_tensor(&mut rng, vec![1, 4, 4]);
        let w = Tensor::new(vec![1, 1, 1, 1], vec![1.0]);
        let b = Tensor::zeros(vec![1]);
        let y = conv2d_forward(&x, &w, &b, 1).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn zero_weights_emit_bias() {
        let x = Tensor::new(vec![2, 3, 3], vec![0.5; 18]);
        let w = Tensor::zeros(vec![3, 2, 2, 2]);
        let b = Tensor::new(vec![3], vec![1.0, -2.0, 0.25]);
        let y = conv2d_forward(&x, &w, &b, 1).unwrap();
        for o in 0..3 {
            for i in 0..2 {
                for j in 0..2 {
                    assert_eq!(y.at3(o, i, j), b.data()[o]);
                }
            }
        }
    }

    #[test]
    fn non_integral_output_is_rejected() {
        let x = Tensor::zeros(vec![1, 5, 5]);
        let w = Tensor::zeros(vec![1, 1, 2, 2]);
        let b = Tensor::zeros(vec![1]);
        assert!(matches!(
            conv2d_forward(&x, &w, &b, 2),
            Err(NnError::NonIntegralOutput { .. })
        ));
    }

    #[test]
    fn channel_mismatch_is_rejected() {
        let x = Tensor::zeros(vec![2, 4, 4]);
        let w = Tensor::zeros(vec![1, 3, 2, 2]);
        let b = Tensor::zeros(vec![1]);
        assert!(matches!(
            conv2d_forward(&x, &w, &b, 1),
            Err(NnError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn relu_clamps_and_is_idempotent() {
        let x = Tensor::new(vec![3], vec![-1.0, 0.0, 2.0]);
        let y = relu(&x);
        assert_eq!(y.data(), &[0.0, 0.0, 2.0]);
        let mut rng = SplitMix64::new(2);
        let x = random_tensor(&mut rng, vec![4, 5, 6]);
        let once = relu(&x);
        assert_eq!(relu(&once), once);
        assert!(once.data().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn maxpool_blocks() {
        let x = Tensor::new(vec![1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]);
        let (y, argmax) = maxpool(&x, 2).unwrap();
        assert_eq!(y.data(), &[4.0]);
        assert_eq!(argmax, vec![3]);
        let constant = Tensor::new(vec![1, 4, 4], vec![0.5; 16]);
        let (y, argmax) = maxpool(&constant, 2).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.5));
        // Ties break to the first element of the block in row-major order.
        assert_eq!(argmax, vec![0, 2, 8, 10]);
    }

    #[test]
    fn maxpool_indivisible_is_rejected() {
        let x = Tensor::zeros(vec![1, 5, 4]);
        assert!(matches!(
            maxpool(&x, 2),
            Err(NnError::IndivisibleDims { .. })
        ));
    }

    #[test]
    fn avgpool_blocks() {
        let x = Tensor::new(vec![1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]);
        let y = avgpool(&x, 2).unwrap();
        assert_eq!(y.data(), &[2.5]);
        let constant = Tensor::new(vec![2, 4, 4], vec![-0.25; 32]);
        let y = avgpool(&constant, 2).unwrap();
        assert!(y.data().iter().all(|&v| v == -0.25));
    }

    #[test]
    fn dense_identity_and_bias() {
        let x = Tensor::new(vec![3], vec![0.5, -1.0, 2.0]);
        let eye = Tensor::new(
            vec![3, 3],
            vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
        );
        let zero_b = Tensor::zeros(vec![3]);
        assert_eq!(dense_forward(&x, &eye, &zero_b).unwrap(), x);

        let zero_x = Tensor::zeros(vec![3]);
        let b = Tensor::new(vec![3], vec![1.0, 2.0, 3.0]);
        assert_eq!(dense_forward(&zero_x, &eye, &b).unwrap(), b);
    }

    #[test]
    fn softmax_symmetry_and_shift_invariance() {
        let even = softmax(&Tensor::new(vec![2], vec![0.0, 0.0]));
        assert_eq!(even.data(), &[0.5, 0.5]);

        let a = softmax(&Tensor::new(vec![3], vec![1.0, 2.0, 3.0]));
        let b = softmax(&Tensor::new(vec![3], vec![11.0, 12.0, 13.0]));
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() < 1e-7);
        }
        // Direct formula check.
        let denom = 1.0f64.exp() + 2.0f64.exp() + 3.0f64.exp();
        for (k, &p) in a.data().iter().enumerate() {
            let expected = ((k + 1) as f64).exp() / denom;
            assert!((p as f64 - expected).abs() < 1e-6);
        }
        let sum: f32 = a.data().iter().sum();
        assert!((sum - 1.0).abs() < 1e-6);
    }

    #[test]
    fn softmax_survives_extreme_logits() {
        let p = softmax(&Tensor::new(vec![2], vec![1000.0, -1000.0]));
        assert!(p.data().iter().all(|v| v.is_finite()));
        assert!((p.data()[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn cross_entropy_values() {
        let sure = Tensor::new(vec![2], vec![1.0, 0.0]);
        assert!(cross_entropy(&sure, 0).unwrap().abs() < 1e-9);
        let uniform = Tensor::new(vec![2], vec![0.5, 0.5]);
        let ln2 = std::f64::consts::LN_2;
        assert!((cross_entropy(&uniform, 0).unwrap() - ln2).abs() < 1e-9);
        assert!((cross_entropy(&uniform, 1).unwrap() - ln2).abs() < 1e-9);
        assert!(matches!(
            cross_entropy(&uniform, 2),
            Err(NnError::LabelOutOfRange { .. })
        ));
    }

    #[test]
    fn fused_grad_is_probs_minus_onehot() {
        let probs = Tensor::new(vec![3], vec![0.2, 0.5, 0.3]);
        let g = softmax_cross_entropy_grad(&probs, 1);
        let expected = [0.2, -0.5, 0.3];
        for (a, b) in g.data().iter().zip(expected) {
            assert!((a - b).abs() < 1e-7);
        }
    }
}
