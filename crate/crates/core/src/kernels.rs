//! Convolution, resampling and elementwise kernels.
//!
//! Every kernel is a pure function of its inputs. Output rows are computed
//! independently (and in parallel), each with a fixed accumulation order, so
//! results are bit-identical from run to run regardless of thread count.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::{ConvWeights, Tensor};

/// Spatial padding mode for strided convolutions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// Output size `ceil(in / stride)`; the odd leftover pixel goes bottom/right.
    Same,
    /// No padding, output size `floor((in - k) / stride) + 1`.
    Valid,
}

/// Output size and leading pad along one axis.
pub fn conv_output_geometry(
    input: usize,
    kernel: usize,
    stride: usize,
    padding: Padding,
) -> Option<(usize, usize)> {
    match padding {
        Padding::Same => {
            let out = input.div_ceil(stride);
            let total = ((out - 1) * stride + kernel).saturating_sub(input);
            Some((out, total / 2))
        }
        Padding::Valid => {
            if kernel > input {
                None
            } else {
                Some(((input - kernel) / stride + 1, 0))
            }
        }
    }
}

fn check_stride(stride: usize) -> Result<()> {
    if stride == 1 || stride == 2 {
        Ok(())
    } else {
        Err(Error::contract(format!("stride must be 1 or 2, got {stride}")))
    }
}

fn output_dims(
    input: &Tensor,
    w: &ConvWeights,
    stride: usize,
    padding: Padding,
) -> Result<(usize, usize, usize, usize)> {
    let (out_h, pad_top) = conv_output_geometry(input.height(), w.kernel_h(), stride, padding)
        .ok_or_else(|| {
            Error::contract(format!(
                "kernel height {} exceeds input height {} with valid padding",
                w.kernel_h(),
                input.height()
            ))
        })?;
    let (out_w, pad_left) = conv_output_geometry(input.width(), w.kernel_w(), stride, padding)
        .ok_or_else(|| {
            Error::contract(format!(
                "kernel width {} exceeds input width {} with valid padding",
                w.kernel_w(),
                input.width()
            ))
        })?;
    Ok((out_h, out_w, pad_top, pad_left))
}

/// Dense 2D convolution.
pub fn conv2d(input: &Tensor, w: &ConvWeights, stride: usize, padding: Padding) -> Result<Tensor> {
    check_stride(stride)?;
    if w.is_depthwise() {
        return Err(Error::contract("conv2d expects dense weights, got depthwise"));
    }
    if w.in_channels() != input.channels() {
        return Err(Error::contract(format!(
            "conv2d channel mismatch: weights expect {}, input has {}",
            w.in_channels(),
            input.channels()
        )));
    }
    let (out_h, out_w, pad_top, pad_left) = output_dims(input, w, stride, padding)?;
    let (in_h, in_w, cin) = input.shape();
    let cout = w.out_channels();
    let (kh, kw) = (w.kernel_h(), w.kernel_w());
    let values = w.values();
    let bias = w.bias();

    let mut out = vec![0.0f32; out_h * out_w * cout];
    out.par_chunks_mut(out_w * cout)
        .enumerate()
        .for_each(|(oy, row)| {
            for ox in 0..out_w {
                let acc = &mut row[ox * cout..(ox + 1) * cout];
                acc.copy_from_slice(bias);
                for ky in 0..kh {
                    let iy = (oy * stride + ky) as isize - pad_top as isize;
                    if iy < 0 || iy >= in_h as isize {
                        continue;
                    }
                    for kx in 0..kw {
                        let ix = (ox * stride + kx) as isize - pad_left as isize;
                        if ix < 0 || ix >= in_w as isize {
                            continue;
                        }
                        let px = input.pixel(iy as usize, ix as usize);
                        let tap = &values[(ky * kw + kx) * cin * cout..(ky * kw + kx + 1) * cin * cout];
                        for (ci, &a) in px.iter().enumerate() {
                            let wrow = &tap[ci * cout..(ci + 1) * cout];
                            for (o, &wv) in acc.iter_mut().zip(wrow) {
                                *o += a * wv;
                            }
                        }
                    }
                }
            }
        });
    Tensor::from_vec(out_h, out_w, cout, out)
}

/// Per-channel spatial filtering (no cross-channel mixing).
pub fn depthwise_conv2d(
    input: &Tensor,
    w: &ConvWeights,
    stride: usize,
    padding: Padding,
) -> Result<Tensor> {
    check_stride(stride)?;
    if !w.is_depthwise() {
        return Err(Error::contract("depthwise_conv2d expects depthwise weights"));
    }
    if w.in_channels() != input.channels() {
        return Err(Error::contract(format!(
            "depthwise channel mismatch: weights expect {}, input has {}",
            w.in_channels(),
            input.channels()
        )));
    }
    let (out_h, out_w, pad_top, pad_left) = output_dims(input, w, stride, padding)?;
    let (in_h, in_w, c) = input.shape();
    let (kh, kw) = (w.kernel_h(), w.kernel_w());
    let values = w.values();
    let bias = w.bias();

    let mut out = vec![0.0f32; out_h * out_w * c];
    out.par_chunks_mut(out_w * c).enumerate().for_each(|(oy, row)| {
        for ox in 0..out_w {
            let acc = &mut row[ox * c..(ox + 1) * c];
            acc.copy_from_slice(bias);
            for ky in 0..kh {
                let iy = (oy * stride + ky) as isize - pad_top as isize;
                if iy < 0 || iy >= in_h as isize {
                    continue;
                }
                for kx in 0..kw {
                    let ix = (ox * stride + kx) as isize - pad_left as isize;
                    if ix < 0 || ix >= in_w as isize {
                        continue;
                    }
                    let px = input.pixel(iy as usize, ix as usize);
                    let tap = &values[(ky * kw + kx) * c..(ky * kw + kx + 1) * c];
                    for ((o, &a), &wv) in acc.iter_mut().zip(px).zip(tap) {
                        *o += a * wv;
                    }
                }
            }
        }
    });
    Tensor::from_vec(out_h, out_w, c, out)
}

/// 1x1 convolution: a per-pixel linear map across channels.
pub fn pointwise_conv(input: &Tensor, w: &ConvWeights) -> Result<Tensor> {
    if w.kernel_h() != 1 || w.kernel_w() != 1 {
        return Err(Error::contract(format!(
            "pointwise conv needs a 1x1 kernel, got {}x{}",
            w.kernel_h(),
            w.kernel_w()
        )));
    }
    conv2d(input, w, 1, Padding::Same)
}

/// Depthwise filtering followed by a 1x1 pointwise mix, both with same padding.
pub fn depthwise_separable_conv(
    input: &Tensor,
    dw: &ConvWeights,
    pw: &ConvWeights,
    stride: usize,
) -> Result<Tensor> {
    if pw.in_channels() != dw.out_channels() {
        return Err(Error::contract(format!(
            "pointwise expects {} channels, depthwise produces {}",
            pw.in_channels(),
            dw.out_channels()
        )));
    }
    let filtered = depthwise_conv2d(input, dw, stride, Padding::Same)?;
    pointwise_conv(&filtered, pw)
}

/// Leading crop for a transposed convolution whose output is exactly
/// `input * stride`: `(kernel - stride) / 2`.
pub fn transposed_padding(kernel: usize, stride: usize) -> Option<usize> {
    if kernel < stride || (kernel - stride) % 2 != 0 {
        None
    } else {
        Some((kernel - stride) / 2)
    }
}

/// Learnable upsampling. Output size is exactly `input * stride`; weights are
/// `(ky, kx, ci, co)` and each input pixel scatters `x * kernel` onto the
/// output grid at `i * stride - pad + k`.
///
/// Implemented as the equivalent gather so output rows can be filled
/// independently.
pub fn transposed_conv2d(input: &Tensor, w: &ConvWeights, stride: usize) -> Result<Tensor> {
    if stride == 0 {
        return Err(Error::contract("transposed conv stride must be positive"));
    }
    if w.is_depthwise() {
        return Err(Error::contract("transposed conv expects dense weights"));
    }
    if w.in_channels() != input.channels() {
        return Err(Error::contract(format!(
            "transposed conv channel mismatch: weights expect {}, input has {}",
            w.in_channels(),
            input.channels()
        )));
    }
    if w.kernel_h() != w.kernel_w() {
        return Err(Error::contract("transposed conv needs a square kernel"));
    }
    let k = w.kernel_h();
    let pad = transposed_padding(k, stride).ok_or_else(|| {
        Error::contract(format!(
            "kernel {k} with stride {stride} cannot upsample by exactly {stride}"
        ))
    })?;
    let (in_h, in_w, cin) = input.shape();
    let cout = w.out_channels();
    let (out_h, out_w) = (in_h * stride, in_w * stride);
    let values = w.values();
    let bias = w.bias();

    let mut out = vec![0.0f32; out_h * out_w * cout];
    out.par_chunks_mut(out_w * cout)
        .enumerate()
        .for_each(|(oy, row)| {
            let ty = oy + pad;
            for ox in 0..out_w {
                let tx = ox + pad;
                let acc = &mut row[ox * cout..(ox + 1) * cout];
                acc.copy_from_slice(bias);
                // iy * stride + ky == ty  with 0 <= ky < k
                let iy_lo = (ty + 1).saturating_sub(k).div_ceil(stride);
                let iy_hi = (ty / stride).min(in_h - 1);
                let ix_lo = (tx + 1).saturating_sub(k).div_ceil(stride);
                let ix_hi = (tx / stride).min(in_w - 1);
                for iy in iy_lo..=iy_hi {
                    if iy >= in_h {
                        break;
                    }
                    let ky = ty - iy * stride;
                    for ix in ix_lo..=ix_hi {
                        if ix >= in_w {
                            break;
                        }
                        let kx = tx - ix * stride;
                        let px = input.pixel(iy, ix);
                        let tap = &values[(ky * k + kx) * cin * cout..(ky * k + kx + 1) * cin * cout];
                        for (ci, &a) in px.iter().enumerate() {
                            let wrow = &tap[ci * cout..(ci + 1) * cout];
                            for (o, &wv) in acc.iter_mut().zip(wrow) {
                                *o += a * wv;
                            }
                        }
                    }
                }
            }
        });
    Tensor::from_vec(out_h, out_w, cout, out)
}

/// Source coordinate and blend factor for half-pixel-center resampling.
#[inline]
fn sample_axis(dst: usize, in_len: usize, out_len: usize) -> (usize, usize, f32) {
    let scale = in_len as f32 / out_len as f32;
    let src = ((dst as f32 + 0.5) * scale - 0.5).clamp(0.0, (in_len - 1) as f32);
    let lo = src.floor() as usize;
    let hi = (lo + 1).min(in_len - 1);
    (lo, hi, src - lo as f32)
}

/// Bilinear resize with half-pixel-center sampling and edge clamping.
pub fn resize_bilinear(input: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::contract(format!(
            "resize target must be positive, got {out_h}x{out_w}"
        )));
    }
    let (in_h, in_w, c) = input.shape();
    if (in_h, in_w) == (out_h, out_w) {
        return Ok(input.clone());
    }
    let cols: Vec<(usize, usize, f32)> = (0..out_w).map(|x| sample_axis(x, in_w, out_w)).collect();
    let mut out = vec![0.0f32; out_h * out_w * c];
    out.par_chunks_mut(out_w * c).enumerate().for_each(|(oy, row)| {
        let (y0, y1, fy) = sample_axis(oy, in_h, out_h);
        for (ox, &(x0, x1, fx)) in cols.iter().enumerate() {
            let a = input.pixel(y0, x0);
            let b = input.pixel(y0, x1);
            let p = input.pixel(y1, x0);
            let q = input.pixel(y1, x1);
            for ch in 0..c {
                let top = a[ch] + (b[ch] - a[ch]) * fx;
                let bottom = p[ch] + (q[ch] - p[ch]) * fx;
                row[ox * c + ch] = top + (bottom - top) * fy;
            }
        }
    });
    Tensor::from_vec(out_h, out_w, c, out)
}

pub fn relu(input: &Tensor) -> Tensor {
    let mut out = input.clone();
    relu_in_place(&mut out);
    out
}

pub fn relu_in_place(t: &mut Tensor) {
    for v in t.data_mut() {
        *v = v.max(0.0);
    }
}

/// Elementwise sum (skip connection).
pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let mut out = a.clone();
    add_in_place(&mut out, b)?;
    Ok(out)
}

pub fn add_in_place(acc: &mut Tensor, b: &Tensor) -> Result<()> {
    if acc.shape() != b.shape() {
        return Err(Error::contract(format!(
            "add shape mismatch: {:?} vs {:?}",
            acc.shape(),
            b.shape()
        )));
    }
    for (x, y) in acc.data_mut().iter_mut().zip(b.data()) {
        *x += y;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ones(h: usize, w: usize, c: usize) -> Tensor {
        Tensor::filled(h, w, c, 1.0).unwrap()
    }

    #[test]
    fn same_padding_geometry() {
        assert_eq!(conv_output_geometry(256, 3, 2, Padding::Same), Some((128, 0)));
        assert_eq!(conv_output_geometry(5, 3, 1, Padding::Same), Some((5, 1)));
        // even total pad 1: extra pixel bottom/right, so top gets 0
        assert_eq!(conv_output_geometry(4, 2, 1, Padding::Same), Some((4, 0)));
        assert_eq!(conv_output_geometry(7, 3, 2, Padding::Valid), Some((3, 0)));
        assert_eq!(conv_output_geometry(2, 3, 1, Padding::Valid), None);
    }

    #[test]
    fn ones_kernel_counts_neighbours() {
        let w = ConvWeights::dense(3, 3, 1, 1, vec![1.0; 9], vec![0.0]).unwrap();
        let out = conv2d(&ones(3, 3, 1), &w, 1, Padding::Same).unwrap();
        assert_eq!(out.at(1, 1, 0), 9.0);
        assert_eq!(out.at(0, 0, 0), 4.0);
        assert_eq!(out.at(0, 1, 0), 6.0);
    }

    #[test]
    fn zero_kernel_gives_bias() {
        let input = Tensor::from_fn(5, 4, 2, |y, x, c| (y + x + c) as f32).unwrap();
        let w = ConvWeights::dense(3, 3, 2, 3, vec![0.0; 54], vec![1.5, -2.0, 0.25]).unwrap();
        let out = conv2d(&input, &w, 2, Padding::Same).unwrap();
        assert_eq!(out.shape(), (3, 2, 3));
        for px in out.data().chunks(3) {
            assert_eq!(px, &[1.5, -2.0, 0.25]);
        }
    }

    #[test]
    fn strided_identity_subsamples() {
        let input = Tensor::from_fn(4, 4, 1, |y, x, _| (y * 4 + x) as f32).unwrap();
        let w = ConvWeights::dense(1, 1, 1, 1, vec![1.0], vec![0.0]).unwrap();
        let out = conv2d(&input, &w, 2, Padding::Same).unwrap();
        assert_eq!(out.data(), &[0.0, 2.0, 8.0, 10.0]);
    }

    #[test]
    fn conv_rejects_bad_inputs() {
        let w = ConvWeights::dense_zeros(3, 3, 2, 1).unwrap();
        assert!(matches!(conv2d(&ones(4, 4, 1), &w, 1, Padding::Same), Err(Error::Contract(_))));
        let w1 = ConvWeights::dense_zeros(3, 3, 1, 1).unwrap();
        assert!(conv2d(&ones(4, 4, 1), &w1, 3, Padding::Same).is_err());
        assert!(conv2d(&ones(2, 2, 1), &w1, 1, Padding::Valid).is_err());
    }

    #[test]
    fn separable_constant_channels() {
        let input = Tensor::from_fn(5, 5, 2, |_, _, c| (c + 1) as f32).unwrap();
        let dw = ConvWeights::depthwise(3, 3, 2, vec![1.0; 18], vec![0.0; 2]).unwrap();
        let pw = ConvWeights::dense(1, 1, 2, 1, vec![1.0, 1.0], vec![0.0]).unwrap();
        let out = depthwise_separable_conv(&input, &dw, &pw, 1).unwrap();
        assert_eq!(out.at(2, 2, 0), 27.0);
    }

    #[test]
    fn separable_identity() {
        let input = Tensor::from_fn(4, 3, 2, |y, x, c| y as f32 - x as f32 * 0.5 + c as f32).unwrap();
        let dw = ConvWeights::depthwise(1, 1, 2, vec![1.0; 2], vec![0.0; 2]).unwrap();
        let pw = ConvWeights::dense(1, 1, 2, 2, vec![1.0, 0.0, 0.0, 1.0], vec![0.0; 2]).unwrap();
        assert_eq!(depthwise_separable_conv(&input, &dw, &pw, 1).unwrap(), input);
    }

    #[test]
    fn pointwise_examples() {
        let input = Tensor::from_fn(3, 3, 2, |_, _, c| (c + 1) as f32).unwrap();
        let w = ConvWeights::dense(1, 1, 2, 1, vec![3.0, 4.0], vec![0.0]).unwrap();
        let out = pointwise_conv(&input, &w).unwrap();
        assert!(out.data().iter().all(|&v| v == 11.0));

        let zero = ConvWeights::dense(1, 1, 2, 1, vec![0.0, 0.0], vec![5.0]).unwrap();
        assert!(pointwise_conv(&input, &zero).unwrap().data().iter().all(|&v| v == 5.0));

        let not_1x1 = ConvWeights::dense_zeros(3, 3, 2, 1).unwrap();
        assert!(pointwise_conv(&input, &not_1x1).is_err());
    }

    #[test]
    fn transposed_single_site_scatter() {
        let input = Tensor::filled(1, 1, 1, 3.0).unwrap();
        let w = ConvWeights::dense(2, 2, 1, 1, vec![1.0, 2.0, 3.0, 4.0], vec![0.0]).unwrap();
        let out = transposed_conv2d(&input, &w, 2).unwrap();
        assert_eq!(out.shape(), (2, 2, 1));
        assert_eq!(out.data(), &[3.0, 6.0, 9.0, 12.0]);
    }

    #[test]
    fn transposed_doubles_size() {
        let input = Tensor::zeros(8, 8, 5).unwrap();
        let w = ConvWeights::dense_zeros(4, 4, 5, 7).unwrap();
        assert_eq!(transposed_conv2d(&input, &w, 2).unwrap().shape(), (16, 16, 7));
        let odd = ConvWeights::dense_zeros(3, 3, 5, 7).unwrap();
        assert!(transposed_conv2d(&input, &odd, 2).is_err());
    }

    #[test]
    fn resize_examples() {
        let c = Tensor::filled(3, 5, 2, 0.7).unwrap();
        let r = resize_bilinear(&c, 7, 2).unwrap();
        assert!(r.data().iter().all(|&v| v == 0.7));

        let ramp = Tensor::from_vec(2, 2, 1, vec![0.0, 1.0, 0.0, 1.0]).unwrap();
        let r = resize_bilinear(&ramp, 2, 3).unwrap();
        assert_eq!(r.at(0, 1, 0), 0.5);
        assert_eq!(r.at(1, 1, 0), 0.5);
        assert_eq!(r.at(0, 0, 0), 0.0);
        assert_eq!(r.at(0, 2, 0), 1.0);

        let t = Tensor::from_fn(3, 4, 2, |y, x, c| (y * x) as f32 - c as f32 * 0.3).unwrap();
        assert_eq!(resize_bilinear(&t, 3, 4).unwrap(), t);
        assert!(resize_bilinear(&t, 0, 4).is_err());
    }

    #[test]
    fn relu_and_add() {
        let t = Tensor::from_vec(1, 3, 1, vec![-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(relu(&t).data(), &[0.0, 0.0, 2.0]);
        let z = Tensor::zeros(1, 3, 1).unwrap();
        assert_eq!(add(&t, &z).unwrap(), t);
        assert!(add(&t, &Tensor::zeros(3, 1, 1).unwrap()).is_err());
    }
}
