//! Convolution and batch normalization kernels on channel-last buffers.
//!
//! Feature maps are `pixels x channels` matrices. A layer may read the
//! leading channels of a wider buffer (`stride > channels`), which is how
//! dense blocks see the running concatenation without copying it.

use rayon::prelude::*;

use crate::scalar::{gemm, MatLayout, Scalar};

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.9;

/// Spatial geometry shared by every layer of one forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    pub batch: usize,
    pub height: usize,
    pub width: usize,
}

impl Grid {
    pub fn image_pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn pixels(&self) -> usize {
        self.batch * self.image_pixels()
    }
}

/// Unfold one `h x w x c` image into `(h*w) x (9*c)` patches, zero padded.
fn im2col<T: Scalar>(input: &[T], h: usize, w: usize, c: usize, col: &mut [T]) {
    let k = 9 * c;
    for y in 0..h {
        for x in 0..w {
            let row = &mut col[(y * w + x) * k..(y * w + x + 1) * k];
            for ky in 0..3 {
                let sy = y as isize + ky as isize - 1;
                for kx in 0..3 {
                    let sx = x as isize + kx as isize - 1;
                    let dst = &mut row[(ky * 3 + kx) * c..(ky * 3 + kx + 1) * c];
                    if sy < 0 || sy >= h as isize || sx < 0 || sx >= w as isize {
                        dst.fill(T::zero());
                    } else {
                        let s = (sy as usize * w + sx as usize) * c;
                        dst.copy_from_slice(&input[s..s + c]);
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatter-add patch gradients into the image.
fn col2im_add<T: Scalar>(col: &[T], h: usize, w: usize, c: usize, out: &mut [T]) {
    let k = 9 * c;
    for y in 0..h {
        for x in 0..w {
            let row = &col[(y * w + x) * k..(y * w + x + 1) * k];
            for ky in 0..3 {
                let sy = y as isize + ky as isize - 1;
                if sy < 0 || sy >= h as isize {
                    continue;
                }
                for kx in 0..3 {
                    let sx = x as isize + kx as isize - 1;
                    if sx < 0 || sx >= w as isize {
                        continue;
                    }
                    let s = (sy as usize * w + sx as usize) * c;
                    let src = &row[(ky * 3 + kx) * c..(ky * 3 + kx + 1) * c];
                    for (o, g) in out[s..s + c].iter_mut().zip(src) {
                        *o += *g;
                    }
                }
            }
        }
    }
}

/// 3x3 same-padding convolution.
///
/// `input` is contiguous `pixels x cin`; the result is written to channels
/// `[offset, offset + cout)` of `out`, whose rows are `out_stride` wide.
/// `kernel` is `[3, 3, cin, cout]`, i.e. a `(9*cin) x cout` matrix.
#[allow(clippy::too_many_arguments)]
pub fn conv_forward<T: Scalar>(
    grid: Grid,
    input: &[T],
    cin: usize,
    kernel: &[T],
    bias: Option<&[T]>,
    cout: usize,
    out: &mut [T],
    out_stride: usize,
    offset: usize,
) {
    let hw = grid.image_pixels();
    debug_assert_eq!(input.len(), grid.pixels() * cin);
    debug_assert_eq!(kernel.len(), 9 * cin * cout);
    debug_assert_eq!(out.len(), grid.pixels() * out_stride);
    out.par_chunks_mut(hw * out_stride)
        .zip(input.par_chunks(hw * cin))
        .for_each_init(
            || vec![T::zero(); hw * 9 * cin],
            |col, (o, img)| {
                im2col(img, grid.height, grid.width, cin, col);
                let lc = MatLayout {
                    rows: hw,
                    cols: cout,
                    row_stride: out_stride,
                    col_stride: 1,
                };
                gemm(
                    T::one(),
                    col,
                    MatLayout::row_major(hw, 9 * cin),
                    kernel,
                    MatLayout::row_major(9 * cin, cout),
                    T::zero(),
                    &mut o[offset..],
                    lc,
                );
                if let Some(b) = bias {
                    for px in o.chunks_mut(out_stride) {
                        for (v, bb) in px[offset..offset + cout].iter_mut().zip(b) {
                            *v += *bb;
                        }
                    }
                }
            },
        );
}

/// Gradients of [`conv_forward`].
///
/// `dout` holds the output gradient at channels `[offset, offset + cout)`
/// of rows `dout_stride` wide. Kernel (and bias) gradients are accumulated
/// into `dkernel`/`dbias`; per-image partial sums are added in batch order
/// so the result does not depend on thread scheduling. When `dinput` is
/// given it receives (accumulates) the contiguous input gradient.
#[allow(clippy::too_many_arguments)]
pub fn conv_backward<T: Scalar>(
    grid: Grid,
    input: &[T],
    cin: usize,
    kernel: &[T],
    cout: usize,
    dout: &[T],
    dout_stride: usize,
    offset: usize,
    dkernel: &mut [T],
    dbias: Option<&mut [T]>,
    dinput: Option<&mut [T]>,
) {
    let hw = grid.image_pixels();
    let k = 9 * cin;
    let dout_layout = MatLayout {
        rows: hw,
        cols: cout,
        row_stride: dout_stride,
        col_stride: 1,
    };
    let image_grad = |col: &mut Vec<T>, img: &[T], d: &[T], din: Option<&mut [T]>| -> Vec<T> {
        im2col(img, grid.height, grid.width, cin, col);
        let mut dk = vec![T::zero(); k * cout];
        gemm(
            T::one(),
            col,
            MatLayout::row_major(hw, k).transposed(),
            &d[offset..],
            dout_layout,
            T::zero(),
            &mut dk,
            MatLayout::row_major(k, cout),
        );
        if let Some(din) = din {
            gemm(
                T::one(),
                &d[offset..],
                dout_layout,
                kernel,
                MatLayout::row_major(k, cout).transposed(),
                T::zero(),
                col,
                MatLayout::row_major(hw, k),
            );
            col2im_add(col, grid.height, grid.width, cin, din);
        }
        dk
    };
    let partials: Vec<Vec<T>> = match dinput {
        Some(din) => din
            .par_chunks_mut(hw * cin)
            .zip(input.par_chunks(hw * cin))
            .zip(dout.par_chunks(hw * dout_stride))
            .map_init(
                || vec![T::zero(); hw * k],
                |col, ((di, img), d)| image_grad(col, img, d, Some(di)),
            )
            .collect(),
        None => input
            .par_chunks(hw * cin)
            .zip(dout.par_chunks(hw * dout_stride))
            .map_init(
                || vec![T::zero(); hw * k],
                |col, (img, d)| image_grad(col, img, d, None),
            )
            .collect(),
    };
    for p in &partials {
        for (a, b) in dkernel.iter_mut().zip(p) {
            *a += *b;
        }
    }
    if let Some(db) = dbias {
        for px in dout.chunks(dout_stride) {
            for (a, g) in db.iter_mut().zip(&px[offset..offset + cout]) {
                *a += *g;
            }
        }
    }
}

/// Per-channel statistics used to normalize one batchnorm input.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats<T> {
    pub mean: Vec<T>,
    pub inv_std: Vec<T>,
    /// Biased batch variance (train mode) or running variance (infer mode).
    pub var: Vec<T>,
}

/// Batch mean and biased variance of the leading `c` channels, in `f64`.
pub fn batch_stats<T: Scalar>(input: &[T], c: usize, stride: usize) -> NormStats<T> {
    let n = input.len() / stride;
    let mut sum = vec![0.0f64; c];
    for px in input.chunks(stride) {
        for (s, v) in sum.iter_mut().zip(&px[..c]) {
            *s += v.f64();
        }
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
    let mut sq = vec![0.0f64; c];
    for px in input.chunks(stride) {
        for ((s, v), m) in sq.iter_mut().zip(&px[..c]).zip(&mean) {
            let d = v.f64() - m;
            *s += d * d;
        }
    }
    let var: Vec<f64> = sq.iter().map(|s| s / n as f64).collect();
    NormStats {
        mean: mean.iter().map(|m| T::of(*m)).collect(),
        inv_std: var.iter().map(|v| T::of(1.0 / (v + BN_EPS).sqrt())).collect(),
        var: var.iter().map(|v| T::of(*v)).collect(),
    }
}

pub fn running_stats<T: Scalar>(mean: &[T], var: &[T]) -> NormStats<T> {
    NormStats {
        mean: mean.to_vec(),
        inv_std: var.iter().map(|v| T::of(1.0 / (v.f64() + BN_EPS).sqrt())).collect(),
        var: var.to_vec(),
    }
}

/// `relu(scale * (x - mean) * inv_std + shift)` into a contiguous buffer.
pub fn norm_relu_forward<T: Scalar>(
    input: &[T],
    c: usize,
    stride: usize,
    stats: &NormStats<T>,
    scale: &[T],
    shift: &[T],
    out: &mut [T],
) {
    let a: Vec<T> = scale.iter().zip(&stats.inv_std).map(|(g, s)| *g * *s).collect();
    for (px, o) in input.chunks(stride).zip(out.chunks_mut(c)) {
        for ch in 0..c {
            let v = a[ch] * (px[ch] - stats.mean[ch]) + shift[ch];
            o[ch] = if v > T::zero() { v } else { T::zero() };
        }
    }
}

/// Backward of [`norm_relu_forward`] with batch statistics.
///
/// `act` is the forward output (its sign gives the ReLU mask). The input
/// gradient is accumulated into `dinput` (rows `stride` wide).
#[allow(clippy::too_many_arguments)]
pub fn norm_relu_backward<T: Scalar>(
    input: &[T],
    c: usize,
    stride: usize,
    stats: &NormStats<T>,
    scale: &[T],
    act: &[T],
    dact: &[T],
    dscale: &mut [T],
    dshift: &mut [T],
    dinput: &mut [T],
) {
    let n = act.len() / c;
    let mut sum_dy = vec![0.0f64; c];
    let mut sum_dy_xhat = vec![0.0f64; c];
    for ((px, a), d) in input.chunks(stride).zip(act.chunks(c)).zip(dact.chunks(c)) {
        for ch in 0..c {
            if a[ch] > T::zero() {
                let xhat = (px[ch] - stats.mean[ch]) * stats.inv_std[ch];
                sum_dy[ch] += d[ch].f64();
                sum_dy_xhat[ch] += (d[ch] * xhat).f64();
            }
        }
    }
    for ch in 0..c {
        dshift[ch] += T::of(sum_dy[ch]);
        dscale[ch] += T::of(sum_dy_xhat[ch]);
    }
    let nf = n as f64;
    let k: Vec<T> = (0..c)
        .map(|ch| T::of((scale[ch] * stats.inv_std[ch]).f64() / nf))
        .collect();
    let mdy: Vec<T> = sum_dy.iter().map(|s| T::of(*s)).collect();
    let mdx: Vec<T> = sum_dy_xhat.iter().map(|s| T::of(*s)).collect();
    let nt = T::of(nf);
    for (((px, a), d), di) in input
        .chunks(stride)
        .zip(act.chunks(c))
        .zip(dact.chunks(c))
        .zip(dinput.chunks_mut(stride))
    {
        for ch in 0..c {
            let xhat = (px[ch] - stats.mean[ch]) * stats.inv_std[ch];
            let dy = if a[ch] > T::zero() { d[ch] } else { T::zero() };
            di[ch] += k[ch] * (nt * dy - mdy[ch] - xhat * mdx[ch]);
        }
    }
}

/// Copy the leading `c` channels into a contiguous buffer (the identity
/// pre-activation of linear models).
pub fn gather_channels<T: Scalar>(input: &[T], c: usize, stride: usize, out: &mut [T]) {
    for (px, o) in input.chunks(stride).zip(out.chunks_mut(c)) {
        o.copy_from_slice(&px[..c]);
    }
}

/// Adjoint of [`gather_channels`].
pub fn scatter_add_channels<T: Scalar>(d: &[T], c: usize, stride: usize, out: &mut [T]) {
    for (px, o) in d.chunks(c).zip(out.chunks_mut(stride)) {
        for (a, b) in o[..c].iter_mut().zip(px) {
            *a += *b;
        }
    }
}
