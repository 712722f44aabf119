//! Dense `f32` tensors and the convolution kernels the networks are built on.
//!
//! Feature maps are single images in `[C, H, W]` layout; convolution weights
//! are `[O, C, K, K]`. Matrix products go through `matrixmultiply`.

use std::fmt;

#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor{:?}", self.shape)
    }
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Self {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "shape {shape:?} does not match {} values",
            data.len()
        );
        Self { shape, data }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn full(shape: &[usize], value: f32) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    /// `(C, H, W)` of a feature map.
    pub fn chw(&self) -> (usize, usize, usize) {
        assert_eq!(self.shape.len(), 3, "expected a [C,H,W] tensor, got {:?}", self.shape);
        (self.shape[0], self.shape[1], self.shape[2])
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// `C = alpha * A * B + beta * C` with explicit row/column strides.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f32],
    rsa: isize,
    csa: isize,
    b: &[f32],
    rsb: isize,
    csb: isize,
    c: &mut [f32],
    beta: f32,
) {
    debug_assert!(c.len() >= m * n);
    // SAFETY: callers pass buffers covering the strided extents; the asserts
    // below check the largest index touched.
    assert!(m == 0 || k == 0 || (m - 1) * rsa as usize + (k - 1) * (csa as usize) < a.len());
    assert!(k == 0 || n == 0 || (k - 1) * rsb as usize + (n - 1) * (csb as usize) < b.len());
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Geometry of one 2-D convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub in_channels: usize,
    pub height: usize,
    pub width: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvGeom {
    pub fn out_height(&self) -> usize {
        (self.height + 2 * self.pad - self.kernel) / self.stride + 1
    }

    pub fn out_width(&self) -> usize {
        (self.width + 2 * self.pad - self.kernel) / self.stride + 1
    }

    fn is_pointwise(&self) -> bool {
        self.kernel == 1 && self.stride == 1 && self.pad == 0
    }

    fn col_rows(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }
}

/// Unfolds `x` into a `[C*K*K, OH*OW]` patch matrix.
fn im2col(x: &[f32], g: &ConvGeom) -> Vec<f32> {
    let (oh, ow) = (g.out_height(), g.out_width());
    let n = oh * ow;
    let mut cols = vec![0.0f32; g.col_rows() * n];
    let pad = g.pad as isize;
    for c in 0..g.in_channels {
        let plane = &x[c * g.height * g.width..(c + 1) * g.height * g.width];
        for ky in 0..g.kernel {
            for kx in 0..g.kernel {
                let row = (c * g.kernel + ky) * g.kernel + kx;
                let dst = &mut cols[row * n..(row + 1) * n];
                for oy in 0..oh {
                    let iy = (oy * g.stride + ky) as isize - pad;
                    if iy < 0 || iy >= g.height as isize {
                        continue;
                    }
                    let src = &plane[iy as usize * g.width..(iy as usize + 1) * g.width];
                    let drow = &mut dst[oy * ow..(oy + 1) * ow];
                    if g.stride == 1 {
                        // ix = ox + kx - pad, valid for ox in [lo, hi)
                        let lo = (pad - kx as isize).max(0) as usize;
                        let hi = ((g.width as isize + pad - kx as isize).min(ow as isize)).max(0)
                            as usize;
                        if lo < hi {
                            let start = (lo as isize + kx as isize - pad) as usize;
                            drow[lo..hi].copy_from_slice(&src[start..start + (hi - lo)]);
                        }
                    } else {
                        for (ox, d) in drow.iter_mut().enumerate() {
                            let ix = (ox * g.stride + kx) as isize - pad;
                            if ix >= 0 && ix < g.width as isize {
                                *d = src[ix as usize];
                            }
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatters patch gradients back onto the image.
fn col2im(cols: &[f32], g: &ConvGeom) -> Vec<f32> {
    let (oh, ow) = (g.out_height(), g.out_width());
    let n = oh * ow;
    let mut x = vec![0.0f32; g.in_channels * g.height * g.width];
    let pad = g.pad as isize;
    for c in 0..g.in_channels {
        let plane = &mut x[c * g.height * g.width..(c + 1) * g.height * g.width];
        for ky in 0..g.kernel {
            for kx in 0..g.kernel {
                let row = (c * g.kernel + ky) * g.kernel + kx;
                let src = &cols[row * n..(row + 1) * n];
                for oy in 0..oh {
                    let iy = (oy * g.stride + ky) as isize - pad;
                    if iy < 0 || iy >= g.height as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * g.width..(iy as usize + 1) * g.width];
                    let srow = &src[oy * ow..(oy + 1) * ow];
                    if g.stride == 1 {
                        let lo = (pad - kx as isize).max(0) as usize;
                        let hi = ((g.width as isize + pad - kx as isize).min(ow as isize)).max(0)
                            as usize;
                        if lo < hi {
                            let start = (lo as isize + kx as isize - pad) as usize;
                            for (d, s) in dst[start..start + (hi - lo)].iter_mut().zip(&srow[lo..hi]) {
                                *d += s;
                            }
                        }
                    } else {
                        for (ox, s) in srow.iter().enumerate() {
                            let ix = (ox * g.stride + kx) as isize - pad;
                            if ix >= 0 && ix < g.width as isize {
                                dst[ix as usize] += s;
                            }
                        }
                    }
                }
            }
        }
    }
    x
}

fn geom_of(x: &Tensor, w: &Tensor, stride: usize, pad: usize) -> ConvGeom {
    let (c, h, wd) = x.chw();
    assert_eq!(w.shape().len(), 4, "conv weight must be [O,C,K,K]");
    assert_eq!(w.shape()[1], c, "conv weight expects {} channels, input has {c}", w.shape()[1]);
    assert_eq!(w.shape()[2], w.shape()[3], "square kernels only");
    ConvGeom {
        in_channels: c,
        height: h,
        width: wd,
        kernel: w.shape()[2],
        stride,
        pad,
    }
}

pub fn conv2d(x: &Tensor, w: &Tensor, bias: Option<&Tensor>, stride: usize, pad: usize) -> Tensor {
    let g = geom_of(x, w, stride, pad);
    let out_c = w.shape()[0];
    let (oh, ow) = (g.out_height(), g.out_width());
    let n = oh * ow;
    let kk = g.col_rows();
    let mut y = vec![0.0f32; out_c * n];
    if let Some(b) = bias {
        assert_eq!(b.len(), out_c);
        for (o, bv) in b.data().iter().enumerate() {
            y[o * n..(o + 1) * n].fill(*bv);
        }
    }
    let beta = if bias.is_some() { 1.0 } else { 0.0 };
    if g.is_pointwise() {
        gemm(out_c, kk, n, w.data(), kk as isize, 1, x.data(), n as isize, 1, &mut y, beta);
    } else {
        let cols = im2col(x.data(), &g);
        gemm(out_c, kk, n, w.data(), kk as isize, 1, &cols, n as isize, 1, &mut y, beta);
    }
    Tensor::new(vec![out_c, oh, ow], y)
}

/// Gradient of [`conv2d`] with respect to its input.
pub fn conv2d_grad_input(dy: &Tensor, w: &Tensor, x_shape: &[usize], stride: usize, pad: usize) -> Tensor {
    let g = ConvGeom {
        in_channels: x_shape[0],
        height: x_shape[1],
        width: x_shape[2],
        kernel: w.shape()[2],
        stride,
        pad,
    };
    let out_c = w.shape()[0];
    let n = g.out_height() * g.out_width();
    let kk = g.col_rows();
    let mut dcols = vec![0.0f32; kk * n];
    // W^T [kk, O] * dY [O, n]
    gemm(kk, out_c, n, w.data(), 1, kk as isize, dy.data(), n as isize, 1, &mut dcols, 0.0);
    if g.is_pointwise() {
        return Tensor::new(x_shape.to_vec(), dcols);
    }
    Tensor::new(x_shape.to_vec(), col2im(&dcols, &g))
}

/// Gradients of [`conv2d`] with respect to weight and bias.
pub fn conv2d_grad_weight(dy: &Tensor, x: &Tensor, w_shape: &[usize], stride: usize, pad: usize) -> (Tensor, Tensor) {
    let (c, h, wd) = x.chw();
    let g = ConvGeom {
        in_channels: c,
        height: h,
        width: wd,
        kernel: w_shape[2],
        stride,
        pad,
    };
    let out_c = w_shape[0];
    let n = g.out_height() * g.out_width();
    let kk = g.col_rows();
    let mut dw = vec![0.0f32; out_c * kk];
    // dY [O, n] * cols^T [n, kk]
    if g.is_pointwise() {
        gemm(out_c, n, kk, dy.data(), n as isize, 1, x.data(), 1, n as isize, &mut dw, 0.0);
    } else {
        let cols = im2col(x.data(), &g);
        gemm(out_c, n, kk, dy.data(), n as isize, 1, &cols, 1, n as isize, &mut dw, 0.0);
    }
    let db = dy.data().chunks_exact(n).map(|row| row.iter().sum()).collect();
    (Tensor::new(w_shape.to_vec(), dw), Tensor::new(vec![out_c], db))
}

/// 2x2 max pooling with stride 2 (trailing odd row/column dropped). Returns
/// the pooled map and the flat input index of every maximum.
pub fn max_pool2(x: &Tensor) -> (Tensor, Vec<u32>) {
    let (c, h, w) = x.chw();
    let (oh, ow) = (h / 2, w / 2);
    let mut out = vec![0.0f32; c * oh * ow];
    let mut arg = vec![0u32; c * oh * ow];
    let xd = x.data();
    for ch in 0..c {
        let base = ch * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let i0 = base + 2 * oy * w + 2 * ox;
                let cand = [i0, i0 + 1, i0 + w, i0 + w + 1];
                let mut best = cand[0];
                for &i in &cand[1..] {
                    if xd[i] > xd[best] {
                        best = i;
                    }
                }
                let o = (ch * oh + oy) * ow + ox;
                out[o] = xd[best];
                arg[o] = best as u32;
            }
        }
    }
    (Tensor::new(vec![c, oh, ow], out), arg)
}

/// 2x2 average pooling with stride 2 (trailing odd row/column dropped).
pub fn avg_pool2(x: &Tensor) -> Tensor {
    let (c, h, w) = x.chw();
    let (oh, ow) = (h / 2, w / 2);
    let mut out = vec![0.0f32; c * oh * ow];
    let xd = x.data();
    for ch in 0..c {
        let base = ch * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let i0 = base + 2 * oy * w + 2 * ox;
                out[(ch * oh + oy) * ow + ox] = 0.25 * (xd[i0] + xd[i0 + 1] + xd[i0 + w] + xd[i0 + w + 1]);
            }
        }
    }
    Tensor::new(vec![c, oh, ow], out)
}

pub fn avg_pool2_grad(dy: &Tensor, x_shape: &[usize]) -> Tensor {
    let (c, h, w) = (x_shape[0], x_shape[1], x_shape[2]);
    let (oh, ow) = (h / 2, w / 2);
    let mut dx = vec![0.0f32; c * h * w];
    let d = dy.data();
    for ch in 0..c {
        let base = ch * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let g = 0.25 * d[(ch * oh + oy) * ow + ox];
                let i0 = base + 2 * oy * w + 2 * ox;
                dx[i0] += g;
                dx[i0 + 1] += g;
                dx[i0 + w] += g;
                dx[i0 + w + 1] += g;
            }
        }
    }
    Tensor::new(x_shape.to_vec(), dx)
}

/// Source index used by nearest-neighbour resampling from `src` to `dst`.
#[inline]
fn nearest_src(i: usize, src: usize, dst: usize) -> usize {
    ((i * src) / dst).min(src - 1)
}

/// Nearest-neighbour resize of a `[C,H,W]` map to `out_h x out_w`.
pub fn resize_nearest(x: &Tensor, out_h: usize, out_w: usize) -> Tensor {
    let (c, h, w) = x.chw();
    let mut out = vec![0.0f32; c * out_h * out_w];
    let xd = x.data();
    let cols: Vec<usize> = (0..out_w).map(|ox| nearest_src(ox, w, out_w)).collect();
    for ch in 0..c {
        for oy in 0..out_h {
            let iy = nearest_src(oy, h, out_h);
            let src = &xd[(ch * h + iy) * w..(ch * h + iy + 1) * w];
            let dst = &mut out[(ch * out_h + oy) * out_w..(ch * out_h + oy + 1) * out_w];
            for (d, &ix) in dst.iter_mut().zip(&cols) {
                *d = src[ix];
            }
        }
    }
    Tensor::new(vec![c, out_h, out_w], out)
}

pub fn resize_nearest_grad(dy: &Tensor, x_shape: &[usize]) -> Tensor {
    let (c, h, w) = (x_shape[0], x_shape[1], x_shape[2]);
    let (_, out_h, out_w) = dy.chw();
    let mut dx = vec![0.0f32; c * h * w];
    let d = dy.data();
    let cols: Vec<usize> = (0..out_w).map(|ox| nearest_src(ox, w, out_w)).collect();
    for ch in 0..c {
        for oy in 0..out_h {
            let iy = nearest_src(oy, h, out_h);
            let src = &d[(ch * out_h + oy) * out_w..(ch * out_h + oy + 1) * out_w];
            let dst = &mut dx[(ch * h + iy) * w..(ch * h + iy + 1) * w];
            for (s, &ix) in src.iter().zip(&cols) {
                dst[ix] += s;
            }
        }
    }
    Tensor::new(x_shape.to_vec(), dx)
}
