//! Convolution, sub-pixel rearrangement and the per-time-step frequency
//! transform.

use super::graph::{Graph, Op, Var};
use super::real::{gemm, MatRef};
use super::{Real, Tensor};
use crate::error::{Error, Result};

/// Output extent of a "same"-padded odd-kernel convolution.
pub fn conv_out_extent(n: usize, stride: usize) -> usize {
    n.div_ceil(stride)
}

struct ConvGeom {
    c: usize,
    h: usize,
    w: usize,
    ks: usize,
    stride: usize,
    ho: usize,
    wo: usize,
}

impl ConvGeom {
    fn pad(&self) -> isize {
        (self.ks / 2) as isize
    }

    fn col_rows(&self) -> usize {
        self.c * self.ks * self.ks
    }

    fn col_cols(&self) -> usize {
        self.ho * self.wo
    }
}

fn im2col<T: Real>(x: &[T], g: &ConvGeom, cols: &mut [T]) {
    let pad = g.pad();
    let n_out = g.col_cols();
    for c in 0..g.c {
        let plane = &x[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ky in 0..g.ks {
            for kx in 0..g.ks {
                let row = (c * g.ks + ky) * g.ks + kx;
                let dst = &mut cols[row * n_out..(row + 1) * n_out];
                for oy in 0..g.ho {
                    let iy = (oy * g.stride) as isize + ky as isize - pad;
                    let line = &mut dst[oy * g.wo..(oy + 1) * g.wo];
                    if iy < 0 || iy >= g.h as isize {
                        line.fill(T::zero());
                        continue;
                    }
                    let src = &plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for (ox, d) in line.iter_mut().enumerate() {
                        let ix = (ox * g.stride) as isize + kx as isize - pad;
                        *d = if ix < 0 || ix >= g.w as isize {
                            T::zero()
                        } else {
                            src[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

fn col2im<T: Real>(cols: &[T], g: &ConvGeom, dx: &mut [T]) {
    let pad = g.pad();
    let n_out = g.col_cols();
    for c in 0..g.c {
        let plane = &mut dx[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ky in 0..g.ks {
            for kx in 0..g.ks {
                let row = (c * g.ks + ky) * g.ks + kx;
                let src = &cols[row * n_out..(row + 1) * n_out];
                for oy in 0..g.ho {
                    let iy = (oy * g.stride) as isize + ky as isize - pad;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for ox in 0..g.wo {
                        let ix = (ox * g.stride) as isize + kx as isize - pad;
                        if ix >= 0 && ix < g.w as isize {
                            dst[ix as usize] += src[oy * g.wo + ox];
                        }
                    }
                }
            }
        }
    }
}

pub(crate) fn conv2d_backward<T: Real>(
    g: &[T],
    x_shape: &[usize],
    k: &Tensor<T>,
    cols: &[T],
    stride: usize,
    need_dx: bool,
) -> (Option<Vec<T>>, Vec<T>, Vec<T>) {
    let (n, c, h, w) = (x_shape[0], x_shape[1], x_shape[2], x_shape[3]);
    let ks = k.shape()[2];
    let co = k.shape()[0];
    let geom = ConvGeom {
        c,
        h,
        w,
        ks,
        stride,
        ho: conv_out_extent(h, stride),
        wo: conv_out_extent(w, stride),
    };
    let (rows, ncols) = (geom.col_rows(), geom.col_cols());
    let mut dk = vec![T::zero(); co * rows];
    let mut db = vec![T::zero(); co];
    let mut dx = need_dx.then(|| vec![T::zero(); n * c * h * w]);
    let mut dcols = vec![T::zero(); rows * ncols];
    for b in 0..n {
        let gb = &g[b * co * ncols..(b + 1) * co * ncols];
        let cb = &cols[b * rows * ncols..(b + 1) * rows * ncols];
        gemm(
            T::one(),
            gb,
            MatRef::dense(co, ncols),
            cb,
            MatRef::dense(rows, ncols).t(),
            T::one(),
            &mut dk,
            MatRef::dense(co, rows),
        );
        for (o, d) in db.iter_mut().enumerate() {
            *d += gb[o * ncols..(o + 1) * ncols].iter().copied().sum::<T>();
        }
        if let Some(dx) = dx.as_mut() {
            gemm(
                T::one(),
                k.data(),
                MatRef::dense(co, rows).t(),
                gb,
                MatRef::dense(co, ncols),
                T::zero(),
                &mut dcols,
                MatRef::dense(rows, ncols),
            );
            col2im(&dcols, &geom, &mut dx[b * c * h * w..(b + 1) * c * h * w]);
        }
    }
    (dx, dk, db)
}

pub(crate) fn pixel_shuffle_data<T: Real>(x: &[T], in_shape: &[usize], r: usize) -> Vec<T> {
    let (n, c_in, h, w) = (in_shape[0], in_shape[1], in_shape[2], in_shape[3]);
    let c = c_in / (r * r);
    let mut out = vec![T::zero(); x.len()];
    for b in 0..n {
        for ch in 0..c {
            for i in 0..r {
                for j in 0..r {
                    let src_c = ch * r * r + i * r + j;
                    for y in 0..h {
                        for xx in 0..w {
                            let src = ((b * c_in + src_c) * h + y) * w + xx;
                            let dst = ((b * c + ch) * h * r + y * r + i) * w * r + xx * r + j;
                            out[dst] = x[src];
                        }
                    }
                }
            }
        }
    }
    out
}

/// Inverse rearrangement; `out_shape` is the shuffled `[N, C, H·r, W·r]`.
pub(crate) fn pixel_unshuffle_data<T: Real>(y: &[T], out_shape: &[usize], r: usize) -> Vec<T> {
    let (n, c, hr, wr) = (out_shape[0], out_shape[1], out_shape[2], out_shape[3]);
    let (h, w, c_in) = (hr / r, wr / r, c * r * r);
    let mut x = vec![T::zero(); y.len()];
    for b in 0..n {
        for ch in 0..c {
            for i in 0..r {
                for j in 0..r {
                    let src_c = ch * r * r + i * r + j;
                    for yy in 0..h {
                        for xx in 0..w {
                            let dst = ((b * c_in + src_c) * h + yy) * w + xx;
                            let src = ((b * c + ch) * hr + yy * r + i) * wr + xx * r + j;
                            x[dst] = y[src];
                        }
                    }
                }
            }
        }
    }
    x
}

pub(crate) fn freq_transform_backward<T: Real>(
    g: &[T],
    x: &Tensor<T>,
    w: &Tensor<T>,
) -> (Vec<T>, Vec<T>) {
    let s = x.shape();
    let (f, t) = (s[2], s[3]);
    let blocks = s[0] * s[1];
    let mut dx = vec![T::zero(); x.len()];
    let mut dw = vec![T::zero(); f * f];
    for blk in 0..blocks {
        let off = blk * f * t;
        gemm(
            T::one(),
            w.data(),
            MatRef::dense(f, f).t(),
            g,
            MatRef::dense(f, t).at(off),
            T::zero(),
            &mut dx,
            MatRef::dense(f, t).at(off),
        );
        gemm(
            T::one(),
            g,
            MatRef::dense(f, t).at(off),
            x.data(),
            MatRef::dense(f, t).at(off).t(),
            T::one(),
            &mut dw,
            MatRef::dense(f, f),
        );
    }
    (dx, dw)
}

impl<T: Real> Graph<T> {
    /// Zero-padded ("same") cross-correlation with an odd square kernel
    /// `[C_out, C_in, k, k]`; stride 2 halves spatial extents, rounding up.
    pub fn conv2d(&mut self, x: Var, k: Var, b: Option<Var>, stride: usize) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        let ksh = self.shape(k).to_vec();
        if xs.len() != 4 || ksh.len() != 4 {
            return Err(Error::Shape(format!("conv2d: input {xs:?}, kernel {ksh:?}")));
        }
        if ksh[1] != xs[1] || ksh[2] != ksh[3] || ksh[2].is_multiple_of(2) {
            return Err(Error::Shape(format!(
                "conv2d: kernel {ksh:?} incompatible with input {xs:?}"
            )));
        }
        if stride == 0 {
            return Err(Error::InvalidArgument("conv2d stride must be positive".into()));
        }
        let co = ksh[0];
        if let Some(b) = b {
            if self.shape(b) != [co] {
                return Err(Error::Shape(format!("conv2d bias {:?}", self.shape(b))));
            }
        }
        let (n, c, h, w) = (xs[0], xs[1], xs[2], xs[3]);
        let geom = ConvGeom {
            c,
            h,
            w,
            ks: ksh[2],
            stride,
            ho: conv_out_extent(h, stride),
            wo: conv_out_extent(w, stride),
        };
        let (rows, ncols) = (geom.col_rows(), geom.col_cols());
        let mut cols = vec![T::zero(); n * rows * ncols];
        let mut out = vec![T::zero(); n * co * ncols];
        {
            let xd = self.value(x).data();
            let kd = self.value(k).data();
            for bi in 0..n {
                let cb = &mut cols[bi * rows * ncols..(bi + 1) * rows * ncols];
                im2col(&xd[bi * c * h * w..(bi + 1) * c * h * w], &geom, cb);
                let ob = &mut out[bi * co * ncols..(bi + 1) * co * ncols];
                if let Some(b) = b {
                    for (o, &bv) in self.value(b).data().iter().enumerate() {
                        ob[o * ncols..(o + 1) * ncols].fill(bv);
                    }
                }
                gemm(
                    T::one(),
                    kd,
                    MatRef::dense(co, rows),
                    cb,
                    MatRef::dense(rows, ncols),
                    T::one(),
                    ob,
                    MatRef::dense(co, ncols),
                );
            }
        }
        let value = Tensor::new(&[n, co, geom.ho, geom.wo], out)?;
        self.push(
            "conv2d",
            value,
            Op::Conv2d {
                x,
                k,
                b,
                stride,
                cols,
            },
        )
    }

    /// Depth-to-space: `[N, C·r², H, W]` → `[N, C, H·r, W·r]`.
    pub fn pixel_shuffle(&mut self, x: Var, r: usize) -> Result<Var> {
        let s = self.shape(x).to_vec();
        if s.len() != 4 || r == 0 || !s[1].is_multiple_of(r * r) {
            return Err(Error::Shape(format!(
                "pixel_shuffle: {s:?} channels not divisible by {}",
                r * r
            )));
        }
        let data = pixel_shuffle_data(self.value(x).data(), &s, r);
        let value = Tensor::new(&[s[0], s[1] / (r * r), s[2] * r, s[3] * r], data)?;
        self.push("pixel_shuffle", value, Op::PixelShuffle { x, r })
    }

    /// `out[n, c, :, t] = W · x[n, c, :, t]` for `x` of shape `[N, C, F, T]`
    /// and a shared `W` of shape `[F, F]`.
    pub fn freq_transform(&mut self, x: Var, w: Var) -> Result<Var> {
        let s = self.shape(x).to_vec();
        let ws = self.shape(w).to_vec();
        if s.len() != 4 || ws != [s[2], s[2]] {
            return Err(Error::Shape(format!(
                "freq_transform: input {s:?} needs a [{f}, {f}] matrix, got {ws:?}",
                f = s.get(2).copied().unwrap_or(0)
            )));
        }
        let (f, t) = (s[2], s[3]);
        let mut out = vec![T::zero(); self.value(x).len()];
        {
            let (xd, wd) = (self.value(x).data(), self.value(w).data());
            for blk in 0..s[0] * s[1] {
                let off = blk * f * t;
                gemm(
                    T::one(),
                    wd,
                    MatRef::dense(f, f),
                    xd,
                    MatRef::dense(f, t).at(off),
                    T::zero(),
                    &mut out,
                    MatRef::dense(f, t).at(off),
                );
            }
        }
        let value = Tensor::new(&s, out)?;
        self.push("freq_transform", value, Op::FreqTransform { x, w })
    }
}

/// Space-to-depth inverse of [`Graph::pixel_shuffle`] on plain tensors.
pub fn pixel_unshuffle<T: Real>(y: &Tensor<T>, r: usize) -> Result<Tensor<T>> {
    let s = y.shape();
    if s.len() != 4 || r == 0 || !s[2].is_multiple_of(r) || !s[3].is_multiple_of(r) {
        return Err(Error::Shape(format!("pixel_unshuffle: {s:?} by {r}")));
    }
    let data = pixel_unshuffle_data(y.data(), s, r);
    Tensor::new(&[s[0], s[1] * r * r, s[2] / r, s[3] / r], data)
}
