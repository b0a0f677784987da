//! Resampling kernels shared by the pyramid, guides and curation crops.
//!
//! All kernels use pixel-centre alignment: output pixel `x` of an axis
//! resized from `src` to `dst` samples source coordinate
//! `(x + 0.5) * src / dst - 0.5`.

use alloc::vec;
use alloc::vec::Vec;

use crate::image::{HoleMask, PlaneImage};

/// Output length of a factor-2 reduction.
#[inline]
pub fn half(len: usize) -> usize {
    len.div_ceil(2)
}

/// 2x2 box average. Odd trailing rows/columns average the pixels that exist.
pub fn downsample2x(img: &PlaneImage) -> PlaneImage {
    let (w, h, c) = (img.width(), img.height(), img.channels());
    let (ow, oh) = (half(w), half(h));
    let mut out = PlaneImage::new(ow, oh, c);
    for oy in 0..oh {
        let y0 = 2 * oy;
        let y1 = (y0 + 1).min(h - 1);
        for ox in 0..ow {
            let x0 = 2 * ox;
            let x1 = (x0 + 1).min(w - 1);
            let dst = out.index(ox, oy);
            let (a, b, cc, d) = (img.index(x0, y0), img.index(x1, y0), img.index(x0, y1), img.index(x1, y1));
            let src = img.data();
            // Duplicated edge samples keep the average over distinct pixels:
            // x1 == x0 counts the same pixel twice, which is a plain mean.
            let o = out.data_mut();
            for k in 0..c {
                o[dst + k] = ((src[a + k] + src[b + k]) + (src[cc + k] + src[d + k])) * 0.25;
            }
        }
    }
    out
}

/// A coarse pixel is a hole iff any pixel of its 2x2 source block is.
pub fn downsample_mask(mask: &HoleMask) -> HoleMask {
    let (w, h) = mask.dims();
    HoleMask::from_fn(half(w), half(h), |ox, oy| {
        let (x0, y0) = (2 * ox, 2 * oy);
        let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
        mask.is_hole(x0, y0) || mask.is_hole(x1, y0) || mask.is_hole(x0, y1) || mask.is_hole(x1, y1)
    })
}

#[inline]
fn source_coord(x: usize, src: usize, dst: usize) -> f64 {
    (x as f64 + 0.5) * src as f64 / dst as f64 - 0.5
}

/// Bilinear taps `(i0, i1, t)` for every output index of one axis.
fn bilinear_taps(src: usize, dst: usize) -> Vec<(usize, usize, f32)> {
    (0..dst)
        .map(|x| {
            let s = source_coord(x, src, dst).clamp(0.0, (src - 1) as f64);
            let i0 = libm::floor(s) as usize;
            let i1 = (i0 + 1).min(src - 1);
            (i0, i1, (s - i0 as f64) as f32)
        })
        .collect()
}

/// Centre-aligned bilinear resize with edge clamping.
pub fn resize_bilinear(img: &PlaneImage, width: usize, height: usize) -> PlaneImage {
    if img.dims() == (width, height) {
        return img.clone();
    }
    let c = img.channels();
    let xt = bilinear_taps(img.width(), width);
    let yt = bilinear_taps(img.height(), height);
    let mut out = PlaneImage::new(width, height, c);
    let src = img.data();
    for (y, &(y0, y1, ty)) in yt.iter().enumerate() {
        for (x, &(x0, x1, tx)) in xt.iter().enumerate() {
            let (a, b) = (img.index(x0, y0), img.index(x1, y0));
            let (d, e) = (img.index(x0, y1), img.index(x1, y1));
            let dst = out.index(x, y);
            let o = out.data_mut();
            for k in 0..c {
                let top = src[a + k] + (src[b + k] - src[a + k]) * tx;
                let bot = src[d + k] + (src[e + k] - src[d + k]) * tx;
                o[dst + k] = top + (bot - top) * ty;
            }
        }
    }
    out
}

#[inline]
fn nearest_index(x: usize, src: usize, dst: usize) -> usize {
    (((x as f64 + 0.5) * src as f64 / dst as f64) as usize).min(src - 1)
}

pub fn resize_nearest(img: &PlaneImage, width: usize, height: usize) -> PlaneImage {
    if img.dims() == (width, height) {
        return img.clone();
    }
    let c = img.channels();
    let mut out = PlaneImage::new(width, height, c);
    for y in 0..height {
        let sy = nearest_index(y, img.height(), height);
        for x in 0..width {
            let sx = nearest_index(x, img.width(), width);
            out.pixel_mut(x, y).copy_from_slice(img.pixel(sx, sy));
        }
    }
    out
}

pub fn resize_mask_nearest(mask: &HoleMask, width: usize, height: usize) -> HoleMask {
    HoleMask::from_fn(width, height, |x, y| {
        mask.is_hole(
            nearest_index(x, mask.width(), width),
            nearest_index(y, mask.height(), height),
        )
    })
}

/// Source index range `[lo, hi)` overlapped by output pixel `x`.
fn area_span(x: usize, src: usize, dst: usize) -> (usize, usize) {
    let lo = x * src / dst;
    let hi = ((x + 1) * src).div_ceil(dst).min(src);
    (lo, hi.max(lo + 1))
}

/// Area-weighted reduction for arbitrary factors (`width <= img.width()`).
pub fn resize_area(img: &PlaneImage, width: usize, height: usize) -> PlaneImage {
    if img.dims() == (width, height) {
        return img.clone();
    }
    assert!(width <= img.width() && height <= img.height(), "resize_area only shrinks");
    let c = img.channels();
    let weights = |src: usize, dst: usize| -> Vec<Vec<(usize, f32)>> {
        let scale = src as f64 / dst as f64;
        (0..dst)
            .map(|x| {
                let (lo, hi) = area_span(x, src, dst);
                let (a, b) = (x as f64 * scale, (x + 1) as f64 * scale);
                let mut taps: Vec<(usize, f32)> = (lo..hi)
                    .map(|i| {
                        let overlap = (b.min(i as f64 + 1.0) - a.max(i as f64)).max(0.0);
                        (i, (overlap / scale) as f32)
                    })
                    .filter(|&(_, wgt)| wgt > 0.0)
                    .collect();
                let total: f32 = taps.iter().map(|t| t.1).sum();
                for t in &mut taps {
                    t.1 /= total;
                }
                taps
            })
            .collect()
    };
    let xw = weights(img.width(), width);
    let yw = weights(img.height(), height);
    // Horizontal pass into an intermediate of size width x img.height().
    let mut tmp = PlaneImage::new(width, img.height(), c);
    let mut acc = vec![0f32; c];
    for y in 0..img.height() {
        for (x, taps) in xw.iter().enumerate() {
            acc.fill(0.0);
            for &(sx, wt) in taps {
                for (a, v) in acc.iter_mut().zip(img.pixel(sx, y)) {
                    *a += wt * v;
                }
            }
            tmp.pixel_mut(x, y).copy_from_slice(&acc);
        }
    }
    let mut out = PlaneImage::new(width, height, c);
    for (y, taps) in yw.iter().enumerate() {
        for x in 0..width {
            let dst = out.index(x, y);
            for &(sy, wt) in taps {
                let src = tmp.index(x, sy);
                for k in 0..c {
                    let v = tmp.data()[src + k];
                    out.data_mut()[dst + k] += wt * v;
                }
            }
        }
    }
    out
}

/// Shrinks a mask; an output pixel is a hole iff any overlapped source pixel is.
pub fn resize_mask_any(mask: &HoleMask, width: usize, height: usize) -> HoleMask {
    if mask.dims() == (width, height) {
        return mask.clone();
    }
    let (sw, sh) = mask.dims();
    HoleMask::from_fn(width, height, |x, y| {
        let (x0, x1) = area_span(x, sw, width);
        let (y0, y1) = area_span(y, sh, height);
        (y0..y1).any(|yy| (x0..x1).any(|xx| mask.is_hole(xx, yy)))
    })
}

/// Upsamples a pyramid level to the next finer dimensions so that
/// [`downsample2x`] of the result reproduces `coarse`.
///
/// The result is a bilinear interpolation corrected by one back-projection
/// step: the residual `coarse - downsample2x(bilinear)` is added back to
/// every fine pixel of its 2x2 block.
pub fn upsample2x(coarse: &PlaneImage, width: usize, height: usize) -> PlaneImage {
    assert_eq!((half(width), half(height)), coarse.dims(), "not a factor-2 level pair");
    let mut fine = resize_bilinear(coarse, width, height);
    let back = downsample2x(&fine);
    let c = coarse.channels();
    for y in 0..height {
        for x in 0..width {
            let (ci, fi) = (coarse.index(x / 2, y / 2), fine.index(x, y));
            for k in 0..c {
                let r = coarse.data()[ci + k] - back.data()[ci + k];
                fine.data_mut()[fi + k] += r;
            }
        }
    }
    fine
}

/// Pyramid upsampling clamped back into the colour range.
pub fn upsample2x_clamped(coarse: &PlaneImage, width: usize, height: usize) -> PlaneImage {
    let mut out = upsample2x(coarse, width, height);
    out.clamp_rgb();
    out
}
