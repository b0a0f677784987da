//! Multi-channel floating point rasters, hole masks and compositing.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Interleaved `f32` raster. Channel `c` of pixel `(x, y)` lives at
/// `(y * width + x) * channels + c`.
///
/// Values are normalized to `[0, 1]` for colour and continuous guide
/// channels; label channels store integer ids exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct PlaneImage {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl PlaneImage {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Self::filled(width, height, channels, 0.0)
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f32) -> Self {
        assert!(channels >= 1, "an image needs at least one channel");
        Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    pub fn from_data(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if channels == 0 || data.len() != width * height * channels {
            return Err(Error::BufferLength {
                width,
                height,
                channels,
                actual: data.len(),
            });
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidValue(alloc::format!("non-finite sample {v}")));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Builds an image by evaluating `f(x, y, channel)` for every sample.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Self {
        let mut img = Self::new(width, height, channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    img.data[(y * width + x) * channels + c] = f(x, y, c);
                }
            }
        }
        img
    }

    /// Converts 8-bit samples to the normalized domain (`v / 255`).
    pub fn from_u8(width: usize, height: usize, channels: usize, bytes: &[u8]) -> Result<Self> {
        if channels == 0 || bytes.len() != width * height * channels {
            return Err(Error::BufferLength {
                width,
                height,
                channels,
                actual: bytes.len(),
            });
        }
        let data = bytes.iter().map(|&b| f32::from(b) / 255.0).collect();
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Quantizes to 8 bits with round-to-nearest after clamping to `[0, 1]`.
    pub fn to_u8(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|&v| libm::roundf(v.clamp(0.0, 1.0) * 255.0) as u8)
            .collect()
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn long_edge(&self) -> usize {
        self.width.max(self.height)
    }

    #[inline]
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        (y * self.width + x) * self.channels
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f32] {
        let i = self.index(x, y);
        &self.data[i..i + self.channels]
    }

    #[inline]
    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [f32] {
        let i = self.index(x, y);
        let c = self.channels;
        &mut self.data[i..i + c]
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[self.index(x, y) + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f32) {
        let i = self.index(x, y) + c;
        self.data[i] = v;
    }

    pub fn check_dims(&self, width: usize, height: usize) -> Result<()> {
        if self.dims() != (width, height) {
            return Err(Error::dims((width, height), self.dims()));
        }
        Ok(())
    }

    pub fn check_channels(&self, channels: usize) -> Result<()> {
        if self.channels != channels {
            return Err(Error::ChannelMismatch {
                expected: channels,
                actual: self.channels,
            });
        }
        Ok(())
    }

    /// Copies channels `first..first + count` into a new image.
    pub fn select_channels(&self, first: usize, count: usize) -> PlaneImage {
        assert!(first + count <= self.channels && count >= 1);
        let mut out = PlaneImage::new(self.width, self.height, count);
        for (dst, src) in out
            .data
            .chunks_exact_mut(count)
            .zip(self.data.chunks_exact(self.channels))
        {
            dst.copy_from_slice(&src[first..first + count]);
        }
        out
    }

    /// Stacks `self` followed by `others` channel-wise.
    pub fn stack(&self, others: &[&PlaneImage]) -> Result<PlaneImage> {
        let mut total = self.channels;
        for o in others {
            o.check_dims(self.width, self.height)?;
            total += o.channels;
        }
        let mut data = Vec::with_capacity(self.width * self.height * total);
        for i in 0..self.width * self.height {
            data.extend_from_slice(&self.data[i * self.channels..(i + 1) * self.channels]);
            for o in others {
                data.extend_from_slice(&o.data[i * o.channels..(i + 1) * o.channels]);
            }
        }
        Ok(PlaneImage {
            width: self.width,
            height: self.height,
            channels: total,
            data,
        })
    }

    /// Rec. 601 luma of the first three channels.
    pub fn luminance(&self) -> PlaneImage {
        assert!(self.channels >= 3, "luminance needs RGB");
        let mut out = PlaneImage::new(self.width, self.height, 1);
        for (dst, px) in out.data.iter_mut().zip(self.data.chunks_exact(self.channels)) {
            *dst = 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
        }
        out
    }

    /// Clamps the first `min(3, channels)` channels to `[0, 1]`.
    pub fn clamp_rgb(&mut self) {
        let n = self.channels.min(3);
        for px in self.data.chunks_exact_mut(self.channels) {
            for v in &mut px[..n] {
                *v = v.clamp(0.0, 1.0);
            }
        }
    }

    /// Extracts the square `rect`; samples outside the image replicate the
    /// nearest edge pixel.
    pub fn crop(&self, rect: &CropRect) -> PlaneImage {
        let mut out = PlaneImage::new(rect.side, rect.side, self.channels);
        for y in 0..rect.side {
            let sy = clamp_coord(rect.y + y as i64, self.height);
            for x in 0..rect.side {
                let sx = clamp_coord(rect.x + x as i64, self.width);
                let (dst, src) = (out.index(x, y), self.index(sx, sy));
                out.data[dst..dst + self.channels]
                    .copy_from_slice(&self.data[src..src + self.channels]);
            }
        }
        out
    }

    pub fn mean_abs_diff(&self, other: &PlaneImage) -> f64 {
        assert_eq!(self.data.len(), other.data.len());
        let sum: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| f64::from((a - b).abs()))
            .sum();
        sum / self.data.len().max(1) as f64
    }
}

#[inline]
fn clamp_coord(v: i64, len: usize) -> usize {
    v.clamp(0, len as i64 - 1) as usize
}

/// Per-pixel hole flags; `true` marks a pixel to synthesize.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct HoleMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl HoleMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::BufferLength {
                width,
                height,
                channels: 1,
                actual: bits.len(),
            });
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            bits,
        }
    }

    /// Marks the axis-aligned rectangle `[x0, x0 + w) x [y0, y0 + h)`.
    pub fn with_rect(width: usize, height: usize, x0: usize, y0: usize, w: usize, h: usize) -> Self {
        Self::from_fn(width, height, |x, y| {
            x >= x0 && x < x0 + w && y >= y0 && y < y0 + h
        })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn is_hole(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, hole: bool) {
        self.bits[y * self.width + x] = hole;
    }

    pub fn hole_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn hole_fraction(&self) -> f64 {
        self.hole_count() as f64 / self.bits.len().max(1) as f64
    }

    /// True when there is nothing to synthesize.
    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// True when at least one pixel is usable as source material.
    pub fn has_source(&self) -> bool {
        self.bits.iter().any(|&b| !b)
    }

    /// Hole bounding box as `(x0, y0, x1, y1)`, inclusive.
    pub fn bbox(&self) -> Option<(usize, usize, usize, usize)> {
        let mut bb: Option<(usize, usize, usize, usize)> = None;
        for y in 0..self.height {
            let row = &self.bits[y * self.width..(y + 1) * self.width];
            let first = match row.iter().position(|&b| b) {
                Some(i) => i,
                None => continue,
            };
            let last = row.iter().rposition(|&b| b).unwrap_or(first);
            bb = Some(match bb {
                None => (first, y, last, y),
                Some((x0, y0, x1, _)) => (x0.min(first), y0, x1.max(last), y),
            });
        }
        bb
    }

    /// Chebyshev dilation by `radius` pixels.
    pub fn dilate(&self, radius: usize) -> HoleMask {
        if radius == 0 {
            return self.clone();
        }
        let (w, h) = self.dims();
        // Separable max filter: rows, then columns.
        let mut tmp = vec![false; w * h];
        for y in 0..h {
            let row = &self.bits[y * w..(y + 1) * w];
            let mut last_hole: Option<usize> = None;
            let mut next_hole = vec![usize::MAX; w];
            let mut nh = usize::MAX;
            for x in (0..w).rev() {
                if row[x] {
                    nh = x;
                }
                next_hole[x] = nh;
            }
            for x in 0..w {
                if row[x] {
                    last_hole = Some(x);
                }
                let near_left = last_hole.is_some_and(|l| x - l <= radius);
                let near_right = next_hole[x] != usize::MAX && next_hole[x] - x <= radius;
                tmp[y * w + x] = near_left || near_right;
            }
        }
        let mut out = vec![false; w * h];
        for x in 0..w {
            let mut last_hole: Option<usize> = None;
            let mut next_hole = vec![usize::MAX; h];
            let mut nh = usize::MAX;
            for y in (0..h).rev() {
                if tmp[y * w + x] {
                    nh = y;
                }
                next_hole[y] = nh;
            }
            for y in 0..h {
                if tmp[y * w + x] {
                    last_hole = Some(y);
                }
                let near_up = last_hole.is_some_and(|l| y - l <= radius);
                let near_down = next_hole[y] != usize::MAX && next_hole[y] - y <= radius;
                out[y * w + x] = near_up || near_down;
            }
        }
        HoleMask {
            width: w,
            height: h,
            bits: out,
        }
    }

    /// Crops like [`PlaneImage::crop`]; out-of-image samples replicate the edge.
    pub fn crop(&self, rect: &CropRect) -> HoleMask {
        HoleMask::from_fn(rect.side, rect.side, |x, y| {
            let sx = clamp_coord(rect.x + x as i64, self.width);
            let sy = clamp_coord(rect.y + y as i64, self.height);
            self.is_hole(sx, sy)
        })
    }

    /// Single-channel image with 1.0 at holes.
    pub fn to_image(&self) -> PlaneImage {
        PlaneImage::from_fn(self.width, self.height, 1, |x, y, _| {
            if self.is_hole(x, y) {
                1.0
            } else {
                0.0
            }
        })
    }

    pub fn union(&self, other: &HoleMask) -> Result<HoleMask> {
        if self.dims() != other.dims() {
            return Err(Error::dims(self.dims(), other.dims()));
        }
        Ok(HoleMask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().zip(&other.bits).map(|(a, b)| *a || *b).collect(),
        })
    }
}

/// Square crop window. `x`/`y` may be negative only when `side` exceeds the
/// corresponding image axis, in which case the window covers that axis fully.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CropRect {
    pub x: i64,
    pub y: i64,
    pub side: usize,
}

/// True when `a` and `b` have the same aspect ratio up to one pixel of
/// rounding on the smaller of the two.
pub fn same_aspect(a: (usize, usize), b: (usize, usize)) -> bool {
    let (small, large) = if a.0.max(a.1) <= b.0.max(b.1) { (a, b) } else { (b, a) };
    let (sw, sh) = (small.0 as f64, small.1 as f64);
    let (lw, lh) = (large.0 as f64, large.1 as f64);
    (lh * sw / lw - sh).abs() <= 1.0 || (lw * sh / lh - sw).abs() <= 1.0
}

/// `base` outside the hole (bit-exact), `synth` inside it.
pub fn composite(base: &PlaneImage, synth: &PlaneImage, mask: &HoleMask) -> Result<PlaneImage> {
    synth.check_dims(base.width, base.height)?;
    if mask.dims() != base.dims() {
        return Err(Error::dims(base.dims(), mask.dims()));
    }
    synth.check_channels(base.channels)?;
    let mut out = base.clone();
    let c = base.channels;
    for (i, &hole) in mask.bits.iter().enumerate() {
        if hole {
            out.data[i * c..(i + 1) * c].copy_from_slice(&synth.data[i * c..(i + 1) * c]);
        }
    }
    Ok(out)
}
