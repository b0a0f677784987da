//! Multi-guide PatchMatch over hole-free source patches.
//!
//! The field covers the *target set*: hole pixels dilated by the patch
//! radius. Each target pixel stores an offset to the centre of a source patch
//! that lies fully inside the image and contains no hole pixel. Target
//! windows are clipped at the image border; source windows never are.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::guides::{Comparison, GuideWeights};
use crate::image::{HoleMask, PlaneImage};
use crate::rng;

/// Most channels a stack may carry (RGB + three guides, with headroom).
pub const MAX_CHANNELS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GainBiasLimits {
    pub gain_min: f32,
    pub gain_max: f32,
    pub bias_min: f32,
    pub bias_max: f32,
}

impl Default for GainBiasLimits {
    fn default() -> Self {
        Self {
            gain_min: 0.9,
            gain_max: 1.1,
            bias_min: -0.05,
            bias_max: 0.05,
        }
    }
}

impl GainBiasLimits {
    pub fn contains(&self, gb: &GainBias) -> bool {
        gb.gain.iter().all(|g| (self.gain_min..=self.gain_max).contains(g))
            && gb.bias.iter().all(|b| (self.bias_min..=self.bias_max).contains(b))
    }
}

/// Per-RGB-channel photometric adjustment `s' = gain * s + bias`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GainBias {
    pub gain: [f32; 3],
    pub bias: [f32; 3],
}

impl GainBias {
    pub const IDENTITY: GainBias = GainBias {
        gain: [1.0; 3],
        bias: [0.0; 3],
    };

    #[inline]
    pub fn apply(&self, c: usize, v: f32) -> f32 {
        self.gain[c] * v + self.bias[c]
    }
}

impl Default for GainBias {
    fn default() -> Self {
        Self::IDENTITY
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PatchParams {
    /// Odd patch edge length.
    pub patch_size: usize,
    pub pm_iterations: usize,
    /// Random-search radius shrink factor per step.
    pub search_radius_decay: f64,
    pub rng_seed: u64,
    /// Gain/bias compensation of RGB source values; `None` disables it.
    pub gain_bias: Option<GainBiasLimits>,
    /// Rows per band for banded propagation; `None` is the serial reference scan.
    pub band_rows: Option<usize>,
}

impl Default for PatchParams {
    fn default() -> Self {
        Self {
            patch_size: 7,
            pm_iterations: 5,
            search_radius_decay: 0.5,
            rng_seed: 0,
            gain_bias: None,
            band_rows: None,
        }
    }
}

impl PatchParams {
    pub fn radius(&self) -> usize {
        self.patch_size / 2
    }

    pub fn validate(&self) -> Result<()> {
        if self.patch_size < 3 || self.patch_size.is_multiple_of(2) {
            return Err(Error::param("patch_size", "must be odd and at least 3"));
        }
        if !(self.search_radius_decay > 0.0 && self.search_radius_decay < 1.0) {
            return Err(Error::param("search_radius_decay", "must lie in (0, 1)"));
        }
        if let Some(gb) = &self.gain_bias {
            if !(gb.gain_min <= 1.0 && 1.0 <= gb.gain_max && gb.bias_min <= 0.0 && 0.0 <= gb.bias_max) {
                return Err(Error::param("gain_bias", "limits must contain the identity"));
            }
        }
        if self.band_rows == Some(0) {
            return Err(Error::param("band_rows", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NnEntry {
    pub dx: i32,
    pub dy: i32,
    pub distance: f32,
    pub gain_bias: GainBias,
}

impl NnEntry {
    const UNSET: NnEntry = NnEntry {
        dx: 0,
        dy: 0,
        distance: f32::INFINITY,
        gain_bias: GainBias::IDENTITY,
    };
}

/// Nearest-neighbour field over the bounding box of the target set.
#[derive(Clone, Debug, PartialEq)]
pub struct NNField {
    image_width: usize,
    image_height: usize,
    x0: usize,
    y0: usize,
    width: usize,
    height: usize,
    targets: Vec<bool>,
    entries: Vec<NnEntry>,
    iterations: u64,
}

impl NNField {
    fn empty(image_width: usize, image_height: usize) -> Self {
        Self {
            image_width,
            image_height,
            x0: 0,
            y0: 0,
            width: 0,
            height: 0,
            targets: Vec::new(),
            entries: Vec::new(),
            iterations: 0,
        }
    }

    pub fn image_dims(&self) -> (usize, usize) {
        (self.image_width, self.image_height)
    }

    /// Bounding box of the target set as `(x0, y0, width, height)`.
    pub fn bounds(&self) -> (usize, usize, usize, usize) {
        (self.x0, self.y0, self.width, self.height)
    }

    /// Number of `pm_iterate` passes applied so far.
    pub fn iterations(&self) -> u64 {
        self.iterations
    }

    #[inline]
    fn local(&self, x: usize, y: usize) -> Option<usize> {
        if x < self.x0 || y < self.y0 || x >= self.x0 + self.width || y >= self.y0 + self.height {
            return None;
        }
        let i = (y - self.y0) * self.width + (x - self.x0);
        self.targets[i].then_some(i)
    }

    pub fn is_target(&self, x: usize, y: usize) -> bool {
        self.local(x, y).is_some()
    }

    /// Entry for image pixel `(x, y)` when it is a target.
    pub fn get(&self, x: usize, y: usize) -> Option<&NnEntry> {
        self.local(x, y).map(|i| &self.entries[i])
    }

    /// Target pixels with their entries, row-major.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, &NnEntry)> + '_ {
        self.entries
            .iter()
            .enumerate()
            .filter(|(i, _)| self.targets[*i])
            .map(|(i, e)| (self.x0 + i % self.width, self.y0 + i / self.width, e))
    }

    pub fn target_count(&self) -> usize {
        self.targets.iter().filter(|&&t| t).count()
    }

    pub fn total_distance(&self) -> f64 {
        self.iter().map(|(_, _, e)| f64::from(e.distance)).sum()
    }

    pub fn mean_distance(&self) -> f64 {
        let n = self.target_count();
        if n == 0 {
            0.0
        } else {
            self.total_distance() / n as f64
        }
    }

    /// Counts entries whose source patch leaves the image or touches the hole.
    pub fn violations(&self, mask: &HoleMask, patch_size: usize) -> usize {
        let index = SourceIndex::new(mask, patch_size / 2);
        self.iter()
            .filter(|&(x, y, e)| !index.is_valid(x as i64 + i64::from(e.dx), y as i64 + i64::from(e.dy)))
            .count()
    }
}

/// Lookup of valid source patch centres.
pub struct SourceIndex {
    width: usize,
    height: usize,
    radius: usize,
    valid: Vec<bool>,
    /// Populated when valid centres are sparse, so sampling stays bounded.
    list: Vec<u32>,
    count: usize,
}

impl SourceIndex {
    pub fn new(mask: &HoleMask, radius: usize) -> Self {
        let (w, h) = mask.dims();
        // Summed-area table of hole pixels.
        let mut sat = vec![0u32; (w + 1) * (h + 1)];
        for y in 0..h {
            let mut row = 0u32;
            for x in 0..w {
                row += u32::from(mask.is_hole(x, y));
                sat[(y + 1) * (w + 1) + x + 1] = sat[y * (w + 1) + x + 1] + row;
            }
        }
        let mut valid = vec![false; w * h];
        let mut count = 0;
        if w > 2 * radius && h > 2 * radius {
            for y in radius..h - radius {
                for x in radius..w - radius {
                    let (xa, ya, xb, yb) = (x - radius, y - radius, x + radius + 1, y + radius + 1);
                    let holes = sat[yb * (w + 1) + xb] + sat[ya * (w + 1) + xa]
                        - sat[ya * (w + 1) + xb]
                        - sat[yb * (w + 1) + xa];
                    if holes == 0 {
                        valid[y * w + x] = true;
                        count += 1;
                    }
                }
            }
        }
        let interior = w.saturating_sub(2 * radius) * h.saturating_sub(2 * radius);
        let list = if count > 0 && count * 8 < interior {
            (0..w * h).filter(|&i| valid[i]).map(|i| i as u32).collect()
        } else {
            Vec::new()
        };
        Self {
            width: w,
            height: h,
            radius,
            valid,
            list,
            count,
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    #[inline]
    pub fn is_valid(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height && self.valid[y as usize * self.width + x as usize]
    }

    /// Uniformly random valid centre. Requires `count() > 0`.
    pub fn sample(&self, rng: &mut impl Rng) -> (usize, usize) {
        if !self.list.is_empty() {
            let i = self.list[rng.gen_range(0..self.list.len())] as usize;
            return (i % self.width, i / self.width);
        }
        let r = self.radius;
        loop {
            let x = rng.gen_range(r..self.width - r);
            let y = rng.gen_range(r..self.height - r);
            if self.valid[y * self.width + x] {
                return (x, y);
            }
        }
    }

    /// Inclusive range of centres that keep the patch inside the image.
    #[inline]
    fn centre_range(&self) -> (i64, i64, i64, i64) {
        let r = self.radius as i64;
        (r, r, self.width as i64 - 1 - r, self.height as i64 - 1 - r)
    }
}

/// Target window and its cached statistics.
struct TargetWindow {
    tx: usize,
    ty: usize,
    xlo: isize,
    xhi: isize,
    ylo: isize,
    yhi: isize,
    n: f64,
    sum_t: [f64; 3],
    sum_tt: [f64; 3],
}

/// Sufficient statistics of one RGB channel over a patch pair.
struct ChannelStats {
    n: f64,
    s: f64,
    ss: f64,
    st: f64,
    t: f64,
    tt: f64,
}

impl ChannelStats {
    /// `sum (t - g s - b)^2`.
    #[inline]
    fn ssd(&self, g: f64, b: f64) -> f64 {
        (self.tt - 2.0 * g * self.st - 2.0 * b * self.t + g * g * self.ss + 2.0 * g * b * self.s + self.n * b * b).max(0.0)
    }

    /// Least-squares gain and bias restricted to the limit box.
    ///
    /// The objective is a convex quadratic, so the constrained minimum is the
    /// unconstrained one when feasible and otherwise lies on an edge of the
    /// box; each edge has a closed-form minimizer.
    fn fit(&self, l: &GainBiasLimits) -> (f32, f32, f64) {
        let cg = |g: f64| (g as f32).clamp(l.gain_min, l.gain_max);
        let cb = |b: f64| (b as f32).clamp(l.bias_min, l.bias_max);
        let (ms, mt) = (self.s / self.n, self.t / self.n);
        let var = self.ss / self.n - ms * ms;
        let cov = self.st / self.n - ms * mt;
        if var > 1e-12 {
            let (g, b) = (cov / var, mt - cov / var * ms);
            let (g, b) = (g as f32, b as f32);
            if (l.gain_min..=l.gain_max).contains(&g) && (l.bias_min..=l.bias_max).contains(&b) {
                return (g, b, self.ssd(f64::from(g), f64::from(b)));
            }
        }
        let g0 = cg(if var > 1e-12 { cov / var } else { 1.0 });
        let on_bias = |b: f32| {
            let g = if self.ss > 0.0 { (self.st - f64::from(b) * self.s) / self.ss } else { 1.0 };
            (cg(g), b)
        };
        let candidates = [
            (g0, cb(mt - f64::from(g0) * ms)),
            (l.gain_min, cb(mt - f64::from(l.gain_min) * ms)),
            (l.gain_max, cb(mt - f64::from(l.gain_max) * ms)),
            on_bias(l.bias_min),
            on_bias(l.bias_max),
        ];
        let mut best = (1.0, 0.0, f64::INFINITY);
        for (g, b) in candidates {
            let d = self.ssd(f64::from(g), f64::from(b));
            if d < best.2 {
                best = (g, b, d);
            }
        }
        best
    }
}

/// Distance evaluator bound to one stack and weight set.
pub(crate) struct Metric<'a> {
    data: &'a [f32],
    width: usize,
    height: usize,
    channels: usize,
    radius: isize,
    weight: [f64; MAX_CHANNELS],
    label: [bool; MAX_CHANNELS],
    mismatch: [f64; MAX_CHANNELS],
    gain_bias: Option<GainBiasLimits>,
}

impl<'a> Metric<'a> {
    pub(crate) fn new(stack: &'a PlaneImage, weights: &GuideWeights, params: &PatchParams) -> Result<Self> {
        let c = stack.channels();
        if c != weights.channels() {
            return Err(Error::ChannelMismatch {
                expected: weights.channels(),
                actual: c,
            });
        }
        if !(3..=MAX_CHANNELS).contains(&c) {
            return Err(Error::ChannelMismatch { expected: 3, actual: c });
        }
        let mut weight = [0.0; MAX_CHANNELS];
        let mut label = [false; MAX_CHANNELS];
        let mut mismatch = [0.0; MAX_CHANNELS];
        for i in 0..c {
            weight[i] = weights.per_channel[i];
            label[i] = weights.comparisons[i] == Comparison::LabelMismatch;
            mismatch[i] = weights.per_channel[i] * weights.mismatch_cost * weights.mismatch_cost;
        }
        Ok(Self {
            data: stack.data(),
            width: stack.width(),
            height: stack.height(),
            channels: c,
            radius: params.radius() as isize,
            weight,
            label,
            mismatch,
            gain_bias: params.gain_bias,
        })
    }

    fn window(&self, tx: usize, ty: usize) -> TargetWindow {
        let r = self.radius;
        let xlo = (-r).max(-(tx as isize));
        let xhi = r.min((self.width - 1 - tx) as isize);
        let ylo = (-r).max(-(ty as isize));
        let yhi = r.min((self.height - 1 - ty) as isize);
        let mut tw = TargetWindow {
            tx,
            ty,
            xlo,
            xhi,
            ylo,
            yhi,
            n: ((xhi - xlo + 1) * (yhi - ylo + 1)) as f64,
            sum_t: [0.0; 3],
            sum_tt: [0.0; 3],
        };
        if self.gain_bias.is_some() {
            let c = self.channels;
            for dy in ylo..=yhi {
                let y = (ty as isize + dy) as usize;
                for dx in xlo..=xhi {
                    let i = (y * self.width + (tx as isize + dx) as usize) * c;
                    for k in 0..3 {
                        let t = f64::from(self.data[i + k]);
                        tw.sum_t[k] += t;
                        tw.sum_tt[k] += t * t;
                    }
                }
            }
        }
        tw
    }

    /// Distance from the target window to the source patch centred at
    /// `(sx, sy)`. Returns `None` once the running sum exceeds `cutoff`
    /// (only checked without gain/bias, where the sum is monotone).
    #[inline]
    fn eval(&self, tw: &TargetWindow, sx: usize, sy: usize, cutoff: f64) -> Option<(f32, GainBias)> {
        match self.gain_bias {
            None => self.eval_plain(tw, sx, sy, cutoff).map(|d| (d as f32, GainBias::IDENTITY)),
            Some(limits) => {
                let (d, gb) = self.eval_gain_bias(tw, sx, sy, &limits);
                Some((d as f32, gb))
            }
        }
    }

    fn eval_plain(&self, tw: &TargetWindow, sx: usize, sy: usize, cutoff: f64) -> Option<f64> {
        match self.channels {
            3 => self.plain_n::<3>(tw, sx, sy, cutoff),
            4 => self.plain_n::<4>(tw, sx, sy, cutoff),
            5 => self.plain_n::<5>(tw, sx, sy, cutoff),
            6 => self.plain_n::<6>(tw, sx, sy, cutoff),
            7 => self.plain_n::<7>(tw, sx, sy, cutoff),
            _ => self.plain_n::<8>(tw, sx, sy, cutoff),
        }
    }

    fn eval_gain_bias(&self, tw: &TargetWindow, sx: usize, sy: usize, limits: &GainBiasLimits) -> (f64, GainBias) {
        match self.channels {
            3 => self.gain_bias_n::<3>(tw, sx, sy, limits),
            4 => self.gain_bias_n::<4>(tw, sx, sy, limits),
            5 => self.gain_bias_n::<5>(tw, sx, sy, limits),
            6 => self.gain_bias_n::<6>(tw, sx, sy, limits),
            7 => self.gain_bias_n::<7>(tw, sx, sy, limits),
            _ => self.gain_bias_n::<8>(tw, sx, sy, limits),
        }
    }

    fn finish_gain_bias(
        &self,
        tw: &TargetWindow,
        sum_s: [f64; 3],
        sum_ss: [f64; 3],
        sum_st: [f64; 3],
        guide: f64,
        limits: &GainBiasLimits,
    ) -> (f64, GainBias) {
        let mut gb = GainBias::IDENTITY;
        let mut rgb = 0.0;
        for k in 0..3 {
            let stats = ChannelStats {
                n: tw.n,
                s: sum_s[k],
                ss: sum_ss[k],
                st: sum_st[k],
                t: tw.sum_t[k],
                tt: tw.sum_tt[k],
            };
            let (g, b, ssd) = stats.fit(limits);
            gb.gain[k] = g;
            gb.bias[k] = b;
            rgb += self.weight[k] * ssd;
        }
        (rgb + guide, gb)
    }

    /// Target and source rows of the window at row offset `dy`.
    #[inline(always)]
    fn rows<const C: usize>(&self, tw: &TargetWindow, sx: usize, sy: usize, dy: isize) -> (&[f32], &[f32]) {
        let run = (tw.xhi - tw.xlo + 1) as usize * C;
        let t0 = (((tw.ty as isize + dy) as usize) * self.width + (tw.tx as isize + tw.xlo) as usize) * C;
        let s0 = (((sy as isize + dy) as usize) * self.width + (sx as isize + tw.xlo) as usize) * C;
        (&self.data[t0..t0 + run], &self.data[s0..s0 + run])
    }

    /// Per-channel contribution of one sample: squared difference, or a
    /// mismatch indicator for label channels.
    #[inline(always)]
    fn term(&self, k: usize, d: f32) -> f32 {
        if self.label[k] {
            f32::from(u8::from(d != 0.0))
        } else {
            d * d
        }
    }

    /// Weight applied to a channel's accumulated [`Self::term`] values.
    #[inline(always)]
    fn scale(&self, k: usize) -> f64 {
        if self.label[k] {
            self.mismatch[k]
        } else {
            self.weight[k]
        }
    }

    fn plain_n<const C: usize>(&self, tw: &TargetWindow, sx: usize, sy: usize, cutoff: f64) -> Option<f64> {
        let mut acc = 0.0f64;
        for dy in tw.ylo..=tw.yhi {
            let (t, s) = self.rows::<C>(tw, sx, sy, dy);
            let mut row = [0.0f32; C];
            for (tp, sp) in t.chunks_exact(C).zip(s.chunks_exact(C)) {
                for k in 0..C {
                    row[k] += self.term(k, tp[k] - sp[k]);
                }
            }
            for k in 0..C {
                acc += self.scale(k) * f64::from(row[k]);
            }
            if acc > cutoff {
                return None;
            }
        }
        Some(acc)
    }

    fn gain_bias_n<const C: usize>(
        &self,
        tw: &TargetWindow,
        sx: usize,
        sy: usize,
        limits: &GainBiasLimits,
    ) -> (f64, GainBias) {
        let mut sum_s = [0.0f64; 3];
        let mut sum_ss = [0.0f64; 3];
        let mut sum_st = [0.0f64; 3];
        let mut guide = 0.0f64;
        for dy in tw.ylo..=tw.yhi {
            let (t, s) = self.rows::<C>(tw, sx, sy, dy);
            let (mut rs, mut rss, mut rst) = ([0.0f32; 3], [0.0f32; 3], [0.0f32; 3]);
            let mut rg = [0.0f32; C];
            for (tp, sp) in t.chunks_exact(C).zip(s.chunks_exact(C)) {
                for k in 0..3 {
                    rs[k] += sp[k];
                    rss[k] += sp[k] * sp[k];
                    rst[k] += sp[k] * tp[k];
                }
                for k in 3..C {
                    rg[k] += self.term(k, tp[k] - sp[k]);
                }
            }
            for k in 0..3 {
                sum_s[k] += f64::from(rs[k]);
                sum_ss[k] += f64::from(rss[k]);
                sum_st[k] += f64::from(rst[k]);
            }
            for k in 3..C {
                guide += self.scale(k) * f64::from(rg[k]);
            }
        }
        self.finish_gain_bias(tw, sum_s, sum_ss, sum_st, guide, limits)
    }

    fn distance(&self, tx: usize, ty: usize, sx: usize, sy: usize) -> (f32, GainBias) {
        let tw = self.window(tx, ty);
        self.eval(&tw, sx, sy, f64::INFINITY).expect("no cutoff")
    }
}

/// Weighted SSD between the (border-clipped) patch around `target` and the
/// patch around `source` over all stacked channels.
///
/// With gain/bias enabled, each RGB channel of the source is adjusted by the
/// clamped least-squares fit `gain = cov(s, t) / var(s)`,
/// `bias = mean(t) - gain * mean(s)`; guide channels are compared unadjusted.
pub fn weighted_patch_distance(
    stack: &PlaneImage,
    mask: &HoleMask,
    weights: &GuideWeights,
    target: (usize, usize),
    source: (usize, usize),
    params: &PatchParams,
) -> Result<(f32, GainBias)> {
    params.validate()?;
    if mask.dims() != stack.dims() {
        return Err(Error::dims(stack.dims(), mask.dims()));
    }
    let metric = Metric::new(stack, weights, params)?;
    let (tx, ty) = target;
    if tx >= stack.width() || ty >= stack.height() {
        return Err(Error::OutOfBounds { x: tx as i64, y: ty as i64 });
    }
    let r = params.radius();
    let (sx, sy) = source;
    if sx < r || sy < r || sx + r >= stack.width() || sy + r >= stack.height() {
        return Err(Error::OutOfBounds { x: sx as i64, y: sy as i64 });
    }
    if !SourceIndex::new(mask, r).is_valid(sx as i64, sy as i64) {
        return Err(Error::SourceOverlapsHole { x: sx as i64, y: sy as i64 });
    }
    Ok(metric.distance(tx, ty, sx, sy))
}

/// Prior field from a coarser (or differently sized) solve.
#[derive(Clone, Copy)]
pub struct Prior<'a> {
    pub field: &'a NNField,
    /// Fine-over-coarse size ratio per axis.
    pub scale_x: f64,
    pub scale_y: f64,
}

impl<'a> Prior<'a> {
    /// Prior one pyramid level coarser.
    pub fn level_up(field: &'a NNField) -> Self {
        Self {
            field,
            scale_x: 2.0,
            scale_y: 2.0,
        }
    }

    /// Prior mapped onto a field of `width x height` image pixels.
    pub fn rescaled(field: &'a NNField, width: usize, height: usize) -> Self {
        let (cw, ch) = field.image_dims();
        Self {
            field,
            scale_x: width as f64 / cw as f64,
            scale_y: height as f64 / ch as f64,
        }
    }

    fn offset_for(&self, x: usize, y: usize) -> Option<(i32, i32)> {
        let cx = libm::floor(x as f64 / self.scale_x) as usize;
        let cy = libm::floor(y as f64 / self.scale_y) as usize;
        let e = self.field.get(cx, cy)?;
        Some((
            libm::round(f64::from(e.dx) * self.scale_x) as i32,
            libm::round(f64::from(e.dy) * self.scale_y) as i32,
        ))
    }
}

/// Seeds a field over the dilated hole: the scaled prior offset where it is
/// valid, otherwise a uniformly random valid source.
pub fn init_nnf(
    stack: &PlaneImage,
    mask: &HoleMask,
    weights: &GuideWeights,
    params: &PatchParams,
    prior: Option<Prior<'_>>,
) -> Result<NNField> {
    params.validate()?;
    if mask.dims() != stack.dims() {
        return Err(Error::dims(stack.dims(), mask.dims()));
    }
    let metric = Metric::new(stack, weights, params)?;
    let (w, h) = stack.dims();
    let r = params.radius();
    let dilated = mask.dilate(r);
    let Some((bx0, by0, bx1, by1)) = dilated.bbox() else {
        return Ok(NNField::empty(w, h));
    };
    let index = SourceIndex::new(mask, r);
    if index.count() == 0 {
        return Err(Error::NoValidSource);
    }
    let (fw, fh) = (bx1 - bx0 + 1, by1 - by0 + 1);
    let mut field = NNField {
        image_width: w,
        image_height: h,
        x0: bx0,
        y0: by0,
        width: fw,
        height: fh,
        targets: vec![false; fw * fh],
        entries: vec![NnEntry::UNSET; fw * fh],
        iterations: 0,
    };
    let mut rng = rng::stream(params.rng_seed, &[0x1_417]);
    for ly in 0..fh {
        for lx in 0..fw {
            let (x, y) = (bx0 + lx, by0 + ly);
            if !dilated.is_hole(x, y) {
                continue;
            }
            let from_prior = prior
                .and_then(|p| p.offset_for(x, y))
                .filter(|&(dx, dy)| index.is_valid(x as i64 + i64::from(dx), y as i64 + i64::from(dy)));
            let (sx, sy) = match from_prior {
                Some((dx, dy)) => ((x as i64 + i64::from(dx)) as usize, (y as i64 + i64::from(dy)) as usize),
                None => index.sample(&mut rng),
            };
            let (distance, gain_bias) = metric.distance(x, y, sx, sy);
            let i = ly * fw + lx;
            field.targets[i] = true;
            field.entries[i] = NnEntry {
                dx: (sx as i64 - x as i64) as i32,
                dy: (sy as i64 - y as i64) as i32,
                distance,
                gain_bias,
            };
        }
    }
    Ok(field)
}

/// Recomputes every stored distance for the current stack contents, keeping
/// offsets. Used after a vote has changed the target pixels.
pub fn refresh_distances(
    field: &mut NNField,
    stack: &PlaneImage,
    weights: &GuideWeights,
    params: &PatchParams,
) -> Result<()> {
    let metric = Metric::new(stack, weights, params)?;
    let (x0, y0, fw) = (field.x0, field.y0, field.width);
    for (i, e) in field.entries.iter_mut().enumerate() {
        if !field.targets[i] {
            continue;
        }
        let (x, y) = (x0 + i % fw, y0 + i / fw);
        let sx = (x as i64 + i64::from(e.dx)) as usize;
        let sy = (y as i64 + i64::from(e.dy)) as usize;
        let (d, gb) = metric.distance(x, y, sx, sy);
        e.distance = d;
        e.gain_bias = gb;
    }
    Ok(())
}

/// Rows `[row0, row0 + rows)` of the field processed by one worker.
struct Band<'e> {
    row0: usize,
    rows: usize,
    entries: &'e mut [NnEntry],
}

struct SearchContext<'a, 'm> {
    metric: &'a Metric<'m>,
    index: &'a SourceIndex,
    targets: &'a [bool],
    snapshot: &'a [NnEntry],
    x0: usize,
    y0: usize,
    width: usize,
    height: usize,
    max_radius: f64,
    decay: f64,
    reverse: bool,
    seed: u64,
    iteration: u64,
}

impl SearchContext<'_, '_> {
    fn run_band(&self, band_id: usize, band: &mut Band<'_>) {
        let mut rng = rng::stream(self.seed, &[0x5EA2C4, self.iteration, band_id as u64]);
        let fw = self.width;
        let (dx_n, dy_n): (isize, isize) = if self.reverse { (1, 1) } else { (-1, -1) };
        let (cxlo, cylo, cxhi, cyhi) = self.index.centre_range();
        let rows: &mut dyn Iterator<Item = usize> = if self.reverse {
            &mut (0..band.rows).rev()
        } else {
            &mut (0..band.rows)
        };
        for lr in rows {
            let ly = band.row0 + lr;
            let y = self.y0 + ly;
            let cols: &mut dyn Iterator<Item = usize> = if self.reverse { &mut (0..fw).rev() } else { &mut (0..fw) };
            for lx in cols {
                let gi = ly * fw + lx;
                if !self.targets[gi] {
                    continue;
                }
                let x = self.x0 + lx;
                let li = lr * fw + lx;
                let mut best = band.entries[li];
                let tw = self.metric.window(x, y);
                let try_source = |sx: i64, sy: i64, best: &mut NnEntry| {
                    if !self.index.is_valid(sx, sy) {
                        return;
                    }
                    let (ndx, ndy) = ((sx - x as i64) as i32, (sy - y as i64) as i32);
                    if ndx == best.dx && ndy == best.dy {
                        return;
                    }
                    if let Some((d, gb)) = self.metric.eval(&tw, sx as usize, sy as usize, f64::from(best.distance)) {
                        if d < best.distance {
                            *best = NnEntry {
                                dx: ndx,
                                dy: ndy,
                                distance: d,
                                gain_bias: gb,
                            };
                        }
                    }
                };
                // Propagation from the already-visited horizontal and vertical neighbours.
                let nx = lx as isize + dx_n;
                if nx >= 0 && (nx as usize) < fw && self.targets[ly * fw + nx as usize] {
                    let n = band.entries[lr * fw + nx as usize];
                    try_source(x as i64 + i64::from(n.dx), y as i64 + i64::from(n.dy), &mut best);
                }
                let ny = ly as isize + dy_n;
                if ny >= 0 && (ny as usize) < self.height && self.targets[ny as usize * fw + lx] {
                    let ny = ny as usize;
                    let n = if ny >= band.row0 && ny < band.row0 + band.rows {
                        band.entries[(ny - band.row0) * fw + lx]
                    } else {
                        self.snapshot[ny * fw + lx]
                    };
                    try_source(x as i64 + i64::from(n.dx), y as i64 + i64::from(n.dy), &mut best);
                }
                // Random search around the current best with shrinking radius.
                let mut radius = self.max_radius;
                while radius >= 1.0 {
                    let rr = radius as i64;
                    let (bx, by) = (x as i64 + i64::from(best.dx), y as i64 + i64::from(best.dy));
                    let (xl, xh) = ((bx - rr).max(cxlo), (bx + rr).min(cxhi));
                    let (yl, yh) = ((by - rr).max(cylo), (by + rr).min(cyhi));
                    if xl <= xh && yl <= yh {
                        let sx = rng.gen_range(xl..=xh);
                        let sy = rng.gen_range(yl..=yh);
                        try_source(sx, sy, &mut best);
                    }
                    radius *= self.decay;
                }
                band.entries[li] = best;
            }
        }
    }
}

/// One PatchMatch pass: propagation (scan order reversed on odd passes) and
/// random search with radius starting at the larger image dimension.
/// Stored distances never increase.
pub fn pm_iterate<E: Executor>(
    field: &mut NNField,
    stack: &PlaneImage,
    mask: &HoleMask,
    weights: &GuideWeights,
    params: &PatchParams,
    exec: &E,
) -> Result<()> {
    params.validate()?;
    if stack.dims() != field.image_dims() || mask.dims() != field.image_dims() {
        return Err(Error::dims(field.image_dims(), stack.dims()));
    }
    if field.entries.is_empty() {
        field.iterations += 1;
        return Ok(());
    }
    let metric = Metric::new(stack, weights, params)?;
    let index = SourceIndex::new(mask, params.radius());
    let snapshot = match params.band_rows {
        Some(_) => field.entries.clone(),
        None => Vec::new(),
    };
    let ctx = SearchContext {
        metric: &metric,
        index: &index,
        targets: &field.targets,
        snapshot: &snapshot,
        x0: field.x0,
        y0: field.y0,
        width: field.width,
        height: field.height,
        max_radius: stack.width().max(stack.height()) as f64,
        decay: params.search_radius_decay,
        reverse: field.iterations % 2 == 1,
        seed: params.rng_seed,
        iteration: field.iterations,
    };
    let band_rows = params.band_rows.unwrap_or(field.height).min(field.height);
    let fw = field.width;
    let mut bands: Vec<Band<'_>> = field
        .entries
        .chunks_mut(band_rows * fw)
        .enumerate()
        .map(|(i, entries)| Band {
            row0: i * band_rows,
            rows: entries.len() / fw,
            entries,
        })
        .collect();
    exec.for_each_mut(&mut bands, |i, band| ctx.run_band(i, band));
    drop(bands);
    field.iterations += 1;
    Ok(())
}

/// Standalone solve: random or prior initialization followed by
/// `params.pm_iterations` passes.
pub fn patchmatch<E: Executor>(
    stack: &PlaneImage,
    mask: &HoleMask,
    weights: &GuideWeights,
    params: &PatchParams,
    prior: Option<Prior<'_>>,
    exec: &E,
) -> Result<NNField> {
    let mut field = init_nnf(stack, mask, weights, params, prior)?;
    for _ in 0..params.pm_iterations {
        pm_iterate(&mut field, stack, mask, weights, params, exec)?;
    }
    Ok(field)
}
