//! Synthetic hole masks: random brush strokes and library object shapes.

use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::image::HoleMask;
use crate::resample::resize_mask_nearest;
use crate::rng::{self, PipelineRng};

/// Long edge at which the default hole geometry is specified.
pub const GENERATION_LONG_EDGE: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HoleKind {
    FreeForm,
    ObjectShape,
}

/// Brush parameters at generation scale (512 px bounding box).
#[derive(Clone, Debug, PartialEq)]
pub struct StrokeParams {
    pub waypoints: (usize, usize),
    pub radius: (f64, f64),
    pub step: (f64, f64),
    pub max_attempts: usize,
    /// Accepted relative deviation of the area from its target.
    pub tolerance: f64,
}

impl Default for StrokeParams {
    fn default() -> Self {
        Self {
            waypoints: (4, 12),
            radius: (8.0, 48.0),
            step: (16.0, 96.0),
            max_attempts: 50,
            tolerance: 0.4,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HoleSpec {
    pub kind: HoleKind,
    pub bbox_side: usize,
    /// Target hole area in pixels (free-form only).
    pub target_area: f64,
    pub seed: u64,
    pub strokes: StrokeParams,
}

impl HoleSpec {
    /// Default geometry scaled from the generation size to an image:
    /// a 512 px box at 1024 px long edge covered to 30 %.
    pub fn scaled(kind: HoleKind, width: usize, height: usize, seed: u64) -> Self {
        let scale = width.max(height) as f64 / GENERATION_LONG_EDGE as f64;
        let side = (libm::round(512.0 * scale) as usize).clamp(1, width.min(height));
        Self {
            kind,
            bbox_side: side,
            target_area: 0.3 * (side * side) as f64,
            seed,
            strokes: StrokeParams::default(),
        }
    }
}

fn place_bbox(width: usize, height: usize, side: usize, rng: &mut PipelineRng) -> Result<(usize, usize)> {
    if side == 0 || side > width || side > height {
        return Err(Error::param("bbox_side", "bounding box must fit inside the image"));
    }
    Ok((rng.gen_range(0..=width - side), rng.gen_range(0..=height - side)))
}

/// Marks the capsule of radius `r` around segment `a`-`b`, clipped to the box.
fn stamp_segment(mask: &mut HoleMask, a: (f64, f64), b: (f64, f64), r: f64, bx: (usize, usize, usize)) {
    let (x0, y0, side) = bx;
    let lo_x = libm::floor(a.0.min(b.0) - r).max(x0 as f64) as usize;
    let hi_x = libm::ceil(a.0.max(b.0) + r).min((x0 + side - 1) as f64) as usize;
    let lo_y = libm::floor(a.1.min(b.1) - r).max(y0 as f64) as usize;
    let hi_y = libm::ceil(a.1.max(b.1) + r).min((y0 + side - 1) as f64) as usize;
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    for y in lo_y..=hi_y {
        for x in lo_x..=hi_x {
            let (px, py) = (x as f64 - a.0, y as f64 - a.1);
            let t = if len2 > 0.0 { ((px * dx + py * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
            let (ex, ey) = (px - t * dx, py - t * dy);
            if ex * ex + ey * ey <= r * r {
                mask.set(x, y, true);
            }
        }
    }
}

/// Adds strokes inside the box until the area reaches `target`.
fn stroke_attempt(
    width: usize,
    height: usize,
    bx: (usize, usize, usize),
    target: f64,
    p: &StrokeParams,
    rng: &mut PipelineRng,
) -> HoleMask {
    let (x0, y0, side) = bx;
    let scale = side as f64 / 512.0;
    let (lo, hi) = (x0 as f64, (x0 + side - 1) as f64);
    let (tlo, thi) = (y0 as f64, (y0 + side - 1) as f64);
    let mut mask = HoleMask::new(width, height);
    let mut area = 0usize;
    let cap = 64;
    for _ in 0..cap {
        if area as f64 >= target {
            break;
        }
        let mut pt = (rng.gen_range(lo..=hi), rng.gen_range(tlo..=thi));
        let n = rng.gen_range(p.waypoints.0..=p.waypoints.1);
        for _ in 0..n {
            let angle = rng.gen_range(0.0..core::f64::consts::TAU);
            let len = rng.gen_range(p.step.0..=p.step.1) * scale;
            let next = (
                (pt.0 + len * libm::cos(angle)).clamp(lo, hi),
                (pt.1 + len * libm::sin(angle)).clamp(tlo, thi),
            );
            let r = rng.gen_range(p.radius.0..=p.radius.1) * scale;
            stamp_segment(&mut mask, pt, next, r, bx);
            pt = next;
        }
        area = mask.hole_count();
    }
    mask
}

/// Union of random-walk brush strokes inside a random box. Attempts whose
/// area misses the target by more than the tolerance are redrawn; after the
/// last attempt the closest one is returned.
pub fn freeform_mask(width: usize, height: usize, spec: &HoleSpec) -> Result<HoleMask> {
    let side = spec.bbox_side;
    if !(spec.target_area > 0.0) {
        return Err(Error::param("target_area", "must be positive"));
    }
    if spec.target_area > (side * side) as f64 {
        return Err(Error::param("target_area", "exceeds the bounding box capacity"));
    }
    let mut rng = rng::stream(spec.seed, &[0xF4EE]);
    let (x0, y0) = place_bbox(width, height, side, &mut rng)?;
    let p = &spec.strokes;
    let mut best: Option<(f64, HoleMask)> = None;
    for _ in 0..p.max_attempts.max(1) {
        let mask = stroke_attempt(width, height, (x0, y0, side), spec.target_area, p, &mut rng);
        if !mask.has_source() {
            continue;
        }
        let err = (mask.hole_count() as f64 - spec.target_area).abs() / spec.target_area;
        if err <= p.tolerance {
            return Ok(mask);
        }
        if best.as_ref().is_none_or(|(e, _)| err < *e) {
            best = Some((err, mask));
        }
    }
    best.map(|(_, m)| m).ok_or(Error::NoValidSource)
}

/// Crops a mask to the bounding box of its holes.
fn tight(mask: &HoleMask) -> Option<HoleMask> {
    let (x0, y0, x1, y1) = mask.bbox()?;
    Some(HoleMask::from_fn(x1 - x0 + 1, y1 - y0 + 1, |x, y| mask.is_hole(x0 + x, y0 + y)))
}

/// A uniformly chosen library shape scaled so its long side equals the box
/// side, placed uniformly inside a uniformly placed box.
pub fn object_mask(width: usize, height: usize, spec: &HoleSpec, library: &[HoleMask]) -> Result<HoleMask> {
    if library.is_empty() {
        return Err(Error::param("library", "no object masks available"));
    }
    let mut rng = rng::stream(spec.seed, &[0x0B1E]);
    let side = spec.bbox_side;
    let (bx, by) = place_bbox(width, height, side, &mut rng)?;
    let shape = tight(&library[rng.gen_range(0..library.len())])
        .ok_or_else(|| Error::InvalidValue("library mask has no hole pixels".into()))?;
    let (sw, sh) = shape.dims();
    let (w, h) = if sw >= sh {
        (side, (libm::round(sh as f64 * side as f64 / sw as f64) as usize).clamp(1, side))
    } else {
        ((libm::round(sw as f64 * side as f64 / sh as f64) as usize).clamp(1, side), side)
    };
    let scaled = resize_mask_nearest(&shape, w, h);
    let ox = bx + rng.gen_range(0..=side - w);
    let oy = by + rng.gen_range(0..=side - h);
    let mut mask = HoleMask::new(width, height);
    for y in 0..h {
        for x in 0..w {
            if scaled.is_hole(x, y) {
                mask.set(ox + x, oy + y, true);
            }
        }
    }
    if !mask.has_source() {
        return Err(Error::NoValidSource);
    }
    Ok(mask)
}

/// Fair choice between free-form and object holes for benchmark draw `seed`.
pub fn sample_kind(seed: u64) -> HoleKind {
    if rng::stream(seed, &[0x1D]).gen_bool(0.5) {
        HoleKind::FreeForm
    } else {
        HoleKind::ObjectShape
    }
}

/// Benchmark sampler: an even mix of both kinds, or free-form only when
/// the library is empty.
pub fn mixed_mask(width: usize, height: usize, seed: u64, library: &[HoleMask]) -> Result<(HoleKind, HoleMask)> {
    let kind = if library.is_empty() { HoleKind::FreeForm } else { sample_kind(seed) };
    let spec = HoleSpec::scaled(kind, width, height, seed);
    let mask = match kind {
        HoleKind::FreeForm => freeform_mask(width, height, &spec)?,
        HoleKind::ObjectShape => object_mask(width, height, &spec, library)?,
    };
    Ok((kind, mask))
}

/// Hole masks for `count` consecutive seeds starting at `seed`.
pub fn generate(
    kind: Option<HoleKind>,
    width: usize,
    height: usize,
    seed: u64,
    count: usize,
    library: &[HoleMask],
) -> Result<Vec<HoleMask>> {
    (0..count as u64)
        .map(|i| {
            let s = rng::derive(seed, &[i]);
            match kind {
                None => mixed_mask(width, height, s, library).map(|m| m.1),
                Some(HoleKind::FreeForm) => freeform_mask(width, height, &HoleSpec::scaled(HoleKind::FreeForm, width, height, s)),
                Some(HoleKind::ObjectShape) => {
                    object_mask(width, height, &HoleSpec::scaled(HoleKind::ObjectShape, width, height, s), library)
                }
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inside(mask: &HoleMask, side: usize) -> bool {
        let (x0, y0, x1, y1) = mask.bbox().unwrap();
        x1 - x0 < side && y1 - y0 < side
    }

    #[test]
    fn freeform_is_reproducible_and_boxed() {
        let spec = HoleSpec::scaled(HoleKind::FreeForm, 640, 480, 3);
        let a = freeform_mask(640, 480, &spec).unwrap();
        assert_eq!(a, freeform_mask(640, 480, &spec).unwrap());
        assert!(inside(&a, spec.bbox_side));
        assert!(a.has_source());
    }

    #[test]
    fn freeform_rejects_bad_targets() {
        let mut spec = HoleSpec::scaled(HoleKind::FreeForm, 640, 480, 3);
        spec.target_area = 0.0;
        assert!(freeform_mask(640, 480, &spec).is_err());
        spec.target_area = 1e9;
        assert!(freeform_mask(640, 480, &spec).is_err());
    }

    #[test]
    fn single_library_shape_fits_box() {
        let shape = HoleMask::from_fn(900, 300, |x, y| (x / 30 + y / 30) % 2 == 0);
        let spec = HoleSpec::scaled(HoleKind::ObjectShape, 1024, 768, 1);
        for seed in 0..20 {
            let s = HoleSpec { seed, ..spec.clone() };
            let m = object_mask(1024, 768, &s, core::slice::from_ref(&shape)).unwrap();
            let (x0, _, x1, _) = m.bbox().unwrap();
            assert_eq!(x1 - x0 + 1, 512);
        }
        assert!(object_mask(1024, 768, &spec, &[]).is_err());
    }
}
