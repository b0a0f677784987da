//! Coarse-to-fine image/mask pyramids.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::image::{HoleMask, PlaneImage};
use crate::resample::{downsample2x, downsample_mask};

pub const DEFAULT_MIN_EDGE: usize = 64;

/// Factor-2 pyramid; `levels[0]` is full resolution.
#[derive(Clone, Debug)]
pub struct ImagePyramid {
    levels: Vec<(PlaneImage, HoleMask)>,
}

impl ImagePyramid {
    pub fn levels(&self) -> &[(PlaneImage, HoleMask)] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn level(&self, l: usize) -> (&PlaneImage, &HoleMask) {
        let (img, mask) = &self.levels[l];
        (img, mask)
    }

    pub fn coarsest(&self) -> (&PlaneImage, &HoleMask) {
        self.level(self.levels.len() - 1)
    }

    pub fn into_levels(self) -> Vec<(PlaneImage, HoleMask)> {
        self.levels
    }
}

/// Number of levels whose long edge stays at or above `min_edge`.
pub fn level_count(width: usize, height: usize, min_edge: usize) -> usize {
    let mut n = 1;
    let (mut w, mut h) = (width, height);
    loop {
        let (nw, nh) = (w.div_ceil(2), h.div_ceil(2));
        if nw.max(nh) < min_edge || (nw, nh) == (w, h) {
            return n;
        }
        n += 1;
        (w, h) = (nw, nh);
    }
}

pub fn build_pyramid(image: &PlaneImage, mask: &HoleMask, min_edge: usize) -> Result<ImagePyramid> {
    if min_edge < 8 {
        return Err(Error::param("min_edge", "must be at least 8"));
    }
    if image.dims() != mask.dims() {
        return Err(Error::dims(image.dims(), mask.dims()));
    }
    if image.long_edge() < min_edge {
        return Err(Error::TooSmall {
            width: image.width(),
            height: image.height(),
            min_edge,
        });
    }
    let n = level_count(image.width(), image.height(), min_edge);
    let mut levels = vec![(image.clone(), mask.clone())];
    for _ in 1..n {
        let (img, m) = levels.last().expect("non-empty");
        let next = (downsample2x(img), downsample_mask(m));
        levels.push(next);
    }
    Ok(ImagePyramid { levels })
}
