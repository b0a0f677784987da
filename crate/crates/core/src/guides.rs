//! Guide channels, guide combinations and the per-channel SSD weights.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::image::PlaneImage;
use crate::resample::{resize_bilinear, resize_nearest};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GuideKind {
    Structure,
    Depth,
    Segmentation,
}

impl GuideKind {
    /// Canonical stacking order.
    pub const ALL: [GuideKind; 3] = [GuideKind::Structure, GuideKind::Depth, GuideKind::Segmentation];

    #[inline]
    pub const fn bit(self) -> u8 {
        match self {
            GuideKind::Structure => 1,
            GuideKind::Depth => 2,
            GuideKind::Segmentation => 4,
        }
    }

    pub const fn letter(self) -> char {
        match self {
            GuideKind::Structure => 's',
            GuideKind::Depth => 'd',
            GuideKind::Segmentation => 'g',
        }
    }

    pub const fn name(self) -> &'static str {
        match self {
            GuideKind::Structure => "structure",
            GuideKind::Depth => "depth",
            GuideKind::Segmentation => "segmentation",
        }
    }

    pub const fn comparison(self) -> Comparison {
        match self {
            GuideKind::Segmentation => Comparison::LabelMismatch,
            _ => Comparison::Euclidean,
        }
    }
}

/// How a channel contributes to the patch distance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Comparison {
    /// Squared difference.
    Euclidean,
    /// `mismatch_cost^2` whenever the two label ids differ.
    LabelMismatch,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GuideChannel {
    pub kind: GuideKind,
    pub data: PlaneImage,
    pub comparison: Comparison,
}

impl GuideChannel {
    /// Resamples to `width x height`: bilinear for continuous guides,
    /// nearest for label maps.
    pub fn resized(&self, width: usize, height: usize) -> GuideChannel {
        let data = match self.comparison {
            Comparison::Euclidean => resize_bilinear(&self.data, width, height),
            Comparison::LabelMismatch => resize_nearest(&self.data, width, height),
        };
        GuideChannel {
            kind: self.kind,
            data,
            comparison: self.comparison,
        }
    }
}

/// Subset of the three guides, encoded as `structure | depth << 1 | segmentation << 2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GuideCombo(u8);

impl GuideCombo {
    pub const NONE: GuideCombo = GuideCombo(0);
    pub const ALL_GUIDES: GuideCombo = GuideCombo(7);

    pub fn from_index(index: usize) -> Result<Self> {
        if index > 7 {
            return Err(Error::param("combo", format!("index {index} is outside 0..8")));
        }
        Ok(GuideCombo(index as u8))
    }

    pub fn from_kinds(kinds: &[GuideKind]) -> Self {
        GuideCombo(kinds.iter().fold(0, |acc, k| acc | k.bit()))
    }

    /// All eight combinations in index order.
    pub fn all() -> impl Iterator<Item = GuideCombo> {
        (0..8u8).map(GuideCombo)
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub fn bits(self) -> u8 {
        self.0
    }

    #[inline]
    pub fn has(self, kind: GuideKind) -> bool {
        self.0 & kind.bit() != 0
    }

    /// Number of active guides (`m`).
    pub fn count(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn kinds(self) -> impl Iterator<Item = GuideKind> {
        GuideKind::ALL.into_iter().filter(move |k| self.has(*k))
    }

    /// `none` or the active letters in canonical order, e.g. `sdg`.
    pub fn letters(self) -> String {
        if self.0 == 0 {
            return String::from("none");
        }
        self.kinds().map(GuideKind::letter).collect()
    }
}

impl fmt::Display for GuideCombo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.0, self.letters())
    }
}

/// RGB weight when the structure guide is active.
pub const RGB_WEIGHT_WITH_STRUCTURE: f64 = 0.3;
/// RGB weight otherwise.
pub const RGB_WEIGHT_DEFAULT: f64 = 0.6;

/// Per-channel weights of the stacked patch distance.
///
/// Weights are held exactly as integer multiples of `1 / denominator`;
/// `per_channel` is the floating-point view used by the distance kernels.
#[derive(Clone, Debug, PartialEq)]
pub struct GuideWeights {
    pub combo: GuideCombo,
    /// Total RGB weight `w_c`.
    pub rgb_weight: f64,
    pub units: Vec<u32>,
    pub denominator: u32,
    pub per_channel: Vec<f64>,
    pub comparisons: Vec<Comparison>,
    /// Penalty per disagreeing label pixel (squared in the distance).
    pub mismatch_cost: f64,
}

impl GuideWeights {
    pub fn channels(&self) -> usize {
        self.per_channel.len()
    }

    pub fn with_mismatch_cost(mut self, cost: f64) -> Self {
        self.mismatch_cost = cost;
        self
    }

    /// Exact sum of the weights as `(numerator, denominator)`.
    pub fn exact_sum(&self) -> (u32, u32) {
        (self.units.iter().sum(), self.denominator)
    }
}

/// `w_i = w_c / 3` for the RGB channels and `(1 - w_c) / m` for each of the
/// `m` active guides, with `w_c = 0.3` when structure is active and `0.6`
/// otherwise. With no guides the distance is plain RGB SSD at `1/3` each.
pub fn compute_weights(combo: GuideCombo) -> GuideWeights {
    let m = combo.count() as u32;
    // w_c in tenths.
    let wc_tenths: u32 = if combo.has(GuideKind::Structure) { 3 } else { 6 };
    let (units, denominator, rgb_weight) = if m == 0 {
        (vec![1, 1, 1], 3, 1.0)
    } else {
        let den = 30 * m;
        let mut u = vec![wc_tenths * m; 3];
        u.extend(core::iter::repeat_n(3 * (10 - wc_tenths), m as usize));
        (u, den, f64::from(wc_tenths) / 10.0)
    };
    let per_channel = units.iter().map(|&u| f64::from(u) / f64::from(denominator)).collect();
    let mut comparisons = vec![Comparison::Euclidean; 3];
    comparisons.extend(combo.kinds().map(GuideKind::comparison));
    GuideWeights {
        combo,
        rgb_weight,
        units,
        denominator,
        per_channel,
        comparisons,
        mismatch_cost: 1.0,
    }
}

/// The three guides available to a synthesis run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GuideSet {
    pub structure: Option<GuideChannel>,
    pub depth: Option<GuideChannel>,
    pub segmentation: Option<GuideChannel>,
}

impl GuideSet {
    pub fn get(&self, kind: GuideKind) -> Option<&GuideChannel> {
        match kind {
            GuideKind::Structure => self.structure.as_ref(),
            GuideKind::Depth => self.depth.as_ref(),
            GuideKind::Segmentation => self.segmentation.as_ref(),
        }
    }

    pub fn insert(&mut self, channel: GuideChannel) {
        let slot = match channel.kind {
            GuideKind::Structure => &mut self.structure,
            GuideKind::Depth => &mut self.depth,
            GuideKind::Segmentation => &mut self.segmentation,
        };
        *slot = Some(channel);
    }

    pub fn require(&self, combo: GuideCombo) -> Result<()> {
        for kind in combo.kinds() {
            if self.get(kind).is_none() {
                return Err(Error::MissingGuide(kind.name()));
            }
        }
        Ok(())
    }

    /// Resamples every present guide to `width x height`.
    pub fn resized(&self, width: usize, height: usize) -> GuideSet {
        let r = |g: &Option<GuideChannel>| g.as_ref().map(|g| g.resized(width, height));
        GuideSet {
            structure: r(&self.structure),
            depth: r(&self.depth),
            segmentation: r(&self.segmentation),
        }
    }
}

/// Stacks RGB with the active guides in canonical order.
pub fn assemble(image: &PlaneImage, guides: &GuideSet, combo: GuideCombo) -> Result<(PlaneImage, GuideWeights)> {
    image.check_channels(3)?;
    let mut active = Vec::with_capacity(3);
    for kind in combo.kinds() {
        let g = guides.get(kind).ok_or(Error::MissingGuide(kind.name()))?;
        g.data.check_dims(image.width(), image.height())?;
        g.data.check_channels(1)?;
        active.push(&g.data);
    }
    let stack = if active.is_empty() { image.clone() } else { image.stack(&active)? };
    Ok((stack, compute_weights(combo)))
}

/// Log-depth, min-max normalized to `[0, 1]`. Constant depth maps to 0.5.
pub fn ingest_depth(raw: &PlaneImage) -> Result<GuideChannel> {
    raw.check_channels(1)?;
    if let Some(v) = raw.data().iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidValue(format!("depth must be finite and positive, found {v}")));
    }
    let logs: Vec<f64> = raw.data().iter().map(|&d| libm::log(f64::from(d))).collect();
    let lo = logs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let data = if hi > lo {
        logs.iter().map(|&l| ((l - lo) / (hi - lo)) as f32).collect()
    } else {
        vec![0.5; logs.len()]
    };
    Ok(GuideChannel {
        kind: GuideKind::Depth,
        data: PlaneImage::from_data(raw.width(), raw.height(), 1, data)?,
        comparison: Comparison::Euclidean,
    })
}

/// Integer label ids, kept exactly.
pub fn ingest_segmentation(labels: &PlaneImage) -> Result<GuideChannel> {
    labels.check_channels(1)?;
    if let Some(v) = labels
        .data()
        .iter()
        .find(|v| libm::truncf(**v) != **v || **v < 0.0 || **v > 16_777_216.0)
    {
        return Err(Error::InvalidValue(format!("segmentation labels must be non-negative integers, found {v}")));
    }
    Ok(GuideChannel {
        kind: GuideKind::Segmentation,
        data: labels.clone(),
        comparison: Comparison::LabelMismatch,
    })
}

/// Structure guide from an RGB structure image (Rec. 601 luma).
pub fn structure_guide(structure: &PlaneImage) -> Result<GuideChannel> {
    let data = match structure.channels() {
        1 => structure.clone(),
        3 | 4 => structure.luminance(),
        c => return Err(Error::ChannelMismatch { expected: 3, actual: c }),
    };
    Ok(GuideChannel {
        kind: GuideKind::Structure,
        data,
        comparison: Comparison::Euclidean,
    })
}
