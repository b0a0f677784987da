//! Candidate curation: auto-crop, pairwise scoring, preference matrix.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::exec::{Executor, Serial};
use crate::guides::{compute_weights, GuideCombo};
use crate::image::{CropRect, HoleMask, PlaneImage};
use crate::patchmatch::{patchmatch, PatchParams};
use crate::resample::{resize_area, resize_bilinear, resize_mask_any, resize_mask_nearest};

#[derive(Clone, Debug, PartialEq)]
pub struct AutoCropParams {
    /// Growth factor per step.
    pub gamma: f64,
    /// Stop once the hole covers less than this fraction of the crop.
    pub tau: f64,
    /// Minimum initial side.
    pub base: usize,
    /// Side of the square crops handed to the scorer.
    pub scorer_size: usize,
}

impl Default for AutoCropParams {
    fn default() -> Self {
        Self {
            gamma: 1.05,
            tau: 0.25,
            base: 512,
            scorer_size: 512,
        }
    }
}

impl AutoCropParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 1.0) {
            return Err(Error::param("gamma", "must exceed 1"));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::param("tau", "must lie in (0, 1)"));
        }
        if self.base == 0 || self.scorer_size == 0 {
            return Err(Error::param("base", "sizes must be positive"));
        }
        Ok(())
    }
}

/// Places a square of `side` centred on `[lo, hi]` (inclusive) along an axis
/// of length `len`, translated minimally to fit, or to cover the whole axis
/// when it is longer than the axis.
pub fn place_axis(lo: usize, hi: usize, side: usize, len: usize) -> i64 {
    let start = (lo as i64 + hi as i64 + 1 - side as i64).div_euclid(2);
    let slack = len as i64 - side as i64;
    start.clamp(slack.min(0), slack.max(0))
}

/// Square crop around the hole: starting at `max(base, bbox w, bbox h)`, the
/// side is `ceil(s_i * gamma^k)` for the first `k` at which the side reaches
/// an image axis or the hole fills less than `tau` of the crop.
pub fn auto_crop(mask: &HoleMask, params: &AutoCropParams) -> Result<CropRect> {
    params.validate()?;
    let (x0, y0, x1, y1) = mask.bbox().ok_or(Error::EmptyMask)?;
    let (w, h) = mask.dims();
    let counter = HoleCounter::new(mask);
    let initial = params.base.max(x1 - x0 + 1).max(y1 - y0 + 1) as f64;
    let mut k = 0i32;
    loop {
        let side = libm::ceil(initial * libm::pow(params.gamma, f64::from(k)) - 1e-9) as usize;
        let rect = CropRect {
            x: place_axis(x0, x1, side, w),
            y: place_axis(y0, y1, side, h),
            side,
        };
        if side >= w || side >= h {
            return Ok(rect);
        }
        let holes = counter.count(&rect) as f64;
        if holes < params.tau * (side as f64) * (side as f64) {
            return Ok(rect);
        }
        k += 1;
    }
}

/// Hole pixel counts over rectangles via a summed-area table.
pub struct HoleCounter {
    width: usize,
    height: usize,
    sat: Vec<u64>,
}

impl HoleCounter {
    pub fn new(mask: &HoleMask) -> Self {
        let (w, h) = mask.dims();
        let mut sat = alloc::vec![0u64; (w + 1) * (h + 1)];
        for y in 0..h {
            let mut row = 0;
            for x in 0..w {
                row += u64::from(mask.is_hole(x, y));
                sat[(y + 1) * (w + 1) + x + 1] = sat[y * (w + 1) + x + 1] + row;
            }
        }
        Self { width: w, height: h, sat }
    }

    /// Hole pixels of the image inside `rect`.
    pub fn count(&self, rect: &CropRect) -> u64 {
        let clip = |v: i64, len: usize| v.clamp(0, len as i64) as usize;
        let (xa, xb) = (clip(rect.x, self.width), clip(rect.x + rect.side as i64, self.width));
        let (ya, yb) = (clip(rect.y, self.height), clip(rect.y + rect.side as i64, self.height));
        let s = |x: usize, y: usize| self.sat[y * (self.width + 1) + x];
        s(xb, yb) + s(xa, ya) - s(xa, yb) - s(xb, ya)
    }
}

/// Probabilities of preferring the left image, a tie, and the right image.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairwiseVerdict {
    pub o1: f64,
    pub o2: f64,
    pub o3: f64,
}

impl PairwiseVerdict {
    pub fn new(o1: f64, o2: f64, o3: f64) -> Result<Self> {
        let ok = [o1, o2, o3].iter().all(|p| p.is_finite() && *p >= 0.0) && ((o1 + o2) + o3 - 1.0).abs() <= 1e-6;
        if !ok {
            return Err(Error::InvalidValue(format!(
                "verdict ({o1}, {o2}, {o3}) is not a probability triple"
            )));
        }
        Ok(Self { o1, o2, o3 })
    }

    /// Verdict with left and right exchanged.
    pub fn reversed(&self) -> Self {
        Self {
            o1: self.o3,
            o2: self.o2,
            o3: self.o1,
        }
    }

    /// Preference of the left image over the right, in `[-1, 1]`.
    pub fn margin(&self) -> f64 {
        self.o1 - self.o3
    }
}

/// Judges a pair of equally sized crops. Implementations must be
/// deterministic; antisymmetry is enforced by the matrix builder.
pub trait Scorer: Sync {
    fn name(&self) -> String;

    fn judge(&self, left: &PlaneImage, right: &PlaneImage, mask: &HoleMask) -> Result<PairwiseVerdict>;
}

impl<S: Scorer + ?Sized> Scorer for &S {
    fn name(&self) -> String {
        (**self).name()
    }

    fn judge(&self, left: &PlaneImage, right: &PlaneImage, mask: &HoleMask) -> Result<PairwiseVerdict> {
        (**self).judge(left, right, mask)
    }
}

/// Antisymmetric matrix; `get(i, j) > 0` means `i` is preferred over `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct PreferenceMatrix {
    n: usize,
    values: Vec<f64>,
}

impl PreferenceMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            values: alloc::vec![0.0; n * n],
        }
    }

    /// Sets `M_ij = v` and `M_ji = -v`.
    pub fn set_pair(&mut self, i: usize, j: usize, v: f64) {
        assert!(i != j, "diagonal is fixed at zero");
        self.values[i * self.n + j] = v;
        self.values[j * self.n + i] = -v;
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.values.chunks(self.n).map(|r| r.to_vec()).collect()
    }
}

/// `M_ij = o1 - o3` from one `judge(crop_i, crop_j)` call per pair `i < j`.
pub fn build_matrix<S: Scorer, E: Executor>(
    crops: &[&PlaneImage],
    mask: &HoleMask,
    scorer: &S,
    exec: &E,
) -> Result<PreferenceMatrix> {
    let n = crops.len();
    if n < 2 {
        return Err(Error::param("candidates", "at least two are required"));
    }
    for c in crops {
        c.check_dims(mask.width(), mask.height())?;
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let verdicts = exec.map(pairs.len(), |k| {
        let (i, j) = pairs[k];
        scorer.judge(crops[i], crops[j], mask)
    });
    let mut m = PreferenceMatrix::zeros(n);
    for (&(i, j), v) in pairs.iter().zip(verdicts) {
        let v = v.and_then(|v| PairwiseVerdict::new(v.o1, v.o2, v.o3)).map_err(|e| Error::Scorer {
            left: i,
            right: j,
            reason: e.to_string(),
        })?;
        m.set_pair(i, j, v.margin());
    }
    Ok(m)
}

/// Row means `p_i = sum_j M_ij / n`.
pub fn preference_vector(m: &PreferenceMatrix) -> Vec<f64> {
    m.rows().iter().map(|r| r.iter().sum::<f64>() / m.n() as f64).collect()
}

/// Index of the largest preference; ties go to the lowest index.
pub fn argmax_lowest(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    pub winner: usize,
    pub matrix: PreferenceMatrix,
    pub preferences: Vec<f64>,
    pub crop: CropRect,
    pub scorer: String,
}

/// Crops every candidate identically around the hole, resizes to the scorer
/// size and picks the candidate with the highest preference.
pub fn select<S: Scorer, E: Executor>(
    candidates: &[&PlaneImage],
    mask: &HoleMask,
    scorer: &S,
    params: &AutoCropParams,
    exec: &E,
) -> Result<Selection> {
    let crop = auto_crop(mask, params)?;
    let size = params.scorer_size;
    let crops: Vec<PlaneImage> = candidates
        .iter()
        .map(|c| {
            c.check_dims(mask.width(), mask.height())?;
            Ok(resize_bilinear(&c.crop(&crop), size, size))
        })
        .collect::<Result<_>>()?;
    let mask_crop = resize_mask_nearest(&mask.crop(&crop), size, size);
    let refs: Vec<&PlaneImage> = crops.iter().collect();
    let matrix = build_matrix(&refs, &mask_crop, scorer, exec)?;
    let preferences = preference_vector(&matrix);
    Ok(Selection {
        winner: argmax_lowest(&preferences),
        matrix,
        preferences,
        crop,
        scorer: scorer.name(),
    })
}

/// Hand-crafted realism penalty turned into a pairwise verdict.
#[derive(Clone, Debug, PartialEq)]
pub struct HeuristicScorer {
    pub seam_weight: f64,
    pub incoherence_weight: f64,
    pub blur_weight: f64,
    pub temperature: f64,
    /// Side at which patch incoherence is measured.
    pub analysis_size: usize,
}

impl Default for HeuristicScorer {
    fn default() -> Self {
        Self {
            seam_weight: 1.0,
            incoherence_weight: 1.0,
            blur_weight: 0.5,
            temperature: 0.1,
            analysis_size: 128,
        }
    }
}

/// Components of the heuristic penalty.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PenaltyTerms {
    pub seam: f64,
    pub incoherence: f64,
    pub blur: f64,
}

impl HeuristicScorer {
    pub fn terms(&self, image: &PlaneImage, mask: &HoleMask) -> Result<PenaltyTerms> {
        image.check_channels(3)?;
        image.check_dims(mask.width(), mask.height())?;
        let luma = image.luminance();
        Ok(PenaltyTerms {
            seam: seam_discontinuity(&luma, mask),
            incoherence: self.incoherence(image, mask)?,
            blur: blur_deficit(&luma, mask),
        })
    }

    pub fn penalty(&self, image: &PlaneImage, mask: &HoleMask) -> Result<f64> {
        let t = self.terms(image, mask)?;
        Ok(self.seam_weight * t.seam + self.incoherence_weight * t.incoherence + self.blur_weight * t.blur)
    }

    /// Mean patch distance from hole patches to their nearest known patches.
    fn incoherence(&self, image: &PlaneImage, mask: &HoleMask) -> Result<f64> {
        let (w, h) = image.dims();
        let scale = self.analysis_size as f64 / w.max(h) as f64;
        let (small, small_mask) = if scale < 1.0 {
            let sw = (libm::round(w as f64 * scale) as usize).max(1);
            let sh = (libm::round(h as f64 * scale) as usize).max(1);
            (resize_area(image, sw, sh), resize_mask_any(mask, sw, sh))
        } else {
            (image.clone(), mask.clone())
        };
        let weights = compute_weights(GuideCombo::NONE);
        match patchmatch(&small, &small_mask, &weights, &PatchParams::default(), None, &Serial) {
            Ok(field) => {
                let (sum, n) = field
                    .iter()
                    .filter(|(x, y, _)| small_mask.is_hole(*x, *y))
                    .fold((0.0, 0usize), |(s, n), (_, _, e)| (s + f64::from(e.distance), n + 1));
                Ok(if n == 0 { 0.0 } else { sum / n as f64 })
            }
            Err(Error::NoValidSource) => Ok(0.0),
            Err(e) => Err(e),
        }
    }
}

/// Excess of the mean luminance step across hole-boundary edges over the
/// mean step between known pixels.
fn seam_discontinuity(luma: &PlaneImage, mask: &HoleMask) -> f64 {
    let (w, h) = luma.dims();
    let (mut seam, mut seam_n, mut known, mut known_n) = (0.0f64, 0usize, 0.0f64, 0usize);
    let mut edge = |a: (usize, usize), b: (usize, usize)| {
        let d = f64::from((luma.get(a.0, a.1, 0) - luma.get(b.0, b.1, 0)).abs());
        match (mask.is_hole(a.0, a.1), mask.is_hole(b.0, b.1)) {
            (true, false) | (false, true) => {
                seam += d;
                seam_n += 1;
            }
            (false, false) => {
                known += d;
                known_n += 1;
            }
            (true, true) => {}
        }
    };
    for y in 0..h {
        for x in 0..w {
            if x + 1 < w {
                edge((x, y), (x + 1, y));
            }
            if y + 1 < h {
                edge((x, y), (x, y + 1));
            }
        }
    }
    if seam_n == 0 || known_n == 0 {
        return 0.0;
    }
    (seam / seam_n as f64 - known / known_n as f64).max(0.0)
}

/// `1 - E_hole / E_known`, floored at zero, where `E` is the mean squared
/// Laplacian over pixels whose 3x3 neighbourhood lies entirely in (or
/// entirely outside) the hole.
fn blur_deficit(luma: &PlaneImage, mask: &HoleMask) -> f64 {
    let (w, h) = luma.dims();
    if w < 3 || h < 3 {
        return 0.0;
    }
    let (mut eh, mut nh, mut ek, mut nk) = (0.0f64, 0usize, 0.0f64, 0usize);
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let holes = (y - 1..=y + 1)
                .flat_map(|yy| (x - 1..=x + 1).map(move |xx| (xx, yy)))
                .filter(|&(xx, yy)| mask.is_hole(xx, yy))
                .count();
            if holes != 0 && holes != 9 {
                continue;
            }
            let l = |xx: usize, yy: usize| f64::from(luma.get(xx, yy, 0));
            let lap = 4.0 * l(x, y) - l(x - 1, y) - l(x + 1, y) - l(x, y - 1) - l(x, y + 1);
            if holes == 9 {
                eh += lap * lap;
                nh += 1;
            } else {
                ek += lap * lap;
                nk += 1;
            }
        }
    }
    if nh == 0 || nk == 0 || ek <= 0.0 {
        return 0.0;
    }
    (1.0 - (eh / nh as f64) / (ek / nk as f64)).max(0.0)
}

impl Scorer for HeuristicScorer {
    fn name(&self) -> String {
        "heuristic".into()
    }

    fn judge(&self, left: &PlaneImage, right: &PlaneImage, mask: &HoleMask) -> Result<PairwiseVerdict> {
        left.check_dims(right.width(), right.height())?;
        let d = self.penalty(right, mask)? - self.penalty(left, mask)?;
        Ok(softmax_verdict(d / self.temperature))
    }
}

/// Softmax over `[z, 0, -z]`, arranged so that negating `z` swaps the outer
/// probabilities bit for bit.
pub fn softmax_verdict(z: f64) -> PairwiseVerdict {
    let m = z.abs();
    let (a, t, b) = (libm::exp(z - m), libm::exp(-m), libm::exp(-z - m));
    let total = (a + b) + t;
    PairwiseVerdict {
        o1: a / total,
        o2: t / total,
        o3: b / total,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::cell::Cell;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct Fixed(PairwiseVerdict);
    impl Scorer for Fixed {
        fn name(&self) -> String {
            "fixed".into()
        }
        fn judge(&self, _: &PlaneImage, _: &PlaneImage, _: &HoleMask) -> Result<PairwiseVerdict> {
            Ok(self.0)
        }
    }

    #[test]
    fn matrix_from_single_pair() {
        let imgs = [PlaneImage::new(4, 4, 3), PlaneImage::new(4, 4, 3)];
        let refs: Vec<&PlaneImage> = imgs.iter().collect();
        let mask = HoleMask::with_rect(4, 4, 1, 1, 2, 2);
        let m = build_matrix(&refs, &mask, &Fixed(PairwiseVerdict::new(0.5, 0.3, 0.2).unwrap()), &Serial).unwrap();
        assert!((m.get(0, 1) - 0.3).abs() < 1e-15);
        assert_eq!(m.get(1, 0), -m.get(0, 1));
        let p = preference_vector(&m);
        assert!((p[0] - 0.15).abs() < 1e-15 && (p[1] + 0.15).abs() < 1e-15);

        let third = 1.0 / 3.0;
        let tie = build_matrix(&refs, &mask, &Fixed(PairwiseVerdict { o1: third, o2: third, o3: third }), &Serial)
            .unwrap();
        assert!(tie.rows().iter().flatten().all(|&v| v == 0.0));
        assert_eq!(argmax_lowest(&preference_vector(&tie)), 0);
    }

    #[test]
    fn left_preferring_scorer_picks_first() {
        let imgs: Vec<PlaneImage> = (0..8).map(|i| PlaneImage::filled(6, 6, 3, i as f32 / 8.0)).collect();
        let refs: Vec<&PlaneImage> = imgs.iter().collect();
        let mask = HoleMask::with_rect(6, 6, 2, 2, 2, 2);
        let m = build_matrix(&refs, &mask, &Fixed(PairwiseVerdict::new(0.7, 0.2, 0.1).unwrap()), &Serial).unwrap();
        let p = preference_vector(&m);
        assert!(p.windows(2).all(|w| w[0] > w[1]));
        assert_eq!(argmax_lowest(&p), 0);
    }

    #[test]
    fn scorer_errors_name_the_pair() {
        struct FailOn(usize);
        impl Scorer for FailOn {
            fn name(&self) -> String {
                "fail".into()
            }
            fn judge(&self, l: &PlaneImage, _: &PlaneImage, _: &HoleMask) -> Result<PairwiseVerdict> {
                if l.get(0, 0, 0) == self.0 as f32 {
                    Err(Error::InvalidValue("boom".into()))
                } else {
                    PairwiseVerdict::new(0.2, 0.6, 0.2)
                }
            }
        }
        let imgs: Vec<PlaneImage> = (0..3).map(|i| PlaneImage::filled(4, 4, 3, i as f32)).collect();
        let refs: Vec<&PlaneImage> = imgs.iter().collect();
        let mask = HoleMask::with_rect(4, 4, 1, 1, 1, 1);
        let err = build_matrix(&refs, &mask, &FailOn(1), &Serial).unwrap_err();
        assert!(matches!(err, Error::Scorer { left: 1, right: 2, .. }));
    }

    #[test]
    fn call_count_is_pairs_only() {
        struct Counting(Cell<usize>);
        // Serial executor only; the cell is never shared across threads.
        unsafe impl Sync for Counting {}
        impl Scorer for Counting {
            fn name(&self) -> String {
                "count".into()
            }
            fn judge(&self, _: &PlaneImage, _: &PlaneImage, _: &HoleMask) -> Result<PairwiseVerdict> {
                self.0.set(self.0.get() + 1);
                PairwiseVerdict::new(0.1, 0.1, 0.8)
            }
        }
        let imgs: Vec<PlaneImage> = (0..8).map(|_| PlaneImage::new(4, 4, 3)).collect();
        let refs: Vec<&PlaneImage> = imgs.iter().collect();
        let s = Counting(Cell::new(0));
        build_matrix(&refs, &HoleMask::with_rect(4, 4, 0, 0, 1, 1), &s, &Serial).unwrap();
        assert_eq!(s.0.get(), 28);
    }

    #[test]
    fn crop_examples() {
        let p = AutoCropParams::default();
        let small = HoleMask::with_rect(4000, 3000, 1000, 1000, 200, 200);
        let r = auto_crop(&small, &p).unwrap();
        assert_eq!(r.side, 512);
        assert_eq!((r.x, r.y), (1100 - 256, 1100 - 256));

        let big = HoleMask::with_rect(4000, 3000, 1000, 1000, 600, 600);
        let r = auto_crop(&big, &p).unwrap();
        let mut s = 600.0f64;
        while 360000.0 >= 0.25 * s.ceil() * s.ceil() {
            s *= 1.05;
        }
        assert_eq!(r.side, s.ceil() as usize);
        assert!(r.side > 1200);
        assert!(360000.0 < 0.25 * (r.side * r.side) as f64);

        let tall = HoleMask::with_rect(300, 2000, 10, 100, 100, 1500);
        let r = auto_crop(&tall, &p).unwrap();
        assert!(r.side >= 300);
        assert!(r.x <= 0 && r.x + r.side as i64 >= 300);
        assert!(auto_crop(&HoleMask::new(10, 10), &p).is_err());
    }

    #[test]
    fn axis_placement() {
        assert_eq!(place_axis(0, 9, 20, 100), 0);
        assert_eq!(place_axis(90, 99, 20, 100), 80);
        assert_eq!(place_axis(40, 59, 20, 100), 40);
        assert_eq!(place_axis(0, 9, 120, 100), -20);
        assert_eq!(place_axis(40, 59, 120, 100), -10);
    }

    #[test]
    fn softmax_is_swap_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let z: f64 = rng.gen_range(-50.0..50.0);
            assert_eq!(softmax_verdict(z).reversed(), softmax_verdict(-z));
            let v = softmax_verdict(z);
            assert!(PairwiseVerdict::new(v.o1, v.o2, v.o3).is_ok());
        }
        let even = softmax_verdict(0.0);
        assert_eq!(even.o1, even.o3);
    }

    #[test]
    fn heuristic_prefers_sharp_fill_over_blur() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let tile = PlaneImage::from_fn(6, 6, 3, |_, _, _| rng.gen());
        let truth = PlaneImage::from_fn(96, 96, 3, |x, y, c| tile.get(x % 6, y % 6, c));
        let mask = HoleMask::with_rect(96, 96, 32, 32, 32, 32);
        let blurred = PlaneImage::from_fn(96, 96, 3, |x, y, c| {
            if !mask.is_hole(x, y) {
                return truth.get(x, y, c);
            }
            let mut s = 0.0;
            for dy in -3i64..=3 {
                for dx in -3i64..=3 {
                    s += truth.get((x as i64 + dx) as usize, (y as i64 + dy) as usize, c);
                }
            }
            s / 49.0
        });
        let scorer = HeuristicScorer::default();
        let v = scorer.judge(&truth, &blurred, &mask).unwrap();
        assert!(v.o1 > v.o3, "{v:?}");
        assert_eq!(scorer.judge(&blurred, &truth, &mask).unwrap(), v.reversed());
        let same = scorer.judge(&truth, &truth, &mask).unwrap();
        assert_eq!(same.o1, same.o3);
    }
}
