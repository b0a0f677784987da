//! Coarse-to-fine search-and-vote synthesis initialized from a coarse fill.

use alloc::string::String;
use alloc::vec::Vec;

use crate::curation::{select, AutoCropParams, Scorer, Selection};
use crate::error::{Error, Result};
use crate::exec::{elapsed, Executor, Serial};
use crate::guides::{assemble, GuideCombo, GuideSet};
use crate::image::{composite, same_aspect, HoleMask, PlaneImage};
use crate::patchmatch::{
    init_nnf, pm_iterate, refresh_distances, GainBiasLimits, NNField, PatchParams, Prior,
};
use crate::pyramid::{build_pyramid, ImagePyramid, DEFAULT_MIN_EDGE};
use crate::resample::{resize_area, resize_bilinear, resize_mask_any, upsample2x_clamped};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VoteMode {
    Uniform,
    /// Weight `exp(-d / (2 sigma^2))`, sigma the 75th percentile of distances.
    DistanceWeighted,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthesisParams {
    /// EM iterations at the coarsest level.
    pub coarse_em_iterations: usize,
    /// EM iterations at full resolution; levels in between interpolate linearly.
    pub fine_em_iterations: usize,
    /// PatchMatch passes per EM search phase.
    pub search_iterations: usize,
    /// `patch.gain_bias` doubles as the gain/bias switch.
    pub patch: PatchParams,
    pub vote_mode: VoteMode,
    pub min_pyramid_edge: usize,
    /// Long edge at which the optimized pipeline generates candidates.
    pub proxy_long_edge: usize,
    /// Cost of one disagreeing label pixel (squared in the distance).
    pub mismatch_cost: f64,
}

impl Default for SynthesisParams {
    fn default() -> Self {
        Self {
            coarse_em_iterations: 12,
            fine_em_iterations: 4,
            search_iterations: 1,
            patch: PatchParams {
                gain_bias: Some(GainBiasLimits::default()),
                ..PatchParams::default()
            },
            vote_mode: VoteMode::Uniform,
            min_pyramid_edge: DEFAULT_MIN_EDGE,
            proxy_long_edge: 1024,
            mismatch_cost: 1.0,
        }
    }
}

impl SynthesisParams {
    pub fn gain_bias_enabled(&self) -> bool {
        self.patch.gain_bias.is_some()
    }

    pub fn validate(&self) -> Result<()> {
        self.patch.validate()?;
        if self.coarse_em_iterations == 0 || self.fine_em_iterations == 0 || self.search_iterations == 0 {
            return Err(Error::param("em_iterations", "all iteration counts must be at least 1"));
        }
        if self.min_pyramid_edge < 8 {
            return Err(Error::param("min_pyramid_edge", "must be at least 8"));
        }
        if self.proxy_long_edge < self.min_pyramid_edge {
            return Err(Error::param("proxy_long_edge", "must not be below min_pyramid_edge"));
        }
        if !(self.mismatch_cost.is_finite() && self.mismatch_cost >= 0.0) {
            return Err(Error::param("mismatch_cost", "must be finite and non-negative"));
        }
        Ok(())
    }

    /// EM iterations for each level, index 0 = finest.
    pub fn em_schedule(&self, levels: usize) -> Vec<usize> {
        if levels <= 1 {
            return alloc::vec![self.coarse_em_iterations; levels];
        }
        let (c, f) = (self.coarse_em_iterations as f64, self.fine_em_iterations as f64);
        (0..levels)
            .map(|l| {
                let t = l as f64 / (levels - 1) as f64;
                (libm::round(f + (c - f) * t) as usize).max(1)
            })
            .collect()
    }
}

/// Externally produced low-resolution fill of the whole image.
#[derive(Clone, Debug, PartialEq)]
pub struct CoarseFill {
    pub image: PlaneImage,
    pub provenance: String,
}

impl CoarseFill {
    pub fn new(image: PlaneImage, provenance: impl Into<String>) -> Self {
        Self {
            image,
            provenance: provenance.into(),
        }
    }

    /// Fails unless the fill has RGB channels and the aspect ratio of `width x height`.
    pub fn check_aspect(&self, width: usize, height: usize) -> Result<()> {
        self.image.check_channels(3)?;
        let (cw, ch) = self.image.dims();
        if !same_aspect((cw, ch), (width, height)) {
            return Err(Error::InvalidValue(alloc::format!(
                "coarse fill {cw}x{ch} does not match the aspect ratio of {width}x{height}"
            )));
        }
        Ok(())
    }
}

/// Replaces the hole of `level` with the coarse fill resampled to its size.
pub fn initialize_level(level: &PlaneImage, mask: &HoleMask, coarse: &CoarseFill) -> Result<PlaneImage> {
    let (w, h) = level.dims();
    coarse.check_aspect(w, h)?;
    if coarse.image.width() < w || coarse.image.height() < h {
        return Err(Error::InvalidValue(alloc::format!(
            "coarse fill {}x{} is smaller than the {w}x{h} level it initializes",
            coarse.image.width(),
            coarse.image.height()
        )));
    }
    composite(level, &resize_bilinear(&coarse.image, w, h), mask)
}

/// Coarsest pyramid level with the hole filled from the coarse fill.
pub fn initialize(pyramid: &ImagePyramid, coarse: &CoarseFill) -> Result<PlaneImage> {
    let (img, mask) = pyramid.coarsest();
    initialize_level(img, mask, coarse)
}

fn percentile_75(values: &mut [f32]) -> f32 {
    values.sort_unstable_by(|a, b| a.total_cmp(b));
    values[(values.len() - 1) * 3 / 4]
}

/// Rewrites the RGB values of hole pixels as the average of the
/// gain/bias-adjusted source pixels that every overlapping target patch maps
/// onto them. Guide channels and non-hole pixels are left untouched.
pub fn vote<E: Executor>(
    field: &NNField,
    stack: &PlaneImage,
    mask: &HoleMask,
    patch_size: usize,
    mode: VoteMode,
    exec: &E,
) -> Result<PlaneImage> {
    if stack.dims() != mask.dims() || field.image_dims() != mask.dims() {
        return Err(Error::dims(stack.dims(), mask.dims()));
    }
    let Some((x0, y0, x1, y1)) = mask.bbox() else {
        return Ok(stack.clone());
    };
    let r = (patch_size / 2) as i64;
    let sigma = match mode {
        VoteMode::Uniform => 0.0,
        VoteMode::DistanceWeighted => {
            let mut d: Vec<f32> = field.iter().map(|(_, _, e)| e.distance).collect();
            if d.is_empty() {
                0.0
            } else {
                f64::from(percentile_75(&mut d))
            }
        }
    };
    let weighted = sigma > 1e-12;
    let (w, h) = stack.dims();
    let rows = exec.map(y1 - y0 + 1, |row| -> Result<Vec<[f32; 3]>> {
        let y = y0 + row;
        let mut out = Vec::with_capacity(x1 - x0 + 1);
        for x in x0..=x1 {
            if !mask.is_hole(x, y) {
                out.push([0.0; 3]);
                continue;
            }
            let (ya, yb) = ((y as i64 - r).max(0), (y as i64 + r).min(h as i64 - 1));
            let (xa, xb) = ((x as i64 - r).max(0), (x as i64 + r).min(w as i64 - 1));
            // Weights are shifted by the smallest covering distance; the
            // normalized average is unchanged and cannot underflow to zero.
            let mut floor = f64::INFINITY;
            if weighted {
                for qy in ya..=yb {
                    for qx in xa..=xb {
                        if let Some(e) = field.get(qx as usize, qy as usize) {
                            floor = floor.min(f64::from(e.distance));
                        }
                    }
                }
            }
            let mut acc = [0.0f64; 3];
            let mut total = 0.0f64;
            for qy in ya..=yb {
                for qx in xa..=xb {
                    let Some(e) = field.get(qx as usize, qy as usize) else {
                        continue;
                    };
                    let wt = if weighted {
                        libm::exp(-(f64::from(e.distance) - floor) / (2.0 * sigma * sigma))
                    } else {
                        1.0
                    };
                    let sx = (x as i64 + i64::from(e.dx)) as usize;
                    let sy = (y as i64 + i64::from(e.dy)) as usize;
                    let src = stack.pixel(sx, sy);
                    for c in 0..3 {
                        acc[c] += wt * f64::from(e.gain_bias.apply(c, src[c]));
                    }
                    total += wt;
                }
            }
            if !(total > 0.0) {
                return Err(Error::Internal(alloc::format!("hole pixel ({x}, {y}) received no vote weight")));
            }
            out.push([
                (acc[0] / total).clamp(0.0, 1.0) as f32,
                (acc[1] / total).clamp(0.0, 1.0) as f32,
                (acc[2] / total).clamp(0.0, 1.0) as f32,
            ]);
        }
        Ok(out)
    });
    let mut result = stack.clone();
    for (row, values) in rows.into_iter().enumerate() {
        let values = values?;
        let y = y0 + row;
        for (i, v) in values.iter().enumerate() {
            let x = x0 + i;
            if mask.is_hole(x, y) {
                result.pixel_mut(x, y)[..3].copy_from_slice(v);
            }
        }
    }
    Ok(result)
}

/// Result of one pyramid level.
#[derive(Clone, Debug)]
pub struct LevelOutput {
    /// RGB image of the level.
    pub image: PlaneImage,
    pub field: NNField,
    /// Total field distance after each search phase.
    pub search_totals: Vec<f64>,
}

/// Per-level summary kept in synthesis reports.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelReport {
    pub level: usize,
    pub width: usize,
    pub height: usize,
    pub em_iterations: usize,
    pub search_totals: Vec<f64>,
}

/// Wexler EM at one level: alternate PatchMatch search and voting.
///
/// `image` is the level's RGB with the hole already initialized; `guides`
/// must already be at the level's size.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_level<E: Executor>(
    image: &PlaneImage,
    mask: &HoleMask,
    guides: &GuideSet,
    combo: GuideCombo,
    params: &SynthesisParams,
    em_iterations: usize,
    seed: u64,
    prior: Option<Prior<'_>>,
    exec: &E,
) -> Result<LevelOutput> {
    params.validate()?;
    image.check_channels(3)?;
    let (mut stack, weights) = assemble(image, guides, combo)?;
    let weights = weights.with_mismatch_cost(params.mismatch_cost);
    let patch = PatchParams {
        rng_seed: seed,
        ..params.patch.clone()
    };
    if mask.is_empty() {
        return Ok(LevelOutput {
            image: image.clone(),
            field: init_nnf(&stack, mask, &weights, &patch, None)?,
            search_totals: Vec::new(),
        });
    }
    let mut field = init_nnf(&stack, mask, &weights, &patch, prior)?;
    let mut search_totals = Vec::with_capacity(em_iterations);
    for em in 0..em_iterations {
        if em > 0 {
            refresh_distances(&mut field, &stack, &weights, &patch)?;
        }
        for _ in 0..params.search_iterations {
            pm_iterate(&mut field, &stack, mask, &weights, &patch, exec)?;
        }
        search_totals.push(field.total_distance());
        stack = vote(&field, &stack, mask, patch.patch_size, params.vote_mode, exec)?;
    }
    refresh_distances(&mut field, &stack, &weights, &patch)?;
    Ok(LevelOutput {
        image: stack.select_channels(0, 3),
        field,
        search_totals,
    })
}

/// Full-resolution output of one synthesis run.
#[derive(Clone, Debug)]
pub struct Synthesis {
    pub image: PlaneImage,
    pub field: NNField,
    pub levels: Vec<LevelReport>,
}

fn level_seed(seed: u64, combo: GuideCombo, stage: u64, level: usize) -> u64 {
    rng::derive(seed, &[combo.index() as u64, stage, level as u64])
}

/// Runs levels `start, start-1, ..., 0` of `pyramid`. `cur` is the RGB image
/// of level `start`, hole initialized.
#[allow(clippy::too_many_arguments)]
fn descend<E: Executor>(
    pyramid: &ImagePyramid,
    start: usize,
    mut cur: PlaneImage,
    mut prior: Option<(NNField, f64, f64)>,
    schedule: &[usize],
    guides: &GuideSet,
    combo: GuideCombo,
    params: &SynthesisParams,
    stage: u64,
    exec: &E,
) -> Result<(PlaneImage, NNField, Vec<LevelReport>)> {
    let mut reports = Vec::new();
    let mut field = None;
    for l in (0..=start).rev() {
        let (img, mask) = pyramid.level(l);
        let (w, h) = img.dims();
        if l != start {
            cur = composite(img, &upsample2x_clamped(&cur, w, h), mask)?;
        }
        let level_guides = guides.resized(w, h);
        let p = prior.as_ref().map(|(f, sx, sy)| Prior {
            field: f,
            scale_x: *sx,
            scale_y: *sy,
        });
        let out = synthesize_level(
            &cur,
            mask,
            &level_guides,
            combo,
            params,
            schedule[l],
            level_seed(params.patch.rng_seed, combo, stage, l),
            p,
            exec,
        )?;
        reports.push(LevelReport {
            level: l,
            width: w,
            height: h,
            em_iterations: schedule[l],
            search_totals: out.search_totals,
        });
        cur = out.image;
        prior = Some((out.field.clone(), 2.0, 2.0));
        field = Some(out.field);
    }
    Ok((cur, field.expect("at least one level"), reports))
}

/// Coarsest level whose mask still leaves a valid source patch.
fn start_level(pyramid: &ImagePyramid, patch_size: usize) -> Result<usize> {
    (0..pyramid.len())
        .rev()
        .find(|&l| {
            let mask = pyramid.level(l).1;
            crate::patchmatch::SourceIndex::new(mask, patch_size / 2).count() > 0
        })
        .ok_or(Error::NoValidSource)
}

/// Full coarse-to-fine synthesis of one guide combination.
#[allow(clippy::too_many_arguments)]
pub fn synthesize<E: Executor>(
    image: &PlaneImage,
    mask: &HoleMask,
    coarse: &CoarseFill,
    guides: &GuideSet,
    combo: GuideCombo,
    params: &SynthesisParams,
    exec: &E,
) -> Result<Synthesis> {
    params.validate()?;
    image.check_channels(3)?;
    guides.require(combo)?;
    coarse.check_aspect(image.width(), image.height())?;
    if !mask.has_source() {
        return Err(Error::NoValidSource);
    }
    let pyramid = build_pyramid(image, mask, params.min_pyramid_edge)?;
    if mask.is_empty() {
        let (stack, weights) = assemble(image, &guides.resized(image.width(), image.height()), combo)?;
        let weights = weights.with_mismatch_cost(params.mismatch_cost);
        return Ok(Synthesis {
            image: image.clone(),
            field: init_nnf(&stack, mask, &weights, &params.patch, None)?,
            levels: Vec::new(),
        });
    }
    let start = start_level(&pyramid, params.patch.patch_size)?;
    let (img, m) = pyramid.level(start);
    let cur = initialize_level(img, m, coarse)?;
    let schedule = params.em_schedule(pyramid.len());
    let (out, field, levels) = descend(&pyramid, start, cur, None, &schedule, guides, combo, params, 0, exec)?;
    Ok(Synthesis {
        image: composite(image, &out, mask)?,
        field,
        levels,
    })
}

#[derive(Clone, Debug)]
pub struct Candidate {
    pub combo: GuideCombo,
    pub image: PlaneImage,
    pub levels: Vec<LevelReport>,
    /// Wall-clock synthesis time, if the executor has a clock.
    pub seconds: Option<f64>,
}

/// One inpainting per guide combination, in combo index order.
#[derive(Clone, Debug)]
pub struct CandidateSet {
    pub entries: Vec<Candidate>,
}

impl CandidateSet {
    pub fn images(&self) -> Vec<&PlaneImage> {
        self.entries.iter().map(|c| &c.image).collect()
    }
}

fn candidates_with_fields<E: Executor>(
    image: &PlaneImage,
    mask: &HoleMask,
    coarse: &CoarseFill,
    guides: &GuideSet,
    params: &SynthesisParams,
    keep_fields: bool,
    exec: &E,
) -> Result<(CandidateSet, Vec<Option<NNField>>)> {
    guides.require(GuideCombo::ALL_GUIDES)?;
    let combos: Vec<GuideCombo> = GuideCombo::all().collect();
    let runs = exec.map(combos.len(), |i| {
        let start = exec.now();
        synthesize(image, mask, coarse, guides, combos[i], params, &Serial).map(|s| (s, elapsed(exec, start)))
    });
    let mut entries = Vec::with_capacity(combos.len());
    let mut fields = Vec::with_capacity(combos.len());
    for (combo, run) in combos.into_iter().zip(runs) {
        let (s, seconds) = run?;
        entries.push(Candidate {
            combo,
            image: s.image,
            levels: s.levels,
            seconds,
        });
        fields.push(keep_fields.then_some(s.field));
    }
    Ok((CandidateSet { entries }, fields))
}

/// Synthesizes all eight guide combinations. Each candidate runs serially in
/// reference mode; candidates are distributed over `exec`.
pub fn generate_candidates<E: Executor>(
    image: &PlaneImage,
    mask: &HoleMask,
    coarse: &CoarseFill,
    guides: &GuideSet,
    params: &SynthesisParams,
    exec: &E,
) -> Result<CandidateSet> {
    Ok(candidates_with_fields(image, mask, coarse, guides, params, false, exec)?.0)
}

/// Wall-clock seconds per pipeline stage, if the executor has a clock.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StageTimings {
    pub candidates: Option<f64>,
    pub curation: Option<f64>,
    pub refinement: Option<f64>,
}

/// Output of the full pipeline in either mode.
#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub image: PlaneImage,
    pub combo: GuideCombo,
    pub selection: Selection,
    /// Candidates that went through curation (at proxy size in optimized mode).
    pub candidates: CandidateSet,
    /// Levels rerun at full resolution after curation; empty in naive mode.
    pub refinement: Vec<LevelReport>,
    /// Size at which candidates were generated.
    pub candidate_dims: (usize, usize),
    /// Nearest-neighbour field of the winner at full resolution.
    pub field: NNField,
    pub timings: StageTimings,
}

/// Eight candidates at native resolution, then curation.
#[allow(clippy::too_many_arguments)]
pub fn naive_pipeline<E: Executor, S: Scorer>(
    image: &PlaneImage,
    mask: &HoleMask,
    coarse: &CoarseFill,
    guides: &GuideSet,
    params: &SynthesisParams,
    scorer: &S,
    crop: &AutoCropParams,
    exec: &E,
) -> Result<PipelineOutput> {
    let t0 = exec.now();
    let (candidates, mut fields) = candidates_with_fields(image, mask, coarse, guides, params, true, exec)?;
    let t1 = exec.now();
    let selection = select(&candidates.images(), mask, scorer, crop, exec)?;
    let timings = StageTimings {
        candidates: elapsed(exec, t0),
        curation: elapsed(exec, t1),
        refinement: None,
    };
    let winner = &candidates.entries[selection.winner];
    Ok(PipelineOutput {
        image: winner.image.clone(),
        combo: winner.combo,
        field: fields.swap_remove(selection.winner).expect("fields kept"),
        selection,
        candidate_dims: image.dims(),
        candidates,
        refinement: Vec::new(),
        timings,
    })
}

/// Dimensions of `(width, height)` scaled to `long` on the long edge.
pub fn proxy_dims(width: usize, height: usize, long: usize) -> (usize, usize) {
    if width >= height {
        (long, (libm::round(height as f64 * long as f64 / width as f64) as usize).max(1))
    } else {
        ((libm::round(width as f64 * long as f64 / height as f64) as usize).max(1), long)
    }
}

/// Candidates and curation at the proxy size, then one synthesis of the
/// winning combination over the native pyramid levels larger than the proxy,
/// seeded with the winner's image and field. Falls back to the naive
/// pipeline when the image is not larger than the proxy.
#[allow(clippy::too_many_arguments)]
pub fn optimized_pipeline<E: Executor, S: Scorer>(
    image: &PlaneImage,
    mask: &HoleMask,
    coarse: &CoarseFill,
    guides: &GuideSet,
    params: &SynthesisParams,
    scorer: &S,
    crop: &AutoCropParams,
    exec: &E,
) -> Result<PipelineOutput> {
    params.validate()?;
    if image.long_edge() <= params.proxy_long_edge {
        return naive_pipeline(image, mask, coarse, guides, params, scorer, crop, exec);
    }
    coarse.check_aspect(image.width(), image.height())?;
    let (pw, ph) = proxy_dims(image.width(), image.height(), params.proxy_long_edge);
    let small = resize_area(image, pw, ph);
    let small_mask = resize_mask_any(mask, pw, ph);
    let t0 = exec.now();
    let (candidates, fields) = candidates_with_fields(&small, &small_mask, coarse, guides, params, true, exec)?;
    let t1 = exec.now();
    let selection = select(&candidates.images(), &small_mask, scorer, crop, exec)?;
    let t2 = exec.now();
    let winner = &candidates.entries[selection.winner];
    let winner_field = fields[selection.winner].as_ref().expect("fields kept");

    let pyramid = build_pyramid(image, mask, params.min_pyramid_edge)?;
    let top = (0..pyramid.len())
        .rev()
        .find(|&l| pyramid.level(l).0.long_edge() > params.proxy_long_edge)
        .expect("level 0 exceeds the proxy");
    let (img, m) = pyramid.level(top);
    let (w, h) = img.dims();
    let cur = composite(img, &resize_bilinear(&winner.image, w, h), m)?;
    let prior = Some((winner_field.clone(), w as f64 / pw as f64, h as f64 / ph as f64));
    let schedule = alloc::vec![params.fine_em_iterations; pyramid.len()];
    let (out, field, refinement) = descend(
        &pyramid,
        top,
        cur,
        prior,
        &schedule,
        guides,
        winner.combo,
        params,
        1,
        exec,
    )?;
    Ok(PipelineOutput {
        image: composite(image, &out, mask)?,
        combo: winner.combo,
        selection,
        candidates,
        refinement,
        candidate_dims: (pw, ph),
        field,
        timings: StageTimings {
            candidates: elapsed(exec, t0),
            curation: t2.zip(t1).map(|(b, a)| b - a),
            refinement: elapsed(exec, t2),
        },
    })
}
