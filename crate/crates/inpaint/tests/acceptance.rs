//! Acceptance suite. Prints one `PASS`/`FAIL` line per criterion and exits
//! nonzero when a criterion fails for a reason other than the host having
//! fewer cores than the performance bound assumes.

use std::path::Path;
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use inpaint::exec::Pool;
use inpaint::io::{write_mask, write_pfm, write_png};
use inpaint_core::curation::{
    argmax_lowest, auto_crop, build_matrix, preference_vector, select, AutoCropParams, HeuristicScorer, PairwiseVerdict,
    Scorer,
};
use inpaint_core::exec::Serial;
use inpaint_core::guides::{
    compute_weights, ingest_depth, ingest_segmentation, structure_guide, GuideCombo, GuideKind, GuideSet,
};
use inpaint_core::holes::{freeform_mask, HoleKind, HoleSpec};
use inpaint_core::image::composite;
use inpaint_core::patchmatch::{patchmatch, GainBiasLimits, PatchParams};
use inpaint_core::resample::{resize_area, resize_bilinear};
use inpaint_core::synthesis::{naive_pipeline, optimized_pipeline, synthesize, CoarseFill, SynthesisParams};
use inpaint_core::{HoleMask, PlaneImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    /// A failure caused only by missing hardware, reported but not fatal.
    hardware: bool,
    detail: String,
}

impl Outcome {
    fn check(pass: bool, detail: String) -> Self {
        Self {
            pass,
            hardware: false,
            detail,
        }
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// PSNR over the hole pixels only.
fn hole_psnr(truth: &PlaneImage, out: &PlaneImage, mask: &HoleMask) -> f64 {
    let (mut sse, mut n) = (0.0f64, 0usize);
    for y in 0..truth.height() {
        for x in 0..truth.width() {
            if mask.is_hole(x, y) {
                for c in 0..3 {
                    let d = f64::from(truth.get(x, y, c)) - f64::from(out.get(x, y, c));
                    sse += d * d;
                }
                n += 3;
            }
        }
    }
    if sse == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * (sse / n as f64).log10()
    }
}

fn outside_identical(input: &PlaneImage, out: &PlaneImage, mask: &HoleMask) -> bool {
    (0..input.height()).all(|y| (0..input.width()).all(|x| mask.is_hole(x, y) || input.pixel(x, y) == out.pixel(x, y)))
}

/// Hole filled with the mean known colour, resized to a 512 long edge.
fn mean_fill(img: &PlaneImage, mask: &HoleMask) -> CoarseFill {
    let (mut sum, mut n) = ([0.0f64; 3], 0.0);
    for y in 0..img.height() {
        for x in 0..img.width() {
            if !mask.is_hole(x, y) {
                for (c, s) in sum.iter_mut().enumerate() {
                    *s += f64::from(img.get(x, y, c));
                }
                n += 1.0;
            }
        }
    }
    let flat = PlaneImage::from_fn(img.width(), img.height(), 3, |_, _, c| (sum[c] / n) as f32);
    let filled = composite(img, &flat, mask).unwrap();
    let (w, h) = img.dims();
    let s = 512.0 / w.max(h) as f64;
    let (cw, ch) = ((w as f64 * s).round() as usize, (h as f64 * s).round() as usize);
    let resized = if s < 1.0 { resize_area(&filled, cw, ch) } else { resize_bilinear(&filled, cw, ch) };
    CoarseFill::new(resized, "mean")
}

/// Smooth textured scene with structure, depth and segmentation guides.
fn scene(w: usize, h: usize, seed: u64) -> (PlaneImage, GuideSet, PlaneImage, PlaneImage) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let img = PlaneImage::from_fn(w, h, 3, |x, y, c| {
        let (fx, fy) = (x as f32 / w as f32, y as f32 / h as f32);
        let v = 0.4 + 0.2 * (fx * 40.0 + c as f32).sin() * (fy * 30.0).cos() + 0.2 * fy;
        (v + rng.gen_range(-0.05..0.05)).clamp(0.0, 1.0)
    });
    let depth = PlaneImage::from_fn(w, h, 1, |_, y, _| 1.0 + y as f32 / h as f32);
    let labels = PlaneImage::from_fn(w, h, 1, |x, _, _| if x < w / 2 { 1.0 } else { 2.0 });
    let mut g = GuideSet::default();
    g.insert(structure_guide(&img).unwrap());
    g.insert(ingest_depth(&depth).unwrap());
    g.insert(ingest_segmentation(&labels).unwrap());
    (img, g, depth, labels)
}

/// Weights for every combination against values derived by hand.
fn c1_weights() -> Outcome {
    // (structure, depth, segmentation) -> weights as (numerator, denominator).
    let table: [((bool, bool, bool), &[(u32, u32)]); 8] = [
        ((false, false, false), &[(1, 3), (1, 3), (1, 3)]),
        ((true, false, false), &[(1, 10), (1, 10), (1, 10), (7, 10)]),
        ((false, true, false), &[(1, 5), (1, 5), (1, 5), (2, 5)]),
        ((false, false, true), &[(1, 5), (1, 5), (1, 5), (2, 5)]),
        ((true, true, false), &[(1, 10), (1, 10), (1, 10), (7, 20), (7, 20)]),
        ((true, false, true), &[(1, 10), (1, 10), (1, 10), (7, 20), (7, 20)]),
        ((false, true, true), &[(1, 5), (1, 5), (1, 5), (1, 5), (1, 5)]),
        ((true, true, true), &[(1, 10), (1, 10), (1, 10), (7, 30), (7, 30), (7, 30)]),
    ];
    let mut bad = Vec::new();
    for ((s, d, g), expect) in table {
        let kinds: Vec<GuideKind> = [(s, GuideKind::Structure), (d, GuideKind::Depth), (g, GuideKind::Segmentation)]
            .iter()
            .filter(|(on, _)| *on)
            .map(|(_, k)| *k)
            .collect();
        let combo = GuideCombo::from_kinds(&kinds);
        let w = compute_weights(combo);
        let exact = w.units.len() == expect.len()
            && w.units
                .iter()
                .zip(expect)
                .all(|(&u, &(n, d))| u64::from(u) * u64::from(d) == u64::from(n) * u64::from(w.denominator));
        let floats = w.per_channel.iter().zip(expect).all(|(&p, &(n, d))| p == f64::from(n) / f64::from(d));
        let (num, den) = w.exact_sum();
        let sums_to_one = kinds.is_empty() || num == den;
        let wc = if s { 0.3 } else if kinds.is_empty() { 1.0 } else { 0.6 };
        if !(exact && floats && sums_to_one && w.rgb_weight == wc) {
            bad.push(combo.letters());
        }
    }
    Outcome::check(bad.is_empty(), format!("8 combinations, mismatches: {bad:?}"))
}

/// Squared RGB distance at weight 1/3 over the border-clipped target patch.
fn plain_distance(img: &PlaneImage, t: (usize, usize), s: (usize, usize), r: i64) -> f64 {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let mut d = 0.0;
    for dy in -r..=r {
        let ty = t.1 as i64 + dy;
        if ty < 0 || ty >= h {
            continue;
        }
        for dx in -r..=r {
            let tx = t.0 as i64 + dx;
            if tx < 0 || tx >= w {
                continue;
            }
            let a = img.pixel(tx as usize, ty as usize);
            let b = img.pixel((s.0 as i64 + dx) as usize, (s.1 as i64 + dy) as usize);
            for c in 0..3 {
                let e = f64::from(a[c]) - f64::from(b[c]);
                d += e * e;
            }
        }
    }
    d / 3.0
}

/// PatchMatch against exhaustive search on random textures.
fn c2_patchmatch() -> Outcome {
    let (n, size, hole, r) = (100u64, 64usize, 16usize, 3usize);
    let (mut within, mut violations) = (0, 0);
    let mut worst: f64 = 0.0;
    for seed in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let img = PlaneImage::from_fn(size, size, 3, |_, _, _| rng.gen());
        let (hx, hy) = (rng.gen_range(4..size - hole - 4), rng.gen_range(4..size - hole - 4));
        let mask = HoleMask::with_rect(size, size, hx, hy, hole, hole);
        let params = PatchParams {
            rng_seed: seed,
            pm_iterations: 5,
            ..PatchParams::default()
        };
        let field = patchmatch(&img, &mask, &compute_weights(GuideCombo::NONE), &params, None, &Serial).unwrap();
        // Valid sources: the whole patch inside the image and clear of the hole.
        let valid = |x: usize, y: usize| {
            x >= r
                && y >= r
                && x + r < size
                && y + r < size
                && (y - r..=y + r).all(|yy| (x - r..=x + r).all(|xx| !mask.is_hole(xx, yy)))
        };
        let sources: Vec<(usize, usize)> =
            (0..size).flat_map(|y| (0..size).map(move |x| (x, y))).filter(|&(x, y)| valid(x, y)).collect();
        let (mut found, mut best, mut count) = (0.0, 0.0, 0usize);
        for (x, y, e) in field.iter() {
            let (sx, sy) = (x as i64 + i64::from(e.dx), y as i64 + i64::from(e.dy));
            if sx < 0 || sy < 0 || !valid(sx as usize, sy as usize) {
                violations += 1;
            }
            found += f64::from(e.distance);
            best += sources
                .iter()
                .map(|&s| plain_distance(&img, (x, y), s, r as i64))
                .fold(f64::INFINITY, f64::min);
            count += 1;
        }
        let ratio = (found / count as f64) / (best / count as f64);
        worst = worst.max(ratio);
        if ratio <= 1.1 {
            within += 1;
        }
    }
    Outcome::check(
        within >= 95 && violations == 0,
        format!("{within}/{n} instances within 1.1x of exhaustive (worst ratio {worst:.3}), {violations} violations"),
    )
}

/// Random verdicts keyed on the pair; candidate identity is encoded in the
/// pixel value.
struct RandomScorer {
    build: u64,
    calls: AtomicUsize,
}

fn identity(img: &PlaneImage) -> u64 {
    (img.get(0, 0, 0) * 16.0).round() as u64
}

fn random_verdict(build: u64, l: u64, r: u64) -> PairwiseVerdict {
    let mut rng = ChaCha8Rng::seed_from_u64(build * 1024 + l * 32 + r);
    let (a, b) = (rng.gen::<f64>(), rng.gen::<f64>());
    let c = if rng.gen_bool(0.1) { a } else { rng.gen::<f64>() };
    let s = a + b + c;
    PairwiseVerdict {
        o1: a / s,
        o2: b / s,
        o3: c / s,
    }
}

impl Scorer for RandomScorer {
    fn name(&self) -> String {
        "random".into()
    }

    fn judge(&self, left: &PlaneImage, right: &PlaneImage, _: &HoleMask) -> inpaint_core::Result<PairwiseVerdict> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        Ok(random_verdict(self.build, identity(left), identity(right)))
    }
}

/// Matrix antisymmetry, aggregation and the two-candidate case.
fn c3_matrix() -> Outcome {
    let crops: Vec<PlaneImage> = (0..8).map(|i| PlaneImage::filled(4, 4, 3, i as f32 / 16.0)).collect();
    let refs: Vec<&PlaneImage> = crops.iter().collect();
    let mask = HoleMask::with_rect(4, 4, 1, 1, 2, 2);
    let (mut asym, mut sums, mut calls) = (0, 0, 0);
    for build in 0..1000u64 {
        let scorer = RandomScorer {
            build,
            calls: AtomicUsize::new(0),
        };
        let m = build_matrix(&refs, &mask, &scorer, &Serial).unwrap();
        if (0..8).any(|i| (0..8).any(|j| m.get(i, j) + m.get(j, i) != 0.0)) {
            asym += 1;
        }
        if preference_vector(&m).iter().sum::<f64>().abs() > 1e-12 {
            sums += 1;
        }
        if scorer.calls.load(Ordering::Relaxed) != 28 {
            calls += 1;
        }
    }
    // Two candidates: the selection is the single verdict.
    let pair: Vec<PlaneImage> = (0..2).map(|i| PlaneImage::filled(16, 16, 3, i as f32 / 16.0)).collect();
    let pair_refs: Vec<&PlaneImage> = pair.iter().collect();
    let pmask = HoleMask::with_rect(16, 16, 6, 6, 4, 4);
    let params = AutoCropParams {
        base: 8,
        scorer_size: 8,
        ..AutoCropParams::default()
    };
    let (mut decided, mut wrong) = (0, 0);
    for build in 0..1000u64 {
        let scorer = RandomScorer {
            build,
            calls: AtomicUsize::new(0),
        };
        let v = random_verdict(build, 0, 1);
        if v.o1 == v.o3 {
            continue;
        }
        decided += 1;
        let s = select(&pair_refs, &pmask, &scorer, &params, &Serial).unwrap();
        if s.winner != usize::from(v.o3 > v.o1) {
            wrong += 1;
        }
    }
    Outcome::check(
        asym == 0 && sums == 0 && calls == 0 && wrong == 0,
        format!(
            "1000 builds: {asym} asymmetric, {sums} with |sum p| > 1e-12, {calls} with call count != 28; \
             n=2: {wrong}/{decided} decided pairs disagree with the verdict"
        ),
    )
}

/// `ceil(s * 1.05^k)`, treating values within 1e-6 of an integer as exact.
fn grown_side(s: usize, k: i32) -> usize {
    let f = s as f64 * 1.05f64.powi(k);
    if (f - f.round()).abs() < 1e-6 {
        f.round() as usize
    } else {
        f.ceil() as usize
    }
}

/// Start of a window of `side` centred on `[lo, hi]`, moved inside `[0, len)`
/// or, when it is too large, moved to cover the whole axis.
fn oracle_place(lo: usize, hi: usize, side: usize, len: usize) -> i64 {
    let centre2 = (lo + hi + 1) as i64;
    let mut start = (centre2 - side as i64).div_euclid(2);
    if side <= len {
        start = start.clamp(0, (len - side) as i64);
    } else {
        if start > 0 {
            start = 0;
        }
        if start + (side as i64) < len as i64 {
            start = len as i64 - side as i64;
        }
    }
    start
}

fn oracle_crop(holes: &[(usize, usize)], w: usize, h: usize, base: usize) -> (i64, i64, usize) {
    let x0 = holes.iter().map(|p| p.0).min().unwrap();
    let x1 = holes.iter().map(|p| p.0).max().unwrap();
    let y0 = holes.iter().map(|p| p.1).min().unwrap();
    let y1 = holes.iter().map(|p| p.1).max().unwrap();
    let s0 = base.max(x1 - x0 + 1).max(y1 - y0 + 1);
    let mut k = 0;
    loop {
        let side = grown_side(s0, k);
        let (cx, cy) = (oracle_place(x0, x1, side, w), oracle_place(y0, y1, side, h));
        if side >= w || side >= h {
            return (cx, cy, side);
        }
        let inside = holes
            .iter()
            .filter(|&&(x, y)| {
                let (x, y) = (x as i64, y as i64);
                x >= cx && x < cx + side as i64 && y >= cy && y < cy + side as i64
            })
            .count();
        if (inside as f64) < 0.25 * (side * side) as f64 {
            return (cx, cy, side);
        }
        k += 1;
    }
}

/// Auto-crop against a direct loop simulation.
fn c4_auto_crop() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut mismatched, mut post) = (0, 0);
    let mut cases: Vec<(usize, usize, usize, HoleMask)> = vec![
        (4000, 3000, 512, HoleMask::with_rect(4000, 3000, 1800, 1400, 200, 200)),
        (4000, 3000, 512, HoleMask::with_rect(4000, 3000, 1700, 1200, 600, 600)),
    ];
    while cases.len() < 1000 {
        let (w, h) = (rng.gen_range(40..400), rng.gen_range(40..400));
        let base = [16, 32, 64, 128, 512][rng.gen_range(0..5)];
        let mut mask = HoleMask::new(w, h);
        for _ in 0..rng.gen_range(1..5) {
            let (rw, rh) = (rng.gen_range(1..w / 2), rng.gen_range(1..h / 2));
            let (x, y) = (rng.gen_range(0..w - rw), rng.gen_range(0..h - rh));
            for yy in y..y + rh {
                for xx in x..x + rw {
                    mask.set(xx, yy, true);
                }
            }
        }
        for _ in 0..rng.gen_range(0..20) {
            mask.set(rng.gen_range(0..w), rng.gen_range(0..h), true);
        }
        cases.push((w, h, base, mask));
    }
    for (w, h, base, mask) in &cases {
        let params = AutoCropParams {
            base: *base,
            ..AutoCropParams::default()
        };
        let got = auto_crop(mask, &params).unwrap();
        let holes: Vec<(usize, usize)> =
            (0..*h).flat_map(|y| (0..*w).map(move |x| (x, y))).filter(|&(x, y)| mask.is_hole(x, y)).collect();
        let (x, y, side) = oracle_crop(&holes, *w, *h, *base);
        if (got.x, got.y, got.side) != (x, y, side) {
            mismatched += 1;
        }
        let inside = mask.crop(&got).hole_count();
        let ok = got.side >= *w || got.side >= *h || (inside as f64) < 0.25 * (got.side * got.side) as f64;
        if !ok {
            post += 1;
        }
    }
    let first = auto_crop(&cases[0].3, &AutoCropParams::default()).unwrap();
    let centred = (first.x, first.y, first.side) == (1644, 1244, 512);
    Outcome::check(
        mismatched == 0 && post == 0 && centred,
        format!("{} masks: {mismatched} differ from the loop simulation, {post} violate the postcondition", cases.len()),
    )
}

/// Periodic texture with a square hole.
fn c5_periodic() -> Outcome {
    let (mut scores, mut untouched) = (Vec::new(), 0);
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tile = PlaneImage::from_fn(8, 8, 3, |_, _, _| rng.gen());
        let truth = PlaneImage::from_fn(96, 96, 3, |x, y, c| tile.get(x % 8, y % 8, c));
        let (hx, hy) = (rng.gen_range(8..64), rng.gen_range(8..64));
        let mask = HoleMask::with_rect(96, 96, hx, hy, 24, 24);
        let input = composite(&truth, &PlaneImage::filled(96, 96, 3, 0.0), &mask).unwrap();
        let mut params = SynthesisParams::default();
        params.patch.rng_seed = seed;
        let out =
            synthesize(&input, &mask, &mean_fill(&input, &mask), &GuideSet::default(), GuideCombo::NONE, &params, &Serial)
                .unwrap();
        scores.push(hole_psnr(&truth, &out.image, &mask));
        untouched += usize::from(outside_identical(&input, &out.image, &mask));
    }
    let m = median(scores);
    Outcome::check(
        m >= 30.0 && untouched == 20,
        format!("median hole PSNR {m:.2} dB over 20 seeds, outside pixels identical in {untouched}/20"),
    )
}

/// Linear colour ramp with a corner hole, gain/bias on against off.
fn c6_gain_bias() -> Outcome {
    let limits = GainBiasLimits::default();
    let (mut gains, mut outside) = (Vec::new(), 0);
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = PlaneImage::from_fn(96, 96, 3, |_, _, _| rng.gen_range(-0.01f32..0.01));
        let truth = PlaneImage::from_fn(96, 96, 3, |x, y, c| {
            [0.25, 0.45, 0.7][c] + 0.25 * (x + y) as f32 / 190.0 + noise.get(x, y, c)
        });
        let s = rng.gen_range(28..36);
        let mask = HoleMask::with_rect(96, 96, 96 - s, 96 - s, s, s);
        let input = composite(&truth, &PlaneImage::filled(96, 96, 3, 0.0), &mask).unwrap();
        let coarse = CoarseFill::new(resize_bilinear(&resize_area(&truth, 12, 12), 512, 512), "lowpass");
        let mut psnr = [0.0; 2];
        for (i, on) in [true, false].into_iter().enumerate() {
            let mut params = SynthesisParams::default();
            params.patch.rng_seed = seed;
            params.patch.gain_bias = on.then_some(limits);
            let out = synthesize(&input, &mask, &coarse, &GuideSet::default(), GuideCombo::NONE, &params, &Serial).unwrap();
            psnr[i] = hole_psnr(&truth, &out.image, &mask);
            if on {
                outside += out.field.iter().filter(|(_, _, e)| !limits.contains(&e.gain_bias)).count();
            }
        }
        gains.push(psnr[0] - psnr[1]);
    }
    let m = median(gains);
    Outcome::check(
        m >= 2.0 && outside == 0,
        format!("median gain {m:.2} dB over 20 seeds, {outside} fitted gain/bias values outside the clamps"),
    )
}

fn write_pipeline_inputs(dir: &Path, w: usize, h: usize) {
    let (img, _, depth, labels) = scene(w, h, 7);
    let mask = freeform_mask(w, h, &HoleSpec::scaled(HoleKind::FreeForm, w, h, 7)).unwrap();
    write_png(&dir.join("image.png"), &img).unwrap();
    write_mask(&dir.join("mask.png"), &mask).unwrap();
    write_png(&dir.join("coarse.png"), &mean_fill(&img, &mask).image).unwrap();
    write_pfm(&dir.join("depth.pfm"), &depth).unwrap();
    let seg = PlaneImage::from_fn(w, h, 3, |x, y, c| if c == 0 { labels.get(x, y, 0) / 255.0 } else { 0.0 });
    write_png(&dir.join("seg.png"), &seg).unwrap();
}

/// Byte-identical CLI output across runs and thread counts.
fn c7_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    write_pipeline_inputs(dir.path(), 1152, 864);
    let p = |n: &str| dir.path().join(n).display().to_string();
    let mut outputs = Vec::new();
    for (run, threads) in [(0, 1), (1, 8), (2, 8)] {
        let out = p(&format!("out{run}"));
        let o = Command::new(env!("CARGO_BIN_EXE_inpaint"))
            .env_clear()
            .args(["pipeline", "--image", &p("image.png"), "--mask", &p("mask.png"), "--coarse", &p("coarse.png")])
            .args(["--depth", &p("depth.pfm"), "--segmentation", &p("seg.png"), "--structure", "auto"])
            .args(["--seed", "42", "--scorer", "heuristic", "--threads", &threads.to_string(), "--out", &out])
            .output()
            .unwrap();
        if !o.status.success() {
            return Outcome::check(false, format!("run {run} failed: {}", String::from_utf8_lossy(&o.stderr)));
        }
        let read = |n: &str| std::fs::read(Path::new(&out).join(n)).unwrap();
        outputs.push((read("winner.png"), read("manifest.json")));
    }
    let same = outputs.windows(2).all(|w| w[0] == w[1]);
    let verdict = if same { "byte-identical" } else { "differ" };
    Outcome::check(
        same,
        format!("1152x864, 3 runs (--threads 1, 8, 8): winner.png and manifest.json {verdict}"),
    )
}

/// Naive and optimized pipelines on a 12 MP image.
fn c8_performance() -> Outcome {
    let (w, h) = (4000, 3000);
    let (img, guides, _, _) = scene(w, h, 5);
    let mask = freeform_mask(w, h, &HoleSpec::scaled(HoleKind::FreeForm, w, h, 1)).unwrap();
    let coarse = mean_fill(&img, &mask);
    let params = SynthesisParams::default();
    let pool = Pool::new(0).unwrap();
    let cores = pool.threads();
    let scorer = HeuristicScorer::default();
    let crop = AutoCropParams::default();
    let t = Instant::now();
    optimized_pipeline(&img, &mask, &coarse, &guides, &params, &scorer, &crop, &pool).unwrap();
    let optimized = t.elapsed().as_secs_f64();
    let t = Instant::now();
    naive_pipeline(&img, &mask, &coarse, &guides, &params, &scorer, &crop, &pool).unwrap();
    let naive = t.elapsed().as_secs_f64();
    let speedup = naive / optimized;
    let fast_enough = naive <= 120.0;
    let detail = format!(
        "12 MP on {cores} logical core(s): naive {naive:.1} s (bound 120 s), optimized {optimized:.1} s, speedup {speedup:.2}x (bound 4x)"
    );
    Outcome {
        pass: fast_enough && speedup >= 4.0,
        hardware: !fast_enough && speedup >= 4.0 && cores < 8,
        detail,
    }
}

/// Blurred and wrong-texture fills against the true continuation.
fn c9_heuristic() -> Outcome {
    let scorer = HeuristicScorer::default();
    let mut first = 0;
    for seed in 0..50u64 {
        let texture = |seed: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (fx, fy, phase) = (rng.gen_range(0.3..0.9f32), rng.gen_range(0.3..0.9f32), rng.gen_range(0.0..6.0f32));
            let base: [f32; 3] = [rng.gen_range(0.2..0.8), rng.gen_range(0.2..0.8), rng.gen_range(0.2..0.8)];
            PlaneImage::from_fn(96, 96, 3, move |x, y, c| {
                let v = base[c] + 0.2 * (x as f32 * fx + phase).sin() * (y as f32 * fy).cos();
                v + 0.03 * (((x * 7 + y * 13 + c * 5) % 11) as f32 / 11.0 - 0.5)
            })
        };
        let truth = texture(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        let (hx, hy) = (rng.gen_range(16..56), rng.gen_range(16..56));
        let mask = HoleMask::with_rect(96, 96, hx, hy, 24, 24);
        let blurred = composite(&truth, &resize_bilinear(&resize_area(&truth, 12, 12), 96, 96), &mask).unwrap();
        let wrong = composite(&truth, &texture(10_000 + seed), &mask).unwrap();
        // Ground truth last so that ties count against it.
        let cands = [&blurred, &wrong, &truth];
        let m = build_matrix(&cands, &mask, &scorer, &Serial).unwrap();
        let p = preference_vector(&m);
        if argmax_lowest(&p) == 2 && p[2] > p[0] && p[2] > p[1] {
            first += 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut reversed = 0;
    for _ in 0..1000 {
        let (w, h) = (rng.gen_range(16..40), rng.gen_range(16..40));
        let mut image = || {
            let (a, b, o) = (rng.gen_range(0.1..1.0f32), rng.gen_range(0.1..1.0f32), rng.gen::<f32>());
            let noise = rng.gen_range(0.0..0.2f32);
            let seed = rng.gen::<u64>();
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            PlaneImage::from_fn(w, h, 3, move |x, y, c| {
                o * 0.5 + 0.3 * (x as f32 * a + c as f32).sin() * (y as f32 * b).cos() + noise * r.gen::<f32>()
            })
        };
        let (left, right) = (image(), image());
        let mask = HoleMask::with_rect(w, h, w / 4, h / 4, w / 3, h / 3);
        let ab = scorer.judge(&left, &right, &mask).unwrap();
        let ba = scorer.judge(&right, &left, &mask).unwrap();
        if ab == ba.reversed() {
            reversed += 1;
        }
    }
    Outcome::check(
        first >= 45 && reversed == 1000,
        format!("ground truth ranked first in {first}/50 triples; judge reversal exact in {reversed}/1000 pairs"),
    )
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    // Positional arguments select criteria by case-insensitive substring.
    let filters: Vec<String> = args.iter().filter(|a| !a.starts_with('-')).map(|a| a.to_lowercase()).collect();
    type Criterion = (&'static str, f64, fn() -> Outcome);
    let criteria: [Criterion; 9] = [
        ("C1 guide weights", 1.0, c1_weights),
        ("C2 PatchMatch vs exhaustive search", 120.0, c2_patchmatch),
        ("C3 preference matrix", 10.0, c3_matrix),
        ("C4 auto-crop", 10.0, c4_auto_crop),
        ("C5 periodic texture fidelity", 60.0, c5_periodic),
        ("C6 gain/bias on smooth gradients", 60.0, c6_gain_bias),
        ("C7 CLI determinism", 300.0, c7_determinism),
        ("C8 12 MP performance", f64::INFINITY, c8_performance),
        ("C9 heuristic scorer", 60.0, c9_heuristic),
    ];
    let mut fatal = 0;
    for (name, budget, run) in criteria {
        if !filters.is_empty() && !filters.iter().any(|f| name.to_lowercase().contains(f.as_str())) {
            continue;
        }
        let t = Instant::now();
        let o = run();
        let secs = t.elapsed().as_secs_f64();
        let in_time = secs < budget;
        let pass = o.pass && in_time;
        let budget_note = if budget.is_finite() { format!(", budget {budget:.0} s") } else { String::new() };
        let note = if !pass && o.hardware { " [host below the 8-core reference]" } else { "" };
        println!(
            "{} {name}: {} ({secs:.1} s{budget_note}){note}",
            if pass { "PASS" } else { "FAIL" },
            o.detail
        );
        if !pass && !(o.hardware && in_time) {
            fatal += 1;
        }
    }
    if fatal > 0 {
        println!("{fatal} criterion(s) failed");
        std::process::exit(1);
    }
}
