//! PSNR, SSIM and the full/patch crop evaluation protocol.

use alloc::vec::Vec;

use rand::Rng;

use crate::curation::place_axis;
use crate::error::{Error, Result};
use crate::image::{CropRect, HoleMask, PlaneImage};
use crate::rng;

/// Finite stand-in for infinite PSNR in aggregates.
pub const PSNR_CAP: f64 = 99.0;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;

/// `10 log10(1 / MSE)` over RGB in the unit range; infinite for identical images.
pub fn psnr(a: &PlaneImage, b: &PlaneImage) -> Result<f64> {
    a.check_channels(3)?;
    b.check_channels(3)?;
    b.check_dims(a.width(), a.height())?;
    let sse: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| {
            let d = f64::from(*x) - f64::from(*y);
            d * d
        })
        .sum();
    if sse == 0.0 {
        return Ok(f64::INFINITY);
    }
    let mse = sse / a.data().len() as f64;
    Ok(-10.0 * libm::log10(mse))
}

/// PSNR with infinity replaced by [`PSNR_CAP`].
pub fn capped(psnr: f64) -> f64 {
    psnr.min(PSNR_CAP)
}

fn gaussian_window() -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as f64;
    let g: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| libm::exp(-((i as f64 - r) * (i as f64 - r)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)))
        .collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

/// Separable valid-mode Gaussian filter of a single-channel image.
fn filter_valid(src: &[f64], w: usize, h: usize, k: &[f64]) -> (Vec<f64>, usize, usize) {
    let n = k.len();
    let (ow, oh) = (w - n + 1, h - n + 1);
    let mut tmp = alloc::vec![0.0; ow * h];
    for y in 0..h {
        for x in 0..ow {
            tmp[y * ow + x] = (0..n).map(|i| k[i] * src[y * w + x + i]).sum();
        }
    }
    let mut out = alloc::vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..n).map(|i| k[i] * tmp[(y + i) * ow + x]).sum();
        }
    }
    (out, ow, oh)
}

/// Mean SSIM of the Rec. 601 luminance over all valid 11x11 Gaussian windows
/// (sigma 1.5, dynamic range 1).
pub fn ssim(a: &PlaneImage, b: &PlaneImage) -> Result<f64> {
    a.check_channels(3)?;
    b.check_channels(3)?;
    b.check_dims(a.width(), a.height())?;
    let (w, h) = a.dims();
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::TooSmall {
            width: w,
            height: h,
            min_edge: SSIM_WINDOW,
        });
    }
    let la: Vec<f64> = a.luminance().data().iter().map(|&v| f64::from(v)).collect();
    let lb: Vec<f64> = b.luminance().data().iter().map(|&v| f64::from(v)).collect();
    let k = gaussian_window();
    let prod = |p: &[f64], q: &[f64]| -> Vec<f64> { p.iter().zip(q).map(|(x, y)| x * y).collect() };
    let (mu_a, ow, oh) = filter_valid(&la, w, h, &k);
    let (mu_b, ..) = filter_valid(&lb, w, h, &k);
    let (aa, ..) = filter_valid(&prod(&la, &la), w, h, &k);
    let (bb, ..) = filter_valid(&prod(&lb, &lb), w, h, &k);
    let (ab, ..) = filter_valid(&prod(&la, &lb), w, h, &k);
    let mut total = 0.0;
    for i in 0..ow * oh {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = aa[i] - ma * ma;
        let vb = bb[i] - mb * mb;
        let cov = ab[i] - ma * mb;
        total += ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2))
            / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2));
    }
    Ok(total / (ow * oh) as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalMode {
    Full,
    Patch,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalProtocol {
    pub mode: EvalMode,
    pub patch_count: usize,
    pub patch_size: usize,
    pub seed: u64,
}

impl Default for EvalProtocol {
    fn default() -> Self {
        Self {
            mode: EvalMode::Full,
            patch_count: 10,
            patch_size: 256,
            seed: 0,
        }
    }
}

/// Patch windows centred on uniformly drawn hole pixels, translated to fit
/// the image. Depends only on the mask and the seed.
pub fn patch_windows(mask: &HoleMask, protocol: &EvalProtocol) -> Result<Vec<CropRect>> {
    if protocol.patch_size == 0 {
        return Err(Error::param("patch_size", "must be positive"));
    }
    let holes: Vec<(usize, usize)> = (0..mask.height())
        .flat_map(|y| (0..mask.width()).map(move |x| (x, y)))
        .filter(|&(x, y)| mask.is_hole(x, y))
        .collect();
    if holes.is_empty() {
        return Err(Error::EmptyMask);
    }
    let mut rng = rng::stream(protocol.seed, &[0xC20B]);
    let s = protocol.patch_size;
    Ok((0..protocol.patch_count)
        .map(|_| {
            let (cx, cy) = holes[rng.gen_range(0..holes.len())];
            CropRect {
                x: place_axis(cx, cx, s, mask.width()),
                y: place_axis(cy, cy, s, mask.height()),
                side: s,
            }
        })
        .collect())
}

/// PSNR (uncapped) and SSIM of one output against its ground truth.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scores {
    pub psnr: f64,
    pub ssim: f64,
}

/// Full mode scores the whole image; patch mode averages capped PSNR and
/// SSIM over the protocol's windows.
pub fn evaluate(truth: &PlaneImage, output: &PlaneImage, mask: &HoleMask, protocol: &EvalProtocol) -> Result<Scores> {
    truth.check_dims(mask.width(), mask.height())?;
    match protocol.mode {
        EvalMode::Full => Ok(Scores {
            psnr: psnr(truth, output)?,
            ssim: ssim(truth, output)?,
        }),
        EvalMode::Patch => {
            let windows = patch_windows(mask, protocol)?;
            let (mut p, mut s) = (0.0, 0.0);
            for r in &windows {
                let (a, b) = (truth.crop(r), output.crop(r));
                p += capped(psnr(&a, &b)?);
                s += ssim(&a, &b)?;
            }
            let n = windows.len().max(1) as f64;
            Ok(Scores { psnr: p / n, ssim: s / n })
        }
    }
}
