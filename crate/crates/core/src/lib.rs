//! Guided PatchMatch inpainting at native camera resolution.
//!
//! The crate is `no_std` (with `alloc`) and contains only the numerical
//! pipeline: multi-channel rasters and pyramids, guide channels (including
//! relative-total-variation structure extraction), a multi-guide PatchMatch
//! with gain/bias compensation, coarse-to-fine search-and-vote synthesis,
//! antisymmetric pairwise-preference curation, synthetic hole generation and
//! the PSNR/SSIM evaluation protocol. File formats, subprocess scorers and
//! thread pools live in the `inpaint` crate.
#![no_std]
// `!(x > 0.0)` style checks deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod curation;
pub mod error;
pub mod exec;
pub mod guides;
pub mod holes;
pub mod image;
pub mod metrics;
pub mod patchmatch;
pub mod pyramid;
pub mod resample;
pub mod rng;
pub mod rtv;
pub mod synthesis;

pub use error::{Error, Result};
pub use image::{CropRect, HoleMask, PlaneImage};
