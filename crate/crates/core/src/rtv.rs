//! Relative-total-variation structure extraction.
//!
//! Each outer iteration builds per-edge smoothness weights from the current
//! estimate (inverse windowed gradient magnitude times inverse local gradient
//! magnitude) and solves `(I + lambda/2 * L_w) x = input` per channel, where
//! `L_w` is the weighted graph Laplacian of the 4-neighbour grid. The window
//! scale halves every iteration down to a floor of 0.5.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::image::PlaneImage;

#[derive(Clone, Debug, PartialEq)]
pub struct RtvParams {
    /// Smoothness weight `lambda`.
    pub lambda: f64,
    /// Initial Gaussian window scale in pixels.
    pub sigma: f64,
    /// Floor on the local gradient magnitude.
    pub sharpness: f64,
    pub iterations: usize,
    /// Relative residual at which the conjugate-gradient solve stops.
    pub tolerance: f64,
    pub max_solver_iterations: usize,
}

impl Default for RtvParams {
    fn default() -> Self {
        Self {
            lambda: 0.01,
            sigma: 3.0,
            sharpness: 0.02,
            iterations: 4,
            tolerance: 1e-6,
            max_solver_iterations: 3000,
        }
    }
}

const WINDOW_FLOOR: f64 = 1e-3;

pub fn rtv_structure(image: &PlaneImage, params: &RtvParams) -> Result<PlaneImage> {
    image.check_channels(3)?;
    if !(params.lambda > 0.0) {
        return Err(Error::param("lambda", "must be positive"));
    }
    if !(params.sigma > 0.0) {
        return Err(Error::param("sigma", "must be positive"));
    }
    if params.iterations == 0 {
        return Err(Error::param("iterations", "must be at least 1"));
    }
    let (w, h) = image.dims();
    let first = image.pixel(0, 0);
    if image.data().chunks_exact(3).all(|p| p == first) {
        return Ok(image.clone());
    }

    let n = w * h;
    let input: Vec<[f64; 3]> = image
        .data()
        .chunks_exact(3)
        .map(|p| [f64::from(p[0]), f64::from(p[1]), f64::from(p[2])])
        .collect();
    let mut x = input.clone();
    let mut sigma = params.sigma;
    let half_lambda = params.lambda / 2.0;
    let mut wx = vec![0f64; n];
    let mut wy = vec![0f64; n];
    for _ in 0..params.iterations {
        texture_weights(&x, w, h, sigma, params.sharpness, &mut wx, &mut wy);
        for v in wx.iter_mut().chain(wy.iter_mut()) {
            *v *= half_lambda;
        }
        x = solve(&input, w, h, &wx, &wy, params)?;
        sigma = (sigma / 2.0).max(0.5);
    }
    let data = x
        .iter()
        .flat_map(|p| p.iter().map(|&v| v.clamp(0.0, 1.0) as f32))
        .collect();
    PlaneImage::from_data(w, h, 3, data)
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let size = (libm::round(5.0 * sigma) as usize) | 1;
    let r = (size / 2) as i64;
    let mut k: Vec<f64> = (-r..=r)
        .map(|i| libm::exp(-((i * i) as f64) / (2.0 * sigma * sigma)))
        .collect();
    let s: f64 = k.iter().sum();
    for v in &mut k {
        *v /= s;
    }
    k
}

/// Separable Gaussian with edge clamping.
fn blur(src: &[[f64; 3]], w: usize, h: usize, sigma: f64) -> Vec<[f64; 3]> {
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as i64;
    let mut tmp = vec![[0f64; 3]; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0f64; 3];
            for (t, &kv) in k.iter().enumerate() {
                let sx = (x as i64 + t as i64 - r).clamp(0, w as i64 - 1) as usize;
                let p = src[y * w + sx];
                for c in 0..3 {
                    acc[c] += kv * p[c];
                }
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![[0f64; 3]; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0f64; 3];
            for (t, &kv) in k.iter().enumerate() {
                let sy = (y as i64 + t as i64 - r).clamp(0, h as i64 - 1) as usize;
                let p = tmp[sy * w + x];
                for c in 0..3 {
                    acc[c] += kv * p[c];
                }
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// `wx[i]` weights the edge between pixel `i` and its right neighbour,
/// `wy[i]` the edge to the pixel below. Border edges are zero.
fn texture_weights(
    x: &[[f64; 3]],
    w: usize,
    h: usize,
    sigma: f64,
    sharpness: f64,
    wx: &mut [f64],
    wy: &mut [f64],
) {
    let smooth = blur(x, w, h, sigma);
    for py in 0..h {
        for px in 0..w {
            let i = py * w + px;
            let (mut grad, mut gx, mut gy) = (0.0, 0.0, 0.0);
            for c in 0..3 {
                let fx = if px + 1 < w { x[i + 1][c] - x[i][c] } else { 0.0 };
                let fy = if py + 1 < h { x[i + w][c] - x[i][c] } else { 0.0 };
                grad += libm::sqrt(fx * fx + fy * fy);
                if px + 1 < w {
                    gx += (smooth[i + 1][c] - smooth[i][c]).abs();
                }
                if py + 1 < h {
                    gy += (smooth[i + w][c] - smooth[i][c]).abs();
                }
            }
            let local = 1.0 / (grad / 3.0).max(sharpness);
            wx[i] = if px + 1 < w { local / (gx / 3.0).max(WINDOW_FLOOR) } else { 0.0 };
            wy[i] = if py + 1 < h { local / (gy / 3.0).max(WINDOW_FLOOR) } else { 0.0 };
        }
    }
}

/// `y = A v` for `A = I + L_w`.
fn apply(v: &[[f64; 3]], w: usize, h: usize, wx: &[f64], wy: &[f64], out: &mut [[f64; 3]]) {
    for py in 0..h {
        for px in 0..w {
            let i = py * w + px;
            let mut acc = v[i];
            let mut edge = |j: usize, wt: f64| {
                for c in 0..3 {
                    acc[c] += wt * (v[i][c] - v[j][c]);
                }
            };
            if px + 1 < w {
                edge(i + 1, wx[i]);
            }
            if px > 0 {
                edge(i - 1, wx[i - 1]);
            }
            if py + 1 < h {
                edge(i + w, wy[i]);
            }
            if py > 0 {
                edge(i - w, wy[i - w]);
            }
            out[i] = acc;
        }
    }
}

/// Jacobi-preconditioned conjugate gradient, all three channels at once
/// (they share the system matrix but keep separate Krylov scalars).
fn solve(
    b: &[[f64; 3]],
    w: usize,
    h: usize,
    wx: &[f64],
    wy: &[f64],
    params: &RtvParams,
) -> Result<Vec<[f64; 3]>> {
    let n = w * h;
    let diag: Vec<f64> = (0..n)
        .map(|i| {
            let (px, py) = (i % w, i / w);
            let mut d = 1.0 + wx[i] + wy[i];
            if px > 0 {
                d += wx[i - 1];
            }
            if py > 0 {
                d += wy[i - w];
            }
            d
        })
        .collect();
    let mut x = b.to_vec();
    let mut ax = vec![[0f64; 3]; n];
    apply(&x, w, h, wx, wy, &mut ax);
    let mut r: Vec<[f64; 3]> = b
        .iter()
        .zip(&ax)
        .map(|(bi, ai)| [bi[0] - ai[0], bi[1] - ai[1], bi[2] - ai[2]])
        .collect();
    let mut z: Vec<[f64; 3]> = r
        .iter()
        .zip(&diag)
        .map(|(ri, d)| [ri[0] / d, ri[1] / d, ri[2] / d])
        .collect();
    let mut p = z.clone();
    let mut ap = vec![[0f64; 3]; n];
    let dot = |a: &[[f64; 3]], b: &[[f64; 3]]| {
        let mut s = [0f64; 3];
        for (u, v) in a.iter().zip(b) {
            for c in 0..3 {
                s[c] += u[c] * v[c];
            }
        }
        s
    };
    let bnorm = dot(b, b).map(|v| libm::sqrt(v).max(1e-30));
    let mut rz = dot(&r, &z);
    let mut done = [false; 3];
    let mut residual = 0.0f64;
    for _ in 0..params.max_solver_iterations {
        let rr = dot(&r, &r);
        residual = 0.0;
        for c in 0..3 {
            let rel = libm::sqrt(rr[c]) / bnorm[c];
            done[c] = rel <= params.tolerance;
            residual = residual.max(rel);
        }
        if done.iter().all(|&d| d) {
            return Ok(x);
        }
        apply(&p, w, h, wx, wy, &mut ap);
        let pap = dot(&p, &ap);
        let mut alpha = [0f64; 3];
        for c in 0..3 {
            if !done[c] && pap[c] > 0.0 {
                alpha[c] = rz[c] / pap[c];
            }
        }
        for i in 0..n {
            for c in 0..3 {
                x[i][c] += alpha[c] * p[i][c];
                r[i][c] -= alpha[c] * ap[i][c];
                z[i][c] = r[i][c] / diag[i];
            }
        }
        let rz_next = dot(&r, &z);
        let mut beta = [0f64; 3];
        for c in 0..3 {
            if rz[c] > 0.0 {
                beta[c] = rz_next[c] / rz[c];
            }
        }
        for i in 0..n {
            for c in 0..3 {
                p[i][c] = z[i][c] + beta[c] * p[i][c];
            }
        }
        rz = rz_next;
    }
    Err(Error::NonConvergent { residual })
}
