//! PNG, PFM and nearest-neighbour-field files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use inpaint_core::guides::{ingest_depth, ingest_segmentation, structure_guide, GuideChannel};
use inpaint_core::patchmatch::NNField;
use inpaint_core::image::same_aspect;
use inpaint_core::{HoleMask, PlaneImage};

use crate::error::{Error, Result};

/// Raw decoded PNG samples.
#[derive(Clone, Debug, PartialEq)]
pub struct RawPng {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub bit_depth: u8,
    /// Integer sample values, interleaved.
    pub samples: Vec<u16>,
}

impl RawPng {
    fn max_value(&self) -> f32 {
        if self.bit_depth == 16 {
            65535.0
        } else {
            255.0
        }
    }

    /// Samples scaled to `[0, 1]`.
    pub fn normalized(&self) -> PlaneImage {
        let m = self.max_value();
        let data = self.samples.iter().map(|&v| f32::from(v) / m).collect();
        PlaneImage::from_data(self.width, self.height, self.channels, data).expect("decoder sizes")
    }

    /// Integer sample values of one channel.
    pub fn channel(&self, c: usize) -> PlaneImage {
        let data = self.samples.iter().skip(c).step_by(self.channels).map(|&v| f32::from(v)).collect();
        PlaneImage::from_data(self.width, self.height, 1, data).expect("decoder sizes")
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// Decodes any PNG to 8- or 16-bit samples (palettes and low bit depths
/// are expanded).
pub fn read_png_raw(path: &Path) -> Result<RawPng> {
    let mut decoder = png::Decoder::new(open(path)?);
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(|e| Error::format(path, e.to_string()))?;
    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf).map_err(|e| Error::format(path, e.to_string()))?;
    let channels = info.color_type.samples();
    let (width, height) = (info.width as usize, info.height as usize);
    let n = width * height * channels;
    let samples = match info.bit_depth {
        png::BitDepth::Sixteen => buf[..2 * n].chunks_exact(2).map(|b| u16::from_be_bytes([b[0], b[1]])).collect(),
        png::BitDepth::Eight => buf[..n].iter().map(|&b| u16::from(b)).collect(),
        d => return Err(Error::format(path, format!("unsupported bit depth {d:?}"))),
    };
    Ok(RawPng {
        width,
        height,
        channels,
        bit_depth: info.bit_depth as u8,
        samples,
    })
}

/// An image in `[0, 1]`; gray+alpha is reduced to gray.
pub fn read_image(path: &Path) -> Result<PlaneImage> {
    let raw = read_png_raw(path)?;
    let img = raw.normalized();
    Ok(if raw.channels == 2 { img.select_channels(0, 1) } else { img })
}

/// An RGB image in `[0, 1]`. Gray is replicated; alpha is dropped.
pub fn read_rgb(path: &Path) -> Result<PlaneImage> {
    let img = read_image(path)?;
    Ok(match img.channels() {
        1 => PlaneImage::from_fn(img.width(), img.height(), 3, |x, y, _| img.get(x, y, 0)),
        3 => img,
        _ => img.select_channels(0, 3),
    })
}

/// Any nonzero sample marks a hole.
pub fn read_mask(path: &Path) -> Result<HoleMask> {
    let raw = read_png_raw(path)?;
    let bits = raw.samples.chunks_exact(raw.channels).map(|px| px.iter().any(|&v| v != 0)).collect();
    Ok(HoleMask::from_bits(raw.width, raw.height, bits)?)
}

fn encode(path: &Path, width: usize, height: usize, color: png::ColorType, depth: png::BitDepth, bytes: &[u8]) -> Result<()> {
    let mut enc = png::Encoder::new(create(path)?, width as u32, height as u32);
    enc.set_color(color);
    enc.set_depth(depth);
    let fail = |e: png::EncodingError| Error::format(path, e.to_string());
    let mut w = enc.write_header().map_err(fail)?;
    w.write_image_data(bytes).map_err(fail)?;
    w.finish().map_err(fail)
}

fn color_type(path: &Path, channels: usize) -> Result<png::ColorType> {
    Ok(match channels {
        1 => png::ColorType::Grayscale,
        2 => png::ColorType::GrayscaleAlpha,
        3 => png::ColorType::Rgb,
        4 => png::ColorType::Rgba,
        c => return Err(Error::format(path, format!("cannot store {c} channels in a PNG"))),
    })
}

/// 8-bit PNG of an image in `[0, 1]` (values are clamped and rounded).
pub fn write_png(path: &Path, img: &PlaneImage) -> Result<()> {
    let color = color_type(path, img.channels())?;
    encode(path, img.width(), img.height(), color, png::BitDepth::Eight, &img.to_u8())
}

/// 16-bit PNG of integer sample values in `0..=65535`.
pub fn write_png16(path: &Path, img: &PlaneImage) -> Result<()> {
    let color = color_type(path, img.channels())?;
    let bytes: Vec<u8> = img
        .data()
        .iter()
        .flat_map(|&v| (v.round().clamp(0.0, 65535.0) as u16).to_be_bytes())
        .collect();
    encode(path, img.width(), img.height(), color, png::BitDepth::Sixteen, &bytes)
}

/// 8-bit gray PNG, 255 for holes.
pub fn write_mask(path: &Path, mask: &HoleMask) -> Result<()> {
    let bytes: Vec<u8> = mask.bits().iter().map(|&h| if h { 255 } else { 0 }).collect();
    encode(path, mask.width(), mask.height(), png::ColorType::Grayscale, png::BitDepth::Eight, &bytes)
}

/// Portable float map (`Pf` gray or `PF` RGB). Rows are stored bottom-up;
/// a negative scale means little-endian samples.
pub fn read_pfm(path: &Path) -> Result<PlaneImage> {
    let mut r = open(path)?;
    let mut token = || -> Result<String> {
        let mut t = String::new();
        loop {
            let buf = r.fill_buf().map_err(|e| Error::io(path, e))?;
            let Some(&b) = buf.first() else {
                return Err(Error::format(path, "truncated header"));
            };
            r.consume(1);
            if b.is_ascii_whitespace() {
                if !t.is_empty() {
                    return Ok(t);
                }
            } else {
                t.push(b as char);
            }
        }
    };
    let channels = match token()?.as_str() {
        "Pf" => 1,
        "PF" => 3,
        m => return Err(Error::format(path, format!("bad PFM magic {m:?}"))),
    };
    let mut number = |what: &str| -> Result<f64> {
        let t = token()?;
        t.parse().map_err(|_| Error::format(path, format!("bad {what} {t:?}")))
    };
    let (w, h, scale) = (number("width")?, number("height")?, number("scale")?);
    if w < 1.0 || h < 1.0 || w.fract() != 0.0 || h.fract() != 0.0 || scale == 0.0 {
        return Err(Error::format(path, "bad PFM header"));
    }
    let (w, h) = (w as usize, h as usize);
    let mut bytes = vec![0u8; w * h * channels * 4];
    r.read_exact(&mut bytes).map_err(|e| Error::format(path, format!("truncated samples: {e}")))?;
    let row = w * channels;
    let mut data = vec![0.0f32; w * h * channels];
    for (i, b) in bytes.chunks_exact(4).enumerate() {
        let b = [b[0], b[1], b[2], b[3]];
        let v = if scale < 0.0 { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) };
        let (y, k) = (i / row, i % row);
        data[(h - 1 - y) * row + k] = v;
    }
    Ok(PlaneImage::from_data(w, h, channels, data)?)
}

/// Little-endian PFM of a 1- or 3-channel image.
pub fn write_pfm(path: &Path, img: &PlaneImage) -> Result<()> {
    let magic = match img.channels() {
        1 => "Pf",
        3 => "PF",
        c => return Err(Error::format(path, format!("cannot store {c} channels in a PFM"))),
    };
    let mut out = create(path)?;
    let row = img.width() * img.channels();
    let mut bytes = format!("{magic}\n{} {}\n-1.0\n", img.width(), img.height()).into_bytes();
    for y in (0..img.height()).rev() {
        for v in &img.data()[y * row..(y + 1) * row] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.write_all(&bytes).and_then(|_| out.flush()).map_err(|e| Error::io(path, e))
}

fn is_pfm(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pfm"))
}

/// Guides may be supplied at any resolution with the image's aspect ratio;
/// they are resampled per pyramid level.
fn check_dims(path: &Path, img: &PlaneImage, dims: (usize, usize)) -> Result<()> {
    if !same_aspect(img.dims(), dims) {
        return Err(Error::format(
            path,
            format!("size {}x{} does not match the aspect ratio of the image ({}x{})", img.width(), img.height(), dims.0, dims.1),
        ));
    }
    Ok(())
}

fn ingest(path: &Path, r: inpaint_core::Result<GuideChannel>) -> Result<GuideChannel> {
    r.map_err(|source| Error::Input {
        path: path.to_path_buf(),
        source,
    })
}

/// Depth guide from a gray PFM or a 16-bit gray PNG.
pub fn read_depth(path: &Path, dims: (usize, usize)) -> Result<GuideChannel> {
    let raw = if is_pfm(path) {
        let img = read_pfm(path)?;
        if img.channels() != 1 {
            return Err(Error::format(path, "depth PFM must be single-channel (Pf)"));
        }
        img
    } else {
        let png = read_png_raw(path)?;
        if png.channels != 1 || png.bit_depth != 16 {
            return Err(Error::format(path, "depth PNG must be 16-bit grayscale"));
        }
        png.channel(0)
    };
    check_dims(path, &raw, dims)?;
    ingest(path, ingest_depth(&raw))
}

/// Segmentation labels from the red channel of an 8-bit PNG or a 16-bit
/// gray PNG.
pub fn read_segmentation(path: &Path, dims: (usize, usize)) -> Result<GuideChannel> {
    let png = read_png_raw(path)?;
    if png.bit_depth == 16 && png.channels != 1 {
        return Err(Error::format(path, "16-bit segmentation must be grayscale"));
    }
    let labels = png.channel(0);
    check_dims(path, &labels, dims)?;
    ingest(path, ingest_segmentation(&labels))
}

/// Structure guide from a precomputed structure image.
pub fn read_structure(path: &Path, dims: (usize, usize)) -> Result<GuideChannel> {
    let img = read_image(path)?;
    check_dims(path, &img, dims)?;
    ingest(path, structure_guide(&img))
}

/// Reads a hole mask and checks it against the image size.
pub fn read_mask_for(path: &Path, dims: (usize, usize)) -> Result<HoleMask> {
    let mask = read_mask(path)?;
    if mask.dims() != dims {
        return Err(Error::format(
            path,
            format!("mask is {}x{} but the image is {}x{}", mask.width(), mask.height(), dims.0, dims.1),
        ));
    }
    Ok(mask)
}

/// One record of an NNF dump.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NnfRecord {
    pub dx: i32,
    pub dy: i32,
    /// Negative for pixels outside the target set.
    pub distance: f32,
}

/// Binary field dump: `u32` width and height, then one `(i32 dx, i32 dy,
/// f32 distance)` triple per image pixel in row-major order, all
/// little-endian. Pixels without an entry are written as `(0, 0, -1)`.
pub fn write_nnf(path: &Path, field: &NNField) -> Result<()> {
    let (w, h) = field.image_dims();
    let mut bytes = Vec::with_capacity(8 + w * h * 12);
    bytes.extend_from_slice(&(w as u32).to_le_bytes());
    bytes.extend_from_slice(&(h as u32).to_le_bytes());
    for y in 0..h {
        for x in 0..w {
            let (dx, dy, d) = field.get(x, y).map_or((0, 0, -1.0), |e| (e.dx, e.dy, e.distance));
            bytes.extend_from_slice(&dx.to_le_bytes());
            bytes.extend_from_slice(&dy.to_le_bytes());
            bytes.extend_from_slice(&d.to_le_bytes());
        }
    }
    let mut out = create(path)?;
    out.write_all(&bytes).and_then(|_| out.flush()).map_err(|e| Error::io(path, e))
}

/// Reads a dump written by [`write_nnf`].
pub fn read_nnf(path: &Path) -> Result<(usize, usize, Vec<NnfRecord>)> {
    let mut bytes = Vec::new();
    open(path)?.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
    let word = |i: usize| -> [u8; 4] { [bytes[i], bytes[i + 1], bytes[i + 2], bytes[i + 3]] };
    if bytes.len() < 8 {
        return Err(Error::format(path, "missing header"));
    }
    let (w, h) = (u32::from_le_bytes(word(0)) as usize, u32::from_le_bytes(word(4)) as usize);
    if bytes.len() != 8 + w * h * 12 {
        return Err(Error::format(path, format!("expected {} bytes for {w}x{h}", 8 + w * h * 12)));
    }
    let records = (0..w * h)
        .map(|i| {
            let o = 8 + i * 12;
            NnfRecord {
                dx: i32::from_le_bytes(word(o)),
                dy: i32::from_le_bytes(word(o + 4)),
                distance: f32::from_le_bytes(word(o + 8)),
            }
        })
        .collect();
    Ok((w, h, records))
}
