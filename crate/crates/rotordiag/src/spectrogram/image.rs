//! Spectrogram-to-image rendering and binary PPM (P6) I/O.
//!
//! Level matrices are min-max normalized over the whole matrix, resampled to
//! the target size by nearest neighbor (time on the horizontal axis, low
//! frequency at the bottom), and mapped through a fixed 256-entry color table
//! shipped as a data file, so rendered images are identical on every
//! platform.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use super::{Matrix, SpectrogramError};

/// Entries in the shipped color table.
pub const COLOR_TABLE_LEN: usize = 256;

/// The blue -> cyan -> yellow -> red color table: 256 RGB byte triples,
/// entry `i` at bytes `3i..3i+3` in R, G, B order.
static COLOR_TABLE: &[u8; COLOR_TABLE_LEN * 3] = include_bytes!("../../data/colormap.bin");

/// RGB of one color-table entry.
pub fn color_table_entry(index: u8) -> [u8; 3] {
    let at = index as usize * 3;
    [COLOR_TABLE[at], COLOR_TABLE[at + 1], COLOR_TABLE[at + 2]]
}

/// Load a color table from a file in the shipped byte order; the embedded
/// default is used everywhere else in the crate.
pub fn load_color_table(path: &Path) -> Result<Vec<[u8; 3]>, SpectrogramError> {
    let bytes = fs::read(path).map_err(|e| SpectrogramError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    if bytes.len() != COLOR_TABLE_LEN * 3 {
        return Err(SpectrogramError::MalformedPpm(format!(
            "color table must be {} bytes, found {}",
            COLOR_TABLE_LEN * 3,
            bytes.len()
        )));
    }
    Ok(bytes.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect())
}

/// Fixed-size 3-channel 8-bit image; the classifier input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecImage {
    pub height: usize,
    pub width: usize,
    /// Row-major RGB triples, `height * width * 3` bytes, row 0 at the top.
    pub pixels: Vec<u8>,
}

impl SpecImage {
    pub fn new(height: usize, width: usize, pixels: Vec<u8>) -> Self {
        assert_eq!(pixels.len(), height * width * 3);
        Self {
            height,
            width,
            pixels,
        }
    }

    pub fn pixel(&self, y: usize, x: usize) -> [u8; 3] {
        let at = (y * self.width + x) * 3;
        [self.pixels[at], self.pixels[at + 1], self.pixels[at + 2]]
    }
}

/// Nearest-neighbor source index for a destination index, in pure integer
/// arithmetic: floor((dst + 0.5) * src_len / dst_len).
fn nearest_index(dst: usize, dst_len: usize, src_len: usize) -> usize {
    let idx = ((2 * dst as u64 + 1) * src_len as u64) / (2 * dst_len as u64);
    (idx as usize).min(src_len - 1)
}

/// Render a level matrix (rows = time frames, columns = frequency bins) as a
/// fixed-size image.
///
/// Levels are normalized to [0, 1] by the matrix-wide min and max (a constant
/// matrix maps to 0), sampled by nearest neighbor with time left-to-right and
/// frequency bottom-to-top, and quantized to color-table indices by
/// `round(v * 255)`.
pub fn colorize(
    levels: &Matrix,
    height: usize,
    width: usize,
) -> Result<SpecImage, SpectrogramError> {
    if height < 8 || width < 8 {
        return Err(SpectrogramError::DegenerateDimensions { height, width });
    }
    let frames = levels.rows();
    let bins = levels.cols();
    assert!(frames > 0 && bins > 0, "levels matrix must be non-empty");

    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for r in 0..frames {
        for c in 0..bins {
            let v = levels.at(r, c);
            min = min.min(v);
            max = max.max(v);
        }
    }
    let range = max - min;

    let mut pixels = Vec::with_capacity(height * width * 3);
    for y in 0..height {
        // Row 0 is the top of the image = highest frequency.
        let bin = nearest_index(height - 1 - y, height, bins);
        for x in 0..width {
            let frame = nearest_index(x, width, frames);
            let v = if range > 0.0 {
                (levels.at(frame, bin) - min) / range
            } else {
                0.0
            };
            let index = (v * 255.0).round() as u8;
            pixels.extend_from_slice(&color_table_entry(index));
        }
    }
    Ok(SpecImage::new(height, width, pixels))
}

/// Write an image as binary PPM: `P6\n<width> <height>\n255\n` then raw RGB.
pub fn write_image(img: &SpecImage, path: &Path) -> Result<(), SpectrogramError> {
    let io_err = |e| SpectrogramError::Io {
        path: path.to_path_buf(),
        source: e,
    };
    let mut file = fs::File::create(path).map_err(io_err)?;
    file.write_all(format!("P6\n{} {}\n255\n", img.width, img.height).as_bytes())
        .map_err(io_err)?;
    file.write_all(&img.pixels).map_err(io_err)?;
    Ok(())
}

/// Read a binary PPM written by [`write_image`]. Header whitespace and `#`
/// comments are tolerated; only maxval 255 is supported.
pub fn read_image(path: &Path) -> Result<SpecImage, SpectrogramError> {
    let bytes = fs::read(path).map_err(|e| SpectrogramError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    decode_ppm(&bytes)
}

pub(crate) fn decode_ppm(bytes: &[u8]) -> Result<SpecImage, SpectrogramError> {
    let malformed = |msg: &str| SpectrogramError::MalformedPpm(msg.to_string());
    if bytes.len() < 2 || &bytes[0..2] != b"P6" {
        return Err(malformed("missing P6 magic"));
    }

    // Parse three whitespace-separated header integers after the magic,
    // skipping comment lines.
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        // Skip whitespace and comments.
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(malformed("header ended early")),
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err(malformed("expected integer in header"));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).unwrap();
        *field = text
            .parse::<usize>()
            .map_err(|_| malformed("header integer out of range"))?;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(SpectrogramError::UnsupportedPpm(format!(
            "maxval {maxval} (only 255 supported)"
        )));
    }
    if width == 0 || height == 0 {
        return Err(malformed("zero image dimension"));
    }
    // Exactly one whitespace byte separates the header from the pixel data.
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(malformed("missing separator before pixel data")),
    }

    let expected = width * height * 3;
    let found = bytes.len() - pos;
    if found < expected {
        return Err(SpectrogramError::TruncatedPpm { expected, found });
    }
    if found > expected {
        return Err(malformed("trailing bytes after pixel data"));
    }
    Ok(SpecImage::new(height, width, bytes[pos..].to_vec()))
}
