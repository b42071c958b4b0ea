//! Binary PGM (P5) and PPM (P6) with maxval 255.

use std::fs;
use std::path::Path;

use super::IoError;
use crate::image::Image;

fn skip_space_and_comments(bytes: &[u8], mut i: usize) -> usize {
    loop {
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if i < bytes.len() && bytes[i] == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
        } else {
            return i;
        }
    }
}

fn header_number(bytes: &[u8], i: &mut usize, what: &str) -> Result<usize, IoError> {
    *i = skip_space_and_comments(bytes, *i);
    let start = *i;
    while *i < bytes.len() && bytes[*i].is_ascii_digit() {
        *i += 1;
    }
    std::str::from_utf8(&bytes[start..*i])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| IoError::MalformedHeader(format!("missing {what}")))
}

/// Samples are scaled to `[0, 1]` by `1/255`.
pub fn decode_pnm(bytes: &[u8]) -> Result<Image, IoError> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err(IoError::MalformedHeader("expected P5 or P6 magic".into())),
    };
    let mut i = 2;
    let width = header_number(bytes, &mut i, "width")?;
    let height = header_number(bytes, &mut i, "height")?;
    let maxval = header_number(bytes, &mut i, "maxval")?;
    if maxval != 255 {
        return Err(IoError::MalformedHeader(format!("maxval {maxval} unsupported (need 255)")));
    }
    if width == 0 || height == 0 {
        return Err(IoError::MalformedHeader("zero image dimension".into()));
    }
    match bytes.get(i) {
        Some(b) if b.is_ascii_whitespace() => i += 1,
        _ => return Err(IoError::MalformedHeader("no separator before payload".into())),
    }
    let expected = width * height * channels;
    let payload = &bytes[i..];
    if payload.len() < expected {
        return Err(IoError::TruncatedPayload {
            expected,
            found: payload.len(),
        });
    }
    let data = payload[..expected].iter().map(|&b| b as f64 / 255.0).collect();
    Image::new(width, height, channels, data).map_err(|e| IoError::MalformedHeader(e.to_string()))
}

fn to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Encodes a 1- or 3-channel image; samples are clamped and rounded.
pub fn encode_pnm(image: &Image) -> Result<Vec<u8>, IoError> {
    let magic = match image.channels() {
        1 => "P5",
        3 => "P6",
        c => return Err(IoError::MalformedHeader(format!("cannot store {c} channels as PNM"))),
    };
    let mut out = format!("{magic}\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend(image.as_slice().iter().map(|&v| to_byte(v)));
    Ok(out)
}

pub fn read_image(path: &Path) -> Result<Image, IoError> {
    decode_pnm(&fs::read(path).map_err(|e| IoError::from_std(path, e))?)
}

pub fn write_image(path: &Path, image: &Image) -> Result<(), IoError> {
    fs::write(path, encode_pnm(image)?).map_err(|e| IoError::from_std(path, e))
}

/// Raw 8-bit grayscale plane, e.g. a mask visual.
pub fn write_gray(path: &Path, width: usize, height: usize, pixels: &[u8]) -> Result<(), IoError> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    fs::write(path, out).map_err(|e| IoError::from_std(path, e))
}

/// Writes `values` linearly rescaled to `0..=255` and a sidecar
/// `<path>.txt` recording the `min`/`max` used. Returns `(min, max)`.
pub fn write_heatmap(path: &Path, width: usize, height: usize, values: &[f64]) -> Result<(f64, f64), IoError> {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if max > min { max - min } else { 1.0 };
    let pixels: Vec<u8> = values.iter().map(|v| to_byte((v - min) / span)).collect();
    write_gray(path, width, height, &pixels)?;
    let mut side = path.as_os_str().to_owned();
    side.push(".txt");
    let side = Path::new(&side);
    fs::write(side, format!("min={min:e}\nmax={max:e}\n")).map_err(|e| IoError::from_std(side, e))?;
    Ok((min, max))
}
