//! Binary PPM (P6) and PGM (P5) with maxval 255.
//!
//! Headers are written with single spaces, e.g. `P6 1 1 255 ` followed by
//! the raster. The reader accepts any whitespace and `#` comments between
//! header fields, as the format allows.

use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

/// `floor(v * 255 + 0.5)` clamped to `0..=255`.
pub fn quantize(v: f64) -> u8 {
    (v * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8
}

pub fn pgm_bytes(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5 {} {} 255 ", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

/// Encodes a `[3,H,W]` tensor with values in `[0,1]`.
pub fn ppm_bytes(image: &Tensor) -> Result<Vec<u8>> {
    let (c, h, w) = image.chw()?;
    crate::error::check_dim("write_ppm", "channels", c, 3)?;
    let mut out = format!("P6 {w} {h} 255 ").into_bytes();
    let plane = h * w;
    for p in 0..plane {
        for ch in 0..3 {
            out.push(quantize(image.data()[ch * plane + p]));
        }
    }
    Ok(out)
}

pub fn write_pgm(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, pgm_bytes(img)).map_err(|e| Error::io(path, e))
}

pub fn write_ppm(image: &Tensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, ppm_bytes(image)?).map_err(|e| Error::io(path, e))
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    parse_pgm(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}

pub fn read_ppm(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    parse_ppm(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}

pub fn parse_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let (width, height, start) = parse_header(bytes, b"P5", "PGM")?;
    let pixels = raster(bytes, start, width * height, "PGM")?.to_vec();
    Ok(GrayImage {
        width,
        height,
        pixels,
    })
}

/// Decodes to a `[3,H,W]` tensor with values `byte / 255`.
pub fn parse_ppm(bytes: &[u8]) -> Result<Tensor> {
    let (width, height, start) = parse_header(bytes, b"P6", "PPM")?;
    let plane = width * height;
    let data = raster(bytes, start, 3 * plane, "PPM")?;
    let mut out = vec![0.0; 3 * plane];
    for p in 0..plane {
        for ch in 0..3 {
            out[ch * plane + p] = data[3 * p + ch] as f64 / 255.0;
        }
    }
    Tensor::from_vec(&[3, height, width], out)
}

fn raster<'a>(bytes: &'a [u8], start: usize, len: usize, format: &'static str) -> Result<&'a [u8]> {
    let end = start + len;
    if bytes.len() < end {
        return Err(Error::Format {
            format,
            offset: bytes.len(),
            msg: format!("raster truncated: need {len} bytes from offset {start}"),
        });
    }
    if bytes.len() > end {
        return Err(Error::Format {
            format,
            offset: end,
            msg: "trailing bytes after raster".into(),
        });
    }
    Ok(&bytes[start..end])
}

/// Returns `(width, height, raster_offset)`.
fn parse_header(bytes: &[u8], magic: &[u8], format: &'static str) -> Result<(usize, usize, usize)> {
    let err = |offset: usize, msg: String| Error::Format { format, offset, msg };
    if bytes.len() < 2 || &bytes[..2] != magic {
        return Err(err(0, format!("expected magic {}", String::from_utf8_lossy(magic))));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for (idx, name) in ["width", "height", "maxval"].iter().enumerate() {
        let before = pos;
        // At least one whitespace byte, possibly with comments.
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        if pos == before {
            return Err(err(pos, format!("expected whitespace before {name}")));
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if pos == start {
            return Err(err(pos, format!("expected decimal {name}")));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).expect("ascii digits");
        fields[idx] = text
            .parse()
            .map_err(|_| err(start, format!("{name} `{text}` out of range")))?;
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(err(2, format!("zero extent {width}x{height}")));
    }
    if maxval == 0 || maxval > 255 {
        return Err(err(pos, format!("maxval {maxval} unsupported, must be 1..=255")));
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => Ok((width, height, pos + 1)),
        _ => Err(err(pos, "expected one whitespace byte before raster".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn white_pixel_bytes() {
        let img = Tensor::ones(&[3, 1, 1]);
        let bytes = ppm_bytes(&img).unwrap();
        let mut expected = b"P6 1 1 255 ".to_vec();
        expected.extend_from_slice(&[0xff; 3]);
        assert_eq!(bytes, expected);
        assert_eq!(parse_ppm(&bytes).unwrap(), img);
    }

    #[test]
    fn header_with_comment_and_newlines() {
        let bytes = b"P5\n# made by hand\n2 1\n255\n\x07\x09";
        let g = parse_pgm(bytes).unwrap();
        assert_eq!((g.width, g.height, g.pixels.clone()), (2, 1, vec![7, 9]));
    }

    #[test]
    fn malformed_headers_report_offsets() {
        let e = parse_pgm(b"P6 1 1 255 \x00").unwrap_err();
        assert!(e.to_string().contains("byte 0"), "{e}");
        let e = parse_pgm(b"P5 1 x 255 \x00").unwrap_err();
        assert!(e.to_string().contains("byte 5"), "{e}");
        let e = parse_pgm(b"P5 1 1 65535 \x00\x00").unwrap_err();
        assert!(e.to_string().contains("maxval"), "{e}");
        assert!(parse_pgm(b"P5 2 1 255 \x00").is_err());
    }

    #[test]
    fn quantize_rounds_half_up() {
        assert_eq!(quantize(0.5), 128);
        assert_eq!(quantize(1.0), 255);
        assert_eq!(quantize(-0.2), 0);
        assert_eq!(quantize(1.7), 255);
    }
}
