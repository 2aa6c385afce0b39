//! 8-bit PGM (P2 ASCII and P5 binary) reading and writing.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::Image;
use crate::scalar::Scalar;

/// On-disk PGM flavour.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PgmFormat {
    Ascii,
    Binary,
}

/// Decodes a PGM byte stream. Samples are scaled linearly so that `maxval`
/// maps to 255.
pub fn decode_pgm<T: Scalar>(bytes: &[u8], source_name: &str) -> Result<Image<T>> {
    let mut cur = Cursor {
        bytes,
        pos: 0,
        line: 1,
        source: source_name,
    };
    let magic = cur.token()?;
    let format = match magic.as_str() {
        "P2" => PgmFormat::Ascii,
        "P5" => PgmFormat::Binary,
        other => return Err(cur.err(format!("unsupported magic {other:?}"))),
    };
    let width = cur.number()?;
    let height = cur.number()?;
    let maxval = cur.number()?;
    if width == 0 || height == 0 {
        return Err(cur.err(format!("empty image {width}x{height}")));
    }
    if maxval == 0 || maxval > 255 {
        return Err(cur.err(format!("unsupported maxval {maxval} (8-bit only)")));
    }
    let scale = 255.0 / maxval as f64;
    let n = width * height;
    let mut data = Vec::with_capacity(n);
    match format {
        PgmFormat::Ascii => {
            for _ in 0..n {
                let v = cur.number()?;
                if v > maxval {
                    return Err(cur.err(format!("sample {v} exceeds maxval {maxval}")));
                }
                data.push(T::lit(v as f64 * scale));
            }
        }
        PgmFormat::Binary => {
            // Exactly one whitespace byte separates the header from the raster.
            cur.pos += 1;
            let raster = bytes
                .get(cur.pos..cur.pos + n)
                .ok_or_else(|| cur.err(format!("truncated raster: expected {n} bytes")))?;
            for &b in raster {
                if b as usize > maxval {
                    return Err(cur.err(format!("sample {b} exceeds maxval {maxval}")));
                }
                data.push(T::lit(b as f64 * scale));
            }
        }
    }
    Image::new(width, height, data)
}

/// Encodes an image, clamping to `[0, 255]` and rounding to nearest.
pub fn encode_pgm<T: Scalar>(image: &Image<T>, format: PgmFormat) -> Vec<u8> {
    let samples = image
        .data()
        .iter()
        .map(|v| v.as_f64().clamp(0.0, 255.0).round() as u8);
    match format {
        PgmFormat::Binary => {
            let mut out = format!("P5\n{} {}\n255\n", image.width(), image.height()).into_bytes();
            out.extend(samples);
            out
        }
        PgmFormat::Ascii => {
            let mut out = format!("P2\n{} {}\n255\n", image.width(), image.height());
            let w = image.width();
            for (i, s) in samples.enumerate() {
                out.push_str(&s.to_string());
                out.push(if (i + 1) % w == 0 { '\n' } else { ' ' });
            }
            out.into_bytes()
        }
    }
}

pub fn read_pgm<T: Scalar>(path: impl AsRef<Path>) -> Result<Image<T>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes, &path.display().to_string())
}

pub fn write_pgm<T: Scalar>(path: impl AsRef<Path>, image: &Image<T>, format: PgmFormat) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(image, format)).map_err(|e| Error::io(path, e))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    line: usize,
    source: &'a str,
}

impl Cursor<'_> {
    fn err(&self, message: String) -> Error {
        Error::parse(self.source, self.line, message)
    }

    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    if c == b'\n' {
                        break;
                    }
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                if b == b'\n' {
                    self.line += 1;
                }
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Result<String> {
        self.skip_space_and_comments();
        let start = self.pos;
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() || b == b'#' {
                break;
            }
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("unexpected end of file".into()));
        }
        Ok(String::from_utf8_lossy(&self.bytes[start..self.pos]).into_owned())
    }

    fn number(&mut self) -> Result<usize> {
        let tok = self.token()?;
        tok.parse()
            .map_err(|_| self.err(format!("expected an unsigned integer, found {tok:?}")))
    }
}
