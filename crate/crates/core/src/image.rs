//! Single-channel 8-bit rasters and portable anymap I/O.
//!
//! Binary graymaps (P5) are read and written; binary pixmaps (P6) are
//! accepted on input and converted to luma with BT.601 weights. Only a
//! maxval of 255 is supported.

use std::io::Write;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("image dimensions must be at least 1x1, got {width}x{height}")]
    EmptyDimensions { width: usize, height: usize },
    #[error("pixel buffer holds {actual} bytes, expected {expected}")]
    BufferSize { expected: usize, actual: usize },
    #[error("unsupported maxval {0}: only 8-bit images with maxval 255 are accepted")]
    MaxVal(u32),
    #[error("malformed pnm: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::EmptyDimensions { width, height });
        }
        let expected = width
            .checked_mul(height)
            .ok_or_else(|| ImageError::Format("dimensions overflow".into()))?;
        if pixels.len() != expected {
            return Err(ImageError::BufferSize {
                expected,
                actual: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self, ImageError> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> u8,
    ) -> Result<Self, ImageError> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    /// Pixels scaled to `[0, 1]`.
    pub fn normalized(&self) -> Vec<f64> {
        self.pixels.iter().map(|&p| f64::from(p) / 255.0).collect()
    }

    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    /// Parse a binary P5 graymap, or a binary P6 pixmap reduced to luma.
    pub fn from_pnm(bytes: &[u8]) -> Result<Self, ImageError> {
        let mut cursor = HeaderCursor { bytes, pos: 0 };
        let magic = cursor.token()?;
        let channels = match magic.as_str() {
            "P5" => 1,
            "P6" => 3,
            other => {
                return Err(ImageError::Format(format!(
                    "unsupported magic {other:?}; expected P5 or P6"
                )))
            }
        };
        let width = cursor.number()? as usize;
        let height = cursor.number()? as usize;
        let maxval = cursor.number()?;
        if maxval != 255 {
            return Err(ImageError::MaxVal(maxval));
        }
        // exactly one whitespace byte separates the header from the raster
        match bytes.get(cursor.pos) {
            Some(b) if b.is_ascii_whitespace() => cursor.pos += 1,
            _ => return Err(ImageError::Format("missing whitespace after maxval".into())),
        }
        if width == 0 || height == 0 {
            return Err(ImageError::EmptyDimensions { width, height });
        }
        let samples = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(channels))
            .ok_or_else(|| ImageError::Format("dimensions overflow".into()))?;
        let raster = &bytes[cursor.pos..];
        if raster.len() < samples {
            return Err(ImageError::Format(format!(
                "raster truncated: {} of {samples} bytes",
                raster.len()
            )));
        }
        let raster = &raster[..samples];
        let pixels = if channels == 1 {
            raster.to_vec()
        } else {
            raster
                .chunks_exact(3)
                .map(|rgb| luma(rgb[0], rgb[1], rgb[2]))
                .collect()
        };
        Self::new(width, height, pixels)
    }

    pub fn read(path: &Path) -> Result<Self, ImageError> {
        Self::from_pnm(&std::fs::read(path)?)
    }

    /// Write as P5, via a temporary file renamed into place on success.
    pub fn write(&self, path: &Path) -> Result<(), ImageError> {
        write_atomic(path, &self.to_pgm())?;
        Ok(())
    }
}

/// BT.601 luma, rounded to nearest.
pub fn luma(r: u8, g: u8, b: u8) -> u8 {
    let y = 0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b);
    y.round().clamp(0.0, 255.0) as u8
}

/// Write `bytes` to a sibling temporary file and rename it over `path`.
/// Nothing is left at `path` if any step fails.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Result<String, ImageError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() || b == b'#' {
                break;
            }
            self.pos += 1;
        }
        if start == self.pos {
            return Err(ImageError::Format("unexpected end of header".into()));
        }
        Ok(String::from_utf8_lossy(&self.bytes[start..self.pos]).into_owned())
    }

    fn number(&mut self) -> Result<u32, ImageError> {
        let tok = self.token()?;
        tok.parse::<u32>()
            .map_err(|_| ImageError::Format(format!("expected a number, got {tok:?}")))
    }
}
