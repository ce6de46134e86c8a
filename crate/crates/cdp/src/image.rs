//! Grayscale images and the portable graymap format.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array1;
use num_complex::Complex64;

#[derive(Debug, thiserror::Error)]
pub enum ImageError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed graymap: {0}")]
    Format(String),
}

/// Row-major intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(ImageError::Format(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        if pixels.iter().any(|p| !p.is_finite()) {
            return Err(ImageError::Format("non-finite pixel".into()));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    /// Vectorised image as a complex signal.
    pub fn to_signal(&self) -> Array1<Complex64> {
        self.pixels.iter().map(|p| Complex64::new(*p, 0.0)).collect()
    }

    /// Magnitudes of a recovered signal, clipped to `[0, 1]`.
    pub fn from_signal(width: usize, height: usize, z: &Array1<Complex64>) -> Result<Self, ImageError> {
        Self::new(width, height, z.iter().map(|c| c.norm().clamp(0.0, 1.0)).collect())
    }

    pub fn read_pgm(path: &Path) -> Result<Self, ImageError> {
        let bytes = fs::read(path).map_err(|source| ImageError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        parse_pgm(&bytes)
    }

    /// Writes a binary (P5) graymap with 8-bit samples.
    pub fn write_pgm(&self, path: &Path) -> Result<(), ImageError> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.pixels.iter().map(|p| (p.clamp(0.0, 1.0) * 255.0).round() as u8));
        fs::write(path, out).map_err(|source| ImageError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Plain-text (P2) graymap with 8-bit samples.
    pub fn to_plain_pgm(&self) -> String {
        let mut s = format!("P2\n{} {}\n255\n", self.width, self.height);
        for row in self.pixels.chunks(self.width) {
            let line: Vec<String> = row.iter().map(|p| ((p.clamp(0.0, 1.0) * 255.0).round() as u8).to_string()).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        s
    }
}

/// A `width × height` test scene: a dim vertical ramp, a bright disc, a
/// mid-gray bar and a ring.
pub fn synthetic_image(width: usize, height: usize) -> GrayImage {
    let (w, h) = (width as f64, height as f64);
    let pixels = (0..width * height)
        .map(|k| {
            let (i, j) = ((k / width) as f64, (k % width) as f64);
            let (u, v) = ((j + 0.5) / w, (i + 0.5) / h);
            let mut p = 0.1 + 0.15 * v;
            let r = ((u - 0.35).powi(2) + (v - 0.4).powi(2)).sqrt();
            if r < 0.18 {
                p = 0.9;
            }
            if (0.6..0.85).contains(&u) && (0.15..0.8).contains(&v) {
                p = 0.5;
            }
            let ring = ((u - 0.5).powi(2) + (v - 0.75).powi(2)).sqrt();
            if (0.12..0.16).contains(&ring) {
                p = 0.7;
            }
            p
        })
        .collect();
    GrayImage {
        width,
        height,
        pixels,
    }
}

struct Tokens<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Tokens<'_> {
    fn skip_space(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self) -> Result<usize, ImageError> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| ImageError::Format(format!("expected a number at byte {start}")))
    }
}

/// Parses a P2 (plain) or P5 (binary, 8- or 16-bit) graymap.
pub fn parse_pgm(bytes: &[u8]) -> Result<GrayImage, ImageError> {
    if bytes.len() < 2 || bytes[0] != b'P' || !matches!(bytes[1], b'2' | b'5') {
        return Err(ImageError::Format("missing P2/P5 magic number".into()));
    }
    let binary = bytes[1] == b'5';
    let mut tok = Tokens { bytes, pos: 2 };
    let width = tok.number()?;
    let height = tok.number()?;
    let maxval = tok.number()?;
    if maxval == 0 || maxval > 65535 {
        return Err(ImageError::Format(format!("maxval {maxval} out of range")));
    }
    let count = width * height;
    let raw: Vec<usize> = if binary {
        // Exactly one whitespace byte separates the header from the raster.
        let start = tok.pos + 1;
        let depth = if maxval < 256 { 1 } else { 2 };
        let data = bytes
            .get(start..start + count * depth)
            .ok_or_else(|| ImageError::Format("raster is truncated".into()))?;
        if depth == 1 {
            data.iter().map(|b| *b as usize).collect()
        } else {
            data.chunks(2).map(|c| (c[0] as usize) << 8 | c[1] as usize).collect()
        }
    } else {
        (0..count).map(|_| tok.number()).collect::<Result<_, _>>()?
    };
    if raw.iter().any(|v| *v > maxval) {
        return Err(ImageError::Format("sample exceeds maxval".into()));
    }
    GrayImage::new(width, height, raw.iter().map(|v| *v as f64 / maxval as f64).collect())
}
