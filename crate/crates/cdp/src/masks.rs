use accelwf::{rng, Error, Result};
use num_complex::Complex64;

/// `L` random modulation patterns for an `height × width` image.
///
/// Each entry is `b1 · b2` with `b1` uniform on `{1, −1, i, −i}` and `b2`
/// equal to `√2/2` with probability 4/5 and `√3` with probability 1/5, so
/// `E|d|² = 1`. Mask `l` is drawn from stream `(seed, l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CdpMasks {
    height: usize,
    width: usize,
    seed: u64,
    masks: Vec<Vec<Complex64>>,
}

impl CdpMasks {
    pub fn sample(l: usize, height: usize, width: usize, seed: u64) -> Result<Self> {
        if l == 0 || height == 0 || width == 0 {
            return Err(Error::domain(format!(
                "mask count and image size must be positive (L = {l}, {height}x{width})"
            )));
        }
        let n = height * width;
        let masks = (0..l)
            .map(|k| {
                let mut r = rng::stream(seed, k as u64);
                (0..n)
                    .map(|_| {
                        let phase = match (rng::uniform(&mut r) * 4.0) as u32 {
                            0 => Complex64::new(1.0, 0.0),
                            1 => Complex64::new(-1.0, 0.0),
                            2 => Complex64::new(0.0, 1.0),
                            _ => Complex64::new(0.0, -1.0),
                        };
                        let amp = if rng::uniform(&mut r) < 0.8 {
                            std::f64::consts::FRAC_1_SQRT_2
                        } else {
                            3f64.sqrt()
                        };
                        phase * amp
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            height,
            width,
            seed,
            masks,
        })
    }

    /// Explicit masks; each must have `height · width` entries.
    pub fn from_masks(height: usize, width: usize, masks: Vec<Vec<Complex64>>) -> Result<Self> {
        if masks.is_empty() || masks.iter().any(|m| m.len() != height * width) || height * width == 0 {
            return Err(Error::domain("every mask must match the image size"));
        }
        Ok(Self {
            height,
            width,
            seed: 0,
            masks,
        })
    }

    pub fn count(&self) -> usize {
        self.masks.len()
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Pixels per image.
    pub fn n(&self) -> usize {
        self.height * self.width
    }

    /// Total number of measurements `L · n`.
    pub fn m(&self) -> usize {
        self.count() * self.n()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn mask(&self, l: usize) -> &[Complex64] {
        &self.masks[l]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[Complex64]> {
        self.masks.iter().map(|m| m.as_slice())
    }

    /// `Σ_l |d_lj|²` for each pixel `j`.
    pub fn energy(&self) -> Vec<f64> {
        (0..self.n())
            .map(|j| self.masks.iter().map(|m| m[j].norm_sqr()).sum())
            .collect()
    }

    /// Mean squared norm of a measurement row, `(1/Ln) Σ_{l,j} |d_lj|²`
    /// (the unitary transform spreads each mask entry evenly over a row).
    pub fn mean_row_norm_sqr(&self) -> f64 {
        self.energy().iter().sum::<f64>() / self.m() as f64
    }
}
