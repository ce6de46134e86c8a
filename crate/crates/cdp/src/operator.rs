use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use accelwf::solvers::GradientOracle;
use accelwf::{Error, Result};
use ndarray::Array1;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::masks::CdpMasks;

/// Unitary 2-D DFT on row-major `height × width` images.
struct Fft2 {
    height: usize,
    width: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    fn new(height: usize, width: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            height,
            width,
            row_fwd: planner.plan_fft_forward(width),
            col_fwd: planner.plan_fft_forward(height),
            row_inv: planner.plan_fft_inverse(width),
            col_inv: planner.plan_fft_inverse(height),
        }
    }

    fn apply(&self, data: &mut [Complex64], inverse: bool) {
        let (row, col) = if inverse {
            (&self.row_inv, &self.col_inv)
        } else {
            (&self.row_fwd, &self.col_fwd)
        };
        let (h, w) = (self.height, self.width);
        let mut scratch = vec![Complex64::default(); row.get_inplace_scratch_len().max(col.get_inplace_scratch_len())];
        row.process_with_scratch(data, &mut scratch);
        let mut cols = vec![Complex64::default(); h * w];
        for i in 0..h {
            for j in 0..w {
                cols[j * h + i] = data[i * w + j];
            }
        }
        col.process_with_scratch(&mut cols, &mut scratch);
        let scale = 1.0 / ((h * w) as f64).sqrt();
        for i in 0..h {
            for j in 0..w {
                data[i * w + j] = cols[j * h + i] * scale;
            }
        }
    }
}

/// The stacked measurement operator `A z = (F(d_1 ⊙ z), …, F(d_L ⊙ z))`
/// with `F` the unitary 2-D DFT. Counts every 2-D transform it performs.
pub struct CdpOperator {
    masks: CdpMasks,
    fft: Fft2,
    ffts: AtomicUsize,
}

impl std::fmt::Debug for CdpOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CdpOperator")
            .field("masks", &self.masks.count())
            .field("height", &self.masks.height())
            .field("width", &self.masks.width())
            .field("ffts", &self.fft_count())
            .finish()
    }
}

impl CdpOperator {
    pub fn new(masks: CdpMasks) -> Self {
        let fft = Fft2::new(masks.height(), masks.width());
        Self {
            masks,
            fft,
            ffts: AtomicUsize::new(0),
        }
    }

    pub fn masks(&self) -> &CdpMasks {
        &self.masks
    }

    pub fn n(&self) -> usize {
        self.masks.n()
    }

    pub fn m(&self) -> usize {
        self.masks.m()
    }

    /// 2-D transforms performed so far (forward and inverse).
    pub fn fft_count(&self) -> usize {
        self.ffts.load(Ordering::Relaxed)
    }

    fn check(&self, what: &str, got: usize, expected: usize) -> Result<()> {
        if got == expected {
            Ok(())
        } else {
            Err(Error::domain(format!("{what} has length {got}, expected {expected}")))
        }
    }

    /// `A z`, one block of length `n` per mask.
    pub fn forward(&self, z: &Array1<Complex64>) -> Result<Vec<Vec<Complex64>>> {
        self.check("signal", z.len(), self.n())?;
        let out = self
            .masks
            .iter()
            .collect::<Vec<_>>()
            .par_iter()
            .map(|d| {
                let mut block: Vec<Complex64> = d.iter().zip(z.iter()).map(|(a, b)| a * b).collect();
                self.fft.apply(&mut block, false);
                block
            })
            .collect();
        self.ffts.fetch_add(self.masks.count(), Ordering::Relaxed);
        Ok(out)
    }

    /// `Aᴴ w = Σ_l conj(d_l) ⊙ F⁻¹ w_l`, summed in mask order.
    pub fn adjoint(&self, blocks: Vec<Vec<Complex64>>) -> Result<Array1<Complex64>> {
        self.check("block count", blocks.len(), self.masks.count())?;
        for b in &blocks {
            self.check("block", b.len(), self.n())?;
        }
        let parts: Vec<Vec<Complex64>> = blocks
            .into_par_iter()
            .enumerate()
            .map(|(l, mut b)| {
                self.fft.apply(&mut b, true);
                for (v, d) in b.iter_mut().zip(self.masks.mask(l)) {
                    *v *= d.conj();
                }
                b
            })
            .collect();
        self.ffts.fetch_add(self.masks.count(), Ordering::Relaxed);
        let mut out = Array1::zeros(self.n());
        for p in parts {
            for (o, v) in out.iter_mut().zip(p) {
                *o += v;
            }
        }
        Ok(out)
    }

    /// `(1/m) Aᴴ (w ⊙ A z)` for a real weight per measurement.
    pub fn weighted_normal(&self, z: &Array1<Complex64>, weights: &[f64]) -> Result<Array1<Complex64>> {
        self.check("weights", weights.len(), self.m())?;
        let mut blocks = self.forward(z)?;
        for (block, w) in blocks.iter_mut().zip(weights.chunks(self.n())) {
            for (v, w) in block.iter_mut().zip(w) {
                *v *= *w;
            }
        }
        Ok(self.adjoint(blocks)? / Complex64::new(self.m() as f64, 0.0))
    }
}

/// `|F(d_l ⊙ z)|²` for every mask, concatenated in mask order.
pub fn cdp_observe(z: &Array1<Complex64>, op: &CdpOperator) -> Result<Vec<f64>> {
    Ok(op.forward(z)?.into_iter().flatten().map(|v| v.norm_sqr()).collect())
}

/// `f(z) = 1/(4m) Σ (|(Az)_k|² − y_k)²` over the stacked measurements.
pub struct CdpObjective<'a> {
    op: &'a CdpOperator,
    y: &'a [f64],
}

impl<'a> CdpObjective<'a> {
    pub fn new(op: &'a CdpOperator, y: &'a [f64]) -> Result<Self> {
        if y.len() != op.m() {
            return Err(Error::domain(format!("{} observations for {} measurements", y.len(), op.m())));
        }
        if y.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::domain("observations must be finite and nonnegative"));
        }
        Ok(Self { op, y })
    }

    pub fn cost(&self, z: &Array1<Complex64>) -> Result<f64> {
        let blocks = self.op.forward(z)?;
        let s: f64 = blocks
            .iter()
            .flatten()
            .zip(self.y)
            .map(|(v, y)| (v.norm_sqr() - y).powi(2))
            .sum();
        Ok(s / (4.0 * self.op.m() as f64))
    }
}

impl GradientOracle<Complex64> for CdpObjective<'_> {
    fn dim(&self) -> usize {
        self.op.n()
    }

    /// `(1/m) Aᴴ((|Az|² − y) ⊙ Az)`: one forward and one inverse transform
    /// per mask.
    fn gradient(&self, z: &Array1<Complex64>) -> Result<Array1<Complex64>> {
        let mut blocks = self.op.forward(z)?;
        for (block, y) in blocks.iter_mut().zip(self.y.chunks(self.op.n())) {
            for (v, y) in block.iter_mut().zip(y) {
                *v *= v.norm_sqr() - y;
            }
        }
        Ok(self.op.adjoint(blocks)? / Complex64::new(self.op.m() as f64, 0.0))
    }
}

/// Free-function form of [`CdpObjective`]'s gradient.
pub fn cdp_gradient(z: &Array1<Complex64>, y: &[f64], op: &CdpOperator) -> Result<Array1<Complex64>> {
    CdpObjective::new(op, y)?.gradient(z)
}
