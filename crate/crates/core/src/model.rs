//! Gaussian sensing model, observations and the sign-invariant distance.

use ndarray::{Array1, Array2, ArrayView1};
use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::rng;

/// The `m × n` matrix whose rows are the sensing vectors `a_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingEnsemble {
    rows: Array2<f64>,
    seed: Option<u64>,
}

impl SensingEnsemble {
    /// Draws `m` i.i.d. standard Gaussian rows of length `n`. Row `i` comes
    /// from random stream `(seed, i)`, so the result does not depend on how
    /// the rows are scheduled across threads.
    pub fn sample(m: usize, n: usize, seed: u64) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::domain(format!(
                "ensemble dimensions must be positive (m = {m}, n = {n})"
            )));
        }
        let mut data = vec![0.0; m * n];
        data.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            let mut rng = rng::stream(seed, i as u64);
            rng::fill_standard_normal(&mut rng, row);
        });
        let rows = Array2::from_shape_vec((m, n), data).expect("shape matches buffer");
        Ok(Self {
            rows,
            seed: Some(seed),
        })
    }

    /// Wraps explicit rows. The ensemble has no seed.
    pub fn from_rows(rows: Array2<f64>) -> Result<Self> {
        if rows.nrows() == 0 || rows.ncols() == 0 {
            return Err(Error::domain("ensemble must have at least one row and column"));
        }
        Ok(Self {
            rows: rows.as_standard_layout().into_owned(),
            seed: None,
        })
    }

    pub fn m(&self) -> usize {
        self.rows.nrows()
    }

    pub fn n(&self) -> usize {
        self.rows.ncols()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn rows(&self) -> &Array2<f64> {
        &self.rows
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.rows.row(i)
    }

    /// `A v`, the vector of projections `a_i · v`.
    pub fn project(&self, v: &Array1<f64>) -> Result<Array1<f64>> {
        check_len("vector", v.len(), self.n())?;
        Ok(self.rows.dot(v))
    }

    /// Replaces row `i`. Intended for perturbation tests; the seed is
    /// dropped since the rows no longer match it.
    pub fn with_row(mut self, i: usize, values: &[f64]) -> Result<Self> {
        if i >= self.m() {
            return Err(Error::domain(format!("row {i} out of range for m = {}", self.m())));
        }
        check_len("row", values.len(), self.n())?;
        self.rows
            .row_mut(i)
            .iter_mut()
            .zip(values)
            .for_each(|(dst, &v)| *dst = v);
        self.seed = None;
        Ok(self)
    }
}

/// The signal to be recovered.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    x_star: Array1<f64>,
    norm: f64,
}

impl GroundTruth {
    pub fn new(x_star: Array1<f64>) -> Result<Self> {
        if x_star.is_empty() {
            return Err(Error::domain("ground truth must be non-empty"));
        }
        if x_star.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("ground truth has non-finite entries"));
        }
        let norm = norm2(&x_star.view());
        Ok(Self { x_star, norm })
    }

    /// A unit-norm signal drawn uniformly from the sphere.
    pub fn unit(n: usize, seed: u64) -> Result<Self> {
        Self::new(sample_unit_sphere(n, seed)?)
    }

    pub fn x_star(&self) -> &Array1<f64> {
        &self.x_star
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn n(&self) -> usize {
        self.x_star.len()
    }
}

/// Squared projections `y_i = (a_i · x_star)^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observations {
    y: Array1<f64>,
}

impl Observations {
    /// Wraps measured values; all entries must be finite and nonnegative.
    pub fn new(y: Array1<f64>) -> Result<Self> {
        if let Some(v) = y.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::domain(format!("observation {v} is not a finite nonnegative value")));
        }
        Ok(Self { y })
    }

    pub fn y(&self) -> &Array1<f64> {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// The same measurements multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(&self.y * c)
    }
}

pub fn observe(ens: &SensingEnsemble, gt: &GroundTruth) -> Result<Observations> {
    check_len("ground truth", gt.n(), ens.n())?;
    let proj = ens.project(gt.x_star())?;
    Ok(Observations {
        y: proj.mapv(|p| p * p),
    })
}

/// `min(‖x - x_star‖, ‖x + x_star‖)`.
pub fn dist(x: &Array1<f64>, x_star: &Array1<f64>) -> Result<f64> {
    check_len("x", x.len(), x_star.len())?;
    let (minus, plus) = x.iter().zip(x_star).fold((0.0, 0.0), |(m, p), (a, b)| {
        (m + (a - b) * (a - b), p + (a + b) * (a + b))
    });
    Ok(minus.min(plus).sqrt())
}

/// The sign `s ∈ {+1, -1}` minimising `‖x - s·x_star‖` (ties go to `+1`).
pub fn alignment_sign(x: &Array1<f64>, x_star: &Array1<f64>) -> Result<f64> {
    check_len("x", x.len(), x_star.len())?;
    Ok(if x.dot(x_star) >= 0.0 { 1.0 } else { -1.0 })
}

/// A uniform draw from the unit sphere `S^{n-1}`: a normalised Gaussian
/// vector from stream `(seed, STREAM_SPHERE)`.
pub fn sample_unit_sphere(n: usize, seed: u64) -> Result<Array1<f64>> {
    unit_gaussian_direction(n, seed, rng::STREAM_SPHERE)
}

/// A unit direction from stream `(seed, STREAM_PROBE)`, independent of any
/// ensemble or ground truth drawn from the same seed.
pub fn sample_probe(n: usize, seed: u64) -> Result<Array1<f64>> {
    unit_gaussian_direction(n, seed, rng::STREAM_PROBE)
}

pub(crate) fn unit_gaussian_direction(n: usize, seed: u64, stream: u64) -> Result<Array1<f64>> {
    if n == 0 {
        return Err(Error::domain("dimension must be positive"));
    }
    let mut rng = rng::stream(seed, stream);
    let mut v = vec![0.0; n];
    // A zero vector has probability zero but would poison the normalisation.
    loop {
        rng::fill_standard_normal(&mut rng, &mut v);
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 0.0 {
            return Ok(Array1::from_iter(v.iter().map(|a| a / norm)));
        }
    }
}

pub(crate) fn norm2(v: &ArrayView1<'_, f64>) -> f64 {
    v.dot(v).sqrt()
}
