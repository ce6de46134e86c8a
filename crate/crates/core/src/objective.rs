//! The quartic least-squares cost, its gradient, Hessian and Hessian–vector
//! product.
//!
//! All sums over measurements are accumulated in fixed blocks of
//! [`ROW_BLOCK`] rows, and the per-block partial sums are combined in block
//! order. Blocks may be evaluated on several threads, but the result is
//! bitwise identical to a sequential evaluation for a fixed `m`.

use ndarray::{Array1, Array2, Axis};
use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::model::{Observations, SensingEnsemble};
use crate::solvers::GradientOracle;

/// Rows per reduction block.
pub const ROW_BLOCK: usize = 128;

/// Largest dimension for which [`PhaseObjective::hessian`] materialises the
/// dense matrix.
pub const DENSE_HESSIAN_LIMIT: usize = 512;

// Below this many multiply-adds per pass the blocks are evaluated on the
// calling thread.
const PARALLEL_WORK: usize = 1 << 16;

/// `f(x) = 1/(4m) Σ_i ((a_i·x)² − y_i)²`, optionally with one measurement
/// left out.
///
/// A leave-one-out objective skips row `ℓ` entirely (it is never read) but
/// keeps the `1/(4m)` normalisation of the full problem.
#[derive(Debug, Clone, Copy)]
pub struct PhaseObjective<'a> {
    ens: &'a SensingEnsemble,
    y: &'a Array1<f64>,
    skip: Option<usize>,
}

/// Cost and gradient at one point, together with the projections `a_i · x`
/// computed on the way.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub cost: f64,
    pub gradient: Array1<f64>,
    /// `a_i · x`; NaN for a left-out row.
    pub projections: Array1<f64>,
}

struct Partial {
    cost: f64,
    grad: Array1<f64>,
}

impl<'a> PhaseObjective<'a> {
    pub fn new(ens: &'a SensingEnsemble, y: &'a Observations) -> Result<Self> {
        check_len("observations", y.len(), ens.m())?;
        Ok(Self {
            ens,
            y: y.y(),
            skip: None,
        })
    }

    /// The objective with measurement `ell` (0-based) removed.
    pub fn leave_one_out(ens: &'a SensingEnsemble, y: &'a Observations, ell: usize) -> Result<Self> {
        let mut obj = Self::new(ens, y)?;
        if ell >= ens.m() {
            return Err(Error::domain(format!("left-out row {ell} out of range for m = {}", ens.m())));
        }
        obj.skip = Some(ell);
        Ok(obj)
    }

    pub fn ensemble(&self) -> &'a SensingEnsemble {
        self.ens
    }

    pub fn skipped(&self) -> Option<usize> {
        self.skip
    }

    pub fn n(&self) -> usize {
        self.ens.n()
    }

    pub fn m(&self) -> usize {
        self.ens.m()
    }

    pub fn cost(&self, x: &Array1<f64>) -> Result<f64> {
        Ok(self.evaluate(x)?.cost)
    }

    pub fn gradient(&self, x: &Array1<f64>) -> Result<Array1<f64>> {
        Ok(self.evaluate(x)?.gradient)
    }

    /// Cost, gradient and projections in a single pass over the rows.
    pub fn evaluate(&self, x: &Array1<f64>) -> Result<Evaluation> {
        check_len("x", x.len(), self.n())?;
        let m = self.m();
        let mut projections = Array1::from_elem(m, f64::NAN);
        let partials = self.blocks(projections.as_slice_mut().expect("contiguous"), |rows, y, proj, offset| {
            let mut part = Partial {
                cost: 0.0,
                grad: Array1::zeros(x.len()),
            };
            for (k, a) in rows.axis_iter(Axis(0)).enumerate() {
                if self.skip == Some(offset + k) {
                    continue;
                }
                let p = a.dot(x);
                let r = p * p - y[k];
                proj[k] = p;
                part.cost += r * r;
                part.grad.scaled_add(r * p, &a);
            }
            part
        });
        let (cost, gradient) = combine(partials, x.len());
        Ok(Evaluation {
            cost: cost / (4.0 * m as f64),
            gradient: gradient / m as f64,
            projections,
        })
    }

    /// Dense Hessian `1/m Σ_i (3(a_i·x)² − y_i) a_i a_iᵀ`, exactly symmetric.
    pub fn hessian(&self, x: &Array1<f64>) -> Result<Array2<f64>> {
        check_len("x", x.len(), self.n())?;
        let n = self.n();
        if n > DENSE_HESSIAN_LIMIT {
            return Err(Error::Capability(format!(
                "dense Hessian limited to n <= {DENSE_HESSIAN_LIMIT} (got n = {n}); use hessian_vec"
            )));
        }
        let rows = self.ens.rows();
        let mut weighted = rows.clone();
        for (i, mut row) in weighted.axis_iter_mut(Axis(0)).enumerate() {
            if self.skip == Some(i) {
                row.fill(0.0);
                continue;
            }
            let p = rows.row(i).dot(x);
            row *= 3.0 * p * p - self.y[i];
        }
        let mut h = match self.skip {
            // The left-out row is zeroed on both sides so that its contents
            // are never read, even as 0 × value.
            Some(ell) => {
                let mut kept = rows.clone();
                kept.row_mut(ell).fill(0.0);
                kept.t().dot(&weighted)
            }
            None => rows.t().dot(&weighted),
        };
        h /= self.m() as f64;
        let sym = (&h + &h.t()) * 0.5;
        h.assign(&sym);
        Ok(h)
    }

    /// `∇²f(x) v` without forming the matrix.
    pub fn hessian_vec(&self, x: &Array1<f64>, v: &Array1<f64>) -> Result<Array1<f64>> {
        check_len("x", x.len(), self.n())?;
        check_len("v", v.len(), self.n())?;
        let mut scratch = vec![0.0; self.m()];
        let partials = self.blocks(&mut scratch, |rows, y, _, offset| {
            let mut part = Partial {
                cost: 0.0,
                grad: Array1::zeros(x.len()),
            };
            for (k, a) in rows.axis_iter(Axis(0)).enumerate() {
                if self.skip == Some(offset + k) {
                    continue;
                }
                let p = a.dot(x);
                part.grad.scaled_add((3.0 * p * p - y[k]) * a.dot(v), &a);
            }
            part
        });
        Ok(combine(partials, x.len()).1 / self.m() as f64)
    }

    /// `Y v` with `Y = 1/m Σ_i y_i a_i a_iᵀ`, the matrix whose leading
    /// eigenpair gives the spectral initialisation.
    pub fn data_matrix_vec(&self, v: &Array1<f64>) -> Result<Array1<f64>> {
        check_len("v", v.len(), self.n())?;
        let mut scratch = vec![0.0; self.m()];
        let partials = self.blocks(&mut scratch, |rows, y, _, offset| {
            let mut part = Partial {
                cost: 0.0,
                grad: Array1::zeros(v.len()),
            };
            for (k, a) in rows.axis_iter(Axis(0)).enumerate() {
                if self.skip == Some(offset + k) {
                    continue;
                }
                part.grad.scaled_add(y[k] * a.dot(v), &a);
            }
            part
        });
        Ok(combine(partials, v.len()).1 / self.m() as f64)
    }

    /// Runs `f` on each block of rows, in parallel when the pass is large.
    fn blocks<F>(&self, out: &mut [f64], f: F) -> Vec<Partial>
    where
        F: Fn(ndarray::ArrayView2<'_, f64>, &[f64], &mut [f64], usize) -> Partial + Sync,
    {
        let rows = self.ens.rows();
        let y = self.y.as_slice().expect("observations are contiguous");
        let work = |(b, out): (usize, &mut [f64])| {
            let start = b * ROW_BLOCK;
            let end = (start + ROW_BLOCK).min(rows.nrows());
            f(rows.slice(ndarray::s![start..end, ..]), &y[start..end], out, start)
        };
        if rows.len() >= PARALLEL_WORK {
            out.par_chunks_mut(ROW_BLOCK).enumerate().map(work).collect()
        } else {
            out.chunks_mut(ROW_BLOCK).enumerate().map(work).collect()
        }
    }
}

fn combine(partials: Vec<Partial>, n: usize) -> (f64, Array1<f64>) {
    partials
        .into_iter()
        .fold((0.0, Array1::zeros(n)), |(c, mut g), p| {
            g += &p.grad;
            (c + p.cost, g)
        })
}

impl GradientOracle for PhaseObjective<'_> {
    fn dim(&self) -> usize {
        self.n()
    }

    fn gradient(&self, x: &Array1<f64>) -> Result<Array1<f64>> {
        PhaseObjective::gradient(self, x)
    }
}

pub fn cost(ens: &SensingEnsemble, y: &Observations, x: &Array1<f64>) -> Result<f64> {
    PhaseObjective::new(ens, y)?.cost(x)
}

pub fn gradient(ens: &SensingEnsemble, y: &Observations, x: &Array1<f64>) -> Result<Array1<f64>> {
    PhaseObjective::new(ens, y)?.gradient(x)
}

pub fn hessian(ens: &SensingEnsemble, y: &Observations, x: &Array1<f64>) -> Result<Array2<f64>> {
    PhaseObjective::new(ens, y)?.hessian(x)
}

pub fn hessian_vec(
    ens: &SensingEnsemble,
    y: &Observations,
    x: &Array1<f64>,
    v: &Array1<f64>,
) -> Result<Array1<f64>> {
    PhaseObjective::new(ens, y)?.hessian_vec(x, v)
}
