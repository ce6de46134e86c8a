//! Eigenvalue helpers used by the diagnostics.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2};

use crate::rng;

/// Lanczos step cap for large symmetric operators.
pub const LANCZOS_MAX_STEPS: usize = 200;
/// Residual tolerance (relative to the spectral scale) for Lanczos Ritz values.
pub const LANCZOS_TOL: f64 = 1e-8;

pub(crate) fn to_nalgebra(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

/// `(λ_min, λ_max)` of a symmetric matrix via dense eigendecomposition.
pub fn symmetric_extremes(a: &Array2<f64>) -> (f64, f64) {
    let eig = nalgebra::SymmetricEigen::new(to_nalgebra(a));
    eig.eigenvalues
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Largest modulus among the (complex) eigenvalues of a square matrix.
pub fn spectral_radius(a: &Array2<f64>) -> f64 {
    let schur = nalgebra::Schur::new(to_nalgebra(a));
    schur
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Largest singular value.
pub fn spectral_norm(a: &Array2<f64>) -> f64 {
    nalgebra::SVD::new(to_nalgebra(a), false, false)
        .singular_values
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

/// Outcome of a Lanczos run for the extreme eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanczosExtremes {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
    /// Largest Ritz residual of the two reported values.
    pub residual: f64,
    pub converged: bool,
}

/// Extreme eigenvalues of the symmetric operator `apply` on `R^n` by Lanczos
/// with full reorthogonalisation. Stops when both extreme Ritz pairs have
/// residual below `tol` times the largest Ritz magnitude, or after
/// `max_steps` steps.
pub fn lanczos_extremes<F>(n: usize, apply: F, max_steps: usize, tol: f64, seed: u64) -> LanczosExtremes
where
    F: Fn(&Array1<f64>) -> Array1<f64>,
{
    let mut q = Array1::from(rng::normal_vec(seed, rng::STREAM_PROBE, n));
    q /= q.dot(&q).sqrt();
    let mut basis: Vec<Array1<f64>> = vec![q];
    let mut alphas = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut result = LanczosExtremes {
        min: f64::NAN,
        max: f64::NAN,
        steps: 0,
        residual: f64::INFINITY,
        converged: false,
    };
    for k in 0..max_steps.min(n) {
        let mut w = apply(&basis[k]);
        let alpha = w.dot(&basis[k]);
        alphas.push(alpha);
        // Twice-applied Gram–Schmidt against the whole basis.
        for _ in 0..2 {
            for b in &basis {
                let c = w.dot(b);
                w.scaled_add(-c, b);
            }
        }
        let beta = w.dot(&w).sqrt();

        let t = tridiagonal(&alphas, &betas);
        let eig = nalgebra::SymmetricEigen::new(t);
        let dim = alphas.len();
        let (imin, imax) = (0..dim).fold((0, 0), |(lo, hi), i| {
            let v = eig.eigenvalues[i];
            (
                if v < eig.eigenvalues[lo] { i } else { lo },
                if v > eig.eigenvalues[hi] { i } else { hi },
            )
        });
        let scale = eig.eigenvalues[imin].abs().max(eig.eigenvalues[imax].abs()).max(f64::MIN_POSITIVE);
        let res = |i: usize| beta * eig.eigenvectors[(dim - 1, i)].abs();
        result = LanczosExtremes {
            min: eig.eigenvalues[imin],
            max: eig.eigenvalues[imax],
            steps: k + 1,
            residual: res(imin).max(res(imax)),
            converged: false,
        };
        // An invariant subspace has been found when beta vanishes.
        if result.residual <= tol * scale || beta <= f64::EPSILON * scale {
            result.converged = true;
            return result;
        }
        betas.push(beta);
        basis.push(w / beta);
    }
    result
}

fn tridiagonal(alphas: &[f64], betas: &[f64]) -> DMatrix<f64> {
    let k = alphas.len();
    DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            alphas[i]
        } else if i + 1 == j {
            betas[i]
        } else if j + 1 == i {
            betas[j]
        } else {
            0.0
        }
    })
}
