//! Spectral and random initialisation.

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::model::{unit_gaussian_direction, Observations, SensingEnsemble};
use crate::objective::PhaseObjective;
use crate::rng;

pub const DEFAULT_POWER_TOL: f64 = 1e-10;
pub const DEFAULT_POWER_ITERS: usize = 1000;

/// Result of the spectral initialisation.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralReport {
    /// `sqrt(lambda1 / 3) · v`, with `v` the unit leading eigenvector.
    pub x0: Array1<f64>,
    pub lambda1: f64,
    pub power_iters_used: usize,
    /// `‖Y v − λ₁ v‖` at the returned eigenvector.
    pub residual: f64,
}

/// Leading eigenpair found by [`power_iteration`].
#[derive(Debug, Clone, PartialEq)]
pub struct PowerIteration {
    pub vector: Array1<f64>,
    pub eigenvalue: f64,
    pub iterations: usize,
    pub residual: f64,
    /// Rayleigh quotient after each operator application.
    pub rayleigh: Vec<f64>,
}

/// Power iteration for the leading eigenpair of a symmetric positive
/// semidefinite operator.
///
/// Each step applies the operator once to the current unit vector `v`,
/// reads off the Rayleigh quotient `λ = vᵀ(Yv)` and the residual
/// `‖Yv − λv‖`, and stops as soon as the residual is at most `tol · λ`. The
/// returned vector has its first nonzero component positive.
pub fn power_iteration<F>(apply: F, start: Array1<f64>, tol: f64, max_iters: usize) -> Result<PowerIteration>
where
    F: Fn(&Array1<f64>) -> Result<Array1<f64>>,
{
    if !(tol > 0.0) {
        return Err(Error::domain(format!("power iteration tolerance must be positive (got {tol})")));
    }
    let start_norm = start.dot(&start).sqrt();
    if !(start_norm > 0.0 && start_norm.is_finite()) {
        return Err(Error::domain("power iteration needs a nonzero finite start vector"));
    }
    let mut v = start / start_norm;
    let mut rayleigh = Vec::new();
    let mut residual = f64::INFINITY;
    for k in 0..max_iters {
        let w = apply(&v)?;
        let lambda = v.dot(&w);
        rayleigh.push(lambda);
        if !(lambda > 0.0) {
            return Err(Error::DegenerateSpectrum(lambda));
        }
        residual = (&w - &(&v * lambda)).mapv(|d| d * d).sum().sqrt();
        if residual <= tol * lambda {
            canonicalize_sign(&mut v);
            return Ok(PowerIteration {
                vector: v,
                eigenvalue: lambda,
                iterations: k + 1,
                residual,
                rayleigh,
            });
        }
        let norm = w.dot(&w).sqrt();
        v = w / norm;
    }
    Err(Error::NonConvergence {
        iterations: max_iters,
        residual,
    })
}

fn canonicalize_sign(v: &mut Array1<f64>) {
    if let Some(&first) = v.iter().find(|c| **c != 0.0) {
        if first < 0.0 {
            v.mapv_inplace(|c| -c);
        }
    }
}

/// Spectral initialisation from the leading eigenpair of an arbitrary
/// operator standing in for `Y`; the power iteration starts from the
/// Gaussian draw of stream `(seed, STREAM_POWER)`.
pub fn spectral_init_with<F>(n: usize, apply: F, seed: u64, tol: f64, max_iters: usize) -> Result<SpectralReport>
where
    F: Fn(&Array1<f64>) -> Result<Array1<f64>>,
{
    if n == 0 {
        return Err(Error::domain("dimension must be positive"));
    }
    let start = Array1::from(rng::normal_vec(seed, rng::STREAM_POWER, n));
    let eig = power_iteration(apply, start, tol, max_iters)?;
    Ok(SpectralReport {
        x0: &eig.vector * (eig.eigenvalue / 3.0).sqrt(),
        lambda1: eig.eigenvalue,
        power_iters_used: eig.iterations,
        residual: eig.residual,
    })
}

/// Spectral initialisation `x0 = sqrt(λ₁(Y)/3) · v₁(Y)` with
/// `Y = 1/m Σ y_i a_i a_iᵀ` applied matrix-free.
///
/// The power iteration starts from stream `(seed, STREAM_POWER)` of the
/// ensemble's seed (0 for an ensemble built from explicit rows).
pub fn spectral_init(ens: &SensingEnsemble, y: &Observations, tol: f64, max_iters: usize) -> Result<SpectralReport> {
    let obj = PhaseObjective::new(ens, y)?;
    spectral_init_with(
        ens.n(),
        |v| obj.data_matrix_vec(v),
        ens.seed().unwrap_or(0),
        tol,
        max_iters,
    )
}

/// `radius` times a uniform draw from the unit sphere (stream
/// `(seed, STREAM_INIT)`, distinct from the stream used for ground truths).
pub fn random_init(n: usize, seed: u64, radius: f64) -> Result<Array1<f64>> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::domain(format!("radius must be positive (got {radius})")));
    }
    Ok(unit_gaussian_direction(n, seed, rng::STREAM_INIT)? * radius)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{dist, observe, sample_unit_sphere, GroundTruth};

    #[test]
    fn population_operator_recovers_signal() {
        // E[y a aᵀ] = ‖x‖² I + 2 x xᵀ for a ~ N(0, I).
        let x = sample_unit_sphere(7, 3).unwrap() * 1.5;
        let pop = |v: &Array1<f64>| Ok(v * x.dot(&x) + &x * (2.0 * x.dot(v)));
        let rep = spectral_init_with(7, pop, 0, 1e-12, 1000).unwrap();
        assert!((rep.lambda1 - 3.0 * 2.25).abs() < 1e-10);
        assert!(dist(&rep.x0, &x).unwrap() < 1e-8);
    }

    #[test]
    fn report_invariants() {
        let ens = SensingEnsemble::sample(400, 10, 1).unwrap();
        let y = observe(&ens, &GroundTruth::unit(10, 1).unwrap()).unwrap();
        let rep = spectral_init(&ens, &y, 1e-10, 1000).unwrap();
        let norm = rep.x0.dot(&rep.x0).sqrt();
        assert!((norm / (rep.lambda1 / 3.0).sqrt() - 1.0).abs() < 1e-10);
        assert!(rep.residual <= 1e-10 * rep.lambda1);
        let first = rep.x0.iter().find(|c| **c != 0.0).unwrap();
        assert!(*first > 0.0);
        assert_eq!(rep, spectral_init(&ens, &y, 1e-10, 1000).unwrap());
    }

    #[test]
    fn homogeneous_in_observations() {
        let ens = SensingEnsemble::sample(300, 6, 2).unwrap();
        let y = observe(&ens, &GroundTruth::unit(6, 2).unwrap()).unwrap();
        let a = spectral_init(&ens, &y, 1e-12, 1000).unwrap();
        let b = spectral_init(&ens, &y.scaled(4.0).unwrap(), 1e-12, 1000).unwrap();
        assert!((b.lambda1 / a.lambda1 - 4.0).abs() < 1e-9);
        assert!((&b.x0 - &(&a.x0 * 2.0)).iter().all(|d| d.abs() < 1e-7));
    }

    #[test]
    fn zero_observations_are_degenerate() {
        let ens = SensingEnsemble::sample(10, 3, 0).unwrap();
        let y = Observations::new(Array1::zeros(10)).unwrap();
        assert!(matches!(spectral_init(&ens, &y, 1e-10, 100), Err(Error::DegenerateSpectrum(_))));
    }

    #[test]
    fn non_convergence_carries_residual() {
        let ens = SensingEnsemble::sample(100, 20, 0).unwrap();
        let y = observe(&ens, &GroundTruth::unit(20, 0).unwrap()).unwrap();
        match spectral_init(&ens, &y, 1e-14, 2) {
            Err(Error::NonConvergence { iterations, residual }) => {
                assert_eq!(iterations, 2);
                assert!(residual.is_finite() && residual > 0.0);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
        assert!(spectral_init(&ens, &y, 0.0, 10).is_err());
    }

    #[test]
    fn random_init_draws() {
        let v = random_init(9, 4, 2.5).unwrap();
        assert!((v.dot(&v).sqrt() - 2.5).abs() < 1e-12);
        assert_eq!(v, random_init(9, 4, 2.5).unwrap());
        assert_ne!(v, random_init(9, 5, 2.5).unwrap());
        assert!(random_init(0, 1, 1.0).is_err());
        assert!(random_init(3, 1, 0.0).is_err());
    }
}
