use accelwf::solvers::{default_params, step, Method, SolverState, Status};
use accelwf::{rng, Error, Result};
use ndarray::Array1;
use num_complex::Complex64;

use crate::image::GrayImage;
use crate::masks::CdpMasks;
use crate::operator::{cdp_observe, CdpObjective, CdpOperator};

/// `min_θ ‖e^{iθ} z − z⋆‖ / ‖z⋆‖`, attained at `e^{iθ} = ⟨z, z⋆⟩ / |⟨z, z⋆⟩|`.
pub fn relative_error(z: &Array1<Complex64>, truth: &Array1<Complex64>) -> f64 {
    let inner: Complex64 = z.iter().zip(truth.iter()).map(|(a, b)| a.conj() * b).sum();
    let phase = if inner.norm() > 0.0 {
        inner / inner.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    let diff: f64 = z.iter().zip(truth.iter()).map(|(a, b)| (a * phase - b).norm_sqr()).sum();
    let scale: f64 = truth.iter().map(|b| b.norm_sqr()).sum();
    (diff / scale).sqrt()
}

fn norm(v: &Array1<Complex64>) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdpInit {
    pub z0: Array1<Complex64>,
    pub power_iters_used: usize,
    pub residual: f64,
}

/// Spectral initialisation: direction from power iteration on
/// `z ↦ (1/m) Aᴴ(y ⊙ Az)` (start vector from stream `(seed, STREAM_POWER)`),
/// norm from `‖z‖² ≈ Σ y / mean_j Σ_l |d_lj|²`.
pub fn cdp_spectral_init(op: &CdpOperator, y: &[f64], seed: u64, tol: f64, max_iters: usize) -> Result<CdpInit> {
    if y.len() != op.m() {
        return Err(Error::domain(format!("{} observations for {} measurements", y.len(), op.m())));
    }
    let n = op.n();
    let g = rng::normal_vec(seed, rng::STREAM_POWER, 2 * n);
    let mut v = Array1::from_shape_fn(n, |j| Complex64::new(g[2 * j], g[2 * j + 1]));
    v /= Complex64::new(norm(&v), 0.0);
    let mut residual = f64::INFINITY;
    let mut found = None;
    for k in 0..max_iters {
        let w = op.weighted_normal(&v, y)?;
        let lambda: f64 = v.iter().zip(w.iter()).map(|(a, b)| (a.conj() * b).re).sum();
        if !(lambda > 0.0) {
            return Err(Error::DegenerateSpectrum(lambda));
        }
        residual = norm(&(&w - &(&v * Complex64::new(lambda, 0.0))));
        let wn = norm(&w);
        v = w / Complex64::new(wn, 0.0);
        if residual <= tol * lambda {
            found = Some(k + 1);
            break;
        }
    }
    let iters = found.ok_or(Error::NonConvergence {
        iterations: max_iters,
        residual,
    })?;
    let energy = op.masks().energy();
    let mean_energy = energy.iter().sum::<f64>() / energy.len() as f64;
    let scale = (y.iter().sum::<f64>() / mean_energy).sqrt();
    Ok(CdpInit {
        z0: v * Complex64::new(scale, 0.0),
        power_iters_used: iters,
        residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdpOptions {
    pub masks: usize,
    pub method: Method,
    pub iters: usize,
    pub seed: u64,
    pub power_tol: f64,
    pub power_iters: usize,
    /// Overrides for the step size and momentum of the default schedule.
    pub eta: Option<f64>,
    pub beta: Option<f64>,
}

impl CdpOptions {
    pub fn new(masks: usize, method: Method, iters: usize, seed: u64) -> Self {
        Self {
            masks,
            method,
            iters,
            seed,
            power_tol: 1e-4,
            power_iters: 5000,
            eta: None,
            beta: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdpTrace {
    pub method: Method,
    pub eta: f64,
    pub beta: f64,
    /// Relative error of the initial point, then of each iterate.
    pub rel_err: Vec<f64>,
    /// 2-D transforms spent on each iteration.
    pub ffts_per_iter: Vec<usize>,
    pub init_ffts: usize,
    pub status: Status,
    pub estimate: Array1<Complex64>,
}

/// Recovers `image` from `L` coded diffraction patterns.
///
/// The step size is the default `0.05 / (log n · ‖z0‖²)` rescaled by
/// `(n / r̄)²`, where `r̄` is the mean squared row norm of the operator: the
/// unitary transform gives rows of norm about 1 where Gaussian rows have
/// norm about `√n`, which shrinks the curvature by `n²`.
pub fn cdp_run(image: &GrayImage, l: usize, method: Method, iters: usize, seed: u64) -> Result<CdpTrace> {
    cdp_run_with(image, &CdpOptions::new(l, method, iters, seed))
}

pub fn cdp_run_with(image: &GrayImage, opts: &CdpOptions) -> Result<CdpTrace> {
    let masks = CdpMasks::sample(opts.masks, image.height(), image.width(), opts.seed)?;
    let op = CdpOperator::new(masks);
    let truth = image.to_signal();
    if norm(&truth) == 0.0 {
        return Err(Error::domain("image is identically zero"));
    }
    let y = cdp_observe(&truth, &op)?;
    let before = op.fft_count();
    let init = cdp_spectral_init(&op, &y, opts.seed, opts.power_tol, opts.power_iters)?;
    let init_ffts = op.fft_count() - before;

    let n = op.n();
    let defaults = default_params(n, norm(&init.z0), opts.method)?;
    let rescale = (n as f64 / op.masks().mean_row_norm_sqr()).powi(2);
    let eta = opts.eta.unwrap_or(defaults.eta * rescale);
    let beta = if opts.method.is_momentum() {
        opts.beta.unwrap_or(defaults.beta)
    } else {
        0.0
    };
    if !(eta > 0.0) || !(0.0..1.0).contains(&beta) {
        return Err(Error::domain(format!("invalid step size {eta} or momentum {beta}")));
    }

    let obj = CdpObjective::new(&op, &y)?;
    let mut state = SolverState::new(init.z0);
    let mut rel_err = vec![relative_error(&state.x_curr, &truth)];
    let mut ffts_per_iter = Vec::with_capacity(opts.iters);
    let mut status = Status::MaxIters;
    for _ in 0..opts.iters {
        let before = op.fft_count();
        match step(&state, &obj, opts.method, eta, beta) {
            Ok(next) => state = next,
            Err(Error::Divergence { .. }) => {
                status = Status::Diverged;
                break;
            }
            Err(e) => return Err(e),
        }
        ffts_per_iter.push(op.fft_count() - before);
        rel_err.push(relative_error(&state.x_curr, &truth));
    }
    Ok(CdpTrace {
        method: opts.method,
        eta,
        beta,
        rel_err,
        ffts_per_iter,
        init_ffts,
        status,
        estimate: state.x_curr,
    })
}
