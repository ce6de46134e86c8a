//! Problem setup, single runs and head-to-head slope fits.

use accelwf::init::{random_init, spectral_init, DEFAULT_POWER_ITERS, DEFAULT_POWER_TOL};
use accelwf::model::observe;
use accelwf::solvers::{self, default_params, Method, SolverParams, Status, DEFAULT_TOL};
use accelwf::{GroundTruth, IterationTrace, Observations, SensingEnsemble};
use ndarray::Array1;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, InitMode};
use crate::error::Result;

/// Upper end of the error window used for slope fits.
pub const SLOPE_WINDOW_TOP: f64 = 0.5;

/// Ensemble `(m, n, seed)`, unit ground truth from the same seed and its
/// noiseless observations.
#[derive(Debug, Clone)]
pub struct Problem {
    pub ens: SensingEnsemble,
    pub gt: GroundTruth,
    pub y: Observations,
}

impl Problem {
    pub fn sample(n: usize, m: usize, seed: u64) -> Result<Self> {
        let ens = SensingEnsemble::sample(m, n, seed)?;
        let gt = GroundTruth::unit(n, seed)?;
        let y = observe(&ens, &gt)?;
        Ok(Self { ens, gt, y })
    }

    /// Spectral estimate, or a uniform point on the unit sphere.
    pub fn initial_point(&self, init: InitMode, seed: u64) -> Result<Array1<f64>> {
        Ok(match init {
            InitMode::Spectral => {
                spectral_init(&self.ens, &self.y, DEFAULT_POWER_TOL, DEFAULT_POWER_ITERS)?.x0
            }
            InitMode::Random => random_init(self.ens.n(), seed, 1.0)?,
        })
    }
}

/// Default schedule for `x0` with the config's overrides applied. Gradient
/// descent ignores a momentum override.
pub fn params_for(
    cfg: &ExperimentConfig,
    n: usize,
    x0: &Array1<f64>,
    method: Method,
) -> Result<SolverParams> {
    let mut p = default_params(n, x0.dot(x0).sqrt(), method)?;
    if let Some(eta) = cfg.eta {
        p.eta = eta;
    }
    if let (Some(beta), true) = (cfg.beta, method.is_momentum()) {
        p.beta = beta;
    }
    if let Some(tol) = cfg.tol {
        p.tol = tol;
    }
    if let Some(k) = cfg.max_iters {
        p.max_iters = k;
    }
    p.validate()?;
    Ok(p)
}

pub fn solve(
    cfg: &ExperimentConfig,
    n: usize,
    m: usize,
    seed: u64,
    method: Method,
) -> Result<IterationTrace> {
    let p = Problem::sample(n, m, seed)?;
    let x0 = p.initial_point(cfg.init, seed)?;
    let params = params_for(cfg, n, &x0, method)?;
    Ok(solvers::run(&p.ens, &p.y, &x0, &params, Some(&p.gt))?)
}

/// One seed of a head-to-head comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadToHead {
    pub seed: u64,
    pub baseline: Method,
    pub accelerated: Method,
    pub baseline_status: Status,
    pub accelerated_status: Status,
    /// `(t, log dist_baseline(t), log dist_accelerated(t))` over the window.
    pub pairs: Vec<(usize, f64, f64)>,
    /// Present only when both runs converged and the window holds two
    /// distinct points.
    pub slope: Option<f64>,
}

pub fn head_to_head(
    cfg: &ExperimentConfig,
    n: usize,
    m: usize,
    seed: u64,
    baseline: Method,
    accelerated: Method,
) -> Result<HeadToHead> {
    let p = Problem::sample(n, m, seed)?;
    let x0 = p.initial_point(cfg.init, seed)?;
    let run = |method| -> Result<IterationTrace> {
        let params = params_for(cfg, n, &x0, method)?;
        Ok(solvers::run(&p.ens, &p.y, &x0, &params, Some(&p.gt))?)
    };
    let a = run(baseline)?;
    let b = run(accelerated)?;
    let lo = cfg.tol.unwrap_or(DEFAULT_TOL);
    let in_window = |d: f64| (lo..=SLOPE_WINDOW_TOP).contains(&d);
    let pairs: Vec<(usize, f64, f64)> = a
        .dists()
        .into_iter()
        .zip(b.dists())
        .enumerate()
        .filter(|(_, (da, db))| in_window(*da) && in_window(*db))
        .map(|(t, (da, db))| (t, da.ln(), db.ln()))
        .collect();
    let converged = a.status == Status::Converged && b.status == Status::Converged;
    let slope = if converged { fit_slope(&pairs) } else { None };
    Ok(HeadToHead {
        seed,
        baseline,
        accelerated,
        baseline_status: a.status,
        accelerated_status: b.status,
        pairs,
        slope,
    })
}

/// Least-squares slope of the third component against the second.
pub fn fit_slope(pairs: &[(usize, f64, f64)]) -> Option<f64> {
    if pairs.len() < 2 {
        return None;
    }
    let k = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.1).sum::<f64>() / k;
    let my = pairs.iter().map(|p| p.2).sum::<f64>() / k;
    let sxx: f64 = pairs.iter().map(|p| (p.1 - mx).powi(2)).sum();
    let sxy: f64 = pairs.iter().map(|p| (p.1 - mx) * (p.2 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Mean head-to-head slope for one `n` and accelerated method.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeRow {
    pub n: usize,
    pub m: usize,
    pub accelerated: Method,
    /// Mean over the seeds that produced a slope.
    pub mean_slope: Option<f64>,
    pub reference: f64,
    pub seeds_fitted: usize,
    pub seeds: usize,
    /// Mean slope within ±30% of `√log n`.
    pub in_band: bool,
}

pub const SLOPE_BAND: f64 = 0.3;

/// Head-to-head slopes of `methods[0]` against every later method, for
/// each `n` and seed; seeds run in parallel.
pub fn slopes(cfg: &ExperimentConfig) -> Result<Vec<SlopeRow>> {
    let baseline = cfg.methods[0];
    let mut rows = Vec::new();
    for (i, &n) in cfg.n_list.iter().enumerate() {
        let m = cfg.m_for(i);
        for &accelerated in &cfg.methods[1..] {
            let fits: Vec<HeadToHead> = cfg
                .seed_list
                .par_iter()
                .map(|&seed| head_to_head(cfg, n, m, seed, baseline, accelerated))
                .collect::<Result<_>>()?;
            let fitted: Vec<f64> = fits.iter().filter_map(|h| h.slope).collect();
            let mean_slope =
                (!fitted.is_empty()).then(|| fitted.iter().sum::<f64>() / fitted.len() as f64);
            let reference = (n as f64).ln().sqrt();
            rows.push(SlopeRow {
                n,
                m,
                accelerated,
                mean_slope,
                reference,
                seeds_fitted: fitted.len(),
                seeds: fits.len(),
                in_band: mean_slope
                    .is_some_and(|s| (s - reference).abs() <= SLOPE_BAND * reference),
            });
        }
    }
    Ok(rows)
}

/// Mean slopes non-decreasing in `n`, separately for each accelerated
/// method. Rows without a slope break monotonicity.
pub fn slopes_monotone(rows: &[SlopeRow]) -> bool {
    let mut methods: Vec<Method> = rows.iter().map(|r| r.accelerated).collect();
    methods.dedup();
    methods.iter().all(|&method| {
        let mut seq: Vec<&SlopeRow> = rows.iter().filter(|r| r.accelerated == method).collect();
        seq.sort_by_key(|r| r.n);
        seq.windows(2)
            .all(|w| match (w[0].mean_slope, w[1].mean_slope) {
                (Some(a), Some(b)) => b >= a,
                _ => false,
            })
            && seq.iter().all(|r| r.mean_slope.is_some())
    })
}
