//! Runtime checks for the region of incoherence and contraction (RIC).
//!
//! The convergence argument for the momentum methods rests on a handful of
//! facts that can each be measured on a concrete problem instance:
//!
//! * iterates stay close to the truth (locality, [`check_loc`]) and are not
//!   aligned with any single sensing vector (incoherence, [`check_inc`]);
//! * inside that region one momentum step acts on the stacked error
//!   `(x^t − x⋆, x^{t−1} − x⋆)` through a `2n × 2n` matrix whose norm
//!   bounds the contraction ([`contraction_matrix_hb`],
//!   [`contraction_matrix_nag`]);
//! * the iterates stay close to the leave-one-out sequences run without one
//!   measurement ([`loo_run`]);
//! * the sensing ensemble obeys the usual Gaussian concentration bounds
//!   ([`concentration_report`]).
//!
//! [`quadratic_oracle`] measures the convex rates the momentum methods are
//! compared against on a two-dimensional quadratic.

use ndarray::{s, Array1, Array2, Axis};
use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::linalg;
use crate::model::{alignment_sign, dist, GroundTruth, Observations, SensingEnsemble};
use crate::objective::PhaseObjective;
use crate::solvers::{self, GradientOracle, Method, SolverParams, SolverState};

/// Constants of the RIC: locality radius `2·c1·‖x⋆‖`, incoherence bound
/// `c2·√log n·‖x⋆‖`, leave-one-out proximity bound `c3·√(log n / n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RicConfig {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl Default for RicConfig {
    fn default() -> Self {
        Self {
            c1: 0.3,
            c2: 5.0,
            c3: 5.0,
        }
    }
}

impl RicConfig {
    pub fn validate(&self) -> Result<()> {
        if [self.c1, self.c2, self.c3].iter().all(|c| *c > 0.0 && c.is_finite()) {
            Ok(())
        } else {
            Err(Error::domain(format!("RIC constants must be positive: {self:?}")))
        }
    }

    /// `c3 · √(log n / n)`.
    pub fn loo_bound(&self, n: usize) -> f64 {
        let n = n as f64;
        self.c3 * (n.ln() / n).sqrt()
    }
}

pub fn loc_radius(gt: &GroundTruth, cfg: &RicConfig) -> f64 {
    2.0 * cfg.c1 * gt.norm()
}

/// `c2 · √log n · ‖x⋆‖`, undefined below `n = 2`.
pub fn inc_bound(n: usize, gt: &GroundTruth, cfg: &RicConfig) -> Option<f64> {
    (n >= 2).then(|| cfg.c2 * (n as f64).ln().sqrt() * gt.norm())
}

/// Locality: `dist(x, x⋆) ≤ 2·c1·‖x⋆‖` (boundary included).
pub fn check_loc(x: &Array1<f64>, gt: &GroundTruth, cfg: &RicConfig) -> Result<bool> {
    Ok(dist(x, gt.x_star())? <= loc_radius(gt, cfg))
}

/// `max_i |a_i · (x − reference)|`.
pub fn max_incoherence(ens: &SensingEnsemble, x: &Array1<f64>, reference: &Array1<f64>) -> Result<f64> {
    check_len("reference", reference.len(), x.len())?;
    let proj = ens.project(&(x - reference))?;
    Ok(proj.iter().fold(0.0, |acc, p| acc.max(p.abs())))
}

/// Incoherence: `max_i |a_i · (x − s·x⋆)| ≤ c2·√log n·‖x⋆‖`, with `s` the
/// sign aligning `x` to the truth. Returns the flag and the maximum.
pub fn check_inc(x: &Array1<f64>, gt: &GroundTruth, ens: &SensingEnsemble, cfg: &RicConfig) -> Result<(bool, f64)> {
    check_len("x", x.len(), ens.n())?;
    check_len("ground truth", gt.n(), ens.n())?;
    let bound = inc_bound(ens.n(), gt, cfg)
        .ok_or_else(|| Error::domain("incoherence needs n >= 2"))?;
    let target = gt.x_star() * alignment_sign(x, gt.x_star())?;
    let value = max_incoherence(ens, x, &target)?;
    Ok((value <= bound, value))
}

pub const DEFAULT_SEGMENT_SAMPLES: usize = 16;

/// Checks locality and incoherence at `samples` evenly spaced points of the
/// segment `[x_a, x_b]`, endpoints included. For Nesterov the caller passes
/// the extrapolated point `x^t + β(x^t − x^{t−1})` as an endpoint.
pub fn segment_in_ric(
    x_a: &Array1<f64>,
    x_b: &Array1<f64>,
    gt: &GroundTruth,
    ens: &SensingEnsemble,
    cfg: &RicConfig,
    samples: usize,
) -> Result<bool> {
    if samples < 2 {
        return Err(Error::domain("segment check needs at least two samples"));
    }
    check_len("x_b", x_b.len(), x_a.len())?;
    let step = x_b - x_a;
    for k in 0..samples {
        let tau = k as f64 / (samples - 1) as f64;
        let point = x_a + &(&step * tau);
        if !check_loc(&point, gt, cfg)? || !check_inc(&point, gt, ens, cfg)?.0 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The `2n × 2n` matrix mapping `(x^t − x⋆, x^{t−1} − x⋆)` to
/// `(x^{t+1} − x⋆, x^t − x⋆)` for a fixed Hessian.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractionMatrix {
    matrix: Array2<f64>,
}

impl ContractionMatrix {
    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn spectral_norm(&self) -> f64 {
        linalg::spectral_norm(&self.matrix)
    }

    pub fn spectral_radius(&self) -> f64 {
        linalg::spectral_radius(&self.matrix)
    }
}

fn square(hess: &Array2<f64>) -> Result<usize> {
    let n = hess.nrows();
    if hess.ncols() != n || n == 0 {
        return Err(Error::domain("Hessian must be a non-empty square matrix"));
    }
    Ok(n)
}

fn assemble(upper_left: Array2<f64>, upper_right: Array2<f64>) -> ContractionMatrix {
    let n = upper_left.nrows();
    let mut m = Array2::zeros((2 * n, 2 * n));
    m.slice_mut(s![..n, ..n]).assign(&upper_left);
    m.slice_mut(s![..n, n..]).assign(&upper_right);
    m.slice_mut(s![n.., ..n]).assign(&Array2::eye(n));
    ContractionMatrix { matrix: m }
}

/// Heavy ball: `[[(1+β)I − η∇²f(ξ), −βI], [I, 0]]`.
pub fn contraction_matrix_hb(hess: &Array2<f64>, eta: f64, beta: f64) -> Result<ContractionMatrix> {
    let n = square(hess)?;
    let eye = Array2::<f64>::eye(n);
    Ok(assemble(&eye * (1.0 + beta) - hess * eta, &eye * -beta))
}

/// Nesterov: `[[(1+β)(I − η∇²f(ξ)), −β(I − η∇²f(ξ))], [I, 0]]`.
pub fn contraction_matrix_nag(hess: &Array2<f64>, eta: f64, beta: f64) -> Result<ContractionMatrix> {
    let n = square(hess)?;
    let damped = Array2::<f64>::eye(n) - hess * eta;
    Ok(assemble(&damped * (1.0 + beta), &damped * -beta))
}

/// The contraction matrix of `method` (gradient descent uses the heavy-ball
/// form with `β = 0`).
pub fn contraction_matrix(method: Method, hess: &Array2<f64>, eta: f64, beta: f64) -> Result<ContractionMatrix> {
    match method {
        Method::GradientDescent => contraction_matrix_hb(hess, eta, 0.0),
        Method::Polyak => contraction_matrix_hb(hess, eta, beta),
        Method::Nesterov => contraction_matrix_nag(hess, eta, beta),
    }
}

/// Spectral norm of the contraction matrix for the step taken from `state`,
/// with the Hessian evaluated at the midpoint of `[target, x^t]` (or of
/// `[target, x^t + β(x^t − x^{t−1})]` for Nesterov).
pub fn midpoint_contraction_norm(
    obj: &PhaseObjective<'_>,
    state: &SolverState,
    target: &Array1<f64>,
    method: Method,
    eta: f64,
    beta: f64,
) -> Result<f64> {
    let beta = if method.is_momentum() { beta } else { 0.0 };
    let xi = (state.gradient_point(method, beta) + target) * 0.5;
    let hess = obj.hessian(&xi)?;
    Ok(contraction_matrix(method, &hess, eta, beta)?.spectral_norm())
}

/// Size limits for [`loo_run`]: it runs `m + 1` full sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LooBudget {
    pub max_m: usize,
    pub max_iters: usize,
}

impl Default for LooBudget {
    fn default() -> Self {
        Self {
            max_m: 256,
            max_iters: 500,
        }
    }
}

/// The main sequence and its `m` leave-one-out companions, summarised.
#[derive(Debug, Clone, PartialEq)]
pub struct LooBundle {
    pub method: Method,
    /// Steps taken by every sequence.
    pub iterations: usize,
    /// Main-sequence iterates `x^0, …, x^T`.
    pub main: Vec<Array1<f64>>,
    /// `max_ℓ ‖(x^t − x^{t,(ℓ)}, x^{t−1} − x^{t−1,(ℓ)})‖` for `t = 0..=T`,
    /// over the state pairs of each sequence.
    pub proximity: Vec<f64>,
    /// `‖x^t − x^{t,(ℓ)}‖`, indexed `[ℓ, t]`.
    pub iterate_gap: Array2<f64>,
    /// `‖x^{t,(ℓ)} − s·x⋆‖`, indexed `[ℓ, t]`.
    pub loo_dist: Array2<f64>,
    /// `x^{T,(ℓ)}`.
    pub final_iterates: Vec<Array1<f64>>,
}

impl LooBundle {
    pub fn max_proximity(&self) -> f64 {
        self.proximity.iter().copied().fold(0.0, f64::max)
    }
}

/// Runs `params.method` for `params.max_iters` steps on the full objective
/// and on each leave-one-out objective `f^{(ℓ)}`, all from the same `x0`.
pub fn loo_run(
    ens: &SensingEnsemble,
    y: &Observations,
    x0: &Array1<f64>,
    params: &SolverParams,
    gt: &GroundTruth,
) -> Result<LooBundle> {
    loo_run_with_budget(ens, y, x0, params, gt, &LooBudget::default())
}

pub fn loo_run_with_budget(
    ens: &SensingEnsemble,
    y: &Observations,
    x0: &Array1<f64>,
    params: &SolverParams,
    gt: &GroundTruth,
    budget: &LooBudget,
) -> Result<LooBundle> {
    params.validate()?;
    if ens.m() > budget.max_m || params.max_iters > budget.max_iters {
        return Err(Error::Capability(format!(
            "leave-one-out run of m = {} for {} iterations exceeds the budget (m <= {}, iterations <= {})",
            ens.m(),
            params.max_iters,
            budget.max_m,
            budget.max_iters
        )));
    }
    check_len("ground truth", gt.n(), ens.n())?;
    let full = PhaseObjective::new(ens, y)?;
    let main = iterate(&full, x0, params, params.max_iters)?;
    let steps = main.len() - 1;
    let target = gt.x_star() * alignment_sign(x0, gt.x_star())?;

    let per_ell: Vec<(Vec<f64>, Vec<f64>, Vec<f64>, Array1<f64>)> = (0..ens.m())
        .into_par_iter()
        .map(|ell| {
            let obj = PhaseObjective::leave_one_out(ens, y, ell)?;
            let seq = iterate(&obj, x0, params, steps)?;
            let gaps: Vec<f64> = (0..=steps)
                .map(|t| seq.get(t).map_or(f64::INFINITY, |x| solvers::norm(&(&main[t] - x))))
                .collect();
            let paired = (0..=steps)
                .map(|t| {
                    let prev = gaps[t.saturating_sub(1)];
                    (gaps[t] * gaps[t] + prev * prev).sqrt()
                })
                .collect();
            let dists = (0..=steps)
                .map(|t| seq.get(t).map_or(f64::INFINITY, |x| solvers::norm(&(x - &target))))
                .collect();
            let last = seq.last().cloned().unwrap_or_else(|| x0.clone());
            Ok((gaps, paired, dists, last))
        })
        .collect::<Result<_>>()?;

    let m = ens.m();
    let mut iterate_gap = Array2::zeros((m, steps + 1));
    let mut loo_dist = Array2::zeros((m, steps + 1));
    let mut proximity = vec![0.0f64; steps + 1];
    let mut final_iterates = Vec::with_capacity(m);
    for (ell, (gaps, paired, dists, last)) in per_ell.into_iter().enumerate() {
        iterate_gap.row_mut(ell).assign(&Array1::from(gaps));
        loo_dist.row_mut(ell).assign(&Array1::from(dists));
        for (p, q) in proximity.iter_mut().zip(paired) {
            *p = p.max(q);
        }
        final_iterates.push(last);
    }
    Ok(LooBundle {
        method: params.method,
        iterations: steps,
        main,
        proximity,
        iterate_gap,
        loo_dist,
        final_iterates,
    })
}

/// The iterates `x^{0,(ℓ)}, …, x^{steps,(ℓ)}` of a single leave-one-out
/// sequence.
pub fn loo_sequence(
    ens: &SensingEnsemble,
    y: &Observations,
    x0: &Array1<f64>,
    params: &SolverParams,
    ell: usize,
    steps: usize,
) -> Result<Vec<Array1<f64>>> {
    params.validate()?;
    let obj = PhaseObjective::leave_one_out(ens, y, ell)?;
    iterate(&obj, x0, params, steps)
}

// Fixed number of steps; stops early (returning the finite prefix) if an
// iterate becomes non-finite.
fn iterate<O: GradientOracle>(obj: &O, x0: &Array1<f64>, params: &SolverParams, steps: usize) -> Result<Vec<Array1<f64>>> {
    check_len("x0", x0.len(), obj.dim())?;
    let mut state = SolverState::new(x0.clone());
    let mut out = Vec::with_capacity(steps + 1);
    out.push(x0.clone());
    for _ in 0..steps {
        match solvers::step(&state, obj, params.method, params.eta, params.beta) {
            Ok(next) => state = next,
            Err(Error::Divergence { .. }) => break,
            Err(e) => return Err(e),
        }
        out.push(state.x_curr.clone());
    }
    Ok(out)
}

/// `f(x) = ½(μ x₁² + L x₂²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadratic {
    pub mu: f64,
    pub l: f64,
}

impl Quadratic {
    pub fn new(mu: f64, l: f64) -> Result<Self> {
        if !(mu > 0.0 && mu <= l && l.is_finite()) {
            return Err(Error::domain(format!("need 0 < mu <= L (got mu = {mu}, L = {l})")));
        }
        Ok(Self { mu, l })
    }

    pub fn kappa(&self) -> f64 {
        self.l / self.mu
    }

    pub fn hessian(&self) -> Array2<f64> {
        Array2::from_diag(&Array1::from(vec![self.mu, self.l]))
    }

    /// Step size and momentum of the classical convex rates: GD `η = 1/L`;
    /// heavy ball `η = 4/(√μ+√L)²`, `β = ((√κ−1)/(√κ+1))²`; Nesterov
    /// `η = 1/L`, `β = (√κ−1)/(√κ+1)`.
    pub fn tuned_params(&self, method: Method) -> (f64, f64) {
        let q = (self.kappa().sqrt() - 1.0) / (self.kappa().sqrt() + 1.0);
        match method {
            Method::GradientDescent => (1.0 / self.l, 0.0),
            Method::Polyak => (4.0 / (self.mu.sqrt() + self.l.sqrt()).powi(2), q * q),
            Method::Nesterov => (1.0 / self.l, q),
        }
    }

    /// Per-step contraction factor predicted for the tuned parameters:
    /// `1 − 1/κ`, `(√L−√μ)/(√L+√μ)` and `1 − √(μ/L)`.
    pub fn rate_factor(&self, method: Method) -> f64 {
        match method {
            Method::GradientDescent => 1.0 - self.mu / self.l,
            Method::Polyak => (self.l.sqrt() - self.mu.sqrt()) / (self.l.sqrt() + self.mu.sqrt()),
            Method::Nesterov => 1.0 - (self.mu / self.l).sqrt(),
        }
    }
}

impl GradientOracle for Quadratic {
    fn dim(&self) -> usize {
        2
    }

    fn gradient(&self, x: &Array1<f64>) -> Result<Array1<f64>> {
        check_len("x", x.len(), 2)?;
        Ok(Array1::from(vec![self.mu * x[0], self.l * x[1]]))
    }
}

/// Runs `method` with its tuned parameters on `½(μx₁² + Lx₂²)` from
/// `(1, 1)` and returns the geometric mean of the per-step paired-norm ratio
/// over the last half of `steps`.
///
/// The iteration is linear, so the state pair is rescaled to unit paired
/// norm after every step; this keeps long runs clear of underflow without
/// changing any ratio. A run that lands exactly on the minimiser reports 0.
pub fn quadratic_oracle(mu: f64, l: f64, method: Method, steps: usize) -> Result<f64> {
    let q = Quadratic::new(mu, l)?;
    let (eta, beta) = q.tuned_params(method);
    quadratic_oracle_with(&q, method, eta, beta, steps)
}

pub fn quadratic_oracle_with(q: &Quadratic, method: Method, eta: f64, beta: f64, steps: usize) -> Result<f64> {
    if steps < 2 {
        return Err(Error::domain("the oracle needs at least two steps"));
    }
    let origin = Array1::zeros(2);
    let mut state = SolverState::new(Array1::from(vec![1.0, 1.0]));
    let mut prev = state.paired_distance(&origin);
    let mut log_sum = 0.0;
    let mut counted = 0usize;
    for t in 1..=steps {
        state = solvers::step(&state, q, method, eta, beta)?;
        let paired = state.paired_distance(&origin);
        if paired == 0.0 {
            return Ok(0.0);
        }
        if t > steps / 2 {
            log_sum += (paired / prev).ln();
            counted += 1;
        }
        state.x_curr /= paired;
        state.x_prev /= paired;
        prev = 1.0;
    }
    Ok((log_sum / counted as f64).exp())
}

/// Maximum row norm and maximum projection onto a probe, with the Gaussian
/// concentration bounds `√(6n)` and `5·√log n·‖probe‖`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcentrationReport {
    pub max_row_norm: f64,
    pub row_norm_bound: f64,
    pub row_norm_ok: bool,
    pub max_projection: f64,
    pub projection_bound: f64,
    pub projection_ok: bool,
}

impl ConcentrationReport {
    pub fn passed(&self) -> bool {
        self.row_norm_ok && self.projection_ok
    }
}

/// The probe must be chosen independently of the ensemble for the
/// projection bound to apply.
pub fn concentration_report(ens: &SensingEnsemble, probe: &Array1<f64>) -> Result<ConcentrationReport> {
    let n = ens.n();
    if n < 3 {
        return Err(Error::domain(format!("concentration bounds need n >= 3 (got {n})")));
    }
    let max_row_norm = ens
        .rows()
        .map_axis(Axis(1), |r| r.dot(&r))
        .iter()
        .fold(0.0f64, |a, b| a.max(*b))
        .sqrt();
    let max_projection = ens.project(probe)?.iter().fold(0.0f64, |a, p| a.max(p.abs()));
    let row_norm_bound = (6.0 * n as f64).sqrt();
    let projection_bound = 5.0 * (n as f64).ln().sqrt() * probe.dot(probe).sqrt();
    Ok(ConcentrationReport {
        max_row_norm,
        row_norm_bound,
        row_norm_ok: max_row_norm <= row_norm_bound,
        max_projection,
        projection_bound,
        projection_ok: max_projection <= projection_bound,
    })
}
