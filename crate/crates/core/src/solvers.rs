//! Gradient descent, Polyak heavy ball and Nesterov's accelerated gradient as
//! explicit state machines over the iterate pair `(x^t, x^{t-1})`.
//!
//! The step functions are generic over a [`GradientOracle`], so the same
//! updates drive the Gaussian phase retrieval objective, convex quadratics
//! and complex-valued measurement models.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, LinalgScalar, ScalarOperand};
use num_complex::Complex64;

use crate::diagnostics::{self, RicConfig};
use crate::error::{check_len, Error, Result};
use crate::model::{alignment_sign, GroundTruth, Observations, SensingEnsemble};
use crate::objective::PhaseObjective;

/// Field of the iterates (real or complex).
pub trait Scalar: LinalgScalar + ScalarOperand + Send + Sync + fmt::Debug {
    fn from_real(v: f64) -> Self;
    /// `|v|²`.
    fn abs_sqr(self) -> f64;
}

impl Scalar for f64 {
    fn from_real(v: f64) -> Self {
        v
    }
    fn abs_sqr(self) -> f64 {
        self * self
    }
}

impl Scalar for Complex64 {
    fn from_real(v: f64) -> Self {
        Complex64::new(v, 0.0)
    }
    fn abs_sqr(self) -> f64 {
        self.norm_sqr()
    }
}

/// Anything that can produce a gradient at a point.
pub trait GradientOracle<S: Scalar = f64>: Sync {
    fn dim(&self) -> usize;
    fn gradient(&self, x: &Array1<S>) -> Result<Array1<S>>;
}

pub(crate) fn norm<S: Scalar>(v: &Array1<S>) -> f64 {
    v.iter().map(|c| c.abs_sqr()).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    GradientDescent,
    Polyak,
    Nesterov,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::GradientDescent, Method::Polyak, Method::Nesterov];

    pub fn is_momentum(self) -> bool {
        !matches!(self, Method::GradientDescent)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Method::GradientDescent => "gd",
            Method::Polyak => "polyak",
            Method::Nesterov => "nesterov",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gd" | "wf" | "gradient" => Ok(Method::GradientDescent),
            "polyak" | "hb" | "heavyball" | "p" => Ok(Method::Polyak),
            "nesterov" | "nag" | "n" => Ok(Method::Nesterov),
            other => Err(Error::domain(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverParams {
    pub method: Method,
    pub eta: f64,
    pub beta: f64,
    pub max_iters: usize,
    /// Target distance to the ground truth, or gradient norm when no ground
    /// truth is supplied.
    pub tol: f64,
    /// The run is declared diverged once the cost exceeds this value.
    pub divergence_cap: f64,
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::domain(format!("step size must be positive (got {})", self.eta)));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return Err(Error::domain(format!("momentum must lie in [0, 1) (got {})", self.beta)));
        }
        if self.method == Method::GradientDescent && self.beta != 0.0 {
            return Err(Error::domain("gradient descent takes no momentum"));
        }
        if !(self.tol >= 0.0) || !(self.divergence_cap > 0.0) {
            return Err(Error::domain("tolerance must be nonnegative and the divergence cap positive"));
        }
        Ok(())
    }
}

/// Constants of the experimental parameter schedule
/// `η = step_numerator / log n`,
/// `β = (√log n − √momentum_offset) / (√log n + √momentum_offset)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub step_numerator: f64,
    pub momentum_offset: f64,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            step_numerator: 0.05,
            momentum_offset: 2.0,
        }
    }
}

pub const DEFAULT_MAX_ITERS: usize = 10_000;
pub const DEFAULT_TOL: f64 = 1e-7;
pub const DEFAULT_DIVERGENCE_CAP: f64 = 1e8;

/// Default parameters for dimension `n` and an initial point of norm
/// `norm_x0`: `η = 0.05 / (log n · ‖x0‖²)` and, for the momentum methods,
/// `β = (√log n − √2) / (√log n + √2)`.
pub fn default_params(n: usize, norm_x0: f64, method: Method) -> Result<SolverParams> {
    default_params_with(n, norm_x0, method, &Schedule::default())
}

/// [`default_params`] with explicit schedule constants. A negative momentum
/// (small `n`, where `log n < momentum_offset`) is clamped to zero.
pub fn default_params_with(n: usize, norm_x0: f64, method: Method, schedule: &Schedule) -> Result<SolverParams> {
    if n < 2 {
        return Err(Error::domain(format!("the schedule needs n >= 2 (got {n})")));
    }
    if !(norm_x0 > 0.0 && norm_x0.is_finite()) {
        return Err(Error::domain(format!("initial norm must be positive (got {norm_x0})")));
    }
    let log_n = (n as f64).ln();
    let eta = schedule.step_numerator / log_n / (norm_x0 * norm_x0);
    let beta = if method.is_momentum() {
        let (s, c) = (log_n.sqrt(), schedule.momentum_offset.sqrt());
        ((s - c) / (s + c)).max(0.0)
    } else {
        0.0
    };
    Ok(SolverParams {
        method,
        eta,
        beta,
        max_iters: DEFAULT_MAX_ITERS,
        tol: DEFAULT_TOL,
        divergence_cap: DEFAULT_DIVERGENCE_CAP,
    })
}

/// The pair `(x^t, x^{t-1})` plus the number of steps taken. A fresh state
/// has `x_prev == x_curr`, so the first step of every method is a plain
/// gradient step.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState<S = f64> {
    pub x_curr: Array1<S>,
    pub x_prev: Array1<S>,
    pub t: usize,
}

impl<S: Scalar> SolverState<S> {
    pub fn new(x0: Array1<S>) -> Self {
        Self {
            x_prev: x0.clone(),
            x_curr: x0,
            t: 0,
        }
    }

    /// `x^t − x^{t−1}`.
    pub fn velocity(&self) -> Array1<S> {
        &self.x_curr - &self.x_prev
    }

    /// `‖(x^t − target, x^{t−1} − target)‖₂`.
    pub fn paired_distance(&self, target: &Array1<S>) -> f64 {
        let a = norm(&(&self.x_curr - target));
        let b = norm(&(&self.x_prev - target));
        (a * a + b * b).sqrt()
    }

    /// The point at which `method` evaluates its gradient: `x^t` for GD and
    /// heavy ball, `x^t + β(x^t − x^{t−1})` for Nesterov.
    pub fn gradient_point(&self, method: Method, beta: f64) -> Array1<S> {
        match method {
            Method::Nesterov => &self.x_curr + &(self.velocity() * S::from_real(beta)),
            _ => self.x_curr.clone(),
        }
    }

    /// `x^{t+1} = x^t − η g + β(x^t − x^{t−1})`, where `g` was evaluated at
    /// [`gradient_point`](Self::gradient_point).
    pub fn advance(&self, grad: &Array1<S>, eta: f64, beta: f64) -> Result<Self> {
        check_len("gradient", grad.len(), self.x_curr.len())?;
        let mut next = &self.x_curr - &(grad * S::from_real(eta));
        if beta != 0.0 {
            next = next + self.velocity() * S::from_real(beta);
        }
        if next.iter().any(|c| !c.abs_sqr().is_finite()) {
            return Err(Error::Divergence { step: self.t + 1 });
        }
        Ok(Self {
            x_prev: self.x_curr.clone(),
            x_curr: next,
            t: self.t + 1,
        })
    }
}

fn check_state<S: Scalar, O: GradientOracle<S> + ?Sized>(state: &SolverState<S>, oracle: &O) -> Result<()> {
    check_len("x_curr", state.x_curr.len(), oracle.dim())?;
    check_len("x_prev", state.x_prev.len(), oracle.dim())
}

/// One step of any of the three methods.
pub fn step<S: Scalar, O: GradientOracle<S> + ?Sized>(
    state: &SolverState<S>,
    oracle: &O,
    method: Method,
    eta: f64,
    beta: f64,
) -> Result<SolverState<S>> {
    check_state(state, oracle)?;
    let beta = if method.is_momentum() { beta } else { 0.0 };
    let g = oracle.gradient(&state.gradient_point(method, beta))?;
    state.advance(&g, eta, beta)
}

/// `x^{t+1} = x^t − η∇f(x^t)`.
pub fn step_gd<S: Scalar, O: GradientOracle<S> + ?Sized>(
    state: &SolverState<S>,
    oracle: &O,
    eta: f64,
) -> Result<SolverState<S>> {
    step(state, oracle, Method::GradientDescent, eta, 0.0)
}

/// `x^{t+1} = x^t − η∇f(x^t) + β(x^t − x^{t−1})`.
pub fn step_polyak<S: Scalar, O: GradientOracle<S> + ?Sized>(
    state: &SolverState<S>,
    oracle: &O,
    eta: f64,
    beta: f64,
) -> Result<SolverState<S>> {
    step(state, oracle, Method::Polyak, eta, beta)
}

/// `x^{t+1} = x^t − η∇f(x^t + β(x^t − x^{t−1})) + β(x^t − x^{t−1})`.
pub fn step_nesterov<S: Scalar, O: GradientOracle<S> + ?Sized>(
    state: &SolverState<S>,
    oracle: &O,
    eta: f64,
    beta: f64,
) -> Result<SolverState<S>> {
    step(state, oracle, Method::Nesterov, eta, beta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Converged,
    MaxIters,
    Diverged,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::MaxIters => "max_iters",
            Status::Diverged => "diverged",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Per-iteration record. Distances are taken against `s · x_star`, where the
/// sign `s` is fixed from the initial point; the ground-truth columns are
/// `None` when no ground truth was supplied.
#[derive(Debug, Clone, PartialEq)]
pub struct IterRecord {
    pub t: usize,
    pub dist: Option<f64>,
    pub cost: f64,
    pub grad_norm: f64,
    /// `max_i |a_i · (x^t − s·x_star)|`.
    pub max_incoherence: Option<f64>,
    pub loc_ok: Option<bool>,
    pub inc_ok: Option<bool>,
    /// `‖(x^t − s·x_star, x^{t−1} − s·x_star)‖` of the current state pair.
    pub paired_norm: Option<f64>,
    /// `paired_norm(t) / paired_norm(t − 1)`.
    pub contraction_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    pub method: Method,
    pub records: Vec<IterRecord>,
    pub status: Status,
    pub final_state: SolverState,
    /// Sign aligning the initial point with the ground truth.
    pub sign: Option<f64>,
}

impl IterationTrace {
    /// Number of steps taken.
    pub fn iterations(&self) -> usize {
        self.final_state.t
    }

    /// Steps needed to reach the tolerance, if the run converged.
    pub fn iterations_to_tol(&self) -> Option<usize> {
        (self.status == Status::Converged).then(|| self.iterations())
    }

    pub fn dists(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.dist).collect()
    }

    /// Contraction ratios of the last `window` records (fewer if the trace
    /// is shorter).
    pub fn final_ratios(&self, window: usize) -> Vec<f64> {
        let ratios: Vec<f64> = self.records.iter().filter_map(|r| r.contraction_ratio).collect();
        ratios[ratios.len().saturating_sub(window)..].to_vec()
    }

    /// Per-step ratios `dist(t+1) / dist(t)` over the last `window` steps.
    pub fn final_dist_ratios(&self, window: usize) -> Vec<f64> {
        let d = self.dists();
        let ratios: Vec<f64> = d.windows(2).map(|w| w[1] / w[0]).collect();
        ratios[ratios.len().saturating_sub(window)..].to_vec()
    }
}

/// Runs `params.method` from `x0` with the default [`RicConfig`].
pub fn run(
    ens: &SensingEnsemble,
    y: &Observations,
    x0: &Array1<f64>,
    params: &SolverParams,
    gt: Option<&GroundTruth>,
) -> Result<IterationTrace> {
    run_with_config(ens, y, x0, params, gt, &RicConfig::default())
}

/// Iterates until the (sign-aligned) distance to the ground truth drops to
/// `params.tol`, or the gradient norm does when `gt` is `None`; until
/// `params.max_iters` steps; or until the cost exceeds the divergence cap or
/// an iterate stops being finite. Divergence is reported through
/// [`Status::Diverged`], not as an error.
pub fn run_with_config(
    ens: &SensingEnsemble,
    y: &Observations,
    x0: &Array1<f64>,
    params: &SolverParams,
    gt: Option<&GroundTruth>,
    cfg: &RicConfig,
) -> Result<IterationTrace> {
    params.validate()?;
    cfg.validate()?;
    let obj = PhaseObjective::new(ens, y)?;
    check_len("x0", x0.len(), ens.n())?;

    struct Reference {
        target: Array1<f64>,
        projections: Array1<f64>,
        loc_radius: f64,
        inc_bound: Option<f64>,
    }
    let (sign, reference) = match gt {
        Some(gt) => {
            check_len("ground truth", gt.n(), ens.n())?;
            let s = alignment_sign(x0, gt.x_star())?;
            let target = gt.x_star() * s;
            let projections = ens.project(&target)?;
            let reference = Reference {
                target,
                projections,
                loc_radius: diagnostics::loc_radius(gt, cfg),
                inc_bound: diagnostics::inc_bound(ens.n(), gt, cfg),
            };
            (Some(s), Some(reference))
        }
        None => (None, None),
    };

    let mut state = SolverState::new(x0.clone());
    let mut records = Vec::new();
    let mut last_paired: Option<f64> = None;
    let status = loop {
        let eval = obj.evaluate(&state.x_curr)?;
        let grad_norm = norm(&eval.gradient);
        let mut rec = IterRecord {
            t: state.t,
            dist: None,
            cost: eval.cost,
            grad_norm,
            max_incoherence: None,
            loc_ok: None,
            inc_ok: None,
            paired_norm: None,
            contraction_ratio: None,
        };
        if let Some(r) = &reference {
            let d = norm(&(&state.x_curr - &r.target));
            let max_inc = eval
                .projections
                .iter()
                .zip(&r.projections)
                .map(|(p, q)| (p - q).abs())
                .fold(0.0, f64::max);
            let paired = state.paired_distance(&r.target);
            rec.dist = Some(d);
            rec.max_incoherence = Some(max_inc);
            rec.loc_ok = Some(d <= r.loc_radius);
            rec.inc_ok = r.inc_bound.map(|b| max_inc <= b);
            rec.paired_norm = Some(paired);
            rec.contraction_ratio = last_paired.map(|p| paired / p);
            last_paired = Some(paired);
        }
        let dist = rec.dist;
        records.push(rec);

        if !eval.cost.is_finite() || eval.cost > params.divergence_cap {
            break Status::Diverged;
        }
        let reached = match dist {
            Some(d) => d <= params.tol,
            None => grad_norm <= params.tol,
        };
        if reached {
            break Status::Converged;
        }
        if state.t >= params.max_iters {
            break Status::MaxIters;
        }
        let beta = if params.method.is_momentum() { params.beta } else { 0.0 };
        let next = match params.method {
            Method::Nesterov => obj
                .gradient(&state.gradient_point(params.method, beta))
                .and_then(|g| state.advance(&g, params.eta, beta)),
            _ => state.advance(&eval.gradient, params.eta, beta),
        };
        match next {
            Ok(s) => state = s,
            Err(Error::Divergence { .. }) => break Status::Diverged,
            Err(e) => return Err(e),
        }
    };

    Ok(IterationTrace {
        method: params.method,
        records,
        status,
        final_state: state,
        sign,
    })
}
