//! The `n × m × method × seed` grid.
//!
//! Cells run in parallel and each writes its own trace; the summary is
//! assembled afterwards in grid order, so the output does not depend on
//! scheduling.

use std::path::Path;

use accelwf::solvers::{Method, Status};
use rayon::prelude::*;

use crate::commands::write_trace;
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::experiments::solve;

/// Relative gap allowed between the Polyak and Nesterov medians.
pub const AGREEMENT: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub n: usize,
    pub m: usize,
    pub method: Method,
    /// Iterations to tolerance per seed, `None` when the run did not converge.
    pub iterations: Vec<Option<usize>>,
    pub diverged: usize,
    /// Seeds whose run failed outright, with the error.
    pub failures: Vec<(u64, String)>,
}

impl SweepCell {
    /// Median iterations, counting non-converged seeds as infinite.
    pub fn median(&self) -> f64 {
        median(
            self.iterations
                .iter()
                .map(|k| k.map_or(f64::INFINITY, |k| k as f64))
                .collect(),
        )
    }

    pub fn converged(&self) -> usize {
        self.iterations.iter().flatten().count()
    }
}

pub fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        (v[k / 2 - 1] + v[k / 2]) / 2.0
    }
}

/// Gradient descent against both momentum methods in one `(n, m)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Dominance {
    pub n: usize,
    pub m: usize,
    pub gd: f64,
    pub polyak: f64,
    pub nesterov: f64,
    pub gd_converges: bool,
    /// Both momentum medians strictly below the GD median.
    pub faster: bool,
    /// `|P − N| ≤ 10%` of the smaller median.
    pub agree: bool,
}

impl Dominance {
    /// Cells where GD's median is infinite carry no claim.
    pub fn ok(&self) -> bool {
        !self.gd_converges || (self.faster && self.agree)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub cells: Vec<SweepCell>,
    pub dominance: Vec<Dominance>,
}

impl SweepResult {
    pub fn passed(&self) -> bool {
        self.dominance.iter().all(Dominance::ok) && self.cells.iter().all(|c| c.failures.is_empty())
    }
}

pub fn trace_name(n: usize, m: usize, seed: u64, method: Method) -> String {
    format!("n{n}_m{m}_seed{seed}_{method}.csv")
}

/// Runs the grid; with `trace_dir` set, every run's trace is written there.
pub fn sweep(cfg: &ExperimentConfig, trace_dir: Option<&Path>) -> Result<SweepResult> {
    let pairs: Vec<(usize, usize)> = if cfg.m_list.is_empty() {
        (0..cfg.n_list.len())
            .map(|i| (cfg.n_list[i], cfg.m_for(i)))
            .collect()
    } else {
        cfg.n_list
            .iter()
            .flat_map(|&n| cfg.m_list.iter().map(move |&m| (n, m)))
            .collect()
    };
    let jobs: Vec<(usize, usize, Method, u64)> = pairs
        .iter()
        .flat_map(|&(n, m)| {
            cfg.methods.iter().flat_map(move |&method| {
                cfg.seed_list.iter().map(move |&seed| (n, m, method, seed))
            })
        })
        .collect();

    // (status, iterations) or the error text, in job order.
    let outcomes: Vec<std::result::Result<(Status, usize), String>> = jobs
        .par_iter()
        .map(
            |&(n, m, method, seed)| match solve(cfg, n, m, seed, method) {
                Ok(trace) => {
                    if let Some(dir) = trace_dir {
                        write_trace(&dir.join(trace_name(n, m, seed, method)), &trace)?;
                    }
                    Ok(Ok((trace.status, trace.iterations())))
                }
                Err(e) => Ok(Err(e.to_string())),
            },
        )
        .collect::<Result<_>>()?;

    let per_cell = cfg.seed_list.len();
    let mut cells = Vec::new();
    for (chunk, results) in jobs.chunks(per_cell).zip(outcomes.chunks(per_cell)) {
        let (n, m, method, _) = chunk[0];
        let mut cell = SweepCell {
            n,
            m,
            method,
            iterations: Vec::with_capacity(per_cell),
            diverged: 0,
            failures: Vec::new(),
        };
        for (job, r) in chunk.iter().zip(results) {
            match r {
                Ok((Status::Converged, k)) => cell.iterations.push(Some(*k)),
                Ok((status, _)) => {
                    cell.iterations.push(None);
                    if *status == Status::Diverged {
                        cell.diverged += 1;
                    }
                }
                Err(e) => {
                    cell.iterations.push(None);
                    cell.failures.push((job.3, e.clone()));
                }
            }
        }
        cells.push(cell);
    }

    let has_all = Method::ALL.iter().all(|m| cfg.methods.contains(m));
    let mut dominance = Vec::new();
    if has_all {
        for &(n, m) in &pairs {
            let med = |method| {
                cells
                    .iter()
                    .find(|c| c.n == n && c.m == m && c.method == method)
                    .map_or(f64::INFINITY, SweepCell::median)
            };
            let (gd, polyak, nesterov) = (
                med(Method::GradientDescent),
                med(Method::Polyak),
                med(Method::Nesterov),
            );
            dominance.push(Dominance {
                n,
                m,
                gd,
                polyak,
                nesterov,
                gd_converges: gd.is_finite(),
                faster: polyak < gd && nesterov < gd,
                agree: (polyak - nesterov).abs() <= AGREEMENT * polyak.min(nesterov),
            });
        }
    }
    Ok(SweepResult { cells, dominance })
}
