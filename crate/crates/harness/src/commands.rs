//! One function per subcommand: run the experiment, write its CSV files and
//! report whether every pass flag held.

use std::fs;
use std::path::{Path, PathBuf};

use accelwf::IterationTrace;
use accelwf_cdp::GrayImage;

use crate::config::{Experiment, ExperimentConfig};
use crate::error::{io, HarnessError, Result};
use crate::experiments::{head_to_head, slopes, slopes_monotone, solve};
use crate::reports::{cdp, cdp_image, concentration, loo, oracle};
use crate::sweep::sweep;
use crate::table::{num, opt_bool, opt_num, Table};

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub passed: bool,
    pub outputs: Vec<PathBuf>,
    /// Human-readable summary lines.
    pub summary: Vec<String>,
}

pub const TRACE_COLUMNS: [&str; 9] = [
    "iter",
    "dist",
    "cost",
    "grad_norm",
    "max_incoherence",
    "loc_ok",
    "inc_ok",
    "paired_norm",
    "contraction_ratio",
];

pub fn trace_table(trace: &IterationTrace) -> Table {
    let mut t = Table::new(&TRACE_COLUMNS);
    for r in &trace.records {
        t.row(vec![
            r.t.to_string(),
            opt_num(r.dist),
            num(r.cost),
            num(r.grad_norm),
            opt_num(r.max_incoherence),
            opt_bool(r.loc_ok),
            opt_bool(r.inc_ok),
            opt_num(r.paired_norm),
            opt_num(r.contraction_ratio),
        ]);
    }
    t.comment(format!("status={}", trace.status));
    t
}

pub fn write_trace(path: &Path, trace: &IterationTrace) -> Result<()> {
    trace_table(trace).write(path)
}

fn default_output(cfg: &ExperimentConfig) -> PathBuf {
    match cfg.experiment {
        Experiment::Sweep => cfg.output_or("prbench_sweep"),
        e => cfg.output_or(&format!("prbench_{}.csv", e.as_str())),
    }
}

pub fn execute(cfg: &ExperimentConfig) -> Result<Outcome> {
    cfg.validate()?;
    match cfg.experiment {
        Experiment::Run => cmd_run(cfg),
        Experiment::Sweep => cmd_sweep(cfg),
        Experiment::HeadToHead => cmd_headtohead(cfg),
        Experiment::Slopes => cmd_slopes(cfg),
        Experiment::Loo => cmd_loo(cfg),
        Experiment::Oracle => cmd_oracle(cfg),
        Experiment::Cdp => cmd_cdp(cfg),
        Experiment::Concentration => cmd_concentration(cfg),
    }
}

/// The first `n`, `m`, seed and method of the config.
pub fn cmd_run(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (n, m, seed, method) = (
        cfg.n_list[0],
        cfg.m_for(0),
        cfg.seed_list[0],
        cfg.methods[0],
    );
    let trace = solve(cfg, n, m, seed, method)?;
    let path = default_output(cfg);
    write_trace(&path, &trace)?;
    Ok(Outcome {
        passed: true,
        outputs: vec![path],
        summary: vec![format!(
            "n={n} m={m} seed={seed} method={method}: {} after {} iterations",
            trace.status,
            trace.iterations()
        )],
    })
}

pub fn cmd_sweep(cfg: &ExperimentConfig) -> Result<Outcome> {
    let dir = default_output(cfg);
    fs::create_dir_all(&dir).map_err(io(&dir))?;
    let result = sweep(cfg, Some(&dir))?;

    let mut summary = Table::new(&[
        "n",
        "m",
        "method",
        "seeds",
        "converged",
        "median_iterations",
        "diverged",
        "failed",
    ]);
    for c in &result.cells {
        summary.row(vec![
            c.n.to_string(),
            c.m.to_string(),
            c.method.to_string(),
            c.iterations.len().to_string(),
            c.converged().to_string(),
            num(c.median()),
            c.diverged.to_string(),
            c.failures.len().to_string(),
        ]);
        for (seed, e) in &c.failures {
            summary.comment(format!(
                "failure n={} m={} method={} seed={seed}: {e}",
                c.n, c.m, c.method
            ));
        }
    }
    summary.comment(format!("init={}", cfg.init.as_str()));
    let summary_path = dir.join("summary.csv");
    summary.write(&summary_path)?;

    let mut dom = Table::new(&[
        "n",
        "m",
        "gd_median",
        "polyak_median",
        "nesterov_median",
        "gd_converges",
        "faster",
        "agree",
    ]);
    let mut lines = Vec::new();
    for d in &result.dominance {
        dom.row(vec![
            d.n.to_string(),
            d.m.to_string(),
            num(d.gd),
            num(d.polyak),
            num(d.nesterov),
            d.gd_converges.to_string(),
            d.faster.to_string(),
            d.agree.to_string(),
        ]);
        lines.push(format!(
            "n={} m={}: gd={} polyak={} nesterov={} {}",
            d.n,
            d.m,
            d.gd,
            d.polyak,
            d.nesterov,
            if d.ok() { "ok" } else { "FAILED" }
        ));
    }
    let dom_path = dir.join("dominance.csv");
    dom.write(&dom_path)?;
    Ok(Outcome {
        passed: result.passed(),
        outputs: vec![dir, summary_path, dom_path],
        summary: lines,
    })
}

fn baseline_and_accelerated(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.methods.len() < 2 {
        return Err(HarnessError::Config(
            "methods needs a baseline followed by at least one method to compare".into(),
        ));
    }
    Ok(())
}

/// `methods[0]` against `methods[1]` at the first `n`, one fit per seed.
pub fn cmd_headtohead(cfg: &ExperimentConfig) -> Result<Outcome> {
    baseline_and_accelerated(cfg)?;
    let (n, m) = (cfg.n_list[0], cfg.m_for(0));
    let (a, b) = (cfg.methods[0], cfg.methods[1]);
    let mut t = Table::new(&["seed", "iter", "log_dist_baseline", "log_dist_accelerated"]);
    let mut slopes = Vec::new();
    let mut lines = Vec::new();
    for &seed in &cfg.seed_list {
        let h = head_to_head(cfg, n, m, seed, a, b)?;
        for (it, x, y) in &h.pairs {
            t.row(vec![seed.to_string(), it.to_string(), num(*x), num(*y)]);
        }
        let slope = h.slope.map_or("none".to_string(), num);
        t.comment(format!(
            "seed={seed} baseline={a} status={} accelerated={b} status={} slope={slope}",
            h.baseline_status, h.accelerated_status
        ));
        lines.push(format!("seed {seed}: slope {slope}"));
        slopes.push(h.slope);
    }
    let fitted: Vec<f64> = slopes.iter().flatten().copied().collect();
    if !fitted.is_empty() {
        let mean = fitted.iter().sum::<f64>() / fitted.len() as f64;
        t.comment(format!("mean_slope={}", num(mean)));
        lines.push(format!("mean slope {mean:.4} over {} seeds", fitted.len()));
    }
    let path = default_output(cfg);
    t.write(&path)?;
    Ok(Outcome {
        passed: slopes.iter().all(Option::is_some),
        outputs: vec![path],
        summary: lines,
    })
}

pub fn cmd_slopes(cfg: &ExperimentConfig) -> Result<Outcome> {
    baseline_and_accelerated(cfg)?;
    let rows = slopes(cfg)?;
    let monotone = slopes_monotone(&rows);
    let mut t = Table::new(&[
        "n",
        "m",
        "method",
        "mean_slope",
        "sqrt_log_n",
        "seeds_fitted",
        "seeds",
        "in_band",
    ]);
    let mut lines = Vec::new();
    for r in &rows {
        t.row(vec![
            r.n.to_string(),
            r.m.to_string(),
            r.accelerated.to_string(),
            opt_num(r.mean_slope),
            num(r.reference),
            r.seeds_fitted.to_string(),
            r.seeds.to_string(),
            r.in_band.to_string(),
        ]);
        lines.push(format!(
            "n={} {}: slope {} vs sqrt(log n) {:.4} {}",
            r.n,
            r.accelerated,
            r.mean_slope.map_or("none".into(), |s| format!("{s:.4}")),
            r.reference,
            if r.in_band { "in band" } else { "OUT OF BAND" }
        ));
    }
    t.comment(format!("baseline={}", cfg.methods[0]));
    t.comment(format!("monotone={monotone}"));
    lines.push(format!("monotone in n: {monotone}"));
    let path = default_output(cfg);
    t.write(&path)?;
    Ok(Outcome {
        passed: monotone && rows.iter().all(|r| r.in_band),
        outputs: vec![path],
        summary: lines,
    })
}

pub fn cmd_loo(cfg: &ExperimentConfig) -> Result<Outcome> {
    let rows = loo(cfg)?;
    let mut t = Table::new(&[
        "n",
        "m",
        "seed",
        "method",
        "iter",
        "proximity",
        "bound",
        "within_bound",
    ]);
    let mut lines = Vec::new();
    for r in &rows {
        for (it, p) in r.proximity.iter().enumerate() {
            t.row(vec![
                r.n.to_string(),
                r.m.to_string(),
                r.seed.to_string(),
                r.method.to_string(),
                it.to_string(),
                num(*p),
                num(r.bound),
                (*p <= r.bound).to_string(),
            ]);
        }
        t.comment(format!(
            "n={} m={} seed={} method={} poisoned_row={} poisoning_ok={}",
            r.n, r.m, r.seed, r.method, r.poisoned_row, r.poisoning_ok
        ));
        let worst = r.proximity.iter().copied().fold(0.0, f64::max);
        lines.push(format!(
            "n={} m={} seed={} {}: max proximity {worst:.4e} (bound {:.4e}), poisoning {}",
            r.n,
            r.m,
            r.seed,
            r.method,
            r.bound,
            if r.poisoning_ok { "ok" } else { "FAILED" }
        ));
    }
    let path = default_output(cfg);
    t.write(&path)?;
    Ok(Outcome {
        passed: rows.iter().all(|r| r.ok()),
        outputs: vec![path],
        summary: lines,
    })
}

pub fn cmd_oracle(cfg: &ExperimentConfig) -> Result<Outcome> {
    let rows = oracle(cfg)?;
    let mut t = Table::new(&[
        "method",
        "kappa",
        "eta",
        "beta",
        "measured_ratio",
        "predicted_factor",
        "threshold",
        "spectral_radius",
        "ok",
    ]);
    let mut lines = Vec::new();
    for r in &rows {
        t.row(vec![
            r.method.to_string(),
            num(r.kappa),
            num(r.eta),
            num(r.beta),
            num(r.measured),
            num(r.predicted),
            num(r.threshold),
            num(r.radius),
            r.ok.to_string(),
        ]);
        lines.push(format!(
            "{}: measured {:.6} predicted {:.6} radius {:.6} {}",
            r.method,
            r.measured,
            r.predicted,
            r.radius,
            if r.ok { "ok" } else { "FAILED" }
        ));
    }
    let path = default_output(cfg);
    t.write(&path)?;
    Ok(Outcome {
        passed: rows.iter().all(|r| r.ok),
        outputs: vec![path],
        summary: lines,
    })
}

/// Recovered images land next to the CSV as `<stem>_<method>.pgm`.
pub fn cmd_cdp(cfg: &ExperimentConfig) -> Result<Outcome> {
    let image = cdp_image(cfg)?;
    let seed = cfg.seed_list[0];
    let report = cdp(cfg, &image, seed)?;
    let mut header = vec!["iter".to_string()];
    for tr in &report.traces {
        header.push(format!("rel_err_{}", tr.method));
        header.push(format!("ffts_{}", tr.method));
    }
    let mut t = Table::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
    for it in 0..=cfg.iters {
        let mut row = vec![it.to_string()];
        for tr in &report.traces {
            row.push(tr.rel_err.get(it).copied().map(num).unwrap_or_default());
            let ffts = it.checked_sub(1).and_then(|k| tr.ffts_per_iter.get(k));
            row.push(ffts.map(|f| f.to_string()).unwrap_or_default());
        }
        t.row(row);
    }
    let path = default_output(cfg);
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut outputs = vec![path.clone()];
    let mut lines = Vec::new();
    for tr in &report.traces {
        t.comment(format!(
            "method={} eta={} beta={} init_ffts={} status={}",
            tr.method,
            num(tr.eta),
            num(tr.beta),
            tr.init_ffts,
            tr.status
        ));
        let final_err = tr.rel_err.last().copied().unwrap_or(f64::NAN);
        lines.push(format!(
            "{}: relative error {final_err:.4e} after {} iterations",
            tr.method,
            tr.ffts_per_iter.len()
        ));
        let img_path = path.with_file_name(format!("{stem}_{}.pgm", tr.method));
        GrayImage::from_signal(image.width(), image.height(), &tr.estimate)?
            .write_pgm(&img_path)?;
        outputs.push(img_path);
    }
    t.comment(format!("accelerated_better={}", report.accelerated_better));
    t.comment(format!("equal_ffts={}", report.equal_ffts));
    t.write(&path)?;
    lines.push(format!(
        "accelerated below gd: {}, equal transform counts: {}",
        report.accelerated_better, report.equal_ffts
    ));
    Ok(Outcome {
        passed: report.passed(),
        outputs,
        summary: lines,
    })
}

pub fn cmd_concentration(cfg: &ExperimentConfig) -> Result<Outcome> {
    let rows = concentration(cfg)?;
    let mut t = Table::new(&[
        "n",
        "m",
        "seed",
        "max_row_norm",
        "row_norm_bound",
        "row_norm_ok",
        "max_projection",
        "projection_bound",
        "projection_ok",
    ]);
    for r in &rows {
        let c = &r.report;
        t.row(vec![
            r.n.to_string(),
            r.m.to_string(),
            r.seed.to_string(),
            num(c.max_row_norm),
            num(c.row_norm_bound),
            c.row_norm_ok.to_string(),
            num(c.max_projection),
            num(c.projection_bound),
            c.projection_ok.to_string(),
        ]);
    }
    let passed = rows.iter().filter(|r| r.report.passed()).count();
    let path = default_output(cfg);
    t.write(&path)?;
    Ok(Outcome {
        passed: passed == rows.len(),
        outputs: vec![path],
        summary: vec![format!("{passed}/{} trials within both bounds", rows.len())],
    })
}
