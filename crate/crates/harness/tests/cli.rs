use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use accelwf::solvers::Method;
use prbench::config::{Experiment, ExperimentConfig, InitMode};
use prbench::experiments::head_to_head;
use proptest::prelude::*;

fn prbench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_prbench"))
        .args(args)
        .output()
        .unwrap()
}

fn path_arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Data rows (header excluded) and trailing comment lines.
fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>, Vec<String>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let (comments, data): (Vec<&str>, Vec<&str>) = lines.partition(|l| l.starts_with('#'));
    (
        header,
        data.iter()
            .map(|l| l.split(',').map(String::from).collect())
            .collect(),
        comments.iter().map(|s| s.to_string()).collect(),
    )
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("exp.cfg");
    fs::write(&path, body).unwrap();
    path
}

#[test]
fn run_writes_a_trace_with_a_status_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("trace.csv");
    let cfg = write_config(
        dir.path(),
        &format!("experiment = run\nn_list = 10\nm_list = 200\nseed_list = 0\nmethods = gd\noutput = {}\n", out.display()),
    );
    let res = prbench(&["run", "--config", path_arg(&cfg)]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let (header, rows, comments) = read_csv(&out);
    assert_eq!(
        header,
        [
            "iter",
            "dist",
            "cost",
            "grad_norm",
            "max_incoherence",
            "loc_ok",
            "inc_ok",
            "paired_norm",
            "contraction_ratio"
        ]
    );
    assert!(!rows.is_empty());
    assert_eq!(rows[0][0], "0");
    assert_eq!(comments, ["# status=converged"]);
    assert!(fs::read_to_string(&out)
        .unwrap()
        .ends_with("# status=converged\n"));

    let first = fs::read(&out).unwrap();
    assert!(prbench(&["run", "--config", path_arg(&cfg)])
        .status
        .success());
    assert_eq!(first, fs::read(&out).unwrap());
}

#[test]
fn unwritable_output_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("missing").join("trace.csv");
    let res = prbench(&[
        "run",
        "--n-list",
        "10",
        "--m-list",
        "200",
        "--output",
        path_arg(&out),
    ]);
    assert_eq!(res.status.code(), Some(2));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains(path_arg(&out)), "{err}");
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "experiment = run\ncolour = red\n");
    for args in [
        vec!["run", "--config", path_arg(&bad)],
        vec!["run", "--n_list"],
        vec!["run", "n_list", "10"],
        vec!["run", "--methods", "sgd"],
        vec!["teleport"],
    ] {
        assert_eq!(prbench(&args).status.code(), Some(2), "{args:?}");
    }
    let missing = dir.path().join("nope.cfg");
    let res = prbench(&["oracle", "--config", path_arg(&missing)]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("nope.cfg"));
}

#[test]
fn command_line_overrides_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.csv");
    let cfg = write_config(
        dir.path(),
        "experiment = run\nn_list = 10\nm_list = 200\nmethods = gd\nmax_iters = 500\n",
    );
    let res = prbench(&[
        "run",
        "--config",
        path_arg(&cfg),
        "--max-iters=3",
        "--output",
        path_arg(&out),
    ]);
    assert!(res.status.success());
    let (_, rows, comments) = read_csv(&out);
    assert_eq!(rows.len(), 4);
    assert_eq!(comments, ["# status=max_iters"]);
}

#[test]
fn oracle_reports_one_row_per_method() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("oracle.csv");
    let res = prbench(&[
        "oracle",
        "--mu",
        "1",
        "--smoothness",
        "100",
        "--output",
        path_arg(&out),
    ]);
    assert!(res.status.success());
    let (header, rows, _) = read_csv(&out);
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let ratio = |row: &Vec<String>| row[col("measured_ratio")].parse::<f64>().unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(
        rows.iter().map(|r| r[0].as_str()).collect::<Vec<_>>(),
        ["gd", "polyak", "nesterov"]
    );
    assert!((ratio(&rows[0]) - 0.99).abs() < 1e-9);
    assert!(ratio(&rows[1]) <= 0.838);
    assert!(ratio(&rows[2]) <= 0.92);
    assert!(rows.iter().all(|r| r[col("ok")] == "true"));
}

#[test]
fn concentration_flags_pass_at_n100_m1000() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("conc.csv");
    let res = prbench(&[
        "concentration",
        "--n_list",
        "100",
        "--m_list",
        "1000",
        "--output",
        path_arg(&out),
    ]);
    assert!(res.status.success());
    let (header, rows, _) = read_csv(&out);
    assert_eq!(rows.len(), 1);
    for flag in ["row_norm_ok", "projection_ok"] {
        let c = header.iter().position(|h| h == flag).unwrap();
        assert_eq!(rows[0][c], "true");
    }
}

#[test]
fn loo_flags_follow_the_proximity_column() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("loo.csv");
    let res = prbench(&[
        "loo",
        "--n_list",
        "20",
        "--m_list",
        "120",
        "--seed_list",
        "0,1",
        "--methods",
        "polyak",
        "--max_iters",
        "40",
        "--output",
        path_arg(&out),
    ]);
    assert!(res.status.code().is_some_and(|c| c <= 1));
    let (_, rows, comments) = read_csv(&out);
    assert_eq!(rows.len(), 2 * 41);
    for r in &rows {
        let (p, b): (f64, f64) = (r[5].parse().unwrap(), r[6].parse().unwrap());
        assert_eq!(r[7], (p <= b).to_string());
    }
    assert_eq!(comments.len(), 2);
    assert!(comments.iter().all(|c| c.ends_with("poisoning_ok=true")));

    let over = prbench(&[
        "loo",
        "--n_list",
        "20",
        "--m_list",
        "300",
        "--max_iters",
        "5",
        "--output",
        path_arg(&out),
    ]);
    assert_eq!(over.status.code(), Some(2));
}

#[test]
fn sweep_writes_traces_and_a_deterministic_summary() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let res = prbench(&[
            "sweep",
            "--n_list",
            "10",
            "--m_list",
            "100,200",
            "--seed_list",
            "0,1,2",
            "--output",
            path_arg(&out),
        ]);
        assert!(res.status.code().is_some_and(|c| c <= 1));
        out
    };
    let (a, b) = (run("a"), run("b"));
    for file in [
        "summary.csv",
        "dominance.csv",
        "n10_m200_seed1_nesterov.csv",
    ] {
        assert_eq!(
            fs::read(a.join(file)).unwrap(),
            fs::read(b.join(file)).unwrap(),
            "{file}"
        );
    }
    let traces = fs::read_dir(&a).unwrap().count() - 2;
    assert_eq!(traces, 2 * 3 * 3);
    let (_, rows, _) = read_csv(&a.join("summary.csv"));
    assert_eq!(rows.len(), 6);
    let (_, dom, _) = read_csv(&a.join("dominance.csv"));
    assert_eq!(dom.len(), 2);
}

#[test]
fn headtohead_and_slopes_write_their_fits() {
    let dir = tempfile::tempdir().unwrap();
    let h2h = dir.path().join("h2h.csv");
    let res = prbench(&[
        "headtohead",
        "--n_list",
        "20",
        "--seed_list",
        "0",
        "--methods",
        "gd,gd",
        "--output",
        path_arg(&h2h),
    ]);
    assert!(res.status.success());
    let (_, rows, comments) = read_csv(&h2h);
    assert!(rows.len() > 10);
    assert!(rows.iter().all(|r| r[2] == r[3]));
    assert_eq!(
        comments.last().unwrap(),
        "# mean_slope=1.0000000000000000e0"
    );

    let slopes = dir.path().join("slopes.csv");
    let res = prbench(&[
        "slopes",
        "--n_list",
        "20",
        "--seed_list",
        "3",
        "--methods",
        "gd,nesterov",
        "--output",
        path_arg(&slopes),
    ]);
    assert!(res.status.code().is_some_and(|c| c <= 1));
    let (_, rows, _) = read_csv(&slopes);
    assert_eq!(rows.len(), 1);
    assert_eq!((rows[0][5].as_str(), rows[0][6].as_str()), ("1", "1"));
    assert!(rows[0][3].parse::<f64>().unwrap().is_finite());

    assert_eq!(
        prbench(&["headtohead", "--methods", "gd", "--output", path_arg(&h2h)])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn cdp_writes_errors_and_images() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("scene.pgm");
    accelwf_cdp::synthetic_image(16, 12)
        .write_pgm(&img)
        .unwrap();
    let out = dir.path().join("cdp.csv");
    let res = prbench(&[
        "cdp",
        "--image",
        path_arg(&img),
        "--masks",
        "6",
        "--iters",
        "8",
        "--output",
        path_arg(&out),
    ]);
    assert!(res.status.code().is_some_and(|c| c <= 1));
    let (header, rows, _) = read_csv(&out);
    assert_eq!(header.len(), 7);
    assert_eq!(rows.len(), 9);
    assert_eq!(rows[0][2], "");
    assert!(rows[1..]
        .iter()
        .all(|r| r[2] == "12" && r[4] == "12" && r[6] == "12"));
    for m in ["gd", "polyak", "nesterov"] {
        let back =
            accelwf_cdp::GrayImage::read_pgm(&dir.path().join(format!("cdp_{m}.pgm"))).unwrap();
        assert_eq!((back.width(), back.height()), (16, 12));
    }
}

// Self-comparison: both runs are identical, so every pair lies on the
// diagonal.
#[test]
fn self_comparison_has_unit_slope() {
    let cfg = ExperimentConfig::new(Experiment::HeadToHead);
    for seed in 0..3 {
        let h = head_to_head(
            &cfg,
            30,
            600,
            seed,
            Method::GradientDescent,
            Method::GradientDescent,
        )
        .unwrap();
        assert!(h.pairs.len() > 10);
        assert!((h.slope.unwrap() - 1.0).abs() <= 1e-6);
    }
}

#[test]
fn momentum_is_ahead_in_the_head_to_head() {
    let cfg = ExperimentConfig::new(Experiment::HeadToHead);
    let slopes: Vec<f64> = (0..5)
        .map(|seed| {
            head_to_head(
                &cfg,
                100,
                1000,
                seed,
                Method::GradientDescent,
                Method::Polyak,
            )
            .unwrap()
            .slope
            .unwrap()
        })
        .collect();
    assert!(slopes.iter().sum::<f64>() / 5.0 > 1.0, "{slopes:?}");
}

fn method() -> impl Strategy<Value = Method> {
    prop_oneof![
        Just(Method::GradientDescent),
        Just(Method::Polyak),
        Just(Method::Nesterov)
    ]
}

prop_compose! {
    fn config()(
        experiment in proptest::sample::select(Experiment::ALL.to_vec()),
        n_list in proptest::collection::vec(1usize..5000, 1..4),
        m_list in proptest::collection::vec(1usize..100_000, 0..4),
        seed_list in proptest::collection::vec(any::<u64>(), 1..6),
        methods in proptest::collection::vec(method(), 1..4),
        random in any::<bool>(),
        eta in proptest::option::of(1e-6f64..1.0),
        beta in proptest::option::of(0.0f64..1.0),
        tol in proptest::option::of(1e-12f64..1e-2),
        max_iters in proptest::option::of(0usize..100_000),
        output in proptest::option::of("[a-z][a-z0-9_/.]{0,12}"),
        mu in 1e-3f64..10.0,
        smoothness in 10.0f64..1e4,
        steps in 2usize..100_000,
        masks in 1usize..40,
        iters in 0usize..1000,
        image in proptest::option::of("[a-z][a-z0-9_]{0,8}\\.pgm"),
    ) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(experiment);
        c.n_list = n_list;
        c.m_list = m_list;
        c.seed_list = seed_list;
        c.methods = methods;
        c.init = if random { InitMode::Random } else { InitMode::Spectral };
        c.eta = eta;
        c.beta = beta;
        c.tol = tol;
        c.max_iters = max_iters;
        c.output = output.map(PathBuf::from);
        c.mu = mu;
        c.smoothness = smoothness;
        c.steps = steps;
        c.masks = masks;
        c.iters = iters;
        c.image = image.map(PathBuf::from);
        c
    }
}

proptest! {
    #[test]
    fn config_round_trips(cfg in config()) {
        let text = cfg.to_string();
        let parsed = ExperimentConfig::parse(&text).unwrap();
        prop_assert_eq!(&parsed, &cfg);
        prop_assert_eq!(parsed.to_string(), text);
    }
}
