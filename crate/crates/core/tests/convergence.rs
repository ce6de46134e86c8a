use accelwf::diagnostics::{check_inc, check_loc, concentration_report, RicConfig};
use accelwf::init::spectral_init;
use accelwf::linalg::symmetric_extremes;
use accelwf::model::{observe, sample_unit_sphere};
use accelwf::solvers::{self, default_params, Method, Status};
use accelwf::{dist, rng, GroundTruth, IterationTrace, Observations, PhaseObjective, SensingEnsemble};
use ndarray::Array1;

fn theory_m(n: usize) -> usize {
    (10.0 * n as f64 * (n as f64).ln()).round() as usize
}

fn problem(m: usize, n: usize, seed: u64) -> (SensingEnsemble, GroundTruth, Observations) {
    let ens = SensingEnsemble::sample(m, n, seed).unwrap();
    let gt = GroundTruth::unit(n, seed).unwrap();
    let y = observe(&ens, &gt).unwrap();
    (ens, gt, y)
}

fn norm(v: &Array1<f64>) -> f64 {
    v.dot(v).sqrt()
}

fn spectral_run(ens: &SensingEnsemble, gt: &GroundTruth, y: &Observations, method: Method) -> (IterationTrace, f64) {
    let x0 = spectral_init(ens, y, 1e-10, 1000).unwrap().x0;
    let params = default_params(ens.n(), norm(&x0), method).unwrap();
    (solvers::run(ens, y, &x0, &params, Some(gt)).unwrap(), params.eta)
}

#[test]
fn golden_gradient_descent_trace() {
    let (ens, gt, y) = problem(200, 10, 0);
    let (trace, _) = spectral_run(&ens, &gt, &y, Method::GradientDescent);
    assert_eq!(trace.status, Status::Converged);
    assert_eq!(trace.iterations(), 577);
    let d = trace.dists();
    let frozen = [
        (0, 0x3fd976e7c05ec678u64),
        (1, 0x3fd7bf7b03e60bd1),
        (10, 0x3fcfb7124963c842),
        (100, 0x3f8aef8cd0fe2ab1),
        (500, 0x3ea4a527f1d3fac1),
        (577, 0x3e7abf7fd387d762),
    ];
    for (t, bits) in frozen {
        assert_eq!(d[t].to_bits(), bits, "t = {t}: {:e}", d[t]);
    }
    // Final phase: monotone geometric decay.
    let ratios = trace.final_dist_ratios(100);
    assert!(ratios.iter().all(|r| *r < 1.0));
    let spread = ratios.iter().cloned().fold(0.0, f64::max) - ratios.iter().cloned().fold(1.0, f64::min);
    assert!(spread < 1e-3, "spread {spread}");
}

#[test]
fn heavy_ball_beats_gradient_descent_on_the_golden_problem() {
    let (ens, gt, y) = problem(200, 10, 0);
    let gd = spectral_run(&ens, &gt, &y, Method::GradientDescent).0;
    let hb = spectral_run(&ens, &gt, &y, Method::Polyak).0;
    assert_eq!(hb.status, Status::Converged);
    assert!(hb.iterations() < gd.iterations());
}

#[test]
fn starting_at_the_truth_converges_at_step_zero() {
    let (ens, gt, y) = problem(50, 5, 3);
    for method in Method::ALL {
        let params = default_params(5, 1.0, method).unwrap();
        let trace = solvers::run(&ens, &y, gt.x_star(), &params, Some(&gt)).unwrap();
        assert_eq!(trace.status, Status::Converged);
        assert_eq!(trace.records.len(), 1);
        assert_eq!(trace.records[0].dist, Some(0.0));
    }
}

// Rates near the truth, n = 64, m = 10 n log n, ten seeds.
#[test]
fn asymptotic_rates_and_incoherence_along_the_path() {
    let n = 64;
    let inc_bound = 5.0 * (n as f64).ln().sqrt();
    for seed in 0..10 {
        let (ens, gt, y) = problem(theory_m(n), n, seed);
        for method in Method::ALL {
            let (trace, eta) = spectral_run(&ens, &gt, &y, method);
            assert_eq!(trace.status, Status::Converged, "seed {seed}, {method}");
            let (ratios, bound) = match method {
                Method::GradientDescent => (trace.final_dist_ratios(50), 1.0 - eta / 2.0 + 0.05),
                _ => (trace.final_ratios(50), 1.0 - eta.sqrt() / 2.0 + 0.05),
            };
            assert_eq!(ratios.len(), 50);
            let worst = ratios.iter().cloned().fold(0.0, f64::max);
            assert!(worst <= bound, "seed {seed}, {method}: {worst} > {bound}");
            for r in &trace.records {
                assert!(r.max_incoherence.unwrap() <= inc_bound, "seed {seed}, {method}, t = {}", r.t);
                assert_eq!(r.inc_ok, Some(true));
            }
        }
    }
}

// Once dist ≤ C2 √log n / √(6n), Cauchy–Schwarz and the row-norm bound
// imply incoherence.
#[test]
fn late_phase_locality_implies_incoherence() {
    let n = 32;
    let cfg = RicConfig::default();
    let threshold = cfg.c2 * (n as f64).ln().sqrt() / (6.0 * n as f64).sqrt();
    for seed in 0..5 {
        let (ens, gt, y) = problem(theory_m(n), n, seed);
        let rep = concentration_report(&ens, &Array1::zeros(n)).unwrap();
        assert!(rep.row_norm_ok);
        for method in Method::ALL {
            let (trace, _) = spectral_run(&ens, &gt, &y, method);
            let late: Vec<_> = trace.records.iter().filter(|r| r.dist.unwrap() <= threshold).collect();
            assert!(!late.is_empty());
            for r in late {
                assert!(r.max_incoherence.unwrap() <= rep.max_row_norm * r.dist.unwrap() * (1.0 + 1e-12));
                assert_eq!(r.inc_ok, Some(true));
            }
        }
    }
}

// At m/n = 100 the estimate typically lands 0.13 to 0.24 from the truth,
// so the band sits above that spread.
#[test]
fn spectral_init_lands_near_the_truth() {
    for seed in 0..20 {
        let (ens, gt, y) = problem(5000, 50, seed);
        let rep = spectral_init(&ens, &y, 1e-10, 1000).unwrap();
        let d = dist(&rep.x0, gt.x_star()).unwrap();
        assert!(d <= 0.3, "seed {seed}: {d}");
    }
}

#[test]
fn spectral_init_matches_dense_eigendecomposition() {
    for seed in 0..5 {
        let (ens, _, y) = problem(600, 12, seed);
        let rows = ens.rows();
        let weighted = rows * &y.y().view().insert_axis(ndarray::Axis(1));
        let dense = weighted.t().dot(rows) / ens.m() as f64;
        let eig = nalgebra::SymmetricEigen::new(nalgebra::DMatrix::from_fn(12, 12, |i, j| dense[[i, j]]));
        let top = eig.eigenvalues.imax();
        let lambda = eig.eigenvalues[top];
        let v = Array1::from_iter(eig.eigenvectors.column(top).iter().copied());
        let rep = spectral_init(&ens, &y, 1e-12, 5000).unwrap();
        assert!((rep.lambda1 - lambda).abs() <= 1e-10 * lambda);
        assert!(dist(&rep.x0, &(v * (lambda / 3.0).sqrt())).unwrap() < 1e-8);
    }
}

#[test]
fn spectral_init_points_are_incoherent() {
    let n = 64;
    let cfg = RicConfig::default();
    for seed in 0..20 {
        let (ens, gt, y) = problem(theory_m(n), n, seed);
        let x0 = spectral_init(&ens, &y, 1e-10, 1000).unwrap().x0;
        let (ok, value) = check_inc(&x0, &gt, &ens, &cfg).unwrap();
        assert!(ok, "seed {seed}: {value}");
    }
}

#[test]
fn hessian_is_well_conditioned_inside_the_ric() {
    let n = 64;
    let cfg = RicConfig::default();
    let (ens, gt, y) = problem(theory_m(n), n, 5);
    let obj = PhaseObjective::new(&ens, &y).unwrap();
    let radius = 2.0 * cfg.c1 * gt.norm();
    let mut checked = 0;
    let mut draw = 0u64;
    while checked < 20 {
        let mut r = rng::stream(99, draw);
        let u = sample_unit_sphere(n, 1000 + draw).unwrap();
        let x = gt.x_star() + &(u * (radius * rng::uniform(&mut r)));
        draw += 1;
        if !check_loc(&x, &gt, &cfg).unwrap() || !check_inc(&x, &gt, &ens, &cfg).unwrap().0 {
            continue;
        }
        let (lo, hi) = symmetric_extremes(&obj.hessian(&x).unwrap());
        assert!(lo >= 0.45, "draw {draw}: lambda_min {lo}");
        assert!(hi <= 20.0 * (n as f64).ln(), "draw {draw}: lambda_max {hi}");
        checked += 1;
    }
}

#[test]
fn gaussian_concentration_over_twenty_seeds() {
    let n = 100;
    let probe = sample_unit_sphere(n, 12345).unwrap();
    for seed in 0..20 {
        let ens = SensingEnsemble::sample(1000, n, seed).unwrap();
        let rep = concentration_report(&ens, &probe).unwrap();
        assert!(rep.passed(), "seed {seed}: {rep:?}");
    }
}
