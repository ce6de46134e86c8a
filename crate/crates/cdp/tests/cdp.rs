use accelwf::rng;
use accelwf::solvers::{Method, Status};
use accelwf_cdp::*;
use ndarray::Array1;
use num_complex::Complex64;
use proptest::prelude::*;

fn random_signal(n: usize, seed: u64) -> Array1<Complex64> {
    let g = rng::normal_vec(seed, 0, 2 * n);
    Array1::from_shape_fn(n, |j| Complex64::new(g[2 * j], g[2 * j + 1]))
}

fn operator(l: usize, h: usize, w: usize, seed: u64) -> CdpOperator {
    CdpOperator::new(CdpMasks::sample(l, h, w, seed).unwrap())
}

fn cost(op: &CdpOperator, y: &[f64], z: &Array1<Complex64>) -> f64 {
    CdpObjective::new(op, y).unwrap().cost(z).unwrap()
}

#[test]
fn zero_signal_gives_zero_observations() {
    let op = operator(3, 4, 4, 0);
    assert!(cdp_observe(&Array1::zeros(16), &op).unwrap().iter().all(|v| *v == 0.0));
}

#[test]
fn each_block_conserves_energy() {
    let op = operator(5, 6, 7, 1);
    let z = random_signal(42, 1);
    let y = cdp_observe(&z, &op).unwrap();
    for (l, block) in y.chunks(42).enumerate() {
        let energy: f64 = op.masks().mask(l).iter().zip(z.iter()).map(|(d, v)| (d * v).norm_sqr()).sum();
        assert!((block.iter().sum::<f64>() - energy).abs() < 1e-10 * energy);
    }
}

#[test]
fn gradient_vanishes_at_the_truth() {
    let op = operator(4, 8, 8, 2);
    let z = random_signal(64, 2);
    let y = cdp_observe(&z, &op).unwrap();
    let g = cdp_gradient(&z, &y, &op).unwrap();
    assert!(g.iter().all(|c| c.norm() < 1e-14));
}

// Real and imaginary parts treated as independent real variables:
// ∂f/∂Re z_j + i ∂f/∂Im z_j equals the Wirtinger gradient.
#[test]
fn gradient_matches_finite_differences() {
    let op = operator(4, 4, 4, 3);
    let y = cdp_observe(&random_signal(16, 3), &op).unwrap();
    for k in 0..5 {
        let z = random_signal(16, 100 + k);
        let g = cdp_gradient(&z, &y, &op).unwrap();
        let h = 1e-5 * (1.0 + z.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt());
        let mut diff = 0.0;
        let mut scale = 0.0;
        for j in 0..16 {
            let mut fd = Complex64::default();
            for (unit, part) in [(Complex64::new(1.0, 0.0), 0), (Complex64::new(0.0, 1.0), 1)] {
                let mut up = z.clone();
                let mut down = z.clone();
                up[j] += unit * h;
                down[j] -= unit * h;
                let d = (cost(&op, &y, &up) - cost(&op, &y, &down)) / (2.0 * h);
                if part == 0 {
                    fd.re = d;
                } else {
                    fd.im = d;
                }
            }
            diff += (g[j] - fd).norm_sqr();
            scale += fd.norm_sqr();
        }
        let err = (diff / scale).sqrt();
        assert!(err < 1e-6, "point {k}: {err}");
    }
}

#[test]
fn single_pixel_reduces_to_the_real_formula() {
    let masks = CdpMasks::from_masks(1, 1, vec![vec![Complex64::new(1.0, 0.0)]]).unwrap();
    let op = CdpOperator::new(masks);
    let z = Array1::from(vec![Complex64::new(2.0, 0.0)]);
    let g = cdp_gradient(&z, &[1.0], &op).unwrap();
    assert!((g[0] - Complex64::new(6.0, 0.0)).norm() < 1e-15);
    assert_eq!(cdp_observe(&z, &op).unwrap(), vec![4.0]);
}

#[test]
fn dimension_mismatches_are_rejected() {
    let op = operator(2, 4, 4, 0);
    assert!(cdp_observe(&Array1::zeros(15), &op).is_err());
    assert!(cdp_gradient(&Array1::zeros(16), &[0.0; 31], &op).is_err());
    assert!(cdp_gradient(&Array1::zeros(15), &[0.0; 32], &op).is_err());
}

#[test]
fn relative_error_ignores_global_phase() {
    let z = random_signal(30, 4);
    for phi in [0.0, 0.3, 2.0, -1.1] {
        let rotated = &z * Complex64::from_polar(1.0, phi);
        assert!(relative_error(&rotated, &z) < 1e-15);
    }
    let half = &z * Complex64::new(0.5, 0.0);
    assert!((relative_error(&half, &z) - 0.5).abs() < 1e-14);
}

#[test]
fn zero_iterations_report_the_initial_error() {
    let img = synthetic_image(8, 8);
    let trace = cdp_run(&img, 6, Method::Polyak, 0, 1).unwrap();
    assert_eq!(trace.rel_err.len(), 1);
    assert!(trace.ffts_per_iter.is_empty());
    assert_eq!(trace.status, Status::MaxIters);
}

#[test]
fn runs_are_deterministic_and_cost_the_same_transforms() {
    let img = synthetic_image(16, 16);
    let l = 6;
    for method in Method::ALL {
        let a = cdp_run(&img, l, method, 30, 5).unwrap();
        let b = cdp_run(&img, l, method, 30, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.ffts_per_iter, vec![2 * l; 30]);
        assert!(a.rel_err.last().unwrap() < &a.rel_err[0]);
    }
}

#[test]
fn recovered_image_round_trips_through_a_graymap() {
    let img = synthetic_image(12, 10);
    let trace = cdp_run(&img, 8, Method::Nesterov, 20, 2).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.pgm");
    let out = GrayImage::from_signal(12, 10, &trace.estimate).unwrap();
    out.write_pgm(&path).unwrap();
    let back = GrayImage::read_pgm(&path).unwrap();
    assert_eq!((back.width(), back.height()), (12, 10));
    for (a, b) in back.pixels().iter().zip(out.pixels()) {
        assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
    }
    let missing = dir.path().join("nope").join("x.pgm");
    let err = GrayImage::read_pgm(&missing).unwrap_err().to_string();
    assert!(err.contains("nope"), "{err}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn observations_are_phase_invariant(seed in any::<u64>(), phi in -3.2f64..3.2) {
        let op = operator(3, 5, 3, seed);
        let z = random_signal(15, seed);
        let a = cdp_observe(&z, &op).unwrap();
        let b = cdp_observe(&(&z * Complex64::from_polar(1.0, phi)), &op).unwrap();
        for (p, q) in a.iter().zip(&b) {
            prop_assert!((p - q).abs() <= 1e-12 * p.abs().max(1.0));
        }
    }

    #[test]
    fn masks_regenerate_bit_identically(seed in any::<u64>(), l in 1usize..6) {
        prop_assert_eq!(CdpMasks::sample(l, 4, 5, seed).unwrap(), CdpMasks::sample(l, 4, 5, seed).unwrap());
    }
}
