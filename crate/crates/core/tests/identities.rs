use std::sync::Arc;

use hpl_core::functionals::approx_k_ilt;
use hpl_core::kernels::{Gaussian, Mollifier, TestFunction};
use hpl_core::particle_system::Window;
use hpl_core::rng::replica_rng;
use hpl_core::stable_levy::{sample_path, StableParams, TimeGrid};
use hpl_core::wick::*;

fn gauss2(x: &[f64]) -> f64 {
    (-(x[0] - 0.3).powi(2) - 0.5 * (x[1] + 0.4).powi(2) - 0.2 * x[0] * x[1]).exp()
}

#[test]
fn mecke_palm_second_order() {
    let r = mecke_palm_check(&gauss2, Window::new(3.0).unwrap(), 2, 4000, 19).unwrap();
    assert!(r.z.abs() < 4.0, "{r:?}");
    assert!(r.rhs > 0.0);
}

#[test]
fn mecke_palm_third_order_quadrature() {
    let f = |x: &[f64]| (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp();
    let r = mecke_palm_check(&f, Window::new(2.5).unwrap(), 3, 200, 3).unwrap();
    let exact = (std::f64::consts::PI.sqrt() * libm::erf(2.5)).powi(3);
    assert!((r.rhs - exact).abs() < 1e-8);
}

fn endpoint_f(paths: &[&[f64]]) -> f64 {
    let e: Vec<f64> = paths.iter().map(|p| *p.last().unwrap()).collect();
    match e.len() {
        1 => (-(e[0] - 0.2).powi(2)).exp(),
        _ => gauss2(&e),
    }
}

#[test]
fn permutation_second_moment() {
    let setting = PermutationSetting {
        alpha: 0.7,
        window: Window::new(3.0).unwrap(),
        grid: TimeGrid::new(0.25, 4).unwrap(),
    };
    for k in [1, 2] {
        let r = second_moment_permutation_check(&endpoint_f, k, setting, 4000, 29 + k as u64).unwrap();
        assert!(r.z.abs() < 4.0, "k={k}: {r:?}");
    }
}

#[test]
fn wick_identity_second_order() {
    let phi: Arc<dyn TestFunction> = Arc::new(Gaussian {
        center: 0.5,
        width: 0.5,
        amplitude: 1.0,
    });
    let cfg = WickSystemConfig {
        alpha: 0.7,
        horizon: 4.0,
        step: 0.25,
        window: None,
        calibration_factor: 2,
    };
    let tf = TensorTestFunction::power(phi, 2).unwrap();
    let r = wick_vs_rho_second_moment(&tf, &cfg, 1500, 53).unwrap();
    assert!(r.identity.z.abs() < 4.0, "{r:?}");
    assert!(r.wick_sq > 0.0 && r.rho_sq > 0.0);
}

fn brute_k_ilt(paths: &[Vec<f64>], n: usize, dt: f64, phi: &dyn TestFunction, f: &Mollifier, eps: f64) -> f64 {
    let fe = |x: f64| f.density(x / eps) / eps;
    let mut total = 0.0;
    for s1 in 0..n {
        let x = paths[0][s1];
        for s2 in 0..n {
            for s3 in 0..n {
                total += phi.eval(x) * fe(paths[1][s2] - x) * fe(paths[2][s3] - x);
            }
        }
    }
    total * dt * dt * dt
}

#[test]
fn factorized_k_ilt_matches_triple_sum() {
    let alpha = 0.8;
    let params = StableParams::for_particles(alpha).unwrap();
    let grid = TimeGrid::new(0.1, 30).unwrap();
    let phi = Gaussian {
        center: 0.0,
        width: 1.0,
        amplitude: 1.0,
    };
    let f = Mollifier::bump();
    for trial in 0..5u64 {
        let paths: Vec<Vec<f64>> = (0..3)
            .map(|i| sample_path(params, grid, &mut replica_rng(61 + trial, i)).unwrap().values().to_vec())
            .collect();
        let refs: Vec<&[f64]> = paths.iter().map(|p| p.as_slice()).collect();
        let fast = approx_k_ilt(alpha, &refs, grid, &phi, &f, 0.7, 3.0).unwrap();
        let slow = brute_k_ilt(&paths, 30, 0.1, &phi, &f, 0.7);
        assert!(slow > 0.0);
        assert!((fast - slow).abs() <= 1e-10 * slow, "{fast} vs {slow}");
    }
}
