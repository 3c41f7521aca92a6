use std::f64::consts::PI;

use hpl_core::quad;
use hpl_core::rng::replica_rng;
use hpl_core::stable_levy::*;
use hpl_core::stats::{energy_distance_test, mean_se};

#[test]
fn empirical_characteristic_function() {
    let params = StableParams::new(0.7).unwrap();
    let dt = 0.5;
    let mut rng = replica_rng(11, 0);
    let xs: Vec<f64> = (0..100_000).map(|_| sample_increment(params, dt, &mut rng).unwrap()).collect();
    for theta in [0.3, 1.0, 3.0] {
        let (c, se_c) = mean_se(&xs.iter().map(|x| (theta * x).cos()).collect::<Vec<_>>());
        let (s, se_s) = mean_se(&xs.iter().map(|x| (theta * x).sin()).collect::<Vec<_>>());
        let target = (-dt * f64::powf(theta, 0.7)).exp();
        assert!((c - target).abs() < 4.0 * se_c, "theta={theta}: {c} vs {target}");
        assert!(s.abs() < 4.0 * se_s, "theta={theta}: sine part {s}");
    }
}

#[test]
fn path_endpoint_matches_single_scaled_draw() {
    // energy distance needs a first moment, so compare after arctan for α < 1
    for (alpha, squash) in [(1.5, false), (0.7, true)] {
        let params = StableParams::new(alpha).unwrap();
        let grid = TimeGrid::new(0.1, 40).unwrap();
        let f = |x: f64| if squash { x.atan() } else { x };
        let a: Vec<Vec<f64>> = (0..600)
            .map(|r| {
                let p = sample_path(params, grid, &mut replica_rng(21, r)).unwrap();
                vec![f(*p.values().last().unwrap())]
            })
            .collect();
        let b: Vec<Vec<f64>> = (0..600)
            .map(|r| {
                let s = standard_draw(alpha, &mut replica_rng(22, r));
                vec![f(4f64.powf(1.0 / alpha) * s)]
            })
            .collect();
        let report = energy_distance_test(&a, &b, 199, 5).unwrap();
        assert!(report.p_value > 0.01, "alpha={alpha}: {report:?}");
    }
}

/// `2∫_A^∞ p_1` from the termwise-integrated series (asymptotic for α > 1,
/// so only a few terms are kept there).
fn tail_mass(alpha: f64, a: f64) -> f64 {
    let terms = if alpha < 1.0 { 200 } else { 6 };
    let mut s = 0.0;
    for n in 1..terms {
        let nf = n as f64;
        let term = (libm::lgamma(nf * alpha + 1.0) - libm::lgamma(nf + 1.0) - nf * alpha * a.ln()).exp()
            * (nf * PI * alpha / 2.0).sin()
            / (nf * alpha);
        s += if n % 2 == 1 { term } else { -term };
    }
    2.0 * s / PI
}

#[test]
fn density_normalizes_with_tail_correction() {
    for (alpha, a) in [(0.7, 1e4), (1.5, 200.0)] {
        let params = StableParams::new(alpha).unwrap();
        let breaks = [-a, -100.0, -10.0, -2.0, 0.0, 2.0, 10.0, 100.0, a];
        let inner = quad::integrate_pieces(|x| transition_density(params, 1.0, x).unwrap(), &breaks, 1e-10)
            .unwrap()
            .value;
        let total = inner + tail_mass(alpha, a);
        assert!((total - 1.0).abs() < 1e-6, "alpha={alpha}: {inner} + tail = {total}");
    }
}

#[test]
fn density_matches_sample_frequencies() {
    let params = StableParams::new(0.7).unwrap();
    let mass = quad::integrate(|x| transition_density(params, 2.0, x).unwrap(), -1.0, 1.0, 1e-10)
        .unwrap()
        .value;
    let mut rng = replica_rng(3, 0);
    let hits: Vec<f64> = (0..50_000)
        .map(|_| (sample_increment(params, 2.0, &mut rng).unwrap().abs() <= 1.0) as u8 as f64)
        .collect();
    let (p, se) = mean_se(&hits);
    assert!((p - mass).abs() < 4.0 * se, "{p} vs {mass}");
}

#[test]
fn potential_constant_closed_form() {
    // ∫₀^∞ p_s(x) ds = (1/π) ∫₀^∞ cos(xθ) θ^{-α} dθ = Γ(1-α) sin(πα/2)/π · |x|^{α-1}
    for alpha in [0.5, 0.6, 0.7, 0.9] {
        let params = StableParams::for_particles(alpha).unwrap();
        let exact = libm::tgamma(1.0 - alpha) * (PI * alpha / 2.0).sin() / PI;
        let c = potential_constant(params).unwrap();
        assert!((c / exact - 1.0).abs() < 1e-8, "alpha={alpha}: {c} vs {exact}");
        let k = potential_kernel(params, -2.5).unwrap();
        assert!((k / (exact * 2.5f64.powf(alpha - 1.0)) - 1.0).abs() < 1e-8);
    }
}

#[test]
fn density_scaling_in_time() {
    let params = StableParams::new(0.6).unwrap();
    for &(s, x) in &[(0.5, 0.3), (3.0, 4.0), (10.0, -20.0)] {
        let direct = transition_density(params, s, x).unwrap();
        let scaled = s.powf(-1.0 / 0.6) * transition_density(params, 1.0, x * s.powf(-1.0 / 0.6)).unwrap();
        assert!((direct - scaled).abs() < 1e-14 * direct.max(1e-300));
    }
}
