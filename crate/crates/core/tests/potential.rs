use proptest::prelude::*;
use riesz_core::measure::GridFunction;
use riesz_core::potential::{energy, potential_at, potential_profile};
use riesz_core::Kernel;

mod common;
use common::{energy_oracle, gauss_legendre, psi_oracle};

#[test]
fn uniform_log_kernel_at_center() {
    let k = Kernel::power_law(2.0, 0.0).unwrap();
    let f = GridFunction::from_fn(-1.0, 1.0, 41, |_| 0.5).unwrap();
    let p = potential_at(&k, &f, 0.0);
    assert!((p.value - 7.0 / 6.0).abs() < 1e-6);
    assert!(p.error < 1e-10);
}

#[test]
fn far_field_matches_plain_quadrature() {
    let k = Kernel::power_law(2.0, 0.5).unwrap();
    let f = GridFunction::from_fn(-1.0, 1.0, 21, |_| 0.5).unwrap();
    let gl = gauss_legendre(40);
    let oracle: f64 = gl.iter().map(|(t, w)| w * 0.5 * k.g(3.0 - t)).sum();
    assert!((potential_at(&k, &f, 3.0).value - oracle).abs() < 1e-10);
}

#[test]
fn refinement_halves_the_error() {
    // ψ(0) for f = 3/4 (1 − y²) and g = y²/2 − ln|y| equals 43/30
    let k = Kernel::power_law(2.0, 0.0).unwrap();
    let exact = 43.0 / 30.0;
    let errs: Vec<f64> = [11, 21, 41, 81]
        .iter()
        .map(|&n| {
            let f = GridFunction::from_fn(-1.0, 1.0, n, |y| 0.75 * (1.0 - y * y)).unwrap();
            (potential_at(&k, &f, 0.0).value - exact).abs()
        })
        .collect();
    for w in errs.windows(2) {
        assert!(w[1] <= 0.5 * w[0], "{errs:?}");
    }
}

#[test]
fn error_estimate_covers_parabola() {
    let k = Kernel::power_law(2.0, 0.0).unwrap();
    let f = GridFunction::from_fn(-1.0, 1.0, 41, |y| 0.75 * (1.0 - y * y)).unwrap();
    let gl = gauss_legendre(40);
    for x in [-0.73, 0.0, 0.05, 0.5] {
        let p = potential_at(&k, &f, x);
        let oracle = psi_oracle(&k, &f, x, &gl);
        assert!((p.value - oracle).abs() < 1e-10, "{x}: {} vs {oracle}", p.value);
    }
}

#[test]
fn uniform_energy_closed_form() {
    // E|X−Y|²/2 = 1/3 and E(−ln|X−Y|) = 3/2 − ln 2 for X, Y uniform on [−1, 1]
    let k = Kernel::power_law(2.0, 0.0).unwrap();
    let f = GridFunction::from_fn(-1.0, 1.0, 41, |_| 0.5).unwrap();
    let exact = 1.0 / 3.0 + 1.5 - 2f64.ln();
    assert!((energy(&k, &f) - exact).abs() < 1e-6, "{}", energy(&k, &f));
    assert!((energy_oracle(&k, &f) - exact).abs() < 1e-8);
}

#[test]
fn energy_matches_double_quadrature_on_random_densities() {
    let k = Kernel::power_law(3.0, -0.5).unwrap();
    for seed in 0..10u64 {
        let c = [(seed as f64 * 0.37).sin(), (seed as f64 * 1.3).cos(), 0.5 * (seed as f64).sin()];
        let f = GridFunction::from_fn(-1.0, 1.0, 31, |x| {
            (1.0 + c[0] * x + c[1] * (3.0 * x).sin() * 0.5 + c[2] * x * x).max(0.0)
        })
        .unwrap();
        let (e, o) = (energy(&k, &f), energy_oracle(&k, &f));
        assert!((e - o).abs() < 1e-6, "seed {seed}: {e} vs {o}");
    }
}

#[test]
fn uniform_is_not_constant_potential() {
    let k = Kernel::power_law(2.0, 0.0).unwrap();
    let f = GridFunction::from_fn(-1.0, 1.0, 201, |_| 0.5).unwrap();
    let xs: Vec<f64> = (1..40).map(|i| -1.0 + i as f64 / 20.0).collect();
    let prof = potential_profile(&k, &f, &xs);
    assert!(prof.constancy.unwrap().relative_stdev() > 1e-2);
}

#[test]
fn semicircle_potential_is_flat() {
    let k = Kernel::power_law(2.0, 0.0).unwrap();
    let s = std::f64::consts::SQRT_2;
    let f = GridFunction::from_fn(-s, s, 801, |x| (2.0 - x * x).max(0.0).sqrt() / std::f64::consts::PI).unwrap();
    let xs: Vec<f64> = (1..60).map(|i| -s + 2.0 * s * i as f64 / 60.0).collect();
    let prof = potential_profile(&k, &f, &xs);
    assert!(prof.constancy.unwrap().relative_stdev() <= 1e-2);
}

#[test]
fn profile_csv_header() {
    let k = Kernel::power_law(2.0, 0.0).unwrap();
    let f = GridFunction::from_fn(-1.0, 1.0, 21, |_| 0.5).unwrap();
    let mut buf = Vec::new();
    potential_profile(&k, &f, &[0.0, 0.5]).write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("x,psi,err\n"));
    assert_eq!(text.lines().count(), 3);
}

fn kernel_from(a: f64, lf: f64) -> Kernel {
    let l = -0.9 + lf * (a.min(1.0) + 0.9) * 0.95;
    Kernel::power_law(a, l).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn linearity(a in 0.5f64..4.0, lf in 0.0f64..1.0, c1 in -1.0f64..1.0, c2 in -1.0f64..1.0, x in -1.5f64..1.5) {
        let k = kernel_from(a, lf);
        let f1 = GridFunction::from_fn(-1.0, 1.0, 41, |y| 1.0 + c1 * y).unwrap();
        let f2 = GridFunction::from_fn(-1.0, 1.0, 41, |y| (c2 * 3.0 * y).cos()).unwrap();
        let sum = GridFunction::new(-1.0, 1.0, f1.values().iter().zip(f2.values()).map(|(a, b)| a + b).collect()).unwrap();
        let (p1, p2, ps) = (potential_at(&k, &f1, x), potential_at(&k, &f2, x), potential_at(&k, &sum, x));
        prop_assert!((ps.value - p1.value - p2.value).abs() <= p1.error + p2.error + ps.error + 1e-12);
    }

    #[test]
    fn even_density_even_potential(a in 0.5f64..4.0, lf in 0.0f64..1.0, c in -1.0f64..1.0) {
        let k = kernel_from(a, lf);
        let f = GridFunction::from_fn(-1.0, 1.0, 41, |y| 1.0 + c * y * y).unwrap();
        for i in 1..=20 {
            let x = 0.07 * i as f64;
            let (p, q) = (potential_at(&k, &f, x).value, potential_at(&k, &f, -x).value);
            prop_assert!((p - q).abs() <= 1e-10 * p.abs().max(1.0), "{} {}", p, q);
        }
    }

    #[test]
    fn odd_density_odd_potential(a in 0.5f64..4.0, lf in 0.0f64..1.0, c in 0.1f64..2.0) {
        let k = kernel_from(a, lf);
        let f = GridFunction::from_fn(-1.0, 1.0, 41, |y| (c * y).sin()).unwrap();
        for i in 1..=20 {
            let x = 0.07 * i as f64;
            let (p, q) = (potential_at(&k, &f, x).value, potential_at(&k, &f, -x).value);
            prop_assert!((p + q).abs() <= 1e-10 * p.abs().max(1.0), "{} {}", p, q);
        }
    }
}
