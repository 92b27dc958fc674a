use std::f64::consts::PI;

use proptest::prelude::*;
use riesz_core::measure::{GridDensity, GridFunction};
use riesz_core::mollify::Mollified;
use riesz_core::regularity::*;
use riesz_core::solver::{minimize, SolveConfig};
use riesz_core::{Error, Kernel};

mod common;
use common::{even_oscillator, odd_oscillator};

fn k20() -> Kernel {
    Kernel::power_law(2.0, 0.0).unwrap()
}

#[test]
fn convex_sin_squared_example() {
    let f = TestFunction::new(0.0, 0.5, Profile::SinSquared { omega: 2.0 * PI }).unwrap();
    let c = check_convex_cancellation(&k20(), &f, 0.6).unwrap();
    assert_eq!(c.clause, ConvexClause::Right);
    assert!(c.value >= -1e-8 && c.holds, "{c:?}");
}

#[test]
fn convex_constant_is_zero() {
    let f = TestFunction::new(-0.2, 0.3, Profile::Constant { c: 2.0 }).unwrap();
    let c = check_convex_cancellation(&k20(), &f, 0.5).unwrap();
    assert_eq!(c.value, 0.0);
}

#[test]
fn convex_rejects_interior_point_and_bad_endpoints() {
    let k = k20();
    let f = TestFunction::new(0.0, 0.5, Profile::SinSquared { omega: 2.0 * PI }).unwrap();
    assert!(matches!(check_convex_cancellation(&k, &f, 0.25), Err(Error::Hypothesis(_))));
    // endpoints are maxima here
    let g = TestFunction::new(0.0, 0.5, Profile::OneMinusCos { omega: 2.0 * PI, shift: 0.25 }).unwrap();
    assert!(matches!(check_convex_cancellation(&k, &g, 0.6), Err(Error::Hypothesis(_))));
    // x too far from alpha
    assert!(matches!(check_convex_cancellation(&k, &f, 1.2), Err(Error::Hypothesis(_))));
}

#[test]
fn concave_one_minus_cos_example() {
    let f = TestFunction::new(0.0, 0.4, Profile::OneMinusCos { omega: 2.0 * PI, shift: 0.0 }).unwrap();
    let c = check_concave_cancellation(&k20(), &f, -0.3, -0.1).unwrap();
    assert!(c.value >= -1e-8 && c.holds, "{c:?}");
}

#[test]
fn concave_equal_points_vanish() {
    let f = TestFunction::new(0.0, 0.4, Profile::OneMinusCos { omega: 2.0 * PI, shift: 0.0 }).unwrap();
    let c = check_concave_cancellation(&k20(), &f, -0.2, -0.2).unwrap();
    assert_eq!(c.value, 0.0);
}

#[test]
fn smoothstep_rearrangement_rhs() {
    let f = TestFunction::new(0.0, 0.5, Profile::Smoothstep { start: 0.0, width: 0.5, height: 1.0 }).unwrap();
    let r = check_rearrangement_inequality(&k20(), &f).unwrap();
    // |g′(1/2)| + |g′(1/4)| = 1.5 + 3.75 for g′(x) = x − 1/x
    assert!((r.rhs - 5.25).abs() < 1e-12, "{}", r.rhs);
    assert!(r.lhs >= 5.25 - 1e-8 && r.holds);
    assert!(r.basecase.holds);
    assert_eq!(r.basecase.sign, if r.basecase.p_is_max { 1 } else { -1 });
}

#[test]
fn rearrangement_constant_is_trivial() {
    let f = TestFunction::new(0.0, 0.5, Profile::Constant { c: 1.0 }).unwrap();
    let r = check_rearrangement_inequality(&k20(), &f).unwrap();
    assert_eq!((r.lhs, r.rhs), (0.0, 0.0));
}

#[test]
fn decreasing_rearrangement_flips_inequality() {
    let f = TestFunction::new(0.0, 0.5, Profile::Smoothstep { start: 0.0, width: 0.5, height: -1.0 }).unwrap();
    let r = check_rearrangement_inequality(&k20(), &f).unwrap();
    assert_eq!(r.orientation, Orientation::Decreasing);
    assert!(r.lhs <= r.rhs + 1e-8);
    assert!(r.basecase.holds);
}

#[test]
fn monotone_half_bounds_hold() {
    for (a, l) in [(2.0, 0.0), (3.0, -0.5), (2.0, 0.5)] {
        let k = Kernel::power_law(a, l).unwrap();
        let g = 0.4 * k.r();
        let f = TestFunction::new(0.1, 0.1 + g, Profile::Smootherstep { start: 0.1, width: g, height: 2.0 }).unwrap();
        let b = monotone_half_bounds(&k, &f).unwrap();
        assert!(b.holds, "{b:?}");
        assert!(b.from_alpha.0 >= b.from_alpha.1 - 1e-8 && b.from_beta.0 >= b.from_beta.1 - 1e-8);
    }
}

#[test]
fn change_of_variables_on_monotone_pieces() {
    let k = k20();
    let f = Profile::SinSquared { omega: 2.0 * PI };
    let pieces = monotone_pieces(&f, 0.0, 1.0, 2000);
    assert_eq!(pieces.len(), 4, "{pieces:?}");
    for (lo, hi) in pieces {
        for x in [hi + 0.05, lo - 0.3] {
            let c = change_of_variables(&k, &f, lo, hi, x).unwrap();
            assert!((c.direct - c.substituted).abs() <= 1e-8, "{c:?}");
        }
    }
}

#[test]
fn sweeps_have_no_violations() {
    let kernels = standard_kernels().unwrap();
    for lemma in Lemma::ALL {
        let rep = sweep(lemma, &kernels, 200, 17).unwrap();
        assert!(rep.passed(), "{lemma:?}: {:?}", rep.violations.first());
        assert!(rep.min_margin >= -VIOLATION_TOL);
        if lemma == Lemma::Rearrangement {
            assert_eq!(rep.basecase_identified, rep.trials);
            assert!(rep.non_monotone > 0, "sweep never produced a non-monotone instance");
        }
    }
}

#[test]
fn sweep_is_reproducible() {
    let kernels = standard_kernels().unwrap();
    let a = sweep(Lemma::ConcaveCancellation, &kernels, 30, 5).unwrap();
    let b = sweep(Lemma::ConcaveCancellation, &kernels, 30, 5).unwrap();
    assert_eq!((a.rejected, a.min_margin), (b.rejected, b.min_margin));
    assert!(matches!(sweep(Lemma::ConcaveCancellation, &kernels, 0, 5), Err(Error::Config(_))));
}

#[test]
fn instance_replay_roundtrip() {
    let k = Kernel::power_law(3.0, -0.5).unwrap();
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(9);
    for lemma in Lemma::ALL {
        let inst = loop {
            let i = random_instance(lemma, &k, &mut rng);
            if i.run().is_ok() {
                break i;
            }
        };
        let json = serde_json::to_string(&inst).unwrap();
        let back: LemmaInstance = serde_json::from_str(&json).unwrap();
        assert_eq!(back, inst);
        assert_eq!(back.run().unwrap().margin(), inst.run().unwrap().margin());
    }
    let bad = r#"{"lemma":"convex_cancellation","kernel":{"form":"power_law","alpha":2.0,"lambda":0.0},
        "function":{"alpha":0.0,"beta":0.5,"profile":{"kind":"sin_squared","omega":6.283185307179586}},"x":0.25}"#;
    let inst: LemmaInstance = serde_json::from_str(bad).unwrap();
    assert!(matches!(inst.run(), Err(Error::Hypothesis(_))));
}

/// `ψ″(0)` for `k = (2, 0)` by two integrations by parts: `∫F + ∫F′(t)/t`,
/// by a composite midpoint rule on the even integrand.
fn bump_oracle(f: &Profile) -> f64 {
    let n = 400_000;
    let h = 1.0 / n as f64;
    let mut mass = 0.0;
    let mut log_part = 0.0;
    for i in 0..n {
        let t = (i as f64 + 0.5) * h;
        mass += (f.value(t) + f.value(-t)) * h;
        log_part += (f.d1(t) / t + f.d1(-t) / -t) * h;
    }
    mass + log_part
}

#[test]
fn second_derivative_of_bump_matches_oracle() {
    let f = Profile::Bump { center: 0.0, width: 1.0, height: 1.0 };
    let s = psi_second_derivative_at_critical(&k20(), &f, 0.0).unwrap();
    let oracle = bump_oracle(&f);
    assert!(s.agree, "{s:?}");
    for v in s.forms {
        assert!((v - oracle).abs() <= 1e-5 * oracle.abs(), "{v} vs {oracle}");
    }
}

#[test]
fn second_derivative_forms_agree_on_random_functions() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let kernels = standard_kernels().unwrap();
    let mut checked = 0;
    let mut rejected = 0;
    let mut trial = 0;
    while checked < 100 || rejected < 20 {
        let k = &kernels[trial % kernels.len()];
        trial += 1;
        let terms: Vec<Profile> = (0..rng.random_range(2..=5))
            .map(|_| Profile::Bump {
                center: rng.random_range(-0.6..0.6),
                width: rng.random_range(0.1..0.5),
                height: rng.random_range(-1.0..1.0),
            })
            .collect();
        let f = Profile::Sum { terms };
        let (lo, hi) = f.support().unwrap();
        let crit = critical_points(&f, lo, hi, 4000);
        if checked < 100 {
            if let Some(&x) = crit.get(rng.random_range(0..crit.len().max(1))) {
                let s = psi_second_derivative_at_critical(k, &f, x).unwrap();
                assert!(s.agree, "{s:?}\n{}\n{}", serde_json::to_string(k.spec()).unwrap(), serde_json::to_string(&f).unwrap());
                checked += 1;
            }
        }
        if rejected < 20 {
            let x = rng.random_range(lo..hi);
            if f.d1(x).abs() > 1e-3 {
                let e = psi_second_derivative_at_critical(k, &f, x).unwrap_err();
                assert!(matches!(e, Error::NotCritical { .. }));
                assert!(e.to_string().contains("not a critical point; integration by parts invalid"));
                rejected += 1;
            }
        }
    }
}

fn semicircle_levels() -> Vec<GridDensity> {
    let k = k20();
    [201, 401, 801]
        .iter()
        .map(|&n| minimize(&k, &SolveConfig::grid(-2.0, 2.0, n)).unwrap().density().unwrap().clone())
        .collect()
}

#[test]
fn second_derivative_vanishes_on_mollified_minimizer() {
    let k = k20();
    let out = minimize(&k, &SolveConfig::grid(-2.0, 2.0, 401)).unwrap();
    let f = out.density().unwrap();
    let delta = 0.2;
    let fd = Mollified::new(f, delta).unwrap();
    let crit = critical_points(&fd, -0.5, 0.5, 2000);
    assert_eq!(crit.len(), 1, "{crit:?}");
    let s = psi_second_derivative_resolved(&k, &fd, crit[0], &[], f.h() / 4.0).unwrap();
    assert!(s.agree, "{s:?}");
    // ψ_{f_δ} = ψ_f ∗ ρ_δ, so |ψ″| ≤ max-deviation of ψ_f · ‖ρ_δ″‖₁; the
    // piecewise-linear interpolant adds O(h²) between nodes
    let rho2_l1: f64 = {
        let n = 20000;
        (0..n).map(|i| riesz_core::mollify::rho_d2(-1.0 + (i as f64 + 0.5) * 2.0 / n as f64).abs() * 2.0 / n as f64).sum()
    };
    let bound = 2.0 * out.report.psi_max_dev_on_support * rho2_l1 / (delta * delta);
    for v in s.forms {
        assert!(v.abs() <= bound, "{v} > {bound}");
    }
}

fn assert_ladder_invariants(k: &Kernel, l: &CriticalPointLadder) {
    assert!(l.n >= 10);
    assert!(l.violated_invariants(k).is_empty(), "{:?}", l.violated_invariants(k));
    let p = &l.p_points;
    assert!(p.windows(2).all(|w| w[1] < w[0]));
    assert!(p[0] > -l.eta / 16.0 && p[1] > -l.eta / 8.0);
    for (i, v) in l.p_values.iter().enumerate() {
        if i % 2 == 0 {
            assert!(*v <= l.l_minus + l.epsilon);
        } else {
            assert!(*v >= l.l_plus - l.epsilon);
        }
    }
    let (good, left, right) = l.segments();
    assert!(good <= 2.0 * left && good <= 2.0 * right);
    assert!(l.epsilon * k.dg(0.5 * l.gamma_bar).abs() >= l.c_const);
}

#[test]
fn case_one_ladder_at_fixed_parameters() {
    let k = k20();
    let f = even_oscillator();
    let hint = LadderHint { eta: Some(0.125), delta: Some(0.125 * 2f64.powi(-16)) };
    let l = build_ladder(&k, &f, 0.0, LadderCase::SymmetricI, hint).unwrap();
    assert_ladder_invariants(&k, &l);
    assert_eq!(l.q_points, vec![-l.p_points[1]]);
    let ev = evaluate_ladder(&k, &f, &l).unwrap();
    assert!(ev.basecase.holds);
    assert!(ev.psi_second.agree);
    for t in [ev.i, ev.j, ev.k, ev.far] {
        assert!(t.holds, "{t:?}");
    }
    // I + J + K + far reassembles s·ψ″ at the base point
    let s = if ev.base_is_max { -1.0 } else { 1.0 };
    let total = ev.i.value + ev.j.value + ev.k.value + ev.far.value;
    assert!((total - s * ev.psi_second.forms[2]).abs() <= 1e-6 * total.abs(), "{total} vs {:?}", ev.psi_second.forms);
    assert!(!ev.scan.z_intervals.is_empty());
}

#[test]
fn case_two_ladder_mirrors_points() {
    let k = k20();
    let f = odd_oscillator();
    let hint = LadderHint { eta: Some(0.125), delta: Some(0.125 * 2f64.powi(-17)) };
    let l = build_ladder(&k, &f, 0.0, LadderCase::AntisymmetricII, hint).unwrap();
    assert_ladder_invariants(&k, &l);
    assert_eq!(l.q_points, vec![-l.p_points[0], -l.p_points[1]]);
    // the points mirror onto near-maxima of the odd profile
    let fd = Mollified::new(&f, l.delta).unwrap();
    for (p, q) in l.p_points.iter().zip(&l.q_points) {
        assert!((fd.value(*q) + fd.value(*p)).abs() <= 1e-9);
    }
}

#[test]
fn wrong_symmetry_is_rejected() {
    let k = k20();
    let f = GridFunction::from_fn(-0.3, 0.3, 20001, |x| if x < 0.0 { 0.5 + 0.5 * (4.0 * (-x).ln()).sin() } else { 0.2 }).unwrap();
    let e = build_ladder(&k, &f, 0.0, LadderCase::SymmetricI, LadderHint::default()).unwrap_err();
    assert!(matches!(e, Error::Precondition(_)), "{e}");
}

#[test]
fn fast_oscillation_cannot_be_resolved() {
    let k = k20();
    let f = GridFunction::from_fn(-0.5, 0.5, 200_001, |x| if x == 0.0 { 1.5 } else { 1.5 + 0.5 * (1.0 / x.abs()).sin() })
        .unwrap();
    let e = build_ladder(&k, &f, 0.0, LadderCase::SymmetricI, LadderHint::default()).unwrap_err();
    assert!(matches!(e, Error::LadderUnresolved(_)), "{e}");
    assert!(e.to_string().starts_with("grid cannot resolve ladder; refine f"));
}

#[test]
fn continuous_profile_has_no_ladder() {
    let k = k20();
    let f = GridFunction::from_fn(-1.0, 1.0, 20001, |x| (1.0 - x * x).max(0.0)).unwrap();
    let e = build_ladder(&k, &f, 0.0, LadderCase::SymmetricI, LadderHint::default()).unwrap_err();
    assert!(matches!(e, Error::NoJump));
    assert_eq!(e.to_string(), "no jump; ladder undefined");
}

#[test]
fn semicircle_is_continuous() {
    let k = k20();
    let levels = semicircle_levels();
    let r = continuity_report(&k, &levels, &[], &ContinuityOptions::default()).unwrap();
    assert_eq!(r.points.len(), 9);
    assert!(r.continuous && r.jumps_detected == 0);
    let m = levels[2].sup();
    for p in &r.points {
        assert!(p.monotone, "{p:?}");
        assert!(!p.jump_flagged && p.ladder.is_none());
        let fine = p.levels.last().unwrap();
        assert!(fine.h_l <= 0.05 * m && fine.h_r <= 0.05 * m, "{p:?}");
    }
}

fn inject_jump(f: &GridDensity, at: f64, amp: f64) -> GridDensity {
    GridDensity::from_fn(f.a(), f.b(), f.n(), |x| {
        let v = f.eval(x);
        if x > at && v > 0.0 {
            v + amp
        } else {
            v
        }
    })
    .unwrap()
    .normalized()
    .unwrap()
}

#[test]
fn injected_jump_is_flagged() {
    let k = k20();
    let base = minimize(&k, &SolveConfig::grid(-2.0, 2.0, 801)).unwrap().density().unwrap().clone();
    let small = inject_jump(&base, 0.0, 0.01);
    let r = continuity_report(&k, &[small], &[0.0], &ContinuityOptions::default()).unwrap();
    assert!(r.points[0].jump_flagged && !r.continuous);
    assert!(r.points[0].ladder.is_some());
    let large = inject_jump(&base, 0.0, 0.05);
    let e = continuity_report(&k, &[large], &[0.0], &ContinuityOptions::default()).unwrap_err();
    assert!(matches!(e, Error::NotPotentialConstant { .. }));
}

#[test]
fn uniform_density_fails_precondition() {
    let k = k20();
    let f = GridDensity::from_fn(-1.0, 1.0, 401, |_| 0.5).unwrap();
    let e = continuity_report(&k, &[f], &[], &ContinuityOptions::default()).unwrap_err();
    assert!(e.to_string().starts_with("density is not potential-constant"), "{e}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn concave_value_vanishes_when_points_coincide(w in 0.1f64..0.8, x in 0.0f64..0.2, alpha in -0.5f64..0.5) {
        let k = k20();
        let f = TestFunction::new(alpha, alpha + w, Profile::OneMinusCos { omega: PI / w, shift: alpha }).unwrap();
        let x = alpha - x * (1.0 - w);
        let c = check_concave_cancellation(&k, &f, x, x).unwrap();
        prop_assert_eq!(c.value, 0.0);
    }

    #[test]
    fn smoothstep_rearrangement_holds(g in 0.05f64..0.9, h in 0.1f64..3.0, quintic in any::<bool>()) {
        let k = k20();
        let p = if quintic {
            Profile::Smootherstep { start: 0.0, width: g, height: h }
        } else {
            Profile::Smoothstep { start: 0.0, width: g, height: h }
        };
        let f = TestFunction::new(0.0, g, p).unwrap();
        let r = check_rearrangement_inequality(&k, &f).unwrap();
        prop_assert!(r.holds && r.basecase.holds);
        // RHS from the closed form |g′(x)| = 1/x − x on (0, 1)
        let rhs = h * ((1.0 / g - g) + (2.0 / g - g / 2.0));
        prop_assert!((r.rhs - rhs).abs() <= 1e-12 * rhs);
    }

    #[test]
    fn running_min_scan_points_are_strict_minima(seed in 0u64..1000) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let c: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f = |t: f64| c.iter().enumerate().map(|(i, a)| a * ((i + 1) as f64 * 7.0 * t).sin()).sum::<f64>();
        let s = 1e-3;
        let scan = running_min_scan(f, -0.1, 0.1, 0.5, s);
        for &(a, b) in &scan.w_intervals {
            let mut t = a;
            while t <= b + 1e-12 {
                let mut u = 0.1 + s;
                while u < t - 1e-12 {
                    prop_assert!(f(t) < f(u));
                    u += s;
                }
                t += s;
            }
        }
    }
}
