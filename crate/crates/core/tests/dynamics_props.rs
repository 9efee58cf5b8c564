use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trendfit::dynamics::{integrate, integrate_with, reproduction_number, rhs_sir, rhs_siri};
use trendfit::ode::Tolerances;
use trendfit::{ModelKind, ParamVector};

/// Root of ln(x/s0) = (β/γ)(x/N − 1) on (0, s0) by bisection, independent of the integrator.
fn final_size(beta: f64, gamma: f64, s0: f64, n: f64) -> f64 {
    let f = |x: f64| (x / s0).ln() - beta / gamma * (x / n - 1.0);
    // f → −∞ at 0+ and f(s0) > 0 whenever the epidemic takes off.
    let (mut lo, mut hi) = (1e-300, s0);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn params() -> impl Strategy<Value = (ParamVector, ModelKind)> {
    (
        0.01..3.0f64,
        0.01..3.0f64,
        10.0..1e5f64,
        1.0..100.0f64,
        prop_oneof![Just(ModelKind::Sir), Just(ModelKind::Siri)],
    )
        .prop_map(|(b, d, s0, i0, kind)| (ParamVector::new(b, d, s0, i0, 1.0), kind))
}

fn grid(t_end: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|k| t_end * k as f64 / n as f64).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn population_is_conserved((p, kind) in params()) {
        let traj = integrate(kind, &p, &grid(60.0, 240)).unwrap();
        for k in 0..traj.times.len() {
            let total = traj.s[k] + traj.i[k] + traj.r[k];
            prop_assert!((total - traj.n).abs() <= 1e-6 * traj.n, "drift {}", total - traj.n);
        }
    }

    #[test]
    fn susceptibles_fall_and_recovered_rise((p, kind) in params()) {
        let traj = integrate(kind, &p, &grid(60.0, 240)).unwrap();
        let eps = 1e-9 * traj.n;
        for w in 0..traj.times.len() - 1 {
            prop_assert!(traj.s[w + 1] <= traj.s[w] + eps);
            prop_assert!(traj.r[w + 1] >= traj.r[w] - eps);
        }
        prop_assert!(traj.s.iter().chain(&traj.i).chain(&traj.r).all(|&v| v >= -1e-9));
    }

    #[test]
    fn sir_threshold(beta in 0.05..2.0f64, gamma in 0.05..2.0f64, s0 in 100.0..1e4f64, i0 in 1.0..10.0f64) {
        let p = ParamVector::new(beta, gamma, s0, i0, 1.0);
        let r = reproduction_number(ModelKind::Sir, &p);
        prop_assume!((r - 1.0).abs() > 0.02);
        let traj = integrate(ModelKind::Sir, &p, &grid(20.0 / gamma, 400)).unwrap();
        let peak = traj.i.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if r < 1.0 {
            prop_assert!(peak <= i0 * (1.0 + 1e-9));
        } else {
            prop_assert!(peak > i0);
        }
    }

    #[test]
    fn rhs_is_pure(s in 0.0..1e4f64, i in 0.0..1e3f64, r in 0.0..1e3f64, b in 0.0..5.0f64, d in 0.0..5.0f64) {
        let n = s + i + r + 1.0;
        prop_assert_eq!(rhs_sir([s, i, r], b, d, n), rhs_sir([s, i, r], b, d, n));
        prop_assert_eq!(rhs_siri([s, i, r], b, d, n), rhs_siri([s, i, r], b, d, n));
        let sum: f64 = rhs_siri([s, i, r], b, d, n).iter().sum();
        prop_assert!(sum.abs() <= 1e-12 * (b * s * i / n + d * i * r / n).max(1.0));
    }
}

#[test]
fn final_size_matches_root_find() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    while checked < 10 {
        let gamma = rng.gen_range(0.05..1.0);
        let r_target = rng.gen_range(1.2..5.0);
        let s0 = rng.gen_range(500.0..1e5);
        let i0 = rng.gen_range(1.0..20.0);
        let beta = r_target * gamma * (s0 + i0) / s0;
        let p = ParamVector::new(beta, gamma, s0, i0, 1.0);
        let traj = integrate(ModelKind::Sir, &p, &[50.0 / gamma]).unwrap();
        let expected = final_size(beta, gamma, s0, s0 + i0);
        let got = traj.s[0];
        assert!(((got - expected) / expected).abs() < 0.005, "S_inf {got} vs root {expected} (R={r_target})");
        checked += 1;
    }
}

#[test]
fn documented_final_size_case() {
    let p = ParamVector::new(0.5, 0.25, 990.0, 10.0, 1.0);
    let traj = integrate(ModelKind::Sir, &p, &grid(200.0, 400)).unwrap();
    let peak_index = traj.i.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    assert!(peak_index > 0 && peak_index < traj.times.len() - 1);
    let expected = final_size(0.5, 0.25, 990.0, 1000.0);
    assert!((traj.s.last().unwrap() / expected - 1.0).abs() < 0.005);
}

#[test]
fn pure_decay_closed_form() {
    let p = ParamVector::new(0.0, 1.0, 100.0, 10.0, 1.0);
    let traj = integrate(ModelKind::Sir, &p, &[0.5, 1.0, 2.0]).unwrap();
    for (t, i) in traj.times.iter().zip(&traj.i) {
        assert!((i - 10.0 * (-t).exp()).abs() < 1e-5);
    }
    assert!((traj.i[1] - 3.6788).abs() < 1e-4);
}

#[test]
fn tighter_tolerance_reduces_error() {
    let p = ParamVector::new(0.0, 1.0, 100.0, 10.0, 1.0);
    let times = grid(5.0, 50);
    let error = |rtol: f64| {
        let tol = Tolerances { rtol, atol: rtol * 1e-2, ..Tolerances::default() };
        let traj = integrate_with(ModelKind::Sir, &p, &times, tol).unwrap();
        traj.times
            .iter()
            .zip(&traj.i)
            .map(|(t, i)| (i - 10.0 * (-t).exp()).abs())
            .fold(0.0, f64::max)
    };
    let errs: Vec<f64> = [1e-4, 1e-6, 1e-8, 1e-10].iter().map(|&r| error(r)).collect();
    for w in errs.windows(2) {
        assert!(w[1] < w[0], "{errs:?}");
    }
    assert!(errs[1] < 1e-5);
}

#[test]
fn siri_threshold_agrees_with_reproduction_number() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let s0 = rng.gen_range(100.0..1e4);
        let nu = rng.gen_range(0.1..5.0);
        let r_target: f64 = if rng.gen_bool(0.5) { rng.gen_range(0.2..0.9) } else { rng.gen_range(1.1..5.0) };
        let beta = r_target * nu / s0;
        let p = ParamVector::new(beta, nu, s0, rng.gen_range(1.0..20.0), 1.0);
        let r = reproduction_number(ModelKind::Siri, &p);
        let traj = integrate(ModelKind::Siri, &p, &grid(50.0 / beta.min(nu), 2000)).unwrap();
        let peak = traj.i.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(peak > p.i0, r > 1.0, "R={r} peak={peak} i0={}", p.i0);
    }
}
