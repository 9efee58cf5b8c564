use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trendfit::inference::ensemble::{run, Chain, Ensemble, StretchSampler};
use trendfit::inference::summary::{integrated_autocorr_time, quantile};

fn gaussian_2d(x: &[f64]) -> f64 {
    -0.5 * (x[0] * x[0] + x[1] * x[1])
}

fn scattered(n: usize, dim: usize, seed: u64, scale: f64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..dim).map(|_| scale * (rng.gen::<f64>() - 0.5)).collect()).collect()
}

fn sample<T: Fn(&[f64]) -> f64 + Sync>(target: &T, walkers: Vec<Vec<f64>>, seed: u64, sweeps: usize, burn: usize) -> Chain {
    let n = walkers.len();
    let mut ens = Ensemble::new(walkers, target).unwrap();
    let mut sampler = StretchSampler::new(2.0, seed, n).unwrap();
    run(&mut sampler, &mut ens, target, sweeps, burn)
}

#[test]
fn standard_gaussian_moments() {
    let chain = sample(&gaussian_2d, scattered(32, 2, 1, 2.0), 42, 5000, 500);
    let (x, y) = (chain.column(0), chain.column(1));
    let n = x.len() as f64;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / n;
    let (mx, my) = (mean(&x), mean(&y));
    let cov = |a: &[f64], ma: f64, b: &[f64], mb: f64| a.iter().zip(b).map(|(p, q)| (p - ma) * (q - mb)).sum::<f64>() / (n - 1.0);
    assert!(mx.abs() < 0.05 && my.abs() < 0.05, "mean ({mx}, {my})");
    assert!((cov(&x, mx, &x, mx) - 1.0).abs() < 0.1);
    assert!((cov(&y, my, &y, my) - 1.0).abs() < 0.1);
    assert!(cov(&x, mx, &y, my).abs() < 0.1);
}

/// Permutation times power-of-two scaling: every float operation of the
/// sampler commutes with it exactly.
fn forward(y: &[f64]) -> Vec<f64> {
    vec![4.0 * y[1], 0.5 * y[0]]
}

fn inverse(x: &[f64]) -> Vec<f64> {
    vec![2.0 * x[1], 0.25 * x[0]]
}

#[test]
fn affine_invariance_is_bit_exact() {
    let target = |y: &[f64]| -0.5 * ((y[0] - 1.0).powi(2) / 2.0 + y[1] * y[1] * 3.0 - 0.8 * y[0] * y[1]);
    let mapped = move |x: &[f64]| target(&inverse(x));

    let start = scattered(20, 2, 9, 3.0);
    let start_mapped: Vec<Vec<f64>> = start.iter().map(|w| forward(w)).collect();
    let a = sample(&target, start, 77, 300, 0);
    let b = sample(&mapped, start_mapped, 77, 300, 0);

    assert_eq!(a.len(), b.len());
    for (ra, rb) in a.rows().zip(b.rows()) {
        let fa = forward(ra);
        assert_eq!(fa[0].to_bits(), rb[0].to_bits());
        assert_eq!(fa[1].to_bits(), rb[1].to_bits());
    }
    assert_eq!(a.log_posts(), b.log_posts());
}

/// Standard normal CDF from an erfc series accurate to ~1e-7.
fn normal_cdf(x: f64) -> f64 {
    let z = x.abs() / std::f64::consts::SQRT_2;
    let t = 1.0 / (1.0 + 0.5 * z);
    let poly = -z * z - 1.265_512_23
        + t * (1.000_023_68
            + t * (0.374_091_96
                + t * (0.096_784_18
                    + t * (-0.186_288_06
                        + t * (0.278_868_07
                            + t * (-1.135_203_98 + t * (1.488_515_87 + t * (-0.822_152_23 + t * 0.170_872_77))))))));
    let erfc = t * poly.exp();
    if x >= 0.0 {
        1.0 - 0.5 * erfc
    } else {
        0.5 * erfc
    }
}

fn truncated_quantile(p: f64, lo: f64, hi: f64) -> f64 {
    let (cl, ch) = (normal_cdf(lo), normal_cdf(hi));
    let target = cl + p * (ch - cl);
    let (mut a, mut b) = (lo, hi);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if normal_cdf(m) < target {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

#[test]
fn truncated_gaussian_quantiles() {
    let (lo, hi) = (-1.0, 2.5);
    let target = move |x: &[f64]| {
        if x[0] < lo || x[0] > hi {
            f64::NEG_INFINITY
        } else {
            -0.5 * x[0] * x[0]
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let walkers: Vec<Vec<f64>> = (0..32).map(|_| vec![rng.gen_range(-0.5..0.5)]).collect();
    let chain = sample(&target, walkers, 5, 6000, 1000);
    let xs = chain.column(0);
    let tau = integrated_autocorr_time(&chain, 0).max(1.0);
    let n_eff = xs.len() as f64 / tau;
    let density = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt() / (normal_cdf(hi) - normal_cdf(lo));

    for p in [0.025, 0.5, 0.975] {
        let truth = truncated_quantile(p, lo, hi);
        let got = quantile(&xs, p);
        let se = (p * (1.0 - p) / n_eff).sqrt() / density(truth);
        assert!((got - truth).abs() < 3.0 * se, "p={p}: {got} vs {truth}, se {se}");
    }
}

#[test]
fn parallel_sweeps_match_serial() {
    let walkers = scattered(24, 2, 4, 2.0);
    let mut serial = Ensemble::new(walkers.clone(), &gaussian_2d).unwrap();
    let mut par = Ensemble::new(walkers, &gaussian_2d).unwrap();
    let mut s1 = StretchSampler::new(2.0, 8, 24).unwrap();
    let mut s2 = StretchSampler::new(2.0, 8, 24).unwrap().parallel(true);
    let c1 = run(&mut s1, &mut serial, &gaussian_2d, 200, 50);
    let c2 = run(&mut s2, &mut par, &gaussian_2d, 200, 50);
    assert_eq!(c1, c2);
}
