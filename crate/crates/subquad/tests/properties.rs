//! Randomized invariants: the W1 estimator against a brute-force assignment
//! oracle and the metric axioms, unbiasedness of both stochastic gradients,
//! Orlicz tail classification, and bitwise determinism of the experiment
//! runner across worker-pool sizes.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use subquad::dist::Distribution1D;
use subquad::engine::GradientOracle;
use subquad::experiment::{builtin_presets, run_experiment, ExperimentConfig};
use subquad::loss::RobustLoss;
use subquad::models::{
    orlicz_tail_check, population_gradient, Covariate, Problem, QuantileModel, RobustModel,
};
use subquad::stats::wasserstein1_1d;

/// Minimum mean transport cost over all perfect matchings of two equal-size
/// samples. Exponential, so only used on tiny inputs.
fn assignment_oracle(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    fn go(a: &[f64], b: &[f64], used: &mut Vec<bool>, i: usize) -> f64 {
        if i == a.len() {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for j in 0..b.len() {
            if !used[j] {
                used[j] = true;
                let cost = (a[i] - b[j]).abs() + go(a, b, used, i + 1);
                used[j] = false;
                best = best.min(cost);
            }
        }
        best
    }
    go(a, b, &mut vec![false; b.len()], 0) / a.len() as f64
}

fn sample(len: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0f64..50.0, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn w1_matches_assignment_oracle(len in 1usize..=7, seed_a in sample(7..=7), seed_b in sample(7..=7)) {
        let a = &seed_a[..len];
        let b = &seed_b[..len];
        let got = wasserstein1_1d(a, b).unwrap();
        let oracle = assignment_oracle(a, b);
        prop_assert!((got - oracle).abs() <= 1e-9 * (1.0 + oracle), "{got} vs {oracle}");
    }

    #[test]
    fn w1_symmetry_and_identity(a in sample(1..=8), b in sample(1..=8)) {
        let ab = wasserstein1_1d(&a, &b).unwrap();
        let ba = wasserstein1_1d(&b, &a).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-12);
        prop_assert!(wasserstein1_1d(&a, &a).unwrap() == 0.0);
        // Identity of indiscernibles on equal-size samples: zero distance
        // forces equal sorted multisets.
        if a.len() == b.len() && ab == 0.0 {
            let mut sa = a.clone();
            let mut sb = b.clone();
            sa.sort_by(f64::total_cmp);
            sb.sort_by(f64::total_cmp);
            prop_assert_eq!(sa, sb);
        }
    }

    #[test]
    fn w1_triangle_inequality(a in sample(1..=6), b in sample(1..=6), c in sample(1..=6)) {
        let ac = wasserstein1_1d(&a, &c).unwrap();
        let ab = wasserstein1_1d(&a, &b).unwrap();
        let bc = wasserstein1_1d(&b, &c).unwrap();
        prop_assert!(ac <= ab + bc + 1e-9, "{ac} > {ab} + {bc}");
    }
}

fn robust_problem() -> Problem {
    Problem::Robust {
        model: RobustModel::new(
            Covariate::scalar(Distribution1D::TwoPoint { v1: 3.0, p1: 0.25, v2: -1.0 }),
            vec![0.0],
            Distribution1D::StudentT { nu: 1.1, scale: 1.0 },
            Distribution1D::PointMass { value: 0.01 },
        )
        .unwrap(),
        loss: RobustLoss::pseudo_huber(1.0),
    }
}

fn quantile_problem() -> Problem {
    Problem::Quantile {
        model: QuantileModel::new(
            Covariate::scalar(Distribution1D::PointMass { value: 1.0 }),
            vec![0.0],
            Distribution1D::Cauchy { location: -1.0, scale: 1.0 },
            0.75,
        )
        .unwrap(),
    }
}

/// Mean of fresh stochastic gradients at a fixed point must match the
/// population gradient within sampling error: the additive noise has mean
/// zero.
fn unbiased_at(problem: &Problem, theta: f64, seed: u64) {
    let n = 40_000u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = [0.0f64];
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    for _ in 0..n {
        problem.sample_gradient(&[theta], &mut rng, &mut g);
        sum += g[0];
        sumsq += g[0] * g[0];
    }
    let mean = sum / n as f64;
    let var = (sumsq / n as f64 - mean * mean).max(0.0);
    let se_mc = (var / n as f64).sqrt();
    let (pop, pop_se) = population_gradient(problem, &[theta], 200_000, seed ^ 0x9e37);
    let tol = 3.0 * (se_mc * se_mc + pop_se[0] * pop_se[0]).sqrt();
    assert!(
        (mean - pop[0]).abs() <= tol,
        "theta={theta}: {mean} vs {} (tol {tol})",
        pop[0]
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn robust_gradient_is_unbiased(theta in -5.0f64..5.0, seed in 0u64..1_000_000) {
        unbiased_at(&robust_problem(), theta, seed);
    }

    #[test]
    fn quantile_gradient_is_unbiased(theta in -5.0f64..5.0, seed in 0u64..1_000_000) {
        unbiased_at(&quantile_problem(), theta, seed);
    }
}

#[test]
fn quantile_unit_covariate_population_gradient_is_cdf_gap() {
    // With x = 1 the population gradient at theta is F(theta) - tau exactly.
    let problem = quantile_problem();
    for theta in [-2.0f64, -0.5, 0.0, 1.0, 3.0] {
        let exact = 0.5 + ((theta + 1.0) / 1.0).atan() / std::f64::consts::PI - 0.75;
        let (est, se) = population_gradient(&problem, &[theta], 400_000, 7);
        assert!((est[0] - exact).abs() <= 3.0 * se[0].max(1e-4), "{theta}: {est:?} vs {exact}");
    }
}

#[test]
fn orlicz_classification() {
    let laplace = Distribution1D::Laplace { mean: 0.0, scale: 1.0 };
    assert!(orlicz_tail_check(&laplace, 1.0, 1.0, 200_000, 11).pass);
    let cauchy = Distribution1D::Cauchy { location: 0.0, scale: 1.0 };
    assert!(!orlicz_tail_check(&cauchy, 1.0, 1.0, 200_000, 11).pass);
}

#[test]
fn runner_output_is_bitwise_identical_across_worker_counts() {
    let mut base: ExperimentConfig = builtin_presets()
        .into_iter()
        .find(|(n, _)| *n == "constant-plateau")
        .unwrap()
        .1;
    base.n_iters = 4000;
    base.replicas = 16;

    let run_with = |threads: usize| {
        let tmp = tempfile::tempdir().unwrap();
        let mut cfg = base.clone();
        cfg.output_dir = tmp.path().to_string_lossy().into_owned();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_experiment(&cfg)).unwrap();
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(tmp.path())
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().into_string().unwrap(), std::fs::read(e.path()).unwrap())
            })
            .collect();
        files.sort();
        files
    };

    let serial = run_with(1);
    let parallel = run_with(4);
    assert_eq!(serial.len(), parallel.len());
    for ((name_s, bytes_s), (name_p, bytes_p)) in serial.iter().zip(parallel.iter()) {
        assert_eq!(name_s, name_p);
        assert_eq!(bytes_s, bytes_p, "{name_s} differs between worker counts");
    }
}
