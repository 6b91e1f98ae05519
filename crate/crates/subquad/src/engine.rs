//! The SGD iteration theta_{n+1} = theta_n - alpha_n g_n(theta_n) with
//! constant and polynomial stepsizes, iterate recording, running averages and
//! Richardson-Romberg extrapolation.
//!
//! Determinism contract: a trajectory is a single sequential execution driven
//! by a ChaCha stream derived from (seed, stream). Harnesses that parallelize
//! replicas assign stream id = replica index and merge results in replica
//! order, so output never depends on worker count.

use crate::dist::Distribution1D;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    /// A coordinate of the iterate left the finite range. Divergence is
    /// signal, never clamped away.
    #[error("non-finite iterate at iteration {iteration}")]
    NonFinite { iteration: u64 },
    #[error("averaging was not enabled for the requested start fraction")]
    AveragingNotEnabled,
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
}

/// Stepsize sequence alpha_n; iterations are 1-based so Polynomial with
/// kappa = 0 is well defined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
pub enum StepsizeSchedule {
    Constant { alpha: f64 },
    Polynomial { iota: f64, kappa: f64, xi: f64 },
}

impl StepsizeSchedule {
    pub fn constant(alpha: f64) -> Self {
        assert!(alpha > 0.0, "alpha must be positive");
        StepsizeSchedule::Constant { alpha }
    }

    pub fn polynomial(iota: f64, kappa: f64, xi: f64) -> Self {
        assert!(iota > 0.0 && kappa >= 0.0, "iota > 0, kappa >= 0 required");
        assert!(xi > 0.0 && xi <= 1.0, "xi must lie in (0,1]");
        StepsizeSchedule::Polynomial { iota, kappa, xi }
    }

    /// alpha_n for the 1-based iteration index n.
    pub fn at(&self, n: u64) -> f64 {
        match *self {
            StepsizeSchedule::Constant { alpha } => alpha,
            StepsizeSchedule::Polynomial { iota, kappa, xi } => {
                iota / (n as f64 + kappa).powf(xi)
            }
        }
    }
}

/// A stochastic gradient oracle: draws grad f(theta) + w(theta) into `out`.
pub trait GradientOracle: Sync {
    fn dim(&self) -> usize;
    fn sample_gradient(&self, theta: &[f64], rng: &mut ChaCha8Rng, out: &mut [f64]);
}

/// Which iterates to keep. Geometric thinning keeps memory bounded on long
/// trajectories; exact index sets serve the tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
pub enum RecordPlan {
    Indices { indices: Vec<u64> },
    /// Record at ceil(base * ratio^j) for j = 0, 1, ... plus the final index.
    Geometric { base: f64, ratio: f64 },
    FinalOnly,
}

impl RecordPlan {
    pub(crate) fn indices(&self, n_iters: u64) -> Vec<u64> {
        let mut out = match self {
            RecordPlan::Indices { indices } => {
                let mut v: Vec<u64> = indices.iter().copied().filter(|&i| i >= 1 && i <= n_iters).collect();
                v.sort_unstable();
                v.dedup();
                v
            }
            RecordPlan::Geometric { base, ratio } => {
                assert!(*base >= 1.0 && *ratio > 1.0, "need base >= 1, ratio > 1");
                let mut v = Vec::new();
                let mut x = *base;
                loop {
                    let idx = x.ceil() as u64;
                    if idx > n_iters {
                        break;
                    }
                    v.push(idx);
                    x *= ratio;
                }
                v.push(n_iters);
                v.sort_unstable();
                v.dedup();
                v
            }
            RecordPlan::FinalOnly => vec![n_iters],
        };
        out.retain(|&i| i >= 1);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
pub enum Averaging {
    None,
    /// Mean of theta_1 .. theta_n (every post-update iterate).
    Full,
    /// Mean of the iterates with index > floor(start_fraction * n_iters).
    Tail { start_fraction: f64 },
}

/// One trajectory configuration.
pub struct SgdRun<'a> {
    pub oracle: &'a dyn GradientOracle,
    pub schedule: StepsizeSchedule,
    pub theta0: Vec<f64>,
    pub n_iters: u64,
    pub seed: u64,
    /// ChaCha stream id; replica r of a batch uses stream r.
    pub stream: u64,
    pub record_plan: RecordPlan,
    pub averaging: Averaging,
    /// Optional scalar accumulated over every iterate (compensated), used for
    /// CLT partial sums. Receives theta_n for n = 1..n_iters.
    pub accumulate: Option<&'a (dyn Fn(&[f64]) -> f64 + Sync)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordedPoint {
    pub index: u64,
    pub iterate: Vec<f64>,
    pub average: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub recorded: Vec<RecordedPoint>,
    pub final_iterate: Vec<f64>,
    pub final_average: Option<Vec<f64>>,
    pub n_iters: u64,
    pub averaging: Averaging,
    /// Sum of the accumulator over all iterates, when one was supplied.
    pub accumulated: Option<f64>,
}

/// Kahan-compensated running sum per coordinate.
struct CompensatedSum {
    sum: Vec<f64>,
    comp: Vec<f64>,
    count: u64,
}

impl CompensatedSum {
    fn new(dim: usize) -> Self {
        CompensatedSum { sum: vec![0.0; dim], comp: vec![0.0; dim], count: 0 }
    }

    fn add(&mut self, x: &[f64]) {
        for i in 0..x.len() {
            let y = x[i] - self.comp[i];
            let t = self.sum[i] + y;
            self.comp[i] = (t - self.sum[i]) - y;
            self.sum[i] = t;
        }
        self.count += 1;
    }

    fn mean(&self) -> Option<Vec<f64>> {
        if self.count == 0 {
            return None;
        }
        Some(self.sum.iter().map(|s| s / self.count as f64).collect())
    }
}

/// theta - alpha * grad, with a finiteness check.
pub fn step(theta: &[f64], grad_sample: &[f64], alpha: f64) -> Result<Vec<f64>, EngineError> {
    assert_eq!(theta.len(), grad_sample.len(), "dimension mismatch");
    assert!(alpha > 0.0);
    let next: Vec<f64> = theta.iter().zip(grad_sample).map(|(t, g)| t - alpha * g).collect();
    if next.iter().any(|v| !v.is_finite()) {
        return Err(EngineError::NonFinite { iteration: 0 });
    }
    Ok(next)
}

/// Runs one trajectory. Deterministic for a fixed configuration.
pub fn run(cfg: &SgdRun) -> Result<TrajectoryRecord, EngineError> {
    let dim = cfg.oracle.dim();
    assert_eq!(cfg.theta0.len(), dim, "theta0 dimension mismatch");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(cfg.stream);

    let record_at = cfg.record_plan.indices(cfg.n_iters);
    let mut record_iter = record_at.iter().copied().peekable();

    let avg_start = match cfg.averaging {
        Averaging::None => u64::MAX,
        Averaging::Full => 0,
        Averaging::Tail { start_fraction } => {
            assert!((0.0..1.0).contains(&start_fraction), "start_fraction in [0,1)");
            (start_fraction * cfg.n_iters as f64).floor() as u64
        }
    };

    let mut theta = cfg.theta0.clone();
    let mut grad = vec![0.0; dim];
    let mut avg = CompensatedSum::new(dim);
    let mut acc_sum = 0.0f64;
    let mut acc_comp = 0.0f64;
    let mut recorded = Vec::with_capacity(record_at.len());

    for n in 1..=cfg.n_iters {
        cfg.oracle.sample_gradient(&theta, &mut rng, &mut grad);
        let alpha = cfg.schedule.at(n);
        for i in 0..dim {
            theta[i] -= alpha * grad[i];
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(EngineError::NonFinite { iteration: n });
        }
        if n > avg_start {
            avg.add(&theta);
        }
        if let Some(f) = cfg.accumulate {
            let y = f(&theta) - acc_comp;
            let t = acc_sum + y;
            acc_comp = (t - acc_sum) - y;
            acc_sum = t;
        }
        if record_iter.peek() == Some(&n) {
            record_iter.next();
            recorded.push(RecordedPoint {
                index: n,
                iterate: theta.clone(),
                average: avg.mean(),
            });
        }
    }

    Ok(TrajectoryRecord {
        recorded,
        final_iterate: theta,
        final_average: avg.mean(),
        n_iters: cfg.n_iters,
        averaging: cfg.averaging,
        accumulated: cfg.accumulate.map(|_| acc_sum),
    })
}

/// Retrieves the tail average maintained during the run. The start fraction
/// must match the run configuration; averages are not recomputed post hoc.
pub fn tail_average(record: &TrajectoryRecord, start_fraction: f64) -> Result<Vec<f64>, EngineError> {
    let matches = match record.averaging {
        Averaging::Full => start_fraction == 0.0,
        Averaging::Tail { start_fraction: f } => f == start_fraction,
        Averaging::None => false,
    };
    if !matches {
        return Err(EngineError::AveragingNotEnabled);
    }
    record.final_average.clone().ok_or(EngineError::AveragingNotEnabled)
}

/// Richardson-Romberg extrapolation 2 avg(alpha) - avg(2 alpha).
pub fn rr_extrapolate(avg_alpha: &[f64], avg_2alpha: &[f64]) -> Result<Vec<f64>, EngineError> {
    if avg_alpha.len() != avg_2alpha.len() {
        return Err(EngineError::DimensionMismatch {
            left: avg_alpha.len(),
            right: avg_2alpha.len(),
        });
    }
    Ok(avg_alpha.iter().zip(avg_2alpha).map(|(a, b)| 2.0 * a - b).collect())
}

/// Gradient oracle for the scalar piecewise objective with additive noise:
/// f'(t) = t inside the unit interval, sign(t) |t|^{beta-1} outside.
pub struct SimpleExampleOracle {
    pub beta: f64,
    pub noise: Distribution1D,
}

impl GradientOracle for SimpleExampleOracle {
    fn dim(&self) -> usize {
        1
    }

    fn sample_gradient(&self, theta: &[f64], rng: &mut ChaCha8Rng, out: &mut [f64]) {
        out[0] = crate::lyapunov::simple_example_grad(self.beta, theta[0]) + self.noise.sample(rng);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    struct Quadratic;

    impl GradientOracle for Quadratic {
        fn dim(&self) -> usize {
            1
        }
        fn sample_gradient(&self, theta: &[f64], _rng: &mut ChaCha8Rng, out: &mut [f64]) {
            out[0] = theta[0];
        }
    }

    #[test]
    fn step_examples() {
        assert_eq!(step(&[1.0], &[0.0], 0.1).unwrap(), vec![1.0]);
        assert_eq!(step(&[1.0], &[2.0], 0.25).unwrap(), vec![0.5]);
        assert_eq!(step(&[1.0, 1.0], &[1.0, -1.0], 0.1).unwrap(), vec![0.9, 1.1]);
        assert!(matches!(
            step(&[1.0], &[f64::INFINITY], 0.1),
            Err(EngineError::NonFinite { .. })
        ));
    }

    #[test]
    fn schedule_values() {
        let c = StepsizeSchedule::constant(0.3);
        assert_eq!(c.at(1), 0.3);
        assert_eq!(c.at(999), 0.3);
        let p = StepsizeSchedule::polynomial(1.0, 0.0, 0.5);
        assert_relative_eq!(p.at(4), 0.5);
        let q = StepsizeSchedule::polynomial(2.0, 3.0, 1.0);
        assert_relative_eq!(q.at(7), 0.2);
    }

    #[test]
    fn linear_contraction_is_exact() {
        let cfg = SgdRun {
            oracle: &Quadratic,
            schedule: StepsizeSchedule::constant(0.25),
            theta0: vec![1.0],
            n_iters: 1000,
            seed: 1,
            stream: 0,
            record_plan: RecordPlan::Indices { indices: vec![1, 10, 1000] },
            averaging: Averaging::None,
            accumulate: None,
        };
        let rec = run(&cfg).unwrap();
        for point in &rec.recorded {
            let expect = 0.75f64.powi(point.index as i32);
            assert_relative_eq!(point.iterate[0], expect, max_relative = 1e-12);
        }
    }

    #[test]
    fn identical_runs_are_bitwise_equal() {
        let oracle = SimpleExampleOracle {
            beta: 1.0,
            noise: Distribution1D::Laplace { mean: 0.0, scale: 0.5 },
        };
        let make = || SgdRun {
            oracle: &oracle,
            schedule: StepsizeSchedule::constant(0.01),
            theta0: vec![3.0],
            n_iters: 5000,
            seed: 99,
            stream: 4,
            record_plan: RecordPlan::Geometric { base: 1.0, ratio: 1.5 },
            averaging: Averaging::Tail { start_fraction: 0.5 },
            accumulate: None,
        };
        let a = run(&make()).unwrap();
        let b = run(&make()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.final_iterate[0].to_bits(), b.final_iterate[0].to_bits());
    }

    #[test]
    fn running_mean_matches_batch_mean() {
        let oracle = SimpleExampleOracle {
            beta: 1.0,
            noise: Distribution1D::Gaussian { mean: 0.0, std: 1.0 },
        };
        let all: Vec<u64> = (1..=2000).collect();
        let cfg = SgdRun {
            oracle: &oracle,
            schedule: StepsizeSchedule::constant(0.05),
            theta0: vec![2.0],
            n_iters: 2000,
            seed: 11,
            stream: 0,
            record_plan: RecordPlan::Indices { indices: all },
            averaging: Averaging::Full,
            accumulate: None,
        };
        let rec = run(&cfg).unwrap();
        let batch: f64 =
            rec.recorded.iter().map(|p| p.iterate[0]).sum::<f64>() / rec.recorded.len() as f64;
        let incremental = tail_average(&rec, 0.0).unwrap()[0];
        assert_relative_eq!(incremental, batch, max_relative = 1e-10);
    }

    #[test]
    fn tail_average_requires_matching_config() {
        let cfg = SgdRun {
            oracle: &Quadratic,
            schedule: StepsizeSchedule::constant(0.1),
            theta0: vec![1.0],
            n_iters: 100,
            seed: 0,
            stream: 0,
            record_plan: RecordPlan::FinalOnly,
            averaging: Averaging::Tail { start_fraction: 0.5 },
            accumulate: None,
        };
        let rec = run(&cfg).unwrap();
        assert!(tail_average(&rec, 0.5).is_ok());
        assert!(matches!(tail_average(&rec, 0.25), Err(EngineError::AveragingNotEnabled)));
    }

    #[test]
    fn rr_extrapolation_arithmetic() {
        assert_eq!(rr_extrapolate(&[1.0], &[1.0]).unwrap(), vec![1.0]);
        assert_relative_eq!(rr_extrapolate(&[1.2], &[1.5]).unwrap()[0], 0.9);
        assert!(matches!(
            rr_extrapolate(&[1.0], &[1.0, 2.0]),
            Err(EngineError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn geometric_plan_includes_final_index() {
        let plan = RecordPlan::Geometric { base: 1.0, ratio: 2.0 };
        let idx = plan.indices(100);
        assert_eq!(idx.first(), Some(&1));
        assert_eq!(idx.last(), Some(&100));
        let mut sorted = idx.clone();
        sorted.sort_unstable();
        assert_eq!(idx, sorted);
    }

    #[test]
    fn accumulator_sums_test_function() {
        let f = |t: &[f64]| t[0];
        let cfg = SgdRun {
            oracle: &Quadratic,
            schedule: StepsizeSchedule::constant(0.5),
            theta0: vec![1.0],
            n_iters: 3,
            seed: 0,
            stream: 0,
            record_plan: RecordPlan::FinalOnly,
            averaging: Averaging::None,
            accumulate: Some(&f),
        };
        let rec = run(&cfg).unwrap();
        // Iterates 0.5, 0.25, 0.125.
        assert_relative_eq!(rec.accumulated.unwrap(), 0.875);
    }
}
