//! Scalar robust loss functions, their derivatives up to third order, and grid
//! checks for the smoothness / sub-quadratic-tail assumptions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    /// Requested derivative does not exist at this point (Huber kink).
    #[error("loss is not differentiable to order {order} at t = {t}")]
    NotDifferentiable { t: f64, order: u32 },
    #[error("assumption grid is empty")]
    EmptyGrid,
}

/// Tagged family of even, nonnegative scalar losses with l(0) = 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
pub enum RobustLoss {
    Huber { delta: f64 },
    PseudoHuber { delta: f64 },
    LogCosh,
    GenCharbonnier { alpha: f64, c: f64 },
    Barron { alpha: f64, c: f64 },
}

impl RobustLoss {
    pub fn huber(delta: f64) -> Self {
        assert!(delta > 0.0, "huber delta must be positive");
        RobustLoss::Huber { delta }
    }

    pub fn pseudo_huber(delta: f64) -> Self {
        assert!(delta > 0.0, "pseudo-huber delta must be positive");
        RobustLoss::PseudoHuber { delta }
    }

    pub fn log_cosh() -> Self {
        RobustLoss::LogCosh
    }

    pub fn gen_charbonnier(alpha: f64, c: f64) -> Self {
        assert!((1.0..2.0).contains(&alpha), "charbonnier alpha must lie in [1,2)");
        assert!(c > 0.0, "charbonnier c must be positive");
        RobustLoss::GenCharbonnier { alpha, c }
    }

    pub fn barron(alpha: f64, c: f64) -> Self {
        assert!((1.0..2.0).contains(&alpha), "barron alpha must lie in [1,2)");
        assert!(c > 0.0, "barron c must be positive");
        RobustLoss::Barron { alpha, c }
    }

    /// Bound a_l with |l'(t)| <= a_l for bounded-derivative variants.
    pub fn derivative_bound(&self) -> Option<f64> {
        match *self {
            RobustLoss::Huber { delta } | RobustLoss::PseudoHuber { delta } => Some(delta),
            RobustLoss::LogCosh => Some(1.0),
            RobustLoss::GenCharbonnier { .. } | RobustLoss::Barron { .. } => None,
        }
    }
}

/// l(t) for the chosen variant. Total on the reals.
pub fn loss_value(loss: &RobustLoss, t: f64) -> f64 {
    match *loss {
        RobustLoss::Huber { delta } => {
            if t.abs() <= delta {
                0.5 * t * t
            } else {
                delta * t.abs() - 0.5 * delta * delta
            }
        }
        RobustLoss::PseudoHuber { delta } => {
            let z = t / delta;
            delta * delta * ((1.0 + z * z).sqrt() - 1.0)
        }
        RobustLoss::LogCosh => {
            // log cosh t = |t| + log(1 + e^{-2|t|}) - log 2, stable for large |t|.
            t.abs() + (-2.0 * t.abs()).exp().ln_1p() - std::f64::consts::LN_2
        }
        RobustLoss::GenCharbonnier { alpha, c } => {
            (t * t + c * c).powf(0.5 * alpha) - c.powf(alpha)
        }
        RobustLoss::Barron { alpha, c } => {
            let u = (t / c) * (t / c) / (2.0 - alpha) + 1.0;
            (2.0 - alpha) / alpha * (u.powf(0.5 * alpha) - 1.0)
        }
    }
}

/// order-th derivative of l at t, order in {1,2,3}.
///
/// Huber: second and third derivatives do not exist at |t| = delta; callers
/// computing population moments integrate across the kink, which has measure
/// zero.
pub fn loss_deriv(loss: &RobustLoss, t: f64, order: u32) -> Result<f64, LossError> {
    assert!((1..=3).contains(&order), "order must lie in {{1,2,3}}");
    Ok(match *loss {
        RobustLoss::Huber { delta } => {
            if order >= 2 && t.abs() == delta {
                return Err(LossError::NotDifferentiable { t, order });
            }
            match order {
                1 => t.clamp(-delta, delta),
                2 => {
                    if t.abs() < delta {
                        1.0
                    } else {
                        0.0
                    }
                }
                _ => 0.0,
            }
        }
        RobustLoss::PseudoHuber { delta } => {
            let u = 1.0 + (t / delta) * (t / delta);
            match order {
                1 => t / u.sqrt(),
                2 => u.powf(-1.5),
                _ => -3.0 * t / (delta * delta) * u.powf(-2.5),
            }
        }
        RobustLoss::LogCosh => {
            let th = t.tanh();
            match order {
                1 => th,
                2 => 1.0 - th * th,
                _ => -2.0 * th * (1.0 - th * th),
            }
        }
        RobustLoss::GenCharbonnier { alpha, c } => {
            let u = t * t + c * c;
            let m = 0.5 * alpha;
            match order {
                1 => alpha * t * u.powf(m - 1.0),
                2 => alpha * u.powf(m - 2.0) * (c * c + (alpha - 1.0) * t * t),
                _ => {
                    2.0 * alpha
                        * t
                        * u.powf(m - 3.0)
                        * ((m - 2.0) * (c * c + (alpha - 1.0) * t * t) + (alpha - 1.0) * u)
                }
            }
        }
        RobustLoss::Barron { alpha, c } => {
            let c2 = c * c;
            let u = t * t / (c2 * (2.0 - alpha)) + 1.0;
            let du = 2.0 * t / (c2 * (2.0 - alpha));
            let m = 0.5 * alpha;
            match order {
                1 => t / c2 * u.powf(m - 1.0),
                2 => u.powf(m - 1.0) / c2 + t / c2 * (m - 1.0) * u.powf(m - 2.0) * du,
                _ => {
                    // d/dt of the order-2 expression.
                    (m - 1.0) * u.powf(m - 2.0) * du / c2
                        + (m - 1.0) / c2
                            * (u.powf(m - 2.0) * du
                                + t * (m - 2.0) * u.powf(m - 3.0) * du * du
                                + t * u.powf(m - 2.0) * 2.0 / (c2 * (2.0 - alpha)))
                }
            }
        }
    })
}

/// Candidate constants for the local strong convexity / sub-quadratic tail
/// conditions on an objective f: Lipschitz gradient constant L, inner strong
/// convexity mu on the radius-Delta ball, and the outer-region constants
/// a, b, k with |grad f| <= a r^{k-1} and <theta - theta*, grad f> >= b r^k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubquadraticParams {
    pub l: f64,
    pub mu: f64,
    pub a: f64,
    pub b: f64,
    pub delta: f64,
    pub k: f64,
}

impl SubquadraticParams {
    pub fn new(l: f64, mu: f64, a: f64, b: f64, delta: f64, k: f64) -> Self {
        assert!(mu > 0.0 && a > 0.0 && b > 0.0 && delta > 0.0, "constants must be positive");
        assert!(l >= mu, "L must dominate mu");
        assert!((1.0..2.0).contains(&k), "k must lie in [1,2)");
        SubquadraticParams { l, mu, a, b, delta, k }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AssumptionKind {
    /// |grad f(x) - grad f(y)| <= L |x - y| over a grid pair.
    Lipschitz,
    /// <x - y, grad f(x) - grad f(y)> >= mu |x - y|^2 for inner pairs.
    InnerMonotonicity,
    /// |grad f(theta)| <= a r^{k-1} for outer points.
    OuterGradientBound,
    /// <theta - theta*, grad f(theta)> >= b r^k for outer points.
    OuterAlignment,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssumptionCheck {
    pub kind: AssumptionKind,
    /// Grid indices involved (a single point repeats its index).
    pub points: (usize, usize),
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub checks: Vec<AssumptionCheck>,
    pub pass: bool,
}

/// Evaluates the smoothness and tail conditions on a user-supplied grid.
///
/// This is a falsifier, not a prover: passing only means no violation was
/// found at the sampled points (up to `tol`).
pub fn check_assumptions<G>(
    grad_oracle: G,
    params: &SubquadraticParams,
    theta_star: &[f64],
    grid: &[Vec<f64>],
    tol: f64,
) -> Result<AssumptionReport, LossError>
where
    G: Fn(&[f64]) -> Vec<f64>,
{
    if grid.is_empty() {
        return Err(LossError::EmptyGrid);
    }
    let grads: Vec<Vec<f64>> = grid.iter().map(|p| grad_oracle(p)).collect();
    let radius = |p: &[f64]| norm(&sub(p, theta_star));
    let mut checks = Vec::new();

    for i in 0..grid.len() {
        for j in (i + 1)..grid.len() {
            let dp = sub(&grid[i], &grid[j]);
            let dg = sub(&grads[i], &grads[j]);
            let lhs = norm(&dg);
            let rhs = params.l * norm(&dp);
            checks.push(AssumptionCheck {
                kind: AssumptionKind::Lipschitz,
                points: (i, j),
                lhs,
                rhs,
                pass: lhs <= rhs + tol,
            });
            if radius(&grid[i]) <= params.delta && radius(&grid[j]) <= params.delta {
                let lhs = dot(&dp, &dg);
                let rhs = params.mu * norm(&dp) * norm(&dp);
                checks.push(AssumptionCheck {
                    kind: AssumptionKind::InnerMonotonicity,
                    points: (i, j),
                    lhs,
                    rhs,
                    pass: lhs >= rhs - tol,
                });
            }
        }
    }
    for (i, point) in grid.iter().enumerate() {
        let r = radius(point);
        if r > params.delta {
            let lhs = norm(&grads[i]);
            let rhs = params.a * r.powf(params.k - 1.0);
            checks.push(AssumptionCheck {
                kind: AssumptionKind::OuterGradientBound,
                points: (i, i),
                lhs,
                rhs,
                pass: lhs <= rhs + tol,
            });
            let lhs = dot(&sub(point, theta_star), &grads[i]);
            let rhs = params.b * r.powf(params.k);
            checks.push(AssumptionCheck {
                kind: AssumptionKind::OuterAlignment,
                points: (i, i),
                lhs,
                rhs,
                pass: lhs >= rhs - tol,
            });
        }
    }
    let pass = checks.iter().all(|c| c.pass);
    Ok(AssumptionReport { checks, pass })
}

pub(crate) fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn huber_values() {
        let l = RobustLoss::huber(1.0);
        assert_relative_eq!(loss_value(&l, 0.5), 0.125);
        assert_relative_eq!(loss_value(&l, 2.0), 1.5);
        assert_relative_eq!(loss_value(&RobustLoss::pseudo_huber(1.0), 0.0), 0.0);
    }

    #[test]
    fn first_derivatives() {
        let ph = RobustLoss::pseudo_huber(1.0);
        assert_relative_eq!(loss_deriv(&ph, 0.0, 1).unwrap(), 0.0);
        assert_relative_eq!(loss_deriv(&ph, 1.0, 1).unwrap(), 1.0 / 2.0f64.sqrt());
        let h = RobustLoss::huber(1.0);
        assert_relative_eq!(loss_deriv(&h, 2.0, 1).unwrap(), 1.0);
    }

    #[test]
    fn huber_kink_is_not_differentiable() {
        let h = RobustLoss::huber(1.0);
        assert!(matches!(
            loss_deriv(&h, 1.0, 2),
            Err(LossError::NotDifferentiable { order: 2, .. })
        ));
        assert!(loss_deriv(&h, 1.0, 1).is_ok());
        assert_relative_eq!(loss_deriv(&h, 0.5, 3).unwrap(), 0.0);
        assert!(loss_deriv(&h, -1.0, 3).is_err());
    }

    fn fd1(loss: &RobustLoss, t: f64, h: f64) -> f64 {
        (loss_value(loss, t + h) - loss_value(loss, t - h)) / (2.0 * h)
    }

    fn fd_higher(loss: &RobustLoss, t: f64, order: u32, h: f64) -> f64 {
        if order == 1 {
            fd1(loss, t, h)
        } else {
            (loss_deriv(loss, t + h, order - 1).unwrap() - loss_deriv(loss, t - h, order - 1).unwrap())
                / (2.0 * h)
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        // Central differences have O(h^2) error; the constants below were
        // calibrated once against the next derivative's magnitude.
        let losses = [
            RobustLoss::pseudo_huber(1.0),
            RobustLoss::pseudo_huber(2.5),
            RobustLoss::log_cosh(),
            RobustLoss::gen_charbonnier(1.0, 1.0),
            RobustLoss::gen_charbonnier(1.5, 0.7),
            RobustLoss::barron(1.0, 1.0),
            RobustLoss::barron(1.7, 2.0),
        ];
        for loss in &losses {
            for t in [-3.0, -1.2, -0.4, 0.0, 0.3, 0.9, 2.0, 5.0] {
                for h in [1e-3, 1e-4] {
                    for order in 1..=3u32 {
                        let exact = loss_deriv(loss, t, order).unwrap();
                        let approx = fd_higher(loss, t, order, h);
                        assert!(
                            (exact - approx).abs() <= 20.0 * h * h + 1e-9,
                            "{loss:?} t={t} order={order} h={h}: {exact} vs {approx}"
                        );
                    }
                }
            }
        }
        // Huber off the kink.
        let h1 = RobustLoss::huber(1.0);
        for t in [-2.0, -0.5, 0.3, 3.0] {
            assert!((loss_deriv(&h1, t, 1).unwrap() - fd1(&h1, t, 1e-4)).abs() < 1e-7);
        }
    }

    #[test]
    fn losses_are_even_nonnegative_zero_at_origin() {
        let losses = [
            RobustLoss::huber(1.3),
            RobustLoss::pseudo_huber(0.8),
            RobustLoss::log_cosh(),
            RobustLoss::gen_charbonnier(1.4, 1.1),
            RobustLoss::barron(1.2, 0.9),
        ];
        for loss in &losses {
            assert_eq!(loss_value(loss, 0.0), 0.0);
            for t in [0.1, 0.7, 2.0, 10.0] {
                let v = loss_value(loss, t);
                assert!(v >= 0.0);
                assert_relative_eq!(v, loss_value(loss, -t), max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn monotone_first_derivative_and_bounded_gradient() {
        for loss in [RobustLoss::huber(1.0), RobustLoss::pseudo_huber(1.0)] {
            let mut prev = f64::NEG_INFINITY;
            for i in 0..200 {
                let t = -10.0 + 0.1 * i as f64;
                let d = loss_deriv(&loss, t, 1).unwrap();
                assert!(d >= prev - 1e-12);
                prev = d;
            }
        }
        let ph = RobustLoss::pseudo_huber(2.0);
        for t in [-50.0, -3.0, 0.0, 1.0, 80.0] {
            assert!(loss_deriv(&ph, t, 1).unwrap().abs() <= 2.0);
        }
    }

    fn simple_grad(beta: f64) -> impl Fn(&[f64]) -> Vec<f64> {
        move |p: &[f64]| {
            let t = p[0];
            vec![if t.abs() < 1.0 { t } else { t.signum() * t.abs().powf(beta - 1.0) }]
        }
    }

    #[test]
    fn assumptions_pass_on_identity_gradient() {
        let params = SubquadraticParams::new(1.0, 1.0, 1.0, 1.0, 10.0, 1.0);
        let grid: Vec<Vec<f64>> = vec![vec![0.1], vec![-0.4], vec![2.0]];
        let report =
            check_assumptions(|p| p.to_vec(), &params, &[0.0], &grid, 1e-9).unwrap();
        assert!(report.pass);
    }

    #[test]
    fn assumptions_pass_on_piecewise_example() {
        let params = SubquadraticParams::new(1.0, 1.0, 1.0, 1.0, 1.0, 1.0);
        let grid: Vec<Vec<f64>> = vec![vec![0.5], vec![-0.5], vec![2.0], vec![-2.0]];
        let report = check_assumptions(simple_grad(1.0), &params, &[0.0], &grid, 1e-9).unwrap();
        assert!(report.pass, "{:#?}", report.checks.iter().filter(|c| !c.pass).collect::<Vec<_>>());
    }

    #[test]
    fn overclaimed_mu_fails() {
        let params = SubquadraticParams::new(2.0, 2.0, 1.0, 1.0, 10.0, 1.0);
        let grid: Vec<Vec<f64>> = vec![vec![0.1], vec![0.2]];
        let report = check_assumptions(|p| p.to_vec(), &params, &[0.0], &grid, 1e-9).unwrap();
        assert!(!report.pass);
        assert!(report
            .checks
            .iter()
            .any(|c| c.kind == AssumptionKind::InnerMonotonicity && !c.pass));
    }

    #[test]
    fn empty_grid_is_an_error() {
        let params = SubquadraticParams::new(1.0, 1.0, 1.0, 1.0, 1.0, 1.0);
        assert!(matches!(
            check_assumptions(|p| p.to_vec(), &params, &[0.0], &[], 1e-9),
            Err(LossError::EmptyGrid)
        ));
    }
}
