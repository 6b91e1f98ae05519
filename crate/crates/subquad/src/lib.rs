//! Simulation laboratory for stochastic gradient descent on locally strongly
//! convex objectives with sub-quadratic tails.
//!
//! The crate is organized in layers:
//!
//! - [`loss`]: scalar robust loss functions and assumption checks
//! - [`dist`]: one-dimensional distributions with seeded sampling and closed-form CDFs
//! - [`quadrature`]: expectations of heavy-tailed integrands via inverse-CDF quadrature
//! - [`lyapunov`]: piecewise Lyapunov functions and Monte Carlo drift verification
//! - [`models`]: data generators and stochastic-gradient oracles for robust and
//!   quantile regression, plus derived theoretical constants
//! - [`engine`]: the SGD iteration with stepsize schedules, recording and averaging
//! - [`stats`]: moment curves, rate slopes, Wasserstein-1 distances, CLT and bias checks
//! - [`experiment`]: config-driven batch runner emitting CSV tables and SVG plots
//! - [`plot`]: deterministic SVG emitter

pub mod dist;
pub mod engine;
pub mod experiment;
pub mod loss;
pub mod lyapunov;
pub mod models;
pub mod plot;
pub mod quadrature;
pub mod report;
pub mod stats;
