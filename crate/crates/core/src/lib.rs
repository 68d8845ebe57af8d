//! Numerical toolkit for matrix Riccati differential equations
//! `Z' + Z P Z + Q Z + Z R + S = 0`.
//!
//! - [`riccati`]: integrate solutions, build the fundamental pair and the
//!   kernel integral μ, and reconstruct any solution of the family from one
//!   of them in closed form.
//! - [`classify`]: normal/extremal verdicts for solutions, the parameter set
//!   of extremal solutions, tail integrals, principal (extremal) solutions
//!   and equation-level classes.
//! - [`linsys`]: the linear system `Φ' = AΦ + BΨ, Ψ' = CΦ + DΨ`, its Riccati
//!   reduction and determinant-ratio diagnostics.
//!
//! Everything is generic over the real scalar ([`Real`]: `f32` or `f64`);
//! the aliases below fix it to `f64` for everyday use.
//!
//! ```
//! use std::sync::Arc;
//! use num_complex::Complex64;
//! use riccati_kit::coefficients::{builtin_scenario, ScenarioParams};
//! use riccati_kit::riccati::{family_solution, fundamental_pair, solve};
//! use riccati_kit::{IntegratorConfig, MatrixC};
//!
//! // z' + e^{-t} z² = 0 through z(0) = 0, then the member through z(0) = 0.5
//! let spec = Arc::new(builtin_scenario("decay_scalar", ScenarioParams::default())?);
//! let base = solve(&spec, &MatrixC::zeros(1), 0.0, 10.0, &IntegratorConfig::default())?;
//! let fd = fundamental_pair(&base)?;
//! let z = family_solution(&fd, &MatrixC::scalar(1, Complex64::new(0.5, 0.0)), 10.0)?;
//! let j = 1.0 - (-10f64).exp();
//! assert!((z[(0, 0)].re - 0.5 / (1.0 + 0.5 * j)).abs() < 1e-8);
//! # Ok::<(), riccati_kit::Error>(())
//! ```

pub mod classify;
pub mod coefficients;
pub mod error;
pub mod linsys;
pub mod matrix;
pub mod ode;
pub mod quad;
pub mod riccati;
pub mod scalar;

pub use error::{Error, Result};
pub use matrix::ComplexMatrix;
pub use scalar::{Cx, Real};

pub type MatrixC = matrix::ComplexMatrix<f64>;
pub type MatrixC32 = matrix::ComplexMatrix<f32>;
pub type CoefficientSpec = coefficients::CoefficientSpec<f64>;
pub type SystemSpec = coefficients::SystemSpec<f64>;
pub type IntegratorConfig = ode::IntegratorConfig<f64>;
pub type Trajectory = ode::Trajectory<f64>;
pub type RiccatiTrajectory = riccati::RiccatiTrajectory<f64>;
pub type FundamentalData = riccati::FundamentalData<f64>;
pub type SystemTrajectory = linsys::SystemTrajectory<f64>;
pub type ClassifyConfig = classify::ClassifyConfig<f64>;
