//! Exponential and Lawson Runge-Kutta time integration for kinetic plasma
//! models, with the linear stability tools used to pick their time steps.
//!
//! * [`tableaux`]: explicit RK tableaus and φ functions
//! * [`integrators`]: Lawson / exponential steppers on diagonal linear parts
//! * [`stability`]: amplification factors, imaginary-axis CFL numbers, LW5 σ
//! * [`spectral`]: FFTs along periodic axes and the 1D Poisson solve
//! * [`vadv`]: CD2 and WENO5 velocity differencing
//! * [`vp`]: 1D1V Vlasov-Poisson solver
//! * [`dk`]: 4D slab drift-kinetic solver
//! * [`control`]: Richardson-extrapolation step size controller
//! * [`config`]: run configuration files
//! * [`snapshot`]: binary slice dumps

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod control;
pub mod dk;
pub mod error;
pub mod integrators;
mod par;
pub mod snapshot;
pub mod spectral;
pub mod stability;
pub mod tableaux;
pub mod vadv;
pub mod vp;

pub use error::{Error, Result};
pub use integrators::{DiagonalPropagator, Integrator, MethodId};
pub use num_complex::Complex64;
pub use tableaux::{ButcherTableau, TableauId};
