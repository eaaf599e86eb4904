//! Numerical toolkit for Pontryagin-form optimal control problems with state
//! and endpoint constraints.
//!
//! The crate covers four layers:
//!
//! - [`model`]: problem description (expression dynamics with exact forward-mode
//!   derivatives, control sets, the built-in catalog, time reparameterization).
//! - [`trajectory`]: grids, fixed-step RK4 integration, relaxed dynamics,
//!   chattering controls, linearized equations, L¹ residuals and the
//!   metric-regularity bound for the ODE solution map.
//! - [`penalty`]: the unconstrained penalized functionals that replace the
//!   constrained problem, a smoothed projected quasi-Newton minimizer and the
//!   nonsingular/singular alternative driver.
//! - [`first_order`] and [`second_order`]: multiplier extraction as a linear
//!   feasibility problem, maximum-principle residuals, critical cones and the
//!   second-order certificate for strong minima.
//!
//! The crate is `no_std` (it needs `alloc`); file formats and the command-line
//! surface live in the `plab` crate.

#![no_std]

extern crate alloc;

pub mod first_order;
pub mod grid;
pub mod lp;
pub mod math;
pub mod model;
pub mod penalty;
pub mod rng;
pub mod second_order;
pub mod trajectory;

pub use grid::{Grid, GridError, Samples};
pub use model::catalog::{Catalog, CatalogEntry, ParamSlot};
pub use model::control_set::{ControlSet, Region};
pub use model::expr::{parse_expr, Expr, ExprError};
pub use model::problem::{ProblemError, ProblemSpec};
pub use trajectory::ControlProcess;
