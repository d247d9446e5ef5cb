//! Optimal screening when an agent privately knows a nested set of
//! technologies.
//!
//! The principal's payoff from promising agent payoff `u` to type `i` is a
//! concave frontier `V_i(u)`. Incentive compatibility reduces to a weakly
//! increasing promise with the lowest type at or above the default
//! punishment, so the design problem is a monotone-constrained program that
//! [`solver`] solves on a grid.

// `!(x > 0.0)` style checks are deliberate: they reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod comparative;
pub mod complete_info;
pub mod error;
pub mod mechanism;
pub mod model;
pub mod random;
pub mod scenario;
pub mod solver;

pub use complete_info::{complete_info_curve, CompleteInfoProfile};
pub use error::{Error, Result};
pub use model::{build_surface, eval_surface, validate_nesting, Frontier, PromisedUtility, Quadratic, TypeChain, ValueSurface};
pub use scenario::Scenario;
pub use solver::{Segment, SegmentLabel, Solution};
