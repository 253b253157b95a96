//! Microgrid reliability planning: system models, scenarios, dispatch,
//! Monte Carlo reliability, indices and reliability-constrained sizing.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dispatch;
pub mod indices;
pub mod mcs;
pub mod model;
pub mod planner;
pub mod scenario;
