//! Online learning in episodic constrained MDPs with stochastic or
//! adversarial constraints.
//!
//! The crate contains the WC-OPS learner ([`wcops`]), the comparison learners
//! ([`baselines`]), synthetic environments ([`env`]), exact oracles and online
//! metrics ([`oracle`]) and an experiment harness ([`harness`]).

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod cmdp;
pub mod env;
pub mod error;
pub mod estimation;
pub mod feasible;
pub mod harness;
pub mod oracle;
pub mod solver;
pub mod wcops;

pub use error::{Error, Result};
