//! Approximate robust optimization through online learning.
//!
//! A robust feasibility problem asks for `x` with `f_i(x, u) <= 0` for every
//! noise value `u` in an uncertainty set. The solvers in [`robust`] reduce it
//! to a sequence of nominal problems at fixed noise, solved by any oracle
//! implementing [`robust::FeasibilityOracle`], while an online learner
//! ([`learners`]) drives the noise toward the worst case.

pub mod error;
pub mod learners;
pub mod linalg;
pub mod oracles;
pub mod robust;
pub mod trustregion;
pub mod uncertainty;
pub mod verify;

pub use error::{Error, Result};
