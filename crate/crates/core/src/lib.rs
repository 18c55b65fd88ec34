//! Simulation of sequential weak-measurement magnetometry with an ensemble of
//! auxiliary spins.
//!
//! A sensor qubit repeatedly measures `M` auxiliary spins that precess about z
//! at the unknown angle `phi` per cycle. The crate propagates conditional
//! register states along simulated measurement records ([`protocol`]),
//! estimates the Fisher information of the records about `phi` ([`fisher`]),
//! evaluates the closed-form asymptotics ([`analytic`]), and tracks the
//! entanglement built up between halves of the register ([`entanglement`]).

// Negated comparisons are how inputs reject NaN alongside out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod cli;
pub mod entanglement;
pub mod error;
pub mod experiments;
pub mod fisher;
pub mod protocol;
pub mod states;
pub mod validation;

pub use error::{Error, Result};
