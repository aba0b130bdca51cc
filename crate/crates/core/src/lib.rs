//! Simulation and verification toolkit for populations of thermostatically
//! controlled loads (TCLs) under switching-rate broadcast actuation.
//!
//! Two backends describe the same population:
//!
//! * [`mc`] steps an ensemble of stochastic hybrid units (Euler-Maruyama
//!   temperature dynamics, deterministic thermostat, Bernoulli rate switches).
//! * [`fvm`] discretizes the coupled Fokker-Planck system on the four hybrid
//!   subdomains into a bilinear model `dF/dt = (A + B0*eps0 + B1*eps1) F`.
//!
//! [`harness`] runs both on the same broadcast signal and measures agreement.

// `!(x > 0.0)` style checks are used on purpose to reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cycle;
pub mod fvm;
pub mod harness;
pub mod mc;
pub mod model;

pub use cycle::{analytic_limit_cycle, LimitCycle};
pub use model::{ActuationSignal, EpsPair, HybridState, Mode, SwitchDirection, TclParams};
