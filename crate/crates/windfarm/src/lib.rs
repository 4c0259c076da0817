//! Discrete-time wind farm simulation and active power control.
//!
//! The library models a small wind farm at engineering fidelity: each turbine
//! runs a two-mode generator-torque controller plus a PI pitch regulator, an
//! engineering wake model supplies rotor-effective wind speeds, and a
//! farm-level controller dispatches power set points through two loops: a
//! compensation loop (CCL) that integrates the total tracking error, and a
//! thrust control loop (TCL) that steers the thrust of unsaturated turbines
//! to their common mean.
//!
//! Supporting modules cover step-response identification of the power-to-thrust
//! dynamics ([`sysid`]), closed-loop spectrum analysis of the balancer
//! ([`analysis`]), and a scenario harness with CSV output ([`scenario`]).

pub mod aero;
pub mod analysis;
pub mod error;
pub mod farm;
pub mod reference;
pub mod scenario;
pub mod sysid;
pub mod turbine;
pub mod wake;

pub use error::{Error, Result};
