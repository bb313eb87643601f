//! Simulator, exact small-window oracle, and experiment harness for a
//! nearest-neighbor spiking chain with leakage on the integer lattice.
//!
//! The crate is organized around one object, the time-space diagram of
//! Poisson marks ([`graphical`]), read in three ways: forwards as the
//! activity process, forwards with reversed arrows as the dual, and
//! backwards as dual reachability. [`dynamics`] provides event-driven
//! samplers of the same laws at scales where materializing diagrams is
//! wasteful, [`oracle`] computes exact distributions on small windows from
//! the generator, and [`experiments`] turns replicated runs into estimates
//! with uncertainties and verdicts. All randomness is keyed ([`rng`]), so
//! every number the crate produces is replayable bit for bit.

#![forbid(unsafe_code)]

pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod graphical;
pub mod lattice;
pub mod oracle;
pub mod rng;
pub mod verify;

pub use error::{Error, PartialRun, Result};
pub use lattice::{Configuration, SiteWindow};
