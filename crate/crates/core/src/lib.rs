//! Simulator and library for partial-information multiple access (PIMA)
//! and the TDMA, stabilized slotted ALOHA and CRA-2 baselines.
//!
//! Time is measured in usd (symbol durations). A frame of PIMA starts with
//! the base station counting the active users from one superposed symbol,
//! then sizes and deals the data slots from that count.

pub mod enumeration;
mod error;
pub mod harness;
pub mod metrics;
pub mod oracle;
pub mod protocols;
pub mod scheduling;
pub mod traffic;

pub use error::{Error, Result};
