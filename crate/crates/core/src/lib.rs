//! Work quasiprobability distributions for quantum-battery charging
//! processes.
//!
//! The crate is organised bottom-up: [`operator`] holds dense exact quantum
//! mechanics, [`quasi`] builds and analyses signed work distributions,
//! [`models`] provides the two concrete batteries with closed forms,
//! [`advantage`] turns them into scaling diagnostics, and [`detector`] and
//! [`tpm`] cover the qubit readout scheme and two-point-measurement
//! statistics.

pub mod advantage;
pub mod detector;
pub mod error;
pub mod operator;
pub mod models;
pub mod quasi;
pub mod tpm;

pub use error::{Error, Result};
