//! Joint transmit and reflective beamforming for IRS-assisted integrated
//! sensing and communication.
//!
//! The transmit side is solved by semidefinite relaxation with constructive
//! rank-one recovery, the reflect side by SDR plus Gaussian randomization
//! (extended target) or successive convex approximation (point target), and
//! the two are alternated by [`driver`]. [`harness`] runs Monte-Carlo sweeps.

pub mod driver;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod numerics;
pub mod rbf;
pub mod scenario;
mod sdp;
pub mod txbf;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};

use std::fmt;
use std::str::FromStr;

/// How CU receivers treat the dedicated sensing signal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ReceiverType {
    /// Sensing signal counts as interference.
    I,
    /// Sensing signal is known and cancelled.
    II,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TargetMode {
    Extended,
    Point,
}

impl fmt::Display for ReceiverType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReceiverType::I => "I",
            ReceiverType::II => "II",
        })
    }
}

impl FromStr for ReceiverType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "I" | "i" | "1" => Ok(ReceiverType::I),
            "II" | "ii" | "2" => Ok(ReceiverType::II),
            _ => Err(Error::Config(format!("unknown receiver type {s:?}"))),
        }
    }
}

impl fmt::Display for TargetMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TargetMode::Extended => "extended",
            TargetMode::Point => "point",
        })
    }
}

impl FromStr for TargetMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "extended" => Ok(TargetMode::Extended),
            "point" => Ok(TargetMode::Point),
            _ => Err(Error::Config(format!("unknown target mode {s:?}"))),
        }
    }
}
