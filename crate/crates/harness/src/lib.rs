//! Monte Carlo experiments for the `wpmec-core` solver: channel draws,
//! parameter sweeps over the comparison schemes, and CSV output.

pub mod channels;
pub mod checks;
pub mod config;
pub mod error;
pub mod experiment;
pub mod output;

pub use error::{HarnessError, Result};
