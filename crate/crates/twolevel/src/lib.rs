//! Semiring-weighted two-level grammars: a controller (CFG or PDA) generates
//! label sequences that steer a labeled distinguished controllee (CFG or PDA).
//!
//! The crate provides loading and validation of the ingredient grammars,
//! construction of the merged rule systems, conversion to normal form, chart
//! based stringsums, fixed-point allsums and a brute-force derivation oracle.

pub mod grammar;
pub mod oracle;
pub mod semiring;
pub mod stringsum;
pub mod allsum;
pub mod control;
pub mod error;
pub mod nf;
pub mod twolevel;

pub use error::{Error, Result};
