//! Conversion to normal form: Chomsky normal form for weighted CFGs,
//! preparation of weighted PDAs, and the controllee pipeline that brings a
//! two-level grammar to the normal form the chart algorithms need.

pub mod cnf;
mod compose;
mod pda;
mod pipeline;
mod wld;

pub use cnf::{cnf_convert_wcfg, is_cnf, nullary_weights_wcfg, trim_wcfg, unary_chain_weights_wcfg};
pub use pda::{prepare_wpda, PreparedWpda};
pub use pipeline::{nf_convert_two_level, NfConversion};
pub use wld::{binarize_controllee, remove_nullary_controllee, remove_unary_controllee, root_foot_transform, unique_labels};
