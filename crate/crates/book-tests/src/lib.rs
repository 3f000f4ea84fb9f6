//! Compiles and runs the guide's snippets: each chapter is a module whose
//! docs are the chapter's markdown, so `cargo test --doc` picks them up.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/semirings.md")]
pub mod semirings {}
#[doc = include_str!("../../../book/src/grammar-files.md")]
pub mod grammar_files {}
#[doc = include_str!("../../../book/src/two-level.md")]
pub mod two_level {}
#[doc = include_str!("../../../book/src/normal-form.md")]
pub mod normal_form {}
#[doc = include_str!("../../../book/src/stringsums.md")]
pub mod stringsums {}
#[doc = include_str!("../../../book/src/allsums.md")]
pub mod allsums {}
#[doc = include_str!("../../../book/src/oracle.md")]
pub mod oracle {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
