//! Scenario runner for `muhs-core`: JSON configuration, preset initial data,
//! artifact output and the acceptance suite behind `muhs selftest`.
// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod config;
pub mod scenario;
