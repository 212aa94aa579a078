//! Heterogeneous-agent market simulator: fundamentalist and chartist
//! traders with CRRA preferences, cleared by a Walrasian auctioneer.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod clearing;
pub mod config;
pub mod error;
pub mod ingest;
pub mod model;
pub mod output;
pub mod simulator;
pub mod stats;
pub mod sweep;

pub use error::{MarketError, Result};
