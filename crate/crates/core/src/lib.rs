//! Independent multi-agent reinforcement learning on an anonymous
//! supply-demand matching market.

#![allow(
    clippy::needless_range_loop,
    clippy::neg_cmp_op_on_partial_ord,
    clippy::single_range_in_vec_init
)]

pub mod cli;
pub mod error;
pub mod harness;
pub mod learners;
pub mod matchenv;
pub mod numkit;
pub mod verify;

pub use error::{Error, Result};
