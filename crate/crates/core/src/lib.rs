//! Hierarchical global/local navigation with a learnable replanning trigger.

pub mod error;
pub mod world;

pub use error::{ReplanError, Result};
pub mod bench;
pub mod cli;
pub mod drl;
pub mod env;
pub mod global;
pub mod local;
pub mod strategy;
