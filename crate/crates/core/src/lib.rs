//! Decision support for migrating multi-component formations into the cloud.

pub mod ahp;
pub mod api;
pub mod bench;
pub mod catalog;
pub mod cli;
pub mod combination;
pub mod error;
pub mod evaluation;
pub mod formation;
pub mod numfmt;
pub mod profile;
pub mod requirements;
pub mod session;

pub use error::{Error, Result};
