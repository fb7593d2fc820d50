//! Command line tool and HTTP session service around `subsnake-core`: image
//! and mask files, polygon and trace formats, and a shared optimizer setup so
//! the CLI and the service produce identical runs.

pub mod cli;
pub mod error;
pub mod formats;
pub mod io;
pub mod server;
pub mod setup;

pub use error::{HarnessError, Result};
pub use setup::{Setup, TableCache};
