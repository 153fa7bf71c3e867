//! Shared pieces of the command-line tool: the container file format, the
//! JSON run configuration, and synthetic phantoms.

pub mod config;
pub mod container;
pub mod phantom;
