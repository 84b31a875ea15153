//! Library surface of the CLI crate: configuration schema, pipeline runner,
//! output staging and report types (the binary is a thin wrapper, and the
//! integration tests validate emitted files against these schemas).

pub mod config;
pub mod outputs;
pub mod report;
pub mod runner;
