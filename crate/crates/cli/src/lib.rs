//! Library surface of the `certbound` command-line harness: the experiment
//! runner, the report envelopes, and the file plumbing. The binary is a thin
//! argument-parsing layer over these modules, and downstream code (including
//! the integration tests) reads emitted artifacts back through the same
//! types that wrote them.

pub mod experiment;
pub mod files;
pub mod report;
