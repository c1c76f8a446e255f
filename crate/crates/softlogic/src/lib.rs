//! Standard-library companion to `softlogic-core`: atom files, demo
//! fixtures, the HTTP session service and the command-line front end.

pub mod cli;
pub mod demo;
pub mod engine;
pub mod fixture;
pub mod server;
pub mod session;
pub mod tsv;
