//! Command line front end and live control service for the `nlmimo` lab.

pub mod cli;
pub mod control;
pub mod live;
pub mod server;
