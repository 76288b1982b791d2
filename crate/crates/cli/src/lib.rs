//! Reader service, tag client, deployment files and report tables behind the
//! `rfpop` command.

pub mod config;
pub mod deploy;
pub mod experiments;
pub mod service;
pub mod store;
pub mod tables;
pub mod wire;
