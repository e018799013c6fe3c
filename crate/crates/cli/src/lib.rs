//! Library side of the `treerpo` command-line tool: configuration files, run
//! manifests, tree inspection and plotting.

pub mod commands;
pub mod config;
pub mod inspect;
pub mod manifest;
pub mod plot;
