//! The `cadren` command-line tool and HTTP scoring service.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod serve;
