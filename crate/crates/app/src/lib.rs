//! Pipeline orchestration behind the `modq` binary and the HTTP inference
//! service.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod models;
pub mod service;

pub use error::{AppError, Result};
