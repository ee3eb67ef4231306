//! Transcript-grounded task guidance as a service: providers, storage,
//! session runtime, HTTP API and CLI.

pub mod api;
pub mod cli;
pub mod config;
pub mod providers;
pub mod runtime;
pub mod store;

pub use config::ServiceConfig;
pub use runtime::{Providers, Service, ServiceError};
