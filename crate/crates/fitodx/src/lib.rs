//! Diagnosis sessions over HTTP and on the command line, on top of
//! [`fitodx_core`].
//!
//! The `fitodx` binary is a thin wrapper around [`cli::run`]. Embedders can
//! host the service directly:
//!
//! ```no_run
//! use fitodx::service::{router, AppState, ServiceConfig};
//!
//! # async fn demo() -> Result<(), Box<dyn std::error::Error>> {
//! let kb = fitodx_core::reference::reference_kb().map_err(|_| "invalid KB")?;
//! let (state, _replay) = AppState::new(Ok(kb), &ServiceConfig::default())?;
//! let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
//! axum::serve(listener, router(state)).await?;
//! # Ok(())
//! # }
//! ```

pub mod answers;
pub mod cli;
pub mod log;
pub mod service;
