//! Command-line runner and WebSocket service around the `tandemlift` simulator.
//!
//! Clients connect to `ws://host:port/ws`, receive a `config` message, then a
//! stream of telemetry frames, and may send force and session commands.

pub mod cli;
pub mod live;
pub mod replay;
pub mod server;
pub mod wire;

pub use server::{start_live, start_replay, ServerHandle, ServiceError};
