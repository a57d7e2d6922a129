//! File, configuration and network interfaces.

pub mod config;
pub mod csv;
pub mod protocol;

pub use config::Config;
pub use protocol::{Client, ClientMessage, Connection, Server, ServerMessage};
