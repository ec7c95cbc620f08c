//! Networked servers for ipir.
//!
//! Each server holds a replica of the store and answers PIR queries over TCP
//! using length-prefixed JSON frames. [`RemoteServers`] plugs into the core
//! protocol wherever a [`ipir_core::intermittent::Servers`] is expected.

mod client;
mod error;
pub mod frame;
mod server;
pub mod store_file;
pub mod wire;

pub use client::{RemoteServers, WireStats, DEFAULT_TIMEOUT};
pub use error::{NetError, NetResult};
pub use server::{serve, Server, ServerHandle};
pub use wire::{WireMessage, PROTO_VERSION};
