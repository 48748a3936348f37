//! UDP message exchange: request, allow or reject, confirm, and later
//! delete or renew.

pub mod client;
pub mod directory;
pub mod server;
pub mod wire;

pub use client::{Client, ClientError, RequestReply};
pub use directory::UserDirectory;
pub use server::{Server, ServerConfig, ServerHandle, SourcePrefix, DEFAULT_PORT};
pub use wire::{decode, encode, Kind, Message, WireError, MAX_DATAGRAM};
