//! Dynamic IP filtering with group-based exception lists.
//!
//! Access lists compile to reduced ordered binary decision diagrams over the
//! 104 header bits of a packet. Users may request temporary accept exceptions
//! which are granted only where no deny rule forbids their group from
//! overriding the base list.

pub mod acl;
pub mod bdd;
pub mod clock;
pub mod compile;
pub mod engine;
pub mod events;
pub mod oracle;
pub mod protocol;
pub mod snapshot;

pub use acl::{BaseList, GroupHierarchy, GroupId, PacketKey, Rule};
pub use bdd::{BoolFn, NodeStore};
pub use clock::{Clock, ManualClock, SystemClock, Timestamp};
pub use compile::{BitLayout, GrantTable};
pub use engine::{Classification, Engine, EngineConfig, UpdateError, UpdateId, UpdateRequest, UserId};
pub use snapshot::{Decision, LookupSnapshot, SnapshotReader};
