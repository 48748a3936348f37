//! Immutable lookup diagrams published to concurrent readers.
//!
//! The writer exports the current accept function into a self-contained
//! node array and swaps it in atomically. Readers load the current pointer
//! and descend without touching the writer's store.

use std::sync::Arc;

use arc_swap::ArcSwap;

use crate::acl::PacketKey;
use crate::bdd::{BoolFn, NodeStore};
use crate::compile::BitLayout;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Decision {
    Accept,
    Reject,
}

impl Decision {
    pub fn from_bool(accept: bool) -> Self {
        if accept {
            Decision::Accept
        } else {
            Decision::Reject
        }
    }

    pub fn is_accept(self) -> bool {
        self == Decision::Accept
    }
}

impl std::fmt::Display for Decision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Decision::Accept => "Accept",
            Decision::Reject => "Reject",
        })
    }
}

#[derive(Debug, Clone)]
pub struct LookupSnapshot {
    /// `(var, low, high)`; slots 0 and 1 are the FALSE and TRUE terminals.
    nodes: Vec<(u32, u32, u32)>,
    root: u32,
    layout: BitLayout,
    epoch: u64,
}

impl LookupSnapshot {
    pub fn capture(store: &NodeStore, f: BoolFn, layout: BitLayout, epoch: u64) -> Self {
        let (nodes, root) = store.export(f);
        LookupSnapshot { nodes, root, layout, epoch }
    }

    /// Publication counter of the writer that produced this snapshot.
    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len() - 2
    }

    pub fn lookup(&self, p: &PacketKey) -> Decision {
        Decision::from_bool(self.lookup_traced(p).0)
    }

    /// Decision plus the number of internal nodes visited.
    pub fn lookup_traced(&self, p: &PacketKey) -> (bool, u32) {
        let bits = self.layout.bits(p);
        let mut i = self.root;
        let mut visits = 0;
        while i > 1 {
            let (var, low, high) = self.nodes[i as usize];
            visits += 1;
            i = if (bits >> var) & 1 == 1 { high } else { low };
        }
        (i == 1, visits)
    }
}

/// Cheap, cloneable handle for concurrent packet lookups.
#[derive(Clone, Debug)]
pub struct SnapshotReader {
    current: Arc<ArcSwap<LookupSnapshot>>,
}

impl SnapshotReader {
    pub(crate) fn new(initial: LookupSnapshot) -> Self {
        SnapshotReader { current: Arc::new(ArcSwap::from_pointee(initial)) }
    }

    pub(crate) fn publish(&self, snap: LookupSnapshot) {
        self.current.store(Arc::new(snap));
    }

    pub fn snapshot(&self) -> Arc<LookupSnapshot> {
        self.current.load_full()
    }

    pub fn lookup(&self, p: &PacketKey) -> Decision {
        self.current.load().lookup(p)
    }

    pub fn epoch(&self) -> u64 {
        self.current.load().epoch
    }
}
