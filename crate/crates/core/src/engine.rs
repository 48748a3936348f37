//! Filtering state under group-based exceptions.
//!
//! The engine keeps the compiled base list `phi_b`, one deny mask `D_i` and
//! one exception function `E_i` per group, and the composed accept function
//!
//! ```text
//! phi_a = phi_b ∨ ⋁_i (¬D_i ∧ E_i)
//! ```
//!
//! `D_i` is the disjunction of base deny rules group `i` may not override;
//! `E_i` is the union of the granted parts of group `i`'s active updates.
//! Every mutation rebuilds `phi_a` and publishes a fresh lookup snapshot.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;
use std::sync::Arc;
use std::time::Duration;

use thiserror::Error;

use crate::acl::{parse_acl, parse_hierarchy, BaseList, GroupError, GroupHierarchy, GroupId, PacketKey, ParseError, Rule};
use crate::bdd::{BoolFn, NodeStore};
use crate::clock::{Clock, Timestamp};
use crate::compile::{compile_condition, compile_deny_mask, compile_list, tabulate_grant, BitLayout, GrantTable, HEADER_BITS};
use crate::events::{EventKind, EventRecord, EventSink};
use crate::oracle::OracleConfig;
use crate::snapshot::{Decision, LookupSnapshot, SnapshotReader};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UpdateId(pub u64);

impl fmt::Display for UpdateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UserId(pub u32);

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RecordState {
    Pending,
    Active,
}

#[derive(Clone, Debug)]
pub struct UpdateRecord {
    pub id: UpdateId,
    pub owner: UserId,
    pub group: GroupId,
    /// Union of the requested rules.
    pub requested: BoolFn,
    /// `requested ∧ ¬D_group`: the part the group may activate.
    pub granted: BoolFn,
    pub rules: Vec<Rule>,
    /// Enqueue time while pending, confirmation time once active.
    pub created_at: Timestamp,
    pub expiry: Duration,
    /// Set once active.
    pub deadline: Option<Timestamp>,
    pub state: RecordState,
}

#[derive(Clone, Debug)]
pub struct UpdateRequest {
    pub owner: UserId,
    pub group: GroupId,
    pub expiry: Duration,
    pub rules: Vec<Rule>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Classification {
    /// Everything requested can be granted.
    Full { id: UpdateId },
    /// Only the rows of `table` can be granted.
    Partial { id: UpdateId, table: GrantTable },
    /// Nothing can be granted; no record was queued.
    RejectAll,
}

impl Classification {
    pub fn id(&self) -> Option<UpdateId> {
        match self {
            Classification::Full { id } | Classification::Partial { id, .. } => Some(*id),
            Classification::RejectAll => None,
        }
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum UpdateError {
    #[error("unknown update id {0}")]
    UnknownId(UpdateId),
    #[error("confirm window for update {0} has expired")]
    Expired(UpdateId),
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error("exception requests may only contain accept rules")]
    DenyInRequest,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GcPolicy {
    /// Collect after every recompute.
    EveryRecompute,
    /// Collect after a recompute once the store holds at least `min_nodes`
    /// nodes and has doubled since the previous collection.
    Growth { min_nodes: usize },
    Never,
}

#[derive(Clone, Debug)]
pub struct EngineConfig {
    pub confirm_window: Duration,
    /// Mixed into update ids; random when `None`.
    pub id_salt: Option<u64>,
    pub layout: BitLayout,
    pub gc: GcPolicy,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            confirm_window: Duration::from_secs(30),
            id_salt: None,
            layout: BitLayout::default(),
            gc: GcPolicy::Growth { min_nodes: 1 << 16 },
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EngineStats {
    /// Rebuilds of `phi_a`.
    pub recomputes: u64,
    pub publications: u64,
    pub collections: u64,
}

/// Unique ids from a counter pushed through a bijection of `u64`.
struct IdGenerator {
    salt: u64,
    counter: u64,
}

impl IdGenerator {
    fn next(&mut self) -> UpdateId {
        loop {
            self.counter += 1;
            let id = self.counter.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ self.salt;
            if id != 0 {
                return UpdateId(id);
            }
        }
    }
}

const EXPIRED_MEMORY: usize = 4096;

pub struct Engine {
    store: NodeStore,
    layout: BitLayout,
    base: BaseList,
    hierarchy: GroupHierarchy,
    phi_b: BoolFn,
    deny_masks: Vec<BoolFn>,
    exceptions: Vec<BoolFn>,
    phi_a: BoolFn,

    active: HashMap<UpdateId, UpdateRecord>,
    by_deadline: BTreeSet<(Timestamp, UpdateId)>,
    by_group: Vec<BTreeSet<UpdateId>>,
    pending: HashMap<UpdateId, UpdateRecord>,
    pending_order: VecDeque<(Timestamp, UpdateId)>,
    expired: HashSet<UpdateId>,
    expired_order: VecDeque<UpdateId>,

    config: EngineConfig,
    clock: Arc<dyn Clock>,
    ids: IdGenerator,
    stats: EngineStats,
    reader: SnapshotReader,
    sink: Option<Box<dyn EventSink>>,
    live_after_gc: usize,
}

impl fmt::Debug for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Engine")
            .field("rules", &self.base.len())
            .field("groups", &self.hierarchy.len())
            .field("active", &self.active.len())
            .field("pending", &self.pending.len())
            .finish()
    }
}

impl Engine {
    /// Parse and compile a base list and group hierarchy.
    pub fn load(
        base_text: &str,
        hierarchy_text: &str,
        config: EngineConfig,
        clock: Arc<dyn Clock>,
    ) -> Result<Engine, EngineError> {
        let hierarchy = parse_hierarchy(hierarchy_text)?;
        let base = parse_acl(base_text, hierarchy.len())?;
        Engine::new(base, hierarchy, config, clock)
    }

    pub fn new(
        base: BaseList,
        hierarchy: GroupHierarchy,
        config: EngineConfig,
        clock: Arc<dyn Clock>,
    ) -> Result<Engine, EngineError> {
        let n = hierarchy.len();
        for rule in &base.rules {
            if let Some(g) = rule.deny_groups().and_then(|gs| gs.iter().find(|g| g.index() >= n)) {
                return Err(GroupError::OutOfRange { id: g.0, n }.into());
            }
        }
        let layout = config.layout;
        let mut store = NodeStore::new(HEADER_BITS).expect("header fits the store");
        let phi_b = compile_list(&mut store, &layout, &base.rules);
        let deny_masks = hierarchy
            .groups()
            .map(|j| compile_deny_mask(&mut store, &layout, &base, j, &hierarchy))
            .collect::<Result<Vec<_>, _>>()?;
        let exceptions = vec![store.bot(); n];
        let reader = SnapshotReader::new(LookupSnapshot::capture(&store, phi_b, layout, 0));
        let salt = config.id_salt.unwrap_or_else(rand::random);
        let mut engine = Engine {
            store,
            layout,
            base,
            hierarchy,
            phi_b,
            deny_masks,
            exceptions,
            phi_a: phi_b,
            active: HashMap::new(),
            by_deadline: BTreeSet::new(),
            by_group: vec![BTreeSet::new(); n],
            pending: HashMap::new(),
            pending_order: VecDeque::new(),
            expired: HashSet::new(),
            expired_order: VecDeque::new(),
            config,
            clock,
            ids: IdGenerator { salt, counter: 0 },
            stats: EngineStats::default(),
            reader,
            sink: None,
            live_after_gc: 0,
        };
        engine.live_after_gc = engine.store.live_nodes();
        Ok(engine)
    }

    pub fn set_event_sink(&mut self, sink: Box<dyn EventSink>) {
        self.sink = Some(sink);
    }

    pub fn now(&self) -> Timestamp {
        self.clock.now()
    }

    pub fn clock(&self) -> Arc<dyn Clock> {
        Arc::clone(&self.clock)
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn layout(&self) -> &BitLayout {
        &self.layout
    }

    pub fn base(&self) -> &BaseList {
        &self.base
    }

    pub fn hierarchy(&self) -> &GroupHierarchy {
        &self.hierarchy
    }

    pub fn store(&self) -> &NodeStore {
        &self.store
    }

    pub fn phi_b(&self) -> BoolFn {
        self.phi_b
    }

    pub fn phi_a(&self) -> BoolFn {
        self.phi_a
    }

    pub fn deny_mask(&self, j: GroupId) -> Option<BoolFn> {
        self.deny_masks.get(j.index()).copied()
    }

    pub fn exception(&self, j: GroupId) -> Option<BoolFn> {
        self.exceptions.get(j.index()).copied()
    }

    pub fn stats(&self) -> EngineStats {
        self.stats
    }

    /// Handle for lock-free lookups from other threads.
    pub fn reader(&self) -> SnapshotReader {
        self.reader.clone()
    }

    /// Decide a packet against the current accept function.
    pub fn match_packet(&self, p: &PacketKey) -> Decision {
        Decision::from_bool(self.store.evaluate(self.phi_a, &self.layout.bits(p)))
    }

    /// Decision plus internal nodes visited by the descent.
    pub fn match_traced(&self, p: &PacketKey) -> (Decision, u32) {
        let (v, n) = self.store.evaluate_traced(self.phi_a, &self.layout.bits(p));
        (Decision::from_bool(v), n)
    }

    pub fn record(&self, id: UpdateId) -> Option<&UpdateRecord> {
        self.active.get(&id).or_else(|| self.pending.get(&id))
    }

    pub fn active_records(&self) -> impl Iterator<Item = &UpdateRecord> {
        self.active.values()
    }

    pub fn pending_records(&self) -> impl Iterator<Item = &UpdateRecord> {
        self.pending.values()
    }

    fn emit(&mut self, event: EventKind, id: Option<UpdateId>, group: Option<GroupId>, user: Option<UserId>, outcome: &str) {
        let rec = EventRecord {
            ts: self.clock.now().millis(),
            event,
            id: id.map(|i| i.0),
            group: group.map(|g| g.0),
            user: user.map(|u| u.0),
            outcome: outcome.to_string(),
        };
        log::info!(
            "{:?} id={:?} group={:?} user={:?}: {}",
            rec.event,
            id.map(|i| i.to_string()),
            rec.group,
            rec.user,
            rec.outcome
        );
        if let Some(sink) = self.sink.as_mut() {
            sink.record(&rec);
        }
    }

    /// Compile a request, intersect it with what the group may override and
    /// queue it as pending unless nothing can be granted. Filtering state is
    /// not changed.
    pub fn classify_request(&mut self, req: UpdateRequest) -> Result<Classification, EngineError> {
        let j = req.group;
        let deny = self.deny_mask(j).ok_or(GroupError::OutOfRange { id: j.0, n: self.hierarchy.len() })?;
        if req.rules.iter().any(|r| !r.is_accept()) {
            return Err(EngineError::DenyInRequest);
        }
        let mut requested = self.store.bot();
        for rule in &req.rules {
            let c = compile_condition(&mut self.store, &self.layout, &rule.condition);
            requested = self.store.or(requested, c);
        }
        let granted = self.store.and_not(requested, deny);
        if granted.is_false() {
            self.emit(EventKind::Request, None, Some(j), Some(req.owner), "reject");
            return Ok(Classification::RejectAll);
        }
        let id = self.ids.next();
        let now = self.clock.now();
        let full = granted == requested;
        self.pending.insert(
            id,
            UpdateRecord {
                id,
                owner: req.owner,
                group: j,
                requested,
                granted,
                rules: req.rules,
                created_at: now,
                expiry: req.expiry,
                deadline: None,
                state: RecordState::Pending,
            },
        );
        self.pending_order.push_back((now, id));
        if full {
            self.emit(EventKind::Request, Some(id), Some(j), Some(req.owner), "allow-full");
            Ok(Classification::Full { id })
        } else {
            let table = tabulate_grant(&self.store, &self.layout, granted);
            self.emit(EventKind::Request, Some(id), Some(j), Some(req.owner), "allow-partial");
            Ok(Classification::Partial { id, table })
        }
    }

    fn remember_expired(&mut self, id: UpdateId) {
        if self.expired.insert(id) {
            self.expired_order.push_back(id);
            if self.expired_order.len() > EXPIRED_MEMORY {
                if let Some(old) = self.expired_order.pop_front() {
                    self.expired.remove(&old);
                }
            }
        }
    }

    fn window_elapsed(&self, enqueued: Timestamp, now: Timestamp) -> bool {
        now.saturating_since(enqueued) > self.config.confirm_window
    }

    /// Activate a pending update. Confirming an already active update is a
    /// no-op so duplicated datagrams are harmless.
    pub fn confirm(&mut self, id: UpdateId) -> Result<(), UpdateError> {
        let now = self.clock.now();
        if let Some(rec) = self.active.get(&id) {
            let (g, u) = (rec.group, rec.owner);
            self.emit(EventKind::Confirm, Some(id), Some(g), Some(u), "already-active");
            return Ok(());
        }
        let Some(mut rec) = self.pending.remove(&id) else {
            let err = if self.expired.contains(&id) { UpdateError::Expired(id) } else { UpdateError::UnknownId(id) };
            self.emit(EventKind::Confirm, Some(id), None, None, &err.to_string());
            return Err(err);
        };
        if self.window_elapsed(rec.created_at, now) {
            self.remember_expired(id);
            self.emit(EventKind::Confirm, Some(id), Some(rec.group), Some(rec.owner), "expired");
            return Err(UpdateError::Expired(id));
        }
        rec.state = RecordState::Active;
        rec.created_at = now;
        let deadline = now + rec.expiry;
        rec.deadline = Some(deadline);
        let j = rec.group;
        self.exceptions[j.index()] = self.store.or(self.exceptions[j.index()], rec.granted);
        self.by_deadline.insert((deadline, id));
        self.by_group[j.index()].insert(id);
        let owner = rec.owner;
        self.active.insert(id, rec);
        self.recompute();
        self.emit(EventKind::Confirm, Some(id), Some(j), Some(owner), "active");
        Ok(())
    }

    fn remove_active(&mut self, id: UpdateId) -> Option<UpdateRecord> {
        let rec = self.active.remove(&id)?;
        if let Some(d) = rec.deadline {
            self.by_deadline.remove(&(d, id));
        }
        self.by_group[rec.group.index()].remove(&id);
        Some(rec)
    }

    fn rebuild_exception(&mut self, j: GroupId) {
        let mut e = self.store.bot();
        for id in &self.by_group[j.index()] {
            let g = self.active[id].granted;
            e = self.store.or(e, g);
        }
        self.exceptions[j.index()] = e;
    }

    /// Remove an active update.
    pub fn delete(&mut self, id: UpdateId) -> Result<(), UpdateError> {
        let Some(rec) = self.remove_active(id) else {
            self.emit(EventKind::Delete, Some(id), None, None, "unknown id");
            return Err(UpdateError::UnknownId(id));
        };
        self.rebuild_exception(rec.group);
        self.recompute();
        self.emit(EventKind::Delete, Some(id), Some(rec.group), Some(rec.owner), "deleted");
        Ok(())
    }

    /// Move an active update's deadline to `now + expiry`.
    pub fn renew(&mut self, id: UpdateId, expiry: Duration) -> Result<(), UpdateError> {
        let now = self.clock.now();
        let Some(rec) = self.active.get_mut(&id) else {
            self.emit(EventKind::Renew, Some(id), None, None, "unknown id");
            return Err(UpdateError::UnknownId(id));
        };
        if let Some(old) = rec.deadline {
            self.by_deadline.remove(&(old, id));
        }
        let deadline = now + expiry;
        rec.deadline = Some(deadline);
        rec.expiry = expiry;
        let (g, u) = (rec.group, rec.owner);
        self.by_deadline.insert((deadline, id));
        self.emit(EventKind::Renew, Some(id), Some(g), Some(u), "renewed");
        Ok(())
    }

    /// Drop a pending update without activating it.
    pub fn discard_pending(&mut self, id: UpdateId) -> bool {
        self.pending.remove(&id).is_some()
    }

    /// Delete every active update whose deadline is `<= now` (one rebuild for
    /// the whole batch) and drop pending updates whose confirm window has
    /// passed. Returns the number of records removed.
    pub fn purge_expired(&mut self, now: Timestamp) -> usize {
        let due: Vec<UpdateId> = self.by_deadline.iter().take_while(|(d, _)| *d <= now).map(|&(_, id)| id).collect();
        let mut groups = BTreeSet::new();
        for id in &due {
            if let Some(rec) = self.remove_active(*id) {
                groups.insert(rec.group);
                self.emit(EventKind::Purge, Some(*id), Some(rec.group), Some(rec.owner), "expired");
            }
        }
        if !due.is_empty() {
            for j in groups {
                self.rebuild_exception(j);
            }
            self.recompute();
        }

        let mut dropped = 0;
        while let Some(&(enqueued, id)) = self.pending_order.front() {
            if !self.window_elapsed(enqueued, now) {
                break;
            }
            self.pending_order.pop_front();
            if let Some(rec) = self.pending.remove(&id) {
                self.remember_expired(id);
                self.emit(EventKind::Purge, Some(id), Some(rec.group), Some(rec.owner), "unconfirmed");
                dropped += 1;
            }
        }
        due.len() + dropped
    }

    /// [`Engine::purge_expired`] at the engine clock's current time.
    pub fn purge_due(&mut self) -> usize {
        let now = self.clock.now();
        self.purge_expired(now)
    }

    /// The earliest active deadline.
    pub fn next_deadline(&self) -> Option<Timestamp> {
        self.by_deadline.first().map(|&(d, _)| d)
    }

    fn compose(&mut self) -> BoolFn {
        let mut phi = self.phi_b;
        for i in 0..self.exceptions.len() {
            let term = self.store.and_not(self.exceptions[i], self.deny_masks[i]);
            phi = self.store.or(phi, term);
        }
        phi
    }

    fn roots(&self) -> Vec<BoolFn> {
        let mut roots = vec![self.phi_b, self.phi_a];
        roots.extend(&self.deny_masks);
        roots.extend(&self.exceptions);
        for rec in self.active.values().chain(self.pending.values()) {
            roots.push(rec.requested);
            roots.push(rec.granted);
        }
        roots
    }

    fn recompute(&mut self) {
        self.phi_a = self.compose();
        self.stats.recomputes += 1;
        self.publish();
        let collect = match self.config.gc {
            GcPolicy::EveryRecompute => true,
            GcPolicy::Growth { min_nodes } => {
                let live = self.store.live_nodes();
                live >= min_nodes && live >= 2 * self.live_after_gc
            }
            GcPolicy::Never => false,
        };
        if collect {
            let roots = self.roots();
            self.store.collect_garbage(&roots);
            self.live_after_gc = self.store.live_nodes();
            self.stats.collections += 1;
        }
    }

    fn publish(&mut self) {
        self.stats.publications += 1;
        let snap = LookupSnapshot::capture(&self.store, self.phi_a, self.layout, self.stats.publications);
        self.reader.publish(snap);
    }

    /// Rebuild every derived function from the records and compare handles
    /// with the maintained ones.
    pub fn verify(&mut self) -> Result<(), String> {
        for rec in self.active.values().chain(self.pending.values()) {
            let d = self.deny_masks[rec.group.index()];
            if !self.store.and(rec.granted, d).is_false() {
                return Err(format!("update {} grants packets its group may not override", rec.id));
            }
        }
        for j in self.hierarchy.groups().collect::<Vec<_>>() {
            let mut e = self.store.bot();
            for rec in self.active.values().filter(|r| r.group == j) {
                e = self.store.or(e, rec.granted);
            }
            if e != self.exceptions[j.index()] {
                return Err(format!("exception function of group {j} is stale"));
            }
        }
        let phi = self.compose();
        if phi != self.phi_a {
            return Err("accept function differs from its composition".into());
        }
        self.store.check_invariants(&self.roots())
    }

    /// Logical content for the reference scan. Exceptions are the requested
    /// rules of active updates, in id order, with the owning ids alongside.
    pub fn oracle_view(&self) -> (OracleConfig, Vec<Vec<UpdateId>>) {
        let mut cfg = OracleConfig::new(self.base.clone(), self.hierarchy.clone());
        let mut ids = vec![Vec::new(); self.hierarchy.len()];
        for (j, members) in self.by_group.iter().enumerate() {
            for id in members {
                for rule in &self.active[id].rules {
                    cfg.exceptions[j].push(rule.clone());
                    ids[j].push(*id);
                }
            }
        }
        (cfg, ids)
    }

    pub fn dump(&self) -> StateDump {
        let mut active: Vec<RecordSummary> = self
            .active
            .values()
            .map(|r| RecordSummary {
                id: r.id,
                owner: r.owner,
                group: r.group,
                deadline: r.deadline,
                rules: r.rules.iter().map(ToString::to_string).collect(),
                granted_nodes: self.store.node_count(r.granted),
            })
            .collect();
        active.sort_by_key(|r| (r.deadline, r.id));
        StateDump {
            rules: self.base.len(),
            groups: self
                .hierarchy
                .groups()
                .map(|j| GroupSummary {
                    group: j,
                    name: self.hierarchy.name(j).unwrap_or_default().to_string(),
                    deny_nodes: self.store.node_count(self.deny_masks[j.index()]),
                    exception_nodes: self.store.node_count(self.exceptions[j.index()]),
                })
                .collect(),
            phi_b_nodes: self.store.node_count(self.phi_b),
            phi_a_nodes: self.store.node_count(self.phi_a),
            store_nodes: self.store.live_nodes(),
            pending: self.pending.len(),
            active,
        }
    }

    pub fn to_dot(&self) -> String {
        let layout = self.layout;
        self.store.to_dot(self.phi_a, |v| layout.var_name(v))
    }
}

#[derive(Clone, Debug)]
pub struct RecordSummary {
    pub id: UpdateId,
    pub owner: UserId,
    pub group: GroupId,
    pub deadline: Option<Timestamp>,
    pub rules: Vec<String>,
    pub granted_nodes: usize,
}

#[derive(Clone, Debug)]
pub struct GroupSummary {
    pub group: GroupId,
    pub name: String,
    pub deny_nodes: usize,
    pub exception_nodes: usize,
}

#[derive(Clone, Debug)]
pub struct StateDump {
    pub rules: usize,
    pub groups: Vec<GroupSummary>,
    pub phi_b_nodes: usize,
    pub phi_a_nodes: usize,
    pub store_nodes: usize,
    pub pending: usize,
    pub active: Vec<RecordSummary>,
}

impl fmt::Display for StateDump {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "base rules: {}", self.rules)?;
        writeln!(f, "phi_b nodes: {}", self.phi_b_nodes)?;
        writeln!(f, "phi_a nodes: {}", self.phi_a_nodes)?;
        writeln!(f, "store nodes: {}", self.store_nodes)?;
        for g in &self.groups {
            writeln!(f, "group {} ({}): D nodes {}, E nodes {}", g.group, g.name, g.deny_nodes, g.exception_nodes)?;
        }
        writeln!(f, "pending: {}", self.pending)?;
        writeln!(f, "active: {}", self.active.len())?;
        for r in &self.active {
            let deadline = match r.deadline {
                Some(Timestamp(u64::MAX)) => "never".to_string(),
                Some(d) => d.to_string(),
                None => "-".to_string(),
            };
            writeln!(f, "  {} user {} group {} deadline {} ({} nodes)", r.id, r.owner, r.group, deadline, r.granted_nodes)?;
            for rule in &r.rules {
                writeln!(f, "    {rule}")?;
            }
        }
        Ok(())
    }
}
