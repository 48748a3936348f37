//! Reduced ordered binary decision diagrams.
//!
//! A [`NodeStore`] owns every node. Nodes are hash-consed through a unique
//! table keyed by `(var, low, high)`, so two [`BoolFn`] handles from the same
//! store are equal exactly when they denote the same function. Variable
//! indices increase from the root towards the terminals.
//!
//! Memory is reclaimed by [`NodeStore::collect_garbage`], a mark-and-sweep
//! pass over caller-supplied roots. Freed slots are reused, so handles that
//! were not passed as roots must not be used afterwards.

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::atomic::{AtomicU32, Ordering};

use thiserror::Error;

/// Upper bound on the number of variables a store can order.
pub const MAX_VARS: u32 = 127;

const FALSE_INDEX: u32 = 0;
const TRUE_INDEX: u32 = 1;
const TERMINAL_VAR: u32 = u32::MAX;
const FREE_VAR: u32 = u32::MAX - 1;

static NEXT_STORE_ID: AtomicU32 = AtomicU32::new(1);

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BddError {
    #[error("variable index {index} out of range (store has {num_vars} variables)")]
    VarOutOfRange { index: u32, num_vars: u32 },
    #[error("store supports at most {MAX_VARS} variables, {0} requested")]
    TooManyVars(u32),
}

/// Handle to a canonical function inside one [`NodeStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BoolFn {
    store: u32,
    index: u32,
}

impl BoolFn {
    pub fn is_true(self) -> bool {
        self.index == TRUE_INDEX
    }

    pub fn is_false(self) -> bool {
        self.index == FALSE_INDEX
    }

    pub fn is_constant(self) -> bool {
        self.index <= TRUE_INDEX
    }

    /// Raw node index; stable for the lifetime of the node.
    pub fn index(self) -> u32 {
        self.index
    }
}

/// An assignment source for [`NodeStore::evaluate`].
pub trait Valuation {
    fn value(&self, var: u32) -> bool;
}

/// Bit `i` of the integer is the value of variable `i`.
impl Valuation for u128 {
    fn value(&self, var: u32) -> bool {
        (self >> var) & 1 == 1
    }
}

impl Valuation for [bool] {
    fn value(&self, var: u32) -> bool {
        self[var as usize]
    }
}

impl Valuation for Vec<bool> {
    fn value(&self, var: u32) -> bool {
        self[var as usize]
    }
}

/// Ternary partial assignment: variables with a `care` bit are fixed to the
/// matching bit of `value`; the rest are don't-care.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct Cube {
    pub care: u128,
    pub value: u128,
}

impl Cube {
    pub fn get(&self, var: u32) -> Option<bool> {
        if (self.care >> var) & 1 == 1 {
            Some((self.value >> var) & 1 == 1)
        } else {
            None
        }
    }

    pub fn set(&mut self, var: u32, v: bool) {
        self.care |= 1 << var;
        if v {
            self.value |= 1 << var;
        } else {
            self.value &= !(1 << var);
        }
    }

    pub fn contains(&self, assignment: u128) -> bool {
        (assignment ^ self.value) & self.care == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct Node {
    var: u32,
    low: u32,
    high: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Op {
    And,
    Or,
    Xor,
    Not,
}

/// Counters exposed for tests and diagnostics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StoreStats {
    pub cache_hits: u64,
    pub cache_misses: u64,
    pub collections: u64,
    pub reclaimed: u64,
}

pub struct NodeStore {
    id: u32,
    num_vars: u32,
    nodes: Vec<Node>,
    free: Vec<u32>,
    unique: HashMap<Node, u32>,
    op_cache: HashMap<(Op, u32, u32), u32>,
    ite_cache: HashMap<(u32, u32, u32), u32>,
    stats: StoreStats,
}

impl std::fmt::Debug for NodeStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NodeStore")
            .field("id", &self.id)
            .field("num_vars", &self.num_vars)
            .field("live_nodes", &self.live_nodes())
            .finish()
    }
}

impl NodeStore {
    pub fn new(num_vars: u32) -> Result<Self, BddError> {
        if num_vars > MAX_VARS {
            return Err(BddError::TooManyVars(num_vars));
        }
        let terminal = |v| Node { var: TERMINAL_VAR, low: v, high: v };
        Ok(NodeStore {
            id: NEXT_STORE_ID.fetch_add(1, Ordering::Relaxed),
            num_vars,
            nodes: vec![terminal(FALSE_INDEX), terminal(TRUE_INDEX)],
            free: Vec::new(),
            unique: HashMap::new(),
            op_cache: HashMap::new(),
            ite_cache: HashMap::new(),
            stats: StoreStats::default(),
        })
    }

    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    pub fn stats(&self) -> StoreStats {
        self.stats
    }

    /// Internal nodes currently allocated (including unreachable ones not
    /// yet collected).
    pub fn live_nodes(&self) -> usize {
        self.nodes.len() - 2 - self.free.len()
    }

    fn handle(&self, index: u32) -> BoolFn {
        BoolFn { store: self.id, index }
    }

    #[track_caller]
    fn idx(&self, f: BoolFn) -> u32 {
        assert_eq!(f.store, self.id, "BoolFn belongs to a different NodeStore");
        debug_assert!(self.nodes[f.index as usize].var != FREE_VAR, "use of a collected BoolFn");
        f.index
    }

    pub fn constant(&self, v: bool) -> BoolFn {
        self.handle(if v { TRUE_INDEX } else { FALSE_INDEX })
    }

    pub fn top(&self) -> BoolFn {
        self.constant(true)
    }

    pub fn bot(&self) -> BoolFn {
        self.constant(false)
    }

    /// The projection function of variable `i`.
    pub fn var(&mut self, i: u32) -> Result<BoolFn, BddError> {
        self.literal(i, true)
    }

    /// `var(i)` when `positive`, its negation otherwise.
    pub fn literal(&mut self, i: u32, positive: bool) -> Result<BoolFn, BddError> {
        if i >= self.num_vars {
            return Err(BddError::VarOutOfRange { index: i, num_vars: self.num_vars });
        }
        let (low, high) = if positive { (FALSE_INDEX, TRUE_INDEX) } else { (TRUE_INDEX, FALSE_INDEX) };
        let n = self.mk(i, low, high);
        Ok(self.handle(n))
    }

    /// Conjunction of the given literals; variables may appear in any order.
    pub fn cube(&mut self, literals: &[(u32, bool)]) -> Result<BoolFn, BddError> {
        let mut lits = literals.to_vec();
        lits.sort_unstable_by_key(|l| std::cmp::Reverse(l.0));
        let mut acc = TRUE_INDEX;
        let mut prev = None;
        for (var, positive) in lits {
            if var >= self.num_vars {
                return Err(BddError::VarOutOfRange { index: var, num_vars: self.num_vars });
            }
            if let Some((pv, pp)) = prev {
                if pv == var {
                    if pp != positive {
                        return Ok(self.bot());
                    }
                    continue;
                }
            }
            acc = if positive { self.mk(var, FALSE_INDEX, acc) } else { self.mk(var, acc, FALSE_INDEX) };
            prev = Some((var, positive));
        }
        Ok(self.handle(acc))
    }

    pub fn from_cube(&mut self, cube: &Cube) -> Result<BoolFn, BddError> {
        let lits: Vec<(u32, bool)> =
            (0..MAX_VARS).filter_map(|v| cube.get(v).map(|b| (v, b))).collect();
        self.cube(&lits)
    }

    /// Node constructor applying the reduction rule and the unique table.
    fn mk(&mut self, var: u32, low: u32, high: u32) -> u32 {
        if low == high {
            return low;
        }
        debug_assert!(var < self.level(low) && var < self.level(high));
        let node = Node { var, low, high };
        match self.unique.entry(node) {
            Entry::Occupied(e) => *e.get(),
            Entry::Vacant(e) => {
                let index = match self.free.pop() {
                    Some(i) => {
                        self.nodes[i as usize] = node;
                        i
                    }
                    None => {
                        self.nodes.push(node);
                        (self.nodes.len() - 1) as u32
                    }
                };
                *e.insert(index)
            }
        }
    }

    fn level(&self, index: u32) -> u32 {
        self.nodes[index as usize].var
    }

    fn cofactors(&self, index: u32, var: u32) -> (u32, u32) {
        let n = self.nodes[index as usize];
        if n.var == var {
            (n.low, n.high)
        } else {
            (index, index)
        }
    }

    pub fn not(&mut self, f: BoolFn) -> BoolFn {
        let f = self.idx(f);
        let r = self.not_rec(f);
        self.handle(r)
    }

    fn not_rec(&mut self, f: u32) -> u32 {
        match f {
            FALSE_INDEX => return TRUE_INDEX,
            TRUE_INDEX => return FALSE_INDEX,
            _ => {}
        }
        if let Some(&r) = self.op_cache.get(&(Op::Not, f, 0)) {
            self.stats.cache_hits += 1;
            return r;
        }
        self.stats.cache_misses += 1;
        let n = self.nodes[f as usize];
        let low = self.not_rec(n.low);
        let high = self.not_rec(n.high);
        let r = self.mk(n.var, low, high);
        self.op_cache.insert((Op::Not, f, 0), r);
        r
    }

    pub fn and(&mut self, f: BoolFn, g: BoolFn) -> BoolFn {
        self.binary(Op::And, f, g)
    }

    pub fn or(&mut self, f: BoolFn, g: BoolFn) -> BoolFn {
        self.binary(Op::Or, f, g)
    }

    pub fn xor(&mut self, f: BoolFn, g: BoolFn) -> BoolFn {
        self.binary(Op::Xor, f, g)
    }

    /// `f ∧ ¬g`
    pub fn and_not(&mut self, f: BoolFn, g: BoolFn) -> BoolFn {
        let ng = self.not(g);
        self.and(f, ng)
    }

    pub fn and_all<I: IntoIterator<Item = BoolFn>>(&mut self, fs: I) -> BoolFn {
        fs.into_iter().fold(self.top(), |acc, f| self.and(acc, f))
    }

    pub fn or_all<I: IntoIterator<Item = BoolFn>>(&mut self, fs: I) -> BoolFn {
        fs.into_iter().fold(self.bot(), |acc, f| self.or(acc, f))
    }

    fn binary(&mut self, op: Op, f: BoolFn, g: BoolFn) -> BoolFn {
        let (f, g) = (self.idx(f), self.idx(g));
        let r = self.apply(op, f, g);
        self.handle(r)
    }

    fn apply(&mut self, op: Op, f: u32, g: u32) -> u32 {
        match op {
            Op::And => {
                if f == FALSE_INDEX || g == FALSE_INDEX {
                    return FALSE_INDEX;
                }
                if f == TRUE_INDEX || f == g {
                    return g;
                }
                if g == TRUE_INDEX {
                    return f;
                }
            }
            Op::Or => {
                if f == TRUE_INDEX || g == TRUE_INDEX {
                    return TRUE_INDEX;
                }
                if f == FALSE_INDEX || f == g {
                    return g;
                }
                if g == FALSE_INDEX {
                    return f;
                }
            }
            Op::Xor => {
                if f == g {
                    return FALSE_INDEX;
                }
                if f == FALSE_INDEX {
                    return g;
                }
                if g == FALSE_INDEX {
                    return f;
                }
                if f == TRUE_INDEX {
                    return self.not_rec(g);
                }
                if g == TRUE_INDEX {
                    return self.not_rec(f);
                }
            }
            Op::Not => unreachable!("negation is unary"),
        }
        // all binary ops here are commutative
        let key = if f < g { (op, f, g) } else { (op, g, f) };
        if let Some(&r) = self.op_cache.get(&key) {
            self.stats.cache_hits += 1;
            return r;
        }
        self.stats.cache_misses += 1;
        let var = self.level(f).min(self.level(g));
        let (f0, f1) = self.cofactors(f, var);
        let (g0, g1) = self.cofactors(g, var);
        let low = self.apply(op, f0, g0);
        let high = self.apply(op, f1, g1);
        let r = self.mk(var, low, high);
        self.op_cache.insert(key, r);
        r
    }

    /// If-then-else: `(f ∧ g) ∨ (¬f ∧ h)`.
    pub fn ite(&mut self, f: BoolFn, g: BoolFn, h: BoolFn) -> BoolFn {
        let (f, g, h) = (self.idx(f), self.idx(g), self.idx(h));
        let r = self.ite_rec(f, g, h);
        self.handle(r)
    }

    fn ite_rec(&mut self, f: u32, g: u32, h: u32) -> u32 {
        if f == TRUE_INDEX {
            return g;
        }
        if f == FALSE_INDEX {
            return h;
        }
        if g == h {
            return g;
        }
        if g == TRUE_INDEX && h == FALSE_INDEX {
            return f;
        }
        if g == FALSE_INDEX && h == TRUE_INDEX {
            return self.not_rec(f);
        }
        if g == TRUE_INDEX {
            return self.apply(Op::Or, f, h);
        }
        if h == FALSE_INDEX {
            return self.apply(Op::And, f, g);
        }
        if let Some(&r) = self.ite_cache.get(&(f, g, h)) {
            self.stats.cache_hits += 1;
            return r;
        }
        self.stats.cache_misses += 1;
        let var = self.level(f).min(self.level(g)).min(self.level(h));
        let (f0, f1) = self.cofactors(f, var);
        let (g0, g1) = self.cofactors(g, var);
        let (h0, h1) = self.cofactors(h, var);
        let low = self.ite_rec(f0, g0, h0);
        let high = self.ite_rec(f1, g1, h1);
        let r = self.mk(var, low, high);
        self.ite_cache.insert((f, g, h), r);
        r
    }

    pub fn evaluate<V: Valuation + ?Sized>(&self, f: BoolFn, v: &V) -> bool {
        self.evaluate_traced(f, v).0
    }

    /// Evaluate and report how many internal nodes the descent visited.
    pub fn evaluate_traced<V: Valuation + ?Sized>(&self, f: BoolFn, v: &V) -> (bool, u32) {
        let mut i = self.idx(f);
        let mut visits = 0;
        loop {
            match i {
                FALSE_INDEX => return (false, visits),
                TRUE_INDEX => return (true, visits),
                _ => {
                    let n = self.nodes[i as usize];
                    visits += 1;
                    debug_assert!(visits <= self.num_vars);
                    i = if v.value(n.var) { n.high } else { n.low };
                }
            }
        }
    }

    /// Top variable of `f`, `None` for a constant.
    pub fn top_var(&self, f: BoolFn) -> Option<u32> {
        let n = self.nodes[self.idx(f) as usize];
        (n.var != TERMINAL_VAR).then_some(n.var)
    }

    /// `(var, low, high)` of an internal node.
    pub fn node(&self, f: BoolFn) -> Option<(u32, BoolFn, BoolFn)> {
        let n = self.nodes[self.idx(f) as usize];
        (n.var != TERMINAL_VAR).then(|| (n.var, self.handle(n.low), self.handle(n.high)))
    }

    /// Internal nodes reachable from `f`.
    pub fn node_count(&self, f: BoolFn) -> usize {
        self.node_count_many(&[f])
    }

    /// Internal nodes reachable from any of `roots`, shared nodes counted once.
    pub fn node_count_many(&self, roots: &[BoolFn]) -> usize {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack: Vec<u32> = roots.iter().map(|&f| self.idx(f)).collect();
        let mut count = 0;
        while let Some(i) = stack.pop() {
            if i <= TRUE_INDEX || std::mem::replace(&mut seen[i as usize], true) {
                continue;
            }
            count += 1;
            let n = self.nodes[i as usize];
            stack.push(n.low);
            stack.push(n.high);
        }
        count
    }

    /// Number of satisfying assignments over all `num_vars` variables.
    pub fn sat_count(&self, f: BoolFn) -> u128 {
        let f = self.idx(f);
        let mut memo = HashMap::new();
        let below = self.sat_count_rec(f, &mut memo);
        // scale for variables above the root
        let top = self.level(f).min(self.num_vars);
        below << top
    }

    /// Count over variables from `level(f)` to `num_vars`.
    fn sat_count_rec(&self, f: u32, memo: &mut HashMap<u32, u128>) -> u128 {
        match f {
            FALSE_INDEX => return 0,
            TRUE_INDEX => return 1,
            _ => {}
        }
        if let Some(&c) = memo.get(&f) {
            return c;
        }
        let n = self.nodes[f as usize];
        let gap = |child: u32| self.level(child).min(self.num_vars) - n.var - 1;
        let c = (self.sat_count_rec(n.low, memo) << gap(n.low)) + (self.sat_count_rec(n.high, memo) << gap(n.high));
        memo.insert(f, c);
        c
    }

    /// One satisfying partial assignment, if any.
    pub fn pick_cube(&self, f: BoolFn) -> Option<Cube> {
        let mut i = self.idx(f);
        let mut cube = Cube::default();
        loop {
            match i {
                FALSE_INDEX => return None,
                TRUE_INDEX => return Some(cube),
                _ => {
                    let n = self.nodes[i as usize];
                    if n.low != FALSE_INDEX {
                        cube.set(n.var, false);
                        i = n.low;
                    } else {
                        cube.set(n.var, true);
                        i = n.high;
                    }
                }
            }
        }
    }

    /// Every root-to-TRUE path as a cube. The cubes are pairwise disjoint and
    /// their union is exactly `f`.
    pub fn enumerate_cubes(&self, f: BoolFn) -> Vec<Cube> {
        let mut out = Vec::new();
        let mut stack = vec![(self.idx(f), Cube::default())];
        while let Some((i, cube)) = stack.pop() {
            match i {
                FALSE_INDEX => {}
                TRUE_INDEX => out.push(cube),
                _ => {
                    let n = self.nodes[i as usize];
                    let mut hi = cube;
                    hi.set(n.var, true);
                    stack.push((n.high, hi));
                    let mut lo = cube;
                    lo.set(n.var, false);
                    stack.push((n.low, lo));
                }
            }
        }
        out
    }

    /// Drop every memoized operation result.
    pub fn clear_caches(&mut self) {
        self.op_cache.clear();
        self.ite_cache.clear();
    }

    /// Reclaim every node not reachable from `roots`. Returns the number of
    /// nodes freed. Operation caches are cleared.
    pub fn collect_garbage(&mut self, roots: &[BoolFn]) -> usize {
        let mut marked = vec![false; self.nodes.len()];
        marked[FALSE_INDEX as usize] = true;
        marked[TRUE_INDEX as usize] = true;
        let mut stack: Vec<u32> = roots.iter().map(|&f| self.idx(f)).collect();
        while let Some(i) = stack.pop() {
            if std::mem::replace(&mut marked[i as usize], true) {
                continue;
            }
            let n = self.nodes[i as usize];
            stack.push(n.low);
            stack.push(n.high);
        }
        let mut freed = 0;
        for (i, node) in self.nodes.iter_mut().enumerate() {
            if marked[i] || node.var == FREE_VAR {
                continue;
            }
            self.unique.remove(node);
            node.var = FREE_VAR;
            self.free.push(i as u32);
            freed += 1;
        }
        self.clear_caches();
        self.stats.collections += 1;
        self.stats.reclaimed += freed as u64;
        freed
    }

    /// Copy the nodes reachable from `f` into a self-contained array: index 0
    /// is FALSE, 1 is TRUE, and the root is returned alongside.
    pub fn export(&self, f: BoolFn) -> (Vec<(u32, u32, u32)>, u32) {
        let root = self.idx(f);
        let mut remap: HashMap<u32, u32> = HashMap::from([(FALSE_INDEX, 0), (TRUE_INDEX, 1)]);
        let mut out = vec![(TERMINAL_VAR, 0, 0), (TERMINAL_VAR, 1, 1)];
        // post-order so children are placed first
        let mut stack = vec![(root, false)];
        while let Some((i, expanded)) = stack.pop() {
            if remap.contains_key(&i) {
                continue;
            }
            let n = self.nodes[i as usize];
            if expanded {
                let slot = out.len() as u32;
                out.push((n.var, remap[&n.low], remap[&n.high]));
                remap.insert(i, slot);
            } else {
                stack.push((i, true));
                stack.push((n.high, false));
                stack.push((n.low, false));
            }
        }
        (out, remap[&root])
    }

    /// Graphviz rendering of `f`. `name` labels each variable.
    pub fn to_dot(&self, f: BoolFn, name: impl Fn(u32) -> String) -> String {
        let root = self.idx(f);
        let mut out = String::from("digraph bdd {\n  node [shape=circle];\n");
        let _ = writeln!(out, "  n0 [label=\"0\", shape=box];\n  n1 [label=\"1\", shape=box];");
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![root];
        while let Some(i) = stack.pop() {
            if i <= TRUE_INDEX || std::mem::replace(&mut seen[i as usize], true) {
                continue;
            }
            let n = self.nodes[i as usize];
            let _ = writeln!(out, "  n{i} [label=\"{}\"];", name(n.var));
            let _ = writeln!(out, "  n{i} -> n{} [style=dashed];", n.low);
            let _ = writeln!(out, "  n{i} -> n{};", n.high);
            stack.push(n.low);
            stack.push(n.high);
        }
        if root <= TRUE_INDEX {
            let _ = writeln!(out, "  root -> n{root};");
        }
        out.push_str("}\n");
        out
    }

    /// Check structural invariants of every node reachable from `roots`:
    /// ordering, reduction and uniqueness.
    pub fn check_invariants(&self, roots: &[BoolFn]) -> Result<(), String> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack: Vec<u32> = roots.iter().map(|&f| self.idx(f)).collect();
        while let Some(i) = stack.pop() {
            if i <= TRUE_INDEX || std::mem::replace(&mut seen[i as usize], true) {
                continue;
            }
            let n = self.nodes[i as usize];
            if n.var == FREE_VAR {
                return Err(format!("node {i} reachable but freed"));
            }
            if n.low == n.high {
                return Err(format!("node {i} has identical children"));
            }
            if n.var >= self.level(n.low) || n.var >= self.level(n.high) {
                return Err(format!("node {i} violates the variable order"));
            }
            if self.unique.get(&n) != Some(&i) {
                return Err(format!("node {i} missing from the unique table"));
            }
            stack.push(n.low);
            stack.push(n.high);
        }
        Ok(())
    }
}
