//! Translation between access-list rules and boolean functions over the
//! packet-header bits, and back from functions to rule-like tables.

use std::fmt;
use std::net::Ipv4Addr;
use std::str::FromStr;

use thiserror::Error;

use crate::acl::{
    protocol_from_name, protocol_name, AddrPattern, BaseList, Condition, GroupError, GroupHierarchy, GroupId,
    PacketKey, PortConstraint, Protocol, Rule,
};
use crate::bdd::{BoolFn, Cube, NodeStore};

/// Total header bits a decision depends on.
pub const HEADER_BITS: u32 = 104;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum HeaderField {
    Protocol,
    SrcAddr,
    DstAddr,
    SrcPort,
    DstPort,
}

impl HeaderField {
    pub const ALL: [HeaderField; 5] =
        [HeaderField::Protocol, HeaderField::SrcAddr, HeaderField::DstAddr, HeaderField::SrcPort, HeaderField::DstPort];

    pub fn width(self) -> u32 {
        match self {
            HeaderField::Protocol => 8,
            HeaderField::SrcAddr | HeaderField::DstAddr => 32,
            HeaderField::SrcPort | HeaderField::DstPort => 16,
        }
    }

    fn slot(self) -> usize {
        self as usize
    }

    fn read(self, p: &PacketKey) -> u32 {
        match self {
            HeaderField::Protocol => p.protocol as u32,
            HeaderField::SrcAddr => p.src_addr,
            HeaderField::DstAddr => p.dst_addr,
            HeaderField::SrcPort => p.src_port as u32,
            HeaderField::DstPort => p.dst_port as u32,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("field order must list each header field exactly once")]
pub struct LayoutError;

/// Assignment of header bits to diagram variables. Each field occupies a
/// contiguous block of variables, most-significant bit first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BitLayout {
    order: [HeaderField; 5],
    offsets: [u32; 5],
}

impl Default for BitLayout {
    /// protocol, dst_addr, dst_port, src_addr, src_port
    fn default() -> Self {
        BitLayout::new([
            HeaderField::Protocol,
            HeaderField::DstAddr,
            HeaderField::DstPort,
            HeaderField::SrcAddr,
            HeaderField::SrcPort,
        ])
        .expect("default order is a permutation")
    }
}

impl BitLayout {
    pub fn new(order: [HeaderField; 5]) -> Result<Self, LayoutError> {
        let mut offsets = [u32::MAX; 5];
        let mut next = 0;
        for field in order {
            if offsets[field.slot()] != u32::MAX {
                return Err(LayoutError);
            }
            offsets[field.slot()] = next;
            next += field.width();
        }
        Ok(BitLayout { order, offsets })
    }

    pub fn order(&self) -> [HeaderField; 5] {
        self.order
    }

    pub fn offset(&self, field: HeaderField) -> u32 {
        self.offsets[field.slot()]
    }

    /// Variable holding bit `bit` (0 = least significant) of `field`.
    pub fn var(&self, field: HeaderField, bit: u32) -> u32 {
        debug_assert!(bit < field.width());
        self.offset(field) + field.width() - 1 - bit
    }

    /// Field and bit significance of a variable.
    pub fn locate(&self, var: u32) -> Option<(HeaderField, u32)> {
        HeaderField::ALL.into_iter().find_map(|f| {
            let off = self.offset(f);
            (off <= var && var < off + f.width()).then(|| (f, f.width() - 1 - (var - off)))
        })
    }

    /// The packet as a variable assignment (bit `v` = variable `v`).
    pub fn bits(&self, p: &PacketKey) -> u128 {
        let mut out = 0u128;
        for field in HeaderField::ALL {
            let value = field.read(p);
            let w = field.width();
            for bit in 0..w {
                if (value >> bit) & 1 == 1 {
                    out |= 1u128 << self.var(field, bit);
                }
            }
        }
        out
    }

    /// `(value, care)` of one field inside a cube.
    pub fn field_of_cube(&self, cube: &Cube, field: HeaderField) -> (u32, u32) {
        let (mut value, mut care) = (0u32, 0u32);
        for bit in 0..field.width() {
            if let Some(b) = cube.get(self.var(field, bit)) {
                care |= 1 << bit;
                if b {
                    value |= 1 << bit;
                }
            }
        }
        (value, care)
    }

    pub fn var_name(&self, var: u32) -> String {
        match self.locate(var) {
            Some((f, bit)) => {
                let tag = match f {
                    HeaderField::Protocol => "proto",
                    HeaderField::SrcAddr => "src",
                    HeaderField::DstAddr => "dst",
                    HeaderField::SrcPort => "sport",
                    HeaderField::DstPort => "dport",
                };
                format!("{tag}[{bit}]")
            }
            None => format!("v{var}"),
        }
    }
}

/// Bits of `field` selected by `care` must equal the same bits of `value`.
pub fn compile_field_pattern(s: &mut NodeStore, l: &BitLayout, field: HeaderField, value: u32, care: u32) -> BoolFn {
    let lits: Vec<(u32, bool)> = (0..field.width())
        .filter(|b| (care >> b) & 1 == 1)
        .map(|b| (l.var(field, b), (value >> b) & 1 == 1))
        .collect();
    s.cube(&lits).expect("layout variables fit the store")
}

/// `field >= bound`, built from the least significant bit upward so each
/// step adds one node above the previous result.
fn field_ge(s: &mut NodeStore, l: &BitLayout, field: HeaderField, bound: u32) -> BoolFn {
    let mut acc = s.top();
    for bit in 0..field.width() {
        let x = s.var(l.var(field, bit)).expect("layout variables fit the store");
        acc = if (bound >> bit) & 1 == 1 { s.and(x, acc) } else { s.or(x, acc) };
    }
    acc
}

/// `field <= bound`
fn field_le(s: &mut NodeStore, l: &BitLayout, field: HeaderField, bound: u32) -> BoolFn {
    let mut acc = s.top();
    for bit in 0..field.width() {
        let nx = s.literal(l.var(field, bit), false).expect("layout variables fit the store");
        acc = if (bound >> bit) & 1 == 1 { s.or(nx, acc) } else { s.and(nx, acc) };
    }
    acc
}

/// Inclusive interval predicate over a field.
pub fn compile_interval(s: &mut NodeStore, l: &BitLayout, field: HeaderField, lo: u32, hi: u32) -> BoolFn {
    let max = if field.width() == 32 { u32::MAX } else { (1u32 << field.width()) - 1 };
    if lo > hi {
        return s.bot();
    }
    let ge = if lo == 0 { s.top() } else { field_ge(s, l, field, lo) };
    let le = if hi >= max { s.top() } else { field_le(s, l, field, hi) };
    s.and(ge, le)
}

fn compile_ports(s: &mut NodeStore, l: &BitLayout, field: HeaderField, pc: PortConstraint) -> BoolFn {
    match pc {
        PortConstraint::Any => s.top(),
        PortConstraint::Eq(p) => compile_field_pattern(s, l, field, p as u32, 0xffff),
        other => match other.interval() {
            Some((lo, hi)) => compile_interval(s, l, field, lo as u32, hi as u32),
            None => s.bot(),
        },
    }
}

fn compile_addr(s: &mut NodeStore, l: &BitLayout, field: HeaderField, a: AddrPattern) -> BoolFn {
    compile_field_pattern(s, l, field, a.value, !a.wildcard)
}

/// The set of packets matched by `c`.
pub fn compile_condition(s: &mut NodeStore, l: &BitLayout, c: &Condition) -> BoolFn {
    let proto = match c.protocol {
        Protocol::Any => s.top(),
        Protocol::Number(n) => compile_field_pattern(s, l, HeaderField::Protocol, n as u32, 0xff),
    };
    let parts = [
        proto,
        compile_addr(s, l, HeaderField::SrcAddr, c.src),
        compile_addr(s, l, HeaderField::DstAddr, c.dst),
        compile_ports(s, l, HeaderField::SrcPort, c.src_ports),
        compile_ports(s, l, HeaderField::DstPort, c.dst_ports),
    ];
    s.and_all(parts)
}

/// First-match list semantics with default reject:
/// `ite(c1, a1, ite(c2, a2, ... FALSE))`.
pub fn compile_list(s: &mut NodeStore, l: &BitLayout, rules: &[Rule]) -> BoolFn {
    let mut acc = s.bot();
    for rule in rules.iter().rev() {
        let cond = compile_condition(s, l, &rule.condition);
        let action = s.constant(rule.is_accept());
        acc = s.ite(cond, action, acc);
    }
    acc
}

/// Disjunction of the base-list deny conditions that group `j` may not
/// override: those whose labels share nothing with `j`'s supergroups.
/// Mandatory denies (no labels) are always included. Rule order is
/// irrelevant.
pub fn compile_deny_mask(
    s: &mut NodeStore,
    l: &BitLayout,
    base: &BaseList,
    j: GroupId,
    h: &GroupHierarchy,
) -> Result<BoolFn, GroupError> {
    let allowed = h.supergroups(j)?;
    let mut acc = s.bot();
    for rule in &base.rules {
        if let Some(labels) = rule.deny_groups() {
            if labels.is_disjoint(&allowed) {
                let cond = compile_condition(s, l, &rule.condition);
                acc = s.or(acc, cond);
            }
        }
    }
    Ok(acc)
}

// ---------------------------------------------------------------------------
// Grant tables

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProtoSet {
    Any,
    Exact(u8),
    /// Bits under `care` fixed to `value`.
    Ternary { value: u8, care: u8 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PortSet {
    Any,
    /// Inclusive interval.
    Range(u16, u16),
    Ternary { value: u16, care: u16 },
}

/// One line of a grant table. Every field is an exact set, so a table is a
/// lossless description of the function it was rendered from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GrantRow {
    pub protocol: ProtoSet,
    pub src: (u32, u32),
    pub dst: (u32, u32),
    pub src_ports: PortSet,
    pub dst_ports: PortSet,
}

impl GrantRow {
    pub fn src_pattern(&self) -> AddrPattern {
        AddrPattern { value: self.src.0, wildcard: self.src.1 }
    }

    pub fn dst_pattern(&self) -> AddrPattern {
        AddrPattern { value: self.dst.0, wildcard: self.dst.1 }
    }

    fn from_cube(l: &BitLayout, cube: &Cube) -> Self {
        let (pv, pc) = l.field_of_cube(cube, HeaderField::Protocol);
        let protocol = match pc {
            0 => ProtoSet::Any,
            0xff => ProtoSet::Exact(pv as u8),
            _ => ProtoSet::Ternary { value: pv as u8, care: pc as u8 },
        };
        let addr = |field| {
            let (v, c) = l.field_of_cube(cube, field);
            (v & c, !c)
        };
        let ports = |field| {
            let (v, c) = l.field_of_cube(cube, field);
            let (v, c) = (v as u16, c as u16);
            let free = !c;
            if c == 0 {
                PortSet::Any
            } else if free & free.wrapping_add(1) == 0 {
                // don't-care bits form a low suffix: a contiguous interval
                PortSet::Range(v & c, v | free)
            } else {
                PortSet::Ternary { value: v & c, care: c }
            }
        };
        GrantRow {
            protocol,
            src: addr(HeaderField::SrcAddr),
            dst: addr(HeaderField::DstAddr),
            src_ports: ports(HeaderField::SrcPort),
            dst_ports: ports(HeaderField::DstPort),
        }
    }

    pub fn matches(&self, p: &PacketKey) -> bool {
        let proto_ok = match self.protocol {
            ProtoSet::Any => true,
            ProtoSet::Exact(n) => p.protocol == n,
            ProtoSet::Ternary { value, care } => (p.protocol ^ value) & care == 0,
        };
        let port_ok = |set: PortSet, port: u16| match set {
            PortSet::Any => true,
            PortSet::Range(lo, hi) => lo <= port && port <= hi,
            PortSet::Ternary { value, care } => (port ^ value) & care == 0,
        };
        proto_ok
            && self.src_pattern().matches(p.src_addr)
            && self.dst_pattern().matches(p.dst_addr)
            && port_ok(self.src_ports, p.src_port)
            && port_ok(self.dst_ports, p.dst_port)
    }
}

fn fmt_ternary(f: &mut fmt::Formatter<'_>, width: u32, value: u32, care: u32) -> fmt::Result {
    for bit in (0..width).rev() {
        let c = if (care >> bit) & 1 == 0 {
            'x'
        } else if (value >> bit) & 1 == 1 {
            '1'
        } else {
            '0'
        };
        write!(f, "{c}")?;
    }
    Ok(())
}

impl fmt::Display for PortSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            PortSet::Any => f.write_str("*"),
            PortSet::Range(lo, hi) if lo == hi => write!(f, "{lo}"),
            PortSet::Range(lo, hi) => write!(f, "{lo}-{hi}"),
            PortSet::Ternary { value, care } => fmt_ternary(f, 16, value as u32, care as u32),
        }
    }
}

impl fmt::Display for ProtoSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ProtoSet::Any => f.write_str("*"),
            ProtoSet::Exact(n) => f.write_str(&protocol_name(n)),
            ProtoSet::Ternary { value, care } => fmt_ternary(f, 8, value as u32, care as u32),
        }
    }
}

/// `proto tcp src 0.0.0.0/255.255.255.255 dst 128.128.128.1/0.0.0.0 sport * dport 88-90`
impl fmt::Display for GrantRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "proto {} src {}/{} dst {}/{} sport {} dport {}",
            self.protocol,
            Ipv4Addr::from(self.src.0),
            Ipv4Addr::from(self.src.1),
            Ipv4Addr::from(self.dst.0),
            Ipv4Addr::from(self.dst.1),
            self.src_ports,
            self.dst_ports
        )
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("malformed grant row: {0}")]
pub struct RowParseError(pub String);

fn parse_ternary(s: &str, width: usize) -> Option<(u32, u32)> {
    if s.len() != width {
        return None;
    }
    let (mut value, mut care) = (0u32, 0u32);
    for ch in s.chars() {
        value <<= 1;
        care <<= 1;
        match ch {
            '0' => care |= 1,
            '1' => {
                care |= 1;
                value |= 1;
            }
            'x' => {}
            _ => return None,
        }
    }
    Some((value, care))
}

fn parse_port_set(s: &str) -> Option<PortSet> {
    if s == "*" {
        return Some(PortSet::Any);
    }
    if let Some((v, c)) = parse_ternary(s, 16) {
        return Some(PortSet::Ternary { value: v as u16, care: c as u16 });
    }
    match s.split_once('-') {
        Some((a, b)) => {
            let (lo, hi) = (a.parse().ok()?, b.parse().ok()?);
            (lo <= hi).then_some(PortSet::Range(lo, hi))
        }
        None => s.parse().ok().map(|p| PortSet::Range(p, p)),
    }
}

fn parse_addr_pair(s: &str) -> Option<(u32, u32)> {
    let (a, w) = s.split_once('/')?;
    Some((u32::from(a.parse::<Ipv4Addr>().ok()?), u32::from(w.parse::<Ipv4Addr>().ok()?)))
}

impl FromStr for GrantRow {
    type Err = RowParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || RowParseError(s.to_string());
        let toks: Vec<&str> = s.split_whitespace().collect();
        if toks.len() != 10
            || toks[0] != "proto"
            || toks[2] != "src"
            || toks[4] != "dst"
            || toks[6] != "sport"
            || toks[8] != "dport"
        {
            return Err(bad());
        }
        let protocol = if toks[1] == "*" {
            ProtoSet::Any
        } else if let Some((v, c)) = parse_ternary(toks[1], 8) {
            ProtoSet::Ternary { value: v as u8, care: c as u8 }
        } else {
            match protocol_from_name(toks[1]).ok_or_else(bad)? {
                Protocol::Any => ProtoSet::Any,
                Protocol::Number(n) => ProtoSet::Exact(n),
            }
        };
        Ok(GrantRow {
            protocol,
            src: parse_addr_pair(toks[3]).ok_or_else(bad)?,
            dst: parse_addr_pair(toks[5]).ok_or_else(bad)?,
            src_ports: parse_port_set(toks[7]).ok_or_else(bad)?,
            dst_ports: parse_port_set(toks[9]).ok_or_else(bad)?,
        })
    }
}

/// Human- and machine-readable description of a function as rows whose
/// union is exactly that function.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GrantTable {
    pub rows: Vec<GrantRow>,
}

impl GrantTable {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn matches(&self, p: &PacketKey) -> bool {
        self.rows.iter().any(|r| r.matches(p))
    }

    pub fn to_lines(&self) -> Vec<String> {
        self.rows.iter().map(ToString::to_string).collect()
    }

    pub fn from_lines<S: AsRef<str>>(lines: &[S]) -> Result<Self, RowParseError> {
        let rows = lines.iter().map(|l| l.as_ref().parse()).collect::<Result<_, _>>()?;
        Ok(GrantTable { rows })
    }
}

impl fmt::Display for GrantTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in &self.rows {
            writeln!(f, "{row}")?;
        }
        Ok(())
    }
}

pub fn compile_port_set(s: &mut NodeStore, l: &BitLayout, field: HeaderField, set: PortSet) -> BoolFn {
    match set {
        PortSet::Any => s.top(),
        PortSet::Range(lo, hi) => compile_interval(s, l, field, lo as u32, hi as u32),
        PortSet::Ternary { value, care } => compile_field_pattern(s, l, field, value as u32, care as u32),
    }
}

pub fn compile_grant_row(s: &mut NodeStore, l: &BitLayout, row: &GrantRow) -> BoolFn {
    let proto = match row.protocol {
        ProtoSet::Any => s.top(),
        ProtoSet::Exact(n) => compile_field_pattern(s, l, HeaderField::Protocol, n as u32, 0xff),
        ProtoSet::Ternary { value, care } => {
            compile_field_pattern(s, l, HeaderField::Protocol, value as u32, care as u32)
        }
    };
    let parts = [
        proto,
        compile_addr(s, l, HeaderField::SrcAddr, row.src_pattern()),
        compile_addr(s, l, HeaderField::DstAddr, row.dst_pattern()),
        compile_port_set(s, l, HeaderField::SrcPort, row.src_ports),
        compile_port_set(s, l, HeaderField::DstPort, row.dst_ports),
    ];
    s.and_all(parts)
}

pub fn compile_grant_table(s: &mut NodeStore, l: &BitLayout, table: &GrantTable) -> BoolFn {
    let mut acc = s.bot();
    for row in &table.rows {
        let f = compile_grant_row(s, l, row);
        acc = s.or(acc, f);
    }
    acc
}

/// Merge rows that differ only in one port field when their intervals are
/// adjacent.
fn merge_ranges(rows: Vec<GrantRow>, dst: bool) -> Vec<GrantRow> {
    let key = |r: &GrantRow| {
        let mut k = *r;
        if dst {
            k.dst_ports = PortSet::Any;
        } else {
            k.src_ports = PortSet::Any;
        }
        k
    };
    let ports = |r: &GrantRow| if dst { r.dst_ports } else { r.src_ports };
    let mut rows = rows;
    rows.sort_by_key(|r| (key(r), ports(r)));
    let mut out: Vec<GrantRow> = Vec::with_capacity(rows.len());
    for row in rows {
        if let Some(last) = out.last_mut() {
            if key(last) == key(&row) {
                if let (PortSet::Range(a, b), PortSet::Range(c, d)) = (ports(last), ports(&row)) {
                    if b != u16::MAX && b + 1 == c {
                        let merged = PortSet::Range(a, d);
                        if dst {
                            last.dst_ports = merged;
                        } else {
                            last.src_ports = merged;
                        }
                        continue;
                    }
                }
            }
        }
        out.push(row);
    }
    out
}

/// Render `f` as a grant table: one row per diagram path to TRUE, with
/// adjacent port intervals merged.
pub fn tabulate_grant(s: &NodeStore, l: &BitLayout, f: BoolFn) -> GrantTable {
    let rows: Vec<GrantRow> = s.enumerate_cubes(f).iter().map(|c| GrantRow::from_cube(l, c)).collect();
    let rows = merge_ranges(rows, true);
    let rows = merge_ranges(rows, false);
    GrantTable { rows }
}
