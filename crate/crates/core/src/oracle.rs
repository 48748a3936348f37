//! Reference decision procedure by linear scan.
//!
//! Deliberately naive and independent of the diagram code: it re-implements
//! header matching from the rule fields and walks the lists rule by rule. The
//! engine is tested for agreement with it.

use std::collections::BTreeSet;

use crate::acl::{AddrPattern, BaseList, Condition, GroupHierarchy, GroupId, PacketKey, PortConstraint, Protocol, Rule};

/// Logical content of a filter: base list, groups and the requested accept
/// rules of every active exception, per group.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleConfig {
    pub base: BaseList,
    pub hierarchy: GroupHierarchy,
    pub exceptions: Vec<Vec<Rule>>,
}

impl OracleConfig {
    pub fn new(base: BaseList, hierarchy: GroupHierarchy) -> Self {
        let n = hierarchy.len();
        OracleConfig { base, hierarchy, exceptions: vec![Vec::new(); n] }
    }
}

fn addr_hit(pat: &AddrPattern, addr: u32) -> bool {
    for bit in 0..32 {
        let ignored = (pat.wildcard >> bit) & 1 == 1;
        if !ignored && ((pat.value >> bit) & 1) != ((addr >> bit) & 1) {
            return false;
        }
    }
    true
}

fn port_hit(pc: &PortConstraint, port: u16) -> bool {
    let port = port as u32;
    match *pc {
        PortConstraint::Any => true,
        PortConstraint::Eq(p) => port == p as u32,
        PortConstraint::Range(lo, hi) => (lo as u32..=hi as u32).contains(&port),
        PortConstraint::Ge(p) => port >= p as u32,
        PortConstraint::Lt(p) => port < p as u32,
    }
}

fn hit(c: &Condition, p: &PacketKey) -> bool {
    let proto = match c.protocol {
        Protocol::Any => true,
        Protocol::Number(n) => n == p.protocol,
    };
    proto
        && addr_hit(&c.src, p.src_addr)
        && addr_hit(&c.dst, p.dst_addr)
        && port_hit(&c.src_ports, p.src_port)
        && port_hit(&c.dst_ports, p.dst_port)
}

/// Index of the first base rule matching `p`.
pub fn first_match(base: &BaseList, p: &PacketKey) -> Option<usize> {
    base.rules.iter().position(|r| hit(&r.condition, p))
}

/// Plain first-match semantics, default reject.
pub fn oracle_base_accept(base: &BaseList, p: &PacketKey) -> bool {
    match first_match(base, p) {
        Some(i) => base.rules[i].is_accept(),
        None => false,
    }
}

/// Whether every deny rule matching `p` carries a label in `allowed`.
fn denies_overridable(base: &BaseList, p: &PacketKey, allowed: &BTreeSet<GroupId>) -> bool {
    base.rules.iter().all(|r| match r.deny_groups() {
        Some(labels) if hit(&r.condition, p) => labels.iter().any(|g| allowed.contains(g)),
        _ => true,
    })
}

/// The group that grants `p` and the index of the exception rule doing so.
pub fn granting_exception(cfg: &OracleConfig, p: &PacketKey) -> Option<(GroupId, usize)> {
    for (j, rules) in cfg.exceptions.iter().enumerate() {
        let j = GroupId(j as u16);
        let Some(idx) = rules.iter().position(|r| hit(&r.condition, p)) else {
            continue;
        };
        let allowed = cfg.hierarchy.supergroups(j).unwrap_or_default();
        if denies_overridable(&cfg.base, p, &allowed) {
            return Some((j, idx));
        }
    }
    None
}

/// Accepted by the base list, or by some exception list `j` such that every
/// deny rule matching the packet is labelled with `j` or one of its
/// supergroups.
pub fn oracle_accept(cfg: &OracleConfig, p: &PacketKey) -> bool {
    oracle_base_accept(&cfg.base, p) || granting_exception(cfg, p).is_some()
}

/// Why a packet got its decision.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Explanation {
    pub accepted: bool,
    /// First matching base rule, 0-based.
    pub base_rule: Option<usize>,
    /// Exception that granted the packet when the base list did not.
    pub exception: Option<(GroupId, usize)>,
    /// Deny rules matching the packet with their labels, 0-based.
    pub matching_denies: Vec<(usize, BTreeSet<GroupId>)>,
}

pub fn explain(cfg: &OracleConfig, p: &PacketKey) -> Explanation {
    let base_rule = first_match(&cfg.base, p);
    let base_accept = base_rule.map(|i| cfg.base.rules[i].is_accept()).unwrap_or(false);
    let exception = if base_accept { None } else { granting_exception(cfg, p) };
    let matching_denies = cfg
        .base
        .rules
        .iter()
        .enumerate()
        .filter_map(|(i, r)| match r.deny_groups() {
            Some(labels) if hit(&r.condition, p) => Some((i, labels.clone())),
            _ => None,
        })
        .collect();
    Explanation { accepted: base_accept || exception.is_some(), base_rule, exception, matching_denies }
}
