//! Shared fixtures and random generators for integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::net::Ipv4Addr;
use std::sync::Arc;

use dynacl::acl::{
    AddrPattern, BaseList, Condition, GroupHierarchy, GroupId, PacketKey, PortConstraint, Protocol, Rule, PROTO_ICMP,
    PROTO_TCP, PROTO_UDP,
};
use dynacl::clock::ManualClock;
use dynacl::engine::{Engine, EngineConfig};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const CAMPUS_BASE: &str = "\
1: accept tcp 0.0.0.0 255.255.255.255   128.128.128.15 0.0.0.0  eq 88
2: deny tcp 0.0.0.0 255.255.255.255   128.128.128.15 0.0.0.0
3: accept tcp 0.0.0.0 255.255.255.255   128.128.128.0 0.0.0.255 eq 88
4: accept tcp 0.0.0.0 255.255.255.255   128.128.128.0 0.0.0.255 ge 32000
5: deny  tcp 0.0.0.0 255.255.255.255   128.128.128.0 0.0.0.255 range 0 87
6: deny 0 tcp 0.0.0.0 255.255.255.255   128.128.128.0 0.0.0.127 ge 89
7: deny  tcp 0.0.0.0 255.255.255.255   128.128.128.128 0.0.0.127 lt 16000
8: deny  1 tcp 0.0.0.0 255.255.255.255   128.128.128.128 0.0.0.127 ge 16000
9: deny 2 everything
";

pub const CAMPUS_GROUPS: &str = "\
group staff 0
group student 1
group all 2
contains 2 0 1
";

/// `(label, group, rule)` for every exception of the worked example.
pub const CAMPUS_EXCEPTIONS: [(&str, u16, &str); 8] = [
    ("0.0", 0, "accept tcp 0.0.0.0 255.255.255.255  128.128.128.1  0.0.0.0  eq 100"),
    ("0.1", 0, "accept tcp 0.0.0.0 255.255.255.255  128.128.128.1  0.0.0.0  range 0 90"),
    ("0.2", 0, "accept tcp 0.0.0.0 255.255.255.255  128.128.128.129  0.0.0.0  eq 16000"),
    ("1.0", 1, "accept tcp 0.0.0.0 255.255.255.255  128.128.128.2  0.0.0.0  eq 100"),
    ("1.1", 1, "accept tcp 0.0.0.0 255.255.255.255  128.128.128.129  0.0.0.0  eq 16000"),
    ("1.2", 1, "accept icmp 0.0.0.0 255.255.255.255  128.128.128.129  0.0.0.0"),
    ("2.0", 2, "accept tcp 0.0.0.0 255.255.255.255  128.128.128.130  0.0.0.0  eq 16000"),
    ("2.1", 2, "accept icmp 0.0.0.0 255.255.255.255  128.128.128.130 0.0.0.0"),
];

pub fn subnet(last: u8) -> Ipv4Addr {
    Ipv4Addr::new(128, 128, 128, last)
}

pub fn campus_engine(clock: &ManualClock, config: EngineConfig) -> Engine {
    Engine::load(CAMPUS_BASE, CAMPUS_GROUPS, config, Arc::new(clock.clone())).unwrap()
}

pub fn seeded_config(salt: u64) -> EngineConfig {
    EngineConfig { id_salt: Some(salt), ..EngineConfig::default() }
}

const NETS: [u32; 6] = [0x0A00_0000, 0x0A00_0080, 0x0A00_0100, 0x0A01_0000, 0xC0A8_0000, 0x8080_8000];
const PORTS: [u16; 18] = [0, 1, 22, 53, 80, 87, 88, 89, 90, 100, 1023, 1024, 8080, 16000, 31999, 32000, 65534, 65535];

/// Random access-list material biased towards overlapping rules.
pub struct Gen {
    pub rng: ChaCha8Rng,
}

impl Gen {
    pub fn new(seed: u64) -> Self {
        Gen { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn addr_pattern(&mut self) -> AddrPattern {
        let r = &mut self.rng;
        let (value, wildcard) = match r.gen_range(0..10) {
            0..=2 => (0, u32::MAX),
            3..=7 => {
                let len = *[8u32, 16, 24, 25, 28, 30, 31, 32].choose(r).unwrap();
                let mask = u32::MAX.checked_shl(32 - len).unwrap_or(0);
                let v = *NETS.choose(r).unwrap() | r.gen_range(0..256);
                (v & mask, !mask)
            }
            8 => (*NETS.choose(r).unwrap() | r.gen_range(0..256), 0),
            _ => (*NETS.choose(r).unwrap() | r.gen_range(0..256), r.gen_range(0..256)),
        };
        AddrPattern { value, wildcard }
    }

    pub fn port(&mut self) -> u16 {
        if self.rng.gen_bool(0.8) {
            *PORTS.choose(&mut self.rng).unwrap()
        } else {
            self.rng.gen()
        }
    }

    pub fn ports(&mut self) -> PortConstraint {
        match self.rng.gen_range(0..6) {
            0 | 1 => PortConstraint::Any,
            2 => PortConstraint::Eq(self.port()),
            3 => {
                let (a, b) = (self.port(), self.port());
                PortConstraint::Range(a.min(b), a.max(b))
            }
            4 => PortConstraint::Ge(self.port()),
            _ => PortConstraint::Lt(self.port()),
        }
    }

    pub fn protocol(&mut self) -> Protocol {
        match self.rng.gen_range(0..10) {
            0 | 1 => Protocol::Any,
            2..=5 => Protocol::Number(PROTO_TCP),
            6 | 7 => Protocol::Number(PROTO_UDP),
            8 => Protocol::Number(PROTO_ICMP),
            _ => Protocol::Number(self.rng.gen()),
        }
    }

    pub fn condition(&mut self) -> Condition {
        let protocol = self.protocol();
        let src = self.addr_pattern();
        let dst = self.addr_pattern();
        let (src_ports, dst_ports) = if protocol.has_ports() {
            (if self.rng.gen_bool(0.3) { self.ports() } else { PortConstraint::Any }, self.ports())
        } else {
            (PortConstraint::Any, PortConstraint::Any)
        };
        Condition { protocol, src, dst, src_ports, dst_ports }
    }

    pub fn labels(&mut self, groups: usize) -> BTreeSet<u16> {
        if self.rng.gen_bool(0.25) {
            return BTreeSet::new();
        }
        (0..groups as u16).filter(|_| self.rng.gen_bool(0.4)).collect()
    }

    /// A list of `len` rules; deny labels drawn from `groups` groups
    /// (no labels when `groups == 0`).
    pub fn base(&mut self, len: usize, groups: usize) -> BaseList {
        let mut rules = Vec::with_capacity(len);
        for i in 0..len {
            let last = i + 1 == len;
            let cond = if last && self.rng.gen_bool(0.5) { Condition::EVERYTHING } else { self.condition() };
            if !last && self.rng.gen_bool(0.4) {
                rules.push(Rule::accept(cond));
            } else {
                let labels = if groups == 0 { BTreeSet::new() } else { self.labels(groups) };
                rules.push(Rule::deny(labels, cond));
            }
        }
        BaseList::new(rules)
    }

    /// Containment edges only run from later to earlier groups of a random
    /// permutation, so the result is acyclic.
    pub fn hierarchy(&mut self, groups: usize) -> GroupHierarchy {
        let mut h = GroupHierarchy::flat(groups);
        let mut perm: Vec<u16> = (0..groups as u16).collect();
        perm.shuffle(&mut self.rng);
        for a in 0..groups {
            for b in a + 1..groups {
                if self.rng.gen_bool(0.35) {
                    h.add_containment(GroupId(perm[b]), GroupId(perm[a])).unwrap();
                }
            }
        }
        h
    }

    /// Accept conditions that often overlap the base list's deny rules.
    pub fn exception(&mut self, base: &BaseList) -> Condition {
        let denies: Vec<&Condition> = base.rules.iter().filter(|r| !r.is_accept()).map(|r| &r.condition).collect();
        if denies.is_empty() || self.rng.gen_bool(0.3) {
            return self.condition();
        }
        let mut c = **denies.choose(&mut self.rng).unwrap();
        if self.rng.gen_bool(0.5) {
            c.dst = self.addr_pattern();
        }
        if c.protocol.has_ports() && self.rng.gen_bool(0.5) {
            c.dst_ports = self.ports();
        }
        if c.is_everything() || self.rng.gen_bool(0.2) {
            c.protocol = self.protocol();
            if !c.protocol.has_ports() {
                c.src_ports = PortConstraint::Any;
                c.dst_ports = PortConstraint::Any;
            } else if c.dst_ports == PortConstraint::Any {
                c.dst_ports = self.ports();
            }
        }
        c
    }

    fn in_pattern(&mut self, p: &AddrPattern) -> u32 {
        (p.value & !p.wildcard) | (self.rng.gen::<u32>() & p.wildcard)
    }

    fn in_ports(&mut self, pc: &PortConstraint) -> u16 {
        match pc.interval() {
            Some((lo, hi)) if self.rng.gen_bool(0.9) => self.rng.gen_range(lo..=hi),
            _ => self.port(),
        }
    }

    /// A packet matched by `c` (ports possibly off by a little).
    pub fn packet_in(&mut self, c: &Condition) -> PacketKey {
        let protocol = match c.protocol {
            Protocol::Number(n) => n,
            Protocol::Any => *[PROTO_TCP, PROTO_UDP, PROTO_ICMP, 47].choose(&mut self.rng).unwrap(),
        };
        PacketKey {
            protocol,
            src_addr: self.in_pattern(&c.src),
            dst_addr: self.in_pattern(&c.dst),
            src_port: self.in_ports(&c.src_ports),
            dst_port: self.in_ports(&c.dst_ports),
        }
    }

    pub fn uniform_packet(&mut self) -> PacketKey {
        let protocol = if self.rng.gen_bool(0.7) {
            *[PROTO_TCP, PROTO_UDP, PROTO_ICMP].choose(&mut self.rng).unwrap()
        } else {
            self.rng.gen()
        };
        let dst_addr = if self.rng.gen_bool(0.5) { *NETS.choose(&mut self.rng).unwrap() | self.rng.gen_range(0..256) } else { self.rng.gen() };
        PacketKey {
            protocol,
            src_addr: self.rng.gen(),
            dst_addr,
            src_port: self.port(),
            dst_port: self.port(),
        }
    }

    /// Mostly packets inside some condition, some uniform.
    pub fn packet(&mut self, conds: &[Condition]) -> PacketKey {
        if conds.is_empty() || self.rng.gen_bool(0.25) {
            self.uniform_packet()
        } else {
            let c = *conds.choose(&mut self.rng).unwrap();
            self.packet_in(&c)
        }
    }

    /// Packets at `lo - 1`, `lo`, `hi`, `hi + 1` of every port interval, on
    /// both port fields.
    pub fn boundary_packets(&mut self, conds: &[Condition]) -> Vec<PacketKey> {
        let mut out = Vec::new();
        for c in conds {
            for (is_dst, pc) in [(true, c.dst_ports), (false, c.src_ports)] {
                let Some((lo, hi)) = pc.interval() else { continue };
                let mut edges = vec![lo, hi];
                edges.extend(lo.checked_sub(1));
                edges.extend(hi.checked_add(1));
                for port in edges {
                    let mut p = self.packet_in(c);
                    if is_dst {
                        p.dst_port = port;
                    } else {
                        p.src_port = port;
                    }
                    out.push(p);
                }
            }
        }
        out
    }
}

/// Every condition mentioned by a list.
pub fn conditions(rules: &[Rule]) -> Vec<Condition> {
    rules.iter().map(|r| r.condition).collect()
}
