//! Access-list domain types and the textual rule grammar.
//!
//! One rule per line:
//!
//! ```text
//! accept tcp 0.0.0.0 255.255.255.255 128.128.128.15 0.0.0.0 eq 88
//! deny 0 1 tcp 0.0.0.0 255.255.255.255 10.0.0.0 0.255.255.255
//! deny 2 everything
//! ```
//!
//! A `deny` may be followed by group ids naming the groups allowed to
//! override it; a `deny` without ids is mandatory. Addresses are given as a
//! value and a Cisco-style wildcard (a 1 bit is ignored when matching). An
//! optional `sport <constraint>` may follow the source pattern; the
//! destination-port constraint comes last. A leading `N:` reference label is
//! accepted and ignored so listings can be pasted with their line numbers.

use std::collections::BTreeSet;
use std::fmt;
use std::net::Ipv4Addr;
use std::str::FromStr;

use thiserror::Error;

pub const PROTO_ICMP: u8 = 1;
pub const PROTO_TCP: u8 = 6;
pub const PROTO_UDP: u8 = 17;

/// Identifier of a user group, `0..n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroupId(pub u16);

impl GroupId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for GroupId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The header fields a filtering decision depends on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PacketKey {
    pub protocol: u8,
    pub src_addr: u32,
    pub dst_addr: u32,
    pub src_port: u16,
    pub dst_port: u16,
}

impl PacketKey {
    pub fn new(protocol: u8, src: Ipv4Addr, src_port: u16, dst: Ipv4Addr, dst_port: u16) -> Self {
        PacketKey {
            protocol,
            src_addr: u32::from(src),
            dst_addr: u32::from(dst),
            src_port,
            dst_port,
        }
    }

    pub fn tcp_to(dst: Ipv4Addr, dst_port: u16) -> Self {
        PacketKey::new(PROTO_TCP, Ipv4Addr::UNSPECIFIED, 0, dst, dst_port)
    }
}

impl fmt::Display for PacketKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}:{} -> {}:{}",
            protocol_name(self.protocol),
            Ipv4Addr::from(self.src_addr),
            self.src_port,
            Ipv4Addr::from(self.dst_addr),
            self.dst_port
        )
    }
}

/// Address value plus wildcard mask.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct AddrPattern {
    pub value: u32,
    pub wildcard: u32,
}

impl AddrPattern {
    pub const ANY: AddrPattern = AddrPattern { value: 0, wildcard: u32::MAX };

    pub fn new(value: Ipv4Addr, wildcard: Ipv4Addr) -> Self {
        AddrPattern { value: u32::from(value), wildcard: u32::from(wildcard) }
    }

    pub fn host(addr: Ipv4Addr) -> Self {
        AddrPattern { value: u32::from(addr), wildcard: 0 }
    }

    pub fn is_any(&self) -> bool {
        self.wildcard == u32::MAX
    }

    pub fn matches(&self, addr: u32) -> bool {
        (addr ^ self.value) & !self.wildcard == 0
    }
}

impl fmt::Display for AddrPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", Ipv4Addr::from(self.value), Ipv4Addr::from(self.wildcard))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PortConstraint {
    Any,
    Eq(u16),
    /// Inclusive on both ends.
    Range(u16, u16),
    Ge(u16),
    Lt(u16),
}

impl PortConstraint {
    pub fn matches(&self, port: u16) -> bool {
        match *self {
            PortConstraint::Any => true,
            PortConstraint::Eq(p) => port == p,
            PortConstraint::Range(lo, hi) => lo <= port && port <= hi,
            PortConstraint::Ge(p) => port >= p,
            PortConstraint::Lt(p) => port < p,
        }
    }

    /// Every port value the constraint accepts, as an inclusive interval.
    /// `None` when nothing matches (`lt 0`).
    pub fn interval(&self) -> Option<(u16, u16)> {
        match *self {
            PortConstraint::Any => Some((0, u16::MAX)),
            PortConstraint::Eq(p) => Some((p, p)),
            PortConstraint::Range(lo, hi) => Some((lo, hi)),
            PortConstraint::Ge(p) => Some((p, u16::MAX)),
            PortConstraint::Lt(0) => None,
            PortConstraint::Lt(p) => Some((0, p - 1)),
        }
    }
}

impl fmt::Display for PortConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            PortConstraint::Any => Ok(()),
            PortConstraint::Eq(p) => write!(f, "eq {p}"),
            PortConstraint::Range(lo, hi) => write!(f, "range {lo} {hi}"),
            PortConstraint::Ge(p) => write!(f, "ge {p}"),
            PortConstraint::Lt(p) => write!(f, "lt {p}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Protocol {
    Any,
    Number(u8),
}

impl Protocol {
    pub fn matches(&self, proto: u8) -> bool {
        match *self {
            Protocol::Any => true,
            Protocol::Number(n) => n == proto,
        }
    }

    /// Whether the transport header carries ports that rules may constrain.
    pub fn has_ports(&self) -> bool {
        matches!(self, Protocol::Number(PROTO_TCP) | Protocol::Number(PROTO_UDP))
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Protocol::Any => f.write_str("ip"),
            Protocol::Number(n) => f.write_str(&protocol_name(n)),
        }
    }
}

pub fn protocol_name(n: u8) -> String {
    match n {
        PROTO_TCP => "tcp".into(),
        PROTO_UDP => "udp".into(),
        PROTO_ICMP => "icmp".into(),
        n => format!("proto:{n}"),
    }
}

pub fn protocol_from_name(s: &str) -> Option<Protocol> {
    match s {
        "tcp" => Some(Protocol::Number(PROTO_TCP)),
        "udp" => Some(Protocol::Number(PROTO_UDP)),
        "icmp" => Some(Protocol::Number(PROTO_ICMP)),
        "ip" => Some(Protocol::Any),
        s => s.strip_prefix("proto:").unwrap_or(s).parse::<u8>().ok().map(Protocol::Number),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Condition {
    pub protocol: Protocol,
    pub src: AddrPattern,
    pub dst: AddrPattern,
    pub src_ports: PortConstraint,
    pub dst_ports: PortConstraint,
}

impl Condition {
    /// Matches every packet.
    pub const EVERYTHING: Condition = Condition {
        protocol: Protocol::Any,
        src: AddrPattern::ANY,
        dst: AddrPattern::ANY,
        src_ports: PortConstraint::Any,
        dst_ports: PortConstraint::Any,
    };

    pub fn is_everything(&self) -> bool {
        *self == Condition::EVERYTHING
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_everything() {
            return f.write_str("everything");
        }
        write!(f, "{} {}", self.protocol, self.src)?;
        if self.src_ports != PortConstraint::Any {
            write!(f, " sport {}", self.src_ports)?;
        }
        write!(f, " {}", self.dst)?;
        if self.dst_ports != PortConstraint::Any {
            write!(f, " {}", self.dst_ports)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Action {
    Accept,
    /// Groups allowed to override the rule; empty means mandatory.
    Deny(BTreeSet<GroupId>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Rule {
    pub action: Action,
    pub condition: Condition,
}

impl Rule {
    pub fn accept(condition: Condition) -> Self {
        Rule { action: Action::Accept, condition }
    }

    pub fn deny<I: IntoIterator<Item = u16>>(groups: I, condition: Condition) -> Self {
        Rule { action: Action::Deny(groups.into_iter().map(GroupId).collect()), condition }
    }

    pub fn is_accept(&self) -> bool {
        matches!(self.action, Action::Accept)
    }

    /// Deny labels, or `None` for an accept rule.
    pub fn deny_groups(&self) -> Option<&BTreeSet<GroupId>> {
        match &self.action {
            Action::Accept => None,
            Action::Deny(g) => Some(g),
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.action {
            Action::Accept => f.write_str("accept")?,
            Action::Deny(groups) => {
                f.write_str("deny")?;
                for g in groups {
                    write!(f, " {g}")?;
                }
            }
        }
        write!(f, " {}", self.condition)
    }
}

/// The administrator's access list. Order is significant.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BaseList {
    pub rules: Vec<Rule>,
}

impl BaseList {
    pub fn new(rules: Vec<Rule>) -> Self {
        BaseList { rules }
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }
}

impl fmt::Display for BaseList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for rule in &self.rules {
            writeln!(f, "{rule}")?;
        }
        Ok(())
    }
}

/// True iff every field of `p` satisfies `c`. Port constraints are vacuous
/// for protocols without ports.
pub fn match_condition(c: &Condition, p: &PacketKey) -> bool {
    c.protocol.matches(p.protocol)
        && c.src.matches(p.src_addr)
        && c.dst.matches(p.dst_addr)
        && c.src_ports.matches(p.src_port)
        && c.dst_ports.matches(p.dst_port)
}

// ---------------------------------------------------------------------------
// Group hierarchy

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GroupError {
    #[error("group id {id} out of range (n = {n})")]
    OutOfRange { id: u16, n: usize },
    #[error("containment {parent} -> {child} would create a cycle")]
    Cycle { parent: u16, child: u16 },
}

/// Containment DAG over `n` groups.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupHierarchy {
    names: Vec<String>,
    /// `contains[g]` = groups directly contained in `g`.
    contains: Vec<BTreeSet<GroupId>>,
}

impl GroupHierarchy {
    /// `n` unnamed groups with no containment.
    pub fn flat(n: usize) -> Self {
        GroupHierarchy {
            names: (0..n).map(|i| format!("group{i}")).collect(),
            contains: vec![BTreeSet::new(); n],
        }
    }

    pub fn with_names(names: Vec<String>) -> Self {
        let n = names.len();
        GroupHierarchy { names, contains: vec![BTreeSet::new(); n] }
    }

    pub fn len(&self) -> usize {
        self.contains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contains.is_empty()
    }

    pub fn name(&self, g: GroupId) -> Option<&str> {
        self.names.get(g.index()).map(String::as_str)
    }

    pub fn groups(&self) -> impl Iterator<Item = GroupId> {
        (0..self.len() as u16).map(GroupId)
    }

    pub fn children(&self, g: GroupId) -> Result<&BTreeSet<GroupId>, GroupError> {
        self.check(g)?;
        Ok(&self.contains[g.index()])
    }

    fn check(&self, g: GroupId) -> Result<(), GroupError> {
        if g.index() < self.len() {
            Ok(())
        } else {
            Err(GroupError::OutOfRange { id: g.0, n: self.len() })
        }
    }

    /// Record that `parent` directly contains `child`.
    pub fn add_containment(&mut self, parent: GroupId, child: GroupId) -> Result<(), GroupError> {
        self.check(parent)?;
        self.check(child)?;
        // parent reachable downward from child closes a cycle
        if parent == child || self.descends(child, parent) {
            return Err(GroupError::Cycle { parent: parent.0, child: child.0 });
        }
        self.contains[parent.index()].insert(child);
        Ok(())
    }

    fn descends(&self, from: GroupId, target: GroupId) -> bool {
        let mut stack = vec![from];
        let mut seen = vec![false; self.len()];
        while let Some(g) = stack.pop() {
            if g == target {
                return true;
            }
            if std::mem::replace(&mut seen[g.index()], true) {
                continue;
            }
            stack.extend(self.contains[g.index()].iter().copied());
        }
        false
    }

    /// `j` together with every group that contains it, directly or
    /// transitively.
    pub fn supergroups(&self, j: GroupId) -> Result<BTreeSet<GroupId>, GroupError> {
        self.check(j)?;
        let mut out = BTreeSet::from([j]);
        let mut frontier = vec![j];
        while let Some(g) = frontier.pop() {
            for (parent, kids) in self.contains.iter().enumerate() {
                let parent = GroupId(parent as u16);
                if kids.contains(&g) && out.insert(parent) {
                    frontier.push(parent);
                }
            }
        }
        Ok(out)
    }
}

impl fmt::Display for GroupHierarchy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, name) in self.names.iter().enumerate() {
            writeln!(f, "group {name} {i}")?;
        }
        for (i, kids) in self.contains.iter().enumerate() {
            if !kids.is_empty() {
                write!(f, "contains {i}")?;
                for k in kids {
                    write!(f, " {k}")?;
                }
                writeln!(f)?;
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Parsing

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("expected {0}, found end of line")]
    UnexpectedEnd(&'static str),
    #[error("expected {expected}, found `{found}`")]
    Unexpected { expected: &'static str, found: String },
    #[error("unknown protocol `{0}`")]
    UnknownProtocol(String),
    #[error("`{0}` is not a dotted-quad address")]
    BadAddress(String),
    #[error("port `{0}` out of range 0..65535")]
    BadPort(String),
    #[error("port range {0} {1} is inverted")]
    InvertedRange(u16, u16),
    #[error("group id {id} out of range (n = {n})")]
    GroupOutOfRange { id: String, n: usize },
    #[error("protocol `{0}` has no ports")]
    PortsOnPortless(String),
    #[error("exception lists contain only accept rules")]
    DenyInExceptionList,
    #[error("unexpected trailing token `{0}`")]
    Trailing(String),
    #[error("{0}")]
    Config(String),
}

/// Parse failure anchored at a 1-based line and column.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

struct Token<'a> {
    text: &'a str,
    column: usize,
}

struct Line<'a> {
    number: usize,
    tokens: Vec<Token<'a>>,
    pos: usize,
    end_column: usize,
}

impl<'a> Line<'a> {
    fn new(number: usize, raw: &'a str) -> Self {
        let text = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        };
        let mut tokens = Vec::new();
        let mut start = None;
        for (i, ch) in text.char_indices() {
            match (ch.is_whitespace(), start) {
                (false, None) => start = Some(i),
                (true, Some(s)) => {
                    tokens.push(Token { text: &text[s..i], column: s + 1 });
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            tokens.push(Token { text: &text[s..], column: s + 1 });
        }
        Line { number, tokens, pos: 0, end_column: text.trim_end().len() + 1 }
    }

    fn err(&self, column: usize, kind: ParseErrorKind) -> ParseError {
        ParseError { line: self.number, column, kind }
    }

    fn peek(&self) -> Option<&Token<'a>> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self, expected: &'static str) -> Result<Token<'a>, ParseError> {
        match self.tokens.get(self.pos) {
            Some(t) => {
                self.pos += 1;
                Ok(Token { text: t.text, column: t.column })
            }
            None => Err(self.err(self.end_column, ParseErrorKind::UnexpectedEnd(expected))),
        }
    }

    fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

fn parse_quad(line: &Line<'_>, tok: &Token<'_>) -> Result<u32, ParseError> {
    tok.text
        .parse::<Ipv4Addr>()
        .map(u32::from)
        .map_err(|_| line.err(tok.column, ParseErrorKind::BadAddress(tok.text.to_string())))
}

fn parse_port(line: &mut Line<'_>) -> Result<u16, ParseError> {
    let tok = line.next("port number")?;
    tok.text
        .parse::<u16>()
        .map_err(|_| line.err(tok.column, ParseErrorKind::BadPort(tok.text.to_string())))
}

fn parse_addr(line: &mut Line<'_>) -> Result<AddrPattern, ParseError> {
    let tok = line.next("address")?;
    match tok.text {
        "any" => Ok(AddrPattern::ANY),
        "host" => {
            let tok = line.next("host address")?;
            Ok(AddrPattern { value: parse_quad(line, &tok)?, wildcard: 0 })
        }
        _ => {
            let value = parse_quad(line, &tok)?;
            let wc = line.next("wildcard mask")?;
            Ok(AddrPattern { value, wildcard: parse_quad(line, &wc)? })
        }
    }
}

fn is_port_keyword(s: &str) -> bool {
    matches!(s, "eq" | "range" | "ge" | "lt")
}

fn parse_ports(line: &mut Line<'_>) -> Result<PortConstraint, ParseError> {
    let tok = line.next("port constraint")?;
    let pc = match tok.text {
        "eq" => PortConstraint::Eq(parse_port(line)?),
        "ge" => PortConstraint::Ge(parse_port(line)?),
        "lt" => PortConstraint::Lt(parse_port(line)?),
        "range" => {
            let lo = parse_port(line)?;
            let hi = parse_port(line)?;
            if lo > hi {
                return Err(line.err(tok.column, ParseErrorKind::InvertedRange(lo, hi)));
            }
            PortConstraint::Range(lo, hi)
        }
        other => {
            return Err(line.err(
                tok.column,
                ParseErrorKind::Unexpected { expected: "eq, range, ge or lt", found: other.into() },
            ))
        }
    };
    Ok(pc)
}

fn parse_condition(line: &mut Line<'_>) -> Result<Condition, ParseError> {
    let tok = line.next("protocol or `everything`")?;
    if tok.text == "everything" {
        return Ok(Condition::EVERYTHING);
    }
    let protocol = protocol_from_name(tok.text)
        .ok_or_else(|| line.err(tok.column, ParseErrorKind::UnknownProtocol(tok.text.into())))?;
    let proto_text = tok.text;

    let src = parse_addr(line)?;
    let mut src_ports = PortConstraint::Any;
    if let Some(t) = line.peek() {
        if t.text == "sport" {
            let column = t.column;
            line.pos += 1;
            if !protocol.has_ports() {
                return Err(line.err(column, ParseErrorKind::PortsOnPortless(proto_text.into())));
            }
            src_ports = parse_ports(line)?;
        }
    }
    let dst = parse_addr(line)?;
    let mut dst_ports = PortConstraint::Any;
    if let Some(t) = line.peek() {
        if is_port_keyword(t.text) {
            if !protocol.has_ports() {
                return Err(line.err(t.column, ParseErrorKind::PortsOnPortless(proto_text.into())));
            }
            dst_ports = parse_ports(line)?;
        }
    }
    Ok(Condition { protocol, src, dst, src_ports, dst_ports })
}

fn parse_rule(line: &mut Line<'_>, groups: usize) -> Result<Rule, ParseError> {
    let mut tok = line.next("accept or deny")?;
    if tok.text.ends_with(':') && tok.text[..tok.text.len() - 1].chars().all(|c| c.is_ascii_digit()) {
        tok = line.next("accept or deny")?;
    }
    let action = match tok.text {
        "accept" | "permit" => Action::Accept,
        "deny" | "reject" => {
            let mut labels = BTreeSet::new();
            while let Some(t) = line.peek() {
                if !t.text.chars().all(|c| c.is_ascii_digit()) {
                    break;
                }
                let (text, column) = (t.text, t.column);
                line.pos += 1;
                match text.parse::<u16>() {
                    Ok(id) if (id as usize) < groups => {
                        labels.insert(GroupId(id));
                    }
                    _ => {
                        return Err(line.err(
                            column,
                            ParseErrorKind::GroupOutOfRange { id: text.into(), n: groups },
                        ))
                    }
                }
            }
            Action::Deny(labels)
        }
        other => {
            return Err(line.err(
                tok.column,
                ParseErrorKind::Unexpected { expected: "accept or deny", found: other.into() },
            ))
        }
    };
    let condition = parse_condition(line)?;
    if let Some(t) = line.peek() {
        return Err(line.err(t.column, ParseErrorKind::Trailing(t.text.into())));
    }
    Ok(Rule { action, condition })
}

fn parse_rules(text: &str, groups: usize) -> Result<Vec<(usize, Rule)>, ParseError> {
    let mut rules = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let mut line = Line::new(i + 1, raw);
        if line.is_empty() {
            continue;
        }
        rules.push((line.number, parse_rule(&mut line, groups)?));
    }
    Ok(rules)
}

/// Parse a base access list whose deny labels must be below `groups`.
pub fn parse_acl(text: &str, groups: usize) -> Result<BaseList, ParseError> {
    Ok(BaseList::new(parse_rules(text, groups)?.into_iter().map(|(_, r)| r).collect()))
}

/// Parse an exception list: same grammar, accept rules only.
pub fn parse_exception_list(text: &str) -> Result<Vec<Rule>, ParseError> {
    let rules = parse_rules(text, usize::from(u16::MAX))?;
    let mut out = Vec::with_capacity(rules.len());
    for (line, rule) in rules {
        if !rule.is_accept() {
            return Err(ParseError { line, column: 1, kind: ParseErrorKind::DenyInExceptionList });
        }
        out.push(rule);
    }
    Ok(out)
}

impl FromStr for Rule {
    type Err = ParseError;

    /// A single rule with unrestricted group labels.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut rules = parse_rules(s, usize::from(u16::MAX))?;
        match rules.len() {
            1 => Ok(rules.remove(0).1),
            0 => Err(ParseError { line: 1, column: 1, kind: ParseErrorKind::UnexpectedEnd("rule") }),
            _ => Err(ParseError {
                line: rules[1].0,
                column: 1,
                kind: ParseErrorKind::Trailing("second rule".into()),
            }),
        }
    }
}

/// Parse a group hierarchy config:
///
/// ```text
/// group staff 0
/// group student 1
/// group all 2
/// contains 2 0 1
/// ```
///
/// Ids must be dense (`0..n`); containment must be acyclic.
pub fn parse_hierarchy(text: &str) -> Result<GroupHierarchy, ParseError> {
    let mut names: Vec<Option<String>> = Vec::new();
    let mut edges = Vec::new();
    let mut first_group_line = None;

    for (i, raw) in text.lines().enumerate() {
        let mut line = Line::new(i + 1, raw);
        if line.is_empty() {
            continue;
        }
        let kw = line.next("`group` or `contains`")?;
        match kw.text {
            "group" => {
                let name = line.next("group name")?;
                let id_tok = line.next("group id")?;
                let id: u16 = id_tok.text.parse().map_err(|_| {
                    line.err(
                        id_tok.column,
                        ParseErrorKind::Unexpected { expected: "group id", found: id_tok.text.into() },
                    )
                })?;
                let slot = id as usize;
                if names.len() <= slot {
                    names.resize(slot + 1, None);
                }
                if names[slot].is_some() {
                    return Err(line.err(
                        id_tok.column,
                        ParseErrorKind::Config(format!("group id {id} defined twice")),
                    ));
                }
                names[slot] = Some(name.text.to_string());
                first_group_line.get_or_insert(line.number);
                if let Some(t) = line.peek() {
                    return Err(line.err(t.column, ParseErrorKind::Trailing(t.text.into())));
                }
            }
            "contains" => {
                let parent = line.next("parent group id")?;
                let parent_col = parent.column;
                let parent = parent.text.to_string();
                let mut any = false;
                while let Some(t) = line.peek() {
                    edges.push((line.number, parent_col, parent.clone(), t.column, t.text.to_string()));
                    line.pos += 1;
                    any = true;
                }
                if !any {
                    return Err(line.err(line.end_column, ParseErrorKind::UnexpectedEnd("child group id")));
                }
            }
            other => {
                return Err(line.err(
                    kw.column,
                    ParseErrorKind::Unexpected { expected: "`group` or `contains`", found: other.into() },
                ))
            }
        }
    }

    if let Some(gap) = names.iter().position(Option::is_none) {
        return Err(ParseError {
            line: first_group_line.unwrap_or(1),
            column: 1,
            kind: ParseErrorKind::Config(format!("group ids must be dense; id {gap} is missing")),
        });
    }
    let n = names.len();
    let mut h = GroupHierarchy::with_names(names.into_iter().flatten().collect());
    let parse_id = |line: usize, column: usize, text: &str| -> Result<GroupId, ParseError> {
        match text.parse::<u16>() {
            Ok(id) if (id as usize) < n => Ok(GroupId(id)),
            _ => Err(ParseError {
                line,
                column,
                kind: ParseErrorKind::GroupOutOfRange { id: text.into(), n },
            }),
        }
    };
    for (line, pcol, parent, ccol, child) in edges {
        let p = parse_id(line, pcol, &parent)?;
        let c = parse_id(line, ccol, &child)?;
        h.add_containment(p, c).map_err(|e| ParseError {
            line,
            column: ccol,
            kind: ParseErrorKind::Config(e.to_string()),
        })?;
    }
    Ok(h)
}
