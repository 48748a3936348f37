//! Datagram encoding.
//!
//! ```text
//! "DFW1" | version 0x01 | kind | body
//! ```
//!
//! All integers are big-endian; strings are UTF-8 with a `u16` length prefix.

use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"DFW1";
pub const VERSION: u8 = 1;
pub const MAX_DATAGRAM: usize = 8192;
const HEADER_LEN: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum Kind {
    Request = 1,
    AllowFull = 2,
    AllowPartial = 3,
    Reject = 4,
    Confirm = 5,
    Delete = 6,
    Renew = 7,
    Ack = 8,
    Error = 9,
}

impl Kind {
    fn from_byte(b: u8) -> Option<Kind> {
        Some(match b {
            1 => Kind::Request,
            2 => Kind::AllowFull,
            3 => Kind::AllowPartial,
            4 => Kind::Reject,
            5 => Kind::Confirm,
            6 => Kind::Delete,
            7 => Kind::Renew,
            8 => Kind::Ack,
            9 => Kind::Error,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Message {
    Request { user: u32, expiry_secs: u32, rules: Vec<String> },
    AllowFull { update_id: u64 },
    AllowPartial { update_id: u64, rows: Vec<String> },
    Reject { update_id: u64, reason: String },
    Confirm { user: u32, update_id: u64 },
    Delete { user: u32, update_id: u64 },
    Renew { user: u32, update_id: u64, expiry_secs: u32 },
    Ack { update_id: u64, reason: String },
    Error { update_id: u64, reason: String },
}

impl Message {
    pub fn kind(&self) -> Kind {
        match self {
            Message::Request { .. } => Kind::Request,
            Message::AllowFull { .. } => Kind::AllowFull,
            Message::AllowPartial { .. } => Kind::AllowPartial,
            Message::Reject { .. } => Kind::Reject,
            Message::Confirm { .. } => Kind::Confirm,
            Message::Delete { .. } => Kind::Delete,
            Message::Renew { .. } => Kind::Renew,
            Message::Ack { .. } => Kind::Ack,
            Message::Error { .. } => Kind::Error,
        }
    }

    /// The update id carried by the message, if its kind has one.
    pub fn update_id(&self) -> Option<u64> {
        match self {
            Message::Request { .. } => None,
            Message::AllowFull { update_id }
            | Message::AllowPartial { update_id, .. }
            | Message::Reject { update_id, .. }
            | Message::Confirm { update_id, .. }
            | Message::Delete { update_id, .. }
            | Message::Renew { update_id, .. }
            | Message::Ack { update_id, .. }
            | Message::Error { update_id, .. } => Some(*update_id),
        }
    }

    pub fn error(update_id: u64, reason: impl Into<String>) -> Message {
        Message::Error { update_id, reason: reason.into() }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WireError {
    #[error("datagram of {0} bytes exceeds {MAX_DATAGRAM}")]
    TooLarge(usize),
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported version {0}")]
    BadVersion(u8),
    #[error("unknown message kind {0}")]
    UnknownKind(u8),
    #[error("truncated {0}")]
    Truncated(&'static str),
    #[error("invalid UTF-8 in {0}")]
    InvalidUtf8(&'static str),
    #[error("{0} trailing bytes")]
    Trailing(usize),
    #[error("{what} of {len} exceeds 65535")]
    FieldTooLong { what: &'static str, len: usize },
}

fn put_str(out: &mut Vec<u8>, s: &str, what: &'static str) -> Result<(), WireError> {
    let len = u16::try_from(s.len()).map_err(|_| WireError::FieldTooLong { what, len: s.len() })?;
    out.extend_from_slice(&len.to_be_bytes());
    out.extend_from_slice(s.as_bytes());
    Ok(())
}

fn put_list(out: &mut Vec<u8>, items: &[String], what: &'static str) -> Result<(), WireError> {
    let n = u16::try_from(items.len()).map_err(|_| WireError::FieldTooLong { what: "item count", len: items.len() })?;
    out.extend_from_slice(&n.to_be_bytes());
    for s in items {
        put_str(out, s, what)?;
    }
    Ok(())
}

pub fn encode(m: &Message) -> Result<Vec<u8>, WireError> {
    let mut out = Vec::with_capacity(32);
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(m.kind() as u8);
    match m {
        Message::Request { user, expiry_secs, rules } => {
            out.extend_from_slice(&user.to_be_bytes());
            out.extend_from_slice(&expiry_secs.to_be_bytes());
            put_list(&mut out, rules, "rule")?;
        }
        Message::AllowFull { update_id } => out.extend_from_slice(&update_id.to_be_bytes()),
        Message::AllowPartial { update_id, rows } => {
            out.extend_from_slice(&update_id.to_be_bytes());
            put_list(&mut out, rows, "row")?;
        }
        Message::Reject { update_id, reason } | Message::Ack { update_id, reason } | Message::Error { update_id, reason } => {
            out.extend_from_slice(&update_id.to_be_bytes());
            put_str(&mut out, reason, "reason")?;
        }
        Message::Confirm { user, update_id } | Message::Delete { user, update_id } => {
            out.extend_from_slice(&user.to_be_bytes());
            out.extend_from_slice(&update_id.to_be_bytes());
        }
        Message::Renew { user, update_id, expiry_secs } => {
            out.extend_from_slice(&user.to_be_bytes());
            out.extend_from_slice(&update_id.to_be_bytes());
            out.extend_from_slice(&expiry_secs.to_be_bytes());
        }
    }
    if out.len() > MAX_DATAGRAM {
        return Err(WireError::TooLarge(out.len()));
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], WireError> {
        if self.buf.len() < n {
            return Err(WireError::Truncated(what));
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Ok(head)
    }

    fn u16(&mut self, what: &'static str) -> Result<u16, WireError> {
        Ok(u16::from_be_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, WireError> {
        Ok(u32::from_be_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &'static str) -> Result<u64, WireError> {
        Ok(u64::from_be_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn string(&mut self, what: &'static str) -> Result<String, WireError> {
        let len = self.u16(what)? as usize;
        let bytes = self.take(len, what)?;
        std::str::from_utf8(bytes).map(str::to_owned).map_err(|_| WireError::InvalidUtf8(what))
    }

    fn list(&mut self, what: &'static str) -> Result<Vec<String>, WireError> {
        let n = self.u16(what)? as usize;
        // each item needs at least its length prefix
        if n * 2 > self.buf.len() {
            return Err(WireError::Truncated(what));
        }
        (0..n).map(|_| self.string(what)).collect()
    }
}

pub fn decode(data: &[u8]) -> Result<Message, WireError> {
    if data.len() > MAX_DATAGRAM {
        return Err(WireError::TooLarge(data.len()));
    }
    if data.len() < 4 || data[..4] != MAGIC {
        return Err(WireError::BadMagic);
    }
    if data.len() < HEADER_LEN {
        return Err(WireError::Truncated("header"));
    }
    if data[4] != VERSION {
        return Err(WireError::BadVersion(data[4]));
    }
    let kind = Kind::from_byte(data[5]).ok_or(WireError::UnknownKind(data[5]))?;
    let mut r = Reader { buf: &data[HEADER_LEN..] };
    let m = match kind {
        Kind::Request => Message::Request {
            user: r.u32("user id")?,
            expiry_secs: r.u32("expiry")?,
            rules: r.list("rule")?,
        },
        Kind::AllowFull => Message::AllowFull { update_id: r.u64("update id")? },
        Kind::AllowPartial => Message::AllowPartial { update_id: r.u64("update id")?, rows: r.list("row")? },
        Kind::Reject => Message::Reject { update_id: r.u64("update id")?, reason: r.string("reason")? },
        Kind::Ack => Message::Ack { update_id: r.u64("update id")?, reason: r.string("reason")? },
        Kind::Error => Message::Error { update_id: r.u64("update id")?, reason: r.string("reason")? },
        Kind::Confirm => Message::Confirm { user: r.u32("user id")?, update_id: r.u64("update id")? },
        Kind::Delete => Message::Delete { user: r.u32("user id")?, update_id: r.u64("update id")? },
        Kind::Renew => Message::Renew {
            user: r.u32("user id")?,
            update_id: r.u64("update id")?,
            expiry_secs: r.u32("expiry")?,
        },
    };
    if !r.buf.is_empty() {
        return Err(WireError::Trailing(r.buf.len()));
    }
    Ok(m)
}
