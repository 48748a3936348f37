use std::fmt;
use std::io;
use std::net::{IpAddr, Ipv4Addr, SocketAddr, UdpSocket};
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use crate::acl::Rule;
use crate::engine::{Classification, Engine, UpdateError, UpdateId, UpdateRequest, UserId};
use crate::snapshot::SnapshotReader;

use super::directory::UserDirectory;
use super::wire::{decode, encode, Message, WireError, MAX_DATAGRAM};

pub const DEFAULT_PORT: u16 = 7997;
pub const REJECT_REASON: &str = "request conflicts with access policy";

/// IPv4 network in `a.b.c.d/len` form; a bare address means `/32`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SourcePrefix {
    addr: u32,
    len: u8,
}

impl SourcePrefix {
    pub fn new(addr: Ipv4Addr, len: u8) -> Option<Self> {
        (len <= 32).then(|| SourcePrefix { addr: u32::from(addr) & Self::mask(len), len })
    }

    fn mask(len: u8) -> u32 {
        if len == 0 {
            0
        } else {
            u32::MAX << (32 - len)
        }
    }

    pub fn contains(&self, ip: IpAddr) -> bool {
        let v4 = match ip {
            IpAddr::V4(a) => a,
            IpAddr::V6(a) => match a.to_ipv4_mapped() {
                Some(a) => a,
                None => return false,
            },
        };
        u32::from(v4) & Self::mask(self.len) == self.addr
    }
}

impl FromStr for SourcePrefix {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (addr, len) = match s.split_once('/') {
            Some((a, l)) => (a, l.parse::<u8>().map_err(|_| format!("bad prefix length in `{s}`"))?),
            None => (s, 32),
        };
        let addr: Ipv4Addr = addr.parse().map_err(|_| format!("bad address in `{s}`"))?;
        SourcePrefix::new(addr, len).ok_or_else(|| format!("prefix length above 32 in `{s}`"))
    }
}

impl fmt::Display for SourcePrefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", Ipv4Addr::from(self.addr), self.len)
    }
}

#[derive(Clone, Debug)]
pub struct ServerConfig {
    /// Real-time interval between expiry sweeps.
    pub purge_interval: Duration,
    /// Datagrams from other sources are dropped. Empty allows every source.
    pub allowed_sources: Vec<SourcePrefix>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig { purge_interval: Duration::from_secs(1), allowed_sources: Vec::new() }
    }
}

/// Binds the message exchange to an engine. All mutation happens on the
/// thread that owns the server.
pub struct Server {
    engine: Engine,
    directory: UserDirectory,
    config: ServerConfig,
}

fn update_error(id: u64, e: UpdateError) -> Message {
    Message::error(
        id,
        match e {
            UpdateError::UnknownId(_) => "unknown update id",
            UpdateError::Expired(_) => "expired",
        },
    )
}

impl Server {
    pub fn new(engine: Engine, directory: UserDirectory, config: ServerConfig) -> Self {
        Server { engine, directory, config }
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn engine_mut(&mut self) -> &mut Engine {
        &mut self.engine
    }

    pub fn directory(&self) -> &UserDirectory {
        &self.directory
    }

    pub fn into_engine(self) -> Engine {
        self.engine
    }

    pub fn source_allowed(&self, from: SocketAddr) -> bool {
        self.config.allowed_sources.is_empty() || self.config.allowed_sources.iter().any(|p| p.contains(from.ip()))
    }

    /// Process one datagram and return the encoded reply, if any.
    pub fn handle_datagram(&mut self, data: &[u8], from: SocketAddr) -> Option<Vec<u8>> {
        if !self.source_allowed(from) {
            log::warn!("dropping datagram from disallowed source {from}");
            return None;
        }
        let reply = match decode(data) {
            Ok(msg) => {
                log::debug!("{from}: {msg:?}");
                self.handle(msg)?
            }
            Err(WireError::BadMagic) => {
                log::debug!("{from}: dropping datagram without protocol magic");
                return None;
            }
            Err(e) => {
                log::warn!("{from}: malformed datagram: {e}");
                Message::error(0, format!("malformed datagram: {e}"))
            }
        };
        match encode(&reply) {
            Ok(bytes) => Some(bytes),
            Err(e) => {
                log::error!("cannot encode reply to {from}: {e}");
                None
            }
        }
    }

    /// Process one decoded message. Replies are never answered.
    pub fn handle(&mut self, msg: Message) -> Option<Message> {
        let reply = match msg {
            Message::Request { user, expiry_secs, rules } => self.request(UserId(user), expiry_secs, &rules),
            Message::Confirm { user, update_id } => self.owned(UserId(user), update_id, |e, id| {
                e.confirm(id).map(|_| "active")
            }),
            Message::Delete { user, update_id } => self.owned(UserId(user), update_id, |e, id| {
                e.delete(id).map(|_| "deleted")
            }),
            Message::Renew { user, update_id, expiry_secs } => self.owned(UserId(user), update_id, |e, id| {
                e.renew(id, Duration::from_secs(expiry_secs.into())).map(|_| "renewed")
            }),
            other => {
                log::warn!("ignoring unsolicited {:?}", other.kind());
                return None;
            }
        };
        Some(reply)
    }

    fn request(&mut self, user: UserId, expiry_secs: u32, texts: &[String]) -> Message {
        let Some(group) = self.directory.group_of(user) else {
            return Message::error(0, "unknown user");
        };
        let mut rules = Vec::with_capacity(texts.len());
        for (i, text) in texts.iter().enumerate() {
            match text.parse::<Rule>() {
                Ok(r) if r.is_accept() => rules.push(r),
                Ok(_) => return Message::error(0, format!("rule {}: exception lists contain only accept rules", i + 1)),
                Err(e) => return Message::error(0, format!("rule {}: {}", i + 1, e.kind)),
            }
        }
        let req = UpdateRequest { owner: user, group, expiry: Duration::from_secs(expiry_secs.into()), rules };
        match self.engine.classify_request(req) {
            Ok(Classification::RejectAll) => Message::Reject { update_id: 0, reason: REJECT_REASON.into() },
            Ok(Classification::Full { id }) => Message::AllowFull { update_id: id.0 },
            Ok(Classification::Partial { id, table }) => {
                let reply = Message::AllowPartial { update_id: id.0, rows: table.to_lines() };
                if encode(&reply).is_err() {
                    self.engine.discard_pending(id);
                    return Message::error(0, "grant table too large for one datagram");
                }
                reply
            }
            Err(e) => Message::error(0, e.to_string()),
        }
    }

    fn owned(
        &mut self,
        user: UserId,
        update_id: u64,
        op: impl FnOnce(&mut Engine, UpdateId) -> Result<&'static str, UpdateError>,
    ) -> Message {
        if self.directory.group_of(user).is_none() {
            return Message::error(update_id, "unknown user");
        }
        let id = UpdateId(update_id);
        if let Some(rec) = self.engine.record(id) {
            if rec.owner != user {
                return Message::error(update_id, "not owner");
            }
        }
        match op(&mut self.engine, id) {
            Ok(reason) => Message::Ack { update_id, reason: reason.into() },
            Err(e) => update_error(update_id, e),
        }
    }

    /// Serve until `shutdown` is set, sweeping expired records every
    /// purge interval.
    pub fn run(&mut self, socket: &UdpSocket, shutdown: &AtomicBool) -> io::Result<()> {
        let tick = self.config.purge_interval.clamp(Duration::from_millis(1), Duration::from_millis(100));
        socket.set_read_timeout(Some(tick))?;
        let mut buf = vec![0u8; MAX_DATAGRAM + 1];
        let mut last_purge = Instant::now();
        while !shutdown.load(Ordering::Relaxed) {
            match socket.recv_from(&mut buf) {
                Ok((n, from)) => {
                    if let Some(reply) = self.handle_datagram(&buf[..n], from) {
                        if let Err(e) = socket.send_to(&reply, from) {
                            log::warn!("reply to {from} failed: {e}");
                        }
                    }
                }
                Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {}
                // ICMP port unreachable from an earlier reply surfaces here on some platforms
                Err(e) if e.kind() == io::ErrorKind::ConnectionReset => {}
                Err(e) => return Err(e),
            }
            if last_purge.elapsed() >= self.config.purge_interval {
                last_purge = Instant::now();
                let n = self.engine.purge_due();
                if n > 0 {
                    log::info!("purged {n} expired records");
                }
            }
        }
        Ok(())
    }

    /// Bind `addr` and serve on a background thread.
    pub fn spawn(self, addr: SocketAddr) -> io::Result<ServerHandle> {
        let socket = UdpSocket::bind(addr)?;
        let local_addr = socket.local_addr()?;
        let reader = self.engine.reader();
        let shutdown = Arc::new(AtomicBool::new(false));
        let flag = Arc::clone(&shutdown);
        let mut server = self;
        let thread = std::thread::Builder::new().name("dynacl-server".into()).spawn(move || {
            let res = server.run(&socket, &flag);
            (server, res)
        })?;
        Ok(ServerHandle { local_addr, reader, shutdown, thread })
    }
}

pub struct ServerHandle {
    local_addr: SocketAddr,
    reader: SnapshotReader,
    shutdown: Arc<AtomicBool>,
    thread: JoinHandle<(Server, io::Result<()>)>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    /// Lookups against the server's published filter.
    pub fn reader(&self) -> SnapshotReader {
        self.reader.clone()
    }

    /// Stop the loop and hand back the server.
    pub fn stop(self) -> io::Result<Server> {
        self.shutdown.store(true, Ordering::Relaxed);
        let (server, res) = self.thread.join().map_err(|_| io::Error::other("server thread panicked"))?;
        res.map(|_| server)
    }
}
