use std::io;
use std::net::{SocketAddr, ToSocketAddrs, UdpSocket};
use std::time::{Duration, Instant};

use thiserror::Error;

use super::wire::{decode, encode, Kind, Message, WireError, MAX_DATAGRAM};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("no reply after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error("server error: {reason}")]
    Server { update_id: u64, reason: String },
}

/// Answer to a REQUEST.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RequestReply {
    Full { update_id: u64 },
    Partial { update_id: u64, rows: Vec<String> },
    Reject { reason: String },
}

pub struct Client {
    socket: UdpSocket,
    server: SocketAddr,
    timeout: Duration,
    retries: u32,
}

impl Client {
    /// Default timeout 2 s with 3 retries of idempotent messages.
    pub fn connect(server: impl ToSocketAddrs) -> Result<Client, ClientError> {
        let server = server
            .to_socket_addrs()?
            .next()
            .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "server address resolves to nothing"))?;
        let bind: SocketAddr = if server.is_ipv4() { "0.0.0.0:0" } else { "[::]:0" }.parse().unwrap();
        let socket = UdpSocket::bind(bind)?;
        Ok(Client { socket, server, timeout: Duration::from_secs(2), retries: 3 })
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn with_retries(mut self, retries: u32) -> Self {
        self.retries = retries;
        self
    }

    pub fn server(&self) -> SocketAddr {
        self.server
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.socket.local_addr()
    }

    /// Send `msg` and wait for a reply accepted by `wanted`, resending up to
    /// `retries` times.
    fn exchange(&self, msg: &Message, retries: u32, wanted: impl Fn(&Message) -> bool) -> Result<Message, ClientError> {
        let bytes = encode(msg)?;
        let mut buf = vec![0u8; MAX_DATAGRAM + 1];
        for attempt in 0..=retries {
            self.socket.send_to(&bytes, self.server)?;
            let deadline = Instant::now() + self.timeout;
            loop {
                let left = deadline.saturating_duration_since(Instant::now());
                if left.is_zero() {
                    break;
                }
                self.socket.set_read_timeout(Some(left))?;
                match self.socket.recv_from(&mut buf) {
                    Ok((n, from)) if from == self.server => match decode(&buf[..n]) {
                        Ok(reply) if wanted(&reply) => return Ok(reply),
                        Ok(reply) => log::debug!("ignoring unrelated reply {reply:?}"),
                        Err(e) => log::debug!("ignoring undecodable reply: {e}"),
                    },
                    Ok((_, from)) => log::debug!("ignoring datagram from {from}"),
                    Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => break,
                    Err(e) if e.kind() == io::ErrorKind::ConnectionRefused => break,
                    Err(e) => return Err(e.into()),
                }
            }
            log::debug!("attempt {} of {:?} timed out", attempt + 1, msg.kind());
        }
        Err(ClientError::Timeout { attempts: retries + 1 })
    }

    /// Ask for an exception. Not retried: a resend would queue a second
    /// pending update.
    pub fn request(&self, user: u32, expiry_secs: u32, rules: &[String]) -> Result<RequestReply, ClientError> {
        let msg = Message::Request { user, expiry_secs, rules: rules.to_vec() };
        let reply = self.exchange(&msg, 0, |m| {
            matches!(m.kind(), Kind::AllowFull | Kind::AllowPartial | Kind::Reject | Kind::Error)
        })?;
        match reply {
            Message::AllowFull { update_id } => Ok(RequestReply::Full { update_id }),
            Message::AllowPartial { update_id, rows } => Ok(RequestReply::Partial { update_id, rows }),
            Message::Reject { reason, .. } => Ok(RequestReply::Reject { reason }),
            Message::Error { update_id, reason } => Err(ClientError::Server { update_id, reason }),
            _ => unreachable!(),
        }
    }

    fn acked(&self, msg: Message) -> Result<String, ClientError> {
        let id = msg.update_id();
        let reply = self.exchange(&msg, self.retries, |m| {
            matches!(m.kind(), Kind::Ack | Kind::Error) && (m.update_id() == id || m.update_id() == Some(0))
        })?;
        match reply {
            Message::Ack { reason, .. } => Ok(reason),
            Message::Error { update_id, reason } => Err(ClientError::Server { update_id, reason }),
            _ => unreachable!(),
        }
    }

    pub fn confirm(&self, user: u32, update_id: u64) -> Result<String, ClientError> {
        self.acked(Message::Confirm { user, update_id })
    }

    pub fn delete(&self, user: u32, update_id: u64) -> Result<String, ClientError> {
        self.acked(Message::Delete { user, update_id })
    }

    pub fn renew(&self, user: u32, update_id: u64, expiry_secs: u32) -> Result<String, ClientError> {
        self.acked(Message::Renew { user, update_id, expiry_secs })
    }
}
