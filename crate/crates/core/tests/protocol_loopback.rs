mod common;

use std::net::{SocketAddr, UdpSocket};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use common::*;
use dynacl::acl::{GroupId, PacketKey};
use dynacl::clock::{Clock, ManualClock, SystemClock};
use dynacl::engine::UserId;
use dynacl::protocol::{decode, Client, ClientError, Kind, RequestReply, Server, ServerConfig, ServerHandle, UserDirectory};
use dynacl::snapshot::Decision;

const STAFF: u32 = 100;
const STUDENT: u32 = 101;

fn start(clock: &ManualClock, purge_interval: Duration) -> ServerHandle {
    let engine = campus_engine(clock, seeded_config(11));
    let users: UserDirectory = [(UserId(STAFF), GroupId(0)), (UserId(STUDENT), GroupId(1))].into_iter().collect();
    let config = ServerConfig { purge_interval, ..ServerConfig::default() };
    Server::new(engine, users, config).spawn("127.0.0.1:0".parse().unwrap()).unwrap()
}

/// UDP relay that drops the first `drop_acks` ACK replies.
struct LossyProxy {
    addr: SocketAddr,
    dropped: Arc<AtomicUsize>,
    forwarded_requests: Arc<AtomicUsize>,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl LossyProxy {
    fn new(server: SocketAddr, drop_acks: usize) -> LossyProxy {
        let front = UdpSocket::bind("127.0.0.1:0").unwrap();
        let back = UdpSocket::bind("127.0.0.1:0").unwrap();
        let addr = front.local_addr().unwrap();
        front.set_read_timeout(Some(Duration::from_millis(5))).unwrap();
        back.set_read_timeout(Some(Duration::from_millis(5))).unwrap();
        let dropped = Arc::new(AtomicUsize::new(0));
        let forwarded_requests = Arc::new(AtomicUsize::new(0));
        let stop = Arc::new(AtomicBool::new(false));
        let (d, f, s) = (dropped.clone(), forwarded_requests.clone(), stop.clone());
        let thread = std::thread::spawn(move || {
            let mut client = None;
            let mut buf = [0u8; 9000];
            while !s.load(Ordering::Relaxed) {
                if let Ok((n, from)) = front.recv_from(&mut buf) {
                    client = Some(from);
                    f.fetch_add(1, Ordering::SeqCst);
                    back.send_to(&buf[..n], server).unwrap();
                }
                if let Ok((n, _)) = back.recv_from(&mut buf) {
                    let is_ack = decode(&buf[..n]).map(|m| m.kind() == Kind::Ack).unwrap_or(false);
                    if is_ack && d.load(Ordering::SeqCst) < drop_acks {
                        d.fetch_add(1, Ordering::SeqCst);
                        continue;
                    }
                    front.send_to(&buf[..n], client.unwrap()).unwrap();
                }
            }
        });
        LossyProxy { addr, dropped, forwarded_requests, stop, thread: Some(thread) }
    }
}

impl Drop for LossyProxy {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        self.thread.take().unwrap().join().unwrap();
    }
}

fn rule(text: &str) -> Vec<String> {
    vec![text.to_string()]
}

#[test]
fn request_confirm_round_trip_is_fast() {
    let clock = ManualClock::new(SystemClock.now());
    let server = start(&clock, Duration::from_secs(1));
    let client = Client::connect(server.local_addr()).unwrap();
    let p = PacketKey::tcp_to(subnet(1), 100);
    let started = Instant::now();
    let RequestReply::Full { update_id } =
        client.request(STAFF, 600, &rule(CAMPUS_EXCEPTIONS[0].2)).unwrap()
    else {
        panic!("expected a full grant")
    };
    assert_eq!(server.reader().lookup(&p), Decision::Reject, "request alone must not open the filter");
    assert_eq!(client.confirm(STAFF, update_id).unwrap(), "active");
    assert_eq!(server.reader().lookup(&p), Decision::Accept);
    assert!(started.elapsed() < Duration::from_secs(5));

    assert_eq!(client.delete(STAFF, update_id).unwrap(), "deleted");
    assert_eq!(server.reader().lookup(&p), Decision::Reject);
    match client.delete(STAFF, update_id) {
        Err(ClientError::Server { reason, .. }) => assert_eq!(reason, "unknown update id"),
        other => panic!("unexpected {other:?}"),
    }
    let engine = server.stop().unwrap().into_engine();
    assert_eq!(engine.phi_a(), engine.phi_b());
}

#[test]
fn reject_and_partial_over_the_wire() {
    let clock = ManualClock::new(SystemClock.now());
    let server = start(&clock, Duration::from_secs(1));
    let client = Client::connect(server.local_addr()).unwrap();
    assert!(matches!(client.request(STUDENT, 600, &rule(CAMPUS_EXCEPTIONS[3].2)).unwrap(), RequestReply::Reject { .. }));
    let RequestReply::Partial { rows, .. } = client.request(STAFF, 600, &rule(CAMPUS_EXCEPTIONS[1].2)).unwrap() else {
        panic!("expected a partial grant")
    };
    let table = dynacl::compile::GrantTable::from_lines(&rows).unwrap();
    assert!((0..=87).all(|port| !table.matches(&PacketKey::tcp_to(subnet(1), port))));
    assert!((88..=90).all(|port| table.matches(&PacketKey::tcp_to(subnet(1), port))));
    match client.confirm(9999, 1) {
        Err(ClientError::Server { reason, .. }) => assert_eq!(reason, "unknown user"),
        other => panic!("unexpected {other:?}"),
    }
    server.stop().unwrap();
}

#[test]
fn confirm_survives_a_lost_ack() {
    let clock = ManualClock::new(SystemClock.now());
    let server = start(&clock, Duration::from_secs(1));
    let proxy = LossyProxy::new(server.local_addr(), 1);
    let client = Client::connect(proxy.addr).unwrap().with_timeout(Duration::from_millis(150));
    let RequestReply::Full { update_id } = client.request(STAFF, 600, &rule(CAMPUS_EXCEPTIONS[0].2)).unwrap() else {
        panic!("expected a full grant")
    };
    assert_eq!(client.confirm(STAFF, update_id).unwrap(), "active");
    assert_eq!(proxy.dropped.load(Ordering::SeqCst), 1);
    // request + two confirms went through the relay
    assert_eq!(proxy.forwarded_requests.load(Ordering::SeqCst), 3);
    assert_eq!(server.reader().lookup(&PacketKey::tcp_to(subnet(1), 100)), Decision::Accept);
    drop(proxy);
    let mut s = server.stop().unwrap();
    assert_eq!(s.engine().active_records().count(), 1);
    s.engine_mut().verify().unwrap();
}

#[test]
fn exhausted_retries_time_out() {
    let clock = ManualClock::new(SystemClock.now());
    let server = start(&clock, Duration::from_secs(1));
    let proxy = LossyProxy::new(server.local_addr(), usize::MAX);
    let client = Client::connect(proxy.addr).unwrap().with_timeout(Duration::from_millis(50)).with_retries(2);
    let RequestReply::Full { update_id } = client.request(STAFF, 600, &rule(CAMPUS_EXCEPTIONS[0].2)).unwrap() else {
        panic!()
    };
    assert!(matches!(client.confirm(STAFF, update_id), Err(ClientError::Timeout { attempts: 3 })));
    drop(proxy);
    server.stop().unwrap();
}

#[test]
fn expiry_under_controlled_clock() {
    let clock = ManualClock::new(SystemClock.now());
    let interval = Duration::from_millis(50);
    let server = start(&clock, interval);
    let client = Client::connect(server.local_addr()).unwrap();
    let p = PacketKey::tcp_to(subnet(129), 16000);
    let RequestReply::Full { update_id } = client.request(STUDENT, 30, &rule(CAMPUS_EXCEPTIONS[4].2)).unwrap() else {
        panic!()
    };
    client.confirm(STUDENT, update_id).unwrap();
    assert_eq!(server.reader().lookup(&p), Decision::Accept);

    clock.advance(Duration::from_secs(20));
    client.renew(STUDENT, update_id, 30).unwrap();
    clock.advance(Duration::from_secs(15));
    std::thread::sleep(interval * 4);
    assert_eq!(server.reader().lookup(&p), Decision::Accept, "renewed record expired at its old deadline");

    clock.advance(Duration::from_secs(15));
    let t = Instant::now();
    while server.reader().lookup(&p) == Decision::Accept {
        assert!(t.elapsed() < interval + Duration::from_secs(1));
        std::thread::sleep(Duration::from_millis(5));
    }
    match client.renew(STUDENT, update_id, 30) {
        Err(ClientError::Server { reason, .. }) => assert_eq!(reason, "unknown update id"),
        other => panic!("unexpected {other:?}"),
    }
    let before = clock.now();
    assert!(server.stop().unwrap().engine().next_deadline().is_none());
    assert_eq!(clock.now(), before);
}

#[test]
fn stale_confirm_is_expired() {
    let clock = ManualClock::new(SystemClock.now());
    let server = start(&clock, Duration::from_secs(3600));
    let client = Client::connect(server.local_addr()).unwrap();
    let RequestReply::Full { update_id } = client.request(STAFF, 600, &rule(CAMPUS_EXCEPTIONS[0].2)).unwrap() else {
        panic!()
    };
    clock.advance(Duration::from_secs(31));
    match client.confirm(STAFF, update_id) {
        Err(ClientError::Server { reason, .. }) => assert_eq!(reason, "expired"),
        other => panic!("unexpected {other:?}"),
    }
    server.stop().unwrap();
}

#[test]
fn replies_go_to_the_sender() {
    let clock = ManualClock::new(SystemClock.now());
    let server = start(&clock, Duration::from_secs(1));
    let a = Client::connect(server.local_addr()).unwrap();
    let b = Client::connect(server.local_addr()).unwrap().with_timeout(Duration::from_millis(100)).with_retries(0);
    let RequestReply::Full { update_id } = a.request(STAFF, 600, &rule(CAMPUS_EXCEPTIONS[0].2)).unwrap() else {
        panic!()
    };
    // the student cannot touch the staff member's update
    match b.confirm(STUDENT, update_id) {
        Err(ClientError::Server { reason, .. }) => assert_eq!(reason, "not owner"),
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(a.confirm(STAFF, update_id).unwrap(), "active");
    server.stop().unwrap();
}
