use std::io::{BufRead, BufReader};
use std::net::{Ipv4Addr, UdpSocket};
use std::path::PathBuf;
use std::process::{Child, Command, Output, Stdio};
use std::sync::Arc;
use std::time::Duration;

use dynacl::acl::{PacketKey, PROTO_TCP, PROTO_UDP};
use dynacl::clock::ManualClock;
use dynacl::engine::{Engine, EngineConfig};

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn cfg(name: &str) -> String {
    configs().join(name).to_str().unwrap().to_string()
}

fn dynacl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dynacl"))
        .args(args)
        .env_remove("DYNACL_SERVER")
        .env_remove("DYNACL_USER")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

struct ServerProcess {
    child: Child,
    addr: String,
}

impl ServerProcess {
    fn start(extra: &[&str]) -> ServerProcess {
        let (acl, groups, users) = (cfg("campus.acl"), cfg("campus.groups"), cfg("campus.users"));
        let mut args = vec!["serve", "--acl", &acl, "--groups", &groups, "--users", &users, "--bind", "127.0.0.1", "--port", "0"];
        args.extend_from_slice(extra);
        let mut child = Command::new(env!("CARGO_BIN_EXE_dynacl"))
            .args(&args)
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .unwrap();
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
        let addr = line.trim().strip_prefix("listening on ").expect("listening line").to_string();
        ServerProcess { child, addr }
    }

    fn run(&self, verb: &str, user: u32, args: &[&str]) -> Output {
        let user = user.to_string();
        let mut all = vec![verb, "--server", &self.addr, "--user", &user];
        all.extend_from_slice(args);
        dynacl(&all)
    }
}

impl Drop for ServerProcess {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn update_id(out: &str) -> String {
    out.split_whitespace().skip_while(|w| *w != "update").nth(1).expect("update id").to_string()
}

const EX_0_0: &str = "accept tcp 0.0.0.0 255.255.255.255 128.128.128.1 0.0.0.0 eq 100";
const EX_0_1: &str = "accept tcp 0.0.0.0 255.255.255.255 128.128.128.1 0.0.0.0 range 0 90";
const EX_1_0: &str = "accept tcp 0.0.0.0 255.255.255.255 128.128.128.2 0.0.0.0 eq 100";

#[test]
fn check_accepts_campus_config() {
    let o = dynacl(&["check", "--acl", &cfg("campus.acl"), "--groups", &cfg("campus.groups"), "--users", &cfg("campus.users")]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains(": 9 rules"), "{out}");
    assert!(out.contains("group 0 (staff): may override 2 of 6 deny rules"), "{out}");
    assert!(out.contains("3 users"), "{out}");
}

#[test]
fn check_reports_errors() {
    let dir = tempfile::tempdir().unwrap();
    let acl = dir.path().join("bad.acl");
    std::fs::write(&acl, "accept tcp any any\ndeny 9 tcp any any\n").unwrap();
    let o = dynacl(&["check", "--acl", acl.to_str().unwrap(), "--groups", &cfg("campus.groups")]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("bad.acl:2:6: group id 9 out of range"), "{}", stderr(&o));

    let o = dynacl(&["check", "--acl", "/definitely/missing.acl", "--groups", &cfg("campus.groups")]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("missing.acl"));

    let o = dynacl(&["check", "--acl", &cfg("campus.acl")]);
    assert_eq!(code(&o), 1);
}

fn query(extra: &[&str]) -> Output {
    let (acl, groups) = (cfg("campus.acl"), cfg("campus.groups"));
    let mut args = vec!["query", "--acl", &acl, "--groups", &groups];
    args.extend_from_slice(extra);
    dynacl(&args)
}

#[test]
fn query_explains_decisions() {
    let o = query(&["--proto", "tcp", "--dst", "128.128.128.15", "--dport", "88"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).starts_with("Accept\n  base rule 1:"), "{}", stdout(&o));

    let o = query(&["--proto", "tcp", "--dst", "128.128.128.128", "--dport", "9"]);
    assert!(stdout(&o).starts_with("Reject\n  base rule 5 (mandatory):"), "{}", stdout(&o));

    let staff = format!("0:{}", cfg("staff.exceptions"));
    let o = query(&["--exception", &staff, "--dst", "128.128.128.1", "--dport", "90"]);
    let out = stdout(&o);
    assert!(out.starts_with("Accept\n"), "{out}");
    assert!(out.contains("granted by group 0 update"), "{out}");
    assert!(out.contains("rule 6 (labels 0), rule 9 (labels 2)"), "{out}");

    let o = query(&["--exception", &staff, "--dst", "128.128.128.1", "--dport", "87"]);
    assert!(stdout(&o).starts_with("Reject\n"));
}

#[test]
fn query_on_empty_list_rejects() {
    let dir = tempfile::tempdir().unwrap();
    let acl = dir.path().join("empty.acl");
    std::fs::write(&acl, "# nothing\n").unwrap();
    let o = dynacl(&["query", "--acl", acl.to_str().unwrap(), "--groups", &cfg("campus.groups"), "--dst", "10.0.0.1"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), "Reject\n  no base rule matches (default reject)\n");
}

#[test]
fn query_agrees_with_engine() {
    let acl = std::fs::read_to_string(configs().join("campus.acl")).unwrap();
    let groups = std::fs::read_to_string(configs().join("campus.groups")).unwrap();
    let engine = Engine::load(&acl, &groups, EngineConfig::default(), Arc::new(ManualClock::default())).unwrap();
    for (proto, last, port) in [("tcp", 15, 88), ("tcp", 15, 89), ("tcp", 3, 32000), ("udp", 3, 32000), ("tcp", 200, 16000), ("tcp", 200, 88)] {
        let dst = Ipv4Addr::new(128, 128, 128, last);
        let o = query(&["--proto", proto, "--dst", &dst.to_string(), "--dport", &port.to_string()]);
        let n = if proto == "tcp" { PROTO_TCP } else { PROTO_UDP };
        let expect = engine.match_packet(&PacketKey::new(n, Ipv4Addr::UNSPECIFIED, 0, dst, port));
        assert!(stdout(&o).starts_with(&format!("{expect}\n")), "{proto} {dst}:{port}: {}", stdout(&o));
    }
    let o = query(&["--proto", "ip", "--dst", "1.1.1.1"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn dump_is_deterministic() {
    let (acl, groups, staff) = (cfg("campus.acl"), cfg("campus.groups"), format!("0:{}", cfg("staff.exceptions")));
    let args = ["dump", "--acl", &acl, "--groups", &groups, "--exception", &staff];
    let (a, b) = (dynacl(&args), dynacl(&args));
    assert_eq!(code(&a), 0);
    assert_eq!(stdout(&a), stdout(&b));
    assert!(stdout(&a).contains("granted in part"));
    assert!(stdout(&a).contains("active: 1"));
    let dot = dynacl(&["dump", "--acl", &acl, "--groups", &groups, "--dot"]);
    assert!(stdout(&dot).starts_with("digraph"));
}

#[test]
fn request_and_confirm_over_udp() {
    let server = ServerProcess::start(&[]);
    let o = server.run("request", 100, &["--rule", EX_0_0, "--expiry", "600", "--confirm"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("ALLOW_FULL update "), "{out}");
    assert!(out.contains("ACK update") && out.ends_with(": active\n"), "{out}");

    let id = update_id(&out);
    let o = server.run("renew", 100, &["--id", &id, "--expiry", "60"]);
    assert!(stdout(&o).contains(": renewed"), "{}", stdout(&o));
    let o = server.run("delete", 101, &["--id", &id]);
    assert_eq!(code(&o), 4);
    assert_eq!(stdout(&o), "ERROR: not owner\n");
    let o = server.run("delete", 100, &["--id", &id]);
    assert_eq!(code(&o), 0);
    let o = server.run("delete", 100, &["--id", &id]);
    assert_eq!(code(&o), 4);
    assert_eq!(stdout(&o), "ERROR: unknown update id\n");
}

#[test]
fn partial_and_reject_replies() {
    let server = ServerProcess::start(&[]);
    let o = server.run("request", 100, &["--rule", EX_0_1]);
    let out = stdout(&o);
    assert!(out.starts_with("ALLOW_PARTIAL update "), "{out}");
    assert!(out.contains("dport 89-90") || out.contains("dport 88-90"), "{out}");
    assert!(!out.contains("dport 0-"), "{out}");

    let o = server.run("request", 101, &["--rule", EX_1_0]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).starts_with("REJECT: "), "{}", stdout(&o));

    let o = server.run("request", 999, &["--rule", EX_1_0]);
    assert_eq!(code(&o), 4);
    assert_eq!(stdout(&o), "ERROR: unknown user\n");
}

#[test]
fn stale_confirm_prints_expired() {
    let server = ServerProcess::start(&["--confirm-window", "0"]);
    let o = server.run("request", 100, &["--rule", EX_0_0]);
    let id = update_id(&stdout(&o));
    std::thread::sleep(Duration::from_millis(20));
    let o = server.run("confirm", 100, &["--id", &id]);
    assert_eq!(code(&o), 4);
    assert_eq!(stdout(&o), "ERROR: expired\n");
}

#[test]
fn event_log_records_every_step() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("events.jsonl");
    let server = ServerProcess::start(&["--event-log", log.to_str().unwrap()]);
    let o = server.run("request", 100, &["--rule", EX_0_0, "--confirm"]);
    assert_eq!(code(&o), 0);
    drop(server);
    let text = std::fs::read_to_string(&log).unwrap();
    let events: Vec<&str> = text.lines().collect();
    assert_eq!(events.len(), 2, "{text}");
    assert!(events[0].contains("\"event\":\"request\"") && events[0].contains("allow-full"));
    assert!(events[1].contains("\"event\":\"confirm\"") && events[1].contains("\"outcome\":\"active\""));
}

#[test]
fn silent_server_times_out() {
    let silent = UdpSocket::bind("127.0.0.1:0").unwrap();
    let addr = silent.local_addr().unwrap().to_string();
    let o = dynacl(&["confirm", "--server", &addr, "--user", "1", "--id", "1", "--timeout-ms", "50", "--retries", "1"]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("no reply after 2 attempt(s)"), "{}", stderr(&o));
    let o = dynacl(&["request", "--server", &addr, "--user", "1"]);
    assert_eq!(code(&o), 1);
}
