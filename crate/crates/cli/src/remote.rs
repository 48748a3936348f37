//! The server and the client verbs.

use std::fs::OpenOptions;
use std::net::{SocketAddr, UdpSocket};
use std::sync::atomic::AtomicBool;
use std::sync::Arc;
use std::time::Duration;

use dynacl::clock::SystemClock;
use dynacl::engine::{Engine, EngineConfig};
use dynacl::events::JsonLinesSink;
use dynacl::protocol::{Client, ClientError, RequestReply, Server, ServerConfig, UserDirectory};

use crate::args::{ClientArgs, RenewArgs, RequestArgs, ServeArgs, UpdateArgs};
use crate::{read_file, CliError, CliResult};

pub fn serve(a: ServeArgs) -> CliResult {
    let acl = read_file(&a.acl)?;
    let groups = read_file(&a.groups)?;
    let config = EngineConfig { confirm_window: Duration::from_secs(a.confirm_window), ..EngineConfig::default() };
    let mut engine = Engine::load(&acl, &groups, config, Arc::new(SystemClock))
        .map_err(|e| CliError::Config(format!("{} / {}: {e}", a.acl.display(), a.groups.display())))?;
    let users = UserDirectory::parse(&read_file(&a.users)?, engine.hierarchy().len())
        .map_err(|e| CliError::Config(format!("{}:{}:{}: {}", a.users.display(), e.line, e.column, e.kind)))?;
    if let Some(path) = &a.event_log {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        engine.set_event_sink(Box::new(JsonLinesSink(file)));
    }
    let socket = UdpSocket::bind(SocketAddr::new(a.bind, a.port))
        .map_err(|e| CliError::Config(format!("cannot bind {}:{}: {e}", a.bind, a.port)))?;
    let local = socket.local_addr().map_err(|e| CliError::Config(e.to_string()))?;
    println!("listening on {local}");
    log::info!(
        "{} base rules, {} groups, {} users; confirm window {}s",
        engine.base().len(),
        engine.hierarchy().len(),
        users.len(),
        a.confirm_window
    );
    let config = ServerConfig { purge_interval: Duration::from_secs(a.purge_interval.max(1)), allowed_sources: a.allow_sources };
    let mut server = Server::new(engine, users, config);
    server.run(&socket, &AtomicBool::new(false)).map_err(|e| CliError::Config(format!("server stopped: {e}")))
}

fn client(a: &ClientArgs) -> Result<Client, CliError> {
    Ok(Client::connect(a.server.as_str())
        .map_err(|e| CliError::Usage(format!("server {}: {e}", a.server)))?
        .with_timeout(Duration::from_millis(a.timeout_ms))
        .with_retries(a.retries))
}

fn failed(e: ClientError) -> CliError {
    match e {
        ClientError::Timeout { .. } => CliError::Timeout(e.to_string()),
        ClientError::Server { reason, .. } => CliError::Server(reason),
        other => CliError::Config(other.to_string()),
    }
}

pub fn request(a: RequestArgs) -> CliResult {
    let mut rules = a.rules.clone();
    if let Some(path) = &a.rules_file {
        rules.extend(
            read_file(path)?
                .lines()
                .map(|l| l.split('#').next().unwrap_or("").trim())
                .filter(|l| !l.is_empty())
                .map(str::to_owned),
        );
    }
    if rules.is_empty() {
        return Err(CliError::Usage("give at least one --rule or a --rules-file".into()));
    }
    let c = client(&a.client)?;
    match c.request(a.client.user, a.expiry, &rules).map_err(failed)? {
        RequestReply::Full { update_id } => {
            println!("ALLOW_FULL update {update_id:016x}");
            if a.confirm {
                let reason = c.confirm(a.client.user, update_id).map_err(failed)?;
                println!("ACK update {update_id:016x}: {reason}");
            }
        }
        RequestReply::Partial { update_id, rows } => {
            println!("ALLOW_PARTIAL update {update_id:016x}");
            for row in rows {
                println!("  {row}");
            }
        }
        RequestReply::Reject { reason } => println!("REJECT: {reason}"),
    }
    Ok(())
}

fn acked(id: u64, r: Result<String, ClientError>) -> CliResult {
    let reason = r.map_err(failed)?;
    println!("ACK update {id:016x}: {reason}");
    Ok(())
}

pub fn confirm(a: UpdateArgs) -> CliResult {
    acked(a.id, client(&a.client)?.confirm(a.client.user, a.id))
}

pub fn delete(a: UpdateArgs) -> CliResult {
    acked(a.id, client(&a.client)?.delete(a.client.user, a.id))
}

pub fn renew(a: RenewArgs) -> CliResult {
    let u = a.update;
    acked(u.id, client(&u.client)?.renew(u.client.user, u.id, a.expiry))
}
