use std::net::IpAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use dynacl::protocol::SourcePrefix;

#[derive(Debug, Parser)]
#[command(name = "dynacl", version, about = "Dynamic IP filtering with group-based exception lists")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the firewall's update server.
    Serve(ServeArgs),
    /// Validate an access list and group hierarchy.
    Check(CheckArgs),
    /// Decide a packet offline and explain the decision.
    Query(QueryArgs),
    /// Ask a server for a temporary exception.
    Request(RequestArgs),
    /// Activate a granted exception.
    Confirm(UpdateArgs),
    /// Remove an active exception.
    Delete(UpdateArgs),
    /// Extend the lifetime of an active exception.
    Renew(RenewArgs),
    /// Print the compiled filter state offline.
    Dump(DumpArgs),
}

#[derive(Debug, Args)]
pub struct StateArgs {
    /// Base access list.
    #[arg(long, env = "DYNACL_ACL")]
    pub acl: PathBuf,
    /// Group hierarchy.
    #[arg(long, env = "DYNACL_GROUPS")]
    pub groups: PathBuf,
    /// Exception list to install for a group, as GROUP:FILE. Repeatable.
    #[arg(long = "exception", value_name = "GROUP:FILE")]
    pub exceptions: Vec<String>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Base access list.
    #[arg(long, env = "DYNACL_ACL")]
    pub acl: PathBuf,
    /// Group hierarchy.
    #[arg(long, env = "DYNACL_GROUPS")]
    pub groups: PathBuf,
    /// User directory (`user <id> <group>` lines).
    #[arg(long, env = "DYNACL_USERS")]
    pub users: PathBuf,
    /// Address to bind.
    #[arg(long, env = "DYNACL_BIND", default_value = "0.0.0.0")]
    pub bind: IpAddr,
    /// UDP port to listen on; 0 picks a free port.
    #[arg(long, env = "DYNACL_PORT", default_value_t = dynacl::protocol::DEFAULT_PORT)]
    pub port: u16,
    /// Seconds a granted request may wait for its confirm.
    #[arg(long, env = "DYNACL_CONFIRM_WINDOW", default_value_t = 30)]
    pub confirm_window: u64,
    /// Seconds between expiry sweeps.
    #[arg(long, env = "DYNACL_PURGE_INTERVAL", default_value_t = 1)]
    pub purge_interval: u64,
    /// Accept datagrams only from these networks (a.b.c.d/len). Repeatable;
    /// default is any source.
    #[arg(long = "allow-source", env = "DYNACL_ALLOW_SOURCE", value_delimiter = ',')]
    pub allow_sources: Vec<SourcePrefix>,
    /// Append JSON event records to this file.
    #[arg(long, env = "DYNACL_EVENT_LOG")]
    pub event_log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long)]
    pub acl: PathBuf,
    #[arg(long)]
    pub groups: PathBuf,
    /// Also validate a user directory.
    #[arg(long)]
    pub users: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    #[command(flatten)]
    pub state: StateArgs,
    /// Protocol name (tcp, udp, icmp) or number.
    #[arg(long, default_value = "tcp")]
    pub proto: String,
    #[arg(long, default_value = "0.0.0.0")]
    pub src: std::net::Ipv4Addr,
    #[arg(long, default_value_t = 0)]
    pub sport: u16,
    #[arg(long)]
    pub dst: std::net::Ipv4Addr,
    #[arg(long, default_value_t = 0)]
    pub dport: u16,
}

#[derive(Debug, Args)]
pub struct DumpArgs {
    #[command(flatten)]
    pub state: StateArgs,
    /// Print the accept function as Graphviz instead.
    #[arg(long)]
    pub dot: bool,
}

#[derive(Debug, Args)]
pub struct ClientArgs {
    /// Server address.
    #[arg(long, env = "DYNACL_SERVER", default_value = "127.0.0.1:7997")]
    pub server: String,
    /// Your user id.
    #[arg(long, env = "DYNACL_USER")]
    pub user: u32,
    /// Milliseconds to wait for each reply.
    #[arg(long, default_value_t = 2000)]
    pub timeout_ms: u64,
    /// Resends of confirm, delete and renew after a timeout.
    #[arg(long, default_value_t = 3)]
    pub retries: u32,
}

#[derive(Debug, Args)]
pub struct RequestArgs {
    #[command(flatten)]
    pub client: ClientArgs,
    /// Accept rule to request. Repeatable.
    #[arg(long = "rule")]
    pub rules: Vec<String>,
    /// File of accept rules, one per line.
    #[arg(long)]
    pub rules_file: Option<PathBuf>,
    /// Lifetime in seconds once confirmed.
    #[arg(long, default_value_t = 3600)]
    pub expiry: u32,
    /// Confirm straight away when everything was granted.
    #[arg(long)]
    pub confirm: bool,
}

#[derive(Debug, Args)]
pub struct UpdateArgs {
    #[command(flatten)]
    pub client: ClientArgs,
    /// Update id as printed by `request` (hex).
    #[arg(long, value_parser = parse_update_id)]
    pub id: u64,
}

#[derive(Debug, Args)]
pub struct RenewArgs {
    #[command(flatten)]
    pub update: UpdateArgs,
    /// New lifetime in seconds, counted from now.
    #[arg(long)]
    pub expiry: u32,
}

pub fn parse_update_id(s: &str) -> Result<u64, String> {
    let digits = s.strip_prefix("0x").unwrap_or(s);
    u64::from_str_radix(digits, 16).map_err(|e| format!("bad update id `{s}`: {e}"))
}
