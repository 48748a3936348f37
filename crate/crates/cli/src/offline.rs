//! Subcommands that work on files without a server.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;

use dynacl::acl::{
    parse_acl, parse_exception_list, parse_hierarchy, protocol_from_name, BaseList, GroupHierarchy, GroupId, PacketKey,
    ParseError, Protocol,
};
use dynacl::clock::ManualClock;
use dynacl::engine::{Classification, Engine, EngineConfig, UpdateRequest, UserId};
use dynacl::oracle::explain;
use dynacl::protocol::UserDirectory;

use crate::args::{CheckArgs, DumpArgs, QueryArgs, StateArgs};
use crate::{read_file, CliError, CliResult};

fn located(path: &Path, e: ParseError) -> CliError {
    CliError::Config(format!("{}:{}:{}: {}", path.display(), e.line, e.column, e.kind))
}

fn load_inputs(acl: &Path, groups: &Path) -> Result<(BaseList, GroupHierarchy), CliError> {
    let hierarchy = parse_hierarchy(&read_file(groups)?).map_err(|e| located(groups, e))?;
    let base = parse_acl(&read_file(acl)?, hierarchy.len()).map_err(|e| located(acl, e))?;
    Ok((base, hierarchy))
}

fn labels(set: &BTreeSet<GroupId>) -> String {
    if set.is_empty() {
        return "none".into();
    }
    set.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
}

pub fn check(a: CheckArgs) -> CliResult {
    let (base, hierarchy) = load_inputs(&a.acl, &a.groups)?;
    println!("{}: {} rules", a.acl.display(), base.len());
    println!("{}: {} groups", a.groups.display(), hierarchy.len());
    for j in hierarchy.groups() {
        let supers = hierarchy.supergroups(j).map_err(|e| CliError::Config(e.to_string()))?;
        let denies: Vec<_> = base.rules.iter().filter_map(|r| r.deny_groups()).collect();
        let overridable = denies.iter().filter(|labels| !labels.is_disjoint(&supers)).count();
        println!(
            "  group {j} ({}): may override {overridable} of {} deny rules",
            hierarchy.name(j).unwrap_or("?"),
            denies.len()
        );
    }
    let mandatory = base.rules.iter().filter_map(|r| r.deny_groups()).filter(|l| l.is_empty()).count();
    println!("  mandatory deny rules: {mandatory}");
    if let Some(users) = &a.users {
        let dir = UserDirectory::parse(&read_file(users)?, hierarchy.len()).map_err(|e| located(users, e))?;
        println!("{}: {} users", users.display(), dir.len());
    }
    Ok(())
}

/// Compile the inputs and install every `GROUP:FILE` exception list as one
/// confirmed update. Ids come from a fixed salt so output is reproducible.
fn build_engine(s: &StateArgs) -> Result<(Engine, Vec<String>), CliError> {
    let (base, hierarchy) = load_inputs(&s.acl, &s.groups)?;
    let config = EngineConfig { id_salt: Some(0), ..EngineConfig::default() };
    let mut engine = Engine::new(base, hierarchy, config, Arc::new(ManualClock::default()))
        .map_err(|e| CliError::Config(e.to_string()))?;
    let mut notes = Vec::new();
    for spec in &s.exceptions {
        let (group, path) = spec
            .split_once(':')
            .ok_or_else(|| CliError::Usage(format!("--exception expects GROUP:FILE, got `{spec}`")))?;
        let group: u16 = group.parse().map_err(|_| CliError::Usage(format!("bad group in `{spec}`")))?;
        let path = Path::new(path);
        let rules = parse_exception_list(&read_file(path)?).map_err(|e| located(path, e))?;
        let req = UpdateRequest { owner: UserId(0), group: GroupId(group), expiry: std::time::Duration::MAX, rules };
        let c = engine.classify_request(req).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let what = match &c {
            Classification::Full { id } => format!("update {id} granted in full"),
            Classification::Partial { id, table } => format!("update {id} granted in part ({} rows)", table.len()),
            Classification::RejectAll => "nothing granted".into(),
        };
        if let Some(id) = c.id() {
            engine.confirm(id).map_err(|e| CliError::Config(e.to_string()))?;
        }
        notes.push(format!("exception list {} for group {group}: {what}", path.display()));
    }
    Ok((engine, notes))
}

pub fn query(a: QueryArgs) -> CliResult {
    let protocol = match protocol_from_name(&a.proto) {
        Some(Protocol::Number(n)) => n,
        _ => return Err(CliError::Usage(format!("--proto must name one protocol, got `{}`", a.proto))),
    };
    let (engine, _) = build_engine(&a.state)?;
    let p = PacketKey::new(protocol, a.src, a.sport, a.dst, a.dport);
    let decision = engine.match_packet(&p);
    let (cfg, ids) = engine.oracle_view();
    let why = explain(&cfg, &p);
    if why.accepted != decision.is_accept() {
        return Err(CliError::Config(format!("internal disagreement on {p}; please report")));
    }
    println!("{decision}");
    match (why.base_rule, why.exception) {
        (Some(i), None) => {
            let rule = &cfg.base.rules[i];
            let tag = match rule.deny_groups() {
                Some(l) if l.is_empty() => " (mandatory)",
                _ => "",
            };
            println!("  base rule {}{tag}: {rule}", i + 1);
        }
        (None, None) => println!("  no base rule matches (default reject)"),
        (base, Some((g, k))) => {
            if let Some(i) = base {
                println!("  base rule {}: {}", i + 1, cfg.base.rules[i]);
            }
            println!("  granted by group {g} update {}: {}", ids[g.index()][k], cfg.exceptions[g.index()][k]);
        }
    }
    if !why.matching_denies.is_empty() {
        let denies: Vec<String> =
            why.matching_denies.iter().map(|(i, l)| format!("rule {} (labels {})", i + 1, labels(l))).collect();
        println!("  matching deny rules: {}", denies.join(", "));
    }
    Ok(())
}

pub fn dump(a: DumpArgs) -> CliResult {
    let (engine, notes) = build_engine(&a.state)?;
    if a.dot {
        print!("{}", engine.to_dot());
        return Ok(());
    }
    for n in notes {
        println!("{n}");
    }
    print!("{}", engine.dump());
    Ok(())
}
