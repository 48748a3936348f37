mod common;

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use common::*;
use dynacl::acl::{parse_exception_list, GroupId, PacketKey, Rule};
use dynacl::clock::ManualClock;
use dynacl::engine::{Classification, Engine, UpdateRequest, UserId};
use dynacl::oracle::{oracle_accept, OracleConfig};
use proptest::prelude::*;
use rand::Rng;

fn request(group: u16, rules: Vec<Rule>) -> UpdateRequest {
    UpdateRequest { owner: UserId(group as u32), group: GroupId(group), expiry: Duration::from_secs(600), rules }
}

#[test]
fn worked_example_at_engine_level() {
    let clock = ManualClock::default();
    let mut engine = campus_engine(&clock, seeded_config(3));
    let mut oracle = OracleConfig::new(engine.base().clone(), engine.hierarchy().clone());
    let mut outcomes = Vec::new();
    for (label, group, text) in CAMPUS_EXCEPTIONS {
        let rules = parse_exception_list(text).unwrap();
        oracle.exceptions[group as usize].extend(rules.clone());
        let c = engine.classify_request(request(group, rules)).unwrap();
        outcomes.push((label, match &c {
            Classification::Full { .. } => "full",
            Classification::Partial { .. } => "partial",
            Classification::RejectAll => "reject",
        }));
        if let Some(id) = c.id() {
            engine.confirm(id).unwrap();
        }
    }
    assert_eq!(
        outcomes,
        [("0.0", "full"), ("0.1", "partial"), ("0.2", "reject"), ("1.0", "reject"), ("1.1", "full"), ("1.2", "full"), ("2.0", "reject"), ("2.1", "full")]
    );
    let mut g = Gen::new(5);
    let conds: Vec<_> = oracle.base.rules.iter().chain(oracle.exceptions.iter().flatten()).map(|r| r.condition).collect();
    for p in g.boundary_packets(&conds).into_iter().chain((0..20_000).map(|_| g.packet(&conds))) {
        assert_eq!(engine.match_packet(&p).is_accept(), oracle_accept(&oracle, &p), "{p}");
    }
}

#[test]
fn duplicate_confirm_is_handle_identical() {
    let clock = ManualClock::default();
    let mut engine = campus_engine(&clock, seeded_config(4));
    let rules = parse_exception_list(CAMPUS_EXCEPTIONS[1].2).unwrap();
    let id = engine.classify_request(request(0, rules)).unwrap().id().unwrap();
    engine.confirm(id).unwrap();
    let (phi, e0, recomputes) = (engine.phi_a(), engine.exception(GroupId(0)), engine.stats().recomputes);
    engine.confirm(id).unwrap();
    assert_eq!((engine.phi_a(), engine.exception(GroupId(0)), engine.stats().recomputes), (phi, e0, recomputes));
}

#[test]
fn readers_see_consistent_snapshots_during_updates() {
    let clock = ManualClock::default();
    let mut engine = campus_engine(&clock, seeded_config(6));
    let reader = engine.reader();
    let stop = Arc::new(AtomicBool::new(false));
    // ports 200..260 on machine 1 open one at a time; a snapshot never
    // shows port k open while k - 1 is closed
    let readers: Vec<_> = (0..3)
        .map(|_| {
            let (reader, stop) = (reader.clone(), stop.clone());
            std::thread::spawn(move || {
                let mut seen = 0u64;
                while !stop.load(Ordering::Relaxed) {
                    let snap = reader.snapshot();
                    let open: Vec<bool> =
                        (200..260).map(|port| snap.lookup(&PacketKey::tcp_to(subnet(1), port)).is_accept()).collect();
                    let first_closed = open.iter().position(|o| !o).unwrap_or(open.len());
                    assert!(open[first_closed..].iter().all(|o| !o), "torn snapshot at epoch {}", snap.epoch());
                    seen = seen.max(snap.epoch());
                }
                seen
            })
        })
        .collect();
    for port in 200..260 {
        let rules = vec![format!("accept tcp any host 128.128.128.1 eq {port}").parse().unwrap()];
        let id = engine.classify_request(request(0, rules)).unwrap().id().unwrap();
        engine.confirm(id).unwrap();
    }
    std::thread::sleep(Duration::from_millis(20));
    stop.store(true, Ordering::Relaxed);
    for r in readers {
        assert_eq!(r.join().unwrap(), engine.stats().publications);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn engine_matches_scan(seed in any::<u64>(), groups in 1usize..=5, len in 0usize..=20, requests in 0usize..=6) {
        let mut g = Gen::new(seed);
        let base = g.base(len, groups);
        let hierarchy = g.hierarchy(groups);
        let clock = ManualClock::default();
        let mut engine = Engine::new(base.clone(), hierarchy.clone(), seeded_config(seed), Arc::new(clock)).unwrap();
        let mut oracle = OracleConfig::new(base.clone(), hierarchy);
        let mut conds = conditions(&base.rules);
        for _ in 0..requests {
            let group = g.rng.gen_range(0..groups as u16);
            let rules: Vec<Rule> = (0..g.rng.gen_range(1..=3)).map(|_| Rule::accept(g.exception(&base))).collect();
            conds.extend(rules.iter().map(|r| r.condition));
            let before = engine.phi_a();
            let c = engine.classify_request(request(group, rules.clone())).unwrap();
            prop_assert_eq!(engine.phi_a(), before);
            if let Some(id) = c.id() {
                engine.confirm(id).unwrap();
            }
            oracle.exceptions[group as usize].extend(rules);
        }
        engine.verify().unwrap();
        for p in g.boundary_packets(&conds).into_iter().chain((0..2000).map(|_| g.packet(&conds))) {
            prop_assert_eq!(engine.match_packet(&p).is_accept(), oracle_accept(&oracle, &p), "{}", p);
        }
        // the engine's own view of its exceptions gives the same answers
        let (view, _) = engine.oracle_view();
        for _ in 0..500 {
            let p = g.packet(&conds);
            prop_assert_eq!(oracle_accept(&view, &p), oracle_accept(&oracle, &p));
        }
    }

    #[test]
    fn partial_grant_table_is_exact(seed in any::<u64>()) {
        let mut g = Gen::new(seed);
        let base = g.base(12, 3);
        let hierarchy = g.hierarchy(3);
        let mut engine = Engine::new(base.clone(), hierarchy, seeded_config(seed), Arc::new(ManualClock::default())).unwrap();
        let c = g.exception(&base);
        let group = GroupId(g.rng.gen_range(0..3));
        let deny = engine.deny_mask(group).unwrap();
        let layout = *engine.layout();
        if let Classification::Partial { table, .. } = engine.classify_request(request(group.0, vec![Rule::accept(c)])).unwrap() {
            let mut conds = conditions(&base.rules);
            conds.push(c);
            let mut packets = g.boundary_packets(&conds);
            packets.extend((0..2000).map(|_| g.packet_in(&c)));
            for p in packets {
                let granted = dynacl::acl::match_condition(&c, &p) && !engine.store().evaluate(deny, &layout.bits(&p));
                prop_assert_eq!(table.matches(&p), granted, "{}", p);
            }
        }
    }
}
