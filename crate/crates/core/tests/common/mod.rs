#![allow(dead_code)]

use std::io::Cursor;

use proptest::prelude::*;
use tzsim_core::backhaul::{BackhaulChain, StateIndex, DEFAULT_CLASSES, NUM_STATES};
use tzsim_core::trust_zone::{
    replay_trace, write_jsonl, AuditOp, AuditRecord, AuthOutcome, BackhaulReport, EventOutcome, TrustStatus,
    TrustZoneState, TzConfig, TzEvent, TzMode,
};

/// The published reference transition matrix, typed in independently of
/// the library constant.
pub const PUBLISHED_MATRIX: [[f64; 9]; 9] = [
    [0.8, 0.1999, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0001],
    [0.5, 0.49, 0.0099, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0001],
    [0.0, 0.25, 0.5, 0.15, 0.0, 0.0999, 0.0, 0.0, 0.0001],
    [0.0, 0.0, 0.25, 0.5, 0.15, 0.0, 0.0999, 0.0, 0.0001],
    [0.0, 0.0, 0.0, 0.2, 0.6, 0.0, 0.0, 0.1, 0.1],
    [0.0, 0.5, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.5, 0.5, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.5, 0.5, 0.0],
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.3, 0.7],
];

pub fn state(i: u8) -> StateIndex {
    StateIndex::new(i).unwrap()
}

/// Probability of no outage in steps 1..=k by summing over every path of
/// length k.
pub fn enumerate_survival(chain: &BackhaulChain, start: usize, k: usize) -> f64 {
    fn walk(chain: &BackhaulChain, from: usize, left: usize, weight: f64) -> f64 {
        if left == 0 {
            return weight;
        }
        let mut total = 0.0;
        for to in 0..NUM_STATES {
            let p = chain.transition()[from][to];
            if p == 0.0 {
                continue;
            }
            total += walk(chain, to, left - 1, weight * p * chain.cssr_levels()[to]);
        }
        total
    }
    walk(chain, start, k, 1.0)
}

// ---- trust zone event sequences ----

fn report_for(i: u8) -> BackhaulReport {
    BackhaulReport { state: state(i), class: DEFAULT_CLASSES[i as usize - 1] }
}

#[derive(Debug, Clone, Copy)]
pub enum Action {
    Report(u8),
    Auth(u64, bool),
    Handback(usize),
    Depart(u64),
}

pub fn action() -> impl Strategy<Value = Action> {
    prop_oneof![
        2 => (1u8..=9).prop_map(Action::Report),
        5 => (0u64..12, any::<bool>()).prop_map(|(ue, s)| Action::Auth(ue, s)),
        2 => (1usize..4).prop_map(Action::Handback),
        1 => (0u64..12).prop_map(Action::Depart),
    ]
}

/// Actions paired with a step increment of 0 or 1.
pub fn tz_sequence(max_len: usize) -> impl Strategy<Value = Vec<(Action, u64)>> {
    prop::collection::vec((action(), 0u64..2), 1..max_len)
}

fn to_event(action: Action, step: u64) -> TzEvent {
    match action {
        Action::Report(i) => TzEvent::BackhaulReport { step, report: report_for(i) },
        Action::Auth(ue, synced) => TzEvent::Authenticate { step, ue, synced },
        Action::Handback(batch) => TzEvent::CompleteHandback { step, batch },
        Action::Depart(ue) => TzEvent::Depart { step, ue },
    }
}

fn count_ops(records: &[AuditRecord], op: AuditOp) -> usize {
    records.iter().filter(|r| r.op == op).count()
}

/// Applies a random event sequence, checking every safety property after
/// each event, then replays the accepted events through the JSON-lines trace
/// format and compares final states.
pub fn check_tz_sequence(seq: &[(Action, u64)]) -> Result<(), TestCaseError> {
    let config = TzConfig::default();
    let mut tz = TrustZoneState::new(config.clone());
    let mut trace = Vec::new();
    let mut delivered: Vec<AuditRecord> = Vec::new();
    let mut local_attempts = 0usize;
    let mut step = 0u64;

    for &(action, dt) in seq {
        step += dt;
        let event = to_event(action, step);
        let before = tz.clone();
        let buffered_before = before.audit_export().len();

        let (outcome, flushed) = match event {
            TzEvent::CompleteHandback { batch, .. } => match tz.complete_handback(batch, step) {
                Ok(progress) => (EventOutcome::Mode(tz.mode()), progress.flushed),
                Err(_) => {
                    prop_assert_ne!(before.mode(), TzMode::HandbackInProgress);
                    prop_assert_eq!(&tz, &before, "rejected hand-back must not change state");
                    continue;
                }
            },
            _ => (tz.apply(&event).unwrap(), None),
        };
        trace.push(event.to_trace_line(outcome));

        if let (TzEvent::Authenticate { .. }, TzMode::LocalSecurity) = (event, before.mode()) {
            if !matches!(outcome, EventOutcome::Auth(AuthOutcome::AlreadyTrusted(_))) {
                local_attempts += 1;
            }
        }

        // audit records produced by this event
        let fresh: Vec<AuditRecord> = match &flushed {
            Some(all) => {
                prop_assert_eq!(tz.mode(), TzMode::CentralSecurity);
                prop_assert_eq!(&all[..buffered_before], before.audit_export());
                all[buffered_before..].to_vec()
            }
            None => {
                prop_assert_eq!(&tz.audit_export()[..buffered_before], before.audit_export(), "buffer is append-only");
                tz.audit_export()[buffered_before..].to_vec()
            }
        };
        if before.mode() == TzMode::CentralSecurity {
            prop_assert!(fresh.is_empty(), "central mode never writes audit records");
        }
        if let Some(all) = flushed {
            delivered.extend(all);
        }

        // mode and queue invariants
        prop_assert_eq!(tz.laa_active(), tz.mode() != TzMode::CentralSecurity);
        if tz.handback_queue().len() > 0 {
            prop_assert_eq!(tz.mode(), TzMode::HandbackInProgress);
        }
        let mode_changed = tz.mode() != before.mode();
        if mode_changed {
            let via_allowed = matches!(event, TzEvent::BackhaulReport { .. } | TzEvent::CompleteHandback { .. });
            prop_assert!(via_allowed, "mode changed by {:?}", event);
        }

        // trust transitions
        for (ue, entry) in tz.ledger() {
            let was = before.status(ue);
            let now = entry.status;
            if now == TrustStatus::TemporarilyTrusted {
                prop_assert!(tz.mode() != TzMode::CentralSecurity, "temporary trust outlived hand-back");
            }
            if now == TrustStatus::TemporarilyTrusted && was != now {
                prop_assert!(
                    fresh.iter().any(|r| r.ue == ue && r.step == step && r.op == AuditOp::LocalAuthSuccess),
                    "ue {} trusted without a LocalAuthSuccess record",
                    ue
                );
            }
            if was == TrustStatus::TemporarilyTrusted && now == TrustStatus::CentrallyAuthenticated {
                let via_handback = matches!(event, TzEvent::CompleteHandback { .. });
                prop_assert!(via_handback, "trust converted by {:?}", event);
                prop_assert!(
                    fresh.iter().any(|r| r.ue == ue && r.op == AuditOp::HandbackReauth),
                    "ue {} converted without a HandbackReauth record",
                    ue
                );
            }
        }
        if tz.mode() == TzMode::CentralSecurity {
            prop_assert!(tz.ledger().all(|(_, e)| e.status != TrustStatus::TemporarilyTrusted));
        }
    }

    // completeness and ordering over everything ever written
    let mut all = delivered.clone();
    all.extend_from_slice(tz.audit_export());
    prop_assert_eq!(
        count_ops(&all, AuditOp::LocalAuthSuccess) + count_ops(&all, AuditOp::LocalAuthDenied),
        local_attempts
    );
    for pair in all.windows(2) {
        prop_assert!((pair[0].step, pair[0].seq) < (pair[1].step, pair[1].seq), "audit order");
    }

    // replay through the text format
    let mut text = Vec::new();
    write_jsonl(&mut text, &trace).unwrap();
    let mut replayed = TrustZoneState::new(config);
    let applied = replay_trace(&mut replayed, Cursor::new(text)).map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert_eq!(applied, trace.len());
    prop_assert_eq!(replayed, tz);
    Ok(())
}

// ---- independent mobility integrator ----

/// HIGH-class scaling factors from the published speed table, ordered EC, I, II, III, IV,
/// typed in independently of the library.
pub const HIGH_FACTORS: [f64; 5] = [0.2, 1.0, 0.9, 0.85, 0.8];

fn area_of(x: f64, y: f64) -> usize {
    if x * x + y * y <= 2000.0 * 2000.0 {
        0
    } else if x >= 0.0 && y >= 0.0 {
        1
    } else if x < 0.0 && y >= 0.0 {
        2
    } else if x < 0.0 {
        3
    } else {
        4
    }
}

/// Moves a point for one 600 s step in 10 s sub-steps with the given
/// per-area factors; `None` once it leaves the square.
pub fn move_one_step(x: f64, y: f64, heading: f64, basic: f64, factors: &[f64; 5]) -> Option<(f64, f64)> {
    let (mut x, mut y) = (x, y);
    let (c, s) = (heading.cos(), heading.sin());
    for _ in 0..60 {
        let v = basic * factors[area_of(x, y)];
        x += v * 10.0 * c;
        y += v * 10.0 * s;
        if x.abs() > 4000.0 || y.abs() > 4000.0 {
            return None;
        }
    }
    Some((x, y))
}

pub fn in_ec(x: f64, y: f64) -> bool {
    x * x + y * y <= 2000.0 * 2000.0
}
