//! Trust Zone state machine.
//!
//! The zone runs in one of three modes. In central mode every authentication
//! goes to the central AAA and always succeeds. A report of a seriously
//! degraded or lost backhaul switches to local mode: UEs that were already
//! centrally authenticated keep their access, while new UEs authenticate
//! against the synced local profile set and either become temporarily trusted
//! or fall back to emergency-only service. Every local operation is written
//! to the audit buffer. Once the backhaul is healthy again, temporarily
//! trusted UEs are re-authenticated centrally in first-come order, a batch per
//! call, after which the zone returns to central mode and flushes its audit
//! buffer.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backhaul::{StateClass, StateIndex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TzMode {
    CentralSecurity,
    LocalSecurity,
    HandbackInProgress,
}

impl TzMode {
    pub fn label(self) -> &'static str {
        match self {
            TzMode::CentralSecurity => "central_security",
            TzMode::LocalSecurity => "local_security",
            TzMode::HandbackInProgress => "handback_in_progress",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        [TzMode::CentralSecurity, TzMode::LocalSecurity, TzMode::HandbackInProgress]
            .into_iter()
            .find(|m| m.label() == s)
    }
}

impl fmt::Display for TzMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrustStatus {
    CentrallyAuthenticated,
    TemporarilyTrusted,
    EmergencyOnly,
    Unauthenticated,
}

impl TrustStatus {
    pub fn label(self) -> &'static str {
        match self {
            TrustStatus::CentrallyAuthenticated => "centrally_authenticated",
            TrustStatus::TemporarilyTrusted => "temporarily_trusted",
            TrustStatus::EmergencyOnly => "emergency_only",
            TrustStatus::Unauthenticated => "unauthenticated",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AuditOp {
    LocalAuthSuccess,
    LocalAuthDenied,
    EmergencyAccessGranted,
    HandbackReauth,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub step: u64,
    pub ue: u64,
    pub op: AuditOp,
    pub detail: String,
    /// Position in the zone's global record order; implied by line order
    /// in the exported form.
    #[serde(skip)]
    pub seq: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LedgerEntry {
    pub status: TrustStatus,
    /// Authenticated centrally before the switch to local mode.
    pub pre_switch: bool,
    /// `(step, seq)` of the local authentication that granted temporary trust.
    pub local_auth: Option<(u64, u64)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TzConfig {
    /// Backhaul states that switch the zone to local mode.
    pub trigger_states: Vec<StateIndex>,
    /// UEs re-authenticated per hand-back call.
    pub handback_batch: usize,
}

impl Default for TzConfig {
    fn default() -> Self {
        TzConfig {
            trigger_states: [4, 5, 9].into_iter().filter_map(StateIndex::new).collect(),
            handback_batch: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BackhaulReport {
    pub state: StateIndex,
    pub class: StateClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuthOutcome {
    CentrallyAuthenticated,
    TemporarilyTrusted,
    EmergencyOnly,
    /// The UE already holds trust; nothing was attempted.
    AlreadyTrusted(TrustStatus),
    /// The UE is queued for hand-back and must wait for re-authentication.
    RetryLater,
}

impl AuthOutcome {
    pub fn label(self) -> &'static str {
        match self {
            AuthOutcome::CentrallyAuthenticated => "centrally_authenticated",
            AuthOutcome::TemporarilyTrusted => "temporarily_trusted",
            AuthOutcome::EmergencyOnly => "emergency_only",
            AuthOutcome::AlreadyTrusted(_) => "already_trusted",
            AuthOutcome::RetryLater => "retry_later",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TzError {
    #[error("hand-back requested while in {0} mode")]
    NotInHandback(TzMode),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HandbackProgress {
    pub reauthenticated: Vec<u64>,
    /// Present when the queue emptied: the audit buffer pushed centrally.
    pub flushed: Option<Vec<AuditRecord>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrustZoneState {
    config: TzConfig,
    mode: TzMode,
    ledger: BTreeMap<u64, LedgerEntry>,
    handback_queue: VecDeque<u64>,
    audit_buffer: Vec<AuditRecord>,
    next_seq: u64,
}

impl TrustZoneState {
    pub fn new(config: TzConfig) -> Self {
        TrustZoneState {
            config,
            mode: TzMode::CentralSecurity,
            ledger: BTreeMap::new(),
            handback_queue: VecDeque::new(),
            audit_buffer: Vec::new(),
            next_seq: 0,
        }
    }

    pub fn config(&self) -> &TzConfig {
        &self.config
    }

    pub fn mode(&self) -> TzMode {
        self.mode
    }

    /// The local access assistant runs whenever the zone is not central.
    pub fn laa_active(&self) -> bool {
        self.mode != TzMode::CentralSecurity
    }

    pub fn status(&self, ue: u64) -> TrustStatus {
        self.ledger.get(&ue).map_or(TrustStatus::Unauthenticated, |e| e.status)
    }

    pub fn entry(&self, ue: u64) -> Option<&LedgerEntry> {
        self.ledger.get(&ue)
    }

    pub fn ledger(&self) -> impl Iterator<Item = (u64, &LedgerEntry)> {
        self.ledger.iter().map(|(&k, v)| (k, v))
    }

    pub fn handback_queue(&self) -> impl ExactSizeIterator<Item = u64> + '_ {
        self.handback_queue.iter().copied()
    }

    fn audit(&mut self, step: u64, ue: u64, op: AuditOp, detail: impl Into<String>) -> u64 {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.audit_buffer.push(AuditRecord { step, ue, op, detail: detail.into(), seq });
        seq
    }

    fn triggers_local(&self, report: BackhaulReport) -> bool {
        report.class == StateClass::Disconnected || self.config.trigger_states.contains(&report.state)
    }

    /// Applies a backhaul status report and returns the resulting mode.
    pub fn on_backhaul_report(&mut self, report: BackhaulReport) -> TzMode {
        match self.mode {
            TzMode::CentralSecurity if self.triggers_local(report) => {
                for entry in self.ledger.values_mut() {
                    entry.pre_switch = entry.status == TrustStatus::CentrallyAuthenticated;
                }
                self.mode = TzMode::LocalSecurity;
            }
            TzMode::LocalSecurity if report.class == StateClass::Healthy => {
                let mut queued: Vec<((u64, u64), u64)> = self
                    .ledger
                    .iter()
                    .filter(|(_, e)| e.status == TrustStatus::TemporarilyTrusted)
                    .map(|(&ue, e)| (e.local_auth.expect("temporary trust has an auth time"), ue))
                    .collect();
                queued.sort_unstable();
                self.handback_queue = queued.into_iter().map(|(_, ue)| ue).collect();
                self.mode = TzMode::HandbackInProgress;
            }
            _ => {}
        }
        self.mode
    }

    pub fn authenticate(&mut self, ue: u64, synced: bool, step: u64) -> AuthOutcome {
        let current = self.status(ue);
        match self.mode {
            TzMode::CentralSecurity => {
                self.ledger.insert(
                    ue,
                    LedgerEntry { status: TrustStatus::CentrallyAuthenticated, pre_switch: false, local_auth: None },
                );
                AuthOutcome::CentrallyAuthenticated
            }
            TzMode::LocalSecurity => match current {
                TrustStatus::CentrallyAuthenticated | TrustStatus::TemporarilyTrusted => {
                    AuthOutcome::AlreadyTrusted(current)
                }
                _ if synced => {
                    let seq = self.audit(step, ue, AuditOp::LocalAuthSuccess, "profile found in local subscriber set");
                    self.ledger.insert(
                        ue,
                        LedgerEntry {
                            status: TrustStatus::TemporarilyTrusted,
                            pre_switch: false,
                            local_auth: Some((step, seq)),
                        },
                    );
                    AuthOutcome::TemporarilyTrusted
                }
                _ => {
                    self.audit(step, ue, AuditOp::LocalAuthDenied, "no synced profile");
                    self.audit(step, ue, AuditOp::EmergencyAccessGranted, "emergency services only");
                    self.ledger.insert(
                        ue,
                        LedgerEntry { status: TrustStatus::EmergencyOnly, pre_switch: false, local_auth: None },
                    );
                    AuthOutcome::EmergencyOnly
                }
            },
            TzMode::HandbackInProgress => match current {
                TrustStatus::TemporarilyTrusted => AuthOutcome::RetryLater,
                TrustStatus::CentrallyAuthenticated => AuthOutcome::AlreadyTrusted(current),
                _ => {
                    // backhaul is healthy again, so new arrivals go to the central AAA
                    self.ledger.insert(
                        ue,
                        LedgerEntry { status: TrustStatus::CentrallyAuthenticated, pre_switch: false, local_auth: None },
                    );
                    AuthOutcome::CentrallyAuthenticated
                }
            },
        }
    }

    /// Re-authenticates up to `batch` queued UEs centrally. When the queue
    /// is empty afterwards the zone returns to central mode and the audit
    /// buffer is flushed.
    pub fn complete_handback(&mut self, batch: usize, step: u64) -> Result<HandbackProgress, TzError> {
        if self.mode != TzMode::HandbackInProgress {
            return Err(TzError::NotInHandback(self.mode));
        }
        let mut progress = HandbackProgress::default();
        for _ in 0..batch {
            let Some(ue) = self.handback_queue.pop_front() else { break };
            self.audit(step, ue, AuditOp::HandbackReauth, "re-authenticated by central AAA");
            let entry = self.ledger.get_mut(&ue).expect("queued UE is in the ledger");
            *entry = LedgerEntry { status: TrustStatus::CentrallyAuthenticated, pre_switch: false, local_auth: None };
            progress.reauthenticated.push(ue);
        }
        if self.handback_queue.is_empty() {
            self.mode = TzMode::CentralSecurity;
            for entry in self.ledger.values_mut() {
                entry.pre_switch = false;
            }
            progress.flushed = Some(std::mem::take(&mut self.audit_buffer));
        }
        Ok(progress)
    }

    /// Passive pull of the audit buffer; does not drain it.
    pub fn audit_export(&self) -> &[AuditRecord] {
        &self.audit_buffer
    }

    /// Drops a UE that left the region.
    pub fn forget(&mut self, ue: u64) {
        if self.ledger.remove(&ue).is_some() {
            self.handback_queue.retain(|&q| q != ue);
        }
    }

    pub fn apply(&mut self, event: &TzEvent) -> Result<EventOutcome, TzError> {
        Ok(match *event {
            TzEvent::BackhaulReport { report, .. } => EventOutcome::Mode(self.on_backhaul_report(report)),
            TzEvent::Authenticate { ue, synced, step } => EventOutcome::Auth(self.authenticate(ue, synced, step)),
            TzEvent::CompleteHandback { batch, step } => {
                self.complete_handback(batch, step)?;
                EventOutcome::Mode(self.mode)
            }
            TzEvent::Depart { ue, .. } => {
                self.forget(ue);
                EventOutcome::Forgotten
            }
        })
    }
}

/// Inputs to the state machine, for replay.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TzEvent {
    BackhaulReport { step: u64, report: BackhaulReport },
    Authenticate { step: u64, ue: u64, synced: bool },
    CompleteHandback { step: u64, batch: usize },
    Depart { step: u64, ue: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventOutcome {
    Mode(TzMode),
    Auth(AuthOutcome),
    Forgotten,
}

impl EventOutcome {
    pub fn label(self) -> &'static str {
        match self {
            EventOutcome::Mode(m) => m.label(),
            EventOutcome::Auth(a) => a.label(),
            EventOutcome::Forgotten => "forgotten",
        }
    }
}

/// One line of an event trace: the audit-record fields plus `event`.
/// `op` holds the outcome label so replays can be checked line by line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceLine {
    pub step: u64,
    pub ue: Option<u64>,
    pub op: String,
    pub detail: String,
    pub event: String,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("trace line {line}: expected outcome {expected}, replay produced {actual}")]
    Mismatch { line: usize, expected: String, actual: String },
    #[error("trace line {line}: {source}")]
    Rejected { line: usize, source: TzError },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl TzEvent {
    pub fn to_trace_line(&self, outcome: EventOutcome) -> TraceLine {
        let op = outcome.label().to_string();
        match *self {
            TzEvent::BackhaulReport { step, report } => TraceLine {
                step,
                ue: None,
                op,
                detail: format!("state={} class={}", report.state, report.class.label()),
                event: "backhaul_report".into(),
            },
            TzEvent::Authenticate { step, ue, synced } => TraceLine {
                step,
                ue: Some(ue),
                op,
                detail: format!("synced={synced}"),
                event: "authenticate".into(),
            },
            TzEvent::CompleteHandback { step, batch } => TraceLine {
                step,
                ue: None,
                op,
                detail: format!("batch={batch}"),
                event: "complete_handback".into(),
            },
            TzEvent::Depart { step, ue } => {
                TraceLine { step, ue: Some(ue), op, detail: String::new(), event: "depart".into() }
            }
        }
    }

    pub fn from_trace_line(t: &TraceLine) -> Result<Self, String> {
        let field = |key: &str| -> Result<&str, String> {
            t.detail
                .split_whitespace()
                .find_map(|kv| kv.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
                .ok_or_else(|| format!("detail lacks {key}="))
        };
        let ue = || t.ue.ok_or_else(|| "missing ue".to_string());
        match t.event.as_str() {
            "backhaul_report" => {
                let state = field("state")?
                    .parse::<u8>()
                    .ok()
                    .and_then(StateIndex::new)
                    .ok_or("bad state")?;
                let class = match field("class")? {
                    "healthy" => StateClass::Healthy,
                    "unhealthy" => StateClass::Unhealthy,
                    "disconnected" => StateClass::Disconnected,
                    "under_recovery" => StateClass::UnderRecovery,
                    other => return Err(format!("bad class {other}")),
                };
                Ok(TzEvent::BackhaulReport { step: t.step, report: BackhaulReport { state, class } })
            }
            "authenticate" => Ok(TzEvent::Authenticate {
                step: t.step,
                ue: ue()?,
                synced: field("synced")?.parse().map_err(|_| "bad synced flag")?,
            }),
            "complete_handback" => Ok(TzEvent::CompleteHandback {
                step: t.step,
                batch: field("batch")?.parse().map_err(|_| "bad batch")?,
            }),
            "depart" => Ok(TzEvent::Depart { step: t.step, ue: ue()? }),
            other => Err(format!("unknown event {other:?}")),
        }
    }
}

/// Writes records as JSON lines, one per record, in order.
pub fn write_jsonl<W: Write, T: Serialize>(out: &mut W, items: &[T]) -> io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut *out, item)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_audit_jsonl<R: BufRead>(input: R) -> Result<Vec<AuditRecord>, TraceError> {
    let mut out = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut rec: AuditRecord = serde_json::from_str(&line)
            .map_err(|e| TraceError::Malformed { line: n + 1, message: e.to_string() })?;
        rec.seq = out.len() as u64;
        out.push(rec);
    }
    Ok(out)
}

/// Replays a JSON-lines event trace onto `state`, checking every recorded
/// outcome.
pub fn replay_trace<R: BufRead>(state: &mut TrustZoneState, input: R) -> Result<usize, TraceError> {
    let mut applied = 0;
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |message: String| TraceError::Malformed { line: n + 1, message };
        let t: TraceLine = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        let event = TzEvent::from_trace_line(&t).map_err(malformed)?;
        let outcome = state.apply(&event).map_err(|source| TraceError::Rejected { line: n + 1, source })?;
        if outcome.label() != t.op {
            return Err(TraceError::Mismatch { line: n + 1, expected: t.op, actual: outcome.label().into() });
        }
        applied += 1;
    }
    Ok(applied)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(i: u8, class: StateClass) -> BackhaulReport {
        BackhaulReport { state: StateIndex::new(i).unwrap(), class }
    }

    fn disconnected() -> BackhaulReport {
        report(9, StateClass::Disconnected)
    }

    fn healthy() -> BackhaulReport {
        report(1, StateClass::Healthy)
    }

    #[test]
    fn disconnect_switches_to_local() {
        let mut tz = TrustZoneState::new(TzConfig::default());
        assert!(!tz.laa_active());
        assert_eq!(tz.on_backhaul_report(disconnected()), TzMode::LocalSecurity);
        assert!(tz.laa_active());
    }

    #[test]
    fn healthy_in_central_is_noop() {
        let mut tz = TrustZoneState::new(TzConfig::default());
        let before = tz.clone();
        tz.on_backhaul_report(healthy());
        assert_eq!(tz, before);
        // mildly unhealthy state 3 is not in the default trigger set
        tz.on_backhaul_report(report(3, StateClass::Unhealthy));
        assert_eq!(tz.mode(), TzMode::CentralSecurity);
        tz.on_backhaul_report(report(4, StateClass::Unhealthy));
        assert_eq!(tz.mode(), TzMode::LocalSecurity);
    }

    #[test]
    fn pre_switch_users_keep_access() {
        let mut tz = TrustZoneState::new(TzConfig::default());
        tz.authenticate(1, false, 0);
        tz.on_backhaul_report(disconnected());
        assert_eq!(tz.status(1), TrustStatus::CentrallyAuthenticated);
        assert!(tz.entry(1).unwrap().pre_switch);
        assert_eq!(tz.authenticate(1, false, 1), AuthOutcome::AlreadyTrusted(TrustStatus::CentrallyAuthenticated));
        assert!(tz.audit_export().is_empty());
    }

    #[test]
    fn local_auth_outcomes() {
        let mut tz = TrustZoneState::new(TzConfig::default());
        tz.on_backhaul_report(disconnected());
        assert_eq!(tz.authenticate(10, true, 5), AuthOutcome::TemporarilyTrusted);
        assert_eq!(tz.audit_export().last().unwrap().op, AuditOp::LocalAuthSuccess);
        assert_eq!(tz.authenticate(11, false, 5), AuthOutcome::EmergencyOnly);
        let ops: Vec<_> = tz.audit_export().iter().map(|r| r.op).collect();
        assert_eq!(ops, [AuditOp::LocalAuthSuccess, AuditOp::LocalAuthDenied, AuditOp::EmergencyAccessGranted]);
        assert_eq!(tz.status(11), TrustStatus::EmergencyOnly);
    }

    #[test]
    fn central_auth_bypasses_audit() {
        let mut tz = TrustZoneState::new(TzConfig::default());
        assert_eq!(tz.authenticate(1, true, 0), AuthOutcome::CentrallyAuthenticated);
        assert_eq!(tz.authenticate(2, false, 0), AuthOutcome::CentrallyAuthenticated);
        assert!(tz.audit_export().is_empty());
    }

    #[test]
    fn handback_queue_follows_auth_time() {
        let mut tz = TrustZoneState::new(TzConfig::default());
        tz.on_backhaul_report(disconnected());
        // ids deliberately out of order relative to auth time
        for (step, ue) in [(3, 50), (1, 70), (2, 10), (2, 5)] {
            tz.authenticate(ue, true, step);
        }
        tz.authenticate(99, false, 1);
        assert_eq!(tz.on_backhaul_report(report(7, StateClass::UnderRecovery)), TzMode::LocalSecurity);
        assert_eq!(tz.on_backhaul_report(healthy()), TzMode::HandbackInProgress);
        let expected: Vec<u64> = {
            let mut v: Vec<_> = tz
                .ledger()
                .filter_map(|(ue, e)| e.local_auth.map(|t| (t, ue)))
                .collect();
            v.sort();
            v.into_iter().map(|(_, ue)| ue).collect()
        };
        assert_eq!(tz.handback_queue().collect::<Vec<_>>(), expected);
        assert_eq!(expected, vec![70, 10, 5, 50]);
        assert_eq!(tz.authenticate(70, true, 4), AuthOutcome::RetryLater);
    }

    fn local_with_queue(n: u64) -> TrustZoneState {
        let mut tz = TrustZoneState::new(TzConfig::default());
        tz.on_backhaul_report(disconnected());
        for ue in 0..n {
            tz.authenticate(ue, true, ue);
        }
        tz.on_backhaul_report(healthy());
        tz
    }

    #[test]
    fn partial_handback() {
        let mut tz = local_with_queue(5);
        let p = tz.complete_handback(2, 10).unwrap();
        assert_eq!(p.reauthenticated, vec![0, 1]);
        assert!(p.flushed.is_none());
        assert_eq!(tz.handback_queue().len(), 3);
        assert_eq!(tz.mode(), TzMode::HandbackInProgress);
    }

    #[test]
    fn full_handback_flushes() {
        let mut tz = local_with_queue(2);
        let buffered = tz.audit_export().len();
        let p = tz.complete_handback(10, 10).unwrap();
        assert_eq!(tz.mode(), TzMode::CentralSecurity);
        assert!(!tz.laa_active());
        let flushed = p.flushed.unwrap();
        assert_eq!(flushed.len(), buffered + 2);
        assert!(tz.audit_export().is_empty());
        assert!(tz.ledger().all(|(_, e)| e.status != TrustStatus::TemporarilyTrusted));
    }

    #[test]
    fn handback_rejected_outside_handback_mode() {
        let mut tz = TrustZoneState::new(TzConfig::default());
        assert_eq!(tz.complete_handback(1, 0), Err(TzError::NotInHandback(TzMode::CentralSecurity)));
    }

    #[test]
    fn audit_export_is_pure() {
        let mut tz = TrustZoneState::new(TzConfig::default());
        assert!(tz.audit_export().is_empty());
        tz.on_backhaul_report(disconnected());
        for k in 0..4 {
            tz.authenticate(k, true, k);
        }
        let a = tz.audit_export().to_vec();
        let b = tz.audit_export().to_vec();
        assert_eq!(a, b);
        assert_eq!(a.len(), 4);
        assert!(a.iter().all(|r| r.op == AuditOp::LocalAuthSuccess));
        assert!(a.windows(2).all(|w| (w[0].step, w[0].seq) < (w[1].step, w[1].seq)));
    }

    #[test]
    fn departure_leaves_queue() {
        let mut tz = local_with_queue(3);
        tz.forget(1);
        assert_eq!(tz.handback_queue().collect::<Vec<_>>(), vec![0, 2]);
        assert_eq!(tz.status(1), TrustStatus::Unauthenticated);
    }

    #[test]
    fn trace_round_trip_replays() {
        let events = [
            TzEvent::Authenticate { step: 0, ue: 1, synced: false },
            TzEvent::BackhaulReport { step: 1, report: disconnected() },
            TzEvent::Authenticate { step: 1, ue: 2, synced: true },
            TzEvent::Authenticate { step: 2, ue: 3, synced: false },
            TzEvent::Depart { step: 2, ue: 3 },
            TzEvent::BackhaulReport { step: 3, report: healthy() },
            TzEvent::CompleteHandback { step: 3, batch: 4 },
        ];
        let mut live = TrustZoneState::new(TzConfig::default());
        let mut lines = Vec::new();
        for e in &events {
            let outcome = live.apply(e).unwrap();
            lines.push(e.to_trace_line(outcome));
        }
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &lines).unwrap();
        let mut replayed = TrustZoneState::new(TzConfig::default());
        assert_eq!(replay_trace(&mut replayed, &buf[..]).unwrap(), events.len());
        assert_eq!(replayed, live);

        // a tampered outcome is caught
        let text = String::from_utf8(buf).unwrap().replace("\"temporarily_trusted\"", "\"emergency_only\"");
        let mut again = TrustZoneState::new(TzConfig::default());
        assert!(matches!(replay_trace(&mut again, text.as_bytes()), Err(TraceError::Mismatch { line: 3, .. })));
    }

    #[test]
    fn audit_jsonl_schema() {
        let mut tz = TrustZoneState::new(TzConfig::default());
        tz.on_backhaul_report(disconnected());
        tz.authenticate(4, true, 7);
        let mut buf = Vec::new();
        write_jsonl(&mut buf, tz.audit_export()).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text,
            "{\"step\":7,\"ue\":4,\"op\":\"LocalAuthSuccess\",\"detail\":\"profile found in local subscriber set\"}\n"
        );
        assert_eq!(read_audit_jsonl(&buf[..]).unwrap(), tz.audit_export());
    }
}
