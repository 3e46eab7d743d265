//! Threshold-gated profile synchronization and outage accounting.
//!
//! Every `interval_steps` steps the zone estimates the outage risk of every
//! UE in the region and synchronizes the profiles of those whose risk is
//! strictly above the threshold into the local subscriber set. Each synced
//! profile costs one traffic unit. When an outage hits, every UE inside the
//! EC whose profile is not in the set files one outage report.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::backhaul::{BackhaulChain, ChainError, StateClass, StateIndex};
use crate::mobility::{UeRecord, World};
use crate::risk::{estimate_with_outlook, BackhaulOutlook, MotionModel, ProductRisk, RiskEstimator};
use crate::trust_zone::TzMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CssoScope {
    /// Only UEs inside the EC suffer an outage.
    #[default]
    Ec,
    /// Every UE in the region suffers.
    Region,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ProfileValidity {
    /// Each round replaces the set; every member is re-synced and paid for.
    #[default]
    Epoch,
    /// Profiles stay until the UE departs; only new members are paid for.
    Persist,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncPolicy {
    pub interval_steps: u64,
    pub threshold: f64,
    pub enabled: bool,
    pub validity: ProfileValidity,
}

impl SyncPolicy {
    pub fn disabled() -> Self {
        SyncPolicy { interval_steps: 3, threshold: 1.0, enabled: false, validity: ProfileValidity::Epoch }
    }

    pub fn with_threshold(threshold: f64) -> Self {
        SyncPolicy { interval_steps: 3, threshold, enabled: true, validity: ProfileValidity::Epoch }
    }

    pub fn is_round(&self, step: u64) -> bool {
        step % self.interval_steps == 0
    }
}

/// A threshold setting in a sweep; `Disabled` is the no-Trust-Zone baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdSpec {
    Disabled,
    Level(f64),
}

impl ThresholdSpec {
    pub fn policy(self, interval_steps: u64, validity: ProfileValidity) -> SyncPolicy {
        match self {
            ThresholdSpec::Disabled => SyncPolicy { interval_steps, ..SyncPolicy::disabled() },
            ThresholdSpec::Level(t) => SyncPolicy { interval_steps, threshold: t, enabled: true, validity },
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim();
        if matches!(s.to_ascii_lowercase().as_str(), "disabled" | "n/a" | "na" | "none") {
            return Some(ThresholdSpec::Disabled);
        }
        let v: f64 = s.parse().ok()?;
        (0.0..=1.0).contains(&v).then_some(ThresholdSpec::Level(v))
    }
}

impl fmt::Display for ThresholdSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThresholdSpec::Disabled => f.write_str("disabled"),
            ThresholdSpec::Level(t) => write!(f, "{t}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LssState {
    pub synced: BTreeSet<u64>,
    pub epoch: u64,
}

impl LssState {
    pub fn contains(&self, ue: u64) -> bool {
        self.synced.contains(&ue)
    }

    pub fn remove_departed(&mut self, departed: &[u64]) {
        for ue in departed {
            self.synced.remove(ue);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub step: u64,
    pub backhaul_state: StateIndex,
    pub csso: bool,
    pub reports: u64,
    /// Profiles synced at this step; zero when no round ran.
    pub syncs: u64,
    pub mode: TzMode,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsLedger {
    pub csso_reports_total: u64,
    pub sync_traffic_total: u64,
    pub series: Vec<RoundRecord>,
    /// Reports of the disabled policy under the same seed, when known.
    pub baseline_reports: Option<u64>,
}

impl MetricsLedger {
    /// `1 - reports / baseline`; zero when there is no baseline or it is zero.
    pub fn reliability_gain(&self) -> f64 {
        match self.baseline_reports {
            Some(b) if b > 0 => 1.0 - self.csso_reports_total as f64 / b as f64,
            _ => 0.0,
        }
    }

    /// Totals recomputed from the per-step series.
    pub fn replay_totals(&self) -> (u64, u64) {
        self.series.iter().fold((0, 0), |(r, s), rec| (r + rec.reports, s + rec.syncs))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoundOutcome {
    Skipped,
    Synced(u64),
}

impl RoundOutcome {
    pub fn syncs(self) -> u64 {
        match self {
            RoundOutcome::Skipped => 0,
            RoundOutcome::Synced(n) => n,
        }
    }
}

/// Risk of every UE for one round; shared by all policies evaluated on the
/// same world.
pub fn round_risks<E: RiskEstimator + ?Sized>(
    estimator: &E,
    ues: &[UeRecord],
    model: &MotionModel,
    outlook: &BackhaulOutlook,
) -> Vec<(u64, f64)> {
    ues.iter().map(|ue| (ue.id, estimate_with_outlook(estimator, model, ue, outlook).risk)).collect()
}

/// Applies one sync round given precomputed risks.
pub fn apply_round(
    policy: &SyncPolicy,
    risks: &[(u64, f64)],
    backhaul_class: StateClass,
    lss: &mut LssState,
    metrics: &mut MetricsLedger,
) -> RoundOutcome {
    if backhaul_class == StateClass::Disconnected {
        return RoundOutcome::Skipped;
    }
    let selected = || risks.iter().filter(|(_, r)| policy.enabled && *r > policy.threshold).map(|(id, _)| *id);
    let cost = match policy.validity {
        ProfileValidity::Epoch => {
            lss.synced = selected().collect();
            lss.synced.len() as u64
        }
        ProfileValidity::Persist => selected().filter(|id| lss.synced.insert(*id)).count() as u64,
    };
    lss.epoch += 1;
    metrics.sync_traffic_total += cost;
    RoundOutcome::Synced(cost)
}

/// One synchronization round for `policy`.
pub fn sync_round(
    policy: &SyncPolicy,
    world: &World,
    model: &MotionModel,
    chain: &BackhaulChain,
    backhaul_state: StateIndex,
    lss: &mut LssState,
    metrics: &mut MetricsLedger,
) -> Result<RoundOutcome, ChainError> {
    let class = chain.class_of(backhaul_state);
    if class == StateClass::Disconnected {
        return Ok(RoundOutcome::Skipped);
    }
    let outlook = BackhaulOutlook::new(chain, backhaul_state, model.horizon_steps())?;
    let risks = round_risks(&ProductRisk, world.ues(), model, &outlook);
    Ok(apply_round(policy, &risks, class, lss, metrics))
}

/// UEs that would file a report if an outage hit now.
pub fn exposed_ues<'a>(
    world: &'a World,
    scope: CssoScope,
) -> impl Iterator<Item = &'a UeRecord> + 'a {
    let region = world.region();
    world.ues().iter().filter(move |ue| scope == CssoScope::Region || region.in_ec(ue.position))
}

/// Counts the reports caused by an outage at this step and adds them to the
/// totals.
pub fn apply_csso(world: &World, lss: &LssState, metrics: &mut MetricsLedger, scope: CssoScope) -> u64 {
    let reports = exposed_ues(world, scope).filter(|ue| !lss.contains(ue.id)).count() as u64;
    metrics.csso_reports_total += reports;
    reports
}
