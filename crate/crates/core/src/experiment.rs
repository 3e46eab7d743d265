//! The experiment pipeline: warm-up, training, testing, and threshold sweeps.
//!
//! Thresholds never feed back into the world or the backhaul chain, so all
//! policies under one seed see exactly the same UE trajectories, chain states
//! and outage draws. [`run_policies`] exploits that by stepping the world
//! once and applying every policy to it, which is equivalent to separate runs
//! with a shared seed.

use std::fmt::Write as _;
use std::io::{self, Write};

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::backhaul::{ChainError, StateClass, StateIndex};
use crate::config::ScenarioConfig;
use crate::mobility::{run_warmup, write_snapshot_csv, MobilityClass, WarmupReport, World, WorldSnapshot};
use crate::risk::{train_motion_model, BackhaulOutlook, MotionModel, ProductRisk, RiskError};
use crate::rng::{stream, StreamTag};
use crate::sync::{
    apply_round, round_risks, CssoScope, LssState, MetricsLedger, RoundRecord, SyncPolicy, ThresholdSpec,
};
use crate::trust_zone::{
    write_jsonl, AuditRecord, AuthOutcome, BackhaulReport, TrustStatus, TrustZoneState, TzError, TzMode,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("motion model: {0}")]
    Risk(#[from] RiskError),
    #[error("backhaul chain: {0}")]
    Chain(#[from] ChainError),
    #[error("trust zone: {0}")]
    TrustZone(#[from] TzError),
    #[error("at least one threshold is required")]
    NoThresholds,
    #[error("at least one seed is required")]
    NoSeeds,
    #[error("a sweep needs at least two thresholds")]
    TooFewThresholds,
}

/// Authentication activity of one policy over the testing phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct AuthCounters {
    pub central: u64,
    pub temporarily_trusted: u64,
    pub emergency_only: u64,
    pub retry_later: u64,
    pub handback_reauth: u64,
    pub local_mode_entries: u64,
    pub handbacks_completed: u64,
}

/// One policy's state and results within a shared run.
#[derive(Debug, Clone)]
pub struct PolicyRun {
    pub spec: ThresholdSpec,
    pub policy: SyncPolicy,
    pub lss: LssState,
    pub metrics: MetricsLedger,
    pub tz: TrustZoneState,
    pub auth: AuthCounters,
    /// Audit records delivered to the central cloud at hand-back.
    pub audit_log: Vec<AuditRecord>,
}

impl PolicyRun {
    fn new(config: &ScenarioConfig, spec: ThresholdSpec) -> Self {
        PolicyRun {
            spec,
            policy: config.policy(spec),
            lss: LssState::default(),
            metrics: MetricsLedger::default(),
            tz: TrustZoneState::new(config.trust_zone.clone()),
            auth: AuthCounters::default(),
            audit_log: Vec::new(),
        }
    }

    fn record_auth(&mut self, outcome: AuthOutcome) {
        match outcome {
            AuthOutcome::CentrallyAuthenticated => self.auth.central += 1,
            AuthOutcome::TemporarilyTrusted => self.auth.temporarily_trusted += 1,
            AuthOutcome::EmergencyOnly => self.auth.emergency_only += 1,
            AuthOutcome::RetryLater => self.auth.retry_later += 1,
            AuthOutcome::AlreadyTrusted(_) => {}
        }
    }

    /// Whether a UE in the EC contacts the zone for authentication this step.
    fn wants_auth(&self, ue: u64) -> bool {
        let status = self.tz.status(ue);
        match self.tz.mode() {
            TzMode::CentralSecurity => status != TrustStatus::CentrallyAuthenticated,
            TzMode::LocalSecurity => match status {
                TrustStatus::Unauthenticated => true,
                TrustStatus::EmergencyOnly => self.lss.contains(ue),
                _ => false,
            },
            TzMode::HandbackInProgress => {
                !matches!(status, TrustStatus::CentrallyAuthenticated | TrustStatus::TemporarilyTrusted)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub seed: u64,
    pub runs: Vec<PolicyRun>,
    /// Reports the no-sync baseline would have filed under the same seed.
    pub baseline_reports: u64,
    pub warmup: WarmupReport,
    pub model: MotionModel,
    pub world: World,
    pub final_backhaul_state: StateIndex,
    pub testing_steps: usize,
}

impl ExperimentOutcome {
    pub fn run(&self, spec: ThresholdSpec) -> Option<&PolicyRun> {
        self.runs.iter().find(|r| r.spec == spec)
    }
}

/// Runs warm-up and training, returning the world at the start of testing
/// together with the trained motion model.
pub fn prepare(config: &ScenarioConfig, seed: u64) -> Result<(World, WarmupReport, MotionModel), ExperimentError> {
    let d = config.derived();
    let mut world = World::new(config.world_params(), seed);
    let warmup = run_warmup(&mut world, d.warmup_steps);
    let mut trajectory: Vec<WorldSnapshot> = Vec::with_capacity(d.training_steps + 1);
    trajectory.push(world.snapshot());
    for _ in 0..d.training_steps {
        world.advance_step();
        trajectory.push(world.snapshot());
    }
    let model = train_motion_model(&trajectory, world.region(), config.training_params())?;
    Ok((world, warmup, model))
}

/// Runs the full experiment once for `seed`, applying every policy in
/// `specs` to the same world and backhaul trajectory.
pub fn run_policies(
    config: &ScenarioConfig,
    seed: u64,
    specs: &[ThresholdSpec],
) -> Result<ExperimentOutcome, ExperimentError> {
    if specs.is_empty() {
        return Err(ExperimentError::NoThresholds);
    }
    let (mut world, warmup, model) = prepare(config, seed)?;
    let chain = config.chain();
    let testing_steps = config.derived().testing_steps;
    let interval = config.sync.interval_steps;
    let scope = config.sync.csso_scope;
    let batch = config.trust_zone.handback_batch;

    let mut runs: Vec<PolicyRun> = specs.iter().map(|&s| PolicyRun::new(config, s)).collect();
    let mut state = config.backhaul.initial_state;
    let mut baseline_reports = 0u64;
    let mut exposed: Vec<u64> = Vec::new();
    let mut in_ec: Vec<u64> = Vec::new();

    for t in 0..testing_steps as u64 {
        let moved = world.advance_step();
        for run in &mut runs {
            run.lss.remove_departed(&moved.departed);
            for &ue in &moved.departed {
                run.tz.forget(ue);
            }
        }

        let mut rng = stream(seed, StreamTag::Backhaul, 0, t);
        state = chain.step(state, rng.random());
        let class = chain.class_of(state);
        let report = BackhaulReport { state, class };
        for run in &mut runs {
            let before = run.tz.mode();
            if run.tz.on_backhaul_report(report) == TzMode::LocalSecurity && before == TzMode::CentralSecurity {
                run.auth.local_mode_entries += 1;
            }
        }

        let mut syncs = vec![0u64; runs.len()];
        if t % interval == 0 && class != StateClass::Disconnected {
            let outlook = BackhaulOutlook::new(&chain, state, model.horizon_steps())?;
            let risks = round_risks(&ProductRisk, world.ues(), &model, &outlook);
            for (run, n) in runs.iter_mut().zip(&mut syncs) {
                *n = apply_round(&run.policy, &risks, class, &mut run.lss, &mut run.metrics).syncs();
            }
        }

        let csso = chain.draw_csso(state, rng.random());
        let region = *world.region();
        exposed.clear();
        in_ec.clear();
        for ue in world.ues() {
            let ec = region.in_ec(ue.position);
            if ec {
                in_ec.push(ue.id);
            }
            if csso && (ec || scope == CssoScope::Region) {
                exposed.push(ue.id);
            }
        }
        baseline_reports += exposed.len() as u64;

        for (run, &n) in runs.iter_mut().zip(&syncs) {
            let reports = exposed.iter().filter(|&&ue| !run.lss.contains(ue)).count() as u64;
            run.metrics.csso_reports_total += reports;

            for &ue in &in_ec {
                if run.wants_auth(ue) {
                    let synced = run.lss.contains(ue);
                    let outcome = run.tz.authenticate(ue, synced, t);
                    run.record_auth(outcome);
                }
            }
            if run.tz.mode() == TzMode::HandbackInProgress {
                let progress = run.tz.complete_handback(batch, t)?;
                run.auth.handback_reauth += progress.reauthenticated.len() as u64;
                if let Some(flushed) = progress.flushed {
                    run.auth.handbacks_completed += 1;
                    run.audit_log.extend(flushed);
                }
            }

            run.metrics.series.push(RoundRecord {
                step: t,
                backhaul_state: state,
                csso,
                reports,
                syncs: n,
                mode: run.tz.mode(),
            });
        }
    }

    for run in &mut runs {
        run.metrics.baseline_reports = Some(baseline_reports);
    }
    Ok(ExperimentOutcome {
        seed,
        runs,
        baseline_reports,
        warmup,
        model,
        world,
        final_backhaul_state: state,
        testing_steps,
    })
}

/// Runs the configured policy (`sync.enabled`, `sync.threshold`).
pub fn run_experiment(config: &ScenarioConfig, seed: u64) -> Result<ExperimentOutcome, ExperimentError> {
    run_policies(config, seed, &[config.primary_threshold()])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    #[serde(serialize_with = "serialize_spec")]
    pub threshold: ThresholdSpec,
    pub seed: u64,
    pub csso_reports: u64,
    pub sync_traffic: u64,
    pub baseline_reports: u64,
    pub reliability_gain: f64,
}

fn serialize_spec<S: serde::Serializer>(spec: &ThresholdSpec, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(spec)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub thresholds: Vec<ThresholdSpec>,
    pub seeds: Vec<u64>,
    /// Ordered by threshold, then seed.
    pub rows: Vec<SweepRow>,
}

pub fn threshold_sweep(
    config: &ScenarioConfig,
    seeds: &[u64],
    thresholds: &[ThresholdSpec],
) -> Result<SweepTable, ExperimentError> {
    if seeds.is_empty() {
        return Err(ExperimentError::NoSeeds);
    }
    if thresholds.len() < 2 {
        return Err(ExperimentError::TooFewThresholds);
    }
    let per_seed: Vec<Vec<SweepRow>> = seeds
        .par_iter()
        .map(|&seed| {
            let outcome = run_policies(config, seed, thresholds)?;
            Ok(outcome
                .runs
                .iter()
                .map(|run| SweepRow {
                    threshold: run.spec,
                    seed,
                    csso_reports: run.metrics.csso_reports_total,
                    sync_traffic: run.metrics.sync_traffic_total,
                    baseline_reports: outcome.baseline_reports,
                    reliability_gain: run.metrics.reliability_gain(),
                })
                .collect())
        })
        .collect::<Result<_, ExperimentError>>()?;
    let rows = (0..thresholds.len())
        .flat_map(|ti| per_seed.iter().map(move |rows| rows[ti]))
        .collect();
    Ok(SweepTable { thresholds: thresholds.to_vec(), seeds: seeds.to_vec(), rows })
}

/// A pair of thresholds on one seed that breaks the coupling order.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityViolation {
    pub seed: u64,
    pub stricter: SweepRow,
    pub looser: SweepRow,
}

/// Strictness rank: disabled first, then thresholds from high to low.
fn strictness(spec: ThresholdSpec) -> f64 {
    match spec {
        ThresholdSpec::Disabled => f64::INFINITY,
        ThresholdSpec::Level(t) => t,
    }
}

impl SweepTable {
    pub fn rows_for(&self, spec: ThresholdSpec) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(move |r| r.threshold == spec)
    }

    /// Mean (reports, traffic, baseline, gain) per threshold.
    pub fn means(&self) -> Vec<(ThresholdSpec, [f64; 4])> {
        self.thresholds
            .iter()
            .map(|&spec| {
                let mut acc = [0.0; 4];
                let mut n = 0.0;
                for r in self.rows_for(spec) {
                    acc[0] += r.csso_reports as f64;
                    acc[1] += r.sync_traffic as f64;
                    acc[2] += r.baseline_reports as f64;
                    acc[3] += r.reliability_gain;
                    n += 1.0;
                }
                (spec, acc.map(|v| v / n))
            })
            .collect()
    }

    /// Checks that, per seed, lowering the threshold never raises reports and
    /// never lowers traffic.
    pub fn check_monotonicity(&self) -> Result<(), MonotonicityViolation> {
        for &seed in &self.seeds {
            let mut rows: Vec<&SweepRow> = self.rows.iter().filter(|r| r.seed == seed).collect();
            rows.sort_by(|a, b| strictness(b.threshold).total_cmp(&strictness(a.threshold)));
            for pair in rows.windows(2) {
                let (stricter, looser) = (pair[0], pair[1]);
                if looser.csso_reports > stricter.csso_reports || looser.sync_traffic < stricter.sync_traffic {
                    return Err(MonotonicityViolation { seed, stricter: *stricter, looser: *looser });
                }
            }
        }
        Ok(())
    }

    pub const CSV_HEADER: &'static str = "threshold,seed,csso_reports,sync_traffic,baseline_reports,reliability_gain";

    /// Per-seed rows followed by one `mean` row per threshold.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{:.6}",
                r.threshold, r.seed, r.csso_reports, r.sync_traffic, r.baseline_reports, r.reliability_gain
            )?;
        }
        for (spec, m) in self.means() {
            writeln!(out, "{spec},mean,{:.3},{:.3},{:.3},{:.6}", m[0], m[1], m[2], m[3])?;
        }
        Ok(())
    }

    /// One `(threshold, seed, metric, value)` line per measurement.
    pub fn write_long_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "threshold,seed,metric,value")?;
        for r in &self.rows {
            let t = r.threshold;
            writeln!(out, "{t},{},csso_reports,{}", r.seed, r.csso_reports)?;
            writeln!(out, "{t},{},sync_traffic,{}", r.seed, r.sync_traffic)?;
            writeln!(out, "{t},{},baseline_reports,{}", r.seed, r.baseline_reports)?;
            writeln!(out, "{t},{},reliability_gain,{:.6}", r.seed, r.reliability_gain)?;
        }
        Ok(())
    }
}

pub const ROUNDS_HEADER: &str = "step,backhaul_state,csso,reports_this_step,syncs_this_round,mode";

pub fn write_rounds_csv<W: Write>(out: &mut W, series: &[RoundRecord]) -> io::Result<()> {
    writeln!(out, "{ROUNDS_HEADER}")?;
    let mut line = String::with_capacity(64);
    for r in series {
        line.clear();
        let _ = write!(
            line,
            "{},{},{},{},{},{}",
            r.step,
            r.backhaul_state.get(),
            u8::from(r.csso),
            r.reports,
            r.syncs,
            r.mode
        );
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// End-of-run summary written as JSON.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub threshold: String,
    pub ue_count: usize,
    pub testing_steps: usize,
    pub csso_steps: u64,
    pub csso_reports_total: u64,
    pub sync_traffic_total: u64,
    pub weighted_sync_traffic: f64,
    pub baseline_reports: u64,
    pub reliability_gain: f64,
    pub final_backhaul_state: StateIndex,
    pub final_mode: TzMode,
    pub authentication: AuthCounters,
    pub audit_records_delivered: usize,
    pub audit_records_pending: usize,
    pub final_population_by_class: [usize; 4],
}

impl RunSummary {
    pub fn new(config: &ScenarioConfig, outcome: &ExperimentOutcome, run: &PolicyRun) -> Self {
        let mut by_class = [0usize; 4];
        for ue in outcome.world.ues() {
            by_class[ue.class.index()] += 1;
        }
        debug_assert_eq!(MobilityClass::ALL.len(), by_class.len());
        RunSummary {
            seed: outcome.seed,
            threshold: run.spec.to_string(),
            ue_count: outcome.world.ues().len(),
            testing_steps: outcome.testing_steps,
            csso_steps: run.metrics.series.iter().filter(|r| r.csso).count() as u64,
            csso_reports_total: run.metrics.csso_reports_total,
            sync_traffic_total: run.metrics.sync_traffic_total,
            weighted_sync_traffic: run.metrics.sync_traffic_total as f64 * config.sync.traffic_weight,
            baseline_reports: outcome.baseline_reports,
            reliability_gain: run.metrics.reliability_gain(),
            final_backhaul_state: outcome.final_backhaul_state,
            final_mode: run.tz.mode(),
            authentication: run.auth,
            audit_records_delivered: run.audit_log.len(),
            audit_records_pending: run.tz.audit_export().len(),
            final_population_by_class: by_class,
        }
    }
}

/// A named output file and its contents.
pub type Artifact = (&'static str, Vec<u8>);

fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("output serializes");
    out.push(b'\n');
    out
}

/// Everything `simulate` writes for one policy run, in a fixed order.
pub fn simulate_artifacts(config: &ScenarioConfig, outcome: &ExperimentOutcome, run: &PolicyRun) -> Vec<Artifact> {
    let mut rounds = Vec::new();
    write_rounds_csv(&mut rounds, &run.metrics.series).expect("in-memory write");
    let mut audit = Vec::new();
    write_jsonl(&mut audit, &run.audit_log).expect("in-memory write");
    write_jsonl(&mut audit, run.tz.audit_export()).expect("in-memory write");
    let mut world = Vec::new();
    write_snapshot_csv(
        &mut world,
        &outcome.world.snapshot(),
        outcome.world.region(),
        |id| run.lss.contains(id),
        |id| run.tz.status(id).label().to_string(),
    )
    .expect("in-memory write");
    let mut echo = config.echo().into_bytes();
    echo.push(b'\n');
    vec![
        ("config.json", echo),
        ("rounds.csv", rounds),
        ("summary.json", json_bytes(&RunSummary::new(config, outcome, run))),
        ("audit.jsonl", audit),
        ("final_world.csv", world),
    ]
}

/// Everything `sweep` writes.
pub fn sweep_artifacts(config: &ScenarioConfig, table: &SweepTable) -> Vec<Artifact> {
    let mut wide = Vec::new();
    table.write_csv(&mut wide).expect("in-memory write");
    let mut long = Vec::new();
    table.write_long_csv(&mut long).expect("in-memory write");
    let mut echo = config.echo().into_bytes();
    echo.push(b'\n');
    vec![("config.json", echo), ("sweep.csv", wide), ("sweep_long.csv", long)]
}
