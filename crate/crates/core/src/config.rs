//! Scenario configuration.
//!
//! A scenario is a JSON document; every field is optional and missing fields
//! take the reference-scenario defaults (at a desk-scale density of
//! 100 UEs/km²). Unknown keys are rejected. After parsing, the chain source is
//! resolved inline and the derived step counts are filled in, so the echoed
//! document parses back to the same configuration.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backhaul::{BackhaulChain, ChainDocument, StateIndex, Structure};
use crate::mobility::{RegionMap, SpawnMode, SpeedDistribution, SpeedTable, WorldParams, AREA_COUNT};
use crate::risk::TrainingParams;
use crate::sync::{CssoScope, ProfileValidity, SyncPolicy, ThresholdSpec};
use crate::trust_zone::TzConfig;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{path}: {message}")]
pub struct ConfigError {
    /// Dotted path of the offending field, e.g. `sync.thresholds[0]`.
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn at(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError { path: path.into(), message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegionConfig {
    pub half_width_km: f64,
    pub ec_radius_km: f64,
}

impl Default for RegionConfig {
    fn default() -> Self {
        RegionConfig { half_width_km: 4.0, ec_radius_km: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BasicSpeedConfig {
    pub low: SpeedDistribution,
    pub medium: SpeedDistribution,
    pub high: SpeedDistribution,
}

impl Default for BasicSpeedConfig {
    fn default() -> Self {
        let t = SpeedTable::default();
        BasicSpeedConfig { low: t.basic[1], medium: t.basic[2], high: t.basic[3] }
    }
}

/// Scaling factors per area, ordered EC, I, II, III, IV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpeedFactorConfig {
    pub low: [f64; AREA_COUNT],
    pub medium: [f64; AREA_COUNT],
    pub high: [f64; AREA_COUNT],
}

impl Default for SpeedFactorConfig {
    fn default() -> Self {
        let t = SpeedTable::default();
        SpeedFactorConfig { low: t.factors[1], medium: t.factors[2], high: t.factors[3] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MobilityConfig {
    pub step_seconds: f64,
    pub sub_step_seconds: f64,
    pub spawn: SpawnMode,
    pub basic_speed: BasicSpeedConfig,
    pub speed_factors: SpeedFactorConfig,
}

impl Default for MobilityConfig {
    fn default() -> Self {
        MobilityConfig {
            step_seconds: 600.0,
            sub_step_seconds: 10.0,
            spawn: SpawnMode::Boundary,
            basic_speed: BasicSpeedConfig::default(),
            speed_factors: SpeedFactorConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BackhaulConfig {
    /// Inline chain; filled with the resolved chain after parsing.
    pub chain: Option<ChainDocument>,
    /// Chain loaded from a JSON file instead of `chain`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chain_file: Option<PathBuf>,
    /// Overrides the chain's per-state CSSR levels.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cssr: Option<Vec<f64>>,
    pub strict_structure: bool,
    pub initial_state: StateIndex,
}

impl Default for BackhaulConfig {
    fn default() -> Self {
        BackhaulConfig {
            chain: None,
            chain_file: None,
            cssr: None,
            strict_structure: true,
            initial_state: StateIndex::new(1).expect("state 1"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RiskConfig {
    pub horizon_steps: usize,
    pub bin_width_km: f64,
    pub max_distance_km: f64,
}

impl Default for RiskConfig {
    fn default() -> Self {
        let t = TrainingParams::default();
        RiskConfig { horizon_steps: t.horizon_steps, bin_width_km: t.bin_width_km, max_distance_km: t.max_distance_km }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyncConfig {
    pub enabled: bool,
    pub interval_steps: u64,
    /// Threshold used by `simulate`.
    pub threshold: f64,
    /// Thresholds used by `sweep` when none are given on the command line.
    pub thresholds: Vec<f64>,
    pub csso_scope: CssoScope,
    pub profile_validity: ProfileValidity,
    /// Traffic units per synced profile in reported weighted traffic.
    pub traffic_weight: f64,
}

impl Default for SyncConfig {
    fn default() -> Self {
        SyncConfig {
            enabled: true,
            interval_steps: 3,
            threshold: 0.05,
            thresholds: vec![0.5, 0.2, 0.1, 0.05, 0.02],
            csso_scope: CssoScope::Ec,
            profile_validity: ProfileValidity::Epoch,
            traffic_weight: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhaseConfig {
    pub warmup_hours: f64,
    pub training_hours: f64,
    pub testing_days: f64,
}

impl Default for PhaseConfig {
    fn default() -> Self {
        PhaseConfig { warmup_hours: 40.0, training_hours: 24.0, testing_days: 30.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("out") }
    }
}

/// Read-only values computed from the rest of the configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Derived {
    pub ue_count: usize,
    pub warmup_steps: usize,
    pub training_steps: usize,
    pub testing_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub density_per_km2: f64,
    pub region: RegionConfig,
    pub mobility: MobilityConfig,
    pub backhaul: BackhaulConfig,
    pub risk: RiskConfig,
    pub sync: SyncConfig,
    pub trust_zone: TzConfig,
    pub phases: PhaseConfig,
    pub output: OutputConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub derived: Option<Derived>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            seed: 1,
            density_per_km2: 100.0,
            region: RegionConfig::default(),
            mobility: MobilityConfig::default(),
            backhaul: BackhaulConfig::default(),
            risk: RiskConfig::default(),
            sync: SyncConfig::default(),
            trust_zone: TzConfig::default(),
            phases: PhaseConfig::default(),
            output: OutputConfig::default(),
            derived: None,
        }
    }
}

/// Parses and fully validates a scenario document. A `chain_file` is read
/// relative to `base_dir`.
pub fn parse_config(document: &str, base_dir: &Path) -> Result<ScenarioConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(document);
    let raw: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ConfigError::at(if path == "." { "<document>".into() } else { path }, e.into_inner().to_string())
    })?;
    raw.resolve(base_dir)
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|e| ConfigError::at(path.display().to_string(), e.to_string()))?;
    parse_config(&text, path.parent().unwrap_or(Path::new(".")))
}

fn check(ok: bool, path: &str, message: impl Into<String>) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::at(path, message))
    }
}

fn whole_steps(duration_s: f64, step_s: f64, path: &str) -> Result<usize, ConfigError> {
    check(duration_s.is_finite() && duration_s > 0.0, path, "duration must be positive")?;
    let steps = duration_s / step_s;
    let rounded = steps.round();
    check(
        rounded >= 1.0 && (steps - rounded).abs() < 1e-9,
        path,
        format!("duration is {steps} steps; must be a whole number of steps"),
    )?;
    Ok(rounded as usize)
}

fn probability(v: f64, path: &str) -> Result<(), ConfigError> {
    check((0.0..=1.0).contains(&v), path, format!("{v} is outside [0, 1]"))
}

impl ScenarioConfig {
    fn resolve(mut self, base_dir: &Path) -> Result<Self, ConfigError> {
        // chain source
        let b = &mut self.backhaul;
        let doc = match (b.chain.take(), b.chain_file.take()) {
            (Some(_), Some(_)) => {
                return Err(ConfigError::at("backhaul", "give either chain or chain_file, not both"));
            }
            (Some(doc), None) => doc,
            (None, Some(file)) => {
                let path = base_dir.join(&file);
                let text = fs::read_to_string(&path)
                    .map_err(|e| ConfigError::at("backhaul.chain_file", format!("{}: {e}", path.display())))?;
                serde_json::from_str(&text).map_err(|e| ConfigError::at("backhaul.chain_file", e.to_string()))?
            }
            (None, None) => ChainDocument::default(),
        };
        let mut doc = doc;
        if let Some(cssr) = b.cssr.take() {
            doc.cssr = cssr;
        }
        let structure = if b.strict_structure { Structure::Strict } else { Structure::Relaxed };
        BackhaulChain::from_document(&doc, structure).map_err(|e| ConfigError::at("backhaul.chain", e.to_string()))?;
        b.chain = Some(doc);

        let supplied = self.derived.take();
        let derived = self.validate()?;
        if let Some(d) = supplied {
            check(d == derived, "derived", "read-only values do not match the configuration")?;
        }
        self.derived = Some(derived);
        Ok(self)
    }

    fn validate(&self) -> Result<Derived, ConfigError> {
        let finite_pos = |v: f64| v.is_finite() && v > 0.0;
        check(finite_pos(self.density_per_km2), "density_per_km2", "must be positive")?;
        let r = &self.region;
        check(finite_pos(r.half_width_km), "region.half_width_km", "must be positive")?;
        check(
            finite_pos(r.ec_radius_km) && r.ec_radius_km <= r.half_width_km,
            "region.ec_radius_km",
            "must be positive and no larger than half_width_km",
        )?;
        let ue_count = self.world_params().population();
        check(ue_count >= 1, "density_per_km2", "region would hold no UEs")?;

        let m = &self.mobility;
        check(finite_pos(m.step_seconds), "mobility.step_seconds", "must be positive")?;
        check(
            finite_pos(m.sub_step_seconds) && m.sub_step_seconds <= m.step_seconds,
            "mobility.sub_step_seconds",
            "must be positive and no longer than step_seconds",
        )?;
        for (name, d) in [("low", m.basic_speed.low), ("medium", m.basic_speed.medium), ("high", m.basic_speed.high)] {
            check(d.mean.is_finite(), &format!("mobility.basic_speed.{name}.mean"), "must be finite")?;
            check(d.std.is_finite() && d.std >= 0.0, &format!("mobility.basic_speed.{name}.std"), "must be >= 0")?;
        }
        let f = &m.speed_factors;
        for (name, row) in [("low", f.low), ("medium", f.medium), ("high", f.high)] {
            for (i, v) in row.iter().enumerate() {
                check(v.is_finite() && *v >= 0.0, &format!("mobility.speed_factors.{name}[{i}]"), "must be >= 0")?;
            }
        }

        let k = &self.risk;
        check(k.horizon_steps >= 1, "risk.horizon_steps", "must be at least 1")?;
        check(finite_pos(k.bin_width_km), "risk.bin_width_km", "must be positive")?;
        check(
            k.max_distance_km.is_finite() && k.max_distance_km >= k.bin_width_km,
            "risk.max_distance_km",
            "must be at least bin_width_km",
        )?;

        let s = &self.sync;
        check(s.interval_steps >= 1, "sync.interval_steps", "must be at least 1")?;
        probability(s.threshold, "sync.threshold")?;
        for (i, &t) in s.thresholds.iter().enumerate() {
            probability(t, &format!("sync.thresholds[{i}]"))?;
        }
        check(s.traffic_weight.is_finite() && s.traffic_weight >= 0.0, "sync.traffic_weight", "must be >= 0")?;
        check(self.trust_zone.handback_batch >= 1, "trust_zone.handback_batch", "must be at least 1")?;

        let p = &self.phases;
        let step = m.step_seconds;
        Ok(Derived {
            ue_count,
            warmup_steps: whole_steps(p.warmup_hours * 3600.0, step, "phases.warmup_hours")?,
            training_steps: whole_steps(p.training_hours * 3600.0, step, "phases.training_hours")?,
            testing_steps: whole_steps(p.testing_days * 86_400.0, step, "phases.testing_days")?,
        })
    }

    /// Values computed during parsing. Panics on an unparsed config.
    pub fn derived(&self) -> Derived {
        self.derived.expect("configuration was resolved by parse_config")
    }

    pub fn chain(&self) -> BackhaulChain {
        let doc = self.backhaul.chain.clone().unwrap_or_default();
        let structure = if self.backhaul.strict_structure { Structure::Strict } else { Structure::Relaxed };
        BackhaulChain::from_document(&doc, structure).expect("chain was validated by parse_config")
    }

    pub fn world_params(&self) -> WorldParams {
        let m = &self.mobility;
        let defaults = SpeedTable::default();
        WorldParams {
            region: RegionMap {
                half_width_m: self.region.half_width_km * 1000.0,
                ec_radius_m: self.region.ec_radius_km * 1000.0,
            },
            speeds: SpeedTable {
                basic: [defaults.basic[0], m.basic_speed.low, m.basic_speed.medium, m.basic_speed.high],
                factors: [defaults.factors[0], m.speed_factors.low, m.speed_factors.medium, m.speed_factors.high],
            },
            density_per_km2: self.density_per_km2,
            step_seconds: m.step_seconds,
            sub_step_seconds: m.sub_step_seconds,
            spawn: m.spawn,
        }
    }

    pub fn training_params(&self) -> TrainingParams {
        TrainingParams {
            horizon_steps: self.risk.horizon_steps,
            bin_width_km: self.risk.bin_width_km,
            max_distance_km: self.risk.max_distance_km,
        }
    }

    /// The policy `simulate` runs.
    pub fn primary_threshold(&self) -> ThresholdSpec {
        if self.sync.enabled {
            ThresholdSpec::Level(self.sync.threshold)
        } else {
            ThresholdSpec::Disabled
        }
    }

    pub fn policy(&self, spec: ThresholdSpec) -> SyncPolicy {
        spec.policy(self.sync.interval_steps, self.sync.profile_validity)
    }

    /// Sweep thresholds from the configuration, baseline first.
    pub fn sweep_thresholds(&self) -> Vec<ThresholdSpec> {
        std::iter::once(ThresholdSpec::Disabled)
            .chain(self.sync.thresholds.iter().map(|&t| ThresholdSpec::Level(t)))
            .collect()
    }

    /// Pretty JSON of the resolved configuration.
    pub fn echo(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(doc: &str) -> Result<ScenarioConfig, ConfigError> {
        parse_config(doc, Path::new("."))
    }

    #[test]
    fn empty_document_gives_defaults() {
        let c = parse("{}").unwrap();
        assert_eq!(c.density_per_km2, 100.0);
        assert_eq!(
            c.derived(),
            Derived { ue_count: 6400, warmup_steps: 240, training_steps: 144, testing_steps: 4320 }
        );
        assert_eq!(c.chain(), BackhaulChain::reference());
        assert_eq!(c.sync.interval_steps, 3);
        assert_eq!(c.trust_zone.trigger_states.iter().map(|s| s.get()).collect::<Vec<_>>(), [4, 5, 9]);
    }

    #[test]
    fn threshold_out_of_range_names_path() {
        let err = parse(r#"{"sync":{"thresholds":[1.5]}}"#).unwrap_err();
        assert_eq!(err.path, "sync.thresholds[0]");
    }

    #[test]
    fn partial_sections_keep_remaining_defaults() {
        let docs = [
            r#"{"trust_zone":{"trigger_states":[9]}}"#,
            r#"{"mobility":{"basic_speed":{"high":{"mean":30,"std":4}}}}"#,
            r#"{"mobility":{"speed_factors":{"low":[1,1,1,1,1]}}}"#,
            r#"{"region":{"ec_radius_km":1.5}}"#,
            r#"{"risk":{"horizon_steps":2}}"#,
            r#"{"sync":{"interval_steps":6}}"#,
            r#"{"phases":{"testing_days":1}}"#,
            r#"{"backhaul":{"initial_state":2}}"#,
            r#"{"output":{}}"#,
        ];
        for doc in docs {
            let c = parse(doc).unwrap_or_else(|e| panic!("{doc}: {e}"));
            assert_eq!(c.density_per_km2, 100.0, "{doc}");
        }
        let c = parse(docs[0]).unwrap();
        assert_eq!(c.trust_zone.handback_batch, 100);
        let c = parse(docs[1]).unwrap();
        assert_eq!((c.mobility.basic_speed.high.mean, c.mobility.basic_speed.high.std), (30.0, 4.0));
        assert_eq!((c.mobility.basic_speed.medium.mean, c.mobility.basic_speed.medium.std), (10.0, 2.0));
    }

    #[test]
    fn reference_density_reports_population() {
        let c = parse(r#"{"density_per_km2": 6250}"#).unwrap();
        assert_eq!(c.derived().ue_count, 400_000);
        assert!(c.echo().contains("\"ue_count\": 400000"));
    }

    #[test]
    fn unknown_keys_rejected_with_path() {
        let err = parse(r#"{"sync":{"treshold":0.1}}"#).unwrap_err();
        assert_eq!(err.path, "sync.treshold");
        assert!(err.message.contains("treshold"), "{err}");
        let err = parse(r#"{"bogus":1}"#).unwrap_err();
        assert!(err.message.contains("bogus"));
    }

    #[test]
    fn bad_trigger_state_rejected() {
        let err = parse(r#"{"trust_zone":{"trigger_states":[4,10]}}"#).unwrap_err();
        assert_eq!(err.path, "trust_zone.trigger_states[1]");
    }

    #[test]
    fn bad_chain_rejected() {
        let mut doc = ChainDocument::default();
        doc.transition[0][0] = 0.9;
        let json = format!(r#"{{"backhaul":{{"chain":{}}}}}"#, serde_json::to_string(&doc).unwrap());
        let err = parse(&json).unwrap_err();
        assert_eq!(err.path, "backhaul.chain");
        assert!(err.message.contains("row 1"));
    }

    #[test]
    fn cssr_override_applies() {
        let c = parse(r#"{"backhaul":{"cssr":[1.0,0.9999,0.999,0.99,0.9,0.999,0.99,0.9,0.0]}}"#).unwrap();
        assert_eq!(c.chain().cssr(StateIndex::new(1).unwrap()), 1.0);
        assert!(c.backhaul.cssr.is_none());
    }

    #[test]
    fn fractional_step_count_rejected() {
        let err = parse(r#"{"phases":{"warmup_hours":0.1}}"#).unwrap_err();
        assert_eq!(err.path, "phases.warmup_hours");
        let c = parse(r#"{"phases":{"testing_days":1}}"#).unwrap();
        assert_eq!(c.derived().testing_steps, 144);
    }

    #[test]
    fn echo_round_trips() {
        for doc in ["{}", r#"{"density_per_km2": 6250, "sync": {"enabled": false}}"#] {
            let c = parse(doc).unwrap();
            assert_eq!(parse(&c.echo()).unwrap(), c);
        }
    }

    #[test]
    fn inconsistent_derived_rejected() {
        let c = parse("{}").unwrap();
        let tampered = c.echo().replace("\"ue_count\": 6400", "\"ue_count\": 7");
        assert_eq!(parse(&tampered).unwrap_err().path, "derived");
    }

    #[test]
    fn chain_file_is_inlined() {
        let dir = std::env::temp_dir().join(format!("tzsim-config-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        fs::write(dir.join("chain.json"), serde_json::to_string(&ChainDocument::default()).unwrap()).unwrap();
        let c = parse_config(r#"{"backhaul":{"chain_file":"chain.json"}}"#, &dir).unwrap();
        assert!(c.backhaul.chain_file.is_none());
        assert_eq!(c.chain(), BackhaulChain::reference());
        fs::remove_dir_all(&dir).unwrap();
    }
}
