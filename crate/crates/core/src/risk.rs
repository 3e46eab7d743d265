//! Per-UE outage risk from learned motion statistics and the backhaul
//! forecast.
//!
//! Training bins every observed UE by `(mobility class, distance to the EC
//! centre)` and records, for the following `horizon_steps` step boundaries,
//! whether the UE was inside the EC at least once and how many of those
//! boundaries it spent inside. The risk of a UE combines the bin's arrival
//! probability and expected overlap with the chain's outage probability over
//! the same horizon.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backhaul::{BackhaulChain, ChainError, StateIndex};
use crate::mobility::{MobilityClass, RegionMap, UeRecord, WorldSnapshot};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RiskError {
    #[error("need at least {needed} consecutive snapshots for horizon {horizon}, got {got}")]
    ShortTrajectory { needed: usize, got: usize, horizon: usize },
    #[error("horizon must be at least one step")]
    ZeroHorizon,
    #[error("bin width must be positive and no larger than the distance range")]
    BadBins,
    #[error("motion model document: {0}")]
    Document(String),
    #[error(transparent)]
    Chain(#[from] ChainError),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ArrivalStats {
    /// Probability of being inside the EC at one or more of the next
    /// `horizon_steps` step boundaries.
    pub p_arrival: f64,
    /// Expected number of those boundaries spent inside the EC.
    pub expected_overlap: f64,
    /// Observations behind this bin; zero for bins filled from a neighbour.
    pub sample_count: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionModel {
    horizon_steps: usize,
    bin_width_m: f64,
    /// `bins[class][bin]`.
    bins: [Vec<ArrivalStats>; 4],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingParams {
    pub horizon_steps: usize,
    pub bin_width_km: f64,
    pub max_distance_km: f64,
}

impl Default for TrainingParams {
    fn default() -> Self {
        TrainingParams { horizon_steps: 3, bin_width_km: 0.25, max_distance_km: 6.0 }
    }
}

impl TrainingParams {
    fn bin_count(&self) -> Result<usize, RiskError> {
        if !(self.bin_width_km > 0.0) || !(self.max_distance_km >= self.bin_width_km) {
            return Err(RiskError::BadBins);
        }
        Ok((self.max_distance_km / self.bin_width_km - 1e-9).ceil() as usize)
    }
}

/// Learns arrival statistics from consecutive world snapshots.
pub fn train_motion_model(
    trajectories: &[WorldSnapshot],
    region: &RegionMap,
    params: TrainingParams,
) -> Result<MotionModel, RiskError> {
    let h = params.horizon_steps;
    if h == 0 {
        return Err(RiskError::ZeroHorizon);
    }
    let bin_count = params.bin_count()?;
    if trajectories.len() < h + 1 {
        return Err(RiskError::ShortTrajectory { needed: h + 1, got: trajectories.len(), horizon: h });
    }
    let bin_width_m = params.bin_width_km * 1000.0;

    let in_ec: Vec<HashMap<u64, bool>> = trajectories
        .iter()
        .map(|snap| snap.ues.iter().map(|u| (u.id, region.in_ec(u.position))).collect())
        .collect();

    #[derive(Clone, Copy, Default)]
    struct Acc {
        arrivals: u64,
        overlap: u64,
        n: u64,
    }
    let mut acc = vec![vec![Acc::default(); bin_count]; 4];
    for t in 0..trajectories.len() - h {
        for ue in &trajectories[t].ues {
            let inside = (1..=h)
                .filter(|&s| in_ec[t + s].get(&ue.id).copied().unwrap_or(false))
                .count() as u64;
            let cell = &mut acc[ue.class.index()][bin_index(ue, bin_width_m, bin_count)];
            cell.n += 1;
            cell.overlap += inside;
            cell.arrivals += u64::from(inside > 0);
        }
    }

    let bins = std::array::from_fn(|c| {
        let observed: Vec<usize> = (0..bin_count).filter(|&b| acc[c][b].n > 0).collect();
        (0..bin_count)
            .map(|b| {
                let a = acc[c][b];
                if a.n > 0 {
                    return ArrivalStats {
                        p_arrival: a.arrivals as f64 / a.n as f64,
                        expected_overlap: a.overlap as f64 / a.n as f64,
                        sample_count: a.n,
                    };
                }
                // nearest observed bin of the same class, lower index on ties
                match observed.iter().min_by_key(|&&o| (o.abs_diff(b), o)) {
                    Some(&o) => ArrivalStats {
                        p_arrival: acc[c][o].arrivals as f64 / acc[c][o].n as f64,
                        expected_overlap: acc[c][o].overlap as f64 / acc[c][o].n as f64,
                        sample_count: 0,
                    },
                    None => ArrivalStats::default(),
                }
            })
            .collect()
    });
    Ok(MotionModel { horizon_steps: h, bin_width_m, bins })
}

fn bin_index(ue: &UeRecord, bin_width_m: f64, bin_count: usize) -> usize {
    ((ue.position.norm_m() / bin_width_m) as usize).min(bin_count - 1)
}

impl MotionModel {
    pub fn horizon_steps(&self) -> usize {
        self.horizon_steps
    }

    pub fn bin_width_km(&self) -> f64 {
        self.bin_width_m / 1000.0
    }

    pub fn bin_count(&self) -> usize {
        self.bins[0].len()
    }

    pub fn bin(&self, class: MobilityClass, index: usize) -> &ArrivalStats {
        &self.bins[class.index()][index]
    }

    /// Statistics for the UE's class and distance bin; distances past the
    /// last bin use the last bin.
    pub fn arrival_stats(&self, ue: &UeRecord) -> &ArrivalStats {
        &self.bins[ue.class.index()][bin_index(ue, self.bin_width_m, self.bin_count())]
    }

    pub fn to_document(&self) -> MotionModelDocument {
        let mut bins = BTreeMap::new();
        for class in MobilityClass::ALL {
            for (i, s) in self.bins[class.index()].iter().enumerate() {
                bins.insert(
                    format!("{class}:{i}"),
                    BinDocument { p_arrival: s.p_arrival, expected_overlap: s.expected_overlap, n: s.sample_count },
                );
            }
        }
        MotionModelDocument { horizon_steps: self.horizon_steps, bin_width_km: self.bin_width_km(), bins }
    }

    pub fn from_document(doc: &MotionModelDocument) -> Result<Self, RiskError> {
        let bad = |m: String| RiskError::Document(m);
        if doc.horizon_steps == 0 {
            return Err(RiskError::ZeroHorizon);
        }
        if !(doc.bin_width_km > 0.0) {
            return Err(RiskError::BadBins);
        }
        let mut per_class: [BTreeMap<usize, ArrivalStats>; 4] = Default::default();
        for (key, b) in &doc.bins {
            let (class, idx) = key.split_once(':').ok_or_else(|| bad(format!("bad bin key {key:?}")))?;
            let class = MobilityClass::from_label(class).ok_or_else(|| bad(format!("unknown class in {key:?}")))?;
            let idx: usize = idx.parse().map_err(|_| bad(format!("bad bin index in {key:?}")))?;
            if !(0.0..=1.0).contains(&b.p_arrival)
                || !(0.0..=doc.horizon_steps as f64).contains(&b.expected_overlap)
            {
                return Err(bad(format!("bin {key} out of range")));
            }
            per_class[class.index()].insert(
                idx,
                ArrivalStats { p_arrival: b.p_arrival, expected_overlap: b.expected_overlap, sample_count: b.n },
            );
        }
        let count = per_class[0].len();
        if count == 0 {
            return Err(bad("no bins".into()));
        }
        let mut bins: [Vec<ArrivalStats>; 4] = Default::default();
        for (c, map) in per_class.into_iter().enumerate() {
            if map.len() != count || map.keys().last() != Some(&(count - 1)) {
                return Err(bad(format!("class {} does not have bins 0..{count}", MobilityClass::ALL[c])));
            }
            bins[c] = map.into_values().collect();
        }
        Ok(MotionModel { horizon_steps: doc.horizon_steps, bin_width_m: doc.bin_width_km * 1000.0, bins })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinDocument {
    pub p_arrival: f64,
    pub expected_overlap: f64,
    pub n: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionModelDocument {
    pub horizon_steps: usize,
    pub bin_width_km: f64,
    pub bins: BTreeMap<String, BinDocument>,
}

/// The backhaul part of the risk, computed once per state and horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackhaulOutlook {
    pub state: StateIndex,
    pub horizon_steps: usize,
    /// Probability of no outage over the horizon.
    pub survival: f64,
}

impl BackhaulOutlook {
    pub fn new(chain: &BackhaulChain, state: StateIndex, horizon_steps: usize) -> Result<Self, ChainError> {
        let survival = chain.survival_within(state, horizon_steps)?;
        Ok(BackhaulOutlook { state, horizon_steps, survival })
    }

    pub fn horizon_outage(&self) -> f64 {
        1.0 - self.survival
    }

    /// Per-step outage probability implied by the horizon probability.
    pub fn per_step_outage(&self) -> f64 {
        1.0 - self.survival.powf(1.0 / self.horizon_steps as f64)
    }
}

/// Strategy for turning motion statistics and a backhaul outlook into a risk.
pub trait RiskEstimator: Send + Sync {
    fn risk(&self, stats: &ArrivalStats, outlook: &BackhaulOutlook) -> f64;
}

/// `p_arrival × (1 − (1 − p_step)^expected_overlap)` with
/// `p_step = 1 − (1 − P_h)^(1/h)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ProductRisk;

impl RiskEstimator for ProductRisk {
    fn risk(&self, stats: &ArrivalStats, outlook: &BackhaulOutlook) -> f64 {
        if stats.p_arrival == 0.0 || stats.expected_overlap == 0.0 {
            return 0.0;
        }
        // (1 - p_step)^overlap == survival^(overlap / h); written this way so
        // overlap == h reproduces the horizon probability bit for bit.
        let exposure = stats.expected_overlap / outlook.horizon_steps as f64;
        let survive = outlook.survival.powf(exposure);
        (stats.p_arrival * (1.0 - survive)).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskEstimate {
    pub ue: u64,
    pub risk: f64,
    pub p_arrival: f64,
    pub expected_overlap: f64,
    pub p_outage_horizon: f64,
}

pub fn estimate_with_outlook<E: RiskEstimator + ?Sized>(
    estimator: &E,
    model: &MotionModel,
    ue: &UeRecord,
    outlook: &BackhaulOutlook,
) -> RiskEstimate {
    let stats = model.arrival_stats(ue);
    RiskEstimate {
        ue: ue.id,
        risk: estimator.risk(stats, outlook),
        p_arrival: stats.p_arrival,
        expected_overlap: stats.expected_overlap,
        p_outage_horizon: outlook.horizon_outage(),
    }
}

/// Risk of one UE for the model's horizon with the default estimator.
pub fn estimate_csso_risk(
    model: &MotionModel,
    ue: &UeRecord,
    chain: &BackhaulChain,
    backhaul_state: StateIndex,
) -> Result<RiskEstimate, ChainError> {
    let outlook = BackhaulOutlook::new(chain, backhaul_state, model.horizon_steps())?;
    Ok(estimate_with_outlook(&ProductRisk, model, ue, &outlook))
}
