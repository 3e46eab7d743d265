//! The simulated region and its UE population.
//!
//! The region is the square `[-h, h]²` (default `h` = 4 km) with the edge
//! cloud (EC) disk of radius 2 km at the origin. Outside the disk, the four
//! surrounding areas are the quadrant remainders, numbered counterclockwise
//! from the `x ≥ 0, y ≥ 0` quadrant. Positions are stored in metres.
//!
//! Motion is an extended random walk: every moving UE draws one direction per
//! step and travels at `basic_speed × factor(class, area)`, where the area is
//! re-evaluated on every sub-step. A UE that crosses the square's boundary
//! leaves the region and is replaced by a newly arriving UE.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;
use std::io::{self, Write};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{stream, StreamTag};

pub const AREA_COUNT: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Area {
    #[serde(rename = "EC")]
    Ec,
    I,
    II,
    III,
    IV,
}

impl Area {
    pub const ALL: [Area; AREA_COUNT] = [Area::Ec, Area::I, Area::II, Area::III, Area::IV];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Area::Ec => "EC",
            Area::I => "I",
            Area::II => "II",
            Area::III => "III",
            Area::IV => "IV",
        }
    }
}

impl fmt::Display for Area {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum MobilityClass {
    Still,
    Low,
    Medium,
    High,
}

impl MobilityClass {
    pub const ALL: [MobilityClass; 4] =
        [MobilityClass::Still, MobilityClass::Low, MobilityClass::Medium, MobilityClass::High];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            MobilityClass::Still => "STILL",
            MobilityClass::Low => "LOW",
            MobilityClass::Medium => "MEDIUM",
            MobilityClass::High => "HIGH",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        MobilityClass::ALL.into_iter().find(|c| c.label() == label)
    }
}

impl fmt::Display for MobilityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position {
    pub x_m: f64,
    pub y_m: f64,
}

impl Position {
    pub const ORIGIN: Position = Position { x_m: 0.0, y_m: 0.0 };

    pub fn new(x_m: f64, y_m: f64) -> Self {
        Position { x_m, y_m }
    }

    pub fn from_km(x_km: f64, y_km: f64) -> Self {
        Position { x_m: x_km * 1000.0, y_m: y_km * 1000.0 }
    }

    pub fn norm_m(self) -> f64 {
        self.x_m.hypot(self.y_m)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("position ({x_m} m, {y_m} m) lies outside the region")]
pub struct OutsideRegion {
    pub x_m: f64,
    pub y_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionMap {
    pub half_width_m: f64,
    pub ec_radius_m: f64,
}

impl Default for RegionMap {
    fn default() -> Self {
        RegionMap { half_width_m: 4000.0, ec_radius_m: 2000.0 }
    }
}

impl RegionMap {
    pub fn area_km2(&self) -> f64 {
        let side_km = 2.0 * self.half_width_m / 1000.0;
        side_km * side_km
    }

    pub fn contains(&self, p: Position) -> bool {
        p.x_m.abs() <= self.half_width_m && p.y_m.abs() <= self.half_width_m
    }

    /// The EC disk is closed: its boundary belongs to EC.
    pub fn in_ec(&self, p: Position) -> bool {
        p.norm_m() <= self.ec_radius_m
    }

    pub fn classify(&self, p: Position) -> Result<Area, OutsideRegion> {
        if !self.contains(p) {
            return Err(OutsideRegion { x_m: p.x_m, y_m: p.y_m });
        }
        Ok(self.classify_unchecked(p))
    }

    fn classify_unchecked(&self, p: Position) -> Area {
        if self.in_ec(p) {
            return Area::Ec;
        }
        match (p.x_m >= 0.0, p.y_m >= 0.0) {
            (true, true) => Area::I,
            (false, true) => Area::II,
            (false, false) => Area::III,
            (true, false) => Area::IV,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeedDistribution {
    pub mean: f64,
    pub std: f64,
}

/// Basic-speed distributions and per-area scaling factors.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedTable {
    /// Indexed by `MobilityClass::index`; STILL is ignored.
    pub basic: [SpeedDistribution; 4],
    /// `factors[class][area]`, areas in `Area::ALL` order.
    pub factors: [[f64; AREA_COUNT]; 4],
}

impl Default for SpeedTable {
    fn default() -> Self {
        SpeedTable {
            basic: [
                SpeedDistribution { mean: 0.0, std: 0.0 },
                SpeedDistribution { mean: 1.5, std: 0.5 },
                SpeedDistribution { mean: 10.0, std: 2.0 },
                SpeedDistribution { mean: 40.0, std: 5.0 },
            ],
            factors: [
                [0.0; AREA_COUNT],
                [1.0, 1.0, 1.0, 1.0, 1.0],
                [0.7, 1.0, 0.9, 0.8, 0.9],
                [0.2, 1.0, 0.9, 0.85, 0.8],
            ],
        }
    }
}

impl SpeedTable {
    /// Basic speed in m/s; normal draws are clamped at zero.
    pub fn sample_basic_speed<R: Rng + ?Sized>(&self, class: MobilityClass, rng: &mut R) -> f64 {
        if class == MobilityClass::Still {
            return 0.0;
        }
        let d = self.basic[class.index()];
        let normal = Normal::new(d.mean, d.std).expect("validated speed distribution");
        normal.sample(rng).max(0.0)
    }

    pub fn factor(&self, class: MobilityClass, area: Area) -> f64 {
        if class == MobilityClass::Still {
            return 0.0;
        }
        self.factors[class.index()][area.index()]
    }

    pub fn effective_speed(&self, class: MobilityClass, area: Area, basic: f64) -> f64 {
        basic * self.factor(class, area)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SpawnMode {
    /// Arrivals appear on the square's boundary heading inward.
    #[default]
    Boundary,
    /// Arrivals appear uniformly inside the square with no heading constraint.
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UeRecord {
    pub id: u64,
    pub position: Position,
    pub class: MobilityClass,
    pub basic_speed: f64,
    /// Inward normal of the boundary side the UE arrived on; constrains the
    /// direction of its first move only.
    pub arrival_heading: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldParams {
    pub region: RegionMap,
    pub speeds: SpeedTable,
    pub density_per_km2: f64,
    pub step_seconds: f64,
    pub sub_step_seconds: f64,
    pub spawn: SpawnMode,
}

impl Default for WorldParams {
    fn default() -> Self {
        WorldParams {
            region: RegionMap::default(),
            speeds: SpeedTable::default(),
            density_per_km2: 100.0,
            step_seconds: 600.0,
            sub_step_seconds: 10.0,
            spawn: SpawnMode::Boundary,
        }
    }
}

impl WorldParams {
    pub fn population(&self) -> usize {
        (self.density_per_km2 * self.region.area_km2()).round() as usize
    }
}

/// Where a UE ended up after one step of motion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Movement {
    Stayed(Position),
    /// Left the square during the step, `elapsed_s` seconds in (at the end of
    /// the sub-step in which the crossing happened).
    Exited { elapsed_s: f64 },
}

/// Integrates one step of motion along a fixed heading.
pub fn integrate_motion(params: &WorldParams, ue: &UeRecord, heading: f64) -> Movement {
    if ue.class == MobilityClass::Still || ue.basic_speed == 0.0 {
        return Movement::Stayed(ue.position);
    }
    let (dy, dx) = heading.sin_cos();
    let mut pos = ue.position;
    let mut elapsed = 0.0;
    let step = params.step_seconds;
    while elapsed < step {
        let dt = params.sub_step_seconds.min(step - elapsed);
        let area = params.region.classify_unchecked(pos);
        let v = params.speeds.effective_speed(ue.class, area, ue.basic_speed);
        pos.x_m += v * dt * dx;
        pos.y_m += v * dt * dy;
        elapsed += dt;
        if !params.region.contains(pos) {
            return Movement::Exited { elapsed_s: elapsed };
        }
    }
    Movement::Stayed(pos)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepReport {
    pub departed: Vec<u64>,
    pub arrived: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    params: WorldParams,
    seed: u64,
    ues: Vec<UeRecord>,
    next_id: u64,
    /// Number of completed steps.
    step: u64,
}

impl World {
    /// Places `params.population()` UEs uniformly over the square with
    /// uniformly assigned classes.
    pub fn new(params: WorldParams, seed: u64) -> Self {
        let n = params.population();
        let ues = (0..n as u64)
            .map(|id| {
                let mut rng = stream(seed, StreamTag::Init, id, 0);
                let position = uniform_in_square(&params.region, &mut rng);
                let class = MobilityClass::ALL[rng.random_range(0..4)];
                let basic_speed = params.speeds.sample_basic_speed(class, &mut rng);
                UeRecord { id, position, class, basic_speed, arrival_heading: None }
            })
            .collect();
        World { params, seed, ues, next_id: n as u64, step: 0 }
    }

    /// Builds a world from explicit UEs; the population target is their count.
    pub fn from_ues(mut params: WorldParams, seed: u64, ues: Vec<UeRecord>) -> Self {
        let next_id = ues.iter().map(|u| u.id + 1).max().unwrap_or(0);
        params.density_per_km2 = ues.len() as f64 / params.region.area_km2();
        World { params, seed, ues, next_id, step: 0 }
    }

    pub fn params(&self) -> &WorldParams {
        &self.params
    }

    pub fn region(&self) -> &RegionMap {
        &self.params.region
    }

    pub fn ues(&self) -> &[UeRecord] {
        &self.ues
    }

    pub fn step_index(&self) -> u64 {
        self.step
    }

    pub fn area_counts(&self) -> [usize; AREA_COUNT] {
        let mut counts = [0; AREA_COUNT];
        for ue in &self.ues {
            counts[self.params.region.classify_unchecked(ue.position).index()] += 1;
        }
        counts
    }

    /// The heading a UE uses for this step's motion.
    fn heading<R: Rng + ?Sized>(ue: &UeRecord, rng: &mut R) -> f64 {
        match ue.arrival_heading {
            Some(normal) => normal + (rng.random::<f64>() - 0.5) * PI,
            None => rng.random::<f64>() * TAU,
        }
    }

    /// Advances every UE by one step and replaces departures.
    ///
    /// Per-UE draws come from streams keyed by `(seed, UE id, step)`, so the
    /// result does not depend on the rayon pool size.
    pub fn advance_step(&mut self) -> StepReport {
        let step = self.step;
        let seed = self.seed;
        let params = &self.params;
        let moves: Vec<Movement> = self
            .ues
            .par_iter()
            .map(|ue| {
                if ue.class == MobilityClass::Still {
                    return Movement::Stayed(ue.position);
                }
                let mut rng = stream(seed, StreamTag::Motion, ue.id, step);
                let heading = World::heading(ue, &mut rng);
                integrate_motion(params, ue, heading)
            })
            .collect();

        let mut report = StepReport::default();
        for (slot, movement) in moves.into_iter().enumerate() {
            match movement {
                Movement::Stayed(p) => {
                    let ue = &mut self.ues[slot];
                    ue.arrival_heading = None;
                    ue.position = p;
                }
                Movement::Exited { .. } => {
                    report.departed.push(self.ues[slot].id);
                    let fresh = self.spawn_replacement();
                    report.arrived.push(fresh.id);
                    self.ues[slot] = fresh;
                }
            }
        }
        self.step += 1;
        report
    }

    /// Creates a new arriving UE with a fresh id.
    pub fn spawn_replacement(&mut self) -> UeRecord {
        let id = self.next_id;
        self.next_id += 1;
        let mut rng = stream(self.seed, StreamTag::Spawn, id, self.step);
        let region = &self.params.region;
        let (position, arrival_heading) = match self.params.spawn {
            SpawnMode::Boundary => {
                let (p, normal) = uniform_on_boundary(region, &mut rng);
                (p, Some(normal))
            }
            SpawnMode::Uniform => (uniform_in_square(region, &mut rng), None),
        };
        let class = MobilityClass::ALL[rng.random_range(0..4)];
        let basic_speed = self.params.speeds.sample_basic_speed(class, &mut rng);
        UeRecord { id, position, class, basic_speed, arrival_heading }
    }

    pub fn snapshot(&self) -> WorldSnapshot {
        WorldSnapshot { step: self.step, ues: self.ues.clone() }
    }
}

fn uniform_in_square<R: Rng + ?Sized>(region: &RegionMap, rng: &mut R) -> Position {
    let h = region.half_width_m;
    Position::new(rng.random_range(-h..=h), rng.random_range(-h..=h))
}

/// Uniform point on the perimeter plus the inward normal of its side.
fn uniform_on_boundary<R: Rng + ?Sized>(region: &RegionMap, rng: &mut R) -> (Position, f64) {
    let h = region.half_width_m;
    let side = 2.0 * h;
    let u = rng.random::<f64>() * 4.0 * side;
    let along = u % side - h;
    match (u / side) as usize {
        0 => (Position::new(along, -h), FRAC_PI_2),
        1 => (Position::new(h, along), PI),
        2 => (Position::new(-along, h), -FRAC_PI_2),
        _ => (Position::new(-h, -along), 0.0),
    }
}

/// Per-step area occupancy recorded during warm-up.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WarmupReport {
    pub area_counts: Vec<[usize; AREA_COUNT]>,
}

impl WarmupReport {
    /// Coefficient of variation of each area's count over the last `window`
    /// steps.
    pub fn tail_cv(&self, window: usize) -> [f64; AREA_COUNT] {
        let tail = &self.area_counts[self.area_counts.len().saturating_sub(window)..];
        let n = tail.len() as f64;
        let mut out = [0.0; AREA_COUNT];
        for (a, cv) in out.iter_mut().enumerate() {
            let mean = tail.iter().map(|c| c[a] as f64).sum::<f64>() / n;
            let var = tail.iter().map(|c| (c[a] as f64 - mean).powi(2)).sum::<f64>() / n;
            *cv = if mean > 0.0 { var.sqrt() / mean } else { 0.0 };
        }
        out
    }
}

pub fn run_warmup(world: &mut World, steps: usize) -> WarmupReport {
    let mut report = WarmupReport { area_counts: Vec::with_capacity(steps) };
    for _ in 0..steps {
        world.advance_step();
        report.area_counts.push(world.area_counts());
    }
    report
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldSnapshot {
    pub step: u64,
    pub ues: Vec<UeRecord>,
}

pub const SNAPSHOT_HEADER: &str = "step,ue_id,x_km,y_km,class,area,synced,trust";

/// Writes a snapshot as CSV; `synced` and `trust` are looked up per UE id.
pub fn write_snapshot_csv<W: Write>(
    out: &mut W,
    snapshot: &WorldSnapshot,
    region: &RegionMap,
    synced: impl Fn(u64) -> bool,
    trust: impl Fn(u64) -> String,
) -> io::Result<()> {
    writeln!(out, "{SNAPSHOT_HEADER}")?;
    for ue in &snapshot.ues {
        writeln!(
            out,
            "{},{},{:.6},{:.6},{},{},{},{}",
            snapshot.step,
            ue.id,
            ue.position.x_m / 1000.0,
            ue.position.y_m / 1000.0,
            ue.class,
            region.classify_unchecked(ue.position),
            synced(ue.id),
            trust(ue.id),
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, StreamTag};

    fn ue(id: u64, x_km: f64, y_km: f64, class: MobilityClass, speed: f64) -> UeRecord {
        UeRecord { id, position: Position::from_km(x_km, y_km), class, basic_speed: speed, arrival_heading: None }
    }

    #[test]
    fn classify_examples() {
        let r = RegionMap::default();
        assert_eq!(r.classify(Position::ORIGIN).unwrap(), Area::Ec);
        assert_eq!(r.classify(Position::from_km(2.1, 0.0)).unwrap(), Area::I);
        assert_eq!(r.classify(Position::from_km(-3.0, -3.0)).unwrap(), Area::III);
        assert_eq!(r.classify(Position::from_km(-3.0, 3.0)).unwrap(), Area::II);
        assert_eq!(r.classify(Position::from_km(3.0, -3.0)).unwrap(), Area::IV);
        assert_eq!(r.classify(Position::from_km(2.0, 0.0)).unwrap(), Area::Ec);
        assert_eq!(r.classify(Position::from_km(4.0, 4.0)).unwrap(), Area::I);
        assert!(r.classify(Position::from_km(4.01, 0.0)).is_err());
    }

    #[test]
    fn still_speed_is_zero() {
        let t = SpeedTable::default();
        let mut rng = stream(1, StreamTag::Auxiliary, 0, 0);
        assert_eq!(t.sample_basic_speed(MobilityClass::Still, &mut rng), 0.0);
    }

    #[test]
    fn high_speed_moments() {
        let t = SpeedTable::default();
        let mut rng = stream(2, StreamTag::Auxiliary, 0, 0);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| t.sample_basic_speed(MobilityClass::High, &mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let std = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!((39.9..=40.1).contains(&mean), "mean {mean}");
        assert!((4.9..=5.1).contains(&std), "std {std}");
    }

    #[test]
    fn low_speed_clamped() {
        let t = SpeedTable::default();
        let mut rng = stream(3, StreamTag::Auxiliary, 0, 0);
        assert!((0..100_000).all(|_| t.sample_basic_speed(MobilityClass::Low, &mut rng) >= 0.0));
    }

    #[test]
    fn effective_speed_examples() {
        let t = SpeedTable::default();
        assert_eq!(t.effective_speed(MobilityClass::High, Area::Ec, 40.0), 8.0);
        assert_eq!(t.effective_speed(MobilityClass::Medium, Area::III, 10.0), 8.0);
        for a in Area::ALL {
            assert_eq!(t.effective_speed(MobilityClass::Low, a, 1.5), 1.5);
            assert_eq!(t.effective_speed(MobilityClass::Still, a, 3.0), 0.0);
        }
    }

    #[test]
    fn still_world_does_not_move() {
        let ues: Vec<_> = (0..20).map(|i| ue(i, -3.5 + 0.3 * i as f64, 0.1 * i as f64, MobilityClass::Still, 0.0)).collect();
        let mut w = World::from_ues(WorldParams::default(), 9, ues.clone());
        for _ in 0..5 {
            let r = w.advance_step();
            assert!(r.departed.is_empty());
        }
        assert_eq!(w.ues(), &ues[..]);
    }

    #[test]
    fn low_ue_moves_900_m() {
        let params = WorldParams::default();
        let u = ue(0, 0.0, 0.0, MobilityClass::Low, 1.5);
        let heading = 0.7;
        match integrate_motion(&params, &u, heading) {
            Movement::Stayed(p) => {
                assert!((p.norm_m() - 900.0).abs() < 1e-9, "{}", p.norm_m());
                assert!((p.y_m.atan2(p.x_m) - heading).abs() < 1e-12);
            }
            m => panic!("unexpected {m:?}"),
        }
    }

    #[test]
    fn high_ue_exits_after_crossing_ec() {
        // 2000 m at 8 m/s (250 s) then 2000 m at 40 m/s (50 s); the sub-step
        // starting exactly on the closed EC boundary still runs at EC speed.
        let params = WorldParams::default();
        let u = ue(0, 0.0, 0.0, MobilityClass::High, 40.0);
        match integrate_motion(&params, &u, 0.0) {
            Movement::Exited { elapsed_s } => {
                assert!((300.0..=310.0).contains(&elapsed_s), "{elapsed_s}");
                assert_eq!(elapsed_s, 310.0);
            }
            m => panic!("unexpected {m:?}"),
        }
        let mut w = World::from_ues(params, 1, vec![u]);
        let r = w.advance_step();
        assert_eq!(r.departed, vec![0]);
        assert_eq!(w.ues().len(), 1);
        assert_ne!(w.ues()[0].id, 0);
    }

    #[test]
    fn replacements_spawn_on_boundary() {
        let mut w = World::new(WorldParams { density_per_km2: 1.0, ..Default::default() }, 5);
        for _ in 0..2000 {
            let fresh = w.spawn_replacement();
            let m = fresh.position.x_m.abs().max(fresh.position.y_m.abs());
            assert!((m - 4000.0).abs() < 1e-9, "{m}");
            let normal = fresh.arrival_heading.unwrap();
            // the normal points into the square
            let probe = Position::new(
                fresh.position.x_m + normal.cos() * 1.0,
                fresh.position.y_m + normal.sin() * 1.0,
            );
            assert!(w.region().contains(probe));
        }
    }

    #[test]
    fn replacement_classes_uniform() {
        let mut w = World::new(WorldParams { density_per_km2: 1.0, ..Default::default() }, 6);
        let n = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[w.spawn_replacement().class.index()] += 1;
        }
        for c in counts {
            assert!((c as f64 / n as f64 - 0.25).abs() < 0.01, "{counts:?}");
        }
    }

    #[test]
    fn population_is_conserved() {
        let mut w = World::new(WorldParams { density_per_km2: 20.0, ..Default::default() }, 11);
        let n = w.ues().len();
        assert_eq!(n, 1280);
        let mut departures = 0;
        for _ in 0..50 {
            let r = w.advance_step();
            departures += r.departed.len();
            assert_eq!(r.departed.len(), r.arrived.len());
            assert_eq!(w.ues().len(), n);
            assert!(w.ues().iter().all(|u| w.region().contains(u.position)));
        }
        assert!(departures > 0);
    }

    #[test]
    fn warmup_with_still_population_is_static() {
        let ues: Vec<_> = (0..64).map(|i| ue(i, -3.9 + 0.12 * i as f64, 1.0, MobilityClass::Still, 0.0)).collect();
        let mut w = World::from_ues(WorldParams::default(), 2, ues);
        let rep = run_warmup(&mut w, 240);
        assert_eq!(rep.area_counts.len(), 240);
        assert!(rep.area_counts.iter().all(|c| *c == rep.area_counts[0]));
        assert_eq!(w.ues().len(), 64);
    }

    #[test]
    fn snapshot_csv_layout() {
        let w = World::from_ues(WorldParams::default(), 0, vec![ue(3, 0.5, -0.25, MobilityClass::Medium, 9.0)]);
        let mut buf = Vec::new();
        write_snapshot_csv(&mut buf, &w.snapshot(), w.region(), |_| true, |_| "none".into()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, format!("{SNAPSHOT_HEADER}\n0,3,0.500000,-0.250000,MEDIUM,EC,true,none\n"));
    }
}
