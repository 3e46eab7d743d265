//! Backhaul reliability as a nine-state Markov chain.
//!
//! Each state pairs a central-security reliability level (the probability
//! that the central security server answers in time, "CSSR") with a network
//! condition. Per simulation step the chain moves once, and an outage of the
//! central security service (a "CSSO") occurs with probability
//! `1 - cssr(state)`.
//!
//! States are numbered 1..=9. The default layout is:
//!
//! | states | class          |
//! |--------|----------------|
//! | 1, 2   | healthy        |
//! | 3–5    | unhealthy      |
//! | 6–8    | under recovery |
//! | 9      | disconnected   |

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const NUM_STATES: usize = 9;

/// Row-major transition matrix; `m[i][j]` is the probability of moving from
/// state offset `i` to state offset `j`.
pub type TransitionMatrix = [[f64; NUM_STATES]; NUM_STATES];

const ROW_SUM_TOLERANCE: f64 = 1e-9;
const STATIONARY_RESIDUAL: f64 = 1e-12;
const STATIONARY_MAX_ITERATIONS: usize = 10_000_000;

/// Reference transition matrix of the backhaul chain.
pub const REFERENCE_TRANSITIONS: TransitionMatrix = [
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

/// Decade-spaced reliability levels; recovery states mirror the unhealthy ones.
pub const DEFAULT_CSSR: [f64; NUM_STATES] =
    [0.99999, 0.9999, 0.999, 0.99, 0.9, 0.999, 0.99, 0.9, 0.0];

pub const DEFAULT_CLASSES: [StateClass; NUM_STATES] = [
    StateClass::Healthy,
    StateClass::Healthy,
    StateClass::Unhealthy,
    StateClass::Unhealthy,
    StateClass::Unhealthy,
    StateClass::UnderRecovery,
    StateClass::UnderRecovery,
    StateClass::UnderRecovery,
    StateClass::Disconnected,
];

/// One of the nine chain states, numbered from 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct StateIndex(u8);

impl StateIndex {
    pub fn new(index: u8) -> Option<Self> {
        (1..=NUM_STATES as u8).contains(&index).then_some(StateIndex(index))
    }

    /// Builds a state from a zero-based offset. Panics when `offset >= 9`.
    pub fn from_offset(offset: usize) -> Self {
        assert!(offset < NUM_STATES, "state offset {offset} out of range");
        StateIndex(offset as u8 + 1)
    }

    pub const fn get(self) -> u8 {
        self.0
    }

    pub const fn offset(self) -> usize {
        self.0 as usize - 1
    }

    pub fn all() -> impl Iterator<Item = StateIndex> {
        (0..NUM_STATES).map(StateIndex::from_offset)
    }
}

impl TryFrom<u8> for StateIndex {
    type Error = String;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        StateIndex::new(value).ok_or_else(|| format!("state index {value} outside 1..=9"))
    }
}

impl From<StateIndex> for u8 {
    fn from(s: StateIndex) -> u8 {
        s.0
    }
}

impl fmt::Display for StateIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateClass {
    Healthy,
    Unhealthy,
    Disconnected,
    UnderRecovery,
}

impl StateClass {
    pub fn label(self) -> &'static str {
        match self {
            StateClass::Healthy => "healthy",
            StateClass::Unhealthy => "unhealthy",
            StateClass::Disconnected => "disconnected",
            StateClass::UnderRecovery => "under_recovery",
        }
    }

    fn in_band(self) -> bool {
        matches!(self, StateClass::Healthy | StateClass::Unhealthy)
    }
}

/// Whether `validate_chain` enforces the neighbour-level transition layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Structure {
    /// Only neighbour-level fluctuations plus the disaster, recovery and
    /// repair jumps are allowed, and the chain must be irreducible.
    Strict,
    /// Row-stochasticity and CSSR ordering only; used for fitted chains.
    Relaxed,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChainError {
    #[error("expected {expected} {what}, found {found}")]
    Shape { what: &'static str, expected: usize, found: usize },
    #[error("transition ({row},{col}) = {value} is negative or not finite")]
    BadEntry { row: usize, col: usize, value: f64 },
    #[error("row {row} sums to {sum}, not 1")]
    RowSum { row: usize, sum: f64 },
    #[error("cssr of state {state} = {value} is outside [0, 1]")]
    CssrRange { state: usize, value: f64 },
    #[error("disconnected state {state} has cssr {value}, must be 0")]
    DisconnectedCssr { state: usize, value: f64 },
    #[error("cssr must strictly decrease from state {from} to state {to}")]
    CssrOrder { from: usize, to: usize },
    #[error("transition ({row},{col}) is not structurally permitted")]
    Structure { row: usize, col: usize },
    #[error("chain is reducible: state {to} is unreachable from state {from}")]
    Reducible { from: usize, to: usize },
    #[error("forecast horizon must be at least one step")]
    ZeroHorizon,
    #[error("power iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
}

/// Positions of each class inside the chain, used by the structural rules.
struct Layout {
    /// Healthy and unhealthy states, ascending index (descending CSSR).
    band: Vec<usize>,
    unhealthy: Vec<usize>,
    /// Recovery states, ascending index; the first is the top of the ladder.
    recovery: Vec<usize>,
}

impl Layout {
    fn new(classes: &[StateClass; NUM_STATES]) -> Self {
        let pick = |f: &dyn Fn(StateClass) -> bool| -> Vec<usize> {
            (0..NUM_STATES).filter(|&i| f(classes[i])).collect()
        };
        Layout {
            band: pick(&|c| c.in_band()),
            unhealthy: pick(&|c| c == StateClass::Unhealthy),
            recovery: pick(&|c| c == StateClass::UnderRecovery),
        }
    }

    fn permitted(&self, classes: &[StateClass; NUM_STATES], from: usize, to: usize) -> bool {
        if from == to {
            return true;
        }
        let (cf, ct) = (classes[from], classes[to]);
        let band_pos = |s: usize| self.band.iter().position(|&b| b == s);
        let rec_pos = |s: usize| self.recovery.iter().position(|&r| r == s);

        if cf.in_band() {
            if ct == StateClass::Disconnected {
                return true;
            }
            if let (Some(a), Some(b)) = (band_pos(from), band_pos(to)) {
                return a.abs_diff(b) == 1;
            }
            if cf == StateClass::Unhealthy && ct == StateClass::UnderRecovery {
                let k = self.unhealthy.iter().position(|&u| u == from);
                return k.is_some() && k == rec_pos(to);
            }
            return false;
        }
        match cf {
            StateClass::Disconnected => self.recovery.last() == Some(&to),
            StateClass::UnderRecovery => {
                let p = rec_pos(from).expect("recovery state in layout");
                if p == 0 {
                    ct == StateClass::Healthy
                } else {
                    self.recovery[p - 1] == to
                }
            }
            _ => false,
        }
    }
}

/// Checks a chain definition. Indexes in errors are 1-based.
pub fn validate_chain(
    transition: &TransitionMatrix,
    cssr: &[f64; NUM_STATES],
    classes: &[StateClass; NUM_STATES],
    structure: Structure,
) -> Result<(), ChainError> {
    for (i, row) in transition.iter().enumerate() {
        for (j, &p) in row.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(ChainError::BadEntry { row: i + 1, col: j + 1, value: p });
            }
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
            return Err(ChainError::RowSum { row: i + 1, sum });
        }
    }
    for (i, &c) in cssr.iter().enumerate() {
        if !(0.0..=1.0).contains(&c) {
            return Err(ChainError::CssrRange { state: i + 1, value: c });
        }
        if classes[i] == StateClass::Disconnected && c != 0.0 {
            return Err(ChainError::DisconnectedCssr { state: i + 1, value: c });
        }
    }
    let layout = Layout::new(classes);
    for ladder in [&layout.band, &layout.recovery] {
        for w in ladder.windows(2) {
            if cssr[w[0]] <= cssr[w[1]] {
                return Err(ChainError::CssrOrder { from: w[0] + 1, to: w[1] + 1 });
            }
        }
    }
    if structure == Structure::Strict {
        for (i, row) in transition.iter().enumerate() {
            for (j, &p) in row.iter().enumerate() {
                if p > 0.0 && !layout.permitted(classes, i, j) {
                    return Err(ChainError::Structure { row: i + 1, col: j + 1 });
                }
            }
        }
        let reach = reachability(transition);
        for i in 0..NUM_STATES {
            for j in 0..NUM_STATES {
                if !reach[i][j] {
                    return Err(ChainError::Reducible { from: i + 1, to: j + 1 });
                }
            }
        }
    }
    Ok(())
}

/// Transitive closure of the positive-probability graph (reflexive).
fn reachability(t: &TransitionMatrix) -> [[bool; NUM_STATES]; NUM_STATES] {
    let mut r = [[false; NUM_STATES]; NUM_STATES];
    for i in 0..NUM_STATES {
        for j in 0..NUM_STATES {
            r[i][j] = i == j || t[i][j] > 0.0;
        }
    }
    for k in 0..NUM_STATES {
        for i in 0..NUM_STATES {
            if r[i][k] {
                for j in 0..NUM_STATES {
                    r[i][j] |= r[k][j];
                }
            }
        }
    }
    r
}

/// Number of closed communicating classes; more than one means the
/// stationary distribution is not unique.
fn closed_class_count(t: &TransitionMatrix) -> usize {
    let r = reachability(t);
    let mut seen = [false; NUM_STATES];
    let mut closed = 0;
    for i in 0..NUM_STATES {
        if seen[i] {
            continue;
        }
        let members: Vec<usize> = (0..NUM_STATES).filter(|&j| r[i][j] && r[j][i]).collect();
        for &m in &members {
            seen[m] = true;
        }
        let leaks = members
            .iter()
            .any(|&m| (0..NUM_STATES).any(|j| t[m][j] > 0.0 && !members.contains(&j)));
        if !leaks {
            closed += 1;
        }
    }
    closed
}

/// JSON form of a chain: `{"transition": [[..]], "cssr": [..], "class": [..]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainDocument {
    pub transition: Vec<Vec<f64>>,
    pub cssr: Vec<f64>,
    pub class: Vec<StateClass>,
}

impl Default for ChainDocument {
    fn default() -> Self {
        BackhaulChain::reference().to_document()
    }
}

/// A validated backhaul chain. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct BackhaulChain {
    transition: TransitionMatrix,
    cssr: [f64; NUM_STATES],
    classes: [StateClass; NUM_STATES],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stationary {
    pub distribution: [f64; NUM_STATES],
    /// False when several closed classes exist; the distribution is then the
    /// uniform vector.
    pub unique: bool,
    pub iterations: usize,
    pub residual: f64,
}

impl BackhaulChain {
    pub fn new(
        transition: TransitionMatrix,
        cssr: [f64; NUM_STATES],
        classes: [StateClass; NUM_STATES],
        structure: Structure,
    ) -> Result<Self, ChainError> {
        validate_chain(&transition, &cssr, &classes, structure)?;
        Ok(BackhaulChain { transition, cssr, classes })
    }

    /// The reference matrix with default CSSR levels and classes.
    pub fn reference() -> Self {
        BackhaulChain::new(REFERENCE_TRANSITIONS, DEFAULT_CSSR, DEFAULT_CLASSES, Structure::Strict)
            .expect("reference chain is valid")
    }

    pub fn from_document(doc: &ChainDocument, structure: Structure) -> Result<Self, ChainError> {
        let shape = |what, found: usize| {
            if found == NUM_STATES {
                Ok(())
            } else {
                Err(ChainError::Shape { what, expected: NUM_STATES, found })
            }
        };
        shape("transition rows", doc.transition.len())?;
        for row in &doc.transition {
            shape("transition columns", row.len())?;
        }
        shape("cssr values", doc.cssr.len())?;
        shape("class labels", doc.class.len())?;

        let mut transition = [[0.0; NUM_STATES]; NUM_STATES];
        for (dst, src) in transition.iter_mut().zip(&doc.transition) {
            dst.copy_from_slice(src);
        }
        let mut cssr = [0.0; NUM_STATES];
        cssr.copy_from_slice(&doc.cssr);
        let mut classes = DEFAULT_CLASSES;
        classes.copy_from_slice(&doc.class);
        BackhaulChain::new(transition, cssr, classes, structure)
    }

    pub fn to_document(&self) -> ChainDocument {
        ChainDocument {
            transition: self.transition.iter().map(|r| r.to_vec()).collect(),
            cssr: self.cssr.to_vec(),
            class: self.classes.to_vec(),
        }
    }

    pub fn transition(&self) -> &TransitionMatrix {
        &self.transition
    }

    pub fn probability(&self, from: StateIndex, to: StateIndex) -> f64 {
        self.transition[from.offset()][to.offset()]
    }

    pub fn cssr(&self, state: StateIndex) -> f64 {
        self.cssr[state.offset()]
    }

    pub fn cssr_levels(&self) -> &[f64; NUM_STATES] {
        &self.cssr
    }

    pub fn class_of(&self, state: StateIndex) -> StateClass {
        self.classes[state.offset()]
    }

    pub fn classes(&self) -> &[StateClass; NUM_STATES] {
        &self.classes
    }

    /// Next state by cumulative-sum inversion of `draw` in `[0, 1)` over the
    /// current row, columns in ascending index order.
    pub fn step(&self, current: StateIndex, draw: f64) -> StateIndex {
        let row = &self.transition[current.offset()];
        let mut acc = 0.0;
        let mut last_positive = current.offset();
        for (j, &p) in row.iter().enumerate() {
            if p > 0.0 {
                acc += p;
                last_positive = j;
                if draw < acc {
                    return StateIndex::from_offset(j);
                }
            }
        }
        // Row sums can fall short of 1 by rounding.
        StateIndex::from_offset(last_positive)
    }

    /// True when an outage occurs in `state` for a uniform draw in `[0, 1)`.
    pub fn draw_csso(&self, state: StateIndex, draw: f64) -> bool {
        draw < 1.0 - self.cssr(state)
    }

    /// Probability of no outage in steps `1..=k` given the chain sits in
    /// `start` at step 0.
    pub fn survival_within(&self, start: StateIndex, k: usize) -> Result<f64, ChainError> {
        if k == 0 {
            return Err(ChainError::ZeroHorizon);
        }
        let mut mass = [0.0; NUM_STATES];
        mass[start.offset()] = 1.0;
        for _ in 0..k {
            let mut next = [0.0; NUM_STATES];
            for (i, &m) in mass.iter().enumerate() {
                if m == 0.0 {
                    continue;
                }
                for (n, &p) in next.iter_mut().zip(&self.transition[i]) {
                    *n += m * p;
                }
            }
            for (n, &c) in next.iter_mut().zip(&self.cssr) {
                *n *= c;
            }
            mass = next;
        }
        Ok(mass.iter().sum())
    }

    /// Probability of at least one outage in steps `1..=k` from `start`.
    pub fn outage_probability_within(&self, start: StateIndex, k: usize) -> Result<f64, ChainError> {
        self.survival_within(start, k).map(|s| 1.0 - s)
    }

    /// Stationary distribution by power iteration on the lazy chain
    /// `(I + T) / 2`, which shares its fixed points with `T` and is aperiodic.
    pub fn stationary_distribution(&self) -> Result<Stationary, ChainError> {
        let uniform = [1.0 / NUM_STATES as f64; NUM_STATES];
        if closed_class_count(&self.transition) > 1 {
            return Ok(Stationary {
                distribution: uniform,
                unique: false,
                iterations: 0,
                residual: self.residual(&uniform),
            });
        }
        let mut pi = uniform;
        let mut residual = self.residual(&pi);
        let mut iterations = 0;
        while residual >= STATIONARY_RESIDUAL {
            if iterations >= STATIONARY_MAX_ITERATIONS {
                return Err(ChainError::NotConverged { iterations, residual });
            }
            let moved = self.apply(&pi);
            let mut next = [0.0; NUM_STATES];
            for j in 0..NUM_STATES {
                next[j] = 0.5 * (pi[j] + moved[j]);
            }
            let total: f64 = next.iter().sum();
            for v in &mut next {
                *v /= total;
            }
            pi = next;
            iterations += 1;
            residual = self.residual(&pi);
        }
        Ok(Stationary { distribution: pi, unique: true, iterations, residual })
    }

    fn apply(&self, pi: &[f64; NUM_STATES]) -> [f64; NUM_STATES] {
        let mut out = [0.0; NUM_STATES];
        for (i, &m) in pi.iter().enumerate() {
            for (o, &p) in out.iter_mut().zip(&self.transition[i]) {
                *o += m * p;
            }
        }
        out
    }

    fn residual(&self, pi: &[f64; NUM_STATES]) -> f64 {
        self.apply(pi).iter().zip(pi).map(|(a, b)| (a - b).abs()).sum()
    }

    /// Runs the chain for `steps` steps from `start`, drawing the transition
    /// and then the outage for each step.
    pub fn simulate<R: Rng + ?Sized>(&self, start: StateIndex, steps: usize, rng: &mut R) -> OutageTrace {
        let mut state = start;
        let mut records = Vec::with_capacity(steps);
        for step in 0..steps {
            state = self.step(state, rng.random());
            let csso = self.draw_csso(state, rng.random());
            records.push(OutageRecord { step: step as u64 + 1, state, csso });
        }
        OutageTrace { records }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutageRecord {
    pub step: u64,
    pub state: StateIndex,
    pub csso: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OutageTrace {
    pub records: Vec<OutageRecord>,
}

impl OutageTrace {
    pub fn states(&self) -> impl Iterator<Item = StateIndex> + '_ {
        self.records.iter().map(|r| r.state)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("need at least two observations to fit transitions, got {0}")]
    TooShort(usize),
    #[error("smoothing pseudo-count must be a finite value >= 0, got {0}")]
    BadSmoothing(f64),
}

/// Maximum-likelihood transition estimates from an observed state sequence.
///
/// Pseudo-counts are added only to transitions the chain layout permits for
/// `classes`. Rows without observations and without smoothing become
/// self-loops.
pub fn fit_from_log(
    observations: &[StateIndex],
    smoothing: f64,
    classes: &[StateClass; NUM_STATES],
) -> Result<TransitionMatrix, FitError> {
    if observations.len() < 2 {
        return Err(FitError::TooShort(observations.len()));
    }
    if !smoothing.is_finite() || smoothing < 0.0 {
        return Err(FitError::BadSmoothing(smoothing));
    }
    let mut counts = [[0u64; NUM_STATES]; NUM_STATES];
    for w in observations.windows(2) {
        counts[w[0].offset()][w[1].offset()] += 1;
    }
    let layout = Layout::new(classes);
    let mut fitted = [[0.0; NUM_STATES]; NUM_STATES];
    for i in 0..NUM_STATES {
        let mask: Vec<f64> =
            (0..NUM_STATES).map(|j| if layout.permitted(classes, i, j) { 1.0 } else { 0.0 }).collect();
        let row_total = counts[i].iter().sum::<u64>() as f64 + smoothing * mask.iter().sum::<f64>();
        if row_total == 0.0 {
            fitted[i][i] = 1.0;
            continue;
        }
        for j in 0..NUM_STATES {
            fitted[i][j] = (counts[i][j] as f64 + smoothing * mask[j]) / row_total;
        }
    }
    Ok(fitted)
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: expected a state index 1..=9, found {content:?}")]
pub struct LogParseError {
    pub line: usize,
    pub content: String,
}

/// Parses a trace with one state index per line. Blank lines are skipped.
pub fn parse_log(text: &str) -> Result<Vec<StateIndex>, LogParseError> {
    let mut states = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let state = line.parse::<u8>().ok().and_then(StateIndex::new);
        match state {
            Some(s) => states.push(s),
            None => return Err(LogParseError { line: n + 1, content: line.to_string() }),
        }
    }
    Ok(states)
}
