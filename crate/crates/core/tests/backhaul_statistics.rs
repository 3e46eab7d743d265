mod common;

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tzsim_core::backhaul::{fit_from_log, BackhaulChain, DEFAULT_CLASSES, NUM_STATES};

#[test]
fn reference_matrix_is_the_published_one() {
    assert_eq!(*BackhaulChain::reference().transition(), PUBLISHED_MATRIX);
}

#[test]
fn three_step_forecast_from_state_one_matches_enumeration() {
    let chain = BackhaulChain::reference();
    let expected = 1.0 - enumerate_survival(&chain, 0, 3);
    let got = chain.outage_probability_within(state(1), 3).unwrap();
    assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
}

#[test]
fn one_step_forecast_is_marginal() {
    let chain = BackhaulChain::reference();
    for s in 0..NUM_STATES {
        let closed: f64 = (0..NUM_STATES).map(|j| PUBLISHED_MATRIX[s][j] * (1.0 - chain.cssr_levels()[j])).sum();
        let got = chain.outage_probability_within(tzsim_core::backhaul::StateIndex::from_offset(s), 1).unwrap();
        assert!((got - closed).abs() < 1e-15);
    }
}

/// Rows 4–9 are visited only a few thousand times per million steps, so the
/// trace is long enough that ±0.01 is several standard errors for every row.
#[test]
fn refit_recovers_generating_matrix() {
    let chain = BackhaulChain::reference();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut log = Vec::with_capacity(100_000_001);
    let mut s = state(1);
    log.push(s);
    for _ in 0..100_000_000 {
        s = chain.step(s, rng.random());
        log.push(s);
    }
    let fitted = fit_from_log(&log, 0.0, &DEFAULT_CLASSES).unwrap();
    for i in 0..NUM_STATES {
        for j in 0..NUM_STATES {
            if PUBLISHED_MATRIX[i][j] >= 0.01 {
                assert!(
                    (fitted[i][j] - PUBLISHED_MATRIX[i][j]).abs() <= 0.01,
                    "entry ({}, {}): fitted {} true {}",
                    i + 1,
                    j + 1,
                    fitted[i][j],
                    PUBLISHED_MATRIX[i][j]
                );
            }
        }
    }
}

#[test]
fn outage_frequency_per_state_within_three_sigma() {
    let chain = BackhaulChain::reference();
    let n = 1_000_000u32;
    for s in 1..=9u8 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + s as u64);
        let hits = (0..n).filter(|_| chain.draw_csso(state(s), rng.random())).count() as f64;
        let p = 1.0 - chain.cssr_levels()[s as usize - 1];
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        assert!((hits - n as f64 * p).abs() <= 3.0 * sigma, "state {s}: {hits} outages, expected {}", n as f64 * p);
    }
}
