use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rydsim::evolve::site_densities;
use rydsim::hilbert::{Basis, BasisConfig, StateVector};
use rydsim::measure::{apply_detection_noise, sample, DetectionModel, ShotSet};

fn random_state(n: usize, seed: u64) -> StateVector {
    let basis = Arc::new(Basis::enumerate(&BasisConfig::full(n)).unwrap());
    StateVector::random(basis, &mut ChaCha8Rng::seed_from_u64(seed))
}

#[test]
fn site_marginals_match_densities() {
    let n_shots = 10_000;
    for seed in 0..20 {
        let state = random_state(8, seed);
        let shots = sample(&state, n_shots, 1000 + seed).unwrap();
        let exact = site_densities(&state);
        for (i, (&f, &p)) in shots.site_means().iter().zip(&exact).enumerate() {
            let sigma = (p * (1.0 - p) / n_shots as f64).sqrt();
            assert!((f - p).abs() <= 4.0 * sigma, "state {seed} site {i}: {f} vs {p}");
        }
    }
}

/// Counts of (true bit, read bit) over all site reads.
fn transition_counts(clean: &ShotSet, noisy: &ShotSet) -> [[u64; 2]; 2] {
    let mut t = [[0u64; 2]; 2];
    for k in 0..clean.len() {
        for i in 0..clean.n_sites {
            t[clean.get(k, i) as usize][noisy.get(k, i) as usize] += 1;
        }
    }
    t
}

/// Pearson χ² of the observed flip counts against flip probabilities
/// `(q0, q1)` for true bits 0 and 1 (two degrees of freedom).
fn chi_square(t: &[[u64; 2]; 2], q: [f64; 2]) -> f64 {
    (0..2)
        .map(|b| {
            let n = (t[b][0] + t[b][1]) as f64;
            let flipped = t[b][1 - b] as f64;
            let expected = n * q[b];
            (flipped - expected).powi(2) / expected + (flipped - expected).powi(2) / (n - expected)
        })
        .sum()
}

fn half_filled(n_shots: usize) -> ShotSet {
    let state = random_state(6, 3);
    sample(&state, n_shots, 4).unwrap()
}

// 99.9% quantile of χ² with 2 degrees of freedom
const CHI2_2DOF_999: f64 = 13.82;

#[test]
fn sequential_noise_composes_as_expected() {
    let (p, q) = (0.3, 0.2);
    let clean = half_filled(20_000);
    let first = apply_detection_noise(&clean, &DetectionModel { p_g_loss: p, p_r_recapture: 0.0 }, 1).unwrap();
    let both = apply_detection_noise(&first, &DetectionModel { p_g_loss: 0.0, p_r_recapture: q }, 2).unwrap();
    let t = transition_counts(&clean, &both);
    // a |g⟩ read falsely as |r⟩ by the first pass can be flipped back by the second
    let composed = [p * (1.0 - q), q];
    assert!(chi_square(&t, composed) < CHI2_2DOF_999, "{t:?}");
    // so the sequential channel is not the single (p, q) channel
    assert!(chi_square(&t, [p, q]) > 100.0);

    let single = apply_detection_noise(&clean, &DetectionModel { p_g_loss: p, p_r_recapture: q }, 3).unwrap();
    assert!(chi_square(&transition_counts(&clean, &single), [p, q]) < CHI2_2DOF_999);
}

#[test]
fn default_noise_composes_to_first_order() {
    // with the default rates the p·q discrepancy (≈ 9e-5) is far below the
    // statistical resolution, so both channels pass the same χ² test
    let m = DetectionModel::default();
    let clean = half_filled(20_000);
    let first = apply_detection_noise(&clean, &DetectionModel { p_r_recapture: 0.0, ..m }, 5).unwrap();
    let both = apply_detection_noise(&first, &DetectionModel { p_g_loss: 0.0, ..m }, 6).unwrap();
    let t = transition_counts(&clean, &both);
    assert!(chi_square(&t, [m.p_g_loss, m.p_r_recapture]) < CHI2_2DOF_999, "{t:?}");
}
