#![allow(dead_code)]

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ssvep_cstl::signal::io::Dataset;
use ssvep_cstl::signal::{generate_ssvep, FrequencyTable, SsvepParams};

pub fn synth_params(sigma: f64) -> SsvepParams {
    SsvepParams {
        harmonic_amps: vec![1.0, 0.5],
        fs_hz: 250.0,
        duration_s: 4.0,
        noise_sigma: sigma,
        channel_gains: vec![1.0, 0.8, 0.6, 0.4],
    }
}

/// Eight classes at 8..=15 Hz with a 0.35π phase step.
pub fn eight_class_table() -> FrequencyTable {
    FrequencyTable::from_freqs(&(8..16).map(f64::from).collect::<Vec<_>>(), 0.35 * PI).unwrap()
}

/// `trials` per class, ids `class · 1000 + t`.
pub fn synth_dataset(table: &FrequencyTable, trials: usize, sigma: f64, seed: u64) -> Dataset {
    let p = synth_params(sigma);
    let groups = table
        .iter()
        .map(|s| {
            (0..trials)
                .map(|t| generate_ssvep(*s, &p, (s.class_index * 1000 + t) as u32, seed).unwrap())
                .collect()
        })
        .collect();
    Dataset::new(table.clone(), groups).unwrap()
}

/// Sum of random sinusoids between 0.5 and `f_max` Hz.
pub fn band_limited(len: usize, fs: f64, f_max: f64, seed: u64) -> Vec<f64> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let parts: Vec<(f64, f64, f64)> = (0..12)
        .map(|_| {
            (
                r.random_range(0.5..f_max),
                r.random_range(0.1..1.0),
                r.random_range(0.0..2.0 * PI),
            )
        })
        .collect();
    (0..len)
        .map(|i| {
            let t = i as f64 / fs;
            parts
                .iter()
                .map(|(f, a, p)| a * (2.0 * PI * f * t + p).sin())
                .sum()
        })
        .collect()
}

pub fn tone(freq: f64, amp: f64, phase: f64, len: usize, fs: f64) -> Vec<f64> {
    (0..len)
        .map(|i| amp * (2.0 * PI * freq * i as f64 / fs + phase).sin())
        .collect()
}
