use std::f64::consts::PI;

use rand_distr::{Distribution, Normal};

use super::{Epoch, StimulusSpec};
use crate::error::{Error, Result};
use crate::rng;

/// Parameters of the synthetic SSVEP generator.
#[derive(Debug, Clone)]
pub struct SsvepParams {
    pub harmonic_amps: Vec<f64>,
    pub fs_hz: f64,
    pub duration_s: f64,
    pub noise_sigma: f64,
    pub channel_gains: Vec<f64>,
}

impl SsvepParams {
    pub fn n_channels(&self) -> usize {
        self.channel_gains.len()
    }
}

/// `A_h = 1/h` for `h = 1..=n`.
pub fn default_harmonic_amps(n: usize) -> Vec<f64> {
    (1..=n).map(|h| 1.0 / h as f64).collect()
}

/// Sum of harmonics `A_h sin(2π h f t + h θ)` per channel, scaled by the
/// channel gain, plus white Gaussian noise.
pub fn generate_ssvep(
    spec: StimulusSpec,
    params: &SsvepParams,
    trial_id: u32,
    seed: u64,
) -> Result<Epoch> {
    let SsvepParams {
        harmonic_amps,
        fs_hz,
        duration_s,
        noise_sigma,
        channel_gains,
    } = params;
    let all_finite = [
        spec.freq_hz,
        spec.phase_rad,
        *fs_hz,
        *duration_s,
        *noise_sigma,
    ]
    .iter()
    .chain(harmonic_amps)
    .chain(channel_gains)
    .all(|v| v.is_finite());
    if !all_finite {
        return Err(Error::NonFinite("generator parameters"));
    }
    if harmonic_amps.is_empty() {
        return Err(Error::invalid("harmonic amplitudes must be nonempty"));
    }
    if channel_gains.is_empty() {
        return Err(Error::invalid("at least one channel is required"));
    }
    if *noise_sigma < 0.0 {
        return Err(Error::invalid("noise sigma must be non-negative"));
    }
    let top = spec.freq_hz * harmonic_amps.len() as f64;
    if *fs_hz <= 2.0 * top {
        return Err(Error::Nyquist {
            freq_hz: top,
            fs_hz: *fs_hz,
        });
    }
    let n_samples = (duration_s * fs_hz).round() as usize;
    if n_samples < 2 {
        return Err(Error::invalid("duration too short for two samples"));
    }

    let clean: Vec<f64> = (0..n_samples)
        .map(|t| {
            let time = t as f64 / fs_hz;
            harmonic_amps
                .iter()
                .enumerate()
                .map(|(i, a)| {
                    let h = (i + 1) as f64;
                    a * (2.0 * PI * h * spec.freq_hz * time + h * spec.phase_rad).sin()
                })
                .sum()
        })
        .collect();

    let mut noise_rng = rng::stream("ssvep-noise", seed);
    let normal =
        Normal::new(0.0, noise_sigma.max(0.0)).map_err(|e| Error::invalid(e.to_string()))?;
    let mut data = Vec::with_capacity(n_samples * channel_gains.len());
    for gain in channel_gains {
        for v in &clean {
            let noise = if *noise_sigma > 0.0 {
                normal.sample(&mut noise_rng)
            } else {
                0.0
            };
            data.push(gain * v + noise);
        }
    }
    Epoch::new(data, channel_gains.len(), *fs_hz, spec, trial_id)
}
