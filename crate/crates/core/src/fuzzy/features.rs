use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{fft_forward, Epoch};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub f_lo: f64,
    pub f_hi: f64,
    pub resolution_hz: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            f_lo: 6.0,
            f_hi: 64.0,
            resolution_hz: 0.25,
        }
    }
}

/// Token matrix: rows `(Re ch0, Im ch0, Re ch1, Im ch1, …)`, one column per
/// frequency bin in range.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: Vec<f64>,
    n_rows: usize,
    n_cols: usize,
    pub bin_freqs: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(data: Vec<f64>, n_rows: usize, n_cols: usize, bin_freqs: Vec<f64>) -> Result<Self> {
        if n_rows == 0 || n_cols == 0 || data.len() != n_rows * n_cols || bin_freqs.len() != n_cols
        {
            return Err(Error::Dimension(format!(
                "{} values for a {n_rows}x{n_cols} feature matrix",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("features"));
        }
        Ok(Self {
            data,
            n_rows,
            n_cols,
            bin_freqs,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Zero-pads each channel to `L = ⌈fs / resolution⌉` (or the window length
/// if longer) and keeps the real and imaginary parts of bins within
/// `[f_lo, f_hi]`.
pub fn fft_features(e: &Epoch, cfg: &FeatureConfig) -> Result<FeatureMatrix> {
    if !(cfg.f_lo >= 0.0 && cfg.f_lo < cfg.f_hi && cfg.f_hi < e.fs_hz / 2.0) {
        return Err(Error::invalid(format!(
            "feature band {}..{} Hz invalid for fs = {} Hz",
            cfg.f_lo, cfg.f_hi, e.fs_hz
        )));
    }
    if !(cfg.resolution_hz >= 1.0 / (10.0 * e.duration_s()) - 1e-12) {
        return Err(Error::invalid(format!(
            "resolution {} Hz needs more than 10x padding of a {} s window",
            cfg.resolution_hz,
            e.duration_s()
        )));
    }
    let pad = e
        .n_samples()
        .max((e.fs_hz / cfg.resolution_hz).ceil() as usize);
    let mut data = Vec::new();
    let mut bin_freqs = Vec::new();
    for (c, channel) in e.channels().enumerate() {
        let spec = fft_forward(channel, e.fs_hz, pad)?;
        let keep: Vec<usize> = (0..spec.bins.len())
            .filter(|k| {
                let f = spec.bin_freq(*k);
                f >= cfg.f_lo - 1e-9 && f <= cfg.f_hi + 1e-9
            })
            .collect();
        if c == 0 {
            bin_freqs = keep.iter().map(|k| spec.bin_freq(*k)).collect();
        }
        data.extend(keep.iter().map(|k| spec.bins[*k].re));
        data.extend(keep.iter().map(|k| spec.bins[*k].im));
    }
    let n_cols = bin_freqs.len();
    FeatureMatrix::new(data, 2 * e.n_channels(), n_cols, bin_freqs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::StimulusSpec;
    use std::f64::consts::PI;

    fn epoch(x: Vec<f64>, fs: f64) -> Epoch {
        Epoch::new(x, 1, fs, StimulusSpec::new(16.0, 0.0, 0).unwrap(), 0).unwrap()
    }

    fn full() -> FeatureConfig {
        FeatureConfig {
            f_lo: 0.0,
            f_hi: 127.0,
            resolution_hz: 1.0,
        }
    }

    #[test]
    fn zero_epoch_gives_zero_matrix() {
        let m = fft_features(&epoch(vec![0.0; 250], 250.0), &FeatureConfig::default()).unwrap();
        assert!(m.data().iter().all(|v| *v == 0.0));
        assert_eq!(m.n_rows(), 2);
        assert_eq!(m.n_cols(), 233);
        assert!(m.bin_freqs.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn cosine_and_sine_land_in_re_and_im_rows() {
        let cos: Vec<f64> = (0..256)
            .map(|k| (2.0 * PI * 16.0 * k as f64 / 256.0).cos())
            .collect();
        let m = fft_features(&epoch(cos, 256.0), &full()).unwrap();
        assert!((m.row(0)[16] - 128.0).abs() < 1e-9);
        assert!(m.row(1)[16].abs() < 1e-9);

        let sin: Vec<f64> = (0..256)
            .map(|k| (2.0 * PI * 16.0 * k as f64 / 256.0).sin())
            .collect();
        let m = fft_features(&epoch(sin, 256.0), &full()).unwrap();
        assert!((m.row(1)[16] + 128.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_excessive_padding_and_bad_band() {
        let e = epoch(vec![0.0; 100], 250.0);
        let fine = FeatureConfig {
            resolution_hz: 0.1,
            ..FeatureConfig::default()
        };
        assert!(fft_features(&e, &fine).is_err());
        let high = FeatureConfig {
            f_hi: 130.0,
            ..FeatureConfig::default()
        };
        assert!(fft_features(&e, &high).is_err());
    }
}
