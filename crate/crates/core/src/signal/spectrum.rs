use std::cell::RefCell;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Half spectrum of a real signal, bins `0..=n_time/2`.
///
/// Bin `k` sits at `k * fs_hz / n_time`. `n_time` is the transform length
/// including zero-padding; `n_signal` is the unpadded length, needed to turn
/// bin magnitudes into sinusoid amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrum {
    pub bins: Vec<Complex64>,
    pub fs_hz: f64,
    pub n_time: usize,
    pub n_signal: usize,
}

impl ComplexSpectrum {
    pub fn resolution_hz(&self) -> f64 {
        self.fs_hz / self.n_time as f64
    }

    pub fn bin_freq(&self, k: usize) -> f64 {
        k as f64 * self.resolution_hz()
    }

    /// Nearest bin to `freq_hz`, clamped to the half spectrum.
    pub fn nearest_bin(&self, freq_hz: f64) -> usize {
        ((freq_hz / self.resolution_hz()).round().max(0.0) as usize).min(self.bins.len() - 1)
    }

    /// Index of the Nyquist bin, present only for even lengths.
    pub fn nyquist_bin(&self) -> Option<usize> {
        self.n_time.is_multiple_of(2).then_some(self.n_time / 2)
    }

    /// Amplitude of a sinusoid whose energy sits in bin `k`.
    pub fn bin_amplitude(&self, k: usize) -> f64 {
        let scale = if k == 0 || Some(k) == self.nyquist_bin() {
            1.0
        } else {
            2.0
        };
        scale * self.bins[k].norm() / self.n_signal as f64
    }
}

fn full_fft(buf: &mut [Complex64], inverse: bool) {
    PLANNER.with(|p| {
        let mut planner = p.borrow_mut();
        let fft = if inverse {
            planner.plan_fft_inverse(buf.len())
        } else {
            planner.plan_fft_forward(buf.len())
        };
        fft.process(buf);
    });
}

/// Forward DFT `X[n] = Σ g[k] e^{-2πi kn/L}` of `signal` zero-padded to
/// `pad_to` samples.
pub fn fft_forward(signal: &[f64], fs_hz: f64, pad_to: usize) -> Result<ComplexSpectrum> {
    if signal.is_empty() {
        return Err(Error::invalid("cannot transform an empty signal"));
    }
    if pad_to < signal.len() {
        return Err(Error::invalid(format!(
            "pad length {pad_to} shorter than signal length {}",
            signal.len()
        )));
    }
    let mut buf: Vec<Complex64> = signal.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    buf.resize(pad_to, Complex64::new(0.0, 0.0));
    full_fft(&mut buf, false);
    buf.truncate(pad_to / 2 + 1);
    // Exact zeros keep the DC/Nyquist invariant regardless of rounding.
    buf[0].im = 0.0;
    if pad_to.is_multiple_of(2) {
        buf[pad_to / 2].im = 0.0;
    }
    Ok(ComplexSpectrum {
        bins: buf,
        fs_hz,
        n_time: pad_to,
        n_signal: signal.len(),
    })
}

/// Inverse transform of a half spectrum, returning the real signal and the
/// largest imaginary residue that was discarded.
pub fn ifft_inverse_with_residue(s: &ComplexSpectrum) -> Result<(Vec<f64>, f64)> {
    let n = s.n_time;
    if n == 0 || s.bins.len() != n / 2 + 1 {
        return Err(Error::Dimension(format!(
            "half spectrum of {} bins does not match length {n}",
            s.bins.len()
        )));
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    buf[..s.bins.len()].copy_from_slice(&s.bins);
    for k in 1..n.div_ceil(2) {
        buf[n - k] = s.bins[k].conj();
    }
    full_fft(&mut buf, true);
    let scale = 1.0 / n as f64;
    let residue = buf.iter().map(|c| (c.im * scale).abs()).fold(0.0, f64::max);
    Ok((buf.iter().map(|c| c.re * scale).collect(), residue))
}

/// Inverse transform back to `n_time` real samples.
pub fn ifft_inverse(s: &ComplexSpectrum) -> Result<Vec<f64>> {
    ifft_inverse_with_residue(s).map(|(x, _)| x)
}

/// `|X[k]|` for every bin.
pub fn amplitude_spectrum(s: &ComplexSpectrum) -> Vec<f64> {
    s.bins.iter().map(|c| c.norm()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use std::f64::consts::PI;

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt();
        let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
        num / den
    }

    #[test]
    fn roundtrip_identity() {
        let mut rng = crate::rng::stream("test", 1);
        for len in [64usize, 250, 256, 512, 1000] {
            let x: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
            let back = ifft_inverse(&fft_forward(&x, 250.0, len).unwrap()).unwrap();
            assert!(rel_err(&back, &x) <= 1e-10, "len {len}");
        }
    }

    #[test]
    fn padded_roundtrip_keeps_zero_tail() {
        let x = vec![1.0, -2.0, 3.0, 0.5, 0.25];
        let back = ifft_inverse(&fft_forward(&x, 1.0, 16).unwrap()).unwrap();
        assert_eq!(back.len(), 16);
        assert!(rel_err(&back[..5], &x) < 1e-12);
        assert!(back[5..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn parseval() {
        let mut rng = crate::rng::stream("test", 2);
        let x: Vec<f64> = (0..256).map(|_| rng.random_range(-1.0..1.0)).collect();
        let s = fft_forward(&x, 1.0, 256).unwrap();
        let time: f64 = x.iter().map(|v| v * v).sum();
        let freq: f64 = s
            .bins
            .iter()
            .enumerate()
            .map(|(k, c)| {
                if k == 0 || k == 128 {
                    c.norm_sqr()
                } else {
                    2.0 * c.norm_sqr()
                }
            })
            .sum::<f64>()
            / 256.0;
        assert!((time - freq).abs() / time < 1e-12);
    }

    #[test]
    fn dc_case() {
        let s = fft_forward(&[2.5; 256], 256.0, 256).unwrap();
        assert!((s.bins[0].re - 2.5 * 256.0).abs() < 1e-9);
        assert!(s.bins[1..].iter().all(|c| c.norm() < 1e-9));
    }

    #[test]
    fn cosine_closed_form() {
        let x: Vec<f64> = (0..256)
            .map(|k| (2.0 * PI * k as f64 * 16.0 / 256.0).cos())
            .collect();
        let s = fft_forward(&x, 256.0, 256).unwrap();
        assert!((s.bins[16].re - 128.0).abs() < 1e-9);
        assert!(s.bins[16].im.abs() < 1e-9);
        assert!((s.bin_amplitude(16) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sine_has_negative_imaginary_peak() {
        let x: Vec<f64> = (0..256)
            .map(|k| (2.0 * PI * k as f64 * 16.0 / 256.0).sin())
            .collect();
        let s = fft_forward(&x, 256.0, 256).unwrap();
        assert!((s.bins[16].im + 128.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_empty_and_short_pad() {
        assert!(fft_forward(&[], 1.0, 4).is_err());
        assert!(fft_forward(&[1.0, 2.0], 1.0, 1).is_err());
    }

    #[test]
    fn dc_and_nyquist_bins_are_real() {
        let x = [0.3, -1.2, 2.2, 0.1, 0.9, -0.4];
        let s = fft_forward(&x, 1.0, 6).unwrap();
        assert_eq!(s.bins[0].im, 0.0);
        assert_eq!(s.bins[3].im, 0.0);
        let s = fft_forward(&x, 1.0, 7).unwrap();
        assert_eq!(s.nyquist_bin(), None);
        let back = ifft_inverse(&s).unwrap();
        assert!(rel_err(&back[..6], &x) < 1e-12);
    }
}
