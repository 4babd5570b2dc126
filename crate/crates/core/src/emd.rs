//! Empirical mode decomposition: cubic-spline envelope sifting into
//! intrinsic mode functions plus a residue.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::Epoch;

/// Sifting controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SiftConfig {
    pub max_imfs: usize,
    /// Cauchy-type stop threshold on `Σ(h_prev − h)² / Σ h_prev²`.
    pub sd_stop: f64,
    pub max_sift_iters: usize,
}

impl Default for SiftConfig {
    fn default() -> Self {
        Self {
            max_imfs: 8,
            sd_stop: 0.2,
            max_sift_iters: 50,
        }
    }
}

/// IMFs ordered highest-frequency first, plus the final trend.
#[derive(Debug, Clone, PartialEq)]
pub struct ImfSet {
    pub imfs: Vec<Vec<f64>>,
    pub residue: Vec<f64>,
    pub fs_hz: f64,
}

impl ImfSet {
    pub fn len(&self) -> usize {
        self.imfs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.imfs.is_empty()
    }

    pub fn signal_len(&self) -> usize {
        self.residue.len()
    }
}

/// Indices of strict local maxima and minima (plateaus count once, at
/// their first sample).
pub fn find_extrema(x: &[f64]) -> (Vec<usize>, Vec<usize>) {
    let mut maxima = Vec::new();
    let mut minima = Vec::new();
    let n = x.len();
    let mut i = 1;
    while i + 1 < n {
        let mut j = i;
        while j + 1 < n && x[j + 1] == x[i] {
            j += 1;
        }
        if j + 1 >= n {
            break;
        }
        let (before, after) = (x[i - 1], x[j + 1]);
        if x[i] > before && x[i] > after {
            maxima.push(i);
        } else if x[i] < before && x[i] < after {
            minima.push(i);
        }
        i = j + 1;
    }
    (maxima, minima)
}

fn zero_crossings(x: &[f64]) -> usize {
    x.windows(2)
        .filter(|w| (w[0] < 0.0 && w[1] >= 0.0) || (w[0] > 0.0 && w[1] <= 0.0))
        .count()
}

/// Whether extrema and zero-crossing counts differ by at most one, ignoring
/// a 5% margin at each end.
pub fn is_imf_like(x: &[f64]) -> bool {
    let margin = x.len() / 20;
    let core = &x[margin..x.len() - margin];
    let (maxima, minima) = find_extrema(core);
    let extrema = maxima.len() + minima.len();
    extrema.abs_diff(zero_crossings(core)) <= 1
}

/// Natural cubic spline through `(xs, ys)` sampled at `0..n`.
fn natural_spline(xs: &[f64], ys: &[f64], n: usize) -> Vec<f64> {
    let m = xs.len();
    debug_assert!(m >= 2 && xs.windows(2).all(|w| w[1] > w[0]));
    let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    // Second derivatives; natural ends mean M_0 = M_{m-1} = 0.
    let mut second = vec![0.0; m];
    if m > 2 {
        let k = m - 2;
        let mut diag = vec![0.0; k];
        let mut rhs = vec![0.0; k];
        for i in 0..k {
            diag[i] = 2.0 * (h[i] + h[i + 1]);
            rhs[i] = 6.0 * ((ys[i + 2] - ys[i + 1]) / h[i + 1] - (ys[i + 1] - ys[i]) / h[i]);
        }
        // Thomas algorithm; off-diagonals are h[i+1].
        for i in 1..k {
            let w = h[i] / diag[i - 1];
            diag[i] -= w * h[i];
            rhs[i] -= w * rhs[i - 1];
        }
        second[k] = rhs[k - 1] / diag[k - 1];
        for i in (0..k - 1).rev() {
            second[i + 1] = (rhs[i] - h[i + 1] * second[i + 2]) / diag[i];
        }
    }
    let mut out = Vec::with_capacity(n);
    let mut seg = 0;
    for t in 0..n {
        let t = t as f64;
        while seg + 2 < m && t > xs[seg + 1] {
            seg += 1;
        }
        let (x0, x1, hs) = (xs[seg], xs[seg + 1], h[seg]);
        let (a, b) = ((x1 - t) / hs, (t - x0) / hs);
        let v = a * ys[seg]
            + b * ys[seg + 1]
            + ((a * a * a - a) * second[seg] + (b * b * b - b) * second[seg + 1]) * hs * hs / 6.0;
        out.push(v);
    }
    out
}

/// Knots for one envelope: the extrema plus the two nearest at each end
/// mirrored about the first and last sample.
fn mirrored_knots(x: &[f64], idx: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let last = (x.len() - 1) as f64;
    let mut ts = Vec::with_capacity(idx.len() + 4);
    let mut vs = Vec::with_capacity(idx.len() + 4);
    for &i in idx.iter().take(2).rev() {
        ts.push(-(i as f64));
        vs.push(x[i]);
    }
    for &i in idx {
        ts.push(i as f64);
        vs.push(x[i]);
    }
    for &i in idx.iter().rev().take(2) {
        ts.push(2.0 * last - i as f64);
        vs.push(x[i]);
    }
    (ts, vs)
}

/// Upper and lower cubic-spline envelopes through the local extrema.
pub fn compute_envelopes(signal: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let (maxima, minima) = find_extrema(signal);
    if maxima.len() < 2 || minima.len() < 2 {
        return Err(Error::TooFewExtrema);
    }
    let n = signal.len();
    let (ut, uv) = mirrored_knots(signal, &maxima);
    let (lt, lv) = mirrored_knots(signal, &minima);
    Ok((natural_spline(&ut, &uv, n), natural_spline(&lt, &lv, n)))
}

fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Sifts one IMF out of `r`; `None` when `r` is already a trend.
fn extract_imf(r: &[f64], cfg: &SiftConfig) -> Option<Vec<f64>> {
    let mut h = r.to_vec();
    let mut extracted = false;
    for _ in 0..cfg.max_sift_iters {
        let Ok((upper, lower)) = compute_envelopes(&h) else {
            break;
        };
        let next: Vec<f64> = h
            .iter()
            .zip(upper.iter().zip(&lower))
            .map(|(v, (u, l))| v - 0.5 * (u + l))
            .collect();
        let num: f64 = h.iter().zip(&next).map(|(a, b)| (a - b).powi(2)).sum();
        let den: f64 = h.iter().map(|a| a * a).sum();
        h = next;
        extracted = true;
        if den == 0.0 || (num / den < cfg.sd_stop && is_imf_like(&h)) {
            break;
        }
    }
    extracted.then_some(h)
}

/// Decomposes `signal` into IMFs and a residue.
///
/// The residue is computed as `signal − Σ imfs`, so the decomposition is
/// complete up to floating-point summation error.
pub fn sift(signal: &[f64], fs_hz: f64, cfg: &SiftConfig) -> Result<ImfSet> {
    if signal.len() < 16 {
        return Err(Error::invalid(format!(
            "EMD needs at least 16 samples, got {}",
            signal.len()
        )));
    }
    if signal.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("EMD input"));
    }
    let cap = cfg
        .max_imfs
        .min((signal.len() as f64).log2().ceil() as usize);
    let scale = max_abs(signal);
    let mut imfs: Vec<Vec<f64>> = Vec::new();
    let mut r = signal.to_vec();
    while imfs.len() < cap {
        let (maxima, minima) = find_extrema(&r);
        if maxima.len() < 2 || minima.len() < 2 || max_abs(&r) <= 1e-12 * scale {
            break;
        }
        let Some(imf) = extract_imf(&r, cfg) else {
            break;
        };
        for (rv, iv) in r.iter_mut().zip(&imf) {
            *rv -= iv;
        }
        imfs.push(imf);
    }
    let residue = signal
        .iter()
        .enumerate()
        .map(|(t, v)| v - imfs.iter().map(|imf| imf[t]).sum::<f64>())
        .collect();
    Ok(ImfSet {
        imfs,
        residue,
        fs_hz,
    })
}

/// Every channel decomposed independently.
pub fn sift_epoch(e: &Epoch, cfg: &SiftConfig) -> Result<Vec<ImfSet>> {
    let channels: Vec<&[f64]> = e.channels().collect();
    channels.par_iter().map(|c| sift(c, e.fs_hz, cfg)).collect()
}

/// Sum of IMFs `k_lo..=k_hi` (1-based). `k_hi = K + 1` adds the residue.
pub fn reconstruct_from_imfs(s: &ImfSet, k_lo: usize, k_hi: usize) -> Result<Vec<f64>> {
    let k = s.len();
    if k_lo < 1 || k_lo > k_hi || k_hi > k + 1 || k_lo > k.max(1) {
        return Err(Error::invalid(format!(
            "IMF range {k_lo}..={k_hi} invalid for {k} IMFs"
        )));
    }
    let mut out = vec![0.0; s.signal_len()];
    for imf in &s.imfs[k_lo - 1..k_hi.min(k)] {
        for (o, v) in out.iter_mut().zip(imf) {
            *o += v;
        }
    }
    if k_hi == k + 1 {
        for (o, v) in out.iter_mut().zip(&s.residue) {
            *o += v;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{amplitude_spectrum, fft_forward};
    use std::f64::consts::PI;

    fn tones(parts: &[(f64, f64)], offset: f64) -> Vec<f64> {
        (0..1000)
            .map(|i| {
                let t = i as f64 / 250.0;
                offset
                    + parts
                        .iter()
                        .map(|(f, a)| a * (2.0 * PI * f * t).sin())
                        .sum::<f64>()
            })
            .collect()
    }

    fn peak_hz(x: &[f64]) -> f64 {
        let s = fft_forward(x, 250.0, 1000).unwrap();
        let amp = amplitude_spectrum(&s);
        let k = (1..amp.len())
            .max_by(|a, b| amp[*a].total_cmp(&amp[*b]))
            .unwrap();
        s.bin_freq(k)
    }

    fn pearson(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn spline_reproduces_cubic_interior_and_knots() {
        let xs = [0.0, 3.0, 7.0, 10.0, 15.0];
        let ys = [1.0, -2.0, 0.5, 4.0, 3.0];
        let s = natural_spline(&xs, &ys, 16);
        for (x, y) in xs.iter().zip(ys) {
            assert!((s[*x as usize] - y).abs() < 1e-12);
        }
        // A straight line is reproduced exactly by a natural spline.
        let line: Vec<f64> = xs.iter().map(|x| 2.0 * x - 1.0).collect();
        let s = natural_spline(&xs, &line, 16);
        for (t, v) in s.iter().enumerate() {
            assert!((v - (2.0 * t as f64 - 1.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn sine_envelope_mean_is_flat() {
        let x = tones(&[(10.0, 1.0)], 0.0);
        let (u, l) = compute_envelopes(&x).unwrap();
        let worst = (62..938)
            .map(|t| (0.5 * (u[t] + l[t])).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 0.05, "{worst}");

        let x = tones(&[(10.0, 1.0)], 0.5);
        let (u, l) = compute_envelopes(&x).unwrap();
        let worst = (62..938)
            .map(|t| (0.5 * (u[t] + l[t]) - 0.5).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 0.05, "{worst}");
        let (maxima, minima) = find_extrema(&x);
        assert!(maxima.iter().all(|&i| u[i] >= x[i] - 1e-12));
        assert!(minima.iter().all(|&i| l[i] <= x[i] + 1e-12));
    }

    #[test]
    fn constant_has_no_envelope_and_no_imfs() {
        assert!(matches!(
            compute_envelopes(&[3.0; 100]),
            Err(Error::TooFewExtrema)
        ));
        let s = sift(&[3.0; 100], 250.0, &SiftConfig::default()).unwrap();
        assert!(s.is_empty());
        assert_eq!(s.residue, vec![3.0; 100]);
    }

    #[test]
    fn pure_tone_lands_in_first_imf() {
        let x = tones(&[(10.0, 1.0)], 0.0);
        let s = sift(&x, 250.0, &SiftConfig::default()).unwrap();
        assert!(pearson(&s.imfs[0], &x) >= 0.99);
    }

    #[test]
    fn two_tones_separate_by_frequency() {
        let x = tones(&[(10.0, 1.0), (40.0, 1.0)], 0.0);
        let s = sift(&x, 250.0, &SiftConfig::default()).unwrap();
        assert!(s.len() >= 2);
        assert_eq!(peak_hz(&s.imfs[0]), 40.0);
        assert_eq!(peak_hz(&s.imfs[1]), 10.0);
        let first = reconstruct_from_imfs(&s, 1, 1).unwrap();
        assert_eq!(first, s.imfs[0]);
        assert_eq!(peak_hz(&first), 40.0);
        for imf in &s.imfs[..2] {
            assert!(is_imf_like(imf));
        }
    }

    #[test]
    fn full_reconstruction_is_complete() {
        let x = tones(&[(7.0, 0.8), (23.0, 1.0), (51.0, 0.3)], 0.2);
        let s = sift(&x, 250.0, &SiftConfig::default()).unwrap();
        let back = reconstruct_from_imfs(&s, 1, s.len() + 1).unwrap();
        let err = back
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-8 * max_abs(&x));
        assert!(reconstruct_from_imfs(&s, 0, 1).is_err());
        assert!(reconstruct_from_imfs(&s, 2, 1).is_err());
        assert!(reconstruct_from_imfs(&s, 1, s.len() + 2).is_err());
    }

    #[test]
    fn sifting_is_deterministic_and_rejects_short_input() {
        let x = tones(&[(12.0, 1.0), (31.0, 0.5)], 0.0);
        let cfg = SiftConfig::default();
        assert_eq!(
            sift(&x, 250.0, &cfg).unwrap(),
            sift(&x, 250.0, &cfg).unwrap()
        );
        assert!(sift(&x[..10], 250.0, &cfg).is_err());
    }
}
