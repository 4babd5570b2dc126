//! Cross-stimulus transfer: move the harmonic content of source-stimulus
//! IMFs onto the harmonics of an unseen target frequency and rebuild
//! labelled target-domain epochs.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::emd::{self, ImfSet, SiftConfig};
use crate::error::{Error, Result};
use crate::signal::{
    amplitude_spectrum, fft_forward, ifft_inverse_with_residue, ComplexSpectrum, Epoch,
    FrequencyTable, StimulusSpec,
};

/// Harmonics `h · base` inside a band, with the phase each should carry.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicSet {
    pub base_hz: f64,
    pub members: Vec<f64>,
    /// `None` when the base frequency is not in the phase table; the
    /// exchange then keeps whatever phase the source bin had.
    pub phases: Option<Vec<f64>>,
}

impl HarmonicSet {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn truncated(&self, n: usize) -> HarmonicSet {
        HarmonicSet {
            base_hz: self.base_hz,
            members: self.members[..n.min(self.len())].to_vec(),
            phases: self.phases.as_ref().map(|p| p[..n.min(p.len())].to_vec()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExchangeConfig {
    /// Gain on the content left at the source harmonic bins.
    pub g_source: f64,
    /// Gain on the amplitude written at the target harmonic bins.
    pub g_target: f64,
    pub bin_halfwidth_hz: f64,
    /// 1-based inclusive IMF range summed into the reconstruction.
    pub k_range: (usize, usize),
    /// Harmonics outside this band are dropped.
    pub band: (f64, f64),
    pub n_harmonics: usize,
    /// Transform resolution after zero-padding.
    pub resolution_hz: f64,
    /// IMFs whose dominant peak falls outside this band are left out.
    pub imf_peak_band: (f64, f64),
    /// Scale the IMF sum by `1 / (IMFs used)`.
    pub average_imfs: bool,
    pub sift: SiftConfig,
}

impl Default for ExchangeConfig {
    fn default() -> Self {
        Self {
            g_source: 0.0,
            g_target: 1.0,
            bin_halfwidth_hz: 0.5,
            k_range: (1, 3),
            band: (7.0, 70.0),
            n_harmonics: 4,
            resolution_hz: 0.25,
            imf_peak_band: (6.0, 70.0),
            average_imfs: false,
            sift: SiftConfig::default(),
        }
    }
}

/// `{h · base : h = 1..=n_h, h · base ≤ band.hi}` with phases `h · θ`.
pub fn harmonic_set(
    base_hz: f64,
    n_h: usize,
    band: (f64, f64),
    phase_table: &FrequencyTable,
) -> Result<HarmonicSet> {
    if n_h == 0 {
        return Err(Error::invalid("need at least one harmonic"));
    }
    if !(base_hz >= band.0 && base_hz <= band.1) {
        return Err(Error::invalid(format!(
            "base {base_hz} Hz outside band {band:?}"
        )));
    }
    let members: Vec<f64> = (1..=n_h)
        .map(|h| h as f64 * base_hz)
        .take_while(|f| *f <= band.1 + 1e-9)
        .collect();
    if members.is_empty() {
        return Err(Error::invalid("empty harmonic set"));
    }
    let phases = phase_table
        .class_of(base_hz)
        .and_then(|c| phase_table.get(c))
        .map(|s| {
            (1..=members.len())
                .map(|h| h as f64 * s.phase_rad)
                .collect()
        });
    Ok(HarmonicSet {
        base_hz,
        members,
        phases,
    })
}

/// Nearest-bin phasor at each harmonic, scaled so its modulus is the
/// sinusoid amplitude.
pub fn extract_harmonic_bins(
    spec: &ComplexSpectrum,
    hs: &HarmonicSet,
    halfwidth_hz: f64,
) -> Result<Vec<(f64, Complex64)>> {
    if !(halfwidth_hz > 0.0) {
        return Err(Error::invalid("halfwidth must be positive"));
    }
    let nyquist = spec.fs_hz / 2.0;
    hs.members
        .iter()
        .map(|&f| {
            if f >= nyquist {
                return Err(Error::Nyquist {
                    freq_hz: f,
                    fs_hz: spec.fs_hz,
                });
            }
            let k = spec.nearest_bin(f);
            Ok((f, spec.bins[k] * (2.0 / spec.n_signal as f64)))
        })
        .collect()
}

fn transform_len(n: usize, fs_hz: f64, resolution_hz: f64) -> usize {
    n.max((fs_hz / resolution_hz).ceil() as usize)
}

fn check_pairing(
    src: &HarmonicSet,
    tgt: &HarmonicSet,
    cfg: &ExchangeConfig,
    spec: &ComplexSpectrum,
) -> Result<()> {
    if src.len() != tgt.len() {
        return Err(Error::HarmonicCollision(format!(
            "{} source harmonics vs {} target harmonics",
            src.len(),
            tgt.len()
        )));
    }
    let min_gap = src
        .members
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    if 2.0 * cfg.bin_halfwidth_hz >= min_gap {
        return Err(Error::HarmonicCollision(format!(
            "halfwidth {} Hz overlaps harmonics spaced {min_gap} Hz",
            cfg.bin_halfwidth_hz
        )));
    }
    let mut bins: Vec<usize> = tgt.members.iter().map(|f| spec.nearest_bin(*f)).collect();
    bins.sort_unstable();
    if bins.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::HarmonicCollision(
            "two target harmonics share a bin".into(),
        ));
    }
    Ok(())
}

/// Frequency exchange on one IMF, returning the output and the largest
/// imaginary residue of the inverse transform.
///
/// Source amplitudes are read first, then every source band is scaled by
/// `g_source`, then every target bin is written, so source and target sets
/// may share frequencies.
pub fn frequency_exchange_with_residue(
    imf: &[f64],
    fs_hz: f64,
    src: &HarmonicSet,
    tgt: &HarmonicSet,
    cfg: &ExchangeConfig,
) -> Result<(Vec<f64>, f64)> {
    let n = imf.len();
    let pad = transform_len(n, fs_hz, cfg.resolution_hz);
    let mut spec = fft_forward(imf, fs_hz, pad)?;
    check_pairing(src, tgt, cfg, &spec)?;
    if let Some(&f) = tgt.members.iter().find(|f| **f >= fs_hz / 2.0) {
        return Err(Error::Nyquist { freq_hz: f, fs_hz });
    }
    let readings = extract_harmonic_bins(&spec, src, cfg.bin_halfwidth_hz)?;

    let res = spec.resolution_hz();
    for &f in &src.members {
        let lo = ((f - cfg.bin_halfwidth_hz) / res).ceil().max(1.0) as usize;
        let hi = (((f + cfg.bin_halfwidth_hz) / res).floor() as usize).min(spec.bins.len() - 1);
        for bin in &mut spec.bins[lo..=hi] {
            *bin *= cfg.g_source;
        }
    }
    // A sinusoid A sin(2π f t + φ) over n samples occupies a bin of
    // A · pad / 2 at angle φ − π/2 once the transform is truncated back to n.
    for (i, (&f, (_, phasor))) in tgt.members.iter().zip(&readings).enumerate() {
        let amplitude = cfg.g_target * phasor.norm();
        let phase = match &tgt.phases {
            Some(p) => p[i],
            None => phasor.arg() + FRAC_PI_2,
        };
        let k = spec.nearest_bin(f);
        spec.bins[k] = Complex64::from_polar(amplitude * pad as f64 / 2.0, phase - FRAC_PI_2);
    }
    let (mut out, residue) = ifft_inverse_with_residue(&spec)?;
    out.truncate(n);
    Ok((out, residue))
}

pub fn frequency_exchange(
    imf: &[f64],
    fs_hz: f64,
    src: &HarmonicSet,
    tgt: &HarmonicSet,
    cfg: &ExchangeConfig,
) -> Result<Vec<f64>> {
    frequency_exchange_with_residue(imf, fs_hz, src, tgt, cfg).map(|(x, _)| x)
}

fn dominant_freq(x: &[f64], fs_hz: f64, resolution_hz: f64) -> Result<f64> {
    let spec = fft_forward(x, fs_hz, transform_len(x.len(), fs_hz, resolution_hz))?;
    let amp = amplitude_spectrum(&spec);
    let k = (1..amp.len())
        .max_by(|a, b| amp[*a].total_cmp(&amp[*b]))
        .unwrap_or(0);
    Ok(spec.bin_freq(k))
}

fn paired_sets(
    source: f64,
    target: f64,
    cfg: &ExchangeConfig,
    table: &FrequencyTable,
) -> Result<(HarmonicSet, HarmonicSet)> {
    let src = harmonic_set(source, cfg.n_harmonics, cfg.band, table)?;
    let tgt = harmonic_set(target, cfg.n_harmonics, cfg.band, table)?;
    let n = src.len().min(tgt.len());
    Ok((src.truncated(n), tgt.truncated(n)))
}

/// Reconstructs one channel from its decomposition.
fn rebuild_channel(
    imfs: &ImfSet,
    src: &HarmonicSet,
    tgt: &HarmonicSet,
    cfg: &ExchangeConfig,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; imfs.signal_len()];
    let (k_lo, k_hi) = cfg.k_range;
    if k_lo < 1 || k_lo > k_hi {
        return Err(Error::invalid(format!("IMF range {k_lo}..={k_hi} invalid")));
    }
    let mut used = 0usize;
    for imf in imfs.imfs.iter().take(k_hi).skip(k_lo - 1) {
        let peak = dominant_freq(imf, imfs.fs_hz, cfg.resolution_hz)?;
        if peak < cfg.imf_peak_band.0 || peak > cfg.imf_peak_band.1 {
            continue;
        }
        let moved = frequency_exchange(imf, imfs.fs_hz, src, tgt, cfg)?;
        for (o, v) in out.iter_mut().zip(&moved) {
            *o += v;
        }
        used += 1;
    }
    if cfg.average_imfs && used > 1 {
        let k = 1.0 / used as f64;
        out.iter_mut().for_each(|v| *v *= k);
    }
    Ok(out)
}

/// Decomposes `e` once and rebuilds it for every requested target.
pub fn reconstruct_targets(
    e: &Epoch,
    targets: &[StimulusSpec],
    cfg: &ExchangeConfig,
    table: &FrequencyTable,
) -> Result<Vec<Epoch>> {
    let decomposed = emd::sift_epoch(e, &cfg.sift)?;
    targets
        .iter()
        .map(|target| {
            let (src, tgt) = paired_sets(e.stimulus.freq_hz, target.freq_hz, cfg, table)?;
            let channels = decomposed
                .iter()
                .map(|imfs| rebuild_channel(imfs, &src, &tgt, cfg))
                .collect::<Result<Vec<_>>>()?;
            Epoch::from_channels(channels, e.fs_hz, *target, e.trial_id)
        })
        .collect()
}

/// Target-domain version of a source epoch: per channel, sift, exchange the
/// IMFs in range, and sum.
pub fn reconstruct_target(
    e: &Epoch,
    target: StimulusSpec,
    cfg: &ExchangeConfig,
    table: &FrequencyTable,
) -> Result<Epoch> {
    reconstruct_targets(e, &[target], cfg, table).map(|mut v| v.remove(0))
}

/// Source epochs verbatim, followed by every source epoch rebuilt for each
/// other class, ordered by (source position, target class).
pub fn build_training_set(
    source_epochs: &[Epoch],
    table: &FrequencyTable,
    source_classes: &[usize],
    cfg: &ExchangeConfig,
) -> Result<Vec<Epoch>> {
    if source_epochs.is_empty() {
        return Err(Error::invalid("no source epochs"));
    }
    if let Some(e) = source_epochs
        .iter()
        .find(|e| !source_classes.contains(&e.stimulus.class_index))
    {
        return Err(Error::invalid(format!(
            "epoch {} has class {} outside the source set",
            e.trial_id, e.stimulus.class_index
        )));
    }
    let rebuilt: Vec<Vec<Epoch>> = source_epochs
        .par_iter()
        .map(|e| {
            let targets: Vec<StimulusSpec> = table
                .iter()
                .filter(|s| s.class_index != e.stimulus.class_index)
                .copied()
                .collect();
            reconstruct_targets(e, &targets, cfg, table)
        })
        .collect::<Result<_>>()?;
    let mut out = source_epochs.to_vec();
    out.extend(rebuilt.into_iter().flatten());
    Ok(out)
}

/// Pearson correlation of the concatenated per-channel amplitude spectra,
/// restricted to `band`.
pub fn spectral_pcc(a: &Epoch, b: &Epoch, band: (f64, f64)) -> Result<f64> {
    if a.fs_hz != b.fs_hz || a.n_samples() != b.n_samples() || a.n_channels() != b.n_channels() {
        return Err(Error::Dimension(
            "epochs differ in fs, length or channel count".into(),
        ));
    }
    let spectra = |e: &Epoch| -> Result<Vec<f64>> {
        let mut out = Vec::new();
        for c in e.channels() {
            let s = fft_forward(c, e.fs_hz, c.len())?;
            let amp = amplitude_spectrum(&s);
            out.extend(
                amp.iter()
                    .enumerate()
                    .filter(|(k, _)| (band.0..=band.1).contains(&s.bin_freq(*k)))
                    .map(|(_, v)| *v),
            );
        }
        Ok(out)
    };
    pearson(&spectra(a)?, &spectra(b)?)
}

pub(crate) fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::Dimension(
            "correlation inputs differ in length".into(),
        ));
    }
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ZeroVariance("spectrum"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}
