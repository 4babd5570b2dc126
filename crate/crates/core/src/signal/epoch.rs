use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One flicker stimulus: label frequency, base phase and class index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StimulusSpec {
    pub freq_hz: f64,
    pub phase_rad: f64,
    pub class_index: usize,
}

impl StimulusSpec {
    pub fn new(freq_hz: f64, phase_rad: f64, class_index: usize) -> Result<Self> {
        if !freq_hz.is_finite() || freq_hz <= 0.0 {
            return Err(Error::invalid(format!(
                "stimulus frequency must be positive, got {freq_hz}"
            )));
        }
        if !phase_rad.is_finite() {
            return Err(Error::NonFinite("stimulus phase"));
        }
        Ok(Self {
            freq_hz,
            phase_rad,
            class_index,
        })
    }
}

/// The full stimulus set, indexed by class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyTable {
    entries: Vec<StimulusSpec>,
}

impl FrequencyTable {
    /// Entries may come in any order; they are stored sorted by class index,
    /// which must cover `0..n` without gaps.
    pub fn new(mut entries: Vec<StimulusSpec>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("frequency table is empty"));
        }
        entries.sort_by_key(|s| s.class_index);
        for (i, s) in entries.iter().enumerate() {
            if s.class_index != i {
                return Err(Error::invalid(format!(
                    "class indices must be 0..{} without gaps or duplicates",
                    entries.len()
                )));
            }
            StimulusSpec::new(s.freq_hz, s.phase_rad, s.class_index)?;
        }
        for (i, a) in entries.iter().enumerate() {
            for b in &entries[i + 1..] {
                if a.freq_hz == b.freq_hz {
                    return Err(Error::invalid(format!(
                        "duplicate frequency {} Hz",
                        a.freq_hz
                    )));
                }
            }
        }
        Ok(Self { entries })
    }

    /// Builds a table from frequencies with a linear phase progression
    /// `phase_step * class`.
    pub fn from_freqs(freqs: &[f64], phase_step: f64) -> Result<Self> {
        let entries = freqs
            .iter()
            .enumerate()
            .map(|(i, &f)| {
                StimulusSpec::new(
                    f,
                    (phase_step * i as f64).rem_euclid(2.0 * std::f64::consts::PI),
                    i,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(entries)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, class_index: usize) -> Option<&StimulusSpec> {
        self.entries.get(class_index)
    }

    pub fn entries(&self) -> &[StimulusSpec] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = &StimulusSpec> {
        self.entries.iter()
    }

    pub fn max_freq(&self) -> f64 {
        self.entries.iter().map(|s| s.freq_hz).fold(0.0, f64::max)
    }

    /// Class whose frequency equals `freq_hz` to within 1e-9 Hz.
    pub fn class_of(&self, freq_hz: f64) -> Option<usize> {
        self.entries
            .iter()
            .find(|s| (s.freq_hz - freq_hz).abs() < 1e-9)
            .map(|s| s.class_index)
    }
}

/// One multi-channel trial, stored channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Epoch {
    data: Vec<f64>,
    n_channels: usize,
    n_samples: usize,
    pub fs_hz: f64,
    pub stimulus: StimulusSpec,
    pub trial_id: u32,
}

impl Epoch {
    pub fn new(
        data: Vec<f64>,
        n_channels: usize,
        fs_hz: f64,
        stimulus: StimulusSpec,
        trial_id: u32,
    ) -> Result<Self> {
        if n_channels == 0 {
            return Err(Error::invalid("epoch needs at least one channel"));
        }
        if !data.len().is_multiple_of(n_channels) {
            return Err(Error::Dimension(format!(
                "{} samples do not divide into {n_channels} channels",
                data.len()
            )));
        }
        let n_samples = data.len() / n_channels;
        if n_samples < 2 {
            return Err(Error::invalid("epoch needs at least two samples"));
        }
        if !fs_hz.is_finite() || fs_hz <= 0.0 {
            return Err(Error::invalid(format!(
                "sampling rate must be positive, got {fs_hz}"
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("epoch samples"));
        }
        Ok(Self {
            data,
            n_channels,
            n_samples,
            fs_hz,
            stimulus,
            trial_id,
        })
    }

    pub fn from_channels(
        channels: Vec<Vec<f64>>,
        fs_hz: f64,
        stimulus: StimulusSpec,
        trial_id: u32,
    ) -> Result<Self> {
        let n_channels = channels.len();
        let n = channels.first().map_or(0, Vec::len);
        if channels.iter().any(|c| c.len() != n) {
            return Err(Error::Dimension("channels differ in length".into()));
        }
        Self::new(channels.concat(), n_channels, fs_hz, stimulus, trial_id)
    }

    pub fn zeros(
        n_channels: usize,
        n_samples: usize,
        fs_hz: f64,
        stimulus: StimulusSpec,
    ) -> Result<Self> {
        Self::new(
            vec![0.0; n_channels * n_samples],
            n_channels,
            fs_hz,
            stimulus,
            0,
        )
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn duration_s(&self) -> f64 {
        self.n_samples as f64 / self.fs_hz
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.data[c * self.n_samples..(c + 1) * self.n_samples]
    }

    pub fn channels(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_samples)
    }

    /// New epoch with every channel replaced by `f(channel)`; all outputs
    /// must share one length.
    pub fn map_channels<F>(&self, mut f: F) -> Result<Epoch>
    where
        F: FnMut(&[f64]) -> Result<Vec<f64>>,
    {
        let channels = self.channels().map(&mut f).collect::<Result<Vec<_>>>()?;
        Epoch::from_channels(channels, self.fs_hz, self.stimulus, self.trial_id)
    }

    /// Samples `[start, end)` of every channel.
    pub fn slice(&self, start: usize, end: usize) -> Result<Epoch> {
        if start >= end || end > self.n_samples {
            return Err(Error::invalid(format!(
                "sample range {start}..{end} outside epoch of {} samples",
                self.n_samples
            )));
        }
        self.map_channels(|c| Ok(c[start..end].to_vec()))
    }

    pub fn with_stimulus(mut self, stimulus: StimulusSpec) -> Self {
        self.stimulus = stimulus;
        self
    }

    pub fn scaled(&self, k: f64) -> Result<Epoch> {
        self.map_channels(|c| Ok(c.iter().map(|v| v * k).collect()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> StimulusSpec {
        StimulusSpec::new(10.0, 0.0, 0).unwrap()
    }

    #[test]
    fn rejects_degenerate_epochs() {
        assert!(Epoch::new(vec![], 0, 250.0, spec(), 0).is_err());
        assert!(Epoch::new(vec![1.0], 1, 250.0, spec(), 0).is_err());
        assert!(Epoch::new(vec![1.0, f64::NAN], 1, 250.0, spec(), 0).is_err());
        assert!(Epoch::new(vec![1.0, 2.0, 3.0], 2, 250.0, spec(), 0).is_err());
    }

    #[test]
    fn table_requires_contiguous_classes_and_distinct_freqs() {
        let a = StimulusSpec::new(8.0, 0.0, 0).unwrap();
        let b = StimulusSpec::new(9.0, 0.0, 2).unwrap();
        assert!(FrequencyTable::new(vec![a, b]).is_err());
        let c = StimulusSpec::new(8.0, 0.0, 1).unwrap();
        assert!(FrequencyTable::new(vec![a, c]).is_err());
        let t = FrequencyTable::from_freqs(&[8.0, 9.0, 10.0], 0.5).unwrap();
        assert_eq!(t.class_of(9.0), Some(1));
        assert!((t.get(2).unwrap().phase_rad - 1.0).abs() < 1e-12);
    }

    #[test]
    fn channel_accessors() {
        let e = Epoch::from_channels(
            vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]],
            250.0,
            spec(),
            3,
        )
        .unwrap();
        assert_eq!(e.channel(1), &[4.0, 5.0, 6.0]);
        assert_eq!(e.slice(1, 3).unwrap().channel(0), &[2.0, 3.0]);
        assert!(e.slice(2, 2).is_err());
    }
}
