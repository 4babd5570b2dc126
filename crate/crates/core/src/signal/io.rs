//! Epoch binary files, dataset manifests and CSV import.
//!
//! Epoch file layout (little-endian):
//!
//! | offset | type    | field              |
//! |--------|---------|--------------------|
//! | 0      | [u8; 8] | magic `SSVEPE01`   |
//! | 8      | u32     | n_channels         |
//! | 12     | u32     | n_samples          |
//! | 16     | f32     | fs_hz              |
//! | 20     | f32     | stimulus_freq_hz   |
//! | 24     | f32     | stimulus_phase_rad |
//! | 28     | u32     | class_index        |
//! | 32     | u32     | trial_id           |
//! | 36     | f32 ... | samples, channel-major |

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Epoch, FrequencyTable, StimulusSpec};
use crate::error::{Error, Result};

pub const EPOCH_MAGIC: &[u8; 8] = b"SSVEPE01";
pub const EPOCH_HEADER_LEN: usize = 36;

pub fn encode_epoch(e: &Epoch) -> Vec<u8> {
    let mut out = Vec::with_capacity(EPOCH_HEADER_LEN + 4 * e.data().len());
    out.extend_from_slice(EPOCH_MAGIC);
    out.extend_from_slice(&(e.n_channels() as u32).to_le_bytes());
    out.extend_from_slice(&(e.n_samples() as u32).to_le_bytes());
    out.extend_from_slice(&(e.fs_hz as f32).to_le_bytes());
    out.extend_from_slice(&(e.stimulus.freq_hz as f32).to_le_bytes());
    out.extend_from_slice(&(e.stimulus.phase_rad as f32).to_le_bytes());
    out.extend_from_slice(&(e.stimulus.class_index as u32).to_le_bytes());
    out.extend_from_slice(&e.trial_id.to_le_bytes());
    for v in e.data() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

pub fn decode_epoch(bytes: &[u8], path: &Path) -> Result<Epoch> {
    if bytes.len() < EPOCH_HEADER_LEN {
        return Err(Error::format(path, "truncated header"));
    }
    if &bytes[..8] != EPOCH_MAGIC {
        return Err(Error::format(path, "bad magic"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let f32_at = |o: usize| f32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let n_channels = u32_at(8) as usize;
    let n_samples = u32_at(12) as usize;
    let payload = n_channels
        .checked_mul(n_samples)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::format(path, "header dimensions overflow"))?;
    if bytes.len() != EPOCH_HEADER_LEN + payload {
        return Err(Error::format(
            path,
            format!(
                "payload is {} bytes, header promises {payload}",
                bytes.len() - EPOCH_HEADER_LEN
            ),
        ));
    }
    let data: Vec<f64> = bytes[EPOCH_HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::format(path, "non-finite sample"));
    }
    let stimulus = StimulusSpec::new(f32_at(20) as f64, f32_at(24) as f64, u32_at(28) as usize)
        .map_err(|e| Error::format(path, e.to_string()))?;
    Epoch::new(data, n_channels, f32_at(16) as f64, stimulus, u32_at(32))
        .map_err(|e| Error::format(path, e.to_string()))
}

pub fn write_epoch_file(e: &Epoch, path: &Path) -> Result<()> {
    fs::write(path, encode_epoch(e)).map_err(|err| Error::io(path, err))
}

pub fn read_epoch_file(path: &Path) -> Result<Epoch> {
    let bytes = fs::read(path).map_err(|err| Error::io(path, err))?;
    decode_epoch(&bytes, path)
}

/// One row per sample, one column per channel; a header row is skipped if
/// its first field does not parse as a number.
pub fn read_csv_epoch(
    path: &Path,
    fs_hz: f64,
    stimulus: StimulusSpec,
    trial_id: u32,
) -> Result<Epoch> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::format(path, e.to_string()))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::format(path, e.to_string()))?;
        let parsed: std::result::Result<Vec<f64>, _> =
            record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if i == 0 => continue,
            Err(e) => return Err(Error::format(path, format!("row {}: {e}", i + 1))),
        }
    }
    let n_channels = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != n_channels) {
        return Err(Error::format(path, "ragged rows"));
    }
    let channels: Vec<Vec<f64>> = (0..n_channels)
        .map(|c| rows.iter().map(|r| r[c]).collect())
        .collect();
    Epoch::from_channels(channels, fs_hz, stimulus, trial_id)
        .map_err(|e| Error::format(path, e.to_string()))
}

/// Manifest entry for one stimulus class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassEntry {
    pub class: usize,
    pub freq_hz: f64,
    #[serde(default)]
    pub phase_rad: f64,
    pub files: Vec<PathBuf>,
}

/// TOML dataset manifest: frequency table plus trial files per class.
/// Relative paths resolve against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    /// Required for CSV trials, checked against binary trials.
    pub fs_hz: Option<f64>,
    #[serde(rename = "stimulus")]
    pub classes: Vec<ClassEntry>,
}

impl DatasetManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self).map_err(|e| Error::format(path, e.to_string()))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn table(&self) -> Result<FrequencyTable> {
        FrequencyTable::new(
            self.classes
                .iter()
                .map(|c| StimulusSpec::new(c.freq_hz, c.phase_rad, c.class))
                .collect::<Result<Vec<_>>>()?,
        )
    }
}

/// Trials grouped by class, sharing one frequency table.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub table: FrequencyTable,
    /// `trials[class][i]`
    pub trials: Vec<Vec<Epoch>>,
}

impl Dataset {
    pub fn new(table: FrequencyTable, trials: Vec<Vec<Epoch>>) -> Result<Self> {
        if trials.len() != table.len() {
            return Err(Error::Dimension(format!(
                "{} trial groups for {} classes",
                trials.len(),
                table.len()
            )));
        }
        for (class, group) in trials.iter().enumerate() {
            if let Some(e) = group.iter().find(|e| e.stimulus.class_index != class) {
                return Err(Error::invalid(format!(
                    "trial {} labelled class {} filed under class {class}",
                    e.trial_id, e.stimulus.class_index
                )));
            }
        }
        Ok(Self { table, trials })
    }

    pub fn fs_hz(&self) -> Option<f64> {
        self.trials.iter().flatten().next().map(|e| e.fs_hz)
    }

    /// Smallest per-class trial count.
    pub fn min_trials(&self) -> usize {
        self.trials.iter().map(Vec::len).min().unwrap_or(0)
    }

    pub fn load(manifest_path: &Path) -> Result<Self> {
        let manifest = DatasetManifest::read(manifest_path)?;
        let table = manifest.table()?;
        let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
        let mut trials = vec![Vec::new(); table.len()];
        for entry in &manifest.classes {
            let stimulus = *table.get(entry.class).expect("table built from entries");
            for (i, rel) in entry.files.iter().enumerate() {
                let path = base.join(rel);
                let is_csv = path
                    .extension()
                    .is_some_and(|x| x.eq_ignore_ascii_case("csv"));
                let epoch = if is_csv {
                    let fs_hz = manifest.fs_hz.ok_or_else(|| {
                        Error::format(manifest_path, "fs_hz is required for CSV trials")
                    })?;
                    read_csv_epoch(&path, fs_hz, stimulus, i as u32)?
                } else {
                    let e = read_epoch_file(&path)?;
                    if e.stimulus.class_index != entry.class {
                        return Err(Error::format(
                            &path,
                            format!(
                                "file says class {}, manifest says {}",
                                e.stimulus.class_index, entry.class
                            ),
                        ));
                    }
                    if let Some(fs_hz) = manifest.fs_hz {
                        if (e.fs_hz - fs_hz).abs() > 1e-3 {
                            return Err(Error::format(
                                &path,
                                format!("fs {} Hz, manifest says {fs_hz}", e.fs_hz),
                            ));
                        }
                    }
                    e.with_stimulus(stimulus)
                };
                trials[entry.class].push(epoch);
            }
        }
        Self::new(table, trials)
    }

    /// Writes every trial as an epoch file under `dir` plus `manifest.toml`.
    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut classes = Vec::with_capacity(self.table.len());
        for (spec, group) in self.table.iter().zip(&self.trials) {
            let mut files = Vec::with_capacity(group.len());
            for (i, e) in group.iter().enumerate() {
                let name =
                    PathBuf::from(format!("class{:02}_trial{:03}.epoch", spec.class_index, i));
                write_epoch_file(e, &dir.join(&name))?;
                files.push(name);
            }
            classes.push(ClassEntry {
                class: spec.class_index,
                freq_hz: spec.freq_hz,
                phase_rad: spec.phase_rad,
                files,
            });
        }
        let manifest = DatasetManifest {
            fs_hz: self.fs_hz(),
            classes,
        };
        let path = dir.join("manifest.toml");
        manifest.write(&path)?;
        Ok(path)
    }
}
